use std::collections::BTreeMap;
use std::sync::Arc;

use lsabr_core::coeffs::variance;
use lsabr_core::fdsolver::{assemble, steps_for, Generator, Stepper, ThetaScheme};
use lsabr_core::io::{read_field_csv, write_field_csv};
use lsabr_core::model::{payoff_sample, weighted_l2_distance, weighted_l2_norm, PayoffKind, SigmaProfile};
use lsabr_core::semigroups::{composite_apply, kernel_density, price_zero_volvol, Ordering, QuadratureSpec};
use lsabr_core::verify::run_garding_suite;
use lsabr_core::{Grid2D, ModelParams, Payoff, WeightSpec};

fn params() -> ModelParams {
    ModelParams::study_default()
}

#[test]
fn kernel_is_a_martingale_density() {
    let p = params();
    let (t, sigma, x) = (0.75, 0.3, 0.1);
    let d = variance(&p, t, sigma).unwrap();
    let half = 12.0 * (2.0 * d).sqrt();
    let n = 4000;
    let h = 2.0 * half / n as f64;
    let (mut mass, mut mart) = (0.0, 0.0);
    for k in 0..=n {
        let y = x - d - half + k as f64 * h;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 } * h;
        let k_val = kernel_density(&p, t, sigma, x, y).unwrap();
        mass += w * k_val;
        mart += w * k_val * y.exp();
    }
    assert!((mass - 1.0).abs() < 1e-10, "{mass}");
    assert!((mart / x.exp() - 1.0).abs() < 1e-10, "{mart}");
}

#[test]
fn call_prices_are_arbitrage_free_in_strike() {
    let p = params();
    let strikes: Vec<f64> = (1..40).map(|k| 0.5 + 0.025 * k as f64).collect();
    let c: Vec<f64> = strikes.iter().map(|&k| price_zero_volvol(&p, 1.0, k, 0.25, 0.0).unwrap()).collect();
    for w in c.windows(2) {
        assert!(w[1] < w[0]);
    }
    for w in c.windows(3) {
        assert!(w[0] - 2.0 * w[1] + w[2] > 0.0);
    }
    assert_eq!(price_zero_volvol(&p, 0.0, 0.9, 0.25, 0.0).unwrap(), 1.0 - 0.9);
    assert!(price_zero_volvol(&p, -1.0, 1.0, 0.25, 0.0).is_err());
}

#[test]
fn fd_at_zero_volvol_tracks_closed_form_on_a_bump() {
    let p = params();
    let g = Arc::new(Grid2D::uniform(&p, 56, -5.0, 5.0, 121).unwrap());
    let payoff = Payoff::new(
        PayoffKind::GaussianBump { center: 0.0, width: 1.0 },
        SigmaProfile::bump(&g, 0.3, 0.2),
    )
    .unwrap();
    let h = payoff_sample(&payoff, &g).unwrap();
    let op = assemble(&p, &g, Generator::L).unwrap();
    let (n, dt) = steps_for(0.5, 0.01);
    let fd = Stepper::new(&op, ThetaScheme::crank_nicolson(dt).unwrap())
        .unwrap()
        .advance(&op.restrict(&h).unwrap(), n)
        .unwrap();
    let q = QuadratureSpec::default();
    let exact = composite_apply(&p, 0.5, &h, &q, Ordering::HeatAfterTransport).unwrap().field;
    let w = WeightSpec::from(&p);
    let rel = weighted_l2_distance(&fd, &op.restrict(&exact).unwrap(), &w).unwrap() / weighted_l2_norm(&h, &w);
    assert!(rel < 5e-3, "{rel}");
}

#[test]
fn solved_field_survives_csv() {
    let p = params();
    let g = Arc::new(Grid2D::uniform(&p, 12, -3.0, 3.0, 31).unwrap());
    let h = payoff_sample(&Payoff::new(PayoffKind::GaussianBump { center: 0.2, width: 0.7 }, SigmaProfile::Constant).unwrap(), &g)
        .unwrap();
    let u = composite_apply(&p, 0.3, &h, &QuadratureSpec::default(), Ordering::HeatAfterTransport).unwrap().field;
    let meta = BTreeMap::from([("t".to_string(), "0.3".to_string())]);
    let mut buf = vec![];
    write_field_csv(&mut buf, &u, &meta).unwrap();
    let (back, meta_back) = read_field_csv(buf.as_slice()).unwrap();
    assert_eq!(back.values(), u.values());
    assert_eq!(back.grid().as_ref(), g.as_ref());
    assert_eq!(meta_back, meta);
}

#[test]
fn garding_report_is_reproducible_and_seed_sensitive() {
    let p = params().with_nu(0.2);
    let g = Arc::new(Grid2D::uniform(&p, 16, -3.0, 3.0, 31).unwrap());
    let a = run_garding_suite(&p, &g, 40, 9).unwrap().to_json();
    let b = run_garding_suite(&p, &g, 40, 9).unwrap().to_json();
    let c = run_garding_suite(&p, &g, 40, 10).unwrap().to_json();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
