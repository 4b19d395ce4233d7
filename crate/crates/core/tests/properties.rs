//! Invariants sampled with proptest.

use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use parametrix::bounds::{pointwise_bound, EnvelopeSpec};
use parametrix::catalog::{ex1_a, example_catalog};
use parametrix::frozen::FrozenKernelEvaluator;
use parametrix::oracles::{bump, cauchy_closed_form, OracleResult, StableLaw, StableReference};
use parametrix::profile::{power_law, ScalingCertificate};
use parametrix::report::VerificationReport;
use parametrix::special::beta;
use parametrix::symbol::FrozenSymbol;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn h_decreasing_and_dominates_k(alpha in 0.3f64..1.9, r in 1e-4f64..10.0, lam in 0.01f64..1.0) {
        let p = power_law(1, alpha, 1.0);
        let (h, hl) = (p.h(r).unwrap(), p.h(lam * r).unwrap());
        prop_assert!(hl >= h);
        prop_assert!(p.k(r).unwrap() <= h);
    }

    #[test]
    fn r_t_inverts_h(alpha in 0.3f64..1.9, r in 1e-3f64..5.0) {
        let p = power_law(1, alpha, 1.0);
        let t = 1.0 / p.h(r).unwrap();
        let back = p.r_t(t).unwrap();
        prop_assert!((back - r).abs() <= 1e-8 * r);
    }

    #[test]
    fn scaling_certificate_holds(alpha in 0.3f64..1.9, r in 1e-4f64..1.0, lam in 1e-4f64..1.0) {
        let p = power_law(1, alpha, 1.0);
        let cert = ScalingCertificate::fit(&p, alpha, ScalingCertificate::default_grid()).unwrap();
        let lhs = p.h(r).unwrap();
        let rhs = cert.c_h * lam.powf(alpha) * p.h(lam * r).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-10));
    }

    #[test]
    fn time_convolution_inequality(alpha in 0.5f64..1.5, t in 0.01f64..0.5, eps in 0.1f64..1.0, k in 1.0f64..4.0) {
        let p = power_law(1, alpha, 1.0);
        let (lhs, rhs) = p.time_convolution(t, eps, k).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
    }

    #[test]
    fn beta_is_symmetric(a in 0.05f64..3.0, b in 0.05f64..3.0) {
        prop_assert!((beta(a, b) - beta(b, a)).abs() <= 1e-12 * beta(a, b));
    }

    #[test]
    fn drift_at_unit_scale_is_b(x in -3.0f64..3.0) {
        for name in ["ex1", "cauchy-const", "two-term"] {
            let (c, _) = example_catalog(name).unwrap();
            let b = c.effective_drift(&[x], 1.0).unwrap();
            prop_assert!((b[0] - c.b(&[x])[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_kernel_has_no_drift(x in -3.0f64..3.0, r in 1e-6f64..1.0) {
        let (c, _) = example_catalog("cauchy-const").unwrap();
        prop_assert!(c.effective_drift(&[x], r).unwrap()[0].abs() < 1e-10);
    }

    #[test]
    fn ex1_drift_is_logarithmic(x in -1.0f64..2.0, r in 1e-6f64..1.0) {
        let (c, _) = example_catalog("ex1").unwrap();
        let b = c.effective_drift(&[x], r).unwrap()[0];
        let exact = -ex1_a(x) * (1.0 / r).ln();
        prop_assert!((b - exact).abs() <= 1e-8 * exact.abs().max(1.0));
    }

    #[test]
    fn envelope_is_linear_in_scale(t in 0.005f64..0.1, x in -1.0f64..2.0, u in -2.0f64..2.0, c in 0.1f64..10.0) {
        let (co, p) = example_catalog("ex1").unwrap();
        let spec = EnvelopeSpec::new(&co, &p, 0.175).unwrap();
        let one = pointwise_bound(&spec, &co, t, x, x + u).unwrap();
        let scaled = pointwise_bound(&spec.clone().with_scale(c), &co, t, x, x + u).unwrap();
        prop_assert!(one > 0.0);
        prop_assert!((scaled - c * one).abs() <= 1e-12 * scaled);
    }

    #[test]
    fn oracle_pass_rule(o in -10.0f64..10.0, e in -10.0f64..10.0, at in 0.0f64..1.0, rt in 0.0f64..1.0) {
        let r = OracleResult::new("x", vec![], o, e, at, rt);
        let expect = (e - o).abs() <= at || (o != 0.0 && (e - o).abs() / o.abs() <= rt);
        prop_assert_eq!(r.pass, expect);
    }

    #[test]
    fn cauchy_self_similarity(t in 0.01f64..1.0, u in -5.0f64..5.0, lam in 0.1f64..10.0) {
        let a = cauchy_closed_form(lam * t, 0.0, lam * u, 1.0);
        let b = cauchy_closed_form(t, 0.0, u, 1.0) / lam;
        prop_assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn bump_is_a_unit_bump(c in -1.0f64..1.0, h in 0.1f64..2.0, y in -4.0f64..4.0) {
        let f = bump(c, h);
        let v = f(y);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(((y - c).abs() < h) == (v > 0.0));
        prop_assert!((f(c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn report_max_ratio_dominates(vals in prop::collection::vec((0.0f64..10.0, 0.01f64..10.0), 1..20)) {
        let mut rep = VerificationReport::new("p");
        for (k, (l, r)) in vals.iter().enumerate() {
            rep.push(vec![k as f64], *l, *r);
        }
        let m = rep.max_ratio();
        prop_assert!(rep.entries.iter().all(|e| e.ratio <= m));
        prop_assert_eq!(rep.worst().unwrap().ratio, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stable_mirror(kp in 0.2f64..2.0, km in 0.2f64..2.0, v in -20.0f64..20.0) {
        let a = StableReference::new(kp, km).unwrap();
        let b = StableReference::new(km, kp).unwrap();
        let (fa, da) = a.eval(v).unwrap();
        let (fb, db) = b.eval(-v).unwrap();
        prop_assert!(fa > 0.0);
        prop_assert!((fa - fb).abs() <= 1e-12 * fa.max(1e-3));
        prop_assert!((da + db).abs() <= 1e-10 * da.abs().max(1e-3));
    }

    #[test]
    fn frozen_density_is_a_probability(w in -1.0f64..2.0, t in 0.01f64..1.0, u in -3.0f64..3.0) {
        let (c, _) = example_catalog("ex1").unwrap();
        let ev = FrozenKernelEvaluator::new(FrozenSymbol::new(Arc::new(c), &[w]).unwrap());
        let v = ev.density(t, &[0.0], &[u]).unwrap();
        prop_assert!(v.raw >= -1e-10);
        let st = StableReference::new(1.5, 0.5).unwrap();
        let exact = st.density(ex1_a(w), t, u).unwrap();
        prop_assert!((v.raw - exact).abs() <= 1e-6 * exact.max(1e-3));
    }

    #[test]
    fn cauchy_frozen_matches_closed_form(t in 0.02f64..0.5, u in -5.0f64..5.0) {
        let (c, _) = example_catalog("cauchy-const").unwrap();
        let ev = FrozenKernelEvaluator::new(FrozenSymbol::new(Arc::new(c), &[0.0]).unwrap());
        let v = ev.density(t, &[0.0], &[u]).unwrap().value;
        let g = PI * t;
        let exact = g / (PI * (g * g + u * u));
        prop_assert!((v - exact).abs() <= 1e-6 * exact);
    }
}
