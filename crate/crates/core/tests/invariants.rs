use proptest::prelude::*;

use semistable::exponents::{
    critical_sobolev, gamma, p_joseph_lundgren, regime, s_alpha, ProblemParams, Regime,
};
use semistable::families::{gelfand_log_family, power_family};
use semistable::functionals::{key_functional, key_functional_segments, stability_form, TestFunctionSpec};
use semistable::harness::{telescoping, SweepConfig};
use semistable::quadrature::QuadratureSpec;
use semistable::spectra::{assemble, min_eigenvalue};

fn pp(n: f64, a: f64) -> ProblemParams {
    ProblemParams::new(n, a).unwrap()
}

#[test]
fn joseph_lundgren_matches_classical_formula() {
    for n in 11..=20 {
        let n = n as f64;
        let p = pp(n, 0.0);
        let classical = ((n - 2.0).powi(2) - 4.0 * n + 8.0 * (n - 1.0).sqrt()) / ((n - 2.0) * (n - 10.0));
        let jl = p_joseph_lundgren(&p).finite().unwrap();
        assert!((jl - classical).abs() <= 1e-12 * classical, "N={n}");
        assert!(jl > critical_sobolev(&p).finite().unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gamma_vanishes_on_critical_line(a in -1.99f64..8.0) {
        prop_assert!(gamma(&pp(10.0 + 4.0 * a, a)).abs() <= 1e-12);
    }

    #[test]
    fn gamma_sign_follows_regime(n in 2.0f64..40.0, a in -1.99f64..8.0) {
        let p = pp(n, a);
        let g = gamma(&p);
        match regime(&p) {
            Regime::Subcritical => prop_assert!(g > 0.0),
            Regime::Critical => prop_assert!(g.abs() <= 1e-12),
            Regime::Supercritical => prop_assert!(g < 0.0),
        }
    }

    #[test]
    fn s_alpha_relation(n in 2.0f64..40.0, a in -1.99f64..8.0) {
        let p = pp(n, a);
        prop_assert!((3.0 - n - 2.0 * s_alpha(&p) - (2.0 * gamma(&p) - 1.0)).abs() <= 1e-12 * n.max(1.0));
    }

    #[test]
    fn key_functional_splits_additively(c in 0.05f64..0.95, n in 10.0f64..16.0) {
        let prof = gelfand_log_family(pp(n, 0.0)).unwrap();
        let quad = QuadratureSpec::default();
        let v = TestFunctionSpec::LinearRamp;
        let whole = key_functional(&prof, 0.01, 1.0, &v, &quad).unwrap();
        let parts = key_functional(&prof, 0.01, c, &v, &quad).unwrap() + key_functional(&prof, c, 1.0, &v, &quad).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1.0));
    }

    #[test]
    fn stability_form_scales_like_power_of_radius(a in 0.01f64..0.5) {
        // the potential is C / t^2, so the form on (a, 2a) scales as a^{N-2}
        let p = pp(11.0, 0.0);
        let prof = power_family(p, -1.0).unwrap();
        let quad = QuadratureSpec::default();
        let reference = stability_form(&prof, &TestFunctionSpec::Hat { a: 0.25, b: 0.5 }, &quad).unwrap() / 0.25f64.powi(9);
        let q = stability_form(&prof, &TestFunctionSpec::Hat { a, b: 2.0 * a }, &quad).unwrap() / a.powi(9);
        prop_assert!((q - reference).abs() <= 1e-8 * reference.abs());
    }

    #[test]
    fn middle_piece_contributes_nothing(n in 3.0f64..20.0, a in -1.5f64..3.0, r in 0.02f64..0.4) {
        let p = pp(n, a);
        let prof = power_family(p, -0.5).unwrap();
        let v = TestFunctionSpec::ThreePiecePower { r, s: s_alpha(&p), beta: 1.0 };
        let segs = key_functional_segments(&prof, r / 2.0, 1.0, &v, &QuadratureSpec::default()).unwrap();
        let middle = segs.iter().find(|s| s.0 == r && s.1 == 0.5).unwrap();
        let scale: f64 = segs.iter().map(|s| s.2.abs()).sum();
        prop_assert!(middle.2.abs() <= 1e-9 * scale.max(1e-300), "{segs:?}");
    }

    #[test]
    fn ladder_sum_dominates_direct_difference(n in 11.0f64..20.0, frac in 0.05f64..1.0) {
        let p = pp(n, 0.0);
        let prof = power_family(p, frac * gamma(&p)).unwrap();
        let (direct, sum) = telescoping(&prof, 1.0, 14);
        prop_assert!(direct <= sum * (1.0 + 1e-12));
        prop_assert!((direct - sum).abs() <= 1e-12 * sum, "monotone profile telescopes exactly");
    }

    #[test]
    fn rayleigh_quotient_bounds_bottom_eigenvalue(seed in proptest::collection::vec(-1.0f64..1.0, 127)) {
        let prof = power_family(pp(12.0, 0.0), -0.7).unwrap();
        let ep = assemble(&prof, 0.05, 128).unwrap();
        let lam = min_eigenvalue(&ep).unwrap();
        prop_assume!(seed.iter().any(|x| x.abs() > 1e-3));
        prop_assert!(ep.rayleigh_quotient(&seed) >= lam.lambda_min - lam.tol_eig);
    }

    #[test]
    fn sweep_config_round_trips(ns in proptest::collection::vec(2.0f64..30.0, 1..4), depth in 10usize..20) {
        let json = serde_json::json!({
            "grid": {"n": ns, "alpha": [0.0]},
            "subjects": [{"kind": "gelfand_log"}, {"kind": "power", "g": "half_gamma"}],
            "checks": ["exponents", "theorem"],
            "tolerances": {"ladder_depth": depth},
            "output_dir": "out"
        });
        let cfg = SweepConfig::from_json(&json.to_string()).unwrap();
        let again = SweepConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(cfg, again);
    }
}
