//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use semistable::exponents::{
    gamma, hardy_constant, power_stability_margin, regime, s_alpha, ProblemParams, Regime,
};
use semistable::families::{
    brezis_vazquez_family, brezis_vazquez_hardy_product, brezis_vazquez_range, gelfand_log_family,
    is_h1, power_family, whole_space_gelfand,
};
use semistable::harness::{
    check_key_lemma, check_lemma_2_5, check_prop_2_6, check_theorem, default_key_test_functions,
    ratio_spread, run_sweep, Check, ExponentChoice, Grid, NamedExponent, Subject, SubjectSpec,
    SweepConfig, Tolerances, DEFAULT_KEY_RADII,
};
use semistable::profile::{log_grid, relative_residual, Profile};
use semistable::radial_solver::{solve_gelfand_branch, SolverConfig};
use semistable::spectra::{
    assemble_with_weight, is_semistable, min_eigenvalue, StabilityProtocol, Verdict,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn pp(n: f64, a: f64) -> ProblemParams {
    ProblemParams::new(n, a).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn exponent_identities() -> Outcome {
    for a in [-1.9, -1.5, -1.0, 0.0, 1.0, 2.5, 5.0] {
        let g = gamma(&pp(10.0 + 4.0 * a, a));
        ensure(g.abs() <= 1e-12, || format!("gamma(10+4a, a={a}) = {g:e}"))?;
    }
    let mut worst = 0.0f64;
    for n in linspace(2.0, 40.0, 50) {
        for a in linspace(-1.95, 8.0, 50) {
            let p = pp(n, a);
            let g = gamma(&p);
            let ok = match regime(&p) {
                Regime::Subcritical => g > 0.0,
                Regime::Critical => g.abs() <= 1e-12,
                Regime::Supercritical => g < 0.0,
            };
            ensure(ok, || format!("sign of gamma={g} disagrees with regime at {p}"))?;
            worst = worst.max((3.0 - n - 2.0 * s_alpha(&p) - (2.0 * g - 1.0)).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("s_alpha identity off by {worst:e}"))?;
    Ok(format!("2500 grid points, identity residual {worst:.1e}"))
}

fn hardy_saturation() -> Outcome {
    let mut worst = 0.0f64;
    for n in 11..=20 {
        for a in [-1.0, 0.0, 1.0] {
            let p = pp(n as f64, a);
            worst = worst.max(power_stability_margin(&p, gamma(&p)).abs());
            let n = n as f64;
            let expanded = ((n + a).powi(2) - (a + 2.0) * (a + 2.0 * n - 2.0)) / 4.0;
            ensure((expanded - hardy_constant(&p)).abs() <= 1e-10, || format!("expansion at {p}"))?;
        }
    }
    ensure(worst <= 1e-10, || format!("margin at gamma = {worst:e}"))?;
    Ok(format!("max |margin| {worst:.1e}"))
}

fn family_residuals() -> Outcome {
    let mut profiles: Vec<Box<dyn Profile>> = Vec::new();
    for (n, a) in [(3.0, 0.0), (10.0, 0.0), (14.0, 1.0), (8.0, -0.5), (11.0, 0.0)] {
        profiles.push(Box::new(gelfand_log_family(pp(n, a)).unwrap()));
        profiles.push(Box::new(whole_space_gelfand(pp(n, a)).unwrap()));
    }
    for (n, a) in [(11.0, 0.0), (15.0, 1.0), (12.0, -1.0)] {
        let p = pp(n, a);
        for g in [gamma(&p), 0.5 * gamma(&p), -1.5] {
            profiles.push(Box::new(power_family(p, g).unwrap()));
        }
    }
    for n in [3.0, 10.0, 12.0] {
        let (lo, hi) = brezis_vazquez_range(n);
        for q in [hi, 0.5 * (lo + hi), lo + 1e-3] {
            profiles.push(Box::new(brezis_vazquez_family(pp(n, 0.0), q).unwrap()));
        }
    }
    let grid = log_grid(1e-3, 1.0, 64);
    let mut worst = (0.0f64, String::new());
    for prof in &profiles {
        for &r in &grid {
            let res = relative_residual(prof.as_ref(), r);
            if res > worst.0 || res.is_nan() {
                worst = (res, prof.label());
            }
        }
    }
    ensure(worst.0 <= 1e-8, || format!("residual {:e} for {}", worst.0, worst.1))?;
    Ok(format!("{} profiles, max relative residual {:.1e}", profiles.len(), worst.0))
}

fn hardy_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for a in [-1.5, -1.0, 0.0, 0.5, 1.0, 2.5] {
        let p = pp(10.0 + 4.0 * a, a);
        let prof = gelfand_log_family(p).unwrap();
        let h = hardy_constant(&p);
        for r in log_grid(1e-6, 1.0, 200) {
            // exp((2+alpha) u) amplifies the rounding of u = -ln r by its argument
            let rounding = 4.0 * f64::EPSILON * (1.0 + ((2.0 + a) * r.ln()).abs());
            worst = worst.max((r * r * prof.weight(r) - h).abs() / h / rounding);
        }
    }
    ensure(worst <= 1.0, || format!("deviation {worst:.2} times the rounding bound"))?;
    Ok(format!("deviation at most {worst:.2} times the rounding bound 4 eps (1 + |(2+alpha) ln r|)"))
}

fn eigen_oracle() -> Outcome {
    let exact = 4.0 * std::f64::consts::PI.powi(2);
    let solve = |n| min_eigenvalue(&assemble_with_weight(pp(3.0, 0.0), |_| 0.0, 0.5, n).unwrap()).unwrap().lambda_min;
    let fine = solve(4096);
    let rel = (fine - exact).abs() / exact;
    ensure(rel <= 1e-3, || format!("lambda={fine}, relative error {rel:e}"))?;
    let errs: Vec<f64> = [128, 256, 512].iter().map(|&n| (solve(n) - exact).abs()).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(orders.iter().all(|o| (*o - 2.0).abs() < 0.1), || format!("observed orders {orders:?}"))?;
    Ok(format!("lambda(4096)={fine:.6}, relative error {rel:.1e}, orders {:.3}/{:.3}", orders[0], orders[1]))
}

fn stability_subjects() -> Vec<Box<dyn Profile>> {
    let mut out: Vec<Box<dyn Profile>> = Vec::new();
    for a in [0.0, 1.0] {
        out.push(Box::new(gelfand_log_family(pp(10.0 + 4.0 * a, a)).unwrap()));
    }
    for (n, a) in [(11.0, 0.0), (13.0, 0.0), (16.0, 1.0)] {
        let p = pp(n, a);
        out.push(Box::new(power_family(p, gamma(&p)).unwrap()));
        out.push(Box::new(power_family(p, 0.5 * gamma(&p)).unwrap()));
    }
    out
}

fn stability_verdicts() -> Outcome {
    let proto = StabilityProtocol::default();
    let mut count = 0;
    for prof in stability_subjects() {
        let v = is_semistable(prof.as_ref(), &proto).map_err(|e| e.to_string())?;
        ensure(v.verdict == Verdict::SemiStable, || format!("{}: {:?} margin {:e}", prof.label(), v.verdict, v.margin))?;
        ensure(v.entries.iter().all(|e| e.lambda_min >= -e.tol_eig), || format!("{}: unstable entry", prof.label()))?;
        count += 1;
    }
    for (n, a) in [(11.0, 0.0), (13.0, 0.0), (16.0, 1.0)] {
        let p = pp(n, a);
        let prof = power_family(p, gamma(&p) - 0.5).unwrap();
        let v = is_semistable(&prof, &proto).map_err(|e| e.to_string())?;
        ensure(v.verdict == Verdict::Unstable, || format!("{}: {:?}", prof.label(), v.verdict))?;
        ensure(v.entries.iter().all(|e| e.lambda_min < -10.0 * e.tol_eig), || format!("{}: protocol split", prof.label()))?;
        count += 1;
    }
    Ok(format!("{count} subjects, verdicts uniform over the 3x3 protocol"))
}

fn key_lemma() -> Outcome {
    let tol = Tolerances::default();
    let proto = StabilityProtocol::default();
    let mut rows = 0;
    let mut worst_limit = 0.0f64;
    for prof in stability_subjects() {
        let p = *prof.params();
        let label = prof.label();
        let subject = Subject::certify(prof, &proto).map_err(|e| e.to_string())?;
        let vs = default_key_test_functions(&p).map_err(|e| e.to_string())?;
        let rep = check_key_lemma(&subject, &vs, &DEFAULT_KEY_RADII, &tol).map_err(|e| e.to_string())?;
        for row in &rep.key_lemma {
            ensure(row.nonnegative, || format!("{label}: I={:e} (scale {:e}) for {} at r0={}", row.value, row.scale, row.test_function, row.r0))?;
            let finest = row.truncation.last().unwrap().2;
            worst_limit = worst_limit.max(finest);
            ensure(row.limit_within_tolerance, || format!("{label}: truncation off by {finest:e} for {} at r0={}", row.test_function, row.r0))?;
            rows += 1;
        }
    }
    // the bounded branch solution: positivity, and the truncation error shrinking with eps
    let sol = solve_gelfand_branch(&pp(3.0, 0.0), 1.0, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let subject = Subject::certify(Box::new(sol), &proto).map_err(|e| e.to_string())?;
    let vs = default_key_test_functions(&pp(3.0, 0.0)).map_err(|e| e.to_string())?;
    let rep = check_key_lemma(&subject, &vs, &DEFAULT_KEY_RADII, &tol).map_err(|e| e.to_string())?;
    for row in &rep.key_lemma {
        ensure(row.nonnegative && row.limit_rate_ok, || format!("branch: {row:?}"))?;
        rows += 1;
    }
    Ok(format!("{rows} (subject, v, r0) cases; worst truncation distance {worst_limit:.2e} at eps=r0/64"))
}

fn derivative_sign() -> Outcome {
    let cfg = SolverConfig::default();
    let mut out = Vec::new();
    for a in [0.0, -1.0] {
        let sol = solve_gelfand_branch(&pp(3.0, a), 1.0, &cfg).map_err(|e| e.to_string())?;
        let rep = sol.derivative_sign_profile();
        ensure(!rep.constant && rep.sign_changes.is_empty(), || format!("alpha={a}: {rep:?}"))?;
        let eps = sol.config().eps_start;
        ensure(
            sol.mesh().iter().zip(sol.ur_values()).all(|(r, d)| *r < eps || *d < 0.0),
            || format!("alpha={a}: u_r >= 0 somewhere"),
        )?;
        out.push(format!("alpha={a}: u(0)={:.6}", sol.center_value()));
    }
    Ok(out.join(", "))
}

fn ratio_profiles() -> Outcome {
    let p = pp(11.0, 0.0);
    let subject = Subject::certify(Box::new(power_family(p, gamma(&p)).unwrap()), &StabilityProtocol::default())
        .map_err(|e| e.to_string())?;
    let tol = Tolerances::default();
    let lemma = check_lemma_2_5(&subject, &tol).map_err(|e| e.to_string())?;
    let prop = check_prop_2_6(&subject, &tol).map_err(|e| e.to_string())?;
    let thm = check_theorem(&subject, &tol).map_err(|e| e.to_string())?;
    let deepest = lemma.samples.last().unwrap().r;
    ensure(deepest <= 1e-4, || format!("ladder stops at {deepest}"))?;
    let tel: Vec<f64> = thm.telescoped.iter().map(|s| s.ratio).collect();
    let spreads = [ratio_spread(&lemma.ratios()), ratio_spread(&prop.ratios()), ratio_spread(&tel)];
    ensure(spreads.iter().all(|s| *s <= 1e-8), || format!("spreads {spreads:?}"))?;
    ensure(lemma.verdict && prop.verdict && thm.verdict, || "a ratio verdict failed".into())?;
    Ok(format!("spreads {:.1e}/{:.1e}/{:.1e} down to r={deepest:.1e}", spreads[0], spreads[1], spreads[2]))
}

fn h1_gate() -> Outcome {
    let mut eligible = stability_subjects();
    for a in [0.0, -1.0] {
        eligible.push(Box::new(solve_gelfand_branch(&pp(3.0, a), 1.0, &SolverConfig::default()).map_err(|e| e.to_string())?));
    }
    for prof in &eligible {
        let rep = is_h1(prof.as_ref()).map_err(|e| e.to_string())?;
        ensure(rep.member, || format!("{} reported outside H^1", prof.label()))?;
    }
    let mut bv = 0;
    for n in [10.0, 12.0] {
        let (lo, hi) = brezis_vazquez_range(n);
        for i in 1..=20 {
            let q = lo + (hi - lo) * i as f64 / 20.0;
            let prof = brezis_vazquez_family(pp(n, 0.0), q).map_err(|e| e.to_string())?;
            let rep = is_h1(&prof).map_err(|e| e.to_string())?;
            ensure(!rep.member, || format!("{} reported in H^1", prof.label()))?;
            bv += 1;
        }
        let sat = brezis_vazquez_hardy_product(n, lo) - hardy_constant(&pp(n, 0.0));
        ensure(sat.abs() <= 1e-10, || format!("endpoint Hardy product off by {sat:e} at N={n}"))?;
    }
    Ok(format!("{} eligible in H^1, {bv} Brezis-Vazquez profiles outside", eligible.len()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, workers| {
        let cfg = SweepConfig {
            grid: Grid { n: vec![3.0, 10.0, 11.0, 12.0], alpha: vec![0.0, 0.5] },
            subjects: vec![
                SubjectSpec::GelfandLog,
                SubjectSpec::Power { g: ExponentChoice::Named(NamedExponent::Gamma), shift: 0.0 },
                SubjectSpec::Power { g: ExponentChoice::Named(NamedExponent::Gamma), shift: -0.5 },
            ],
            checks: vec![Check::Exponents, Check::Stability, Check::Theorem, Check::Prop26],
            tolerances: Tolerances::default(),
            output_dir: dir.path().join(name),
            workers: Some(workers),
        };
        run_sweep(&cfg).map_err(|e| e.to_string())
    };
    let a = run("a", 1)?;
    let b = run("b", 4)?;
    let (ta, tb) = (fs::read(&a.csv_path).unwrap(), fs::read(&b.csv_path).unwrap());
    ensure(ta == tb, || "CSV outputs differ".into())?;
    Ok(format!("{} rows, {} bytes identical across 1 and 4 workers", a.report.rows.len(), ta.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("exponent identities", exponent_identities),
        ("Hardy saturation at gamma", hardy_saturation),
        ("family residuals", family_residuals),
        ("Hardy constant exactness", hardy_exactness),
        ("annulus eigenvalue oracle", eigen_oracle),
        ("stability verdicts", stability_verdicts),
        ("key functional positivity and truncation limit", key_lemma),
        ("derivative sign of the Gelfand branch", derivative_sign),
        ("constant ratio profiles", ratio_profiles),
        ("H^1 gate", h1_gate),
        ("sweep determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
