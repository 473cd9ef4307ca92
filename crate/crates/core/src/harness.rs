//! Verification engine: empirical constants for the pointwise estimates,
//! the key-lemma and derivative-sign checks, and batch sweeps over
//! `(N, alpha)` grids with CSV/JSON output.
//!
//! Every estimate is sampled on the dyadic ladder `r_k = r1 / 2^k`,
//! `k = 0..=K`, and normalized by either the annulus `H^1` norm or the
//! annulus gradient norm. A check passes when the resulting ratio profile
//! is finite and shows no growth as the ladder deepens.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{gamma, regime, ExponentReport, ParamError, ProblemParams, Regime};
use crate::families::{
    brezis_vazquez_family, constant_profile, gelfand_log_family, is_h1, power_family,
    whole_space_gelfand, FamilyError,
};
use crate::functionals::{
    key_functional, key_functional_scale, proof_test_function, truncation_limit, FunctionalError,
    ProofTestFunction, SphereArea, TestFunction, TestFunctionSpec,
};
use crate::nonlinearity::Nonlinearity;
use crate::profile::{log_grid, relative_residual, Profile};
use crate::quadrature::{integrate_split, QuadratureError, QuadratureSpec};
use crate::radial_solver::{
    derivative_sign_profile, sample_derivative, solve_gelfand_branch, SolverConfig, SolverError,
};
use crate::spectra::{hardy_comparison, is_semistable, HardyComparison, SpectraError, StabilityProtocol, StabilityVerdict, Verdict};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Radii at which the truncation limit is probed, as fractions of `r0`.
pub const TRUNCATION_FRACTIONS: [f64; 3] = [0.25, 1.0 / 16.0, 1.0 / 64.0];

/// Inner radii used by the key-lemma check unless overridden.
pub const DEFAULT_KEY_RADII: [f64; 3] = [1e-2, 1e-1, 0.3];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("subject {subject} is not certified semi-stable: {reason}")]
    NotSemiStable { subject: String, reason: String },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("serialization error: {0}")]
    Serialize(String),
}

/// Numerical knobs shared by all checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub quad_rel_tol: f64,
    /// Largest accepted growth of the ratio profile between the last three
    /// rungs and the three before them.
    pub trend_ratio: f64,
    /// `I >= -key_lemma_rel * scale` counts as nonnegative.
    pub key_lemma_rel: f64,
    /// Relative distance to the truncation limit accepted at the finest `eps`.
    pub truncation_rel: f64,
    pub ladder_depth: usize,
    pub solver_rel_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quad_rel_tol: 1e-10,
            trend_ratio: 1.05,
            key_lemma_rel: 1e-8,
            truncation_rel: 0.01,
            ladder_depth: 14,
            solver_rel_tol: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let positive = [self.quad_rel_tol, self.key_lemma_rel, self.truncation_rel, self.solver_rel_tol];
        if positive.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(HarnessError::Config(format!("tolerances must be positive: {self:?}")));
        }
        if !(self.trend_ratio >= 1.0) {
            return Err(HarnessError::Config(format!("trend_ratio must be >= 1, got {}", self.trend_ratio)));
        }
        if self.ladder_depth < 10 {
            return Err(HarnessError::Config(format!("ladder_depth must be >= 10, got {}", self.ladder_depth)));
        }
        Ok(())
    }

    fn quad(&self) -> QuadratureSpec {
        QuadratureSpec::default().with_rel_tol(self.quad_rel_tol)
    }
}

/// Shape of the pointwise bound for a given regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Bounded,
    Logarithmic,
    Power { gamma: f64 },
}

impl Envelope {
    pub fn for_params(p: &ProblemParams) -> Self {
        match regime(p) {
            Regime::Subcritical => Envelope::Bounded,
            Regime::Critical => Envelope::Logarithmic,
            Regime::Supercritical => Envelope::Power { gamma: gamma(p) },
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Envelope::Bounded => 1.0,
            Envelope::Logarithmic => r.ln().abs() + 1.0,
            Envelope::Power { gamma } => r.powf(gamma),
        }
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Bounded => f.write_str("1"),
            Envelope::Logarithmic => f.write_str("|log r| + 1"),
            Envelope::Power { gamma } => write!(f, "r^{gamma}"),
        }
    }
}

/// `1`, `|log r| + 1` or `r^gamma` according to the regime of `p`.
pub fn envelope(p: &ProblemParams, r: f64) -> f64 {
    Envelope::for_params(p).eval(r)
}

fn annulus_integral(profile: &dyn Profile, quad: &QuadratureSpec, with_value: bool) -> Result<f64, HarnessError> {
    let n = profile.params().n();
    let integrand = |t: f64| {
        let du = profile.u_r(t);
        let u = if with_value { profile.u(t) } else { 0.0 };
        t.powf(n - 1.0) * (u * u + du * du)
    };
    let q = integrate_split(integrand, 0.5, 1.0, &profile.knots(0.5, 1.0), quad)?.into_result()?;
    Ok(SphereArea::new(n).omega() * q)
}

/// `‖u‖_{H^1(B_1 \ B_{1/2})}`.
pub fn annulus_h1_norm(profile: &dyn Profile, quad: &QuadratureSpec) -> Result<f64, HarnessError> {
    Ok(annulus_integral(profile, quad, true)?.sqrt())
}

/// `‖∇u‖_{L^2(B_1 \ B_{1/2})}`.
pub fn annulus_gradient_norm(profile: &dyn Profile, quad: &QuadratureSpec) -> Result<f64, HarnessError> {
    Ok(annulus_integral(profile, quad, false)?.sqrt())
}

/// `r1 / 2^k` for `k = 0..=depth`.
pub fn dyadic_ladder(r1: f64, depth: usize) -> Vec<f64> {
    (0..=depth).map(|k| r1 * 0.5f64.powi(k as i32)).collect()
}

/// `|u(r_{k}) - u(r_{k+1})|` along the ladder.
pub fn dyadic_increments(profile: &dyn Profile, r1: f64, depth: usize) -> Vec<f64> {
    dyadic_ladder(r1, depth).windows(2).map(|w| (profile.u(w[0]) - profile.u(w[1])).abs()).collect()
}

/// `(|u(r1) - u(r_K)|, Σ_k |u(r_k) - u(r_{k+1})|)`; the first never exceeds the second.
pub fn telescoping(profile: &dyn Profile, r1: f64, depth: usize) -> (f64, f64) {
    let rk = r1 * 0.5f64.powi(depth as i32);
    let direct = (profile.u(r1) - profile.u(rk)).abs();
    (direct, dyadic_increments(profile, r1, depth).iter().sum())
}

/// No growth between the last three rungs and the three before them.
pub fn no_growth(ratios: &[f64], trend_ratio: f64) -> bool {
    if ratios.len() < 6 || ratios.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let m = ratios.len();
    let max = |s: &[f64]| s.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let (last, prev) = (max(&ratios[m - 3..]), max(&ratios[m - 6..m - 3]));
    if prev == 0.0 {
        last == 0.0
    } else {
        last <= trend_ratio * prev
    }
}

/// Relative spread `max/min - 1` of a positive ratio profile.
pub fn ratio_spread(ratios: &[f64]) -> f64 {
    let max = ratios.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let min = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    max / min - 1.0
}

/// How a subject was admitted as semi-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// `t^2 · weight` never exceeds the Hardy constant.
    Hardy(HardyComparison),
    /// Radial bottom eigenvalue nonnegative across the protocol.
    Spectral(StabilityVerdict),
}

/// A profile that passed the semi-stability gate.
pub struct Subject {
    profile: Box<dyn Profile>,
    certificate: Certificate,
    r1: f64,
    mesh: Vec<f64>,
}

impl fmt::Debug for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Subject")
            .field("profile", &self.profile.label())
            .field("certificate", &self.certificate)
            .field("r1", &self.r1)
            .finish()
    }
}

impl Subject {
    /// Admits `profile` through the Hardy comparison, falling back to the
    /// spectral protocol; anything not semi-stable is refused.
    pub fn certify(profile: Box<dyn Profile>, protocol: &StabilityProtocol) -> Result<Self, HarnessError> {
        let hardy = hardy_comparison(profile.as_ref());
        let certificate = if hardy.stable_by_hardy {
            Certificate::Hardy(hardy)
        } else {
            let verdict = is_semistable(profile.as_ref(), protocol)?;
            if verdict.verdict != Verdict::SemiStable {
                return Err(HarnessError::NotSemiStable {
                    subject: profile.label(),
                    reason: format!(
                        "spectral verdict {:?} with margin {:e}; sup t^2 weight {} exceeds Hardy constant {}",
                        verdict.verdict, verdict.margin, hardy.sup_weight, hardy.hardy
                    ),
                });
            }
            Certificate::Spectral(verdict)
        };
        Ok(Self { profile, certificate, r1: 1.0, mesh: log_grid(1e-6, 1.0, 2048) })
    }

    /// Replaces the sampling mesh used by the derivative-sign check.
    pub fn with_mesh(mut self, mesh: Vec<f64>) -> Self {
        self.r1 = mesh.iter().copied().filter(|&r| r > 0.5 && r <= 1.0).fold(1.0f64.min(self.r1), f64::max);
        self.mesh = mesh;
        self
    }

    pub fn profile(&self) -> &dyn Profile {
        self.profile.as_ref()
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    /// Top of the dyadic ladder.
    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    TheoremI,
    TheoremIi,
    TheoremIii,
    #[serde(rename = "lemma_2_5")]
    Lemma25,
    #[serde(rename = "prop_2_6")]
    Prop26,
    KeyLemma,
    #[serde(rename = "prop_2_4")]
    Prop24,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    H1Annulus,
    GradientAnnulus,
    None,
}

/// One rung of a ratio profile: `ratio = numerator / denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub r: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

/// Key-lemma data for one test function and one inner radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaRow {
    pub test_function: String,
    pub r0: f64,
    pub value: f64,
    pub scale: f64,
    /// Limit of `I(eps, r0; v̄_eps)` as `eps -> 0`.
    pub limit: f64,
    /// `(eps, I(eps, r0; v̄_eps), relative distance to the limit)`.
    pub truncation: Vec<(f64, f64, f64)>,
    pub nonnegative: bool,
    /// Finest relative distance within `truncation_rel`.
    pub limit_within_tolerance: bool,
    /// Distances shrink by at least a factor 2 per refinement.
    pub limit_rate_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub target: Target,
    pub subject: String,
    pub params: ProblemParams,
    pub empirical_constant: f64,
    pub envelope: Envelope,
    pub norm_kind: NormKind,
    pub norm_used: f64,
    pub samples: Vec<Sample>,
    /// `|u(r1) - u(r)| / |r^gamma - r1^gamma|` on the ladder (supercritical
    /// theorem check only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub telescoped: Vec<Sample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub key_lemma: Vec<KeyLemmaRow>,
    pub verdict: bool,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.ratio).collect()
    }
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Shared tail of the three ladder estimates.
#[allow(clippy::too_many_arguments)]
fn ladder_report(
    target: Target,
    subject: &Subject,
    envelope: Envelope,
    norm_kind: NormKind,
    norm: f64,
    samples: Vec<Sample>,
    tol: &Tolerances,
    mut notes: Vec<String>,
) -> Result<VerificationReport, HarnessError> {
    let profile = subject.profile();
    let ratios: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
    let c_emp = ratios.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let trivial = samples.iter().all(|s| s.numerator == 0.0);
    let mut verdict = if trivial {
        notes.push("numerators vanish identically; trivially bounded".into());
        true
    } else {
        norm > 0.0 && c_emp.is_finite() && c_emp > 0.0 && no_growth(&ratios, tol.trend_ratio)
    };
    if !trivial && !verdict {
        notes.push(format!("ratio profile grows: trend threshold {}", tol.trend_ratio));
    }
    let h1 = is_h1(profile)?;
    if !h1.member {
        verdict = false;
        notes.push("subject is not in H^1(B_1); the estimate is not expected to hold".into());
    }
    notes.push(format!("certificate: {}", certificate_name(subject.certificate())));
    notes.push(format!("trend threshold {} is an engineering choice", tol.trend_ratio));
    Ok(VerificationReport {
        target,
        subject: profile.label(),
        params: *profile.params(),
        empirical_constant: c_emp,
        envelope,
        norm_kind,
        norm_used: norm,
        samples,
        telescoped: Vec::new(),
        key_lemma: Vec::new(),
        verdict,
        notes,
    })
}

fn certificate_name(c: &Certificate) -> &'static str {
    match c {
        Certificate::Hardy(_) => "hardy comparison",
        Certificate::Spectral(_) => "radial spectrum",
    }
}

/// Pointwise bound `|u(r)| <= C envelope(r) ‖u‖_{H^1(annulus)}`.
pub fn check_theorem(subject: &Subject, tol: &Tolerances) -> Result<VerificationReport, HarnessError> {
    tol.validate()?;
    let profile = subject.profile();
    let p = *profile.params();
    let env = Envelope::for_params(&p);
    let target = match regime(&p) {
        Regime::Subcritical => Target::TheoremI,
        Regime::Critical => Target::TheoremIi,
        Regime::Supercritical => Target::TheoremIii,
    };
    let quad = tol.quad();
    let norm = annulus_h1_norm(profile, &quad)?;
    let ladder = dyadic_ladder(subject.r1(), tol.ladder_depth);
    let samples: Vec<Sample> = ladder
        .iter()
        .map(|&r| {
            let num = profile.u(r).abs();
            let den = env.eval(r) * norm;
            Sample { r, numerator: num, denominator: den, ratio: ratio_or_zero(num, den) }
        })
        .collect();
    let mut notes = Vec::new();
    let mut extra_ok = true;
    if target == Target::TheoremI {
        let inc = dyadic_increments(profile, subject.r1(), tol.ladder_depth);
        let scale = profile.u(subject.r1()).abs().max(1.0);
        let bad = inc.windows(2).skip(3).any(|w| w[1] > w[0] * (1.0 + 1e-9) + 1e-12 * scale);
        if bad {
            extra_ok = false;
            notes.push("dyadic increments increase after the first three rungs".into());
        }
    }
    let mut telescoped = Vec::new();
    if let Envelope::Power { gamma } = env {
        let r1 = subject.r1();
        let u1 = profile.u(r1);
        telescoped = ladder
            .iter()
            .skip(1)
            .map(|&r| {
                let num = (u1 - profile.u(r)).abs();
                let den = (r.powf(gamma) - r1.powf(gamma)).abs();
                Sample { r, numerator: num, denominator: den, ratio: ratio_or_zero(num, den) }
            })
            .collect();
        let bounded = samples.iter().all(|s| s.numerator <= s.denominator / norm * (1.0 + 1e-12));
        notes.push(format!("|u(r)| <= r^gamma on the ladder: {bounded}"));
    }
    notes.push("normalized by the annulus H^1 norm".into());
    let mut report = ladder_report(target, subject, env, NormKind::H1Annulus, norm, samples, tol, notes)?;
    report.telescoped = telescoped;
    report.verdict &= extra_ok;
    Ok(report)
}

/// `∫_{r/2}^r u_r^2 dt <= K ‖∇u‖^2 r^{2 gamma - 1}`.
pub fn check_lemma_2_5(subject: &Subject, tol: &Tolerances) -> Result<VerificationReport, HarnessError> {
    tol.validate()?;
    let profile = subject.profile();
    let p = *profile.params();
    let g = gamma(&p);
    let quad = tol.quad();
    let norm = annulus_gradient_norm(profile, &quad)?;
    let samples = dyadic_ladder(subject.r1(), tol.ladder_depth)
        .into_iter()
        .map(|r| {
            let integrand = |t: f64| profile.u_r(t).powi(2);
            let num = integrate_split(integrand, r / 2.0, r, &profile.knots(r / 2.0, r), &quad)?.into_result()?;
            let den = norm * norm * r.powf(2.0 * g - 1.0);
            Ok(Sample { r, numerator: num, denominator: den, ratio: ratio_or_zero(num, den) })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let notes = vec!["normalized by the annulus gradient norm".into()];
    ladder_report(Target::Lemma25, subject, Envelope::Power { gamma: 2.0 * g - 1.0 }, NormKind::GradientAnnulus, norm, samples, tol, notes)
}

/// `|u(r) - u(r/2)| <= K' ‖∇u‖ r^gamma`.
pub fn check_prop_2_6(subject: &Subject, tol: &Tolerances) -> Result<VerificationReport, HarnessError> {
    tol.validate()?;
    let profile = subject.profile();
    let p = *profile.params();
    let g = gamma(&p);
    let norm = annulus_gradient_norm(profile, &tol.quad())?;
    let samples = dyadic_ladder(subject.r1(), tol.ladder_depth)
        .into_iter()
        .map(|r| {
            let num = (profile.u(r) - profile.u(r / 2.0)).abs();
            let den = norm * r.powf(g);
            Sample { r, numerator: num, denominator: den, ratio: ratio_or_zero(num, den) }
        })
        .collect();
    let notes = vec!["normalized by the annulus gradient norm".into()];
    ladder_report(Target::Prop26, subject, Envelope::Power { gamma: g }, NormKind::GradientAnnulus, norm, samples, tol, notes)
}

/// The test functions from the stability arguments, instantiated for `p`.
pub fn default_key_test_functions(p: &ProblemParams) -> Result<Vec<TestFunctionSpec>, HarnessError> {
    let lo = -1.0 - p.alpha();
    let beta = if 0.5 > lo { 0.5 } else { 0.5 * (lo + 1.0) };
    let requests = [
        ProofTestFunction::PiecewiseLinearPeak { r1: 1.0, eps: 0.1 },
        ProofTestFunction::PowerThenLinear { beta, r1: 1.0, eps: 0.1 },
        ProofTestFunction::ThreePiecePower { r: 0.25, beta: None },
    ];
    let mut out = vec![TestFunctionSpec::LinearRamp];
    for req in &requests {
        out.push(proof_test_function(p, req)?);
    }
    Ok(out)
}

fn spec_name(v: &TestFunctionSpec) -> String {
    serde_json::to_string(v).unwrap_or_else(|_| format!("{v:?}"))
}

/// Nonnegativity of `I(r0, 1; v)` plus the truncation limit as `eps -> 0`.
pub fn check_key_lemma(
    subject: &Subject,
    tests: &[TestFunctionSpec],
    radii: &[f64],
    tol: &Tolerances,
) -> Result<VerificationReport, HarnessError> {
    tol.validate()?;
    if tests.is_empty() || radii.is_empty() {
        return Err(HarnessError::Config("key lemma needs test functions and radii".into()));
    }
    let profile = subject.profile();
    let quad = tol.quad();
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for v in tests {
        v.validate()?;
        if v.value(1.0).abs() > 1e-12 {
            return Err(HarnessError::Config(format!("test function must vanish at 1: {}", spec_name(v))));
        }
        for &r0 in radii {
            if !(r0 > 0.0 && r0 < 1.0) {
                return Err(HarnessError::Config(format!("r0={r0} outside (0, 1)")));
            }
            let value = key_functional(profile, r0, 1.0, v, &quad)?;
            let scale = key_functional_scale(profile, r0, 1.0, v, &quad)?;
            let limit = truncation_limit(profile, v, r0, &quad)?;
            let truncation = TRUNCATION_FRACTIONS
                .iter()
                .map(|&frac| {
                    let eps = frac * r0;
                    let vbar = TestFunctionSpec::Truncation { r0, eps, base: Box::new(v.clone()) };
                    let val = key_functional(profile, eps, r0, &vbar, &quad)?;
                    let dist = if limit == 0.0 { val.abs() } else { ((val - limit) / limit).abs() };
                    Ok((eps, val, dist))
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            let dists: Vec<f64> = truncation.iter().map(|t| t.2).collect();
            let finest = *dists.last().unwrap();
            let limit_within_tolerance = finest <= tol.truncation_rel;
            let limit_rate_ok = finest <= 1e-12 || dists.windows(2).all(|w| w[1] * 2.0 <= w[0]);
            let nonnegative = value >= -tol.key_lemma_rel * scale;
            samples.push(Sample { r: r0, numerator: value, denominator: scale, ratio: ratio_or_zero(value, scale) });
            rows.push(KeyLemmaRow {
                test_function: spec_name(v),
                r0,
                value,
                scale,
                limit,
                truncation,
                nonnegative,
                limit_within_tolerance,
                limit_rate_ok,
            });
        }
    }
    let all_nonneg = rows.iter().all(|r| r.nonnegative);
    let limits_ok = rows.iter().all(|r| r.limit_within_tolerance || r.limit_rate_ok);
    let mut notes = vec![format!("certificate: {}", certificate_name(subject.certificate()))];
    if !all_nonneg {
        notes.push("I(r0, 1; v) negative beyond tolerance".into());
    }
    if !limits_ok {
        notes.push("truncation integrals do not approach the limit".into());
    }
    let within = rows.iter().filter(|r| r.limit_within_tolerance).count();
    notes.push(format!("{within}/{} truncation limits within {}", rows.len(), tol.truncation_rel));
    let min_ratio = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    Ok(VerificationReport {
        target: Target::KeyLemma,
        subject: profile.label(),
        params: *profile.params(),
        empirical_constant: min_ratio,
        envelope: Envelope::for_params(profile.params()),
        norm_kind: NormKind::None,
        norm_used: 1.0,
        samples,
        telescoped: Vec::new(),
        key_lemma: rows,
        verdict: all_nonneg && limits_ok,
        notes,
    })
}

/// `u_r` keeps a fixed sign on `(0, 1]` for non-constant subjects.
pub fn check_prop_2_4(subject: &Subject, tol: &Tolerances) -> Result<VerificationReport, HarnessError> {
    tol.validate()?;
    let profile = subject.profile();
    let mesh = subject.mesh();
    let ur = sample_derivative(profile, mesh);
    let report = derivative_sign_profile(mesh, &ur);
    let samples = dyadic_ladder(subject.r1(), tol.ladder_depth)
        .into_iter()
        .map(|r| {
            let d = profile.u_r(r);
            Sample { r, numerator: d, denominator: 1.0, ratio: d }
        })
        .collect();
    let mut notes = Vec::new();
    let verdict = if report.constant {
        notes.push("constant profile: u_r vanishes identically".into());
        true
    } else {
        let negative = ur.iter().all(|&d| d < 0.0);
        let positive = ur.iter().all(|&d| d > 0.0);
        notes.push(format!(
            "{} sign changes on {} mesh points from r={:e}; boundary sign {}",
            report.sign_changes.len(),
            mesh.len(),
            mesh[0],
            report.sign
        ));
        if negative {
            notes.push("u_r < 0 on the whole mesh".into());
        }
        report.sign_changes.is_empty() && (negative || positive)
    };
    Ok(VerificationReport {
        target: Target::Prop24,
        subject: profile.label(),
        params: *profile.params(),
        empirical_constant: if report.constant { 0.0 } else { report.min_abs_ur },
        envelope: Envelope::for_params(profile.params()),
        norm_kind: NormKind::None,
        norm_used: 1.0,
        samples,
        telescoped: Vec::new(),
        key_lemma: Vec::new(),
        verdict,
        notes,
    })
}

/// Selects the power-family exponent either numerically or relative to `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentChoice {
    Value(f64),
    Named(NamedExponent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedExponent {
    Gamma,
    HalfGamma,
}

impl ExponentChoice {
    pub fn resolve(&self, p: &ProblemParams) -> f64 {
        match self {
            ExponentChoice::Value(g) => *g,
            ExponentChoice::Named(NamedExponent::Gamma) => gamma(p),
            ExponentChoice::Named(NamedExponent::HalfGamma) => 0.5 * gamma(p),
        }
    }
}

/// A subject recipe evaluated at each grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubjectSpec {
    GelfandLog,
    WholeSpaceGelfand,
    Power {
        g: ExponentChoice,
        #[serde(default)]
        shift: f64,
    },
    BrezisVazquez { q: f64 },
    Constant { value: f64 },
    GelfandBranch { lambda: f64 },
}

impl SubjectSpec {
    pub fn label(&self) -> String {
        match self {
            SubjectSpec::GelfandLog => "gelfand_log".into(),
            SubjectSpec::WholeSpaceGelfand => "whole_space_gelfand".into(),
            SubjectSpec::Power { g, shift } => {
                let base = match g {
                    ExponentChoice::Value(v) => format!("{v}"),
                    ExponentChoice::Named(NamedExponent::Gamma) => "gamma".into(),
                    ExponentChoice::Named(NamedExponent::HalfGamma) => "gamma/2".into(),
                };
                if *shift == 0.0 {
                    format!("power[g={base}]")
                } else {
                    format!("power[g={base}{shift:+}]")
                }
            }
            SubjectSpec::BrezisVazquez { q } => format!("brezis_vazquez[q={q}]"),
            SubjectSpec::Constant { value } => format!("constant[u={value}]"),
            SubjectSpec::GelfandBranch { lambda } => format!("gelfand_branch[lambda={lambda}]"),
        }
    }

    /// Builds the profile and the mesh on which its derivative is sampled.
    pub fn build(&self, p: ProblemParams, solver: &SolverConfig) -> Result<(Box<dyn Profile>, Vec<f64>), HarnessError> {
        let default_mesh = || log_grid(1e-6, 1.0, 2048);
        let profile: Box<dyn Profile> = match self {
            SubjectSpec::GelfandLog => Box::new(gelfand_log_family(p)?),
            SubjectSpec::WholeSpaceGelfand => Box::new(whole_space_gelfand(p)?),
            SubjectSpec::Power { g, shift } => Box::new(power_family(p, g.resolve(&p) + shift)?),
            SubjectSpec::BrezisVazquez { q } => Box::new(brezis_vazquez_family(p, *q)?),
            SubjectSpec::Constant { value } => Box::new(constant_profile(p, *value, Nonlinearity::zero())),
            SubjectSpec::GelfandBranch { lambda } => {
                let sol = solve_gelfand_branch(&p, *lambda, solver)?;
                let mesh = sol.mesh().to_vec();
                return Ok((Box::new(sol), mesh));
            }
        };
        Ok((profile, default_mesh()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Exponents,
    Stability,
    Theorem,
    #[serde(rename = "lemma_2_5")]
    Lemma25,
    #[serde(rename = "prop_2_6")]
    Prop26,
    KeyLemma,
    #[serde(rename = "prop_2_4")]
    Prop24,
}

impl Check {
    pub fn name(&self) -> &'static str {
        match self {
            Check::Exponents => "exponents",
            Check::Stability => "stability",
            Check::Theorem => "theorem",
            Check::Lemma25 => "lemma_2_5",
            Check::Prop26 => "prop_2_6",
            Check::KeyLemma => "key_lemma",
            Check::Prop24 => "prop_2_4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Batch description read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid: Grid,
    #[serde(default)]
    pub subjects: Vec<SubjectSpec>,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.grid.n.is_empty() || self.grid.alpha.is_empty() {
            return Err(HarnessError::Config("grid must be non-empty".into()));
        }
        if self.checks.is_empty() {
            return Err(HarnessError::Config("no checks requested".into()));
        }
        if self.checks.iter().any(|c| *c != Check::Exponents) && self.subjects.is_empty() {
            return Err(HarnessError::Config("subject checks requested without subjects".into()));
        }
        if self.workers == Some(0) {
            return Err(HarnessError::Config("workers must be positive".into()));
        }
        for &n in &self.grid.n {
            for &a in &self.grid.alpha {
                ProblemParams::new(n, a)?;
            }
        }
        self.tolerances.validate()
    }

    pub fn params(&self) -> Vec<ProblemParams> {
        let mut out: Vec<ProblemParams> = self
            .grid
            .n
            .iter()
            .flat_map(|&n| self.grid.alpha.iter().map(move |&a| ProblemParams::new(n, a).unwrap()))
            .collect();
        out.sort_by(|x, y| x.n().total_cmp(&y.n()).then(x.alpha().total_cmp(&y.alpha())));
        out.dedup();
        out
    }
}

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), message: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Refused,
    Error,
}

/// One CSV line of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: f64,
    pub alpha: f64,
    pub subject: String,
    pub check: Check,
    pub status: RowStatus,
    pub verdict: Option<bool>,
    pub value: Option<f64>,
    pub gamma: f64,
    pub regime: Regime,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub reports: Vec<VerificationReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
    pub report: SweepReport,
}

fn row(p: &ProblemParams, subject: &str, check: Check, status: RowStatus) -> SweepRow {
    SweepRow {
        n: p.n(),
        alpha: p.alpha(),
        subject: subject.to_string(),
        check,
        status,
        verdict: None,
        value: None,
        gamma: gamma(p),
        regime: regime(p),
        detail: String::new(),
    }
}

fn exponent_row(p: &ProblemParams) -> SweepRow {
    let rep = ExponentReport::new(p);
    let mut r = row(p, "-", Check::Exponents, RowStatus::Ok);
    r.value = Some(rep.gamma);
    r.detail = format!(
        "s_alpha={};hardy={};p_sobolev={};p_jl={}",
        rep.s_alpha, rep.hardy, rep.p_sobolev, rep.p_jl
    );
    r
}

fn run_subject(
    p: ProblemParams,
    spec: &SubjectSpec,
    checks: &[Check],
    tol: &Tolerances,
) -> (Vec<SweepRow>, Vec<VerificationReport>) {
    let label = spec.label();
    let subject_checks: Vec<Check> = checks.iter().copied().filter(|c| *c != Check::Exponents).collect();
    let fail_all = |status: RowStatus, msg: String| {
        let rows = subject_checks
            .iter()
            .map(|&c| {
                let mut r = row(&p, &label, c, status);
                r.detail = msg.clone();
                r
            })
            .collect();
        (rows, Vec::new())
    };
    let solver = SolverConfig::default().with_tolerances(tol.solver_rel_tol, SolverConfig::default().abs_tol);
    let (profile, mesh) = match spec.build(p, &solver) {
        Ok(b) => b,
        Err(e) => return fail_all(RowStatus::Error, e.to_string()),
    };
    let protocol = StabilityProtocol::default();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    if subject_checks.contains(&Check::Stability) {
        let mut r = row(&p, &label, Check::Stability, RowStatus::Ok);
        let hardy = hardy_comparison(profile.as_ref());
        match is_semistable(profile.as_ref(), &protocol) {
            Ok(v) => {
                r.verdict = Some(v.verdict == Verdict::SemiStable);
                r.value = Some(v.margin);
                r.detail = format!("{:?};hardy_sup={};hardy={}", v.verdict, hardy.sup_weight, hardy.hardy);
            }
            Err(e) => {
                r.status = RowStatus::Error;
                r.detail = e.to_string();
            }
        }
        rows.push(r);
    }
    let gated: Vec<Check> = subject_checks.iter().copied().filter(|c| *c != Check::Stability).collect();
    if gated.is_empty() {
        return (rows, reports);
    }
    let subject = match Subject::certify(profile, &protocol) {
        Ok(s) => s.with_mesh(mesh),
        Err(e @ HarnessError::NotSemiStable { .. }) => {
            let (mut more, _) = fail_all(RowStatus::Refused, e.to_string());
            more.retain(|r| r.check != Check::Stability);
            rows.extend(more);
            return (rows, reports);
        }
        Err(e) => {
            let (mut more, _) = fail_all(RowStatus::Error, e.to_string());
            more.retain(|r| r.check != Check::Stability);
            rows.extend(more);
            return (rows, reports);
        }
    };
    for c in gated {
        let result = match c {
            Check::Theorem => check_theorem(&subject, tol),
            Check::Lemma25 => check_lemma_2_5(&subject, tol),
            Check::Prop26 => check_prop_2_6(&subject, tol),
            Check::KeyLemma => default_key_test_functions(&p)
                .and_then(|vs| check_key_lemma(&subject, &vs, &DEFAULT_KEY_RADII, tol)),
            Check::Prop24 => check_prop_2_4(&subject, tol),
            Check::Exponents | Check::Stability => unreachable!(),
        };
        let mut r = row(&p, &label, c, RowStatus::Ok);
        match result {
            Ok(rep) => {
                r.verdict = Some(rep.verdict);
                r.value = Some(rep.empirical_constant);
                r.detail = format!("{:?}", rep.target);
                reports.push(rep);
            }
            Err(e) => {
                r.status = RowStatus::Error;
                r.detail = e.to_string();
            }
        }
        rows.push(r);
    }
    (rows, reports)
}

/// Executes every requested check over the grid. Per-job failures become
/// rows; output order depends only on the configuration.
pub fn execute_sweep(cfg: &SweepConfig) -> Result<SweepReport, HarnessError> {
    cfg.validate()?;
    let params = cfg.params();
    let mut jobs: Vec<(ProblemParams, Option<usize>)> = Vec::new();
    for p in &params {
        if cfg.checks.contains(&Check::Exponents) {
            jobs.push((*p, None));
        }
        if cfg.checks.iter().any(|c| *c != Check::Exponents) {
            jobs.extend((0..cfg.subjects.len()).map(|i| (*p, Some(i))));
        }
    }
    let run = || -> Vec<(Vec<SweepRow>, Vec<VerificationReport>)> {
        jobs.par_iter()
            .map(|(p, subject)| match subject {
                None => (vec![exponent_row(p)], Vec::new()),
                Some(i) => run_subject(*p, &cfg.subjects[*i], &cfg.checks, &cfg.tolerances),
            })
            .collect()
    };
    let results = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(run),
        None => run(),
    };
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (r, v) in results {
        rows.extend(r);
        reports.extend(v);
    }
    Ok(SweepReport { schema_version: REPORT_SCHEMA_VERSION, config: cfg.clone(), rows, reports })
}

pub fn write_rows_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Serialize(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::Serialize(e.to_string()))?;
    Ok(())
}

/// Runs the sweep and writes `sweep.csv` and `sweep.json` into the output directory.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput, HarnessError> {
    let report = execute_sweep(cfg)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv_path = dir.join("sweep.csv");
    let json_path = dir.join("sweep.json");
    let file = fs::File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_rows_csv(&report.rows, file)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Serialize(e.to_string()))?;
    fs::write(&json_path, json).map_err(|e| io_err(&json_path, e))?;
    Ok(SweepOutput { csv_path, json_path, report })
}

/// Per-radius data for external plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub r: f64,
    pub u: f64,
    pub u_r: f64,
    pub weight: f64,
    pub hardy_ratio: f64,
    pub envelope: f64,
    pub relative_residual: f64,
}

pub fn plot_rows(profile: &dyn Profile, radii: &[f64]) -> Vec<PlotRow> {
    let p = profile.params();
    let hardy = crate::exponents::hardy_constant(p);
    let env = Envelope::for_params(p);
    radii
        .iter()
        .map(|&r| {
            let w = profile.weight(r);
            PlotRow {
                r,
                u: profile.u(r),
                u_r: profile.u_r(r),
                weight: w,
                hardy_ratio: if hardy > 0.0 { r * r * w / hardy } else { f64::NAN },
                envelope: env.eval(r),
                relative_residual: relative_residual(profile, r),
            }
        })
        .collect()
}

/// Construction, residual, `H^1` and stability summary of a family member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub schema_version: u32,
    pub label: String,
    pub params: ProblemParams,
    pub exponents: ExponentReport,
    pub max_relative_residual: f64,
    pub hardy: HardyComparison,
    pub in_h1: bool,
    pub stability: StabilityVerdict,
}

pub fn summarize_profile(profile: &dyn Profile, protocol: &StabilityProtocol) -> Result<ProfileSummary, HarnessError> {
    let max_relative_residual = log_grid(1e-3, 1.0, 64)
        .into_iter()
        .map(|r| relative_residual(profile, r))
        .fold(0.0f64, f64::max);
    Ok(ProfileSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        label: profile.label(),
        params: *profile.params(),
        exponents: ExponentReport::new(profile.params()),
        max_relative_residual,
        hardy: hardy_comparison(profile),
        in_h1: is_h1(profile)?.member,
        stability: is_semistable(profile, protocol)?,
    })
}
