//! Radial integral functionals: energy, the second variation, the key
//! functional `I(a, b; v)` and the piecewise test functions fed to it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;
use thiserror::Error;

use crate::exponents::{s_alpha, ProblemParams};
use crate::profile::Profile;
use crate::quadrature::{integrate_split, QuadratureError, QuadratureSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("invalid interval: need 0 <= a < b <= 1, got ({a}, {b})")]
    Interval { a: f64, b: f64 },
    #[error("test function support [{lo}, {hi}] not compactly inside (0, 1]")]
    Support { lo: f64, hi: f64 },
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Area `ω_N = 2 π^{N/2} / Γ(N/2)` of the unit sphere in `R^N`, so that
/// `|B_1| = ω_N / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereArea {
    omega_n: f64,
}

impl SphereArea {
    pub fn new(n: f64) -> Self {
        Self { omega_n: 2.0 * PI.powf(n / 2.0) / gamma_fn(n / 2.0) }
    }

    pub fn omega(&self) -> f64 {
        self.omega_n
    }
}

/// A Lipschitz radial test function on `(0, 1]`.
pub trait TestFunction: Sync {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
    /// Kinks of the function, strictly increasing.
    fn breakpoints(&self) -> Vec<f64>;
    /// Closed interval outside of which the function vanishes.
    fn support(&self) -> (f64, f64);
}

/// The piecewise test functions appearing in the radial stability arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionSpec {
    /// `t/(r1-eps)` on `(0, r1-eps)`, `(r1-t)/eps` on `[r1-eps, r1]`, 0 after.
    PiecewiseLinearPeak { r1: f64, eps: f64 },
    /// `(t/(r1-eps))^beta` on `(0, r1-eps)`, then the same linear descent.
    PowerThenLinear { beta: f64, r1: f64, eps: f64 },
    /// `r^{s-beta} t^beta` on `(0, r)`, `t^s` on `[r, 1/2]`,
    /// `2^{1-s}(1-t)` on `(1/2, 1]`.
    ThreePiecePower { r: f64, s: f64, beta: f64 },
    /// `1 - t`.
    LinearRamp,
    /// Piecewise-linear bump vanishing outside `[a, b]`, peak 1 at the midpoint.
    Hat { a: f64, b: f64 },
    /// Zero on `(0, eps)`, linear from 0 to `base(r0)` on `[eps, r0]`,
    /// `base` on `(r0, 1]`.
    Truncation { r0: f64, eps: f64, base: Box<TestFunctionSpec> },
}

impl TestFunctionSpec {
    pub fn validate(&self) -> Result<(), FunctionalError> {
        let bad = |m: String| Err(FunctionalError::InvalidTestFunction(m));
        match self {
            TestFunctionSpec::PiecewiseLinearPeak { r1, eps }
            | TestFunctionSpec::PowerThenLinear { r1, eps, .. } => {
                if !(*r1 > 0.0 && *r1 <= 1.0) {
                    return bad(format!("r1={r1} outside (0, 1]"));
                }
                if !(*eps > 0.0 && *eps < r1 / 2.0) {
                    return bad(format!("eps={eps} must lie in (0, r1/2)"));
                }
            }
            TestFunctionSpec::ThreePiecePower { r, .. } => {
                if !(*r > 0.0 && *r < 0.5) {
                    return bad(format!("r={r} must lie in (0, 1/2)"));
                }
            }
            TestFunctionSpec::LinearRamp => {}
            TestFunctionSpec::Hat { a, b } => {
                if !(*a > 0.0 && a < b && *b <= 1.0) {
                    return bad(format!("hat support ({a}, {b}) not inside (0, 1]"));
                }
            }
            TestFunctionSpec::Truncation { r0, eps, base } => {
                if !(*eps > 0.0 && eps < r0 && *r0 < 1.0) {
                    return bad(format!("need 0 < eps < r0 < 1, got eps={eps}, r0={r0}"));
                }
                base.validate()?;
            }
        }
        let bp = self.breakpoints();
        if bp.windows(2).any(|w| w[0] >= w[1]) || bp.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return bad(format!("breakpoints {bp:?} not strictly increasing in (0, 1]"));
        }
        Ok(())
    }
}

impl TestFunction for TestFunctionSpec {
    fn value(&self, t: f64) -> f64 {
        match self {
            TestFunctionSpec::PiecewiseLinearPeak { r1, eps } => peak(t, *r1, *eps, |x| x),
            TestFunctionSpec::PowerThenLinear { beta, r1, eps } => {
                peak(t, *r1, *eps, |x| x.powf(*beta))
            }
            TestFunctionSpec::ThreePiecePower { r, s, beta } => {
                if t < *r {
                    r.powf(s - beta) * t.powf(*beta)
                } else if t <= 0.5 {
                    t.powf(*s)
                } else {
                    2f64.powf(1.0 - s) * (1.0 - t)
                }
            }
            TestFunctionSpec::LinearRamp => 1.0 - t,
            TestFunctionSpec::Hat { a, b } => {
                let m = 0.5 * (a + b);
                if t <= *a || t >= *b {
                    0.0
                } else if t <= m {
                    (t - a) / (m - a)
                } else {
                    (b - t) / (b - m)
                }
            }
            TestFunctionSpec::Truncation { r0, eps, base } => {
                if t < *eps {
                    0.0
                } else if t <= *r0 {
                    base.value(*r0) / (r0 - eps) * (t - eps)
                } else {
                    base.value(t)
                }
            }
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match self {
            TestFunctionSpec::PiecewiseLinearPeak { r1, eps } => peak_derivative(t, *r1, *eps, |_| 1.0),
            TestFunctionSpec::PowerThenLinear { beta, r1, eps } => {
                peak_derivative(t, *r1, *eps, |x| beta * x.powf(beta - 1.0))
            }
            TestFunctionSpec::ThreePiecePower { r, s, beta } => {
                if t < *r {
                    beta * r.powf(s - beta) * t.powf(beta - 1.0)
                } else if t <= 0.5 {
                    s * t.powf(s - 1.0)
                } else {
                    -(2f64.powf(1.0 - s))
                }
            }
            TestFunctionSpec::LinearRamp => -1.0,
            TestFunctionSpec::Hat { a, b } => {
                let m = 0.5 * (a + b);
                if t <= *a || t >= *b {
                    0.0
                } else if t <= m {
                    1.0 / (m - a)
                } else {
                    -1.0 / (b - m)
                }
            }
            TestFunctionSpec::Truncation { r0, eps, base } => {
                if t < *eps {
                    0.0
                } else if t <= *r0 {
                    base.value(*r0) / (r0 - eps)
                } else {
                    base.derivative(t)
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            TestFunctionSpec::PiecewiseLinearPeak { r1, eps }
            | TestFunctionSpec::PowerThenLinear { r1, eps, .. } => vec![r1 - eps, *r1],
            TestFunctionSpec::ThreePiecePower { r, .. } => vec![*r, 0.5],
            TestFunctionSpec::LinearRamp => vec![],
            TestFunctionSpec::Hat { a, b } => vec![*a, 0.5 * (a + b), *b],
            TestFunctionSpec::Truncation { r0, eps, base } => {
                let mut v = vec![*eps, *r0];
                v.extend(base.breakpoints().into_iter().filter(|&x| x > *r0));
                v
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match self {
            TestFunctionSpec::PiecewiseLinearPeak { r1, .. }
            | TestFunctionSpec::PowerThenLinear { r1, .. } => (0.0, *r1),
            TestFunctionSpec::ThreePiecePower { .. } | TestFunctionSpec::LinearRamp => (0.0, 1.0),
            TestFunctionSpec::Hat { a, b } => (*a, *b),
            TestFunctionSpec::Truncation { r0, eps, base } => {
                let hi = base.support().1.max(*r0);
                (*eps, hi)
            }
        }
    }
}

fn peak(t: f64, r1: f64, eps: f64, rising: impl Fn(f64) -> f64) -> f64 {
    if t < r1 - eps {
        rising(t / (r1 - eps))
    } else if t <= r1 {
        (r1 - t) / eps
    } else {
        0.0
    }
}

fn peak_derivative(t: f64, r1: f64, eps: f64, rising_prime: impl Fn(f64) -> f64) -> f64 {
    if t < r1 - eps {
        rising_prime(t / (r1 - eps)) / (r1 - eps)
    } else if t <= r1 {
        -1.0 / eps
    } else {
        0.0
    }
}

/// Piecewise-linear interpolant of nodal values, zero outside the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTestFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl SampledTestFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self, FunctionalError> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(FunctionalError::InvalidTestFunction("need matching nodes and values".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FunctionalError::InvalidTestFunction("nodes must increase".into()));
        }
        Ok(Self { nodes, values })
    }

    fn locate(&self, t: f64) -> Option<usize> {
        if t < self.nodes[0] || t > *self.nodes.last().unwrap() {
            return None;
        }
        let i = self.nodes.partition_point(|&x| x <= t);
        Some(i.clamp(1, self.nodes.len() - 1) - 1)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { nodes: self.nodes.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }
}

impl TestFunction for SampledTestFunction {
    fn value(&self, t: f64) -> f64 {
        match self.locate(t) {
            Some(i) => {
                let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
                let w = (t - x0) / (x1 - x0);
                self.values[i] * (1.0 - w) + self.values[i + 1] * w
            }
            None => 0.0,
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match self.locate(t) {
            Some(i) => (self.values[i + 1] - self.values[i]) / (self.nodes[i + 1] - self.nodes[i]),
            None => 0.0,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.nodes.clone()
    }

    fn support(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }
}

/// Requests for the test functions used in the stability arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProofTestFunction {
    PiecewiseLinearPeak { r1: f64, eps: f64 },
    /// Two-dimensional variant with `beta` in `(-1-alpha, 1)`.
    PowerThenLinear { beta: f64, r1: f64, eps: f64 },
    /// Three-piece function with `s = s_alpha`; `beta` defaults to 1 and
    /// must lie in `(-1-alpha, 1)` when given.
    ThreePiecePower { r: f64, beta: Option<f64> },
    Truncation { r0: f64, eps: f64, base: Box<TestFunctionSpec> },
}

pub fn proof_test_function(
    p: &ProblemParams,
    request: &ProofTestFunction,
) -> Result<TestFunctionSpec, FunctionalError> {
    let check_beta = |beta: f64| {
        if beta > -1.0 - p.alpha() && beta < 1.0 {
            Ok(())
        } else {
            Err(FunctionalError::InvalidTestFunction(format!(
                "beta={beta} outside ({}, 1)",
                -1.0 - p.alpha()
            )))
        }
    };
    let spec = match request {
        ProofTestFunction::PiecewiseLinearPeak { r1, eps } => {
            TestFunctionSpec::PiecewiseLinearPeak { r1: *r1, eps: *eps }
        }
        ProofTestFunction::PowerThenLinear { beta, r1, eps } => {
            check_beta(*beta)?;
            TestFunctionSpec::PowerThenLinear { beta: *beta, r1: *r1, eps: *eps }
        }
        ProofTestFunction::ThreePiecePower { r, beta } => {
            if let Some(b) = beta {
                check_beta(*b)?;
            }
            TestFunctionSpec::ThreePiecePower { r: *r, s: s_alpha(p), beta: beta.unwrap_or(1.0) }
        }
        ProofTestFunction::Truncation { r0, eps, base } => {
            TestFunctionSpec::Truncation { r0: *r0, eps: *eps, base: base.clone() }
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn check_interval(a: f64, b: f64) -> Result<(), FunctionalError> {
    if a >= 0.0 && a < b && b <= 1.0 {
        Ok(())
    } else {
        Err(FunctionalError::Interval { a, b })
    }
}

fn cuts(profile: &dyn Profile, a: f64, b: f64, extra: &[f64]) -> Vec<f64> {
    let mut c = profile.knots(a, b);
    c.extend_from_slice(extra);
    c
}

/// `ω_N ∫_a^b t^{N-1} (u_r^2 - t^alpha F(u)) dt`.
pub fn energy(profile: &dyn Profile, a: f64, b: f64, quad: &QuadratureSpec) -> Result<f64, FunctionalError> {
    check_interval(a, b)?;
    let p = profile.params();
    let (n, alpha) = (p.n(), p.alpha());
    let f = profile.nonlinearity();
    let integrand = |t: f64| {
        let du = profile.u_r(t);
        t.powf(n - 1.0) * (du * du - t.powf(alpha) * f.antiderivative(profile.u(t)))
    };
    let q = integrate_split(integrand, a, b, &cuts(profile, a, b, &[]), quad)?;
    Ok(SphereArea::new(n).omega() * q.into_result()?)
}

/// Second variation `ω_N ∫ t^{N-1} (φ'^2 - t^alpha f'(u) φ^2) dt` over the
/// support of `phi`.
pub fn stability_form(
    profile: &dyn Profile,
    phi: &dyn TestFunction,
    quad: &QuadratureSpec,
) -> Result<f64, FunctionalError> {
    let (lo, hi) = phi.support();
    let scale = phi.value(0.5 * (lo + hi)).abs().max(1.0);
    if !(lo > 0.0 && hi <= 1.0 && lo < hi)
        || phi.value(lo).abs() > 1e-12 * scale
        || phi.value(hi).abs() > 1e-12 * scale
    {
        return Err(FunctionalError::Support { lo, hi });
    }
    let n = profile.params().n();
    let integrand = |t: f64| {
        let (v, dv) = (phi.value(t), phi.derivative(t));
        t.powf(n - 1.0) * (dv * dv - profile.weight(t) * v * v)
    };
    let q = integrate_split(integrand, lo, hi, &cuts(profile, lo, hi, &phi.breakpoints()), quad)?;
    Ok(SphereArea::new(n).omega() * q.into_result()?)
}

/// `1 - N - alpha N / 2`, the zeroth-order coefficient of the key functional.
pub fn key_coefficient(p: &ProblemParams) -> f64 {
    1.0 - p.n() - p.alpha() * p.n() / 2.0
}

/// Relative size below which the key bracket is treated as cancelled.
const BRACKET_ROUNDING: f64 = 16.0 * f64::EPSILON;

fn key_integrand<'a>(
    profile: &'a dyn Profile,
    v: &'a dyn TestFunction,
    absolute: bool,
) -> impl Fn(f64) -> f64 + 'a {
    let p = *profile.params();
    let (n, alpha, c) = (p.n(), p.alpha(), key_coefficient(&p));
    move |t: f64| {
        let du = profile.u_r(t);
        let (x, dx) = (v.value(t), v.derivative(t));
        let terms = [dx * dx, alpha * dx * x / t, c * x * x / (t * t)];
        let magnitude: f64 = terms.iter().map(|z| z.abs()).sum();
        let bracket = if absolute {
            magnitude
        } else {
            let sum = terms.iter().sum::<f64>();
            // on t^{s_alpha} the three terms cancel exactly; drop the rounding residue
            if sum.abs() <= BRACKET_ROUNDING * magnitude {
                0.0
            } else {
                sum
            }
        };
        t.powf(n - 1.0) * du * du * bracket
    }
}

/// Contribution of each smooth piece of `v` inside `[a, b]` to `I(a, b; v)`.
pub fn key_functional_segments(
    profile: &dyn Profile,
    a: f64,
    b: f64,
    v: &dyn TestFunction,
    quad: &QuadratureSpec,
) -> Result<Vec<(f64, f64, f64)>, FunctionalError> {
    check_interval(a, b)?;
    let mut edges: Vec<f64> = v.breakpoints().into_iter().filter(|&x| x > a && x < b).collect();
    edges.insert(0, a);
    edges.push(b);
    let integrand = key_integrand(profile, v, false);
    edges
        .windows(2)
        .map(|w| {
            let q = integrate_split(&integrand, w[0], w[1], &profile.knots(w[0], w[1]), quad)?;
            Ok((w[0], w[1], q.into_result()?))
        })
        .collect()
}

/// `I(a, b; v) = ∫_a^b t^{N-1} u_r^2 (v'^2 + alpha v' v / t + (1 - N - alpha N/2) v^2 / t^2) dt`.
pub fn key_functional(
    profile: &dyn Profile,
    a: f64,
    b: f64,
    v: &dyn TestFunction,
    quad: &QuadratureSpec,
) -> Result<f64, FunctionalError> {
    Ok(key_functional_segments(profile, a, b, v, quad)?.iter().map(|s| s.2).sum())
}

/// The same integral with every bracket term replaced by its absolute
/// value; the natural magnitude against which `I` is compared to zero.
pub fn key_functional_scale(
    profile: &dyn Profile,
    a: f64,
    b: f64,
    v: &dyn TestFunction,
    quad: &QuadratureSpec,
) -> Result<f64, FunctionalError> {
    check_interval(a, b)?;
    let integrand = key_integrand(profile, v, true);
    let q = integrate_split(integrand, a, b, &cuts(profile, a, b, &v.breakpoints()), quad)?;
    Ok(q.into_result()?)
}

/// `(v(r0)/r0)^2 (2+alpha)(1-N/2) ∫_0^{r0} t^{N-1} u_r^2 dt`, the limit of
/// `I(eps, r0; v̄_eps)` as `eps -> 0`.
pub fn truncation_limit(
    profile: &dyn Profile,
    v: &dyn TestFunction,
    r0: f64,
    quad: &QuadratureSpec,
) -> Result<f64, FunctionalError> {
    check_interval(0.0, r0)?;
    let p = profile.params();
    let n = p.n();
    let integrand = |t: f64| {
        let du = profile.u_r(t);
        t.powf(n - 1.0) * du * du
    };
    let mass = integrate_split(integrand, 0.0, r0, &profile.knots(0.0, r0), quad)?.into_result()?;
    let ratio = v.value(r0) / r0;
    Ok(ratio * ratio * (2.0 + p.alpha()) * (1.0 - n / 2.0) * mass)
}
