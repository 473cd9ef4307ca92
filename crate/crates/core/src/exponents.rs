//! Closed-form exponent and threshold algebra in terms of the dimension `N`
//! and the weight exponent `alpha`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on `N - (10 + 4 alpha)` used to detect the critical line.
pub const CRITICAL_LINE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("dimension must satisfy N >= 2, got {0}")]
    Dimension(f64),
    #[error("weight exponent must satisfy alpha > -2, got {0}")]
    Weight(f64),
    #[error("non-finite parameter")]
    NonFinite,
}

/// Dimension and weight exponent of `-Δu = |x|^alpha f(u)`.
///
/// `n` is real so that sweeps can cross the critical line continuously.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProblemParams {
    n: f64,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: f64,
    alpha: f64,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = ParamError;
    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        ProblemParams::new(raw.n, raw.alpha)
    }
}

impl From<ProblemParams> for RawParams {
    fn from(p: ProblemParams) -> Self {
        RawParams { n: p.n, alpha: p.alpha }
    }
}

impl ProblemParams {
    pub fn new(n: f64, alpha: f64) -> Result<Self, ParamError> {
        if !n.is_finite() || !alpha.is_finite() {
            return Err(ParamError::NonFinite);
        }
        if n < 2.0 {
            return Err(ParamError::Dimension(n));
        }
        if alpha <= -2.0 {
            return Err(ParamError::Weight(alpha));
        }
        Ok(Self { n, alpha })
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `sqrt((alpha + 2)(alpha + 2N - 2))`, the surd shared by `gamma` and `s_alpha`.
    fn surd(&self) -> f64 {
        ((self.alpha + 2.0) * (self.alpha + 2.0 * self.n - 2.0)).sqrt()
    }

    /// Signed distance to the critical line `N = 10 + 4 alpha`.
    pub fn critical_offset(&self) -> f64 {
        10.0 + 4.0 * self.alpha - self.n
    }
}

impl fmt::Display for ProblemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(N={}, alpha={})", self.n, self.alpha)
    }
}

/// A threshold exponent that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    Finite(f64),
    Unbounded,
}

impl Threshold {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Threshold::Finite(v) => Some(v),
            Threshold::Unbounded => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, Threshold::Unbounded)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(v) => write!(f, "{v}"),
            Threshold::Unbounded => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `N < 10 + 4 alpha`: semi-stable solutions are bounded.
    Subcritical,
    /// `N = 10 + 4 alpha`: logarithmic envelope.
    Critical,
    /// `N > 10 + 4 alpha`: power envelope `r^gamma` with `gamma < 0`.
    Supercritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        };
        f.write_str(s)
    }
}

/// `2 - N/2 + alpha/2 + sqrt((alpha+2)(alpha+2N-2))/2`.
pub fn gamma(p: &ProblemParams) -> f64 {
    2.0 - p.n / 2.0 + p.alpha / 2.0 + p.surd() / 2.0
}

/// `-alpha/2 - sqrt((2+alpha)(2N-2+alpha))/2`, the exponent annihilating the
/// middle segment of the three-piece test function.
pub fn s_alpha(p: &ProblemParams) -> f64 {
    -p.alpha / 2.0 - p.surd() / 2.0
}

/// Optimal Hardy constant `(N-2)^2/4`.
pub fn hardy_constant(p: &ProblemParams) -> f64 {
    (p.n - 2.0).powi(2) / 4.0
}

/// Weighted Joseph–Lundgren exponent.
pub fn p_joseph_lundgren(p: &ProblemParams) -> Threshold {
    let (n, a) = (p.n, p.alpha);
    if regime(p) != Regime::Supercritical {
        return Threshold::Unbounded;
    }
    let num = (n - 2.0).powi(2) - 2.0 * (a + 2.0) * (a + n)
        + 2.0 * ((a + 2.0).powi(3) * (a + 2.0 * n - 2.0)).sqrt();
    let den = (n - 2.0) * (n - 4.0 * a - 10.0);
    Threshold::Finite(num / den)
}

/// Critical Sobolev exponent `(N+2)/(N-2)`, unbounded in dimension 2.
pub fn critical_sobolev(p: &ProblemParams) -> Threshold {
    if p.n <= 2.0 {
        Threshold::Unbounded
    } else {
        Threshold::Finite((p.n + 2.0) / (p.n - 2.0))
    }
}

pub fn regime(p: &ProblemParams) -> Regime {
    let offset = p.critical_offset();
    if offset.abs() <= CRITICAL_LINE_TOL {
        Regime::Critical
    } else if offset > 0.0 {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    }
}

/// `(N-2)^2/4 - (-g + alpha + 2)(g + N - 2)`: the Hardy margin of the power
/// profile `r^g - 1`. Nonnegative exactly when `gamma(N, alpha) <= g < 0` in
/// the supercritical regime.
pub fn power_stability_margin(p: &ProblemParams, g: f64) -> f64 {
    hardy_constant(p) - (-g + p.alpha + 2.0) * (g + p.n - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub params: ProblemParams,
    pub gamma: f64,
    pub s_alpha: f64,
    pub hardy: f64,
    pub p_sobolev: Threshold,
    pub p_jl: Threshold,
    pub regime: Regime,
}

impl ExponentReport {
    pub fn new(p: &ProblemParams) -> Self {
        Self {
            params: *p,
            gamma: gamma(p),
            s_alpha: s_alpha(p),
            hardy: hardy_constant(p),
            p_sobolev: critical_sobolev(p),
            p_jl: p_joseph_lundgren(p),
            regime: regime(p),
        }
    }
}
