//! One-dimensional adaptive quadrature with optional geometric grading toward
//! the left endpoint.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMethod {
    AdaptiveSimpson,
    GaussLegendreComposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Split `[a, b]` into pieces whose widths shrink by 1/2 toward `a`.
    GeometricTowardZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth of the adaptive recursion.
    pub max_subdivisions: u32,
    pub grading: Grading,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: QuadMethod::GaussLegendreComposite,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 60,
            grading: Grading::GeometricTowardZero,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("quadrature did not converge: estimate {value:e}, error estimate {error:e}")]
    NotConverged { value: f64, error: f64 },
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(QuadratureError::InvalidSpec("tolerances must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(QuadratureError::InvalidSpec("max_subdivisions must be >= 1"));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

impl Quadrature {
    fn zero() -> Self {
        Self { value: 0.0, error: 0.0, converged: true }
    }

    fn add(&mut self, other: Quadrature) {
        self.value += other.value;
        self.error += other.error;
        self.converged &= other.converged;
    }

    /// Converts a non-converged result into an error carrying the best estimate.
    pub fn into_result(self) -> Result<f64, QuadratureError> {
        if self.converged && self.value.is_finite() {
            Ok(self.value)
        } else {
            Err(QuadratureError::NotConverged { value: self.value, error: self.error })
        }
    }
}

// 10-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Gauss-Legendre value of `f` and of `|f|` on `[a, b]`.
fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let (mut s, mut m) = (0.0, 0.0);
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        let (l, r) = (f(c - h * x), f(c + h * x));
        s += w * (l + r);
        m += w * (l.abs() + r.abs());
    }
    (s * h, m * h.abs())
}

/// Differences below this multiple of `eps * ∫|f|` are rounding noise.
const ROUNDOFF_FACTOR: f64 = 64.0;
/// Panel budget of a single adaptive call.
const MAX_PANELS: usize = 1 << 15;

fn roundoff(magnitude: f64) -> f64 {
    ROUNDOFF_FACTOR * f64::EPSILON * magnitude
}

/// Maximum number of halvings toward a zero left endpoint.
const MAX_GRADING_LEVELS: usize = 1000;
/// Grading always descends at least this far (relative to `b`) before the
/// negligible-contribution stop may fire.
const MIN_GRADING_DEPTH: f64 = 1e-12;

/// Integrates `f` over `[a, b]` according to `spec`.
///
/// A zero left endpoint is approached by halving pieces until their
/// contribution is negligible; the remaining sliver is estimated by a single
/// open Gauss-Legendre panel. Non-integrable endpoint behaviour exhausts the
/// grading budget and comes back flagged as non-converged.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature, QuadratureError> {
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadratureError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(Quadrature::zero());
    }
    let out = match spec.grading {
        Grading::Uniform => adaptive(&f, a, b, spec),
        Grading::GeometricTowardZero if a > 0.0 => {
            let mut total = Quadrature::zero();
            let mut hi = b;
            while hi > a {
                let lo = (0.5 * hi).max(a);
                total.add(adaptive(&f, lo, hi, spec));
                hi = lo;
            }
            total
        }
        Grading::GeometricTowardZero => graded_from_zero(&f, b, spec),
    };
    Ok(out)
}

/// Integrates over consecutive pieces delimited by `points` (sorted, inside
/// `[a, b]`), so that kinks of the integrand never sit inside a panel.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<Quadrature, QuadratureError> {
    let mut cuts: Vec<f64> = points.iter().copied().filter(|&p| p > a && p < b).collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();
    let mut total = Quadrature::zero();
    let mut lo = a;
    for &c in cuts.iter().chain(std::iter::once(&b)) {
        total.add(integrate(&f, lo, c, spec)?);
        lo = c;
    }
    Ok(total)
}

fn graded_from_zero<F: Fn(f64) -> f64>(f: &F, b: f64, spec: &QuadratureSpec) -> Quadrature {
    let mut total = Quadrature::zero();
    let mut hi = b;
    let mut quiet = 0;
    for _ in 0..MAX_GRADING_LEVELS {
        let lo = 0.5 * hi;
        if lo == 0.0 {
            break;
        }
        let piece = adaptive(f, lo, hi, spec);
        total.add(piece);
        hi = lo;
        if !total.value.is_finite() {
            total.converged = false;
            return total;
        }
        let negligible = spec.abs_tol.max(spec.rel_tol * total.value.abs());
        if piece.value.abs() <= negligible {
            quiet += 1;
            if quiet >= 2 && hi <= MIN_GRADING_DEPTH * b {
                let (tail, _) = gauss_legendre(f, 0.0, hi);
                total.value += tail;
                total.error += tail.abs();
                return total;
            }
        } else {
            quiet = 0;
        }
    }
    total.converged = false;
    total
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Quadrature {
    match spec.method {
        QuadMethod::GaussLegendreComposite => {
            let (whole, _) = gauss_legendre(f, a, b);
            let tol = spec.abs_tol.max(spec.rel_tol * whole.abs());
            let mut budget = MAX_PANELS;
            gl_recursive(f, a, b, whole, tol, spec, 0, &mut budget)
        }
        QuadMethod::AdaptiveSimpson => {
            let fa = f(a);
            let fb = f(b);
            let m = 0.5 * (a + b);
            let fm = f(m);
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let tol = spec.abs_tol.max(spec.rel_tol * whole.abs());
            let mut budget = MAX_PANELS;
            simpson_recursive(f, a, b, fa, fm, fb, whole, tol, spec, 0, &mut budget)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gl_recursive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    spec: &QuadratureSpec,
    depth: u32,
    budget: &mut usize,
) -> Quadrature {
    let m = 0.5 * (a + b);
    let (left, left_abs) = gauss_legendre(f, a, m);
    let (right, right_abs) = gauss_legendre(f, m, b);
    *budget = budget.saturating_sub(2);
    let halves = left + right;
    let diff = (halves - whole).abs();
    if diff <= tol.max(roundoff(left_abs + right_abs)) || !diff.is_finite() {
        return Quadrature { value: halves, error: diff, converged: diff.is_finite() };
    }
    if depth >= spec.max_subdivisions || *budget == 0 || m <= a || m >= b {
        return Quadrature { value: halves, error: diff, converged: false };
    }
    let mut q = gl_recursive(f, a, m, left, 0.5 * tol, spec, depth + 1, budget);
    q.add(gl_recursive(f, m, b, right, 0.5 * tol, spec, depth + 1, budget));
    q
}

#[allow(clippy::too_many_arguments)]
fn simpson_recursive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    spec: &QuadratureSpec,
    depth: u32,
    budget: &mut usize,
) -> Quadrature {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    *budget = budget.saturating_sub(1);
    let magnitude = (b - a) / 12.0 * (fa.abs() + 4.0 * flm.abs() + 2.0 * fm.abs() + 4.0 * frm.abs() + fb.abs());
    if delta.abs() <= (15.0 * tol).max(roundoff(magnitude)) || !delta.is_finite() {
        let value = left + right + delta / 15.0;
        return Quadrature { value, error: delta.abs() / 15.0, converged: delta.is_finite() };
    }
    if depth >= spec.max_subdivisions || *budget == 0 || m <= a || m >= b {
        return Quadrature { value: left + right, error: delta.abs(), converged: false };
    }
    let mut q = simpson_recursive(f, a, m, fa, flm, fm, left, 0.5 * tol, spec, depth + 1, budget);
    q.add(simpson_recursive(f, m, b, fm, frm, fb, right, 0.5 * tol, spec, depth + 1, budget));
    q
}
