//! Radial semi-stability through the bottom of the spectrum of the
//! linearized operator
//!
//! ```text
//! -(t^{N-1} φ')' - t^{N-1+alpha} f'(u) φ = λ t^{N-1} φ,   φ(r_min) = φ(1) = 0.
//! ```
//!
//! In the log radius `s = ln t` the quadratic form becomes
//! `∫ e^{(N-2)s} φ_s^2 - e^{Ns} W φ^2 ds` with mass `∫ e^{Ns} φ^2 ds`, which
//! is discretized by the standard three-point scheme on a uniform `s` grid
//! (a geometric mesh in `t`). The pencil is symmetric tridiagonal with a
//! diagonal mass, so the smallest eigenvalue follows from Sturm-sequence
//! bisection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{hardy_constant, ProblemParams};
use crate::profile::{log_grid, Profile};

/// Eigenvalue tolerance relative to the pencil scale.
pub const TOL_EIG_REL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("r_min must lie in (0, 1/2], got {0}")]
    InnerRadius(f64),
    #[error("need at least 16 mesh intervals, got {0}")]
    MeshSize(usize),
    #[error("weight is not finite at t={0:e}")]
    Weight(f64),
    #[error("empty stability protocol")]
    EmptyProtocol,
    #[error("bisection failed to converge after {iterations} steps (bracket [{lo}, {hi}])")]
    NotConverged { iterations: usize, lo: f64, hi: f64 },
}

/// Discrete pencil `K φ = λ M φ` on the interior nodes of a geometric mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenProblem {
    pub params: ProblemParams,
    pub r_min: f64,
    /// Number of mesh intervals between `r_min` and 1.
    pub intervals: usize,
    /// Interior radii.
    pub nodes: Vec<f64>,
    /// `t^alpha f'(u(t))` at the interior radii.
    pub weight: Vec<f64>,
    pub stiffness_diag: Vec<f64>,
    pub stiffness_off: Vec<f64>,
    pub mass: Vec<f64>,
}

pub fn assemble(profile: &dyn Profile, r_min: f64, n: usize) -> Result<EigenProblem, SpectraError> {
    assemble_with_weight(*profile.params(), |t| profile.weight(t), r_min, n)
}

/// Assembles the pencil for an arbitrary potential `t -> W(t)`.
pub fn assemble_with_weight(
    params: ProblemParams,
    weight: impl Fn(f64) -> f64,
    r_min: f64,
    n: usize,
) -> Result<EigenProblem, SpectraError> {
    if !(r_min > 0.0 && r_min <= 0.5) {
        return Err(SpectraError::InnerRadius(r_min));
    }
    if n < 16 {
        return Err(SpectraError::MeshSize(n));
    }
    let dim = params.n();
    let s0 = r_min.ln();
    let h = -s0 / n as f64;
    let s_at = |i: usize| s0 + h * i as f64;
    // flux coefficient e^{(N-2)s}/h on each of the n intervals
    let flux: Vec<f64> = (0..n).map(|i| ((dim - 2.0) * (s_at(i) + 0.5 * h)).exp() / h).collect();
    let mut nodes = Vec::with_capacity(n - 1);
    let mut w = Vec::with_capacity(n - 1);
    let mut diag = Vec::with_capacity(n - 1);
    let mut mass = Vec::with_capacity(n - 1);
    for i in 1..n {
        let s = s_at(i);
        let t = s.exp();
        let wt = weight(t);
        if !wt.is_finite() {
            return Err(SpectraError::Weight(t));
        }
        let m = h * (dim * s).exp();
        nodes.push(t);
        w.push(wt);
        mass.push(m);
        diag.push(flux[i - 1] + flux[i] - m * wt);
    }
    let off = (1..n - 1).map(|i| -flux[i]).collect();
    Ok(EigenProblem {
        params,
        r_min,
        intervals: n,
        nodes,
        weight: w,
        stiffness_diag: diag,
        stiffness_off: off,
        mass,
    })
}

impl EigenProblem {
    /// Dimensionless magnitude of the potential, `max(1, max t^2 |W(t)|)`.
    pub fn scale(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weight)
            .fold(1.0f64, |m, (t, w)| m.max(t * t * w.abs()))
    }

    pub fn tol_eig(&self) -> f64 {
        TOL_EIG_REL * self.scale()
    }

    /// Number of eigenvalues strictly below `sigma` (Sylvester inertia of `K - σM`).
    pub fn count_below(&self, sigma: f64) -> usize {
        let mut count = 0;
        let mut d = 0.0;
        for i in 0..self.nodes.len() {
            let a = self.stiffness_diag[i] - sigma * self.mass[i];
            d = if i == 0 {
                a
            } else {
                let b = self.stiffness_off[i - 1];
                a - b * b / d
            };
            if d == 0.0 {
                d = -f64::EPSILON * (a.abs() + self.mass[i]);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn apply_stiffness(&self, phi: &[f64]) -> Vec<f64> {
        let m = self.nodes.len();
        (0..m)
            .map(|i| {
                let mut v = self.stiffness_diag[i] * phi[i];
                if i > 0 {
                    v += self.stiffness_off[i - 1] * phi[i - 1];
                }
                if i + 1 < m {
                    v += self.stiffness_off[i] * phi[i + 1];
                }
                v
            })
            .collect()
    }

    /// `φᵀKφ / φᵀMφ` for nodal values on the interior nodes.
    pub fn rayleigh_quotient(&self, phi: &[f64]) -> f64 {
        let k: f64 = self.apply_stiffness(phi).iter().zip(phi).map(|(a, b)| a * b).sum();
        let m: f64 = self.mass.iter().zip(phi).map(|(m, p)| m * p * p).sum();
        k / m
    }

    /// Gershgorin lower bound for the spectrum of `M^{-1}K`.
    fn lower_bound(&self) -> f64 {
        let m = self.nodes.len();
        (0..m)
            .map(|i| {
                let mut r = 0.0;
                if i > 0 {
                    r += self.stiffness_off[i - 1].abs();
                }
                if i + 1 < m {
                    r += self.stiffness_off[i].abs();
                }
                (self.stiffness_diag[i] - r) / self.mass[i]
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda_min: f64,
    pub tol_eig: f64,
    pub bisection_steps: usize,
}

const MAX_BISECTION: usize = 400;

/// Smallest generalized eigenvalue by Sturm-sequence bisection.
pub fn min_eigenvalue(ep: &EigenProblem) -> Result<EigenResult, SpectraError> {
    let tol = ep.tol_eig();
    let mut lo = ep.lower_bound();
    let ones = vec![1.0; ep.nodes.len()];
    let mut hi = ep.rayleigh_quotient(&ones);
    // the Rayleigh quotient is an upper bound; nudge so that count_below(hi) >= 1
    hi += tol + 4.0 * f64::EPSILON * hi.abs();
    while ep.count_below(hi) == 0 {
        hi += (hi - lo).abs().max(1.0);
    }
    for step in 0..MAX_BISECTION {
        if hi - lo <= tol.max(4.0 * f64::EPSILON * lo.abs().max(hi.abs())) {
            return Ok(EigenResult { lambda_min: 0.5 * (lo + hi), tol_eig: tol, bisection_steps: step });
        }
        let mid = 0.5 * (lo + hi);
        if ep.count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(SpectraError::NotConverged { iterations: MAX_BISECTION, lo, hi })
}

/// Eigenvector for the bottom eigenvalue by shifted inverse iteration,
/// normalized to unit maximum and positive orientation.
pub fn min_eigenvector(ep: &EigenProblem, lambda_min: f64) -> Vec<f64> {
    let m = ep.nodes.len();
    let sigma = lambda_min - 1e-6 * lambda_min.abs().max(1.0);
    let diag: Vec<f64> = (0..m).map(|i| ep.stiffness_diag[i] - sigma * ep.mass[i]).collect();
    let mut x = vec![1.0; m];
    for _ in 0..4 {
        let rhs: Vec<f64> = x.iter().zip(&ep.mass).map(|(v, w)| v * w).collect();
        x = thomas(&diag, &ep.stiffness_off, &rhs);
        let peak = x.iter().fold(0.0f64, |a, v| if v.abs() > a.abs() { *v } else { a });
        x.iter_mut().for_each(|v| *v /= peak);
    }
    x
}

fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = if m > 1 { off[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let denom = diag[i] - off[i - 1] * c[i - 1];
        if i + 1 < m {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityProtocol {
    pub r_mins: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl Default for StabilityProtocol {
    fn default() -> Self {
        Self { r_mins: vec![1e-2, 1e-3, 1e-4], sizes: vec![256, 1024, 4096] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SemiStable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEntry {
    pub r_min: f64,
    pub n: usize,
    pub lambda_min: f64,
    pub tol_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub entries: Vec<ProtocolEntry>,
    pub verdict: Verdict,
    /// Smallest `λ_min` over the protocol.
    pub margin: f64,
    /// `λ_min` non-increasing as `r_min` decreases, up to refinement noise.
    pub monotone_in_r_min: bool,
    pub notes: Vec<String>,
}

/// Runs the `(r_min, n)` protocol and aggregates a verdict.
///
/// `SemiStable` needs every `λ_min >= -tol_eig`; `Unstable` needs some
/// `r_min` where every mesh size gives `λ_min < -10 tol_eig`.
pub fn is_semistable(profile: &dyn Profile, protocol: &StabilityProtocol) -> Result<StabilityVerdict, SpectraError> {
    if protocol.r_mins.is_empty() || protocol.sizes.is_empty() {
        return Err(SpectraError::EmptyProtocol);
    }
    let jobs: Vec<(f64, usize)> = protocol
        .r_mins
        .iter()
        .flat_map(|&r| protocol.sizes.iter().map(move |&n| (r, n)))
        .collect();
    let mut entries = jobs
        .par_iter()
        .map(|&(r_min, n)| {
            let ep = assemble(profile, r_min, n)?;
            let res = min_eigenvalue(&ep)?;
            Ok(ProtocolEntry { r_min, n, lambda_min: res.lambda_min, tol_eig: res.tol_eig })
        })
        .collect::<Result<Vec<_>, SpectraError>>()?;
    entries.sort_by(|a, b| b.r_min.total_cmp(&a.r_min).then(a.n.cmp(&b.n)));
    Ok(aggregate(entries))
}

fn aggregate(entries: Vec<ProtocolEntry>) -> StabilityVerdict {
    let mut notes = Vec::new();
    let margin = entries.iter().map(|e| e.lambda_min).fold(f64::INFINITY, f64::min);
    let mut r_mins: Vec<f64> = entries.iter().map(|e| e.r_min).collect();
    r_mins.sort_by(|a, b| b.total_cmp(a));
    r_mins.dedup();
    let mut sizes: Vec<usize> = entries.iter().map(|e| e.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let get = |r: f64, n: usize| entries.iter().find(|e| e.r_min == r && e.n == n).unwrap();
    let finest = *sizes.last().unwrap();
    // refinement gap between the two finest meshes bounds the error left at the finest one
    let gap = |r: f64| match sizes.len() {
        1 => 0.0,
        k => (get(r, sizes[k - 1]).lambda_min - get(r, sizes[k - 2]).lambda_min).abs(),
    };
    let discretization = |r: f64, n: usize| (get(r, n).lambda_min - get(r, finest).lambda_min).abs() + gap(r);

    let mut monotone = true;
    for &n in &sizes {
        for w in r_mins.windows(2) {
            let (outer, inner) = (get(w[0], n), get(w[1], n));
            let noise = 10.0 * outer.tol_eig.max(inner.tol_eig) + discretization(w[0], n) + discretization(w[1], n);
            if inner.lambda_min > outer.lambda_min + noise {
                monotone = false;
                notes.push(format!(
                    "lambda_min increased from {:e} (r_min={}) to {:e} (r_min={}) at n={n}",
                    outer.lambda_min, w[0], inner.lambda_min, w[1]
                ));
            }
        }
    }

    let all_nonneg = entries.iter().all(|e| e.lambda_min >= -e.tol_eig);
    let unstable = r_mins
        .iter()
        .any(|&r| sizes.iter().all(|&n| get(r, n).lambda_min < -10.0 * get(r, n).tol_eig));
    let verdict = if !monotone {
        Verdict::Inconclusive
    } else if all_nonneg {
        Verdict::SemiStable
    } else if unstable {
        Verdict::Unstable
    } else {
        notes.push("negative eigenvalues not stable under refinement".into());
        Verdict::Inconclusive
    };
    notes.push("radial perturbations only; non-radial modes are not tested".into());
    StabilityVerdict { entries, verdict, margin, monotone_in_r_min: monotone, notes }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyComparison {
    /// `sup t^2 · t^alpha f'(u(t))` over the sampling grid.
    pub sup_weight: f64,
    pub hardy: f64,
    /// Sufficient condition for semi-stability: `sup_weight <= hardy`.
    pub stable_by_hardy: bool,
}

/// Relative slack allowed when comparing against the Hardy constant.
pub const HARDY_ROUNDING: f64 = 1e-12;

/// Compares the potential with the Hardy weight on a log grid `[1e-6, 1]`.
pub fn hardy_comparison(profile: &dyn Profile) -> HardyComparison {
    let sup_weight = log_grid(1e-6, 1.0, 4001)
        .into_iter()
        .map(|t| t * t * profile.weight(t))
        .fold(f64::NEG_INFINITY, f64::max);
    let hardy = hardy_constant(profile.params());
    let stable_by_hardy = sup_weight <= hardy * (1.0 + HARDY_ROUNDING) + HARDY_ROUNDING;
    HardyComparison { sup_weight, hardy, stable_by_hardy }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::gamma;
    use crate::families::{gelfand_log_family, power_family};
    use std::f64::consts::PI;

    fn pp(n: f64, a: f64) -> ProblemParams {
        ProblemParams::new(n, a).unwrap()
    }

    fn annulus(n: usize) -> f64 {
        let ep = assemble_with_weight(pp(3.0, 0.0), |_| 0.0, 0.5, n).unwrap();
        min_eigenvalue(&ep).unwrap().lambda_min
    }

    #[test]
    fn annulus_oracle() {
        // ψ = tφ turns the problem into -ψ'' = λψ on (1/2, 1)
        let exact = 4.0 * PI * PI;
        assert!((annulus(4096) - exact).abs() < 1e-3 * exact);
        let (e1, e2, e3) = (annulus(64) - exact, annulus(128) - exact, annulus(256) - exact);
        let (q1, q2) = (e1 / e2, e2 / e3);
        assert!((3.5..4.5).contains(&q1) && (3.5..4.5).contains(&q2), "{q1} {q2}");
    }

    #[test]
    fn weight_samples() {
        let prof = gelfand_log_family(pp(10.0, 0.0)).unwrap();
        let ep = assemble(&prof, 1e-2, 64).unwrap();
        for (t, w) in ep.nodes.iter().zip(&ep.weight) {
            assert!((w * t * t - 16.0).abs() < 1e-12);
        }
        let prof = power_family(pp(11.0, 0.0), -1.0).unwrap();
        let ep = assemble(&prof, 1e-2, 64).unwrap();
        for (t, w) in ep.nodes.iter().zip(&ep.weight) {
            assert!((w * t * t - 24.0).abs() < 1e-11);
        }
    }

    #[test]
    fn assemble_guards() {
        let prof = gelfand_log_family(pp(10.0, 0.0)).unwrap();
        assert!(matches!(assemble(&prof, 0.6, 64), Err(SpectraError::InnerRadius(_))));
        assert!(matches!(assemble(&prof, 0.1, 8), Err(SpectraError::MeshSize(8))));
        assert!(matches!(
            assemble_with_weight(pp(3.0, 0.0), |_| f64::NAN, 0.1, 32),
            Err(SpectraError::Weight(_))
        ));
    }

    #[test]
    fn exact_hardy_weight_stays_nonnegative() {
        let p = pp(10.0, 0.0);
        let mut prev = f64::INFINITY;
        for r_min in [1e-1, 1e-2, 1e-3] {
            let ep = assemble_with_weight(p, |t| 16.0 / (t * t), r_min, 2048).unwrap();
            let l = min_eigenvalue(&ep).unwrap().lambda_min;
            assert!(l >= -1e-6 && l < prev, "r_min={r_min}: {l}");
            prev = l;
        }
    }

    #[test]
    fn super_hardy_weight_is_unstable() {
        let p = pp(10.0, 0.0);
        let ep = assemble_with_weight(p, |t| 1.05 * 16.0 / (t * t), 1e-2, 1024).unwrap();
        assert!(min_eigenvalue(&ep).unwrap().lambda_min < 0.0);
    }

    #[test]
    fn rayleigh_bounds_eigenvalue() {
        let prof = power_family(pp(11.0, 0.0), -0.5).unwrap();
        let ep = assemble(&prof, 1e-2, 256).unwrap();
        let res = min_eigenvalue(&ep).unwrap();
        let v = min_eigenvector(&ep, res.lambda_min);
        assert!((ep.rayleigh_quotient(&v) - res.lambda_min).abs() < 1e-6 * res.lambda_min.abs().max(1.0));
        let trial: Vec<f64> = (0..v.len()).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        assert!(ep.rayleigh_quotient(&trial) >= res.lambda_min - res.tol_eig);
    }

    #[test]
    fn verdicts() {
        let proto = StabilityProtocol::default();
        let gl = is_semistable(&gelfand_log_family(pp(10.0, 0.0)).unwrap(), &proto).unwrap();
        assert_eq!(gl.verdict, Verdict::SemiStable, "{gl:?}");
        let p = pp(11.0, 0.0);
        let g = gamma(&p);
        let crit = is_semistable(&power_family(p, g).unwrap(), &proto).unwrap();
        assert_eq!(crit.verdict, Verdict::SemiStable, "{crit:?}");
        let bad = is_semistable(&power_family(p, -1.0).unwrap(), &proto).unwrap();
        assert_eq!(bad.verdict, Verdict::Unstable, "{bad:?}");
        assert_eq!(gl.entries.len(), 9);
        assert!(gl.entries.windows(2).all(|w| w[0].r_min > w[1].r_min || w[0].n < w[1].n));
    }

    #[test]
    fn hardy_comparison_examples() {
        let gl = hardy_comparison(&gelfand_log_family(pp(10.0, 0.0)).unwrap());
        assert!((gl.sup_weight - 16.0).abs() < 1e-12 && gl.hardy == 16.0 && gl.stable_by_hardy);
        let pw = hardy_comparison(&power_family(pp(11.0, 0.0), -0.2).unwrap());
        assert!(pw.sup_weight < 20.25 && pw.stable_by_hardy);
        let bad = hardy_comparison(&power_family(pp(11.0, 0.0), -1.0).unwrap());
        assert!(!bad.stable_by_hardy);
    }

    #[test]
    fn empty_protocol_rejected() {
        let prof = gelfand_log_family(pp(10.0, 0.0)).unwrap();
        let proto = StabilityProtocol { r_mins: vec![], sizes: vec![256] };
        assert_eq!(is_semistable(&prof, &proto), Err(SpectraError::EmptyProtocol));
    }
}
