//! Shooting solver for radial solutions of `-u'' - (N-1)/r u' = r^alpha f(u)`.
//!
//! The ODE is integrated in the log radius `s = ln r` with state
//! `(u, z)`, `z = r u_r`:
//!
//! ```text
//! u_s = z,    z_s = -(N-2) z - e^{(2+alpha) s} f(u)
//! ```
//!
//! which removes the `1/r` coefficient and makes a log-spaced output mesh
//! uniform. The integration starts at `eps_start` from a two-term series
//! about the centre value `m`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::ProblemParams;
use crate::nonlinearity::Nonlinearity;
use crate::profile::{relative_residual, Asymptotics, Profile};

pub const SOLUTION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error("solution blew up at r={radius:e}")]
    BlowUp { radius: f64 },
    #[error("step size underflow at r={radius:e} (stiff or singular)")]
    Stiffness { radius: f64 },
    #[error("no root of u(1; m) for lambda={lambda} with m in [0, {m_max}]")]
    NoBranchRoot { lambda: f64, m_max: f64 },
    #[error("lambda must be positive, got {0}")]
    Lambda(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed solution file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Radius where the series start hands over to the integrator.
    pub eps_start: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step in the log radius.
    pub max_step: f64,
    /// Number of log-spaced output radii from `eps_start` to 1.
    pub mesh_points: usize,
    /// Upper end of the centre-value scan for branch solves.
    pub m_max: f64,
    /// Spacing of the centre-value scan.
    pub scan_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_start: 1e-6,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.05,
            mesh_points: 2048,
            m_max: 50.0,
            scan_step: 0.1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let err = |m: &str| Err(SolverError::Config(m.to_string()));
        if !(self.eps_start > 0.0 && self.eps_start < 1e-2) {
            return err("eps_start must lie in (0, 1e-2)");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return err("tolerances must be positive");
        }
        if !(self.max_step > 0.0) {
            return err("max_step must be positive");
        }
        if self.mesh_points < 2 {
            return err("mesh needs at least two points");
        }
        if !(self.m_max > 0.0 && self.scan_step > 0.0) {
            return err("m_max and scan_step must be positive");
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Sum of local error estimates on `u`.
    pub error_estimate: f64,
}

/// Two-term expansion `u ≈ m - f(m) r^{2+a}/((2+a)(N+a))`,
/// `u_r ≈ -f(m) r^{1+a}/(N+a)`.
pub fn series_start(p: &ProblemParams, f: &Nonlinearity, m: f64, eps: f64) -> (f64, f64) {
    let (n, a) = (p.n(), p.alpha());
    let fm = f.f(m);
    let u = m - fm * eps.powf(2.0 + a) / ((2.0 + a) * (n + a));
    let ur = -fm * eps.powf(1.0 + a) / (n + a);
    (u, ur)
}

struct RadialOde<'a> {
    n: f64,
    alpha: f64,
    f: &'a Nonlinearity,
}

impl RadialOde<'_> {
    fn rhs(&self, s: f64, y: [f64; 2]) -> [f64; 2] {
        [y[1], -(self.n - 2.0) * y[1] - ((2.0 + self.alpha) * s).exp() * self.f.f(y[0])]
    }

    /// `z_ss` along a solution.
    fn second(&self, s: f64, y: [f64; 2]) -> f64 {
        let e = ((2.0 + self.alpha) * s).exp();
        let zs = self.rhs(s, y)[1];
        -(self.n - 2.0) * zs - (2.0 + self.alpha) * e * self.f.f(y[0]) - e * self.f.f_prime(y[0]) * y[1]
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const BLOW_UP: f64 = 1e100;
const MIN_STEP: f64 = 1e-13;

struct Integrator<'a> {
    ode: RadialOde<'a>,
    cfg: &'a SolverConfig,
    h: f64,
    stats: SolverStats,
}

impl Integrator<'_> {
    fn dopri_step(&mut self, s: f64, y: [f64; 2], h: f64) -> ([f64; 2], [f64; 2]) {
        let mut k = [[0.0; 2]; 7];
        for i in 0..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                yi[0] += h * A[i][j] * kj[0];
                yi[1] += h * A[i][j] * kj[1];
            }
            k[i] = self.ode.rhs(s + C[i] * h, yi);
        }
        self.stats.rhs_evaluations += 7;
        let mut y5 = y;
        let mut err = [0.0; 2];
        for i in 0..7 {
            for c in 0..2 {
                y5[c] += h * B5[i] * k[i][c];
                err[c] += h * (B5[i] - B4[i]) * k[i][c];
            }
        }
        (y5, err)
    }

    /// Advances from `s` to `s_end` with step-size control.
    fn advance(&mut self, mut s: f64, mut y: [f64; 2], s_end: f64) -> Result<[f64; 2], SolverError> {
        while s < s_end {
            let mut h = self.h.min(self.cfg.max_step);
            let last = s + h >= s_end;
            if last {
                h = s_end - s;
            }
            let (y_new, err) = self.dopri_step(s, y, h);
            let norm = (0..2)
                .map(|c| err[c].abs() / (self.cfg.abs_tol + self.cfg.rel_tol * y[c].abs().max(y_new[c].abs())))
                .fold(0.0, f64::max);
            if !norm.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
                if h < MIN_STEP {
                    return Err(SolverError::BlowUp { radius: s.exp() });
                }
                self.h = 0.25 * h;
                self.stats.rejected_steps += 1;
                continue;
            }
            let factor = (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0);
            if norm <= 1.0 {
                s = if last { s_end } else { s + h };
                y = y_new;
                self.stats.accepted_steps += 1;
                self.stats.error_estimate += err[0].abs();
                if y[0].abs() > BLOW_UP {
                    return Err(SolverError::BlowUp { radius: s.exp() });
                }
                // keep the controller's suggestion when the step was cut short by s_end
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
            } else {
                self.stats.rejected_steps += 1;
                self.h = h * factor;
                if self.h < MIN_STEP {
                    return Err(SolverError::Stiffness { radius: s.exp() });
                }
            }
        }
        Ok(y)
    }
}

/// A mesh-sampled solution of the radial equation, regular at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    params: ProblemParams,
    f: Nonlinearity,
    center: f64,
    mesh: Vec<f64>,
    u_values: Vec<f64>,
    ur_values: Vec<f64>,
    log_mesh: Vec<f64>,
    z_values: Vec<f64>,
    config: SolverConfig,
    stats: SolverStats,
}

/// JSON sidecar describing a solution file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionMetadata {
    pub schema_version: u32,
    pub params: ProblemParams,
    pub nonlinearity: Nonlinearity,
    pub center_value: f64,
    pub config: SolverConfig,
    pub stats: SolverStats,
    pub max_midpoint_residual: f64,
}

impl RadialSolution {
    #[allow(clippy::too_many_arguments)]
    fn from_samples(
        params: ProblemParams,
        f: Nonlinearity,
        center: f64,
        mesh: Vec<f64>,
        u_values: Vec<f64>,
        ur_values: Vec<f64>,
        config: SolverConfig,
        stats: SolverStats,
    ) -> Self {
        let log_mesh: Vec<f64> = mesh.iter().map(|r| r.ln()).collect();
        let z_values = mesh.iter().zip(&ur_values).map(|(r, ur)| r * ur).collect();
        Self { params, f, center, mesh, u_values, ur_values, log_mesh, z_values, config, stats }
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn u_values(&self) -> &[f64] {
        &self.u_values
    }

    pub fn ur_values(&self) -> &[f64] {
        &self.ur_values
    }

    /// The shooting parameter `u(0)`.
    pub fn center_value(&self) -> f64 {
        self.center
    }

    pub fn stats(&self) -> &SolverStats {
        &self.stats
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn boundary_value(&self) -> f64 {
        *self.u_values.last().unwrap()
    }

    /// Largest relative PDE residual of the interpolant at mesh midpoints.
    pub fn max_midpoint_residual(&self) -> f64 {
        self.mesh
            .windows(2)
            .map(|w| relative_residual(self, (w[0] * w[1]).sqrt()))
            .fold(0.0, f64::max)
    }

    fn ode(&self) -> RadialOde<'_> {
        RadialOde { n: self.params.n(), alpha: self.params.alpha(), f: &self.f }
    }

    /// Quintic Hermite interpolation of `(u, z)` in the log radius.
    fn interpolate(&self, r: f64) -> (f64, f64) {
        let s = r.ln();
        let k = self.log_mesh.partition_point(|&x| x <= s).clamp(1, self.mesh.len() - 1) - 1;
        let (s0, s1) = (self.log_mesh[k], self.log_mesh[k + 1]);
        let h = s1 - s0;
        let t = (s - s0) / h;
        let ode = self.ode();
        let y0 = [self.u_values[k], self.z_values[k]];
        let y1 = [self.u_values[k + 1], self.z_values[k + 1]];
        let d0 = ode.rhs(s0, y0);
        let d1 = ode.rhs(s1, y1);
        let dd0 = [d0[1], ode.second(s0, y0)];
        let dd1 = [d1[1], ode.second(s1, y1)];
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let eval = |c: usize| {
            y0[c] * h0 + h * d0[c] * h1 + h * h * dd0[c] * h2 + h * h * dd1[c] * h3 + h * d1[c] * h4 + y1[c] * h5
        };
        (eval(0), eval(1))
    }

    pub fn metadata(&self) -> SolutionMetadata {
        SolutionMetadata {
            schema_version: SOLUTION_SCHEMA_VERSION,
            params: self.params,
            nonlinearity: self.f.clone(),
            center_value: self.center,
            config: self.config,
            stats: self.stats,
            max_midpoint_residual: self.max_midpoint_residual(),
        }
    }

    /// Writes `r,u,u_r` rows to `csv_path` and the metadata sidecar to `json_path`.
    pub fn write(&self, csv_path: &Path, json_path: &Path) -> Result<(), SolverError> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(["r", "u", "u_r"])?;
        for i in 0..self.mesh.len() {
            w.write_record([
                self.mesh[i].to_string(),
                self.u_values[i].to_string(),
                self.ur_values[i].to_string(),
            ])?;
        }
        w.flush()?;
        let file = BufWriter::new(File::create(json_path)?);
        serde_json::to_writer_pretty(file, &self.metadata())?;
        Ok(())
    }

    pub fn read(csv_path: &Path, json_path: &Path) -> Result<Self, SolverError> {
        let meta: SolutionMetadata = serde_json::from_reader(BufReader::new(File::open(json_path)?))?;
        if meta.schema_version != SOLUTION_SCHEMA_VERSION {
            return Err(SolverError::Format(format!("unsupported schema {}", meta.schema_version)));
        }
        let mut rdr = csv::Reader::from_path(csv_path)?;
        let (mut mesh, mut u, mut ur) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64, SolverError> {
                rec.get(i)
                    .and_then(|x| x.parse().ok())
                    .ok_or_else(|| SolverError::Format(format!("bad field {i} in {rec:?}")))
            };
            mesh.push(parse(0)?);
            u.push(parse(1)?);
            ur.push(parse(2)?);
        }
        if mesh.len() < 2 || mesh.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SolverError::Format("mesh must be strictly increasing".into()));
        }
        Ok(Self::from_samples(meta.params, meta.nonlinearity, meta.center_value, mesh, u, ur, meta.config, meta.stats))
    }
}

impl Profile for RadialSolution {
    fn params(&self) -> &ProblemParams {
        &self.params
    }

    fn u(&self, r: f64) -> f64 {
        if r < self.mesh[0] {
            series_start(&self.params, &self.f, self.center, r).0
        } else {
            self.interpolate(r).0
        }
    }

    fn u_r(&self, r: f64) -> f64 {
        if r < self.mesh[0] {
            series_start(&self.params, &self.f, self.center, r).1
        } else {
            self.interpolate(r).1 / r
        }
    }

    fn nonlinearity(&self) -> &Nonlinearity {
        &self.f
    }

    fn label(&self) -> String {
        format!("shoot{}[m={}]", self.params, self.center)
    }

    fn asymptotics(&self) -> Asymptotics {
        Asymptotics::Regular
    }

    fn knots(&self, a: f64, b: f64) -> Vec<f64> {
        let lo = self.mesh.partition_point(|&x| x <= a);
        let hi = self.mesh.partition_point(|&x| x < b);
        self.mesh[lo..hi].to_vec()
    }
}

fn log_mesh(eps: f64, points: usize) -> Vec<f64> {
    let s0 = eps.ln();
    (0..points)
        .map(|i| s0 * (1.0 - i as f64 / (points - 1) as f64))
        .collect()
}

/// Integrates from `eps_start` to `r = 1` and samples on the log mesh.
pub fn shoot(
    p: &ProblemParams,
    f: &Nonlinearity,
    m: f64,
    config: &SolverConfig,
) -> Result<RadialSolution, SolverError> {
    config.validate()?;
    let ode = RadialOde { n: p.n(), alpha: p.alpha(), f };
    let mut integ = Integrator { ode, cfg: config, h: 1e-3, stats: SolverStats::default() };
    let s_mesh = log_mesh(config.eps_start, config.mesh_points);
    let (u0, ur0) = series_start(p, f, m, config.eps_start);
    let mut y = [u0, config.eps_start * ur0];
    let mut ys = Vec::with_capacity(s_mesh.len());
    ys.push(y);
    for w in s_mesh.windows(2) {
        y = integ.advance(w[0], y, w[1])?;
        ys.push(y);
    }
    let mesh: Vec<f64> = s_mesh
        .iter()
        .enumerate()
        .map(|(i, s)| if i + 1 == s_mesh.len() { 1.0 } else { s.exp() })
        .collect();
    let u_values = ys.iter().map(|y| y[0]).collect();
    let ur_values = ys.iter().zip(&mesh).map(|(y, r)| y[1] / r).collect();
    Ok(RadialSolution::from_samples(*p, f.clone(), m, mesh, u_values, ur_values, *config, integ.stats))
}

/// `u(1)` for centre value `m`, without sampling.
fn boundary_value(p: &ProblemParams, f: &Nonlinearity, m: f64, config: &SolverConfig) -> Result<f64, SolverError> {
    let ode = RadialOde { n: p.n(), alpha: p.alpha(), f };
    let mut integ = Integrator { ode, cfg: config, h: 1e-3, stats: SolverStats::default() };
    let (u0, ur0) = series_start(p, f, m, config.eps_start);
    let y = integ.advance(config.eps_start.ln(), [u0, config.eps_start * ur0], 0.0)?;
    Ok(y[0])
}

/// Minimal-branch solution of `-Δu = lambda r^alpha e^u`, `u(1) = 0`: the
/// smallest centre value `m >= 0` with `u(1; m) = 0`.
pub fn solve_gelfand_branch(
    p: &ProblemParams,
    lambda: f64,
    config: &SolverConfig,
) -> Result<RadialSolution, SolverError> {
    if !(lambda > 0.0) {
        return Err(SolverError::Lambda(lambda));
    }
    config.validate()?;
    let f = Nonlinearity::gelfand(lambda);
    let mut lo = 0.0;
    let mut g_lo = boundary_value(p, &f, lo, config)?;
    let mut bracket = None;
    let steps = (config.m_max / config.scan_step).ceil() as usize;
    for k in 1..=steps {
        let hi = (k as f64 * config.scan_step).min(config.m_max);
        let g_hi = boundary_value(p, &f, hi, config)?;
        if g_hi >= 0.0 {
            bracket = Some((lo, g_lo, hi, g_hi));
            break;
        }
        lo = hi;
        g_lo = g_hi;
    }
    let (mut a, mut fa, mut b, mut fb) =
        bracket.ok_or(SolverError::NoBranchRoot { lambda, m_max: config.m_max })?;
    // Illinois false position.
    let mut side = 0;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * b.abs().max(1.0) || fb == 0.0 {
            break;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = boundary_value(p, &f, c, config)?;
        if fc == 0.0 {
            a = c;
            b = c;
            break;
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    let m = if fa.abs() < fb.abs() { a } else { b };
    shoot(p, &f, m, config)
}

/// Where and whether `u_r` changes sign on a sampled profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSignReport {
    /// `u_r` vanishes identically on the mesh.
    pub constant: bool,
    /// Mesh intervals `[r_i, r_{i+1}]` across which `u_r` changes sign or vanishes.
    pub sign_changes: Vec<(f64, f64)>,
    /// `min |u_r|` over mesh points with `r >= r_floor`.
    pub min_abs_ur: f64,
    /// Sign of `u_r` at the outer boundary (-1, 0 or 1).
    pub sign: i8,
}

/// Radius below which `u_r` is not inspected for the minimum modulus.
pub const SIGN_REPORT_FLOOR: f64 = 1e-3;

pub fn derivative_sign_profile(mesh: &[f64], ur: &[f64]) -> DerivativeSignReport {
    let max_abs = ur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return DerivativeSignReport { constant: true, sign_changes: vec![], min_abs_ur: 0.0, sign: 0 };
    }
    let mut sign_changes = Vec::new();
    for i in 0..mesh.len() - 1 {
        if ur[i] * ur[i + 1] <= 0.0 {
            sign_changes.push((mesh[i], mesh[i + 1]));
        }
    }
    let min_abs_ur = mesh
        .iter()
        .zip(ur)
        .filter(|(r, _)| **r >= SIGN_REPORT_FLOOR)
        .fold(f64::INFINITY, |m, (_, v)| m.min(v.abs()));
    let last = *ur.last().unwrap();
    let sign = if last > 0.0 { 1 } else if last < 0.0 { -1 } else { 0 };
    DerivativeSignReport { constant: false, sign_changes, min_abs_ur, sign }
}

impl RadialSolution {
    pub fn derivative_sign_profile(&self) -> DerivativeSignReport {
        derivative_sign_profile(&self.mesh, &self.ur_values)
    }
}

/// Samples `u_r` of any profile on a mesh.
pub fn sample_derivative(profile: &dyn Profile, mesh: &[f64]) -> Vec<f64> {
    mesh.iter().map(|&r| profile.u_r(r)).collect()
}
