//! The radial-profile abstraction shared by closed-form families and
//! numerically computed solutions.

use crate::exponents::ProblemParams;
use crate::nonlinearity::Nonlinearity;

/// Leading behaviour of a profile at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Asymptotics {
    /// Bounded with bounded gradient energy density near 0.
    Regular,
    /// `u ~ c log r`, `u_r ~ c / r`.
    Logarithmic,
    /// `u ~ r^g`, `u_r ~ g r^(g-1)`.
    Power { exponent: f64 },
    Unknown,
}

/// A radial function on `(0, 1]` together with the nonlinearity it solves
/// `-Δu = r^alpha f(u)` for.
pub trait Profile: Send + Sync {
    fn params(&self) -> &ProblemParams;
    fn u(&self, r: f64) -> f64;
    fn u_r(&self, r: f64) -> f64;
    fn nonlinearity(&self) -> &Nonlinearity;
    fn label(&self) -> String;

    fn asymptotics(&self) -> Asymptotics {
        Asymptotics::Unknown
    }

    /// Radii in `(a, b)` where the profile is only piecewise smooth.
    fn knots(&self, _a: f64, _b: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Linearized potential `r^alpha f'(u(r))`.
    fn weight(&self, r: f64) -> f64 {
        r.powf(self.params().alpha()) * self.nonlinearity().f_prime(self.u(r))
    }

    /// Right-hand side `r^alpha f(u(r))`.
    fn source(&self, r: f64) -> f64 {
        r.powf(self.params().alpha()) * self.nonlinearity().f(self.u(r))
    }
}

/// Relative step of the derivative stencils used on profiles.
pub const RELATIVE_STEP: f64 = 1e-4;

/// Second derivative of `u` from a fourth-order central stencil on `u_r`
/// with step `RELATIVE_STEP * r`.
pub fn second_derivative(profile: &dyn Profile, r: f64) -> f64 {
    let h = RELATIVE_STEP * r;
    let d = |x: f64| profile.u_r(x);
    (-d(r + 2.0 * h) + 8.0 * d(r + h) - 8.0 * d(r - h) + d(r - 2.0 * h)) / (12.0 * h)
}

/// `-u'' - (N-1)/r u' - r^alpha f(u)`.
pub fn pde_residual(profile: &dyn Profile, r: f64) -> f64 {
    let n = profile.params().n();
    -second_derivative(profile, r) - (n - 1.0) / r * profile.u_r(r) - profile.source(r)
}

/// Residual scaled by `max(1, |r^alpha f(u)|)`.
pub fn relative_residual(profile: &dyn Profile, r: f64) -> f64 {
    pde_residual(profile, r).abs() / profile.source(r).abs().max(1.0)
}

/// `n` log-spaced radii from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
