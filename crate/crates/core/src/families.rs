//! Explicit radial solution families and their residual and `H^1` checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::ProblemParams;
use crate::functionals::SphereArea;
use crate::nonlinearity::Nonlinearity;
use crate::profile::{Asymptotics, Profile};
use crate::quadrature::{integrate_split, QuadratureError, QuadratureSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("family requires N > 2, got N={0}")]
    DimensionTooLow(f64),
    #[error("power family requires g < 0, got g={0}")]
    NonNegativeExponent(f64),
    #[error("Brezis-Vazquez family requires alpha = 0, got alpha={0}")]
    WeightedBrezisVazquez(f64),
    #[error("q={q} outside ({lo}, {hi}]")]
    ExponentOutOfRange { q: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Which closed-form family a profile belongs to, with its parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// `u = -log r` for `-Δu = (N-2) r^alpha e^{(2+alpha) u}`.
    GelfandLog,
    /// `u = -(2+alpha) log r + log((2+alpha)(N-2))` for `-Δu = r^alpha e^u`.
    WholeSpaceGelfand,
    /// `u = r^g - 1`, `g < 0`.
    Power { g: f64 },
    /// `u = r^q - 1` for `-Δu = C (1+u)^{(q-2)/q}`, outside `H^1`.
    BrezisVazquez { q: f64 },
    /// `u ≡ value` paired with an arbitrary nonlinearity (not a solution
    /// unless `f(value) = 0`).
    Constant { value: f64, f: Nonlinearity },
}

/// Serializable description of a family profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    pub params: ProblemParams,
    pub family: Family,
}

impl FamilyDescriptor {
    pub fn build(&self) -> Result<RadialProfile, FamilyError> {
        let p = self.params;
        match &self.family {
            Family::GelfandLog => gelfand_log_family(p),
            Family::WholeSpaceGelfand => whole_space_gelfand(p),
            Family::Power { g } => power_family(p, *g),
            Family::BrezisVazquez { q } => brezis_vazquez_family(p, *q),
            Family::Constant { value, f } => Ok(constant_profile(p, *value, f.clone())),
        }
    }
}

/// A closed-form radial profile. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    params: ProblemParams,
    family: Family,
    f: Nonlinearity,
}

impl RadialProfile {
    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn descriptor(&self) -> FamilyDescriptor {
        FamilyDescriptor { params: self.params, family: self.family.clone() }
    }
}

impl Profile for RadialProfile {
    fn params(&self) -> &ProblemParams {
        &self.params
    }

    fn u(&self, r: f64) -> f64 {
        let (n, a) = (self.params.n(), self.params.alpha());
        match &self.family {
            Family::GelfandLog => -r.ln(),
            Family::WholeSpaceGelfand => -(2.0 + a) * r.ln() + ((2.0 + a) * (n - 2.0)).ln(),
            Family::Power { g } => r.powf(*g) - 1.0,
            Family::BrezisVazquez { q } => r.powf(*q) - 1.0,
            Family::Constant { value, .. } => *value,
        }
    }

    fn u_r(&self, r: f64) -> f64 {
        let a = self.params.alpha();
        match &self.family {
            Family::GelfandLog => -1.0 / r,
            Family::WholeSpaceGelfand => -(2.0 + a) / r,
            Family::Power { g } => g * r.powf(g - 1.0),
            Family::BrezisVazquez { q } => q * r.powf(q - 1.0),
            Family::Constant { .. } => 0.0,
        }
    }

    fn nonlinearity(&self) -> &Nonlinearity {
        &self.f
    }

    fn label(&self) -> String {
        let p = &self.params;
        match &self.family {
            Family::GelfandLog => format!("gelfand_log{p}"),
            Family::WholeSpaceGelfand => format!("whole_space_gelfand{p}"),
            Family::Power { g } => format!("power{p}[g={g}]"),
            Family::BrezisVazquez { q } => format!("brezis_vazquez{p}[q={q}]"),
            Family::Constant { value, .. } => format!("constant{p}[u={value}]"),
        }
    }

    fn asymptotics(&self) -> Asymptotics {
        match &self.family {
            Family::GelfandLog | Family::WholeSpaceGelfand => Asymptotics::Logarithmic,
            Family::Power { g } => Asymptotics::Power { exponent: *g },
            Family::BrezisVazquez { q } => Asymptotics::Power { exponent: *q },
            Family::Constant { .. } => Asymptotics::Regular,
        }
    }
}

fn require_above_two(p: &ProblemParams) -> Result<(), FamilyError> {
    if p.n() <= 2.0 {
        Err(FamilyError::DimensionTooLow(p.n()))
    } else {
        Ok(())
    }
}

/// `u = -log r`, `f(t) = (N-2) e^{(2+alpha) t}`. The induced weight
/// `r^alpha f'(u)` equals `(N-2)(2+alpha)/r^2`, the Hardy constant on the
/// critical line.
pub fn gelfand_log_family(p: ProblemParams) -> Result<RadialProfile, FamilyError> {
    require_above_two(&p)?;
    let f = Nonlinearity::Exponential { scale: p.n() - 2.0, rate: 2.0 + p.alpha() };
    Ok(RadialProfile { params: p, family: Family::GelfandLog, f })
}

/// Whole-space singular Gelfand-Hénon solution with `f(t) = e^t`.
pub fn whole_space_gelfand(p: ProblemParams) -> Result<RadialProfile, FamilyError> {
    require_above_two(&p)?;
    Ok(RadialProfile { params: p, family: Family::WholeSpaceGelfand, f: Nonlinearity::gelfand(1.0) })
}

/// `u = r^g - 1` with `f(t) = (-g)(g+N-2)(1+t)^{1+(2+alpha)/(-g)}`.
pub fn power_family(p: ProblemParams, g: f64) -> Result<RadialProfile, FamilyError> {
    if !(g < 0.0) {
        return Err(FamilyError::NonNegativeExponent(g));
    }
    let f = Nonlinearity::Power {
        coef: (-g) * (g + p.n() - 2.0),
        shift: 1.0,
        exponent: 1.0 + (2.0 + p.alpha()) / (-g),
    };
    Ok(RadialProfile { params: p, family: Family::Power { g }, f })
}

/// Admissible exponent window `(-N/2 + 2 - sqrt(N-1), -N/2 + 1]`.
pub fn brezis_vazquez_range(n: f64) -> (f64, f64) {
    (-n / 2.0 + 2.0 - (n - 1.0).sqrt(), -n / 2.0 + 1.0)
}

/// `C_{N,q} = -q (q + N - 2)`.
pub fn brezis_vazquez_constant(n: f64, q: f64) -> f64 {
    -q * (q + n - 2.0)
}

/// Hardy product `r^2 * weight = -(q-2)(q+N-2)` of the Brezis-Vázquez
/// profile. Defined for any `q`, including the excluded lower endpoint.
pub fn brezis_vazquez_hardy_product(n: f64, q: f64) -> f64 {
    -(q - 2.0) * (q + n - 2.0)
}

/// `u = r^q - 1` solving `-Δu = C_{N,q} (1+u)^{(q-2)/q}`; autonomous only.
pub fn brezis_vazquez_family(p: ProblemParams, q: f64) -> Result<RadialProfile, FamilyError> {
    if p.alpha() != 0.0 {
        return Err(FamilyError::WeightedBrezisVazquez(p.alpha()));
    }
    if p.n() < 3.0 {
        return Err(FamilyError::DimensionTooLow(p.n()));
    }
    let (lo, hi) = brezis_vazquez_range(p.n());
    if !(q > lo && q <= hi) {
        return Err(FamilyError::ExponentOutOfRange { q, lo, hi });
    }
    let f = Nonlinearity::Power {
        coef: brezis_vazquez_constant(p.n(), q),
        shift: 1.0,
        exponent: (q - 2.0) / q,
    };
    Ok(RadialProfile { params: p, family: Family::BrezisVazquez { q }, f })
}

pub fn constant_profile(p: ProblemParams, value: f64, f: Nonlinearity) -> RadialProfile {
    RadialProfile { params: p, family: Family::Constant { value, f: f.clone() }, f }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H1Trend {
    Converging,
    Diverging,
}

/// Outcome of the `H^1(B_1)` membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Report {
    /// `None` when the profile's asymptotics are unknown.
    pub analytic: Option<bool>,
    /// `(eps, ω_N ∫_eps^1 t^{N-1}(u^2 + u_r^2) dt)`.
    pub numeric: Vec<(f64, f64)>,
    pub trend: H1Trend,
    pub member: bool,
}

/// Cutoffs for the numeric witness of `H^1` membership.
pub const H1_CUTOFFS: [f64; 2] = [1e-3, 1e-6];
/// Growth factor between the two cutoffs above which the energy is deemed divergent.
pub const H1_DIVERGENCE_RATIO: f64 = 1.1;

/// Decides convergence of `∫_0^1 t^{N-1}(u^2 + u_r^2) dt`.
///
/// Power behaviour `u_r ~ g r^{g-1}` converges iff `g > 1 - N/2`; log
/// behaviour always converges for `N > 2`. Unknown asymptotics fall back
/// to the numeric trend between the cutoffs in [`H1_CUTOFFS`].
pub fn is_h1(profile: &dyn Profile) -> Result<H1Report, FamilyError> {
    let n = profile.params().n();
    let analytic = match profile.asymptotics() {
        Asymptotics::Regular => Some(true),
        Asymptotics::Logarithmic => Some(n > 2.0),
        Asymptotics::Power { exponent } => Some(exponent > 1.0 - n / 2.0),
        Asymptotics::Unknown => None,
    };
    let omega = SphereArea::new(n).omega();
    let quad = QuadratureSpec::default().with_rel_tol(1e-9);
    let mut numeric = Vec::with_capacity(H1_CUTOFFS.len());
    for &eps in &H1_CUTOFFS {
        let integrand = |t: f64| {
            let u = profile.u(t);
            let du = profile.u_r(t);
            t.powf(n - 1.0) * (u * u + du * du)
        };
        let q = integrate_split(integrand, eps, 1.0, &profile.knots(eps, 1.0), &quad)?;
        numeric.push((eps, omega * q.value));
    }
    let (coarse, fine) = (numeric[0].1, numeric[1].1);
    let trend = if fine.is_finite() && fine <= H1_DIVERGENCE_RATIO * coarse {
        H1Trend::Converging
    } else {
        H1Trend::Diverging
    };
    let member = analytic.unwrap_or(trend == H1Trend::Converging);
    Ok(H1Report { analytic, numeric, trend, member })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{gamma, hardy_constant, power_stability_margin};
    use crate::profile::{log_grid, pde_residual, relative_residual};

    fn pp(n: f64, a: f64) -> ProblemParams {
        ProblemParams::new(n, a).unwrap()
    }

    #[test]
    fn gelfand_log_weight() {
        let prof = gelfand_log_family(pp(10.0, 0.0)).unwrap();
        for r in [0.1, 0.5, 0.9] {
            assert!((r * r * prof.weight(r) - 16.0).abs() < 1e-13);
        }
        assert_eq!(prof.u(1.0), 0.0);
        let off = gelfand_log_family(pp(12.0, 0.0)).unwrap();
        assert!((0.25 * 0.25 * off.weight(0.25) - 20.0).abs() < 1e-12);
        assert_eq!(hardy_constant(&pp(12.0, 0.0)), 25.0);
        assert!(matches!(gelfand_log_family(pp(2.0, 0.0)), Err(FamilyError::DimensionTooLow(_))));
    }

    #[test]
    fn whole_space_hardy_comparison() {
        for (n, expected, hardy) in [(10.0, 16.0, 16.0), (11.0, 18.0, 20.25), (9.0, 14.0, 12.25)] {
            let prof = whole_space_gelfand(pp(n, 0.0)).unwrap();
            let w = 0.3f64.powi(2) * prof.weight(0.3);
            assert!((w - expected).abs() < 1e-12, "N={n}: {w}");
            assert_eq!(hardy_constant(&pp(n, 0.0)), hardy);
        }
        assert!(whole_space_gelfand(pp(2.0, 1.0)).is_err());
    }

    #[test]
    fn power_family_examples() {
        let p = pp(11.0, 0.0);
        let g = gamma(&p);
        let prof = power_family(p, g).unwrap();
        assert!((0.37f64.powi(2) * prof.weight(0.37) - 20.25).abs() < 1e-11);
        let prof2 = power_family(p, -0.2).unwrap();
        assert_eq!(prof2.u(1.0), 0.0);
        assert!(log_grid(1e-4, 0.999, 50).iter().all(|&r| prof2.u(r) > 0.0));
        for r in log_grid(1e-4, 1.0, 50) {
            let env = prof.u(r).abs() / r.powf(g);
            assert!((env - (1.0 - r.powf(-g))).abs() < 1e-12 && env <= 1.0);
        }
        assert!(matches!(power_family(p, 0.0), Err(FamilyError::NonNegativeExponent(_))));
        assert!(power_stability_margin(&p, g).abs() < 1e-12);
    }

    #[test]
    fn brezis_vazquez_examples() {
        let p = pp(10.0, 0.0);
        assert_eq!(brezis_vazquez_range(10.0), (-6.0, -4.0));
        let prof = brezis_vazquez_family(p, -4.0).unwrap();
        assert_eq!(brezis_vazquez_constant(10.0, -4.0), 16.0);
        assert!((0.5f64.powi(2) * prof.weight(0.5) - 24.0).abs() < 1e-12);
        assert_eq!(brezis_vazquez_hardy_product(10.0, -6.0), 16.0);
        assert!(brezis_vazquez_family(p, -6.0).is_err());
        assert!(brezis_vazquez_family(p, -3.9).is_err());
        assert!(brezis_vazquez_family(pp(10.0, 0.5), -4.0).is_err());
    }

    #[test]
    fn residual_examples() {
        let g = gelfand_log_family(pp(10.0, 0.0)).unwrap();
        assert!(relative_residual(&g, 0.5) < 1e-8);
        let pw = power_family(pp(11.0, 0.0), -0.3).unwrap();
        assert!(relative_residual(&pw, 0.25) < 1e-8);
        let c = constant_profile(pp(3.0, 0.0), 1.0, Nonlinearity::constant(1.0));
        assert!((pde_residual(&c, 0.5) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_consistency_is_second_order() {
        let profiles = [
            gelfand_log_family(pp(10.0, 0.0)).unwrap(),
            whole_space_gelfand(pp(11.0, 0.5)).unwrap(),
            power_family(pp(11.0, 0.0), -0.3).unwrap(),
            brezis_vazquez_family(pp(10.0, 0.0), -4.5).unwrap(),
        ];
        for prof in &profiles {
            for r in [0.01, 0.2, 0.99] {
                let err = |h: f64| ((prof.u(r + h) - prof.u(r - h)) / (2.0 * h) - prof.u_r(r)).abs();
                let (e1, e2) = (err(1e-3 * r), err(5e-4 * r));
                assert!(e2 < 0.3 * e1 || e2 < 1e-9 * prof.u_r(r).abs(), "{}: {e1} {e2}", prof.label());
            }
        }
    }

    #[test]
    fn h1_examples() {
        let p = pp(11.0, 0.0);
        let r = is_h1(&power_family(p, gamma(&p)).unwrap()).unwrap();
        assert!(r.member && r.analytic == Some(true) && r.trend == H1Trend::Converging);
        let bv = is_h1(&brezis_vazquez_family(pp(10.0, 0.0), -4.0).unwrap()).unwrap();
        assert!(!bv.member && bv.trend == H1Trend::Diverging);
        let gl = is_h1(&gelfand_log_family(pp(10.0, 0.0)).unwrap()).unwrap();
        assert!(gl.member);
    }

    #[test]
    fn descriptor_round_trip() {
        let d = FamilyDescriptor { params: pp(11.0, 0.0), family: Family::Power { g: -0.25 } };
        let s = serde_json::to_string(&d).unwrap();
        let back: FamilyDescriptor = serde_json::from_str(&s).unwrap();
        assert_eq!(back.build().unwrap(), d.build().unwrap());
        let bad = r#"{"params":{"n":11.0,"alpha":0.0},"family":{"kind":"power","g":0.5}}"#;
        let d: FamilyDescriptor = serde_json::from_str(bad).unwrap();
        assert!(d.build().is_err());
    }
}
