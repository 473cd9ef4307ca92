//! Numerical verification toolkit for semi-stable radial solutions of the
//! Hardy–Hénon equation `-Δu = |x|^alpha f(u)` on the punctured unit ball.
//!
//! The crate is organised bottom-up:
//!
//! - [`exponents`]: closed-form exponents (`gamma`, `s_alpha`, Joseph–Lundgren,
//!   Sobolev, Hardy constant) and the dimension regimes.
//! - [`families`]: explicit singular solution families as [`profile::Profile`]s.
//! - [`functionals`]: energy, second variation and the key functional
//!   `I(a, b; v)` with the piecewise test functions used in the estimates.
//! - [`radial_solver`]: series-started shooting from the origin and the
//!   minimal Gelfand branch.
//! - [`spectra`]: the radial Sturm–Liouville pencil and semi-stability verdicts.
//! - [`harness`]: empirical constants for the pointwise estimates, sweeps and
//!   report files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exponents;
pub mod families;
pub mod functionals;
pub mod harness;
pub mod nonlinearity;
pub mod profile;
pub mod quadrature;
pub mod radial_solver;
pub mod spectra;

pub use exponents::{ProblemParams, Regime, Threshold};
pub use families::{Family, FamilyDescriptor, RadialProfile};
pub use nonlinearity::Nonlinearity;
pub use profile::Profile;
pub use radial_solver::{RadialSolution, SolverConfig};
