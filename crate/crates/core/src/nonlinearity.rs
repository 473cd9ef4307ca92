//! Nonlinearities `f` together with `f'` and the antiderivative `F(t) = ∫_0^t f`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `scale * exp(rate * t)`.
    Exponential { scale: f64, rate: f64 },
    /// `coef * (shift + t)^exponent`, defined for `shift + t > 0`.
    Power { coef: f64, shift: f64, exponent: f64 },
    /// `sum_k coeffs[k] * t^k`.
    Polynomial { coeffs: Vec<f64> },
}

impl Nonlinearity {
    pub fn constant(c: f64) -> Self {
        Nonlinearity::Polynomial { coeffs: vec![c] }
    }

    pub fn zero() -> Self {
        Nonlinearity::Polynomial { coeffs: vec![] }
    }

    /// `lambda * e^t`, the Gelfand nonlinearity.
    pub fn gelfand(lambda: f64) -> Self {
        Nonlinearity::Exponential { scale: lambda, rate: 1.0 }
    }

    pub fn f(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Exponential { scale, rate } => scale * (rate * t).exp(),
            Nonlinearity::Power { coef, shift, exponent } => coef * (shift + t).powf(*exponent),
            Nonlinearity::Polynomial { coeffs } => horner(coeffs, t),
        }
    }

    pub fn f_prime(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Exponential { scale, rate } => scale * rate * (rate * t).exp(),
            Nonlinearity::Power { coef, shift, exponent } => {
                if *exponent == 0.0 {
                    0.0
                } else {
                    coef * exponent * (shift + t).powf(exponent - 1.0)
                }
            }
            Nonlinearity::Polynomial { coeffs } => {
                let d: Vec<f64> = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| k as f64 * c)
                    .collect();
                horner(&d, t)
            }
        }
    }

    /// Antiderivative normalized by `F(0) = 0`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Exponential { scale, rate } => {
                if *rate == 0.0 {
                    scale * t
                } else {
                    scale * (rate * t).exp_m1() / rate
                }
            }
            Nonlinearity::Power { coef, shift, exponent } => {
                let q = exponent + 1.0;
                if q == 0.0 {
                    coef * ((shift + t) / shift).ln()
                } else {
                    coef * ((shift + t).powf(q) - shift.powf(q)) / q
                }
            }
            Nonlinearity::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, c) in coeffs.iter().enumerate().rev() {
                    acc = acc * t + c / (k as f64 + 1.0);
                }
                acc * t
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Nonlinearity::Exponential { scale, .. } => *scale == 0.0,
            Nonlinearity::Power { coef, .. } => *coef == 0.0,
            Nonlinearity::Polynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0),
        }
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}
