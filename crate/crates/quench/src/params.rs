//! Problem parameters for the quenching energy
//! `J(v) = ∫ |Dv|^p / p + kappa * mu * (v+)^gamma`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("p must satisfy p > 1, got {0}")]
    InvalidP(f64),
    #[error("gamma must lie in (0, 1), got {0}")]
    InvalidGamma(f64),
    #[error("kappa must be nonnegative and finite, got {0}")]
    InvalidKappa(f64),
    #[error("mu must lie in (0, 1], got {0}")]
    InvalidMu(f64),
}

/// Exponents and weights of the energy. `alpha` and `lambda` are derived,
/// never stored, so the struct cannot go out of sync.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub p: f64,
    pub gamma: f64,
    /// Multiplier on the potential term (default 1).
    pub kappa: f64,
    /// Quench weight on the potential term, in (0, 1] (default 1).
    pub mu: f64,
}

impl Params {
    pub fn new(p: f64, gamma: f64) -> Result<Self, ParamError> {
        Self::weighted(p, gamma, 1.0, 1.0)
    }

    pub fn weighted(p: f64, gamma: f64, kappa: f64, mu: f64) -> Result<Self, ParamError> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(ParamError::InvalidP(p));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(ParamError::InvalidGamma(gamma));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(ParamError::InvalidKappa(kappa));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(ParamError::InvalidMu(mu));
        }
        let params = Self { p, gamma, kappa, mu };
        debug_assert!(params.exponent_identity_gap() < 1e-12);
        Ok(params)
    }

    /// Growth exponent `alpha = p / (p - gamma)`; dead-core profiles grow
    /// like `d^alpha` off the free boundary. Always > 1 here.
    pub fn alpha(&self) -> f64 {
        self.p / (self.p - self.gamma)
    }

    /// Auxiliary exponent `lambda = (p - gamma) / (p - 1)`; `u^lambda` is the
    /// transform with a strictly positive p-Laplacian on the positivity set.
    /// Always > 1 for gamma < 1.
    pub fn lambda(&self) -> f64 {
        (self.p - self.gamma) / (self.p - 1.0)
    }

    /// Combined coefficient of the potential term.
    pub fn potential_coeff(&self) -> f64 {
        self.kappa * self.mu
    }

    /// `true` on the degenerate side p >= 2 where the quantitative estimates
    /// are established; p in (1, 2) is accepted for experiments only.
    pub fn is_degenerate_range(&self) -> bool {
        self.p >= 2.0
    }

    /// Residual of `(alpha - 1)(p - 1) - 1 = alpha (gamma - 1)`, the exponent
    /// bookkeeping behind the exact profile. Must vanish to 1e-12.
    pub fn exponent_identity_gap(&self) -> f64 {
        let lhs = self.gamma * (self.p - 1.0) / (self.p - self.gamma) - 1.0;
        let rhs = self.p * (self.gamma - 1.0) / (self.p - self.gamma);
        (lhs - rhs).abs()
    }

    /// Flatness threshold `delta* = (p / (c_grad (p-1)))^(1/p)` for a gradient
    /// bound constant `c_grad`. The equivalent closed form
    /// `(gamma alpha / (c_grad (alpha-1)(p-1)))^(1/p)` is checked in tests.
    pub fn delta_star(&self, c_grad: f64) -> f64 {
        (self.p / (c_grad * (self.p - 1.0))).powf(1.0 / self.p)
    }

    /// Alternative closed form of `delta_star`; agrees with [`Self::delta_star`]
    /// to 1e-12 for any positive constant.
    pub fn delta_star_alt(&self, c_grad: f64) -> f64 {
        let a = self.alpha();
        (self.gamma * a / (c_grad * (a - 1.0) * (self.p - 1.0))).powf(1.0 / self.p)
    }
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        // alpha > 1 and lambda > 1 on the whole admissible range.
        #[test]
        fn alpha_and_lambda_exceed_one(p in 1.0001f64..16.0, gamma in 0.0001f64..0.9999) {
            let prm = Params::new(p, gamma).unwrap();
            prop_assert!(prm.alpha() > 1.0);
            prop_assert!(prm.lambda() > 1.0);
            prop_assert!(prm.exponent_identity_gap() < 1e-12);
        }
    }
}
