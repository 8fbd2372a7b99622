//! Singular communication weight `psi(r) = |r|^-beta` and its primitives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The weak-singular kernel family, `0 < beta < 1`.
///
/// Besides the weight itself this carries its odd antiderivative `Psi` (the interaction of the
/// first-order system) and `K`, the even antiderivative of `Psi` that plays the role of the
/// interaction potential in the free energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct CommunicationKernel {
    beta: f64,
    one_minus_beta: f64,
    potential_norm: f64,
    half: bool,
}

impl CommunicationKernel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must lie in (0,1), got {beta}"
            )));
        }
        Ok(Self {
            beta,
            one_minus_beta: 1.0 - beta,
            potential_norm: 1.0 / ((2.0 - beta) * (1.0 - beta)),
            half: beta == 0.5,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `psi(r) = |r|^-beta`; `+inf` at the origin.
    #[inline]
    pub fn psi(&self, r: f64) -> f64 {
        let a = r.abs();
        if a == 0.0 {
            f64::INFINITY
        } else if self.half {
            1.0 / a.sqrt()
        } else {
            a.powf(-self.beta)
        }
    }

    /// `Psi(x) = sgn(x) |x|^(1-beta) / (1-beta)`.
    #[inline]
    pub fn psi_antideriv(&self, x: f64) -> f64 {
        let a = x.abs();
        let mag = if self.half {
            2.0 * a.sqrt()
        } else {
            a.powf(self.one_minus_beta) / self.one_minus_beta
        };
        if x < 0.0 {
            -mag
        } else {
            mag
        }
    }

    /// `K(x) = |x|^(2-beta) / ((2-beta)(1-beta))`.
    #[inline]
    pub fn potential(&self, x: f64) -> f64 {
        let a = x.abs();
        if self.half {
            a * a.sqrt() * self.potential_norm
        } else {
            a.powf(2.0 - self.beta) * self.potential_norm
        }
    }

    /// Inverse of `Psi`, used for the diameter bound `Psi^-1(D_omega)`.
    pub fn psi_antideriv_inv(&self, y: f64) -> f64 {
        let a = y.abs() * self.one_minus_beta;
        let mag = if self.half {
            a * a
        } else {
            a.powf(1.0 / self.one_minus_beta)
        };
        if y < 0.0 {
            -mag
        } else {
            mag
        }
    }
}

impl TryFrom<f64> for CommunicationKernel {
    type Error = Error;

    fn try_from(beta: f64) -> Result<Self> {
        Self::new(beta)
    }
}

impl From<CommunicationKernel> for f64 {
    fn from(k: CommunicationKernel) -> f64 {
        k.beta
    }
}

/// Free-function forms of the kernel evaluators.
pub fn psi_eval(kernel: &CommunicationKernel, r: f64) -> f64 {
    kernel.psi(r)
}

pub fn psi_antideriv(kernel: &CommunicationKernel, x: f64) -> f64 {
    kernel.psi_antideriv(x)
}

pub fn psi_potential(kernel: &CommunicationKernel, x: f64) -> f64 {
    kernel.potential(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn k(beta: f64) -> CommunicationKernel {
        CommunicationKernel::new(beta).unwrap()
    }

    #[test]
    fn rejects_out_of_range_beta() {
        for beta in [0.0, 1.0, 1.5, -0.2, f64::NAN] {
            assert!(CommunicationKernel::new(beta).is_err(), "beta = {beta}");
        }
    }

    #[test]
    fn psi_values() {
        assert_eq!(k(0.5).psi(4.0), 0.5);
        assert_eq!(k(0.5).psi(1.0), 1.0);
        assert_eq!(k(0.3).psi(1.0), 1.0);
        // 16^(-1/4) = 1/2 exactly
        assert_relative_eq!(k(0.25).psi(16.0), 0.5, max_relative = 1e-15);
        assert!(k(0.5).psi(0.0).is_infinite());
    }

    #[test]
    fn antiderivative_values() {
        assert_eq!(k(0.5).psi_antideriv(1.0), 2.0);
        assert_eq!(k(0.5).psi_antideriv(-4.0), -4.0);
        for beta in [0.1, 0.5, 0.9] {
            assert_eq!(k(beta).psi_antideriv(0.0), 0.0);
            assert_eq!(k(beta).potential(0.0), 0.0);
        }
        assert_relative_eq!(k(0.3).psi_antideriv(1.0), 1.0 / 0.7, max_relative = 1e-15);
    }

    #[test]
    fn potential_values() {
        assert_relative_eq!(k(0.5).potential(1.0), 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(k(0.5).potential(-1.0), 4.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn inverse_two_body_constant() {
        // Psi(1) = 2 for beta = 1/2, so Psi^-1(2) = 1.
        assert_eq!(k(0.5).psi_antideriv_inv(2.0), 1.0);
        let kk = k(0.37);
        for y in [-3.0, -0.1, 0.0, 0.4, 7.5] {
            assert_relative_eq!(
                kk.psi_antideriv(kk.psi_antideriv_inv(y)),
                y,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn half_fast_path_matches_general_power() {
        let kk = k(0.5);
        for x in [1e-6, 0.3, 1.0, 2.5, 40.0] {
            assert_relative_eq!(kk.psi(x), x.powf(-0.5), max_relative = 1e-14);
            assert_relative_eq!(kk.psi_antideriv(x), x.powf(0.5) / 0.5, max_relative = 1e-14);
            assert_relative_eq!(kk.potential(x), x.powf(1.5) / 0.75, max_relative = 1e-14);
        }
    }

    #[test]
    fn finite_difference_derivatives() {
        let h = 1e-5;
        for beta in [0.1, 0.5, 0.9] {
            let kk = k(beta);
            for &x in &[-2.0, -0.7, 0.4, 1.0, 3.0] {
                let dk = (kk.potential(x + h) - kk.potential(x - h)) / (2.0 * h);
                assert_relative_eq!(dk, kk.psi_antideriv(x), max_relative = 1e-8);
                let dpsi = (kk.psi_antideriv(x + h) - kk.psi_antideriv(x - h)) / (2.0 * h);
                assert_relative_eq!(dpsi, kk.psi(x), max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn monotone_on_grid() {
        for beta in [0.1, 0.5, 0.9] {
            let kk = k(beta);
            let grid: Vec<f64> = (-400..=400).map(|i| i as f64 * 0.01).collect();
            for w in grid.windows(2) {
                assert!(kk.psi_antideriv(w[0]) < kk.psi_antideriv(w[1]));
                if w[0] > 0.0 {
                    assert!(kk.psi(w[0]) > kk.psi(w[1]));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn antiderivative_is_odd_and_potential_even(beta in 0.01f64..0.99, x in -50.0f64..50.0) {
            let kk = k(beta);
            prop_assert_eq!(kk.psi_antideriv(-x), -kk.psi_antideriv(x));
            prop_assert_eq!(kk.potential(-x), kk.potential(x));
            prop_assert!(kk.potential(x) >= 0.0);
            if x != 0.0 {
                prop_assert!(kk.psi(x) > 0.0);
            }
        }
    }
}
