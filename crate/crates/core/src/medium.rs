//! Random travel-time model of the medium between aperture and scene.
//!
//! Only the ray-integrated travel-time fluctuations `T_n` are sampled: they
//! form a zero-mean Gaussian vector with covariance
//! `tau^2 C(|x_n - x_n'| / ell_c)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, RealizationKey, StreamTag};
use crate::scene::{derive_scales, ApertureGeometry, PhysicalParams};
use crate::{Error, Result};

/// Ray covariance `C(r) = (1/r) int_0^r exp(-pi h^2) dh = erf(sqrt(pi) r)/(2r)`.
pub fn ray_covariance(r: f64) -> f64 {
    let r = r.abs();
    if r < 1e-6 {
        let r2 = r * r;
        1.0 - std::f64::consts::PI * r2 / 3.0
    } else {
        libm::erf(std::f64::consts::PI.sqrt() * r) / (2.0 * r)
    }
}

/// Second-order statistics of the travel-time fluctuations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumStats {
    pub tau: f64,
    pub ell_c: f64,
}

impl MediumStats {
    pub fn new(p: &PhysicalParams) -> Self {
        Self {
            tau: derive_scales(p).tau,
            ell_c: p.ell_c,
        }
    }

    /// `Cov(T_n, T_n')` for sensors a distance `dx` apart.
    pub fn covariance(&self, dx: f64) -> f64 {
        self.tau * self.tau * ray_covariance(dx / self.ell_c)
    }

    /// `E[exp(2 i w T)]`.
    pub fn moment1(&self, omega: f64) -> f64 {
        (-2.0 * omega * omega * self.tau * self.tau).exp()
    }

    /// `E[exp(2 i w1 T_1 - 2 i w2 T_2)]` for rays a distance `dx` apart.
    pub fn moment2(&self, w1: f64, w2: f64, dx: f64) -> f64 {
        let t2 = self.tau * self.tau;
        let c = ray_covariance(dx / self.ell_c);
        (-2.0 * (w1 - w2).powi(2) * t2 - 4.0 * w1 * w2 * t2 * (1.0 - c)).exp()
    }

    /// `E[exp(2i w1 T_1 - 2i w2 T_2 - 2i w3 T_3 + 2i w4 T_4)]`; `dx[j][k]` is
    /// the distance between rays `j` and `k`.
    pub fn moment4(&self, w: [f64; 4], dx: [[f64; 4]; 4]) -> f64 {
        let c = |j: usize, k: usize| ray_covariance(dx[j][k] / self.ell_c);
        let sum_sq: f64 = w.iter().map(|x| x * x).sum();
        let bracket = sum_sq + 2.0 * w[0] * w[3] * c(0, 3) + 2.0 * w[1] * w[2] * c(1, 2)
            - 2.0 * w[0] * w[1] * c(0, 1)
            - 2.0 * w[0] * w[2] * c(0, 2)
            - 2.0 * w[1] * w[3] * c(1, 3)
            - 2.0 * w[2] * w[3] * c(2, 3);
        (-2.0 * self.tau * self.tau * bracket).exp()
    }

    /// Quadratic expansion of [`moment2`](Self::moment2) in terms of the
    /// decoherence length and frequency. Returns 1 in a homogeneous medium.
    pub fn moment2_gaussian(&self, p: &PhysicalParams, w1: f64, w2: f64, dx: f64) -> f64 {
        let d = derive_scales(p);
        match (d.decoherence_length, d.decoherence_frequency) {
            (Some(xd), Some(od)) => {
                (-dx * dx / (2.0 * xd * xd) - (w1 - w2).powi(2) / (2.0 * od * od)).exp()
            }
            _ => 1.0,
        }
    }
}

/// One draw of the travel-time fluctuations, one value per sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeRealization {
    pub values: Vec<f64>,
    pub key: Option<RealizationKey>,
}

impl TravelTimeRealization {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            key: None,
        }
    }
}

/// Draws travel-time vectors with the ray covariance. The covariance is
/// factored once with a symmetric eigendecomposition, negative eigenvalues
/// clipped to zero.
#[derive(Debug, Clone)]
pub struct TravelTimeSampler {
    factor: Option<DMatrix<f64>>,
    len: usize,
}

impl TravelTimeSampler {
    pub fn new(geom: &ApertureGeometry, stats: &MediumStats) -> Result<Self> {
        let len = geom.len();
        if stats.tau == 0.0 {
            return Ok(Self { factor: None, len });
        }
        let cov = DMatrix::from_fn(len, len, |i, j| {
            stats.covariance((geom.positions[i] - geom.positions[j]).abs())
        });
        let eig = SymmetricEigen::new(cov);
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        if sqrt_vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal("travel-time covariance factorization failed".into()));
        }
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
        Ok(Self {
            factor: Some(factor),
            len,
        })
    }

    pub fn sample(&self, key: RealizationKey) -> TravelTimeRealization {
        let Some(factor) = &self.factor else {
            return TravelTimeRealization {
                values: vec![0.0; self.len],
                key: Some(key),
            };
        };
        let mut rng = rng::stream(key, StreamTag::Medium, 0);
        let z = DVector::from_fn(self.len, |_, _| StandardNormal.sample(&mut rng));
        let t = factor * z;
        TravelTimeRealization {
            values: t.iter().copied().collect(),
            key: Some(key),
        }
    }
}

/// Convenience wrapper building the sampler on the fly.
pub fn sample_travel_times(
    geom: &ApertureGeometry,
    stats: &MediumStats,
    key: RealizationKey,
) -> Result<TravelTimeRealization> {
    Ok(TravelTimeSampler::new(geom, stats)?.sample(key))
}
