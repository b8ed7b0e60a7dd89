//! Synthesis of the frequency-domain data matrix.
//!
//! Born and start-stop approximations: the response at sensor `n` and
//! frequency `w` is `s(w) k(w)^2 sum_j rho_j G(w, y_j, x_n)^2 exp(2 i w T_n)`
//! plus additive noise. Exact sensor-to-scatterer distances are used here;
//! the imaging filters use the paraxial distance.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::medium::TravelTimeRealization;
use crate::rng::{self, RealizationKey, StreamTag};
use crate::scene::{ApertureGeometry, FrequencyGrid, PhysicalParams, Point, Reflectivity};
use crate::{Error, Result};

/// Gaussian pulse spectrum `exp(-(w - w_o)^2 / (2 B^2))`.
pub fn pulse_spectrum(omega: f64, p: &PhysicalParams) -> f64 {
    let d = omega - p.omega_o;
    (-d * d / (2.0 * p.bandwidth * p.bandwidth)).exp()
}

/// Far-field 2-D Green's function of the reference medium.
pub fn green_homogeneous(omega: f64, x: Point, y: Point, p: &PhysicalParams) -> Result<Complex64> {
    let r = x.dist(&y);
    if r == 0.0 {
        return Err(Error::Domain("Green's function evaluated at coincident points".into()));
    }
    let k = p.wavenumber(omega);
    let modulus = 1.0 / (2f64.powf(1.5) * (PI * k * r).sqrt());
    Ok(Complex64::from_polar(modulus, k * r + FRAC_PI_4))
}

/// Green's function with the random travel-time perturbation `t`.
pub fn green_random(omega: f64, x: Point, y: Point, t: f64, p: &PhysicalParams) -> Result<Complex64> {
    Ok(green_homogeneous(omega, x, y, p)? * Complex64::from_polar(1.0, omega * t))
}

/// Additive noise model: per-entry complex Gaussian with
/// `E|W|^2 = sigma_W^2 / dw`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_w: f64,
    pub key: RealizationKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub medium: Option<RealizationKey>,
    pub noise: Option<RealizationKey>,
}

/// Data matrix `R(w_m, x_n)`, frequency-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub values: Vec<Complex64>,
    pub freqs: FrequencyGrid,
    pub aperture: ApertureGeometry,
    pub provenance: Provenance,
}

impl DataMatrix {
    pub fn zeros(freqs: FrequencyGrid, aperture: ApertureGeometry) -> Self {
        let n = freqs.len() * aperture.len();
        Self {
            values: vec![Complex64::new(0.0, 0.0); n],
            freqs,
            aperture,
            provenance: Provenance::default(),
        }
    }

    pub fn rows(&self) -> usize {
        self.freqs.len()
    }

    pub fn cols(&self) -> usize {
        self.aperture.len()
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.values[m * self.cols() + n]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: Complex64) {
        for v in &mut self.values {
            *v *= s;
        }
    }
}

/// Noise level `sigma_W` whose per-entry standard deviation is `fraction`
/// times the largest noise-free entry.
pub fn sigma_w_for_fraction(clean: &DataMatrix, fraction: f64) -> f64 {
    fraction * clean.max_abs() * clean.freqs.spacing.sqrt()
}

/// Noise-free response of one scatterer set at one sensor and frequency.
fn clean_entry(
    omega: f64,
    sensor: Point,
    scatterers: &[crate::scene::Scatterer],
    t: f64,
    p: &PhysicalParams,
) -> Complex64 {
    let k = p.wavenumber(omega);
    let pulse = pulse_spectrum(omega, p);
    let mut acc = Complex64::new(0.0, 0.0);
    for s in scatterers {
        let r = sensor.dist(&s.position);
        // G^2 = exp(2ikr + i pi/2) / (8 pi k r)
        acc += Complex64::from_polar(s.amplitude / (8.0 * PI * k * r), 2.0 * k * r + 2.0 * FRAC_PI_4);
    }
    acc * Complex64::from_polar(pulse * k * k, 2.0 * omega * t)
}

/// Synthesizes the data matrix for one medium realization and optional noise.
pub fn synthesize_data(
    p: &PhysicalParams,
    refl: &Reflectivity,
    freqs: &FrequencyGrid,
    aperture: &ApertureGeometry,
    travel: &TravelTimeRealization,
    noise: Option<NoiseSpec>,
) -> Result<DataMatrix> {
    if travel.values.len() != aperture.len() {
        return Err(Error::Config(format!(
            "travel-time realization has {} entries for {} sensors",
            travel.values.len(),
            aperture.len()
        )));
    }
    for s in &refl.scatterers {
        if s.position.dist(&Point::new(aperture.range, s.position.perp)) == 0.0 {
            return Err(Error::Domain("scatterer placed on the aperture".into()));
        }
    }
    let scatterers = refl.canonical();
    let cols = aperture.len();
    let rows = freqs.len();
    // column-wise so each noise lane is one sensor
    let columns: Vec<Vec<Complex64>> = (0..cols)
        .into_par_iter()
        .map(|n| {
            let sensor = aperture.sensor(n);
            let t = travel.values[n];
            let mut col: Vec<Complex64> = freqs
                .omegas
                .iter()
                .map(|&w| clean_entry(w, sensor, &scatterers, t, p))
                .collect();
            if let Some(spec) = noise {
                if spec.sigma_w > 0.0 {
                    let std = spec.sigma_w / (2.0 * freqs.spacing).sqrt();
                    let mut rng = rng::stream(spec.key, StreamTag::Noise, n as u64);
                    for v in &mut col {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        *v += Complex64::new(std * re, std * im);
                    }
                }
            }
            col
        })
        .collect();
    let mut values = vec![Complex64::new(0.0, 0.0); rows * cols];
    for (n, col) in columns.into_iter().enumerate() {
        for (m, v) in col.into_iter().enumerate() {
            values[m * cols + n] = v;
        }
    }
    Ok(DataMatrix {
        values,
        freqs: freqs.clone(),
        aperture: aperture.clone(),
        provenance: Provenance {
            medium: travel.key,
            noise: noise.map(|s| s.key),
        },
    })
}
