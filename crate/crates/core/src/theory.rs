//! Closed-form predictions for point-scatterer means, kernels,
//! stability and noise floors. All amplitudes are up to one global constant.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::imaging::WindowParams;
use crate::scene::{DerivedScales, PhysicalParams, Point};

fn harmonic(terms: &[Option<f64>]) -> f64 {
    let s: f64 = terms.iter().flatten().map(|t| 1.0 / (t * t)).sum();
    1.0 / s.sqrt()
}

/// Effective aperture, bandwidth and CINT resolution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveParams {
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub x_tilde: f64,
    pub omega_tilde: f64,
}

impl EffectiveParams {
    /// Without a window the window terms are dropped.
    pub fn new(p: &PhysicalParams, d: &DerivedScales, w: Option<&WindowParams>) -> Self {
        let (xd, od) = (d.decoherence_length, d.decoherence_frequency);
        Self {
            a_tilde: harmonic(&[Some(p.aperture), xd]),
            b_tilde: harmonic(&[Some(p.bandwidth), od]),
            x_tilde: harmonic(&[xd, w.map(|w| w.x), Some(p.aperture)]),
            omega_tilde: harmonic(&[od, w.map(|w| w.omega), Some(p.bandwidth)]),
        }
    }

    /// Mean SAR peak reduction relative to the homogeneous medium.
    pub fn sar_peak_factor(&self, p: &PhysicalParams) -> f64 {
        (self.a_tilde / p.aperture).powi(2) * (self.b_tilde / p.bandwidth).powi(2)
    }
}

/// SAR point-spread function with aperture `a` and bandwidth `b`.
pub fn sar_kernel(y: Point, a: f64, b: f64, p: &PhysicalParams) -> Complex64 {
    let ko = p.wavenumber(p.omega_o);
    let sx = p.range / (ko * a);
    let sr = p.c / b;
    let amp = PI * a * b * (-(y.perp / sx).powi(2) - (y.par / sr).powi(2)).exp();
    Complex64::from_polar(amp, -2.0 * ko * y.par)
}

/// Center kernel (real) and offset kernel (complex) of the two-point CINT mean.
pub fn cint_kernels(y: Point, eff: &EffectiveParams, p: &PhysicalParams) -> (f64, Complex64) {
    let ko = p.wavenumber(p.omega_o);
    let sx1 = p.range / (ko * eff.x_tilde);
    let sr1 = p.c / eff.omega_tilde;
    let k1 = PI * eff.x_tilde * eff.omega_tilde * (-2.0 * (y.perp / sx1).powi(2) - 2.0 * (y.par / sr1).powi(2)).exp();
    let sx2 = p.cross_range_cell();
    let sr2 = p.range_cell();
    let a2 = PI * p.aperture * p.bandwidth
        * (-(y.perp / sx2).powi(2) / 2.0 - (y.par / sr2).powi(2) / 2.0).exp();
    (k1, Complex64::from_polar(a2, -2.0 * ko * y.par))
}

/// Predicted single-point behaviour at one search point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointPrediction {
    pub sar_mean: f64,
    pub cint_mean: f64,
    /// SAR speckle: standard deviation equals the mean.
    pub sar_variation: f64,
    /// Scale of the CINT coefficient of variation; the prefactor is unknown.
    pub cint_variation_scale: f64,
}

pub fn predicted_point_means(
    y: Point,
    scatterer: Point,
    amplitude: f64,
    eff: &EffectiveParams,
    p: &PhysicalParams,
    d: &DerivedScales,
    w: &WindowParams,
) -> PointPrediction {
    let rel = Point::new(y.par - scatterer.par, y.perp - scatterer.perp);
    let sar = sar_kernel(rel, eff.a_tilde, eff.b_tilde, p).norm_sqr() * amplitude * amplitude;
    let (k1, _) = cint_kernels(rel, eff, p);
    let cint = PI * p.aperture * p.bandwidth * amplitude * amplitude * k1;
    let ratio = |a: f64, b: Option<f64>| b.map_or(0.0, |b| (a / b).powi(2));
    PointPrediction {
        sar_mean: sar,
        cint_mean: cint,
        sar_variation: if d.tau > 0.0 { 1.0 } else { 0.0 },
        cint_variation_scale: (ratio(w.x, d.decoherence_length) + ratio(w.omega, d.decoherence_frequency)).sqrt(),
    }
}

/// e^{-2} half-widths of the SAR image, `(range, cross-range)`.
pub fn sar_widths(eff: &EffectiveParams, p: &PhysicalParams) -> (f64, f64) {
    let ko = p.wavenumber(p.omega_o);
    (p.c / eff.b_tilde, p.range / (ko * eff.a_tilde))
}

/// e^{-2} half-widths of the CINT image, `(range, cross-range)`.
pub fn cint_widths(eff: &EffectiveParams, p: &PhysicalParams) -> (f64, f64) {
    let ko = p.wavenumber(p.omega_o);
    (p.c / eff.omega_tilde, p.range / (ko * eff.x_tilde))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NoiseMode {
    Sar,
    Cint,
    Hcint,
}

/// Additive-noise speckle predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseFloor {
    pub mode: NoiseMode,
    /// Uniform mean of the speckle (SAR, CINT) or of the HCINT spectrum peak.
    pub mean: f64,
    /// Quoted speckle sizes, `(range, cross-range)`.
    pub speckle_size: (f64, f64),
    /// e^{-1} radii of the intensity covariance, `(range, cross-range)`.
    pub covariance_radius: (f64, f64),
    /// Std of the HCINT noise envelope, `(range, cross-range)` wavenumbers.
    pub envelope_std: (f64, f64),
}

impl NoiseFloor {
    /// HCINT noise-peak envelope, unit at the origin.
    pub fn envelope(&self, kpar: f64, kperp: f64) -> f64 {
        (-(kpar / self.envelope_std.0).powi(2) / 2.0 - (kperp / self.envelope_std.1).powi(2) / 2.0).exp()
    }
}

pub fn noise_mean(p: &PhysicalParams) -> f64 {
    let ko = p.wavenumber(p.omega_o);
    p.sigma_w * p.sigma_w * p.aperture * p.bandwidth
        / (2f64.powf(8.5) * PI.powi(3) * ko * ko * p.range * p.range)
}

/// `area` is the imaging-region area, used only for the HCINT peak.
pub fn noise_floor(p: &PhysicalParams, area: f64, mode: NoiseMode) -> NoiseFloor {
    let ko = p.wavenumber(p.omega_o);
    let lambda = 2.0 * PI / ko;
    let cw = noise_mean(p);
    let mean = match mode {
        NoiseMode::Sar | NoiseMode::Cint => cw,
        NoiseMode::Hcint => 2f64.sqrt() * PI * cw * area * p.c * p.range / (p.aperture * ko * p.bandwidth),
    };
    let ak = p.aperture * ko / p.range;
    NoiseFloor {
        mode,
        mean,
        speckle_size: (p.range_cell(), lambda * p.range / p.aperture),
        covariance_radius: (p.range_cell() / 2f64.sqrt(), p.cross_range_cell()),
        envelope_std: (2f64.sqrt() * p.bandwidth / p.c, ak),
    }
}

/// Noiseless HCINT spectrum envelope, unit at the origin.
pub fn hcint_envelope(kpar: f64, kperp: f64, p: &PhysicalParams) -> f64 {
    let ak = p.aperture * p.wavenumber(p.omega_o) / p.range;
    let bc = p.bandwidth / p.c;
    (-(kperp / ak).powi(2) / 2.0 - (kpar / bc).powi(2) / 2.0).exp()
}
