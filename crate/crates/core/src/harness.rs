//! Run configuration, Monte Carlo ensembles with streaming moments, image
//! measurements and the end-to-end recipes behind `reproduce-figure`.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forward::{sigma_w_for_fraction, synthesize_data, DataMatrix, NoiseSpec};
use crate::imaging::{
    cint_image, hcint_field, hcint_spectrum, sar_image, two_point_cint, Axis, Backprojector, Grid2, HcintField,
    ImageGrid, SpectrumGrid, TwoPointField, WindowParams,
};
use crate::medium::{MediumStats, TravelTimeRealization, TravelTimeSampler};
use crate::rng::RealizationKey;
use crate::scene::{
    default_frequency_spacing, derive_scales, validate_regime, ApertureGeometry, DerivedScales, FrequencyGrid,
    PhysicalParams, Point, Reflectivity, RegimeWarning, Scatterer,
};
use crate::spectral::{
    deflate_central_peak, detect_peaks, error_reduction_retrieve, match_configuration, modulus_estimate,
    ConfigurationMatch, ModulusTarget, Peak, RetrievalResult,
};
use crate::{Error, Result};

/// Realizations per work unit. Fixed so that the merge order, and hence the
/// floating-point result, does not depend on the size of the thread pool.
const CHUNK: usize = 4;

/// Coefficients of variation are reported where the mean exceeds this
/// fraction of its maximum.
pub const CV_FLOOR: f64 = 1e-3;

/// Relative threshold for peak detection in reconstructed reflectivities.
pub const PEAK_THRESHOLD: f64 = 0.2;

pub const DEFAULT_REALIZATIONS: usize = 200;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

fn one() -> f64 {
    1.0
}

fn default_q() -> f64 {
    3.0
}

/// Physical section of the configuration. The carrier is given either as
/// `omega_o` or as `lambda_o`, the bandwidth either as `B` or as
/// `bandwidth_ratio = B / omega_o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_o: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_o: Option<f64>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_ratio: Option<f64>,
    #[serde(rename = "L")]
    pub range: f64,
    #[serde(rename = "a")]
    pub aperture: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
    #[serde(default)]
    pub sigma: f64,
    pub ell_c: f64,
    #[serde(default = "one")]
    pub span_factor: f64,
}

impl PhysicalConfig {
    pub fn resolve(&self) -> Result<PhysicalParams> {
        let omega_o = match (self.omega_o, self.lambda_o) {
            (Some(w), None) => w,
            (None, Some(l)) => 2.0 * PI * self.c / l,
            (None, None) => return Err(Error::Config("physical: one of omega_o, lambda_o is required".into())),
            _ => return Err(Error::Config("physical: give omega_o or lambda_o, not both".into())),
        };
        let bandwidth = match (self.bandwidth, self.bandwidth_ratio) {
            (Some(b), None) => b,
            (None, Some(r)) => r * omega_o,
            (None, None) => return Err(Error::Config("physical: one of B, bandwidth_ratio is required".into())),
            _ => return Err(Error::Config("physical: give B or bandwidth_ratio, not both".into())),
        };
        let p = PhysicalParams {
            c: self.c,
            omega_o,
            bandwidth,
            range: self.range,
            aperture: self.aperture,
            intervals: self.intervals,
            sigma: self.sigma,
            ell_c: self.ell_c,
            sigma_w: 0.0,
            span_factor: self.span_factor,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<&PhysicalParams> for PhysicalConfig {
    fn from(p: &PhysicalParams) -> Self {
        Self {
            c: p.c,
            omega_o: Some(p.omega_o),
            lambda_o: None,
            bandwidth: Some(p.bandwidth),
            bandwidth_ratio: None,
            range: p.range,
            aperture: p.aperture,
            intervals: p.intervals,
            sigma: p.sigma,
            ell_c: p.ell_c,
            span_factor: p.span_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    #[serde(default)]
    pub center: f64,
    pub step: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn axis(&self) -> Result<Axis> {
        if !(self.step > 0.0 && self.step.is_finite()) || self.count == 0 {
            return Err(Error::Config(format!("axis needs a positive step and count, got {self:?}")));
        }
        Ok(Axis::centered(self.center, self.step, self.count))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub par: AxisSpec,
    pub perp: AxisSpec,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid2> {
        Ok(Grid2::new(self.par.axis()?, self.perp.axis()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    /// Frequency grid half-width in units of `B`.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Frequency spacing; defaults to a quarter of the smallest frequency scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_spacing: Option<f64>,
    /// Search grid for SAR and CINT images.
    pub image: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<GridSpec>,
    /// FFT size `(range, cross-range)` of the HCINT spectrum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fft: Option<[usize; 2]>,
}

/// Noise level, either relative to the largest noise-free return or absolute.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub fraction: f64,
    #[serde(rename = "sigma_W", default, skip_serializing_if = "Option::is_none")]
    pub sigma_w: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsConfig {
    #[serde(default)]
    pub seed: u64,
    /// Seed of the random initial phases of the phase retrieval.
    #[serde(default)]
    pub init_seed: u64,
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub physical: PhysicalConfig,
    pub reflectivity: Reflectivity,
    pub grids: GridsConfig,
    /// Defaults to `X = a/5`, `Omega = B/5`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<WindowParams>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub seeds: SeedsConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Physical regime of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub omega_o_tau: f64,
    pub x_over_xd: Option<f64>,
    pub omega_over_od: Option<f64>,
}

/// A validated configuration with its grids and medium sampler.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Config,
    pub params: PhysicalParams,
    pub scales: DerivedScales,
    pub window: WindowParams,
    pub freqs: FrequencyGrid,
    pub aperture: ApertureGeometry,
    pub image_grid: Grid2,
    pub warnings: Vec<RegimeWarning>,
    sampler: TravelTimeSampler,
}

impl Scenario {
    pub fn new(config: Config) -> Result<Self> {
        let mut params = config.physical.resolve()?;
        let scales = derive_scales(&params);
        let window = config
            .windows
            .unwrap_or_else(|| WindowParams::new(params.aperture / 5.0, params.bandwidth / 5.0));
        window.validate()?;
        if config.noise.fraction < 0.0 || !config.noise.fraction.is_finite() {
            return Err(Error::Config("noise fraction must be nonnegative".into()));
        }
        if let Some(s) = config.noise.sigma_w {
            if config.noise.fraction > 0.0 {
                return Err(Error::Config("give noise fraction or sigma_W, not both".into()));
            }
            params.sigma_w = s;
            params.validate()?;
        }
        let refl = Reflectivity::new(config.reflectivity.scatterers.clone())?;
        if params.sigma > 0.0 {
            refl.check_support(params.ell_c)?;
        }
        let spacing = config
            .grids
            .frequency_spacing
            .unwrap_or_else(|| default_frequency_spacing(&params, &scales, Some(window.omega)));
        let freqs = FrequencyGrid::with_max_spacing(&params, config.grids.q, spacing)?;
        let aperture = ApertureGeometry::new(&params);
        let image_grid = config.grids.image.grid()?;
        let sampler = TravelTimeSampler::new(&aperture, &MediumStats::new(&params))?;
        let warnings = validate_regime(&params, &scales);
        Ok(Self { config, params, scales, window, freqs, aperture, image_grid, warnings, sampler })
    }

    pub fn reflectivity(&self) -> &Reflectivity {
        &self.config.reflectivity
    }

    pub fn key(&self, realization: u64) -> RealizationKey {
        RealizationKey::new(self.config.seeds.seed, realization)
    }

    pub fn travel_times(&self, realization: u64) -> TravelTimeRealization {
        if self.params.sigma > 0.0 {
            self.sampler.sample(self.key(realization))
        } else {
            TravelTimeRealization::zeros(self.aperture.len())
        }
    }

    /// Noise-free data of one realization.
    pub fn clean_data(&self, realization: u64) -> Result<DataMatrix> {
        let tt = self.travel_times(realization);
        synthesize_data(&self.params, self.reflectivity(), &self.freqs, &self.aperture, &tt, None)
    }

    /// Data of one realization, noise included.
    pub fn data(&self, realization: u64) -> Result<DataMatrix> {
        let tt = self.travel_times(realization);
        let clean = synthesize_data(&self.params, self.reflectivity(), &self.freqs, &self.aperture, &tt, None)?;
        let sigma_w = match self.config.noise.sigma_w {
            Some(s) => s,
            None => sigma_w_for_fraction(&clean, self.config.noise.fraction),
        };
        if sigma_w == 0.0 {
            return Ok(clean);
        }
        let noise = NoiseSpec { sigma_w, key: self.key(realization) };
        synthesize_data(&self.params, self.reflectivity(), &self.freqs, &self.aperture, &tt, Some(noise))
    }

    pub fn regime(&self) -> Regime {
        Regime {
            omega_o_tau: self.scales.phase_strength(&self.params),
            x_over_xd: self.scales.decoherence_length.map(|xd| self.window.x / xd),
            omega_over_od: self.scales.decoherence_frequency.map(|od| self.window.omega / od),
        }
    }

    fn grid_or(&self, spec: Option<GridSpec>, name: &str) -> Result<Grid2> {
        spec.ok_or_else(|| Error::Config(format!("grids.{name} is required for HCINT")))?.grid()
    }

    pub fn centers(&self) -> Result<Grid2> {
        self.grid_or(self.config.grids.centers, "centers")
    }

    pub fn offsets(&self) -> Result<Grid2> {
        self.grid_or(self.config.grids.offsets, "offsets")
    }

    pub fn fft_size(&self) -> Result<(usize, usize)> {
        let f = self.config.grids.fft.ok_or_else(|| Error::Config("grids.fft is required for HCINT".into()))?;
        Ok((f[0], f[1]))
    }

    /// Matching cells `(c/B, L/(k_o a))`.
    pub fn resolution_cells(&self) -> (f64, f64) {
        (self.params.range_cell(), self.params.cross_range_cell())
    }
}

/// Streaming per-pixel mean and variance (Welford), mergeable with the
/// pairwise update of Chan et al.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self { count: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.mean.len(), "sample length mismatch");
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        assert_eq!(other.mean.len(), self.mean.len(), "moment length mismatch");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let d = (self.count - 1) as f64;
        self.m2.iter().map(|s| (s / d).max(0.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    Sar,
    Cint,
}

impl std::str::FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sar" => Ok(Functional::Sar),
            "cint" => Ok(Functional::Cint),
            _ => Err(Error::Config(format!("unknown functional {s:?}"))),
        }
    }
}

pub fn form_image(sc: &Scenario, bp: &Backprojector, functional: Functional, grid: &Grid2) -> Result<ImageGrid> {
    match functional {
        Functional::Sar => Ok(sar_image(bp, grid)),
        Functional::Cint => cint_image(bp, grid, &sc.window),
    }
}

/// Empirical per-pixel statistics of an imaging functional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub functional: Functional,
    pub grid: Grid2,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub cv: Vec<Option<f64>>,
    pub realizations: usize,
    pub seed: u64,
    pub regime: Regime,
}

impl EnsembleReport {
    pub fn mean_image(&self) -> ImageGrid {
        ImageGrid { grid: self.grid, values: self.mean.clone() }
    }

    pub fn cv_image(&self) -> ImageGrid {
        ImageGrid { grid: self.grid, values: self.cv.iter().map(|c| c.unwrap_or(0.0)).collect() }
    }

    pub fn peak(&self) -> usize {
        self.mean_image().argmax()
    }

    pub fn peak_cv(&self) -> Option<f64> {
        self.cv[self.peak()]
    }
}

/// Images `n` independent realizations `(seed, 0..n)` on `grid` and
/// accumulates their moments.
pub fn run_monte_carlo_on(sc: &Scenario, functional: Functional, grid: &Grid2, n: usize) -> Result<EnsembleReport> {
    if n < 2 {
        return Err(Error::InvalidParameter("at least two realizations are required".into()));
    }
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let parts: Vec<Result<Moments>> = starts
        .par_iter()
        .map(|&s| {
            let mut m = Moments::new(grid.len());
            for r in s..(s + CHUNK).min(n) {
                let data = sc.data(r as u64)?;
                let bp = Backprojector::new(&data, &sc.params);
                m.push(&form_image(sc, &bp, functional, grid)?.values);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::new(grid.len());
    for part in parts {
        total.merge(&part?);
    }
    let mean = total.mean().to_vec();
    let variance = total.variance();
    let floor = CV_FLOOR * mean.iter().copied().fold(0.0, f64::max);
    let cv = mean
        .iter()
        .zip(&variance)
        .map(|(&m, &v)| (m > floor && m > 0.0).then(|| v.sqrt() / m))
        .collect();
    Ok(EnsembleReport {
        functional,
        grid: *grid,
        mean,
        variance,
        cv,
        realizations: n,
        seed: sc.config.seeds.seed,
        regime: sc.regime(),
    })
}

pub fn run_monte_carlo(sc: &Scenario, functional: Functional, n: usize) -> Result<EnsembleReport> {
    run_monte_carlo_on(sc, functional, &sc.image_grid, n)
}

/// Position of the crossing `v = level` between samples `(x0, v0)` and
/// `(x1, v1)`, interpolating `ln v` linearly.
fn log_crossing(x0: f64, v0: f64, x1: f64, v1: f64, level: f64) -> f64 {
    if v1 <= 0.0 {
        return x0 + (x1 - x0) * (v0 - level) / (v0 - v1);
    }
    let (l0, l1, lt) = (v0.ln(), v1.ln(), level.ln());
    x0 + (x1 - x0) * (l0 - lt) / (l0 - l1)
}

/// Half-width where a sampled profile first drops below `level` times its
/// value at `peak`, averaged over both sides.
pub fn profile_half_width(coords: &[f64], values: &[f64], peak: usize, level: f64) -> Result<f64> {
    let top = values[peak];
    if !(top > 0.0) {
        return Err(Error::Degenerate("profile has no positive peak".into()));
    }
    let thr = level * top;
    let side = |dir: i64| -> Result<f64> {
        let mut i = peak as i64;
        loop {
            let j = i + dir;
            if j < 0 || j >= values.len() as i64 {
                return Err(Error::Degenerate("profile does not decay inside the grid".into()));
            }
            let (a, b) = (i as usize, j as usize);
            if values[b] < thr {
                let x = log_crossing(coords[a], values[a], coords[b], values[b], thr);
                return Ok((x - coords[peak]).abs());
            }
            i = j;
        }
    };
    Ok(0.5 * (side(-1)? + side(1)?))
}

/// Half-widths `(range, cross-range)` of an image at `level` times its
/// maximum, measured along the two grid lines through the maximum.
pub fn half_widths(img: &ImageGrid, level: f64) -> Result<(f64, f64)> {
    let idx = img.argmax();
    let nq = img.grid.perp.count;
    let (i0, j0) = (idx / nq, idx % nq);
    let col: Vec<f64> = (0..img.grid.par.count).map(|i| img.get(i, j0)).collect();
    let row: Vec<f64> = (0..nq).map(|j| img.get(i0, j)).collect();
    Ok((
        profile_half_width(&img.grid.par.coords(), &col, i0, level)?,
        profile_half_width(&img.grid.perp.coords(), &row, j0, level)?,
    ))
}

/// e^{-1} radii `(range, cross-range)` of the normalized intensity
/// autocovariance of statistically homogeneous images, pooled over pixels
/// and images.
pub fn speckle_radii(images: &[ImageGrid]) -> Result<(f64, f64)> {
    let first = images.first().ok_or_else(|| Error::Degenerate("no images".into()))?;
    let grid = first.grid;
    let (np, nq) = (grid.par.count, grid.perp.count);
    let total: usize = images.len() * grid.len();
    let mean = images.iter().flat_map(|im| im.values.iter()).sum::<f64>() / total as f64;
    let var = images.iter().flat_map(|im| im.values.iter()).map(|v| (v - mean).powi(2)).sum::<f64>() / total as f64;
    if !(var > 0.0) {
        return Err(Error::Degenerate("images have no fluctuations".into()));
    }
    let corr = |dp: usize, dq: usize| -> f64 {
        let (mut s, mut c) = (0.0, 0usize);
        for im in images {
            for i in 0..np - dp {
                for j in 0..nq - dq {
                    s += (im.get(i, j) - mean) * (im.get(i + dp, j + dq) - mean);
                    c += 1;
                }
            }
        }
        s / c as f64 / var
    };
    let radius = |n: usize, step: f64, along_par: bool| -> Result<f64> {
        let level = (-1.0f64).exp();
        let mut prev = 1.0;
        for l in 1..n / 2 {
            let v = if along_par { corr(l, 0) } else { corr(0, l) };
            if v < level {
                return Ok(log_crossing((l - 1) as f64 * step, prev, l as f64 * step, v, level));
            }
            prev = v;
        }
        Err(Error::Degenerate("autocovariance does not decay inside the grid".into()))
    };
    Ok((radius(np, grid.par.step, true)?, radius(nq, grid.perp.step, false)?))
}

/// Options of the retrieval stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalOptions {
    pub iterations: usize,
    pub tolerance: f64,
    pub init_seed: u64,
    pub deflate: Option<f64>,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        Self { iterations: DEFAULT_ITERATIONS, tolerance: DEFAULT_TOLERANCE, init_seed: 0, deflate: None }
    }
}

#[derive(Debug, Clone)]
pub struct HcintProducts {
    pub two_point: TwoPointField,
    pub field: HcintField,
}

pub fn hcint_products(sc: &Scenario, bp: &Backprojector) -> Result<HcintProducts> {
    let two_point = two_point_cint(bp, &sc.centers()?, &sc.offsets()?, &sc.window)?;
    let field = hcint_field(&two_point);
    Ok(HcintProducts { two_point, field })
}

/// `|I_HCINT|` over the offsets.
pub fn hcint_magnitude(h: &HcintField) -> ImageGrid {
    ImageGrid { grid: h.offsets, values: h.values.iter().map(|v| v.norm()).collect() }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub spectrum: SpectrumGrid,
    pub target: ModulusTarget,
    pub retrieval: RetrievalResult,
    /// Estimate rolled so that its mass is mid-grid.
    pub estimate: ImageGrid,
    pub peaks: Vec<Peak>,
    /// Against the configured reflectivity, if it is not empty.
    pub matched: Option<ConfigurationMatch>,
}

/// Spectrum, modulus estimate, error reduction and peak matching.
pub fn reconstruct(sc: &Scenario, field: &HcintField, opts: &RetrievalOptions) -> Result<Reconstruction> {
    let field = match opts.deflate {
        Some(f) => deflate_central_peak(field, f)?,
        None => field.clone(),
    };
    let ko = sc.params.wavenumber(sc.params.omega_o);
    let spectrum = hcint_spectrum(&field, sc.fft_size()?, 2.0 * ko)?;
    let target = modulus_estimate(&spectrum, &sc.params)?;
    let key = RealizationKey::new(opts.init_seed, 0);
    let retrieval = error_reduction_retrieve(&target, opts.iterations, opts.tolerance, key)?;
    let estimate = retrieval.centered_estimate();
    let truth: Vec<(f64, f64)> =
        sc.reflectivity().scatterers.iter().map(|s| (s.position.par, s.position.perp)).collect();
    let count = truth.len().max(1);
    let peaks = detect_peaks(&estimate, PEAK_THRESHOLD, count, true);
    let periods = (
        retrieval.par.count as f64 * retrieval.par.step,
        retrieval.perp.count as f64 * retrieval.perp.step,
    );
    let matched = if truth.is_empty() {
        None
    } else {
        match_configuration(&peaks, &truth, sc.resolution_cells(), Some(periods))
    };
    Ok(Reconstruction { spectrum, target, retrieval, estimate, peaks, matched })
}

/// Four identical scatterers in a centrosymmetric zig-zag, spaced by the
/// high-resolution cells `pi c/B` in range and `pi L/(a k_o)` in cross-range.
pub fn four_point_object(p: &PhysicalParams) -> Reflectivity {
    let hr = PI * p.range_cell();
    let hq = PI * p.cross_range_cell();
    let pts = [(3.0, 0.5), (1.0, -0.5), (-1.0, 0.5), (-3.0, -0.5)];
    Reflectivity {
        scatterers: pts
            .iter()
            .map(|&(i, j)| Scatterer { position: Point::new(i * hr, j * hq), amplitude: 1.0 })
            .collect(),
    }
}

fn axis_spec(step: f64, count: usize) -> AxisSpec {
    AxisSpec { center: 0.0, step, count }
}

/// Grids scaled to the resolution cells of `p`: SAR/CINT search grid, HCINT
/// centers and offsets on a common lattice, and the spectrum FFT size.
pub fn standard_grids(p: &PhysicalParams, window: &WindowParams) -> GridsConfig {
    let hr = PI * p.range_cell();
    let hq = PI * p.cross_range_cell();
    let (rc, xc) = (p.range_cell(), p.cross_range_cell());
    GridsConfig {
        q: 3.0,
        frequency_spacing: Some(p.bandwidth.min(window.omega) / 4.0),
        image: GridSpec {
            par: axis_spec(rc / 4.0, 151),
            perp: axis_spec(xc / 4.0, 2 * (8.0 * PI).round() as usize + 1),
        },
        centers: Some(GridSpec { par: axis_spec(hr / 5.0, 55), perp: axis_spec(0.4 * hq, 16) }),
        offsets: Some(GridSpec { par: axis_spec(hr / 5.0, 75), perp: axis_spec(hq / 5.0, 25) }),
        fft: Some([75, 25]),
    }
}

/// Figure-recipe configurations. Figures 2 and 3 use a far-field geometry
/// (`L = 10^4`, `a = 500`), figures 4 and 5 the strong medium `L = 100`,
/// `a = 20`, `sigma = 0.06`, `ell_c = L`, for which `omega_o tau = 6 pi`.
pub fn figure_config(figure: u8, seed: u64) -> Result<Config> {
    let (range, aperture, sigma, noise) = match figure {
        2 | 3 => (1.0e4, 500.0, 0.0, 0.0),
        4 => (100.0, 20.0, 0.06, 0.2),
        5 => (100.0, 20.0, 0.06, 0.4),
        _ => return Err(Error::Config(format!("no recipe for figure {figure}; expected 2, 3, 4 or 5"))),
    };
    let mut p = PhysicalParams::nondimensional(0.2, range, aperture, 60, sigma, range);
    p.span_factor = 4.0;
    let window = WindowParams::new(p.aperture / 5.0, p.bandwidth / 5.0);
    Ok(Config {
        physical: PhysicalConfig::from(&p),
        reflectivity: four_point_object(&p),
        grids: standard_grids(&p, &window),
        windows: Some(window),
        noise: NoiseConfig { fraction: noise, sigma_w: None },
        seeds: SeedsConfig { seed, init_seed: seed },
    })
}

/// Everything a figure recipe emits.
#[derive(Debug, Clone)]
pub struct FigureOutput {
    pub figure: u8,
    pub config: Config,
    /// The reflectivity rasterized onto the search grid.
    pub object: ImageGrid,
    pub sar: Option<ImageGrid>,
    pub cint: Option<ImageGrid>,
    pub hcint: Option<ImageGrid>,
    pub reconstruction: Option<Reconstruction>,
    /// HCINT with a deflated central peak and the corresponding estimate.
    pub modified: Option<(ImageGrid, Reconstruction)>,
}

pub fn rasterize(refl: &Reflectivity, grid: &Grid2) -> ImageGrid {
    let mut values = vec![0.0; grid.len()];
    for s in &refl.scatterers {
        let i = grid.par.nearest(s.position.par);
        let j = grid.perp.nearest(s.position.perp);
        values[grid.index(i, j)] += s.amplitude;
    }
    ImageGrid { grid: *grid, values }
}

/// Runs the recipe of one figure from realization 0 of the configured seed.
pub fn reproduce_figure(figure: u8, seed: u64, deflate: Option<f64>) -> Result<FigureOutput> {
    let config = figure_config(figure, seed)?;
    let sc = Scenario::new(config.clone())?;
    let object = rasterize(sc.reflectivity(), &sc.image_grid);
    let mut out = FigureOutput {
        figure,
        config,
        object,
        sar: None,
        cint: None,
        hcint: None,
        reconstruction: None,
        modified: None,
    };
    if figure == 2 {
        return Ok(out);
    }
    let data = sc.data(0)?;
    let bp = Backprojector::new(&data, &sc.params);
    out.sar = Some(sar_image(&bp, &sc.image_grid));
    out.cint = Some(cint_image(&bp, &sc.image_grid, &sc.window)?);
    let prod = hcint_products(&sc, &bp)?;
    out.hcint = Some(hcint_magnitude(&prod.field));
    let opts = RetrievalOptions { init_seed: seed, ..Default::default() };
    out.reconstruction = Some(reconstruct(&sc, &prod.field, &opts)?);
    let deflate = deflate.or((figure == 5).then_some(0.2));
    if let Some(f) = deflate {
        let modified = deflate_central_peak(&prod.field, f)?;
        let rec = reconstruct(&sc, &modified, &opts)?;
        out.modified = Some((hcint_magnitude(&modified), rec));
    }
    Ok(out)
}

/// Grid centered on the origin with `per_width` samples per width and
/// `reach` widths on each side.
pub fn scaled_grid(widths: (f64, f64), per_width: f64, reach: f64) -> Grid2 {
    let axis = |w: f64| {
        let step = w / per_width;
        Axis::centered(0.0, step, 2 * (reach * per_width).round() as usize + 1)
    };
    Grid2::new(axis(widths.0), axis(widths.1))
}

/// One line of the `theory-check` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub quantity: String,
    pub predicted: f64,
    pub measured: f64,
}

impl CheckRow {
    fn new(quantity: &str, predicted: f64, measured: f64) -> Self {
        Self { quantity: quantity.into(), predicted, measured }
    }
}

/// Single noise-only SAR images `(seed, 0..n)` on `grid`.
pub fn noise_images(sc: &Scenario, grid: &Grid2, n: usize) -> Result<Vec<ImageGrid>> {
    (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let data = sc.data(r)?;
            Ok(sar_image(&Backprojector::new(&data, &sc.params), grid))
        })
        .collect()
}

/// Predicted against measured widths, peak coefficients of variation and
/// noise speckle radii, for a point scatterer at the origin and for
/// noise-only data under the physical parameters of `config`.
pub fn theory_check(config: &Config, n: usize) -> Result<Vec<CheckRow>> {
    let mut point = config.clone();
    point.reflectivity = Reflectivity { scatterers: vec![Scatterer { position: Point::ORIGIN, amplitude: 1.0 }] };
    point.noise = NoiseConfig::default();
    let sc = Scenario::new(point)?;
    let (p, d) = (&sc.params, &sc.scales);
    let sar_eff = crate::theory::EffectiveParams::new(p, d, None);
    let cint_eff = crate::theory::EffectiveParams::new(p, d, Some(&sc.window));
    let sar_w = crate::theory::sar_widths(&sar_eff, p);
    let cint_w = crate::theory::cint_widths(&cint_eff, p);
    let level = (-2.0f64).exp();
    let sar = run_monte_carlo_on(&sc, Functional::Sar, &scaled_grid(sar_w, 6.0, 3.0), n)?;
    let cint = run_monte_carlo_on(&sc, Functional::Cint, &scaled_grid(cint_w, 6.0, 3.0), n)?;
    let (sr, sx) = half_widths(&sar.mean_image(), level)?;
    let (cr, cx) = half_widths(&cint.mean_image(), level)?;
    let pred = crate::theory::predicted_point_means(Point::ORIGIN, Point::ORIGIN, 1.0, &cint_eff, p, d, &sc.window);
    let mut rows = vec![
        CheckRow::new("SAR range half-width", sar_w.0, sr),
        CheckRow::new("SAR cross-range half-width", sar_w.1, sx),
        CheckRow::new("CINT range half-width", cint_w.0, cr),
        CheckRow::new("CINT cross-range half-width", cint_w.1, cx),
        CheckRow::new("SAR peak coefficient of variation", pred.sar_variation, sar.peak_cv().unwrap_or(0.0)),
        CheckRow::new("CINT peak coefficient of variation (order)", pred.cint_variation_scale, cint.peak_cv().unwrap_or(0.0)),
    ];

    let mut noise = config.clone();
    noise.physical.sigma = 0.0;
    noise.reflectivity = Reflectivity::default();
    noise.noise = NoiseConfig { fraction: 0.0, sigma_w: Some(1.0) };
    let sc = Scenario::new(noise)?;
    let floor = crate::theory::noise_floor(&sc.params, 1.0, crate::theory::NoiseMode::Sar);
    let imgs = noise_images(&sc, &scaled_grid(floor.covariance_radius, 3.0, 7.0), n)?;
    let (nr, nx) = speckle_radii(&imgs)?;
    rows.push(CheckRow::new("noise speckle range radius", floor.covariance_radius.0, nr));
    rows.push(CheckRow::new("noise speckle cross-range radius", floor.covariance_radius.1, nx));
    Ok(rows)
}
