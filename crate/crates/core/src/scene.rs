//! Scene description: physical parameters, derived scales, the synthetic
//! aperture and the frequency sampling.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Threshold used to operationalize "much smaller than" in regime checks.
pub const MUCH_SMALLER: f64 = 0.2;

/// A point in the imaging plane: range coordinate (along the main
/// propagation direction) and cross-range coordinate (along the aperture).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub par: f64,
    pub perp: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { par: 0.0, perp: 0.0 };

    pub fn new(par: f64, perp: f64) -> Self {
        Self { par, perp }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.par - other.par).hypot(self.perp - other.perp)
    }
}

/// Scalars describing the acquisition and the medium. SI units, or any
/// consistent nondimensional system (e.g. `c = 1`, `lambda_o = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Reference wave speed.
    pub c: f64,
    /// Carrier angular frequency.
    pub omega_o: f64,
    /// Bandwidth (angular frequency).
    #[serde(rename = "B")]
    pub bandwidth: f64,
    /// Range offset between the aperture and the imaging region.
    #[serde(rename = "L")]
    pub range: f64,
    /// Aperture size, also the scale of the Gaussian apodization.
    #[serde(rename = "a")]
    pub aperture: f64,
    /// Number of emission intervals; there are `N + 1` sensor positions.
    #[serde(rename = "N")]
    pub intervals: usize,
    /// Standard deviation of the medium fluctuations.
    #[serde(default)]
    pub sigma: f64,
    /// Correlation length of the medium fluctuations.
    pub ell_c: f64,
    /// Standard deviation of the additive noise.
    #[serde(rename = "sigma_W", default)]
    pub sigma_w: f64,
    /// Length of the sensor track in units of `a`. The default 1 places the
    /// sensors on `[-a/2, a/2]`.
    #[serde(default = "default_span_factor")]
    pub span_factor: f64,
}

fn default_span_factor() -> f64 {
    1.0
}

impl PhysicalParams {
    /// Nondimensional parameters with `c = 1` and `lambda_o = 1`.
    pub fn nondimensional(
        bandwidth_ratio: f64,
        range: f64,
        aperture: f64,
        intervals: usize,
        sigma: f64,
        ell_c: f64,
    ) -> Self {
        let omega_o = 2.0 * PI;
        Self {
            c: 1.0,
            omega_o,
            bandwidth: bandwidth_ratio * omega_o,
            range,
            aperture,
            intervals,
            sigma,
            ell_c,
            sigma_w: 0.0,
            span_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c", self.c),
            ("omega_o", self.omega_o),
            ("B", self.bandwidth),
            ("L", self.range),
            ("a", self.aperture),
            ("ell_c", self.ell_c),
            ("span_factor", self.span_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.intervals < 1 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.sigma_w.is_finite() && self.sigma_w >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma_W must be >= 0, got {}",
                self.sigma_w
            )));
        }
        if self.bandwidth >= self.omega_o {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {} must be smaller than the carrier {}",
                self.bandwidth, self.omega_o
            )));
        }
        if self.aperture >= self.range {
            return Err(Error::InvalidParameter(format!(
                "aperture {} must be smaller than the range {}",
                self.aperture, self.range
            )));
        }
        Ok(())
    }

    pub fn wavenumber(&self, omega: f64) -> f64 {
        omega / self.c
    }

    /// Cross-range resolution scale `L / (k_o a)` of the SAR kernel.
    pub fn cross_range_cell(&self) -> f64 {
        self.range / (self.wavenumber(self.omega_o) * self.aperture)
    }

    /// Range resolution scale `c / B`.
    pub fn range_cell(&self) -> f64 {
        self.c / self.bandwidth
    }
}

/// Scales derived from [`PhysicalParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    pub lambda_o: f64,
    pub k_o: f64,
    /// Standard deviation of the travel-time fluctuations.
    pub tau: f64,
    /// Decoherence length; `None` in a homogeneous medium.
    pub decoherence_length: Option<f64>,
    /// Decoherence frequency; `None` in a homogeneous medium.
    pub decoherence_frequency: Option<f64>,
}

impl DerivedScales {
    /// `omega_o * tau`, the phase distortion strength.
    pub fn phase_strength(&self, p: &PhysicalParams) -> f64 {
        p.omega_o * self.tau
    }
}

pub fn derive_scales(p: &PhysicalParams) -> DerivedScales {
    let lambda_o = 2.0 * PI * p.c / p.omega_o;
    let k_o = p.omega_o / p.c;
    let tau = p.sigma * (p.ell_c * p.range).sqrt() / (2.0 * p.c);
    let (xd, od) = if p.sigma > 0.0 {
        let xd = 3f64.sqrt() * lambda_o * p.ell_c.sqrt()
            / ((2.0 * PI).powf(1.5) * p.sigma * p.range.sqrt());
        (Some(xd), Some(1.0 / (2.0 * tau)))
    } else {
        (None, None)
    };
    DerivedScales {
        lambda_o,
        k_o,
        tau,
        decoherence_length: xd,
        decoherence_frequency: od,
    }
}

/// A violated asymptotic ordering. The simulation still runs.
#[derive(Debug, Clone, PartialEq)]
pub enum RegimeWarning {
    /// `omega_o tau` is not large.
    WeakPhaseDistortion { omega_tau: f64 },
    /// First ordering `sigma^2 L^3 / ell_c^3 << lambda_o^2 / (sigma^2 ell_c L)`.
    AmplitudeScattering { lhs: f64, rhs: f64 },
    /// Second ordering `lambda_o^2 / (sigma^2 ell_c L) << 1`.
    WeakDecoherence { value: f64 },
}

impl fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegimeWarning::WeakPhaseDistortion { omega_tau } => write!(
                f,
                "not in strong-fluctuation regime (omega_o*tau = {omega_tau:.4})"
            ),
            RegimeWarning::AmplitudeScattering { lhs, rhs } => write!(
                f,
                "sigma^2 L^3/ell_c^3 = {lhs:.4e} is not much smaller than lambda_o^2/(sigma^2 ell_c L) = {rhs:.4e}"
            ),
            RegimeWarning::WeakDecoherence { value } => write!(
                f,
                "lambda_o^2/(sigma^2 ell_c L) = {value:.4e} is not much smaller than 1"
            ),
        }
    }
}

pub fn validate_regime(p: &PhysicalParams, d: &DerivedScales) -> Vec<RegimeWarning> {
    let mut out = Vec::new();
    let omega_tau = d.phase_strength(p);
    if omega_tau * MUCH_SMALLER <= 1.0 {
        out.push(RegimeWarning::WeakPhaseDistortion { omega_tau });
    }
    if p.sigma > 0.0 {
        let lhs = p.sigma.powi(2) * (p.range / p.ell_c).powi(3);
        let rhs = d.lambda_o.powi(2) / (p.sigma.powi(2) * p.ell_c * p.range);
        if lhs >= MUCH_SMALLER * rhs {
            out.push(RegimeWarning::AmplitudeScattering { lhs, rhs });
        }
        if rhs >= MUCH_SMALLER {
            out.push(RegimeWarning::WeakDecoherence { value: rhs });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Point,
    pub amplitude: f64,
}

/// Point-scatterer reflectivity supported in the imaging region.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Reflectivity {
    pub scatterers: Vec<Scatterer>,
}

impl Reflectivity {
    pub fn new(scatterers: Vec<Scatterer>) -> Result<Self> {
        for s in &scatterers {
            if !(s.amplitude.is_finite() && s.amplitude >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "scatterer amplitude must be nonnegative, got {}",
                    s.amplitude
                )));
            }
            if !(s.position.par.is_finite() && s.position.perp.is_finite()) {
                return Err(Error::InvalidParameter("scatterer position must be finite".into()));
            }
        }
        Ok(Self { scatterers })
    }

    pub fn point(position: Point, amplitude: f64) -> Result<Self> {
        Self::new(vec![Scatterer { position, amplitude }])
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.scatterers.iter().enumerate() {
            for b in &self.scatterers[i + 1..] {
                d = d.max(a.position.dist(&b.position));
            }
        }
        d
    }

    /// Checks the small-region assumption behind the travel-time model.
    pub fn check_support(&self, ell_c: f64) -> Result<()> {
        let d = self.diameter();
        if d >= ell_c {
            return Err(Error::InvalidParameter(format!(
                "reflectivity support diameter {d} must be smaller than ell_c = {ell_c}"
            )));
        }
        Ok(())
    }

    /// Scatterers in a canonical order so that sums do not depend on the
    /// order in which the scatterers were listed.
    pub fn canonical(&self) -> Vec<Scatterer> {
        let mut s = self.scatterers.clone();
        s.sort_by(|a, b| {
            a.position
                .par
                .total_cmp(&b.position.par)
                .then(a.position.perp.total_cmp(&b.position.perp))
                .then(a.amplitude.total_cmp(&b.amplitude))
        });
        s
    }
}

/// Sensor positions `(L, x_n)` and their Gaussian apodization weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApertureGeometry {
    pub range: f64,
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
    pub spacing: f64,
}

impl ApertureGeometry {
    pub fn new(p: &PhysicalParams) -> Self {
        let span = p.aperture * p.span_factor;
        let n = p.intervals;
        let spacing = span / n as f64;
        let positions: Vec<f64> = (0..=n)
            .map(|i| {
                // exact symmetry about 0
                let j = 2.0 * i as f64 - n as f64;
                0.5 * j * spacing
            })
            .collect();
        let weights = positions
            .iter()
            .map(|x| (-(x * x) / (p.aperture * p.aperture)).exp())
            .collect();
        Self {
            range: p.range,
            positions,
            weights,
            spacing,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn sensor(&self, n: usize) -> Point {
        Point::new(self.range, self.positions[n])
    }

    /// Trapezoid weights approximating the integral over the track.
    pub fn quadrature(&self) -> Vec<f64> {
        trapezoid(self.len(), self.spacing)
    }
}

/// Uniform frequency samples on `[omega_o - q B, omega_o + q B]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omegas: Vec<f64>,
    pub spacing: f64,
    pub half_width: f64,
}

impl FrequencyGrid {
    /// `count` samples spanning `omega_o +- q B`. `count` must be odd so that
    /// the carrier is a sample, and large enough for spacing `<= B/4`.
    pub fn new(p: &PhysicalParams, q: f64, count: usize) -> Result<Self> {
        if q < 2.0 {
            return Err(Error::Config(format!("frequency half-width multiplier q = {q} < 2")));
        }
        if count < 3 || count % 2 == 0 {
            return Err(Error::Config(format!(
                "frequency count must be odd and >= 3, got {count}"
            )));
        }
        let spacing = 2.0 * q * p.bandwidth / (count - 1) as f64;
        if spacing > p.bandwidth / 4.0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "{count} frequencies give spacing {spacing:.4e} > B/4 = {:.4e}",
                p.bandwidth / 4.0
            )));
        }
        let mid = (count - 1) / 2;
        let omegas = (0..count)
            .map(|m| p.omega_o + (m as f64 - mid as f64) * spacing)
            .collect();
        Ok(Self {
            omegas,
            spacing,
            half_width: q,
        })
    }

    /// Smallest odd count whose spacing does not exceed `max_spacing`.
    pub fn with_max_spacing(p: &PhysicalParams, q: f64, max_spacing: f64) -> Result<Self> {
        if !(max_spacing > 0.0) {
            return Err(Error::Config("frequency spacing must be positive".into()));
        }
        let spacing = max_spacing.min(p.bandwidth / 4.0);
        let mut intervals = (2.0 * q * p.bandwidth / spacing).ceil() as usize;
        if intervals % 2 == 1 {
            intervals += 1;
        }
        Self::new(p, q, intervals.max(2) + 1)
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn quadrature(&self) -> Vec<f64> {
        trapezoid(self.len(), self.spacing)
    }
}

/// Default frequency spacing: a quarter of the smallest scale that has to be
/// resolved (bandwidth, CINT frequency window, decoherence frequency).
pub fn default_frequency_spacing(
    p: &PhysicalParams,
    d: &DerivedScales,
    window_omega: Option<f64>,
) -> f64 {
    let mut s = p.bandwidth;
    if let Some(w) = window_omega {
        s = s.min(w);
    }
    if let Some(od) = d.decoherence_frequency {
        s = s.min(od);
    }
    s / 4.0
}

pub(crate) fn trapezoid(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 1 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}
