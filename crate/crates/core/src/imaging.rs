//! SAR, CINT, two-point CINT and HCINT imaging functions.
//!
//! All functionals are built from the backpropagated field
//! `u_y(m, n) = conj(R(w_m, x_n)) F(w_m, x_n, y) w_n q_m q_n / (2 pi)`
//! where `F` is the paraxial point-reflector response, `w_n` the
//! apodization and `q_m, q_n` trapezoid weights. SAR is `|sum u_y|^2` and the
//! two-point CINT function is the windowed quadratic form
//! `I(y, y') = sum u_y(m, n) conj(u_y'(m', n')) W(m - m') W(n - n')`.
//! The Gaussian windows are truncated at `band_cutoff` standard deviations,
//! which makes the quadratic form a separable banded convolution.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::{Complex32, Complex64};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::forward::{pulse_spectrum, DataMatrix};
use crate::scene::{trapezoid, PhysicalParams, Point};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// CINT window standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowParams {
    /// Sensor-offset window.
    #[serde(rename = "X")]
    pub x: f64,
    /// Frequency-offset window.
    #[serde(rename = "Omega")]
    pub omega: f64,
    #[serde(default = "default_cutoff")]
    pub band_cutoff: f64,
}

fn default_cutoff() -> f64 {
    3.0
}

impl WindowParams {
    pub fn new(x: f64, omega: f64) -> Self {
        Self { x, omega, band_cutoff: 3.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x > 0.0 && self.omega > 0.0) {
            return Err(Error::InvalidParameter("window parameters must be positive".into()));
        }
        if !(self.band_cutoff >= 2.0) {
            return Err(Error::InvalidParameter("band_cutoff must be >= 2".into()));
        }
        Ok(())
    }
}

/// Uniform axis `start + i * step`, `i < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(start: f64, step: f64, count: usize) -> Self {
        Self { start, step, count }
    }

    /// `count` (odd) points centered on `center`.
    pub fn centered(center: f64, step: f64, count: usize) -> Self {
        let half = (count as f64 - 1.0) / 2.0;
        Self { start: center - half * step, step, count }
    }

    /// Checks that coordinates are uniformly spaced.
    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Config("an axis needs at least two coordinates".into()));
        }
        let step = (coords[coords.len() - 1] - coords[0]) / (coords.len() - 1) as f64;
        for (i, c) in coords.iter().enumerate() {
            if (coords[0] + i as f64 * step - c).abs() > 1e-9 * step.abs().max(1e-300) {
                return Err(Error::Config("grid coordinates are not uniformly spaced".into()));
            }
        }
        Ok(Self { start: coords[0], step, count: coords.len() })
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.coord(i)).collect()
    }

    /// Odd count and symmetric about zero.
    pub fn is_symmetric(&self) -> bool {
        self.count % 2 == 1 && (self.start + self.coord(self.count - 1)).abs() <= 1e-9 * self.step.abs()
    }

    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.start) / self.step).round();
        i.clamp(0.0, (self.count - 1) as f64) as usize
    }
}

/// Rectangular grid, row-major with range (`par`) as the slow index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub par: Axis,
    pub perp: Axis,
}

impl Grid2 {
    pub fn new(par: Axis, perp: Axis) -> Self {
        Self { par, perp }
    }

    pub fn len(&self) -> usize {
        self.par.count * self.perp.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = (idx / self.perp.count, idx % self.perp.count);
        Point::new(self.par.coord(i), self.perp.coord(j))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.perp.count + j
    }

    pub fn cell_area(&self) -> f64 {
        self.par.step * self.perp.step
    }
}

/// Real image on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub grid: Grid2,
    pub values: Vec<f64>,
}

impl ImageGrid {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }
}

/// Two-point CINT values `I(c + o/2, c - o/2)` indexed by center and offset.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointField {
    pub centers: Grid2,
    pub offsets: Grid2,
    /// `values[c * offsets.len() + o]`
    pub values: Vec<Complex64>,
}

impl TwoPointField {
    pub fn get(&self, center: usize, offset: usize) -> Complex64 {
        self.values[center * self.offsets.len() + offset]
    }

    /// Index of the zero offset.
    pub fn zero_offset(&self) -> usize {
        self.offsets.len() / 2
    }
}

/// HCINT function: two-point CINT integrated over the centers.
#[derive(Debug, Clone, PartialEq)]
pub struct HcintField {
    pub offsets: Grid2,
    pub values: Vec<Complex64>,
}

impl HcintField {
    pub fn zero_offset(&self) -> usize {
        self.offsets.len() / 2
    }
}

/// Complex values on a wavevector grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub kpar: Axis,
    pub kperp: Axis,
    /// Spatial demodulation applied before the transform: the value at `k`
    /// is the transform evaluated at `k - (carrier, 0)`.
    pub carrier: f64,
    pub values: Vec<Complex64>,
}

impl SpectrumGrid {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.kperp.count + j]
    }
}

/// Point-reflector response `s(w) G(w, y, x)^2` with the paraxial phase and
/// the amplitude frozen at the range `L`.
pub fn backprop_filter(omega: f64, x_perp: f64, y: Point, p: &PhysicalParams) -> Complex64 {
    let k = p.wavenumber(omega);
    let l = p.range;
    let d = l - y.par + (x_perp - y.perp).powi(2) / (2.0 * l);
    Complex64::from_polar(pulse_spectrum(omega, p) / (8.0 * PI * k * l), 2.0 * k * d + FRAC_PI_2)
}

/// Precomputed backpropagation of one data matrix.
#[derive(Debug, Clone)]
pub struct Backprojector {
    rows: usize,
    cols: usize,
    /// data weights with the range-independent part of the filter folded in
    base: Vec<Complex64>,
    k0: f64,
    dk: f64,
    x: Vec<f64>,
    range: f64,
    d_omega: f64,
    d_x: f64,
}

impl Backprojector {
    pub fn new(data: &DataMatrix, p: &PhysicalParams) -> Self {
        let rows = data.rows();
        let cols = data.cols();
        let qm = data.freqs.quadrature();
        let qn = data.aperture.quadrature();
        let l = p.range;
        let mut base = vec![ZERO; rows * cols];
        for m in 0..rows {
            let w = data.freqs.omegas[m];
            let k = p.wavenumber(w);
            let amp = pulse_spectrum(w, p) / (8.0 * PI * k * l) * qm[m] / (2.0 * PI);
            let carrier = Complex64::from_polar(amp, 2.0 * k * l + FRAC_PI_2);
            for n in 0..cols {
                let wn = data.aperture.weights[n] * qn[n];
                base[m * cols + n] = data.get(m, n).conj() * carrier * wn;
            }
        }
        Self {
            rows,
            cols,
            base,
            k0: p.wavenumber(data.freqs.omegas[0]),
            dk: data.freqs.spacing / p.c,
            x: data.aperture.positions.clone(),
            range: l,
            d_omega: data.freqs.spacing,
            d_x: data.aperture.spacing,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fills `out` with `u_y`.
    pub fn field_into(&self, y: Point, out: &mut [Complex64]) {
        const ANCHOR: usize = 32;
        let cols = self.cols;
        let excess: Vec<f64> = self
            .x
            .iter()
            .map(|x| -y.par + (x - y.perp).powi(2) / (2.0 * self.range))
            .collect();
        let step: Vec<Complex64> = excess.iter().map(|e| Complex64::from_polar(1.0, 2.0 * self.dk * e)).collect();
        let mut phasor = vec![ZERO; cols];
        for m in 0..self.rows {
            if m % ANCHOR == 0 {
                let k = self.k0 + m as f64 * self.dk;
                for n in 0..cols {
                    phasor[n] = Complex64::from_polar(1.0, 2.0 * k * excess[n]);
                }
            } else {
                for n in 0..cols {
                    phasor[n] *= step[n];
                }
            }
            let row = m * cols;
            for n in 0..cols {
                out[row + n] = self.base[row + n] * phasor[n];
            }
        }
    }

    pub fn field(&self, y: Point) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.len()];
        self.field_into(y, &mut out);
        out
    }

    pub fn sar(&self, y: Point) -> f64 {
        self.field(y).iter().sum::<Complex64>().norm_sqr()
    }
}

/// Truncated separable Gaussian window acting on `(m, n)` fields.
#[derive(Debug, Clone)]
pub struct WindowKernel {
    taps_m: Vec<f64>,
    taps_n: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl WindowKernel {
    pub fn new(bp: &Backprojector, w: &WindowParams) -> Self {
        let taps = |std: f64, h: f64| {
            let reach = (w.band_cutoff * std / h + 1e-9).floor() as usize;
            (0..=reach)
                .map(|d| {
                    let s = d as f64 * h;
                    (-s * s / (2.0 * std * std)).exp()
                })
                .collect::<Vec<f64>>()
        };
        Self {
            taps_m: taps(w.omega, bp.d_omega),
            taps_n: taps(w.x, bp.d_x),
            rows: bp.rows,
            cols: bp.cols,
        }
    }

    pub fn reach(&self) -> (usize, usize) {
        (self.taps_m.len() - 1, self.taps_n.len() - 1)
    }

    /// `z = W u`.
    pub fn apply(&self, u: &[Complex64], z: &mut [Complex64], scratch: &mut [Complex64]) {
        let (rows, cols) = (self.rows, self.cols);
        let bm = self.taps_m.len() as isize - 1;
        for m in 0..rows {
            let dst = &mut scratch[m * cols..(m + 1) * cols];
            dst.copy_from_slice(&u[m * cols..(m + 1) * cols]);
            for d in 1..=bm {
                let t = self.taps_m[d as usize];
                for mm in [m as isize - d, m as isize + d] {
                    if mm >= 0 && (mm as usize) < rows {
                        let src = &u[mm as usize * cols..(mm as usize + 1) * cols];
                        for (a, b) in dst.iter_mut().zip(src) {
                            *a += b * t;
                        }
                    }
                }
            }
        }
        let bn = self.taps_n.len() - 1;
        for m in 0..rows {
            let src = &scratch[m * cols..(m + 1) * cols];
            let dst = &mut z[m * cols..(m + 1) * cols];
            for n in 0..cols {
                let lo = n.saturating_sub(bn);
                let hi = (n + bn).min(cols - 1);
                let mut acc = ZERO;
                for nn in lo..=hi {
                    acc += src[nn] * self.taps_n[nn.abs_diff(n)];
                }
                dst[n] = acc;
            }
        }
    }
}

fn hermitian_dot(u: &[Complex32], z: &[Complex32]) -> Complex64 {
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for (a, b) in u.iter().zip(z) {
        let (ar, ai, br, bi) = (a.re as f64, a.im as f64, b.re as f64, b.im as f64);
        re += ar * br + ai * bi;
        im += ai * br - ar * bi;
    }
    Complex64::new(re, im)
}

/// Backpropagated field and its windowed version at one point, stored in
/// single precision to bound the lattice cache; products accumulate in f64.
struct PointState {
    u: Vec<Complex32>,
    z: Vec<Complex32>,
}

fn narrow(v: &[Complex64]) -> Vec<Complex32> {
    v.iter().map(|c| Complex32::new(c.re as f32, c.im as f32)).collect()
}

impl PointState {
    fn compute(bp: &Backprojector, kernel: &WindowKernel, y: Point) -> Self {
        let u = bp.field(y);
        let mut z = vec![ZERO; u.len()];
        let mut scratch = vec![ZERO; u.len()];
        kernel.apply(&u, &mut z, &mut scratch);
        Self { u: narrow(&u), z: narrow(&z) }
    }

    fn diagonal(&self) -> f64 {
        hermitian_dot(&self.u, &self.z).re.max(0.0)
    }
}

pub fn sar_image(bp: &Backprojector, grid: &Grid2) -> ImageGrid {
    let values = (0..grid.len()).into_par_iter().map(|i| bp.sar(grid.point(i))).collect();
    ImageGrid { grid: *grid, values }
}

/// Classic CINT, the diagonal of the two-point function. Rounding
/// negatives are clamped to zero.
pub fn cint_image(bp: &Backprojector, grid: &Grid2, w: &WindowParams) -> Result<ImageGrid> {
    w.validate()?;
    let kernel = WindowKernel::new(bp, w);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| PointState::compute(bp, &kernel, grid.point(i)).diagonal())
        .collect();
    Ok(ImageGrid { grid: *grid, values })
}

/// CINT value at a single point.
pub fn cint_at(bp: &Backprojector, w: &WindowParams, y: Point) -> f64 {
    PointState::compute(bp, &WindowKernel::new(bp, w), y).diagonal()
}

/// Maps `(center index, half-offset index)` along one axis to a shared
/// lattice key, so points reached from different centers are computed once.
#[derive(Debug, Clone, Copy)]
struct LatticeAxis {
    center: Axis,
    half_step: f64,
    half_reach: i64,
    ratio: Option<i64>,
}

impl LatticeAxis {
    fn new(center: Axis, offset: Axis) -> Self {
        let half_step = offset.step / 2.0;
        let half_reach = (offset.count as i64 - 1) / 2;
        let r = center.step / half_step;
        let ratio = if center.count == 1 {
            Some(1)
        } else if (r - r.round()).abs() < 1e-9 && r.round() >= 1.0 {
            Some(r.round() as i64)
        } else {
            None
        };
        Self { center, half_step, half_reach, ratio }
    }

    fn key(&self, i: usize, j: i64) -> i64 {
        match self.ratio {
            Some(r) => i as i64 * r + j,
            None => i as i64 * (2 * self.half_reach + 1) + j + self.half_reach,
        }
    }

    /// Canonical coordinate: the representative with the smallest `|j|`.
    fn coord(&self, key: i64) -> f64 {
        match self.ratio {
            Some(r) => {
                let mut best: Option<(i64, i64)> = None;
                let cnt = self.center.count as i64;
                let lo = ((key - self.half_reach) as f64 / r as f64).ceil() as i64;
                let hi = ((key + self.half_reach) as f64 / r as f64).floor() as i64;
                for i in lo.max(0)..=hi.min(cnt - 1) {
                    let j = key - i * r;
                    if best.map_or(true, |(_, bj)| j.abs() < bj.abs()) {
                        best = Some((i, j));
                    }
                }
                let (i, j) = best.expect("lattice key without representative");
                self.center.coord(i as usize) + j as f64 * self.half_step
            }
            None => {
                let w = 2 * self.half_reach + 1;
                let i = key.div_euclid(w);
                let j = key.rem_euclid(w) - self.half_reach;
                self.center.coord(i as usize) + j as f64 * self.half_step
            }
        }
    }
}

/// Two-point CINT on `centers x offsets`. Offsets must be symmetric about
/// zero with odd counts; values for `-o` are the conjugates of those for `o`.
pub fn two_point_cint(
    bp: &Backprojector,
    centers: &Grid2,
    offsets: &Grid2,
    w: &WindowParams,
) -> Result<TwoPointField> {
    w.validate()?;
    if !(offsets.par.is_symmetric() && offsets.perp.is_symmetric()) {
        return Err(Error::Config("offset grid must be symmetric about zero with odd counts".into()));
    }
    let kernel = WindowKernel::new(bp, w);
    let lat_par = LatticeAxis::new(centers.par, offsets.par);
    let lat_perp = LatticeAxis::new(centers.perp, offsets.perp);
    let n_off = offsets.len();
    let half = n_off / 2;
    let hp = lat_par.half_reach;
    let hq = lat_perp.half_reach;
    // offset index -> half-offset lattice steps (offset o = 2 j h/2)
    let off_steps = |o: usize| -> (i64, i64) {
        let (a, b) = (o / offsets.perp.count, o % offsets.perp.count);
        (a as i64 - hp, b as i64 - hq)
    };

    let mut values = vec![ZERO; centers.len() * n_off];
    let mut cache: HashMap<(i64, i64), Arc<PointState>> = HashMap::new();
    let row_keys = |ci: usize| -> Vec<i64> { (-hp..=hp).map(|j| lat_par.key(ci, j)).collect() };

    for ci in 0..centers.par.count {
        // lattice points needed by this center row
        let mut needed: Vec<(i64, i64)> = Vec::new();
        for cj in 0..centers.perp.count {
            for jp in -hp..=hp {
                for jq in -hq..=hq {
                    needed.push((lat_par.key(ci, jp), lat_perp.key(cj, jq)));
                }
            }
        }
        needed.sort_unstable();
        needed.dedup();
        let missing: Vec<(i64, i64)> = needed.into_iter().filter(|k| !cache.contains_key(k)).collect();
        let computed: Vec<((i64, i64), Arc<PointState>)> = missing
            .par_iter()
            .map(|&(kp, kq)| {
                let y = Point::new(lat_par.coord(kp), lat_perp.coord(kq));
                ((kp, kq), Arc::new(PointState::compute(bp, &kernel, y)))
            })
            .collect();
        cache.extend(computed);

        let row: Vec<(usize, Vec<Complex64>)> = (0..centers.perp.count)
            .into_par_iter()
            .map(|cj| {
                let mut out = vec![ZERO; n_off];
                for o in 0..=half {
                    let (sp, sq) = off_steps(o);
                    let plus = &cache[&(lat_par.key(ci, sp), lat_perp.key(cj, sq))];
                    let minus = &cache[&(lat_par.key(ci, -sp), lat_perp.key(cj, -sq))];
                    let v = hermitian_dot(&plus.u, &minus.z);
                    if o == half {
                        out[o] = Complex64::new(v.re, 0.0);
                    } else {
                        out[o] = v;
                        out[n_off - 1 - o] = v.conj();
                    }
                }
                (cj, out)
            })
            .collect();
        for (cj, out) in row {
            let c = centers.index(ci, cj);
            values[c * n_off..(c + 1) * n_off].copy_from_slice(&out);
        }

        if ci + 1 < centers.par.count {
            let keep = row_keys(ci + 1);
            cache.retain(|k, _| keep.contains(&k.0));
        }
    }
    Ok(TwoPointField { centers: *centers, offsets: *offsets, values })
}

/// Trapezoid quadrature of the two-point field over the centers.
pub fn hcint_field(tp: &TwoPointField) -> HcintField {
    let wp = trapezoid(tp.centers.par.count, tp.centers.par.step.abs());
    let wq = trapezoid(tp.centers.perp.count, tp.centers.perp.step.abs());
    let n_off = tp.offsets.len();
    let mut values = vec![ZERO; n_off];
    for ci in 0..tp.centers.par.count {
        for cj in 0..tp.centers.perp.count {
            let w = wp[ci] * wq[cj];
            let c = tp.centers.index(ci, cj);
            for (o, v) in values.iter_mut().enumerate() {
                *v += tp.values[c * n_off + o] * w;
            }
        }
    }
    HcintField { offsets: tp.offsets, values }
}

fn centered_frequency_axis(size: usize, step: f64) -> (Axis, i64) {
    let dk = 2.0 * PI / (size as f64 * step);
    let kmin = -(size as i64 / 2);
    (Axis::new(kmin as f64 * dk, dk, size), kmin)
}

/// Fourier transform of the HCINT function, `sum_o H(o) exp(i carrier o_par)
/// exp(-i k.o)` times the offset cell area, on the FFT grid of size `fft`
/// (zero-padded, at least the offset counts), wavevectors in ascending order.
pub fn hcint_spectrum(h: &HcintField, fft: (usize, usize), carrier: f64) -> Result<SpectrumGrid> {
    let (op, oq) = (h.offsets.par, h.offsets.perp);
    if !(op.is_symmetric() && oq.is_symmetric()) {
        return Err(Error::Config("HCINT offsets must be a symmetric uniform grid".into()));
    }
    let (pp, pq) = fft;
    if pp < op.count || pq < oq.count {
        return Err(Error::Config("FFT size smaller than the offset grid".into()));
    }
    let hp = (op.count as i64 - 1) / 2;
    let hq = (oq.count as i64 - 1) / 2;
    let mut buf = vec![ZERO; pp * pq];
    for a in 0..op.count {
        let ja = a as i64 - hp;
        let demod = Complex64::from_polar(1.0, carrier * ja as f64 * op.step);
        let ia = ja.rem_euclid(pp as i64) as usize;
        for b in 0..oq.count {
            let jb = b as i64 - hq;
            let ib = jb.rem_euclid(pq as i64) as usize;
            buf[ia * pq + ib] = h.values[a * oq.count + b] * demod;
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let fq = planner.plan_fft_forward(pq);
    for row in buf.chunks_mut(pq) {
        fq.process(row);
    }
    let fp = planner.plan_fft_forward(pp);
    let mut col = vec![ZERO; pp];
    for b in 0..pq {
        for a in 0..pp {
            col[a] = buf[a * pq + b];
        }
        fp.process(&mut col);
        for a in 0..pp {
            buf[a * pq + b] = col[a];
        }
    }
    let area = op.step * oq.step;
    let (kpar, kp0) = centered_frequency_axis(pp, op.step);
    let (kperp, kq0) = centered_frequency_axis(pq, oq.step);
    let mut values = vec![ZERO; pp * pq];
    for i in 0..pp {
        let si = (kp0 + i as i64).rem_euclid(pp as i64) as usize;
        for j in 0..pq {
            let sj = (kq0 + j as i64).rem_euclid(pq as i64) as usize;
            values[i * pq + j] = buf[si * pq + sj] * area;
        }
    }
    Ok(SpectrumGrid { kpar, kperp, carrier, values })
}
