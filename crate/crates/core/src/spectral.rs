//! Modulus estimation from the HCINT spectrum and positivity-constrained
//! error-reduction phase retrieval.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::sync::Arc;

use crate::imaging::{Axis, Grid2, HcintField, ImageGrid, SpectrumGrid};
use crate::rng::{stream, RealizationKey, StreamTag};
use crate::scene::PhysicalParams;
use crate::theory::hcint_envelope;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Estimated `|rho_ko^(k)|` on the in-band wavevectors, normalized to unit maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusTarget {
    pub kpar: Axis,
    pub kperp: Axis,
    pub values: Vec<f64>,
    /// Envelope stds `(B/c, a k_o/L)` that were divided out.
    pub envelope_std: (f64, f64),
    pub k_o: f64,
}

impl ModulusTarget {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.kperp.count + j]
    }

    /// Cell sizes of the dual spatial grid.
    pub fn spatial_steps(&self) -> (f64, f64) {
        (
            2.0 * PI / (self.kpar.count as f64 * self.kpar.step),
            2.0 * PI / (self.kperp.count as f64 * self.kperp.step),
        )
    }
}

fn band_indices(axis: &Axis, band: f64) -> Result<(usize, usize)> {
    let zero = (-axis.start / axis.step).round();
    if (axis.start + zero * axis.step).abs() > 1e-9 * axis.step || zero < 0.0 {
        return Err(Error::Config("spectrum grid does not contain k = 0".into()));
    }
    let zero = zero as usize;
    let reach = (band / axis.step + 1e-9).floor() as usize;
    if reach == 0 {
        return Err(Error::Config("spectrum grid too coarse to resolve the band".into()));
    }
    if zero < reach || zero + reach >= axis.count {
        return Err(Error::Config("spectrum grid does not cover the band".into()));
    }
    Ok((zero - reach, 2 * reach + 1))
}

/// Divides the spectrum by the noiseless envelope on the band
/// `|k_par| <= B/c`, `|k_perp| <= a k_o / L` and takes the square root.
pub fn modulus_estimate(spec: &SpectrumGrid, p: &PhysicalParams) -> Result<ModulusTarget> {
    let ko = p.wavenumber(p.omega_o);
    let bpar = p.bandwidth / p.c;
    let bperp = p.aperture * ko / p.range;
    let (i0, np) = band_indices(&spec.kpar, bpar)?;
    let (j0, nq) = band_indices(&spec.kperp, bperp)?;
    let kpar = Axis::new(spec.kpar.coord(i0), spec.kpar.step, np);
    let kperp = Axis::new(spec.kperp.coord(j0), spec.kperp.step, nq);
    let mut values = Vec::with_capacity(np * nq);
    for i in 0..np {
        for j in 0..nq {
            let s = spec.get(i0 + i, j0 + j).re;
            let env = hcint_envelope(kpar.coord(i), kperp.coord(j), p);
            values.push((s / env).max(0.0).sqrt());
        }
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut values {
            *v /= max;
        }
    }
    Ok(ModulusTarget { kpar, kperp, values, envelope_std: (bpar, bperp), k_o: ko })
}

/// Scales the zero-offset sample by `1 - fraction`.
pub fn deflate_central_peak(h: &HcintField, fraction: f64) -> Result<HcintField> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter("deflation fraction must lie in [0, 1)".into()));
    }
    let mut out = h.clone();
    let c = out.zero_offset();
    out.values[c] *= 1.0 - fraction;
    Ok(out)
}

/// Phase retrieval output on the spatial grid dual to the target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub par: Axis,
    pub perp: Axis,
    #[serde(skip)]
    pub eta: Vec<Complex64>,
    pub rho_est: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Global shift and point reflection are not determined by the modulus.
    pub ambiguity: &'static str,
}

impl RetrievalResult {
    pub fn grid(&self) -> Grid2 {
        Grid2::new(self.par, self.perp)
    }

    /// The estimate circularly rolled so its mass sits mid-grid.
    pub fn centered_estimate(&self) -> ImageGrid {
        let (np, nq) = (self.par.count, self.perp.count);
        let circ = |n: usize, along_par: bool| {
            let (mut s, mut c) = (0.0, 0.0);
            for i in 0..np {
                for j in 0..nq {
                    let v = self.rho_est[i * nq + j];
                    let k = if along_par { i } else { j };
                    let t = 2.0 * PI * k as f64 / n as f64;
                    s += v * t.sin();
                    c += v * t.cos();
                }
            }
            let t = s.atan2(c).rem_euclid(2.0 * PI);
            (t / (2.0 * PI) * n as f64).round() as usize % n
        };
        let (cp, cq) = (circ(np, true), circ(nq, false));
        let (mp, mq) = (np / 2, nq / 2);
        let mut values = vec![0.0; np * nq];
        for i in 0..np {
            for j in 0..nq {
                let si = (i + np + cp - mp) % np;
                let sj = (j + nq + cq - mq) % nq;
                values[i * nq + j] = self.rho_est[si * nq + sj];
            }
        }
        ImageGrid { grid: self.grid(), values }
    }
}

struct Transform2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Transform2 {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    /// Unitary transform, preserving the Euclidean norm.
    fn apply(&self, buf: &mut [Complex64], forward: bool) {
        let (rf, cf) = if forward { (&self.row_fwd, &self.col_fwd) } else { (&self.row_inv, &self.col_inv) };
        for row in buf.chunks_mut(self.cols) {
            rf.process(row);
        }
        let mut col = vec![ZERO; self.rows];
        for j in 0..self.cols {
            for i in 0..self.rows {
                col[i] = buf[i * self.cols + j];
            }
            cf.process(&mut col);
            for i in 0..self.rows {
                buf[i * self.cols + j] = col[i];
            }
        }
        let s = 1.0 / ((self.rows * self.cols) as f64).sqrt();
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// Centered index `k` (from `-(n-1)/2`) to FFT storage index.
fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Error reduction with the constraint `eta(x) exp(-2 i k_o x_par) >= 0`.
pub fn error_reduction_retrieve(
    target: &ModulusTarget,
    iterations: usize,
    tolerance: f64,
    init_key: RealizationKey,
) -> Result<RetrievalResult> {
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be at least 1".into()));
    }
    let norm_m = target.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_m == 0.0 {
        return Err(Error::Degenerate("modulus target is identically zero".into()));
    }
    let (np, nq) = (target.kpar.count, target.kperp.count);
    let (hp, hq) = target.spatial_steps();
    let par = Axis::centered(0.0, hp, np);
    let perp = Axis::centered(0.0, hq, nq);
    let (rp, rq) = ((np as i64 - 1) / 2, (nq as i64 - 1) / 2);

    // storage-order modulus and spatial demodulation phases
    let mut m = vec![0.0; np * nq];
    for i in 0..np {
        for j in 0..nq {
            m[wrap(i as i64 - rp, np) * nq + wrap(j as i64 - rq, nq)] = target.get(i, j);
        }
    }
    let mut demod = vec![ZERO; np * nq];
    for i in 0..np {
        let x = par.coord(i);
        let ph = Complex64::from_polar(1.0, -2.0 * target.k_o * x);
        for j in 0..nq {
            demod[wrap(i as i64 - rp, np) * nq + wrap(j as i64 - rq, nq)] = ph;
        }
    }

    let fft = Transform2::new(np, nq);
    let mut rng = stream(init_key, StreamTag::Retrieval, 0);
    let mut g: Vec<Complex64> = m.iter().map(|&v| Complex64::from_polar(v, rng.random::<f64>() * 2.0 * PI)).collect();
    fft.apply(&mut g, false);

    let project_space = |g: &mut [Complex64]| {
        for (v, d) in g.iter_mut().zip(&demod) {
            let r = (*v * d).re.max(0.0);
            *v = d.conj() * r;
        }
    };

    let mut residuals = Vec::with_capacity(iterations);
    let mut converged = false;
    for _ in 0..iterations {
        project_space(&mut g);
        fft.apply(&mut g, true);
        let mut err = 0.0;
        for (v, &mv) in g.iter().zip(&m) {
            err += (v.norm() - mv).powi(2);
        }
        residuals.push(err.sqrt() / norm_m);
        for (v, &mv) in g.iter_mut().zip(&m) {
            let a = v.norm();
            *v = if a > 0.0 { *v * (mv / a) } else { Complex64::new(mv, 0.0) };
        }
        fft.apply(&mut g, false);
        if *residuals.last().unwrap() < tolerance {
            converged = true;
            break;
        }
    }
    // final spatial projection gives the reported estimate
    project_space(&mut g);

    let mut eta = vec![ZERO; np * nq];
    let mut rho_est = vec![0.0; np * nq];
    for i in 0..np {
        for j in 0..nq {
            let s = wrap(i as i64 - rp, np) * nq + wrap(j as i64 - rq, nq);
            eta[i * nq + j] = g[s];
            rho_est[i * nq + j] = (g[s] * demod[s]).re.max(0.0);
        }
    }
    Ok(RetrievalResult {
        par,
        perp,
        eta,
        rho_est,
        iterations: residuals.len(),
        residuals,
        converged,
        ambiguity: "global shift and point reflection",
    })
}

fn centroid_above_half(img: &ImageGrid) -> Option<(f64, f64)> {
    let max = img.max();
    if !(max > 0.0) {
        return None;
    }
    let (mut w, mut sp, mut sq) = (0.0, 0.0, 0.0);
    for (idx, &v) in img.values.iter().enumerate() {
        if v >= 0.5 * max {
            let y = img.grid.point(idx);
            w += v;
            sp += v * y.par;
            sq += v * y.perp;
        }
    }
    Some((sp / w, sq / w))
}

/// Translates the estimate so its centroid above half maximum coincides
/// with that of the CINT image. The point-reflection ambiguity remains.
pub fn register_to_cint(rho: &ImageGrid, cint: &ImageGrid) -> Result<ImageGrid> {
    let (cp, cq) =
        centroid_above_half(cint).ok_or_else(|| Error::Degenerate("CINT image has no support above threshold".into()))?;
    let (rp, rq) =
        centroid_above_half(rho).ok_or_else(|| Error::Degenerate("estimate has no support above threshold".into()))?;
    let mut out = rho.clone();
    out.grid.par.start += cp - rp;
    out.grid.perp.start += cq - rq;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub par: f64,
    pub perp: f64,
    pub value: f64,
}

fn refine(vm: f64, v0: f64, vp: f64) -> f64 {
    let den = vm - 2.0 * v0 + vp;
    if den < 0.0 {
        (0.5 * (vm - vp) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

/// Local maxima above `threshold * max`, strongest first, with quadratic
/// sub-cell refinement. Neighbours wrap when `periodic`.
pub fn detect_peaks(img: &ImageGrid, threshold: f64, max_count: usize, periodic: bool) -> Vec<Peak> {
    let (np, nq) = (img.grid.par.count, img.grid.perp.count);
    let max = img.max();
    let at = |i: i64, j: i64| -> f64 {
        if periodic {
            img.get(i.rem_euclid(np as i64) as usize, j.rem_euclid(nq as i64) as usize)
        } else if i < 0 || j < 0 || i >= np as i64 || j >= nq as i64 {
            0.0
        } else {
            img.get(i as usize, j as usize)
        }
    };
    let mut peaks = Vec::new();
    for i in 0..np as i64 {
        for j in 0..nq as i64 {
            let v = at(i, j);
            if !(v > 0.0 && v >= threshold * max) {
                continue;
            }
            let mut is_max = true;
            'nb: for di in -1..=1 {
                for dj in -1..=1 {
                    if (di, dj) == (0, 0) {
                        continue;
                    }
                    let u = at(i + di, j + dj);
                    // ties resolved towards the lexicographically first cell
                    if u > v || (u == v && (di, dj) < (0, 0)) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                let fp = refine(at(i - 1, j), v, at(i + 1, j));
                let fq = refine(at(i, j - 1), v, at(i, j + 1));
                peaks.push(Peak {
                    par: img.grid.par.coord(i as usize) + fp * img.grid.par.step,
                    perp: img.grid.perp.coord(j as usize) + fq * img.grid.perp.step,
                    value: v,
                });
            }
        }
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.par.total_cmp(&b.par)).then(a.perp.total_cmp(&b.perp)));
    peaks.truncate(max_count);
    peaks
}

/// Agreement between detected peaks and a known configuration, best over
/// global translations and the point reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfigurationMatch {
    /// Largest position error in units of the given cells.
    pub max_error_cells: f64,
    pub reflected: bool,
    /// `(max - min) / max` of the matched peak amplitudes.
    pub amplitude_spread: f64,
}

/// `cells` are `(range, cross-range)` resolution cells; `periods` wrap
/// coordinates on a torus when the peaks come from a periodic grid.
pub fn match_configuration(
    found: &[Peak],
    truth: &[(f64, f64)],
    cells: (f64, f64),
    periods: Option<(f64, f64)>,
) -> Option<ConfigurationMatch> {
    if found.len() != truth.len() || found.is_empty() {
        return None;
    }
    let wrapd = |d: f64, per: Option<f64>| match per {
        Some(pp) => d - pp * (d / pp).round(),
        None => d,
    };
    let (pp, pq) = (periods.map(|p| p.0), periods.map(|p| p.1));
    let mut best: Option<ConfigurationMatch> = None;
    for reflected in [false, true] {
        let s = if reflected { -1.0 } else { 1.0 };
        let pts: Vec<(f64, f64)> = found.iter().map(|p| (s * p.par, s * p.perp)).collect();
        for anchor in 0..pts.len() {
            for target in truth {
                let mut t = (target.0 - pts[anchor].0, target.1 - pts[anchor].1);
                for _ in 0..2 {
                    // nearest truth for each found point, then mean residual
                    let mut used = vec![false; truth.len()];
                    let mut res = Vec::new();
                    for pt in &pts {
                        let mut bj = None;
                        let mut bd = f64::INFINITY;
                        for (k, tr) in truth.iter().enumerate() {
                            if used[k] {
                                continue;
                            }
                            let dp = wrapd(tr.0 - pt.0 - t.0, pp) / cells.0;
                            let dq = wrapd(tr.1 - pt.1 - t.1, pq) / cells.1;
                            let d = dp.hypot(dq);
                            if d < bd {
                                bd = d;
                                bj = Some((k, dp, dq));
                            }
                        }
                        let (k, dp, dq) = bj?;
                        used[k] = true;
                        res.push((dp, dq));
                    }
                    let n = res.len() as f64;
                    let mp: f64 = res.iter().map(|r| r.0).sum::<f64>() / n;
                    let mq: f64 = res.iter().map(|r| r.1).sum::<f64>() / n;
                    t = (t.0 + mp * cells.0, t.1 + mq * cells.1);
                    let err = res
                        .iter()
                        .map(|r| ((r.0 - mp).abs()).max((r.1 - mq).abs()))
                        .fold(0.0, f64::max);
                    let vmax = found.iter().map(|p| p.value).fold(0.0, f64::max);
                    let vmin = found.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
                    let cand = ConfigurationMatch { max_error_cells: err, reflected, amplitude_spread: (vmax - vmin) / vmax };
                    if best.map_or(true, |b| cand.max_error_cells < b.max_error_cells) {
                        best = Some(cand);
                    }
                }
            }
        }
    }
    best
}
