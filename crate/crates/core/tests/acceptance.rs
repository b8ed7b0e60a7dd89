//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits zero after reporting unless `HCINT_ACCEPTANCE_STRICT=1`, in which
//! case any FAIL gives a nonzero exit code. Numeric arguments select
//! criteria: `cargo test --test acceptance -- 5 9`.

use std::f64::consts::PI;
use std::time::Instant;

use hcint::forward::synthesize_data;
use hcint::harness::*;
use hcint::imaging::*;
use hcint::medium::{MediumStats, TravelTimeRealization, TravelTimeSampler};
use hcint::rng::RealizationKey;
use hcint::scene::*;
use hcint::theory::{cint_widths, sar_widths, EffectiveParams};
use hcint::{Complex64, Result};

// pinned tolerances
const C1_REALIZATIONS: u64 = 10_000;
const C1_SE_MULTIPLE: f64 = 3.0;
const C2_WIDTH_TOL: f64 = 0.15;
const C3_REALIZATIONS: usize = 100;
const C3_WIDTH_TOL: f64 = 0.25;
const C4_SAR_CV: (f64, f64) = (0.7, 1.3);
const C4_CINT_CV_MAX: f64 = 0.6;
const C5_REL_TOL: f64 = 1e-3;
const C5_SWAP_TOL: f64 = 1e-12;
const C6_ENVELOPE_TOL: f64 = 0.10;
const C6_DFT_TOL: f64 = 1e-12;
const C6_BANDWIDTH_RATIO: f64 = 0.05;
const C7_HOMOGENEOUS_CELLS: f64 = 1.0;
const C7_SPREAD_MAX: f64 = 0.20;
const C7_STRONG_CELLS: f64 = 2.0;
const C7_MAX_SECONDS: f64 = 900.0;
const C8_RADIUS_TOL: f64 = 0.20;
const C8_NOISE_IMAGES: usize = 40;
const C8_ENHANCEMENT_MIN: f64 = 1.05;
const C8_DEFLATE: f64 = 0.2;
/// Strong-medium runs are scored over these medium/noise seeds; a criterion
/// part passes when a strict majority succeeds.
const STRONG_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn selected(n: u32) -> bool {
    let picks: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    picks.is_empty() || picks.contains(&n)
}

fn run(n: u32, name: &str, f: impl FnOnce() -> Result<Outcome>) -> Option<bool> {
    if !selected(n) {
        return None;
    }
    let t = Instant::now();
    let (pass, detail) = match f() {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {n} ({name}): {detail} [{:.1} s]", t.elapsed().as_secs_f64());
    Some(pass)
}

fn rel(measured: f64, predicted: f64) -> f64 {
    (measured - predicted).abs() / predicted.abs()
}

fn majority(successes: usize) -> bool {
    2 * successes > STRONG_SEEDS.len()
}

fn strong_params(sigma: f64) -> PhysicalParams {
    let mut p = PhysicalParams::nondimensional(0.2, 100.0, 20.0, 60, sigma, 100.0);
    p.span_factor = 4.0;
    p
}

fn ray_cov(r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else {
        libm::erf(PI.sqrt() * r) / (2.0 * r)
    }
}

fn tau_of(p: &PhysicalParams) -> f64 {
    p.sigma * (p.ell_c * p.range).sqrt() / (2.0 * p.c)
}

fn decoherence_length(p: &PhysicalParams) -> f64 {
    let lambda = 2.0 * PI * p.c / p.omega_o;
    3f64.sqrt() * lambda * p.ell_c.sqrt() / ((2.0 * PI).powf(1.5) * p.sigma * p.range.sqrt())
}

#[derive(Default)]
struct ComplexMean {
    n: f64,
    re: f64,
    im: f64,
    re2: f64,
    im2: f64,
}

impl ComplexMean {
    fn push(&mut self, z: Complex64) {
        self.n += 1.0;
        self.re += z.re;
        self.im += z.im;
        self.re2 += z.re * z.re;
        self.im2 += z.im * z.im;
    }

    /// Whether the mean lies within `k` standard errors of the real `target`.
    fn within(&self, target: f64, k: f64) -> (bool, f64, f64) {
        let (mr, mi) = (self.re / self.n, self.im / self.n);
        let se_r = ((self.re2 / self.n - mr * mr).max(0.0) / self.n).sqrt();
        let se_i = ((self.im2 / self.n - mi * mi).max(0.0) / self.n).sqrt();
        let ok = (mr - target).abs() <= k * se_r + 1e-12 && mi.abs() <= k * se_i + 1e-12;
        (ok, mr, se_r)
    }
}

fn criterion1() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    // weak medium (omega_o tau = 1/2) and the reference strong medium
    for sigma in [0.06 / (12.0 * PI), 0.06] {
        let p = strong_params(sigma);
        let tau = tau_of(&p);
        let xd = decoherence_length(&p);
        let geom = ApertureGeometry {
            range: p.range,
            positions: vec![0.0, xd, 2.0 * xd],
            weights: vec![1.0; 3],
            spacing: xd,
        };
        let sampler = TravelTimeSampler::new(&geom, &MediumStats::new(&p))?;
        let w = p.omega_o;
        let mut one = ComplexMean::default();
        let mut two: [ComplexMean; 3] = Default::default();
        for r in 0..C1_REALIZATIONS {
            let t = sampler.sample(RealizationKey::new(1, r)).values;
            one.push(Complex64::from_polar(1.0, 2.0 * w * t[0]));
            for (j, m) in two.iter_mut().enumerate() {
                m.push(Complex64::from_polar(1.0, 2.0 * w * (t[0] - t[j])));
            }
        }
        let expect1 = (-2.0 * w * w * tau * tau).exp();
        let (ok, m, se) = one.within(expect1, C1_SE_MULTIPLE);
        pass &= ok;
        parts.push(format!("wt={:.2}: mean {m:.4} vs {expect1:.4} (se {se:.1e})", w * tau));
        for (j, mm) in two.iter().enumerate() {
            let dx = j as f64 * xd;
            let expect = (-4.0 * w * w * tau * tau * (1.0 - ray_cov(dx / p.ell_c))).exp();
            let (ok, m, se) = mm.within(expect, C1_SE_MULTIPLE);
            pass &= ok;
            parts.push(format!("dx={j}Xd {m:.4} vs {expect:.4} (se {se:.1e})"));
        }
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn criterion2() -> Result<Outcome> {
    let mut p = PhysicalParams::nondimensional(0.2, 100.0, 10.0, 60, 0.0, 100.0);
    p.span_factor = 4.0;
    let ko = 2.0 * PI * p.omega_o / (2.0 * PI * p.c);
    let (rc, xc) = (p.c / p.bandwidth, p.range / (ko * p.aperture));
    let truth = Point::new(0.37 * rc, -0.41 * xc);
    let refl = Reflectivity::point(truth, 1.0)?;
    let freqs = FrequencyGrid::with_max_spacing(&p, 3.0, p.bandwidth / 4.0)?;
    let ap = ApertureGeometry::new(&p);
    let data = synthesize_data(&p, &refl, &freqs, &ap, &TravelTimeRealization::zeros(ap.len()), None)?;
    let bp = Backprojector::new(&data, &p);
    let grid = Grid2::new(Axis::centered(0.0, rc / 8.0, 65), Axis::centered(0.0, xc / 8.0, 65));
    let img = sar_image(&bp, &grid);
    // the intensity falls to e^{-2} where the kernel falls to e^{-1}
    let (wr, wx) = half_widths(&img, (-2.0f64).exp())?;
    let peak = grid.point(img.argmax());
    let located = (peak.par - truth.par).abs() <= grid.par.step && (peak.perp - truth.perp).abs() <= grid.perp.step;
    let (er, ex) = (rel(wr, rc), rel(wx, xc));
    Ok(Outcome {
        pass: er < C2_WIDTH_TOL && ex < C2_WIDTH_TOL && located,
        detail: format!(
            "range {wr:.4} vs c/B {rc:.4} ({:.1}%), cross {wx:.4} vs L/(k_o a) {xc:.4} ({:.1}%), peak offset ({:.3}, {:.3}) cells of grid",
            100.0 * er,
            100.0 * ex,
            (peak.par - truth.par) / grid.par.step,
            (peak.perp - truth.perp) / grid.perp.step
        ),
    })
}

/// Strong-medium point scatterer at the origin with CINT windows
/// `(X_d, Omega_d) / div` and a span equal to the aperture.
fn stability_scenario(div: f64) -> Result<(Scenario, EffectiveParams, EffectiveParams)> {
    let mut c = figure_config(4, 11)?;
    c.physical.span_factor = 1.0;
    c.noise = NoiseConfig::default();
    c.reflectivity = Reflectivity::point(Point::ORIGIN, 1.0)?;
    c.grids.frequency_spacing = None;
    let p = c.physical.resolve()?;
    let d = derive_scales(&p);
    let w = WindowParams::new(decoherence_length(&p) / div, 1.0 / (2.0 * tau_of(&p)) / div);
    c.windows = Some(w);
    let sc = Scenario::new(c)?;
    let sar = EffectiveParams::new(&p, &d, None);
    let cint = EffectiveParams::new(&p, &d, Some(&w));
    Ok((sc, sar, cint))
}

/// Independent harmonic combination of window, decoherence and aperture scales.
fn harmonic(scales: &[f64]) -> f64 {
    scales.iter().map(|s| s.powi(-2)).sum::<f64>().powf(-0.5)
}

struct Cuts {
    widths: (f64, f64),
    peak_cv: Option<f64>,
}

fn cut_ensemble(sc: &Scenario, f: Functional, widths: (f64, f64), n: usize) -> Result<Cuts> {
    let g = scaled_grid(widths, 6.0, 3.0);
    let one = Axis::centered(0.0, 1.0, 1);
    let rg = Grid2::new(g.par, one);
    let cg = Grid2::new(one, g.perp);
    let r = run_monte_carlo_on(sc, f, &rg, n)?;
    let c = run_monte_carlo_on(sc, f, &cg, n)?;
    let level = (-2.0f64).exp();
    let wr = profile_half_width(&rg.par.coords(), &r.mean, r.peak(), level)?;
    let wc = profile_half_width(&cg.perp.coords(), &c.mean, c.peak(), level)?;
    Ok(Cuts { widths: (wr, wc), peak_cv: r.peak_cv() })
}

fn criteria3_4() -> Result<(Outcome, Outcome)> {
    let (sc, sar_eff, cint_eff) = stability_scenario(2.0)?;
    let p = &sc.params;
    let ko = p.omega_o / p.c;
    let (xd, od) = (decoherence_length(p), 1.0 / (2.0 * tau_of(p)));
    let x_t = harmonic(&[xd, sc.window.x, p.aperture]);
    let o_t = harmonic(&[od, sc.window.omega, p.bandwidth]);
    let pred = (p.c / o_t, p.range / (ko * x_t));
    let cint = cut_ensemble(&sc, Functional::Cint, cint_widths(&cint_eff, p), C3_REALIZATIONS)?;
    let sar = cut_ensemble(&sc, Functional::Sar, sar_widths(&sar_eff, p), C3_REALIZATIONS)?;
    let (er, ex) = (rel(cint.widths.0, pred.0), rel(cint.widths.1, pred.1));
    let c3 = Outcome {
        pass: er < C3_WIDTH_TOL && ex < C3_WIDTH_TOL,
        detail: format!(
            "omega_o tau = {:.3}, range {:.3} vs c/Omega~ {:.3} ({:.1}%), cross {:.3} vs L/(k_o X~) {:.3} ({:.1}%), {} realizations",
            p.omega_o * tau_of(p),
            cint.widths.0,
            pred.0,
            100.0 * er,
            cint.widths.1,
            pred.1,
            100.0 * ex,
            C3_REALIZATIONS
        ),
    };

    let (half, _, _) = stability_scenario(4.0)?;
    let origin = Grid2::new(Axis::centered(0.0, 1.0, 1), Axis::centered(0.0, 1.0, 1));
    let cv_half = run_monte_carlo_on(&half, Functional::Cint, &origin, C3_REALIZATIONS)?.peak_cv();
    let sar_cv = sar.peak_cv.unwrap_or(f64::NAN);
    let cint_cv = cint.peak_cv.unwrap_or(f64::NAN);
    let half_cv = cv_half.unwrap_or(f64::NAN);
    let sar_ok = (C4_SAR_CV.0..=C4_SAR_CV.1).contains(&sar_cv);
    let cint_ok = cint_cv < C4_CINT_CV_MAX && half_cv < cint_cv;
    let c4 = Outcome {
        pass: sar_ok && cint_ok,
        detail: format!(
            "SAR peak CV {sar_cv:.3} (target [{}, {}]: {}), CINT peak CV {cint_cv:.3} -> {half_cv:.3} with halved windows ({})",
            C4_SAR_CV.0,
            C4_SAR_CV.1,
            if sar_ok { "ok" } else { "out of range" },
            if cint_ok { "ok" } else { "not stable/decreasing" }
        ),
    };
    Ok((c3, c4))
}

/// Untruncated quadruple sum of the two-point CINT.
fn brute_two_point(bp: &Backprojector, d: &hcint::forward::DataMatrix, w: &WindowParams, y1: Point, y2: Point) -> Complex64 {
    let (u1, u2) = (bp.field(y1), bp.field(y2));
    let (rows, cols) = (d.rows(), d.cols());
    let mut acc = Complex64::new(0.0, 0.0);
    for m in 0..rows {
        for n in 0..cols {
            let a = u1[m * cols + n];
            for mm in 0..rows {
                let dw = d.freqs.omegas[m] - d.freqs.omegas[mm];
                let gw = (-dw * dw / (2.0 * w.omega * w.omega)).exp();
                for nn in 0..cols {
                    let dx = d.aperture.positions[n] - d.aperture.positions[nn];
                    let gx = (-dx * dx / (2.0 * w.x * w.x)).exp();
                    acc += a * u2[mm * cols + nn].conj() * (gw * gx);
                }
            }
        }
    }
    acc
}

fn criterion5() -> Result<Outcome> {
    let p = PhysicalParams::nondimensional(0.2, 100.0, 20.0, 4, 0.0, 100.0);
    // M = 8 samples at spacing B/4 about the carrier
    let spacing = p.bandwidth / 4.0;
    let freqs = FrequencyGrid {
        omegas: (0..8).map(|m| p.omega_o + (m as f64 - 3.5) * spacing).collect(),
        spacing,
        half_width: 0.875,
    };
    let ap = ApertureGeometry::new(&p);
    let refl = Reflectivity::new(vec![
        Scatterer { position: Point::new(0.3, -0.4), amplitude: 1.0 },
        Scatterer { position: Point::new(-0.5, 0.9), amplitude: 0.7 },
    ])?;
    let d = synthesize_data(&p, &refl, &freqs, &ap, &TravelTimeRealization::zeros(ap.len()), None)?;
    let bp = Backprojector::new(&d, &p);
    let centers = Grid2::new(Axis::centered(0.0, 0.3, 3), Axis::centered(0.0, 0.5, 3));
    let offsets = Grid2::new(Axis::centered(0.0, 0.4, 3), Axis::centered(0.0, 0.6, 3));
    let mut worst: f64 = 0.0;
    let mut swap: f64 = 0.0;
    let mut parts = Vec::new();
    // wide windows (band covers the grid) and narrow ones (band truncates)
    for w in [
        WindowParams::new(p.aperture / 5.0, p.bandwidth / 5.0),
        WindowParams::new(ap.spacing, 1.2 * freqs.spacing),
    ] {
        let tp = two_point_cint(&bp, &centers, &offsets, &w)?;
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for c in 0..centers.len() {
            let yc = centers.point(c);
            for o in 0..offsets.len() {
                let yo = offsets.point(o);
                let y1 = Point::new(yc.par + yo.par / 2.0, yc.perp + yo.perp / 2.0);
                let y2 = Point::new(yc.par - yo.par / 2.0, yc.perp - yo.perp / 2.0);
                let exact = brute_two_point(&bp, &d, &w, y1, y2);
                let back = brute_two_point(&bp, &d, &w, y2, y1);
                err = err.max((tp.get(c, o) - exact).norm());
                scale = scale.max(exact.norm());
                swap = swap.max((back - exact.conj()).norm() / exact.norm().max(1e-300));
                let mirrored = tp.get(c, offsets.len() - 1 - o);
                swap = swap.max((mirrored - tp.get(c, o).conj()).norm() / tp.get(c, o).norm().max(1e-300));
            }
        }
        worst = worst.max(err / scale);
        parts.push(format!("X={:.2} Omega={:.3}: rel err {:.2e}", w.x, w.omega, err / scale));
    }
    Ok(Outcome {
        pass: worst < C5_REL_TOL && swap < C5_SWAP_TOL,
        detail: format!("{}; swap asymmetry {swap:.1e}", parts.join(", ")),
    })
}

struct EnvelopeCheck {
    worst: f64,
    dft: f64,
}

fn envelope_check(bw_ratio: f64, with_dft: bool) -> Result<EnvelopeCheck> {
    let mut p = PhysicalParams::nondimensional(bw_ratio, 100.0, 20.0, 60, 0.0, 100.0);
    p.span_factor = 4.0;
    let w = WindowParams::new(p.aperture / 5.0, p.bandwidth / 5.0);
    let freqs = FrequencyGrid::with_max_spacing(&p, 3.0, p.bandwidth.min(w.omega) / 4.0)?;
    let ap = ApertureGeometry::new(&p);
    let refl = Reflectivity::point(Point::ORIGIN, 1.0)?;
    let d = synthesize_data(&p, &refl, &freqs, &ap, &TravelTimeRealization::zeros(ap.len()), None)?;
    let bp = Backprojector::new(&d, &p);
    let ko = p.omega_o / p.c;
    let rc = p.c / p.bandwidth;
    let cq = PI * p.range / (p.aperture * ko);
    let offsets = Grid2::new(Axis::centered(0.0, rc / 1.6, 45), Axis::centered(0.0, cq / 5.0, 25));
    let centers = Grid2::new(Axis::centered(0.0, rc / 1.6, 25), Axis::centered(0.0, 0.4 * cq, 13));
    let h = hcint_field(&two_point_cint(&bp, &centers, &offsets, &w)?);
    let carrier = 2.0 * ko;
    let spec = hcint_spectrum(&h, (55, 25), carrier)?;
    let (bpar, bperp) = (p.bandwidth / p.c, p.aperture * ko / p.range);
    let s0 = spec.get(spec.kpar.nearest(0.0), spec.kperp.nearest(0.0)).re;
    let mut worst: f64 = 0.0;
    for i in 0..spec.kpar.count {
        for j in 0..spec.kperp.count {
            let (kp, kq) = (spec.kpar.coord(i), spec.kperp.coord(j));
            if kp.abs() <= bpar + 1e-9 && kq.abs() <= bperp + 1e-9 {
                let env = (-(kp / bpar).powi(2) / 2.0 - (kq / bperp).powi(2) / 2.0).exp();
                worst = worst.max((spec.get(i, j).re / s0 - env).abs() / env);
            }
        }
    }
    let mut dft = 0.0;
    if with_dft {
        let area = offsets.par.step * offsets.perp.step;
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..spec.kpar.count {
            for j in 0..spec.kperp.count {
                let (kp, kq) = (spec.kpar.coord(i), spec.kperp.coord(j));
                let mut acc = Complex64::new(0.0, 0.0);
                for o in 0..offsets.len() {
                    let y = offsets.point(o);
                    acc += h.values[o] * Complex64::from_polar(1.0, carrier * y.par - kp * y.par - kq * y.perp);
                }
                acc *= area;
                err = err.max((acc - spec.get(i, j)).norm());
                scale = scale.max(acc.norm());
            }
        }
        dft = err / scale;
    }
    Ok(EnvelopeCheck { worst, dft })
}

fn criterion6() -> Result<Outcome> {
    let main = envelope_check(C6_BANDWIDTH_RATIO, true)?;
    let wide = envelope_check(0.2, false)?;
    Ok(Outcome {
        pass: main.worst < C6_ENVELOPE_TOL && main.dft < C6_DFT_TOL,
        detail: format!(
            "B/omega_o = {C6_BANDWIDTH_RATIO}: worst in-band envelope deviation {:.1}%, FFT vs DFT {:.1e}; diagnostic at B/omega_o = 0.2: {:.1}%",
            100.0 * main.worst,
            main.dft,
            100.0 * wide.worst
        ),
    })
}

struct Recovery {
    peaks: usize,
    cells: Option<f64>,
    spread: Option<f64>,
}

impl Recovery {
    fn ok(&self, cells: f64) -> bool {
        self.peaks == 4 && self.cells.is_some_and(|c| c <= cells)
    }

    fn describe(&self) -> String {
        match self.cells {
            Some(c) => format!("{:.2} cells", c),
            None => format!("{} peaks", self.peaks),
        }
    }
}

fn recover(sc: &Scenario, field: &HcintField, init_seed: u64, deflate: Option<f64>) -> Result<Recovery> {
    let opts = RetrievalOptions { init_seed, deflate, ..Default::default() };
    let r = reconstruct(sc, field, &opts)?;
    Ok(Recovery {
        peaks: r.peaks.len(),
        cells: r.matched.map(|m| m.max_error_cells),
        spread: r.matched.map(|m| m.amplitude_spread),
    })
}

fn figure_field(figure: u8, seed: u64, clean: bool) -> Result<(Scenario, HcintField)> {
    let sc = Scenario::new(figure_config(figure, seed)?)?;
    let data = if clean { sc.clean_data(0)? } else { sc.data(0)? };
    let bp = Backprojector::new(&data, &sc.params);
    let field = hcint_products(&sc, &bp)?.field;
    Ok((sc, field))
}

fn criterion7() -> Result<Outcome> {
    let t = Instant::now();
    let (sc, field) = figure_field(3, 0, false)?;
    let hom = recover(&sc, &field, 0, None)?;
    let spread = hom.spread.unwrap_or(f64::INFINITY);
    let hom_ok = hom.ok(C7_HOMOGENEOUS_CELLS) && spread < C7_SPREAD_MAX;
    let mut wins = 0;
    let mut runs = Vec::new();
    for &s in &STRONG_SEEDS {
        let (sc, field) = figure_field(4, s, false)?;
        let r = recover(&sc, &field, s, None)?;
        wins += r.ok(C7_STRONG_CELLS) as usize;
        runs.push(format!("seed {s}: {}", r.describe()));
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(Outcome {
        pass: hom_ok && majority(wins) && secs < C7_MAX_SECONDS,
        detail: format!(
            "homogeneous: {} peaks, {}, spread {:.3}; strong (omega_o tau = 6 pi, 20% noise): {wins}/{} within {C7_STRONG_CELLS} cells [{}]",
            hom.peaks,
            hom.describe(),
            spread,
            STRONG_SEEDS.len(),
            runs.join(", ")
        ),
    })
}

fn criterion8() -> Result<Outcome> {
    // noise-only speckle
    let mut c = figure_config(4, 8)?;
    c.physical.sigma = 0.0;
    c.reflectivity = Reflectivity::default();
    c.noise = NoiseConfig { fraction: 0.0, sigma_w: Some(1.0) };
    let sc = Scenario::new(c)?;
    let p = &sc.params;
    let ko = p.omega_o / p.c;
    let pred = (p.c / p.bandwidth / 2f64.sqrt(), p.range / (ko * p.aperture));
    let imgs = noise_images(&sc, &scaled_grid(pred, 3.0, 7.0), C8_NOISE_IMAGES)?;
    let (rr, rx) = speckle_radii(&imgs)?;
    let radii_ok = rel(rr, pred.0) < C8_RADIUS_TOL && rel(rx, pred.1) < C8_RADIUS_TOL;

    let mut enhanced = Vec::new();
    let mut wins = 0;
    let mut plain_wins = 0;
    let mut runs = Vec::new();
    for &s in &STRONG_SEEDS {
        let (sc, noisy) = figure_field(5, s, false)?;
        let (_, clean) = figure_field(5, s, true)?;
        let z = noisy.zero_offset();
        enhanced.push(noisy.values[z].norm() / clean.values[z].norm());
        let plain = recover(&sc, &noisy, s, None)?;
        let defl = recover(&sc, &noisy, s, Some(C8_DEFLATE))?;
        plain_wins += plain.ok(C7_STRONG_CELLS) as usize;
        wins += defl.ok(C7_STRONG_CELLS) as usize;
        runs.push(format!("seed {s}: x{:.2}, {} -> {}", enhanced.last().unwrap(), plain.describe(), defl.describe()));
    }
    let enhanced_count = enhanced.iter().filter(|&&r| r > C8_ENHANCEMENT_MIN).count();
    let enh_ok = majority(enhanced_count);
    Ok(Outcome {
        pass: radii_ok && enh_ok && majority(wins),
        detail: format!(
            "speckle radii ({rr:.3}, {rx:.3}) vs ((c/B)/sqrt2, L/(k_o a)) = ({:.3}, {:.3}); quoted lambda_o L/a = {:.3}; central peak enhancement > {C8_ENHANCEMENT_MIN} in {enhanced_count}/{n}; recovery within {C7_STRONG_CELLS} cells {plain_wins}/{n} without and {wins}/{n} with deflation {C8_DEFLATE} [{}]",
            pred.0,
            pred.1,
            2.0 * PI * p.range / (ko * p.aperture),
            runs.join(", "),
            n = STRONG_SEEDS.len()
        ),
    })
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn cbits(v: &[Complex64]) -> Vec<u64> {
    v.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
}

/// Bit patterns of every stage on a reduced strong-medium scenario.
fn pipeline_fingerprint() -> Result<Vec<(&'static str, Vec<u64>)>> {
    let mut c = figure_config(4, 7)?;
    c.physical.intervals = 30;
    if let Some(g) = c.grids.centers.as_mut() {
        g.par.count = 11;
        g.perp.count = 5;
    }
    c.grids.image.par.count = 41;
    c.grids.image.perp.count = 21;
    let sc = Scenario::new(c)?;
    let tt = sc.travel_times(0);
    let data = sc.data(0)?;
    let bp = Backprojector::new(&data, &sc.params);
    let sar = sar_image(&bp, &sc.image_grid);
    let cint = cint_image(&bp, &sc.image_grid, &sc.window)?;
    let prod = hcint_products(&sc, &bp)?;
    let rec = reconstruct(&sc, &prod.field, &RetrievalOptions { iterations: 200, ..Default::default() })?;
    let small = Grid2::new(Axis::centered(0.0, 1.0, 5), Axis::centered(0.0, 2.0, 5));
    let ens = run_monte_carlo_on(&sc, Functional::Cint, &small, 10)?;
    let peaks: Vec<f64> = rec.peaks.iter().flat_map(|p| [p.par, p.perp, p.value]).collect();
    Ok(vec![
        ("travel times", bits(&tt.values)),
        ("data", cbits(&data.values)),
        ("SAR", bits(&sar.values)),
        ("CINT", bits(&cint.values)),
        ("two-point", cbits(&prod.two_point.values)),
        ("HCINT", cbits(&prod.field.values)),
        ("spectrum", cbits(&rec.spectrum.values)),
        ("modulus", bits(&rec.target.values)),
        ("retrieval", bits(&rec.retrieval.rho_est)),
        ("peaks", bits(&peaks)),
        ("ensemble mean", bits(&ens.mean)),
        ("ensemble variance", bits(&ens.variance)),
    ])
}

fn criterion9() -> Result<Outcome> {
    let pool = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| hcint::Error::Internal(e.to_string()))
    };
    let a = pool(8)?.install(pipeline_fingerprint)?;
    let b = pool(8)?.install(pipeline_fingerprint)?;
    let c = pool(1)?.install(pipeline_fingerprint)?;
    let mismatched: Vec<&str> = a
        .iter()
        .zip(&b)
        .zip(&c)
        .filter(|((x, y), z)| x.1 != y.1 || x.1 != z.1)
        .map(|((x, _), _)| x.0)
        .collect();
    Ok(Outcome {
        pass: mismatched.is_empty(),
        detail: if mismatched.is_empty() {
            format!("{} stages bit-identical across repeat runs and 1 vs 8 workers", a.len())
        } else {
            format!("mismatched stages: {}", mismatched.join(", "))
        },
    })
}

fn main() {
    let t = Instant::now();
    let mut results = Vec::new();
    results.push(run(1, "moment oracle", criterion1));
    results.push(run(2, "SAR PSF", criterion2));
    // criterion 4 reuses the criterion 3 ensemble; its time is included there
    let mut c4 = None;
    results.push(run(3, "CINT blur law", || {
        let (a, b) = criteria3_4()?;
        c4 = Some(b);
        Ok(a)
    }));
    let c4_alone = selected(4) && !selected(3);
    results.push(run(4, "statistical stability", || match c4 {
        Some(o) => Ok(o),
        None if c4_alone => Ok(criteria3_4()?.1),
        None => Err(hcint::Error::Internal("criterion 3 ensemble failed".into())),
    }));
    results.push(run(5, "two-point CINT correctness", criterion5));
    results.push(run(6, "HCINT spectrum fidelity", criterion6));
    results.push(run(7, "end-to-end reconstruction", criterion7));
    results.push(run(8, "noise floor", criterion8));
    results.push(run(9, "determinism", criterion9));
    let results: Vec<bool> = results.into_iter().flatten().collect();
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed in {:.0} s", results.len(), t.elapsed().as_secs_f64());
    if passed < results.len() && std::env::var("HCINT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
