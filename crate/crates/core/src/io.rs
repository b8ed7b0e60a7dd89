//! File formats: raw little-endian float64 with a JSON sidecar for lossless
//! storage, CSV tables and 8-bit graymaps (P5) for quick looks.
//!
//! A raw record `stem` is the pair `stem.json` + `stem.f64`. Complex values
//! are stored interleaved `(re, im)`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::forward::{DataMatrix, Provenance};
use crate::imaging::{Axis, Grid2, HcintField, ImageGrid, SpectrumGrid, TwoPointField};
use crate::medium::TravelTimeRealization;
use crate::scene::{ApertureGeometry, FrequencyGrid, PhysicalParams};
use crate::spectral::{Peak, RetrievalResult};
use crate::{Error, Result};

fn suffixed(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

pub fn write_f64_raw(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_f64_raw(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Config(format!("{} is not a float64 file", path.display())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn interleave(values: &[Complex64]) -> Vec<f64> {
    values.iter().flat_map(|v| [v.re, v.im]).collect()
}

fn deinterleave(raw: &[f64]) -> Vec<Complex64> {
    raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

fn read_raw_checked(stem: &Path, expected: usize) -> Result<Vec<f64>> {
    let raw = read_f64_raw(&suffixed(stem, ".f64"))?;
    if raw.len() != expected {
        return Err(Error::Config(format!(
            "{}: expected {expected} values, found {}",
            stem.display(),
            raw.len()
        )));
    }
    Ok(raw)
}

#[derive(Debug, Serialize, Deserialize)]
struct DataSidecar {
    layout: String,
    rows: usize,
    cols: usize,
    freqs: FrequencyGrid,
    aperture: ApertureGeometry,
    provenance: Provenance,
    params: Option<PhysicalParams>,
}

const DATA_LAYOUT: &str = "complex128 little-endian interleaved (re, im), frequency-major";

pub fn write_data_matrix(stem: &Path, data: &DataMatrix, params: Option<&PhysicalParams>) -> Result<()> {
    let side = DataSidecar {
        layout: DATA_LAYOUT.into(),
        rows: data.rows(),
        cols: data.cols(),
        freqs: data.freqs.clone(),
        aperture: data.aperture.clone(),
        provenance: data.provenance,
        params: params.cloned(),
    };
    write_json(&suffixed(stem, ".json"), &side)?;
    write_f64_raw(&suffixed(stem, ".f64"), &interleave(&data.values))
}

pub fn read_data_matrix(stem: &Path) -> Result<(DataMatrix, Option<PhysicalParams>)> {
    let side: DataSidecar = read_json(&suffixed(stem, ".json"))?;
    if side.rows != side.freqs.len() || side.cols != side.aperture.len() {
        return Err(Error::Config("data sidecar dimensions disagree with its grids".into()));
    }
    let raw = read_raw_checked(stem, 2 * side.rows * side.cols)?;
    let data = DataMatrix {
        values: deinterleave(&raw),
        freqs: side.freqs,
        aperture: side.aperture,
        provenance: side.provenance,
    };
    Ok((data, side.params))
}

#[derive(Debug, Serialize, Deserialize)]
struct GridSidecar {
    layout: String,
    grid: Grid2,
}

pub fn write_image_raw(stem: &Path, img: &ImageGrid) -> Result<()> {
    let layout = "float64 little-endian, range-major".to_string();
    write_json(&suffixed(stem, ".json"), &GridSidecar { layout, grid: img.grid })?;
    write_f64_raw(&suffixed(stem, ".f64"), &img.values)
}

pub fn read_image_raw(stem: &Path) -> Result<ImageGrid> {
    let side: GridSidecar = read_json(&suffixed(stem, ".json"))?;
    let values = read_raw_checked(stem, side.grid.len())?;
    Ok(ImageGrid { grid: side.grid, values })
}

pub fn write_image_csv(path: &Path, img: &ImageGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "range,cross_range,value")?;
    for (idx, v) in img.values.iter().enumerate() {
        let y = img.grid.point(idx);
        writeln!(w, "{:e},{:e},{:e}", y.par, y.perp, v)?;
    }
    w.flush()?;
    Ok(())
}

/// 8-bit graymap after min-max normalization. Cross-range runs left to
/// right and range bottom to top.
pub fn write_pgm(path: &Path, img: &ImageGrid) -> Result<()> {
    let (np, nq) = (img.grid.par.count, img.grid.perp.count);
    let lo = img.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{nq} {np}\n255\n")?;
    for i in (0..np).rev() {
        let row: Vec<u8> = (0..nq).map(|j| ((img.get(i, j) - lo) / span * 255.0).round() as u8).collect();
        w.write_all(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Raw, CSV and graymap versions of one image under `dir/name.*`.
pub fn write_image_set(dir: &Path, name: &str, img: &ImageGrid) -> Result<()> {
    write_image_raw(&dir.join(name), img)?;
    write_image_csv(&dir.join(format!("{name}.csv")), img)?;
    write_pgm(&dir.join(format!("{name}.pgm")), img)
}

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumSidecar {
    layout: String,
    kpar: Axis,
    kperp: Axis,
    carrier: f64,
}

pub fn write_spectrum_raw(stem: &Path, s: &SpectrumGrid) -> Result<()> {
    let side = SpectrumSidecar {
        layout: "complex128 little-endian interleaved (re, im), k_range-major".into(),
        kpar: s.kpar,
        kperp: s.kperp,
        carrier: s.carrier,
    };
    write_json(&suffixed(stem, ".json"), &side)?;
    write_f64_raw(&suffixed(stem, ".f64"), &interleave(&s.values))
}

pub fn read_spectrum_raw(stem: &Path) -> Result<SpectrumGrid> {
    let side: SpectrumSidecar = read_json(&suffixed(stem, ".json"))?;
    let raw = read_raw_checked(stem, 2 * side.kpar.count * side.kperp.count)?;
    Ok(SpectrumGrid { kpar: side.kpar, kperp: side.kperp, carrier: side.carrier, values: deinterleave(&raw) })
}

pub fn write_spectrum_csv(path: &Path, s: &SpectrumGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k_range,k_cross_range,re,im")?;
    for i in 0..s.kpar.count {
        for j in 0..s.kperp.count {
            let v = s.get(i, j);
            writeln!(w, "{:e},{:e},{:e},{:e}", s.kpar.coord(i), s.kperp.coord(j), v.re, v.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_hcint_raw(stem: &Path, h: &HcintField) -> Result<()> {
    let layout = "complex128 little-endian interleaved (re, im), offset range-major".to_string();
    write_json(&suffixed(stem, ".json"), &GridSidecar { layout, grid: h.offsets })?;
    write_f64_raw(&suffixed(stem, ".f64"), &interleave(&h.values))
}

pub fn read_hcint_raw(stem: &Path) -> Result<HcintField> {
    let side: GridSidecar = read_json(&suffixed(stem, ".json"))?;
    let raw = read_raw_checked(stem, 2 * side.grid.len())?;
    Ok(HcintField { offsets: side.grid, values: deinterleave(&raw) })
}

#[derive(Debug, Serialize, Deserialize)]
struct TwoPointSidecar {
    layout: String,
    centers: Grid2,
    offsets: Grid2,
}

pub fn write_two_point_raw(stem: &Path, tp: &TwoPointField) -> Result<()> {
    let side = TwoPointSidecar {
        layout: "complex128 little-endian interleaved (re, im), center-major then offset".into(),
        centers: tp.centers,
        offsets: tp.offsets,
    };
    write_json(&suffixed(stem, ".json"), &side)?;
    write_f64_raw(&suffixed(stem, ".f64"), &interleave(&tp.values))
}

/// Rows `(n, x_perp_n, T_n)`.
pub fn write_travel_times_csv(path: &Path, geom: &ApertureGeometry, tt: &TravelTimeRealization) -> Result<()> {
    if tt.values.len() != geom.len() {
        return Err(Error::Config("travel-time realization does not match the aperture".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "n,x_perp,T")?;
    for (n, (x, t)) in geom.positions.iter().zip(&tt.values).enumerate() {
        writeln!(w, "{n},{x:e},{t:e}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RetrievalSidecar {
    layout: String,
    par: Axis,
    perp: Axis,
    residuals: Vec<f64>,
    iterations: usize,
    converged: bool,
    ambiguity: String,
}

pub fn write_retrieval(stem: &Path, r: &RetrievalResult) -> Result<()> {
    let side = RetrievalSidecar {
        layout: "float64 little-endian rho_est, range-major".into(),
        par: r.par,
        perp: r.perp,
        residuals: r.residuals.clone(),
        iterations: r.iterations,
        converged: r.converged,
        ambiguity: r.ambiguity.into(),
    };
    write_json(&suffixed(stem, ".json"), &side)?;
    write_f64_raw(&suffixed(stem, ".f64"), &r.rho_est)
}

pub fn write_peaks_csv(path: &Path, peaks: &[Peak]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "range,cross_range,value")?;
    for p in peaks {
        writeln!(w, "{:e},{:e},{:e}", p.par, p.perp, p.value)?;
    }
    w.flush()?;
    Ok(())
}
