use hcint::forward::{synthesize_data, NoiseSpec};
use hcint::imaging::*;
use hcint::io;
use hcint::medium::{sample_travel_times, MediumStats};
use hcint::rng::RealizationKey;
use hcint::scene::*;

fn noisy_data() -> (PhysicalParams, hcint::forward::DataMatrix) {
    let p = PhysicalParams::nondimensional(0.2, 100.0, 20.0, 8, 0.06, 100.0);
    let f = FrequencyGrid::new(&p, 3.0, 31).unwrap();
    let a = ApertureGeometry::new(&p);
    let tt = sample_travel_times(&a, &MediumStats::new(&p), RealizationKey::new(5, 2)).unwrap();
    let refl = Reflectivity::point(Point::new(0.2, -0.3), 1.0).unwrap();
    let noise = NoiseSpec { sigma_w: 0.3, key: RealizationKey::new(5, 2) };
    (p.clone(), synthesize_data(&p, &refl, &f, &a, &tt, Some(noise)).unwrap())
}

#[test]
fn data_matrix_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (p, d) = noisy_data();
    let stem = dir.path().join("data");
    io::write_data_matrix(&stem, &d, Some(&p)).unwrap();
    let (back, params) = io::read_data_matrix(&stem).unwrap();
    assert_eq!(params, Some(p));
    assert_eq!(back.freqs, d.freqs);
    assert_eq!(back.aperture, d.aperture);
    assert_eq!(back.provenance, d.provenance);
    let bits = |v: &[hcint::Complex64]| v.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
    assert_eq!(bits(&back.values), bits(&d.values));
}

#[test]
fn hcint_and_spectrum_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (p, d) = noisy_data();
    let bp = Backprojector::new(&d, &p);
    let centers = Grid2::new(Axis::centered(0.0, 0.5, 3), Axis::centered(0.0, 0.5, 3));
    let offsets = Grid2::new(Axis::centered(0.0, 0.4, 5), Axis::centered(0.0, 0.6, 3));
    let h = hcint_field(&two_point_cint(&bp, &centers, &offsets, &WindowParams::new(4.0, 0.2)).unwrap());
    io::write_hcint_raw(&dir.path().join("h"), &h).unwrap();
    assert_eq!(io::read_hcint_raw(&dir.path().join("h")).unwrap(), h);
    let s = hcint_spectrum(&h, (8, 4), 12.0).unwrap();
    io::write_spectrum_raw(&dir.path().join("s"), &s).unwrap();
    assert_eq!(io::read_spectrum_raw(&dir.path().join("s")).unwrap(), s);
}

#[test]
fn mismatched_sidecar_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (p, d) = noisy_data();
    let stem = dir.path().join("data");
    io::write_data_matrix(&stem, &d, Some(&p)).unwrap();
    let raw = stem.with_extension("f64");
    let bytes = std::fs::read(&raw).unwrap();
    std::fs::write(&raw, &bytes[..bytes.len() - 16]).unwrap();
    assert!(io::read_data_matrix(&stem).is_err());
}
