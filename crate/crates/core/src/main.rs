use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hcint::harness::{
    self, hcint_magnitude, hcint_products, reconstruct, run_monte_carlo, Config, FigureOutput, Functional,
    Reconstruction, RetrievalOptions, Scenario,
};
use hcint::imaging::{cint_image, hcint_spectrum, sar_image, Backprojector};
use hcint::io;
use hcint::{Error, Result};

/// Default output directory, overridden by `--out`.
const OUT_ENV: &str = "HCINT_OUT_DIR";

#[derive(Parser)]
#[command(name = "hcint", version, about = "SAR, CINT and HCINT imaging through random media")]
struct Cli {
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: $HCINT_OUT_DIR, then ./hcint-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ImageKind {
    Sar,
    Cint,
    TwoPoint,
    Hcint,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StatKind {
    Sar,
    Cint,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one data matrix.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    /// Form images from a data matrix.
    Image {
        #[arg(long)]
        config: PathBuf,
        /// Data stem written by `simulate`; simulated from the config if absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ImageKind::All)]
        kind: ImageKind,
    },
    /// Modulus estimate and phase retrieval from an HCINT field.
    Retrieve {
        #[arg(long)]
        config: PathBuf,
        /// HCINT field stem written by `image`.
        #[arg(long)]
        hcint: PathBuf,
        /// Scales the central HCINT sample by 1 - FRACTION first.
        #[arg(long, value_name = "FRACTION")]
        deflate_peak: Option<f64>,
        #[arg(long, default_value_t = harness::DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long, default_value_t = harness::DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long)]
        init_seed: Option<u64>,
    },
    /// Monte Carlo ensemble statistics of SAR or CINT.
    Stats {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = StatKind::Cint)]
        functional: StatKind,
        #[arg(long, default_value_t = harness::DEFAULT_REALIZATIONS)]
        realizations: usize,
    },
    /// Predicted against measured widths, variations and noise radii.
    TheoryCheck {
        /// Defaults to the figure 4 parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        realizations: usize,
    },
    /// End-to-end recipe of figure 2, 3, 4 or 5.
    ReproduceFigure {
        #[arg(value_parser = clap::value_parser!(u8).range(2..=5))]
        figure: u8,
        #[arg(long, value_name = "FRACTION")]
        deflate_peak: Option<f64>,
    },
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("hcint-out"));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load(path: &Path, seed: Option<u64>) -> Result<Config> {
    let mut c = Config::load(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        c.seeds.seed = s;
    }
    Ok(c)
}

fn scenario(path: &Path, seed: Option<u64>) -> Result<Scenario> {
    let sc = Scenario::new(load(path, seed)?)?;
    for w in &sc.warnings {
        eprintln!("warning: {w}");
    }
    Ok(sc)
}

#[derive(Serialize)]
struct ReconstructionSummary<'a> {
    iterations: usize,
    converged: bool,
    final_residual: Option<f64>,
    ambiguity: &'a str,
    peaks: &'a [hcint::spectral::Peak],
    matched: Option<hcint::spectral::ConfigurationMatch>,
}

fn write_reconstruction(dir: &Path, prefix: &str, rec: &Reconstruction) -> Result<()> {
    io::write_spectrum_raw(&dir.join(format!("{prefix}spectrum")), &rec.spectrum)?;
    io::write_spectrum_csv(&dir.join(format!("{prefix}spectrum.csv")), &rec.spectrum)?;
    io::write_retrieval(&dir.join(format!("{prefix}retrieval")), &rec.retrieval)?;
    io::write_image_set(dir, &format!("{prefix}estimate"), &rec.estimate)?;
    io::write_peaks_csv(&dir.join(format!("{prefix}peaks.csv")), &rec.peaks)?;
    let summary = ReconstructionSummary {
        iterations: rec.retrieval.iterations,
        converged: rec.retrieval.converged,
        final_residual: rec.retrieval.residuals.last().copied(),
        ambiguity: rec.retrieval.ambiguity,
        peaks: &rec.peaks,
        matched: rec.matched,
    };
    io::write_json(&dir.join(format!("{prefix}summary.json")), &summary)
}

fn print_peaks(label: &str, rec: &Reconstruction) {
    println!("{label}: E_F = {:.3e} after {} iterations", rec.retrieval.residuals.last().unwrap_or(&f64::NAN), rec.retrieval.iterations);
    for p in &rec.peaks {
        println!("  peak range {:9.4}  cross-range {:9.4}  value {:.4}", p.par, p.perp, p.value);
    }
    if let Some(m) = rec.matched {
        println!(
            "  match: max error {:.3} cells, reflected {}, amplitude spread {:.3}",
            m.max_error_cells, m.reflected, m.amplitude_spread
        );
    }
}

fn write_figure(dir: &Path, fig: &FigureOutput) -> Result<()> {
    io::write_json(&dir.join("config.json"), &fig.config)?;
    io::write_image_set(dir, "object", &fig.object)?;
    let truth: Vec<hcint::spectral::Peak> = fig
        .config
        .reflectivity
        .scatterers
        .iter()
        .map(|s| hcint::spectral::Peak { par: s.position.par, perp: s.position.perp, value: s.amplitude })
        .collect();
    io::write_peaks_csv(&dir.join("object_points.csv"), &truth)?;
    for (name, img) in [("sar", &fig.sar), ("cint", &fig.cint), ("hcint", &fig.hcint)] {
        if let Some(img) = img {
            io::write_image_set(dir, name, img)?;
        }
    }
    if let Some(rec) = &fig.reconstruction {
        write_reconstruction(dir, "", rec)?;
    }
    if let Some((h, rec)) = &fig.modified {
        io::write_image_set(dir, "hcint_modified", h)?;
        write_reconstruction(dir, "modified_", rec)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { config, realization } => {
            let sc = scenario(config, cli.seed)?;
            let dir = out_dir(cli)?;
            let data = sc.data(*realization)?;
            io::write_data_matrix(&dir.join("data"), &data, Some(&sc.params))?;
            io::write_travel_times_csv(&dir.join("travel_times.csv"), &sc.aperture, &sc.travel_times(*realization))?;
            io::write_json(&dir.join("config.json"), &sc.config)?;
            println!("wrote {} x {} data matrix to {}", data.rows(), data.cols(), dir.display());
        }
        Command::Image { config, data, kind } => {
            let sc = scenario(config, cli.seed)?;
            let dir = out_dir(cli)?;
            let data = match data {
                Some(stem) => io::read_data_matrix(stem)?.0,
                None => sc.data(0)?,
            };
            let bp = Backprojector::new(&data, &sc.params);
            let all = *kind == ImageKind::All;
            if all || *kind == ImageKind::Sar {
                io::write_image_set(&dir, "sar", &sar_image(&bp, &sc.image_grid))?;
            }
            if all || *kind == ImageKind::Cint {
                io::write_image_set(&dir, "cint", &cint_image(&bp, &sc.image_grid, &sc.window)?)?;
            }
            if all || matches!(kind, ImageKind::TwoPoint | ImageKind::Hcint) {
                let prod = hcint_products(&sc, &bp)?;
                if all || *kind == ImageKind::TwoPoint {
                    io::write_two_point_raw(&dir.join("two_point"), &prod.two_point)?;
                }
                if all || *kind == ImageKind::Hcint {
                    io::write_hcint_raw(&dir.join("hcint_field"), &prod.field)?;
                    io::write_image_set(&dir, "hcint", &hcint_magnitude(&prod.field))?;
                    let ko = sc.params.wavenumber(sc.params.omega_o);
                    let spec = hcint_spectrum(&prod.field, sc.fft_size()?, 2.0 * ko)?;
                    io::write_spectrum_raw(&dir.join("spectrum"), &spec)?;
                    io::write_spectrum_csv(&dir.join("spectrum.csv"), &spec)?;
                }
            }
            println!("wrote images to {}", dir.display());
        }
        Command::Retrieve { config, hcint, deflate_peak, iterations, tolerance, init_seed } => {
            let sc = scenario(config, cli.seed)?;
            let dir = out_dir(cli)?;
            let field = io::read_hcint_raw(hcint)?;
            let opts = RetrievalOptions {
                iterations: *iterations,
                tolerance: *tolerance,
                init_seed: init_seed.unwrap_or(sc.config.seeds.init_seed),
                deflate: *deflate_peak,
            };
            let rec = reconstruct(&sc, &field, &opts)?;
            write_reconstruction(&dir, "", &rec)?;
            print_peaks("estimate", &rec);
        }
        Command::Stats { config, functional, realizations } => {
            let sc = scenario(config, cli.seed)?;
            let dir = out_dir(cli)?;
            let f = match functional {
                StatKind::Sar => Functional::Sar,
                StatKind::Cint => Functional::Cint,
            };
            let rep = run_monte_carlo(&sc, f, *realizations)?;
            io::write_json(&dir.join("ensemble.json"), &rep)?;
            io::write_image_set(&dir, "mean", &rep.mean_image())?;
            io::write_image_set(&dir, "cv", &rep.cv_image())?;
            println!(
                "{} realizations, omega_o tau = {:.4}, peak coefficient of variation {}",
                rep.realizations,
                rep.regime.omega_o_tau,
                rep.peak_cv().map_or("undefined".into(), |v| format!("{v:.4}"))
            );
        }
        Command::TheoryCheck { config, realizations } => {
            let c = match config {
                Some(path) => load(path, cli.seed)?,
                None => harness::figure_config(4, cli.seed.unwrap_or(0))?,
            };
            let rows = harness::theory_check(&c, *realizations)?;
            println!("{:<44} {:>12} {:>12} {:>8}", "quantity", "predicted", "measured", "ratio");
            for r in &rows {
                println!("{:<44} {:>12.5} {:>12.5} {:>8.3}", r.quantity, r.predicted, r.measured, r.measured / r.predicted);
            }
        }
        Command::ReproduceFigure { figure, deflate_peak } => {
            let dir = out_dir(cli)?.join(format!("figure{figure}"));
            std::fs::create_dir_all(&dir)?;
            let fig = harness::reproduce_figure(*figure, cli.seed.unwrap_or(0), *deflate_peak)?;
            write_figure(&dir, &fig)?;
            if let Some(rec) = &fig.reconstruction {
                print_peaks("estimate", rec);
            }
            if let Some((_, rec)) = &fig.modified {
                print_peaks("estimate with deflated central peak", rec);
            }
            println!("wrote figure {figure} outputs to {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
