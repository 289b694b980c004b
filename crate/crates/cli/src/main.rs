//! `mewls`: generate synthetic data, fit MEWLS spline surfaces, run
//! convergence diagnostics, restore images and analyse weight fields.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Generator, Layout, Reference, RunConfig, ScheduleKind};
use error::CliError;

#[derive(Parser)]
#[command(name = "mewls", version, about = "Maximum-entropy weighted least-squares spline fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset (Franke scatter, sphere grid or crack phantom).
    Generate(GenerateArgs),
    /// Fit a surface by continuation and write the model, weights and reports.
    Fit(FitArgs),
    /// Spectral radius of the weight-block iteration matrix and iteration counts per stage.
    Diagnose(DiagnoseArgs),
    /// Fit an image, flag low-weight pixels and replace them by the model.
    Restore(RestoreArgs),
    /// Isolines of a weight field written by `restore`.
    Contours(ContoursArgs),
    /// Box-counting dimension of a mask, or of the boundary of a thresholded weight field.
    FractalDim(FractalArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: $MEWLS_OUT_DIR, else ./mewls-out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DataArgs {
    /// CSV dataset to fit instead of a generator.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    layout: Option<Layout>,
    #[arg(long, value_enum)]
    generator: Option<Generator>,
    /// Cross-validate the fit against this function.
    #[arg(long, value_enum)]
    reference: Option<Reference>,
}

#[derive(Args)]
struct SplineArgs {
    /// Control rows along u (free rows for closed surfaces).
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    /// Periodic along u.
    #[arg(long)]
    closed_u: Option<bool>,
}

#[derive(Args)]
struct SolverArgs {
    /// Terminal reduction factor mse_uw / target.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleKind>,
    /// Explicit comma-separated reduction factors.
    #[arg(long, value_delimiter = ',')]
    reductions: Option<Vec<f64>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Generator,
    #[command(flatten)]
    common: CommonArgs,
    /// Franke: clean sample count.
    #[arg(long)]
    n_clean: Option<usize>,
    /// Franke: outlier count.
    #[arg(long)]
    n_outliers: Option<usize>,
    /// Franke or phantom: noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Sphere: fraction of grid points pushed off the sphere.
    #[arg(long)]
    perturb: Option<f64>,
    /// Sphere: largest radial factor.
    #[arg(long)]
    max_factor: Option<f64>,
    /// Phantom: image side in pixels.
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    spline: SplineArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    spline: SplineArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Datasets above this size are subsampled.
    #[arg(long)]
    max_points: Option<usize>,
}

#[derive(Args)]
struct RestoreArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// PNG image; without it the seeded crack phantom is used.
    #[arg(long)]
    image: Option<PathBuf>,
    #[command(flatten)]
    spline: SplineArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Pixels with weight below max / threshold-div are flagged.
    #[arg(long)]
    threshold_div: Option<f64>,
}

#[derive(Args)]
struct ContoursArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Weight CSV (`x,y,weight`) as written by `restore`.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Isoline level [default: max weight / threshold-div].
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    threshold_div: Option<f64>,
}

#[derive(Args)]
struct FractalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Binary PNG mask.
    #[arg(long, conflicts_with = "weights")]
    mask: Option<PathBuf>,
    /// Weight CSV; its thresholded mass boundary is measured.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    threshold_div: Option<f64>,
}

fn base_config(common: &CommonArgs, command: &str) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.check_command(command)?;
    cfg.command = Some(command.to_string());
    if let Some(o) = &common.out {
        cfg.output_dir = Some(o.clone());
    }
    if let Some(s) = common.seed {
        cfg.data.seed = Some(s);
    }
    Ok(cfg)
}

fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
    if v.is_some() {
        slot.clone_from(v);
    }
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.data.path, &self.data);
        set(&mut cfg.data.layout, &self.layout);
        set(&mut cfg.data.generator, &self.generator);
        set(&mut cfg.data.reference, &self.reference);
    }
}

impl SplineArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.spline.n1, &self.n1);
        set(&mut cfg.spline.n2, &self.n2);
        set(&mut cfg.spline.degree, &self.degree);
        set(&mut cfg.spline.closed_u, &self.closed_u);
    }
}

impl SolverArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.solver.r, &self.r);
        set(&mut cfg.solver.schedule, &self.schedule);
        set(&mut cfg.solver.reductions, &self.reductions);
        set(&mut cfg.solver.tol, &self.tol);
        set(&mut cfg.solver.max_iters, &self.max_iters);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => {
            let mut cfg = base_config(&a.common, "generate")?;
            cfg.data.generator = Some(a.kind);
            match a.kind {
                Generator::Franke => {
                    let mut f = cfg.franke_config();
                    f.n_clean = a.n_clean.unwrap_or(f.n_clean);
                    f.n_outliers = a.n_outliers.unwrap_or(f.n_outliers);
                    f.noise_sigma = a.sigma.unwrap_or(f.noise_sigma);
                    cfg.franke = Some(f);
                }
                Generator::Sphere => {
                    let mut s = cfg.sphere_config();
                    s.perturb_fraction = a.perturb.unwrap_or(s.perturb_fraction);
                    s.max_radial_factor = a.max_factor.unwrap_or(s.max_radial_factor);
                    cfg.sphere = Some(s);
                }
                Generator::Phantom => {
                    let mut p = cfg.phantom_config();
                    p.size = a.size.unwrap_or(p.size);
                    p.noise_sigma = a.sigma.unwrap_or(p.noise_sigma);
                    cfg.phantom = Some(p);
                }
            }
            commands::generate(cfg)
        }
        Command::Fit(a) => {
            let mut cfg = base_config(&a.common, "fit")?;
            a.data.apply(&mut cfg);
            a.spline.apply(&mut cfg);
            a.solver.apply(&mut cfg);
            commands::fit(cfg)
        }
        Command::Diagnose(a) => {
            let mut cfg = base_config(&a.common, "diagnose")?;
            a.data.apply(&mut cfg);
            a.spline.apply(&mut cfg);
            a.solver.apply(&mut cfg);
            set(&mut cfg.diagnose.max_points, &a.max_points);
            commands::diagnose(cfg)
        }
        Command::Restore(a) => {
            let mut cfg = base_config(&a.common, "restore")?;
            set(&mut cfg.data.image, &a.image);
            a.spline.apply(&mut cfg);
            a.solver.apply(&mut cfg);
            set(&mut cfg.image.threshold_div, &a.threshold_div);
            commands::restore(cfg)
        }
        Command::Contours(a) => {
            let mut cfg = base_config(&a.common, "contours")?;
            set(&mut cfg.image.weights, &a.weights);
            set(&mut cfg.image.level, &a.level);
            set(&mut cfg.image.threshold_div, &a.threshold_div);
            commands::contours(cfg)
        }
        Command::FractalDim(a) => {
            let mut cfg = base_config(&a.common, "fractal-dim")?;
            set(&mut cfg.image.mask, &a.mask);
            set(&mut cfg.image.weights, &a.weights);
            set(&mut cfg.image.level, &a.level);
            set(&mut cfg.image.threshold_div, &a.threshold_div);
            commands::fractal_dim(cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mewls: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
