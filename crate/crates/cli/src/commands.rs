use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use mewls::bspline::{Dataset, ScatteredData, SurfaceSpec};
use mewls::data::{
    cv_mse, franke, generate_franke_dataset, generate_sphere_dataset, read_scattered_csv, read_structured_csv,
    subsample, write_flags_csv, write_scattered_csv, write_structured_csv, Reference as CvReference,
};
use mewls::diagnostics::{convergence_report, DIAGNOSTIC_MAX_POINTS};
use mewls::image::{
    box_counting_dimension, crack_phantom, mass_boundary, outlier_mask, restore_image, roi_contours,
    BinaryImage, ImageGrid, Polyline,
};
use mewls::mewls::{continuation_on, FitReport, MewlsProblem, MewlsState};

use crate::config::{Generator, Layout, Reference, RunConfig, Source};
use crate::error::CliError;

/// Output directory that records every file written, for the manifest.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Output { dir, files: vec![] })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// CSV with a header row; every record must match its length.
    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn finish(mut self, cfg: &RunConfig) -> Result<(), CliError> {
        // the output location is not part of the run's identity
        let config = RunConfig {
            output_dir: None,
            ..cfg.clone()
        };
        let manifest = Manifest {
            tool: "mewls",
            version: env!("CARGO_PKG_VERSION"),
            config: &config,
            outputs: self.files.clone(),
        };
        self.json("manifest.json", &manifest)?;
        println!("wrote {} files to {}", self.files.len(), self.dir.display());
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    outputs: Vec<String>,
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn generate(cfg: RunConfig) -> Result<(), CliError> {
    let mut out = Output::create(&cfg)?;
    match cfg.data.generator {
        Some(Generator::Franke) | None => {
            let (data, flags) = generate_franke_dataset(&cfg.franke_config())?;
            write_scattered_csv(&out.path("franke.csv"), &data)?;
            write_flags_csv(&out.path("franke_flags.csv"), &flags)?;
        }
        Some(Generator::Sphere) => {
            let sphere = generate_sphere_dataset(&cfg.sphere_config())?;
            write_structured_csv(&out.path("sphere.csv"), &sphere.data)?;
            write_flags_csv(&out.path("sphere_flags.csv"), &sphere.perturbed())?;
        }
        Some(Generator::Phantom) => {
            let ph = crack_phantom(&cfg.phantom_config())?;
            ph.corrupted.save_png(&out.path("phantom.png"))?;
            ph.truth.save_png(&out.path("phantom_truth.png"))?;
            ph.cracks.save_png(&out.path("phantom_cracks.png"))?;
        }
    }
    out.finish(&cfg)
}

/// Dataset to fit, the source kind for default grids, and the known outlier
/// flags of generated data.
fn load_dataset(cfg: &RunConfig) -> Result<(Dataset, Source, Option<Vec<bool>>), CliError> {
    if let Some(path) = &cfg.data.path {
        if cfg.data.generator.is_some() {
            return Err(CliError::Config("give either a data path or a generator, not both".into()));
        }
        let data = match cfg.data.layout.unwrap_or_default() {
            Layout::Scattered => Dataset::Scattered(read_scattered_csv(path)?),
            Layout::Structured => Dataset::Structured(read_structured_csv(path)?),
        };
        return Ok((data, Source::Scattered, None));
    }
    Ok(match cfg.data.generator.unwrap_or(Generator::Franke) {
        Generator::Franke => {
            let (data, flags) = generate_franke_dataset(&cfg.franke_config())?;
            (Dataset::Scattered(data), Source::Scattered, Some(flags))
        }
        Generator::Sphere => {
            let sphere = generate_sphere_dataset(&cfg.sphere_config())?;
            let flags = sphere.perturbed();
            (Dataset::Structured(sphere.data), Source::Sphere, Some(flags))
        }
        Generator::Phantom => {
            let ph = crack_phantom(&cfg.phantom_config())?;
            let data = mewls::image::image_to_dataset(&ph.corrupted)?;
            (Dataset::Structured(data), Source::Image, Some(ph.cracks.bits().to_vec()))
        }
    })
}

fn build_spec(cfg: &RunConfig, dim: usize) -> Result<SurfaceSpec, CliError> {
    let s = &cfg.spline;
    let (n1, n2, d) = (s.n1.unwrap_or(10), s.n2.unwrap_or(10), s.degree.unwrap_or(3));
    Ok(if s.closed_u.unwrap_or(false) {
        SurfaceSpec::closed_u(n1, n2, d, dim)?
    } else {
        SurfaceSpec::clamped(n1, n2, d, dim)?
    })
}

/// The reference function for cross-validation, if any: explicit, or implied
/// by the Franke generator.
fn reference(cfg: &RunConfig) -> Option<Reference> {
    cfg.data.reference.or(match (&cfg.data.path, cfg.data.generator) {
        (None, None | Some(Generator::Franke)) => Some(Reference::Franke),
        _ => None,
    })
}

fn franke_cv(spec: &SurfaceSpec, state: &MewlsState, grid: usize) -> Result<f64, CliError> {
    let f = |u: f64, v: f64| vec![franke(u, v)];
    Ok(cv_mse(spec, &state.net, &CvReference::Function(&f), grid)?)
}

#[derive(Serialize)]
struct Model<'a> {
    spec: &'a SurfaceSpec,
    net: &'a mewls::bspline::ControlNet,
    mu: f64,
    target_mse: f64,
    mse_uw: f64,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    mse_uw: f64,
    reductions: Vec<f64>,
    target_mse: Vec<f64>,
    weighted_mse: Vec<f64>,
    entropy: Vec<f64>,
    mu: Vec<f64>,
    iterations: Vec<usize>,
    stages: &'a [FitReport],
}

impl<'a> FitOutput<'a> {
    fn new(mse_uw: f64, stages: &'a [FitReport]) -> Self {
        FitOutput {
            mse_uw,
            reductions: stages.iter().map(|s| s.reduction).collect(),
            target_mse: stages.iter().map(|s| s.target_mse).collect(),
            weighted_mse: stages.iter().map(|s| s.weighted_mse).collect(),
            entropy: stages.iter().map(|s| s.entropy).collect(),
            mu: stages.iter().map(|s| s.mu).collect(),
            iterations: stages.iter().map(|s| s.iterations).collect(),
            stages,
        }
    }
}

#[derive(Serialize)]
struct Failure<'a> {
    stage: usize,
    reduction: f64,
    error: String,
    completed: FitOutput<'a>,
}

/// Continuation with the failure report written before the error is passed on.
fn solve(
    cfg: &RunConfig,
    problem: &MewlsProblem,
    out: &mut Output,
) -> Result<(MewlsState, Vec<FitReport>), CliError> {
    let schedule = cfg.schedule()?;
    match continuation_on(problem, &schedule) {
        Ok(r) => Ok(r),
        Err(mewls::Error::StageFailed {
            stage,
            reduction,
            source,
            last_state,
            reports,
        }) => {
            out.json(
                "failure.json",
                &Failure {
                    stage,
                    reduction,
                    error: source.to_string(),
                    completed: FitOutput::new(last_state.mse_uw, &reports),
                },
            )?;
            Err(CliError::Solver(mewls::Error::StageFailed {
                stage,
                reduction,
                source,
                last_state,
                reports,
            }))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn fit(mut cfg: RunConfig) -> Result<(), CliError> {
    let (data, source, flags) = load_dataset(&cfg)?;
    cfg.resolve_spline(source);
    cfg.resolve_solver(500.0);
    let spec = build_spec(&cfg, data.dim())?;
    let problem = MewlsProblem::new(&spec, &data)?;
    let mut out = Output::create(&cfg)?;
    let (state, reports) = solve(&cfg, &problem, &mut out)?;
    let ols = problem.ols()?;

    out.json(
        "model.json",
        &Model {
            spec: &spec,
            net: &state.net,
            mu: state.mu,
            target_mse: state.target_mse,
            mse_uw: state.mse_uw,
        },
    )?;
    let mut header = vec!["index", "u", "v", "r2", "weight"];
    if flags.is_some() {
        header.push("flag");
    }
    let rows = (0..problem.len()).map(|k| {
        let (u, v) = data.param(k);
        let mut row = vec![k.to_string(), num(u), num(v), num(state.r2[k]), num(state.weights[k])];
        if let Some(f) = &flags {
            row.push(u8::from(f[k]).to_string());
        }
        row
    });
    out.csv("weights.csv", &header, rows)?;
    out.json("report.json", &FitOutput::new(state.mse_uw, &reports))?;

    // least squares against the last stage, with cross-validation when a reference is known
    let grid = cfg.franke_config().grid_cv;
    let cv = |s: &MewlsState| -> Result<String, CliError> {
        match reference(&cfg) {
            Some(Reference::Franke) if spec.dim == 1 => franke_cv(&spec, s, grid).map(num),
            _ => Ok(String::new()),
        }
    };
    let last = reports.last().expect("schedules are nonempty");
    let summary = vec![
        vec![
            "ols".to_string(),
            "1".to_string(),
            num(ols.mse_uw),
            num(ols.mse_uw),
            "1".to_string(),
            "0".to_string(),
            num(mewls::diagnostics::entropy(&ols.weights)),
            cv(&ols)?,
        ],
        vec![
            "mewls".to_string(),
            num(last.reduction),
            num(last.target_mse),
            num(last.weighted_mse),
            last.iterations.to_string(),
            num(last.mu),
            num(last.entropy),
            cv(&state)?,
        ],
    ];
    for row in &summary {
        let short = |cell: &str| cell.parse::<f64>().map_or("-".to_string(), |x| format!("{x:.4e}"));
        println!(
            "{:<6} r={:<10} weighted MSE {}  iterations {:<4} mu {}  MSEcv {}",
            row[0],
            short(&row[1]),
            short(&row[3]),
            row[4],
            short(&row[5]),
            short(&row[7])
        );
    }
    out.csv(
        "summary.csv",
        &["method", "r", "target_mse", "weighted_mse", "iterations", "mu", "entropy", "mse_cv"],
        summary,
    )?;
    out.finish(&cfg)
}

#[derive(Serialize)]
struct DiagnoseOutput<'a> {
    points: usize,
    subsampled_from: Option<usize>,
    report: &'a mewls::diagnostics::ConvergenceReport,
}

pub fn diagnose(mut cfg: RunConfig) -> Result<(), CliError> {
    let (data, source, _) = load_dataset(&cfg)?;
    cfg.resolve_spline(source);
    cfg.resolve_solver(500.0);
    let cap = *cfg.diagnose.max_points.get_or_insert(DIAGNOSTIC_MAX_POINTS);
    let scattered: ScatteredData = match &data {
        Dataset::Scattered(d) => d.clone(),
        Dataset::Structured(d) => d.expand(),
    };
    let total = scattered.len();
    let used = subsample(&scattered, cap, cfg.seed());
    let spec = build_spec(&cfg, used.dim)?;
    let problem = MewlsProblem::new(&spec, &Dataset::Scattered(used))?;
    let report = convergence_report(&problem, &cfg.schedule()?)?;
    println!("s* = {:e} (m = {})", report.s_star, problem.len());

    let mut out = Output::create(&cfg)?;
    out.csv(
        "rho_vs_r.csv",
        &["r", "rho_g33", "approximate"],
        report.stages.iter().map(|s| vec![num(s.reduction), num(s.rho_g33), s.rho_approximate.to_string()]),
    )?;
    out.csv(
        "iterations_vs_r.csv",
        &["r", "iterations"],
        report.stages.iter().map(|s| vec![num(s.reduction), s.iterations.to_string()]),
    )?;
    out.json(
        "diagnostics.json",
        &DiagnoseOutput {
            points: problem.len(),
            subsampled_from: (total > cap).then_some(total),
            report: &report,
        },
    )?;
    out.finish(&cfg)
}

#[derive(Serialize)]
struct MaskSummary {
    threshold_div: f64,
    reduction: f64,
    flagged: usize,
    pixels: usize,
    density: f64,
    preserved_fraction: f64,
    phantom: Option<PhantomScore>,
}

#[derive(Serialize)]
struct PhantomScore {
    crack_pixels: usize,
    recall: f64,
    false_positive_rate: f64,
    mse_corrupted: f64,
    mse_restored: f64,
}

pub fn restore(mut cfg: RunConfig) -> Result<(), CliError> {
    let (img, phantom) = match &cfg.data.image {
        Some(p) => (ImageGrid::load_png(p)?, None),
        None => {
            cfg.data.generator = Some(Generator::Phantom);
            let ph = crack_phantom(&cfg.phantom_config())?;
            (ph.corrupted.clone(), Some(ph))
        }
    };
    cfg.resolve_spline(Source::Image);
    cfg.resolve_solver(2.0);
    let div = *cfg.image.threshold_div.get_or_insert(mewls::image::DEFAULT_THRESHOLD_DIV);
    let spec = build_spec(&cfg, img.channels())?;
    let problem = MewlsProblem::new(&spec, &Dataset::Structured(mewls::image::image_to_dataset(&img)?))?;
    let mut out = Output::create(&cfg)?;
    let (state, reports) = solve(&cfg, &problem, &mut out)?;

    let (w, h) = (img.width(), img.height());
    let mask = outlier_mask(&state.weights, w, h, div)?;
    let restored = restore_image(&img, &mask, &spec, &state.net)?;
    if phantom.is_some() {
        img.save_png(&out.path("input.png"))?;
    }
    restored.save_png(&out.path("restored.png"))?;
    mask.save_png(&out.path("mask.png"))?;
    out.csv(
        "weights.csv",
        &["x", "y", "weight"],
        (0..w * h).map(|i| vec![(i % w).to_string(), (i / w).to_string(), num(state.weights[i])]),
    )?;
    out.json(
        "model.json",
        &Model {
            spec: &spec,
            net: &state.net,
            mu: state.mu,
            target_mse: state.target_mse,
            mse_uw: state.mse_uw,
        },
    )?;
    out.json("report.json", &FitOutput::new(state.mse_uw, &reports))?;

    let score = match &phantom {
        Some(ph) => {
            let cracks = ph.cracks.count();
            let hits = (0..w * h).filter(|&i| mask.bits()[i] && ph.cracks.bits()[i]).count();
            Some(PhantomScore {
                crack_pixels: cracks,
                recall: hits as f64 / cracks.max(1) as f64,
                false_positive_rate: (mask.count() - hits) as f64 / (w * h - cracks).max(1) as f64,
                mse_corrupted: img.mse(&ph.truth)?,
                mse_restored: restored.mse(&ph.truth)?,
            })
        }
        None => None,
    };
    let summary = MaskSummary {
        threshold_div: div,
        reduction: reports.last().map_or(1.0, |r| r.reduction),
        flagged: mask.count(),
        pixels: w * h,
        density: mask.density(),
        preserved_fraction: 1.0 - mask.density(),
        phantom: score,
    };
    println!(
        "flagged {} of {} pixels ({:.2}%)",
        summary.flagged,
        summary.pixels,
        100.0 * summary.density
    );
    out.json("mask.json", &summary)?;
    out.finish(&cfg)
}

/// Weight field from a `x,y,weight` CSV, as `(values, width, height)`.
fn read_weights(path: &Path) -> Result<(Vec<f64>, usize, usize), CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let bad = || CliError::Config(format!("{}: expected x,y,weight rows", path.display()));
        if rec.len() != 3 {
            return Err(bad());
        }
        let x: usize = rec[0].parse().map_err(|_| bad())?;
        let y: usize = rec[1].parse().map_err(|_| bad())?;
        let w: f64 = rec[2].parse().map_err(|_| bad())?;
        cells.push((x, y, w));
    }
    let width = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let height = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    if cells.len() != width * height {
        return Err(CliError::Config(format!(
            "{}: {} rows do not cover a {width}x{height} grid",
            path.display(),
            cells.len()
        )));
    }
    let mut field = vec![f64::NAN; width * height];
    for (x, y, w) in cells {
        field[y * width + x] = w;
    }
    if field.iter().any(|v| v.is_nan()) {
        return Err(CliError::Config(format!("{}: repeated pixels", path.display())));
    }
    Ok((field, width, height))
}

fn weights_path(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.image
        .weights
        .clone()
        .ok_or_else(|| CliError::Config("a weight CSV is required (--weights)".into()))
}

/// The configured level, else the mask threshold `max(w) / threshold_div`.
fn resolve_level(cfg: &mut RunConfig, field: &[f64]) -> f64 {
    let div = *cfg.image.threshold_div.get_or_insert(mewls::image::DEFAULT_THRESHOLD_DIV);
    let wmax = field.iter().cloned().fold(0.0, f64::max);
    *cfg.image.level.get_or_insert(wmax / div)
}

pub fn contours(mut cfg: RunConfig) -> Result<(), CliError> {
    let (field, w, h) = read_weights(&weights_path(&cfg)?)?;
    let level = resolve_level(&mut cfg, &field);
    let lines: Vec<Polyline> = roi_contours(&field, w, h, level)?;
    println!(
        "{} contours at level {level:e} ({} closed)",
        lines.len(),
        lines.iter().filter(|l| l.closed).count()
    );
    let mut out = Output::create(&cfg)?;
    out.json("contours.json", &lines)?;
    let rows = lines.iter().enumerate().flat_map(|(i, l)| {
        l.points
            .iter()
            .map(move |&(x, y)| vec![i.to_string(), l.closed.to_string(), num(x), num(y)])
    });
    out.csv("contours.csv", &["contour", "closed", "x", "y"], rows)?;
    out.finish(&cfg)
}

pub fn fractal_dim(mut cfg: RunConfig) -> Result<(), CliError> {
    let mut out = Output::create(&cfg)?;
    let set: BinaryImage = match (&cfg.image.mask, &cfg.image.weights) {
        (Some(m), None) => BinaryImage::load_png(m)?,
        (None, Some(p)) => {
            let (field, w, h) = read_weights(p)?;
            let level = resolve_level(&mut cfg, &field);
            let boundary = mass_boundary(&field, w, h, level)?;
            boundary.save_png(&out.path("boundary.png"))?;
            boundary
        }
        _ => return Err(CliError::Config("give exactly one of --mask and --weights".into())),
    };
    let est = box_counting_dimension(&set)?;
    println!("box-counting dimension {:.4} (R^2 {:.4})", est.dimension, est.r_squared);
    out.json("fractal.json", &est)?;
    out.finish(&cfg)
}
