//! Run configuration: a JSON file whose every key is optional, overridden by
//! command-line flags, then resolved against per-command defaults. The
//! resolved form is what lands in the manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mewls::data::{SphereConfig, SyntheticConfig};
use mewls::image::CrackPhantomConfig;
use mewls::mewls::{ContinuationSchedule, DEFAULT_MAX_ITERS, DEFAULT_TOL};

use crate::error::CliError;

/// Environment variable naming the output directory when neither a flag nor
/// the config sets one.
pub const OUT_DIR_ENV: &str = "MEWLS_OUT_DIR";
pub const FALLBACK_OUT_DIR: &str = "mewls-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Franke,
    Sphere,
    Phantom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    #[default]
    Scattered,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// 1, 2, 5, 10, 20, ... up to r.
    Geometric,
    /// A single stage at r, started from the least-squares fit.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    Franke,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplineConfig {
    /// Control rows along u; for closed surfaces, the free rows.
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub degree: Option<usize>,
    pub closed_u: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Terminal reduction factor `mse_uw / target`.
    pub r: Option<f64>,
    pub schedule: Option<ScheduleKind>,
    /// Explicit reduction factors; overrides `r` and `schedule`.
    pub reductions: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub generator: Option<Generator>,
    pub seed: Option<u64>,
    /// CSV dataset.
    pub path: Option<PathBuf>,
    pub layout: Option<Layout>,
    /// PNG image for the image commands.
    pub image: Option<PathBuf>,
    /// Function the fitted surface is cross-validated against.
    pub reference: Option<Reference>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseConfig {
    /// Larger datasets are subsampled to this many points.
    pub max_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageConfig {
    pub threshold_div: Option<f64>,
    /// Contour level on the weight field; defaults to `max(w) / threshold_div`.
    pub level: Option<f64>,
    /// Weight CSV (`x,y,weight`) for `contours` and `fractal-dim`.
    pub weights: Option<PathBuf>,
    /// Binary PNG for `fractal-dim`.
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<String>,
    pub spline: SplineConfig,
    pub solver: SolverConfig,
    pub data: DataConfig,
    pub franke: Option<SyntheticConfig>,
    pub sphere: Option<SphereConfig>,
    pub phantom: Option<CrackPhantomConfig>,
    pub diagnose: DiagnoseConfig,
    pub image: ImageConfig,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks the `command` key, when present, against the subcommand.
    pub fn check_command(&self, command: &str) -> Result<(), CliError> {
        match &self.command {
            Some(c) if c != command => Err(CliError::Config(format!(
                "config is for `{c}` but the command is `{command}`"
            ))),
            _ => Ok(()),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
    }

    pub fn seed(&self) -> u64 {
        self.data.seed.unwrap_or(7)
    }

    /// Generator configs with the data seed applied.
    pub fn franke_config(&self) -> SyntheticConfig {
        let mut c = self.franke.unwrap_or_default();
        if let Some(s) = self.data.seed {
            c.seed = s;
        }
        c
    }

    pub fn sphere_config(&self) -> SphereConfig {
        let mut c = self.sphere.unwrap_or_default();
        if let Some(s) = self.data.seed {
            c.seed = s;
        }
        c
    }

    pub fn phantom_config(&self) -> CrackPhantomConfig {
        let mut c = self.phantom.unwrap_or_default();
        if let Some(s) = self.data.seed {
            c.seed = s;
        }
        c
    }

    /// Fills unset spline fields: 10x10 cubic clamped for scattered data, the
    /// 6-free-row closed cubic for the sphere, 12x12 cubic for images.
    pub fn resolve_spline(&mut self, source: Source) {
        let (n1, n2, closed) = match source {
            Source::Sphere => (6, 5, true),
            Source::Image => (12, 12, false),
            Source::Scattered => (10, 10, false),
        };
        let s = &mut self.spline;
        s.n1.get_or_insert(n1);
        s.n2.get_or_insert(n2);
        s.degree.get_or_insert(3);
        s.closed_u.get_or_insert(closed);
    }

    pub fn resolve_solver(&mut self, default_r: f64) {
        let s = &mut self.solver;
        s.r.get_or_insert(default_r);
        s.schedule.get_or_insert(ScheduleKind::Geometric);
        s.tol.get_or_insert(DEFAULT_TOL);
        s.max_iters.get_or_insert(DEFAULT_MAX_ITERS);
    }

    /// Continuation schedule after [`RunConfig::resolve_solver`].
    pub fn schedule(&self) -> Result<ContinuationSchedule, CliError> {
        let s = &self.solver;
        let (tol, max_iters) = (s.tol.unwrap_or(DEFAULT_TOL), s.max_iters.unwrap_or(DEFAULT_MAX_ITERS));
        let reductions = match (&s.reductions, s.schedule.unwrap_or(ScheduleKind::Geometric)) {
            (Some(list), _) => list.clone(),
            (None, kind) => {
                let r = s.r.unwrap_or(1.0);
                match kind {
                    ScheduleKind::Geometric => ContinuationSchedule::geometric(r)?.reductions,
                    ScheduleKind::Direct if r > 1.0 => vec![1.0, r],
                    ScheduleKind::Direct => vec![1.0],
                }
            }
        };
        Ok(ContinuationSchedule::new(reductions, tol, max_iters)?)
    }
}

/// What the spline is fitted to, for picking default grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Scattered,
    Sphere,
    Image,
}
