//! TOML run configuration.
//!
//! Relative paths are resolved against the directory holding the config
//! file. `ABCGAN_OUT` and `ABCGAN_WORKERS` override `output.dir` and
//! `output.workers`.

use std::path::{Path, PathBuf};

use abcgan::experiments::{
    AggregateOptions, DataSources, DatasetId, ExperimentSpec, ResponseNoise, OUTLIER_THRESHOLD,
};
use abcgan::gan::{EvalOutput, GanConfig, GanVariant, PriorRefresh};
use abcgan::misspec::MisspecGrid;
use abcgan::priors::{GbtConfig, PriorKind};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub gan: GanSection,
    #[serde(default)]
    pub gbt: GbtConfig,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub boston: Option<PathBuf>,
    pub energy: Option<PathBuf>,
    pub friedman3_n: usize,
    pub friedman3_noise: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = DataSources::default();
        DataSection {
            boston: None,
            energy: None,
            friedman3_n: d.friedman3_n,
            friedman3_noise: d.friedman3_noise,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub datasets: Vec<DatasetId>,
    pub priors: Vec<PriorKind>,
    pub variants: Vec<GanVariant>,
    pub variances: Vec<f64>,
    pub biases: Vec<f64>,
    pub repetitions: usize,
    pub master_seed: u64,
    pub eval: EvalOutput,
    pub response_noise: ResponseNoise,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let s = ExperimentSpec::default();
        ExperimentSection {
            datasets: s.datasets,
            priors: s.priors,
            variants: s.variants,
            variances: s.grid.variances,
            biases: s.grid.biases,
            repetitions: s.repetitions,
            master_seed: s.master_seed,
            eval: s.eval,
            response_noise: s.response_noise,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanSection {
    pub epochs: usize,
    pub batch_size: usize,
    /// Unset means the per-dataset default.
    pub learning_rate: Option<f64>,
    pub noise_dim: usize,
    pub d_steps_per_g_step: usize,
    pub refresh: PriorRefresh,
}

impl Default for GanSection {
    fn default() -> Self {
        let g = GanConfig::default();
        GanSection {
            epochs: g.epochs,
            batch_size: g.batch_size,
            learning_rate: None,
            noise_dim: g.noise_dim,
            d_steps_per_g_step: g.d_steps_per_g_step,
            refresh: g.refresh,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub include_outliers: bool,
    pub boxplot_outlier_filter: bool,
    pub outlier_threshold: f64,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            include_outliers: true,
            boxplot_outlier_filter: false,
            outlier_threshold: OUTLIER_THRESHOLD,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub workers: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            workers: 1,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.boston, &mut cfg.data.energy].into_iter().flatten() {
            *p = resolve(base, p);
        }
        cfg.output.dir = resolve(base, &cfg.output.dir);
        Ok(cfg)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `ABCGAN_OUT` / `ABCGAN_WORKERS`.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(dir) = std::env::var("ABCGAN_OUT") {
            self.output.dir = PathBuf::from(dir);
        }
        if let Ok(w) = std::env::var("ABCGAN_WORKERS") {
            self.output.workers = w.trim().parse().map_err(|_| ConfigError::Value {
                key: "ABCGAN_WORKERS".into(),
                message: format!("`{w}` is not a worker count"),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: &str| {
            Err(ConfigError::Value {
                key: key.into(),
                message: message.into(),
            })
        };
        let e = &self.experiment;
        if e.datasets.is_empty() {
            return bad("experiment.datasets", "must not be empty");
        }
        if e.priors.is_empty() {
            return bad("experiment.priors", "must not be empty");
        }
        if e.variants.is_empty() {
            return bad("experiment.variants", "must not be empty");
        }
        if e.repetitions == 0 {
            return bad("experiment.repetitions", "must be at least 1");
        }
        if e.variances.is_empty() || e.variances.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("experiment.variances", "needs finite, non-negative values");
        }
        if e.biases.is_empty() || e.biases.iter().any(|b| !b.is_finite()) {
            return bad("experiment.biases", "needs finite values");
        }
        if self.data.friedman3_n < 5 {
            return bad("data.friedman3_n", "must be at least 5");
        }
        if !(self.data.friedman3_noise >= 0.0) {
            return bad("data.friedman3_noise", "must be non-negative");
        }
        let g = &self.gan;
        if g.batch_size == 0 {
            return bad("gan.batch_size", "must be at least 1");
        }
        if g.noise_dim == 0 {
            return bad("gan.noise_dim", "must be at least 1");
        }
        if g.d_steps_per_g_step == 0 {
            return bad("gan.d_steps_per_g_step", "must be at least 1");
        }
        if g.learning_rate.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return bad("gan.learning_rate", "must be positive");
        }
        if self.gbt.n_trees == 0 {
            return bad("gbt.n_trees", "must be at least 1");
        }
        if self.gbt.min_leaf == 0 {
            return bad("gbt.min_leaf", "must be at least 1");
        }
        if !(self.gbt.shrinkage > 0.0 && self.gbt.shrinkage <= 1.0) {
            return bad("gbt.shrinkage", "must lie in (0, 1]");
        }
        if !(self.report.outlier_threshold > 0.0) {
            return bad("report.outlier_threshold", "must be positive");
        }
        Ok(())
    }

    pub fn spec(&self) -> ExperimentSpec {
        let e = &self.experiment;
        let g = &self.gan;
        ExperimentSpec {
            datasets: e.datasets.clone(),
            priors: e.priors.clone(),
            variants: e.variants.clone(),
            grid: MisspecGrid {
                variances: e.variances.clone(),
                biases: e.biases.clone(),
            },
            repetitions: e.repetitions,
            gan: GanConfig {
                epochs: g.epochs,
                batch_size: g.batch_size,
                learning_rate: g.learning_rate.unwrap_or(GanConfig::default().learning_rate),
                noise_dim: g.noise_dim,
                d_steps_per_g_step: g.d_steps_per_g_step,
                refresh: g.refresh,
            },
            learning_rate: g.learning_rate,
            gbt: self.gbt,
            master_seed: e.master_seed,
            eval: e.eval,
            response_noise: e.response_noise,
        }
    }

    pub fn sources(&self) -> DataSources {
        DataSources {
            boston: self.data.boston.clone(),
            energy: self.data.energy.clone(),
            friedman3_n: self.data.friedman3_n,
            friedman3_noise: self.data.friedman3_noise,
        }
    }

    pub fn aggregate_options(&self) -> AggregateOptions {
        AggregateOptions {
            include_outliers: self.report.include_outliers,
            filter_boxplot_outliers: self.report.boxplot_outlier_filter,
            outlier_threshold: self.report.outlier_threshold,
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
