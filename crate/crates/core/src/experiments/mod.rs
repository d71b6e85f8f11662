//! The measurement harness: seeded single runs, the (dataset × prior ×
//! variant × noise) grid with repetitions, a resumable on-disk result cache,
//! aggregation, and report emitters.

mod metrics;
mod report;
mod seeds;

pub use metrics::{mae, quantile_sorted, FiveNumber};
pub use report::{
    aggregate, emit_boxplot_stats, emit_table, format_4dp, write_reports, AggregateOptions,
    AggregateResult, ModelAggregate, TableFormat, OUTLIER_THRESHOLD,
};
pub use seeds::{content_hash, derive_seed};

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{gen_friedman3, load_boston, load_energy, prepare, Dataset, SplitDataset};
use crate::error::{Error, Result};
use crate::gan::{build_gan, EvalOutput, GanConfig, GanVariant};
use crate::misspec::{enumerate_grid, MisspecGrid, NoiseSpec, PriorSampler};
use crate::priors::{prior_point_predictions, GbtConfig, PriorKind, PriorModel};

/// Version tag written into every cached run file.
pub const RUN_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Friedman3,
    Boston,
    Energy,
}

impl DatasetId {
    pub fn name(self) -> &'static str {
        match self {
            DatasetId::Friedman3 => "friedman3",
            DatasetId::Boston => "boston",
            DatasetId::Energy => "energy",
        }
    }

    /// Adam step size used when the experiment does not override it.
    pub fn default_learning_rate(self) -> f64 {
        match self {
            DatasetId::Friedman3 => 0.001,
            DatasetId::Boston | DatasetId::Energy => 0.01,
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DatasetId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "friedman3" => Ok(DatasetId::Friedman3),
            "boston" => Ok(DatasetId::Boston),
            "energy" => Ok(DatasetId::Energy),
            other => Err(format!(
                "unknown dataset `{other}` (expected friedman3, boston or energy)"
            )),
        }
    }
}

/// Where datasets come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSources {
    pub boston: Option<PathBuf>,
    pub energy: Option<PathBuf>,
    pub friedman3_n: usize,
    pub friedman3_noise: f64,
}

impl Default for DataSources {
    fn default() -> Self {
        DataSources {
            boston: None,
            energy: None,
            friedman3_n: 100,
            friedman3_noise: 0.1,
        }
    }
}

impl DataSources {
    /// Raw (unstandardized) dataset. Friedman3 is synthesized from a seed
    /// derived from the master seed.
    pub fn load(&self, id: DatasetId, master_seed: u64) -> Result<Dataset<f64>> {
        let need = |p: &Option<PathBuf>| {
            p.clone().ok_or_else(|| {
                Error::InvalidArgument(format!("no CSV path configured for dataset `{id}`"))
            })
        };
        match id {
            DatasetId::Friedman3 => {
                let seed = derive_seed(&[&master_seed.to_string(), "friedman3-data"]);
                gen_friedman3(
                    self.friedman3_n,
                    &mut ChaCha8Rng::seed_from_u64(seed),
                    self.friedman3_noise,
                )
            }
            DatasetId::Boston => load_boston(&need(&self.boston)?),
            DatasetId::Energy => load_energy(&need(&self.energy)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub datasets: Vec<DatasetId>,
    pub priors: Vec<PriorKind>,
    pub variants: Vec<GanVariant>,
    pub grid: MisspecGrid,
    pub repetitions: usize,
    pub gan: GanConfig,
    /// Overrides the per-dataset learning rate when set.
    pub learning_rate: Option<f64>,
    pub gbt: GbtConfig,
    pub master_seed: u64,
    pub eval: EvalOutput,
    /// Response noise of the linear prior's simulated outputs.
    #[serde(default)]
    pub response_noise: ResponseNoise,
}

/// Standard deviation of the linear prior's per-row response noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseNoise {
    /// Unit variance in standardized target units.
    Unit,
    /// The OLS residual standard deviation on the training split.
    Residual,
    /// No response noise; only the coefficient draw varies.
    #[default]
    None,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            datasets: vec![DatasetId::Friedman3],
            priors: vec![PriorKind::Linear],
            variants: vec![GanVariant::MGan, GanVariant::SkipGan],
            grid: MisspecGrid::default(),
            repetitions: 10,
            gan: GanConfig::default(),
            learning_rate: None,
            gbt: GbtConfig::default(),
            master_seed: 0,
            eval: EvalOutput::Blend,
            response_noise: ResponseNoise::None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
        }
        if self.datasets.is_empty() || self.priors.is_empty() || self.variants.is_empty() {
            return Err(Error::InvalidArgument(
                "experiment needs at least one dataset, prior and variant".into(),
            ));
        }
        self.gan.validate()?;
        enumerate_grid::<f64>(&self.grid)?;
        Ok(())
    }

    pub fn gan_config_for(&self, dataset: DatasetId) -> GanConfig {
        GanConfig {
            learning_rate: self
                .learning_rate
                .unwrap_or_else(|| dataset.default_learning_rate()),
            ..self.gan.clone()
        }
    }
}

/// Coordinates of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub dataset: DatasetId,
    pub prior: PriorKind,
    pub variant: GanVariant,
    pub variance: f64,
    pub bias: f64,
}

impl Cell {
    pub fn noise(&self) -> NoiseSpec<f64> {
        NoiseSpec {
            mu: self.bias,
            sigma2: self.variance,
        }
    }

    pub fn id(&self) -> String {
        format!(
            "{},{},{},{:?},{:?}",
            self.dataset, self.prior.name(), self.variant.name(), self.variance, self.bias
        )
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub version: u32,
    pub cell: Cell,
    pub repetition: usize,
    pub seed: u64,
    pub master_seed: u64,
    /// Hash of everything besides the cell that shapes the result.
    pub fingerprint: String,
    pub mae_prior: f64,
    pub mae_gan: Option<f64>,
    pub skip_weight: Option<f64>,
    pub diverged: bool,
    pub failure: Option<String>,
}

/// A dataset split, standardized and with its prior fitted; shared by every
/// variant, noise level and repetition of one (dataset, prior) pair.
#[derive(Clone, Debug)]
pub struct PreparedCell {
    pub dataset: DatasetId,
    pub split: SplitDataset<f64>,
    pub prior: PriorModel<f64>,
    pub data_hash: String,
    /// Training-split residual standard deviation of the fitted prior.
    pub residual_sd: f64,
}

impl PreparedCell {
    pub fn new(
        dataset: DatasetId,
        raw: &Dataset<f64>,
        prior: PriorKind,
        gbt: &GbtConfig,
        master_seed: u64,
    ) -> Result<Self> {
        let split_seed = derive_seed(&[&master_seed.to_string(), dataset.name(), "split"]);
        let (split, _) = prepare(raw, split_seed)?;
        let model = PriorModel::fit(prior, &split.train.x, &split.train.y, gbt)?;
        let data_hash = content_hash(&serde_json::to_string(&(&raw.x, &raw.y))?);
        let fitted = prior_point_predictions(&model, &split.train.x)?;
        let n = split.train.len();
        let dof = n.saturating_sub(split.train.feature_dim() + 1).max(1);
        let rss: f64 = fitted.iter().zip(&split.train.y).map(|(f, y)| (y - f).powi(2)).sum();
        let residual_sd = (rss / dof as f64).sqrt();
        Ok(PreparedCell {
            dataset,
            split,
            prior: model,
            data_hash,
            residual_sd,
        })
    }
}

fn fingerprint(spec: &ExperimentSpec, prepared: &PreparedCell) -> Result<String> {
    let gbt = (prepared.prior.kind() == PriorKind::Gbt).then_some(spec.gbt);
    let text = serde_json::to_string(&(
        RUN_FORMAT_VERSION,
        spec.master_seed,
        &prepared.data_hash,
        spec.gan_config_for(prepared.dataset),
        gbt,
        spec.eval,
        spec.response_noise,
    ))?;
    Ok(content_hash(&text))
}

/// Seed of a training run.
pub fn run_seed(master_seed: u64, cell: &Cell, repetition: usize) -> u64 {
    derive_seed(&[
        &master_seed.to_string(),
        cell.dataset.name(),
        cell.prior.name(),
        cell.variant.name(),
        &format!("{:?}", cell.variance),
        &format!("{:?}", cell.bias),
        &repetition.to_string(),
    ])
}

/// Seed of the prior's validation draw; shared across variants so each
/// variant is compared against the same prior score.
fn prior_eval_seed(master_seed: u64, cell: &Cell, repetition: usize) -> u64 {
    derive_seed(&[
        &master_seed.to_string(),
        cell.dataset.name(),
        cell.prior.name(),
        "prior-eval",
        &format!("{:?}", cell.variance),
        &format!("{:?}", cell.bias),
        &repetition.to_string(),
    ])
}

/// Fits and scores one variant on one noise level for one repetition.
///
/// Training divergence is not an error: it yields a result with
/// `diverged = true` and no GAN score.
pub fn run_single(
    spec: &ExperimentSpec,
    prepared: &PreparedCell,
    cell: &Cell,
    repetition: usize,
) -> Result<RunResult> {
    let seed = run_seed(spec.master_seed, cell, repetition);
    let noise = NoiseSpec::new(cell.bias, cell.variance)?;
    let mut sampler = PriorSampler::new(prepared.prior.clone(), noise);
    sampler.response_sd = match spec.response_noise {
        ResponseNoise::Unit => 1.0,
        ResponseNoise::Residual => prepared.residual_sd,
        ResponseNoise::None => 0.0,
    };
    let (train, valid) = (&prepared.split.train, &prepared.split.valid);

    let mut prior_rng = ChaCha8Rng::seed_from_u64(prior_eval_seed(spec.master_seed, cell, repetition));
    let prior_draw = sampler.sample(&valid.x, &mut prior_rng)?;
    let mae_prior = mae(&valid.y, &prior_draw)?;

    let config = spec.gan_config_for(cell.dataset);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = build_gan(cell.variant, train.feature_dim(), &config, &mut rng)?;
    let fed = cell.variant.uses_prior().then_some(&sampler);
    let trained = model.train(&train.x, &train.y, fed, &config, &mut rng);

    let mut result = RunResult {
        version: RUN_FORMAT_VERSION,
        cell: *cell,
        repetition,
        seed,
        master_seed: spec.master_seed,
        fingerprint: fingerprint(spec, prepared)?,
        mae_prior,
        mae_gan: None,
        skip_weight: None,
        diverged: false,
        failure: None,
    };
    match trained {
        Ok(()) => {
            let pred = model.predict(&valid.x, fed, &mut rng, spec.eval)?;
            let score = mae(&valid.y, &pred)?;
            if score.is_finite() {
                result.mae_gan = Some(score);
                result.skip_weight = model.w_gan().map(|w| w.clamp(0.0, 1.0));
            } else {
                result.diverged = true;
                result.failure = Some("non-finite validation predictions".into());
            }
        }
        Err(Error::Diverged { epoch, reason }) => {
            log::warn!("{cell} rep {repetition}: diverged at epoch {epoch}: {reason}");
            result.diverged = true;
            result.failure = Some(format!("epoch {epoch}: {reason}"));
        }
        Err(e) => return Err(e),
    }
    Ok(result)
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 or 1 runs serially.
    pub workers: usize,
    /// Directory of cached [`RunResult`] files; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    pub progress: bool,
}

/// Cache file for one run.
pub fn cache_path(dir: &Path, fingerprint: &str, cell: &Cell, repetition: usize) -> PathBuf {
    let key = content_hash(&format!("{fingerprint}|{}|{repetition}", cell.id()));
    dir.join(format!("{key}.json"))
}

fn load_cached(path: &Path) -> Option<RunResult> {
    let text = std::fs::read_to_string(path).ok()?;
    let run: RunResult = serde_json::from_str(&text).ok()?;
    (run.version == RUN_FORMAT_VERSION).then_some(run)
}

/// Reads every cached run under `dir`.
pub fn load_cache_dir(dir: &Path) -> Result<Vec<RunResult>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut runs = Vec::with_capacity(paths.len());
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let run: RunResult = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", p.display())))?;
        runs.push(run);
    }
    Ok(runs)
}

struct WorkItem<'a> {
    prepared: &'a PreparedCell,
    cell: Cell,
    repetition: usize,
}

/// Runs every cell × repetition of `spec` and returns the results in grid
/// order (dataset, prior, variance desc, bias desc, variant, repetition),
/// independent of the worker count.
pub fn run_grid_runs(
    spec: &ExperimentSpec,
    sources: &DataSources,
    opts: &RunOptions,
) -> Result<Vec<RunResult>> {
    spec.validate()?;
    let noise = enumerate_grid::<f64>(&spec.grid)?;
    let mut prepared = Vec::new();
    for &dataset in &spec.datasets {
        let raw = sources.load(dataset, spec.master_seed)?;
        for &prior in &spec.priors {
            prepared.push(PreparedCell::new(dataset, &raw, prior, &spec.gbt, spec.master_seed)?);
        }
    }
    let mut items = Vec::new();
    for p in &prepared {
        for n in &noise {
            for &variant in &spec.variants {
                for repetition in 0..spec.repetitions {
                    items.push(WorkItem {
                        prepared: p,
                        cell: Cell {
                            dataset: p.dataset,
                            prior: p.prior.kind(),
                            variant,
                            variance: n.sigma2,
                            bias: n.mu,
                        },
                        repetition,
                    });
                }
            }
        }
    }
    if let Some(dir) = &opts.cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let total = items.len();
    let done = AtomicUsize::new(0);
    let work = |item: &WorkItem| -> Result<RunResult> {
        let fp = fingerprint(spec, item.prepared)?;
        let path = opts
            .cache_dir
            .as_ref()
            .map(|d| cache_path(d, &fp, &item.cell, item.repetition));
        let cached = path.as_deref().and_then(load_cached);
        let run = match cached {
            Some(run) => run,
            None => {
                let run = run_single(spec, item.prepared, &item.cell, item.repetition)
                    .map_err(|e| Error::InvalidArgument(format!("cell {}: {e}", item.cell)))?;
                if let Some(p) = &path {
                    crate::data::write_atomic(p, serde_json::to_string_pretty(&run)?.as_bytes())?;
                }
                run
            }
        };
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if opts.progress {
            log::info!(
                "[{k}/{total}] {} rep {}: prior {:.4}, gan {}",
                item.cell,
                item.repetition,
                run.mae_prior,
                run.mae_gan
                    .map_or_else(|| "diverged".to_string(), |m| format!("{m:.4}"))
            );
        }
        Ok(run)
    };
    if opts.workers <= 1 {
        items.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        pool.install(|| items.par_iter().map(work).collect())
    }
}

/// [`run_grid_runs`] followed by aggregation per (dataset, prior).
pub fn run_grid(
    spec: &ExperimentSpec,
    sources: &DataSources,
    opts: &RunOptions,
    agg: &AggregateOptions,
) -> Result<BTreeMap<(DatasetId, PriorKind), Vec<AggregateResult>>> {
    let runs = run_grid_runs(spec, sources, opts)?;
    aggregate(&runs, agg)
}
