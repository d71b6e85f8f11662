use std::path::{Path, PathBuf};

use abcgan::experiments::{
    aggregate, emit_table, load_cache_dir, run_grid_runs, write_reports, AggregateOptions, Cell,
    RunOptions, TableFormat,
};
use abcgan::gan::GanVariant;
use abcgan::misspec::MisspecGrid;
use abcgan::priors::PriorKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, ConfigError};
use crate::{GenDataArgs, GridArgs, ReportArgs, RunArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] abcgan::Error),
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn gen_data(args: &GenDataArgs) -> CliResult<()> {
    if args.dataset != abcgan::experiments::DatasetId::Friedman3 {
        return Err(CliError::Usage(format!(
            "gen-data only synthesizes friedman3, not `{}`",
            args.dataset
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let ds = abcgan::data::gen_friedman3(args.n, &mut rng, args.noise)?;
    ds.write_csv(&args.out, "y")?;
    log::info!("wrote {} rows to {}", ds.len(), args.out.display());
    Ok(())
}

fn load_config(path: &Path) -> CliResult<Config> {
    let mut cfg = Config::load(path)?;
    cfg.apply_env()?;
    Ok(cfg)
}

fn runs_dir(out: &Path) -> PathBuf {
    out.join("runs")
}

/// Parses `dataset,prior,variant,variance,bias`.
pub fn parse_cell(text: &str) -> CliResult<Cell> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [dataset, prior, variant, variance, bias] = parts[..] else {
        return Err(CliError::Usage(format!(
            "cell `{text}` must have 5 comma-separated fields: dataset,prior,variant,variance,bias"
        )));
    };
    let num = |name: &str, s: &str| -> CliResult<f64> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| CliError::Usage(format!("cell {name} `{s}` is not a finite number")))
    };
    let cell = Cell {
        dataset: dataset.parse().map_err(CliError::Usage)?,
        prior: prior.parse::<PriorKind>().map_err(CliError::Usage)?,
        variant: variant.parse::<GanVariant>().map_err(CliError::Usage)?,
        variance: num("variance", variance)?,
        bias: num("bias", bias)?,
    };
    if cell.variance < 0.0 {
        return Err(CliError::Usage(format!(
            "cell variance `{variance}` must be non-negative"
        )));
    }
    Ok(cell)
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let cell = parse_cell(&args.cell)?;
    let mut cfg = load_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    let mut spec = cfg.spec();
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    spec.datasets = vec![cell.dataset];
    spec.priors = vec![cell.prior];
    spec.variants = vec![cell.variant];
    spec.grid = MisspecGrid {
        variances: vec![cell.variance],
        biases: vec![cell.bias],
    };
    let opts = RunOptions {
        workers: cfg.output.workers,
        cache_dir: Some(runs_dir(&cfg.output.dir)),
        progress: false,
    };
    let runs = run_grid_runs(&spec, &cfg.sources(), &opts)?;
    for r in &runs {
        println!("{}", run_line(r)?);
    }
    let tables = aggregate(&runs, &cfg.aggregate_options())?;
    for rows in tables.values() {
        print!("{}", emit_table(rows, TableFormat::Markdown)?);
    }
    Ok(())
}

fn run_line(run: &abcgan::experiments::RunResult) -> CliResult<String> {
    let gan = run
        .mae_gan
        .map_or_else(|| "diverged".to_string(), |m| format!("{m}"));
    let w = run
        .skip_weight
        .map_or_else(String::new, |w| format!(" w_gan={w}"));
    Ok(format!(
        "{} rep={} seed={} mae_prior={} mae_gan={gan}{w}",
        run.cell, run.repetition, run.seed, run.mae_prior
    ))
}

pub fn grid(args: &GridArgs) -> CliResult<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(w) = args.workers {
        cfg.output.workers = w;
    }
    let mut spec = cfg.spec();
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    let opts = RunOptions {
        workers: cfg.output.workers,
        cache_dir: Some(runs_dir(&cfg.output.dir)),
        progress: !args.quiet,
    };
    let runs = run_grid_runs(&spec, &cfg.sources(), &opts)?;
    let written = write_reports(&runs, &cfg.output.dir, &args.formats, &cfg.aggregate_options())?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> CliResult<()> {
    let runs_in = runs_dir(&args.input);
    let source = if runs_in.is_dir() { runs_in } else { args.input.clone() };
    let runs = load_cache_dir(&source)?;
    if runs.is_empty() {
        return Err(CliError::Runtime(abcgan::Error::InvalidArgument(format!(
            "no cached run results in {}",
            source.display()
        ))));
    }
    let opts = AggregateOptions {
        include_outliers: !args.exclude_outliers,
        filter_boxplot_outliers: args.filter_outliers,
        outlier_threshold: args.outlier_threshold,
    };
    let out = args.out.clone().unwrap_or_else(|| args.input.clone());
    let written = write_reports(&runs, &out, &[args.format], &opts)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use abcgan::experiments::DatasetId;

    #[test]
    fn cell_parsing() {
        let c = parse_cell("boston, gbt, skipgan, 0.1, 0").unwrap();
        assert_eq!(c.dataset, DatasetId::Boston);
        assert_eq!(c.prior, PriorKind::Gbt);
        assert_eq!(c.variant, GanVariant::SkipGan);
        assert_eq!((c.variance, c.bias), (0.1, 0.0));
    }

    #[test]
    fn cell_errors_list_the_choices() {
        let e = parse_cell("mnist,linear,mgan,1,1").unwrap_err().to_string();
        assert!(e.contains("friedman3") && e.contains("boston"), "{e}");
        let e = parse_cell("friedman3,linear,gan,1,1").unwrap_err().to_string();
        assert!(e.contains("skipgan"), "{e}");
        assert!(parse_cell("friedman3,linear,mgan,1").is_err());
        assert!(parse_cell("friedman3,linear,mgan,-1,0").is_err());
        assert!(parse_cell("friedman3,linear,mgan,x,0").is_err());
    }
}
