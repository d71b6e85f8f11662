use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::FiveNumber;
use super::{DatasetId, RunResult};
use crate::data::write_atomic;
use crate::error::{Error, Result};
use crate::gan::GanVariant;
use crate::priors::PriorKind;

/// MAE at or above which a finite run counts as an outlier.
pub const OUTLIER_THRESHOLD: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateOptions {
    /// Average finite outliers (MAE ≥ threshold) into the means.
    pub include_outliers: bool,
    /// Drop outliers from boxplot statistics.
    pub filter_boxplot_outliers: bool,
    pub outlier_threshold: f64,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions {
            include_outliers: true,
            filter_boxplot_outliers: false,
            outlier_threshold: OUTLIER_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelAggregate {
    pub mean_mae: Option<f64>,
    pub completed: usize,
    pub diverged: usize,
    pub outliers: usize,
    pub stats: Option<FiveNumber>,
    pub mean_skip_weight: Option<f64>,
}

/// Averages over repetitions for one noise level of one (dataset, prior).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub dataset: DatasetId,
    pub prior: PriorKind,
    pub variance: f64,
    pub bias: f64,
    pub prior_model: ModelAggregate,
    pub models: BTreeMap<GanVariant, ModelAggregate>,
}

impl AggregateResult {
    pub fn model(&self, v: GanVariant) -> Option<&ModelAggregate> {
        self.models.get(&v)
    }
}

fn summarize(values: &[f64], diverged: usize, weights: &[f64], opts: &AggregateOptions) -> ModelAggregate {
    let outliers = values.iter().filter(|&&v| v >= opts.outlier_threshold).count();
    let kept: Vec<f64> = if opts.include_outliers {
        values.to_vec()
    } else {
        values
            .iter()
            .copied()
            .filter(|&v| v < opts.outlier_threshold)
            .collect()
    };
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    ModelAggregate {
        mean_mae: mean(&kept),
        completed: values.len(),
        diverged,
        outliers,
        stats: FiveNumber::of(&kept).ok(),
        mean_skip_weight: mean(weights),
    }
}

/// Groups runs by (dataset, prior) and noise level, in table order.
pub fn aggregate(
    runs: &[RunResult],
    opts: &AggregateOptions,
) -> Result<BTreeMap<(DatasetId, PriorKind), Vec<AggregateResult>>> {
    type NoiseKey = (u64, u64);
    let key = |v: f64, b: f64| -> NoiseKey { (v.to_bits(), b.to_bits()) };
    let mut groups: BTreeMap<(DatasetId, PriorKind), BTreeMap<NoiseKey, Vec<&RunResult>>> =
        BTreeMap::new();
    for r in runs {
        groups
            .entry((r.cell.dataset, r.cell.prior))
            .or_default()
            .entry(key(r.cell.variance, r.cell.bias))
            .or_default()
            .push(r);
    }
    let mut out = BTreeMap::new();
    for (dp, by_noise) in groups {
        let mut rows: Vec<AggregateResult> = Vec::new();
        for cell_runs in by_noise.values() {
            let first = cell_runs[0].cell;
            // The prior score depends only on (noise, repetition).
            let mut prior_by_rep: BTreeMap<usize, f64> = BTreeMap::new();
            for r in cell_runs {
                prior_by_rep.entry(r.repetition).or_insert(r.mae_prior);
            }
            let prior_vals: Vec<f64> = prior_by_rep.values().copied().collect();
            let mut models = BTreeMap::new();
            let mut variants: Vec<GanVariant> = cell_runs.iter().map(|r| r.cell.variant).collect();
            variants.sort();
            variants.dedup();
            for v in variants {
                let vr: Vec<&&RunResult> = cell_runs.iter().filter(|r| r.cell.variant == v).collect();
                let vals: Vec<f64> = vr.iter().filter_map(|r| r.mae_gan).collect();
                let weights: Vec<f64> = vr
                    .iter()
                    .filter(|r| r.mae_gan.is_some())
                    .filter_map(|r| r.skip_weight)
                    .collect();
                let div = vr.iter().filter(|r| r.diverged).count();
                models.insert(v, summarize(&vals, div, &weights, opts));
            }
            rows.push(AggregateResult {
                dataset: first.dataset,
                prior: first.prior,
                variance: first.variance,
                bias: first.bias,
                prior_model: summarize(&prior_vals, 0, &[], opts),
                models,
            });
        }
        rows.sort_by(|a, b| {
            b.variance
                .total_cmp(&a.variance)
                .then(b.bias.total_cmp(&a.bias))
        });
        out.insert(dp, rows);
    }
    Ok(out)
}

/// Fixed 4-decimal rendering with round-half-even applied to the shortest
/// decimal representation of `x` (so `0.12345` becomes `0.1234`).
pub fn format_4dp(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{}", x.abs());
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i.to_string(), f.to_string()),
        None => (s.clone(), String::new()),
    };
    let mut digits: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes().chain(std::iter::repeat(b'0')).take(4))
        .map(|b| b - b'0')
        .collect();
    let rest = frac_part.get(4..).unwrap_or("");
    let round_up = match rest.bytes().next() {
        None => false,
        Some(d) if d > b'5' => true,
        Some(d) if d < b'5' => false,
        Some(_) => {
            if rest[1..].bytes().any(|b| b != b'0') {
                true
            } else {
                digits.last().is_some_and(|d| d % 2 == 1)
            }
        }
    };
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let n = digits.len();
    let int: String = digits[..n - 4].iter().map(|d| (b'0' + d) as char).collect();
    let frac: String = digits[n - 4..].iter().map(|d| (b'0' + d) as char).collect();
    let neg = x < 0.0 && digits.iter().any(|&d| d != 0);
    format!("{}{int}.{frac}", if neg { "-" } else { "" })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            other => Err(format!("unknown format `{other}` (expected md or csv)")),
        }
    }
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "md",
        }
    }
}

/// Variant columns in table order; cGAN trails since it ignores the prior.
fn table_variants(rows: &[AggregateResult]) -> Vec<GanVariant> {
    [GanVariant::MGan, GanVariant::SkipGan, GanVariant::CGan]
        .into_iter()
        .filter(|v| rows.iter().any(|r| r.models.contains_key(v)))
        .collect()
}

fn level(x: f64) -> String {
    format!("{x}")
}

/// One table per (dataset, prior): `Variance | Bias | Prior model | mGAN |
/// skipGAN | Weights skipGAN`, plus `cGAN` and `Diverged` columns when present.
pub fn emit_table(rows: &[AggregateResult], format: TableFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no results to tabulate".into()));
    }
    let variants = table_variants(rows);
    let any_diverged = rows
        .iter()
        .any(|r| r.models.values().any(|m| m.diverged > 0));
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            let mut header = vec!["Variance".to_string(), "Bias".into(), "Prior model".into()];
            for v in &variants {
                header.push(v.label().into());
                if *v == GanVariant::SkipGan {
                    header.push(format!("Weights {}", v.label()));
                }
            }
            if any_diverged {
                header.push("Diverged".into());
            }
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(
                out,
                "|{}|",
                header.iter().map(|_| "---").collect::<Vec<_>>().join("|")
            );
            for r in rows {
                let mut maes: Vec<Option<f64>> = vec![r.prior_model.mean_mae];
                maes.extend(variants.iter().map(|v| r.model(*v).and_then(|m| m.mean_mae)));
                let best = maes
                    .iter()
                    .flatten()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                let cell = |m: Option<f64>| match m {
                    Some(x) if format_4dp(x) == format_4dp(best) => format!("**{}**", format_4dp(x)),
                    Some(x) => format_4dp(x),
                    None => "n/a".into(),
                };
                let mut line = vec![level(r.variance), level(r.bias), cell(maes[0])];
                for (i, v) in variants.iter().enumerate() {
                    line.push(cell(maes[i + 1]));
                    if *v == GanVariant::SkipGan {
                        line.push(
                            r.model(*v)
                                .and_then(|m| m.mean_skip_weight)
                                .map_or("n/a".into(), format_4dp),
                        );
                    }
                }
                if any_diverged {
                    let d: usize = r.models.values().map(|m| m.diverged).sum();
                    line.push(d.to_string());
                }
                let _ = writeln!(out, "| {} |", line.join(" | "));
            }
        }
        TableFormat::Csv => {
            let mut header = vec!["variance", "bias", "prior_mae"]
                .into_iter()
                .map(String::from)
                .collect::<Vec<_>>();
            for v in &variants {
                header.push(format!("{}_mae", v.name()));
                if *v == GanVariant::SkipGan {
                    header.push(format!("{}_weight", v.name()));
                }
                header.push(format!("{}_completed", v.name()));
                header.push(format!("{}_diverged", v.name()));
                header.push(format!("{}_outliers", v.name()));
            }
            let _ = writeln!(out, "{}", header.join(","));
            let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v}"));
            for r in rows {
                let mut line = vec![level(r.variance), level(r.bias), opt(r.prior_model.mean_mae)];
                for v in &variants {
                    let m = r.model(*v);
                    line.push(opt(m.and_then(|m| m.mean_mae)));
                    if *v == GanVariant::SkipGan {
                        line.push(opt(m.and_then(|m| m.mean_skip_weight)));
                    }
                    line.push(m.map_or(0, |m| m.completed).to_string());
                    line.push(m.map_or(0, |m| m.diverged).to_string());
                    line.push(m.map_or(0, |m| m.outliers).to_string());
                }
                let _ = writeln!(out, "{}", line.join(","));
            }
        }
    }
    Ok(out)
}

/// Five-number summaries per model. With `filter` set, values at or above
/// `threshold` are dropped first; the dropped count is always reported.
pub fn emit_boxplot_stats(
    by_model: &[(String, Vec<f64>)],
    filter: bool,
    threshold: f64,
) -> Result<String> {
    if by_model.is_empty() || by_model.iter().all(|(_, v)| v.is_empty()) {
        return Err(Error::InvalidArgument("no MAE values for boxplot statistics".into()));
    }
    let mut out = String::from("model,n,filtered,min,q1,median,q3,max,outliers\n");
    for (name, values) in by_model {
        let kept: Vec<f64> = if filter {
            values.iter().copied().filter(|&v| v < threshold).collect()
        } else {
            values.clone()
        };
        let filtered = values.len() - kept.len();
        let Ok(f) = FiveNumber::of(&kept) else {
            let _ = writeln!(out, "{name},0,{filtered},,,,,,");
            continue;
        };
        let outliers: Vec<String> = f.outliers(&kept).iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(
            out,
            "{name},{},{filtered},{},{},{},{},{},{}",
            kept.len(),
            f.min,
            f.q1,
            f.median,
            f.q3,
            f.max,
            outliers.join(";")
        );
    }
    Ok(out)
}

/// Writes `tables/<dataset>_<prior>.{md,csv}` and `boxplots/<dataset>.csv`
/// under `out_dir`; returns the paths written.
pub fn write_reports(
    runs: &[RunResult],
    out_dir: &Path,
    formats: &[TableFormat],
    opts: &AggregateOptions,
) -> Result<Vec<PathBuf>> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no run results to report".into()));
    }
    let mut written = Vec::new();
    let tables = aggregate(runs, opts)?;
    for ((dataset, prior), rows) in &tables {
        for &fmt in formats {
            let path = out_dir
                .join("tables")
                .join(format!("{dataset}_{}.{}", prior.name(), fmt.extension()));
            write_atomic(&path, emit_table(rows, fmt)?.as_bytes())?;
            written.push(path);
        }
    }
    let mut datasets: Vec<DatasetId> = runs.iter().map(|r| r.cell.dataset).collect();
    datasets.sort();
    datasets.dedup();
    for dataset in datasets {
        let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut prior_seen = BTreeMap::new();
        for r in runs.iter().filter(|r| r.cell.dataset == dataset) {
            let p = r.cell.prior.name();
            let cell = (p, r.cell.variance.to_bits(), r.cell.bias.to_bits(), r.repetition);
            if prior_seen.insert(cell, ()).is_none() {
                series.entry(format!("{p}/prior")).or_default().push(r.mae_prior);
            }
            if let Some(m) = r.mae_gan {
                series
                    .entry(format!("{p}/{}", r.cell.variant.name()))
                    .or_default()
                    .push(m);
            }
        }
        let by_model: Vec<(String, Vec<f64>)> = series.into_iter().collect();
        let path = out_dir.join("boxplots").join(format!("{dataset}.csv"));
        write_atomic(
            &path,
            emit_boxplot_stats(&by_model, opts.filter_boxplot_outliers, opts.outlier_threshold)?
                .as_bytes(),
        )?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(format_4dp(0.12345), "0.1234");
        assert_eq!(format_4dp(0.12355), "0.1236");
        assert_eq!(format_4dp(0.123451), "0.1235");
        assert_eq!(format_4dp(1.0), "1.0000");
        assert_eq!(format_4dp(0.99995), "1.0000");
        assert_eq!(format_4dp(21.90474), "21.9047");
        assert_eq!(format_4dp(-0.00004), "0.0000");
        assert_eq!(format_4dp(-1.33105), "-1.3310");
        assert_eq!(format_4dp(2303.40675), "2303.4068");
    }

    #[test]
    fn boxplot_filter_counts() {
        let data = vec![("skipgan".to_string(), vec![0.3, 0.4, 25.0, 0.5])];
        let off = emit_boxplot_stats(&data, false, 20.0).unwrap();
        assert!(off.lines().nth(1).unwrap().starts_with("skipgan,4,0,0.3,"));
        assert!(off.contains(",25,"));
        let on = emit_boxplot_stats(&data, true, 20.0).unwrap();
        assert!(on.lines().nth(1).unwrap().starts_with("skipgan,3,1,0.3,"));
        assert!(emit_boxplot_stats(&[], false, 20.0).is_err());
    }
}
