//! Table and boxplot emitters on fixed run results.

use abcgan::experiments::{
    aggregate, emit_table, format_4dp, write_reports, AggregateOptions, Cell, DatasetId,
    RunResult, TableFormat, RUN_FORMAT_VERSION,
};
use abcgan::gan::GanVariant;
use abcgan::priors::PriorKind;

fn run(variant: GanVariant, variance: f64, bias: f64, rep: usize, prior: f64, gan: f64) -> RunResult {
    RunResult {
        version: RUN_FORMAT_VERSION,
        cell: Cell {
            dataset: DatasetId::Friedman3,
            prior: PriorKind::Linear,
            variant,
            variance,
            bias,
        },
        repetition: rep,
        seed: rep as u64,
        master_seed: 0,
        fingerprint: "fixture".into(),
        mae_prior: prior,
        mae_gan: Some(gan),
        skip_weight: (variant == GanVariant::SkipGan).then_some(0.25 + 0.5 * variance),
        diverged: false,
        failure: None,
    }
}

fn fixture() -> Vec<RunResult> {
    let mut runs = Vec::new();
    for (variance, bias, prior) in [(1.0, 1.0, 2.5), (0.01, 0.0, 1.0)] {
        for rep in 0..2 {
            let r = rep as f64 * 0.1;
            runs.push(run(GanVariant::MGan, variance, bias, rep, prior + r, 1.2 + r));
            runs.push(run(GanVariant::SkipGan, variance, bias, rep, prior + r, 1.1 + r / 3.0));
        }
    }
    runs
}

#[test]
fn markdown_table_matches_golden_file() {
    let tables = aggregate(&fixture(), &AggregateOptions::default()).unwrap();
    let rows = &tables[&(DatasetId::Friedman3, PriorKind::Linear)];
    let md = emit_table(rows, TableFormat::Markdown).unwrap();
    assert_eq!(md, include_str!("golden/table.md"));
}

#[test]
fn csv_table_parses_back_to_the_aggregates() {
    let tables = aggregate(&fixture(), &AggregateOptions::default()).unwrap();
    let rows = &tables[&(DatasetId::Friedman3, PriorKind::Linear)];
    let text = emit_table(rows, TableFormat::Csv).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), rows.len());
    for (rec, row) in records.iter().zip(rows) {
        let num = |name: &str| rec[col(name)].parse::<f64>().unwrap();
        assert_eq!(num("variance"), row.variance);
        assert_eq!(num("bias"), row.bias);
        assert_eq!(Some(num("prior_mae")), row.prior_model.mean_mae);
        let m = row.model(GanVariant::MGan).unwrap();
        assert_eq!(Some(num("mgan_mae")), m.mean_mae);
        let s = row.model(GanVariant::SkipGan).unwrap();
        assert_eq!(Some(num("skipgan_mae")), s.mean_mae);
        assert_eq!(Some(num("skipgan_weight")), s.mean_skip_weight);
        assert_eq!(num("skipgan_completed") as usize, s.completed);
    }
}

#[test]
fn half_even_rounding_of_shortest_decimal() {
    assert_eq!(format_4dp(0.12345), "0.1234");
    assert_eq!(format_4dp(0.12355), "0.1236");
    assert_eq!(format_4dp(2.0), "2.0000");
    assert_eq!(format_4dp(-0.00004), "0.0000");
}

#[test]
fn report_files_are_written_per_dataset_and_prior() {
    let dir = tempfile::tempdir().unwrap();
    let written = write_reports(
        &fixture(),
        dir.path(),
        &[TableFormat::Markdown, TableFormat::Csv],
        &AggregateOptions::default(),
    )
    .unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.strip_prefix(dir.path()).unwrap().display().to_string())
        .collect();
    assert_eq!(
        names,
        ["tables/friedman3_linear.md", "tables/friedman3_linear.csv", "boxplots/friedman3.csv"]
    );
    let box_csv = std::fs::read_to_string(dir.path().join("boxplots/friedman3.csv")).unwrap();
    assert!(box_csv.starts_with("model,n,filtered,min,q1,median,q3,max,outliers\n"));
}
