//! The `fmlfs` command-line driver.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! anything that fails while running. Errors are printed to stderr as
//! `{"error":{"kind":..,"message":..}}`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::{self, partition_noniid, LabelSpec, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::experiment::{self, partition_seed};
use crate::federation::{run_round_logged, RunConfig, RunLog, Transport};
use crate::mlknn::{MetricsReport, METRIC_NAMES};
use crate::server::AggregationMode;
use crate::SCHEMA_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fmlfs", version, about = "Federated multi-label feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank features federatedly, then evaluate ML-kNN on each top-k subset.
    Run(RunArgs),
    /// Rank features federatedly over the whole dataset (no classifier).
    Rank(RankArgs),
    /// Write the Non-IID partition plan only.
    Partition(PartitionArgs),
    /// Tabulate the metric files of a run directory as CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset file (.arff or .csv).
    #[arg(long)]
    data: PathBuf,
    /// Number of trailing label columns.
    #[arg(long, conflicts_with = "label_xml", required_unless_present = "label_xml")]
    labels: Option<usize>,
    /// Mulan XML label manifest (ARFF only).
    #[arg(long)]
    label_xml: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FederationArgs {
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    clients: u32,
    /// Dirichlet concentration of the label-skewed partition.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 10)]
    bins: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// "in-process" or "tcp://host:port".
    #[arg(long, default_value = "in-process")]
    transport: String,
    /// Seconds the server waits for all reports.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Weight client matrices by shard size.
    #[arg(long)]
    weighted: bool,
    /// Append protocol events as JSON lines to this file.
    #[arg(long)]
    run_log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fed: FederationArgs,
    /// ML-kNN neighbour count.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
    /// Comma list; "a,b,...,c" continues the step of a and b up to c.
    #[arg(long, default_value = "10,20,...,100")]
    top_k: String,
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also write every client report.
    #[arg(long)]
    debug_reports: bool,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fed: FederationArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    debug_reports: bool,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(2..))]
    clients: u32,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    dir: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Expands "10,20,...,100" style lists.
pub fn parse_top_k(s: &str) -> Result<Vec<usize>> {
    let bad = |m: String| Error::InvalidArgument(format!("--top-k {s:?}: {m}"));
    let tokens: Vec<&str> = s.split(',').map(str::trim).collect();
    let mut out: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "..." {
            let n = out.len();
            if n < 2 || i + 1 >= tokens.len() {
                return Err(bad("\"...\" needs two values before and one after".into()));
            }
            let end: usize = tokens[i + 1].parse().map_err(|_| bad(format!("bad value {:?}", tokens[i + 1])))?;
            let step = out[n - 1].checked_sub(out[n - 2]).filter(|&d| d > 0).ok_or_else(|| bad("step must be positive".into()))?;
            let mut v = out[n - 1] + step;
            while v < end {
                out.push(v);
                v += step;
            }
            out.push(end);
            i += 2;
        } else {
            let v: usize = tokens[i].parse().map_err(|_| bad(format!("bad value {:?}", tokens[i])))?;
            out.push(v);
            i += 1;
        }
    }
    if out.is_empty() {
        return Err(bad("empty list".into()));
    }
    if out.contains(&0) || out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("values must be positive and strictly ascending".into()));
    }
    Ok(out)
}

/// `%.6g`-style formatting used by every CSV artifact.
pub fn format_sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn load_data(args: &DataArgs) -> Result<MultiLabelDataset> {
    let spec = match (&args.labels, &args.label_xml) {
        (Some(n), None) => LabelSpec::Count(*n),
        (None, Some(p)) => LabelSpec::Manifest(p.clone()),
        _ => return Err(Error::InvalidArgument("give exactly one of --labels and --label-xml".into())),
    };
    dataset::load(&args.data, &spec)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn run_config(data: &DataArgs, fed: &FederationArgs) -> Result<RunConfig> {
    Ok(RunConfig {
        num_clients: fed.clients,
        bins: fed.bins,
        alpha: fed.alpha,
        seed: fed.seed,
        dataset: Some(data.data.clone()),
        transport: fed.transport.parse::<Transport>()?,
        timeout_secs: fed.timeout,
        aggregation: if fed.weighted { AggregationMode::Weighted } else { AggregationMode::Unweighted },
        ..RunConfig::default()
    })
}

fn run_log(fed: &FederationArgs) -> Result<RunLog> {
    match &fed.run_log {
        None => Ok(RunLog::disabled()),
        Some(p) => {
            let f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Error::io(p, e))?;
            Ok(RunLog::new(f))
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Full resolved configuration embedded in every artifact.
#[derive(Serialize)]
struct Provenance<'a> {
    command: &'a str,
    dataset_name: String,
    #[serde(flatten)]
    run: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
}

fn write_reports(dir: &Path, reports: &[crate::client::ClientReport], config: &Value) -> Result<()> {
    let sub = dir.join("reports");
    create_dir(&sub)?;
    for r in reports {
        write_json(
            &sub.join(format!("client_{:03}.json", r.client_id)),
            &json!({"schema_version": SCHEMA_VERSION, "config": config, "report": r}),
        )?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = run_config(&args.data, &args.fed)?;
    config.knn_k = args.k;
    config.smoothing = args.smoothing;
    config.top_k = parse_top_k(&args.top_k)?;
    config.test_fraction = args.test_fraction;
    config.validate()?;
    let log = run_log(&args.fed)?;
    let ds = load_data(&args.data)?;
    config.validate_for(ds.num_features())?;
    let name = dataset_name(&args.data.data);
    let provenance = serde_json::to_value(Provenance {
        command: "run",
        dataset_name: name.clone(),
        run: &config,
        format: Some(args.format),
    })?;

    let out = experiment::run_experiment(&config, &ds, log)?;
    create_dir(&args.out)?;
    write_json(
        &args.out.join("partition.json"),
        &json!({"schema_version": SCHEMA_VERSION, "config": provenance, "partition": out.partition}),
    )?;
    write_json(
        &args.out.join("ranking.json"),
        &json!({"schema_version": SCHEMA_VERSION, "config": provenance, "ranking": out.round.ranking}),
    )?;
    if args.debug_reports {
        write_reports(&args.out, &out.round.reports, &provenance)?;
    }
    for r in &out.results {
        let stem = format!("metrics_top{:03}", r.top_k);
        match args.format {
            Format::Json => write_json(
                &args.out.join(format!("{stem}.json")),
                &MetricsFile {
                    schema_version: SCHEMA_VERSION,
                    kind: "metrics".into(),
                    dataset: name.clone(),
                    top_k: r.top_k,
                    features: r.features.clone(),
                    metrics: r.metrics,
                    config: provenance.clone(),
                },
            )?,
            Format::Csv => {
                let path = args.out.join(format!("{stem}.csv"));
                fs::write(&path, metrics_csv(&name, r.top_k, &r.metrics, &provenance)?)
                    .map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    Ok(())
}

fn cmd_rank(args: RankArgs) -> Result<()> {
    let config = RunConfig { top_k: vec![], ..run_config(&args.data, &args.fed)? };
    config.validate()?;
    let log = run_log(&args.fed)?;
    let ds = load_data(&args.data)?;
    let provenance = serde_json::to_value(Provenance {
        command: "rank",
        dataset_name: dataset_name(&args.data.data),
        run: &config,
        format: None,
    })?;
    let plan = partition_noniid(&ds, config.num_clients, config.alpha, partition_seed(config.seed))?;
    let round = run_round_logged(&config, &plan.shards(&ds)?, log)?;
    create_dir(&args.out)?;
    write_json(
        &args.out.join("partition.json"),
        &json!({"schema_version": SCHEMA_VERSION, "config": provenance, "partition": plan}),
    )?;
    write_json(
        &args.out.join("ranking.json"),
        &json!({"schema_version": SCHEMA_VERSION, "config": provenance, "ranking": round.ranking}),
    )?;
    if args.debug_reports {
        write_reports(&args.out, &round.reports, &provenance)?;
    }
    Ok(())
}

fn cmd_partition(args: PartitionArgs) -> Result<()> {
    let ds = load_data(&args.data)?;
    let plan = partition_noniid(&ds, args.clients, args.alpha, partition_seed(args.seed))?;
    let config = json!({
        "command": "partition",
        "dataset": args.data.data,
        "dataset_name": dataset_name(&args.data.data),
        "num_clients": args.clients,
        "alpha": args.alpha,
        "seed": args.seed,
    });
    create_dir(&args.out)?;
    write_json(
        &args.out.join("partition.json"),
        &json!({"schema_version": SCHEMA_VERSION, "config": config, "sizes": plan.sizes(), "partition": plan}),
    )
}

/// One per-top-k metrics artifact (JSON form).
#[derive(Debug, Serialize, Deserialize)]
struct MetricsFile {
    schema_version: u32,
    kind: String,
    dataset: String,
    top_k: usize,
    features: Vec<usize>,
    metrics: MetricsReport,
    config: Value,
}

const CSV_HEADER: &str = "dataset,top_k,metric,value";

fn metrics_csv(dataset: &str, top_k: usize, m: &MetricsReport, config: &Value) -> Result<String> {
    let mut s = format!("# schema_version={SCHEMA_VERSION}\n# config={}\n{CSV_HEADER}\n", serde_json::to_string(config)?);
    for (name, v) in METRIC_NAMES.iter().zip(m.values()) {
        s.push_str(&format!("{dataset},{top_k},{name},{}\n", format_sig6(v)));
    }
    Ok(s)
}

type Row = (String, usize, usize, f64);

fn read_metrics_file(path: &Path) -> Result<(String, Vec<Row>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::InvalidArgument(format!("{}: {m}", path.display()));
    let metric_index = |name: &str| METRIC_NAMES.iter().position(|m| *m == name);
    if path.extension().is_some_and(|e| e == "json") {
        let f: MetricsFile = serde_json::from_str(&text).map_err(|e| bad(&format!("not a metrics file ({e})")))?;
        if f.kind != "metrics" {
            return Err(bad("not a metrics file"));
        }
        let rows = f.metrics.values().iter().enumerate().map(|(i, &v)| (f.dataset.clone(), f.top_k, i, v)).collect();
        return Ok((format!("json/v{}", f.schema_version), rows));
    }
    let mut lines = text.lines();
    let version = lines
        .next()
        .and_then(|l| l.strip_prefix("# schema_version="))
        .ok_or_else(|| bad("missing schema_version line"))?
        .to_string();
    let mut lines = lines.skip_while(|l| l.starts_with('#'));
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad("unexpected CSV header"));
    }
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let parts: Vec<&str> = line.split(',').collect();
        let (ds, k, metric, v) = match parts.as_slice() {
            [a, b, c, d] => (*a, *b, *c, *d),
            _ => return Err(bad(&format!("malformed row {line:?}"))),
        };
        let k: usize = k.parse().map_err(|_| bad(&format!("bad top_k in {line:?}")))?;
        let i = metric_index(metric).ok_or_else(|| bad(&format!("unknown metric {metric:?}")))?;
        let v: f64 = v.parse().map_err(|_| bad(&format!("bad value in {line:?}")))?;
        rows.push((ds.to_string(), k, i, v));
    }
    if rows.is_empty() {
        return Err(bad("no metric rows"));
    }
    Ok((format!("csv/v{version}"), rows))
}

/// Collects every `metrics_*` file in `dir` into one table. All files must
/// share one schema (format and version).
pub fn report_table(dir: &Path) -> Result<String> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        let is_metrics = p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("metrics_"));
        if is_metrics && p.extension().is_some_and(|x| x == "json" || x == "csv") {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no metrics files in {}", dir.display())));
    }
    let mut schema: Option<(String, PathBuf)> = None;
    let mut table: BTreeMap<(String, usize, usize), f64> = BTreeMap::new();
    for f in &files {
        let (s, rows) = read_metrics_file(f)?;
        match &schema {
            None => schema = Some((s, f.clone())),
            Some((first, first_path)) if *first != s => {
                return Err(Error::InvalidArgument(format!(
                    "{} has schema {s}, but {} has {first}",
                    f.display(),
                    first_path.display()
                )))
            }
            _ => {}
        }
        for (ds, k, i, v) in rows {
            if table.insert((ds.clone(), k, i), v).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "{}: duplicate entry for {ds} top_k={k}",
                    f.display()
                )));
            }
        }
    }
    let mut out = format!("{CSV_HEADER}\n");
    for ((ds, k, i), v) in table {
        out.push_str(&format!("{ds},{k},{},{}\n", METRIC_NAMES[i], format_sig6(v)));
    }
    Ok(out)
}

fn cmd_report(args: ReportArgs, stdout: &mut dyn Write) -> Result<()> {
    let table = report_table(&args.dir)?;
    match &args.output {
        Some(p) => fs::write(p, table).map_err(|e| Error::io(p, e)),
        None => Ok(stdout.write_all(table.as_bytes())?),
    }
}

fn error_json(kind: &str, message: &str) -> String {
    json!({"error": {"kind": kind, "message": message}}).to_string()
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let _ = writeln!(stderr, "{}", error_json("usage", e.to_string().trim()));
            return EXIT_CONFIG;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Partition(a) => cmd_partition(a),
        Command::Report(a) => cmd_report(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(e.kind(), &e.to_string()));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_expansion() {
        assert_eq!(parse_top_k("10,20,...,100").unwrap(), (1..=10).map(|i| i * 10).collect::<Vec<_>>());
        assert_eq!(parse_top_k("5").unwrap(), vec![5]);
        assert_eq!(parse_top_k("1, 3, ..., 8").unwrap(), vec![1, 3, 5, 7, 8]);
        for bad in ["", "10,...,20", "20,10", "0,5", "a", "10,20,..."] {
            assert!(parse_top_k(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(0.5), "0.5");
        assert_eq!(format_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(format_sig6(2.0 / 3.0), "0.666667");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(0.000012345678), "1.23457e-5");
        assert_eq!(format_sig6(0.0012345678), "0.00123457");
        assert_eq!(format_sig6(0.00012345678), "0.000123457");
        assert_eq!(format_sig6(-4.25), "-4.25");
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = main_with(["fmlfs", "rank", "--data", "x.csv", "--labels", "2", "--clients", "1", "--out", "o"], &mut o, &mut e);
        assert_eq!(code, EXIT_CONFIG);
        let v: Value = serde_json::from_slice(&e).unwrap();
        assert_eq!(v["error"]["kind"], "usage");
    }

    #[test]
    fn missing_file_is_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let missing = dir.path().join("none.csv");
        let out = dir.path().join("out");
        let code = main_with(
            ["fmlfs", "rank", "--data", missing.to_str().unwrap(), "--labels", "2", "--out", out.to_str().unwrap()],
            &mut o,
            &mut e,
        );
        assert_eq!(code, EXIT_RUNTIME);
        let v: Value = serde_json::from_slice(&e).unwrap();
        assert_eq!(v["error"]["kind"], "io");
    }

    #[test]
    fn help_exits_zero() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(main_with(["fmlfs", "--help"], &mut o, &mut e), EXIT_OK);
        assert!(String::from_utf8(o).unwrap().contains("partition"));
    }
}
