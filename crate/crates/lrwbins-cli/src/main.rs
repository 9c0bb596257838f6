//! Command-line interface for the multistage classifier.
//!
//! `train` runs the whole pipeline from a CSV to a pair of config tables;
//! `serve` exposes the second stage over TCP; `predict` routes rows through
//! the table-driven first stage with an RPC or local fallback; `tune`,
//! `allocate`, `eval`, `export`, and `bench` cover the tuning grid, the
//! coverage sweep, quality reports, artifact export, and the latency
//! harness.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use lrwbins::allocation::MetricKind;
use lrwbins::automl::{tune, Objective, TuneGrid};
use lrwbins::bench::{bench, BenchConfig, LatencyReport};
use lrwbins::config_table::{
    export_first_stage, export_second_stage, import_first_stage, import_second_stage,
    FirstStageTable,
};
use lrwbins::dataset::{load_csv, parse_schema_decl, Dataset, DeclKind};
use lrwbins::error::Error;
use lrwbins::first_stage::LrParams;
use lrwbins::gbdt::{predict_gbdt, GbdtModel, GbdtParams};
use lrwbins::pipeline::{run_pipeline, PipelineParams};
use lrwbins::ranking::{rank_gbdt_gain, rank_mrmr, RankMethod};
use lrwbins::rpc::{multistage_predict, serve, LatencyInjector, RpcClient, Stage};

#[derive(Parser)]
#[command(name = "lrwbins", version, about = "Multistage tabular classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train both stages and write the config tables.
    Train(TrainArgs),
    /// Grid-search the first-stage shape (b, n, m) on validation data.
    Tune(TuneArgs),
    /// Run the coverage sweep and print the chosen allocation.
    Allocate(AllocateArgs),
    /// Export the feature ranking (and optionally the config tables).
    Export(ExportArgs),
    /// Serve a second-stage model over TCP.
    Serve(ServeArgs),
    /// Score rows through the first stage with a second-stage fallback.
    Predict(PredictArgs),
    /// Quality report for every model on the test split.
    Eval(EvalArgs),
    /// Latency benchmark against a running server.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Sidecar schema: one name=kind line per feature.
    #[arg(long)]
    schema: PathBuf,
    /// Label column (values 0/1).
    #[arg(long)]
    label: String,
}

/// Pipeline knobs; unset flags fall back to the config file, then defaults.
#[derive(Args, Clone, Default)]
struct ParamArgs {
    /// key=value file supplying defaults for any of these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Quantiles per binned feature.
    #[arg(long)]
    b: Option<usize>,
    /// Features forming the combined bins.
    #[arg(long)]
    n: Option<usize>,
    /// Inference features ("all" for every feature).
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    min_bin_rows: Option<usize>,
    /// Allocation tolerance on the chosen metric.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Allocation metric: accuracy | auc.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Split fractions, e.g. 0.7,0.15,0.15.
    #[arg(long)]
    split: Option<String>,
    /// Feature ranking: gbdt | mrmr.
    #[arg(long)]
    rank_method: Option<String>,
    #[arg(long)]
    mrmr_bins: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    min_child_rows: Option<usize>,
    #[arg(long)]
    l2_leaf: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    lr_l2: Option<f64>,
    #[arg(long)]
    lr_tol: Option<f64>,
    #[arg(long)]
    lr_max_iter: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Directory for model.lrwb and model.gbdt.
    #[arg(long, default_value = "models")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated candidate quantile counts.
    #[arg(long, default_value = "2,3,4")]
    b_values: String,
    #[arg(long, default_value = "3,5,7,9")]
    n_values: String,
    /// Candidate inference feature counts; "all" allowed.
    #[arg(long, default_value = "10,20,all")]
    m_values: String,
    #[arg(long, default_value_t = 20_000)]
    bin_budget: u64,
    /// auc | coverage (coverage uses --tolerance).
    #[arg(long, default_value = "auc")]
    objective: String,
    /// Grid CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AllocateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Sweep curve CSV destination; stdout if omitted.
    #[arg(long)]
    curve_out: Option<PathBuf>,
    /// Also write the filtered tables here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Feature-ranking text destination.
    #[arg(long)]
    ranking_out: Option<PathBuf>,
    /// Also run the pipeline and write the config tables here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Second-stage .gbdt table.
    #[arg(long)]
    model: PathBuf,
    /// host:port to bind.
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    /// Fixed delay injected before every response.
    #[arg(long, default_value_t = 0)]
    inject_latency_ms: u64,
    /// Uniform jitter on top of the fixed delay.
    #[arg(long, default_value_t = 0)]
    jitter_ms: u64,
}

#[derive(Args)]
struct PredictArgs {
    /// First-stage .lrwb table.
    #[arg(long)]
    first: PathBuf,
    /// Sidecar schema describing the raw feature columns.
    #[arg(long)]
    schema: PathBuf,
    /// One row as comma-separated values in schema order.
    #[arg(long)]
    row: Option<String>,
    /// CSV of rows to score (header row, columns matched by name).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Local second-stage fallback table.
    #[arg(long)]
    second: Option<PathBuf>,
    /// Remote second-stage fallback (host:port).
    #[arg(long)]
    connect: Option<String>,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Report CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// First-stage .lrwb table.
    #[arg(long)]
    first: PathBuf,
    /// Sidecar schema describing the raw feature columns.
    #[arg(long)]
    schema: PathBuf,
    /// CSV of rows to benchmark with.
    #[arg(long)]
    data: PathBuf,
    /// Running server (host:port).
    #[arg(long)]
    connect: String,
    #[arg(long, default_value = "10,100,1000")]
    batch_sizes: String,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    /// Simulated embedded first-stage cost per attempt, microseconds.
    #[arg(long, default_value_t = 0)]
    first_stage_floor_us: u64,
    /// Independent client connections, each over its own row shard.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Report CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Allocate(args) => cmd_allocate(args),
        Command::Export(args) => cmd_export(args),
        Command::Serve(args) => cmd_serve(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CmdResult = Result<(), Box<dyn std::error::Error>>;

// ---------------------------------------------------------------------------
// Parameter resolution: flag > config file > default
// ---------------------------------------------------------------------------

fn load_config(
    path: &Option<PathBuf>,
) -> Result<HashMap<String, String>, Box<dyn std::error::Error>> {
    let mut map = HashMap::new();
    if let Some(path) = path {
        for (lineno, line) in fs::read_to_string(path)?.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", lineno + 1))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

fn parse_metric(s: &str) -> Result<MetricKind, Box<dyn std::error::Error>> {
    match s {
        "accuracy" => Ok(MetricKind::Accuracy),
        "auc" | "roc_auc" => Ok(MetricKind::RocAuc),
        other => Err(format!("unknown metric {other:?} (accuracy|auc)").into()),
    }
}

fn parse_rank_method(s: &str) -> Result<RankMethod, Box<dyn std::error::Error>> {
    match s {
        "gbdt" => Ok(RankMethod::GbdtGain),
        "mrmr" => Ok(RankMethod::Mrmr),
        other => Err(format!("unknown rank method {other:?} (gbdt|mrmr)").into()),
    }
}

fn parse_m(s: &str, n_features: usize) -> Result<usize, Box<dyn std::error::Error>> {
    if s == "all" {
        Ok(n_features)
    } else {
        Ok(s.parse()?)
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, Box<dyn std::error::Error>>
where
    T::Err: std::error::Error + 'static,
{
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|e| e.into()))
        .collect()
}

impl ParamArgs {
    fn resolve(&self, n_features: usize) -> Result<PipelineParams, Box<dyn std::error::Error>> {
        let config = load_config(&self.config)?;
        let defaults = PipelineParams::default();

        macro_rules! pick {
            ($flag:expr, $key:literal, $default:expr) => {
                match (&$flag, config.get($key)) {
                    (Some(v), _) => v.clone(),
                    (None, Some(raw)) => raw
                        .parse()
                        .map_err(|_| format!("config {}: bad value {raw:?}", $key))?,
                    (None, None) => $default,
                }
            };
        }

        let split_spec: String = pick!(
            self.split,
            "split",
            format!(
                "{},{},{}",
                defaults.fractions.0, defaults.fractions.1, defaults.fractions.2
            )
        );
        let fractions: Vec<f64> = parse_list(&split_spec)?;
        if fractions.len() != 3 {
            return Err("--split needs three comma-separated fractions".into());
        }

        let m_spec: String = pick!(self.m, "m", defaults.m.to_string());
        let metric_spec: String = pick!(self.metric, "metric", "accuracy".to_string());
        let rank_spec: String = pick!(self.rank_method, "rank_method", "gbdt".to_string());

        Ok(PipelineParams {
            fractions: (fractions[0], fractions[1], fractions[2]),
            seed: pick!(self.seed, "seed", defaults.seed),
            b: pick!(self.b, "b", defaults.b),
            n: pick!(self.n, "n", defaults.n),
            m: parse_m(&m_spec, n_features)?,
            min_bin_rows: pick!(self.min_bin_rows, "min_bin_rows", defaults.min_bin_rows),
            lr: LrParams {
                l2: pick!(self.lr_l2, "lr_l2", defaults.lr.l2),
                tol: pick!(self.lr_tol, "lr_tol", defaults.lr.tol),
                max_iter: pick!(self.lr_max_iter, "lr_max_iter", defaults.lr.max_iter),
                seed: 0,
            },
            gbdt: GbdtParams {
                num_trees: pick!(self.trees, "trees", defaults.gbdt.num_trees),
                max_depth: pick!(self.max_depth, "max_depth", defaults.gbdt.max_depth),
                learning_rate: pick!(
                    self.learning_rate,
                    "learning_rate",
                    defaults.gbdt.learning_rate
                ),
                min_child_rows: pick!(
                    self.min_child_rows,
                    "min_child_rows",
                    defaults.gbdt.min_child_rows
                ),
                l2_leaf: pick!(self.l2_leaf, "l2_leaf", defaults.gbdt.l2_leaf),
                subsample: pick!(self.subsample, "subsample", defaults.gbdt.subsample),
                seed: 0,
            },
            rank_method: parse_rank_method(&rank_spec)?,
            mrmr_bins: pick!(self.mrmr_bins, "mrmr_bins", defaults.mrmr_bins),
            metric: parse_metric(&metric_spec)?,
            tolerance: pick!(self.tolerance, "tolerance", defaults.tolerance),
        })
    }
}

type SchemaDecls = Vec<(String, DeclKind)>;

fn load_dataset(
    args: &DataArgs,
) -> Result<(Dataset, SchemaDecls), Box<dyn std::error::Error>> {
    let decls = parse_schema_decl(&fs::read_to_string(&args.schema)?)?;
    let data = load_csv(&args.data, &decls, &args.label)?;
    Ok((data, decls))
}

fn emit(out: &Option<PathBuf>, contents: &str) -> CmdResult {
    match out {
        Some(path) => fs::write(path, contents)?,
        None => print!("{contents}"),
    }
    Ok(())
}

/// Read a CSV of raw rows and convert them to full-width feature vectors,
/// matching columns by name and coding categoricals via the table
/// dictionaries.
fn rows_from_csv(
    path: &PathBuf,
    decls: &[(String, DeclKind)],
    table: &FirstStageTable,
) -> Result<Vec<Vec<f64>>, Box<dyn std::error::Error>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or("empty input csv")?
        .split(',')
        .map(str::trim)
        .collect();
    let mut col_of: Vec<usize> = Vec::new();
    for (name, _) in decls {
        let idx = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        col_of.push(idx);
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let picked: Vec<&str> = col_of.iter().map(|&i| cells[i].trim()).collect();
        rows.push(row_from_cells(&picked, decls, table)?);
    }
    Ok(rows)
}

/// Build one full-width feature row from raw string cells. Unknown category
/// strings map to the reserved unknown code.
fn row_from_cells(
    cells: &[&str],
    decls: &[(String, DeclKind)],
    table: &FirstStageTable,
) -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    if cells.len() != decls.len() {
        return Err(format!(
            "row has {} values, schema declares {}",
            cells.len(),
            decls.len()
        )
        .into());
    }
    let mut row = Vec::with_capacity(decls.len());
    for (j, ((name, kind), cell)) in decls.iter().zip(cells).enumerate() {
        let cell = cell.trim();
        let v = match kind {
            DeclKind::Numeric => cell
                .parse::<f64>()
                .map_err(|_| format!("column {name}: bad numeric value {cell:?}"))?,
            DeclKind::Boolean => match cell.to_ascii_lowercase().as_str() {
                "0" | "false" => 0.0,
                "1" | "true" => 1.0,
                _ => return Err(format!("column {name}: bad boolean value {cell:?}").into()),
            },
            DeclKind::Categorical => {
                let dict = table
                    .dictionary(j)
                    .ok_or_else(|| format!("table has no dictionary for column {name}"))?;
                match dict.iter().position(|s| s == cell) {
                    Some(code) => code as f64,
                    None => dict.len() as f64, // unknown category
                }
            }
        };
        row.push(v);
    }
    Ok(row)
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_train(args: TrainArgs) -> CmdResult {
    let (data, _) = load_dataset(&args.data)?;
    let params = args.params.resolve(data.n_features())?;
    let artifacts = run_pipeline(&data, &params)?;

    fs::create_dir_all(&args.out_dir)?;
    let first_path = args.out_dir.join("model.lrwb");
    let second_path = args.out_dir.join("model.gbdt");
    let first_bytes = export_first_stage(&artifacts.first, &first_path)?;
    let second_bytes = export_second_stage(&artifacts.second, &second_path)?;

    println!(
        "trained bins: {} of {} combined bins ({} allocated)",
        artifacts.first_full.trained_bins(),
        artifacts.first_full.spec().total_bins(),
        artifacts.first.trained_bins(),
    );
    println!(
        "validation coverage: {:.1}% at {} tolerance {}",
        artifacts.allocation.coverage * 100.0,
        match params.metric {
            MetricKind::Accuracy => "accuracy",
            MetricKind::RocAuc => "auc",
        },
        params.tolerance
    );
    println!("wrote {} ({first_bytes} bytes)", first_path.display());
    println!("wrote {} ({second_bytes} bytes)", second_path.display());
    Ok(())
}

fn cmd_tune(args: TuneArgs) -> CmdResult {
    let (data, _) = load_dataset(&args.data)?;
    let params = args.params.resolve(data.n_features())?;
    let (train, val, _test) = lrwbins::dataset::split(&data, params.fractions, params.seed)?;
    let normalizer = lrwbins::dataset::fit_normalizer(&train);

    let mut gbdt_params = params.gbdt.clone();
    gbdt_params.seed = params.seed;
    let second = lrwbins::gbdt::train_gbdt(&train, &gbdt_params)?;
    let ranking = match params.rank_method {
        RankMethod::GbdtGain => lrwbins::ranking::ranking_from_model(&second)?,
        RankMethod::Mrmr => rank_mrmr(&train, params.mrmr_bins)?,
    };

    let m_values = args
        .m_values
        .split(',')
        .map(|v| parse_m(v.trim(), data.n_features()))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = TuneGrid {
        b_values: parse_list(&args.b_values)?,
        n_values: parse_list(&args.n_values)?,
        m_values,
        bin_budget: args.bin_budget,
    };
    let objective = match args.objective.as_str() {
        "auc" => Objective::MaxAuc,
        "coverage" => Objective::MaxCoverageAtTolerance(params.tolerance),
        other => return Err(format!("unknown objective {other:?} (auc|coverage)").into()),
    };

    let result = tune(
        &train,
        &val,
        &ranking,
        &normalizer,
        &second,
        &grid,
        objective,
        &params.lr,
        params.min_bin_rows,
    )?;
    let winner = result.winner_cell();
    eprintln!(
        "winner: b={} n={} m={} (total bins {}, trained {})",
        winner.b, winner.n, winner.m, winner.total_bins, winner.trained_bins
    );
    emit(&args.out, &result.to_csv())
}

fn cmd_allocate(args: AllocateArgs) -> CmdResult {
    let (data, _) = load_dataset(&args.data)?;
    let params = args.params.resolve(data.n_features())?;
    let artifacts = run_pipeline(&data, &params)?;

    eprintln!(
        "allocated {} of {} trained bins; validation coverage {:.1}%",
        artifacts.allocation.first_stage_bins.len(),
        artifacts.first_full.trained_bins(),
        artifacts.allocation.coverage * 100.0
    );
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
        export_first_stage(&artifacts.first, dir.join("model.lrwb"))?;
        export_second_stage(&artifacts.second, dir.join("model.gbdt"))?;
        eprintln!("wrote tables to {}", dir.display());
    }
    emit(&args.curve_out, &artifacts.curve.to_csv())
}

fn cmd_export(args: ExportArgs) -> CmdResult {
    let (data, _) = load_dataset(&args.data)?;
    let params = args.params.resolve(data.n_features())?;

    if args.ranking_out.is_none() && args.out_dir.is_none() {
        return Err("nothing to export: pass --ranking-out and/or --out-dir".into());
    }

    if let Some(path) = &args.ranking_out {
        let (train, _, _) = lrwbins::dataset::split(&data, params.fractions, params.seed)?;
        let mut gbdt_params = params.gbdt.clone();
        gbdt_params.seed = params.seed;
        let ranking = match params.rank_method {
            RankMethod::GbdtGain => rank_gbdt_gain(&train, &gbdt_params)?,
            RankMethod::Mrmr => rank_mrmr(&train, params.mrmr_bins)?,
        };
        fs::write(path, ranking.to_text(data.schema()))?;
        println!("wrote ranking to {}", path.display());
    }

    if let Some(dir) = &args.out_dir {
        let artifacts = run_pipeline(&data, &params)?;
        fs::create_dir_all(dir)?;
        let first = export_first_stage(&artifacts.first, dir.join("model.lrwb"))?;
        let second = export_second_stage(&artifacts.second, dir.join("model.gbdt"))?;
        println!(
            "wrote tables to {} ({} + {} bytes)",
            dir.display(),
            first,
            second
        );
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> CmdResult {
    let model = import_second_stage(&args.model)?;
    let injector = LatencyInjector {
        delay: Duration::from_millis(args.inject_latency_ms),
        jitter: Duration::from_millis(args.jitter_ms),
    };
    let handle = serve(model, &args.listen, injector)?;
    println!("listening on {}", handle.local_addr());

    let stop = Arc::new(AtomicBool::new(false));
    let stop_handler = Arc::clone(&stop);
    ctrlc::set_handler(move || stop_handler.store(true, Ordering::SeqCst))?;
    while !stop.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
    }
    println!("shutting down ({} requests served)", handle.request_count());
    handle.shutdown();
    Ok(())
}

enum Fallback {
    None,
    Local(GbdtModel),
    Remote(RpcClient),
}

fn cmd_predict(args: PredictArgs) -> CmdResult {
    let table = import_first_stage(&args.first)?;
    let decls = parse_schema_decl(&fs::read_to_string(&args.schema)?)?;
    if decls.len() != table.feature_count() {
        return Err(Error::SchemaMismatch(format!(
            "schema declares {} features, table expects {}",
            decls.len(),
            table.feature_count()
        ))
        .into());
    }

    let mut fallback = match (&args.second, &args.connect) {
        (Some(path), None) => {
            let model = import_second_stage(path)?;
            if model.schema_fingerprint() != table.schema_fingerprint() {
                return Err(Error::SchemaMismatch(
                    "first- and second-stage tables were built from different schemas".into(),
                )
                .into());
            }
            Fallback::Local(model)
        }
        (None, Some(addr)) => {
            Fallback::Remote(RpcClient::connect(addr, Duration::from_secs(1))?)
        }
        (None, None) => Fallback::None,
        (Some(_), Some(_)) => {
            return Err("pass either --second or --connect, not both".into());
        }
    };

    let rows: Vec<Vec<f64>> = match (&args.row, &args.data) {
        (Some(row), None) => {
            let cells: Vec<&str> = row.split(',').collect();
            vec![row_from_cells(&cells, &decls, &table)?]
        }
        (None, Some(path)) => rows_from_csv(path, &decls, &table)?,
        _ => return Err("pass exactly one of --row or --data".into()),
    };

    let mut out = String::from("probability,stage\n");
    for row in &rows {
        let (p, stage) = match &mut fallback {
            Fallback::Remote(client) => {
                let (p, stage) = multistage_predict(&table, client, row)?;
                (
                    p,
                    match stage {
                        Stage::First => "first",
                        Stage::Second => "second",
                    },
                )
            }
            Fallback::Local(model) => match table.predict(row) {
                Some(p) => (p, "first"),
                None => (predict_gbdt(model, row)?, "second"),
            },
            Fallback::None => match table.predict(row) {
                Some(p) => (p, "first"),
                None => {
                    return Err(
                        "row missed the first stage and no fallback was given".into()
                    )
                }
            },
        };
        out.push_str(&format!("{p:.6},{stage}\n"));
    }
    emit(&args.out, &out)
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let (data, _) = load_dataset(&args.data)?;
    let params = args.params.resolve(data.n_features())?;
    let artifacts = run_pipeline(&data, &params)?;
    let report = artifacts.evaluate(&artifacts.test)?;
    emit(&args.out, &report.to_csv())
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let table = Arc::new(import_first_stage(&args.first)?);
    let decls = parse_schema_decl(&fs::read_to_string(&args.schema)?)?;
    let rows = rows_from_csv(&args.data, &decls, &table)?;

    let config = BenchConfig {
        batch_sizes: parse_list(&args.batch_sizes)?,
        repetitions: args.repetitions,
        first_stage_floor: Duration::from_micros(args.first_stage_floor_us),
    };

    let report = if args.workers <= 1 {
        let mut client = RpcClient::connect(&args.connect, Duration::from_secs(1))?;
        bench(&table, &mut client, &rows, &config)?
    } else {
        // shard rows across independent connections and average the means
        let shards: Vec<Vec<Vec<f64>>> = (0..args.workers)
            .map(|w| {
                rows.iter()
                    .enumerate()
                    .filter(|(i, _)| i % args.workers == w)
                    .map(|(_, r)| r.clone())
                    .collect()
            })
            .collect();
        let reports: Vec<LatencyReport> = std::thread::scope(|scope| {
            let handles: Vec<_> = shards
                .into_iter()
                .map(|shard| {
                    let table = Arc::clone(&table);
                    let config = config.clone();
                    let addr = args.connect.clone();
                    scope.spawn(move || -> Result<LatencyReport, Error> {
                        let mut client = RpcClient::connect(&addr, Duration::from_secs(1))?;
                        bench(&table, &mut client, &shard, &config)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("bench worker panicked"))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let mut merged = reports[0].clone();
        for (bi, batch) in merged.batches.iter_mut().enumerate() {
            let k = reports.len() as f64;
            batch.mean_first_ms =
                reports.iter().map(|r| r.batches[bi].mean_first_ms).sum::<f64>() / k;
            batch.mean_second_ms =
                reports.iter().map(|r| r.batches[bi].mean_second_ms).sum::<f64>() / k;
            batch.mean_multistage_ms = reports
                .iter()
                .map(|r| r.batches[bi].mean_multistage_ms)
                .sum::<f64>()
                / k;
            batch.projected_multistage_ms = reports
                .iter()
                .map(|r| r.batches[bi].projected_multistage_ms)
                .sum::<f64>()
                / k;
            batch.coverage =
                reports.iter().map(|r| r.batches[bi].coverage).sum::<f64>() / k;
            batch.speedup_vs_second = batch.mean_second_ms / batch.mean_multistage_ms;
        }
        merged
    };

    emit(&args.out, &report.to_csv())
}
