use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use depbernstein::bounds::{
    expectation_bound, master_log_laplace, prop1_log_laplace, tail_bound_certified, theorem1_form, BernsteinInputs,
};
use depbernstein::cantor::{cantor_set, full_decomposition};
use depbernstein::mc::{linear_grid, run_tail_experiment_with, TrialReport};
use depbernstein::mixing::{beta_sequence, fit_geometric_rate_from, MarkovChain};
use depbernstein::models::{shipped_model, Model, ModelSpec, VarianceMethod};
use depbernstein::verify::{run_suite, Suite, DEFAULT_SEED};

const SCHEMA: &str = "depbernstein/1";
const OUTPUT_DIR_ENV: &str = "DEPBERNSTEIN_OUTPUT_DIR";

const EXIT_VIOLATION: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser)]
#[command(name = "depbernstein", version, about = "Matrix Bernstein bounds under geometric beta-mixing")]
struct Cli {
    /// Worker threads for Monte-Carlo trials (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate bound formulas for given (n, d, M, v, c).
    Bound(BoundArgs),
    /// Dump the Cantor-like index set of {1..A}.
    Cantor(CantorArgs),
    /// Exact beta-mixing coefficients of a finite Markov chain.
    Mixing(MixingArgs),
    /// Monte-Carlo tail experiment against the certified bound.
    Simulate(SimulateArgs),
    /// Run a property suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum BoundKind {
    Tail,
    Laplace,
    Expectation,
    Theorem1,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, value_enum)]
    kind: BoundKind,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// Deviation levels; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x: Vec<f64>,
    /// Evenly spaced deviation levels `a:b:steps`.
    #[arg(long)]
    x_grid: Option<String>,
    /// Laplace parameters; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    t: Vec<f64>,
    /// Constant for the closed-form shape.
    #[arg(long = "C")]
    big_c: Option<f64>,
    /// Block length for the single-block Laplace bound column.
    #[arg(long = "A")]
    block: Option<usize>,
    /// CSV of parameter rows; bound columns are appended.
    #[arg(long)]
    batch: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CantorArgs {
    #[arg(long = "A")]
    a: usize,
    /// Report the blocks of this level.
    #[arg(long)]
    level: Option<usize>,
    /// Include the full recursive decomposition of {1..A}.
    #[arg(long)]
    full: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MixingArgs {
    #[arg(long)]
    chain: PathBuf,
    /// Lags `1..K` (or just `K`).
    #[arg(long, default_value = "1..20")]
    beta_k: String,
    /// Fit the geometric rate c over the requested lags.
    #[arg(long)]
    fit_c: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize, PartialEq, Eq, Debug)]
#[serde(rename_all = "lowercase")]
enum ModelName {
    Contraction,
    Blockcov,
    Iid,
}

impl ModelName {
    fn key(self) -> &'static str {
        match self {
            ModelName::Contraction => "contraction",
            ModelName::Blockcov => "blockcov",
            ModelName::Iid => "iid",
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum VarianceArg {
    Auto,
    Bruteforce,
    LagBound,
    Interval,
}

impl From<VarianceArg> for VarianceMethod {
    fn from(v: VarianceArg) -> Self {
        match v {
            VarianceArg::Auto => VarianceMethod::Auto,
            VarianceArg::Bruteforce => VarianceMethod::Bruteforce,
            VarianceArg::LagBound => VarianceMethod::LagUpperBound,
            VarianceArg::Interval => VarianceMethod::Interval,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, required_unless_present = "replay")]
    model: Option<ModelName>,
    /// Model configuration JSON; defaults to the bundled configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "replay")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "replay")]
    trials: Option<usize>,
    #[arg(long, required_unless_present = "replay")]
    seed: Option<u64>,
    /// Deviation levels `a:b:steps`; defaults to 0:nM:21.
    #[arg(long)]
    x_grid: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    variance: VarianceArg,
    /// Re-run the configuration embedded in an earlier JSON report.
    #[arg(long, conflicts_with_all = ["model", "config", "n", "trials", "seed", "x_grid"])]
    replay: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    suite: String,
    /// Time budget in seconds.
    #[arg(long, default_value_t = 600.0)]
    budget: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Violation(String),
    Internal(String),
}

impl From<depbernstein::Error> for Failure {
    fn from(e: depbernstein::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(invalid("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::Internal(e.to_string()))?;
    }
    match cli.command {
        Command::Bound(args) => bound(args),
        Command::Cantor(args) => cantor(args),
        Command::Mixing(args) => mixing(args),
        Command::Simulate(args) => simulate(args),
        Command::Verify(args) => verify(args),
    }
}

fn resolve_out(out: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if out.is_relative() => PathBuf::from(dir).join(out),
        _ => out.to_path_buf(),
    }
}

fn emit(out: Option<&Path>, body: &str) -> CmdResult {
    match out {
        Some(path) => {
            let path = resolve_out(path);
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| invalid(format!("{}: {e}", parent.display())))?;
            }
            fs::write(&path, body).map_err(|e| invalid(format!("{}: {e}", path.display())))
        }
        None => io::stdout().write_all(body.as_bytes()).map_err(|e| Failure::Internal(e.to_string())),
    }
}

fn json_report(command: &str, config: Value, result: Value) -> String {
    let doc = json!({ "schema": SCHEMA, "command": command, "config": config, "result": result });
    let mut s = serde_json::to_string_pretty(&doc).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Failure::Internal(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Failure::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Failure::Internal(e.to_string()))
}

/// Shortest representation that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, steps] = parts.as_slice() else {
        return Err(invalid(format!("grid {spec:?} is not of the form a:b:steps")));
    };
    let a: f64 = a.trim().parse().map_err(|_| invalid(format!("bad grid start {a:?}")))?;
    let b: f64 = b.trim().parse().map_err(|_| invalid(format!("bad grid end {b:?}")))?;
    let steps: usize = steps.trim().parse().map_err(|_| invalid(format!("bad grid step count {steps:?}")))?;
    Ok(linear_grid(a, b, steps)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let raw = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------- bound

fn required<T: Copy>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| invalid(format!("--{flag} is required")))
}

fn bound(args: BoundArgs) -> CmdResult {
    if let Some(path) = &args.batch {
        return bound_batch(&args, path);
    }
    let inputs = BernsteinInputs::new(
        required(args.n, "n")?,
        required(args.d, "d")?,
        required(args.m, "M")?,
        required(args.v, "v")?,
        required(args.c, "c")?,
    )?;
    let mut xs = args.x.clone();
    if let Some(grid) = &args.x_grid {
        xs.extend(parse_grid(grid)?);
    }
    let config = json!({
        "kind": args.kind,
        "inputs": inputs,
        "x": xs,
        "t": args.t,
        "C": args.big_c,
        "A": args.block,
        "format": args.format,
    });

    let (header, rows): (Vec<&str>, Vec<Vec<f64>>) = match args.kind {
        BoundKind::Tail => {
            need_points(&xs, "--x or --x-grid")?;
            let rows = xs
                .iter()
                .map(|&x| {
                    let tail = tail_bound_certified(x, &inputs)?;
                    Ok(vec![x, tail.bound, tail.t_star])
                })
                .collect::<Result<_, Failure>>()?;
            (vec!["x", "certified_bound", "t_star"], rows)
        }
        BoundKind::Theorem1 => {
            need_points(&xs, "--x or --x-grid")?;
            let big_c = required(args.big_c, "C")?;
            let rows = xs
                .iter()
                .map(|&x| Ok(vec![x, theorem1_form(x, &inputs, big_c)?, tail_bound_certified(x, &inputs)?.bound]))
                .collect::<Result<_, Failure>>()?;
            (vec!["x", "theorem1", "certified_bound"], rows)
        }
        BoundKind::Laplace => {
            need_points(&args.t, "--t")?;
            let rows = args
                .t
                .iter()
                .map(|&t| {
                    let mut row = vec![t, master_log_laplace(t, &inputs)?];
                    if let Some(a) = args.block {
                        row.push(prop1_log_laplace(t, a, &inputs)?);
                    }
                    Ok(row)
                })
                .collect::<Result<_, Failure>>()?;
            let mut header = vec!["t", "master_log_laplace"];
            if args.block.is_some() {
                header.push("block_log_laplace");
            }
            (header, rows)
        }
        BoundKind::Expectation => (vec!["expectation_bound"], vec![vec![expectation_bound(&inputs)]]),
    };

    let body = match args.format {
        Format::Csv => csv_string(&header, rows.iter().map(|r| r.iter().map(|v| num(*v)).collect()))?,
        Format::Json => {
            let records: Vec<Value> = rows
                .iter()
                .map(|r| Value::Object(header.iter().map(|h| h.to_string()).zip(r.iter().map(|v| json!(v))).collect()))
                .collect();
            json_report("bound", config, json!({ "rows": records }))
        }
    };
    emit(args.out.as_deref(), &body)
}

fn need_points(points: &[f64], flag: &str) -> CmdResult {
    if points.is_empty() {
        return Err(invalid(format!("{flag} is required for this bound")));
    }
    Ok(())
}

fn bound_batch(args: &BoundArgs, path: &Path) -> CmdResult {
    let mut reader = csv::Reader::from_path(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| invalid(e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let idx = |name: &str| column(name).ok_or_else(|| invalid(format!("batch file lacks a {name:?} column")));
    let (n_i, d_i, m_i, v_i, c_i) = (idx("n")?, idx("d")?, idx("M")?, idx("v")?, idx("c")?);
    let point_col = match args.kind {
        BoundKind::Tail | BoundKind::Theorem1 => Some(idx("x")?),
        BoundKind::Laplace => Some(idx("t")?),
        BoundKind::Expectation => None,
    };
    let c_col = column("C");

    let mut out_header: Vec<String> = headers.iter().map(str::to_string).collect();
    out_header.push("bound".into());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| invalid(e.to_string()))?;
        let field = |i: usize| -> Result<f64, Failure> {
            record
                .get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| invalid(format!("row {}: bad value in column {:?}", line + 1, &headers[i])))
        };
        let count = |i: usize| -> Result<usize, Failure> {
            let v = field(i)?;
            if v < 0.0 || v.fract() != 0.0 {
                return Err(invalid(format!("row {}: {:?} must be a nonnegative integer", line + 1, &headers[i])));
            }
            Ok(v as usize)
        };
        let inputs = BernsteinInputs::new(count(n_i)?, count(d_i)?, field(m_i)?, field(v_i)?, field(c_i)?)?;
        let value = match args.kind {
            BoundKind::Tail => tail_bound_certified(field(point_col.expect("tail has x"))?, &inputs)?.bound,
            BoundKind::Laplace => master_log_laplace(field(point_col.expect("laplace has t"))?, &inputs)?,
            BoundKind::Expectation => expectation_bound(&inputs),
            BoundKind::Theorem1 => {
                let big_c = match c_col {
                    Some(i) => field(i)?,
                    None => required(args.big_c, "C")?,
                };
                theorem1_form(field(point_col.expect("theorem1 has x"))?, &inputs, big_c)?
            }
        };
        let mut row: Vec<String> = record.iter().map(str::to_string).collect();
        row.push(num(value));
        rows.push(row);
    }
    let header_refs: Vec<&str> = out_header.iter().map(String::as_str).collect();
    emit(args.out.as_deref(), &csv_string(&header_refs, rows)?)
}

// ---------------------------------------------------------------- cantor

fn cantor(args: CantorArgs) -> CmdResult {
    let part = cantor_set(args.a)?;
    let p = &part.params;
    let level = args.level.unwrap_or(p.ell);
    let blocks = part.level_blocks(level)?;
    let config = json!({ "A": args.a, "level": args.level, "full": args.full, "format": args.format });

    let body = match args.format {
        Format::Json => {
            let mut result = json!({
                "A": p.a,
                "delta": p.delta,
                "ell": p.ell,
                "n": p.n_seq,
                "d": p.d_seq,
                "K": part.k_a,
                "level": level,
                "blocks": blocks,
                "remainders": part.remainders,
            });
            if args.full {
                let full = full_decomposition(args.a)?;
                result["decomposition"] = json!({ "sizes": full.sizes, "levels": full.levels, "remainder": full.remainder });
            }
            json_report("cantor", config, result)
        }
        Format::Csv => {
            let mut owner = vec![None; args.a + 1];
            for (b, block) in blocks.iter().enumerate() {
                for &i in block {
                    owner[i] = Some(b + 1);
                }
            }
            let rows = (1..=args.a).map(|i| {
                vec![
                    i.to_string(),
                    u8::from(owner[i].is_some()).to_string(),
                    owner[i].map(|b| b.to_string()).unwrap_or_default(),
                ]
            });
            csv_string(&["index", "in_K", "block"], rows)?
        }
    };
    emit(args.out.as_deref(), &body)
}

// ---------------------------------------------------------------- mixing

fn parse_lags(spec: &str) -> Result<(usize, usize), Failure> {
    let bad = || invalid(format!("lags {spec:?} are not of the form 1..K or K"));
    let (lo, hi) = match spec.split_once("..") {
        Some((lo, hi)) => (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?),
        None => (1, spec.trim().parse().map_err(|_| bad())?),
    };
    if lo < 1 || hi < lo {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn mixing(args: MixingArgs) -> CmdResult {
    let chain: MarkovChain = read_json(&args.chain)?;
    let (lo, hi) = parse_lags(&args.beta_k)?;
    let betas = beta_sequence(&chain, hi);
    let rate = if args.fit_c { Some(fit_geometric_rate_from(&betas)?) } else { None };
    let envelope = |k: usize| rate.map(|c| (-c * (k - 1) as f64).exp());

    let body = match args.format {
        Format::Csv => {
            let mut header = vec!["k", "beta_k"];
            if rate.is_some() {
                header.push("envelope");
            }
            let rows = (lo..=hi).map(|k| {
                let mut row = vec![k.to_string(), num(betas[k - 1])];
                if let Some(e) = envelope(k) {
                    row.push(num(e));
                }
                row
            });
            csv_string(&header, rows)?
        }
        Format::Json => {
            let config = json!({ "chain": chain, "beta_k": [lo, hi], "fit_c": args.fit_c, "format": args.format });
            let rows: Vec<Value> = (lo..=hi)
                .map(|k| json!({ "k": k, "beta_k": betas[k - 1], "envelope": envelope(k) }))
                .collect();
            json_report("mixing", config, json!({ "stationary": chain.stationary(), "c": rate, "rows": rows }))
        }
    };
    emit(args.out.as_deref(), &body)
}

// ---------------------------------------------------------------- simulate

/// Everything that determines the bytes of a simulation report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    model: ModelName,
    spec: ModelSpec,
    n: usize,
    trials: usize,
    seed: u64,
    x_grid: Vec<f64>,
    variance: VarianceMethod,
    format: Format,
}

#[derive(Deserialize)]
struct ReplayDoc {
    schema: String,
    command: String,
    config: SimulateConfig,
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let config = match &args.replay {
        Some(path) => {
            let doc: ReplayDoc = read_json(path)?;
            if doc.schema != SCHEMA || doc.command != "simulate" {
                return Err(invalid(format!("{} is not a {SCHEMA} simulate report", path.display())));
            }
            doc.config
        }
        None => {
            let name = args.model.expect("clap requires --model");
            let spec = match &args.config {
                Some(path) => read_json(path)?,
                None => shipped_model(name.key()).expect("bundled configs exist"),
            };
            let expected = match name {
                ModelName::Contraction => matches!(spec, ModelSpec::Contraction(_)),
                ModelName::Blockcov => matches!(spec, ModelSpec::BlockCovariance(_)),
                ModelName::Iid => matches!(spec, ModelSpec::IidBaseline(_)),
            };
            if !expected {
                return Err(invalid(format!("config does not describe a {} model", name.key())));
            }
            let n = args.n.expect("clap requires --n");
            let x_grid = match &args.x_grid {
                Some(g) => parse_grid(g)?,
                None => {
                    let ceiling = n as f64 * Model::new(spec.clone())?.lambda_max_bound();
                    linear_grid(0.0, ceiling, 21)?
                }
            };
            SimulateConfig {
                model: name,
                spec,
                n,
                trials: args.trials.expect("clap requires --trials"),
                seed: args.seed.expect("clap requires --seed"),
                x_grid,
                variance: args.variance.into(),
                format: args.format,
            }
        }
    };

    let model = Model::new(config.spec.clone())?;
    let report = run_tail_experiment_with(&model, config.n, config.trials, &config.x_grid, config.seed, config.variance)?;
    let body = match config.format {
        Format::Json => json_report("simulate", serde_json::to_value(&config).expect("config serializes"), report_value(&report)),
        Format::Csv => csv_string(
            &["x", "p_hat", "ci_low", "ci_high", "certified_bound"],
            report.tail_grid.iter().zip(&report.bound_curve).map(|(t, b)| {
                vec![num(t.x), num(t.p_hat), num(t.ci_low), num(t.ci_high), num(b.certified_bound)]
            }),
        )?,
    };
    emit(args.out.as_deref(), &body)?;

    let violations = report.dominance_violations();
    if !violations.is_empty() {
        return Err(Failure::Violation(format!(
            "empirical tail exceeds the certified bound at x = {:?}",
            violations.iter().map(|v| v.x).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

fn report_value(report: &TrialReport) -> Value {
    let mut value = serde_json::to_value(report).expect("reports serialize");
    value["dominance_violations"] = json!(report.dominance_violations());
    value
}

// ---------------------------------------------------------------- verify

fn verify(args: VerifyArgs) -> CmdResult {
    let suite: Suite = args.suite.parse()?;
    if !(args.budget.is_finite() && args.budget >= 0.0) {
        return Err(invalid("--budget must be a nonnegative number of seconds"));
    }
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let report = run_suite(suite, Duration::from_secs_f64(args.budget), seed);
    let config = json!({ "suite": suite, "budget": args.budget, "seed": seed });
    let mut result = serde_json::to_value(&report).expect("reports serialize");
    result["passed"] = json!(report.passed());
    emit(args.out.as_deref(), &json_report("verify", config, result))?;
    if report.budget_exhausted {
        eprintln!("note: budget exhausted after {} checks", report.checks);
    }
    if !report.passed() {
        return Err(Failure::Violation(format!("{} violated invariants in suite {suite}", report.violations.len())));
    }
    Ok(())
}
