use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use pdqp::algorithms::{self, Basis, SdVerdict, SearchInstance, SearchOutcome};
use pdqp::analysis::deferred_state;
use pdqp::circuit::parse_circuit_file;
use pdqp::corpus;
use pdqp::exact_sim::{exact_history_distribution, exact_sample_history};
use pdqp::hidden_variables::{dieks_joint, product_theory_joint, BlockStructure};
use pdqp::qp_oracle::{History, QpSampler, DEFAULT_BUDGET};
use pdqp::rng;
use pdqp::suites::{parse_suites, run_suite, SuiteSizes};
use pdqp::Circuit;

#[derive(Parser, Debug)]
#[command(
    name = "pdqp",
    version,
    about = "Non-collapsing measurement simulator and verification lab"
)]
struct Cli {
    /// Root seed; all randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, false)
    }
}

impl Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample histories of a circuit file.
    Run(RunArgs),
    /// Search scaling experiment against the Grover baseline.
    Search(SearchArgs),
    /// Statistical-difference decisions over an instance directory.
    Sd(SdArgs),
    /// Run verification suites.
    Verify(VerifyArgs),
    /// Demos of signaling, one-query evaluation, communication and cloning.
    Phenomena(PhenomenaArgs),
    /// Exact path-sum sampling or enumeration of a circuit file.
    Exact(ExactArgs),
    /// Dump a hidden-variable joint matrix for one step of a circuit.
    Hv(HvArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    /// key = value configuration file; flags override its keys.
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    /// List the full history distribution instead of sampling.
    #[arg(long)]
    enumerate: Option<bool>,
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    k_mult: Option<f64>,
    #[arg(long)]
    r_mult: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SdArgs {
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Write a fresh corpus of this many instances into the directory first.
    #[arg(long)]
    generate: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// markov, trace, hybrid, pairwise, product-fidelity, hv-validity,
    /// qpqb-equiv, exactsim-equiv, a comma-separated list of these, or all.
    #[arg(long)]
    suite: Option<String>,
    /// Small corpora, for smoke runs.
    #[arg(long)]
    quick: Option<bool>,
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PhenomenaArgs {
    /// ftl, one-query, one-qubit-comm or clone.
    #[arg(long)]
    demo: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Samples per party B (ftl).
    #[arg(long)]
    k: Option<usize>,
    /// Non-collapsing samples R.
    #[arg(long)]
    r: Option<usize>,
    /// Bits of the input (one-query: log₂N; one-qubit-comm: n).
    #[arg(long)]
    n: Option<usize>,
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HvArgs {
    #[arg(long)]
    circuit: Option<PathBuf>,
    /// dieks or product.
    #[arg(long)]
    theory: Option<String>,
    /// 1-based step index.
    #[arg(long)]
    step: Option<usize>,
    config: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Lib(pdqp::Error),
    Verification(String),
}

impl From<pdqp::Error> for CliError {
    fn from(e: pdqp::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Effective parameters: flags first, then the config file, then defaults.
/// Every value read is recorded for the output metadata.
struct Params {
    config: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

impl Params {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut config = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            for (k, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key = value", path.display(), k + 1)))?;
                config.insert(key.trim().replace('_', "-"), value.trim().to_string());
            }
        }
        Ok(Params {
            config,
            used: BTreeMap::new(),
        })
    }

    fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.config.get(key) {
                Some(text) => Some(
                    text.parse()
                        .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{text}'")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.used.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T> {
        let v = self.optional(key, flag)?.unwrap_or(default);
        self.used.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<T> {
        self.optional(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("missing required parameter --{key}")))
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        let flag = flag.map(|p| p.to_string_lossy().into_owned());
        Ok(PathBuf::from(self.require::<String>(key, flag)?))
    }
}

/// Rows plus a summary, rendered as CSV or JSON lines.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Value>>,
    summary: BTreeMap<String, Value>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

struct Meta<'a> {
    command: &'a str,
    seed: u64,
    config: &'a BTreeMap<String, String>,
}

fn render(table: &Table, format: Format, meta: &Meta) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        Format::Csv => {
            {
                let mut w = csv::Writer::from_writer(&mut out);
                let csv_err = |e: csv::Error| CliError::Usage(e.to_string());
                w.write_record(&table.header).map_err(csv_err)?;
                for row in &table.rows {
                    w.write_record(row.iter().map(cell)).map_err(csv_err)?;
                }
                w.flush()?;
            }
            writeln!(out, "# pdqp-version: {}", pdqp::VERSION)?;
            writeln!(out, "# command: {}", meta.command)?;
            writeln!(out, "# seed: {}", meta.seed)?;
            for (k, v) in meta.config {
                writeln!(out, "# config.{k}: {v}")?;
            }
            for (k, v) in &table.summary {
                writeln!(out, "# summary.{k}: {}", cell(v))?;
            }
        }
        Format::Json => {
            for row in &table.rows {
                let obj: serde_json::Map<String, Value> =
                    table.header.iter().cloned().zip(row.iter().cloned()).collect();
                writeln!(out, "{}", Value::Object(obj))?;
            }
            let m = json!({"meta": {
                "version": pdqp::VERSION,
                "command": meta.command,
                "seed": meta.seed,
                "config": meta.config,
                "summary": table.summary,
            }});
            writeln!(out, "{m}")?;
        }
    }
    Ok(out)
}

fn load_circuit(path: &Path) -> CliResult<Circuit> {
    parse_circuit_file(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn bits(outcome: &[u8]) -> String {
    outcome.iter().map(|b| char::from(b'0' + b)).collect()
}

fn history_table(histories: &[History], steps: usize) -> Table {
    let mut header = vec!["trial".to_string()];
    header.extend((0..=steps).map(|t| format!("v{t}")));
    header.extend((1..=steps).map(|t| format!("m{t}")));
    let mut table = Table::new(header);
    for (k, h) in histories.iter().enumerate() {
        let mut row = vec![json!(k)];
        row.extend(h.samples.iter().map(|v| json!(v)));
        row.extend(h.collapse_outcomes.iter().map(|m| json!(bits(m))));
        table.rows.push(row);
    }
    table
}

fn cmd_run(args: RunArgs, p: &mut Params, seed: u64) -> CliResult<Table> {
    let path = p.path("circuit", args.circuit)?;
    let samples = p.get("samples", args.samples, 1000)?;
    let circuit = load_circuit(&path)?;
    let sampler = QpSampler::new(&circuit)?;
    let histories: Vec<History> = (0..samples as u64)
        .into_par_iter()
        .map(|t| sampler.sample(&mut rng::stream(seed, t)))
        .collect::<Result<_, _>>()?;
    Ok(history_table(&histories, circuit.len()))
}

fn cmd_exact(args: ExactArgs, p: &mut Params, seed: u64) -> CliResult<Table> {
    let path = p.path("circuit", args.circuit)?;
    let enumerate = p.get("enumerate", args.enumerate, false)?;
    let circuit = load_circuit(&path)?;
    if enumerate {
        let dist = exact_history_distribution(&circuit, DEFAULT_BUDGET)?;
        let mut header: Vec<String> = (0..=circuit.len()).map(|t| format!("v{t}")).collect();
        header.push("probability".into());
        let mut table = Table::new(header);
        for (h, prob) in dist.iter() {
            let mut row: Vec<Value> = h.iter().map(|v| json!(v)).collect();
            row.push(json!(prob));
            table.rows.push(row);
        }
        table.summary.insert("support".into(), json!(dist.support_size()));
        return Ok(table);
    }
    let samples = p.get("samples", args.samples, 1000)?;
    let histories: Vec<History> = (0..samples as u64)
        .into_par_iter()
        .map(|t| exact_sample_history(&circuit, &mut rng::stream(seed, t)))
        .collect::<Result<_, _>>()?;
    Ok(history_table(&histories, circuit.len()))
}

fn cmd_search(args: SearchArgs, p: &mut Params, seed: u64) -> CliResult<Table> {
    let n_min = p.get("n-min", args.n_min, 6)?;
    let n_max = p.get("n-max", args.n_max, 15)?;
    let k_mult = p.get("k-mult", args.k_mult, 1.0)?;
    let r_mult = p.get("r-mult", args.r_mult, 1.0)?;
    let trials = p.get("trials", args.trials, 200)?;
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    if n_min == 0 || n_min > n_max {
        return Err(CliError::Usage(format!("empty n range {n_min}..={n_max}")));
    }
    let target = 2.0 / 3.0;
    let mut table = Table::new([
        "mode",
        "n",
        "N",
        "K",
        "R",
        "Q",
        "successes",
        "trials",
        "success_rate",
        "min_cost",
        "marked_prob",
        "closed_form_prob",
    ]);
    let (mut pdqp_costs, mut grover_costs) = (Vec::new(), Vec::new());
    for n in n_min..=n_max {
        let marked = rng::stream(seed, n as u64).gen_range(0..1usize << n);
        let (k, r) = algorithms::default_search_parameters(n, k_mult, r_mult);
        let inst = SearchInstance::new(n, Some(marked), k, r, trials)?;
        let hits = algorithms::pdqp_search_trials(&inst, rng::derive(seed, 2 * n as u64))?
            .iter()
            .filter(|o| **o == SearchOutcome::Found(marked))
            .count();
        let best = algorithms::pdqp_min_cost(n, target)?;
        pdqp_costs.push(best);
        let g = algorithms::grover_min_cost(n, target)?;
        let curve = algorithms::marked_probability_curve(n, marked, k.max(g.iterations))?;
        table.rows.push(vec![
            json!("pdqp"),
            json!(n),
            json!(1usize << n),
            json!(k),
            json!(r),
            json!(inst.queries()),
            json!(hits),
            json!(trials),
            json!(hits as f64 / trials as f64),
            json!(best.cost),
            json!(curve[k]),
            json!(algorithms::closed_form_marked_probability(n)),
        ]);
        grover_costs.push(g);
        let ginst = SearchInstance::new(n, Some(marked), g.iterations, 1, trials)?;
        let ghits = algorithms::grover_baseline_trials(&ginst, rng::derive(seed, 2 * n as u64 + 1))?
            .iter()
            .filter(|o| **o == SearchOutcome::Found(marked))
            .count();
        table.rows.push(vec![
            json!("grover"),
            json!(n),
            json!(1usize << n),
            json!(g.iterations),
            json!(1),
            json!(g.iterations),
            json!(ghits),
            json!(trials),
            json!(ghits as f64 / trials as f64),
            json!(g.cost),
            json!(curve[g.iterations]),
            Value::Null,
        ]);
    }
    if n_max > n_min {
        table
            .summary
            .insert("pdqp_slope".into(), json!(algorithms::log_log_slope(&pdqp_costs)));
        table
            .summary
            .insert("grover_slope".into(), json!(algorithms::log_log_slope(&grover_costs)));
    }
    Ok(table)
}

fn cmd_sd(args: SdArgs, p: &mut Params, seed: u64) -> CliResult<Table> {
    let dir = p.path("dir", args.dir)?;
    let trials = p.get("trials", args.trials, 1)?;
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    if let Some(count) = p.optional("generate", args.generate)? {
        let n = p.get("n", args.n, 8)?;
        let m = p.get("m", args.m, 8)?;
        for (name, inst) in corpus::sd_corpus(count, n, m, rng::derive(seed, 1))? {
            corpus::write_sd_instance(&dir, &name, &inst)?;
        }
    }
    let instances = corpus::load_sd_dir(&dir)?;
    let mut table = Table::new([
        "instance",
        "promise",
        "tvd",
        "all_agree",
        "far",
        "trials",
        "far_rate",
        "correct",
    ]);
    let (mut correct, mut scored) = (0usize, 0usize);
    for (k, (name, inst)) in instances.iter().enumerate() {
        let decisions = algorithms::sd_decide_trials(inst, trials, rng::derive(seed, 100 + k as u64))?;
        let far = decisions.iter().filter(|d| **d == SdVerdict::Far).count();
        let right = inst.promise.map(|pr| decisions.iter().filter(|d| **d == pr).count());
        if let Some(r) = right {
            correct += r;
            scored += trials;
        }
        table.rows.push(vec![
            json!(name),
            inst.promise.map_or(Value::Null, |p| json!(p.to_string())),
            json!(inst.total_variation()),
            json!(algorithms::sd_all_agree_probability(inst)),
            json!(far),
            json!(trials),
            json!(far as f64 / trials as f64),
            right.map_or(Value::Null, |r| json!(r)),
        ]);
    }
    if scored > 0 {
        table
            .summary
            .insert("accuracy".into(), json!(correct as f64 / scored as f64));
    }
    table.summary.insert("instances".into(), json!(instances.len()));
    Ok(table)
}

fn cmd_verify(args: VerifyArgs, p: &mut Params, seed: u64) -> CliResult<(Table, usize)> {
    let name = p.get("suite", args.suite, "all".to_string())?;
    let quick = p.get("quick", args.quick, false)?;
    let suites = parse_suites(&name).map_err(|e| CliError::Usage(e.to_string()))?;
    let sizes = if quick { SuiteSizes::quick() } else { SuiteSizes::full() };
    let mut table = Table::new(["checker", "instance-id", "lhs", "rhs", "holds"]);
    let mut failures = 0;
    for suite in suites {
        let report = run_suite(suite, seed, &sizes)?;
        let bad = report.failures();
        failures += bad;
        let total = report.records.len();
        eprintln!("{suite}: {}/{total} checks hold", total - bad);
        table
            .summary
            .insert(format!("{suite}.passed"), json!(format!("{}/{total}", total - bad)));
        for r in report.records {
            table.rows.push(vec![
                json!(r.checker),
                json!(r.instance_id),
                json!(r.lhs),
                json!(r.rhs),
                json!(r.holds),
            ]);
        }
    }
    Ok((table, failures))
}

fn rate_row(demo: &str, setting: &str, trials: usize, errors: usize, predicted: f64) -> Vec<Value> {
    let rate = errors as f64 / trials as f64;
    let sigma = (predicted * (1.0 - predicted) / trials as f64).sqrt();
    vec![
        json!(demo),
        json!(setting),
        json!(trials),
        json!(errors),
        json!(rate),
        json!(predicted),
        json!(sigma),
    ]
}

fn cmd_phenomena(args: PhenomenaArgs, p: &mut Params, seed: u64) -> CliResult<Table> {
    let demo = p.require::<String>("demo", args.demo)?;
    let mut table = Table::new([
        "demo",
        "setting",
        "trials",
        "errors",
        "error_rate",
        "predicted",
        "sigma",
    ]);
    match demo.as_str() {
        "ftl" => {
            let k = p.get("k", args.k, 11)?;
            let trials = p.get("trials", args.trials, 100_000)?;
            for (tag, basis) in [Basis::Computational, Basis::Hadamard].into_iter().enumerate() {
                let guesses = algorithms::ftl_signal_trials(basis, k, trials, rng::derive(seed, tag as u64))?;
                let errors = guesses.iter().filter(|g| **g != basis).count();
                let predicted = match basis {
                    Basis::Computational => 0.0,
                    Basis::Hadamard => 2f64.powi(1 - k as i32),
                };
                let setting = format!("{basis:?}").to_lowercase();
                table.rows.push(rate_row("ftl", &setting, trials, errors, predicted));
            }
        }
        "one-query" => {
            let n = p.get("n", args.n, 3)?;
            let size = 1usize << n;
            let default_r = (size as f64 * (size as f64 / 0.01).ln()).ceil() as usize;
            let r = p.get("r", args.r, default_r)?;
            let trials = p.get("trials", args.trials, 10_000)?;
            let results: Vec<bool> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng::stream(seed, t);
                    let x: Vec<u8> = (0..size).map(|_| rng.gen_range(0..2)).collect();
                    let res = algorithms::one_query_evaluate(&x, r, &mut rng)?;
                    let wrong = res
                        .recovered
                        .iter()
                        .zip(&x)
                        .any(|(got, want)| got.is_some_and(|g| g != *want));
                    Ok(res.is_complete() && !wrong)
                })
                .collect::<Result<_, pdqp::Error>>()?;
            let errors = results.iter().filter(|ok| !**ok).count();
            let bound = size as f64 * (1.0 - 1.0 / size as f64).powi(r as i32);
            table
                .rows
                .push(rate_row("one-query", &format!("N={size},R={r}"), trials, errors, bound));
        }
        "one-qubit-comm" => {
            let n = p.get("n", args.n, 3)?;
            let r = p.get("r", args.r, 1usize << 12)?;
            let trials = p.get("trials", args.trials, 1000)?;
            let errors = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng::stream(seed, t);
                    let x = rng.gen_range(0..1usize << n);
                    Ok(usize::from(algorithms::one_qubit_communicate(x, n, r, &mut rng)? != x))
                })
                .collect::<Result<Vec<usize>, pdqp::Error>>()?
                .iter()
                .sum();
            let predicted = (0..1usize << n)
                .map(|x| algorithms::one_qubit_comm_error_probability(x, n, r))
                .sum::<f64>()
                / (1usize << n) as f64;
            table.rows.push(rate_row(
                "one-qubit-comm",
                &format!("n={n},R={r}"),
                trials,
                errors,
                predicted,
            ));
        }
        "clone" => {
            let r = p.get("r", args.r, 10_000)?;
            let trials = p.get("trials", args.trials, 100)?;
            let distances: Vec<f64> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng::stream(seed, t);
                    let state = corpus::random_state(1, &mut rng)?;
                    let est = algorithms::clone_via_tomography(&state, r, &mut rng)?;
                    est.reconstructed.trace_distance(&state)
                })
                .collect::<Result<_, pdqp::Error>>()?;
            let mean = distances.iter().sum::<f64>() / trials as f64;
            let max = distances.iter().copied().fold(0.0, f64::max);
            table = Table::new(["demo", "setting", "trials", "mean_trace_distance", "max_trace_distance"]);
            table.rows.push(vec![
                json!("clone"),
                json!(format!("R={r}")),
                json!(trials),
                json!(mean),
                json!(max),
            ]);
        }
        other => return Err(CliError::Usage(format!("unknown demo '{other}'"))),
    }
    Ok(table)
}

fn cmd_hv(args: HvArgs, p: &mut Params) -> CliResult<(Table, Value)> {
    let path = p.path("circuit", args.circuit)?;
    let theory = p.get("theory", args.theory, "dieks".to_string())?;
    let step = p.require::<usize>("step", args.step)?;
    let circuit = load_circuit(&path)?;
    if step == 0 || step > circuit.len() {
        return Err(CliError::Usage(format!("step {step} outside 1..={}", circuit.len())));
    }
    let phi = deferred_state(&circuit, step - 1)?;
    let gates = &circuit.steps()[step - 1].gates;
    let matrix = match theory.as_str() {
        "dieks" => dieks_joint(&phi, gates)?,
        "product" => {
            let measured: Vec<usize> = circuit.steps()[..step - 1]
                .iter()
                .flat_map(|s| s.measured.iter().copied())
                .fold(Vec::new(), |mut acc, q| {
                    if !acc.contains(&q) {
                        acc.push(q);
                    }
                    acc
                });
            let blocks = BlockStructure::from_measured_qubits(circuit.num_qubits(), &measured);
            product_theory_joint(&phi, gates, &blocks)?
        }
        other => return Err(CliError::Usage(format!("unknown theory '{other}'"))),
    };
    let dump = serde_json::to_value(matrix.dump()).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut table = Table::new(["i", "j", "p"]);
    for i in 0..matrix.dimension() {
        for j in 0..matrix.dimension() {
            let v = matrix.get(i, j);
            if v != 0.0 {
                table.rows.push(vec![json!(i), json!(j), json!(v)]);
            }
        }
    }
    table.summary.insert("blocks".into(), dump["blocks"].clone());
    Ok((table, dump))
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let (config_path, name) = match &cli.command {
        Command::Run(a) => (a.config.clone(), "run"),
        Command::Search(a) => (a.config.clone(), "search"),
        Command::Sd(a) => (a.config.clone(), "sd"),
        Command::Verify(a) => (a.config.clone(), "verify"),
        Command::Phenomena(a) => (a.config.clone(), "phenomena"),
        Command::Exact(a) => (a.config.clone(), "exact"),
        Command::Hv(a) => (a.config.clone(), "hv"),
    };
    let mut p = Params::load(config_path.as_deref())?;
    let seed = p.get("seed", cli.seed, 1)?;
    let format = p.get("format", cli.format, Format::Csv)?;
    let out = p.optional("out", cli.out.map(|o| o.to_string_lossy().into_owned()))?;
    // The output path is not part of the experiment's identity.
    p.used.remove("out");
    let mut failures = 0;
    let mut prefix: Option<Value> = None;
    let table = match cli.command {
        Command::Run(a) => cmd_run(a, &mut p, seed)?,
        Command::Search(a) => cmd_search(a, &mut p, seed)?,
        Command::Sd(a) => cmd_sd(a, &mut p, seed)?,
        Command::Verify(a) => {
            let (t, f) = cmd_verify(a, &mut p, seed)?;
            failures = f;
            t
        }
        Command::Phenomena(a) => cmd_phenomena(a, &mut p, seed)?,
        Command::Exact(a) => cmd_exact(a, &mut p, seed)?,
        Command::Hv(a) => {
            let (t, dump) = cmd_hv(a, &mut p)?;
            prefix = Some(dump);
            t
        }
    };
    let meta = Meta {
        command: name,
        seed,
        config: &p.used,
    };
    let bytes = match (format, prefix) {
        (Format::Json, Some(dump)) => {
            // The matrix dump replaces the per-entry rows.
            let mut b = format!("{dump}\n").into_bytes();
            let empty = Table {
                header: Vec::new(),
                rows: Vec::new(),
                summary: table.summary,
            };
            b.extend(render(&empty, format, &meta)?);
            b
        }
        _ => render(&table, format, &meta)?,
    };
    match out {
        Some(path) => fs::write(&path, bytes).map_err(|e| CliError::Usage(format!("{path}: {e}")))?,
        None => io::stdout().lock().write_all(&bytes)?,
    }
    if failures > 0 {
        return Err(CliError::Verification(format!("{failures} checks failed")));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(CliError::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
