//! Command-line front end: `generate`, `bounds`, `solve` and `report`.
//!
//! Exit codes: 0 success, 1 usage (bad flags or parameter values), 2 data
//! (unreadable or invalid files), 3 resource cap (enumeration refused, or
//! a limit hit before any solution was found).
//!
//! Settings come from flags, then from an optional `--config` file of
//! `key=value` lines whose keys mirror the long flag names, then from the
//! defaults. `SPCAP_THREADS` caps the worker threads used for the ants of
//! one batch; results do not depend on it.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::aco::{run_hybrid_prepared, write_run_log, Attractiveness, HybridParams, Prepared};
use crate::bounds::{build_strong_bm_model, pi_bound};
use crate::formulation::{objective_value, save_solution};
use crate::instance::{generate_instance, load_instance, save_instance, GenConfig, Instance};
use crate::oracle::{brute_force_opt, OracleError, DEFAULT_CAP};
use crate::report::{ReportRow, RunReport};
use crate::solver::{solve_mip, BnbConfig, MipStatus};
use crate::CandidateSolution;

/// RINS node limit under `--deterministic` when none is given.
pub const DETERMINISTIC_NODE_LIMIT: usize = 200;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Resource(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Resource(m) => m,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "spcap", version, about = "Scheduling, power and cluster assignment solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic instance.
    Generate(GenerateArgs),
    /// Compute the PI-bound and the BM-bound of an instance.
    Bounds(BoundsArgs),
    /// Solve an instance and print a report row.
    Solve(SolveArgs),
    /// Merge report CSV files into one report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Generator settings as key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    terminals: Option<usize>,
    #[arg(long)]
    bases: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Hybrid,
    Exact,
    Oracle,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    instance: PathBuf,
    #[arg(long)]
    id: Option<String>,
    #[arg(long, value_enum, default_value = "table")]
    out: OutFormat,
}

#[derive(Args, Debug, Default)]
struct SolveArgs {
    instance: PathBuf,
    /// Settings as key=value lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight of the trail against the attractiveness.
    #[arg(long)]
    alpha: Option<f64>,
    /// Ants per iteration.
    #[arg(long)]
    ants: Option<usize>,
    /// Width of the moving average used by the trail update.
    #[arg(long)]
    psi: Option<usize>,
    /// RINS agreement tolerance.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Seconds per RINS call.
    #[arg(long)]
    rins_time: Option<f64>,
    /// Branch-and-bound nodes per RINS call.
    #[arg(long)]
    rins_nodes: Option<usize>,
    /// Outer iterations.
    #[arg(long)]
    loops: Option<usize>,
    /// exact: one LP per candidate move; cached: one LP per state.
    #[arg(long)]
    attractiveness: Option<Attractiveness>,
    /// Wall-clock budget (seconds) for a hybrid run.
    #[arg(long)]
    time_budget: Option<f64>,
    /// Seconds for `--mode exact`.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, value_enum)]
    out: Option<OutFormat>,
    /// Instance name in the report (defaults to the file stem).
    #[arg(long)]
    id: Option<String>,
    /// Write the solution file here.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Write the per-ant run log (CSV) here.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Drop wall-clock limits and report zero times, so output depends on
    /// the seed alone.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report CSV files as written by `solve --out csv`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    out: OutFormat,
}

/// Runs the front end; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Bounds(a) => cmd_bounds(&a),
        Command::Solve(a) => cmd_solve(&a, err),
        Command::Report(a) => cmd_report(&a),
    };
    match result {
        Ok(text) => {
            if out.write_all(text.as_bytes()).is_err() {
                return 2;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped and
/// `-` in keys is read as `_`.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", i + 1))?;
        let key = k.trim().replace('-', "_");
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key {key}", i + 1));
        }
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn read_config(path: Option<&PathBuf>) -> Result<BTreeMap<String, String>, CliError> {
    match path {
        None => Ok(BTreeMap::new()),
        Some(p) => parse_key_values(&read_file(p)?).map_err(|m| CliError::Data(format!("{}: {m}", p.display()))),
    }
}

/// Takes `key` out of the config map and parses it.
fn take<T: std::str::FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    map.remove(key)
        .map(|v| v.parse::<T>().map_err(|e| CliError::Data(format!("config key {key}: {e}"))))
        .transpose()
}

fn reject_unknown(map: &BTreeMap<String, String>) -> Result<(), CliError> {
    match map.keys().next() {
        Some(k) => Err(CliError::Data(format!("unknown config key {k}"))),
        None => Ok(()),
    }
}

/// Generator settings from config keys, with the library defaults.
pub fn gen_config_from(map: &BTreeMap<String, String>) -> Result<GenConfig, CliError> {
    let mut map = map.clone();
    let mut c = GenConfig::default();
    macro_rules! set {
        ($($key:literal => $field:ident),* $(,)?) => {
            $( if let Some(v) = take(&mut map, $key)? { c.$field = v; } )*
        };
    }
    set!(
        "terminals" => num_terminals,
        "bases" => num_bases,
        "levels" => num_levels,
        "area_side" => area_side,
        "path_loss_exponent" => path_loss_exponent,
        "p_max" => p_max,
        "shadowing_db" => shadowing_db,
        "delta" => delta,
        "noise" => noise,
        "revenue" => revenue,
        "coop_cost" => coop_cost,
        "seed" => seed,
    );
    reject_unknown(&map)?;
    Ok(c)
}

fn cmd_generate(a: &GenerateArgs) -> Result<String, CliError> {
    let mut config = gen_config_from(&read_config(a.config.as_ref())?)?;
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(v) = a.terminals {
        config.num_terminals = v;
    }
    if let Some(v) = a.bases {
        config.num_bases = v;
    }
    if let Some(v) = a.levels {
        config.num_levels = v;
    }
    let inst = generate_instance(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    let text = save_instance(&inst);
    match &a.out {
        Some(p) => {
            write_file(p, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn load(path: &Path) -> Result<Instance, CliError> {
    load_instance(&read_file(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn instance_id(explicit: Option<&String>, path: &Path) -> String {
    explicit
        .cloned()
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "instance".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    #[serde(rename = "ID")]
    pub id: String,
    #[serde(rename = "PI-bound")]
    pub pi_bound: f64,
    #[serde(rename = "PI cuts")]
    pub pi_cuts: usize,
    #[serde(rename = "PI rounds")]
    pub pi_rounds: usize,
    #[serde(rename = "BM-bound")]
    pub bm_bound: f64,
}

fn cmd_bounds(a: &BoundsArgs) -> Result<String, CliError> {
    let inst = load(&a.instance)?;
    let prepared = Prepared::new(&inst).map_err(|e| CliError::Data(e.to_string()))?;
    let row = BoundsRow {
        id: instance_id(a.id.as_ref(), &a.instance),
        pi_bound: prepared.pi.value,
        pi_cuts: prepared.pi.cut_count,
        pi_rounds: prepared.pi.iterations,
        bm_bound: prepared.sbm.root_value(),
    };
    Ok(match a.out {
        OutFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(&row).map_err(|e| CliError::Data(e.to_string()))?;
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8")
        }
        OutFormat::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "instance   {}", row.id);
            let _ = writeln!(s, "PI-bound   {:.6} ({} cuts, {} rounds)", row.pi_bound, row.pi_cuts, row.pi_rounds);
            let _ = writeln!(s, "BM-bound   {:.6}", row.bm_bound);
            s
        }
    })
}

/// Fully resolved `solve` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSettings {
    pub mode: Mode,
    pub out: OutFormat,
    pub params: HybridParams,
    pub exact_time_limit: Duration,
    pub deterministic: bool,
}

fn seconds(key: &str, v: f64) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(v).map_err(|_| CliError::Usage(format!("{key} must be a non-negative number of seconds")))
}

fn resolve_solve(a: &SolveArgs, inst: &Instance) -> Result<SolveSettings, CliError> {
    let mut map = read_config(a.config.as_ref())?;
    let mode = match (a.mode, map.remove("mode")) {
        (Some(m), _) => m,
        (None, Some(s)) => Mode::from_str(&s, true).map_err(|e| CliError::Data(format!("config key mode: {e}")))?,
        (None, None) => Mode::Hybrid,
    };
    let out = match (a.out, map.remove("out")) {
        (Some(o), _) => o,
        (None, Some(s)) => OutFormat::from_str(&s, true).map_err(|e| CliError::Data(format!("config key out: {e}")))?,
        (None, None) => OutFormat::Table,
    };
    let mut p = HybridParams::defaults_for(inst);
    let seed = a.seed.or(take(&mut map, "seed")?);
    let alpha = a.alpha.or(take(&mut map, "alpha")?);
    let ants = a.ants.or(take(&mut map, "ants")?);
    let psi = a.psi.or(take(&mut map, "psi")?);
    let epsilon = a.epsilon.or(take(&mut map, "epsilon")?);
    let rins_time = a.rins_time.or(take(&mut map, "rins_time")?);
    let rins_nodes = a.rins_nodes.or(take(&mut map, "rins_nodes")?);
    let loops = a.loops.or(take(&mut map, "loops")?);
    let attractiveness = a.attractiveness.or(take(&mut map, "attractiveness")?);
    let time_budget = a.time_budget.or(take(&mut map, "time_budget")?);
    let time_limit = a.time_limit.or(take(&mut map, "time_limit")?);
    let deterministic = a.deterministic || take::<bool>(&mut map, "deterministic")?.unwrap_or(false);
    reject_unknown(&map)?;

    if let Some(v) = seed {
        p.seed = v;
    }
    if let Some(v) = alpha {
        p.alpha = v;
    }
    if let Some(v) = ants {
        p.ants = v;
        // ψ follows m unless set on its own.
        p.psi = v;
    }
    if let Some(v) = psi {
        p.psi = v;
    }
    if let Some(v) = epsilon {
        p.rins.epsilon = v;
    }
    if let Some(v) = rins_time {
        p.rins.time_limit = seconds("rins-time", v)?;
    }
    p.rins.node_limit = rins_nodes;
    if let Some(v) = loops {
        p.loops = v;
    }
    if let Some(v) = attractiveness {
        p.attractiveness = v;
    }
    p.time_budget = time_budget.map(|v| seconds("time-budget", v)).transpose()?;
    let mut exact_time_limit = seconds("time-limit", time_limit.unwrap_or(60.0))?;
    if deterministic {
        p.rins.time_limit = Duration::MAX;
        p.rins.node_limit.get_or_insert(DETERMINISTIC_NODE_LIMIT);
        p.time_budget = None;
        exact_time_limit = Duration::MAX;
    }
    p.threads = threads_from_env()?.min(p.ants).max(1);
    p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(SolveSettings {
        mode,
        out,
        params: p,
        exact_time_limit,
        deterministic,
    })
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("SPCAP_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!("SPCAP_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn cmd_solve(a: &SolveArgs, err: &mut dyn Write) -> Result<String, CliError> {
    let inst = load(&a.instance)?;
    let s = resolve_solve(a, &inst)?;
    let id = instance_id(a.id.as_ref(), &a.instance);
    let start = Instant::now();
    let (mut row, solution) = match s.mode {
        Mode::Hybrid => {
            let prepared = Prepared::new(&inst).map_err(|e| CliError::Data(e.to_string()))?;
            let r = run_hybrid_prepared(&inst, &prepared, &s.params).map_err(|e| CliError::Data(e.to_string()))?;
            if let Some(path) = &a.log {
                let mut log = r.log.clone();
                if s.deterministic {
                    log.iter_mut().for_each(|row| row.elapsed_seconds = 0.0);
                }
                let mut buf = Vec::new();
                write_run_log(&log, &mut buf).map_err(|e| CliError::Data(e.to_string()))?;
                write_file(path, &String::from_utf8(buf).expect("UTF-8"))?;
            }
            if r.budget_exhausted {
                let _ = writeln!(err, "note: time budget ended the run after {} iterations", r.iterations);
            }
            (ReportRow::for_hybrid(&id, &inst, &r, 0.0), r.best)
        }
        Mode::Exact => {
            let sol = solve_exact(&inst, s.exact_time_limit, err)?;
            let value = objective_value(&inst, &sol);
            (ReportRow::for_solution(&id, &inst, &sol, value, 0.0), sol)
        }
        Mode::Oracle => {
            let r = brute_force_opt(&inst, DEFAULT_CAP).map_err(|e| match e {
                OracleError::TooManyVectors { .. } | OracleError::TooManyBases { .. } => CliError::Resource(e.to_string()),
            })?;
            (ReportRow::for_solution(&id, &inst, &r.solution, r.objective, 0.0), r.solution)
        }
    };
    if row.pi_bound.is_none() {
        row.pi_bound = pi_bound(&inst).ok().map(|b| b.value);
    }
    if !s.deterministic {
        row.wall_seconds = start.elapsed().as_secs_f64();
    }
    if let Some(path) = &a.solution {
        write_file(path, &save_solution(&inst, &solution))?;
    }
    let report = RunReport { rows: vec![row] };
    Ok(match s.out {
        OutFormat::Csv => report.to_csv_string(),
        OutFormat::Table => report.render_table(),
    })
}

/// Branch and bound on the strengthened big-M model.
fn solve_exact(inst: &Instance, time_limit: Duration, err: &mut dyn Write) -> Result<CandidateSolution, CliError> {
    let model = build_strong_bm_model(inst);
    let config = BnbConfig {
        time_limit,
        ..BnbConfig::default()
    };
    let r = solve_mip(&model, &config).map_err(|e| CliError::Data(e.to_string()))?;
    match (r.status, r.incumbent) {
        (MipStatus::Optimal, Some(v)) => Ok(CandidateSolution::from_vector(inst, &v)),
        (MipStatus::TimeLimit | MipStatus::NodeLimit, Some(v)) => {
            let _ = writeln!(
                err,
                "note: limit reached after {} nodes; best bound {:.6}",
                r.nodes, r.best_bound
            );
            Ok(CandidateSolution::from_vector(inst, &v))
        }
        (MipStatus::TimeLimit | MipStatus::NodeLimit, None) => {
            Err(CliError::Resource(format!("limit reached after {} nodes without a solution", r.nodes)))
        }
        (status, _) => Err(CliError::Data(format!("branch and bound ended with {status:?}"))),
    }
}

fn cmd_report(a: &ReportArgs) -> Result<String, CliError> {
    let mut report = RunReport::default();
    for path in &a.inputs {
        let text = read_file(path)?;
        let part = RunReport::read_csv(text.as_bytes()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        report.rows.extend(part.rows);
    }
    Ok(match a.out {
        OutFormat::Csv => report.to_csv_string(),
        OutFormat::Table => report.render_table(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::fixtures::tiny1;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("spcap").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn key_values() {
        let m = parse_key_values("# comment\nalpha = 0.3\nrins-time=5 # inline\n\n").unwrap();
        assert_eq!(m.get("alpha").unwrap(), "0.3");
        assert_eq!(m.get("rins_time").unwrap(), "5");
        assert!(parse_key_values("alpha").is_err());
        assert!(parse_key_values("a=1\na=2").is_err());
    }

    #[test]
    fn gen_config_keys() {
        let m = parse_key_values("terminals=7\nbases=3\nlevels=2\nseed=9").unwrap();
        let c = gen_config_from(&m).unwrap();
        assert_eq!((c.num_terminals, c.num_bases, c.num_levels, c.seed), (7, 3, 2, 9));
        let bad = parse_key_values("colour=red").unwrap();
        assert_eq!(gen_config_from(&bad).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn solve_defaults_follow_the_instance() {
        let inst = crate::instance::generate_instance(&GenConfig::new(4, 5, 2, 1)).unwrap();
        let s = resolve_solve(&SolveArgs::default(), &inst).unwrap();
        assert_eq!((s.params.ants, s.params.psi, s.params.loops), (3, 3, 50));
        assert_eq!(s.params.alpha, 0.5);
        assert_eq!(s.params.rins.epsilon, 0.01);
        assert_eq!(s.params.rins.time_limit, Duration::from_secs(10));
        assert_eq!((s.mode, s.out), (Mode::Hybrid, OutFormat::Table));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(call(&["solve"]).0, 1);
        assert_eq!(call(&["solve", "/nonexistent/instance.txt"]).0, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny1.txt");
        std::fs::write(&path, save_instance(&tiny1())).unwrap();
        let p = path.to_str().unwrap();
        assert_eq!(call(&["solve", p, "--alpha", "2"]).0, 1);
        assert_eq!(call(&["solve", p, "--mode", "fast"]).0, 1);
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("solve"));
    }

    #[test]
    fn oracle_on_tiny1() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny1.txt");
        std::fs::write(&path, save_instance(&tiny1())).unwrap();
        let (code, out, _) = call(&["solve", path.to_str().unwrap(), "--mode", "oracle", "--out", "csv", "--deterministic"]);
        assert_eq!(code, 0);
        let r = RunReport::read_csv(out.as_bytes()).unwrap();
        assert_eq!(r.rows[0].objective, 10.0);
        assert_eq!(r.rows[0].id, "tiny1");
    }
}
