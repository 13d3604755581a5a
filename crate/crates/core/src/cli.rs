//! The `nvm` command line: argument schema, config-file merging, artifact
//! emission and exit codes.
//!
//! Config files hold one `key = value` pair per line, where `key` is a long
//! flag name without the leading dashes (`-` and `_` are interchangeable).
//! Blank lines and lines starting with `#` are skipped. A boolean flag is
//! enabled by `key = true`. Flags given on the command line take precedence
//! over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::analysis::{fit_decay, fit_mc_decay, mixing_scan, otm_bound_check, GraphFamily};
use crate::coupling::{estimate_m, run_coupling};
use crate::ctmc::{build_generator, exact_m_curve, exact_mixing_time, stationary, Distribution};
use crate::dynamics::{simulate, Configuration, ModelParams};
use crate::error::Error;
use crate::graph::{Graph, LatticeBox, Point};
use crate::reversibility::{detailed_balance_violation, ising_beta, kolmogorov_check};
use crate::ssm::{fit_ssm_decay, ssm_scan, BoundaryCondition};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_BOUND_VIOLATED: i32 = 4;

/// Slack allowed on exact bound comparisons.
const EXACT_BOUND_SLACK: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("bound check failed: {0}")]
    Bound(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(Error::Input(_) | Error::NonErgodic(_)) => EXIT_INVALID_CONFIG,
            CliError::Model(Error::Resource { .. }) => EXIT_RESOURCE,
            CliError::Config(_) | CliError::Read { .. } => EXIT_INVALID_CONFIG,
            CliError::Bound(_) => EXIT_BOUND_VIOLATED,
            _ => EXIT_FAILURE,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

#[derive(Parser, Debug)]
#[command(name = "nvm", version, about = "Noisy voter model experiments: simulation, coupling and exact analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Serialize)]
pub struct GlobalArgs {
    /// Plain-text `key = value` file supplying default flag values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving artifacts and the run manifest.
    #[arg(long, global = true, env = "NVM_OUTPUT_DIR", default_value = "nvm-out")]
    pub out_dir: PathBuf,
    /// Format of tabular artifacts.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate one trajectory.
    Simulate(SimulateArgs),
    /// Run the grand coupling from two initial configurations.
    Couple(CoupleArgs),
    /// Monte Carlo estimate of the disagreement curve M(t).
    Mcurve(McurveArgs),
    /// Exact computations on the full configuration space.
    #[command(subcommand)]
    Exact(ExactCommand),
    /// Exact mixing times across a family of graphs.
    MixingScan(MixingScanArgs),
    /// Boundary-influence scan on a lattice box.
    SsmScan(SsmScanArgs),
    /// Kolmogorov-criterion reversibility check.
    Reversibility(ReversibilityArgs),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactCommand {
    /// Stationary law, printed as JSON.
    Stationary(ExactArgs),
    /// Law at time t from a point mass.
    Transient(TransientArgs),
    /// Mixing time t_mix(ε).
    MixingTime(MixingTimeArgs),
    /// Exact M(t) from the disagreement chain.
    Mcurve(ExactCurveArgs),
    /// Distance between the all-0 and all-1 starts against n·exp(−ct).
    Otm(ExactCurveArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
#[group(required = true, multiple = false)]
pub struct GraphArgs {
    /// Shorthand: k2, path:N, cycle:N, grid:WxH or gnp:N:P:SEED.
    #[arg(long)]
    pub graph: Option<String>,
    /// Edge-list file: a line "n m" followed by m lines "u v".
    #[arg(long)]
    pub graph_file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    /// Noise rate δ.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    /// Second noise rate β (defaults to δ).
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    /// Evenly spaced grid points on [0, t-max], endpoints included.
    #[arg(long, default_value_t = 50)]
    pub points: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// all0, all1 or a bit string (vertex 0 first).
    #[arg(long, default_value = "all0")]
    pub init: String,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Export the event list as a trajectory table.
    #[arg(long)]
    pub trajectory: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "all0")]
    pub x0: String,
    #[arg(long, default_value = "all1")]
    pub y0: String,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct McurveArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 10_000)]
    pub replicas: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with a distinct code if m_hat exceeds exp(−ct) + 3·stderr anywhere.
    #[arg(long)]
    pub check_bound: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct ExactArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct TransientArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "all0")]
    pub init: String,
    #[arg(long)]
    pub t: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct MixingTimeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct ExactCurveArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Exit with a distinct code if the bound is exceeded beyond 1e-10.
    #[arg(long)]
    pub check_bound: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct MixingScanArgs {
    /// cycle, path or square-box.
    #[arg(long, default_value = "cycle")]
    pub family: String,
    /// Comma-separated sizes.
    #[arg(long, default_value = "4,6,8,10,12")]
    pub sizes: String,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long)]
    pub check_bound: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct SsmScanArgs {
    /// Lattice dimension; checked against the box when given.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Cuboid box as lo..hi per axis, comma-separated, e.g. 0..8,0..0.
    #[arg(long, conflicts_with = "box_points")]
    pub cuboid: Option<String>,
    /// Explicit box points, `;`-separated, coordinates `:`-separated.
    #[arg(long)]
    pub box_points: Option<String>,
    /// Observed sub-box H, same syntax as --box-points.
    #[arg(long)]
    pub h: String,
    /// Boundary sites to flip (defaults to every boundary site).
    #[arg(long)]
    pub sites: Option<String>,
    /// Base boundary condition: all0, all1 or random.
    #[arg(long, default_value = "all0")]
    pub boundary: String,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Seed for --boundary random.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct ReversibilityArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 6)]
    pub max_cycle_len: usize,
    /// Relative tolerance on the cycle rate products.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

/// Flags that may not be filled from a config file once the command line
/// sets any member of the same group.
const EXCLUSIVE: &[&[&str]] = &[&["graph", "graph-file"], &["cuboid", "box-points"]];

/// Parses `key = value` lines into `(line number, key, value)`.
pub fn parse_config(text: &str) -> CliResult<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return config_err(format!("line {}: expected `key = value`, got {line:?}", i + 1));
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return config_err(format!("line {}: empty key", i + 1));
        }
        out.push((i + 1, key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn given_on_command_line(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_value)
    })
}

fn long_flags(cmd: &clap::Command, out: &mut Vec<(String, bool)>) {
    for a in cmd.get_arguments() {
        if let Some(l) = a.get_long() {
            out.push((l.to_string(), !a.get_action().takes_values()));
        }
    }
    for s in cmd.get_subcommands() {
        long_flags(s, out);
    }
}

/// Appends config-file values for flags not given on the command line.
pub fn merge_config(args: Vec<OsString>, text: &str) -> CliResult<Vec<OsString>> {
    let mut known = Vec::new();
    long_flags(&Cli::command(), &mut known);
    let mut merged = args.clone();
    for (line, key, value) in parse_config(text)? {
        if key == "config" {
            return config_err(format!("line {line}: config files cannot include other config files"));
        }
        let Some(&(_, is_switch)) = known.iter().find(|(k, _)| *k == key) else {
            return config_err(format!("line {line}: unknown key `{key}`"));
        };
        let group: &[&str] = EXCLUSIVE.iter().find(|g| g.contains(&key.as_str())).copied().unwrap_or(&[]);
        if given_on_command_line(&args, &key) || group.iter().any(|k| given_on_command_line(&args, k)) {
            continue;
        }
        if is_switch {
            match value.as_str() {
                "true" => merged.push(format!("--{key}").into()),
                "false" => {}
                _ => return config_err(format!("line {line}: `{key}` takes true or false, got {value:?}")),
            }
        } else {
            merged.push(format!("--{key}").into());
            merged.push(value.into());
        }
    }
    Ok(merged)
}

/// Evenly spaced grid on `[0, t_max]` with `points` entries.
pub fn time_grid(t_max: f64, points: usize) -> CliResult<Vec<f64>> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return config_err(format!("--t-max: must be finite and > 0, got {t_max}"));
    }
    if points < 2 {
        return config_err(format!("--points: must be at least 2, got {points}"));
    }
    Ok((0..points).map(|k| t_max * k as f64 / (points - 1) as f64).collect())
}

fn load_graph(g: &GraphArgs) -> CliResult<Graph> {
    match (&g.graph, &g.graph_file) {
        (Some(s), None) => Ok(Graph::from_shorthand(s)?),
        (None, Some(p)) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Read { path: p.clone(), source })?;
            Ok(Graph::parse_edge_list(&text)?)
        }
        _ => config_err("exactly one of --graph and --graph-file is required"),
    }
}

fn model(m: &ModelArgs) -> CliResult<ModelParams> {
    let p = match m.beta {
        Some(b) => ModelParams::asymmetric(m.delta, b),
        None => ModelParams::symmetric(m.delta),
    };
    p.validate()?;
    Ok(p)
}

fn parse_point(text: &str) -> CliResult<Point> {
    let coords = text
        .trim()
        .split(':')
        .map(|c| c.trim().parse::<i64>().map_err(|_| CliError::Config(format!("bad coordinate {c:?} in point {text:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Point(coords))
}

fn parse_points(text: &str) -> CliResult<Vec<Point>> {
    text.split(';').filter(|s| !s.trim().is_empty()).map(parse_point).collect()
}

fn parse_cuboid(text: &str) -> CliResult<Vec<(i64, i64)>> {
    text.split(',')
        .map(|axis| {
            let (lo, hi) = axis
                .split_once("..")
                .ok_or_else(|| CliError::Config(format!("--cuboid: expected lo..hi, got {axis:?}")))?;
            let num = |s: &str| {
                s.trim().parse::<i64>().map_err(|_| CliError::Config(format!("--cuboid: bad bound {s:?}")))
            };
            Ok((num(lo)?, num(hi)?))
        })
        .collect()
}

/// Parses a CSV table (header first) into an array of records. Cells are
/// emitted as integers or floats when they parse as such.
fn csv_to_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().map(|h| h.split(',').collect()).unwrap_or_default();
    let rows = lines
        .map(|line| {
            let mut rec = Map::new();
            for (k, cell) in header.iter().zip(line.split(',')) {
                let v = if let Ok(i) = cell.parse::<i64>() {
                    json!(i)
                } else if let Ok(x) = cell.parse::<f64>() {
                    json!(x)
                } else {
                    json!(cell)
                };
                rec.insert((*k).to_string(), v);
            }
            Value::Object(rec)
        })
        .collect();
    Value::Array(rows)
}

struct Output {
    dir: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl Output {
    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes a table as `<stem>.csv` or `<stem>.json`.
    fn table(&mut self, stem: &str, csv: &str) -> CliResult<()> {
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), csv),
            Format::Json => self.write(&format!("{stem}.json"), &pretty(&csv_to_json(csv))),
        }
    }

    fn json(&mut self, stem: &str, value: &Value) -> CliResult<()> {
        self.write(&format!("{stem}.json"), &pretty(value))
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data serializes")
}

struct Report {
    summary: Value,
    seed: Option<u64>,
    /// Set when a requested bound check failed; artifacts are still written.
    bound_failure: Option<String>,
}

impl Report {
    fn new(summary: Value) -> Self {
        Report { summary, seed: None, bound_failure: None }
    }
}

fn fit_block<T: Serialize>(fit: crate::Result<T>) -> CliResult<Value> {
    match fit {
        Ok(f) => Ok(to_value(&f)),
        Err(Error::DegenerateFit(msg)) => Ok(json!({ "error": msg })),
        Err(e) => Err(e.into()),
    }
}

fn run_simulate(a: &SimulateArgs, out: &mut Output) -> CliResult<Report> {
    let g = load_graph(&a.graph)?;
    let p = model(&a.model)?;
    let init = Configuration::parse(&a.init, g.n())?;
    let traj = simulate(&g, &p, &init, a.t_max, a.seed)?;
    if a.trajectory {
        out.table("trajectory", &traj.to_csv())?;
    }
    let fin = traj.final_config();
    let n = g.n().max(1) as f64;
    let mut r = Report::new(json!({
        "events": traj.events.len(),
        "t_end": traj.t_end,
        "initial": init.to_string(),
        "final": fin.to_string(),
        "final_density": fin.count_ones() as f64 / n,
    }));
    r.seed = Some(a.seed);
    Ok(r)
}

fn run_couple(a: &CoupleArgs, out: &mut Output) -> CliResult<Report> {
    let g = load_graph(&a.graph)?;
    let p = model(&a.model)?;
    let x0 = Configuration::parse(&a.x0, g.n())?;
    let y0 = Configuration::parse(&a.y0, g.n())?;
    let traj = run_coupling(&g, &p, &x0, &y0, a.t_max, a.seed)?;
    out.table("coupling", &traj.to_csv())?;
    let ordered = x0.le(&y0);
    let mut violations = 0u64;
    let mut coalesced_at: Option<f64> = None;
    traj.replay(|s| {
        if ordered && !s.x.le(&s.y) {
            violations += 1;
        }
        if coalesced_at.is_none() && s.disagreement().is_coalesced() {
            coalesced_at = Some(s.time);
        }
    });
    let fin = traj.final_state();
    let mut r = Report::new(json!({
        "events": traj.events.len(),
        "t_end": traj.t_end,
        "coalescence_time": coalesced_at,
        "final_disagreements": fin.disagreement().count(),
        "initially_ordered": ordered,
        "order_violations": if ordered { Some(violations) } else { None },
    }));
    r.seed = Some(a.seed);
    Ok(r)
}

fn run_mcurve(a: &McurveArgs, out: &mut Output) -> CliResult<Report> {
    let g = load_graph(&a.graph)?;
    let p = model(&a.model)?;
    let grid = time_grid(a.grid.t_max, a.grid.points)?;
    let est = estimate_m(&g, &p, &grid, a.replicas, a.seed)?;
    out.table("mcurve", &est.to_csv())?;
    let fit = fit_block(fit_mc_decay(&est, None))?;
    out.json("mcurve-fit", &fit)?;
    let c = p.noise_fraction();
    let worst = (0..grid.len())
        .map(|k| (-c * grid[k]).exp() + 3.0 * est.m_stderr[k] - est.m_hat[k])
        .fold(f64::INFINITY, f64::min);
    let ok = worst >= 0.0;
    let mut r = Report::new(json!({
        "replicas": est.replicas,
        "bound": { "C": 1.0, "c": c, "sigmas": 3.0, "holds": ok, "min_margin": worst },
        "fit": fit,
    }));
    r.seed = Some(a.seed);
    if a.check_bound && !ok {
        r.bound_failure = Some(format!("m_hat exceeds exp(-ct) + 3*stderr (min margin {worst:e})"));
    }
    Ok(r)
}

fn run_exact(cmd: &ExactCommand, out: &mut Output) -> CliResult<Report> {
    match cmd {
        ExactCommand::Stationary(a) => {
            let g = load_graph(&a.graph)?;
            let p = model(&a.model)?;
            let q = build_generator(&g, &p, None)?;
            let pi = stationary(&q)?;
            out.table("stationary", &pi.to_csv(g.n()))?;
            let states: Vec<String> = (0..q.dim()).map(|s| Configuration::from_state(s, g.n()).to_string()).collect();
            Ok(Report::new(json!({
                "states": states,
                "probabilities": pi.0,
                "balance_residual": q.balance_residual(&pi),
            })))
        }
        ExactCommand::Transient(a) => {
            let g = load_graph(&a.graph)?;
            let p = model(&a.model)?;
            let init = Configuration::parse(&a.init, g.n())?;
            let q = build_generator(&g, &p, None)?;
            let law = q.transient(&Distribution::point_mass(q.dim(), init.to_state()), a.t)?;
            out.table("transient", &law.to_csv(g.n()))?;
            let marginals: Vec<f64> = (0..g.n()).map(|v| law.marginal(v)).collect();
            Ok(Report::new(json!({ "t": a.t, "initial": init.to_string(), "marginals": marginals })))
        }
        ExactCommand::MixingTime(a) => {
            let g = load_graph(&a.graph)?;
            let p = model(&a.model)?;
            let q = build_generator(&g, &p, None)?;
            let res = exact_mixing_time(&q, a.epsilon)?;
            let v = to_value(&res);
            out.json("mixing-time", &v)?;
            Ok(Report::new(v))
        }
        ExactCommand::Mcurve(a) => {
            let g = load_graph(&a.graph)?;
            let p = model(&a.model)?;
            let grid = time_grid(a.grid.t_max, a.grid.points)?;
            let curve = exact_m_curve(&g, &p, &grid)?;
            out.table("exact-mcurve", &curve.to_csv(&p))?;
            let fit = fit_block(fit_decay(&curve.times, &curve.m, None))?;
            out.json("exact-mcurve-fit", &fit)?;
            let c = p.noise_fraction();
            let worst = grid.iter().zip(&curve.m).map(|(t, m)| (-c * t).exp() - m).fold(f64::INFINITY, f64::min);
            let ok = worst >= -EXACT_BOUND_SLACK;
            let mut r = Report::new(json!({
                "bound": { "C": 1.0, "c": c, "holds": ok, "min_margin": worst },
                "fit": fit,
            }));
            if a.check_bound && !ok {
                r.bound_failure = Some(format!("M(t) exceeds exp(-ct) (min margin {worst:e})"));
            }
            Ok(r)
        }
        ExactCommand::Otm(a) => {
            let g = load_graph(&a.graph)?;
            let p = model(&a.model)?;
            let grid = time_grid(a.grid.t_max, a.grid.points)?;
            let rows = otm_bound_check(&g, &p, &grid)?;
            let f = crate::fmt_float;
            let mut csv = String::from("t,tv,union_bound,bound,margin\n");
            for r in &rows {
                csv.push_str(&format!("{},{},{},{},{}\n", f(r.t), f(r.tv), f(r.union_bound), f(r.bound), f(r.margin)));
            }
            out.table("otm", &csv)?;
            let worst = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
            let ok = worst >= -EXACT_BOUND_SLACK;
            let mut r = Report::new(json!({ "bound": { "C": 1.0, "holds": ok, "min_margin": worst } }));
            if a.check_bound && !ok {
                r.bound_failure = Some(format!("tv exceeds n*exp(-ct) (min margin {worst:e})"));
            }
            Ok(r)
        }
    }
}

fn run_mixing_scan(a: &MixingScanArgs, out: &mut Output) -> CliResult<Report> {
    let family: GraphFamily = a.family.parse()?;
    let sizes = a
        .sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| CliError::Config(format!("--sizes: bad size {s:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let p = ModelParams::symmetric(a.delta);
    let scan = mixing_scan(family, &sizes, &p, a.epsilon)?;
    out.table("mixing-scan", &scan.to_csv())?;
    let fit = to_value(&scan.fit);
    out.json("mixing-fit", &fit)?;
    let ok = scan.all_within_bound();
    let mut r = Report::new(json!({ "bound": { "C": 1.0, "holds": ok }, "fit": fit }));
    if a.check_bound && !ok {
        let bad: Vec<usize> = scan.rows.iter().filter(|r| r.t_mix > r.bound).map(|r| r.n).collect();
        r.bound_failure = Some(format!("t_mix exceeds the bound for n in {bad:?}"));
    }
    Ok(r)
}

fn run_ssm_scan(a: &SsmScanArgs, out: &mut Output) -> CliResult<Report> {
    let b = match (&a.cuboid, &a.box_points) {
        (Some(c), None) => LatticeBox::cuboid(&parse_cuboid(c)?)?,
        (None, Some(pts)) => {
            let pts = parse_points(pts)?;
            let dim = pts.first().map(|p| p.0.len()).unwrap_or(0);
            LatticeBox::new(dim, &pts)?
        }
        _ => return config_err("exactly one of --cuboid and --box-points is required"),
    };
    if let Some(d) = a.dim {
        if d != b.dim {
            return config_err(format!("--dim: {d} does not match the box dimension {}", b.dim));
        }
    }
    let h = parse_points(&a.h)?;
    let sites = match &a.sites {
        Some(s) => parse_points(s)?,
        None => b.boundary.clone(),
    };
    let tau = match a.boundary.as_str() {
        "all0" => BoundaryCondition::constant(&b, false),
        "all1" => BoundaryCondition::constant(&b, true),
        "random" => BoundaryCondition::random(&b, a.seed),
        other => return config_err(format!("--boundary: expected all0, all1 or random, got {other:?}")),
    };
    let p = match a.beta {
        Some(beta) => ModelParams::asymmetric(a.delta, beta),
        None => ModelParams::symmetric(a.delta),
    };
    let table = ssm_scan(&b, &h, &p, &tau, &sites)?;
    out.table("ssm", &table.to_csv())?;
    let fit = fit_block(fit_ssm_decay(&table))?;
    out.json("ssm-fit", &fit)?;
    let by_dist = table.max_tv_by_distance();
    let monotone = by_dist.windows(2).all(|w| w[1].1 <= w[0].1);
    let mut r = Report::new(json!({
        "max_tv_by_distance": by_dist,
        "nonincreasing": monotone,
        "fit": fit,
    }));
    if a.boundary == "random" {
        r.seed = Some(a.seed);
    }
    Ok(r)
}

fn run_reversibility(a: &ReversibilityArgs, out: &mut Output) -> CliResult<Report> {
    let g = load_graph(&a.graph)?;
    let p = model(&a.model)?;
    let q = build_generator(&g, &p, None)?;
    let v = kolmogorov_check(&q, a.max_cycle_len, a.tol)?;
    let witness = v.witness.as_ref().map(|w| {
        let configs: Vec<String> = w.states.iter().map(|&s| Configuration::from_state(s, g.n()).to_string()).collect();
        json!({ "states": w.states, "configs": configs, "forward": w.forward, "backward": w.backward })
    });
    let mut body = json!({
        "verdict": if v.reversible { "reversible" } else { "not reversible" },
        "reversible": v.reversible,
        "witness": witness,
        "cycles_checked": v.cycles_checked,
        "max_cycle_len": v.max_cycle_len,
    });
    let cycle_len = a.graph.graph.as_deref().and_then(|s| s.strip_prefix("cycle:")).and_then(|n| n.parse::<usize>().ok());
    if let (Some(n), true) = (cycle_len, p.delta == p.beta) {
        let beta = ising_beta(p.delta)?;
        body["ising"] = json!({
            "beta": beta,
            "detailed_balance_violation": detailed_balance_violation(n, p.delta, beta)?,
        });
    }
    out.json("reversibility", &body)?;
    Ok(Report::new(body))
}

fn command_path(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Couple(_) => "couple",
        Command::Mcurve(_) => "mcurve",
        Command::Exact(ExactCommand::Stationary(_)) => "exact stationary",
        Command::Exact(ExactCommand::Transient(_)) => "exact transient",
        Command::Exact(ExactCommand::MixingTime(_)) => "exact mixing-time",
        Command::Exact(ExactCommand::Mcurve(_)) => "exact mcurve",
        Command::Exact(ExactCommand::Otm(_)) => "exact otm",
        Command::MixingScan(_) => "mixing-scan",
        Command::SsmScan(_) => "ssm-scan",
        Command::Reversibility(_) => "reversibility",
    }
}

fn dispatch(cmd: &Command, out: &mut Output) -> CliResult<Report> {
    match cmd {
        Command::Simulate(a) => run_simulate(a, out),
        Command::Couple(a) => run_couple(a, out),
        Command::Mcurve(a) => run_mcurve(a, out),
        Command::Exact(e) => run_exact(e, out),
        Command::MixingScan(a) => run_mixing_scan(a, out),
        Command::SsmScan(a) => run_ssm_scan(a, out),
        Command::Reversibility(a) => run_reversibility(a, out),
    }
}

/// Runs a parsed command, writes its artifacts and manifest, and prints the
/// summary JSON to stdout.
pub fn execute(cli: &Cli, config: Option<(&Path, &str)>) -> CliResult<()> {
    let started = Instant::now();
    fs::create_dir_all(&cli.global.out_dir)
        .map_err(|source| CliError::Write { path: cli.global.out_dir.clone(), source })?;
    let mut out = Output { dir: cli.global.out_dir.clone(), format: cli.global.format, written: Vec::new() };
    let report = match cli.global.workers {
        Some(0) => return config_err("--workers: must be at least 1"),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?
            .install(|| dispatch(&cli.command, &mut out))?,
        None => dispatch(&cli.command, &mut out)?,
    };
    let config_echo = config.map(|(path, text)| {
        let pairs: BTreeMap<String, String> =
            parse_config(text).unwrap_or_default().into_iter().map(|(_, k, v)| (k, v)).collect();
        json!({ "path": path, "values": pairs })
    });
    let manifest = json!({
        "command": command_path(&cli.command),
        "args": to_value(&cli.command),
        "global": to_value(&cli.global),
        "config_file": config_echo,
        "seed": report.seed,
        "versions": { "nvm": env!("CARGO_PKG_VERSION"), "package": env!("CARGO_PKG_NAME") },
        "workers": cli.global.workers.unwrap_or_else(rayon::current_num_threads),
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "artifacts": out.written,
        "summary": report.summary,
    });
    out.json("manifest", &manifest)?;
    print!("{}", pretty(&report.summary));
    match report.bound_failure {
        Some(msg) => Err(CliError::Bound(msg)),
        None => Ok(()),
    }
}

/// Entry point shared by the binary and tests; returns the process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let config = match config_path(&args) {
        Some(p) => match fs::read_to_string(&p) {
            Ok(text) => Some((p, text)),
            Err(source) => return report_error(&CliError::Read { path: p, source }),
        },
        None => None,
    };
    let merged = match &config {
        Some((p, text)) => match merge_config(args, text) {
            Ok(m) => m,
            Err(CliError::Config(msg)) => {
                return report_error(&CliError::Config(format!("{}: {msg}", p.display())));
            }
            Err(e) => return report_error(&e),
        },
        None => args,
    };
    let cli = match Cli::try_parse_from(merged) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, config.as_ref().map(|(p, t)| (p.as_path(), t.as_str()))) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("nvm: {e}");
    e.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_lines() {
        let pairs = parse_config("# c\n\ndelta = 0.5\nt_max=3\n").unwrap();
        assert_eq!(pairs, vec![(3, "delta".into(), "0.5".into()), (4, "t-max".into(), "3".into())]);
        assert!(parse_config("delta 0.5").is_err());
        assert!(parse_config(" = 1").is_err());
    }

    #[test]
    fn command_line_beats_config() {
        let args = os(&["nvm", "mcurve", "--delta", "2"]);
        let merged = merge_config(args, "delta = 0.5\ngraph = k2\nreplicas = 10\n").unwrap();
        let cli = Cli::try_parse_from(merged).unwrap();
        let Command::Mcurve(m) = cli.command else { panic!("wrong command") };
        assert_eq!(m.model.delta, 2.0);
        assert_eq!(m.graph.graph.as_deref(), Some("k2"));
        assert_eq!(m.replicas, 10);
    }

    #[test]
    fn exclusive_keys_yield_to_command_line() {
        let args = os(&["nvm", "exact", "stationary", "--graph", "k2"]);
        let merged = merge_config(args, "graph-file = g.txt\ndelta = 1\n").unwrap();
        assert!(Cli::try_parse_from(merged).is_ok());
    }

    #[test]
    fn unknown_and_bad_switch_keys() {
        let args = os(&["nvm", "mcurve"]);
        assert!(matches!(merge_config(args.clone(), "colour = red"), Err(CliError::Config(_))));
        assert!(matches!(merge_config(args, "check-bound = maybe"), Err(CliError::Config(_))));
    }

    #[test]
    fn grid_endpoints() {
        let g = time_grid(10.0, 50).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[49], 10.0);
        assert!(time_grid(10.0, 1).is_err());
        assert!(time_grid(-1.0, 5).is_err());
    }

    #[test]
    fn lattice_syntax() {
        assert_eq!(parse_point("3:-1").unwrap(), Point(vec![3, -1]));
        assert_eq!(parse_points("0:0;1:0").unwrap().len(), 2);
        assert_eq!(parse_cuboid("0..8,0..0").unwrap(), vec![(0, 8), (0, 0)]);
        assert!(parse_cuboid("0-8").is_err());
        assert!(parse_point("a:1").is_err());
    }

    #[test]
    fn csv_records() {
        let v = csv_to_json("t,vertex,p\n0.5,max,1e-3\n1,2,0.25\n");
        assert_eq!(v[0]["vertex"], json!("max"));
        assert_eq!(v[1]["vertex"], json!(2));
        assert_eq!(v[0]["p"], json!(1e-3));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(Error::Input("x".into())).exit_code(), EXIT_INVALID_CONFIG);
        assert_eq!(CliError::from(Error::Resource { vertices: 30, cap: 20 }).exit_code(), EXIT_RESOURCE);
        assert_eq!(CliError::Bound("x".into()).exit_code(), EXIT_BOUND_VIOLATED);
        assert_eq!(CliError::from(Error::NoConvergence("x".into())).exit_code(), EXIT_FAILURE);
    }
}
