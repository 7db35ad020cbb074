//! Command-line front end.
//!
//! Settings come from an optional flat `key=value` file (`--config`) and
//! are overridden by command-line flags. Keys are the long flag names with
//! `-` or `_` accepted interchangeably. Every command prints its resolved
//! settings as `#` comment lines before the data.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::correlation::{ConditioningRule, ModelSpec};
use crate::error::Error;
use crate::schedule::{self, Objective, Schedule, StatsMode, Strategy};
use crate::simulator;
use crate::topology::Topology;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

const FORMATS: &str = "\
Output formats:
  bits      CSV, N rows of N pairwise budgets (diagonal reported as 0)
  sweep     TSV, columns `d budget`
  evaluate  CSV, columns `position,node,bits`, then `# total=<bits>`
  optimize  CSV, columns `strategy,objective,total,order`
  stats     CSV, columns `mode,sample_count,mean_total,min_total,max_total,argmin,argmax`
  simulate  TSV, columns `L seed total_bits exact_count max_abs_error`;
            with --detail, CSV `position,node,bits,true,reconstructed,abs_error`
Lines starting with `#` echo the resolved settings.
Topology files are CSV with header `id,x,y`.
Exit codes: 0 ok, 2 configuration error, 3 input/output error, 4 infeasible request.";

#[derive(Debug, Parser)]
#[command(
    name = "corrgather",
    version,
    about = "Distance-driven bit budgets, polling schedules and gathering simulation",
    after_help = FORMATS
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat key=value settings file; flags override its entries
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Node positions, CSV with header `id,x,y`
    #[arg(long, global = true)]
    pub topology: Option<PathBuf>,
    /// Correlation model: 1 (power law) or 2 (Gaussian) [default: 1]
    #[arg(long, global = true)]
    pub model: Option<u8>,
    /// Bits per reading [default: 5]
    #[arg(long, global = true)]
    pub n: Option<u32>,
    /// Model alpha (alpha1 or alpha2) [default: 1]
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Model beta (beta1 or beta2) [default: 1]
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Conditioning rule: min, max or additive [default: min]
    #[arg(long, global = true)]
    pub rule: Option<String>,
    /// Seed for every random choice [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write output here instead of standard output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScheduleArgs {
    /// Explicit polling order, e.g. `0,2,1`
    #[arg(long)]
    pub order: Option<String>,
    /// Build the order with an optimizer (brute-force, greedy-prim, random-restart)
    #[arg(long)]
    pub strategy: Option<String>,
    /// Samples for random strategies [default: 1000]
    #[arg(long)]
    pub count: Option<u64>,
    /// Run greedy-prim even where it is only a heuristic
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pairwise budget matrix for a topology
    Bits,
    /// Budget as a function of distance (plot data)
    Sweep {
        #[arg(long, allow_hyphen_values = true)]
        d_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        d_max: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        step: Option<f64>,
    },
    /// Per-node budgets along one schedule
    Evaluate {
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Search for a minimum or maximum cost schedule
    Optimize {
        /// minimize or maximize [default: minimize]
        #[arg(long)]
        objective: Option<String>,
        #[command(flatten)]
        schedule: ScheduleArgs,
    },
    /// Mean, best and worst totals over all or sampled schedules
    Stats {
        /// exhaustive or sampled [default: exhaustive]
        #[arg(long)]
        mode: Option<String>,
        /// Samples in sampled mode [default: 1000]
        #[arg(long)]
        count: Option<u64>,
    },
    /// Generate fields, gather them and report reconstruction fidelity
    Simulate {
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// Comma-separated smoothness values [default: 1]
        #[arg(long)]
        smoothness: Option<String>,
        /// Comma-separated field seeds [default: --seed]
        #[arg(long)]
        seeds: Option<String>,
        /// Per-node report for a single (smoothness, seed) run
        #[arg(long)]
        detail: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Bits => "bits",
            Self::Sweep { .. } => "sweep",
            Self::Evaluate { .. } => "evaluate",
            Self::Optimize { .. } => "optimize",
            Self::Stats { .. } => "stats",
            Self::Simulate { .. } => "simulate",
        }
    }
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Parse { .. }
            | Error::DuplicateId { .. }
            | Error::NonFinite { .. }
            | Error::EmptyTopology
            | Error::IdGap { .. }
            | Error::Io(_) => EXIT_IO,
            Error::TooManyNodes { .. } => EXIT_INFEASIBLE,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(err: io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: err.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command,
/// writing primary output to `stdout` unless `--out` is given.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::config(e.to_string()))?;
    execute(cli, stdout)
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let settings = Settings::load(&cli.common)?;
    let threads: Option<usize> = settings.get(cli.common.threads, "threads")?;

    let mut buf = Vec::new();
    let result = match threads {
        Some(0) => return Err(CliError::config("threads must be positive")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::config(e.to_string()))?
            .install(|| dispatch(&cli, &settings, &mut buf)),
        None => dispatch(&cli, &settings, &mut buf),
    };
    result?;

    let out: Option<PathBuf> = settings.get(cli.common.out.clone(), "out")?;
    match out {
        Some(path) => fs::write(&path, &buf).map_err(|e| CliError {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        })?,
        None => stdout.write_all(&buf)?,
    }
    Ok(())
}

/// Key=value settings from `--config`; command-line values take priority.
struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(common: &CommonArgs) -> CliResult<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = &common.config {
            let text = fs::read_to_string(path).map_err(|e| CliError {
                code: EXIT_IO,
                message: format!("{}: {e}", path.display()),
            })?;
            for (k, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::config(format!(
                        "{}:{}: expected key=value",
                        path.display(),
                        k + 1
                    ))
                })?;
                file.insert(key.trim().replace('-', "_"), value.trim().to_string());
            }
        }
        Ok(Self { file })
    }

    fn get<T>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .get(key)
            .map(|raw| {
                raw.parse::<T>()
                    .map_err(|e| CliError::config(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    fn flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }
}

/// Accumulates `# key=value` header lines.
struct Header(Vec<(String, String)>);

impl Header {
    fn new(command: &str) -> Self {
        Self(vec![("command".into(), command.into())])
    }

    fn push(&mut self, key: &str, value: impl Display) {
        self.0.push((key.into(), value.to_string()));
    }

    fn write(&self, out: &mut dyn Write) -> io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }
}

fn model_from(settings: &Settings, common: &CommonArgs, header: &mut Header) -> CliResult<ModelSpec> {
    let which: u8 = settings.get(common.model, "model")?.unwrap_or(1);
    let n: u32 = settings.get(common.n, "n")?.unwrap_or(5);
    let alpha: f64 = settings.get(common.alpha, "alpha")?.unwrap_or(1.0);
    let beta: f64 = settings.get(common.beta, "beta")?.unwrap_or(1.0);
    let model = match which {
        1 => ModelSpec::power_law(n, alpha, beta)?,
        2 => ModelSpec::gaussian(n, alpha, beta)?,
        other => return Err(CliError::config(format!("model must be 1 or 2, got {other}"))),
    };
    header.push("model", which);
    header.push("n", n);
    header.push("alpha", alpha);
    header.push("beta", beta);
    Ok(model)
}

fn rule_from(
    settings: &Settings,
    common: &CommonArgs,
    model: &ModelSpec,
    header: &mut Header,
) -> CliResult<ConditioningRule> {
    let rule: ConditioningRule = settings
        .get::<String>(common.rule.clone(), "rule")?
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(ConditioningRule::Min);
    model.check_rule(rule)?;
    header.push("rule", rule);
    Ok(rule)
}

fn topology_from(settings: &Settings, common: &CommonArgs, header: &mut Header) -> CliResult<Topology> {
    let path: PathBuf = settings
        .get(common.topology.clone(), "topology")?
        .ok_or_else(|| CliError::config("--topology is required for this command"))?;
    let topology = Topology::from_path(&path).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })?;
    header.push("topology", path.display());
    header.push("nodes", topology.len());
    Ok(topology)
}

fn parse_list<T>(raw: &str, what: &str) -> CliResult<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| CliError::config(format!("invalid {what} `{s}`: {e}")))
        })
        .collect()
}

fn parse_strategy(
    name: &str,
    count: u64,
    seed: u64,
    force: bool,
) -> CliResult<Strategy> {
    match name.to_ascii_lowercase().replace('_', "-").as_str() {
        "brute-force" | "brute" => Ok(Strategy::BruteForce),
        "greedy-prim" | "greedy" | "prim" => Ok(Strategy::GreedyPrim { force }),
        "random-restart" | "random" => Ok(Strategy::RandomRestart { count, seed }),
        other => Err(CliError::config(format!(
            "unknown strategy `{other}` (expected brute-force, greedy-prim or random-restart)"
        ))),
    }
}

struct ScheduleContext<'a> {
    model: &'a ModelSpec,
    rule: ConditioningRule,
    topology: &'a Topology,
    seed: u64,
}

/// Resolves the polling order: explicit `--order`, else a minimizing
/// `--strategy`, else the identity order.
fn schedule_from(
    args: &ScheduleArgs,
    settings: &Settings,
    ctx: &ScheduleContext<'_>,
    header: &mut Header,
) -> CliResult<Schedule> {
    let order: Option<String> = settings.get(args.order.clone(), "order")?;
    let strategy: Option<String> = settings.get(args.strategy.clone(), "strategy")?;
    match (order, strategy) {
        (Some(_), Some(_)) => Err(CliError::config("use either --order or --strategy, not both")),
        (Some(raw), None) => {
            let s = Schedule::new(parse_list(&raw, "node id")?, ctx.topology.len())?;
            header.push("order", &s);
            Ok(s)
        }
        (None, Some(name)) => {
            let count: u64 = settings.get(args.count, "count")?.unwrap_or(1000);
            let force = settings.flag(args.force, "force")?;
            let strategy = parse_strategy(&name, count, ctx.seed, force)?;
            let (s, _) = schedule::optimize(
                ctx.model,
                ctx.rule,
                ctx.topology,
                Objective::Minimize,
                strategy,
            )?;
            header.push("strategy", strategy);
            header.push("order", &s);
            Ok(s)
        }
        (None, None) => {
            let s = Schedule::identity(ctx.topology.len());
            header.push("order", &s);
            Ok(s)
        }
    }
}

fn dispatch(cli: &Cli, settings: &Settings, out: &mut Vec<u8>) -> CliResult<()> {
    let common = &cli.common;
    let mut header = Header::new(cli.command.name());

    match &cli.command {
        Command::Bits => {
            let model = model_from(settings, common, &mut header)?;
            let topology = topology_from(settings, common, &mut header)?;
            let matrix = model.budget_matrix(&topology)?;
            header.write(out)?;
            for row in matrix {
                let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }

        Command::Sweep { d_min, d_max, step } => {
            let model = model_from(settings, common, &mut header)?;
            let d_min: f64 = settings.get(*d_min, "d_min")?.unwrap_or(0.0);
            let d_max: f64 = settings.get(*d_max, "d_max")?.unwrap_or(8.0);
            let step: f64 = settings.get(*step, "step")?.unwrap_or(0.1);
            if !(step.is_finite() && step > 0.0) {
                return Err(CliError::config(format!("step must be positive, got {step}")));
            }
            if !(d_min.is_finite() && d_max.is_finite() && d_min >= 0.0 && d_max >= d_min) {
                return Err(CliError::config(format!(
                    "distance range must satisfy 0 <= d_min <= d_max, got [{d_min}, {d_max}]"
                )));
            }
            header.push("d_min", d_min);
            header.push("d_max", d_max);
            header.push("step", step);
            let points = ((d_max - d_min) / step + 1e-9).floor() as u64;
            header.write(out)?;
            writeln!(out, "d\tbudget")?;
            for k in 0..=points {
                let d = round_grid(d_min + k as f64 * step);
                writeln!(out, "{d}\t{}", model.pairwise_bits(d)?)?;
            }
        }

        Command::Evaluate { schedule: args } => {
            let model = model_from(settings, common, &mut header)?;
            let rule = rule_from(settings, common, &model, &mut header)?;
            let topology = topology_from(settings, common, &mut header)?;
            let seed: u64 = settings.get(common.seed, "seed")?.unwrap_or(0);
            header.push("seed", seed);
            let ctx = ScheduleContext {
                model: &model,
                rule,
                topology: &topology,
                seed,
            };
            let s = schedule_from(args, settings, &ctx, &mut header)?;
            let report = schedule::evaluate(&model, rule, &topology, &s)?;
            header.write(out)?;
            writeln!(out, "position,node,bits")?;
            for (k, (node, bits)) in report.per_node.iter().enumerate() {
                writeln!(out, "{k},{node},{bits}")?;
            }
            writeln!(out, "# total={}", report.total)?;
            if let Some((node, bits)) = report.worst_node() {
                writeln!(out, "# worst_node={node} worst_bits={bits}")?;
            }
        }

        Command::Optimize {
            objective,
            schedule: args,
        } => {
            let model = model_from(settings, common, &mut header)?;
            let rule = rule_from(settings, common, &model, &mut header)?;
            let topology = topology_from(settings, common, &mut header)?;
            let seed: u64 = settings.get(common.seed, "seed")?.unwrap_or(0);
            let objective: Objective = settings
                .get::<String>(objective.clone(), "objective")?
                .map(|s| s.parse())
                .transpose()?
                .unwrap_or(Objective::Minimize);
            if settings.get::<String>(args.order.clone(), "order")?.is_some() {
                return Err(CliError::config("optimize does not take --order"));
            }
            let name: String = settings
                .get(args.strategy.clone(), "strategy")?
                .unwrap_or_else(|| "brute-force".into());
            let count: u64 = settings.get(args.count, "count")?.unwrap_or(1000);
            let force = settings.flag(args.force, "force")?;
            let strategy = parse_strategy(&name, count, seed, force)?;
            header.push("seed", seed);
            header.push("objective", objective);
            header.push("strategy", strategy);
            let (s, report) = schedule::optimize(&model, rule, &topology, objective, strategy)?;
            header.write(out)?;
            writeln!(out, "strategy,objective,total,order")?;
            let short = match strategy {
                Strategy::BruteForce => "brute_force",
                Strategy::GreedyPrim { .. } => "greedy_prim",
                Strategy::RandomRestart { .. } => "random_restart",
            };
            writeln!(out, "{short},{objective},{},{s}", report.total)?;
        }

        Command::Stats { mode, count } => {
            let model = model_from(settings, common, &mut header)?;
            let rule = rule_from(settings, common, &model, &mut header)?;
            let topology = topology_from(settings, common, &mut header)?;
            let mode_name: String = settings
                .get(mode.clone(), "mode")?
                .unwrap_or_else(|| "exhaustive".into());
            let mode = match mode_name.to_ascii_lowercase().as_str() {
                "exhaustive" => StatsMode::Exhaustive,
                "sampled" => {
                    let count: u64 = settings.get(*count, "count")?.unwrap_or(1000);
                    let seed: u64 = settings.get(common.seed, "seed")?.unwrap_or(0);
                    header.push("count", count);
                    header.push("seed", seed);
                    StatsMode::Sampled { count, seed }
                }
                other => {
                    return Err(CliError::config(format!(
                        "unknown mode `{other}` (expected exhaustive or sampled)"
                    )))
                }
            };
            header.push("mode", &mode_name);
            let stats = schedule::schedule_stats(&model, rule, &topology, mode)?;
            header.write(out)?;
            writeln!(out, "mode,sample_count,mean_total,min_total,max_total,argmin,argmax")?;
            writeln!(
                out,
                "{},{},{:.6},{},{},{},{}",
                if stats.exhaustive { "exhaustive" } else { "sampled" },
                stats.sample_count,
                stats.mean_total,
                stats.min_total,
                stats.max_total,
                stats.argmin,
                stats.argmax
            )?;
        }

        Command::Simulate {
            schedule: args,
            smoothness,
            seeds,
            detail,
        } => {
            let model = model_from(settings, common, &mut header)?;
            let rule = rule_from(settings, common, &model, &mut header)?;
            let topology = topology_from(settings, common, &mut header)?;
            let seed: u64 = settings.get(common.seed, "seed")?.unwrap_or(0);
            header.push("seed", seed);
            let ctx = ScheduleContext {
                model: &model,
                rule,
                topology: &topology,
                seed,
            };
            let s = schedule_from(args, settings, &ctx, &mut header)?;
            let ls: Vec<f64> = match settings.get::<String>(smoothness.clone(), "smoothness")? {
                Some(raw) => parse_list(&raw, "smoothness")?,
                None => vec![1.0],
            };
            let seeds: Vec<u64> = match settings.get::<String>(seeds.clone(), "seeds")? {
                Some(raw) => parse_list(&raw, "seed")?,
                None => vec![seed],
            };
            header.push("smoothness", join(&ls));
            header.push("seeds", join(&seeds));

            if settings.flag(*detail, "detail")? {
                let (&[l], &[field_seed]) = (ls.as_slice(), seeds.as_slice()) else {
                    return Err(CliError::config(
                        "--detail needs exactly one smoothness value and one seed",
                    ));
                };
                let field = simulator::generate_field(&topology, model.n(), l, field_seed)?;
                let res = simulator::gather(&model, rule, &topology, &s, &field)?;
                header.write(out)?;
                writeln!(out, "position,node,bits,true,reconstructed,abs_error")?;
                for (k, (node, bits)) in res.bit_report.per_node.iter().enumerate() {
                    let truth = field.readings[*node].value();
                    let got = res.reconstructed[*node].value();
                    writeln!(out, "{k},{node},{bits},{truth},{got},{}", truth.abs_diff(got))?;
                }
                writeln!(
                    out,
                    "# total_bits={} exact_count={} max_abs_error={}",
                    res.bit_report.total, res.exact_count, res.max_abs_error
                )?;
            } else {
                let rows = simulator::fidelity_sweep(&model, rule, &topology, &s, &ls, &seeds)?;
                header.write(out)?;
                simulator::write_sweep_tsv(&rows, &mut *out)?;
            }
        }
    }
    Ok(())
}

fn join<T: Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Rounds onto a 1e-9 grid so `0.1 * 3` prints and evaluates as `0.3`.
fn round_grid(d: f64) -> f64 {
    (d * 1e9).round() / 1e9
}
