//! Command-line front end: run, sweep and bound the repeated principal-agent game.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use hidden_rewards::agent::AgentKind;
use hidden_rewards::bounds::{bounds_table, BoundParams};
use hidden_rewards::engine::{run_experiment, EpisodeSpec, PrincipalKind, ResultTable};
use hidden_rewards::error::EngineError;
use hidden_rewards::model::{GameConfig, ModelViolation, Preset};
use hidden_rewards::output::{
    parse_config_document, parse_reward_model, parse_t_list, save_manifest, trace_path,
    write_bounds_csv, write_summary_csv, write_sweep_csv, write_timing_csv, write_trace_csv,
    ConfigDocument, ModelSource, RunManifest,
};
use hidden_rewards::principal::{compute_b, SolveMode};

#[derive(Parser)]
#[command(name = "hidden-rewards", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replicates of one configuration.
    Run(RunArgs),
    /// Run one experiment per horizon and collect them in sweep.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated horizons, e.g. 1000,5000,10000.
        #[arg(long = "T-list", alias = "t-list")]
        t_list: Option<String>,
    },
    /// Write the theoretical bounds for every t in [k_tilde, T].
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct Common {
    /// Game configuration or run manifest (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in reward model: table1_n5 or table1_n10.
    #[arg(long)]
    preset: Option<String>,
    /// Reward model file (JSON with r0, theta0 and optional noise).
    #[arg(long, conflicts_with = "preset")]
    model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum)]
    agent: Option<AgentArg>,
    #[arg(long, value_enum)]
    principal: Option<PrincipalArg>,
    /// Also write wall-clock seconds into summary.csv and sweep.csv.
    #[arg(long)]
    wallclock: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// Constant of the concentration bound (unknown in closed form).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Accuracy level of the concentration bound.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exact,
    Hybrid,
    Subgradient,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    EpsilonGreedy,
    Perfect,
    UniformRandom,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrincipalArg {
    EpsilonGreedy,
    Oracle,
}

enum Failure {
    /// Bad input: exit 2.
    Input(Vec<String>),
    /// Anything that went wrong while running: exit 1.
    Runtime(Vec<String>),
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure::Input(vec![msg.into()])
    }

    fn runtime(msg: impl Into<String>) -> Self {
        Failure::Runtime(vec![msg.into()])
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(v) => Failure::Input(v.iter().map(|x| x.to_string()).collect()),
            EngineError::Model(v) => Failure::Input(v.iter().map(|x| x.to_string()).collect()),
            EngineError::Bounds(b) => Failure::Input(vec![b.to_string()]),
            other => Failure::runtime(other.to_string()),
        }
    }
}

/// Inputs resolved from the config document and the flags.
struct Resolved {
    config: GameConfig,
    model: ModelSource,
    manifest: Option<RunManifest>,
}

fn resolve(common: &Common) -> Result<Resolved, Failure> {
    let doc = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
            Some(
                parse_config_document(&text)
                    .map_err(|e| Failure::input(format!("cannot parse {}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let preset = match &common.preset {
        Some(name) => Some(Preset::from_name(name).ok_or_else(|| {
            Failure::input(format!(
                "unknown preset {name:?} (expected table1_n5 or table1_n10)"
            ))
        })?),
        None => None,
    };
    let inline = match &common.model {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
            Some(
                parse_reward_model(&text)
                    .map_err(|e| Failure::input(format!("cannot parse {}: {e}", path.display())))?,
            )
        }
        None => None,
    };
    let flag_model = inline
        .map(ModelSource::Inline)
        .or(preset.map(ModelSource::Preset));

    let (config, doc_model, manifest) = match doc {
        Some(ConfigDocument::Manifest(m)) => (m.config.clone(), Some(m.model.clone()), Some(*m)),
        Some(ConfigDocument::Config(c)) => (c, None, None),
        None => match preset {
            Some(p) => (p.config(), None, None),
            None => return Err(Failure::input("either --config or --preset is required")),
        },
    };
    let model = match flag_model.or(doc_model) {
        Some(m) => m,
        None => ModelSource::Preset(Preset::for_arm_count(config.n).ok_or_else(|| {
            Failure::input(format!(
                "no built-in reward model has n = {}; pass --model",
                config.n
            ))
        })?),
    };
    Ok(Resolved {
        config,
        model,
        manifest,
    })
}

fn check(config: &GameConfig, model: &ModelSource) -> Result<(), Failure> {
    let v = config.validate();
    if !v.is_empty() {
        return Err(Failure::Input(v.iter().map(|x| x.to_string()).collect()));
    }
    let mv = model.model().validate(config);
    let fatal: Vec<&ModelViolation> = mv.iter().filter(|v| v.is_fatal()).collect();
    if !fatal.is_empty() {
        return Err(Failure::Input(
            fatal.iter().map(|x| x.to_string()).collect(),
        ));
    }
    for w in mv.iter().filter(|v| !v.is_fatal()) {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn spec_for(args: &RunArgs, manifest: Option<&RunManifest>) -> EpisodeSpec {
    let solve = match args.solver {
        Some(SolverArg::Exact) => SolveMode::Exact,
        Some(SolverArg::Hybrid) => SolveMode::from_name("hybrid").expect("known"),
        Some(SolverArg::Subgradient) => SolveMode::from_name("subgradient").expect("known"),
        None => manifest.map_or_else(SolveMode::default, |m| m.solver),
    };
    let agent = match args.agent {
        Some(AgentArg::EpsilonGreedy) => AgentKind::EpsilonGreedy,
        Some(AgentArg::Perfect) => AgentKind::Perfect,
        Some(AgentArg::UniformRandom) => AgentKind::UniformRandom,
        None => manifest.map_or(AgentKind::EpsilonGreedy, |m| m.agent),
    };
    let principal = match args.principal {
        Some(PrincipalArg::EpsilonGreedy) => PrincipalKind::EpsilonGreedy,
        Some(PrincipalArg::Oracle) => PrincipalKind::Oracle,
        None => manifest.map_or(PrincipalKind::EpsilonGreedy, |m| m.principal),
    };
    EpisodeSpec {
        principal,
        agent,
        solve,
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs `f` on a pool of `jobs` threads, or on rayon's global pool.
fn with_pool<R>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, Failure>
where
    R: Send,
{
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Failure::input("--jobs must be at least 1")),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Failure::runtime(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs one horizon and writes its traces and summary.
fn experiment(
    config: &GameConfig,
    model: &ModelSource,
    spec: &EpisodeSpec,
    out: &Path,
    wallclock: bool,
) -> Result<ResultTable, Failure> {
    let label = model.label();
    let horizon = config.horizon;
    let table = run_experiment(config, &model.model(), spec, |r, _, trace| {
        write_trace_csv(&trace_path(out, label, horizon, r), trace).map_err(|e| e.to_string())
    })?;
    let summary = out
        .join(label)
        .join(horizon.to_string())
        .join("summary.csv");
    write_summary_csv(&summary, &table, wallclock).map_err(|e| Failure::runtime(e.to_string()))?;
    Ok(table)
}

fn replicate_failures(tables: &[ResultTable]) -> Vec<String> {
    tables
        .iter()
        .flat_map(|t| {
            t.failures()
                .map(move |(r, e)| format!("T = {}, replicate {r}: {e}", t.horizon))
        })
        .collect()
}

fn cmd_run(args: &RunArgs, t_list_flag: Option<&str>, sweep: bool) -> Result<(), Failure> {
    with_pool(args.jobs, || run_inner(args, t_list_flag, sweep))?
}

fn run_inner(args: &RunArgs, t_list_flag: Option<&str>, sweep: bool) -> Result<(), Failure> {
    let Resolved {
        mut config,
        model,
        manifest,
    } = resolve(&args.common)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let spec = spec_for(args, manifest.as_ref());
    let t_list = if sweep {
        match t_list_flag {
            Some(s) => Some(parse_t_list(s).map_err(Failure::input)?),
            None => match manifest.as_ref().and_then(|m| m.t_list.clone()) {
                Some(l) if !l.is_empty() => Some(l),
                _ => return Err(Failure::input("sweep needs --T-list")),
            },
        }
    } else {
        None
    };
    let horizons = t_list.clone().unwrap_or_else(|| vec![config.horizon]);
    for &h in &horizons {
        let mut c = config.clone();
        c.horizon = h;
        check(&c, &model)?;
    }

    let out = &args.common.out;
    let manifest = RunManifest {
        config: config.clone(),
        model: model.clone(),
        solver: spec.solve,
        principal: spec.principal,
        agent: spec.agent,
        t_list,
        out_dir: out.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: now(),
    };
    save_manifest(&out.join("manifest.json"), &manifest)
        .map_err(|e| Failure::runtime(e.to_string()))?;

    let results: Vec<Result<ResultTable, Failure>> = horizons
        .par_iter()
        .map(|&h| {
            let mut c = config.clone();
            c.horizon = h;
            experiment(&c, &model, &spec, out, args.wallclock)
        })
        .collect();
    let mut tables = Vec::new();
    let mut errors = Vec::new();
    for (h, r) in horizons.iter().zip(results) {
        match r {
            Ok(t) => tables.push(t),
            Err(Failure::Input(m) | Failure::Runtime(m)) => {
                errors.extend(m.into_iter().map(|e| format!("T = {h}: {e}")))
            }
        }
    }
    if sweep {
        write_sweep_csv(&out.join("sweep.csv"), &tables, args.wallclock)
            .map_err(|e| Failure::runtime(e.to_string()))?;
    }
    write_timing_csv(&out.join("timing.csv"), &tables)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    errors.extend(replicate_failures(&tables));
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(errors))
    }
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), Failure> {
    let Resolved { config, .. } = resolve(&args.common)?;
    let v = config.validate();
    if !v.is_empty() {
        return Err(Failure::Input(v.iter().map(|x| x.to_string()).collect()));
    }
    let params = BoundParams::from_config(&config, args.alpha, args.beta)
        .map_err(|e| Failure::input(e.to_string()))?;
    let b = compute_b(
        params.k,
        params.k_tilde,
        params.r_min,
        params.r_max,
        params.gamma,
        params.n,
    )
    .map_err(|e| Failure::input(e.to_string()))?;
    let rows =
        bounds_table(&params, b, config.horizon).map_err(|e| Failure::input(e.to_string()))?;
    let path = args.common.out.join("bounds.csv");
    write_bounds_csv(&path, &rows).map_err(|e| Failure::runtime(e.to_string()))?;
    eprintln!(
        "wrote {} rows to {} (concentration and lambda hold up to the constant alpha = {})",
        rows.len(),
        path.display(),
        args.alpha
    );
    Ok(())
}

/// Parses `args` (program name first) and executes the command.
///
/// Exit codes: 0 on success, 1 when a run fails, 2 for invalid input or
/// usage errors.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args, None, false),
        Command::Sweep { run, t_list } => cmd_run(run, t_list.as_deref(), true),
        Command::Bounds(args) => cmd_bounds(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msgs)) => {
            for m in msgs {
                eprintln!("error: {m}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msgs)) => {
            for m in msgs {
                eprintln!("error: {m}");
            }
            ExitCode::from(1)
        }
    }
}
