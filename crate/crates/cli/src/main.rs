use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use oracle_thrift::algo::{AlgoConfig, AlgoKind};
use oracle_thrift::envs::{EnvKind, EnvSpec};
use oracle_thrift::runner::{
    default_checkpoint_every, fmt_real, mean_std, prepare, run_sweep_prepared, write_sweep, RunConfig, SweepResult,
};
use oracle_thrift::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "oracle-thrift", version, about = "Combinatorial semi-bandit experiments with metered oracle use")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one trial
    Run(RunArgs),
    /// Run one configuration over many seeds
    Sweep(SweepArgs),
    /// Run a figure preset (all algorithms, 20 seeds)
    Reproduce(ReproduceArgs),
    /// List algorithms and the environments they accept
    ListAlgos,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Algorithm
    #[arg(long, default_value = "aroq", value_parser = parse_algo)]
    algo: AlgoKind,
    /// Environment
    #[arg(long, default_value = "linear", value_parser = parse_env)]
    env: EnvKind,
    /// Horizon
    #[arg(long = "T", default_value_t = 10_000)]
    horizon: u64,
    /// Number of base arms (default depends on --env)
    #[arg(long)]
    d: Option<usize>,
    /// Maximum arms per action (default depends on --env)
    #[arg(long)]
    m: Option<usize>,
    /// Seed of the environment instance
    #[arg(long, default_value_t = 0)]
    env_seed: u64,
    /// Output directory
    #[arg(long, env = "ORACLE_THRIFT_OUT", default_value = "results")]
    out: PathBuf,
    /// Confidence constant
    #[arg(long = "C", default_value_t = 1.5)]
    c: f64,
    /// Number of epochs for scheduled algorithms (default from T)
    #[arg(long = "M")]
    epochs: Option<usize>,
    /// Approximation factor of the alpha oracle
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    /// Ellipsoid width constant
    #[arg(long, default_value_t = 1.0)]
    c_h: f64,
    /// Covariance shrinkage constant
    #[arg(long, default_value_t = 1.0)]
    c_f: f64,
    /// Cap on covariance warm-up rounds (default T/10)
    #[arg(long)]
    warmup_cap: Option<u64>,
    /// Discretize general-reward observations
    #[arg(long, default_value_t = false)]
    discretize: bool,
    /// Query the oracle every round (baseline mode)
    #[arg(long, default_value_t = false)]
    update_every_round: bool,
    /// Checkpoint interval in rounds (default T/1000)
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Worker threads for trials and oracle batches
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record wall-clock time in the elapsed_ms column
    #[arg(long, default_value = "on")]
    timing: Toggle,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Trial seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Trial seeds: a list `1,2,5` or a range `1-20`
    #[arg(long, default_value = "1-20", value_parser = parse_seeds)]
    seeds: Seeds,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: Figure,
    /// Multiplier on the preset horizon of 100000 rounds
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Output directory
    #[arg(long, env = "ORACLE_THRIFT_OUT", default_value = "results")]
    out: PathBuf,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Number of seeds (1..=N)
    #[arg(long, default_value_t = 20)]
    n_seeds: u64,
    /// Record wall-clock time in the elapsed_ms column
    #[arg(long, default_value = "on")]
    timing: Toggle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_algo(s: &str) -> Result<AlgoKind, String> {
    AlgoKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = AlgoKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("unknown algorithm `{s}` (expected one of {})", names.join(", "))
    })
}

fn parse_env(s: &str) -> Result<EnvKind, String> {
    EnvKind::parse(s).ok_or_else(|| format!("unknown environment `{s}` (expected linear, cov or general)"))
}

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let bad = || format!("bad seed list `{s}`");
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once('-') {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(Seeds(seeds))
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Schedule(_) | Error::Core(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn build_config(common: &Common, seeds: Vec<u64>) -> Result<RunConfig, Failure> {
    let (dd, dm) = common.env.default_dims();
    let env = EnvSpec::new(common.env, common.d.unwrap_or(dd), common.m.unwrap_or(dm), common.env_seed);
    let mut algo = AlgoConfig::new(common.algo);
    algo.c = common.c;
    algo.epochs = common.epochs;
    algo.alpha = common.alpha;
    algo.c_h = common.c_h;
    algo.c_f = common.c_f;
    algo.warmup_cap = common.warmup_cap;
    algo.discretize = common.discretize;
    algo.update_every_round = common.update_every_round || common.algo == AlgoKind::Cucb;
    let mut config = RunConfig::new(env, algo, common.horizon, seeds);
    config.checkpoint_every = common
        .checkpoint_every
        .unwrap_or_else(|| default_checkpoint_every(common.horizon));
    config.workers = common.workers.max(1);
    config.timing = matches!(common.timing, Toggle::On);
    config.validate()?;
    Ok(config)
}

fn stem(config: &RunConfig) -> String {
    format!(
        "{}_{}_d{}_m{}_T{}",
        config.algo.label(),
        config.env.kind.as_str(),
        config.env.d,
        config.env.m,
        config.horizon
    )
}

fn execute(config: &RunConfig, out: &Path, stem: &str) -> Result<SweepResult, Failure> {
    let prepared = prepare(&config.env, config.algo.enumeration_cap)?;
    let result = run_sweep_prepared(config, &prepared)?;
    let files = write_sweep(&result, out, stem)?;
    for r in &result.records {
        if let Some(e) = &r.error {
            eprintln!("warning: seed {} failed: {e}", r.seed);
        }
    }
    if result.meta.failures == result.records.len() {
        return Err(Failure::Runtime(format!(
            "all {} trials failed; see {}",
            result.records.len(),
            files.meta.display()
        )));
    }
    if let Some(last) = result.aggregate.last() {
        println!(
            "{}: T={} trials={} regret={:.3} adaptivity={:.1} queries={:.1} -> {}",
            config.algo.label(),
            last.t,
            last.trials,
            last.mean_regret,
            last.mean_adaptivity,
            last.mean_queries,
            files.results.display()
        );
    }
    Ok(result)
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let config = build_config(&args.common, vec![args.seed])?;
    let stem = format!("{}_s{}", stem(&config), args.seed);
    execute(&config, &args.common.out, &stem)?;
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let config = build_config(&args.common, args.seeds.0.clone())?;
    execute(&config, &args.common.out, &stem(&config))?;
    Ok(())
}

/// Algorithm lineup and environment of a figure preset.
fn preset(figure: Figure) -> (EnvKind, Vec<AlgoConfig>) {
    let every = |kind| {
        let mut c = AlgoConfig::new(kind);
        c.update_every_round = true;
        c
    };
    match figure {
        Figure::Fig2 => (
            EnvKind::Linear,
            vec![AlgoConfig::new(AlgoKind::Cucb), AlgoConfig::new(AlgoKind::Aroq), AlgoConfig::new(AlgoKind::Sroq)],
        ),
        Figure::Fig3 => (
            EnvKind::Cov,
            vec![every(AlgoKind::AroqC), AlgoConfig::new(AlgoKind::AroqC), AlgoConfig::new(AlgoKind::SroqC)],
        ),
        Figure::Fig4 => (
            EnvKind::General,
            vec![every(AlgoKind::AroqGr), AlgoConfig::new(AlgoKind::AroqGr), AlgoConfig::new(AlgoKind::SroqGr)],
        ),
    }
}

const PRESET_HORIZON: f64 = 1e5;

fn cmd_reproduce(args: &ReproduceArgs) -> Result<(), Failure> {
    if !(args.scale > 0.0 && args.scale <= 1.0) {
        return Err(Failure::Config("--scale must lie in (0, 1]".into()));
    }
    if args.n_seeds == 0 {
        return Err(Failure::Config("--n-seeds must be at least 1".into()));
    }
    let horizon = ((PRESET_HORIZON * args.scale).round() as u64).max(1);
    let (kind, algos) = preset(args.figure);
    let (d, m) = kind.default_dims();
    let env = EnvSpec::new(kind, d, m, 0);
    let seeds: Vec<u64> = (1..=args.n_seeds).collect();
    let configs = algos
        .into_iter()
        .map(|algo| {
            let mut c = RunConfig::new(env.clone(), algo, horizon, seeds.clone());
            c.workers = args.workers.max(1);
            c.timing = matches!(args.timing, Toggle::On);
            c.validate().map(|_| c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let fig = format!("{:?}", args.figure).to_lowercase();
    let dir = args.out.join(&fig);
    let prepared = prepare(&env, configs[0].algo.enumeration_cap)?;
    let mut results = Vec::new();
    for config in &configs {
        let result = run_sweep_prepared(config, &prepared)?;
        write_sweep(&result, &dir, &stem(config))?;
        results.push((config.algo.label(), result));
    }
    write_panels(&dir, &fig, &results)?;
    println!("{fig}: wrote {}", dir.display());
    for (label, r) in &results {
        if let Some(last) = r.aggregate.last() {
            println!(
                "  {label:<16} regret={:.3} adaptivity={:.1} queries={:.1} time_ms={:.1}",
                last.mean_regret, last.mean_adaptivity, last.mean_queries, last.mean_elapsed_ms
            );
        }
    }
    Ok(())
}

/// One CSV per figure panel: three curves over t and three final totals.
fn write_panels(dir: &Path, fig: &str, results: &[(String, SweepResult)]) -> Result<(), Error> {
    type Pick = fn(&oracle_thrift::runner::AggregateRow) -> (f64, f64);
    let curves: [(&str, Pick); 4] = [
        ("cum_adaptivity", |r| (r.mean_adaptivity, r.std_adaptivity)),
        ("cum_queries", |r| (r.mean_queries, r.std_queries)),
        ("regret", |r| (r.mean_regret, r.std_regret)),
        ("runtime", |r| (r.mean_elapsed_ms, 0.0)),
    ];
    for (panel, pick) in curves {
        let mut w = csv::Writer::from_path(dir.join(format!("{fig}_{panel}.csv")))?;
        w.write_record(["algo", "t", "mean", "std"])?;
        for (label, r) in results {
            for row in &r.aggregate {
                let (m, s) = pick(row);
                w.write_record([label.clone(), row.t.to_string(), fmt_real(m), fmt_real(s)])?;
            }
        }
        w.flush()?;
    }
    for panel in ["total_adaptivity", "total_queries"] {
        let mut w = csv::Writer::from_path(dir.join(format!("{fig}_{panel}.csv")))?;
        w.write_record(["algo", "mean", "std"])?;
        for (label, r) in results {
            let finals = r.records.iter().filter(|x| x.completed()).filter_map(|x| x.last());
            let (m, s) = if panel == "total_adaptivity" {
                mean_std(finals.map(|c| c.cum_adaptivity as f64))
            } else {
                mean_std(finals.map(|c| c.cum_queries as f64))
            };
            w.write_record([label.clone(), fmt_real(m), fmt_real(s)])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_list_algos() {
    for kind in AlgoKind::ALL {
        let envs: Vec<&str> = [EnvKind::Linear, EnvKind::Cov, EnvKind::General]
            .into_iter()
            .filter(|e| kind.check_env(*e).is_ok())
            .map(|e| e.as_str())
            .collect();
        let info = json!({ "envs": envs, "update_every_round": kind.is_adaptive() });
        println!("{:<11} {:<62} {}", kind.as_str(), kind.description(), info);
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::ListAlgos => {
            cmd_list_algos();
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
