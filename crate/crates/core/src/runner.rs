//! Seeded trials, pseudo-regret accounting, checkpoints and result files.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::algo::{build_policy, AlgoConfig, AlgoKind, Policy};
use crate::envs::{optimal_action, EnvSpec, Environment};
use crate::error::{Error, Result};
use crate::oracle::{BatchExecutor, ExactOracle};
use crate::parallel::{map_ordered, with_workers};
use crate::rng;
use crate::schedule::{build_grid, default_epochs};
use crate::types::{Action, Observation};

pub const SCHEMA_VERSION: u64 = 1;
pub const MAX_CHECKPOINTS: u64 = 10_000;

pub const CSV_HEADER: [&str; 12] = [
    "run_id",
    "algo",
    "env",
    "d",
    "m",
    "T",
    "seed",
    "t",
    "cum_regret",
    "cum_adaptivity",
    "cum_queries",
    "elapsed_ms",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub algo: AlgoConfig,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub checkpoint_every: u64,
    /// Worker threads for trials and oracle batches; 1 runs sequentially.
    pub workers: usize,
    /// Record wall-clock time; when off `elapsed_ms` is written as 0 so
    /// output depends only on the configuration.
    pub timing: bool,
}

impl RunConfig {
    pub fn new(env: EnvSpec, algo: AlgoConfig, horizon: u64, seeds: Vec<u64>) -> Self {
        RunConfig {
            env,
            algo,
            horizon,
            seeds,
            checkpoint_every: default_checkpoint_every(horizon),
            workers: 1,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("T must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint interval must be positive".into()));
        }
        if self.horizon / self.checkpoint_every > MAX_CHECKPOINTS {
            return Err(Error::Config(format!(
                "checkpoint interval {} gives more than {MAX_CHECKPOINTS} checkpoints",
                self.checkpoint_every
            )));
        }
        self.algo
            .kind
            .check_env(self.env.kind)
            .map_err(Error::Config)?;
        self.algo.validate()?;
        self.env.action_set()?;
        if self.scheduled() {
            build_grid(self.horizon, self.epochs())?;
        }
        Ok(())
    }

    /// Whether the algorithm runs on the fixed epoch grid.
    pub fn scheduled(&self) -> bool {
        matches!(self.algo.kind, AlgoKind::Sroq | AlgoKind::SroqC | AlgoKind::SroqGr)
    }

    fn epochs(&self) -> usize {
        self.algo.epochs.unwrap_or_else(|| default_epochs(self.horizon))
    }

    /// Whether the policy queries every round (batch checkpoints are then
    /// skipped, the uniform grid already resolves the curve).
    pub fn queries_every_round(&self) -> bool {
        self.algo.kind == AlgoKind::Cucb || self.algo.update_every_round
    }
}

/// `max(1, ⌈T / 1000⌉)`.
pub fn default_checkpoint_every(horizon: u64) -> u64 {
    horizon.div_ceil(1000).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub cum_regret: f64,
    pub cum_adaptivity: u64,
    pub cum_queries: u64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub algo: String,
    pub env: String,
    pub d: usize,
    pub m: usize,
    pub horizon: u64,
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// Set when the trial aborted; checkpoints then stop early.
    pub error: Option<String>,
    pub diagnostics: serde_json::Value,
}

impl RunRecord {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    pub fn completed(&self) -> bool {
        self.error.is_none() && self.last().is_some_and(|c| c.t == self.horizon)
    }
}

/// Cadence and regret options for [`simulate`].
#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub horizon: u64,
    pub checkpoint_every: u64,
    pub batch_checkpoints: bool,
    /// Multiplier on `r̄(a*)` (α for α-regret).
    pub regret_scale: f64,
    pub timing: bool,
}

/// Outcome of a closed-loop simulation.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub checkpoints: Vec<Checkpoint>,
    pub error: Option<String>,
}

/// Plays `policy` against `env` for `opts.horizon` rounds with the round
/// streams of `key`, accumulating `scale·r̄* − r̄(a_t)`.
pub fn simulate(
    policy: &mut dyn Policy,
    env: &dyn Environment,
    optimum: f64,
    key: u64,
    opts: SimOptions,
) -> Simulation {
    let start = Instant::now();
    let d = env.d();
    let set = env.action_set();
    let mut y = vec![0.0; d];
    let mut cache: HashMap<Action, f64> = HashMap::new();
    let mut regret = 0.0;
    let mut checkpoints = Vec::new();
    let target = opts.regret_scale * optimum;
    let elapsed = |start: &Instant| {
        if opts.timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };
    for t in 1..=opts.horizon {
        let before = policy.ledger().adaptivity_rounds();
        let a = match policy.select(t) {
            Ok(a) => a,
            Err(e) => return Simulation { checkpoints, error: Some(e.to_string()) },
        };
        if !set.contains(a) {
            return Simulation {
                checkpoints,
                error: Some(format!("policy played infeasible action {}", a.display_one_based())),
            };
        }
        let value = *cache.entry(a).or_insert_with(|| env.expected_reward(a));
        regret += target - value;
        env.sample_into(&mut rng::round(key, t), &mut y);
        if let Err(e) = policy.observe(&Observation::from_full(t, a, &y)) {
            return Simulation { checkpoints, error: Some(e.to_string()) };
        }
        let ledger = policy.ledger();
        let batch = opts.batch_checkpoints && ledger.adaptivity_rounds() != before;
        if batch || t % opts.checkpoint_every == 0 || t == opts.horizon {
            checkpoints.push(Checkpoint {
                t,
                cum_regret: regret,
                cum_adaptivity: ledger.adaptivity_rounds(),
                cum_queries: ledger.total_queries(),
                elapsed_ms: elapsed(&start),
            });
        }
    }
    Simulation { checkpoints, error: None }
}

/// An environment with its optimum, shared by every trial of a sweep.
#[derive(Clone)]
pub struct Prepared {
    pub env: Arc<dyn Environment>,
    pub optimal_action: Action,
    pub optimal_reward: f64,
}

pub fn prepare(spec: &EnvSpec, cap: u128) -> Result<Prepared> {
    let env = spec.build()?;
    let oracle = ExactOracle {
        cap,
        fast_linear: false,
    };
    let best = optimal_action(env.as_ref(), &oracle)?;
    Ok(Prepared {
        env,
        optimal_action: best.action,
        optimal_reward: best.value,
    })
}

pub fn run_id(config: &RunConfig, seed: u64) -> String {
    format!(
        "{}-{}-d{}-m{}-T{}-s{}",
        config.algo.label(),
        config.env.kind.as_str(),
        config.env.d,
        config.env.m,
        config.horizon,
        seed
    )
}

pub fn run_trial(config: &RunConfig, prepared: &Prepared, seed: u64) -> RunRecord {
    let mut record = RunRecord {
        run_id: run_id(config, seed),
        algo: config.algo.label(),
        env: config.env.kind.as_str().to_string(),
        d: config.env.d,
        m: config.env.m,
        horizon: config.horizon,
        seed,
        checkpoints: Vec::new(),
        error: None,
        diagnostics: serde_json::Value::Null,
    };
    let executor = BatchExecutor::for_workers(config.workers);
    let mut policy = match build_policy(&config.algo, prepared.env.as_ref(), config.horizon, executor) {
        Ok(p) => p,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let opts = SimOptions {
        horizon: config.horizon,
        checkpoint_every: config.checkpoint_every,
        batch_checkpoints: !config.queries_every_round(),
        regret_scale: config.algo.regret_scale(),
        timing: config.timing,
    };
    let key = rng::trial_key(config.env.env_seed, seed);
    let sim = simulate(policy.as_mut(), prepared.env.as_ref(), prepared.optimal_reward, key, opts);
    record.checkpoints = sim.checkpoints;
    record.error = sim.error;
    record.diagnostics = policy.diagnostics();
    record
}

/// Mean and sample standard deviation across trials at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub t: u64,
    pub trials: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_adaptivity: f64,
    pub std_adaptivity: f64,
    pub mean_queries: f64,
    pub std_queries: f64,
    pub mean_elapsed_ms: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepMeta {
    pub schema_version: u64,
    pub config: RunConfig,
    pub algo_label: String,
    pub grid_boundaries: Option<Vec<u64>>,
    /// 1-based arm indices of `a*`.
    pub optimal_action: Vec<usize>,
    pub optimal_reward: f64,
    pub sigma_profile: Option<serde_json::Value>,
    pub env: serde_json::Value,
    pub failures: usize,
    pub trials: Vec<serde_json::Value>,
}

pub struct SweepResult {
    pub records: Vec<RunRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub meta: SweepMeta,
}

/// Runs every seed of `config`; trial failures are recorded, not fatal.
pub fn run_sweep(config: &RunConfig) -> Result<SweepResult> {
    config.validate()?;
    let prepared = prepare(&config.env, config.algo.enumeration_cap)?;
    run_sweep_prepared(config, &prepared)
}

pub fn run_sweep_prepared(config: &RunConfig, prepared: &Prepared) -> Result<SweepResult> {
    config.validate()?;
    let parallel = config.workers > 1;
    let records = with_workers(config.workers, || {
        map_ordered(&config.seeds, parallel, |&s| run_trial(config, prepared, s))
    });
    let aggregate = aggregate(&records, config.checkpoint_every);
    let meta = sweep_meta(config, prepared, &records)?;
    Ok(SweepResult {
        records,
        aggregate,
        meta,
    })
}

fn sweep_meta(config: &RunConfig, prepared: &Prepared, records: &[RunRecord]) -> Result<SweepMeta> {
    let grid_boundaries = if config.scheduled() {
        Some(build_grid(config.horizon, config.epochs())?.boundaries().to_vec())
    } else {
        None
    };
    let env_meta = prepared.env.metadata();
    let trials = records
        .iter()
        .map(|r| json!({ "seed": r.seed, "error": r.error, "diagnostics": r.diagnostics }))
        .collect();
    Ok(SweepMeta {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        algo_label: config.algo.label(),
        grid_boundaries,
        optimal_action: prepared.optimal_action.arms().map(|i| i + 1).collect(),
        optimal_reward: prepared.optimal_reward,
        sigma_profile: env_meta.get("sigma_profile").cloned(),
        env: env_meta,
        failures: records.iter().filter(|r| !r.completed()).count(),
        trials,
    })
}

/// Aggregates completed trials over the uniform checkpoint grid. Trials are
/// summed in seed order, so the result does not depend on record order.
pub fn aggregate(records: &[RunRecord], every: u64) -> Vec<AggregateRow> {
    let mut done: Vec<&RunRecord> = records.iter().filter(|r| r.completed()).collect();
    done.sort_by(|a, b| a.seed.cmp(&b.seed).then_with(|| a.run_id.cmp(&b.run_id)));
    let ok: Vec<Vec<&Checkpoint>> = done
        .into_iter()
        .map(|r| {
            r.checkpoints
                .iter()
                .filter(|c| c.t % every == 0 || c.t == r.horizon)
                .collect()
        })
        .collect();
    let Some(first) = ok.first() else {
        return Vec::new();
    };
    let rows = first.len();
    (0..rows)
        .map(|k| {
            let pts: Vec<&Checkpoint> = ok.iter().map(|v| v[k]).collect();
            let (mr, sr) = mean_std(pts.iter().map(|c| c.cum_regret));
            let (ma, sa) = mean_std(pts.iter().map(|c| c.cum_adaptivity as f64));
            let (mq, sq) = mean_std(pts.iter().map(|c| c.cum_queries as f64));
            let (me, _) = mean_std(pts.iter().map(|c| c.elapsed_ms));
            AggregateRow {
                t: pts[0].t,
                trials: pts.len(),
                mean_regret: mr,
                std_regret: sr,
                mean_adaptivity: ma,
                std_adaptivity: sa,
                mean_queries: mq,
                std_queries: sq,
                mean_elapsed_ms: me,
            }
        })
        .collect()
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_results(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    write_records(&mut w, records)?;
    w.flush()?;
    Ok(())
}

fn write_records<W: Write>(w: &mut csv::Writer<W>, records: &[RunRecord]) -> Result<()> {
    w.write_record(CSV_HEADER)?;
    for r in records {
        for c in &r.checkpoints {
            w.write_record([
                r.run_id.clone(),
                r.algo.clone(),
                r.env.clone(),
                r.d.to_string(),
                r.m.to_string(),
                r.horizon.to_string(),
                r.seed.to_string(),
                c.t.to_string(),
                fmt_real(c.cum_regret),
                c.cum_adaptivity.to_string(),
                c.cum_queries.to_string(),
                fmt_real(c.elapsed_ms),
            ])?;
        }
    }
    Ok(())
}

/// CSV bytes for `records`, as written by [`write_results`].
pub fn results_to_bytes(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_records(&mut w, records)?;
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Reads a results CSV back into per-run records (consecutive rows with the
/// same `run_id` form one record; errors and diagnostics are not stored).
pub fn read_results(path: &Path) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Malformed(format!("unexpected header {header:?}")));
    }
    let mut out: Vec<RunRecord> = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::Malformed(format!("row {}: bad {what}", line + 2));
        let int = |k: usize, what: &str| row[k].parse::<u64>().map_err(|_| bad(what));
        let real = |k: usize, what: &str| row[k].parse::<f64>().map_err(|_| bad(what));
        let cp = Checkpoint {
            t: int(7, "t")?,
            cum_regret: real(8, "cum_regret")?,
            cum_adaptivity: int(9, "cum_adaptivity")?,
            cum_queries: int(10, "cum_queries")?,
            elapsed_ms: real(11, "elapsed_ms")?,
        };
        if let Some(last) = out.last_mut().filter(|r| r.run_id == row[0]) {
            last.checkpoints.push(cp);
            continue;
        }
        out.push(RunRecord {
            run_id: row[0].to_string(),
            algo: row[1].to_string(),
            env: row[2].to_string(),
            d: int(3, "d")? as usize,
            m: int(4, "m")? as usize,
            horizon: int(5, "T")?,
            seed: int(6, "seed")?,
            checkpoints: vec![cp],
            error: None,
            diagnostics: serde_json::Value::Null,
        });
    }
    Ok(out)
}

pub fn write_meta(meta: &SweepMeta, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(meta)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<SweepMeta> {
    let text = fs::read_to_string(path)?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Malformed("missing schema_version".into()))?;
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(serde_json::from_value(raw)?)
}

pub fn write_aggregate(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "trials",
        "mean_regret",
        "std_regret",
        "mean_adaptivity",
        "std_adaptivity",
        "mean_queries",
        "std_queries",
        "mean_elapsed_ms",
    ])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.trials.to_string(),
            fmt_real(r.mean_regret),
            fmt_real(r.std_regret),
            fmt_real(r.mean_adaptivity),
            fmt_real(r.std_adaptivity),
            fmt_real(r.mean_queries),
            fmt_real(r.std_queries),
            fmt_real(r.mean_elapsed_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Files written for one sweep.
#[derive(Clone, Debug)]
pub struct SweepFiles {
    pub results: PathBuf,
    pub aggregate: PathBuf,
    pub meta: PathBuf,
}

/// Writes `<stem>.csv`, `<stem>_aggregate.csv` and `<stem>.meta.json` into `dir`.
pub fn write_sweep(result: &SweepResult, dir: &Path, stem: &str) -> Result<SweepFiles> {
    fs::create_dir_all(dir)?;
    let files = SweepFiles {
        results: dir.join(format!("{stem}.csv")),
        aggregate: dir.join(format!("{stem}_aggregate.csv")),
        meta: dir.join(format!("{stem}.meta.json")),
    };
    write_results(&result.records, &files.results)?;
    write_aggregate(&result.aggregate, &files.aggregate)?;
    write_meta(&result.meta, &files.meta)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{EnvKind, LinearUniformEnv};
    use crate::types::{ActionSet, ComplexityLedger};

    struct Fixed {
        action: Action,
        ledger: ComplexityLedger,
    }

    impl Policy for Fixed {
        fn select(&mut self, _t: u64) -> Result<Action> {
            Ok(self.action)
        }
        fn observe(&mut self, _obs: &Observation) -> Result<()> {
            Ok(())
        }
        fn ledger(&self) -> &ComplexityLedger {
            &self.ledger
        }
    }

    fn opts(horizon: u64) -> SimOptions {
        SimOptions {
            horizon,
            checkpoint_every: 10,
            batch_checkpoints: true,
            regret_scale: 1.0,
            timing: false,
        }
    }

    #[test]
    fn fixed_suboptimal_action_accrues_exact_gap() {
        let env = LinearUniformEnv::from_means(ActionSet::exact(3, 1).unwrap(), vec![0.25, 0.75, 0.5]);
        let mut p = Fixed {
            action: Action::from_arms([0]),
            ledger: ComplexityLedger::new(),
        };
        let sim = simulate(&mut p, &env, 0.75, 1, opts(1000));
        let last = sim.checkpoints.last().unwrap();
        assert_eq!(last.t, 1000);
        assert_eq!(last.cum_regret, 500.0);
        assert_eq!(sim.checkpoints.len(), 100);
    }

    #[test]
    fn single_action_has_zero_regret() {
        let set = ActionSet::explicit(3, vec![Action::from_arms([0, 2])]).unwrap();
        let env = LinearUniformEnv::from_means(set, vec![0.2, 0.3, 0.4]);
        let mut p = Fixed {
            action: Action::from_arms([0, 2]),
            ledger: ComplexityLedger::new(),
        };
        let sim = simulate(&mut p, &env, env.expected_reward(Action::from_arms([0, 2])), 1, opts(100));
        assert!(sim.checkpoints.iter().all(|c| c.cum_regret == 0.0));
    }

    #[test]
    fn infeasible_action_is_reported() {
        let env = LinearUniformEnv::from_means(ActionSet::exact(3, 1).unwrap(), vec![0.1, 0.2, 0.3]);
        let mut p = Fixed {
            action: Action::from_arms([0, 1]),
            ledger: ComplexityLedger::new(),
        };
        let sim = simulate(&mut p, &env, 0.3, 1, opts(10));
        assert!(sim.error.unwrap().contains("infeasible"));
    }

    fn small_config(kind: AlgoKind) -> RunConfig {
        let mut c = RunConfig::new(
            EnvSpec::new(EnvKind::Linear, 6, 2, 3),
            AlgoConfig::new(kind),
            2000,
            vec![1, 2, 3],
        );
        c.timing = false;
        c
    }

    #[test]
    fn sweep_is_deterministic_across_workers() {
        for kind in [AlgoKind::Aroq, AlgoKind::Sroq] {
            let mut c = small_config(kind);
            let a = results_to_bytes(&run_sweep(&c).unwrap().records).unwrap();
            c.workers = 4;
            let b = results_to_bytes(&run_sweep(&c).unwrap().records).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn checkpoints_monotone_and_end_at_horizon() {
        let r = run_sweep(&small_config(AlgoKind::Aroq)).unwrap();
        for rec in &r.records {
            assert!(rec.completed());
            for w in rec.checkpoints.windows(2) {
                assert!(w[0].t < w[1].t);
                assert!(w[0].cum_adaptivity <= w[1].cum_adaptivity);
                assert!(w[0].cum_queries <= w[1].cum_queries);
                assert!(w[1].cum_regret >= w[0].cum_regret - 1e-9);
            }
        }
        assert_eq!(r.aggregate.last().unwrap().t, 2000);
        assert_eq!(r.aggregate.len(), 1000);
    }

    #[test]
    fn single_seed_aggregate() {
        let mut c = small_config(AlgoKind::Sroq);
        c.seeds = vec![9];
        let r = run_sweep(&c).unwrap();
        let last = r.aggregate.last().unwrap();
        assert_eq!(last.std_regret, 0.0);
        assert_eq!(last.mean_regret, r.records[0].last().unwrap().cum_regret);
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let r = run_sweep(&small_config(AlgoKind::Sroq)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results(&r.records, &p).unwrap();
        let back = read_results(&p).unwrap();
        let p2 = dir.path().join("r2.csv");
        write_results(&back, &p2).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
        let rows: usize = r.records.iter().map(|x| x.checkpoints.len()).sum();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), rows + 1);
    }

    #[test]
    fn empty_record_list_is_header_only() {
        let bytes = results_to_bytes(&[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn meta_round_trip_and_schema_check() {
        let r = run_sweep(&small_config(AlgoKind::Sroq)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_sweep(&r, dir.path(), "x").unwrap();
        let meta = read_meta(&files.meta).unwrap();
        assert_eq!(meta.config, r.meta.config);
        assert!(meta.grid_boundaries.is_some());
        let text = fs::read_to_string(&files.meta).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 7");
        fs::write(&files.meta, text).unwrap();
        assert!(matches!(read_meta(&files.meta), Err(Error::SchemaVersion { found: 7, .. })));
    }

    #[test]
    fn malformed_csv_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_results(&p), Err(Error::Malformed(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = small_config(AlgoKind::Aroq);
        c.checkpoint_every = 0;
        assert!(c.validate().is_err());
        let mut c = small_config(AlgoKind::Aroq);
        c.seeds.clear();
        assert!(c.validate().is_err());
        let mut c = small_config(AlgoKind::AroqC);
        c.env.kind = EnvKind::General;
        assert!(c.validate().unwrap_err().to_string().contains("algorithm requires linear feedback"));
    }

    #[test]
    fn aroq_regret_piecewise_linear_between_queries() {
        let mut c = small_config(AlgoKind::Aroq);
        c.checkpoint_every = 1;
        let prepared = prepare(&c.env, c.algo.enumeration_cap).unwrap();
        let rec = run_trial(&c, &prepared, 1);
        let cps = &rec.checkpoints;
        for w in cps.windows(3) {
            if w[1].cum_queries == w[0].cum_queries && w[2].cum_queries == w[1].cum_queries {
                let g1 = w[1].cum_regret - w[0].cum_regret;
                let g2 = w[2].cum_regret - w[1].cum_regret;
                assert!((g1 - g2).abs() < 1e-9);
            }
        }
    }
}
