//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p oracle-thrift-cli --test acceptance` always reports every
//! line; add `-- --strict` (or set `ORACLE_THRIFT_ACCEPTANCE_STRICT=1`) to
//! exit nonzero when any criterion fails.

use std::collections::HashMap;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use oracle_thrift::algo::cov::{ellipsoid_quadform, shrinkage_width, CovSnapshot};
use oracle_thrift::algo::general::{
    discretize_observation, empirical_distribution, expected_value, shifted_distribution, EmpiricalCdf, Shift,
};
use oracle_thrift::algo::{AlgoConfig, AlgoKind};
use oracle_thrift::envs::{CovarianceGaussianEnv, EnvKind, EnvSpec, Environment, RewardFn};
use oracle_thrift::rng;
use oracle_thrift::runner::{mean_std, prepare, run_sweep_prepared, Prepared, RunConfig, SweepResult};
use oracle_thrift::schedule::{build_grid, closed_form, default_epochs};
use oracle_thrift::stats::Stats;
use oracle_thrift::types::{Action, ActionSet, Observation};

const SEEDS: u64 = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Sweeps are shared between criteria; each configuration runs once.
struct Runs {
    prepared: HashMap<(EnvKind, usize, usize), Prepared>,
    sweeps: HashMap<String, SweepResult>,
}

impl Runs {
    fn get(&mut self, algo: AlgoConfig, env: EnvKind, horizon: u64, seeds: u64) -> &SweepResult {
        let (d, m) = env.default_dims();
        let key = format!("{}|{}|{horizon}|{seeds}|{}", algo.label(), env.as_str(), algo.alpha);
        if !self.sweeps.contains_key(&key) {
            let spec = EnvSpec::new(env, d, m, 0);
            let prepared = self
                .prepared
                .entry((env, d, m))
                .or_insert_with(|| prepare(&spec, algo.enumeration_cap).expect("environment"));
            let config = RunConfig::new(spec, algo, horizon, (1..=seeds).collect());
            let result = run_sweep_prepared(&config, prepared).expect("sweep");
            assert_eq!(result.meta.failures, 0, "{key}: failed trials");
            self.sweeps.insert(key.clone(), result);
        }
        &self.sweeps[&key]
    }
}

fn finals(r: &SweepResult) -> impl Iterator<Item = &oracle_thrift::runner::Checkpoint> {
    r.records.iter().map(|x| x.last().expect("checkpoints"))
}

fn mean_regret_at(r: &SweepResult, t: u64) -> f64 {
    r.aggregate.iter().find(|row| row.t == t).expect("checkpoint").mean_regret
}

fn algo(kind: AlgoKind) -> AlgoConfig {
    AlgoConfig::new(kind)
}

fn oracle_thrift_linear(runs: &mut Runs) -> Outcome {
    let cucb = runs.get(algo(AlgoKind::Cucb), EnvKind::Linear, 100_000, SEEDS);
    let cucb_ok = finals(cucb).all(|c| c.cum_queries == 100_000 && c.cum_adaptivity == 100_000);
    let aroq = runs.get(algo(AlgoKind::Aroq), EnvKind::Linear, 100_000, SEEDS);
    let aq = finals(aroq).map(|c| c.cum_queries).max().unwrap();
    let aa = finals(aroq).map(|c| c.cum_adaptivity).max().unwrap();
    let sroq = runs.get(algo(AlgoKind::Sroq), EnvKind::Linear, 100_000, SEEDS);
    let m = default_epochs(100_000) as u64;
    let mut sroq_ok = true;
    let (mut sa, mut sq) = (0, 0);
    for rec in &sroq.records {
        let last = rec.last().unwrap();
        let executed = rec.diagnostics["executed_epochs"].as_u64().unwrap();
        sroq_ok &= last.cum_adaptivity == executed && executed <= m && last.cum_queries <= 21 * m;
        sa = sa.max(last.cum_adaptivity);
        sq = sq.max(last.cum_queries);
    }
    outcome(
        cucb_ok && aq <= 500 && aa <= 500 && sroq_ok,
        format!("cucb queries=T: {cucb_ok}; aroq max queries {aq}, adaptivity {aa} (<= 500); sroq max adaptivity {sa} (<= {m}), queries {sq} (<= {})", 21 * m),
    )
}

fn query_growth(runs: &mut Runs) -> Outcome {
    let big: Vec<f64> = finals(runs.get(algo(AlgoKind::Aroq), EnvKind::Linear, 100_000, SEEDS))
        .map(|c| c.cum_queries as f64)
        .collect();
    let small: Vec<f64> = finals(runs.get(algo(AlgoKind::Aroq), EnvKind::Linear, 10_000, SEEDS))
        .map(|c| c.cum_queries as f64)
        .collect();
    let (ratio, _) = mean_std(big.iter().zip(&small).map(|(b, s)| b / s));
    let (mb, _) = mean_std(big.iter().copied());
    let (ms, _) = mean_std(small.iter().copied());
    outcome(
        ratio <= 1.6,
        format!("mean per-seed ratio {ratio:.3} (<= 1.6); mean queries {ms:.1} at 1e4, {mb:.1} at 1e5"),
    )
}

fn regret_ordering(runs: &mut Runs) -> Outcome {
    let t = 100_000;
    let mut finals = Vec::new();
    let mut sublinear = Vec::new();
    for kind in [AlgoKind::Cucb, AlgoKind::Aroq, AlgoKind::Sroq] {
        let r = runs.get(algo(kind), EnvKind::Linear, t, SEEDS);
        let end = mean_regret_at(r, t);
        let tenth = mean_regret_at(r, t / 10);
        finals.push(end);
        sublinear.push((end / t as f64, tenth / (t / 10) as f64));
    }
    let (c, a, s) = (finals[0], finals[1], finals[2]);
    let bound_s = 3.0 * 3f64.sqrt() * c;
    let order = c <= a && a <= 3.0 * c && s <= bound_s;
    let sub = sublinear.iter().all(|&(end, tenth)| end <= 0.6 * tenth);
    let ratios: Vec<String> = sublinear.iter().map(|(e, t)| format!("{:.3}", e / t)).collect();
    outcome(
        order && sub,
        format!(
            "regret cucb {c:.1}, aroq {a:.1} (<= {:.1}), sroq {s:.1} (<= {bound_s:.1}); per-round ratio T vs T/10 [{}] (<= 0.6)",
            3.0 * c,
            ratios.join(", ")
        ),
    )
}

fn elimination_safety(runs: &mut Runs) -> Outcome {
    let r = runs.get(algo(AlgoKind::Sroq), EnvKind::Linear, 10_000, 100);
    let best: Vec<u64> = r.meta.optimal_action.iter().map(|&i| i as u64).collect();
    let safe = r
        .records
        .iter()
        .filter(|rec| {
            rec.diagnostics["survivors"].as_array().unwrap().iter().all(|epoch| {
                let arms: Vec<u64> = epoch.as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
                best.iter().all(|i| arms.contains(i))
            })
        })
        .count();
    outcome(safe >= 90, format!("a* survives every epoch in {safe}/100 runs (>= 90)"))
}

fn covariance_complexity(runs: &mut Runs) -> Outcome {
    let (d, m) = EnvKind::Cov.default_dims();
    let horizon = 100_000u64;
    let bound = 3.0 * (d * d) as f64 * ((horizon * m as u64) as f64).ln();
    let aroq = runs.get(algo(AlgoKind::AroqC), EnvKind::Cov, horizon, SEEDS);
    let aq = finals(aroq).map(|c| c.cum_queries).max().unwrap();
    let sroq = runs.get(algo(AlgoKind::SroqC), EnvKind::Cov, horizon, SEEDS);
    let mut ok = (aq as f64) <= bound && aq * 10 <= horizon;
    let mut sa = 0;
    for rec in &sroq.records {
        let executed = rec.diagnostics["executed_epochs"].as_u64().unwrap();
        let a = rec.last().unwrap().cum_adaptivity;
        ok &= a == 2 * executed && a <= 12;
        sa = sa.max(a);
    }
    outcome(
        ok,
        format!("aroq-c max queries {aq} (<= {bound:.0}); sroq-c max adaptivity {sa} (= 2 x epochs, <= 12)"),
    )
}

fn covariance_estimator() -> Outcome {
    let (d, m) = EnvKind::Cov.default_dims();
    let rounds = 10_000u64;
    let set = ActionSet::exact(d, m).unwrap();
    let env = CovarianceGaussianEnv::generate(set.clone(), 0);
    let sigma = env.sigma().clone();
    let actions = set.enumerate();
    let h = shrinkage_width(1.0, rounds, d);
    let (mut covered, mut accurate) = (0, 0);
    let mut worst: f64 = 0.0;
    let mut y = vec![0.0; d];
    for seed in 1..=100 {
        let key = rng::trial_key(0, seed);
        let mut pick = rng::auxiliary(key);
        let mut stats = Stats::new(d);
        for t in 1..=rounds {
            let a = actions[pick.random_range(0..actions.len())];
            env.sample_into(&mut rng::round(key, t), &mut y);
            stats.update(&Observation::from_full(t, a, &y)).unwrap();
        }
        let snap = CovSnapshot::new(&stats, h, 1.0);
        let mut all = true;
        let mut dev: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let (hat, bar) = (snap.sigma_hat(i, j).unwrap(), snap.sigma_bar(i, j).unwrap());
                all &= bar >= sigma[(i, j)];
                dev = dev.max((hat - sigma[(i, j)]).abs());
            }
        }
        covered += all as usize;
        accurate += (dev <= 0.1) as usize;
        worst = worst.max(dev);
    }
    outcome(
        covered >= 95 && accurate >= 95,
        format!("upper bound holds in {covered}/100 seeds, max |est - true| <= 0.1 in {accurate}/100 (each >= 95); worst seed {worst:.4}"),
    )
}

/// Gram matrix `Σ_s D_{a_s} Σ̄ D_{a_s} + D_Σ̄ D_n + I` accumulated play by play.
fn dense_quadform(a: Action, log: &[Action], snap: &CovSnapshot) -> f64 {
    let d = snap.d();
    let bar = |i: usize, j: usize| snap.sigma_bar(i, j).unwrap_or(0.0);
    let mut g = DMatrix::<f64>::identity(d, d);
    for s in log {
        for i in s.arms() {
            for j in s.arms() {
                g[(i, j)] += bar(i, j);
            }
        }
    }
    for i in 0..d {
        g[(i, i)] += bar(i, i) * snap.count(i) as f64;
    }
    let x = DVector::from_fn(d, |i, _| if a.contains(i) { 1.0 / snap.count(i) as f64 } else { 0.0 });
    (x.transpose() * g * x)[(0, 0)].max(0.0)
}

fn quadform_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng::auxiliary(2024);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..200 {
        let d = r.random_range(1..=6);
        let m = r.random_range(1..=d);
        let set = ActionSet::at_most(d, m).unwrap();
        let env = CovarianceGaussianEnv::generate(set.clone(), r.random());
        let acts = set.enumerate();
        let mut stats = Stats::new(d);
        let mut log = Vec::new();
        let mut y = vec![0.0; d];
        for t in 1..=r.random_range(1..=500) {
            let a = acts[r.random_range(0..acts.len())];
            env.sample_into(&mut r, &mut y);
            stats.update(&Observation::from_full(t, a, &y)).unwrap();
            log.push(a);
        }
        let snap = CovSnapshot::new(&stats, r.random_range(0.0..3.0), 1.0);
        for &a in &acts {
            if a.arms().any(|i| snap.count(i) == 0) {
                continue;
            }
            let fast = ellipsoid_quadform(a, &snap).unwrap();
            let dense = dense_quadform(a, &log, &snap);
            let rel = (fast - dense).abs() / dense.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(if fast == dense { 0.0 } else { rel });
            compared += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 5.0,
        format!("{compared} actions over 200 histories, max relative gap {worst:.2e} (<= 1e-9), {secs:.2}s (< 5s)"),
    )
}

/// `Σ_k w_k·1{Σ y ≥ θ_k}`, a monotone step reward.
struct StepReward {
    steps: Vec<(f64, f64)>,
}

impl RewardFn for StepReward {
    fn eval(&self, values: &[f64]) -> f64 {
        let s: f64 = values.iter().sum();
        self.steps.iter().filter(|(th, _)| s >= *th).map(|(_, w)| w).sum()
    }
    fn name(&self) -> &'static str {
        "step"
    }
}

fn general_invariants() -> Outcome {
    let mut r = rng::auxiliary(7);
    let (mut cdf_ok, mut order_ok, mut mass_err, mut disc_ok) = (true, true, 0.0f64, true);
    for _ in 0..500 {
        let d = r.random_range(1..=4);
        let m = r.random_range(1..=d);
        let cdfs: Vec<EmpiricalCdf> = (0..d)
            .map(|_| {
                let mut c = EmpiricalCdf::new();
                let levels = r.random_range(1..=6);
                for _ in 0..r.random_range(0..40) {
                    let y = if r.random_bool(0.5) {
                        r.random_range(0..=levels) as f64 / levels as f64
                    } else {
                        r.random_range(0.0..=1.0)
                    };
                    c.record(y).unwrap();
                }
                c
            })
            .collect();
        let eps = r.random_range(0.0..0.6);
        let lower: Vec<_> = cdfs.iter().map(|c| shifted_distribution(c, Shift::Lower, eps)).collect();
        let upper: Vec<_> = cdfs.iter().map(|c| shifted_distribution(c, Shift::Upper, eps)).collect();
        let emp: Vec<_> = cdfs.iter().map(empirical_distribution).collect();
        for k in 0..d {
            for dist in [&lower[k], &upper[k]] {
                mass_err = mass_err.max((dist.masses().iter().sum::<f64>() - 1.0).abs());
            }
            if cdfs[k].n() == 0 {
                continue;
            }
            mass_err = mass_err.max((emp[k].masses().iter().sum::<f64>() - 1.0).abs());
            for q in 0..=200 {
                let x = q as f64 / 200.0;
                let (lo, mid, hi) = (lower[k].cdf(x), emp[k].cdf(x), upper[k].cdf(x));
                cdf_ok &= lo <= mid + 1e-12 && mid <= hi + 1e-12 && (mid - cdfs[k].eval(x)).abs() < 1e-12;
            }
        }
        let steps = (0..r.random_range(1..=4))
            .map(|_| (r.random_range(0.0..=m as f64), r.random_range(0.0..1.0)))
            .collect();
        let reward = StepReward { steps };
        let a = Action::from_bits(r.random_range(1..(1u64 << d)));
        let a = Action::from_arms(a.arms().take(m));
        let el = expected_value(&lower, a, &reward, 1 << 20).unwrap();
        let eu = expected_value(&upper, a, &reward, 1 << 20).unwrap();
        if a.arms().all(|i| cdfs[i].n() > 0) {
            let ee = expected_value(&emp, a, &reward, 1 << 20).unwrap();
            order_ok &= el >= ee - 1e-12 && ee >= eu - 1e-12;
        } else {
            order_ok &= el >= eu - 1e-12;
        }
    }
    for _ in 0..10_000 {
        let s = r.random_range(1..=5000u64);
        let y = r.random_range(0.0..=1.0);
        disc_ok &= (discretize_observation(y, s).unwrap() - y).abs() <= 1.0 / s as f64;
    }
    outcome(
        cdf_ok && order_ok && mass_err <= 1e-12 && disc_ok,
        format!("cdf bracketing {cdf_ok}; expectation order {order_ok}; mass error {mass_err:.1e} (<= 1e-12); discretization within 1/s {disc_ok}"),
    )
}

fn general_complexity(runs: &mut Runs) -> Outcome {
    let (d, m) = EnvKind::General.default_dims();
    let horizon = 10_000u64;
    let bound = 3.0 * d as f64 * (((horizon * m as u64) as f64 / d as f64).ln().ln() + 3.0);
    let aroq = runs.get(algo(AlgoKind::AroqGr), EnvKind::General, horizon, SEEDS);
    let aq = finals(aroq).map(|c| c.cum_queries).max().unwrap();
    let sroq = runs.get(algo(AlgoKind::SroqGr), EnvKind::General, horizon, SEEDS);
    let sa = finals(sroq).map(|c| c.cum_adaptivity).max().unwrap();
    let m_default = default_epochs(horizon) as u64;
    outcome(
        aq as f64 <= bound && sa <= m_default,
        format!("aroq-gr max queries {aq} (<= {bound:.1}); sroq-gr max adaptivity {sa} (<= {m_default})"),
    )
}

fn grid_closure() -> Outcome {
    let mut ok = true;
    let (mut step_gap, mut closure_gap): (f64, f64) = (0.0, 0.0);
    for horizon in [1_000u64, 10_000, 100_000] {
        for epochs in 2..=6 {
            let grid = build_grid(horizon, epochs).unwrap();
            let b = grid.boundaries();
            let eta = grid.eta();
            ok &= b[0] == 1 && *b.last().unwrap() == horizon + 1;
            ok &= b.windows(2).all(|w| w[0] < w[1]);
            // closed form at τ = 1 is η itself; later steps follow the recursion
            let mut gaps = vec![(b[1] as f64 - closed_form(eta, 1)).abs()];
            for tau in 2..b.len() - 1 {
                gaps.push((b[tau] as f64 - eta * (b[tau - 1] as f64).sqrt()).abs());
            }
            for g in gaps {
                step_gap = step_gap.max(g);
                ok &= g <= 1.0;
            }
            let close = (closed_form(eta, epochs) - horizon as f64).abs() / horizon as f64;
            closure_gap = closure_gap.max(close);
            ok &= close <= 1e-9;
        }
    }
    outcome(
        ok,
        format!("15 grids strictly increasing over [1, T]; max per-step rounding gap {step_gap:.3} (<= 1); closed form at M hits T within {closure_gap:.1e}"),
    )
}

fn alpha_oracle(runs: &mut Runs) -> Outcome {
    let mut exact = algo(AlgoKind::AlphaAroq);
    exact.alpha = 1.0;
    let horizon = 10_000;
    let spec = EnvSpec::new(EnvKind::Linear, 20, 3, 0);
    let prepared = prepare(&spec, exact.enumeration_cap).unwrap();
    let run = |cfg: AlgoConfig| {
        let mut c = RunConfig::new(spec.clone(), cfg, horizon, vec![1, 2, 3]);
        c.checkpoint_every = 1;
        c.timing = false;
        run_sweep_prepared(&c, &prepared).unwrap()
    };
    let a = run(exact);
    let b = run(algo(AlgoKind::Aroq));
    let identical = a.records.iter().zip(&b.records).all(|(x, y)| {
        x.checkpoints.len() == y.checkpoints.len()
            && x.checkpoints.iter().zip(&y.checkpoints).all(|(p, q)| {
                p.cum_regret.to_bits() == q.cum_regret.to_bits()
                    && p.cum_queries == q.cum_queries
                    && p.cum_adaptivity == q.cum_adaptivity
            })
    });
    let approx = runs.get(algo(AlgoKind::AlphaAroq), EnvKind::Linear, horizon, SEEDS);
    let end = mean_regret_at(approx, horizon) / horizon as f64;
    let tenth = mean_regret_at(approx, horizon / 10) / (horizon / 10) as f64;
    outcome(
        identical && end <= 0.6 * tenth,
        format!("alpha=1 matches aroq bit for bit: {identical}; alpha=0.8 per-round regret {end:.4} at T vs {tenth:.4} at T/10 (ratio <= 0.6)"),
    )
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_oracle-thrift");
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 3] = [
        &["--algo", "sroq", "--env", "linear", "--T", "20000"],
        &["--algo", "aroq-c", "--env", "cov", "--T", "20000"],
        &["--algo", "aroq-gr", "--env", "general", "--T", "5000"],
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for args in cases {
        let mut outputs = Vec::new();
        for workers in ["1", "8"] {
            let out = dir.path().join(format!("w{workers}"));
            let status = Command::new(bin)
                .arg("sweep")
                .args(args)
                .args(["--seeds", "1-8", "--timing", "off", "--workers", workers, "--out"])
                .arg(&out)
                .output()
                .unwrap();
            ok &= status.status.success();
            let mut files: Vec<_> = std::fs::read_dir(&out)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            outputs.push(files.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>());
            std::fs::remove_dir_all(&out).unwrap();
        }
        let same = !outputs[0].is_empty() && outputs[0] == outputs[1];
        ok &= same;
        notes.push(format!("{} {}", args[1], if same { "identical" } else { "DIFFER" }));
    }
    outcome(ok, format!("--workers 1 vs 8 CSV bytes: {}", notes.join(", ")))
}

fn runtime_ordering(runs: &mut Runs) -> Outcome {
    let mut time = |kind| {
        let r = runs.get(algo(kind), EnvKind::Linear, 100_000, SEEDS);
        r.aggregate.last().unwrap().mean_elapsed_ms
    };
    let (c, a, s) = (time(AlgoKind::Cucb), time(AlgoKind::Aroq), time(AlgoKind::Sroq));
    outcome(
        a <= c && s <= c,
        format!("mean wall time cucb {c:.0} ms, aroq {a:.0} ms, sroq {s:.0} ms"),
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut runs = Runs {
        prepared: HashMap::new(),
        sweeps: HashMap::new(),
    };
    type Check = Box<dyn FnMut(&mut Runs) -> Outcome>;
    let checks: Vec<(&str, Check)> = vec![
        ("oracle thrift, linear", Box::new(oracle_thrift_linear)),
        ("query growth rate", Box::new(query_growth)),
        ("regret ordering", Box::new(regret_ordering)),
        ("elimination safety", Box::new(elimination_safety)),
        ("covariance complexity", Box::new(covariance_complexity)),
        ("covariance estimator event", Box::new(|_: &mut Runs| covariance_estimator())),
        ("quadratic-form equivalence", Box::new(|_: &mut Runs| quadform_equivalence())),
        ("general-reward invariants", Box::new(|_: &mut Runs| general_invariants())),
        ("general-reward complexity", Box::new(general_complexity)),
        ("grid closure", Box::new(|_: &mut Runs| grid_closure())),
        ("alpha oracle", Box::new(alpha_oracle)),
        ("determinism across workers", Box::new(|_: &mut Runs| determinism())),
        ("runtime ordering", Box::new(runtime_ordering)),
    ];
    let total = checks.len();
    let mut failed = 0;
    let start = Instant::now();
    for (name, mut check) in checks {
        let t = Instant::now();
        let o = check(&mut runs);
        failed += !o.pass as usize;
        println!(
            "{} {name:<28} {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.0}s)",
        total - failed,
        start.elapsed().as_secs_f64()
    );
    let strict = std::env::args().any(|a| a == "--strict")
        || std::env::var("ORACLE_THRIFT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
