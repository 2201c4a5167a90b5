use std::fs;

use oracle_thrift::algo::{build_policy, AlgoConfig, AlgoKind};
use oracle_thrift::envs::{EnvKind, EnvSpec, LinearUniformEnv};
use oracle_thrift::oracle::BatchExecutor;
use oracle_thrift::rng;
use oracle_thrift::runner::{
    aggregate, prepare, read_results, run_sweep, run_sweep_prepared, run_trial, simulate, write_results, RunConfig,
    SimOptions,
};
use oracle_thrift::types::ActionSet;

fn config(kind: AlgoKind, env: EnvKind, horizon: u64, seeds: u64) -> RunConfig {
    let (d, m) = match env {
        EnvKind::Linear => (8, 2),
        EnvKind::Cov => (6, 2),
        EnvKind::General => (4, 2),
    };
    let mut c = RunConfig::new(EnvSpec::new(env, d, m, 5), AlgoConfig::new(kind), horizon, (1..=seeds).collect());
    c.timing = false;
    c
}

/// Two arms, one pulled per round, no noise: UCB with `sqrt(1.5 ln t / n)`
/// bonuses and unseen arms first, ties to the lower index.
fn hand_simulated_cucb(means: [f64; 2], horizon: u64) -> Vec<f64> {
    let (mut n, mut sum) = ([0u64; 2], [0.0f64; 2]);
    let best = means[0].max(means[1]);
    let mut regret = 0.0;
    let mut out = Vec::new();
    for t in 1..=horizon {
        let index = |i: usize| {
            if n[i] == 0 {
                f64::INFINITY
            } else {
                sum[i] / n[i] as f64 + (1.5 * (t as f64).ln() / n[i] as f64).sqrt()
            }
        };
        let pick = if index(1) > index(0) { 1 } else { 0 };
        n[pick] += 1;
        sum[pick] += means[pick];
        regret += best - means[pick];
        out.push(regret);
    }
    out
}

#[test]
fn cucb_matches_hand_simulation() {
    let means = [0.35, 0.6];
    let env = LinearUniformEnv::from_means(ActionSet::exact(2, 1).unwrap(), means.to_vec()).with_noise_scale(0.0);
    let cfg = AlgoConfig::new(AlgoKind::Cucb);
    let mut policy = build_policy(&cfg, &env, 400, BatchExecutor::sequential()).unwrap();
    let opts = SimOptions {
        horizon: 400,
        checkpoint_every: 1,
        batch_checkpoints: false,
        regret_scale: 1.0,
        timing: false,
    };
    let sim = simulate(policy.as_mut(), &env, 0.6, 11, opts);
    let expected = hand_simulated_cucb(means, 400);
    assert_eq!(sim.checkpoints.len(), 400);
    for (cp, want) in sim.checkpoints.iter().zip(&expected) {
        assert!((cp.cum_regret - want).abs() < 1e-9, "t={} {} vs {}", cp.t, cp.cum_regret, want);
    }
    assert!(expected[399] > 0.0);
}

#[test]
fn shuffled_seed_order_gives_identical_aggregates() {
    let forward = config(AlgoKind::Sroq, EnvKind::Linear, 3000, 20);
    let mut backward = forward.clone();
    backward.seeds.reverse();
    let prepared = prepare(&forward.env, forward.algo.enumeration_cap).unwrap();
    let a = run_sweep_prepared(&forward, &prepared).unwrap();
    let b = run_sweep_prepared(&backward, &prepared).unwrap();
    assert_eq!(a.aggregate, b.aggregate);
    let mut rb = b.records.clone();
    rb.sort_by_key(|r| r.seed);
    assert_eq!(a.records, rb);
    assert_eq!(aggregate(&rb, forward.checkpoint_every), a.aggregate);
}

#[test]
fn twenty_seed_csv_row_count() {
    let r = run_sweep(&config(AlgoKind::Aroq, EnvKind::Linear, 2000, 20)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_results(&r.records, &path).unwrap();
    let rows = fs::read_to_string(&path).unwrap().lines().count();
    let checkpoints: usize = r.records.iter().map(|x| x.checkpoints.len()).sum();
    assert_eq!(rows, checkpoints + 1);
    let back = read_results(&path).unwrap();
    assert_eq!(back.len(), 20);
    for (x, y) in back.iter().zip(&r.records) {
        assert_eq!(x.checkpoints, y.checkpoints);
    }
}

#[test]
fn record_totals_equal_policy_ledger() {
    for (kind, env) in [
        (AlgoKind::Aroq, EnvKind::Linear),
        (AlgoKind::Sroq, EnvKind::Linear),
        (AlgoKind::AroqC, EnvKind::Cov),
        (AlgoKind::SroqGr, EnvKind::General),
    ] {
        let c = config(kind, env, 3000, 1);
        let prepared = prepare(&c.env, c.algo.enumeration_cap).unwrap();
        let record = run_trial(&c, &prepared, 1);
        let mut policy = build_policy(&c.algo, prepared.env.as_ref(), c.horizon, BatchExecutor::sequential()).unwrap();
        let opts = SimOptions {
            horizon: c.horizon,
            checkpoint_every: c.checkpoint_every,
            batch_checkpoints: true,
            regret_scale: 1.0,
            timing: false,
        };
        let sim = simulate(policy.as_mut(), prepared.env.as_ref(), prepared.optimal_reward, rng::trial_key(5, 1), opts);
        let last = record.last().unwrap();
        assert_eq!(last.cum_adaptivity, policy.ledger().adaptivity_rounds(), "{kind:?}");
        assert_eq!(last.cum_queries, policy.ledger().total_queries(), "{kind:?}");
        assert_eq!(sim.checkpoints, record.checkpoints, "{kind:?}");
    }
}

#[test]
fn scheduled_adaptivity_counts_batches() {
    for (kind, env, per_epoch) in [
        (AlgoKind::Sroq, EnvKind::Linear, 1),
        (AlgoKind::SroqGr, EnvKind::General, 1),
        (AlgoKind::SroqC, EnvKind::Cov, 2),
    ] {
        let r = run_sweep(&config(kind, env, 20_000, 3)).unwrap();
        for rec in &r.records {
            let executed = rec.diagnostics["executed_epochs"].as_u64().unwrap();
            assert_eq!(rec.last().unwrap().cum_adaptivity, per_epoch * executed, "{kind:?}");
            assert!((executed as usize) < r.meta.grid_boundaries.as_ref().unwrap().len());
        }
    }
}

#[test]
fn batch_checkpoints_capture_every_step() {
    let r = run_sweep(&config(AlgoKind::Aroq, EnvKind::Linear, 5000, 2)).unwrap();
    for rec in &r.records {
        let mut seen = 0;
        for cp in &rec.checkpoints {
            assert!(cp.cum_adaptivity == seen || cp.cum_adaptivity == seen + 1);
            seen = cp.cum_adaptivity;
        }
        assert_eq!(seen, rec.last().unwrap().cum_adaptivity);
    }
}

#[test]
fn cucb_queries_every_round() {
    let r = run_sweep(&config(AlgoKind::Cucb, EnvKind::Linear, 1000, 1)).unwrap();
    let last = r.records[0].last().unwrap();
    assert_eq!((last.cum_adaptivity, last.cum_queries), (1000, 1000));
    assert_eq!(r.records[0].checkpoints.len(), 1000);
}

#[test]
fn failed_trial_is_recorded_not_fatal() {
    let mut c = config(AlgoKind::AroqGr, EnvKind::General, 500, 2);
    c.algo.joint_budget = 1;
    let r = run_sweep(&c).unwrap();
    assert_eq!(r.meta.failures, 2);
    assert!(r.records.iter().all(|x| x.error.as_deref().is_some_and(|e| e.contains("budget"))));
    assert!(r.aggregate.is_empty());
}

#[test]
fn alpha_regret_uses_scaled_optimum() {
    let mut c = config(AlgoKind::AlphaAroq, EnvKind::Linear, 2000, 1);
    c.algo.alpha = 0.5;
    let prepared = prepare(&c.env, c.algo.enumeration_cap).unwrap();
    let rec = run_trial(&c, &prepared, 1);
    let mut plain = c.clone();
    plain.algo.alpha = 1.0;
    let full = run_trial(&plain, &prepared, 1);
    // α-regret is smaller than regret by (1 − α)·r̄*·T whenever the played actions agree
    assert!(rec.last().unwrap().cum_regret < full.last().unwrap().cum_regret);
    assert!(rec.last().unwrap().cum_regret < 2000.0 * prepared.optimal_reward * 0.5 + 1e-9);
    assert!(prepared.env.expected_reward(prepared.optimal_action) == prepared.optimal_reward);
}
