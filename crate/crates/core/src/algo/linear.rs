//! Linear-reward index policies: the adaptive rare-query loop (with the
//! every-round baseline and the approximate-oracle variant as special
//! cases) and scheduled batched elimination.

use std::sync::Arc;

use serde_json::json;

use super::{has_feasible, ln, IndexModel, Policy};
use crate::error::{Error, OracleError, Result};
use crate::oracle::{BatchExecutor, Constraints, Objective, Oracle, OracleBatch, OracleQuery};
use crate::schedule::{build_grid, default_epochs, EpochGrid};
use crate::stats::ArmStats;
use crate::types::{Action, ActionSet, ComplexityLedger, Observation};

/// Sample means with `sqrt(C·ln(·)/n_i)` bonuses; unseen arms get ±∞.
#[derive(Clone, Debug)]
pub struct LinearModel {
    stats: ArmStats,
    c: f64,
}

impl LinearModel {
    pub fn new(d: usize, c: f64) -> Self {
        LinearModel {
            stats: ArmStats::new(d),
            c,
        }
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }

    fn weights(&self, ln_term: f64, sign: f64) -> Vec<f64> {
        (0..self.stats.d())
            .map(|i| match self.stats.mean(i) {
                Some(mu) => mu + sign * bonus(self.c, ln_term, self.stats.count(i)),
                None => sign * f64::INFINITY,
            })
            .collect()
    }
}

fn bonus(c: f64, ln_term: f64, n: u64) -> f64 {
    (c * ln_term / n as f64).sqrt()
}

impl IndexModel for LinearModel {
    fn observe(&mut self, obs: &Observation) -> Result<()> {
        Ok(self.stats.record(obs)?)
    }
    fn counts(&self) -> &[u64] {
        self.stats.counts()
    }
    fn ucb(&self, ln_term: f64) -> Result<Objective> {
        Ok(Objective::linear(self.weights(ln_term, 1.0)))
    }
    fn lcb(&self, ln_term: f64) -> Result<Objective> {
        Ok(Objective::linear(self.weights(ln_term, -1.0)))
    }
}

/// `Σ_{i∈a} (μ̂_i + sqrt(C ln t / n_i))`, `+∞` if any arm of `a` is unseen.
pub fn ucb_index_adaptive(a: Action, stats: &ArmStats, t: u64, c: f64) -> f64 {
    let ln_t = ln(t);
    a.arms()
        .map(|i| match stats.mean(i) {
            Some(mu) => mu + bonus(c, ln_t, stats.count(i)),
            None => f64::INFINITY,
        })
        .sum()
}

/// Per-arm epoch switch: `c_i ≥ 1 + sqrt(T·m·p_i / d)`.
pub fn aroq_trigger(current: u64, previous: u64, horizon: u64, m: usize, d: usize) -> bool {
    current as f64 >= 1.0 + (horizon as f64 * m as f64 * previous as f64 / d as f64).sqrt()
}

/// Per-arm epoch bookkeeping of the adaptive loop.
#[derive(Clone, Debug)]
pub struct ArmEpochs {
    epoch: Vec<u64>,
    current: Vec<u64>,
    previous: Vec<u64>,
}

impl ArmEpochs {
    pub fn new(d: usize) -> Self {
        ArmEpochs {
            epoch: vec![1; d],
            current: vec![0; d],
            previous: vec![0; d],
        }
    }

    /// Advances every arm whose trigger fires; returns whether any did.
    pub fn advance(&mut self, horizon: u64, m: usize) -> bool {
        let d = self.epoch.len();
        let mut any = false;
        for i in 0..d {
            if aroq_trigger(self.current[i], self.previous[i], horizon, m, d) {
                self.epoch[i] += 1;
                self.previous[i] = self.current[i];
                self.current[i] = 0;
                any = true;
            }
        }
        any
    }

    pub fn record(&mut self, a: Action) {
        for i in a.arms() {
            self.current[i] += 1;
        }
    }

    /// `τ_i` per arm.
    pub fn epochs(&self) -> &[u64] {
        &self.epoch
    }

    pub fn total(&self) -> u64 {
        self.epoch.iter().sum()
    }
}

/// Adaptive rare oracle queries over an [`IndexModel`].
///
/// The held action changes only when some arm's epoch ends; every change
/// costs one single-query batch. With `every_round(true)` it queries every
/// round, which is the CUCB-style baseline.
pub struct Aroq<I = LinearModel> {
    set: ActionSet,
    horizon: u64,
    model: I,
    oracle: Arc<dyn Oracle>,
    executor: BatchExecutor,
    ledger: ComplexityLedger,
    epochs: ArmEpochs,
    held: Option<Action>,
    frozen: Option<Objective>,
    every_round: bool,
}

impl Aroq<LinearModel> {
    pub fn linear(
        set: ActionSet,
        horizon: u64,
        c: f64,
        oracle: Arc<dyn Oracle>,
        executor: BatchExecutor,
    ) -> Self {
        let model = LinearModel::new(set.d(), c);
        Self::with_model(set, horizon, model, oracle, executor)
    }
}

impl<I: IndexModel> Aroq<I> {
    pub fn with_model(
        set: ActionSet,
        horizon: u64,
        model: I,
        oracle: Arc<dyn Oracle>,
        executor: BatchExecutor,
    ) -> Self {
        let d = set.d();
        Aroq {
            set,
            horizon,
            model,
            oracle,
            executor,
            ledger: ComplexityLedger::new(),
            epochs: ArmEpochs::new(d),
            held: None,
            frozen: None,
            every_round: false,
        }
    }

    pub fn every_round(mut self, on: bool) -> Self {
        self.every_round = on;
        self
    }

    pub fn model(&self) -> &I {
        &self.model
    }

    pub fn arm_epochs(&self) -> &ArmEpochs {
        &self.epochs
    }

    /// Index of `a` under the snapshot taken at the last oracle call.
    pub fn frozen_index(&self, a: Action) -> Option<f64> {
        self.frozen.as_ref().map(|o| o.value(a))
    }
}

impl<I: IndexModel> Policy for Aroq<I> {
    fn select(&mut self, t: u64) -> Result<Action> {
        let triggered = self.epochs.advance(self.horizon, self.set.m());
        if self.held.is_none() || self.every_round || triggered {
            let objective = self.model.ucb(ln(t))?;
            let batch = OracleBatch::new(&self.set, vec![OracleQuery::new(objective.clone())])
                .expect("one query");
            let sol = self
                .executor
                .execute(self.oracle.as_ref(), &batch, &mut self.ledger)?;
            self.held = Some(sol[0].action);
            self.frozen = Some(objective);
        }
        Ok(self.held.expect("set above"))
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.model.observe(obs)?;
        self.epochs.record(obs.action);
        Ok(())
    }

    fn ledger(&self) -> &ComplexityLedger {
        &self.ledger
    }

    fn diagnostics(&self) -> serde_json::Value {
        json!({ "arm_epochs": self.epochs.epochs(), "epoch_total": self.epochs.total() })
    }
}

/// Scheduled batched elimination over an [`IndexModel`].
///
/// At the start of each grid epoch one batch asks, for every surviving arm,
/// for the UCB-best surviving action containing it, plus the LCB-best
/// surviving action. Arms whose representative UCB falls below that LCB are
/// eliminated; the epoch then round-robins the survivors' representatives.
pub struct Sroq<I = LinearModel> {
    set: ActionSet,
    grid: EpochGrid,
    model: I,
    oracle: Arc<dyn Oracle>,
    executor: BatchExecutor,
    ledger: ComplexityLedger,
    ln_horizon: f64,
    epoch: usize,
    survivors: u64,
    /// `(arm, representative)` for surviving arms, ascending.
    reps: Vec<(usize, Action)>,
    history: Vec<u64>,
}

impl Sroq<LinearModel> {
    pub fn linear(
        set: ActionSet,
        horizon: u64,
        epochs: Option<usize>,
        c: f64,
        oracle: Arc<dyn Oracle>,
        executor: BatchExecutor,
    ) -> Result<Self> {
        let model = LinearModel::new(set.d(), c);
        Self::with_model(set, horizon, epochs, model, oracle, executor)
    }
}

impl<I: IndexModel> Sroq<I> {
    pub fn with_model(
        set: ActionSet,
        horizon: u64,
        epochs: Option<usize>,
        model: I,
        oracle: Arc<dyn Oracle>,
        executor: BatchExecutor,
    ) -> Result<Self> {
        let grid = build_grid(horizon, epochs.unwrap_or_else(|| default_epochs(horizon)))?;
        let survivors = set.full_mask();
        Ok(Sroq {
            set,
            grid,
            model,
            oracle,
            executor,
            ledger: ComplexityLedger::new(),
            ln_horizon: ln(horizon),
            epoch: 0,
            survivors,
            reps: Vec::new(),
            history: Vec::new(),
        })
    }

    pub fn grid(&self) -> &EpochGrid {
        &self.grid
    }

    pub fn model(&self) -> &I {
        &self.model
    }

    /// Surviving-arm mask after each executed epoch.
    pub fn survivors_history(&self) -> &[u64] {
        &self.history
    }

    /// `(arm, representative)` pairs of the current epoch.
    pub fn representatives(&self) -> &[(usize, Action)] {
        &self.reps
    }

    fn run_epoch(&mut self) -> Result<()> {
        let prev = self.survivors;
        let arms: Vec<usize> = Action::from_bits(prev)
            .arms()
            .filter(|&i| {
                has_feasible(
                    &self.set,
                    &Constraints {
                        must_include: Action::from_arms([i]),
                        surviving_arms: Some(prev),
                        surviving_pairs: None,
                    },
                )
            })
            .collect();
        let ucb = self.model.ucb(self.ln_horizon)?;
        let lcb = self.model.lcb(self.ln_horizon)?;
        let mut queries: Vec<OracleQuery> = arms
            .iter()
            .map(|&i| {
                OracleQuery::with_constraints(
                    ucb.clone(),
                    Constraints {
                        must_include: Action::from_arms([i]),
                        surviving_arms: Some(prev),
                        surviving_pairs: None,
                    },
                )
            })
            .collect();
        queries.push(OracleQuery::with_constraints(
            lcb,
            Constraints {
                surviving_arms: Some(prev),
                ..Constraints::default()
            },
        ));
        let batch = OracleBatch::new(&self.set, queries).expect("nonempty");
        let sols = self
            .executor
            .execute(self.oracle.as_ref(), &batch, &mut self.ledger)?;
        let best_lcb = sols[arms.len()];
        let mut keep: u64 = 0;
        for (k, &i) in arms.iter().enumerate() {
            if sols[k].value >= best_lcb.value {
                keep |= 1 << i;
            }
        }
        if keep == 0 {
            keep = best_lcb.action.bits();
        }
        self.survivors = keep;
        self.reps = arms
            .iter()
            .zip(&sols)
            .filter(|(&i, _)| keep & (1 << i) != 0)
            .map(|(&i, s)| (i, s.action))
            .collect();
        if self.reps.is_empty() {
            return Err(OracleError::EmptyFeasibleSet.into());
        }
        self.history.push(keep);
        Ok(())
    }
}

impl<I: IndexModel> Policy for Sroq<I> {
    fn select(&mut self, t: u64) -> Result<Action> {
        let tau = self
            .grid
            .epoch_of(t)
            .ok_or_else(|| Error::Config(format!("round {t} beyond horizon")))?;
        while self.epoch < tau {
            self.epoch += 1;
            if self.epoch == tau {
                self.run_epoch()?;
            }
        }
        let k = (t % self.reps.len() as u64) as usize;
        Ok(self.reps[k].1)
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.model.observe(obs)
    }

    fn ledger(&self) -> &ComplexityLedger {
        &self.ledger
    }

    fn diagnostics(&self) -> serde_json::Value {
        let survivors: Vec<Vec<usize>> = self
            .history
            .iter()
            .map(|&m| Action::from_bits(m).arms().map(|i| i + 1).collect())
            .collect();
        json!({
            "boundaries": self.grid.boundaries(),
            "executed_epochs": self.history.len(),
            "survivors": survivors,
        })
    }
}
