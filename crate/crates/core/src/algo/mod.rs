//! Bandit policies and their configuration.

pub mod cov;
pub mod general;
pub mod linear;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envs::{EnvKind, Environment};
use crate::error::{Error, Result};
use crate::oracle::{
    for_each_candidate, AlphaOracle, BatchExecutor, Constraints, ExactOracle, Objective, Oracle,
    DEFAULT_ENUMERATION_CAP,
};
use crate::types::{Action, ActionSet, ActionSetKind, ComplexityLedger, Observation};

pub use cov::{AroqC, SroqC};
pub use general::{AroqGr, SroqGr};
pub use linear::{Aroq, Sroq};

/// A sequential decision rule. The runner calls `select(t)` then
/// `observe(...)` once per round, `t = 1..=T`.
pub trait Policy: Send {
    fn select(&mut self, t: u64) -> Result<Action>;
    fn observe(&mut self, obs: &Observation) -> Result<()>;
    fn ledger(&self) -> &ComplexityLedger;
    /// Algorithm-specific state worth recording with the run.
    fn diagnostics(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgoKind {
    #[serde(rename = "cucb")]
    Cucb,
    #[serde(rename = "aroq")]
    Aroq,
    #[serde(rename = "sroq")]
    Sroq,
    #[serde(rename = "alpha-aroq")]
    AlphaAroq,
    #[serde(rename = "aroq-c")]
    AroqC,
    #[serde(rename = "sroq-c")]
    SroqC,
    #[serde(rename = "aroq-gr")]
    AroqGr,
    #[serde(rename = "sroq-gr")]
    SroqGr,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 8] = [
        AlgoKind::Cucb,
        AlgoKind::Aroq,
        AlgoKind::Sroq,
        AlgoKind::AlphaAroq,
        AlgoKind::AroqC,
        AlgoKind::SroqC,
        AlgoKind::AroqGr,
        AlgoKind::SroqGr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgoKind::Cucb => "cucb",
            AlgoKind::Aroq => "aroq",
            AlgoKind::Sroq => "sroq",
            AlgoKind::AlphaAroq => "alpha-aroq",
            AlgoKind::AroqC => "aroq-c",
            AlgoKind::SroqC => "sroq-c",
            AlgoKind::AroqGr => "aroq-gr",
            AlgoKind::SroqGr => "sroq-gr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn description(self) -> &'static str {
        match self {
            AlgoKind::Cucb => "UCB baseline querying the oracle every round",
            AlgoKind::Aroq => "adaptive rare oracle queries, per-arm square-root epochs",
            AlgoKind::Sroq => "scheduled oracle batches with arm elimination",
            AlgoKind::AlphaAroq => "adaptive rare queries against an alpha-approximation oracle",
            AlgoKind::AroqC => "covariance-adaptive rare queries, per-pair doubling epochs",
            AlgoKind::SroqC => "covariance-adaptive scheduled batches, arm and pair elimination",
            AlgoKind::AroqGr => "general monotone rewards, adaptive rare queries",
            AlgoKind::SroqGr => "general monotone rewards, scheduled batches",
        }
    }

    /// Whether the algorithm has an update-every-round mode.
    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            AlgoKind::Cucb | AlgoKind::Aroq | AlgoKind::AlphaAroq | AlgoKind::AroqC | AlgoKind::AroqGr
        )
    }

    /// Rejects algorithm/environment pairs whose feedback model does not fit.
    pub fn check_env(self, env: EnvKind) -> std::result::Result<(), String> {
        match self {
            AlgoKind::Cucb
            | AlgoKind::Aroq
            | AlgoKind::Sroq
            | AlgoKind::AlphaAroq
            | AlgoKind::AroqC
            | AlgoKind::SroqC
                if env == EnvKind::General =>
            {
                Err("algorithm requires linear feedback".into())
            }
            AlgoKind::AroqGr | AlgoKind::SroqGr if env == EnvKind::Cov => {
                Err("algorithm requires outcomes in [0, 1]".into())
            }
            _ => Ok(()),
        }
    }
}

/// Hyperparameters shared by all algorithms; each uses the subset it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub kind: AlgoKind,
    /// Confidence constant in the mean and CDF bonuses.
    pub c: f64,
    /// Requested epoch count for scheduled algorithms (`None` = default).
    pub epochs: Option<usize>,
    pub alpha: f64,
    pub c_h: f64,
    pub c_f: f64,
    /// Upper limit on covariance warm-up rounds (`None` = `⌊T/10⌋`).
    pub warmup_cap: Option<u64>,
    pub discretize: bool,
    pub discretize_c: f64,
    pub update_every_round: bool,
    pub joint_budget: u128,
    pub enumeration_cap: u128,
    /// Use the top-m shortcut for unconstrained linear queries.
    pub fast_linear: bool,
}

impl AlgoConfig {
    pub fn new(kind: AlgoKind) -> Self {
        AlgoConfig {
            kind,
            c: 1.5,
            epochs: None,
            alpha: 0.8,
            c_h: 1.0,
            c_f: 1.0,
            warmup_cap: None,
            discretize: false,
            discretize_c: 1.0,
            update_every_round: kind == AlgoKind::Cucb,
            joint_budget: general::DEFAULT_JOINT_BUDGET,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            fast_linear: false,
        }
    }

    /// Name used in result files.
    pub fn label(&self) -> String {
        match (self.kind, self.update_every_round) {
            (AlgoKind::Aroq, true) | (AlgoKind::Cucb, _) => "cucb".into(),
            (AlgoKind::AroqC, true) => "ols-ucb-c-mode".into(),
            (AlgoKind::AroqGr, true) => "sdcb-mode".into(),
            (AlgoKind::AlphaAroq, true) => "alpha-cucb".into(),
            (k, _) => k.as_str().into(),
        }
    }

    /// Multiplier on `r̄(a*)` in the reported regret.
    pub fn regret_scale(&self) -> f64 {
        if self.kind == AlgoKind::AlphaAroq {
            self.alpha
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad("C must be a nonnegative finite number");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.c_h >= 0.0 && self.c_f >= 0.0) {
            return bad("c_h and c_f must be nonnegative");
        }
        if self.discretize && !(self.discretize_c.is_finite() && self.discretize_c > 0.0) {
            return bad("discretization constant must be positive");
        }
        if self.update_every_round && !self.kind.is_adaptive() {
            return bad("update-every-round applies only to adaptive algorithms");
        }
        if self.discretize && !matches!(self.kind, AlgoKind::AroqGr | AlgoKind::SroqGr) {
            return bad("discretization applies only to general-reward algorithms");
        }
        if self.joint_budget == 0 || self.enumeration_cap == 0 {
            return bad("budgets must be positive");
        }
        Ok(())
    }

    fn exact_oracle(&self) -> ExactOracle {
        ExactOracle {
            cap: self.enumeration_cap,
            fast_linear: self.fast_linear,
        }
    }
}

/// Instantiates the policy for one trial.
pub fn build_policy(
    config: &AlgoConfig,
    env: &dyn Environment,
    horizon: u64,
    executor: BatchExecutor,
) -> Result<Box<dyn Policy>> {
    config.validate()?;
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let set = env.action_set().clone();
    let exact: Arc<dyn Oracle> = Arc::new(config.exact_oracle());
    let linear_only = |name: &str| -> Result<()> {
        if env.linear_means().is_none() {
            Err(Error::Config(format!("{name}: algorithm requires linear feedback")))
        } else {
            Ok(())
        }
    };
    Ok(match config.kind {
        AlgoKind::Cucb | AlgoKind::Aroq => {
            linear_only(config.kind.as_str())?;
            let every = config.update_every_round || config.kind == AlgoKind::Cucb;
            Box::new(Aroq::linear(set, horizon, config.c, exact, executor).every_round(every))
        }
        AlgoKind::AlphaAroq => {
            linear_only(config.kind.as_str())?;
            let oracle: Arc<dyn Oracle> = Arc::new(AlphaOracle::new(config.exact_oracle(), config.alpha)?);
            Box::new(
                Aroq::linear(set, horizon, config.c, oracle, executor)
                    .every_round(config.update_every_round),
            )
        }
        AlgoKind::Sroq => {
            linear_only(config.kind.as_str())?;
            Box::new(Sroq::linear(set, horizon, config.epochs, config.c, exact, executor)?)
        }
        AlgoKind::AroqC => {
            linear_only(config.kind.as_str())?;
            let params = cov::CovParams::from_config(config);
            Box::new(AroqC::new(set, horizon, params, exact, executor).every_round(config.update_every_round))
        }
        AlgoKind::SroqC => {
            linear_only(config.kind.as_str())?;
            let params = cov::CovParams::from_config(config);
            Box::new(SroqC::new(set, horizon, config.epochs, params, exact, executor)?)
        }
        AlgoKind::AroqGr | AlgoKind::SroqGr => {
            if !env.unit_outcomes() {
                return Err(Error::Config(format!(
                    "{}: algorithm requires outcomes in [0, 1]",
                    config.kind.as_str()
                )));
            }
            let model = general::GeneralModel::from_config(config, &set, horizon, env.reward_fn());
            if config.kind == AlgoKind::AroqGr {
                Box::new(
                    AroqGr::with_model(set, horizon, model, exact, executor)
                        .every_round(config.update_every_round),
                )
            } else {
                Box::new(SroqGr::with_model(set, horizon, config.epochs, model, exact, executor)?)
            }
        }
    })
}

/// Estimates behind an index policy: absorb feedback, emit optimistic and
/// pessimistic objectives.
pub trait IndexModel: Send {
    fn observe(&mut self, obs: &Observation) -> Result<()>;
    /// Play counts `n_i`.
    fn counts(&self) -> &[u64];
    /// Optimistic objective whose bonus uses `ln_term` (`ln t` or `ln T`).
    fn ucb(&self, ln_term: f64) -> Result<Objective>;
    fn lcb(&self, ln_term: f64) -> Result<Objective>;
}

/// Whether any action of `base` satisfies `c`.
pub(crate) fn has_feasible(base: &ActionSet, c: &Constraints) -> bool {
    if c.surviving_pairs.is_none() && !matches!(base.kind(), ActionSetKind::Explicit(_)) {
        return crate::oracle::candidate_bound(base, c) > 0;
    }
    let mut found = false;
    for_each_candidate(base, c, &mut |_| found = true);
    found
}

/// Canonically smallest action of `base` containing `must`.
pub(crate) fn smallest_containing(base: &ActionSet, must: Action) -> Option<Action> {
    let c = Constraints {
        must_include: must,
        ..Constraints::default()
    };
    let mut best: Option<Action> = None;
    for_each_candidate(base, &c, &mut |a| {
        if best.is_none_or(|b| a.canonical_cmp(b).is_lt()) {
            best = Some(a);
        }
    });
    best
}

pub(crate) fn ln(x: u64) -> f64 {
    (x.max(1) as f64).ln()
}
