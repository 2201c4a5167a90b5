//! Seeded synthetic environments with exact expected rewards.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, OracleError, Result};
use crate::oracle::{for_each_candidate, Constraints, ExactOracle, Objective, Oracle, OracleQuery, Solution};
use crate::rng::{env_setup, StreamRng};
use crate::types::{Action, ActionSet};

/// Reward as a function of the activated arms' outcomes, given in ascending
/// arm order. Implementations must be monotone in every argument.
pub trait RewardFn: Send + Sync {
    fn eval(&self, values: &[f64]) -> f64;
    fn name(&self) -> &'static str;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SumReward;

impl RewardFn for SumReward {
    fn eval(&self, values: &[f64]) -> f64 {
        values.iter().sum()
    }
    fn name(&self) -> &'static str {
        "sum"
    }
}

/// `sqrt(Σ y_i)`; outcomes are nonnegative so the argument never goes below 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct SqrtSumReward;

impl RewardFn for SqrtSumReward {
    fn eval(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>().max(0.0).sqrt()
    }
    fn name(&self) -> &'static str {
        "sqrt-sum"
    }
}

pub trait Environment: Send + Sync {
    fn name(&self) -> &'static str;
    fn action_set(&self) -> &ActionSet;
    fn d(&self) -> usize {
        self.action_set().d()
    }
    /// Draws a full outcome vector `y_t` into `out` (length `d`).
    fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]);
    /// `r̄(a)`, exact.
    fn expected_reward(&self, a: Action) -> f64;
    /// Realized reward `r(a, y)`.
    fn reward_of(&self, a: Action, y: &[f64]) -> f64;
    /// The monotone reward function applied to the active outcomes.
    fn reward_fn(&self) -> Arc<dyn RewardFn>;
    /// Per-arm means when the reward is linear in the outcomes.
    fn linear_means(&self) -> Option<&[f64]>;
    /// Whether every outcome lies in `[0, 1]`.
    fn unit_outcomes(&self) -> bool;
    /// Objective whose maximizer is `a*`.
    fn expected_objective(&self) -> Objective;
    fn metadata(&self) -> serde_json::Value;
}

/// Means `μ_i ~ U[0,1]`, outcomes uniform on `[μ_i − b_i, μ_i + b_i]` with
/// `b_i = min(μ_i, 1 − μ_i)`, so supports stay in `[0,1]` and `E[y_i] = μ_i`.
#[derive(Clone, Debug)]
pub struct LinearUniformEnv {
    set: ActionSet,
    means: Vec<f64>,
    half_widths: Vec<f64>,
}

impl LinearUniformEnv {
    pub fn generate(set: ActionSet, env_seed: u64) -> Self {
        let mut rng = env_setup(env_seed);
        let means: Vec<f64> = (0..set.d()).map(|_| rng.random::<f64>()).collect();
        Self::from_means(set, means)
    }

    pub fn from_means(set: ActionSet, means: Vec<f64>) -> Self {
        assert_eq!(means.len(), set.d(), "one mean per arm");
        let half_widths = means.iter().map(|&u| u.min(1.0 - u).max(0.0)).collect();
        LinearUniformEnv {
            set,
            means,
            half_widths,
        }
    }

    /// Multiplies every half-width by `scale` (0 gives deterministic outcomes).
    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        for b in &mut self.half_widths {
            *b *= scale;
        }
        self
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }
}

impl Environment for LinearUniformEnv {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn action_set(&self) -> &ActionSet {
        &self.set
    }
    fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        for ((o, &mu), &b) in out.iter_mut().zip(&self.means).zip(&self.half_widths) {
            let u: f64 = rng.random();
            *o = (mu + b * (2.0 * u - 1.0)).clamp(0.0, 1.0);
        }
    }
    fn expected_reward(&self, a: Action) -> f64 {
        a.arms().map(|i| self.means[i]).sum()
    }
    fn reward_of(&self, a: Action, y: &[f64]) -> f64 {
        a.arms().map(|i| y[i]).sum()
    }
    fn reward_fn(&self) -> Arc<dyn RewardFn> {
        Arc::new(SumReward)
    }
    fn linear_means(&self) -> Option<&[f64]> {
        Some(&self.means)
    }
    fn unit_outcomes(&self) -> bool {
        true
    }
    fn expected_objective(&self) -> Objective {
        Objective::linear(self.means.clone())
    }
    fn metadata(&self) -> serde_json::Value {
        json!({
            "kind": self.name(),
            "means": self.means,
            "half_widths": self.half_widths,
        })
    }
}

/// Gaussian outcomes `y ~ N(μ, Σ)` with `Σ = (AAᵀ + I) / (2·max_i (AAᵀ + I)_ii)`.
///
/// Outcomes are not clipped and may leave `[0, 1]`.
#[derive(Clone, Debug)]
pub struct CovarianceGaussianEnv {
    set: ActionSet,
    means: Vec<f64>,
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl CovarianceGaussianEnv {
    pub fn generate(set: ActionSet, env_seed: u64) -> Self {
        let d = set.d();
        let mut rng = env_setup(env_seed);
        let means: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
        let mut sigma = &a * a.transpose() + DMatrix::<f64>::identity(d, d);
        let max_diag = (0..d).map(|i| sigma[(i, i)]).fold(0.0, f64::max);
        sigma /= 2.0 * max_diag;
        Self::from_parts(set, means, sigma).expect("AAᵀ + I is positive definite")
    }

    pub fn from_parts(set: ActionSet, means: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = set.d();
        if means.len() != d || sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::Config("covariance shape does not match d".into()));
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config("covariance is not positive definite".into()))?
            .l();
        Ok(CovarianceGaussianEnv {
            set,
            means,
            sigma,
            chol,
        })
    }

    /// Scales the covariance by `factor ≥ 0`; `0` removes the noise.
    pub fn with_covariance_scale(mut self, factor: f64) -> Self {
        self.sigma *= factor;
        self.chol *= factor.max(0.0).sqrt();
        self
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_profile(&self) -> SigmaProfile {
        sigma_profile(&self.set, &self.sigma)
    }
}

impl Environment for CovarianceGaussianEnv {
    fn name(&self) -> &'static str {
        "cov"
    }
    fn action_set(&self) -> &ActionSet {
        &self.set
    }
    fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let d = self.means.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for (i, slot) in out.iter_mut().enumerate().take(d) {
            let mut v = self.means[i];
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                v += self.chol[(i, k)] * zk;
            }
            *slot = v;
        }
    }
    fn expected_reward(&self, a: Action) -> f64 {
        a.arms().map(|i| self.means[i]).sum()
    }
    fn reward_of(&self, a: Action, y: &[f64]) -> f64 {
        a.arms().map(|i| y[i]).sum()
    }
    fn reward_fn(&self) -> Arc<dyn RewardFn> {
        Arc::new(SumReward)
    }
    fn linear_means(&self) -> Option<&[f64]> {
        Some(&self.means)
    }
    fn unit_outcomes(&self) -> bool {
        false
    }
    fn expected_objective(&self) -> Objective {
        Objective::linear(self.means.clone())
    }
    fn metadata(&self) -> serde_json::Value {
        let d = self.means.len();
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| self.sigma[(i, j)]).collect())
            .collect();
        json!({
            "kind": self.name(),
            "means": self.means,
            "sigma": rows,
            "sigma_profile": self.sigma_profile(),
        })
    }
}

/// Covariance complexity measures behind the covariance-dependent bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaProfile {
    /// `max_{a ∋ i} σ_i²(a)` per arm (0 for arms in no action).
    pub per_arm_max: Vec<f64>,
    /// `Σ_i max_{a ∋ i} σ_i²(a)`.
    pub per_arm_total: f64,
    /// `max_a Σ_{i∈a} σ_i²(a)`.
    pub max_action_sum: f64,
}

/// `σ_i²(a) = Σ_{j∈a} (Σ_ij)_+`.
pub fn sigma_sq(sigma: &DMatrix<f64>, i: usize, a: Action) -> f64 {
    a.arms().map(|j| sigma[(i, j)].max(0.0)).sum()
}

pub fn sigma_profile(set: &ActionSet, sigma: &DMatrix<f64>) -> SigmaProfile {
    let d = set.d();
    let mut per_arm_max = vec![0.0f64; d];
    let mut max_action_sum = f64::NEG_INFINITY;
    for_each_candidate(set, &Constraints::default(), &mut |a| {
        let mut total = 0.0;
        for i in a.arms() {
            let s = sigma_sq(sigma, i, a);
            per_arm_max[i] = per_arm_max[i].max(s);
            total += s;
        }
        max_action_sum = max_action_sum.max(total);
    });
    SigmaProfile {
        per_arm_total: per_arm_max.iter().sum(),
        per_arm_max,
        max_action_sum,
    }
}

/// Default support of the general-reward environment.
pub const DISCRETE_SUPPORT: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// Per-arm discrete outcomes on a shared finite support; reward is
/// `sqrt(Σ_{i∈a} y_i)`.
#[derive(Clone, Debug)]
pub struct GeneralDiscreteEnv {
    set: ActionSet,
    support: Vec<f64>,
    pmfs: Vec<Vec<f64>>,
    cdfs: Vec<Vec<f64>>,
}

impl GeneralDiscreteEnv {
    pub const DOMINANT_MASS: f64 = 0.99;

    /// Each arm gets a uniformly chosen dominant value with mass 0.99; the
    /// other four support points share 0.01 equally.
    pub fn generate(set: ActionSet, env_seed: u64) -> Self {
        let mut rng = env_setup(env_seed);
        let k = DISCRETE_SUPPORT.len();
        let rest = (1.0 - Self::DOMINANT_MASS) / (k - 1) as f64;
        let pmfs = (0..set.d())
            .map(|_| {
                let dom = rng.random_range(0..k);
                (0..k)
                    .map(|v| if v == dom { Self::DOMINANT_MASS } else { rest })
                    .collect()
            })
            .collect();
        Self::from_pmfs(set, DISCRETE_SUPPORT.to_vec(), pmfs).expect("valid default pmfs")
    }

    pub fn from_pmfs(set: ActionSet, support: Vec<f64>, pmfs: Vec<Vec<f64>>) -> Result<Self> {
        if pmfs.len() != set.d() {
            return Err(Error::Config("one pmf per arm required".into()));
        }
        if support.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::Config("support must lie in [0, 1]".into()));
        }
        let mut cdfs = Vec::with_capacity(pmfs.len());
        for p in &pmfs {
            if p.len() != support.len() || p.iter().any(|&x| x < 0.0) {
                return Err(Error::Config("pmf does not match support".into()));
            }
            let total: f64 = p.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("pmf sums to {total}")));
            }
            let mut acc = 0.0;
            cdfs.push(
                p.iter()
                    .map(|x| {
                        acc += x;
                        acc
                    })
                    .collect(),
            );
        }
        Ok(GeneralDiscreteEnv {
            set,
            support,
            pmfs,
            cdfs,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn pmfs(&self) -> &[Vec<f64>] {
        &self.pmfs
    }

    /// `L = sqrt(m)`, the reward's upper bound.
    pub fn reward_bound(&self) -> f64 {
        (self.set.m() as f64).sqrt()
    }

    /// Index of each arm's most likely support value.
    pub fn dominant(&self) -> Vec<usize> {
        self.pmfs
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .max_by(|x, y| x.1.total_cmp(y.1))
                    .map(|(k, _)| k)
                    .unwrap_or(0)
            })
            .collect()
    }
}

impl Environment for GeneralDiscreteEnv {
    fn name(&self) -> &'static str {
        "general"
    }
    fn action_set(&self) -> &ActionSet {
        &self.set
    }
    fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        for (o, cdf) in out.iter_mut().zip(&self.cdfs) {
            let u: f64 = rng.random();
            let k = cdf.partition_point(|&c| c <= u).min(self.support.len() - 1);
            *o = self.support[k];
        }
    }
    fn expected_reward(&self, a: Action) -> f64 {
        let arms: Vec<usize> = a.arms().collect();
        let k = self.support.len();
        let mut idx = vec![0usize; arms.len()];
        let mut vals = vec![0.0; arms.len()];
        let mut total = 0.0;
        loop {
            let mut p = 1.0;
            for (slot, (&arm, &ix)) in arms.iter().zip(&idx).enumerate() {
                p *= self.pmfs[arm][ix];
                vals[slot] = self.support[ix];
            }
            if p > 0.0 {
                total += p * SqrtSumReward.eval(&vals);
            }
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    return total;
                }
                idx[pos] += 1;
                if idx[pos] < k {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
    fn reward_of(&self, a: Action, y: &[f64]) -> f64 {
        let vals: Vec<f64> = a.arms().map(|i| y[i]).collect();
        SqrtSumReward.eval(&vals)
    }
    fn reward_fn(&self) -> Arc<dyn RewardFn> {
        Arc::new(SqrtSumReward)
    }
    fn linear_means(&self) -> Option<&[f64]> {
        None
    }
    fn unit_outcomes(&self) -> bool {
        true
    }
    fn expected_objective(&self) -> Objective {
        let me = self.clone();
        Objective::general(move |a| me.expected_reward(a))
    }
    fn metadata(&self) -> serde_json::Value {
        json!({
            "kind": self.name(),
            "support": self.support,
            "pmfs": self.pmfs,
            "reward": "sqrt-sum",
            "reward_bound": self.reward_bound(),
        })
    }
}

/// `a* = argmax r̄(a)`, solved outside any complexity ledger.
pub fn optimal_action(env: &dyn Environment, oracle: &ExactOracle) -> Result<Solution, OracleError> {
    oracle.solve(env.action_set(), &OracleQuery::new(env.expected_objective()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Linear,
    Cov,
    General,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::Linear => "linear",
            EnvKind::Cov => "cov",
            EnvKind::General => "general",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(EnvKind::Linear),
            "cov" => Some(EnvKind::Cov),
            "general" => Some(EnvKind::General),
            _ => None,
        }
    }

    /// Paper-scale defaults `(d, m)`.
    pub fn default_dims(self) -> (usize, usize) {
        match self {
            EnvKind::Linear => (20, 3),
            EnvKind::Cov => (10, 3),
            EnvKind::General => (5, 2),
        }
    }
}

/// Serializable environment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub d: usize,
    pub m: usize,
    pub env_seed: u64,
    /// `true` for exactly-m actions, `false` for at-most-m.
    #[serde(default = "default_exact")]
    pub exact_m: bool,
}

fn default_exact() -> bool {
    true
}

impl EnvSpec {
    pub fn new(kind: EnvKind, d: usize, m: usize, env_seed: u64) -> Self {
        EnvSpec {
            kind,
            d,
            m,
            env_seed,
            exact_m: true,
        }
    }

    pub fn action_set(&self) -> Result<ActionSet> {
        Ok(if self.exact_m {
            ActionSet::exact(self.d, self.m)?
        } else {
            ActionSet::at_most(self.d, self.m)?
        })
    }

    pub fn build(&self) -> Result<Arc<dyn Environment>> {
        let set = self.action_set()?;
        Ok(match self.kind {
            EnvKind::Linear => Arc::new(LinearUniformEnv::generate(set, self.env_seed)),
            EnvKind::Cov => Arc::new(CovarianceGaussianEnv::generate(set, self.env_seed)),
            EnvKind::General => Arc::new(GeneralDiscreteEnv::generate(set, self.env_seed)),
        })
    }
}
