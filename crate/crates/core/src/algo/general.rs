//! General monotone rewards: per-arm empirical CDFs, shifted confidence
//! distributions and exact expectations over their product.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::linear::{Aroq, Sroq};
use super::{AlgoConfig, IndexModel};
use crate::envs::RewardFn;
use crate::error::{Error, OracleError, Result};
use crate::oracle::Objective;
use crate::types::{Action, ActionSet, Observation};

pub const DEFAULT_JOINT_BUDGET: u128 = 1_000_000;

pub type AroqGr = Aroq<GeneralModel>;
pub type SroqGr = Sroq<GeneralModel>;

/// Empirical distribution of one arm's outcomes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmpiricalCdf {
    // keyed by the bit pattern, which orders like the value for x >= 0
    counts: BTreeMap<u64, u64>,
    n: u64,
}

impl EmpiricalCdf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, y: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfUnitInterval(y));
        }
        // fold -0.0 into 0.0
        let y = y + 0.0;
        *self.counts.entry(y.to_bits()).or_default() += 1;
        self.n += 1;
        Ok(())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `F̂(x) = #{y ≤ x} / n`; 0 when empty.
    pub fn eval(&self, x: f64) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let below: u64 = self
            .counts
            .iter()
            .take_while(|(&k, _)| f64::from_bits(k) <= x)
            .map(|(_, &c)| c)
            .sum();
        below as f64 / self.n as f64
    }

    /// Distinct observed values with multiplicities, ascending.
    pub fn points(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.counts.iter().map(|(&k, &c)| (f64::from_bits(k), c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shift {
    /// Mass moved up to 1: dominates the empirical distribution.
    Lower,
    /// Mass moved down to 0: dominated by it.
    Upper,
}

/// Finite distribution on `[0, 1]` with strictly positive masses.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedDist {
    support: Vec<f64>,
    mass: Vec<f64>,
}

impl ShiftedDist {
    pub fn point_mass(x: f64) -> Self {
        ShiftedDist {
            support: vec![x],
            mass: vec![1.0],
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .take_while(|(&s, _)| s <= x)
            .map(|(_, &p)| p)
            .sum()
    }

    fn from_cdf_points(points: Vec<(f64, f64)>) -> Self {
        let mut support = Vec::with_capacity(points.len());
        let mut mass = Vec::with_capacity(points.len());
        let mut prev = 0.0;
        for (x, f) in points {
            let p = f - prev;
            if p > 0.0 {
                support.push(x);
                mass.push(p);
            }
            prev = f;
        }
        ShiftedDist { support, mass }
    }
}

/// Shifts the empirical CDF by `eps`: `Lower` has CDF `max(F̂ − ε, 0)` below
/// 1, `Upper` has `min(F̂ + ε, 1)`. An empty CDF yields the extreme point
/// mass (1 for `Lower`, 0 for `Upper`).
pub fn shifted_distribution(cdf: &EmpiricalCdf, shift: Shift, eps: f64) -> ShiftedDist {
    if cdf.n() == 0 {
        return ShiftedDist::point_mass(match shift {
            Shift::Lower => 1.0,
            Shift::Upper => 0.0,
        });
    }
    let n = cdf.n() as f64;
    let mut acc = 0u64;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    if shift == Shift::Upper && cdf.points().next().is_none_or(|(x, _)| x > 0.0) {
        pts.push((0.0, eps.min(1.0)));
    }
    for (x, c) in cdf.points() {
        acc += c;
        let f = acc as f64 / n;
        let g = if x >= 1.0 {
            1.0
        } else {
            match shift {
                Shift::Lower => (f - eps).max(0.0),
                Shift::Upper => (f + eps).min(1.0),
            }
        };
        pts.push((x, g));
    }
    if pts.last().is_none_or(|&(x, _)| x < 1.0) {
        pts.push((1.0, 1.0));
    }
    ShiftedDist::from_cdf_points(pts)
}

/// Unshifted empirical distribution.
pub fn empirical_distribution(cdf: &EmpiricalCdf) -> ShiftedDist {
    shifted_distribution(cdf, Shift::Lower, 0.0)
}

/// `E[reward(y_a)]` with `y_i ~ dists[i]` independent, by exact enumeration.
pub fn expected_value(
    dists: &[ShiftedDist],
    a: Action,
    reward: &dyn RewardFn,
    budget: u128,
) -> Result<f64, OracleError> {
    let size: u128 = a
        .arms()
        .map(|i| dists[i].support.len() as u128)
        .fold(1u128, |acc, k| acc.saturating_mul(k));
    if size > budget {
        return Err(OracleError::JointSupportBudgetExceeded { size, budget });
    }
    Ok(enumerate_expectation(dists, a, reward))
}

fn enumerate_expectation(dists: &[ShiftedDist], a: Action, reward: &dyn RewardFn) -> f64 {
    let arms: Vec<&ShiftedDist> = a.arms().map(|i| &dists[i]).collect();
    if arms.is_empty() {
        return reward.eval(&[]);
    }
    let mut idx = vec![0usize; arms.len()];
    let mut vals: Vec<f64> = arms.iter().map(|d| d.support[0]).collect();
    let mut total = 0.0;
    loop {
        let p: f64 = arms.iter().zip(&idx).map(|(d, &k)| d.mass[k]).product();
        total += p * reward.eval(&vals);
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < arms[pos].support.len() {
                vals[pos] = arms[pos].support[idx[pos]];
                break;
            }
            idx[pos] = 0;
            vals[pos] = arms[pos].support[0];
            pos += 1;
        }
    }
}

/// Snaps `y` to the right end `j/s` of its interval: `[0, 1/s]`, then
/// `((j−1)/s, j/s]`.
pub fn discretize_observation(y: f64, s: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::OutOfUnitInterval(y));
    }
    if s == 0 {
        return Err(Error::Config("discretization needs s >= 1".into()));
    }
    let sf = s as f64;
    let j = if y <= 1.0 / sf {
        1.0
    } else {
        (y * sf).ceil().min(sf)
    };
    Ok(j / sf)
}

/// `s = ⌈C·sqrt(m·T)⌉`.
pub fn discretization_levels(c: f64, m: usize, horizon: u64) -> u64 {
    ((c * (m as f64 * horizon as f64).sqrt()).ceil() as u64).max(1)
}

/// Per-arm empirical CDFs turned into shifted-distribution indices.
#[derive(Clone)]
pub struct GeneralModel {
    cdfs: Vec<EmpiricalCdf>,
    counts: Vec<u64>,
    c: f64,
    m: usize,
    reward: Arc<dyn RewardFn>,
    budget: u128,
    levels: Option<u64>,
}

impl GeneralModel {
    pub fn new(d: usize, m: usize, c: f64, reward: Arc<dyn RewardFn>) -> Self {
        GeneralModel {
            cdfs: vec![EmpiricalCdf::new(); d],
            counts: vec![0; d],
            c,
            m,
            reward,
            budget: DEFAULT_JOINT_BUDGET,
            levels: None,
        }
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    /// Snap observations to `s` levels before recording them.
    pub fn with_discretization(mut self, levels: Option<u64>) -> Self {
        self.levels = levels;
        self
    }

    pub fn from_config(
        config: &AlgoConfig,
        set: &ActionSet,
        horizon: u64,
        reward: Arc<dyn RewardFn>,
    ) -> Self {
        let levels = config
            .discretize
            .then(|| discretization_levels(config.discretize_c, set.m(), horizon));
        GeneralModel::new(set.d(), set.m(), config.c, reward)
            .with_budget(config.joint_budget)
            .with_discretization(levels)
    }

    pub fn cdfs(&self) -> &[EmpiricalCdf] {
        &self.cdfs
    }

    pub fn levels(&self) -> Option<u64> {
        self.levels
    }

    /// `ε_i = sqrt(C·ln_term / n_i)` (∞ for unseen arms).
    pub fn shifts(&self, ln_term: f64) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&n| {
                if n == 0 {
                    f64::INFINITY
                } else {
                    (self.c * ln_term / n as f64).sqrt()
                }
            })
            .collect()
    }

    pub fn distributions(&self, shift: Shift, ln_term: f64) -> Vec<ShiftedDist> {
        self.cdfs
            .iter()
            .zip(self.shifts(ln_term))
            .map(|(cdf, eps)| shifted_distribution(cdf, shift, eps))
            .collect()
    }

    fn objective(&self, shift: Shift, ln_term: f64) -> Result<Objective> {
        let dists = self.distributions(shift, ln_term);
        // largest joint support any action of at most m arms can reach
        let mut sizes: Vec<u128> = dists.iter().map(|d| d.support.len() as u128).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let worst = sizes
            .iter()
            .take(self.m)
            .fold(1u128, |acc, &k| acc.saturating_mul(k));
        if worst > self.budget {
            return Err(OracleError::JointSupportBudgetExceeded {
                size: worst,
                budget: self.budget,
            }
            .into());
        }
        let dists = Arc::new(dists);
        let reward = Arc::clone(&self.reward);
        Ok(Objective::general(move |a| {
            enumerate_expectation(&dists, a, reward.as_ref())
        }))
    }
}

impl IndexModel for GeneralModel {
    fn observe(&mut self, obs: &Observation) -> Result<()> {
        for (i, y) in obs.iter() {
            if i >= self.cdfs.len() {
                return Err(crate::error::CoreError::DimensionMismatch {
                    expected: self.cdfs.len(),
                    got: i,
                }
                .into());
            }
            let y = match self.levels {
                Some(s) => discretize_observation(y, s)?,
                None => y,
            };
            self.cdfs[i].record(y)?;
            self.counts[i] += 1;
        }
        Ok(())
    }
    fn counts(&self) -> &[u64] {
        &self.counts
    }
    fn ucb(&self, ln_term: f64) -> Result<Objective> {
        self.objective(Shift::Lower, ln_term)
    }
    fn lcb(&self, ln_term: f64) -> Result<Objective> {
        self.objective(Shift::Upper, ln_term)
    }
}
