//! Covariance-adaptive policies built on an ellipsoidal confidence bonus.

use std::sync::Arc;

use serde_json::json;

use super::{has_feasible, ln, smallest_containing, AlgoConfig, Policy};
use crate::error::{Error, OracleError, Result};
use crate::oracle::{
    BatchExecutor, Constraints, Objective, Oracle, OracleBatch, OracleQuery, PairMask, Solution,
};
use crate::schedule::{build_grid, default_epochs, EpochGrid};
use crate::stats::Stats;
use crate::types::{Action, ActionSet, ComplexityLedger, Observation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovParams {
    pub c_h: f64,
    pub c_f: f64,
    /// Upper limit on warm-up rounds; `None` means `⌊T/10⌋`.
    pub warmup_cap: Option<u64>,
}

impl Default for CovParams {
    fn default() -> Self {
        CovParams {
            c_h: 1.0,
            c_f: 1.0,
            warmup_cap: None,
        }
    }
}

impl CovParams {
    pub fn from_config(c: &AlgoConfig) -> Self {
        CovParams {
            c_h: c.c_h,
            c_f: c.c_f,
            warmup_cap: c.warmup_cap,
        }
    }
}

/// `h = c_h·sqrt(ln t + ln d)`.
pub fn shrinkage_width(c_h: f64, t: u64, d: usize) -> f64 {
    c_h * (ln(t) + (d.max(1) as f64).ln()).max(0.0).sqrt()
}

/// `f = c_f·(ln t + d·ln ln max(t, 3))`.
pub fn confidence_width(c_f: f64, t: u64, d: usize) -> f64 {
    c_f * (ln(t) + d as f64 * (t.max(3) as f64).ln().ln())
}

/// Dense snapshot of the covariance estimates at one point in time.
#[derive(Clone, Debug)]
pub struct CovSnapshot {
    d: usize,
    means: Vec<f64>,
    counts: Vec<u64>,
    pair_counts: Vec<u64>,
    sigma_hat: Vec<f64>,
    sigma_bar: Vec<f64>,
    width: f64,
}

impl CovSnapshot {
    /// Estimates from `stats` with shrinkage `h` and confidence width `f`.
    pub fn new(stats: &Stats, h: f64, f: f64) -> Self {
        let d = stats.arms.d();
        let means = stats.arms.means_or_zero();
        let counts = stats.arms.counts().to_vec();
        let mut pair_counts = vec![0; d * d];
        let mut sigma_hat = vec![f64::NAN; d * d];
        let mut sigma_bar = vec![f64::NAN; d * d];
        for i in 0..d {
            for j in i..d {
                let e = stats.pairs.get(i, j);
                if e.count == 0 {
                    continue;
                }
                let n = e.count as f64;
                let hat = e.product_sum / n - means[i] * means[j];
                let bar = hat + 0.25 * (5.0 * h / n.sqrt() + h * h / n + 1.0 / (n * n));
                for (a, b) in [(i, j), (j, i)] {
                    pair_counts[a * d + b] = e.count;
                    sigma_hat[a * d + b] = hat;
                    sigma_bar[a * d + b] = bar;
                }
            }
        }
        CovSnapshot {
            d,
            means,
            counts,
            pair_counts,
            sigma_hat,
            sigma_bar,
            width: f,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.means[i]
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn pair_count(&self, i: usize, j: usize) -> u64 {
        self.pair_counts[i * self.d + j]
    }

    /// `Σ̂_ij`, `None` while the pair has never been co-observed.
    pub fn sigma_hat(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.sigma_hat[i * self.d + j];
        (!v.is_nan()).then_some(v)
    }

    /// `Σ̄_ij`, `None` while the pair has never been co-observed.
    pub fn sigma_bar(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.sigma_bar[i * self.d + j];
        (!v.is_nan()).then_some(v)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    fn linear_part(&self, a: Action) -> f64 {
        a.arms().map(|i| self.means[i]).sum()
    }
}

/// `aᵀ D_n⁻¹ Ḡ D_n⁻¹ a` written through pair counts, clamped at 0.
pub fn ellipsoid_quadform(a: Action, snap: &CovSnapshot) -> Result<f64> {
    let d = snap.d;
    let mut q = 0.0;
    for i in a.arms() {
        let ni = snap.counts[i];
        if ni == 0 {
            return Err(Error::UnseenArm(i));
        }
        let ni = ni as f64;
        for j in a.arms() {
            let nij = snap.pair_counts[i * d + j];
            if nij > 0 {
                q += nij as f64 * snap.sigma_bar[i * d + j] / (ni * snap.counts[j] as f64);
            }
        }
        q += snap.sigma_bar[i * d + i] / ni + 1.0 / (ni * ni);
    }
    Ok(q.max(0.0))
}

/// `⟨a, μ̂⟩ + f·sqrt(Q(a))`.
pub fn cov_ucb(a: Action, snap: &CovSnapshot) -> Result<f64> {
    Ok(snap.linear_part(a) + snap.width * ellipsoid_quadform(a, snap)?.sqrt())
}

/// `⟨a, μ̂⟩ − f·sqrt(Q(a))`.
pub fn cov_lcb(a: Action, snap: &CovSnapshot) -> Result<f64> {
    Ok(snap.linear_part(a) - snap.width * ellipsoid_quadform(a, snap)?.sqrt())
}

/// Oracle objectives; actions touching an unseen arm score `±∞`.
fn ucb_objective(snap: Arc<CovSnapshot>) -> Objective {
    Objective::general(move |a| cov_ucb(a, &snap).unwrap_or(f64::INFINITY))
}

fn lcb_objective(snap: Arc<CovSnapshot>) -> Objective {
    Objective::general(move |a| cov_lcb(a, &snap).unwrap_or(f64::NEG_INFINITY))
}

/// Pair warm-up schedule: for each `i ≤ j`, the canonically smallest action
/// containing both. Returns the plays and the number of pairs skipped
/// because no action contains them.
pub fn warmup_plays(set: &ActionSet) -> (Vec<Action>, usize) {
    let d = set.d();
    let mut plays = Vec::with_capacity(d * (d + 1) / 2);
    let mut skipped = 0;
    for i in 0..d {
        for j in i..d {
            match smallest_containing(set, Action::from_arms([i, j])) {
                Some(a) => plays.push(a),
                None => skipped += 1,
            }
        }
    }
    (plays, skipped)
}

/// `min(⌈d(d+1)(ln T)³/2⌉, cap)` with `cap` defaulting to `⌊T/10⌋`.
pub fn warmup_length(d: usize, horizon: u64, cap: Option<u64>) -> u64 {
    let full = (d as f64 * (d as f64 + 1.0) * ln(horizon).powi(3) / 2.0).ceil() as u64;
    full.min(cap.unwrap_or(horizon / 10)).min(horizon)
}

/// Upper-triangular pair index, diagonal included.
fn tri(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Adaptive rare queries with per-pair doubling epochs after a warm-up.
pub struct AroqC {
    set: ActionSet,
    horizon: u64,
    params: CovParams,
    stats: Stats,
    oracle: Arc<dyn Oracle>,
    executor: BatchExecutor,
    ledger: ComplexityLedger,
    warmup: Vec<Action>,
    warmup_skipped: usize,
    warmup_len: u64,
    epoch: Vec<u64>,
    current: Vec<u64>,
    previous: Vec<u64>,
    held: Option<Action>,
    every_round: bool,
}

impl AroqC {
    pub fn new(
        set: ActionSet,
        horizon: u64,
        params: CovParams,
        oracle: Arc<dyn Oracle>,
        executor: BatchExecutor,
    ) -> Self {
        let d = set.d();
        let (warmup, warmup_skipped) = warmup_plays(&set);
        let warmup_len = if warmup.is_empty() {
            0
        } else {
            warmup_length(d, horizon, params.warmup_cap)
        };
        let pairs = d * (d + 1) / 2;
        AroqC {
            set,
            horizon,
            params,
            stats: Stats::new(d),
            oracle,
            executor,
            ledger: ComplexityLedger::new(),
            warmup,
            warmup_skipped,
            warmup_len,
            epoch: vec![0; pairs],
            current: vec![0; pairs],
            previous: vec![0; pairs],
            held: None,
            every_round: false,
        }
    }

    pub fn every_round(mut self, on: bool) -> Self {
        self.every_round = on;
        self
    }

    pub fn warmup_len(&self) -> u64 {
        self.warmup_len
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn snapshot(&self, t: u64) -> CovSnapshot {
        let d = self.set.d();
        CovSnapshot::new(
            &self.stats,
            shrinkage_width(self.params.c_h, t, d),
            confidence_width(self.params.c_f, t, d),
        )
    }

    fn start_adaptive_phase(&mut self) {
        let d = self.set.d();
        for i in 0..d {
            for j in i..d {
                let k = tri(d, i, j);
                self.previous[k] = self.stats.pairs.count(i, j);
                self.current[k] = 0;
                self.epoch[k] = 1;
            }
        }
    }

    fn advance(&mut self) -> bool {
        let mut any = false;
        for k in 0..self.current.len() {
            if self.current[k] > 2 * self.previous[k] {
                self.epoch[k] += 1;
                self.previous[k] = self.current[k];
                self.current[k] = 0;
                any = true;
            }
        }
        any
    }
}

impl Policy for AroqC {
    fn select(&mut self, t: u64) -> Result<Action> {
        if t <= self.warmup_len {
            return Ok(self.warmup[(t % self.warmup.len() as u64) as usize]);
        }
        let first = self.held.is_none();
        if first {
            self.start_adaptive_phase();
        }
        let triggered = !first && self.advance();
        if first || self.every_round || triggered {
            let objective = ucb_objective(Arc::new(self.snapshot(t)));
            let batch = OracleBatch::new(&self.set, vec![OracleQuery::new(objective)]).expect("one query");
            let sol = self.executor.execute(self.oracle.as_ref(), &batch, &mut self.ledger)?;
            self.held = Some(sol[0].action);
        }
        Ok(self.held.expect("set above"))
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.stats.update(obs)?;
        if obs.t > self.warmup_len {
            let d = self.set.d();
            let arms: Vec<usize> = obs.action.arms().collect();
            for (x, &i) in arms.iter().enumerate() {
                for &j in &arms[x..] {
                    self.current[tri(d, i, j)] += 1;
                }
            }
        }
        Ok(())
    }

    fn ledger(&self) -> &ComplexityLedger {
        &self.ledger
    }

    fn diagnostics(&self) -> serde_json::Value {
        let full = warmup_length(self.set.d(), self.horizon, Some(u64::MAX));
        json!({
            "warmup_rounds": self.warmup_len,
            "warmup_cap_binding": self.warmup_len < full,
            "warmup_pairs_skipped": self.warmup_skipped,
            "pair_epoch_total": self.epoch.iter().sum::<u64>(),
        })
    }
}

/// Scheduled two-batch elimination over arms, then over pairs.
pub struct SroqC {
    set: ActionSet,
    grid: EpochGrid,
    horizon: u64,
    params: CovParams,
    stats: Stats,
    oracle: Arc<dyn Oracle>,
    executor: BatchExecutor,
    ledger: ComplexityLedger,
    warmup: Vec<Action>,
    warmup_len: u64,
    epoch: usize,
    executed: usize,
    survivors: u64,
    pairs: Arc<PairMask>,
    singles: Vec<(usize, Action)>,
    pair_reps: Vec<((usize, usize), Action)>,
    phase2_start: u64,
    history: Vec<(u64, usize)>,
}

impl SroqC {
    pub fn new(
        set: ActionSet,
        horizon: u64,
        epochs: Option<usize>,
        params: CovParams,
        oracle: Arc<dyn Oracle>,
        executor: BatchExecutor,
    ) -> Result<Self> {
        let grid = build_grid(horizon, epochs.unwrap_or_else(|| default_epochs(horizon)))?;
        let d = set.d();
        let (warmup, _) = warmup_plays(&set);
        let warmup_len = if warmup.is_empty() {
            0
        } else {
            ((d * (d + 1)) as u64).div_ceil(2).min(horizon)
        };
        let survivors = set.full_mask();
        Ok(SroqC {
            grid,
            horizon,
            params,
            stats: Stats::new(d),
            oracle,
            executor,
            ledger: ComplexityLedger::new(),
            warmup,
            warmup_len,
            epoch: 0,
            executed: 0,
            survivors,
            pairs: Arc::new(PairMask::full(d)),
            singles: Vec::new(),
            pair_reps: Vec::new(),
            phase2_start: 0,
            history: Vec::new(),
            set,
        })
    }

    pub fn grid(&self) -> &EpochGrid {
        &self.grid
    }

    pub fn executed_epochs(&self) -> usize {
        self.executed
    }

    pub fn surviving_arms(&self) -> u64 {
        self.survivors
    }

    pub fn surviving_pairs(&self) -> &PairMask {
        &self.pairs
    }

    /// Phase-2 length `min(⌊L/2⌋, ⌈(d²m²L ln T)^{2/3}⌉)` for an epoch of length `L`.
    pub fn phase2_len(&self, len: u64) -> u64 {
        let d = self.set.d() as f64;
        let m = self.set.m() as f64;
        let rate_cap = (d * d * m * m * len as f64 * ln(self.horizon)).powf(2.0 / 3.0).ceil();
        (len / 2).min(rate_cap as u64)
    }

    fn constraints(&self, must: Action, arms: u64, pairs: &Arc<PairMask>) -> Constraints {
        Constraints {
            must_include: must,
            surviving_arms: Some(arms),
            surviving_pairs: Some(Arc::clone(pairs)),
        }
    }

    fn run_epoch(&mut self, start: u64, end: u64) -> Result<()> {
        let d = self.set.d();
        let snap = Arc::new(CovSnapshot::new(
            &self.stats,
            shrinkage_width(self.params.c_h, self.horizon, d),
            confidence_width(self.params.c_f, self.horizon, d),
        ));
        let ucb = ucb_objective(Arc::clone(&snap));
        let lcb = lcb_objective(Arc::clone(&snap));
        let prev_arms = self.survivors;
        let prev_pairs = Arc::clone(&self.pairs);

        let singles: Vec<usize> = Action::from_bits(prev_arms)
            .arms()
            .filter(|&i| has_feasible(&self.set, &self.constraints(Action::from_arms([i]), prev_arms, &prev_pairs)))
            .collect();
        let pairs: Vec<(usize, usize)> = prev_pairs
            .pairs()
            .into_iter()
            .filter(|&(i, j)| prev_arms & (1 << i) != 0 && prev_arms & (1 << j) != 0)
            .filter(|&(i, j)| {
                has_feasible(&self.set, &self.constraints(Action::from_arms([i, j]), prev_arms, &prev_pairs))
            })
            .collect();

        let mut queries = Vec::with_capacity(singles.len() + pairs.len() + 1);
        for &i in &singles {
            let c = self.constraints(Action::from_arms([i]), prev_arms, &prev_pairs);
            queries.push(OracleQuery::with_constraints(ucb.clone(), c));
        }
        for &(i, j) in &pairs {
            let c = self.constraints(Action::from_arms([i, j]), prev_arms, &prev_pairs);
            queries.push(OracleQuery::with_constraints(ucb.clone(), c));
        }
        let c = self.constraints(Action::default(), prev_arms, &prev_pairs);
        queries.push(OracleQuery::with_constraints(lcb.clone(), c));
        let batch = OracleBatch::new(&self.set, queries).expect("nonempty");
        let sols = self.executor.execute(self.oracle.as_ref(), &batch, &mut self.ledger)?;
        let (single_sols, rest) = sols.split_at(singles.len());
        let (pair_sols, lcb_sol) = rest.split_at(pairs.len());
        let best_lcb: Solution = lcb_sol[0];

        let mut arms = best_lcb.action.bits();
        for (&i, s) in singles.iter().zip(single_sols) {
            if s.value >= best_lcb.value {
                arms |= 1 << i;
            }
        }

        let c = self.constraints(Action::default(), arms, &prev_pairs);
        let batch = OracleBatch::new(&self.set, vec![OracleQuery::with_constraints(lcb, c)]).expect("one query");
        let best_lcb2 = self.executor.execute(self.oracle.as_ref(), &batch, &mut self.ledger)?[0];

        let mut mask = PairMask::empty(d);
        let lcb2_arms: Vec<usize> = best_lcb2.action.arms().collect();
        for (x, &i) in lcb2_arms.iter().enumerate() {
            for &j in &lcb2_arms[x + 1..] {
                mask.allow(i, j);
            }
        }
        let mut pair_reps = Vec::new();
        for (&(i, j), s) in pairs.iter().zip(pair_sols) {
            let inside = arms & (1 << i) != 0 && arms & (1 << j) != 0;
            if inside && (s.value >= best_lcb2.value || mask.allows(i, j)) {
                mask.allow(i, j);
                pair_reps.push(((i, j), s.action));
            }
        }

        self.singles = singles
            .iter()
            .zip(single_sols)
            .filter(|(&i, _)| arms & (1 << i) != 0)
            .map(|(&i, s)| (i, s.action))
            .collect();
        if self.singles.is_empty() {
            return Err(OracleError::EmptyFeasibleSet.into());
        }
        self.pair_reps = pair_reps;
        self.survivors = arms;
        self.pairs = Arc::new(mask);
        self.phase2_start = end - self.phase2_len(end - start);
        self.executed += 1;
        self.history.push((arms, self.pair_reps.len()));
        Ok(())
    }
}

impl Policy for SroqC {
    fn select(&mut self, t: u64) -> Result<Action> {
        if t <= self.warmup_len {
            return Ok(self.warmup[(t % self.warmup.len() as u64) as usize]);
        }
        let tau = self
            .grid
            .epoch_of(t)
            .ok_or_else(|| Error::Config(format!("round {t} beyond horizon")))?;
        if self.epoch < tau {
            self.epoch = tau;
            let (s, e) = self.grid.epoch(tau);
            self.run_epoch(s.max(self.warmup_len + 1), e)?;
        }
        if t >= self.phase2_start && !self.pair_reps.is_empty() {
            let k = (t % self.pair_reps.len() as u64) as usize;
            Ok(self.pair_reps[k].1)
        } else {
            let k = (t % self.singles.len() as u64) as usize;
            Ok(self.singles[k].1)
        }
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        Ok(self.stats.update(obs)?)
    }

    fn ledger(&self) -> &ComplexityLedger {
        &self.ledger
    }

    fn diagnostics(&self) -> serde_json::Value {
        let survivors: Vec<Vec<usize>> = self
            .history
            .iter()
            .map(|&(m, _)| Action::from_bits(m).arms().map(|i| i + 1).collect())
            .collect();
        let pair_counts: Vec<usize> = self.history.iter().map(|h| h.1).collect();
        json!({
            "boundaries": self.grid.boundaries(),
            "warmup_rounds": self.warmup_len,
            "executed_epochs": self.executed,
            "survivors": survivors,
            "surviving_pairs": pair_counts,
        })
    }
}
