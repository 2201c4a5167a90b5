//! Combinatorial optimization oracles and the batch executor.
//!
//! Every oracle returns the maximizer of an objective over a (possibly
//! restricted) action family. Ties are broken by [`Action::canonical_cmp`],
//! so answers do not depend on evaluation order or worker count.
//!
//! The [`BatchExecutor`] is the only code path that charges a
//! [`ComplexityLedger`]: one adaptivity round per batch, one query per
//! member.

use std::fmt;
use std::sync::Arc;

use crate::error::OracleError;
use crate::types::{Action, ActionSet, ActionSetKind, ComplexityLedger};

/// Default cap on the number of candidate actions an exact query may scan.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Shared, pure action evaluator.
pub type Evaluator = Arc<dyn Fn(Action) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Objective {
    /// `f(a) = Σ_{i∈a} w_i`.
    Linear(Arc<[f64]>),
    General(Evaluator),
}

impl Objective {
    pub fn linear(w: Vec<f64>) -> Self {
        Objective::Linear(w.into())
    }

    pub fn general<F>(f: F) -> Self
    where
        F: Fn(Action) -> f64 + Send + Sync + 'static,
    {
        Objective::General(Arc::new(f))
    }

    pub fn value(&self, a: Action) -> f64 {
        match self {
            Objective::Linear(w) => a.arms().map(|i| w[i]).sum(),
            Objective::General(f) => f(a),
        }
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Linear(w) => f.debug_tuple("Linear").field(w).finish(),
            Objective::General(_) => f.write_str("General(..)"),
        }
    }
}

/// Allowed co-occurring pairs, stored as an adjacency bitmask per arm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairMask {
    adj: Vec<u64>,
}

impl PairMask {
    /// Every pair among the first `d` arms allowed.
    pub fn full(d: usize) -> Self {
        let all = if d == 64 { u64::MAX } else { (1u64 << d) - 1 };
        PairMask {
            adj: (0..d).map(|i| all & !(1 << i)).collect(),
        }
    }

    pub fn empty(d: usize) -> Self {
        PairMask { adj: vec![0; d] }
    }

    pub fn allow(&mut self, i: usize, j: usize) {
        if i != j {
            self.adj[i] |= 1 << j;
            self.adj[j] |= 1 << i;
        }
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        i == j || self.adj[i] & (1 << j) != 0
    }

    /// All `i < j` pairs currently allowed, lexicographic.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.adj.len() {
            for j in Action::from_bits(self.adj[i]).arms() {
                if j > i {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Whether every pair of distinct arms in `a` is allowed.
    pub fn admits(&self, a: Action) -> bool {
        a.arms()
            .all(|i| a.bits() & !(1u64 << i) & !self.adj[i] == 0)
    }

    fn compatible(&self, chosen: u64, i: usize) -> bool {
        chosen & !self.adj[i] == 0
    }
}

/// Restrictions of the base action set for a single query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Constraints {
    /// Arms every returned action must contain.
    pub must_include: Action,
    /// Actions may only use these arms (`None` = all arms).
    pub surviving_arms: Option<u64>,
    /// Only these co-occurring pairs are allowed (`None` = all pairs).
    pub surviving_pairs: Option<Arc<PairMask>>,
}

impl Constraints {
    pub fn is_unconstrained(&self) -> bool {
        self.must_include.is_empty()
            && self.surviving_arms.is_none()
            && self.surviving_pairs.is_none()
    }

    pub fn admits(&self, a: Action) -> bool {
        if !self.must_include.is_subset_of(a) {
            return false;
        }
        if let Some(s) = self.surviving_arms {
            if a.bits() & !s != 0 {
                return false;
            }
        }
        match &self.surviving_pairs {
            Some(p) => p.admits(a),
            None => true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleQuery {
    pub objective: Objective,
    pub constraints: Constraints,
}

impl OracleQuery {
    pub fn new(objective: Objective) -> Self {
        OracleQuery {
            objective,
            constraints: Constraints::default(),
        }
    }

    pub fn with_constraints(objective: Objective, constraints: Constraints) -> Self {
        OracleQuery {
            objective,
            constraints,
        }
    }
}

/// An argmax and its objective value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Solution {
    pub action: Action,
    pub value: f64,
}

/// Queries that may run concurrently: one adaptivity round.
pub struct OracleBatch<'a> {
    base: &'a ActionSet,
    queries: Vec<OracleQuery>,
}

impl<'a> OracleBatch<'a> {
    pub fn new(base: &'a ActionSet, queries: Vec<OracleQuery>) -> Option<Self> {
        if queries.is_empty() {
            None
        } else {
            Some(OracleBatch { base, queries })
        }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn queries(&self) -> &[OracleQuery] {
        &self.queries
    }
}

pub trait Oracle: Send + Sync {
    fn solve(&self, base: &ActionSet, query: &OracleQuery) -> Result<Solution, OracleError>;
}

/// Exhaustive maximizer. With `fast_linear`, unconstrained linear queries
/// over cardinality sets use the top-m selection instead of enumeration.
#[derive(Clone, Copy, Debug)]
pub struct ExactOracle {
    pub cap: u128,
    pub fast_linear: bool,
}

impl Default for ExactOracle {
    fn default() -> Self {
        ExactOracle {
            cap: DEFAULT_ENUMERATION_CAP,
            fast_linear: false,
        }
    }
}

impl Oracle for ExactOracle {
    fn solve(&self, base: &ActionSet, query: &OracleQuery) -> Result<Solution, OracleError> {
        if self.fast_linear && query.constraints.is_unconstrained() {
            if let Objective::Linear(w) = &query.objective {
                let exact_m = match base.kind() {
                    ActionSetKind::CardinalityExact(_) => Some(true),
                    ActionSetKind::CardinalityAtMost(_) => Some(false),
                    ActionSetKind::Explicit(_) => None,
                };
                if let Some(exact_m) = exact_m {
                    let action = solve_top_m_linear(w, base.d(), base.m(), exact_m)?;
                    return Ok(Solution {
                        action,
                        value: query.objective.value(action),
                    });
                }
            }
        }
        solve_exact_with_cap(base, query, self.cap)
    }
}

/// Exact maximizer with the default enumeration cap.
pub fn solve_exact(base: &ActionSet, query: &OracleQuery) -> Result<Solution, OracleError> {
    solve_exact_with_cap(base, query, DEFAULT_ENUMERATION_CAP)
}

pub fn solve_exact_with_cap(
    base: &ActionSet,
    query: &OracleQuery,
    cap: u128,
) -> Result<Solution, OracleError> {
    if let Objective::Linear(w) = &query.objective {
        if w.len() != base.d() {
            return Err(OracleError::WeightLength {
                expected: base.d(),
                got: w.len(),
            });
        }
    }
    let size = candidate_bound(base, &query.constraints);
    if size > cap {
        return Err(OracleError::EnumerationBudgetExceeded { size, cap });
    }
    let mut best: Option<Solution> = None;
    for_each_candidate(base, &query.constraints, &mut |a| {
        let v = query.objective.value(a);
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        if better(v, a, best.as_ref()) {
            best = Some(Solution {
                action: a,
                value: v,
            });
        }
    });
    best.ok_or(OracleError::EmptyFeasibleSet)
}

fn better(v: f64, a: Action, best: Option<&Solution>) -> bool {
    match best {
        None => true,
        Some(b) => v > b.value || (v == b.value && a.canonical_cmp(b.action).is_lt()),
    }
}

/// Top-m selection for linear objectives over cardinality sets.
///
/// Weights must be finite or `+∞`. Agrees with [`solve_exact`] including
/// tie-breaks.
pub fn solve_top_m_linear(
    w: &[f64],
    d: usize,
    m: usize,
    exact_m: bool,
) -> Result<Action, OracleError> {
    if w.len() != d {
        return Err(OracleError::WeightLength {
            expected: d,
            got: w.len(),
        });
    }
    if d == 0 || m == 0 || m > d {
        return Err(OracleError::EmptyFeasibleSet);
    }
    let first_inf = w.iter().position(|&x| x == f64::INFINITY);
    if let Some(j) = first_inf {
        // Every set holding an infinite arm ties at +inf; return the
        // canonically smallest one.
        if !exact_m {
            return Ok(Action::from_arms([j]));
        }
        if j < m {
            return Ok(Action::from_arms(0..m));
        }
        return Ok(Action::from_arms((0..m - 1).chain([j])));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        w[b].partial_cmp(&w[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    if exact_m {
        return Ok(Action::from_arms(order[..m].iter().copied()));
    }
    let positive: Vec<usize> = order
        .iter()
        .copied()
        .take_while(|&i| w[i] > 0.0)
        .take(m)
        .collect();
    if positive.is_empty() {
        Ok(Action::from_arms([order[0]]))
    } else {
        Ok(Action::from_arms(positive))
    }
}

/// Test double for an α-approximation oracle: scans a deterministic sample
/// of at most 64 feasible actions (always including the exact optimum) and
/// returns the canonically smallest one whose value is at least
/// `alpha × optimum`.
#[derive(Clone, Copy, Debug)]
pub struct AlphaOracle {
    inner: ExactOracle,
    alpha: f64,
}

impl AlphaOracle {
    pub const SAMPLE: usize = 64;

    pub fn new(inner: ExactOracle, alpha: f64) -> Result<Self, OracleError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(OracleError::InvalidAlpha(alpha));
        }
        Ok(AlphaOracle { inner, alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Oracle for AlphaOracle {
    fn solve(&self, base: &ActionSet, query: &OracleQuery) -> Result<Solution, OracleError> {
        let opt = self.inner.solve(base, query)?;
        if self.alpha == 1.0 {
            return Ok(opt);
        }
        let mut feasible = Vec::new();
        for_each_candidate(base, &query.constraints, &mut |a| feasible.push(a));
        let n = feasible.len();
        let sample: Vec<Action> = if n <= Self::SAMPLE {
            feasible
        } else {
            let mut s: Vec<Action> = (0..Self::SAMPLE)
                .map(|k| feasible[k * n / Self::SAMPLE])
                .collect();
            s.push(opt.action);
            s
        };
        let threshold = self.alpha * opt.value;
        let mut pick = opt;
        for a in sample {
            let v = query.objective.value(a);
            if v >= threshold && a.canonical_cmp(pick.action).is_lt() {
                pick = Solution {
                    action: a,
                    value: v,
                };
            }
        }
        Ok(pick)
    }
}

/// Runs oracle batches, charging the ledger once per batch.
#[derive(Clone, Copy, Debug, Default)]
pub struct BatchExecutor {
    parallel: bool,
}

impl BatchExecutor {
    pub fn sequential() -> Self {
        BatchExecutor { parallel: false }
    }

    /// Evaluates batch members on the current rayon pool. Without the
    /// `parallel` feature this is the same as [`BatchExecutor::sequential`].
    pub fn parallel() -> Self {
        BatchExecutor { parallel: true }
    }

    pub fn for_workers(workers: usize) -> Self {
        BatchExecutor {
            parallel: workers > 1,
        }
    }

    pub fn is_parallel(&self) -> bool {
        self.parallel && cfg!(feature = "parallel")
    }

    /// Solves every query in the batch. The ledger is charged before any
    /// query runs, so a failing batch still counts as a spent round.
    pub fn execute(
        &self,
        oracle: &dyn Oracle,
        batch: &OracleBatch<'_>,
        ledger: &mut ComplexityLedger,
    ) -> Result<Vec<Solution>, OracleError> {
        ledger.charge_round(batch.len());
        let results = self.solve_all(oracle, batch);
        results.into_iter().collect()
    }

    #[cfg(feature = "parallel")]
    fn solve_all(
        &self,
        oracle: &dyn Oracle,
        batch: &OracleBatch<'_>,
    ) -> Vec<Result<Solution, OracleError>> {
        use rayon::prelude::*;
        if self.parallel && batch.len() > 1 {
            batch
                .queries
                .par_iter()
                .map(|q| oracle.solve(batch.base, q))
                .collect()
        } else {
            batch
                .queries
                .iter()
                .map(|q| oracle.solve(batch.base, q))
                .collect()
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn solve_all(
        &self,
        oracle: &dyn Oracle,
        batch: &OracleBatch<'_>,
    ) -> Vec<Result<Solution, OracleError>> {
        batch
            .queries
            .iter()
            .map(|q| oracle.solve(batch.base, q))
            .collect()
    }
}

/// Upper bound on the number of candidates a query scans (pair constraints
/// are not counted).
pub fn candidate_bound(base: &ActionSet, c: &Constraints) -> u128 {
    match base.kind() {
        ActionSetKind::Explicit(list) => list.len() as u128,
        ActionSetKind::CardinalityAtMost(m) | ActionSetKind::CardinalityExact(m) => {
            let exact = matches!(base.kind(), ActionSetKind::CardinalityExact(_));
            let allowed = base.full_mask() & c.surviving_arms.unwrap_or(u64::MAX);
            let must = c.must_include.bits();
            if must & !allowed != 0 {
                return 0;
            }
            let k_must = must.count_ones() as usize;
            let free = (allowed & !must).count_ones() as usize;
            if k_must > *m {
                return 0;
            }
            let lo = if exact { *m } else { k_must.max(1) };
            (lo..=*m).map(|k| binomial(free, k - k_must)).sum()
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Visits every action of `base` admitted by `c`, in canonical order for
/// cardinality sets and insertion order for explicit sets.
pub fn for_each_candidate(base: &ActionSet, c: &Constraints, f: &mut dyn FnMut(Action)) {
    match base.kind() {
        ActionSetKind::Explicit(list) => {
            for &a in list {
                if c.admits(a) {
                    f(a);
                }
            }
        }
        ActionSetKind::CardinalityAtMost(m) | ActionSetKind::CardinalityExact(m) => {
            let exact = matches!(base.kind(), ActionSetKind::CardinalityExact(_));
            let allowed = base.full_mask() & c.surviving_arms.unwrap_or(u64::MAX);
            let must = c.must_include.bits();
            if must & !allowed != 0 || must.count_ones() as usize > *m {
                return;
            }
            if let Some(p) = &c.surviving_pairs {
                if !p.admits(c.must_include) {
                    return;
                }
            }
            let free: Vec<usize> = Action::from_bits(allowed & !must).arms().collect();
            let k_must = must.count_ones() as usize;
            let lo = if exact { *m } else { k_must.max(1) };
            let pairs = c.surviving_pairs.as_deref();
            for k in lo..=*m {
                combinations(&free, k - k_must, must, pairs, f);
            }
        }
    }
}

fn combinations(
    free: &[usize],
    k: usize,
    must: u64,
    pairs: Option<&PairMask>,
    f: &mut dyn FnMut(Action),
) {
    fn rec(
        free: &[usize],
        start: usize,
        left: usize,
        chosen: u64,
        pairs: Option<&PairMask>,
        f: &mut dyn FnMut(Action),
    ) {
        if left == 0 {
            f(Action::from_bits(chosen));
            return;
        }
        if free.len() - start < left {
            return;
        }
        for idx in start..=free.len() - left {
            let i = free[idx];
            if let Some(p) = pairs {
                if !p.compatible(chosen, i) {
                    continue;
                }
            }
            rec(free, idx + 1, left - 1, chosen | (1 << i), pairs, f);
        }
    }
    rec(free, 0, k, must, pairs, f);
}
