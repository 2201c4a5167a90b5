//! Domain types shared by every algorithm: actions, action sets,
//! semi-bandit observations and the oracle complexity ledger.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Largest ambient dimension supported by the bitmask representation.
pub const MAX_ARMS: usize = 64;

/// A combinatorial action: the set of activated base arms, stored as a
/// bitmask with arm `i` at bit `i`.
///
/// The ambient dimension lives on the owning [`ActionSet`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Action(u64);

impl Action {
    pub const EMPTY: Action = Action(0);

    pub fn from_bits(bits: u64) -> Self {
        Action(bits)
    }

    /// Builds an action from arm indices. Panics if an index is `>= 64`.
    pub fn from_arms<I: IntoIterator<Item = usize>>(arms: I) -> Self {
        let mut bits = 0u64;
        for i in arms {
            assert!(i < MAX_ARMS, "arm index {i} out of range");
            bits |= 1 << i;
        }
        Action(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_ARMS && self.0 & (1 << i) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Activated arms in ascending order.
    pub fn arms(self) -> Arms {
        Arms(self.0)
    }

    pub fn with(self, i: usize) -> Self {
        Action(self.0 | (1 << i))
    }

    pub fn union(self, other: Action) -> Self {
        Action(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: Action) -> bool {
        self.0 & !other.0 == 0
    }

    /// Highest arm index plus one (0 for the empty action).
    pub fn span(self) -> usize {
        MAX_ARMS - self.0.leading_zeros() as usize
    }

    /// Canonical tie-break order: fewer activated arms first, then the
    /// lexicographically smaller sorted list of arm indices.
    ///
    /// `{0} < {1} < {0,1} < {0,2} < {1,2}`.
    pub fn canonical_cmp(self, other: Action) -> Ordering {
        match self.len().cmp(&other.len()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let diff = self.0 ^ other.0;
        if diff == 0 {
            return Ordering::Equal;
        }
        let low = diff.trailing_zeros();
        if self.0 & (1 << low) != 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }

    /// 1-based arm list for user-facing output, e.g. `{1,3}`.
    pub fn display_one_based(self) -> String {
        let parts: Vec<String> = self.arms().map(|i| (i + 1).to_string()).collect();
        format!("{{{}}}", parts.join(","))
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.arms()).finish()
    }
}

/// Iterator over the set bits of an [`Action`].
#[derive(Clone)]
pub struct Arms(u64);

impl Iterator for Arms {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Arms {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum ActionSetKind {
    /// An explicit list; insertion order is the canonical enumeration order.
    Explicit(Vec<Action>),
    CardinalityAtMost(usize),
    CardinalityExact(usize),
}

/// The feasible action family `𝒜` over `d` base arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    d: usize,
    m: usize,
    kind: ActionSetKind,
}

impl ActionSet {
    pub fn at_most(d: usize, m: usize) -> Result<Self, CoreError> {
        Self::check_cardinality(d, m)?;
        Ok(ActionSet {
            d,
            m,
            kind: ActionSetKind::CardinalityAtMost(m),
        })
    }

    pub fn exact(d: usize, m: usize) -> Result<Self, CoreError> {
        Self::check_cardinality(d, m)?;
        Ok(ActionSet {
            d,
            m,
            kind: ActionSetKind::CardinalityExact(m),
        })
    }

    pub fn explicit(d: usize, actions: Vec<Action>) -> Result<Self, CoreError> {
        if d == 0 || d > MAX_ARMS {
            return Err(CoreError::InvalidDimension(d));
        }
        if actions.is_empty() {
            return Err(CoreError::EmptyActionSet);
        }
        let mut seen = std::collections::HashSet::with_capacity(actions.len());
        for &a in &actions {
            if a.is_empty() || a.span() > d {
                return Err(CoreError::InvalidAction(format!("{a:?} for d={d}")));
            }
            if !seen.insert(a) {
                return Err(CoreError::DuplicateAction(format!("{a:?}")));
            }
        }
        let m = actions.iter().map(|a| a.len()).max().unwrap_or(0);
        Ok(ActionSet {
            d,
            m,
            kind: ActionSetKind::Explicit(actions),
        })
    }

    fn check_cardinality(d: usize, m: usize) -> Result<(), CoreError> {
        if d == 0 || d > MAX_ARMS {
            return Err(CoreError::InvalidDimension(d));
        }
        if m == 0 || m > d {
            return Err(CoreError::InvalidCardinality { d, m });
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> &ActionSetKind {
        &self.kind
    }

    pub fn contains(&self, a: Action) -> bool {
        if a.is_empty() || a.span() > self.d {
            return false;
        }
        match &self.kind {
            ActionSetKind::Explicit(list) => list.contains(&a),
            ActionSetKind::CardinalityAtMost(m) => a.len() <= *m,
            ActionSetKind::CardinalityExact(m) => a.len() == *m,
        }
    }

    /// Mask with the low `d` bits set.
    pub fn full_mask(&self) -> u64 {
        if self.d == MAX_ARMS {
            u64::MAX
        } else {
            (1u64 << self.d) - 1
        }
    }

    /// Every action, in canonical enumeration order. Intended for small
    /// sets (tests, bookkeeping); the oracle enumerates lazily.
    pub fn enumerate(&self) -> Vec<Action> {
        let mut out = Vec::new();
        crate::oracle::for_each_candidate(
            self,
            &crate::oracle::Constraints::default(),
            &mut |a| out.push(a),
        );
        out
    }
}

/// Semi-bandit feedback for one round: the realized value of every
/// activated arm, aligned with `action.arms()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub t: u64,
    pub action: Action,
    values: Vec<f64>,
}

impl Observation {
    /// Builds the observation by reading the activated coordinates of a full
    /// reward vector `y`.
    pub fn from_full(t: u64, action: Action, y: &[f64]) -> Self {
        let values = action.arms().map(|i| y[i]).collect();
        Observation { t, action, values }
    }

    /// `values[k]` is the feedback of the `k`-th activated arm (ascending).
    pub fn new(t: u64, action: Action, values: Vec<f64>) -> Result<Self, CoreError> {
        if values.len() != action.len() {
            return Err(CoreError::FeedbackMismatch {
                expected: action.len(),
                got: values.len(),
            });
        }
        Ok(Observation { t, action, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(arm, y_{t,arm})` pairs in ascending arm order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.action.arms().zip(self.values.iter().copied())
    }

    pub fn value_of(&self, arm: usize) -> Option<f64> {
        self.iter().find(|&(i, _)| i == arm).map(|(_, y)| y)
    }
}

/// Oracle adaptivity and query counters.
///
/// Only the batch executor mutates these; everything else reads them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityLedger {
    adaptivity_rounds: u64,
    total_queries: u64,
}

impl ComplexityLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn adaptivity_rounds(&self) -> u64 {
        self.adaptivity_rounds
    }

    pub fn total_queries(&self) -> u64 {
        self.total_queries
    }

    pub(crate) fn charge_round(&mut self, queries: usize) {
        self.adaptivity_rounds += 1;
        self.total_queries += queries as u64;
    }
}
