//! Running sufficient statistics: per-arm counts and sums, per-pair
//! co-occurrence counts and product sums.

use std::collections::HashMap;

use crate::error::CoreError;
use crate::types::Observation;

#[derive(Clone, Debug, PartialEq)]
pub struct ArmStats {
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl ArmStats {
    pub fn new(d: usize) -> Self {
        ArmStats {
            counts: vec![0; d],
            sums: vec![0.0; d],
        }
    }

    pub fn d(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, obs: &Observation) -> Result<(), CoreError> {
        check_dim(self.d(), obs)?;
        for (i, y) in obs.iter() {
            self.counts[i] += 1;
            self.sums[i] += y;
        }
        Ok(())
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sum(&self, i: usize) -> f64 {
        self.sums[i]
    }

    /// Sample mean, `None` while the arm is unseen.
    pub fn mean(&self, i: usize) -> Option<f64> {
        match self.counts[i] {
            0 => None,
            n => Some(self.sums[i] / n as f64),
        }
    }

    /// Means with unseen arms reported as 0.
    pub fn means_or_zero(&self) -> Vec<f64> {
        (0..self.d()).map(|i| self.mean(i).unwrap_or(0.0)).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairEntry {
    pub count: u64,
    pub product_sum: f64,
}

/// Co-occurrence statistics for unordered arm pairs, diagonal included.
/// Only pairs that have been observed together are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct PairStats {
    d: usize,
    entries: HashMap<(u16, u16), PairEntry>,
}

impl PairStats {
    pub fn new(d: usize) -> Self {
        PairStats {
            d,
            entries: HashMap::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn key(i: usize, j: usize) -> (u16, u16) {
        if i <= j {
            (i as u16, j as u16)
        } else {
            (j as u16, i as u16)
        }
    }

    pub fn record(&mut self, obs: &Observation) -> Result<(), CoreError> {
        check_dim(self.d, obs)?;
        let vals: Vec<(usize, f64)> = obs.iter().collect();
        for (k, &(i, yi)) in vals.iter().enumerate() {
            for &(j, yj) in &vals[k..] {
                let e = self.entries.entry(Self::key(i, j)).or_default();
                e.count += 1;
                e.product_sum += yi * yj;
            }
        }
        Ok(())
    }

    /// Symmetric lookup; unseen pairs read as zero.
    pub fn get(&self, i: usize, j: usize) -> PairEntry {
        self.entries
            .get(&Self::key(i, j))
            .copied()
            .unwrap_or_default()
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.get(i, j).count
    }

    /// Number of distinct pairs stored.
    pub fn stored(&self) -> usize {
        self.entries.len()
    }
}

/// Arm and pair statistics updated together.
#[derive(Clone, Debug, PartialEq)]
pub struct Stats {
    pub arms: ArmStats,
    pub pairs: PairStats,
}

impl Stats {
    pub fn new(d: usize) -> Self {
        Stats {
            arms: ArmStats::new(d),
            pairs: PairStats::new(d),
        }
    }

    pub fn update(&mut self, obs: &Observation) -> Result<(), CoreError> {
        check_dim(self.arms.d(), obs)?;
        self.arms.record(obs)?;
        self.pairs.record(obs)
    }
}

fn check_dim(d: usize, obs: &Observation) -> Result<(), CoreError> {
    if obs.action.span() > d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: obs.action.span() - 1,
        });
    }
    Ok(())
}
