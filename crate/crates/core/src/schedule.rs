//! Doubly-logarithmic epoch grid for the scheduled algorithms.
//!
//! With `η = T^{1/(2 − 2^{1−M})}` the un-rounded recursion
//! `t_1 = η, t_τ = η·√t_{τ−1}` has the closed form `t_τ = η^{2 − 2^{1−τ}}`
//! and closes exactly at `t_M = T`. Integer boundaries round each step up,
//! start at round 1 and end at `T + 1`.

use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochGrid {
    horizon: u64,
    requested_epochs: usize,
    eta: f64,
    boundaries: Vec<u64>,
}

impl EpochGrid {
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// `M` as requested; [`EpochGrid::epochs`] may be smaller after collapsing.
    pub fn requested_epochs(&self) -> usize {
        self.requested_epochs
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `b_0 = 1 < b_1 < … < b_M = T + 1`.
    pub fn boundaries(&self) -> &[u64] {
        &self.boundaries
    }

    pub fn epochs(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Half-open round range `[start, end)` of epoch `tau` (1-based).
    pub fn epoch(&self, tau: usize) -> (u64, u64) {
        (self.boundaries[tau - 1], self.boundaries[tau])
    }

    pub fn epoch_len(&self, tau: usize) -> u64 {
        let (s, e) = self.epoch(tau);
        e - s
    }

    /// Epoch containing round `t`, 1-based.
    pub fn epoch_of(&self, t: u64) -> Option<usize> {
        if t < 1 || t > self.horizon {
            return None;
        }
        Some(self.boundaries.partition_point(|&b| b <= t))
    }

    /// `η^{2 − 2^{1−τ}}`, the un-rounded boundary `t_τ`.
    pub fn closed_form(&self, tau: usize) -> f64 {
        closed_form(self.eta, tau)
    }
}

pub fn eta(horizon: u64, epochs: usize) -> f64 {
    let exponent = 1.0 / (2.0 - 2f64.powi(1 - epochs as i32));
    (horizon as f64).powf(exponent)
}

pub fn closed_form(eta: f64, tau: usize) -> f64 {
    eta.powf(2.0 - 2f64.powi(1 - tau as i32))
}

/// Builds the grid for horizon `horizon` and `epochs` requested epochs.
pub fn build_grid(horizon: u64, epochs: usize) -> Result<EpochGrid, ScheduleError> {
    if horizon < 4 {
        return Err(ScheduleError::HorizonTooShort(horizon));
    }
    let max = (horizon as f64).log2().floor() as usize;
    if epochs < 2 || epochs > max {
        return Err(ScheduleError::InvalidEpochCount {
            t: horizon,
            m: epochs,
            max,
        });
    }
    let eta = eta(horizon, epochs);
    let end = horizon + 1;
    let mut raw = Vec::with_capacity(epochs + 1);
    raw.push(1u64);
    let mut prev = eta.ceil() as u64;
    raw.push(prev.min(end));
    for _ in 2..epochs {
        let next = (eta * (prev as f64).sqrt()).ceil() as u64;
        prev = next.min(end);
        raw.push(prev);
    }
    raw.truncate(epochs);
    raw.push(end);
    let mut boundaries: Vec<u64> = Vec::with_capacity(raw.len());
    for b in raw {
        if boundaries.last().is_none_or(|&last| b > last) {
            boundaries.push(b);
        }
    }
    Ok(EpochGrid {
        horizon,
        requested_epochs: epochs,
        eta,
        boundaries,
    })
}

/// `max(2, ⌈log2(log2 T)⌉ + 1)`.
pub fn default_epochs(horizon: u64) -> usize {
    let ll = (horizon.max(4) as f64).log2().log2();
    2usize.max(ll.ceil() as usize + 1)
}
