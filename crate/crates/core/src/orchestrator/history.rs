use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::FuzzyScores;
use crate::scalar::Scalar;

/// Features contributed per agent to the model input.
pub const HISTORY_FEATURES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HistoryRecord<T: Scalar = f64> {
    pub quality: T,
    pub completeness: T,
    pub relevance: T,
    pub confidence: T,
}

impl<T: Scalar> From<&FuzzyScores<T>> for HistoryRecord<T> {
    fn from(s: &FuzzyScores<T>) -> Self {
        Self {
            quality: s.quality,
            completeness: s.completeness,
            relevance: s.relevance,
            confidence: s.confidence,
        }
    }
}

/// Ring buffer of an agent's most recent evaluated tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HistoryWindow<T: Scalar = f64> {
    pub agent_id: usize,
    capacity: usize,
    records: VecDeque<HistoryRecord<T>>,
}

impl<T: Scalar> HistoryWindow<T> {
    pub fn new(agent_id: usize, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("history window length must be positive".into()));
        }
        Ok(Self {
            agent_id,
            capacity,
            records: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &HistoryRecord<T>> {
        self.records.iter()
    }

    /// Appends, evicting the oldest record when full.
    pub fn push(&mut self, scores: &FuzzyScores<T>) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(scores.into());
    }

    /// `[mean quality, mean completeness, mean relevance, mean confidence, fill fraction]`,
    /// or the neutral `(0.5, 0.5, 0.5, 0.5, 0)` when empty.
    pub fn summary(&self) -> [T; HISTORY_FEATURES] {
        if self.records.is_empty() {
            let half = T::of(0.5);
            return [half, half, half, half, T::zero()];
        }
        let n = T::of(self.records.len() as f64);
        let mut sums = [T::zero(); 4];
        for r in &self.records {
            sums[0] = sums[0] + r.quality;
            sums[1] = sums[1] + r.completeness;
            sums[2] = sums[2] + r.relevance;
            sums[3] = sums[3] + r.confidence;
        }
        [
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            sums[3] / n,
            n / T::of(self.capacity as f64),
        ]
    }
}

pub fn empty_histories<T: Scalar>(n_agents: usize, window: usize) -> Result<Vec<HistoryWindow<T>>> {
    (0..n_agents).map(|i| HistoryWindow::new(i, window)).collect()
}
