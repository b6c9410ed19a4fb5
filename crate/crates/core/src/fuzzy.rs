//! Fuzzy response evaluation.
//!
//! A raw agent score is mapped onto three bounded axes:
//!
//! * completeness `= clamp((score + 3) / 4, 0, 1)`
//! * relevance    `= clamp((score + 2) / 3, 0, 1)`
//! * confidence   `= clamp(reliability + noise / 5, 0.1, 1)`
//!
//! and combined with fixed weights into a quality scalar, which in turn is
//! bucketed into a qualitative label.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::envsim::{AgentSpec, RawOutcome};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityLabel {
    Poor,
    Fair,
    Good,
    Excellent,
}

impl fmt::Display for QualityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QualityLabel::Poor => "Poor",
            QualityLabel::Fair => "Fair",
            QualityLabel::Good => "Good",
            QualityLabel::Excellent => "Excellent",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FuzzyScores<T: Scalar = f64> {
    pub completeness: T,
    pub relevance: T,
    pub confidence: T,
    pub quality: T,
    pub label: QualityLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzyWeights {
    pub completeness: f64,
    pub relevance: f64,
    pub confidence: f64,
}

impl Default for FuzzyWeights {
    fn default() -> Self {
        Self {
            completeness: 0.4,
            relevance: 0.4,
            confidence: 0.2,
        }
    }
}

impl fmt::Display for FuzzyWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.completeness, self.relevance, self.confidence)
    }
}

impl FuzzyWeights {
    pub fn new(completeness: f64, relevance: f64, confidence: f64) -> Result<Self> {
        let w = Self {
            completeness,
            relevance,
            confidence,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.completeness, self.relevance, self.confidence];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!("weights {self} must be finite and non-negative")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights {self} sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Lower quality bounds of the Excellent, Good and Fair labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelThresholds {
    pub excellent: f64,
    pub good: f64,
    pub fair: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        Self {
            excellent: 0.85,
            good: 0.65,
            fair: 0.45,
        }
    }
}

impl LabelThresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.fair && self.fair <= self.good && self.good <= self.excellent && self.excellent <= 1.0;
        if !ok {
            return Err(Error::Config(format!(
                "label thresholds must satisfy 0 <= fair <= good <= excellent <= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn label(&self, quality: f64) -> QualityLabel {
        if quality >= self.excellent {
            QualityLabel::Excellent
        } else if quality >= self.good {
            QualityLabel::Good
        } else if quality >= self.fair {
            QualityLabel::Fair
        } else {
            QualityLabel::Poor
        }
    }
}

fn finite<T: Scalar>(v: T, what: &str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

fn clamp<T: Scalar>(v: T, lo: T, hi: T) -> T {
    hi.min(lo.max(v))
}

pub fn completeness<T: Scalar>(score: T) -> Result<T> {
    let s = finite(score, "completeness score")?;
    Ok(clamp((s + T::of(3.0)) / T::of(4.0), T::zero(), T::one()))
}

pub fn relevance<T: Scalar>(score: T) -> Result<T> {
    let s = finite(score, "relevance score")?;
    Ok(clamp((s + T::of(2.0)) / T::of(3.0), T::zero(), T::one()))
}

pub fn confidence<T: Scalar>(reliability: T, noise: T) -> Result<T> {
    let r = finite(reliability, "reliability")?;
    let n = finite(noise, "confidence noise")?;
    if r < T::zero() || r > T::one() {
        return Err(Error::InvalidArgument(format!("reliability {r} outside [0, 1]")));
    }
    Ok(clamp(r + n / T::of(5.0), T::of(0.1), T::one()))
}

/// Weights plus label cut-points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FuzzyEvaluator {
    pub weights: FuzzyWeights,
    pub thresholds: LabelThresholds,
}

impl FuzzyEvaluator {
    pub fn new(weights: FuzzyWeights, thresholds: LabelThresholds) -> Result<Self> {
        weights.validate()?;
        thresholds.validate()?;
        Ok(Self { weights, thresholds })
    }

    pub fn evaluate<T: Scalar>(&self, outcome: &RawOutcome<T>, agent: &AgentSpec<T>) -> Result<FuzzyScores<T>> {
        if outcome.agent_id != agent.agent_id {
            return Err(Error::InvalidArgument(format!(
                "outcome of agent {} evaluated against agent {}",
                outcome.agent_id, agent.agent_id
            )));
        }
        self.weights.validate()?;
        let completeness = completeness(outcome.score)?;
        let relevance = relevance(outcome.score)?;
        let confidence = confidence(agent.reliability, outcome.noise)?;
        let w = &self.weights;
        let quality = T::of(w.completeness) * completeness
            + T::of(w.relevance) * relevance
            + T::of(w.confidence) * confidence;
        Ok(FuzzyScores {
            completeness,
            relevance,
            confidence,
            quality,
            label: self.thresholds.label(quality.as_f64()),
        })
    }
}

/// Evaluation with the default label thresholds.
pub fn evaluate<T: Scalar>(outcome: &RawOutcome<T>, agent: &AgentSpec<T>, weights: FuzzyWeights) -> Result<FuzzyScores<T>> {
    FuzzyEvaluator {
        weights,
        thresholds: LabelThresholds::default(),
    }
    .evaluate(outcome, agent)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub weights: FuzzyWeights,
    pub accuracy: f64,
    /// Accuracy minus the accuracy under the default weights.
    pub delta: f64,
}

/// Runs `eval_run` once per weight triple and reports accuracy deltas against
/// the default 0.4/0.4/0.2 weighting. The baseline is taken from the grid when
/// present, otherwise evaluated separately.
pub fn sensitivity_sweep<F>(grid: &[FuzzyWeights], mut eval_run: F) -> Result<Vec<SensitivityRow>>
where
    F: FnMut(&FuzzyWeights) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty weight grid".into()));
    }
    for w in grid {
        w.validate()?;
    }
    let default = FuzzyWeights::default();
    let mut accuracies = Vec::with_capacity(grid.len());
    for w in grid {
        accuracies.push(eval_run(w)?);
    }
    let baseline = match grid.iter().position(|w| *w == default) {
        Some(i) => accuracies[i],
        None => eval_run(&default)?,
    };
    Ok(grid
        .iter()
        .zip(accuracies)
        .map(|(w, accuracy)| SensitivityRow {
            weights: *w,
            accuracy,
            delta: accuracy - baseline,
        })
        .collect())
}
