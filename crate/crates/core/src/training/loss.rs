use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::OracleLabel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability floor inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    Hard,
    Soft,
}

/// Per-row supervision for [`batch_loss`].
#[derive(Clone, Debug, PartialEq)]
pub struct LossTarget<T: Scalar = f64> {
    pub best_agent: usize,
    pub soft_targets: Vec<T>,
    /// Observed confidence; rows without one are left out of the regression term.
    pub confidence: Option<T>,
}

impl<T: Scalar> From<&OracleLabel<T>> for LossTarget<T> {
    fn from(label: &OracleLabel<T>) -> Self {
        Self {
            best_agent: label.best_agent,
            soft_targets: label.soft_targets.clone(),
            confidence: Some(label.observed_confidence()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LossOutput<T: Scalar = f64> {
    pub total: T,
    pub cross_entropy: T,
    pub confidence: T,
    pub d_selection_logits: Array2<T>,
    pub d_confidence_logits: Option<Array1<T>>,
    /// Number of log terms that hit [`PROB_FLOOR`].
    pub floor_hits: usize,
}

/// `total = ce + λ · mse` with gradients with respect to both heads' logits.
///
/// `ce` is the batch mean of `-log p[best]` (hard) or `-Σ q log p` (soft);
/// `mse` averages over rows that carry an observed confidence.
pub fn batch_loss<T: Scalar>(
    probs: ArrayView2<T>,
    confidence: Option<ArrayView1<T>>,
    targets: &[LossTarget<T>],
    confidence_weight: f64,
    mode: LabelMode,
) -> Result<LossOutput<T>> {
    let (batch, n) = probs.dim();
    if batch == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if targets.len() != batch {
        return Err(Error::Shape(format!("{} targets for a batch of {batch}", targets.len())));
    }
    if let Some(c) = &confidence {
        if c.len() != batch {
            return Err(Error::Shape(format!("{} confidences for a batch of {batch}", c.len())));
        }
    }
    if !(confidence_weight.is_finite() && confidence_weight >= 0.0) {
        return Err(Error::InvalidArgument(format!("confidence weight must be >= 0, got {confidence_weight}")));
    }
    let floor = T::of(PROB_FLOOR);
    let inv_batch = T::one() / T::of(batch as f64);
    let mut floor_hits = 0;
    let mut ce = T::zero();
    let mut d_sel = probs.to_owned();
    for (i, target) in targets.iter().enumerate() {
        if target.best_agent >= n || target.soft_targets.len() != n {
            return Err(Error::Shape(format!("target {i} does not match {n} agents")));
        }
        let row = probs.row(i);
        match mode {
            LabelMode::Hard => {
                let p = row[target.best_agent];
                if p < floor {
                    floor_hits += 1;
                }
                ce -= p.max(floor).ln();
                d_sel[[i, target.best_agent]] -= T::one();
            }
            LabelMode::Soft => {
                for k in 0..n {
                    let q = target.soft_targets[k];
                    if q > T::zero() {
                        if row[k] < floor {
                            floor_hits += 1;
                        }
                        ce -= q * row[k].max(floor).ln();
                    }
                    d_sel[[i, k]] -= q;
                }
            }
        }
    }
    ce *= inv_batch;
    d_sel.mapv_inplace(|g| g * inv_batch);

    let mut conf_loss = T::zero();
    let mut d_conf = None;
    if let Some(c) = confidence {
        let rows: Vec<(usize, T)> = targets
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.confidence.map(|y| (i, y)))
            .collect();
        let mut grad = Array1::zeros(batch);
        if !rows.is_empty() {
            let m = T::of(rows.len() as f64);
            let lambda = T::of(confidence_weight);
            for &(i, y) in &rows {
                let err = c[i] - y;
                conf_loss += err * err;
                grad[i] = lambda * T::of(2.0) * err * c[i] * (T::one() - c[i]) / m;
            }
            conf_loss /= m;
        }
        d_conf = Some(grad);
    }

    let total = if confidence_weight == 0.0 {
        ce
    } else {
        ce + T::of(confidence_weight) * conf_loss
    };
    Ok(LossOutput {
        total,
        cross_entropy: ce,
        confidence: conf_loss,
        d_selection_logits: d_sel,
        d_confidence_logits: d_conf,
        floor_hits,
    })
}
