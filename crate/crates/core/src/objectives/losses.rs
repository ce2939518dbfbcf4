use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean squared error.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Invalid("mse of an empty set".into()));
    }
    let s: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(s / pred.len() as f64)
}

/// Task MSE and attribute-reconstruction MSE (mean over all reconstructed
/// entries; 0 when there are none).
pub fn task_losses(pred: &[f64], target: &[f64], recon: &[(&[f64], &[f64])]) -> Result<(f64, f64)> {
    let m = mse(pred, target)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (r, x) in recon {
        if r.len() != x.len() {
            return Err(Error::Dimension(format!(
                "reconstruction of length {} for input of length {}",
                r.len(),
                x.len()
            )));
        }
        sum += r.iter().zip(*x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += r.len();
    }
    Ok((m, if count == 0 { 0.0 } else { sum / count as f64 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub task: f64,
    pub recon: f64,
    pub cacm: f64,
    pub con: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            task: 1.0,
            recon: 0.1,
            cacm: 0.1,
            con: 0.1,
        }
    }
}

impl LossWeights {
    pub fn plain() -> Self {
        LossWeights {
            task: 1.0,
            recon: 0.0,
            cacm: 0.0,
            con: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("task", self.task), ("recon", self.recon), ("cacm", self.cacm), ("con", self.con)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("loss weight `{n}` must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Loss values of one evaluation; inactive terms are 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossComponents {
    pub mse: f64,
    pub recon: f64,
    pub ind: f64,
    pub cause: f64,
    pub conf: f64,
    /// Mean triplet loss.
    pub contrastive: f64,
}

pub fn total_loss(c: &LossComponents, w: &LossWeights) -> f64 {
    w.task * c.mse + w.recon * c.recon + w.cacm * (c.ind + c.cause + c.conf) + w.con * c.contrastive
}
