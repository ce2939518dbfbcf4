use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    /// Heavy-ball momentum coefficient.
    SgdMomentum(f64),
    /// Adam with betas (0.9, 0.999) and eps 1e-8.
    #[default]
    AdaptiveMoment,
}

impl OptimizerKind {
    pub fn validate(&self) -> Result<()> {
        if let OptimizerKind::SgdMomentum(m) = self {
            if !(0.0..1.0).contains(m) {
                return Err(Error::Config(format!("momentum must be in [0, 1), got {m}")));
            }
        }
        Ok(())
    }
}

/// First-order optimizer over a flat parameter vector. Entries with a
/// `false` mask are left untouched.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    mask: Option<Vec<bool>>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::SgdMomentum(_) => (vec![0.0; n], Vec::new()),
            OptimizerKind::AdaptiveMoment => (vec![0.0; n], vec![0.0; n]),
        };
        Optimizer {
            kind,
            lr,
            m,
            v,
            t: 0,
            mask: None,
        }
    }

    /// Restricts updates to entries where `mask` is true.
    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let lr = self.lr;
        let active = |i: usize| self.mask.as_ref().is_none_or(|m| m[i]);
        match self.kind {
            OptimizerKind::Sgd => {
                for i in 0..params.len() {
                    if active(i) {
                        params[i] -= lr * grads[i];
                    }
                }
            }
            OptimizerKind::SgdMomentum(mu) => {
                for i in 0..params.len() {
                    if active(i) {
                        self.m[i] = mu * self.m[i] + grads[i];
                        params[i] -= lr * self.m[i];
                    }
                }
            }
            OptimizerKind::AdaptiveMoment => {
                let c1 = 1.0 - BETA1.powi(self.t);
                let c2 = 1.0 - BETA2.powi(self.t);
                for i in 0..params.len() {
                    if !self.mask.as_ref().is_none_or(|m| m[i]) {
                        continue;
                    }
                    let g = grads[i];
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimize(kind: OptimizerKind, lr: f64) -> f64 {
        let mut p = vec![3.0, -2.0];
        let mut opt = Optimizer::new(kind, lr, 2);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut p, &g);
        }
        p.iter().map(|x| x * x).sum()
    }

    #[test]
    fn all_kinds_descend_a_quadratic() {
        assert!(minimize(OptimizerKind::Sgd, 0.05) < 1e-6);
        assert!(minimize(OptimizerKind::SgdMomentum(0.9), 0.01) < 1e-6);
        assert!(minimize(OptimizerKind::AdaptiveMoment, 0.05) < 1e-3);
    }

    #[test]
    fn mask_freezes_entries() {
        let mut p = vec![1.0, 1.0];
        let mut opt = Optimizer::new(OptimizerKind::AdaptiveMoment, 0.1, 2).with_mask(vec![true, false]);
        opt.step(&mut p, &[1.0, 1.0]);
        assert!(p[0] < 1.0);
        assert_eq!(p[1], 1.0);
    }
}
