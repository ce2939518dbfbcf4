//! Causal constraint penalties dispatched by attribute class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::causal::{CausalSpec, ConstraintClass};
use super::mmd::{mmd2_grad, KernelSpec};
use crate::data::{mean_split, EnvironmentId};
use crate::error::{Error, Result};

/// Where the penalties are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacmSpace {
    /// Image-encoder embeddings.
    #[default]
    Encoding,
    /// Model predictions, as 1-dimensional embeddings.
    Output,
}

impl CacmSpace {
    pub fn label(&self) -> &'static str {
        match self {
            CacmSpace::Encoding => "encoding",
            CacmSpace::Output => "output",
        }
    }
}

/// One MMD evaluation inside the penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintValue {
    pub attribute: String,
    pub class: ConstraintClass,
    /// `all`, `y_below`/`y_above`, or an environment.
    pub stratum: String,
    /// Estimator output before clamping.
    pub raw: f64,
}

/// A constraint evaluation skipped because a group was too small.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedConstraint {
    pub attribute: String,
    pub class: ConstraintClass,
    pub stratum: String,
    pub below: usize,
    pub above: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PenaltyBreakdown {
    pub ind_term: f64,
    pub cause_term: f64,
    pub conf_term: f64,
    pub evaluated: Vec<ConstraintValue>,
    pub skipped_constraints: Vec<SkippedConstraint>,
}

impl PenaltyBreakdown {
    pub fn total(&self) -> f64 {
        self.ind_term + self.cause_term + self.conf_term
    }

    pub fn evaluations(&self) -> usize {
        self.evaluated.len() + self.skipped_constraints.len()
    }
}

/// Per-sample inputs of the penalty; all slices are aligned.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyBatch<'a> {
    pub embeddings: &'a [Vec<f64>],
    pub attrs: &'a [&'a [f64]],
    pub schema: &'a [String],
    pub y: &'a [f64],
    pub envs: &'a [&'a EnvironmentId],
}

impl PenaltyBatch<'_> {
    fn check(&self) -> Result<()> {
        let n = self.embeddings.len();
        if self.attrs.len() != n || self.y.len() != n || self.envs.len() != n {
            return Err(Error::Dimension(format!(
                "penalty inputs misaligned: {} embeddings, {} attribute rows, {} targets, {} environments",
                n,
                self.attrs.len(),
                self.y.len(),
                self.envs.len()
            )));
        }
        if let Some(a) = self.attrs.iter().find(|a| a.len() != self.schema.len()) {
            return Err(Error::Dimension(format!(
                "attribute row of length {} for schema of {}",
                a.len(),
                self.schema.len()
            )));
        }
        Ok(())
    }
}

fn split_groups(idx: &[usize], labels: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut below = Vec::new();
    let mut above = Vec::new();
    for (&i, &l) in idx.iter().zip(labels) {
        if l {
            above.push(i);
        } else {
            below.push(i);
        }
    }
    (below, above)
}

struct Acc<'a> {
    batch: &'a PenaltyBatch<'a>,
    kernel: &'a KernelSpec,
    min_group: usize,
    out: PenaltyBreakdown,
    grads: Option<Vec<Vec<f64>>>,
}

impl Acc<'_> {
    fn pair(
        &mut self,
        attribute: &str,
        class: ConstraintClass,
        stratum: String,
        below: &[usize],
        above: &[usize],
    ) -> Result<()> {
        if below.len() < self.min_group || above.len() < self.min_group {
            self.out.skipped_constraints.push(SkippedConstraint {
                attribute: attribute.to_string(),
                class,
                stratum,
                below: below.len(),
                above: above.len(),
            });
            return Ok(());
        }
        let emb = self.batch.embeddings;
        let xs: Vec<&[f64]> = below.iter().map(|&i| emb[i].as_slice()).collect();
        let ys: Vec<&[f64]> = above.iter().map(|&i| emb[i].as_slice()).collect();
        let (raw, gx, gy) = mmd2_grad(&xs, &ys, self.kernel)?;
        let value = raw.max(0.0);
        match class {
            ConstraintClass::Independent => self.out.ind_term += value,
            ConstraintClass::Caused => self.out.cause_term += value,
            ConstraintClass::Confounded => self.out.conf_term += value,
        }
        if raw < 0.0 {
            log::trace!("clamped negative MMD estimate {raw:e} for {attribute} [{stratum}]");
        }
        if let Some(g) = self.grads.as_mut().filter(|_| raw > 0.0) {
            for (&i, gi) in below.iter().zip(&gx).chain(above.iter().zip(&gy)) {
                for (a, b) in g[i].iter_mut().zip(gi) {
                    *a += b;
                }
            }
        }
        self.out.evaluated.push(ConstraintValue {
            attribute: attribute.to_string(),
            class,
            stratum,
            raw,
        });
        Ok(())
    }
}

fn run(
    batch: &PenaltyBatch<'_>,
    spec: &CausalSpec,
    kernel: &KernelSpec,
    min_group_size: usize,
    want_grad: bool,
) -> Result<(PenaltyBreakdown, Option<Vec<Vec<f64>>>)> {
    batch.check()?;
    let n = batch.embeddings.len();
    let mut acc = Acc {
        batch,
        kernel,
        min_group: min_group_size.max(2),
        out: PenaltyBreakdown::default(),
        grads: want_grad.then(|| {
            batch
                .embeddings
                .iter()
                .map(|e| vec![0.0; e.len()])
                .collect()
        }),
    };
    let all: Vec<usize> = (0..n).collect();
    let mut by_env: BTreeMap<&EnvironmentId, Vec<usize>> = BTreeMap::new();
    for (i, e) in batch.envs.iter().enumerate() {
        by_env.entry(*e).or_default().push(i);
    }
    let y_labels = mean_split(batch.y);
    for name in spec.tags.keys() {
        let Some(j) = batch.schema.iter().position(|s| s == name) else {
            return Err(Error::Invalid(format!(
                "causal spec names attribute `{name}` missing from the schema"
            )));
        };
        let Some(class) = spec.class_of(name) else {
            continue;
        };
        let col: Vec<f64> = batch.attrs.iter().map(|a| a[j]).collect();
        match class {
            ConstraintClass::Independent => {
                let (below, above) = split_groups(&all, &mean_split(&col));
                acc.pair(name, class, "all".into(), &below, &above)?;
            }
            ConstraintClass::Caused => {
                let a_labels = mean_split(&col);
                for (y_above, stratum) in [(false, "y_below"), (true, "y_above")] {
                    let idx: Vec<usize> = all.iter().copied().filter(|&i| y_labels[i] == y_above).collect();
                    let labels: Vec<bool> = idx.iter().map(|&i| a_labels[i]).collect();
                    let (below, above) = split_groups(&idx, &labels);
                    acc.pair(name, class, stratum.into(), &below, &above)?;
                }
            }
            ConstraintClass::Confounded => {
                for (env, idx) in &by_env {
                    let vals: Vec<f64> = idx.iter().map(|&i| col[i]).collect();
                    let (below, above) = split_groups(idx, &mean_split(&vals));
                    acc.pair(name, class, env.to_string(), &below, &above)?;
                }
            }
        }
    }
    Ok((acc.out, acc.grads))
}

/// Causal penalty over one batch. Groups with fewer than `min_group_size`
/// samples (never fewer than 2) are skipped and recorded.
pub fn cacm_penalty(
    batch: &PenaltyBatch<'_>,
    spec: &CausalSpec,
    kernel: &KernelSpec,
    min_group_size: usize,
) -> Result<PenaltyBreakdown> {
    Ok(run(batch, spec, kernel, min_group_size, false)?.0)
}

/// As [`cacm_penalty`], plus the gradient of the total with respect to each
/// embedding.
pub fn cacm_penalty_grad(
    batch: &PenaltyBatch<'_>,
    spec: &CausalSpec,
    kernel: &KernelSpec,
    min_group_size: usize,
) -> Result<(PenaltyBreakdown, Vec<Vec<f64>>)> {
    let (b, g) = run(batch, spec, kernel, min_group_size, true)?;
    Ok((b, g.expect("gradients requested")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{mmd2, CausalTag, GraphVariant};

    fn envs(n: usize) -> Vec<EnvironmentId> {
        (0..n).map(|i| EnvironmentId::new(if i % 2 == 0 { "a" } else { "b" }, 2020)).collect()
    }

    #[test]
    fn all_excluded_is_zero() {
        let schema = vec!["p".to_string()];
        let emb: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let attrs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let e = envs(6);
        let er: Vec<&EnvironmentId> = e.iter().collect();
        let y = vec![0.5; 6];
        let batch = PenaltyBatch {
            embeddings: &emb,
            attrs: &attrs,
            schema: &schema,
            y: &y,
            envs: &er,
        };
        let b = cacm_penalty(&batch, &CausalSpec::excluding_all(&schema), &KernelSpec::default(), 2).unwrap();
        assert_eq!(b.total(), 0.0);
        assert!(b.skipped_constraints.is_empty());
        assert!(b.evaluated.is_empty());
    }

    #[test]
    fn independent_matches_direct_mmd() {
        let schema = vec!["p".to_string()];
        let emb: Vec<Vec<f64>> = (0..8)
            .map(|i| if i < 4 { vec![0.0 + 0.1 * i as f64, 0.0] } else { vec![5.0, 5.0 + 0.1 * i as f64] })
            .collect();
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![if i < 4 { 1.0 } else { 3.0 }]).collect();
        let attrs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let e = envs(8);
        let er: Vec<&EnvironmentId> = e.iter().collect();
        let y = vec![0.5; 8];
        let batch = PenaltyBatch {
            embeddings: &emb,
            attrs: &attrs,
            schema: &schema,
            y: &y,
            envs: &er,
        };
        let spec = CausalSpec::new([("p".into(), CausalTag::Independent)], GraphVariant::default());
        let k = KernelSpec::fixed(1.5);
        let b = cacm_penalty(&batch, &spec, &k, 2).unwrap();
        let direct = mmd2(&emb[..4], &emb[4..], &k).unwrap();
        assert!((b.ind_term - direct).abs() < 1e-12);
        assert_eq!(b.cause_term, 0.0);
    }

    #[test]
    fn confounded_skips_small_environments() {
        let schema = vec!["c".to_string()];
        let emb: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let attrs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let e = envs(6);
        let er: Vec<&EnvironmentId> = e.iter().collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64 / 10.0).collect();
        let batch = PenaltyBatch {
            embeddings: &emb,
            attrs: &attrs,
            schema: &schema,
            y: &y,
            envs: &er,
        };
        let spec = CausalSpec::new([("c".into(), CausalTag::Confounded)], GraphVariant::default());
        let b = cacm_penalty(&batch, &spec, &KernelSpec::default(), 2).unwrap();
        // each environment has 3 samples, split 1 / 2
        assert_eq!(b.skipped_constraints.len(), 2);
        assert_eq!(b.evaluations(), 2);
    }

    #[test]
    fn unknown_attribute_rejected() {
        let schema = vec!["p".to_string()];
        let emb = vec![vec![0.0]; 4];
        let rows = vec![vec![0.0]; 4];
        let attrs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let e = envs(4);
        let er: Vec<&EnvironmentId> = e.iter().collect();
        let y = vec![0.0; 4];
        let batch = PenaltyBatch {
            embeddings: &emb,
            attrs: &attrs,
            schema: &schema,
            y: &y,
            envs: &er,
        };
        let spec = CausalSpec::new([("q".into(), CausalTag::Independent)], GraphVariant::default());
        assert!(cacm_penalty(&batch, &spec, &KernelSpec::default(), 2).is_err());
        let short = &er[..3];
        let bad = PenaltyBatch { envs: short, ..batch };
        assert!(cacm_penalty(&bad, &CausalSpec::default(), &KernelSpec::default(), 2).is_err());
    }
}
