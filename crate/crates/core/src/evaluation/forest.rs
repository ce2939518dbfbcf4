//! Random-forest regressor: CART trees grown on bootstrap resamples with
//! variance-reduction splits and `sqrt(p)` candidate features per node.
//!
//! Image tiles enter as per-channel mean and standard deviation.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::mse_of;
use crate::data::{Dataset, ImageTile, SplitPlan};
use crate::error::{Error, Result};
use crate::nn::InputMode;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Depth 0 is a single leaf.
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Draw each tree's rows with replacement; off uses every row once.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 12,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: &'a ForestConfig,
    n_candidates: usize,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf(mean));
        if depth >= self.cfg.max_depth || rows.len() < self.cfg.min_samples_split {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, rng) else {
            return id;
        };
        let mut cut = 0;
        for i in 0..rows.len() {
            if self.x[rows[i]][feature] <= threshold {
                rows.swap(i, cut);
                cut += 1;
            }
        }
        let (l, r) = rows.split_at_mut(cut);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Split maximizing the drop in summed squared error.
    fn best_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let p = self.x[0].len();
        let mut feats = sample(rng, p, self.n_candidates).into_vec();
        feats.sort_unstable();
        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let parent = total * total / n;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for f in feats {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 0..order.len() - 1 {
                left_sum += self.y[order[k]];
                let (v, next) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    let mid = v + (next - v) / 2.0;
                    best = Some((gain, f, if mid < next { mid } else { v }));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    n_features: usize,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if x.is_empty() {
            return Err(Error::Split("random forest needs at least one training row".into()));
        }
        if x.len() != y.len() {
            return Err(Error::Dimension(format!("{} feature rows, {} targets", x.len(), y.len())));
        }
        let p = x[0].len();
        if p == 0 || x.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("feature rows must share a non-zero length".into()));
        }
        let n_candidates = ((p as f64).sqrt().floor() as usize).max(1);
        let trees = (0..cfg.n_trees)
            .map(|t| {
                let mut rng = seed::rng(seed, &[seed::str_key("tree"), t as u64]);
                let mut rows: Vec<usize> = if cfg.bootstrap {
                    (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
                } else {
                    (0..x.len()).collect()
                };
                let mut g = Grower {
                    x,
                    y,
                    cfg,
                    n_candidates,
                    nodes: Vec::new(),
                };
                g.grow(&mut rows, 0, &mut rng);
                Tree { nodes: g.nodes }
            })
            .collect();
        Ok(RandomForest { trees, n_features: p })
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::Dimension(format!(
                "forest expects {} features, got {}",
                self.n_features,
                row.len()
            )));
        }
        Ok(self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64)
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}

/// Per-channel mean and population standard deviation.
pub fn tile_features(tile: &ImageTile) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * tile.channels);
    for c in 0..tile.channels {
        let plane = tile.plane(c);
        let n = plane.len() as f64;
        let m = plane.iter().sum::<f64>() / n;
        let var = plane.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        out.push(m);
        out.push(var.sqrt());
    }
    out
}

/// Feature rows and targets for the given sample indices.
pub fn forest_features(ds: &Dataset, idx: &[usize], input_mode: InputMode) -> (Vec<Vec<f64>>, Vec<f64>) {
    idx.iter()
        .map(|&i| {
            let s = &ds.samples()[i];
            let mut row = tile_features(&s.tile);
            if input_mode == InputMode::SatellitePlusAttrs {
                row.extend_from_slice(&s.attrs);
            }
            (row, s.om)
        })
        .unzip()
}

/// Fits on the split's training environments and returns test-set MSE.
pub fn rf_baseline(
    ds: &Dataset,
    split: &SplitPlan,
    input_mode: InputMode,
    cfg: &ForestConfig,
    seed: u64,
) -> Result<f64> {
    split.validate()?;
    let train = ds.indices_in(&split.train_envs);
    if train.is_empty() {
        return Err(Error::Split("no training samples".into()));
    }
    let test = ds.indices_in(&split.test_envs);
    if test.is_empty() {
        return Err(Error::Split("test environments have no samples".into()));
    }
    let (x, y) = forest_features(ds, &train, input_mode);
    let forest = RandomForest::fit(&x, &y, cfg, seed)?;
    let (tx, ty) = forest_features(ds, &test, input_mode);
    let pairs = tx
        .iter()
        .zip(ty)
        .map(|(r, t)| Ok((forest.predict(r)?, t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(mse_of(&pairs))
}
