//! Squared maximum mean discrepancy with a Gaussian RBF kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RBF bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median pairwise distance of the pooled sets, recomputed per call.
    #[default]
    MedianHeuristic,
    Fixed(f64),
}

/// Which squared-MMD estimator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmdEstimator {
    /// U-statistic: diagonal terms dropped. Can be slightly negative.
    #[default]
    Unbiased,
    /// V-statistic: all pairs including the diagonal. Never negative and
    /// exactly zero for identical sets, but biased upward by
    /// `(1/n + 1/m)(1 - mean k)`.
    Biased,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub bandwidth: Bandwidth,
    pub estimator: MmdEstimator,
}

impl KernelSpec {
    pub fn fixed(sigma: f64) -> Self {
        KernelSpec {
            bandwidth: Bandwidth::Fixed(sigma),
            ..Default::default()
        }
    }

    pub fn with_estimator(mut self, estimator: MmdEstimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(s) = self.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("fixed bandwidth must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of the pooled pairwise Euclidean distances; 1.0 if that median is 0.
pub fn median_bandwidth<V: AsRef<[f64]>>(x: &[V], y: &[V]) -> f64 {
    let pooled: Vec<&[f64]> = x.iter().chain(y).map(AsRef::as_ref).collect();
    let mut d = Vec::with_capacity(pooled.len() * pooled.len().saturating_sub(1) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            d.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let med = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    if med > 0.0 && med.is_finite() {
        med
    } else {
        log::debug!("median pairwise distance is zero; using bandwidth 1");
        1.0
    }
}

fn check_sets<V: AsRef<[f64]>>(x: &[V], y: &[V]) -> Result<usize> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Estimator(format!(
            "MMD needs at least 2 points per set, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let dim = x[0].as_ref().len();
    if x.iter().chain(y).any(|v| v.as_ref().len() != dim) {
        return Err(Error::Dimension("MMD sets have mixed vector lengths".into()));
    }
    if x.iter().chain(y).flat_map(|v| v.as_ref()).any(|v| !v.is_finite()) {
        return Err(Error::Estimator("non-finite embedding value".into()));
    }
    Ok(dim)
}

fn sigma_for<V: AsRef<[f64]>>(x: &[V], y: &[V], k: &KernelSpec) -> Result<f64> {
    k.validate()?;
    Ok(match k.bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::MedianHeuristic => median_bandwidth(x, y),
    })
}

struct Coefs {
    xx: f64,
    yy: f64,
    xy: f64,
    diag: bool,
}

fn coefs(n: usize, m: usize, est: MmdEstimator) -> Coefs {
    let (n, m) = (n as f64, m as f64);
    match est {
        MmdEstimator::Biased => Coefs {
            xx: 1.0 / (n * n),
            yy: 1.0 / (m * m),
            xy: 2.0 / (n * m),
            diag: true,
        },
        MmdEstimator::Unbiased => Coefs {
            xx: 1.0 / (n * (n - 1.0)),
            yy: 1.0 / (m * (m - 1.0)),
            xy: 2.0 / (n * m),
            diag: false,
        },
    }
}

fn within_sum<V: AsRef<[f64]>>(s: &[V], gamma: f64, diag: bool) -> f64 {
    let mut off = 0.0;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            off += (-gamma * sq_dist(s[i].as_ref(), s[j].as_ref())).exp();
        }
    }
    2.0 * off + if diag { s.len() as f64 } else { 0.0 }
}

/// Squared MMD between two point sets. Both sets need at least two points.
pub fn mmd2<V: AsRef<[f64]>>(x: &[V], y: &[V], k: &KernelSpec) -> Result<f64> {
    check_sets(x, y)?;
    let sigma = sigma_for(x, y, k)?;
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let c = coefs(x.len(), y.len(), k.estimator);
    // Summed in sorted order so that swapping the sets is exact.
    let mut terms: Vec<f64> = x
        .iter()
        .flat_map(|a| y.iter().map(move |b| (-gamma * sq_dist(a.as_ref(), b.as_ref())).exp()))
        .collect();
    terms.sort_by(f64::total_cmp);
    let cross: f64 = terms.iter().sum();
    Ok(c.xx * within_sum(x, gamma, c.diag) + c.yy * within_sum(y, gamma, c.diag) - c.xy * cross)
}

/// Squared MMD and its gradient with respect to every point. The bandwidth
/// is treated as a constant.
pub fn mmd2_grad<V: AsRef<[f64]>>(
    x: &[V],
    y: &[V],
    k: &KernelSpec,
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let dim = check_sets(x, y)?;
    let sigma = sigma_for(x, y, k)?;
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let c = coefs(x.len(), y.len(), k.estimator);
    let mut gx = vec![vec![0.0; dim]; x.len()];
    let mut gy = vec![vec![0.0; dim]; y.len()];

    // d k(a, b) / d a = -2 gamma k(a, b) (a - b)
    let within = |s: &[V], g: &mut [Vec<f64>], coef: f64| {
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let (a, b) = (s[i].as_ref(), s[j].as_ref());
                let kv = (-gamma * sq_dist(a, b)).exp();
                let f = coef * 2.0 * (-2.0 * gamma * kv);
                for d in 0..dim {
                    let diff = a[d] - b[d];
                    g[i][d] += f * diff;
                    g[j][d] -= f * diff;
                }
            }
        }
    };
    within(x, &mut gx, c.xx);
    within(y, &mut gy, c.yy);
    for (i, a) in x.iter().enumerate() {
        for (j, b) in y.iter().enumerate() {
            let (a, b) = (a.as_ref(), b.as_ref());
            let kv = (-gamma * sq_dist(a, b)).exp();
            let f = -c.xy * (-2.0 * gamma * kv);
            for d in 0..dim {
                let diff = a[d] - b[d];
                gx[i][d] += f * diff;
                gy[j][d] -= f * diff;
            }
        }
    }
    Ok((mmd2(x, y, k)?, gx, gy))
}
