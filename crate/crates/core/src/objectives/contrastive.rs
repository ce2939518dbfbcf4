//! Location-based triplet loss and pair sampling.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

fn check(za: &[f64], zp: &[f64], zn: &[f64]) -> Result<()> {
    if za.len() != zp.len() || za.len() != zn.len() {
        return Err(Error::Dimension(format!(
            "triplet lengths {}, {}, {} differ",
            za.len(),
            zp.len(),
            zn.len()
        )));
    }
    if za.iter().chain(zp).chain(zn).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite embedding in triplet".into()));
    }
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `|za - zp| - |za - zn|`, unclamped.
pub fn contrastive_loss(za: &[f64], zp: &[f64], zn: &[f64]) -> Result<f64> {
    check(za, zp, zn)?;
    Ok(dist(za, zp) - dist(za, zn))
}

/// `max(0, |za - zp| - |za - zn| + margin)`.
pub fn contrastive_hinge(za: &[f64], zp: &[f64], zn: &[f64], margin: f64) -> Result<f64> {
    Ok((contrastive_loss(za, zp, zn)? + margin).max(0.0))
}

/// Gradients of a triplet loss with respect to anchor, positive and negative.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub value: f64,
    pub ga: Vec<f64>,
    pub gp: Vec<f64>,
    pub gn: Vec<f64>,
}

/// Raw loss (`hinge = None`) or hinge with the given margin, with
/// gradients. A zero distance contributes a zero subgradient.
pub fn contrastive_grad(za: &[f64], zp: &[f64], zn: &[f64], hinge: Option<f64>) -> Result<TripletGrad> {
    let raw = contrastive_loss(za, zp, zn)?;
    let d = za.len();
    let (value, active) = match hinge {
        None => (raw, true),
        Some(m) => ((raw + m).max(0.0), raw + m > 0.0),
    };
    let mut g = TripletGrad {
        value,
        ga: vec![0.0; d],
        gp: vec![0.0; d],
        gn: vec![0.0; d],
    };
    if !active {
        return Ok(g);
    }
    let dp = dist(za, zp);
    let dn = dist(za, zn);
    for k in 0..d {
        if dp > 0.0 {
            let u = (za[k] - zp[k]) / dp;
            g.ga[k] += u;
            g.gp[k] -= u;
        }
        if dn > 0.0 {
            let u = (za[k] - zn[k]) / dn;
            g.ga[k] -= u;
            g.gn[k] += u;
        }
    }
    Ok(g)
}

/// Indices into the dataset of one anchor with its positive and negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    /// Positive drawn from the anchor's own year because its site has no
    /// other year in the pool.
    pub same_year_fallback: bool,
}

/// Candidate lookup for positives and negatives.
#[derive(Debug, Clone)]
pub struct PairIndex {
    by_site_year: BTreeMap<String, BTreeMap<i32, Vec<usize>>>,
    pool: Vec<usize>,
}

impl PairIndex {
    /// `pool` lists dataset indices eligible as positives and negatives.
    pub fn new(ds: &Dataset, pool: &[usize]) -> Result<Self> {
        let mut by_site_year: BTreeMap<String, BTreeMap<i32, Vec<usize>>> = BTreeMap::new();
        for &i in pool {
            let env = &ds.samples()[i].env;
            by_site_year
                .entry(env.site.clone())
                .or_default()
                .entry(env.year)
                .or_default()
                .push(i);
        }
        if by_site_year.len() < 2 {
            return Err(Error::Invalid(
                "contrastive pairs need samples from at least two sites".into(),
            ));
        }
        Ok(PairIndex {
            by_site_year,
            pool: pool.to_vec(),
        })
    }

    pub fn sample<R: Rng>(&self, ds: &Dataset, anchor: usize, rng: &mut R) -> Result<Triple> {
        let env = &ds.samples()[anchor].env;
        let years = self.by_site_year.get(&env.site).ok_or_else(|| {
            Error::Invalid(format!("anchor site `{}` has no samples in the pair pool", env.site))
        })?;
        let other_years: Vec<usize> = years
            .iter()
            .filter(|(y, _)| **y != env.year)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let (positive, same_year_fallback) = if !other_years.is_empty() {
            (*other_years.choose(rng).unwrap(), false)
        } else {
            let same: Vec<usize> = years
                .get(&env.year)
                .map(|v| v.iter().copied().filter(|&i| i != anchor).collect())
                .unwrap_or_default();
            log::debug!("no other year for site `{}`; positive drawn from the same year", env.site);
            (*same.choose(rng).unwrap_or(&anchor), true)
        };
        let negatives: Vec<usize> = self
            .pool
            .iter()
            .copied()
            .filter(|&i| ds.samples()[i].env.site != env.site)
            .collect();
        let negative = *negatives.choose(rng).ok_or_else(|| {
            Error::Invalid("no sample from a different site for a negative".into())
        })?;
        Ok(Triple {
            anchor,
            positive,
            negative,
            same_year_fallback,
        })
    }
}

/// Draws one triple per anchor. Positives share the anchor's site in a
/// different year; negatives come from another site. Both are drawn from
/// `pool` (dataset indices).
pub fn sample_pairs<R: Rng>(
    anchors: &[usize],
    ds: &Dataset,
    pool: &[usize],
    rng: &mut R,
) -> Result<Vec<Triple>> {
    let index = PairIndex::new(ds, pool)?;
    anchors.iter().map(|&a| index.sample(ds, a, rng)).collect()
}
