//! Min-max scaling of tile channels, attribute columns and the OM target.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Dataset, EnvironmentId, SplitPlan};
use crate::error::{Error, Result};

/// Fitted range of one feature. A constant feature maps to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
    pub constant: bool,
}

impl MinMax {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        MinMax {
            min,
            max,
            constant: max <= min,
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        if self.constant {
            0.0
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    /// Inverse of [`apply`](Self::apply); constant features map back to `min`.
    #[inline]
    pub fn invert(&self, v: f64) -> f64 {
        if self.constant {
            self.min
        } else {
            v * (self.max - self.min) + self.min
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalers {
    /// One per tile channel.
    pub tile: Vec<MinMax>,
    /// One per attribute column.
    pub attrs: Vec<MinMax>,
    pub om: MinMax,
}

impl Scalers {
    /// Attribute names whose column was constant over the fitting portion.
    pub fn constant_attributes<'a>(&self, schema: &'a [String]) -> Vec<&'a str> {
        schema
            .iter()
            .zip(&self.attrs)
            .filter(|(_, m)| m.constant)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Which samples the scaler ranges are computed from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleFit {
    AllSamples,
    Envs(BTreeSet<EnvironmentId>),
}

impl ScaleFit {
    /// Train and fine-tune environments of `plan`, or every sample when
    /// `whole_dataset` is set (the replication mode).
    pub fn for_plan(plan: &SplitPlan, whole_dataset: bool) -> Self {
        if whole_dataset {
            ScaleFit::AllSamples
        } else {
            ScaleFit::Envs(plan.train_envs.union(&plan.finetune_envs).cloned().collect())
        }
    }
}

pub fn fit_scalers(ds: &Dataset, fit: &ScaleFit) -> Result<Scalers> {
    let idx: Vec<usize> = match fit {
        ScaleFit::AllSamples => (0..ds.len()).collect(),
        ScaleFit::Envs(envs) => ds.indices_in(envs),
    };
    if idx.is_empty() {
        return Err(Error::Invalid("cannot fit scalers on an empty selection".into()));
    }
    let samples = ds.samples();
    let (c, h, w) = samples[idx[0]].tile.dims();
    let plane = h * w;
    let tile = (0..c)
        .map(|ch| {
            MinMax::fit(
                idx.iter()
                    .flat_map(|&i| samples[i].tile.values[ch * plane..(ch + 1) * plane].iter().copied()),
            )
        })
        .collect();
    let attrs = (0..ds.attribute_schema().len())
        .map(|j| MinMax::fit(idx.iter().map(|&i| samples[i].attrs[j])))
        .collect();
    let om = MinMax::fit(idx.iter().map(|&i| samples[i].om));
    Ok(Scalers { tile, attrs, om })
}

fn map_dataset(ds: &Dataset, sc: &Scalers, forward: bool) -> Dataset {
    let mut out = ds.clone();
    for s in &mut out.samples {
        let plane = s.tile.height * s.tile.width;
        for (ch, m) in sc.tile.iter().enumerate() {
            for v in &mut s.tile.values[ch * plane..(ch + 1) * plane] {
                *v = if forward { m.apply(*v) } else { m.invert(*v) };
            }
        }
        for (v, m) in s.attrs.iter_mut().zip(&sc.attrs) {
            *v = if forward { m.apply(*v) } else { m.invert(*v) };
        }
        s.om = if forward { sc.om.apply(s.om) } else { sc.om.invert(s.om) };
    }
    out
}

/// Scales every tile channel, attribute column and OM into `[0, 1]` over the
/// fitting portion. A dataset that already carries scalers is returned
/// unchanged.
pub fn min_max_scale(ds: &Dataset, fit: &ScaleFit) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::Invalid("cannot scale an empty dataset".into()));
    }
    if ds.scalers().is_some() {
        return Ok(ds.clone());
    }
    let sc = fit_scalers(ds, fit)?;
    Ok(map_dataset(ds, &sc, true).with_scalers(Some(sc)))
}

/// Scales a raw dataset with previously fitted scalers (e.g. those stored
/// in a model bundle).
pub fn apply_scalers(ds: &Dataset, sc: &Scalers) -> Result<Dataset> {
    if ds.scalers().is_some() {
        return Err(Error::Invalid("dataset is already scaled".into()));
    }
    if let Some((c, _, _)) = ds.tile_dims() {
        if c != sc.tile.len() {
            return Err(Error::Dimension(format!("scalers cover {} channels, tiles have {c}", sc.tile.len())));
        }
    }
    if ds.attribute_schema().len() != sc.attrs.len() {
        return Err(Error::Dimension(format!(
            "scalers cover {} attributes, dataset has {}",
            sc.attrs.len(),
            ds.attribute_schema().len()
        )));
    }
    Ok(map_dataset(ds, sc, true).with_scalers(Some(sc.clone())))
}

/// Maps a scaled dataset back to physical units.
pub fn inverse_scale(ds: &Dataset) -> Result<Dataset> {
    let sc = ds
        .scalers()
        .ok_or_else(|| Error::Invalid("dataset is not scaled".into()))?
        .clone();
    Ok(map_dataset(ds, &sc, false).with_scalers(None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ImageTile, Sample, SiteId};
    use chrono::NaiveDate;

    fn ds_with(attr: &[f64]) -> Dataset {
        let samples = attr
            .iter()
            .enumerate()
            .map(|(i, &a)| Sample {
                id: format!("s{i}"),
                env: EnvironmentId::new("x", 2020),
                date: NaiveDate::from_ymd_opt(2020, 5, 1).unwrap(),
                tile: ImageTile::new(2, 1, 1, vec![i as f64, 3.0]).unwrap(),
                attrs: vec![a, 5.0],
                om: a * 0.1,
            })
            .collect();
        Dataset::new(
            samples,
            vec!["a".into(), "c".into()],
            vec![SiteId::new("x", "X", 0.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn column_examples() {
        let ds = min_max_scale(&ds_with(&[2.0, 4.0, 6.0]), &ScaleFit::AllSamples).unwrap();
        let col: Vec<f64> = ds.samples().iter().map(|s| s.attrs[0]).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
        let constant: Vec<f64> = ds.samples().iter().map(|s| s.attrs[1]).collect();
        assert_eq!(constant, vec![0.0, 0.0, 0.0]);
        let sc = ds.scalers().unwrap();
        assert_eq!(sc.attrs[1], MinMax { min: 5.0, max: 5.0, constant: true });
        assert_eq!(sc.constant_attributes(ds.attribute_schema()), vec!["c"]);
        // constant tile channel plane entry
        assert_eq!(ds.samples()[2].tile.values[1], 0.0);
    }

    #[test]
    fn inverse_round_trip() {
        let raw = ds_with(&[2.5, -1.0, 7.25, 3.0]);
        let back = inverse_scale(&min_max_scale(&raw, &ScaleFit::AllSamples).unwrap()).unwrap();
        for (a, b) in raw.samples().iter().zip(back.samples()) {
            assert!((a.om - b.om).abs() < 1e-9);
            for (x, y) in a.attrs.iter().zip(&b.attrs) {
                assert!((x - y).abs() < 1e-9);
            }
            for (x, y) in a.tile.values.iter().zip(&b.tile.values) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rescaling_is_idempotent() {
        let once = min_max_scale(&ds_with(&[1.0, 9.0, 4.0]), &ScaleFit::AllSamples).unwrap();
        let twice = min_max_scale(&once, &ScaleFit::AllSamples).unwrap();
        assert_eq!(once, twice);
        // Refitting on scaled data yields the identity map.
        let refit = fit_scalers(&once, &ScaleFit::AllSamples).unwrap();
        for s in once.samples() {
            for (v, m) in s.attrs.iter().zip(&refit.attrs) {
                if !m.constant {
                    assert!((m.apply(*v) - v).abs() <= 1e-12);
                }
            }
        }
    }
}
