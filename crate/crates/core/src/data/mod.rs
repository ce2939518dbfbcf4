//! Domain types for image-tile / soil-attribute samples, plus file I/O,
//! min-max scaling, attribute binarization and split planning.

mod manifest;
mod scale;
mod split;
mod tile;

pub use manifest::{load_manifest, load_sites, write_manifest, write_sites, MANIFEST_FILE};
pub use scale::{apply_scalers, fit_scalers, inverse_scale, min_max_scale, MinMax, ScaleFit, Scalers};
pub use split::{make_kfold_plans, make_ood_split, SplitKind, SplitPlan};
pub use tile::{read_tile, write_tile, TILE_MAGIC, TILE_VERSION};

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A field location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteId {
    /// Short lowercase code, e.g. `deh`.
    pub code: String,
    pub name: String,
    /// Degrees north.
    pub lat: f64,
    /// Degrees east.
    pub lon: f64,
}

impl SiteId {
    pub fn new(code: impl Into<String>, name: impl Into<String>, lat: f64, lon: f64) -> Self {
        SiteId {
            code: code.into(),
            name: name.into(),
            lat,
            lon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.code.is_empty() {
            return Err(Error::Invalid("empty site code".into()));
        }
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::Invalid(format!(
                "site `{}` has out-of-range coordinates ({}, {})",
                self.code, self.lat, self.lon
            )));
        }
        Ok(())
    }
}

/// A location in a given year. Refers to its site by code; the full
/// [`SiteId`] lives in the owning [`Dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EnvironmentId {
    pub site: String,
    pub year: i32,
}

impl EnvironmentId {
    pub fn new(site: impl Into<String>, year: i32) -> Self {
        EnvironmentId {
            site: site.into(),
            year,
        }
    }
}

impl std::fmt::Display for EnvironmentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.site, self.year)
    }
}

/// Dense `channels x height x width` image, channel-major then row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTile {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl ImageTile {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "tile dims must be >= 1, got {channels}x{height}x{width}"
            )));
        }
        if values.len() != channels * height * width {
            return Err(Error::Dimension(format!(
                "tile {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("tile contains non-finite values".into()));
        }
        Ok(ImageTile {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        ImageTile {
            channels,
            height,
            width,
            values: vec![0.0; channels * height * width],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

/// Attribute values paired with their names.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilAttributes<'a> {
    pub names: &'a [String],
    pub values: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub env: EnvironmentId,
    pub date: NaiveDate,
    pub tile: ImageTile,
    /// Aligned to the owning dataset's attribute schema.
    pub attrs: Vec<f64>,
    /// Organic matter, the regression target.
    pub om: f64,
}

/// Ordered collection of samples sharing one attribute schema and tile shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    attribute_schema: Vec<String>,
    sites: Vec<SiteId>,
    scalers: Option<Scalers>,
}

impl Dataset {
    /// Builds a dataset, checking schema/shape consistency and id uniqueness.
    /// `sites` must contain every site referenced by a sample; site order is
    /// preserved as given.
    pub fn new(
        samples: Vec<Sample>,
        attribute_schema: Vec<String>,
        sites: Vec<SiteId>,
    ) -> Result<Self> {
        let mut seen_codes = BTreeSet::new();
        for s in &sites {
            s.validate()?;
            if !seen_codes.insert(s.code.clone()) {
                return Err(Error::Invalid(format!("duplicate site code `{}`", s.code)));
            }
        }
        let mut ids = BTreeSet::new();
        let dims = samples.first().map(|s| s.tile.dims());
        for s in &samples {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::DuplicateSample(s.id.clone()));
            }
            if s.attrs.len() != attribute_schema.len() {
                return Err(Error::Dimension(format!(
                    "sample `{}` has {} attributes, schema has {}",
                    s.id,
                    s.attrs.len(),
                    attribute_schema.len()
                )));
            }
            if Some(s.tile.dims()) != dims {
                return Err(Error::Dimension(format!(
                    "sample `{}` tile dims {:?} differ from {:?}",
                    s.id,
                    s.tile.dims(),
                    dims.unwrap()
                )));
            }
            if !s.om.is_finite() || s.attrs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("sample `{}` has non-finite values", s.id)));
            }
            if !seen_codes.contains(&s.env.site) {
                return Err(Error::Invalid(format!(
                    "sample `{}` references unknown site `{}`",
                    s.id, s.env.site
                )));
            }
        }
        Ok(Dataset {
            samples,
            attribute_schema,
            sites,
            scalers: None,
        })
    }

    pub(crate) fn with_scalers(mut self, scalers: Option<Scalers>) -> Self {
        self.scalers = scalers;
        self
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn attribute_schema(&self) -> &[String] {
        &self.attribute_schema
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn site(&self, code: &str) -> Option<&SiteId> {
        self.sites.iter().find(|s| s.code == code)
    }

    pub fn scalers(&self) -> Option<&Scalers> {
        self.scalers.as_ref()
    }

    pub fn attributes(&self, i: usize) -> SoilAttributes<'_> {
        SoilAttributes {
            names: &self.attribute_schema,
            values: &self.samples[i].attrs,
        }
    }

    /// `(channels, height, width)` of every tile, `None` when empty.
    pub fn tile_dims(&self) -> Option<(usize, usize, usize)> {
        self.samples.first().map(|s| s.tile.dims())
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attribute_schema.iter().position(|n| n == name)
    }

    /// Sorted distinct environments.
    pub fn environments(&self) -> BTreeSet<EnvironmentId> {
        self.samples.iter().map(|s| s.env.clone()).collect()
    }

    /// Sample indices per environment, in dataset order.
    pub fn env_index(&self) -> BTreeMap<EnvironmentId, Vec<usize>> {
        let mut map: BTreeMap<EnvironmentId, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            map.entry(s.env.clone()).or_default().push(i);
        }
        map
    }

    /// Sites that actually have samples, in site-table order.
    pub fn active_sites(&self) -> Vec<&SiteId> {
        let used: BTreeSet<&str> = self.samples.iter().map(|s| s.env.site.as_str()).collect();
        self.sites.iter().filter(|s| used.contains(s.code.as_str())).collect()
    }

    /// Indices of samples whose environment is in `envs`.
    pub fn indices_in(&self, envs: &BTreeSet<EnvironmentId>) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| envs.contains(&s.env))
            .map(|(i, _)| i)
            .collect()
    }

    /// Keeps only samples matching `keep`. Scalers are carried over.
    pub fn filter(&self, mut keep: impl FnMut(&Sample) -> bool) -> Dataset {
        Dataset {
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
            attribute_schema: self.attribute_schema.clone(),
            sites: self.sites.clone(),
            scalers: self.scalers.clone(),
        }
    }

    /// Restricts to samples collected within `[from, to]` (inclusive).
    pub fn between_dates(&self, from: NaiveDate, to: NaiveDate) -> Dataset {
        self.filter(|s| s.date >= from && s.date <= to)
    }

    /// Drops one attribute column from the schema and every sample.
    pub fn without_attribute(&self, name: &str) -> Result<Dataset> {
        let idx = self
            .attribute_index(name)
            .ok_or_else(|| Error::Invalid(format!("attribute `{name}` not in schema")))?;
        let mut schema = self.attribute_schema.clone();
        schema.remove(idx);
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.attrs.remove(idx);
                s
            })
            .collect();
        let scalers = self.scalers.clone().map(|mut sc| {
            sc.attrs.remove(idx);
            sc
        });
        Ok(Dataset {
            samples,
            attribute_schema: schema,
            sites: self.sites.clone(),
            scalers,
        })
    }

    /// Column of attribute `j` over the given sample indices.
    pub fn attribute_column(&self, j: usize, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.samples[i].attrs[j]).collect()
    }
}

/// Per-sample split of one attribute at its mean.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeGroups {
    pub attribute: String,
    /// `true` = at or above the mean.
    pub labels: Vec<bool>,
    /// One of the two groups is empty.
    pub degenerate: bool,
}

impl AttributeGroups {
    pub fn count_above(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }

    pub fn count_below(&self) -> usize {
        self.labels.len() - self.count_above()
    }
}

/// Labels each value as below (`false`) or at-or-above (`true`) the mean.
/// Values equal to the mean land in the upper group.
pub fn mean_split(values: &[f64]) -> Vec<bool> {
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|&v| v >= mean).collect()
}

pub fn binarize_attribute(attribute: impl Into<String>, values: &[f64]) -> Result<AttributeGroups> {
    if values.is_empty() {
        return Err(Error::Invalid("cannot binarize an empty attribute vector".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("cannot binarize non-finite values".into()));
    }
    let labels = mean_split(values);
    let above = labels.iter().filter(|&&b| b).count();
    Ok(AttributeGroups {
        attribute: attribute.into(),
        degenerate: above == 0 || above == labels.len(),
        labels,
    })
}
