//! Synthetic structural-causal-model data with known attribute tags and a
//! planted spurious image channel.
//!
//! Per sample, with site `s` and environment `e = (s, year)`:
//!
//! ```text
//! L   ~ N(mu_s, 1)                       latent soil state, mu_s smooth in geography
//! y   = logistic(0.8 L + gamma C_e + eps) OM target
//! cause_k = y + noise                    caused by OM
//! conf_k  = C_e + noise                  confounded through C_e
//! ind_k   = u_{e,k} + noise              environment-seeded, independent of y
//! ```
//!
//! Tiles carry `y + b_s` as the spatial mean of channels 1-2, where `b_s` is
//! a site calibration offset that is also smooth in geography, texture noise on the
//! middle channels and, on the last channel, the per-environment constant
//! `s * h(e)`, which tracks the environment's mean OM except at the
//! designated test site.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EnvironmentId, ImageTile, Sample, SiteId};
use crate::error::{Error, Result};
use crate::geo::site_distance_km;
use crate::objectives::{CausalSpec, CausalTag, GraphVariant};
use crate::seed;

/// Approximate research-station coordinates of the six field locations.
pub fn g2f_sites() -> Vec<SiteId> {
    vec![
        SiteId::new("deh", "Delaware", 38.63, -75.46),
        SiteId::new("gah", "Georgia", 33.87, -83.42),
        SiteId::new("iah", "Iowa", 41.20, -91.48),
        SiteId::new("ilh", "Illinois", 40.06, -88.23),
        SiteId::new("mih", "Michigan", 42.41, -85.37),
        SiteId::new("geh", "Germany", 48.71, 9.21),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_sites: usize,
    pub years_per_site: usize,
    pub samples_per_env: usize,
    /// Tile height and width in pixels.
    pub tile_size: usize,
    pub channels: usize,
    /// Std of the per-tile offset on the OM-bearing channels.
    pub embed_noise: f64,
    /// Base std of attribute measurement noise.
    pub attr_noise: f64,
    /// Weight of the environment confounder in the OM equation, in `[0, 1]`.
    pub confound_strength: f64,
    /// Amplitude of the spurious channel, in `[0, 1]`.
    pub spurious_strength: f64,
    /// Sign-flip the spurious channel at the test site (otherwise it is
    /// drawn independently of OM there).
    pub spurious_flip_in_test: bool,
    /// Share of environment-mean OM in `h(e)`, in `[0, 1]`; the rest is the
    /// environment offset of the first independent attribute.
    pub spurious_om_weight: f64,
    /// Site whose spurious channel is flipped or decorrelated. Defaults to
    /// the first site.
    pub test_site: Option<String>,
    /// Attributes generated per causal class.
    pub attrs_per_class: usize,
    /// Spread of site latent means.
    pub site_spread: f64,
    /// Spread of the per-site offset added to the OM-bearing channels.
    pub site_bias_spread: f64,
    /// Noise of `cause_k` is `attr_noise * growth^(k-1)`, so `cause_1` is
    /// the strongest; must be >= 1.
    pub cause_noise_growth: f64,
    pub first_year: i32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_sites: 6,
            years_per_site: 2,
            samples_per_env: 20,
            tile_size: 16,
            channels: 10,
            embed_noise: 0.1,
            attr_noise: 0.1,
            confound_strength: 0.6,
            spurious_strength: 0.8,
            spurious_flip_in_test: true,
            spurious_om_weight: 0.8,
            test_site: None,
            attrs_per_class: 3,
            site_spread: 1.0,
            site_bias_spread: 0.1,
            cause_noise_growth: 3.0,
            first_year: 2019,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_sites == 0 || self.years_per_site == 0 || self.samples_per_env == 0 {
            return bad("site, year and sample counts must be >= 1");
        }
        if self.tile_size == 0 {
            return bad("tile_size must be >= 1");
        }
        if self.channels < 3 {
            return bad("need at least 3 channels (signal, texture, spurious)");
        }
        if self.attrs_per_class == 0 {
            return bad("attrs_per_class must be >= 1");
        }
        for (name, v) in [
            ("confound_strength", self.confound_strength),
            ("spurious_strength", self.spurious_strength),
            ("spurious_om_weight", self.spurious_om_weight),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.cause_noise_growth >= 1.0) {
            return bad("cause_noise_growth must be >= 1");
        }
        if self.embed_noise < 0.0 || self.attr_noise < 0.0 || self.site_spread < 0.0 || self.site_bias_spread < 0.0 {
            return bad("noise levels and spreads must be >= 0");
        }
        Ok(())
    }

    fn sites(&self) -> Vec<SiteId> {
        let mut sites = g2f_sites();
        sites.truncate(self.n_sites);
        let mut rng = seed::rng(self.seed, &[seed::str_key("extra-sites")]);
        for i in sites.len()..self.n_sites {
            let lat = 30.0 + 20.0 * rng.random::<f64>();
            let lon = -120.0 + 50.0 * rng.random::<f64>();
            sites.push(SiteId::new(format!("s{:02}", i + 1), format!("Site {}", i + 1), lat, lon));
        }
        sites
    }

    /// Noise multiplier of the k-th caused-by attribute; `cause_1` is the
    /// least noisy.
    fn cause_noise(&self, k: usize) -> f64 {
        self.attr_noise * self.cause_noise_growth.powi(k as i32)
    }
}

/// Oracle metadata returned alongside generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub causal_spec: CausalSpec,
    /// Latent soil state, aligned to samples.
    pub latent_per_sample: Vec<f64>,
    pub confounder_per_env: Vec<(EnvironmentId, f64)>,
    pub site_latent_mean: Vec<(String, f64)>,
    /// Offset added to the OM-bearing channels at each site.
    pub site_bias: Vec<(String, f64)>,
    /// `h(e)` before multiplication by the spurious strength.
    pub spurious_per_env: Vec<(EnvironmentId, f64)>,
    pub spurious_strength: f64,
    pub confound_strength: f64,
    pub spurious_test_site: String,
    pub spurious_flip_in_test: bool,
    pub spurious_om_weight: f64,
    /// Std of measurement noise per attribute.
    pub attribute_noise: BTreeMap<String, f64>,
}

impl GroundTruth {
    /// The caused-by-OM attribute with the smallest measurement noise.
    pub fn strongest_caused(&self) -> Option<&str> {
        self.attribute_noise
            .iter()
            .filter(|(n, _)| self.causal_spec.tags.get(*n) == Some(&CausalTag::CausedByY))
            .min_by(|a, b| a.1.total_cmp(b.1).then_with(|| a.0.cmp(b.0)))
            .map(|(n, _)| n.as_str())
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Per-site values from a Gaussian-kernel smoother over great-circle
/// distance, so nearby sites get similar values. Standardized to mean 0 and
/// std `spread`.
fn smooth_site_values(cfg: &SynthConfig, sites: &[SiteId], stream: &str, spread: f64) -> Vec<f64> {
    const LENGTH_KM: f64 = 1200.0;
    let mut rng = seed::rng(cfg.seed, &[seed::str_key(stream)]);
    let coef: Vec<f64> = sites.iter().map(|_| normal(&mut rng)).collect();
    let raw: Vec<f64> = sites
        .iter()
        .map(|a| {
            sites
                .iter()
                .zip(&coef)
                .map(|(b, c)| c * (-(site_distance_km(a, b) / LENGTH_KM).powi(2) / 2.0).exp())
                .sum()
        })
        .collect();
    if sites.len() < 2 {
        return vec![0.0; sites.len()];
    }
    let (m, s) = mean_std(&raw);
    raw.iter()
        .map(|r| if s > 0.0 { spread * (r - m) / s } else { 0.0 })
        .collect()
}

/// Zero-mean smooth pattern with integer spatial frequencies, so its mean
/// over the full grid is exactly zero.
fn smooth_field(rng: &mut ChaCha8Rng, h: usize, w: usize, amp: f64, out: &mut [f64]) {
    use std::f64::consts::TAU;
    let fy = rng.random_range(1..=2) as f64;
    let fx = rng.random_range(1..=2) as f64;
    let (py, px) = (TAU * rng.random::<f64>(), TAU * rng.random::<f64>());
    for r in 0..h {
        let vy = (TAU * fy * r as f64 / h as f64 + py).cos();
        for c in 0..w {
            let vx = (TAU * fx * c as f64 / w as f64 + px).sin();
            out[r * w + c] += if h > 2 && w > 2 { amp * vy * vx } else { 0.0 };
        }
    }
}

struct EnvDraw {
    env: EnvironmentId,
    site_idx: usize,
    confounder: f64,
    ind_offsets: Vec<f64>,
    latent: Vec<f64>,
    om: Vec<f64>,
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Dataset, GroundTruth)> {
    cfg.validate()?;
    let sites = cfg.sites();
    let test_site = match &cfg.test_site {
        Some(code) => {
            if !sites.iter().any(|s| &s.code == code) {
                return Err(Error::Config(format!("test_site `{code}` is not a generated site")));
            }
            code.clone()
        }
        None => sites[0].code.clone(),
    };
    let mu = smooth_site_values(cfg, &sites, "site-means", cfg.site_spread);
    let bias = smooth_site_values(cfg, &sites, "site-bias", cfg.site_bias_spread);
    let k = cfg.attrs_per_class;
    let gamma = cfg.confound_strength;

    // Environment-level draws and the OM target.
    let mut envs = Vec::new();
    for (si, site) in sites.iter().enumerate() {
        for yi in 0..cfg.years_per_site {
            let year = cfg.first_year + yi as i32;
            let env = EnvironmentId::new(&site.code, year);
            let mut rng = seed::rng(cfg.seed, &[seed::str_key(&env.to_string()), 1]);
            let confounder = normal(&mut rng);
            let ind_offsets = (0..k).map(|_| normal(&mut rng)).collect();
            let mut latent = Vec::with_capacity(cfg.samples_per_env);
            let mut om = Vec::with_capacity(cfg.samples_per_env);
            for i in 0..cfg.samples_per_env {
                let mut r = seed::rng(cfg.seed, &[seed::str_key(&env.to_string()), 2, i as u64]);
                let l = mu[si] + normal(&mut r);
                let eps = 0.2 * normal(&mut r);
                latent.push(l);
                om.push(logistic(0.8 * l + gamma * confounder + eps));
            }
            envs.push(EnvDraw {
                env,
                site_idx: si,
                confounder,
                ind_offsets,
                latent,
                om,
            });
        }
    }

    // Make the environment offsets of independent attributes orthogonal to
    // environment-mean OM, so "independent" holds in-sample and not only in
    // expectation.
    let env_mean_om: Vec<f64> = envs.iter().map(|e| mean_std(&e.om).0).collect();
    if envs.len() > 2 {
        let (m, _) = mean_std(&env_mean_om);
        let centered: Vec<f64> = env_mean_om.iter().map(|v| v - m).collect();
        let norm2: f64 = centered.iter().map(|v| v * v).sum();
        for j in 0..k {
            let col: Vec<f64> = envs.iter().map(|e| e.ind_offsets[j]).collect();
            let (cm, _) = mean_std(&col);
            let dot: f64 = col.iter().zip(&centered).map(|(a, b)| (a - cm) * b).sum();
            let beta = if norm2 > 0.0 { dot / norm2 } else { 0.0 };
            let resid: Vec<f64> = col.iter().zip(&centered).map(|(a, b)| a - cm - beta * b).collect();
            let (_, sd) = mean_std(&resid);
            for (e, r) in envs.iter_mut().zip(resid) {
                e.ind_offsets[j] = if sd > 0.0 { r / sd } else { 0.0 };
            }
        }
    }

    // Spurious channel: standardized environment-mean OM (over the non-test
    // environments) mixed with the first independent offset.
    let reference: Vec<f64> = envs
        .iter()
        .zip(&env_mean_om)
        .filter(|(e, _)| e.env.site != test_site)
        .map(|(_, m)| *m)
        .collect();
    let (ref_mean, ref_sd) = if reference.is_empty() {
        (0.0, 1.0)
    } else {
        let (m, s) = mean_std(&reference);
        (m, if s > 0.0 { s } else { 1.0 })
    };
    let spurious: Vec<f64> = envs
        .iter()
        .zip(&env_mean_om)
        .map(|(e, m)| {
            let rho = cfg.spurious_om_weight;
            let mixed = rho * (m - ref_mean) / ref_sd + (1.0 - rho * rho).sqrt() * e.ind_offsets[0];
            let z = mixed.clamp(-2.0, 2.0) / 2.0;
            if e.env.site != test_site {
                z
            } else if cfg.spurious_flip_in_test {
                -z
            } else {
                let mut r = seed::rng(cfg.seed, &[seed::str_key(&e.env.to_string()), 3]);
                (normal(&mut r).clamp(-2.0, 2.0)) / 2.0
            }
        })
        .collect();

    // Schema and tags.
    let mut schema = Vec::new();
    let mut tags = Vec::new();
    let mut attribute_noise = BTreeMap::new();
    for (prefix, tag) in [
        ("cause", CausalTag::CausedByY),
        ("conf", CausalTag::Confounded),
        ("ind", CausalTag::Independent),
    ] {
        for j in 0..k {
            let name = format!("{prefix}_{}", j + 1);
            let noise = match tag {
                CausalTag::CausedByY => cfg.cause_noise(j),
                _ => cfg.attr_noise,
            };
            attribute_noise.insert(name.clone(), noise);
            tags.push((name.clone(), tag));
            schema.push(name);
        }
    }

    let (c, h, w) = (cfg.channels, cfg.tile_size, cfg.tile_size);
    let plane = h * w;
    let mut samples = Vec::new();
    let mut latent_per_sample = Vec::new();
    for (ei, e) in envs.iter().enumerate() {
        let site = &sites[e.site_idx];
        for (i, (&l, &y)) in e.latent.iter().zip(&e.om).enumerate() {
            let key = seed::str_key(&e.env.to_string());
            let mut r = seed::rng(cfg.seed, &[key, 4, i as u64]);

            let mut attrs = Vec::with_capacity(3 * k);
            for j in 0..k {
                attrs.push(y + cfg.cause_noise(j) * normal(&mut r));
            }
            for _ in 0..k {
                attrs.push(e.confounder + cfg.attr_noise * normal(&mut r));
            }
            for j in 0..k {
                attrs.push(e.ind_offsets[j] + cfg.attr_noise * normal(&mut r));
            }

            let mut values = vec![0.0; c * plane];
            let signal_channels = 2.min(c - 2);
            for ch in 0..c - 1 {
                let out = &mut values[ch * plane..(ch + 1) * plane];
                if ch < signal_channels {
                    let offset = y + bias[e.site_idx] + cfg.embed_noise * normal(&mut r);
                    out.fill(offset);
                    smooth_field(&mut r, h, w, 0.1, out);
                    for v in out.iter_mut() {
                        *v += 0.02 * normal(&mut r);
                    }
                } else {
                    out.fill(0.5);
                    smooth_field(&mut r, h, w, 0.15, out);
                    for v in out.iter_mut() {
                        *v += 0.05 * normal(&mut r);
                    }
                }
            }
            values[(c - 1) * plane..].fill(cfg.spurious_strength * spurious[ei]);
            // Values live in tile files as float32.
            for v in &mut values {
                *v = *v as f32 as f64;
            }

            let day = r.random_range(0..45u64);
            let date = NaiveDate::from_ymd_opt(e.env.year, 5, 1)
                .expect("valid date")
                .checked_add_days(chrono::Days::new(day))
                .expect("valid date");
            samples.push(Sample {
                id: format!("{}_{}_{:03}", site.code, e.env.year, i),
                env: e.env.clone(),
                date,
                tile: ImageTile::new(c, h, w, values)?,
                attrs,
                om: y,
            });
            latent_per_sample.push(l);
        }
    }

    let ds = Dataset::new(samples, schema, sites.clone())?;
    let gt = GroundTruth {
        causal_spec: CausalSpec::new(tags, GraphVariant::AConfoundedPreferred),
        latent_per_sample,
        confounder_per_env: envs.iter().map(|e| (e.env.clone(), e.confounder)).collect(),
        site_latent_mean: sites.iter().map(|s| s.code.clone()).zip(mu).collect(),
        site_bias: sites.iter().map(|s| s.code.clone()).zip(bias).collect(),
        spurious_per_env: envs.iter().map(|e| e.env.clone()).zip(spurious).collect(),
        spurious_strength: cfg.spurious_strength,
        confound_strength: cfg.confound_strength,
        spurious_test_site: test_site,
        spurious_flip_in_test: cfg.spurious_flip_in_test,
        spurious_om_weight: cfg.spurious_om_weight,
        attribute_noise,
    };
    Ok((ds, gt))
}

/// Human-readable listing of tags, confounders and the spurious-channel setup.
pub fn describe_ground_truth(gt: &GroundTruth) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "causal graph variant: {:?}", gt.causal_spec.variant);
    let _ = writeln!(out, "attributes ({}):", gt.causal_spec.tags.len());
    for (name, tag) in &gt.causal_spec.tags {
        let label = match tag {
            CausalTag::Confounded if gt.confound_strength == 0.0 => {
                "confounded (effectively independent: confound strength is 0)".to_string()
            }
            CausalTag::Independent => "independent".into(),
            CausalTag::CausedByY => "caused by OM".into(),
            CausalTag::Confounded => "confounded".into(),
            CausalTag::CausedOrConfounded => "caused by or confounded with OM".into(),
            CausalTag::Excluded => "excluded".into(),
        };
        let noise = gt.attribute_noise.get(name).copied().unwrap_or(f64::NAN);
        let _ = writeln!(out, "  {name:<12} {label}  (noise std {noise:.3})");
    }
    let _ = writeln!(out, "confound strength: {}", gt.confound_strength);
    let _ = writeln!(out, "confounder per environment:");
    for (env, c) in &gt.confounder_per_env {
        let _ = writeln!(out, "  {env:<12} {c:+.4}");
    }
    let _ = writeln!(out, "site latent means:");
    for (site, m) in &gt.site_latent_mean {
        let _ = writeln!(out, "  {site:<12} {m:+.4}");
    }
    let _ = writeln!(out, "site offsets on the OM-bearing channels:");
    for (site, b) in &gt.site_bias {
        let _ = writeln!(out, "  {site:<12} {b:+.4}");
    }
    let mode = if gt.spurious_flip_in_test { "sign-flipped" } else { "decorrelated" };
    let _ = writeln!(
        out,
        "spurious channel: last channel = {} * h(e); h mixes environment-mean OM (weight {}) with the ind_1 offset, {} at site `{}`",
        gt.spurious_strength, gt.spurious_om_weight, mode, gt.spurious_test_site
    );
    for (env, h) in &gt.spurious_per_env {
        let _ = writeln!(out, "  {env:<12} h = {h:+.4}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let (ma, sa) = mean_std(a);
        let (mb, sb) = mean_std(b);
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 * sa * sb)
    }

    #[test]
    fn counts() {
        let (ds, gt) = generate_synthetic(&SynthConfig::default()).unwrap();
        assert_eq!(ds.len(), 240);
        assert_eq!(ds.environments().len(), 12);
        assert_eq!(ds.attribute_schema().len(), 9);
        assert_eq!(gt.latent_per_sample.len(), 240);
        assert_eq!(gt.strongest_caused(), Some("cause_1"));
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig { seed: 9, ..Default::default() };
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
        let other = SynthConfig { seed: 10, ..Default::default() };
        assert_ne!(generate_synthetic(&cfg).unwrap().0, generate_synthetic(&other).unwrap().0);
    }

    #[test]
    fn attribute_correlations() {
        for s in 0..5 {
            let (ds, _) = generate_synthetic(&SynthConfig { seed: s, ..Default::default() }).unwrap();
            let y: Vec<f64> = ds.samples().iter().map(|x| x.om).collect();
            let idx: Vec<usize> = (0..ds.len()).collect();
            let c: Vec<f64> = (0..3).map(|j| corr(&ds.attribute_column(j, &idx), &y)).collect();
            assert!(c[0] >= 0.7, "seed {s} cause_1 corr {}", c[0]);
            assert!(c[0] > c[1] && c[1] > c[2] && c[2] > 0.0, "seed {s} cause corrs {c:?}");
            for j in 0..3 {
                let i = corr(&ds.attribute_column(6 + j, &idx), &y);
                assert!(i.abs() <= 0.2, "seed {s} ind_{} corr {i}", j + 1);
            }
        }
    }

    #[test]
    fn om_in_open_unit_interval() {
        let (ds, _) = generate_synthetic(&SynthConfig::default()).unwrap();
        assert!(ds.samples().iter().all(|s| s.om > 0.0 && s.om < 1.0));
    }

    #[test]
    fn zero_strength_spurious_channel_is_zero() {
        let cfg = SynthConfig { spurious_strength: 0.0, ..Default::default() };
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        for s in ds.samples() {
            assert!(s.tile.plane(9).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn independent_attribute_shifts_across_environments() {
        let (ds, _) = generate_synthetic(&SynthConfig::default()).unwrap();
        for j in 6..9 {
            // one-way ANOVA F ratio
            let groups: Vec<Vec<f64>> = ds.env_index().values().map(|ix| ds.attribute_column(j, ix)).collect();
            let all: Vec<f64> = groups.iter().flatten().copied().collect();
            let (grand, _) = mean_std(&all);
            let k = groups.len() as f64;
            let n = all.len() as f64;
            let between: f64 = groups.iter().map(|g| g.len() as f64 * (mean_std(g).0 - grand).powi(2)).sum::<f64>() / (k - 1.0);
            let within: f64 = groups
                .iter()
                .map(|g| {
                    let m = mean_std(g).0;
                    g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
                })
                .sum::<f64>()
                / (n - k);
            assert!(between / within > 1.0);
        }
    }

    #[test]
    fn spurious_flipped_at_test_site() {
        let (_, gt) = generate_synthetic(&SynthConfig::default()).unwrap();
        assert_eq!(gt.spurious_test_site, "deh");
        let bad = SynthConfig { test_site: Some("zzz".into()), ..Default::default() };
        assert!(generate_synthetic(&bad).is_err());
    }

    #[test]
    fn report_contents() {
        let (ds, gt) = generate_synthetic(&SynthConfig::default()).unwrap();
        let text = describe_ground_truth(&gt);
        for class in ["independent", "caused by OM", "confounded"] {
            assert!(text.contains(class));
        }
        let listed = text.lines().filter(|l| l.contains("noise std")).count();
        assert_eq!(listed, ds.attribute_schema().len());

        let (_, gt0) = generate_synthetic(&SynthConfig { confound_strength: 0.0, ..Default::default() }).unwrap();
        assert!(describe_ground_truth(&gt0).contains("effectively independent"));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SynthConfig { n_sites: 0, ..Default::default() }.validate().is_err());
        assert!(SynthConfig { spurious_strength: 1.5, ..Default::default() }.validate().is_err());
        assert!(SynthConfig { attr_noise: -1.0, ..Default::default() }.validate().is_err());
    }
}
