//! Great-circle distances and fine-tune site selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SiteId;
use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Haversine distance in kilometres.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dlat = (lat2 - lat1).to_radians();
    let dlon = (lon2 - lon1).to_radians();
    let a = (dlat / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

pub fn site_distance_km(a: &SiteId, b: &SiteId) -> f64 {
    haversine_km(a.lat, a.lon, b.lat, b.lon)
}

/// How the single adaptation site is picked relative to the test site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinetuneStrategy {
    None,
    Random,
    Closest,
    Farthest,
}

impl FinetuneStrategy {
    pub const ALL: [FinetuneStrategy; 4] = [
        FinetuneStrategy::None,
        FinetuneStrategy::Random,
        FinetuneStrategy::Closest,
        FinetuneStrategy::Farthest,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FinetuneStrategy::None => "-",
            FinetuneStrategy::Random => "random",
            FinetuneStrategy::Closest => "closest",
            FinetuneStrategy::Farthest => "farthest",
        }
    }
}

impl std::str::FromStr for FinetuneStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "-" => Ok(FinetuneStrategy::None),
            "random" => Ok(FinetuneStrategy::Random),
            "closest" => Ok(FinetuneStrategy::Closest),
            "farthest" => Ok(FinetuneStrategy::Farthest),
            other => Err(Error::Config(format!("unknown fine-tune strategy `{other}`"))),
        }
    }
}

/// Picks the fine-tune site. Distance ties (and the random draw order) are
/// resolved by lexicographic site code.
pub fn select_finetune_env(
    strategy: FinetuneStrategy,
    test_site: &SiteId,
    candidates: &[SiteId],
    seed: u64,
) -> Result<SiteId> {
    let mut pool: Vec<&SiteId> = candidates.iter().filter(|c| c.code != test_site.code).collect();
    if pool.is_empty() {
        return Err(Error::Invalid("no candidate fine-tune sites".into()));
    }
    pool.sort_by(|a, b| a.code.cmp(&b.code));
    let by_distance = |far: bool| {
        let mut best = pool[0];
        let mut best_d = site_distance_km(test_site, best);
        for &c in &pool[1..] {
            let d = site_distance_km(test_site, c);
            if (far && d > best_d) || (!far && d < best_d) {
                best = c;
                best_d = d;
            }
        }
        best
    };
    let chosen = match strategy {
        FinetuneStrategy::None => {
            return Err(Error::Invalid("strategy `none` selects no site".into()))
        }
        FinetuneStrategy::Closest => by_distance(false),
        FinetuneStrategy::Farthest => by_distance(true),
        FinetuneStrategy::Random => {
            let mut rng = crate::seed::rng(seed, &[crate::seed::str_key(&test_site.code)]);
            pool[rng.random_range(0..pool.len())]
        }
    };
    Ok(chosen.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_symmetric() {
        assert_eq!(haversine_km(10.0, 20.0, 10.0, 20.0), 0.0);
        let d1 = haversine_km(38.6, -75.4, 48.7, 9.2);
        let d2 = haversine_km(48.7, 9.2, 38.6, -75.4);
        assert!((d1 - d2).abs() < 1e-9);
    }

    #[test]
    fn known_distance() {
        // London to Paris, ~344 km.
        let d = haversine_km(51.5074, -0.1278, 48.8566, 2.3522);
        assert!((d - 344.0).abs() < 5.0, "{d}");
        // quarter meridian
        let q = haversine_km(0.0, 0.0, 90.0, 0.0);
        assert!((q - std::f64::consts::FRAC_PI_2 * EARTH_RADIUS_KM).abs() < 1e-6);
    }

    #[test]
    fn ties_break_by_code() {
        let t = SiteId::new("t", "T", 0.0, 0.0);
        let c = vec![SiteId::new("b", "B", 0.0, 1.0), SiteId::new("a", "A", 0.0, -1.0)];
        let s = select_finetune_env(FinetuneStrategy::Closest, &t, &c, 0).unwrap();
        assert_eq!(s.code, "a");
        let s = select_finetune_env(FinetuneStrategy::Farthest, &t, &c, 0).unwrap();
        assert_eq!(s.code, "a");
    }

    #[test]
    fn empty_candidates_rejected() {
        let t = SiteId::new("t", "T", 0.0, 0.0);
        assert!(select_finetune_env(FinetuneStrategy::Random, &t, &[], 1).is_err());
        assert!(select_finetune_env(FinetuneStrategy::Closest, &t, &[t.clone()], 1).is_err());
    }

    #[test]
    fn random_is_seeded() {
        let t = SiteId::new("t", "T", 0.0, 0.0);
        let c: Vec<SiteId> = (0..5).map(|i| SiteId::new(format!("s{i}"), "", 0.0, i as f64)).collect();
        let a = select_finetune_env(FinetuneStrategy::Random, &t, &c, 42).unwrap();
        let b = select_finetune_env(FinetuneStrategy::Random, &t, &c, 42).unwrap();
        assert_eq!(a, b);
    }
}
