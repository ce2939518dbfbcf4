use std::collections::BTreeSet;

use crate::data::{Dataset, EnvironmentId};
use crate::error::{Error, Result};
use crate::nn::{InputMode, ModelBundle};

/// Predictions for every sample of `envs`, in dataset order.
pub fn predict_envs(
    bundle: &ModelBundle,
    ds: &Dataset,
    envs: &BTreeSet<EnvironmentId>,
    input_mode: InputMode,
) -> Result<Vec<(f64, f64)>> {
    if envs.is_empty() {
        return Err(Error::Split("empty evaluation environment set".into()));
    }
    let idx = ds.indices_in(envs);
    if idx.is_empty() {
        return Err(Error::Split("evaluation environments have no samples".into()));
    }
    idx.iter()
        .map(|&i| {
            let s = &ds.samples()[i];
            let attrs = match input_mode {
                InputMode::SatelliteOnly => None,
                InputMode::SatellitePlusAttrs => Some(s.attrs.as_slice()),
            };
            Ok((bundle.predict(&s.tile, attrs)?, s.om))
        })
        .collect()
}

/// Mean squared error of the decoded OM over the samples of `envs`.
/// Satellite-only evaluation conditions on a zero attribute embedding.
pub fn evaluate_mse(
    bundle: &ModelBundle,
    ds: &Dataset,
    envs: &BTreeSet<EnvironmentId>,
    input_mode: InputMode,
) -> Result<f64> {
    let pairs = predict_envs(bundle, ds, envs, input_mode)?;
    Ok(mse_of(&pairs))
}

pub(crate) fn mse_of(pairs: &[(f64, f64)]) -> f64 {
    pairs.iter().map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pairs.len() as f64
}
