//! Experiment drivers: OOD model table, k-fold domain adaptation, causal
//! penalty space ablation and leave-one-out variable importance.
//!
//! Independent runs execute on the rayon pool; rows are collected in job
//! order and then sorted, so reports do not depend on scheduling.

use std::collections::BTreeSet;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::{rf_baseline, ForestConfig};
use super::metrics::evaluate_mse;
use super::report::{mean, ExperimentReport, ImportanceReport, ReportRow, Standardization};
use crate::data::{make_kfold_plans, make_ood_split, min_max_scale, Dataset, EnvironmentId, ScaleFit, SplitPlan};
use crate::error::{Error, Result};
use crate::nn::{InputMode, ModelBundle, ModelConfig};
use crate::objectives::{CacmSpace, CausalSpec, LossWeights};
use crate::seed;
use crate::training::{config_hash, finetune, pretrain_encoder, train, FinetuneStrategy, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    Cnn,
    CnnCacm,
    CnnCacmContrastive,
    CnnContrastive,
    /// The combined model with every regularizer weight set to zero.
    CnnZeroWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModelVariant {
    pub kind: ModelKind,
    pub input_mode: InputMode,
}

impl ModelVariant {
    pub const fn new(kind: ModelKind, input_mode: InputMode) -> Self {
        ModelVariant { kind, input_mode }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            ModelKind::RandomForest => "Random Forest",
            ModelKind::Cnn => "CNN",
            ModelKind::CnnCacm => "CNN_CACM",
            ModelKind::CnnCacmContrastive => "CNN_CACM+Contrastive",
            ModelKind::CnnContrastive => "CNN_Contrastive",
            ModelKind::CnnZeroWeights => "CNN_zero_weights",
        }
    }

    /// Whether soil attributes enter training as an auxiliary signal.
    pub fn auxiliary(&self) -> &'static str {
        match self.kind {
            ModelKind::RandomForest | ModelKind::Cnn => "-",
            _ => "Sensor",
        }
    }

    /// Training configuration for CNN variants; `None` for the forest.
    pub fn train_config(&self, base: &TrainConfig) -> Option<TrainConfig> {
        let w = base.weights;
        let weights = match self.kind {
            ModelKind::RandomForest => return None,
            ModelKind::Cnn | ModelKind::CnnZeroWeights => LossWeights {
                task: w.task,
                ..LossWeights::plain()
            },
            ModelKind::CnnCacm => LossWeights { con: 0.0, ..w },
            ModelKind::CnnCacmContrastive => w,
            ModelKind::CnnContrastive => LossWeights { cacm: 0.0, ..w },
        };
        Some(TrainConfig {
            weights,
            input_mode: self.input_mode,
            ..base.clone()
        })
    }
}

/// The seven model rows of the out-of-distribution table.
pub fn table_variants() -> Vec<ModelVariant> {
    use InputMode::*;
    use ModelKind::*;
    vec![
        ModelVariant::new(RandomForest, SatelliteOnly),
        ModelVariant::new(RandomForest, SatellitePlusAttrs),
        ModelVariant::new(Cnn, SatelliteOnly),
        ModelVariant::new(Cnn, SatellitePlusAttrs),
        ModelVariant::new(CnnCacm, SatelliteOnly),
        ModelVariant::new(CnnCacmContrastive, SatelliteOnly),
        ModelVariant::new(CnnContrastive, SatelliteOnly),
    ]
}

/// Everything an experiment needs besides data, causal tags and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSetup {
    pub train: TrainConfig,
    pub forest: ForestConfig,
    /// Fit scalers on every sample instead of the plan's train and
    /// fine-tune environments.
    pub whole_dataset_scaling: bool,
}

impl Default for ExperimentSetup {
    fn default() -> Self {
        ExperimentSetup {
            train: TrainConfig::default(),
            forest: ForestConfig::default(),
            whole_dataset_scaling: false,
        }
    }
}

impl ExperimentSetup {
    /// Reduced widths and forest size that keep the synthetic benchmarks
    /// within single-core minutes.
    pub fn desk_scale() -> Self {
        ExperimentSetup {
            train: TrainConfig {
                model: ModelConfig {
                    conv_channels: [8, 16, 16],
                    embed_dim: 16,
                    ..ModelConfig::default()
                },
                finetune_epochs: 20,
                finetune_lr: 3e-4,
                ..TrainConfig::default()
            },
            forest: ForestConfig {
                n_trees: 50,
                ..ForestConfig::default()
            },
            whole_dataset_scaling: false,
        }
    }

    pub fn hash(&self) -> String {
        config_hash(&serde_json::to_string(self).expect("setup serializes"))
    }

    fn scaled(&self, ds: &Dataset, plan: &SplitPlan) -> Result<Dataset> {
        min_max_scale(ds, &ScaleFit::for_plan(plan, self.whole_dataset_scaling))
    }
}

/// Trains a CNN on the plan's training environments, starting from a
/// pretrained encoder when `pretrain_epochs > 0`.
pub fn fit_cnn(ds: &Dataset, plan: &SplitPlan, spec: &CausalSpec, cfg: &TrainConfig) -> Result<ModelBundle> {
    let init = if cfg.pretrain_epochs > 0 {
        Some(pretrain_encoder(ds, cfg)?.0)
    } else {
        None
    };
    Ok(train(ds, plan, spec, cfg, init.as_ref())?.0)
}

fn env_label(envs: &BTreeSet<EnvironmentId>) -> String {
    SplitPlan::sites_of(envs).into_iter().collect::<Vec<_>>().join("+")
}

/// Trains and scores one variant on one (already scaled) plan.
fn score_variant(
    ds: &Dataset,
    plan: &SplitPlan,
    spec: &CausalSpec,
    setup: &ExperimentSetup,
    variant: ModelVariant,
    run_seed: u64,
) -> Result<f64> {
    match variant.train_config(&setup.train) {
        None => {
            let pooled = SplitPlan {
                train_envs: plan.train_envs.union(&plan.finetune_envs).cloned().collect(),
                finetune_envs: BTreeSet::new(),
                ..plan.clone()
            };
            rf_baseline(ds, &pooled, variant.input_mode, &setup.forest, run_seed)
        }
        Some(mut cfg) => {
            cfg.seed = run_seed;
            let mut bundle = fit_cnn(ds, plan, spec, &cfg)?;
            if !plan.finetune_envs.is_empty() {
                bundle = finetune(&bundle, ds, &plan.finetune_envs, spec, &cfg, Some(&plan.train_envs))?.0;
            }
            evaluate_mse(&bundle, ds, &plan.test_envs, variant.input_mode)
        }
    }
}

/// Holds out `test_sites`, trains every variant for every seed and scores
/// it on the held-out environments.
pub fn run_ood_experiment(
    ds: &Dataset,
    spec: &CausalSpec,
    setup: &ExperimentSetup,
    test_sites: &[&str],
    variants: &[ModelVariant],
    seeds: &[u64],
) -> Result<ExperimentReport> {
    let plan = make_ood_split(ds, test_sites)?;
    let scaled = setup.scaled(ds, &plan)?;
    let env = env_label(&plan.test_envs);
    let jobs: Vec<(ModelVariant, u64)> = variants
        .iter()
        .flat_map(|v| seeds.iter().map(move |s| (*v, *s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(v, s)| {
            let mse = score_variant(&scaled, &plan, spec, setup, v, s)?;
            info!("ood {} ({}) seed {s}: mse {mse:.5}", v.label(), v.input_mode.label());
            Ok(ReportRow {
                model: v.label().into(),
                input: v.input_mode.label().into(),
                auxiliary: v.auxiliary().into(),
                strategy: FinetuneStrategy::None.label().into(),
                test_env: env.clone(),
                seed: s,
                mse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ExperimentReport::from_rows("ood", rows, &setup.hash())
}

/// K-fold leave-one-site-out evaluation: per seed and strategy, each site is
/// the test site once; with a strategy other than `none`, one further site
/// is used for fine-tuning. Training seeds depend on (seed, fold) only, so
/// strategies are compared on equal initializations.
pub fn run_domain_adaptation(
    ds: &Dataset,
    spec: &CausalSpec,
    setup: &ExperimentSetup,
    variants: &[ModelVariant],
    strategies: &[FinetuneStrategy],
    seeds: &[u64],
) -> Result<ExperimentReport> {
    let k = ds.active_sites().len();
    if k < 3 {
        return Err(Error::Split(format!("domain adaptation needs at least 3 sites, dataset has {k}")));
    }
    let mut jobs = Vec::new();
    for &s in seeds {
        for &st in strategies {
            for (fold, plan) in make_kfold_plans(ds, st, s)?.into_iter().enumerate() {
                for &v in variants {
                    jobs.push((s, st, fold, plan.clone(), v));
                }
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|(s, st, fold, plan, v)| {
            let scaled = setup.scaled(ds, plan)?;
            let run_seed = seed::derive(*s, &[*fold as u64]);
            let mse = score_variant(&scaled, plan, spec, setup, *v, run_seed)?;
            let env = env_label(&plan.test_envs);
            info!("adapt {} {} test {env} seed {s}: mse {mse:.5}", v.label(), st.label());
            Ok(ReportRow {
                model: v.label().into(),
                input: v.input_mode.label().into(),
                auxiliary: v.auxiliary().into(),
                strategy: st.label().into(),
                test_env: env,
                seed: *s,
                mse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ExperimentReport::from_rows("domain_adaptation", rows, &setup.hash())
}

/// Label of a penalty-space ablation row.
pub fn space_label(space: CacmSpace) -> String {
    format!("CNN_CACM ({})", space.label())
}

/// Identical causal-penalty runs with the penalty on encoder embeddings
/// and on model outputs.
pub fn run_cacm_space_ablation(
    ds: &Dataset,
    spec: &CausalSpec,
    setup: &ExperimentSetup,
    test_sites: &[&str],
    seeds: &[u64],
) -> Result<ExperimentReport> {
    let plan = make_ood_split(ds, test_sites)?;
    let scaled = setup.scaled(ds, &plan)?;
    let env = env_label(&plan.test_envs);
    let variant = ModelVariant::new(ModelKind::CnnCacm, InputMode::SatelliteOnly);
    let base = variant.train_config(&setup.train).expect("cnn variant");
    let jobs: Vec<(CacmSpace, u64)> = [CacmSpace::Encoding, CacmSpace::Output]
        .into_iter()
        .flat_map(|sp| seeds.iter().map(move |s| (sp, *s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(space, s)| {
            let cfg = TrainConfig {
                cacm_space: space,
                seed: s,
                ..base.clone()
            };
            let bundle = fit_cnn(&scaled, &plan, spec, &cfg)?;
            let mse = evaluate_mse(&bundle, &scaled, &plan.test_envs, variant.input_mode)?;
            info!("ablation {} seed {s}: mse {mse:.5}", space.label());
            Ok(ReportRow {
                model: space_label(space),
                input: variant.input_mode.label().into(),
                auxiliary: variant.auxiliary().into(),
                strategy: FinetuneStrategy::None.label().into(),
                test_env: env.clone(),
                seed: s,
                mse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ExperimentReport::from_rows("cacm_space", rows, &setup.hash())
}

/// Options for [`variable_importance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceOptions {
    /// Attributes to remove one at a time; empty means the whole schema.
    pub attributes: Vec<String>,
    /// Satellite-only measures importance as an auxiliary signal; with
    /// attributes the removed variable is also withheld at inference.
    pub input_mode: InputMode,
    pub standardization: Standardization,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        ImportanceOptions {
            attributes: Vec::new(),
            input_mode: InputMode::SatelliteOnly,
            standardization: Standardization::ZScore,
        }
    }
}

/// Leave-one-attribute-out importance of the combined causal + contrastive
/// model: test-MSE gain of each removal over the full model, averaged over
/// seeds, standardized and ranked.
pub fn variable_importance(
    ds: &Dataset,
    spec: &CausalSpec,
    setup: &ExperimentSetup,
    test_sites: &[&str],
    opts: &ImportanceOptions,
    seeds: &[u64],
) -> Result<ImportanceReport> {
    let schema = ds.attribute_schema();
    let attrs: Vec<String> = if opts.attributes.is_empty() {
        schema.to_vec()
    } else {
        opts.attributes.clone()
    };
    if let Some(a) = attrs.iter().find(|a| !schema.contains(a)) {
        return Err(Error::Invalid(format!("attribute `{a}` not in schema")));
    }
    if schema.len() < 2 {
        return Err(Error::Invalid("variable importance needs at least 2 attributes".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Invalid("no seeds given".into()));
    }
    spec.check_against(schema)?;
    let plan = make_ood_split(ds, test_sites)?;
    let scaled = setup.scaled(ds, &plan)?;
    let variant = ModelVariant::new(ModelKind::CnnCacmContrastive, opts.input_mode);
    let base = variant.train_config(&setup.train).expect("cnn variant");
    let removals: Vec<Option<&str>> = std::iter::once(None)
        .chain(attrs.iter().map(|a| Some(a.as_str())))
        .collect();
    let jobs: Vec<(Option<&str>, u64)> = removals
        .iter()
        .flat_map(|r| seeds.iter().map(move |s| (*r, *s)))
        .collect();
    let mses = jobs
        .par_iter()
        .map(|&(removed, s)| {
            let (d, sp) = match removed {
                Some(a) => (scaled.without_attribute(a)?, spec.without(a)),
                None => (scaled.clone(), spec.clone()),
            };
            let cfg = TrainConfig { seed: s, ..base.clone() };
            let bundle = fit_cnn(&d, &plan, &sp, &cfg)?;
            let mse = evaluate_mse(&bundle, &d, &plan.test_envs, opts.input_mode)?;
            info!("importance without {} seed {s}: mse {mse:.5}", removed.unwrap_or("(none)"));
            Ok(mse)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = seeds.len();
    let baseline = mean(&mses[..n]);
    let gains = attrs
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let off = (j + 1) * n;
            let g: Vec<f64> = (0..n).map(|k| mses[off + k] - mses[k]).collect();
            (a.clone(), mean(&g))
        })
        .collect();
    ImportanceReport::from_gains(
        gains,
        baseline,
        opts.standardization,
        opts.input_mode,
        seeds.to_vec(),
        &setup.hash(),
    )
}
