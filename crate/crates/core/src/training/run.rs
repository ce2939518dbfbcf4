use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::SliceRandom;

use super::config::{Schedule, TrainConfig};
use super::log::{LogRow, Stage, TrainLog};
use super::optim::Optimizer;
use super::step::{batch_grad, stage_weights, StepContext};
use crate::data::{Dataset, EnvironmentId, SplitPlan};
use crate::error::{Error, Result};
use crate::nn::{Architecture, ModelBundle, ReconHead};
use crate::objectives::{CausalSpec, LossComponents, LossWeights, PairIndex};
use crate::seed::{self, str_key};

/// Shuffled mini-batches of `idx`. With `env_block > 0`, batches are built
/// from blocks of samples sharing an environment so that per-environment
/// penalty groups stay populated.
pub fn make_batches(ds: &Dataset, idx: &[usize], batch_size: usize, env_block: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = seed::rng(seed, &[]);
    if idx.is_empty() {
        return Vec::new();
    }
    if env_block == 0 {
        let mut all = idx.to_vec();
        all.shuffle(&mut rng);
        return all.chunks(batch_size).map(<[usize]>::to_vec).collect();
    }
    let mut by_env: BTreeMap<&EnvironmentId, Vec<usize>> = BTreeMap::new();
    for &i in idx {
        by_env.entry(&ds.samples()[i].env).or_default().push(i);
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (_, mut v) in by_env {
        v.shuffle(&mut rng);
        let mut env_blocks: Vec<Vec<usize>> = v.chunks(env_block).map(<[usize]>::to_vec).collect();
        if env_blocks.len() > 1 && env_blocks.last().unwrap().len() < env_block.div_ceil(2) {
            let tail = env_blocks.pop().unwrap();
            env_blocks.last_mut().unwrap().extend(tail);
        }
        blocks.extend(env_blocks);
    }
    blocks.shuffle(&mut rng);
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::new();
    for b in blocks {
        cur.extend(b);
        if cur.len() >= batch_size {
            batches.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        match batches.last_mut() {
            Some(last) if cur.len() < batch_size / 2 => last.extend(cur),
            _ => batches.push(cur),
        }
    }
    batches
}

/// The causal spec as applied to `ds`: every attribute must be tagged, and
/// attributes that were constant when scaled are excluded.
pub fn effective_spec(ds: &Dataset, spec: &CausalSpec) -> Result<CausalSpec> {
    spec.check_against(ds.attribute_schema())?;
    Ok(match ds.scalers() {
        Some(sc) => spec.excluding(sc.constant_attributes(ds.attribute_schema())),
        None => spec.clone(),
    })
}

fn fresh_bundle(ds: &Dataset, cfg: &TrainConfig) -> Result<ModelBundle> {
    let dims = ds
        .tile_dims()
        .ok_or_else(|| Error::Invalid("dataset is empty".into()))?;
    let arch = Architecture::new(cfg.model.clone(), dims, ds.attribute_schema().len())?;
    ModelBundle::init(arch, cfg.seed)
}

fn check_compatible(b: &ModelBundle, ds: &Dataset) -> Result<()> {
    let a = b.architecture();
    if Some((a.in_channels, a.height, a.width)) != ds.tile_dims() {
        return Err(Error::Dimension(format!(
            "bundle expects tiles {:?}, dataset has {:?}",
            (a.in_channels, a.height, a.width),
            ds.tile_dims()
        )));
    }
    if a.n_attributes != ds.attribute_schema().len() {
        return Err(Error::Dimension(format!(
            "bundle expects {} attributes, dataset has {}",
            a.n_attributes,
            ds.attribute_schema().len()
        )));
    }
    Ok(())
}

struct Pass<'a> {
    ds: &'a Dataset,
    spec: &'a CausalSpec,
    cfg: &'a TrainConfig,
    idx: &'a [usize],
    pairs: Option<PairIndex>,
    weights: LossWeights,
    epochs: usize,
    stream: u64,
}

impl Pass<'_> {
    fn run(
        &self,
        bundle: &mut ModelBundle,
        mut opt: Optimizer,
        hook: &mut dyn FnMut(usize, &ModelBundle) -> Result<()>,
    ) -> Result<TrainLog> {
        let cfg = self.cfg;
        let mut weights = self.weights;
        if weights.con > 0.0 && self.pairs.is_none() {
            log::warn!("no contrastive partners available; contrastive term disabled for this pass");
            weights.con = 0.0;
        }
        let stages: &[Stage] = match cfg.schedule {
            Schedule::BilevelAlternate if weights.con > 0.0 => &[Stage::Causal, Stage::Contrastive],
            Schedule::BilevelAlternate => &[Stage::Causal],
            Schedule::Joint => &[Stage::Joint],
        };
        let ctx = StepContext {
            ds: self.ds,
            spec: self.spec,
            kernel: cfg.kernel,
            space: cfg.cacm_space,
            min_group_size: cfg.min_group_size,
            hinge: cfg.hinge_margin,
            contrastive_on_image: cfg.contrastive_on_image,
            pairs: self.pairs.as_ref(),
        };
        let mut pair_rng = seed::rng(cfg.seed, &[self.stream, str_key("pairs")]);
        let mut log = TrainLog {
            rows: Vec::new(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
        };
        let (mut skipped, mut evaluations) = (0usize, 0usize);
        for epoch in 0..self.epochs {
            let batches = make_batches(
                self.ds,
                self.idx,
                cfg.batch_size,
                cfg.env_block,
                seed::derive(cfg.seed, &[self.stream, str_key("batches"), epoch as u64]),
            );
            for &stage in stages {
                let started = Instant::now();
                let w = stage_weights(&weights, stage);
                let mut sum = LossComponents::default();
                let mut total = 0.0;
                let (mut sk, mut ev) = (0, 0);
                for b in &batches {
                    let out = batch_grad(bundle, &ctx, b, &w, &mut pair_rng)?;
                    opt.step(bundle.params_mut(), &out.grads);
                    let c = out.components;
                    sum.mse += c.mse;
                    sum.recon += c.recon;
                    sum.ind += c.ind;
                    sum.cause += c.cause;
                    sum.conf += c.conf;
                    sum.contrastive += c.contrastive;
                    total += out.total;
                    sk += out.skipped;
                    ev += out.evaluations;
                }
                let k = batches.len().max(1) as f64;
                let mean = LossComponents {
                    mse: sum.mse / k,
                    recon: sum.recon / k,
                    ind: sum.ind / k,
                    cause: sum.cause / k,
                    conf: sum.conf / k,
                    contrastive: sum.contrastive / k,
                };
                if !mean.mse.is_finite() || !(total / k).is_finite() {
                    return Err(Error::Invalid(format!("loss diverged at epoch {epoch} ({stage})")));
                }
                log.rows.push(LogRow {
                    epoch,
                    stage,
                    components: mean,
                    total: total / k,
                    skipped: sk,
                    evaluations: ev,
                    seconds: started.elapsed().as_secs_f64(),
                });
                skipped += sk;
                evaluations += ev;
            }
            if evaluations > 0 && skipped as f64 > cfg.max_degenerate_rate * evaluations as f64 {
                return Err(Error::DegenerateGroups {
                    skipped,
                    total: evaluations,
                });
            }
            hook(epoch + 1, bundle)?;
        }
        Ok(log)
    }
}

/// Trains on the split's training environments. Starts from `init` when
/// given (e.g. a pretrained encoder), else from a fresh seeded bundle.
pub fn train(
    ds: &Dataset,
    split: &SplitPlan,
    spec: &CausalSpec,
    cfg: &TrainConfig,
    init: Option<&ModelBundle>,
) -> Result<(ModelBundle, TrainLog)> {
    train_with_hook(ds, split, spec, cfg, init, &mut |_, _| Ok(()))
}

/// As [`train`], calling `hook(epoch, bundle)` after every epoch.
pub fn train_with_hook(
    ds: &Dataset,
    split: &SplitPlan,
    spec: &CausalSpec,
    cfg: &TrainConfig,
    init: Option<&ModelBundle>,
    hook: &mut dyn FnMut(usize, &ModelBundle) -> Result<()>,
) -> Result<(ModelBundle, TrainLog)> {
    cfg.validate()?;
    split.validate()?;
    let idx = ds.indices_in(&split.train_envs);
    if idx.is_empty() {
        return Err(Error::Split("no training samples".into()));
    }
    let spec = effective_spec(ds, spec)?;
    let mut bundle = match init {
        Some(b) => {
            check_compatible(b, ds)?;
            b.clone()
        }
        None => fresh_bundle(ds, cfg)?,
    };
    bundle.set_input_mode(cfg.input_mode);
    bundle.set_attribute_schema(ds.attribute_schema().to_vec());
    bundle.set_scalers(ds.scalers().cloned());
    let pairs = if cfg.contrastive_active() {
        Some(PairIndex::new(ds, &idx)?)
    } else {
        None
    };
    let opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, bundle.params().len());
    let pass = Pass {
        ds,
        spec: &spec,
        cfg,
        idx: &idx,
        pairs,
        weights: cfg.weights,
        epochs: cfg.epochs,
        stream: str_key("train"),
    };
    let log = pass.run(&mut bundle, opt, hook)?;
    Ok((bundle, log))
}

/// Continues training on `env_set` for `finetune_epochs` at `finetune_lr`,
/// with the training-time regularizers unless `finetune_regularizers` is
/// off. Contrastive negatives are drawn from `negative_envs`; without them
/// the contrastive term is dropped because the fine-tune set is usually a
/// single site.
pub fn finetune(
    bundle: &ModelBundle,
    ds: &Dataset,
    env_set: &BTreeSet<EnvironmentId>,
    spec: &CausalSpec,
    cfg: &TrainConfig,
    negative_envs: Option<&BTreeSet<EnvironmentId>>,
) -> Result<(ModelBundle, TrainLog)> {
    if env_set.is_empty() {
        return Err(Error::Split("empty fine-tune environment set".into()));
    }
    let mut out = bundle.clone();
    if cfg.finetune_epochs == 0 {
        return Ok((
            out,
            TrainLog {
                rows: Vec::new(),
                seed: cfg.seed,
                config_hash: cfg.hash(),
            },
        ));
    }
    let mut vcfg = cfg.clone();
    vcfg.epochs = cfg.finetune_epochs;
    vcfg.validate()?;
    check_compatible(bundle, ds)?;
    let idx = ds.indices_in(env_set);
    if idx.is_empty() {
        return Err(Error::Split("fine-tune environments have no samples".into()));
    }
    let spec = effective_spec(ds, spec)?;
    let weights = if cfg.finetune_regularizers {
        cfg.weights
    } else {
        LossWeights::plain()
    };
    let pairs = match negative_envs {
        Some(neg) if weights.con > 0.0 => {
            if let Some(e) = neg.intersection(env_set).next() {
                return Err(Error::Split(format!("environment {e} is both fine-tune and negative pool")));
            }
            let mut pool = idx.clone();
            pool.extend(ds.indices_in(neg));
            Some(PairIndex::new(ds, &pool)?)
        }
        _ => None,
    };
    let mut mask = vec![true; bundle.params().len()];
    for prefix in &cfg.freeze {
        let ranges = bundle.ranges_with_prefix(prefix);
        if ranges.is_empty() {
            return Err(Error::Config(format!("freeze prefix `{prefix}` matches no parameter")));
        }
        for r in ranges {
            mask[r].fill(false);
        }
    }
    let opt = Optimizer::new(cfg.optimizer, cfg.finetune_lr, bundle.params().len()).with_mask(mask);
    let pass = Pass {
        ds,
        spec: &spec,
        cfg: &vcfg,
        idx: &idx,
        pairs,
        weights,
        epochs: cfg.finetune_epochs,
        stream: str_key("finetune"),
    };
    let log = pass.run(&mut out, opt, &mut |_, _| Ok(()))?;
    Ok((out, log))
}

/// Trains the image encoder to reconstruct tiles through a temporary
/// upsampling head, using every sample in `ds`. Returns a fresh bundle
/// (seeded as in [`train`]) carrying the pretrained encoder.
pub fn pretrain_encoder(ds: &Dataset, cfg: &TrainConfig) -> Result<(ModelBundle, TrainLog)> {
    let mut bundle = fresh_bundle(ds, cfg)?;
    bundle.set_attribute_schema(ds.attribute_schema().to_vec());
    bundle.set_scalers(ds.scalers().cloned());
    let mut log = TrainLog {
        rows: Vec::new(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
    };
    if cfg.pretrain_epochs == 0 {
        return Ok((bundle, log));
    }
    if !(cfg.pretrain_lr > 0.0) || cfg.batch_size == 0 {
        return Err(Error::Config("pretraining needs pretrain_lr > 0 and batch_size >= 1".into()));
    }
    let mut head = ReconHead::new(bundle.architecture(), seed::derive(cfg.seed, &[str_key("head")]));
    let mut mask = vec![false; bundle.params().len()];
    for r in bundle.ranges_with_prefix("encoder.") {
        mask[r].fill(true);
    }
    let mut opt = Optimizer::new(cfg.optimizer, cfg.pretrain_lr, mask.len()).with_mask(mask);
    let mut head_opt = Optimizer::new(cfg.optimizer, cfg.pretrain_lr, head.params.len());
    let idx: Vec<usize> = (0..ds.len()).collect();
    let samples = ds.samples();
    for epoch in 0..cfg.pretrain_epochs {
        let started = Instant::now();
        let batches = make_batches(
            ds,
            &idx,
            cfg.batch_size,
            0,
            seed::derive(cfg.seed, &[str_key("pretrain"), epoch as u64]),
        );
        let mut sum = 0.0;
        for b in &batches {
            let mut grads = bundle.zero_grads();
            let mut hgrads = vec![0.0; head.params.len()];
            let mut loss = 0.0;
            for &i in b {
                let x = &samples[i].tile.values;
                let et = bundle.encoder_traced(&samples[i].tile)?;
                let ht = head.forward(&et.phi);
                let scale = 2.0 / (b.len() * x.len()) as f64;
                let g: Vec<f64> = head
                    .output(&ht)
                    .iter()
                    .zip(x)
                    .map(|(o, v)| {
                        loss += (o - v) * (o - v);
                        scale * (o - v)
                    })
                    .collect();
                let gphi = head.backward(&ht, &g, &mut hgrads);
                bundle.encoder_backward(&et, &gphi, &mut grads);
            }
            opt.step(bundle.params_mut(), &grads);
            head_opt.step(&mut head.params, &hgrads);
            sum += loss / (b.len() * samples[b[0]].tile.values.len()) as f64;
        }
        let mean = sum / batches.len() as f64;
        log.rows.push(LogRow {
            epoch,
            stage: Stage::Pretrain,
            components: LossComponents {
                recon: mean,
                ..Default::default()
            },
            total: mean,
            skipped: 0,
            evaluations: 0,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok((bundle, log))
}
