//! Loss and gradient of one mini-batch.

use std::collections::HashMap;

use rand::Rng;

use super::log::Stage;
use crate::data::{Dataset, EnvironmentId};
use crate::error::Result;
use crate::nn::{condition, AttrTrace, DecoderTrace, EncoderTrace, InputMode, ModelBundle};
use crate::objectives::{
    cacm_penalty_grad, contrastive_grad, total_loss, CacmSpace, CausalSpec, KernelSpec,
    LossComponents, LossWeights, PairIndex, PenaltyBatch,
};

/// Everything fixed across the steps of one run.
pub(crate) struct StepContext<'a> {
    pub ds: &'a Dataset,
    pub spec: &'a CausalSpec,
    pub kernel: KernelSpec,
    pub space: CacmSpace,
    pub min_group_size: usize,
    pub hinge: Option<f64>,
    pub contrastive_on_image: bool,
    pub pairs: Option<&'a PairIndex>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct StepOutput {
    pub components: LossComponents,
    pub total: f64,
    pub skipped: usize,
    pub evaluations: usize,
    pub grads: Vec<f64>,
}

/// Weights with the terms inactive in `stage` zeroed.
pub(crate) fn stage_weights(w: &LossWeights, stage: Stage) -> LossWeights {
    match stage {
        Stage::Causal => LossWeights { con: 0.0, ..*w },
        Stage::Contrastive => LossWeights {
            recon: 0.0,
            cacm: 0.0,
            ..*w
        },
        Stage::Joint => *w,
        Stage::Pretrain => LossWeights::plain(),
    }
}

fn add(a: &mut [f64], b: &[f64], s: f64) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

/// Loss terms and parameter gradient of the weighted objective on `batch`
/// (dataset indices). `rng` draws contrastive partners.
pub(crate) fn batch_grad<R: Rng>(
    bundle: &ModelBundle,
    ctx: &StepContext<'_>,
    batch: &[usize],
    w: &LossWeights,
    rng: &mut R,
) -> Result<StepOutput> {
    let samples = ctx.ds.samples();
    let n = batch.len();
    let plus = bundle.input_mode() == InputMode::SatellitePlusAttrs;
    let use_con = w.con > 0.0 && ctx.pairs.is_some();
    let use_recon = w.recon > 0.0 && bundle.architecture().n_attributes > 0;
    let use_cacm = w.cacm > 0.0;
    let need_attr = plus || use_recon || use_con;
    let d = bundle.architecture().embed_dim();

    // Slots: batch samples first, then contrastive partners outside the batch.
    let mut slots: Vec<usize> = batch.to_vec();
    let mut slot_of: HashMap<usize, usize> = batch.iter().enumerate().map(|(s, &i)| (i, s)).collect();
    let mut triples = Vec::new();
    if use_con {
        let index = ctx.pairs.expect("pair index");
        for &a in batch {
            let t = index.sample(ctx.ds, a, rng)?;
            for i in [t.positive, t.negative] {
                slot_of.entry(i).or_insert_with(|| {
                    slots.push(i);
                    slots.len() - 1
                });
            }
            triples.push((slot_of[&t.anchor], slot_of[&t.positive], slot_of[&t.negative]));
        }
    }

    let need_enc = |s: usize| s < n || ctx.contrastive_on_image;
    let enc: Vec<Option<EncoderTrace>> = slots
        .iter()
        .enumerate()
        .map(|(s, &i)| need_enc(s).then(|| bundle.encoder_traced(&samples[i].tile)).transpose())
        .collect::<Result<_>>()?;
    let attr: Vec<Option<AttrTrace>> = slots
        .iter()
        .enumerate()
        .map(|(s, &i)| {
            (need_attr && (s < n || use_con))
                .then(|| bundle.attribute_traced(&samples[i].attrs))
                .transpose()
        })
        .collect::<Result<_>>()?;
    let zero_z = bundle.zero_attribute_embedding();
    let dec: Vec<DecoderTrace> = (0..n)
        .map(|s| {
            let phi = &enc[s].as_ref().expect("batch encoder trace").phi;
            let z = if plus { &attr[s].as_ref().expect("attribute trace").z } else { &zero_z };
            bundle.decoder_traced(&condition(phi, z))
        })
        .collect::<Result<_>>()?;

    let mut c = LossComponents::default();
    let mut out = StepOutput::default();

    // task
    let mut g_pred = vec![0.0; n];
    for s in 0..n {
        let r = dec[s].out - samples[batch[s]].om;
        c.mse += r * r;
        g_pred[s] = w.task * 2.0 * r / n as f64;
    }
    c.mse /= n as f64;

    // attribute reconstruction
    let mut g_recon: Vec<Option<Vec<f64>>> = vec![None; slots.len()];
    if use_recon {
        let a = bundle.architecture().n_attributes as f64;
        let scale = w.recon * 2.0 / (n as f64 * a);
        let mut sum = 0.0;
        for s in 0..n {
            let t = attr[s].as_ref().expect("attribute trace");
            let x = &samples[batch[s]].attrs;
            let g: Vec<f64> = t.recon.iter().zip(x).map(|(r, v)| {
                sum += (r - v) * (r - v);
                scale * (r - v)
            }).collect();
            g_recon[s] = Some(g);
        }
        c.recon = sum / (n as f64 * a);
    }

    let mut g_phi: Vec<Vec<f64>> = vec![vec![0.0; d]; slots.len()];
    let mut g_z: Vec<Vec<f64>> = vec![zero_z.clone(); slots.len()];

    // causal penalty
    if use_cacm {
        let emb: Vec<Vec<f64>> = match ctx.space {
            CacmSpace::Encoding => (0..n).map(|s| enc[s].as_ref().unwrap().phi.clone()).collect(),
            CacmSpace::Output => dec.iter().map(|t| vec![t.out]).collect(),
        };
        let attrs: Vec<&[f64]> = batch.iter().map(|&i| samples[i].attrs.as_slice()).collect();
        let y: Vec<f64> = batch.iter().map(|&i| samples[i].om).collect();
        let envs: Vec<&EnvironmentId> = batch.iter().map(|&i| &samples[i].env).collect();
        let pb = PenaltyBatch {
            embeddings: &emb,
            attrs: &attrs,
            schema: ctx.ds.attribute_schema(),
            y: &y,
            envs: &envs,
        };
        let (br, ge) = cacm_penalty_grad(&pb, ctx.spec, &ctx.kernel, ctx.min_group_size)?;
        c.ind = br.ind_term;
        c.cause = br.cause_term;
        c.conf = br.conf_term;
        out.skipped = br.skipped_constraints.len();
        out.evaluations = br.evaluations();
        for s in 0..n {
            match ctx.space {
                CacmSpace::Encoding => add(&mut g_phi[s], &ge[s], w.cacm),
                CacmSpace::Output => g_pred[s] += w.cacm * ge[s][0],
            }
        }
    }

    // contrastive
    if use_con && !triples.is_empty() {
        let scale = w.con / triples.len() as f64;
        let mut sum = 0.0;
        for &(a, p, q) in &triples {
            let za = &attr[a].as_ref().unwrap().z;
            let zp = &attr[p].as_ref().unwrap().z;
            let zn = &attr[q].as_ref().unwrap().z;
            let tg = contrastive_grad(za, zp, zn, ctx.hinge)?;
            sum += tg.value;
            add(&mut g_z[a], &tg.ga, scale);
            add(&mut g_z[p], &tg.gp, scale);
            add(&mut g_z[q], &tg.gn, scale);
            if ctx.contrastive_on_image {
                let pa = &enc[a].as_ref().unwrap().phi;
                let pp = &enc[p].as_ref().unwrap().phi;
                let pn = &enc[q].as_ref().unwrap().phi;
                let tg = contrastive_grad(pa, pp, pn, ctx.hinge)?;
                sum += tg.value;
                add(&mut g_phi[a], &tg.ga, scale);
                add(&mut g_phi[p], &tg.gp, scale);
                add(&mut g_phi[q], &tg.gn, scale);
            }
        }
        c.contrastive = sum / triples.len() as f64;
    }

    // backward
    let mut grads = bundle.zero_grads();
    for s in 0..slots.len() {
        if s < n {
            let ge = bundle.decoder_backward(&dec[s], g_pred[s], &mut grads);
            add(&mut g_phi[s], &ge[..d], 1.0);
            if plus {
                add(&mut g_z[s], &ge[d..], 1.0);
            }
        }
        if let Some(t) = &enc[s] {
            bundle.encoder_backward(t, &g_phi[s], &mut grads);
        }
        if let Some(t) = &attr[s] {
            let gz = (plus || use_con).then_some(g_z[s].as_slice());
            bundle.attribute_backward(t, gz, g_recon[s].as_deref(), &mut grads);
        }
    }

    out.total = total_loss(&c, w);
    out.components = c;
    out.grads = grads;
    Ok(out)
}
