//! Shared helpers for the integration tests.
#![allow(dead_code)]

use cacmda::data::ImageTile;
use cacmda::data::{Dataset, SplitPlan};
use cacmda::nn::{condition, Architecture, ModelBundle, ModelConfig};
use cacmda::seed::{derive, str_key};
use cacmda::training::{make_batches, Optimizer, TrainConfig};
use cacmda::synth::SynthConfig;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_REL_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// `|a - b| / max(|a|, |b|)` over whole vectors; 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x` for the listed coordinates.
pub fn central_diff(x: &mut [f64], coords: &[usize], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    coords
        .iter()
        .map(|&i| {
            let orig = x[i];
            x[i] = orig + FD_STEP;
            let up = f(x);
            x[i] = orig - FD_STEP;
            let down = f(x);
            x[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        conv_channels: [3, 4, 4],
        embed_dim: 5,
        attr_hidden: 6,
        attr_embed_dim: 3,
        decoder_hidden: [6, 5],
    }
}

pub fn tiny_bundle(channels: usize, size: usize, n_attr: usize, seed: u64) -> ModelBundle {
    let arch = Architecture::new(tiny_model_config(), (channels, size, size), n_attr).unwrap();
    ModelBundle::init(arch, seed).unwrap()
}

pub fn random_tile(r: &mut ChaCha8Rng, c: usize, s: usize) -> ImageTile {
    ImageTile::new(c, s, s, (0..c * s * s).map(|_| r.random_range(0.0..1.0)).collect()).unwrap()
}

/// Small synthetic dataset for fast end-to-end tests.
pub fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        n_sites: 4,
        years_per_site: 2,
        samples_per_env: 10,
        tile_size: 8,
        channels: 4,
        seed,
        ..SynthConfig::default()
    }
}

/// Squared MMD by an explicit double loop over every kernel pair.
pub fn mmd2_oracle(x: &[Vec<f64>], y: &[Vec<f64>], sigma: f64, unbiased: bool) -> f64 {
    let k = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        (-d2 / (2.0 * sigma * sigma)).exp()
    };
    let (n, m) = (x.len() as f64, y.len() as f64);
    let mut sxx = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if unbiased && i == j {
                continue;
            }
            sxx += k(&x[i], &x[j]);
        }
    }
    let mut syy = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if unbiased && i == j {
                continue;
            }
            syy += k(&y[i], &y[j]);
        }
    }
    let mut sxy = 0.0;
    for a in x {
        for b in y {
            sxy += k(a, b);
        }
    }
    let (dx, dy) = if unbiased { (n * (n - 1.0), m * (m - 1.0)) } else { (n * n, m * m) };
    sxx / dx + syy / dy - 2.0 * sxy / (n * m)
}

pub fn cloud(r: &mut impl Rng, n: usize, d: usize, shift: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0) + shift).collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn param_coords(b: &ModelBundle, prefix: &str, r: &mut ChaCha8Rng, max: usize) -> Vec<usize> {
    let all: Vec<usize> = b.ranges_with_prefix(prefix).into_iter().flatten().collect();
    if all.len() <= max {
        return all;
    }
    (0..max).map(|_| all[r.random_range(0..all.len())]).collect()
}

/// Relative error of encoder parameter gradients for a random linear
/// functional of the embedding.
pub fn encoder_grad_error(inst: u64) -> f64 {
    let mut r = rng(100 + inst);
    let mut b = tiny_bundle(3, 8, 4, inst);
    let tile = random_tile(&mut r, 3, 8);
    let w = normal_vec(&mut r, b.architecture().embed_dim());
    let t = b.encoder_traced(&tile).unwrap();
    let mut g = b.zero_grads();
    b.encoder_backward(&t, &w, &mut g);
    let cs = param_coords(&b, "encoder.", &mut r, 120);
    let probe = b.clone();
    let fd = central_diff(b.params_mut(), &cs, |p| {
        let mut m = probe.clone();
        m.params_mut().copy_from_slice(p);
        dot(&m.encoder_forward(&tile).unwrap(), &w)
    });
    let an: Vec<f64> = cs.iter().map(|&i| g[i]).collect();
    rel_err(&an, &fd)
}

/// Worst relative error of decoder gradients: parameters and input.
pub fn decoder_grad_error(inst: u64) -> f64 {
    let mut r = rng(200 + inst);
    let mut b = tiny_bundle(3, 8, 4, 50 + inst);
    let dim = b.architecture().conditioned_dim();
    let mut e = normal_vec(&mut r, dim);
    let t = b.decoder_traced(&e).unwrap();
    let mut g = b.zero_grads();
    let ge = b.decoder_backward(&t, 1.0, &mut g);
    let cs = param_coords(&b, "decoder.", &mut r, usize::MAX);
    let probe = b.clone();
    let e2 = e.clone();
    let fd = central_diff(b.params_mut(), &cs, |p| {
        let mut m = probe.clone();
        m.params_mut().copy_from_slice(p);
        m.decode_om(&e2).unwrap()
    });
    let an: Vec<f64> = cs.iter().map(|&i| g[i]).collect();
    let all: Vec<usize> = (0..dim).collect();
    let fd_e = central_diff(&mut e, &all, |x| b.decode_om(x).unwrap());
    rel_err(&an, &fd).max(rel_err(&ge, &fd_e))
}

/// Relative error of attribute-autoencoder gradients through both the
/// embedding and the reconstruction.
pub fn attribute_grad_error(inst: u64) -> f64 {
    let mut r = rng(300 + inst);
    let n_attr = 5;
    let mut b = tiny_bundle(3, 8, n_attr, 80 + inst);
    let attrs = normal_vec(&mut r, n_attr);
    let wz = normal_vec(&mut r, b.architecture().attr_embed_dim());
    let wr = normal_vec(&mut r, n_attr);
    let t = b.attribute_traced(&attrs).unwrap();
    let mut g = b.zero_grads();
    b.attribute_backward(&t, Some(&wz), Some(&wr), &mut g);
    let cs = param_coords(&b, "attr.", &mut r, usize::MAX);
    let probe = b.clone();
    let fd = central_diff(b.params_mut(), &cs, |p| {
        let mut m = probe.clone();
        m.params_mut().copy_from_slice(p);
        let (z, recon) = m.attribute_forward(&attrs).unwrap();
        dot(&z, &wz) + dot(&recon, &wr)
    });
    let an: Vec<f64> = cs.iter().map(|&i| g[i]).collect();
    rel_err(&an, &fd)
}

/// Relative error of the squared-MMD gradient with respect to every point;
/// alternates between the two estimators.
pub fn mmd2_grad_error(inst: u64) -> f64 {
    use cacmda::objectives::{mmd2, mmd2_grad, KernelSpec, MmdEstimator};
    let mut r = rng(400 + inst);
    let (n, m, d) = (r.random_range(2..7), r.random_range(2..7), r.random_range(1..5));
    let x: Vec<Vec<f64>> = (0..n).map(|_| normal_vec(&mut r, d)).collect();
    let y: Vec<Vec<f64>> = (0..m).map(|_| normal_vec(&mut r, d)).collect();
    let est = if inst % 2 == 0 { MmdEstimator::Unbiased } else { MmdEstimator::Biased };
    let k = KernelSpec::fixed(r.random_range(0.5..2.0)).with_estimator(est);
    let (_, gx, gy) = mmd2_grad(&x, &y, &k).unwrap();
    let mut flat: Vec<f64> = x.iter().chain(&y).flatten().copied().collect();
    let all: Vec<usize> = (0..flat.len()).collect();
    let fd = central_diff(&mut flat, &all, |v| {
        let xs: Vec<&[f64]> = v[..n * d].chunks(d).collect();
        let ys: Vec<&[f64]> = v[n * d..].chunks(d).collect();
        mmd2(&xs, &ys, &k).unwrap()
    });
    let an: Vec<f64> = gx.iter().chain(&gy).flatten().copied().collect();
    rel_err(&an, &fd)
}

/// Relative error of the raw triplet-loss gradient.
pub fn contrastive_grad_error(inst: u64) -> f64 {
    use cacmda::objectives::{contrastive_grad, contrastive_loss};
    let mut r = rng(500 + inst);
    let d = r.random_range(1..8);
    let (za, zp, zn) = (normal_vec(&mut r, d), normal_vec(&mut r, d), normal_vec(&mut r, d));
    let g = contrastive_grad(&za, &zp, &zn, None).unwrap();
    let mut flat: Vec<f64> = [za, zp, zn].concat();
    let all: Vec<usize> = (0..3 * d).collect();
    let fd = central_diff(&mut flat, &all, |v| contrastive_loss(&v[..d], &v[d..2 * d], &v[2 * d..]).unwrap());
    let an = [g.ga, g.gp, g.gn].concat();
    rel_err(&an, &fd)
}

pub fn bits(b: &ModelBundle) -> Vec<u64> {
    b.params().iter().map(|v| v.to_bits()).collect()
}

/// Plain MSE minibatch training written against the public layer API.
pub fn plain_reference(ds: &Dataset, plan: &SplitPlan, cfg: &TrainConfig) -> ModelBundle {
    let dims = ds.tile_dims().unwrap();
    let arch = Architecture::new(cfg.model.clone(), dims, ds.attribute_schema().len()).unwrap();
    let mut b = ModelBundle::init(arch, cfg.seed).unwrap();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, b.params().len());
    let idx = ds.indices_in(&plan.train_envs);
    let d = b.architecture().embed_dim();
    for epoch in 0..cfg.epochs {
        let seed = derive(cfg.seed, &[str_key("train"), str_key("batches"), epoch as u64]);
        for batch in make_batches(ds, &idx, cfg.batch_size, cfg.env_block, seed) {
            let n = batch.len() as f64;
            let mut grads = b.zero_grads();
            for &i in &batch {
                let s = &ds.samples()[i];
                let enc = b.encoder_traced(&s.tile).unwrap();
                let dec = b.decoder_traced(&condition(&enc.phi, &b.zero_attribute_embedding())).unwrap();
                let g = 1.0 * 2.0 * (dec.out - s.om) / n;
                let ge = b.decoder_backward(&dec, g, &mut grads);
                let gphi: Vec<f64> = ge[..d].iter().map(|v| 0.0 + 1.0 * v).collect();
                b.encoder_backward(&enc, &gphi, &mut grads);
            }
            opt.step(b.params_mut(), &grads);
        }
    }
    b
}

/// Small CLI config that trains in well under a second.
pub const TINY_TOML: &str = r#"
name = "tiny"
[synth]
n_sites = 4
years_per_site = 2
samples_per_env = 10
tile_size = 8
channels = 4
[train]
epochs = 2
batch_size = 20
env_block = 5
finetune_epochs = 1
checkpoint_every = 1
[train.model]
conv_channels = [3, 4, 4]
embed_dim = 5
attr_hidden = 6
attr_embed_dim = 3
decoder_hidden = [6, 5]
[forest]
n_trees = 4
[experiment]
n_seeds = 2
"#;

pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(rd) = std::fs::read_dir(dir) {
        for e in rd {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.extend(files_under(&p));
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

pub fn assert_same_tree(a: &Path, b: &Path) {
    let fa = files_under(a);
    let fb = files_under(b);
    let rel = |v: &[PathBuf], root: &Path| v.iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect::<Vec<_>>();
    assert_eq!(rel(&fa, a), rel(&fb, b));
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{x:?} differs");
    }
}
