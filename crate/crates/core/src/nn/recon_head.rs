//! Temporary upsampling-convolution head that reconstructs tiles from image
//! embeddings during encoder pretraining. Discarded afterwards.

use rand::Rng;

use super::layers::{self, Conv3x3, Dense};
use super::model::Architecture;

#[derive(Debug, Clone)]
pub struct ReconHead {
    fc: Dense,
    /// Applied after each 2x upsampling, coarse to fine.
    convs: [Conv3x3; 3],
    base: (usize, usize, usize),
    pub params: Vec<f64>,
}

pub struct HeadTrace {
    phi: Vec<f64>,
    /// Post-ReLU fc output (the coarsest map).
    x0: Vec<f64>,
    /// Upsampled inputs to each conv.
    ups: [Vec<f64>; 3],
    /// Conv outputs; post-ReLU for the first two, linear for the last.
    outs: [Vec<f64>; 3],
}

impl ReconHead {
    pub fn new(arch: &Architecture, seed: u64) -> Self {
        let [c1, c2, c3] = arch.model.conv_channels;
        let (h, w) = (arch.height, arch.width);
        let mut next = 0;
        let mut alloc = |n: usize| {
            let o = next;
            next += n;
            o
        };
        let base = (c3, h / 8, w / 8);
        let flat = c3 * (h / 8) * (w / 8);
        let d = arch.model.embed_dim;
        let fc = Dense {
            inp: d,
            out: flat,
            w: alloc(d * flat),
            b: alloc(flat),
        };
        let mut conv = |inc: usize, outc: usize, hh: usize, ww: usize| Conv3x3 {
            in_c: inc,
            out_c: outc,
            h: hh,
            w: ww,
            wt: alloc(outc * inc * 9),
            b: alloc(outc),
        };
        let convs = [
            conv(c3, c2, h / 4, w / 4),
            conv(c2, c1, h / 2, w / 2),
            conv(c1, arch.in_channels, h, w),
        ];
        let mut params = vec![0.0; next];
        let mut rng = crate::seed::rng(seed, &[crate::seed::str_key("recon-head")]);
        let mut fill = |off: usize, len: usize, fan_in: usize| {
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[off..off + len] {
                *p = rng.random_range(-bound..bound);
            }
        };
        fill(fc.w, d * flat, d);
        for c in &convs {
            fill(c.wt, c.out_c * c.in_c * 9, c.in_c * 9);
        }
        ReconHead {
            fc,
            convs,
            base,
            params,
        }
    }

    pub fn forward(&self, phi: &[f64]) -> HeadTrace {
        let p = &self.params;
        let mut x0 = vec![0.0; self.fc.out];
        self.fc.forward(p, phi, &mut x0);
        layers::relu_inplace(&mut x0);
        let (mut c, mut h, mut w) = self.base;
        let mut cur = x0.clone();
        let mut ups: [Vec<f64>; 3] = Default::default();
        let mut outs: [Vec<f64>; 3] = Default::default();
        for k in 0..3 {
            let up = layers::upsample2(&cur, c, h, w);
            h *= 2;
            w *= 2;
            let conv = &self.convs[k];
            let mut y = vec![0.0; conv.out_c * h * w];
            conv.forward(p, &up, &mut y);
            if k < 2 {
                layers::relu_inplace(&mut y);
            }
            c = conv.out_c;
            ups[k] = up;
            cur = y.clone();
            outs[k] = y;
        }
        HeadTrace {
            phi: phi.to_vec(),
            x0,
            ups,
            outs,
        }
    }

    pub fn output<'a>(&self, t: &'a HeadTrace) -> &'a [f64] {
        &t.outs[2]
    }

    /// Accumulates head gradients into `grads` and returns `d loss / d phi`.
    pub fn backward(&self, t: &HeadTrace, grecon: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let p = &self.params;
        let mut g = grecon.to_vec();
        for k in (0..3).rev() {
            let conv = &self.convs[k];
            if k < 2 {
                layers::relu_backward(&t.outs[k], &mut g);
            }
            let mut gup = vec![0.0; conv.in_c * conv.h * conv.w];
            conv.backward(p, grads, &t.ups[k], &g, Some(&mut gup));
            g = layers::upsample2_backward(&gup, conv.in_c, conv.h / 2, conv.w / 2);
        }
        layers::relu_backward(&t.x0, &mut g);
        let mut gphi = vec![0.0; self.fc.inp];
        self.fc.backward(p, grads, &t.phi, &g, Some(&mut gphi));
        gphi
    }
}
