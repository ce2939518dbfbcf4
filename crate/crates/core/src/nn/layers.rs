//! Layer kernels operating on slices of a flat parameter vector.
//!
//! Every layer records offsets into the owning parameter vector; forward
//! passes read `params`, backward passes accumulate into a gradient vector of
//! the same layout.

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fully connected layer, weights row-major `[out][inp]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub inp: usize,
    pub out: usize,
    pub w: usize,
    pub b: usize,
}

impl Dense {
    pub fn forward(&self, params: &[f64], x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inp);
        debug_assert_eq!(y.len(), self.out);
        let w = &params[self.w..self.w + self.inp * self.out];
        let b = &params[self.b..self.b + self.out];
        for o in 0..self.out {
            y[o] = b[o] + dot(&w[o * self.inp..(o + 1) * self.inp], x);
        }
    }

    /// Accumulates parameter gradients; writes the input gradient into `gx`
    /// (overwriting) when given.
    pub fn backward(
        &self,
        params: &[f64],
        grads: &mut [f64],
        x: &[f64],
        gy: &[f64],
        gx: Option<&mut [f64]>,
    ) {
        let n = self.inp * self.out;
        {
            let gw = &mut grads[self.w..self.w + n];
            for o in 0..self.out {
                if gy[o] != 0.0 {
                    axpy(gy[o], x, &mut gw[o * self.inp..(o + 1) * self.inp]);
                }
            }
        }
        {
            let gb = &mut grads[self.b..self.b + self.out];
            for (g, d) in gb.iter_mut().zip(gy) {
                *g += d;
            }
        }
        if let Some(gx) = gx {
            gx.fill(0.0);
            let w = &params[self.w..self.w + n];
            for o in 0..self.out {
                if gy[o] != 0.0 {
                    axpy(gy[o], &w[o * self.inp..(o + 1) * self.inp], gx);
                }
            }
        }
    }
}

/// 3x3 convolution, stride 1, zero padding 1. Weights `[out][in][3][3]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conv3x3 {
    pub in_c: usize,
    pub out_c: usize,
    pub h: usize,
    pub w: usize,
    pub wt: usize,
    pub b: usize,
}

impl Conv3x3 {
    fn k(&self) -> usize {
        self.in_c * 9
    }

    /// Unfolds the padded input into `[in_c * 9][h * w]` columns.
    fn im2col(&self, x: &[f64], col: &mut [f64]) {
        let (h, w) = (self.h, self.w);
        let hw = h * w;
        col.fill(0.0);
        for c in 0..self.in_c {
            let plane = &x[c * hw..(c + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &mut col[(c * 9 + ky * 3 + kx) * hw..(c * 9 + ky * 3 + kx + 1) * hw];
                    let dy = ky as isize - 1;
                    let dx = kx as isize - 1;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    for r in 0..h {
                        let sr = r as isize + dy;
                        if sr < 0 || sr >= h as isize {
                            continue;
                        }
                        let sr = sr as usize;
                        let src = &plane[sr * w..(sr + 1) * w];
                        let dst = &mut row[r * w..(r + 1) * w];
                        for xx in x0..x1 {
                            dst[xx] = src[(xx as isize + dx) as usize];
                        }
                    }
                }
            }
        }
    }

    fn col2im_add(&self, col: &[f64], gx: &mut [f64]) {
        let (h, w) = (self.h, self.w);
        let hw = h * w;
        for c in 0..self.in_c {
            let plane = &mut gx[c * hw..(c + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &col[(c * 9 + ky * 3 + kx) * hw..(c * 9 + ky * 3 + kx + 1) * hw];
                    let dy = ky as isize - 1;
                    let dx = kx as isize - 1;
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (w as isize - dx).min(w as isize) as usize;
                    for r in 0..h {
                        let sr = r as isize + dy;
                        if sr < 0 || sr >= h as isize {
                            continue;
                        }
                        let sr = sr as usize;
                        let src = &row[r * w..(r + 1) * w];
                        let dst = &mut plane[sr * w..(sr + 1) * w];
                        for xx in x0..x1 {
                            dst[(xx as isize + dx) as usize] += src[xx];
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, params: &[f64], x: &[f64], y: &mut [f64]) {
        let hw = self.h * self.w;
        let k = self.k();
        let mut col = vec![0.0; k * hw];
        self.im2col(x, &mut col);
        let wt = &params[self.wt..self.wt + self.out_c * k];
        let b = &params[self.b..self.b + self.out_c];
        for o in 0..self.out_c {
            let out = &mut y[o * hw..(o + 1) * hw];
            out.fill(b[o]);
            let wrow = &wt[o * k..(o + 1) * k];
            for (kk, &wv) in wrow.iter().enumerate() {
                if wv != 0.0 {
                    axpy(wv, &col[kk * hw..(kk + 1) * hw], out);
                }
            }
        }
    }

    pub fn backward(
        &self,
        params: &[f64],
        grads: &mut [f64],
        x: &[f64],
        gy: &[f64],
        gx: Option<&mut [f64]>,
    ) {
        let hw = self.h * self.w;
        let k = self.k();
        let mut col = vec![0.0; k * hw];
        self.im2col(x, &mut col);
        {
            let gw = &mut grads[self.wt..self.wt + self.out_c * k];
            for o in 0..self.out_c {
                let g = &gy[o * hw..(o + 1) * hw];
                let grow = &mut gw[o * k..(o + 1) * k];
                for (kk, gv) in grow.iter_mut().enumerate() {
                    *gv += dot(g, &col[kk * hw..(kk + 1) * hw]);
                }
            }
        }
        {
            let gb = &mut grads[self.b..self.b + self.out_c];
            for o in 0..self.out_c {
                gb[o] += gy[o * hw..(o + 1) * hw].iter().sum::<f64>();
            }
        }
        if let Some(gx) = gx {
            let wt = &params[self.wt..self.wt + self.out_c * k];
            col.fill(0.0);
            for o in 0..self.out_c {
                let g = &gy[o * hw..(o + 1) * hw];
                for kk in 0..k {
                    let wv = wt[o * k + kk];
                    if wv != 0.0 {
                        axpy(wv, g, &mut col[kk * hw..(kk + 1) * hw]);
                    }
                }
            }
            gx.fill(0.0);
            self.col2im_add(&col, gx);
        }
    }
}

pub fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries where the activation output was not positive.
pub fn relu_backward(out: &[f64], g: &mut [f64]) {
    for (gi, &o) in g.iter_mut().zip(out) {
        if o <= 0.0 {
            *gi = 0.0;
        }
    }
}

/// 2x2 max pool with stride 2 on `[c][h][w]`; returns the pooled map and the
/// flat source index of every maximum. First maximum wins ties.
pub fn maxpool2(x: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut y = vec![0.0; c * oh * ow];
    let mut idx = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for r in 0..oh {
            for q in 0..ow {
                let base = ch * h * w;
                let cands = [
                    base + 2 * r * w + 2 * q,
                    base + 2 * r * w + 2 * q + 1,
                    base + (2 * r + 1) * w + 2 * q,
                    base + (2 * r + 1) * w + 2 * q + 1,
                ];
                let mut best = cands[0];
                for &cnd in &cands[1..] {
                    if x[cnd] > x[best] {
                        best = cnd;
                    }
                }
                let o = ch * oh * ow + r * ow + q;
                y[o] = x[best];
                idx[o] = best;
            }
        }
    }
    (y, idx)
}

pub fn maxpool2_backward(gy: &[f64], idx: &[usize], gx: &mut [f64]) {
    gx.fill(0.0);
    for (g, &i) in gy.iter().zip(idx) {
        gx[i] += g;
    }
}

/// Nearest-neighbour 2x upsampling of `[c][h][w]`.
pub fn upsample2(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut y = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for r in 0..oh {
            for q in 0..ow {
                y[ch * oh * ow + r * ow + q] = x[ch * h * w + (r / 2) * w + q / 2];
            }
        }
    }
    y
}

pub fn upsample2_backward(gy: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut gx = vec![0.0; c * h * w];
    for ch in 0..c {
        for r in 0..oh {
            for q in 0..ow {
                gx[ch * h * w + (r / 2) * w + q / 2] += gy[ch * oh * ow + r * ow + q];
            }
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct 3x3 convolution used as an oracle for the im2col path.
    fn naive_conv(l: &Conv3x3, p: &[f64], x: &[f64]) -> Vec<f64> {
        let (h, w) = (l.h, l.w);
        let mut y = vec![0.0; l.out_c * h * w];
        for o in 0..l.out_c {
            for r in 0..h {
                for q in 0..w {
                    let mut acc = p[l.b + o];
                    for c in 0..l.in_c {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let (sr, sq) = (r as isize + ky as isize - 1, q as isize + kx as isize - 1);
                                if sr >= 0 && sq >= 0 && (sr as usize) < h && (sq as usize) < w {
                                    acc += p[l.wt + ((o * l.in_c + c) * 3 + ky) * 3 + kx]
                                        * x[c * h * w + sr as usize * w + sq as usize];
                                }
                            }
                        }
                    }
                    y[o * h * w + r * w + q] = acc;
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_direct_sum() {
        let l = Conv3x3 { in_c: 2, out_c: 3, h: 4, w: 5, wt: 0, b: 54 };
        let p: Vec<f64> = (0..57).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let x: Vec<f64> = (0..40).map(|i| ((i * 13 % 17) as f64 - 8.0) / 9.0).collect();
        let mut y = vec![0.0; 60];
        l.forward(&p, &x, &mut y);
        let want = naive_conv(&l, &p, &x);
        for (a, b) in y.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_picks_max() {
        let x = vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, -1.0, 7.0];
        let (y, idx) = maxpool2(&x, 1, 2, 4);
        assert_eq!(y, vec![5.0, 7.0]);
        assert_eq!(idx, vec![1, 7]);
    }

    #[test]
    fn upsample_adjoint() {
        // <up(x), g> == <x, up^T(g)>
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.3).collect();
        let g: Vec<f64> = (0..48).map(|i| (i as f64).sin()).collect();
        let lhs = dot(&upsample2(&x, 3, 2, 2), &g);
        let rhs = dot(&x, &upsample2_backward(&g, 3, 2, 2));
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
