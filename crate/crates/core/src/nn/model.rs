use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{self, Conv3x3, Dense};
use crate::data::{ImageTile, Scalers};
use crate::error::{Error, Result};

/// Whether soil attributes are fed to the OM decoder at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Attribute embedding replaced by zeros.
    #[default]
    SatelliteOnly,
    SatellitePlusAttrs,
}

impl InputMode {
    pub fn label(&self) -> &'static str {
        match self {
            InputMode::SatelliteOnly => "Satellite",
            InputMode::SatellitePlusAttrs => "Satellite, Sensor",
        }
    }
}

/// User-facing network widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Output channels of the three conv blocks.
    pub conv_channels: [usize; 3],
    pub embed_dim: usize,
    pub attr_hidden: usize,
    pub attr_embed_dim: usize,
    pub decoder_hidden: [usize; 2],
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            conv_channels: [16, 32, 64],
            embed_dim: 32,
            attr_hidden: 16,
            attr_embed_dim: 8,
            decoder_hidden: [64, 32],
        }
    }
}

/// Widths plus the data-dependent input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub model: ModelConfig,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub n_attributes: usize,
}

impl Architecture {
    pub fn new(model: ModelConfig, tile_dims: (usize, usize, usize), n_attributes: usize) -> Result<Self> {
        let (c, h, w) = tile_dims;
        let arch = Architecture {
            model,
            in_channels: c,
            height: h,
            width: w,
            n_attributes,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if self.in_channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Dimension("empty input shape".into()));
        }
        if self.height % 8 != 0 || self.width % 8 != 0 {
            return Err(Error::Dimension(format!(
                "tile {}x{} is not divisible by 8 (three 2x2 pools)",
                self.height, self.width
            )));
        }
        if m.embed_dim < 2 {
            return Err(Error::Config("embed_dim must be >= 2".into()));
        }
        if m.conv_channels.iter().any(|&c| c == 0) || m.decoder_hidden.iter().any(|&c| c == 0) {
            return Err(Error::Config("layer widths must be >= 1".into()));
        }
        Ok(())
    }

    pub fn embed_dim(&self) -> usize {
        self.model.embed_dim
    }

    pub fn attr_embed_dim(&self) -> usize {
        self.model.attr_embed_dim
    }

    /// Length of the conditioned embedding fed to the decoder.
    pub fn conditioned_dim(&self) -> usize {
        self.model.embed_dim + self.model.attr_embed_dim
    }
}

/// Named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
    pub fan_in: usize,
    pub is_bias: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub entries: Vec<ParamEntry>,
    pub total: usize,
    pub conv: [Conv3x3; 3],
    pub proj: Dense,
    pub attr_enc: [Dense; 2],
    pub attr_dec: [Dense; 2],
    pub dec: [Dense; 3],
}

#[derive(Default)]
struct Builder {
    entries: Vec<ParamEntry>,
    next: usize,
}

impl Builder {
    fn push(&mut self, name: String, shape: Vec<usize>, fan_in: usize, is_bias: bool) -> usize {
        let len = shape.iter().product();
        let offset = self.next;
        self.entries.push(ParamEntry {
            name,
            shape,
            offset,
            len,
            fan_in,
            is_bias,
        });
        self.next += len;
        offset
    }

    fn dense(&mut self, name: &str, inp: usize, out: usize) -> Dense {
        let w = self.push(format!("{name}.weight"), vec![out, inp], inp, false);
        let b = self.push(format!("{name}.bias"), vec![out], inp, true);
        Dense { inp, out, w, b }
    }

    fn conv(&mut self, name: &str, in_c: usize, out_c: usize, h: usize, w: usize) -> Conv3x3 {
        let wt = self.push(format!("{name}.weight"), vec![out_c, in_c, 3, 3], in_c * 9, false);
        let b = self.push(format!("{name}.bias"), vec![out_c], in_c * 9, true);
        Conv3x3 {
            in_c,
            out_c,
            h,
            w,
            wt,
            b,
        }
    }
}

impl Layout {
    pub fn for_arch(a: &Architecture) -> Layout {
        let m = &a.model;
        let mut b = Builder::default();
        let [c1, c2, c3] = m.conv_channels;
        let (h, w) = (a.height, a.width);
        let conv = [
            b.conv("encoder.conv1", a.in_channels, c1, h, w),
            b.conv("encoder.conv2", c1, c2, h / 2, w / 2),
            b.conv("encoder.conv3", c2, c3, h / 4, w / 4),
        ];
        let flat = c3 * (h / 8) * (w / 8);
        let proj = b.dense("encoder.proj", flat, m.embed_dim);
        let attr_enc = [
            b.dense("attr.enc1", a.n_attributes, m.attr_hidden),
            b.dense("attr.enc2", m.attr_hidden, m.attr_embed_dim),
        ];
        let attr_dec = [
            b.dense("attr.dec1", m.attr_embed_dim, m.attr_hidden),
            b.dense("attr.dec2", m.attr_hidden, a.n_attributes),
        ];
        let [d1, d2] = m.decoder_hidden;
        let dec = [
            b.dense("decoder.fc1", a.conditioned_dim(), d1),
            b.dense("decoder.fc2", d1, d2),
            b.dense("decoder.out", d2, 1),
        ];
        Layout {
            entries: b.entries,
            total: b.next,
            conv,
            proj,
            attr_enc,
            attr_dec,
            dec,
        }
    }
}

/// Intermediate values of one encoder pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    input: Vec<f64>,
    /// Post-ReLU conv outputs.
    acts: [Vec<f64>; 3],
    pooled: [Vec<f64>; 3],
    pool_idx: [Vec<usize>; 3],
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AttrTrace {
    x: Vec<f64>,
    h1: Vec<f64>,
    pub z: Vec<f64>,
    h2: Vec<f64>,
    pub recon: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DecoderTrace {
    e: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub out: f64,
}

/// Concatenates image and attribute embeddings.
pub fn condition(phi: &[f64], z: &[f64]) -> Vec<f64> {
    let mut e = Vec::with_capacity(phi.len() + z.len());
    e.extend_from_slice(phi);
    e.extend_from_slice(z);
    e
}

/// All model components with their parameters, configuration and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub(crate) arch: Architecture,
    pub(crate) seed: u64,
    pub(crate) input_mode: InputMode,
    pub(crate) attribute_schema: Vec<String>,
    pub(crate) scalers: Option<Scalers>,
    pub(crate) layout: Layout,
    pub(crate) params: Vec<f64>,
}

impl ModelBundle {
    /// Fresh bundle with uniform fan-in initialization (`U(+-sqrt(6 / fan_in))`
    /// for weights, zero biases) drawn from `seed`, one stream per tensor.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::for_arch(&arch);
        let mut params = vec![0.0; layout.total];
        for e in &layout.entries {
            if e.is_bias || e.fan_in == 0 {
                continue;
            }
            let mut rng = crate::seed::rng(seed, &[crate::seed::str_key("init"), crate::seed::str_key(&e.name)]);
            let bound = (6.0 / e.fan_in as f64).sqrt();
            for p in &mut params[e.offset..e.offset + e.len] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(ModelBundle {
            arch,
            seed,
            input_mode: InputMode::default(),
            attribute_schema: Vec::new(),
            scalers: None,
            layout,
            params,
        })
    }

    /// Bundle with every parameter set to zero.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        let mut b = Self::init(arch, 0)?;
        b.params.fill(0.0);
        Ok(b)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_mode(&self) -> InputMode {
        self.input_mode
    }

    pub fn set_input_mode(&mut self, mode: InputMode) {
        self.input_mode = mode;
    }

    pub fn attribute_schema(&self) -> &[String] {
        &self.attribute_schema
    }

    pub fn set_attribute_schema(&mut self, schema: Vec<String>) {
        self.attribute_schema = schema;
    }

    /// Scalers of the data the bundle was trained on.
    pub fn scalers(&self) -> Option<&Scalers> {
        self.scalers.as_ref()
    }

    pub fn set_scalers(&mut self, scalers: Option<Scalers>) {
        self.scalers = scalers;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_entries(&self) -> &[ParamEntry] {
        &self.layout.entries
    }

    pub fn param(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| &self.params[e.offset..e.offset + e.len])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let e = self.layout.entries.iter().find(|e| e.name == name)?.clone();
        Some(&mut self.params[e.offset..e.offset + e.len])
    }

    /// Flat index ranges of parameters whose name starts with `prefix`.
    pub fn ranges_with_prefix(&self, prefix: &str) -> Vec<std::ops::Range<usize>> {
        self.layout
            .entries
            .iter()
            .filter(|e| e.name.starts_with(prefix))
            .map(|e| e.offset..e.offset + e.len)
            .collect()
    }

    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    fn check_tile(&self, tile: &ImageTile) -> Result<()> {
        let a = &self.arch;
        if tile.dims() != (a.in_channels, a.height, a.width) {
            return Err(Error::Dimension(format!(
                "tile {:?} does not match encoder input {:?}",
                tile.dims(),
                (a.in_channels, a.height, a.width)
            )));
        }
        Ok(())
    }

    // ---- image encoder ----

    pub fn encoder_forward(&self, tile: &ImageTile) -> Result<Vec<f64>> {
        Ok(self.encoder_traced(tile)?.phi)
    }

    pub fn encoder_traced(&self, tile: &ImageTile) -> Result<EncoderTrace> {
        self.check_tile(tile)?;
        Ok(self.encoder_traced_values(&tile.values))
    }

    pub(crate) fn encoder_traced_values(&self, input: &[f64]) -> EncoderTrace {
        let p = &self.params;
        let l = &self.layout;
        let mut x: Vec<f64> = input.to_vec();
        let mut acts: [Vec<f64>; 3] = Default::default();
        let mut pooled: [Vec<f64>; 3] = Default::default();
        let mut pool_idx: [Vec<usize>; 3] = Default::default();
        for k in 0..3 {
            let conv = &l.conv[k];
            let mut y = vec![0.0; conv.out_c * conv.h * conv.w];
            conv.forward(p, &x, &mut y);
            layers::relu_inplace(&mut y);
            let (py, pidx) = layers::maxpool2(&y, conv.out_c, conv.h, conv.w);
            acts[k] = y;
            x = py.clone();
            pooled[k] = py;
            pool_idx[k] = pidx;
        }
        let mut phi = vec![0.0; l.proj.out];
        l.proj.forward(p, &pooled[2], &mut phi);
        EncoderTrace {
            input: input.to_vec(),
            acts,
            pooled,
            pool_idx,
            phi,
        }
    }

    /// Accumulates encoder parameter gradients given `d loss / d phi`.
    pub fn encoder_backward(&self, t: &EncoderTrace, gphi: &[f64], grads: &mut [f64]) {
        self.encoder_backward_input(t, gphi, grads, false);
    }

    /// As [`encoder_backward`](Self::encoder_backward); also returns the
    /// gradient with respect to the input tile when `want_input` is set.
    pub(crate) fn encoder_backward_input(
        &self,
        t: &EncoderTrace,
        gphi: &[f64],
        grads: &mut [f64],
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let p = &self.params;
        let l = &self.layout;
        let mut g = vec![0.0; l.proj.inp];
        l.proj.backward(p, grads, &t.pooled[2], gphi, Some(&mut g));
        for k in (0..3).rev() {
            let conv = &l.conv[k];
            let mut ga = vec![0.0; conv.out_c * conv.h * conv.w];
            layers::maxpool2_backward(&g, &t.pool_idx[k], &mut ga);
            layers::relu_backward(&t.acts[k], &mut ga);
            let input = if k == 0 { &t.input } else { &t.pooled[k - 1] };
            if k == 0 && !want_input {
                conv.backward(p, grads, input, &ga, None);
                return None;
            }
            let mut gx = vec![0.0; conv.in_c * conv.h * conv.w];
            conv.backward(p, grads, input, &ga, Some(&mut gx));
            g = gx;
        }
        Some(g)
    }

    // ---- attribute autoencoder ----

    pub fn attribute_forward(&self, attrs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = self.attribute_traced(attrs)?;
        Ok((t.z, t.recon))
    }

    pub fn attribute_traced(&self, attrs: &[f64]) -> Result<AttrTrace> {
        if attrs.len() != self.arch.n_attributes {
            return Err(Error::Dimension(format!(
                "{} attributes given, model expects {}",
                attrs.len(),
                self.arch.n_attributes
            )));
        }
        let p = &self.params;
        let [e1, e2] = &self.layout.attr_enc;
        let [d1, d2] = &self.layout.attr_dec;
        let mut h1 = vec![0.0; e1.out];
        e1.forward(p, attrs, &mut h1);
        layers::relu_inplace(&mut h1);
        let mut z = vec![0.0; e2.out];
        e2.forward(p, &h1, &mut z);
        let mut h2 = vec![0.0; d1.out];
        d1.forward(p, &z, &mut h2);
        layers::relu_inplace(&mut h2);
        let mut recon = vec![0.0; d2.out];
        d2.forward(p, &h2, &mut recon);
        Ok(AttrTrace {
            x: attrs.to_vec(),
            h1,
            z,
            h2,
            recon,
        })
    }

    /// Accumulates attribute-autoencoder gradients from `d loss / d z` and
    /// `d loss / d recon` (either may be `None`).
    pub fn attribute_backward(
        &self,
        t: &AttrTrace,
        gz: Option<&[f64]>,
        grecon: Option<&[f64]>,
        grads: &mut [f64],
    ) {
        let p = &self.params;
        let [e1, e2] = &self.layout.attr_enc;
        let [d1, d2] = &self.layout.attr_dec;
        let mut gz_total = gz.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; e2.out]);
        if let Some(gr) = grecon {
            let mut gh2 = vec![0.0; d2.inp];
            d2.backward(p, grads, &t.h2, gr, Some(&mut gh2));
            layers::relu_backward(&t.h2, &mut gh2);
            let mut gzd = vec![0.0; d1.inp];
            d1.backward(p, grads, &t.z, &gh2, Some(&mut gzd));
            for (a, b) in gz_total.iter_mut().zip(&gzd) {
                *a += b;
            }
        }
        if gz.is_none() && grecon.is_none() {
            return;
        }
        let mut gh1 = vec![0.0; e2.inp];
        e2.backward(p, grads, &t.h1, &gz_total, Some(&mut gh1));
        layers::relu_backward(&t.h1, &mut gh1);
        e1.backward(p, grads, &t.x, &gh1, None);
    }

    /// Attribute embedding used at satellite-only inference.
    pub fn zero_attribute_embedding(&self) -> Vec<f64> {
        vec![0.0; self.arch.model.attr_embed_dim]
    }

    // ---- OM decoder ----

    pub fn decode_om(&self, e: &[f64]) -> Result<f64> {
        Ok(self.decoder_traced(e)?.out)
    }

    pub fn decoder_traced(&self, e: &[f64]) -> Result<DecoderTrace> {
        if e.len() != self.arch.conditioned_dim() {
            return Err(Error::Dimension(format!(
                "decoder expects embedding of length {}, got {}",
                self.arch.conditioned_dim(),
                e.len()
            )));
        }
        let p = &self.params;
        let [f1, f2, f3] = &self.layout.dec;
        let mut h1 = vec![0.0; f1.out];
        f1.forward(p, e, &mut h1);
        layers::relu_inplace(&mut h1);
        let mut h2 = vec![0.0; f2.out];
        f2.forward(p, &h1, &mut h2);
        layers::relu_inplace(&mut h2);
        let mut out = [0.0];
        f3.forward(p, &h2, &mut out);
        Ok(DecoderTrace {
            e: e.to_vec(),
            h1,
            h2,
            out: out[0],
        })
    }

    /// Accumulates decoder gradients and returns `d loss / d e`.
    pub fn decoder_backward(&self, t: &DecoderTrace, gout: f64, grads: &mut [f64]) -> Vec<f64> {
        let p = &self.params;
        let [f1, f2, f3] = &self.layout.dec;
        let mut gh2 = vec![0.0; f3.inp];
        f3.backward(p, grads, &t.h2, &[gout], Some(&mut gh2));
        layers::relu_backward(&t.h2, &mut gh2);
        let mut gh1 = vec![0.0; f2.inp];
        f2.backward(p, grads, &t.h1, &gh2, Some(&mut gh1));
        layers::relu_backward(&t.h1, &mut gh1);
        let mut ge = vec![0.0; f1.inp];
        f1.backward(p, grads, &t.e, &gh1, Some(&mut ge));
        ge
    }

    /// End-to-end OM prediction; `attrs = None` substitutes the zero
    /// attribute embedding.
    pub fn predict(&self, tile: &ImageTile, attrs: Option<&[f64]>) -> Result<f64> {
        let phi = self.encoder_forward(tile)?;
        let z = match attrs {
            Some(a) => self.attribute_forward(a)?.0,
            None => self.zero_attribute_embedding(),
        };
        self.decode_om(&condition(&phi, &z))
    }
}
