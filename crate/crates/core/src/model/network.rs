//! Residual convolutional regressor with a flat parameter vector.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use num_traits::{Float, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::{Checkpoint, NamedArray};
use crate::error::{Error, Result};

/// Floating-point type the network can run in.
pub trait Scalar:
    Float + FromPrimitive + AddAssign + MulAssign + Sum + Send + Sync + Debug + Display + Default + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub(crate) fn lit<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("representable constant")
}

#[inline]
pub(crate) fn to64<F: Scalar>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvRegressorConfig {
    pub input_size: usize,
    pub input_channels: usize,
    /// Side and stride of the patchifying stem convolution.
    pub stem_kernel: usize,
    pub block_widths: Vec<usize>,
    pub blocks_per_stage: usize,
    pub embedding_dim: usize,
    pub output_dim: usize,
    pub seed: u64,
}

impl ConvRegressorConfig {
    /// Full-size tiles: 224×224×3, two stages and a 512-dim embedding.
    pub fn standard(output_dim: usize, seed: u64) -> Self {
        ConvRegressorConfig {
            input_size: 224,
            input_channels: 3,
            stem_kernel: 8,
            block_widths: vec![8, 16],
            blocks_per_stage: 1,
            embedding_dim: 512,
            output_dim,
            seed,
        }
    }

    /// 8×8 inputs for gradient checks and oracle comparisons.
    pub fn tiny(output_dim: usize, seed: u64) -> Self {
        ConvRegressorConfig {
            input_size: 8,
            input_channels: 3,
            stem_kernel: 2,
            block_widths: vec![2, 3],
            blocks_per_stage: 1,
            embedding_dim: 5,
            output_dim,
            seed,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_size * self.input_size * self.input_channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.output_dim == 0 {
            return Err(Error::schema("embedding and output dimensions must be positive"));
        }
        if self.block_widths.is_empty() || self.blocks_per_stage == 0 {
            return Err(Error::schema("at least one stage with one block is required"));
        }
        if self.block_widths.contains(&0) || self.input_channels == 0 {
            return Err(Error::schema("channel counts must be positive"));
        }
        if self.stem_kernel == 0 || !self.input_size.is_multiple_of(self.stem_kernel) {
            return Err(Error::schema(format!(
                "input size {} is not a multiple of the stem kernel {}",
                self.input_size, self.stem_kernel
            )));
        }
        let mut side = self.input_size / self.stem_kernel;
        for _ in 1..self.block_widths.len() {
            if side < 2 || !side.is_multiple_of(2) {
                return Err(Error::schema(format!("feature map of side {side} cannot be halved")));
            }
            side /= 2;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ConvLayer {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub in_hw: usize,
    pub out_hw: usize,
    pub w: usize,
    pub b: usize,
}

impl ConvLayer {
    fn in_len(&self) -> usize {
        self.cin * self.in_hw * self.in_hw
    }

    fn out_len(&self) -> usize {
        self.cout * self.out_hw * self.out_hw
    }

    /// Output positions whose tap at kernel offset `k_off` lands inside the input.
    #[inline]
    fn valid_range(&self, k_off: usize) -> (usize, usize) {
        let lo = if self.pad > k_off {
            (self.pad - k_off).div_ceil(self.stride)
        } else {
            0
        };
        let hi = if self.in_hw + self.pad > k_off {
            (self.in_hw + self.pad - k_off - 1) / self.stride + 1
        } else {
            0
        };
        (lo.min(self.out_hw), hi.min(self.out_hw))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub proj: Option<ConvLayer>,
}

/// Layer geometry and parameter offsets derived from a config.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub(crate) stem: ConvLayer,
    pub(crate) blocks: Vec<Block>,
    pub(crate) features: usize,
    pub(crate) final_hw: usize,
    pub(crate) embed_w: usize,
    pub(crate) embed_b: usize,
    pub(crate) head_w: usize,
    pub(crate) head_b: usize,
    pub entries: Vec<ParamEntry>,
    pub total: usize,
}

struct LayoutBuilder {
    entries: Vec<ParamEntry>,
    total: usize,
}

impl LayoutBuilder {
    fn push(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.total;
        self.total += shape.iter().product::<usize>();
        self.entries.push(ParamEntry { name, shape, offset });
        offset
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, stride: usize, pad: usize, in_hw: usize) -> ConvLayer {
        let w = self.push(format!("{name}.weight"), vec![cout, cin, k, k]);
        let b = self.push(format!("{name}.bias"), vec![cout]);
        ConvLayer {
            cin,
            cout,
            k,
            stride,
            pad,
            in_hw,
            out_hw: (in_hw + 2 * pad - k) / stride + 1,
            w,
            b,
        }
    }
}

impl Architecture {
    pub fn new(config: &ConvRegressorConfig) -> Result<Self> {
        config.validate()?;
        let mut lb = LayoutBuilder {
            entries: Vec::new(),
            total: 0,
        };
        let c0 = config.block_widths[0];
        let stem = lb.conv(
            "stem",
            config.input_channels,
            c0,
            config.stem_kernel,
            config.stem_kernel,
            0,
            config.input_size,
        );
        let mut blocks = Vec::new();
        let (mut ch, mut hw) = (c0, stem.out_hw);
        for (s, &width) in config.block_widths.iter().enumerate() {
            for b in 0..config.blocks_per_stage {
                let stride = if s > 0 && b == 0 { 2 } else { 1 };
                let name = format!("stage{s}.block{b}");
                let conv1 = lb.conv(&format!("{name}.conv1"), ch, width, 3, stride, 1, hw);
                let conv2 = lb.conv(&format!("{name}.conv2"), width, width, 3, 1, 1, conv1.out_hw);
                let proj = (stride != 1 || ch != width).then(|| lb.conv(&format!("{name}.proj"), ch, width, 1, stride, 0, hw));
                ch = width;
                hw = conv1.out_hw;
                blocks.push(Block { conv1, conv2, proj });
            }
        }
        let e = config.embedding_dim;
        let embed_w = lb.push("embed.weight".into(), vec![ch, e]);
        let embed_b = lb.push("embed.bias".into(), vec![e]);
        let head_w = lb.push("head.weight".into(), vec![e, config.output_dim]);
        let head_b = lb.push("head.bias".into(), vec![config.output_dim]);
        Ok(Architecture {
            stem,
            blocks,
            features: ch,
            final_hw: hw,
            embed_w,
            embed_b,
            head_w,
            head_b,
            entries: lb.entries,
            total: lb.total,
        })
    }

    /// Number of leading parameters that belong to the feature extractor.
    pub fn extractor_len(&self) -> usize {
        self.head_w
    }
}

/// Activations kept from a forward pass for backpropagation.
pub(crate) struct Trace<F> {
    stem: Vec<F>,
    blocks: Vec<(Vec<F>, Vec<F>)>,
    pooled: Vec<F>,
    pub embed: Vec<F>,
    pub out: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F: Scalar> {
    pub config: ConvRegressorConfig,
    pub arch: Architecture,
    pub data: Vec<F>,
}

fn head_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x4845_4144_5345_4544)
}

impl<F: Scalar> ModelParams<F> {
    /// Seeded initialization: He-scaled uniform for convolutions and the
    /// embedding layer, uniform(±1/√E) for the head, zero biases.
    pub fn init(config: &ConvRegressorConfig) -> Result<Self> {
        let arch = Architecture::new(config)?;
        let mut data = vec![F::zero(); arch.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for entry in &arch.entries {
            if entry.offset >= arch.head_w || entry.shape.len() == 1 {
                continue;
            }
            let fan_in: usize = if entry.shape.len() == 4 {
                entry.shape[1..].iter().product()
            } else {
                entry.shape[0]
            };
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in &mut data[entry.offset..entry.offset + entry.len()] {
                *v = lit(rng.random_range(-bound..bound));
            }
        }
        let mut params = ModelParams {
            config: config.clone(),
            arch,
            data,
        };
        params.init_head(config.seed);
        Ok(params)
    }

    fn init_head(&mut self, seed: u64) {
        let bound = 1.0 / (self.config.embedding_dim as f64).sqrt();
        let mut rng = head_rng(seed);
        let (w, b) = (self.arch.head_w, self.arch.head_b);
        for v in &mut self.data[w..b] {
            *v = lit(rng.random_range(-bound..bound));
        }
        for v in &mut self.data[b..] {
            *v = F::zero();
        }
    }

    /// Same extractor, fresh head of width `output_dim` initialised from `seed`.
    pub fn replace_head(&self, output_dim: usize, seed: u64) -> Result<Self> {
        let mut config = self.config.clone();
        config.output_dim = output_dim;
        config.seed = seed;
        let arch = Architecture::new(&config)?;
        let mut data = vec![F::zero(); arch.total];
        let n = self.arch.extractor_len();
        data[..n].copy_from_slice(&self.data[..n]);
        let mut out = ModelParams { config, arch, data };
        out.init_head(seed);
        Ok(out)
    }

    pub fn extractor(&self) -> &[F] {
        &self.data[..self.arch.extractor_len()]
    }

    pub fn entry(&self, name: &str) -> Option<&[F]> {
        let e = self.arch.entries.iter().find(|e| e.name == name)?;
        Some(&self.data[e.offset..e.offset + e.len()])
    }

    pub fn head_weight(&self) -> &[F] {
        &self.data[self.arch.head_w..self.arch.head_b]
    }

    pub fn head_bias(&self) -> &[F] {
        &self.data[self.arch.head_b..]
    }

    pub(crate) fn head_mut(&mut self) -> (&mut [F], &mut [F]) {
        let (w, b) = self.data[self.arch.head_w..].split_at_mut(self.arch.head_b - self.arch.head_w);
        (w, b)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        ModelParams {
            config: self.config.clone(),
            arch: self.arch.clone(),
            data: self.data.iter().map(|v| lit(to64(*v))).collect(),
        }
    }

    fn check_input(&self, tile: &[F]) -> Result<()> {
        if tile.len() != self.config.input_len() {
            return Err(Error::schema(format!(
                "tile has {} values, model expects {}×{}×{}",
                tile.len(),
                self.config.input_size,
                self.config.input_size,
                self.config.input_channels
            )));
        }
        Ok(())
    }

    pub fn forward(&self, tile: &[F]) -> Result<Vec<F>> {
        self.check_input(tile)?;
        Ok(self.trace(tile).out)
    }

    /// Penultimate activations: the E-dim embedding the head reads.
    pub fn embed(&self, tile: &[F]) -> Result<Vec<F>> {
        self.check_input(tile)?;
        let mut t = self.trace_extractor(tile);
        Ok(std::mem::take(&mut t.embed))
    }

    /// Applies the linear head to an embedding.
    pub fn apply_head(&self, embedding: &[F]) -> Vec<F> {
        let o = self.config.output_dim;
        let mut out = self.head_bias().to_vec();
        for (e, row) in embedding.iter().zip(self.head_weight().chunks_exact(o)) {
            for (y, w) in out.iter_mut().zip(row) {
                *y += *w * *e;
            }
        }
        out
    }

    fn trace_extractor(&self, tile: &[F]) -> Trace<F> {
        let p = &self.data;
        let arch = &self.arch;
        let mut stem = vec![F::zero(); arch.stem.out_len()];
        patch_forward(p, &arch.stem, tile, &mut stem);
        relu(&mut stem);
        let mut blocks: Vec<(Vec<F>, Vec<F>)> = Vec::with_capacity(arch.blocks.len());
        for block in &arch.blocks {
            let input = blocks.last().map(|b| &b.1).unwrap_or(&stem);
            let mut h1 = vec![F::zero(); block.conv1.out_len()];
            conv_forward(p, &block.conv1, input, &mut h1);
            relu(&mut h1);
            let mut out = vec![F::zero(); block.conv2.out_len()];
            conv_forward(p, &block.conv2, &h1, &mut out);
            match &block.proj {
                Some(proj) => {
                    let mut sc = vec![F::zero(); proj.out_len()];
                    conv_forward(p, proj, input, &mut sc);
                    add_assign(&mut out, &sc);
                }
                None => add_assign(&mut out, input),
            }
            relu(&mut out);
            blocks.push((h1, out));
        }
        let last = blocks.last().map(|b| &b.1).unwrap_or(&stem);
        let plane = arch.final_hw * arch.final_hw;
        let inv = lit::<F>(1.0 / plane as f64);
        let pooled: Vec<F> = last.chunks_exact(plane).map(|c| c.iter().copied().sum::<F>() * inv).collect();
        let e = self.config.embedding_dim;
        let mut embed = p[arch.embed_b..arch.embed_b + e].to_vec();
        for (g, row) in pooled.iter().zip(p[arch.embed_w..arch.embed_b].chunks_exact(e)) {
            for (y, w) in embed.iter_mut().zip(row) {
                *y += *w * *g;
            }
        }
        relu(&mut embed);
        Trace {
            stem,
            blocks,
            pooled,
            embed,
            out: Vec::new(),
        }
    }

    pub(crate) fn trace(&self, tile: &[F]) -> Trace<F> {
        let mut t = self.trace_extractor(tile);
        t.out = self.apply_head(&t.embed);
        t
    }

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
    pub(crate) fn backward(&self, tile: &[F], t: &Trace<F>, dout: &[F], grad: &mut [F]) {
        let p = &self.data;
        let arch = &self.arch;
        let (e, o) = (self.config.embedding_dim, self.config.output_dim);

        let mut de = vec![F::zero(); e];
        for (k, (ev, dev)) in t.embed.iter().zip(de.iter_mut()).enumerate() {
            let row = arch.head_w + k * o;
            for j in 0..o {
                grad[row + j] += *ev * dout[j];
                *dev += p[row + j] * dout[j];
            }
        }
        for j in 0..o {
            grad[arch.head_b + j] += dout[j];
        }
        for (d, v) in de.iter_mut().zip(&t.embed) {
            if *v <= F::zero() {
                *d = F::zero();
            }
        }
        let mut dg = vec![F::zero(); arch.features];
        for (c, (gv, dgv)) in t.pooled.iter().zip(dg.iter_mut()).enumerate() {
            let row = arch.embed_w + c * e;
            for k in 0..e {
                grad[row + k] += *gv * de[k];
                *dgv += p[row + k] * de[k];
            }
        }
        for k in 0..e {
            grad[arch.embed_b + k] += de[k];
        }

        let plane = arch.final_hw * arch.final_hw;
        let inv = lit::<F>(1.0 / plane as f64);
        let mut dcur: Vec<F> = dg.iter().flat_map(|d| std::iter::repeat_n(*d * inv, plane)).collect();
        for (i, block) in arch.blocks.iter().enumerate().rev() {
            let (h1, out) = &t.blocks[i];
            let input = if i == 0 { &t.stem } else { &t.blocks[i - 1].1 };
            mask_relu(&mut dcur, out);
            let mut dh1 = vec![F::zero(); h1.len()];
            conv_backward(p, grad, &block.conv2, h1, &dcur, Some(&mut dh1));
            mask_relu(&mut dh1, h1);
            let mut din = vec![F::zero(); input.len()];
            conv_backward(p, grad, &block.conv1, input, &dh1, Some(&mut din));
            match &block.proj {
                Some(proj) => conv_backward(p, grad, proj, input, &dcur, Some(&mut din)),
                None => add_assign(&mut din, &dcur),
            }
            dcur = din;
        }
        mask_relu(&mut dcur, &t.stem);
        patch_backward(grad, &arch.stem, tile, &dcur);
    }

    /// Mean squared error over outputs for one sample; adds its gradient to `grad`.
    pub fn loss_and_grad(&self, tile: &[F], target: &[F], grad: &mut [F]) -> Result<F> {
        self.check_input(tile)?;
        if target.len() != self.config.output_dim {
            return Err(Error::schema(format!(
                "target has {} values, model outputs {}",
                target.len(),
                self.config.output_dim
            )));
        }
        let t = self.trace(tile);
        let scale = lit::<F>(1.0 / self.config.output_dim as f64);
        let mut loss = F::zero();
        let dout: Vec<F> = t
            .out
            .iter()
            .zip(target)
            .map(|(y, y0)| {
                let r = *y - *y0;
                loss += r * r * scale;
                r * lit(2.0) * scale
            })
            .collect();
        self.backward(tile, &t, &dout, grad);
        Ok(loss)
    }

    pub fn loss(&self, tile: &[F], target: &[F]) -> Result<F> {
        let out = self.forward(tile)?;
        let scale = lit::<F>(1.0 / self.config.output_dim as f64);
        Ok(out.iter().zip(target).map(|(y, y0)| (*y - *y0) * (*y - *y0) * scale).sum())
    }

    pub fn to_checkpoint(&self, extra: serde_json::Value) -> Checkpoint {
        let header = serde_json::json!({ "config": self.config, "extra": extra });
        let arrays = self
            .arch
            .entries
            .iter()
            .map(|e| {
                let data = self.data[e.offset..e.offset + e.len()]
                    .iter()
                    .map(|v| v.to_f32().unwrap_or(f32::NAN))
                    .collect();
                NamedArray::new(e.name.clone(), e.shape.clone(), data)
            })
            .collect();
        Checkpoint {
            header: header.to_string(),
            arrays,
        }
    }

    /// Rebuilds parameters from a checkpoint; returns the stored extra header value too.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, serde_json::Value)> {
        let header: serde_json::Value = serde_json::from_str(&ck.header)?;
        let config: ConvRegressorConfig = serde_json::from_value(header["config"].clone())?;
        let arch = Architecture::new(&config)?;
        let mut data = vec![F::zero(); arch.total];
        for e in &arch.entries {
            let a = ck.require(&e.name)?;
            if a.shape != e.shape {
                return Err(Error::schema(format!(
                    "checkpoint array {} has shape {:?}, expected {:?}",
                    e.name, a.shape, e.shape
                )));
            }
            for (d, v) in data[e.offset..e.offset + e.len()].iter_mut().zip(&a.data) {
                *d = lit(*v as f64);
            }
        }
        Ok((ModelParams { config, arch, data }, header["extra"].clone()))
    }
}

fn relu<F: Scalar>(v: &mut [F]) {
    for x in v {
        if *x < F::zero() {
            *x = F::zero();
        }
    }
}

fn mask_relu<F: Scalar>(d: &mut [F], activation: &[F]) {
    for (g, a) in d.iter_mut().zip(activation) {
        if *a <= F::zero() {
            *g = F::zero();
        }
    }
}

fn add_assign<F: Scalar>(a: &mut [F], b: &[F]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += *y;
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
#[inline]
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = [F::zero(); 8];
    let (ac, bc) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: F = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| *x * *y).sum();
    for (x, y) in ac.zip(bc) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().copied().sum::<F>() + tail
}

/// Non-overlapping k×k patches laid out as [patch][channel][ky][kx].
fn patches<F: Scalar>(l: &ConvLayer, input: &[F]) -> Vec<F> {
    let (ih, oh, k) = (l.in_hw, l.out_hw, l.k);
    let mut out = Vec::with_capacity(oh * oh * l.cin * k * k);
    for oy in 0..oh {
        for ox in 0..oh {
            for ic in 0..l.cin {
                for ky in 0..k {
                    let start = ic * ih * ih + (oy * k + ky) * ih + ox * k;
                    out.extend_from_slice(&input[start..start + k]);
                }
            }
        }
    }
    out
}

/// Stem convolution whose stride equals its kernel, as one dot product per patch.
fn patch_forward<F: Scalar>(p: &[F], l: &ConvLayer, input: &[F], out: &mut [F]) {
    debug_assert!(l.stride == l.k && l.pad == 0);
    let plen = l.cin * l.k * l.k;
    let cols = patches(l, input);
    let n = l.out_hw * l.out_hw;
    for oc in 0..l.cout {
        let w = &p[l.w + oc * plen..l.w + (oc + 1) * plen];
        for (o, patch) in out[oc * n..(oc + 1) * n].iter_mut().zip(cols.chunks_exact(plen)) {
            *o = p[l.b + oc] + dot(w, patch);
        }
    }
}

fn patch_backward<F: Scalar>(grad: &mut [F], l: &ConvLayer, input: &[F], dout: &[F]) {
    let plen = l.cin * l.k * l.k;
    let cols = patches(l, input);
    let n = l.out_hw * l.out_hw;
    for oc in 0..l.cout {
        let d = &dout[oc * n..(oc + 1) * n];
        grad[l.b + oc] += d.iter().copied().sum::<F>();
        let gw = &mut grad[l.w + oc * plen..l.w + (oc + 1) * plen];
        for (dv, patch) in d.iter().zip(cols.chunks_exact(plen)) {
            if *dv == F::zero() {
                continue;
            }
            for (g, x) in gw.iter_mut().zip(patch) {
                *g += *dv * *x;
            }
        }
    }
}

/// Unfolds the receptive fields into rows indexed by (channel, ky, kx), each
/// holding one value per output position (zero where the tap is padding).
fn im2col<F: Scalar>(l: &ConvLayer, input: &[F]) -> Vec<F> {
    let (ih, oh, k, s) = (l.in_hw, l.out_hw, l.k, l.stride);
    let n = oh * oh;
    let mut cols = vec![F::zero(); l.cin * k * k * n];
    for ic in 0..l.cin {
        let x = &input[ic * ih * ih..(ic + 1) * ih * ih];
        for ky in 0..k {
            let (y0, y1) = l.valid_range(ky);
            for kx in 0..k {
                let (x0, x1) = l.valid_range(kx);
                let row = &mut cols[((ic * k + ky) * k + kx) * n..((ic * k + ky) * k + kx + 1) * n];
                for oy in y0..y1 {
                    let iy = oy * s + ky - l.pad;
                    let xrow = &x[iy * ih..(iy + 1) * ih];
                    let dst = &mut row[oy * oh..(oy + 1) * oh];
                    for ox in x0..x1 {
                        dst[ox] = xrow[ox * s + kx - l.pad];
                    }
                }
            }
        }
    }
    cols
}

fn col2im<F: Scalar>(l: &ConvLayer, cols: &[F], din: &mut [F]) {
    let (ih, oh, k, s) = (l.in_hw, l.out_hw, l.k, l.stride);
    let n = oh * oh;
    for ic in 0..l.cin {
        let x = &mut din[ic * ih * ih..(ic + 1) * ih * ih];
        for ky in 0..k {
            let (y0, y1) = l.valid_range(ky);
            for kx in 0..k {
                let (x0, x1) = l.valid_range(kx);
                let row = &cols[((ic * k + ky) * k + kx) * n..((ic * k + ky) * k + kx + 1) * n];
                for oy in y0..y1 {
                    let iy = oy * s + ky - l.pad;
                    let src = &row[oy * oh..(oy + 1) * oh];
                    let xrow = &mut x[iy * ih..(iy + 1) * ih];
                    for ox in x0..x1 {
                        xrow[ox * s + kx - l.pad] += src[ox];
                    }
                }
            }
        }
    }
}

fn conv_forward<F: Scalar>(p: &[F], l: &ConvLayer, input: &[F], out: &mut [F]) {
    let n = l.out_hw * l.out_hw;
    let r = l.cin * l.k * l.k;
    let cols = im2col(l, input);
    for oc in 0..l.cout {
        let o = &mut out[oc * n..(oc + 1) * n];
        o.fill(p[l.b + oc]);
        let w = &p[l.w + oc * r..l.w + (oc + 1) * r];
        for (wv, row) in w.iter().zip(cols.chunks_exact(n)) {
            for (a, b) in o.iter_mut().zip(row) {
                *a += *wv * *b;
            }
        }
    }
}

fn conv_backward<F: Scalar>(
    p: &[F],
    grad: &mut [F],
    l: &ConvLayer,
    input: &[F],
    dout: &[F],
    din: Option<&mut [F]>,
) {
    debug_assert_eq!(input.len(), l.in_len());
    let n = l.out_hw * l.out_hw;
    let r = l.cin * l.k * l.k;
    let cols = im2col(l, input);
    let mut dcols = if din.is_some() { vec![F::zero(); r * n] } else { Vec::new() };
    for oc in 0..l.cout {
        let d = &dout[oc * n..(oc + 1) * n];
        grad[l.b + oc] += d.iter().copied().sum::<F>();
        for (j, row) in cols.chunks_exact(n).enumerate() {
            grad[l.w + oc * r + j] += dot(d, row);
        }
        if !dcols.is_empty() {
            let w = &p[l.w + oc * r..l.w + (oc + 1) * r];
            for (wv, drow) in w.iter().zip(dcols.chunks_exact_mut(n)) {
                for (g, a) in drow.iter_mut().zip(d) {
                    *g += *wv * *a;
                }
            }
        }
    }
    if let Some(din) = din {
        col2im(l, &dcols, din);
    }
}
