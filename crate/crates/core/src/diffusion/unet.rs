//! The conditional noise-prediction network: a U-shaped encoder/decoder
//! over the concatenated (map, noisy trajectory) image with residual
//! blocks, group normalization, one self-attention block at the lowest
//! resolution, and a sinusoidal time embedding injected into every
//! residual block.
//!
//! Parameters live in one flat `Vec<f64>` described by a named-tensor
//! layout derived from [`NetConfig`]; gradients use the same layout. The
//! forward pass caches every intermediate needed by the hand-written
//! backward pass, so `loss_and_grad` can produce exact derivatives.
//!
//! Architecture, with `depth` resolution levels and channel widths
//! `w[i] = base_width·2^i`:
//!
//! ```text
//! input  = concat(map[2ch], l_t[1ch])            (3, N, N)
//! stem   = conv3×3(3 → w0)
//! enc i  = resblock(w[i] → w[i]); output saved as skip[i];
//!          conv3×3 stride 2 (w[i] → w[i+1]) between levels
//! bottom = group-norm + q/k/v/proj self-attention (residual),
//!          then resblock(w[d−1] → w[d−1])
//! dec i  = resblock(concat(up-path, skip[i]): 2·w[i] → w[i]);
//!          nearest-×2 upsample + conv3×3 (w[i] → w[i−1]) between levels
//! head   = group-norm + SiLU + conv3×3(w0 → 1), zero-initialized
//! ```
//!
//! A residual block is GN → SiLU → conv3×3, plus a per-channel linear
//! projection of the time embedding, then GN → SiLU → conv3×3, with an
//! identity (or 1×1 conv when widths differ) skip connection.

use super::nn::{
    attention, attention_backward, conv2d, conv2d_backward, group_norm, group_norm_backward,
    linear, linear_backward, silu3, silu3_backward, silu_vec, silu_vec_backward, time_embedding,
    upsample_nearest2, upsample_nearest2_backward,
};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};
use ndarray::{concatenate, s, Array2, Array3, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Size hyperparameters of the denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Number of resolution levels; the lowest sits at `N / 2^(depth−1)`.
    pub depth: usize,
    /// Channel count at full resolution; doubles per level.
    pub base_width: usize,
    /// Dimension of the sinusoidal time embedding and its MLP.
    pub time_dim: usize,
    /// Group count for every group-normalization layer.
    pub groups: usize,
}

impl NetConfig {
    /// Test-sized network: 2 levels, width 8 — small enough for exhaustive
    /// finite-difference checking.
    pub fn tiny() -> Self {
        Self {
            depth: 2,
            base_width: 8,
            time_dim: 32,
            groups: 8,
        }
    }

    /// Full-run network: 4 levels, base width 64.
    pub fn full() -> Self {
        Self {
            depth: 4,
            base_width: 64,
            time_dim: 256,
            groups: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::validation(
                "network needs at least 2 resolution levels",
            ));
        }
        if self.groups == 0 || self.base_width % self.groups != 0 {
            return Err(Error::validation(format!(
                "base width {} must be a positive multiple of the group count {}",
                self.base_width, self.groups
            )));
        }
        if self.time_dim < 2 || self.time_dim % 2 != 0 {
            return Err(Error::validation(format!(
                "time embedding dimension {} must be even and at least 2",
                self.time_dim
            )));
        }
        Ok(())
    }

    /// Channel width per resolution level.
    pub fn widths(&self) -> Vec<usize> {
        (0..self.depth).map(|i| self.base_width << i).collect()
    }

    /// Spatial sizes must be divisible by this for the down/up path to
    /// round-trip cleanly.
    pub fn size_divisor(&self) -> usize {
        1 << self.depth
    }
}

/// One named tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct LayoutEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Ordered named-tensor table over a flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub entries: Vec<LayoutEntry>,
    index: HashMap<String, usize>,
    pub total: usize,
}

impl Layout {
    pub fn of(cfg: &NetConfig) -> Self {
        let mut l = Layout {
            entries: Vec::new(),
            index: HashMap::new(),
            total: 0,
        };
        let td = cfg.time_dim;
        let w = cfg.widths();
        let depth = cfg.depth;
        l.add("time.lin0.w", vec![td, td]);
        l.add("time.lin0.b", vec![td]);
        l.add("time.lin1.w", vec![td, td]);
        l.add("time.lin1.b", vec![td]);
        l.add("stem.w", vec![w[0], 3, 3, 3]);
        l.add("stem.b", vec![w[0]]);
        for i in 0..depth {
            l.add_resblock(&format!("enc{i}"), w[i], w[i], td);
            if i < depth - 1 {
                l.add(&format!("down{i}.w"), vec![w[i + 1], w[i], 3, 3]);
                l.add(&format!("down{i}.b"), vec![w[i + 1]]);
            }
        }
        let wl = w[depth - 1];
        l.add("attn.gn.g", vec![wl]);
        l.add("attn.gn.b", vec![wl]);
        for nm in ["q", "k", "v", "proj"] {
            l.add(&format!("attn.{nm}.w"), vec![wl, wl, 1, 1]);
            l.add(&format!("attn.{nm}.b"), vec![wl]);
        }
        l.add_resblock("mid", wl, wl, td);
        for i in (0..depth).rev() {
            l.add_resblock(&format!("dec{i}"), 2 * w[i], w[i], td);
            if i > 0 {
                l.add(&format!("up{i}.w"), vec![w[i - 1], w[i], 3, 3]);
                l.add(&format!("up{i}.b"), vec![w[i - 1]]);
            }
        }
        l.add("head.gn.g", vec![w[0]]);
        l.add("head.gn.b", vec![w[0]]);
        l.add("head.conv.w", vec![1, w[0], 3, 3]);
        l.add("head.conv.b", vec![1]);
        l
    }

    fn add(&mut self, name: &str, shape: Vec<usize>) {
        let len = shape.iter().product();
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(LayoutEntry {
            name: name.to_string(),
            shape,
            offset: self.total,
            len,
        });
        self.total += len;
    }

    fn add_resblock(&mut self, prefix: &str, cin: usize, cout: usize, td: usize) {
        self.add(&format!("{prefix}.gn1.g"), vec![cin]);
        self.add(&format!("{prefix}.gn1.b"), vec![cin]);
        self.add(&format!("{prefix}.conv1.w"), vec![cout, cin, 3, 3]);
        self.add(&format!("{prefix}.conv1.b"), vec![cout]);
        self.add(&format!("{prefix}.temb.w"), vec![cout, td]);
        self.add(&format!("{prefix}.temb.b"), vec![cout]);
        self.add(&format!("{prefix}.gn2.g"), vec![cout]);
        self.add(&format!("{prefix}.gn2.b"), vec![cout]);
        self.add(&format!("{prefix}.conv2.w"), vec![cout, cout, 3, 3]);
        self.add(&format!("{prefix}.conv2.b"), vec![cout]);
        if cin != cout {
            self.add(&format!("{prefix}.skip.w"), vec![cout, cin, 1, 1]);
            self.add(&format!("{prefix}.skip.b"), vec![cout]);
        }
    }

    pub fn entry(&self, name: &str) -> &LayoutEntry {
        &self.entries[*self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown tensor {name}"))]
    }

    pub fn slice<'a>(&self, data: &'a [f64], name: &str) -> &'a [f64] {
        let e = self.entry(name);
        &data[e.offset..e.offset + e.len]
    }
}

/// All learnable tensors of the denoiser as one flat vector plus its
/// named layout.
#[derive(Debug, Clone)]
pub struct DenoiserParams {
    cfg: NetConfig,
    layout: Layout,
    data: Vec<f64>,
}

impl DenoiserParams {
    /// Standard initialization: scaled-normal convolution and linear
    /// weights, unit group-norm scales, zero biases, and a zeroed output
    /// head and attention projection (so the untrained network predicts
    /// zero noise and the attention block starts as the identity).
    pub fn init(cfg: NetConfig, seed: u64) -> Result<Self> {
        let mut p = Self::random_init(cfg, seed)?;
        for name in ["head.conv.w", "head.conv.b", "attn.proj.w", "attn.proj.b"] {
            let e = p.layout.entry(name).clone();
            p.data[e.offset..e.offset + e.len].fill(0.0);
        }
        Ok(p)
    }

    /// Initialization with every tensor non-degenerate (no zeroed output
    /// layers), so gradient checks exercise all parameters.
    pub fn random_init(cfg: NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::of(&cfg);
        let mut rng = stream_rng(seed, streams::NET_INIT);
        let mut data = vec![0.0; layout.total];
        for e in &layout.entries {
            let vals = &mut data[e.offset..e.offset + e.len];
            match e.shape.len() {
                // Convolution weight: scaled for SiLU fan-in.
                4 => {
                    let fan_in = e.shape[1] * e.shape[2] * e.shape[3];
                    let std = (2.0 / fan_in as f64).sqrt();
                    for v in vals.iter_mut() {
                        *v = std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                    }
                }
                // Linear weight.
                2 => {
                    let std = (1.0 / e.shape[1] as f64).sqrt();
                    for v in vals.iter_mut() {
                        *v = std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                    }
                }
                // Group-norm scales sit near 1, everything else near 0.
                _ => {
                    let center = if e.name.ends_with(".g") { 1.0 } else { 0.0 };
                    for v in vals.iter_mut() {
                        *v = center + 0.05 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                    }
                }
            }
        }
        Ok(Self { cfg, layout, data })
    }

    /// Rebuilds parameters from a raw vector (checkpoint loading).
    pub(crate) fn from_raw(cfg: NetConfig, data: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::of(&cfg);
        if data.len() != layout.total {
            return Err(Error::validation(format!(
                "parameter vector has {} values, layout needs {}",
                data.len(),
                layout.total
            )));
        }
        Ok(Self { cfg, layout, data })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn n_params(&self) -> usize {
        self.data.len()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Flat view of every parameter, in layout order.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat view, e.g. for custom optimizer steps or
    /// finite-difference probes.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn p(&self, name: &str) -> &[f64] {
        self.layout.slice(&self.data, name)
    }
}

/// Cached intermediates of one residual block.
struct ResCache {
    x: Array3<f64>,
    gn1_out: Array3<f64>,
    silu1_out: Array3<f64>,
    gn2_in: Array3<f64>,
    gn2_out: Array3<f64>,
    silu2_out: Array3<f64>,
}

/// Cached intermediates of the bottleneck attention block.
struct AttnCache {
    x: Array3<f64>,
    gn_out: Array3<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    a: Array2<f64>,
    attn_out: Array3<f64>,
}

/// Everything the backward pass needs from one forward evaluation.
pub(crate) struct Cache {
    tsin: Vec<f64>,
    th0: Vec<f64>,
    th0s: Vec<f64>,
    temb: Vec<f64>,
    stem_in: Array3<f64>,
    enc: Vec<ResCache>,
    skips: Vec<Array3<f64>>,
    attn: AttnCache,
    mid: ResCache,
    dec: Vec<Option<ResCache>>,
    up_in: Vec<Option<Array3<f64>>>,
    head_in: Array3<f64>,
    head_gn_out: Array3<f64>,
    head_silu_out: Array3<f64>,
}

fn res_forward(
    p: &DenoiserParams,
    prefix: &str,
    cout: usize,
    x: Array3<f64>,
    temb: &[f64],
) -> (Array3<f64>, ResCache) {
    let cin = x.dim().0;
    let g = p.cfg.groups;
    let gn1_out = group_norm(
        &x,
        p.p(&format!("{prefix}.gn1.g")),
        p.p(&format!("{prefix}.gn1.b")),
        g,
    );
    let silu1_out = silu3(&gn1_out);
    let mut h = conv2d(
        &silu1_out,
        p.p(&format!("{prefix}.conv1.w")),
        p.p(&format!("{prefix}.conv1.b")),
        cout,
        3,
        1,
    );
    let tvec = linear(
        temb,
        p.p(&format!("{prefix}.temb.w")),
        p.p(&format!("{prefix}.temb.b")),
        cout,
    );
    for (c, &tv) in tvec.iter().enumerate() {
        h.slice_mut(s![c, .., ..]).mapv_inplace(|v| v + tv);
    }
    let gn2_in = h;
    let gn2_out = group_norm(
        &gn2_in,
        p.p(&format!("{prefix}.gn2.g")),
        p.p(&format!("{prefix}.gn2.b")),
        g,
    );
    let silu2_out = silu3(&gn2_out);
    let mut y = conv2d(
        &silu2_out,
        p.p(&format!("{prefix}.conv2.w")),
        p.p(&format!("{prefix}.conv2.b")),
        cout,
        3,
        1,
    );
    if cin != cout {
        y += &conv2d(
            &x,
            p.p(&format!("{prefix}.skip.w")),
            p.p(&format!("{prefix}.skip.b")),
            cout,
            1,
            1,
        );
    } else {
        y += &x;
    }
    (
        y,
        ResCache {
            x,
            gn1_out,
            silu1_out,
            gn2_in,
            gn2_out,
            silu2_out,
        },
    )
}

/// Adds `vals` into the gradient vector at the named tensor's slot.
fn acc(grads: &mut [f64], layout: &Layout, name: &str, vals: &[f64]) {
    let e = layout.entry(name);
    for (g, v) in grads[e.offset..e.offset + e.len].iter_mut().zip(vals) {
        *g += v;
    }
}

fn res_backward(
    p: &DenoiserParams,
    prefix: &str,
    cache: &ResCache,
    gy: &Array3<f64>,
    grads: &mut [f64],
    g_temb: &mut [f64],
    temb: &[f64],
) -> Array3<f64> {
    let cin = cache.x.dim().0;
    let cout = gy.dim().0;
    let g = p.cfg.groups;
    let l = p.layout();

    let (g_silu2, gw2, gb2) = conv2d_backward(
        &cache.silu2_out,
        p.p(&format!("{prefix}.conv2.w")),
        gy,
        3,
        1,
    );
    acc(grads, l, &format!("{prefix}.conv2.w"), &gw2);
    acc(grads, l, &format!("{prefix}.conv2.b"), &gb2);

    let g_gn2_out = silu3_backward(&cache.gn2_out, &g_silu2);
    let (g_gn2_in, gg2, gs2) = group_norm_backward(
        &cache.gn2_in,
        p.p(&format!("{prefix}.gn2.g")),
        g,
        &g_gn2_out,
    );
    acc(grads, l, &format!("{prefix}.gn2.g"), &gg2);
    acc(grads, l, &format!("{prefix}.gn2.b"), &gs2);

    // The time projection was broadcast over space, so its gradient is the
    // per-channel sum.
    let g_tvec: Vec<f64> = (0..cout)
        .map(|c| g_gn2_in.slice(s![c, .., ..]).sum())
        .collect();
    let (g_t, g_tw, g_tb) =
        linear_backward(temb, p.p(&format!("{prefix}.temb.w")), &g_tvec);
    acc(grads, l, &format!("{prefix}.temb.w"), &g_tw);
    acc(grads, l, &format!("{prefix}.temb.b"), &g_tb);
    for (acc_t, v) in g_temb.iter_mut().zip(&g_t) {
        *acc_t += v;
    }

    let (g_silu1, gw1, gb1) = conv2d_backward(
        &cache.silu1_out,
        p.p(&format!("{prefix}.conv1.w")),
        &g_gn2_in,
        3,
        1,
    );
    acc(grads, l, &format!("{prefix}.conv1.w"), &gw1);
    acc(grads, l, &format!("{prefix}.conv1.b"), &gb1);

    let g_gn1_out = silu3_backward(&cache.gn1_out, &g_silu1);
    let (mut gx, gg1, gs1) = group_norm_backward(
        &cache.x,
        p.p(&format!("{prefix}.gn1.g")),
        g,
        &g_gn1_out,
    );
    acc(grads, l, &format!("{prefix}.gn1.g"), &gg1);
    acc(grads, l, &format!("{prefix}.gn1.b"), &gs1);

    if cin != cout {
        let (gx_skip, gws, gbs) = conv2d_backward(
            &cache.x,
            p.p(&format!("{prefix}.skip.w")),
            gy,
            1,
            1,
        );
        acc(grads, l, &format!("{prefix}.skip.w"), &gws);
        acc(grads, l, &format!("{prefix}.skip.b"), &gbs);
        gx += &gx_skip;
    } else {
        gx += gy;
    }
    gx
}

fn attn_forward(p: &DenoiserParams, x: Array3<f64>) -> (Array3<f64>, AttnCache) {
    let (c, h, w) = x.dim();
    let gn_out = group_norm(&x, p.p("attn.gn.g"), p.p("attn.gn.b"), p.cfg.groups);
    let q = conv2d(&gn_out, p.p("attn.q.w"), p.p("attn.q.b"), c, 1, 1)
        .into_shape((c, h * w))
        .expect("reshape");
    let k = conv2d(&gn_out, p.p("attn.k.w"), p.p("attn.k.b"), c, 1, 1)
        .into_shape((c, h * w))
        .expect("reshape");
    let v = conv2d(&gn_out, p.p("attn.v.w"), p.p("attn.v.b"), c, 1, 1)
        .into_shape((c, h * w))
        .expect("reshape");
    let (out2, a) = attention(&q, &k, &v);
    let attn_out = out2.into_shape((c, h, w)).expect("reshape");
    let proj = conv2d(&attn_out, p.p("attn.proj.w"), p.p("attn.proj.b"), c, 1, 1);
    let y = &x + &proj;
    (
        y,
        AttnCache {
            x,
            gn_out,
            q,
            k,
            v,
            a,
            attn_out,
        },
    )
}

fn attn_backward(
    p: &DenoiserParams,
    cache: &AttnCache,
    gy: &Array3<f64>,
    grads: &mut [f64],
) -> Array3<f64> {
    let (c, h, w) = cache.x.dim();
    let l = p.layout();
    let (g_attn_out, gwp, gbp) = conv2d_backward(&cache.attn_out, p.p("attn.proj.w"), gy, 1, 1);
    acc(grads, l, "attn.proj.w", &gwp);
    acc(grads, l, "attn.proj.b", &gbp);
    let g_out2 = g_attn_out.into_shape((c, h * w)).expect("reshape");
    let (gq, gk, gv) = attention_backward(&cache.q, &cache.k, &cache.v, &cache.a, &g_out2);
    let mut g_gn = Array3::zeros((c, h, w));
    for (name_w, name_b, gz) in [
        ("attn.q.w", "attn.q.b", gq),
        ("attn.k.w", "attn.k.b", gk),
        ("attn.v.w", "attn.v.b", gv),
    ] {
        let gz3 = gz.into_shape((c, h, w)).expect("reshape");
        let (g_in, gw, gb) = conv2d_backward(&cache.gn_out, p.p(name_w), &gz3, 1, 1);
        acc(grads, l, name_w, &gw);
        acc(grads, l, name_b, &gb);
        g_gn += &g_in;
    }
    let (gx, gg, gb) = group_norm_backward(&cache.x, p.p("attn.gn.g"), p.cfg.groups, &g_gn);
    acc(grads, l, "attn.gn.g", &gg);
    acc(grads, l, "attn.gn.b", &gb);
    gx + gy
}

/// Full forward pass for one sample, returning the prediction and the
/// cache for `backward_cached`. Shapes must already be validated.
pub(crate) fn forward_cached(
    p: &DenoiserParams,
    map: &Array3<f64>,
    lt: &Array2<f64>,
    t: usize,
) -> (Array2<f64>, Cache) {
    let cfg = &p.cfg;
    let widths = cfg.widths();
    let depth = cfg.depth;
    let n = lt.nrows();

    // Time path: sinusoid → linear → SiLU → linear, shared by all blocks.
    let tsin = time_embedding(t, cfg.time_dim).to_vec();
    let th0 = linear(&tsin, p.p("time.lin0.w"), p.p("time.lin0.b"), cfg.time_dim);
    let th0s = silu_vec(&th0);
    let temb = linear(&th0s, p.p("time.lin1.w"), p.p("time.lin1.b"), cfg.time_dim);

    // Conditioning by channel concatenation: [map0, map1, l_t].
    let mut stem_in = Array3::zeros((3, n, n));
    stem_in.slice_mut(s![0..2, .., ..]).assign(map);
    stem_in.slice_mut(s![2, .., ..]).assign(lt);
    let mut h = conv2d(&stem_in, p.p("stem.w"), p.p("stem.b"), widths[0], 3, 1);

    let mut enc = Vec::with_capacity(depth);
    let mut skips = Vec::with_capacity(depth);
    for i in 0..depth {
        let (out, c) = res_forward(p, &format!("enc{i}"), widths[i], h, &temb);
        enc.push(c);
        skips.push(out.clone());
        h = out;
        if i < depth - 1 {
            h = conv2d(
                &h,
                p.p(&format!("down{i}.w")),
                p.p(&format!("down{i}.b")),
                widths[i + 1],
                3,
                2,
            );
        }
    }

    let (h_attn, attn) = attn_forward(p, h);
    let (mut h, mid) = res_forward(p, "mid", widths[depth - 1], h_attn, &temb);

    let mut dec: Vec<Option<ResCache>> = (0..depth).map(|_| None).collect();
    let mut up_in: Vec<Option<Array3<f64>>> = (0..depth).map(|_| None).collect();
    for i in (0..depth).rev() {
        let cat = concatenate(Axis(0), &[h.view(), skips[i].view()]).expect("concat");
        let (out, c) = res_forward(p, &format!("dec{i}"), widths[i], cat, &temb);
        dec[i] = Some(c);
        h = out;
        if i > 0 {
            let up = upsample_nearest2(&h);
            h = conv2d(
                &up,
                p.p(&format!("up{i}.w")),
                p.p(&format!("up{i}.b")),
                widths[i - 1],
                3,
                1,
            );
            up_in[i] = Some(up);
        }
    }

    let head_in = h;
    let head_gn_out = group_norm(&head_in, p.p("head.gn.g"), p.p("head.gn.b"), cfg.groups);
    let head_silu_out = silu3(&head_gn_out);
    let y3 = conv2d(
        &head_silu_out,
        p.p("head.conv.w"),
        p.p("head.conv.b"),
        1,
        3,
        1,
    );
    let out = y3.index_axis(Axis(0), 0).to_owned();
    (
        out,
        Cache {
            tsin,
            th0,
            th0s,
            temb,
            stem_in,
            enc,
            skips,
            attn,
            mid,
            dec,
            up_in,
            head_in,
            head_gn_out,
            head_silu_out,
        },
    )
}

/// Exact gradient of `Σ g_out ⊙ output` with respect to every parameter,
/// as a flat vector in layout order.
pub(crate) fn backward_cached(
    p: &DenoiserParams,
    cache: &Cache,
    g_out: &Array2<f64>,
) -> Vec<f64> {
    let cfg = &p.cfg;
    let widths = cfg.widths();
    let depth = cfg.depth;
    let n = g_out.nrows();
    let l = p.layout();
    let mut grads = vec![0.0; p.data.len()];
    let mut g_temb = vec![0.0; cfg.time_dim];

    // Head.
    let gy3 = g_out
        .clone()
        .into_shape((1, n, n))
        .expect("reshape");
    let (g_head_silu, gw, gb) = conv2d_backward(&cache.head_silu_out, p.p("head.conv.w"), &gy3, 3, 1);
    acc(&mut grads, l, "head.conv.w", &gw);
    acc(&mut grads, l, "head.conv.b", &gb);
    let g_head_gn = silu3_backward(&cache.head_gn_out, &g_head_silu);
    let (mut g_h, gg, gbn) =
        group_norm_backward(&cache.head_in, p.p("head.gn.g"), cfg.groups, &g_head_gn);
    acc(&mut grads, l, "head.gn.g", &gg);
    acc(&mut grads, l, "head.gn.b", &gbn);

    // Decoder, unwound from the output level back to the bottleneck.
    let mut g_skips: Vec<Option<Array3<f64>>> = (0..depth).map(|_| None).collect();
    let g_mid_out;
    let mut i = 0;
    loop {
        let cachei = cache.dec[i].as_ref().expect("decoder cache");
        let g_cat = res_backward(
            p,
            &format!("dec{i}"),
            cachei,
            &g_h,
            &mut grads,
            &mut g_temb,
            &cache.temb,
        );
        let g_above = g_cat.slice(s![0..widths[i], .., ..]).to_owned();
        g_skips[i] = Some(g_cat.slice(s![widths[i].., .., ..]).to_owned());
        if i + 1 < depth {
            // g_above is the gradient at the output of the upsampling conv
            // from level i+1.
            let up = cache.up_in[i + 1].as_ref().expect("upsample cache");
            let (g_up, gw, gb) =
                conv2d_backward(up, p.p(&format!("up{}.w", i + 1)), &g_above, 3, 1);
            acc(&mut grads, l, &format!("up{}.w", i + 1), &gw);
            acc(&mut grads, l, &format!("up{}.b", i + 1), &gb);
            g_h = upsample_nearest2_backward(&g_up);
            i += 1;
        } else {
            g_mid_out = g_above;
            break;
        }
    }

    // Bottleneck.
    let g_attn_out = res_backward(
        p,
        "mid",
        &cache.mid,
        &g_mid_out,
        &mut grads,
        &mut g_temb,
        &cache.temb,
    );
    let mut g_level = attn_backward(p, &cache.attn, &g_attn_out, &mut grads);

    // Encoder, from the lowest level back to the stem. Each level's output
    // feeds both the down path and its decoder skip.
    let mut g_stem_out = None;
    for i in (0..depth).rev() {
        let mut g_out_i = g_level;
        g_out_i += g_skips[i].as_ref().expect("skip grad");
        let g_in_i = res_backward(
            p,
            &format!("enc{i}"),
            &cache.enc[i],
            &g_out_i,
            &mut grads,
            &mut g_temb,
            &cache.temb,
        );
        if i > 0 {
            let (gx_down, gw, gb) = conv2d_backward(
                &cache.skips[i - 1],
                p.p(&format!("down{}.w", i - 1)),
                &g_in_i,
                3,
                2,
            );
            acc(&mut grads, l, &format!("down{}.w", i - 1), &gw);
            acc(&mut grads, l, &format!("down{}.b", i - 1), &gb);
            g_level = gx_down;
        } else {
            g_stem_out = Some(g_in_i);
            g_level = Array3::zeros((0, 0, 0));
        }
    }
    let (_, gw, gb) = conv2d_backward(
        &cache.stem_in,
        p.p("stem.w"),
        &g_stem_out.expect("stem grad"),
        3,
        1,
    );
    acc(&mut grads, l, "stem.w", &gw);
    acc(&mut grads, l, "stem.b", &gb);

    // Time MLP, fed by the accumulated per-block embedding gradients.
    let (g_th0s, gw1, gb1) = linear_backward(&cache.th0s, p.p("time.lin1.w"), &g_temb);
    acc(&mut grads, l, "time.lin1.w", &gw1);
    acc(&mut grads, l, "time.lin1.b", &gb1);
    let g_th0 = silu_vec_backward(&cache.th0, &g_th0s);
    let (_, gw0, gb0) = linear_backward(&cache.tsin, p.p("time.lin0.w"), &g_th0);
    acc(&mut grads, l, "time.lin0.w", &gw0);
    acc(&mut grads, l, "time.lin0.b", &gb0);

    grads
}

/// Applies the denoiser `f_θ(map, l_t, t)`: validates shapes, runs the
/// forward pass, and returns the predicted noise image.
pub fn denoiser_apply(
    params: &DenoiserParams,
    map: &Array3<f64>,
    l_t: &Array2<f64>,
    t: usize,
) -> Result<Array2<f64>> {
    validate_net_inputs(params, map, l_t)?;
    if t == 0 {
        return Err(Error::validation("diffusion step must be at least 1"));
    }
    if !params.is_finite() {
        return Err(Error::numeric("network parameters are not finite"));
    }
    Ok(forward_cached(params, map, l_t, t).0)
}

pub(crate) fn validate_net_inputs(
    params: &DenoiserParams,
    map: &Array3<f64>,
    l_t: &Array2<f64>,
) -> Result<()> {
    let (c, h, w) = map.dim();
    if c != 2 {
        return Err(Error::validation(format!(
            "conditioning map must have 2 channels, got {c}"
        )));
    }
    if (h, w) != l_t.dim() {
        return Err(Error::validation(format!(
            "map {h}×{w} and trajectory {:?} spatial sizes differ",
            l_t.dim()
        )));
    }
    if h != w {
        return Err(Error::validation(format!("input must be square, got {h}×{w}")));
    }
    let div = params.cfg.size_divisor();
    if h % div != 0 {
        return Err(Error::validation(format!(
            "input size {h} must be divisible by {div} for a depth-{} network",
            params.cfg.depth
        )));
    }
    Ok(())
}
