//! Layer primitives for the denoiser: convolution, group normalization,
//! SiLU, linear maps, dot-product attention, nearest-neighbor upsampling,
//! and the sinusoidal time embedding. Every primitive has a hand-written
//! backward pass verified against finite differences in the unit tests.
//!
//! Feature maps are `Array3<f64>` in `(channel, row, col)` layout; weight
//! tensors are flat `&[f64]` slices into the network's parameter vector
//! (convolutions in `(cout, cin, k, k)` order, linear maps in
//! `(out, in)` order).

use ndarray::{Array1, Array2, Array3};

pub(crate) const GN_EPS: f64 = 1e-5;

/// 2-D convolution with "same" padding `k/2` (so 3×3 keeps the spatial
/// size at stride 1 and halves it at stride 2; 1×1 is a channel mix).
///
/// The padding logic is hoisted out of the hot loops: each output row and
/// column precomputes the valid `ky`/`kx` window, and the innermost loop
/// runs over contiguous slices. The accumulation visits exactly the terms
/// a naive padded loop would, in the same order, so results are
/// bit-identical to the straightforward formulation.
pub(crate) fn conv2d(
    x: &Array3<f64>,
    w: &[f64],
    b: &[f64],
    cout: usize,
    k: usize,
    stride: usize,
) -> Array3<f64> {
    let (cin, h, wd) = x.dim();
    debug_assert_eq!(w.len(), cout * cin * k * k);
    debug_assert_eq!(b.len(), cout);
    let pad = k / 2;
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let xs = x.as_slice().expect("contiguous input");
    let mut y = Array3::zeros((cout, oh, ow));
    let ys = y.as_slice_mut().expect("contiguous output");
    for co in 0..cout {
        let bias = b[co];
        for oy in 0..oh {
            let ybase = oy * stride;
            let ky_lo = pad.saturating_sub(ybase);
            let ky_hi = k.min(h + pad - ybase);
            for ox in 0..ow {
                let xbase = ox * stride;
                let kx_lo = pad.saturating_sub(xbase);
                let kx_hi = k.min(wd + pad - xbase);
                let mut acc = bias;
                for ci in 0..cin {
                    let wbase = ((co * cin + ci) * k) * k;
                    let xoff = ci * h * wd;
                    for ky in ky_lo..ky_hi {
                        let iy = ybase + ky - pad;
                        let xstart = xoff + iy * wd + xbase + kx_lo - pad;
                        let wstart = wbase + ky * k + kx_lo;
                        let len = kx_hi - kx_lo;
                        let xr = &xs[xstart..xstart + len];
                        let wr = &w[wstart..wstart + len];
                        for i in 0..len {
                            acc += wr[i] * xr[i];
                        }
                    }
                }
                ys[(co * oh + oy) * ow + ox] = acc;
            }
        }
    }
    y
}

/// Gradients of `conv2d` with respect to input, weights, and bias.
pub(crate) fn conv2d_backward(
    x: &Array3<f64>,
    w: &[f64],
    gy: &Array3<f64>,
    k: usize,
    stride: usize,
) -> (Array3<f64>, Vec<f64>, Vec<f64>) {
    let (cin, h, wd) = x.dim();
    let (cout, oh, ow) = gy.dim();
    let pad = k / 2;
    let xs = x.as_slice().expect("contiguous input");
    let gys = gy.as_slice().expect("contiguous grad");
    let mut gx = Array3::zeros((cin, h, wd));
    let gxs = gx.as_slice_mut().expect("contiguous grad");
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; cout];
    for co in 0..cout {
        for oy in 0..oh {
            let ybase = oy * stride;
            let ky_lo = pad.saturating_sub(ybase);
            let ky_hi = k.min(h + pad - ybase);
            for ox in 0..ow {
                let g = gys[(co * oh + oy) * ow + ox];
                gb[co] += g;
                let xbase = ox * stride;
                let kx_lo = pad.saturating_sub(xbase);
                let kx_hi = k.min(wd + pad - xbase);
                let len = kx_hi - kx_lo;
                for ci in 0..cin {
                    let wbase = ((co * cin + ci) * k) * k;
                    let xoff = ci * h * wd;
                    for ky in ky_lo..ky_hi {
                        let iy = ybase + ky - pad;
                        let xstart = xoff + iy * wd + xbase + kx_lo - pad;
                        let wstart = wbase + ky * k + kx_lo;
                        let xr = &xs[xstart..xstart + len];
                        let gxr = &mut gxs[xstart..xstart + len];
                        let wr = &w[wstart..wstart + len];
                        let gwr = &mut gw[wstart..wstart + len];
                        for i in 0..len {
                            gwr[i] += g * xr[i];
                            gxr[i] += g * wr[i];
                        }
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

/// Group normalization: channels are split into `groups` equal groups,
/// each standardized over (channels-in-group × H × W) with biased
/// variance, then scaled/shifted per channel.
pub(crate) fn group_norm(
    x: &Array3<f64>,
    gamma: &[f64],
    beta: &[f64],
    groups: usize,
) -> Array3<f64> {
    let (c, h, w) = x.dim();
    debug_assert_eq!(c % groups, 0);
    let cg = c / groups;
    let m = (cg * h * w) as f64;
    let xs = x.as_slice().expect("contiguous input");
    let mut y = Array3::zeros((c, h, w));
    let ys = y.as_slice_mut().expect("contiguous output");
    let plane = h * w;
    for g in 0..groups {
        let lo = g * cg * plane;
        let hi = lo + cg * plane;
        let mean = xs[lo..hi].iter().sum::<f64>() / m;
        let var = xs[lo..hi].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let inv = 1.0 / (var + GN_EPS).sqrt();
        for cc in 0..cg {
            let ch = g * cg + cc;
            let base = ch * plane;
            for p in 0..plane {
                ys[base + p] = gamma[ch] * (xs[base + p] - mean) * inv + beta[ch];
            }
        }
    }
    y
}

/// Gradients of `group_norm` with respect to input and the per-channel
/// scale/shift.
pub(crate) fn group_norm_backward(
    x: &Array3<f64>,
    gamma: &[f64],
    groups: usize,
    gy: &Array3<f64>,
) -> (Array3<f64>, Vec<f64>, Vec<f64>) {
    let (c, h, w) = x.dim();
    let cg = c / groups;
    let m = (cg * h * w) as f64;
    let plane = h * w;
    let xs = x.as_slice().expect("contiguous input");
    let gys = gy.as_slice().expect("contiguous grad");
    let mut gx = Array3::zeros((c, h, w));
    let gxs = gx.as_slice_mut().expect("contiguous grad");
    let mut ggamma = vec![0.0; c];
    let mut gbeta = vec![0.0; c];
    for g in 0..groups {
        let lo = g * cg * plane;
        let hi = lo + cg * plane;
        let mean = xs[lo..hi].iter().sum::<f64>() / m;
        let var = xs[lo..hi].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let inv = 1.0 / (var + GN_EPS).sqrt();
        // Per-channel parameter gradients and the two group-wide sums
        // needed for the input gradient: mean of ĝ and mean of ĝ·x̂,
        // where ĝ = gy·γ and x̂ is the standardized input.
        let mut sum_gh = 0.0;
        let mut sum_ghx = 0.0;
        for cc in 0..cg {
            let ch = g * cg + cc;
            let base = ch * plane;
            for p in 0..plane {
                let xhat = (xs[base + p] - mean) * inv;
                let gyv = gys[base + p];
                ggamma[ch] += gyv * xhat;
                gbeta[ch] += gyv;
                let gh = gyv * gamma[ch];
                sum_gh += gh;
                sum_ghx += gh * xhat;
            }
        }
        let mean_gh = sum_gh / m;
        let mean_ghx = sum_ghx / m;
        for cc in 0..cg {
            let ch = g * cg + cc;
            let base = ch * plane;
            for p in 0..plane {
                let xhat = (xs[base + p] - mean) * inv;
                let gh = gys[base + p] * gamma[ch];
                gxs[base + p] = inv * (gh - mean_gh - xhat * mean_ghx);
            }
        }
    }
    (gx, ggamma, gbeta)
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// SiLU activation `x·σ(x)` applied elementwise.
pub(crate) fn silu3(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v * sigmoid(v))
}

/// Gradient of `silu3` given its original input.
pub(crate) fn silu3_backward(x: &Array3<f64>, gy: &Array3<f64>) -> Array3<f64> {
    let mut gx = gy.clone();
    gx.zip_mut_with(x, |g, &v| {
        let s = sigmoid(v);
        *g *= s * (1.0 + v * (1.0 - s));
    });
    gx
}

/// SiLU on a flat vector (time-embedding path).
pub(crate) fn silu_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v * sigmoid(v)).collect()
}

pub(crate) fn silu_vec_backward(x: &[f64], gy: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(gy)
        .map(|(&v, &g)| {
            let s = sigmoid(v);
            g * s * (1.0 + v * (1.0 - s))
        })
        .collect()
}

/// Dense map `y = W·x + b` with `W` in `(out, in)` layout.
pub(crate) fn linear(x: &[f64], w: &[f64], b: &[f64], nout: usize) -> Vec<f64> {
    let nin = x.len();
    debug_assert_eq!(w.len(), nout * nin);
    (0..nout)
        .map(|o| {
            let row = &w[o * nin..(o + 1) * nin];
            b[o] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()
        })
        .collect()
}

/// Gradients of `linear` with respect to input, weights, and bias.
pub(crate) fn linear_backward(
    x: &[f64],
    w: &[f64],
    gy: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nin = x.len();
    let nout = gy.len();
    let mut gx = vec![0.0; nin];
    let mut gw = vec![0.0; nout * nin];
    for o in 0..nout {
        let g = gy[o];
        let row = &w[o * nin..(o + 1) * nin];
        let grow = &mut gw[o * nin..(o + 1) * nin];
        for i in 0..nin {
            gx[i] += g * row[i];
            grow[i] = g * x[i];
        }
    }
    (gx, gw, gy.to_vec())
}

/// Single-head dot-product attention over spatial positions. Inputs are
/// `(channels, positions)`; scores are scaled by `1/√channels` and
/// softmaxed over key positions. Returns the output and the attention
/// matrix (rows = queries) needed for the backward pass.
pub(crate) fn attention(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let (c, p) = q.dim();
    let scale = 1.0 / (c as f64).sqrt();
    let mut a = Array2::zeros((p, p));
    for i in 0..p {
        let mut max = f64::NEG_INFINITY;
        for j in 0..p {
            let mut s = 0.0;
            for ch in 0..c {
                s += q[(ch, i)] * k[(ch, j)];
            }
            let s = s * scale;
            a[(i, j)] = s;
            max = max.max(s);
        }
        let mut z = 0.0;
        for j in 0..p {
            let e = (a[(i, j)] - max).exp();
            a[(i, j)] = e;
            z += e;
        }
        for j in 0..p {
            a[(i, j)] /= z;
        }
    }
    let mut out = Array2::zeros((c, p));
    for ch in 0..c {
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                acc += a[(i, j)] * v[(ch, j)];
            }
            out[(ch, i)] = acc;
        }
    }
    (out, a)
}

/// Gradients of `attention` given the cached attention matrix.
pub(crate) fn attention_backward(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
    a: &Array2<f64>,
    gy: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let (c, p) = q.dim();
    let scale = 1.0 / (c as f64).sqrt();
    let mut gv = Array2::zeros((c, p));
    let mut ga = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for ch in 0..c {
                gv[(ch, j)] += a[(i, j)] * gy[(ch, i)];
                acc += gy[(ch, i)] * v[(ch, j)];
            }
            ga[(i, j)] = acc;
        }
    }
    // Softmax backward per query row: gs_j = a_j·(ga_j − Σ_k ga_k·a_k).
    let mut gs = Array2::zeros((p, p));
    for i in 0..p {
        let dot: f64 = (0..p).map(|j| ga[(i, j)] * a[(i, j)]).sum();
        for j in 0..p {
            gs[(i, j)] = a[(i, j)] * (ga[(i, j)] - dot);
        }
    }
    let mut gq = Array2::zeros((c, p));
    let mut gk = Array2::zeros((c, p));
    for i in 0..p {
        for j in 0..p {
            let g = gs[(i, j)] * scale;
            for ch in 0..c {
                gq[(ch, i)] += g * k[(ch, j)];
                gk[(ch, j)] += g * q[(ch, i)];
            }
        }
    }
    (gq, gk, gv)
}

/// Nearest-neighbor ×2 upsampling.
pub(crate) fn upsample_nearest2(x: &Array3<f64>) -> Array3<f64> {
    let (c, h, w) = x.dim();
    Array3::from_shape_fn((c, 2 * h, 2 * w), |(ch, y, xx)| x[(ch, y / 2, xx / 2)])
}

/// Gradient of `upsample_nearest2`: each input cell collects its 2×2 block.
pub(crate) fn upsample_nearest2_backward(gy: &Array3<f64>) -> Array3<f64> {
    let (c, h2, w2) = gy.dim();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut gx = Array3::zeros((c, h, w));
    for ch in 0..c {
        for y in 0..h2 {
            for x in 0..w2 {
                gx[(ch, y / 2, x / 2)] += gy[(ch, y, x)];
            }
        }
    }
    gx
}

/// Sinusoidal position encoding of the diffusion step: `dim/2` sine and
/// `dim/2` cosine components at geometrically spaced frequencies from 1
/// down to 1/10000.
pub(crate) fn time_embedding(t: usize, dim: usize) -> Array1<f64> {
    debug_assert!(dim >= 2 && dim % 2 == 0);
    let half = dim / 2;
    let mut e = Array1::zeros(dim);
    for i in 0..half {
        let freq = if half == 1 {
            1.0
        } else {
            (-(10_000f64).ln() * i as f64 / (half - 1) as f64).exp()
        };
        let arg = t as f64 * freq;
        e[i] = arg.sin();
        e[half + i] = arg.cos();
    }
    e
}
