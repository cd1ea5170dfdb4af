//! Forward/backward math for every layer type used by the classifiers.
//!
//! Activations are `Array3<f64>` shaped (batch, channels, time); dense
//! features ride along as (batch, features, 1). Convolutions are im2col +
//! GEMM with 'same' zero padding (`pad_left = floor((extent − 1) / 2)`), so
//! the time axis is preserved and pooling arithmetic stays explicit.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};

/// Static dimensions of a 1D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvDims {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl ConvDims {
    /// Receptive-field extent of the dilated kernel.
    pub fn extent(&self) -> usize {
        (self.kernel - 1) * self.dilation + 1
    }

    pub fn pad_left(&self) -> usize {
        (self.extent() - 1) / 2
    }

    /// Trainable weight count (plus `out_ch` biases when biased).
    pub fn weight_count(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel
    }
}

/// Expands one sample (C, T) into the (C·K, T) patch matrix so the
/// convolution becomes `weight (O, C·K) × col`.
fn im2col(x: ArrayView2<'_, f64>, d: &ConvDims) -> Array2<f64> {
    let (c_in, t_len) = x.dim();
    debug_assert_eq!(c_in, d.in_ch);
    let pad = d.pad_left() as isize;
    let mut col = Array2::<f64>::zeros((d.in_ch * d.kernel, t_len));
    for c in 0..d.in_ch {
        for k in 0..d.kernel {
            let offset = k as isize * d.dilation as isize - pad;
            // output positions t where t + offset lands inside [0, T)
            let t0 = (-offset).max(0) as usize;
            let t1 = ((t_len as isize - offset).min(t_len as isize)).max(0) as usize;
            if t0 >= t1 {
                continue;
            }
            let src0 = (t0 as isize + offset) as usize;
            let src1 = (t1 as isize + offset) as usize;
            col.slice_mut(s![c * d.kernel + k, t0..t1])
                .assign(&x.slice(s![c, src0..src1]));
        }
    }
    col
}

/// 'Same'-padded dilated convolution; `w` is (out_ch, in_ch·kernel).
pub fn conv1d_forward(
    x: &Array3<f64>,
    w: &Array2<f64>,
    bias: Option<&Array1<f64>>,
    d: &ConvDims,
) -> Array3<f64> {
    let (b, _c, t_len) = x.dim();
    let mut y = Array3::<f64>::zeros((b, d.out_ch, t_len));
    for bi in 0..b {
        let col = im2col(x.index_axis(Axis(0), bi), d);
        let out = w.dot(&col);
        y.index_axis_mut(Axis(0), bi).assign(&out);
    }
    if let Some(bias) = bias {
        for bi in 0..b {
            for o in 0..d.out_ch {
                y.slice_mut(s![bi, o, ..]).mapv_inplace(|v| v + bias[o]);
            }
        }
    }
    y
}

/// Gradients of the convolution. `dx` is skipped for input nodes.
pub fn conv1d_backward(
    x: &Array3<f64>,
    w: &Array2<f64>,
    dy: &Array3<f64>,
    d: &ConvDims,
    want_dx: bool,
) -> (Option<Array3<f64>>, Array2<f64>, Array1<f64>) {
    let (b, c_in, t_len) = x.dim();
    let mut dw = Array2::<f64>::zeros(w.raw_dim());
    let mut db = Array1::<f64>::zeros(d.out_ch);
    let mut dx = want_dx.then(|| Array3::<f64>::zeros((b, c_in, t_len)));
    let pad = d.pad_left() as isize;
    for bi in 0..b {
        let col = im2col(x.index_axis(Axis(0), bi), d);
        let dy_b = dy.index_axis(Axis(0), bi);
        dw += &dy_b.dot(&col.t());
        db += &dy_b.sum_axis(Axis(1));
        if let Some(dx) = dx.as_mut() {
            // col2im: scatter-add the col-space gradient back to time axis
            let dcol = w.t().dot(&dy_b);
            for c in 0..d.in_ch {
                for k in 0..d.kernel {
                    let offset = k as isize * d.dilation as isize - pad;
                    let t0 = (-offset).max(0) as usize;
                    let t1 = ((t_len as isize - offset).min(t_len as isize)).max(0) as usize;
                    if t0 >= t1 {
                        continue;
                    }
                    let src0 = (t0 as isize + offset) as usize;
                    let src1 = (t1 as isize + offset) as usize;
                    let mut dst = dx.slice_mut(s![bi, c, src0..src1]);
                    dst += &dcol.slice(s![c * d.kernel + k, t0..t1]);
                }
            }
        }
    }
    (dx, dw, db)
}

/// Running statistics and hyperparameters of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BnState {
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BnState {
    pub fn new(channels: usize) -> Self {
        BnState {
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

/// Saved normalized activations needed by the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Array3<f64>,
    pub inv_std: Array1<f64>,
}

/// Training-mode batch norm over (batch, time) per channel. Normalization
/// uses the biased batch variance; the running variance accumulates the
/// unbiased estimate (momentum-weighted), matching common framework
/// conventions so checkpoints behave familiarly.
pub fn bn_forward_train(
    x: &Array3<f64>,
    gamma: &Array1<f64>,
    beta: &Array1<f64>,
    state: &mut BnState,
) -> (Array3<f64>, BnCache) {
    let (b, c, t) = x.dim();
    let n = (b * t) as f64;
    let mut y = Array3::<f64>::zeros((b, c, t));
    let mut xhat = Array3::<f64>::zeros((b, c, t));
    let mut inv_std = Array1::<f64>::zeros(c);
    for ch in 0..c {
        let lane = x.slice(s![.., ch, ..]);
        let mean = lane.sum() / n;
        let var = lane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let istd = 1.0 / (var + state.eps).sqrt();
        inv_std[ch] = istd;
        let (g, bta) = (gamma[ch], beta[ch]);
        for bi in 0..b {
            for ti in 0..t {
                let xh = (x[[bi, ch, ti]] - mean) * istd;
                xhat[[bi, ch, ti]] = xh;
                y[[bi, ch, ti]] = g * xh + bta;
            }
        }
        let unbiased = if n > 1.0 { var * n / (n - 1.0) } else { var };
        state.running_mean[ch] = (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * mean;
        state.running_var[ch] = (1.0 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    }
    (y, BnCache { xhat, inv_std })
}

/// Eval-mode batch norm: a pure function of the frozen running statistics.
pub fn bn_forward_eval(
    x: &Array3<f64>,
    gamma: &Array1<f64>,
    beta: &Array1<f64>,
    state: &BnState,
) -> Array3<f64> {
    let (b, c, t) = x.dim();
    let mut y = Array3::<f64>::zeros((b, c, t));
    for ch in 0..c {
        let istd = 1.0 / (state.running_var[ch] + state.eps).sqrt();
        let (m, g, bta) = (state.running_mean[ch], gamma[ch], beta[ch]);
        for bi in 0..b {
            for ti in 0..t {
                y[[bi, ch, ti]] = g * (x[[bi, ch, ti]] - m) * istd + bta;
            }
        }
    }
    y
}

pub fn bn_backward(
    dy: &Array3<f64>,
    gamma: &Array1<f64>,
    cache: &BnCache,
) -> (Array3<f64>, Array1<f64>, Array1<f64>) {
    let (b, c, t) = dy.dim();
    let n = (b * t) as f64;
    let mut dx = Array3::<f64>::zeros((b, c, t));
    let mut dgamma = Array1::<f64>::zeros(c);
    let mut dbeta = Array1::<f64>::zeros(c);
    for ch in 0..c {
        let mut sum_dy = 0.0;
        let mut sum_dy_xhat = 0.0;
        for bi in 0..b {
            for ti in 0..t {
                let g = dy[[bi, ch, ti]];
                sum_dy += g;
                sum_dy_xhat += g * cache.xhat[[bi, ch, ti]];
            }
        }
        dgamma[ch] = sum_dy_xhat;
        dbeta[ch] = sum_dy;
        let scale = gamma[ch] * cache.inv_std[ch] / n;
        for bi in 0..b {
            for ti in 0..t {
                dx[[bi, ch, ti]] = scale
                    * (n * dy[[bi, ch, ti]] - sum_dy - cache.xhat[[bi, ch, ti]] * sum_dy_xhat);
            }
        }
    }
    (dx, dgamma, dbeta)
}

pub fn relu_forward(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Uses the forward output as the mask: `y > 0 ⇔ x > 0`.
pub fn relu_backward(dy: &Array3<f64>, y: &Array3<f64>) -> Array3<f64> {
    let mut dx = dy.clone();
    dx.zip_mut_with(y, |d, &yo| {
        if yo <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

/// Non-overlapping max pooling (stride = kernel, trailing remainder dropped).
/// Returns the pooled output and the winning source index per cell.
pub fn maxpool_forward(x: &Array3<f64>, kernel: usize) -> (Array3<f64>, Array3<usize>) {
    let (b, c, t) = x.dim();
    let t_out = t / kernel;
    let mut y = Array3::<f64>::zeros((b, c, t_out));
    let mut arg = Array3::<usize>::zeros((b, c, t_out));
    for bi in 0..b {
        for ch in 0..c {
            for to in 0..t_out {
                let base = to * kernel;
                let mut best = x[[bi, ch, base]];
                let mut best_t = base;
                for k in 1..kernel {
                    let v = x[[bi, ch, base + k]];
                    if v > best {
                        best = v;
                        best_t = base + k;
                    }
                }
                y[[bi, ch, to]] = best;
                arg[[bi, ch, to]] = best_t;
            }
        }
    }
    (y, arg)
}

pub fn maxpool_backward(dy: &Array3<f64>, arg: &Array3<usize>, t_in: usize) -> Array3<f64> {
    let (b, c, t_out) = dy.dim();
    let mut dx = Array3::<f64>::zeros((b, c, t_in));
    for bi in 0..b {
        for ch in 0..c {
            for to in 0..t_out {
                dx[[bi, ch, arg[[bi, ch, to]]]] += dy[[bi, ch, to]];
            }
        }
    }
    dx
}

/// Stride-1 'same' max pooling (used inside inception blocks); out-of-range
/// positions are ignored rather than padded.
pub fn maxpool_same_forward(x: &Array3<f64>, kernel: usize) -> (Array3<f64>, Array3<usize>) {
    let (b, c, t) = x.dim();
    let pad = (kernel - 1) / 2;
    let mut y = Array3::<f64>::zeros((b, c, t));
    let mut arg = Array3::<usize>::zeros((b, c, t));
    for bi in 0..b {
        for ch in 0..c {
            for to in 0..t {
                let lo = to.saturating_sub(pad);
                let hi = (to + kernel - pad).min(t);
                let mut best = f64::NEG_INFINITY;
                let mut best_t = lo;
                for ti in lo..hi {
                    let v = x[[bi, ch, ti]];
                    if v > best {
                        best = v;
                        best_t = ti;
                    }
                }
                y[[bi, ch, to]] = best;
                arg[[bi, ch, to]] = best_t;
            }
        }
    }
    (y, arg)
}

/// Collapses the time axis to its mean: (B, C, T) → (B, C, 1).
pub fn gap_forward(x: &Array3<f64>) -> Array3<f64> {
    let (b, c, t) = x.dim();
    let mut y = Array3::<f64>::zeros((b, c, 1));
    for bi in 0..b {
        for ch in 0..c {
            y[[bi, ch, 0]] = x.slice(s![bi, ch, ..]).sum() / t as f64;
        }
    }
    y
}

pub fn gap_backward(dy: &Array3<f64>, t_in: usize) -> Array3<f64> {
    let (b, c, _) = dy.dim();
    let mut dx = Array3::<f64>::zeros((b, c, t_in));
    for bi in 0..b {
        for ch in 0..c {
            let g = dy[[bi, ch, 0]] / t_in as f64;
            dx.slice_mut(s![bi, ch, ..]).fill(g);
        }
    }
    dx
}

/// (B, C, T) → (B, C·T, 1) with feature index c·T + t.
pub fn flatten_forward(x: &Array3<f64>) -> Array3<f64> {
    let (b, c, t) = x.dim();
    let flat = x.as_standard_layout().into_owned();
    flat.into_shape_with_order((b, c * t, 1)).expect("contiguous reshape")
}

pub fn flatten_backward(dy: &Array3<f64>, c: usize, t: usize) -> Array3<f64> {
    let b = dy.dim().0;
    dy.as_standard_layout()
        .into_owned()
        .into_shape_with_order((b, c, t))
        .expect("contiguous reshape")
}

/// Fully connected layer on (B, F, 1) features; `w` is (out, in).
pub fn dense_forward(x: &Array3<f64>, w: &Array2<f64>, bias: &Array1<f64>) -> Array3<f64> {
    let (b, f, _) = x.dim();
    let x2 = x
        .view()
        .into_shape_with_order((b, f))
        .expect("dense input must be (B, F, 1)");
    let mut y2 = x2.dot(&w.t());
    for mut row in y2.rows_mut() {
        row += bias;
    }
    let o = w.nrows();
    y2.into_shape_with_order((b, o, 1)).expect("contiguous reshape")
}

pub fn dense_backward(
    x: &Array3<f64>,
    w: &Array2<f64>,
    dy: &Array3<f64>,
    want_dx: bool,
) -> (Option<Array3<f64>>, Array2<f64>, Array1<f64>) {
    let (b, f, _) = x.dim();
    let o = w.nrows();
    let x2 = x.view().into_shape_with_order((b, f)).expect("shape");
    let dy2 = dy.view().into_shape_with_order((b, o)).expect("shape");
    let dw = dy2.t().dot(&x2);
    let db = dy2.sum_axis(Axis(0));
    let dx = want_dx.then(|| {
        dy2.dot(w)
            .into_shape_with_order((b, f, 1))
            .expect("contiguous reshape")
    });
    (dx, dw, db)
}

/// Concatenates along the channel axis.
pub fn concat_forward(parts: &[&Array3<f64>]) -> Array3<f64> {
    let (b, _, t) = parts[0].dim();
    let total: usize = parts.iter().map(|p| p.dim().1).sum();
    let mut y = Array3::<f64>::zeros((b, total, t));
    let mut offset = 0;
    for p in parts {
        let c = p.dim().1;
        y.slice_mut(s![.., offset..offset + c, ..]).assign(p);
        offset += c;
    }
    y
}

pub fn concat_backward(dy: &Array3<f64>, sizes: &[usize]) -> Vec<Array3<f64>> {
    let mut grads = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for &c in sizes {
        grads.push(dy.slice(s![.., offset..offset + c, ..]).to_owned());
        offset += c;
    }
    grads
}

/// Extracts channels [start, start+len).
pub fn slice_forward(x: &Array3<f64>, start: usize, len: usize) -> Array3<f64> {
    x.slice(s![.., start..start + len, ..]).to_owned()
}

pub fn slice_backward(dy: &Array3<f64>, c_in: usize, start: usize) -> Array3<f64> {
    let (b, len, t) = dy.dim();
    let mut dx = Array3::<f64>::zeros((b, c_in, t));
    dx.slice_mut(s![.., start..start + len, ..]).assign(dy);
    dx
}

/// Row-stable softmax over the channel axis of (B, C, 1).
pub fn softmax_forward(x: &Array3<f64>) -> Array3<f64> {
    let (b, c, _) = x.dim();
    let mut y = Array3::<f64>::zeros((b, c, 1));
    for bi in 0..b {
        let row = x.slice(s![bi, .., 0]);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for ch in 0..c {
            let e = (row[ch] - max).exp();
            y[[bi, ch, 0]] = e;
            sum += e;
        }
        for ch in 0..c {
            y[[bi, ch, 0]] /= sum;
        }
    }
    y
}

/// Softmax vector-Jacobian product: dx = y ⊙ (dy − Σ dy⊙y).
pub fn softmax_backward(dy: &Array3<f64>, y: &Array3<f64>) -> Array3<f64> {
    let (b, c, _) = dy.dim();
    let mut dx = Array3::<f64>::zeros((b, c, 1));
    for bi in 0..b {
        let mut dot = 0.0;
        for ch in 0..c {
            dot += dy[[bi, ch, 0]] * y[[bi, ch, 0]];
        }
        for ch in 0..c {
            dx[[bi, ch, 0]] = y[[bi, ch, 0]] * (dy[[bi, ch, 0]] - dot);
        }
    }
    dx
}
