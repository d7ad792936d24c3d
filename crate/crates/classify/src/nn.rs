//! Layers and networks over a flat `f64` parameter vector.
//!
//! Every layer is a pure function of its input and a slice of the shared
//! parameter vector. The forward pass returns a cache that the backward pass
//! consumes to produce the input gradient and to accumulate parameter
//! gradients. Sequences are stored step-major: `x[t * channels + c]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    /// Dropout disabled.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    /// `y = x W + b`, `W` stored `[n_in][n_out]`.
    Dense {
        n_in: usize,
        n_out: usize,
        offset: usize,
    },
    /// Valid 1-D convolution, kernel stored `[k][c_in][c_out]`.
    Conv1d {
        len_in: usize,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        offset: usize,
    },
    MaxPool {
        len_in: usize,
        channels: usize,
        pool: usize,
    },
    Relu,
    /// Inverted dropout.
    Dropout {
        rate: f64,
    },
    /// Gates ordered input, forget, cell, output. Input kernel `[c_in][4H]`,
    /// recurrent kernel `[H][4H]`, bias `[4H]`. The recurrent dropout mask
    /// is drawn once per sequence.
    Lstm {
        len: usize,
        c_in: usize,
        units: usize,
        return_sequences: bool,
        recurrent_dropout: f64,
        offset: usize,
    },
}

impl Layer {
    pub fn n_params(&self) -> usize {
        match *self {
            Layer::Dense { n_in, n_out, .. } => n_in * n_out + n_out,
            Layer::Conv1d {
                c_in,
                c_out,
                kernel,
                ..
            } => kernel * c_in * c_out + c_out,
            Layer::Lstm { c_in, units, .. } => (c_in + units + 1) * 4 * units,
            _ => 0,
        }
    }

    fn init(&self, params: &mut [f64], rng: &mut ChaCha8Rng) {
        let mut glorot = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in slice {
                *w = rng.random_range(-limit..limit);
            }
        };
        match *self {
            Layer::Dense {
                n_in,
                n_out,
                offset,
            } => {
                glorot(&mut params[offset..offset + n_in * n_out], n_in, n_out);
            }
            Layer::Conv1d {
                c_in,
                c_out,
                kernel,
                offset,
                ..
            } => {
                let n = kernel * c_in * c_out;
                glorot(
                    &mut params[offset..offset + n],
                    kernel * c_in,
                    kernel * c_out,
                );
            }
            Layer::Lstm {
                c_in,
                units: h,
                offset,
                ..
            } => {
                let wx = c_in * 4 * h;
                let wh = h * 4 * h;
                glorot(&mut params[offset..offset + wx], c_in, 4 * h);
                glorot(&mut params[offset + wx..offset + wx + wh], h, 4 * h);
                // Forget-gate bias starts at 1.
                let b = offset + wx + wh;
                params[b + h..b + 2 * h].fill(1.0);
            }
            _ => {}
        }
    }
}

pub enum Cache {
    None,
    Input(Vec<f64>),
    Pool { argmax: Vec<usize>, len_in: usize },
    Mask(Vec<f64>),
    Lstm(Box<LstmCache>),
}

pub struct LstmCache {
    x: Vec<f64>,
    mask: Vec<f64>,
    /// `h_0..h_len`, each of `units`.
    hs: Vec<f64>,
    cs: Vec<f64>,
    /// Activated gates per step, `[i f g o]` of `units` each.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn forward_layer(
    layer: &Layer,
    p: &[f64],
    x: Vec<f64>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Cache) {
    match *layer {
        Layer::Dense {
            n_in,
            n_out,
            offset,
        } => {
            debug_assert_eq!(x.len(), n_in);
            let w = &p[offset..offset + n_in * n_out];
            let mut y = p[offset + n_in * n_out..offset + n_in * n_out + n_out].to_vec();
            for (i, xi) in x.iter().enumerate() {
                if *xi != 0.0 {
                    axpy(&mut y, *xi, &w[i * n_out..(i + 1) * n_out]);
                }
            }
            (y, Cache::Input(x))
        }
        Layer::Conv1d {
            len_in,
            c_in,
            c_out,
            kernel,
            offset,
        } => {
            debug_assert_eq!(x.len(), len_in * c_in);
            let len_out = len_in + 1 - kernel;
            let w = &p[offset..offset + kernel * c_in * c_out];
            let b = &p[offset + kernel * c_in * c_out..offset + kernel * c_in * c_out + c_out];
            let mut y = vec![0.0; len_out * c_out];
            for t in 0..len_out {
                let yt = &mut y[t * c_out..(t + 1) * c_out];
                yt.copy_from_slice(b);
                for j in 0..kernel {
                    let xrow = &x[(t + j) * c_in..(t + j + 1) * c_in];
                    for (i, xv) in xrow.iter().enumerate() {
                        let wi = (j * c_in + i) * c_out;
                        axpy(yt, *xv, &w[wi..wi + c_out]);
                    }
                }
            }
            (y, Cache::Input(x))
        }
        Layer::MaxPool {
            len_in,
            channels,
            pool,
        } => {
            let len_out = len_in / pool;
            let mut y = vec![0.0; len_out * channels];
            let mut argmax = vec![0; len_out * channels];
            for t in 0..len_out {
                for c in 0..channels {
                    let mut best = (t * pool) * channels + c;
                    for k in 1..pool {
                        let idx = (t * pool + k) * channels + c;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    y[t * channels + c] = x[best];
                    argmax[t * channels + c] = best;
                }
            }
            (
                y,
                Cache::Pool {
                    argmax,
                    len_in: x.len(),
                },
            )
        }
        Layer::Relu => {
            let mask: Vec<f64> = x.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect();
            let y = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
            (y, Cache::Mask(mask))
        }
        Layer::Dropout { rate } => {
            if mode == Mode::Eval || rate <= 0.0 {
                return (x, Cache::None);
            }
            let keep = 1.0 / (1.0 - rate);
            let mask: Vec<f64> = (0..x.len())
                .map(|_| {
                    if rng.random::<f64>() < rate {
                        0.0
                    } else {
                        keep
                    }
                })
                .collect();
            let y = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
            (y, Cache::Mask(mask))
        }
        Layer::Lstm {
            len,
            c_in,
            units: h,
            return_sequences,
            recurrent_dropout,
            offset,
        } => {
            debug_assert_eq!(x.len(), len * c_in);
            let g4 = 4 * h;
            let wx = &p[offset..offset + c_in * g4];
            let wh = &p[offset + c_in * g4..offset + (c_in + h) * g4];
            let b = &p[offset + (c_in + h) * g4..offset + (c_in + h + 1) * g4];
            let mask: Vec<f64> = if mode == Mode::Train && recurrent_dropout > 0.0 {
                let keep = 1.0 / (1.0 - recurrent_dropout);
                (0..h)
                    .map(|_| {
                        if rng.random::<f64>() < recurrent_dropout {
                            0.0
                        } else {
                            keep
                        }
                    })
                    .collect()
            } else {
                vec![1.0; h]
            };
            let mut hs = vec![0.0; (len + 1) * h];
            let mut cs = vec![0.0; (len + 1) * h];
            let mut gates = vec![0.0; len * g4];
            let mut tanh_c = vec![0.0; len * h];
            let mut z = vec![0.0; g4];
            let mut hd = vec![0.0; h];
            for t in 0..len {
                z.copy_from_slice(b);
                for (i, xv) in x[t * c_in..(t + 1) * c_in].iter().enumerate() {
                    axpy(&mut z, *xv, &wx[i * g4..(i + 1) * g4]);
                }
                for j in 0..h {
                    hd[j] = hs[t * h + j] * mask[j];
                }
                for (j, hv) in hd.iter().enumerate() {
                    if *hv != 0.0 {
                        axpy(&mut z, *hv, &wh[j * g4..(j + 1) * g4]);
                    }
                }
                let gt = &mut gates[t * g4..(t + 1) * g4];
                for j in 0..h {
                    let i_g = sigmoid(z[j]);
                    let f_g = sigmoid(z[h + j]);
                    let g_g = z[2 * h + j].tanh();
                    let o_g = sigmoid(z[3 * h + j]);
                    gt[j] = i_g;
                    gt[h + j] = f_g;
                    gt[2 * h + j] = g_g;
                    gt[3 * h + j] = o_g;
                    let c = f_g * cs[t * h + j] + i_g * g_g;
                    cs[(t + 1) * h + j] = c;
                    let tc = c.tanh();
                    tanh_c[t * h + j] = tc;
                    hs[(t + 1) * h + j] = o_g * tc;
                }
            }
            let y = if return_sequences {
                hs[h..].to_vec()
            } else {
                hs[len * h..].to_vec()
            };
            (
                y,
                Cache::Lstm(Box::new(LstmCache {
                    x,
                    mask,
                    hs,
                    cs,
                    gates,
                    tanh_c,
                })),
            )
        }
    }
}

pub fn backward_layer(
    layer: &Layer,
    p: &[f64],
    cache: Cache,
    dy: Vec<f64>,
    g: &mut [f64],
) -> Vec<f64> {
    match (layer, cache) {
        (
            &Layer::Dense {
                n_in,
                n_out,
                offset,
            },
            Cache::Input(x),
        ) => {
            let w = &p[offset..offset + n_in * n_out];
            let (gw, gb) = g[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            axpy(gb, 1.0, &dy);
            let mut dx = vec![0.0; n_in];
            for i in 0..n_in {
                let row = i * n_out..(i + 1) * n_out;
                if x[i] != 0.0 {
                    axpy(&mut gw[row.clone()], x[i], &dy);
                }
                dx[i] = dot(&w[row], &dy);
            }
            dx
        }
        (
            &Layer::Conv1d {
                len_in,
                c_in,
                c_out,
                kernel,
                offset,
            },
            Cache::Input(x),
        ) => {
            let len_out = len_in + 1 - kernel;
            let nw = kernel * c_in * c_out;
            let w = &p[offset..offset + nw];
            let (gw, gb) = g[offset..offset + nw + c_out].split_at_mut(nw);
            let mut dx = vec![0.0; len_in * c_in];
            for t in 0..len_out {
                let dyt = &dy[t * c_out..(t + 1) * c_out];
                axpy(gb, 1.0, dyt);
                for j in 0..kernel {
                    for i in 0..c_in {
                        let xi = (t + j) * c_in + i;
                        let wi = (j * c_in + i) * c_out;
                        axpy(&mut gw[wi..wi + c_out], x[xi], dyt);
                        dx[xi] += dot(&w[wi..wi + c_out], dyt);
                    }
                }
            }
            dx
        }
        (Layer::MaxPool { .. }, Cache::Pool { argmax, len_in }) => {
            let mut dx = vec![0.0; len_in];
            for (d, idx) in dy.iter().zip(&argmax) {
                dx[*idx] += d;
            }
            dx
        }
        (Layer::Relu | Layer::Dropout { .. }, Cache::Mask(mask)) => {
            dy.iter().zip(&mask).map(|(d, m)| d * m).collect()
        }
        (Layer::Dropout { .. }, Cache::None) => dy,
        (
            &Layer::Lstm {
                len,
                c_in,
                units: h,
                return_sequences,
                offset,
                ..
            },
            Cache::Lstm(c),
        ) => {
            let g4 = 4 * h;
            let wx = &p[offset..offset + c_in * g4];
            let wh = &p[offset + c_in * g4..offset + (c_in + h) * g4];
            let (gwx, rest) = g[offset..offset + (c_in + h + 1) * g4].split_at_mut(c_in * g4);
            let (gwh, gb) = rest.split_at_mut(h * g4);
            let mut dx = vec![0.0; len * c_in];
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            let mut dz = vec![0.0; g4];
            for t in (0..len).rev() {
                let gt = &c.gates[t * g4..(t + 1) * g4];
                for j in 0..h {
                    let mut dh = dh_next[j];
                    if return_sequences {
                        dh += dy[t * h + j];
                    } else if t == len - 1 {
                        dh += dy[j];
                    }
                    let (i_g, f_g, g_g, o_g) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
                    let tc = c.tanh_c[t * h + j];
                    let d_o = dh * tc;
                    let dcell = dc_next[j] + dh * o_g * (1.0 - tc * tc);
                    let d_i = dcell * g_g;
                    let d_g = dcell * i_g;
                    let d_f = dcell * c.cs[t * h + j];
                    dc_next[j] = dcell * f_g;
                    dz[j] = d_i * i_g * (1.0 - i_g);
                    dz[h + j] = d_f * f_g * (1.0 - f_g);
                    dz[2 * h + j] = d_g * (1.0 - g_g * g_g);
                    dz[3 * h + j] = d_o * o_g * (1.0 - o_g);
                }
                axpy(gb, 1.0, &dz);
                for i in 0..c_in {
                    let xv = c.x[t * c_in + i];
                    axpy(&mut gwx[i * g4..(i + 1) * g4], xv, &dz);
                    dx[t * c_in + i] = dot(&wx[i * g4..(i + 1) * g4], &dz);
                }
                for j in 0..h {
                    let hd = c.hs[t * h + j] * c.mask[j];
                    if hd != 0.0 {
                        axpy(&mut gwh[j * g4..(j + 1) * g4], hd, &dz);
                    }
                    dh_next[j] = dot(&wh[j * g4..(j + 1) * g4], &dz) * c.mask[j];
                }
            }
            dx
        }
        _ => unreachable!("cache does not match layer"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Fdn,
    Cnn,
    Lstm,
    /// Single dense layer. Used to verify the gradient machinery.
    Linear,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Fdn => "fdn",
            Architecture::Cnn => "cnn",
            Architecture::Lstm => "lstm",
            Architecture::Linear => "linear",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fdn" => Ok(Architecture::Fdn),
            "cnn" => Ok(Architecture::Cnn),
            "lstm" => Ok(Architecture::Lstm),
            "linear" => Ok(Architecture::Linear),
            other => Err(format!(
                "unknown architecture {other:?} (expected fdn, cnn or lstm)"
            )),
        }
    }
}

/// Layer sizes and optimiser settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub dense_units: Vec<usize>,
    pub dropout: f64,
    pub conv_filters: Vec<usize>,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub lstm_units: Vec<usize>,
    pub recurrent_dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Validation-loss drop that counts as progress for early stopping.
    pub min_delta: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dense_units: vec![128, 64, 32],
            dropout: 0.3,
            conv_filters: vec![32, 64],
            kernel_size: 5,
            pool_size: 2,
            lstm_units: vec![32, 32],
            recurrent_dropout: 0.2,
            learning_rate: 1e-3,
            batch_size: 8,
            max_epochs: 200,
            patience: 10,
            min_delta: 1e-4,
        }
    }
}

/// A network: optional per-channel branches whose outputs are concatenated,
/// followed by a head. Without branches the head sees the flat input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub architecture: Architecture,
    pub seq_len: usize,
    pub n_channels: usize,
    pub n_out: usize,
    pub branches: Vec<Vec<Layer>>,
    pub head: Vec<Layer>,
    pub n_params: usize,
}

struct Builder {
    offset: usize,
    layers: Vec<Layer>,
}

impl Builder {
    fn new(offset: usize) -> Self {
        Builder {
            offset,
            layers: Vec::new(),
        }
    }

    fn push(&mut self, layer: Layer) {
        self.offset += layer.n_params();
        self.layers.push(layer);
    }

    fn dense(&mut self, n_in: usize, n_out: usize) {
        self.push(Layer::Dense {
            n_in,
            n_out,
            offset: self.offset,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("architecture {architecture} cannot take a sequence of {seq_len} steps with these sizes")]
pub struct ShapeError {
    pub architecture: Architecture,
    pub seq_len: usize,
}

impl Network {
    pub fn build(
        architecture: Architecture,
        hp: &Hyperparams,
        seq_len: usize,
        n_channels: usize,
        n_out: usize,
    ) -> Result<Self, ShapeError> {
        let shape_err = ShapeError {
            architecture,
            seq_len,
        };
        let mut branches = Vec::new();
        let mut offset = 0;
        let head_in = match architecture {
            Architecture::Fdn | Architecture::Linear => seq_len * n_channels,
            Architecture::Cnn => {
                let mut width = 0;
                for _ in 0..n_channels {
                    let mut b = Builder::new(offset);
                    let (mut len, mut ch) = (seq_len, 1);
                    for &filters in &hp.conv_filters {
                        if len < hp.kernel_size || hp.kernel_size == 0 || hp.pool_size == 0 {
                            return Err(shape_err);
                        }
                        b.push(Layer::Conv1d {
                            len_in: len,
                            c_in: ch,
                            c_out: filters,
                            kernel: hp.kernel_size,
                            offset: b.offset,
                        });
                        len = len + 1 - hp.kernel_size;
                        b.push(Layer::Relu);
                        b.push(Layer::MaxPool {
                            len_in: len,
                            channels: filters,
                            pool: hp.pool_size,
                        });
                        len /= hp.pool_size;
                        ch = filters;
                    }
                    if len == 0 {
                        return Err(shape_err);
                    }
                    width = len * ch;
                    offset = b.offset;
                    branches.push(b.layers);
                }
                width * n_channels
            }
            Architecture::Lstm => {
                let mut width = 0;
                for _ in 0..n_channels {
                    let mut b = Builder::new(offset);
                    let mut c_in = 1;
                    for (k, &units) in hp.lstm_units.iter().enumerate() {
                        let last = k + 1 == hp.lstm_units.len();
                        b.push(Layer::Lstm {
                            len: seq_len,
                            c_in,
                            units,
                            return_sequences: !last,
                            recurrent_dropout: hp.recurrent_dropout,
                            offset: b.offset,
                        });
                        c_in = units;
                    }
                    width = c_in;
                    offset = b.offset;
                    branches.push(b.layers);
                }
                width * n_channels
            }
        };
        let mut head = Builder::new(offset);
        let mut n_in = head_in;
        if architecture == Architecture::Fdn {
            for &units in &hp.dense_units {
                head.dense(n_in, units);
                head.push(Layer::Relu);
                head.push(Layer::Dropout { rate: hp.dropout });
                n_in = units;
            }
        }
        head.dense(n_in, n_out);
        Ok(Network {
            architecture,
            seq_len,
            n_channels,
            n_out,
            branches,
            n_params: head.offset,
            head: head.layers,
        })
    }

    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.n_params];
        for layer in self.branches.iter().flatten().chain(&self.head) {
            layer.init(&mut p, rng);
        }
        p
    }

    pub fn input_len(&self) -> usize {
        self.seq_len * self.n_channels
    }

    pub fn forward(
        &self,
        p: &[f64],
        x: &[f64],
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<f64>, NetCache) {
        assert_eq!(
            x.len(),
            self.input_len(),
            "input length does not match the network"
        );
        let mut branch_caches = Vec::with_capacity(self.branches.len());
        let mut branch_widths = Vec::with_capacity(self.branches.len());
        let head_input = if self.branches.is_empty() {
            x.to_vec()
        } else {
            let mut cat = Vec::new();
            for (c, layers) in self.branches.iter().enumerate() {
                let seq: Vec<f64> = (0..self.seq_len)
                    .map(|t| x[t * self.n_channels + c])
                    .collect();
                let (out, caches) = run_forward(layers, p, seq, mode, rng);
                branch_widths.push(out.len());
                cat.extend_from_slice(&out);
                branch_caches.push(caches);
            }
            cat
        };
        let (out, head_cache) = run_forward(&self.head, p, head_input, mode, rng);
        (
            out,
            NetCache {
                branch_caches,
                branch_widths,
                head_cache,
            },
        )
    }

    /// Accumulates parameter gradients into `grads` and returns the input
    /// gradient.
    pub fn backward(
        &self,
        p: &[f64],
        cache: NetCache,
        d_out: Vec<f64>,
        grads: &mut [f64],
    ) -> Vec<f64> {
        let d_head_in = run_backward(&self.head, p, cache.head_cache, d_out, grads);
        if self.branches.is_empty() {
            return d_head_in;
        }
        let mut dx = vec![0.0; self.input_len()];
        let mut start = 0;
        for (c, (layers, caches)) in self.branches.iter().zip(cache.branch_caches).enumerate() {
            let w = cache.branch_widths[c];
            let d_seq = run_backward(
                layers,
                p,
                caches,
                d_head_in[start..start + w].to_vec(),
                grads,
            );
            start += w;
            for (t, d) in d_seq.iter().enumerate() {
                dx[t * self.n_channels + c] = *d;
            }
        }
        dx
    }
}

pub struct NetCache {
    branch_caches: Vec<Vec<Cache>>,
    branch_widths: Vec<usize>,
    head_cache: Vec<Cache>,
}

fn run_forward(
    layers: &[Layer],
    p: &[f64],
    mut x: Vec<f64>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<Cache>) {
    let mut caches = Vec::with_capacity(layers.len());
    for layer in layers {
        let (y, c) = forward_layer(layer, p, x, mode, rng);
        caches.push(c);
        x = y;
    }
    (x, caches)
}

fn run_backward(
    layers: &[Layer],
    p: &[f64],
    caches: Vec<Cache>,
    mut dy: Vec<f64>,
    g: &mut [f64],
) -> Vec<f64> {
    for (layer, cache) in layers.iter().zip(caches).rev() {
        dy = backward_layer(layer, p, cache, dy, g);
    }
    dy
}
