//! Embedding networks over a flat list of parameter matrices, with the
//! forward caches and reverse passes needed for episodic training.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A row-major parameter matrix; biases are single-column matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Param {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect(),
        }
    }

    /// Square matrix with orthonormal rows (Gram-Schmidt on Gaussian rows).
    fn orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        while rows.len() < n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            for u in &rows {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            // A draw in the span of the previous rows is redrawn.
            if norm > 1e-8 {
                rows.push(v.into_iter().map(|a| a / norm).collect());
            }
        }
        Self {
            rows: n,
            cols: n,
            data: rows.concat(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                actual: self.data.len(),
            });
        }
        Ok(())
    }
}

/// `out = W x + b`.
fn affine(w: &Param, b: &Param, x: &[f64]) -> Vec<f64> {
    w.data
        .chunks_exact(w.cols)
        .zip(&b.data)
        .map(|(row, bias)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bias)
        .collect()
}

/// Accumulates `dW += g xᵀ`, `db += g` and returns `Wᵀ g`.
fn affine_backward(w: &Param, x: &[f64], g: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let mut dx = vec![0.0; w.cols];
    for (r, &gr) in g.iter().enumerate() {
        if gr == 0.0 {
            continue;
        }
        db[r] += gr;
        let row = &w.data[r * w.cols..(r + 1) * w.cols];
        let drow = &mut dw[r * w.cols..(r + 1) * w.cols];
        for c in 0..w.cols {
            drow[c] += gr * x[c];
            dx[c] += gr * row[c];
        }
    }
    dx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// Fully connected: ReLU hidden layers, linear output.
    Fcn,
    /// Elman recurrence over the gap sequence (one gap per step, tanh),
    /// followed by a linear head on the last hidden state.
    Rnn,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::Fcn => "fcn",
            Architecture::Rnn => "rnn",
        })
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fcn" => Ok(Architecture::Fcn),
            "rnn" => Ok(Architecture::Rnn),
            _ => Err(Error::Unknown {
                what: "architecture",
                name: s.to_string(),
            }),
        }
    }
}

/// Embedding network `f_θ: ℝ^L → ℝ^M`.
///
/// FCN parameters are `[W1, b1, W2, b2, ...]`; RNN parameters are
/// `[W_x, W_h, b_h, W_o, b_o]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingNet {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub embed_dim: usize,
    pub params: Vec<Param>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    input: Vec<f64>,
    /// FCN: post-activation output of each hidden layer. RNN: `h_1..h_L`.
    states: Vec<Vec<f64>>,
}

pub type Grads = Vec<Vec<f64>>;

impl EmbeddingNet {
    /// FCN with weights and biases drawn from `U(±1/√fan_in)`.
    pub fn fcn<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], embed_dim: usize, rng: &mut R) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(embed_dim);
        if dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("layer sizes must be positive: {dims:?}")));
        }
        let params = dims
            .windows(2)
            .flat_map(|d| {
                let bound = 1.0 / (d[0] as f64).sqrt();
                [Param::uniform(d[1], d[0], bound, rng), Param::uniform(d[1], 1, bound, rng)]
            })
            .collect();
        Ok(Self {
            architecture: Architecture::Fcn,
            input_dim,
            embed_dim,
            params,
        })
    }

    /// RNN with an orthogonal recurrence and every other parameter drawn
    /// from `U(±1/√H)`.
    pub fn rnn<R: Rng + ?Sized>(input_dim: usize, hidden: usize, embed_dim: usize, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || embed_dim == 0 {
            return Err(Error::InvalidConfig("RNN sizes must be positive".into()));
        }
        let bound = 1.0 / (hidden as f64).sqrt();
        let params = vec![
            Param::uniform(hidden, 1, bound, rng),
            Param::orthogonal(hidden, rng),
            Param::uniform(hidden, 1, bound, rng),
            Param::uniform(embed_dim, hidden, bound, rng),
            Param::uniform(embed_dim, 1, bound, rng),
        ];
        Ok(Self {
            architecture: Architecture::Rnn,
            input_dim,
            embed_dim,
            params,
        })
    }

    /// FCN from explicit `(W, b)` pairs.
    pub fn fcn_from_layers(layers: Vec<(Param, Param)>) -> Result<Self> {
        let net = Self {
            architecture: Architecture::Fcn,
            input_dim: layers.first().map_or(0, |(w, _)| w.cols),
            embed_dim: layers.last().map_or(0, |(w, _)| w.rows),
            params: layers.into_iter().flat_map(|(w, b)| [w, b]).collect(),
        };
        net.validate()?;
        Ok(net)
    }

    /// Checks that parameter shapes compose and all values are finite.
    pub fn validate(&self) -> Result<()> {
        for p in &self.params {
            p.check()?;
        }
        let bad = |msg: String| Err(Error::Malformed(msg));
        match self.architecture {
            Architecture::Fcn => {
                if self.params.is_empty() || !self.params.len().is_multiple_of(2) {
                    return bad("FCN needs (W, b) pairs".into());
                }
                let mut dim = self.input_dim;
                for pair in self.params.chunks_exact(2) {
                    let (w, b) = (&pair[0], &pair[1]);
                    if w.cols != dim || b.rows != w.rows || b.cols != 1 {
                        return bad(format!("layer {}x{} does not follow width {dim}", w.rows, w.cols));
                    }
                    dim = w.rows;
                }
                if dim != self.embed_dim {
                    return bad(format!("output width {dim} != embed_dim {}", self.embed_dim));
                }
            }
            Architecture::Rnn => {
                let [wx, wh, bh, wo, bo] = self.params.as_slice() else {
                    return bad("RNN needs exactly five parameter matrices".into());
                };
                let h = wx.rows;
                let ok = wx.cols == 1
                    && (wh.rows, wh.cols) == (h, h)
                    && (bh.rows, bh.cols) == (h, 1)
                    && (wo.rows, wo.cols) == (self.embed_dim, h)
                    && (bo.rows, bo.cols) == (self.embed_dim, 1);
                if !ok {
                    return bad("RNN parameter shapes do not compose".into());
                }
            }
        }
        if !self.is_finite() {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|v| v.is_finite()))
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        self.params.iter().map(|p| vec![0.0; p.len()]).collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Cache)> {
        self.check_input(x)?;
        let mut states = Vec::new();
        let out = match self.architecture {
            Architecture::Fcn => {
                let layers = self.params.len() / 2;
                let mut a = x.to_vec();
                for (i, pair) in self.params.chunks_exact(2).enumerate() {
                    let mut z = affine(&pair[0], &pair[1], &a);
                    if i + 1 < layers {
                        z.iter_mut().for_each(|v| *v = v.max(0.0));
                        states.push(z.clone());
                    }
                    a = z;
                }
                a
            }
            Architecture::Rnn => {
                let [wx, wh, bh, wo, bo] = self.params.as_slice() else {
                    unreachable!("validated shape")
                };
                let mut h = vec![0.0; wx.rows];
                for &xt in x {
                    let rec = affine(wh, bh, &h);
                    h = rec
                        .iter()
                        .zip(&wx.data)
                        .map(|(r, w)| (r + w * xt).tanh())
                        .collect();
                    states.push(h.clone());
                }
                affine(wo, bo, &h)
            }
        };
        Ok((
            out,
            Cache {
                input: x.to_vec(),
                states,
            },
        ))
    }

    /// Adds `∂(gᵀ f(x))/∂θ` to `grads`, where `g` is the gradient with respect
    /// to the output of the forward pass that produced `cache`.
    pub fn backward(&self, cache: &Cache, grad_out: &[f64], grads: &mut Grads) {
        match self.architecture {
            Architecture::Fcn => {
                let layers = self.params.len() / 2;
                let mut g = grad_out.to_vec();
                for i in (0..layers).rev() {
                    let input = if i == 0 { &cache.input } else { &cache.states[i - 1] };
                    let (gw, rest) = grads[2 * i..].split_at_mut(1);
                    let dx = affine_backward(&self.params[2 * i], input, &g, &mut gw[0], &mut rest[0]);
                    if i > 0 {
                        g = dx
                            .into_iter()
                            .zip(&cache.states[i - 1])
                            .map(|(d, &a)| if a > 0.0 { d } else { 0.0 })
                            .collect();
                    }
                }
            }
            Architecture::Rnn => {
                let [wx, wh, _, wo, _] = self.params.as_slice() else {
                    unreachable!("validated shape")
                };
                let hidden = wx.rows;
                let zero = vec![0.0; hidden];
                let last = cache.states.last().unwrap_or(&zero);
                let (head, tail) = grads.split_at_mut(3);
                let (gwo, gbo) = tail.split_at_mut(1);
                let mut dh = affine_backward(wo, last, grad_out, &mut gwo[0], &mut gbo[0]);
                let (gwx, rest) = head.split_at_mut(1);
                let (gwh, gbh) = rest.split_at_mut(1);
                for t in (0..cache.states.len()).rev() {
                    let h = &cache.states[t];
                    let prev = if t == 0 { &zero } else { &cache.states[t - 1] };
                    let dpre: Vec<f64> = dh.iter().zip(h).map(|(d, hv)| d * (1.0 - hv * hv)).collect();
                    for (j, &dp) in dpre.iter().enumerate() {
                        gwx[0][j] += dp * cache.input[t];
                    }
                    dh = affine_backward(wh, prev, &dpre, &mut gwh[0], &mut gbh[0]);
                }
            }
        }
    }
}
