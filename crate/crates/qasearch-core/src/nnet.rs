//! Dense feed-forward networks with reverse-mode gradients and Adam.
//!
//! Shapes are batch-first: a forward pass maps `batch x in` to
//! `batch x out`. Hidden layers use ReLU, the output layer is linear.
//! Gradients returned by [`Mlp::backward`] are sums over the batch rows;
//! callers fold any averaging into the output gradient.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};

/// Checkpoint block format version.
pub const CHECKPOINT_VERSION: u32 = 1;

const MLP_MAGIC: &[u8; 4] = b"MLPW";
const ADAM_MAGIC: &[u8; 4] = b"ADMS";

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Array2<f64>>, // out x in
    biases: Vec<Array1<f64>>,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn add(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.mapv_inplace(|v| v * factor);
        }
        for b in &mut self.biases {
            b.mapv_inplace(|v| v * factor);
        }
    }

    fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

impl Mlp {
    /// He-style uniform init scaled by fan-in.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid_argument(format!(
                "bad layer sizes {sizes:?}"
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-limit..=limit)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid_argument(format!(
                "bad layer sizes {sizes:?}"
            )));
        }
        let weights = sizes
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = sizes.windows(2).map(|p| Array1::zeros(p[1])).collect();
        Ok(Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|p| p[1] * p[0] + p[1])
            .sum()
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Array2<f64> {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Array1<f64> {
        &mut self.biases[layer]
    }

    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Result<(Array2<f64>, MlpCache)> {
        if input.ncols() != self.input_dim() {
            return Err(Error::invalid_argument(format!(
                "input has {} columns, expected {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let n_layers = self.weights.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut post = Vec::with_capacity(n_layers);
        let mut a = input.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            for mut row in z.rows_mut() {
                row += b;
            }
            let activated = if l + 1 == n_layers {
                z.clone()
            } else {
                z.mapv(|v| v.max(0.0))
            };
            pre.push(z);
            post.push(activated.clone());
            a = activated;
        }
        Ok((
            a,
            MlpCache {
                input: input.to_owned(),
                pre,
                post,
            },
        ))
    }

    /// Exact reverse-mode gradients for the forward pass that produced
    /// `cache`. Returns parameter gradients (batch sums) and the gradient
    /// with respect to the input rows.
    pub fn backward(
        &self,
        cache: &MlpCache,
        grad_output: ArrayView2<'_, f64>,
    ) -> Result<(MlpGrads, Array2<f64>)> {
        let n_layers = self.weights.len();
        if cache.pre.len() != n_layers {
            return Err(Error::InvalidState(
                "cache does not match network depth".into(),
            ));
        }
        if grad_output.dim() != (cache.input.nrows(), self.output_dim()) {
            return Err(Error::invalid_argument(format!(
                "output gradient has shape {:?}",
                grad_output.dim()
            )));
        }
        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = grad_output.to_owned();
        for l in (0..n_layers).rev() {
            if l + 1 != n_layers {
                // ReLU mask from the cached pre-activations.
                let z = &cache.pre[l];
                delta.zip_mut_with(z, |d, &zv| {
                    if zv <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let below = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            grads.weights[l] = delta.t().dot(below);
            grads.biases[l] = delta.sum_axis(ndarray::Axis(0));
            delta = delta.dot(&self.weights[l]);
        }
        Ok((grads, delta))
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::invalid_argument(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut cursor = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            for v in w.iter_mut() {
                *v = flat[cursor];
                cursor += 1;
            }
            for v in b.iter_mut() {
                *v = flat[cursor];
                cursor += 1;
            }
        }
        Ok(())
    }
}

/// Adam optimizer state over one network's flattened parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update on the network's parameters.
pub fn adam_step(mlp: &mut Mlp, grads: &MlpGrads, state: &mut AdamState) -> Result<()> {
    let g = grads.flat();
    if g.len() != state.m.len() {
        return Err(Error::invalid_argument(format!(
            "gradient has {} entries, state has {}",
            g.len(),
            state.m.len()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::TrainingDivergence(
            "non-finite gradient entry".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let mut params = mlp.params_flat();
    for i in 0..g.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    mlp.set_params_flat(&params)
}

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn read_u32(bytes: &mut &[u8], what: &str) -> Result<u32> {
    if bytes.len() < 4 {
        return Err(Error::Checkpoint(format!("truncated: {what}")));
    }
    let (head, rest) = bytes.split_at(4);
    *bytes = rest;
    Ok(u32::from_le_bytes(head.try_into().unwrap()))
}

fn read_f64s(bytes: &mut &[u8], n: usize, what: &str) -> Result<Vec<f64>> {
    if bytes.len() < n * 8 {
        return Err(Error::Checkpoint(format!("truncated: {what}")));
    }
    let (head, rest) = bytes.split_at(n * 8);
    *bytes = rest;
    Ok(head
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Versioned header plus the flat parameter blob.
pub fn encode_mlp(mlp: &Mlp) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MLP_MAGIC);
    push_u32(&mut out, CHECKPOINT_VERSION);
    push_u32(&mut out, mlp.sizes.len() as u32);
    for &s in &mlp.sizes {
        push_u32(&mut out, s as u32);
    }
    for v in mlp.params_flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decode one MLP block, consuming it from the front of `bytes`.
pub fn decode_mlp(bytes: &mut &[u8]) -> Result<Mlp> {
    if bytes.len() < 4 || &bytes[..4] != MLP_MAGIC {
        return Err(Error::Checkpoint("bad network magic".into()));
    }
    *bytes = &bytes[4..];
    let version = read_u32(bytes, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_sizes = read_u32(bytes, "layer count")? as usize;
    if !(2..=64).contains(&n_sizes) {
        return Err(Error::Checkpoint(format!("implausible layer count {n_sizes}")));
    }
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        let s = read_u32(bytes, "layer size")? as usize;
        if s == 0 || s > 1 << 20 {
            return Err(Error::Checkpoint(format!("implausible layer size {s}")));
        }
        sizes.push(s);
    }
    let mut mlp = Mlp::zeros(&sizes).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let flat = read_f64s(bytes, mlp.param_count(), "parameters")?;
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Checkpoint("non-finite parameter".into()));
    }
    mlp.set_params_flat(&flat)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(mlp)
}

pub fn encode_adam(state: &AdamState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(ADAM_MAGIC);
    push_u32(&mut out, CHECKPOINT_VERSION);
    out.extend_from_slice(&(state.m.len() as u64).to_le_bytes());
    out.extend_from_slice(&state.step.to_le_bytes());
    for v in [state.learning_rate, state.beta1, state.beta2, state.epsilon] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in state.m.iter().chain(state.v.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_adam(bytes: &mut &[u8]) -> Result<AdamState> {
    if bytes.len() < 4 || &bytes[..4] != ADAM_MAGIC {
        return Err(Error::Checkpoint("bad optimizer magic".into()));
    }
    *bytes = &bytes[4..];
    let version = read_u32(bytes, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    if bytes.len() < 16 {
        return Err(Error::Checkpoint("truncated optimizer header".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let step = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    *bytes = &bytes[16..];
    if n > 1 << 28 {
        return Err(Error::Checkpoint(format!("implausible parameter count {n}")));
    }
    let hyper = read_f64s(bytes, 4, "hyperparameters")?;
    let m = read_f64s(bytes, n, "first moments")?;
    let v = read_f64s(bytes, n, "second moments")?;
    if hyper.iter().chain(m.iter()).chain(v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Checkpoint("non-finite optimizer entry".into()));
    }
    Ok(AdamState {
        m,
        v,
        step,
        learning_rate: hyper[0],
        beta1: hyper[1],
        beta2: hyper[2],
        epsilon: hyper[3],
    })
}
