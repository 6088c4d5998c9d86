use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Hyperparams, Normalization};
use crate::{Error, Result};

/// One LSTM layer.
///
/// `weights` is row-major with `4 * hidden_size` rows and
/// `input_size + hidden_size` columns; the columns multiply `[x_t; h_{t-1}]`.
/// Row blocks of `hidden_size` are, in order, the input gate, forget gate,
/// candidate and output gate. `bias` follows the same row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub input_size: usize,
    pub hidden_size: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Affine head mapping the top layer's last hidden state to one value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub window_k: usize,
    pub norm: Normalization,
    pub layers: Vec<LstmLayer>,
    pub head: Dense,
}

impl LstmLayer {
    fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            weights: vec![0.0; 4 * hidden_size * (input_size + hidden_size)],
            bias: vec![0.0; 4 * hidden_size],
        }
    }

    fn width(&self) -> usize {
        self.input_size + self.hidden_size
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one layer over a window, kept for backpropagation.
struct LayerTrace {
    /// `[x_t; h_{t-1}]` per step.
    xh: Vec<Vec<f64>>,
    /// Activated gates `[i, f, g, o]` per step.
    gates: Vec<Vec<f64>>,
    /// Cell states, `cells[0]` is the zero initial state.
    cells: Vec<Vec<f64>>,
    tanh_cells: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

pub(crate) struct ForwardTrace {
    layers: Vec<LayerTrace>,
    pub(crate) output: f64,
}

impl LstmModel {
    /// All-zero parameters.
    pub fn zeros(window_k: usize, hidden_size: usize, num_layers: usize, norm: Normalization) -> Self {
        let layers = (0..num_layers)
            .map(|l| LstmLayer::zeros(if l == 0 { 1 } else { hidden_size }, hidden_size))
            .collect();
        Self {
            window_k,
            norm,
            layers,
            head: Dense {
                weights: vec![0.0; hidden_size],
                bias: 0.0,
            },
        }
    }

    /// Uniform initialization in `±1/sqrt(fan_in)` for every parameter,
    /// fan-in being the width of the layer's input.
    pub fn init(hp: &Hyperparams, norm: Normalization, rng: &mut impl Rng) -> Self {
        let mut model = Self::zeros(hp.window_k, hp.hidden_size, hp.num_layers, norm);
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.width() as f64).sqrt();
            for p in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *p = rng.random_range(-bound..=bound);
            }
        }
        let bound = 1.0 / (hp.hidden_size as f64).sqrt();
        for p in model
            .head
            .weights
            .iter_mut()
            .chain(std::iter::once(&mut model.head.bias))
        {
            *p = rng.random_range(-bound..=bound);
        }
        model
    }

    pub fn seeded(hp: &Hyperparams, norm: Normalization) -> Self {
        Self::init(hp, norm, &mut ChaCha8Rng::seed_from_u64(hp.seed))
    }

    pub fn hidden_size(&self) -> usize {
        self.head.weights.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.window_k, self.hidden_size(), self.layers.len(), self.norm)
    }

    /// Parameter blocks in checkpoint order: for each layer its weights then
    /// bias, then the head weights and bias.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.push(&self.head.weights);
        out.push(std::slice::from_ref(&self.head.bias));
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.push(&mut self.head.weights);
        out.push(std::slice::from_mut(&mut self.head.bias));
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Checks internal dimensions, used when loading checkpoints.
    pub fn check_shapes(&self) -> Result<()> {
        let hidden = self.hidden_size();
        if self.layers.is_empty() || hidden == 0 || self.window_k == 0 {
            return Err(Error::Validation(
                "model needs at least one layer, unit and step".into(),
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let input = if i == 0 { 1 } else { hidden };
            if l.input_size != input
                || l.hidden_size != hidden
                || l.weights.len() != 4 * hidden * (input + hidden)
                || l.bias.len() != 4 * hidden
            {
                return Err(Error::Validation(format!("layer {i} has inconsistent dimensions")));
            }
        }
        if self.param_slices().iter().any(|s| s.iter().any(|p| !p.is_finite())) {
            return Err(Error::Numeric("model parameters".into()));
        }
        Ok(())
    }

    /// Network output (in normalized units) for one window.
    pub fn forward(&self, window: &[f64]) -> Result<f64> {
        Ok(self.forward_trace(window)?.output)
    }

    pub(crate) fn forward_trace(&self, window: &[f64]) -> Result<ForwardTrace> {
        if window.len() != self.window_k {
            return Err(Error::Dimension {
                expected: self.window_k,
                actual: window.len(),
            });
        }
        let mut inputs: Vec<Vec<f64>> = window.iter().map(|&x| vec![x]).collect();
        let mut traces = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let trace = layer_forward(layer, &inputs);
            inputs = trace.hidden.clone();
            traces.push(trace);
        }
        let last = inputs.last().expect("window is non-empty");
        let output = self.head.bias + self.head.weights.iter().zip(last).map(|(w, h)| w * h).sum::<f64>();
        if !output.is_finite() {
            return Err(Error::Numeric("network output".into()));
        }
        Ok(ForwardTrace { layers: traces, output })
    }

    /// Adds `d_output * ∂output/∂θ` into `grads`.
    pub(crate) fn backward(&self, trace: &ForwardTrace, d_output: f64, grads: &mut LstmModel) {
        let top = trace.layers.last().expect("at least one layer");
        let steps = top.hidden.len();
        let hidden = self.hidden_size();

        for (g, h) in grads.head.weights.iter_mut().zip(&top.hidden[steps - 1]) {
            *g += d_output * h;
        }
        grads.head.bias += d_output;

        let mut d_hidden = vec![vec![0.0; hidden]; steps];
        for (d, w) in d_hidden[steps - 1].iter_mut().zip(&self.head.weights) {
            *d = d_output * w;
        }
        for (l, layer) in self.layers.iter().enumerate().rev() {
            d_hidden = layer_backward(layer, &trace.layers[l], &d_hidden, &mut grads.layers[l]);
        }
    }
}

fn layer_forward(layer: &LstmLayer, inputs: &[Vec<f64>]) -> LayerTrace {
    let h = layer.hidden_size;
    let width = layer.width();
    let steps = inputs.len();
    let mut trace = LayerTrace {
        xh: Vec::with_capacity(steps),
        gates: Vec::with_capacity(steps),
        cells: Vec::with_capacity(steps + 1),
        tanh_cells: Vec::with_capacity(steps),
        hidden: Vec::with_capacity(steps),
    };
    trace.cells.push(vec![0.0; h]);
    let mut h_prev = vec![0.0; h];
    for x in inputs {
        let mut xh = Vec::with_capacity(width);
        xh.extend_from_slice(x);
        xh.extend_from_slice(&h_prev);

        let mut gates: Vec<f64> = layer
            .weights
            .chunks_exact(width)
            .zip(&layer.bias)
            .map(|(row, b)| b + row.iter().zip(&xh).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        for (r, z) in gates.iter_mut().enumerate() {
            *z = if (2 * h..3 * h).contains(&r) {
                z.tanh()
            } else {
                sigmoid(*z)
            };
        }

        let c_prev = trace.cells.last().expect("initial state");
        let cell: Vec<f64> = (0..h)
            .map(|j| gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j])
            .collect();
        let tanh_cell: Vec<f64> = cell.iter().map(|c| c.tanh()).collect();
        h_prev = (0..h).map(|j| gates[3 * h + j] * tanh_cell[j]).collect();

        trace.xh.push(xh);
        trace.gates.push(gates);
        trace.cells.push(cell);
        trace.tanh_cells.push(tanh_cell);
        trace.hidden.push(h_prev.clone());
    }
    trace
}

/// Backpropagates through one layer. `d_hidden[t]` is the loss gradient
/// arriving at `h_t` from above; returns the gradient for each input `x_t`.
fn layer_backward(
    layer: &LstmLayer,
    trace: &LayerTrace,
    d_hidden: &[Vec<f64>],
    grads: &mut LstmLayer,
) -> Vec<Vec<f64>> {
    let h = layer.hidden_size;
    let input = layer.input_size;
    let width = layer.width();
    let steps = d_hidden.len();
    let mut d_inputs = vec![Vec::new(); steps];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];

    for t in (0..steps).rev() {
        let gates = &trace.gates[t];
        for j in 0..h {
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = trace.tanh_cells[t][j];
            let dh = d_hidden[t][j] + dh_next[j];
            let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
            dc_next[j] = dc * f;
            dz[j] = dc * g * i * (1.0 - i);
            dz[h + j] = dc * trace.cells[t][j] * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - g * g);
            dz[3 * h + j] = dh * tc * o * (1.0 - o);
        }

        let xh = &trace.xh[t];
        let mut d_xh = vec![0.0; width];
        for (r, (&d, (row, grow))) in dz
            .iter()
            .zip(
                layer
                    .weights
                    .chunks_exact(width)
                    .zip(grads.weights.chunks_exact_mut(width)),
            )
            .enumerate()
        {
            grads.bias[r] += d;
            for c in 0..width {
                grow[c] += d * xh[c];
                d_xh[c] += d * row[c];
            }
        }
        dh_next.copy_from_slice(&d_xh[input..]);
        d_xh.truncate(input);
        d_inputs[t] = d_xh;
    }
    d_inputs
}
