use super::dd::Dd;
use super::lstm::LstmModel;
use crate::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Gradient of the squared error `(output - target)^2` by backpropagation.
pub fn squared_error_gradient(model: &LstmModel, window: &[f64], target: f64) -> Result<LstmModel> {
    let trace = model.forward_trace(window)?;
    let mut grads = model.zeros_like();
    model.backward(&trace, 2.0 * (trace.output - target), &mut grads);
    Ok(grads)
}

/// Largest relative disagreement between backpropagation and central finite
/// differences over every parameter:
/// `max |a - n| / max(|a|, |n|, 1e-8)`.
///
/// The perturbed losses are evaluated by a separate double-double forward
/// pass so that rounding noise stays far below the tolerance even for
/// parameters whose gradient is ~1e-9.
pub fn gradient_check(model: &LstmModel, window: &[f64], target: f64) -> Result<f64> {
    gradient_check_with(model, window, target, squared_error_gradient)
}

/// As [`gradient_check`] with a caller-supplied analytic gradient.
pub fn gradient_check_with<G>(model: &LstmModel, window: &[f64], target: f64, analytic: G) -> Result<f64>
where
    G: Fn(&LstmModel, &[f64], f64) -> Result<LstmModel>,
{
    if window.len() != model.window_k {
        return Err(Error::Dimension {
            expected: model.window_k,
            actual: window.len(),
        });
    }
    let grads = analytic(model, window, target)?;
    let analytic = grads.param_slices().into_iter().flatten().copied();
    let blocks = model.param_slices();
    let perturbed = blocks
        .iter()
        .enumerate()
        .flat_map(|(b, s)| (0..s.len()).map(move |j| (b, j)));

    let step = Dd::from(FD_STEP);
    let mut worst = 0.0f64;
    for (a, (block, j)) in analytic.zip(perturbed) {
        let up = dd_squared_error(model, window, target, (block, j, step));
        let down = dd_squared_error(model, window, target, (block, j, -step));
        let numeric = ((up - down) / (step + step)).to_f64();
        if !numeric.is_finite() {
            return Err(Error::Numeric("finite difference".into()));
        }
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// `(output - target)^2` in double-double with parameter `(block, index)`
/// shifted by `delta`. Blocks follow [`LstmModel::param_slices`].
fn dd_squared_error(model: &LstmModel, window: &[f64], target: f64, shift: (usize, usize, Dd)) -> Dd {
    let (shift_block, shift_index, delta) = shift;
    let param = |block: usize, index: usize, value: f64| {
        if block == shift_block && index == shift_index {
            Dd::from(value) + delta
        } else {
            Dd::from(value)
        }
    };

    let mut seq: Vec<Vec<Dd>> = window.iter().map(|&x| vec![Dd::from(x)]).collect();
    for (l, layer) in model.layers.iter().enumerate() {
        let (wb, bb) = (2 * l, 2 * l + 1);
        let h = layer.hidden_size;
        let width = layer.input_size + h;
        let mut hidden = vec![Dd::ZERO; h];
        let mut cell = vec![Dd::ZERO; h];
        let mut out = Vec::with_capacity(seq.len());
        for x in &seq {
            let xh: Vec<Dd> = x.iter().chain(hidden.iter()).copied().collect();
            let z: Vec<Dd> = (0..4 * h)
                .map(|r| {
                    (0..width).fold(param(bb, r, layer.bias[r]), |acc, c| {
                        let k = r * width + c;
                        acc + param(wb, k, layer.weights[k]) * xh[c]
                    })
                })
                .collect();
            for j in 0..h {
                let i = z[j].sigmoid();
                let f = z[h + j].sigmoid();
                let g = z[2 * h + j].tanh();
                let o = z[3 * h + j].sigmoid();
                cell[j] = f * cell[j] + i * g;
                hidden[j] = o * cell[j].tanh();
            }
            out.push(hidden.clone());
        }
        seq = out;
    }
    let (hw, hb) = (2 * model.layers.len(), 2 * model.layers.len() + 1);
    let last = seq.last().expect("non-empty window");
    let y = model
        .head
        .weights
        .iter()
        .zip(last)
        .enumerate()
        .fold(param(hb, 0, model.head.bias), |acc, (j, (&w, &h))| {
            acc + param(hw, j, w) * h
        });
    let e = y - Dd::from(target);
    e * e
}
