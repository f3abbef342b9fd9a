use ndarray::{Array1, Array2, Axis};

pub(crate) fn sigmoid(x: &Array1<f64>) -> Array1<f64> {
    x.mapv(|v| 1.0 / (1.0 + (-v).exp()))
}

pub(crate) fn tanh(x: &Array1<f64>) -> Array1<f64> {
    x.mapv(f64::tanh)
}

/// Normalized exponentials with max-subtraction.
pub(crate) fn softmax(scores: &Array1<f64>) -> Array1<f64> {
    let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps = scores.mapv(|v| (v - max).exp());
    let sum = exps.sum();
    exps / sum
}

/// Log of the normalized exponentials, stable for large score magnitudes.
pub(crate) fn log_softmax(scores: &Array1<f64>) -> Array1<f64> {
    let max = scores.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_sum = scores.mapv(|v| (v - max).exp()).sum().ln() + max;
    scores.mapv(|v| v - log_sum)
}

/// Gradient of scores given the softmax output `probs` and the gradient
/// `dprobs` at the output: `probs ⊙ (dprobs − probs·dprobs)`.
pub(crate) fn softmax_backward(probs: &Array1<f64>, dprobs: &Array1<f64>) -> Array1<f64> {
    let dot = probs.dot(dprobs);
    probs * &dprobs.mapv(|v| v - dot)
}

/// `acc += col ⊗ row`.
pub(crate) fn add_outer(acc: &mut Array2<f64>, col: &Array1<f64>, row: &Array1<f64>) {
    let col = col.view().insert_axis(Axis(1));
    let row = row.view().insert_axis(Axis(0));
    ndarray::linalg::general_mat_mul(1.0, &col, &row, 1.0, acc);
}

/// Concatenation of 1-d arrays.
pub(crate) fn concat(parts: &[&Array1<f64>]) -> Array1<f64> {
    let len: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = Array1::zeros(len);
    let mut offset = 0;
    for part in parts {
        out.slice_mut(ndarray::s![offset..offset + part.len()])
            .assign(part);
        offset += part.len();
    }
    out
}
