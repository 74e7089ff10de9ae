//! Attention fusion and classifier forward passes.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::loss::PredictionDistribution;
use super::params::{AiemParams, Classifier, Dense, HeadParams};
use crate::error::{Error, Result};

/// Intermediate tensors of one attention pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AiemTrace {
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// N × N, row-stochastic.
    pub attn: Array2<f64>,
    /// N × d_a
    pub h: Array2<f64>,
}

fn check_finite(a: &Array2<f64>, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Row-wise softmax with max subtraction.
pub fn row_softmax(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|x| (x - m).exp());
        let z = row.sum();
        row /= z;
    }
    out
}

/// Queries and keys from the (standardized) feature rows, values from the
/// segment representations; `H = softmax(Q Kᵀ / √d_k) V`.
pub fn aiem_forward(f: &Array2<f64>, r: &Array2<f64>, params: &AiemParams) -> Result<AiemTrace> {
    check_finite(f, "feature matrix")?;
    check_finite(r, "representation matrix")?;
    let n = f.nrows();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            context: "segment count",
            expected: 1,
            actual: 0,
        });
    }
    if r.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "representation rows",
            expected: n,
            actual: r.nrows(),
        });
    }
    if f.ncols() != params.w_q.ncols() {
        return Err(Error::DimensionMismatch {
            context: "feature width",
            expected: params.w_q.ncols(),
            actual: f.ncols(),
        });
    }
    if r.ncols() != params.w_v.ncols() {
        return Err(Error::DimensionMismatch {
            context: "representation width",
            expected: params.w_v.ncols(),
            actual: r.ncols(),
        });
    }
    let q = f.dot(&params.w_q.t());
    let k = f.dot(&params.w_k.t());
    let v = r.dot(&params.w_v.t());
    let scale = 1.0 / (params.key_dim() as f64).sqrt();
    let scores = q.dot(&k.t()) * scale;
    let attn = row_softmax(&scores);
    let h = attn.dot(&v);
    Ok(AiemTrace { q, k, v, attn, h })
}

/// Attention received by each segment: column sums divided by N.
pub fn attention_mass(attn: &Array2<f64>) -> Vec<f64> {
    let n = attn.nrows().max(1) as f64;
    attn.sum_axis(Axis(0)).iter().map(|c| c / n).collect()
}

pub(crate) fn dense_forward(d: &Dense, x: ArrayView1<f64>) -> Array1<f64> {
    d.weight.dot(&x) + &d.bias
}

/// Activations kept for the backward pass of one classifier call.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTrace {
    /// Input after dropout.
    pub input: Array1<f64>,
    /// tanh activations before dropout.
    pub hidden: Array1<f64>,
    pub logits: [f64; 2],
    pub probs: PredictionDistribution,
}

/// Inverted-dropout scale vectors; `None` means evaluation mode.
pub(crate) fn classifier_forward(
    c: &Classifier,
    x: Array1<f64>,
    input_mask: Option<&Array1<f64>>,
    hidden_mask: Option<&Array1<f64>>,
) -> ClassifierTrace {
    let input = match input_mask {
        Some(m) => x * m,
        None => x,
    };
    let hidden = dense_forward(&c.hidden, input.view()).mapv(f64::tanh);
    let dropped = match hidden_mask {
        Some(m) => &hidden * m,
        None => hidden.clone(),
    };
    let out = dense_forward(&c.output, dropped.view());
    let logits = [out[0], out[1]];
    ClassifierTrace {
        input,
        hidden,
        logits,
        probs: PredictionDistribution::from_logits(logits),
    }
}

/// Input of the major classifier: the mapped attention rows in segment
/// order followed by the whole-sample feature vector.
pub(crate) fn major_input(z: &Array2<f64>, f_bar: ArrayView1<f64>) -> Array1<f64> {
    let (n, d_h) = z.dim();
    let mut x = Array1::zeros(n * d_h + f_bar.len());
    for (i, row) in z.rows().into_iter().enumerate() {
        x.slice_mut(s![i * d_h..(i + 1) * d_h]).assign(&row);
    }
    x.slice_mut(s![n * d_h..]).assign(&f_bar);
    x
}

/// Applies the post-attention linear map to every row of `h`.
pub(crate) fn post_linear(h: &Array2<f64>, d: &Dense) -> Array2<f64> {
    h.dot(&d.weight.t()) + d.bias.view().insert_axis(Axis(0))
}

/// Evaluation-mode major prediction from attention output `h` and the
/// whole-sample features.
pub fn major_forward(h: &Array2<f64>, f_bar: &Array1<f64>, head: &HeadParams) -> Result<([f64; 2], PredictionDistribution)> {
    let d_h = head.post_linear.output_dim();
    let expected_n = (head.major.input_dim() - f_bar.len().min(head.major.input_dim())) / d_h.max(1);
    if h.ncols() != head.post_linear.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "attention output width",
            expected: head.post_linear.input_dim(),
            actual: h.ncols(),
        });
    }
    if h.nrows() * d_h + f_bar.len() != head.major.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "segment count",
            expected: expected_n,
            actual: h.nrows(),
        });
    }
    let z = post_linear(h, &head.post_linear);
    let t = classifier_forward(&head.major, major_input(&z, f_bar.view()), None, None);
    Ok((t.logits, t.probs))
}

/// Evaluation-mode aux prediction for one segment.
pub fn aux_forward(r_n: &Array1<f64>, f_n: &Array1<f64>, classifier: &Classifier) -> Result<([f64; 2], PredictionDistribution)> {
    let width = r_n.len() + f_n.len();
    if width != classifier.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "aux classifier input",
            expected: classifier.input_dim(),
            actual: width,
        });
    }
    let mut x = Array1::zeros(width);
    x.slice_mut(s![..r_n.len()]).assign(r_n);
    x.slice_mut(s![r_n.len()..]).assign(f_n);
    let t = classifier_forward(classifier, x, None, None);
    Ok((t.logits, t.probs))
}
