use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EncoderParams;

/// Affine map `y = W x + b`, `W` stored out × in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    /// Uniform Glorot init for the weight, zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            weight: glorot(output, input, rng),
            bias: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

pub(crate) fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..a))
}

/// One tanh hidden layer followed by a 2-logit output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub hidden: Dense,
    pub output: Dense,
}

impl Classifier {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Classifier {
            hidden: Dense::zeros(input, hidden),
            output: Dense::zeros(hidden, 2),
        }
    }

    pub fn glorot(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Classifier {
            hidden: Dense::glorot(input, hidden, rng),
            output: Dense::glorot(hidden, 2, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.output_dim()
    }
}

/// Query, key and value projections.
#[derive(Debug, Clone, PartialEq)]
pub struct AiemParams {
    /// d_a × d_f
    pub w_q: Array2<f64>,
    /// d_a × d_f
    pub w_k: Array2<f64>,
    /// d_a × d_r
    pub w_v: Array2<f64>,
}

impl AiemParams {
    pub fn zeros(d_f: usize, d_r: usize, d_a: usize) -> Self {
        AiemParams {
            w_q: Array2::zeros((d_a, d_f)),
            w_k: Array2::zeros((d_a, d_f)),
            w_v: Array2::zeros((d_a, d_r)),
        }
    }

    pub fn attention_dim(&self) -> usize {
        self.w_q.nrows()
    }

    /// The key dimension used in the softmax temperature.
    pub fn key_dim(&self) -> usize {
        self.w_k.nrows()
    }
}

/// Post-attention linear map plus the major and two aux classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    /// d_a → d_h, applied to every attention output row.
    pub post_linear: Dense,
    /// (N·d_h + d_f) → 2
    pub major: Classifier,
    /// (d_r + d_f) → 2 each, with different hidden widths.
    pub aux: [Classifier; 2],
}

/// Every trainable tensor of one trait model.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub aiem: AiemParams,
    pub head: HeadParams,
    pub encoder: Option<EncoderParams>,
}

/// Borrowed view of one named tensor.
#[derive(Debug)]
pub struct TensorRef<'a> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

fn flat(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn flat_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are kept in standard layout")
}

impl Params {
    /// All tensors in a fixed order with stable names.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        fn m<'a>(name: &'static str, a: &'a Array2<f64>) -> TensorRef<'a> {
            TensorRef {
                name,
                shape: a.shape().to_vec(),
                data: flat(a),
            }
        }
        fn v<'a>(name: &'static str, a: &'a Array1<f64>) -> TensorRef<'a> {
            TensorRef {
                name,
                shape: a.shape().to_vec(),
                data: a.as_slice().expect("standard layout"),
            }
        }
        let h = &self.head;
        let mut out = vec![
            m("aiem.w_q", &self.aiem.w_q),
            m("aiem.w_k", &self.aiem.w_k),
            m("aiem.w_v", &self.aiem.w_v),
            m("head.post_linear.weight", &h.post_linear.weight),
            v("head.post_linear.bias", &h.post_linear.bias),
            m("head.major.hidden.weight", &h.major.hidden.weight),
            v("head.major.hidden.bias", &h.major.hidden.bias),
            m("head.major.output.weight", &h.major.output.weight),
            v("head.major.output.bias", &h.major.output.bias),
            m("head.aux0.hidden.weight", &h.aux[0].hidden.weight),
            v("head.aux0.hidden.bias", &h.aux[0].hidden.bias),
            m("head.aux0.output.weight", &h.aux[0].output.weight),
            v("head.aux0.output.bias", &h.aux[0].output.bias),
            m("head.aux1.hidden.weight", &h.aux[1].hidden.weight),
            v("head.aux1.hidden.bias", &h.aux[1].hidden.bias),
            m("head.aux1.output.weight", &h.aux[1].output.weight),
            v("head.aux1.output.bias", &h.aux[1].output.bias),
        ];
        if let Some(e) = &self.encoder {
            out.push(m("encoder.table", &e.table));
            out.push(m("encoder.projection", &e.projection));
        }
        out
    }

    /// Mutable slices in the same order as [`Params::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let h = &mut self.head;
        let [aux0, aux1] = &mut h.aux;
        let mut out: Vec<(&'static str, &mut [f64])> = vec![
            ("aiem.w_q", flat_mut(&mut self.aiem.w_q)),
            ("aiem.w_k", flat_mut(&mut self.aiem.w_k)),
            ("aiem.w_v", flat_mut(&mut self.aiem.w_v)),
            ("head.post_linear.weight", flat_mut(&mut h.post_linear.weight)),
            ("head.post_linear.bias", h.post_linear.bias.as_slice_mut().unwrap()),
            ("head.major.hidden.weight", flat_mut(&mut h.major.hidden.weight)),
            ("head.major.hidden.bias", h.major.hidden.bias.as_slice_mut().unwrap()),
            ("head.major.output.weight", flat_mut(&mut h.major.output.weight)),
            ("head.major.output.bias", h.major.output.bias.as_slice_mut().unwrap()),
            ("head.aux0.hidden.weight", flat_mut(&mut aux0.hidden.weight)),
            ("head.aux0.hidden.bias", aux0.hidden.bias.as_slice_mut().unwrap()),
            ("head.aux0.output.weight", flat_mut(&mut aux0.output.weight)),
            ("head.aux0.output.bias", aux0.output.bias.as_slice_mut().unwrap()),
            ("head.aux1.hidden.weight", flat_mut(&mut aux1.hidden.weight)),
            ("head.aux1.hidden.bias", aux1.hidden.bias.as_slice_mut().unwrap()),
            ("head.aux1.output.weight", flat_mut(&mut aux1.output.weight)),
            ("head.aux1.output.bias", aux1.output.bias.as_slice_mut().unwrap()),
        ];
        if let Some(e) = &mut self.encoder {
            out.push(("encoder.table", flat_mut(&mut e.table)));
            out.push(("encoder.projection", flat_mut(&mut e.projection)));
        }
        out
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Params, scale: f64) {
        let others = other.tensors();
        for ((_, dst), src) in self.tensors_mut().into_iter().zip(others) {
            for (d, s) in dst.iter_mut().zip(src.data) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Params {
        Params {
            aiem: AiemParams::zeros(3, 4, 2),
            head: HeadParams {
                post_linear: Dense::zeros(2, 2),
                major: Classifier::zeros(2 * 2 + 3, 5),
                aux: [Classifier::zeros(4 + 3, 3), Classifier::zeros(4 + 3, 2)],
            },
            encoder: Some(EncoderParams::zeros(6, 3, 4)),
        }
    }

    #[test]
    fn named_views_agree() {
        let mut p = small();
        let names: Vec<_> = p.tensors().iter().map(|t| t.name).collect();
        let mut_names: Vec<_> = p.tensors_mut().iter().map(|t| t.0).collect();
        assert_eq!(names, mut_names);
        assert_eq!(names.len(), 19);
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert_eq!(p.tensors()[0].shape, vec![2, 3]);
    }

    #[test]
    fn add_scaled_and_scale() {
        let mut a = small();
        for (_, t) in a.tensors_mut() {
            t.fill(1.0);
        }
        let mut b = a.zeros_like();
        b.add_scaled(&a, 2.0);
        b.scale(0.25);
        assert!(b.tensors().iter().all(|t| t.data.iter().all(|&x| x == 0.5)));
        assert_eq!(b.num_scalars(), a.num_scalars());
    }
}
