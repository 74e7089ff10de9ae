//! One trait model: standardizer, attention, heads and optional toy encoder,
//! with an exact reverse pass.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{aiem_forward, classifier_forward, major_input, post_linear, AiemTrace, ClassifierTrace};
use super::loss::{cross_entropy, cross_entropy_logit_grad, LossWeights, PredictionDistribution};
use super::params::{glorot, AiemParams, Classifier, Dense, HeadParams, Params};
use crate::embeddings::{embed_toy, toy_backward, EncoderParams};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

/// Where segment representations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderKind {
    /// Precomputed vectors, not trained.
    Fixed,
    /// Trainable mean-pooling encoder with embedding width `d_e`.
    Toy { d_e: usize, vocab_size: usize },
}

/// Shapes and dropout rates of one trait model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_segments: usize,
    pub d_f: usize,
    pub d_r: usize,
    pub d_a: usize,
    pub d_h: usize,
    pub major_hidden: usize,
    pub aux_hidden: [usize; 2],
    pub dropout: f64,
    pub pooler_dropout: f64,
    pub encoder: EncoderKind,
}

impl ModelConfig {
    /// Desk-scale defaults for `n` segments and `d_f` features.
    pub fn new(n_segments: usize, d_f: usize, d_r: usize, encoder: EncoderKind) -> Self {
        ModelConfig {
            n_segments,
            d_f,
            d_r,
            d_a: 32,
            d_h: 16,
            major_hidden: 64,
            aux_hidden: [64, 48],
            dropout: 0.1,
            pooler_dropout: 0.45,
            encoder,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.n_segments, self.d_f, self.d_r, self.d_a, self.d_h, self.major_hidden];
        if dims.contains(&0) || self.aux_hidden.contains(&0) {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        for p in [self.dropout, self.pooler_dropout] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("dropout rate {p} outside [0, 1)")));
            }
        }
        if let EncoderKind::Toy { d_e, vocab_size } = self.encoder {
            if d_e == 0 || vocab_size == 0 {
                return Err(Error::Config("toy encoder dimensions must be positive".into()));
            }
        }
        Ok(())
    }

    /// Classifier used for segment `n`: even → 0, odd → 1.
    pub fn aux_classifier(n: usize) -> usize {
        n % 2
    }
}

/// Column statistics applied to the feature rows before attention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(d: usize) -> Self {
        Standardizer {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    /// Population mean and standard deviation per column; constant columns
    /// get unit scale.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a Array2<f64>>, d: usize) -> Self {
        let mut sum = vec![0.0; d];
        let mut count = 0usize;
        let mats: Vec<&Array2<f64>> = rows.into_iter().collect();
        for m in &mats {
            for row in m.rows() {
                for (s, v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Standardizer::identity(d);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; d];
        for m in &mats {
            for row in m.rows() {
                for ((acc, v), mu) in sq.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
        }
        let std = sq
            .iter()
            .map(|s| {
                let sd = (s / count as f64).sqrt();
                if sd < 1e-12 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, f: &Array2<f64>) -> Array2<f64> {
        let mut out = f.clone();
        for mut row in out.rows_mut() {
            for ((v, mu), sd) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / sd;
            }
        }
        out
    }
}

/// Segment representations: fixed vectors or token ids for the toy encoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Representations {
    Fixed(Array2<f64>),
    Tokens(Vec<Vec<usize>>),
}

/// Everything the model sees for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    /// N × d_f raw segment features.
    pub features: Array2<f64>,
    /// Whole-sample features.
    pub whole: Array1<f64>,
    pub reps: Representations,
}

impl ModelInput {
    pub fn n_segments(&self) -> usize {
        self.features.nrows()
    }
}

/// Inverted-dropout multipliers for one training pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub major_input: Array1<f64>,
    pub major_hidden: Array1<f64>,
    pub aux_input: Vec<Array1<f64>>,
    pub aux_hidden: Vec<Array1<f64>>,
}

fn mask(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Array1<f64> {
    if p == 0.0 {
        return Array1::ones(len);
    }
    let keep = 1.0 / (1.0 - p);
    Array1::from_shape_simple_fn(len, || if rng.gen::<f64>() < p { 0.0 } else { keep })
}

impl DropoutMasks {
    pub fn sample(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let n = config.n_segments;
        let major_input = mask(n * config.d_h + config.d_f, config.dropout, rng);
        let major_hidden = mask(config.major_hidden, config.pooler_dropout, rng);
        let mut aux_input = Vec::with_capacity(n);
        let mut aux_hidden = Vec::with_capacity(n);
        for i in 0..n {
            aux_input.push(mask(config.d_r + config.d_f, config.dropout, rng));
            let width = config.aux_hidden[ModelConfig::aux_classifier(i)];
            aux_hidden.push(mask(width, config.pooler_dropout, rng));
        }
        DropoutMasks {
            major_input,
            major_hidden,
            aux_input,
            aux_hidden,
        }
    }
}

/// Full forward record of one sample.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub f_std: Array2<f64>,
    pub r: Array2<f64>,
    pub aiem: AiemTrace,
    /// N × d_h mapped attention rows.
    pub z: Array2<f64>,
    pub major: ClassifierTrace,
    pub aux: Vec<ClassifierTrace>,
}

impl ForwardTrace {
    /// The advanced feature vector: mapped rows in order, then f̄.
    pub fn advanced_features(&self, whole: &Array1<f64>) -> Array1<f64> {
        major_input(&self.z, whole.view())
    }

    pub fn aux_distributions(&self) -> Vec<PredictionDistribution> {
        self.aux.iter().map(|t| t.probs).collect()
    }
}

/// Trainable model for a single trait.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitModel {
    pub config: ModelConfig,
    pub params: Params,
    pub standardizer: Standardizer,
}

impl TraitModel {
    /// Glorot-initialized weights, zero biases, identity standardizer.
    pub fn init(config: ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let aiem = AiemParams {
            w_q: glorot(c.d_a, c.d_f, rng),
            w_k: glorot(c.d_a, c.d_f, rng),
            w_v: glorot(c.d_a, c.d_r, rng),
        };
        let head = HeadParams {
            post_linear: Dense::glorot(c.d_a, c.d_h, rng),
            major: Classifier::glorot(c.n_segments * c.d_h + c.d_f, c.major_hidden, rng),
            aux: [
                Classifier::glorot(c.d_r + c.d_f, c.aux_hidden[0], rng),
                Classifier::glorot(c.d_r + c.d_f, c.aux_hidden[1], rng),
            ],
        };
        let encoder = match c.encoder {
            EncoderKind::Fixed => None,
            EncoderKind::Toy { d_e, vocab_size } => Some(EncoderParams {
                table: Array2::from_shape_simple_fn((vocab_size, d_e), || rng.gen_range(-0.1..0.1)),
                projection: glorot(c.d_r, d_e, rng),
            }),
        };
        let standardizer = Standardizer::identity(c.d_f);
        Ok(TraitModel {
            config,
            params: Params { aiem, head, encoder },
            standardizer,
        })
    }

    fn representations(&self, input: &ModelInput) -> Result<Array2<f64>> {
        match (&input.reps, &self.params.encoder) {
            (Representations::Fixed(r), None) => Ok(r.clone()),
            (Representations::Tokens(ids), Some(enc)) => {
                let vocab = enc.table.nrows();
                if let Some(&bad) = ids.iter().flatten().find(|&&t| t >= vocab) {
                    return Err(Error::DimensionMismatch {
                        context: "token id",
                        expected: vocab,
                        actual: bad,
                    });
                }
                Ok(embed_toy(ids, enc))
            }
            (Representations::Fixed(_), Some(_)) => {
                Err(Error::Config("model expects token ids for its toy encoder".into()))
            }
            (Representations::Tokens(_), None) => {
                Err(Error::Config("model expects precomputed representations".into()))
            }
        }
    }

    fn check_input(&self, input: &ModelInput) -> Result<()> {
        let c = &self.config;
        if input.n_segments() != c.n_segments {
            return Err(Error::DimensionMismatch {
                context: "segment count",
                expected: c.n_segments,
                actual: input.n_segments(),
            });
        }
        if input.whole.len() != c.d_f {
            return Err(Error::DimensionMismatch {
                context: "whole-sample features",
                expected: c.d_f,
                actual: input.whole.len(),
            });
        }
        if input.whole.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("whole-sample features"));
        }
        Ok(())
    }

    /// Forward pass; `masks = None` is evaluation mode.
    pub fn forward(&self, input: &ModelInput, masks: Option<&DropoutMasks>) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let r = self.representations(input)?;
        let f_std = self.standardizer.apply(&input.features);
        let aiem = aiem_forward(&f_std, &r, &self.params.aiem)?;
        let head = &self.params.head;
        let z = post_linear(&aiem.h, &head.post_linear);
        let major = classifier_forward(
            &head.major,
            major_input(&z, input.whole.view()),
            masks.map(|m| &m.major_input),
            masks.map(|m| &m.major_hidden),
        );
        let d_r = self.config.d_r;
        let aux = (0..input.n_segments())
            .map(|n| {
                let mut x = Array1::zeros(d_r + self.config.d_f);
                x.slice_mut(s![..d_r]).assign(&r.row(n));
                x.slice_mut(s![d_r..]).assign(&input.features.row(n));
                let c = &head.aux[ModelConfig::aux_classifier(n)];
                classifier_forward(c, x, masks.map(|m| &m.aux_input[n]), masks.map(|m| &m.aux_hidden[n]))
            })
            .collect();
        Ok(ForwardTrace {
            f_std,
            r,
            aiem,
            z,
            major,
            aux,
        })
    }

    /// `λ_aux · mean_n CE(aux_n) + λ_major · CE(major)` for one sample.
    pub fn sample_loss(trace: &ForwardTrace, label: u8, weights: LossWeights) -> f64 {
        let aux = trace.aux.iter().map(|t| cross_entropy(&t.probs, label)).sum::<f64>() / trace.aux.len() as f64;
        weights.aux * aux + weights.major * cross_entropy(&trace.major.probs, label)
    }

    /// Gradient of [`TraitModel::sample_loss`] with respect to every tensor.
    pub fn backward(
        &self,
        input: &ModelInput,
        trace: &ForwardTrace,
        label: u8,
        weights: LossWeights,
        masks: Option<&DropoutMasks>,
    ) -> Params {
        let p = &self.params;
        let c = &self.config;
        let n = trace.aux.len();
        let mut g = p.zeros_like();

        // major head
        let dlogit = cross_entropy_logit_grad(&trace.major.probs, label).map(|v| v * weights.major);
        let dx = classifier_backward(
            &p.head.major,
            &trace.major,
            dlogit,
            masks.map(|m| &m.major_input),
            masks.map(|m| &m.major_hidden),
            &mut g.head.major,
        );
        let dz = dx
            .slice(s![..n * c.d_h])
            .to_owned()
            .into_shape_with_order((n, c.d_h))
            .expect("contiguous slice");
        g.head.post_linear.weight += &dz.t().dot(&trace.aiem.h);
        g.head.post_linear.bias += &dz.sum_axis(Axis(0));
        let dh = dz.dot(&p.head.post_linear.weight);

        // attention
        let a = &trace.aiem.attn;
        let da = dh.dot(&trace.aiem.v.t());
        let dv = a.t().dot(&dh);
        let row_dot = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = a * &(&da - &row_dot);
        let scale = 1.0 / (p.aiem.key_dim() as f64).sqrt();
        let dq = ds.dot(&trace.aiem.k) * scale;
        let dk = ds.t().dot(&trace.aiem.q) * scale;
        g.aiem.w_q += &dq.t().dot(&trace.f_std);
        g.aiem.w_k += &dk.t().dot(&trace.f_std);
        g.aiem.w_v += &dv.t().dot(&trace.r);
        let mut dr = dv.dot(&p.aiem.w_v);

        // aux heads
        let share = weights.aux / n as f64;
        for (i, t) in trace.aux.iter().enumerate() {
            let k = ModelConfig::aux_classifier(i);
            let dl = cross_entropy_logit_grad(&t.probs, label).map(|v| v * share);
            let dx = classifier_backward(
                &p.head.aux[k],
                t,
                dl,
                masks.map(|m| &m.aux_input[i]),
                masks.map(|m| &m.aux_hidden[i]),
                &mut g.head.aux[k],
            );
            let mut row = dr.row_mut(i);
            row += &dx.slice(s![..c.d_r]);
        }

        if let (Representations::Tokens(ids), Some(enc), Some(genc)) = (&input.reps, &p.encoder, g.encoder.as_mut()) {
            toy_backward(ids, &dr, enc, genc);
        }
        g
    }

    /// Loss and gradient for one sample, with a finite-loss check.
    pub fn sample_gradient(
        &self,
        id: &str,
        input: &ModelInput,
        label: u8,
        weights: LossWeights,
        masks: Option<&DropoutMasks>,
    ) -> Result<(f64, Params)> {
        let trace = self.forward(input, masks)?;
        let loss = Self::sample_loss(&trace, label, weights);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                sample: id.to_string(),
                detail: format!("loss {loss}"),
            });
        }
        let grad = self.backward(input, &trace, label, weights, masks);
        if !grad.all_finite() {
            return Err(Error::NonFiniteLoss {
                sample: id.to_string(),
                detail: "non-finite gradient".into(),
            });
        }
        Ok((loss, grad))
    }

    /// Mean loss and mean gradient over a batch. Per-sample work may run
    /// in parallel; the reduction is sequential in batch order.
    pub fn batch_gradient(
        &self,
        batch: &[BatchItem<'_>],
        weights: LossWeights,
        exec: Execution,
    ) -> Result<(f64, Params)> {
        let results = map_indexed(exec, batch, |_, item| {
            self.sample_gradient(item.id, item.input, item.label, weights, item.masks.as_ref())
        });
        let mut total = self.params.zeros_like();
        let mut loss = 0.0;
        for r in results {
            let (l, g) = r?;
            loss += l;
            total.add_scaled(&g, 1.0);
        }
        let m = batch.len().max(1) as f64;
        total.scale(1.0 / m);
        Ok((loss / m, total))
    }

    /// Evaluation-mode prediction.
    pub fn predict(&self, input: &ModelInput) -> Result<ForwardTrace> {
        self.forward(input, None)
    }
}

/// One sample of a training batch.
#[derive(Debug, Clone)]
pub struct BatchItem<'a> {
    pub id: &'a str,
    pub input: &'a ModelInput,
    pub label: u8,
    pub masks: Option<DropoutMasks>,
}

/// Accumulates classifier parameter gradients and returns the gradient
/// with respect to the classifier input (before dropout).
fn classifier_backward(
    c: &Classifier,
    t: &ClassifierTrace,
    dlogit: [f64; 2],
    input_mask: Option<&Array1<f64>>,
    hidden_mask: Option<&Array1<f64>>,
    g: &mut Classifier,
) -> Array1<f64> {
    let dl = Array1::from(dlogit.to_vec());
    let dropped = match hidden_mask {
        Some(m) => &t.hidden * m,
        None => t.hidden.clone(),
    };
    outer_add(&mut g.output.weight, &dl, &dropped);
    g.output.bias += &dl;
    let mut d_hidden = c.output.weight.t().dot(&dl);
    if let Some(m) = hidden_mask {
        d_hidden *= m;
    }
    let d_pre = d_hidden * t.hidden.mapv(|h| 1.0 - h * h);
    outer_add(&mut g.hidden.weight, &d_pre, &t.input);
    g.hidden.bias += &d_pre;
    let mut dx = c.hidden.weight.t().dot(&d_pre);
    if let Some(m) = input_mask {
        dx *= m;
    }
    dx
}

fn outer_add(w: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0.0 {
            w.row_mut(i).scaled_add(ai, b);
        }
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn random_setup(seed: u64, toy: bool) -> (TraitModel, ModelInput, u8) {
        let mut rng = rng_for(seed, &[]);
        let n = rng.gen_range(1..=4);
        let d_f = rng.gen_range(1..=5);
        let d_r = rng.gen_range(1..=5);
        let encoder = if toy {
            EncoderKind::Toy { d_e: 3, vocab_size: 6 }
        } else {
            EncoderKind::Fixed
        };
        let mut cfg = ModelConfig::new(n, d_f, d_r, encoder);
        cfg.d_a = rng.gen_range(1..=4);
        cfg.d_h = rng.gen_range(1..=3);
        cfg.major_hidden = rng.gen_range(1..=5);
        cfg.aux_hidden = [rng.gen_range(1..=4), rng.gen_range(1..=4)];
        let mut model = TraitModel::init(cfg, &mut rng).unwrap();
        for (_, t) in model.params.tensors_mut() {
            t.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        let features = Array2::from_shape_simple_fn((n, d_f), || rng.gen_range(0.0..3.0));
        model.standardizer = Standardizer::fit([&features], d_f);
        let reps = if toy {
            Representations::Tokens((0..n).map(|i| (0..i + 1).map(|_| rng.gen_range(0..6)).collect()).collect())
        } else {
            Representations::Fixed(Array2::from_shape_simple_fn((n, d_r), || rng.gen_range(-1.0..1.0)))
        };
        let input = ModelInput {
            features,
            whole: Array1::from_shape_simple_fn(d_f, || rng.gen_range(0.0..3.0)),
            reps,
        };
        (model, input, rng.gen_range(0..2))
    }

    // Denominator floor 1e-5: central differences at h = 1e-6 carry ~1e-10
    // absolute roundoff.
    fn fd_check(seed: u64, toy: bool, with_masks: bool) {
        let (model, input, y) = random_setup(seed, toy);
        let w = LossWeights::default();
        let masks = with_masks.then(|| DropoutMasks::sample(&model.config, &mut rng_for(seed, &[9])));
        let trace = model.forward(&input, masks.as_ref()).unwrap();
        let g = model.backward(&input, &trace, y, w, masks.as_ref());
        let loss = |m: &TraitModel| TraitModel::sample_loss(&m.forward(&input, masks.as_ref()).unwrap(), y, w);
        let h = 1e-6;
        let grads: Vec<Vec<f64>> = g.tensors().iter().map(|t| t.data.to_vec()).collect();
        let n_tensors = grads.len();
        for ti in 0..n_tensors {
            for j in 0..grads[ti].len() {
                let mut plus = model.clone();
                plus.params.tensors_mut()[ti].1[j] += h;
                let mut minus = model.clone();
                minus.params.tensors_mut()[ti].1[j] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let a = grads[ti][j];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-5);
                assert!(
                    rel <= 1e-4,
                    "seed {seed} {} [{j}]: analytic {a} fd {fd}",
                    g.tensors()[ti].name
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20 {
            fd_check(seed, seed % 2 == 1, seed % 3 == 0);
        }
    }

    #[test]
    fn zero_aux_weight_gives_zero_aux_gradients() {
        let (model, input, y) = random_setup(7, false);
        let w = LossWeights { major: 1.0, aux: 0.0 };
        let trace = model.forward(&input, None).unwrap();
        let g = model.backward(&input, &trace, y, w, None);
        for t in g.tensors().iter().filter(|t| t.name.starts_with("head.aux")) {
            assert!(t.data.iter().all(|&v| v == 0.0), "{}", t.name);
        }
    }

    #[test]
    fn duplicated_sample_leaves_mean_gradient_unchanged() {
        let (model, input, y) = random_setup(8, true);
        let item = BatchItem { id: "a", input: &input, label: y, masks: None };
        let w = LossWeights::default();
        let (l1, g1) = model.batch_gradient(std::slice::from_ref(&item), w, Execution::Sequential).unwrap();
        let (l2, g2) = model.batch_gradient(&[item.clone(), item], w, Execution::Sequential).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (x, y) in a.data.iter().zip(b.data) {
                assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn parallel_and_sequential_batches_agree_bitwise() {
        let (model, input, _) = random_setup(11, false);
        let items: Vec<_> = (0..6)
            .map(|i| BatchItem {
                id: "x",
                input: &input,
                label: (i % 2) as u8,
                masks: Some(DropoutMasks::sample(&model.config, &mut rng_for(3, &[i]))),
            })
            .collect();
        let w = LossWeights::default();
        let a = model.batch_gradient(&items, w, Execution::Sequential).unwrap();
        let b = model.batch_gradient(&items, w, Execution::Parallel).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn standardizer_statistics() {
        let f = ndarray::array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit([&f], 2);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.apply(&f), ndarray::array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn wrong_segment_count_is_rejected() {
        let (model, mut input, _) = random_setup(12, false);
        let d_f = model.config.d_f;
        input.features = Array2::zeros((model.config.n_segments + 1, d_f));
        assert!(matches!(
            model.forward(&input, None),
            Err(Error::DimensionMismatch { context: "segment count", .. })
        ));
    }
}
