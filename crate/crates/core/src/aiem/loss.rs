use serde::{Deserialize, Serialize};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside logs.
pub const PROB_EPS: f64 = 1e-12;

/// Binary prediction: probabilities of the negative and positive label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionDistribution {
    pub p0: f64,
    pub p1: f64,
}

impl PredictionDistribution {
    pub fn new(p0: f64, p1: f64) -> Self {
        PredictionDistribution { p0, p1 }
    }

    /// Numerically stable two-way softmax.
    pub fn from_logits(logits: [f64; 2]) -> Self {
        let m = logits[0].max(logits[1]);
        let e0 = (logits[0] - m).exp();
        let e1 = (logits[1] - m).exp();
        let z = e0 + e1;
        PredictionDistribution {
            p0: e0 / z,
            p1: e1 / z,
        }
    }

    pub fn prob(&self, label: u8) -> f64 {
        if label == 1 {
            self.p1
        } else {
            self.p0
        }
    }

    /// Argmax label; an exact tie resolves to 0.
    pub fn label(&self) -> u8 {
        u8::from(self.p1 > self.p0)
    }
}

/// `-ln p_y` with `p_y` clamped to `[PROB_EPS, 1 - PROB_EPS]`.
pub fn cross_entropy(p: &PredictionDistribution, y: u8) -> f64 {
    -p.prob(y).clamp(PROB_EPS, 1.0 - PROB_EPS).ln()
}

/// Gradient of [`cross_entropy`] of `softmax(logits)` with respect to the
/// logits. Zero where the clamp is active.
pub(crate) fn cross_entropy_logit_grad(p: &PredictionDistribution, y: u8) -> [f64; 2] {
    let py = p.prob(y);
    if !(PROB_EPS..=1.0 - PROB_EPS).contains(&py) {
        return [0.0, 0.0];
    }
    let t0 = f64::from(u8::from(y == 0));
    [p.p0 - t0, p.p1 - (1.0 - t0)]
}

/// Mean major-task loss over a batch.
pub fn major_loss(major: &[PredictionDistribution], labels: &[u8]) -> f64 {
    assert_eq!(major.len(), labels.len());
    if major.is_empty() {
        return 0.0;
    }
    let sum: f64 = major.iter().zip(labels).map(|(p, &y)| cross_entropy(p, y)).sum();
    sum / major.len() as f64
}

/// Per-sample mean over segments, then mean over samples.
pub fn aux_loss(aux: &[Vec<PredictionDistribution>], labels: &[u8]) -> f64 {
    assert_eq!(aux.len(), labels.len());
    if aux.is_empty() {
        return 0.0;
    }
    let sum: f64 = aux
        .iter()
        .zip(labels)
        .map(|(segs, &y)| {
            if segs.is_empty() {
                0.0
            } else {
                segs.iter().map(|p| cross_entropy(p, y)).sum::<f64>() / segs.len() as f64
            }
        })
        .sum();
    sum / aux.len() as f64
}

/// `λ_aux · L_aux + λ_major · L_major`, evaluated in that order.
pub fn total_loss(major: f64, aux: f64, lambda_major: f64, lambda_aux: f64) -> f64 {
    lambda_aux * aux + lambda_major * major
}

/// Task weights of the total loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub major: f64,
    pub aux: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { major: 1.0, aux: 0.1 }
    }
}
