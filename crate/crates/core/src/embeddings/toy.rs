//! Mean-pooling toy encoder: `r = P · mean(E[t] for t in segment)`.

use std::collections::{BTreeSet, HashMap};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::RepresentationMatrix;
use crate::psycholex::{is_word, tokenize};

pub const UNKNOWN_TOKEN: &str = "<unk>";

/// Token to embedding-row map. Row 0 is the shared unknown row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Sorted vocabulary of every word token in `texts`, after `<unk>`.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut words = BTreeSet::new();
        for t in texts {
            for tok in tokenize(t) {
                if is_word(&tok) {
                    words.insert(tok);
                }
            }
        }
        let mut tokens = vec![UNKNOWN_TOKEN.to_string()];
        tokens.extend(words.into_iter().filter(|w| w != UNKNOWN_TOKEN));
        Vocabulary::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    /// Row ids of the word tokens of `text`; out-of-vocabulary words map
    /// to the unknown row.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text)
            .into_iter()
            .filter(|t| is_word(t))
            .map(|t| self.id(&t))
            .collect()
    }
}

/// Trainable tensors of the toy encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// vocab × d_e
    pub table: Array2<f64>,
    /// d_r × d_e
    pub projection: Array2<f64>,
}

impl EncoderParams {
    pub fn zeros(vocab: usize, d_e: usize, d_r: usize) -> Self {
        EncoderParams {
            table: Array2::zeros((vocab, d_e)),
            projection: Array2::zeros((d_r, d_e)),
        }
    }
}

/// Mean of the embedding rows of one segment; empty segments use the
/// unknown row.
fn pool(ids: &[usize], params: &EncoderParams) -> Array1<f64> {
    if ids.is_empty() {
        return params.table.row(0).to_owned();
    }
    let mut acc = Array1::zeros(params.table.ncols());
    for &t in ids {
        acc += &params.table.row(t);
    }
    acc / ids.len() as f64
}

/// One representation row per segment.
pub fn embed_toy(segments: &[Vec<usize>], params: &EncoderParams) -> RepresentationMatrix {
    let d_r = params.projection.nrows();
    let mut out = Array2::zeros((segments.len(), d_r));
    for (n, ids) in segments.iter().enumerate() {
        let pooled = pool(ids, params);
        out.row_mut(n).assign(&params.projection.dot(&pooled));
    }
    out
}

/// Accumulates into `grads` the gradient of a loss whose gradient with
/// respect to the output of [`embed_toy`] is `d_reps`.
pub fn toy_backward(
    segments: &[Vec<usize>],
    d_reps: &Array2<f64>,
    params: &EncoderParams,
    grads: &mut EncoderParams,
) {
    for (n, ids) in segments.iter().enumerate() {
        let dr = d_reps.row(n);
        let pooled = pool(ids, params);
        for i in 0..dr.len() {
            let g = dr[i];
            if g == 0.0 {
                continue;
            }
            grads.projection.row_mut(i).scaled_add(g, &pooled);
        }
        let d_pooled = params.projection.t().dot(&dr);
        if ids.is_empty() {
            grads.table.row_mut(0).scaled_add(1.0, &d_pooled);
        } else {
            let share = 1.0 / ids.len() as f64;
            for &t in ids {
                grads.table.row_mut(t).scaled_add(share, &d_pooled);
            }
        }
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_params(v: usize, d_e: usize, d_r: usize, seed: u64) -> EncoderParams {
        let mut rng = crate::seed::rng_for(seed, &[]);
        let mut p = EncoderParams::zeros(v, d_e, d_r);
        p.table.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        p.projection.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        p
    }

    #[test]
    fn vocabulary_is_sorted_with_unknown_first() {
        let v = Vocabulary::build(["b a!", "c a"]);
        assert_eq!(v.tokens(), ["<unk>", "a", "b", "c"]);
        assert_eq!(v.encode("a zzz c ."), vec![1, 0, 3]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
    }

    #[test]
    fn single_token_is_its_projected_row() {
        let p = random_params(5, 3, 4, 1);
        let out = embed_toy(&[vec![2]], &p);
        let expect = p.projection.dot(&p.table.row(2));
        assert_eq!(out.row(0), expect);
        let empty = embed_toy(&[vec![]], &p);
        assert_eq!(empty.row(0), p.projection.dot(&p.table.row(0)));
    }

    #[test]
    fn identical_segments_give_identical_rows() {
        let p = random_params(6, 4, 3, 2);
        let out = embed_toy(&[vec![1, 2, 5], vec![1, 2, 5]], &p);
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn matches_brute_force_mean_then_matvec() {
        let (v, d_e, d_r) = (7, 5, 4);
        let p = random_params(v, d_e, d_r, 3);
        let segs = vec![vec![0, 3, 3, 6], vec![1], vec![2, 4]];
        let out = embed_toy(&segs, &p);
        for (n, ids) in segs.iter().enumerate() {
            let mut mean = vec![0.0; d_e];
            for &t in ids {
                for j in 0..d_e {
                    mean[j] += p.table[[t, j]];
                }
            }
            for m in mean.iter_mut() {
                *m /= ids.len() as f64;
            }
            for i in 0..d_r {
                let mut acc = 0.0;
                for j in 0..d_e {
                    acc += p.projection[[i, j]] * mean[j];
                }
                assert!((out[[n, i]] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn table_gradient_matches_central_differences() {
        // loss = sum_n w_n . r_n with fixed random w
        let (v, d_e, d_r) = (6, 3, 4);
        let p = random_params(v, d_e, d_r, 4);
        let segs = vec![vec![1, 1, 2], vec![], vec![5, 3]];
        let mut rng = crate::seed::rng_for(5, &[]);
        let w = Array2::from_shape_fn((segs.len(), d_r), |_| rng.gen_range(-1.0..1.0));
        let loss = |p: &EncoderParams| (embed_toy(&segs, p) * &w).sum();
        let mut g = EncoderParams::zeros(v, d_e, d_r);
        toy_backward(&segs, &w, &p, &mut g);
        let h = 1e-6;
        for (r, c) in (0..v).flat_map(|r| (0..d_e).map(move |c| (r, c))) {
            let mut plus = p.clone();
            plus.table[[r, c]] += h;
            let mut minus = p.clone();
            minus.table[[r, c]] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let a = g.table[[r, c]];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            assert!(rel <= 1e-4, "table[{r},{c}] analytic {a} fd {fd}");
        }
    }
}
