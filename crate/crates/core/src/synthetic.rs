//! Planted-signal corpus: exactly one segment per sample carries the label,
//! through both its feature row and its words; every other segment is noise.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{segment_id, Corpus, FeatureTable, SampleRecord, SegmentRecord};
use crate::error::Result;
use crate::psycholex::FeatureSchema;
use crate::seed::rng_for;
use crate::text::SizeClass;

pub const PLANTED_TRAIT: &str = "PLANTED";

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub samples: usize,
    pub n_small: usize,
    pub n_big: usize,
    pub words_per_segment: usize,
    /// Label words placed in the planted segment.
    pub signal_words: usize,
    pub noise_vocab: usize,
    pub label_vocab: usize,
    /// Slots raised in every planted segment, whatever the label.
    pub salience_slots: usize,
    pub salience: f64,
    /// Slots shifted by ± `label_shift` according to the label.
    pub label_slots: usize,
    pub label_shift: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            samples: 500,
            n_small: 4,
            n_big: 2,
            words_per_segment: 24,
            signal_words: 6,
            noise_vocab: 300,
            label_vocab: 12,
            salience_slots: 8,
            salience: 2.0,
            label_slots: 4,
            label_shift: 0.5,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub corpus: Corpus,
    pub features: FeatureTable,
    /// Planted segment index of each sample, in sample order.
    pub planted: Vec<usize>,
}

fn noise_word(rng: &mut ChaCha8Rng, cfg: &PlantedConfig) -> String {
    format!("noise{}", rng.gen_range(0..cfg.noise_vocab))
}

/// Balanced labels, uniformly placed planted segment, feature slots drawn
/// uniformly from [0, 1) before shifts; sample rows are segment means.
pub fn planted_corpus(cfg: &PlantedConfig, schema: &FeatureSchema) -> Result<PlantedCorpus> {
    let d = schema.dim();
    let n = cfg.n_small + cfg.n_big;
    let mut rng = rng_for(cfg.seed, &[0x51]);
    let mut labels: Vec<u8> = (0..cfg.samples).map(|i| (i % 2) as u8).collect();
    labels.shuffle(&mut rng);
    let mut corpus = Corpus::default();
    let mut features = FeatureTable::new(schema.names());
    let mut planted = Vec::with_capacity(cfg.samples);
    for (i, &label) in labels.iter().enumerate() {
        let id = format!("syn{i:04}");
        let p = rng.gen_range(0..n);
        planted.push(p);
        let mut segs = Vec::with_capacity(n);
        let mut mean = vec![0.0; d];
        let mut offset = 0;
        for k in 0..n {
            let mut words: Vec<String> = (0..cfg.words_per_segment).map(|_| noise_word(&mut rng, cfg)).collect();
            let mut row: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            if k == p {
                let tag = if label == 1 { "pos" } else { "neg" };
                for w in words.iter_mut().take(cfg.signal_words) {
                    *w = format!("{tag}{}", rng.gen_range(0..cfg.label_vocab));
                }
                words.shuffle(&mut rng);
                for v in row.iter_mut().take(cfg.salience_slots) {
                    *v += cfg.salience;
                }
                let sign = if label == 1 { 1.0 } else { -1.0 };
                for v in row.iter_mut().skip(cfg.salience_slots).take(cfg.label_slots) {
                    *v += sign * cfg.label_shift;
                }
            }
            for (m, v) in mean.iter_mut().zip(&row) {
                *m += v / n as f64;
            }
            let text = words.join(" ");
            let sid = segment_id(&id, k);
            features.push(sid.clone(), row)?;
            segs.push(SegmentRecord {
                sample_id: id.clone(),
                segment_id: sid,
                index: k,
                size_class: if k < cfg.n_small { SizeClass::Small } else { SizeClass::Big },
                start_word: offset,
                end_word: offset + cfg.words_per_segment,
                clean_text: text.clone(),
                raw_text: text,
            });
            offset += cfg.words_per_segment;
        }
        features.push(id.clone(), mean)?;
        let document = segs.iter().map(|s| s.raw_text.as_str()).collect::<Vec<_>>().join(" ");
        corpus.samples.push(SampleRecord {
            id,
            labels: BTreeMap::from([(PLANTED_TRAIT.to_string(), label)]),
            parts: vec![document.clone()],
            document,
            n_small: cfg.n_small,
            n_big: cfg.n_big,
        });
        corpus.segments.push(segs);
    }
    Ok(PlantedCorpus {
        corpus,
        features,
        planted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_balance() {
        let cfg = PlantedConfig {
            samples: 40,
            ..PlantedConfig::default()
        };
        let pc = planted_corpus(&cfg, &FeatureSchema::default()).unwrap();
        assert_eq!(pc.corpus.len(), 40);
        assert!(pc.corpus.segments.iter().all(|s| s.len() == 6));
        assert_eq!(pc.features.rows.len(), 40 * 7);
        let pos = pc.corpus.samples.iter().filter(|s| s.labels[PLANTED_TRAIT] == 1).count();
        assert_eq!(pos, 20);
        for (i, s) in pc.corpus.samples.iter().enumerate() {
            let tag = if s.labels[PLANTED_TRAIT] == 1 { "pos" } else { "neg" };
            for (k, g) in pc.corpus.segments[i].iter().enumerate() {
                assert_eq!(g.clean_text.contains(tag), k == pc.planted[i]);
            }
        }
        let again = planted_corpus(&cfg, &FeatureSchema::default()).unwrap();
        assert_eq!(again.corpus, pc.corpus);
    }
}
