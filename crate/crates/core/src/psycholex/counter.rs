//! The feature counter.
//!
//! All tallies are integers or per-(category, weight) occurrence counts and
//! are folded into floats only at the end, in a fixed order. That makes the
//! result independent of token order (so whole-sample features do not
//! depend on the post shuffle) and makes the self-concatenation contract
//! hold exactly rather than approximately.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::lexicon::Lexicons;
use super::schema::{Block, FeatureSchema, SlotKind, SlotSource};
use super::tokenize::{is_word, tokenize};
use crate::error::{Error, Result};
use crate::text::{clean_for_counter, Body, RawSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        FeatureVector { values: vec![0.0; dim] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn emoticon_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[:;=][-']?[()\[\]DPpOo3/|*]|<3").unwrap())
}

/// Order-free multiset of (weight, occurrences) for one category.
#[derive(Default, Clone)]
struct WeightCounts(BTreeMap<u64, u64>);

impl WeightCounts {
    fn add(&mut self, w: f64) {
        *self.0.entry(w.to_bits()).or_insert(0) += 1;
    }

    fn occurrences(&self) -> u64 {
        self.0.values().sum()
    }

    /// Σ w·n with exact products and a compensated sum, so the result is
    /// the rounding of the exact total in all but pathological cases.
    fn weighted_sum(&self) -> f64 {
        let mut sum = 0.0f64;
        let mut carry = 0.0f64;
        for (&bits, &n) in &self.0 {
            let w = f64::from_bits(bits);
            let n = n as f64;
            let p = w * n;
            for t in [p, w.mul_add(n, -p)] {
                let s = sum + t;
                carry += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
                sum = s;
            }
        }
        sum + carry
    }
}

/// Integer moments of a multiset of lengths.
#[derive(Default, Clone, Copy)]
struct Moments {
    n: u64,
    sum: u64,
    sumsq: u64,
    min: Option<u64>,
    max: u64,
}

impl Moments {
    fn add(&mut self, x: u64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
        self.min = Some(self.min.map_or(x, |m| m.min(x)));
        self.max = self.max.max(x);
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum as f64 / self.n as f64
        }
    }

    /// Population standard deviation.
    fn sd(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = i128::from(self.n);
        let num = n * i128::from(self.sumsq) - i128::from(self.sum) * i128::from(self.sum);
        ((num as f64) / ((n * n) as f64)).sqrt()
    }
}

#[derive(Default, Clone, Copy, PartialEq, Eq)]
enum Utterance {
    #[default]
    Open,
    Assertion,
    Question,
    Exclamation,
}

#[derive(Default)]
struct Tally {
    words: u64,
    sixltr: u64,
    dic: u64,
    numerals: u64,
    elongated: u64,
    word_len: Moments,
    sentence_len: Moments,
    questions: u64,
    exclamations: u64,
    assertions: u64,
    nonspace_chars: u64,
    letters: u64,
    uppercase: u64,
    punct: BTreeMap<&'static str, u64>,
    ellipses: u64,
    emoticons: u64,
    lexical: BTreeMap<Block, Vec<WeightCounts>>,
}

fn punct_class(c: char) -> Option<&'static str> {
    Some(match c {
        '.' => "period",
        ',' => "comma",
        ':' => "colon",
        ';' => "semic",
        '?' => "qmark",
        '!' => "exclam",
        '-' | '\u{2013}' | '\u{2014}' => "dash",
        '"' | '\u{201c}' | '\u{201d}' => "quote",
        '\'' | '\u{2018}' | '\u{2019}' => "apostro",
        '(' | ')' => "parenth",
        _ => return None,
    })
}

fn is_elongated(word: &str) -> bool {
    let chars: Vec<char> = word.chars().collect();
    chars.windows(3).any(|w| w[0] == w[1] && w[1] == w[2] && w[0].is_alphabetic())
}

fn is_numeral(word: &str) -> bool {
    word.chars().all(|c| c.is_ascii_digit())
}

impl Tally {
    fn new(lexicons: &Lexicons, schema: &FeatureSchema) -> Result<Self> {
        let mut lexical = BTreeMap::new();
        for block in Block::ALL {
            let cats = schema.lexicon_categories(block);
            if cats.is_empty() {
                continue;
            }
            if lexicons.get(block).is_none() {
                return Err(Error::MissingLexicon(block.name().to_string()));
            }
            lexical.insert(block, vec![WeightCounts::default(); cats.len()]);
        }
        Ok(Tally {
            lexical,
            ..Default::default()
        })
    }

    fn add_text(&mut self, text: &str, lexicons: &Lexicons) {
        for c in text.chars() {
            if c.is_whitespace() {
                continue;
            }
            self.nonspace_chars += 1;
            if c.is_alphabetic() {
                self.letters += 1;
                if c.is_uppercase() {
                    self.uppercase += 1;
                }
            }
            if !c.is_alphanumeric() {
                *self.punct.entry("allpct").or_insert(0) += 1;
                if let Some(k) = punct_class(c) {
                    *self.punct.entry(k).or_insert(0) += 1;
                }
            }
            if c == '\u{2026}' {
                self.ellipses += 1;
            }
        }
        let mut dots = 0;
        for c in text.chars().chain(std::iter::once(' ')) {
            if c == '.' {
                dots += 1;
            } else {
                if dots >= 3 {
                    self.ellipses += 1;
                }
                dots = 0;
            }
        }
        self.emoticons += emoticon_re().find_iter(text).count() as u64;

        let mut sentence_words = 0u64;
        let close = |t: &mut Tally, words: &mut u64, kind: Utterance| {
            if *words > 0 {
                t.sentence_len.add(*words);
                match kind {
                    Utterance::Question => t.questions += 1,
                    Utterance::Exclamation => t.exclamations += 1,
                    Utterance::Assertion => t.assertions += 1,
                    Utterance::Open => {}
                }
            }
            *words = 0;
        };
        for token in tokenize(text) {
            if is_word(&token) {
                sentence_words += 1;
                self.add_word(&token, lexicons);
                continue;
            }
            let kind = match token.as_str() {
                "." => Utterance::Assertion,
                "?" => Utterance::Question,
                "!" => Utterance::Exclamation,
                _ => continue,
            };
            close(self, &mut sentence_words, kind);
        }
        close(self, &mut sentence_words, Utterance::Open);
    }

    fn add_word(&mut self, word: &str, lexicons: &Lexicons) {
        let len = word.chars().count() as u64;
        self.words += 1;
        self.word_len.add(len);
        if len > 6 {
            self.sixltr += 1;
        }
        if is_numeral(word) {
            self.numerals += 1;
        }
        if is_elongated(word) {
            self.elongated += 1;
        }
        for (block, counts) in self.lexical.iter_mut() {
            let lex = lexicons.get(*block).expect("checked in Tally::new");
            let hits = lex.lookup(word);
            if *block == Block::Liwc && !hits.is_empty() {
                self.dic += 1;
            }
            for (cat, w) in hits {
                counts[cat].add(w);
            }
        }
    }

    fn per_100_words(&self, count: f64) -> f64 {
        if self.words == 0 {
            0.0
        } else {
            100.0 * count / self.words as f64
        }
    }

    fn per_100_sentences(&self, count: u64) -> f64 {
        if self.sentence_len.n == 0 {
            0.0
        } else {
            100.0 * count as f64 / self.sentence_len.n as f64
        }
    }

    fn punct(&self, key: &str) -> u64 {
        self.punct.get(key).copied().unwrap_or(0)
    }

    fn statistic(&self, block: Block, key: &str) -> f64 {
        let rel = |n: u64| self.per_100_words(n as f64);
        match (block, key) {
            (Block::Liwc, "wc") => self.words as f64,
            (Block::Liwc, "wps") => {
                if self.sentence_len.n == 0 {
                    0.0
                } else {
                    self.words as f64 / self.sentence_len.n as f64
                }
            }
            (Block::Liwc, "sixltr") => rel(self.sixltr),
            (Block::Liwc, "dic") => rel(self.dic),
            (Block::Liwc, "numerals") => rel(self.numerals),
            (Block::Liwc, "otherp") => {
                let listed: u64 = [
                    "period", "comma", "colon", "semic", "qmark", "exclam", "dash", "quote",
                    "apostro", "parenth",
                ]
                .iter()
                .map(|k| self.punct(k))
                .sum();
                rel(self.punct("allpct") - listed)
            }
            (Block::Liwc, k) => rel(self.punct(k)),
            (Block::Prosodic, "sentence_count") => self.sentence_len.n as f64,
            (Block::Prosodic, "char_count") => self.nonspace_chars as f64,
            (Block::Prosodic, "mean_sentence_len") => self.sentence_len.mean(),
            (Block::Prosodic, "sd_sentence_len") => self.sentence_len.sd(),
            (Block::Prosodic, "min_sentence_len") => self.sentence_len.min.unwrap_or(0) as f64,
            (Block::Prosodic, "max_sentence_len") => self.sentence_len.max as f64,
            (Block::Prosodic, "mean_word_len") => self.word_len.mean(),
            (Block::Prosodic, "sd_word_len") => self.word_len.sd(),
            (Block::Prosodic, "question_rate") => self.per_100_sentences(self.questions),
            (Block::Prosodic, "exclamation_rate") => self.per_100_sentences(self.exclamations),
            (Block::Prosodic, "assertion_rate") => self.per_100_sentences(self.assertions),
            (Block::Prosodic, "uppercase_rate") => {
                if self.letters == 0 {
                    0.0
                } else {
                    100.0 * self.uppercase as f64 / self.letters as f64
                }
            }
            (Block::Prosodic, "elongation_rate") => rel(self.elongated),
            (Block::Prosodic, "ellipsis_rate") => rel(self.ellipses),
            (Block::Prosodic, "emoticon_rate") => rel(self.emoticons),
            _ => 0.0,
        }
    }

    fn finish(&self, schema: &FeatureSchema) -> FeatureVector {
        let mut values = Vec::with_capacity(schema.dim());
        let mut next_cat: BTreeMap<Block, usize> = BTreeMap::new();
        for slot in schema.slots() {
            let v = match (slot.source, slot.kind) {
                (_, SlotKind::Zero) => 0.0,
                (SlotSource::Statistic, _) => self.statistic(slot.block, &slot.key),
                (SlotSource::Lexicon, kind) => {
                    let i = next_cat.entry(slot.block).or_insert(0);
                    let counts = &self.lexical[&slot.block][*i];
                    *i += 1;
                    match kind {
                        SlotKind::WeightedSum => counts.weighted_sum(),
                        SlotKind::Average => {
                            let n = counts.occurrences();
                            if n == 0 {
                                0.0
                            } else {
                                counts.weighted_sum() / n as f64
                            }
                        }
                        SlotKind::RawCount => counts.weighted_sum(),
                        _ => self.per_100_words(counts.weighted_sum()),
                    }
                }
            };
            values.push(v);
        }
        FeatureVector { values }
    }
}

/// Feature vector of one counter-grade text.
///
/// Text with no word tokens yields zeros in every word-normalized slot;
/// the empty string yields the zero vector.
pub fn count_features(raw_text: &str, lexicons: &Lexicons, schema: &FeatureSchema) -> Result<FeatureVector> {
    count_features_parts(&[raw_text], lexicons, schema)
}

/// Features of several texts counted as one body. Sentences never span
/// two parts.
pub fn count_features_parts(parts: &[&str], lexicons: &Lexicons, schema: &FeatureSchema) -> Result<FeatureVector> {
    let mut tally = Tally::new(lexicons, schema)?;
    for p in parts {
        tally.add_text(p, lexicons);
    }
    Ok(tally.finish(schema))
}

/// The overall feature vector of a sample, from its counter-grade text.
/// Posts are counted as separate parts, so the result does not depend on
/// post order.
pub fn whole_sample_features(sample: &RawSample, lexicons: &Lexicons, schema: &FeatureSchema) -> Result<FeatureVector> {
    let parts: Vec<String> = match &sample.body {
        Body::Essay(t) => vec![clean_for_counter(t)],
        Body::Posts(p) => p.iter().map(|t| clean_for_counter(t)).collect(),
    };
    let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
    count_features_parts(&refs, lexicons, schema)
}
