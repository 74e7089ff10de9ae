use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Feature families, in vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Liwc,
    Mrc,
    Prosodic,
    Senticnet,
    Nrc,
}

impl Block {
    pub const ALL: [Block; 5] = [Block::Liwc, Block::Mrc, Block::Prosodic, Block::Senticnet, Block::Nrc];

    pub fn name(self) -> &'static str {
        match self {
            Block::Liwc => "liwc",
            Block::Mrc => "mrc",
            Block::Prosodic => "prosodic",
            Block::Senticnet => "senticnet",
            Block::Nrc => "nrc",
        }
    }

    pub fn from_name(name: &str) -> Option<Block> {
        Block::ALL.into_iter().find(|b| b.name() == name)
    }

    /// Blocks whose lexicon slots are filled from a lexicon file.
    pub fn has_lexicon(self) -> bool {
        self != Block::Prosodic
    }
}

/// How a slot responds to length: drives normalization and the
/// self-concatenation contract (relative, ratio and average slots are
/// unchanged; raw counts and weighted sums double).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// Occurrences per 100 words.
    Relative,
    RawCount,
    Ratio,
    /// Mean lexicon rating over covered tokens.
    Average,
    WeightedSum,
    /// No text analogue; always zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotSource {
    Lexicon,
    Statistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    /// Unprefixed name: the lexicon category or statistic name.
    pub key: String,
    pub block: Block,
    pub kind: SlotKind,
    pub source: SlotSource,
}

impl Slot {
    /// Column name, `<block>_<key>`.
    pub fn name(&self) -> String {
        format!("{}_{}", self.block.name(), self.key)
    }
}

pub const LIWC_STATISTICS: [&str; 17] = [
    "wc", "wps", "sixltr", "dic", "numerals", "allpct", "period", "comma", "colon", "semic",
    "qmark", "exclam", "dash", "quote", "apostro", "parenth", "otherp",
];

pub const LIWC_CATEGORIES: [&str; 47] = [
    "pronoun", "i", "we", "self", "you", "other", "negate", "assent", "article", "preps",
    "number", "affect", "posemo", "posfeel", "optim", "negemo", "anx", "anger", "sad",
    "cogmech", "cause", "insight", "discrep", "inhib", "tentat", "certain", "senses", "see",
    "hear", "feel", "social", "comm", "othref", "friends", "family", "humans", "time", "past",
    "present", "future", "space", "up", "down", "incl", "excl", "motion", "occup",
];

pub const MRC_CATEGORIES: [&str; 14] = [
    "nlet", "nphon", "nsyl", "kf_freq", "kf_ncats", "kf_nsamp", "tl_freq", "brown_freq", "fam",
    "conc", "imag", "meanc", "meanp", "aoa",
];

pub const PROSODIC_STATISTICS: [&str; 18] = [
    "sentence_count", "char_count", "mean_sentence_len", "sd_sentence_len", "min_sentence_len",
    "max_sentence_len", "mean_word_len", "sd_word_len", "question_rate", "exclamation_rate",
    "assertion_rate", "uppercase_rate", "elongation_rate", "ellipsis_rate", "emoticon_rate",
    "pitch_mean", "intensity_mean", "speech_rate",
];

pub const SENTICNET_CATEGORIES: [&str; 5] =
    ["introspection", "temper", "attitude", "sensitivity", "polarity"];

pub const NRC_CATEGORIES: [&str; 11] = [
    "anger", "anticipation", "disgust", "fear", "joy", "negative", "positive", "sadness",
    "surprise", "trust", "charged",
];

fn prosodic_kind(key: &str) -> SlotKind {
    match key {
        "sentence_count" | "char_count" => SlotKind::RawCount,
        "elongation_rate" | "ellipsis_rate" | "emoticon_rate" => SlotKind::Relative,
        "pitch_mean" | "intensity_mean" | "speech_rate" => SlotKind::Zero,
        _ => SlotKind::Ratio,
    }
}

/// Ordered slot layout of a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    slots: Vec<Slot>,
}

impl Default for FeatureSchema {
    /// LIWC (64) + MRC (14) + prosodic/utterance (18) + SenticNet (5) +
    /// NRC (11) = 112 slots.
    fn default() -> Self {
        let mut slots = Vec::with_capacity(112);
        let mut push = |key: &str, block, kind, source| {
            slots.push(Slot {
                key: key.to_string(),
                block,
                kind,
                source,
            })
        };
        for key in LIWC_STATISTICS {
            let kind = match key {
                "wc" => SlotKind::RawCount,
                "wps" => SlotKind::Ratio,
                _ => SlotKind::Relative,
            };
            push(key, Block::Liwc, kind, SlotSource::Statistic);
        }
        for key in LIWC_CATEGORIES {
            push(key, Block::Liwc, SlotKind::Relative, SlotSource::Lexicon);
        }
        for key in MRC_CATEGORIES {
            push(key, Block::Mrc, SlotKind::Average, SlotSource::Lexicon);
        }
        for key in PROSODIC_STATISTICS {
            push(key, Block::Prosodic, prosodic_kind(key), SlotSource::Statistic);
        }
        for key in SENTICNET_CATEGORIES {
            push(key, Block::Senticnet, SlotKind::WeightedSum, SlotSource::Lexicon);
        }
        for key in NRC_CATEGORIES {
            push(key, Block::Nrc, SlotKind::Relative, SlotSource::Lexicon);
        }
        FeatureSchema { slots }
    }
}

impl FeatureSchema {
    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn names(&self) -> Vec<String> {
        self.slots.iter().map(Slot::name).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name() == name)
    }

    /// Positions of `block`'s slots in the vector.
    pub fn block_range(&self, block: Block) -> Range<usize> {
        let start = self.slots.iter().position(|s| s.block == block).unwrap_or(0);
        let len = self.slots.iter().filter(|s| s.block == block).count();
        start..start + len
    }

    /// Lexicon category names of `block`, in slot order.
    pub fn lexicon_categories(&self, block: Block) -> Vec<&str> {
        self.slots
            .iter()
            .filter(|s| s.block == block && s.source == SlotSource::Lexicon)
            .map(|s| s.key.as_str())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn default_schema_has_112_unique_slots() {
        let s = FeatureSchema::default();
        assert_eq!(s.dim(), 64 + 14 + 18 + 5 + 11);
        assert_eq!(s.dim(), 112);
        let names: HashSet<_> = s.names().into_iter().collect();
        assert_eq!(names.len(), 112);
        assert_eq!(s.block_range(Block::Liwc), 0..64);
        assert_eq!(s.block_range(Block::Mrc), 64..78);
        assert_eq!(s.block_range(Block::Prosodic), 78..96);
        assert_eq!(s.block_range(Block::Senticnet), 96..101);
        assert_eq!(s.block_range(Block::Nrc), 101..112);
        assert_eq!(s.index_of("nrc_joy"), Some(105));
        assert_eq!(s.index_of("senticnet_polarity"), Some(100));
    }
}
