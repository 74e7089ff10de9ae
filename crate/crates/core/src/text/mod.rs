//! Dataset ingestion, two-grade cleaning and segment enhancement.

mod clean;
mod enhance;
mod ingest;
mod profile;

pub use clean::{clean_for_counter, clean_for_encoder};
pub use enhance::{build_document, enhance, sample_seed};
pub use ingest::{decode_mbti, ingest, ingest_reader, MBTI_TRAITS};
pub use profile::{CsvSchema, DatasetProfile, SplitRule, TraitColumn};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Either one essay or an author's ordered post list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Essay(String),
    Posts(Vec<String>),
}

impl Body {
    pub fn is_empty(&self) -> bool {
        match self {
            Body::Essay(t) => t.trim().is_empty(),
            Body::Posts(p) => p.iter().all(|t| t.trim().is_empty()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub id: String,
    pub body: Body,
    /// Trait dimension name to binary label.
    pub labels: BTreeMap<String, u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Big,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub size_class: SizeClass,
    /// Half-open word range `[start, end)` into the whitespace-split document.
    pub start_word: usize,
    pub end_word: usize,
    pub clean_text: String,
    pub raw_text: String,
}

/// The `n_small + n_big` segments of one sample, small ones first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSet {
    pub segments: Vec<Segment>,
    pub n_small: usize,
    pub n_big: usize,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn of_class(&self, class: SizeClass) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.size_class == class)
    }
}
