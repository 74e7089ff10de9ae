//! Psycho-linguistic count features from configurable lexicons and text
//! statistics.

mod counter;
mod lexicon;
mod schema;
mod tokenize;

pub use counter::{count_features, count_features_parts, whole_sample_features, FeatureVector};
pub use lexicon::{LexEntry, Lexicon, Lexicons};
pub use schema::{Block, FeatureSchema, Slot, SlotKind, SlotSource};
pub use tokenize::{is_word, tokenize};
