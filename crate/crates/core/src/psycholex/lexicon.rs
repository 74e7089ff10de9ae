//! Lexicon files and pattern matching.
//!
//! File format: UTF-8, one entry per line, fields separated by a single
//! tab (shown as `<TAB>` below), `#` starts a comment line:
//!
//! ```text
//! %block<TAB>nrc
//! happ*<TAB>joy,positive
//! sad<TAB>sadness,negative
//! love<TAB>polarity<TAB>0.8
//! ```
//!
//! The `%block` header names the feature block the file feeds and must
//! come before any entry. Each entry is `pattern<TAB>categories[<TAB>weight]`
//! where `categories` is a comma-separated list of the block's category
//! names and `weight` (default 1) applies to every listed category. A
//! trailing `*` makes the pattern a prefix pattern.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::schema::{Block, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LexEntry {
    /// Pattern without the trailing `*`.
    pub pattern: String,
    pub prefix: bool,
    /// (category index, weight) pairs.
    pub categories: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    pub block: Block,
    pub categories: Vec<String>,
    entries: Vec<LexEntry>,
    exact: HashMap<String, usize>,
    prefix: HashMap<String, usize>,
    longest_prefix: usize,
}

impl Lexicon {
    fn err(block: Block, line: usize, message: impl std::fmt::Display) -> Error {
        Error::Lexicon {
            block: block.name().to_string(),
            message: format!("line {line}: {message}"),
        }
    }

    /// Parses a lexicon for `expected` whose categories come from `schema`.
    pub fn parse(text: &str, expected: Block, schema: &FeatureSchema) -> Result<Lexicon> {
        let categories: Vec<String> = schema
            .lexicon_categories(expected)
            .into_iter()
            .map(str::to_string)
            .collect();
        let cat_index: HashMap<&str, usize> =
            categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

        let mut header_seen = false;
        let mut entries: Vec<LexEntry> = Vec::new();
        let mut by_key: HashMap<(String, bool), usize> = HashMap::new();

        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if let Some(directive) = fields[0].strip_prefix('%') {
                match (directive, fields.get(1)) {
                    ("block", Some(name)) => {
                        if Block::from_name(name.trim()) != Some(expected) {
                            return Err(Self::err(expected, lineno, format!("header names block {name:?}")));
                        }
                        header_seen = true;
                    }
                    _ => return Err(Self::err(expected, lineno, format!("unknown directive {line:?}"))),
                }
                continue;
            }
            if !header_seen {
                return Err(Self::err(expected, lineno, "entry before %block header"));
            }
            if !(2..=3).contains(&fields.len()) {
                return Err(Self::err(expected, lineno, format!("expected 2 or 3 fields, got {}", fields.len())));
            }
            let raw = fields[0];
            if raw.is_empty() || raw != raw.to_lowercase() {
                return Err(Self::err(expected, lineno, format!("pattern {raw:?} must be non-empty lowercase")));
            }
            let (pattern, prefix) = match raw.strip_suffix('*') {
                Some(p) if !p.is_empty() => (p.to_string(), true),
                Some(_) => return Err(Self::err(expected, lineno, "bare '*' pattern")),
                None => (raw.to_string(), false),
            };
            let weight = match fields.get(2) {
                Some(w) => w
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite())
                    .ok_or_else(|| Self::err(expected, lineno, format!("bad weight {w:?}")))?,
                None => 1.0,
            };
            let slot = *by_key.entry((pattern.clone(), prefix)).or_insert_with(|| {
                entries.push(LexEntry {
                    pattern: pattern.clone(),
                    prefix,
                    categories: Vec::new(),
                });
                entries.len() - 1
            });
            for cat in fields[1].split(',').map(str::trim) {
                let &c = cat_index
                    .get(cat)
                    .ok_or_else(|| Self::err(expected, lineno, format!("unknown category {cat:?}")))?;
                if entries[slot].categories.iter().any(|&(k, _)| k == c) {
                    return Err(Self::err(expected, lineno, format!("duplicate pair {raw} -> {cat}")));
                }
                entries[slot].categories.push((c, weight));
            }
        }
        if !header_seen {
            return Err(Self::err(expected, 0, "missing %block header"));
        }

        let mut exact = HashMap::new();
        let mut prefix = HashMap::new();
        let mut longest_prefix = 0;
        for (i, e) in entries.iter().enumerate() {
            if e.prefix {
                longest_prefix = longest_prefix.max(e.pattern.chars().count());
                prefix.insert(e.pattern.clone(), i);
            } else {
                exact.insert(e.pattern.clone(), i);
            }
        }
        Ok(Lexicon {
            block: expected,
            categories,
            entries,
            exact,
            prefix,
            longest_prefix,
        })
    }

    pub fn entries(&self) -> &[LexEntry] {
        &self.entries
    }

    /// Category weights for `token`.
    ///
    /// Every pattern that matches contributes its categories, but each
    /// category appears at most once: the weight comes from the most
    /// specific matching pattern (exact first, then longest prefix).
    pub fn lookup(&self, token: &str) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        let mut take = |entry: &LexEntry| {
            for &(c, w) in &entry.categories {
                if !out.iter().any(|&(k, _)| k == c) {
                    out.push((c, w));
                }
            }
        };
        if let Some(&i) = self.exact.get(token) {
            take(&self.entries[i]);
        }
        if !self.prefix.is_empty() {
            let bounds: Vec<usize> = token
                .char_indices()
                .map(|(i, _)| i)
                .skip(1)
                .chain(std::iter::once(token.len()))
                .take(self.longest_prefix)
                .collect();
            for &end in bounds.iter().rev() {
                if let Some(&i) = self.prefix.get(&token[..end]) {
                    take(&self.entries[i]);
                }
            }
        }
        out
    }
}

/// One lexicon per lexicon-backed block of a schema.
#[derive(Debug, Clone)]
pub struct Lexicons {
    by_block: BTreeMap<Block, Lexicon>,
}

const DEMO: [(Block, &str); 4] = [
    (Block::Liwc, include_str!("../../lexicons/liwc.tsv")),
    (Block::Mrc, include_str!("../../lexicons/mrc.tsv")),
    (Block::Senticnet, include_str!("../../lexicons/senticnet.tsv")),
    (Block::Nrc, include_str!("../../lexicons/nrc.tsv")),
];

impl Lexicons {
    pub fn from_parts(lexicons: impl IntoIterator<Item = Lexicon>) -> Self {
        Lexicons {
            by_block: lexicons.into_iter().map(|l| (l.block, l)).collect(),
        }
    }

    /// The small hand-made lexicons bundled with the crate.
    pub fn demo(schema: &FeatureSchema) -> Result<Self> {
        let mut parts = Vec::new();
        for (block, text) in DEMO {
            parts.push(Lexicon::parse(text, block, schema)?);
        }
        Ok(Self::from_parts(parts))
    }

    /// Reads `<block>.tsv` for every lexicon-backed block of `schema`.
    pub fn load_dir(dir: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Self> {
        let dir = dir.as_ref();
        let mut parts = Vec::new();
        for block in Block::ALL.into_iter().filter(|b| b.has_lexicon()) {
            if schema.lexicon_categories(block).is_empty() {
                continue;
            }
            let path = dir.join(format!("{}.tsv", block.name()));
            if !path.is_file() {
                return Err(Error::MissingLexicon(block.name().to_string()));
            }
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            parts.push(Lexicon::parse(&text, block, schema)?);
        }
        Ok(Self::from_parts(parts))
    }

    pub fn get(&self, block: Block) -> Option<&Lexicon> {
        self.by_block.get(&block)
    }

    /// Writes the bundled demo lexicons into `dir`.
    pub fn write_demo(dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (block, text) in DEMO {
            let path = dir.join(format!("{}.tsv", block.name()));
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
