use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Split after a word ending in `.`, `!` or `?`.
    SentenceBoundary,
    /// Split before a first-person subject such as "I" or "I'm".
    FirstPersonSubject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitColumn {
    pub name: String,
    pub column: String,
}

/// Column layout of a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum CsvSchema {
    /// One essay per row with one y/n column per trait.
    Essays {
        id_column: String,
        text_column: String,
        trait_columns: Vec<TraitColumn>,
    },
    /// One author per row: a 4-letter type code and a delimited post blob.
    Mbti {
        #[serde(default)]
        id_column: Option<String>,
        type_column: String,
        posts_column: String,
        post_delimiter: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    pub n_small: usize,
    pub n_big: usize,
    pub split_rules: Vec<SplitRule>,
    pub shuffle_posts: bool,
    pub schema: CsvSchema,
}

impl DatasetProfile {
    /// Essays layout: 4 small + 2 big segments.
    pub fn essays() -> Self {
        let trait_columns = [
            ("EXT", "cEXT"),
            ("NEU", "cNEU"),
            ("AGR", "cAGR"),
            ("CON", "cCON"),
            ("OPN", "cOPN"),
        ]
        .into_iter()
        .map(|(name, column)| TraitColumn {
            name: name.to_string(),
            column: column.to_string(),
        })
        .collect();
        DatasetProfile {
            name: "essays".to_string(),
            n_small: 4,
            n_big: 2,
            split_rules: vec![SplitRule::SentenceBoundary, SplitRule::FirstPersonSubject],
            shuffle_posts: false,
            schema: CsvSchema::Essays {
                id_column: "#AUTHID".to_string(),
                text_column: "TEXT".to_string(),
                trait_columns,
            },
        }
    }

    /// Post-collection layout: 5 small + 3 big segments.
    pub fn twitter() -> Self {
        DatasetProfile {
            name: "twitter".to_string(),
            n_small: 5,
            n_big: 3,
            split_rules: vec![SplitRule::SentenceBoundary, SplitRule::FirstPersonSubject],
            shuffle_posts: true,
            schema: CsvSchema::Mbti {
                id_column: None,
                type_column: "type".to_string(),
                posts_column: "posts".to_string(),
                post_delimiter: "|||".to_string(),
            },
        }
    }

    /// Looks up a built-in profile by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "essays" => Some(Self::essays()),
            "twitter" | "mbti" => Some(Self::twitter()),
            _ => None,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.n_small + self.n_big
    }

    pub fn traits(&self) -> Vec<String> {
        match &self.schema {
            CsvSchema::Essays { trait_columns, .. } => {
                trait_columns.iter().map(|t| t.name.clone()).collect()
            }
            CsvSchema::Mbti { .. } => super::MBTI_TRAITS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_big == 0 || self.n_small < self.n_big {
            return Err(Error::Config(format!(
                "profile {}: need n_small >= n_big >= 1, got {}/{}",
                self.name, self.n_small, self.n_big
            )));
        }
        if let CsvSchema::Mbti { post_delimiter, .. } = &self.schema {
            if post_delimiter.is_empty() {
                return Err(Error::Config("empty post delimiter".into()));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: DatasetProfile = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    /// Loads a profile from a TOML file, or a built-in one when `spec`
    /// names one and no such file exists.
    pub fn load(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.exists() {
            let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return Self::from_toml_str(&s);
        }
        Self::builtin(spec).ok_or_else(|| Error::Config(format!("unknown profile {spec}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_match_segment_counts() {
        let e = DatasetProfile::essays();
        let t = DatasetProfile::twitter();
        assert_eq!((e.n_small, e.n_big, e.n_segments()), (4, 2, 6));
        assert_eq!((t.n_small, t.n_big, t.n_segments()), (5, 3, 8));
        assert_eq!(e.traits(), ["EXT", "NEU", "AGR", "CON", "OPN"]);
        assert_eq!(t.traits(), ["EI", "SN", "TF", "JP"]);
    }

    #[test]
    fn toml_round_trip() {
        for p in [DatasetProfile::essays(), DatasetProfile::twitter()] {
            let s = p.to_toml_string();
            assert_eq!(DatasetProfile::from_toml_str(&s).unwrap(), p);
        }
    }

    #[test]
    fn rejects_inverted_counts() {
        let mut p = DatasetProfile::essays();
        p.n_small = 1;
        p.n_big = 2;
        assert!(p.validate().is_err());
        p.n_big = 0;
        assert!(p.validate().is_err());
    }
}
