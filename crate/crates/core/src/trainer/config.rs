use serde::{Deserialize, Serialize};

use crate::aiem::{EncoderKind, LossWeights, ModelConfig};
use crate::error::{Error, Result};

/// Optimizer parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Major,
    Aux,
    Solid,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Major, Group::Aux, Group::Solid];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamGroupConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupConfigs {
    pub major: ParamGroupConfig,
    pub aux: ParamGroupConfig,
    pub solid: ParamGroupConfig,
}

impl GroupConfigs {
    pub fn get(&self, g: Group) -> &ParamGroupConfig {
        match g {
            Group::Major => &self.major,
            Group::Aux => &self.aux,
            Group::Solid => &self.solid,
        }
    }
}

/// Moment coefficients of the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-6,
        }
    }
}

/// Representation source selected in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderChoice {
    Toy,
    Fixed,
}

/// Model widths; segment count, feature width and vocabulary come from data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub encoder: EncoderChoice,
    pub d_r: usize,
    pub d_e: usize,
    pub d_a: usize,
    pub d_h: usize,
    pub major_hidden: usize,
    pub aux_hidden: [usize; 2],
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            encoder: EncoderChoice::Toy,
            d_r: 64,
            d_e: 32,
            d_a: 32,
            d_h: 16,
            major_hidden: 64,
            aux_hidden: [64, 48],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub profile: String,
    pub lambda_major: f64,
    pub lambda_aux: f64,
    pub max_epoch: u64,
    pub max_update: u64,
    pub update_frequency: u64,
    pub batch_size: usize,
    pub dropout: f64,
    pub pooler_dropout: f64,
    pub seed: u64,
    pub groups: GroupConfigs,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub model: ModelSettings,
}

impl TrainConfig {
    pub fn essays() -> Self {
        TrainConfig {
            profile: "essays".into(),
            lambda_major: 1.0,
            lambda_aux: 0.1,
            max_epoch: 30,
            max_update: 2100,
            update_frequency: 4,
            batch_size: 8,
            dropout: 0.1,
            pooler_dropout: 0.45,
            seed: 1,
            groups: GroupConfigs {
                major: ParamGroupConfig {
                    learning_rate: 5e-5,
                    weight_decay: 0.1,
                    warmup_updates: 250,
                },
                aux: ParamGroupConfig {
                    learning_rate: 2e-5,
                    weight_decay: 0.15,
                    warmup_updates: 250,
                },
                solid: ParamGroupConfig {
                    learning_rate: 3e-6,
                    weight_decay: 0.15,
                    warmup_updates: 500,
                },
            },
            adam: AdamConfig::default(),
            model: ModelSettings::default(),
        }
    }

    pub fn twitter() -> Self {
        let mut c = Self::essays();
        c.profile = "twitter".into();
        c.max_epoch = 15;
        c.max_update = 3660;
        c.groups.major.warmup_updates = 300;
        c.groups.aux = ParamGroupConfig {
            learning_rate: 4e-5,
            weight_decay: 0.15,
            warmup_updates: 300,
        };
        c.groups.solid = ParamGroupConfig {
            learning_rate: 4e-6,
            weight_decay: 0.15,
            warmup_updates: 600,
        };
        c
    }

    /// Desk-scale settings for the planted-signal corpus.
    pub fn synthetic() -> Self {
        let mut c = Self::essays();
        c.profile = "synthetic".into();
        c.max_epoch = 30;
        c.max_update = 100_000;
        c.update_frequency = 1;
        let g = |lr| ParamGroupConfig {
            learning_rate: lr,
            weight_decay: 0.01,
            warmup_updates: 20,
        };
        c.groups = GroupConfigs {
            major: g(3e-3),
            aux: g(3e-3),
            solid: g(3e-3),
        };
        c.model = ModelSettings {
            encoder: EncoderChoice::Toy,
            d_r: 16,
            d_e: 16,
            d_a: 16,
            d_h: 8,
            major_hidden: 32,
            aux_hidden: [32, 24],
        };
        c
    }

    /// Built-in preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "essays" => Ok(Self::essays()),
            "twitter" => Ok(Self::twitter()),
            "synthetic" => Ok(Self::synthetic()),
            other => Err(Error::Config(format!("unknown preset {other}"))),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: TrainConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            major: self.lambda_major,
            aux: self.lambda_aux,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.update_frequency < 1 {
            return bad("update_frequency must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.lambda_major < 0.0 || self.lambda_aux < 0.0 {
            return bad("loss weights must be non-negative");
        }
        for g in Group::ALL {
            let p = self.groups.get(g);
            if !(p.learning_rate >= 0.0 && p.weight_decay >= 0.0) {
                return bad("group learning rates and decays must be non-negative");
            }
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.pooler_dropout) {
            return bad("dropout rates must lie in [0, 1)");
        }
        Ok(())
    }

    /// Model shape for data with `n_segments` rows of `d_f` features.
    pub fn model_config(&self, n_segments: usize, d_f: usize, d_r_fixed: Option<usize>, vocab_size: usize) -> ModelConfig {
        let m = &self.model;
        let (encoder, d_r) = match m.encoder {
            EncoderChoice::Toy => (EncoderKind::Toy { d_e: m.d_e, vocab_size }, m.d_r),
            EncoderChoice::Fixed => (EncoderKind::Fixed, d_r_fixed.unwrap_or(m.d_r)),
        };
        ModelConfig {
            n_segments,
            d_f,
            d_r,
            d_a: m.d_a,
            d_h: m.d_h,
            major_hidden: m.major_hidden,
            aux_hidden: m.aux_hidden,
            dropout: self.dropout,
            pooler_dropout: self.pooler_dropout,
            encoder,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_follow_the_hyperparameter_table() {
        let e = TrainConfig::essays();
        assert_eq!((e.batch_size, e.max_epoch, e.max_update, e.update_frequency), (8, 30, 2100, 4));
        assert_eq!((e.dropout, e.pooler_dropout), (0.1, 0.45));
        assert_eq!(
            (e.groups.major.learning_rate, e.groups.major.weight_decay, e.groups.major.warmup_updates),
            (5e-5, 0.1, 250)
        );
        assert_eq!((e.groups.aux.learning_rate, e.groups.aux.weight_decay, e.groups.aux.warmup_updates), (2e-5, 0.15, 250));
        assert_eq!(
            (e.groups.solid.learning_rate, e.groups.solid.weight_decay, e.groups.solid.warmup_updates),
            (3e-6, 0.15, 500)
        );
        let t = TrainConfig::twitter();
        assert_eq!((t.batch_size, t.max_epoch, t.max_update, t.update_frequency), (8, 15, 3660, 4));
        assert_eq!((t.groups.major.learning_rate, t.groups.major.warmup_updates), (5e-5, 300));
        assert_eq!((t.groups.aux.learning_rate, t.groups.aux.weight_decay, t.groups.aux.warmup_updates), (4e-5, 0.15, 300));
        assert_eq!(
            (t.groups.solid.learning_rate, t.groups.solid.weight_decay, t.groups.solid.warmup_updates),
            (4e-6, 0.15, 600)
        );
        assert_eq!((t.lambda_major, t.lambda_aux), (1.0, 0.1));
    }

    #[test]
    fn toml_round_trip() {
        let c = TrainConfig::twitter();
        let back = TrainConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        let mut bad = c.clone();
        bad.update_frequency = 0;
        assert!(TrainConfig::from_toml_str(&bad.to_toml_string()).is_err());
    }
}
