//! Composite-group optimization, the training loop, cross-validation and
//! checkpoints.

mod checkpoint;
mod config;
mod optim;

pub use checkpoint::Checkpoint;
pub use config::{AdamConfig, EncoderChoice, Group, GroupConfigs, ModelSettings, ParamGroupConfig, TrainConfig};
pub use optim::{assign_groups, group_of, lr_schedule, AdamW};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::aiem::{BatchItem, DropoutMasks, ModelInput, PredictionDistribution, Representations, Standardizer, TraitModel};
use crate::ensemble::{major_only, parity_assignment, self_ensemble, split_groups, EnsembleDecision};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, map_range, Execution};
use crate::seed::{hash_str, mix, rng_for};

const STREAM_INIT: u64 = 1;
const STREAM_ORDER: u64 = 2;
const STREAM_DROPOUT: u64 = 3;
const STREAM_FOLDS: u64 = 4;

/// One labelled sample ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub input: ModelInput,
    pub label: u8,
}

/// Fresh model for `train`, with the standardizer fitted on its feature rows.
pub fn initial_model(config: &TrainConfig, train: &[Example], vocab_size: usize, stream: u64) -> Result<TraitModel> {
    let first = train.first().ok_or_else(|| Error::Config("no training examples".into()))?;
    let n = first.input.n_segments();
    let d_f = first.input.features.ncols();
    let d_r_fixed = match &first.input.reps {
        Representations::Fixed(r) => Some(r.ncols()),
        Representations::Tokens(_) => None,
    };
    let mc = config.model_config(n, d_f, d_r_fixed, vocab_size.max(1));
    let mut model = TraitModel::init(mc, &mut rng_for(mix(config.seed, stream), &[STREAM_INIT]))?;
    model.standardizer = Standardizer::fit(train.iter().map(|e| &e.input.features), d_f);
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u64,
    pub mean_loss: f64,
    pub updates: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TraitModel,
    pub epochs: Vec<EpochStats>,
    pub updates: u64,
}

/// Trains `model` in place of a copy. Deterministic for a fixed
/// `(config.seed, stream)` regardless of `exec`.
pub fn train(mut model: TraitModel, data: &[Example], config: &TrainConfig, stream: u64, exec: Execution) -> Result<TrainOutcome> {
    config.validate()?;
    let seed = mix(config.seed, stream);
    let weights = config.loss_weights();
    let mut opt = AdamW::new(&model.params, config.adam)?;
    let mut acc = model.params.zeros_like();
    let mut acc_batches = 0u64;
    let mut update = 0u64;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let use_dropout = config.dropout > 0.0 || config.pooler_dropout > 0.0;

    for epoch in 0..config.max_epoch {
        if update >= config.max_update || data.is_empty() {
            break;
        }
        order.shuffle(&mut rng_for(seed, &[STREAM_ORDER, epoch]));
        let mut loss_sum = 0.0;
        let mut batches = 0u64;
        for chunk in order.chunks(config.batch_size) {
            let items: Vec<BatchItem<'_>> = chunk
                .iter()
                .map(|&i| {
                    let e = &data[i];
                    let masks = use_dropout.then(|| {
                        DropoutMasks::sample(&model.config, &mut rng_for(seed, &[STREAM_DROPOUT, epoch, hash_str(&e.id)]))
                    });
                    BatchItem {
                        id: &e.id,
                        input: &e.input,
                        label: e.label,
                        masks,
                    }
                })
                .collect();
            let (loss, grad) = model.batch_gradient(&items, weights, exec)?;
            loss_sum += loss;
            batches += 1;
            acc.add_scaled(&grad, 1.0);
            acc_batches += 1;
            if acc_batches == config.update_frequency {
                acc.scale(1.0 / acc_batches as f64);
                opt.step(&mut model.params, &acc, &config.groups, update, config.max_update);
                update += 1;
                acc.scale(0.0);
                acc_batches = 0;
                if update >= config.max_update {
                    break;
                }
            }
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            mean_loss: loss_sum / batches.max(1) as f64,
            updates: update,
        };
        tracing::debug!(epoch = stats.epoch, loss = stats.mean_loss, updates = update, "epoch done");
        epochs.push(stats);
    }
    Ok(TrainOutcome {
        model,
        epochs,
        updates: update,
    })
}

/// Evaluation-mode outputs for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub id: String,
    pub label: u8,
    pub major: PredictionDistribution,
    pub aux: Vec<PredictionDistribution>,
    pub decision: EnsembleDecision,
}

impl SamplePrediction {
    pub fn predicted(&self, self_ensemble: bool) -> u8 {
        if self_ensemble {
            self.decision.final_label
        } else {
            self.decision.major_label
        }
    }
}

pub fn predict_all(model: &TraitModel, data: &[Example], exec: Execution) -> Result<Vec<SamplePrediction>> {
    map_indexed(exec, data, |_, e| {
        let trace = model.predict(&e.input)?;
        let aux = trace.aux_distributions();
        // with a single segment the second group is empty and the ensemble abstains
        let decision = if aux.len() < 2 {
            major_only(&trace.major.probs)
        } else {
            let (g0, g1) = split_groups(&aux, &parity_assignment(aux.len()))?;
            self_ensemble(&trace.major.probs, &g0, &g1)?
        };
        Ok(SamplePrediction {
            id: e.id.clone(),
            label: e.label,
            major: trace.major.probs,
            aux,
            decision,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut c = Counts::default();
        for (pred, label) in pairs {
            match (pred, label) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (1, _) => c.fp += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }

    pub fn add(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

pub fn counts(preds: &[SamplePrediction], self_ensemble: bool) -> Counts {
    Counts::from_pairs(preds.iter().map(|p| (p.predicted(self_ensemble), p.label)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub accuracy: f64,
    pub ensemble_accuracy: f64,
    pub corrected: usize,
    pub final_loss: Option<f64>,
    pub warning: Option<String>,
}

/// Per-trait accuracy; `accuracy` is the mean over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitMetrics {
    pub trait_name: String,
    pub accuracy: f64,
    pub ensemble_accuracy: f64,
    pub folds: Vec<FoldResult>,
    pub counts: Counts,
    pub ensemble_counts: Counts,
}

impl TraitMetrics {
    pub fn fold_accuracies(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.accuracy).collect()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.folds.iter().filter_map(|f| f.warning.clone()).collect()
    }

    /// Per-fold table as CSV.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trait", "fold", "train_size", "test_size", "accuracy", "ensemble_accuracy", "corrected", "warning"])?;
        for f in &self.folds {
            w.write_record([
                self.trait_name.clone(),
                f.fold.to_string(),
                f.train_size.to_string(),
                f.test_size.to_string(),
                format!("{:.6}", f.accuracy),
                format!("{:.6}", f.ensemble_accuracy),
                f.corrected.to_string(),
                f.warning.clone().unwrap_or_default(),
            ])?;
        }
        w.write_record([
            self.trait_name.clone(),
            "mean".into(),
            String::new(),
            String::new(),
            format!("{:.6}", self.accuracy),
            format!("{:.6}", self.ensemble_accuracy),
            String::new(),
            String::new(),
        ])?;
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{}: accuracy {:.4} (self-ensemble {:.4}) over {} folds\n",
            self.trait_name,
            self.accuracy,
            self.ensemble_accuracy,
            self.folds.len()
        );
        s.push_str(&format!(
            "  TP {} TN {} FP {} FN {}\n",
            self.counts.tp, self.counts.tn, self.counts.fp, self.counts.fn_
        ));
        for f in &self.folds {
            s.push_str(&format!("  fold {}: {:.4} / {:.4}\n", f.fold, f.accuracy, f.ensemble_accuracy));
        }
        s
    }
}

/// Seeded partition of `0..n` into `k` disjoint folds whose sizes differ
/// by at most one.
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::Config(format!("cannot split {n} samples into {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, &[STREAM_FOLDS]));
    let mut folds = vec![Vec::new(); k];
    for (i, s) in idx.into_iter().enumerate() {
        folds[i % k].push(s);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone)]
pub struct KFoldReport {
    pub metrics: TraitMetrics,
    pub predictions: Vec<SamplePrediction>,
}

/// Trains on k−1 folds and evaluates the held-out fold, for every fold.
pub fn kfold_evaluate(
    data: &[Example],
    config: &TrainConfig,
    k: usize,
    trait_name: &str,
    vocab_size: usize,
    exec: Execution,
) -> Result<KFoldReport> {
    let folds = kfold_partition(data.len(), k, config.seed)?;
    let results = map_range(exec, k, |f| -> Result<(FoldResult, Vec<SamplePrediction>)> {
        let test: Vec<Example> = folds[f].iter().map(|&i| data[i].clone()).collect();
        let train_set: Vec<Example> = (0..k)
            .filter(|&g| g != f)
            .flat_map(|g| folds[g].iter().map(|&i| data[i].clone()))
            .collect();
        let stream = f as u64 + 1;
        let model = initial_model(config, &train_set, vocab_size, stream)?;
        let out = train(model, &train_set, config, stream, exec)?;
        let preds = predict_all(&out.model, &test, exec)?;
        let positives = test.iter().filter(|e| e.label == 1).count();
        let warning = (positives == 0 || positives == test.len()).then(|| format!("fold {f} holds a single class"));
        if let Some(w) = &warning {
            tracing::warn!("{w}");
        }
        Ok((
            FoldResult {
                fold: f,
                train_size: train_set.len(),
                test_size: test.len(),
                accuracy: counts(&preds, false).accuracy(),
                ensemble_accuracy: counts(&preds, true).accuracy(),
                corrected: preds.iter().filter(|p| p.decision.corrected).count(),
                final_loss: out.epochs.last().map(|e| e.mean_loss),
                warning,
            },
            preds,
        ))
    });
    let mut fold_results = Vec::with_capacity(k);
    let mut predictions = Vec::with_capacity(data.len());
    for r in results {
        let (fr, p) = r?;
        fold_results.push(fr);
        predictions.extend(p);
    }
    let mean = |f: fn(&FoldResult) -> f64| fold_results.iter().map(f).sum::<f64>() / k as f64;
    let metrics = TraitMetrics {
        trait_name: trait_name.to_string(),
        accuracy: mean(|f| f.accuracy),
        ensemble_accuracy: mean(|f| f.ensemble_accuracy),
        counts: counts(&predictions, false),
        ensemble_counts: counts(&predictions, true),
        folds: fold_results,
    };
    Ok(KFoldReport { metrics, predictions })
}
