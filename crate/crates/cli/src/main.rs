use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use adf_core::aiem::attention_mass;
use adf_core::corpus::{build_examples, build_vocabulary, featurize, model_input, preprocess, Corpus, FeatureTable, RepSource};
use adf_core::embeddings::{EmbeddingStore, Vocabulary};
use adf_core::ensemble::write_decisions;
use adf_core::psycholex::{FeatureSchema, Lexicons};
use adf_core::text::{ingest, DatasetProfile, SizeClass};
use adf_core::trainer::{
    counts, initial_model, kfold_evaluate, kfold_partition, predict_all, train, Checkpoint, EncoderChoice, Example,
    TrainConfig,
};
use adf_core::Execution;

mod run;

use run::{RunManifest, Workspace};

#[derive(Parser)]
#[command(name = "adf", version, about = "Attention-based denoising for personality detection")]
struct Cli {
    /// Workspace root; relative paths are resolved against it.
    #[arg(long, global = true, env = "ADF_ROOT", default_value = ".")]
    root: PathBuf,

    /// Run batch work on one thread or across the rayon pool.
    #[arg(long, global = true, value_enum, default_value_t = ExecArg::Parallel)]
    execution: ExecArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

impl From<ExecArg> for Execution {
    fn from(e: ExecArg) -> Self {
        match e {
            ExecArg::Sequential => Execution::Sequential,
            ExecArg::Parallel => Execution::Parallel,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Clean, shuffle and segment a raw dataset
    Preprocess {
        /// Dataset CSV
        #[arg(long)]
        input: PathBuf,
        /// Built-in profile name (essays, twitter) or a profile TOML file
        #[arg(long)]
        profile: String,
        /// Output corpus directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Drop samples that cannot be segmented instead of failing
        #[arg(long)]
        skip_invalid: bool,
    },
    /// Count psycho-linguistic features for every segment and sample
    Featurize {
        #[arg(long)]
        corpus: PathBuf,
        /// Lexicon directory; the bundled demo lexicons are used when unset
        #[arg(long, env = "ADF_LEXICON_DIR")]
        lexicons: Option<PathBuf>,
        /// Output CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Import per-segment vectors from JSON lines into an embedding store
    EmbedImport {
        /// JSONL file with {"id": ..., "vector": [...]} records
        #[arg(long)]
        input: PathBuf,
        /// Store directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one trait model
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Hold out this fold (0-based) of a --folds partition
        #[arg(long, requires = "folds")]
        fold: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        /// Output directory for the checkpoint and metrics
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate one trait
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict every sample of a corpus with a checkpoint
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Toggle::On)]
        self_ensemble: Toggle,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the attention matrix of one sample
    InspectAttention {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        sample: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Embedding store; without it the toy encoder is trained
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Trait dimension to model
    #[arg(long = "trait")]
    trait_name: String,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config TOML file or preset name (essays, twitter, synthetic)
    #[arg(long, default_value = "essays")]
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epoch: Option<u64>,
    #[arg(long)]
    max_update: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    update_frequency: Option<u64>,
    #[arg(long)]
    lambda_major: Option<f64>,
    #[arg(long)]
    lambda_aux: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self, ws: &Workspace) -> Result<TrainConfig> {
        let path = ws.path(Path::new(&self.config));
        let mut c = if path.is_file() {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            TrainConfig::from_toml_str(&text)?
        } else {
            TrainConfig::preset(&self.config)?
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.max_epoch {
            c.max_epoch = v;
        }
        if let Some(v) = self.max_update {
            c.max_update = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.update_frequency {
            c.update_frequency = v;
        }
        if let Some(v) = self.lambda_major {
            c.lambda_major = v;
        }
        if let Some(v) = self.lambda_aux {
            c.lambda_aux = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", line.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let ws = Workspace::new(&cli.root);
    let exec = Execution::from(cli.execution);
    let started = Instant::now();
    match cli.command {
        Command::Preprocess {
            input,
            profile,
            out,
            seed,
            skip_invalid,
        } => cmd_preprocess(&ws, exec, started, &input, &profile, &out, seed, skip_invalid),
        Command::Featurize { corpus, lexicons, out } => cmd_featurize(&ws, exec, started, &corpus, lexicons.as_deref(), &out),
        Command::EmbedImport { input, out } => cmd_embed_import(&ws, started, &input, &out),
        Command::Train {
            data,
            cfg,
            fold,
            folds,
            out,
        } => cmd_train(&ws, exec, started, &data, &cfg, fold.zip(folds), &out),
        Command::Evaluate { data, cfg, k, out } => cmd_evaluate(&ws, exec, started, &data, &cfg, k, &out),
        Command::Predict {
            checkpoint,
            corpus,
            features,
            embeddings,
            self_ensemble,
            out,
        } => cmd_predict(
            &ws,
            exec,
            started,
            &checkpoint,
            &corpus,
            &features,
            embeddings.as_deref(),
            self_ensemble == Toggle::On,
            &out,
        ),
        Command::InspectAttention {
            checkpoint,
            corpus,
            features,
            embeddings,
            sample,
            out,
        } => cmd_inspect(&ws, started, &checkpoint, &corpus, &features, embeddings.as_deref(), &sample, &out),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_preprocess(
    ws: &Workspace,
    exec: Execution,
    started: Instant,
    input: &Path,
    profile: &str,
    out: &Path,
    seed: u64,
    skip_invalid: bool,
) -> Result<()> {
    let input = ws.path(input);
    let out = ws.path(out);
    let profile_path = ws.path(Path::new(profile));
    let prof = if profile_path.is_file() {
        DatasetProfile::load(&profile_path.to_string_lossy())?
    } else {
        DatasetProfile::load(profile)?
    };
    let raw = ingest(&input, &prof)?;
    let mut corpus = Corpus::default();
    let mut skipped = Vec::new();
    for (r, sample) in preprocess(&raw, &prof, seed, exec).into_iter().zip(&raw) {
        match r {
            Ok((s, g)) => {
                corpus.samples.push(s);
                corpus.segments.push(g);
            }
            Err(e) if skip_invalid => {
                tracing::warn!("skipping {}: {e}", sample.id);
                skipped.push(sample.id.clone());
            }
            Err(e) => return Err(e.into()),
        }
    }
    corpus.save(&out)?;

    let mut words = [(0usize, 0usize); 2];
    for g in corpus.segments.iter().flatten() {
        let slot = usize::from(g.size_class == SizeClass::Big);
        words[slot].0 += g.end_word - g.start_word;
        words[slot].1 += 1;
    }
    let avg = |(w, n): (usize, usize)| if n == 0 { 0.0 } else { w as f64 / n as f64 };
    let summary = json!({
        "profile": prof.name,
        "samples": corpus.len(),
        "skipped": skipped,
        "segments_per_sample": prof.n_segments(),
        "n_small": prof.n_small,
        "n_big": prof.n_big,
        "avg_small_words": avg(words[0]),
        "avg_big_words": avg(words[1]),
    });
    run::write_json(&out.join("summary.json"), &summary)?;
    println!(
        "{} samples, {} segments per sample ({} small + {} big); average words small {:.1}, big {:.1}",
        corpus.len(),
        prof.n_segments(),
        prof.n_small,
        prof.n_big,
        avg(words[0]),
        avg(words[1])
    );
    RunManifest::new("preprocess", started)
        .config(json!({ "profile": prof, "seed": seed, "skip_invalid": skip_invalid }))
        .input("dataset", &input)
        .output("corpus", &out)
        .seed(seed)
        .write(&out)
}

fn cmd_featurize(ws: &Workspace, exec: Execution, started: Instant, corpus: &Path, lexicons: Option<&Path>, out: &Path) -> Result<()> {
    let corpus_dir = ws.path(corpus);
    let out = ws.path(out);
    let schema = FeatureSchema::default();
    let lex = match lexicons {
        Some(dir) => Lexicons::load_dir(ws.path(dir), &schema)?,
        None => Lexicons::demo(&schema)?,
    };
    let corpus = Corpus::load(&corpus_dir)?;
    let table = featurize(&corpus, &lex, &schema, exec)?;
    run::ensure_parent(&out)?;
    table.save(&out)?;
    println!("{} rows x {} features", table.rows.len(), table.dim());
    let mut m = RunManifest::new("featurize", started)
        .config(json!({ "schema_dim": schema.dim(), "lexicons": lexicons.map(|p| ws.path(p)) }))
        .input("corpus", &corpus_dir)
        .output("features", &out);
    if let Some(dir) = lexicons {
        m = m.input("lexicons", &ws.path(dir));
    }
    m.write(run::parent(&out))
}

fn cmd_embed_import(ws: &Workspace, started: Instant, input: &Path, out: &Path) -> Result<()> {
    let input = ws.path(input);
    let out = ws.path(out);
    let f = std::fs::File::open(&input).with_context(|| format!("opening {}", input.display()))?;
    let store = EmbeddingStore::import_jsonl(std::io::BufReader::new(f))?;
    store.save(&out)?;
    println!("{} vectors of dimension {}", store.len(), store.dim());
    RunManifest::new("embed-import", started)
        .config(json!({ "dim": store.dim(), "count": store.len() }))
        .input("vectors", &input)
        .output("store", &out)
        .write(&out)
}

struct Loaded {
    corpus: Corpus,
    features: FeatureTable,
    store: Option<EmbeddingStore>,
}

fn load_data(ws: &Workspace, corpus: &Path, features: &Path, embeddings: Option<&Path>) -> Result<Loaded> {
    let corpus = Corpus::load(ws.path(corpus))?;
    let features = FeatureTable::load(ws.path(features))?;
    let store = embeddings.map(|p| EmbeddingStore::load(ws.path(p))).transpose()?;
    Ok(Loaded { corpus, features, store })
}

fn examples_for(data: &Loaded, vocab: Option<&Vocabulary>, trait_name: &str) -> Result<Vec<Example>> {
    let reps = match (&data.store, vocab) {
        (Some(s), _) => RepSource::Store(s),
        (None, Some(v)) => RepSource::Toy(v),
        (None, None) => bail!("no representation source: pass --embeddings or use a toy-encoder checkpoint"),
    };
    Ok(build_examples(&data.corpus, &data.features, &reps, trait_name)?)
}

fn data_inputs(m: RunManifest, ws: &Workspace, d: &DataArgs) -> RunManifest {
    let m = m.input("corpus", &ws.path(&d.corpus)).input("features", &ws.path(&d.features));
    match &d.embeddings {
        Some(e) => m.input("embeddings", &ws.path(e)),
        None => m,
    }
}

fn cmd_train(
    ws: &Workspace,
    exec: Execution,
    started: Instant,
    d: &DataArgs,
    cfg: &ConfigArgs,
    fold: Option<(usize, usize)>,
    out: &Path,
) -> Result<()> {
    let out = ws.path(out);
    let mut config = cfg.resolve(ws)?;
    let data = load_data(ws, &d.corpus, &d.features, d.embeddings.as_deref())?;
    if data.store.is_some() {
        config.model.encoder = EncoderChoice::Fixed;
    }
    let (train_idx, test_idx) = match fold {
        Some((f, k)) => {
            let folds = kfold_partition(data.corpus.len(), k, config.seed)?;
            if f >= k {
                bail!("fold {f} out of range for {k} folds");
            }
            let train_idx: Vec<usize> = (0..k).filter(|&g| g != f).flat_map(|g| folds[g].clone()).collect();
            (train_idx, folds[f].clone())
        }
        None => ((0..data.corpus.len()).collect(), Vec::new()),
    };
    let vocab = (config.model.encoder == EncoderChoice::Toy).then(|| build_vocabulary(&data.corpus, train_idx.iter().copied()));
    let all = examples_for(&data, vocab.as_ref(), &d.trait_name)?;
    let train_set: Vec<Example> = train_idx.iter().map(|&i| all[i].clone()).collect();
    let test_set: Vec<Example> = test_idx.iter().map(|&i| all[i].clone()).collect();
    let stream = fold.map_or(0, |(f, _)| f as u64 + 1);
    let model = initial_model(&config, &train_set, vocab.as_ref().map_or(1, Vocabulary::len), stream)?;
    let outcome = train(model, &train_set, &config, stream, exec)?;

    let fit = predict_all(&outcome.model, &train_set, exec)?;
    let held = predict_all(&outcome.model, &test_set, exec)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ckpt = Checkpoint {
        trait_name: d.trait_name.clone(),
        fold: fold.map(|(f, _)| f),
        config: config.clone(),
        model: outcome.model,
        vocabulary: vocab,
    };
    let ckpt_path = out.join("model.adf");
    ckpt.save(&ckpt_path)?;
    let metrics = json!({
        "trait": d.trait_name,
        "train_size": train_set.len(),
        "test_size": test_set.len(),
        "updates": outcome.updates,
        "epochs": outcome.epochs,
        "train_accuracy": counts(&fit, false).accuracy(),
        "heldout_accuracy": (!held.is_empty()).then(|| counts(&held, false).accuracy()),
        "heldout_ensemble_accuracy": (!held.is_empty()).then(|| counts(&held, true).accuracy()),
    });
    run::write_json(&out.join("metrics.json"), &metrics)?;
    let mut hist = csv::Writer::from_path(out.join("history.csv"))?;
    hist.write_record(["epoch", "mean_loss", "updates"])?;
    for e in &outcome.epochs {
        hist.write_record([e.epoch.to_string(), format!("{:.8}", e.mean_loss), e.updates.to_string()])?;
    }
    hist.flush()?;
    println!(
        "{}: {} updates, train accuracy {:.4}{}",
        d.trait_name,
        outcome.updates,
        counts(&fit, false).accuracy(),
        if held.is_empty() {
            String::new()
        } else {
            format!(", held-out accuracy {:.4}", counts(&held, false).accuracy())
        }
    );
    data_inputs(RunManifest::new("train", started), ws, d)
        .config(serde_json::to_value(&config)?)
        .seed(config.seed)
        .output("checkpoint", &ckpt_path)
        .output("metrics", &out.join("metrics.json"))
        .write(&out)
}

fn cmd_evaluate(ws: &Workspace, exec: Execution, started: Instant, d: &DataArgs, cfg: &ConfigArgs, k: usize, out: &Path) -> Result<()> {
    let out = ws.path(out);
    let mut config = cfg.resolve(ws)?;
    let data = load_data(ws, &d.corpus, &d.features, d.embeddings.as_deref())?;
    if data.store.is_some() {
        config.model.encoder = EncoderChoice::Fixed;
    }
    // The toy vocabulary spans the whole corpus so every fold shares row ids;
    // rows of words unseen in a training fold keep their initial values.
    let vocab = (config.model.encoder == EncoderChoice::Toy).then(|| build_vocabulary(&data.corpus, 0..data.corpus.len()));
    let examples = examples_for(&data, vocab.as_ref(), &d.trait_name)?;
    let report = kfold_evaluate(&examples, &config, k, &d.trait_name, vocab.as_ref().map_or(1, Vocabulary::len), exec)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("metrics.csv"), report.metrics.to_csv()?)?;
    run::write_json(&out.join("metrics.json"), &report.metrics)?;
    let rows: Vec<_> = report.predictions.iter().map(|p| (p.id.clone(), p.label, p.decision)).collect();
    let f = std::fs::File::create(out.join("decisions.csv"))?;
    write_decisions(std::io::BufWriter::new(f), &rows)?;
    print!("{}", report.metrics.summary());
    data_inputs(RunManifest::new("evaluate", started), ws, d)
        .config(json!({ "train": config, "k": k }))
        .seed(config.seed)
        .output("metrics", &out.join("metrics.csv"))
        .output("decisions", &out.join("decisions.csv"))
        .write(&out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_predict(
    ws: &Workspace,
    exec: Execution,
    started: Instant,
    checkpoint: &Path,
    corpus: &Path,
    features: &Path,
    embeddings: Option<&Path>,
    self_ensemble: bool,
    out: &Path,
) -> Result<()> {
    let out = ws.path(out);
    let ckpt = Checkpoint::load(ws.path(checkpoint))?;
    let data = load_data(ws, corpus, features, embeddings)?;
    let examples = examples_for(&data, ckpt.vocabulary.as_ref(), &ckpt.trait_name)?;
    let preds = predict_all(&ckpt.model, &examples, exec)?;
    let rows: Vec<_> = preds
        .iter()
        .map(|p| {
            let d = if self_ensemble {
                p.decision
            } else {
                let mut d = p.decision;
                d.final_label = d.major_label;
                d.corrected = false;
                d
            };
            (p.id.clone(), p.label, d)
        })
        .collect();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("decisions.csv");
    write_decisions(std::io::BufWriter::new(std::fs::File::create(&path)?), &rows)?;
    let acc = counts(&preds, self_ensemble).accuracy();
    println!("{} samples, accuracy {:.4}", preds.len(), acc);
    let mut m = RunManifest::new("predict", started)
        .config(json!({ "self_ensemble": self_ensemble, "trait": ckpt.trait_name }))
        .input("checkpoint", &ws.path(checkpoint))
        .input("corpus", &ws.path(corpus))
        .input("features", &ws.path(features))
        .output("decisions", &path);
    if let Some(e) = embeddings {
        m = m.input("embeddings", &ws.path(e));
    }
    m.write(&out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_inspect(
    ws: &Workspace,
    started: Instant,
    checkpoint: &Path,
    corpus: &Path,
    features: &Path,
    embeddings: Option<&Path>,
    sample: &str,
    out: &Path,
) -> Result<()> {
    let out = ws.path(out);
    let ckpt = Checkpoint::load(ws.path(checkpoint))?;
    let data = load_data(ws, corpus, features, embeddings)?;
    let i = data
        .corpus
        .find(sample)
        .ok_or_else(|| adf_core::Error::UnknownSample(sample.to_string()))?;
    let reps = match (&data.store, &ckpt.vocabulary) {
        (Some(s), _) => RepSource::Store(s),
        (None, Some(v)) => RepSource::Toy(v),
        (None, None) => bail!("no representation source: pass --embeddings"),
    };
    let input = model_input(&data.corpus, i, &data.features, &reps)?;
    let trace = ckpt.model.predict(&input)?;
    let attn = &trace.aiem.attn;
    let n = attn.nrows();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let csv_path = out.join("attention.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["row".to_string()];
    header.extend((0..n).map(|j| j.to_string()));
    w.write_record(&header)?;
    for (r, row) in attn.rows().into_iter().enumerate() {
        let mut rec = vec![r.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    let mut sums = vec!["sum".to_string()];
    sums.extend(attention_mass(attn).iter().map(|m| (m * n as f64).to_string()));
    w.write_record(&sums)?;
    w.flush()?;

    let pgm_path = out.join("attention.pgm");
    std::fs::write(&pgm_path, run::pgm(attn))?;
    println!("{n}x{n} attention for {sample}");
    let mut m = RunManifest::new("inspect-attention", started)
        .config(json!({ "sample": sample, "trait": ckpt.trait_name }))
        .input("checkpoint", &ws.path(checkpoint))
        .input("corpus", &ws.path(corpus))
        .input("features", &ws.path(features))
        .output("matrix", &csv_path)
        .output("image", &pgm_path);
    if let Some(e) = embeddings {
        m = m.input("embeddings", &ws.path(e));
    }
    m.write(&out)
}
