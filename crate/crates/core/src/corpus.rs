//! Line-delimited corpus records, feature tables and assembly of model
//! inputs from them.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::aiem::{ModelInput, Representations};
use crate::embeddings::{EmbeddingStore, Vocabulary};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::psycholex::{count_features, whole_sample_features, FeatureSchema, Lexicons};
use crate::text::{enhance, sample_seed, Body, DatasetProfile, RawSample, SizeClass};
use crate::trainer::Example;

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const SEGMENTS_FILE: &str = "segments.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub labels: BTreeMap<String, u8>,
    pub document: String,
    /// Counter-grade parts of the original body (posts or the essay).
    pub parts: Vec<String>,
    pub n_small: usize,
    pub n_big: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub sample_id: String,
    pub segment_id: String,
    pub index: usize,
    pub size_class: SizeClass,
    pub start_word: usize,
    pub end_word: usize,
    pub clean_text: String,
    pub raw_text: String,
}

pub fn segment_id(sample_id: &str, index: usize) -> String {
    format!("{sample_id}#{index}")
}

/// Samples with their segments in index order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub samples: Vec<SampleRecord>,
    pub segments: Vec<Vec<SegmentRecord>>,
}

/// Outcome of enhancing one raw sample.
pub type Enhanced = Result<(SampleRecord, Vec<SegmentRecord>)>;

/// Enhances every sample; results keep input order.
pub fn preprocess(samples: &[RawSample], profile: &DatasetProfile, seed: u64, exec: Execution) -> Vec<Enhanced> {
    map_indexed(exec, samples, |_, s| {
        let (document, set) = enhance(s, profile, sample_seed(seed, &s.id))?;
        let parts = match &s.body {
            Body::Essay(t) => vec![crate::text::clean_for_counter(t)],
            Body::Posts(p) => p.iter().map(|t| crate::text::clean_for_counter(t)).collect(),
        };
        let segs = set
            .segments
            .iter()
            .map(|g| SegmentRecord {
                sample_id: s.id.clone(),
                segment_id: segment_id(&s.id, g.index),
                index: g.index,
                size_class: g.size_class,
                start_word: g.start_word,
                end_word: g.end_word,
                clean_text: g.clean_text.clone(),
                raw_text: g.raw_text.clone(),
            })
            .collect();
        Ok((
            SampleRecord {
                id: s.id.clone(),
                labels: s.labels.clone(),
                document,
                parts,
                n_small: set.n_small,
                n_big: set.n_big,
            },
            segs,
        ))
    })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in rows {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            row: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(SAMPLES_FILE), &self.samples)?;
        write_jsonl(&dir.join(SEGMENTS_FILE), self.segments.iter().flatten())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let samples: Vec<SampleRecord> = read_jsonl(&dir.join(SAMPLES_FILE))?;
        let flat: Vec<SegmentRecord> = read_jsonl(&dir.join(SEGMENTS_FILE))?;
        let pos: HashMap<&str, usize> = samples.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
        let mut segments = vec![Vec::new(); samples.len()];
        for seg in flat {
            let i = *pos
                .get(seg.sample_id.as_str())
                .ok_or_else(|| Error::UnknownSample(seg.sample_id.clone()))?;
            segments[i].push(seg);
        }
        for (s, segs) in samples.iter().zip(&mut segments) {
            segs.sort_by_key(|g| g.index);
            if segs.len() != s.n_small + s.n_big || segs.iter().enumerate().any(|(i, g)| g.index != i) {
                return Err(Error::Config(format!("sample {} has an incomplete segment list", s.id)));
            }
        }
        Ok(Corpus { samples, segments })
    }

    /// Trait names present on every sample, sorted.
    pub fn traits(&self) -> Vec<String> {
        let mut it = self.samples.iter();
        let Some(first) = it.next() else { return Vec::new() };
        first
            .labels
            .keys()
            .filter(|k| self.samples.iter().all(|s| s.labels.contains_key(*k)))
            .cloned()
            .collect()
    }

    pub fn find(&self, id: &str) -> Option<usize> {
        self.samples.iter().position(|s| s.id == id)
    }
}

/// Feature rows keyed by sample id or segment id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
    index: HashMap<String, usize>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        FeatureTable {
            names,
            rows: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn push(&mut self, id: String, values: Vec<f64>) -> Result<()> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "feature row",
                expected: self.dim(),
                actual: values.len(),
            });
        }
        self.index.insert(id.clone(), self.rows.len());
        self.rows.push((id, values));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.rows[i].1.as_slice())
    }

    /// Header `id` plus slot names, then one row per entry. Values use the
    /// shortest decimal form that reads back to the same number.
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (id, vals) in &self.rows {
            let mut rec = vec![id.clone()];
            rec.extend(vals.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn read<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.get(0) != Some("id") {
            return Err(Error::MalformedRow {
                row: 1,
                message: "first column must be id".into(),
            });
        }
        let mut t = FeatureTable::new(header.iter().skip(1).map(String::from).collect());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let values = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>().map_err(|e| Error::MalformedRow {
                        row,
                        message: format!("{v:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            t.push(rec[0].to_string(), values).map_err(|e| Error::MalformedRow {
                row,
                message: e.to_string(),
            })?;
        }
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f))
    }
}

/// One row per segment and one per sample, sample row after its segments.
pub fn featurize(corpus: &Corpus, lexicons: &Lexicons, schema: &FeatureSchema, exec: Execution) -> Result<FeatureTable> {
    let per_sample = map_indexed(exec, &corpus.samples, |i, s| -> Result<Vec<(String, Vec<f64>)>> {
        let mut rows = Vec::with_capacity(corpus.segments[i].len() + 1);
        for g in &corpus.segments[i] {
            rows.push((g.segment_id.clone(), count_features(&g.raw_text, lexicons, schema)?.values));
        }
        let raw = RawSample {
            id: s.id.clone(),
            body: Body::Posts(s.parts.clone()),
            labels: BTreeMap::new(),
        };
        rows.push((s.id.clone(), whole_sample_features(&raw, lexicons, schema)?.values));
        Ok(rows)
    });
    let mut table = FeatureTable::new(schema.names());
    for rows in per_sample {
        for (id, v) in rows? {
            table.push(id, v)?;
        }
    }
    Ok(table)
}

/// Segment representation source used when assembling examples.
pub enum RepSource<'a> {
    Toy(&'a Vocabulary),
    Store(&'a EmbeddingStore),
}

/// Vocabulary over the encoder-grade segment text of the given samples.
pub fn build_vocabulary(corpus: &Corpus, samples: impl IntoIterator<Item = usize>) -> Vocabulary {
    let texts: Vec<&str> = samples
        .into_iter()
        .flat_map(|i| corpus.segments[i].iter().map(|g| g.clean_text.as_str()))
        .collect();
    Vocabulary::build(texts)
}

/// Model inputs for one sample.
pub fn model_input(corpus: &Corpus, i: usize, features: &FeatureTable, reps: &RepSource<'_>) -> Result<ModelInput> {
    let s = &corpus.samples[i];
    let segs = &corpus.segments[i];
    let d = features.dim();
    let mut f = Array2::zeros((segs.len(), d));
    for (n, g) in segs.iter().enumerate() {
        let row = features
            .get(&g.segment_id)
            .ok_or_else(|| Error::UnknownSample(g.segment_id.clone()))?;
        f.row_mut(n).assign(&ndarray::ArrayView1::from(row));
    }
    let whole = features.get(&s.id).ok_or_else(|| Error::UnknownSample(s.id.clone()))?;
    let reps = match reps {
        RepSource::Toy(v) => Representations::Tokens(segs.iter().map(|g| v.encode(&g.clean_text)).collect()),
        RepSource::Store(store) => {
            let ids: Vec<&str> = segs.iter().map(|g| g.segment_id.as_str()).collect();
            Representations::Fixed(store.embed(&ids)?)
        }
    };
    Ok(ModelInput {
        features: f,
        whole: Array1::from(whole.to_vec()),
        reps,
    })
}

/// Labelled examples for one trait.
pub fn build_examples(corpus: &Corpus, features: &FeatureTable, reps: &RepSource<'_>, trait_name: &str) -> Result<Vec<Example>> {
    (0..corpus.len())
        .map(|i| {
            let s = &corpus.samples[i];
            let label = *s
                .labels
                .get(trait_name)
                .ok_or_else(|| Error::Config(format!("sample {} has no label for {trait_name}", s.id)))?;
            Ok(Example {
                id: s.id.clone(),
                input: model_input(corpus, i, features, reps)?,
                label,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::DatasetProfile;

    fn raw(id: &str, text: &str) -> RawSample {
        RawSample {
            id: id.into(),
            body: Body::Essay(text.into()),
            labels: BTreeMap::from([("EXT".to_string(), 1)]),
        }
    }

    fn corpus() -> Corpus {
        let text = "I am happy today. I love the sun and I walk a lot. It is nice to be outside with friends. \
                    We talk and laugh. I feel calm when the day ends. Tomorrow I will go again.";
        let samples = vec![raw("a", text), raw("b", text)];
        let mut c = Corpus::default();
        for r in preprocess(&samples, &DatasetProfile::essays(), 7, Execution::Sequential) {
            let (s, g) = r.unwrap();
            c.samples.push(s);
            c.segments.push(g);
        }
        c
    }

    #[test]
    fn corpus_round_trip() {
        let c = corpus();
        assert_eq!(c.segments[0].len(), 6);
        assert_eq!(c.segments[0][3].segment_id, "a#3");
        let dir = tempfile::tempdir().unwrap();
        c.save(dir.path()).unwrap();
        assert_eq!(Corpus::load(dir.path()).unwrap(), c);
        assert_eq!(c.traits(), vec!["EXT"]);
    }

    #[test]
    fn feature_table_round_trip_and_examples() {
        let c = corpus();
        let schema = FeatureSchema::default();
        let lex = Lexicons::demo(&schema).unwrap();
        let table = featurize(&c, &lex, &schema, Execution::Parallel).unwrap();
        assert_eq!(table.rows.len(), 14);
        assert_eq!(table.rows[6].0, "a");
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header.split(',').count(), 113);
        let back = FeatureTable::read(buf.as_slice()).unwrap();
        assert_eq!(back.rows, table.rows);

        let vocab = build_vocabulary(&c, 0..c.len());
        let ex = build_examples(&c, &table, &RepSource::Toy(&vocab), "EXT").unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].input.features.dim(), (6, 112));
        assert!(build_examples(&c, &table, &RepSource::Toy(&vocab), "NEU").is_err());
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = FeatureTable::new(vec!["x".into()]);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,x\n");
    }
}
