#![allow(dead_code)]

pub mod counter_oracle;

use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// The bundled counter fixture documents as (id, text).
pub fn counter_docs() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(fixture("counter_docs.json")).unwrap();
    let docs: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    docs.iter()
        .map(|d| (d["id"].as_str().unwrap().to_string(), d["text"].as_str().unwrap().to_string()))
        .collect()
}

/// Frozen expected vectors, keyed by document id, with the header row.
pub fn counter_expected() -> (Vec<String>, Vec<(String, Vec<f64>)>) {
    let mut r = csv::Reader::from_path(fixture("counter_expected.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().skip(1).map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].to_string(), rec.iter().skip(1).map(|v| v.parse().unwrap()).collect())
        })
        .collect();
    (header, rows)
}
