//! Workspace paths, run manifests and small output helpers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use ndarray::Array2;
use serde::Serialize;

pub const MANIFEST_FILE: &str = "run_manifest.json";

pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: &Path) -> Self {
        Workspace { root: root.to_path_buf() }
    }

    /// `p` itself when absolute, otherwise `p` under the root.
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }
}

#[derive(Serialize)]
pub struct RunManifest {
    command: String,
    tool_version: String,
    config: serde_json::Value,
    inputs: BTreeMap<String, PathBuf>,
    outputs: BTreeMap<String, PathBuf>,
    seed: Option<u64>,
    started_unix: u64,
    wall_clock_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str, started: Instant) -> Self {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let elapsed = started.elapsed().as_secs();
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::Value::Null,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seed: None,
            started_unix: now.saturating_sub(elapsed),
            wall_clock_seconds: 0.0,
            started: Some(started),
        }
    }

    pub fn config(mut self, v: serde_json::Value) -> Self {
        self.config = v;
        self
    }

    pub fn input(mut self, key: &str, p: &Path) -> Self {
        self.inputs.insert(key.to_string(), p.to_path_buf());
        self
    }

    pub fn output(mut self, key: &str, p: &Path) -> Self {
        self.outputs.insert(key.to_string(), p.to_path_buf());
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = Some(s);
        self
    }

    /// Writes `run_manifest.json` into `dir`.
    pub fn write(mut self, dir: &Path) -> Result<()> {
        if let Some(s) = self.started {
            self.wall_clock_seconds = s.elapsed().as_secs_f64();
        }
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join(MANIFEST_FILE), &self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn parent(p: &Path) -> &Path {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    }
}

pub fn ensure_parent(p: &Path) -> Result<()> {
    let d = parent(p);
    std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))
}

/// Binary greyscale PGM, one byte per entry: `value · 255` rounded half
/// to even.
pub fn pgm(m: &Array2<f64>) -> Vec<u8> {
    let (rows, cols) = m.dim();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(m.iter().map(|&v| (v * 255.0).round_ties_even().clamp(0.0, 255.0) as u8));
    out
}
