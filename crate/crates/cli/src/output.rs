//! Output directory bookkeeping: every file a command writes is recorded so
//! that a failed command can remove what it left behind.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub struct OutputDir {
    dir: PathBuf,
    created: bool,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        let created = !dir.exists();
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output dir {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Register `name` as an output and return its path.
    pub fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        if !self.written.contains(&p) {
            self.written.push(p.clone());
        }
        p
    }

    pub fn writer(&mut self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(BufWriter::new(f))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn file_names(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect()
    }

    /// Remove everything this command wrote, and the directory itself if
    /// this command created it and it is now empty.
    pub fn discard(self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
        if self.created {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

/// Flushes a writer and reports the file on error.
pub fn finish<W: Write>(mut w: W) -> Result<()> {
    w.flush().context("flushing output")
}

/// Counts and phase timings reported by a command.
#[derive(Debug, Default)]
pub struct Summary {
    counts: BTreeMap<String, Value>,
    timings_ms: BTreeMap<String, f64>,
}

impl Summary {
    pub fn count(&mut self, key: &str, value: impl Into<Value>) {
        self.counts.insert(key.to_string(), value.into());
    }

    /// Run `f`, recording its wall time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.elapsed(phase, start);
        out
    }

    pub fn elapsed(&mut self, phase: &str, since: Instant) {
        let ms = since.elapsed().as_secs_f64() * 1000.0;
        *self.timings_ms.entry(phase.to_string()).or_default() += ms;
    }

    pub fn into_json(self, command: &str, config_hash: &str, outputs: Vec<String>) -> Value {
        serde_json::json!({
            "command": command,
            "config_hash": config_hash,
            "counts": self.counts,
            "outputs": outputs,
            "timings_ms": self.timings_ms,
        })
    }
}
