//! Output directory, data files and run manifests.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::failure::{CmdResult, Failure};
use crate::source::{sha256_hex, InputFile};

pub const SCHEMA: &str = "pomdp-lambda/v1";

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

/// Written next to a command's data files; lists every one of them.
#[derive(Debug, Serialize)]
pub struct RunManifest<C> {
    pub schema: &'static str,
    pub command: &'static str,
    pub version: &'static str,
    pub config: C,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<OutputRecord>,
    pub created_unix: u64,
}

/// Collects the data files of one command run under `dir`.
pub struct Outputs {
    dir: PathBuf,
    command: &'static str,
    written: Vec<OutputRecord>,
}

impl Outputs {
    pub fn create(dir: &Path, command: &'static str) -> CmdResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Io(anyhow::anyhow!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: String, bytes: Vec<u8>) -> CmdResult<PathBuf> {
        let path = self.dir.join(&name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, &bytes)
            .map_err(|e| Failure::Io(anyhow::anyhow!("cannot write {}: {e}", path.display())))?;
        self.written.push(OutputRecord {
            file: name,
            sha256: sha256_hex(&bytes),
        });
        Ok(path)
    }

    /// Writes `rows` as CSV; the header comes from the row type's fields.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> CmdResult<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Failure::Io(anyhow::anyhow!("{e}")))?;
        self.put(name.to_string(), bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CmdResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put(name.to_string(), bytes)
    }

    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) -> CmdResult<PathBuf> {
        self.put(name.to_string(), bytes)
    }

    pub fn finish<C: Serialize>(
        self,
        config: C,
        seeds: Vec<u64>,
        inputs: Vec<InputFile>,
    ) -> CmdResult<PathBuf> {
        let manifest = RunManifest {
            schema: SCHEMA,
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            seeds,
            inputs,
            outputs: self.written,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        };
        let path = self.dir.join(format!("{}.manifest.json", self.command));
        let file = fs::File::create(&path)
            .map_err(|e| Failure::Io(anyhow::anyhow!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }
}
