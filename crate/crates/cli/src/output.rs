//! Output directory: data files plus a manifest listing each file with its
//! SHA-256 digest, the resolved configuration and the experiment
//! description needed to rerun it.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use njpo_core::experiments::{fmt_full, Artifact, ExperimentResult, IdlerClass, IdlerKind};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub workers: usize,
    /// Resolved configuration; `config.toml` in the same directory holds
    /// the same text.
    pub config: &'a str,
    pub experiment: Option<serde_json::Value>,
    pub summary: serde_json::Value,
    pub files: Vec<FileEntry>,
    pub created_unix: u64,
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Creates `name` (subdirectories allowed) and hands a buffered writer
    /// to `fill`.
    pub fn write<F>(&mut self, name: &str, fill: F) -> io::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(fs::File::create(&path)?);
        fill(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Aggregate table as `results.csv` and every per-point artifact under
    /// `points/`.
    pub fn write_result(&mut self, result: &ExperimentResult) -> io::Result<()> {
        self.write("results.csv", |w| result.write_csv(w))?;
        for r in &result.records {
            for a in &r.artifacts {
                let name = format!("points/{:04}_{}.csv", r.index, a.name());
                let meta = [("point", r.index.to_string()), ("seed", r.seed.to_string())];
                match a {
                    Artifact::Spectrum { psd, .. } => self.write(&name, |w| psd.write_csv(w, &meta))?,
                    Artifact::Histogram { histogram, .. } => self.write(&name, |w| histogram.write_csv(w, &meta))?,
                    Artifact::Idlers { peaks, .. } => self.write(&name, |w| {
                        let mut out = csv::Writer::from_writer(w);
                        out.write_record(["mode", "kind", "frequency_hz", "offset_hz", "width_hz", "height", "class"])?;
                        for p in peaks {
                            out.write_record([
                                p.mode.index().to_string(),
                                idler_kind(p.kind).to_string(),
                                fmt_full(p.frequency_hz),
                                fmt_full(p.offset_hz),
                                fmt_full(p.width_hz),
                                fmt_full(p.height),
                                match p.class {
                                    IdlerClass::Narrow => "narrow".to_string(),
                                    IdlerClass::Broad => "broad".to_string(),
                                },
                            ])?;
                        }
                        out.flush()
                    })?,
                }
            }
        }
        Ok(())
    }

    /// Writes the manifest last so that it covers every data file.
    pub fn finish(
        self,
        command: &str,
        seed: u64,
        workers: usize,
        config: &str,
        experiment: Option<serde_json::Value>,
        summary: serde_json::Value,
    ) -> io::Result<PathBuf> {
        let mut files = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let data = fs::read(self.root.join(name))?;
            files.push(FileEntry { name: name.clone(), bytes: data.len() as u64, sha256: hex::encode(Sha256::digest(&data)) });
        }
        let manifest = Manifest {
            tool: "njpo",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            workers,
            config,
            experiment,
            summary,
            files,
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let path = self.root.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

fn idler_kind(k: IdlerKind) -> &'static str {
    match k {
        IdlerKind::Signal => "signal",
        IdlerKind::Oscillation => "oscillation",
        IdlerKind::PrimaryIdler => "primary_idler",
        IdlerKind::SecondaryIdler => "secondary_idler",
        IdlerKind::Unidentified => "unidentified",
    }
}
