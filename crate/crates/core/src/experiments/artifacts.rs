use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bayescost::VerificationReport;
use crate::error::Result;
use crate::grid::Signal;
use crate::io::{write_signal_csv, write_signal_pgm};
use crate::sampler::{sidecar_path, Chain};

#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    /// Relative to the output directory.
    pub path: String,
    pub kind: String,
    pub config_hash: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
    pub artifacts: Vec<ManifestEntry>,
}

/// Writes artifacts into one directory and records each in `manifest.json`.
pub struct ArtifactWriter {
    dir: PathBuf,
    manifest: Manifest,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, scenario: &str, seed: u64, config_hash: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                scenario: scenario.to_string(),
                seed,
                config_hash: config_hash.to_string(),
                artifacts: Vec::new(),
            },
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Registers a file the caller writes itself and returns its path.
    pub fn register(&mut self, name: &str, file: &str, kind: &str) -> PathBuf {
        self.record(name, file, kind)
    }

    fn record(&mut self, name: &str, file: &str, kind: &str) -> PathBuf {
        self.manifest.artifacts.push(ManifestEntry {
            name: name.to_string(),
            path: file.to_string(),
            kind: kind.to_string(),
            config_hash: self.manifest.config_hash.clone(),
        });
        self.dir.join(file)
    }

    /// `<name>.csv`, plus `<name>.pgm` for 2D signals.
    pub fn signal(&mut self, name: &str, signal: &Signal) -> Result<()> {
        let path = self.record(name, &format!("{name}.csv"), "signal_csv");
        write_signal_csv(signal, &path)?;
        if signal.grid().dim() == 2 {
            let path = self.record(name, &format!("{name}.pgm"), "signal_pgm");
            write_signal_pgm(signal, &path)?;
        }
        Ok(())
    }

    pub fn chain(&mut self, name: &str, chain: &Chain) -> Result<()> {
        let path = self.record(name, &format!("{name}.bbchain"), "chain");
        chain.write(&path)?;
        let meta = sidecar_path(&path);
        let file = meta.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        self.record(name, &file, "chain_meta");
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.record(name, &format!("{name}.json"), "json");
        fs::write(path, serde_json::to_string_pretty(value)?)?;
        Ok(())
    }

    /// Any text file; `file` includes the extension.
    pub fn text(&mut self, name: &str, file: &str, kind: &str, contents: &str) -> Result<()> {
        let path = self.record(name, file, kind);
        fs::write(path, contents)?;
        Ok(())
    }

    pub fn report(&mut self, name: &str, report: &VerificationReport) -> Result<()> {
        self.json(name, report)?;
        let path = self.record(name, &format!("{name}.txt"), "report_text");
        fs::write(path, report.to_text())?;
        Ok(())
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(self) -> Result<Manifest> {
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(self.manifest)
    }
}
