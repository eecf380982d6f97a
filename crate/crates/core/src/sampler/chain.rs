use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Signal};

const MAGIC: &[u8; 8] = b"BBCHAIN1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMethod {
    Gibbs,
    Rwm,
}

impl fmt::Display for SamplerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMethod::Gibbs => "gibbs",
            SamplerMethod::Rwm => "rwm",
        })
    }
}

impl std::str::FromStr for SamplerMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gibbs" => Ok(SamplerMethod::Gibbs),
            "rwm" => Ok(SamplerMethod::Rwm),
            other => Err(Error::InvalidParameter(format!("unknown sampler method {other:?}"))),
        }
    }
}

/// Stored posterior samples (after burn-in and thinning).
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    grid: Grid,
    samples: Vec<f64>,
    pub seed: u64,
    pub burn_in: usize,
    pub thinning: usize,
    pub method: SamplerMethod,
    pub acceptance_rate: Option<f64>,
}

impl Chain {
    pub fn new(
        grid: Grid,
        samples: Vec<f64>,
        seed: u64,
        burn_in: usize,
        thinning: usize,
        method: SamplerMethod,
        acceptance_rate: Option<f64>,
    ) -> Result<Self> {
        let n = grid.len();
        if samples.is_empty() || samples.len() % n != 0 {
            return Err(Error::InvalidParameter(format!(
                "chain storage of length {} does not hold whole samples of size {n}",
                samples.len()
            )));
        }
        if !crate::vecops::all_finite(&samples) {
            return Err(Error::NonFinite("chain samples"));
        }
        Ok(Self {
            grid,
            samples,
            seed,
            burn_in,
            thinning,
            method,
            acceptance_rate,
        })
    }

    /// Chain built from explicit sample vectors, e.g. in tests.
    pub fn from_samples(grid: Grid, samples: &[Vec<f64>], seed: u64) -> Result<Self> {
        let flat: Vec<f64> = samples.iter().flat_map(|s| s.iter().copied()).collect();
        if samples.iter().any(|s| s.len() != grid.len()) {
            return Err(Error::InvalidParameter("sample length differs from grid size".into()));
        }
        Self::new(grid, flat, seed, 0, 1, SamplerMethod::Gibbs, None)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        let n = self.dim();
        &self.samples[k * n..(k + 1) * n]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.samples.chunks_exact(self.dim())
    }

    pub fn sample_signal(&self, k: usize) -> Signal {
        Signal::new(self.grid, self.sample(k).to_vec()).expect("finite samples")
    }

    /// First `count` samples as a new chain.
    pub fn truncated(&self, count: usize) -> Result<Chain> {
        let count = count.min(self.len());
        Chain::new(
            self.grid,
            self.samples[..count * self.dim()].to_vec(),
            self.seed,
            self.burn_in,
            self.thinning,
            self.method,
            self.acceptance_rate,
        )
    }

    pub fn raw(&self) -> &[f64] {
        &self.samples
    }

    /// Writes the binary chain and its `.meta` sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(28 + 8 * self.samples.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.samples {
            out.extend_from_slice(&v.to_le_bytes());
        }
        fs::File::create(path)?.write_all(&out)?;
        fs::write(sidecar_path(path), self.metadata_text())?;
        Ok(())
    }

    fn metadata_text(&self) -> String {
        let rate = self.acceptance_rate.map(|r| r.to_string()).unwrap_or_else(|| "none".into());
        format!(
            "method = {}\nburn_in = {}\nthinning = {}\nacceptance_rate = {}\nrows = {}\ncols = {}\n",
            self.method,
            self.burn_in,
            self.thinning,
            rate,
            self.grid.rows(),
            self.grid.cols()
        )
    }

    /// Reads a chain written by [`Chain::write`]. The grid shape comes from the
    /// sidecar when present, otherwise a 1D grid is assumed.
    pub fn read(path: &Path) -> Result<Chain> {
        let fmt_err = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 28 || &bytes[..8] != MAGIC {
            return Err(fmt_err("missing BBCHAIN1 header".into()));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let body = &bytes[28..];
        if n == 0 || body.len() != 8 * n * count {
            return Err(fmt_err(format!("expected {count} samples of size {n}, found {} bytes", body.len())));
        }
        let samples: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();

        let mut method = SamplerMethod::Gibbs;
        let (mut burn_in, mut thinning, mut rate) = (0usize, 1usize, None);
        let (mut rows, mut cols) = (1usize, n);
        if let Ok(meta) = fs::read_to_string(sidecar_path(path)) {
            for line in meta.lines() {
                let Some((key, value)) = line.split_once('=') else { continue };
                let value = value.trim();
                let bad = |_| fmt_err(format!("bad metadata line {line:?}"));
                match key.trim() {
                    "method" => method = value.parse()?,
                    "burn_in" => burn_in = value.parse().map_err(bad)?,
                    "thinning" => thinning = value.parse().map_err(bad)?,
                    "acceptance_rate" => {
                        rate = if value == "none" {
                            None
                        } else {
                            Some(value.parse().map_err(|_| fmt_err(format!("bad acceptance rate {value:?}")))?)
                        }
                    }
                    "rows" => rows = value.parse().map_err(bad)?,
                    "cols" => cols = value.parse().map_err(bad)?,
                    _ => {}
                }
            }
        }
        if rows * cols != n {
            return Err(fmt_err(format!("sidecar shape {rows}x{cols} does not match n = {n}")));
        }
        let grid = if rows == 1 { Grid::new_1d(n)? } else { Grid::new_2d(rows, cols)? };
        Chain::new(grid, samples, seed, burn_in, thinning, method, rate)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}
