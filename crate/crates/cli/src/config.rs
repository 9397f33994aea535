//! Run parameters from flags and an optional JSON file. Flags win.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Every field is optional; commands fill in their own defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: Option<String>,
    pub eps: Option<f64>,
    pub frames: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub suite: Option<String>,
    pub preset: Option<String>,
    pub radius: Option<f64>,
    pub sigma_floor: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: RunConfig) -> Self {
        Self {
            grid: over.grid.or(self.grid),
            eps: over.eps.or(self.eps),
            frames: over.frames.or(self.frames),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            suite: over.suite.or(self.suite),
            preset: over.preset.or(self.preset),
            radius: over.radius.or(self.radius),
            sigma_floor: over.sigma_floor.or(self.sigma_floor),
        }
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(dir)
    }

    pub fn eps_or(&self, default: f64) -> Result<f64, CliError> {
        positive("eps", self.eps.unwrap_or(default))
    }

    pub fn frames_or(&self, default: usize) -> Result<usize, CliError> {
        let f = self.frames.unwrap_or(default);
        if f < 2 {
            return Err(CliError::Usage(format!("frames must be at least 2, got {f}")));
        }
        Ok(f)
    }

    /// `--grid N`.
    pub fn grid_or(&self, default: usize) -> Result<usize, CliError> {
        match &self.grid {
            None => Ok(default),
            Some(g) => match parse_grid(g)? {
                (n, None) => Ok(n),
                _ => Err(CliError::Usage(format!("expected a single grid size, got {g}"))),
            },
        }
    }

    /// `--grid AxB`, or `--grid N` for `N x 2N`.
    pub fn grid2_or(&self, default: (usize, usize)) -> Result<(usize, usize), CliError> {
        match &self.grid {
            None => Ok(default),
            Some(g) => match parse_grid(g)? {
                (n, None) => Ok((n, 2 * n)),
                (a, Some(b)) => Ok((a, b)),
            },
        }
    }
}

pub fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

fn parse_grid(g: &str) -> Result<(usize, Option<usize>), CliError> {
    let bad = || CliError::Usage(format!("bad grid {g:?}: expected N or AxB with positive integers"));
    let num = |s: &str| s.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(bad);
    match g.split_once(['x', 'X']) {
        None => Ok((num(g)?, None)),
        Some((a, b)) => Ok((num(a)?, Some(num(b)?))),
    }
}
