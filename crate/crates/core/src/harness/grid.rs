//! Hyperparameter grids over `(η, ρ)`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::run::run_to_file;

pub const MANIFEST_NAME: &str = "manifest.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct GridEntry {
    pub eta: f64,
    pub rho: f64,
    /// Log file name, relative to the grid directory.
    pub log: String,
    pub diverged: bool,
    /// Set when the run failed (config or I/O); the grid carries on.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridIndex {
    pub dir: PathBuf,
    pub entries: Vec<GridEntry>,
}

impl GridIndex {
    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_NAME)
    }
}

pub fn log_name(eta: f64, rho: f64) -> String {
    format!("eta{eta}_rho{rho}.csv")
}

fn manifest_text(entries: &[GridEntry]) -> String {
    let mut out = String::from("eta,rho,log,diverged,error\n");
    for e in entries {
        let err = e
            .error
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n', '\r'], " ");
        let _ = writeln!(out, "{},{},{},{},{}", e.eta, e.rho, e.log, e.diverged, err);
    }
    out
}

fn check_list(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::config(name, "grid list must be nonempty"));
    }
    for (i, a) in values.iter().enumerate() {
        if values[..i].contains(a) {
            return Err(Error::config(name, format!("duplicate value {a}")));
        }
    }
    Ok(())
}

/// Runs every `(η, ρ)` pair of the grid on top of `base`, writing one log per
/// pair and a manifest into `dir`. Runs execute concurrently; the manifest
/// is written after all of them finish, in row-major `(η, ρ)` order.
pub fn run_grid(base: &ExperimentConfig, etas: &[f64], rhos: &[f64], dir: &Path) -> Result<GridIndex> {
    check_list("grid.eta", etas)?;
    check_list("grid.rho", rhos)?;
    std::fs::create_dir_all(dir)?;
    let pairs: Vec<(f64, f64)> = etas
        .iter()
        .flat_map(|&eta| rhos.iter().map(move |&rho| (eta, rho)))
        .collect();
    let entries: Vec<GridEntry> = pairs
        .par_iter()
        .map(|&(eta, rho)| {
            let log = log_name(eta, rho);
            let mut cfg = base.clone();
            cfg.optim.eta = eta;
            cfg.optim.rho = rho;
            cfg.log.path = Some(dir.join(&log));
            let outcome = cfg
                .optim
                .validate()
                .and_then(|()| run_to_file(&cfg, &dir.join(&log)));
            match outcome {
                Ok(records) => GridEntry {
                    eta,
                    rho,
                    log,
                    diverged: records.iter().any(|r| r.flags.diverged),
                    error: None,
                },
                Err(e) => GridEntry {
                    eta,
                    rho,
                    log,
                    diverged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    std::fs::write(dir.join(MANIFEST_NAME), manifest_text(&entries))?;
    Ok(GridIndex {
        dir: dir.to_path_buf(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_ini_str(
            "[objective]\nkind = quadratic\neigenvalues = 30,3,1\n\
             [optim]\neta = 0.1\nrho = 0\nmax_steps = 60\n[spectral]\nk = 1\n",
        )
        .unwrap()
    }

    #[test]
    fn three_by_four_grid_shape() {
        let dir = tempfile::tempdir().unwrap();
        let idx = run_grid(&base(), &[0.03, 0.1, 0.3], &[0.0, 0.1, 0.3, 1.0], dir.path()).unwrap();
        assert_eq!(idx.entries.len(), 12);
        for e in &idx.entries {
            assert!(e.error.is_none());
            assert!(dir.path().join(&e.log).exists());
        }
        // 2/η < 30 for η = 0.1, 0.3 with GD.
        let gd_03 = idx.entries.iter().find(|e| e.eta == 0.3 && e.rho == 0.0).unwrap();
        assert!(gd_03.diverged);
        let manifest = std::fs::read_to_string(idx.manifest_path()).unwrap();
        assert_eq!(manifest.lines().count(), 13);
        assert!(manifest.contains("eta0.03_rho0.csv"));
    }

    #[test]
    fn empty_lists_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(run_grid(&base(), &[0.1], &[], dir.path()).is_err());
        assert!(run_grid(&base(), &[], &[0.1], dir.path()).is_err());
    }

    #[test]
    fn failing_run_is_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let idx = run_grid(&base(), &[0.1], &[0.0, -1.0], dir.path()).unwrap();
        assert!(idx.entries[0].error.is_none());
        assert!(idx.entries[1].error.as_deref().unwrap().contains("rho"));
    }
}
