//! K-fold cross-validation over a grid of latent dimensions and cluster
//! counts.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::fit;
use super::{rng_stream, Dataset, FitConfig, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub latent_dim: usize,
    pub clusters: usize,
    /// Held-out mean log-likelihood per fold.
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across folds.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: Method,
    pub folds: usize,
    pub seed: u64,
    pub cells: Vec<CvCell>,
}

/// Shuffles `0..n` with a seeded generator and cuts it into `folds`
/// contiguous blocks whose sizes differ by at most one.
pub fn fold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config("cross-validation needs at least 2 folds".into()));
    }
    if n < folds {
        return Err(Error::Data(format!("{n} points cannot be split into {folds} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_stream(seed, 3));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Parses `"m1:k1,m2:k2,…"`.
pub fn parse_grid(spec: &str) -> Result<Vec<(usize, usize)>> {
    let cells = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|cell| {
            let bad = || Error::Config(format!("grid cell '{cell}' is not of the form m:k"));
            let (m, k) = cell.split_once(':').ok_or_else(bad)?;
            let m: usize = m.trim().parse().map_err(|_| bad())?;
            let k: usize = k.trim().parse().map_err(|_| bad())?;
            if m == 0 || k == 0 {
                return Err(bad());
            }
            Ok((m, k))
        })
        .collect::<Result<Vec<_>>>()?;
    if cells.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    Ok(cells)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// For every `(m, k)` in `grid` and every fold, fits `cfg.method` on the
/// other folds and scores the mean observable log-likelihood of the
/// held-out fold.
pub fn cross_validate(data: &Dataset, cfg: &FitConfig, folds: usize, grid: &[(usize, usize)]) -> Result<CvReport> {
    data.validate()?;
    let parts = fold_indices(data.len(), folds, cfg.seed)?;
    let smallest = parts.iter().map(Vec::len).min().unwrap_or(0);
    if let Some(&(_, k)) = grid.iter().find(|(_, k)| smallest < *k) {
        return Err(Error::Data(format!("fold of {smallest} points is smaller than k = {k}")));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..folds).map(move |f| (c, f))).collect();
    let scores = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (m, k) = grid[c];
            let cell_cfg = FitConfig {
                latent_dim: m,
                clusters: k,
                ..cfg.clone()
            };
            let train: Vec<usize> = parts
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            let train = data.subset(&train);
            let test = data.subset(&parts[f]);
            let (model, _) = fit(&train.points, &cell_cfg)
                .map_err(|e| e.in_stage(format!("cross-validation cell m={m}, k={k}, fold {}", f + 1)))?;
            model.mean_log_likelihood(&test.points)
        })
        .collect::<Result<Vec<f64>>>()?;
    let cells = grid
        .iter()
        .enumerate()
        .map(|(c, &(m, k))| {
            let fold_scores = scores[c * folds..(c + 1) * folds].to_vec();
            let (mean, sd) = mean_sd(&fold_scores);
            CvCell {
                latent_dim: m,
                clusters: k,
                fold_scores,
                mean,
                sd,
            }
        })
        .collect();
    Ok(CvReport {
        method: cfg.method,
        folds,
        seed: cfg.seed,
        cells,
    })
}

impl CvReport {
    pub fn cell(&self, m: usize, k: usize) -> Option<&CvCell> {
        self.cells.iter().find(|c| c.latent_dim == m && c.clusters == k)
    }

    /// Mean held-out log-likelihood as a table with one row per latent
    /// dimension and one column per cluster count. Cells outside the grid
    /// are left empty.
    pub fn grid_csv(&self) -> String {
        let ms: BTreeSet<usize> = self.cells.iter().map(|c| c.latent_dim).collect();
        let ks: BTreeSet<usize> = self.cells.iter().map(|c| c.clusters).collect();
        let mut out = String::from("m");
        for k in &ks {
            out.push_str(&format!(",k{k}"));
        }
        out.push('\n');
        for &m in &ms {
            out.push_str(&m.to_string());
            for &k in &ks {
                out.push(',');
                if let Some(c) = self.cell(m, k) {
                    out.push_str(&c.mean.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    /// One row per cell with its mean, standard deviation and fold scores.
    pub fn detail_csv(&self) -> String {
        let mut out = String::from("m,k,mean,sd");
        for f in 1..=self.folds {
            out.push_str(&format!(",fold{f}"));
        }
        out.push('\n');
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{}", c.latent_dim, c.clusters, c.mean, c.sd));
            for s in &c.fold_scores {
                out.push_str(&format!(",{s}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_grid_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        File::create(path.as_ref())?.write_all(self.grid_csv().as_bytes())?;
        Ok(())
    }

    pub fn write_detail_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        File::create(path.as_ref())?.write_all(self.detail_csv().as_bytes())?;
        Ok(())
    }
}
