//! Experimental harness: data ingestion, synthetic data, initialization,
//! training drivers with restarts, cross-validation, scoring and reports.

pub mod cv;
pub mod data;
pub mod fit;
pub mod init;
pub mod report;
pub mod score;
pub mod synth;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Structure;
use crate::optim::AdamConfig;

pub use cv::{cross_validate, fold_indices, parse_grid, CvCell, CvReport};
pub use data::{load_csv, write_matrix_csv, Dataset};
pub use fit::{fit, fit_hmog, fit_two_stage, FitReport, FittedModel, Stage, StageTrace};
pub use init::{init_lgm, init_mog};
pub use report::{read_model_json, write_json, write_model_json, write_trajectory_csv, ModelFile};
pub use score::{score_classification, ClusterLabeling};
pub use synth::{default_synthetic_spec, gen_synthetic};

/// Training method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TwoStagePca,
    TwoStageFa,
    HmogPca,
    HmogFa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TwoStagePca, Method::TwoStageFa, Method::HmogPca, Method::HmogFa];

    /// Observable covariance structure: isotropic for PCA, diagonal for FA.
    pub fn structure(self) -> Structure {
        match self {
            Method::TwoStagePca | Method::HmogPca => Structure::Isotropic,
            Method::TwoStageFa | Method::HmogFa => Structure::Diagonal,
        }
    }

    pub fn is_unified(self) -> bool {
        matches!(self, Method::HmogPca | Method::HmogFa)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TwoStagePca => "two_stage_pca",
            Method::TwoStageFa => "two_stage_fa",
            Method::HmogPca => "hmog_pca",
            Method::HmogFa => "hmog_fa",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts both `two_stage_pca` and `two-stage-pca` spellings.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: Method,
    pub latent_dim: usize,
    pub clusters: usize,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub hmog_iters: usize,
    pub adam: AdamConfig,
    pub restarts: usize,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(method: Method, latent_dim: usize, clusters: usize, seed: u64) -> Self {
        Self {
            method,
            latent_dim,
            clusters,
            stage1_iters: 100,
            stage2_iters: 100,
            hmog_iters: 800,
            adam: AdamConfig::default(),
            restarts: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.clusters == 0 {
            return Err(Error::Config("latent dimension and cluster count must be at least 1".into()));
        }
        if self.stage1_iters == 0 || self.stage2_iters == 0 {
            return Err(Error::Config("stage iteration counts must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.method.is_unified() {
            self.adam.validate()?;
        }
        Ok(())
    }
}

/// Independent random stream `stream` derived from `seed`.
pub(crate) fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn empirical_mean(data: &[DVector<f64>]) -> DVector<f64> {
    let n = data[0].len();
    data.iter().fold(DVector::zeros(n), |acc, x| acc + x) / data.len() as f64
}
