//! Two-stage and unified training drivers with parallel restarts.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::init::{init_lgm, init_mog};
use super::{FitConfig, Method};
use crate::error::{Error, Result};
use crate::linear_gaussian::LinearGaussianModel;
use crate::mixture::MixtureModel;
use crate::model::Hmog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    LinearGaussian,
    Mixture,
    Unified,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::LinearGaussian => "stage 1 (linear Gaussian EM)",
            Stage::Mixture => "stage 2 (mixture EM)",
            Stage::Unified => "unified EM",
        }
    }
}

/// Log-likelihood history of one training stage.
///
/// `assembled[0]` is the value before the first iteration and `assembled[t]`
/// the value after iteration `t`. `native` tracks the objective that the
/// stage's EM actually climbs: the LGM likelihood of the data in stage 1, the
/// mixture likelihood of the projections in stage 2, and the HMoG likelihood
/// in the unified stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: Stage,
    pub assembled: Vec<f64>,
    pub native: Vec<f64>,
}

impl StageTrace {
    fn new(stage: Stage, assembled: f64, native: f64) -> Self {
        Self {
            stage,
            assembled: vec![assembled],
            native: vec![native],
        }
    }

    fn push(&mut self, assembled: f64, native: f64) {
        self.assembled.push(assembled);
        self.native.push(native);
    }

    pub fn iterations(&self) -> usize {
        self.assembled.len() - 1
    }

    /// Largest drop between consecutive entries of `values` (0 if none).
    pub fn max_decrease(values: &[f64]) -> f64 {
        values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// Totals over the unified EM iterations of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UnifiedSummary {
    pub adam_steps: usize,
    pub rejections: usize,
    pub lr_halvings: usize,
    pub kept_previous: usize,
    pub final_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub seed: u64,
    pub selected_restart: usize,
    /// Final train log-likelihood per restart; `None` for failed restarts.
    pub restart_log_likelihoods: Vec<Option<f64>>,
    /// Per-stage traces of the selected restart.
    pub stages: Vec<StageTrace>,
    /// Mean train log-likelihood of the assembled model after each
    /// iteration of every stage, in order.
    pub trajectory: Vec<f64>,
    /// Assembled log-likelihood at the end of two-stage training.
    pub two_stage_log_likelihood: f64,
    pub final_log_likelihood: f64,
    pub unified: Option<UnifiedSummary>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// A trained model, kept in the form its method uses for inference.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    TwoStage { lgm: LinearGaussianModel, mog: MixtureModel },
    Hmog(Hmog),
}

impl FittedModel {
    /// Rebuilds the inference form of `method` from an HMoG.
    pub fn from_hmog(method: Method, hmog: Hmog) -> Result<Self> {
        if method.is_unified() {
            Ok(FittedModel::Hmog(hmog))
        } else {
            let (lgm, mog) = hmog.disassemble()?;
            Ok(FittedModel::TwoStage { lgm, mog })
        }
    }

    pub fn to_hmog(&self) -> Result<Hmog> {
        match self {
            FittedModel::TwoStage { lgm, mog } => Hmog::assemble(lgm, mog),
            FittedModel::Hmog(h) => Ok(h.clone()),
        }
    }

    /// Two-stage models project with the LGM posterior mean; HMoGs use the
    /// mean of the full latent posterior.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            FittedModel::TwoStage { lgm, .. } => lgm.project(x),
            FittedModel::Hmog(h) => h.project(x),
        }
    }

    /// Cluster probabilities. Two-stage models classify the projection; HMoGs
    /// integrate over the latent features.
    pub fn classify(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            FittedModel::TwoStage { lgm, mog } => mog.posterior(&lgm.project(x)?),
            FittedModel::Hmog(h) => h.classify(x),
        }
    }

    pub fn num_components(&self) -> usize {
        match self {
            FittedModel::TwoStage { mog, .. } => mog.num_components(),
            FittedModel::Hmog(h) => h.num_components(),
        }
    }

    /// Mean observable log-likelihood of the assembled model.
    pub fn mean_log_likelihood(&self, data: &[DVector<f64>]) -> Result<f64> {
        self.to_hmog()?.mean_log_likelihood(data)
    }
}

struct Run {
    lgm: LinearGaussianModel,
    mog: MixtureModel,
    hmog: Option<Hmog>,
    stages: Vec<StageTrace>,
    two_stage: f64,
    unified: Option<UnifiedSummary>,
}

impl Run {
    fn final_log_likelihood(&self) -> f64 {
        *self.stages.last().and_then(|s| s.assembled.last()).unwrap_or(&f64::NEG_INFINITY)
    }
}

fn check_data(data: &[DVector<f64>], cfg: &FitConfig) -> Result<()> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::Data(format!("need at least 2 points, got {}", data.len())));
    }
    if data.len() < cfg.clusters {
        return Err(Error::Data(format!(
            "{} points cannot support {} clusters",
            data.len(),
            cfg.clusters
        )));
    }
    Ok(())
}

fn run_two_stage(data: &[DVector<f64>], cfg: &FitConfig, seed: u64) -> Result<Run> {
    let stage1 = Stage::LinearGaussian;
    let tag = |e: Error, stage: Stage| e.in_stage(stage.label());

    let mut lgm = init_lgm(data, cfg.latent_dim, cfg.method.structure(), seed).map_err(|e| tag(e, stage1))?;
    let ll = lgm.mean_log_likelihood(data).map_err(|e| tag(e, stage1))?;
    let mut trace1 = StageTrace::new(stage1, ll, ll);
    for _ in 0..cfg.stage1_iters {
        lgm = lgm.em_step(data).map_err(|e| tag(e, stage1))?;
        let ll = lgm.mean_log_likelihood(data).map_err(|e| tag(e, stage1))?;
        trace1.push(ll, ll);
    }
    let lgm = lgm.standardize().map_err(|e| tag(e, stage1))?;

    let stage2 = Stage::Mixture;
    let projected = data.iter().map(|x| lgm.project(x)).collect::<Result<Vec<_>>>().map_err(|e| tag(e, stage2))?;
    let mut mog = init_mog(&projected, cfg.clusters, seed).map_err(|e| tag(e, stage2))?;
    let score = |mog: &MixtureModel| -> Result<(f64, f64)> {
        let assembled = Hmog::assemble(&lgm, mog)?.mean_log_likelihood(data)?;
        Ok((assembled, mog.mean_log_likelihood(&projected)?))
    };
    let (a, nat) = score(&mog).map_err(|e| tag(e, stage2))?;
    let mut trace2 = StageTrace::new(stage2, a, nat);
    for _ in 0..cfg.stage2_iters {
        mog = mog.em_step(&projected).map_err(|e| tag(e, stage2))?;
        let (a, nat) = score(&mog).map_err(|e| tag(e, stage2))?;
        trace2.push(a, nat);
    }
    Ok(Run {
        lgm,
        mog,
        hmog: None,
        two_stage: *trace2.assembled.last().expect("trace has an initial value"),
        stages: vec![trace1, trace2],
        unified: None,
    })
}

fn run_hmog(data: &[DVector<f64>], cfg: &FitConfig, seed: u64) -> Result<Run> {
    let mut run = run_two_stage(data, cfg, seed)?;
    let stage = Stage::Unified;
    let tag = |e: Error| e.in_stage(stage.label());
    let mut hmog = Hmog::assemble(&run.lgm, &run.mog).map_err(tag)?;
    let mut trace = StageTrace::new(stage, run.two_stage, run.two_stage);
    let mut summary = UnifiedSummary::default();
    for _ in 0..cfg.hmog_iters {
        let (next, diag) = hmog.em_iteration(data, &cfg.adam).map_err(tag)?;
        hmog = next;
        trace.push(diag.log_likelihood_after, diag.log_likelihood_after);
        summary.adam_steps += diag.adam_steps;
        summary.rejections += diag.rejections;
        summary.lr_halvings += diag.lr_halvings;
        summary.kept_previous += diag.kept_previous as usize;
        summary.final_grad_norm = diag.grad_norm;
    }
    run.stages.push(trace);
    run.hmog = Some(hmog);
    run.unified = Some(summary);
    Ok(run)
}

/// Runs `cfg.restarts` independent fits with seeds `seed, seed+1, …` and
/// keeps the one with the highest final train log-likelihood (lowest index
/// on ties). Failed restarts are skipped; if all fail, the first error is
/// returned.
fn best_of_restarts(
    data: &[DVector<f64>],
    cfg: &FitConfig,
    run: impl Fn(&[DVector<f64>], &FitConfig, u64) -> Result<Run> + Sync,
) -> Result<(Run, FitReport)> {
    let start = Instant::now();
    let results: Vec<Result<Run>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run(data, cfg, cfg.seed.wrapping_add(r as u64)))
        .collect();
    let restart_log_likelihoods: Vec<Option<f64>> = results
        .iter()
        .map(|r| r.as_ref().ok().map(Run::final_log_likelihood).filter(|v| v.is_finite()))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, ll) in restart_log_likelihoods.iter().enumerate() {
        if let Some(ll) = *ll {
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((i, ll));
            }
        }
    }
    let Some((selected, final_ll)) = best else {
        let first_err = results.into_iter().find_map(Result::err);
        return Err(first_err.unwrap_or_else(|| Error::domain("training", "every restart ended with a non-finite likelihood")));
    };
    let run = results.into_iter().nth(selected).and_then(Result::ok).expect("selected restart succeeded");
    let trajectory = run.stages.iter().flat_map(|s| s.assembled[1..].iter().copied()).collect();
    let report = FitReport {
        method: cfg.method,
        seed: cfg.seed,
        selected_restart: selected,
        restart_log_likelihoods,
        stages: run.stages.clone(),
        trajectory,
        two_stage_log_likelihood: run.two_stage,
        final_log_likelihood: final_ll,
        unified: run.unified,
        wall_time: start.elapsed(),
    };
    Ok((run, report))
}

/// Stage 1 fits a linear Gaussian model by EM and standardizes its latent
/// prior; stage 2 fits a mixture by EM to the posterior-mean projections.
pub fn fit_two_stage(data: &[DVector<f64>], cfg: &FitConfig) -> Result<(LinearGaussianModel, MixtureModel, FitReport)> {
    check_data(data, cfg)?;
    let (run, report) = best_of_restarts(data, cfg, run_two_stage)?;
    Ok((run.lgm, run.mog, report))
}

/// Two-stage fit, assembly into an HMoG, then `cfg.hmog_iters` unified EM
/// iterations, all inside each restart.
pub fn fit_hmog(data: &[DVector<f64>], cfg: &FitConfig) -> Result<(Hmog, FitReport)> {
    check_data(data, cfg)?;
    let (run, report) = best_of_restarts(data, cfg, run_hmog)?;
    Ok((run.hmog.expect("unified run produces an HMoG"), report))
}

/// Dispatches on `cfg.method`.
pub fn fit(data: &[DVector<f64>], cfg: &FitConfig) -> Result<(FittedModel, FitReport)> {
    if cfg.method.is_unified() {
        let (h, report) = fit_hmog(data, cfg)?;
        Ok((FittedModel::Hmog(h), report))
    } else {
        let (lgm, mog, report) = fit_two_stage(data, cfg)?;
        Ok((FittedModel::TwoStage { lgm, mog }, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synth::{default_synthetic_spec, gen_synthetic};

    fn small_cfg(method: Method) -> FitConfig {
        FitConfig {
            stage1_iters: 15,
            stage2_iters: 15,
            hmog_iters: 5,
            restarts: 3,
            adam: crate::AdamConfig {
                steps: 200,
                learning_rate: 1e-3,
                ..Default::default()
            },
            ..FitConfig::new(method, 1, 2, 21)
        }
    }

    fn synthetic(count: usize) -> Vec<DVector<f64>> {
        let spec = default_synthetic_spec(3, 1, 2).unwrap();
        gen_synthetic(&spec, count, 5).unwrap().points
    }

    #[test]
    fn report_shape_and_selection() {
        let data = synthetic(300);
        let cfg = small_cfg(Method::HmogFa);
        let (h, report) = fit_hmog(&data, &cfg).unwrap();
        assert_eq!(report.trajectory.len(), 15 + 15 + 5);
        assert_eq!(report.stages.len(), 3);
        assert_eq!(report.restart_log_likelihoods.len(), 3);
        let best = report.restart_log_likelihoods.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.final_log_likelihood, best);
        assert_eq!(report.restart_log_likelihoods[report.selected_restart], Some(best));
        assert!((h.mean_log_likelihood(&data).unwrap() - report.final_log_likelihood).abs() < 1e-12);
        assert!(report.final_log_likelihood >= report.two_stage_log_likelihood - 1e-6);
        let unified = &report.stages[2].assembled;
        assert!(StageTrace::max_decrease(unified) <= 1e-6);
    }

    #[test]
    fn zero_unified_iterations_return_the_assembled_two_stage_model() {
        let data = synthetic(200);
        let mut cfg = small_cfg(Method::HmogFa);
        cfg.hmog_iters = 0;
        let (h, _) = fit_hmog(&data, &cfg).unwrap();
        let mut two = cfg.clone();
        two.method = Method::TwoStageFa;
        let (lgm, mog, _) = fit_two_stage(&data, &two).unwrap();
        assert_eq!(h, Hmog::assemble(&lgm, &mog).unwrap());
    }

    #[test]
    fn deterministic() {
        let data = synthetic(150);
        let cfg = small_cfg(Method::TwoStagePca);
        let (a, ra) = fit(&data, &cfg).unwrap();
        let (b, rb) = fit(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.trajectory, rb.trajectory);
        assert_eq!(ra.restart_log_likelihoods, rb.restart_log_likelihoods);
    }

    #[test]
    fn single_gaussian_stage_two_is_the_mle() {
        // k = 1, m = n: stage 2 reduces to the Gaussian MLE of the projections
        let data = synthetic(200);
        let mut cfg = small_cfg(Method::TwoStageFa);
        cfg.latent_dim = 3;
        cfg.clusters = 1;
        cfg.restarts = 1;
        let (lgm, mog, _) = fit_two_stage(&data, &cfg).unwrap();
        let proj: Vec<_> = data.iter().map(|x| lgm.project(x).unwrap()).collect();
        let mean = super::super::empirical_mean(&proj);
        let cov = proj
            .iter()
            .fold(nalgebra::DMatrix::zeros(3, 3), |a, y| a + (y - &mean) * (y - &mean).transpose())
            / proj.len() as f64;
        let s = mog.to_standard().unwrap();
        assert!((&s.means[0] - mean).norm() < 1e-8);
        assert!((s.covs[0].to_dense() - cov).norm() < 1e-8);
    }

    #[test]
    fn errors_carry_stage_and_config_is_checked() {
        let data: Vec<_> = (0..10).map(|i| DVector::from_vec(vec![i as f64, 1.0])).collect();
        match fit_two_stage(&data, &small_cfg(Method::TwoStageFa)) {
            Err(Error::Stage { stage, .. }) => assert!(stage.contains("stage 1")),
            other => panic!("{other:?}"),
        }
        let mut cfg = small_cfg(Method::TwoStageFa);
        cfg.restarts = 0;
        assert!(matches!(fit(&synthetic(20), &cfg), Err(Error::Config(_))));
    }
}
