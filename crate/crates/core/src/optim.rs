//! Adam with per-block step rejection.

use std::ops::Range;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Consecutive rejected proposals tolerated before giving up.
pub const MAX_REJECTIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub steps: usize,
    /// Stop early once the gradient norm falls below this value.
    pub grad_tol: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epsilon: 1e-8,
            beta1: 0.9,
            beta2: 0.999,
            steps: 2000,
            grad_tol: Some(1e-8),
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("Adam: {msg}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("betas must lie in [0, 1)");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: DVector<f64>,
    pub second_moment: DVector<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            first_moment: DVector::zeros(dim),
            second_moment: DVector::zeros(dim),
            t: 0,
        }
    }
}

/// Updates the moments with `g` and returns the bias-corrected step `Δ`
/// (the iterate moves to `θ − Δ`).
pub fn adam_direction(state: &AdamState, g: &DVector<f64>, cfg: &AdamConfig) -> Result<(AdamState, DVector<f64>)> {
    check_dim("Adam gradient", state.first_moment.len(), g.len())?;
    check_finite("Adam gradient", g.as_slice())?;
    let t = state.t + 1;
    let m = &state.first_moment * cfg.beta1 + g * (1.0 - cfg.beta1);
    let v = &state.second_moment * cfg.beta2 + g.component_mul(g) * (1.0 - cfg.beta2);
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    let step = m.zip_map(&v, |mi, vi| cfg.learning_rate * (mi / c1) / ((vi / c2).sqrt() + cfg.epsilon));
    Ok((
        AdamState {
            first_moment: m,
            second_moment: v,
            t,
        },
        step,
    ))
}

/// One Adam descent step on gradient `g`.
pub fn adam_step(
    state: &AdamState,
    theta: &DVector<f64>,
    g: &DVector<f64>,
    cfg: &AdamConfig,
) -> Result<(AdamState, DVector<f64>)> {
    check_dim("Adam parameters", state.first_moment.len(), theta.len())?;
    let (next, step) = adam_direction(state, g, cfg)?;
    Ok((next, theta - step))
}

/// Result of evaluating a proposed iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Gradient(DVector<f64>),
    /// The iterate left the domain; `block` indexes the offending block.
    Violation { block: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamOutcome {
    pub theta: DVector<f64>,
    pub steps: usize,
    pub rejections: usize,
    pub grad_norm: f64,
    /// Final step multiplier per block, `0.5^(rejections in that block)`.
    pub block_scales: Vec<f64>,
}

/// Runs Adam from `theta0`. `eval` returns the gradient at an iterate or
/// reports which block left the domain. A rejected proposal halves that
/// block's step multiplier for the rest of the run and is re-proposed from
/// the same moments.
pub fn adam_optimize<F>(mut eval: F, theta0: DVector<f64>, cfg: &AdamConfig, blocks: &[Range<usize>]) -> Result<AdamOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<Evaluation>,
{
    cfg.validate()?;
    let dim = theta0.len();
    let covered: usize = blocks.iter().map(|b| b.len()).sum();
    check_dim("Adam block coverage", dim, covered)?;
    let mut g = match eval(&theta0)? {
        Evaluation::Gradient(g) => g,
        Evaluation::Violation { block } => {
            return Err(Error::domain("Adam initial iterate", format!("block {block} is outside the domain")))
        }
    };
    let mut theta = theta0;
    let mut state = AdamState::new(dim);
    let mut scales = vec![1.0; blocks.len()];
    let mut total_rejections = 0;
    let mut steps = 0;
    while steps < cfg.steps {
        if cfg.grad_tol.is_some_and(|tol| g.norm() < tol) {
            break;
        }
        let (next_state, step) = adam_direction(&state, &g, cfg)?;
        let mut consecutive = 0;
        loop {
            let mut proposal = theta.clone();
            for (b, range) in blocks.iter().enumerate() {
                for i in range.clone() {
                    proposal[i] -= scales[b] * step[i];
                }
            }
            match eval(&proposal)? {
                Evaluation::Gradient(next_g) => {
                    theta = proposal;
                    g = next_g;
                    break;
                }
                Evaluation::Violation { block } => {
                    if block >= scales.len() {
                        return Err(Error::IndexOutOfRange {
                            index: block,
                            k: scales.len(),
                        });
                    }
                    scales[block] *= 0.5;
                    consecutive += 1;
                    total_rejections += 1;
                    if consecutive > MAX_REJECTIONS {
                        return Err(Error::OptimizerStalled {
                            step: steps,
                            rejections: consecutive,
                            snapshot: theta.as_slice().to_vec(),
                        });
                    }
                }
            }
        }
        state = next_state;
        steps += 1;
    }
    Ok(AdamOutcome {
        grad_norm: g.norm(),
        theta,
        steps,
        rejections: total_rejections,
        block_scales: scales,
    })
}

/// [`adam_optimize`] with a separate gradient and domain guard; the guard
/// returns the index of a violated block, if any.
pub fn adam_optimize_guarded<G, D>(
    mut grad: G,
    mut guard: D,
    theta0: DVector<f64>,
    cfg: &AdamConfig,
    blocks: &[Range<usize>],
) -> Result<AdamOutcome>
where
    G: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    D: FnMut(&DVector<f64>) -> Option<usize>,
{
    adam_optimize(
        |theta| match guard(theta) {
            Some(block) => Ok(Evaluation::Violation { block }),
            None => grad(theta).map(Evaluation::Gradient),
        },
        theta0,
        cfg,
        blocks,
    )
}
