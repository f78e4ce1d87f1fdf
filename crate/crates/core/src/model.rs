//! The hierarchical mixture of Gaussians.
//!
//! An HMoG over `(x, y, z)` is a linear Gaussian model `x | y` whose latent
//! prior is a Gaussian mixture over `(y, z)`. There is no direct `x`–`z`
//! coupling, so `X ⟂ Z | Y`. Both the observable density and the forward
//! mapping reduce to two nested conjugations: the LGM conjugation moves
//! `x` out of the model, and the mixture conjugation then moves `y` out.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::expfam::categorical;
use crate::expfam::mvn::{log_partition_with, LN_2PI};
use crate::expfam::{MvnFamily, MvnMean, MvnNatural};
use crate::harmonium::{chunked_reduce, chunked_sum};
use crate::linalg::{log_sum_exp, Structure, SymBlock};
use crate::linear_gaussian::{conjugation_with, Conditional, LgmStandardForm, LinearGaussianModel};
use crate::mixture::{Components, MixtureMeans, MixtureModel};
use crate::optim::{adam_optimize, AdamConfig, Evaluation};

#[derive(Debug, Clone, PartialEq)]
pub struct Hmog {
    /// `(θ^μ_X, Θ_XX)`, isotropic or diagonal.
    pub obs: MvnNatural,
    /// `Θ_XY`, `n × m`.
    pub obs_interaction: DMatrix<f64>,
    /// `(θ_Y, θ_Z, Θ_YZ)`.
    pub mixture: MixtureModel,
}

/// HMoG mean parameters `(η_X, H_XX, H_XY)` plus the mixture block
/// `(η_Y, H_YY, η_Z, H_YZ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HmogMeans {
    pub obs: MvnMean,
    pub obs_interaction: DMatrix<f64>,
    pub mixture: MixtureMeans,
}

/// Per-iteration EM diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EmDiagnostics {
    pub log_likelihood_before: f64,
    pub log_likelihood_after: f64,
    /// Norm of `τ(θ) − η′` at the returned parameters.
    pub grad_norm: f64,
    pub adam_steps: usize,
    pub rejections: usize,
    /// Times the M-step was rerun at half the learning rate because the
    /// expected complete-data log-likelihood went down.
    pub lr_halvings: usize,
    /// True when no M-step attempt improved the objective and the
    /// parameters were left unchanged.
    pub kept_previous: bool,
}

/// Domain blocks of the packed parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Obs = 0,
    Latent = 1,
    Categorical = 2,
    ObsInteraction = 3,
    LatentInteraction = 4,
}

/// Reductions of an HMoG that every density evaluation needs.
struct Prepared<'a> {
    model: &'a Hmog,
    cond: Conditional,
    rho0: f64,
    /// Components of `θ_Y + Θ_YZ·s_Z(z)`; their second-order blocks are
    /// shared with the posterior `p(y | x, z)`.
    raw: Components,
    raw_covs: Vec<DMatrix<f64>>,
    /// Components of the latent marginal, `θ*_Y = θ_Y + ρ_Y`.
    star: Components,
    log_partition: f64,
}

/// Error raised while preparing a model, tagged with the responsible block.
struct Invalid {
    block: Block,
    error: Error,
}

impl<'a> Prepared<'a> {
    fn new(model: &'a Hmog) -> std::result::Result<Self, Invalid> {
        let cond = Conditional::new(&model.obs, &model.obs_interaction).map_err(|error| Invalid {
            block: Block::Obs,
            error: Error::domain("HMoG observable block", error.to_string()),
        })?;
        let lgm = conjugation_with(&model.obs, &model.obs_interaction, &cond);
        let mix = &model.mixture;
        let raw = Components::try_new(&mix.lat, &mix.interaction).map_err(|i| Invalid {
            block: if i == 0 { Block::Latent } else { Block::LatentInteraction },
            error: Error::domain(
                "HMoG latent components",
                format!("component {} has a non-negative-definite second-order block", i + 1),
            ),
        })?;
        let star = Components::try_new(&mix.lat.add(&lgm.rho), &mix.interaction).map_err(|i| Invalid {
            block: Block::ObsInteraction,
            error: Error::domain(
                "HMoG latent marginal",
                format!("component {} of p(y, z) is not a proper Gaussian", i + 1),
            ),
        })?;
        let raw_covs = raw.factors.iter().map(|f| f.inverse().to_dense()).collect();
        let log_partition = log_sum_exp(&star.log_terms(&mix.cat)) + lgm.rho0;
        Ok(Self {
            model,
            cond,
            rho0: lgm.rho0,
            raw,
            raw_covs,
            star,
            log_partition,
        })
    }

    /// First-order parameters of `p(y | x, z)` for every `z`.
    fn posterior_firsts(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let shift = self.model.obs_interaction.tr_mul(x);
        self.raw.naturals.iter().map(|n| &n.first + &shift).collect()
    }

    /// `θ_Z·s_Z(z) + ψ_Y(θ′_Y + Θ_YZ·s_Z(z))` for every `z`.
    fn posterior_terms(&self, firsts: &[DVector<f64>]) -> Vec<f64> {
        let cat = &self.model.mixture.cat;
        firsts
            .iter()
            .zip(&self.raw.factors)
            .enumerate()
            .map(|(i, (first, f))| log_partition_with(first, f) + if i == 0 { 0.0 } else { cat[i - 1] })
            .collect()
    }

    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim("observation", self.model.obs_dim(), x.len())?;
        let terms = self.posterior_terms(&self.posterior_firsts(x));
        Ok(self.model.obs.pair(x) + log_sum_exp(&terms) - self.log_partition
            - 0.5 * self.model.obs_dim() as f64 * LN_2PI)
    }

    /// `p(z | x)` and `E[y | x, z]`.
    fn posterior(&self, x: &DVector<f64>) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
        check_dim("observation", self.model.obs_dim(), x.len())?;
        let firsts = self.posterior_firsts(x);
        let terms = self.posterior_terms(&firsts);
        let lse = log_sum_exp(&terms);
        let weights = DVector::from_iterator(terms.len(), terms.iter().map(|t| (t - lse).exp()));
        let means = firsts.iter().zip(&self.raw_covs).map(|(f, c)| c * f).collect();
        Ok((weights, means))
    }

    fn forward(&self) -> HmogMeans {
        let (weights, _) = self.star.weights(&self.model.mixture.cat);
        let lat_means = self.star.means();
        let n = self.model.obs_dim();
        let m = self.model.lat_dim();
        let mut obs = MvnMean::zeros(n, self.model.structure());
        let mut obs_interaction = DMatrix::zeros(n, m);
        let mut lat = MvnMean::zeros(m, Structure::Full);
        let mut interaction = Vec::with_capacity(weights.len() - 1);
        for (i, lm) in lat_means.iter().enumerate() {
            let (om, cross) = self.cond.push_forward(&lm.first, &lm.second.to_dense());
            obs = obs.add(&om.scale(weights[i]));
            obs_interaction += cross * weights[i];
            let scaled = lm.scale(weights[i]);
            lat = lat.add(&scaled);
            if i > 0 {
                interaction.push(scaled);
            }
        }
        HmogMeans {
            obs,
            obs_interaction,
            mixture: MixtureMeans {
                lat,
                cat: weights.rows(1, weights.len() - 1).into_owned(),
                interaction,
            },
        }
    }
}

impl HmogMeans {
    fn zeros(n: usize, m: usize, k: usize, structure: Structure) -> Self {
        Self {
            obs: MvnMean::zeros(n, structure),
            obs_interaction: DMatrix::zeros(n, m),
            mixture: MixtureMeans {
                lat: MvnMean::zeros(m, Structure::Full),
                cat: DVector::zeros(k - 1),
                interaction: vec![MvnMean::zeros(m, Structure::Full); k - 1],
            },
        }
    }

    fn add(mut self, other: Self) -> Self {
        self.obs = self.obs.add(&other.obs);
        self.obs_interaction += other.obs_interaction;
        self.mixture.lat = self.mixture.lat.add(&other.mixture.lat);
        self.mixture.cat += other.mixture.cat;
        for (a, b) in self.mixture.interaction.iter_mut().zip(&other.mixture.interaction) {
            *a = a.add(b);
        }
        self
    }

    fn scale(mut self, s: f64) -> Self {
        self.obs = self.obs.scale(s);
        self.obs_interaction *= s;
        self.mixture.lat = self.mixture.lat.scale(s);
        self.mixture.cat *= s;
        for a in self.mixture.interaction.iter_mut() {
            *a = a.scale(s);
        }
        self
    }
}

impl Hmog {
    pub fn new(obs: MvnNatural, obs_interaction: DMatrix<f64>, mixture: MixtureModel) -> Result<Self> {
        if obs.structure() == Structure::Full {
            return Err(Error::Config(
                "HMoG observable block must be isotropic or diagonal".into(),
            ));
        }
        if mixture.lat.structure() != Structure::Full {
            return Err(Error::Config("HMoG latent block must have full structure".into()));
        }
        check_dim("HMoG interaction rows", obs.dim(), obs_interaction.nrows())?;
        check_dim("HMoG interaction columns", mixture.dim(), obs_interaction.ncols())?;
        Ok(Self {
            obs,
            obs_interaction,
            mixture,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs.dim()
    }

    pub fn lat_dim(&self) -> usize {
        self.mixture.dim()
    }

    pub fn num_components(&self) -> usize {
        self.mixture.num_components()
    }

    pub fn structure(&self) -> Structure {
        self.obs.structure()
    }

    fn prepare(&self) -> Result<Prepared<'_>> {
        Prepared::new(self).map_err(|inv| inv.error)
    }

    /// Checks that every conjugation stage is well defined.
    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    /// Replaces the latent prior of `lgm` with `mog`, keeping `p(x | y)`.
    pub fn assemble(lgm: &LinearGaussianModel, mog: &MixtureModel) -> Result<Self> {
        check_dim("LGM and mixture latent dimension", lgm.lat_dim(), mog.dim())?;
        let rho = lgm.conjugation_parameters()?.rho;
        Self::new(
            lgm.obs.clone(),
            lgm.interaction.clone(),
            MixtureModel::new(mog.lat.sub(&rho), mog.cat.clone(), mog.interaction.clone())?,
        )
    }

    /// Splits into `p(x | y)` (as an LGM with a standard-normal prior) and
    /// the latent mixture `p(y, z)`.
    pub fn disassemble(&self) -> Result<(LinearGaussianModel, MixtureModel)> {
        let rho = crate::linear_gaussian::conjugation_parameters(&self.obs, &self.obs_interaction)?.rho;
        let lgm = LinearGaussianModel::new(
            self.obs.clone(),
            MvnNatural::standard(self.lat_dim(), Structure::Full).sub(&rho),
            self.obs_interaction.clone(),
        )?;
        let mog = MixtureModel::new(
            self.mixture.lat.add(&rho),
            self.mixture.cat.clone(),
            self.mixture.interaction.clone(),
        )?;
        Ok((lgm, mog))
    }

    /// The latent marginal `p(y, z)`.
    pub fn latent_mixture(&self) -> Result<MixtureModel> {
        Ok(self.disassemble()?.1)
    }

    /// `p(x | y) = N(mean + loading·y, noise_cov)`.
    pub fn conditional_form(&self) -> Result<LgmStandardForm> {
        let cond = Conditional::new(&self.obs, &self.obs_interaction)?;
        Ok(LgmStandardForm {
            mean: cond.offset,
            noise_cov: cond.cov,
            loading: cond.gain,
        })
    }

    /// `ψ_XYZ = ψ_Z(θ_Z + ρ*_Z) + ρ*₁ + ρ₀`.
    pub fn log_partition(&self) -> Result<f64> {
        Ok(self.prepare()?.log_partition)
    }

    /// The LGM conjugation offset `ρ₀`.
    pub fn rho0(&self) -> Result<f64> {
        Ok(self.prepare()?.rho0)
    }

    pub fn joint_log_density(&self, x: &DVector<f64>, y: &DVector<f64>, z: usize) -> Result<f64> {
        check_dim("observation", self.obs_dim(), x.len())?;
        check_dim("latent point", self.lat_dim(), y.len())?;
        let k = self.num_components();
        let s = categorical::sufficient_statistic(z, k)?;
        let mix = &self.mixture;
        let coupling = if z == 1 { 0.0 } else { mix.interaction[z - 2].pair(y) };
        let d = (self.obs_dim() + self.lat_dim()) as f64;
        Ok(self.obs.pair(x) + mix.lat.pair(y) + s.dot(&mix.cat) + x.dot(&(&self.obs_interaction * y)) + coupling
            - self.log_partition()?
            - 0.5 * d * LN_2PI)
    }

    pub fn observable_log_density(&self, x: &DVector<f64>) -> Result<f64> {
        self.prepare()?.log_density(x)
    }

    pub fn mean_log_likelihood(&self, data: &[DVector<f64>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Data("empty dataset".into()));
        }
        let p = self.prepare()?;
        Ok(chunked_sum(data.len(), |i| p.log_density(&data[i]))? / data.len() as f64)
    }

    /// `p(z | x)`.
    pub fn classify(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.prepare()?.posterior(x)?.0)
    }

    /// `E[y | x]`, marginalizing over the cluster index.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (w, means) = self.prepare()?.posterior(x)?;
        Ok(weighted_sum(&w, &means))
    }

    /// Classifies and projects a whole dataset with one preparation.
    pub fn project_and_classify(&self, data: &[DVector<f64>]) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
        let p = self.prepare()?;
        data.iter()
            .map(|x| {
                let (w, means) = p.posterior(x)?;
                Ok((weighted_sum(&w, &means), w))
            })
            .collect()
    }

    /// Forward mapping through the latent marginal and the observable
    /// conditional.
    pub fn forward(&self) -> Result<HmogMeans> {
        Ok(self.prepare()?.forward())
    }

    /// Forward mapping that runs the dense joint-Gaussian forward of each
    /// component LGM. Reference implementation for [`Self::forward`].
    pub fn forward_dense(&self) -> Result<HmogMeans> {
        let p = self.prepare()?;
        let (weights, _) = p.star.weights(&self.mixture.cat);
        let k = self.num_components();
        let mut acc = HmogMeans::zeros(self.obs_dim(), self.lat_dim(), k, self.structure());
        for i in 0..k {
            let lgm = LinearGaussianModel::new(self.obs.clone(), p.raw.naturals[i].clone(), self.obs_interaction.clone())?;
            let f = lgm.forward_dense()?;
            let w = weights[i];
            acc.obs = acc.obs.add(&f.obs.scale(w));
            acc.obs_interaction += f.interaction * w;
            acc.mixture.lat = acc.mixture.lat.add(&f.lat.scale(w));
            if i > 0 {
                acc.mixture.cat[i - 1] = w;
                acc.mixture.interaction[i - 1] = f.lat.scale(w);
            }
        }
        Ok(acc)
    }

    /// Averaged complete-data statistics `η′` under `p(y, z | x)`.
    pub fn expected_statistics(&self, data: &[DVector<f64>]) -> Result<HmogMeans> {
        if data.is_empty() {
            return Err(Error::Data("empty dataset".into()));
        }
        let p = self.prepare()?;
        let (n, m, k, structure) = (self.obs_dim(), self.lat_dim(), self.num_components(), self.structure());
        let sum = chunked_reduce(
            data.len(),
            |range| {
                let mut acc = HmogMeans::zeros(n, m, k, structure);
                for x in &data[range] {
                    let (w, means) = p.posterior(x)?;
                    let mut ey = DVector::zeros(m);
                    for (i, mu) in means.iter().enumerate() {
                        let second = (&p.raw_covs[i] + mu * mu.transpose()) * w[i];
                        let first = mu * w[i];
                        ey += &first;
                        acc.mixture.lat.first += &first;
                        acc.mixture.lat.second = acc.mixture.lat.second.add(&SymBlock::Full(second.clone()));
                        if i > 0 {
                            acc.mixture.cat[i - 1] += w[i];
                            let slot = &mut acc.mixture.interaction[i - 1];
                            slot.first += first;
                            slot.second = slot.second.add(&SymBlock::Full(second));
                        }
                    }
                    acc.obs.first += x;
                    acc.obs.second = acc.obs.second.add(&SymBlock::outer(x, structure));
                    acc.obs_interaction.ger(1.0, x, &ey, 1.0);
                }
                Ok(acc)
            },
            HmogMeans::add,
        )?
        .expect("data is nonempty");
        Ok(sum.scale(1.0 / data.len() as f64))
    }

    /// Gradient of the mean log-likelihood with respect to the packed
    /// natural parameters: `η′ − τ(θ)`.
    pub fn log_likelihood_gradient(&self, data: &[DVector<f64>]) -> Result<DVector<f64>> {
        let layout = self.layout();
        Ok(layout.pack_means(&self.expected_statistics(data)?) - layout.pack_means(&self.forward()?))
    }

    /// Expected complete-data log-likelihood (up to base measure):
    /// `θ·η′ − ψ_XYZ(θ)`.
    pub fn expected_complete_objective(&self, target: &HmogMeans) -> Result<f64> {
        let layout = self.layout();
        Ok(layout.pack(self).dot(&layout.pack_means(target)) - self.log_partition()?)
    }

    /// One EM iteration; the M-step runs Adam on the natural parameters.
    pub fn em_iteration(&self, data: &[DVector<f64>], cfg: &AdamConfig) -> Result<(Self, EmDiagnostics)> {
        cfg.validate()?;
        let before = self.mean_log_likelihood(data)?;
        let target = self.expected_statistics(data)?;
        let layout = self.layout();
        let eta = layout.pack_means(&target);
        let theta0 = layout.pack(self);
        let q0 = theta0.dot(&eta) - self.log_partition()?;
        let blocks = layout.blocks();
        let mut lr_halvings = 0;
        let mut cfg_try = *cfg;
        let mut accepted = None;
        // generalized EM: accept only M-steps that raise the expected
        // complete-data log-likelihood
        for _ in 0..=MAX_LR_HALVINGS {
            let outcome = adam_optimize(
                |theta| {
                    let h = layout.unpack(theta);
                    match Prepared::new(&h) {
                        Ok(p) => Ok(Evaluation::Gradient(layout.pack_means(&p.forward()) - &eta)),
                        Err(inv) => Ok(Evaluation::Violation { block: inv.block as usize }),
                    }
                },
                theta0.clone(),
                &cfg_try,
                &blocks,
            );
            let outcome = match outcome {
                Ok(o) => o,
                Err(Error::OptimizerStalled { .. }) if lr_halvings < MAX_LR_HALVINGS => {
                    lr_halvings += 1;
                    cfg_try.learning_rate *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let candidate = layout.unpack(&outcome.theta);
            let q = outcome.theta.dot(&eta) - candidate.log_partition()?;
            if q >= q0 {
                accepted = Some((candidate, outcome));
                break;
            }
            lr_halvings += 1;
            cfg_try.learning_rate *= 0.5;
        }
        let kept_previous = accepted.is_none();
        let (next, steps, rejections) = match accepted {
            Some((h, o)) => (h, o.steps, o.rejections),
            None => (self.clone(), 0, 0),
        };
        let after = next.mean_log_likelihood(data)?;
        let grad_norm = (layout.pack_means(&next.forward()?) - &eta).norm();
        Ok((
            next,
            EmDiagnostics {
                log_likelihood_before: before,
                log_likelihood_after: after,
                grad_norm,
                adam_steps: steps,
                rejections,
                lr_halvings,
                kept_previous,
            },
        ))
    }

    pub fn layout(&self) -> HmogLayout {
        HmogLayout {
            n: self.obs_dim(),
            m: self.lat_dim(),
            k: self.num_components(),
            structure: self.structure(),
        }
    }

    /// Ancestral samples `(x, y, z)`.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<(DVector<f64>, DVector<f64>, usize)>> {
        let cond = self.conditional_form()?;
        let root = cond.noise_cov.factor()?.sqrt();
        let n = self.obs_dim();
        let latent = self.latent_mixture()?.sample(count, rng)?;
        Ok(latent
            .into_iter()
            .map(|(y, z)| {
                let e = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                (&cond.mean + &cond.loading * &y + &root * e, y, z)
            })
            .collect())
    }
}

/// Attempts at halving the Adam learning rate before an M-step gives up
/// and keeps the previous parameters.
pub const MAX_LR_HALVINGS: usize = 8;

fn weighted_sum(w: &DVector<f64>, vs: &[DVector<f64>]) -> DVector<f64> {
    vs.iter().zip(w.iter()).fold(DVector::zeros(vs[0].len()), |acc, (v, wi)| acc + v * *wi)
}

/// Flat coordinate layout of HMoG natural and mean parameters:
/// `[θ^μ_X, Θ_XX, θ_Y, θ_Z, Θ_XY (column-major), Θ_YZ (one column per
/// component 2..k)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HmogLayout {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub structure: Structure,
}

impl HmogLayout {
    fn obs_len(&self) -> usize {
        self.n + self.structure.coord_len(self.n)
    }

    fn lat_len(&self) -> usize {
        self.m + Structure::Full.coord_len(self.m)
    }

    pub fn len(&self) -> usize {
        self.obs_len() + self.lat_len() + (self.k - 1) + self.n * self.m + self.lat_len() * (self.k - 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ranges in [`Block`] order.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let sizes = [
            self.obs_len(),
            self.lat_len(),
            self.k - 1,
            self.n * self.m,
            self.lat_len() * (self.k - 1),
        ];
        let mut start = 0;
        sizes
            .iter()
            .map(|s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect()
    }

    pub fn pack(&self, h: &Hmog) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(h.obs.coords().as_slice());
        out.extend_from_slice(h.mixture.lat.coords().as_slice());
        out.extend_from_slice(h.mixture.cat.as_slice());
        out.extend_from_slice(h.obs_interaction.as_slice());
        for shift in &h.mixture.interaction {
            out.extend_from_slice(shift.coords().as_slice());
        }
        DVector::from_vec(out)
    }

    pub fn pack_means(&self, means: &HmogMeans) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(means.obs.coords().as_slice());
        out.extend_from_slice(means.mixture.lat.coords().as_slice());
        out.extend_from_slice(means.mixture.cat.as_slice());
        out.extend_from_slice(means.obs_interaction.as_slice());
        for h in &means.mixture.interaction {
            out.extend_from_slice(h.coords().as_slice());
        }
        DVector::from_vec(out)
    }

    pub fn unpack(&self, theta: &DVector<f64>) -> Hmog {
        let b = self.blocks();
        let v = theta.as_slice();
        let obs = MvnFamily::new(self.n, self.structure).natural_from_coords(&v[b[0].clone()]);
        let lat_family = MvnFamily::new(self.m, Structure::Full);
        let lat = lat_family.natural_from_coords(&v[b[1].clone()]);
        let cat = DVector::from_column_slice(&v[b[2].clone()]);
        let obs_interaction = DMatrix::from_column_slice(self.n, self.m, &v[b[3].clone()]);
        let interaction = v[b[4].clone()]
            .chunks(self.lat_len().max(1))
            .take(self.k - 1)
            .map(|c| lat_family.natural_from_coords(c))
            .collect();
        Hmog {
            obs,
            obs_interaction,
            mixture: MixtureModel {
                lat,
                cat,
                interaction,
            },
        }
    }
}
