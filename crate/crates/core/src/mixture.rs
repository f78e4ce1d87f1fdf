//! Gaussian mixtures as conjugated harmoniums over `(y, z)`.
//!
//! Component 1 is the reference component: its natural parameters are the
//! base `θ_Y`, and component `i ≥ 2` adds the interaction column `Θ_YZ[i]`
//! to the base. The categorical natural parameters `θ_Z` are not the log
//! weight ratios themselves; the prior weights are `τ_Z(θ_Z + ρ_Z)` where
//! `ρ_Z` are the conjugation parameters.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::expfam::categorical;
use crate::expfam::mvn::{forward_with, log_partition_with, LN_2PI};
use crate::expfam::{CategoricalFamily, MvnFamily, MvnMean, MvnNatural, MvnStandard};
use crate::harmonium::{chunked_reduce, chunked_sum, ConjugationParams, Harmonium, HarmoniumMeans};
use crate::linalg::{log_sum_exp, SymBlock, SymFactor};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    /// Base Gaussian parameters `θ_Y` (component 1).
    pub lat: MvnNatural,
    /// Categorical parameters `θ_Z`, length `k − 1`.
    pub cat: DVector<f64>,
    /// Interaction columns `Θ_YZ`, one Gaussian shift per component `2..=k`.
    pub interaction: Vec<MvnNatural>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureStandardForm {
    pub weights: DVector<f64>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<SymBlock>,
}

/// Output of the mixture conjugation computation.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConjugation {
    /// `ρ₁ = ψ_Y(θ_Y)`.
    pub rho1: f64,
    /// `ρ_{Z,i} = ψ_Y(θ_Y + Θ_YZ·s_Z(i+1)) − ρ₁`.
    pub rho_z: DVector<f64>,
}

/// Mixture mean parameters `(η_Y, η_Z, H_YZ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureMeans {
    pub lat: MvnMean,
    pub cat: DVector<f64>,
    /// `E[s_Y(y) · 1{z = i}]` for components `i = 2..=k`.
    pub interaction: Vec<MvnMean>,
}

/// Per-component log-partitions and factorizations for a base and shifts.
pub(crate) struct Components {
    pub naturals: Vec<MvnNatural>,
    pub factors: Vec<SymFactor>,
    pub psi: Vec<f64>,
}

impl Components {
    pub fn new(base: &MvnNatural, shifts: &[MvnNatural]) -> Result<Self> {
        Self::try_new(base, shifts).map_err(|i| {
            Error::domain(
                "mixture component",
                format!("component {} has a non-negative-definite second-order block", i + 1),
            )
        })
    }

    /// Like [`Components::new`], reporting the 0-based index of the first
    /// invalid component on failure.
    pub fn try_new(base: &MvnNatural, shifts: &[MvnNatural]) -> std::result::Result<Self, usize> {
        let k = shifts.len() + 1;
        let mut naturals = Vec::with_capacity(k);
        let mut factors = Vec::with_capacity(k);
        let mut psi = Vec::with_capacity(k);
        for i in 0..k {
            let nat = if i == 0 { base.clone() } else { base.add(&shifts[i - 1]) };
            let f = nat.precision_factor().map_err(|_| i)?;
            psi.push(log_partition_with(&nat.first, &f));
            naturals.push(nat);
            factors.push(f);
        }
        Ok(Self { naturals, factors, psi })
    }

    pub fn conjugation(&self) -> MixtureConjugation {
        let rho1 = self.psi[0];
        MixtureConjugation {
            rho1,
            rho_z: DVector::from_iterator(self.psi.len() - 1, self.psi[1..].iter().map(|p| p - rho1)),
        }
    }

    /// Unnormalized log weights `θ_Z·s_Z(z) + ψ_Y(component z)`.
    pub fn log_terms(&self, cat: &DVector<f64>) -> Vec<f64> {
        self.psi
            .iter()
            .enumerate()
            .map(|(i, p)| if i == 0 { *p } else { p + cat[i - 1] })
            .collect()
    }

    /// Full weight vector and the mixture log-partition.
    pub fn weights(&self, cat: &DVector<f64>) -> (DVector<f64>, f64) {
        let terms = self.log_terms(cat);
        let lse = log_sum_exp(&terms);
        (DVector::from_iterator(terms.len(), terms.iter().map(|t| (t - lse).exp())), lse)
    }

    pub fn means(&self) -> Vec<MvnMean> {
        self.naturals
            .iter()
            .zip(&self.factors)
            .map(|(n, f)| forward_with(&n.first, f))
            .collect()
    }
}

impl MixtureModel {
    pub fn new(lat: MvnNatural, cat: DVector<f64>, interaction: Vec<MvnNatural>) -> Result<Self> {
        check_dim("mixture categorical parameters", interaction.len(), cat.len())?;
        for shift in &interaction {
            check_dim("mixture interaction column", lat.dim(), shift.dim())?;
        }
        Ok(Self { lat, cat, interaction })
    }

    pub fn num_components(&self) -> usize {
        self.cat.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.lat.dim()
    }

    pub(crate) fn components(&self) -> Result<Components> {
        Components::new(&self.lat, &self.interaction)
    }

    /// Natural parameters of component `i` (1-based).
    pub fn component(&self, i: usize) -> Result<MvnNatural> {
        let k = self.num_components();
        if i == 0 || i > k {
            return Err(Error::IndexOutOfRange { index: i, k });
        }
        Ok(if i == 1 {
            self.lat.clone()
        } else {
            self.lat.add(&self.interaction[i - 2])
        })
    }

    pub fn conjugation_parameters(&self) -> Result<MixtureConjugation> {
        Ok(self.components()?.conjugation())
    }

    /// Prior weights `π` over all `k` components.
    pub fn weights(&self) -> Result<DVector<f64>> {
        Ok(self.components()?.weights(&self.cat).0)
    }

    /// `ψ_YZ = ψ_Z(θ_Z + ρ_Z) + ρ₁`.
    pub fn log_partition(&self) -> Result<f64> {
        Ok(self.components()?.weights(&self.cat).1)
    }

    pub fn forward(&self) -> Result<MixtureMeans> {
        Ok(forward_components(&self.components()?, &self.cat))
    }

    /// `log p(y)` through the conjugated harmonium density.
    pub fn observable_log_density(&self, y: &DVector<f64>) -> Result<f64> {
        let comps = self.components()?;
        let psi_yz = comps.weights(&self.cat).1;
        self.observable_log_density_with(psi_yz, y)
    }

    fn posterior_cat(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.cat.len(),
            self.cat.iter().zip(&self.interaction).map(|(c, shift)| c + shift.pair(y)),
        )
    }

    fn observable_log_density_with(&self, psi_yz: f64, y: &DVector<f64>) -> Result<f64> {
        check_dim("mixture observation", self.dim(), y.len())?;
        let post = self.posterior_cat(y);
        Ok(self.lat.pair(y) + categorical::log_partition_unchecked(post.as_slice()) - psi_yz
            - 0.5 * self.dim() as f64 * LN_2PI)
    }

    /// Posterior logits over all `k` components, with the reference
    /// component's logit fixed at zero.
    pub fn posterior_logits(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("mixture observation", self.dim(), y.len())?;
        let post = self.posterior_cat(y);
        Ok(DVector::from_iterator(self.num_components(), std::iter::once(0.0).chain(post.iter().copied())))
    }

    /// `p(z | y)` over all `k` components.
    pub fn posterior(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("mixture observation", self.dim(), y.len())?;
        categorical::probabilities(&self.posterior_cat(y))
    }

    pub fn joint_log_density(&self, y: &DVector<f64>, z: usize) -> Result<f64> {
        check_dim("mixture observation", self.dim(), y.len())?;
        let s = categorical::sufficient_statistic(z, self.num_components())?;
        let interaction = if z == 1 { 0.0 } else { self.interaction[z - 2].pair(y) };
        Ok(self.lat.pair(y) + s.dot(&self.cat) + interaction - self.log_partition()?
            - 0.5 * self.dim() as f64 * LN_2PI)
    }

    pub fn mean_log_likelihood(&self, data: &[DVector<f64>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Data("empty dataset".into()));
        }
        let psi_yz = self.log_partition()?;
        Ok(chunked_sum(data.len(), |i| self.observable_log_density_with(psi_yz, &data[i]))? / data.len() as f64)
    }

    pub fn from_standard(s: &MixtureStandardForm) -> Result<Self> {
        let k = s.weights.len();
        check_dim("mixture means", k, s.means.len())?;
        check_dim("mixture covariances", k, s.covs.len())?;
        let naturals = s
            .means
            .iter()
            .zip(&s.covs)
            .map(|(mean, cov)| {
                MvnStandard {
                    mean: mean.clone(),
                    cov: cov.clone(),
                }
                .to_natural()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_components(&s.weights, naturals)
    }

    /// Builds a mixture from prior weights and component natural parameters.
    pub fn from_components(weights: &DVector<f64>, naturals: Vec<MvnNatural>) -> Result<Self> {
        check_dim("mixture components", weights.len(), naturals.len())?;
        let total = weights.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain("mixture weights", format!("weights sum to {total}")));
        }
        let log_ratio = categorical::from_probabilities(weights)?;
        let base = naturals[0].clone();
        let shifts: Vec<MvnNatural> = naturals[1..].iter().map(|n| n.sub(&base)).collect();
        let conj = Components::new(&base, &shifts)?.conjugation();
        Ok(Self {
            lat: base,
            cat: log_ratio - conj.rho_z,
            interaction: shifts,
        })
    }

    pub fn to_standard(&self) -> Result<MixtureStandardForm> {
        let comps = self.components()?;
        let weights = comps.weights(&self.cat).0;
        let (means, covs) = comps
            .naturals
            .iter()
            .zip(&comps.factors)
            .map(|(n, f)| (f.solve_vec(&n.first), f.inverse()))
            .unzip();
        Ok(MixtureStandardForm { weights, means, covs })
    }

    /// Closed-form backward mapping from mixture mean parameters.
    pub fn backward(means: &MixtureMeans, jitter: Option<f64>) -> Result<Self> {
        let k = means.cat.len() + 1;
        check_dim("mixture interaction means", k - 1, means.interaction.len())?;
        let weights = categorical::full_probabilities(&means.cat);
        let mut component_means = Vec::with_capacity(k);
        let mut first = means.lat.clone();
        for h in &means.interaction {
            first = first.add(&h.scale(-1.0));
        }
        component_means.push(first.scale(1.0 / weights[0]));
        for (i, h) in means.interaction.iter().enumerate() {
            component_means.push(h.scale(1.0 / weights[i + 1]));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0)) {
            return Err(Error::domain(
                "mixture backward mapping",
                format!("component {} has weight {}", i + 1, weights[i]),
            ));
        }
        let naturals = component_means
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.backward_with_jitter(jitter)
                    .map_err(|e| Error::domain("mixture backward mapping", format!("component {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_components(&weights, naturals)
    }

    pub fn family(&self) -> (MvnFamily, CategoricalFamily) {
        (self.lat.family(), CategoricalFamily { num_categories: self.num_components() })
    }

    pub fn to_harmonium(&self) -> Harmonium<MvnFamily, CategoricalFamily> {
        let (obs, lat) = self.family();
        let mut interaction = DMatrix::zeros(obs.coord_len(), self.cat.len());
        for (j, shift) in self.interaction.iter().enumerate() {
            interaction.set_column(j, &shift.coords());
        }
        Harmonium {
            obs_family: obs,
            lat_family: lat,
            obs_params: self.lat.coords(),
            lat_params: self.cat.clone(),
            interaction,
        }
    }

    pub fn from_harmonium(h: &Harmonium<MvnFamily, CategoricalFamily>) -> Result<Self> {
        let fam = h.obs_family;
        let interaction = h
            .interaction
            .column_iter()
            .map(|c| fam.natural_from_coords(c.as_slice()))
            .collect();
        Self::new(fam.natural_from_coords(h.obs_params.as_slice()), h.lat_params.clone(), interaction)
    }

    /// The conjugation parameters in generic harmonium form.
    pub fn harmonium_conjugation(&self) -> Result<ConjugationParams> {
        let c = self.conjugation_parameters()?;
        Ok(ConjugationParams {
            rho: c.rho_z,
            rho0: c.rho1,
        })
    }

    fn means_from_harmonium(&self, m: &HarmoniumMeans) -> MixtureMeans {
        let fam = self.lat.family();
        MixtureMeans {
            lat: fam.mean_from_coords(m.obs.as_slice()),
            cat: m.lat.clone(),
            interaction: m
                .interaction
                .column_iter()
                .map(|c| fam.mean_from_coords(c.clone_owned().as_slice()))
                .collect(),
        }
    }

    /// One closed-form EM step.
    pub fn em_step(&self, data: &[DVector<f64>]) -> Result<Self> {
        self.em_step_with_jitter(data, None)
    }

    /// EM step that adds `ε·I` to any component covariance that fails to
    /// factorize.
    pub fn em_step_with_jitter(&self, data: &[DVector<f64>], jitter: Option<f64>) -> Result<Self> {
        if data.len() < self.num_components() {
            return Err(Error::Data(format!(
                "{} points cannot support {} mixture components",
                data.len(),
                self.num_components()
            )));
        }
        for y in data {
            check_dim("mixture observation", self.dim(), y.len())?;
        }
        let h = self.to_harmonium();
        let next = h.em_iteration(data, categorical::forward, |means| {
            Ok(Self::backward(&self.means_from_harmonium(means), jitter)?.to_harmonium())
        })?;
        Self::from_harmonium(&next)
    }

    /// Ancestral samples `(y, z)`.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<(DVector<f64>, usize)>> {
        let std = self.to_standard()?;
        let roots = std
            .covs
            .iter()
            .map(|c| Ok(c.factor()?.sqrt()))
            .collect::<Result<Vec<_>>>()?;
        let m = self.dim();
        Ok((0..count)
            .map(|_| {
                let z = categorical::sample_index(&std.weights, rng);
                let e = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)));
                (&std.means[z - 1] + &roots[z - 1] * e, z)
            })
            .collect())
    }
}

pub(crate) fn forward_components(comps: &Components, cat: &DVector<f64>) -> MixtureMeans {
    let (weights, _) = comps.weights(cat);
    let per = comps.means();
    let mut lat = per[0].scale(weights[0]);
    let mut interaction = Vec::with_capacity(per.len() - 1);
    for (i, m) in per.iter().enumerate().skip(1) {
        let scaled = m.scale(weights[i]);
        lat = lat.add(&scaled);
        interaction.push(scaled);
    }
    MixtureMeans {
        lat,
        cat: weights.rows(1, weights.len() - 1).into_owned(),
        interaction,
    }
}

/// Sum of responsibilities per component, used by tests and initialization.
pub fn responsibilities(model: &MixtureModel, data: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let rows = chunked_reduce(
        data.len(),
        |range| data[range].iter().map(|y| model.posterior(y)).collect::<Result<Vec<_>>>(),
        |mut a, b| {
            a.extend(b);
            a
        },
    )?;
    Ok(rows.unwrap_or_default())
}
