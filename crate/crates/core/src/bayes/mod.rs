//! Posterior simulation by adaptive Metropolis-within-Gibbs.
//!
//! One iteration updates each strength by a univariate Gaussian random-walk
//! step, then shifts all strengths by a common amount together with the
//! matching change of the global parameters (a move that leaves the
//! likelihood unchanged), then the free global parameters jointly by a
//! random-walk step with an adapted covariance, then the variance
//! hyperparameters (and `μ_miss`) by exact conjugate draws. Proposal scales
//! adapt only during burn-in.

mod diagnostics;
mod export;
mod sampler;
mod summary;

pub use diagnostics::{compute_rhat, effective_sample_size, split_rhat, ChainDiagnostics};
pub use export::{write_draws_csv, DRAWS_CSV_HEADER};
pub use sampler::{draw_inverse_gamma, run_mcmc, run_mcmc_with_progress, sample_variance_conditional, Progress};
pub use summary::{compute_dic, percentile, summarize_posterior, DicReport, ParameterSummary, PosteriorSummary};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::PriorMode;
use crate::model::{GlobalParams, ModelVariant};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub adapt_window: usize,
    pub target_acceptance: f64,
    /// With `false` the sampler targets the prior alone.
    pub use_likelihood: bool,
    /// Hold `σ`, `μ_miss`, `σ_miss` at these values instead of sampling them.
    pub fixed_hyperparameters: Option<FixedHyperparameters>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedHyperparameters {
    pub sigma: f64,
    pub mu_miss: f64,
    pub sigma_miss: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 3,
            iterations: 20_000,
            burn_in: 10_000,
            thin: 5,
            seed: 0,
            adapt_window: 50,
            target_acceptance: 0.35,
            use_likelihood: true,
            fixed_hyperparameters: None,
        }
    }
}

impl McmcConfig {
    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::invalid("at least one chain is required"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::invalid(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return Err(Error::invalid("thin and adapt_window must be positive"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::invalid("target_acceptance must lie in (0, 1)"));
        }
        if let Some(f) = self.fixed_hyperparameters {
            if !(f.sigma > 0.0 && f.sigma_miss > 0.0 && f.mu_miss.is_finite()) {
                return Err(Error::invalid("fixed hyperparameters must be positive scales and a finite mean"));
            }
        }
        Ok(())
    }
}

/// Proposal scales of one chain: per-strength random-walk sd and the
/// Cholesky factor (row-major, free coordinates only) for the global block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalScales {
    pub theta: Vec<f64>,
    pub gamma_cholesky: Vec<f64>,
    /// Random-walk sd of the joint location shift.
    pub shift: f64,
    /// Log-scale random-walk sd of the joint rescaling of rated strengths
    /// about their prior means together with σ.
    pub spread: f64,
    /// The same for unrated strengths about μ_miss together with σ_miss.
    pub spread_missing: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    /// Mean over strengths, post burn-in.
    pub theta: f64,
    pub gamma: f64,
    /// Joint location-shift move.
    pub shift: f64,
    /// Joint rescaling moves; zero when the variance is not sampled.
    pub spread: f64,
    pub spread_missing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    /// Iteration index (0-based, counted from the first iteration) of each retained draw.
    pub iteration: Vec<usize>,
    /// `theta[d][k]`: strength of player `k` in retained draw `d`.
    pub theta: Vec<Vec<f64>>,
    pub gamma: Vec<GlobalParams>,
    pub sigma: Vec<f64>,
    pub mu_miss: Vec<f64>,
    pub sigma_miss: Vec<f64>,
    /// `−2·log-likelihood` at each retained draw.
    pub deviance: Vec<f64>,
    pub acceptance: AcceptanceRates,
    pub scales_after_burn_in: ProposalScales,
    pub scales_final: ProposalScales,
}

impl ChainDraws {
    pub fn len(&self) -> usize {
        self.iteration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iteration.is_empty()
    }
}

/// Which hyperparameters were actually simulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledHyperparameters {
    pub sigma: bool,
    pub missing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParameterKind {
    Global,
    Hyper,
    Strength,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub variant: ModelVariant,
    pub prior_mode: PriorMode,
    pub n_players: usize,
    pub sampled: SampledHyperparameters,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(ChainDraws::len).sum()
    }

    /// Every simulated scalar, as per-chain series: free global parameters,
    /// sampled hyperparameters, then strengths named `theta[k]`.
    pub fn scalar_series(&self) -> Vec<(String, ParameterKind, Vec<Vec<f64>>)> {
        let mut out = Vec::new();
        for c in self.variant.free_indices() {
            let series = self
                .chains
                .iter()
                .map(|ch| ch.gamma.iter().map(|g| g.to_array()[c]).collect())
                .collect();
            out.push((GlobalParams::NAMES[c].to_owned(), ParameterKind::Global, series));
        }
        let hyper: [(&str, bool, fn(&ChainDraws) -> &Vec<f64>); 3] = [
            ("sigma", self.sampled.sigma, |c| &c.sigma),
            ("mu_miss", self.sampled.missing, |c| &c.mu_miss),
            ("sigma_miss", self.sampled.missing, |c| &c.sigma_miss),
        ];
        for (name, on, get) in hyper {
            if on {
                let series = self.chains.iter().map(|ch| get(ch).clone()).collect();
                out.push((name.to_owned(), ParameterKind::Hyper, series));
            }
        }
        for k in 0..self.n_players {
            let series = self
                .chains
                .iter()
                .map(|ch| ch.theta.iter().map(|t| t[k]).collect())
                .collect();
            out.push((format!("theta[{k}]"), ParameterKind::Strength, series));
        }
        out
    }

    /// Posterior mean of `(θ, γ)` pooled over chains.
    pub fn posterior_mean(&self) -> (Vec<f64>, GlobalParams) {
        let total = self.total_draws() as f64;
        let mut theta = vec![0.0; self.n_players];
        let mut gamma = [0.0; 4];
        for ch in &self.chains {
            for (t, g) in ch.theta.iter().zip(&ch.gamma) {
                for (acc, v) in theta.iter_mut().zip(t) {
                    *acc += v;
                }
                for (acc, v) in gamma.iter_mut().zip(g.to_array()) {
                    *acc += v;
                }
            }
        }
        theta.iter_mut().for_each(|v| *v /= total);
        gamma.iter_mut().for_each(|v| *v /= total);
        (theta, GlobalParams::from_array(gamma))
    }
}

/// Draws together with the summaries computed from them.
#[derive(Clone, Debug)]
pub struct BayesFit {
    pub config: McmcConfig,
    pub draws: PosteriorDraws,
    pub summary: PosteriorSummary,
    pub dic: DicReport,
    pub diagnostics: ChainDiagnostics,
}

/// `run_mcmc` followed by summaries, DIC and R̂.
pub fn fit_bayes(
    data: &crate::likelihood::Dataset,
    variant: ModelVariant,
    prior: &crate::likelihood::PriorSpec,
    config: &McmcConfig,
    progress: &(dyn Fn(Progress) + Sync),
) -> Result<BayesFit> {
    let draws = run_mcmc_with_progress(data, variant, prior, config, progress)?;
    let summary = summarize_posterior(&draws)?;
    let dic = compute_dic(&draws, data, variant)?;
    let diagnostics = compute_rhat(&draws);
    Ok(BayesFit {
        config: config.clone(),
        draws,
        summary,
        dic,
        diagnostics,
    })
}
