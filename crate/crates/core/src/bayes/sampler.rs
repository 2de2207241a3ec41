use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use super::{
    AcceptanceRates, ChainDraws, McmcConfig, PosteriorDraws, ProposalScales, SampledHyperparameters,
};
use crate::error::{Error, Result};
use crate::likelihood::{game_log_probability, log_likelihood_unchecked, Dataset, Game, PriorMode, PriorSpec};
use crate::model::{GlobalParams, ModelVariant};

/// Reported periodically from each chain.
#[derive(Clone, Copy, Debug)]
pub struct Progress {
    pub chain: usize,
    pub iteration: usize,
    pub iterations: usize,
}

const PROGRESS_EVERY: usize = 1000;
const START_SPREAD: f64 = 0.5;

/// Draws from an inverse-gamma with density `∝ x^{−shape−1} e^{−scale/x}`.
pub fn draw_inverse_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    let gamma = Gamma::new(shape, 1.0 / scale).expect("positive inverse-gamma parameters");
    1.0 / gamma.sample(rng)
}

/// Conjugate draw of a strength variance given the residuals `θ_k − mean_k`
/// of the players it governs. With no residuals this is a draw from the
/// inverse-gamma hyperprior.
pub fn sample_variance_conditional<R: Rng + ?Sized>(rng: &mut R, prior: &PriorSpec, residuals: &[f64]) -> f64 {
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    draw_inverse_gamma(
        rng,
        prior.hyperprior_shape + 0.5 * residuals.len() as f64,
        prior.hyperprior_scale + 0.5 * ss,
    )
}

pub fn run_mcmc(data: &Dataset, variant: ModelVariant, prior: &PriorSpec, config: &McmcConfig) -> Result<PosteriorDraws> {
    run_mcmc_with_progress(data, variant, prior, config, &|_| {})
}

/// Chains run in parallel; each has its own ChaCha stream derived from the
/// seed, so the result does not depend on the thread count.
pub fn run_mcmc_with_progress(
    data: &Dataset,
    variant: ModelVariant,
    prior: &PriorSpec,
    config: &McmcConfig,
    progress: &(dyn Fn(Progress) + Sync),
) -> Result<PosteriorDraws> {
    config.validate()?;
    prior.validate(data.n_players())?;
    if config.use_likelihood {
        let records = data.records();
        if let Some(k) = records.iter().position(|r| r.games() == 0) {
            return Err(Error::invalid(format!("player {k} has no games")));
        }
    }
    let model = Target::new(data, variant, prior, config);
    let chains: Vec<ChainDraws> = (0..config.chains)
        .into_par_iter()
        .map(|c| model.run_chain(c, progress))
        .collect();
    Ok(PosteriorDraws {
        variant,
        prior_mode: prior.mode,
        n_players: data.n_players(),
        sampled: model.sampled,
        chains,
    })
}

struct Target<'a> {
    data: &'a Dataset,
    prior: &'a PriorSpec,
    config: &'a McmcConfig,
    free: Vec<usize>,
    by_player: Vec<Vec<usize>>,
    rated: Vec<usize>,
    unrated: Vec<usize>,
    sampled: SampledHyperparameters,
}

#[derive(Clone, Copy)]
enum Group {
    Rated,
    Unrated,
}

struct State {
    theta: Vec<f64>,
    gamma: GlobalParams,
    sigma2: f64,
    mu_miss: f64,
    sigma_miss2: f64,
}

impl State {
    fn prior_of(&self, prior: &PriorSpec, k: usize) -> (f64, f64) {
        match prior.mode {
            PriorMode::Exchangeable => (0.0, self.sigma2),
            PriorMode::Informative => match prior.player_mean[k] {
                Some(m) => (m, self.sigma2),
                None => (self.mu_miss, self.sigma_miss2),
            },
        }
    }
}

/// Random-walk step size tuned on its acceptance rate during burn-in.
struct Adaptive {
    log_scale: f64,
    window: usize,
    total: usize,
}

impl Adaptive {
    fn new(scale: f64) -> Self {
        Self { log_scale: scale.ln(), window: 0, total: 0 }
    }

    fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    fn accepted(&mut self, burning: bool) {
        if burning {
            self.window += 1;
        } else {
            self.total += 1;
        }
    }

    fn adapt(&mut self, step: f64, window: f64, target: f64) {
        self.log_scale += step * (self.window as f64 / window - target) * 2.0;
        self.window = 0;
    }
}

/// Running mean/covariance of the free global parameters during burn-in.
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; d],
            m2: vec![0.0; d * d],
        }
    }

    fn push(&mut self, x: &[f64]) {
        let d = x.len();
        self.n += 1.0;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / self.n;
        }
        for i in 0..d {
            for j in 0..d {
                self.m2[i * d + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Lower Cholesky factor of the sample covariance, if well conditioned.
    fn cholesky(&self) -> Option<Vec<f64>> {
        let d = self.mean.len();
        if self.n < (2 * d + 20) as f64 {
            return None;
        }
        let mut cov = nalgebra::DMatrix::from_fn(d, d, |i, j| self.m2[i * d + j] / (self.n - 1.0));
        let ridge = (0..d).map(|i| cov[(i, i)]).fold(0.0f64, f64::max) * 1e-8 + 1e-12;
        for i in 0..d {
            cov[(i, i)] += ridge;
        }
        let l = cov.cholesky()?.l();
        Some(l.iter().copied().collect::<Vec<_>>()).map(|col_major| {
            let mut row_major = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    row_major[i * d + j] = col_major[j * d + i];
                }
            }
            row_major
        })
    }
}

impl<'a> Target<'a> {
    fn new(data: &'a Dataset, variant: ModelVariant, prior: &'a PriorSpec, config: &'a McmcConfig) -> Self {
        let (rated, unrated): (Vec<usize>, Vec<usize>) = match prior.mode {
            PriorMode::Exchangeable => ((0..data.n_players()).collect(), Vec::new()),
            PriorMode::Informative => (0..data.n_players()).partition(|&k| prior.player_mean[k].is_some()),
        };
        let fixed = config.fixed_hyperparameters.is_some();
        let sampled = SampledHyperparameters {
            sigma: !fixed && !rated.is_empty(),
            missing: !fixed && !unrated.is_empty(),
        };
        Self {
            data,
            prior,
            config,
            free: variant.free_indices(),
            by_player: data.games_by_player(),
            rated,
            unrated,
            sampled,
        }
    }

    fn games(&self) -> &[Game] {
        self.data.games()
    }

    fn local_ll(&self, k: usize, theta_k: f64, state: &State) -> f64 {
        if !self.config.use_likelihood {
            return 0.0;
        }
        let mut total = 0.0;
        for &gi in &self.by_player[k] {
            let g = &self.games()[gi];
            let (tw, tb) = if g.white == k {
                (theta_k, state.theta[g.black])
            } else {
                (state.theta[g.white], theta_k)
            };
            total += game_log_probability(tw, tb, &state.gamma, g.outcome);
        }
        total
    }

    fn full_ll(&self, theta: &[f64], gamma: &GlobalParams) -> f64 {
        if self.config.use_likelihood {
            log_likelihood_unchecked(self.data, theta, gamma)
        } else {
            0.0
        }
    }

    fn gamma_log_prior(&self, g: &[f64; 4]) -> f64 {
        let v = self.prior.gamma_prior_sd.powi(2);
        self.free.iter().map(|&c| -0.5 * g[c] * g[c] / v).sum()
    }

    fn theta_log_prior(&self, theta: &[f64], state: &State) -> f64 {
        theta
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let (m, v) = state.prior_of(self.prior, k);
                -0.5 * (t - m).powi(2) / v
            })
            .sum()
    }

    fn initial_state(&self, chain: usize) -> State {
        let n = self.data.n_players();
        let offset = chain as f64 * START_SPREAD;
        let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let (sigma2, mu_miss, sigma_miss2) = match self.config.fixed_hyperparameters {
            Some(f) => (f.sigma * f.sigma, f.mu_miss, f.sigma_miss * f.sigma_miss),
            None => (1.0, 0.0, 1.0),
        };
        let theta = (0..n)
            .map(|k| {
                let centre = match self.prior.mode {
                    PriorMode::Informative => self.prior.player_mean[k].unwrap_or(mu_miss),
                    PriorMode::Exchangeable => 0.0,
                };
                centre + offset * sign(k)
            })
            .collect();
        let mut g = [0.0; 4];
        for (j, &c) in self.free.iter().enumerate() {
            g[c] = offset * sign(j);
        }
        State {
            theta,
            gamma: GlobalParams::from_array(g),
            sigma2,
            mu_miss,
            sigma_miss2,
        }
    }

    fn update_hyper(&self, state: &mut State, rng: &mut ChaCha8Rng) {
        if self.sampled.sigma {
            let residuals: Vec<f64> = self
                .rated
                .iter()
                .map(|&k| match self.prior.mode {
                    PriorMode::Informative => state.theta[k] - self.prior.player_mean[k].expect("rated"),
                    PriorMode::Exchangeable => state.theta[k],
                })
                .collect();
            state.sigma2 = sample_variance_conditional(rng, self.prior, &residuals);
        }
        if self.sampled.missing {
            let n = self.unrated.len() as f64;
            let sum: f64 = self.unrated.iter().map(|&k| state.theta[k]).sum();
            let precision = n / state.sigma_miss2 + 1.0 / self.prior.gamma_prior_sd.powi(2);
            let mean = (sum / state.sigma_miss2) / precision;
            let z: f64 = rng.sample(StandardNormal);
            state.mu_miss = mean + z / precision.sqrt();
            let residuals: Vec<f64> = self.unrated.iter().map(|&k| state.theta[k] - state.mu_miss).collect();
            state.sigma_miss2 = sample_variance_conditional(rng, self.prior, &residuals);
        }
    }

    /// Multiplies one group's residuals and its prior sd by `e^s`. The
    /// conditional prior of the strengths is unchanged, so the ratio is the
    /// likelihood, the inverse-gamma prior on the variance and the Jacobian
    /// `e^{2s}` of the variance.
    fn spread_step(&self, state: &mut State, ll: &mut f64, group: Group, scale: f64, rng: &mut ChaCha8Rng) -> bool {
        let s = scale * rng.sample::<f64, _>(StandardNormal);
        let factor = s.exp();
        let (members, variance) = match group {
            Group::Rated => (&self.rated, state.sigma2),
            Group::Unrated => (&self.unrated, state.sigma_miss2),
        };
        let mut cand = state.theta.clone();
        for &k in members {
            let (m, _) = state.prior_of(self.prior, k);
            cand[k] = m + factor * (state.theta[k] - m);
        }
        let cand_variance = variance * factor * factor;
        let (a, b) = (self.prior.hyperprior_shape, self.prior.hyperprior_scale);
        let ig = |x: f64| -(a + 1.0) * x.ln() - b / x;
        let cand_ll = self.full_ll(&cand, &state.gamma);
        let log_ratio = cand_ll - *ll + ig(cand_variance) - ig(variance) + 2.0 * s;
        let u: f64 = rng.random();
        if u.ln() < log_ratio {
            state.theta = cand;
            match group {
                Group::Rated => state.sigma2 = cand_variance,
                Group::Unrated => state.sigma_miss2 = cand_variance,
            }
            *ll = cand_ll;
            true
        } else {
            false
        }
    }

    fn run_chain(&self, chain: usize, progress: &(dyn Fn(Progress) + Sync)) -> ChainDraws {
        let cfg = self.config;
        let n = self.data.n_players();
        let d = self.free.len();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(chain as u64);
        let mut state = self.initial_state(chain);

        let mut log_theta_scale = vec![(0.5f64).ln(); n];
        let mut theta_acc_window = vec![0usize; n];
        let mut theta_acc_total = 0usize;
        let mut gamma_log_scale = 0.0f64;
        let mut gamma_shape: Vec<f64> = (0..d * d).map(|i| if i % (d + 1) == 0 { 0.05 } else { 0.0 }).collect();
        let mut gamma_acc_window = 0usize;
        let mut gamma_acc_total = 0usize;
        let mut shift_log_scale = (0.1f64).ln();
        let mut shift_acc_window = 0usize;
        let mut shift_acc_total = 0usize;
        let mut spread = Adaptive::new(0.1);
        let mut spread_missing = Adaptive::new(0.1);
        let mut moments = Moments::new(d);
        let gamma_scale_of = |log_scale: f64, shape: &[f64]| -> Vec<f64> {
            let f = log_scale.exp() * 2.38 / (d.max(1) as f64).sqrt();
            shape.iter().map(|v| v * f).collect()
        };
        let mut batch = 0usize;
        let mut frozen: Option<ProposalScales> = (cfg.burn_in == 0).then(|| ProposalScales {
            theta: log_theta_scale.iter().map(|v| v.exp()).collect(),
            gamma_cholesky: gamma_scale_of(gamma_log_scale, &gamma_shape),
            shift: shift_log_scale.exp(),
            spread: spread.scale(),
            spread_missing: spread_missing.scale(),
        });

        let retained = cfg.retained_per_chain();
        let mut out = ChainDraws {
            iteration: Vec::with_capacity(retained),
            theta: Vec::with_capacity(retained),
            gamma: Vec::with_capacity(retained),
            sigma: Vec::with_capacity(retained),
            mu_miss: Vec::with_capacity(retained),
            sigma_miss: Vec::with_capacity(retained),
            deviance: Vec::with_capacity(retained),
            acceptance: AcceptanceRates::default(),
            scales_after_burn_in: ProposalScales { theta: vec![], gamma_cholesky: vec![], shift: 0.0, spread: 0.0, spread_missing: 0.0 },
            scales_final: ProposalScales { theta: vec![], gamma_cholesky: vec![], shift: 0.0, spread: 0.0, spread_missing: 0.0 },
        };

        for iter in 0..cfg.iterations {
            let burning = iter < cfg.burn_in;

            // Strengths, one at a time.
            for k in 0..n {
                let current = state.theta[k];
                let (m, v) = state.prior_of(self.prior, k);
                let z: f64 = rng.sample(StandardNormal);
                let proposal = current + log_theta_scale[k].exp() * z;
                let log_ratio = self.local_ll(k, proposal, &state) - self.local_ll(k, current, &state)
                    - 0.5 * ((proposal - m).powi(2) - (current - m).powi(2)) / v;
                let u: f64 = rng.random();
                if u.ln() < log_ratio {
                    state.theta[k] = proposal;
                    if burning {
                        theta_acc_window[k] += 1;
                    } else {
                        theta_acc_total += 1;
                    }
                }
            }

            // Location shift along the likelihood-invariant ridge.
            {
                let c = shift_log_scale.exp() * rng.sample::<f64, _>(StandardNormal);
                let cand_theta: Vec<f64> = state.theta.iter().map(|t| t + c).collect();
                let cand_gamma = state.gamma.shifted(-c);
                let log_ratio = self.theta_log_prior(&cand_theta, &state) - self.theta_log_prior(&state.theta, &state)
                    + self.gamma_log_prior(&cand_gamma.to_array())
                    - self.gamma_log_prior(&state.gamma.to_array());
                let u: f64 = rng.random();
                if u.ln() < log_ratio {
                    state.theta = cand_theta;
                    state.gamma = cand_gamma;
                    if burning {
                        shift_acc_window += 1;
                    } else {
                        shift_acc_total += 1;
                    }
                }
            }

            // Free global parameters, jointly.
            let mut ll = self.full_ll(&state.theta, &state.gamma);
            if d > 0 {
                let chol = gamma_scale_of(gamma_log_scale, &gamma_shape);
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let mut cand = state.gamma.to_array();
                for (i, &c) in self.free.iter().enumerate() {
                    let step: f64 = (0..=i).map(|j| chol[i * d + j] * z[j]).sum();
                    cand[c] += step;
                }
                let cand_gamma = GlobalParams::from_array(cand);
                let cand_ll = self.full_ll(&state.theta, &cand_gamma);
                let log_ratio = cand_ll - ll + self.gamma_log_prior(&cand) - self.gamma_log_prior(&state.gamma.to_array());
                let u: f64 = rng.random();
                if u.ln() < log_ratio {
                    state.gamma = cand_gamma;
                    ll = cand_ll;
                    if burning {
                        gamma_acc_window += 1;
                    } else {
                        gamma_acc_total += 1;
                    }
                }
                if burning && iter >= cfg.burn_in / 4 {
                    let x: Vec<f64> = self.free.iter().map(|&c| state.gamma.to_array()[c]).collect();
                    moments.push(&x);
                }
            }

            self.update_hyper(&mut state, &mut rng);

            // Rescale each group's residuals together with its prior sd.
            if self.sampled.sigma && self.spread_step(&mut state, &mut ll, Group::Rated, spread.scale(), &mut rng) {
                spread.accepted(burning);
            }
            if self.sampled.missing
                && self.spread_step(&mut state, &mut ll, Group::Unrated, spread_missing.scale(), &mut rng)
            {
                spread_missing.accepted(burning);
            }

            // Robbins–Monro adaptation at the end of each window, burn-in only.
            if burning && (iter + 1) % cfg.adapt_window == 0 {
                batch += 1;
                let step = 1.0 / (batch as f64).sqrt();
                let w = cfg.adapt_window as f64;
                for k in 0..n {
                    let rate = theta_acc_window[k] as f64 / w;
                    log_theta_scale[k] += step * (rate - cfg.target_acceptance) * 2.0;
                    theta_acc_window[k] = 0;
                }
                shift_log_scale += step * (shift_acc_window as f64 / w - cfg.target_acceptance) * 2.0;
                shift_acc_window = 0;
                spread.adapt(step, w, cfg.target_acceptance);
                spread_missing.adapt(step, w, cfg.target_acceptance);
                if d > 0 {
                    let rate = gamma_acc_window as f64 / w;
                    gamma_log_scale += step * (rate - cfg.target_acceptance) * 2.0;
                    gamma_acc_window = 0;
                    if let Some(l) = moments.cholesky() {
                        gamma_shape = l;
                    }
                }
            }
            if iter + 1 == cfg.burn_in {
                frozen = Some(ProposalScales {
                    theta: log_theta_scale.iter().map(|v| v.exp()).collect(),
                    gamma_cholesky: gamma_scale_of(gamma_log_scale, &gamma_shape),
                    shift: shift_log_scale.exp(),
                    spread: spread.scale(),
                    spread_missing: spread_missing.scale(),
                });
            }

            if !burning && (iter - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
                out.iteration.push(iter);
                out.theta.push(state.theta.clone());
                out.gamma.push(state.gamma);
                out.sigma.push(state.sigma2.sqrt());
                out.mu_miss.push(state.mu_miss);
                out.sigma_miss.push(state.sigma_miss2.sqrt());
                out.deviance.push(-2.0 * ll);
            }
            if (iter + 1) % PROGRESS_EVERY == 0 {
                progress(Progress {
                    chain,
                    iteration: iter + 1,
                    iterations: cfg.iterations,
                });
            }
        }

        let post = (cfg.iterations - cfg.burn_in) as f64;
        out.acceptance = AcceptanceRates {
            theta: if n > 0 { theta_acc_total as f64 / (post * n as f64) } else { 0.0 },
            gamma: if d > 0 { gamma_acc_total as f64 / post } else { 0.0 },
            shift: shift_acc_total as f64 / post,
            spread: spread.total as f64 / post,
            spread_missing: spread_missing.total as f64 / post,
        };
        out.scales_after_burn_in = frozen.expect("burn-in snapshot taken");
        out.scales_final = ProposalScales {
            theta: log_theta_scale.iter().map(|v| v.exp()).collect(),
            gamma_cholesky: gamma_scale_of(gamma_log_scale, &gamma_shape),
            shift: shift_log_scale.exp(),
            spread: spread.scale(),
            spread_missing: spread_missing.scale(),
        };
        out
    }
}
