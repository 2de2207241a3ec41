//! Multinomial log-likelihood of a set of games, its analytic gradient, and
//! the log-posterior used by the Bayesian fitter.
//!
//! Games are always stored with player `i` = white, so the order covariate
//! is `+1` for every game.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, InverseGamma, Normal};

use crate::error::{Error, Result};
use crate::model::{GameOutcome, GlobalParams, LogWeights, ModelVariant, OutcomeDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Game {
    pub white: usize,
    pub black: usize,
    pub outcome: GameOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    games: Vec<Game>,
    n_players: usize,
}

/// Win/draw/loss tallies for one player, from that player's side.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlayerRecord {
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
}

impl PlayerRecord {
    pub fn games(&self) -> usize {
        self.wins + self.draws + self.losses
    }

    /// All wins or all losses; the strength MLE is then infinite.
    pub fn is_perfect(&self) -> bool {
        self.games() > 0 && (self.wins == self.games() || self.losses == self.games())
    }
}

impl Dataset {
    pub fn new(n_players: usize, games: Vec<Game>) -> Result<Self> {
        if games.is_empty() {
            return Err(Error::invalid("dataset must contain at least one game"));
        }
        for (k, g) in games.iter().enumerate() {
            if g.white >= n_players || g.black >= n_players {
                return Err(Error::invalid(format!(
                    "game {k} references player index out of range (n_players = {n_players})"
                )));
            }
            if g.white == g.black {
                return Err(Error::invalid(format!("game {k} pairs player {} with itself", g.white)));
            }
        }
        Ok(Self { games, n_players })
    }

    pub fn games(&self) -> &[Game] {
        &self.games
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn len(&self) -> usize {
        self.games.len()
    }

    pub fn is_empty(&self) -> bool {
        self.games.is_empty()
    }

    /// Indices of the games each player took part in.
    pub fn games_by_player(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_players];
        for (k, g) in self.games.iter().enumerate() {
            out[g.white].push(k);
            out[g.black].push(k);
        }
        out
    }

    pub fn records(&self) -> Vec<PlayerRecord> {
        let mut out = vec![PlayerRecord::default(); self.n_players];
        for g in &self.games {
            match g.outcome {
                GameOutcome::Win => {
                    out[g.white].wins += 1;
                    out[g.black].losses += 1;
                }
                GameOutcome::Draw => {
                    out[g.white].draws += 1;
                    out[g.black].draws += 1;
                }
                GameOutcome::Loss => {
                    out[g.white].losses += 1;
                    out[g.black].wins += 1;
                }
            }
        }
        out
    }

    pub fn draw_rate(&self) -> f64 {
        let draws = self.games.iter().filter(|g| g.outcome == GameOutcome::Draw).count();
        draws as f64 / self.games.len() as f64
    }
}

/// Strengths plus global and hyper-parameters. `sigma`, `mu_miss` and
/// `sigma_miss` only enter the prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub theta: Vec<f64>,
    pub gamma: GlobalParams,
    pub sigma: f64,
    pub mu_miss: f64,
    pub sigma_miss: f64,
}

impl ParamSet {
    pub fn zeros(n_players: usize) -> Self {
        Self::new(vec![0.0; n_players], GlobalParams::default())
    }

    pub fn new(theta: Vec<f64>, gamma: GlobalParams) -> Self {
        Self {
            theta,
            gamma,
            sigma: 1.0,
            mu_miss: 0.0,
            sigma_miss: 1.0,
        }
    }

    fn check_against(&self, data: &Dataset) -> Result<()> {
        if self.theta.len() != data.n_players() {
            return Err(Error::invalid(format!(
                "parameter set has {} strengths but dataset has {} players",
                self.theta.len(),
                data.n_players()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// Rated players centred on their rating, unrated players on a shared
    /// `N(μ_miss, σ_miss²)`.
    Informative,
    /// Every strength `N(0, σ²)`.
    Exchangeable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mode: PriorMode,
    /// Prior mean on the strength scale, `None` for unrated players.
    pub player_mean: Vec<Option<f64>>,
    pub gamma_prior_sd: f64,
    pub hyperprior_shape: f64,
    pub hyperprior_scale: f64,
}

impl PriorSpec {
    pub const DEFAULT_GAMMA_SD: f64 = 10.0;
    pub const DEFAULT_SHAPE: f64 = 0.01;
    pub const DEFAULT_SCALE: f64 = 0.1;

    pub fn informative(player_mean: Vec<Option<f64>>) -> Self {
        Self {
            mode: PriorMode::Informative,
            player_mean,
            gamma_prior_sd: Self::DEFAULT_GAMMA_SD,
            hyperprior_shape: Self::DEFAULT_SHAPE,
            hyperprior_scale: Self::DEFAULT_SCALE,
        }
    }

    pub fn exchangeable(n_players: usize) -> Self {
        Self {
            mode: PriorMode::Exchangeable,
            player_mean: vec![None; n_players],
            ..Self::informative(Vec::new())
        }
    }

    /// Same per-player information, different mode.
    pub fn with_mode(&self, mode: PriorMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn n_unrated(&self) -> usize {
        self.player_mean.iter().filter(|m| m.is_none()).count()
    }

    pub(crate) fn validate(&self, n_players: usize) -> Result<()> {
        if self.player_mean.len() != n_players {
            return Err(Error::invalid(format!(
                "prior has {} player entries but dataset has {n_players} players",
                self.player_mean.len()
            )));
        }
        for (name, v) in [
            ("gamma_prior_sd", self.gamma_prior_sd),
            ("hyperprior_shape", self.hyperprior_shape),
            ("hyperprior_scale", self.hyperprior_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.player_mean.iter().flatten().any(|m| !m.is_finite()) {
            return Err(Error::invalid("prior means must be finite"));
        }
        Ok(())
    }

    /// Prior mean and standard deviation of strength `k` under `params`.
    pub fn theta_prior(&self, k: usize, params: &ParamSet) -> (f64, f64) {
        match self.mode {
            PriorMode::Exchangeable => (0.0, params.sigma),
            PriorMode::Informative => match self.player_mean[k] {
                Some(mean) => (mean, params.sigma),
                None => (params.mu_miss, params.sigma_miss),
            },
        }
    }
}

/// Jacobian of the three log weights `(win, loss, draw)` with respect to
/// `(θ_white, θ_black, α₀, α₁, β₀, β₁)` at one game, plus the outcome
/// probabilities.
#[derive(Clone, Copy, Debug)]
pub(crate) struct GameDerivatives {
    pub probs: OutcomeDistribution,
    pub jac: [[f64; 6]; 3],
}

impl GameDerivatives {
    /// `gamma` must already have the variant applied.
    #[inline]
    pub fn new(theta_w: f64, theta_b: f64, gamma: &GlobalParams) -> Self {
        let probs = LogWeights::new(theta_w, theta_b, 1.0, gamma).probabilities();
        let mean = 0.5 * (theta_w + theta_b);
        let a1 = gamma.alpha1 / 8.0;
        let b = 0.5 * (1.0 + gamma.beta1);
        let jac = [
            [1.0 + a1, a1, 0.25, 0.25 * mean, 0.0, 0.0],
            [-a1, 1.0 - a1, -0.25, -0.25 * mean, 0.0, 0.0],
            [b, b, 0.0, 0.0, 1.0, mean],
        ];
        Self { probs, jac }
    }

    #[inline]
    fn row(outcome: GameOutcome) -> usize {
        match outcome {
            GameOutcome::Win => 0,
            GameOutcome::Loss => 1,
            GameOutcome::Draw => 2,
        }
    }

    #[inline]
    pub fn p(&self) -> [f64; 3] {
        [self.probs.p_win, self.probs.p_loss, self.probs.p_draw]
    }

    /// Expected Jacobian row `Σ_k p_k J_k`.
    #[inline]
    pub fn mean_row(&self) -> [f64; 6] {
        let p = self.p();
        let mut out = [0.0; 6];
        for (k, row) in self.jac.iter().enumerate() {
            for c in 0..6 {
                out[c] += p[k] * row[c];
            }
        }
        out
    }

    /// Gradient of the log-probability of `outcome`.
    #[inline]
    pub fn score(&self, outcome: GameOutcome) -> [f64; 6] {
        let mean = self.mean_row();
        let row = &self.jac[Self::row(outcome)];
        let mut out = [0.0; 6];
        for c in 0..6 {
            out[c] = row[c] - mean[c];
        }
        out
    }

    /// Covariance of the Jacobian rows under the outcome distribution,
    /// entries `(a, b)` for `a, b` in `0..6`. Its negative is the Hessian of
    /// the log-probability within any block where the weights are linear.
    #[inline]
    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        let p = self.p();
        let mean = self.mean_row();
        let mut s = 0.0;
        for (k, row) in self.jac.iter().enumerate() {
            s += p[k] * row[a] * row[b];
        }
        s - mean[a] * mean[b]
    }
}

/// Log-probability of one game with `white` as the focal player.
#[inline]
pub(crate) fn game_log_probability(theta_w: f64, theta_b: f64, gamma: &GlobalParams, outcome: GameOutcome) -> f64 {
    LogWeights::new(theta_w, theta_b, 1.0, gamma).log_probability(outcome)
}

pub(crate) fn log_likelihood_unchecked(data: &Dataset, theta: &[f64], gamma: &GlobalParams) -> f64 {
    data.games
        .iter()
        .map(|g| game_log_probability(theta[g.white], theta[g.black], gamma, g.outcome))
        .sum()
}

pub fn log_likelihood(data: &Dataset, params: &ParamSet, variant: ModelVariant) -> Result<f64> {
    params.check_against(data)?;
    let gamma = variant.apply(&params.gamma);
    Ok(log_likelihood_unchecked(data, &params.theta, &gamma))
}

/// Gradient with respect to `(θ_1..θ_n, α₀, α₁, β₀, β₁)`; pinned global
/// components are exactly zero.
pub fn grad_log_likelihood(data: &Dataset, params: &ParamSet, variant: ModelVariant) -> Result<Vec<f64>> {
    params.check_against(data)?;
    let n = data.n_players();
    let gamma = variant.apply(&params.gamma);
    let mut grad = vec![0.0; n + 4];
    for g in &data.games {
        let d = GameDerivatives::new(params.theta[g.white], params.theta[g.black], &gamma);
        let s = d.score(g.outcome);
        grad[g.white] += s[0];
        grad[g.black] += s[1];
        for c in 0..4 {
            grad[n + c] += s[2 + c];
        }
    }
    for (c, free) in variant.free_mask().into_iter().enumerate() {
        if !free {
            grad[n + c] = 0.0;
        }
    }
    Ok(grad)
}

fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> Result<f64> {
    let dist = Normal::new(mean, sd).map_err(|e| Error::invalid(format!("normal prior: {e}")))?;
    Ok(dist.ln_pdf(x))
}

fn inverse_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> Result<f64> {
    let dist = InverseGamma::new(shape, scale).map_err(|e| Error::invalid(format!("inverse-gamma prior: {e}")))?;
    Ok(dist.ln_pdf(x))
}

/// Log prior density of `params` (up to nothing: all densities normalised).
pub fn log_prior(params: &ParamSet, variant: ModelVariant, prior: &PriorSpec) -> Result<f64> {
    prior.validate(params.theta.len())?;
    if !(params.sigma > 0.0) || !(params.sigma_miss > 0.0) {
        return Err(Error::invalid("sigma and sigma_miss must be positive"));
    }
    let mut total = 0.0;
    for (k, &t) in params.theta.iter().enumerate() {
        let (mean, sd) = prior.theta_prior(k, params);
        total += normal_ln_pdf(t, mean, sd)?;
    }
    let gamma = params.gamma.to_array();
    for k in variant.free_indices() {
        total += normal_ln_pdf(gamma[k], 0.0, prior.gamma_prior_sd)?;
    }
    let (a, b) = (prior.hyperprior_shape, prior.hyperprior_scale);
    total += inverse_gamma_ln_pdf(params.sigma * params.sigma, a, b)?;
    if prior.mode == PriorMode::Informative {
        total += inverse_gamma_ln_pdf(params.sigma_miss * params.sigma_miss, a, b)?;
        total += normal_ln_pdf(params.mu_miss, 0.0, prior.gamma_prior_sd)?;
    }
    Ok(total)
}

/// Log-likelihood plus log prior. Variance hyperparameters carry their
/// inverse-gamma density on the variance scale.
pub fn log_posterior(data: &Dataset, params: &ParamSet, variant: ModelVariant, prior: &PriorSpec) -> Result<f64> {
    Ok(log_likelihood(data, params, variant)? + log_prior(params, variant, prior)?)
}
