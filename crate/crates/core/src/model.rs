//! Outcome probabilities for the strength-dependent tie/order-effect model and
//! the classical paired-comparison models it nests.
//!
//! For a game between `i` and `j`, with `m = (θ_i + θ_j) / 2` and `x = ±1`
//! the colour of `i`, the three outcomes carry the unnormalised log weights
//!
//! ```text
//! win   θ_i + x·(α₀ + α₁·m)/4
//! loss  θ_j − x·(α₀ + α₁·m)/4
//! draw  β₀ + (1 + β₁)·m
//! ```
//!
//! With `α₁ = β₁ = 0` this is David's model, and with additionally `α₀ = 0`
//! Davidson's model with `ν = e^{β₀}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Result of a game from the point of view of the white player.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameOutcome {
    Loss,
    Draw,
    Win,
}

impl GameOutcome {
    pub fn score(self) -> f64 {
        match self {
            GameOutcome::Loss => 0.0,
            GameOutcome::Draw => 0.5,
            GameOutcome::Win => 1.0,
        }
    }

    /// Only the exact scores 0, 1/2 and 1 are accepted.
    pub fn from_score(score: f64) -> Option<Self> {
        if score == 1.0 {
            Some(GameOutcome::Win)
        } else if score == 0.5 {
            Some(GameOutcome::Draw)
        } else if score == 0.0 {
            Some(GameOutcome::Loss)
        } else {
            None
        }
    }

    /// The same game seen from the other player's side.
    pub fn reversed(self) -> Self {
        match self {
            GameOutcome::Loss => GameOutcome::Win,
            GameOutcome::Draw => GameOutcome::Draw,
            GameOutcome::Win => GameOutcome::Loss,
        }
    }
}

/// Colour played by the focal player `i`; this is the order covariate `x_ij`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub fn sign(self) -> f64 {
        match self {
            Color::White => 1.0,
            Color::Black => -1.0,
        }
    }

    pub fn from_sign(x: i64) -> Result<Self> {
        match x {
            1 => Ok(Color::White),
            -1 => Ok(Color::Black),
            other => Err(Error::invalid(format!(
                "order covariate must be +1 or -1, got {other}"
            ))),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }
}

/// Parameters shared by every pairing: order effect `α₀ + α₁·m` and draw
/// propensity `β₀ + β₁·m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl GlobalParams {
    pub const NAMES: [&'static str; 4] = ["alpha0", "alpha1", "beta0", "beta1"];

    pub fn new(alpha0: f64, alpha1: f64, beta0: f64, beta1: f64) -> Self {
        Self {
            alpha0,
            alpha1,
            beta0,
            beta1,
        }
    }

    /// Typical Model 1 values for a large open tournament; the simulation defaults.
    pub fn reference_estimates() -> Self {
        Self::new(0.363, 0.037, -0.471, 0.120)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.alpha0, self.alpha1, self.beta0, self.beta1]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Parameters giving the same likelihood after every strength is shifted
    /// by `-shift`: `ℓ(θ + c, γ) = ℓ(θ, γ.shifted(c))`.
    pub fn shifted(self, shift: f64) -> Self {
        Self {
            alpha0: self.alpha0 + self.alpha1 * shift,
            beta0: self.beta0 + self.beta1 * shift,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in Self::NAMES.iter().zip(self.to_array()) {
            ensure_finite(name, v)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderEffect {
    None,
    Constant,
    StrengthVarying,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieSlope {
    Fixed,
    StrengthVarying,
}

/// Which global parameters are free. The six combinations are Models 1–6:
///
/// | model | order effect     | tie slope        | pinned            |
/// |-------|------------------|------------------|-------------------|
/// | 1     | strength-varying | strength-varying | –                 |
/// | 2     | none             | strength-varying | α₀, α₁            |
/// | 3     | constant         | strength-varying | α₁                |
/// | 4     | strength-varying | fixed            | β₁                |
/// | 5     | none             | fixed            | α₀, α₁, β₁        |
/// | 6     | constant         | fixed            | α₁, β₁ (David)    |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelVariant {
    pub order_effect: OrderEffect,
    pub tie_slope: TieSlope,
}

impl ModelVariant {
    pub const FULL: ModelVariant = ModelVariant::new(OrderEffect::StrengthVarying, TieSlope::StrengthVarying);
    pub const DAVID: ModelVariant = ModelVariant::new(OrderEffect::Constant, TieSlope::Fixed);

    pub const fn new(order_effect: OrderEffect, tie_slope: TieSlope) -> Self {
        Self {
            order_effect,
            tie_slope,
        }
    }

    pub fn all() -> [ModelVariant; 6] {
        [1, 2, 3, 4, 5, 6].map(|n| ModelVariant::from_number(n).expect("valid model number"))
    }

    pub fn from_number(model: u8) -> Result<Self> {
        use OrderEffect as O;
        use TieSlope as T;
        let (o, t) = match model {
            1 => (O::StrengthVarying, T::StrengthVarying),
            2 => (O::None, T::StrengthVarying),
            3 => (O::Constant, T::StrengthVarying),
            4 => (O::StrengthVarying, T::Fixed),
            5 => (O::None, T::Fixed),
            6 => (O::Constant, T::Fixed),
            other => return Err(Error::invalid(format!("model number must be 1..=6, got {other}"))),
        };
        Ok(Self::new(o, t))
    }

    pub fn number(self) -> u8 {
        use OrderEffect as O;
        use TieSlope as T;
        match (self.order_effect, self.tie_slope) {
            (O::StrengthVarying, T::StrengthVarying) => 1,
            (O::None, T::StrengthVarying) => 2,
            (O::Constant, T::StrengthVarying) => 3,
            (O::StrengthVarying, T::Fixed) => 4,
            (O::None, T::Fixed) => 5,
            (O::Constant, T::Fixed) => 6,
        }
    }

    /// Free flags in `GlobalParams::to_array` order. `β₀` is always free.
    pub fn free_mask(self) -> [bool; 4] {
        let alpha0 = self.order_effect != OrderEffect::None;
        let alpha1 = self.order_effect == OrderEffect::StrengthVarying;
        let beta1 = self.tie_slope == TieSlope::StrengthVarying;
        [alpha0, alpha1, true, beta1]
    }

    pub fn free_indices(self) -> Vec<usize> {
        self.free_mask()
            .iter()
            .enumerate()
            .filter_map(|(k, &free)| free.then_some(k))
            .collect()
    }

    /// `gamma` with the pinned components set to zero.
    pub fn apply(self, gamma: &GlobalParams) -> GlobalParams {
        let mask = self.free_mask();
        let mut a = gamma.to_array();
        for (v, free) in a.iter_mut().zip(mask) {
            if !free {
                *v = 0.0;
            }
        }
        GlobalParams::from_array(a)
    }

    /// Whether this variant is obtained from `other` by pinning more parameters.
    pub fn is_nested_in(self, other: ModelVariant) -> bool {
        self.free_mask()
            .iter()
            .zip(other.free_mask())
            .all(|(&mine, theirs)| !mine || theirs)
    }
}

impl Default for ModelVariant {
    fn default() -> Self {
        Self::FULL
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Model {}", self.number())
    }
}

pub fn apply_variant(gamma: &GlobalParams, variant: ModelVariant) -> GlobalParams {
    variant.apply(gamma)
}

/// Win/draw/loss probabilities for the focal player `i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p_win: f64,
    pub p_draw: f64,
    pub p_loss: f64,
}

impl OutcomeDistribution {
    pub fn probability(&self, outcome: GameOutcome) -> f64 {
        match outcome {
            GameOutcome::Win => self.p_win,
            GameOutcome::Draw => self.p_draw,
            GameOutcome::Loss => self.p_loss,
        }
    }

    /// Probability that `i` wins given the game is decisive.
    pub fn decisive_win(&self) -> f64 {
        self.p_win / (self.p_win + self.p_loss)
    }

    pub fn expected_score(&self) -> f64 {
        self.p_win + 0.5 * self.p_draw
    }

    pub fn reversed(&self) -> Self {
        Self {
            p_win: self.p_loss,
            p_draw: self.p_draw,
            p_loss: self.p_win,
        }
    }
}

/// Unnormalised log weights of (win, loss, draw) for player `i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct LogWeights {
    pub win: f64,
    pub loss: f64,
    pub draw: f64,
}

impl LogWeights {
    /// `gamma` is expected to already have the variant applied.
    #[inline]
    pub fn new(theta_i: f64, theta_j: f64, x: f64, gamma: &GlobalParams) -> Self {
        let mean = 0.5 * (theta_i + theta_j);
        let order = x * (gamma.alpha0 + gamma.alpha1 * mean) / 4.0;
        Self {
            win: theta_i + order,
            loss: theta_j - order,
            draw: gamma.beta0 + (1.0 + gamma.beta1) * mean,
        }
    }

    /// Log-sum-exp of the three weights, evaluated after subtracting the max.
    #[inline]
    pub fn log_normalizer(&self) -> f64 {
        let m = self.win.max(self.loss).max(self.draw);
        m + ((self.win - m).exp() + (self.loss - m).exp() + (self.draw - m).exp()).ln()
    }

    #[inline]
    pub fn probabilities(&self) -> OutcomeDistribution {
        let m = self.win.max(self.loss).max(self.draw);
        let w = (self.win - m).exp();
        let l = (self.loss - m).exp();
        let d = (self.draw - m).exp();
        let total = w + l + d;
        OutcomeDistribution {
            p_win: w / total,
            p_draw: d / total,
            p_loss: l / total,
        }
    }

    #[inline]
    pub fn log_probability(&self, outcome: GameOutcome) -> f64 {
        let numerator = match outcome {
            GameOutcome::Win => self.win,
            GameOutcome::Draw => self.draw,
            GameOutcome::Loss => self.loss,
        };
        numerator - self.log_normalizer()
    }
}

fn check_strengths(theta_i: f64, theta_j: f64) -> Result<()> {
    ensure_finite("theta_i", theta_i)?;
    ensure_finite("theta_j", theta_j)
}

/// Outcome distribution of `i` against `j` when `i` plays `color`, under
/// `variant` (pinned components of `gamma` are ignored).
pub fn outcome_probabilities(
    theta_i: f64,
    theta_j: f64,
    color: Color,
    gamma: &GlobalParams,
    variant: ModelVariant,
) -> Result<OutcomeDistribution> {
    check_strengths(theta_i, theta_j)?;
    gamma.validate()?;
    let gamma = variant.apply(gamma);
    Ok(LogWeights::new(theta_i, theta_j, color.sign(), &gamma).probabilities())
}

/// `log(p_win / p_loss)`; the draw parameters cancel.
pub fn log_odds_win_loss(
    theta_i: f64,
    theta_j: f64,
    color: Color,
    gamma: &GlobalParams,
    variant: ModelVariant,
) -> Result<f64> {
    check_strengths(theta_i, theta_j)?;
    gamma.validate()?;
    let gamma = variant.apply(gamma);
    let mean = 0.5 * (theta_i + theta_j);
    Ok(theta_i - theta_j + color.sign() * (gamma.alpha0 + gamma.alpha1 * mean) / 2.0)
}

/// Probability that `i` beats `j` in the two-outcome Bradley–Terry model.
pub fn bradley_terry_probability(theta_i: f64, theta_j: f64) -> Result<f64> {
    check_strengths(theta_i, theta_j)?;
    let d = theta_i - theta_j;
    Ok(if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    })
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("tie parameter nu must be positive and finite, got {nu}")))
    }
}

fn normalize3(win: f64, loss: f64, draw: f64) -> OutcomeDistribution {
    let m = win.max(loss).max(draw);
    let (w, l, d) = ((win - m).exp(), (loss - m).exp(), (draw - m).exp());
    let total = w + l + d;
    OutcomeDistribution {
        p_win: w / total,
        p_draw: d / total,
        p_loss: l / total,
    }
}

/// Davidson's tie model: weights `e^{θ_i}`, `e^{θ_j}`, `ν·e^{(θ_i+θ_j)/2}`.
pub fn davidson_probabilities(theta_i: f64, theta_j: f64, nu: f64) -> Result<OutcomeDistribution> {
    check_strengths(theta_i, theta_j)?;
    check_nu(nu)?;
    Ok(normalize3(theta_i, theta_j, nu.ln() + 0.5 * (theta_i + theta_j)))
}

/// David's model: Davidson's ties plus a constant order effect `α`, split as
/// `±α/4` between the win and loss weights.
pub fn david_probabilities(
    theta_i: f64,
    theta_j: f64,
    color: Color,
    alpha: f64,
    nu: f64,
) -> Result<OutcomeDistribution> {
    check_strengths(theta_i, theta_j)?;
    ensure_finite("alpha", alpha)?;
    check_nu(nu)?;
    let shift = alpha / 4.0 * color.sign();
    Ok(normalize3(
        theta_i + shift,
        theta_j - shift,
        nu.ln() + 0.5 * (theta_i + theta_j),
    ))
}
