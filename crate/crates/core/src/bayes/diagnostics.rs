use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ParameterKind, PosteriorDraws};

pub const RHAT_THRESHOLD: f64 = 1.01;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Split-R̂ of the global and hyper parameters.
    pub rhat: BTreeMap<String, f64>,
    pub effective_sample_size: BTreeMap<String, f64>,
    /// Largest split-R̂ among the strengths; informational only.
    pub max_strength_rhat: Option<f64>,
    /// All global/hyper R̂ below `RHAT_THRESHOLD`.
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl ChainDiagnostics {
    pub fn max_rhat(&self) -> Option<f64> {
        self.rhat.values().copied().reduce(f64::max)
    }

    pub fn all_below(&self, threshold: f64) -> bool {
        !self.rhat.is_empty() && self.rhat.values().all(|&r| r < threshold)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Each chain cut into two halves of equal length (the middle draw of an
/// odd-length chain is dropped), all trimmed to the shortest chain.
fn split_halves(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..n]])
        .collect()
}

/// Split-R̂ of one scalar. Values below one, which only arise from the
/// between-chain variance being smaller than its expectation, are reported as one.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves = split_halves(chains);
    let h = halves.first().map_or(0, |c| c.len());
    if halves.len() < 2 || h < 2 {
        return f64::NAN;
    }
    let hf = h as f64;
    let means: Vec<f64> = halves.iter().map(|c| mean(c)).collect();
    let within = mean(&halves.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    let between = hf * sample_variance(&means);
    if within <= 0.0 {
        return if between <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let pooled = (hf - 1.0) / hf * within + between / hf;
    (pooled / within).sqrt().max(1.0)
}

/// Multi-chain effective sample size from split chains, with Geyer's
/// initial monotone sequence truncation of the autocorrelations.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let halves = split_halves(chains);
    let m = halves.len();
    let h = halves.first().map_or(0, |c| c.len());
    if m < 1 || h < 4 {
        return f64::NAN;
    }
    let hf = h as f64;
    let means: Vec<f64> = halves.iter().map(|c| mean(c)).collect();
    let variances: Vec<f64> = halves.iter().map(|c| sample_variance(c)).collect();
    let within = mean(&variances);
    let between = if m > 1 { hf * sample_variance(&means) } else { 0.0 };
    let pooled = (hf - 1.0) / hf * within + between / hf;
    if !(pooled > 0.0) {
        return (m * h) as f64;
    }
    let autocov = |lag: usize| -> f64 {
        halves
            .iter()
            .zip(&means)
            .map(|(c, &mu)| (0..h - lag).map(|t| (c[t] - mu) * (c[t + lag] - mu)).sum::<f64>() / hf)
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (within - autocov(lag)) / pooled;
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < h {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let total = (m * h) as f64;
    // Antithetic chains can push τ below one; cap as Stan does.
    total / tau.max(1.0 / total.log10())
}

/// Split-R̂ and effective sample sizes. Needs at least two chains with ten
/// retained draws each; otherwise the maps are empty and a warning is set.
pub fn compute_rhat(draws: &PosteriorDraws) -> ChainDiagnostics {
    let mut out = ChainDiagnostics::default();
    if draws.chains.len() < 2 {
        out.warnings.push("R-hat needs at least two chains".into());
        return out;
    }
    if draws.chains.iter().any(|c| c.len() < 10) {
        out.warnings.push("R-hat needs at least ten retained draws per chain".into());
        return out;
    }
    let mut worst_strength: Option<f64> = None;
    for (name, kind, series) in draws.scalar_series() {
        let r = split_rhat(&series);
        match kind {
            ParameterKind::Strength => {
                worst_strength = Some(worst_strength.map_or(r, |w| w.max(r)));
            }
            ParameterKind::Global | ParameterKind::Hyper => {
                out.effective_sample_size.insert(name.clone(), effective_sample_size(&series));
                out.rhat.insert(name, r);
            }
        }
    }
    out.max_strength_rhat = worst_strength;
    out.converged = out.all_below(RHAT_THRESHOLD);
    if !out.converged {
        if let Some(max) = out.max_rhat() {
            out.warnings.push(format!("max R-hat {max:.4} is not below {RHAT_THRESHOLD}"));
        }
    }
    if let Some(w) = worst_strength {
        if w >= RHAT_THRESHOLD {
            out.warnings.push(format!("max strength R-hat {w:.4} is not below {RHAT_THRESHOLD}"));
        }
    }
    out
}
