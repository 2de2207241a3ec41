use serde::{Deserialize, Serialize};

use super::PosteriorDraws;
use crate::error::{Error, Result};
use crate::likelihood::{log_likelihood, Dataset, ParamSet};
use crate::model::ModelVariant;

/// Deviance information criterion, with deviance `−2·log-likelihood`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DicReport {
    /// Posterior mean deviance.
    pub dbar: f64,
    /// Deviance at the posterior mean of `(θ, γ)`.
    pub dhat: f64,
    pub p_d: f64,
    pub dic: f64,
    /// Set when `p_d < 0`, which usually signals a poorly identified posterior.
    pub warning: Option<String>,
}

impl DicReport {
    pub fn from_deviances(dbar: f64, dhat: f64) -> Self {
        let p_d = dbar - dhat;
        Self {
            dbar,
            dhat,
            p_d,
            dic: 2.0 * dbar - dhat,
            warning: (p_d < 0.0).then(|| format!("negative effective number of parameters ({p_d:.3})")),
        }
    }
}

pub fn compute_dic(draws: &PosteriorDraws, data: &Dataset, variant: ModelVariant) -> Result<DicReport> {
    let total = draws.total_draws();
    if total == 0 {
        return Err(Error::invalid("no posterior draws"));
    }
    let dbar = draws.chains.iter().flat_map(|c| c.deviance.iter()).sum::<f64>() / total as f64;
    let (theta, gamma) = draws.posterior_mean();
    let dhat = -2.0 * log_likelihood(data, &ParamSet::new(theta, gamma), variant)?;
    Ok(DicReport::from_deviances(dbar, dhat))
}

/// Linearly interpolated empirical quantile of sorted data (`0 ≤ p ≤ 1`).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Posterior mean, standard deviation and 95% central interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterSummary {
    pub fn from_values(name: impl Into<String>, values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            name: name.into(),
            mean,
            sd: var.sqrt(),
            lower: percentile(&sorted, 0.025),
            upper: percentile(&sorted, 0.975),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParameterSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Summaries pooled over chains, in `PosteriorDraws::scalar_series` order.
pub fn summarize_posterior(draws: &PosteriorDraws) -> Result<PosteriorSummary> {
    if draws.total_draws() == 0 {
        return Err(Error::invalid("no posterior draws"));
    }
    let parameters = draws
        .scalar_series()
        .into_iter()
        .map(|(name, _, series)| {
            let pooled: Vec<f64> = series.into_iter().flatten().collect();
            ParameterSummary::from_values(name, &pooled)
        })
        .collect();
    Ok(PosteriorSummary { parameters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_draws() {
        let s = ParameterSummary::from_values("x", &[2.5; 40]);
        assert_eq!((s.mean, s.lower, s.upper, s.sd), (2.5, 2.5, 2.5, 0.0));
    }

    #[test]
    fn standard_normal_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let values: Vec<f64> = (0..6000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = ParameterSummary::from_values("z", &values);
        assert!((s.lower + 1.96).abs() < 0.08, "{}", s.lower);
        assert!((s.upper - 1.96).abs() < 0.08, "{}", s.upper);
    }

    #[test]
    fn percentile_interpolates() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&x, 0.0), 1.0);
        assert_eq!(percentile(&x, 1.0), 5.0);
        assert_eq!(percentile(&x, 0.5), 3.0);
        assert!((percentile(&x, 0.025) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn dic_identities() {
        let d = DicReport::from_deviances(100.0, 100.0);
        assert_eq!((d.p_d, d.dic), (0.0, 100.0));
        assert!(d.warning.is_none());
        let d = DicReport::from_deviances(105.25, 98.5);
        assert_eq!(d.dic, 2.0 * d.dbar - d.dhat);
        assert!((d.dic - (d.dbar + d.p_d)).abs() < 1e-12);
        assert!(DicReport::from_deviances(90.0, 95.0).warning.is_some());
    }
}
