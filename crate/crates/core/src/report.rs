//! Fit reports: a versioned JSON document describing one fitted model.
//!
//! Layout (schema version 1):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "software_version": "0.1.0",
//!   "manifest": { subcommand, inputs, variant, prior, seed, overrides, tool_version },
//!   "model": 1..6,
//!   "variant": { "order_effect": ..., "tie_slope": ... },
//!   "method": "mle" | "bayes",
//!   "prior": null | "informative" | "exchangeable",
//!   "seed": null | integer,
//!   "global": [ { name, estimate, pinned, se, sd, lower, upper } × 4 ],
//!   "players": [ { index, player_id, event_id, rating, estimate, se, sd, lower, upper } ],
//!   "mle": null | MleReport,
//!   "bayes": null | { config, summary, dic, diagnostics, retained_draws, acceptance },
//!   "warnings": [ string ]
//! }
//! ```
//!
//! For MLE fits `lower`/`upper` are `estimate ± 1.96·se`; for Bayesian fits
//! `estimate` is the posterior mean and the bounds are the 2.5% and 97.5%
//! posterior quantiles. Numbers are written in shortest round-trip form, so
//! reparsing recovers every value exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bayes::{AcceptanceRates, BayesFit, ChainDiagnostics, DicReport, McmcConfig, PosteriorSummary};
use crate::data::Roster;
use crate::error::{Error, Result};
use crate::likelihood::PriorMode;
use crate::mle::MleReport;
use crate::model::{GlobalParams, ModelVariant};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

const Z_95: f64 = 1.959963984540054;

/// How an output was produced; embedded in every document the tool writes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<String>,
    pub variant: Option<u8>,
    pub prior: Option<String>,
    pub seed: Option<u64>,
    /// Options given on the command line, by flag name.
    pub overrides: BTreeMap<String, String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(subcommand: impl Into<String>) -> Self {
        Self {
            subcommand: subcommand.into(),
            tool_version: SOFTWARE_VERSION.to_owned(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Mle,
    Bayes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalEstimate {
    pub name: String,
    pub estimate: f64,
    /// Fixed at zero by the model variant.
    pub pinned: bool,
    pub se: Option<f64>,
    /// Posterior standard deviation.
    pub sd: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerEstimate {
    pub index: usize,
    pub player_id: Option<String>,
    pub event_id: Option<String>,
    pub rating: Option<i64>,
    pub estimate: f64,
    pub se: Option<f64>,
    pub sd: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesSection {
    pub config: McmcConfig,
    pub summary: PosteriorSummary,
    pub dic: DicReport,
    pub diagnostics: ChainDiagnostics,
    pub retained_draws: usize,
    /// Per chain.
    pub acceptance: Vec<AcceptanceRates>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub software_version: String,
    pub manifest: RunManifest,
    pub model: u8,
    pub variant: ModelVariant,
    pub method: FitMethod,
    pub prior: Option<PriorMode>,
    pub seed: Option<u64>,
    pub global: Vec<GlobalEstimate>,
    pub players: Vec<PlayerEstimate>,
    pub mle: Option<MleReport>,
    pub bayes: Option<BayesSection>,
    pub warnings: Vec<String>,
}

fn player_identity(roster: Option<&Roster>, k: usize) -> (Option<String>, Option<String>, Option<i64>) {
    match roster.and_then(|r| r.entries.get(k)) {
        Some(e) => (Some(e.key.player_id.clone()), Some(e.key.event_id.clone()), e.rating),
        None => (None, None, None),
    }
}

impl FitReport {
    pub fn from_mle(manifest: RunManifest, roster: Option<&Roster>, mle: MleReport) -> Self {
        let n = mle.params.theta.len();
        let interval = |est: f64, se: Option<f64>| se.map(|s| (est - Z_95 * s, est + Z_95 * s)).unzip();
        let free = mle.variant.free_mask();
        let global = GlobalParams::NAMES
            .iter()
            .zip(mle.params.gamma.to_array())
            .enumerate()
            .map(|(c, (name, est))| {
                let se = mle.standard_errors[n + c];
                let (lower, upper) = interval(est, se);
                GlobalEstimate {
                    name: (*name).to_owned(),
                    estimate: est,
                    pinned: !free[c],
                    se,
                    sd: None,
                    lower,
                    upper,
                }
            })
            .collect();
        let players = (0..n)
            .map(|k| {
                let (player_id, event_id, rating) = player_identity(roster, k);
                let est = mle.params.theta[k];
                let se = mle.standard_errors[k];
                let (lower, upper) = interval(est, se);
                PlayerEstimate {
                    index: k,
                    player_id,
                    event_id,
                    rating,
                    estimate: est,
                    se,
                    sd: None,
                    lower,
                    upper,
                }
            })
            .collect();
        let mut warnings: Vec<String> = mle
            .warnings
            .iter()
            .map(|w| serde_json::to_string(w).expect("warning serializes"))
            .collect();
        if !mle.converged {
            warnings.push(format!("optimizer did not converge in {} outer iterations", mle.outer_iterations));
        }
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            software_version: SOFTWARE_VERSION.to_owned(),
            manifest,
            model: mle.variant.number(),
            variant: mle.variant,
            method: FitMethod::Mle,
            prior: None,
            seed: None,
            global,
            players,
            mle: Some(mle),
            bayes: None,
            warnings,
        }
    }

    pub fn from_bayes(manifest: RunManifest, roster: Option<&Roster>, fit: &BayesFit) -> Self {
        let variant = fit.draws.variant;
        let free = variant.free_mask();
        let global = GlobalParams::NAMES
            .iter()
            .enumerate()
            .map(|(c, name)| match fit.summary.get(name).filter(|_| free[c]) {
                Some(s) => GlobalEstimate {
                    name: (*name).to_owned(),
                    estimate: s.mean,
                    pinned: false,
                    se: None,
                    sd: Some(s.sd),
                    lower: Some(s.lower),
                    upper: Some(s.upper),
                },
                None => GlobalEstimate {
                    name: (*name).to_owned(),
                    estimate: 0.0,
                    pinned: true,
                    se: None,
                    sd: None,
                    lower: None,
                    upper: None,
                },
            })
            .collect();
        let players = (0..fit.draws.n_players)
            .map(|k| {
                let (player_id, event_id, rating) = player_identity(roster, k);
                let s = fit.summary.get(&format!("theta[{k}]")).expect("every strength is summarized");
                PlayerEstimate {
                    index: k,
                    player_id,
                    event_id,
                    rating,
                    estimate: s.mean,
                    se: None,
                    sd: Some(s.sd),
                    lower: Some(s.lower),
                    upper: Some(s.upper),
                }
            })
            .collect();
        let mut warnings = fit.diagnostics.warnings.clone();
        warnings.extend(fit.dic.warning.clone());
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            software_version: SOFTWARE_VERSION.to_owned(),
            manifest,
            model: variant.number(),
            variant,
            method: FitMethod::Bayes,
            prior: Some(fit.draws.prior_mode),
            seed: Some(fit.config.seed),
            global,
            players,
            mle: None,
            bayes: Some(BayesSection {
                config: fit.config.clone(),
                summary: fit.summary.clone(),
                dic: fit.dic.clone(),
                diagnostics: fit.diagnostics.clone(),
                retained_draws: fit.draws.total_draws(),
                acceptance: fit.draws.chains.iter().map(|c| c.acceptance).collect(),
            }),
            warnings,
        }
    }

    /// Point estimates of the global parameters.
    pub fn gamma(&self) -> Result<GlobalParams> {
        let mut g = [0.0; 4];
        for (c, name) in GlobalParams::NAMES.iter().enumerate() {
            let e = self
                .global
                .iter()
                .find(|e| e.name == *name)
                .ok_or_else(|| Error::invalid(format!("report has no estimate for {name}")))?;
            if !e.estimate.is_finite() {
                return Err(Error::invalid(format!("report estimate for {name} is not finite")));
            }
            g[c] = e.estimate;
        }
        Ok(self.variant.apply(&GlobalParams::from_array(g)))
    }

    /// Whether the fit met its convergence criterion.
    pub fn converged(&self) -> bool {
        match (&self.mle, &self.bayes) {
            (Some(m), _) => m.converged,
            (None, Some(b)) => b.diagnostics.converged,
            (None, None) => false,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Parses and checks a report. Rejects unknown schema versions and
    /// reports whose model number disagrees with their variant.
    pub fn from_json(text: &str) -> Result<Self> {
        let report: FitReport = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "unsupported report schema version {} (expected {REPORT_SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        if report.model != report.variant.number() {
            return Err(Error::invalid(format!(
                "report model {} does not match its variant ({})",
                report.model,
                report.variant
            )));
        }
        Ok(report)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `<path>.manifest.json`, the sidecar that carries the manifest of a CSV output.
pub fn manifest_sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{fit_bayes, McmcConfig};
    use crate::likelihood::PriorSpec;
    use crate::mle::{fit_mle, MleOptions};
    use crate::model::GameOutcome::*;
    use crate::testutil::{game, synthetic};
    use crate::likelihood::Dataset;

    fn m(n: u8) -> ModelVariant {
        ModelVariant::from_number(n).unwrap()
    }

    fn manifest() -> RunManifest {
        let mut man = RunManifest::new("fit");
        man.inputs.push("games.csv".into());
        man.variant = Some(1);
        man.overrides.insert("seed".into(), "7".into());
        man
    }

    #[test]
    fn mle_report_round_trips_exactly() {
        let data = synthetic(4, 3, &[0.4, 0.1, -0.2, -0.3], GlobalParams::reference_estimates(), m(1), 2);
        let mle = fit_mle(&data, m(1), &MleOptions::default()).unwrap();
        let report = FitReport::from_mle(manifest(), None, mle.clone());
        let back = FitReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
        let back_mle = back.mle.unwrap();
        for (a, b) in back_mle.params.theta.iter().zip(&mle.params.theta) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back_mle.trace, mle.trace);
        assert_eq!(back.manifest, manifest());
    }

    #[test]
    fn david_variant_reports_pinned_slopes() {
        let data = Dataset::new(3, vec![game(0, 1, Win), game(1, 2, Draw), game(2, 0, Draw), game(1, 0, Loss), game(2, 1, Win)]).unwrap();
        let mle = fit_mle(&data, m(6), &MleOptions::default()).unwrap();
        let report = FitReport::from_mle(manifest(), None, mle);
        let g = report.gamma().unwrap();
        assert_eq!((g.alpha1, g.beta1), (0.0, 0.0));
        let pinned: Vec<bool> = report.global.iter().map(|e| e.pinned).collect();
        assert_eq!(pinned, vec![false, true, false, true]);
    }

    #[test]
    fn bayes_report_round_trips_with_dic_identity() {
        let data = synthetic(4, 3, &[0.4, 0.1, -0.2, -0.3], GlobalParams::reference_estimates(), m(1), 3);
        let prior = PriorSpec::informative(vec![Some(0.3), None, Some(-0.1), Some(-0.2)]);
        let config = McmcConfig { iterations: 600, burn_in: 300, thin: 3, seed: 4, ..McmcConfig::default() };
        let fit = fit_bayes(&data, m(3), &prior, &config, &|_| {}).unwrap();
        let report = FitReport::from_bayes(manifest(), None, &fit);
        let back = FitReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
        let dic = back.bayes.as_ref().unwrap().dic.clone();
        assert_eq!(dic.dic, 2.0 * dic.dbar - dic.dhat);
        assert_eq!(back.bayes.as_ref().unwrap().retained_draws, 300);
        assert!(back.global[1].pinned);
        let s = back.bayes.unwrap().summary;
        assert!(s.get("mu_miss").is_some() && s.get("sigma").is_some());
        assert!(back.players.iter().all(|p| p.lower.unwrap() <= p.estimate && p.estimate <= p.upper.unwrap()));
    }

    #[test]
    fn malformed_reports_are_rejected() {
        assert!(FitReport::from_json("").is_err());
        assert!(FitReport::from_json("{}").is_err());
        let data = Dataset::new(2, vec![game(0, 1, Draw), game(1, 0, Win)]).unwrap();
        let report = FitReport::from_mle(manifest(), None, fit_mle(&data, m(5), &MleOptions::default()).unwrap());
        let mut bad = report.clone();
        bad.schema_version = 99;
        assert!(FitReport::from_json(&bad.to_json().unwrap()).is_err());
        let mut bad = report;
        bad.model = 2;
        assert!(FitReport::from_json(&bad.to_json().unwrap()).is_err());
    }
}
