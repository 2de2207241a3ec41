//! Maximum-likelihood fitting by alternating Newton–Raphson.
//!
//! Each outer iteration maximises over the global block `γ` with strengths
//! fixed, then over the strengths with `γ` fixed. With the other block held
//! still, each subproblem is a multinomial-logit fit, so the block Hessians
//! are exact and negative semi-definite. Strengths live in the sum-to-zero
//! chart `θ_last = −Σ θ_k`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{grad_log_likelihood, log_likelihood_unchecked, Dataset, GameDerivatives, ParamSet};
use crate::model::{GlobalParams, ModelVariant};

pub const THETA_BOUND: f64 = 15.0;
pub const GAMMA_BOUND: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_outer_iterations: usize,
    pub inner_newton_iterations: usize,
    /// Relative change in log-likelihood between outer iterations.
    pub tolerance: f64,
    pub step_halving_max: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_outer_iterations: 200,
            inner_newton_iterations: 50,
            tolerance: 1e-8,
            step_halving_max: 30,
        }
    }
}

impl MleOptions {
    fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0 || self.inner_newton_iterations == 0 || self.step_halving_max == 0 {
            return Err(Error::invalid("iteration limits must be positive"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWarning {
    PerfectScore { player: usize },
    StrengthAtBound { player: usize, value: f64 },
    GlobalAtBound { parameter: String, value: f64 },
    SingularInformation { detail: String },
    NotAtOptimum { gradient_norm: f64 },
    IterationCap { iterations: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleReport {
    pub variant: ModelVariant,
    pub params: ParamSet,
    pub log_likelihood: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Log-likelihood at the start and after every outer iteration.
    pub trace: Vec<f64>,
    /// Per strength, then `α₀, α₁, β₀, β₁`; absent where not estimable.
    pub standard_errors: Vec<Option<f64>>,
    pub warnings: Vec<FitWarning>,
}

fn relative_change(old: f64, new: f64) -> f64 {
    (new - old).abs() / old.abs().max(1.0)
}

/// Puts `theta` back on the sum-zero hyperplane after clamping, moving only
/// coordinates in `free` that are strictly inside the bounds.
fn restore_sum_zero(theta: &mut [f64], free: &[usize]) {
    for _ in 0..64 {
        for &k in free {
            theta[k] = theta[k].clamp(-THETA_BOUND, THETA_BOUND);
        }
        let sum: f64 = theta.iter().sum();
        if sum.abs() < 1e-13 {
            return;
        }
        let movable: Vec<usize> = free
            .iter()
            .copied()
            .filter(|&k| {
                if sum > 0.0 {
                    theta[k] > -THETA_BOUND
                } else {
                    theta[k] < THETA_BOUND
                }
            })
            .collect();
        if movable.is_empty() {
            return;
        }
        let shift = sum / movable.len() as f64;
        for &k in &movable {
            theta[k] -= shift;
        }
    }
}

/// Solves `(A + λI) x = b` for symmetric positive semi-definite `A`, raising
/// `λ` until the Cholesky factorisation succeeds.
fn damped_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut lambda = 0.0;
    for _ in 0..20 {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += lambda;
        }
        if let Some(ch) = m.cholesky() {
            let x = ch.solve(b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        lambda = if lambda == 0.0 { 1e-10 * scale } else { lambda * 10.0 };
    }
    None
}

struct Fitter<'a> {
    data: &'a Dataset,
    options: &'a MleOptions,
    free_gamma: Vec<usize>,
}

impl Fitter<'_> {
    fn ll(&self, theta: &[f64], gamma: &GlobalParams) -> f64 {
        log_likelihood_unchecked(self.data, theta, gamma)
    }

    fn newton_gamma(&self, theta: &[f64], gamma: &mut GlobalParams, ll: &mut f64) {
        let f = &self.free_gamma;
        if f.is_empty() {
            return;
        }
        for _ in 0..self.options.inner_newton_iterations {
            let mut grad = DVector::zeros(f.len());
            let mut info = DMatrix::zeros(f.len(), f.len());
            for g in self.data.games() {
                let d = GameDerivatives::new(theta[g.white], theta[g.black], gamma);
                let s = d.score(g.outcome);
                for (a, &ca) in f.iter().enumerate() {
                    grad[a] += s[2 + ca];
                    for (b, &cb) in f.iter().enumerate().skip(a) {
                        info[(a, b)] += d.covariance(2 + ca, 2 + cb);
                    }
                }
            }
            for a in 0..f.len() {
                for b in 0..a {
                    info[(a, b)] = info[(b, a)];
                }
            }
            let Some(step) = damped_solve(info, &grad) else { return };
            let current = gamma.to_array();
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=self.options.step_halving_max {
                let mut cand = current;
                for (a, &c) in f.iter().enumerate() {
                    cand[c] = (current[c] + t * step[a]).clamp(-GAMMA_BOUND, GAMMA_BOUND);
                }
                let cand = GlobalParams::from_array(cand);
                let cand_ll = self.ll(theta, &cand);
                if cand_ll >= *ll {
                    accepted = Some((cand, cand_ll));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, cand_ll)) = accepted else { return };
            let moved = f
                .iter()
                .map(|&c| (cand.to_array()[c] - current[c]).abs())
                .fold(0.0, f64::max);
            *gamma = cand;
            *ll = cand_ll;
            if moved < 1e-10 {
                return;
            }
        }
    }

    fn newton_theta(&self, theta: &mut [f64], gamma: &GlobalParams, ll: &mut f64) {
        let n = theta.len();
        for _ in 0..self.options.inner_newton_iterations {
            let mut grad = vec![0.0; n];
            let mut info = DMatrix::<f64>::zeros(n, n);
            for g in self.data.games() {
                let d = GameDerivatives::new(theta[g.white], theta[g.black], gamma);
                let s = d.score(g.outcome);
                grad[g.white] += s[0];
                grad[g.black] += s[1];
                let (w, b) = (g.white, g.black);
                let ww = d.covariance(0, 0);
                let wb = d.covariance(0, 1);
                let bb = d.covariance(1, 1);
                info[(w, w)] += ww;
                info[(b, b)] += bb;
                info[(w, b)] += wb;
                info[(b, w)] += wb;
            }
            // Strengths pinned at a bound with the gradient pushing outward stay put.
            let free: Vec<usize> = (0..n)
                .filter(|&k| {
                    let at_top = theta[k] >= THETA_BOUND - 1e-12 && grad[k] >= 0.0;
                    let at_bottom = theta[k] <= -THETA_BOUND + 1e-12 && grad[k] <= 0.0;
                    !(at_top || at_bottom)
                })
                .collect();
            if free.len() < 2 {
                return;
            }
            let last = *free.last().expect("non-empty");
            let chart = &free[..free.len() - 1];
            let m = chart.len();
            let gc = DVector::from_iterator(m, chart.iter().map(|&a| grad[a] - grad[last]));
            let mut hc = DMatrix::zeros(m, m);
            for (i, &a) in chart.iter().enumerate() {
                for (j, &b) in chart.iter().enumerate() {
                    hc[(i, j)] = info[(a, b)] - info[(a, last)] - info[(last, b)] + info[(last, last)];
                }
            }
            let Some(step) = damped_solve(hc, &gc) else { return };
            let mut direction = vec![0.0; n];
            for (i, &a) in chart.iter().enumerate() {
                direction[a] = step[i];
                direction[last] -= step[i];
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=self.options.step_halving_max {
                let mut cand: Vec<f64> = theta.iter().zip(&direction).map(|(v, d)| v + t * d).collect();
                restore_sum_zero(&mut cand, &free);
                let cand_ll = self.ll(&cand, gamma);
                if cand_ll >= *ll {
                    accepted = Some((cand, cand_ll));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, cand_ll)) = accepted else { return };
            let moved = cand.iter().zip(theta.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            theta.copy_from_slice(&cand);
            *ll = cand_ll;
            if moved < 1e-10 {
                return;
            }
        }
    }
}

/// Maximum-likelihood fit of `variant`, starting from `θ = 0`, `γ = 0`.
///
/// Players with perfect scores get capped strengths at `±THETA_BOUND` and a
/// warning; unbounded global parameters are capped at `±GAMMA_BOUND`.
pub fn fit_mle(data: &Dataset, variant: ModelVariant, options: &MleOptions) -> Result<MleReport> {
    options.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("cannot fit an empty dataset"));
    }
    let records = data.records();
    if let Some(k) = records.iter().position(|r| r.games() == 0) {
        return Err(Error::invalid(format!("player {k} has no games")));
    }
    let mut warnings: Vec<FitWarning> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_perfect())
        .map(|(player, _)| FitWarning::PerfectScore { player })
        .collect();

    let fitter = Fitter {
        data,
        options,
        free_gamma: variant.free_indices(),
    };
    let n = data.n_players();
    let mut theta = vec![0.0; n];
    let mut gamma = GlobalParams::default();
    let mut ll = fitter.ll(&theta, &gamma);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut outer = 0;
    while outer < options.max_outer_iterations {
        outer += 1;
        let before = ll;
        fitter.newton_gamma(&theta, &mut gamma, &mut ll);
        fitter.newton_theta(&mut theta, &gamma, &mut ll);
        trace.push(ll);
        if relative_change(before, ll) < options.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(FitWarning::IterationCap { iterations: outer });
    }

    for (player, &v) in theta.iter().enumerate() {
        if v.abs() >= THETA_BOUND - 1e-9 {
            warnings.push(FitWarning::StrengthAtBound { player, value: v });
        }
    }
    for (name, v) in GlobalParams::NAMES.iter().zip(gamma.to_array()) {
        if v.abs() >= GAMMA_BOUND - 1e-9 {
            warnings.push(FitWarning::GlobalAtBound {
                parameter: (*name).to_owned(),
                value: v,
            });
        }
    }

    let params = ParamSet::new(theta, gamma);
    let (standard_errors, se_warnings) = observed_information_se(data, &params, variant)?;
    warnings.extend(se_warnings);
    Ok(MleReport {
        variant,
        params,
        log_likelihood: ll,
        converged,
        outer_iterations: outer,
        trace,
        standard_errors,
        warnings,
    })
}

/// Coordinates of the sum-zero chart used for the observed information.
struct Chart {
    /// Strengths that vary freely; the last one absorbs the sum constraint.
    theta_free: Vec<usize>,
    gamma_free: Vec<usize>,
}

impl Chart {
    fn dim(&self) -> usize {
        self.theta_free.len().saturating_sub(1) + self.gamma_free.len()
    }

    fn n_theta(&self) -> usize {
        self.theta_free.len().saturating_sub(1)
    }

    fn displace(&self, base: &ParamSet, coord: usize, h: f64) -> ParamSet {
        let mut p = base.clone();
        let nt = self.n_theta();
        if coord < nt {
            p.theta[self.theta_free[coord]] += h;
            p.theta[*self.theta_free.last().expect("chart has strengths")] -= h;
        } else {
            let mut a = p.gamma.to_array();
            a[self.gamma_free[coord - nt]] += h;
            p.gamma = GlobalParams::from_array(a);
        }
        p
    }

    fn project_gradient(&self, full: &[f64], n_players: usize) -> Vec<f64> {
        let nt = self.n_theta();
        let mut out = Vec::with_capacity(self.dim());
        if nt > 0 {
            let last = full[*self.theta_free.last().expect("chart has strengths")];
            out.extend(self.theta_free[..nt].iter().map(|&k| full[k] - last));
        }
        out.extend(self.gamma_free.iter().map(|&c| full[n_players + c]));
        out
    }
}

/// Standard errors from the inverse of the negative Hessian of the
/// log-likelihood, differenced numerically from the analytic gradient in the
/// sum-zero chart. Strengths of perfect-score or capped players, and capped
/// global parameters, are left out and reported as `None`.
pub fn observed_information_se(
    data: &Dataset,
    params: &ParamSet,
    variant: ModelVariant,
) -> Result<(Vec<Option<f64>>, Vec<FitWarning>)> {
    let n = data.n_players();
    let mut warnings = Vec::new();
    let full_grad = grad_log_likelihood(data, params, variant)?;
    let records = data.records();
    let theta_free: Vec<usize> = (0..n)
        .filter(|&k| !records[k].is_perfect() && params.theta[k].abs() < THETA_BOUND - 1e-9)
        .collect();
    let gamma = variant.apply(&params.gamma).to_array();
    let gamma_free: Vec<usize> = variant
        .free_indices()
        .into_iter()
        .filter(|&c| gamma[c].abs() < GAMMA_BOUND - 1e-9)
        .collect();
    let chart = Chart { theta_free, gamma_free };
    let mut out = vec![None; n + 4];
    let dim = chart.dim();
    if dim == 0 {
        return Ok((out, warnings));
    }
    let g0 = chart.project_gradient(&full_grad, n);
    let gnorm = g0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gnorm > 1e-4 {
        warnings.push(FitWarning::NotAtOptimum { gradient_norm: gnorm });
    }

    let h = 1e-5;
    let mut hess = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        let plus = grad_log_likelihood(data, &chart.displace(params, c, h), variant)?;
        let minus = grad_log_likelihood(data, &chart.displace(params, c, -h), variant)?;
        let gp = chart.project_gradient(&plus, n);
        let gm = chart.project_gradient(&minus, n);
        for r in 0..dim {
            hess[(r, c)] = (gp[r] - gm[r]) / (2.0 * h);
        }
    }
    let info = -(&hess + hess.transpose()) * 0.5;
    let Some(chol) = info.clone().cholesky() else {
        warnings.push(FitWarning::SingularInformation {
            detail: "observed information is not positive definite".into(),
        });
        return Ok((out, warnings));
    };
    let cov = chol.inverse();
    let nt = chart.n_theta();
    for (i, &k) in chart.theta_free[..nt].iter().enumerate() {
        out[k] = Some(cov[(i, i)].sqrt());
    }
    if nt > 0 {
        // The dependent strength is minus the sum of the chart strengths.
        let var: f64 = (0..nt).flat_map(|i| (0..nt).map(move |j| (i, j))).map(|(i, j)| cov[(i, j)]).sum();
        out[*chart.theta_free.last().expect("chart has strengths")] = Some(var.max(0.0).sqrt());
    }
    for (i, &c) in chart.gamma_free.iter().enumerate() {
        out[n + c] = Some(cov[(nt + i, nt + i)].sqrt());
    }
    Ok((out, warnings))
}
