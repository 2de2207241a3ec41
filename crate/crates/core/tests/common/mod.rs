//! Reference implementations used as test oracles. Everything here is
//! computed directly from the outcome probabilities, without the library's
//! likelihood code.
#![allow(dead_code)]

use rand::Rng;
use strength_ties::likelihood::{Dataset, Game};
use strength_ties::model::{GameOutcome, GlobalParams};

pub fn game(white: usize, black: usize, outcome: GameOutcome) -> Game {
    Game { white, black, outcome }
}

/// `[p_win, p_draw, p_loss]` for the player with strength `ti` and colour
/// sign `x` against `tj`.
pub fn oracle_probabilities(ti: f64, tj: f64, x: f64, g: [f64; 4]) -> [f64; 3] {
    let [a0, a1, b0, b1] = g;
    let m = (ti + tj) / 2.0;
    let order = x * (a0 + a1 * m) / 4.0;
    let w = [ti + order, b0 + (1.0 + b1) * m, tj - order];
    let top = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = w.map(|v| (v - top).exp());
    let z: f64 = e.iter().sum();
    e.map(|v| v / z)
}

fn outcome_index(o: GameOutcome) -> usize {
    match o {
        GameOutcome::Win => 0,
        GameOutcome::Draw => 1,
        GameOutcome::Loss => 2,
    }
}

pub fn oracle_loglik(data: &Dataset, theta: &[f64], g: [f64; 4]) -> f64 {
    data.games()
        .iter()
        .map(|gm| oracle_probabilities(theta[gm.white], theta[gm.black], 1.0, g)[outcome_index(gm.outcome)].ln())
        .sum()
}

/// Davidson's tie model: `P(i) ∝ π_i`, `P(tie) ∝ ν·sqrt(π_i π_j)`.
pub fn davidson_loglik(data: &Dataset, theta: &[f64], nu: f64) -> f64 {
    data.games()
        .iter()
        .map(|gm| {
            let (pi, pj) = (theta[gm.white].exp(), theta[gm.black].exp());
            let tie = nu * (pi * pj).sqrt();
            let z = pi + pj + tie;
            match gm.outcome {
                GameOutcome::Win => (pi / z).ln(),
                GameOutcome::Draw => (tie / z).ln(),
                GameOutcome::Loss => (pj / z).ln(),
            }
        })
        .sum()
}

pub fn draw_outcome<R: Rng + ?Sized>(rng: &mut R, p: [f64; 3]) -> GameOutcome {
    let u: f64 = rng.random();
    if u < p[0] {
        GameOutcome::Win
    } else if u < p[0] + p[1] {
        GameOutcome::Draw
    } else {
        GameOutcome::Loss
    }
}

/// `reps` games for every ordered pair, outcomes drawn from the oracle.
pub fn round_robin<R: Rng + ?Sized>(rng: &mut R, theta: &[f64], g: [f64; 4], reps: usize) -> Dataset {
    let n = theta.len();
    let mut games = Vec::new();
    for _ in 0..reps {
        for w in 0..n {
            for b in 0..n {
                if w != b {
                    let p = oracle_probabilities(theta[w], theta[b], 1.0, g);
                    games.push(game(w, b, draw_outcome(rng, p)));
                }
            }
        }
    }
    Dataset::new(n, games).unwrap()
}

pub fn random_gamma<R: Rng + ?Sized>(rng: &mut R) -> GlobalParams {
    GlobalParams::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-0.5..0.5),
        rng.random_range(-3.0..1.0),
        rng.random_range(-0.5..1.0),
    )
}

fn concave_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    // Grid for a bracket, then bisection on the sign of the derivative.
    let steps = ((hi - lo) / 0.5).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| lo + 0.5 * k as f64).collect();
    if f(lo) <= 0.0 {
        return lo;
    }
    if f(hi) > 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for w in grid.windows(2) {
        if f(w[1]) <= 0.0 {
            a = w[0];
            b = w[1];
            break;
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if f(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Maximum likelihood for Davidson's model by cyclic coordinate ascent,
/// each coordinate located by grid search and bisection on a central
/// difference derivative. Returns sum-zero strengths and `log ν`.
pub fn oracle_davidson_mle(data: &Dataset) -> (Vec<f64>, f64) {
    let n = data.n_players();
    // Coordinates: θ_0..θ_{n-2} with θ_{n-1} = 0, then log ν.
    let mut x = vec![0.0; n];
    let f = |x: &[f64]| {
        let mut theta = x[..n - 1].to_vec();
        theta.push(0.0);
        davidson_loglik(data, &theta, x[n - 1].exp())
    };
    for _ in 0..20_000 {
        let mut change: f64 = 0.0;
        for c in 0..n {
            let deriv = |v: f64| {
                let h = 1e-5;
                let mut up = x.clone();
                up[c] = v + h;
                let mut dn = x.clone();
                dn[c] = v - h;
                (f(&up) - f(&dn)) / (2.0 * h)
            };
            let v = concave_root(deriv, -12.0, 12.0);
            change = change.max((v - x[c]).abs());
            x[c] = v;
        }
        if change < 1e-10 {
            break;
        }
    }
    let mut theta = x[..n - 1].to_vec();
    theta.push(0.0);
    let mean = theta.iter().sum::<f64>() / n as f64;
    (theta.iter().map(|t| t - mean).collect(), x[n - 1])
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            up[i] += h;
            let mut dn = x.to_vec();
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    (d, p.clamp(0.0, 1.0))
}

/// Mean and Monte Carlo standard error from batch means.
pub fn mean_and_mc_se(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let batches = 50;
    let size = n / batches;
    let mean = x.iter().sum::<f64>() / n as f64;
    let bm: Vec<f64> = (0..batches)
        .map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let var = bm.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}
