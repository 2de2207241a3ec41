use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::likelihood::{Dataset, Game};
use crate::model::{GameOutcome, GlobalParams, LogWeights, ModelVariant};

pub fn game(white: usize, black: usize, outcome: GameOutcome) -> Game {
    Game { white, black, outcome }
}

/// Repeated double round robin among `n` players with outcomes drawn
/// from `variant` at the given parameters.
pub fn synthetic(n: usize, reps: usize, theta: &[f64], gamma: GlobalParams, variant: ModelVariant, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = variant.apply(&gamma);
    let mut games = Vec::new();
    for _ in 0..reps {
        for w in 0..n {
            for b in 0..n {
                if w == b {
                    continue;
                }
                let p = LogWeights::new(theta[w], theta[b], 1.0, &gamma).probabilities();
                let u: f64 = rng.random();
                let outcome = if u < p.p_win {
                    GameOutcome::Win
                } else if u < p.p_win + p.p_draw {
                    GameOutcome::Draw
                } else {
                    GameOutcome::Loss
                };
                games.push(game(w, b, outcome));
            }
        }
    }
    Dataset::new(n, games).unwrap()
}

/// One-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
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

/// Upper-tail probability of a chi-squared statistic with 1 or 2 degrees of freedom.
pub fn chi_squared_p(stat: f64, df: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
}
