//! Synthetic players and Swiss-system tournaments.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{theta_to_rating, PlayerKey, RawGameRow, Roster, RosterEntry};
use crate::error::{Error, Result};
use crate::likelihood::{Dataset, Game, ParamSet, PriorSpec};
use crate::model::{outcome_probabilities, Color, GameOutcome, GlobalParams, ModelVariant};

/// Event id written for simulated games.
pub const SIM_EVENT_ID: &str = "sim";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_players: usize,
    pub rounds: usize,
    pub true_params: GlobalParams,
    pub theta_sd: f64,
    /// Sd of the noise added to true strengths to form prior means.
    pub rating_noise_sd: f64,
    pub unrated_fraction: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n_players: usize, seed: u64) -> Self {
        Self {
            n_players,
            rounds: 9,
            true_params: GlobalParams::reference_estimates(),
            theta_sd: 0.645,
            rating_noise_sd: 0.2,
            unrated_fraction: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_players < 2 {
            return Err(Error::invalid("a tournament needs at least two players"));
        }
        if self.rounds == 0 {
            return Err(Error::invalid("rounds must be at least 1"));
        }
        if !(self.theta_sd > 0.0 && self.theta_sd.is_finite()) {
            return Err(Error::invalid("theta_sd must be positive"));
        }
        if !(self.rating_noise_sd >= 0.0 && self.rating_noise_sd.is_finite()) {
            return Err(Error::invalid("rating_noise_sd must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.unrated_fraction) {
            return Err(Error::invalid("unrated_fraction must lie in [0, 1]"));
        }
        if !self.true_params.is_finite() {
            return Err(Error::invalid("true_params must be finite"));
        }
        Ok(())
    }

    // Independent streams, so the strengths do not depend on how many
    // variates the later stages consume.
    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    fn draw_theta(&self) -> Vec<f64> {
        let mut rng = self.stream(0);
        let normal = Normal::new(0.0, self.theta_sd).expect("validated sd");
        (0..self.n_players).map(|_| normal.sample(&mut rng)).collect()
    }
}

/// Draws an outcome for white `θ_i` against black `θ_j` with one uniform variate.
pub fn sample_outcome<R: Rng + ?Sized>(
    theta_i: f64,
    theta_j: f64,
    color: Color,
    gamma: &GlobalParams,
    variant: ModelVariant,
    rng: &mut R,
) -> Result<GameOutcome> {
    let p = outcome_probabilities(theta_i, theta_j, color, gamma, variant)?;
    let u: f64 = rng.random();
    Ok(if u < p.p_win {
        GameOutcome::Win
    } else if u < p.p_win + p.p_draw {
        GameOutcome::Draw
    } else {
        GameOutcome::Loss
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Standing {
    pub score: f64,
    /// Games as white minus games as black.
    pub color_balance: i32,
    pub games: usize,
    pub byes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tournament {
    /// True strengths, indexed like the dataset.
    pub theta: Vec<f64>,
    pub games: Vec<Game>,
    /// 1-based round of each game.
    pub round_of_game: Vec<usize>,
    pub standings: Vec<Standing>,
    /// `(round, player)` for every bye.
    pub byes: Vec<(usize, usize)>,
    /// Rounds in which no pairing without rematches (within the colour
    /// limit) existed and a constraint had to be relaxed.
    pub relaxed_rounds: Vec<usize>,
}

impl Tournament {
    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::new(self.theta.len(), self.games.clone())
    }
}

/// Largest allowed |games as white − games as black|.
const MAX_COLOR_IMBALANCE: i32 = 2;
const PAIRING_SEARCH_BUDGET: usize = 200_000;

struct Pairing<'a> {
    order: &'a [usize],
    met: &'a HashSet<(usize, usize)>,
    balance: &'a [i32],
    check_rematch: bool,
    check_color: bool,
    budget: usize,
}

fn pair_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Pairing<'_> {
    fn allowed(&self, a: usize, b: usize) -> bool {
        if self.check_rematch && self.met.contains(&pair_key(a, b)) {
            return false;
        }
        if self.check_color {
            let (hi, lo) = if self.balance[a] >= self.balance[b] {
                (self.balance[a], self.balance[b])
            } else {
                (self.balance[b], self.balance[a])
            };
            // The lower-balance player takes white.
            if lo + 1 > MAX_COLOR_IMBALANCE || hi - 1 < -MAX_COLOR_IMBALANCE {
                return false;
            }
        }
        true
    }

    /// Depth-first: the first free player takes the nearest allowed partner below.
    fn search(&mut self, used: &mut [bool], out: &mut Vec<(usize, usize)>) -> bool {
        let Some(i) = (0..self.order.len()).find(|&i| !used[i]) else {
            return true;
        };
        used[i] = true;
        for j in i + 1..self.order.len() {
            if used[j] || !self.allowed(self.order[i], self.order[j]) {
                continue;
            }
            if self.budget == 0 {
                break;
            }
            self.budget -= 1;
            used[j] = true;
            out.push((self.order[i], self.order[j]));
            if self.search(used, out) {
                return true;
            }
            out.pop();
            used[j] = false;
        }
        used[i] = false;
        false
    }

    fn run(order: &[usize], met: &HashSet<(usize, usize)>, balance: &[i32], check_rematch: bool, check_color: bool) -> Option<Vec<(usize, usize)>> {
        let mut p = Pairing {
            order,
            met,
            balance,
            check_rematch,
            check_color,
            budget: PAIRING_SEARCH_BUDGET,
        };
        let mut used = vec![false; order.len()];
        let mut out = Vec::with_capacity(order.len() / 2);
        p.search(&mut used, &mut out).then_some(out)
    }
}

/// Swiss tournament among players with the given strengths, outcomes drawn
/// from `variant` at `gamma`.
///
/// Seeds rank players by strength. Round 1 pairs the top half against the
/// bottom half; later rounds order players by (score, seed) and pair each
/// with the nearest player below who is not a previous opponent and can be
/// given a colour without |balance| exceeding 2. The lower-balance player
/// gets white; on equal balances the higher seed alternates from its last
/// colour (by board in round 1). With an odd count the lowest-standing
/// player without a previous bye sits out, scoring nothing.
pub fn swiss_tournament_with<R: Rng + ?Sized>(
    theta: &[f64],
    rounds: usize,
    gamma: &GlobalParams,
    variant: ModelVariant,
    rng: &mut R,
) -> Result<Tournament> {
    let n = theta.len();
    if n < 2 {
        return Err(Error::invalid("a tournament needs at least two players"));
    }
    if rounds == 0 {
        return Err(Error::invalid("rounds must be at least 1"));
    }
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]).then(a.cmp(&b)));
    let mut seed_rank = vec![0; n];
    for (r, &p) in seeds.iter().enumerate() {
        seed_rank[p] = r;
    }

    let mut standings = vec![Standing::default(); n];
    let mut last_color: Vec<Option<Color>> = vec![None; n];
    let mut met: HashSet<(usize, usize)> = HashSet::new();
    let mut out = Tournament {
        theta: theta.to_vec(),
        games: Vec::new(),
        round_of_game: Vec::new(),
        standings: Vec::new(),
        byes: Vec::new(),
        relaxed_rounds: Vec::new(),
    };

    for round in 1..=rounds {
        let mut order: Vec<usize> = seeds.clone();
        if round > 1 {
            order.sort_by(|&a, &b| {
                standings[b]
                    .score
                    .total_cmp(&standings[a].score)
                    .then(seed_rank[a].cmp(&seed_rank[b]))
            });
        }
        if n % 2 == 1 {
            let pos = order
                .iter()
                .rposition(|&p| standings[p].byes == 0)
                .unwrap_or(order.len() - 1);
            let p = order.remove(pos);
            standings[p].byes += 1;
            out.byes.push((round, p));
        }

        let pairs: Vec<(usize, usize)> = if round == 1 {
            let half = order.len() / 2;
            (0..half).map(|i| (order[i], order[i + half])).collect()
        } else {
            let balance: Vec<i32> = standings.iter().map(|s| s.color_balance).collect();
            let strict = Pairing::run(&order, &met, &balance, true, true);
            match strict {
                Some(p) => p,
                None => {
                    out.relaxed_rounds.push(round);
                    Pairing::run(&order, &met, &balance, true, false)
                        .unwrap_or_else(|| order.chunks(2).map(|c| (c[0], c[1])).collect())
                }
            }
        };

        for (board, &(a, b)) in pairs.iter().enumerate() {
            let (higher, lower) = if seed_rank_order(&standings, &seed_rank, a, b) { (a, b) } else { (b, a) };
            let (ba, bb) = (standings[higher].color_balance, standings[lower].color_balance);
            let white = if ba < bb {
                higher
            } else if bb < ba {
                lower
            } else {
                let higher_color = match last_color[higher] {
                    Some(c) => c.flipped(),
                    None if board % 2 == 0 => Color::White,
                    None => Color::Black,
                };
                if higher_color == Color::White { higher } else { lower }
            };
            let black = if white == a { b } else { a };
            let outcome = sample_outcome(theta[white], theta[black], Color::White, gamma, variant, rng)?;
            out.games.push(Game { white, black, outcome });
            out.round_of_game.push(round);
            met.insert(pair_key(white, black));
            standings[white].score += outcome.score();
            standings[black].score += 1.0 - outcome.score();
            standings[white].color_balance += 1;
            standings[black].color_balance -= 1;
            standings[white].games += 1;
            standings[black].games += 1;
            last_color[white] = Some(Color::White);
            last_color[black] = Some(Color::Black);
        }
    }
    out.standings = standings;
    Ok(out)
}

/// Whether `a` stands above `b` (higher score, then better seed).
fn seed_rank_order(standings: &[Standing], seed_rank: &[usize], a: usize, b: usize) -> bool {
    match standings[a].score.total_cmp(&standings[b].score) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => seed_rank[a] < seed_rank[b],
    }
}

/// Roster of `n` simulated players, `p0001`, `p0002`, … in a single event, so
/// that roster order equals player index.
pub fn synthetic_roster(prior_means: &[Option<f64>]) -> Result<Roster> {
    let width = prior_means.len().to_string().len().max(4);
    let entries = prior_means
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let rating = m.map(|m| theta_to_rating(m).map(|r| r.round() as i64)).transpose()?;
            Ok(RosterEntry {
                key: PlayerKey {
                    player_id: format!("p{:0width$}", k + 1),
                    event_id: SIM_EVENT_ID.to_owned(),
                },
                rating,
                prior_mean: *m,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Roster { entries })
}

/// A Swiss tournament from `config`, with outcomes from the full model at
/// `config.true_params`.
pub fn swiss_tournament(config: &SimConfig) -> Result<(Roster, Tournament)> {
    config.validate()?;
    let theta = draw_theta_checked(config)?;
    let mut rng = config.stream(2);
    let tournament = swiss_tournament_with(&theta, config.rounds, &config.true_params, ModelVariant::FULL, &mut rng)?;
    let roster = synthetic_roster(&vec![None; config.n_players])?;
    Ok((roster, tournament))
}

fn draw_theta_checked(config: &SimConfig) -> Result<Vec<f64>> {
    config.validate()?;
    Ok(config.draw_theta())
}

#[derive(Clone, Debug)]
pub struct SyntheticStudy {
    pub dataset: Dataset,
    /// True strengths and the generating global parameters (pinned components zeroed).
    pub truth: ParamSet,
    pub prior: PriorSpec,
    pub roster: Roster,
    pub tournament: Tournament,
}

impl SyntheticStudy {
    /// Games as file rows; ratings are the prior means on the Elo scale,
    /// rounded to whole points.
    pub fn rows(&self) -> Vec<RawGameRow> {
        let e = &self.roster.entries;
        self.tournament
            .games
            .iter()
            .enumerate()
            .map(|(i, g)| RawGameRow {
                event_id: SIM_EVENT_ID.to_owned(),
                white_id: e[g.white].key.player_id.clone(),
                black_id: e[g.black].key.player_id.clone(),
                white_rating: e[g.white].rating,
                black_rating: e[g.black].rating,
                outcome: g.outcome,
                line: i as u64 + 2,
            })
            .collect()
    }
}

pub fn make_synthetic_study(config: &SimConfig, variant: ModelVariant) -> Result<SyntheticStudy> {
    let theta = draw_theta_checked(config)?;
    let n = config.n_players;

    let mut rng = config.stream(1);
    let unrated_count = (config.unrated_fraction * n as f64).round() as usize;
    let mut unrated = vec![false; n];
    for k in rand::seq::index::sample(&mut rng, n, unrated_count.min(n)) {
        unrated[k] = true;
    }
    let noise = Normal::new(0.0, config.rating_noise_sd).expect("validated sd");
    let prior_means: Vec<Option<f64>> = theta
        .iter()
        .zip(&unrated)
        .map(|(&t, &u)| {
            let e = noise.sample(&mut rng);
            (!u).then_some(t + e)
        })
        .collect();

    let gamma = variant.apply(&config.true_params);
    let mut rng = config.stream(2);
    let tournament = swiss_tournament_with(&theta, config.rounds, &gamma, variant, &mut rng)?;
    let roster = synthetic_roster(&prior_means)?;
    let mut truth = ParamSet::new(theta, gamma);
    truth.sigma = config.theta_sd;
    Ok(SyntheticStudy {
        dataset: tournament.dataset()?,
        truth,
        prior: PriorSpec::informative(prior_means),
        roster,
        tournament,
    })
}
