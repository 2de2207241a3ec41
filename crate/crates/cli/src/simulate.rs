use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use strength_ties::data::{binned_draw_diagnostic, write_games_file};
use strength_ties::model::{GlobalParams, ModelVariant};
use strength_ties::report::{write_json, RunManifest};
use strength_ties::simulate::{make_synthetic_study, SimConfig};

use crate::output::{read_games, write_sidecar, write_text, CliError, Status};
use crate::path_string;

fn reference() -> GlobalParams {
    GlobalParams::reference_estimates()
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    players: usize,
    #[arg(long, default_value_t = 9)]
    rounds: usize,
    /// Model number; pinned parameters are set to zero.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=6))]
    variant: u8,
    #[arg(long, allow_hyphen_values = true, default_value_t = reference().alpha0)]
    alpha0: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = reference().alpha1)]
    alpha1: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = reference().beta0)]
    beta0: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = reference().beta1)]
    beta1: f64,
    /// Sd of the true strengths.
    #[arg(long, default_value_t = 0.645)]
    theta_sd: f64,
    /// Sd of the noise between true strength and the reported rating.
    #[arg(long, default_value_t = 0.2)]
    rating_noise_sd: f64,
    /// Share of players written without a rating.
    #[arg(long, default_value_t = 0.0)]
    unrated_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Games destination (CSV).
    #[arg(long, short)]
    out: PathBuf,
    /// True parameters (JSON); defaults to `<out>.truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    #[arg(long)]
    games: PathBuf,
    /// Largest rating difference kept.
    #[arg(long, default_value_t = 200.0)]
    max_gap: f64,
    #[arg(long, default_value_t = 50.0)]
    bin_width: f64,
    /// Table destination (CSV).
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Truth<'a> {
    manifest: &'a RunManifest,
    config: &'a SimConfig,
    model: u8,
    theta: &'a [f64],
    player_ids: Vec<&'a str>,
    gamma: GlobalParams,
    prior_means: Vec<Option<f64>>,
}

pub fn run_simulate(args: SimulateArgs) -> Result<Status, CliError> {
    let variant = ModelVariant::from_number(args.variant)?;
    let config = SimConfig {
        rounds: args.rounds,
        true_params: GlobalParams::new(args.alpha0, args.alpha1, args.beta0, args.beta1),
        theta_sd: args.theta_sd,
        rating_noise_sd: args.rating_noise_sd,
        unrated_fraction: args.unrated_fraction,
        ..SimConfig::new(args.players, args.seed)
    };
    let study = make_synthetic_study(&config, variant)?;
    write_games_file(&args.out, &study.rows())?;

    let mut manifest = RunManifest::new("simulate");
    manifest.variant = Some(args.variant);
    manifest.seed = Some(args.seed);
    for (k, v) in [
        ("players", args.players.to_string()),
        ("rounds", args.rounds.to_string()),
        ("alpha0", args.alpha0.to_string()),
        ("alpha1", args.alpha1.to_string()),
        ("beta0", args.beta0.to_string()),
        ("beta1", args.beta1.to_string()),
        ("theta_sd", args.theta_sd.to_string()),
        ("rating_noise_sd", args.rating_noise_sd.to_string()),
        ("unrated_fraction", args.unrated_fraction.to_string()),
    ] {
        manifest.overrides.insert(k.to_owned(), v);
    }
    write_sidecar(&args.out, &manifest)?;

    let truth_path = args.truth.unwrap_or_else(|| {
        let mut s = args.out.clone().into_os_string();
        s.push(".truth.json");
        PathBuf::from(s)
    });
    let truth = Truth {
        manifest: &manifest,
        config: &config,
        model: args.variant,
        theta: &study.truth.theta,
        player_ids: study.roster.entries.iter().map(|e| e.key.player_id.as_str()).collect(),
        gamma: study.truth.gamma,
        prior_means: study.roster.prior_means(),
    };
    write_json(&truth_path, &truth)?;
    if !study.tournament.relaxed_rounds.is_empty() {
        eprintln!("note: rounds {:?} relaxed the rematch or colour constraints", study.tournament.relaxed_rounds);
    }
    Ok(Status::Done)
}

pub fn run_diagnose(args: DiagnoseArgs) -> Result<Status, CliError> {
    let rows = read_games(&args.games)?;
    let bins = binned_draw_diagnostic(&rows, args.max_gap, args.bin_width)?;
    let mut csv = String::from("bin_lower,bin_upper,games,draws,draw_rate,white_win_rate\n");
    for b in &bins {
        let white = b.white_win_rate.map(|w| w.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{},{white}", b.lower, b.upper, b.games, b.draws, b.draw_rate);
    }
    write_text(&args.out, &csv)?;

    let mut manifest = RunManifest::new("diagnose");
    manifest.inputs.push(path_string(&args.games));
    manifest.overrides.insert("max_gap".into(), args.max_gap.to_string());
    manifest.overrides.insert("bin_width".into(), args.bin_width.to_string());
    write_sidecar(&args.out, &manifest)?;
    if bins.is_empty() {
        eprintln!("note: no games passed the rating filter");
    }
    Ok(Status::Done)
}
