use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use strength_ties::data::rating_to_theta;
use strength_ties::model::{outcome_probabilities, Color, OutcomeDistribution};
use strength_ties::report::{FitReport, RunManifest};

use crate::output::{in_file, invalid, write_sidecar, write_text, CliError, Status};
use crate::{path_string, ColorChoice};

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Fitted report (JSON) from `fit`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, conflicts_with = "rating_i", required_unless_present = "rating_i", allow_hyphen_values = true)]
    theta_i: Option<f64>,
    /// Elo-scale rating, converted to a strength.
    #[arg(long)]
    rating_i: Option<f64>,
    #[arg(long, conflicts_with = "rating_j", required_unless_present = "rating_j", allow_hyphen_values = true)]
    theta_j: Option<f64>,
    #[arg(long)]
    rating_j: Option<f64>,
    /// Colour played by player i.
    #[arg(long, value_enum, default_value_t = ColorChoice::White)]
    color: ColorChoice,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
pub struct CurvesArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    theta_i: f64,
    /// First opponent strength.
    #[arg(long, allow_hyphen_values = true)]
    from: f64,
    /// Last opponent strength, included when the grid lands on it.
    #[arg(long, allow_hyphen_values = true)]
    to: f64,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, value_enum, default_value_t = ColorChoice::White)]
    color: ColorChoice,
    /// Curve destination (CSV).
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Prediction {
    theta_i: f64,
    theta_j: f64,
    color: &'static str,
    p_win: f64,
    p_draw: f64,
    p_loss: f64,
    decisive_win: f64,
}

fn strength(theta: Option<f64>, rating: Option<f64>) -> Result<f64, CliError> {
    match (theta, rating) {
        (Some(t), _) => Ok(t),
        (None, Some(r)) => Ok(rating_to_theta(r)?),
        (None, None) => Err(invalid("a strength or a rating is required for each player")),
    }
}

fn predictor(path: &std::path::Path) -> Result<impl Fn(f64, f64, Color) -> Result<OutcomeDistribution, CliError>, CliError> {
    let report = FitReport::read(path).map_err(in_file(path))?;
    let gamma = report.gamma().map_err(in_file(path))?;
    let variant = report.variant;
    Ok(move |ti: f64, tj: f64, color: Color| Ok(outcome_probabilities(ti, tj, color, &gamma, variant)?))
}

fn color_name(c: Color) -> &'static str {
    match c {
        Color::White => "white",
        Color::Black => "black",
    }
}

pub fn run_predict(args: PredictArgs) -> Result<Status, CliError> {
    let theta_i = strength(args.theta_i, args.rating_i)?;
    let theta_j = strength(args.theta_j, args.rating_j)?;
    let color = Color::from(args.color);
    let p = predictor(&args.report)?(theta_i, theta_j, color)?;
    if args.json {
        let out = Prediction {
            theta_i,
            theta_j,
            color: color_name(color),
            p_win: p.p_win,
            p_draw: p.p_draw,
            p_loss: p.p_loss,
            decisive_win: p.decisive_win(),
        };
        println!("{}", serde_json::to_string_pretty(&out).map_err(|e| invalid(e.to_string()))?);
    } else {
        println!("theta_i {theta_i:.6} ({}) vs theta_j {theta_j:.6}", color_name(color));
        println!("p_win        {:.6}", p.p_win);
        println!("p_draw       {:.6}", p.p_draw);
        println!("p_loss       {:.6}", p.p_loss);
        println!("decisive_win {:.6}", p.decisive_win());
    }
    Ok(Status::Done)
}

/// Grid `from, from + step, ...` up to `to`; a single point when they are equal.
pub fn grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(from.is_finite() && to.is_finite() && step.is_finite()) {
        return Err(invalid("grid bounds and step must be finite"));
    }
    if from > to {
        return Err(invalid(format!("--from ({from}) is above --to ({to})")));
    }
    if step <= 0.0 {
        return Err(invalid("--step must be positive"));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    if n > 1_000_000 {
        return Err(invalid(format!("grid would have {n} points")));
    }
    Ok((0..n).map(|k| from + k as f64 * step).collect())
}

pub fn run_curves(args: CurvesArgs) -> Result<Status, CliError> {
    let points = grid(args.from, args.to, args.step)?;
    let color = Color::from(args.color);
    let predict = predictor(&args.report)?;
    let mut csv = String::from("theta_j,p_win,p_draw,p_loss\n");
    for tj in points {
        let p = predict(args.theta_i, tj, color)?;
        let _ = writeln!(csv, "{tj},{},{},{}", p.p_win, p.p_draw, p.p_loss);
    }
    write_text(&args.out, &csv)?;

    let mut manifest = RunManifest::new("curves");
    manifest.inputs.push(path_string(&args.report));
    for (k, v) in [
        ("theta_i", args.theta_i.to_string()),
        ("from", args.from.to_string()),
        ("to", args.to.to_string()),
        ("step", args.step.to_string()),
        ("color", color_name(color).to_owned()),
    ] {
        manifest.overrides.insert(k.to_owned(), v);
    }
    write_sidecar(&args.out, &manifest)?;
    Ok(Status::Done)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        assert_eq!(grid(1.0, 1.0, 0.5).unwrap(), vec![1.0]);
        assert_eq!(grid(0.0, 1.0, 0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(grid(-4.0, 4.0, 0.1).unwrap().len(), 81);
        assert_eq!(grid(0.0, 1.0, 0.3).unwrap().len(), 4);
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        assert!(grid(1.0, 0.0, 0.1).is_err());
        assert!(grid(0.0, 1.0, 0.0).is_err());
        assert!(grid(0.0, 1.0, -0.1).is_err());
        assert!(grid(0.0, f64::NAN, 0.1).is_err());
    }
}
