use std::path::PathBuf;

use clap::Args;
use strength_ties::bayes::{fit_bayes, write_draws_csv, Progress};
use strength_ties::data::{build_roster_and_dataset, RosterBuild};
use strength_ties::error::Error;
use strength_ties::likelihood::PriorMode;
use strength_ties::mle::{fit_mle, MleOptions};
use strength_ties::model::ModelVariant;
use strength_ties::report::{FitReport, RunManifest};

use crate::output::{read_games, write_sidecar, CliError, Status};
use crate::{path_string, Context, McmcArgs, PriorChoice};

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Games CSV.
    #[arg(long)]
    games: PathBuf,
    /// Model number, 1 (full) to 6 (constant order effect, fixed draw slope).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=6))]
    variant: u8,
    /// `none` fits by maximum likelihood.
    #[arg(long, value_enum, default_value_t = PriorChoice::Informative)]
    prior: PriorChoice,
    /// Report destination (JSON).
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    mcmc: McmcArgs,
    /// Also write the retained draws, long format.
    #[arg(long)]
    draws: Option<PathBuf>,
    /// Outer iteration cap for maximum likelihood.
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    /// Relative log-likelihood tolerance for maximum likelihood.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
}

pub fn prior_mode(choice: PriorChoice) -> Option<PriorMode> {
    match choice {
        PriorChoice::Informative => Some(PriorMode::Informative),
        PriorChoice::Exchangeable => Some(PriorMode::Exchangeable),
        PriorChoice::None => None,
    }
}

pub fn load(ctx: &Context, games: &std::path::Path) -> Result<RosterBuild, CliError> {
    let rows = read_games(games)?;
    let build = build_roster_and_dataset(&rows).map_err(crate::output::in_file(games))?;
    for w in &build.warnings {
        ctx.progress(|| format!("warning: {w}"));
    }
    ctx.progress(|| {
        format!(
            "{}: {} games, {} players ({} unrated)",
            games.display(),
            build.dataset.len(),
            build.roster.len(),
            build.prior.n_unrated()
        )
    });
    Ok(build)
}

pub fn chain_progress(ctx: &Context, label: String) -> impl Fn(Progress) + Sync + '_ {
    move |p: Progress| ctx.progress(|| format!("{label}chain {}: iteration {}/{}", p.chain + 1, p.iteration, p.iterations))
}

pub fn run(ctx: &Context, args: FitArgs) -> Result<Status, CliError> {
    let variant = ModelVariant::from_number(args.variant)?;
    let build = load(ctx, &args.games)?;

    let mut manifest = RunManifest::new("fit");
    manifest.inputs.push(path_string(&args.games));
    manifest.variant = Some(args.variant);
    manifest.prior = Some(args.prior.name().to_owned());

    let mut report = match prior_mode(args.prior) {
        None => {
            if args.draws.is_some() {
                return Err(crate::output::invalid("--draws needs a Bayesian fit (--prior informative or exchangeable)"));
            }
            let options = MleOptions {
                max_outer_iterations: args.max_iterations,
                tolerance: args.tolerance,
                ..MleOptions::default()
            };
            manifest.overrides.insert("max_iterations".into(), args.max_iterations.to_string());
            manifest.overrides.insert("tolerance".into(), args.tolerance.to_string());
            let mle = fit_mle(&build.dataset, variant, &options)?;
            FitReport::from_mle(manifest, Some(&build.roster), mle)
        }
        Some(mode) => {
            let config = args.mcmc.config();
            manifest.seed = Some(config.seed);
            args.mcmc.record(&mut manifest.overrides);
            let prior = build.prior.with_mode(mode);
            let fit = fit_bayes(&build.dataset, variant, &prior, &config, &chain_progress(ctx, String::new()))?;
            if let Some(path) = &args.draws {
                let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
                write_draws_csv(&fit.draws, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))?;
                let mut m = manifest.clone();
                m.overrides.insert("draws".into(), path_string(path));
                write_sidecar(path, &m)?;
            }
            FitReport::from_bayes(manifest, Some(&build.roster), &fit)
        }
    };
    report.warnings.extend(build.warnings.iter().map(|w| w.to_string()));
    report.write(&args.out)?;
    ctx.progress(|| format!("wrote {}", args.out.display()));

    if report.converged() {
        Ok(Status::Done)
    } else {
        let detail = match &report.bayes {
            Some(b) => format!(
                "chains did not converge (max R-hat {:.4}); report written to {}",
                b.diagnostics.max_rhat().unwrap_or(f64::NAN),
                args.out.display()
            ),
            None => format!("optimizer did not converge; report written to {}", args.out.display()),
        };
        Ok(Status::NotConverged(detail))
    }
}
