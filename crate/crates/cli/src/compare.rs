use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use strength_ties::bayes::fit_bayes;
use strength_ties::model::ModelVariant;
use strength_ties::report::{write_json, RunManifest};

use crate::fit::{chain_progress, load, prior_mode};
use crate::output::{invalid, CliError, Status};
use crate::{path_string, Context, McmcArgs, PriorChoice};

/// DIC differences up to this size are treated as no real preference.
pub const DIC_MARGIN: f64 = 3.0;

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    games: PathBuf,
    /// Model numbers to fit.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6", value_parser = clap::value_parser!(u8).range(1..=6))]
    variants: Vec<u8>,
    /// Prior schemes to fit (Bayesian only).
    #[arg(long, value_delimiter = ',', value_enum, default_value = "informative,exchangeable")]
    priors: Vec<PriorChoice>,
    /// Table destination (JSON).
    #[arg(long, short)]
    out: PathBuf,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: u8,
    pub prior: String,
    pub dic: Option<f64>,
    pub p_d: Option<f64>,
    pub dbar: Option<f64>,
    pub dhat: Option<f64>,
    pub max_rhat: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
    /// Smallest DIC in the table.
    pub minimum: bool,
    /// Within `DIC_MARGIN` of the smallest DIC, itself included.
    pub comparable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub manifest: RunManifest,
    pub margin: f64,
    pub models: Vec<u8>,
    pub priors: Vec<String>,
    pub cells: Vec<Cell>,
}

/// Marks the minimum and every cell within `DIC_MARGIN` of it.
pub fn flag_cells(cells: &mut [Cell]) {
    let best = cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.dic.map(|d| (i, d)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((i, min)) = best {
        for c in cells.iter_mut() {
            c.comparable = c.dic.is_some_and(|d| d - min <= DIC_MARGIN);
        }
        cells[i].minimum = true;
    }
}

/// Rows are models and columns prior schemes. `*` marks the minimum and `~`
/// cells within the margin of it.
pub fn render(table: &CompareTable) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<8}", "Model");
    for p in &table.priors {
        let _ = write!(s, "{p:>18}");
    }
    s.push('\n');
    for &m in &table.models {
        let _ = write!(s, "{:<8}", m);
        for p in &table.priors {
            let cell = table.cells.iter().find(|c| c.model == m && &c.prior == p);
            let text = match cell {
                Some(Cell { dic: Some(d), minimum, comparable, converged, .. }) => {
                    let mark = if *minimum { "*" } else if *comparable { "~" } else { " " };
                    let nc = if *converged { " " } else { "!" };
                    format!("{d:.2}{mark}{nc}")
                }
                Some(_) => "failed  ".to_owned(),
                None => "".to_owned(),
            };
            let _ = write!(s, "{text:>18}");
        }
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "* minimum DIC; ~ within {} of the minimum; ! not converged (R-hat >= 1.01)",
        table.margin
    );
    s
}

pub fn run(ctx: &Context, args: CompareArgs) -> Result<Status, CliError> {
    if args.variants.is_empty() || args.priors.is_empty() {
        return Err(invalid("at least one variant and one prior are required"));
    }
    if args.priors.contains(&PriorChoice::None) {
        return Err(invalid("compare ranks Bayesian fits by DIC; prior `none` is not allowed"));
    }
    let mut models = args.variants.clone();
    models.dedup();
    let mut priors = args.priors.clone();
    priors.dedup();
    let build = load(ctx, &args.games)?;
    let config = args.mcmc.config();

    let mut manifest = RunManifest::new("compare");
    manifest.inputs.push(path_string(&args.games));
    manifest.seed = Some(config.seed);
    args.mcmc.record(&mut manifest.overrides);
    manifest.overrides.insert("variants".into(), models.iter().map(u8::to_string).collect::<Vec<_>>().join(","));
    manifest
        .overrides
        .insert("priors".into(), priors.iter().map(|p| p.name()).collect::<Vec<_>>().join(","));

    let grid: Vec<(u8, PriorChoice)> = models.iter().flat_map(|&m| priors.iter().map(move |&p| (m, p))).collect();
    let mut cells: Vec<Cell> = grid
        .par_iter()
        .map(|&(m, p)| {
            let mode = prior_mode(p).expect("Bayesian prior");
            let label = format!("Model {m}, {}: ", p.name());
            let result = ModelVariant::from_number(m).and_then(|variant| {
                fit_bayes(&build.dataset, variant, &build.prior.with_mode(mode), &config, &chain_progress(ctx, label))
            });
            match result {
                Ok(fit) => Cell {
                    model: m,
                    prior: p.name().to_owned(),
                    dic: Some(fit.dic.dic),
                    p_d: Some(fit.dic.p_d),
                    dbar: Some(fit.dic.dbar),
                    dhat: Some(fit.dic.dhat),
                    max_rhat: fit.diagnostics.max_rhat(),
                    converged: fit.diagnostics.converged,
                    error: None,
                    minimum: false,
                    comparable: false,
                },
                Err(e) => Cell {
                    model: m,
                    prior: p.name().to_owned(),
                    dic: None,
                    p_d: None,
                    dbar: None,
                    dhat: None,
                    max_rhat: None,
                    converged: false,
                    error: Some(e.to_string()),
                    minimum: false,
                    comparable: false,
                },
            }
        })
        .collect();
    flag_cells(&mut cells);
    let table = CompareTable {
        manifest,
        margin: DIC_MARGIN,
        models,
        priors: priors.iter().map(|p| p.name().to_owned()).collect(),
        cells,
    };
    print!("{}", render(&table));
    write_json(&args.out, &table)?;

    let failed = table.cells.iter().filter(|c| c.error.is_some()).count();
    let unconverged = table.cells.iter().filter(|c| c.error.is_none() && !c.converged).count();
    if failed > 0 || unconverged > 0 {
        for c in table.cells.iter().filter(|c| c.error.is_some()) {
            eprintln!("error: Model {}, {}: {}", c.model, c.prior, c.error.as_deref().unwrap_or(""));
        }
        return Ok(Status::NotConverged(format!(
            "{failed} cell(s) failed and {unconverged} did not converge; table written to {}",
            args.out.display()
        )));
    }
    Ok(Status::Done)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(model: u8, dic: Option<f64>) -> Cell {
        Cell {
            model,
            prior: "informative".into(),
            dic,
            p_d: None,
            dbar: None,
            dhat: None,
            max_rhat: None,
            converged: true,
            error: None,
            minimum: false,
            comparable: false,
        }
    }

    #[test]
    fn single_cell_is_minimal() {
        let mut cells = vec![cell(1, Some(120.0))];
        flag_cells(&mut cells);
        assert!(cells[0].minimum && cells[0].comparable);
    }

    #[test]
    fn close_cells_are_comparable() {
        let mut cells = vec![cell(1, Some(100.0)), cell(2, Some(102.5)), cell(3, Some(103.5)), cell(4, None)];
        flag_cells(&mut cells);
        let flags: Vec<(bool, bool)> = cells.iter().map(|c| (c.minimum, c.comparable)).collect();
        assert_eq!(flags, vec![(true, true), (false, true), (false, false), (false, false)]);
    }

    #[test]
    fn table_layout() {
        let mut cells = vec![cell(1, Some(100.0)), cell(6, Some(110.0))];
        cells[1].prior = "exchangeable".into();
        flag_cells(&mut cells);
        let table = CompareTable {
            manifest: RunManifest::new("compare"),
            margin: DIC_MARGIN,
            models: vec![1, 6],
            priors: vec!["informative".into(), "exchangeable".into()],
            cells,
        };
        let text = render(&table);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("informative") && lines[0].contains("exchangeable"));
        assert!(lines[1].starts_with('1') && lines[1].contains("100.00*"));
        assert!(lines[2].starts_with('6') && lines[2].contains("110.00"));
    }
}
