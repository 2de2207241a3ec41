use std::io::Write;

use super::PosteriorDraws;

/// Long format, one row per (retained draw, parameter). `iteration` is the
/// 0-based sampler iteration the draw was taken at; parameters appear in
/// `PosteriorDraws::scalar_series` order, followed by `deviance`.
pub const DRAWS_CSV_HEADER: &str = "chain,iteration,parameter,value";

pub fn write_draws_csv<W: Write>(draws: &PosteriorDraws, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{DRAWS_CSV_HEADER}")?;
    let series = draws.scalar_series();
    for (c, chain) in draws.chains.iter().enumerate() {
        for (d, &iteration) in chain.iteration.iter().enumerate() {
            for (name, _, values) in &series {
                writeln!(out, "{c},{iteration},{name},{:?}", values[c][d])?;
            }
            writeln!(out, "{c},{iteration},deviance,{:?}", chain.deviance[d])?;
        }
    }
    out.flush()
}
