pub mod bayes;
pub mod data;
pub mod error;
pub mod likelihood;
pub mod model;
pub mod report;
pub mod mle;
pub mod simulate;
#[cfg(test)]
mod testutil;
