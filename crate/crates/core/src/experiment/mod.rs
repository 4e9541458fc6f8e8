//! Experiment driver: configuration, training of each method, evaluation,
//! reports and the prior-mean sensitivity sweep.

mod config;
mod evaluate;
mod report;
mod run;

pub use config::*;
pub use evaluate::*;
pub use report::*;
pub use run::*;
