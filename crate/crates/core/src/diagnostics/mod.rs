//! Independence test (Kendall rank correlation) and pulls.

mod kendall;
mod pulls;

pub use kendall::{kendall_tau, IndependenceReport};
pub use pulls::{pull, PullSummary};
