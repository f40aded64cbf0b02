//! Constellations among primes through the stages of Eratosthenes sieve.
//!
//! The cycle of gaps G(p#) lists the gaps between consecutive integers coprime
//! to p#. A three-step recursion builds G(p_{k+1}#) from G(p_k#), and the counts
//! of any short gap pattern follow an exact linear recurrence driven by the
//! patterns that merge into it. This crate provides:
//!
//! - [`gapcycle`]: building, scanning and validating G(p#);
//! - [`constellation`]: gap patterns, their preimages and driving-term closure;
//! - [`recurrence`]: exact and density-scaled stage-by-stage counts;
//! - [`sieve`]: a segmented sieve that counts real copies over `[q, q²]`;
//! - [`estimator`]: uniformity and Hardy–Littlewood estimates;
//! - [`report`]: the joined estimate-versus-count table, CSV and SVG output.

pub mod constellation;
pub mod error;
pub mod estimator;
pub mod gapcycle;
pub mod primes;
pub mod recurrence;
pub mod report;
pub mod sieve;

pub use constellation::{closure, ClosureGraph, Constellation};
pub use error::{Error, ErrorKind, Result};
pub use estimator::{
    compute_hl_constants, hl_interval_estimate, percent_error, EstimateRow, HlConstants,
};
pub use gapcycle::{build_cycle, uniformity_statistic, CycleBuilder, GapCycle, UniformityStat};
pub use recurrence::{run_to, Mode, RecurrenceOptions, StageCounts, Trajectory};
pub use report::{run_compare, CompareConfig, ComparisonReport};
pub use sieve::{
    first_occurrence, interval_counts, match_constellations, CheckpointTable, MatchLedger,
    SieveConfig,
};
