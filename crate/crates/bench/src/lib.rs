//! Shared inputs for the criterion benches.

use cyclegaps::Constellation;

/// Constellations exercised by the sieve and recurrence benches.
pub const PATTERNS: [&str; 6] = ["2", "6", "8", "66", "242", "2,10,2"];

pub fn patterns() -> Vec<Constellation> {
    PATTERNS
        .iter()
        .map(|t| Constellation::parse(t).expect("bench pattern"))
        .collect()
}
