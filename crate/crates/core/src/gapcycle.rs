//! The cycle of gaps G(p#): gaps between consecutive generators of Z mod p#,
//! read cyclically from 1. Built stage by stage from G(2) = (2).

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::primes::{is_prime, next_prime, primorial_totient, primorial_u128};

/// Largest stage built unless the caller raises it. G(23#) is ~36 MB.
pub const DEFAULT_MAX_STAGE: u64 = 23;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapCycle {
    stage_prime: u64,
    gaps: Vec<u8>,
}

/// Start of one copy of a constellation inside a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CyclePosition {
    /// Index of the first gap of the copy.
    pub index: usize,
    /// Sum of all gaps before `index`; the copy starts at generator `1 + offset`.
    pub offset: u64,
}

impl GapCycle {
    /// G(2) = (2): the lone generator 1 mod 2.
    pub fn base() -> Self {
        GapCycle {
            stage_prime: 2,
            gaps: vec![2],
        }
    }

    pub fn stage_prime(&self) -> u64 {
        self.stage_prime
    }

    pub fn gaps(&self) -> &[u8] {
        &self.gaps
    }

    /// φ(p#), the number of gaps.
    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Sum of the gaps, p#.
    pub fn primorial(&self) -> u64 {
        self.gaps.iter().map(|&g| g as u64).sum()
    }

    /// The next sieving prime is one more than the first gap.
    pub fn next_prime(&self) -> u64 {
        self.gaps[0] as u64 + 1
    }

    /// One step of the recursion with the default stage cap.
    pub fn step(&self) -> Result<GapCycle> {
        CycleBuilder::default().step(self)
    }

    /// Start indices (0-based) of every copy of `s`, reading the cycle
    /// periodically so copies that wrap past the end are included once.
    pub fn match_indices<'a>(&'a self, s: &Constellation) -> impl Iterator<Item = usize> + 'a {
        let pattern: Option<Vec<u8>> = s.gaps().iter().map(|&g| u8::try_from(g).ok()).collect();
        let n = self.gaps.len();
        let gaps = &self.gaps;
        let pattern = pattern.unwrap_or_default();
        (0..if pattern.is_empty() { 0 } else { n }).filter(move |&i| {
            if i + pattern.len() <= n {
                gaps[i..i + pattern.len()] == pattern[..]
            } else {
                pattern
                    .iter()
                    .enumerate()
                    .all(|(t, &g)| gaps[(i + t) % n] == g)
            }
        })
    }

    /// N_p(s): number of copies of `s` in the cycle.
    pub fn scan_count(&self, s: &Constellation) -> u64 {
        self.match_indices(s).count() as u64
    }

    pub fn positions_of(&self, s: &Constellation) -> Vec<CyclePosition> {
        let mut out = Vec::new();
        let mut offset = 0u64;
        let mut cursor = 0usize;
        for index in self.match_indices(s) {
            offset += self.gaps[cursor..index]
                .iter()
                .map(|&g| g as u64)
                .sum::<u64>();
            cursor = index;
            out.push(CyclePosition { index, offset });
        }
        out
    }

    /// Counts every window of consecutive gaps (read cyclically) whose sum is
    /// exactly `sigma`, keyed by the window's gap sequence. One pass gives the
    /// counts of all constellations with that span at once.
    pub fn tally_windows(&self, sigma: u64) -> HashMap<Vec<u8>, u64> {
        let n = self.gaps.len();
        let mut out: HashMap<Vec<u8>, u64> = HashMap::new();
        let mut window = Vec::new();
        for i in 0..n {
            window.clear();
            let mut sum = 0u64;
            let mut t = i;
            while sum < sigma {
                let g = self.gaps[t % n];
                sum += g as u64;
                window.push(g);
                t += 1;
            }
            if sum == sigma {
                *out.entry(window.clone()).or_insert(0) += 1;
            }
        }
        out
    }

    /// Text dump: `p=<prime> phi=<count> primorial=<sum>` then the gaps.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.gaps.len() * 3 + 48);
        let _ = writeln!(
            out,
            "p={} phi={} primorial={}",
            self.stage_prime,
            self.gaps.len(),
            self.primorial()
        );
        for (i, g) in self.gaps.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{g}");
        }
        out.push('\n');
        out
    }

    /// Checks the structural invariants of a stage cycle.
    pub fn validate(&self) -> Result<()> {
        let p = self.stage_prime;
        let fail = |what: String| Err(Error::config(format!("G({p}#) invalid: {what}")));
        let phi = primorial_totient(p).unwrap_or(u128::MAX);
        if self.gaps.len() as u128 != phi {
            return fail(format!("{} gaps, expected {phi}", self.gaps.len()));
        }
        let sum = self.primorial() as u128;
        if Some(sum) != primorial_u128(p) {
            return fail(format!("gap sum {sum}"));
        }
        if p < 3 {
            return Ok(());
        }
        let n = self.gaps.len();
        if self.gaps[n - 1] != 2 {
            return fail("final gap is not 2".into());
        }
        if self.next_prime() != next_prime(p) {
            return fail(format!(
                "first gap {} does not lead to the next prime",
                self.gaps[0]
            ));
        }
        if let Some(g) = self.gaps.iter().find(|&&g| g % 2 == 1) {
            return fail(format!("odd gap {g}"));
        }
        let body = &self.gaps[..n - 1];
        if body.iter().ne(body.iter().rev()) {
            return fail("not symmetric".into());
        }
        Ok(())
    }
}

/// Builds cycles up to a configured maximum stage.
#[derive(Debug, Clone, Copy)]
pub struct CycleBuilder {
    max_stage: u64,
}

impl Default for CycleBuilder {
    fn default() -> Self {
        CycleBuilder {
            max_stage: DEFAULT_MAX_STAGE,
        }
    }
}

impl CycleBuilder {
    pub fn with_max_stage(max_stage: u64) -> Self {
        CycleBuilder { max_stage }
    }

    pub fn max_stage(&self) -> u64 {
        self.max_stage
    }

    /// Bytes held while stepping into stage `p`: the previous cycle plus the new one.
    pub fn memory_estimate(p: u64) -> u128 {
        let prev = crate::primes::prev_prime(p)
            .and_then(primorial_totient)
            .unwrap_or(0);
        primorial_totient(p).map_or(u128::MAX, |phi| phi.saturating_add(prev))
    }

    fn check_capacity(&self, p: u64) -> Result<()> {
        let bytes = Self::memory_estimate(p);
        if p > self.max_stage || bytes > usize::MAX as u128 {
            return Err(Error::Capacity {
                stage: p,
                max_stage: self.max_stage,
                bytes,
            });
        }
        Ok(())
    }

    pub fn build(&self, p: u64) -> Result<GapCycle> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        self.check_capacity(p)?;
        let mut cycle = GapCycle::base();
        while cycle.stage_prime < p {
            cycle = self.step(&cycle)?;
        }
        Ok(cycle)
    }

    /// G(p_k#) -> G(p_{k+1}#). Concatenates p_{k+1} copies of the cycle and
    /// removes the multiples p_{k+1}·m of the old generators m, merging the
    /// two gaps around each removed value.
    pub fn step(&self, cycle: &GapCycle) -> Result<GapCycle> {
        let p = cycle.next_prime();
        self.check_capacity(p)?;
        let old = &cycle.gaps;
        let phi = old.len();
        let mut out = Vec::with_capacity((p as usize - 1) * phi);

        let mut value = 1u64;
        let mut pending = 0u64;
        // generator m runs over 1, 1 + g_1, 1 + g_1 + g_2, ...
        let mut removed = 0usize;
        let mut removal = p;
        for _ in 0..p {
            for &g in old {
                value += g as u64;
                pending += g as u64;
                if value == removal {
                    if removed < phi {
                        removal += p * old[removed] as u64;
                    }
                    removed += 1;
                    continue;
                }
                let cell = u8::try_from(pending).map_err(|_| Error::GapOverflow {
                    stage: p,
                    gap: pending,
                })?;
                out.push(cell);
                pending = 0;
            }
        }
        assert_eq!(removed, phi, "every addition happens exactly once");
        assert_eq!(pending, 0);
        Ok(GapCycle {
            stage_prime: p,
            gaps: out,
        })
    }
}

/// G(p#) with the default stage cap.
pub fn build_cycle(p: u64) -> Result<GapCycle> {
    CycleBuilder::default().build(p)
}

/// Chi-squared occupancy of equal-width bins over `[0, cycle_length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityStat {
    pub statistic: f64,
    pub dof: usize,
    pub copies: usize,
    pub bins: usize,
}

pub fn uniformity_statistic(
    offsets: &[u64],
    cycle_length: u64,
    bins: usize,
) -> Result<UniformityStat> {
    if bins < 2 {
        return Err(Error::config("uniformity needs at least two bins"));
    }
    if offsets.is_empty() {
        return Err(Error::NoCopies);
    }
    let mut occupancy = vec![0u64; bins];
    for &off in offsets {
        if off >= cycle_length {
            return Err(Error::config(format!(
                "offset {off} outside cycle of length {cycle_length}"
            )));
        }
        let bin = (off as u128 * bins as u128 / cycle_length as u128) as usize;
        occupancy[bin] += 1;
    }
    let expected = offsets.len() as f64 / bins as f64;
    let statistic = occupancy
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    Ok(UniformityStat {
        statistic,
        dof: bins - 1,
        copies: offsets.len(),
        bins,
    })
}
