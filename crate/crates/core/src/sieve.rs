//! Ground truth: a segmented odd-only Eratosthenes sieve feeding a
//! multi-constellation matcher, and interval counts over `[q, q²]`.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::primes::primes_up_to;

/// Bytes of odd-number bitmap per segment (16 integers per byte).
pub const DEFAULT_SEGMENT_BYTES: usize = 256 * 1024;
pub const MIN_SEGMENT_BYTES: usize = 1024;
pub const MAX_LIMIT: u64 = 9_000_000_000_000_000;

const LEDGER_MAGIC: &[u8; 4] = b"GSLD";
const LEDGER_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckpointPolicy {
    /// Every odd prime `q` with `q² <= limit`.
    Auto,
    Explicit(Vec<u64>),
}

#[derive(Debug, Clone)]
pub struct SieveConfig {
    pub limit: u64,
    pub segment_size: usize,
    pub constellations: Vec<Constellation>,
    pub checkpoints: CheckpointPolicy,
    /// Segments sieved concurrently; matching stays sequential.
    pub threads: usize,
}

impl SieveConfig {
    pub fn new(limit: u64, constellations: Vec<Constellation>) -> Self {
        SieveConfig {
            limit,
            segment_size: DEFAULT_SEGMENT_BYTES,
            constellations,
            checkpoints: CheckpointPolicy::Auto,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_limits(self.limit, self.segment_size)?;
        if self.constellations.is_empty() {
            return Err(Error::config("no constellations to match"));
        }
        Ok(())
    }

    pub fn checkpoint_primes(&self) -> Result<Vec<u64>> {
        match &self.checkpoints {
            CheckpointPolicy::Auto => Ok(auto_checkpoints(self.limit)),
            CheckpointPolicy::Explicit(qs) => {
                check_checkpoints(qs, self.limit)?;
                Ok(qs.clone())
            }
        }
    }
}

fn check_limits(limit: u64, segment_size: usize) -> Result<()> {
    if limit < 9 {
        return Err(Error::config(format!("sieve limit {limit} is below 9")));
    }
    if limit > MAX_LIMIT {
        return Err(Error::config(format!(
            "sieve limit {limit} exceeds {MAX_LIMIT}"
        )));
    }
    if segment_size < MIN_SEGMENT_BYTES {
        return Err(Error::config(format!(
            "segment size {segment_size} is below {MIN_SEGMENT_BYTES} bytes"
        )));
    }
    Ok(())
}

pub fn auto_checkpoints(limit: u64) -> Vec<u64> {
    primes_up_to(limit.isqrt()).into_iter().skip(1).collect()
}

fn check_checkpoints(qs: &[u64], limit: u64) -> Result<()> {
    if qs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("checkpoints must be strictly ascending"));
    }
    if let Some(&q) = qs
        .iter()
        .find(|&&q| q.checked_mul(q).is_none_or(|sq| sq > limit))
    {
        return Err(Error::config(format!(
            "checkpoint {q} has q² beyond the limit {limit}"
        )));
    }
    if let Some(&q) = qs.iter().find(|&&q| !crate::primes::is_prime(q)) {
        return Err(Error::NotPrime(q));
    }
    Ok(())
}

/// Odd base primes up to √limit plus the segment geometry.
struct SegmentPlan {
    limit: u64,
    base: Vec<u64>,
    span: u64,
}

impl SegmentPlan {
    fn new(limit: u64, segment_bytes: usize) -> Self {
        SegmentPlan {
            limit,
            base: primes_up_to(limit.isqrt()).into_iter().skip(1).collect(),
            span: segment_bytes as u64 * 16,
        }
    }

    fn segment_count(&self) -> u64 {
        // segments start at 3
        (self.limit - 3) / self.span + 1
    }

    /// Appends the primes in segment `idx` (odd numbers in `[lo, hi)`) to `out`.
    fn sieve(&self, idx: u64, words: &mut Vec<u64>, out: &mut Vec<u64>) {
        let lo = 3 + idx * self.span;
        let hi = (lo + self.span).min(self.limit + 1);
        let bits = (hi - lo).div_ceil(2) as usize;
        words.clear();
        words.resize(bits.div_ceil(64), 0);
        for &p in &self.base {
            let sq = p * p;
            if sq >= hi {
                break;
            }
            let mut m = if sq >= lo { sq } else { lo.div_ceil(p) * p };
            if m % 2 == 0 {
                m += p;
            }
            let mut i = ((m - lo) / 2) as usize;
            let step = p as usize;
            while i < bits {
                words[i >> 6] |= 1 << (i & 63);
                i += step;
            }
        }
        for (w, &word) in words.iter().enumerate() {
            let mut live = !word;
            if w == words.len() - 1 && !bits.is_multiple_of(64) {
                live &= (1u64 << (bits % 64)) - 1;
            }
            while live != 0 {
                let b = live.trailing_zeros() as u64;
                out.push(lo + 2 * (w as u64 * 64 + b));
                live &= live - 1;
            }
        }
    }
}

/// Primes `<= limit` in ascending order, one segment at a time.
pub struct PrimeStream {
    plan: SegmentPlan,
    next_segment: u64,
    words: Vec<u64>,
    buf: Vec<u64>,
    pos: usize,
    emitted_two: bool,
}

impl Iterator for PrimeStream {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if !self.emitted_two {
            self.emitted_two = true;
            return Some(2);
        }
        while self.pos == self.buf.len() {
            if self.next_segment >= self.plan.segment_count() {
                return None;
            }
            self.buf.clear();
            self.pos = 0;
            self.plan
                .sieve(self.next_segment, &mut self.words, &mut self.buf);
            self.next_segment += 1;
        }
        self.pos += 1;
        Some(self.buf[self.pos - 1])
    }
}

pub fn stream_primes(limit: u64, segment_size: usize) -> Result<PrimeStream> {
    check_limits(limit, segment_size)?;
    Ok(PrimeStream {
        plan: SegmentPlan::new(limit, segment_size),
        next_segment: 0,
        words: Vec::new(),
        buf: Vec::new(),
        pos: 0,
        emitted_two: false,
    })
}

/// Feeds every prime `<= limit` to `f` in order until it breaks. With
/// `threads > 1`, batches of segments are sieved in parallel and consumed in
/// order.
pub fn for_each_prime<F>(limit: u64, segment_size: usize, threads: usize, mut f: F) -> Result<()>
where
    F: FnMut(u64) -> ControlFlow<()>,
{
    check_limits(limit, segment_size)?;
    if threads <= 1 {
        for p in stream_primes(limit, segment_size)? {
            if f(p).is_break() {
                break;
            }
        }
        return Ok(());
    }
    let plan = SegmentPlan::new(limit, segment_size);
    if f(2).is_break() {
        return Ok(());
    }
    let total = plan.segment_count();
    let mut first = 0;
    while first < total {
        let last = (first + threads as u64).min(total);
        let batch: Vec<Vec<u64>> = (first..last)
            .into_par_iter()
            .map(|idx| {
                let mut words = Vec::new();
                let mut out = Vec::new();
                plan.sieve(idx, &mut words, &mut out);
                out
            })
            .collect();
        for p in batch.into_iter().flatten() {
            if f(p).is_break() {
                return Ok(());
            }
        }
        first = last;
    }
    Ok(())
}

/// Rolling single-pass matcher for several constellations over a prime stream.
pub struct Matcher {
    patterns: Vec<Constellation>,
    recent: VecDeque<u64>,
    depth: usize,
    starts: Vec<Vec<u64>>,
}

impl Matcher {
    pub fn new(patterns: Vec<Constellation>) -> Self {
        let depth = patterns.iter().map(Constellation::len).max().unwrap_or(0) + 1;
        let starts = vec![Vec::new(); patterns.len()];
        Matcher {
            patterns,
            recent: VecDeque::with_capacity(depth + 1),
            depth,
            starts,
        }
    }

    /// Consumes the next prime; returns true if any constellation completed here.
    pub fn push(&mut self, p: u64) -> bool {
        if self.recent.len() == self.depth {
            self.recent.pop_front();
        }
        self.recent.push_back(p);
        let n = self.recent.len();
        if n < 2 {
            return false;
        }
        let last_gap = p - self.recent[n - 2];
        let mut hit = false;
        for (pat, starts) in self.patterns.iter().zip(&mut self.starts) {
            let gaps = pat.gaps();
            let j = gaps.len();
            if j >= n || gaps[j - 1] as u64 != last_gap {
                continue;
            }
            let base = n - 1 - j;
            if (0..j).all(|t| self.recent[base + t + 1] - self.recent[base + t] == gaps[t] as u64) {
                starts.push(self.recent[base]);
                hit = true;
            }
        }
        hit
    }

    pub fn into_ledger(self, limit: u64) -> MatchLedger {
        MatchLedger {
            limit,
            entries: self.patterns.into_iter().zip(self.starts).collect(),
        }
    }
}

/// Per constellation, the ascending first primes of every copy found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchLedger {
    pub limit: u64,
    pub entries: Vec<(Constellation, Vec<u64>)>,
}

impl MatchLedger {
    pub fn starts(&self, s: &Constellation) -> Option<&[u64]> {
        self.entries
            .iter()
            .find(|(c, _)| c == s)
            .map(|(_, v)| v.as_slice())
    }
}

pub fn match_constellations(config: &SieveConfig) -> Result<MatchLedger> {
    config.validate()?;
    let mut matcher = Matcher::new(config.constellations.clone());
    for_each_prime(config.limit, config.segment_size, config.threads, |p| {
        matcher.push(p);
        ControlFlow::Continue(())
    })?;
    Ok(matcher.into_ledger(config.limit))
}

/// Smallest first prime of a copy of `s` whose last prime is `<= limit`.
pub fn first_occurrence(s: &Constellation, limit: u64) -> Result<Option<u64>> {
    let mut matcher = Matcher::new(vec![s.clone()]);
    for_each_prime(limit, DEFAULT_SEGMENT_BYTES, 1, |p| {
        if matcher.push(p) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(matcher.starts[0].first().copied())
}

/// Cnt(q, s) for every checkpoint and constellation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointTable {
    pub checkpoints: Vec<u64>,
    pub constellations: Vec<Constellation>,
    /// `counts[c][i]` is Cnt(checkpoints[i], constellations[c]).
    pub counts: Vec<Vec<u64>>,
}

impl CheckpointTable {
    pub fn count(&self, q: u64, s: &Constellation) -> Option<u64> {
        let i = self.checkpoints.binary_search(&q).ok()?;
        let c = self.constellations.iter().position(|x| x == s)?;
        Some(self.counts[c][i])
    }
}

/// A copy starting at `m` with span σ lies in `[q, q²]` exactly for the
/// checkpoints with `√(m + σ) <= q <= m`, a contiguous index range; each copy
/// adds one over that range of a difference array.
pub fn interval_counts(ledger: &MatchLedger, checkpoints: &[u64]) -> Result<CheckpointTable> {
    check_checkpoints(checkpoints, ledger.limit)?;
    let n = checkpoints.len();
    let mut counts = Vec::with_capacity(ledger.entries.len());
    for (s, starts) in &ledger.entries {
        let sigma = s.sigma();
        let mut diff = vec![0i64; n + 1];
        for &m in starts {
            let end = m + sigma;
            let lo = checkpoints.partition_point(|&q| q * q < end);
            let hi = checkpoints.partition_point(|&q| q <= m);
            if lo < hi {
                diff[lo] += 1;
                diff[hi] -= 1;
            }
        }
        let mut running = 0i64;
        counts.push(
            diff[..n]
                .iter()
                .map(|d| {
                    running += d;
                    running as u64
                })
                .collect(),
        );
    }
    Ok(CheckpointTable {
        checkpoints: checkpoints.to_vec(),
        constellations: ledger.entries.iter().map(|(c, _)| c.clone()).collect(),
        counts,
    })
}

/// Binary ledger: per constellation, `GSLD`, version byte, u16 text length,
/// text, u64 count, then the starts; all little-endian.
pub fn write_ledger<W: Write>(ledger: &MatchLedger, mut w: W) -> Result<()> {
    for (s, starts) in &ledger.entries {
        let text = s.to_string();
        let len = u16::try_from(text.len())
            .map_err(|_| Error::Ledger("constellation text too long".into()))?;
        w.write_all(LEDGER_MAGIC)?;
        w.write_all(&[LEDGER_VERSION])?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(text.as_bytes())?;
        w.write_all(&(starts.len() as u64).to_le_bytes())?;
        for m in starts {
            w.write_all(&m.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_ledger<R: Read>(mut r: R, limit: u64) -> Result<MatchLedger> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor { rest: &bytes };
    let mut entries = Vec::new();
    while !cur.rest.is_empty() {
        if cur.take(4)? != LEDGER_MAGIC {
            return Err(Error::Ledger("bad magic".into()));
        }
        let version = cur.take(1)?[0];
        if version != LEDGER_VERSION {
            return Err(Error::Ledger(format!("unsupported version {version}")));
        }
        let len = u16::from_le_bytes(cur.array()?) as usize;
        let text = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Ledger("text is not UTF-8".into()))?;
        let s = Constellation::parse(text)?;
        let count = u64::from_le_bytes(cur.array()?);
        let mut starts = Vec::with_capacity(count.min(1 << 20) as usize);
        for _ in 0..count {
            starts.push(u64::from_le_bytes(cur.array()?));
        }
        entries.push((s, starts));
    }
    Ok(MatchLedger { limit, entries })
}

struct Cursor<'a> {
    rest: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.rest.len() < n {
            return Err(Error::Ledger("truncated section".into()));
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}
