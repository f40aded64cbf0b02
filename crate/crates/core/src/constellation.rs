//! Constellations (finite sequences of even gaps), their single-addition
//! preimages, and the transitive closure of those preimages.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest σ for which [`closure`] will enumerate nodes by default.
pub const DEFAULT_CLOSURE_BUDGET: u64 = 40;

/// A sequence of consecutive gaps `a_1 .. a_j`, every gap even and at least 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constellation {
    gaps: Vec<u32>,
}

impl Constellation {
    pub fn new(gaps: Vec<u32>) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::Parse {
                text: String::new(),
                token: String::new(),
                reason: "empty constellation",
            });
        }
        for &g in &gaps {
            if let Some(reason) = gap_defect(g) {
                return Err(Error::Parse {
                    text: join(&gaps),
                    token: g.to_string(),
                    reason,
                });
            }
        }
        Ok(Constellation { gaps })
    }

    /// Accepts comma-separated gaps (`"2,10,2"`) or the compact digit form
    /// where every gap is one digit (`"242"`). A lone multi-digit gap needs a
    /// trailing comma (`"30,"`).
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        let err = |token: &str, reason| Error::Parse {
            text: trimmed.to_string(),
            token: token.to_string(),
            reason,
        };
        if trimmed.is_empty() {
            return Err(err("", "empty constellation"));
        }
        let tokens: Vec<&str> = if trimmed.contains(',') {
            let body = trimmed.strip_suffix(',').unwrap_or(trimmed);
            body.split(',').map(str::trim).collect()
        } else {
            trimmed
                .char_indices()
                .map(|(i, c)| &trimmed[i..i + c.len_utf8()])
                .collect()
        };
        let mut gaps = Vec::with_capacity(tokens.len());
        for tok in tokens {
            if tok.is_empty() {
                return Err(err(tok, "empty token"));
            }
            let g: u32 = tok.parse().map_err(|_| err(tok, "not a decimal number"))?;
            if let Some(reason) = gap_defect(g) {
                return Err(err(tok, reason));
            }
            gaps.push(g);
        }
        Ok(Constellation { gaps })
    }

    pub fn gaps(&self) -> &[u32] {
        &self.gaps
    }

    /// Number of gaps, j.
    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// σ(s), the span from first to last prime of a copy.
    pub fn sigma(&self) -> u64 {
        self.gaps.iter().map(|&g| g as u64).sum()
    }

    pub fn reverse(&self) -> Constellation {
        let mut gaps = self.gaps.clone();
        gaps.reverse();
        Constellation { gaps }
    }

    /// Digit-string notation with commas only around multi-digit gaps,
    /// e.g. `242` or `2,10,2`.
    pub fn compact(&self) -> String {
        if self.gaps.iter().all(|&g| g < 10) {
            self.gaps.iter().map(|g| g.to_string()).collect()
        } else {
            self.to_string()
        }
    }

    /// Every constellation that yields `self` after one addition of adjacent
    /// gaps: each gap `a_i > 2` split into `(b, a_i − b)` with `b` even.
    pub fn preimages(&self) -> BTreeSet<Constellation> {
        let mut out = BTreeSet::new();
        for (i, &a) in self.gaps.iter().enumerate() {
            let mut b = 2;
            while b + 2 <= a {
                let mut gaps = Vec::with_capacity(self.gaps.len() + 1);
                gaps.extend_from_slice(&self.gaps[..i]);
                gaps.push(b);
                gaps.push(a - b);
                gaps.extend_from_slice(&self.gaps[i + 1..]);
                out.insert(Constellation { gaps });
                b += 2;
            }
        }
        out
    }

    /// Number of adjacent-pair additions in `self` that produce `target`.
    pub fn additions_yielding(&self, target: &Constellation) -> u32 {
        if self.len() != target.len() + 1 {
            return 0;
        }
        (0..self.len() - 1)
            .filter(|&i| {
                self.gaps[..i] == target.gaps[..i]
                    && self.gaps[i] + self.gaps[i + 1] == target.gaps[i]
                    && self.gaps[i + 2..] == target.gaps[i + 1..]
            })
            .count() as u32
    }
}

fn gap_defect(g: u32) -> Option<&'static str> {
    match g {
        0 => Some("zero gap"),
        g if g % 2 == 1 => Some("odd gap"),
        _ => None,
    }
}

fn join(gaps: &[u32]) -> String {
    gaps.iter()
        .map(|g| g.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for Constellation {
    /// Canonical comma-separated form; a single multi-digit gap keeps a
    /// trailing comma so the text parses back to the same value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&join(&self.gaps))?;
        if self.gaps.len() == 1 && self.gaps[0] >= 10 {
            f.write_str(",")?;
        }
        Ok(())
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Constellation::parse(s)
    }
}

/// Parses a constellation list: one per line, `#` starts a comment.
pub fn parse_list(text: &str) -> Result<Vec<Constellation>> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(Constellation::parse)
        .collect()
}

/// The driving-term DAG of a constellation: every even refinement of the root,
/// with an edge `s̄ -> t` whenever one addition in `s̄` produces `t`.
#[derive(Debug, Clone)]
pub struct ClosureGraph {
    nodes: Vec<Constellation>,
    index: HashMap<Constellation, usize>,
    /// `drivers[t]` lists `(s̄, multiplicity)` for every preimage of node `t`.
    drivers: Vec<Vec<(usize, u32)>>,
}

impl ClosureGraph {
    pub fn root(&self) -> &Constellation {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[Constellation] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, s: &Constellation) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn drivers(&self, node: usize) -> &[(usize, u32)] {
        &self.drivers[node]
    }

    pub fn sigma(&self) -> u64 {
        self.root().sigma()
    }

    pub fn max_node_len(&self) -> usize {
        self.nodes.iter().map(Constellation::len).max().unwrap_or(0)
    }
}

/// Node count of the closure: each gap `a` refines in `2^(a/2 − 1)` ways.
pub fn closure_size(s: &Constellation) -> u128 {
    let exp: u64 = s.gaps().iter().map(|&a| (a as u64) / 2 - 1).sum();
    if exp >= 127 {
        u128::MAX
    } else {
        1u128 << exp
    }
}

pub fn closure(s: &Constellation) -> Result<ClosureGraph> {
    closure_with_budget(s, DEFAULT_CLOSURE_BUDGET)
}

pub fn closure_with_budget(s: &Constellation, sigma_budget: u64) -> Result<ClosureGraph> {
    if s.sigma() > sigma_budget {
        return Err(Error::ClosureBudget {
            constellation: s.to_string(),
            sigma: s.sigma(),
            budget: sigma_budget,
            estimated_nodes: closure_size(s),
        });
    }
    let mut seen: BTreeSet<Constellation> = BTreeSet::new();
    let mut queue = VecDeque::from([s.clone()]);
    seen.insert(s.clone());
    let mut preimage_lists: HashMap<Constellation, BTreeSet<Constellation>> = HashMap::new();
    while let Some(t) = queue.pop_front() {
        let pre = t.preimages();
        for p in &pre {
            if seen.insert(p.clone()) {
                queue.push_back(p.clone());
            }
        }
        preimage_lists.insert(t, pre);
    }

    // root is the unique shortest node, so (len, gaps) order puts it first
    let mut nodes: Vec<Constellation> = seen.into_iter().collect();
    nodes.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let index: HashMap<Constellation, usize> = nodes
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    let drivers = nodes
        .iter()
        .map(|t| {
            preimage_lists[t]
                .iter()
                .map(|p| (index[p], p.additions_yielding(t)))
                .collect()
        })
        .collect();
    Ok(ClosureGraph {
        nodes,
        index,
        drivers,
    })
}
