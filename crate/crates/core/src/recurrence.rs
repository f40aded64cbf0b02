//! Exact evolution of constellation counts across sieve stages.
//!
//! For a constellation `s` of `j` gaps, once `j < p_{k+1} − 1` and
//! `σ(s) < 2·p_{k+1}`, the count in the next cycle is
//!
//! ```text
//! N_{p_{k+1}}(s) = (p_{k+1} − (j + 1)) · N_{p_k}(s) + Σ_{s̄ ∈ drivers(s)} N_{p_k}(s̄)
//! ```
//!
//! The drivers of every node are themselves closure nodes, so the whole
//! closure advances together. Exact mode keeps big integers; density mode
//! keeps `N / p#`, which is the same recurrence divided by `p_{k+1}`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::constellation::{
    closure_with_budget, ClosureGraph, Constellation, DEFAULT_CLOSURE_BUDGET,
};
use crate::error::{Error, Result};
use crate::gapcycle::{CycleBuilder, GapCycle};
use crate::primes::{is_prime, next_prime, primorial, StagePrimes};

/// Stages above this must run in density mode.
pub const DEFAULT_EXACT_CAP: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Density,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(BigUint),
    Density(f64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(n) => write!(f, "{n}"),
            Value::Density(x) => write!(f, "{x:?}"),
        }
    }
}

#[derive(Debug, Clone)]
enum Values {
    Exact(Vec<BigUint>),
    Density(Vec<f64>),
}

/// Counts (or densities) of every closure node at one stage.
#[derive(Debug, Clone)]
pub struct StageCounts {
    graph: Arc<ClosureGraph>,
    stage_prime: u64,
    values: Values,
}

/// Whether the counting recurrence applies to every node when stepping past `stage`.
pub fn conditions_hold(graph: &ClosureGraph, stage: u64) -> bool {
    let next = next_prime(stage);
    (graph.max_node_len() as u64) + 1 < next && graph.sigma() < 2 * next
}

/// Smallest buildable stage from which the recurrence applies to the whole closure.
pub fn default_init_stage(graph: &ClosureGraph, builder: &CycleBuilder) -> Result<u64> {
    StagePrimes::from(2)
        .take_while(|&p| p <= builder.max_stage())
        .find(|&p| conditions_hold(graph, p))
        .ok_or_else(|| Error::NoInitStage {
            constellation: graph.root().to_string(),
            needed_next: (graph.max_node_len() as u64 + 2).max(graph.sigma() / 2 + 1),
        })
}

/// Seeds every closure node by scanning G(P#).
pub fn init_counts(
    graph: Arc<ClosureGraph>,
    init_prime: u64,
    builder: &CycleBuilder,
) -> Result<StageCounts> {
    if !is_prime(init_prime) {
        return Err(Error::NotPrime(init_prime));
    }
    if !conditions_hold(&graph, init_prime) {
        return Err(Error::InitConditions {
            constellation: graph.root().to_string(),
            stage: init_prime,
        });
    }
    let cycle = builder.build(init_prime)?;
    init_counts_from_cycle(graph, &cycle)
}

pub fn init_counts_from_cycle(graph: Arc<ClosureGraph>, cycle: &GapCycle) -> Result<StageCounts> {
    if !conditions_hold(&graph, cycle.stage_prime()) {
        return Err(Error::InitConditions {
            constellation: graph.root().to_string(),
            stage: cycle.stage_prime(),
        });
    }
    let tally = cycle.tally_windows(graph.sigma());
    let values = graph
        .nodes()
        .iter()
        .map(|node| {
            let key: Option<Vec<u8>> = node.gaps().iter().map(|&g| u8::try_from(g).ok()).collect();
            let n = key.and_then(|k| tally.get(&k).copied()).unwrap_or(0);
            BigUint::from(n)
        })
        .collect();
    Ok(StageCounts {
        graph,
        stage_prime: cycle.stage_prime(),
        values: Values::Exact(values),
    })
}

impl StageCounts {
    pub fn stage_prime(&self) -> u64 {
        self.stage_prime
    }

    pub fn graph(&self) -> &Arc<ClosureGraph> {
        &self.graph
    }

    pub fn mode(&self) -> Mode {
        match self.values {
            Values::Exact(_) => Mode::Exact,
            Values::Density(_) => Mode::Density,
        }
    }

    pub fn value(&self, node: usize) -> Value {
        match &self.values {
            Values::Exact(v) => Value::Exact(v[node].clone()),
            Values::Density(v) => Value::Density(v[node]),
        }
    }

    pub fn exact(&self, node: usize) -> Option<&BigUint> {
        match &self.values {
            Values::Exact(v) => Some(&v[node]),
            Values::Density(_) => None,
        }
    }

    /// N_p(s̄) / p#, computed from exact counts when available.
    pub fn density(&self, node: usize) -> f64 {
        match &self.values {
            Values::Exact(v) => ratio_to_f64(&v[node], &primorial(self.stage_prime)),
            Values::Density(v) => v[node],
        }
    }

    pub fn root_density(&self) -> f64 {
        self.density(0)
    }

    pub fn into_density(self) -> StageCounts {
        match self.values {
            Values::Density(_) => self,
            Values::Exact(ref v) => {
                let den = primorial(self.stage_prime);
                let values = v.iter().map(|n| ratio_to_f64(n, &den)).collect();
                StageCounts {
                    values: Values::Density(values),
                    ..self
                }
            }
        }
    }

    /// One recurrence step to the next prime stage.
    pub fn advance(&self) -> StageCounts {
        let p = next_prime(self.stage_prime);
        let g = &self.graph;
        let survivors = |node: usize| p - (g.nodes()[node].len() as u64 + 1);
        let values = match &self.values {
            Values::Exact(v) => Values::Exact(
                (0..g.len())
                    .map(|t| {
                        let mut n = &v[t] * survivors(t);
                        for &(d, mult) in g.drivers(t) {
                            n += &v[d] * mult;
                        }
                        n
                    })
                    .collect(),
            ),
            Values::Density(v) => Values::Density(
                (0..g.len())
                    .map(|t| {
                        let driven: f64 = g.drivers(t).iter().map(|&(d, m)| m as f64 * v[d]).sum();
                        (survivors(t) as f64 * v[t] + driven) / p as f64
                    })
                    .collect(),
            ),
        };
        StageCounts {
            graph: Arc::clone(&self.graph),
            stage_prime: p,
            values,
        }
    }
}

/// `num / den` rounded to f64 without overflowing either operand.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = 64 + den.bits() as i64 - num.bits() as i64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-shift as i32)
}

#[derive(Debug, Clone)]
pub struct RecurrenceOptions {
    pub mode: Mode,
    pub init_stage: Option<u64>,
    pub exact_cap: u64,
    pub closure_budget: u64,
    pub builder: CycleBuilder,
}

impl Default for RecurrenceOptions {
    fn default() -> Self {
        RecurrenceOptions {
            mode: Mode::Exact,
            init_stage: None,
            exact_cap: DEFAULT_EXACT_CAP,
            closure_budget: DEFAULT_CLOSURE_BUDGET,
            builder: CycleBuilder::default(),
        }
    }
}

impl RecurrenceOptions {
    pub fn density() -> Self {
        RecurrenceOptions {
            mode: Mode::Density,
            ..Default::default()
        }
    }
}

/// Every stage from initialization through the last prime `<= q`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub graph: Arc<ClosureGraph>,
    pub stages: Vec<StageCounts>,
}

impl Trajectory {
    pub fn init_stage(&self) -> u64 {
        self.stages[0].stage_prime()
    }

    pub fn at(&self, stage: u64) -> Option<&StageCounts> {
        self.stages
            .binary_search_by_key(&stage, StageCounts::stage_prime)
            .ok()
            .map(|i| &self.stages[i])
    }

    /// `(stage, node, value)` rows; root only unless `all_nodes`.
    pub fn rows(&self, all_nodes: bool) -> Vec<(u64, &Constellation, Value)> {
        let nodes = if all_nodes { self.graph.len() } else { 1 };
        self.stages
            .iter()
            .flat_map(|sc| {
                (0..nodes).map(move |i| (sc.stage_prime(), &self.graph.nodes()[i], sc.value(i)))
            })
            .collect()
    }
}

pub fn run_to(s: &Constellation, q: u64, opts: &RecurrenceOptions) -> Result<Trajectory> {
    let graph = Arc::new(closure_with_budget(s, opts.closure_budget)?);
    run_graph_to(graph, q, opts)
}

pub fn run_graph_to(
    graph: Arc<ClosureGraph>,
    q: u64,
    opts: &RecurrenceOptions,
) -> Result<Trajectory> {
    let init = match opts.init_stage {
        Some(p) => p,
        None => default_init_stage(&graph, &opts.builder)?,
    };
    if q < init {
        return Err(Error::StageBelowInit { requested: q, init });
    }
    if opts.mode == Mode::Exact && q > opts.exact_cap {
        return Err(Error::ExactCap {
            requested: q,
            cap: opts.exact_cap,
        });
    }
    let mut current = init_counts(Arc::clone(&graph), init, &opts.builder)?;
    if opts.mode == Mode::Density {
        current = current.into_density();
    }
    let mut stages = Vec::new();
    loop {
        let next = next_prime(current.stage_prime());
        let advanced = (next <= q).then(|| current.advance());
        stages.push(current);
        match advanced {
            Some(a) => current = a,
            None => break,
        }
    }
    Ok(Trajectory { graph, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::closure;
    use crate::gapcycle::build_cycle;

    fn c(text: &str) -> Constellation {
        Constellation::parse(text).unwrap()
    }

    fn graph(text: &str) -> Arc<ClosureGraph> {
        Arc::new(closure(&c(text)).unwrap())
    }

    fn exact_root(sc: &StageCounts) -> u64 {
        sc.exact(0).unwrap().to_u64().unwrap()
    }

    #[test]
    fn init_examples() {
        let b = CycleBuilder::default();
        let sc = init_counts(graph("2"), 5, &b).unwrap();
        assert_eq!(exact_root(&sc), 3);
        let sc = init_counts(graph("66"), 7, &b).unwrap();
        assert_eq!(exact_root(&sc), 2);
        let g = graph("242");
        let sc = init_counts(Arc::clone(&g), 5, &b).unwrap();
        assert_eq!(exact_root(&sc), 1);
        let quad = g.index_of(&c("2222")).unwrap();
        assert_eq!(sc.exact(quad).unwrap(), &BigUint::zero());
    }

    #[test]
    fn init_rejects_bad_stage() {
        let b = CycleBuilder::default();
        // σ(66) = 12 needs p_{k+1} >= 7 and max node length 6 needs p_{k+1} >= 8
        assert!(matches!(
            init_counts(graph("66"), 5, &b),
            Err(Error::InitConditions { .. })
        ));
        assert!(matches!(
            init_counts(graph("66"), 9, &b),
            Err(Error::NotPrime(9))
        ));
        let tight = CycleBuilder::with_max_stage(5);
        assert!(matches!(
            default_init_stage(&graph("66"), &tight),
            Err(Error::NoInitStage { .. })
        ));
    }

    #[test]
    fn default_init_stages() {
        let b = CycleBuilder::default();
        for (text, p) in [
            ("2", 2),
            ("4", 3),
            ("6", 3),
            ("8", 5),
            ("242", 5),
            ("66", 7),
            ("666", 7),
            ("2,10,2", 7),
        ] {
            assert_eq!(default_init_stage(&graph(text), &b).unwrap(), p, "{text}");
        }
    }

    #[test]
    fn twin_growth() {
        let sc = init_counts(graph("2"), 5, &CycleBuilder::default()).unwrap();
        let n7 = sc.advance();
        assert_eq!(n7.stage_prime(), 7);
        assert_eq!(exact_root(&n7), 15);
    }

    #[test]
    fn sixty_six_at_eleven() {
        let g = graph("66");
        let sc = init_counts(Arc::clone(&g), 7, &CycleBuilder::default()).unwrap();
        let driver_sum: u64 = g
            .drivers(0)
            .iter()
            .map(|&(d, _)| sc.exact(d).unwrap().to_u64().unwrap())
            .sum();
        assert_eq!(driver_sum, 10);
        assert_eq!(exact_root(&sc.advance()), 26);
    }

    #[test]
    fn quadruplets_have_no_drivers_after_five() {
        let t = run_to(&c("242"), 23, &RecurrenceOptions::default()).unwrap();
        for w in t.stages.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert_eq!(
                b.exact(0).unwrap(),
                &(a.exact(0).unwrap() * (b.stage_prime() - 4))
            );
        }
    }

    #[test]
    fn run_to_twins() {
        let opts = RecurrenceOptions {
            init_stage: Some(5),
            ..Default::default()
        };
        let t = run_to(&c("2"), 13, &opts).unwrap();
        let got: Vec<(u64, u64)> = t
            .stages
            .iter()
            .map(|s| (s.stage_prime(), exact_root(s)))
            .collect();
        assert_eq!(got, vec![(5, 3), (7, 15), (11, 135), (13, 1485)]);
        let d = run_to(
            &c("2"),
            13,
            &RecurrenceOptions {
                mode: Mode::Density,
                ..opts
            },
        )
        .unwrap();
        let x7 = d.at(7).unwrap().root_density();
        assert!((x7 - 15.0 / 210.0).abs() < 1e-15);
    }

    #[test]
    fn run_to_errors() {
        let opts = RecurrenceOptions::default();
        assert!(matches!(
            run_to(&c("66"), 5, &opts),
            Err(Error::StageBelowInit {
                requested: 5,
                init: 7
            })
        ));
        assert!(matches!(
            run_to(&c("2"), 20_000, &opts),
            Err(Error::ExactCap { .. })
        ));
        assert!(run_to(&c("2"), 20_000, &RecurrenceOptions::density()).is_ok());
        assert!(matches!(
            run_to(&c("30,30,30,30"), 100, &opts),
            Err(Error::ClosureBudget { .. })
        ));
    }

    #[test]
    fn matches_scans_through_thirteen() {
        let cycles: Vec<GapCycle> = [7, 11, 13]
            .iter()
            .map(|&p| build_cycle(p).unwrap())
            .collect();
        for text in ["2", "6", "242", "66", "2,10,2"] {
            let t = run_to(&c(text), 13, &RecurrenceOptions::default()).unwrap();
            for cy in &cycles {
                if let Some(sc) = t.at(cy.stage_prime()) {
                    assert_eq!(
                        exact_root(sc),
                        cy.scan_count(&c(text)),
                        "{text} at {}",
                        cy.stage_prime()
                    );
                }
            }
        }
    }

    #[test]
    fn ratio_conversion() {
        let big = primorial(2000);
        assert_eq!(
            ratio_to_f64(&BigUint::from(3u32), &BigUint::from(30u32)),
            0.1
        );
        let x = ratio_to_f64(&(&big / 7u32), &big);
        assert!((x - 1.0 / 7.0).abs() < 1e-16);
        assert_eq!(ratio_to_f64(&BigUint::zero(), &big), 0.0);
    }

    #[test]
    fn value_display() {
        assert_eq!(Value::Exact(BigUint::from(26u32)).to_string(), "26");
        assert_eq!(Value::Density(0.1).to_string(), "0.1");
    }
}
