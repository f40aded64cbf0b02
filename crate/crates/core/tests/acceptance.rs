//! One PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cyclegaps::constellation::closure;
use cyclegaps::estimator::{compute_hl_constants, estimate_from, percent_error};
use cyclegaps::gapcycle::{build_cycle, GapCycle};
use cyclegaps::primes::{next_prime, primes_up_to, primorial_totient};
use cyclegaps::recurrence::{conditions_hold, run_to, RecurrenceOptions};
use cyclegaps::report::{run_compare, write_table, CompareConfig};
use cyclegaps::sieve::{
    first_occurrence, interval_counts, match_constellations, stream_primes, SieveConfig,
    DEFAULT_SEGMENT_BYTES,
};
use cyclegaps::Constellation;
use num_bigint::BigUint;

const SUITE: [&str; 10] = ["2", "4", "6", "8", "242", "2,10,2", "66", "666", "24", "42"];

const G7_DUMP: &str = "p=7 phi=48 primorial=210\n\
    10,2,4,2,4,6,2,6,4,2,4,6,6,2,6,4,2,6,4,6,8,4,2,4,2,4,8,6,4,6,2,4,6,2,6,6,4,2,4,6,2,6,4,2,4,2,10,2\n";

fn c(text: &str) -> Constellation {
    Constellation::parse(text).unwrap()
}

fn suite() -> Vec<Constellation> {
    SUITE.iter().map(|t| c(t)).collect()
}

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || {
        format!("took {elapsed:?}, budget {budget:?}")
    })
}

fn cycles(from: u64, to: u64) -> Vec<GapCycle> {
    let mut g = build_cycle(from).unwrap();
    let mut out = Vec::new();
    loop {
        let next = (g.stage_prime() < to).then(|| g.step().unwrap());
        out.push(g);
        match next {
            Some(n) => g = n,
            None => return out,
        }
    }
}

fn root_count(s: &Constellation, p: u64, init: Option<u64>) -> BigUint {
    let opts = RecurrenceOptions {
        init_stage: init,
        ..RecurrenceOptions::default()
    };
    run_to(s, p, &opts)
        .unwrap()
        .at(p)
        .unwrap()
        .exact(0)
        .unwrap()
        .clone()
}

fn fixtures() -> Check {
    let t = Instant::now();
    let g5 = build_cycle(5).unwrap();
    let g7 = build_cycle(7).unwrap();
    let elapsed = t.elapsed();
    ensure(g5.gaps() == [6, 4, 2, 4, 2, 4, 6, 2], || {
        format!("G(5#) = {:?}", g5.gaps())
    })?;
    ensure(g7.dump() == G7_DUMP, || {
        format!("G(7#) dump differs:\n{}", g7.dump())
    })?;
    within(elapsed, Duration::from_millis(1))?;
    Ok(format!("G(5#), G(7#) exact in {elapsed:?}"))
}

fn structure() -> Check {
    let t = Instant::now();
    for g in cycles(2, 19) {
        let p = g.stage_prime();
        let primorial: u64 = primes_up_to(p).iter().product();
        ensure(g.len() as u128 == primorial_totient(p).unwrap(), || {
            format!("p={p}: length")
        })?;
        ensure(g.primorial() == primorial, || format!("p={p}: sum"))?;
        ensure(g.gaps().last() == Some(&2), || {
            format!("p={p}: trailing gap")
        })?;
        let body = &g.gaps()[..g.len() - 1];
        ensure(body.iter().eq(body.iter().rev()), || {
            format!("p={p}: palindrome")
        })?;
        ensure(g.next_prime() == next_prime(p), || {
            format!("p={p}: first gap")
        })?;
    }
    let elapsed = t.elapsed();
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("p <= 19 in {elapsed:?}"))
}

fn anchored_counts() -> Check {
    let g5 = build_cycle(5).unwrap();
    let g7 = g5.step().unwrap();
    let got = [
        g5.scan_count(&c("2")),
        g5.scan_count(&c("242")),
        g7.scan_count(&c("66")),
    ];
    ensure(got == [3, 1, 2], || format!("scans {got:?}"))?;
    let n11 = root_count(&c("66"), 11, Some(7));
    ensure(n11 == BigUint::from(26u8), || format!("N_11(66) = {n11}"))?;
    Ok("N5(2)=3 N5(242)=1 N7(66)=2 N11(66)=26".into())
}

fn oracle_equivalence() -> Check {
    let t = Instant::now();
    let stages: Vec<GapCycle> = cycles(7, 19)
        .into_iter()
        .filter(|g| g.stage_prime() != 2)
        .collect();
    let mut compared = 0;
    for s in suite() {
        let graph = closure(&s).unwrap();
        let traj = run_to(&s, 19, &RecurrenceOptions::default()).unwrap();
        for g in &stages {
            let p = g.stage_prime();
            if !conditions_hold(&graph, p) && traj.at(p).is_none() {
                continue;
            }
            let Some(sc) = traj.at(p) else {
                return Err(format!("{s}: no recurrence value at {p}"));
            };
            let scan = BigUint::from(g.scan_count(&s));
            let rec = sc.exact(0).unwrap();
            ensure(*rec == scan, || {
                format!("{s} at {p}: recurrence {rec} vs scan {scan}")
            })?;
            compared += 1;
        }
    }
    let elapsed = t.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "{compared} (constellation, stage) pairs equal in {elapsed:?}"
    ))
}

fn worked_estimates() -> Check {
    let traj = run_to(&c("2"), 11, &RecurrenceOptions::default()).unwrap();
    let e7 = estimate_from(&traj, 7).unwrap();
    let e11 = estimate_from(&traj, 11).unwrap();
    let want7 = 42.0 * 3.0 / 30.0;
    let want11 = 110.0 * 15.0 / 210.0;
    ensure((e7 - want7).abs() <= 1e-9 * want7, || {
        format!("Est_7(2) = {e7}")
    })?;
    ensure((e11 - want11).abs() <= 1e-9 * want11, || {
        format!("Est_11(2) = {e11}")
    })?;
    let ledger = match_constellations(&SieveConfig::new(1000, vec![c("2")])).unwrap();
    let table = interval_counts(&ledger, &[7, 11]).unwrap();
    let (c7, c11) = (table.count(7, &c("2")), table.count(11, &c("2")));
    ensure(c7 == Some(4) && c11 == Some(8), || {
        format!("Cnt = {c7:?}, {c11:?}")
    })?;
    let err = percent_error(e7, 4).unwrap();
    ensure((err - 0.05).abs() < 1e-12, || format!("err_7 = {err}"))?;
    Ok(format!("Est_7={e7} Cnt_7=4 Est_11={e11:.6} Cnt_11=8"))
}

fn trial_primes(limit: u64) -> Vec<u64> {
    (2..=limit)
        .filter(|&n| (2..).take_while(|d| d * d <= n).all(|d| n % d != 0))
        .collect()
}

fn sieve_correctness() -> Check {
    const LIMIT: u64 = 1_000_000;
    let oracle = trial_primes(LIMIT);
    let t = Instant::now();
    let primes: Vec<u64> = stream_primes(LIMIT, DEFAULT_SEGMENT_BYTES)
        .unwrap()
        .collect();
    let cfg = SieveConfig::new(LIMIT, suite());
    let qs = cfg.checkpoint_primes().unwrap();
    let table = interval_counts(&match_constellations(&cfg).unwrap(), &qs).unwrap();
    let elapsed = t.elapsed();
    ensure(primes == oracle, || "prime lists differ".into())?;
    for s in suite() {
        let j = s.len();
        let starts: Vec<(u64, u64)> = oracle
            .windows(j + 1)
            .filter(|w| {
                w.windows(2)
                    .zip(s.gaps())
                    .all(|(p, &g)| p[1] - p[0] == g as u64)
            })
            .map(|w| (w[0], w[j]))
            .collect();
        for &q in &qs {
            let want = starts
                .iter()
                .filter(|&&(a, b)| a >= q && b <= q * q)
                .count() as u64;
            let got = table.count(q, &s);
            ensure(got == Some(want), || {
                format!("{s} at q={q}: {got:?} vs {want}")
            })?;
        }
    }
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!(
        "{} primes, {} checkpoints x {} patterns in {elapsed:?}",
        primes.len(),
        qs.len(),
        SUITE.len()
    ))
}

fn hl_constants() -> Check {
    let k = compute_hl_constants(1_000_000).unwrap();
    ensure((k.c2 - 0.6601618).abs() <= 1e-6, || {
        format!("c2 = {}", k.c2)
    })?;
    ensure((k.c4 - 0.30749).abs() <= 1e-4, || format!("c4 = {}", k.c4))?;
    Ok(format!("c2={:.9} c4={:.7}", k.c2, k.c4))
}

fn ap_constellations() -> Check {
    let t = Instant::now();
    let first66 = first_occurrence(&c("66"), 1000).unwrap();
    let cpap5 = first_occurrence(&c("30,30,30,30"), 12_000_000).unwrap();
    let elapsed = t.elapsed();
    ensure(first66 == Some(47), || format!("first 66 = {first66:?}"))?;
    ensure(
        cpap5.is_some_and(|p| (9_000_000..=11_000_000).contains(&p)),
        || format!("first 30,30,30,30 = {cpap5:?}"),
    )?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "66 at 47, 30,30,30,30 at {} in {elapsed:?}",
        cpap5.unwrap()
    ))
}

fn error_signs() -> Check {
    let t = Instant::now();
    let names = ["2", "6", "8", "66", "242"];
    let cfg = CompareConfig::new(1_000_000_000, names.iter().map(|t| c(t)).collect());
    let report = run_compare(&cfg).unwrap();
    let elapsed = t.elapsed();
    let late = |r: &&cyclegaps::EstimateRow| r.q_squared >= 100_000_000;
    let mut checked = 0;
    for r in report.rows.iter().filter(late) {
        let single = ["2", "6", "8"].iter().any(|t| r.constellation == c(t));
        if single {
            let e = r
                .err_uniform
                .ok_or_else(|| format!("{} q={}: no err", r.constellation, r.q))?;
            ensure(e > 0.0, || {
                format!("err_uniform({}, {}) = {e}", r.constellation, r.q)
            })?;
            checked += 1;
        }
        if r.constellation == c("2") {
            let h = r.err_hl.ok_or_else(|| format!("q={}: no HL err", r.q))?;
            ensure(h < 0.0, || format!("err_hl(2, {}) = {h}", r.q))?;
        }
    }
    ensure(checked > 0, || "no checkpoints with q² >= 1e8".into())?;
    let top = report.rows.iter().map(|r| r.q).max().unwrap();
    let err_at = |t: &str| {
        report
            .rows
            .iter()
            .find(|r| r.q == top && r.constellation == c(t))
            .and_then(|r| r.err_uniform)
            .unwrap_or(f64::NAN)
    };
    let (e2, e66, e242) = (err_at("2"), err_at("66"), err_at("242"));
    ensure(e2 < e66 && e66 < e242, || {
        format!("at q={top}: {e2} {e66} {e242}")
    })?;
    within(elapsed, Duration::from_secs(15 * 60))?;
    Ok(format!(
        "q={top}: err(2)={e2:.4} < err(66)={e66:.4} < err(242)={e242:.4}; {elapsed:?}"
    ))
}

fn symmetry() -> Check {
    for g in cycles(2, 19) {
        for s in suite() {
            let (a, b) = (g.scan_count(&s), g.scan_count(&s.reverse()));
            ensure(a == b, || {
                format!("scan {s} at {}: {a} vs {b}", g.stage_prime())
            })?;
        }
    }
    for s in suite() {
        let fwd = run_to(&s, 19, &RecurrenceOptions::default()).unwrap();
        let rev = run_to(&s.reverse(), 19, &RecurrenceOptions::default()).unwrap();
        for (a, b) in fwd.stages.iter().zip(&rev.stages) {
            ensure(a.exact(0) == b.exact(0), || {
                format!("N {s} at {}", a.stage_prime())
            })?;
        }
    }
    let a = run_to(&c("2,10,2"), 23, &RecurrenceOptions::default()).unwrap();
    let b = run_to(&c("242"), 23, &RecurrenceOptions::default()).unwrap();
    for p in [13, 17, 19, 23] {
        let (x, y) = (
            a.at(p).unwrap().exact(0).unwrap(),
            b.at(p).unwrap().exact(0).unwrap(),
        );
        ensure(x > y, || format!("N_{p}(2,10,2) = {x} vs N_{p}(242) = {y}"))?;
    }
    Ok("reversal symmetric for p <= 19; N(2,10,2) > N(242) for 13..23".into())
}

fn determinism() -> Check {
    let cfg = CompareConfig::new(
        10_000_000,
        vec![c("2"), c("6"), c("66"), c("242"), c("2,10,2")],
    );
    let mut runs = Vec::new();
    for _ in 0..2 {
        let mut bytes = Vec::new();
        write_table(&run_compare(&cfg).unwrap(), &mut bytes, b',').unwrap();
        runs.push(bytes);
    }
    ensure(runs[0] == runs[1], || {
        "CSV bytes differ between runs".into()
    })?;
    Ok(format!("{} identical bytes", runs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("fixture exactness", fixtures),
        ("structural invariants", structure),
        ("anchored counts", anchored_counts),
        ("recurrence equals scan", oracle_equivalence),
        ("worked estimates", worked_estimates),
        ("sieve correctness", sieve_correctness),
        ("HL constants", hl_constants),
        ("AP constellations", ap_constellations),
        ("error signs and ordering", error_signs),
        ("symmetry", symmetry),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
