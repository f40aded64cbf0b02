//! Uniformity-based estimates of copies in `[q, q²]`, Hardy–Littlewood
//! comparison forms, and relative errors against sieve counts.

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::primes::{next_prime, prev_prime, primes_up_to};
use crate::recurrence::{StageCounts, Trajectory};

/// Recorded in report metadata: which HL form the comparison column uses.
pub const HL_FORM_TAG: &str = "asymptotic k*c*N/(ln N)^m differenced over [q, q^2]";

/// Truncation bound used by reports for c₂ and c₄.
pub const DEFAULT_HL_BOUND: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlConstants {
    pub c2: f64,
    pub c4: f64,
    pub truncation_bound: u64,
    /// Bound on how far either truncated product may sit above its limit.
    pub tail_tolerance: f64,
}

/// Π p(p−2)/(p−1)² over odd primes `p <= bound`.
pub fn twin_constant_truncated(bound: u64) -> f64 {
    primes_up_to(bound)
        .into_iter()
        .skip(1)
        .map(|p| {
            let d = (p - 1) as f64;
            (-1.0 / (d * d)).ln_1p()
        })
        .sum::<f64>()
        .exp()
}

/// Π q³(q−4)/(q−1)⁴ over primes `5 <= q <= bound`.
pub fn quadruplet_constant_truncated(bound: u64) -> f64 {
    primes_up_to(bound)
        .into_iter()
        .skip(2)
        .map(|q| {
            let q = q as f64;
            let d = (q - 1.0).powi(4);
            // q³(q − 4) = (q − 1)⁴ − (6q² − 4q + 1)
            (-(6.0 * q * q - 4.0 * q + 1.0) / d).ln_1p()
        })
        .sum::<f64>()
        .exp()
}

pub fn compute_hl_constants(bound: u64) -> Result<HlConstants> {
    if bound < 1000 {
        return Err(Error::config(format!(
            "truncation bound {bound} is below 1000"
        )));
    }
    let b = bound as f64;
    Ok(HlConstants {
        c2: twin_constant_truncated(bound),
        c4: quadruplet_constant_truncated(bound),
        truncation_bound: bound,
        // log of each tail factor is about −1/p² (c₂) or −6/p² (c₄)
        tail_tolerance: 6.0 / (b * b.ln()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlForm {
    /// 2·c₂·N/(ln N)²
    Twin,
    /// (27/2)·c₄·N/(ln N)⁴
    Quadruplet,
}

impl HlForm {
    pub fn for_constellation(s: &Constellation) -> Result<HlForm> {
        match s.gaps() {
            [2] => Ok(HlForm::Twin),
            [2, 4, 2] => Ok(HlForm::Quadruplet),
            _ => Err(Error::NoHlForm(s.to_string())),
        }
    }

    /// Asymptotic count of copies with first prime `<= n`.
    pub fn cumulative(self, consts: &HlConstants, n: f64) -> f64 {
        let l = n.ln();
        match self {
            HlForm::Twin => 2.0 * consts.c2 * n / (l * l),
            HlForm::Quadruplet => 13.5 * consts.c4 * n / (l * l * l * l),
        }
    }
}

/// F(q²) − F(q) for the constellation's HL form.
pub fn hl_interval_estimate(s: &Constellation, q: u64, consts: &HlConstants) -> Result<f64> {
    if q < 3 {
        return Err(Error::config(format!("HL interval needs q >= 3, got {q}")));
    }
    let form = HlForm::for_constellation(s)?;
    let q = q as f64;
    Ok(form.cumulative(consts, q * q) - form.cumulative(consts, q))
}

/// Est at checkpoint `q` from the density at the preceding stage:
/// `(q² − q) · N_{p_{k−1}}(s) / p_{k−1}#`.
pub fn uniform_estimate(q: u64, previous: &StageCounts) -> Result<f64> {
    if next_prime(previous.stage_prime()) != q {
        return Err(Error::config(format!(
            "stage {} does not precede checkpoint {q}",
            previous.stage_prime()
        )));
    }
    let q = q as f64;
    Ok((q * q - q) * previous.root_density())
}

/// Est at `q`, looking up the preceding stage in a trajectory.
pub fn estimate_from(trajectory: &Trajectory, q: u64) -> Result<f64> {
    let init = trajectory.init_stage();
    let prev = prev_prime(q).ok_or(Error::StageBelowInit { requested: q, init })?;
    if prev < init {
        return Err(Error::StageBelowInit { requested: q, init });
    }
    let sc = trajectory.at(prev).ok_or_else(|| {
        Error::config(format!(
            "trajectory stops before stage {prev} needed for q={q}"
        ))
    })?;
    uniform_estimate(q, sc)
}

/// (est − cnt)/cnt, undefined when nothing was counted.
pub fn percent_error(est: f64, cnt: u64) -> Option<f64> {
    (cnt > 0).then(|| (est - cnt as f64) / cnt as f64)
}

/// One (checkpoint, constellation) comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub q: u64,
    pub q_squared: u64,
    pub constellation: Constellation,
    pub count: u64,
    pub est_uniform: Option<f64>,
    pub est_hl: Option<f64>,
    pub err_uniform: Option<f64>,
    pub err_hl: Option<f64>,
}

impl EstimateRow {
    pub fn new(
        q: u64,
        constellation: Constellation,
        count: u64,
        est_uniform: Option<f64>,
        est_hl: Option<f64>,
    ) -> Self {
        EstimateRow {
            q,
            q_squared: q * q,
            constellation,
            count,
            est_uniform,
            est_hl,
            err_uniform: est_uniform.and_then(|e| percent_error(e, count)),
            err_hl: est_hl.and_then(|e| percent_error(e, count)),
        }
    }
}
