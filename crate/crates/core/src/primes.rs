//! Small prime utilities: stage iteration, primorials, and a plain sieve for
//! base primes. The segmented ground-truth sieve lives in [`crate::sieve`].

use num_bigint::BigUint;

/// Trial division over 6k ± 1. Only used on stage-sized inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 4 {
        return n >= 2;
    }
    if n.is_multiple_of(2) || n.is_multiple_of(3) {
        return false;
    }
    let mut d = 5u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) || n.is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n + 1;
    while !is_prime(c) {
        c += 1;
    }
    c
}

/// Largest prime strictly less than `n`, if any.
pub fn prev_prime(n: u64) -> Option<u64> {
    (2..n).rev().find(|&c| is_prime(c))
}

/// Iterator over consecutive primes starting at the first prime `>= from`.
#[derive(Debug, Clone)]
pub struct StagePrimes {
    next: u64,
}

impl StagePrimes {
    pub fn from(from: u64) -> Self {
        let next = if is_prime(from) {
            from
        } else {
            next_prime(from)
        };
        StagePrimes { next }
    }
}

impl Iterator for StagePrimes {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let p = self.next;
        self.next = next_prime(p);
        Some(p)
    }
}

/// All primes `<= limit` by an unsegmented odd-only sieve.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let limit = limit as usize;
    // index i stands for 2i + 1
    let half = limit / 2 + 1;
    let mut composite = vec![false; half];
    composite[0] = true;
    let mut i = 1;
    while (2 * i + 1) * (2 * i + 1) <= limit {
        if !composite[i] {
            let p = 2 * i + 1;
            let mut j = p * p / 2;
            while j < half {
                composite[j] = true;
                j += p;
            }
        }
        i += 1;
    }
    let mut out = vec![2u64];
    out.extend(
        composite
            .iter()
            .enumerate()
            .filter(|&(i, &c)| !c && 2 * i < limit)
            .map(|(i, _)| (2 * i + 1) as u64),
    );
    out
}

/// p# as an exact integer.
pub fn primorial(p: u64) -> BigUint {
    StagePrimes::from(2)
        .take_while(|&q| q <= p)
        .fold(BigUint::from(1u32), |acc, q| acc * q)
}

/// p# when it fits in 128 bits (p <= 101).
pub fn primorial_u128(p: u64) -> Option<u128> {
    StagePrimes::from(2)
        .take_while(|&q| q <= p)
        .try_fold(1u128, |acc, q| acc.checked_mul(q as u128))
}

/// φ(p#) = Π (q − 1) over primes q <= p.
pub fn primorial_totient(p: u64) -> Option<u128> {
    StagePrimes::from(2)
        .take_while(|&q| q <= p)
        .try_fold(1u128, |acc, q| acc.checked_mul((q - 1) as u128))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_primes() {
        assert_eq!(primes_up_to(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(primes_up_to(2), vec![2]);
        assert!(primes_up_to(1).is_empty());
        assert_eq!(primes_up_to(1_000_000).len(), 78_498);
    }

    #[test]
    fn stage_iteration() {
        let v: Vec<u64> = StagePrimes::from(5).take(4).collect();
        assert_eq!(v, vec![5, 7, 11, 13]);
        assert_eq!(StagePrimes::from(8).next(), Some(11));
        assert_eq!(prev_prime(11), Some(7));
        assert_eq!(prev_prime(2), None);
    }

    #[test]
    fn primorials() {
        assert_eq!(primorial_u128(7), Some(210));
        assert_eq!(primorial_totient(7), Some(48));
        assert_eq!(primorial_totient(23), Some(36_495_360));
        assert_eq!(primorial(13), BigUint::from(30_030u32));
    }
}
