//! Möbius function: linear sieve, trial-division reference, residue sums.

use crate::error::{invalid, Result};

/// Sieved values of μ(1..=n_max).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MobiusTable {
    // values[0] is a placeholder; μ(0) is undefined.
    values: Vec<i8>,
}

impl MobiusTable {
    pub fn n_max(&self) -> u64 {
        (self.values.len() - 1) as u64
    }

    /// μ(n), or `None` for n = 0 and n beyond the table.
    pub fn get(&self, n: u64) -> Option<i8> {
        if n == 0 {
            return None;
        }
        self.values.get(n as usize).copied()
    }

    /// μ(n) for 1 ≤ n ≤ n_max.
    ///
    /// Panics outside that range.
    pub fn mu(&self, n: u64) -> i8 {
        assert!(n >= 1, "mu(0) is undefined");
        self.values[n as usize]
    }

    /// Σ_{n ≤ upto} μ(n).
    pub fn mertens(&self, upto: u64) -> Result<i64> {
        if upto > self.n_max() {
            return Err(invalid(format!(
                "mertens({upto}) exceeds table size {}",
                self.n_max()
            )));
        }
        Ok(self.values[1..=upto as usize].iter().map(|&v| v as i64).sum())
    }

    /// Σ_{0 < i ≤ N/p} μ(p·i).
    pub fn residue_mertens(&self, p: u64, n: u64) -> Result<i64> {
        if p == 0 {
            return Err(invalid("residue_mertens: p must be positive"));
        }
        let count = n / p;
        let last = p
            .checked_mul(count)
            .ok_or_else(|| invalid("residue_mertens: p*floor(N/p) overflows"))?;
        if last > self.n_max() {
            return Err(invalid(format!(
                "residue_mertens: p*floor(N/p) = {last} exceeds table size {}",
                self.n_max()
            )));
        }
        Ok((1..=count).map(|i| self.mu(p * i) as i64).sum())
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.values[1..]
    }
}

/// Linear sieve for μ on 1..=n_max.
pub fn sieve_mobius(n_max: u64) -> Result<MobiusTable> {
    if n_max == 0 {
        return Err(invalid("sieve_mobius: n_max must be at least 1"));
    }
    let n = usize::try_from(n_max).map_err(|_| invalid("sieve_mobius: n_max too large"))?;
    let mut values = vec![0i8; n + 1];
    let mut composite = vec![false; n + 1];
    let mut primes: Vec<usize> = Vec::new();
    values[1] = 1;
    for i in 2..=n {
        if !composite[i] {
            primes.push(i);
            values[i] = -1;
        }
        for &p in &primes {
            let ip = i * p;
            if ip > n {
                break;
            }
            composite[ip] = true;
            if i % p == 0 {
                values[ip] = 0;
                break;
            }
            values[ip] = -values[i];
        }
    }
    Ok(MobiusTable { values })
}

/// μ(n) by trial division.
pub fn mobius_direct(n: u64) -> i8 {
    assert!(n >= 1, "mu(0) is undefined");
    let mut n = n;
    let mut sign = 1i8;
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            sign = -sign;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            return false;
        }
        p += 1;
    }
    true
}

/// Prime factors with multiplicity, nondecreasing.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_integer::Integer;

    #[test]
    fn small_values() {
        let t = sieve_mobius(100).unwrap();
        assert_eq!(t.mu(1), 1);
        assert_eq!(t.mu(12), 0);
        assert_eq!(t.mu(30), -1);
        assert_eq!(mobius_direct(1), 1);
        assert_eq!(mobius_direct(4), 0);
        assert_eq!(mobius_direct(6), 1);
        assert_eq!(t.get(0), None);
        assert_eq!(t.get(101), None);
    }

    #[test]
    fn mertens_100_matches_trial_division() {
        let t = sieve_mobius(100).unwrap();
        let oracle: i64 = (1..=100).map(|n| mobius_direct(n) as i64).sum();
        assert_eq!(oracle, 1);
        assert_eq!(t.mertens(100).unwrap(), 1);
    }

    #[test]
    fn zero_size_rejected() {
        assert!(sieve_mobius(0).is_err());
    }

    #[test]
    fn residue_sums() {
        let t = sieve_mobius(100).unwrap();
        assert_eq!(t.residue_mertens(2, 4).unwrap(), -1);
        assert_eq!(t.residue_mertens(5, 4).unwrap(), 0);
        assert_eq!(t.residue_mertens(3, 9).unwrap(), 0);
        // 3 * floor(101/3) = 99 fits, 7 * floor(105/7) = 105 does not
        assert!(t.residue_mertens(3, 101).is_ok());
        assert!(t.residue_mertens(7, 105).is_err());
    }

    #[test]
    fn sieve_matches_oracle_and_multiplicativity() {
        let n_max = 10_000u64;
        let t = sieve_mobius(n_max).unwrap();
        for n in 1..=n_max {
            assert_eq!(t.mu(n), mobius_direct(n), "n = {n}");
        }
        for m in 1..=100u64 {
            for n in 1..=100u64 {
                if m.gcd(&n) == 1 {
                    assert_eq!(t.mu(m * n), t.mu(m) * t.mu(n));
                }
            }
        }
        for d in [2u64, 3, 5, 7] {
            for k in 1..=(n_max / (d * d)) {
                assert_eq!(t.mu(d * d * k), 0);
                if k % d != 0 {
                    assert_eq!(t.mu(d * k), t.mu(d) * t.mu(k));
                }
            }
        }
    }

    #[test]
    fn factorization() {
        assert_eq!(prime_factors(360), vec![2, 2, 2, 3, 3, 5]);
        assert_eq!(prime_factors(1), Vec::<u64>::new());
        assert!(is_prime(5) && !is_prime(9) && !is_prime(1));
    }
}
