//! p/q-similarity of two limit series: `Q(S) = R(S^q)` and `P(T) = R(T^p)`
//! for a common series `R`.

use crate::error::{invalid, Result};
use crate::scalar::Real;

use super::{LimitPolynomial, DEFAULT_COEFF_TOL, DEFAULT_SUPPORT_TOL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTolerance<F> {
    /// Support threshold τ.
    pub support: F,
    /// Allowed `|a^Q_{qr} − a^P_{pr}|`.
    pub coeff: F,
}

impl<F: Real> Default for SimilarityTolerance<F> {
    fn default() -> Self {
        SimilarityTolerance {
            support: F::lit(DEFAULT_SUPPORT_TOL),
            coeff: F::lit(DEFAULT_COEFF_TOL),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityVerdict<F> {
    pub similar: bool,
    /// `R_r = a^Q_{qr}` over the comparable range, plus the theta part.
    pub witness: Option<(Vec<(i64, F)>, F)>,
    pub max_coeff_gap: F,
    /// Shifts of `Q` above τ that are not multiples of `q`.
    pub q_off_lattice: Vec<i64>,
    /// Shifts of `P` above τ that are not multiples of `p`.
    pub p_off_lattice: Vec<i64>,
    /// Largest coefficient whose partner lies outside the other window.
    pub incomparable_mass: F,
}

/// Decide whether `Q` (limit of `S^{q n}`) and `P` (limit of `T^{p n}`) are
/// p/q-similar within the given tolerances.
pub fn is_pq_similar<F: Real>(
    q_lim: &LimitPolynomial<F>,
    p_lim: &LimitPolynomial<F>,
    p: u64,
    q: u64,
    tol: SimilarityTolerance<F>,
) -> Result<SimilarityVerdict<F>> {
    if p == 0 || q == 0 || num_integer::gcd(p, q) != 1 {
        return Err(invalid(format!("p={p}, q={q} must be coprime positive integers")));
    }
    let (p, q) = (p as i64, q as i64);
    let off = |lim: &LimitPolynomial<F>, k: i64| -> Vec<i64> {
        lim.support(tol.support)
            .into_iter()
            .filter(|z| z % k != 0)
            .collect()
    };
    let q_off_lattice = off(q_lim, q);
    let p_off_lattice = off(p_lim, p);

    let zq = q_lim.window() as i64;
    let zp = p_lim.window() as i64;
    let r_max = (zq / q).max(zp / p);
    let mut gap = (q_lim.theta() - p_lim.theta()).abs();
    let mut incomparable = F::zero();
    let mut witness = Vec::new();
    for r in -r_max..=r_max {
        let in_q = (q * r).abs() <= zq;
        let in_p = (p * r).abs() <= zp;
        let a = q_lim.coeff(q * r);
        let b = p_lim.coeff(p * r);
        match (in_q, in_p) {
            (true, true) => {
                gap = gap.max((a - b).abs());
                witness.push((r, a));
            }
            (true, false) => incomparable = incomparable.max(a),
            (false, true) => incomparable = incomparable.max(b),
            (false, false) => {}
        }
    }
    let similar = q_off_lattice.is_empty()
        && p_off_lattice.is_empty()
        && gap <= tol.coeff
        && incomparable <= tol.coeff;
    Ok(SimilarityVerdict {
        similar,
        witness: similar.then(|| (witness, q_lim.theta())),
        max_coeff_gap: gap,
        q_off_lattice,
        p_off_lattice,
        incomparable_mass: incomparable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(window: usize, terms: &[(i64, f64)]) -> LimitPolynomial<f64> {
        LimitPolynomial::from_terms(window, terms, 0.0).unwrap()
    }

    #[test]
    fn examples() {
        let tol = SimilarityTolerance::default();
        let q = poly(8, &[(0, 0.5), (3, 0.5)]);
        let p = poly(8, &[(0, 0.5), (2, 0.5)]);
        let v = is_pq_similar(&q, &p, 2, 3, tol).unwrap();
        assert!(v.similar);
        let (r, _) = v.witness.unwrap();
        assert!(r.contains(&(0, 0.5)) && r.contains(&(1, 0.5)));

        let v = is_pq_similar(&q, &q, 2, 3, tol).unwrap();
        assert!(!v.similar);
        assert_eq!(v.p_off_lattice, vec![3]);

        let p2 = poly(8, &[(0, 0.25), (2, 0.75)]);
        let tight = SimilarityTolerance { support: 0.02, coeff: 0.01 };
        let v = is_pq_similar(&q, &p2, 2, 3, tight).unwrap();
        assert!(!v.similar);
        assert!((v.max_coeff_gap - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_coprime() {
        let i = LimitPolynomial::<f64>::identity(4);
        assert!(is_pq_similar(&i, &i, 2, 4, SimilarityTolerance::default()).is_err());
    }

    fn random_series() -> impl Strategy<Value = Vec<(i64, f64)>> {
        prop::collection::vec((-3i64..=3, 0.01f64..1.0), 1..5).prop_map(|raw| {
            let total: f64 = raw.iter().map(|x| x.1).sum();
            raw.into_iter().map(|(r, w)| (r, w / total)).collect()
        })
    }

    proptest! {
        #[test]
        fn recovers_common_series((p, q) in prop::sample::select(vec![(2u64, 3u64), (3, 2), (1, 2), (3, 4), (2, 5), (5, 3)]),
                                  series in random_series()) {
            let window = 3 * 5;
            let lift = |k: i64| {
                let terms: Vec<_> = series.iter().map(|&(r, w)| (r * k, w)).collect();
                poly(window, &terms)
            };
            let q_lim = lift(q as i64);
            let p_lim = lift(p as i64);
            let tol = SimilarityTolerance { support: 0.02, coeff: 1e-9 };
            let v = is_pq_similar(&q_lim, &p_lim, p, q, tol).unwrap();
            prop_assert!(v.similar);
            let (witness, _) = v.witness.clone().unwrap();
            for r in -3i64..=3 {
                let expected: f64 = series.iter().filter(|x| x.0 == r).map(|x| x.1).sum();
                let got = witness.iter().find(|w| w.0 == r).map(|w| w.1).unwrap_or(0.0);
                prop_assert!((expected - got).abs() <= 1e-9);
            }
            let swapped = is_pq_similar(&p_lim, &q_lim, q, p, tol).unwrap();
            prop_assert_eq!(swapped.similar, v.similar);
        }

        #[test]
        fn verdict_is_symmetric(a in random_series(), b in random_series(),
                                (p, q) in prop::sample::select(vec![(2u64, 3u64), (3, 4), (2, 5)])) {
            let qa = poly(16, &a.iter().map(|&(z, w)| (z * q as i64, w)).collect::<Vec<_>>());
            let pb = poly(16, &b.iter().map(|&(z, w)| (z * p as i64 + (z % 2), w)).collect::<Vec<_>>());
            let tol = SimilarityTolerance::default();
            let v1 = is_pq_similar(&qa, &pb, p, q, tol).unwrap();
            let v2 = is_pq_similar(&pb, &qa, q, p, tol).unwrap();
            prop_assert_eq!(v1.similar, v2.similar);
            prop_assert!((v1.max_coeff_gap - v2.max_coeff_gap).abs() < 1e-15);
        }
    }
}
