//! Finite realization of a construction: the stage-`K` tower with each level
//! labeled by the stage-`j` level (or spacer) it lies in, and correlation
//! counts `ν(T^n A ∩ B)` on that labeling.
//!
//! The measure on the stage-`K` tower is uniform over its levels. Two sources
//! of error are reported: mass leaving the top of the tower under a shift
//! (at most `|n| / L_K`) and spacer mass added after stage `K` (`tail(K)`).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::construction::{heights, ConstructionParams, HeightTable};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Largest tower that will be materialized.
pub const MAX_LEVELS: u64 = 1 << 27;

/// Stages past `K` used to estimate the spacer mass still to come.
pub const TAIL_PROBE_STAGES: usize = 5;

/// Reference stages with at most this many levels get dense correlation storage.
pub const DENSE_LIMIT: usize = 64;

const SPACER_TAG: u32 = 1 << 31;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LevelLabel {
    /// Level of the reference (stage-`j`) tower.
    Reference(u32),
    /// Spacer inserted while building stage `inserted_at_stage + 1`.
    Spacer(u32),
}

impl LevelLabel {
    fn decode(code: u32) -> Self {
        if code & SPACER_TAG != 0 {
            LevelLabel::Spacer(code & !SPACER_TAG)
        } else {
            LevelLabel::Reference(code)
        }
    }

    pub fn reference(&self) -> Option<usize> {
        match self {
            LevelLabel::Reference(a) => Some(*a as usize),
            LevelLabel::Spacer(_) => None,
        }
    }
}

/// Stage-`K` tower labeled relative to reference stage `j`.
#[derive(Clone, Debug)]
pub struct TowerModel {
    ref_stage: usize,
    depth: usize,
    ref_levels: usize,
    codes: Vec<u32>,
    heights: HeightTable,
    tail: f64,
}

/// Builds the labeling by repeated cutting and stacking: stage `m` places
/// copy 1, `s_m(1)` spacers, copy 2, `s_m(2)` spacers, ..., copy `r_m`,
/// `s_m(r_m)` spacers.
pub fn build_labels(params: &ConstructionParams, j: usize, depth: usize) -> Result<TowerModel> {
    if j == 0 || depth < j {
        return Err(invalid(format!(
            "build_labels: need 1 <= j <= K, got j={j}, K={depth}"
        )));
    }
    let table = heights(params, depth)?;
    let size = table
        .level_count(depth)
        .to_u64()
        .filter(|&l| l <= MAX_LEVELS)
        .ok_or_else(|| {
            invalid(format!(
                "tower at depth {depth} has {} levels, above the limit {MAX_LEVELS}",
                table.level_count(depth)
            ))
        })?;
    let ref_levels = table.level_count_u64(j).expect("bounded by L_K") as usize;
    let mut codes: Vec<u32> = Vec::with_capacity(size as usize);
    codes.extend(0..ref_levels as u32);
    for m in j..depth {
        let st = params.stage(m)?;
        let prev = codes.len();
        for (i, &s) in st.spacers().iter().enumerate() {
            if i > 0 {
                codes.extend_from_within(..prev);
            }
            codes.extend(std::iter::repeat_n(SPACER_TAG | m as u32, s as usize));
        }
    }
    debug_assert_eq!(codes.len() as u64, size);
    let tail = tail_mass(params, &table, depth)?;
    Ok(TowerModel {
        ref_stage: j,
        depth,
        ref_levels,
        codes,
        heights: table,
        tail,
    })
}

/// Upper estimate of the relative spacer mass added after stage `K`:
/// `1 - L_K W_K / (L_{K'} W_{K'})` with `K' = K + 5` (clipped to the stages
/// the generator provides), `W_m` the relative column width at stage `m`.
fn tail_mass(params: &ConstructionParams, table: &HeightTable, depth: usize) -> Result<f64> {
    let probe = match params.available_stages() {
        Some(n) => (depth + TAIL_PROBE_STAGES).min(n + 1),
        None => depth + TAIL_PROBE_STAGES,
    };
    if probe <= depth {
        return Ok(0.0);
    }
    let deep = heights(params, probe)?;
    let mut copies = table.level_count(depth).clone();
    for m in depth..probe {
        copies *= params.stage(m)?.r();
    }
    let total = deep.level_count(probe);
    let added: BigUint = total - &copies;
    let t = Ratio::new(added, total.clone());
    let v = t.to_f64().unwrap_or(1.0);
    Ok(if v > 0.0 { v.next_up() } else { 0.0 })
}

/// Smallest depth `K ≥ from` with `L_K ≥ min_levels`.
pub fn depth_for_levels(params: &ConstructionParams, from: usize, min_levels: u64) -> Result<usize> {
    let mut l = BigUint::from(params.h1()) + 1u32;
    let mut k = 1;
    loop {
        if k >= from && l >= BigUint::from(min_levels) {
            return Ok(k);
        }
        let st = params.stage(k)?;
        l = l * st.r() + st.spacer_total();
        k += 1;
        if k > 4096 {
            return Err(invalid("depth_for_levels: no stage reaches the requested size"));
        }
    }
}

impl TowerModel {
    pub fn ref_stage(&self) -> usize {
        self.ref_stage
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn heights(&self) -> &HeightTable {
        &self.heights
    }

    /// `L_j` of the reference stage.
    pub fn ref_levels(&self) -> usize {
        self.ref_levels
    }

    /// `L_K`.
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn label(&self, pos: usize) -> LevelLabel {
        LevelLabel::decode(self.codes[pos])
    }

    pub fn labels(&self) -> impl Iterator<Item = LevelLabel> + '_ {
        self.codes.iter().map(|&c| LevelLabel::decode(c))
    }

    /// Reference level at `pos`, `None` on spacers.
    #[inline]
    pub fn reference_at(&self, pos: usize) -> Option<usize> {
        let c = self.codes[pos];
        (c & SPACER_TAG == 0).then_some(c as usize)
    }

    /// Bucket index: the reference level, or `L_j` for any spacer.
    #[inline]
    fn bucket(&self, pos: usize) -> usize {
        let c = self.codes[pos];
        if c & SPACER_TAG == 0 {
            c as usize
        } else {
            self.ref_levels
        }
    }

    /// Occurrences of each reference level, `Π_{m=j}^{K-1} r_m`.
    pub fn copies(&self) -> u64 {
        let spacers = self.codes.iter().filter(|&&c| c & SPACER_TAG != 0).count();
        ((self.len() - spacers) / self.ref_levels) as u64
    }

    pub fn spacer_count(&self) -> u64 {
        self.len() as u64 - self.copies() * self.ref_levels as u64
    }

    /// `T`-orbit labels at positions `start+1 ..= start+N`.
    pub fn orbit(&self, start: usize, steps: usize) -> Result<Vec<LevelLabel>> {
        self.check_range(start, steps)?;
        Ok((start + 1..=start + steps).map(|p| self.label(p)).collect())
    }

    pub(crate) fn check_range(&self, start: usize, steps: usize) -> Result<()> {
        if start + steps >= self.len() {
            return Err(Error::DepthTooShallow {
                needed: (start + steps) as u128,
                available: self.len() as u128,
                depth: self.depth,
            });
        }
        Ok(())
    }

    /// Raw pair counts over `(bucket(ℓ), bucket(ℓ + n))`.
    fn pair_counts(&self, n: i64) -> Result<Storage> {
        let len = self.len() as i64;
        if n.abs() >= len {
            return Err(Error::DepthTooShallow {
                needed: n.unsigned_abs() as u128,
                available: len as u128,
                depth: self.depth,
            });
        }
        let (lo, hi) = if n >= 0 { (0, len - n) } else { (-n, len) };
        let size = self.ref_levels + 1;
        if self.ref_levels <= DENSE_LIMIT {
            let mut counts = vec![0u64; size * size];
            for l in lo..hi {
                let a = self.bucket(l as usize);
                let b = self.bucket((l + n) as usize);
                counts[a * size + b] += 1;
            }
            Ok(Storage::Dense(counts))
        } else {
            let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
            for l in lo..hi {
                let a = self.bucket(l as usize);
                let b = self.bucket((l + n) as usize);
                *counts.entry((a, b)).or_insert(0) += 1;
            }
            Ok(Storage::Sparse(counts.into_iter().collect()))
        }
    }

    /// `C_n(A, B) = #{ℓ : labels[ℓ] = A, labels[ℓ+n] = B} / L_K`, with the
    /// spacer bucket as an extra row and column.
    pub fn correlation<F: Real>(&self, n: i64) -> Result<CorrelationMatrix<F>> {
        let storage = self.pair_counts(n)?;
        let denom = self.len() as u64;
        let err = n.unsigned_abs() as f64 / denom as f64 + self.tail;
        let mut marginals = vec![0u64; self.ref_levels + 1];
        for pos in 0..self.len() {
            marginals[self.bucket(pos)] += 1;
        }
        Ok(CorrelationMatrix {
            stage: self.ref_stage,
            depth: self.depth,
            shift: n,
            size: self.ref_levels + 1,
            storage,
            marginals,
            denom,
            error_bound: F::lit(err),
        })
    }
}

/// Stage-`j` reference level measures `ν(A) = copies / L_K`.
pub fn level_measures(model: &TowerModel) -> Vec<Ratio<u64>> {
    let m = Ratio::new(model.copies(), model.len() as u64);
    vec![m; model.ref_levels()]
}

pub fn correlation_matrix<F: Real>(
    params: &ConstructionParams,
    j: usize,
    depth: usize,
    n: i64,
) -> Result<CorrelationMatrix<F>> {
    build_labels(params, j, depth)?.correlation(n)
}

pub fn orbit_labels(
    params: &ConstructionParams,
    j: usize,
    depth: usize,
    start: usize,
    steps: usize,
) -> Result<Vec<LevelLabel>> {
    build_labels(params, j, depth)?.orbit(start, steps)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Storage {
    Dense(Vec<u64>),
    Sparse(BTreeMap<(usize, usize), u64>),
}

/// Finite correlation table at one shift. Indices `0..L_j` are reference
/// levels, index `L_j` is the union of all spacers added after stage `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix<F> {
    stage: usize,
    depth: usize,
    shift: i64,
    size: usize,
    storage: Storage,
    marginals: Vec<u64>,
    denom: u64,
    error_bound: F,
}

impl<F: Real> CorrelationMatrix<F> {
    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    /// Number of rows: `L_j + 1`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacer_index(&self) -> usize {
        self.size - 1
    }

    pub fn error_bound(&self) -> F {
        self.error_bound
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn count(&self, a: usize, b: usize) -> u64 {
        match &self.storage {
            Storage::Dense(v) => v[a * self.size + b],
            Storage::Sparse(m) => m.get(&(a, b)).copied().unwrap_or(0),
        }
    }

    pub fn denominator(&self) -> u64 {
        self.denom
    }

    pub fn exact(&self, a: usize, b: usize) -> Ratio<u64> {
        Ratio::new(self.count(a, b), self.denom)
    }

    pub fn get(&self, a: usize, b: usize) -> F {
        F::ratio(self.count(a, b), self.denom)
    }

    /// `ν(A)` for a bucket.
    pub fn marginal(&self, a: usize) -> F {
        F::ratio(self.marginals[a], self.denom)
    }

    pub fn marginal_count(&self, a: usize) -> u64 {
        self.marginals[a]
    }

    pub fn row_sum(&self, a: usize) -> F {
        let c: u64 = (0..self.size).map(|b| self.count(a, b)).sum();
        F::ratio(c, self.denom)
    }

    /// Nonzero entries in lexicographic `(A, B)` order.
    pub fn nonzero(&self) -> Vec<((usize, usize), u64)> {
        match &self.storage {
            Storage::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0)
                .map(|(i, &c)| ((i / self.size, i % self.size), c))
                .collect(),
            Storage::Sparse(m) => m.iter().map(|(&k, &c)| (k, c)).collect(),
        }
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<F> {
        let mut out = vec![F::zero(); self.size * self.size];
        for ((a, b), c) in self.nonzero() {
            out[a * self.size + b] = F::ratio(c, self.denom);
        }
        out
    }

    fn bucket_name(&self, a: usize) -> String {
        if a == self.spacer_index() {
            "sp".into()
        } else {
            a.to_string()
        }
    }

    /// CSV with header `A,B,value,error`, nonzero entries only.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("A,B,value,error\n");
        for ((a, b), c) in self.nonzero() {
            let v = F::ratio(c, self.denom);
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.bucket_name(a),
                self.bucket_name(b),
                v,
                self.error_bound
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::Preset;

    const B: LevelLabel = LevelLabel::Reference(0);

    fn sp(m: u32) -> LevelLabel {
        LevelLabel::Spacer(m)
    }

    #[test]
    fn chacon_words() {
        let chacon = Preset::Chacon.params();
        let m = build_labels(&chacon, 1, 2).unwrap();
        assert_eq!(m.labels().collect::<Vec<_>>(), vec![B, B, sp(1), B]);
        let m = build_labels(&chacon, 1, 3).unwrap();
        let word: Vec<_> = m.labels().collect();
        let expected = vec![B, B, sp(1), B, B, B, sp(1), B, sp(2), B, B, sp(1), B];
        assert_eq!(word, expected);
        assert_eq!(m.copies(), 9);
        assert_eq!(level_measures(&m), vec![Ratio::new(9, 13)]);
    }

    #[test]
    fn identity_labeling_at_reference_depth() {
        let m = build_labels(&Preset::Flat3.params(), 3, 3).unwrap();
        let refs: Vec<_> = (0..m.len()).map(|p| m.reference_at(p)).collect();
        assert_eq!(refs, (0..m.len()).map(Some).collect::<Vec<_>>());
        assert!(level_measures(&m).iter().all(|&x| x == Ratio::new(1, m.len() as u64)));
    }

    #[test]
    fn odometer_alternates() {
        let odo = ConstructionParams::periodic(1, vec![crate::construction::StageParams::plain(2).unwrap()])
            .unwrap();
        let m = build_labels(&odo, 1, 2).unwrap();
        let refs: Vec<_> = m.labels().map(|l| l.reference().unwrap()).collect();
        assert_eq!(refs, vec![0, 1, 0, 1]);
        assert_eq!(level_measures(&m), vec![Ratio::new(1, 2); 2]);
        let c = m.correlation::<f64>(1).unwrap();
        assert_eq!(c.exact(0, 1), Ratio::new(1, 2));
        let m4 = build_labels(&odo, 1, 4).unwrap();
        let orbit: Vec<_> = m4.orbit(0, 4).unwrap().iter().map(|l| l.reference().unwrap()).collect();
        assert_eq!(orbit, vec![1, 0, 1, 0]);
    }

    #[test]
    fn chacon_adjacent_base_pairs() {
        let c = correlation_matrix::<f64>(&Preset::Chacon.params(), 1, 3, 1).unwrap();
        assert_eq!(c.exact(0, 0), Ratio::new(4, 13));
        assert!(c.error_bound() >= 1.0 / 13.0);
        assert!(c.is_dense());
    }

    #[test]
    fn zero_shift_is_diagonal() {
        let model = build_labels(&Preset::Chacon.params(), 2, 6).unwrap();
        let c = model.correlation::<f64>(0).unwrap();
        for a in 0..c.size() {
            for b in 0..c.size() {
                if a == b {
                    assert_eq!(c.get(a, a), c.marginal(a));
                } else {
                    assert_eq!(c.count(a, b), 0);
                }
            }
        }
        assert_eq!(c.error_bound(), model.tail());
    }

    #[test]
    fn orbit_examples() {
        let chacon = Preset::Chacon.params();
        assert_eq!(orbit_labels(&chacon, 1, 3, 0, 3).unwrap(), vec![B, sp(1), B]);
        assert!(matches!(
            orbit_labels(&chacon, 1, 3, 0, 13),
            Err(Error::DepthTooShallow { .. })
        ));
        assert!(matches!(
            correlation_matrix::<f64>(&chacon, 1, 3, -13),
            Err(Error::DepthTooShallow { .. })
        ));
    }

    #[test]
    fn sparse_storage_matches_dense_counts() {
        let chacon = Preset::Chacon.params();
        // L_5 = 121 > DENSE_LIMIT
        let m = build_labels(&chacon, 5, 8).unwrap();
        let c = m.correlation::<f64>(7).unwrap();
        assert!(!c.is_dense());
        let mut oracle = 0u64;
        for l in 0..m.len() - 7 {
            if m.reference_at(l) == Some(3) && m.reference_at(l + 7) == Some(10) {
                oracle += 1;
            }
        }
        assert_eq!(c.count(3, 10), oracle);
    }

    #[test]
    fn tail_is_zero_for_odometer_positive_for_chacon() {
        assert_eq!(build_labels(&Preset::Odometer(2).params(), 1, 6).unwrap().tail(), 0.0);
        let t = build_labels(&Preset::Chacon.params(), 1, 6).unwrap().tail();
        // L_6 = 364; L_11 = 88573; 364 * 3^5 = 88452
        let exact = (88573.0 - 88452.0) / 88573.0;
        assert!(t >= exact && t < exact * (1.0 + 1e-12));
    }

    #[test]
    fn depth_selection() {
        let chacon = Preset::Chacon.params();
        assert_eq!(depth_for_levels(&chacon, 1, 10_000).unwrap(), 10); // L_10 = 29524
        assert_eq!(depth_for_levels(&chacon, 12, 10).unwrap(), 12);
    }

    #[test]
    fn csv_layout() {
        let odo = Preset::Odometer(2).params();
        let c = correlation_matrix::<f64>(&odo, 2, 3, 1).unwrap();
        let csv = c.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("A,B,value,error"));
        assert_eq!(lines.next(), Some("0,1,0.5,0.25"));
        assert_eq!(lines.next(), Some("1,0,0.25,0.25"));
        assert_eq!(lines.next(), None);
    }
}
