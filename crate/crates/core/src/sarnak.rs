//! Möbius-weighted orbit sums `Σ_{i≤N} f(T^i x) μ(i)` for level observables,
//! the cyclic factor `E, TE, ..., T^{d-1}E`, and the telescoping identity
//! that passes Möbius independence from `S = T^d|_E` up to `T`:
//!
//! ```text
//! Σ_{i≤N} f(T^i x) μ(i) = Σ_{k≤N/d} f(S^k x) μ(d) μ(k) − Σ_{m≤N/d²} f(S^{dm} x) μ(d) μ(dm)
//! ```
//!
//! for prime `d`, `f` supported on `E` and `x ∈ E`. All identity checks run in
//! the observable's own scalar type, so integer and rational observables are
//! checked exactly.

use std::fmt::Write as _;

use crate::construction::{classify_with, heights, ClassLabel, ConstructionParams};
use crate::error::{invalid, Error, Result};
use crate::mobius::{is_prime, prime_factors, MobiusTable};
use crate::scalar::Weight;
use crate::tower::TowerModel;

/// Finite combination of stage-`j` level indicators. Spacers added after
/// stage `j` carry the value zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable<S> {
    stage: usize,
    coeffs: Vec<S>,
}

impl<S: Weight> Observable<S> {
    pub fn new(stage: usize, coeffs: Vec<S>) -> Result<Self> {
        if stage == 0 || coeffs.is_empty() {
            return Err(invalid("observable needs a stage >= 1 and at least one level"));
        }
        Ok(Observable { stage, coeffs })
    }

    pub fn zero(stage: usize, levels: usize) -> Result<Self> {
        Self::new(stage, vec![S::zero(); levels])
    }

    /// Constant `κ` on every stage-`j` level.
    pub fn constant(stage: usize, levels: usize, value: S) -> Result<Self> {
        Self::new(stage, vec![value; levels])
    }

    /// Indicator of a set of stage-`j` levels.
    pub fn indicator(stage: usize, levels: usize, set: &[usize]) -> Result<Self> {
        let mut coeffs = vec![S::zero(); levels];
        for &a in set {
            *coeffs
                .get_mut(a)
                .ok_or_else(|| invalid(format!("level {a} outside 0..{levels}")))? = S::one();
        }
        Self::new(stage, coeffs)
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn levels(&self) -> usize {
        self.coeffs.len()
    }

    /// `max |f|`.
    pub fn sup_norm(&self) -> S {
        self.coeffs
            .iter()
            .map(|c| c.abs())
            .fold(S::zero(), |m, c| if c > m { c } else { m })
    }

    /// Levels with a nonzero coefficient.
    pub fn support(&self) -> Vec<usize> {
        (0..self.coeffs.len())
            .filter(|&a| !self.coeffs[a].is_zero())
            .collect()
    }

    pub fn scaled(&self, k: &S) -> Self {
        Observable {
            stage: self.stage,
            coeffs: self.coeffs.iter().map(|c| c.clone() * k.clone()).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.stage != other.stage || self.levels() != other.levels() {
            return Err(invalid("observables live on different stages"));
        }
        Ok(Observable {
            stage: self.stage,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    fn check_model(&self, model: &TowerModel) -> Result<()> {
        if model.ref_stage() != self.stage || model.ref_levels() != self.levels() {
            return Err(invalid(format!(
                "observable lives on stage {} ({} levels), tower is labeled by stage {} ({} levels)",
                self.stage,
                self.levels(),
                model.ref_stage(),
                model.ref_levels()
            )));
        }
        Ok(())
    }

    /// `f` at tower position `pos`.
    #[inline]
    pub fn at(&self, model: &TowerModel, pos: usize) -> S {
        match model.reference_at(pos) {
            Some(a) => self.coeffs[a].clone(),
            None => S::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TracePoint<S> {
    pub n: u64,
    pub sum: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MobiusSum<S> {
    pub start: usize,
    pub total: S,
    /// `S_n` at `n = 10², 10³, ...` and at `N` itself.
    pub trace: Vec<TracePoint<S>>,
}

impl<S: Weight> MobiusSum<S> {
    /// `|S_N| / N` at a checkpoint.
    pub fn normalized(&self, n: u64) -> Option<f64> {
        self.trace
            .iter()
            .find(|t| t.n == n)
            .map(|t| t.sum.abs().to_f64() / n as f64)
    }

    /// Rows `N,S_N,S_N/N`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,S_N,S_N/N\n");
        for t in &self.trace {
            let _ = writeln!(out, "{},{},{}", t.n, t.sum, t.sum.to_f64() / t.n as f64);
        }
        out
    }
}

fn check_table(table: &MobiusTable, n: u64) -> Result<()> {
    if n > table.n_max() {
        return Err(invalid(format!(
            "Möbius table holds {} values, {n} needed",
            table.n_max()
        )));
    }
    Ok(())
}

/// `S_N = Σ_{i=1}^N f(T^i x) μ(i)` with `x` the tower level `start`.
pub fn mobius_weighted_sum<S: Weight>(
    model: &TowerModel,
    obs: &Observable<S>,
    start: usize,
    n: u64,
    table: &MobiusTable,
) -> Result<MobiusSum<S>> {
    obs.check_model(model)?;
    model.check_range(start, n as usize)?;
    check_table(table, n)?;
    let mut checkpoints: Vec<u64> = std::iter::successors(Some(100u64), |c| c.checked_mul(10))
        .take_while(|&c| c < n)
        .collect();
    checkpoints.push(n);
    let mut next = checkpoints.iter().copied().peekable();
    let mut sum = S::zero();
    let mut trace = Vec::with_capacity(checkpoints.len());
    for i in 1..=n {
        let mu = table.mu(i);
        if mu != 0 {
            let v = obs.at(model, start + i as usize);
            if !v.is_zero() {
                if mu > 0 {
                    sum = sum + v;
                } else {
                    sum = sum - v;
                }
            }
        }
        if next.peek() == Some(&i) {
            next.next();
            trace.push(TracePoint { n: i, sum: sum.clone() });
        }
    }
    Ok(MobiusSum {
        start,
        total: sum,
        trace,
    })
}

/// Residue classes `ℓ mod d` of the stage-`K` levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorPartition {
    d: u64,
    depth: usize,
    /// Smallest stage from which every column offset is a multiple of `d`.
    consistent_from: usize,
    classes: Vec<u32>,
}

impl FactorPartition {
    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn consistent_from(&self) -> usize {
        self.consistent_from
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn class(&self, pos: usize) -> u32 {
        self.classes[pos]
    }

    /// `pos ∈ E`.
    pub fn in_base(&self, pos: usize) -> bool {
        self.classes[pos] == 0
    }

    /// First position where `class(ℓ+1) ≠ class(ℓ) + 1 mod d`, if any.
    pub fn cyclicity_violation(&self) -> Option<usize> {
        let d = self.d as u32;
        self.classes
            .windows(2)
            .position(|w| w[1] != (w[0] + 1) % d)
    }

    /// Rows `level,class`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,class\n");
        for (l, c) in self.classes.iter().enumerate() {
            let _ = writeln!(out, "{l},{c}");
        }
        out
    }
}

/// Start offsets `Σ_{i'<i} (L_j + s_j(i'))` of the columns of stage `j`
/// inside stage `j + 1`, followed by `L_{j+1}`.
pub fn column_offsets(params: &ConstructionParams, j: usize) -> Result<Vec<u64>> {
    let l = heights(params, j)?
        .level_count_u64(j)
        .ok_or_else(|| invalid("level count exceeds u64"))?;
    let st = params.stage(j)?;
    let mut out = vec![0u64];
    let mut acc = 0u64;
    for &s in st.spacers() {
        acc += l + s as u64;
        out.push(acc);
    }
    Ok(out)
}

fn offsets_divisible(params: &ConstructionParams, j: usize, d: u64) -> Result<bool> {
    Ok(column_offsets(params, j)?.iter().all(|o| o % d == 0))
}

/// Partition into `E, TE, ..., T^{d-1}E` at depth `K` with `d` the eigenvalue
/// order. Classes are propagated stage by stage through the cutting and
/// stacking and then checked for cyclicity.
pub fn compact_factor(params: &ConstructionParams, horizon: usize, depth: usize) -> Result<FactorPartition> {
    let class = classify_with(params, horizon, None)?;
    if class.label == ClassLabel::Odometer {
        return Err(Error::OdometerCase);
    }
    let d = class.order.map(|o| o.d).unwrap_or(1);
    partition_with_order(params, d, depth)
}

/// Partition for a given order `d` (no classification step).
pub fn partition_with_order(params: &ConstructionParams, d: u64, depth: usize) -> Result<FactorPartition> {
    if d == 0 || d > u32::MAX as u64 {
        return Err(invalid(format!("factor order {d} out of range")));
    }
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    if !offsets_divisible(params, depth, d)? {
        return Err(Error::ConsistencyFailure(format!(
            "a column offset of stage {depth} is not a multiple of d = {d}: {:?}",
            column_offsets(params, depth)?
        )));
    }
    let mut from = depth;
    while from > 1 && offsets_divisible(params, from - 1, d)? {
        from -= 1;
    }
    let l_from = heights(params, from)?
        .level_count_u64(from)
        .ok_or_else(|| invalid("level count exceeds u64"))?;
    let d32 = d as u32;
    let mut classes: Vec<u32> = (0..l_from).map(|l| (l % d) as u32).collect();
    for m in from..depth {
        let st = params.stage(m)?;
        let prev = classes.len();
        for (i, &s) in st.spacers().iter().enumerate() {
            if i > 0 {
                classes.extend_from_within(..prev);
            }
            let mut last = *classes.last().expect("nonempty");
            for _ in 0..s {
                last = (last + 1) % d32;
                classes.push(last);
            }
        }
    }
    let part = FactorPartition {
        d,
        depth,
        consistent_from: from,
        classes,
    };
    if let Some(pos) = part.cyclicity_violation() {
        return Err(Error::ConsistencyFailure(format!(
            "class of level {} is not the successor of the class of level {pos}",
            pos + 1
        )));
    }
    Ok(part)
}

/// `F = Σ f_i` with `f_i` supported on `T^i E`.
pub fn decompose_observable<S: Weight>(
    obs: &Observable<S>,
    partition: &FactorPartition,
) -> Result<Vec<Observable<S>>> {
    if obs.stage < partition.consistent_from || obs.stage > partition.depth {
        return Err(Error::ConsistencyFailure(format!(
            "observable on stage {} but residues are only stable on stages {}..={}",
            obs.stage, partition.consistent_from, partition.depth
        )));
    }
    let d = partition.d as usize;
    Ok((0..d)
        .map(|i| Observable {
            stage: obs.stage,
            coeffs: obs
                .coeffs
                .iter()
                .enumerate()
                .map(|(a, c)| if a % d == i { c.clone() } else { S::zero() })
                .collect(),
        })
        .collect())
}

/// Which side of the identity a term belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    /// `f(T^i x) μ(i)`.
    Direct,
    /// `f(S^k x) μ(d) μ(k)`.
    Main,
    /// `−f(S^{dm} x) μ(d) μ(dm)`.
    Correction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term<S> {
    pub kind: TermKind,
    pub index: u64,
    pub value: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TelescopeCheck<S> {
    pub d: u64,
    /// `S = T^stride` is the map the identity is written for.
    pub stride: u64,
    pub n: u64,
    pub lhs: S,
    pub rhs: S,
    pub main: S,
    pub correction: S,
    pub equal: bool,
    /// Nonzero contributions only.
    pub terms: Vec<Term<S>>,
}

impl<S: Weight> TelescopeCheck<S> {
    /// Rows `kind,index,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,index,value\n");
        for t in &self.terms {
            let kind = match t.kind {
                TermKind::Direct => "direct",
                TermKind::Main => "main",
                TermKind::Correction => "correction",
            };
            let _ = writeln!(out, "{kind},{},{}", t.index, t.value);
        }
        out
    }
}

fn signed<S: Weight>(v: S, mu: i8) -> S {
    match mu {
        0 => S::zero(),
        1 => v,
        _ => -v,
    }
}

struct Orbit<'a, S> {
    model: &'a TowerModel,
    obs: &'a Observable<S>,
    start: usize,
    stride: u64,
}

impl<S: Weight> Orbit<'_, S> {
    /// `f(S^k x)` with `S = T^stride`.
    fn at(&self, k: u64) -> S {
        self.obs.at(self.model, self.start + (k * self.stride) as usize)
    }
}

fn check_support<S: Weight>(
    obs: &Observable<S>,
    partition: &FactorPartition,
    modulus: u64,
    start: usize,
) -> Result<()> {
    if obs.stage < partition.consistent_from || obs.stage > partition.depth {
        return Err(Error::ConsistencyFailure(format!(
            "observable stage {} outside the consistent range {}..={}",
            obs.stage, partition.consistent_from, partition.depth
        )));
    }
    if !partition.d.is_multiple_of(modulus) {
        return Err(invalid(format!(
            "partition order {} is not a multiple of {modulus}",
            partition.d
        )));
    }
    if let Some(a) = obs.support().into_iter().find(|&a| !(a as u64).is_multiple_of(partition.d)) {
        return Err(invalid(format!(
            "observable is nonzero on level {a}, outside E (residue 0 mod {})",
            partition.d
        )));
    }
    if start >= partition.classes.len() || !partition.in_base(start) {
        return Err(invalid(format!("start level {start} is not in E")));
    }
    Ok(())
}

fn telescope_strided<S: Weight>(
    orbit: &Orbit<'_, S>,
    d: u64,
    n: u64,
    table: &MobiusTable,
) -> TelescopeCheck<S> {
    let mu_d = table.mu(d);
    let mut terms = Vec::new();
    let mut lhs = S::zero();
    for i in 1..=n {
        let v = signed(orbit.at(i), table.mu(i));
        if !v.is_zero() {
            lhs = lhs + v.clone();
            terms.push(Term { kind: TermKind::Direct, index: i, value: v });
        }
    }
    let mut main = S::zero();
    for k in 1..=n / d {
        let v = signed(signed(orbit.at(d * k), table.mu(k)), mu_d);
        if !v.is_zero() {
            main = main + v.clone();
            terms.push(Term { kind: TermKind::Main, index: k, value: v });
        }
    }
    let mut correction = S::zero();
    for m in 1..=n / (d * d) {
        let v = -signed(signed(orbit.at(d * d * m), table.mu(d * m)), mu_d);
        if !v.is_zero() {
            correction = correction + v.clone();
            terms.push(Term { kind: TermKind::Correction, index: m, value: v });
        }
    }
    let rhs = main.clone() + correction.clone();
    TelescopeCheck {
        d,
        stride: orbit.stride,
        n,
        equal: lhs == rhs,
        lhs,
        rhs,
        main,
        correction,
        terms,
    }
}

/// Evaluate both sides of the prime-extension identity for prime `d`.
pub fn telescope_identity_check<S: Weight>(
    model: &TowerModel,
    partition: &FactorPartition,
    f: &Observable<S>,
    d: u64,
    start: usize,
    n: u64,
    table: &MobiusTable,
) -> Result<TelescopeCheck<S>> {
    if !is_prime(d) {
        return Err(invalid(format!("telescope identity needs a prime d (got {d})")));
    }
    f.check_model(model)?;
    check_support(f, partition, d, start)?;
    model.check_range(start, n as usize)?;
    check_table(table, n)?;
    let orbit = Orbit { model, obs: f, start, stride: 1 };
    Ok(telescope_strided(&orbit, d, n, table))
}

/// Composite `d`: one identity per prime factor (nondecreasing), the `t`-th
/// written for `S_t = T^{p_1 ⋯ p_{t-1}}` on the first `N / (p_1 ⋯ p_{t-1})` steps.
pub fn telescope_chain<S: Weight>(
    model: &TowerModel,
    partition: &FactorPartition,
    f: &Observable<S>,
    start: usize,
    n: u64,
    table: &MobiusTable,
) -> Result<Vec<TelescopeCheck<S>>> {
    let d = partition.d;
    if d < 2 {
        return Err(invalid("trivial factor: nothing to telescope"));
    }
    f.check_model(model)?;
    check_support(f, partition, d, start)?;
    model.check_range(start, n as usize)?;
    check_table(table, n)?;
    let mut stride = 1u64;
    let mut out = Vec::new();
    for p in prime_factors(d) {
        let orbit = Orbit { model, obs: f, start, stride };
        out.push(telescope_strided(&orbit, p, n / stride, table));
        stride *= p;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionLevel<S> {
    pub u: u32,
    /// `μ(d) Σ_{k ≤ N/d^u} f(T^{d^u k} x) μ(k)`.
    pub term: S,
    /// `Σ_{k ≤ N/d^{u+1}} f(T^{d^{u+1} k} x) μ(dk)`, what is left after `u` unfoldings.
    pub remainder: S,
    /// `N ‖f‖ / d^u`, as numerator and denominator.
    pub bound_numerator: S,
    pub bound_denominator: u64,
}

impl<S: Weight> ExtensionLevel<S> {
    pub fn bound(&self) -> f64 {
        self.bound_numerator.to_f64() / self.bound_denominator as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionReport<S> {
    pub d: u64,
    pub n: u64,
    pub sum: S,
    pub levels: Vec<ExtensionLevel<S>>,
    /// `S_N = Σ_u term_u + remainder_M` exactly.
    pub exact: bool,
    /// `|S_N| ≤ Σ_u |term_u| + N ‖f‖ / d^M`.
    pub bound_holds: bool,
}

/// Unfold the telescoping `M` times.
#[allow(clippy::too_many_arguments)]
pub fn prime_extension_report<S: Weight>(
    model: &TowerModel,
    partition: &FactorPartition,
    f: &Observable<S>,
    d: u64,
    start: usize,
    n: u64,
    unfold: u32,
    table: &MobiusTable,
) -> Result<ExtensionReport<S>> {
    if !is_prime(d) {
        return Err(invalid(format!("prime extension needs a prime d (got {d})")));
    }
    if unfold == 0 {
        return Err(invalid("recursion depth M must be at least 1"));
    }
    f.check_model(model)?;
    check_support(f, partition, d, start)?;
    model.check_range(start, n as usize)?;
    check_table(table, n)?;
    let orbit = Orbit { model, obs: f, start, stride: 1 };
    let mu_d = table.mu(d);
    // R_u = Σ_{k ≤ N/d^u} f(T^{d^u k} x) μ(dk)
    let remainder = |du: u64| -> S {
        (1..=n / du).fold(S::zero(), |s, k| s + signed(orbit.at(du * k), table.mu(d * k)))
    };
    let mut sum = S::zero();
    for i in 1..=n {
        sum = sum + signed(orbit.at(i), table.mu(i));
    }
    let norm = f.sup_norm();
    let big_n = <S as Weight>::from_u64(n);
    let mut levels = Vec::with_capacity(unfold as usize);
    let mut du = 1u64;
    for u in 1..=unfold {
        du = du.saturating_mul(d);
        let term = signed(
            (1..=n / du).fold(S::zero(), |s, k| s + signed(orbit.at(du * k), table.mu(k))),
            mu_d,
        );
        levels.push(ExtensionLevel {
            u,
            term,
            remainder: remainder(du.saturating_mul(d)),
            bound_numerator: big_n.clone() * norm.clone(),
            bound_denominator: du,
        });
    }
    let last = levels.last().expect("unfold >= 1");
    let terms_total = levels.iter().fold(S::zero(), |s, l| s + l.term.clone());
    let exact = terms_total + last.remainder.clone() == sum;
    let abs_terms = levels.iter().fold(S::zero(), |s, l| s + l.term.abs());
    let scale = <S as Weight>::from_u64(last.bound_denominator);
    let bound_holds = scale * (sum.abs() - abs_terms) <= last.bound_numerator;
    Ok(ExtensionReport {
        d,
        n,
        sum,
        levels,
        exact,
        bound_holds,
    })
}
