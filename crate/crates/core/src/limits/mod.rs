//! Weak limits of powers on the finite level algebra.
//!
//! A weak limit `T^{n_k} → Σ a_z T^z + c Θ` is estimated by fitting the
//! correlation table at shift `n_k` as a convex combination of the tables at
//! shifts `z ∈ [-Z, Z]` and the product table `ν(A) ν(B)`.
//!
//! Shift sequences follow `H_j = -(L_j + s_j^min)`, `s_j^min` the smallest
//! spacer over the first `r_j - 1` columns, with `L_j` the level count.
//! Everything produced here is numerical evidence computed at finite depth.

mod cascade;
mod similarity;
pub mod solver;

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use num_traits::ToPrimitive;

use crate::construction::{heights, ConstructionParams, WindowSet};
use crate::error::{invalid, Result};
use crate::scalar::Real;
use crate::tower::{build_labels, depth_for_levels, CorrelationMatrix, TowerModel};

pub use cascade::{divisibility_cascade, flatness_consequence, Cascade, CascadeLevel, FlatnessReport};
pub use similarity::{is_pq_similar, SimilarityTolerance, SimilarityVerdict};
pub use solver::{project_simplex, simplex_least_squares, SimplexSolution, SolverOptions};
use solver::objective;

/// Support threshold τ.
pub const DEFAULT_SUPPORT_TOL: f64 = 0.02;
pub const DEFAULT_COEFF_TOL: f64 = 0.02;
pub const DEFAULT_STABILITY_TOL: f64 = 0.02;
pub const DEFAULT_RESIDUAL_TOL: f64 = 0.05;
pub const DEFAULT_WINDOW: usize = 8;

/// Coefficients below this are treated as rounding and clamped to zero.
const NEGATIVE_CLAMP: f64 = 1e-9;

/// Truncated limit `Σ_{|z| ≤ Z} a_z T^z + c Θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitPolynomial<F> {
    window: usize,
    coeffs: Vec<F>,
    theta: F,
    residual: F,
}

impl<F: Real> LimitPolynomial<F> {
    /// Zero polynomial on window `Z`.
    pub fn zero(window: usize) -> Self {
        LimitPolynomial {
            window,
            coeffs: vec![F::zero(); 2 * window + 1],
            theta: F::zero(),
            residual: F::zero(),
        }
    }

    pub fn identity(window: usize) -> Self {
        Self::from_terms(window, &[(0, F::one())], F::zero()).expect("0 in window")
    }

    /// Build from `(z, a_z)` pairs; repeated shifts accumulate.
    pub fn from_terms(window: usize, terms: &[(i64, F)], theta: F) -> Result<Self> {
        let mut p = Self::zero(window);
        for &(z, a) in terms {
            if z.unsigned_abs() as usize > window {
                return Err(invalid(format!("shift {z} outside window {window}")));
            }
            if a < F::zero() || theta < F::zero() {
                return Err(invalid("limit coefficients must be nonnegative"));
            }
            let i = p.index(z);
            p.coeffs[i] = p.coeffs[i] + a;
        }
        p.theta = theta;
        Ok(p)
    }

    fn index(&self, z: i64) -> usize {
        (z + self.window as i64) as usize
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// `a_z`, zero outside the window.
    pub fn coeff(&self, z: i64) -> F {
        if z.unsigned_abs() as usize > self.window {
            F::zero()
        } else {
            self.coeffs[self.index(z)]
        }
    }

    pub fn theta(&self) -> F {
        self.theta
    }

    pub fn residual(&self) -> F {
        self.residual
    }

    /// `(z, a_z)` for every shift in the window.
    pub fn terms(&self) -> impl Iterator<Item = (i64, F)> + '_ {
        let w = self.window as i64;
        self.coeffs.iter().enumerate().map(move |(i, &a)| (i as i64 - w, a))
    }

    pub fn total_mass(&self) -> F {
        self.coeffs.iter().fold(self.theta, |s, &a| s + a)
    }

    /// `{z : a_z > τ}`.
    pub fn support(&self, tau: F) -> BTreeSet<i64> {
        self.terms().filter(|&(_, a)| a > tau).map(|(z, _)| z).collect()
    }

    /// Largest coefficient difference, including the theta component.
    pub fn max_gap(&self, other: &Self) -> F {
        let w = self.window.max(other.window) as i64;
        (-w..=w)
            .map(|z| (self.coeff(z) - other.coeff(z)).abs())
            .fold((self.theta - other.theta).abs(), F::max)
    }

    /// Rows `z,a_z` for the window, then `theta,c` and `residual,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,a_z\n");
        for (z, a) in self.terms() {
            let _ = writeln!(out, "{z},{a}");
        }
        let _ = writeln!(out, "theta,{}", self.theta);
        let _ = writeln!(out, "residual,{}", self.residual);
        out
    }
}

/// Terms below this are left out of the text rendering (not the CSV).
const DISPLAY_CUTOFF: f64 = 5e-5;

impl<F: Real> fmt::Display for LimitPolynomial<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cut = F::lit(DISPLAY_CUTOFF);
        let mut first = true;
        for (z, a) in self.terms().filter(|&(_, a)| a >= cut) {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if z == 0 {
                write!(f, "{a:.4}·I")?;
            } else {
                write!(f, "{a:.4}·T^{z}")?;
            }
        }
        if self.theta >= cut {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{:.4}·Θ", self.theta)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Set of shifts carrying mass above τ, tagged with the limit it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    /// Power `d` of the `P_{d,m}` limit.
    pub power: i64,
    /// Offset `m` inside the windows.
    pub offset: usize,
    pub shifts: BTreeSet<i64>,
}

impl SupportSet {
    pub fn new(power: i64, offset: usize, shifts: impl IntoIterator<Item = i64>) -> Self {
        SupportSet {
            power,
            offset,
            shifts: shifts.into_iter().collect(),
        }
    }

    pub fn of<F: Real>(limit: &LimitPolynomial<F>, power: i64, offset: usize, tau: F) -> Self {
        SupportSet {
            power,
            offset,
            shifts: limit.support(tau),
        }
    }
}

fn frob_dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (&x, &y)| s + x * y)
}

fn theta_table<F: Real>(target: &CorrelationMatrix<F>) -> Vec<F> {
    let n = target.size();
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            out.push(target.marginal(a) * target.marginal(b));
        }
    }
    out
}

/// Fit `C_n ≈ Σ_{|z|≤Z} a_z C_z + c M_Θ` over the simplex, `M_Θ(A,B) = ν(A)ν(B)`.
///
/// `basis` holds `C_z` for `z = -Z..=Z` in order. The reported residual is
/// the relative Frobenius deviation `‖C_n − fit‖ / ‖C_n‖`.
pub fn fit_limit_polynomial<F: Real>(
    target: &CorrelationMatrix<F>,
    basis: &[CorrelationMatrix<F>],
    window: usize,
    opts: SolverOptions<F>,
) -> Result<LimitPolynomial<F>> {
    fit_limit_polynomial_from(target, basis, window, None, opts)
}

/// [`fit_limit_polynomial`] warm-started from an earlier fit on a window no
/// larger than `window`. The result is never worse than `warm` itself, so
/// residuals are non-increasing along a growing sequence of windows.
pub fn fit_limit_polynomial_from<F: Real>(
    target: &CorrelationMatrix<F>,
    basis: &[CorrelationMatrix<F>],
    window: usize,
    warm: Option<&LimitPolynomial<F>>,
    opts: SolverOptions<F>,
) -> Result<LimitPolynomial<F>> {
    if basis.len() != 2 * window + 1 {
        return Err(invalid(format!(
            "basis has {} tables, window {window} needs {}",
            basis.len(),
            2 * window + 1
        )));
    }
    if window as u64 >= target.denominator() {
        return Err(invalid(format!(
            "window {window} not below tower size {}",
            target.denominator()
        )));
    }
    for (i, c) in basis.iter().enumerate() {
        let z = i as i64 - window as i64;
        if c.shift() != z || c.stage() != target.stage() || c.depth() != target.depth() {
            return Err(invalid(format!(
                "basis table {i} has shift {} stage {} depth {}, expected shift {z} stage {} depth {}",
                c.shift(),
                c.stage(),
                c.depth(),
                target.stage(),
                target.depth()
            )));
        }
    }
    let y = target.to_dense();
    let mut cols: Vec<Vec<F>> = basis.iter().map(|c| c.to_dense()).collect();
    cols.push(theta_table(target));
    let warm = match warm {
        Some(w) if w.window > window => {
            return Err(invalid(format!(
                "warm start has window {}, larger than {window}",
                w.window
            )))
        }
        Some(w) => {
            let mut x: Vec<F> = (-(window as i64)..=window as i64).map(|z| w.coeff(z)).collect();
            x.push(w.theta);
            Some(x)
        }
        None => None,
    };
    fit_dense(&y, &cols, window, warm.as_deref(), opts)
}

fn fit_dense<F: Real>(
    y: &[F],
    cols: &[Vec<F>],
    window: usize,
    warm: Option<&[F]>,
    opts: SolverOptions<F>,
) -> Result<LimitPolynomial<F>> {
    let k = cols.len();
    let scale = frob_dot(y, y);
    if scale <= F::zero() {
        return Err(invalid("target correlation table is zero"));
    }
    let mut gram = vec![F::zero(); k * k];
    for i in 0..k {
        for j in i..k {
            let g = frob_dot(&cols[i], &cols[j]) / scale;
            gram[i * k + j] = g;
            gram[j * k + i] = g;
        }
    }
    let lin: Vec<F> = cols.iter().map(|c| frob_dot(c, y) / scale).collect();
    // start from the best single column
    let best = (0..k)
        .min_by(|&a, &b| {
            let fa = gram[a * k + a] / F::lit(2.0) - lin[a];
            let fb = gram[b * k + b] / F::lit(2.0) - lin[b];
            fa.partial_cmp(&fb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let mut start = vec![F::zero(); k];
    start[best] = F::one();
    if let Some(w) = warm {
        let w = project_simplex(w);
        if objective(&gram, &lin, &w) < objective(&gram, &lin, &start) {
            start = w;
        }
    }
    let sol = simplex_least_squares(&gram, &lin, &start, opts);
    let clamp = F::lit(NEGATIVE_CLAMP);
    let x: Vec<F> = sol
        .x
        .iter()
        .map(|&v| if v < F::zero() && v >= -clamp { F::zero() } else { v })
        .collect();
    // ‖y − Xx‖² / ‖y‖² = 1 − 2 bᵀx + xᵀGx with the normalized quantities
    let mut resid = vec![F::zero(); y.len()];
    for (r, &v) in resid.iter_mut().zip(y) {
        *r = v;
    }
    for (col, &w) in cols.iter().zip(&x) {
        if w != F::zero() {
            for (r, &c) in resid.iter_mut().zip(col) {
                *r = *r - w * c;
            }
        }
    }
    let residual = (frob_dot(&resid, &resid) / scale).sqrt();
    Ok(LimitPolynomial {
        window,
        coeffs: x[..k - 1].to_vec(),
        theta: x[k - 1],
        residual,
    })
}

/// `n_k = d·H_{j_k+m}` with `H_j = -(L_j + s_j^min)`.
pub fn h_sequence(
    params: &ConstructionParams,
    d: i64,
    m: usize,
    windows: &WindowSet,
    count: usize,
) -> Result<Vec<i64>> {
    let anchors = windows.anchors(count, m, 1)?;
    h_sequence_at(params, d, m, &anchors)
}

/// Same as [`h_sequence`] for explicit anchors `j_k`.
pub fn h_sequence_at(
    params: &ConstructionParams,
    d: i64,
    m: usize,
    anchors: &[usize],
) -> Result<Vec<i64>> {
    let top = anchors.iter().map(|&j| j + m).max().unwrap_or(1);
    let table = heights(params, top)?;
    anchors
        .iter()
        .map(|&j| {
            let stage = j + m;
            let st = params.stage(stage)?;
            let l = table
                .level_count(stage)
                .to_i64()
                .ok_or_else(|| invalid(format!("L_{stage} does not fit in i64")))?;
            (l + st.s_min_leading() as i64)
                .checked_mul(-d)
                .ok_or_else(|| invalid(format!("d*H_{stage} overflows i64")))
        })
        .collect()
}

/// How deep to build towers for a limit computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthPolicy {
    /// Reference stage; default is the smallest `j` with `L_j > 2Z`.
    pub ref_stage: Option<usize>,
    /// Number of consecutive sequence terms fitted.
    pub anchors: usize,
    /// Anchors satisfy `j_k + m ≥ ref_stage + anchor_gap`.
    pub anchor_gap: usize,
    /// Tower size floor.
    pub min_levels: u64,
    /// Tower must have at least `depth_factor · max|n|` levels.
    pub depth_factor: u64,
}

impl Default for DepthPolicy {
    fn default() -> Self {
        DepthPolicy {
            ref_stage: None,
            anchors: 3,
            anchor_gap: 3,
            min_levels: 10_000,
            depth_factor: 64,
        }
    }
}

/// Smallest stage with more than `2Z` levels.
pub fn default_ref_stage(params: &ConstructionParams, window: usize) -> Result<usize> {
    depth_for_levels(params, 1, 2 * window as u64 + 1)
}

/// Tower plus its basis tables, reused across many target shifts.
pub struct LimitEngine<F> {
    model: TowerModel,
    basis: Vec<CorrelationMatrix<F>>,
    window: usize,
    opts: SolverOptions<F>,
}

impl<F: Real> LimitEngine<F> {
    pub fn new(model: TowerModel, window: usize, opts: SolverOptions<F>) -> Result<Self> {
        let w = window as i64;
        let basis = (-w..=w)
            .map(|z| model.correlation::<F>(z))
            .collect::<Result<Vec<_>>>()?;
        Ok(LimitEngine {
            model,
            basis,
            window,
            opts,
        })
    }

    /// Engine deep enough for shifts up to `max_shift` in absolute value.
    pub fn for_shifts(
        params: &ConstructionParams,
        ref_stage: usize,
        min_stage: usize,
        max_shift: u64,
        policy: &DepthPolicy,
        window: usize,
        opts: SolverOptions<F>,
    ) -> Result<Self> {
        let need = policy
            .min_levels
            .max(policy.depth_factor.saturating_mul(max_shift));
        let depth = depth_for_levels(params, min_stage.max(ref_stage), need)?;
        Self::new(build_labels(params, ref_stage, depth)?, window, opts)
    }

    pub fn model(&self) -> &TowerModel {
        &self.model
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn fit_shift(&self, n: i64) -> Result<LimitPolynomial<F>> {
        let target = self.model.correlation::<F>(n)?;
        fit_limit_polynomial(&target, &self.basis, self.window, self.opts)
    }
}

/// One term of a fitted sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceFit<F> {
    pub anchor: usize,
    pub shift: i64,
    pub limit: LimitPolynomial<F>,
}

/// Fitted `P_{d,m}` with its convergence diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakLimit<F> {
    pub power: i64,
    pub offset: usize,
    pub ref_stage: usize,
    pub depth: usize,
    pub fits: Vec<SequenceFit<F>>,
    /// Largest coefficient change between consecutive fits.
    pub stability_gap: F,
}

impl<F: Real> WeakLimit<F> {
    /// Fit at the deepest anchor.
    pub fn limit(&self) -> &LimitPolynomial<F> {
        &self.fits.last().expect("at least one fit").limit
    }

    pub fn support(&self, tau: F) -> SupportSet {
        SupportSet::of(self.limit(), self.power, self.offset, tau)
    }
}

fn stability_gap<F: Real>(fits: &[SequenceFit<F>]) -> F {
    fits.windows(2)
        .map(|w| w[0].limit.max_gap(&w[1].limit))
        .fold(F::zero(), F::max)
}

fn fit_sequence<F: Real>(
    engine: &LimitEngine<F>,
    anchors: &[usize],
    shifts: &[i64],
    power: i64,
    offset: usize,
) -> Result<WeakLimit<F>> {
    let fits = anchors
        .iter()
        .zip(shifts)
        .map(|(&anchor, &shift)| {
            Ok(SequenceFit {
                anchor,
                shift,
                limit: engine.fit_shift(shift)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeakLimit {
        power,
        offset,
        ref_stage: engine.model.ref_stage(),
        depth: engine.model.depth(),
        stability_gap: stability_gap(&fits),
        fits,
    })
}

fn resolve_anchors(
    params: &ConstructionParams,
    windows: &WindowSet,
    offset: usize,
    policy: &DepthPolicy,
    window: usize,
) -> Result<(usize, Vec<usize>)> {
    let ref_stage = match policy.ref_stage {
        Some(j) => j,
        None => default_ref_stage(params, window)?,
    };
    let anchors = windows.anchors(policy.anchors, offset, ref_stage + policy.anchor_gap)?;
    Ok((ref_stage, anchors))
}

/// `P_{d,m}(T) = lim_k T^{d H_{j_k + m}}`, fitted along consecutive anchors.
pub fn weak_limit<F: Real>(
    params: &ConstructionParams,
    d: i64,
    m: usize,
    windows: &WindowSet,
    policy: &DepthPolicy,
    window: usize,
) -> Result<WeakLimit<F>> {
    if d == 0 {
        return Err(invalid("weak_limit: power d must be nonzero"));
    }
    let (ref_stage, anchors) = resolve_anchors(params, windows, m, policy, window)?;
    let shifts = h_sequence_at(params, d, m, &anchors)?;
    let max_shift = shifts.iter().map(|n| n.unsigned_abs()).max().unwrap_or(0);
    let top = anchors.iter().max().copied().unwrap_or(1) + m + 1;
    let engine = LimitEngine::for_shifts(
        params,
        ref_stage,
        top,
        max_shift,
        policy,
        window,
        SolverOptions::default(),
    )?;
    fit_sequence(&engine, &anchors, &shifts, d, m)
}

/// `(1 − mε) I + mε P′` decomposition of a limit.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityMix<F> {
    pub epsilon: F,
    /// Normalized remainder, no mass on `I`.
    pub rest: LimitPolynomial<F>,
}

/// Match `L = (1 − mε) I + mε P′` with `ε ∈ (0, 1/m]`.
///
/// Fails when `L` is the identity within `tol` or does not have unit mass.
pub fn match_identity_mix<F: Real>(
    limit: &LimitPolynomial<F>,
    m: u32,
    tol: F,
) -> Option<IdentityMix<F>> {
    if m == 0 || (limit.total_mass() - F::one()).abs() > tol {
        return None;
    }
    let a0 = limit.coeff(0);
    let rest_mass = F::one() - a0;
    if rest_mass <= tol {
        return None;
    }
    let epsilon = rest_mass / F::from_u32(m).unwrap();
    let mut rest = limit.clone();
    let zi = rest.index(0);
    rest.coeffs[zi] = F::zero();
    let mass = rest.total_mass();
    for c in rest.coeffs.iter_mut() {
        *c = *c / mass;
    }
    rest.theta = rest.theta / mass;
    rest.residual = F::zero();
    Some(IdentityMix { epsilon, rest })
}

/// Tolerances used by the disjointness certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateConfig<F> {
    pub window: usize,
    pub policy: DepthPolicy,
    pub similarity: SimilarityTolerance<F>,
    pub stability_tol: F,
    pub residual_tol: F,
}

impl<F: Real> Default for CertificateConfig<F> {
    fn default() -> Self {
        CertificateConfig {
            window: DEFAULT_WINDOW,
            policy: DepthPolicy::default(),
            similarity: SimilarityTolerance::default(),
            stability_tol: F::lit(DEFAULT_STABILITY_TOL),
            residual_tol: F::lit(DEFAULT_RESIDUAL_TOL),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    EvidenceDisjoint,
    SimilarLimits,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::EvidenceDisjoint => "EvidenceDisjoint",
            Verdict::SimilarLimits => "SimilarLimits",
            Verdict::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

/// Numerical disjointness evidence for `T^p` and `T^q`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisjointnessVerdict<F> {
    pub verdict: Verdict,
    pub p: u64,
    pub q: u64,
    /// Base sequence `n_i = H_{j_i}`.
    pub base_shifts: Vec<i64>,
    /// Limit of `T^{q n_i}`.
    pub q_limit: WeakLimit<F>,
    /// Limit of `T^{p n_i}`.
    pub p_limit: WeakLimit<F>,
    pub similarity: SimilarityVerdict<F>,
    /// Why the verdict is not `EvidenceDisjoint`, if it is not.
    pub notes: Vec<String>,
}

/// Fit `Q = lim T^{q n_i}` and `P = lim T^{p n_i}` along `n_i = H_{j_i}` and
/// compare them for p/q-similarity.
pub fn disjointness_certificate<F: Real>(
    params: &ConstructionParams,
    p: u64,
    q: u64,
    windows: &WindowSet,
    config: &CertificateConfig<F>,
) -> Result<DisjointnessVerdict<F>> {
    if p == 0 || q == 0 || p == q {
        return Err(invalid(format!(
            "disjointness: need distinct positive p, q (got p={p}, q={q})"
        )));
    }
    if num_integer::gcd(p, q) != 1 {
        return Err(invalid(format!("disjointness: p={p} and q={q} are not coprime")));
    }
    let (ref_stage, anchors) = resolve_anchors(params, windows, 0, &config.policy, config.window)?;
    let base = h_sequence_at(params, 1, 0, &anchors)?;
    let scale = |k: u64| -> Result<Vec<i64>> {
        base.iter()
            .map(|&n| {
                n.checked_mul(k as i64)
                    .ok_or_else(|| invalid("scaled shift overflows i64"))
            })
            .collect()
    };
    let q_shifts = scale(q)?;
    let p_shifts = scale(p)?;
    let max_shift = q_shifts
        .iter()
        .chain(&p_shifts)
        .map(|n| n.unsigned_abs())
        .max()
        .unwrap_or(0);
    let top = anchors.iter().max().copied().unwrap_or(1) + 1;
    let engine = LimitEngine::for_shifts(
        params,
        ref_stage,
        top,
        max_shift,
        &config.policy,
        config.window,
        SolverOptions::default(),
    )?;
    let q_limit = fit_sequence(&engine, &anchors, &q_shifts, q as i64, 0)?;
    let p_limit = fit_sequence(&engine, &anchors, &p_shifts, p as i64, 0)?;
    let similarity = is_pq_similar(q_limit.limit(), p_limit.limit(), p, q, config.similarity)?;

    let mut notes = Vec::new();
    for (name, wl) in [("Q", &q_limit), ("P", &p_limit)] {
        if wl.stability_gap > config.stability_tol {
            notes.push(format!(
                "{name} fit unstable: gap {} > {}",
                wl.stability_gap, config.stability_tol
            ));
        }
        if wl.limit().residual() > config.residual_tol {
            notes.push(format!(
                "{name} fit residual {} > {}",
                wl.limit().residual(),
                config.residual_tol
            ));
        }
    }
    let verdict = if !notes.is_empty() {
        Verdict::Inconclusive
    } else if similarity.similar {
        notes.push("fitted limits are p/q-similar".into());
        Verdict::SimilarLimits
    } else if similarity.incomparable_mass > config.similarity.coeff {
        notes.push(format!(
            "mass {} outside the comparable range",
            similarity.incomparable_mass
        ));
        Verdict::Inconclusive
    } else {
        Verdict::EvidenceDisjoint
    };
    Ok(DisjointnessVerdict {
        verdict,
        p,
        q,
        base_shifts: base,
        q_limit,
        p_limit,
        similarity,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{find_windows, Preset, StageParams};

    fn poly(window: usize, terms: &[(i64, f64)], theta: f64) -> LimitPolynomial<f64> {
        LimitPolynomial::from_terms(window, terms, theta).unwrap()
    }

    fn engine(params: &ConstructionParams, j: usize, k: usize, window: usize) -> LimitEngine<f64> {
        LimitEngine::new(build_labels(params, j, k).unwrap(), window, SolverOptions::default())
            .unwrap()
    }

    #[test]
    fn zero_shift_fits_identity() {
        let e = engine(&Preset::Chacon.params(), 3, 9, 4);
        let fit = e.fit_shift(0).unwrap();
        assert!(fit.coeff(0) >= 1.0 - e.model().tail() - 1e-9);
        assert!(fit.residual() <= e.model().tail() + 1e-6);
    }

    #[test]
    fn product_table_fits_theta() {
        let model = build_labels(&Preset::Chacon.params(), 3, 8).unwrap();
        let basis: Vec<_> = (-4..=4).map(|z| model.correlation::<f64>(z).unwrap()).collect();
        let target = model.correlation::<f64>(0).unwrap();
        let y = theta_table(&target);
        let mut cols: Vec<Vec<f64>> = basis.iter().map(|c| c.to_dense()).collect();
        cols.push(theta_table(&target));
        let fit = fit_dense(&y, &cols, 4, None, SolverOptions::default()).unwrap();
        assert!((fit.theta() - 1.0).abs() < 1e-6, "{fit:?}");
        assert!(fit.residual() < 1e-5);
    }

    #[test]
    fn odometer_power_of_level_count_is_identity() {
        let odo = Preset::Odometer(2).params();
        let model = build_labels(&odo, 3, 10).unwrap();
        let basis: Vec<_> = (-1..=1).map(|z| model.correlation::<f64>(z).unwrap()).collect();
        let n = -32; // -L_6
        let target = model.correlation::<f64>(n).unwrap();
        let fit = fit_limit_polynomial(&target, &basis, 1, SolverOptions::default()).unwrap();
        assert!(fit.coeff(0) >= 0.9);
        let deeper = build_labels(&odo, 3, 12).unwrap();
        let basis: Vec<_> = (-1..=1).map(|z| deeper.correlation::<f64>(z).unwrap()).collect();
        let fit12 =
            fit_limit_polynomial(&deeper.correlation(n).unwrap(), &basis, 1, SolverOptions::default())
                .unwrap();
        assert!(fit12.coeff(0) >= 0.9);
    }

    #[test]
    fn fit_rejects_mismatched_basis() {
        let model = build_labels(&Preset::Chacon.params(), 2, 6).unwrap();
        let basis: Vec<_> = (-1..=1).map(|z| model.correlation::<f64>(z).unwrap()).collect();
        let t = model.correlation::<f64>(5).unwrap();
        assert!(fit_limit_polynomial(&t, &basis, 2, SolverOptions::default()).is_err());
        let tiny = build_labels(&Preset::Chacon.params(), 1, 1).unwrap();
        let b1: Vec<_> = (0..=0).map(|z| tiny.correlation::<f64>(z).unwrap()).collect();
        assert!(fit_limit_polynomial(&tiny.correlation(0).unwrap(), &b1, 1, SolverOptions::default()).is_err());
    }

    #[test]
    fn h_sequence_examples() {
        let odo = Preset::Odometer(2).params();
        let w = WindowSet::single(1, 12).unwrap();
        assert_eq!(h_sequence(&odo, 1, 0, &w, 5).unwrap(), vec![-1, -2, -4, -8, -16]);
        let chacon = Preset::Chacon.params();
        assert_eq!(h_sequence(&chacon, 1, 0, &w, 4).unwrap(), vec![-1, -4, -13, -40]);
        assert_eq!(h_sequence(&chacon, 2, 0, &w, 4).unwrap(), vec![-2, -8, -26, -80]);
        let flat3 = Preset::Flat3.params();
        assert_eq!(h_sequence(&flat3, 1, 1, &w, 2).unwrap(), vec![-6, -18]);
        assert!(h_sequence(&chacon, 1, 12, &w, 1).is_err());
    }

    #[test]
    fn identity_mix_examples() {
        let l = poly(2, &[(0, 0.9)], 0.1);
        let mix = match_identity_mix(&l, 2, 1e-9).unwrap();
        assert!((mix.epsilon - 0.05).abs() < 1e-12);
        assert!((mix.rest.theta() - 1.0).abs() < 1e-12);
        assert!(match_identity_mix(&LimitPolynomial::<f64>::identity(2), 2, 1e-9).is_none());
        let l = poly(2, &[(0, 0.4), (2, 0.6)], 0.0);
        let mix = match_identity_mix(&l, 3, 1e-9).unwrap();
        assert!((mix.epsilon - 0.2).abs() < 1e-12);
        assert!((mix.rest.coeff(2) - 1.0).abs() < 1e-12);
        assert_eq!(mix.rest.coeff(0), 0.0);
    }

    #[test]
    fn limit_polynomial_rejects_out_of_window() {
        assert!(LimitPolynomial::<f64>::from_terms(2, &[(3, 1.0)], 0.0).is_err());
        assert!(LimitPolynomial::<f64>::from_terms(2, &[(1, -0.5)], 0.0).is_err());
    }

    #[test]
    fn csv_rows() {
        let l = poly(1, &[(0, 0.5), (-1, 0.5)], 0.0);
        assert_eq!(l.to_csv(), "z,a_z\n-1,0.5\n0,0.5\n1,0\ntheta,0\nresidual,0\n");
        assert_eq!(l.to_string(), "0.5000·T^-1 + 0.5000·I");
    }

    #[test]
    fn chacon_weak_limit_has_identity_component() {
        let chacon = Preset::Chacon.params();
        let w = find_windows(&chacon, 30, 3).unwrap();
        let wl = weak_limit::<f64>(&chacon, 1, 0, &w, &DepthPolicy::default(), DEFAULT_WINDOW).unwrap();
        let lim = wl.limit();
        assert!(lim.coeff(0) >= 0.25, "{lim}");
        assert!(wl.stability_gap <= 0.02);
        assert!((lim.total_mass() - 1.0).abs() <= 1e-6);
        // (I + T)/2 for shifts -L_j
        assert!((lim.coeff(0) - 0.5).abs() < 0.02 && (lim.coeff(1) - 0.5).abs() < 0.02, "{lim}");
    }

    #[test]
    fn weak_limit_needs_long_windows() {
        let p = ConstructionParams::periodic(0, vec![StageParams::new(3, vec![0, 1, 0]).unwrap()]).unwrap();
        let short = WindowSet::single(1, 4).unwrap();
        assert!(weak_limit::<f64>(&p, 1, 0, &short, &DepthPolicy::default(), 8).is_err());
    }
}
