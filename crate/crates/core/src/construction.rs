//! Rank-one construction parameters and the combinatorics that can be read
//! off them directly: heights, boundedness, windows, flatness, return times,
//! eigenvalue order and the four-way classification of bounded constructions.
//!
//! Stages are numbered from 1. The stage-`j` tower has `L_j = h_j + 1`
//! levels, and `L_{j+1} = L_j * r_j + sum_i s_j(i)`.
//!
//! "Eventually" conditions are evaluated on the tail `(H/2, H]` of a finite
//! horizon `H`; nothing here is a proof about the infinite construction.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Cutting data of one stage: `r` columns, spacer heights `s[0..r]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StageParams {
    r: u32,
    s: Vec<u32>,
}

impl StageParams {
    pub fn new(r: u32, s: Vec<u32>) -> Result<Self> {
        if r < 2 {
            return Err(invalid(format!("r must be >= 2 (got {r})")));
        }
        if s.len() != r as usize {
            return Err(invalid(format!(
                "spacer array has length {} but r = {r}",
                s.len()
            )));
        }
        Ok(StageParams { r, s })
    }

    /// `r` columns without spacers.
    pub fn plain(r: u32) -> Result<Self> {
        Self::new(r, vec![0; r as usize])
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn spacers(&self) -> &[u32] {
        &self.s
    }

    pub fn spacer_total(&self) -> u64 {
        self.s.iter().map(|&x| x as u64).sum()
    }

    pub fn s_max(&self) -> u32 {
        self.s.iter().copied().max().unwrap_or(0)
    }

    /// Minimum over the first `r - 1` columns; the top column is excluded.
    pub fn s_min_leading(&self) -> u32 {
        self.s[..self.s.len() - 1].iter().copied().min().unwrap_or(0)
    }

    fn leading_flat(&self) -> Option<u32> {
        let lead = &self.s[..self.s.len() - 1];
        lead.iter().all(|&x| x == lead[0]).then_some(lead[0])
    }

    fn all_flat(&self) -> Option<u32> {
        self.s.iter().all(|&x| x == self.s[0]).then_some(self.s[0])
    }
}

/// Source of the stage parameters `j = 1, 2, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StageGenerator {
    /// Finite list; stage `j` is `stages[j - 1]`.
    Explicit(Vec<StageParams>),
    /// Cycles through the pattern.
    Periodic(Vec<StageParams>),
    /// Independent uniform draws `r ∈ [2, r_max]`, `s(i) ∈ [0, s_max]`,
    /// reproducible per stage from the seed.
    Random { r_max: u32, s_max: u32, seed: u64 },
}

/// Named constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// `h1 = 0`, `r = p`, no spacers.
    Odometer(u32),
    /// `h1 = 0`, `r = 3`, `s = (0, 1, 0)`.
    Chacon,
    /// `h1 = 0`, `r = 3`, `s = (1, 1, 0)`.
    Flat3,
    /// `h1 = 1`, `r = 2`, `s = (0, 2)`.
    Class4,
}

impl Preset {
    pub fn from_name(name: &str) -> Option<Preset> {
        match name {
            "chacon" => Some(Preset::Chacon),
            "flat3" => Some(Preset::Flat3),
            "class4" => Some(Preset::Class4),
            _ => name
                .strip_prefix("odometer")
                .and_then(|p| p.parse::<u32>().ok())
                .filter(|&p| p >= 2)
                .map(Preset::Odometer),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Preset::Odometer(p) => format!("odometer{p}"),
            Preset::Chacon => "chacon".into(),
            Preset::Flat3 => "flat3".into(),
            Preset::Class4 => "class4".into(),
        }
    }

    pub fn params(&self) -> ConstructionParams {
        let (h1, stage) = match *self {
            Preset::Odometer(p) => (0, StageParams::plain(p)),
            Preset::Chacon => (0, StageParams::new(3, vec![0, 1, 0])),
            Preset::Flat3 => (0, StageParams::new(3, vec![1, 1, 0])),
            Preset::Class4 => (1, StageParams::new(2, vec![0, 2])),
        };
        ConstructionParams {
            h1,
            stages: StageGenerator::Periodic(vec![stage.expect("preset stage is valid")]),
            preset: Some(*self),
        }
    }
}

/// Full defining data of a rank-one construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructionParams {
    h1: u64,
    stages: StageGenerator,
    preset: Option<Preset>,
}

impl ConstructionParams {
    pub fn new(h1: u64, stages: StageGenerator) -> Result<Self> {
        match &stages {
            StageGenerator::Explicit(v) | StageGenerator::Periodic(v) if v.is_empty() => {
                return Err(invalid("stage list must not be empty"));
            }
            StageGenerator::Random { r_max, .. } if *r_max < 2 => {
                return Err(invalid(format!("r_max must be >= 2 (got {r_max})")));
            }
            _ => {}
        }
        Ok(ConstructionParams {
            h1,
            stages,
            preset: None,
        })
    }

    pub fn preset(p: Preset) -> Self {
        p.params()
    }

    pub fn periodic(h1: u64, pattern: Vec<StageParams>) -> Result<Self> {
        Self::new(h1, StageGenerator::Periodic(pattern))
    }

    pub fn explicit(h1: u64, stages: Vec<StageParams>) -> Result<Self> {
        Self::new(h1, StageGenerator::Explicit(stages))
    }

    pub fn random(h1: u64, r_max: u32, s_max: u32, seed: u64) -> Result<Self> {
        Self::new(h1, StageGenerator::Random { r_max, s_max, seed })
    }

    /// Construction whose return times are all multiples of `d`:
    /// `h1 = d - 1`, `r = 2`, `s = (0, d)`. For `d = 2` this is `class4`.
    pub fn cyclic_factor(d: u32) -> Result<Self> {
        if d < 1 {
            return Err(invalid("cyclic_factor: d must be positive"));
        }
        Self::periodic(d as u64 - 1, vec![StageParams::new(2, vec![0, d])?])
    }

    pub fn h1(&self) -> u64 {
        self.h1
    }

    pub fn generator(&self) -> &StageGenerator {
        &self.stages
    }

    pub fn preset_name(&self) -> Option<String> {
        self.preset.map(|p| p.name())
    }

    /// Number of stages available, `None` when unlimited.
    pub fn available_stages(&self) -> Option<usize> {
        match &self.stages {
            StageGenerator::Explicit(v) => Some(v.len()),
            _ => None,
        }
    }

    /// Parameter bounds `(r, s)` implied by the generator itself.
    pub fn declared_bound(&self) -> Option<(u32, u32)> {
        match &self.stages {
            StageGenerator::Explicit(_) => None,
            StageGenerator::Periodic(v) => Some((
                v.iter().map(|st| st.r).max().unwrap_or(2),
                v.iter().map(|st| st.s_max()).max().unwrap_or(0),
            )),
            StageGenerator::Random { r_max, s_max, .. } => Some((*r_max, *s_max)),
        }
    }

    /// Parameters of stage `j ≥ 1`.
    pub fn stage(&self, j: usize) -> Result<StageParams> {
        if j == 0 {
            return Err(invalid("stages are numbered from 1"));
        }
        match &self.stages {
            StageGenerator::Explicit(v) => v.get(j - 1).cloned().ok_or_else(|| {
                invalid(format!(
                    "stage {j} requested but only {} explicit stages are defined",
                    v.len()
                ))
            }),
            StageGenerator::Periodic(v) => Ok(v[(j - 1) % v.len()].clone()),
            StageGenerator::Random { r_max, s_max, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(j as u64);
                let r = rng.gen_range(2..=*r_max);
                let s = (0..r).map(|_| rng.gen_range(0..=*s_max)).collect();
                StageParams::new(r, s)
            }
        }
    }

    pub fn stages_through(&self, last: usize) -> Result<Vec<StageParams>> {
        (1..=last).map(|j| self.stage(j)).collect()
    }
}

/// Level counts `L_1..=L_J` in arbitrary precision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightTable {
    levels: Vec<BigUint>,
}

impl HeightTable {
    /// Last stage covered.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `L_j`, the number of levels of the stage-`j` tower.
    pub fn level_count(&self, j: usize) -> &BigUint {
        &self.levels[j - 1]
    }

    /// `h_j = L_j - 1`.
    pub fn height(&self, j: usize) -> BigUint {
        self.level_count(j) - 1u32
    }

    pub fn level_count_u64(&self, j: usize) -> Option<u64> {
        self.level_count(j).to_u64()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BigUint)> {
        self.levels.iter().enumerate().map(|(i, l)| (i + 1, l))
    }
}

pub fn heights(params: &ConstructionParams, last: usize) -> Result<HeightTable> {
    if last == 0 {
        return Err(invalid("heights: J must be at least 1"));
    }
    let mut levels = Vec::with_capacity(last);
    let mut cur = BigUint::from(params.h1) + 1u32;
    levels.push(cur.clone());
    for j in 1..last {
        let st = params.stage(j)?;
        cur = cur * st.r + st.spacer_total();
        levels.push(cur.clone());
    }
    Ok(HeightTable { levels })
}

/// `L_1..=L_J` as machine integers; fails if any overflows `u64`.
pub fn level_counts_u64(params: &ConstructionParams, last: usize) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(last);
    let mut cur = params
        .h1
        .checked_add(1)
        .ok_or_else(|| invalid("h1 too large"))?;
    out.push(cur);
    for j in 1..last {
        let st = params.stage(j)?;
        cur = cur
            .checked_mul(st.r as u64)
            .and_then(|x| x.checked_add(st.spacer_total()))
            .ok_or_else(|| invalid(format!("level count of stage {} overflows u64", j + 1)))?;
        out.push(cur);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundedProfile {
    pub r_sup: u64,
    pub s_sup: u64,
    /// Bound the suprema were checked against, if any.
    pub bound: Option<(u64, u64)>,
    pub is_bounded_on_horizon: bool,
}

/// Suprema of `r_j` and `s_j(i)` over `j ≤ J`.
///
/// With `user_bound` both suprema must not exceed it. Without one, the
/// generator's own bound is used; explicit lists are called bounded when the
/// second half of the horizon does not exceed the first half.
pub fn bounded_profile(
    params: &ConstructionParams,
    last: usize,
    user_bound: Option<u64>,
) -> Result<BoundedProfile> {
    if last == 0 {
        return Err(invalid("bounded_profile: J must be at least 1"));
    }
    let stages = params.stages_through(last)?;
    let sup = |sl: &[StageParams]| {
        (
            sl.iter().map(|s| s.r as u64).max().unwrap_or(0),
            sl.iter().map(|s| s.s_max() as u64).max().unwrap_or(0),
        )
    };
    let (r_sup, s_sup) = sup(&stages);
    let bound = user_bound
        .map(|b| (b, b))
        .or_else(|| params.declared_bound().map(|(r, s)| (r as u64, s as u64)));
    let is_bounded_on_horizon = match bound {
        Some((rb, sb)) => r_sup <= rb && s_sup <= sb,
        None => {
            let half = last / 2;
            if half == 0 {
                true
            } else {
                let (rh, sh) = sup(&stages[..half]);
                let (rt, st) = sup(&stages[half..]);
                rt <= rh && st <= sh
            }
        }
    };
    Ok(BoundedProfile {
        r_sup,
        s_sup,
        bound,
        is_bounded_on_horizon,
    })
}

/// Integer interval of stages `[start, end]`, both inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start == 0 || end < start {
            return Err(invalid(format!("invalid window [{start}, {end}]")));
        }
        Ok(Window { start, end })
    }

    /// `l_k`: the window is `{j_k, ..., j_k + l_k}`.
    pub fn extent(&self) -> usize {
        self.end - self.start
    }

    pub fn contains(&self, j: usize) -> bool {
        (self.start..=self.end).contains(&j)
    }
}

/// Non-overlapping increasing windows `J_k`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WindowSet {
    windows: Vec<Window>,
}

impl WindowSet {
    pub fn new(windows: Vec<Window>) -> Result<Self> {
        for pair in windows.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(invalid("windows must be increasing and non-overlapping"));
            }
        }
        Ok(WindowSet { windows })
    }

    pub fn single(start: usize, end: usize) -> Result<Self> {
        Ok(WindowSet {
            windows: vec![Window::new(start, end)?],
        })
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Whether the extents `l_k` never decrease (a finite-horizon proxy for
    /// "arbitrarily long" windows).
    pub fn lengths_nondecreasing(&self) -> bool {
        self.windows
            .windows(2)
            .all(|p| p[1].extent() >= p[0].extent())
    }

    /// Anchor stages `j_k` such that `j_k + offset` lies in the window and is
    /// at least `min_stage`.
    ///
    /// Several windows contribute their start points. A single window is
    /// treated as a run of consecutive anchors, which is what a bounded
    /// construction (one infinite window) gives.
    pub fn anchors(&self, count: usize, offset: usize, min_stage: usize) -> Result<Vec<usize>> {
        let admissible: Vec<usize> = if self.windows.len() == 1 {
            let w = self.windows[0];
            (w.start..=w.end)
                .filter(|&j| j + offset <= w.end && j + offset >= min_stage)
                .collect()
        } else {
            self.windows
                .iter()
                .filter(|w| w.extent() >= offset && w.start + offset >= min_stage)
                .map(|w| w.start)
                .collect()
        };
        if admissible.len() < count {
            return Err(invalid(format!(
                "need {count} windows containing offset {offset} above stage {min_stage}, found {}",
                admissible.len()
            )));
        }
        Ok(admissible[..count].to_vec())
    }
}

/// Maximal runs of stages `j ≤ J` with `r_j ≤ B` and `max_i s_j(i) ≤ B`.
pub fn find_windows(params: &ConstructionParams, last: usize, bound: u64) -> Result<WindowSet> {
    let mut windows = Vec::new();
    let mut open: Option<usize> = None;
    for j in 1..=last {
        let st = params.stage(j)?;
        let ok = st.r as u64 <= bound && st.s_max() as u64 <= bound;
        match (ok, open) {
            (true, None) => open = Some(j),
            (false, Some(s)) => {
                windows.push(Window { start: s, end: j - 1 });
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        windows.push(Window { start: s, end: last });
    }
    WindowSet::new(windows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Flatness {
    /// `s_j(1) = ... = s_j(r_j - 1)` on every stage of the window.
    pub flat_first: bool,
    /// `s_j(1) = ... = s_j(r_j)` on every stage of the window.
    pub flat_strict: bool,
    /// Common spacer value when it is also constant across the window.
    pub s_value: Option<u32>,
}

pub fn flatness(params: &ConstructionParams, window: Window) -> Result<Flatness> {
    let mut flat_first = true;
    let mut flat_strict = true;
    let mut common: Option<Option<u32>> = None;
    for j in window.start..=window.end {
        let st = params.stage(j)?;
        let lead = st.leading_flat();
        flat_first &= lead.is_some();
        flat_strict &= st.all_flat().is_some();
        common = match common {
            None => Some(lead),
            Some(c) if c == lead => Some(c),
            Some(_) => Some(None),
        };
    }
    let s_value = if flat_first { common.flatten() } else { None };
    Ok(Flatness {
        flat_first,
        flat_strict,
        s_value,
    })
}

/// `{L_j + s_j(i) : i = 1..r_j}`, the first-return time through each column.
pub fn return_times(params: &ConstructionParams, j: usize) -> Result<Vec<BigUint>> {
    let table = heights(params, j)?;
    let st = params.stage(j)?;
    let l = table.level_count(j);
    Ok(st.s.iter().map(|&s| l + s).collect())
}

/// Tail `(H/2, H]` of a horizon, as a window.
pub fn tail_window(horizon: usize) -> Window {
    Window {
        start: horizon / 2 + 1,
        end: horizon.max(1),
    }
}

/// Spacers constant across the columns of every stage in the window.
pub fn is_odometer_on(params: &ConstructionParams, window: Window) -> Result<bool> {
    for j in window.start..=window.end {
        if params.stage(j)?.all_flat().is_none() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EigenOrder {
    pub d: u64,
    /// First stage `j` at which the running gcd over `[j0, j]` reached `d`.
    pub stabilized_at: usize,
}

/// `d = gcd{L_j + s_j(i) : j0 ≤ j ≤ J, all i}`.
pub fn eigenvalue_order(params: &ConstructionParams, j0: usize, last: usize) -> Result<EigenOrder> {
    if j0 == 0 || j0 > last {
        return Err(invalid(format!("eigenvalue_order: need 1 <= j0 <= J, got j0={j0}, J={last}")));
    }
    let tail = tail_window(last);
    let check = Window {
        start: tail.start.max(j0),
        end: last,
    };
    if is_odometer_on(params, check)? {
        return Err(Error::OdometerCase);
    }
    let table = heights(params, last)?;
    let mut g = BigUint::zero();
    let mut history = Vec::with_capacity(last - j0 + 1);
    for j in j0..=last {
        let st = params.stage(j)?;
        let l = table.level_count(j);
        for &s in &st.s {
            g = g.gcd(&(l + s));
        }
        history.push((j, g.clone()));
    }
    let stabilized_at = history
        .iter()
        .find(|(_, h)| *h == g)
        .map(|(j, _)| *j)
        .unwrap_or(j0);
    let d = g
        .to_u64()
        .ok_or_else(|| invalid("eigenvalue order does not fit in u64"))?;
    debug_assert!(!g.is_one() || d == 1);
    Ok(EigenOrder { d, stabilized_at })
}

/// The four classes of bounded constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Odometer,
    FlatWeaklyMixing,
    NonFlatWeaklyMixing,
    NonFlatCompactFactor(u64),
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Odometer => write!(f, "Odometer"),
            ClassLabel::FlatWeaklyMixing => write!(f, "FlatWeaklyMixing"),
            ClassLabel::NonFlatWeaklyMixing => write!(f, "NonFlatWeaklyMixing"),
            ClassLabel::NonFlatCompactFactor(d) => write!(f, "NonFlatCompactFactor(d={d})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub label: ClassLabel,
    pub tail: Window,
    pub profile: BoundedProfile,
    pub order: Option<EigenOrder>,
    pub flatness: Flatness,
}

pub fn classify(params: &ConstructionParams, horizon: usize) -> Result<ClassLabel> {
    classify_with(params, horizon, None).map(|c| c.label)
}

pub fn classify_with(
    params: &ConstructionParams,
    horizon: usize,
    bound: Option<u64>,
) -> Result<Classification> {
    if horizon == 0 {
        return Err(invalid("classify: horizon must be at least 1"));
    }
    let profile = bounded_profile(params, horizon, bound)?;
    if !profile.is_bounded_on_horizon {
        let b = profile.bound.map(|(r, s)| r.max(s)).unwrap_or(0);
        return Err(Error::NotBounded {
            r_sup: profile.r_sup,
            s_sup: profile.s_sup,
            bound: b,
        });
    }
    let tail = tail_window(horizon);
    let flat = flatness(params, tail)?;
    if is_odometer_on(params, tail)? {
        return Ok(Classification {
            label: ClassLabel::Odometer,
            tail,
            profile,
            order: None,
            flatness: flat,
        });
    }
    let order = eigenvalue_order(params, tail.start, horizon)?;
    let label = match (order.d, flat.flat_first) {
        (1, true) => ClassLabel::FlatWeaklyMixing,
        (1, false) => ClassLabel::NonFlatWeaklyMixing,
        (d, _) => ClassLabel::NonFlatCompactFactor(d),
    };
    Ok(Classification {
        label,
        tail,
        profile,
        order: Some(order),
        flatness: flat,
    })
}
