//! Support divisibility chain `supp P_{1,m} ⊂ p^m Z` and its parameter-side
//! counterpart: `p^m` divides the spacer differences `s(i) − s(i')` over the
//! first `r − 1` columns of stages `j_k + m`.

use crate::construction::{ConstructionParams, WindowSet};
use crate::error::{invalid, Result};

use super::SupportSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CascadeLevel {
    pub m: usize,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cascade {
    pub p: u64,
    pub levels: Vec<CascadeLevel>,
    /// Largest `M` with the chain intact for every `m ≤ M`.
    pub max_level: usize,
}

fn divides(p: u64, m: usize, z: i64) -> bool {
    match u32::try_from(m).ok().and_then(|e| p.checked_pow(e)) {
        Some(pm) => z.unsigned_abs().is_multiple_of(pm),
        None => z == 0,
    }
}

/// `supports[i]` is the support of `P_{1,i+1}`; level `m = i + 1` holds when
/// every shift there is a multiple of `p^m`.
pub fn divisibility_cascade(supports: &[SupportSet], p: u64) -> Result<Cascade> {
    if p < 2 {
        return Err(invalid(format!("cascade: p must be >= 2 (got {p})")));
    }
    if supports.is_empty() {
        return Err(invalid("cascade: no supports given"));
    }
    let levels: Vec<CascadeLevel> = supports
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let m = i + 1;
            CascadeLevel {
                m,
                holds: s.shifts.iter().all(|&z| divides(p, m, z)),
            }
        })
        .collect();
    let max_level = levels.iter().take_while(|l| l.holds).count();
    Ok(Cascade {
        p,
        levels,
        max_level,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatnessLevel {
    pub m: usize,
    pub cascade_holds: bool,
    /// `p^m` divides every leading spacer difference on the checked stages.
    pub params_divisible: bool,
    pub max_difference: u32,
    /// `p^m` exceeds the spacer bound, so divisibility forces equal spacers.
    pub forced_flat: bool,
    /// Stages `j_k + m` that were inspected.
    pub stages: Vec<usize>,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatnessReport {
    pub p: u64,
    pub levels: Vec<FlatnessLevel>,
    /// Cascade depth from the fitted supports.
    pub cascade_depth: usize,
    /// Leading levels at which the parameters are divisible.
    pub param_depth: usize,
    /// Leading levels at which both sides hold.
    pub agreement_through: usize,
    pub consistent: bool,
}

/// Anchors of the later half of the windows long enough for offset `m`.
fn tail_stages(windows: &WindowSet, m: usize) -> Vec<usize> {
    let ws = windows.windows();
    let stages: Vec<usize> = if ws.len() == 1 {
        let w = ws[0];
        (w.start..=w.end).filter(|&j| j + m <= w.end).map(|j| j + m).collect()
    } else {
        ws.iter()
            .filter(|w| w.extent() >= m)
            .map(|w| w.start + m)
            .collect()
    };
    let half = stages.len() / 2;
    stages[half..].to_vec()
}

/// Cross-check the cascade against the spacer parameters it constrains.
pub fn flatness_consequence(
    params: &ConstructionParams,
    windows: &WindowSet,
    p: u64,
    cascade: &Cascade,
) -> Result<FlatnessReport> {
    if p != cascade.p {
        return Err(invalid(format!("cascade was computed for p={}, not {p}", cascade.p)));
    }
    let mut levels = Vec::with_capacity(cascade.levels.len());
    for lvl in &cascade.levels {
        let m = lvl.m;
        let stages = tail_stages(windows, m);
        if stages.is_empty() {
            return Err(invalid(format!("no window is long enough for offset {m}")));
        }
        let mut max_difference = 0u32;
        let mut divisible = true;
        let mut s_bound = 0u32;
        for &j in &stages {
            let st = params.stage(j)?;
            let s = st.spacers();
            s_bound = s_bound.max(st.s_max());
            let lead = &s[..s.len() - 1];
            for &x in lead {
                let diff = x.abs_diff(lead[0]);
                max_difference = max_difference.max(diff);
                divisible &= divides(p, m, diff as i64);
            }
        }
        let forced_flat = match u32::try_from(m).ok().and_then(|e| p.checked_pow(e)) {
            Some(pm) => pm > s_bound as u64,
            None => true,
        };
        let consistent = (!lvl.holds || divisible) && !(forced_flat && divisible && max_difference != 0);
        levels.push(FlatnessLevel {
            m,
            cascade_holds: lvl.holds,
            params_divisible: divisible,
            max_difference,
            forced_flat,
            stages,
            consistent,
        });
    }
    let param_depth = levels.iter().take_while(|l| l.params_divisible).count();
    let agreement_through = levels
        .iter()
        .take_while(|l| l.params_divisible && l.cascade_holds)
        .count();
    let consistent = levels.iter().all(|l| l.consistent);
    Ok(FlatnessReport {
        p,
        levels,
        cascade_depth: cascade.max_level,
        param_depth,
        agreement_through,
        consistent,
    })
}
