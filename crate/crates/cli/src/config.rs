//! JSON run configuration.
//!
//! ```json
//! {
//!   "construction": {"preset": "chacon"},
//!   "command": "disjointness",
//!   "params": {"p": 2, "q": 3},
//!   "output": {"dir": "out"}
//! }
//! ```
//!
//! A custom construction replaces the preset with
//! `{"h1": 0, "stages": {"kind": "periodic", "pattern": [{"r": 3, "s": [0, 1, 0]}]}}`;
//! `kind` may also be `explicit` (key `stages`) or `random` (keys `r_max`,
//! `s_max`, optional `seed`).

use std::path::PathBuf;

use rankone::construction::StageGenerator;
use rankone::{ConstructionParams, Preset, StageParams};
use serde::Deserialize;

use crate::error::CliError;

pub const COMMANDS: &[&str] = &[
    "heights",
    "classify",
    "labels",
    "correlate",
    "weak-limit",
    "similarity",
    "disjointness",
    "cascade",
    "mobius-sum",
    "telescope",
    "factor",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Heights,
    Classify,
    Labels,
    Correlate,
    WeakLimit,
    Similarity,
    Disjointness,
    Cascade,
    MobiusSum,
    Telescope,
    Factor,
}

impl Command {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        let c = match name {
            "heights" => Command::Heights,
            "classify" => Command::Classify,
            "labels" => Command::Labels,
            "correlate" => Command::Correlate,
            "weak-limit" => Command::WeakLimit,
            "similarity" => Command::Similarity,
            "disjointness" => Command::Disjointness,
            "cascade" => Command::Cascade,
            "mobius-sum" => Command::MobiusSum,
            "telescope" => Command::Telescope,
            "factor" => Command::Factor,
            other => {
                return Err(CliError::config(format!(
                    "command: unknown command `{other}`; valid commands: {}",
                    COMMANDS.join(", ")
                )))
            }
        };
        Ok(c)
    }

    pub fn name(&self) -> &'static str {
        COMMANDS[*self as usize]
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct RawStage {
    pub r: u32,
    pub s: Vec<u32>,
}

#[derive(Clone, Debug, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RawStages {
    Periodic { pattern: Vec<RawStage> },
    Explicit { stages: Vec<RawStage> },
    Random { r_max: u32, s_max: u32, seed: Option<u64> },
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct RawConstruction {
    pub preset: Option<String>,
    pub h1: Option<u64>,
    pub stages: Option<RawStages>,
}

/// A finite limit series given literally, for the `similarity` command.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    /// `[z, a_z]` pairs.
    pub terms: Vec<(i64, f64)>,
    #[serde(default)]
    pub theta: f64,
}

/// Command parameters. Every field is optional; commands fill in defaults.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub j: Option<usize>,
    #[serde(rename = "K")]
    pub depth: Option<usize>,
    #[serde(rename = "Z")]
    pub window: Option<usize>,
    pub n: Option<i64>,
    #[serde(rename = "N")]
    pub big_n: Option<u64>,
    pub p: Option<u64>,
    pub q: Option<u64>,
    pub d: Option<u64>,
    pub m: Option<usize>,
    #[serde(rename = "M")]
    pub unfold: Option<u32>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub start: Option<usize>,
    pub bound: Option<u64>,
    pub count: Option<usize>,
    /// Stage windows `[start, end]`.
    pub windows: Option<Vec<(usize, usize)>>,
    /// `base`, `all` or `class0`.
    pub observable: Option<String>,
    /// Levels of an indicator observable.
    pub levels: Option<Vec<usize>>,
    /// Full coefficient vector of an integer observable.
    pub coeffs: Option<Vec<i64>>,
    pub support_tol: Option<f64>,
    pub coeff_tol: Option<f64>,
    pub stability_tol: Option<f64>,
    pub residual_tol: Option<f64>,
    #[serde(rename = "Q")]
    pub q_series: Option<SeriesSpec>,
    #[serde(rename = "P")]
    pub p_series: Option<SeriesSpec>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Params {
    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &Params) {
        overlay!(self, other; j, depth, window, n, big_n, p, q, d, m, unfold, horizon, seed,
            start, bound, count, windows, observable, levels, coeffs, support_tol, coeff_tol,
            stability_tol, residual_tol, q_series, p_series);
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub construction: RawConstruction,
    pub command: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: RawOutput,
}

/// Validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub construction: ConstructionParams,
    pub command: Command,
    pub params: Params,
    pub out_dir: Option<PathBuf>,
}

fn stage_list(path: &str, raw: &[RawStage]) -> Result<Vec<StageParams>, CliError> {
    if raw.is_empty() {
        return Err(CliError::config(format!("{path}: at least one stage is required")));
    }
    raw.iter()
        .enumerate()
        .map(|(i, st)| {
            if st.r < 2 {
                return Err(CliError::config(format!(
                    "{path}[{i}].r: r must be >= 2 (got {})",
                    st.r
                )));
            }
            StageParams::new(st.r, st.s.clone())
                .map_err(|e| CliError::config(format!("{path}[{i}]: {e}")))
        })
        .collect()
}

/// Resolve the construction section, with `seed` as fallback for random stages.
pub fn build_construction(
    raw: &RawConstruction,
    seed: Option<u64>,
) -> Result<ConstructionParams, CliError> {
    match (&raw.preset, raw.h1, &raw.stages) {
        (Some(name), None, None) => Preset::from_name(name)
            .map(ConstructionParams::preset)
            .ok_or_else(|| {
                CliError::config(format!(
                    "construction.preset: unknown preset `{name}`; valid presets: chacon, odometer2, odometer3, flat3, class4"
                ))
            }),
        (None, Some(h1), Some(stages)) => {
            let gen = match stages {
                RawStages::Periodic { pattern } => {
                    StageGenerator::Periodic(stage_list("construction.stages.pattern", pattern)?)
                }
                RawStages::Explicit { stages } => {
                    StageGenerator::Explicit(stage_list("construction.stages.stages", stages)?)
                }
                RawStages::Random { r_max, s_max, seed: own } => {
                    if *r_max < 2 {
                        return Err(CliError::config(format!(
                            "construction.stages.r_max: r must be >= 2 (got {r_max})"
                        )));
                    }
                    StageGenerator::Random {
                        r_max: *r_max,
                        s_max: *s_max,
                        seed: own.or(seed).unwrap_or(0),
                    }
                }
            };
            ConstructionParams::new(h1, gen).map_err(|e| CliError::config(format!("construction: {e}")))
        }
        (Some(_), _, _) => Err(CliError::config(
            "construction: `preset` cannot be combined with `h1`/`stages`",
        )),
        (None, None, _) => Err(CliError::config("construction.h1: missing (or give `preset`)")),
        (None, Some(_), None) => Err(CliError::config("construction.stages: missing")),
    }
}

fn check_params(p: &Params) -> Result<(), CliError> {
    let positive = [
        ("params.j", p.j.map(|v| v as u64)),
        ("params.K", p.depth.map(|v| v as u64)),
        ("params.N", p.big_n),
        ("params.p", p.p),
        ("params.q", p.q),
        ("params.d", p.d),
        ("params.M", p.unfold.map(u64::from)),
        ("params.horizon", p.horizon.map(|v| v as u64)),
        ("params.count", p.count.map(|v| v as u64)),
    ];
    for (key, v) in positive {
        if v == Some(0) {
            return Err(CliError::config(format!("{key}: must be >= 1")));
        }
    }
    for (key, v) in [
        ("params.support_tol", p.support_tol),
        ("params.coeff_tol", p.coeff_tol),
        ("params.stability_tol", p.stability_tol),
        ("params.residual_tol", p.residual_tol),
    ] {
        if let Some(t) = v {
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::config(format!("{key}: must be a finite number >= 0 (got {t})")));
            }
        }
    }
    if let Some(ws) = &p.windows {
        for (i, &(a, b)) in ws.iter().enumerate() {
            if a == 0 || b < a {
                return Err(CliError::config(format!(
                    "params.windows[{i}]: need 1 <= start <= end (got [{a}, {b}])"
                )));
            }
        }
    }
    if let Some(o) = &p.observable {
        if !["base", "all", "class0"].contains(&o.as_str()) {
            return Err(CliError::config(format!(
                "params.observable: unknown observable `{o}`; valid: base, all, class0"
            )));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let command = Command::parse(&raw.command)?;
        check_params(&raw.params)?;
        let construction = build_construction(&raw.construction, raw.params.seed)?;
        Ok(RunConfig {
            construction,
            command,
            params: raw.params,
            out_dir: raw.output.dir,
        })
    }
}

/// Parse raw JSON without validating it.
pub fn parse_raw(text: &str) -> Result<RawConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
}

/// Parse and validate a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    RunConfig::from_raw(parse_raw(text)?)
}
