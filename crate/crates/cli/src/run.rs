//! Command dispatch. Each command returns a text report plus named CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rankone::construction::{classify_with, heights, StageGenerator};
use rankone::limits::{
    disjointness_certificate, divisibility_cascade, flatness_consequence, is_pq_similar, weak_limit,
    CertificateConfig, DepthPolicy, LimitPolynomial, SimilarityTolerance, SimilarityVerdict,
    DEFAULT_COEFF_TOL, DEFAULT_RESIDUAL_TOL, DEFAULT_STABILITY_TOL, DEFAULT_SUPPORT_TOL,
    DEFAULT_WINDOW,
};
use rankone::mobius::{is_prime, prime_factors};
use rankone::sarnak::{
    column_offsets, compact_factor, mobius_weighted_sum, prime_extension_report, telescope_chain,
    telescope_identity_check, FactorPartition, Observable,
};
use rankone::tower::depth_for_levels;
use rankone::{build_labels, sieve_mobius, ConstructionParams, LevelLabel, WindowSet};

use crate::config::{Command, Params, RunConfig};
use crate::error::{CliError, InModule};

/// Smallest tower size used when no depth is given.
pub const DEFAULT_MIN_LEVELS: u64 = 10_000;
pub const DEFAULT_CLASSIFY_HORIZON: usize = 30;
pub const DEFAULT_HEIGHTS_HORIZON: usize = 10;
pub const DEFAULT_LIMIT_HORIZON: usize = 40;
pub const DEFAULT_SUM_LENGTH: u64 = 100_000;
pub const DEFAULT_TELESCOPE_LENGTH: u64 = 10_000;
pub const DEFAULT_CASCADE_LEVELS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutput {
    pub report: String,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_str())
    }
}

/// Write the CSV files and `report.txt` into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    for (name, body) in &out.files {
        fs::write(dir.join(name), body)?;
    }
    fs::write(dir.join("report.txt"), &out.report)?;
    Ok(())
}

struct Tolerances {
    support: f64,
    coeff: f64,
    stability: f64,
    residual: f64,
}

impl Tolerances {
    fn from(p: &Params) -> Self {
        Tolerances {
            support: p.support_tol.unwrap_or(DEFAULT_SUPPORT_TOL),
            coeff: p.coeff_tol.unwrap_or(DEFAULT_COEFF_TOL),
            stability: p.stability_tol.unwrap_or(DEFAULT_STABILITY_TOL),
            residual: p.residual_tol.unwrap_or(DEFAULT_RESIDUAL_TOL),
        }
    }

    fn similarity(&self) -> SimilarityTolerance<f64> {
        SimilarityTolerance {
            support: self.support,
            coeff: self.coeff,
        }
    }
}

fn describe(params: &ConstructionParams) -> String {
    if let Some(name) = params.preset_name() {
        return format!("preset {name}");
    }
    let stages = |v: &[rankone::StageParams]| {
        v.iter()
            .map(|s| format!("(r={}, s={:?})", s.r(), s.spacers()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    match params.generator() {
        StageGenerator::Periodic(v) => format!("h1={}, periodic {}", params.h1(), stages(v)),
        StageGenerator::Explicit(v) => format!("h1={}, explicit {}", params.h1(), stages(v)),
        StageGenerator::Random { r_max, s_max, seed } => format!(
            "h1={}, random r<={r_max} s<={s_max} seed={seed}",
            params.h1()
        ),
    }
}

fn header(cfg: &RunConfig, tol: &Tolerances) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "command: {}", cfg.command.name());
    let _ = writeln!(h, "construction: {}", describe(&cfg.construction));
    let _ = writeln!(
        h,
        "conventions: L_j = h_j + 1 levels; H_j = -(L_j + s_j^min), s_j^min over the first r_j - 1 columns; \
         orbit start = level 0 unless given"
    );
    let _ = writeln!(
        h,
        "tolerances: support {}, coefficient {}, stability {}, residual {}",
        tol.support, tol.coeff, tol.stability, tol.residual
    );
    h
}

fn require<T: Copy>(v: Option<T>, key: &str, cmd: Command) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::config(format!("params.{key}: required by `{}`", cmd.name())))
}

fn default_depth(params: &ConstructionParams, from: usize, min_levels: u64) -> Result<usize, CliError> {
    depth_for_levels(params, from, min_levels.max(DEFAULT_MIN_LEVELS)).in_module("tower")
}

fn windows(p: &Params) -> Result<WindowSet, CliError> {
    let set = match &p.windows {
        Some(ws) => WindowSet::new(
            ws.iter()
                .map(|&(a, b)| rankone::Window::new(a, b))
                .collect::<rankone::Result<Vec<_>>>()
                .in_module("construction")?,
        ),
        None => WindowSet::single(1, p.horizon.unwrap_or(DEFAULT_LIMIT_HORIZON)),
    };
    set.in_module("construction")
}

fn policy(p: &Params) -> DepthPolicy {
    let mut pol = DepthPolicy::default();
    if p.j.is_some() {
        pol.ref_stage = p.j;
    }
    if let Some(c) = p.count {
        pol.anchors = c;
    }
    pol
}

/// Observable from `coeffs`, `levels` or the named `observable`.
fn observable(
    p: &Params,
    stage: usize,
    levels: usize,
    default: &str,
    d: u64,
) -> Result<Observable<i64>, CliError> {
    let obs = if let Some(c) = &p.coeffs {
        if c.len() != levels {
            return Err(CliError::config(format!(
                "params.coeffs: stage {stage} has {levels} levels, got {} coefficients",
                c.len()
            )));
        }
        Observable::new(stage, c.clone())
    } else if let Some(ls) = &p.levels {
        if let Some(bad) = ls.iter().find(|&&a| a >= levels) {
            return Err(CliError::config(format!(
                "params.levels: level {bad} outside stage {stage} (0..{levels})"
            )));
        }
        Observable::indicator(stage, levels, ls)
    } else {
        match p.observable.as_deref().unwrap_or(default) {
            "base" => Observable::indicator(stage, levels, &[0]),
            "all" => Observable::constant(stage, levels, 1),
            _ => {
                let set: Vec<usize> = (0..levels).step_by(d.max(1) as usize).collect();
                Observable::indicator(stage, levels, &set)
            }
        }
    };
    obs.in_module("sarnak")
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    let tol = Tolerances::from(&cfg.params);
    let mut report = header(cfg, &tol);
    let mut files = Vec::new();
    let c = &cfg.construction;
    let p = &cfg.params;
    match cfg.command {
        Command::Heights => {
            let last = p.horizon.unwrap_or(DEFAULT_HEIGHTS_HORIZON);
            let table = heights(c, last).in_module("construction")?;
            let mut csv = String::from("j,L_j,h_j,r_j,s_j\n");
            for (j, l) in table.iter() {
                let st = c.stage(j).in_module("construction")?;
                let s: Vec<String> = st.spacers().iter().map(|x| x.to_string()).collect();
                let _ = writeln!(csv, "{j},{l},{},{},{}", table.height(j), st.r(), s.join(" "));
            }
            let _ = writeln!(report, "level counts L_1..L_{last}:");
            for (j, l) in table.iter() {
                let _ = writeln!(report, "  L_{j} = {l}");
            }
            files.push(("heights.csv".into(), csv));
        }
        Command::Classify => {
            let horizon = p.horizon.unwrap_or(DEFAULT_CLASSIFY_HORIZON);
            let cl = classify_with(c, horizon, p.bound).in_module("construction")?;
            let _ = writeln!(report, "class: {}", cl.label);
            let _ = writeln!(report, "tail window: stages {}..={}", cl.tail.start, cl.tail.end);
            let _ = writeln!(
                report,
                "sup r = {}, sup s = {}, bounded on horizon: {}",
                cl.profile.r_sup, cl.profile.s_sup, cl.profile.is_bounded_on_horizon
            );
            let _ = writeln!(
                report,
                "flat (first r-1 columns): {}, flat (all columns): {}",
                cl.flatness.flat_first, cl.flatness.flat_strict
            );
            if let Some(o) = cl.order {
                let _ = writeln!(report, "eigenvalue order d = {} (stable from stage {})", o.d, o.stabilized_at);
            }
        }
        Command::Labels => {
            let j = p.j.unwrap_or(1);
            let k = match p.depth {
                Some(k) => k,
                None => default_depth(c, j, 0)?,
            };
            let model = build_labels(c, j, k).in_module("tower")?;
            let mut csv = String::from("position,label\n");
            for (i, l) in model.labels().enumerate() {
                match l {
                    LevelLabel::Reference(a) => writeln!(csv, "{i},{a}"),
                    LevelLabel::Spacer(_) => writeln!(csv, "{i},sp"),
                }
                .expect("string write");
            }
            let _ = writeln!(
                report,
                "stage-{j} labels at depth {k}: {} positions, {} copies of the stage-{j} tower, {} spacers",
                model.len(),
                model.copies(),
                model.spacer_count()
            );
            files.push(("labels.csv".into(), csv));
        }
        Command::Correlate => {
            let j = p.j.unwrap_or(2);
            let n = p.n.unwrap_or(1);
            let k = match p.depth {
                Some(k) => k,
                None => default_depth(c, j, 64 * n.unsigned_abs())?,
            };
            let model = build_labels(c, j, k).in_module("tower")?;
            let cm = model.correlation::<f64>(n).in_module("tower")?;
            let _ = writeln!(
                report,
                "C_n for n = {n}, stage {j}, depth {k} ({} levels); error bound {} (|n|/L_K plus tail mass {})",
                model.len(),
                cm.error_bound(),
                model.tail()
            );
            let _ = writeln!(report, "storage: {}", if cm.is_dense() { "dense" } else { "sparse" });
            files.push(("correlation.csv".into(), cm.to_csv()));
        }
        Command::WeakLimit => {
            let d = p.d.unwrap_or(1) as i64;
            let m = p.m.unwrap_or(0);
            let z = p.window.unwrap_or(DEFAULT_WINDOW);
            let wl = weak_limit::<f64>(c, d, m, &windows(p)?, &policy(p), z).in_module("limits")?;
            let _ = writeln!(report, "P_{{{d},{m}}} ~ {}", wl.limit());
            let _ = writeln!(
                report,
                "reference stage {}, depth {}, stability gap {}, residual {}",
                wl.ref_stage,
                wl.depth,
                wl.stability_gap,
                wl.limit().residual()
            );
            let stable = wl.stability_gap <= tol.stability && wl.limit().residual() <= tol.residual;
            let _ = writeln!(report, "fit accepted: {stable}");
            let mut fits = String::from("anchor,shift,a_0,theta,residual\n");
            for f in &wl.fits {
                let _ = writeln!(
                    fits,
                    "{},{},{},{},{}",
                    f.anchor,
                    f.shift,
                    f.limit.coeff(0),
                    f.limit.theta(),
                    f.limit.residual()
                );
            }
            files.push(("weak_limit.csv".into(), wl.limit().to_csv()));
            files.push(("fits.csv".into(), fits));
        }
        Command::Similarity => {
            let pp = require(p.p, "p", cfg.command)?;
            let qq = require(p.q, "q", cfg.command)?;
            let verdict = match (&p.q_series, &p.p_series) {
                (Some(qs), Some(ps)) => {
                    let series = |s: &crate::config::SeriesSpec, key: &str| {
                        let w = s
                            .terms
                            .iter()
                            .map(|t| t.0.unsigned_abs() as usize)
                            .max()
                            .unwrap_or(0)
                            .max(p.window.unwrap_or(DEFAULT_WINDOW));
                        LimitPolynomial::from_terms(w, &s.terms, s.theta)
                            .map_err(|e| CliError::config(format!("params.{key}: {e}")))
                    };
                    let q_lim = series(qs, "Q")?;
                    let p_lim = series(ps, "P")?;
                    let _ = writeln!(report, "Q = {q_lim}\nP = {p_lim}");
                    is_pq_similar(&q_lim, &p_lim, pp, qq, tol.similarity()).in_module("limits")?
                }
                (None, None) => {
                    let cert = certificate(c, pp, qq, p, &tol)?;
                    let _ = writeln!(report, "Q = lim T^(q n_i) ~ {}", cert.q_limit.limit());
                    let _ = writeln!(report, "P = lim T^(p n_i) ~ {}", cert.p_limit.limit());
                    files.push(("q_limit.csv".into(), cert.q_limit.limit().to_csv()));
                    files.push(("p_limit.csv".into(), cert.p_limit.limit().to_csv()));
                    cert.similarity
                }
                _ => {
                    return Err(CliError::config(
                        "params.Q/params.P: give both series or neither",
                    ))
                }
            };
            similarity_report(&mut report, &verdict, pp, qq);
        }
        Command::Disjointness => {
            let pp = require(p.p, "p", cfg.command)?;
            let qq = require(p.q, "q", cfg.command)?;
            let cert = certificate(c, pp, qq, p, &tol)?;
            let _ = writeln!(report, "verdict: {} (numerical evidence)", cert.verdict);
            let _ = writeln!(report, "base sequence n_i = H_j: {:?}", cert.base_shifts);
            for (name, wl) in [("Q", &cert.q_limit), ("P", &cert.p_limit)] {
                let _ = writeln!(
                    report,
                    "{name} = lim T^({} n_i) ~ {}; stability gap {}, residual {}",
                    wl.power,
                    wl.limit(),
                    wl.stability_gap,
                    wl.limit().residual()
                );
            }
            let _ = writeln!(report, "reference stage {}, depth {}", cert.q_limit.ref_stage, cert.q_limit.depth);
            similarity_report(&mut report, &cert.similarity, pp, qq);
            for n in &cert.notes {
                let _ = writeln!(report, "note: {n}");
            }
            files.push(("q_limit.csv".into(), cert.q_limit.limit().to_csv()));
            files.push(("p_limit.csv".into(), cert.p_limit.limit().to_csv()));
        }
        Command::Cascade => {
            let prime = p.p.unwrap_or(2);
            let levels = p.m.unwrap_or(DEFAULT_CASCADE_LEVELS);
            let z = p.window.unwrap_or(DEFAULT_WINDOW);
            let ws = windows(p)?;
            let pol = policy(p);
            let mut supports = Vec::with_capacity(levels);
            for m in 1..=levels {
                let wl = weak_limit::<f64>(c, 1, m, &ws, &pol, z).in_module("limits")?;
                let _ = writeln!(report, "P_{{1,{m}}} ~ {}", wl.limit());
                supports.push(wl.support(tol.support));
            }
            let cascade = divisibility_cascade(&supports, prime).in_module("limits")?;
            let flat = flatness_consequence(c, &ws, prime, &cascade).in_module("limits")?;
            let _ = writeln!(
                report,
                "cascade depth {} for p = {prime}; parameter divisibility depth {}; agreement through m = {}; consistent: {}",
                flat.cascade_depth, flat.param_depth, flat.agreement_through, flat.consistent
            );
            let mut csv = String::from("m,support,cascade_holds,params_divisible,max_difference,forced_flat,consistent\n");
            for (l, s) in flat.levels.iter().zip(&supports) {
                let sup: Vec<String> = s.shifts.iter().map(|z| z.to_string()).collect();
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    l.m,
                    sup.join(" "),
                    l.cascade_holds,
                    l.params_divisible,
                    l.max_difference,
                    l.forced_flat,
                    l.consistent
                );
            }
            files.push(("cascade.csv".into(), csv));
        }
        Command::MobiusSum => {
            let j = p.j.unwrap_or(1);
            let start = p.start.unwrap_or(0);
            let n = p.big_n.unwrap_or(DEFAULT_SUM_LENGTH);
            let k = match p.depth {
                Some(k) => k,
                None => default_depth(c, j, start as u64 + n + 1)?,
            };
            let model = build_labels(c, j, k).in_module("tower")?;
            let f = observable(p, j, model.ref_levels(), "base", 1)?;
            let table = sieve_mobius(n).in_module("arith_mobius")?;
            let s = mobius_weighted_sum(&model, &f, start, n, &table).in_module("sarnak")?;
            let _ = writeln!(
                report,
                "S_N = sum_(i<=N) f(T^i x) mu(i) = {} for N = {n}, x = level {start}, stage {j}, depth {k}",
                s.total
            );
            for t in &s.trace {
                let _ = writeln!(report, "  N = {}: S_N = {}, |S_N|/N = {}", t.n, t.sum, t.sum.unsigned_abs() as f64 / t.n as f64);
            }
            let _ = writeln!(report, "decay is a finite-N trend, not a proof of o(N)");
            files.push(("mobius_sum.csv".into(), s.to_csv()));
        }
        Command::Telescope => {
            let start = p.start.unwrap_or(0);
            let n = p.big_n.unwrap_or(DEFAULT_TELESCOPE_LENGTH);
            let (part, k) = partition(c, p, start as u64 + n + 1)?;
            if part.d() < 2 {
                return Err(CliError::Compute {
                    module: "sarnak",
                    source: rankone::Error::InvalidArgument(
                        "trivial cyclic factor (d = 1): nothing to telescope".into(),
                    ),
                });
            }
            let j = p.j.unwrap_or(k);
            let model = build_labels(c, j, k).in_module("tower")?;
            let f = observable(p, j, model.ref_levels(), "class0", part.d())?;
            let table = sieve_mobius(n).in_module("arith_mobius")?;
            let _ = writeln!(report, "factor order {}, depth {k}, observable stage {j}, N = {n}, x = level {start}", part.d());
            let checks = match p.d {
                Some(d) => vec![telescope_identity_check(&model, &part, &f, d, start, n, &table).in_module("sarnak")?],
                None => telescope_chain(&model, &part, &f, start, n, &table).in_module("sarnak")?,
            };
            let mut csv = String::from("d,stride,N,lhs,rhs,main,correction,equal\n");
            for chk in &checks {
                let _ = writeln!(
                    report,
                    "d = {}, S = T^{}: LHS = {}, RHS = {} + {} = {}, equal: {}",
                    chk.d, chk.stride, chk.lhs, chk.main, chk.correction, chk.rhs, chk.equal
                );
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    chk.d, chk.stride, chk.n, chk.lhs, chk.rhs, chk.main, chk.correction, chk.equal
                );
            }
            files.push(("telescope.csv".into(), csv));
            files.push(("telescope_terms.csv".into(), checks[0].to_csv()));
            if let Some(unfold) = p.unfold {
                let d = p.d.unwrap_or_else(|| prime_factors(part.d())[0]);
                let rep = prime_extension_report(&model, &part, &f, d, start, n, unfold, &table).in_module("sarnak")?;
                let mut ext = String::from("u,term,remainder,bound\n");
                for l in &rep.levels {
                    let _ = writeln!(ext, "{},{},{},{}", l.u, l.term, l.remainder, l.bound());
                }
                let _ = writeln!(
                    report,
                    "unfolded {unfold} times with d = {d}: exact {}, |S_N| <= sum |term_u| + N|f|/d^M holds: {}",
                    rep.exact, rep.bound_holds
                );
                files.push(("extension.csv".into(), ext));
            }
        }
        Command::Factor => {
            let (part, k) = partition(c, p, 0)?;
            let _ = writeln!(
                report,
                "cyclic factor order d = {}, depth {k} ({} levels), residues stable from stage {}",
                part.d(),
                part.classes().len(),
                part.consistent_from()
            );
            let _ = writeln!(report, "cyclicity: {}", match part.cyclicity_violation() {
                None => "class(l+1) = class(l) + 1 mod d for every level".to_string(),
                Some(pos) => format!("violated at level {pos}"),
            });
            for j in part.consistent_from()..=k {
                let offs = column_offsets(c, j).in_module("sarnak")?;
                let _ = writeln!(report, "  stage {j} column offsets: {offs:?}");
            }
            files.push(("factor.csv".into(), part.to_csv()));
        }
    }
    Ok(RunOutput { report, files })
}

fn partition(c: &ConstructionParams, p: &Params, min_levels: u64) -> Result<(FactorPartition, usize), CliError> {
    let horizon = p.horizon.unwrap_or(DEFAULT_CLASSIFY_HORIZON);
    let k = match p.depth {
        Some(k) => k,
        None => default_depth(c, 1, min_levels)?,
    };
    if let Some(d) = p.d {
        if !is_prime(d) {
            return Err(CliError::config(format!("params.d: {d} is not prime")));
        }
    }
    Ok((compact_factor(c, horizon, k).in_module("sarnak")?, k))
}

fn certificate(
    c: &ConstructionParams,
    pp: u64,
    qq: u64,
    p: &Params,
    tol: &Tolerances,
) -> Result<rankone::limits::DisjointnessVerdict<f64>, CliError> {
    let config = CertificateConfig {
        window: p.window.unwrap_or(DEFAULT_WINDOW),
        policy: policy(p),
        similarity: tol.similarity(),
        stability_tol: tol.stability,
        residual_tol: tol.residual,
    };
    disjointness_certificate(c, pp, qq, &windows(p)?, &config).in_module("limits")
}

fn similarity_report(report: &mut String, v: &SimilarityVerdict<f64>, p: u64, q: u64) {
    let _ = writeln!(report, "{p}/{q}-similar: {}", v.similar);
    let _ = writeln!(report, "max coefficient gap {}, incomparable mass {}", v.max_coeff_gap, v.incomparable_mass);
    if !v.q_off_lattice.is_empty() {
        let _ = writeln!(report, "Q mass off {q}Z at {:?}", v.q_off_lattice);
    }
    if !v.p_off_lattice.is_empty() {
        let _ = writeln!(report, "P mass off {p}Z at {:?}", v.p_off_lattice);
    }
    if let Some((r, theta)) = &v.witness {
        let terms: Vec<String> = r
            .iter()
            .filter(|t| t.1 > 0.0)
            .map(|(k, a)| format!("{a}·x^{k}"))
            .collect();
        let _ = writeln!(report, "witness R = {} + {theta}·Θ", terms.join(" + "));
    }
}
