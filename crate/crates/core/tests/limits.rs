use proptest::prelude::*;
use rankone::limits::{
    disjointness_certificate, divisibility_cascade, fit_limit_polynomial, fit_limit_polynomial_from,
    flatness_consequence,
    is_pq_similar, weak_limit, CertificateConfig, DepthPolicy, SolverOptions, SupportSet, Verdict,
};
use rankone::{build_labels, ConstructionParams, Preset, StageParams, WindowSet};

fn periodic(h1: u64, stages: &[(u32, &[u32])]) -> ConstructionParams {
    ConstructionParams::periodic(
        h1,
        stages.iter().map(|(r, s)| StageParams::new(*r, s.to_vec()).unwrap()).collect(),
    )
    .unwrap()
}

fn zoo() -> Vec<ConstructionParams> {
    vec![
        Preset::Chacon.params(),
        Preset::Flat3.params(),
        Preset::Odometer(2).params(),
        periodic(0, &[(2, &[0, 1])]),
        periodic(0, &[(3, &[1, 0, 2])]),
        periodic(1, &[(2, &[1, 0]), (3, &[0, 0, 1])]),
    ]
}

#[test]
fn residual_does_not_grow_with_the_window() {
    for params in zoo() {
        let model = build_labels(&params, 3, 11).unwrap();
        for n in [-7i64, 5, 17, -40] {
            let target = model.correlation::<f64>(n).unwrap();
            let mut last: Option<rankone::LimitPolynomialF64> = None;
            for z in [1usize, 2, 4, 6] {
                let basis: Vec<_> = (-(z as i64)..=z as i64)
                    .map(|k| model.correlation::<f64>(k).unwrap())
                    .collect();
                let fit =
                    fit_limit_polynomial_from(&target, &basis, z, last.as_ref(), SolverOptions::default()).unwrap();
                if let Some(prev) = &last {
                    assert!(
                        fit.residual() <= prev.residual() + 1e-12,
                        "{params:?} n={n} Z={z}: {} > {}",
                        fit.residual(),
                        prev.residual()
                    );
                }
                last = Some(fit);
            }
        }
    }
}

#[test]
fn certificate_never_disjoint_when_similar() {
    let w = WindowSet::single(1, 40).unwrap();
    let cfg = CertificateConfig::<f64>::default();
    for params in zoo() {
        for (p, q) in [(2, 3), (3, 2), (1, 2)] {
            let v = disjointness_certificate(&params, p, q, &w, &cfg).unwrap();
            let again = is_pq_similar(v.q_limit.limit(), v.p_limit.limit(), p, q, cfg.similarity).unwrap();
            assert_eq!(again, v.similarity);
            if v.similarity.similar {
                assert_ne!(v.verdict, Verdict::EvidenceDisjoint, "{params:?} ({p},{q})");
            }
        }
    }
}

#[test]
fn cascade_agrees_with_parameters_on_fitted_supports() {
    let w = WindowSet::single(1, 40).unwrap();
    for params in zoo() {
        let supports: Vec<SupportSet> = (1..=3)
            .map(|m| {
                weak_limit::<f64>(&params, 1, m, &w, &DepthPolicy::default(), 8)
                    .unwrap()
                    .support(0.02)
            })
            .collect();
        for p in [2, 3] {
            let c = divisibility_cascade(&supports, p).unwrap();
            let r = flatness_consequence(&params, &w, p, &c).unwrap();
            for l in &r.levels {
                assert!(!l.cascade_holds || l.params_divisible, "{params:?}, p={p}, m={}", l.m);
            }
        }
    }
}

#[test]
fn single_precision_fit_tracks_double() {
    let w = WindowSet::single(1, 40).unwrap();
    let params = Preset::Chacon.params();
    let lo = weak_limit::<f32>(&params, 1, 0, &w, &DepthPolicy::default(), 4).unwrap();
    let hi = weak_limit::<f64>(&params, 1, 0, &w, &DepthPolicy::default(), 4).unwrap();
    for z in -4..=4 {
        assert!((lo.limit().coeff(z) as f64 - hi.limit().coeff(z)).abs() < 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fits_stay_on_the_simplex(n in -300i64..300, z in 1usize..7, j in 2usize..4) {
        let model = build_labels(&Preset::Chacon.params(), j, 9).unwrap();
        let basis: Vec<_> = (-(z as i64)..=z as i64).map(|k| model.correlation::<f64>(k).unwrap()).collect();
        let fit = fit_limit_polynomial(&model.correlation(n).unwrap(), &basis, z, SolverOptions::default()).unwrap();
        prop_assert!(fit.terms().all(|t| t.1 >= -1e-9) && fit.theta() >= -1e-9);
        prop_assert!((fit.total_mass() - 1.0).abs() <= 1e-6);
    }
}
