use num_bigint::BigUint;
use proptest::prelude::*;
use rankone::construction::{
    classify, eigenvalue_order, flatness, heights, return_times, Window,
};
use rankone::{ConstructionParams, Preset, StageParams};

fn stage() -> impl Strategy<Value = StageParams> {
    (2u32..5).prop_flat_map(|r| {
        prop::collection::vec(0u32..4, r as usize).prop_map(move |s| StageParams::new(r, s).unwrap())
    })
}

fn periodic() -> impl Strategy<Value = ConstructionParams> {
    (0u64..4, prop::collection::vec(stage(), 1..4))
        .prop_map(|(h1, pattern)| ConstructionParams::periodic(h1, pattern).unwrap())
}

proptest! {
    #[test]
    fn recursion_and_growth(params in periodic()) {
        let t = heights(&params, 25).unwrap();
        for j in 1..25 {
            let st = params.stage(j).unwrap();
            let next = t.level_count(j) * st.r() + st.spacer_total();
            prop_assert_eq!(t.level_count(j + 1), &next);
            prop_assert!(t.level_count(j + 1) >= &(t.level_count(j) * 2u32));
        }
    }

    #[test]
    fn strict_flatness_implies_flatness(params in periodic(), a in 1usize..6, len in 0usize..6) {
        let f = flatness(&params, Window::new(a, a + len).unwrap()).unwrap();
        prop_assert!(!f.flat_strict || f.flat_first);
    }

    #[test]
    fn random_seeds_reproduce(seed in any::<u64>()) {
        let a = ConstructionParams::random(0, 4, 3, seed).unwrap();
        let b = ConstructionParams::random(0, 4, 3, seed).unwrap();
        prop_assert_eq!(a.stages_through(12).unwrap(), b.stages_through(12).unwrap());
    }
}

#[test]
fn classification_is_stable_in_the_horizon() {
    let mut cases: Vec<ConstructionParams> = [
        Preset::Odometer(2),
        Preset::Odometer(3),
        Preset::Chacon,
        Preset::Flat3,
        Preset::Class4,
    ]
    .into_iter()
    .map(ConstructionParams::preset)
    .collect();
    for d in 2..6 {
        cases.push(ConstructionParams::cyclic_factor(d).unwrap());
    }
    for p in &cases {
        for h in [10, 16, 24] {
            assert_eq!(classify(p, h).unwrap(), classify(p, 2 * h).unwrap(), "{p:?} at {h}");
        }
    }
}

#[test]
fn eigenvalue_order_divides_return_times() {
    let mut cases = vec![Preset::Class4.params(), Preset::Chacon.params(), Preset::Flat3.params()];
    for d in 2..7 {
        cases.push(ConstructionParams::cyclic_factor(d).unwrap());
    }
    cases.push(
        ConstructionParams::periodic(
            2,
            vec![
                StageParams::new(2, vec![0, 3]).unwrap(),
                StageParams::new(3, vec![3, 0, 6]).unwrap(),
            ],
        )
        .unwrap(),
    );
    for p in &cases {
        let o = eigenvalue_order(p, 4, 20).unwrap();
        let d = BigUint::from(o.d);
        for j in o.stabilized_at..=20 {
            for t in return_times(p, j).unwrap() {
                assert_eq!(&t % &d, BigUint::from(0u32), "{p:?}: d = {} at stage {j}", o.d);
            }
        }
    }
}
