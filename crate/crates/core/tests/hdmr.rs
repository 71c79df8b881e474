use ddsg_core::hdmr::{candidate_count, ComponentIndex, DdsgModel, DdsgOptions, FnEvaluator};
use ddsg_core::sparse_grid::{Domain, HierarchicalGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn smooth(x: &[f64]) -> Vec<f64> {
    let s: f64 = x.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v).sum();
    vec![s.sin() + x.iter().product::<f64>(), (-s * s).exp()]
}

#[test]
fn full_expansion_equals_direct_sparse_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in 1..=3 {
        let domain = Domain::new(vec![-0.5; d], vec![1.0; d]).unwrap();
        let f = FnEvaluator::new(2, |x: &[f64]| Ok(smooth(x)));
        let anchor: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..1.0)).collect();
        let opts = DdsgOptions { k_max: d, depth: 4, ..Default::default() };
        let ddsg = DdsgModel::build(&f, &domain, opts, &anchor).unwrap();
        let mut sg = HierarchicalGrid::make_regular(d, 4, 2, domain.clone()).unwrap();
        sg.fit(smooth).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..1.0)).collect();
            let a = ddsg.evaluate(&x).unwrap();
            let b = sg.interpolate(&x).unwrap();
            for o in 0..2 {
                assert!((a[o] - b[o]).abs() < 1e-10, "d={d}: {a:?} vs {b:?}");
            }
        }
        let (ia, ib) = (ddsg.integrate(), sg.integrate());
        for o in 0..2 {
            assert!((ia[o] - ib[o]).abs() < 1e-10);
        }
    }
}

#[test]
fn candidate_counts_are_binomial_sums() {
    assert_eq!(candidate_count(4, 1), 5);
    assert_eq!(candidate_count(4, 2), 11);
    assert_eq!(candidate_count(4, 4), 16);
    assert_eq!(candidate_count(20, 2), 1 + 20 + 190);
    assert_eq!(candidate_count(3, 7), 8);
}

#[test]
fn first_order_point_count() {
    let d = 6;
    let f = FnEvaluator::new(1, |x: &[f64]| Ok(vec![x.iter().sum()]));
    let opts = DdsgOptions { k_max: 1, depth: 3, ..Default::default() };
    let m = DdsgModel::build(&f, &Domain::unit(d), opts, &vec![0.5; d]).unwrap();
    // one 9-point cut per dimension; the anchor is the shared center node
    assert_eq!(m.num_points(), d * 9);
    assert_eq!(m.active().filter(|u| u.order() == 1).count(), d);
    assert_eq!(m.max_order(), 1);
}

#[test]
fn subsets_enumerate_power_set() {
    let u = ComponentIndex::new(vec![4, 1, 7]);
    assert_eq!(u.dims(), &[1, 4, 7]);
    let subs: Vec<ComponentIndex> = u.subsets().collect();
    assert_eq!(subs.len(), 8);
    assert!(subs.iter().all(|s| s.is_subset_of(&u)));
}

#[test]
fn model_serialization_round_trip() {
    let f = FnEvaluator::new(2, |x: &[f64]| Ok(smooth(x)));
    let opts = DdsgOptions { k_max: 2, depth: 3, ..Default::default() };
    let m = DdsgModel::build(&f, &Domain::unit(4), opts, &[0.2, 0.4, 0.6, 0.8]).unwrap();
    let back: DdsgModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    let x = [0.1, 0.9, 0.3, 0.5];
    assert_eq!(m.evaluate(&x).unwrap(), back.evaluate(&x).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// For additive functions the first-order expansion and the regular grid
    /// of equal depth are the same interpolant, whatever the anchor.
    #[test]
    fn additive_functions_match_sparse_grid(
        d in 2usize..6,
        depth in 1usize..5,
        anchor_seed in any::<u64>(),
        coef in prop::collection::vec(-2.0f64..2.0, 5),
    ) {
        let g = move |x: &[f64]| -> f64 {
            x.iter().enumerate().map(|(j, v)| coef[j] * (3.0 * v).sin() + v * v).sum()
        };
        let f = FnEvaluator::new(1, |x: &[f64]| Ok(vec![g(x)]));
        let mut rng = ChaCha8Rng::seed_from_u64(anchor_seed);
        let anchor: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let opts = DdsgOptions { k_max: 1, depth, ..Default::default() };
        let ddsg = DdsgModel::build(&f, &Domain::unit(d), opts, &anchor).unwrap();
        let mut sg = HierarchicalGrid::make_regular(d, depth, 1, Domain::unit(d)).unwrap();
        sg.fit(|x| vec![g(x)]).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            prop_assert!((ddsg.evaluate(&x).unwrap()[0] - sg.interpolate(&x).unwrap()[0]).abs() < 1e-10);
        }
        prop_assert!((ddsg.integrate()[0] - sg.integrate()[0]).abs() < 1e-10);
    }

    /// With the anchor at the center node, every sampled point is itself a
    /// node of each cut it projects onto, so the expansion interpolates there.
    #[test]
    fn centered_expansion_interpolates_samples(k in 1usize..4, depth in 1usize..4) {
        let anchor = vec![0.5; 4];
        let f = FnEvaluator::new(2, |x: &[f64]| Ok(smooth(x)));
        let opts = DdsgOptions { k_max: k, depth, ..Default::default() };
        let m = DdsgModel::build(&f, &Domain::unit(4), opts, &anchor).unwrap();
        for (x, val) in m.sample_points() {
            let e = smooth(&x);
            prop_assert_eq!(&val, &e);
            let approx = m.evaluate(&x).unwrap();
            prop_assert!((approx[0] - e[0]).abs() < 1e-12 && (approx[1] - e[1]).abs() < 1e-12);
        }
    }
}

/// The cut interpolants reproduce `f` at the anchor when its projections are
/// grid nodes, and then the expansion returns `f(anchor)`.
#[test]
fn anchor_value_is_reproduced_on_node_anchors() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 1..=3 {
        for _ in 0..10 {
            let anchor: Vec<f64> = (0..4).map(|_| [0.0, 0.5, 1.0][rng.random_range(0..3)]).collect();
            let f = FnEvaluator::new(2, |x: &[f64]| Ok(smooth(x)));
            let opts = DdsgOptions { k_max: k, depth: 3, ..Default::default() };
            let m = DdsgModel::build(&f, &Domain::unit(4), opts, &anchor).unwrap();
            let (v, e) = (m.evaluate(&anchor).unwrap(), smooth(&anchor));
            assert!((v[0] - e[0]).abs() < 1e-10 && (v[1] - e[1]).abs() < 1e-10, "k={k}: {v:?} vs {e:?}");
        }
    }
}
