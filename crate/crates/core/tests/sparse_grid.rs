use std::collections::BTreeSet;

use ddsg_core::sparse_grid::{
    basis_value, coordinate, nodes_on_level, regular_point_count, Domain, HierarchicalGrid, NodeId,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense basis matrix `B[p, q] = phi_q(x_p)` in unit coordinates.
fn basis_matrix(grid: &HierarchicalGrid) -> DMatrix<f64> {
    let nodes = grid.nodes();
    let n = nodes.len();
    DMatrix::from_fn(n, n, |p, q| {
        let x = nodes[p].coordinates();
        nodes[q]
            .level
            .iter()
            .zip(&nodes[q].index)
            .zip(&x)
            .map(|((&l, &i), &xj)| basis_value(l, i, xj).unwrap())
            .product()
    })
}

/// Every multi-index with level sum at most `depth`, by exhaustive tensor enumeration.
fn brute_force_nodes(dim: usize, depth: usize) -> BTreeSet<NodeId> {
    let mut one_d = Vec::new();
    for l in 0..=depth as u8 {
        match l {
            0 => one_d.push((0u8, 0u32)),
            1 => {
                one_d.push((1, 0));
                one_d.push((1, 1));
            }
            _ => one_d.extend((1..(1u32 << l)).step_by(2).map(|i| (l, i))),
        }
    }
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; dim];
    loop {
        let level: Vec<u8> = idx.iter().map(|&k| one_d[k].0).collect();
        if level.iter().map(|&l| l as usize).sum::<usize>() <= depth {
            let index = idx.iter().map(|&k| one_d[k].1).collect();
            out.insert(NodeId::new(level, index).unwrap());
        }
        let mut j = 0;
        while j < dim {
            idx[j] += 1;
            if idx[j] < one_d.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == dim {
            return out;
        }
    }
}

#[test]
fn hierarchization_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (dim, depth) in [(1, 5), (2, 4), (3, 3), (4, 2)] {
        let mut grid = HierarchicalGrid::make_regular(dim, depth, 2, Domain::unit(dim)).unwrap();
        let n = grid.num_points();
        let values: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        grid.hierarchize(&values).unwrap();
        let lu = basis_matrix(&grid).lu();
        for o in 0..2 {
            let rhs = DVector::from_iterator(n, (0..n).map(|p| values[p * 2 + o]));
            let alpha = lu.solve(&rhs).unwrap();
            for p in 0..n {
                assert!(
                    (alpha[p] - grid.surpluses()[p * 2 + o]).abs() < 1e-12,
                    "d={dim} l={depth} node {p}"
                );
            }
        }
    }
}

#[test]
fn point_counts_match_enumeration() {
    for dim in 1..=4 {
        for depth in 0..=5 {
            let expected = brute_force_nodes(dim, depth);
            let grid = HierarchicalGrid::make_regular(dim, depth, 1, Domain::unit(dim)).unwrap();
            let got: BTreeSet<NodeId> = grid.nodes().into_iter().collect();
            assert_eq!(got, expected, "d={dim} l={depth}");
            assert_eq!(regular_point_count(dim, depth), expected.len() as u128);
        }
    }
    assert_eq!(regular_point_count(4, 3), 137);
    assert_eq!(regular_point_count(1, 4), 17);
}

#[test]
fn level_node_counts() {
    let counts: Vec<u64> = (0..6).map(nodes_on_level).collect();
    assert_eq!(counts, vec![1, 2, 2, 4, 8, 16]);
    let coords: Vec<f64> = (1..8).step_by(2).map(|i| coordinate(3, i)).collect();
    assert_eq!(coords, vec![0.125, 0.375, 0.625, 0.875]);
}

#[test]
fn regular_grids_are_nested() {
    for dim in [2, 3, 5] {
        let coarse = HierarchicalGrid::make_regular(dim, 3, 1, Domain::unit(dim)).unwrap();
        let fine = HierarchicalGrid::make_regular(dim, 4, 1, Domain::unit(dim)).unwrap();
        for node in coarse.nodes() {
            assert!(fine.find(&node).is_some());
        }
        assert!(fine.is_ancestor_closed());
    }
}

#[test]
fn multilinear_functions_are_reproduced() {
    let domain = Domain::new(vec![-1.0, 0.0, 2.0], vec![1.0, 3.0, 2.5]).unwrap();
    let f = |x: &[f64]| vec![1.0 + 2.0 * x[0] - x[1] * x[2] + 0.5 * x[0] * x[1] * x[2]];
    let mut grid = HierarchicalGrid::make_regular(3, 3, 1, domain).unwrap();
    grid.fit(f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(0.0..3.0), rng.random_range(2.0..2.5)];
        assert!((grid.interpolate(&x).unwrap()[0] - f(&x)[0]).abs() < 1e-12);
    }
}

#[test]
fn smooth_error_decreases_with_depth() {
    let f = |x: &[f64]| vec![(x[0] + 2.0 * x[1]).sin() * (1.0 + x[2] * x[2])];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<Vec<f64>> = (0..500).map(|_| (0..3).map(|_| rng.random()).collect()).collect();
    let mut last = f64::INFINITY;
    for depth in 2..=7 {
        let mut grid = HierarchicalGrid::make_regular(3, depth, 1, Domain::unit(3)).unwrap();
        grid.fit(f).unwrap();
        let err = samples
            .iter()
            .map(|x| (grid.interpolate(x).unwrap()[0] - f(x)[0]).abs())
            .fold(0.0, f64::max);
        assert!(err < last, "depth {depth}: {err} >= {last}");
        last = err;
    }
    assert!(last < 1e-3);
}

#[test]
fn product_integral_on_a_box() {
    let domain = Domain::new(vec![0.0, 1.0], vec![2.0, 4.0]).unwrap();
    let mut grid = HierarchicalGrid::make_regular(2, 2, 1, domain).unwrap();
    grid.fit(|x| vec![x[0] * x[1]]).unwrap();
    // (2^2/2) * ((4^2 - 1)/2)
    assert!((grid.integrate()[0] - 15.0).abs() < 1e-12);
}

#[test]
fn quadrature_agrees_with_monte_carlo() {
    let f = |x: &[f64]| vec![(-(x[0] * x[0]) - x[1] * x[2]).exp() + x[3].cos()];
    let domain = Domain::new(vec![-1.0; 4], vec![1.0; 4]).unwrap();
    let mut grid = HierarchicalGrid::make_regular(4, 5, 1, domain.clone()).unwrap();
    grid.fit(f).unwrap();
    let quad = grid.integrate()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            grid.interpolate(&x).unwrap()[0] * domain.volume()
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((quad - mean).abs() < 3.0 * se, "quad {quad} mc {mean} se {se}");
}

#[test]
fn refinement_concentrates_at_a_kink() {
    let f = |x: &[f64]| vec![(x[0] - 0.3).abs() + 0.1 * x[1]];
    let mut grid = HierarchicalGrid::make_regular(2, 3, 1, Domain::unit(2)).unwrap();
    grid.fit(f).unwrap();
    let before = grid.num_points();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.random(), rng.random()]).collect();
    let err = |g: &HierarchicalGrid| {
        samples
            .iter()
            .map(|x| (g.interpolate(x).unwrap()[0] - f(x)[0]).abs())
            .fold(0.0, f64::max)
    };
    let e0 = err(&grid);
    for _ in 0..6 {
        let scale = grid.default_refinement_scale();
        if grid.refine(1e-4, &scale).unwrap() == 0 {
            break;
        }
        assert!(grid.is_ancestor_closed());
        grid.fit(f).unwrap();
    }
    assert!(err(&grid) < 0.1 * e0);
    // new nodes crowd around x0 = 0.3 rather than filling the square
    let added: Vec<f64> = (before..grid.num_points()).map(|p| grid.point(p)[0]).collect();
    let near = added.iter().filter(|x| (*x - 0.3).abs() < 0.1).count();
    assert!(near * 2 > added.len(), "{near} of {}", added.len());
    let regular = HierarchicalGrid::make_regular(2, grid.max_level_sum(), 1, Domain::unit(2)).unwrap();
    assert!(grid.num_points() < regular.num_points());
}

#[test]
fn grid_serialization_round_trip() {
    let mut grid = HierarchicalGrid::make_regular(3, 3, 2, Domain::unit(3)).unwrap();
    grid.fit(|x| vec![x[0] * x[1], x[2].exp()]).unwrap();
    let text = serde_json::to_string(&grid).unwrap();
    let back: HierarchicalGrid = serde_json::from_str(&text).unwrap();
    let x = [0.3, 0.7, 0.1];
    assert_eq!(grid.interpolate(&x).unwrap(), back.interpolate(&x).unwrap());
}

#[test]
fn out_of_domain_is_rejected() {
    let grid = HierarchicalGrid::make_regular(2, 2, 1, Domain::unit(2)).unwrap();
    assert!(grid.interpolate(&[0.5, 1.5]).is_err());
    assert!(grid.interpolate(&[0.5]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolant_hits_node_values(dim in 1usize..4, depth in 0usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut grid = HierarchicalGrid::make_regular(dim, depth, 1, Domain::unit(dim)).unwrap();
        let values: Vec<f64> = (0..grid.num_points()).map(|_| rng.random_range(-5.0..5.0)).collect();
        grid.hierarchize(&values).unwrap();
        for p in 0..grid.num_points() {
            let v = grid.interpolate(&grid.point(p)).unwrap()[0];
            prop_assert!((v - values[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn hierarchization_is_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = HierarchicalGrid::make_regular(3, 3, 1, Domain::unit(3)).unwrap();
        let n = g.num_points();
        let u: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        g.hierarchize(&u).unwrap();
        let su = g.surpluses().to_vec();
        g.hierarchize(&v).unwrap();
        let sv = g.surpluses().to_vec();
        let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + y).collect();
        g.hierarchize(&w).unwrap();
        for p in 0..n {
            prop_assert!((g.surpluses()[p] - (a * su[p] + sv[p])).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_have_a_single_surplus(c in -10.0f64..10.0, dim in 1usize..5) {
        let mut g = HierarchicalGrid::make_regular(dim, 3, 1, Domain::unit(dim)).unwrap();
        g.fit(|_| vec![c]).unwrap();
        prop_assert_eq!(g.surpluses()[g.find(&NodeId::root(dim)).unwrap()], c);
        prop_assert!((g.integrate()[0] - c).abs() < 1e-12);
        prop_assert_eq!(g.surpluses().iter().filter(|s| **s != 0.0).count(), usize::from(c != 0.0));
    }

    #[test]
    fn refinement_keeps_ancestor_closure(seed in any::<u64>(), thr in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = HierarchicalGrid::make_regular(2, 2, 1, Domain::unit(2)).unwrap();
        let n = g.num_points();
        let values: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        g.hierarchize(&values).unwrap();
        let added = g.refine(thr, &[1.0]).unwrap();
        prop_assert!(g.is_ancestor_closed());
        prop_assert_eq!(g.num_points(), n + added);
        let nodes: BTreeSet<NodeId> = g.nodes().into_iter().collect();
        prop_assert_eq!(nodes.len(), g.num_points());
    }
}
