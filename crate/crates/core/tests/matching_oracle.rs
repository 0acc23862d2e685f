use std::time::Instant;

use isr_core::matching::{brute_force_assignment, mine_positive_pairs, solve_assignment};
use isr_core::rng::Rng;
use isr_core::{Error, FeatureMatrix, Matrix};
use proptest::prelude::*;

fn random_cost(rng: &mut Rng, m: usize, n: usize) -> Matrix {
    let data = (0..m * n).map(|_| rng.uniform_range(0.0, 2.0)).collect();
    Matrix::from_row_major(m, n, data).unwrap()
}

/// Integer costs in 0..3 produce many equal-cost optima.
fn tied_cost(rng: &mut Rng, m: usize, n: usize) -> Matrix {
    let data = (0..m * n).map(|_| rng.below(3) as f64).collect();
    Matrix::from_row_major(m, n, data).unwrap()
}

fn feasible(pairs: &[(usize, usize)], m: usize, n: usize) -> bool {
    let rows: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    cols.sort_unstable();
    cols.dedup();
    rows == (0..m).collect::<Vec<_>>() && cols.len() == m && cols.iter().all(|&c| c < n)
}

#[test]
fn oracle_sweep_thousand_instances() {
    let mut rng = Rng::new(2024);
    let start = Instant::now();
    for _ in 0..1000 {
        let n = 1 + rng.below(7);
        let m = 1 + rng.below(n);
        let c = random_cost(&mut rng, m, n);
        let fast = solve_assignment(&c).unwrap();
        let slow = brute_force_assignment(&c).unwrap();
        assert!((fast.total_cost - slow.total_cost).abs() <= 1e-9, "{c:?}");
        assert!(feasible(&fast.pairs, m, n));
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn ties_resolve_to_the_enumeration_order() {
    let mut rng = Rng::new(7);
    for _ in 0..500 {
        let n = 1 + rng.below(6);
        let m = 1 + rng.below(n);
        let c = tied_cost(&mut rng, m, n);
        let fast = solve_assignment(&c).unwrap();
        let slow = brute_force_assignment(&c).unwrap();
        assert_eq!(fast.pairs, slow.pairs, "{c:?}");
    }
}

#[test]
fn exhaustive_three_by_five() {
    let mut rng = Rng::new(35);
    let c = random_cost(&mut rng, 3, 5);
    let mut best = f64::INFINITY;
    let mut maps = 0;
    for a in 0..5 {
        for b in 0..5 {
            for d in 0..5 {
                if a != b && a != d && b != d {
                    maps += 1;
                    best = best.min(c.get(0, a) + c.get(1, b) + c.get(2, d));
                }
            }
        }
    }
    assert_eq!(maps, 60);
    assert!((solve_assignment(&c).unwrap().total_cost - best).abs() <= 1e-12);
}

#[test]
fn brute_force_examples() {
    let one = Matrix::from_rows(&[&[0.37]]).unwrap();
    let m = brute_force_assignment(&one).unwrap();
    assert_eq!((m.pairs, m.total_cost), (vec![(0, 0)], 0.37));
    let flat = Matrix::from_rows(&[&[0.4, 0.4], &[0.4, 0.4]]).unwrap();
    assert!((brute_force_assignment(&flat).unwrap().total_cost - 0.8).abs() < 1e-15);
    let big = Matrix::zeros(3, 9);
    assert!(matches!(brute_force_assignment(&big), Err(Error::EnumerationBound { .. })));
}

#[test]
fn errors() {
    let tall = Matrix::zeros(3, 2);
    assert!(matches!(solve_assignment(&tall), Err(Error::MoreRowsThanColumns { rows: 3, cols: 2 })));
    let bad = Matrix::from_rows(&[&[0.0, f64::NAN]]).unwrap();
    assert!(matches!(solve_assignment(&bad), Err(Error::NonFiniteCost { row: 0, col: 1 })));
}

#[test]
fn forty_by_eighty_budget() {
    let mut rng = Rng::new(4080);
    let instances: Vec<Matrix> = (0..1000).map(|_| random_cost(&mut rng, 40, 80)).collect();
    let start = Instant::now();
    let mut total = 0.0;
    for c in &instances {
        total += solve_assignment(c).unwrap().total_cost;
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(total.is_finite());
    assert!(secs < 20.0, "1000 solves took {secs:.2}s");
}

#[test]
fn zero_cost_edge_is_taken() {
    let y = FeatureMatrix::normalized(2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.2]).unwrap();
    let x = FeatureMatrix::normalized(2, &[0.6, -0.8, 0.0, 1.0]).unwrap();
    let mined = mine_positive_pairs(&x, &y).unwrap();
    assert_eq!(mined.association.matched_col(1), 1);

    // With an exact copy present, solver and oracle agree pair for pair.
    let mut rng = Rng::new(3);
    for _ in 0..300 {
        let y = FeatureMatrix::normalized(4, &(0..12).map(|_| rng.normal()).collect::<Vec<_>>()).unwrap();
        let pick = rng.below(3);
        let mut xraw: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        xraw.extend_from_slice(y.col(pick));
        let x = FeatureMatrix::normalized(4, &xraw).unwrap();
        let cost = isr_core::cosine_cost(&x, &y).unwrap();
        let fast = solve_assignment(&cost).unwrap();
        assert_eq!(fast.pairs, brute_force_assignment(&cost).unwrap().pairs);
    }
}

#[test]
fn mining_swaps_and_identity() {
    let raw = [1.0, 0.0, 0.0, 1.0, 0.7, 0.7];
    let x = FeatureMatrix::normalized(2, &raw).unwrap();
    let mined = mine_positive_pairs(&x, &x).unwrap();
    assert_eq!(mined.association.assignment(), &[0, 1, 2]);
    let y = x.select(&[2, 0]);
    let mined = mine_positive_pairs(&x, &y).unwrap();
    assert!(mined.swapped);
    assert_eq!((mined.association.rows(), mined.association.cols()), (2, 3));
    assert_eq!(mined.xy_pairs(), vec![(2, 0), (0, 1)]);
    assert!(matches!(mine_positive_pairs(&x, &FeatureMatrix::empty(2)), Err(Error::EmptyFrame)));
}

fn cost_strategy() -> impl Strategy<Value = Matrix> {
    (1usize..=7)
        .prop_flat_map(|n| (1usize..=n, Just(n)))
        .prop_flat_map(|(m, n)| {
            proptest::collection::vec(0.0f64..2.0, m * n)
                .prop_map(move |d| Matrix::from_row_major(m, n, d).unwrap())
        })
}

proptest! {
    #[test]
    fn optimal_and_feasible(c in cost_strategy()) {
        let fast = solve_assignment(&c).unwrap();
        let slow = brute_force_assignment(&c).unwrap();
        prop_assert!((fast.total_cost - slow.total_cost).abs() <= 1e-9);
        prop_assert!(feasible(&fast.pairs, c.rows(), c.cols()));
        let sum: f64 = fast.pairs.iter().map(|&(i, j)| c.get(i, j)).sum();
        prop_assert!((sum - fast.total_cost).abs() <= 1e-9);
    }

    #[test]
    fn row_offsets_shift_cost_only(c in cost_strategy(), shift in -1.0f64..1.0) {
        let mut shifted = c.clone();
        for j in 0..c.cols() {
            shifted.set(0, j, c.get(0, j) + shift);
        }
        let a = solve_assignment(&c).unwrap();
        let b = solve_assignment(&shifted).unwrap();
        prop_assert!((b.total_cost - a.total_cost - shift).abs() <= 1e-9);
    }

    #[test]
    fn association_invariants(seed in any::<u64>(), m in 1usize..6, extra in 0usize..4) {
        let mut rng = Rng::new(seed);
        let n = m + extra;
        let x = FeatureMatrix::normalized(3, &(0..3 * m).map(|_| rng.normal()).collect::<Vec<_>>()).unwrap();
        let y = FeatureMatrix::normalized(3, &(0..3 * n).map(|_| rng.normal()).collect::<Vec<_>>()).unwrap();
        let mined = mine_positive_pairs(&x, &y).unwrap();
        let dense = mined.association.to_dense();
        for row in &dense {
            prop_assert_eq!(row.iter().filter(|&&b| b).count(), 1);
        }
        for j in 0..n {
            prop_assert!(dense.iter().filter(|r| r[j]).count() <= 1);
        }
    }
}
