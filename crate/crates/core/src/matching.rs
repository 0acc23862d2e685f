//! Minimum-cost rectangular bipartite assignment.
//!
//! Every row of an `m x n` cost matrix (`m <= n`) is assigned a distinct column so the
//! total cost is minimal. Columns may stay unassigned.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::types::{cosine_cost, AssociationMatrix, FeatureMatrix, Matrix};

/// Costs within this distance of the optimum count as ties.
pub const TIE_TOL: f64 = 1e-9;

/// Largest side accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_BOUND: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `(row, column)` pairs in ascending row order.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Matching {
    fn from_assignment(cost: &Matrix, assign: &[usize]) -> Self {
        let pairs: Vec<(usize, usize)> = assign.iter().copied().enumerate().collect();
        let total_cost = pairs.iter().map(|&(i, j)| cost.get(i, j)).sum();
        Self { pairs, total_cost }
    }

    pub fn columns(&self) -> Vec<usize> {
        self.pairs.iter().map(|&(_, j)| j).collect()
    }
}

fn check(cost: &Matrix) -> Result<()> {
    if cost.rows() > cost.cols() {
        return Err(Error::MoreRowsThanColumns {
            rows: cost.rows(),
            cols: cost.cols(),
        });
    }
    for i in 0..cost.rows() {
        for (j, v) in cost.row(i).iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteCost { row: i, col: j });
            }
        }
    }
    Ok(())
}

struct Solution {
    assign: Vec<usize>,
    row_pot: Vec<f64>,
    col_pot: Vec<f64>,
}

/// Shortest-augmenting-path Hungarian method with potentials, `O(m^2 n)`.
///
/// `cost(i, j)` is read through a closure so sub-problems need no copies.
fn hungarian(m: usize, n: usize, cost: impl Fn(usize, usize) -> f64) -> Solution {
    // 1-based internally; index 0 is the virtual source column.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=m {
        owner[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|x| *x = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; m];
    for j in 1..=n {
        if owner[j] != 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    Solution {
        assign,
        row_pot: u[1..].to_vec(),
        col_pot: v[1..].to_vec(),
    }
}

/// Optimal assignment of every row to a distinct column.
///
/// Among optima (costs within [`TIE_TOL`]) the lexicographically smallest column
/// sequence is returned. Candidates for an earlier column are limited to edges that are
/// tight under the optimal dual potentials, so untied instances pay no extra cost.
pub fn solve_assignment(cost: &Matrix) -> Result<Matching> {
    check(cost)?;
    let (m, n) = (cost.rows(), cost.cols());
    if m == 0 {
        return Ok(Matching {
            pairs: Vec::new(),
            total_cost: 0.0,
        });
    }
    let sol = hungarian(m, n, |i, j| cost.get(i, j));
    let optimum: f64 = sol.assign.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
    let tol = TIE_TOL * (1.0 + optimum.abs());

    let mut assign = sol.assign.clone();
    let mut taken = vec![false; n];
    let mut fixed_cost = 0.0;
    for i in 0..m {
        let current = assign[i];
        for j in 0..current {
            if taken[j] {
                continue;
            }
            let reduced = cost.get(i, j) - sol.row_pot[i] - sol.col_pot[j];
            if reduced.abs() > tol {
                continue;
            }
            // Rows 0..=i fixed; re-solve the remainder on the free columns.
            let free: Vec<usize> = (0..n).filter(|&c| !taken[c] && c != j).collect();
            let rest = m - i - 1;
            let sub = hungarian(rest, free.len(), |r, c| cost.get(i + 1 + r, free[c]));
            let sub_cost: f64 = sub
                .assign
                .iter()
                .enumerate()
                .map(|(r, &c)| cost.get(i + 1 + r, free[c]))
                .sum();
            if fixed_cost + cost.get(i, j) + sub_cost <= optimum + tol {
                assign[i] = j;
                for (r, &c) in sub.assign.iter().enumerate() {
                    assign[i + 1 + r] = free[c];
                }
                break;
            }
        }
        taken[assign[i]] = true;
        fixed_cost += cost.get(i, assign[i]);
    }
    Ok(Matching::from_assignment(cost, &assign))
}

/// Exact minimum by enumerating all injective row-to-column maps in lexicographic order.
pub fn brute_force_assignment(cost: &Matrix) -> Result<Matching> {
    check(cost)?;
    let (m, n) = (cost.rows(), cost.cols());
    if n > BRUTE_FORCE_BOUND {
        return Err(Error::EnumerationBound {
            rows: m,
            cols: n,
            bound: BRUTE_FORCE_BOUND,
        });
    }

    struct Search<'a> {
        cost: &'a Matrix,
        current: Vec<usize>,
        used: Vec<bool>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Search<'_> {
        fn visit(&mut self, row: usize, acc: f64) {
            if row == self.cost.rows() {
                let better = match &self.best {
                    None => true,
                    Some((b, _)) => acc < *b - TIE_TOL * (1.0 + b.abs()),
                };
                if better {
                    self.best = Some((acc, self.current.clone()));
                }
                return;
            }
            for j in 0..self.cost.cols() {
                if self.used[j] {
                    continue;
                }
                self.used[j] = true;
                self.current.push(j);
                self.visit(row + 1, acc + self.cost.get(row, j));
                self.current.pop();
                self.used[j] = false;
            }
        }
    }

    let mut search = Search {
        cost,
        current: Vec::with_capacity(m),
        used: vec![false; n],
        best: None,
    };
    search.visit(0, 0.0);
    let (_, assign) = search.best.unwrap_or_default();
    Ok(Matching::from_assignment(cost, &assign))
}

/// Positive pairs mined between two frames.
#[derive(Debug, Clone, PartialEq)]
pub struct MinedPairs {
    /// Rows index the smaller side; when `swapped`, rows are columns of `Y`.
    pub association: AssociationMatrix,
    pub swapped: bool,
    pub total_cost: f64,
}

impl MinedPairs {
    /// `(index in X, index in Y)` for every mined pair.
    pub fn xy_pairs(&self) -> Vec<(usize, usize)> {
        self.association
            .assignment()
            .iter()
            .enumerate()
            .map(|(r, &c)| if self.swapped { (c, r) } else { (r, c) })
            .collect()
    }
}

/// Optimal cross-frame matching under cosine cost, swapping sides when `X` is larger.
pub fn mine_positive_pairs(x: &FeatureMatrix, y: &FeatureMatrix) -> Result<MinedPairs> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let swapped = x.len() > y.len();
    let (rows, cols) = if swapped { (y, x) } else { (x, y) };
    let cost = cosine_cost(rows, cols)?;
    let m = solve_assignment(&cost)?;
    Ok(MinedPairs {
        association: AssociationMatrix::from_assignment(m.columns(), cols.len())?,
        swapped,
        total_cost: m.total_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn dominant_diagonal() {
        let m = solve_assignment(&mat(&[&[0.1, 0.9], &[0.8, 0.2]])).unwrap();
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert!((m.total_cost - 0.3).abs() < 1e-12);
    }

    #[test]
    fn single_row_takes_argmin() {
        let m = solve_assignment(&mat(&[&[0.7, 0.2, 0.5]])).unwrap();
        assert_eq!(m.pairs, vec![(0, 1)]);
        assert!((m.total_cost - 0.2).abs() < 1e-12);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let m = solve_assignment(&mat(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(m.total_cost, 2.0);
        let m = solve_assignment(&mat(&[&[0.0; 4], &[0.0; 4], &[0.0; 4]])).unwrap();
        assert_eq!(m.columns(), vec![0, 1, 2]);
        // Optima [1,0], [1,2] and [2,0] all cost 2.
        let c = mat(&[&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.0]]);
        assert_eq!(solve_assignment(&c).unwrap().columns(), vec![1, 0]);
        assert_eq!(brute_force_assignment(&c).unwrap().columns(), vec![1, 0]);
    }

    #[test]
    fn brute_force_basics() {
        let m = brute_force_assignment(&mat(&[&[0.4]])).unwrap();
        assert_eq!(m.pairs, vec![(0, 0)]);
        assert_eq!(m.total_cost, 0.4);
        let m = brute_force_assignment(&mat(&[&[0.3, 0.3], &[0.3, 0.3]])).unwrap();
        assert_eq!(m.total_cost, 0.6);
        let big = Matrix::zeros(2, 9);
        assert!(matches!(brute_force_assignment(&big), Err(Error::EnumerationBound { .. })));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            solve_assignment(&Matrix::zeros(3, 2)),
            Err(Error::MoreRowsThanColumns { rows: 3, cols: 2 })
        ));
        assert!(matches!(
            solve_assignment(&mat(&[&[0.0, f64::NAN]])),
            Err(Error::NonFiniteCost { row: 0, col: 1 })
        ));
        assert!(solve_assignment(&Matrix::zeros(0, 3)).unwrap().pairs.is_empty());
    }

    #[test]
    fn mining_identity_and_swap() {
        let x = FeatureMatrix::normalized(2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let mined = mine_positive_pairs(&x, &x).unwrap();
        assert!(!mined.swapped);
        assert_eq!(mined.association.assignment(), &[0, 1, 2]);

        let y = FeatureMatrix::normalized(2, &[0.0, 1.0, 1.0, 0.1]).unwrap();
        let mined = mine_positive_pairs(&x, &y).unwrap();
        assert!(mined.swapped);
        assert_eq!(mined.association.rows(), 2);
        assert_eq!(mined.association.cols(), 3);
        assert_eq!(mined.xy_pairs(), vec![(1, 0), (0, 1)]);

        assert_eq!(mine_positive_pairs(&x, &FeatureMatrix::empty(2)), Err(Error::EmptyFrame));
    }
}
