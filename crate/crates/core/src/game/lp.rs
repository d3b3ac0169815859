//! Zero-sum matrix games via the standard linear program.
//!
//! The payoff matrix is shifted so every entry is at least one, then the
//! column player's program `max 1ᵀv  s.t.  A v ≤ 1, v ≥ 0` is solved with a
//! dense tableau simplex under Bland's rule. The row player's strategy is
//! read off the slack reduced costs (the dual). The shift changes neither
//! player's optimal strategies.

use super::Matrix;
use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    pub row_policy: Vec<f64>,
    pub col_policy: Vec<f64>,
    pub value: f64,
}

/// Best pure deviation gains `(row, col)` against the pair `(p, q)`.
///
/// `row` is `max_i (M q)_i - pᵀMq`, `col` is `pᵀMq - min_j (pᵀM)_j`.
pub fn exploitability(m: &Matrix, p: &[f64], q: &[f64]) -> (f64, f64) {
    let v = m.bilinear(p, q);
    let best_row = m.mul_col(q).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let best_col = m.mul_row(p).into_iter().fold(f64::INFINITY, f64::min);
    (best_row - v, v - best_col)
}

/// Row maximizing `M · col`, ties to the lowest index.
pub fn best_response_row(m: &Matrix, col: &[f64]) -> Result<(usize, f64)> {
    if col.len() != m.cols() {
        return Err(Error::Shape(format!("column distribution has {} entries, matrix has {} columns", col.len(), m.cols())));
    }
    Ok(argmax_first(&m.mul_col(col)))
}

/// Column minimizing `rowᵀ · M`, ties to the lowest index.
pub fn best_response_col(m: &Matrix, row: &[f64]) -> Result<(usize, f64)> {
    if row.len() != m.rows() {
        return Err(Error::Shape(format!("row distribution has {} entries, matrix has {} rows", row.len(), m.rows())));
    }
    let (i, v) = argmax_first(&m.mul_row(row).into_iter().map(|v| -v).collect::<Vec<_>>());
    Ok((i, -v))
}

pub(crate) fn argmax_first(v: &[f64]) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

pub(crate) fn argmin_first(v: &[f64]) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < best.1 {
            best = (i, x);
        }
    }
    best
}

/// Mixed-strategy saddle point of the zero-sum game `M` (row maximizes).
///
/// Both exploitabilities of the returned pair are at most
/// `tol · max(1, max|M|)`; otherwise [`Error::SolverInaccurate`] is returned.
pub fn solve_matrix_game(m: &Matrix, tol: f64) -> Result<MatrixGameSolution> {
    if let Some(i) = m.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("payoff entry ({}, {}) is not finite", i / m.cols(), i % m.cols())));
    }
    let (rows, cols) = (m.rows(), m.cols());

    let lo = m.data().iter().copied().fold(f64::INFINITY, f64::min);
    let scale = m.data().iter().fold(1.0f64, |s, v| s.max(v.abs()));

    let (row_policy, col_policy) = if m.data().iter().all(|&v| v == lo) {
        // Constant game: the LP below would pivot once and return a vertex;
        // pure first actions are just as valid and cheaper.
        (unit(rows, 0), unit(cols, 0))
    } else {
        simplex_saddle(m, 1.0 - lo)?
    };

    let value = m.bilinear(&row_policy, &col_policy);
    let (gr, gc) = exploitability(m, &row_policy, &col_policy);
    let worst = gr.max(gc);
    if worst > tol * scale {
        return Err(Error::SolverInaccurate { exploitability: worst, tol: tol * scale });
    }
    Ok(MatrixGameSolution { row_policy, col_policy, value })
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn simplex_saddle(m: &Matrix, shift: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (rows, cols) = (m.rows(), m.cols());
    let width = cols + rows + 1;
    let rhs = width - 1;
    let mut t = vec![0.0; rows * width];
    for i in 0..rows {
        for j in 0..cols {
            t[i * width + j] = m.get(i, j) + shift;
        }
        t[i * width + cols + i] = 1.0;
        t[i * width + rhs] = 1.0;
    }
    // Reduced costs; the last slot holds minus the objective value.
    let mut obj = vec![0.0; width];
    obj[..cols].fill(1.0);
    let mut basis: Vec<usize> = (cols..cols + rows).collect();

    let cap = 50 * (rows + cols) + 100;
    let mut iterations = 0;
    while let Some(enter) = (0..cols + rows).find(|&j| obj[j] > PIVOT_EPS) {
        iterations += 1;
        if iterations > cap {
            return Err(Error::SolverDiverged { iterations: cap });
        }
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let a = t[i * width + enter];
            if a > PIVOT_EPS {
                let ratio = t[i * width + rhs] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-15 || ((ratio - lr).abs() <= 1e-15 && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        // Bounded because every entry of A is positive.
        let (p, _) = leave.ok_or(Error::SolverDiverged { iterations })?;

        let piv = t[p * width + enter];
        for v in &mut t[p * width..(p + 1) * width] {
            *v /= piv;
        }
        let prow: Vec<f64> = t[p * width..(p + 1) * width].to_vec();
        for i in 0..rows {
            if i == p {
                continue;
            }
            let f = t[i * width + enter];
            if f != 0.0 {
                for (v, pv) in t[i * width..(i + 1) * width].iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        let f = obj[enter];
        for (v, pv) in obj.iter_mut().zip(&prow) {
            *v -= f * pv;
        }
        basis[p] = enter;
    }

    let mut v = vec![0.0; cols];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < cols {
            v[bv] = t[i * width + rhs].max(0.0);
        }
    }
    let y: Vec<f64> = (0..rows).map(|i| (-obj[cols + i]).max(0.0)).collect();
    Ok((normalize(y)?, normalize(v)?))
}

fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let s: f64 = v.iter().sum();
    if !(s > 0.0) {
        return Err(Error::Numerical("degenerate simplex solution".into()));
    }
    for x in &mut v {
        *x /= s;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Brute-force value of a 2-row game: grid over the row player's mix.
    fn grid_value_2rows(m: &Matrix, step: f64) -> f64 {
        let n = (1.0 / step).round() as usize;
        (0..=n)
            .map(|k| {
                let p = k as f64 / n as f64;
                m.mul_row(&[p, 1.0 - p]).into_iter().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn matching_pennies() {
        let s = solve_matrix_game(&mat(&[&[1.0, -1.0], &[-1.0, 1.0]]), 1e-9).unwrap();
        assert!(s.value.abs() < 1e-12);
        for p in s.row_policy.iter().chain(&s.col_policy) {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton() {
        let s = solve_matrix_game(&mat(&[&[3.0]]), 1e-9).unwrap();
        assert_eq!(s.value, 3.0);
        assert_eq!((s.row_policy, s.col_policy), (vec![1.0], vec![1.0]));
    }

    #[test]
    fn anti_diagonal_matches_grid_oracle() {
        let m = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        // oracle computed before the solver existed: 0.5 at p = 0.5
        let oracle = grid_value_2rows(&m, 1e-3);
        assert!((oracle - 0.5).abs() < 1e-12);
        let s = solve_matrix_game(&m, 1e-9).unwrap();
        assert!((s.value - oracle).abs() < 1e-9);
        assert!((s.row_policy[0] - 0.5).abs() < 1e-9 && (s.col_policy[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dominance() {
        let s = solve_matrix_game(&mat(&[&[2.0, 2.0], &[0.0, 0.0]]), 1e-9).unwrap();
        assert!((s.value - 2.0).abs() < 1e-12);
        assert!((s.row_policy[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(solve_matrix_game(&mat(&[&[f64::NAN, 0.0]]), 1e-9), Err(Error::Input(_))));
    }

    #[test]
    fn best_responses() {
        let m = mat(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        assert_eq!(best_response_row(&m, &[1.0, 0.0]).unwrap(), (0, 1.0));
        let z = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(best_response_row(&z, &[0.5, 0.5]).unwrap(), (0, 0.5));
        assert!(best_response_row(&z, &[1.0]).is_err());
        assert_eq!(best_response_col(&m, &[1.0, 0.0]).unwrap(), (1, -1.0));
    }

    fn arb_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..=5, 1usize..=5).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-2.0f64..2.0, r * c).prop_map(move |d| Matrix::new(r, c, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn saddle_point_and_duality(m in arb_matrix()) {
            let s = solve_matrix_game(&m, 1e-9).unwrap();
            let (gr, gc) = exploitability(&m, &s.row_policy, &s.col_policy);
            prop_assert!(gr <= 1e-9 && gc <= 1e-9);
            let t = solve_matrix_game(&m.negated_transpose(), 1e-9).unwrap();
            prop_assert!((s.value + t.value).abs() <= 1e-9);
        }

        #[test]
        fn best_response_matches_exhaustive_scan(d in proptest::collection::vec(-1.0f64..1.0, 9), w in proptest::collection::vec(0.01f64..1.0, 3)) {
            let m = Matrix::new(3, 3, d).unwrap();
            let s: f64 = w.iter().sum();
            let q: Vec<f64> = w.iter().map(|x| x / s).collect();
            let (i, v) = best_response_row(&m, &q).unwrap();
            let payoffs: Vec<f64> = (0..3).map(|r| (0..3).map(|c| m.get(r, c) * q[c]).sum()).collect();
            let mut best = 0;
            for r in 1..3 { if payoffs[r] > payoffs[best] { best = r; } }
            prop_assert_eq!(i, best);
            prop_assert!((v - payoffs[best]).abs() < 1e-15);
        }
    }
}
