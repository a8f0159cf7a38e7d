//! Small dense matrices and the two power iterations the crate needs:
//! the stationary vector of a stochastic matrix and the Perron root of a
//! nonnegative irreducible matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums may deviate from 1 by at most this much before a matrix is
/// rejected as non-stochastic.
pub const STOCHASTIC_TOL: f64 = 1e-9;
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 100_000;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(Error::InvalidParameter("matrix has no rows".into()));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter("matrix rows have unequal or zero length".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        Ok(Self { rows: n_rows, cols, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Checks nonnegativity and unit row sums within `tol`.
    pub fn check_row_stochastic(&self, tol: f64) -> Result<()> {
        for r in 0..self.rows {
            let row = self.row(r);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > tol {
                return Err(Error::NonStochastic { row: r, sum });
            }
        }
        Ok(())
    }

    /// Strong connectivity of the directed graph with an edge `i -> j`
    /// whenever entry `(i, j)` is positive.
    pub fn is_irreducible(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; self.rows];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..self.rows {
                    let w = if forward { self.get(i, j) } else { self.get(j, i) };
                    if w > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// `v · M`
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.row(r)) {
                *o += vr * m;
            }
        }
        out
    }

    /// `M · v`
    pub fn right_mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(m, x)| m * x).sum())
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

/// Stationary vector `π` with `π T = π` of an irreducible row-stochastic
/// matrix.
///
/// Iterates the lazy chain `(I + T) / 2`, which shares `π` with `T` but is
/// aperiodic, so periodic chains converge too.
pub fn stationary_vector(transition: &Matrix) -> Result<Vec<f64>> {
    if !transition.is_square() {
        return Err(Error::InvalidParameter("transition matrix must be square".into()));
    }
    transition.check_row_stochastic(STOCHASTIC_TOL)?;
    if !transition.is_irreducible() {
        return Err(Error::Reducible);
    }
    let n = transition.rows();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..MAX_ITERATIONS {
        let step = transition.left_mul(&pi);
        let residual = step.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual < RESIDUAL_TOL {
            let total: f64 = step.iter().sum();
            return Ok(step.into_iter().map(|v| v / total).collect());
        }
        let total: f64 = step.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).sum();
        pi = step.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b) / total).collect();
    }
    Err(Error::NonConvergent { iterations: MAX_ITERATIONS })
}

/// Perron root of a nonnegative irreducible square matrix.
///
/// Starts from the all-ones vector and iterates `A + I` (same Perron vector,
/// strictly dominant eigenvalue) until `‖A v − λ v‖∞ < 1e−12` with
/// `‖v‖∞ = 1`.
pub fn perron_root(matrix: &Matrix) -> Result<f64> {
    if !matrix.is_square() {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    if matrix.data.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter("matrix has negative entries".into()));
    }
    if !matrix.is_irreducible() {
        return Err(Error::Reducible);
    }
    let mut v = vec![1.0; matrix.rows()];
    for _ in 0..MAX_ITERATIONS {
        let av = matrix.right_mul(&v);
        let lambda = av.iter().sum::<f64>() / v.iter().sum::<f64>();
        let residual = av.iter().zip(&v).map(|(a, x)| (a - lambda * x).abs()).fold(0.0, f64::max);
        if residual < RESIDUAL_TOL {
            return Ok(lambda);
        }
        let shifted: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a + x).collect();
        let norm = shifted.iter().copied().fold(0.0, f64::max);
        v = shifted.into_iter().map(|x| x / norm).collect();
    }
    Err(Error::NonConvergent { iterations: MAX_ITERATIONS })
}

/// Sum with a fixed pairwise reduction tree, independent of how the input
/// was produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn stationary_symmetric() {
        let pi = stationary_vector(&m(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12 && (pi[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_two_state() {
        // Balance: 0.1 π0 = 0.2 π1.
        let pi = stationary_vector(&m(&[&[0.9, 0.1], &[0.2, 0.8]])).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-11);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn stationary_periodic_chain() {
        let pi = stationary_vector(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_rejects_reducible() {
        assert_eq!(stationary_vector(&m(&[&[1.0, 0.0], &[0.0, 1.0]])), Err(Error::Reducible));
        assert_eq!(stationary_vector(&m(&[&[1.0, 0.0], &[0.3, 0.7]])), Err(Error::Reducible));
    }

    #[test]
    fn stationary_rejects_non_stochastic() {
        assert!(matches!(
            stationary_vector(&m(&[&[0.5, 0.4], &[0.5, 0.5]])),
            Err(Error::NonStochastic { row: 0, .. })
        ));
    }

    #[test]
    fn perron_root_symmetric() {
        let lambda = perron_root(&m(&[&[0.81, 0.01], &[0.01, 0.81]])).unwrap();
        assert!((lambda - 0.82).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
