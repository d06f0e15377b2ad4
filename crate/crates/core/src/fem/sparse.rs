//! Compressed-row matrices, constrained linear systems and sparse direct solves.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}×{n}");
            if last == Some((i, j)) {
                *vals.last_mut().expect("entry") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            out.extend(self.row(i).map(|(j, v)| (i, j, v)));
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.n, self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CsrMatrix { vals: self.vals.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, other: &CsrMatrix, factor: f64) -> Self {
        assert_eq!(self.n, other.n);
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, factor * v)));
        Self::from_triplets(self.n, t)
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol * scale))
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &t)
            .map_err(|e| Error::SingularSystem(format!("matrix conversion failed: {e:?}")))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Matrix, right-hand side and the list of prescribed dofs.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constrained: Vec<(usize, f64)>,
    pub symmetric: bool,
}

impl LinearSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>, symmetric: bool) -> Result<Self> {
        if rhs.len() != matrix.size() {
            return Err(Error::invalid(format!(
                "right-hand side length {} does not match matrix size {}",
                rhs.len(),
                matrix.size()
            )));
        }
        Ok(LinearSystem { matrix, rhs, constrained: Vec::new(), symmetric })
    }

    /// Symmetric elimination of prescribed values: constrained rows and columns are
    /// zeroed, the diagonal set to one, and the right-hand side corrected so the
    /// remaining equations see the prescribed values.
    pub fn constrain(&mut self, dofs: &[(usize, f64)]) {
        let n = self.matrix.size();
        let mut value = vec![None; n];
        for &(d, v) in self.constrained.iter().chain(dofs) {
            value[d] = Some(v);
        }
        let mut t = Vec::with_capacity(self.matrix.nnz());
        for (i, j, a) in self.matrix.triplets() {
            match (value[i], value[j]) {
                (None, None) => t.push((i, j, a)),
                (None, Some(g)) => self.rhs[i] -= a * g,
                _ => {}
            }
        }
        for (d, v) in value.iter().enumerate() {
            if let Some(g) = v {
                t.push((d, d, 1.0));
                self.rhs[d] = *g;
            }
        }
        self.matrix = CsrMatrix::from_triplets(n, t);
        self.constrained = value.iter().enumerate().filter_map(|(d, v)| v.map(|g| (d, g))).collect();
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        let f = Factorization::new(&self.matrix, self.symmetric)?;
        f.solve_checked(&self.matrix, &self.rhs)
    }
}

enum Factor {
    Empty,
    Cholesky(Llt<usize, f64>),
    Lu(Box<Lu<usize, f64>>),
}

/// A reusable sparse factorization (Cholesky for symmetric systems, LU otherwise).
pub struct Factorization {
    n: usize,
    factor: Factor,
}

impl Factorization {
    pub fn new(matrix: &CsrMatrix, symmetric: bool) -> Result<Self> {
        let n = matrix.size();
        if n == 0 {
            return Ok(Factorization { n, factor: Factor::Empty });
        }
        let a = matrix.to_faer()?;
        let factor = if symmetric {
            Factor::Cholesky(
                a.sp_cholesky(Side::Lower)
                    .map_err(|e| Error::SingularSystem(format!("Cholesky factorization failed: {e:?}")))?,
            )
        } else {
            // The simplicial LU kernel panics on an exactly zero pivot instead of returning an error.
            let lu = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| a.sp_lu()))
                .map_err(|_| Error::SingularSystem("LU factorization hit a zero pivot".into()))?;
            Factor::Lu(Box::new(lu.map_err(|e| Error::SingularSystem(format!("LU factorization failed: {e:?}")))?))
        };
        Ok(Factorization { n, factor })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Col::<f64>::from_fn(self.n, |i| rhs[i]);
        let x = match &self.factor {
            Factor::Empty => return Vec::new(),
            Factor::Cholesky(f) => f.solve(&b),
            Factor::Lu(f) => f.solve(&b),
        };
        (0..self.n).map(|i| x[i]).collect()
    }

    /// Solves and verifies `‖Ax − b‖ ≤ 1e-10 (‖b‖ + 1)`.
    pub fn solve_checked(&self, matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        let x = self.solve(rhs);
        let r: Vec<f64> = matrix.matvec(&x).iter().zip(rhs).map(|(a, b)| a - b).collect();
        let res = norm(&r);
        if !res.is_finite() || res > 1e-10 * (norm(rhs) + 1.0) {
            return Err(Error::SingularSystem(format!(
                "residual {res:.3e} exceeds tolerance for right-hand side norm {:.3e}",
                norm(rhs)
            )));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let sys = LinearSystem::new(CsrMatrix::identity(3), vec![1.0, -2.0, 3.5], true).unwrap();
        assert_eq!(sys.solve().unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (1, 1, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![3.0, 5.0]);
        assert_eq!(m.transpose().get(0, 1), 1.0);
        assert!(!m.is_symmetric(1e-14));
    }

    #[test]
    fn constraints_are_idempotent_and_symmetric() {
        let a = CsrMatrix::from_triplets(
            3,
            vec![(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 2.0)],
        );
        let mut sys = LinearSystem::new(a, vec![0.0, 1.0, 0.0], true).unwrap();
        sys.constrain(&[(0, 1.0)]);
        let once = sys.clone();
        sys.constrain(&[(0, 1.0)]);
        assert_eq!(sys.matrix, once.matrix);
        assert_eq!(sys.rhs, once.rhs);
        assert!(sys.matrix.is_symmetric(0.0));
        let x = sys.solve().unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        // Remaining rows: 2x1 − x2 = 1 + 1, −x1 + 2x2 = 0.
        assert!((x[1] - 4.0 / 3.0).abs() < 1e-14 && (x[2] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn fully_constrained_system_returns_prescribed_values() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let mut sys = LinearSystem::new(a, vec![1.0, 2.0], true).unwrap();
        sys.constrain(&[(0, 3.0), (1, -4.0)]);
        assert_eq!(sys.solve().unwrap(), vec![3.0, -4.0]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        let sys = LinearSystem::new(a.clone(), vec![1.0, 0.0], true).unwrap();
        assert!(matches!(sys.solve(), Err(Error::SingularSystem(_))));
        let sys = LinearSystem::new(a, vec![1.0, 0.0], false).unwrap();
        assert!(matches!(sys.solve(), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn general_path_solves_nonsymmetric_system() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]);
        let sys = LinearSystem::new(a, vec![4.0, 6.0], false).unwrap();
        let x = sys.solve().unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }
}
