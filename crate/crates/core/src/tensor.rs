//! Fixed-size first, second and third order tensors and their contraction algebra.
//!
//! Index conventions used throughout the crate:
//! - `Dθ_ij = ∂_j θ_i`, `(D²θ)_ijk = ∂_j ∂_k θ_i`.
//! - `transpose3(S)_ijk = S_kij`, so that `a·S b c = b·Sᵀ c a`.
//! - `matvec3(S, c)_ij = Σ_k S_ijk c_k`, `apply3(S, b, c)_i = Σ_jk S_ijk b_j c_k`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector<const D: usize>([f64; D]);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix<const D: usize>([[f64; D]; D]);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor3<const D: usize>([[[f64; D]; D]; D]);

pub type Vec2 = Vector<2>;
pub type Mat2 = Matrix<2>;
pub type Ten2 = Tensor3<2>;

fn all_finite(values: impl IntoIterator<Item = f64>) -> bool {
    values.into_iter().all(f64::is_finite)
}

impl<const D: usize> Vector<D> {
    pub const fn new(c: [f64; D]) -> Self {
        Vector(c)
    }

    /// Checked constructor rejecting NaN and infinities.
    pub fn try_new(c: [f64; D]) -> Result<Self> {
        if all_finite(c) {
            Ok(Vector(c))
        } else {
            Err(Error::invalid(format!("non-finite vector {c:?}")))
        }
    }

    pub const fn zero() -> Self {
        Vector([0.0; D])
    }

    pub fn unit(i: usize) -> Self {
        let mut v = Self::zero();
        v.0[i] = 1.0;
        v
    }

    pub fn from_fn(f: impl Fn(usize) -> f64) -> Self {
        Vector(std::array::from_fn(f))
    }

    pub fn as_array(&self) -> &[f64; D] {
        &self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        (0..D).map(|i| self.0[i] * other.0[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn outer(&self, other: &Self) -> Matrix<D> {
        Matrix::from_fn(|i, j| self.0[i] * other.0[j])
    }

    pub fn is_finite(&self) -> bool {
        all_finite(self.0)
    }
}

impl Vec2 {
    pub const fn xy(x: f64, y: f64) -> Self {
        Vector([x, y])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(&self) -> Self {
        Vector([-self.0[1], self.0[0]])
    }

    /// z-component of the planar cross product.
    pub fn cross(&self, other: &Self) -> f64 {
        self.0[0] * other.0[1] - self.0[1] * other.0[0]
    }
}

impl<const D: usize> Matrix<D> {
    pub const fn new(m: [[f64; D]; D]) -> Self {
        Matrix(m)
    }

    pub fn try_new(m: [[f64; D]; D]) -> Result<Self> {
        if all_finite(m.iter().flatten().copied()) {
            Ok(Matrix(m))
        } else {
            Err(Error::invalid(format!("non-finite matrix {m:?}")))
        }
    }

    pub const fn zero() -> Self {
        Matrix([[0.0; D]; D])
    }

    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(d: [f64; D]) -> Self {
        Self::from_fn(|i, j| if i == j { d[i] } else { 0.0 })
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> f64) -> Self {
        Matrix(std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))))
    }

    pub fn as_array(&self) -> &[[f64; D]; D] {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn trace(&self) -> f64 {
        (0..D).map(|i| self.0[i][i]).sum()
    }

    pub fn double_dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            for j in 0..D {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.double_dot(self).sqrt()
    }

    pub fn matvec(&self, v: &Vector<D>) -> Vector<D> {
        Vector::from_fn(|i| (0..D).map(|j| self.0[i][j] * v.0[j]).sum())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self::from_fn(|i, j| (0..D).map(|k| self.0[i][k] * other.0[k][j]).sum())
    }

    pub fn sym(&self) -> Self {
        (*self + self.transpose()) * 0.5
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.norm().max(1.0);
        (0..D).all(|i| (0..D).all(|j| (self.0[i][j] - self.0[j][i]).abs() <= tol * scale))
    }

    pub fn is_finite(&self) -> bool {
        all_finite(self.0.iter().flatten().copied())
    }
}

impl Mat2 {
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Matrix([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]))
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_sym_eigenvalue(&self) -> f64 {
        let s = self.sym();
        let m = &s.0;
        let mean = 0.5 * (m[0][0] + m[1][1]);
        let half = 0.5 * (m[0][0] - m[1][1]);
        mean - (half * half + m[0][1] * m[0][1]).sqrt()
    }
}

impl Matrix<3> {
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

impl<const D: usize> Tensor3<D> {
    pub const fn new(t: [[[f64; D]; D]; D]) -> Self {
        Tensor3(t)
    }

    pub fn try_new(t: [[[f64; D]; D]; D]) -> Result<Self> {
        if all_finite(t.iter().flatten().flatten().copied()) {
            Ok(Tensor3(t))
        } else {
            Err(Error::invalid("non-finite third-order tensor"))
        }
    }

    pub const fn zero() -> Self {
        Tensor3([[[0.0; D]; D]; D])
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize) -> f64) -> Self {
        Tensor3(std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| f(i, j, k)))))
    }

    pub fn as_array(&self) -> &[[[f64; D]; D]; D] {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.0[i][j][k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.0[i][j][k] = v;
    }

    pub fn transpose3(&self) -> Self {
        Self::from_fn(|i, j, k| self.0[k][i][j])
    }

    pub fn triple_dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    s += self.0[i][j][k] * other.0[i][j][k];
                }
            }
        }
        s
    }

    pub fn matvec3(&self, c: &Vector<D>) -> Matrix<D> {
        Matrix::from_fn(|i, j| (0..D).map(|k| self.0[i][j][k] * c.0[k]).sum())
    }

    pub fn apply3(&self, b: &Vector<D>, c: &Vector<D>) -> Vector<D> {
        Vector::from_fn(|i| {
            let mut s = 0.0;
            for j in 0..D {
                for k in 0..D {
                    s += self.0[i][j][k] * b.0[j] * c.0[k];
                }
            }
            s
        })
    }

    /// Vector with entries `Σ_k T_ikk` (the Laplacian of a field whose Hessian is `T`).
    pub fn trace23(&self) -> Vector<D> {
        Vector::from_fn(|i| (0..D).map(|k| self.0[i][k][k]).sum())
    }

    pub fn norm(&self) -> f64 {
        self.triple_dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        all_finite(self.0.iter().flatten().flatten().copied())
    }
}

pub fn double_dot<const D: usize>(s: &Matrix<D>, t: &Matrix<D>) -> f64 {
    s.double_dot(t)
}

pub fn triple_dot<const D: usize>(s: &Tensor3<D>, t: &Tensor3<D>) -> f64 {
    s.triple_dot(t)
}

pub fn transpose3<const D: usize>(s: &Tensor3<D>) -> Tensor3<D> {
    s.transpose3()
}

pub fn apply3<const D: usize>(s: &Tensor3<D>, b: &Vector<D>, c: &Vector<D>) -> Vector<D> {
    s.apply3(b, c)
}

pub fn matvec3<const D: usize>(s: &Tensor3<D>, c: &Vector<D>) -> Matrix<D> {
    s.matvec3(c)
}

pub fn outer<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> Matrix<D> {
    a.outer(b)
}

/// `[a ⊗ T]_ijk = a_i T_jk`.
pub fn outer_vm<const D: usize>(a: &Vector<D>, t: &Matrix<D>) -> Tensor3<D> {
    Tensor3::from_fn(|i, j, k| a.0[i] * t.0[j][k])
}

/// `[T ⊗ a]_ijk = T_ij a_k`.
pub fn outer_mv<const D: usize>(t: &Matrix<D>, a: &Vector<D>) -> Tensor3<D> {
    Tensor3::from_fn(|i, j, k| t.0[i][j] * a.0[k])
}

const HESSIAN_SYMMETRY_TOL: f64 = 1e-12;

fn check_hessian<const D: usize>(h: &Matrix<D>) -> Result<()> {
    if h.is_symmetric(HESSIAN_SYMMETRY_TOL) {
        Ok(())
    } else {
        Err(Error::invalid(format!("Hessian is not symmetric: {h:?}")))
    }
}

/// Rate of change at `s = 0` of the transported Hessian `D²(ψ∘T_s⁻¹)∘T_s`:
/// `−Dθᵀ D²ψ − D²ψ Dθ − (D²θ)ᵀ∇ψ`.
pub fn transported_hessian_rate<const D: usize>(
    psi_grad: &Vector<D>,
    psi_hess: &Matrix<D>,
    theta_jac: &Matrix<D>,
    theta_hess: &Tensor3<D>,
) -> Result<Matrix<D>> {
    check_hessian(psi_hess)?;
    let first = theta_jac.transpose().matmul(psi_hess) + psi_hess.matmul(theta_jac);
    let second = theta_hess.transpose3().matvec3(psi_grad);
    Ok(-(first + second))
}

/// Rate of change at `s = 0` of the transported Laplacian: `−2 D²ψ : Dθ − Δθ·∇ψ`.
pub fn transported_laplacian_rate<const D: usize>(
    psi_grad: &Vector<D>,
    psi_hess: &Matrix<D>,
    theta_jac: &Matrix<D>,
    theta_hess: &Tensor3<D>,
) -> Result<f64> {
    let closed = -2.0 * psi_hess.double_dot(theta_jac) - theta_hess.trace23().dot(psi_grad);
    let traced = transported_hessian_rate(psi_grad, psi_hess, theta_jac, theta_hess)?.trace();
    let scale = 1.0 + psi_hess.norm() * theta_jac.norm() + theta_hess.norm() * psi_grad.norm();
    debug_assert!((closed - traced).abs() <= 1e-12 * scale);
    Ok(closed)
}

macro_rules! impl_linear_ops {
    ($ty:ident) => {
        impl<const D: usize> Add for $ty<D> {
            type Output = Self;
            fn add(mut self, rhs: Self) -> Self {
                self += rhs;
                self
            }
        }

        impl<const D: usize> Sub for $ty<D> {
            type Output = Self;
            fn sub(mut self, rhs: Self) -> Self {
                self -= rhs;
                self
            }
        }

        impl<const D: usize> Neg for $ty<D> {
            type Output = Self;
            fn neg(self) -> Self {
                self * -1.0
            }
        }

        impl<const D: usize> Mul<$ty<D>> for f64 {
            type Output = $ty<D>;
            fn mul(self, rhs: $ty<D>) -> $ty<D> {
                rhs * self
            }
        }
    };
}

impl_linear_ops!(Vector);
impl_linear_ops!(Matrix);
impl_linear_ops!(Tensor3);

impl<const D: usize> AddAssign for Vector<D> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..D {
            self.0[i] += rhs.0[i];
        }
    }
}

impl<const D: usize> SubAssign for Vector<D> {
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..D {
            self.0[i] -= rhs.0[i];
        }
    }
}

impl<const D: usize> Mul<f64> for Vector<D> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Vector(self.0.map(|x| x * rhs))
    }
}

impl<const D: usize> AddAssign for Matrix<D> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..D {
            for j in 0..D {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl<const D: usize> SubAssign for Matrix<D> {
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..D {
            for j in 0..D {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
    }
}

impl<const D: usize> Mul<f64> for Matrix<D> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Matrix(self.0.map(|row| row.map(|x| x * rhs)))
    }
}

impl<const D: usize> Mul<Vector<D>> for Matrix<D> {
    type Output = Vector<D>;
    fn mul(self, rhs: Vector<D>) -> Vector<D> {
        self.matvec(&rhs)
    }
}

impl<const D: usize> Mul for Matrix<D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.matmul(&rhs)
    }
}

impl<const D: usize> AddAssign for Tensor3<D> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    self.0[i][j][k] += rhs.0[i][j][k];
                }
            }
        }
    }
}

impl<const D: usize> SubAssign for Tensor3<D> {
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    self.0[i][j][k] -= rhs.0[i][j][k];
                }
            }
        }
    }
}

impl<const D: usize> Mul<f64> for Tensor3<D> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Tensor3(self.0.map(|m| m.map(|row| row.map(|x| x * rhs))))
    }
}

impl<const D: usize> Index<usize> for Vector<D> {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<const D: usize> IndexMut<usize> for Vector<D> {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<const D: usize> Index<(usize, usize)> for Matrix<D> {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl<const D: usize> IndexMut<(usize, usize)> for Matrix<D> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl<const D: usize> Index<(usize, usize, usize)> for Tensor3<D> {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.0[i][j][k]
    }
}

impl<const D: usize> IndexMut<(usize, usize, usize)> for Tensor3<D> {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.0[i][j][k]
    }
}
