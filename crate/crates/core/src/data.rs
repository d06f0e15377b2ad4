//! Named catalogs of analytic data functions with closed-form derivatives.
//!
//! Every function used as PDE data (coefficients, sources, boundary data,
//! targets, manufactured fields) comes from one of these catalogs so that
//! gradients and Hessians are exact and no finite differencing enters the
//! derivative formulas.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{Mat2, Ten2, Vec2};

/// `name`, parameter count, parameter meaning.
pub const SCALAR_CATALOG: &[(&str, usize, &str)] = &[
    ("const", 1, "c"),
    ("poly2", 6, "c bx by axx axy ayy: c + bx x + by y + axx x^2 + axy x y + ayy y^2"),
    ("sinsin", 3, "a kx ky: a sin(kx x) sin(ky y)"),
    ("bowl", 3, "a cx cy: a (1 - (x-cx)^2 - (y-cy)^2) / 4"),
];

pub const PROFILE_CATALOG: &[(&str, usize, &str)] =
    &[("const", 0, ""), ("exp", 1, "rate: exp(rate t)"), ("linear", 2, "a b: a + b t")];

fn check_params(kind: &str, name: &str, params: &[f64], catalog: &[(&str, usize, &str)]) -> Result<usize> {
    let Some(&(_, n, sig)) = catalog.iter().find(|(k, _, _)| *k == name) else {
        let known: Vec<_> = catalog.iter().map(|(k, _, _)| *k).collect();
        return Err(Error::Config(format!("unknown {kind} '{name}' (known: {})", known.join(", "))));
    };
    if params.len() != n {
        return Err(Error::Config(format!("{kind} '{name}' takes {n} parameters ({sig}), got {}", params.len())));
    }
    if let Some(bad) = params.iter().find(|p| !p.is_finite()) {
        return Err(Error::Config(format!("{kind} '{name}' has non-finite parameter {bad}")));
    }
    Ok(n)
}

/// A scalar function of space with analytic gradient and Hessian.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarData {
    Const(f64),
    /// `[c, bx, by, axx, axy, ayy]`.
    Poly2([f64; 6]),
    SinSin {
        a: f64,
        kx: f64,
        ky: f64,
    },
}

impl ScalarData {
    pub fn constant(c: f64) -> Self {
        ScalarData::Const(c)
    }

    pub fn zero() -> Self {
        ScalarData::Const(0.0)
    }

    pub fn from_catalog(name: &str, params: &[f64]) -> Result<Self> {
        check_params("scalar function", name, params, SCALAR_CATALOG)?;
        Ok(match name {
            "const" => ScalarData::Const(params[0]),
            "poly2" => ScalarData::Poly2(params.try_into().expect("six parameters")),
            "sinsin" => ScalarData::SinSin { a: params[0], kx: params[1], ky: params[2] },
            "bowl" => {
                let (a, cx, cy) = (params[0], params[1], params[2]);
                let q = -a / 4.0;
                ScalarData::Poly2([a / 4.0 + q * (cx * cx + cy * cy), -2.0 * q * cx, -2.0 * q * cy, q, 0.0, q])
            }
            _ => unreachable!("checked against the catalog"),
        })
    }

    /// Catalog name and parameters that reproduce this function.
    pub fn describe(&self) -> (&'static str, Vec<f64>) {
        match self {
            ScalarData::Const(c) => ("const", vec![*c]),
            ScalarData::Poly2(c) => ("poly2", c.to_vec()),
            ScalarData::SinSin { a, kx, ky } => ("sinsin", vec![*a, *kx, *ky]),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarData::Const(c) => *c == 0.0,
            ScalarData::Poly2(c) => c.iter().all(|v| *v == 0.0),
            ScalarData::SinSin { a, .. } => *a == 0.0,
        }
    }

    pub fn value(&self, x: &Vec2) -> f64 {
        let (px, py) = (x.x(), x.y());
        match self {
            ScalarData::Const(c) => *c,
            ScalarData::Poly2([c, bx, by, axx, axy, ayy]) => {
                c + bx * px + by * py + axx * px * px + axy * px * py + ayy * py * py
            }
            ScalarData::SinSin { a, kx, ky } => a * (kx * px).sin() * (ky * py).sin(),
        }
    }

    pub fn grad(&self, x: &Vec2) -> Vec2 {
        let (px, py) = (x.x(), x.y());
        match self {
            ScalarData::Const(_) => Vec2::zero(),
            ScalarData::Poly2([_, bx, by, axx, axy, ayy]) => {
                Vec2::xy(bx + 2.0 * axx * px + axy * py, by + axy * px + 2.0 * ayy * py)
            }
            ScalarData::SinSin { a, kx, ky } => {
                Vec2::xy(a * kx * (kx * px).cos() * (ky * py).sin(), a * ky * (kx * px).sin() * (ky * py).cos())
            }
        }
    }

    pub fn hess(&self, x: &Vec2) -> Mat2 {
        let (px, py) = (x.x(), x.y());
        match self {
            ScalarData::Const(_) => Mat2::zero(),
            ScalarData::Poly2([_, _, _, axx, axy, ayy]) => Mat2::new([[2.0 * axx, *axy], [*axy, 2.0 * ayy]]),
            ScalarData::SinSin { a, kx, ky } => {
                let (sx, cx) = (kx * px).sin_cos();
                let (sy, cy) = (ky * py).sin_cos();
                let off = a * kx * ky * cx * cy;
                Mat2::new([[-a * kx * kx * sx * sy, off], [off, -a * ky * ky * sx * sy]])
            }
        }
    }

    pub fn laplacian(&self, x: &Vec2) -> f64 {
        self.hess(x).trace()
    }

    /// `∇(Δf)`.
    pub fn laplacian_grad(&self, x: &Vec2) -> Vec2 {
        match self {
            ScalarData::Const(_) | ScalarData::Poly2(_) => Vec2::zero(),
            ScalarData::SinSin { kx, ky, .. } => self.grad(x) * -(kx * kx + ky * ky),
        }
    }
}

/// A scalar time profile multiplying a space function.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Const,
    Exp(f64),
    Linear(f64, f64),
}

impl Profile {
    pub fn from_catalog(name: &str, params: &[f64]) -> Result<Self> {
        check_params("time profile", name, params, PROFILE_CATALOG)?;
        Ok(match name {
            "const" => Profile::Const,
            "exp" => Profile::Exp(params[0]),
            "linear" => Profile::Linear(params[0], params[1]),
            _ => unreachable!("checked against the catalog"),
        })
    }

    pub fn describe(&self) -> (&'static str, Vec<f64>) {
        match self {
            Profile::Const => ("const", vec![]),
            Profile::Exp(r) => ("exp", vec![*r]),
            Profile::Linear(a, b) => ("linear", vec![*a, *b]),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Const => 1.0,
            Profile::Exp(r) => (r * t).exp(),
            Profile::Linear(a, b) => a + b * t,
        }
    }
}

/// `(t, x) ↦ profile(t) · space(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeScalar {
    pub profile: Profile,
    pub space: ScalarData,
}

impl TimeScalar {
    pub fn steady(space: ScalarData) -> Self {
        TimeScalar { profile: Profile::Const, space }
    }

    pub fn value(&self, t: f64, x: &Vec2) -> f64 {
        self.profile.value(t) * self.space.value(x)
    }

    pub fn grad(&self, t: f64, x: &Vec2) -> Vec2 {
        self.space.grad(x) * self.profile.value(t)
    }
}

/// A symmetric positive-definite diffusion matrix depending on time and space,
/// `M(t, x) = (1 + τ t)(1 + a sin(k·x)) M₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeMatrix {
    pub base: Mat2,
    pub tau: f64,
    pub amp: f64,
    pub k: Vec2,
}

impl TimeMatrix {
    pub fn constant(base: Mat2) -> Result<Self> {
        Self::scaled(base, 0.0, 0.0, Vec2::zero())
    }

    pub fn scaled(base: Mat2, tau: f64, amp: f64, k: Vec2) -> Result<Self> {
        check_spd(&base, "diffusion matrix")?;
        if amp.abs() >= 1.0 {
            return Err(Error::DataInvariant(format!(
                "spatial modulation amplitude {amp} must satisfy |a| < 1 for uniform positivity"
            )));
        }
        Ok(TimeMatrix { base, tau, amp, k })
    }

    fn time_factor(&self, t: f64) -> f64 {
        1.0 + self.tau * t
    }

    pub fn is_constant(&self) -> bool {
        self.tau == 0.0 && (self.amp == 0.0 || self.k == Vec2::zero())
    }

    pub fn value(&self, t: f64, x: &Vec2) -> Mat2 {
        self.base * (self.time_factor(t) * (1.0 + self.amp * self.k.dot(x).sin()))
    }

    /// `DM_ijk = ∂_k M_ij`.
    pub fn spatial_derivative(&self, t: f64, x: &Vec2) -> Ten2 {
        let c = self.time_factor(t) * self.amp * self.k.dot(x).cos();
        Ten2::from_fn(|i, j, k| c * self.base[(i, j)] * self.k[k])
    }

    /// Checks `M(t, x) ≥ C I` with `C > 0` on `[0, t0]`; returns the smallest sampled eigenvalue.
    pub fn check_uniform_positivity(&self, t0: f64) -> Result<f64> {
        let lo = self.time_factor(0.0).min(self.time_factor(t0)) * (1.0 - self.amp.abs());
        let c = lo * self.base.min_sym_eigenvalue();
        if c > 0.0 {
            Ok(c)
        } else {
            Err(Error::DataInvariant(format!(
                "diffusion matrix is not uniformly positive definite on [0, {t0}] (lower bound {c:.3e})"
            )))
        }
    }
}

pub fn check_spd(m: &Mat2, what: &str) -> Result<()> {
    if !m.is_symmetric(1e-14 * (1.0 + m.norm())) {
        return Err(Error::DataInvariant(format!("{what} is not symmetric")));
    }
    if m.min_sym_eigenvalue() <= 0.0 {
        return Err(Error::DataInvariant(format!(
            "{what} is not positive definite (smallest eigenvalue {:.3e})",
            m.min_sym_eigenvalue()
        )));
    }
    Ok(())
}

/// `u*(t, x) = e^{−t} sin(πx₁) sin(πx₂)` solves `∂_t u − Δu = f` with `f = (2π² − 1) u*`.
pub fn heat_manufactured() -> (TimeScalar, ScalarData, impl Fn(f64, &Vec2) -> f64) {
    let f = TimeScalar {
        profile: Profile::Exp(-1.0),
        space: ScalarData::SinSin { a: 2.0 * PI * PI - 1.0, kx: PI, ky: PI },
    };
    let g = ScalarData::SinSin { a: 1.0, kx: PI, ky: PI };
    let exact = |t: f64, x: &Vec2| (-t).exp() * (PI * x.x()).sin() * (PI * x.y()).sin();
    (f, g, exact)
}
