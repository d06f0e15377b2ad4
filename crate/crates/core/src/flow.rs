//! Perturbation fields θ, their flow `T_s`, and the Jacobian quantities derived from it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::tensor::{Mat2, Ten2, Vec2};

pub const DEFAULT_FLOW_STEPS: usize = 32;

/// Axis-aligned box outside of which a field vanishes together with two derivatives.
///
/// Inside the box the field is multiplied by a product of smootherstep ramps of
/// width `width` rising from each face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportBox {
    pub lo: Vec2,
    pub hi: Vec2,
    pub width: f64,
}

impl SupportBox {
    pub fn new(lo: Vec2, hi: Vec2, width: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && width.is_finite()) {
            return Err(Error::invalid("support box must be finite"));
        }
        if hi.x() <= lo.x() || hi.y() <= lo.y() || width <= 0.0 {
            return Err(Error::invalid(format!("degenerate support box lo = {lo:?}, hi = {hi:?}, width = {width}")));
        }
        Ok(SupportBox { lo, hi, width })
    }

    pub fn contains(&self, x: &Vec2) -> bool {
        (0..2).all(|d| x[d] > self.lo[d] && x[d] < self.hi[d])
    }

    /// Cutoff value, gradient and Hessian at `x`.
    fn cutoff(&self, x: &Vec2) -> (f64, Vec2, Mat2) {
        let mut g = [(0.0, 0.0, 0.0); 2];
        for (d, slot) in g.iter_mut().enumerate() {
            let (a, da, dda) = smootherstep((x[d] - self.lo[d]) / self.width);
            let (b, db, ddb) = smootherstep((self.hi[d] - x[d]) / self.width);
            let w = self.width;
            // d/dt of S((t−lo)/w) is S'/w, of S((hi−t)/w) is −S'/w.
            let (da, dda) = (da / w, dda / (w * w));
            let (db, ddb) = (-db / w, ddb / (w * w));
            *slot = (a * b, da * b + a * db, dda * b + 2.0 * da * db + a * ddb);
        }
        let (g0, g0p, g0pp) = g[0];
        let (g1, g1p, g1pp) = g[1];
        let value = g0 * g1;
        let grad = Vec2::xy(g0p * g1, g0 * g1p);
        let hess = Mat2::new([[g0pp * g1, g0p * g1p], [g0p * g1p, g0 * g1pp]]);
        (value, grad, hess)
    }
}

/// `6z⁵ − 15z⁴ + 10z³` clamped to [0, 1], with first and second derivatives.
fn smootherstep(z: f64) -> (f64, f64, f64) {
    if z <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if z >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let z2 = z * z;
        let v = z2 * z * (10.0 + z * (-15.0 + 6.0 * z));
        let d = 30.0 * z2 * (1.0 - z) * (1.0 - z);
        let dd = 60.0 * z * (1.0 - z) * (1.0 - 2.0 * z);
        (v, d, dd)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum FieldKind {
    Zero,
    Constant(Vec2),
    Linear { a: Mat2, b: Vec2 },
    Rotation { center: Vec2, omega: f64 },
    Quadratic { b: Vec2, a: Mat2, q: [Mat2; 2] },
    Bump { center: Vec2, radius: f64, amp: Vec2 },
    RadialBump { center: Vec2, radius: f64, amp: f64 },
    TensorBump { center: Vec2, half_width: Vec2, amp: Vec2 },
}

/// A named analytic vector field with analytic first and second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    name: String,
    params: Vec<f64>,
    kind: FieldKind,
    support: Option<SupportBox>,
}

/// Catalog entries: name and the number of numeric parameters each expects.
pub const FIELD_CATALOG: &[(&str, usize, &str)] = &[
    ("zero", 0, ""),
    ("constant", 2, "c1 c2"),
    ("linear", 6, "a11 a12 a21 a22 b1 b2"),
    ("rotation", 3, "cx cy omega"),
    ("quadratic", 12, "b1 b2 a11 a12 a21 a22 q1_11 q1_12 q1_22 q2_11 q2_12 q2_22"),
    ("bump", 5, "cx cy radius a1 a2"),
    ("radial_bump", 4, "cx cy radius a"),
    ("tensor_bump", 6, "cx cy wx wy a1 a2"),
];

impl VectorField {
    pub fn zero() -> Self {
        Self::from_catalog("zero", &[], None).expect("zero field")
    }

    /// Build a catalog field from its name and parameter list.
    pub fn from_catalog(name: &str, params: &[f64], support: Option<SupportBox>) -> Result<Self> {
        let &(_, count, signature) = FIELD_CATALOG
            .iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| Error::invalid(format!("unknown vector field '{name}'")))?;
        if params.len() != count {
            return Err(Error::invalid(format!(
                "vector field '{name}' expects {count} parameters ({signature}), got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("non-finite parameter for '{name}'")));
        }
        let p = params;
        let v = |i: usize| Vec2::xy(p[i], p[i + 1]);
        let positive = |x: f64, what: &str| {
            if x > 0.0 {
                Ok(x)
            } else {
                Err(Error::invalid(format!("{what} must be positive for '{name}'")))
            }
        };
        let kind = match name {
            "zero" => FieldKind::Zero,
            "constant" => FieldKind::Constant(v(0)),
            "linear" => FieldKind::Linear { a: Mat2::new([[p[0], p[1]], [p[2], p[3]]]), b: v(4) },
            "rotation" => FieldKind::Rotation { center: v(0), omega: p[2] },
            "quadratic" => FieldKind::Quadratic {
                b: v(0),
                a: Mat2::new([[p[2], p[3]], [p[4], p[5]]]),
                q: [Mat2::new([[p[6], p[7]], [p[7], p[8]]]), Mat2::new([[p[9], p[10]], [p[10], p[11]]])],
            },
            "bump" => FieldKind::Bump { center: v(0), radius: positive(p[2], "radius")?, amp: v(3) },
            "radial_bump" => FieldKind::RadialBump { center: v(0), radius: positive(p[2], "radius")?, amp: p[3] },
            "tensor_bump" => FieldKind::TensorBump {
                center: v(0),
                half_width: Vec2::xy(positive(p[2], "wx")?, positive(p[3], "wy")?),
                amp: v(4),
            },
            _ => unreachable!(),
        };
        Ok(VectorField { name: name.to_string(), params: params.to_vec(), kind, support })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn support(&self) -> Option<&SupportBox> {
        self.support.as_ref()
    }

    pub fn with_support(mut self, support: Option<SupportBox>) -> Self {
        self.support = support;
        self
    }

    /// Returns the same field multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.kind = match &self.kind {
            FieldKind::Zero => FieldKind::Zero,
            FieldKind::Constant(c) => FieldKind::Constant(*c * factor),
            FieldKind::Linear { a, b } => FieldKind::Linear { a: *a * factor, b: *b * factor },
            FieldKind::Rotation { center, omega } => FieldKind::Rotation { center: *center, omega: omega * factor },
            FieldKind::Quadratic { b, a, q } => {
                FieldKind::Quadratic { b: *b * factor, a: *a * factor, q: [q[0] * factor, q[1] * factor] }
            }
            FieldKind::Bump { center, radius, amp } => {
                FieldKind::Bump { center: *center, radius: *radius, amp: *amp * factor }
            }
            FieldKind::RadialBump { center, radius, amp } => {
                FieldKind::RadialBump { center: *center, radius: *radius, amp: amp * factor }
            }
            FieldKind::TensorBump { center, half_width, amp } => {
                FieldKind::TensorBump { center: *center, half_width: *half_width, amp: *amp * factor }
            }
        };
        out
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, FieldKind::Zero)
    }

    /// θ(x), Dθ(x) and D²θ(x) together.
    pub fn eval_all(&self, x: &Vec2) -> (Vec2, Mat2, Ten2) {
        let Some(support) = &self.support else {
            return self.base(x);
        };
        if !support.contains(x) {
            return (Vec2::zero(), Mat2::zero(), Ten2::zero());
        }
        let (t, dt, ddt) = self.base(x);
        let (rho, grad, hess) = support.cutoff(x);
        let jac = t.outer(&grad) + dt * rho;
        let d2 = Ten2::from_fn(|i, j, k| {
            hess[(j, k)] * t[i] + grad[j] * dt[(i, k)] + grad[k] * dt[(i, j)] + rho * ddt[(i, j, k)]
        });
        (t * rho, jac, d2)
    }

    pub fn eval(&self, x: &Vec2) -> Vec2 {
        self.eval_all(x).0
    }

    pub fn jac(&self, x: &Vec2) -> Mat2 {
        self.eval_all(x).1
    }

    pub fn hess(&self, x: &Vec2) -> Ten2 {
        self.eval_all(x).2
    }

    pub fn div(&self, x: &Vec2) -> f64 {
        self.jac(x).trace()
    }

    fn base(&self, x: &Vec2) -> (Vec2, Mat2, Ten2) {
        match &self.kind {
            FieldKind::Zero => (Vec2::zero(), Mat2::zero(), Ten2::zero()),
            FieldKind::Constant(c) => (*c, Mat2::zero(), Ten2::zero()),
            FieldKind::Linear { a, b } => (a.matvec(x) + *b, *a, Ten2::zero()),
            FieldKind::Rotation { center, omega } => {
                let r = *x - *center;
                let jac = Mat2::new([[0.0, -omega], [*omega, 0.0]]);
                (r.perp() * *omega, jac, Ten2::zero())
            }
            FieldKind::Quadratic { b, a, q } => {
                let value = *b + a.matvec(x) + Vec2::xy(0.5 * x.dot(&q[0].matvec(x)), 0.5 * x.dot(&q[1].matvec(x)));
                let jac = *a + Mat2::new([*q[0].matvec(x).as_array(), *q[1].matvec(x).as_array()]);
                let hess = Ten2::from_fn(|i, j, k| q[i][(j, k)]);
                (value, jac, hess)
            }
            FieldKind::Bump { center, radius, amp } => {
                let (phi, dphi, ddphi) = radial_profile(&(*x - *center), *radius);
                let jac = amp.outer(&dphi);
                let hess = Ten2::from_fn(|i, j, k| amp[i] * ddphi[(j, k)]);
                (*amp * phi, jac, hess)
            }
            FieldKind::RadialBump { center, radius, amp } => {
                let r = *x - *center;
                let (phi, dphi, ddphi) = radial_profile(&r, *radius);
                let jac = (Mat2::identity() * phi + r.outer(&dphi)) * *amp;
                let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                let hess = Ten2::from_fn(|i, j, k| {
                    amp * (delta(i, j) * dphi[k] + delta(i, k) * dphi[j] + r[i] * ddphi[(j, k)])
                });
                (r * (amp * phi), jac, hess)
            }
            FieldKind::TensorBump { center, half_width, amp } => {
                let (b0, d0, dd0) = poly_bump_1d((x.x() - center.x()) / half_width.x(), half_width.x());
                let (b1, d1, dd1) = poly_bump_1d((x.y() - center.y()) / half_width.y(), half_width.y());
                let phi = b0 * b1;
                let dphi = Vec2::xy(d0 * b1, b0 * d1);
                let ddphi = Mat2::new([[dd0 * b1, d0 * d1], [d0 * d1, b0 * dd1]]);
                let jac = amp.outer(&dphi);
                let hess = Ten2::from_fn(|i, j, k| amp[i] * ddphi[(j, k)]);
                (*amp * phi, jac, hess)
            }
        }
    }
}

/// `(1 − |r|²/R²)³₊` with gradient and Hessian in x.
fn radial_profile(r: &Vec2, radius: f64) -> (f64, Vec2, Mat2) {
    let r2 = radius * radius;
    let q = r.dot(r) / r2;
    if q >= 1.0 {
        return (0.0, Vec2::zero(), Mat2::zero());
    }
    let w = 1.0 - q;
    let phi = w * w * w;
    let dphi = *r * (-6.0 * w * w / r2);
    let ddphi = r.outer(r) * (24.0 * w / (r2 * r2)) - Mat2::identity() * (6.0 * w * w / r2);
    (phi, dphi, ddphi)
}

/// `(1 − z²)³₊` with derivatives taken with respect to `t = c + w z`.
fn poly_bump_1d(z: f64, w: f64) -> (f64, f64, f64) {
    if z.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = 1.0 - z * z;
    let v = u * u * u;
    let d = -6.0 * z * u * u / w;
    let dd = (-6.0 * u * u + 24.0 * z * z * u) / (w * w);
    (v, d, dd)
}

/// Position and Jacobian of the flow map at pseudo-time `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowState {
    pub position: Vec2,
    pub jacobian: Mat2,
    pub s: f64,
}

/// Integrates `x' = θ(x)`, `J' = Dθ(x) J` from `(x0, I)` to pseudo-time `s` with
/// `steps` classical Runge–Kutta steps. Negative `s` integrates the inverse flow.
pub fn advect(theta: &VectorField, s: f64, x0: Vec2, steps: usize) -> Result<FlowState> {
    if steps == 0 {
        return Err(Error::invalid("flow integration needs at least one step"));
    }
    if !s.is_finite() || !x0.is_finite() {
        return Err(Error::invalid("non-finite flow input"));
    }
    let mut x = x0;
    let mut jac = Mat2::identity();
    if s == 0.0 || theta.is_zero() {
        return Ok(FlowState { position: x, jacobian: jac, s });
    }
    let h = s / steps as f64;
    let rhs = |x: &Vec2, j: &Mat2| {
        let (v, dv, _) = theta.eval_all(x);
        (v, dv.matmul(j))
    };
    for step in 0..steps {
        let (k1x, k1j) = rhs(&x, &jac);
        let (k2x, k2j) = rhs(&(x + k1x * (0.5 * h)), &(jac + k1j * (0.5 * h)));
        let (k3x, k3j) = rhs(&(x + k2x * (0.5 * h)), &(jac + k2j * (0.5 * h)));
        let (k4x, k4j) = rhs(&(x + k3x * h), &(jac + k3j * h));
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        jac += (k1j + k2j * 2.0 + k3j * 2.0 + k4j) * (h / 6.0);
        if !(jac.det() > 0.0) {
            return Err(Error::FlowDegenerate {
                s,
                triangle: None,
                detail: format!("Jacobian determinant {} after step {} from {x0:?}", jac.det(), step + 1),
            });
        }
    }
    Ok(FlowState { position: x, jacobian: jac, s })
}

/// `ξ(s) = det DT_s`.
pub fn xi(state: &FlowState) -> f64 {
    state.jacobian.det()
}

/// `𝓜(s, Q) = ξ(s) DT_s⁻¹ Q DT_s⁻ᵀ`.
pub fn m_of_s(state: &FlowState, q: &Mat2) -> Result<Mat2> {
    let inv = state.jacobian.inverse().ok_or_else(|| Error::FlowDegenerate {
        s: state.s,
        triangle: None,
        detail: "singular flow Jacobian".into(),
    })?;
    Ok(inv.matmul(q).matmul(&inv.transpose()) * xi(state))
}

/// `𝓜'(0, Q) = div θ Q − Dθ Q − Q Dθᵀ` from a Jacobian value.
pub fn m_prime0_from_jac(jac: &Mat2, q: &Mat2) -> Mat2 {
    *q * jac.trace() - jac.matmul(q) - q.matmul(&jac.transpose())
}

pub fn m_prime0(theta: &VectorField, x: &Vec2, q: &Mat2) -> Mat2 {
    m_prime0_from_jac(&theta.jac(x), q)
}

fn check_unit(n: &Vec2) -> Result<()> {
    if (n.norm() - 1.0).abs() > 1e-12 {
        Err(Error::invalid(format!("normal {n:?} is not a unit vector")))
    } else {
        Ok(())
    }
}

/// `ξ_Γ(s) = det DT_s · |DT_s⁻ᵀ n|`.
pub fn xi_gamma(state: &FlowState, n: &Vec2) -> Result<f64> {
    check_unit(n)?;
    let inv = state.jacobian.inverse().ok_or_else(|| Error::FlowDegenerate {
        s: state.s,
        triangle: None,
        detail: "singular flow Jacobian".into(),
    })?;
    Ok(xi(state) * inv.transpose().matvec(n).norm())
}

/// `div_Γ θ = div θ − Dθ n · n` from a Jacobian value.
pub fn div_gamma_from_jac(jac: &Mat2, n: &Vec2) -> f64 {
    jac.trace() - jac.matvec(n).dot(n)
}

pub fn div_gamma(theta: &VectorField, x: &Vec2, n: &Vec2) -> Result<f64> {
    check_unit(n)?;
    Ok(div_gamma_from_jac(&theta.jac(x), n))
}

/// Moves every node of `mesh` along the flow of `theta` for pseudo-time `s`.
pub fn transport_mesh(mesh: &Mesh, theta: &VectorField, s: f64, steps: usize) -> Result<Mesh> {
    if s == 0.0 || theta.is_zero() {
        return Ok(mesh.clone());
    }
    let nodes = mesh
        .nodes()
        .par_iter()
        .map(|x| advect(theta, s, *x, steps).map(|st| st.position))
        .collect::<Result<Vec<_>>>()?;
    mesh.with_nodes(nodes).map_err(|e| match e {
        Error::FlowDegenerate { triangle, detail, .. } => Error::FlowDegenerate { s, triangle, detail },
        other => other,
    })
}
