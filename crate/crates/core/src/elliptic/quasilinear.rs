//! Quasilinear Dirichlet problem,
//!
//! `−div(m(x, u)∇u) + f(x, u) = g` in Ω, `u = 0` on ∂Ω, cost `J(Ω) = ½∫(u − u_d)²`,
//!
//! solved by Newton's method with the exact Jacobian.

use log::debug;

use crate::data::ScalarData;
use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_matrix, assemble_vector, integrate, Qp};
use crate::fem::sparse::{dot, norm, CsrMatrix, Factorization, LinearSystem};
use crate::fem::{Discretization, Order, ScalarField};
use crate::flow::m_prime0_from_jac;
use crate::mesh::{BoundingBox, Mesh};
use crate::problem::{weighted_mass_norm, Analysis, DualityReport, ShapeProblem};
use crate::shape::{assemble_dj, PointTensors, ShapeTensors, Velocity};
use crate::tensor::{outer, Mat2, Ten2, Vec2};

pub const VOLUME_DEGREE: usize = 6;
pub const MAX_NEWTON_ITERATIONS: usize = 25;
pub const NEWTON_RELATIVE_TOL: f64 = 1e-11;
pub const NEWTON_ABSOLUTE_TOL: f64 = 1e-13;

/// `m(x, r) = a + b r/√(1 + r²) + c sin x₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diffusivity {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `f(x, r) = k r + e sin x₁`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reaction {
    pub k: f64,
    pub e: f64,
}

impl Diffusivity {
    /// Value, `∂_r m`, `∇_x m`.
    pub fn eval(&self, x: &Vec2, r: f64) -> (f64, f64, Vec2) {
        let q = (1.0 + r * r).sqrt();
        (self.a + self.b * r / q + self.c * x.y().sin(), self.b / (q * q * q), Vec2::xy(0.0, self.c * x.y().cos()))
    }
}

impl Reaction {
    pub fn eval(&self, x: &Vec2, r: f64) -> (f64, f64, Vec2) {
        (self.k * r + self.e * x.x().sin(), self.k, Vec2::xy(self.e * x.x().cos(), 0.0))
    }
}

pub const DIFFUSIVITY_CATALOG: &[(&str, usize, &str)] = &[("saturating", 3, "a b c: a + b r/sqrt(1+r^2) + c sin(y)")];
pub const REACTION_CATALOG: &[(&str, usize, &str)] = &[("linear_sin", 2, "k e: k r + e sin(x)")];

#[derive(Clone, Debug, PartialEq)]
pub struct QuasilinearData {
    pub m: Diffusivity,
    pub f: Reaction,
    pub g: ScalarData,
    pub u_d: ScalarData,
    /// `c₁ ≤ m`, `c₂ ≤ min(∂_r f, ∂_r m)`, `max(∂_r f, ∂_r m) ≤ c₃`.
    pub bounds: [f64; 3],
}

impl QuasilinearData {
    /// `m = 2 + r/√(1+r²)`, `f = r + 0.1 sin x₁`, with bounds valid for `|r| ≤ 10`.
    pub fn catalog_example(g: ScalarData, u_d: ScalarData) -> Self {
        QuasilinearData {
            m: Diffusivity { a: 2.0, b: 1.0, c: 0.0 },
            f: Reaction { k: 1.0, e: 0.1 },
            g,
            u_d,
            bounds: [1.0, 5e-4, 1.5],
        }
    }

    /// Samples the monotonicity bounds on a `nx × ny × nr` grid over `bbox × [−r_max, r_max]`.
    pub fn check_monotonicity(&self, bbox: &BoundingBox, r_max: f64, grid: [usize; 3]) -> Result<()> {
        let [c1, c2, c3] = self.bounds;
        let lin = |lo: f64, hi: f64, n: usize, i: usize| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
        for i in 0..grid[0] {
            for j in 0..grid[1] {
                let x = Vec2::xy(lin(bbox.lo.x(), bbox.hi.x(), grid[0], i), lin(bbox.lo.y(), bbox.hi.y(), grid[1], j));
                for k in 0..grid[2] {
                    let r = lin(-r_max, r_max, grid[2], k);
                    let (m, dm, _) = self.m.eval(&x, r);
                    let (_, df, _) = self.f.eval(&x, r);
                    let at = format!("at x = ({:.4}, {:.4}), r = {r:.4}", x.x(), x.y());
                    if m < c1 {
                        return Err(Error::DataInvariant(format!(
                            "monotonicity bound c1 <= m(x, r) violated: m = {m:.6} < c1 = {c1} {at}"
                        )));
                    }
                    if dm.min(df) < c2 {
                        return Err(Error::DataInvariant(format!(
                            "monotonicity bound c2 <= min(d_r f, d_r m) violated: {:.6e} < c2 = {c2} {at}",
                            dm.min(df)
                        )));
                    }
                    if dm.max(df) > c3 {
                        return Err(Error::DataInvariant(format!(
                            "monotonicity bound max(d_r f, d_r m) <= c3 violated: {:.6e} > c3 = {c3} {at}",
                            dm.max(df)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Newton solution with its residual history (free-dof Euclidean norms).
#[derive(Clone, Debug)]
pub struct NewtonResult {
    pub u: ScalarField,
    pub history: Vec<f64>,
}

impl NewtonResult {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

struct Pointwise {
    u: f64,
    gu: Vec2,
    m: f64,
    dm: f64,
    gxm: Vec2,
    f: f64,
    df: f64,
    gxf: Vec2,
}

fn pointwise(data: &QuasilinearData, qp: &Qp, u: &[f64]) -> Pointwise {
    let uq = qp.value(u);
    let (m, dm, gxm) = data.m.eval(&qp.x, uq);
    let (f, df, gxf) = data.f.eval(&qp.x, uq);
    Pointwise { u: uq, gu: qp.gradient(u), m, dm, gxm, f, df, gxf }
}

fn zero_rows(v: &mut [f64], dofs: &[usize]) {
    for &d in dofs {
        v[d] = 0.0;
    }
}

pub fn quasilinear_residual(disc: &Discretization, data: &QuasilinearData, u: &[f64]) -> Vec<f64> {
    let mut r = assemble_vector(&disc.space, &disc.volume, |qp, local| {
        let pw = pointwise(data, qp, u);
        let flux = pw.gu * (pw.m * qp.weight);
        let src = (pw.f - data.g.value(&qp.x)) * qp.weight;
        for a in 0..local.len() {
            local[a] += flux.dot(&qp.grad[a]) + src * qp.phi[a];
        }
    });
    zero_rows(&mut r, &disc.boundary_dofs());
    r
}

/// `⟨A(u)φ_j, φ_i⟩ = ∫ ∂_r m φ_j ∇u·∇φ_i + m ∇φ_j·∇φ_i + ∂_r f φ_j φ_i` (unconstrained).
pub fn quasilinear_jacobian(disc: &Discretization, data: &QuasilinearData, u: &[f64]) -> CsrMatrix {
    let n = disc.space.local_dofs();
    assemble_matrix(&disc.space, &disc.volume, |qp, local| {
        let pw = pointwise(data, qp, u);
        for a in 0..n {
            let gu_ga = pw.gu.dot(&qp.grad[a]);
            for b in 0..n {
                local[a * n + b] += qp.weight
                    * (pw.dm * qp.phi[b] * gu_ga + pw.m * qp.grad[b].dot(&qp.grad[a]) + pw.df * qp.phi[b] * qp.phi[a]);
            }
        }
    })
}

fn constrained(disc: &Discretization, matrix: CsrMatrix, rhs: Vec<f64>) -> Result<LinearSystem> {
    let mut sys = LinearSystem::new(matrix, rhs, false)?;
    let pairs: Vec<_> = disc.boundary_dofs().into_iter().map(|d| (d, 0.0)).collect();
    sys.constrain(&pairs);
    Ok(sys)
}

pub fn quasilinear_solve(disc: &Discretization, data: &QuasilinearData) -> Result<NewtonResult> {
    let mut u = vec![0.0; disc.dof_count()];
    let mut r = quasilinear_residual(disc, data, &u);
    let mut history = vec![norm(&r)];
    let r0 = history[0];
    while history.last().is_some_and(|&h| h > NEWTON_ABSOLUTE_TOL && h > NEWTON_RELATIVE_TOL * r0) {
        if history.len() > MAX_NEWTON_ITERATIONS {
            return Err(Error::Convergence { iterations: MAX_NEWTON_ITERATIONS, history });
        }
        let jac = quasilinear_jacobian(disc, data, &u);
        let sys = constrained(disc, jac, r.iter().map(|v| -v).collect())?;
        let delta = sys.solve()?;
        u.iter_mut().zip(&delta).for_each(|(a, d)| *a += d);
        r = quasilinear_residual(disc, data, &u);
        history.push(norm(&r));
        debug!("newton iteration {}: residual {:.3e}", history.len() - 1, norm(&r));
    }
    Ok(NewtonResult { u: u.into(), history })
}

/// `B(u)φ = ∫ (u − u_d)φ`.
pub fn quasilinear_cost_gradient(disc: &Discretization, data: &QuasilinearData, u: &ScalarField) -> Vec<f64> {
    assemble_vector(&disc.space, &disc.volume, |qp, local| {
        let d = (qp.value(&u.coeffs) - data.u_d.value(&qp.x)) * qp.weight;
        for (l, p) in local.iter_mut().zip(qp.phi) {
            *l += d * p;
        }
    })
}

pub fn quasilinear_cost(disc: &Discretization, data: &QuasilinearData, u: &ScalarField) -> f64 {
    integrate(&disc.space, &disc.volume, |qp| 0.5 * (qp.value(&u.coeffs) - data.u_d.value(&qp.x)).powi(2))
}

/// Solves `A(u)ᵀ p = −B(u)` on the free dofs.
pub fn quasilinear_adjoint(disc: &Discretization, data: &QuasilinearData, u: &ScalarField) -> Result<ScalarField> {
    let jac = quasilinear_jacobian(disc, data, &u.coeffs).transpose();
    let rhs = quasilinear_cost_gradient(disc, data, u).iter().map(|v| -v).collect();
    Ok(constrained(disc, jac, rhs)?.solve()?.into())
}

pub fn quasilinear_l_vector(
    disc: &Discretization,
    data: &QuasilinearData,
    u: &ScalarField,
    velocity: &dyn Velocity,
) -> Vec<f64> {
    let mut l = assemble_vector(&disc.space, &disc.volume, |qp, local| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let pw = pointwise(data, qp, &u.coeffs);
        let div = k.div();
        let flux = (m_prime0_from_jac(&k.jac, &Mat2::identity()).matvec(&pw.gu) * pw.m + pw.gu * pw.gxm.dot(&k.theta))
            * qp.weight;
        let src = (pw.f * div + pw.gxf.dot(&k.theta) - data.g.grad(&qp.x).dot(&k.theta) - data.g.value(&qp.x) * div)
            * qp.weight;
        for a in 0..local.len() {
            local[a] += flux.dot(&qp.grad[a]) + src * qp.phi[a];
        }
    });
    zero_rows(&mut l, &disc.boundary_dofs());
    l
}

/// `∂_s𝓑(0, u) = ∫ ½(u − u_d)² div θ − (u − u_d)∇u_d·θ`.
pub fn quasilinear_cost_rate(
    disc: &Discretization,
    data: &QuasilinearData,
    u: &ScalarField,
    velocity: &dyn Velocity,
) -> f64 {
    integrate(&disc.space, &disc.volume, |qp| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let d = qp.value(&u.coeffs) - data.u_d.value(&qp.x);
        0.5 * d * d * k.div() - d * data.u_d.grad(&qp.x).dot(&k.theta)
    })
}

pub fn quasilinear_material(
    disc: &Discretization,
    data: &QuasilinearData,
    u: &ScalarField,
    velocity: &dyn Velocity,
) -> Result<ScalarField> {
    let jac = quasilinear_jacobian(disc, data, &u.coeffs);
    let rhs = quasilinear_l_vector(disc, data, u, velocity).iter().map(|v| -v).collect();
    Ok(constrained(disc, jac, rhs)?.solve()?.into())
}

pub fn quasilinear_shape_tensors(
    disc: &Discretization,
    data: &QuasilinearData,
    u: &ScalarField,
    p: &ScalarField,
) -> ShapeTensors {
    let id = Mat2::identity();
    ShapeTensors::volume(&disc.space, &disc.volume, false, |qp| {
        let pw = pointwise(data, qp, &u.coeffs);
        let pv = qp.value(&p.coeffs);
        let gp = qp.gradient(&p.coeffs);
        let g = data.g.value(&qp.x);
        let d = pw.u - data.u_d.value(&qp.x);
        PointTensors {
            s0: pw.gxm * pw.gu.dot(&gp) + pw.gxf * pv - data.g.grad(&qp.x) * pv - data.u_d.grad(&qp.x) * d,
            s1: (outer(&gp, &pw.gu) + outer(&pw.gu, &gp)) * -pw.m
                + id * (pw.m * pw.gu.dot(&gp) + pw.f * pv - g * pv + 0.5 * d * d),
            s2: Ten2::zero(),
        }
    })
}

pub struct QuasilinearProblem {
    disc: Discretization,
    data: QuasilinearData,
    jac: CsrMatrix,
    mass: CsrMatrix,
    pub newton: NewtonResult,
    pub u: ScalarField,
    pub p: ScalarField,
}

impl QuasilinearProblem {
    pub fn new(mesh: Mesh, order: Order, data: QuasilinearData) -> Result<Self> {
        let disc = Discretization::new(mesh, order, VOLUME_DEGREE);
        let newton = quasilinear_solve(&disc, &data)?;
        let u = newton.u.clone();
        let p = quasilinear_adjoint(&disc, &data, &u)?;
        let jac = quasilinear_jacobian(&disc, &data, &u.coeffs);
        let mass = disc.mass();
        Ok(QuasilinearProblem { disc, data, jac, mass, newton, u, p })
    }

    pub fn tensors(&self) -> ShapeTensors {
        quasilinear_shape_tensors(&self.disc, &self.data, &self.u, &self.p)
    }
}

impl ShapeProblem for QuasilinearProblem {
    fn id(&self) -> &'static str {
        "quasilinear"
    }

    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn cost_on(&self, mesh: &Mesh) -> Result<f64> {
        let disc = self.disc.on_mesh(mesh.clone());
        let u = quasilinear_solve(&disc, &self.data)?.u;
        Ok(quasilinear_cost(&disc, &self.data, &u))
    }

    fn state_on(&self, mesh: &Mesh) -> Result<Option<Vec<Vec<f64>>>> {
        let disc = self.disc.on_mesh(mesh.clone());
        Ok(Some(vec![quasilinear_solve(&disc, &self.data)?.u.coeffs]))
    }

    fn state_norm(&self, snapshots: &[Vec<f64>]) -> f64 {
        weighted_mass_norm(&self.mass, snapshots, &[1.0])
    }

    fn solution_fields(&self) -> Vec<(String, Vec<f64>)> {
        vec![("u".into(), self.u.coeffs.clone()), ("p".into(), self.p.coeffs.clone())]
    }

    fn analyze(&self, velocity: &dyn Velocity) -> Result<Analysis> {
        let l = quasilinear_l_vector(&self.disc, &self.data, &self.u, velocity);
        let sys = constrained(&self.disc, self.jac.clone(), l.iter().map(|v| -v).collect())?;
        let factor = Factorization::new(&sys.matrix, false)?;
        let udot = factor.solve_checked(&sys.matrix, &sys.rhs)?;
        let lp = dot(&l, &self.p.coeffs);
        let bu = dot(&quasilinear_cost_gradient(&self.disc, &self.data, &self.u), &udot);
        let raw = lp + quasilinear_cost_rate(&self.disc, &self.data, &self.u, velocity);
        Ok(Analysis {
            dj: assemble_dj(&self.tensors(), velocity),
            raw,
            duality: Some(DualityReport::new(lp, bu)),
            material: Some(vec![udot]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::{assemble_diffusion, assemble_load, assemble_mass};
    use crate::flow::VectorField;
    use crate::shape::MeshVelocity;

    fn disk(refine: usize) -> Mesh {
        Mesh::disk(Vec2::zero(), 1.0, refine).unwrap()
    }

    fn example() -> QuasilinearData {
        QuasilinearData::catalog_example(ScalarData::constant(4.0), ScalarData::constant(0.1))
    }

    #[test]
    fn zero_data_converges_immediately() {
        let data = QuasilinearData {
            f: Reaction { k: 1.0, e: 0.0 },
            ..QuasilinearData::catalog_example(ScalarData::zero(), ScalarData::zero())
        };
        let disc = Discretization::new(disk(2), Order::P1, VOLUME_DEGREE);
        let r = quasilinear_solve(&disc, &data).unwrap();
        assert_eq!(r.iterations(), 0);
        assert_eq!(r.u.max_abs(), 0.0);
        let p = quasilinear_adjoint(&disc, &data, &r.u).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn linear_case_matches_linear_solver() {
        let data = QuasilinearData {
            m: Diffusivity { a: 1.5, b: 0.0, c: 0.0 },
            f: Reaction { k: 1.0, e: 0.0 },
            g: ScalarData::SinSin { a: 3.0, kx: 1.0, ky: 2.0 },
            u_d: ScalarData::zero(),
            bounds: [1.0, 0.0, 2.0],
        };
        let disc = Discretization::new(disk(3), Order::P1, VOLUME_DEGREE);
        let u = quasilinear_solve(&disc, &data).unwrap().u;
        let a = assemble_diffusion(&disc.space, &disc.volume, |_| Mat2::identity() * 1.5)
            .add_scaled(&assemble_mass(&disc.space, &disc.volume, |_| 1.0), 1.0);
        let rhs = assemble_load(&disc.space, &disc.volume, |x| data.g.value(x));
        let lin = constrained(&disc, a, rhs).unwrap().solve().unwrap();
        for (x, y) in u.coeffs.iter().zip(&lin) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let disc = Discretization::new(disk(4), Order::P1, VOLUME_DEGREE);
        let r = quasilinear_solve(&disc, &example()).unwrap();
        assert!(r.iterations() <= 8, "{:?}", r.history);
        let h = &r.history;
        let last = h.len() - 1;
        assert!(h[last] <= NEWTON_RELATIVE_TOL * h[0] || h[last] <= NEWTON_ABSOLUTE_TOL);
        for k in 1..last.saturating_sub(1) {
            assert!(h[k + 1] / (h[k] * h[k]) < 10.0, "{h:?}");
        }
    }

    #[test]
    fn zero_velocity_gives_zero_material_derivative() {
        let pb = QuasilinearProblem::new(disk(3), Order::P1, example()).unwrap();
        assert!(pb.p.max_abs() > 0.0);
        let a = pb.analyze(&VectorField::zero()).unwrap();
        assert_eq!(a.dj.total(), 0.0);
        assert!(a.material.unwrap()[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn derivative_forms_and_duality_agree() {
        let pb = QuasilinearProblem::new(disk(3), Order::P1, example()).unwrap();
        let theta = VectorField::from_catalog("bump", &[0.2, -0.1, 0.9, 0.3, -0.2], None).unwrap();
        for vel in [&theta as &dyn Velocity, &MeshVelocity::interpolate(pb.mesh(), &theta)] {
            let a = pb.analyze(vel).unwrap();
            let t = a.dj.total();
            assert!((t - a.raw).abs() <= 1e-12 * t.abs().max(1.0), "{t} vs {}", a.raw);
            assert!(a.duality.unwrap().rel_gap <= 1e-9);
        }
        let t = pb.tensors();
        assert!(t.s1.iter().all(|m| m.is_symmetric(1e-14 * (1.0 + m.norm()))));
    }

    #[test]
    fn trivial_tensors_vanish() {
        let data = QuasilinearData {
            f: Reaction { k: 1.0, e: 0.0 },
            ..QuasilinearData::catalog_example(ScalarData::zero(), ScalarData::zero())
        };
        let pb = QuasilinearProblem::new(disk(2), Order::P1, data).unwrap();
        let t = pb.tensors();
        assert!(t.s0.iter().all(|v| v.norm() == 0.0));
        assert!(t.s1.iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn monotonicity_scan() {
        let bbox = *disk(1).holdall();
        assert!(example().check_monotonicity(&bbox, 10.0, [32, 32, 64]).is_ok());
        let bad = QuasilinearData { m: Diffusivity { a: 0.5, b: 1.0, c: 0.0 }, ..example() };
        let e = bad.check_monotonicity(&bbox, 10.0, [8, 8, 16]).unwrap_err().to_string();
        assert!(e.contains("c1 <= m"), "{e}");
    }
}
