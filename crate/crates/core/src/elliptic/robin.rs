//! Anisotropic diffusion with Robin boundary conditions,
//!
//! `−div(M∇u) = f` in Ω, `M∇u·n + βu = g` on ∂Ω, cost `J(Ω) = ½∫|∇u|²`.

use crate::data::{check_spd, ScalarData};
use crate::error::{Error, Result};
use crate::fem::assembly::{
    assemble_boundary_matrix, assemble_boundary_vector, assemble_diffusion, assemble_load, assemble_vector,
    for_each_boundary_qp, integrate,
};
use crate::fem::sparse::{dot, CsrMatrix, Factorization};
use crate::fem::{Discretization, Order, ScalarField};
use crate::flow::{div_gamma_from_jac, m_prime0_from_jac};
use crate::mesh::Mesh;
use crate::problem::{weighted_mass_norm, Analysis, DualityReport, ShapeProblem};
use crate::shape::{assemble_dj, BoundaryJacobian, BoundaryTensors, PointTensors, ShapeTensors, Velocity};
use crate::tensor::{outer, Mat2, Ten2};

pub const VOLUME_DEGREE: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct RobinData {
    pub m: Mat2,
    pub beta: ScalarData,
    pub f: ScalarData,
    pub g: ScalarData,
}

impl RobinData {
    pub fn new(m: Mat2, beta: ScalarData, f: ScalarData, g: ScalarData) -> Result<Self> {
        check_spd(&m, "Robin diffusion matrix")?;
        Ok(RobinData { m, beta, f, g })
    }

    /// `M = I`, `β = 1`, `f = 0`, `g = 1`: the state is the constant 1.
    pub fn constant_state() -> Self {
        RobinData {
            m: Mat2::identity(),
            beta: ScalarData::constant(1.0),
            f: ScalarData::zero(),
            g: ScalarData::constant(1.0),
        }
    }

    /// Checks `β > 0` at every boundary quadrature point of `disc`.
    pub fn check_beta(&self, disc: &Discretization) -> Result<()> {
        let mut bad = None;
        for_each_boundary_qp(&disc.space, &disc.edge, None, |qp| {
            let b = self.beta.value(&qp.x);
            if !(b > 0.0) && bad.is_none() {
                bad = Some((qp.x, b));
            }
        });
        match bad {
            Some((x, b)) => Err(Error::DataInvariant(format!("β = {b} is not positive at {x:?}"))),
            None => Ok(()),
        }
    }
}

/// State operator `∫ M∇φ·∇ψ + ∫_∂Ω βφψ` and load `∫ fψ + ∫_∂Ω gψ`.
pub fn robin_system(disc: &Discretization, data: &RobinData) -> (CsrMatrix, Vec<f64>) {
    let space = &disc.space;
    let n = space.local_dofs();
    let k = assemble_diffusion(space, &disc.volume, |_| data.m);
    let b = assemble_boundary_matrix(space, &disc.edge, None, |qp, local| {
        let w = data.beta.value(&qp.x) * qp.weight;
        for a in 0..n {
            for c in 0..n {
                local[a * n + c] += w * qp.phi[a] * qp.phi[c];
            }
        }
    });
    let mut rhs = assemble_load(space, &disc.volume, |x| data.f.value(x));
    let g = assemble_boundary_vector(space, &disc.edge, None, |qp, local| {
        let v = data.g.value(&qp.x) * qp.weight;
        for (l, p) in local.iter_mut().zip(qp.phi) {
            *l += v * p;
        }
    });
    rhs.iter_mut().zip(&g).for_each(|(r, gi)| *r += gi);
    (k.add_scaled(&b, 1.0), rhs)
}

pub fn robin_solve(disc: &Discretization, data: &RobinData) -> Result<ScalarField> {
    data.check_beta(disc)?;
    let (a, rhs) = robin_system(disc, data);
    let f = Factorization::new(&a, true)?;
    Ok(f.solve_checked(&a, &rhs)?.into())
}

/// `B(u)ψ = ∫ ∇u·∇ψ`.
pub fn robin_cost_gradient(disc: &Discretization, u: &ScalarField) -> Vec<f64> {
    assemble_vector(&disc.space, &disc.volume, |qp, local| {
        let gu = qp.gradient(&u.coeffs) * qp.weight;
        for (l, g) in local.iter_mut().zip(qp.grad) {
            *l += gu.dot(g);
        }
    })
}

pub fn robin_cost(disc: &Discretization, u: &ScalarField) -> f64 {
    integrate(&disc.space, &disc.volume, |qp| 0.5 * qp.gradient(&u.coeffs).dot(&qp.gradient(&u.coeffs)))
}

/// `∫ M∇p·∇φ + ∫_∂Ω βpφ = −∫ ∇u·∇φ`.
pub fn robin_adjoint(disc: &Discretization, data: &RobinData, u: &ScalarField) -> Result<ScalarField> {
    let (a, _) = robin_system(disc, data);
    let rhs: Vec<f64> = robin_cost_gradient(disc, u).iter().map(|v| -v).collect();
    Ok(Factorization::new(&a, true)?.solve_checked(&a, &rhs)?.into())
}

/// The vector `⟨L(u), φ_i⟩` of the material-derivative equation.
pub fn robin_l_vector(disc: &Discretization, data: &RobinData, u: &ScalarField, velocity: &dyn Velocity) -> Vec<f64> {
    let space = &disc.space;
    let mut l = assemble_vector(space, &disc.volume, |qp, local| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let flux = m_prime0_from_jac(&k.jac, &data.m).matvec(&qp.gradient(&u.coeffs)) * qp.weight;
        let div_ftheta = data.f.grad(&qp.x).dot(&k.theta) + data.f.value(&qp.x) * k.div();
        for a in 0..local.len() {
            local[a] += flux.dot(&qp.grad[a]) - div_ftheta * qp.phi[a] * qp.weight;
        }
    });
    let lb = assemble_boundary_vector(space, &disc.edge, None, |qp, local| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let uq = qp.value(&u.coeffs);
        let residual = data.beta.value(&qp.x) * uq - data.g.value(&qp.x);
        let div_g = div_gamma_from_jac(&k.jac, &qp.normal);
        let tangential = (data.beta.grad(&qp.x) * uq - data.g.grad(&qp.x)).dot(&k.theta);
        let c = (residual * div_g + tangential) * qp.weight;
        for (l, p) in local.iter_mut().zip(qp.phi) {
            *l += c * p;
        }
    });
    l.iter_mut().zip(&lb).for_each(|(a, b)| *a += b);
    l
}

/// `∂_s𝓑(0, u) = ½∫ 𝓜′(0, I)∇u·∇u`.
pub fn robin_cost_rate(disc: &Discretization, u: &ScalarField, velocity: &dyn Velocity) -> f64 {
    integrate(&disc.space, &disc.volume, |qp| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let gu = qp.gradient(&u.coeffs);
        0.5 * m_prime0_from_jac(&k.jac, &Mat2::identity()).matvec(&gu).dot(&gu)
    })
}

/// Solves `A u̇ = −L(u)`.
pub fn robin_material(
    disc: &Discretization,
    data: &RobinData,
    u: &ScalarField,
    velocity: &dyn Velocity,
) -> Result<ScalarField> {
    let (a, _) = robin_system(disc, data);
    let rhs: Vec<f64> = robin_l_vector(disc, data, u, velocity).iter().map(|v| -v).collect();
    Ok(Factorization::new(&a, true)?.solve_checked(&a, &rhs)?.into())
}

pub fn robin_shape_tensors(disc: &Discretization, data: &RobinData, u: &ScalarField, p: &ScalarField) -> ShapeTensors {
    let id = Mat2::identity();
    ShapeTensors::volume(&disc.space, &disc.volume, false, |qp| {
        let gu = qp.gradient(&u.coeffs);
        let gp = qp.gradient(&p.coeffs);
        let pv = qp.value(&p.coeffs);
        let f = data.f.value(&qp.x);
        let mgu = data.m.matvec(&gu);
        let mgp = data.m.matvec(&gp);
        PointTensors {
            s0: data.f.grad(&qp.x) * -pv,
            s1: -outer(&gp, &mgu) - outer(&gu, &mgp) - outer(&gu, &gu)
                + id * (mgu.dot(&gp) - f * pv + 0.5 * gu.dot(&gu)),
            s2: Ten2::zero(),
        }
    })
    .with_boundary(&disc.space, &disc.edge, BoundaryJacobian::Tangential, |qp| {
        let uq = qp.value(&u.coeffs);
        let pv = qp.value(&p.coeffs);
        BoundaryTensors {
            s0: (data.beta.grad(&qp.x) * uq - data.g.grad(&qp.x)) * pv,
            s1: id * ((data.beta.value(&qp.x) * uq - data.g.value(&qp.x)) * pv),
        }
    })
}

pub struct RobinProblem {
    disc: Discretization,
    data: RobinData,
    system: CsrMatrix,
    factor: Factorization,
    mass: CsrMatrix,
    pub u: ScalarField,
    pub p: ScalarField,
}

impl RobinProblem {
    pub fn new(mesh: Mesh, order: Order, data: RobinData) -> Result<Self> {
        let disc = Discretization::new(mesh, order, VOLUME_DEGREE);
        data.check_beta(&disc)?;
        let (system, rhs) = robin_system(&disc, &data);
        let factor = Factorization::new(&system, true)?;
        let u: ScalarField = factor.solve_checked(&system, &rhs)?.into();
        let adj_rhs: Vec<f64> = robin_cost_gradient(&disc, &u).iter().map(|v| -v).collect();
        let p = factor.solve_checked(&system, &adj_rhs)?.into();
        let mass = disc.mass();
        Ok(RobinProblem { disc, data, system, factor, mass, u, p })
    }

    pub fn data(&self) -> &RobinData {
        &self.data
    }

    pub fn tensors(&self) -> ShapeTensors {
        robin_shape_tensors(&self.disc, &self.data, &self.u, &self.p)
    }
}

impl ShapeProblem for RobinProblem {
    fn id(&self) -> &'static str {
        "robin"
    }

    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn cost_on(&self, mesh: &Mesh) -> Result<f64> {
        let disc = self.disc.on_mesh(mesh.clone());
        let u = robin_solve(&disc, &self.data)?;
        Ok(robin_cost(&disc, &u))
    }

    fn state_on(&self, mesh: &Mesh) -> Result<Option<Vec<Vec<f64>>>> {
        let disc = self.disc.on_mesh(mesh.clone());
        Ok(Some(vec![robin_solve(&disc, &self.data)?.coeffs]))
    }

    fn state_norm(&self, snapshots: &[Vec<f64>]) -> f64 {
        weighted_mass_norm(&self.mass, snapshots, &[1.0])
    }

    fn solution_fields(&self) -> Vec<(String, Vec<f64>)> {
        vec![("u".into(), self.u.coeffs.clone()), ("p".into(), self.p.coeffs.clone())]
    }

    fn analyze(&self, velocity: &dyn Velocity) -> Result<Analysis> {
        let l = robin_l_vector(&self.disc, &self.data, &self.u, velocity);
        let rhs: Vec<f64> = l.iter().map(|v| -v).collect();
        let udot = self.factor.solve_checked(&self.system, &rhs)?;
        let lp = dot(&l, &self.p.coeffs);
        let bu = dot(&robin_cost_gradient(&self.disc, &self.u), &udot);
        let raw = lp + robin_cost_rate(&self.disc, &self.u, velocity);
        Ok(Analysis {
            dj: assemble_dj(&self.tensors(), velocity),
            raw,
            duality: Some(DualityReport::new(lp, bu)),
            material: Some(vec![udot]),
        })
    }
}
