//! Poisson problem with homogeneous Dirichlet conditions and cost `J(Ω) = ∫|∇u|²`.
//!
//! The adjoint is `p = −2u`, which holds coefficientwise at the discrete level
//! because state and adjoint share the same matrix.

use crate::data::ScalarData;
use crate::error::Result;
use crate::fem::assembly::{assemble_diffusion, assemble_load, assemble_vector, integrate, integrate_boundary};
use crate::fem::sparse::{dot, CsrMatrix, Factorization, LinearSystem};
use crate::fem::{Discretization, Order, ScalarField};
use crate::flow::m_prime0_from_jac;
use crate::mesh::Mesh;
use crate::problem::{weighted_mass_norm, Analysis, DualityReport, ShapeProblem};
use crate::shape::{assemble_dj, DjBreakdown, PointTensors, ShapeTensors, Velocity};
use crate::tensor::{outer, Mat2, Ten2};

pub const VOLUME_DEGREE: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct DirichletEnergyData {
    pub f: ScalarData,
}

/// Stiffness with Dirichlet rows and columns eliminated.
fn constrained_stiffness(disc: &Discretization) -> CsrMatrix {
    let k = assemble_diffusion(&disc.space, &disc.volume, |_| Mat2::identity());
    let mut sys = LinearSystem::new(k, vec![0.0; disc.dof_count()], true).expect("square");
    let pairs: Vec<_> = disc.boundary_dofs().into_iter().map(|d| (d, 0.0)).collect();
    sys.constrain(&pairs);
    sys.matrix
}

fn free_rhs(disc: &Discretization, mut v: Vec<f64>) -> Vec<f64> {
    for d in disc.boundary_dofs() {
        v[d] = 0.0;
    }
    v
}

pub fn dirichlet_energy_solve(disc: &Discretization, data: &DirichletEnergyData) -> Result<ScalarField> {
    let k = constrained_stiffness(disc);
    let rhs = free_rhs(disc, assemble_load(&disc.space, &disc.volume, |x| data.f.value(x)));
    Ok(Factorization::new(&k, true)?.solve_checked(&k, &rhs)?.into())
}

pub fn dirichlet_energy_cost(disc: &Discretization, u: &ScalarField) -> f64 {
    integrate(&disc.space, &disc.volume, |qp| qp.gradient(&u.coeffs).norm().powi(2))
}

/// `B(u)φ = 2∫ ∇u·∇φ`.
pub fn dirichlet_energy_cost_gradient(disc: &Discretization, u: &ScalarField) -> Vec<f64> {
    assemble_vector(&disc.space, &disc.volume, |qp, local| {
        let gu = qp.gradient(&u.coeffs) * (2.0 * qp.weight);
        for (l, g) in local.iter_mut().zip(qp.grad) {
            *l += gu.dot(g);
        }
    })
}

/// `⟨L(u), φ⟩ = ∫ 𝓜′(0, I)∇u·∇φ − div(fθ)φ` on the free dofs.
pub fn dirichlet_energy_l_vector(
    disc: &Discretization,
    data: &DirichletEnergyData,
    u: &ScalarField,
    velocity: &dyn Velocity,
) -> Vec<f64> {
    let l = assemble_vector(&disc.space, &disc.volume, |qp, local| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let flux = m_prime0_from_jac(&k.jac, &Mat2::identity()).matvec(&qp.gradient(&u.coeffs)) * qp.weight;
        let div_ftheta = (data.f.grad(&qp.x).dot(&k.theta) + data.f.value(&qp.x) * k.div()) * qp.weight;
        for a in 0..local.len() {
            local[a] += flux.dot(&qp.grad[a]) - div_ftheta * qp.phi[a];
        }
    });
    free_rhs(disc, l)
}

/// `∂_s𝓑(0, u) = ∫ 𝓜′(0, I)∇u·∇u`.
pub fn dirichlet_energy_cost_rate(disc: &Discretization, u: &ScalarField, velocity: &dyn Velocity) -> f64 {
    integrate(&disc.space, &disc.volume, |qp| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let gu = qp.gradient(&u.coeffs);
        m_prime0_from_jac(&k.jac, &Mat2::identity()).matvec(&gu).dot(&gu)
    })
}

/// `S₀ = 2u∇f`, `S₁ = 2∇u⊗∇u + (2fu − |∇u|²)I`.
pub fn dirichlet_energy_tensors(disc: &Discretization, data: &DirichletEnergyData, u: &ScalarField) -> ShapeTensors {
    ShapeTensors::volume(&disc.space, &disc.volume, false, |qp| {
        let gu = qp.gradient(&u.coeffs);
        let uq = qp.value(&u.coeffs);
        PointTensors {
            s0: data.f.grad(&qp.x) * (2.0 * uq),
            s1: outer(&gu, &gu) * 2.0 + Mat2::identity() * (2.0 * data.f.value(&qp.x) * uq - gu.dot(&gu)),
            s2: Ten2::zero(),
        }
    })
}

/// `∫_∂Ω (S₁n·n) θ·n` with one-sided gradient traces.
pub fn dirichlet_energy_boundary_dj(
    disc: &Discretization,
    data: &DirichletEnergyData,
    u: &ScalarField,
    velocity: &dyn Velocity,
) -> f64 {
    integrate_boundary(&disc.space, &disc.edge, None, |qp| {
        let n = qp.normal;
        let gu = qp.gradient(&u.coeffs);
        let uq = qp.value(&u.coeffs);
        let s1nn = 2.0 * gu.dot(&n).powi(2) + 2.0 * data.f.value(&qp.x) * uq - gu.dot(&gu);
        s1nn * velocity.at(qp.elem, &qp.bary, &qp.x).theta.dot(&n)
    })
}

/// All outputs of the example for one velocity.
#[derive(Clone, Debug)]
pub struct DirichletEnergySuite {
    pub u: ScalarField,
    pub p: ScalarField,
    pub udot: ScalarField,
    pub tensors: ShapeTensors,
    pub dj_volume: DjBreakdown,
    pub dj_boundary: f64,
}

pub fn dirichlet_energy_suite(
    disc: &Discretization,
    data: &DirichletEnergyData,
    velocity: &dyn Velocity,
) -> Result<DirichletEnergySuite> {
    let k = constrained_stiffness(disc);
    let factor = Factorization::new(&k, true)?;
    let rhs = free_rhs(disc, assemble_load(&disc.space, &disc.volume, |x| data.f.value(x)));
    let u: ScalarField = factor.solve_checked(&k, &rhs)?.into();
    let adj_rhs: Vec<f64> = free_rhs(disc, dirichlet_energy_cost_gradient(disc, &u)).iter().map(|v| -v).collect();
    let p: ScalarField = factor.solve_checked(&k, &adj_rhs)?.into();
    let l: Vec<f64> = dirichlet_energy_l_vector(disc, data, &u, velocity).iter().map(|v| -v).collect();
    let udot = factor.solve_checked(&k, &l)?.into();
    let tensors = dirichlet_energy_tensors(disc, data, &u);
    let dj_volume = assemble_dj(&tensors, velocity);
    let dj_boundary = dirichlet_energy_boundary_dj(disc, data, &u, velocity);
    Ok(DirichletEnergySuite { u, p, udot, tensors, dj_volume, dj_boundary })
}

pub struct DirichletEnergyProblem {
    disc: Discretization,
    data: DirichletEnergyData,
    stiffness: CsrMatrix,
    factor: Factorization,
    mass: CsrMatrix,
    pub u: ScalarField,
    pub p: ScalarField,
}

impl DirichletEnergyProblem {
    pub fn new(mesh: Mesh, order: Order, data: DirichletEnergyData) -> Result<Self> {
        let disc = Discretization::new(mesh, order, VOLUME_DEGREE);
        let stiffness = constrained_stiffness(&disc);
        let factor = Factorization::new(&stiffness, true)?;
        let rhs = free_rhs(&disc, assemble_load(&disc.space, &disc.volume, |x| data.f.value(x)));
        let u: ScalarField = factor.solve_checked(&stiffness, &rhs)?.into();
        let adj_rhs: Vec<f64> = free_rhs(&disc, dirichlet_energy_cost_gradient(&disc, &u)).iter().map(|v| -v).collect();
        let p = factor.solve_checked(&stiffness, &adj_rhs)?.into();
        let mass = disc.mass();
        Ok(DirichletEnergyProblem { disc, data, stiffness, factor, mass, u, p })
    }

    pub fn tensors(&self) -> ShapeTensors {
        dirichlet_energy_tensors(&self.disc, &self.data, &self.u)
    }

    pub fn boundary_dj(&self, velocity: &dyn Velocity) -> f64 {
        dirichlet_energy_boundary_dj(&self.disc, &self.data, &self.u, velocity)
    }
}

impl ShapeProblem for DirichletEnergyProblem {
    fn id(&self) -> &'static str {
        "dirichlet_energy"
    }

    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn cost_on(&self, mesh: &Mesh) -> Result<f64> {
        let disc = self.disc.on_mesh(mesh.clone());
        let u = dirichlet_energy_solve(&disc, &self.data)?;
        Ok(dirichlet_energy_cost(&disc, &u))
    }

    fn state_on(&self, mesh: &Mesh) -> Result<Option<Vec<Vec<f64>>>> {
        let disc = self.disc.on_mesh(mesh.clone());
        Ok(Some(vec![dirichlet_energy_solve(&disc, &self.data)?.coeffs]))
    }

    fn state_norm(&self, snapshots: &[Vec<f64>]) -> f64 {
        weighted_mass_norm(&self.mass, snapshots, &[1.0])
    }

    fn solution_fields(&self) -> Vec<(String, Vec<f64>)> {
        vec![("u".into(), self.u.coeffs.clone()), ("p".into(), self.p.coeffs.clone())]
    }

    fn analyze(&self, velocity: &dyn Velocity) -> Result<Analysis> {
        let l = dirichlet_energy_l_vector(&self.disc, &self.data, &self.u, velocity);
        let rhs: Vec<f64> = l.iter().map(|v| -v).collect();
        let udot = self.factor.solve_checked(&self.stiffness, &rhs)?;
        let lp = dot(&l, &self.p.coeffs);
        let bu = dot(&dirichlet_energy_cost_gradient(&self.disc, &self.u), &udot);
        let raw = lp + dirichlet_energy_cost_rate(&self.disc, &self.u, velocity);
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
    use crate::flow::VectorField;
    use crate::shape::MeshVelocity;
    use crate::tensor::Vec2;

    fn data() -> DirichletEnergyData {
        DirichletEnergyData { f: ScalarData::constant(1.0) }
    }

    #[test]
    fn adjoint_is_minus_twice_the_state() {
        for order in [Order::P1, Order::P2] {
            let pb = DirichletEnergyProblem::new(Mesh::disk(Vec2::zero(), 1.0, 3).unwrap(), order, data()).unwrap();
            let gap = pb.u.coeffs.iter().zip(&pb.p.coeffs).map(|(u, p)| (p + 2.0 * u).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-10, "{gap}");
        }
    }

    #[test]
    fn zero_source_gives_zero() {
        let theta = VectorField::from_catalog("bump", &[0.1, 0.0, 0.8, 0.4, 0.1], None).unwrap();
        let disc = Discretization::new(Mesh::disk(Vec2::zero(), 1.0, 2).unwrap(), Order::P1, VOLUME_DEGREE);
        let s = dirichlet_energy_suite(&disc, &DirichletEnergyData { f: ScalarData::zero() }, &theta).unwrap();
        assert_eq!(s.u.max_abs(), 0.0);
        assert_eq!(s.dj_volume.total(), 0.0);
        assert_eq!(s.dj_boundary, 0.0);
    }

    #[test]
    fn derivative_forms_and_duality_agree() {
        let pb = DirichletEnergyProblem::new(
            Mesh::disk(Vec2::zero(), 1.0, 3).unwrap(),
            Order::P2,
            DirichletEnergyData { f: ScalarData::SinSin { a: 2.0, kx: 1.0, ky: 1.5 } },
        )
        .unwrap();
        let theta = VectorField::from_catalog("bump", &[0.1, 0.0, 0.8, 0.4, 0.1], None).unwrap();
        for vel in [&theta as &dyn Velocity, &MeshVelocity::interpolate(pb.mesh(), &theta)] {
            let a = pb.analyze(vel).unwrap();
            let t = a.dj.total();
            assert!((t - a.raw).abs() <= 1e-12 * t.abs().max(1.0), "{t} vs {}", a.raw);
            assert!(a.duality.unwrap().rel_gap <= 1e-9);
        }
    }
}
