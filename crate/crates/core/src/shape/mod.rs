//! Tensor representation of shape derivatives and its assembly,
//!
//! `dJ(θ) = ∫ S₀·θ + S₁:Dθ + S₂∴D²θ + ∫_∂Ω S₀,Γ·θ + S₁,Γ:Dθ`,
//!
//! with tensors sampled at the quadrature points of a discretization.

pub mod manufactured;
pub mod velocity;

use serde::Serialize;

use crate::fem::assembly::{for_each_boundary_qp, for_each_qp, BoundaryQp, Qp};
use crate::fem::{EdgeRule, FeSpace, TriangleRule};
use crate::mesh::Neumaier;
use crate::tensor::{outer, Mat2, Ten2, Vec2};

pub use velocity::{Kinematics, MeshVelocity, Velocity};

/// Where a tensor value lives: element, barycentric point, physical point, weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Site {
    pub elem: usize,
    pub bary: [f64; 3],
    pub x: Vec2,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySite {
    pub site: Site,
    pub normal: Vec2,
}

/// Which part of Dθ a boundary tensor is contracted with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryJacobian {
    /// `S₁,Γ : Dθ`.
    Full,
    /// `S₁,Γ : Dθ (I − n⊗n)`, so that `c I` pairs to `c div_Γ θ`.
    Tangential,
}

/// Volume tensors at one quadrature point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointTensors {
    pub s0: Vec2,
    pub s1: Mat2,
    pub s2: Ten2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryTensors {
    pub s0: Vec2,
    pub s1: Mat2,
}

#[derive(Clone, Debug)]
pub struct BoundaryPart {
    pub sites: Vec<BoundarySite>,
    pub s0: Vec<Vec2>,
    pub s1: Vec<Mat2>,
    pub jacobian: BoundaryJacobian,
}

/// Shape tensors sampled at volume and (optionally) boundary quadrature points.
#[derive(Clone, Debug)]
pub struct ShapeTensors {
    pub sites: Vec<Site>,
    pub s0: Vec<Vec2>,
    pub s1: Vec<Mat2>,
    /// Absent for first-order representations.
    pub s2: Option<Vec<Ten2>>,
    pub boundary: Option<BoundaryPart>,
}

fn site_of(qp: &Qp) -> Site {
    Site { elem: qp.elem, bary: qp.bary, x: qp.x, weight: qp.weight }
}

fn boundary_site_of(qp: &BoundaryQp) -> BoundarySite {
    BoundarySite { site: Site { elem: qp.elem, bary: qp.bary, x: qp.x, weight: qp.weight }, normal: qp.normal }
}

impl ShapeTensors {
    /// Samples volume tensors; `with_s2 = false` drops the third-order part.
    pub fn volume(space: &FeSpace, rule: &TriangleRule, with_s2: bool, mut f: impl FnMut(&Qp) -> PointTensors) -> Self {
        let mut sites = Vec::new();
        let mut s0 = Vec::new();
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        for_each_qp(space, rule, |qp| {
            let t = f(qp);
            sites.push(site_of(qp));
            s0.push(t.s0);
            s1.push(t.s1);
            if with_s2 {
                s2.push(t.s2);
            }
        });
        ShapeTensors { sites, s0, s1, s2: with_s2.then_some(s2), boundary: None }
    }

    /// Adds boundary tensors sampled on every boundary edge.
    pub fn with_boundary(
        mut self,
        space: &FeSpace,
        rule: &EdgeRule,
        jacobian: BoundaryJacobian,
        mut f: impl FnMut(&BoundaryQp) -> BoundaryTensors,
    ) -> Self {
        let mut part = BoundaryPart { sites: Vec::new(), s0: Vec::new(), s1: Vec::new(), jacobian };
        for_each_boundary_qp(space, rule, None, |qp| {
            let t = f(qp);
            part.sites.push(boundary_site_of(qp));
            part.s0.push(t.s0);
            part.s1.push(t.s1);
        });
        self.boundary = Some(part);
        self
    }

    pub fn is_finite(&self) -> bool {
        let vol = self.s0.iter().all(|v| v.is_finite())
            && self.s1.iter().all(|m| m.is_finite())
            && self.s2.iter().flatten().all(|t| t.is_finite());
        let bnd =
            self.boundary.iter().all(|b| b.s0.iter().all(|v| v.is_finite()) && b.s1.iter().all(|m| m.is_finite()));
        vol && bnd
    }
}

/// The terms of an assembled shape derivative. Parabolic problems use the last two.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DjBreakdown {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub boundary_s0: f64,
    pub boundary_s1: f64,
    pub dt_pairing: f64,
    pub initial_residual: f64,
}

impl DjBreakdown {
    pub fn total(&self) -> f64 {
        let mut sum = Neumaier::default();
        for v in [self.s0, self.s1, self.s2, self.boundary_s0, self.boundary_s1, self.dt_pairing, self.initial_residual]
        {
            sum.add(v);
        }
        sum.total()
    }
}

/// `D_Γθ = Dθ (I − n⊗n)`.
pub fn tangential_jacobian(jac: &Mat2, n: &Vec2) -> Mat2 {
    jac.matmul(&(Mat2::identity() - outer(n, n)))
}

/// Quadrature sum of every present term of the tensor representation.
pub fn assemble_dj(tensors: &ShapeTensors, velocity: &dyn Velocity) -> DjBreakdown {
    let mut out = DjBreakdown::default();
    if velocity.is_zero() {
        return out;
    }
    let (mut s0, mut s1, mut s2) = (Neumaier::default(), Neumaier::default(), Neumaier::default());
    for (i, site) in tensors.sites.iter().enumerate() {
        let k = velocity.at(site.elem, &site.bary, &site.x);
        s0.add(site.weight * tensors.s0[i].dot(&k.theta));
        s1.add(site.weight * tensors.s1[i].double_dot(&k.jac));
        if let Some(t2) = &tensors.s2 {
            s2.add(site.weight * t2[i].triple_dot(&k.hess));
        }
    }
    out.s0 = s0.total();
    out.s1 = s1.total();
    out.s2 = s2.total();
    if let Some(b) = &tensors.boundary {
        let (mut b0, mut b1) = (Neumaier::default(), Neumaier::default());
        for (i, bs) in b.sites.iter().enumerate() {
            let site = &bs.site;
            let k = velocity.at(site.elem, &site.bary, &site.x);
            let jac = match b.jacobian {
                BoundaryJacobian::Full => k.jac,
                BoundaryJacobian::Tangential => tangential_jacobian(&k.jac, &bs.normal),
            };
            b0.add(site.weight * b.s0[i].dot(&k.theta));
            b1.add(site.weight * b.s1[i].double_dot(&jac));
        }
        out.boundary_s0 = b0.total();
        out.boundary_s1 = b1.total();
    }
    out
}
