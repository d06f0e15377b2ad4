//! The interface shared by every shape-dependent functional, and the pure
//! geometry functional `J(Ω) = |Ω|`.

use serde::Serialize;

use crate::error::Result;
use crate::fem::assembly::integrate;
use crate::fem::{Discretization, Order};
use crate::mesh::Mesh;
use crate::shape::{assemble_dj, DjBreakdown, PointTensors, ShapeTensors, Velocity};
use crate::tensor::{Mat2, Ten2, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DualityReport {
    /// `⟨L(u), p⟩`.
    pub lhs: f64,
    /// `⟨B(u), u̇⟩`.
    pub rhs: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
}

impl DualityReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let abs_gap = (lhs - rhs).abs();
        DualityReport { lhs, rhs, abs_gap, rel_gap: abs_gap / (1.0 + lhs.abs()) }
    }
}

/// Everything computed on the reference domain for one velocity.
#[derive(Clone, Debug)]
pub struct Analysis {
    /// Tensor representation assembled with the velocity.
    pub dj: DjBreakdown,
    /// The same derivative evaluated before tensorization, `⟨L(u), p⟩ + ∂_s𝓑(0, u)`.
    pub raw: f64,
    pub duality: Option<DualityReport>,
    /// Material derivative snapshots (one per time level for evolution problems).
    pub material: Option<Vec<Vec<f64>>>,
}

pub trait ShapeProblem: Sync {
    fn id(&self) -> &'static str;

    fn discretization(&self) -> &Discretization;

    fn mesh(&self) -> &Mesh {
        self.discretization().mesh()
    }

    /// Cost after re-solving on a mesh with the reference topology.
    fn cost_on(&self, mesh: &Mesh) -> Result<f64>;

    /// State snapshots on a mesh with the reference topology, if the problem has a state.
    fn state_on(&self, mesh: &Mesh) -> Result<Option<Vec<Vec<f64>>>>;

    /// The norm used for material-derivative remainders, over reference-mesh snapshots.
    fn state_norm(&self, snapshots: &[Vec<f64>]) -> f64;

    fn analyze(&self, velocity: &dyn Velocity) -> Result<Analysis>;

    /// Named coefficient vectors of the reference solution (state, adjoint, per time level).
    fn solution_fields(&self) -> Vec<(String, Vec<f64>)> {
        Vec::new()
    }
}

/// `J(Ω) = |Ω|` with `dJ(θ) = ∫ div θ`, i.e. `S₁ = I`.
pub struct AreaProblem {
    disc: Discretization,
}

impl AreaProblem {
    pub fn new(mesh: Mesh) -> Self {
        AreaProblem { disc: Discretization::new(mesh, Order::P1, 1) }
    }

    pub fn tensors(&self) -> ShapeTensors {
        ShapeTensors::volume(&self.disc.space, &self.disc.volume, false, |_| PointTensors {
            s0: Vec2::zero(),
            s1: Mat2::identity(),
            s2: Ten2::zero(),
        })
    }
}

impl ShapeProblem for AreaProblem {
    fn id(&self) -> &'static str {
        "area"
    }

    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn cost_on(&self, mesh: &Mesh) -> Result<f64> {
        Ok(mesh.area())
    }

    fn state_on(&self, _mesh: &Mesh) -> Result<Option<Vec<Vec<f64>>>> {
        Ok(None)
    }

    fn state_norm(&self, _snapshots: &[Vec<f64>]) -> f64 {
        0.0
    }

    fn analyze(&self, velocity: &dyn Velocity) -> Result<Analysis> {
        let dj = assemble_dj(&self.tensors(), velocity);
        let raw = integrate(&self.disc.space, &self.disc.volume, |qp| velocity.at(qp.elem, &qp.bary, &qp.x).div());
        Ok(Analysis { dj, raw, duality: None, material: None })
    }
}

/// `sqrt(Σ_k w_k vₖᵀ M vₖ)`.
pub fn weighted_mass_norm(mass: &crate::fem::CsrMatrix, snapshots: &[Vec<f64>], weights: &[f64]) -> f64 {
    let mut sum = crate::mesh::Neumaier::default();
    for (v, w) in snapshots.iter().zip(weights) {
        sum.add(w * mass.bilinear(v, v));
    }
    sum.total().max(0.0).sqrt()
}
