//! Lagrange finite elements on triangles: quadrature, spaces, assembly and sparse solves.

pub mod assembly;
pub mod quadrature;
pub mod space;
pub mod sparse;

pub use quadrature::{EdgeRule, TriangleRule};
pub use space::{FeSpace, Order, ScalarField};
pub use sparse::{CsrMatrix, Factorization, LinearSystem};

use crate::mesh::Mesh;

/// A finite element space together with the quadrature rules used for every
/// integral on it. Moving the mesh keeps order and rules.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub space: FeSpace,
    pub volume: TriangleRule,
    pub edge: EdgeRule,
}

impl Discretization {
    pub fn new(mesh: Mesh, order: Order, volume_degree: usize) -> Self {
        Discretization {
            space: FeSpace::new(mesh, order),
            volume: TriangleRule::of_degree(volume_degree),
            edge: EdgeRule::standard(),
        }
    }

    pub fn mesh(&self) -> &Mesh {
        self.space.mesh()
    }

    pub fn dof_count(&self) -> usize {
        self.space.dof_count()
    }

    pub fn on_mesh(&self, mesh: Mesh) -> Self {
        Discretization { space: self.space.on_mesh(mesh), volume: self.volume.clone(), edge: self.edge.clone() }
    }

    /// Every dof on the boundary, whatever its marker, in increasing order.
    pub fn boundary_dofs(&self) -> Vec<usize> {
        let mut mask = vec![false; self.dof_count()];
        for e in 0..self.mesh().boundary_edges().len() {
            for &d in self.space.boundary_edge_dofs(e) {
                mask[d] = true;
            }
        }
        mask.iter().enumerate().filter_map(|(d, &b)| b.then_some(d)).collect()
    }

    /// Unit-weight mass matrix, used for L² norms and pairings.
    pub fn mass(&self) -> CsrMatrix {
        assembly::assemble_mass(&self.space, &self.volume, |_| 1.0)
    }
}
