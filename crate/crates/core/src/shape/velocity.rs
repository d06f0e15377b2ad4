//! Velocity fields as seen by quadrature loops.
//!
//! The analytic field θ and its piecewise-linear interpolant θ_h on a mesh are
//! interchangeable wherever a shape derivative is assembled. The interpolant is
//! what the node-wise mesh transport differentiates to at `s = 0`, so the
//! derivative assembled with θ_h is the exact derivative of the discrete cost.

use crate::fem::space::barycentric_gradients;
use crate::flow::VectorField;
use crate::mesh::Mesh;
use crate::tensor::{outer, Mat2, Ten2, Vec2};

/// θ, Dθ and D²θ at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub theta: Vec2,
    pub jac: Mat2,
    pub hess: Ten2,
}

impl Kinematics {
    pub fn div(&self) -> f64 {
        self.jac.trace()
    }
}

pub trait Velocity: Sync {
    /// Evaluates at the point `x` with barycentric coordinates `bary` in element `elem`.
    fn at(&self, elem: usize, bary: &[f64; 3], x: &Vec2) -> Kinematics;

    fn is_zero(&self) -> bool;
}

impl Velocity for VectorField {
    fn at(&self, _elem: usize, _bary: &[f64; 3], x: &Vec2) -> Kinematics {
        let (theta, jac, hess) = self.eval_all(x);
        Kinematics { theta, jac, hess }
    }

    fn is_zero(&self) -> bool {
        VectorField::is_zero(self)
    }
}

/// Piecewise-linear interpolant of a field at mesh nodes.
#[derive(Clone, Debug)]
pub struct MeshVelocity {
    triangles: Vec<[usize; 3]>,
    nodal: Vec<Vec2>,
    jac: Vec<Mat2>,
}

impl MeshVelocity {
    pub fn interpolate(mesh: &Mesh, field: &VectorField) -> Self {
        let nodal = mesh.nodes().iter().map(|x| field.eval(x)).collect();
        Self::from_nodal(mesh, nodal)
    }

    pub fn from_nodal(mesh: &Mesh, nodal: Vec<Vec2>) -> Self {
        assert_eq!(nodal.len(), mesh.node_count(), "one velocity per node");
        let jac = (0..mesh.triangle_count())
            .map(|t| {
                let g = barycentric_gradients(&mesh.triangle_vertices(t));
                let tri = mesh.triangles()[t];
                (0..3).fold(Mat2::zero(), |acc, a| acc + outer(&nodal[tri[a]], &g[a]))
            })
            .collect();
        MeshVelocity { triangles: mesh.triangles().to_vec(), nodal, jac }
    }

    pub fn nodal(&self) -> &[Vec2] {
        &self.nodal
    }
}

impl Velocity for MeshVelocity {
    fn at(&self, elem: usize, bary: &[f64; 3], _x: &Vec2) -> Kinematics {
        let tri = self.triangles[elem];
        let theta = self.nodal[tri[0]] * bary[0] + self.nodal[tri[1]] * bary[1] + self.nodal[tri[2]] * bary[2];
        Kinematics { theta, jac: self.jac[elem], hess: Ten2::zero() }
    }

    fn is_zero(&self) -> bool {
        self.nodal.iter().all(|v| *v == Vec2::zero())
    }
}
