//! P1 and P2 Lagrange spaces on a triangular mesh.
//!
//! Local numbering on a triangle: vertices 0, 1, 2 followed (P2 only) by the
//! midpoints of edges (0,1), (1,2), (2,0). Global numbering: mesh nodes first,
//! then edges in first-seen order while sweeping the triangles.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::tensor::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Order {
    P1,
    P2,
}

impl Order {
    pub fn from_degree(degree: usize) -> Result<Self> {
        match degree {
            1 => Ok(Order::P1),
            2 => Ok(Order::P2),
            _ => Err(Error::invalid(format!("unsupported element order {degree}"))),
        }
    }

    pub fn degree(self) -> usize {
        match self {
            Order::P1 => 1,
            Order::P2 => 2,
        }
    }

    pub fn local_dofs(self) -> usize {
        match self {
            Order::P1 => 3,
            Order::P2 => 6,
        }
    }
}

/// Gradients of the barycentric coordinates of a triangle, constant on it.
pub fn barycentric_gradients(v: &[Vec2; 3]) -> [Vec2; 3] {
    let area2 = (v[1] - v[0]).cross(&(v[2] - v[0]));
    let g = |a: &Vec2, b: &Vec2| Vec2::xy(a.y() - b.y(), b.x() - a.x()) * (1.0 / area2);
    [g(&v[1], &v[2]), g(&v[2], &v[0]), g(&v[0], &v[1])]
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Mesh,
    order: Order,
    elem_dofs: Vec<usize>,
    dof_coords: Vec<Vec2>,
    /// Dofs lying on each boundary edge (vertices, then the midpoint for P2).
    boundary_edge_dofs: Vec<Vec<usize>>,
    grad_lambda: Vec<[Vec2; 3]>,
}

impl FeSpace {
    pub fn new(mesh: Mesh, order: Order) -> Self {
        let nn = mesh.node_count();
        let nloc = order.local_dofs();
        let mut elem_dofs = Vec::with_capacity(nloc * mesh.triangle_count());
        let mut dof_coords = mesh.nodes().to_vec();
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in mesh.triangles() {
            elem_dofs.extend_from_slice(tri);
            if order == Order::P2 {
                for l in 0..3 {
                    let (a, b) = (tri[l], tri[(l + 1) % 3]);
                    let key = (a.min(b), a.max(b));
                    let next = nn + edge_ids.len();
                    let id = *edge_ids.entry(key).or_insert_with(|| {
                        dof_coords.push((mesh.nodes()[a] + mesh.nodes()[b]) * 0.5);
                        next
                    });
                    elem_dofs.push(id);
                }
            }
        }
        let boundary_edge_dofs = mesh
            .boundary_edges()
            .iter()
            .map(|e| {
                let [a, b] = e.nodes;
                let mut d = vec![a, b];
                if order == Order::P2 {
                    d.push(edge_ids[&(a.min(b), a.max(b))]);
                }
                d
            })
            .collect();
        let grad_lambda =
            (0..mesh.triangle_count()).map(|t| barycentric_gradients(&mesh.triangle_vertices(t))).collect();
        FeSpace { mesh, order, elem_dofs, dof_coords, boundary_edge_dofs, grad_lambda }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn dof_count(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn dof_coords(&self) -> &[Vec2] {
        &self.dof_coords
    }

    pub fn local_dofs(&self) -> usize {
        self.order.local_dofs()
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let n = self.local_dofs();
        &self.elem_dofs[n * t..n * (t + 1)]
    }

    pub fn grad_lambda(&self, t: usize) -> &[Vec2; 3] {
        &self.grad_lambda[t]
    }

    pub fn boundary_edge_dofs(&self, edge: usize) -> &[usize] {
        &self.boundary_edge_dofs[edge]
    }

    /// Sorted, deduplicated dofs on boundary edges carrying `marker`.
    pub fn boundary_dofs(&self, marker: i32) -> Result<Vec<usize>> {
        if !self.mesh.has_marker(marker) {
            return Err(Error::invalid(format!("unknown boundary marker {marker}")));
        }
        let mut dofs: Vec<usize> = self
            .mesh
            .boundary_edges()
            .iter()
            .zip(&self.boundary_edge_dofs)
            .filter(|(e, _)| e.marker == marker)
            .flat_map(|(_, d)| d.iter().copied())
            .collect();
        dofs.sort_unstable();
        dofs.dedup();
        Ok(dofs)
    }

    /// Boolean mask of dofs on any boundary edge with `marker`.
    pub fn boundary_mask(&self, marker: i32) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.dof_count()];
        for d in self.boundary_dofs(marker)? {
            mask[d] = true;
        }
        Ok(mask)
    }

    /// Basis values at barycentric point `l`, written into `phi`.
    pub fn basis(&self, l: &[f64; 3], phi: &mut [f64]) {
        match self.order {
            Order::P1 => phi[..3].copy_from_slice(l),
            Order::P2 => {
                for a in 0..3 {
                    phi[a] = l[a] * (2.0 * l[a] - 1.0);
                    phi[3 + a] = 4.0 * l[a] * l[(a + 1) % 3];
                }
            }
        }
    }

    /// Basis gradients on element `t` at barycentric point `l`.
    pub fn basis_gradients(&self, t: usize, l: &[f64; 3], grad: &mut [Vec2]) {
        let g = &self.grad_lambda[t];
        match self.order {
            Order::P1 => grad[..3].copy_from_slice(g),
            Order::P2 => {
                for a in 0..3 {
                    let b = (a + 1) % 3;
                    grad[a] = g[a] * (4.0 * l[a] - 1.0);
                    grad[3 + a] = (g[a] * l[b] + g[b] * l[a]) * 4.0;
                }
            }
        }
    }

    pub fn point(&self, t: usize, l: &[f64; 3]) -> Vec2 {
        let v = self.mesh.triangle_vertices(t);
        v[0] * l[0] + v[1] * l[1] + v[2] * l[2]
    }

    fn check_bary(&self, t: usize, l: &[f64; 3]) -> Result<()> {
        if t >= self.mesh.triangle_count() {
            return Err(Error::invalid(format!("element {t} does not exist")));
        }
        let tol = 1e-12;
        if l.iter().any(|&x| !(x >= -tol && x <= 1.0 + tol)) || (l.iter().sum::<f64>() - 1.0).abs() > tol {
            return Err(Error::invalid(format!("barycentric point {l:?} lies outside element {t}")));
        }
        Ok(())
    }

    pub fn interpolate(&self, f: impl Fn(&Vec2) -> f64) -> ScalarField {
        ScalarField { coeffs: self.dof_coords.iter().map(f).collect() }
    }

    pub fn eval_field(&self, field: &ScalarField, t: usize, l: &[f64; 3]) -> Result<f64> {
        self.check_bary(t, l)?;
        let mut phi = [0.0; 6];
        self.basis(l, &mut phi);
        Ok(self.element_dofs(t).iter().zip(&phi).map(|(&d, p)| field.coeffs[d] * p).sum())
    }

    pub fn eval_gradient(&self, field: &ScalarField, t: usize, l: &[f64; 3]) -> Result<Vec2> {
        self.check_bary(t, l)?;
        let mut grad = [Vec2::zero(); 6];
        self.basis_gradients(t, l, &mut grad);
        let mut g = Vec2::zero();
        for (&d, gr) in self.element_dofs(t).iter().zip(&grad) {
            g += *gr * field.coeffs[d];
        }
        Ok(g)
    }

    /// Same topology on a moved mesh.
    pub fn on_mesh(&self, mesh: Mesh) -> Self {
        FeSpace::new(mesh, self.order)
    }
}

/// Coefficient vector of a finite element function.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub coeffs: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        ScalarField { coeffs: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(coeffs: Vec<f64>) -> Self {
        ScalarField { coeffs }
    }
}
