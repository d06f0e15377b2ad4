//! Element loops over volume and boundary quadrature points.
//!
//! Kernels receive a [`Qp`] (or [`BoundaryQp`]) describing one quadrature point
//! and accumulate into a dense local matrix or vector which is then scattered.
//! Loops run in element order so every reduction is deterministic.

use crate::error::{Error, Result};
use crate::fem::quadrature::{EdgeRule, TriangleRule};
use crate::fem::space::{FeSpace, ScalarField};
use crate::fem::sparse::{CsrMatrix, LinearSystem};
use crate::mesh::Neumaier;
use crate::tensor::{Mat2, Vec2};

/// One volume quadrature point of one element.
pub struct Qp<'a> {
    pub elem: usize,
    /// Index of the point within the rule.
    pub q: usize,
    pub bary: [f64; 3],
    pub x: Vec2,
    /// Quadrature weight times element area.
    pub weight: f64,
    pub dofs: &'a [usize],
    pub phi: &'a [f64],
    pub grad: &'a [Vec2],
}

impl Qp<'_> {
    pub fn value(&self, coeffs: &[f64]) -> f64 {
        self.dofs.iter().zip(self.phi).map(|(&d, p)| coeffs[d] * p).sum()
    }

    pub fn gradient(&self, coeffs: &[f64]) -> Vec2 {
        let mut g = Vec2::zero();
        for (&d, gr) in self.dofs.iter().zip(self.grad) {
            g += *gr * coeffs[d];
        }
        g
    }
}

/// One quadrature point on a boundary edge, with the owning element's basis.
pub struct BoundaryQp<'a> {
    pub edge: usize,
    pub elem: usize,
    pub q: usize,
    pub marker: i32,
    pub bary: [f64; 3],
    pub x: Vec2,
    /// Quadrature weight times edge length.
    pub weight: f64,
    pub normal: Vec2,
    pub dofs: &'a [usize],
    pub phi: &'a [f64],
    pub grad: &'a [Vec2],
}

impl BoundaryQp<'_> {
    pub fn value(&self, coeffs: &[f64]) -> f64 {
        self.dofs.iter().zip(self.phi).map(|(&d, p)| coeffs[d] * p).sum()
    }

    /// One-sided gradient trace from the owning element.
    pub fn gradient(&self, coeffs: &[f64]) -> Vec2 {
        let mut g = Vec2::zero();
        for (&d, gr) in self.dofs.iter().zip(self.grad) {
            g += *gr * coeffs[d];
        }
        g
    }
}

/// Visits every volume quadrature point in element-major order.
pub fn for_each_qp(space: &FeSpace, rule: &TriangleRule, mut f: impl FnMut(&Qp)) {
    let mesh = space.mesh();
    let n = space.local_dofs();
    let mut phi = [0.0; 6];
    let mut grad = [Vec2::zero(); 6];
    for t in 0..mesh.triangle_count() {
        let area = mesh.triangle_area(t);
        let dofs = space.element_dofs(t);
        for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            space.basis(l, &mut phi);
            space.basis_gradients(t, l, &mut grad);
            f(&Qp {
                elem: t,
                q,
                bary: *l,
                x: space.point(t, l),
                weight: w * area,
                dofs,
                phi: &phi[..n],
                grad: &grad[..n],
            });
        }
    }
}

/// Barycentric coordinates of the point at parameter `s` along local edge `l`.
pub fn edge_bary(l: usize, s: f64) -> [f64; 3] {
    let mut b = [0.0; 3];
    b[l] = 1.0 - s;
    b[(l + 1) % 3] = s;
    b
}

/// Visits every boundary quadrature point, edge by edge, optionally restricted to one marker.
pub fn for_each_boundary_qp(space: &FeSpace, rule: &EdgeRule, marker: Option<i32>, mut f: impl FnMut(&BoundaryQp)) {
    let mesh = space.mesh();
    let n = space.local_dofs();
    let mut phi = [0.0; 6];
    let mut grad = [Vec2::zero(); 6];
    for (b, e) in mesh.boundary_edges().iter().enumerate() {
        if marker.is_some_and(|m| m != e.marker) {
            continue;
        }
        let (t, l) = mesh.boundary_owner(b);
        let len = mesh.edge_length(b);
        let normal = mesh.outward_normal(b).expect("boundary edge");
        let dofs = space.element_dofs(t);
        // Parametrize from the edge's first listed node so the point order is that of the file.
        let tri = mesh.triangles()[t];
        let reversed = tri[l] != e.nodes[0];
        for (q, (s, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let s = if reversed { 1.0 - s } else { *s };
            let bary = edge_bary(l, s);
            space.basis(&bary, &mut phi);
            space.basis_gradients(t, &bary, &mut grad);
            f(&BoundaryQp {
                edge: b,
                elem: t,
                q,
                marker: e.marker,
                bary,
                x: space.point(t, &bary),
                weight: w * len,
                normal,
                dofs,
                phi: &phi[..n],
                grad: &grad[..n],
            });
        }
    }
}

fn check_marker(space: &FeSpace, marker: i32) -> Result<()> {
    if space.mesh().has_marker(marker) {
        Ok(())
    } else {
        Err(Error::invalid(format!("unknown boundary marker {marker}")))
    }
}

/// Generic matrix assembly: `kernel(qp, local)` adds `local[a·n + b]` for test `a`, trial `b`.
pub fn assemble_matrix(space: &FeSpace, rule: &TriangleRule, mut kernel: impl FnMut(&Qp, &mut [f64])) -> CsrMatrix {
    let n = space.local_dofs();
    let mut triplets = Vec::with_capacity(n * n * space.mesh().triangle_count());
    let mut local = vec![0.0; n * n];
    let mut current = usize::MAX;
    let flush = |elem: usize, local: &mut [f64], triplets: &mut Vec<(usize, usize, f64)>| {
        let dofs = space.element_dofs(elem);
        for a in 0..n {
            for b in 0..n {
                triplets.push((dofs[a], dofs[b], local[a * n + b]));
            }
        }
        local.iter_mut().for_each(|v| *v = 0.0);
    };
    for_each_qp(space, rule, |qp| {
        if qp.elem != current {
            if current != usize::MAX {
                flush(current, &mut local, &mut triplets);
            }
            current = qp.elem;
        }
        kernel(qp, &mut local);
    });
    if current != usize::MAX {
        flush(current, &mut local, &mut triplets);
    }
    CsrMatrix::from_triplets(space.dof_count(), triplets)
}

/// Generic vector assembly: `kernel(qp, local)` adds `local[a]` for test function `a`.
pub fn assemble_vector(space: &FeSpace, rule: &TriangleRule, mut kernel: impl FnMut(&Qp, &mut [f64])) -> Vec<f64> {
    let n = space.local_dofs();
    let mut out = vec![0.0; space.dof_count()];
    let mut local = vec![0.0; n];
    for_each_qp(space, rule, |qp| {
        local.iter_mut().for_each(|v| *v = 0.0);
        kernel(qp, &mut local);
        for (a, &d) in qp.dofs.iter().enumerate() {
            out[d] += local[a];
        }
    });
    out
}

pub fn assemble_boundary_matrix(
    space: &FeSpace,
    rule: &EdgeRule,
    marker: Option<i32>,
    mut kernel: impl FnMut(&BoundaryQp, &mut [f64]),
) -> CsrMatrix {
    let n = space.local_dofs();
    let mut triplets = Vec::new();
    let mut local = vec![0.0; n * n];
    for_each_boundary_qp(space, rule, marker, |qp| {
        local.iter_mut().for_each(|v| *v = 0.0);
        kernel(qp, &mut local);
        for a in 0..n {
            for b in 0..n {
                if local[a * n + b] != 0.0 {
                    triplets.push((qp.dofs[a], qp.dofs[b], local[a * n + b]));
                }
            }
        }
    });
    CsrMatrix::from_triplets(space.dof_count(), triplets)
}

pub fn assemble_boundary_vector(
    space: &FeSpace,
    rule: &EdgeRule,
    marker: Option<i32>,
    mut kernel: impl FnMut(&BoundaryQp, &mut [f64]),
) -> Vec<f64> {
    let n = space.local_dofs();
    let mut out = vec![0.0; space.dof_count()];
    let mut local = vec![0.0; n];
    for_each_boundary_qp(space, rule, marker, |qp| {
        local.iter_mut().for_each(|v| *v = 0.0);
        kernel(qp, &mut local);
        for (a, &d) in qp.dofs.iter().enumerate() {
            out[d] += local[a];
        }
    });
    out
}

/// Deterministic compensated sum of `f` over volume quadrature points.
pub fn integrate(space: &FeSpace, rule: &TriangleRule, mut f: impl FnMut(&Qp) -> f64) -> f64 {
    let mut sum = Neumaier::default();
    for_each_qp(space, rule, |qp| sum.add(qp.weight * f(qp)));
    sum.total()
}

pub fn integrate_boundary(
    space: &FeSpace,
    rule: &EdgeRule,
    marker: Option<i32>,
    mut f: impl FnMut(&BoundaryQp) -> f64,
) -> f64 {
    let mut sum = Neumaier::default();
    for_each_boundary_qp(space, rule, marker, |qp| sum.add(qp.weight * f(qp)));
    sum.total()
}

/// `∫ coeff ∇φ_j · ∇φ_i`.
pub fn assemble_diffusion(space: &FeSpace, rule: &TriangleRule, coeff: impl Fn(&Vec2) -> Mat2) -> CsrMatrix {
    let n = space.local_dofs();
    assemble_matrix(space, rule, |qp, local| {
        let k = coeff(&qp.x);
        for b in 0..n {
            let kg = k.matvec(&qp.grad[b]) * qp.weight;
            for a in 0..n {
                local[a * n + b] += kg.dot(&qp.grad[a]);
            }
        }
    })
}

/// `∫ w φ_j φ_i`.
pub fn assemble_mass(space: &FeSpace, rule: &TriangleRule, weight: impl Fn(&Vec2) -> f64) -> CsrMatrix {
    let n = space.local_dofs();
    assemble_matrix(space, rule, |qp, local| {
        let w = weight(&qp.x) * qp.weight;
        for a in 0..n {
            for b in 0..n {
                local[a * n + b] += w * qp.phi[a] * qp.phi[b];
            }
        }
    })
}

/// `∫_{∂Ω, marker} w φ_j φ_i`.
pub fn assemble_boundary_mass(
    space: &FeSpace,
    rule: &EdgeRule,
    marker: i32,
    weight: impl Fn(&Vec2) -> f64,
) -> Result<CsrMatrix> {
    check_marker(space, marker)?;
    let n = space.local_dofs();
    Ok(assemble_boundary_matrix(space, rule, Some(marker), |qp, local| {
        let w = weight(&qp.x) * qp.weight;
        for a in 0..n {
            for b in 0..n {
                local[a * n + b] += w * qp.phi[a] * qp.phi[b];
            }
        }
    }))
}

/// `∫ f φ_i`.
pub fn assemble_load(space: &FeSpace, rule: &TriangleRule, f: impl Fn(&Vec2) -> f64) -> Vec<f64> {
    assemble_vector(space, rule, |qp, local| {
        let v = f(&qp.x) * qp.weight;
        for (l, p) in local.iter_mut().zip(qp.phi) {
            *l += v * p;
        }
    })
}

/// `∫_{∂Ω, marker} g φ_i`.
pub fn assemble_boundary_load(
    space: &FeSpace,
    rule: &EdgeRule,
    marker: i32,
    g: impl Fn(&Vec2) -> f64,
) -> Result<Vec<f64>> {
    check_marker(space, marker)?;
    Ok(assemble_boundary_vector(space, rule, Some(marker), |qp, local| {
        let v = g(&qp.x) * qp.weight;
        for (l, p) in local.iter_mut().zip(qp.phi) {
            *l += v * p;
        }
    }))
}

/// Prescribes `value` at every dof on boundary edges carrying `marker`.
pub fn apply_dirichlet(
    system: &mut LinearSystem,
    space: &FeSpace,
    marker: i32,
    value: impl Fn(&Vec2) -> f64,
) -> Result<()> {
    let dofs = space.boundary_dofs(marker)?;
    let coords = space.dof_coords();
    let pairs: Vec<_> = dofs.iter().map(|&d| (d, value(&coords[d]))).collect();
    system.constrain(&pairs);
    Ok(())
}

/// `‖v‖_{L²}` of a finite element function.
pub fn l2_norm(space: &FeSpace, rule: &TriangleRule, v: &ScalarField) -> f64 {
    integrate(space, rule, |qp| qp.value(&v.coeffs).powi(2)).sqrt()
}

/// `‖v − f‖_{L²}` against an analytic function.
pub fn l2_error(space: &FeSpace, rule: &TriangleRule, v: &ScalarField, f: impl Fn(&Vec2) -> f64) -> f64 {
    integrate(space, rule, |qp| (qp.value(&v.coeffs) - f(&qp.x)).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::Order;
    use crate::fem::sparse::dot;
    use crate::mesh::Mesh;

    fn rule() -> TriangleRule {
        TriangleRule::of_degree(4)
    }

    #[test]
    fn reference_element_stiffness() {
        let nodes = vec![Vec2::xy(0.0, 0.0), Vec2::xy(1.0, 0.0), Vec2::xy(0.0, 1.0)];
        let boundary = (0..3).map(|k| crate::mesh::BoundaryEdge { nodes: [k, (k + 1) % 3], marker: 1 }).collect();
        let m = Mesh::new(nodes, vec![[0, 1, 2]], boundary).unwrap();
        let space = FeSpace::new(m, Order::P1);
        let k = assemble_diffusion(&space, &rule(), |_| Mat2::identity());
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k.get(i, j) - expected[i][j]).abs() < 1e-15);
            }
        }
        let k2 = assemble_diffusion(&space, &rule(), |_| Mat2::identity() * 2.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k2.get(i, j), 2.0 * k.get(i, j));
            }
        }
    }

    #[test]
    fn constants_are_in_the_kernel_and_mass_integrates_area() {
        let m = Mesh::disk(Vec2::zero(), 1.0, 2).unwrap();
        for order in [Order::P1, Order::P2] {
            let space = FeSpace::new(m.clone(), order);
            let ones = vec![1.0; space.dof_count()];
            let k = assemble_diffusion(&space, &rule(), |_| Mat2::new([[2.0, 0.3], [0.3, 1.0]]));
            assert!(k.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
            let mass = assemble_mass(&space, &rule(), |_| 1.0);
            assert!((mass.bilinear(&ones, &ones) - m.area()).abs() < 1e-12);
            let load = assemble_load(&space, &rule(), |_| 1.0);
            assert!((load.iter().sum::<f64>() - m.area()).abs() < 1e-12);
            let zero = assemble_mass(&space, &rule(), |_| 0.0);
            assert_eq!(zero.bilinear(&ones, &ones), 0.0);
        }
    }

    #[test]
    fn boundary_mass_measures_perimeter() {
        let m = Mesh::rectangle(0.0, 0.0, 1.0, 1.0, 3, 3).unwrap();
        let space = FeSpace::new(m, Order::P1);
        let ones = vec![1.0; space.dof_count()];
        let b = assemble_boundary_mass(&space, &EdgeRule::standard(), 1, |_| 1.0).unwrap();
        assert!((b.bilinear(&ones, &ones) - 4.0).abs() < 1e-14);
        assert!(assemble_boundary_mass(&space, &EdgeRule::standard(), 9, |_| 1.0).is_err());
        let g = assemble_boundary_load(&space, &EdgeRule::standard(), 1, |x| x.x()).unwrap();
        // ∮ x ds over the unit square = 1/2 + 1 + 1/2 + 0.
        assert!((g.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn load_of_linear_function() {
        let m = Mesh::rectangle(0.0, 0.0, 1.0, 1.0, 4, 4).unwrap();
        let space = FeSpace::new(m, Order::P1);
        let f = assemble_load(&space, &rule(), |x| x.x());
        assert!((f.iter().sum::<f64>() - 0.5).abs() < 1e-14);
        assert!(assemble_load(&space, &rule(), |_| 0.0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn patch_test_reproduces_linear_solution() {
        let m = Mesh::disk(Vec2::xy(0.2, 0.1), 1.3, 3).unwrap();
        for order in [Order::P1, Order::P2] {
            let space = FeSpace::new(m.clone(), order);
            let k = assemble_diffusion(&space, &rule(), |_| Mat2::identity());
            let mut sys = LinearSystem::new(k, vec![0.0; space.dof_count()], true).unwrap();
            let exact = |x: &Vec2| 0.5 + x.x() - 2.0 * x.y();
            apply_dirichlet(&mut sys, &space, 1, exact).unwrap();
            let u = sys.solve().unwrap();
            for (d, x) in space.dof_coords().iter().enumerate() {
                assert!((u[d] - exact(x)).abs() < 1e-12);
            }
        }
    }

    fn poisson_error(order: Order, n: usize) -> f64 {
        use std::f64::consts::PI;
        let m = Mesh::rectangle(0.0, 0.0, 1.0, 1.0, n, n).unwrap();
        let space = FeSpace::new(m, order);
        let r = TriangleRule::of_degree(6);
        let k = assemble_diffusion(&space, &r, |_| Mat2::identity());
        let f = assemble_load(&space, &r, |x| 2.0 * PI * PI * (PI * x.x()).sin() * (PI * x.y()).sin());
        let mut sys = LinearSystem::new(k, f, true).unwrap();
        apply_dirichlet(&mut sys, &space, 1, |_| 0.0).unwrap();
        let u = ScalarField::from(sys.solve().unwrap());
        l2_error(&space, &r, &u, |x| (PI * x.x()).sin() * (PI * x.y()).sin())
    }

    #[test]
    fn manufactured_poisson_convergence_orders() {
        for (order, min) in [(Order::P1, 1.9), (Order::P2, 2.9)] {
            let e: Vec<f64> = [4, 8, 16].iter().map(|&n| poisson_error(order, n)).collect();
            for w in e.windows(2) {
                let rate = (w[0] / w[1]).log2();
                assert!(rate >= min, "{order:?}: rate {rate} from {e:?}");
            }
        }
    }

    #[test]
    fn boundary_points_follow_edges() {
        let m = Mesh::disk(Vec2::zero(), 1.0, 1).unwrap();
        let space = FeSpace::new(m.clone(), Order::P2);
        let mut count = 0;
        for_each_boundary_qp(&space, &EdgeRule::standard(), None, |qp| {
            let [i, j] = m.boundary_edges()[qp.edge].nodes;
            let (a, b) = (m.nodes()[i], m.nodes()[j]);
            assert!((qp.x - a).cross(&(b - a)).abs() < 1e-14);
            assert!(dot(&[qp.normal.dot(&(b - a))], &[1.0]).abs() < 1e-14);
            count += 1;
        });
        assert_eq!(count, 3 * m.boundary_edges().len());
    }
}
