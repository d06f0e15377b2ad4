//! Shape tensors of the two second-order examples evaluated on analytic
//! (manufactured) states, together with the un-tensorized derivative
//! expressions they must reproduce.
//!
//! Example one: cost `∫ 𝓕(x, u)` with `𝓕(x, r) = (r − u_d(x))²`, a state `u`,
//! adjoint `p` and a datum `h` entering through the right-hand side.
//! Example two: cost `½∫|D²u|²` with `−Δu = f`; here `f := −Δu` is built from `u`.

use crate::data::ScalarData;
use crate::error::Result;
use crate::fem::assembly::{integrate, integrate_boundary};
use crate::fem::{EdgeRule, FeSpace, TriangleRule};
use crate::flow::{advect, VectorField};
use crate::mesh::Neumaier;
use crate::shape::{BoundaryJacobian, BoundaryTensors, PointTensors, ShapeTensors, Velocity};
use crate::tensor::{outer, outer_vm, transported_hessian_rate, transported_laplacian_rate, Mat2, Ten2, Vec2};

#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedFields {
    pub u: ScalarData,
    pub p: ScalarData,
    pub h: ScalarData,
    pub u_d: ScalarData,
}

impl ManufacturedFields {
    /// `u = (1 − |x|²)/4`, `p = −2u`, `h` and `u_d` quadratic.
    pub fn default_disk() -> Self {
        ManufacturedFields {
            u: ScalarData::Poly2([0.25, 0.0, 0.0, -0.25, 0.0, -0.25]),
            p: ScalarData::Poly2([-0.5, 0.0, 0.0, 0.5, 0.0, 0.5]),
            h: ScalarData::Poly2([0.1, 0.2, -0.1, 0.3, 0.1, -0.2]),
            u_d: ScalarData::Poly2([0.05, -0.1, 0.1, 0.0, 0.2, 0.1]),
        }
    }

    /// `𝓕(x, r)`, `∂_r𝓕`, `∇_x𝓕`.
    pub fn cost_density(&self, x: &Vec2, r: f64) -> (f64, f64, Vec2) {
        let d = r - self.u_d.value(x);
        (d * d, 2.0 * d, self.u_d.grad(x) * (-2.0 * d))
    }
}

struct Local {
    u: f64,
    gu: Vec2,
    hu: Mat2,
    p: f64,
    gp: Vec2,
    hp: Mat2,
    h: f64,
    gh: Vec2,
}

fn local(fields: &ManufacturedFields, x: &Vec2) -> Local {
    Local {
        u: fields.u.value(x),
        gu: fields.u.grad(x),
        hu: fields.u.hess(x),
        p: fields.p.value(x),
        gp: fields.p.grad(x),
        hp: fields.p.hess(x),
        h: fields.h.value(x),
        gh: fields.h.grad(x),
    }
}

pub fn prop5_tensors(
    fields: &ManufacturedFields,
    space: &FeSpace,
    rule: &TriangleRule,
    edge: &EdgeRule,
) -> ShapeTensors {
    let id = Mat2::identity();
    ShapeTensors::volume(space, rule, true, |qp| {
        let l = local(fields, &qp.x);
        let (cost, _, grad_x) = fields.cost_density(&qp.x, l.u);
        let lap_p = l.hp.trace();
        PointTensors {
            s0: grad_x + l.gh * (lap_p - l.p),
            s1: l.hp * (2.0 * (l.u - l.h)) + id * (l.h * (lap_p - l.p) - l.u * lap_p + cost),
            s2: outer_vm(&(l.gp * (l.u - l.h)), &id),
        }
    })
    .with_boundary(space, edge, BoundaryJacobian::Full, |qp| {
        let dn_p = fields.p.grad(&qp.x).dot(&qp.normal);
        let h = fields.h.value(&qp.x);
        BoundaryTensors {
            s0: fields.h.grad(&qp.x) * -dn_p,
            s1: (id - outer(&qp.normal, &qp.normal) * 2.0) * (-h * dn_p),
        }
    })
}

/// The derivative of example one before tensorization, at the same quadrature points.
pub fn prop5_raw(
    fields: &ManufacturedFields,
    space: &FeSpace,
    rule: &TriangleRule,
    edge: &EdgeRule,
    velocity: &dyn Velocity,
) -> Result<f64> {
    let mut err = None;
    let volume = integrate(space, rule, |qp| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let l = local(fields, &qp.x);
        let (cost, _, grad_x) = fields.cost_density(&qp.x, l.u);
        let lap_p = l.hp.trace();
        let div = k.div();
        let rate = transported_laplacian_rate(&l.gp, &l.hp, &k.jac, &k.hess).unwrap_or_else(|e| {
            err.get_or_insert(e);
            0.0
        });
        (l.h - l.u) * rate - l.u * lap_p * div - (-lap_p + l.p) * (l.gh.dot(&k.theta) + l.h * div)
            + grad_x.dot(&k.theta)
            + cost * div
    });
    if let Some(e) = err {
        return Err(e);
    }
    let boundary = integrate_boundary(space, edge, None, |qp| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let n = qp.normal;
        let dn_p = fields.p.grad(&qp.x).dot(&n);
        let n_dtheta_n = k.jac.matvec(&n).dot(&n);
        let div_gamma = k.div() - n_dtheta_n;
        -(dn_p * fields.h.grad(&qp.x).dot(&k.theta) + fields.h.value(&qp.x) * dn_p * (div_gamma - n_dtheta_n))
    });
    Ok(volume + boundary)
}

pub fn prop6_tensors(fields: &ManufacturedFields, space: &FeSpace, rule: &TriangleRule) -> ShapeTensors {
    let id = Mat2::identity();
    ShapeTensors::volume(space, rule, true, |qp| {
        let l = local(fields, &qp.x);
        let grad_f = fields.u.laplacian_grad(&qp.x) * -1.0;
        PointTensors {
            s0: grad_f * -l.p,
            s1: l.hu * (2.0 * l.p) - l.hu.matmul(&l.hu) * 2.0 + id * (0.5 * l.hu.double_dot(&l.hu)),
            s2: outer_vm(&l.gu, &l.hu) * -1.0 + outer_vm(&(l.gu * l.p), &id),
        }
    })
}

/// The derivative of example two before tensorization, including the pair of
/// terms that cancel because `f = −Δu`.
pub fn prop6_raw(
    fields: &ManufacturedFields,
    space: &FeSpace,
    rule: &TriangleRule,
    velocity: &dyn Velocity,
) -> Result<f64> {
    let mut err = None;
    let value = integrate(space, rule, |qp| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let l = local(fields, &qp.x);
        let lap_u = l.hu.trace();
        let f = -lap_u;
        let grad_f = fields.u.laplacian_grad(&qp.x) * -1.0;
        let div = k.div();
        let rates = transported_laplacian_rate(&l.gu, &l.hu, &k.jac, &k.hess)
            .and_then(|lap| transported_hessian_rate(&l.gu, &l.hu, &k.jac, &k.hess).map(|hess| (lap, hess)));
        let (lap_rate, hess_rate) = match rates {
            Ok(r) => r,
            Err(e) => {
                err.get_or_insert(e);
                return 0.0;
            }
        };
        l.p * -lap_rate - l.p * lap_u * div - l.p * f * div - l.p * grad_f.dot(&k.theta)
            + hess_rate.double_dot(&l.hu)
            + 0.5 * l.hu.double_dot(&l.hu) * div
    });
    match err {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// `∫ ∇_x𝓕(x, u)·θ + 𝓕(x, u) div θ`, the `s = 0` derivative of the transported cost.
pub fn cost_transport_derivative(
    fields: &ManufacturedFields,
    space: &FeSpace,
    rule: &TriangleRule,
    velocity: &dyn Velocity,
) -> f64 {
    if velocity.is_zero() {
        return 0.0;
    }
    integrate(space, rule, |qp| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let (cost, _, grad_x) = fields.cost_density(&qp.x, fields.u.value(&qp.x));
        grad_x.dot(&k.theta) + cost * k.div()
    })
}

/// `∫_Ω 𝓕(T_s(x), u(x)) ξ(s)` with the flow integrated at every quadrature point.
pub fn transported_cost(
    fields: &ManufacturedFields,
    space: &FeSpace,
    rule: &TriangleRule,
    theta: &VectorField,
    s: f64,
    steps: usize,
) -> Result<f64> {
    let mut sum = Neumaier::default();
    let mut err = None;
    crate::fem::assembly::for_each_qp(space, rule, |qp| {
        if err.is_some() {
            return;
        }
        match advect(theta, s, qp.x, steps) {
            Ok(state) => {
                let (cost, _, _) = fields.cost_density(&state.position, fields.u.value(&qp.x));
                sum.add(qp.weight * cost * state.jacobian.det());
            }
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(sum.total()),
    }
}

/// Tensors that are identically zero, for problems whose representation lacks a part.
pub fn zero_point() -> PointTensors {
    PointTensors { s0: Vec2::zero(), s1: Mat2::zero(), s2: Ten2::zero() }
}
