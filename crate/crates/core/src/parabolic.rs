//! Linear parabolic problem `∂_t u − div(M∇u) = f`, `u = 0` on ∂Ω, `u(0) = g`,
//! discretized by implicit Euler in time and Lagrange elements in space.
//!
//! The fully discrete scheme is a block lower-bidiagonal system `A U = b` for
//! `U = (u_0, …, u_nt)`:
//!
//! ```text
//! row 0:  Mass u_0                         = ∫ g φ
//! row k:  (Mass + Δt K_k) u_k − Mass u_{k−1} = Δt ∫ f(t_k) φ
//! ```
//!
//! Both the adjoint and the material derivative are obtained from this exact
//! operator (its transpose and itself), so the duality identity holds to
//! solver precision. The initial row is the L² projection of `g`.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{ScalarData, TimeMatrix, TimeScalar};
use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_diffusion, assemble_load, assemble_vector, integrate, Qp};
use crate::fem::sparse::{dot, CsrMatrix, Factorization, LinearSystem};
use crate::fem::{Discretization, Order};
use crate::flow::m_prime0_from_jac;
use crate::mesh::{Mesh, Neumaier};
use crate::problem::{weighted_mass_norm, Analysis, DualityReport, ShapeProblem};
use crate::shape::{assemble_dj, DjBreakdown, PointTensors, ShapeTensors, Velocity};
use crate::tensor::{outer, Mat2, Ten2, Vec2};

pub const VOLUME_DEGREE: usize = 4;
pub const DEFAULT_T0: f64 = 1.0;
pub const DEFAULT_NT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParabolicCost {
    /// `½∫₀^{t₀}∫ (u − u_d)²`.
    J1,
    /// `½∫ (u(t₀) − u_d)²`.
    J2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParabolicData {
    pub m: TimeMatrix,
    pub f: TimeScalar,
    pub g: ScalarData,
    /// Evaluated at `t₀` for the terminal cost.
    pub u_d: TimeScalar,
    pub t0: f64,
    pub nt: usize,
}

impl ParabolicData {
    pub fn validate(&self) -> Result<()> {
        if self.nt == 0 {
            return Err(Error::invalid("parabolic problem needs at least one time step"));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::invalid(format!("final time {} must be positive", self.t0)));
        }
        self.m.check_uniform_positivity(self.t0)?;
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t0 / self.nt as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 * k as f64 / self.nt as f64
    }
}

/// Snapshots `u_0, …, u_nt` at `t_k = k t₀ / nt`.
pub type TimeSeries = Vec<Vec<f64>>;

/// The constrained matrices of the space-time operator and their factorizations.
pub struct SpaceTimeOperator {
    mass: CsrMatrix,
    mass_factor: Factorization,
    steps: Vec<CsrMatrix>,
    factors: Vec<Factorization>,
    free: Vec<bool>,
    nt: usize,
}

fn constrain(disc: &Discretization, matrix: CsrMatrix) -> CsrMatrix {
    let mut sys = LinearSystem::new(matrix, vec![0.0; disc.dof_count()], true).expect("square");
    let pairs: Vec<_> = disc.boundary_dofs().into_iter().map(|d| (d, 0.0)).collect();
    sys.constrain(&pairs);
    sys.matrix
}

impl SpaceTimeOperator {
    pub fn new(disc: &Discretization, m: &TimeMatrix, t0: f64, nt: usize) -> Result<Self> {
        let dt = t0 / nt as f64;
        let raw_mass = disc.mass();
        let mass = constrain(disc, raw_mass.clone());
        let mass_factor = Factorization::new(&mass, true)?;
        let levels = if m.is_constant() { 1 } else { nt };
        let built = (1..=levels)
            .into_par_iter()
            .map(|k| {
                let t = t0 * k as f64 / nt as f64;
                let stiffness = assemble_diffusion(&disc.space, &disc.volume, |x| m.value(t, x));
                let s = constrain(disc, raw_mass.add_scaled(&stiffness, dt));
                Factorization::new(&s, true).map(|f| (s, f))
            })
            .collect::<Result<Vec<_>>>()?;
        let (steps, factors) = built.into_iter().unzip();
        let mut free = vec![true; disc.dof_count()];
        for d in disc.boundary_dofs() {
            free[d] = false;
        }
        Ok(SpaceTimeOperator { mass, mass_factor, steps, factors, free, nt })
    }

    fn step(&self, k: usize) -> (&CsrMatrix, &Factorization) {
        let i = if self.steps.len() == 1 { 0 } else { k - 1 };
        (&self.steps[i], &self.factors[i])
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Zeroes constrained entries, mapping a load vector into the free space.
    pub fn restrict(&self, mut v: Vec<f64>) -> Vec<f64> {
        for (x, &f) in v.iter_mut().zip(&self.free) {
            if !f {
                *x = 0.0;
            }
        }
        v
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn apply_forward(&self, v: &[Vec<f64>]) -> TimeSeries {
        let mut out = vec![self.mass.matvec(&v[0])];
        for k in 1..=self.nt {
            let a = self.step(k).0.matvec(&v[k]);
            let b = self.mass.matvec(&v[k - 1]);
            out.push(a.iter().zip(&b).map(|(x, y)| x - y).collect());
        }
        out
    }

    pub fn apply_adjoint(&self, w: &[Vec<f64>]) -> TimeSeries {
        let mut out = Vec::with_capacity(self.nt + 1);
        for k in 0..=self.nt {
            let a = if k == 0 { self.mass.matvec(&w[0]) } else { self.step(k).0.matvec(&w[k]) };
            if k < self.nt {
                let b = self.mass.matvec(&w[k + 1]);
                out.push(a.iter().zip(&b).map(|(x, y)| x - y).collect());
            } else {
                out.push(a);
            }
        }
        out
    }

    /// Solves `A U = b` by marching forward.
    pub fn solve_forward(&self, b: &[Vec<f64>]) -> Result<TimeSeries> {
        let mut u = Vec::with_capacity(self.nt + 1);
        u.push(self.mass_factor.solve_checked(&self.mass, &b[0]).map_err(|e| at_step(e, 0))?);
        for k in 1..=self.nt {
            let mut rhs = self.mass.matvec(&u[k - 1]);
            rhs.iter_mut().zip(&b[k]).for_each(|(r, x)| *r += x);
            let (s, f) = self.step(k);
            u.push(f.solve_checked(s, &rhs).map_err(|e| at_step(e, k))?);
        }
        Ok(u)
    }

    /// Solves `Aᵀ W = b` by marching backward from the last level.
    pub fn solve_adjoint(&self, b: &[Vec<f64>]) -> Result<TimeSeries> {
        let mut w = vec![Vec::new(); self.nt + 1];
        for k in (0..=self.nt).rev() {
            let mut rhs = b[k].clone();
            if k < self.nt {
                let next = self.mass.matvec(&w[k + 1]);
                rhs.iter_mut().zip(&next).for_each(|(r, x)| *r += x);
            }
            w[k] = if k == 0 {
                self.mass_factor.solve_checked(&self.mass, &rhs)
            } else {
                let (s, f) = self.step(k);
                f.solve_checked(s, &rhs)
            }
            .map_err(|e| at_step(e, k))?;
        }
        Ok(w)
    }
}

fn at_step(e: Error, k: usize) -> Error {
    match e {
        Error::SingularSystem(msg) => Error::SingularSystem(format!("time level {k}: {msg}")),
        other => other,
    }
}

/// Pairing of two time series, `Σ_k ⟨a_k, b_k⟩`.
pub fn pair(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut sum = Neumaier::default();
    for (x, y) in a.iter().zip(b) {
        sum.add(dot(x, y));
    }
    sum.total()
}

fn loads(disc: &Discretization, op: &SpaceTimeOperator, data: &ParabolicData) -> TimeSeries {
    let dt = data.dt();
    let mut b = vec![op.restrict(assemble_load(&disc.space, &disc.volume, |x| data.g.value(x)))];
    for k in 1..=data.nt {
        let t = data.time(k);
        let f = assemble_load(&disc.space, &disc.volume, |x| data.f.value(t, x));
        b.push(op.restrict(f.iter().map(|v| v * dt).collect()));
    }
    b
}

pub fn parabolic_solve(disc: &Discretization, data: &ParabolicData) -> Result<TimeSeries> {
    data.validate()?;
    let op = SpaceTimeOperator::new(disc, &data.m, data.t0, data.nt)?;
    op.solve_forward(&loads(disc, &op, data))
}

/// Levels entering the cost, with their weights.
fn cost_levels(data: &ParabolicData, cost: ParabolicCost) -> Vec<(usize, f64)> {
    match cost {
        ParabolicCost::J1 => (1..=data.nt).map(|k| (k, data.dt())).collect(),
        ParabolicCost::J2 => vec![(data.nt, 1.0)],
    }
}

fn target_time(data: &ParabolicData, cost: ParabolicCost, k: usize) -> f64 {
    match cost {
        ParabolicCost::J1 => data.time(k),
        ParabolicCost::J2 => data.t0,
    }
}

pub fn parabolic_cost(disc: &Discretization, data: &ParabolicData, cost: ParabolicCost, u: &[Vec<f64>]) -> f64 {
    let mut sum = Neumaier::default();
    for (k, w) in cost_levels(data, cost) {
        let t = target_time(data, cost, k);
        sum.add(
            w * integrate(&disc.space, &disc.volume, |qp| 0.5 * (qp.value(&u[k]) - data.u_d.value(t, &qp.x)).powi(2)),
        );
    }
    sum.total()
}

/// `∂J/∂u_k` for every level (zero where the cost does not see the level).
pub fn parabolic_cost_gradient(
    disc: &Discretization,
    op: &SpaceTimeOperator,
    data: &ParabolicData,
    cost: ParabolicCost,
    u: &[Vec<f64>],
) -> TimeSeries {
    let mut out = vec![vec![0.0; disc.dof_count()]; data.nt + 1];
    for (k, w) in cost_levels(data, cost) {
        let t = target_time(data, cost, k);
        let v = assemble_vector(&disc.space, &disc.volume, |qp, local| {
            let d = (qp.value(&u[k]) - data.u_d.value(t, &qp.x)) * w * qp.weight;
            for (l, p) in local.iter_mut().zip(qp.phi) {
                *l += d * p;
            }
        });
        out[k] = op.restrict(v);
    }
    out
}

pub fn parabolic_adjoint(
    disc: &Discretization,
    op: &SpaceTimeOperator,
    data: &ParabolicData,
    cost: ParabolicCost,
    u: &[Vec<f64>],
) -> Result<TimeSeries> {
    let rhs: TimeSeries = parabolic_cost_gradient(disc, op, data, cost, u)
        .into_iter()
        .map(|v| v.into_iter().map(|x| -x).collect())
        .collect();
    op.solve_adjoint(&rhs)
}

pub fn parabolic_adjoint_j1(disc: &Discretization, data: &ParabolicData, u: &[Vec<f64>]) -> Result<TimeSeries> {
    let op = SpaceTimeOperator::new(disc, &data.m, data.t0, data.nt)?;
    parabolic_adjoint(disc, &op, data, ParabolicCost::J1, u)
}

pub fn parabolic_adjoint_j2(disc: &Discretization, data: &ParabolicData, u: &[Vec<f64>]) -> Result<TimeSeries> {
    let op = SpaceTimeOperator::new(disc, &data.m, data.t0, data.nt)?;
    parabolic_adjoint(disc, &op, data, ParabolicCost::J2, u)
}

fn diffusion_rate(data: &ParabolicData, t: f64, x: &Vec2, jac: &Mat2, theta: &Vec2) -> Mat2 {
    m_prime0_from_jac(jac, &data.m.value(t, x)) + data.m.spatial_derivative(t, x).matvec3(theta)
}

/// The rows `⟨L(u), ψ⟩` of the material-derivative system, one per level.
pub fn parabolic_l_vectors(
    disc: &Discretization,
    op: &SpaceTimeOperator,
    data: &ParabolicData,
    u: &[Vec<f64>],
    velocity: &dyn Velocity,
) -> TimeSeries {
    let dt = data.dt();
    let mut out = Vec::with_capacity(data.nt + 1);
    let l0 = assemble_vector(&disc.space, &disc.volume, |qp, local| {
        let k = velocity.at(qp.elem, &qp.bary, &qp.x);
        let div = k.div();
        let c = (qp.value(&u[0]) * div - data.g.grad(&qp.x).dot(&k.theta) - data.g.value(&qp.x) * div) * qp.weight;
        for (l, p) in local.iter_mut().zip(qp.phi) {
            *l += c * p;
        }
    });
    out.push(op.restrict(l0));
    for level in 1..=data.nt {
        let t = data.time(level);
        let lk = assemble_vector(&disc.space, &disc.volume, |qp, local| {
            let k = velocity.at(qp.elem, &qp.bary, &qp.x);
            let div = k.div();
            let du = qp.value(&u[level]) - qp.value(&u[level - 1]);
            let flux =
                diffusion_rate(data, t, &qp.x, &k.jac, &k.theta).matvec(&qp.gradient(&u[level])) * (dt * qp.weight);
            let src =
                (du * div - dt * (data.f.grad(t, &qp.x).dot(&k.theta) + data.f.value(t, &qp.x) * div)) * qp.weight;
            for a in 0..local.len() {
                local[a] += flux.dot(&qp.grad[a]) + src * qp.phi[a];
            }
        });
        out.push(op.restrict(lk));
    }
    out
}

/// `∂_s` of the cost at fixed state.
pub fn parabolic_cost_rate(
    disc: &Discretization,
    data: &ParabolicData,
    cost: ParabolicCost,
    u: &[Vec<f64>],
    velocity: &dyn Velocity,
) -> f64 {
    let mut sum = Neumaier::default();
    for (level, w) in cost_levels(data, cost) {
        let t = target_time(data, cost, level);
        sum.add(
            w * integrate(&disc.space, &disc.volume, |qp| {
                let k = velocity.at(qp.elem, &qp.bary, &qp.x);
                let d = qp.value(&u[level]) - data.u_d.value(t, &qp.x);
                0.5 * d * d * k.div() - d * data.u_d.grad(t, &qp.x).dot(&k.theta)
            }),
        );
    }
    sum.total()
}

pub fn parabolic_material(
    disc: &Discretization,
    data: &ParabolicData,
    u: &[Vec<f64>],
    velocity: &dyn Velocity,
) -> Result<TimeSeries> {
    let op = SpaceTimeOperator::new(disc, &data.m, data.t0, data.nt)?;
    let rhs: TimeSeries = parabolic_l_vectors(disc, &op, data, u, velocity)
        .into_iter()
        .map(|v| v.into_iter().map(|x| -x).collect())
        .collect();
    op.solve_forward(&rhs)
}

/// `p` at the quadrature point for level `k`, where level 0 carries the multiplier `q` of the initial row.
fn level_values(qp: &Qp, series: &[Vec<f64>], k: usize) -> (f64, Vec2) {
    (qp.value(&series[k]), qp.gradient(&series[k]))
}

/// Volume tensors, with time integrals as right-endpoint sums matching implicit Euler.
pub fn parabolic_shape_tensors(
    disc: &Discretization,
    data: &ParabolicData,
    cost: ParabolicCost,
    u: &[Vec<f64>],
    p: &[Vec<f64>],
) -> ShapeTensors {
    let dt = data.dt();
    let id = Mat2::identity();
    let levels = cost_levels(data, cost);
    ShapeTensors::volume(&disc.space, &disc.volume, false, |qp| {
        let (q, _) = level_values(qp, p, 0);
        let mut s0 = data.g.grad(&qp.x) * -q;
        let mut s1 = Mat2::zero();
        for k in 1..=data.nt {
            let t = data.time(k);
            let gu = qp.gradient(&u[k]);
            let (pk, gp) = level_values(qp, p, k);
            let m = data.m.value(t, &qp.x);
            let dm = data.m.spatial_derivative(t, &qp.x);
            let mgu = m.matvec(&gu);
            let mgp = m.matvec(&gp);
            let f = data.f.value(t, &qp.x);
            s0 += (dm.transpose3().transpose3().apply3(&gp, &gu) - data.f.grad(t, &qp.x) * pk) * dt;
            s1 += (-outer(&gp, &mgu) - outer(&gu, &mgp) + id * (mgu.dot(&gp) - pk * f)) * dt;
        }
        for &(k, w) in &levels {
            let t = target_time(data, cost, k);
            let d = qp.value(&u[k]) - data.u_d.value(t, &qp.x);
            s0 -= data.u_d.grad(t, &qp.x) * (w * d);
            s1 += id * (w * 0.5 * d * d);
        }
        PointTensors { s0, s1, s2: Ten2::zero() }
    })
}

/// `Σ_k ∫ (u_k − u_{k−1}) p_k div θ`, the discrete `∫₀^{t₀}⟨∂_t u, div(θ) p⟩`.
pub fn dt_pairing_term(disc: &Discretization, u: &[Vec<f64>], p: &[Vec<f64>], velocity: &dyn Velocity) -> f64 {
    integrate(&disc.space, &disc.volume, |qp| {
        let div = velocity.at(qp.elem, &qp.bary, &qp.x).div();
        let mut s = 0.0;
        for k in 1..u.len() {
            s += (qp.value(&u[k]) - qp.value(&u[k - 1])) * qp.value(&p[k]);
        }
        s * div
    })
}

/// `∫ (u_0 − g) q div θ`, which vanishes in the continuous setting where `u(0) = g`.
pub fn initial_residual_term(
    disc: &Discretization,
    data: &ParabolicData,
    u: &[Vec<f64>],
    p: &[Vec<f64>],
    velocity: &dyn Velocity,
) -> f64 {
    integrate(&disc.space, &disc.volume, |qp| {
        let div = velocity.at(qp.elem, &qp.bary, &qp.x).div();
        (qp.value(&u[0]) - data.g.value(&qp.x)) * qp.value(&p[0]) * div
    })
}

pub struct ParabolicProblem {
    disc: Discretization,
    data: ParabolicData,
    cost: ParabolicCost,
    op: SpaceTimeOperator,
    pub u: TimeSeries,
    pub p: TimeSeries,
}

impl ParabolicProblem {
    pub fn new(mesh: Mesh, order: Order, data: ParabolicData, cost: ParabolicCost) -> Result<Self> {
        data.validate()?;
        let disc = Discretization::new(mesh, order, VOLUME_DEGREE);
        let op = SpaceTimeOperator::new(&disc, &data.m, data.t0, data.nt)?;
        let u = op.solve_forward(&loads(&disc, &op, &data))?;
        let p = parabolic_adjoint(&disc, &op, &data, cost, &u)?;
        Ok(ParabolicProblem { disc, data, cost, op, u, p })
    }

    pub fn operator(&self) -> &SpaceTimeOperator {
        &self.op
    }

    pub fn data(&self) -> &ParabolicData {
        &self.data
    }

    pub fn tensors(&self) -> ShapeTensors {
        parabolic_shape_tensors(&self.disc, &self.data, self.cost, &self.u, &self.p)
    }

    pub fn cost_value(&self) -> f64 {
        parabolic_cost(&self.disc, &self.data, self.cost, &self.u)
    }

    pub fn breakdown(&self, velocity: &dyn Velocity) -> DjBreakdown {
        let mut dj = assemble_dj(&self.tensors(), velocity);
        dj.dt_pairing = dt_pairing_term(&self.disc, &self.u, &self.p, velocity);
        dj.initial_residual = initial_residual_term(&self.disc, &self.data, &self.u, &self.p, velocity);
        dj
    }
}

impl ShapeProblem for ParabolicProblem {
    fn id(&self) -> &'static str {
        match self.cost {
            ParabolicCost::J1 => "parabolic_j1",
            ParabolicCost::J2 => "parabolic_j2",
        }
    }

    fn discretization(&self) -> &Discretization {
        &self.disc
    }

    fn cost_on(&self, mesh: &Mesh) -> Result<f64> {
        let disc = self.disc.on_mesh(mesh.clone());
        let u = parabolic_solve(&disc, &self.data)?;
        Ok(parabolic_cost(&disc, &self.data, self.cost, &u))
    }

    fn state_on(&self, mesh: &Mesh) -> Result<Option<Vec<Vec<f64>>>> {
        let disc = self.disc.on_mesh(mesh.clone());
        Ok(Some(parabolic_solve(&disc, &self.data)?))
    }

    fn state_norm(&self, snapshots: &[Vec<f64>]) -> f64 {
        let weights = vec![self.data.dt(); snapshots.len()];
        weighted_mass_norm(self.op.mass(), snapshots, &weights)
    }

    fn solution_fields(&self) -> Vec<(String, Vec<f64>)> {
        let u = self.u.iter().enumerate().map(|(k, v)| (format!("u_{k:04}"), v.clone()));
        let p = self.p.iter().enumerate().map(|(k, v)| (format!("p_{k:04}"), v.clone()));
        u.chain(p).collect()
    }

    fn analyze(&self, velocity: &dyn Velocity) -> Result<Analysis> {
        let l = parabolic_l_vectors(&self.disc, &self.op, &self.data, &self.u, velocity);
        let rhs: TimeSeries = l.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
        let udot = self.op.solve_forward(&rhs)?;
        let lp = pair(&l, &self.p);
        let grad = parabolic_cost_gradient(&self.disc, &self.op, &self.data, self.cost, &self.u);
        let bu = pair(&grad, &udot);
        let raw = lp + parabolic_cost_rate(&self.disc, &self.data, self.cost, &self.u, velocity);
        Ok(Analysis {
            dj: self.breakdown(velocity),
            raw,
            duality: Some(DualityReport::new(lp, bu)),
            material: Some(udot),
        })
    }
}
