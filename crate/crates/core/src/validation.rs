//! Independent checks of assembled shape derivatives: finite differences on
//! transported meshes, Taylor remainders of the material derivative, the
//! adjoint/material duality and least-squares order estimates.
//!
//! Rows for different `s` are computed in parallel and collected in input order,
//! so every table is bit-reproducible.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{FeSpace, TriangleRule};
use crate::flow::{transport_mesh, VectorField};
use crate::problem::{Analysis, DualityReport, ShapeProblem};
use crate::shape::manufactured::{cost_transport_derivative, transported_cost, ManufacturedFields};
use crate::shape::MeshVelocity;

/// Below this, a derivative and all its quotients count as exactly zero.
pub const DEGENERATE_ZERO: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

/// One named pass/fail comparison against a threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub bound: Bound,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: Option<f64>, threshold: f64) -> Self {
        let passed = value.is_some_and(|v| v <= threshold);
        Check { name: name.into(), value, bound: Bound::AtMost, threshold, passed }
    }

    pub fn at_least(name: impl Into<String>, value: Option<f64>, threshold: f64) -> Self {
        let passed = value.is_some_and(|v| v >= threshold);
        Check { name: name.into(), value, bound: Bound::AtLeast, threshold, passed }
    }

    fn waived(mut self) -> Self {
        self.passed = true;
        self
    }
}

pub fn check_s_list(s_list: &[f64]) -> Result<()> {
    if s_list.len() < 2 {
        return Err(Error::invalid("s_list needs at least two step sizes"));
    }
    if s_list.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid(format!("s_list entries must be positive, got {s_list:?}")));
    }
    if s_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid(format!("s_list must be strictly decreasing, got {s_list:?}")));
    }
    Ok(())
}

fn order_between(e0: f64, e1: f64, s0: f64, s1: f64) -> Option<f64> {
    let r = (e0 / e1).ln() / (s0 / s1).ln();
    (e0 > 0.0 && e1 > 0.0 && r.is_finite()).then_some(r)
}

fn orders(errors: &[Option<f64>], s: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for k in 1..errors.len() {
        out.push(match (errors[k - 1], errors[k]) {
            (Some(a), Some(b)) => order_between(a, b, s[k - 1], s[k]),
            _ => None,
        });
    }
    out
}

fn min_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut any_missing = false;
    let mut min = f64::INFINITY;
    let mut count = 0;
    for v in values {
        match v {
            Some(v) => {
                min = min.min(v);
                count += 1;
            }
            None => any_missing = true,
        }
    }
    (!any_missing && count > 0).then_some(min)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdRow {
    pub s: f64,
    pub j_plus: Option<f64>,
    pub j_minus: Option<f64>,
    pub central: Option<f64>,
    pub forward: Option<f64>,
    pub central_error: Option<f64>,
    pub forward_error: Option<f64>,
    /// `log(e_{k−1}/e_k) / log(s_{k−1}/s_k)`, undefined on the first row.
    pub central_order: Option<f64>,
    pub forward_order: Option<f64>,
    /// Why the row could not be evaluated, e.g. an inverted triangle.
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdTable {
    pub problem: String,
    pub theta: String,
    pub mesh_hash: String,
    pub dofs: usize,
    pub j0: f64,
    /// Derivative the quotients are compared against.
    pub dj: f64,
    pub rows: Vec<FdRow>,
    /// Polynomial extrapolation of the central quotients in `s²` to `s = 0`.
    pub extrapolated: Option<f64>,
    pub extrapolated_gap: Option<f64>,
}

/// Thresholds applied to an [`FdTable`]; absent entries are not checked.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdCriteria {
    pub min_central_order: Option<f64>,
    pub min_forward_order: Option<f64>,
    pub max_relative_gap: Option<f64>,
    pub max_extrapolated_gap: Option<f64>,
}

/// Neville extrapolation of `q(s)` to `s = 0`, assuming an expansion in even powers of `s`.
fn extrapolate_even(s: &[f64], q: &[f64]) -> f64 {
    let x: Vec<f64> = s.iter().map(|s| s * s).collect();
    let mut p = q.to_vec();
    for m in 1..p.len() {
        for i in 0..p.len() - m {
            p[i] = (x[i] * p[i + 1] - x[i + m] * p[i]) / (x[i] - x[i + m]);
        }
    }
    p[0]
}

impl FdTable {
    /// Builds the table from a cost map `s ↦ J(Ω_s)`; flow failures flag the row.
    pub fn build(
        labels: (&str, &str, &str, usize),
        j0: f64,
        dj: f64,
        s_list: &[f64],
        cost: impl Fn(f64) -> Result<f64> + Sync,
    ) -> Result<FdTable> {
        check_s_list(s_list)?;
        let evals: Vec<(Result<f64>, Result<f64>)> = s_list.par_iter().map(|&s| (cost(s), cost(-s))).collect();
        let mut rows = Vec::with_capacity(s_list.len());
        for (&s, (plus, minus)) in s_list.iter().zip(evals) {
            let mut flag = None;
            let mut keep = |r: Result<f64>| match r {
                Ok(v) => Ok(Some(v)),
                Err(e @ Error::FlowDegenerate { .. }) | Err(e @ Error::MeshValidation(_)) => {
                    flag.get_or_insert(e.to_string());
                    Ok(None)
                }
                Err(e) => Err(e),
            };
            let j_plus = keep(plus)?;
            let j_minus = keep(minus)?;
            let central = j_plus.zip(j_minus).map(|(p, m)| (p - m) / (2.0 * s));
            let forward = j_plus.map(|p| (p - j0) / s);
            rows.push(FdRow {
                s,
                j_plus,
                j_minus,
                central,
                forward,
                central_error: central.map(|q| (q - dj).abs()),
                forward_error: forward.map(|q| (q - dj).abs()),
                central_order: None,
                forward_order: None,
                flag,
            });
        }
        let ce: Vec<_> = rows.iter().map(|r| r.central_error).collect();
        let fe: Vec<_> = rows.iter().map(|r| r.forward_error).collect();
        for (r, (c, f)) in rows.iter_mut().zip(orders(&ce, s_list).into_iter().zip(orders(&fe, s_list))) {
            r.central_order = c;
            r.forward_order = f;
        }
        let quotients: Option<Vec<f64>> = rows.iter().map(|r| r.central).collect();
        let extrapolated = quotients.map(|q| extrapolate_even(s_list, &q));
        let (problem, theta, mesh_hash, dofs) = labels;
        Ok(FdTable {
            problem: problem.to_string(),
            theta: theta.to_string(),
            mesh_hash: mesh_hash.to_string(),
            dofs,
            j0,
            dj,
            rows,
            extrapolated,
            extrapolated_gap: extrapolated.map(|e| (e - dj).abs()),
        })
    }

    /// `dJ` and every quotient vanish to [`DEGENERATE_ZERO`], so orders carry no information.
    pub fn is_degenerate(&self) -> bool {
        self.dj.abs() <= DEGENERATE_ZERO
            && self.rows.iter().all(|r| {
                r.central.is_some_and(|q| q.abs() <= DEGENERATE_ZERO)
                    && r.forward.is_some_and(|q| q.abs() <= DEGENERATE_ZERO)
            })
    }

    pub fn min_central_order(&self) -> Option<f64> {
        min_defined(self.rows.iter().skip(1).map(|r| r.central_order))
    }

    pub fn min_forward_order(&self) -> Option<f64> {
        min_defined(self.rows.iter().skip(1).map(|r| r.forward_order))
    }

    /// `|central − dJ| / |dJ|` at the smallest `s`.
    pub fn relative_gap(&self) -> Option<f64> {
        let last = self.rows.last()?;
        last.central_error.map(|e| if e == 0.0 { 0.0 } else { e / self.dj.abs() })
    }

    pub fn assess(&self, criteria: &FdCriteria) -> Vec<Check> {
        let degenerate = self.is_degenerate();
        let mut checks = Vec::new();
        if let Some(t) = criteria.min_central_order {
            checks.push(Check::at_least("fd_central_order", self.min_central_order(), t));
        }
        if let Some(t) = criteria.min_forward_order {
            checks.push(Check::at_least("fd_forward_order", self.min_forward_order(), t));
        }
        if let Some(t) = criteria.max_relative_gap {
            checks.push(Check::at_most("fd_relative_gap", self.relative_gap(), t));
        }
        if let Some(t) = criteria.max_extrapolated_gap {
            checks.push(Check::at_most("fd_extrapolated_gap", self.extrapolated_gap, t));
        }
        if degenerate {
            checks = checks.into_iter().map(Check::waived).collect();
        }
        checks
    }

    /// Per-row verdicts: orders are judged on the rows that define them, the
    /// relative gap on the smallest `s` only.
    pub fn row_status(&self, criteria: &FdCriteria) -> Vec<bool> {
        if self.is_degenerate() {
            return vec![true; self.rows.len()];
        }
        let last = self.rows.len().saturating_sub(1);
        self.rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let order_ok = |o: Option<f64>, t: Option<f64>| match t {
                    Some(t) if k > 0 => o.is_some_and(|o| o >= t),
                    _ => true,
                };
                let gap_ok = match criteria.max_relative_gap {
                    Some(t) if k == last => self.relative_gap().is_some_and(|g| g <= t),
                    _ => true,
                };
                r.flag.is_none()
                    && order_ok(r.central_order, criteria.min_central_order)
                    && order_ok(r.forward_order, criteria.min_forward_order)
                    && gap_ok
            })
            .collect()
    }

    pub fn flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flag.is_some())
    }
}

fn labels<'a>(
    problem: &'a dyn ShapeProblem,
    theta: &'a VectorField,
    hash: &'a str,
) -> (&'a str, &'a str, &'a str, usize) {
    (problem.id(), theta.name(), hash, problem.discretization().dof_count())
}

/// Central and forward quotients of the re-solved cost on `T_{±s}(Ω)` against `dj`.
pub fn fd_table(
    problem: &dyn ShapeProblem,
    theta: &VectorField,
    s_list: &[f64],
    steps: usize,
    dj: f64,
) -> Result<FdTable> {
    let mesh = problem.mesh();
    let j0 = problem.cost_on(mesh)?;
    let hash = mesh.content_hash();
    FdTable::build(labels(problem, theta, &hash), j0, dj, s_list, |s| {
        problem.cost_on(&transport_mesh(mesh, theta, s, steps)?)
    })
}

/// The derivative assembled with the nodal interpolant of `theta`, which is the
/// exact derivative of the discrete cost under node transport.
pub fn analyze_discrete(problem: &dyn ShapeProblem, theta: &VectorField) -> Result<Analysis> {
    problem.analyze(&MeshVelocity::interpolate(problem.mesh(), theta))
}

pub fn fd_shape_check(
    problem: &dyn ShapeProblem,
    theta: &VectorField,
    s_list: &[f64],
    steps: usize,
) -> Result<FdTable> {
    let dj = analyze_discrete(problem, theta)?.dj.total();
    fd_table(problem, theta, s_list, steps, dj)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorRow {
    pub s: f64,
    /// `‖u^s − u − s u̇‖` in the problem's state norm, with `u^s` pulled back by node index.
    pub remainder: Option<f64>,
    pub order: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorTable {
    pub problem: String,
    pub theta: String,
    pub material_norm: f64,
    pub rows: Vec<TaylorRow>,
}

impl TaylorTable {
    pub fn min_order(&self) -> Option<f64> {
        min_defined(self.rows.iter().skip(1).map(|r| r.order))
    }

    pub fn is_degenerate(&self) -> bool {
        self.rows.iter().all(|r| r.remainder.is_some_and(|e| e <= DEGENERATE_ZERO))
    }

    pub fn assess(&self, min_order: f64) -> Check {
        let c = Check::at_least("taylor_order", self.min_order(), min_order);
        if self.is_degenerate() {
            c.waived()
        } else {
            c
        }
    }
}

/// Returns `None` for problems without a state.
pub fn material_taylor_check(
    problem: &dyn ShapeProblem,
    theta: &VectorField,
    s_list: &[f64],
    steps: usize,
    material: &[Vec<f64>],
) -> Result<Option<TaylorTable>> {
    check_s_list(s_list)?;
    let mesh = problem.mesh();
    let Some(base) = problem.state_on(mesh)? else {
        return Ok(None);
    };
    let states: Vec<Result<Option<Vec<Vec<f64>>>>> =
        s_list.par_iter().map(|&s| problem.state_on(&transport_mesh(mesh, theta, s, steps)?)).collect();
    let mut rows = Vec::new();
    for (&s, state) in s_list.iter().zip(states) {
        let (remainder, flag) = match state {
            Ok(Some(us)) => {
                let diff: Vec<Vec<f64>> = us
                    .iter()
                    .zip(&base)
                    .zip(material)
                    .map(|((a, b), d)| a.iter().zip(b).zip(d).map(|((a, b), d)| a - b - s * d).collect())
                    .collect();
                (Some(problem.state_norm(&diff)), None)
            }
            Ok(None) => (None, None),
            Err(e @ Error::FlowDegenerate { .. }) | Err(e @ Error::MeshValidation(_)) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        rows.push(TaylorRow { s, remainder, order: None, flag });
    }
    let rem: Vec<_> = rows.iter().map(|r| r.remainder).collect();
    for (r, o) in rows.iter_mut().zip(orders(&rem, s_list)) {
        r.order = o;
    }
    Ok(Some(TaylorTable {
        problem: problem.id().to_string(),
        theta: theta.name().to_string(),
        material_norm: problem.state_norm(material),
        rows,
    }))
}

/// Both pairings of the adjoint/material duality for the discrete velocity.
pub fn duality_check(problem: &dyn ShapeProblem, theta: &VectorField) -> Result<Option<DualityReport>> {
    Ok(analyze_discrete(problem, theta)?.duality)
}

/// Least-squares slope of `log error` against `log step`.
pub fn estimate_order(rows: &[(f64, f64)]) -> Result<f64> {
    if rows.len() < 3 {
        return Err(Error::invalid(format!("order estimation needs at least 3 rows, got {}", rows.len())));
    }
    if let Some((h, e)) = rows.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite())) {
        return Err(Error::invalid(format!("order estimation needs positive steps and errors, got ({h}, {e})")));
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("order estimation needs distinct steps"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Quotients of `s ↦ ∫_Ω 𝓕(T_s(x), u) ξ(s)` against the analytic `s = 0` derivative.
pub fn cost_transport_check(
    fields: &ManufacturedFields,
    space: &FeSpace,
    rule: &TriangleRule,
    theta: &VectorField,
    s_list: &[f64],
    steps: usize,
) -> Result<FdTable> {
    let dj = cost_transport_derivative(fields, space, rule, theta);
    let j0 = transported_cost(fields, space, rule, theta, 0.0, steps)?;
    let hash = space.mesh().content_hash();
    FdTable::build(("cost_transport", theta.name(), &hash, space.dof_count()), j0, dj, s_list, |s| {
        transported_cost(fields, space, rule, theta, s, steps)
    })
}

/// Relative disagreement between two evaluations of the same derivative.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ScalarData;
    use crate::elliptic::{RobinData, RobinProblem};
    use crate::fem::Order;
    use crate::flow::SupportBox;
    use crate::mesh::Mesh;
    use crate::problem::AreaProblem;
    use crate::tensor::{Mat2, Vec2};
    use rand::{Rng, SeedableRng};

    const S_LIST: [f64; 3] = [0.02, 0.01, 0.005];

    fn disk(refine: usize) -> Mesh {
        Mesh::disk(Vec2::zero(), 1.0, refine).unwrap()
    }

    fn bump() -> VectorField {
        VectorField::from_catalog("bump", &[0.2, -0.1, 0.9, 0.3, -0.2], None).unwrap()
    }

    #[test]
    fn estimate_order_examples() {
        let exact = estimate_order(&[(0.1, 1e-2), (0.05, 2.5e-3), (0.025, 6.25e-4)]).unwrap();
        assert!((exact - 2.0).abs() < 1e-12);
        let flat = estimate_order(&[(0.1, 3.0), (0.05, 3.0), (0.025, 3.0)]).unwrap();
        assert_eq!(flat, 0.0);
        assert!(estimate_order(&[(0.1, 1.0), (0.05, -1.0), (0.02, 1.0)]).is_err());
        assert!(estimate_order(&[(0.1, 1.0), (0.05, 1.0)]).is_err());
    }

    #[test]
    fn estimate_order_tolerates_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rows: Vec<(f64, f64)> = (0..6)
                .map(|k| {
                    let h = 0.2 / 2f64.powi(k);
                    (h, 0.7 * h * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
                })
                .collect();
            let p = estimate_order(&rows).unwrap();
            assert!((p - 1.0).abs() <= 0.1, "{p}");
        }
    }

    #[test]
    fn s_list_must_decrease() {
        assert!(check_s_list(&[0.01, 0.02]).is_err());
        assert!(check_s_list(&[0.01]).is_err());
        assert!(check_s_list(&[0.02, 0.0]).is_err());
        assert!(check_s_list(&S_LIST).is_ok());
    }

    #[test]
    fn extrapolation_removes_even_powers() {
        let s = [0.4, 0.2, 0.1];
        let q: Vec<f64> = s.iter().map(|s: &f64| 3.0 + 2.0 * s * s - 5.0 * s.powi(4)).collect();
        assert!((extrapolate_even(&s, &q) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn area_gating_check() {
        let pb = AreaProblem::new(disk(5));
        let table = fd_shape_check(&pb, &bump(), &S_LIST, 8).unwrap();
        let checks = table.assess(&FdCriteria {
            min_central_order: Some(1.9),
            min_forward_order: None,
            max_relative_gap: None,
            max_extrapolated_gap: Some(1e-10),
        });
        assert!(checks.iter().all(|c| c.passed), "{checks:?}\n{table:?}");
        // The discrete derivative approximates the continuous ∫ div θ.
        let exact = pb.analyze(&bump()).unwrap().dj.total();
        assert!((exact - table.dj).abs() < 1e-3);
    }

    #[test]
    fn support_outside_the_mesh_gives_exact_zeros() {
        let support = SupportBox::new(Vec2::xy(3.0, 3.0), Vec2::xy(4.0, 4.0), 0.1).unwrap();
        let theta = VectorField::from_catalog("constant", &[1.0, 0.5], Some(support)).unwrap();
        let data = RobinData::new(
            Mat2::diag([2.0, 1.0]),
            ScalarData::constant(1.0),
            ScalarData::constant(1.0),
            ScalarData::zero(),
        )
        .unwrap();
        let pb = RobinProblem::new(disk(3), Order::P1, data).unwrap();
        let table = fd_shape_check(&pb, &theta, &S_LIST, 4).unwrap();
        assert_eq!(table.dj, 0.0);
        for r in &table.rows {
            assert_eq!(r.j_plus, Some(table.j0));
            assert_eq!(r.j_minus, Some(table.j0));
            assert_eq!(r.central, Some(0.0));
        }
        let a = analyze_discrete(&pb, &theta).unwrap();
        let taylor = material_taylor_check(&pb, &theta, &S_LIST, 4, a.material.as_ref().unwrap()).unwrap().unwrap();
        assert!(taylor.rows.iter().all(|r| r.remainder == Some(0.0)));
        assert_eq!(a.duality.unwrap().lhs, 0.0);
        assert!(table
            .assess(&FdCriteria {
                min_central_order: Some(1.9),
                min_forward_order: Some(0.9),
                max_relative_gap: Some(1e-5),
                max_extrapolated_gap: Some(1e-10)
            })
            .iter()
            .all(|c| c.passed));
    }

    #[test]
    fn zero_velocity_has_zero_remainders() {
        let data =
            RobinData::new(Mat2::identity(), ScalarData::constant(1.0), ScalarData::constant(1.0), ScalarData::zero())
                .unwrap();
        let pb = RobinProblem::new(disk(2), Order::P1, data).unwrap();
        let zero = VectorField::zero();
        let a = analyze_discrete(&pb, &zero).unwrap();
        let t = material_taylor_check(&pb, &zero, &S_LIST, 4, a.material.as_ref().unwrap()).unwrap().unwrap();
        assert!(t.rows.iter().all(|r| r.remainder == Some(0.0)));
        assert!(t.assess(1.9).passed);
        let d = duality_check(&pb, &zero).unwrap().unwrap();
        assert_eq!((d.lhs, d.rhs), (0.0, 0.0));
    }

    #[test]
    fn inverted_triangles_flag_rows_without_failing() {
        let theta = VectorField::from_catalog(
            "quadratic",
            &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            None,
        )
        .unwrap();
        let pb = AreaProblem::new(disk(2));
        let table = fd_shape_check(&pb, &theta, &[2.0, 1.0], 1).unwrap();
        assert!(table.flagged());
        let c = table.assess(&FdCriteria {
            min_central_order: Some(1.9),
            min_forward_order: None,
            max_relative_gap: None,
            max_extrapolated_gap: None,
        });
        assert!(!c[0].passed);
    }

    #[test]
    fn loose_steps_fail_tight_gaps() {
        let pb = AreaProblem::new(disk(2));
        let table = fd_shape_check(&pb, &bump(), &[0.4, 0.2], 2).unwrap();
        let c = table.assess(&FdCriteria {
            min_central_order: None,
            min_forward_order: None,
            max_relative_gap: Some(1e-12),
            max_extrapolated_gap: None,
        });
        assert!(!c[0].passed);
    }
}
