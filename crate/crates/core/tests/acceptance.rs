#![allow(clippy::needless_range_loop)]

//! End-to-end acceptance run: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shapegrad::data::{heat_manufactured, Profile, ScalarData, TimeMatrix, TimeScalar};
use shapegrad::elliptic::dirichlet_energy::DirichletEnergyData;
use shapegrad::elliptic::{DirichletEnergyProblem, QuasilinearData, QuasilinearProblem, RobinData, RobinProblem};
use shapegrad::fem::assembly::l2_error;
use shapegrad::fem::{Discretization, EdgeRule, FeSpace, Order, ScalarField, TriangleRule};
use shapegrad::flow::{advect, div_gamma, m_of_s, m_prime0, xi, xi_gamma, VectorField};
use shapegrad::mesh::Mesh;
use shapegrad::parabolic::{pair, parabolic_solve, ParabolicCost, ParabolicData, ParabolicProblem, SpaceTimeOperator};
use shapegrad::problem::{AreaProblem, ShapeProblem};
use shapegrad::shape::assemble_dj;
use shapegrad::shape::manufactured::{prop5_raw, prop5_tensors, prop6_raw, prop6_tensors, ManufacturedFields};
use shapegrad::tensor::{
    apply3, double_dot, matvec3, outer, outer_vm, transported_hessian_rate, transported_laplacian_rate, transpose3,
    triple_dot, Mat2, Matrix, Tensor3, Vec2, Vector,
};
use shapegrad::validation::{
    analyze_discrete, cost_transport_check, estimate_order, fd_table, material_taylor_check, relative_difference,
    FdCriteria, FdTable,
};

const S_LIST: [f64; 3] = [0.02, 0.01, 0.005];
const FLOW_STEPS: usize = 32;

struct Outcome {
    passed: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { passed: true, details: Vec::new() }
    }

    fn at_most(&mut self, what: &str, value: f64, bound: f64) {
        let ok = value <= bound;
        self.passed &= ok;
        self.details.push(format!("{what} {value:.3e} {} {bound:.0e}", if ok { "<=" } else { "!<=" }));
    }

    fn at_least(&mut self, what: &str, value: Option<f64>, bound: f64) {
        let ok = value.is_some_and(|v| v >= bound);
        self.passed &= ok;
        let shown = value.map_or("undefined".to_string(), |v| format!("{v:.3}"));
        self.details.push(format!("{what} {shown} {} {bound}", if ok { ">=" } else { "!>=" }));
    }

    fn require(&mut self, what: &str, ok: bool) {
        self.passed &= ok;
        self.details.push(format!("{what}: {}", if ok { "ok" } else { "FAILED" }));
    }

    fn fail(&mut self, what: String) {
        self.passed = false;
        self.details.push(what);
    }
}

fn run(
    id: usize,
    title: &str,
    budget_s: Option<f64>,
    body: impl FnOnce(&mut Outcome) -> shapegrad::error::Result<()>,
) -> bool {
    let start = Instant::now();
    let mut out = Outcome::new();
    if let Err(e) = body(&mut out) {
        out.fail(format!("error: {e}"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(b) = budget_s {
        let ok = elapsed < b;
        out.passed &= ok;
        out.details.push(format!("runtime {elapsed:.2} s {} {b} s", if ok { "<" } else { "!<" }));
    }
    println!("criterion {id} {} {title}: {}", if out.passed { "PASS" } else { "FAIL" }, out.details.join("; "));
    out.passed
}

fn rvec<const D: usize>(rng: &mut ChaCha8Rng) -> Vector<D> {
    Vector::new(std::array::from_fn(|_| rng.random_range(-2.0..2.0)))
}

fn rmat<const D: usize>(rng: &mut ChaCha8Rng) -> Matrix<D> {
    Matrix::new(std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))))
}

fn rten<const D: usize>(rng: &mut ChaCha8Rng) -> Tensor3<D> {
    Tensor3::try_new(std::array::from_fn(|_| {
        std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0)))
    }))
    .expect("finite")
}

/// Largest violation of the tensor identities, relative to `max(1, magnitude)`.
fn tensor_identities<const D: usize>(rng: &mut ChaCha8Rng, trials: usize) -> (f64, bool) {
    let mut worst: f64 = 0.0;
    let mut exact = true;
    let mut rel = |a: f64, b: f64, scale: f64| worst = worst.max((a - b).abs() / scale.max(1.0));
    for _ in 0..trials {
        let (a, b, c, d) = (rvec::<D>(rng), rvec::<D>(rng), rvec::<D>(rng), rvec::<D>(rng));
        let (s, t, u) = (rmat::<D>(rng), rmat::<D>(rng), rmat::<D>(rng));
        let (ss, tt) = (rten::<D>(rng), rten::<D>(rng));

        let mut loop2 = 0.0;
        let mut loop3 = 0.0;
        for i in 0..D {
            for j in 0..D {
                loop2 += s[(i, j)] * t[(i, j)];
                for k in 0..D {
                    loop3 += ss.get(i, j, k) * tt.get(i, j, k);
                }
            }
        }
        rel(double_dot(&s, &t), loop2, loop2.abs());
        rel(triple_dot(&ss, &tt), loop3, loop3.abs());

        let ap = apply3(&ss, &b, &c);
        for i in 0..D {
            let mut v = 0.0;
            for j in 0..D {
                for k in 0..D {
                    v += ss.get(i, j, k) * b[j] * c[k];
                }
            }
            rel(ap[i], v, v.abs());
        }
        rel(a.dot(&ap), b.dot(&apply3(&transpose3(&ss), &c, &a)), a.norm() * b.norm() * c.norm() * ss.norm());
        exact &= transpose3(&transpose3(&transpose3(&ss))) == ss;
        let mv = matvec3(&ss, &c).matvec(&b);
        for i in 0..D {
            rel(mv[i], ap[i], ss.norm() * b.norm() * c.norm());
        }
        let ovm = outer_vm(&a, &t);
        for i in 0..D {
            for j in 0..D {
                for k in 0..D {
                    exact &= ovm.get(i, j, k) == a[i] * t[(j, k)];
                }
            }
        }

        let ab = outer(&a, &b);
        let scale = s.norm() * a.norm() * b.norm();
        rel(double_dot(&s, &ab), a.dot(&s.matvec(&b)), scale);
        rel(a.dot(&s.matvec(&b)), s.transpose().matvec(&a).dot(&b), scale);
        let lhs = s.matmul(&ab);
        let rhs = outer(&s.matvec(&a), &b);
        for i in 0..D {
            for j in 0..D {
                rel(lhs[(i, j)], rhs[(i, j)], scale);
            }
        }
        let abc = ab.matvec(&c);
        let cba = a * c.dot(&b);
        for i in 0..D {
            rel(abc[i], cba[i], a.norm() * b.norm() * c.norm());
        }
        rel(double_dot(&ab, &outer(&c, &d)), a.dot(&c) * b.dot(&d), a.norm() * b.norm() * c.norm() * d.norm());
        rel(double_dot(&s.matmul(&t), &u), double_dot(&t, &s.transpose().matmul(&u)), s.norm() * t.norm() * u.norm());
        rel(
            double_dot(&matvec3(&transpose3(&ss), &a), &t),
            triple_dot(&ss, &outer_vm(&a, &t)),
            ss.norm() * a.norm() * t.norm(),
        );

        let h = {
            let m = rmat::<D>(rng);
            m + m.transpose()
        };
        let (jac, hess) = (rmat::<D>(rng), rten::<D>(rng));
        let hess = Tensor3::from_fn(|i, j, k| 0.5 * (hess.get(i, j, k) + hess.get(i, k, j)));
        let rate = transported_hessian_rate(&a, &h, &jac, &hess).expect("symmetric");
        let lap = transported_laplacian_rate(&a, &h, &jac, &hess).expect("symmetric");
        rel(rate.trace(), lap, 1.0 + h.norm() * jac.norm() + hess.norm() * a.norm());
    }
    (worst, exact)
}

fn criterion_1(out: &mut Outcome) -> shapegrad::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (w2, e2) = tensor_identities::<2>(&mut rng, 1000);
    let (w3, e3) = tensor_identities::<3>(&mut rng, 1000);
    out.at_most("max relative violation d=2", w2, 1e-12);
    out.at_most("max relative violation d=3", w3, 1e-12);
    out.require("exact triple transpose and outer products", e2 && e3);
    Ok(())
}

fn transport_fields(rng: &mut ChaCha8Rng) -> Vec<VectorField> {
    let mut p = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.5..0.5)).collect() };
    let quad = p(12);
    let lin = p(6);
    let rot = p(3);
    let b1 = p(2);
    let b2 = p(2);
    vec![
        VectorField::from_catalog("linear", &lin, None).unwrap(),
        VectorField::from_catalog("rotation", &rot, None).unwrap(),
        VectorField::from_catalog("quadratic", &quad, None).unwrap(),
        VectorField::from_catalog("bump", &[0.1, -0.1, 0.9, b1[0], b1[1]], None).unwrap(),
        VectorField::from_catalog("tensor_bump", &[0.0, 0.1, 0.8, 0.7, b2[0], b2[1]], None).unwrap(),
    ]
}

fn criterion_2(out: &mut Outcome) -> shapegrad::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-4;
    let mut worst_m: f64 = 0.0;
    let mut worst_xi: f64 = 0.0;
    let mut worst_gamma: f64 = 0.0;
    for theta in transport_fields(&mut rng) {
        for _ in 0..100 {
            let r = 0.6 * rng.random_range(0.0f64..1.0).sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let x = Vec2::xy(0.1 + r * phi.cos(), r * phi.sin() - 0.05);
            let q = {
                let m = rmat::<2>(&mut rng);
                m.matmul(&m.transpose()) + Mat2::identity()
            };
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let n = Vec2::xy(angle.cos(), angle.sin());
            let plus = advect(&theta, h, x, FLOW_STEPS)?;
            let minus = advect(&theta, -h, x, FLOW_STEPS)?;
            let fd = (m_of_s(&plus, &q)? - m_of_s(&minus, &q)?) * (0.5 / h);
            let exact = m_prime0(&theta, &x, &q);
            worst_m = worst_m.max((fd - exact).norm() / exact.norm().max(1.0));
            let dxi = (xi(&plus) - xi(&minus)) / (2.0 * h);
            let div = theta.div(&x);
            worst_xi = worst_xi.max((dxi - div).abs() / div.abs().max(1.0));
            let dg = (xi_gamma(&plus, &n)? - xi_gamma(&minus, &n)?) / (2.0 * h);
            let exact_g = div_gamma(&theta, &x, &n)?;
            worst_gamma = worst_gamma.max((dg - exact_g).abs() / exact_g.abs().max(1.0));
        }
    }
    out.at_most("M'(0,Q) vs FD", worst_m, 1e-6);
    out.at_most("xi'(0) vs div", worst_xi, 1e-6);
    out.at_most("xi_gamma'(0) vs div_gamma", worst_gamma, 1e-6);
    Ok(())
}

fn disk(refine: usize) -> Mesh {
    Mesh::disk(Vec2::zero(), 1.0, refine).unwrap()
}

fn disk_bump() -> VectorField {
    VectorField::from_catalog("bump", &[0.2, -0.1, 0.9, 0.3, -0.2], None).unwrap()
}

fn report_fd(out: &mut Outcome, table: &FdTable, criteria: &FdCriteria) {
    if table.flagged() {
        out.fail("flow degeneracy in FD rows".into());
    }
    if table.is_degenerate() {
        out.require("FD table degenerate (all zero)", true);
        return;
    }
    if let Some(t) = criteria.min_central_order {
        out.at_least("FD central order", table.min_central_order(), t);
    }
    if let Some(t) = criteria.min_forward_order {
        out.at_least("FD forward order", table.min_forward_order(), t);
    }
    if let Some(t) = criteria.max_relative_gap {
        out.at_most("FD relative gap at smallest s", table.relative_gap().unwrap_or(f64::INFINITY), t);
    }
    if let Some(t) = criteria.max_extrapolated_gap {
        out.at_most("FD extrapolated gap", table.extrapolated_gap.unwrap_or(f64::INFINITY), t);
    }
}

fn criterion_3(out: &mut Outcome) -> shapegrad::error::Result<()> {
    let pb = AreaProblem::new(disk(5));
    let theta = disk_bump();
    let dj = analyze_discrete(&pb, &theta)?.dj.total();
    let table = fd_table(&pb, &theta, &S_LIST, FLOW_STEPS, dj)?;
    report_fd(
        out,
        &table,
        &FdCriteria {
            min_central_order: Some(1.9),
            min_forward_order: None,
            max_relative_gap: None,
            max_extrapolated_gap: Some(1e-10),
        },
    );
    Ok(())
}

const ELLIPTIC_FD: FdCriteria = FdCriteria {
    min_central_order: Some(1.9),
    min_forward_order: None,
    max_relative_gap: Some(1e-5),
    max_extrapolated_gap: None,
};

fn criterion_4(out: &mut Outcome) -> shapegrad::error::Result<()> {
    let theta = disk_bump();
    let constant = RobinProblem::new(disk(4), Order::P1, RobinData::constant_state())?;
    let dev = constant.u.coeffs.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    out.at_most("constant state |u - 1|", dev, 1e-10);
    out.at_most("constant state |dJ|", analyze_discrete(&constant, &theta)?.dj.total().abs(), 1e-10);
    out.at_most("constant state |dJ| (analytic theta)", constant.analyze(&theta)?.dj.total().abs(), 1e-10);

    let data = RobinData::new(
        Mat2::diag([2.0, 1.0]),
        ScalarData::constant(1.0),
        ScalarData::constant(1.0),
        ScalarData::zero(),
    )?;
    let pb = RobinProblem::new(disk(6), Order::P1, data)?;
    out.details.push(format!("dofs {}", pb.discretization().dof_count()));
    let analysis = analyze_discrete(&pb, &theta)?;
    out.at_most("duality rel gap", analysis.duality.expect("duality").rel_gap, 1e-9);
    let table = fd_table(&pb, &theta, &S_LIST, FLOW_STEPS, analysis.dj.total())?;
    report_fd(out, &table, &ELLIPTIC_FD);
    let taylor =
        material_taylor_check(&pb, &theta, &S_LIST, FLOW_STEPS, analysis.material.as_ref().expect("material"))?
            .expect("state");
    out.at_least("Taylor remainder order", taylor.min_order(), 1.9);
    Ok(())
}

fn criterion_5(out: &mut Outcome) -> shapegrad::error::Result<()> {
    let theta = disk_bump();
    let data = QuasilinearData::catalog_example(ScalarData::constant(4.0), ScalarData::constant(0.1));
    let pb = QuasilinearProblem::new(disk(5), Order::P1, data)?;
    let history = &pb.newton.history;
    out.require(&format!("Newton iterations {} <= 8", pb.newton.iterations()), pb.newton.iterations() <= 8);
    out.at_most("final Newton residual", *history.last().expect("history"), 1e-11);
    let analysis = analyze_discrete(&pb, &theta)?;
    out.at_most("duality rel gap", analysis.duality.expect("duality").rel_gap, 1e-9);
    let table = fd_table(&pb, &theta, &S_LIST, FLOW_STEPS, analysis.dj.total())?;
    report_fd(out, &table, &FdCriteria { max_relative_gap: Some(1e-4), ..ELLIPTIC_FD });
    Ok(())
}

fn parabolic_data(nt: usize) -> ParabolicData {
    ParabolicData {
        m: TimeMatrix::scaled(Mat2::new([[1.0, 0.2], [0.2, 0.8]]), 0.5, 0.3, Vec2::xy(2.0, 1.0)).unwrap(),
        f: TimeScalar { profile: Profile::Linear(1.0, 0.5), space: ScalarData::constant(1.0) },
        g: ScalarData::SinSin { a: 1.0, kx: std::f64::consts::PI, ky: std::f64::consts::PI },
        u_d: TimeScalar { profile: Profile::Exp(-1.0), space: ScalarData::constant(0.05) },
        t0: 1.0,
        nt,
    }
}

fn criterion_6(out: &mut Outcome) -> shapegrad::error::Result<()> {
    let mesh = Mesh::rectangle(0.0, 0.0, 1.0, 1.0, 50, 50)?;
    let data = parabolic_data(64);
    let theta = VectorField::from_catalog("bump", &[0.5, 0.45, 0.6, 0.3, -0.2], None)?;

    let disc = Discretization::new(mesh.clone(), Order::P1, shapegrad::parabolic::VOLUME_DEGREE);
    out.details.push(format!("spatial dofs {}", disc.dof_count()));
    let op = SpaceTimeOperator::new(&disc, &data.m, data.t0, data.nt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let mut random = || -> Vec<Vec<f64>> {
            (0..=data.nt)
                .map(|_| op.restrict((0..disc.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect()))
                .collect()
        };
        let (v, w) = (random(), random());
        let lhs = pair(&op.apply_forward(&v), &w);
        let rhs = pair(&v, &op.apply_adjoint(&w));
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    out.at_most("transposition", worst, 1e-12);

    for cost in [ParabolicCost::J1, ParabolicCost::J2] {
        let pb = ParabolicProblem::new(mesh.clone(), Order::P1, data.clone(), cost)?;
        let analysis = analyze_discrete(&pb, &theta)?;
        out.at_most(&format!("{cost:?} duality rel gap"), analysis.duality.expect("duality").rel_gap, 1e-9);
        let table = fd_table(&pb, &theta, &S_LIST, FLOW_STEPS, analysis.dj.total())?;
        out.details.push(format!("{cost:?}"));
        report_fd(
            out,
            &table,
            &FdCriteria {
                min_central_order: Some(1.9),
                min_forward_order: Some(0.9),
                max_relative_gap: None,
                max_extrapolated_gap: None,
            },
        );
    }

    let (f, g, exact) = heat_manufactured();
    let fine = Discretization::new(Mesh::rectangle(0.0, 0.0, 1.0, 1.0, 12, 12)?, Order::P2, 6);
    let mut rows = Vec::new();
    for nt in [8, 16, 32, 64] {
        let d = ParabolicData {
            m: TimeMatrix::constant(Mat2::identity())?,
            f: f.clone(),
            g: g.clone(),
            u_d: TimeScalar::steady(ScalarData::zero()),
            t0: 1.0,
            nt,
        };
        let u = parabolic_solve(&fine, &d)?;
        let mut sum = 0.0;
        for k in 1..=nt {
            let t = d.time(k);
            let e = l2_error(&fine.space, &fine.volume, &ScalarField::from(u[k].clone()), |x| exact(t, x));
            sum += d.dt() * e * e;
        }
        rows.push((d.dt(), sum.sqrt()));
    }
    let order = estimate_order(&rows)?;
    out.require(&format!("manufactured time order {order:.3} within [0.9, 1.1]"), (0.9..=1.1).contains(&order));
    Ok(())
}

fn criterion_7(out: &mut Outcome) -> shapegrad::error::Result<()> {
    let theta = disk_bump();
    let data = DirichletEnergyData { f: ScalarData::constant(1.0) };
    let mut gaps = Vec::new();
    for refine in 3..=6 {
        let pb = DirichletEnergyProblem::new(disk(refine), Order::P1, data.clone())?;
        if refine == 6 {
            let dev = pb.u.coeffs.iter().zip(&pb.p.coeffs).map(|(u, p)| (p + 2.0 * u).abs()).fold(0.0, f64::max);
            out.at_most("max |p + 2u|", dev, 1e-10);
        }
        let volume = pb.analyze(&theta)?.dj.total();
        let boundary = pb.boundary_dj(&theta);
        gaps.push((2f64.powi(-(refine as i32)), (volume - boundary).abs()));
        if refine == 5 {
            let analysis = analyze_discrete(&pb, &theta)?;
            let table = fd_table(&pb, &theta, &S_LIST, FLOW_STEPS, analysis.dj.total())?;
            report_fd(out, &table, &ELLIPTIC_FD);
        }
    }
    out.details.push(format!(
        "volume-boundary gaps {}",
        gaps.iter().map(|(_, g)| format!("{g:.2e}")).collect::<Vec<_>>().join(" ")
    ));
    out.at_least("volume vs boundary order", Some(estimate_order(&gaps)?), 0.9);
    Ok(())
}

fn criterion_8(out: &mut Outcome) -> shapegrad::error::Result<()> {
    let fields = ManufacturedFields::default_disk();
    let space = FeSpace::new(disk(4), Order::P1);
    let rule = TriangleRule::of_degree(6);
    let edge = EdgeRule::gauss(4);
    let thetas = [
        VectorField::from_catalog(
            "quadratic",
            &[0.1, -0.2, 0.3, 0.1, -0.2, 0.4, 0.5, -0.3, 0.2, 0.1, 0.6, -0.4],
            None,
        )?,
        VectorField::from_catalog("bump", &[0.2, -0.1, 0.8, 0.5, 0.3], None)?,
        VectorField::from_catalog("tensor_bump", &[0.0, 0.1, 0.8, 0.7, 0.4, -0.3], None)?,
        VectorField::from_catalog("radial_bump", &[0.1, 0.2, 0.9, 0.4], None)?,
        VectorField::from_catalog("linear", &[0.1, 0.2, -0.3, 0.05, 0.1, 0.0], None)?,
    ];
    let t5 = prop5_tensors(&fields, &space, &rule, &edge);
    let t6 = prop6_tensors(&fields, &space, &rule);
    let mut worst5: f64 = 0.0;
    let mut worst6: f64 = 0.0;
    let mut nonzero_hessian = 0;
    for theta in &thetas {
        worst5 = worst5.max(relative_difference(
            assemble_dj(&t5, theta).total(),
            prop5_raw(&fields, &space, &rule, &edge, theta)?,
        ));
        worst6 =
            worst6.max(relative_difference(assemble_dj(&t6, theta).total(), prop6_raw(&fields, &space, &rule, theta)?));
        if theta.hess(&Vec2::xy(0.3, 0.2)).norm() > 0.0 {
            nonzero_hessian += 1;
        }
    }
    out.at_most("prop5 tensorized vs raw", worst5, 1e-12);
    out.at_most("prop6 tensorized vs raw", worst6, 1e-12);
    out.require(&format!("{nonzero_hessian} fields with nonzero D2theta"), nonzero_hessian >= 3);
    let table = cost_transport_check(&fields, &space, &rule, &thetas[1], &S_LIST, FLOW_STEPS)?;
    report_fd(
        out,
        &table,
        &FdCriteria {
            min_central_order: Some(1.9),
            min_forward_order: None,
            max_relative_gap: None,
            max_extrapolated_gap: None,
        },
    );
    Ok(())
}

fn shipped_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut configs: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
                .collect()
        })
        .unwrap_or_default();
    configs.sort();
    configs
}

fn report_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "json"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn criterion_9(out: &mut Outcome) -> shapegrad::error::Result<()> {
    let configs = shipped_configs();
    out.require(&format!("{} shipped configs found", configs.len()), !configs.is_empty());
    let root = tempfile::tempdir()?;
    for cfg in &configs {
        let name = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let mut runs = Vec::new();
        for attempt in 0..2 {
            let dir = root.path().join(format!("{name}-{attempt}"));
            let status = Command::new(env!("CARGO_BIN_EXE_shapegrad"))
                .arg("--config")
                .arg(cfg)
                .arg("--out")
                .arg(&dir)
                .arg("validate")
                .env("SHAPEGRAD_LOG", "error")
                .status()?;
            runs.push((status.code(), report_bytes(&dir)));
        }
        let same = runs[0] == runs[1] && !runs[0].1.is_empty();
        out.require(&format!("{name} byte-identical ({} files, exit {:?})", runs[0].1.len(), runs[0].0), same);
    }
    Ok(())
}

fn main() {
    let results = [
        run(1, "tensor algebra", Some(1.0), criterion_1),
        run(2, "transport derivatives", Some(5.0), criterion_2),
        run(3, "gating geometry", Some(5.0), criterion_3),
        run(4, "Robin suite", Some(30.0), criterion_4),
        run(5, "quasilinear suite", Some(60.0), criterion_5),
        run(6, "parabolic suite", Some(120.0), criterion_6),
        run(7, "Dirichlet energy suite", None, criterion_7),
        run(8, "manufactured propositions", Some(10.0), criterion_8),
        run(9, "end-to-end determinism", None, criterion_9),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
