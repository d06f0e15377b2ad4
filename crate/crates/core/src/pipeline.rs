//! Runs a [`RunConfig`] end to end and returns the files a command would write.
//!
//! Nothing here touches the filesystem except reading mesh files, so the same
//! entry points serve the command-line tool and the C interface.

use serde_json::{json, Value};

use crate::config::{ProblemKind, RunConfig};
use crate::elliptic::{DirichletEnergyProblem, QuasilinearProblem, RobinProblem};
use crate::error::{Error, Result};
use crate::fem::{EdgeRule, FeSpace, TriangleRule};
use crate::flow::VectorField;
use crate::io::FieldFile;
use crate::mesh::{BoundingBox, Mesh};
use crate::parabolic::{ParabolicCost, ParabolicProblem};
use crate::problem::{AreaProblem, ShapeProblem};
use crate::report::{checks_csv, dj_csv, dj_json, fd_csv, json_text, taylor_csv, SCHEMA};
use crate::shape::assemble_dj;
use crate::shape::manufactured::{prop5_raw, prop5_tensors, prop6_raw, prop6_tensors, ManufacturedFields};
use crate::validation::{
    analyze_discrete, cost_transport_check, fd_table, material_taylor_check, relative_difference, Check,
};

/// Grid of the quasilinear monotonicity scan over `bounding box × [−r, r]`.
pub const MONOTONICITY_GRID: [usize; 3] = [32, 32, 64];
const MANUFACTURED_VOLUME_DEGREE: usize = 6;
const MANUFACTURED_EDGE_POINTS: usize = 4;

pub struct Manufactured {
    pub kind: ProblemKind,
    pub fields: ManufacturedFields,
    pub space: FeSpace,
    pub rule: TriangleRule,
    pub edge: EdgeRule,
}

impl Manufactured {
    fn dj(&self, theta: &VectorField) -> Result<(crate::shape::DjBreakdown, f64)> {
        match self.kind {
            ProblemKind::Prop5Manufactured => {
                let t = prop5_tensors(&self.fields, &self.space, &self.rule, &self.edge);
                Ok((assemble_dj(&t, theta), prop5_raw(&self.fields, &self.space, &self.rule, &self.edge, theta)?))
            }
            _ => {
                let t = prop6_tensors(&self.fields, &self.space, &self.rule);
                Ok((assemble_dj(&t, theta), prop6_raw(&self.fields, &self.space, &self.rule, theta)?))
            }
        }
    }
}

pub enum Setup {
    Pde(Box<dyn ShapeProblem>),
    Manufactured(Box<Manufactured>),
}

/// Output files by name, the JSON report and the overall verdict.
pub struct CommandOutput {
    pub files: Vec<(String, String)>,
    pub report: Value,
    pub passed: bool,
}

pub fn build(cfg: &RunConfig) -> Result<(Mesh, Setup)> {
    let mesh = cfg.mesh.build()?;
    log::info!("mesh {} with {} nodes, {} triangles", mesh.content_hash(), mesh.node_count(), mesh.triangle_count());
    let m = mesh.clone();
    let setup = match cfg.problem {
        ProblemKind::Robin => Setup::Pde(Box::new(RobinProblem::new(m, cfg.order, cfg.robin()?)?)),
        ProblemKind::Quasilinear => {
            let (data, r_max) = cfg.quasilinear()?;
            data.check_monotonicity(&BoundingBox::of_points(mesh.nodes()), r_max, MONOTONICITY_GRID)?;
            let pb = QuasilinearProblem::new(m, cfg.order, data)?;
            log::info!("Newton converged in {} iterations", pb.newton.iterations());
            Setup::Pde(Box::new(pb))
        }
        ProblemKind::DirichletEnergy => {
            Setup::Pde(Box::new(DirichletEnergyProblem::new(m, cfg.order, cfg.dirichlet_energy()?)?))
        }
        ProblemKind::ParabolicJ1 => {
            Setup::Pde(Box::new(ParabolicProblem::new(m, cfg.order, cfg.parabolic()?, ParabolicCost::J1)?))
        }
        ProblemKind::ParabolicJ2 => {
            Setup::Pde(Box::new(ParabolicProblem::new(m, cfg.order, cfg.parabolic()?, ParabolicCost::J2)?))
        }
        ProblemKind::Prop5Manufactured | ProblemKind::Prop6Manufactured => {
            Setup::Manufactured(Box::new(Manufactured {
                kind: cfg.problem,
                fields: ManufacturedFields::default_disk(),
                space: FeSpace::new(m, cfg.order),
                rule: TriangleRule::of_degree(MANUFACTURED_VOLUME_DEGREE),
                edge: EdgeRule::gauss(MANUFACTURED_EDGE_POINTS),
            }))
        }
        ProblemKind::Area => Setup::Pde(Box::new(AreaProblem::new(m))),
    };
    Ok((mesh, setup))
}

fn header(cfg: &RunConfig, command: &str, mesh: &Mesh, dofs: usize) -> Value {
    json!({
        "schema": SCHEMA,
        "command": command,
        "problem": cfg.problem.name(),
        "config": cfg.echo,
        "mesh": {
            "hash": mesh.content_hash(),
            "nodes": mesh.node_count(),
            "triangles": mesh.triangle_count(),
            "boundary_edges": mesh.boundary_edges().len(),
        },
        "space": { "order": cfg.order.degree(), "dofs": dofs },
    })
}

fn theta_of(cfg: &RunConfig) -> Result<Option<VectorField>> {
    cfg.theta.as_ref().map(|t| t.build()).transpose()
}

fn field_file(cfg: &RunConfig, mesh: &Mesh, coeffs: Vec<f64>) -> String {
    FieldFile { order: cfg.order.degree(), mesh_hash: mesh.content_hash(), coeffs }.to_text()
}

/// State and adjoint (and the material derivative when `[theta]` is given) as field files.
pub fn solve(cfg: &RunConfig) -> Result<CommandOutput> {
    let (mesh, setup) = build(cfg)?;
    let theta = theta_of(cfg)?;
    let mut fields: Vec<(String, Vec<f64>)>;
    let (cost, dofs) = match &setup {
        Setup::Pde(pb) => {
            fields = pb.solution_fields();
            if let Some(theta) = &theta {
                if let Some(material) = analyze_discrete(pb.as_ref(), theta)?.material {
                    let single = material.len() == 1;
                    for (k, v) in material.into_iter().enumerate() {
                        fields.push((if single { "udot".into() } else { format!("udot_{k:04}") }, v));
                    }
                }
            }
            (Some(pb.cost_on(&mesh)?), pb.discretization().dof_count())
        }
        Setup::Manufactured(m) => {
            fields = vec![
                ("u".into(), m.space.interpolate(|x| m.fields.u.value(x)).coeffs),
                ("p".into(), m.space.interpolate(|x| m.fields.p.value(x)).coeffs),
            ];
            (None, m.space.dof_count())
        }
    };
    let mut report = header(cfg, "solve", &mesh, dofs);
    report["cost"] = cost.into();
    report["fields"] = fields.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>().into();
    let mut files = vec![("mesh.msh".to_string(), mesh.to_text())];
    for (name, coeffs) in fields {
        files.push((format!("{name}.field"), field_file(cfg, &mesh, coeffs)));
    }
    if cfg.output.json {
        files.push(("solve.json".into(), json_text(&report)?));
    }
    Ok(CommandOutput { files, report, passed: true })
}

/// Shape derivative with its finite-difference check; `full` adds the Taylor and dual-form checks.
pub fn derive(cfg: &RunConfig, full: bool) -> Result<CommandOutput> {
    let command = if full { "validate" } else { "derive" };
    let theta = theta_of(cfg)?.ok_or_else(|| Error::Config(format!("{command} needs a [theta] section")))?;
    let (mesh, setup) = build(cfg)?;
    let v = &cfg.validation;
    let mut checks: Vec<Check> = Vec::new();
    let mut csv = Vec::new();
    let mut report;
    match &setup {
        Setup::Pde(pb) => {
            let pb = pb.as_ref();
            report = header(cfg, command, &mesh, pb.discretization().dof_count());
            let analysis = analyze_discrete(pb, &theta)?;
            let analytic = pb.analyze(&theta)?;
            let table = fd_table(pb, &theta, &v.s_list, v.flow_steps, analysis.dj.total())?;
            checks.extend(table.assess(&v.fd));
            if let Some(d) = &analysis.duality {
                checks.push(Check::at_most("duality_rel_gap", Some(d.rel_gap), v.max_duality_gap));
            }
            let dual_form = relative_difference(analysis.dj.total(), analysis.raw);
            let mut taylor = None;
            if full {
                checks.push(Check::at_most("dual_form_rel_gap", Some(dual_form), v.max_dual_form_gap));
                if let Some(material) = &analysis.material {
                    taylor = material_taylor_check(pb, &theta, &v.s_list, v.flow_steps, material)?;
                }
                if let Some(t) = &taylor {
                    checks.push(t.assess(v.min_taylor_order));
                    csv.push(("taylor.csv".to_string(), taylor_csv(t)?));
                }
            }
            report["cost"] = table.j0.into();
            report["dj"] = dj_json(&analysis.dj);
            report["dj"]["velocity"] = "nodal_interpolant".into();
            report["dj_analytic_theta"] = dj_json(&analytic.dj);
            report["dual_form"] =
                json!({ "tensorized": analysis.dj.total(), "raw": analysis.raw, "rel_gap": dual_form });
            report["duality"] = serde_json::to_value(analysis.duality).expect("plain struct");
            report["taylor"] = serde_json::to_value(&taylor).expect("plain struct");
            csv.insert(0, ("dj.csv".to_string(), dj_csv(&analysis.dj)?));
            csv.insert(1, ("fd.csv".to_string(), fd_csv(&table, &v.fd)?));
            report["fd"] = serde_json::to_value(&table).expect("plain struct");
        }
        Setup::Manufactured(m) => {
            report = header(cfg, command, &mesh, m.space.dof_count());
            let (dj, raw) = m.dj(&theta)?;
            let dual_form = relative_difference(dj.total(), raw);
            let table = cost_transport_check(&m.fields, &m.space, &m.rule, &theta, &v.s_list, v.flow_steps)?;
            checks.extend(table.assess(&v.fd));
            if full {
                checks.push(Check::at_most("dual_form_rel_gap", Some(dual_form), v.max_dual_form_gap));
            }
            report["dj"] = dj_json(&dj);
            report["dj"]["velocity"] = "analytic".into();
            report["dual_form"] = json!({ "tensorized": dj.total(), "raw": raw, "rel_gap": dual_form });
            report["cost_transport"] = json!({ "derivative": table.dj, "fd": table });
            csv.push(("dj.csv".to_string(), dj_csv(&dj)?));
            csv.push(("fd.csv".to_string(), fd_csv(&table, &v.fd)?));
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    report["theta"] = json!({
        "field": theta.name(),
        "params": theta.params(),
        "support": cfg.theta.as_ref().and_then(|t| t.support),
    });
    report["validation"] = serde_json::to_value(v).expect("plain struct");
    report["checks"] = serde_json::to_value(&checks).expect("plain struct");
    report["passed"] = passed.into();
    csv.push(("checks.csv".to_string(), checks_csv(&checks)?));

    let mut files = Vec::new();
    if cfg.output.json {
        files.push((format!("{command}.json"), json_text(&report)?));
    }
    if cfg.output.csv {
        files.extend(csv);
    }
    Ok(CommandOutput { files, report, passed })
}
