use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shapegrad::io::FieldFile;
use shapegrad::mesh::Mesh;

fn shapegrad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapegrad"))
        .args(args)
        .env("SHAPEGRAD_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

fn field(dir: &Path, name: &str) -> FieldFile {
    FieldFile::from_text(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn disk_mesh_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("disk.msh");
    let o = shapegrad(&["mesh", "--disk", "--radius", "1", "--refine", "4", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mesh = Mesh::load(&out).unwrap();
    assert!((mesh.area() - std::f64::consts::PI).abs() < 0.05);
    assert!(String::from_utf8_lossy(&o.stdout).contains(&format!("{} nodes", mesh.node_count())));
}

#[test]
fn rect_mesh_has_documented_node_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = shapegrad(&[
        "--out",
        dir.path().to_str().unwrap(),
        "mesh",
        "--rect",
        "0",
        "0",
        "1",
        "1",
        "--nx",
        "8",
        "--ny",
        "8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mesh = Mesh::load(dir.path().join("mesh.msh")).unwrap();
    assert_eq!(mesh.node_count(), 9 * 9 + 8 * 8);
    assert_eq!(mesh.triangle_count(), 4 * 8 * 8);
}

#[test]
fn malformed_mesh_flags_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad.msh");
    let out = out.to_str().unwrap();
    for args in [
        vec!["mesh", "--disk", "--refine", "many", "-o", out],
        vec!["mesh", "--rect", "0", "0", "1", "-o", out],
        vec!["mesh", "--disk", "--rect", "0", "0", "1", "1", "-o", out],
        vec!["mesh", "--disk", "--radius", "-1", "-o", out],
        vec!["mesh", "--rect", "0", "0", "1", "1", "--nx", "0", "-o", out],
        vec!["mesh", "-o", out],
        vec!["mesh", "--frobnicate"],
    ] {
        let o = shapegrad(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!Path::new(out).exists(), "{args:?}");
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = shapegrad(&["--config", "/nonexistent/run.cfg", "validate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read config"));
    assert_eq!(shapegrad(&["solve"]).status.code(), Some(2));
}

#[test]
fn robin_constant_state_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[problem]\nkind = robin\n[mesh]\nrefine = 3\n[data]\nf = const 0\ng = const 1\nbeta = const 1\n",
    );
    let o = shapegrad(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let u = field(dir.path(), "u.field");
    let mesh = Mesh::load(dir.path().join("mesh.msh")).unwrap();
    u.check_matches(1, &mesh.content_hash(), mesh.node_count()).unwrap();
    assert!(u.coeffs.iter().all(|v| (v - 1.0).abs() <= 1e-10));
    assert!(dir.path().join("solve.json").exists());
}

#[test]
fn dirichlet_energy_adjoint_is_minus_twice_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[problem]\nkind = dirichlet_energy\n[mesh]\nrefine = 3\n[space]\norder = 2\n[theta]\nfield = bump\nparams = 0 0 0.8 0.2 0.1\n",
    );
    let o = shapegrad(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(0));
    let (u, p) = (field(dir.path(), "u.field"), field(dir.path(), "p.field"));
    assert_eq!(u.order, 2);
    let gap = u.coeffs.iter().zip(&p.coeffs).map(|(u, p)| (p + 2.0 * u).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-10, "{gap}");
    assert_eq!(field(dir.path(), "udot.field").coeffs.len(), u.coeffs.len());
}

#[test]
fn quasilinear_monotonicity_violation_names_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_cfg(dir.path(), "[problem]\nkind = quasilinear\n[mesh]\nrefine = 2\n[data]\nm = saturating 0.5 1 0\n");
    let o = shapegrad(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("c1 <= m"));
    assert!(!dir.path().join("u.field").exists());
}

#[test]
fn area_derive_passes_and_zero_theta_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    for (theta, expect_zero) in [("field = bump\nparams = 0.5 0 0.8 0.4 -0.3", false), ("field = zero", true)] {
        let cfg = write_cfg(
            dir.path(),
            &format!("[problem]\nkind = area\n[mesh]\nrefine = 4\n[theta]\n{theta}\n[validation]\nmax_extrapolated_gap = 1e-10\n"),
        );
        let o = shapegrad(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "derive"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("derive.json")).unwrap()).unwrap();
        assert_eq!(report["schema"], "shapegrad-report/1");
        assert_eq!(report["passed"], true);
        assert_eq!(report["dj"]["total"].as_f64().unwrap().abs() > 1e-6, !expect_zero);
    }
}

#[test]
fn loose_steps_exit_four_and_flag_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[problem]\nkind = robin\n[mesh]\nrefine = 1\n[theta]\nfield = bump\nparams = 0.2 -0.1 0.9 0.3 -0.2\n\
         [validation]\ns_list = 0.4 0.2\nmax_relative_gap = 1e-12\n",
    );
    let o = shapegrad(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "derive"]);
    assert_eq!(o.status.code(), Some(4));
    let fd = std::fs::read_to_string(dir.path().join("fd.csv")).unwrap();
    assert!(fd.starts_with("s,j_plus,j_minus,central,forward,"));
    assert!(fd.lines().skip(1).any(|l| l.contains(",fail,")));
}

#[test]
fn shipped_prop6_reports_dual_form_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/prop6-manufactured.cfg");
    let o = shapegrad(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("validate.json")).unwrap()).unwrap();
    assert!(report["dual_form"]["rel_gap"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn nonpositive_robin_coefficient_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "[problem]\nkind = robin\n[mesh]\nrefine = 2\n[data]\nbeta = const 0\n");
    let o = shapegrad(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not positive"));
}
