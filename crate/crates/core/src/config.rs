//! Run configuration read from INI-style text.
//!
//! ```text
//! [problem]
//! kind = robin
//!
//! [mesh]
//! generator = disk
//! radius = 1
//! refine = 5
//!
//! [data]
//! M = 2 0 0 1
//! f = const 1
//!
//! [theta]
//! field = bump
//! params = 0.2 -0.1 0.9 0.3 -0.2
//! ```
//!
//! Scalar data are written as a catalog name followed by its parameters. Every
//! section and key is checked against the set the chosen problem understands, so
//! typos are reported instead of silently ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ini::Ini;
use serde::Serialize;

use crate::data::{Profile, ScalarData, TimeMatrix, TimeScalar};
use crate::elliptic::dirichlet_energy::DirichletEnergyData;
use crate::elliptic::quasilinear::{Diffusivity, Reaction};
use crate::elliptic::{QuasilinearData, RobinData};
use crate::error::{Error, Result};
use crate::fem::Order;
use crate::flow::{SupportBox, VectorField};
use crate::mesh::Mesh;
use crate::parabolic::{ParabolicData, DEFAULT_NT, DEFAULT_T0};
use crate::tensor::{Mat2, Vec2};
use crate::validation::{check_s_list, FdCriteria};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Robin,
    Quasilinear,
    DirichletEnergy,
    ParabolicJ1,
    ParabolicJ2,
    Prop5Manufactured,
    Prop6Manufactured,
    Area,
}

impl ProblemKind {
    pub const ALL: [(&'static str, ProblemKind); 8] = [
        ("robin", ProblemKind::Robin),
        ("quasilinear", ProblemKind::Quasilinear),
        ("dirichlet_energy", ProblemKind::DirichletEnergy),
        ("parabolic_j1", ProblemKind::ParabolicJ1),
        ("parabolic_j2", ProblemKind::ParabolicJ2),
        ("prop5_manufactured", ProblemKind::Prop5Manufactured),
        ("prop6_manufactured", ProblemKind::Prop6Manufactured),
        ("area", ProblemKind::Area),
    ];

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.iter().find(|(n, _)| *n == name).map(|(_, k)| *k).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("unknown problem kind '{name}', expected one of {}", names.join(", ")))
        })
    }

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, k)| *k == self).map(|(n, _)| *n).expect("listed")
    }

    fn data_keys(self) -> &'static [&'static str] {
        match self {
            ProblemKind::Robin => &["M", "beta", "f", "g"],
            ProblemKind::Quasilinear => &["m", "reaction", "g", "u_d", "bounds", "monotonicity_r"],
            ProblemKind::DirichletEnergy => &["f"],
            ProblemKind::ParabolicJ1 | ProblemKind::ParabolicJ2 => {
                &["M", "M_modulation", "f", "f_time", "g", "u_d", "u_d_time", "t0", "nt"]
            }
            ProblemKind::Prop5Manufactured | ProblemKind::Prop6Manufactured => &["fields"],
            ProblemKind::Area => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSpec {
    Disk { center: Vec2, radius: f64, refine: usize },
    Rect { corners: [f64; 4], nx: usize, ny: usize },
    File(PathBuf),
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match self {
            MeshSpec::Disk { center, radius, refine } => Mesh::disk(*center, *radius, *refine),
            MeshSpec::Rect { corners: [x0, y0, x1, y1], nx, ny } => Mesh::rectangle(*x0, *y0, *x1, *y1, *nx, *ny),
            MeshSpec::File(path) => Mesh::load(path),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSpec {
    pub field: String,
    pub params: Vec<f64>,
    /// `lo_x lo_y hi_x hi_y width`.
    pub support: Option<[f64; 5]>,
}

impl ThetaSpec {
    pub fn build(&self) -> Result<VectorField> {
        let support = match self.support {
            Some([a, b, c, d, w]) => Some(SupportBox::new(Vec2::xy(a, b), Vec2::xy(c, d), w)?),
            None => None,
        };
        VectorField::from_catalog(&self.field, &self.params, support)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationSpec {
    pub s_list: Vec<f64>,
    pub flow_steps: usize,
    pub fd: FdCriteria,
    pub max_duality_gap: f64,
    pub min_taylor_order: f64,
    pub max_dual_form_gap: f64,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec {
            s_list: vec![0.02, 0.01, 0.005],
            flow_steps: 32,
            fd: FdCriteria {
                min_central_order: Some(1.9),
                min_forward_order: None,
                max_relative_gap: None,
                max_extrapolated_gap: None,
            },
            max_duality_gap: 1e-9,
            min_taylor_order: 1.9,
            max_dual_form_gap: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub json: bool,
    pub csv: bool,
}

/// Every section as written, for echoing into reports.
pub type ConfigEcho = BTreeMap<String, BTreeMap<String, String>>;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub mesh: MeshSpec,
    pub order: Order,
    pub data: BTreeMap<String, String>,
    pub theta: Option<ThetaSpec>,
    pub validation: ValidationSpec,
    pub output: OutputSpec,
    pub echo: ConfigEcho,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("problem", &["kind"]),
    ("mesh", &["generator", "center", "radius", "refine", "rect", "nx", "ny", "path"]),
    ("space", &["order"]),
    ("data", &[]),
    ("theta", &["field", "params", "support"]),
    (
        "validation",
        &[
            "s_list",
            "flow_steps",
            "min_central_order",
            "min_forward_order",
            "max_relative_gap",
            "max_extrapolated_gap",
            "max_duality_gap",
            "min_taylor_order",
            "max_dual_form_gap",
        ],
    ),
    ("output", &["dir", "formats"]),
];

fn cfg_err(section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("[{section}] {key}: {msg}"))
}

pub fn numbers(section: &str, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| cfg_err(section, key, format!("'{t}' is not a finite number")))
        })
        .collect()
}

fn fixed<const N: usize>(section: &str, key: &str, value: &str) -> Result<[f64; N]> {
    let v = numbers(section, key, value)?;
    v.try_into().map_err(|v: Vec<f64>| cfg_err(section, key, format!("expected {N} numbers, got {}", v.len())))
}

fn number(section: &str, key: &str, value: &str) -> Result<f64> {
    Ok(fixed::<1>(section, key, value)?[0])
}

fn count(section: &str, key: &str, value: &str) -> Result<usize> {
    value.trim().parse().map_err(|_| cfg_err(section, key, format!("'{value}' is not a non-negative integer")))
}

/// `name p1 p2 …` split into the catalog name and its parameters.
pub fn catalog_entry(section: &str, key: &str, value: &str) -> Result<(String, Vec<f64>)> {
    let mut it = value.split_whitespace();
    let name = it.next().ok_or_else(|| cfg_err(section, key, "empty value"))?;
    let rest: Vec<&str> = it.collect();
    Ok((name.to_string(), numbers(section, key, &rest.join(" "))?))
}

struct Sections<'a> {
    map: &'a ConfigEcho,
}

impl<'a> Sections<'a> {
    fn get(&self, section: &str, key: &str) -> Option<&'a str> {
        self.map.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn require(&self, section: &str, key: &str) -> Result<&'a str> {
        self.get(section, key).ok_or_else(|| cfg_err(section, key, "missing"))
    }
}

impl RunConfig {
    /// Parses configuration text; relative mesh paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text)
            .map_err(|e| Error::Parse { line: e.line + 1, message: e.msg.to_string() })?;
        let mut echo = ConfigEcho::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key '{k}' appears before any [section]")));
                }
                continue;
            };
            let allowed = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| Error::Config(format!("unknown section [{name}]")))?
                .1;
            let entry = echo.entry(name.to_string()).or_default();
            for (k, v) in props.iter() {
                if name != "data" && !allowed.contains(&k) {
                    return Err(cfg_err(name, k, "unknown key"));
                }
                if entry.insert(k.to_string(), v.trim().to_string()).is_some() {
                    return Err(cfg_err(name, k, "given more than once"));
                }
            }
        }
        let s = Sections { map: &echo };

        let problem = ProblemKind::parse(s.require("problem", "kind")?)?;
        let mesh = match s.get("mesh", "generator").unwrap_or("disk") {
            "disk" => MeshSpec::Disk {
                center: s
                    .get("mesh", "center")
                    .map(|v| fixed::<2>("mesh", "center", v))
                    .transpose()?
                    .map_or(Vec2::zero(), |[x, y]| Vec2::xy(x, y)),
                radius: s.get("mesh", "radius").map(|v| number("mesh", "radius", v)).transpose()?.unwrap_or(1.0),
                refine: s.get("mesh", "refine").map(|v| count("mesh", "refine", v)).transpose()?.unwrap_or(4),
            },
            "rect" => MeshSpec::Rect {
                corners: s
                    .get("mesh", "rect")
                    .map(|v| fixed::<4>("mesh", "rect", v))
                    .transpose()?
                    .unwrap_or([0.0, 0.0, 1.0, 1.0]),
                nx: s.get("mesh", "nx").map(|v| count("mesh", "nx", v)).transpose()?.unwrap_or(16),
                ny: s.get("mesh", "ny").map(|v| count("mesh", "ny", v)).transpose()?.unwrap_or(16),
            },
            "file" => MeshSpec::File(base_dir.join(s.require("mesh", "path")?)),
            other => {
                return Err(cfg_err(
                    "mesh",
                    "generator",
                    format!("unknown generator '{other}', expected disk, rect or file"),
                ))
            }
        };
        let order = match s.get("space", "order") {
            Some(v) => Order::from_degree(count("space", "order", v)?).map_err(|e| cfg_err("space", "order", e))?,
            None => Order::P1,
        };
        let data = echo.get("data").cloned().unwrap_or_default();
        for k in data.keys() {
            if !problem.data_keys().contains(&k.as_str()) {
                return Err(cfg_err("data", k, format!("not used by problem '{}'", problem.name())));
            }
        }
        let theta = match echo.get("theta") {
            Some(_) => Some(ThetaSpec {
                field: s.require("theta", "field")?.to_string(),
                params: s
                    .get("theta", "params")
                    .map(|v| numbers("theta", "params", v))
                    .transpose()?
                    .unwrap_or_default(),
                support: s.get("theta", "support").map(|v| fixed::<5>("theta", "support", v)).transpose()?,
            }),
            None => None,
        };
        if let Some(t) = &theta {
            t.build().map_err(|e| cfg_err("theta", "field", e))?;
        }

        let mut validation = ValidationSpec::default();
        let opt = |key: &str| s.get("validation", key).map(|v| number("validation", key, v)).transpose();
        if let Some(v) = s.get("validation", "s_list") {
            validation.s_list = numbers("validation", "s_list", v)?;
            check_s_list(&validation.s_list).map_err(|e| cfg_err("validation", "s_list", e))?;
        }
        if let Some(v) = s.get("validation", "flow_steps") {
            validation.flow_steps = count("validation", "flow_steps", v)?;
            if validation.flow_steps == 0 {
                return Err(cfg_err("validation", "flow_steps", "must be positive"));
            }
        }
        let fd = &mut validation.fd;
        fd.min_central_order = opt("min_central_order")?.or(fd.min_central_order);
        fd.min_forward_order = opt("min_forward_order")?.or(fd.min_forward_order);
        fd.max_relative_gap = opt("max_relative_gap")?.or(fd.max_relative_gap);
        fd.max_extrapolated_gap = opt("max_extrapolated_gap")?.or(fd.max_extrapolated_gap);
        validation.max_duality_gap = opt("max_duality_gap")?.unwrap_or(validation.max_duality_gap);
        validation.min_taylor_order = opt("min_taylor_order")?.unwrap_or(validation.min_taylor_order);
        validation.max_dual_form_gap = opt("max_dual_form_gap")?.unwrap_or(validation.max_dual_form_gap);

        let mut output = OutputSpec { dir: s.get("output", "dir").map(|d| base_dir.join(d)), json: true, csv: true };
        if let Some(formats) = s.get("output", "formats") {
            output.json = false;
            output.csv = false;
            for f in formats.split_whitespace() {
                match f {
                    "json" => output.json = true,
                    "csv" => output.csv = true,
                    other => return Err(cfg_err("output", "formats", format!("unknown format '{other}'"))),
                }
            }
        }

        let cfg = RunConfig { problem, mesh, order, data, theta, validation, output, echo };
        cfg.check_data()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Builds every data object once so catalog and invariant errors surface at load time.
    fn check_data(&self) -> Result<()> {
        match self.problem {
            ProblemKind::Robin => self.robin().map(drop),
            ProblemKind::Quasilinear => self.quasilinear().map(drop),
            ProblemKind::DirichletEnergy => self.dirichlet_energy().map(drop),
            ProblemKind::ParabolicJ1 | ProblemKind::ParabolicJ2 => self.parabolic().map(drop),
            ProblemKind::Prop5Manufactured | ProblemKind::Prop6Manufactured => match self.data.get("fields") {
                Some(v) if v != "default" => {
                    Err(cfg_err("data", "fields", format!("unknown manufactured field set '{v}'")))
                }
                _ => Ok(()),
            },
            ProblemKind::Area => Ok(()),
        }
    }

    fn scalar(&self, key: &str, default: ScalarData) -> Result<ScalarData> {
        match self.data.get(key) {
            Some(v) => {
                let (name, params) = catalog_entry("data", key, v)?;
                ScalarData::from_catalog(&name, &params).map_err(|e| cfg_err("data", key, e))
            }
            None => Ok(default),
        }
    }

    fn profile(&self, key: &str) -> Result<Profile> {
        match self.data.get(key) {
            Some(v) => {
                let (name, params) = catalog_entry("data", key, v)?;
                Profile::from_catalog(&name, &params).map_err(|e| cfg_err("data", key, e))
            }
            None => Ok(Profile::Const),
        }
    }

    fn matrix(&self, key: &str) -> Result<Mat2> {
        match self.data.get(key) {
            Some(v) => {
                let [a, b, c, d] = fixed::<4>("data", key, v)?;
                Ok(Mat2::new([[a, b], [c, d]]))
            }
            None => Ok(Mat2::identity()),
        }
    }

    fn value(&self, key: &str, default: f64) -> Result<f64> {
        self.data.get(key).map(|v| number("data", key, v)).transpose().map(|v| v.unwrap_or(default))
    }

    pub fn robin(&self) -> Result<RobinData> {
        RobinData::new(
            self.matrix("M")?,
            self.scalar("beta", ScalarData::constant(1.0))?,
            self.scalar("f", ScalarData::constant(1.0))?,
            self.scalar("g", ScalarData::zero())?,
        )
    }

    /// Quasilinear data and the `r` range of the monotonicity scan.
    pub fn quasilinear(&self) -> Result<(QuasilinearData, f64)> {
        let mut data = QuasilinearData::catalog_example(
            self.scalar("g", ScalarData::zero())?,
            self.scalar("u_d", ScalarData::constant(0.1))?,
        );
        if let Some(v) = self.data.get("m") {
            let (name, p) = catalog_entry("data", "m", v)?;
            match (name.as_str(), p.as_slice()) {
                ("saturating", &[a, b, c]) => data.m = Diffusivity { a, b, c },
                _ => return Err(cfg_err("data", "m", "expected 'saturating a b c'")),
            }
        }
        if let Some(v) = self.data.get("reaction") {
            let (name, p) = catalog_entry("data", "reaction", v)?;
            match (name.as_str(), p.as_slice()) {
                ("linear_sin", &[k, e]) => data.f = Reaction { k, e },
                _ => return Err(cfg_err("data", "reaction", "expected 'linear_sin k e'")),
            }
        }
        if let Some(v) = self.data.get("bounds") {
            data.bounds = fixed::<3>("data", "bounds", v)?;
        }
        let r_max = self.value("monotonicity_r", 10.0)?;
        if !(r_max > 0.0) {
            return Err(cfg_err("data", "monotonicity_r", "must be positive"));
        }
        Ok((data, r_max))
    }

    pub fn dirichlet_energy(&self) -> Result<DirichletEnergyData> {
        Ok(DirichletEnergyData { f: self.scalar("f", ScalarData::constant(1.0))? })
    }

    pub fn parabolic(&self) -> Result<ParabolicData> {
        let m = match self.data.get("M_modulation") {
            Some(v) => {
                let [tau, amp, k1, k2] = fixed::<4>("data", "M_modulation", v)?;
                TimeMatrix::scaled(self.matrix("M")?, tau, amp, Vec2::xy(k1, k2))?
            }
            None => TimeMatrix::constant(self.matrix("M")?)?,
        };
        let nt = match self.data.get("nt") {
            Some(v) => count("data", "nt", v)?,
            None => DEFAULT_NT,
        };
        let data = ParabolicData {
            m,
            f: TimeScalar { profile: self.profile("f_time")?, space: self.scalar("f", ScalarData::constant(1.0))? },
            g: self.scalar("g", ScalarData::zero())?,
            u_d: TimeScalar { profile: self.profile("u_d_time")?, space: self.scalar("u_d", ScalarData::zero())? },
            t0: self.value("t0", DEFAULT_T0)?,
            nt,
        };
        data.validate()?;
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("/cfg"))
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse("[problem]\nkind = area\n").unwrap();
        assert_eq!(cfg.problem, ProblemKind::Area);
        assert_eq!(cfg.mesh, MeshSpec::Disk { center: Vec2::zero(), radius: 1.0, refine: 4 });
        assert_eq!(cfg.validation, ValidationSpec::default());
        assert!(cfg.theta.is_none());
    }

    #[test]
    fn full_robin_config() {
        let cfg = parse(
            "[problem]\nkind = robin\n[mesh]\ngenerator = rect\nrect = 0 0 2 1\nnx = 4\nny = 2\n[space]\norder = 2\n\
             [data]\nM = 2 0 0 1\nbeta = const 1\nf = sinsin 1 2 3\n[theta]\nfield = bump\nparams = 0 0 0.5 1 0\n\
             support = -1 -1 1 1 0.2\n[validation]\ns_list = 0.1 0.05\nmax_relative_gap = 1e-5\n[output]\ndir = out\nformats = csv\n",
        )
        .unwrap();
        assert_eq!(cfg.mesh, MeshSpec::Rect { corners: [0.0, 0.0, 2.0, 1.0], nx: 4, ny: 2 });
        assert_eq!(cfg.order, Order::P2);
        assert_eq!(cfg.robin().unwrap().m, Mat2::diag([2.0, 1.0]));
        assert_eq!(cfg.validation.s_list, vec![0.1, 0.05]);
        assert_eq!(cfg.validation.fd.max_relative_gap, Some(1e-5));
        assert_eq!(cfg.output.dir, Some(PathBuf::from("/cfg/out")));
        assert!(cfg.output.csv && !cfg.output.json);
        assert!(cfg.theta.unwrap().build().is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "[problem]\nkind = heat\n",
            "[problem]\nkind = area\n[mesh]\ngenerator = blob\n",
            "[problem]\nkind = area\n[mesh]\nradius = x\n",
            "[problem]\nkind = area\n[nonsense]\na = 1\n",
            "[problem]\nkind = area\ntypo = 1\n",
            "[problem]\nkind = robin\n[data]\nm = saturating 1 1 1\n",
            "[problem]\nkind = robin\n[data]\nf = nosuch 1\n",
            "[problem]\nkind = robin\n[data]\nf = const 1 2\n",
            "[problem]\nkind = robin\n[data]\nM = 1 2 0 1\n",
            "[problem]\nkind = area\n[validation]\ns_list = 0.01 0.02\n",
            "[problem]\nkind = area\n[theta]\nfield = bump\nparams = 1 2\n",
            "[problem]\nkind = area\n[output]\nformats = xml\n",
            "[problem]\nkind = parabolic_j1\n[data]\nnt = 0\n",
            "[problem]\n",
            "kind = area\n",
        ];
        for text in bad {
            let e = parse(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }

    #[test]
    fn comments_are_ignored() {
        let cfg = parse("# run\n[problem]\nkind = area ; volume\n[mesh]\nrefine = 2   # coarse\n; done\n").unwrap();
        assert_eq!(cfg.mesh, MeshSpec::Disk { center: Vec2::zero(), radius: 1.0, refine: 2 });
        assert_eq!(cfg.echo["mesh"]["refine"], "2");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        assert!(parse("[problem]\nkind = area\nkind = robin\n").is_err());
    }

    #[test]
    fn parabolic_profiles() {
        let cfg = parse(
            "[problem]\nkind = parabolic_j2\n[data]\nM_modulation = 0.5 0.3 2 1\nf_time = exp -1\nt0 = 0.5\nnt = 10\n",
        )
        .unwrap();
        let d = cfg.parabolic().unwrap();
        assert_eq!(d.nt, 10);
        assert_eq!(d.f.profile, Profile::Exp(-1.0));
        assert!(!d.m.is_constant());
    }
}
