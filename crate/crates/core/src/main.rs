//! `shapegrad` command-line tool.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
//! 4 validation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shapegrad::config::{MeshSpec, RunConfig};
use shapegrad::io::write_atomic;
use shapegrad::pipeline::{self, CommandOutput};
use shapegrad::tensor::Vec2;
use shapegrad::{Error, Result};

const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(name = "shapegrad", version, about = "Distributed shape derivatives with finite-difference validation")]
struct Cli {
    /// Run configuration (INI).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved; every run is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh from flags or from the `[mesh]` section of the config.
    Mesh(MeshArgs),
    /// Solve the state and adjoint equations and write field files.
    Solve,
    /// Assemble the shape derivative and check it against finite differences.
    Derive,
    /// Run every applicable check.
    Validate,
}

#[derive(Args)]
struct MeshArgs {
    /// Structured disk.
    #[arg(long, conflicts_with = "rect")]
    disk: bool,
    #[arg(long, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true, requires = "disk")]
    center: Option<Vec<f64>>,
    #[arg(long, requires = "disk")]
    radius: Option<f64>,
    #[arg(long, requires = "disk")]
    refine: Option<usize>,
    /// Crossed rectangle with corners (X0, Y0) and (X1, Y1).
    #[arg(long, num_args = 4, value_names = ["X0", "Y0", "X1", "Y1"], allow_negative_numbers = true)]
    rect: Option<Vec<f64>>,
    #[arg(long, requires = "rect")]
    nx: Option<usize>,
    #[arg(long, requires = "rect")]
    ny: Option<usize>,
    /// Output file (default `<out>/mesh.msh`).
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

fn mesh_spec(args: &MeshArgs, cfg: Option<&RunConfig>) -> Result<MeshSpec> {
    if args.disk {
        let c = args.center.as_deref().unwrap_or(&[0.0, 0.0]);
        return Ok(MeshSpec::Disk {
            center: Vec2::xy(c[0], c[1]),
            radius: args.radius.unwrap_or(1.0),
            refine: args.refine.unwrap_or(4),
        });
    }
    if let Some(r) = &args.rect {
        return Ok(MeshSpec::Rect {
            corners: [r[0], r[1], r[2], r[3]],
            nx: args.nx.unwrap_or(16),
            ny: args.ny.unwrap_or(16),
        });
    }
    cfg.map(|c| c.mesh.clone())
        .ok_or_else(|| Error::Config("mesh: give --disk, --rect or a --config with a [mesh] section".into()))
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out.clone().or_else(|| cfg.and_then(|c| c.output.dir.clone())).unwrap_or_else(|| PathBuf::from("."))
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in files {
        write_atomic(&dir.join(name), text.as_bytes())?;
        log::info!("wrote {}", dir.join(name).display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let cfg = cli.config.as_deref().map(RunConfig::load).transpose()?;
    if let Command::Mesh(args) = &cli.command {
        let mesh = mesh_spec(args, cfg.as_ref())?.build()?;
        let path = args.output.clone().unwrap_or_else(|| out_dir(cli, cfg.as_ref()).join("mesh.msh"));
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        write_atomic(&path, mesh.to_text().as_bytes())?;
        println!("{}: {} nodes, {} triangles", path.display(), mesh.node_count(), mesh.triangle_count());
        return Ok(0);
    }
    let cfg = cfg.ok_or_else(|| Error::Config("--config is required".into()))?;
    let out: CommandOutput = match cli.command {
        Command::Solve => pipeline::solve(&cfg)?,
        Command::Derive => pipeline::derive(&cfg, false)?,
        Command::Validate => pipeline::derive(&cfg, true)?,
        Command::Mesh(_) => unreachable!(),
    };
    write_all(&out_dir(cli, Some(&cfg)), &out.files)?;
    if let Some(total) = out.report["dj"]["total"].as_f64() {
        println!("dJ = {total:.16e}");
    }
    if let Some(checks) = out.report["checks"].as_array() {
        for c in checks {
            let verdict = if c["passed"].as_bool() == Some(true) { "pass" } else { "FAIL" };
            println!("{verdict} {} = {} (threshold {})", c["name"].as_str().unwrap_or(""), c["value"], c["threshold"]);
        }
    }
    Ok(if out.passed { 0 } else { EXIT_VALIDATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHAPEGRAD_LOG", "info")).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
