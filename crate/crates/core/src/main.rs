use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use viscontact::io::{parse_config, write_run, ConfigError, IoError, RunConfig};
use viscontact::mesh::{build_notched_rectangle, build_rectangle, write_mesh, MeshError};
use viscontact::time::{solve, TimeError};
use viscontact::verification::{convergence_study, default_suite, format_csv, format_table};

#[derive(Parser)]
#[command(name = "viscontact", version, about = "Quasistatic viscoplastic self-contact solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Notched,
    Rectangle,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh file.
    Mesh {
        #[arg(long, value_enum, default_value = "notched")]
        preset: Preset,
        /// Geometry keys (`mesh.*`) are read from this file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        gap: Option<f64>,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation and write VTK snapshots plus a CSV time series.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `mesh.file`.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Overrides `out.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in verification checks.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Time-step convergence study of the configured problem.
    Study {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Decreasing time steps.
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025, 0.0125])]
        dts: Vec<f64>,
        #[arg(long, default_value_t = 0.003125)]
        ref_dt: f64,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Build(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Time(#[from] TimeError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Time(e) if e.is_nonconvergence() => 1,
            CliError::ChecksFailed(_) => 1,
            _ => 2,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Config from `path` (or defaults) and the directory relative paths in it
/// resolve against.
fn load_config(path: Option<&Path>) -> Result<(RunConfig, PathBuf), CliError> {
    match path {
        None => Ok((RunConfig::default(), PathBuf::from("."))),
        Some(p) => {
            let cfg = parse_config(&read(p)?).map_err(|source| CliError::Config {
                path: p.to_path_buf(),
                source,
            })?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
            Ok((cfg, base))
        }
    }
}

fn problem_from(config: Option<&Path>, mesh: Option<&Path>) -> Result<(RunConfig, viscontact::time::Problem), CliError> {
    let (mut cfg, mut base) = load_config(config)?;
    if let Some(m) = mesh {
        cfg.mesh_file = Some(m.to_path_buf());
        cfg.mesh_file_line = None;
        base = PathBuf::from(".");
    }
    let (m, warnings) = cfg.load_mesh(&base)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let problem = cfg.build_problem(m)?;
    Ok((cfg, problem))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Mesh {
            preset,
            config,
            resolution,
            gap,
            out,
        } => {
            let (cfg, _) = load_config(config.as_deref())?;
            let mut g = cfg.geometry;
            if let Some(r) = resolution {
                g.resolution = r;
            }
            if let Some(gap) = gap {
                g.gap = gap;
            }
            let mesh = match preset {
                Preset::Notched => build_notched_rectangle(&g)?,
                Preset::Rectangle => {
                    let ny = g.resolution;
                    let nx = ((g.width / g.height * ny as f64).round() as usize).max(1);
                    build_rectangle(g.width, g.height, nx, ny)?
                }
            };
            let text = write_mesh(&mesh);
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|source| IoError::File { path: p, source })?,
                None => print!("{text}"),
            }
        }
        Command::Solve { config, mesh, out } => {
            let (mut cfg, problem) = problem_from(config.as_deref(), mesh.as_deref())?;
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            print!("{}", cfg.to_text());
            let state = solve(&problem)?;
            let written = write_run(&cfg.out_dir, &cfg, &problem, &state)?;
            println!(
                "# {} time nodes, {} fixed-point iterations, final residual {:e}; wrote {} files to {}",
                state.n_nodes(),
                state.fp_iterations.iter().max().copied().unwrap_or(0),
                state.fp_residuals.last().copied().unwrap_or(0.0),
                written.len(),
                cfg.out_dir.display()
            );
        }
        Command::Verify { seed, csv } => {
            let reports = default_suite(seed)?;
            print!("{}", format_table(&reports));
            if let Some(p) = csv {
                std::fs::write(&p, format_csv(&reports)).map_err(|source| IoError::File { path: p, source })?;
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(CliError::ChecksFailed(failed));
            }
        }
        Command::Study {
            config,
            mesh,
            dts,
            ref_dt,
        } => {
            let (_, problem) = problem_from(config.as_deref(), mesh.as_deref())?;
            let study = convergence_study(&problem, &dts, ref_dt)?;
            let mut out = format!("{:>12} {:>14}\n", "dt", "error");
            for (dt, e) in study.dts.iter().zip(&study.errors) {
                let _ = writeln!(out, "{dt:>12.6} {e:>14.6e}");
            }
            let _ = writeln!(out, "observed order {:.3}", study.order);
            print!("{out}");
            println!("{}", study.report);
            if !study.report.passed {
                return Err(CliError::ChecksFailed(1));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
