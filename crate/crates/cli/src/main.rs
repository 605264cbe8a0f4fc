use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand};

use codazzi::variation::Generator;
use codazzi::Harmonic;

mod pipeline;
mod tasks;

use tasks::{
    BoundaryParams, Context, GjmsParams, Outcome, QcurvParams, ScaleParams, SolveParams, Task,
    VaryMode, VaryParams, VolumeParams,
};

#[derive(Parser)]
#[command(
    name = "codazzi",
    version,
    about = "Invariants of strictly convex hypersurfaces from the Fefferman density"
)]
struct Cli {
    /// Pipeline config (TOML) for `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "CODAZZI_THREADS", default_value_t = 0)]
    threads: usize,
    /// Directory receiving all outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the Fefferman density of a surface.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Also apply the strict correction needed by P_3.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value = "density.json")]
        out: String,
    },
    /// Boundary geometry per node, with integrals in a JSON footer.
    Boundary {
        #[arg(long)]
        density: PathBuf,
        #[arg(long, default_value = "geometry.csv")]
        report: String,
    },
    /// Apply P_m to a combination of spherical harmonics.
    Gjms {
        #[arg(long)]
        density: PathBuf,
        #[arg(long)]
        m: usize,
        /// JSON list of {"l", "m", "coeff"}.
        #[arg(long)]
        input_harmonics: PathBuf,
        #[arg(long, default_value = "gjms.json")]
        out: String,
    },
    /// Q-curvature in the flat scale or a rescaled one.
    Qcurv {
        #[arg(long)]
        density: PathBuf,
        /// `flat`, or a JSON file listing the harmonics of the log-scale change.
        #[arg(long, default_value = "flat")]
        scale: String,
        #[arg(long, default_value = "q.json")]
        out: String,
    },
    /// Blaschke volume samples and the fitted expansion.
    Volume {
        #[arg(long)]
        density: PathBuf,
        /// Geometric grid `lo:hi:count`.
        #[arg(long, default_value = "0.02:0.3:24")]
        eps: String,
        #[arg(long, default_value = "vol.csv")]
        out: String,
    },
    /// Finite-difference variation checks along a deformation family.
    Vary {
        #[arg(long)]
        spec: PathBuf,
        /// JSON generator: {"kind": "harmonics", ...} or {"kind": "quadratic", ...}.
        #[arg(long)]
        generator: PathBuf,
        #[arg(long, value_enum)]
        mode: VaryMode,
        #[arg(long, default_value_t = 0.02)]
        h: f64,
        #[arg(long, default_value = "0.02:0.3:24")]
        eps: String,
        #[arg(long, default_value = "report.json")]
        out: String,
    },
    /// Run a pipeline config; exits nonzero unless every gate passes.
    Run,
}

fn read_harmonics(path: &Path) -> Result<Vec<Harmonic>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} is not a list of harmonics", path.display()))
}

fn execute(task: &dyn Task, out_dir: &Path) -> Result<Outcome> {
    task.check()?;
    let ctx = Context {
        base_dir: std::env::current_dir()?,
        ..Default::default()
    };
    let out = task.run(&ctx)?;
    std::fs::create_dir_all(out_dir)?;
    let mut stdout = std::io::stdout().lock();
    for a in &out.artifacts {
        let p = a.write(out_dir)?;
        let _ = writeln!(stdout, "wrote {}", p.display());
    }
    for (k, v) in &out.metrics {
        let _ = writeln!(stdout, "{k} = {}", codazzi::io::fmt_f64(*v));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<bool> {
    // the whole config is validated before any work starts
    let config = match (&cli.command, &cli.config) {
        (Command::Run, Some(path)) => Some((pipeline::load_config(path)?, path.clone())),
        (Command::Run, None) => bail!("`run` needs --config"),
        _ => None,
    };
    let threads = match &config {
        Some((cfg, _)) if cli.threads == 0 => cfg.threads.unwrap_or(0),
        _ => cli.threads,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    let out_dir = cli.out_dir.clone();
    match cli.command {
        Command::Solve {
            spec,
            order,
            strict,
            out,
        } => {
            let t = SolveParams {
                spec: None,
                spec_file: Some(spec),
                order,
                strict,
                output: Some(out),
            };
            execute(&t, &out_dir)?;
        }
        Command::Boundary { density, report } => {
            let t = BoundaryParams {
                density: None,
                density_file: Some(density),
                report: Some(report),
            };
            execute(&t, &out_dir)?;
        }
        Command::Gjms {
            density,
            m,
            input_harmonics,
            out,
        } => {
            let harmonics = read_harmonics(&input_harmonics)?;
            let t = GjmsParams {
                density: None,
                density_file: Some(density),
                m,
                harmonics,
                output: Some(out),
            };
            execute(&t, &out_dir)?;
        }
        Command::Qcurv {
            density,
            scale,
            out,
        } => {
            let scale = if scale == "flat" {
                ScaleParams::default()
            } else {
                ScaleParams {
                    upsilon: read_harmonics(Path::new(&scale))?,
                }
            };
            let t = QcurvParams {
                density: None,
                density_file: Some(density),
                scale,
                output: Some(out),
            };
            execute(&t, &out_dir)?;
        }
        Command::Volume { density, eps, out } => {
            let t = VolumeParams {
                density: None,
                density_file: Some(density),
                eps,
                scale: ScaleParams::default(),
                output: Some(out),
            };
            execute(&t, &out_dir)?;
        }
        Command::Vary {
            spec,
            generator,
            mode,
            h,
            eps,
            out,
        } => {
            let text = std::fs::read_to_string(&generator)
                .with_context(|| format!("reading {}", generator.display()))?;
            let generator = Generator::from_json_str(&text)?;
            let t = VaryParams {
                spec: None,
                spec_file: Some(spec),
                density: None,
                generator,
                mode,
                h,
                eps,
                output: Some(out),
            };
            execute(&t, &out_dir)?;
        }
        Command::Run => {
            let (cfg, path) = config.expect("loaded above");
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let report = pipeline::run_pipeline(&cfg, &base, &out_dir)?;
            println!("wrote {}", report.summary.display());
            if report.pass {
                println!("all gates pass");
            } else {
                println!("failed gates: {}", report.failed_gates.join(", "));
            }
            return Ok(report.pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
