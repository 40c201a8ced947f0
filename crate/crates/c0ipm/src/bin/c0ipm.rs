//! Command-line interface: run a configured problem, execute a named
//! preset, estimate the stabilization parameter, or inspect a mesh file.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
//! 3 acceptance-gate failure.

use c0ipm::config::{parse_config, ProblemSpec};
use c0ipm::error::Error;
use c0ipm::mesh::{build_connectivity, read_mesh};
use c0ipm::presets::{run_preset, PresetOutcome};
use c0ipm::refelem::ReferenceElement;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "c0ipm",
    about = "C0 interior penalty solver for flexoelectricity and strain gradient elasticity",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the problem described by a config file (its `preset` key picks
    /// the experiment).
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named preset with optional overrides.
    Preset {
        name: String,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = false)]
        deterministic: bool,
    },
    /// Estimate the stabilization parameter on the configured coarse mesh
    /// and print `lambda_max,alpha_equivalent,beta_recommended`.
    BetaEstimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a summary of a mesh file.
    MeshInfo { file: PathBuf },
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Numerical(_) | Error::Geometry(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn report(outcome: &PresetOutcome) -> ExitCode {
    for gate in &outcome.gates {
        println!(
            "[gate] {}: {} ({})",
            gate.name,
            if gate.passed { "PASS" } else { "FAIL" },
            gate.detail
        );
    }
    for path in &outcome.outputs {
        println!("[out] {}", path.display());
    }
    if outcome.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let spec = match parse_config(&config) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let name = match &spec.preset {
                Some(n) => n.clone(),
                None => {
                    eprintln!("error: config file does not name a preset");
                    return ExitCode::from(1);
                }
            };
            match run_preset(&name, &spec) {
                Ok(outcome) => report(&outcome),
                Err(e) => {
                    eprintln!("error in preset `{name}`: {e}");
                    exit_code_for(&e)
                }
            }
        }
        Command::Preset {
            name,
            p,
            levels,
            alpha,
            out,
            deterministic,
        } => {
            let mut spec = ProblemSpec::default();
            if let Some(p) = p {
                spec.degree = p;
            }
            if let Some(levels) = levels {
                spec.levels = levels;
            }
            if let Some(alpha) = alpha {
                spec.beta_mode = c0ipm::config::BetaMode::Formula { alpha };
            }
            if let Some(out) = out {
                spec.out_dir = out;
            }
            spec.deterministic = deterministic;
            match run_preset(&name, &spec) {
                Ok(outcome) => report(&outcome),
                Err(e) => {
                    eprintln!("error in preset `{name}`: {e}");
                    exit_code_for(&e)
                }
            }
        }
        Command::BetaEstimate { config } => {
            let spec = match parse_config(&config) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let material = spec.coupling.apply(&spec.material);
            match c0ipm::presets::estimate_on_coarse(&spec, &material) {
                Ok(est) => {
                    println!(
                        "{:.12e},{:.12e},{:.12e}",
                        est.lambda_max, est.alpha_equivalent, est.recommended_beta
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
        Command::MeshInfo { file } => match mesh_info(&file) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code_for(&e)
            }
        },
    }
}

fn mesh_info(file: &std::path::Path) -> c0ipm::Result<()> {
    let mesh = read_mesh(file)?;
    let re = ReferenceElement::new(mesh.shape, mesh.degree)?;
    let conn = build_connectivity(&mesh, &re)?;
    let (lo, hi) = mesh.bbox();
    println!("dim:            {}", mesh.dim);
    println!("degree:         {}", mesh.degree);
    println!("shape:          {:?}", mesh.shape);
    println!("nodes:          {}", mesh.n_nodes());
    println!("elements:       {}", mesh.n_elems());
    println!("interior faces: {}", conn.n_interior());
    println!("boundary faces: {}", conn.n_boundary());
    println!("tagged bfaces:  {}", mesh.bface_tags.len());
    println!("mesh size h:    {:.6e}", mesh.mesh_size(&re));
    print!("bbox:           [");
    for k in 0..mesh.dim {
        if k > 0 {
            print!(" x ");
        }
        print!("{:.4}, {:.4}", lo[k], hi[k]);
    }
    println!("]");
    Ok(())
}
