use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nonlocal_fem::cli::{cmd_run, cmd_sweep, exit_code, parse_child_mesh_target, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "nonlocal-fem", version, about = "Two-scale finite elements for nonlocal plane elasticity")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for assembly (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write the child mesh of parent element E at Gauss point G.
    #[arg(long, global = true, value_name = "E:G")]
    dump_child_mesh: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and export the field.
    Run { config: PathBuf },
    /// Run a refinement or complexity sweep.
    Sweep { config: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = (|| {
        let overrides = Overrides {
            workers: args.workers,
            out: args.out.clone(),
            dump_child_mesh: args.dump_child_mesh.as_deref().map(parse_child_mesh_target).transpose()?,
        };
        match &args.command {
            Command::Run { config } => cmd_run(&RunConfig::load(config)?, &overrides),
            Command::Sweep { config } => cmd_sweep(&RunConfig::load(config)?, &overrides),
        }
    })();
    match outcome {
        Ok(r) => {
            println!("wrote {}", r.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
