//! `afw3d`: mesh generation, verification suites, stability studies and convergence runs.

mod checks;
mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Outcome, RunError};
use config::{Flags, RunConfig};

#[derive(Parser)]
#[command(name = "afw3d", version, about = "Mixed elasticity with weak symmetry on tetrahedra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        action: MeshAction,
    },
    /// Verification suites.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Inf-sup constant, kernel coercivity and least-norm construction over refinement levels.
    Infsup,
    /// Solves the manufactured sine problem once.
    Solve,
    /// Convergence study of the manufactured sine problem over refinement levels.
    Converge,
}

#[derive(Subcommand)]
enum MeshAction {
    /// Writes the configured mesh and its order map.
    Gen,
}

#[derive(Subcommand)]
enum Suite {
    /// Algebraic and differential identities on S1, S2 and the compliance.
    Tensor,
    /// Dimensions and traces of the reference spaces.
    Spaces,
    /// Commuting diagrams on the configured mesh and orders.
    Commute,
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<Outcome, RunError> {
    match &cli.command {
        Command::Mesh { action: MeshAction::Gen } => commands::mesh_gen(cfg),
        Command::Verify { suite } => match suite {
            Suite::Tensor => commands::verify_tensor(cfg),
            Suite::Spaces => commands::verify_spaces(cfg),
            Suite::Commute => commands::verify_commute(cfg),
        },
        Command::Infsup => commands::infsup(cfg),
        Command::Solve => commands::solve(cfg),
        Command::Converge => commands::converge(cfg),
    }
}

fn write(cfg: &RunConfig, outcome: &Outcome) -> Result<(), RunError> {
    let io = |path: &std::path::Path| {
        let path = path.display().to_string();
        move |source| RunError::Io { path, source }
    };
    std::fs::create_dir_all(&cfg.out).map_err(io(&cfg.out))?;
    let mut files = vec![
        (format!("{}.csv", outcome.kind), outcome.csv.clone()),
        (format!("{}.json", outcome.kind), outcome.json(cfg)),
    ];
    files.extend(outcome.extra.iter().map(|(n, s)| (n.to_string(), s.clone())));
    for (name, text) in files {
        let path = cfg.out.join(name);
        std::fs::write(&path, text).map_err(io(&path))?;
    }
    Ok(())
}

fn print_summary(outcome: &Outcome) {
    println!("{}", outcome.kind);
    for line in &outcome.summary {
        println!("  {line}");
    }
    for c in &outcome.checks {
        println!(
            "  {:<44} {:>14.6e} {} {:<12.3e} {}",
            c.name,
            c.value,
            c.relation,
            c.threshold,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::resolve(&cli.flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match run(&cli, &cfg).and_then(|o| write(&cfg, &o).map(|()| o)) {
        Ok(o) => o,
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    print_summary(&outcome);
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        for c in outcome.checks.iter().filter(|c| !c.pass) {
            eprintln!("check failed: {} = {:e} (required {} {:e})", c.name, c.value, c.relation, c.threshold);
        }
        ExitCode::from(1)
    }
}
