use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pilot_wave::output::{emit_outputs, Manifest};
use pilot_wave::runs::{run, Command};
use pilot_wave::scenario::{parse_scenario, Scenario};
use pilot_wave::Error;

#[derive(Parser)]
#[command(name = "pilotwave", version, about = "Pilot-wave simulations on a lattice")]
struct Cli {
    /// Directory for CSV, SVG and the run manifest
    #[arg(long, global = true, default_value = "pilotwave-out")]
    out_dir: PathBuf,
    /// Override the scenario seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the scenario hbar
    #[arg(long, global = true)]
    hbar: Option<f64>,
    /// Override the scenario particle mass
    #[arg(long, global = true)]
    mass: Option<f64>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario TOML file; defaults for the subcommand's sector if omitted
    scenario: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate the total-Hamiltonian flow of the field
    Evolve {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Also run Crank-Nicolson and record the L2 distance per frame
        #[arg(long)]
        compare_cn: bool,
    },
    /// Run the reference Schrodinger solver
    Solve(ScenarioArg),
    /// Guide particles through the solved wave function
    Trajectories(ScenarioArg),
    /// Carry a |psi|^2 ensemble and test it against |psi|^2
    Equivariance(ScenarioArg),
    /// Constraint algebra, Dirac brackets and constraint preservation
    CheckConstraints(ScenarioArg),
    /// Spinor currents, worldlines and the lattice Dirac check
    Dirac(ScenarioArg),
    /// Gaussian modes of a real scalar field with guided coordinates
    ScalarField(ScenarioArg),
}

impl Sub {
    fn split(&self) -> (Command, Option<&Path>) {
        match self {
            Sub::Evolve { scenario, compare_cn } => (
                Command::Evolve {
                    compare_cn: *compare_cn,
                },
                scenario.scenario.as_deref(),
            ),
            Sub::Solve(s) => (Command::Solve, s.scenario.as_deref()),
            Sub::Trajectories(s) => (Command::Trajectories, s.scenario.as_deref()),
            Sub::Equivariance(s) => (Command::Equivariance, s.scenario.as_deref()),
            Sub::CheckConstraints(s) => (Command::CheckConstraints, s.scenario.as_deref()),
            Sub::Dirac(s) => (Command::Dirac, s.scenario.as_deref()),
            Sub::ScalarField(s) => (Command::ScalarField, s.scenario.as_deref()),
        }
    }
}

fn load(cli: &Cli, command: Command, path: Option<&Path>) -> Result<Scenario, Error> {
    let mut scenario = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Validation {
                key: "scenario".into(),
                message: format!("cannot read {}: {e}", p.display()),
            })?;
            parse_scenario(&text)?
        }
        None => Scenario {
            sector: command.sector(),
            ..Scenario::default()
        },
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(hbar) = cli.hbar {
        scenario.units.hbar = hbar;
    }
    if let Some(mass) = cli.mass {
        scenario.units.mass = mass;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, path) = cli.command.split();
    let scenario = match load(&cli, command, path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut manifest = Manifest::new(command.name(), &scenario);
    let result = run(command, &scenario);
    let (output, code) = match result {
        Ok(out) => {
            let code = if out.all_pass() {
                0
            } else {
                manifest.status = "check-failed";
                3
            };
            (Some(out), code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            manifest.fail(if code == 2 { "invalid" } else { "numerical-failure" }, &e);
            (None, code)
        }
    };
    if cli.verbose > 0 {
        if let Some(out) = &output {
            for inv in &out.invariants {
                eprintln!(
                    "{} {}: {:.3e} (tolerance {:.3e})",
                    if inv.pass { "ok  " } else { "FAIL" },
                    inv.name,
                    inv.value,
                    inv.tolerance
                );
            }
            for note in &out.notes {
                eprintln!("note: {note}");
            }
        }
    }
    match emit_outputs(&cli.out_dir, manifest, output.as_ref()) {
        Ok(path) => {
            if cli.verbose > 0 {
                eprintln!("wrote {}", path.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if code == 0 { 1 } else { code as u8 });
        }
    }
    ExitCode::from(code as u8)
}
