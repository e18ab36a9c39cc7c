//! Parses a scenario from TOML and runs it the same way the command-line tool
//! does, without writing files.

use pilot_wave::runs::{run as run_command, Command};
use pilot_wave::scenario::parse_scenario;

const SCENARIO: &str = r#"
seed = 4

[grid]
points = 128
length = 30.0

[initial]
kind = "gaussian"
packets = [{ center = [-3.0], width = 1.0, momentum = [1.0] }]

[potential]
kind = "harmonic"
omega = 0.5
center = [0.0]

[integrator]
dt = 1e-2
steps = 200
record_every = 20

[particles]
count = 4
"#;

pub fn run() -> pilot_wave::Result<()> {
    let scenario = parse_scenario(SCENARIO)?;
    for command in [Command::Solve, Command::Trajectories] {
        let out = run_command(command, &scenario)?;
        println!("{}:", command.name());
        for inv in &out.invariants {
            println!("  {} = {:.2e} (tolerance {:.0e}) {}", inv.name, inv.value, inv.tolerance, if inv.pass { "ok" } else { "FAIL" });
        }
        for (name, table) in &out.tables {
            println!("  {name}: {} rows", table.rows().len());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> pilot_wave::Result<()> {
    run()
}
