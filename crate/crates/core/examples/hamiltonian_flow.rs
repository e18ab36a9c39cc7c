//! RK4 on the total Hamiltonian flow: a Gaussian packet stays on the
//! constraint surface while it moves.

use num_complex::Complex64;
use pilot_wave::constraints::FieldPhaseSpaceState;
use pilot_wave::flow::{evolve_extended, total_hamiltonian, HamiltonianSpec, Potential};
use pilot_wave::{ComplexLatticeField, DerivativeMethod, GridSpec};

pub fn run() -> pilot_wave::Result<()> {
    let grid = GridSpec::periodic_1d(128, 20.0)?;
    let psi = ComplexLatticeField::from_fn(grid, |x| Complex64::new(-x[0] * x[0] / 2.0, 1.5 * x[0]).exp()).normalized()?;
    let h = HamiltonianSpec::single(&grid, 1.0, 1.0, Potential::zero(&grid), DerivativeMethod::FiniteDifference);
    let s0 = FieldPhaseSpaceState::on_constraint(psi, 1.0);
    let flow = evolve_extended(&s0, &h, 1e-3, 500, 100)?;
    for s in &flow.states {
        println!(
            "t = {:.2}  norm = {:.12}  H_T = {:.10}",
            s.time,
            s.psi.norm(),
            total_hamiltonian(s, &h)?.re
        );
    }
    println!("max constraint residual {:.2e}", flow.max_constraint_residual);
    Ok(())
}

#[allow(dead_code)]
fn main() -> pilot_wave::Result<()> {
    run()
}
