//! Coherent states of a free scalar field: mode centres rotate at their
//! frequencies and the guided coordinates ride along with them.

use num_complex::Complex64;
use pilot_wave::scalar_field::{evolve_coupled_modes, reconstruct_field, GaussianModeState, ModeParticleState, ModeSet};

pub fn run() -> pilot_wave::Result<()> {
    let modes = ModeSet::new(2.0 * std::f64::consts::PI, 1.0, 3)?;
    let centers: Vec<Complex64> = (0..modes.len()).map(|k| Complex64::new(0.4 / (k + 1) as f64, 0.1)).collect();
    let state = GaussianModeState::coherent(&modes, &centers)?;
    let traj = evolve_coupled_modes(&state, &ModeParticleState::at(state.centers()), 1e-3, 2000, 500)?;
    let xs: Vec<f64> = (0..8).map(|i| i as f64 * modes.length() / 8.0).collect();
    for (t, p) in traj.times.iter().zip(&traj.particles) {
        let phi = reconstruct_field(&modes, &modes.expand(&p.q)?, &xs)?;
        let shown: Vec<String> = phi.iter().map(|v| format!("{v:+.3}")).collect();
        println!("t = {t:.1}  phi = [{}]", shown.join(", "));
    }
    println!("largest mode momentum {:.1e}", traj.max_momentum);
    Ok(())
}

#[allow(dead_code)]
fn main() -> pilot_wave::Result<()> {
    run()
}
