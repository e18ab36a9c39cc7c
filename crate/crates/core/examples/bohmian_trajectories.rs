//! Guided particles in a two-packet interference pattern. Trajectories never
//! cross, so their order at the end matches the order they started in.

use num_complex::Complex64;
use pilot_wave::guidance::{integrate_trajectory, NodePolicy, WaveFrames};
use pilot_wave::solver::SplitStep;
use pilot_wave::{ComplexLatticeField, DerivativeMethod, GridSpec, Units};

pub fn run() -> pilot_wave::Result<()> {
    let grid = GridSpec::periodic_1d(256, 40.0)?;
    let psi = ComplexLatticeField::from_fn(grid, |x| {
        let a = Complex64::new(-(x[0] + 4.0).powi(2) / 2.0, x[0]).exp();
        let b = Complex64::new(-(x[0] - 4.0).powi(2) / 2.0, -x[0]).exp();
        a + b
    })
    .normalized()?;
    let dt = 1e-2;
    let solver = SplitStep::new(grid, &vec![0.0; grid.sites()], &[1.0], Units::default(), dt, DerivativeMethod::Spectral)?;
    let mut frames = vec![(0.0, psi.clone())];
    let mut current = psi;
    for n in 1..=400 {
        solver.step(&mut current)?;
        if n % 5 == 0 {
            frames.push((n as f64 * dt, current.clone()));
        }
    }
    let wf = WaveFrames::new(&frames, 1.0, &[1.0], DerivativeMethod::Spectral)?;
    let starts = [-5.0, -4.5, -4.0, -3.5, 3.5, 4.0, 4.5, 5.0];
    let mut ends = Vec::new();
    for &x0 in &starts {
        let tr = integrate_trajectory(&wf, &[x0], 1e-2, NodePolicy::Shrink)?;
        println!("x0 = {x0:5.2} -> x(T) = {:8.4}  node events {}", tr.final_position()[0], tr.node_events.len());
        ends.push(tr.final_position()[0]);
    }
    println!("order preserved: {}", ends.windows(2).all(|w| w[0] < w[1]));
    Ok(())
}

#[allow(dead_code)]
fn main() -> pilot_wave::Result<()> {
    run()
}
