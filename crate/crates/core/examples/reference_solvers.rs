//! Crank-Nicolson against split-step on a displaced oscillator state.

use num_complex::Complex64;
use pilot_wave::solver::{energy, ReferenceSolver, SolverConfig, SolverMethod};
use pilot_wave::{ComplexLatticeField, DerivativeMethod, GridSpec, Units};

pub fn run() -> pilot_wave::Result<()> {
    let grid = GridSpec::periodic_1d(256, 20.0)?;
    let v: Vec<f64> = (0..grid.sites()).map(|i| 0.5 * grid.site_coordinates(i)[0].powi(2)).collect();
    let psi = ComplexLatticeField::from_fn(grid, |x| Complex64::new(-(x[0] - 1.0).powi(2) / 2.0, 0.0).exp()).normalized()?;
    let units = Units::default();
    let mut finals = Vec::new();
    for method in [SolverMethod::CrankNicolson, SolverMethod::SplitStep] {
        let mut config = SolverConfig::new(method, 1e-3)?;
        config.kinetic = DerivativeMethod::FiniteDifference;
        let solver = ReferenceSolver::new(grid, v.clone(), &[1.0], units, &config)?;
        let frames = solver.run(&psi, 1000, 1000)?;
        let (t, last) = frames.last().unwrap();
        println!(
            "{method:?}: t = {t:.1}  norm drift {:.1e}  energy {:.10}",
            (last.norm() - 1.0).abs(),
            energy(last, &v, &[1.0], units.hbar, DerivativeMethod::FiniteDifference)?
        );
        finals.push(last.clone());
    }
    println!("distance between methods {:.2e}", finals[0].l2_distance(&finals[1])?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> pilot_wave::Result<()> {
    run()
}
