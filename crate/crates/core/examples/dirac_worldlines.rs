//! Worldlines along the Dirac current of two counter-propagating plane waves,
//! computed in both gamma representations.

use num_complex::Complex64;
use pilot_wave::dirac::{integrate_worldline, GammaAlgebra, PlaneWaveSuperposition, Representation};

pub fn run() -> pilot_wave::Result<()> {
    for rep in [Representation::Dirac, Representation::Weyl] {
        let gamma = GammaAlgebra::new(rep);
        println!("{rep:?}: Clifford defect {:.1e}", gamma.clifford_defect());
        let field = PlaneWaveSuperposition::counter_propagating(&gamma, 1.0, 0.8, Complex64::new(1.0, 0.0), Complex64::new(0.3, 0.1));
        let line = integrate_worldline(&field, &gamma, [0.0; 4], 1e-2, 300)?;
        let end = line.events.last().unwrap();
        println!(
            "  end event ({:.4}, {:.4}, {:.4}, {:.4})  |J.J - 1| <= {:.1e}  future directed {}",
            end[0],
            end[1],
            end[2],
            end[3],
            line.max_norm_defect(),
            line.is_future_directed()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> pilot_wave::Result<()> {
    run()
}
