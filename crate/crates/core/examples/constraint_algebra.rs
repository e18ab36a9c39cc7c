//! Second-class constraints of the Schrodinger field on a small lattice and
//! the Dirac bracket that respects them.

use num_complex::Complex64;
use pilot_wave::constraints::{constraint_matrix, DiracBracket, FieldPhaseSpaceState, LatticeFunctional, Variable};
use pilot_wave::{ComplexLatticeField, GridSpec};

pub fn run() -> pilot_wave::Result<()> {
    let hbar = 1.0;
    let grid = GridSpec::periodic_1d(16, 8.0)?;
    let psi = ComplexLatticeField::from_fn(grid, |x| Complex64::new(-x[0] * x[0] / 2.0, 0.7 * x[0]).exp());
    let s = FieldPhaseSpaceState::on_constraint(psi, hbar);
    let sites = [0, 4, 8, 12];

    let cm = constraint_matrix(&s, &sites, hbar)?;
    println!("classification: {:?}", cm.classification());
    println!("smallest singular value {:.6} (hbar/dx = {:.6})", cm.smallest_singular_value(), hbar / grid.cell_volume());

    let db = DiracBracket::new(&s, &sites, hbar)?;
    let f = LatticeFunctional::numeric("psi_4^2", |s| s.value(Variable::Psi, 4).powi(2));
    for &site in &sites {
        let b = db.bracket(&f, &LatticeFunctional::phi1(site, hbar), &s)?;
        println!("{{psi_4^2, phi1_{site}}}_D = {:.2e}", b.norm());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> pilot_wave::Result<()> {
    run()
}
