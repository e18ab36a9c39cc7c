//! Canonical phase space of the Schrödinger field on a lattice, numerical
//! Poisson brackets of lattice functionals, the primary constraints and the
//! Dirac bracket that makes them strong.
//!
//! The field `psi` and its conjugate `psi*` are independent canonical
//! coordinates with momenta `Pi_psi`, `Pi_psi*`. Functionals are holomorphic
//! in all four variables, so a derivative with respect to `psi_i` is taken
//! with `psi*_i` held fixed. With partial derivatives `dF/dz_i` the bracket is
//!
//! ```text
//! {F, G} = sum_i (1/dx^d) [dF/dq_i dG/dp_i - dF/dp_i dG/dq_i]
//! ```
//!
//! summed over both canonical pairs, which gives `{psi(x_i), Pi_psi(x_j)} =
//! delta_ij / dx^d`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dirac::{GammaAlgebra, SpinorLatticeState};
use crate::error::{Error, Result};
use crate::grid::{ComplexLatticeField, GridSpec};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Relative change allowed when the finite-difference step is halved.
pub const DERIVATIVE_CONVERGENCE: f64 = 1e-6;
/// Absolute floor for the convergence gate, for brackets that vanish.
const DERIVATIVE_FLOOR: f64 = 1e-9;
/// Singular values below this fraction of the largest count as zero.
pub const DEGENERACY_RATIO: f64 = 1e-12;

/// The extended canonical state `(psi, Pi_psi, psi*, Pi_psi*)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPhaseSpaceState {
    pub psi: ComplexLatticeField,
    pub pi_psi: ComplexLatticeField,
    pub psi_star: ComplexLatticeField,
    pub pi_psi_star: ComplexLatticeField,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Psi,
    PiPsi,
    PsiStar,
    PiPsiStar,
}

impl FieldPhaseSpaceState {
    pub fn new(
        psi: ComplexLatticeField,
        pi_psi: ComplexLatticeField,
        psi_star: ComplexLatticeField,
        pi_psi_star: ComplexLatticeField,
        time: f64,
    ) -> Result<Self> {
        let g = psi.grid();
        g.ensure_same(pi_psi.grid())?;
        g.ensure_same(psi_star.grid())?;
        g.ensure_same(pi_psi_star.grid())?;
        Ok(FieldPhaseSpaceState {
            psi,
            pi_psi,
            psi_star,
            pi_psi_star,
            time,
        })
    }

    /// The state on the constraint surface over `psi`: `psi* = conj(psi)`,
    /// `Pi_psi = (i hbar/2) psi*`, `Pi_psi* = -(i hbar/2) psi`.
    pub fn on_constraint(psi: ComplexLatticeField, hbar: f64) -> Self {
        let psi_star = psi.conj();
        let pi_psi = psi_star.scaled(0.5 * hbar * I);
        let pi_psi_star = psi.scaled(-0.5 * hbar * I);
        FieldPhaseSpaceState {
            psi,
            pi_psi,
            psi_star,
            pi_psi_star,
            time: 0.0,
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let z = ComplexLatticeField::zeros(grid);
        FieldPhaseSpaceState {
            psi: z.clone(),
            pi_psi: z.clone(),
            psi_star: z.clone(),
            pi_psi_star: z,
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.psi.grid()
    }

    pub fn field(&self, var: Variable) -> &ComplexLatticeField {
        match var {
            Variable::Psi => &self.psi,
            Variable::PiPsi => &self.pi_psi,
            Variable::PsiStar => &self.psi_star,
            Variable::PiPsiStar => &self.pi_psi_star,
        }
    }

    pub fn field_mut(&mut self, var: Variable) -> &mut ComplexLatticeField {
        match var {
            Variable::Psi => &mut self.psi,
            Variable::PiPsi => &mut self.pi_psi,
            Variable::PsiStar => &mut self.psi_star,
            Variable::PiPsiStar => &mut self.pi_psi_star,
        }
    }

    pub fn value(&self, var: Variable, site: usize) -> Complex64 {
        self.field(var).values()[site]
    }

    /// Largest site-wise magnitude of either primary constraint.
    pub fn constraint_residual(&self, hbar: f64) -> f64 {
        let (phi1, phi2) = primary_constraints(self, hbar);
        phi1.max_abs().max(phi2.max_abs())
    }

    pub fn is_on_constraint(&self, hbar: f64, tol: f64) -> bool {
        self.constraint_residual(hbar) <= tol
    }

    /// `self += a * other` over all four fields.
    pub fn axpy(&mut self, a: f64, other: &FieldPhaseSpaceState) {
        let a = Complex64::new(a, 0.0);
        self.psi.axpy(a, &other.psi);
        self.pi_psi.axpy(a, &other.pi_psi);
        self.psi_star.axpy(a, &other.psi_star);
        self.pi_psi_star.axpy(a, &other.pi_psi_star);
    }
}

/// Partial derivatives of a functional with respect to every canonical
/// variable, grouped into conjugate pairs ("families") of per-site arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGradient {
    pub coordinates: Vec<Vec<Complex64>>,
    pub momenta: Vec<Vec<Complex64>>,
}

impl PhaseSpaceGradient {
    pub fn zeros(families: usize, sites: usize) -> Self {
        PhaseSpaceGradient {
            coordinates: vec![vec![ZERO; sites]; families],
            momenta: vec![vec![ZERO; sites]; families],
        }
    }

    /// Gradient layout for the Schrödinger field: family 0 is `(psi, Pi_psi)`,
    /// family 1 is `(psi*, Pi_psi*)`.
    pub fn schrodinger(sites: usize) -> Self {
        Self::zeros(2, sites)
    }

    pub fn entry_mut(&mut self, var: Variable, site: usize) -> &mut Complex64 {
        match var {
            Variable::Psi => &mut self.coordinates[0][site],
            Variable::PiPsi => &mut self.momenta[0][site],
            Variable::PsiStar => &mut self.coordinates[1][site],
            Variable::PiPsiStar => &mut self.momenta[1][site],
        }
    }

    pub fn entry(&self, var: Variable, site: usize) -> Complex64 {
        match var {
            Variable::Psi => self.coordinates[0][site],
            Variable::PiPsi => self.momenta[0][site],
            Variable::PsiStar => self.coordinates[1][site],
            Variable::PiPsiStar => self.momenta[1][site],
        }
    }
}

/// The canonical bracket of two functionals given their gradients.
pub fn canonical_bracket(f: &PhaseSpaceGradient, g: &PhaseSpaceGradient, cell_volume: f64) -> Complex64 {
    let mut acc = ZERO;
    for fam in 0..f.coordinates.len() {
        let (fq, fp) = (&f.coordinates[fam], &f.momenta[fam]);
        let (gq, gp) = (&g.coordinates[fam], &g.momenta[fam]);
        for i in 0..fq.len() {
            acc += fq[i] * gp[i] - fp[i] * gq[i];
        }
    }
    acc / cell_volume
}

type EvalFn = dyn Fn(&FieldPhaseSpaceState) -> Complex64 + Send + Sync;
type GradFn = dyn Fn(&FieldPhaseSpaceState) -> PhaseSpaceGradient + Send + Sync;

/// A complex-valued functional of the field phase space, optionally with
/// analytic partial derivatives. Without them, derivatives come from central
/// differences with step `h = 1e-5 (1 + |z|)` and a step-halving gate.
#[derive(Clone)]
pub struct LatticeFunctional {
    name: String,
    eval: Arc<EvalFn>,
    gradient: Option<Arc<GradFn>>,
}

impl fmt::Debug for LatticeFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeFunctional")
            .field("name", &self.name)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

enum GradientEstimate {
    Exact(PhaseSpaceGradient),
    Numeric {
        coarse: PhaseSpaceGradient,
        fine: PhaseSpaceGradient,
    },
}

impl LatticeFunctional {
    pub fn numeric(
        name: impl Into<String>,
        eval: impl Fn(&FieldPhaseSpaceState) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        LatticeFunctional {
            name: name.into(),
            eval: Arc::new(eval),
            gradient: None,
        }
    }

    pub fn with_gradient(
        name: impl Into<String>,
        eval: impl Fn(&FieldPhaseSpaceState) -> Complex64 + Send + Sync + 'static,
        gradient: impl Fn(&FieldPhaseSpaceState) -> PhaseSpaceGradient + Send + Sync + 'static,
    ) -> Self {
        LatticeFunctional {
            name: name.into(),
            eval: Arc::new(eval),
            gradient: Some(Arc::new(gradient)),
        }
    }

    /// The value of one canonical variable at one site.
    pub fn coordinate(var: Variable, site: usize) -> Self {
        Self::linear(format!("{var:?}[{site}]"), vec![(var, site, ONE)])
    }

    /// `sum c * z` over the listed `(variable, site, coefficient)` terms.
    pub fn linear(name: impl Into<String>, terms: Vec<(Variable, usize, Complex64)>) -> Self {
        let terms = Arc::new(terms);
        let t2 = Arc::clone(&terms);
        Self::with_gradient(
            name,
            move |s| terms.iter().map(|&(v, i, c)| c * s.value(v, i)).sum(),
            move |s| {
                let mut g = PhaseSpaceGradient::schrodinger(s.grid().sites());
                for &(v, i, c) in t2.iter() {
                    *g.entry_mut(v, i) += c;
                }
                g
            },
        )
    }

    /// `phi_1(x_i) = Pi_psi(x_i) - (i hbar/2) psi*(x_i)`.
    pub fn phi1(site: usize, hbar: f64) -> Self {
        Self::linear(
            format!("phi1[{site}]"),
            vec![(Variable::PiPsi, site, ONE), (Variable::PsiStar, site, -0.5 * hbar * I)],
        )
    }

    /// `phi_2(x_i) = Pi_psi*(x_i) + (i hbar/2) psi(x_i)`.
    pub fn phi2(site: usize, hbar: f64) -> Self {
        Self::linear(
            format!("phi2[{site}]"),
            vec![(Variable::PiPsiStar, site, ONE), (Variable::Psi, site, 0.5 * hbar * I)],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn evaluate(&self, s: &FieldPhaseSpaceState) -> Complex64 {
        (self.eval)(s)
    }

    /// Partial derivatives at `s`; numeric when no analytic rule exists.
    pub fn gradient(&self, s: &FieldPhaseSpaceState) -> PhaseSpaceGradient {
        match self.estimate(s) {
            GradientEstimate::Exact(g) => g,
            GradientEstimate::Numeric { fine, .. } => fine,
        }
    }

    fn estimate(&self, s: &FieldPhaseSpaceState) -> GradientEstimate {
        match &self.gradient {
            Some(g) => GradientEstimate::Exact(g(s)),
            None => GradientEstimate::Numeric {
                coarse: self.numeric_gradient(s, 1.0),
                fine: self.numeric_gradient(s, 0.5),
            },
        }
    }

    fn numeric_gradient(&self, s: &FieldPhaseSpaceState, step_scale: f64) -> PhaseSpaceGradient {
        let sites = s.grid().sites();
        let mut g = PhaseSpaceGradient::schrodinger(sites);
        let mut scratch = s.clone();
        for var in [Variable::Psi, Variable::PiPsi, Variable::PsiStar, Variable::PiPsiStar] {
            for i in 0..sites {
                let z = s.value(var, i);
                let h = step_scale * 1e-5 * (1.0 + z.norm());
                scratch.field_mut(var).values_mut()[i] = z + h;
                let up = self.evaluate(&scratch);
                scratch.field_mut(var).values_mut()[i] = z - h;
                let down = self.evaluate(&scratch);
                scratch.field_mut(var).values_mut()[i] = z;
                *g.entry_mut(var, i) = (up - down) / (2.0 * h);
            }
        }
        g
    }
}

/// `{F, G}` at state `s`.
///
/// When either functional lacks analytic derivatives the bracket is computed
/// at two step sizes; disagreement beyond [`DERIVATIVE_CONVERGENCE`] is a
/// tolerance error, otherwise the Richardson-extrapolated value is returned.
pub fn poisson_bracket(f: &LatticeFunctional, g: &LatticeFunctional, s: &FieldPhaseSpaceState) -> Result<Complex64> {
    let vol = s.grid().cell_volume();
    let (fe, ge) = (f.estimate(s), g.estimate(s));
    let pick = |e: &GradientEstimate, fine: bool| -> PhaseSpaceGradient {
        match e {
            GradientEstimate::Exact(x) => x.clone(),
            GradientEstimate::Numeric { coarse, fine: fg } => {
                if fine {
                    fg.clone()
                } else {
                    coarse.clone()
                }
            }
        }
    };
    if let (GradientEstimate::Exact(a), GradientEstimate::Exact(b)) = (&fe, &ge) {
        return Ok(canonical_bracket(a, b, vol));
    }
    let coarse = canonical_bracket(&pick(&fe, false), &pick(&ge, false), vol);
    let fine = canonical_bracket(&pick(&fe, true), &pick(&ge, true), vol);
    let change = (fine - coarse).norm();
    let allowed = DERIVATIVE_CONVERGENCE * fine.norm() + DERIVATIVE_FLOOR;
    if change > allowed {
        return Err(Error::Tolerance {
            what: format!("bracket {{{}, {}}} under step halving", f.name(), g.name()),
            change,
            allowed,
        });
    }
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Site-wise `(phi_1, phi_2)`.
pub fn primary_constraints(s: &FieldPhaseSpaceState, hbar: f64) -> (ComplexLatticeField, ComplexLatticeField) {
    let half = 0.5 * hbar * I;
    let mut phi1 = s.pi_psi.clone();
    phi1.axpy(-half, &s.psi_star);
    let mut phi2 = s.pi_psi_star.clone();
    phi2.axpy(half, &s.psi);
    (phi1, phi2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintClass {
    SecondClass,
    /// The bracket matrix is singular: some combination is first class.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct ConstraintMatrix {
    pub sites: Vec<usize>,
    /// Ordered `phi_1(x_0), phi_2(x_0), phi_1(x_1), ...` for the Schrödinger
    /// field; spinor matrices order the four `phi_1` components before the
    /// four `phi_2` components at each site.
    pub matrix: DMatrix<Complex64>,
    /// Descending.
    pub singular_values: Vec<f64>,
}

impl ConstraintMatrix {
    fn from_matrix(sites: Vec<usize>, matrix: DMatrix<Complex64>) -> Self {
        let mut singular_values: Vec<f64> = matrix.clone().singular_values().iter().copied().collect();
        singular_values.sort_by(|a, b| b.total_cmp(a));
        ConstraintMatrix {
            sites,
            matrix,
            singular_values,
        }
    }

    pub fn smallest_singular_value(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn classification(&self) -> ConstraintClass {
        let largest = self.singular_values.first().copied().unwrap_or(0.0);
        if largest > 0.0 && self.smallest_singular_value() > DEGENERACY_RATIO * largest {
            ConstraintClass::SecondClass
        } else {
            ConstraintClass::Degenerate
        }
    }

    /// `max |C + C^T|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                worst = worst.max((m[(i, j)] + m[(j, i)]).norm());
            }
        }
        worst
    }
}

fn constraint_functionals(sites: &[usize], hbar: f64) -> Vec<LatticeFunctional> {
    sites
        .iter()
        .flat_map(|&i| [LatticeFunctional::phi1(i, hbar), LatticeFunctional::phi2(i, hbar)])
        .collect()
}

/// All pairwise brackets among `phi_1`, `phi_2` on the listed sites.
pub fn constraint_matrix(s: &FieldPhaseSpaceState, sites: &[usize], hbar: f64) -> Result<ConstraintMatrix> {
    if sites.is_empty() {
        return Err(Error::Config("constraint matrix needs at least one site".into()));
    }
    check_sites(s.grid(), sites)?;
    let vol = s.grid().cell_volume();
    let grads: Vec<PhaseSpaceGradient> = constraint_functionals(sites, hbar)
        .iter()
        .map(|f| f.gradient(s))
        .collect();
    let n = grads.len();
    let entries: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|k| canonical_bracket(&grads[k / n], &grads[k % n], vol))
        .collect();
    Ok(ConstraintMatrix::from_matrix(
        sites.to_vec(),
        DMatrix::from_row_slice(n, n, &entries),
    ))
}

fn check_sites(grid: &GridSpec, sites: &[usize]) -> Result<()> {
    if let Some(&bad) = sites.iter().find(|&&i| i >= grid.sites()) {
        return Err(Error::Config(format!("site {bad} outside a grid of {} sites", grid.sites())));
    }
    Ok(())
}

/// The Dirac bracket for the primary constraints on a fixed site set, with
/// the inverse constraint matrix computed once.
#[derive(Debug, Clone)]
pub struct DiracBracket {
    constraints: Vec<LatticeFunctional>,
    inverse: DMatrix<Complex64>,
    matrix: ConstraintMatrix,
}

impl DiracBracket {
    pub fn new(s: &FieldPhaseSpaceState, sites: &[usize], hbar: f64) -> Result<Self> {
        let matrix = constraint_matrix(s, sites, hbar)?;
        if matrix.classification() == ConstraintClass::Degenerate {
            return Err(Error::Degeneracy {
                smallest: matrix.smallest_singular_value(),
            });
        }
        let inverse = matrix.matrix.clone().try_inverse().ok_or(Error::Degeneracy {
            smallest: matrix.smallest_singular_value(),
        })?;
        Ok(DiracBracket {
            constraints: constraint_functionals(sites, hbar),
            inverse,
            matrix,
        })
    }

    pub fn constraint_matrix(&self) -> &ConstraintMatrix {
        &self.matrix
    }

    /// `{F,G}_D = {F,G} - sum_ab {F,phi_a} (C^-1)_ab {phi_b,G}`.
    pub fn bracket(&self, f: &LatticeFunctional, g: &LatticeFunctional, s: &FieldPhaseSpaceState) -> Result<Complex64> {
        let n = self.constraints.len();
        let mut f_phi = Vec::with_capacity(n);
        let mut phi_g = Vec::with_capacity(n);
        for phi in &self.constraints {
            f_phi.push(poisson_bracket(f, phi, s)?);
            phi_g.push(poisson_bracket(phi, g, s)?);
        }
        let mut correction = ZERO;
        for a in 0..n {
            for b in 0..n {
                correction += f_phi[a] * self.inverse[(a, b)] * phi_g[b];
            }
        }
        Ok(poisson_bracket(f, g, s)? - correction)
    }
}

pub fn dirac_bracket(
    f: &LatticeFunctional,
    g: &LatticeFunctional,
    s: &FieldPhaseSpaceState,
    sites: &[usize],
    hbar: f64,
) -> Result<Complex64> {
    DiracBracket::new(s, sites, hbar)?.bracket(f, g, s)
}

/// Spinor-field primary constraints at one site, as
/// `(phi_1 components, phi_2 components)`:
/// `phi_1k = Pi_psi,k - (i/2)(psibar gamma^0)_k` and
/// `phi_2k = Pi_psibar,k + (i/2)(gamma^0 psi)_k`.
pub fn spinor_primary_constraints(
    state: &SpinorLatticeState,
    gamma: &GammaAlgebra,
    site: usize,
) -> ([Complex64; 4], [Complex64; 4]) {
    let g0 = gamma.gamma(0);
    let mut phi1 = [ZERO; 4];
    let mut phi2 = [ZERO; 4];
    for k in 0..4 {
        let mut bar_g0 = ZERO;
        let mut g0_psi = ZERO;
        for m in 0..4 {
            bar_g0 += state.psi_bar[site][m] * g0[(m, k)];
            g0_psi += g0[(k, m)] * state.psi[site][m];
        }
        phi1[k] = state.pi_psi[site][k] - 0.5 * I * bar_g0;
        phi2[k] = state.pi_psi_bar[site][k] + 0.5 * I * g0_psi;
    }
    (phi1, phi2)
}

/// Gradients of the eight spinor constraints at `site`. Families 0..4 are
/// `(psi_k, Pi_psi,k)`, families 4..8 are `(psibar_k, Pi_psibar,k)`.
fn spinor_constraint_gradients(gamma: &GammaAlgebra, sites: usize, site: usize) -> Vec<PhaseSpaceGradient> {
    let g0 = gamma.gamma(0);
    let mut out = Vec::with_capacity(8);
    for k in 0..4 {
        let mut g = PhaseSpaceGradient::zeros(8, sites);
        g.momenta[k][site] = ONE;
        for m in 0..4 {
            g.coordinates[4 + m][site] = -0.5 * I * g0[(m, k)];
        }
        out.push(g);
    }
    for l in 0..4 {
        let mut g = PhaseSpaceGradient::zeros(8, sites);
        g.momenta[4 + l][site] = ONE;
        for m in 0..4 {
            g.coordinates[m][site] = 0.5 * I * g0[(l, m)];
        }
        out.push(g);
    }
    out
}

/// Bracket matrix among the spinor-field constraints on the listed sites.
pub fn dirac_field_constraint_brackets(
    state: &SpinorLatticeState,
    gamma: &GammaAlgebra,
    sites: &[usize],
) -> Result<ConstraintMatrix> {
    if sites.is_empty() {
        return Err(Error::Config("constraint matrix needs at least one site".into()));
    }
    let grid = state.grid();
    check_sites(grid, sites)?;
    let grads: Vec<PhaseSpaceGradient> = sites
        .iter()
        .flat_map(|&i| spinor_constraint_gradients(gamma, grid.sites(), i))
        .collect();
    let n = grads.len();
    let vol = grid.cell_volume();
    let entries: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|k| canonical_bracket(&grads[k / n], &grads[k % n], vol))
        .collect();
    Ok(ConstraintMatrix::from_matrix(
        sites.to_vec(),
        DMatrix::from_row_slice(n, n, &entries),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::Representation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: GridSpec, rng: &mut ChaCha8Rng) -> ComplexLatticeField {
        let values = (0..grid.sites())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ComplexLatticeField::new(grid, values).unwrap()
    }

    fn random_state(grid: GridSpec, seed: u64) -> FieldPhaseSpaceState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FieldPhaseSpaceState::new(
            random_field(grid, &mut rng),
            random_field(grid, &mut rng),
            random_field(grid, &mut rng),
            random_field(grid, &mut rng),
            0.0,
        )
        .unwrap()
    }

    fn grid() -> GridSpec {
        GridSpec::periodic_1d(16, 4.0).unwrap()
    }

    #[test]
    fn on_constraint_state_has_zero_residuals() {
        let g = grid();
        let psi = ComplexLatticeField::from_fn(g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.3 * x[0]));
        let s = FieldPhaseSpaceState::on_constraint(psi, 1.3);
        let (p1, p2) = primary_constraints(&s, 1.3);
        assert_eq!(p1.max_abs(), 0.0);
        assert_eq!(p2.max_abs(), 0.0);
        assert!(s.is_on_constraint(1.3, 0.0));
    }

    #[test]
    fn phi1_equals_momentum_when_field_vanishes() {
        let g = grid();
        let c = Complex64::new(0.7, -0.2);
        let mut s = FieldPhaseSpaceState::zeros(g);
        s.pi_psi = ComplexLatticeField::from_fn(g, |_| c);
        let (p1, _) = primary_constraints(&s, 1.0);
        assert!(p1.values().iter().all(|&v| v == c));
    }

    #[test]
    fn residuals_match_definition_sitewise() {
        let s = random_state(grid(), 3);
        let hbar = 0.8;
        let (p1, p2) = primary_constraints(&s, hbar);
        for i in 0..grid().sites() {
            let e1 = s.pi_psi.values()[i] - 0.5 * hbar * I * s.psi_star.values()[i];
            let e2 = s.pi_psi_star.values()[i] + 0.5 * hbar * I * s.psi.values()[i];
            assert!((p1.values()[i] - e1).norm() < 1e-15);
            assert!((p2.values()[i] - e2).norm() < 1e-15);
        }
    }

    #[test]
    fn constraint_brackets_match_lattice_delta() {
        let s = random_state(grid(), 5);
        let hbar = 1.7;
        let delta = grid().lattice_delta();
        for (i, j) in [(2, 2), (2, 5), (0, 15)] {
            let p1i = LatticeFunctional::phi1(i, hbar);
            let p1j = LatticeFunctional::phi1(j, hbar);
            let p2j = LatticeFunctional::phi2(j, hbar);
            assert!(poisson_bracket(&p1i, &p1j, &s).unwrap().norm() < 1e-10);
            let expected = if i == j { -I * hbar * delta } else { ZERO };
            assert!((poisson_bracket(&p1i, &p2j, &s).unwrap() - expected).norm() < 1e-10);
        }
        let psi_i = LatticeFunctional::coordinate(Variable::Psi, 3);
        let psi_j = LatticeFunctional::coordinate(Variable::Psi, 4);
        assert_eq!(poisson_bracket(&psi_i, &psi_j, &s).unwrap(), ZERO);
    }

    #[test]
    fn numeric_and_analytic_brackets_agree() {
        let s = random_state(grid(), 9);
        let hbar = 1.0;
        let numeric_phi1 = LatticeFunctional::numeric("phi1-num", move |st| {
            st.value(Variable::PiPsi, 4) - 0.5 * hbar * I * st.value(Variable::PsiStar, 4)
        });
        let b = poisson_bracket(&numeric_phi1, &LatticeFunctional::phi2(4, hbar), &s).unwrap();
        assert!((b + I * hbar * grid().lattice_delta()).norm() < 1e-8);
    }

    #[test]
    fn nonsmooth_functional_fails_convergence_gate() {
        let s = random_state(grid(), 11);
        // C1 kink at Re z = 0: the curvature jumps, so halving the step never settles
        let mut st = s.clone();
        st.psi.values_mut()[0] = ZERO;
        let kink = LatticeFunctional::numeric("kink", |st| {
            let z = st.value(Variable::Psi, 0);
            Complex64::new(if z.re > 0.0 { z.re * z.re * 1e6 } else { 0.0 }, 0.0)
        });
        let pi = LatticeFunctional::coordinate(Variable::PiPsi, 0);
        assert!(matches!(poisson_bracket(&kink, &pi, &st), Err(Error::Tolerance { .. })));
    }

    #[test]
    fn single_site_matrix_block() {
        let s = random_state(grid(), 1);
        let hbar = 2.0;
        let m = constraint_matrix(&s, &[6], hbar).unwrap();
        let d = hbar * grid().lattice_delta();
        assert!((m.matrix[(0, 1)] + I * d).norm() < 1e-12);
        assert!((m.matrix[(1, 0)] - I * d).norm() < 1e-12);
        assert!(m.matrix[(0, 0)].norm() < 1e-12 && m.matrix[(1, 1)].norm() < 1e-12);
        assert!((m.smallest_singular_value() - d).abs() < 1e-10 * d);
        assert_eq!(m.classification(), ConstraintClass::SecondClass);
    }

    #[test]
    fn three_site_matrix_is_block_diagonal() {
        let s = random_state(grid(), 2);
        let m = constraint_matrix(&s, &[1, 7, 12], 1.0).unwrap();
        let block = m.matrix.view((0, 0), (2, 2)).clone_owned();
        for a in 0..3 {
            for b in 0..3 {
                let blk = m.matrix.view((2 * a, 2 * b), (2, 2));
                if a == b {
                    assert!((blk - &block).norm() < 1e-12);
                } else {
                    assert!(blk.norm() < 1e-12);
                }
            }
        }
        assert!(m.antisymmetry_defect() < 1e-12);
    }

    #[test]
    fn empty_site_list_is_rejected() {
        let s = random_state(grid(), 2);
        assert!(constraint_matrix(&s, &[], 1.0).is_err());
        assert!(constraint_matrix(&s, &[99], 1.0).is_err());
    }

    #[test]
    fn dirac_bracket_single_site_matches_hand_inversion() {
        // explicit 2x2 oracle: C = [[0, -i hbar d],[i hbar d, 0]],
        // {psi, phi1} = d, {psi, phi2} = 0, {phi1, psi*} = 0, {phi2, psi*} = -d
        let g = grid();
        let s = random_state(g, 4);
        let hbar = 1.3;
        let d = g.lattice_delta();
        let c = [[ZERO, -I * hbar * d], [I * hbar * d, ZERO]];
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let inv = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]];
        let f_phi = [Complex64::new(d, 0.0), ZERO];
        let phi_g = [ZERO, Complex64::new(-d, 0.0)];
        let mut oracle = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                oracle -= f_phi[a] * inv[a][b] * phi_g[b];
            }
        }
        let psi = LatticeFunctional::coordinate(Variable::Psi, 5);
        let psi_star = LatticeFunctional::coordinate(Variable::PsiStar, 5);
        let db = dirac_bracket(&psi, &psi_star, &s, &[5], hbar).unwrap();
        assert!((db - oracle).norm() < 1e-12, "{db} vs {oracle}");
        assert!((db + I * d / hbar).norm() < 1e-12);
    }

    #[test]
    fn dirac_bracket_kills_constraints_and_is_antisymmetric() {
        let s = random_state(grid(), 8);
        let hbar = 1.0;
        let sites = [2, 3, 4];
        let db = DiracBracket::new(&s, &sites, hbar).unwrap();
        let g = LatticeFunctional::numeric("cubic", |st| {
            let a = st.value(Variable::Psi, 3);
            let b = st.value(Variable::PiPsiStar, 4);
            a * a * b + st.value(Variable::PsiStar, 2)
        });
        let f = LatticeFunctional::linear(
            "mix",
            vec![(Variable::Psi, 2, Complex64::new(0.3, 1.0)), (Variable::PiPsi, 4, ONE)],
        );
        for i in sites {
            for phi in [LatticeFunctional::phi1(i, hbar), LatticeFunctional::phi2(i, hbar)] {
                assert!(db.bracket(&phi, &g, &s).unwrap().norm() < 1e-10);
                assert!(db.bracket(&f, &phi, &s).unwrap().norm() < 1e-10);
            }
        }
        let fg = db.bracket(&f, &g, &s).unwrap();
        let gf = db.bracket(&g, &f, &s).unwrap();
        assert!((fg + gf).norm() < 1e-10);
    }

    #[test]
    fn spinor_constraint_brackets() {
        for rep in [Representation::Dirac, Representation::Weyl] {
            let gamma = GammaAlgebra::new(rep);
            let g = GridSpec::periodic_1d(8, 2.0).unwrap();
            let state = SpinorLatticeState::zeros(g);
            let m = dirac_field_constraint_brackets(&state, &gamma, &[1, 2]).unwrap();
            let d = g.lattice_delta();
            let g0 = gamma.gamma(0);
            for (a, _) in [1, 2].iter().enumerate() {
                for b in 0..2 {
                    for k in 0..4 {
                        for l in 0..4 {
                            let p1p2 = m.matrix[(8 * a + k, 8 * b + 4 + l)];
                            let p1p1 = m.matrix[(8 * a + k, 8 * b + l)];
                            let p2p2 = m.matrix[(8 * a + 4 + k, 8 * b + 4 + l)];
                            let expected = if a == b { -I * g0[(l, k)] * d } else { ZERO };
                            assert!((p1p2 - expected).norm() < 1e-12);
                            assert!(p1p1.norm() < 1e-12 && p2p2.norm() < 1e-12);
                        }
                    }
                }
            }
            assert_eq!(m.classification(), ConstraintClass::SecondClass);
        }
    }
}
