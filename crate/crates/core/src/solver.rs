//! Reference solvers for `i hbar dpsi/dt = -(hbar^2/2m) lap psi + V psi`,
//! independent of the Hamiltonian-flow integrator they are used to check.
//!
//! Crank–Nicolson uses the finite-difference Laplacian: a cyclic (periodic)
//! or Dirichlet (hard-wall) tridiagonal Cayley step in 1D, and a Strang
//! composition of per-axis Cayley steps in 2D. Split-step is the Strang
//! splitting `e^{-iV dt/2} F^-1 e^{-iT dt} F e^{-iV dt/2}` on periodic grids.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fft_nd, laplacian, Boundary, ComplexLatticeField, DerivativeMethod, GridSpec, Units};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    CrankNicolson,
    SplitStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub dt: f64,
    /// Relative residual allowed in each linear solve.
    pub tolerance: f64,
    /// Kinetic symbol of the split-step method; finite-difference matches the
    /// Crank–Nicolson spatial operator exactly.
    pub kinetic: DerivativeMethod,
}

impl SolverConfig {
    pub fn new(method: SolverMethod, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        Ok(SolverConfig {
            method,
            dt,
            tolerance: 1e-12,
            kinetic: DerivativeMethod::Spectral,
        })
    }
}

fn check_inputs(grid: &GridSpec, potential: &[f64], masses: &[f64], units: &Units, dt: f64) -> Result<()> {
    if potential.len() != grid.sites() {
        return Err(Error::Shape(format!(
            "potential has {} samples for {} sites",
            potential.len(),
            grid.sites()
        )));
    }
    if masses.len() != grid.dimension() || masses.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Config("need one positive mass per grid axis".into()));
    }
    if !(units.hbar > 0.0) {
        return Err(Error::Config("hbar must be positive".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// A prepared Crank–Nicolson stepper.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    grid: GridSpec,
    potential: Vec<f64>,
    /// `hbar^2 / (2 m_axis dx^2)` per axis.
    hopping: Vec<f64>,
    hbar: f64,
    dt: f64,
    tolerance: f64,
}

impl CrankNicolson {
    pub fn new(grid: GridSpec, potential: Vec<f64>, masses: &[f64], units: Units, dt: f64) -> Result<Self> {
        check_inputs(&grid, &potential, masses, &units, dt)?;
        let dx = grid.spacing();
        Ok(CrankNicolson {
            grid,
            potential,
            hopping: masses.iter().map(|m| units.hbar * units.hbar / (2.0 * m * dx * dx)).collect(),
            hbar: units.hbar,
            dt,
            tolerance: 1e-12,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &mut ComplexLatticeField) -> Result<()> {
        self.grid.ensure_same(psi.grid())?;
        if self.grid.dimension() == 1 {
            let line = psi.values_mut();
            return self.cayley_line(line, &self.potential, self.hopping[0], self.dt);
        }
        let n = self.grid.points();
        let half_v: Vec<f64> = self.potential.iter().map(|v| 0.5 * v).collect();
        self.sweep(psi, &half_v, 0, 0.5 * self.dt, n)?;
        self.sweep(psi, &half_v, 1, self.dt, n)?;
        self.sweep(psi, &half_v, 0, 0.5 * self.dt, n)
    }

    fn sweep(&self, psi: &mut ComplexLatticeField, v: &[f64], axis: usize, dt: f64, n: usize) -> Result<()> {
        let mut line = vec![ZERO; n];
        let mut pot = vec![0.0; n];
        let values = psi.values_mut();
        for other in 0..n {
            let index = |i: usize| if axis == 0 { i * n + other } else { other * n + i };
            for i in 0..n {
                line[i] = values[index(i)];
                pot[i] = v[index(i)];
            }
            self.cayley_line(&mut line, &pot, self.hopping[axis], dt)?;
            for i in 0..n {
                values[index(i)] = line[i];
            }
        }
        Ok(())
    }

    /// Solves `(1 + i dt H/2hbar) x = (1 - i dt H/2hbar) psi` along one line.
    fn cayley_line(&self, psi: &mut [Complex64], v: &[f64], hop: f64, dt: f64) -> Result<()> {
        let n = psi.len();
        let tau = dt / (2.0 * self.hbar);
        let periodic = self.grid.boundary() == Boundary::Periodic;
        let diag_h: Vec<f64> = v.iter().map(|&vi| 2.0 * hop + vi).collect();
        let off_h = -hop;
        // explicit half: r = (1 - i tau H) psi
        let at = |i: isize| -> Complex64 {
            if periodic {
                psi[i.rem_euclid(n as isize) as usize]
            } else if i < 0 || i >= n as isize {
                ZERO
            } else {
                psi[i as usize]
            }
        };
        let mut rhs: Vec<Complex64> = (0..n)
            .map(|i| {
                let hpsi = diag_h[i] * psi[i] + off_h * (at(i as isize - 1) + at(i as isize + 1));
                psi[i] - I * tau * hpsi
            })
            .collect();
        let diag: Vec<Complex64> = diag_h.iter().map(|&d| ONE + I * tau * d).collect();
        let off = I * tau * off_h;
        let x = if periodic {
            solve_cyclic(&diag, off, &rhs)?
        } else {
            // walls pin the end sites to zero
            rhs[0] = ZERO;
            rhs[n - 1] = ZERO;
            let mut x = vec![ZERO; n];
            let inner = solve_tridiagonal(&diag[1..n - 1], off, &rhs[1..n - 1])?;
            x[1..n - 1].copy_from_slice(&inner);
            x
        };
        // residual gate on the implicit solve
        let mut res = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            if !periodic && (i == 0 || i == n - 1) {
                continue;
            }
            let prev = if periodic { x[(i + n - 1) % n] } else if i == 0 { ZERO } else { x[i - 1] };
            let next = if periodic { x[(i + 1) % n] } else if i + 1 == n { ZERO } else { x[i + 1] };
            let lhs = diag[i] * x[i] + off * (prev + next);
            res += (lhs - rhs[i]).norm_sqr();
            scale += rhs[i].norm_sqr();
        }
        if res.sqrt() > self.tolerance * scale.sqrt().max(f64::MIN_POSITIVE) {
            return Err(Error::Solver(format!(
                "Crank-Nicolson residual {:.3e} exceeds tolerance {:.1e}",
                res.sqrt() / scale.sqrt(),
                self.tolerance
            )));
        }
        psi.copy_from_slice(&x);
        Ok(())
    }
}

/// Thomas algorithm for constant off-diagonal `off`.
fn solve_tridiagonal(diag: &[Complex64], off: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let mut c = vec![ZERO; n];
    let mut d = vec![ZERO; n];
    let mut denom = diag[0];
    if denom.norm() == 0.0 {
        return Err(Error::Solver("zero pivot in tridiagonal solve".into()));
    }
    c[0] = off / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off * c[i - 1];
        if denom.norm() == 0.0 {
            return Err(Error::Solver("zero pivot in tridiagonal solve".into()));
        }
        c[i] = off / denom;
        d[i] = (rhs[i] - off * d[i - 1]) / denom;
    }
    let mut x = vec![ZERO; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Periodic tridiagonal system via Sherman–Morrison.
fn solve_cyclic(diag: &[Complex64], off: Complex64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - off * off / gamma;
    let x = solve_tridiagonal(&bb, off, rhs)?;
    let mut u = vec![ZERO; n];
    u[0] = gamma;
    u[n - 1] = off;
    let z = solve_tridiagonal(&bb, off, &u)?;
    let fact = (x[0] + off * x[n - 1] / gamma) / (ONE + z[0] + off * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

/// A prepared Strang split-step stepper (periodic grids only).
#[derive(Debug, Clone)]
pub struct SplitStep {
    grid: GridSpec,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    dt: f64,
}

/// `sum_axis hbar k^2 / 2 m_axis` for each Fourier mode.
fn kinetic_symbol(grid: &GridSpec, masses: &[f64], hbar: f64, method: DerivativeMethod) -> Vec<f64> {
    let dx = grid.spacing();
    let ks = grid.wavenumbers();
    let k2 = |k: f64| match method {
        DerivativeMethod::Spectral => k * k,
        DerivativeMethod::FiniteDifference => {
            let s = (0.5 * k * dx).sin();
            4.0 * s * s / (dx * dx)
        }
    };
    (0..grid.sites())
        .map(|s| {
            let idx = grid.unflatten(s);
            (0..grid.dimension())
                .map(|a| hbar * k2(ks[idx[a]]) / (2.0 * masses[a]))
                .sum()
        })
        .collect()
}

impl SplitStep {
    pub fn new(
        grid: GridSpec,
        potential: &[f64],
        masses: &[f64],
        units: Units,
        dt: f64,
        kinetic: DerivativeMethod,
    ) -> Result<Self> {
        check_inputs(&grid, potential, masses, &units, dt)?;
        if grid.boundary() != Boundary::Periodic {
            return Err(Error::Config("split-step requires a periodic grid".into()));
        }
        let half_potential = potential
            .iter()
            .map(|v| Complex64::from_polar(1.0, -v * dt / (2.0 * units.hbar)))
            .collect();
        let kinetic = kinetic_symbol(&grid, masses, units.hbar, kinetic)
            .into_iter()
            .map(|w| Complex64::from_polar(1.0, -w * dt))
            .collect();
        Ok(SplitStep {
            grid,
            half_potential,
            kinetic,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &mut ComplexLatticeField) -> Result<()> {
        self.grid.ensure_same(psi.grid())?;
        let values = psi.values_mut();
        for (v, p) in values.iter_mut().zip(&self.half_potential) {
            *v *= p;
        }
        fft_nd(&self.grid, values, false);
        for (v, k) in values.iter_mut().zip(&self.kinetic) {
            *v *= k;
        }
        fft_nd(&self.grid, values, true);
        for (v, p) in values.iter_mut().zip(&self.half_potential) {
            *v *= p;
        }
        Ok(())
    }
}

/// Either reference method behind one interface.
#[derive(Debug, Clone)]
pub enum ReferenceSolver {
    CrankNicolson(CrankNicolson),
    SplitStep(SplitStep),
}

impl ReferenceSolver {
    pub fn new(grid: GridSpec, potential: Vec<f64>, masses: &[f64], units: Units, config: &SolverConfig) -> Result<Self> {
        Ok(match config.method {
            SolverMethod::CrankNicolson => ReferenceSolver::CrankNicolson(
                CrankNicolson::new(grid, potential, masses, units, config.dt)?.with_tolerance(config.tolerance),
            ),
            SolverMethod::SplitStep => {
                ReferenceSolver::SplitStep(SplitStep::new(grid, &potential, masses, units, config.dt, config.kinetic)?)
            }
        })
    }

    pub fn step(&self, psi: &mut ComplexLatticeField) -> Result<()> {
        match self {
            ReferenceSolver::CrankNicolson(s) => s.step(psi),
            ReferenceSolver::SplitStep(s) => s.step(psi),
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            ReferenceSolver::CrankNicolson(s) => s.dt(),
            ReferenceSolver::SplitStep(s) => s.dt(),
        }
    }

    /// Advances `steps` times, keeping `psi` at every `every`-th step (and at 0).
    pub fn run(&self, psi0: &ComplexLatticeField, steps: usize, every: usize) -> Result<Vec<(f64, ComplexLatticeField)>> {
        let every = every.max(1);
        let mut psi = psi0.clone();
        let mut frames = vec![(0.0, psi.clone())];
        for n in 1..=steps {
            self.step(&mut psi)?;
            if n % every == 0 || n == steps {
                frames.push((n as f64 * self.dt(), psi.clone()));
            }
        }
        Ok(frames)
    }
}

/// One Crank–Nicolson step with uniform mass `units.mass`.
pub fn step_crank_nicolson(psi: &ComplexLatticeField, potential: &[f64], dt: f64, units: Units) -> Result<ComplexLatticeField> {
    let masses = vec![units.mass; psi.grid().dimension()];
    let cn = CrankNicolson::new(*psi.grid(), potential.to_vec(), &masses, units, dt)?;
    let mut out = psi.clone();
    cn.step(&mut out)?;
    Ok(out)
}

/// One spectral split-step with uniform mass `units.mass`.
pub fn step_split_step(psi: &ComplexLatticeField, potential: &[f64], dt: f64, units: Units) -> Result<ComplexLatticeField> {
    let masses = vec![units.mass; psi.grid().dimension()];
    let ss = SplitStep::new(*psi.grid(), potential, &masses, units, dt, DerivativeMethod::Spectral)?;
    let mut out = psi.clone();
    ss.step(&mut out)?;
    Ok(out)
}

/// `<psi|H|psi> / <psi|psi>` with the given kinetic discretization.
pub fn energy(
    psi: &ComplexLatticeField,
    potential: &[f64],
    masses: &[f64],
    hbar: f64,
    method: DerivativeMethod,
) -> Result<f64> {
    let h_psi = apply_hamiltonian(psi, potential, masses, hbar, method)?;
    let num: Complex64 = psi.values().iter().zip(h_psi.values()).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = psi.values().iter().map(|a| a.norm_sqr()).sum();
    Ok(num.re / den)
}

/// `H psi = -sum_axis (hbar^2 / 2 m_axis) d^2 psi + V psi`.
pub fn apply_hamiltonian(
    psi: &ComplexLatticeField,
    potential: &[f64],
    masses: &[f64],
    hbar: f64,
    method: DerivativeMethod,
) -> Result<ComplexLatticeField> {
    let grid = psi.grid();
    if masses.iter().all(|&m| m == masses[0]) {
        let lap = laplacian(psi, method)?;
        let c = -hbar * hbar / (2.0 * masses[0]);
        let values = lap
            .values()
            .iter()
            .zip(psi.values())
            .zip(potential)
            .map(|((l, p), v)| c * l + v * p)
            .collect();
        return ComplexLatticeField::new(*grid, values);
    }
    let mut out = psi.map(|_| ZERO);
    for (axis, m) in masses.iter().enumerate() {
        let d2 = crate::grid::axis_second_derivative(psi, axis, method)?;
        out.axpy(Complex64::new(-hbar * hbar / (2.0 * m), 0.0), &d2);
    }
    for ((o, p), v) in out.values_mut().iter_mut().zip(psi.values()).zip(potential) {
        *o += v * p;
    }
    Ok(out)
}
