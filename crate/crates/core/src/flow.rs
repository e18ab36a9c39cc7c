//! Evolution of the extended phase space under the total Hamiltonian
//!
//! ```text
//! H_T = (i/hbar) sum dx^d [ Pi_psi (K psi - V psi) - Pi_psi* (K psi* - V psi*) ]
//! ```
//!
//! with `K = sum_axis (hbar^2 / 2 m_axis) d^2`, and of field plus particles
//! under `H = H_T + H_p`, `H_p = sum_k (p_k / m_k) . grad_k S(X_k)`.
//!
//! The equations of motion are Hamilton's equations of these lattice
//! functionals, so `Pi_psi` obeys `dPi/dt = -(i/hbar)(K Pi - V Pi)`, the
//! conjugate of the `psi` equation, as the constraint `Pi = (i hbar/2) psi*`
//! requires.

use std::borrow::Cow;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::constraints::FieldPhaseSpaceState;
use crate::error::{Error, Result};
use crate::grid::{axis_second_derivative, gradient, ComplexLatticeField, DerivativeMethod, GridSpec};
use crate::guidance::{interpolation_stencil, NODE_EPSILON_RATIO};
use crate::rk4::{rk4_step, OdeState};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Momenta above this after a coupled run are flagged in the output.
pub const MOMENTUM_WARNING: f64 = 1e-12;
/// RK4 is stable on the imaginary axis up to `|lambda| dt = 2 sqrt 2`; we keep to 2.
pub const RK4_STABILITY_LIMIT: f64 = 2.0;

pub type PotentialFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Potential {
    /// Samples on every site.
    Static(Vec<f64>),
    /// `V(x, t)` over the full configuration coordinates.
    Dynamic(Arc<PotentialFn>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Static(v) => f.debug_tuple("Static").field(&v.len()).finish(),
            Potential::Dynamic(_) => f.write_str("Dynamic(..)"),
        }
    }
}

impl Potential {
    pub fn zero(grid: &GridSpec) -> Self {
        Potential::Static(vec![0.0; grid.sites()])
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        Potential::Static((0..grid.sites()).map(|s| f(&grid.site_coordinates(s))).collect())
    }

    pub fn sample(&self, grid: &GridSpec, t: f64) -> Cow<'_, [f64]> {
        match self {
            Potential::Static(v) => Cow::Borrowed(v),
            Potential::Dynamic(f) => Cow::Owned((0..grid.sites()).map(|s| f(&grid.site_coordinates(s), t)).collect()),
        }
    }

    fn max_abs(&self, grid: &GridSpec, t: f64) -> f64 {
        self.sample(grid, t).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    FieldOnly,
    FieldAndParticles,
}

/// Everything the flow needs besides the state.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    pub hbar: f64,
    /// One mass per particle.
    pub masses: Vec<f64>,
    /// Grid axes owned by each particle; the grid dimension is
    /// `masses.len() * axes_per_particle`.
    pub axes_per_particle: usize,
    pub potential: Potential,
    pub method: DerivativeMethod,
    pub coupling: Coupling,
}

impl HamiltonianSpec {
    /// One particle of mass `mass` moving in every grid axis.
    pub fn single(grid: &GridSpec, hbar: f64, mass: f64, potential: Potential, method: DerivativeMethod) -> Self {
        HamiltonianSpec {
            hbar,
            masses: vec![mass],
            axes_per_particle: grid.dimension(),
            potential,
            method,
            coupling: Coupling::FieldOnly,
        }
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn particles(&self) -> usize {
        self.masses.len()
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.hbar > 0.0) {
            return Err(Error::Config("hbar must be positive".into()));
        }
        if self.masses.is_empty() || self.masses.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Config("particle masses must be positive".into()));
        }
        if self.masses.len() * self.axes_per_particle != grid.dimension() {
            return Err(Error::Shape(format!(
                "{} particles x {} axes do not fill a {}-d grid",
                self.masses.len(),
                self.axes_per_particle,
                grid.dimension()
            )));
        }
        if let Potential::Static(v) = &self.potential {
            if v.len() != grid.sites() {
                return Err(Error::Shape(format!("potential has {} samples for {} sites", v.len(), grid.sites())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("potential must be finite".into()));
            }
        }
        Ok(())
    }

    /// The mass attached to each grid axis.
    pub fn axis_masses(&self) -> Vec<f64> {
        (0..self.masses.len() * self.axes_per_particle)
            .map(|a| self.masses[a / self.axes_per_particle])
            .collect()
    }

    /// Largest `|lambda|` of the linear field flow at time `t`.
    pub fn spectral_radius(&self, grid: &GridSpec, t: f64) -> f64 {
        let per_axis = grid.laplacian_spectral_radius(self.method) / grid.dimension() as f64;
        let kinetic: f64 = self.axis_masses().iter().map(|m| self.hbar / (2.0 * m) * per_axis).sum();
        kinetic + self.potential.max_abs(grid, t) / self.hbar
    }
}

/// `K f = sum_axis (hbar^2 / 2 m_axis) d^2 f`.
fn kinetic(f: &ComplexLatticeField, h: &HamiltonianSpec) -> Result<ComplexLatticeField> {
    let masses = h.axis_masses();
    let mut out = ComplexLatticeField::zeros(*f.grid());
    for (a, m) in masses.iter().enumerate() {
        let d2 = axis_second_derivative(f, a, h.method)?;
        out.axpy(Complex64::new(h.hbar * h.hbar / (2.0 * m), 0.0), &d2);
    }
    Ok(out)
}

/// `(K - V) f`.
fn schrodinger_operator(f: &ComplexLatticeField, v: &[f64], h: &HamiltonianSpec) -> Result<ComplexLatticeField> {
    let mut k = kinetic(f, h)?;
    for ((o, x), vi) in k.values_mut().iter_mut().zip(f.values()).zip(v) {
        *o -= vi * x;
    }
    Ok(k)
}

fn field_rates_at(s: &FieldPhaseSpaceState, h: &HamiltonianSpec, t: f64) -> Result<FieldPhaseSpaceState> {
    let grid = *s.grid();
    let v = h.potential.sample(&grid, t);
    let c = I / h.hbar;
    Ok(FieldPhaseSpaceState {
        psi: schrodinger_operator(&s.psi, &v, h)?.scaled(c),
        pi_psi: schrodinger_operator(&s.pi_psi, &v, h)?.scaled(-c),
        psi_star: schrodinger_operator(&s.psi_star, &v, h)?.scaled(-c),
        pi_psi_star: schrodinger_operator(&s.pi_psi_star, &v, h)?.scaled(c),
        time: 0.0,
    })
}

/// Time derivatives of `(psi, Pi_psi, psi*, Pi_psi*)` under `H_T`, returned
/// as a state whose fields are the rates.
pub fn field_eom(s: &FieldPhaseSpaceState, h: &HamiltonianSpec) -> Result<FieldPhaseSpaceState> {
    h.validate(s.grid())?;
    field_rates_at(s, h, s.time)
}

/// `H_T` on the lattice.
pub fn total_hamiltonian(s: &FieldPhaseSpaceState, h: &HamiltonianSpec) -> Result<Complex64> {
    let grid = *s.grid();
    let v = h.potential.sample(&grid, s.time);
    let a = schrodinger_operator(&s.psi, &v, h)?;
    let b = schrodinger_operator(&s.psi_star, &v, h)?;
    let sum: Complex64 = (0..grid.sites())
        .map(|i| s.pi_psi.values()[i] * a.values()[i] - s.pi_psi_star.values()[i] * b.values()[i])
        .sum();
    Ok(sum * grid.cell_volume() * I / h.hbar)
}

impl OdeState for FieldPhaseSpaceState {
    fn add_scaled(&mut self, other: &Self, a: f64) {
        self.axpy(a, other);
    }
}

/// Recorded output of [`evolve_extended`].
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub states: Vec<FieldPhaseSpaceState>,
    /// Largest constraint residual seen at any step.
    pub max_constraint_residual: f64,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FieldPhaseSpaceState {
        self.states.last().unwrap()
    }
}

fn check_stability(grid: &GridSpec, h: &HamiltonianSpec, dt: f64, t0: f64, t1: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let rho = h.spectral_radius(grid, t0).max(h.spectral_radius(grid, t1));
    if rho * dt > RK4_STABILITY_LIMIT {
        return Err(Error::Config(format!(
            "dt = {dt:.3e} is beyond the RK4 stability bound {:.3e}",
            RK4_STABILITY_LIMIT / rho
        )));
    }
    Ok(())
}

/// Classical RK4 on the `H_T` flow. Keeps every `record_every`-th state
/// (and the first and last).
pub fn evolve_extended(
    s: &FieldPhaseSpaceState,
    h: &HamiltonianSpec,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<FlowTrajectory> {
    let grid = *s.grid();
    h.validate(&grid)?;
    check_stability(&grid, h, dt, s.time, s.time + dt * steps as f64)?;
    let every = record_every.max(1);
    let mut state = s.clone();
    let mut out = FlowTrajectory {
        states: vec![state.clone()],
        max_constraint_residual: state.constraint_residual(h.hbar),
    };
    let t0 = s.time;
    for n in 1..=steps {
        let t = t0 + (n - 1) as f64 * dt;
        state = rk4_step(&state, t, dt, |t, y| field_rates_at(y, h, t))?;
        state.time = t0 + n as f64 * dt;
        out.max_constraint_residual = out.max_constraint_residual.max(state.constraint_residual(h.hbar));
        if n % every == 0 || n == steps {
            out.states.push(state.clone());
        }
    }
    Ok(out)
}

/// Positions, momenta and masses of the guided particles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleState {
    pub positions: Vec<Vec<f64>>,
    pub momenta: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
}

impl ParticleState {
    /// Particles at rest in momentum: `p_k = 0`.
    pub fn at(positions: Vec<Vec<f64>>, masses: Vec<f64>) -> Self {
        let momenta = positions.iter().map(|x| vec![0.0; x.len()]).collect();
        ParticleState {
            positions,
            momenta,
            masses,
        }
    }

    pub fn max_momentum(&self) -> f64 {
        self.momenta.iter().flatten().fold(0.0, |m, p| m.max(p.abs()))
    }

    pub fn satisfies_guidance_constraint(&self, tol: f64) -> bool {
        self.max_momentum() <= tol
    }

    fn configuration(&self) -> Vec<f64> {
        self.positions.iter().flatten().copied().collect()
    }

    fn has_momentum(&self) -> bool {
        self.momenta.iter().flatten().any(|&p| p != 0.0)
    }

    fn validate(&self, grid: &GridSpec, h: &HamiltonianSpec) -> Result<()> {
        if self.masses != h.masses
            || self.positions.len() != h.particles()
            || self.momenta.len() != h.particles()
            || self.positions.iter().chain(&self.momenta).any(|v| v.len() != h.axes_per_particle)
        {
            return Err(Error::Shape("particle state does not match the Hamiltonian".into()));
        }
        if !grid.contains(&self.configuration()) {
            return Err(Error::Config("particle positions lie outside the grid box".into()));
        }
        Ok(())
    }
}

/// Site values of `d_a S = (hbar/2i)[d_a psi / psi - d_a psi* / psi*]` per axis,
/// with `psi` and `psi*` as independent fields.
fn phase_gradient_sites(s: &FieldPhaseSpaceState, h: &HamiltonianSpec, sites: &[usize]) -> Result<Vec<Vec<Complex64>>> {
    let gp = gradient(&s.psi, h.method)?;
    let gc = gradient(&s.psi_star, h.method)?;
    let c = Complex64::new(0.0, -0.5 * h.hbar);
    Ok(gp
        .iter()
        .zip(&gc)
        .map(|(a, b)| {
            sites
                .iter()
                .map(|&i| c * (a.values()[i] / s.psi.values()[i] - b.values()[i] / s.psi_star.values()[i]))
                .collect()
        })
        .collect())
}

/// Node check at the configuration point.
fn node_check(s: &FieldPhaseSpaceState, stencil: &[(usize, f64)], t: f64) -> Result<()> {
    let threshold = NODE_EPSILON_RATIO * s.psi.max_abs().powi(2);
    let density = stencil
        .iter()
        .map(|&(i, w)| w * s.psi.values()[i])
        .sum::<Complex64>()
        .norm_sqr();
    if density < threshold || stencil.iter().any(|&(i, _)| s.psi.values()[i] == ZERO) {
        return Err(Error::Node { time: t, density, threshold });
    }
    Ok(())
}

/// `(dX/dt, dp/dt)` for every particle, with `dX^a/dt = (1/m) d_a S` and
/// `dp_a/dt = -(p_b/m) d_a d_b S` at the configuration point.
pub fn particle_eom(
    ps: &ParticleState,
    s: &FieldPhaseSpaceState,
    h: &HamiltonianSpec,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let grid = *s.grid();
    ps.validate(&grid, h)?;
    particle_rates(ps, s, h)
}

fn particle_rates(ps: &ParticleState, s: &FieldPhaseSpaceState, h: &HamiltonianSpec) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let grid = *s.grid();
    let x = ps.configuration();
    let stencil = interpolation_stencil(&grid, &x)?;
    node_check(s, &stencil, s.time)?;
    let sites: Vec<usize> = stencil.iter().map(|p| p.0).collect();
    let ds = phase_gradient_sites(s, h, &sites)?;
    let axis_masses = h.axis_masses();
    let dim = grid.dimension();
    let velocity: Vec<f64> = (0..dim)
        .map(|a| stencil.iter().enumerate().map(|(k, &(_, w))| w * ds[a][k].re).sum::<f64>() / axis_masses[a])
        .collect();
    let mut force = vec![0.0; dim];
    if ps.has_momentum() {
        let hess = phase_hessian(s, h)?;
        let p: Vec<f64> = ps.momenta.iter().flatten().copied().collect();
        for a in 0..dim {
            for b in 0..dim {
                let dab: f64 = stencil.iter().map(|&(i, w)| w * hess[a][b][i]).sum();
                force[a] -= p[b] / axis_masses[b] * dab;
            }
        }
    }
    let per = h.axes_per_particle;
    Ok((
        velocity.chunks(per).map(|c| c.to_vec()).collect(),
        force.chunks(per).map(|c| c.to_vec()).collect(),
    ))
}

/// `d_a d_b S = hbar Im(d_a d_b psi / psi - d_a psi d_b psi / psi^2)` on every site.
fn phase_hessian(s: &FieldPhaseSpaceState, h: &HamiltonianSpec) -> Result<Vec<Vec<Vec<f64>>>> {
    let g = gradient(&s.psi, h.method)?;
    let dim = g.len();
    let mut out = vec![vec![vec![0.0; s.grid().sites()]; dim]; dim];
    for a in 0..dim {
        let gg = gradient(&g[a], h.method)?;
        for b in 0..dim {
            for i in 0..s.grid().sites() {
                let p = s.psi.values()[i];
                if p == ZERO {
                    continue;
                }
                let r = gg[b].values()[i] / p - g[a].values()[i] * g[b].values()[i] / (p * p);
                out[a][b][i] = h.hbar * r.im;
            }
        }
    }
    Ok(out)
}

/// `H_p = sum_k (p_k / m_k) . d S(X_k)` on the lattice; exactly zero when every `p_k = 0`.
pub fn particle_hamiltonian(s: &FieldPhaseSpaceState, ps: &ParticleState, h: &HamiltonianSpec) -> Result<Complex64> {
    if !ps.has_momentum() {
        return Ok(ZERO);
    }
    let stencil = interpolation_stencil(s.grid(), &ps.configuration())?;
    let sites: Vec<usize> = stencil.iter().map(|p| p.0).collect();
    let ds = phase_gradient_sites(s, h, &sites)?;
    let p: Vec<f64> = ps.momenta.iter().flatten().copied().collect();
    let masses = h.axis_masses();
    let mut sum = ZERO;
    for a in 0..p.len() {
        for (k, &(_, w)) in stencil.iter().enumerate() {
            sum += p[a] / masses[a] * w * ds[a][k];
        }
    }
    Ok(sum)
}

/// `H_T + H_p`.
pub fn hamiltonian_value(s: &FieldPhaseSpaceState, ps: &ParticleState, h: &HamiltonianSpec) -> Result<Complex64> {
    Ok(total_hamiltonian(s, h)? + particle_hamiltonian(s, ps, h)?)
}

/// Rates of `Pi_psi` and `Pi_psi*` contributed by `H_p`:
/// `-(1/dx^d) dH_p/dpsi_j` and `-(1/dx^d) dH_p/dpsi*_j`, the lattice form of
/// the `(p_k / m psi) d_k delta(x - X)` term.
pub fn particle_momentum_source(
    s: &FieldPhaseSpaceState,
    ps: &ParticleState,
    h: &HamiltonianSpec,
) -> Result<(ComplexLatticeField, ComplexLatticeField)> {
    let grid = *s.grid();
    let mut d_psi = ComplexLatticeField::zeros(grid);
    let mut d_star = ComplexLatticeField::zeros(grid);
    if !ps.has_momentum() {
        return Ok((d_psi, d_star));
    }
    let stencil = interpolation_stencil(&grid, &ps.configuration())?;
    let p: Vec<f64> = ps.momenta.iter().flatten().copied().collect();
    let masses = h.axis_masses();
    let c = Complex64::new(0.0, -0.5 * h.hbar);
    let gp = gradient(&s.psi, h.method)?;
    let gc = gradient(&s.psi_star, h.method)?;
    for a in 0..p.len() {
        let coef = c * p[a] / masses[a];
        // sum_i w_i D_ij / psi_i is (D^T u)_j with u = w / psi; D is antisymmetric
        let mut u = ComplexLatticeField::zeros(grid);
        let mut u_star = ComplexLatticeField::zeros(grid);
        for &(i, w) in &stencil {
            u.values_mut()[i] += w / s.psi.values()[i];
            u_star.values_mut()[i] += w / s.psi_star.values()[i];
        }
        let du = &gradient(&u, h.method)?[a];
        let du_star = &gradient(&u_star, h.method)?[a];
        for j in 0..grid.sites() {
            d_psi.values_mut()[j] -= coef * du.values()[j];
            d_star.values_mut()[j] += coef * du_star.values()[j];
        }
        for &(i, w) in &stencil {
            let (pi, ci) = (s.psi.values()[i], s.psi_star.values()[i]);
            d_psi.values_mut()[i] -= coef * w * gp[a].values()[i] / (pi * pi);
            d_star.values_mut()[i] += coef * w * gc[a].values()[i] / (ci * ci);
        }
    }
    let scale = Complex64::new(-1.0 / grid.cell_volume(), 0.0);
    Ok((d_psi.scaled(scale), d_star.scaled(scale)))
}

/// Field and particle rates under `H = H_T + H_p`.
pub fn coupled_eom(
    s: &FieldPhaseSpaceState,
    ps: &ParticleState,
    h: &HamiltonianSpec,
) -> Result<(FieldPhaseSpaceState, ParticleState)> {
    h.validate(s.grid())?;
    ps.validate(s.grid(), h)?;
    coupled_rates(s, ps, h, s.time)
}

fn coupled_rates(
    s: &FieldPhaseSpaceState,
    ps: &ParticleState,
    h: &HamiltonianSpec,
    t: f64,
) -> Result<(FieldPhaseSpaceState, ParticleState)> {
    let mut field = field_rates_at(s, h, t)?;
    if ps.has_momentum() {
        let (dpi, dpi_star) = particle_momentum_source(s, ps, h)?;
        field.pi_psi.axpy(Complex64::new(1.0, 0.0), &dpi);
        field.pi_psi_star.axpy(Complex64::new(1.0, 0.0), &dpi_star);
    }
    let mut at_t = s.clone();
    at_t.time = t;
    let (dx, dp) = particle_rates(ps, &at_t, h)?;
    Ok((
        field,
        ParticleState {
            positions: dx,
            momenta: dp,
            masses: ps.masses.clone(),
        },
    ))
}

#[derive(Debug, Clone)]
struct Coupled {
    field: FieldPhaseSpaceState,
    particles: ParticleState,
}

impl OdeState for Coupled {
    fn add_scaled(&mut self, other: &Self, a: f64) {
        self.field.axpy(a, &other.field);
        for (x, dx) in self.particles.positions.iter_mut().zip(&other.particles.positions) {
            x.add_scaled(dx, a);
        }
        for (p, dp) in self.particles.momenta.iter_mut().zip(&other.particles.momenta) {
            p.add_scaled(dp, a);
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoupledTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<FieldPhaseSpaceState>,
    pub particles: Vec<ParticleState>,
    /// `max_t max_k |p_k(t)|` over every step.
    pub max_momentum: f64,
    pub max_constraint_residual: f64,
}

impl CoupledTrajectory {
    /// Momenta drifted off the `p = 0` surface.
    pub fn constraint_warning(&self) -> bool {
        self.max_momentum > MOMENTUM_WARNING
    }
}

/// Co-integrates field and particles with RK4. Starting momenta must be
/// exactly zero.
pub fn evolve_coupled(
    s: &FieldPhaseSpaceState,
    ps: &ParticleState,
    h: &HamiltonianSpec,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<CoupledTrajectory> {
    let grid = *s.grid();
    h.validate(&grid)?;
    ps.validate(&grid, h)?;
    if ps.has_momentum() {
        return Err(Error::Config("coupled evolution starts on the p = 0 surface".into()));
    }
    check_stability(&grid, h, dt, s.time, s.time + dt * steps as f64)?;
    let every = record_every.max(1);
    let mut y = Coupled {
        field: s.clone(),
        particles: ps.clone(),
    };
    let mut out = CoupledTrajectory {
        times: vec![s.time],
        fields: vec![s.clone()],
        particles: vec![ps.clone()],
        max_momentum: 0.0,
        max_constraint_residual: s.constraint_residual(h.hbar),
    };
    let t0 = s.time;
    for n in 1..=steps {
        let t = t0 + (n - 1) as f64 * dt;
        y = rk4_step(&y, t, dt, |t, c: &Coupled| {
            let (field, particles) = coupled_rates(&c.field, &c.particles, h, t)?;
            Ok::<_, Error>(Coupled { field, particles })
        })?;
        y.field.time = t0 + n as f64 * dt;
        for x in y.particles.positions.iter_mut().flatten() {
            *x = grid.wrap(*x);
        }
        out.max_momentum = out.max_momentum.max(y.particles.max_momentum());
        out.max_constraint_residual = out.max_constraint_residual.max(y.field.constraint_residual(h.hbar));
        if n % every == 0 || n == steps {
            out.times.push(y.field.time);
            out.fields.push(y.field.clone());
            out.particles.push(y.particles.clone());
        }
    }
    Ok(out)
}
