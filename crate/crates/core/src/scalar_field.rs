//! A free real scalar field in a periodic 1D box, truncated to finitely many
//! Fourier modes, with Gaussian wave functionals and guided mode coordinates.
//!
//! Each mode of the half-set carries a complex coordinate `q_k` (its partner
//! is `q_{-k} = q_k*`) and the mode Hamiltonian
//! `H_k = -d^2/dq dq* + w_k^2 q q*`, with `w_k^2 = k^2 + m^2` and `hbar = 1`.
//! Gaussians `Psi = exp(-a q q* + mu q* + nu q + g)` are closed under it:
//!
//! ```text
//! a' = i (w^2 - a^2),   mu' = -i a mu,   nu' = -i a nu,   g' = -i (a - mu nu)
//! ```
//!
//! Mode coordinates are guided by `dq/dt = dS/dq*` with `S = Im log Psi`.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ComplexLatticeField, GridSpec};
use crate::guidance::NODE_EPSILON_RATIO;
use crate::rk4::rk4_step;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default truncation `|n| <= 8`.
pub const DEFAULT_MAX_MODE: i64 = 8;
/// Largest imaginary part tolerated in a reconstructed field.
pub const REALITY_TOLERANCE: f64 = 1e-10;

/// Wavenumbers `k = 2 pi n / L` for `n` in a symmetric set, stored as the
/// half-set that holds one member of each `+-` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSet {
    length: f64,
    mass: f64,
    half: Vec<i64>,
}

impl ModeSet {
    /// Modes `n = 1..=n_max`, paired with `-n`.
    pub fn new(length: f64, mass: f64, n_max: i64) -> Result<Self> {
        Self::with_half_set(length, mass, (1..=n_max).collect())
    }

    /// An explicit half-set. `n = 0` is allowed and is its own partner.
    pub fn with_half_set(length: f64, mass: f64, half: Vec<i64>) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!("box length must be positive, got {length}")));
        }
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::Config(format!("field mass must be non-negative, got {mass}")));
        }
        if half.is_empty() {
            return Err(Error::Config("mode set is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for &n in &half {
            if !seen.insert(n.abs()) {
                return Err(Error::Config(format!("mode n = {n} or its partner appears twice in the half-set")));
            }
        }
        let set = ModeSet { length, mass, half };
        if set.half.iter().any(|&n| set.omega(n) == 0.0) {
            return Err(Error::Config("a massless zero mode has no Gaussian ground state".into()));
        }
        Ok(set)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn half_set(&self) -> &[i64] {
        &self.half
    }

    pub fn len(&self) -> usize {
        self.half.len()
    }

    pub fn is_empty(&self) -> bool {
        self.half.is_empty()
    }

    /// Every mode number, closed under `n -> -n`.
    pub fn full_set(&self) -> Vec<i64> {
        let mut all: BTreeSet<i64> = BTreeSet::new();
        for &n in &self.half {
            all.insert(n);
            all.insert(-n);
        }
        all.into_iter().collect()
    }

    pub fn wavenumber(&self, n: i64) -> f64 {
        2.0 * PI * n as f64 / self.length
    }

    pub fn omega(&self, n: i64) -> f64 {
        let k = self.wavenumber(n);
        (k * k + self.mass * self.mass).sqrt()
    }

    /// `(n, q_n)` for the full set from half-set coordinates.
    pub fn expand(&self, half_q: &[Complex64]) -> Result<Vec<(i64, Complex64)>> {
        if half_q.len() != self.half.len() {
            return Err(Error::Shape(format!("{} coordinates for {} modes", half_q.len(), self.half.len())));
        }
        let mut out = Vec::with_capacity(2 * half_q.len());
        for (&n, &q) in self.half.iter().zip(half_q) {
            out.push((n, q));
            if n != 0 {
                out.push((-n, q.conj()));
            }
        }
        Ok(out)
    }
}

/// One mode's Gaussian parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMode {
    pub n: i64,
    pub omega: f64,
    pub alpha: Complex64,
    pub mu: Complex64,
    pub nu: Complex64,
    pub gamma: Complex64,
}

impl GaussianMode {
    /// Centre of `|Psi|^2`: `(mu + conj(nu)) / (2 Re a)`.
    pub fn center(&self) -> Complex64 {
        (self.mu + self.nu.conj()) / (2.0 * self.alpha.re)
    }

    /// `log` of `int |Psi|^2 d^2q`.
    pub fn log_norm(&self) -> f64 {
        let a = 2.0 * self.alpha.re;
        2.0 * self.gamma.re + (PI / a).ln() + (self.mu + self.nu.conj()).norm_sqr() / a
    }

    /// `<|q - c|^2>` under `|Psi|^2`.
    pub fn spread(&self) -> f64 {
        1.0 / (2.0 * self.alpha.re)
    }

    /// `log Psi(q)`.
    pub fn log_value(&self, q: Complex64) -> Complex64 {
        -self.alpha * q * q.conj() + self.mu * q.conj() + self.nu * q + self.gamma
    }

    /// `dS/dq*` at `q`.
    pub fn velocity(&self, q: Complex64) -> Complex64 {
        -self.alpha.im * q + (self.mu - self.nu.conj()) / (2.0 * I)
    }

    fn rates(&self) -> [Complex64; 4] {
        let w2 = self.omega * self.omega;
        [
            I * (w2 - self.alpha * self.alpha),
            -I * self.alpha * self.mu,
            -I * self.alpha * self.nu,
            -I * (self.alpha - self.mu * self.nu),
        ]
    }
}

/// A product of per-mode Gaussians over the half-set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianModeState {
    pub modes: ModeSet,
    pub params: Vec<GaussianMode>,
    pub time: f64,
}

/// Ground state of every mode: `a_k = w_k`, no displacement.
pub fn vacuum_state(modes: &ModeSet) -> GaussianModeState {
    let params = modes
        .half_set()
        .iter()
        .map(|&n| {
            let w = modes.omega(n);
            GaussianMode {
                n,
                omega: w,
                alpha: Complex64::new(w, 0.0),
                mu: ZERO,
                nu: ZERO,
                gamma: Complex64::new(0.5 * (2.0 * w / PI).ln(), 0.0),
            }
        })
        .collect();
    GaussianModeState {
        modes: modes.clone(),
        params,
        time: 0.0,
    }
}

impl GaussianModeState {
    /// Coherent states: vacuum widths displaced to `centers`, which then
    /// rotate as `c_k(t) = c_k(0) e^{-i w_k t}`.
    pub fn coherent(modes: &ModeSet, centers: &[Complex64]) -> Result<Self> {
        Self::displaced(modes, &modes.half_set().iter().map(|&n| Complex64::new(modes.omega(n), 0.0)).collect::<Vec<_>>(), centers)
    }

    /// Gaussians of widths `alphas` centred on `centers`, normalized.
    pub fn displaced(modes: &ModeSet, alphas: &[Complex64], centers: &[Complex64]) -> Result<Self> {
        if alphas.len() != modes.len() || centers.len() != modes.len() {
            return Err(Error::Shape("need one width and one centre per half-set mode".into()));
        }
        let mut params = Vec::with_capacity(modes.len());
        for (k, &n) in modes.half_set().iter().enumerate() {
            let alpha = alphas[k];
            if !(alpha.re > 0.0) {
                return Err(Error::Instability { mode: k, re_alpha: alpha.re });
            }
            let mut m = GaussianMode {
                n,
                omega: modes.omega(n),
                alpha,
                mu: 2.0 * alpha.re * centers[k],
                nu: ZERO,
                gamma: ZERO,
            };
            m.gamma = Complex64::new(-0.5 * m.log_norm(), 0.0);
            params.push(m);
        }
        Ok(GaussianModeState {
            modes: modes.clone(),
            params,
            time: 0.0,
        })
    }

    /// Vacuum energy `sum_k w_k`.
    pub fn vacuum_energy(&self) -> f64 {
        self.params.iter().map(|m| m.omega).sum()
    }

    pub fn centers(&self) -> Vec<Complex64> {
        self.params.iter().map(GaussianMode::center).collect()
    }

    pub fn log_norm(&self) -> f64 {
        self.params.iter().map(GaussianMode::log_norm).sum()
    }

    /// `Psi(q)` for half-set coordinates.
    pub fn value(&self, q: &[Complex64]) -> Complex64 {
        self.params.iter().zip(q).map(|(m, &qk)| m.log_value(qk)).sum::<Complex64>().exp()
    }

    /// `S(q) = Im log Psi`, continuous in the parameters.
    pub fn phase(&self, q: &[Complex64]) -> f64 {
        self.params.iter().zip(q).map(|(m, &qk)| m.log_value(qk).im).sum()
    }

    fn check(&self) -> Result<()> {
        for (k, m) in self.params.iter().enumerate() {
            if !(m.alpha.re > 0.0) {
                return Err(Error::Instability { mode: k, re_alpha: m.alpha.re });
            }
        }
        Ok(())
    }

    fn pack(&self) -> Vec<Complex64> {
        self.params.iter().flat_map(|m| [m.alpha, m.mu, m.nu, m.gamma]).collect()
    }

    fn unpack(&self, y: &[Complex64], time: f64) -> Self {
        let mut out = self.clone();
        for (m, c) in out.params.iter_mut().zip(y.chunks(4)) {
            m.alpha = c[0];
            m.mu = c[1];
            m.nu = c[2];
            m.gamma = c[3];
        }
        out.time = time;
        out
    }
}

fn gaussian_rates(template: &GaussianModeState, y: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(y.len());
    for (k, c) in y.chunks(4).enumerate() {
        if !(c[0].re > 0.0) {
            return Err(Error::Instability { mode: k, re_alpha: c[0].re });
        }
        let m = GaussianMode {
            alpha: c[0],
            mu: c[1],
            nu: c[2],
            gamma: c[3],
            ..template.params[k]
        };
        out.extend(m.rates());
    }
    Ok(out)
}

/// RK4 on the Gaussian parameters; keeps every `record_every`-th state.
pub fn evolve_gaussian(state: &GaussianModeState, dt: f64, steps: usize, record_every: usize) -> Result<Vec<GaussianModeState>> {
    check_step(dt)?;
    state.check()?;
    let every = record_every.max(1);
    let mut y = state.pack();
    let mut out = vec![state.clone()];
    for n in 1..=steps {
        let t = state.time + (n - 1) as f64 * dt;
        y = rk4_step(&y, t, dt, |_, y: &Vec<Complex64>| gaussian_rates(state, y))?;
        if n % every == 0 || n == steps {
            let s = state.unpack(&y, state.time + n as f64 * dt);
            s.check()?;
            out.push(s);
        }
    }
    Ok(out)
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// Guided mode coordinates `q_k` with their momenta `p_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeParticleState {
    pub q: Vec<Complex64>,
    pub p: Vec<Complex64>,
}

impl ModeParticleState {
    pub fn at(q: Vec<Complex64>) -> Self {
        let p = vec![ZERO; q.len()];
        ModeParticleState { q, p }
    }

    pub fn max_momentum(&self) -> f64 {
        self.p.iter().fold(0.0, |m, p| m.max(p.norm()))
    }
}

/// Node test: `|Psi(q)|^2` against `1e-12` of its peak.
fn node_check(state: &GaussianModeState, q: &[Complex64]) -> Result<()> {
    let log_ratio: f64 = state
        .params
        .iter()
        .zip(q)
        .map(|(m, &qk)| -2.0 * m.alpha.re * (qk - m.center()).norm_sqr())
        .sum();
    if log_ratio < NODE_EPSILON_RATIO.ln() {
        return Err(Error::Node {
            time: state.time,
            density: log_ratio.exp(),
            threshold: NODE_EPSILON_RATIO,
        });
    }
    Ok(())
}

/// `dq_k/dt = dS/dq_k*` per half-set mode.
pub fn mode_guidance_rhs(state: &GaussianModeState, mp: &ModeParticleState) -> Result<Vec<Complex64>> {
    if mp.q.len() != state.params.len() || mp.p.len() != state.params.len() {
        return Err(Error::Shape("one coordinate and momentum per half-set mode".into()));
    }
    node_check(state, &mp.q)?;
    Ok(state.params.iter().zip(&mp.q).map(|(m, &q)| m.velocity(q)).collect())
}

/// `dp_k/dt = -dH_p/dq_k = -(p_k d^2S/dq dq* + p_k* d^2S/dq^2) = Im(a_k) p_k`.
fn momentum_rates(state: &GaussianModeState, p: &[Complex64]) -> Vec<Complex64> {
    state.params.iter().zip(p).map(|(m, &pk)| m.alpha.im * pk).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<GaussianModeState>,
    pub particles: Vec<ModeParticleState>,
    pub max_momentum: f64,
}

impl ModeTrajectory {
    pub fn constraint_warning(&self) -> bool {
        self.max_momentum > 1e-12
    }
}

/// Co-evolves the wave functional and the guided coordinates with RK4.
/// Momenta must start at zero.
pub fn evolve_coupled_modes(
    state: &GaussianModeState,
    mp: &ModeParticleState,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<ModeTrajectory> {
    check_step(dt)?;
    state.check()?;
    mode_guidance_rhs(state, mp)?;
    if mp.p.iter().any(|p| *p != ZERO) {
        return Err(Error::Config("mode momenta must start at zero".into()));
    }
    let nm = state.params.len();
    let every = record_every.max(1);
    let mut y = state.pack();
    y.extend(&mp.q);
    y.extend(&mp.p);
    let rates = |t: f64, y: &Vec<Complex64>| -> Result<Vec<Complex64>> {
        let s = state.unpack(&y[..4 * nm], t);
        let particles = ModeParticleState {
            q: y[4 * nm..5 * nm].to_vec(),
            p: y[5 * nm..].to_vec(),
        };
        let mut out = gaussian_rates(state, &y[..4 * nm])?;
        out.extend(mode_guidance_rhs(&s, &particles)?);
        out.extend(momentum_rates(&s, &particles.p));
        Ok(out)
    };
    let mut out = ModeTrajectory {
        times: vec![state.time],
        states: vec![state.clone()],
        particles: vec![mp.clone()],
        max_momentum: 0.0,
    };
    for n in 1..=steps {
        let t = state.time + (n - 1) as f64 * dt;
        y = rk4_step(&y, t, dt, rates)?;
        let p = ModeParticleState {
            q: y[4 * nm..5 * nm].to_vec(),
            p: y[5 * nm..].to_vec(),
        };
        out.max_momentum = out.max_momentum.max(p.max_momentum());
        if n % every == 0 || n == steps {
            let s = state.unpack(&y[..4 * nm], state.time + n as f64 * dt);
            s.check()?;
            out.times.push(s.time);
            out.states.push(s);
            out.particles.push(p);
        }
    }
    Ok(out)
}

/// `phi(x) = L^{-1/2} sum_k q_k e^{ikx}` over a full, paired mode list.
pub fn reconstruct_field(modes: &ModeSet, coords: &[(i64, Complex64)], xs: &[f64]) -> Result<Vec<f64>> {
    for &(n, q) in coords {
        match coords.iter().find(|&&(m, _)| m == -n) {
            Some(&(_, partner)) if (partner - q.conj()).norm() <= REALITY_TOLERANCE * (1.0 + q.norm()) => {}
            Some(_) => return Err(Error::Reality(format!("q_{{{}}} is not the conjugate of q_{{{n}}}", -n))),
            None => return Err(Error::Reality(format!("mode {n} has no partner {}", -n))),
        }
    }
    let scale = 1.0 / modes.length().sqrt();
    xs.iter()
        .map(|&x| {
            let v: Complex64 = coords
                .iter()
                .map(|&(n, q)| q * Complex64::from_polar(1.0, modes.wavenumber(n) * x))
                .sum::<Complex64>()
                * scale;
            if v.im.abs() > REALITY_TOLERANCE * (1.0 + v.re.abs()) {
                return Err(Error::Reality(format!("phi({x}) has imaginary part {:.3e}", v.im)));
            }
            Ok(v.re)
        })
        .collect()
}

/// One mode as an ordinary 2D problem on `q = x + i y`: the mode Hamiltonian
/// is a particle of mass 2 in `V = w^2 (x^2 + y^2)`.
pub fn mode_grid_potential(grid: &GridSpec, omega: f64) -> Result<Vec<f64>> {
    if grid.dimension() != 2 {
        return Err(Error::Shape("a mode lives on a 2D grid over (Re q, Im q)".into()));
    }
    Ok((0..grid.sites())
        .map(|s| {
            let x = grid.site_coordinates(s);
            omega * omega * (x[0] * x[0] + x[1] * x[1])
        })
        .collect())
}

/// Mass per grid axis of [`mode_grid_potential`].
pub const MODE_GRID_MASS: f64 = 2.0;

/// Samples one mode's `Psi` on a 2D grid over `(Re q, Im q)`.
pub fn sample_mode(mode: &GaussianMode, grid: &GridSpec) -> Result<ComplexLatticeField> {
    if grid.dimension() != 2 {
        return Err(Error::Shape("a mode lives on a 2D grid over (Re q, Im q)".into()));
    }
    Ok(ComplexLatticeField::from_fn(*grid, |x| mode.log_value(Complex64::new(x[0], x[1])).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DerivativeMethod, Units};
    use crate::guidance::velocity_field;
    use crate::solver::SplitStep;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_zero_mode_vacuum() {
        let modes = ModeSet::with_half_set(10.0, 1.0, vec![0]).unwrap();
        let v = vacuum_state(&modes);
        assert_eq!(v.params[0].alpha, c(1.0, 0.0));
        assert_eq!(v.vacuum_energy(), 1.0);
        assert!(v.log_norm().abs() < 1e-14);
    }

    #[test]
    fn vacuum_second_moment_by_quadrature() {
        let modes = ModeSet::new(2.0 * PI, 0.5, 2).unwrap();
        let v = vacuum_state(&modes);
        for m in &v.params {
            // radial quadrature of |q|^2 |Psi|^2 d^2q
            let (mut num, mut den) = (0.0, 0.0);
            let dr = 1e-4;
            for i in 0..100_000 {
                let r = (i as f64 + 0.5) * dr;
                let w = (-2.0 * m.omega * r * r).exp() * 2.0 * PI * r * dr;
                num += r * r * w;
                den += w;
            }
            assert!((num / den - 1.0 / (2.0 * m.omega)).abs() < 1e-8);
            assert!((m.spread() - 1.0 / (2.0 * m.omega)).abs() < 1e-15);
        }
    }

    #[test]
    fn half_set_rejects_pairs_and_duplicates() {
        assert!(ModeSet::with_half_set(1.0, 1.0, vec![1, -1]).is_err());
        assert!(ModeSet::with_half_set(1.0, 1.0, vec![2, 2]).is_err());
        assert!(ModeSet::with_half_set(1.0, 0.0, vec![0]).is_err());
        let m = ModeSet::new(1.0, 1.0, 3).unwrap();
        assert_eq!(m.full_set(), vec![-3, -2, -1, 1, 2, 3]);
    }

    #[test]
    fn vacuum_is_stationary_with_phase_minus_energy() {
        let modes = ModeSet::new(5.0, 1.0, 3).unwrap();
        let v = vacuum_state(&modes);
        let t = 1.3;
        let out = evolve_gaussian(&v, 1e-3, 1300, 1300).unwrap();
        let last = out.last().unwrap();
        for (a, b) in last.params.iter().zip(&v.params) {
            assert!((a.alpha - b.alpha).norm() < 1e-14);
        }
        let phase: f64 = last.params.iter().map(|m| m.gamma.im).sum();
        assert!((phase + v.vacuum_energy() * t).abs() < 1e-10);
        let mp = ModeParticleState::at(vec![c(0.2, -0.1), c(0.0, 0.3), c(-0.4, 0.0)]);
        assert!(mode_guidance_rhs(&v, &mp).unwrap().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn coherent_centres_rotate_at_the_mode_frequency() {
        let modes = ModeSet::new(4.0, 0.7, 2).unwrap();
        let c0 = vec![c(0.5, 0.2), c(-0.3, 0.4)];
        let s = GaussianModeState::coherent(&modes, &c0).unwrap();
        let out = evolve_gaussian(&s, 1e-3, 2000, 100).unwrap();
        for st in &out {
            for (k, m) in st.params.iter().enumerate() {
                let expect = c0[k] * Complex64::from_polar(1.0, -m.omega * st.time);
                assert!((m.center() - expect).norm() < 1e-8);
            }
            assert!(st.log_norm().abs() < 1e-10);
        }
    }

    #[test]
    fn squeezed_width_has_half_period() {
        let modes = ModeSet::with_half_set(6.0, 1.0, vec![1]).unwrap();
        let w = modes.omega(1);
        let s = GaussianModeState::displaced(&modes, &[c(2.5 * w, 0.0)], &[ZERO]).unwrap();
        let period = PI / w;
        let steps = 4000;
        let out = evolve_gaussian(&s, period / steps as f64, steps, steps).unwrap();
        assert!((out.last().unwrap().params[0].alpha - s.params[0].alpha).norm() < 1e-6);
        assert!(out.last().unwrap().log_norm().abs() < 1e-10);
    }

    #[test]
    fn width_collapse_is_an_instability() {
        let modes = ModeSet::with_half_set(6.0, 1.0, vec![1]).unwrap();
        let mut s = vacuum_state(&modes);
        s.params[0].alpha = c(-0.1, 0.0);
        assert!(matches!(evolve_gaussian(&s, 1e-3, 1, 1), Err(Error::Instability { .. })));
    }

    #[test]
    fn coherent_trajectories_keep_their_offset() {
        let modes = ModeSet::new(3.0, 1.0, 2).unwrap();
        let c0 = vec![c(0.4, 0.0), c(0.0, -0.3)];
        let s = GaussianModeState::coherent(&modes, &c0).unwrap();
        let q0 = vec![c(0.5, 0.1), c(0.2, -0.4)];
        let tr = evolve_coupled_modes(&s, &ModeParticleState::at(q0.clone()), 1e-3, 3000, 500).unwrap();
        for (st, p) in tr.states.iter().zip(&tr.particles) {
            for k in 0..2 {
                let offset = p.q[k] - st.params[k].center();
                assert!((offset - (q0[k] - c0[k])).norm() < 1e-9);
            }
        }
        assert_eq!(tr.max_momentum, 0.0);
    }

    #[test]
    fn vacuum_coordinates_do_not_move() {
        let modes = ModeSet::new(3.0, 1.0, 2).unwrap();
        let q0 = vec![c(0.5, 0.1), c(0.2, -0.4)];
        let tr = evolve_coupled_modes(&vacuum_state(&modes), &ModeParticleState::at(q0.clone()), 1e-2, 100, 100).unwrap();
        assert_eq!(tr.particles.last().unwrap().q, q0);
    }

    #[test]
    fn nonzero_starting_momentum_is_rejected() {
        let modes = ModeSet::new(3.0, 1.0, 1).unwrap();
        let mp = ModeParticleState {
            q: vec![ZERO],
            p: vec![c(1e-30, 0.0)],
        };
        assert!(evolve_coupled_modes(&vacuum_state(&modes), &mp, 1e-2, 1, 1).is_err());
    }

    #[test]
    fn reconstruction_examples() {
        let modes = ModeSet::new(2.0, 1.0, 1).unwrap();
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.2).collect();
        let zero = reconstruct_field(&modes, &modes.expand(&[ZERO]).unwrap(), &xs).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
        let one = reconstruct_field(&modes, &modes.expand(&[c(1.0, 0.0)]).unwrap(), &xs).unwrap();
        let k = modes.wavenumber(1);
        for (x, v) in xs.iter().zip(&one) {
            assert!((v - 2.0 * (k * x).cos() / 2f64.sqrt()).abs() < 1e-14);
        }
        let broken = vec![(1, c(1.0, 0.5)), (-1, c(1.0, 0.5))];
        assert!(matches!(reconstruct_field(&modes, &broken, &xs), Err(Error::Reality(_))));
    }

    #[test]
    fn reconstruction_obeys_parseval() {
        let modes = ModeSet::new(3.0, 1.0, 4).unwrap();
        let q = vec![c(0.3, -0.2), c(-0.1, 0.4), c(0.25, 0.05), c(0.0, -0.15)];
        let full = modes.expand(&q).unwrap();
        let n = 256;
        let dx = modes.length() / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();
        let phi = reconstruct_field(&modes, &full, &xs).unwrap();
        let integral: f64 = phi.iter().map(|v| v * v).sum::<f64>() * dx;
        let sum: f64 = full.iter().map(|(_, q)| q.norm_sqr()).sum();
        assert!((integral - sum).abs() < 1e-12);
    }

    #[test]
    fn gaussian_evolution_matches_grid_solver() {
        let modes = ModeSet::with_half_set(6.0, 1.0, vec![1]).unwrap();
        let w = modes.omega(1);
        let s = GaussianModeState::displaced(&modes, &[c(1.7 * w, 0.4)], &[c(0.3, -0.2)]).unwrap();
        let grid = GridSpec::periodic_2d(64, 10.0).unwrap();
        let v = mode_grid_potential(&grid, w).unwrap();
        let dt = 1e-3;
        let steps = 500;
        let solver = SplitStep::new(grid, &v, &[MODE_GRID_MASS; 2], Units::default(), dt, DerivativeMethod::Spectral).unwrap();
        let mut psi = sample_mode(&s.params[0], &grid).unwrap();
        let n0 = psi.norm();
        for _ in 0..steps {
            solver.step(&mut psi).unwrap();
        }
        let out = evolve_gaussian(&s, dt, steps, steps).unwrap();
        let expect = sample_mode(&out.last().unwrap().params[0], &grid).unwrap();
        let scale = Complex64::new(1.0 / n0, 0.0);
        assert!(psi.scaled(scale).l2_distance(&expect.scaled(scale)).unwrap() < 1e-6);

        // guidance: dS/dq* equals (v_x + i v_y) of the grid current
        let vf = velocity_field(&psi, 1.0, &[MODE_GRID_MASS; 2], DerivativeMethod::Spectral).unwrap();
        let q = c(0.4, 0.0);
        let grid_v = vf.interpolate(&[q.re, q.im]).unwrap();
        let mode_v = out.last().unwrap().params[0].velocity(q);
        assert!((mode_v - c(grid_v[0], grid_v[1])).norm() < 1e-6, "{mode_v} vs {grid_v:?}");
    }
}
