//! Particle velocities from the probability current and trajectory
//! integration through stored wave-function frames.
//!
//! Velocities always come from the current ratio
//! `v = (hbar/m) Im(psi* grad psi) / |psi|^2`, never from a differentiated
//! phase. Sites where `|psi|^2` falls below `1e-12 max |psi|^2` are masked.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, Boundary, ComplexLatticeField, DerivativeMethod, GridSpec};
use crate::rk4::rk4_step;

/// Node threshold relative to the largest density on the lattice.
pub const NODE_EPSILON_RATIO: f64 = 1e-12;
/// Under the shrink policy, steps are cut by 4x below this multiple of the node threshold.
pub const SHRINK_FACTOR: f64 = 1e3;

/// What a trajectory does when it runs into a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodePolicy {
    /// Quarter the step near a node and halt inside one.
    #[default]
    Shrink,
    /// Stop moving inside a node and carry on.
    Freeze,
}

/// Current-ratio velocities on every site.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: GridSpec,
    /// One array per axis; masked sites hold zero.
    pub components: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    pub threshold: f64,
}

impl VelocityField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn is_masked(&self, site: usize) -> bool {
        self.mask[site]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Cubic (bicubic in 2D) interpolation of the sampled field.
    pub fn interpolate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let stencil = interpolation_stencil(&self.grid, x)?;
        Ok(self
            .components
            .iter()
            .map(|c| stencil.iter().map(|&(s, w)| w * c[s]).sum())
            .collect())
    }
}

fn site_velocity(psi: Complex64, grad: &[Complex64], hbar: f64, masses: &[f64]) -> Vec<f64> {
    let rho = psi.norm_sqr();
    grad.iter()
        .zip(masses)
        .map(|(g, m)| hbar * (psi.conj() * g).im / (m * rho))
        .collect()
}

fn check_masses(grid: &GridSpec, masses: &[f64]) -> Result<()> {
    if masses.len() != grid.dimension() || masses.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Config("need one positive mass per grid axis".into()));
    }
    Ok(())
}

/// `v_a = (hbar / m_a) Im(psi* d_a psi) / |psi|^2` with per-axis masses.
pub fn velocity_field(psi: &ComplexLatticeField, hbar: f64, masses: &[f64], method: DerivativeMethod) -> Result<VelocityField> {
    let grid = *psi.grid();
    check_masses(&grid, masses)?;
    let threshold = NODE_EPSILON_RATIO * psi.max_abs().powi(2);
    let grads = gradient(psi, method)?;
    let dim = grid.dimension();
    let mut components = vec![vec![0.0; grid.sites()]; dim];
    let mut mask = vec![false; grid.sites()];
    let mut g = vec![Complex64::new(0.0, 0.0); dim];
    for s in 0..grid.sites() {
        let p = psi.values()[s];
        if p.norm_sqr() < threshold || p.norm_sqr() == 0.0 {
            mask[s] = true;
            continue;
        }
        for a in 0..dim {
            g[a] = grads[a].values()[s];
        }
        for (a, v) in site_velocity(p, &g, hbar, masses).into_iter().enumerate() {
            components[a][s] = v;
        }
    }
    if mask.iter().all(|&m| m) {
        return Err(Error::DegenerateState("every site is a node".into()));
    }
    Ok(VelocityField {
        grid,
        components,
        mask,
        threshold,
    })
}

/// Four-point Lagrange weights at fractional position `u` over nodes 0..3.
fn lagrange4(u: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for (j, wj) in w.iter_mut().enumerate() {
        for m in 0..4 {
            if m != j {
                *wj *= (u - m as f64) / (j as f64 - m as f64);
            }
        }
    }
    w
}

/// Up to 16 `(site, weight)` pairs, kept on the stack.
struct Stencil {
    entries: [(usize, f64); 16],
    len: usize,
}

impl Stencil {
    fn iter(&self) -> impl Iterator<Item = &(usize, f64)> {
        self.entries[..self.len].iter()
    }
}

fn stencil(grid: &GridSpec, x: &[f64]) -> Result<Stencil> {
    if x.len() != grid.dimension() {
        return Err(Error::Shape(format!(
            "position has {} components on a {}-d grid",
            x.len(),
            grid.dimension()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) || !grid.contains(x) {
        return Err(Error::Config(format!("position {x:?} lies outside the grid box")));
    }
    let n = grid.points() as isize;
    let dx = grid.spacing();
    let axis = |xa: f64| {
        let xa = grid.wrap(xa);
        let r = (xa - grid.lower()) / dx;
        let i0 = r.floor() as isize;
        let start = match grid.boundary() {
            Boundary::Periodic => i0 - 1,
            Boundary::HardWall => (i0 - 1).clamp(0, n - 4),
        };
        let u = r - start as f64;
        let mut idx = [0usize; 4];
        for (k, slot) in idx.iter_mut().enumerate() {
            *slot = (start + k as isize).rem_euclid(n) as usize;
        }
        (idx, lagrange4(u))
    };
    let mut out = Stencil {
        entries: [(0, 0.0); 16],
        len: 0,
    };
    let (i0, w0) = axis(x[0]);
    if grid.dimension() == 1 {
        for k in 0..4 {
            out.entries[k] = (i0[k], w0[k]);
        }
        out.len = 4;
    } else {
        let (i1, w1) = axis(x[1]);
        for a in 0..4 {
            for b in 0..4 {
                out.entries[4 * a + b] = (grid.flatten([i0[a], i1[b]]), w0[a] * w1[b]);
            }
        }
        out.len = 16;
    }
    Ok(out)
}

/// Sites and weights of the cubic interpolation stencil at `x`.
pub fn interpolation_stencil(grid: &GridSpec, x: &[f64]) -> Result<Vec<(usize, f64)>> {
    Ok(stencil(grid, x)?.iter().copied().collect())
}

/// Interpolated `psi(x)`.
pub fn interpolate_field(psi: &ComplexLatticeField, x: &[f64]) -> Result<Complex64> {
    Ok(interpolation_stencil(psi.grid(), x)?
        .into_iter()
        .map(|(s, w)| w * psi.values()[s])
        .sum())
}

/// The velocity at `x`, failing inside a node.
pub fn velocity_at(psi: &ComplexLatticeField, x: &[f64], hbar: f64, masses: &[f64], method: DerivativeMethod) -> Result<Vec<f64>> {
    let field = velocity_field(psi, hbar, masses, method)?;
    let density = interpolate_field(psi, x)?.norm_sqr();
    if density < field.threshold {
        return Err(Error::Node {
            time: 0.0,
            density,
            threshold: field.threshold,
        });
    }
    field.interpolate(x)
}

/// Velocities of each particle for a configuration-space wave function whose
/// grid axes are split evenly between the particles.
pub fn velocity_configuration(
    psi: &ComplexLatticeField,
    positions: &[Vec<f64>],
    hbar: f64,
    particle_masses: &[f64],
    method: DerivativeMethod,
) -> Result<Vec<Vec<f64>>> {
    let dim = psi.grid().dimension();
    if positions.is_empty() || dim % positions.len() != 0 || particle_masses.len() != positions.len() {
        return Err(Error::Shape(format!(
            "{} particles with {} masses on a {dim}-d configuration grid",
            positions.len(),
            particle_masses.len()
        )));
    }
    let per = dim / positions.len();
    let x: Vec<f64> = positions.iter().flatten().copied().collect();
    let axis_masses: Vec<f64> = (0..dim).map(|a| particle_masses[a / per]).collect();
    let v = velocity_at(psi, &x, hbar, &axis_masses, method)?;
    Ok(v.chunks(per).map(|c| c.to_vec()).collect())
}

/// Velocities for a product wave function `psi = f_1(x_1) ... f_N(x_N)`,
/// which factorize into single-particle velocities for any `N`.
pub fn product_state_velocities(
    factors: &[ComplexLatticeField],
    positions: &[Vec<f64>],
    hbar: f64,
    particle_masses: &[f64],
    method: DerivativeMethod,
) -> Result<Vec<Vec<f64>>> {
    if factors.len() != positions.len() || factors.len() != particle_masses.len() {
        return Err(Error::Shape("need one factor, position and mass per particle".into()));
    }
    factors
        .iter()
        .zip(positions)
        .zip(particle_masses)
        .map(|((f, x), &m)| velocity_at(f, x, hbar, &vec![m; f.grid().dimension()], method))
        .collect()
}

/// Stored wave-function frames with their gradients, linearly interpolated
/// in time.
#[derive(Debug, Clone)]
pub struct WaveFrames {
    grid: GridSpec,
    hbar: f64,
    masses: Vec<f64>,
    times: Vec<f64>,
    psi: Vec<Vec<Complex64>>,
    grad: Vec<Vec<Vec<Complex64>>>,
    thresholds: Vec<f64>,
}

impl WaveFrames {
    pub fn new(frames: &[(f64, ComplexLatticeField)], hbar: f64, masses: &[f64], method: DerivativeMethod) -> Result<Self> {
        let Some((_, first)) = frames.first() else {
            return Err(Error::Config("no wave-function frames".into()));
        };
        let grid = *first.grid();
        check_masses(&grid, masses)?;
        let mut out = WaveFrames {
            grid,
            hbar,
            masses: masses.to_vec(),
            times: Vec::with_capacity(frames.len()),
            psi: Vec::with_capacity(frames.len()),
            grad: Vec::with_capacity(frames.len()),
            thresholds: Vec::with_capacity(frames.len()),
        };
        for (t, f) in frames {
            grid.ensure_same(f.grid())?;
            if let Some(&last) = out.times.last() {
                if *t <= last {
                    return Err(Error::Config("frame times must increase".into()));
                }
            }
            out.times.push(*t);
            out.grad
                .push(gradient(f, method)?.into_iter().map(|g| g.into_values()).collect());
            out.thresholds.push(NODE_EPSILON_RATIO * f.max_abs().powi(2));
            out.psi.push(f.values().to_vec());
        }
        Ok(out)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frame(&self, index: usize) -> ComplexLatticeField {
        ComplexLatticeField::new(self.grid, self.psi[index].clone()).expect("frame matches grid")
    }

    /// Bracketing frame and the weight of the later one.
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 2, 1.0);
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        (j, (t - self.times[j]) / (self.times[j + 1] - self.times[j]))
    }

    fn mix(&self, a: &[Complex64], b: Option<&[Complex64]>, lam: f64, s: usize) -> Complex64 {
        match b {
            Some(b) => a[s] * (1.0 - lam) + b[s] * lam,
            None => a[s],
        }
    }

    /// `psi(x, t)` with its density and the node threshold in force.
    pub fn probe(&self, t: f64, x: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
        let st = stencil(&self.grid, x)?;
        let (j, lam) = self.locate(t);
        let next = (j + 1 < self.times.len()).then_some(j + 1);
        let threshold = match next {
            Some(k) => self.thresholds[j] * (1.0 - lam) + self.thresholds[k] * lam,
            None => self.thresholds[j],
        };
        let dim = self.grid.dimension();
        let mut v = vec![0.0; dim];
        let mut psi_x = Complex64::new(0.0, 0.0);
        for &(s, w) in st.iter() {
            let p = self.mix(&self.psi[j], next.map(|k| self.psi[k].as_slice()), lam, s);
            psi_x += w * p;
            let rho = p.norm_sqr();
            if rho < threshold || rho == 0.0 {
                continue;
            }
            for (a, va) in v.iter_mut().enumerate() {
                let g = self.mix(&self.grad[j][a], next.map(|k| self.grad[k][a].as_slice()), lam, s);
                *va += w * self.hbar * (p.conj() * g).im / (self.masses[a] * rho);
            }
        }
        Ok((v, psi_x.norm_sqr(), threshold))
    }

    /// Velocity at `(x, t)`, with a node error inside the threshold.
    pub fn velocity(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (v, density, threshold) = self.probe(t, x)?;
        if density < threshold {
            return Err(Error::Node { time: t, density, threshold });
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeEvent {
    pub time: f64,
    pub density: f64,
    /// `"shrink"`, `"freeze"` or `"halt"`.
    pub action: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub speeds: Vec<f64>,
    pub node_events: Vec<NodeEvent>,
}

impl Trajectory {
    pub fn final_position(&self) -> &[f64] {
        self.positions.last().unwrap()
    }
}

/// RK4 integration of `dX/dt = v(X, t)` across the span of `frames`.
pub fn integrate_trajectory(frames: &WaveFrames, x0: &[f64], dt: f64, policy: NodePolicy) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let grid = *frames.grid();
    let (v0, density, threshold) = frames.probe(frames.start(), x0)?;
    if density < threshold && policy == NodePolicy::Shrink {
        return Err(Error::Node {
            time: frames.start(),
            density,
            threshold,
        });
    }
    let wrap = |x: &mut Vec<f64>| {
        for v in x.iter_mut() {
            *v = grid.wrap(*v);
        }
    };
    let rhs = |t: f64, x: &Vec<f64>| -> Result<Vec<f64>> {
        let mut y = x.clone();
        for v in y.iter_mut() {
            *v = grid.wrap(*v);
        }
        let (v, density, threshold) = frames.probe(t, &y)?;
        if density < threshold {
            return match policy {
                NodePolicy::Freeze => Ok(vec![0.0; v.len()]),
                NodePolicy::Shrink => Err(Error::Node { time: t, density, threshold }),
            };
        }
        Ok(v)
    };
    let speed = |v: &[f64], density: f64, threshold: f64| {
        if density < threshold {
            0.0
        } else {
            v.iter().map(|c| c * c).sum::<f64>().sqrt()
        }
    };
    let mut t = frames.start();
    let end = frames.end();
    let mut x = x0.to_vec();
    let mut out = Trajectory {
        times: vec![t],
        positions: vec![x.clone()],
        speeds: vec![speed(&v0, density, threshold)],
        node_events: Vec::new(),
    };
    let (mut density, mut threshold) = (density, threshold);
    while t < end - 1e-12 * dt {
        let h = dt.min(end - t);
        let near = density < SHRINK_FACTOR * threshold;
        if density < threshold {
            match policy {
                NodePolicy::Shrink => {
                    out.node_events.push(NodeEvent { time: t, density, action: "halt" });
                    return Err(Error::Node { time: t, density, threshold });
                }
                NodePolicy::Freeze => out.node_events.push(NodeEvent { time: t, density, action: "freeze" }),
            }
        }
        if near && policy == NodePolicy::Shrink {
            out.node_events.push(NodeEvent { time: t, density, action: "shrink" });
            for k in 0..4 {
                x = rk4_step(&x, t + k as f64 * h / 4.0, h / 4.0, rhs)?;
                wrap(&mut x);
            }
        } else {
            x = rk4_step(&x, t, h, rhs)?;
            wrap(&mut x);
        }
        t += h;
        let (v, d, th) = frames.probe(t, &x)?;
        (density, threshold) = (d, th);
        out.times.push(t);
        out.speeds.push(speed(&v, density, threshold));
        out.positions.push(x.clone());
    }
    Ok(out)
}

/// RMS of `d rho/dt + div(rho v)` at the middle of three equally spaced frames,
/// with the time derivative by central difference.
pub fn continuity_residual(
    before: &ComplexLatticeField,
    middle: &ComplexLatticeField,
    after: &ComplexLatticeField,
    dt: f64,
    hbar: f64,
    masses: &[f64],
    method: DerivativeMethod,
) -> Result<f64> {
    let grid = *middle.grid();
    grid.ensure_same(before.grid())?;
    grid.ensure_same(after.grid())?;
    check_masses(&grid, masses)?;
    let grads = gradient(middle, method)?;
    let mut div = vec![Complex64::new(0.0, 0.0); grid.sites()];
    for (a, g) in grads.iter().enumerate() {
        let current: Vec<Complex64> = middle
            .values()
            .iter()
            .zip(g.values())
            .map(|(p, gp)| Complex64::new(hbar * (p.conj() * gp).im / masses[a], 0.0))
            .collect();
        let j = ComplexLatticeField::new(grid, current)?;
        let dj = &gradient(&j, method)?[a];
        for (d, v) in div.iter_mut().zip(dj.values()) {
            *d += v;
        }
    }
    let sum: f64 = (0..grid.sites())
        .map(|s| {
            let drho = (after.values()[s].norm_sqr() - before.values()[s].norm_sqr()) / (2.0 * dt);
            (drho + div[s].re).powi(2)
        })
        .sum();
    Ok((sum * grid.cell_volume()).sqrt())
}
