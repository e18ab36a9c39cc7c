//! Uniform lattices carrying complex fields, with the differential operators,
//! inner products and norms shared by every solver in the crate.
//!
//! Sites sit at `x_i = -L/2 + i * dx` with `dx = L / N` along each axis. In two
//! dimensions values are stored row-major with axis 0 as the slow index.
//! Every lattice sum carries the cell volume `dx^d`, so lattice quantities
//! converge to their continuum integrals and the lattice delta function is
//! `delta_ij / dx^d`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    HardWall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMethod {
    FiniteDifference,
    Spectral,
}

/// Physical constants used scenario-wide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Units {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dimension: usize,
    points: usize,
    length: f64,
    boundary: Boundary,
}

impl GridSpec {
    pub fn new(dimension: usize, points: usize, length: f64, boundary: Boundary) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::Config(format!(
                "grid dimension must be 1 or 2, got {dimension}"
            )));
        }
        if points < MIN_POINTS {
            return Err(Error::Config(format!(
                "grid needs at least {MIN_POINTS} points per axis, got {points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!(
                "box length must be positive and finite, got {length}"
            )));
        }
        Ok(GridSpec {
            dimension,
            points,
            length,
            boundary,
        })
    }

    pub fn periodic_1d(points: usize, length: f64) -> Result<Self> {
        Self::new(1, points, length, Boundary::Periodic)
    }

    pub fn periodic_2d(points: usize, length: f64) -> Result<Self> {
        Self::new(2, points, length, Boundary::Periodic)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// `dx^d`, the measure attached to every lattice sum.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    /// Value of the lattice delta function on its support site.
    pub fn lattice_delta(&self) -> f64 {
        1.0 / self.cell_volume()
    }

    pub fn sites(&self) -> usize {
        self.points.pow(self.dimension as u32)
    }

    pub fn lower(&self) -> f64 {
        -0.5 * self.length
    }

    pub fn upper(&self) -> f64 {
        0.5 * self.length
    }

    pub fn axis_coordinate(&self, i: usize) -> f64 {
        self.lower() + i as f64 * self.spacing()
    }

    /// Per-axis lattice indices of a flat site index.
    pub fn unflatten(&self, site: usize) -> [usize; 2] {
        if self.dimension == 1 {
            [site, 0]
        } else {
            [site / self.points, site % self.points]
        }
    }

    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        if self.dimension == 1 {
            idx[0]
        } else {
            idx[0] * self.points + idx[1]
        }
    }

    pub fn site_coordinates(&self, site: usize) -> Vec<f64> {
        let idx = self.unflatten(site);
        (0..self.dimension)
            .map(|a| self.axis_coordinate(idx[a]))
            .collect()
    }

    pub fn is_boundary_site(&self, site: usize) -> bool {
        if self.boundary == Boundary::Periodic {
            return false;
        }
        let idx = self.unflatten(site);
        (0..self.dimension).any(|a| idx[a] == 0 || idx[a] == self.points - 1)
    }

    /// Whether `x` lies in the half-open box `[-L/2, L/2)` on every axis.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension && x.iter().all(|&c| c >= self.lower() && c < self.upper())
    }

    /// Maps a coordinate back into the box on periodic grids.
    pub fn wrap(&self, x: f64) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.lower() + (x - self.lower()).rem_euclid(self.length),
            Boundary::HardWall => x,
        }
    }

    /// Angular wavenumbers in FFT order for one axis.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        let dk = 2.0 * PI / self.length;
        (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j } else { j - n };
                dk * m as f64
            })
            .collect()
    }

    /// Largest eigenvalue magnitude of the negative Laplacian, summed over axes.
    pub fn laplacian_spectral_radius(&self, method: DerivativeMethod) -> f64 {
        let dx = self.spacing();
        let per_axis = match method {
            DerivativeMethod::FiniteDifference => 4.0 / (dx * dx),
            DerivativeMethod::Spectral => (PI / dx).powi(2),
        };
        per_axis * self.dimension as f64
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!("grid {self:?} differs from {other:?}")));
        }
        Ok(())
    }
}

/// Complex values on every site of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexLatticeField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ComplexLatticeField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.sites() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} sites",
                values.len(),
                grid.sites()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Config("field contains NaN or infinite values".into()));
        }
        Ok(ComplexLatticeField { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        ComplexLatticeField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.sites()],
        }
    }

    /// Samples `f` at every site. Boundary sites of hard-wall grids are zeroed.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.sites())
            .map(|s| {
                if grid.is_boundary_site(s) {
                    Complex64::new(0.0, 0.0)
                } else {
                    f(&grid.site_coordinates(s))
                }
            })
            .collect();
        ComplexLatticeField { grid, values }
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.sites());
        ComplexLatticeField { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        ComplexLatticeField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        self.map(|v| a * v)
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: Complex64, other: &ComplexLatticeField) {
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::DegenerateState("cannot normalize a zero field".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// L2 distance with the lattice measure.
    pub fn l2_distance(&self, other: &ComplexLatticeField) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    /// L2 distance after removing the best-fitting global phase.
    pub fn l2_distance_modulo_phase(&self, other: &ComplexLatticeField) -> Result<f64> {
        let overlap = inner_product(other, self)?;
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        self.l2_distance(&other.scaled(phase))
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Unnormalized discrete Fourier coefficients (forward FFT of the values).
    pub fn fourier(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        fft_nd(&self.grid, &mut buf, false);
        buf
    }
}

/// `sum_i conj(f_i) g_i dx^d`.
pub fn inner_product(f: &ComplexLatticeField, g: &ComplexLatticeField) -> Result<Complex64> {
    f.grid.ensure_same(&g.grid)?;
    let s: Complex64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(s * f.grid.cell_volume())
}

fn require_periodic(grid: &GridSpec, what: &str) -> Result<()> {
    if grid.boundary != Boundary::Periodic {
        return Err(Error::Config(format!(
            "spectral {what} requires a periodic grid"
        )));
    }
    Ok(())
}

/// Neighbour of `i` along one axis, or `None` past a hard wall.
#[inline]
fn neighbour(grid: &GridSpec, i: usize, step: isize) -> Option<usize> {
    let n = grid.points as isize;
    let j = i as isize + step;
    match grid.boundary {
        Boundary::Periodic => Some(j.rem_euclid(n) as usize),
        Boundary::HardWall => (0..n).contains(&j).then_some(j as usize),
    }
}

#[inline]
fn shifted_value(f: &ComplexLatticeField, site: usize, axis: usize, step: isize) -> Complex64 {
    let grid = &f.grid;
    let mut idx = grid.unflatten(site);
    match neighbour(grid, idx[axis], step) {
        Some(j) => {
            idx[axis] = j;
            f.values[grid.flatten(idx)]
        }
        None => Complex64::new(0.0, 0.0),
    }
}

fn zero_walls(field: &mut ComplexLatticeField) {
    if field.grid.boundary == Boundary::HardWall {
        let grid = field.grid;
        for s in 0..grid.sites() {
            if grid.is_boundary_site(s) {
                field.values[s] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

pub fn laplacian(f: &ComplexLatticeField, method: DerivativeMethod) -> Result<ComplexLatticeField> {
    match method {
        DerivativeMethod::FiniteDifference => Ok(laplacian_fd(f)),
        DerivativeMethod::Spectral => {
            require_periodic(&f.grid, "laplacian")?;
            Ok(spectral_apply(f, |k| -k.iter().map(|x| x * x).sum::<f64>()))
        }
    }
}

fn laplacian_fd(f: &ComplexLatticeField) -> ComplexLatticeField {
    let grid = f.grid;
    let inv_dx2 = 1.0 / (grid.spacing() * grid.spacing());
    let values = (0..grid.sites())
        .map(|s| {
            let centre = f.values[s];
            let mut acc = Complex64::new(0.0, 0.0);
            for axis in 0..grid.dimension {
                acc += shifted_value(f, s, axis, 1) + shifted_value(f, s, axis, -1) - 2.0 * centre;
            }
            acc * inv_dx2
        })
        .collect();
    let mut out = ComplexLatticeField::from_raw(grid, values);
    zero_walls(&mut out);
    out
}

/// Second derivative along a single axis.
pub fn axis_second_derivative(f: &ComplexLatticeField, axis: usize, method: DerivativeMethod) -> Result<ComplexLatticeField> {
    if axis >= f.grid.dimension {
        return Err(Error::Shape(format!("axis {axis} on a {}-d grid", f.grid.dimension)));
    }
    match method {
        DerivativeMethod::FiniteDifference => {
            let grid = f.grid;
            let inv_dx2 = 1.0 / (grid.spacing() * grid.spacing());
            let values = (0..grid.sites())
                .map(|s| {
                    (shifted_value(f, s, axis, 1) + shifted_value(f, s, axis, -1) - 2.0 * f.values[s]) * inv_dx2
                })
                .collect();
            let mut out = ComplexLatticeField::from_raw(grid, values);
            zero_walls(&mut out);
            Ok(out)
        }
        DerivativeMethod::Spectral => {
            require_periodic(&f.grid, "second derivative")?;
            Ok(spectral_apply(f, |k| -k[axis] * k[axis]))
        }
    }
}

/// One derivative field per axis.
pub fn gradient(f: &ComplexLatticeField, method: DerivativeMethod) -> Result<Vec<ComplexLatticeField>> {
    match method {
        DerivativeMethod::FiniteDifference => Ok((0..f.grid.dimension)
            .map(|axis| derivative_fd(f, axis))
            .collect()),
        DerivativeMethod::Spectral => {
            require_periodic(&f.grid, "gradient")?;
            let n = f.grid.points;
            let nyquist = f.grid.wavenumbers()[n / 2];
            Ok((0..f.grid.dimension)
                .map(|axis| {
                    spectral_apply_complex(f, |k| {
                        let ka = k[axis];
                        // the Nyquist mode has no odd derivative on an even grid
                        if n % 2 == 0 && ka == nyquist {
                            Complex64::new(0.0, 0.0)
                        } else {
                            Complex64::new(0.0, ka)
                        }
                    })
                })
                .collect())
        }
    }
}

fn derivative_fd(f: &ComplexLatticeField, axis: usize) -> ComplexLatticeField {
    let grid = f.grid;
    let inv = 0.5 / grid.spacing();
    let values = (0..grid.sites())
        .map(|s| (shifted_value(f, s, axis, 1) - shifted_value(f, s, axis, -1)) * inv)
        .collect();
    let mut out = ComplexLatticeField::from_raw(grid, values);
    zero_walls(&mut out);
    out
}

fn spectral_apply(f: &ComplexLatticeField, symbol: impl Fn(&[f64]) -> f64) -> ComplexLatticeField {
    spectral_apply_complex(f, |k| Complex64::new(symbol(k), 0.0))
}

/// Multiplies the Fourier coefficients of `f` by `symbol(k)` and transforms back.
pub(crate) fn spectral_apply_complex(
    f: &ComplexLatticeField,
    symbol: impl Fn(&[f64]) -> Complex64,
) -> ComplexLatticeField {
    let grid = f.grid;
    let mut buf = f.values.clone();
    fft_nd(&grid, &mut buf, false);
    let ks = grid.wavenumbers();
    let mut k = vec![0.0; grid.dimension];
    for (s, v) in buf.iter_mut().enumerate() {
        let idx = grid.unflatten(s);
        for a in 0..grid.dimension {
            k[a] = ks[idx[a]];
        }
        *v *= symbol(&k);
    }
    fft_nd(&grid, &mut buf, true);
    ComplexLatticeField::from_raw(grid, buf)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// In-place multi-dimensional FFT; the inverse is normalized by `1/N^d`.
pub(crate) fn fft_nd(grid: &GridSpec, buf: &mut [Complex64], inverse: bool) {
    let n = grid.points;
    let fft = plan(n, inverse);
    // rows (contiguous axis)
    fft.process(buf);
    if grid.dimension == 2 {
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                column[i] = buf[i * n + j];
            }
            fft.process(&mut column);
            for i in 0..n {
                buf[i * n + j] = column[i];
            }
        }
    }
    if inverse {
        let scale = 1.0 / grid.sites() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn gaussian(grid: GridSpec, sigma: f64) -> ComplexLatticeField {
        ComplexLatticeField::from_fn(grid, |x| {
            c((-x.iter().map(|v| v * v).sum::<f64>() / (4.0 * sigma * sigma)).exp())
        })
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(GridSpec::new(1, 4, 1.0, Boundary::Periodic).is_err());
        assert!(GridSpec::new(3, 16, 1.0, Boundary::Periodic).is_err());
        assert!(GridSpec::new(1, 16, 0.0, Boundary::Periodic).is_err());
        assert!(ComplexLatticeField::new(GridSpec::periodic_1d(8, 1.0).unwrap(), vec![c(0.0); 7]).is_err());
    }

    #[test]
    fn normalized_gaussian_has_unit_norm() {
        let grid = GridSpec::periodic_1d(256, 40.0).unwrap();
        let g = gaussian(grid, 1.0).normalized().unwrap();
        let ip = inner_product(&g, &g).unwrap();
        assert!((ip - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn plane_waves_are_orthogonal() {
        let grid = GridSpec::periodic_1d(64, 3.0).unwrap();
        let k = 2.0 * PI / 3.0;
        let f = ComplexLatticeField::from_fn(grid, |x| Complex64::from_polar(1.0, k * x[0]));
        let g = ComplexLatticeField::from_fn(grid, |x| Complex64::from_polar(1.0, 3.0 * k * x[0]));
        assert!(inner_product(&f, &g).unwrap().norm() < 1e-12);
    }

    #[test]
    fn constant_field_inner_product() {
        let grid = GridSpec::periodic_1d(16, 1.0).unwrap();
        let f = ComplexLatticeField::from_fn(grid, |_| c(2.0));
        assert!((inner_product(&f, &f).unwrap() - c(4.0)).norm() < 1e-14);
    }

    #[test]
    fn mismatched_grids_are_a_shape_error() {
        let a = ComplexLatticeField::zeros(GridSpec::periodic_1d(16, 1.0).unwrap());
        let b = ComplexLatticeField::zeros(GridSpec::periodic_1d(32, 1.0).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn spectral_derivatives_of_plane_wave() {
        for grid in [GridSpec::periodic_1d(32, 2.0).unwrap(), GridSpec::periodic_2d(16, 2.0).unwrap()] {
            let k = 3.0 * 2.0 * PI / 2.0;
            let f = ComplexLatticeField::from_fn(grid, |x| Complex64::from_polar(1.0, k * x[0]));
            let lap = laplacian(&f, DerivativeMethod::Spectral).unwrap();
            let grad = gradient(&f, DerivativeMethod::Spectral).unwrap();
            for s in 0..grid.sites() {
                let v = f.values()[s];
                assert!((lap.values()[s] + k * k * v).norm() < 1e-10 * k * k);
                assert!((grad[0].values()[s] - Complex64::new(0.0, k) * v).norm() < 1e-11 * k);
                if grid.dimension() == 2 {
                    assert!(grad[1].values()[s].norm() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn derivatives_of_constant_vanish() {
        let grid = GridSpec::periodic_2d(16, 1.0).unwrap();
        let f = ComplexLatticeField::from_fn(grid, |_| Complex64::new(1.5, -0.5));
        for m in [DerivativeMethod::FiniteDifference, DerivativeMethod::Spectral] {
            assert!(laplacian(&f, m).unwrap().max_abs() < 1e-12);
            for g in gradient(&f, m).unwrap() {
                assert!(g.max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_gradient_vanishes_at_centre() {
        let grid = GridSpec::periodic_1d(128, 20.0).unwrap();
        let f = gaussian(grid, 1.0);
        let centre = grid.points() / 2;
        assert_eq!(grid.axis_coordinate(centre), 0.0);
        for m in [DerivativeMethod::FiniteDifference, DerivativeMethod::Spectral] {
            assert!(gradient(&f, m).unwrap()[0].values()[centre].norm() < 1e-10);
        }
    }

    #[test]
    fn finite_difference_laplacian_meets_taylor_bound() {
        let l = 1.0;
        let grid = GridSpec::periodic_1d(64, l).unwrap();
        let k = 2.0 * PI / l;
        let f = ComplexLatticeField::from_fn(grid, |x| c((k * x[0]).sin()));
        let lap = laplacian(&f, DerivativeMethod::FiniteDifference).unwrap();
        let exact = f.scaled(c(-k * k));
        let rel = lap.l2_distance(&exact).unwrap() / exact.norm();
        let dx = grid.spacing();
        assert!(rel < k * k * dx * dx / 6.0 * 1.1, "relative error {rel}");
    }

    #[test]
    fn spectral_on_hard_wall_is_config_error() {
        let grid = GridSpec::new(1, 16, 1.0, Boundary::HardWall).unwrap();
        let f = ComplexLatticeField::zeros(grid);
        assert!(matches!(laplacian(&f, DerivativeMethod::Spectral), Err(Error::Config(_))));
        assert!(matches!(gradient(&f, DerivativeMethod::Spectral), Err(Error::Config(_))));
    }

    #[test]
    fn hard_wall_zeroes_boundary_sites() {
        let grid = GridSpec::new(1, 16, 1.0, Boundary::HardWall).unwrap();
        let f = ComplexLatticeField::from_fn(grid, |_| c(1.0));
        assert_eq!(f.values()[0], c(0.0));
        assert_eq!(f.values()[15], c(0.0));
        let lap = laplacian(&f, DerivativeMethod::FiniteDifference).unwrap();
        assert_eq!(lap.values()[0], c(0.0));
    }

    #[test]
    fn wrap_maps_into_box() {
        let grid = GridSpec::periodic_1d(16, 2.0).unwrap();
        assert!((grid.wrap(1.5) + 0.5).abs() < 1e-15);
        assert!((grid.wrap(-1.25) - 0.75).abs() < 1e-15);
        assert!(grid.contains(&[grid.wrap(7.3)]));
    }
}
