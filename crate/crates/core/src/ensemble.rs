//! Sampling `|psi|^2`, transporting the samples along guidance trajectories
//! and comparing the result with `|psi(t)|^2`.
//!
//! The lattice density is taken piecewise constant over cells centred on the
//! sites, so its CDF is piecewise linear and sampling is exact inverse-CDF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, ComplexLatticeField, GridSpec};
use crate::guidance::{integrate_trajectory, NodePolicy, WaveFrames};

/// KS critical value coefficient at 99%.
pub const KS_99: f64 = 1.63;
/// KS critical value coefficient at 95%.
pub const KS_95: f64 = 1.36;
/// Allowed fraction of trajectories lost to nodes.
pub const MAX_NODE_HALT_FRACTION: f64 = 0.01;
const NORM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    KolmogorovSmirnov,
    HistogramL1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub samples: usize,
    pub seed: u64,
    pub metric: Metric,
    pub bins: usize,
}

impl EnsembleSpec {
    pub fn new(samples: usize, seed: u64) -> Result<Self> {
        let spec = EnsembleSpec {
            samples,
            seed,
            metric: Metric::KolmogorovSmirnov,
            bins: 64,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 100 {
            return Err(Error::Config(format!("need at least 100 samples, got {}", self.samples)));
        }
        if self.bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        Ok(())
    }

    pub fn ks_critical(&self) -> f64 {
        KS_99 / (self.samples as f64).sqrt()
    }
}

fn check_normalized(psi: &ComplexLatticeField) -> Result<()> {
    let n2 = psi.norm_sqr();
    if (n2 - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::Normalization(n2));
    }
    Ok(())
}

/// Cumulative sums of `weights`, normalized to end at 1.
fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    cdf
}

/// Index of the cell holding quantile `u` and the fraction of the way through it.
fn invert(cdf: &[f64], u: f64) -> (usize, f64) {
    let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
    let lo = if i == 0 { 0.0 } else { cdf[i - 1] };
    let width = cdf[i] - lo;
    let frac = if width > 0.0 { ((u - lo) / width).clamp(0.0, 1.0) } else { 0.5 };
    (i, frac)
}

/// Inverse-CDF samples (conditional on axis 0 in 2D) of the cell density
/// `|psi|^2 dx^d`, reproducible from `seed`.
pub fn sample_density(psi: &ComplexLatticeField, samples: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_normalized(psi)?;
    let grid = *psi.grid();
    let dx = grid.spacing();
    let n = grid.points();
    let rho = psi.density();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coordinate = |i: usize, frac: f64| grid.wrap(grid.axis_coordinate(i) - 0.5 * dx + frac * dx);
    match grid.dimension() {
        1 => {
            let cdf = cumulative(rho.iter().copied());
            Ok((0..samples)
                .map(|_| {
                    let (i, f) = invert(&cdf, rng.random::<f64>());
                    vec![coordinate(i, f)]
                })
                .collect())
        }
        _ => {
            let rows: Vec<f64> = (0..n).map(|i| rho[i * n..(i + 1) * n].iter().sum()).collect();
            let row_cdf = cumulative(rows.iter().copied());
            let conditional: Vec<Vec<f64>> = (0..n)
                .map(|i| cumulative(rho[i * n..(i + 1) * n].iter().copied()))
                .collect();
            Ok((0..samples)
                .map(|_| {
                    let (i, fi) = invert(&row_cdf, rng.random::<f64>());
                    let (j, fj) = invert(&conditional[i], rng.random::<f64>());
                    vec![coordinate(i, fi), coordinate(j, fj)]
                })
                .collect())
        }
    }
}

/// The piecewise-linear CDF of the cell density along axis 0 (a marginal in 2D).
#[derive(Debug, Clone)]
pub struct LatticeCdf {
    grid: GridSpec,
    edges: Vec<f64>,
    cdf: Vec<f64>,
    max_density: f64,
}

impl LatticeCdf {
    pub fn new(psi: &ComplexLatticeField) -> Self {
        let grid = *psi.grid();
        let n = grid.points();
        let rho = psi.density();
        let marginal: Vec<f64> = match grid.dimension() {
            1 => rho,
            _ => (0..n).map(|i| rho[i * n..(i + 1) * n].iter().sum()).collect(),
        };
        let cdf = cumulative(marginal.iter().copied());
        let total: f64 = marginal.iter().sum();
        let dx = grid.spacing();
        let max_density = marginal.iter().fold(0.0f64, |m, v| m.max(*v)) / (total * dx);
        LatticeCdf {
            grid,
            edges: (0..=n).map(|i| grid.lower() - 0.5 * dx + i as f64 * dx).collect(),
            cdf,
            max_density,
        }
    }

    /// Coordinate on the cell-edge interval `[lower - dx/2, upper - dx/2)`.
    fn unwrap(&self, x: f64) -> f64 {
        let x = self.grid.wrap(x);
        if self.grid.boundary() == Boundary::Periodic && x >= self.edges[self.edges.len() - 1] {
            x - self.grid.length()
        } else {
            x
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = self.unwrap(x);
        let dx = self.grid.spacing();
        let r = (x - self.edges[0]) / dx;
        let i = (r.floor().max(0.0) as usize).min(self.cdf.len() - 1);
        let lo = if i == 0 { 0.0 } else { self.cdf[i - 1] };
        lo + (self.cdf[i] - lo) * (r - i as f64).clamp(0.0, 1.0)
    }

    /// Largest marginal density.
    pub fn max_density(&self) -> f64 {
        self.max_density
    }
}

/// Two-sided Kolmogorov–Smirnov distance between the samples and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    // sorting the CDF values rather than the samples respects a periodic seam
    let mut fs: Vec<f64> = samples.iter().map(|&x| cdf(x)).collect();
    fs.sort_by(f64::total_cmp);
    let n = fs.len() as f64;
    fs.iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub expected: f64,
}

impl HistogramBin {
    /// Within `k` Poisson standard deviations of the expectation.
    pub fn within(&self, k: f64) -> bool {
        (self.count as f64 - self.expected).abs() <= k * self.expected.sqrt().max(1.0)
    }
}

/// Counts of axis-0 coordinates in `bins` equal bins against the counts
/// `|psi|^2` predicts.
pub fn histogram(positions: &[f64], psi: &ComplexLatticeField, bins: usize) -> Vec<HistogramBin> {
    let cdf = LatticeCdf::new(psi);
    let lo = cdf.edges[0];
    let width = psi.grid().length() / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in positions {
        let b = ((cdf.unwrap(x) - lo) / width).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let n = positions.len() as f64;
    (0..bins)
        .map(|b| {
            let (a, z) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
            HistogramBin {
                lower: a,
                upper: z,
                count: counts[b],
                expected: n * (cdf.eval(z - 1e-12 * width) - cdf.eval(a)).max(0.0),
            }
        })
        .collect()
}

/// Half the L1 distance between observed and expected bin fractions.
pub fn histogram_l1(bins: &[HistogramBin]) -> f64 {
    let n: f64 = bins.iter().map(|b| b.count as f64).sum();
    0.5 * bins.iter().map(|b| (b.count as f64 - b.expected).abs()).sum::<f64>() / n
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub time: f64,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivarianceReport {
    pub samples: usize,
    pub seed: u64,
    pub metric: Metric,
    pub ks_critical: f64,
    /// Allowance for the lattice: a shift of `2 dx` at the peak density.
    pub discretization_budget: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub node_halts: usize,
    pub pass: bool,
    /// Final axis-0 histogram.
    pub histogram: Vec<HistogramBin>,
    #[serde(skip)]
    pub final_positions: Vec<Vec<f64>>,
}

impl EquivarianceReport {
    pub fn final_statistic(&self) -> f64 {
        self.checkpoints.last().map_or(f64::NAN, |c| c.statistic)
    }
}

fn statistic(metric: Metric, xs: &[f64], psi: &ComplexLatticeField, bins: usize) -> f64 {
    match metric {
        Metric::KolmogorovSmirnov => {
            let cdf = LatticeCdf::new(psi);
            ks_statistic(xs, |x| cdf.eval(x))
        }
        Metric::HistogramL1 => histogram_l1(&histogram(xs, psi, bins)),
    }
}

/// Samples `|psi(0)|^2`, carries every sample through `frames` and compares
/// the ensemble with `|psi|^2` at each stored frame listed in `checkpoints`
/// (frame indices; the last frame is always checked).
pub fn equivariance_test(
    frames: &WaveFrames,
    spec: &EnsembleSpec,
    dt: f64,
    policy: NodePolicy,
    checkpoints: &[usize],
) -> Result<EquivarianceReport> {
    spec.validate()?;
    let psi0 = frames.frame(0);
    let starts = sample_density(&psi0, spec.samples, spec.seed)?;
    let last = frames.times().len() - 1;
    let mut marks: Vec<usize> = checkpoints.iter().copied().filter(|&c| c <= last).collect();
    marks.push(last);
    marks.sort_unstable();
    marks.dedup();
    let mark_times: Vec<f64> = marks.iter().map(|&m| frames.times()[m]).collect();

    let paths: Vec<Result<Vec<Vec<f64>>>> = starts
        .par_iter()
        .map(|x0| {
            let tr = integrate_trajectory(frames, x0, dt, policy)?;
            Ok(mark_times
                .iter()
                .map(|&t| {
                    let k = tr.times.partition_point(|&s| s < t - 1e-9 * dt).min(tr.times.len() - 1);
                    tr.positions[k].clone()
                })
                .collect())
        })
        .collect();
    let mut node_halts = 0;
    let mut kept = Vec::with_capacity(paths.len());
    for p in paths {
        match p {
            Ok(v) => kept.push(v),
            Err(Error::Node { .. }) => node_halts += 1,
            Err(e) => return Err(e),
        }
    }
    if node_halts as f64 > MAX_NODE_HALT_FRACTION * spec.samples as f64 {
        return Err(Error::InvalidTest(format!(
            "{node_halts} of {} trajectories halted at nodes",
            spec.samples
        )));
    }

    let dx = frames.grid().spacing();
    let budget = 2.0 * dx * LatticeCdf::new(&frames.frame(last)).max_density();
    let critical = match spec.metric {
        Metric::KolmogorovSmirnov => spec.ks_critical(),
        Metric::HistogramL1 => spec.bins as f64 / (spec.samples as f64).sqrt(),
    };
    let mut out = Vec::with_capacity(marks.len());
    for (slot, &m) in marks.iter().enumerate() {
        let psi = frames.frame(m);
        let xs: Vec<f64> = kept.iter().map(|p| p[slot][0]).collect();
        let s = statistic(spec.metric, &xs, &psi, spec.bins);
        let threshold = critical + budget;
        out.push(Checkpoint {
            time: frames.times()[m],
            statistic: s,
            threshold,
            pass: s < threshold,
        });
    }
    let final_positions: Vec<Vec<f64>> = kept.iter().map(|p| p[marks.len() - 1].clone()).collect();
    let xs: Vec<f64> = final_positions.iter().map(|x| x[0]).collect();
    Ok(EquivarianceReport {
        samples: spec.samples,
        seed: spec.seed,
        metric: spec.metric,
        ks_critical: critical,
        discretization_budget: budget,
        pass: out.iter().all(|c| c.pass),
        checkpoints: out,
        node_halts,
        histogram: histogram(&xs, &frames.frame(last), spec.bins),
        final_positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DerivativeMethod;
    use num_complex::Complex64;

    fn gaussian(grid: GridSpec, sigma: f64) -> ComplexLatticeField {
        ComplexLatticeField::from_fn(grid, |x| {
            Complex64::new((-x.iter().map(|v| v * v).sum::<f64>() / (4.0 * sigma * sigma)).exp(), 0.0)
        })
        .normalized()
        .unwrap()
    }

    #[test]
    fn uniform_density_passes_ks_at_95() {
        let grid = GridSpec::periodic_1d(64, 8.0).unwrap();
        let psi = ComplexLatticeField::from_fn(grid, |_| Complex64::new(1.0, 0.0)).normalized().unwrap();
        let n = 5000;
        let xs: Vec<f64> = sample_density(&psi, n, 7).unwrap().into_iter().map(|v| v[0]).collect();
        let lo = grid.lower() - 0.5 * grid.spacing();
        let ks = ks_statistic(&xs, |x| {
            let x = if x >= grid.upper() - 0.5 * grid.spacing() { x - grid.length() } else { x };
            (x - lo) / grid.length()
        });
        assert!(ks < KS_95 / (n as f64).sqrt(), "ks {ks}");
    }

    #[test]
    fn delta_density_stays_in_its_cell() {
        let grid = GridSpec::new(1, 32, 8.0, Boundary::HardWall).unwrap();
        let mut values = vec![Complex64::new(0.0, 0.0); 32];
        values[10] = Complex64::new(1.0 / grid.spacing().sqrt(), 0.0);
        let psi = ComplexLatticeField::new(grid, values).unwrap();
        let x10 = grid.axis_coordinate(10);
        for x in sample_density(&psi, 1000, 1).unwrap() {
            assert!((x[0] - x10).abs() <= 0.5 * grid.spacing());
        }
    }

    #[test]
    fn gaussian_sample_mean_obeys_clt() {
        let grid = GridSpec::periodic_1d(256, 30.0).unwrap();
        let s0 = 1.0;
        let psi = gaussian(grid, s0);
        let n = 10_000;
        let mean: f64 = sample_density(&psi, n, 42).unwrap().iter().map(|x| x[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * s0 / (n as f64).sqrt());
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let grid = GridSpec::periodic_1d(16, 4.0).unwrap();
        let psi = gaussian(grid, 1.0).scaled(Complex64::new(2.0, 0.0));
        assert!(matches!(sample_density(&psi, 10, 0), Err(Error::Normalization(_))));
    }

    #[test]
    fn sampling_is_reproducible_and_seed_dependent() {
        let grid = GridSpec::periodic_2d(32, 10.0).unwrap();
        let psi = gaussian(grid, 1.0);
        let a = sample_density(&psi, 200, 3).unwrap();
        assert_eq!(a, sample_density(&psi, 200, 3).unwrap());
        assert_ne!(a, sample_density(&psi, 200, 4).unwrap());
    }

    #[test]
    fn two_dimensional_marginal_matches_density() {
        let grid = GridSpec::periodic_2d(48, 12.0).unwrap();
        let psi = ComplexLatticeField::from_fn(grid, |x| {
            Complex64::new((-(x[0] - 1.0).powi(2) / 2.0 - x[1] * x[1]).exp(), 0.0)
        })
        .normalized()
        .unwrap();
        let n = 4000;
        let xs: Vec<f64> = sample_density(&psi, n, 9).unwrap().into_iter().map(|v| v[0]).collect();
        let cdf = LatticeCdf::new(&psi);
        assert!(ks_statistic(&xs, |x| cdf.eval(x)) < KS_99 / (n as f64).sqrt());
    }

    #[test]
    fn static_ground_state_keeps_its_sampling_statistic() {
        let grid = GridSpec::periodic_1d(64, 16.0).unwrap();
        let psi = gaussian(grid, 0.5f64.sqrt());
        let frames: Vec<(f64, ComplexLatticeField)> = (0..=10)
            .map(|i| {
                let t = 0.1 * i as f64;
                (t, psi.scaled(Complex64::from_polar(1.0, -0.5 * t)))
            })
            .collect();
        let wf = WaveFrames::new(&frames, 1.0, &[1.0], DerivativeMethod::FiniteDifference).unwrap();
        let spec = EnsembleSpec::new(500, 11).unwrap();
        let report = equivariance_test(&wf, &spec, 0.05, NodePolicy::Shrink, &[0]).unwrap();
        let c = &report.checkpoints;
        assert!((c[0].statistic - c[1].statistic).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts_every_sample() {
        let grid = GridSpec::periodic_1d(64, 16.0).unwrap();
        let psi = gaussian(grid, 1.0);
        let xs: Vec<f64> = sample_density(&psi, 3000, 5).unwrap().into_iter().map(|v| v[0]).collect();
        let h = histogram(&xs, &psi, 32);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 3000);
        assert!((h.iter().map(|b| b.expected).sum::<f64>() - 3000.0).abs() < 1e-6);
        assert!(h.iter().all(|b| b.within(5.0)));
    }

    #[test]
    fn too_few_samples_is_a_config_error() {
        assert!(EnsembleSpec::new(99, 0).is_err());
    }
}
