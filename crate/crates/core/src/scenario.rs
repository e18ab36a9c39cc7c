//! TOML scenario files.
//!
//! Every section has defaults, so a file only needs the keys it changes. The
//! parsed scenario is the full effective configuration and is echoed verbatim
//! into each run manifest.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dirac::{GammaAlgebra, PlaneWave, PlaneWaveSuperposition, Representation, Spin};
use crate::error::{Error, Result};
use crate::grid::{Boundary, ComplexLatticeField, DerivativeMethod, GridSpec, Units};
use crate::guidance::NodePolicy;
use crate::scalar_field::ModeSet;
use crate::solver::{SolverConfig, SolverMethod};
use crate::ensemble::{EnsembleSpec, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sector {
    #[default]
    Schrodinger,
    Dirac,
    ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub sector: Sector,
    pub seed: u64,
    pub units: Units,
    pub grid: GridConfig,
    pub initial: InitialState,
    pub potential: PotentialConfig,
    pub integrator: IntegratorConfig,
    pub tolerances: Tolerances,
    pub particles: ParticlesConfig,
    pub ensemble: EnsembleConfig,
    pub dirac: DiracConfig,
    pub scalar_field: ScalarFieldConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            sector: Sector::Schrodinger,
            seed: 0,
            units: Units::default(),
            grid: GridConfig::default(),
            initial: InitialState::default(),
            potential: PotentialConfig::default(),
            integrator: IntegratorConfig::default(),
            tolerances: Tolerances::default(),
            particles: ParticlesConfig::default(),
            ensemble: EnsembleConfig::default(),
            dirac: DiracConfig::default(),
            scalar_field: ScalarFieldConfig::default(),
        }
    }
}

/// Square lattice: the same point count and box length on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dimension: usize,
    pub points: usize,
    pub length: f64,
    pub boundary: Boundary,
    pub derivative: DerivativeMethod,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dimension: 1,
            points: 256,
            length: 40.0,
            boundary: Boundary::Periodic,
            derivative: DerivativeMethod::Spectral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub center: Vec<f64>,
    pub width: f64,
    #[serde(default)]
    pub momentum: Vec<f64>,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    /// Normalized superposition of Gaussian packets.
    Gaussian { packets: Vec<Packet> },
    /// `exp(i k.x)`; commensurate with the box on periodic grids.
    PlaneWave { wavenumber: Vec<f64> },
    /// Ground state of `V = m w^2 |x - c|^2 / 2`.
    HarmonicGround { omega: f64, center: Vec<f64> },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Gaussian {
            packets: vec![Packet {
                center: vec![0.0],
                width: 1.0,
                momentum: vec![0.0],
                weight: 1.0,
                phase: 0.0,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    #[default]
    Zero,
    Harmonic { omega: f64, center: Vec<f64> },
    /// Gaussian bump `height exp(-|x - c|^2 / (2 width^2))`.
    Barrier { height: f64, center: Vec<f64>, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub solver: SolverMethod,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub trajectory_dt: f64,
    pub node_policy: NodePolicy,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            solver: SolverMethod::CrankNicolson,
            dt: 1e-3,
            steps: 1000,
            record_every: 10,
            trajectory_dt: 1e-3,
            node_policy: NodePolicy::Shrink,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative residual of each Crank–Nicolson line solve.
    pub solver_residual: f64,
    /// Largest allowed `phi_1`, `phi_2` residual along the extended flow.
    pub constraint: f64,
    /// Allowed norm drift per step of the reference solvers.
    pub norm_per_step: f64,
    /// Agreement required of constraint-matrix and bracket checks.
    pub bracket: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solver_residual: 1e-12,
            constraint: 1e-8,
            norm_per_step: 1e-12,
            bracket: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticlesConfig {
    /// Initial positions, one list of `dimension` coordinates each. Empty
    /// means `count` positions drawn from `|psi|^2` with the scenario seed.
    pub positions: Vec<Vec<f64>>,
    pub count: usize,
}

impl Default for ParticlesConfig {
    fn default() -> Self {
        ParticlesConfig {
            positions: Vec::new(),
            count: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub samples: usize,
    pub metric: Metric,
    pub bins: usize,
    /// Stored-frame indices at which the ensemble is compared; the last frame
    /// is always included.
    pub checkpoints: Vec<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            samples: 10_000,
            metric: Metric::KolmogorovSmirnov,
            bins: 64,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub momentum: [f64; 3],
    #[serde(default = "spin_up")]
    pub spin: Spin,
    /// Complex amplitude as `[re, im]`.
    #[serde(default = "unit_amplitude")]
    pub amplitude: [f64; 2],
}

fn spin_up() -> Spin {
    Spin::Up
}

fn unit_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiracConfig {
    pub representation: Representation,
    pub mass: f64,
    pub waves: Vec<WaveConfig>,
    /// Starting event `(t, x, y, z)`.
    pub start: [f64; 4],
    pub dtau: f64,
    pub steps: usize,
    /// Random spinors drawn for the current-normalization check.
    pub random_spinors: usize,
}

impl Default for DiracConfig {
    fn default() -> Self {
        DiracConfig {
            representation: Representation::Dirac,
            mass: 1.0,
            waves: vec![WaveConfig {
                momentum: [0.5, 0.0, 0.0],
                spin: Spin::Up,
                amplitude: [1.0, 0.0],
            }],
            start: [0.0; 4],
            dtau: 1e-2,
            steps: 500,
            random_spinors: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeInitial {
    #[default]
    Vacuum,
    Coherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalarFieldConfig {
    pub length: f64,
    pub mass: f64,
    pub max_mode: i64,
    /// Explicit half-set of mode numbers; overrides `max_mode` when non-empty.
    pub modes: Vec<i64>,
    pub initial: ModeInitial,
    /// Coherent-state centres `[re, im]`, one per half-set mode.
    pub centers: Vec<[f64; 2]>,
    /// Initial guided coordinates `[re, im]`; empty starts at the centres.
    pub coordinates: Vec<[f64; 2]>,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    /// Sample points of the reconstructed field.
    pub field_points: usize,
}

impl Default for ScalarFieldConfig {
    fn default() -> Self {
        ScalarFieldConfig {
            length: 2.0 * PI,
            mass: 1.0,
            max_mode: 4,
            modes: Vec::new(),
            initial: ModeInitial::Vacuum,
            centers: Vec::new(),
            coordinates: Vec::new(),
            dt: 1e-3,
            steps: 2000,
            record_every: 20,
            field_points: 64,
        }
    }
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        key: key.into(),
        message: message.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

fn finite(key: &str, vs: &[f64]) -> Result<()> {
    match vs.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(invalid(format!("{key}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        positive("units.hbar", self.units.hbar)?;
        positive("units.mass", self.units.mass)?;
        for (key, v) in [
            ("tolerances.solver_residual", self.tolerances.solver_residual),
            ("tolerances.constraint", self.tolerances.constraint),
            ("tolerances.norm_per_step", self.tolerances.norm_per_step),
            ("tolerances.bracket", self.tolerances.bracket),
        ] {
            positive(key, v)?;
        }
        match self.sector {
            Sector::Schrodinger => self.validate_schrodinger(),
            Sector::Dirac => self.validate_dirac(),
            Sector::ScalarField => self.validate_scalar_field(),
        }
    }

    fn validate_grid(&self) -> Result<GridSpec> {
        let g = &self.grid;
        if g.dimension != 1 && g.dimension != 2 {
            return Err(invalid("grid.dimension", format!("must be 1 or 2, got {}", g.dimension)));
        }
        if g.points < crate::grid::MIN_POINTS {
            return Err(invalid(
                "grid.points",
                format!("need at least {} points, got {}", crate::grid::MIN_POINTS, g.points),
            ));
        }
        positive("grid.length", g.length)?;
        self.grid_spec()
    }

    fn check_vector(&self, key: &str, v: &[f64]) -> Result<()> {
        if v.len() != self.grid.dimension {
            return Err(invalid(
                key,
                format!("needs {} components, got {}", self.grid.dimension, v.len()),
            ));
        }
        finite(key, v)
    }

    fn validate_schrodinger(&self) -> Result<()> {
        let grid = self.validate_grid()?;
        let it = &self.integrator;
        positive("integrator.dt", it.dt)?;
        positive("integrator.trajectory_dt", it.trajectory_dt)?;
        if it.steps == 0 {
            return Err(invalid("integrator.steps", "must be at least 1"));
        }
        if it.record_every == 0 {
            return Err(invalid("integrator.record_every", "must be at least 1"));
        }
        if it.solver == SolverMethod::SplitStep && grid.boundary() != Boundary::Periodic {
            return Err(invalid("integrator.solver", "split-step needs a periodic grid"));
        }
        if self.grid.derivative == DerivativeMethod::Spectral && grid.boundary() != Boundary::Periodic {
            return Err(invalid("grid.derivative", "spectral derivatives need a periodic grid"));
        }
        match &self.initial {
            InitialState::Gaussian { packets } => {
                if packets.is_empty() {
                    return Err(invalid("initial.packets", "needs at least one packet"));
                }
                for (i, p) in packets.iter().enumerate() {
                    self.check_vector(&format!("initial.packets[{i}].center"), &p.center)?;
                    if !p.momentum.is_empty() {
                        self.check_vector(&format!("initial.packets[{i}].momentum"), &p.momentum)?;
                    }
                    positive(&format!("initial.packets[{i}].width"), p.width)?;
                    finite(&format!("initial.packets[{i}].weight"), &[p.weight, p.phase])?;
                }
            }
            InitialState::PlaneWave { wavenumber } => {
                self.check_vector("initial.wavenumber", wavenumber)?;
                if grid.boundary() != Boundary::Periodic {
                    return Err(invalid("initial.kind", "plane waves need a periodic grid"));
                }
            }
            InitialState::HarmonicGround { omega, center } => {
                positive("initial.omega", *omega)?;
                self.check_vector("initial.center", center)?;
            }
        }
        match &self.potential {
            PotentialConfig::Zero => {}
            PotentialConfig::Harmonic { omega, center } => {
                positive("potential.omega", *omega)?;
                self.check_vector("potential.center", center)?;
            }
            PotentialConfig::Barrier { height, center, width } => {
                finite("potential.height", &[*height])?;
                positive("potential.width", *width)?;
                self.check_vector("potential.center", center)?;
            }
        }
        for (i, x) in self.particles.positions.iter().enumerate() {
            let key = format!("particles.positions[{i}]");
            self.check_vector(&key, x)?;
            if !grid.contains(x) {
                return Err(invalid(
                    key,
                    format!("{x:?} lies outside the box [{}, {})", grid.lower(), grid.upper()),
                ));
            }
        }
        let e = &self.ensemble;
        if e.samples < 100 {
            return Err(invalid("ensemble.samples", format!("need at least 100, got {}", e.samples)));
        }
        if e.bins == 0 {
            return Err(invalid("ensemble.bins", "must be at least 1"));
        }
        let frames = it.steps / it.record_every + 1;
        if let Some(&c) = e.checkpoints.iter().find(|&&c| c > frames) {
            return Err(invalid(
                "ensemble.checkpoints",
                format!("frame {c} beyond the {frames} stored frames"),
            ));
        }
        Ok(())
    }

    fn validate_dirac(&self) -> Result<()> {
        let d = &self.dirac;
        positive("dirac.mass", d.mass)?;
        positive("dirac.dtau", d.dtau)?;
        if d.waves.is_empty() {
            return Err(invalid("dirac.waves", "needs at least one plane wave"));
        }
        for (i, w) in d.waves.iter().enumerate() {
            finite(&format!("dirac.waves[{i}].momentum"), &w.momentum)?;
            finite(&format!("dirac.waves[{i}].amplitude"), &w.amplitude)?;
        }
        finite("dirac.start", &d.start)?;
        let grid = self.validate_grid()?;
        if grid.dimension() != 1 || grid.boundary() != Boundary::Periodic {
            return Err(invalid("grid", "the spinor lattice check needs a 1D periodic grid"));
        }
        Ok(())
    }

    fn validate_scalar_field(&self) -> Result<()> {
        let s = &self.scalar_field;
        positive("scalar_field.length", s.length)?;
        if !(s.mass >= 0.0 && s.mass.is_finite()) {
            return Err(invalid("scalar_field.mass", format!("must be non-negative, got {}", s.mass)));
        }
        positive("scalar_field.dt", s.dt)?;
        if s.record_every == 0 {
            return Err(invalid("scalar_field.record_every", "must be at least 1"));
        }
        if s.field_points == 0 {
            return Err(invalid("scalar_field.field_points", "must be at least 1"));
        }
        let modes = self
            .mode_set()
            .map_err(|e| invalid(if s.modes.is_empty() { "scalar_field.max_mode" } else { "scalar_field.modes" }, e.to_string()))?;
        if s.initial == ModeInitial::Coherent && s.centers.len() != modes.len() {
            return Err(invalid(
                "scalar_field.centers",
                format!("needs one centre per mode ({}), got {}", modes.len(), s.centers.len()),
            ));
        }
        if !s.coordinates.is_empty() && s.coordinates.len() != modes.len() {
            return Err(invalid(
                "scalar_field.coordinates",
                format!("needs one coordinate per mode ({}), got {}", modes.len(), s.coordinates.len()),
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dimension, self.grid.points, self.grid.length, self.grid.boundary)
    }

    pub fn axis_masses(&self) -> Vec<f64> {
        vec![self.units.mass; self.grid.dimension]
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let mut c = SolverConfig::new(self.integrator.solver, self.integrator.dt)?;
        c.tolerance = self.tolerances.solver_residual;
        c.kinetic = self.grid.derivative;
        Ok(c)
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let mut spec = EnsembleSpec::new(self.ensemble.samples, self.seed)?;
        spec.metric = self.ensemble.metric;
        spec.bins = self.ensemble.bins;
        Ok(spec)
    }

    /// The normalized initial wave function on the lattice.
    pub fn initial_field(&self) -> Result<ComplexLatticeField> {
        let grid = self.grid_spec()?;
        let hbar = self.units.hbar;
        let m = self.units.mass;
        let f = match &self.initial {
            InitialState::Gaussian { packets } => ComplexLatticeField::from_fn(grid, |x| {
                packets
                    .iter()
                    .map(|p| {
                        let mut arg = Complex64::new(0.0, p.phase);
                        for (a, &xa) in x.iter().enumerate() {
                            let d = xa - p.center[a];
                            let k = p.momentum.get(a).copied().unwrap_or(0.0);
                            arg += Complex64::new(-d * d / (4.0 * p.width * p.width), k * d / hbar);
                        }
                        p.weight * arg.exp()
                    })
                    .sum()
            }),
            InitialState::PlaneWave { wavenumber } => ComplexLatticeField::from_fn(grid, |x| {
                Complex64::from_polar(1.0, x.iter().zip(wavenumber).map(|(a, k)| a * k).sum())
            }),
            InitialState::HarmonicGround { omega, center } => ComplexLatticeField::from_fn(grid, |x| {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                Complex64::new((-m * omega * r2 / (2.0 * hbar)).exp(), 0.0)
            }),
        };
        if grid.boundary() == Boundary::HardWall {
            let mut f = f;
            let n = grid.points();
            for i in 0..grid.sites() {
                let idx = grid.unflatten(i);
                if idx[..grid.dimension()].iter().any(|&k| k == 0 || k == n - 1) {
                    f.values_mut()[i] = Complex64::new(0.0, 0.0);
                }
            }
            return f.normalized();
        }
        f.normalized()
    }

    pub fn potential_values(&self) -> Result<Vec<f64>> {
        let grid = self.grid_spec()?;
        let m = self.units.mass;
        Ok((0..grid.sites())
            .map(|site| grid.site_coordinates(site))
            .map(|x| match &self.potential {
                PotentialConfig::Zero => 0.0,
                PotentialConfig::Harmonic { omega, center } => {
                    let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                    0.5 * m * omega * omega * r2
                }
                PotentialConfig::Barrier { height, center, width } => {
                    let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                    height * (-r2 / (2.0 * width * width)).exp()
                }
            })
            .collect())
    }

    pub fn gamma_algebra(&self) -> GammaAlgebra {
        GammaAlgebra::new(self.dirac.representation)
    }

    pub fn plane_waves(&self, gamma: &GammaAlgebra) -> PlaneWaveSuperposition {
        let terms: Vec<(Complex64, PlaneWave)> = self
            .dirac
            .waves
            .iter()
            .map(|w| {
                (
                    Complex64::new(w.amplitude[0], w.amplitude[1]),
                    PlaneWave {
                        momentum: w.momentum,
                        mass: self.dirac.mass,
                        spin: w.spin,
                    },
                )
            })
            .collect();
        PlaneWaveSuperposition::new(gamma, &terms)
    }

    pub fn mode_set(&self) -> Result<ModeSet> {
        let s = &self.scalar_field;
        if s.modes.is_empty() {
            ModeSet::new(s.length, s.mass, s.max_mode)
        } else {
            ModeSet::with_half_set(s.length, s.mass, s.modes.clone())
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Backtick-quoted names in a deserializer message: the offending key
/// first, then the accepted ones.
fn quoted_names(message: &str) -> Vec<&str> {
    message.split('`').skip(1).step_by(2).collect()
}

fn suggestion(unknown: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::levenshtein(unknown, c), *c))
        .filter(|&(d, c)| d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| c.to_string())
}

/// Parses and validates a scenario. Unknown keys are rejected with the
/// closest accepted key, if one is near.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        let message = e.message().trim().to_string();
        if message.starts_with("unknown field") || message.starts_with("unknown variant") {
            let names = quoted_names(&message);
            if let Some((bad, rest)) = names.split_first() {
                let hint = suggestion(bad, rest).map_or(String::new(), |s| format!("; did you mean `{s}`?"));
                return Error::Validation {
                    key: bad.to_string(),
                    message: format!("unknown key at line {line}, column {column}{hint}"),
                };
            }
        }
        Error::Parse { line, column, message }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_fills_defaults() {
        let s = parse_scenario("sector = \"schrodinger\"\n").unwrap();
        assert_eq!(s, Scenario::default());
        let f = s.initial_field().unwrap();
        assert!((f.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_suggests_the_nearest() {
        let text = "sector = \"schrodinger\"\n[potental]\nkind = \"zero\"\n";
        match parse_scenario(text) {
            Err(Error::Validation { key, message }) => {
                assert_eq!(key, "potental");
                assert!(message.contains("`potential`"), "{message}");
                assert!(message.contains("line 2"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn nested_unknown_key() {
        let text = "[grid]\npoints = 64\nlenght = 10.0\n";
        match parse_scenario(text) {
            Err(Error::Validation { key, message }) => {
                assert_eq!(key, "lenght");
                assert!(message.contains("`length`"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_scenario("seed = 3\n[grid\n") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column >= 1);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn particle_outside_box_names_the_key() {
        let text = "[grid]\nlength = 10.0\n[particles]\npositions = [[0.0], [7.5]]\n";
        match parse_scenario(text) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "particles.positions[1]"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn tagged_sections_round_trip() {
        let text = r#"
sector = "schrodinger"
seed = 42
[grid]
points = 128
length = 30.0
derivative = "finite-difference"
[initial]
kind = "gaussian"
packets = [
  { center = [-3.0], width = 0.7 },
  { center = [3.0], width = 0.7, momentum = [0.5], weight = 0.5, phase = 1.0 },
]
[potential]
kind = "harmonic"
omega = 0.5
center = [0.0]
[integrator]
solver = "split-step"
node_policy = "freeze"
"#;
        let s = parse_scenario(text).unwrap();
        let again = parse_scenario(&s.to_toml().unwrap()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.integrator.node_policy, NodePolicy::Freeze);
    }

    #[test]
    fn unknown_field_inside_tagged_section() {
        let text = "[potential]\nkind = \"harmonic\"\nomega = 1.0\ncenter = [0.0]\nomgea = 2.0\n";
        assert!(matches!(parse_scenario(text), Err(Error::Validation { .. })));
    }

    #[test]
    fn other_sectors_round_trip() {
        for sector in ["dirac", "scalar-field"] {
            let s = parse_scenario(&format!("sector = \"{sector}\"\n[grid]\npoints = 64\nlength = 20.0\n")).unwrap();
            assert_eq!(parse_scenario(&s.to_toml().unwrap()).unwrap(), s);
        }
    }

    #[test]
    fn coherent_needs_centres() {
        let text = "sector = \"scalar-field\"\n[scalar_field]\ninitial = \"coherent\"\nmax_mode = 2\ncenters = [[1.0, 0.0]]\n";
        match parse_scenario(text) {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "scalar_field.centers"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn hard_wall_initial_field_vanishes_on_walls() {
        let text = "[grid]\nboundary = \"hard-wall\"\nderivative = \"finite-difference\"\npoints = 64\nlength = 10.0\n";
        let s = parse_scenario(text).unwrap();
        let f = s.initial_field().unwrap();
        assert_eq!(f.values()[0], Complex64::new(0.0, 0.0));
        assert_eq!(f.values()[63], Complex64::new(0.0, 0.0));
    }
}
