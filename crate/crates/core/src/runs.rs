//! One function per `pilotwave` subcommand. Each takes a validated scenario
//! and returns tables, plots and invariant summaries for
//! [`emit_outputs`](crate::output::emit_outputs).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{constraint_matrix, DiracBracket, FieldPhaseSpaceState, LatticeFunctional, Variable};
use crate::dirac::{
    current, dirac_lattice_eom_check, integrate_worldline, minkowski_dot, ExternalPotential, GammaAlgebra,
    Representation, Spinor, SpinorField, SpinorLatticeState, LIGHTLIKE_EPSILON,
};
use crate::ensemble::{equivariance_test, sample_density};
use crate::error::{Error, Result};
use crate::flow::{evolve_coupled, evolve_extended, total_hamiltonian, Coupling, HamiltonianSpec, ParticleState, Potential};
use crate::grid::{ComplexLatticeField, DerivativeMethod, GridSpec};
use crate::guidance::{integrate_trajectory, WaveFrames};
use crate::output::{heatmap, line_plot, Invariant, RunOutput, Series, Table};
use crate::scalar_field::{evolve_coupled_modes, vacuum_state, GaussianModeState, ModeParticleState};
use crate::scenario::{ModeInitial, Scenario, Sector};
use crate::solver::{energy, CrankNicolson, ReferenceSolver, SolverMethod};

/// Exact zero checks allow for nothing but signed zeros.
const EXACT: f64 = 1e-14;
/// Coherent-centre agreement with `c(0) e^{-i w t}`.
const CENTER_TOLERANCE: f64 = 1e-8;
/// Lattice EOM residual relative to the largest rate.
const EOM_TOLERANCE: f64 = 1e-14;
/// Largest constraint subset handed to the dense bracket checks.
const MAX_CONSTRAINT_SITES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evolve { compare_cn: bool },
    Solve,
    Trajectories,
    Equivariance,
    CheckConstraints,
    Dirac,
    ScalarField,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Evolve { .. } => "evolve",
            Command::Solve => "solve",
            Command::Trajectories => "trajectories",
            Command::Equivariance => "equivariance",
            Command::CheckConstraints => "check-constraints",
            Command::Dirac => "dirac",
            Command::ScalarField => "scalar-field",
        }
    }

    pub fn sector(&self) -> Sector {
        match self {
            Command::Dirac => Sector::Dirac,
            Command::ScalarField => Sector::ScalarField,
            _ => Sector::Schrodinger,
        }
    }
}

pub fn run(command: Command, scenario: &Scenario) -> Result<RunOutput> {
    if scenario.sector != command.sector() {
        return Err(Error::Validation {
            key: "sector".into(),
            message: format!("`{}` needs sector {:?}, scenario has {:?}", command.name(), command.sector(), scenario.sector),
        });
    }
    match command {
        Command::Evolve { compare_cn } => run_evolve(scenario, compare_cn),
        Command::Solve => run_solve(scenario),
        Command::Trajectories => run_trajectories(scenario),
        Command::Equivariance => run_equivariance(scenario),
        Command::CheckConstraints => run_check_constraints(scenario),
        Command::Dirac => run_dirac(scenario),
        Command::ScalarField => run_scalar_field(scenario),
    }
}

fn hamiltonian(scenario: &Scenario, grid: &GridSpec) -> Result<HamiltonianSpec> {
    Ok(HamiltonianSpec::single(
        grid,
        scenario.units.hbar,
        scenario.units.mass,
        Potential::Static(scenario.potential_values()?),
        scenario.grid.derivative,
    ))
}

/// Long-format density table plus a plot: every frame in 1D, the first and
/// last in 2D.
fn density_output(out: &mut RunOutput, frames: &[(f64, ComplexLatticeField)]) {
    let grid = *frames[0].1.grid();
    let two_d = grid.dimension() == 2;
    let mut table = Table::new(if two_d { &["time", "x", "y", "density"] } else { &["time", "x", "density"] });
    let picked: Vec<&(f64, ComplexLatticeField)> = if two_d {
        vec![&frames[0], frames.last().unwrap()]
    } else {
        frames.iter().collect()
    };
    for (t, f) in &picked {
        for (s, rho) in f.density().into_iter().enumerate() {
            let mut row = vec![*t];
            row.extend(grid.site_coordinates(s));
            row.push(rho);
            table.push(row);
        }
    }
    out.tables.push(("density.csv".into(), table));
    let (lo, hi) = (grid.lower(), grid.upper());
    let svg = if two_d {
        let n = grid.points();
        let rho = frames.last().unwrap().1.density();
        let rows: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| rho[i * n + j]).collect()).collect();
        heatmap("final density", "x", "y", (lo, hi), (lo, hi), &rows)
    } else {
        let rows: Vec<Vec<f64>> = frames.iter().map(|(_, f)| f.density()).collect();
        heatmap("density", "x", "t", (lo, hi), (frames[0].0, frames.last().unwrap().0), &rows)
    };
    out.plots.push(("density.svg".into(), svg));
}

/// The `H_T` flow from on-constraint initial data, optionally against
/// Crank–Nicolson at the same step.
pub fn run_evolve(scenario: &Scenario, compare_cn: bool) -> Result<RunOutput> {
    let grid = scenario.grid_spec()?;
    let it = &scenario.integrator;
    let hbar = scenario.units.hbar;
    let h = hamiltonian(scenario, &grid)?;
    let psi0 = scenario.initial_field()?;
    let s0 = FieldPhaseSpaceState::on_constraint(psi0.clone(), hbar);
    let flow = evolve_extended(&s0, &h, it.dt, it.steps, it.record_every)?;

    let cn_frames = if compare_cn {
        let cn = CrankNicolson::new(grid, scenario.potential_values()?, &scenario.axis_masses(), scenario.units, it.dt)?
            .with_tolerance(scenario.tolerances.solver_residual);
        let mut psi = psi0.clone();
        let mut frames = vec![psi.clone()];
        for n in 1..=it.steps {
            cn.step(&mut psi)?;
            if n % it.record_every == 0 || n == it.steps {
                frames.push(psi.clone());
            }
        }
        Some(frames)
    } else {
        None
    };

    let mut columns = vec!["time", "norm", "energy", "constraint_residual"];
    if compare_cn {
        columns.push("l2_to_cn");
    }
    let mut table = Table::new(&columns);
    let mut max_l2: f64 = 0.0;
    let mut norm_drift: f64 = 0.0;
    for (k, s) in flow.states.iter().enumerate() {
        let norm = s.psi.norm();
        norm_drift = norm_drift.max((norm - 1.0).abs());
        let mut row = vec![s.time, norm, total_hamiltonian(s, &h)?.re, s.constraint_residual(hbar)];
        if let Some(cn) = &cn_frames {
            let d = s.psi.l2_distance(&cn[k])?;
            max_l2 = max_l2.max(d);
            row.push(d);
        }
        table.push(row);
    }
    let mut out = RunOutput::default();
    let time = table.column("time").unwrap();
    let energy = table.column("energy").unwrap();
    out.plots.push((
        "energy.svg".into(),
        line_plot("H_T along the flow", "t", "H_T", &[Series { label: "H_T", x: &time, y: &energy }]),
    ));
    out.tables.push(("evolve.csv".into(), table));
    let frames: Vec<(f64, ComplexLatticeField)> = flow.states.iter().map(|s| (s.time, s.psi.clone())).collect();
    density_output(&mut out, &frames);
    out.invariants.push(Invariant::at_most(
        "constraint residual",
        flow.max_constraint_residual,
        scenario.tolerances.constraint,
    ));
    out.constraint_maxima.insert("phi".into(), flow.max_constraint_residual);
    out.notes.push(format!("largest norm drift {norm_drift:.3e}"));
    if compare_cn {
        out.notes.push(format!("largest L2 distance to Crank-Nicolson {max_l2:.3e}"));
    }
    Ok(out)
}

/// Stored frames of the configured reference solver.
pub fn reference_frames(scenario: &Scenario) -> Result<Vec<(f64, ComplexLatticeField)>> {
    let grid = scenario.grid_spec()?;
    let it = &scenario.integrator;
    let solver = ReferenceSolver::new(
        grid,
        scenario.potential_values()?,
        &scenario.axis_masses(),
        scenario.units,
        &scenario.solver_config()?,
    )?;
    solver.run(&scenario.initial_field()?, it.steps, it.record_every)
}

fn wave_frames(scenario: &Scenario, frames: &[(f64, ComplexLatticeField)]) -> Result<WaveFrames> {
    WaveFrames::new(frames, scenario.units.hbar, &scenario.axis_masses(), scenario.grid.derivative)
}

pub fn run_solve(scenario: &Scenario) -> Result<RunOutput> {
    let frames = reference_frames(scenario)?;
    let pot = scenario.potential_values()?;
    let masses = scenario.axis_masses();
    let hbar = scenario.units.hbar;
    let it = &scenario.integrator;
    let mut table = Table::new(&["time", "norm", "energy", "norm_drift"]);
    let mut per_step: f64 = 0.0;
    // energy under the operator the solver actually steps with
    let method = match it.solver {
        SolverMethod::CrankNicolson => DerivativeMethod::FiniteDifference,
        SolverMethod::SplitStep => scenario.grid.derivative,
    };
    let e0 = energy(&frames[0].1, &pot, &masses, hbar, method)?;
    let mut energy_drift: f64 = 0.0;
    for (k, (t, psi)) in frames.iter().enumerate() {
        let norm = psi.norm();
        let e = energy(psi, &pot, &masses, hbar, method)?;
        energy_drift = energy_drift.max((e - e0).abs());
        if k > 0 {
            let steps = ((t - frames[0].0) / it.dt).round().max(1.0);
            per_step = per_step.max((norm - frames[0].1.norm()).abs() / steps);
        }
        table.push(vec![*t, norm, e, norm - 1.0]);
    }
    let mut out = RunOutput::default();
    let time = table.column("time").unwrap();
    let drift = table.column("norm_drift").unwrap();
    out.plots.push((
        "norm.svg".into(),
        line_plot("norm drift", "t", "||psi|| - 1", &[Series { label: "drift", x: &time, y: &drift }]),
    ));
    out.tables.push(("solve.csv".into(), table));
    density_output(&mut out, &frames);
    out.invariants
        .push(Invariant::at_most("norm drift per step", per_step, scenario.tolerances.norm_per_step));
    out.notes.push(format!("largest energy drift {energy_drift:.3e}"));
    Ok(out)
}

/// Initial particle positions: the configured list, or seeded draws from
/// `|psi(0)|^2`.
pub fn initial_positions(scenario: &Scenario) -> Result<Vec<Vec<f64>>> {
    if !scenario.particles.positions.is_empty() {
        return Ok(scenario.particles.positions.clone());
    }
    sample_density(&scenario.initial_field()?, scenario.particles.count, scenario.seed)
}

pub fn run_trajectories(scenario: &Scenario) -> Result<RunOutput> {
    let frames = reference_frames(scenario)?;
    let wf = wave_frames(scenario, &frames)?;
    let it = &scenario.integrator;
    let dim = scenario.grid.dimension;
    let mut columns = vec!["particle", "time", "x"];
    if dim == 2 {
        columns.push("y");
    }
    columns.push("speed");
    let mut table = Table::new(&columns);
    let mut out = RunOutput::default();
    let mut paths = Vec::new();
    for (k, x0) in initial_positions(scenario)?.iter().enumerate() {
        let traj = integrate_trajectory(&wf, x0, it.trajectory_dt, it.node_policy)?;
        for ((t, x), s) in traj.times.iter().zip(&traj.positions).zip(&traj.speeds) {
            let mut row = vec![k as f64, *t];
            row.extend(x);
            row.push(*s);
            table.push(row);
        }
        if !traj.node_events.is_empty() {
            out.notes.push(format!(
                "particle {k}: {} node events, first at t = {:.6}",
                traj.node_events.len(),
                traj.node_events[0].time
            ));
        }
        paths.push(traj);
    }
    let xs: Vec<(Vec<f64>, Vec<f64>)> = paths
        .iter()
        .map(|p| {
            let x: Vec<f64> = p.positions.iter().map(|x| x[0]).collect();
            if dim == 2 {
                (x, p.positions.iter().map(|x| x[1]).collect())
            } else {
                (p.times.clone(), x)
            }
        })
        .collect();
    let labels: Vec<String> = (0..xs.len()).map(|k| format!("#{k}")).collect();
    let series: Vec<Series> = xs
        .iter()
        .zip(&labels)
        .map(|((a, b), l)| Series { label: l, x: a, y: b })
        .collect();
    let (xl, yl) = if dim == 2 { ("x", "y") } else { ("t", "x") };
    out.plots.push(("trajectories.svg".into(), line_plot("trajectories", xl, yl, &series)));
    out.tables.push(("trajectories.csv".into(), table));
    Ok(out)
}

pub fn run_equivariance(scenario: &Scenario) -> Result<RunOutput> {
    let frames = reference_frames(scenario)?;
    let wf = wave_frames(scenario, &frames)?;
    let spec = scenario.ensemble_spec()?;
    let it = &scenario.integrator;
    let report = equivariance_test(&wf, &spec, it.trajectory_dt, it.node_policy, &scenario.ensemble.checkpoints)?;
    let mut checks = Table::new(&["time", "statistic", "threshold", "pass"]);
    for c in &report.checkpoints {
        checks.push(vec![c.time, c.statistic, c.threshold, if c.pass { 1.0 } else { 0.0 }]);
    }
    let mut hist = Table::new(&["lower", "upper", "count", "expected"]);
    for b in &report.histogram {
        hist.push(vec![b.lower, b.upper, b.count as f64, b.expected]);
    }
    let mut out = RunOutput::default();
    let mids: Vec<f64> = report.histogram.iter().map(|b| 0.5 * (b.lower + b.upper)).collect();
    let counts: Vec<f64> = report.histogram.iter().map(|b| b.count as f64).collect();
    let expected: Vec<f64> = report.histogram.iter().map(|b| b.expected).collect();
    out.plots.push((
        "histogram.svg".into(),
        line_plot(
            "final ensemble",
            "x",
            "count",
            &[
                Series { label: "ensemble", x: &mids, y: &counts },
                Series { label: "|psi|^2", x: &mids, y: &expected },
            ],
        ),
    ));
    out.tables.push(("equivariance.csv".into(), checks));
    out.tables.push(("histogram.csv".into(), hist));
    let last = report.checkpoints.last().unwrap();
    out.invariants.push(Invariant {
        name: "ensemble statistic".into(),
        value: last.statistic,
        tolerance: last.threshold,
        pass: report.pass,
    });
    out.report = Some(serde_json::to_value(&report)?);
    Ok(out)
}

/// Evenly spaced sites for the dense bracket checks.
fn constraint_sites(grid: &GridSpec) -> Vec<usize> {
    let n = grid.sites();
    let k = n.min(MAX_CONSTRAINT_SITES);
    (0..k).map(|i| i * n / k).collect()
}

pub fn run_check_constraints(scenario: &Scenario) -> Result<RunOutput> {
    let grid = scenario.grid_spec()?;
    let hbar = scenario.units.hbar;
    let tol = scenario.tolerances;
    let psi0 = scenario.initial_field()?;
    let s0 = FieldPhaseSpaceState::on_constraint(psi0, hbar);
    let sites = constraint_sites(&grid);
    let mut out = RunOutput::default();

    let cm = constraint_matrix(&s0, &sites, hbar)?;
    let expected = hbar / grid.cell_volume();
    out.invariants.push(Invariant::at_most("constraint matrix antisymmetry", cm.antisymmetry_defect(), tol.bracket));
    out.invariants.push(Invariant::at_most(
        "smallest singular value - hbar/dx^d",
        (cm.smallest_singular_value() - expected).abs(),
        tol.bracket,
    ));

    let db = DiracBracket::new(&s0, &sites, hbar)?;
    let (a, b) = (sites[0], sites[sites.len() / 2]);
    let probes = [
        LatticeFunctional::numeric("psi_a^2 psi*_b", move |s| {
            s.value(Variable::Psi, a) * s.value(Variable::Psi, a) * s.value(Variable::PsiStar, b)
        }),
        LatticeFunctional::numeric("Pi_a psi_b", move |s| s.value(Variable::PiPsi, a) * s.value(Variable::Psi, b)),
        LatticeFunctional::coordinate(Variable::PiPsiStar, b),
    ];
    let mut worst: f64 = 0.0;
    for f in &probes {
        for &site in &sites {
            for phi in [LatticeFunctional::phi1(site, hbar), LatticeFunctional::phi2(site, hbar)] {
                worst = worst.max(db.bracket(f, &phi, &s0)?.norm());
            }
        }
    }
    out.invariants.push(Invariant::at_most("Dirac bracket with constraints", worst, tol.bracket));

    let h = hamiltonian(scenario, &grid)?;
    let it = &scenario.integrator;
    let flow = evolve_extended(&s0, &h, it.dt, it.steps, it.record_every)?;
    let mut table = Table::new(&["time", "constraint_residual"]);
    for s in &flow.states {
        table.push(vec![s.time, s.constraint_residual(hbar)]);
    }
    out.invariants.push(Invariant::at_most(
        "constraint residual",
        flow.max_constraint_residual,
        tol.constraint,
    ));
    out.constraint_maxima.insert("phi".into(), flow.max_constraint_residual);

    let positions: Vec<Vec<f64>> = initial_positions(scenario)?.into_iter().take(1).collect();
    let ps = ParticleState::at(positions, vec![scenario.units.mass]);
    let coupled = evolve_coupled(&s0, &ps, &h.clone().with_coupling(Coupling::FieldAndParticles), it.dt, it.steps, it.record_every)?;
    out.invariants.push(Invariant::at_most("particle momentum", coupled.max_momentum, EXACT));
    out.constraint_maxima.insert("particle_momentum".into(), coupled.max_momentum);
    out.constraint_maxima.insert("phi_coupled".into(), coupled.max_constraint_residual);

    let time = table.column("time").unwrap();
    let residual = table.column("constraint_residual").unwrap();
    out.plots.push((
        "constraints.svg".into(),
        line_plot("constraint residual", "t", "max |phi|", &[Series { label: "phi", x: &time, y: &residual }]),
    ));
    out.tables.push(("constraints.csv".into(), table));
    Ok(out)
}

fn random_spinor(rng: &mut ChaCha8Rng) -> Spinor {
    let mut z = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    [z(), z(), z(), z()]
}

pub fn run_dirac(scenario: &Scenario) -> Result<RunOutput> {
    let d = &scenario.dirac;
    let gamma = scenario.gamma_algebra();
    let other = GammaAlgebra::new(match d.representation {
        Representation::Dirac => Representation::Weyl,
        Representation::Weyl => Representation::Dirac,
    });
    let mut out = RunOutput::default();

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (mut norm_defect, mut rep_defect, mut skipped) = (0.0_f64, 0.0_f64, 0usize);
    let to_other = other.from_dirac() * gamma.from_dirac().adjoint();
    for _ in 0..d.random_spinors {
        let psi = random_spinor(&mut rng);
        match current(&psi, &gamma) {
            Ok(c) => {
                norm_defect = norm_defect.max((minkowski_dot(&c.j, &c.j) - 1.0).abs());
                let moved = crate::dirac::apply(&to_other, &psi);
                let c2 = current(&moved, &other)?;
                for mu in 0..4 {
                    rep_defect = rep_defect.max((c.j[mu] - c2.j[mu]).abs());
                }
            }
            Err(Error::Lightlike { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    out.invariants.push(Invariant::at_most("random-spinor |J.J - 1|", norm_defect, 1e-10));
    out.invariants.push(Invariant::at_most("representation difference", rep_defect, 1e-10));
    if skipped > 0 {
        out.notes.push(format!("{skipped} random spinors below the a^2 + b^2 threshold {LIGHTLIKE_EPSILON:e}"));
    }

    let field = scenario.plane_waves(&gamma);
    let line = integrate_worldline(&field, &gamma, d.start, d.dtau, d.steps)?;
    let twin = integrate_worldline(&scenario.plane_waves(&other), &other, d.start, d.dtau, d.steps)?;
    let mut worldline_gap: f64 = 0.0;
    for (e1, e2) in line.events.iter().zip(&twin.events) {
        for mu in 0..4 {
            worldline_gap = worldline_gap.max((e1[mu] - e2[mu]).abs());
        }
    }
    out.invariants.push(Invariant::at_most("worldline |J.J - 1|", line.max_norm_defect(), 1e-10));
    out.invariants.push(Invariant::at_most("worldline representation difference", worldline_gap, 1e-10));
    out.invariants.push(Invariant::at_most("particle momentum", line.max_momentum(), EXACT));
    out.constraint_maxima.insert("particle_momentum".into(), line.max_momentum());
    if let Some(ev) = line.truncated {
        out.notes.push(format!("worldline truncated at tau = {} where a^2 + b^2 = {:.3e}", ev.tau, ev.value));
    }
    if !line.is_future_directed() {
        out.notes.push("worldline is not future directed".into());
    }

    let grid = scenario.grid_spec()?;
    let state = SpinorLatticeState::on_constraint(grid, &gamma, |x| field.value(&[d.start[0], x, 0.0, 0.0]))?;
    let check = dirac_lattice_eom_check(&state, &gamma, &ExternalPotential::none(grid.sites()), d.mass, scenario.grid.derivative)?;
    out.invariants.push(Invariant::at_most(
        "lattice EOM residual",
        check.max_residual() / check.rate_scale.max(1.0),
        EOM_TOLERANCE,
    ));

    let mut table = Table::new(&["tau", "t", "x", "y", "z", "j0", "j1", "j2", "j3", "a", "b"]);
    for k in 0..line.tau.len() {
        let mut row = vec![line.tau[k]];
        row.extend(line.events[k]);
        row.extend(line.currents[k]);
        row.push(line.a[k]);
        row.push(line.b[k]);
        table.push(row);
    }
    let t = table.column("t").unwrap();
    let x = table.column("x").unwrap();
    out.plots.push(("worldline.svg".into(), line_plot("worldline", "x", "t", &[Series { label: "X", x: &x, y: &t }])));
    out.tables.push(("worldline.csv".into(), table));
    Ok(out)
}

pub fn run_scalar_field(scenario: &Scenario) -> Result<RunOutput> {
    let cfg = &scenario.scalar_field;
    let modes = scenario.mode_set()?;
    let to_c = |v: &[[f64; 2]]| v.iter().map(|c| Complex64::new(c[0], c[1])).collect::<Vec<_>>();
    let state = match cfg.initial {
        ModeInitial::Vacuum => vacuum_state(&modes),
        ModeInitial::Coherent => GaussianModeState::coherent(&modes, &to_c(&cfg.centers))?,
    };
    let q0 = if cfg.coordinates.is_empty() { state.centers() } else { to_c(&cfg.coordinates) };
    let traj = evolve_coupled_modes(&state, &ModeParticleState::at(q0), cfg.dt, cfg.steps, cfg.record_every)?;

    let xs: Vec<f64> = (0..cfg.field_points)
        .map(|i| i as f64 * modes.length() / cfg.field_points as f64)
        .collect();
    let scale = 1.0 / modes.length().sqrt();
    let mut mode_table = Table::new(&["time", "n", "q_re", "q_im", "center_re", "center_im"]);
    let mut field_table = Table::new(&["time", "x", "phi"]);
    let mut imaginary: f64 = 0.0;
    let mut center_error: f64 = 0.0;
    let mut field_rows = Vec::new();
    let c0 = state.centers();
    for ((t, s), p) in traj.times.iter().zip(&traj.states).zip(&traj.particles) {
        let centers = s.centers();
        for (k, m) in s.params.iter().enumerate() {
            mode_table.push(vec![*t, m.n as f64, p.q[k].re, p.q[k].im, centers[k].re, centers[k].im]);
            let rotated = c0[k] * Complex64::from_polar(1.0, -m.omega * (t - state.time));
            center_error = center_error.max((centers[k] - rotated).norm());
        }
        let full = modes.expand(&p.q)?;
        let mut row = Vec::with_capacity(xs.len());
        for &x in &xs {
            let v: Complex64 = full
                .iter()
                .map(|&(n, q)| q * Complex64::from_polar(1.0, modes.wavenumber(n) * x))
                .sum::<Complex64>()
                * scale;
            imaginary = imaginary.max(v.im.abs());
            field_table.push(vec![*t, x, v.re]);
            row.push(v.re);
        }
        field_rows.push(row);
    }
    let mut out = RunOutput::default();
    out.invariants.push(Invariant::at_most("field imaginary part", imaginary, 1e-10));
    out.invariants.push(Invariant::at_most("centre rotation error", center_error, CENTER_TOLERANCE));
    out.invariants.push(Invariant::at_most("mode momentum", traj.max_momentum, EXACT));
    out.constraint_maxima.insert("mode_momentum".into(), traj.max_momentum);
    if cfg.initial == ModeInitial::Vacuum {
        let drift = traj
            .particles
            .iter()
            .flat_map(|p| p.q.iter().zip(&traj.particles[0].q).map(|(a, b)| (a - b).norm()))
            .fold(0.0, f64::max);
        out.invariants.push(Invariant::at_most("vacuum coordinate drift", drift, 0.0));
    }
    let t_end = *traj.times.last().unwrap();
    out.plots.push((
        "field.svg".into(),
        heatmap("reconstructed field", "x", "t", (0.0, modes.length()), (state.time, t_end), &field_rows),
    ));
    out.tables.push(("modes.csv".into(), mode_table));
    out.tables.push(("field.csv".into(), field_table));
    Ok(out)
}
