//! Every example runs to completion.

#[allow(dead_code)]
#[path = "../examples/constraint_algebra.rs"]
mod constraint_algebra;

#[test]
fn constraint_algebra_runs() {
    constraint_algebra::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/hamiltonian_flow.rs"]
mod hamiltonian_flow;

#[test]
fn hamiltonian_flow_runs() {
    hamiltonian_flow::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/reference_solvers.rs"]
mod reference_solvers;

#[test]
fn reference_solvers_runs() {
    reference_solvers::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/bohmian_trajectories.rs"]
mod bohmian_trajectories;

#[test]
fn bohmian_trajectories_runs() {
    bohmian_trajectories::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/equivariance.rs"]
mod equivariance;

#[test]
fn equivariance_runs() {
    equivariance::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/dirac_worldlines.rs"]
mod dirac_worldlines;

#[test]
fn dirac_worldlines_runs() {
    dirac_worldlines::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/scalar_field_modes.rs"]
mod scalar_field_modes;

#[test]
fn scalar_field_modes_runs() {
    scalar_field_modes::run().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/scenario_run.rs"]
mod scenario_run;

#[test]
fn scenario_run_runs() {
    scenario_run::run().unwrap();
}
