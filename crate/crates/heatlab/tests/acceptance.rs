//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured numbers. Tolerances are fixed here, not tuned at
//! run time.

use heatlab::dirichlet::{
    energy, gamma, heat_apply, heat_kernel, heat_measure, laplacian, spectral_decompose,
};
use heatlab::drift::{drift_identify, fp_consistency_check, gibbs_measure, weighted_space};
use heatlab::entropy::{ent, fisher};
use heatlab::generate::{cycle, icosphere};
use heatlab::jko::{edi_check, jko_flow, InnerSolver, JkoConfig};
use heatlab::measure::ProbMeasure;
use heatlab::space::{two_point, DiscreteMMSpace};
use heatlab::verify::{
    contraction_check, dissipation_check, eigen_lipschitz_check, identify, kernel_lipschitz,
    kernel_upper_check, linearity_symmetry_check, ricci_equivalence, riesz_probe,
    speed_bound_check,
};
use heatlab::wasserstein::{wp, wp_value};
use heatlab::{Field, SpectralData};
use nalgebra::DVector;
use std::f64::consts::PI;

fn verdict(name: &str, pass: bool, detail: &str) {
    println!(
        "[{}] criterion {}: {}",
        if pass { "PASS" } else { "FAIL" },
        name,
        detail
    );
}

fn cos_density(space: &DiscreteMMSpace, amplitude: f64) -> ProbMeasure {
    let coords = space.coords().expect("generated space has coordinates");
    let d: Vec<f64> = coords
        .iter()
        .map(|c| 1.0 + amplitude * c[1].atan2(c[0]).cos())
        .collect();
    ProbMeasure::from_density(space, &d).unwrap()
}

fn exact_cfg(tau: f64) -> JkoConfig {
    JkoConfig {
        tau,
        inner_solver: InnerSolver::ExactConvex,
        tol_inner: 1e-7,
        max_outer_steps: 100_000,
    }
}

// -------------------------------------------------------------------------
// exploration harness (temporary)
// -------------------------------------------------------------------------

#[test]
fn explore_identify_two_point() {
    let s = two_point();
    let sd = spectral_decompose(&s).unwrap();
    let rho0 = ProbMeasure::from_density(&s, &[1.5, 0.5]).unwrap();
    for &tau in &[1e-1, 1e-2, 1e-3] {
        let t0 = std::time::Instant::now();
        let r = identify(&s, &sd, &rho0, &[tau], 1.0, &exact_cfg(tau), 5e-3).unwrap();
        println!("2pt tau={tau}: {:?} ({:?})", r.observed, t0.elapsed());
    }
}

#[test]
fn explore_identify_cycle64() {
    let s = cycle(64, 1.0).unwrap();
    let sd = spectral_decompose(&s).unwrap();
    let rho0 = cos_density(&s, 0.5);
    for &tau in &[1e-2, 5e-3, 2.5e-3] {
        let t0 = std::time::Instant::now();
        let r = identify(&s, &sd, &rho0, &[tau], 0.5, &exact_cfg(tau), 0.05 * s.diam()).unwrap();
        println!(
            "c64 tau={tau}: {:?} bound={} ({:?})",
            r.observed,
            0.05 * s.diam(),
            t0.elapsed()
        );
    }
}

#[test]
fn explore_speed_bound_grids() {
    let s = cycle(64, 1.0).unwrap();
    let sd = spectral_decompose(&s).unwrap();
    let rho0 = cos_density(&s, 0.5);
    for (label, grid) in [
        ("uniform13", (0..13).map(|i| 0.01 + i as f64 * 0.0825).collect::<Vec<_>>()),
        ("uniform5", (0..5).map(|i| 0.01 + i as f64 * 0.2475).collect::<Vec<_>>()),
        (
            "log8",
            (0..8).map(|i| 0.01 * 1.93f64.powi(i)).collect::<Vec<_>>(),
        ),
    ] {
        let r = speed_bound_check(&s, &sd, &rho0, &grid, 1e-6).unwrap();
        println!("speed {label}: worst_margin={}", r.observed["worst_margin"]);
        for row in r.observed["samples"].as_array().unwrap() {
            println!("   {row}");
        }
    }
}

#[test]
fn explore_edi_grids() {
    let s = cycle(64, 1.0).unwrap();
    let sd = spectral_decompose(&s).unwrap();
    for amplitude in [0.5, 0.8] {
        let rho0 = cos_density(&s, amplitude);
        for n_nodes in [5usize, 7, 9, 13] {
            let times: Vec<f64> = (0..n_nodes)
                .map(|i| 0.05 + 0.45 * i as f64 / (n_nodes - 1) as f64)
                .collect();
            let measures: Vec<ProbMeasure> = times
                .iter()
                .map(|&t| heat_measure(&s, &sd, t, &rho0).unwrap())
                .collect();
            let traj = heatlab::wasserstein::FlowTrajectory::new(&s, times, measures).unwrap();
            let r = edi_check(&s, &traj).unwrap();
            println!(
                "edi a={amplitude} nodes={n_nodes}: rel={:.4} max_abs={:.5} one_sided={:.2e} drop={:.4}",
                r.relative_defect, r.max_abs_defect, r.max_one_sided_violation, r.total_entropy_drop
            );
        }
    }
}

#[test]
fn explore_dissipation() {
    let s = cycle(128, 1.0).unwrap();
    let sd = spectral_decompose(&s).unwrap();
    let rho0 = cos_density(&s, 0.5);
    let dt = 1e-4;
    let r = dissipation_check(&s, &sd, &rho0, &[0.1 - dt, 0.1, 0.1 + dt], 1e-3).unwrap();
    println!("dissipation c128: {:?}", r.observed);

    // chain defect refinement
    let mut defects = Vec::new();
    for &n in &[32usize, 64, 128] {
        let s = cycle(n, 1.0).unwrap();
        let sd = spectral_decompose(&s).unwrap();
        let rho0 = cos_density(&s, 0.5);
        let state = heat_measure(&s, &sd, 0.1, &rho0).unwrap();
        let d = heatlab::verify::discrete_entropy_derivative(&s, state.density()).unwrap();
        let fi = fisher(&s, state.density());
        defects.push((d + fi).abs());
    }
    println!(
        "chain defects {:?} orders {:.2} {:.2}",
        defects,
        (defects[0] / defects[1]).log2(),
        (defects[1] / defects[2]).log2()
    );
}

#[test]
fn explore_ricci_cycle() {
    let s = cycle(64, 1.0).unwrap();
    let sd = spectral_decompose(&s).unwrap();
    let t0 = std::time::Instant::now();
    let (r, triple) = ricci_equivalence(&s, &sd, 6, 7, 0.1).unwrap();
    println!("cycle64 triple: {triple:?} ({:?}) pass={}", t0.elapsed(), r.pass);
}

#[test]
fn explore_ricci_icosphere() {
    let t0 = std::time::Instant::now();
    let s = icosphere(3, 1.0).unwrap();
    println!("icosphere(3): n={} built in {:?}", s.n(), t0.elapsed());
    let t0 = std::time::Instant::now();
    let sd = spectral_decompose(&s).unwrap();
    println!(
        "spectral done in {:?}; lambda1..3 = {} {} {}",
        t0.elapsed(),
        sd.eigenvalues()[1],
        sd.eigenvalues()[2],
        sd.eigenvalues()[3]
    );
    let t0 = std::time::Instant::now();
    let (r, triple) = ricci_equivalence(&s, &sd, 6, 7, 0.3).unwrap();
    println!("icosphere triple: {triple:?} ({:?}) pass={}", t0.elapsed(), r.pass);
}

#[test]
fn explore_kernel_regularity() {
    let s = cycle(64, 1.0).unwrap();
    let sd = spectral_decompose(&s).unwrap();
    for &t in &[1e-3, 1e-2, 0.1, 1.0, 10.0] {
        println!("kernel_lip({t}) = {}", kernel_lipschitz(&s, &sd, t).unwrap());
    }
    // eigen-lipschitz margins
    for k in 1..=8 {
        let r = eigen_lipschitz_check(&s, &sd, k, &[0.01, 0.05, 0.1, 0.5], 0.0).unwrap();
        println!(
            "eiglip k={k}: quotient={} margin={}",
            r.observed["quotient"], r.observed["min_margin"]
        );
    }
}

#[test]
fn explore_edi_custom() {
    let s = cycle(64, 1.0).unwrap();
    let sd = spectral_decompose(&s).unwrap();
    for amplitude in [0.5, 0.8, 0.9] {
        let rho0 = cos_density(&s, amplitude);
        for (label, times) in [
            ("pad3", vec![0.02, 0.05, 0.275, 0.5, 0.98]),
            ("pad4", vec![0.02, 0.05, 0.2, 0.35, 0.5, 0.98]),
            ("pad5", vec![0.01, 0.05, 0.1625, 0.275, 0.3875, 0.5, 1.0]),
            ("wide3", vec![0.01, 0.05, 0.275, 0.5, 1.2]),
        ] {
            let measures: Vec<ProbMeasure> = times
                .iter()
                .map(|&t| heat_measure(&s, &sd, t, &rho0).unwrap())
                .collect();
            let traj = heatlab::wasserstein::FlowTrajectory::new(&s, times.clone(), measures).unwrap();
            let r = edi_check(&s, &traj).unwrap();
            println!(
                "ediX a={amplitude} {label}: rel={:.4} max_abs={:.5} one_sided={:.2e} drop={:.4}",
                r.relative_defect, r.max_abs_defect, r.max_one_sided_violation, r.total_entropy_drop
            );
        }
    }
}
