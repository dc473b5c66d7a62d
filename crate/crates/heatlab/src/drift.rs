//! Weighted-space (Fokker-Planck) extension.
//!
//! A Lipschitz potential `V` turns `(X, d, m)` into `(X, d, e^{-V} m)`.
//! Vertex measures pick up `e^{-V(x)}`; conductances are weighted by the
//! geometric mean `e^{-(V(x)+V(y))/2}`, which keeps the weighted Laplacian
//! exactly self-adjoint in the weighted inner product (detailed balance).
//! Distances never change. The weighted heat semigroup then discretizes the
//! drift equation `du/dt = Lap u - Gamma(V, u)`.

use crate::dirichlet::{gamma, laplacian, spectral_decompose, Field};
use crate::entropy::ent_v;
use crate::error::{Error, Result};
use crate::jko::{jko_flow, JkoConfig};
use crate::measure::ProbMeasure;
use crate::space::DiscreteMMSpace;
use crate::verify::CheckReport;
use crate::wasserstein::wp_value;
use nalgebra::DVector;
use serde_json::json;

/// A potential with its edge Lipschitz estimate.
#[derive(Debug, Clone)]
pub struct Potential {
    pub values: Field,
    pub lipschitz_estimate: f64,
}

impl Potential {
    pub fn new(space: &DiscreteMMSpace, values: Field) -> Result<Self> {
        if values.len() != space.n() {
            return Err(Error::SpaceMismatch(values.len(), space.n()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadParams("potential has non-finite entries".into()));
        }
        let mut lip = 0.0f64;
        for e in space.edges() {
            lip = lip.max((values[e.i] - values[e.j]).abs() / e.length);
        }
        Ok(Potential {
            values,
            lipschitz_estimate: lip,
        })
    }
}

/// Build `(X, d, e^{-V} m)` with geometric-mean conductance weighting.
pub fn weighted_space(space: &DiscreteMMSpace, v: &Field) -> Result<DiscreteMMSpace> {
    if v.len() != space.n() {
        return Err(Error::SpaceMismatch(v.len(), space.n()));
    }
    let measure = DVector::from_fn(space.n(), |x, _| space.measure()[x] * (-v[x]).exp());
    let vv = v.clone();
    Ok(space.reweighted(
        format!("{}+potential", space.name()),
        measure,
        move |e| e.conductance * (-(vv[e.i] + vv[e.j]) / 2.0).exp(),
    ))
}

/// The Gibbs measure `density proportional to e^{-V}` against the original
/// reference measure; stationary for the weighted heat flow.
pub fn gibbs_measure(space: &DiscreteMMSpace, v: &Field) -> Result<ProbMeasure> {
    let density: Vec<f64> = v.iter().map(|&x| (-x).exp()).collect();
    ProbMeasure::from_density(space, &density)
}

/// Defect of the drift identity `Lap^V f = Lap f - Gamma(V, f)` measured
/// across a refinement family; the defect must decay at order >= 1.
pub fn fp_consistency_check(
    family: &[&DiscreteMMSpace],
    potential_of: impl Fn(&DiscreteMMSpace) -> Field,
    fields_of: impl Fn(&DiscreteMMSpace) -> Vec<Field>,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    if family.len() < 2 {
        return Err(Error::FamilyMismatch("need at least two refinement levels".into()));
    }
    let mut meshes = Vec::new();
    let mut defects = Vec::new();
    for space in family {
        let v = potential_of(space);
        let weighted = weighted_space(space, &v)?;
        let mut worst = 0.0f64;
        for f in fields_of(space) {
            let lhs = laplacian(&weighted, &f)?;
            let lap = laplacian(space, &f)?;
            let cross = gamma(space, &v, &f)?;
            for x in 0..space.n() {
                worst = worst.max((lhs[x] - (lap[x] - cross[x])).abs());
            }
        }
        meshes.push(space.mesh_size());
        defects.push(worst);
    }
    for w in meshes.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::FamilyMismatch(
                "family must be ordered from coarse to fine".into(),
            ));
        }
    }
    // empirical order from consecutive levels
    let mut orders = Vec::new();
    for i in 1..family.len() {
        let rate = (defects[i - 1] / defects[i]).ln() / (meshes[i - 1] / meshes[i]).ln();
        orders.push(rate);
    }
    let min_order = orders.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let pass = min_order >= 1.0;
    Ok(finish_fp(
        family[0],
        json!({"meshes": meshes}),
        json!({"defects": defects, "orders": orders}),
        json!({"order_at_least": 1.0}),
        pass,
        started,
    ))
}

fn finish_fp(
    space: &DiscreteMMSpace,
    params: serde_json::Value,
    observed: serde_json::Value,
    expected: serde_json::Value,
    pass: bool,
    started: std::time::Instant,
) -> CheckReport {
    CheckReport {
        name: "fp_consistency".into(),
        space: space.name().into(),
        params,
        observed,
        expected,
        pass,
        tolerance: 1.0,
        runtime_ms: started.elapsed().as_millis(),
        seed: 0,
    }
}

/// Drift identification: the weighted heat flow against the JKO scheme for
/// `Ent^V` (original metric, original reference measure). Reports per-tau
/// discrepancies and the stationary gaps of both flows against the Gibbs
/// measure in the sup norm of masses.
pub fn drift_identify(
    space: &DiscreteMMSpace,
    v: &Field,
    rho0: &ProbMeasure,
    tau_list: &[f64],
    t_max: f64,
    config: &JkoConfig,
    stationary_tol: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    if tau_list.is_empty() {
        return Err(Error::BadParams("empty tau list".into()));
    }
    let weighted = weighted_space(space, v)?;
    let spectral_v = spectral_decompose(&weighted)?;
    let gibbs = gibbs_measure(space, v)?;

    // heat^V flow of the same initial measure: density against m^V evolves
    // spectrally on the weighted space
    let heat_at = |t: f64| -> Result<ProbMeasure> {
        let masses: Vec<f64> = rho0.masses().iter().copied().collect();
        let mu_v = ProbMeasure::from_masses(&weighted, &masses)?;
        let out = crate::dirichlet::heat_measure(&weighted, &spectral_v, t, &mu_v)?;
        ProbMeasure::from_masses(space, out.masses().as_slice())
    };

    let mut discrepancies = Vec::new();
    let mut jko_station = f64::INFINITY;
    for &tau in tau_list {
        let mut cfg = *config;
        cfg.tau = tau;
        let traj = jko_flow(space, rho0, tau, t_max, &cfg, Some(v))?;
        let mut worst = 0.0f64;
        for (k, t) in traj.times.iter().enumerate().skip(1) {
            let heat = heat_at(*t)?;
            worst = worst.max(wp_value(space, &heat, &traj.measures[k], 2.0)?);
        }
        discrepancies.push(worst);
        let last = traj.measures.last().unwrap();
        jko_station = jko_station.min((last.masses() - gibbs.masses()).amax());
    }
    let heat_station = (heat_at(t_max)?.masses() - gibbs.masses()).amax();
    let pass = jko_station <= stationary_tol;
    Ok(CheckReport {
        name: "drift_identify".into(),
        space: space.name().into(),
        params: json!({"tau_list": tau_list, "t_max": t_max}),
        observed: json!({
            "discrepancies": discrepancies,
            "jko_stationary_gap": jko_station,
            "heat_stationary_gap": heat_station,
        }),
        expected: json!({"jko_stationary_gap_at_most": stationary_tol}),
        pass,
        tolerance: stationary_tol,
        runtime_ms: started.elapsed().as_millis(),
        seed: 0,
    })
}

/// Estimate the convexity shift of the potential: minimum second difference
/// of `V` along sampled discrete geodesics, then probe `Ent^V` for
/// `(K_base + K')`-convexity.
pub fn convexity_shift_probe(
    space: &DiscreteMMSpace,
    v: &Field,
    k_base: f64,
    pairs: &[(ProbMeasure, ProbMeasure)],
    t_grid: &[f64],
    tol: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    let k_prime = min_second_difference(space, v);
    // convexity deficit of Ent^V along displacement interpolation
    let mut worst = f64::NEG_INFINITY;
    let k_target = k_base + k_prime;
    let mut samples = 0usize;
    for (mu, nu) in pairs {
        let w2 = wp_value(space, mu, nu, 2.0)?;
        let (e0, e1) = (ent_v(space, mu, v)?, ent_v(space, nu, v)?);
        for &t in t_grid {
            if !(0.0 < t && t < 1.0) {
                continue;
            }
            let mid = crate::wasserstein::displacement_interpolate(space, mu, nu, t)?;
            let em = ent_v(space, &mid, v)?;
            let deficit =
                em - (1.0 - t) * e0 - t * e1 + 0.5 * k_target * (1.0 - t) * t * w2 * w2;
            worst = worst.max(deficit);
            samples += 1;
        }
    }
    let pass = worst <= tol;
    Ok(CheckReport {
        name: "convexity_shift".into(),
        space: space.name().into(),
        params: json!({"k_base": k_base, "k_prime": k_prime, "samples": samples}),
        observed: json!({"worst_deficit": worst}),
        expected: json!({"worst_deficit_at_most": tol}),
        pass,
        tolerance: tol,
        runtime_ms: started.elapsed().as_millis(),
        seed: 0,
    })
}

/// Minimum second difference of `V` along discrete geodesics between all
/// vertex pairs at graph distance two or more.
pub fn min_second_difference(space: &DiscreteMMSpace, v: &Field) -> f64 {
    let n = space.n();
    let mut k_prime = f64::INFINITY;
    for src in 0..n {
        for dst in 0..n {
            if space.dist(src, dst) <= 0.0 {
                continue;
            }
            let path = space.shortest_path(src, dst);
            if path.len() < 3 {
                continue;
            }
            for w in path.windows(3) {
                let (a, b, c) = (w[0], w[1], w[2]);
                let h1 = space.dist(a, b);
                let h2 = space.dist(b, c);
                let second =
                    2.0 * (h1 * v[c] + h2 * v[a] - (h1 + h2) * v[b]) / (h1 * h2 * (h1 + h2));
                k_prime = k_prime.min(second);
            }
        }
    }
    if k_prime.is_finite() {
        k_prime
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::{energy, heat_measure};
    use crate::generate::cycle;
    use crate::space::two_point;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_potential_is_identity() {
        let s = cycle(12, 1.0).unwrap();
        let v = DVector::zeros(12);
        let w = weighted_space(&s, &v).unwrap();
        assert_eq!(w.measure(), s.measure());
        for (a, b) in w.edges().iter().zip(s.edges().iter()) {
            assert_eq!(a.conductance, b.conductance);
        }
    }

    #[test]
    fn constant_potential_scales_but_laplacian_unchanged() {
        let s = cycle(12, 1.0).unwrap();
        let c = 0.8;
        let v = DVector::from_element(12, c);
        let w = weighted_space(&s, &v).unwrap();
        for x in 0..12 {
            assert_relative_eq!(w.measure()[x], s.measure()[x] * (-c).exp(), epsilon = 1e-15);
        }
        let f = DVector::from_fn(12, |i, _| (i as f64 * 0.4).sin());
        let l1 = laplacian(&s, &f).unwrap();
        let l2 = laplacian(&w, &f).unwrap();
        assert!((l1 - l2).amax() < 1e-12);
    }

    #[test]
    fn two_point_weighting_hand_values() {
        let s = two_point();
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let w = weighted_space(&s, &v).unwrap();
        assert_relative_eq!(w.measure()[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(w.measure()[1], (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(w.edges()[0].conductance, (-0.5f64).exp(), epsilon = 1e-15);
        // distances unchanged
        assert_eq!(w.dist(0, 1), 1.0);
    }

    #[test]
    fn weighted_laplacian_self_adjoint() {
        let s = cycle(16, 1.0).unwrap();
        let v = DVector::from_fn(16, |i, _| 0.6 * (2.0 * PI * i as f64 / 16.0).sin());
        let w = weighted_space(&s, &v).unwrap();
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let f = DVector::from_fn(16, |_, _| rng.gen_range(-1.0f64..1.0));
            let g = DVector::from_fn(16, |_, _| rng.gen_range(-1.0f64..1.0));
            let lf = laplacian(&w, &f).unwrap();
            let pairing: f64 = (0..16).map(|x| w.measure()[x] * g[x] * lf[x]).sum();
            assert!((energy(&w, &g, &f).unwrap() + pairing).abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_measure_is_stationary_for_weighted_flow() {
        let s = cycle(12, 1.0).unwrap();
        let v = DVector::from_fn(12, |i, _| 0.5 * (2.0 * PI * i as f64 / 12.0).cos());
        let w = weighted_space(&s, &v).unwrap();
        let sd = spectral_decompose(&w).unwrap();
        let gibbs = gibbs_measure(&s, &v).unwrap();
        // push through the weighted flow; masses must not move
        let mu_v = ProbMeasure::from_masses(&w, gibbs.masses().as_slice()).unwrap();
        for &t in &[0.1, 1.0, 10.0] {
            let out = heat_measure(&w, &sd, t, &mu_v).unwrap();
            assert!(
                (out.masses() - mu_v.masses()).amax() < 1e-10,
                "t={t}: {}",
                (out.masses() - mu_v.masses()).amax()
            );
        }
    }

    #[test]
    fn weighted_kernel_identities() {
        let s = cycle(10, 1.0).unwrap();
        let v = DVector::from_fn(10, |i, _| 0.4 * (i as f64 * 0.9).sin());
        let w = weighted_space(&s, &v).unwrap();
        let sd = spectral_decompose(&w).unwrap();
        let (t1, t2) = (0.17, 0.29);
        let k1 = crate::dirichlet::heat_kernel(&w, &sd, t1).unwrap();
        let k2 = crate::dirichlet::heat_kernel(&w, &sd, t2).unwrap();
        let k12 = crate::dirichlet::heat_kernel(&w, &sd, t1 + t2).unwrap();
        let n = 10;
        for x in 0..n {
            for y in 0..n {
                // symmetry
                assert!((k1.values[(x, y)] - k1.values[(y, x)]).abs() < 1e-10);
                // Chapman-Kolmogorov
                let conv: f64 = (0..n)
                    .map(|z| k1.values[(x, z)] * k2.values[(z, y)] * w.measure()[z])
                    .sum();
                assert!((conv - k12.values[(x, y)]).abs() < 1e-8);
                assert!(k1.values[(x, y)] > 0.0);
            }
            let mass: f64 = (0..n).map(|z| k1.values[(x, z)] * w.measure()[z]).sum();
            assert!((mass - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fp_defect_decays_on_cycle_family() {
        let family: Vec<_> = [16usize, 32, 64]
            .iter()
            .map(|&n| cycle(n, 1.0).unwrap())
            .collect();
        let refs: Vec<&DiscreteMMSpace> = family.iter().collect();
        let angle = |s: &DiscreteMMSpace, i: usize| {
            let c = s.coords().unwrap()[i];
            c[1].atan2(c[0])
        };
        let report = fp_consistency_check(
            &refs,
            |s| DVector::from_fn(s.n(), |i, _| angle(s, i).sin()),
            |s| vec![DVector::from_fn(s.n(), |i, _| angle(s, i).cos())],
        )
        .unwrap();
        assert!(report.pass, "{:?}", report.observed);
    }

    #[test]
    fn fp_defect_zero_for_constant_potential() {
        let s = cycle(16, 1.0).unwrap();
        let v = DVector::from_element(16, 1.3);
        let w = weighted_space(&s, &v).unwrap();
        let f = DVector::from_fn(16, |i, _| (i as f64 * 0.5).cos());
        let lhs = laplacian(&w, &f).unwrap();
        let lap = laplacian(&s, &f).unwrap();
        let cross = gamma(&s, &v, &f).unwrap();
        let defect = (0..16)
            .map(|x| (lhs[x] - (lap[x] - cross[x])).abs())
            .fold(0.0f64, f64::max);
        assert!(defect < 1e-12);
    }

    #[test]
    fn two_point_fp_defect_closed_form() {
        // edge defect: (1/m) w (f_y - f_x) (e^{(V_x - V_y)/2} - 1 + (V_y - V_x)/2)
        let s = two_point();
        let v = DVector::from_vec(vec![0.0, 1.0]);
        let f = DVector::from_vec(vec![0.0, 1.0]);
        let w = weighted_space(&s, &v).unwrap();
        let lhs = laplacian(&w, &f).unwrap();
        let lap = laplacian(&s, &f).unwrap();
        let cross = gamma(&s, &v, &f).unwrap();
        let expected_at_0 = (0.5f64).exp().recip(); // e^{-1/2} * (f1 - f0) / m
        assert_relative_eq!(lhs[0], expected_at_0, epsilon = 1e-14);
        let defect0 = lhs[0] - (lap[0] - cross[0]);
        // hand value: e^{-1/2} - 1 + 1/2
        assert_relative_eq!(defect0, (-0.5f64).exp() - 0.5, epsilon = 1e-14);
    }

    #[test]
    fn min_second_difference_linear_and_quadratic() {
        // a path graph: V linear has zero second difference, V quadratic
        // has second difference 2c
        let n = 9;
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 0.5, 2.0)).collect();
        let s = DiscreteMMSpace::build("path", n, edges, vec![0.5; n]).unwrap();
        let coord = |i: usize| 0.5 * i as f64;
        let lin = DVector::from_fn(n, |i, _| 3.0 * coord(i));
        assert!(min_second_difference(&s, &lin).abs() < 1e-12);
        let c = 0.7;
        let quad = DVector::from_fn(n, |i, _| c * coord(i) * coord(i));
        assert_relative_eq!(min_second_difference(&s, &quad), 2.0 * c, epsilon = 1e-10);
    }
}
