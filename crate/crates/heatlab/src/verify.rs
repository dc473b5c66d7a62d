//! Numerical verification of the heat-flow theorems: identification of the
//! two gradient flows, dissipation and speed bounds, Wasserstein
//! contraction, gradient estimates, the Gamma2 condition, heat-kernel
//! regularity, and the equivalence sweep for the three curvature constants.
//!
//! Every check returns a [`CheckReport`] that is a deterministic function
//! of its inputs and seed.

use crate::dirichlet::{
    self, gamma, gamma2, heat_kernel, heat_measure, laplacian, resolvent_power, Field,
    SpectralData,
};
use crate::entropy::{ent, fisher};
use crate::error::{Error, Result};
use crate::jko::{jko_flow, JkoConfig};
use crate::measure::ProbMeasure;
use crate::space::DiscreteMMSpace;
use crate::wasserstein::{metric_derivative, wp_value, FlowTrajectory};
use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Outcome of one verification job.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckReport {
    pub name: String,
    pub space: String,
    pub params: serde_json::Value,
    pub observed: serde_json::Value,
    pub expected: serde_json::Value,
    pub pass: bool,
    pub tolerance: f64,
    pub runtime_ms: u128,
    pub seed: u64,
}

impl CheckReport {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("serializable");
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn finish(
    name: &str,
    space: &DiscreteMMSpace,
    params: serde_json::Value,
    observed: serde_json::Value,
    expected: serde_json::Value,
    pass: bool,
    tolerance: f64,
    seed: u64,
    started: std::time::Instant,
) -> CheckReport {
    CheckReport {
        name: name.into(),
        space: space.name().into(),
        params,
        observed,
        expected,
        pass,
        tolerance,
        runtime_ms: started.elapsed().as_millis(),
        seed,
    }
}

// ---------------------------------------------------------------------------
// identification of the two gradient flows
// ---------------------------------------------------------------------------

/// Run the heat flow and the JKO scheme from the same positive density and
/// report `max_t W_2(heat(t), jko_tau(t))` for each step size. Passes when
/// the discrepancies are nonincreasing in `tau` and the finest stays below
/// `tol`.
pub fn identify(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    rho0: &ProbMeasure,
    tau_list: &[f64],
    t_max: f64,
    config: &JkoConfig,
    tol: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    if tau_list.is_empty() {
        return Err(Error::BadParams("empty tau list".into()));
    }
    let mut discrepancies = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let mut cfg = *config;
        cfg.tau = tau;
        let traj = jko_flow(space, rho0, tau, t_max, &cfg, None)?;
        let mut worst = 0.0f64;
        for (k, t) in traj.times.iter().enumerate().skip(1) {
            let heat = heat_measure(space, spectral, *t, rho0)?;
            let w = wp_value(space, &heat, &traj.measures[k], 2.0)?;
            worst = worst.max(w);
        }
        discrepancies.push(worst);
    }
    let monotone = discrepancies
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12);
    let finest = *discrepancies.last().unwrap();
    let pass = monotone && finest <= tol;
    Ok(finish(
        "identify",
        space,
        json!({"tau_list": tau_list, "t_max": t_max}),
        json!({"discrepancies": discrepancies, "finest": finest, "monotone": monotone}),
        json!({"finest_at_most": tol, "monotone": true}),
        pass,
        tol,
        0,
        started,
    ))
}

// ---------------------------------------------------------------------------
// entropy dissipation and speed bound
// ---------------------------------------------------------------------------

/// Exact discrete entropy derivative along the heat flow:
/// `sum_x m_x (log rho_x + 1) (Lap rho)_x`. This is `d/dt Ent` without any
/// chain rule, so it matches the central difference to quadrature accuracy.
pub fn discrete_entropy_derivative(space: &DiscreteMMSpace, rho: &Field) -> Result<f64> {
    let lap = laplacian(space, rho)?;
    let mut acc = 0.0;
    for x in 0..space.n() {
        if rho[x] <= 0.0 {
            return Err(Error::ZeroDensity(x));
        }
        acc += space.measure()[x] * (rho[x].ln() + 1.0) * lap[x];
    }
    Ok(acc)
}

/// Compare the central-difference entropy derivative with the exact
/// discrete derivative along the heat flow; also reports the chain-rule
/// defect against `-fisher`.
pub fn dissipation_check(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    rho0: &ProbMeasure,
    t_grid: &[f64],
    tol_rel: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    if t_grid.len() < 3 {
        return Err(Error::GridTooCoarse(3, t_grid.len()));
    }
    let states: Vec<ProbMeasure> = t_grid
        .iter()
        .map(|&t| heat_measure(space, spectral, t, rho0))
        .collect::<Result<_>>()?;
    let entropies: Vec<f64> = states.iter().map(|m| ent(space, m)).collect();
    let mut max_rel = 0.0f64;
    let mut max_chain_defect = 0.0f64;
    for i in 1..t_grid.len() - 1 {
        let dt = t_grid[i + 1] - t_grid[i - 1];
        let fd = (entropies[i + 1] - entropies[i - 1]) / dt;
        let exact = discrete_entropy_derivative(space, states[i].density())?;
        let rel = (fd - exact).abs() / exact.abs().max(1e-300);
        max_rel = max_rel.max(rel);
        let fi = fisher(space, states[i].density());
        max_chain_defect = max_chain_defect.max((exact + fi).abs());
    }
    let pass = max_rel <= tol_rel;
    Ok(finish(
        "dissipation",
        space,
        json!({"t_grid": t_grid}),
        json!({"max_relative_error": max_rel, "max_chain_rule_defect": max_chain_defect}),
        json!({"max_relative_error_at_most": tol_rel}),
        pass,
        tol_rel,
        0,
        started,
    ))
}

/// Check `|mu'|^2 <= fisher + tol` at the interior times of the grid,
/// with the central-difference metric derivative.
pub fn speed_bound_check(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    rho0: &ProbMeasure,
    t_grid: &[f64],
    tol: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    if t_grid.len() < 3 {
        return Err(Error::GridTooCoarse(3, t_grid.len()));
    }
    let measures: Vec<ProbMeasure> = t_grid
        .iter()
        .map(|&t| heat_measure(space, spectral, t, rho0))
        .collect::<Result<_>>()?;
    let traj = FlowTrajectory::new(space, t_grid.to_vec(), measures)?;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for i in 1..t_grid.len() - 1 {
        let speed = metric_derivative(space, &traj, i)?;
        let fi = traj.fisher[i];
        let margin = speed * speed - fi;
        worst_margin = worst_margin.max(margin);
        rows.push(json!({"t": t_grid[i], "speed_sq": speed * speed, "fisher": fi}));
    }
    let pass = worst_margin <= tol;
    Ok(finish(
        "speed_bound",
        space,
        json!({"t_grid": t_grid}),
        json!({"worst_margin": worst_margin, "samples": rows}),
        json!({"speed_sq_at_most_fisher_plus": tol}),
        pass,
        tol,
        0,
        started,
    ))
}

// ---------------------------------------------------------------------------
// contraction
// ---------------------------------------------------------------------------

/// Check `W_p(T_t mu, T_t nu) <= e^{-K t} W_p(mu, nu) + tol` on a time grid
/// and fit the contraction rate `inf_t -log(ratio) / t`.
pub fn contraction_check(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    mu: &ProbMeasure,
    nu: &ProbMeasure,
    p: f64,
    k: f64,
    t_grid: &[f64],
    tol: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    let w0 = wp_value(space, mu, nu, p)?;
    let mut violations = 0usize;
    let mut worst_excess = 0.0f64;
    let mut fitted = f64::INFINITY;
    let mut ratios = Vec::new();
    for &t in t_grid {
        if !(t > 0.0) {
            return Err(Error::BadParams("t grid must be positive".into()));
        }
        let mt = heat_measure(space, spectral, t, mu)?;
        let nt = heat_measure(space, spectral, t, nu)?;
        let wt = wp_value(space, &mt, &nt, p)?;
        let bound = (-k * t).exp() * w0;
        if wt > bound + tol {
            violations += 1;
            worst_excess = worst_excess.max(wt - bound);
        }
        if w0 > 1e-14 && wt > 1e-300 {
            fitted = fitted.min(-(wt / w0).ln() / t);
        }
        ratios.push(json!({"t": t, "w": wt, "bound": bound}));
    }
    let pass = violations == 0;
    Ok(finish(
        "contraction",
        space,
        json!({"p": p, "k": k, "t_grid": t_grid}),
        json!({"w0": w0, "violations": violations, "worst_excess": worst_excess,
               "fitted_rate": if fitted.is_finite() { fitted } else { f64::NAN },
               "per_time": ratios}),
        json!({"no_violation_beyond": tol}),
        pass,
        tol,
        0,
        started,
    ))
}

// ---------------------------------------------------------------------------
// Bakry-Emery gradient estimate and Gamma2
// ---------------------------------------------------------------------------

/// Pointwise gradient estimate
/// `Gamma(T_t f) <= e^{-2 K t} T_t Gamma(f, f) + tol`.
pub fn be_check(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    f: &Field,
    t: f64,
    k: f64,
    tol: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    if !(t > 0.0) {
        return Err(Error::BadParams(format!("t = {t} must be positive")));
    }
    let tf = dirichlet::heat_apply(space, spectral, t, f)?;
    let lhs = gamma(space, &tf, &tf)?;
    let gf = gamma(space, f, f)?;
    let rhs = dirichlet::heat_apply(space, spectral, t, &gf)?;
    let factor = (-2.0 * k * t).exp();
    let mut worst = f64::NEG_INFINITY;
    for x in 0..space.n() {
        worst = worst.max(lhs[x] - factor * rhs[x]);
    }
    let pass = worst <= tol;
    Ok(finish(
        "bakry_emery",
        space,
        json!({"t": t, "k": k}),
        json!({"worst_excess": worst}),
        json!({"pointwise_excess_at_most": tol}),
        pass,
        tol,
        0,
        started,
    ))
}

/// Largest rate certified by the gradient estimate over a sweep set:
/// `K_BE = inf (1 / 2t) log( T_t Gamma(f)(x) / Gamma(T_t f)(x) )`.
pub fn be_sweep(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    f_set: &[Field],
    t_set: &[f64],
    threshold: f64,
) -> Result<f64> {
    let mut inf = f64::INFINITY;
    let mut any = false;
    for f in f_set {
        let gf = gamma(space, f, f)?;
        for &t in t_set {
            let tf = dirichlet::heat_apply(space, spectral, t, f)?;
            let gtf = gamma(space, &tf, &tf)?;
            let tgf = dirichlet::heat_apply(space, spectral, t, &gf)?;
            for x in 0..space.n() {
                if gtf[x] > threshold && tgf[x] > 0.0 {
                    any = true;
                    inf = inf.min((tgf[x] / gtf[x]).ln() / (2.0 * t));
                }
            }
        }
    }
    if !any {
        return Err(Error::DegenerateGamma(threshold));
    }
    Ok(inf)
}

/// Weak-form Gamma2 inequality against a nonnegative test function:
/// `1/2 int Lap g Gamma(f,f) - int g Gamma(Lap f, f) >= K int g Gamma(f,f) - tol`.
pub fn gamma2_check(
    space: &DiscreteMMSpace,
    f: &Field,
    g: &Field,
    k: f64,
    tol: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    for (i, &v) in g.iter().enumerate() {
        if v < 0.0 {
            return Err(Error::NegativeTestFunction(i, v));
        }
    }
    let gf = gamma(space, f, f)?;
    let lap_g = laplacian(space, g)?;
    let lap_f = laplacian(space, f)?;
    let cross = gamma(space, &lap_f, f)?;
    let m = space.measure();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for x in 0..space.n() {
        lhs += m[x] * (0.5 * lap_g[x] * gf[x] - g[x] * cross[x]);
        rhs += m[x] * g[x] * gf[x];
    }
    let residual = lhs - k * rhs;
    let pass = residual >= -tol;
    Ok(finish(
        "gamma2_weak",
        space,
        json!({"k": k}),
        json!({"residual": residual}),
        json!({"residual_at_least": -tol}),
        pass,
        tol,
        0,
        started,
    ))
}

/// Pointwise Gamma2 sweep:
/// `K_G2 = min over f and x with Gamma(f,f)(x) > threshold of Gamma2 / Gamma`.
pub fn gamma2_sweep(space: &DiscreteMMSpace, f_set: &[Field], threshold: f64) -> Result<f64> {
    let mut inf = f64::INFINITY;
    let mut any = false;
    for f in f_set {
        let g = gamma(space, f, f)?;
        let g2 = gamma2(space, f)?;
        for x in 0..space.n() {
            if g[x] > threshold {
                any = true;
                inf = inf.min(g2[x] / g[x]);
            }
        }
    }
    if !any {
        return Err(Error::DegenerateGamma(threshold));
    }
    Ok(inf)
}

/// Weak-form Gamma2 sweep with localized nonnegative test functions: the
/// test set is the family of heat-kernel bumps `g_x = p_s(x, .)`, so the
/// ratio at `x` reads
/// `[1/2 <Lap g_x, Gamma(f,f)>_m - <g_x, Gamma(Lap f, f)>_m] / <g_x, Gamma(f,f)>_m`.
/// On structured meshes with `s -> 0` this recovers the pointwise sweep;
/// on irregular meshes the bump averages out the mesh-frequency noise that
/// makes the raw pointwise quotient meaningless.
pub fn gamma2_weak_sweep(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    f_set: &[Field],
    smoothing: f64,
    threshold: f64,
) -> Result<f64> {
    let kernel = heat_kernel(space, spectral, smoothing)?;
    let n = space.n();
    let m = space.measure();
    let mut inf = f64::INFINITY;
    let mut any = false;
    for f in f_set {
        let gf = gamma(space, f, f)?;
        let lap_f = laplacian(space, f)?;
        let cross = gamma(space, &lap_f, f)?;
        // <g_x, w>_m for all x at once
        let weighted = |w: &Field| -> Field {
            let wm = DVector::from_fn(n, |y, _| w[y] * m[y]);
            &kernel.values * wm
        };
        // <Lap g_x, Gamma>_m = <g_x, Lap Gamma>_m by self-adjointness
        let half_lap_pair = weighted(&(laplacian(space, &gf)? * 0.5));
        let cross_pair = weighted(&cross);
        let denom = weighted(&gf);
        for x in 0..n {
            if denom[x] > threshold {
                any = true;
                inf = inf.min((half_lap_pair[x] - cross_pair[x]) / denom[x]);
            }
        }
    }
    if !any {
        return Err(Error::DegenerateGamma(threshold));
    }
    Ok(inf)
}

// ---------------------------------------------------------------------------
// curvature triple
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct RicciTriple {
    pub k_contraction: f64,
    pub k_bakry_emery: f64,
    pub k_gamma2: f64,
}

impl RicciTriple {
    pub fn max_pairwise_gap(&self) -> f64 {
        let ks = [self.k_contraction, self.k_bakry_emery, self.k_gamma2];
        let mut gap = 0.0f64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                gap = gap.max((ks[i] - ks[j]).abs());
            }
        }
        gap
    }
}

/// Sweep sets for the triple: the leading nonconstant eigenvectors plus a
/// few seeded random fields, Dirac pairs at several separations plus
/// heat-regularized pairs, and a time grid scaled by the spectral gap.
pub fn ricci_equivalence(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    budget: usize,
    seed: u64,
    gap_tol: f64,
) -> Result<(CheckReport, RicciTriple)> {
    let started = std::time::Instant::now();
    let n = space.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // field set
    let n_eig = (budget.max(2)).min(8).min(n - 1);
    let mut f_set: Vec<Field> = (1..=n_eig).map(|k| spectral.eigenvector(k)).collect();
    for _ in 0..3 {
        let f = DVector::from_fn(n, |_, _| rng.gen_range(-1.0f64..1.0));
        f_set.push(f);
    }

    // Time grids scaled by the spectral gap, floored at the mesh
    // resolution time 2 h^2 (kernel width about two cells): below that
    // floor pointwise quantities see mesh-frequency noise instead of
    // curvature, and transport rates between nearby kernels drown in
    // mesh irregularity.
    let gap = spectral.gap().max(1e-8);
    let h = space.mesh_size();
    let t_floor_pointwise = (4.0 * h * h).min(0.25 / gap);
    let t_floor_transport = (2.0 * h * h).min(0.25 / gap);
    let t_set_be: Vec<f64> = [0.01, 0.05, 0.125, 0.5]
        .iter()
        .map(|s| (s / gap).max(t_floor_pointwise))
        .collect();
    let t_set: Vec<f64> = [0.02, 0.125, 0.25, 0.5]
        .iter()
        .map(|s| (s / gap).max(t_floor_transport))
        .collect();

    let threshold = {
        let scales: Vec<f64> = f_set
            .iter()
            .map(|f| gamma(space, f, f).map(|g| g.amax()).unwrap_or(0.0))
            .collect();
        1e-10 * scales.iter().fold(0.0f64, |a, &b| a.max(b))
    };

    let k_gamma2 = gamma2_weak_sweep(space, spectral, &f_set, t_floor_pointwise, threshold)?;
    let k_be = be_sweep(space, spectral, &f_set, &t_set_be, threshold)?;

    // contraction rate from W_1 flows: Dirac pairs separated by at least
    // three mesh cells (below that, kernel-shape noise dominates the
    // rate), plus one heat-regularized pair
    let min_sep = (3.0 * h).min(space.diam());
    let mut pairs: Vec<(ProbMeasure, ProbMeasure)> = Vec::new();
    let anchor = 0usize;
    let mut far = 0usize;
    for x in 0..n {
        if space.dist(anchor, x) > space.dist(anchor, far) {
            far = x;
        }
    }
    pairs.push((ProbMeasure::dirac(space, anchor), ProbMeasure::dirac(space, far)));
    let mut found = 0usize;
    for _ in 0..20 * budget.max(1) {
        if found >= budget.min(4) {
            break;
        }
        let x = rng.gen_range(0..n);
        let y = rng.gen_range(0..n);
        if space.dist(x, y) >= min_sep {
            pairs.push((ProbMeasure::dirac(space, x), ProbMeasure::dirac(space, y)));
            found += 1;
        }
    }
    let t_warm = (0.125 / gap).max(t_floor_transport);
    let warm_a = heat_measure(space, spectral, t_warm, &ProbMeasure::dirac(space, anchor))?;
    let warm_b = heat_measure(space, spectral, t_warm, &ProbMeasure::dirac(space, far))?;
    pairs.push((warm_a, warm_b));

    let mut k_contr = f64::INFINITY;
    for (mu, nu) in &pairs {
        let w0 = wp_value(space, mu, nu, 1.0)?;
        if w0 < 1e-12 {
            continue;
        }
        for &t in &t_set {
            let mt = heat_measure(space, spectral, t, mu)?;
            let nt = heat_measure(space, spectral, t, nu)?;
            let wt = wp_value(space, &mt, &nt, 1.0)?;
            if wt > 1e-300 {
                k_contr = k_contr.min(-(wt / w0).ln() / t);
            }
        }
    }

    let triple = RicciTriple {
        k_contraction: k_contr,
        k_bakry_emery: k_be,
        k_gamma2: k_gamma2,
    };
    let mean = (k_contr + k_be + k_gamma2) / 3.0;
    let allowed = gap_tol * (1.0 + mean.abs());
    let pass = triple.max_pairwise_gap() <= allowed;
    let report = finish(
        "ricci_equivalence",
        space,
        json!({"budget": budget, "gap_tol": gap_tol, "t_set": t_set, "t_set_be": t_set_be}),
        json!({"k_contraction": k_contr, "k_bakry_emery": k_be, "k_gamma2": k_gamma2,
               "max_pairwise_gap": triple.max_pairwise_gap()}),
        json!({"max_pairwise_gap_at_most": allowed}),
        pass,
        gap_tol,
        seed,
        started,
    );
    Ok((report, triple))
}

// ---------------------------------------------------------------------------
// heat-kernel regularity
// ---------------------------------------------------------------------------

/// Edge-restricted Lipschitz quotient of the heat kernel:
/// `max over x and edges (y, y') of |p_t(x, y) - p_t(x, y')| / d(y, y')`.
pub fn kernel_lipschitz(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::BadParams(format!("t = {t} must be positive")));
    }
    let kernel = heat_kernel(space, spectral, t)?;
    let mut worst = 0.0f64;
    for x in 0..space.n() {
        for e in space.edges() {
            let q = (kernel.values[(x, e.i)] - kernel.values[(x, e.j)]).abs() / e.length;
            worst = worst.max(q);
        }
    }
    Ok(worst)
}

/// Edge-restricted Lipschitz quotient of a field.
pub fn lipschitz_quotient(space: &DiscreteMMSpace, f: &Field) -> f64 {
    let mut worst = 0.0f64;
    for e in space.edges() {
        worst = worst.max((f[e.i] - f[e.j]).abs() / e.length);
    }
    worst
}

/// Eigenfunction Lipschitz bound: the quotient of the k-th eigenfunction
/// must stay below `e^{(lambda - K) t} sqrt(lambda * max p_t)` for each
/// supplied `t` (the L2 norm of the eigenfunction is one by construction).
pub fn eigen_lipschitz_check(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    k_index: usize,
    t_set: &[f64],
    k_curv: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    let lambda = spectral.eigenvalues()[k_index];
    if lambda < 1e-12 {
        return Err(Error::ConstantEigenfunction(k_index));
    }
    let phi = spectral.eigenvector(k_index);
    let quotient = lipschitz_quotient(space, &phi);
    let mut min_margin = f64::INFINITY;
    let mut bounds = Vec::new();
    for &t in t_set {
        let kernel = heat_kernel(space, spectral, t)?;
        let sup_p = kernel.values.amax();
        let bound = ((lambda - k_curv) * t).exp() * (lambda * sup_p).sqrt();
        bounds.push(json!({"t": t, "bound": bound}));
        min_margin = min_margin.min(bound - quotient);
    }
    let pass = min_margin >= 0.0;
    Ok(finish(
        "eigen_lipschitz",
        space,
        json!({"k_index": k_index, "lambda": lambda, "k_curv": k_curv, "t_set": t_set}),
        json!({"quotient": quotient, "min_margin": min_margin, "bounds": bounds}),
        json!({"min_margin_at_least": 0.0}),
        pass,
        0.0,
        0,
        started,
    ))
}

/// Measured constant of the kernel upper bound
/// `p_t(x, y) <= C / m(B_sqrt(t)(x))`, maximized over a time set.
pub fn kernel_upper_constant(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    t_set: &[f64],
) -> Result<f64> {
    let mut c_meas = 0.0f64;
    for &t in t_set {
        let kernel = heat_kernel(space, spectral, t)?;
        for x in 0..space.n() {
            let ball = space.ball_measure(x, t.sqrt());
            for y in 0..space.n() {
                c_meas = c_meas.max(kernel.values[(x, y)] * ball);
            }
        }
    }
    Ok(c_meas)
}

/// The measured constants must stay within a factor 2 across a refinement
/// family of the same geometry.
pub fn kernel_upper_check(
    family: &[(&DiscreteMMSpace, &SpectralData)],
    t_set: &[f64],
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    if family.is_empty() {
        return Err(Error::BadParams("empty refinement family".into()));
    }
    let constants: Vec<f64> = family
        .iter()
        .map(|(s, sd)| kernel_upper_constant(s, sd, t_set))
        .collect::<Result<_>>()?;
    let max = constants.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = constants.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let ratio = max / min;
    let pass = ratio <= 2.0;
    Ok(finish(
        "kernel_upper",
        family[0].0,
        json!({"t_set": t_set, "family": family.iter().map(|(s, _)| s.name()).collect::<Vec<_>>()}),
        json!({"constants": constants, "ratio": ratio}),
        json!({"ratio_at_most": 2.0}),
        pass,
        2.0,
        0,
        started,
    ))
}

// ---------------------------------------------------------------------------
// Riesz-type stability probe
// ---------------------------------------------------------------------------

fn lp_norm(space: &DiscreteMMSpace, f: &Field, p: f64) -> f64 {
    let mut acc = 0.0;
    for x in 0..space.n() {
        acc += space.measure()[x] * f[x].abs().powf(p);
    }
    acc.powf(1.0 / p)
}

/// `max over f of || sqrt(Gamma((alpha - Lap)^{-q/2} f)) ||_p / || f ||_p`
/// on one space.
pub fn riesz_estimate(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    p: f64,
    q: f64,
    alpha: f64,
    f_set: &[Field],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for f in f_set {
        let r = resolvent_power(space, spectral, alpha, q, f)?;
        let g = gamma(space, &r, &r)?;
        let sqrt_g = g.map(|x| x.max(0.0).sqrt());
        let denom = lp_norm(space, f, p);
        if denom > 1e-300 {
            worst = worst.max(lp_norm(space, &sqrt_g, p) / denom);
        }
    }
    Ok(worst)
}

/// Stability of the Riesz-type estimate across a refinement family.
pub fn riesz_probe(
    family: &[(&DiscreteMMSpace, &SpectralData)],
    p: f64,
    q: f64,
    alpha: f64,
    k_gamma2: f64,
    n_fields: usize,
    seed: u64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    if !(p >= 2.0) || !(q > 1.0) {
        return Err(Error::BadParams(format!("need p >= 2 and q > 1, got ({p}, {q})")));
    }
    let required = (-k_gamma2).max(0.0) + 0.1;
    if alpha <= required {
        return Err(Error::AlphaTooSmall { alpha, required });
    }
    let mut estimates = Vec::new();
    for (space, spectral) in family {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f_set: Vec<Field> = Vec::new();
        let n_eig = 4.min(space.n() - 1);
        for k in 1..=n_eig {
            f_set.push(spectral.eigenvector(k));
        }
        for _ in 0..n_fields {
            f_set.push(DVector::from_fn(space.n(), |_, _| rng.gen_range(-1.0f64..1.0)));
        }
        estimates.push(riesz_estimate(space, spectral, p, q, alpha, &f_set)?);
    }
    let max = estimates.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = estimates.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let ratio = max / min.max(1e-300);
    let pass = ratio <= 2.0;
    Ok(finish(
        "riesz_probe",
        family[0].0,
        json!({"p": p, "q": q, "alpha": alpha}),
        json!({"estimates": estimates, "ratio": ratio}),
        json!({"ratio_at_most": 2.0}),
        pass,
        2.0,
        seed,
        started,
    ))
}

// ---------------------------------------------------------------------------
// linearity and symmetry of the flow
// ---------------------------------------------------------------------------

pub fn linearity_symmetry_check(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    t: f64,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    let started = std::time::Instant::now();
    if trials == 0 {
        return Err(Error::BadParams("trials must be >= 1".into()));
    }
    let n = space.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_lin = 0.0f64;
    let mut worst_sym = 0.0f64;
    for _ in 0..trials {
        // linearity on random mixtures, Diracs included
        let mu = if rng.gen_bool(0.5) {
            ProbMeasure::dirac(space, rng.gen_range(0..n))
        } else {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            ProbMeasure::from_density(space, &d)?
        };
        let nu = ProbMeasure::dirac(space, rng.gen_range(0..n));
        let lambda: f64 = rng.gen_range(0.0..1.0);
        let mixed = heat_measure(space, spectral, t, &mu.mix(&nu, lambda))?;
        let parts = heat_measure(space, spectral, t, &mu)?
            .mix(&heat_measure(space, spectral, t, &nu)?, lambda);
        worst_lin = worst_lin.max((mixed.density() - parts.density()).amax());

        // symmetry of the pairing
        let f = DVector::from_fn(n, |_, _| rng.gen_range(0.0f64..1.0));
        let g = DVector::from_fn(n, |_, _| rng.gen_range(0.0f64..1.0));
        let tf = dirichlet::heat_apply(space, spectral, t, &f)?;
        let tg = dirichlet::heat_apply(space, spectral, t, &g)?;
        let lhs: f64 = (0..n).map(|x| space.measure()[x] * f[x] * tg[x]).sum();
        let rhs: f64 = (0..n).map(|x| space.measure()[x] * g[x] * tf[x]).sum();
        worst_sym = worst_sym.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    let pass = worst_lin <= tol && worst_sym <= tol;
    Ok(finish(
        "linearity_symmetry",
        space,
        json!({"t": t, "trials": trials}),
        json!({"worst_linearity_defect": worst_lin, "worst_symmetry_defect": worst_sym}),
        json!({"defects_at_most": tol}),
        pass,
        tol,
        seed,
        started,
    ))
}
