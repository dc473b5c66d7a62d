//! Relative entropy, Fisher information, and slope estimators.

use crate::dirichlet::{gamma, Field};
use crate::error::{Error, Result};
use crate::measure::ProbMeasure;
use crate::space::DiscreteMMSpace;
use crate::wasserstein::{self, wp_value};
use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Relative entropy `sum_x rho_x log(rho_x) m_x` with the convention
/// `0 log 0 = 0`. Bounded below by `-log m(X)`.
pub fn ent(space: &DiscreteMMSpace, mu: &ProbMeasure) -> f64 {
    let mut acc = 0.0;
    for x in 0..space.n() {
        let rho = mu.density()[x];
        if rho > 0.0 {
            acc += rho * rho.ln() * space.measure()[x];
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EntropyReport {
    pub value: f64,
    pub finite: bool,
    pub mass_defect: f64,
}

pub fn ent_report(space: &DiscreteMMSpace, mu: &ProbMeasure) -> EntropyReport {
    EntropyReport {
        value: ent(space, mu),
        finite: true, // discrete measures always have finite entropy
        mass_defect: (mu.masses().sum() - 1.0).abs(),
    }
}

/// Weighted relative entropy `Ent(mu) + integral of V d mu`.
pub fn ent_v(space: &DiscreteMMSpace, mu: &ProbMeasure, v: &Field) -> Result<f64> {
    if v.len() != space.n() {
        return Err(Error::SpaceMismatch(v.len(), space.n()));
    }
    Ok(ent(space, mu) + v.dot(mu.masses()))
}

/// Fisher information `sum_x m_x Gamma(rho, rho)(x) / rho_x`. Infinite
/// (flagged through the return value) when the density is not strictly
/// positive.
pub fn fisher(space: &DiscreteMMSpace, rho: &Field) -> f64 {
    if rho.len() != space.n() {
        return f64::NAN;
    }
    if rho.iter().any(|&r| r <= 0.0) {
        return f64::INFINITY;
    }
    let g = gamma(space, rho, rho).expect("length checked");
    (0..space.n())
        .map(|x| space.measure()[x] * g[x] / rho[x])
        .sum()
}

/// Upper proxy for the descending slope of the entropy: `sqrt(fisher)`.
pub fn slope_upper(space: &DiscreteMMSpace, rho: &Field) -> f64 {
    fisher(space, rho).sqrt()
}

/// One finite-radius slope sample.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SlopeProbe {
    pub radius: f64,
    pub value: f64,
    pub samples: usize,
}

/// Direct probe of the descending slope of the entropy:
/// `max (Ent(mu) - Ent(nu))^+ / W_2(mu, nu)` over sampled perturbations
/// `nu` within W2-radius `radius`. A one-sided, finite-radius estimate of
/// the limsup; reported together with the radius used.
pub fn slope_probe(
    space: &DiscreteMMSpace,
    mu: &ProbMeasure,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<SlopeProbe> {
    if !(radius > 0.0) {
        return Err(Error::BadParams(format!("radius {radius} <= 0")));
    }
    let n = space.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = ent(space, mu);
    let mut best = 0.0f64;
    let mut used = 0usize;
    for _ in 0..n_samples {
        // zero-sum mass perturbation direction
        let mut dir = DVector::from_fn(n, |_, _| rng.gen_range(-1.0f64..1.0));
        let mean = dir.sum() / n as f64;
        dir.add_scalar_mut(-mean);
        if dir.amax() < 1e-12 {
            continue;
        }
        // largest feasible step keeping masses nonnegative
        let mut s_max = f64::INFINITY;
        for x in 0..n {
            if dir[x] < 0.0 {
                s_max = s_max.min(-mu.masses()[x] / dir[x]);
            }
        }
        if !s_max.is_finite() || s_max <= 0.0 {
            continue;
        }
        // shrink until the perturbation fits inside the W2 ball
        let mut s = 0.9 * s_max;
        for _ in 0..40 {
            let masses: Vec<f64> = (0..n).map(|x| (mu.masses()[x] + s * dir[x]).max(0.0)).collect();
            let nu = ProbMeasure::from_masses(space, &masses)?;
            let w = wp_value(space, mu, &nu, 2.0)?;
            if w <= radius && w > 1e-12 {
                used += 1;
                let drop = (base - ent(space, &nu)).max(0.0);
                best = best.max(drop / w);
                break;
            }
            s *= 0.5;
            if s < 1e-14 * s_max {
                break;
            }
        }
    }
    Ok(SlopeProbe {
        radius,
        value: best,
        samples: used,
    })
}

/// Geodesic-convexity probe for the entropy along displacement
/// interpolation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CdReport {
    pub k_target: f64,
    /// most positive convexity deficit observed at `k_target`
    pub worst_deficit: f64,
    /// largest K for which every sampled deficit stays below `tol`
    pub largest_passing_k: f64,
    pub tol: f64,
    pub samples: usize,
}

/// Evaluate the K-convexity deficit
/// `Ent(mu_t) - (1 - t) Ent(mu) - t Ent(nu) + K/2 (1 - t) t W_2^2`
/// along path-snapped displacement interpolations.
pub fn cd_convexity_probe(
    space: &DiscreteMMSpace,
    k_target: f64,
    pairs: &[(ProbMeasure, ProbMeasure)],
    t_grid: &[f64],
    tol: f64,
) -> Result<CdReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut k_pass = f64::INFINITY;
    let mut samples = 0usize;
    for (mu, nu) in pairs {
        let w2 = wp_value(space, mu, nu, 2.0)?;
        let (e0, e1) = (ent(space, mu), ent(space, nu));
        for &t in t_grid {
            if !(0.0 < t && t < 1.0) {
                continue;
            }
            let mid = wasserstein::displacement_interpolate(space, mu, nu, t)?;
            let chord = (1.0 - t) * e0 + t * e1;
            let base = ent(space, &mid) - chord;
            let b = 0.5 * (1.0 - t) * t * w2 * w2;
            let deficit = base + k_target * b;
            worst = worst.max(deficit);
            if b > 1e-14 {
                k_pass = k_pass.min((tol - base) / b);
            }
            samples += 1;
        }
    }
    if samples == 0 {
        return Err(Error::BadParams("no interior t values".into()));
    }
    Ok(CdReport {
        k_target,
        worst_deficit: worst,
        largest_passing_k: k_pass,
        tol,
        samples,
    })
}
