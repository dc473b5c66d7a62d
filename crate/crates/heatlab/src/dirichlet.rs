//! Graph Dirichlet form, carre du champ, Laplacian, and the heat semigroup.
//!
//! The discrete objects:
//!
//! * `Gamma(f, g)(x) = (1 / 2 m_x) * sum_y w_xy (f(y) - f(x)) (g(y) - g(x))`
//! * `E(f, g) = sum_x m_x Gamma(f, g)(x) = 1/2 sum_xy w_xy (f(x) - f(y))(g(x) - g(y))`
//! * `Lap f(x) = (1 / m_x) * sum_y w_xy (f(y) - f(x))`
//!
//! Integration by parts `E(g, f) = - sum_x m_x g(x) Lap f(x)` holds exactly
//! in floating point up to rounding, which is what makes the semigroup
//! identities below testable at machine precision.
//!
//! The heat semigroup is realized by spectral calculus on the dense
//! m-orthonormal eigensystem of `-Lap`; an implicit-Euler backend backed by
//! conjugate gradients is provided for spaces above the dense cap.

use crate::error::{Error, Result};
use crate::measure::ProbMeasure;
use crate::space::DiscreteMMSpace;
use nalgebra::{DMatrix, DVector};

pub type Field = DVector<f64>;

/// Default cap for the dense eigensolver.
pub const DENSE_CAP: usize = 4096;

fn check_len(space: &DiscreteMMSpace, f: &Field) -> Result<()> {
    if f.len() != space.n() {
        return Err(Error::SpaceMismatch(f.len(), space.n()));
    }
    Ok(())
}

/// Pointwise carre du champ `Gamma(f, g)`.
pub fn gamma(space: &DiscreteMMSpace, f: &Field, g: &Field) -> Result<Field> {
    check_len(space, f)?;
    check_len(space, g)?;
    let mut out = DVector::zeros(space.n());
    for x in 0..space.n() {
        let mut acc = 0.0;
        for &(y, _, w) in space.neighbors(x) {
            acc += w * (f[y] - f[x]) * (g[y] - g[x]);
        }
        out[x] = acc / (2.0 * space.measure()[x]);
    }
    Ok(out)
}

/// Dirichlet energy `E(f, g)`.
pub fn energy(space: &DiscreteMMSpace, f: &Field, g: &Field) -> Result<f64> {
    check_len(space, f)?;
    check_len(space, g)?;
    let mut acc = 0.0;
    for e in space.edges() {
        acc += e.conductance * (f[e.i] - f[e.j]) * (g[e.i] - g[e.j]);
    }
    Ok(acc)
}

/// Graph Laplacian `Lap f`.
pub fn laplacian(space: &DiscreteMMSpace, f: &Field) -> Result<Field> {
    check_len(space, f)?;
    let mut out = DVector::zeros(space.n());
    for x in 0..space.n() {
        let mut acc = 0.0;
        for &(y, _, w) in space.neighbors(x) {
            acc += w * (f[y] - f[x]);
        }
        out[x] = acc / space.measure()[x];
    }
    Ok(out)
}

/// Iterated carre du champ:
/// `Gamma2(f, f) = 1/2 (Lap Gamma(f, f) - 2 Gamma(f, Lap f))`.
pub fn gamma2(space: &DiscreteMMSpace, f: &Field) -> Result<Field> {
    let g = gamma(space, f, f)?;
    let lap_g = laplacian(space, &g)?;
    let lap_f = laplacian(space, f)?;
    let cross = gamma(space, f, &lap_f)?;
    Ok(0.5 * lap_g - cross)
}

/// Full m-orthonormal eigensystem of `-Lap`. Eigenvalues ascend; the first
/// is zero with a constant eigenvector on a connected space.
#[derive(Debug, Clone)]
pub struct SpectralData {
    eigenvalues: DVector<f64>,
    /// columns phi_k, orthonormal in the m-weighted inner product
    eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> Field {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Spectral gap `lambda_1`.
    pub fn gap(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// m-weighted coefficients `<f, phi_k>_m` for all k.
    fn coefficients(&self, space: &DiscreteMMSpace, f: &Field) -> DVector<f64> {
        let weighted = DVector::from_fn(f.len(), |i, _| f[i] * space.measure()[i]);
        self.eigenvectors.transpose() * weighted
    }
}

/// Dense symmetric eigendecomposition of `-Lap` via the similarity
/// transform `A = M^{1/2} (-Lap) M^{-1/2}`, which is symmetric positive
/// semidefinite. Deterministic: eigenpairs are sorted ascending, duplicate
/// clusters re-orthonormalized by Gram-Schmidt in index order, and signs
/// fixed so the first entry of largest magnitude is positive.
pub fn spectral_decompose(space: &DiscreteMMSpace) -> Result<SpectralData> {
    let n = space.n();
    if n > DENSE_CAP {
        return Err(Error::SizeCap(n, DENSE_CAP));
    }
    let sqrt_m: Vec<f64> = space.measure().iter().map(|&m| m.sqrt()).collect();
    let mut a = DMatrix::zeros(n, n);
    for e in space.edges() {
        let (i, j, w) = (e.i, e.j, e.conductance);
        a[(i, j)] -= w / (sqrt_m[i] * sqrt_m[j]);
        a[(j, i)] -= w / (sqrt_m[i] * sqrt_m[j]);
        a[(i, i)] += w / (sqrt_m[i] * sqrt_m[i]);
        a[(j, j)] += w / (sqrt_m[j] * sqrt_m[j]);
    }
    let eig: nalgebra::SymmetricEigen<f64, nalgebra::Dyn> =
        nalgebra::SymmetricEigen::try_new(a, f64::EPSILON, 0)
            .ok_or_else(|| Error::EigFailure("symmetric QL iteration did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]].max(0.0));
    let mut psi = DMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        psi.set_column(k, &eig.eigenvectors.column(src));
    }

    // Gram-Schmidt inside nearly-degenerate clusters (deterministic order)
    let scale = eigenvalues[n - 1].max(1.0);
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && eigenvalues[end] - eigenvalues[k] < 1e-9 * scale {
            end += 1;
        }
        for c in k..end {
            let mut col = psi.column(c).into_owned();
            for prev in k..c {
                let proj = psi.column(prev).dot(&col);
                col -= proj * psi.column(prev);
            }
            let norm = col.norm();
            if norm < 1e-12 {
                return Err(Error::EigFailure("degenerate eigenvector cluster".into()));
            }
            psi.set_column(c, &(col / norm));
        }
        k = end;
    }

    // map back to m-orthonormal vectors and fix signs
    let mut eigenvectors = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut col = DVector::from_fn(n, |i, _| psi[(i, k)] / sqrt_m[i]);
        let lead = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if col[lead] < 0.0 {
            col = -col;
        }
        eigenvectors.set_column(k, &col);
    }
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
    })
}

/// `T_t f` by spectral calculus.
pub fn heat_apply(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    t: f64,
    f: &Field,
) -> Result<Field> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    check_len(space, f)?;
    let mut coeffs = spectral.coefficients(space, f);
    for k in 0..coeffs.len() {
        coeffs[k] *= (-spectral.eigenvalues[k] * t).exp();
    }
    Ok(&spectral.eigenvectors * coeffs)
}

/// The heat kernel `p_t(x, y)` as a dense matrix (a density against the
/// reference measure in its second slot).
#[derive(Debug, Clone)]
pub struct HeatKernel {
    pub t: f64,
    pub values: DMatrix<f64>,
}

pub fn heat_kernel(
    _space: &DiscreteMMSpace,
    spectral: &SpectralData,
    t: f64,
) -> Result<HeatKernel> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let n = spectral.eigenvalues.len();
    let mut scaled = spectral.eigenvectors.clone();
    for k in 0..n {
        let decay = (-spectral.eigenvalues[k] * t).exp();
        scaled.column_mut(k).scale_mut(decay);
    }
    let values = &scaled * spectral.eigenvectors.transpose();
    Ok(HeatKernel { t, values })
}

/// Push a measure through the heat flow: density of `T_t mu` against the
/// reference measure.
pub fn heat_measure(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    t: f64,
    mu: &ProbMeasure,
) -> Result<ProbMeasure> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(mu.clone());
    }
    // density(y) = sum_k e^{-lambda_k t} phi_k(y) <phi_k, d mu>
    let mut coeffs = spectral.eigenvectors.transpose() * mu.masses();
    for k in 0..coeffs.len() {
        coeffs[k] *= (-spectral.eigenvalues[k] * t).exp();
    }
    let density = &spectral.eigenvectors * coeffs;
    // rounding can leave tiny negative entries at very small t
    let clipped: Vec<f64> = density.iter().map(|&x| x.max(0.0)).collect();
    ProbMeasure::from_density(space, &clipped)
}

/// `(alpha - Lap)^{-q/2} f` by spectral calculus.
pub fn resolvent_power(
    space: &DiscreteMMSpace,
    spectral: &SpectralData,
    alpha: f64,
    q: f64,
    f: &Field,
) -> Result<Field> {
    if !(alpha > 0.0) {
        return Err(Error::NonpositiveAlpha(alpha));
    }
    check_len(space, f)?;
    let mut coeffs = spectral.coefficients(space, f);
    for k in 0..coeffs.len() {
        coeffs[k] *= (alpha + spectral.eigenvalues[k]).powf(-q / 2.0);
    }
    Ok(&spectral.eigenvectors * coeffs)
}

// ---------------------------------------------------------------------------
// implicit Euler backend (sparse, matrix-free)
// ---------------------------------------------------------------------------

/// `T_t f` approximated by `ceil(t / delta)` implicit Euler steps
/// `(I - delta * Lap)^{-1}`, each solved by Jacobi-preconditioned CG.
/// Intended for spaces beyond the dense eigensolver cap.
pub fn heat_apply_euler(
    space: &DiscreteMMSpace,
    delta: f64,
    t: f64,
    f: &Field,
) -> Result<Field> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if !(delta > 0.0) {
        return Err(Error::BadParams(format!("euler step {delta} <= 0")));
    }
    check_len(space, f)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let steps = (t / delta).ceil() as usize;
    let dt = t / steps as f64;
    let apply = |v: &Field| -> Field {
        // (I - dt * Lap) v
        let lap = laplacian(space, v).expect("length checked");
        v - dt * lap
    };
    let diag: Vec<f64> = (0..space.n())
        .map(|x| {
            let wsum: f64 = space.neighbors(x).iter().map(|&(_, _, w)| w).sum();
            1.0 + dt * wsum / space.measure()[x]
        })
        .collect();
    let mut u = f.clone();
    for _ in 0..steps {
        u = conjugate_gradient(&apply, &diag, &u, 1e-13, 10 * space.n() + 100)?;
    }
    Ok(u)
}

fn conjugate_gradient(
    apply: &dyn Fn(&Field) -> Field,
    jacobi: &[f64],
    b: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<Field> {
    let mut x = b.clone();
    let mut r = b - apply(&x);
    let mut z = DVector::from_fn(r.len(), |i, _| r[i] / jacobi[i]);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let bnorm = b.norm().max(1e-300);
    for _ in 0..max_iter {
        if r.norm() <= tol * bnorm {
            return Ok(x);
        }
        let ap = apply(&p);
        let alpha = rz / p.dot(&ap);
        x += alpha * &p;
        r -= alpha * ap;
        z = DVector::from_fn(r.len(), |i, _| r[i] / jacobi[i]);
        let rz_new = r.dot(&z);
        p = &z + (rz_new / rz) * p;
        rz = rz_new;
    }
    if r.norm() <= tol * bnorm * 10.0 {
        return Ok(x);
    }
    Err(Error::SolverFailure(format!(
        "cg stalled at residual {:.3e}",
        r.norm() / bnorm
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::cycle;
    use crate::space::two_point;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand_field(n: usize, rng: &mut impl Rng) -> Field {
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn gamma_on_single_edge() {
        let s = two_point();
        let f = DVector::from_vec(vec![0.0, 1.0]);
        let g = gamma(&s, &f, &f).unwrap();
        assert_relative_eq!(g[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(g[1], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn gamma_of_constant_vanishes_and_is_bilinear() {
        let s = cycle(16, 1.0).unwrap();
        let c = DVector::from_element(16, 3.7);
        assert!(gamma(&s, &c, &c).unwrap().amax() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = rand_field(16, &mut rng);
        let g = rand_field(16, &mut rng);
        let h = rand_field(16, &mut rng);
        let lhs = gamma(&s, &f, &(&g + &h)).unwrap();
        let rhs = gamma(&s, &f, &g).unwrap() + gamma(&s, &f, &h).unwrap();
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn energy_on_single_edge_and_symmetry() {
        let s = two_point();
        let f = DVector::from_vec(vec![0.0, 1.0]);
        assert_relative_eq!(energy(&s, &f, &f).unwrap(), 1.0, max_relative = 1e-15);

        let s = cycle(24, 1.3).unwrap();
        let ones = DVector::from_element(24, 1.0);
        assert_eq!(energy(&s, &ones, &ones).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = rand_field(24, &mut rng);
        let g = rand_field(24, &mut rng);
        let e1 = energy(&s, &f, &g).unwrap();
        let e2 = energy(&s, &g, &f).unwrap();
        assert_relative_eq!(e1, e2, epsilon = 1e-12);
    }

    #[test]
    fn laplacian_hand_values_and_ibp() {
        let s = two_point();
        let f = DVector::from_vec(vec![0.0, 1.0]);
        let lf = laplacian(&s, &f).unwrap();
        assert_relative_eq!(lf[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(lf[1], -1.0, max_relative = 1e-15);

        // E(g, f) + sum m g Lap f = 0 exactly
        let s = cycle(32, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let f = rand_field(32, &mut rng);
            let g = rand_field(32, &mut rng);
            let lf = laplacian(&s, &f).unwrap();
            let pairing: f64 = (0..32).map(|x| s.measure()[x] * g[x] * lf[x]).sum();
            assert!((energy(&s, &g, &f).unwrap() + pairing).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_conserves_mass() {
        let s = cycle(32, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = rand_field(32, &mut rng);
        let lf = laplacian(&s, &f).unwrap();
        let total: f64 = (0..32).map(|x| s.measure()[x] * lf[x]).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_two_point_space() {
        let s = two_point();
        let sd = spectral_decompose(&s).unwrap();
        assert!(sd.eigenvalues()[0].abs() < 1e-12);
        assert_relative_eq!(sd.eigenvalues()[1], 2.0, max_relative = 1e-12);
        // phi_0 constant with m-norm 1
        let phi0 = sd.eigenvector(0);
        assert_relative_eq!(phi0[0], phi0[1], max_relative = 1e-12);
        assert_relative_eq!(phi0[0].abs(), 1.0 / 2.0f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn cycle_spectrum_matches_circulant_formula() {
        let n = 16;
        let s = cycle(n, 1.0).unwrap();
        let sd = spectral_decompose(&s).unwrap();
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut expected: Vec<f64> = (0..n)
            .map(|k| 2.0 / (h * h) * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for k in 0..n {
            assert_relative_eq!(sd.eigenvalues()[k], expected[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn eigenvectors_m_orthonormal_and_reconstruct() {
        let s = crate::generate::icosphere(1, 1.0).unwrap();
        let sd = spectral_decompose(&s).unwrap();
        let n = s.n();
        for j in (0..n).step_by(7) {
            for k in (j..n).step_by(5) {
                let dot: f64 = (0..n)
                    .map(|x| s.measure()[x] * sd.eigenvectors()[(x, j)] * sd.eigenvectors()[(x, k)])
                    .sum();
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-10, "({j},{k}): {dot}");
            }
        }
        // Lap phi_k = -lambda_k phi_k
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..4 {
            let k = rng.gen_range(0..n);
            let phi = sd.eigenvector(k);
            let lap = laplacian(&s, &phi).unwrap();
            let resid = (lap + sd.eigenvalues()[k] * &phi).amax();
            assert!(resid < 1e-8 * sd.eigenvalues()[n - 1].max(1.0), "k={k}: {resid}");
        }
    }

    #[test]
    fn heat_closed_form_on_two_points() {
        let s = two_point();
        let sd = spectral_decompose(&s).unwrap();
        for &t in &[0.0, 0.05, 0.3, 1.0, 4.0] {
            let k = heat_kernel(&s, &sd, t).unwrap();
            let paa = (1.0 + (-2.0 * t).exp()) / 2.0;
            let pab = (1.0 - (-2.0 * t).exp()) / 2.0;
            assert_relative_eq!(k.values[(0, 0)], paa, epsilon = 1e-12);
            assert_relative_eq!(k.values[(0, 1)], pab, epsilon = 1e-12);
        }
    }

    #[test]
    fn heat_identity_at_zero_and_conservation() {
        let s = cycle(20, 1.0).unwrap();
        let sd = spectral_decompose(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = rand_field(20, &mut rng);
        let f0 = heat_apply(&s, &sd, 0.0, &f).unwrap();
        assert!((&f0 - &f).amax() < 1e-12);

        let ones = DVector::from_element(20, 1.0);
        for &t in &[0.01, 0.5, 3.0] {
            let tt1 = heat_apply(&s, &sd, t, &ones).unwrap();
            assert!((tt1 - &ones).amax() < 1e-12);
        }
    }

    #[test]
    fn heat_measure_limits() {
        let s = two_point();
        let sd = spectral_decompose(&s).unwrap();
        let dirac = ProbMeasure::dirac(&s, 0);
        let far = heat_measure(&s, &sd, 50.0, &dirac).unwrap();
        assert_relative_eq!(far.density()[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(far.density()[1], 0.5, epsilon = 1e-12);

        let back = heat_measure(&s, &sd, 0.0, &dirac).unwrap();
        assert_eq!(back.density()[0], dirac.density()[0]);
    }

    #[test]
    fn heat_measure_linearity() {
        let s = cycle(12, 1.0).unwrap();
        let sd = spectral_decompose(&s).unwrap();
        let mu = ProbMeasure::dirac(&s, 0);
        let nu = ProbMeasure::dirac(&s, 5);
        let mix = mu.mix(&nu, 0.5);
        let lhs = heat_measure(&s, &sd, 0.3, &mix).unwrap();
        let rhs = heat_measure(&s, &sd, 0.3, &mu)
            .unwrap()
            .mix(&heat_measure(&s, &sd, 0.3, &nu).unwrap(), 0.5);
        assert!((lhs.density() - rhs.density()).amax() < 1e-12);
    }

    #[test]
    fn gamma2_hand_value_on_two_points() {
        let s = two_point();
        let f = DVector::from_vec(vec![0.0, 1.0]);
        let g2 = gamma2(&s, &f).unwrap();
        assert_relative_eq!(g2[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(g2[1], 1.0, max_relative = 1e-14);
        // ratio Gamma2 / Gamma = 2 on the two-point space
        let g = gamma(&s, &f, &f).unwrap();
        assert_relative_eq!(g2[0] / g[0], 2.0, max_relative = 1e-14);

        let c = DVector::from_element(2, 5.0);
        assert!(gamma2(&s, &c).unwrap().amax() < 1e-15);
    }

    #[test]
    fn resolvent_power_cases() {
        let s = two_point();
        let sd = spectral_decompose(&s).unwrap();
        let f = DVector::from_vec(vec![0.0, 1.0]);

        // q = 0 is the identity
        let id = resolvent_power(&s, &sd, 1.0, 0.0, &f).unwrap();
        assert!((&id - &f).amax() < 1e-13);

        // q = 2 on an eigenvector divides by (alpha + lambda)
        let phi1 = sd.eigenvector(1);
        let r = resolvent_power(&s, &sd, 0.7, 2.0, &phi1).unwrap();
        assert!((r - &phi1 / (0.7 + 2.0)).amax() < 1e-13);

        // q = 1, alpha = 1: mean + 3^{-1/2} * deviation
        let r = resolvent_power(&s, &sd, 1.0, 1.0, &f).unwrap();
        let expected = DVector::from_vec(vec![
            0.5 - 0.5 / 3.0f64.sqrt(),
            0.5 + 0.5 / 3.0f64.sqrt(),
        ]);
        assert!((r - expected).amax() < 1e-13);

        assert!(matches!(
            resolvent_power(&s, &sd, 0.0, 1.0, &f),
            Err(Error::NonpositiveAlpha(_))
        ));
    }

    #[test]
    fn euler_backend_matches_spectral() {
        let s = cycle(32, 1.0).unwrap();
        let sd = spectral_decompose(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = rand_field(32, &mut rng);
        let t = 0.2;
        let exact = heat_apply(&s, &sd, t, &f).unwrap();
        let coarse = heat_apply_euler(&s, 0.01, t, &f).unwrap();
        let fine = heat_apply_euler(&s, 0.0025, t, &f).unwrap();
        let e_coarse = (&coarse - &exact).amax();
        let e_fine = (&fine - &exact).amax();
        assert!(e_coarse < 0.05);
        // implicit Euler is first order
        assert!(e_fine < e_coarse / 2.5, "{e_fine} vs {e_coarse}");
    }

    #[test]
    fn energy_decreases_along_heat_flow() {
        let s = cycle(24, 1.0).unwrap();
        let sd = spectral_decompose(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = rand_field(24, &mut rng);
        let mut prev = f64::INFINITY;
        for &t in &[0.0, 0.05, 0.1, 0.3, 1.0, 2.0] {
            let ft = heat_apply(&s, &sd, t, &f).unwrap();
            let e = energy(&s, &ft, &ft).unwrap();
            assert!(e <= prev + 1e-12);
            prev = e;
        }
    }
}
