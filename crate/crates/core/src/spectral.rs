//! Top-k Hessian eigenpairs from Hessian-vector products, and alignment of
//! gradients with the principal eigenvector.
//!
//! The estimator is Lanczos with full reorthogonalization. Eigenpairs are
//! ranked by magnitude with their signs kept. Residuals are the Lanczos
//! residual norms `β_m |s_{m,i}|`, which equal `‖H y_i − θ_i y_i‖` for the
//! Ritz pair `(θ_i, y_i)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigen;
use crate::objectives::{GradientInfo, Objective};
use crate::optim::uphill_point;
use crate::params::Params;
use crate::scalar::Scalar;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralOptions {
    pub k: usize,
    /// Convergence requires `residual_i <= tol * max(1, |λ_i|)`.
    pub tol: f64,
    /// Upper bound on Lanczos steps, hence on Hessian-vector products.
    pub max_iters: usize,
    pub seed: u64,
}

impl SpectralOptions {
    pub fn new(k: usize) -> Self {
        SpectralOptions {
            k,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k", "must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be > 0"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    /// Signed eigenvalues ordered by decreasing magnitude.
    pub eigenvalues: Vec<T>,
    /// Unit eigenvectors; the first component of non-negligible size is
    /// positive.
    pub eigenvectors: Vec<Params<T>>,
    pub residuals: Vec<T>,
    pub hvp_calls: usize,
    pub converged: bool,
}

impl<T: Scalar> Spectrum<T> {
    pub fn magnitudes(&self) -> Vec<T> {
        self.eigenvalues.iter().map(|x| x.abs()).collect()
    }
}

/// `|λ₁|` of an estimate.
pub fn operator_norm<T: Scalar>(estimate: &Spectrum<T>) -> Result<T> {
    estimate
        .eigenvalues
        .first()
        .map(|x| x.abs())
        .ok_or(Error::EmptyEstimate)
}

/// Top-`k` eigenpairs (by `|λ|`) of `∇²ℓ(w)`, started from a Gaussian vector
/// drawn from `opts.seed`.
pub fn top_k_eigs<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    w: &Params<T>,
    opts: &SpectralOptions,
) -> Result<Spectrum<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start = gaussian(w.dim(), &mut rng);
    lanczos(objective, w, opts, start, &mut rng)
}

/// As [`top_k_eigs`] but started from `start` (for example the previous
/// principal eigenvector while tracking training).
pub fn top_k_eigs_from<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    w: &Params<T>,
    opts: &SpectralOptions,
    start: &Params<T>,
) -> Result<Spectrum<T>> {
    start.check_dim(w.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    lanczos(objective, w, opts, start.as_slice().to_vec(), &mut rng)
}

fn gaussian<T: Scalar>(d: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..d).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect()
}

fn norm<T: Scalar>(v: &[T]) -> T {
    crate::params::dot(v, v).sqrt()
}

/// Removes the components of `v` along the orthonormal `basis` (two passes).
fn orthogonalize<T: Scalar>(v: &mut [T], basis: &[Vec<T>]) {
    for _ in 0..2 {
        for q in basis {
            let c = crate::params::dot(v, q);
            for (x, &y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
}

struct Ritz<T> {
    values: Vec<T>,
    /// `vectors[i]` holds the coefficients of Ritz vector `i` in the basis.
    coeffs: Vec<Vec<T>>,
    residuals: Vec<T>,
}

/// Ritz pairs of the current tridiagonal, top `k` by magnitude.
fn ritz<T: Scalar>(alphas: &[T], betas: &[T], k: usize) -> Ritz<T> {
    let m = alphas.len();
    let (vals, z) = tridiagonal_eigen(alphas, &betas[..m - 1]);
    let last_beta = betas[m - 1];
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        vals[j]
            .abs()
            .partial_cmp(&vals[i].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order.truncate(k.min(m));
    Ritz {
        values: order.iter().map(|&j| vals[j]).collect(),
        coeffs: order
            .iter()
            .map(|&j| (0..m).map(|r| z[r * m + j]).collect())
            .collect(),
        residuals: order
            .iter()
            .map(|&j| (last_beta * z[(m - 1) * m + j]).abs())
            .collect(),
    }
}

fn lanczos<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    w: &Params<T>,
    opts: &SpectralOptions,
    start: Vec<T>,
    rng: &mut ChaCha8Rng,
) -> Result<Spectrum<T>> {
    opts.validate()?;
    let d = w.dim();
    objective.dim();
    let tol = T::of(opts.tol);
    let max_steps = opts.max_iters.min(d);

    let mut q = start;
    let mut n0 = norm(&q);
    if !(n0 > T::zero()) || !n0.is_finite() {
        q = gaussian(d, rng);
        n0 = norm(&q);
    }
    q.iter_mut().for_each(|x| *x /= n0);

    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut hvp_calls = 0;
    let mut converged = false;
    let mut scale = T::zero();
    let mut current: Option<Ritz<T>> = None;

    while basis.len() < max_steps {
        let hq = objective.hvp(w, &Params::from_vec(q.clone()))?;
        hvp_calls += 1;
        let mut r = hq.into_vec();
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged);
        }
        let alpha = crate::params::dot(&q, &r);
        basis.push(q);
        orthogonalize(&mut r, &basis);
        let beta = norm(&r);
        alphas.push(alpha);
        betas.push(beta);
        scale = scale.max(alpha.abs() + beta);

        let rz = ritz(&alphas, &betas, opts.k);
        let want = opts.k.min(d);
        let breakdown = beta <= T::epsilon() * T::of(16.0) * scale.max(T::min_positive_value());
        converged = rz.values.len() >= want
            && rz
                .values
                .iter()
                .zip(&rz.residuals)
                .all(|(&v, &res)| res <= tol * v.abs().max(T::one()));
        current = Some(rz);
        if converged || basis.len() == max_steps {
            break;
        }
        if breakdown {
            // Invariant subspace found: continue in its orthogonal complement.
            let mut fresh = gaussian(d, rng);
            orthogonalize(&mut fresh, &basis);
            let fresh_norm = norm(&fresh);
            if !(fresh_norm > T::of(1e-8)) {
                break;
            }
            *betas.last_mut().unwrap() = T::zero();
            q = fresh.into_iter().map(|x| x / fresh_norm).collect();
        } else {
            q = r.into_iter().map(|x| x / beta).collect();
        }
    }

    let rz = current.expect("at least one Lanczos step");
    let mut eigenvectors = Vec::with_capacity(rz.values.len());
    for coeffs in &rz.coeffs {
        let mut y = vec![T::zero(); d];
        for (c, b) in coeffs.iter().zip(&basis) {
            for (yi, &bi) in y.iter_mut().zip(b) {
                *yi += *c * bi;
            }
        }
        let n = norm(&y);
        y.iter_mut().for_each(|x| *x /= n);
        canonical_sign(&mut y);
        eigenvectors.push(Params::from_vec(y));
    }
    Ok(Spectrum {
        eigenvalues: rz.values,
        eigenvectors,
        residuals: rz.residuals,
        hvp_calls,
        converged,
    })
}

/// Flips `v` so its first entry larger than `1e-8 · max|vᵢ|` is positive.
fn canonical_sign<T: Scalar>(v: &mut [T]) {
    let max = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let cutoff = max * T::of(1e-8);
    if let Some(first) = v.iter().find(|x| x.abs() > cutoff) {
        if *first < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Absolute cosine `|u·v| / (‖u‖‖v‖)`.
pub fn alignment<T: Scalar>(u: &Params<T>, v: &Params<T>) -> Result<T> {
    u.check_dim(v.dim())?;
    let (nu, nv) = (u.norm(), v.norm());
    if !(nu > T::zero()) || !(nv > T::zero()) {
        return Err(Error::invalid("alignment", "vectors must be nonzero"));
    }
    Ok((u.dot(v).abs() / (nu * nv)).min(T::one()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentRecord<T> {
    /// Alignment of `∇ℓ(w)` with `v₁`.
    pub align_iterate: T,
    /// Alignment of `∇ℓ(w + ρ g/‖g‖)` with `v₁`.
    pub align_uphill: T,
}

impl<T: Scalar> AlignmentRecord<T> {
    pub fn from_gradients(grad: &GradientInfo<T>, uphill: &GradientInfo<T>, v1: &Params<T>) -> Result<Self> {
        Ok(AlignmentRecord {
            align_iterate: alignment(&grad.grad, v1)?,
            align_uphill: alignment(&uphill.grad, v1)?,
        })
    }
}

pub fn alignment_pair<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    w: &Params<T>,
    rho: T,
    v1: &Params<T>,
) -> Result<AlignmentRecord<T>> {
    let grad = objective.gradient(w)?;
    if !(grad.norm > T::zero()) {
        return Err(Error::ZeroGradient);
    }
    if rho == T::zero() {
        let a = alignment(&grad.grad, v1)?;
        return Ok(AlignmentRecord {
            align_iterate: a,
            align_uphill: a,
        });
    }
    let uphill = objective.gradient(&uphill_point(w, &grad, rho)?)?;
    AlignmentRecord::from_gradients(&grad, &uphill, v1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Quadratic;

    #[test]
    fn diagonal_top_two() {
        let q = Quadratic::<f64>::diagonal(&[5.0, 3.0, 1.0]).unwrap();
        let w = Params::<f64>::zeros(3);
        let est = top_k_eigs(&q, &w, &SpectralOptions::new(2)).unwrap();
        assert!(est.converged);
        assert!((est.eigenvalues[0] - 5.0).abs() < 1e-10);
        assert!((est.eigenvalues[1] - 3.0).abs() < 1e-10);
        assert!(est.residuals.iter().all(|&r| r <= 1e-10));
        assert!((est.eigenvectors[0][0] - 1.0).abs() < 1e-10);
        assert_eq!(operator_norm(&est).unwrap(), est.eigenvalues[0].abs());
    }

    #[test]
    fn negative_eigenvalue_keeps_sign() {
        let q = Quadratic::<f64>::diagonal(&[-7.0, 5.0]).unwrap();
        let est = top_k_eigs(&q, &Params::<f64>::zeros(2), &SpectralOptions::new(1)).unwrap();
        assert!((est.eigenvalues[0] + 7.0).abs() < 1e-10);
        assert!((operator_norm(&est).unwrap() - 7.0).abs() < 1e-10);
    }

    #[test]
    fn starting_inside_an_eigenspace_still_finds_all() {
        let q = Quadratic::<f64>::diagonal(&[1.0, 9.0, 4.0]).unwrap();
        let start = Params::<f64>::new(vec![1.0, 0.0, 0.0]).unwrap();
        let est = top_k_eigs_from(&q, &Params::<f64>::zeros(3), &SpectralOptions::new(3), &start).unwrap();
        let mut vals = est.eigenvalues.clone();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((vals[0] - 9.0).abs() < 1e-10 && (vals[1] - 4.0).abs() < 1e-10 && (vals[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let q = Quadratic::<f64>::from_dense(3, &[2.0, 0.0, 0.0, 1.0, 3.0, 0.0, 0.5, -1.0, -4.0], vec![0.0; 3], 0.0)
            .unwrap();
        let opts = SpectralOptions { seed: 42, ..SpectralOptions::new(2) };
        let a = top_k_eigs(&q, &Params::<f64>::zeros(3), &opts).unwrap();
        let b = top_k_eigs(&q, &Params::<f64>::zeros(3), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_is_respected() {
        let q = Quadratic::<f64>::diagonal(&(1..=50).map(|i| i as f64).collect::<Vec<_>>()).unwrap();
        let opts = SpectralOptions {
            k: 2,
            tol: 1e-14,
            max_iters: 5,
            seed: 1,
        };
        let est = top_k_eigs(&q, &Params::<f64>::zeros(50), &opts).unwrap();
        assert!(est.hvp_calls <= opts.max_iters * opts.k);
        assert!(!est.converged);
        assert_eq!(est.eigenvalues.len(), 2);
    }

    #[test]
    fn empty_estimate_has_no_norm() {
        let est: Spectrum<f64> = Spectrum {
            eigenvalues: vec![],
            eigenvectors: vec![],
            residuals: vec![],
            hvp_calls: 0,
            converged: false,
        };
        assert!(matches!(operator_norm(&est), Err(Error::EmptyEstimate)));
    }

    #[test]
    fn alignment_basics() {
        let v = Params::<f64>::new(vec![0.6, 0.8]).unwrap();
        assert!((alignment(&v.scaled(3.0), &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((alignment(&v.scaled(-3.0), &v).unwrap() - 1.0).abs() < 1e-15);
        let perp = Params::<f64>::new(vec![-0.8, 0.6]).unwrap();
        assert!(alignment(&perp, &v).unwrap().abs() < 1e-15);
        assert!(alignment(&Params::<f64>::zeros(2), &v).is_err());
    }

    #[test]
    fn uphill_gradient_tilts_toward_top_direction() {
        // H = diag(10, 1), w chosen so g = (1, 1)/√2
        let q = Quadratic::<f64>::diagonal(&[10.0, 1.0]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = Params::<f64>::new(vec![s / 10.0, s]).unwrap();
        let v1 = Params::<f64>::new(vec![1.0, 0.0]).unwrap();
        let rec = alignment_pair(&q, &w, 0.1, &v1).unwrap();
        // uphill gradient: g + ρHg/‖g‖ = s(1 + 1, 1 + 0.1)
        let expected_uphill = 2.0 / (4.0f64 + 1.21).sqrt();
        assert!((rec.align_iterate - s).abs() < 1e-12);
        assert!((rec.align_uphill - expected_uphill).abs() < 1e-12);
        assert!(rec.align_uphill > rec.align_iterate);
        let same = alignment_pair(&q, &w, 0.0, &v1).unwrap();
        assert_eq!(same.align_iterate, same.align_uphill);
    }

    #[test]
    fn aligned_gradient_stays_aligned() {
        let q = Quadratic::<f64>::diagonal(&[4.0, 2.0, 1.0]).unwrap();
        let w = Params::<f64>::new(vec![0.5, 0.0, 0.0]).unwrap();
        let v1 = Params::<f64>::new(vec![1.0, 0.0, 0.0]).unwrap();
        let rec = alignment_pair(&q, &w, 0.3, &v1).unwrap();
        assert_eq!((rec.align_iterate, rec.align_uphill), (1.0, 1.0));
    }
}
