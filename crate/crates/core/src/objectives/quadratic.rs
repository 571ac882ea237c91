use crate::error::{Error, Result};
use crate::objectives::{finite_gradient, GradientInfo, Objective};
use crate::params::Params;
use crate::scalar::Scalar;

/// `ℓ(w) = c + bᵀw + ½ wᵀHw` with `H` stored as its packed lower triangle,
/// so symmetry holds by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic<T> {
    dim: usize,
    lower: Vec<T>,
    linear: Vec<T>,
    offset: T,
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl<T: Scalar> Quadratic<T> {
    /// Builds a model from a row-major `dim × dim` matrix. Only the lower
    /// triangle (including the diagonal) is read.
    pub fn from_dense(dim: usize, hessian: &[T], linear: Vec<T>, offset: T) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyParams);
        }
        if hessian.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: hessian.len(),
            });
        }
        if linear.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: linear.len(),
            });
        }
        let mut lower = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            lower.extend_from_slice(&hessian[i * dim..i * dim + i + 1]);
        }
        Ok(Quadratic {
            dim,
            lower,
            linear,
            offset,
        })
    }

    /// `ℓ(w) = ½ Σ λᵢ wᵢ²`.
    pub fn diagonal(eigenvalues: &[T]) -> Result<Self> {
        let d = eigenvalues.len();
        let mut h = vec![T::zero(); d * d];
        for (i, &l) in eigenvalues.iter().enumerate() {
            h[i * d + i] = l;
        }
        Self::from_dense(d, &h, vec![T::zero(); d], T::zero())
    }

    /// `H = Σ λᵢ vᵢ vᵢᵀ` for the given eigenpairs (`vectors[i]` is `vᵢ`).
    pub fn from_eigenpairs(eigenvalues: &[T], vectors: &[Vec<T>]) -> Result<Self> {
        let d = eigenvalues.len();
        if vectors.len() != d || vectors.iter().any(|v| v.len() != d) {
            return Err(Error::invalid("vectors", "expected d eigenvectors of length d"));
        }
        let mut h = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..=i {
                let s = eigenvalues
                    .iter()
                    .zip(vectors)
                    .fold(T::zero(), |acc, (&l, v)| acc + l * v[i] * v[j]);
                h[i * d + j] = s;
            }
        }
        Self::from_dense(d, &h, vec![T::zero(); d], T::zero())
    }

    /// Same Hessian, with linear term and offset chosen so that `minimizer`
    /// is a stationary point with loss `min_value`.
    pub fn centered_at(mut self, minimizer: &[T], min_value: T) -> Result<Self> {
        if minimizer.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: minimizer.len(),
            });
        }
        let hm = self.matvec(minimizer);
        self.linear = hm.iter().map(|&x| -x).collect();
        let quad = crate::params::dot(minimizer, &hm);
        self.offset = min_value + quad * T::of(0.5);
        Ok(self)
    }

    pub fn hessian(&self, i: usize, j: usize) -> T {
        self.lower[tri(i, j)]
    }

    /// Full row-major Hessian.
    pub fn dense_hessian(&self) -> Vec<T> {
        let d = self.dim;
        let mut h = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] = self.hessian(i, j);
            }
        }
        h
    }

    pub fn linear(&self) -> &[T] {
        &self.linear
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut out = vec![T::zero(); d];
        for i in 0..d {
            let row = &self.lower[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            // lower part of row i, and its transpose contribution to earlier rows
            let mut acc = T::zero();
            for j in 0..i {
                acc += row[j] * v[j];
                out[j] += row[j] * v[i];
            }
            acc += row[i] * v[i];
            out[i] += acc;
        }
        out
    }
}

impl<T: Scalar> Objective<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, w: &Params<T>) -> Result<T> {
        w.check_dim(self.dim)?;
        let hw = self.matvec(w.as_slice());
        let lin = crate::params::dot(&self.linear, w.as_slice());
        let quad = crate::params::dot(w.as_slice(), &hw);
        Ok(self.offset + lin + quad * T::of(0.5))
    }

    fn gradient(&self, w: &Params<T>) -> Result<GradientInfo<T>> {
        w.check_dim(self.dim)?;
        let mut g = self.matvec(w.as_slice());
        for (gi, &bi) in g.iter_mut().zip(&self.linear) {
            *gi += bi;
        }
        finite_gradient(g)
    }

    fn hvp(&self, w: &Params<T>, v: &Params<T>) -> Result<Params<T>> {
        w.check_dim(self.dim)?;
        v.check_dim(self.dim)?;
        Ok(Params::from_vec(self.matvec(v.as_slice())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Params<f64> {
        Params::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identity_loss_is_half_norm_squared() {
        let q = Quadratic::diagonal(&[1.0, 1.0]).unwrap();
        assert_eq!(q.loss(&p(&[3.0, 4.0])).unwrap(), 12.5);
    }

    #[test]
    fn diagonal_gradient() {
        let q = Quadratic::diagonal(&[2.0, 4.0]).unwrap();
        let g = q.gradient(&p(&[1.0, 1.0])).unwrap();
        assert_eq!(g.grad.as_slice(), &[2.0, 4.0]);
        assert_eq!(g.norm, 20f64.sqrt());
    }

    #[test]
    fn upper_triangle_is_ignored() {
        let q = Quadratic::from_dense(2, &[1.0, 99.0, 2.0, 3.0], vec![0.0; 2], 0.0).unwrap();
        assert_eq!(q.hessian(0, 1), 2.0);
        assert_eq!(q.hessian(1, 0), 2.0);
        assert_eq!(q.matvec(&[1.0, 0.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let q = Quadratic::diagonal(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            q.loss(&p(&[1.0])),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
        assert!(q.hvp(&p(&[1.0, 1.0]), &p(&[1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn centered_minimizer_is_stationary() {
        let q = Quadratic::from_dense(2, &[3.0, 0.0, 1.0, 2.0], vec![0.0; 2], 0.0)
            .unwrap()
            .centered_at(&[0.5, -1.5], 7.0)
            .unwrap();
        let w = p(&[0.5, -1.5]);
        assert!(q.gradient(&w).unwrap().norm <= 1e-12);
        assert!((q.loss(&w).unwrap() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn hvp_ignores_base_point() {
        let q = Quadratic::from_dense(2, &[3.0, 0.0, 1.0, 2.0], vec![1.0, -1.0], 0.5).unwrap();
        let v = p(&[1.0, 2.0]);
        let a = q.hvp(&p(&[0.0, 0.0]), &v).unwrap();
        let b = q.hvp(&p(&[10.0, -4.0]), &v).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.as_slice(), &[5.0, 5.0]);
    }
}
