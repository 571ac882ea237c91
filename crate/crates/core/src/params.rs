use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flat parameter (or state) vector of dimension `d >= 1`.
///
/// Vectors built through [`Params::new`] are finite. Optimizer steps that would
/// produce non-finite entries report [`Error::Diverged`] instead of returning
/// such a vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T>(Vec<T>);

impl<T: Scalar> Params<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyParams);
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged);
        }
        Ok(Params(values))
    }

    /// Wraps `values` without checking finiteness.
    pub(crate) fn from_vec(values: Vec<T>) -> Self {
        debug_assert!(!values.is_empty());
        Params(values)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "parameter dimension must be positive");
        Params(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Params(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
        )
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Params(self.0.iter().map(|&a| alpha * a).collect())
    }

    /// Unit vector in the direction of `self`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > T::zero()).then(|| self.scaled(n.recip()))
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                actual: self.dim(),
            })
        }
    }
}

impl<T> Index<usize> for Params<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> AsRef<[T]> for Params<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
