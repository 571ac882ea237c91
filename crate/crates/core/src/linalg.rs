//! Small dense symmetric eigen-solvers used by the quadratic lab and by the
//! Lanczos iteration.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;

/// Eigen-decomposition of a symmetric row-major `n × n` matrix by cyclic
/// Jacobi rotations. Returns eigenvalues in descending order and the matching
/// unit eigenvectors (`vectors[i]` belongs to `values[i]`).
pub fn symmetric_eigen<T: Scalar>(matrix: &[T], n: usize) -> (Vec<T>, Vec<Vec<T>>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let fro: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let half = T::of(0.5);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= T::epsilon() * T::of(1e-2) * fro || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) * half / apq;
                let t = if theta.abs() > T::of(1e150) {
                    half / theta
                } else {
                    let s = if theta < T::zero() { -T::one() } else { T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    (values, vectors)
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off[i]` couples rows `i` and `i + 1`) by
/// implicit QL iteration. Returns unsorted eigenvalues and a row-major matrix
/// whose column `j` is the eigenvector of eigenvalue `j`.
pub fn tridiagonal_eigen<T: Scalar>(diag: &[T], off: &[T]) -> (Vec<T>, Vec<T>) {
    let n = diag.len();
    assert!(off.len() + 1 == n || (n == 0 && off.is_empty()));
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            for _iter in 0..60 {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (T::of(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * h;
                        z[k * n + i] = c * z[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    (d, z)
}

/// Orthonormal basis from modified Gram-Schmidt on a Gaussian matrix
/// (the Q factor of its QR decomposition). `basis[i]` is the i-th column.
pub fn random_orthogonal<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<T> = (0..n)
            .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        for _ in 0..2 {
            for b in &basis {
                let proj = crate::params::dot(&v, b);
                for (x, &y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let norm = crate::params::dot(&v, &v).sqrt();
        if norm > T::of(1e-8) {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Log-uniform sample on `[lo, hi]`.
pub(crate) fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    (a + (b - a) * rng.random::<f64>()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let x: f64 = rng.sample(StandardNormal);
                a[i * n + j] = x;
                a[j * n + i] = x;
            }
        }
        a
    }

    #[test]
    fn jacobi_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2, 5, 12] {
            let a = random_symmetric(n, &mut rng);
            let (vals, vecs) = symmetric_eigen(&a, n);
            let m = nalgebra::DMatrix::from_row_slice(n, n, &a);
            let mut reference: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(|x, y| y.partial_cmp(x).unwrap());
            for (x, y) in vals.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()), "{x} vs {y}");
            }
            for (i, v) in vecs.iter().enumerate() {
                let av: Vec<f64> = (0..n)
                    .map(|r| (0..n).map(|c| a[r * n + c] * v[c]).sum())
                    .collect();
                for r in 0..n {
                    assert!((av[r] - vals[i] * v[r]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let diag = [4.0, -1.0, 2.5, 0.3, 7.0];
        let off = [1.0, 0.5, -2.0, 0.01];
        let n = diag.len();
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            dense[i * n + i] = diag[i];
            if i + 1 < n {
                dense[i * n + i + 1] = off[i];
                dense[(i + 1) * n + i] = off[i];
            }
        }
        let (mut vals, z) = tridiagonal_eigen(&diag, &off);
        for j in 0..n {
            for r in 0..n {
                let hv: f64 = (0..n).map(|c| dense[r * n + c] * z[c * n + j]).sum();
                assert!((hv - vals[j] * z[r * n + j]).abs() < 1e-12);
            }
        }
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let (expected, _) = symmetric_eigen(&dense, n);
        for (a, b) in vals.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_with_zero_coupling_splits() {
        let (vals, _) = tridiagonal_eigen(&[1.0, 2.0, 3.0], &[0.0, 0.0]);
        let mut v = vals.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
        let (single, z) = tridiagonal_eigen(&[5.0], &[]);
        assert_eq!((single[0], z[0]), (5.0, 1.0));
    }

    #[test]
    fn random_orthogonal_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q: Vec<Vec<f64>> = random_orthogonal(9, &mut rng);
        for i in 0..9 {
            for j in 0..9 {
                let d = crate::params::dot(&q[i], &q[j]);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((d - expected).abs() < 1e-13);
            }
        }
    }
}
