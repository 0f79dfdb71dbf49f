//! Dense helpers for the small systems that come up in replication:
//! pivoted elimination, normal equations with dependent-column reporting,
//! symmetric eigenvalues for condition numbers and covariance kernels.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major square matrix product with a vector.
pub fn mat_vec<S: Real>(m: &[Vec<S>], v: &[S]) -> Vec<S> {
    m.iter()
        .map(|row| row.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum())
        .collect()
}

pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<S: Real>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Determinant via LU with partial pivoting.
pub fn det<S: Real>(m: &[Vec<S>]) -> S {
    let n = m.len();
    let mut a: Vec<Vec<S>> = m.to_vec();
    let mut sign = S::one();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        if a[piv][k] == S::zero() {
            return S::zero();
        }
        if piv != k {
            a.swap(piv, k);
            sign = -sign;
        }
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] = a[i][j] - f * a[k][j];
            }
        }
    }
    (0..n).fold(sign, |acc, k| acc * a[k][k])
}

/// Solves A x = b by pivoted elimination. Errors on a singular system.
pub fn solve<S: Real>(a: &[Vec<S>], b: &[S]) -> Result<Vec<S>> {
    let n = a.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap())
            .ok_or_else(|| Error::Data("empty system".into()))?;
        if m[piv][k].abs() <= S::of(1e-13) {
            return Err(Error::Degenerate(format!("singular system at pivot {k}")));
        }
        m.swap(piv, k);
        rhs.swap(piv, k);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] = m[i][j] - f * m[k][j];
            }
            rhs[i] = rhs[i] - f * rhs[k];
        }
    }
    let mut x = vec![S::zero(); n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s = s - m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    Ok(x)
}

/// Least squares via normal equations on columns `cols` with weights `w`
/// (all positive, summing to one), target `y`. A rank-deficient Gram matrix
/// is reported with the indices of a dependent column set.
pub fn weighted_least_squares<S: Real>(cols: &[Vec<S>], w: &[S], y: &[S]) -> Result<Vec<S>> {
    let m = cols.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut gram = vec![vec![S::zero(); m]; m];
    let mut rhs = vec![S::zero(); m];
    for i in 0..m {
        for j in i..m {
            let g: S = (0..w.len()).map(|k| w[k] * cols[i][k] * cols[j][k]).sum();
            gram[i][j] = g;
            gram[j][i] = g;
        }
        rhs[i] = (0..w.len()).map(|k| w[k] * cols[i][k] * y[k]).sum();
    }
    match solve(&gram, &rhs) {
        Ok(x) => Ok(x),
        Err(_) => {
            let dep = dependent_columns(&gram);
            Err(Error::Degenerate(format!(
                "linearly dependent instrument payoffs: columns {dep:?}"
            )))
        }
    }
}

/// Indices of columns in the kernel support of a symmetric PSD matrix.
fn dependent_columns<S: Real>(gram: &[Vec<S>]) -> Vec<usize> {
    let (vals, vecs) = sym_eigen(gram);
    let scale = vals.iter().fold(S::zero(), |a, &b| a.max(b.abs())).max(S::one());
    let mut dep = Vec::new();
    for (k, &v) in vals.iter().enumerate() {
        if v.abs() <= scale * S::of(1e-12) {
            for (i, row) in vecs.iter().enumerate() {
                if row[k].abs() > S::of(1e-6) && !dep.contains(&i) {
                    dep.push(i);
                }
            }
        }
    }
    dep.sort_unstable();
    dep
}

/// Cyclic Jacobi eigen decomposition of a symmetric matrix. Returns
/// (eigenvalues, matrix whose columns are the eigenvectors).
pub fn sym_eigen<S: Real>(m: &[Vec<S>]) -> (Vec<S>, Vec<Vec<S>>) {
    let n = m.len();
    let mut a: Vec<Vec<S>> = m.to_vec();
    let mut v = vec![vec![S::zero(); n]; n];
    for i in 0..n {
        v[i][i] = S::one();
    }
    for _sweep in 0..100 {
        let mut off = S::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off + a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= S::of(1e-30) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= S::of(1e-300) {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (S::of(2.0) * a[p][q]);
                let t = {
                    let sign = if theta >= S::zero() { S::one() } else { -S::one() };
                    sign / (theta.abs() + (theta * theta + S::one()).sqrt())
                };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[i][i]).collect();
    (vals, v)
}

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix.
pub fn condition_number<S: Real>(m: &[Vec<S>]) -> S {
    let (vals, _) = sym_eigen(m);
    let hi = vals.iter().fold(S::zero(), |a, &b| a.max(b.abs()));
    let lo = vals.iter().fold(S::infinity(), |a, &b| a.min(b.abs()));
    if lo == S::zero() {
        S::infinity()
    } else {
        hi / lo
    }
}

/// Orthonormal basis of the (numerical) kernel of a symmetric PSD matrix.
pub fn kernel_basis<S: Real>(m: &[Vec<S>], rel_tol: S) -> Vec<Vec<S>> {
    let n = m.len();
    let (vals, vecs) = sym_eigen(m);
    let scale = vals.iter().fold(S::zero(), |a, &b| a.max(b.abs())).max(S::one());
    let mut basis = Vec::new();
    for (k, &val) in vals.iter().enumerate() {
        if val.abs() <= scale * rel_tol {
            basis.push((0..n).map(|i| vecs[i][k]).collect());
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_det() {
        let a: Vec<Vec<f64>> = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
        assert!((det(&a) - 5.0).abs() < 1e-12);
        let sing: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(det(&sing).abs() < 1e-12);
        assert!(solve(&sing, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn eigen_2x2() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let (mut vals, _) = sym_eigen::<f64>(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        let cond = condition_number::<f64>(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!((cond - 3.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_exact_fit() {
        // y = 2 c0 - c1 exactly.
        let cols: Vec<Vec<f64>> = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]];
        let y = vec![2.0, -1.0, 1.0];
        let w = vec![0.3, 0.3, 0.4];
        let x = weighted_least_squares(&cols, &w, &y).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn dependent_columns_reported() {
        let cols = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]];
        let w = vec![0.25, 0.25, 0.5];
        let err = weighted_least_squares(&cols, &w, &[1.0, 1.0, 1.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("0") && msg.contains("1"), "{msg}");
    }

    #[test]
    fn kernel_of_rank_one() {
        let m: Vec<Vec<f64>> = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let basis = kernel_basis(&m, 1e-10);
        assert_eq!(basis.len(), 1);
        let k = &basis[0];
        assert!((k[0] + k[1]).abs() < 1e-10);
        assert!((norm2(k) - 1.0).abs() < 1e-12);
    }
}
