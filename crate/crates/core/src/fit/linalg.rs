//! Dense linear algebra for the few-parameter normal equations.

use alloc::vec;
use alloc::vec::Vec;

/// Solves `a·x = b` for a row-major `n×n` matrix by Gaussian elimination
/// with partial pivoting. `None` if the matrix is numerically singular.
pub fn solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(libm::fabs(*v)));
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| libm::fabs(m[i * n + col]).total_cmp(&libm::fabs(m[j * n + col])))?;
        if libm::fabs(m[piv * n + col]) <= 1e-300 + scale * 1e-15 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    Some(x)
}

/// Inverse of a row-major `n×n` matrix.
pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let col = solve(a, &e)?;
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    Some(inv)
}

/// `JᵀJ` and `Jᵀr` of a row-major `m×n` Jacobian.
pub fn normal_equations(jac: &[f64], r: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; n * n];
    let mut g = vec![0.0; n];
    for (row, &ri) in jac.chunks_exact(n).zip(r) {
        for i in 0..n {
            g[i] += row[i] * ri;
            for j in 0..n {
                a[i * n + j] += row[i] * row[j];
            }
        }
    }
    (a, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = solve(&a, &[5.0, 3.0, 4.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_none() {
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 2.0]).is_none());
        assert!(invert(&[0.0; 4], 2).is_none());
    }

    #[test]
    fn inverse_round_trips() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let inv = invert(&a, 2).unwrap();
        let p = [a[0] * inv[0] + a[1] * inv[2], a[0] * inv[1] + a[1] * inv[3]];
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
    }
}
