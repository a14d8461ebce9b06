//! Symmetric tridiagonal eigensolver (implicit QL with Wilkinson shifts) and
//! a complex tridiagonal linear solver.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigen-decomposition `T = E diag(values) E^T` with eigenvalues ascending.
/// `vectors` is column-major: eigenvector `j` is `vectors[j*n..(j+1)*n]`.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl Eigen {
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }
}

/// `diag` has length `n`, `off[i]` couples rows `i` and `i+1` (length `n-1`).
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<Eigen> {
    let n = diag.len();
    if off.len() + 1 != n {
        return Err(Error::Dimension(format!("off-diagonal length {} for order {n}", off.len())));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    let eps = f64::EPSILON;
    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Domain(format!("eigen iteration did not converge at row {l}")));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let hh = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = hh + s * (c * g + s * d[i]);
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
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
        e[l] = 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend_from_slice(&z[i * n..(i + 1) * n]);
    }
    Ok(Eigen { values, vectors, n })
}

/// Solves the tridiagonal system with sub-diagonal `lower`, diagonal `diag`,
/// super-diagonal `upper` by elimination without pivoting.
pub fn solve_tridiagonal(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    if lower.len() + 1 != n || upper.len() + 1 != n || rhs.len() != n {
        return Err(Error::Dimension("inconsistent tridiagonal system".into()));
    }
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let tiny = 1e-300;
    let mut b = diag[0];
    if b.norm() < tiny {
        return Err(Error::SingularSystem { row: 0 });
    }
    x[0] = rhs[0] / b;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / b;
        b = diag[i] - lower[i - 1] * c[i - 1];
        if b.norm() < tiny || !b.is_finite() {
            return Err(Error::SingularSystem { row: i });
        }
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        let t = c[i] * x[i + 1];
        x[i] -= t;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 50;
        let e = symmetric_tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        for j in 0..n {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert_relative_eq!(e.values[j], exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal_and_diagonalize() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 1.0 + (i as f64 * 0.11).cos()).collect();
        let e = symmetric_tridiagonal_eigen(&diag, &off).unwrap();
        for a in 0..n {
            let va = e.vector(a);
            let mut tv = vec![0.0; n];
            for i in 0..n {
                tv[i] = diag[i] * va[i];
                if i > 0 {
                    tv[i] += off[i - 1] * va[i - 1];
                }
                if i + 1 < n {
                    tv[i] += off[i] * va[i + 1];
                }
            }
            for i in 0..n {
                assert!((tv[i] - e.values[a] * va[i]).abs() < 1e-11);
            }
            for b in 0..n {
                let dot: f64 = va.iter().zip(e.vector(b)).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn complex_solve_recovers_solution() {
        let n = 30;
        let lower: Vec<Complex64> = (0..n - 1).map(|i| Complex64::new(1.0, 0.1 * i as f64)).collect();
        let upper = lower.clone();
        let diag: Vec<Complex64> = (0..n).map(|i| Complex64::new(-4.0, 1.0 + i as f64 * 0.01)).collect();
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), 0.5)).collect();
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            rhs[i] = diag[i] * x[i];
            if i > 0 {
                rhs[i] += lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                rhs[i] += upper[i] * x[i + 1];
            }
        }
        let y = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
