//! Discrete radial Schrodinger operators `-Delta_{R^m} + W` and their
//! functional calculus.
//!
//! Radial functions `v` are handled through `v~ = r^{(m-1)/2} v`, which turns
//! `-Delta + W` into `-d^2/dr^2 + (m-1)(m-3)/(4r^2) + W`, discretized by the
//! symmetric three-point stencil on a cell-centered grid. The ghost value at
//! the origin is chosen so the stencil is exact on `r^{(m-1)/2}`; at `R_max`
//! the field vanishes.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{sphere_area, RadialGrid};
use crate::tridiag::{symmetric_tridiagonal_eigen, Eigen};

/// Ghost multiplier at the origin for fields behaving like `r^alpha`.
pub fn origin_ghost(alpha: f64) -> f64 {
    2.0 - 3f64.powf(alpha) + 4.0 * alpha * (alpha - 1.0)
}

/// Homogeneous (`|D|^s`) or inhomogeneous (`<D>^s`) weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shift {
    Homogeneous,
    Inhomogeneous,
}

#[derive(Debug)]
pub struct DiscreteRadialOperator {
    pub grid: RadialGrid,
    pub m: usize,
    pub alpha: f64,
    /// Full potential in symmetric variables, centrifugal term included.
    pub potential: Vec<f64>,
    diag: Vec<f64>,
    off: f64,
    eigen: OnceLock<std::result::Result<Eigen, Error>>,
}

impl Clone for DiscreteRadialOperator {
    fn clone(&self) -> Self {
        DiscreteRadialOperator {
            grid: self.grid,
            m: self.m,
            alpha: self.alpha,
            potential: self.potential.clone(),
            diag: self.diag.clone(),
            off: self.off,
            eigen: OnceLock::new(),
        }
    }
}

/// Builds `-Delta_{R^m} + W` for the reduced problem; requires `m >= 5`.
pub fn build_operator(grid: &RadialGrid, m: usize, w: &dyn Fn(f64) -> f64) -> Result<DiscreteRadialOperator> {
    if m < 5 {
        return Err(Error::Dimension(format!("reduced dimension m = {m} must be at least 5")));
    }
    DiscreteRadialOperator::new(grid, m, w)
}

impl DiscreteRadialOperator {
    /// `-Delta_{R^m} + W` for any `m >= 1`.
    pub fn new(grid: &RadialGrid, m: usize, w: &dyn Fn(f64) -> f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        let alpha = (m as f64 - 1.0) / 2.0;
        let centrifugal = alpha * (alpha - 1.0);
        let potential: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| centrifugal / (r * r) + w(r))
            .collect();
        if let Some(j) = potential.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("potential not finite at r = {}", grid.node(j))));
        }
        Ok(Self::from_symmetric(grid, m, alpha, potential))
    }

    pub fn free(grid: &RadialGrid, m: usize) -> Result<Self> {
        Self::new(grid, m, &|_| 0.0)
    }

    /// Operator `-d^2/dr^2 + q` for fields behaving like `r^alpha` at 0.
    pub fn from_symmetric(grid: &RadialGrid, m: usize, alpha: f64, potential: Vec<f64>) -> Self {
        let h2 = grid.dr() * grid.dr();
        let n = grid.n;
        let mut diag: Vec<f64> = potential.iter().map(|q| 2.0 / h2 + q).collect();
        diag[0] -= origin_ghost(alpha) / h2;
        diag[n - 1] += 1.0 / h2;
        DiscreteRadialOperator { grid: *grid, m, alpha, potential, diag, off: -1.0 / h2, eigen: OnceLock::new() }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diagonal(&self) -> f64 {
        self.off
    }

    /// `out = A x` in symmetric variables.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        let o = self.off;
        out[0] = self.diag[0] * x[0] + o * x[1];
        for j in 1..n - 1 {
            out[j] = o * (x[j - 1] + x[j + 1]) + self.diag[j] * x[j];
        }
        out[n - 1] = o * x[n - 2] + self.diag[n - 1] * x[n - 1];
    }

    /// Gershgorin upper bound for the largest eigenvalue.
    pub fn spectral_bound(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |a, d| a.max(d + 2.0 * self.off.abs()))
    }

    pub fn spectrum(&self) -> Result<&Eigen> {
        let e = self.eigen.get_or_init(|| {
            let off = vec![self.off; self.diag.len() - 1];
            symmetric_tridiagonal_eigen(&self.diag, &off)
        });
        e.as_ref().map_err(|e| e.clone())
    }

    pub fn eigenvalues(&self) -> Result<&[f64]> {
        Ok(&self.spectrum()?.values)
    }

    fn node_factor(&self) -> Vec<f64> {
        let s = (sphere_area(self.m) * self.grid.dr()).sqrt();
        self.grid.nodes().iter().map(|r| s * r.powf(self.alpha)).collect()
    }

    /// `v~ = r^alpha v`.
    pub fn to_symmetric(&self, v: &[f64]) -> Vec<f64> {
        self.grid.nodes().iter().zip(v).map(|(r, x)| r.powf(self.alpha) * x).collect()
    }

    pub fn from_symmetric_field(&self, v: &[f64]) -> Vec<f64> {
        self.grid.nodes().iter().zip(v).map(|(r, x)| x / r.powf(self.alpha)).collect()
    }

    /// Coefficients of `v` in the orthonormal eigenbasis of `L^2(R^m)`.
    pub fn coefficients(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.n;
        if v.len() != n {
            return Err(Error::Dimension(format!("field has {} samples, grid has {n}", v.len())));
        }
        let e = self.spectrum()?;
        let x: Vec<f64> = self.node_factor().iter().zip(v).map(|(a, b)| a * b).collect();
        Ok((0..n).map(|j| e.vector(j).iter().zip(&x).map(|(a, b)| a * b).sum()).collect())
    }

    pub fn synthesize(&self, c: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.n;
        let e = self.spectrum()?;
        let mut x = vec![0.0; n];
        for (j, cj) in c.iter().enumerate() {
            if *cj != 0.0 {
                for (xi, ei) in x.iter_mut().zip(e.vector(j)) {
                    *xi += cj * ei;
                }
            }
        }
        Ok(x.iter().zip(self.node_factor()).map(|(a, f)| a / f).collect())
    }

    fn synthesize_complex(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.grid.n;
        let e = self.spectrum()?;
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (j, cj) in c.iter().enumerate() {
            for (xi, ei) in x.iter_mut().zip(e.vector(j)) {
                *xi += cj * ei;
            }
        }
        Ok(x.iter().zip(self.node_factor()).map(|(a, f)| a / f).collect())
    }

    /// Floor used for negative powers of the homogeneous calculus.
    pub fn eigenvalue_floor(&self) -> f64 {
        (std::f64::consts::PI / (2.0 * self.grid.r_max)).powi(2)
    }

    fn check_nonnegative(&self) -> Result<()> {
        let e = self.spectrum()?;
        let top = e.values.last().copied().unwrap_or(1.0).abs().max(1.0);
        if e.values[0] < -1e-9 * top {
            return Err(Error::NegativeEigenvalue { value: e.values[0] });
        }
        Ok(())
    }

    /// Multiplier `lambda^{s/2}` (homogeneous) or `(1 + lambda)^{s/2}`.
    pub fn multiplier(&self, s: f64, shift: Shift) -> Result<Vec<f64>> {
        if s != 0.0 {
            self.check_nonnegative()?;
        }
        let floor = self.eigenvalue_floor();
        Ok(self
            .eigenvalues()?
            .iter()
            .map(|&l| match shift {
                Shift::Homogeneous => {
                    let l = if s < 0.0 { l.max(floor) } else { l.max(0.0) };
                    if s == 0.0 {
                        1.0
                    } else {
                        l.powf(s / 2.0)
                    }
                }
                Shift::Inhomogeneous => (1.0 + l.max(0.0)).powf(s / 2.0),
            })
            .collect())
    }

    /// `|| |D|^s v ||_{L^2(R^m)}` or `|| <D>^s v ||`.
    pub fn frac_norm(&self, s: f64, shift: Shift, v: &[f64]) -> Result<f64> {
        let c = self.coefficients(v)?;
        let mult = self.multiplier(s, shift)?;
        Ok(c.iter().zip(&mult).map(|(c, w)| (w * c) * (w * c)).sum::<f64>().sqrt())
    }

    /// Applies `|D|^s` or `<D>^s` and returns the sampled result.
    pub fn apply_power(&self, s: f64, shift: Shift, v: &[f64]) -> Result<Vec<f64>> {
        let c = self.coefficients(v)?;
        let mult = self.multiplier(s, shift)?;
        let scaled: Vec<f64> = c.iter().zip(&mult).map(|(a, b)| a * b).collect();
        self.synthesize(&scaled)
    }

    fn frequencies(&self, nu: f64) -> Result<Vec<f64>> {
        let e = self.eigenvalues()?;
        if nu + e[0] < -1e-9 * e.last().unwrap().abs().max(1.0) {
            return Err(Error::NegativeEigenvalue { value: e[0] + nu });
        }
        Ok(e.iter().map(|l| (l + nu).max(0.0).sqrt()).collect())
    }

    /// Exact solution of `v_tt + (A + nu) v = 0` at time `t`: returns `(v, v_t)`.
    pub fn evolve_linear(&self, f: &[f64], g: &[f64], nu: f64, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let cf = self.coefficients(f)?;
        let cg = self.coefficients(g)?;
        let om = self.frequencies(nu)?;
        let mut cv = vec![0.0; cf.len()];
        let mut cd = vec![0.0; cf.len()];
        for j in 0..cf.len() {
            let w = om[j];
            let (s, c) = (w * t).sin_cos();
            let sinc = if w * t.abs() < 1e-12 { t } else { s / w };
            cv[j] = c * cf[j] + sinc * cg[j];
            cd[j] = -w * s * cf[j] + c * cg[j];
        }
        Ok((self.synthesize(&cv)?, self.synthesize(&cd)?))
    }

    /// `e^{i t sqrt(A + nu)} f` for a list of times.
    pub fn half_wave(&self, f: &[f64], nu: f64, times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let cf = self.coefficients(f)?;
        let om = self.frequencies(nu)?;
        times
            .iter()
            .map(|&t| {
                let c: Vec<Complex64> = cf
                    .iter()
                    .zip(&om)
                    .map(|(c, w)| Complex64::from_polar(1.0, w * t) * c)
                    .collect();
                self.synthesize_complex(&c)
            })
            .collect()
    }

    /// `1/2 sum (lambda |c_j|^2 + |c'_j|^2)`, conserved by [`evolve_linear`](Self::evolve_linear) when `nu = 0`.
    pub fn spectral_energy(&self, v: &[f64], vt: &[f64]) -> Result<f64> {
        let c = self.coefficients(v)?;
        let d = self.coefficients(vt)?;
        let e = self.eigenvalues()?;
        Ok(0.5 * (0..c.len()).map(|j| e[j] * c[j] * c[j] + d[j] * d[j]).sum::<f64>())
    }

    /// `index,eigenvalue` lines with a header.
    pub fn spectrum_csv(&self) -> Result<String> {
        let mut s = String::from("index,eigenvalue\n");
        for (i, v) in self.eigenvalues()?.iter().enumerate() {
            s.push_str(&format!("{i},{v:.12e}\n"));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ghost_reproduces_parity() {
        assert_relative_eq!(origin_ghost(1.0), -1.0);
        assert_relative_eq!(origin_ghost(2.0), 1.0);
        assert_relative_eq!(origin_ghost(3.0), -1.0, epsilon = 1e-12);
        assert_relative_eq!(origin_ghost(0.0), 1.0);
    }

    #[test]
    fn eigenvector_has_expected_fractional_norm() {
        let g = RadialGrid::new(10.0, 200).unwrap();
        let op = DiscreteRadialOperator::free(&g, 5).unwrap();
        let e = op.spectrum().unwrap();
        let j = 7;
        let mut c = vec![0.0; g.n];
        c[j] = 1.0;
        let v = op.synthesize(&c).unwrap();
        for s in [-1.0, -0.5, 0.5, 1.0, 2.0] {
            let got = op.frac_norm(s, Shift::Homogeneous, &v).unwrap();
            assert_relative_eq!(got, e.values[j].powf(s / 2.0), max_relative = 1e-10);
        }
        assert_relative_eq!(op.frac_norm(0.0, Shift::Homogeneous, &v).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn low_eigenvalues_converge_to_bessel_zeros() {
        // For m = 3 the radial Dirichlet problem on a ball of radius R has
        // eigenvalues (j pi / R)^2.
        let g = RadialGrid::new(1.0, 400).unwrap();
        let op = DiscreteRadialOperator::free(&g, 3).unwrap();
        let e = op.eigenvalues().unwrap();
        for j in 0..3 {
            let exact = ((j + 1) as f64 * std::f64::consts::PI).powi(2);
            assert_relative_eq!(e[j], exact, max_relative = 1e-4);
        }
    }

    #[test]
    fn linear_evolution_conserves_spectral_energy() {
        let g = RadialGrid::new(20.0, 200).unwrap();
        let op = DiscreteRadialOperator::free(&g, 5).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
        let z = vec![0.0; g.n];
        let e0 = op.spectral_energy(&f, &z).unwrap();
        let (v, vt) = op.evolve_linear(&f, &z, 0.0, 3.7).unwrap();
        assert_relative_eq!(op.spectral_energy(&v, &vt).unwrap(), e0, max_relative = 1e-10);
    }
}
