//! Resolvent solves for radial second-order operators.
//!
//! All three coefficient forms are reduced to `(A - kappa^2) u~ = -f~` with
//! `A = -d^2/dr^2 + sigma` after the substitution `u~ = e^{B/2} u`,
//! `B' = a`, where `a` is the first-order coefficient.

use num_complex::Complex64;

use crate::admissibility::compute_h_tilde;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::RadialGrid;
use crate::profiles::MetricProfile;
use crate::spectral::origin_ghost;
use crate::tridiag::solve_tridiagonal;

/// Minimum `Im(kappa) * R_max` so the outgoing solution has decayed at the boundary.
pub const MIN_DECAY_PRODUCT: f64 = 5.0;

pub enum Coefficients<'a> {
    /// `v'' + (m-1)/r v' - c(r) v + kappa^2 v = g` on `R^m`.
    Reduced { m: usize, c: &'a (dyn Fn(f64) -> f64 + Sync) },
    /// `u'' + (n-1) h'/h u' + kappa^2 u = f` on the manifold.
    Manifold { profile: &'a MetricProfile, n: usize },
    /// `u'' + a(r) u' - c(r) u + kappa^2 u = f`, with `a ~ (n-1)/r` at 0.
    General { n: usize, a: &'a Expr, c: &'a Expr },
}

#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub nodes: Vec<f64>,
    pub u: Vec<Complex64>,
    pub u_sym: Vec<Complex64>,
    pub rhs_sym: Vec<Complex64>,
}

impl ResolventSolution {
    /// `|| u / r ||_gamma / || r f ||_gamma`; zero for zero data.
    pub fn smoothing_ratio(&self) -> f64 {
        let num: f64 = self.u_sym.iter().zip(&self.nodes).map(|(u, r)| u.norm_sqr() / (r * r)).sum();
        let den: f64 = self.rhs_sym.iter().zip(&self.nodes).map(|(f, r)| f.norm_sqr() * r * r).sum();
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }
}

fn cumulative_b(a: &Expr, nodes: &[f64]) -> Vec<f64> {
    // B(r_j) = -int_{r_j}^{r_ref} a, with r_ref the last node.
    let gl = crate::quadrature::GaussLegendre::new(16);
    let n = nodes.len();
    let mut b = vec![0.0; n];
    for j in (0..n - 1).rev() {
        let seg = gl.integrate(nodes[j], nodes[j + 1], |r| a.eval(r));
        b[j] = b[j + 1] - seg;
    }
    b
}

/// `gamma = r^{1-n} e^{B}` must have a finite positive limit at 0.
fn check_gamma_limit(n: usize, a: &Expr, nodes: &[f64]) -> Result<()> {
    let r0 = nodes[0];
    let probe: Vec<f64> = [1e-6, 1e-4, 1e-2].iter().map(|f| f * r0).collect();
    let mut vals = Vec::new();
    for &rp in &probe {
        // int_{rp}^{r0} a by Gauss-Legendre in log r.
        let (l0, l1) = (rp.ln(), r0.ln());
        let gl = crate::quadrature::GaussLegendre::new(32);
        let integral = gl.integrate(l0, l1, |t| {
            let r = t.exp();
            a.eval(r) * r
        });
        vals.push((1.0 - n as f64) * rp.ln() - integral);
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::HypothesisFail("gamma = r^(1-n) e^B is not finite near 0".into()));
    }
    let spread = (vals[0] - vals[1]).abs().max((vals[1] - vals[2]).abs());
    if spread > 1e-3 {
        return Err(Error::HypothesisFail(format!(
            "gamma = r^(1-n) e^B has no positive limit at 0 (log drift {spread:.3e})"
        )));
    }
    Ok(())
}

/// Solves the resolvent equation at spectral parameter `kappa` (Im kappa > 0).
pub fn resolve(coeffs: &Coefficients, kappa: Complex64, f: &[f64], grid: &RadialGrid) -> Result<ResolventSolution> {
    if !(kappa.im > 0.0) {
        return Err(Error::Domain(format!("kappa = {kappa} must lie in the upper half plane")));
    }
    let product = kappa.im * grid.r_max;
    if product < MIN_DECAY_PRODUCT {
        return Err(Error::TruncationTooSmall { product, required: MIN_DECAY_PRODUCT });
    }
    let nodes = grid.nodes();
    if f.len() != nodes.len() {
        return Err(Error::Dimension(format!("data has {} samples, grid has {}", f.len(), nodes.len())));
    }
    // ln of e^{B/2}, the potential sigma + c, and the origin exponent.
    let (half_b, q, alpha): (Vec<f64>, Vec<f64>, f64) = match coeffs {
        Coefficients::Reduced { m, c } => return resolve_reduced(*m, c, kappa, f, grid),
        Coefficients::Manifold { profile, n } => {
            let alpha = (*n as f64 - 1.0) / 2.0;
            let hb = nodes.iter().map(|&r| alpha * profile.ln_value(r)).collect();
            let q = nodes.iter().map(|&r| compute_h_tilde(profile, *n, r)).collect::<Result<Vec<_>>>()?;
            (hb, q, alpha)
        }
        Coefficients::General { n, a, c } => {
            check_gamma_limit(*n, a, &nodes)?;
            let alpha = (*n as f64 - 1.0) / 2.0;
            let b = cumulative_b(a, &nodes);
            let hb = b.iter().map(|v| 0.5 * v).collect();
            let q = nodes
                .iter()
                .map(|&r| {
                    let s = a.series(r, 2)?;
                    let (av, da) = (s.value(), s.derivative(1));
                    Ok(0.5 * da + 0.25 * av * av + c.eval(r))
                })
                .collect::<Result<Vec<_>>>()?;
            (hb, q, alpha)
        }
    };
    if let Some(j) = q.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("potential not finite at r = {}", nodes[j])));
    }
    let n = nodes.len();
    let h2 = grid.dr() * grid.dr();
    let k2 = kappa * kappa;
    let mut diag: Vec<Complex64> = q.iter().map(|&qj| Complex64::new(2.0 / h2 + qj, 0.0) - k2).collect();
    diag[0] -= origin_ghost(alpha) / h2;
    diag[n - 1] += 1.0 / h2;
    let off = vec![Complex64::new(-1.0 / h2, 0.0); n - 1];
    let rhs_sym: Vec<Complex64> = f
        .iter()
        .zip(&half_b)
        .map(|(fv, hb)| Complex64::new(fv * hb.exp(), 0.0))
        .collect();
    let neg: Vec<Complex64> = rhs_sym.iter().map(|v| -v).collect();
    let u_sym = solve_tridiagonal(&off, &diag, &off, &neg)?;
    let u = u_sym.iter().zip(&half_b).map(|(v, hb)| v * (-hb).exp()).collect();
    Ok(ResolventSolution { nodes, u, u_sym, rhs_sym })
}

/// Finite volumes on the cells `[j dr, (j+1) dr]` with exact `r^{m-1}` cell
/// volumes; no inner face at the origin, Dirichlet face at `R_max`.
fn resolve_reduced(
    m: usize,
    c: &(dyn Fn(f64) -> f64 + Sync),
    kappa: Complex64,
    f: &[f64],
    grid: &RadialGrid,
) -> Result<ResolventSolution> {
    let nodes = grid.nodes();
    let n = nodes.len();
    let mf = m as f64;
    let alpha = (mf - 1.0) / 2.0;
    // Face areas j^{m-1} and cell volumes ((j+1)^m - j^m)/m, both in units of dr^{m-1}.
    let face = |j: usize| (j as f64).powf(mf - 1.0);
    let vol: Vec<f64> = (0..n).map(|j| (((j + 1) as f64).powf(mf) - (j as f64).powf(mf)) / mf).collect();
    let h2 = grid.dr() * grid.dr();
    let k2 = kappa * kappa;
    let mut diag = Vec::with_capacity(n);
    for (j, &r) in nodes.iter().enumerate() {
        let cj = c(r);
        if !cj.is_finite() {
            return Err(Error::Domain(format!("potential not finite at r = {r}")));
        }
        let outer = if j == n - 1 { 2.0 * face(n) } else { face(j + 1) };
        diag.push(Complex64::new((face(j) + outer) / (vol[j] * h2) + cj, 0.0) - k2);
    }
    let off: Vec<Complex64> = (0..n - 1)
        .map(|j| Complex64::new(-face(j + 1) / ((vol[j] * vol[j + 1]).sqrt() * h2), 0.0))
        .collect();
    let neg: Vec<Complex64> = f.iter().zip(&vol).map(|(fv, v)| Complex64::new(-fv * v.sqrt(), 0.0)).collect();
    let y = solve_tridiagonal(&off, &diag, &off, &neg)?;
    let u: Vec<Complex64> = y.iter().zip(&vol).map(|(y, v)| y / v.sqrt()).collect();
    let u_sym = u.iter().zip(&nodes).map(|(u, r)| u * r.powf(alpha)).collect();
    let rhs_sym = f.iter().zip(&nodes).map(|(fv, r)| Complex64::new(fv * r.powf(alpha), 0.0)).collect();
    Ok(ResolventSolution { nodes, u, u_sym, rhs_sym })
}
