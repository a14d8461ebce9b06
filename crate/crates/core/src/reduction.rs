//! Reduction of the equivariant wave map to a radial semilinear wave
//! equation on `R^m`, `m = n + 2k`.
//!
//! With `w = r^{k+(n-1)/2} / h^{(n-1)/2}` and `phi = w psi`, the field `psi`
//! solves `psi_tt - Delta_{R^m} psi + V psi + r^{m-1} h^{-n-1} psi^3 Gamma(w psi) = 0`.

use num_rational::Ratio;
use serde::Serialize;

use crate::admissibility::estimate_h_infinity;
use crate::error::{Error, Result};
use crate::jet::MAX_ORDER;
use crate::profiles::MetricProfile;

/// Below this radius `V` is evaluated from the Taylor expansion of `h` at 0.
pub const NEAR_ZERO: f64 = 1e-3;

pub fn lbar(n: usize, k: usize) -> f64 {
    (k * (k + n - 2)) as f64
}

fn check(n: usize, k: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Config(format!("dimension n = {n} must be at least 3")));
    }
    if k < 1 {
        return Err(Error::Config(format!("equivariance class k = {k} must be at least 1")));
    }
    Ok(())
}

/// `w(r) = r^{k+(n-1)/2} / h(r)^{(n-1)/2}`, evaluated through logarithms.
pub fn weight_w(profile: &MetricProfile, n: usize, k: usize, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Domain(format!("weight evaluated at r = {r}")));
    }
    let half = (n as f64 - 1.0) / 2.0;
    let lh = profile.ln_value(r);
    if !lh.is_finite() {
        return Err(Error::Domain(format!("h(r) not positive at r = {r}")));
    }
    Ok((k as f64 * r.ln() + half * (r.ln() - lh)).exp())
}

/// Taylor coefficients of `h` at 0 when `h` is normalized there.
fn origin_coeffs(profile: &MetricProfile) -> Option<Vec<f64>> {
    let s = profile.series(0.0, MAX_ORDER + 1).ok()?;
    let c: Vec<f64> = (0..s.len()).map(|k| s.taylor(k)).collect();
    if c[0] == 0.0 && c[1] == 1.0 && c[2] == 0.0 && c.iter().all(|v| v.is_finite()) {
        Some(c)
    } else {
        None
    }
}

fn poly(c: &[f64], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * r + v)
}

/// `V` for a given `lbar`; `lbar = 0` gives the potential of `k = 0`.
fn potential(profile: &MetricProfile, n: usize, lb: f64, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Domain(format!("potential evaluated at r = {r}")));
    }
    let nf = n as f64;
    if r < NEAR_ZERO {
        if let Some(c) = origin_coeffs(profile) {
            // h = r + r^3 h1 with h1 = sum_{j>=3} c_j r^{j-3}.
            let h1c = &c[3..];
            let h1 = poly(h1c, r);
            let dh1c: Vec<f64> = h1c.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect();
            let dh1 = poly(&dh1c, r);
            let d2c: Vec<f64> = c.iter().enumerate().skip(2).map(|(j, v)| (j * (j - 1)) as f64 * v).collect();
            let h2 = poly(&d2c, r);
            let h = r + r * r * r * h1;
            // Profiles that are flat but not analytic at 0 (cutoffs) are not
            // represented by their Taylor polynomial; use the direct formula.
            let direct = profile.series(r, 3)?;
            let h2_direct = direct.derivative(2);
            if (h2 - h2_direct).abs() > 1e-10 * (h2_direct.abs() + r) {
                return direct_potential(&direct, nf, lb, r);
            }
            let dh = 1.0 + 3.0 * r * r * h1 + r * r * r * dh1;
            let minus = 2.0 * r * r * r * h1 + r.powi(4) * dh1;
            let a = minus * (r * dh + h) / (r * r * h * h);
            let b = -r * h1 * (2.0 * r + r * r * r * h1) / (h * h);
            return Ok((nf - 1.0) / 2.0 * (h2 / h + (nf - 3.0) / 2.0 * a) + lb * b);
        }
    }
    direct_potential(&profile.series(r, 3)?, nf, lb, r)
}

fn direct_potential(s: &crate::jet::Series, nf: f64, lb: f64, r: f64) -> Result<f64> {
    let d1 = s.derivative_ratio(1, &s);
    let d2 = s.derivative_ratio(2, &s);
    let r_over_h = (r.ln() - s.ln_abs_value()).exp() * s.normalized()[0].signum();
    let a = d1 * d1 - 1.0 / (r * r);
    let b = (r_over_h * r_over_h - 1.0) / (r * r);
    let v = (nf - 1.0) / 2.0 * (d2 + (nf - 3.0) / 2.0 * a) + lb * b;
    if !v.is_finite() {
        return Err(Error::Domain(format!("potential not finite at r = {r}")));
    }
    Ok(v)
}

pub fn compute_v(profile: &MetricProfile, n: usize, k: usize, r: f64) -> Result<f64> {
    check(n, k)?;
    potential(profile, n, lbar(n, k), r)
}

pub fn compute_v0(profile: &MetricProfile, n: usize, r: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::Config(format!("dimension n = {n} must be at least 3")));
    }
    potential(profile, n, 0.0, r)
}

/// Exponent indices attached to the reduced dimension `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Indices {
    pub m: i64,
    pub p: Ratio<i64>,
    pub q: Ratio<i64>,
    pub a: Ratio<i64>,
    pub a_prime: Ratio<i64>,
    pub b: Ratio<i64>,
}

impl Indices {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        check(n, k)?;
        let m = (n + 2 * k) as i64;
        let r = Ratio::new;
        Ok(Indices {
            m,
            p: r(4 * (m + 1), m + 3),
            q: r(4 * m * (m + 1), 2 * m * m - m - 5),
            a: r(2 * (m + 1), m - 1),
            a_prime: r(2 * (m + 1), m + 3),
            b: r(4 * m * (m + 1), 2 * m * m - m - 5),
        })
    }

    /// `2/p + (m-1)/q == (m-1)/2` together with the range restrictions.
    pub fn wave_admissible(m: i64, p: Ratio<i64>, q: Ratio<i64>) -> bool {
        let two = Ratio::from_integer(2);
        let line = two / p + Ratio::from_integer(m - 1) / q == Ratio::new(m - 1, 2);
        let upper = if m > 3 { q < Ratio::new(2 * (m - 1), m - 3) } else { true };
        line && p > two && q >= two && upper
    }

    /// `1/p + m/q == (m-1)/2`, the scaling relation the indices satisfy for every `m`.
    pub fn sobolev_line(m: i64, p: Ratio<i64>, q: Ratio<i64>) -> bool {
        Ratio::from_integer(1) / p + Ratio::from_integer(m) / q == Ratio::new(m - 1, 2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PhiToPsi,
    PsiToPhi,
}

/// Maps sampled `phi` to `psi = phi / w` or back.
pub fn transform_field(
    direction: Direction,
    field: &[f64],
    nodes: &[f64],
    profile: &MetricProfile,
    n: usize,
    k: usize,
) -> Result<Vec<f64>> {
    check(n, k)?;
    if field.len() != nodes.len() {
        return Err(Error::Dimension(format!("field has {} samples, grid has {}", field.len(), nodes.len())));
    }
    field
        .iter()
        .zip(nodes)
        .map(|(&f, &r)| {
            let w = weight_w(profile, n, k, r)?;
            Ok(match direction {
                Direction::PhiToPsi => f / w,
                Direction::PsiToPhi => f * w,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialSample {
    pub r: f64,
    pub v: f64,
    pub w_potential: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionSummary {
    pub profile: String,
    pub n: usize,
    pub k: usize,
    pub m: i64,
    pub lbar: f64,
    pub h_infinity: f64,
    pub indices: IndexStrings,
    pub samples: Vec<PotentialSample>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexStrings {
    pub p: String,
    pub q: String,
    pub a: String,
    pub a_prime: String,
    pub b: String,
}

/// The reduced problem: potentials, weight and indices for one `(h, n, k)`.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    pub profile: MetricProfile,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub lbar: f64,
    pub h_infinity: f64,
    pub indices: Indices,
}

impl ReducedProblem {
    pub fn new(profile: &MetricProfile, n: usize, k: usize) -> Result<Self> {
        check(n, k)?;
        let h_infinity = estimate_h_infinity(profile, n)?.value;
        Ok(ReducedProblem {
            profile: profile.clone(),
            n,
            k,
            m: n + 2 * k,
            lbar: lbar(n, k),
            h_infinity,
            indices: Indices::new(n, k)?,
        })
    }

    pub fn v(&self, r: f64) -> Result<f64> {
        potential(&self.profile, self.n, self.lbar, r)
    }

    /// `W = V - h_inf`.
    pub fn w_potential(&self, r: f64) -> Result<f64> {
        Ok(self.v(r)? - self.h_infinity)
    }

    pub fn weight(&self, r: f64) -> Result<f64> {
        weight_w(&self.profile, self.n, self.k, r)
    }

    /// `r^{m-1} / h^{n+1}`, the coefficient of `psi^3 Gamma(w psi)`.
    pub fn cubic_coefficient(&self, r: f64) -> Result<f64> {
        let lh = self.profile.ln_value(r);
        if !lh.is_finite() {
            return Err(Error::Domain(format!("h(r) not positive at r = {r}")));
        }
        Ok(((self.m as f64 - 1.0) * r.ln() - (self.n as f64 + 1.0) * lh).exp())
    }

    pub fn summary(&self, radii: &[f64]) -> Result<ReductionSummary> {
        let samples = radii
            .iter()
            .map(|&r| {
                let v = self.v(r)?;
                Ok(PotentialSample { r, v, w_potential: v - self.h_infinity, weight: self.weight(r)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let i = &self.indices;
        Ok(ReductionSummary {
            profile: self.profile.label(),
            n: self.n,
            k: self.k,
            m: i.m,
            lbar: self.lbar,
            h_infinity: self.h_infinity,
            indices: IndexStrings {
                p: i.p.to_string(),
                q: i.q.to_string(),
                a: i.a.to_string(),
                a_prime: i.a_prime.to_string(),
                b: i.b.to_string(),
            },
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_potential_vanishes() {
        let p = MetricProfile::flat();
        for r in [1e-4, 0.5, 3.0] {
            assert_eq!(compute_v(&p, 3, 1, r).unwrap(), 0.0);
            assert!(compute_v(&p, 5, 2, r).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn near_zero_branch_is_continuous() {
        let p = MetricProfile::hyperbolic();
        let below = compute_v(&p, 4, 2, NEAR_ZERO * (1.0 - 1e-9)).unwrap();
        let above = compute_v(&p, 4, 2, NEAR_ZERO * (1.0 + 1e-9)).unwrap();
        assert_relative_eq!(below, above, max_relative = 1e-7);
    }

    #[test]
    fn indices_for_n3_k1() {
        let i = Indices::new(3, 1).unwrap();
        assert_eq!(i.m, 5);
        assert_eq!(i.p, Ratio::from_integer(3));
        assert_eq!(i.q, Ratio::from_integer(3));
        assert_eq!(i.a, Ratio::new(3, 1));
        assert_eq!(i.a_prime, Ratio::new(3, 2));
        assert!(Indices::wave_admissible(5, i.p, i.q));
    }

    #[test]
    fn transform_round_trips() {
        let p = MetricProfile::hyperbolic();
        let nodes = [0.1, 1.0, 5.0];
        let f = [0.3, -0.2, 0.01];
        let psi = transform_field(Direction::PhiToPsi, &f, &nodes, &p, 3, 1).unwrap();
        let back = transform_field(Direction::PsiToPhi, &psi, &nodes, &p, 3, 1).unwrap();
        for (a, b) in f.iter().zip(&back) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
        assert!(transform_field(Direction::PhiToPsi, &f[..2], &nodes, &p, 3, 1).is_err());
    }
}
