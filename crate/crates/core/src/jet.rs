//! Truncated Taylor series with a separate logarithmic magnitude.
//!
//! A `Series` about `x0` represents `f(x0 + t) = e^scale * sum_k coeffs[k] t^k`.
//! Keeping the magnitude in `scale` lets profiles such as `sinh(r)` be
//! differentiated at `r = 1000` without overflow, and ratios like `h''/h`
//! are then formed without ever materializing `h`.

use crate::error::{Error, Result};

/// Highest derivative order a jet may carry.
pub const MAX_ORDER: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    scale: f64,
    coeffs: Vec<f64>,
    flat: bool,
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Series {
    /// Series with `len` coefficients for the constant `v`.
    pub fn constant(v: f64, len: usize) -> Self {
        let mut coeffs = vec![0.0; len];
        coeffs[0] = v;
        Series { scale: 0.0, coeffs, flat: false }
    }

    /// The identity function expanded about `x0`.
    pub fn variable(x0: f64, len: usize) -> Self {
        let mut coeffs = vec![0.0; len];
        coeffs[0] = x0;
        if len > 1 {
            coeffs[1] = 1.0;
        }
        Series { scale: 0.0, coeffs, flat: false }
    }

    /// A function whose Taylor series vanishes identically (e.g. `e^{-1/x}` at 0).
    pub fn flat_zero(len: usize) -> Self {
        Series { scale: 0.0, coeffs: vec![0.0; len], flat: true }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    pub fn is_zero(&self) -> bool {
        self.flat || self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn normalized(&self) -> &[f64] {
        &self.coeffs
    }

    /// `f(x0)`; may overflow to infinity for huge magnitudes.
    pub fn value(&self) -> f64 {
        self.coeffs[0] * self.scale.exp()
    }

    /// `ln |f(x0)|`, finite even when `value()` would overflow.
    pub fn ln_abs_value(&self) -> f64 {
        self.scale + self.coeffs[0].abs().ln()
    }

    /// `f^(k)(x0) / k!`.
    pub fn taylor(&self, k: usize) -> f64 {
        self.coeffs[k] * self.scale.exp()
    }

    /// `f^(k)(x0)`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.taylor(k) * factorial(k)
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.derivative(k)).collect()
    }

    /// `f^(k)(x0) / g(x0)` computed without forming either magnitude.
    pub fn derivative_ratio(&self, k: usize, other: &Series) -> f64 {
        if self.coeffs[k] == 0.0 {
            return 0.0;
        }
        self.coeffs[k] / other.coeffs[0] * (self.scale - other.scale).exp() * factorial(k)
    }

    /// Series of `f'`, one coefficient shorter.
    pub fn differentiate(&self) -> Series {
        let coeffs: Vec<f64> = (1..self.len()).map(|k| k as f64 * self.coeffs[k]).collect();
        let coeffs = if coeffs.is_empty() { vec![0.0] } else { coeffs };
        Series { scale: self.scale, coeffs, flat: self.flat }
    }

    fn renormalize(mut self) -> Self {
        let m = self.coeffs.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        if m > 0.0 && m.is_finite() && !(1e-50..=1e50).contains(&m) {
            self.scale += m.ln();
            for c in &mut self.coeffs {
                *c /= m;
            }
        }
        if self.coeffs.iter().all(|&c| c == 0.0) {
            self.scale = 0.0;
        }
        self
    }

    /// Coefficients multiplied back by `e^scale`; errors if that overflows.
    fn unscaled(&self) -> Result<Vec<f64>> {
        if self.scale > 700.0 {
            return Err(Error::Domain(format!(
                "series magnitude e^{:.1} too large for a transcendental argument",
                self.scale
            )));
        }
        let f = self.scale.exp();
        Ok(self.coeffs.iter().map(|c| c * f).collect())
    }

    pub fn neg(&self) -> Series {
        Series {
            scale: self.scale,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            flat: self.flat,
        }
    }

    pub fn scale_by(&self, a: f64) -> Series {
        if a == 0.0 {
            return Series::flat_zero(self.len());
        }
        Series {
            scale: self.scale + a.abs().ln(),
            coeffs: self.coeffs.iter().map(|c| c * a.signum()).collect(),
            flat: self.flat,
        }
    }

    pub fn add(&self, other: &Series) -> Series {
        let len = self.len().min(other.len());
        if self.is_zero() {
            let mut o = other.clone();
            o.coeffs.truncate(len);
            o.flat = other.flat;
            return o;
        }
        if other.is_zero() {
            let mut s = self.clone();
            s.coeffs.truncate(len);
            return s;
        }
        let s = self.scale.max(other.scale);
        let fa = (self.scale - s).exp();
        let fb = (other.scale - s).exp();
        let coeffs = (0..len).map(|k| self.coeffs[k] * fa + other.coeffs[k] * fb).collect();
        Series { scale: s, coeffs, flat: false }.renormalize()
    }

    pub fn sub(&self, other: &Series) -> Series {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Series) -> Series {
        let len = self.len().min(other.len());
        if self.flat || other.flat {
            return Series::flat_zero(len);
        }
        let mut coeffs = vec![0.0; len];
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = (0..=k).map(|j| self.coeffs[j] * other.coeffs[k - j]).sum();
        }
        Series { scale: self.scale + other.scale, coeffs, flat: false }.renormalize()
    }

    pub fn div(&self, other: &Series) -> Result<Series> {
        let len = self.len().min(other.len());
        if self.flat {
            return Ok(Series::flat_zero(len));
        }
        let b0 = other.coeffs[0];
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::Domain("division by a series vanishing at the center".into()));
        }
        let b: Vec<f64> = other.coeffs.iter().map(|c| c / b0).collect();
        let mut q = vec![0.0; len];
        for k in 0..len {
            let acc: f64 = (1..=k).map(|j| b[j] * q[k - j]).sum();
            q[k] = self.coeffs[k] - acc;
        }
        if b0 < 0.0 {
            for c in &mut q {
                *c = -*c;
            }
        }
        Ok(Series { scale: self.scale - other.scale - b0.abs().ln(), coeffs: q, flat: false }
            .renormalize())
    }

    pub fn recip(&self) -> Result<Series> {
        Series::constant(1.0, self.len()).div(self)
    }

    pub fn exp(&self) -> Result<Series> {
        let len = self.len();
        if self.flat {
            return Ok(Series::constant(1.0, len));
        }
        let a = self.unscaled()?;
        let mut y = vec![0.0; len];
        y[0] = 1.0;
        for k in 1..len {
            let acc: f64 = (1..=k).map(|j| j as f64 * a[j] * y[k - j]).sum();
            y[k] = acc / k as f64;
        }
        Ok(Series { scale: a[0], coeffs: y, flat: false }.renormalize())
    }

    pub fn ln(&self) -> Result<Series> {
        let c0 = self.coeffs[0];
        if self.flat || c0 <= 0.0 || !c0.is_finite() {
            return Err(Error::Domain("logarithm of a non-positive value".into()));
        }
        let len = self.len();
        let b: Vec<f64> = self.coeffs.iter().map(|c| c / c0).collect();
        let mut l = vec![0.0; len];
        l[0] = self.scale + c0.ln();
        for k in 1..len {
            let acc: f64 = (1..k).map(|j| j as f64 * l[j] * b[k - j]).sum();
            l[k] = b[k] - acc / k as f64;
        }
        Ok(Series { scale: 0.0, coeffs: l, flat: false }.renormalize())
    }

    /// `f^p` for real `p`; requires `f(x0) > 0` unless `p` is an integer.
    pub fn powf(&self, p: f64) -> Result<Series> {
        if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
            return self.powi(p as i32);
        }
        if self.flat {
            return if p > 0.0 {
                Ok(Series::flat_zero(self.len()))
            } else {
                Err(Error::Domain("negative power of a flat series".into()))
            };
        }
        let c0 = self.coeffs[0];
        if c0 <= 0.0 {
            return Err(Error::Domain(format!("non-integer power {p} of a non-positive value")));
        }
        Ok(self.pow_nonzero(p, c0))
    }

    fn pow_nonzero(&self, p: f64, c0: f64) -> Series {
        let len = self.len();
        let b: Vec<f64> = self.coeffs.iter().map(|c| c / c0).collect();
        let mut y = vec![0.0; len];
        y[0] = 1.0;
        for k in 1..len {
            let acc: f64 = (1..=k)
                .map(|j| ((p + 1.0) * j as f64 - k as f64) * b[j] * y[k - j])
                .sum();
            y[k] = acc / k as f64;
        }
        Series { scale: p * (self.scale + c0.abs().ln()), coeffs: y, flat: false }.renormalize()
    }

    pub fn powi(&self, n: i32) -> Result<Series> {
        let len = self.len();
        if n == 0 {
            return Ok(Series::constant(1.0, len));
        }
        if self.flat {
            return if n > 0 {
                Ok(Series::flat_zero(len))
            } else {
                Err(Error::Domain("negative power of a flat series".into()))
            };
        }
        let c0 = self.coeffs[0];
        if c0 != 0.0 {
            let mut s = self.pow_nonzero(n as f64, c0);
            if c0 < 0.0 && n % 2 != 0 {
                s = s.neg();
            }
            return Ok(s);
        }
        if n < 0 {
            return Err(Error::Domain("negative power of a series vanishing at the center".into()));
        }
        let mut result = Series::constant(1.0, len);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        Ok(result)
    }

    pub fn sqrt(&self) -> Result<Series> {
        self.powf(0.5)
    }

    /// Returns `(sin f, cos f)`.
    pub fn sin_cos(&self) -> Result<(Series, Series)> {
        let len = self.len();
        if self.flat {
            return Ok((Series::flat_zero(len), Series::constant(1.0, len)));
        }
        let a = self.unscaled()?;
        let mut s = vec![0.0; len];
        let mut c = vec![0.0; len];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..len {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                ss += j as f64 * a[j] * c[k - j];
                cc -= j as f64 * a[j] * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = cc / k as f64;
        }
        Ok((
            Series { scale: 0.0, coeffs: s, flat: false },
            Series { scale: 0.0, coeffs: c, flat: false },
        ))
    }

    /// Returns `(sinh f, cosh f)`; large arguments go through scaled exponentials.
    pub fn sinh_cosh(&self) -> Result<(Series, Series)> {
        let len = self.len();
        if self.flat {
            return Ok((Series::flat_zero(len), Series::constant(1.0, len)));
        }
        let a = self.unscaled()?;
        if a[0].abs() > 20.0 {
            let ep = self.exp()?;
            let em = self.neg().exp()?;
            let sh = ep.sub(&em).scale_by(0.5);
            let ch = ep.add(&em).scale_by(0.5);
            return Ok((sh, ch));
        }
        let mut s = vec![0.0; len];
        let mut c = vec![0.0; len];
        s[0] = a[0].sinh();
        c[0] = a[0].cosh();
        for k in 1..len {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                ss += j as f64 * a[j] * c[k - j];
                cc += j as f64 * a[j] * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = cc / k as f64;
        }
        Ok((
            Series { scale: 0.0, coeffs: s, flat: false },
            Series { scale: 0.0, coeffs: c, flat: false },
        ))
    }

    /// `exp(-eps / f)`, extended by the flat zero where `f(x0) = 0`.
    pub fn cutoff(&self, eps: f64) -> Result<Series> {
        let len = self.len();
        if eps <= 0.0 {
            return Err(Error::Domain(format!("cutoff width must be positive, got {eps}")));
        }
        let c0 = self.coeffs[0];
        if self.flat || c0 == 0.0 {
            return Ok(Series::flat_zero(len));
        }
        if c0 < 0.0 {
            return Err(Error::Domain("cutoff evaluated at a negative argument".into()));
        }
        let q = Series::constant(-eps, len).div(self)?;
        q.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_series_matches_factorials() {
        let x = Series::variable(0.0, 8);
        let e = x.exp().unwrap();
        for k in 0..8 {
            assert_relative_eq!(e.taylor(k), 1.0 / factorial(k), max_relative = 1e-14);
        }
    }

    #[test]
    fn sinh_at_large_argument_does_not_overflow() {
        let x = Series::variable(1000.0, 6);
        let (s, c) = x.sinh_cosh().unwrap();
        assert!(s.value().is_infinite());
        assert_relative_eq!(s.ln_abs_value(), 1000.0 - 2f64.ln(), max_relative = 1e-14);
        for k in 0..6 {
            assert_relative_eq!(s.derivative_ratio(k, &s), 1.0, max_relative = 1e-12);
        }
        assert_relative_eq!(c.derivative_ratio(0, &s), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn division_inverts_multiplication() {
        let x = Series::variable(0.7, 10);
        let (s, c) = x.sin_cos().unwrap();
        let t = s.div(&c).unwrap();
        let back = t.mul(&c);
        for k in 0..10 {
            assert_relative_eq!(back.taylor(k), s.taylor(k), epsilon = 1e-13);
        }
    }

    #[test]
    fn powf_of_square_is_identity() {
        let x = Series::variable(2.5, 8);
        let y = x.mul(&x).powf(0.5).unwrap();
        assert_relative_eq!(y.taylor(0), 2.5, max_relative = 1e-15);
        assert_relative_eq!(y.taylor(1), 1.0, max_relative = 1e-14);
        for k in 2..8 {
            assert!(y.taylor(k).abs() < 1e-13);
        }
    }

    #[test]
    fn ln_inverts_exp() {
        let x = Series::variable(-0.3, 9);
        let y = x.exp().unwrap().ln().unwrap();
        assert_relative_eq!(y.taylor(0), -0.3, max_relative = 1e-15);
        assert_relative_eq!(y.taylor(1), 1.0, max_relative = 1e-14);
        for k in 2..9 {
            assert!(y.taylor(k).abs() < 1e-13);
        }
    }

    #[test]
    fn cutoff_is_flat_at_origin() {
        let x = Series::variable(0.0, 8);
        let c = x.cutoff(0.1).unwrap();
        assert!(c.is_flat());
        let p = c.mul(&x.powf(-3.5).unwrap_or_else(|_| Series::constant(1.0, 8)));
        assert!(p.is_flat());
    }

    #[test]
    fn cutoff_derivative_matches_closed_form() {
        let r = 0.4;
        let eps = 0.2;
        let c = Series::variable(r, 4).cutoff(eps).unwrap();
        let f = (-eps / r).exp();
        assert_relative_eq!(c.value(), f, max_relative = 1e-14);
        assert_relative_eq!(c.derivative(1), f * eps / (r * r), max_relative = 1e-13);
    }

    #[test]
    fn powi_of_negative_base_keeps_sign() {
        let x = Series::variable(-2.0, 4);
        let y = x.powi(3).unwrap();
        assert_relative_eq!(y.value(), -8.0, max_relative = 1e-15);
        assert_relative_eq!(y.derivative(1), 12.0, max_relative = 1e-14);
        let z = Series::variable(0.0, 5).powi(2).unwrap();
        assert_relative_eq!(z.derivative(2), 2.0);
        assert!(Series::variable(0.0, 5).powi(-1).is_err());
    }
}
