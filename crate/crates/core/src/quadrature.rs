//! Gauss-Legendre rules and radial integrals over `(0, R)`.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on `[-1, 1]`, nodes by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                if n == 1 {
                    p1 = x;
                    p0 = 1.0;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    }

    /// Abscissae and weights of the rule mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + h * x, w * h))
    }
}

/// Radii below this are covered by a power-law tail estimate.
pub const R_TAIL: f64 = 1e-10;
const R_SPLIT: f64 = 1.0;
const LOG_PANELS: usize = 40;
const LINEAR_PANEL: f64 = 0.25;
const POINTS: usize = 16;

/// Nodes and weights for `int_0^{r_max}` with logarithmic panels near the origin.
#[derive(Clone, Debug)]
pub struct RadialRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub r_max: f64,
}

impl RadialRule {
    pub fn new(r_max: f64) -> Self {
        let gl = GaussLegendre::new(POINTS);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let split = R_SPLIT.min(r_max);
        let (t0, t1) = (R_TAIL.ln(), split.ln());
        for p in 0..LOG_PANELS {
            let a = t0 + (t1 - t0) * p as f64 / LOG_PANELS as f64;
            let b = t0 + (t1 - t0) * (p + 1) as f64 / LOG_PANELS as f64;
            for (t, w) in gl.mapped(a, b) {
                let r = t.exp();
                nodes.push(r);
                weights.push(w * r);
            }
        }
        if r_max > split {
            let panels = ((r_max - split) / LINEAR_PANEL).ceil() as usize;
            let h = (r_max - split) / panels as f64;
            for p in 0..panels {
                for (r, w) in gl.mapped(split + p as f64 * h, split + (p + 1) as f64 * h) {
                    nodes.push(r);
                    weights.push(w);
                }
            }
        }
        RadialRule { nodes, weights, r_max }
    }

    /// `int_0^{r_max} f`, with `f ~ C r^p` assumed below [`R_TAIL`].
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let body: f64 = self.nodes.iter().zip(&self.weights).map(|(&r, w)| w * f(r)).sum();
        Ok(body + tail(&f)?)
    }
}

/// `int_0^{R_TAIL} f` for `f ~ C r^p`; errors when `p <= -1`.
pub fn tail(f: &impl Fn(f64) -> f64) -> Result<f64> {
    let (a, b) = (f(R_TAIL), f(2.0 * R_TAIL));
    if a == 0.0 && b == 0.0 {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) || a * b <= 0.0 {
        return Err(Error::Domain("integrand not regular near the origin".into()));
    }
    let p = (b / a).log2();
    if p <= -1.0 + 1e-6 {
        return Err(Error::BetaDiverges { exponent: p });
    }
    Ok(a * R_TAIL / (p + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        assert_relative_eq!(gl.integrate(0.0, 2.0, |x| x.powi(15)), 2f64.powi(16) / 16.0, max_relative = 1e-13);
        let gl1 = GaussLegendre::new(1);
        assert_relative_eq!(gl1.integrate(0.0, 1.0, |x| x), 0.5);
    }

    #[test]
    fn radial_rule_integrates_singular_power() {
        let rule = RadialRule::new(30.0);
        let v = rule.integrate(|r| r.powf(-0.5) * (-r).exp()).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), max_relative = 1e-9);
        assert!(matches!(rule.integrate(|r| 1.0 / r), Err(Error::BetaDiverges { .. })));
    }
}
