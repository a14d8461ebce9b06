//! Cell-centered radial grids and radial quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes `r_j = (j + 1/2) dr`, `j = 0..n`, covering `(0, r_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) || n < 4 {
            return Err(Error::Config(format!("invalid grid: r_max = {r_max}, n = {n}")));
        }
        Ok(RadialGrid { r_max, n })
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dr()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Quadrature weights for `int_{R^m} f dx` of radial `f`.
    pub fn weights(&self, m: usize) -> Vec<f64> {
        let w = sphere_area(m) * self.dr();
        self.nodes().iter().map(|r| w * r.powi(m as i32 - 1)).collect()
    }

    /// `int_{R^m} f dx` for radial samples `f`.
    pub fn integrate(&self, f: &[f64], m: usize) -> f64 {
        self.weights(m).iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Same grid with `factor` cells merged into one.
    pub fn coarsen(&self, factor: usize) -> Result<RadialGrid> {
        if factor == 0 || self.n % factor != 0 {
            return Err(Error::Config(format!("cannot coarsen {} cells by {factor}", self.n)));
        }
        RadialGrid::new(self.r_max, self.n / factor)
    }
}

/// `Gamma(m/2)` for positive integers `m`.
pub fn gamma_half(m: usize) -> f64 {
    if m % 2 == 0 {
        (1..m / 2).fold(1.0, |acc, i| acc * i as f64)
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x < m as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Surface area of the unit sphere in `R^m`.
pub fn sphere_area(m: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(m as f64 / 2.0) / gamma_half(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn ball_volume_is_second_order() {
        let errs: Vec<f64> = [100usize, 200]
            .iter()
            .map(|&n| {
                let g = RadialGrid::new(2.0, n).unwrap();
                let ones = vec![1.0; n];
                let exact = sphere_area(5) * 2f64.powi(5) / 5.0;
                (g.integrate(&ones, 5) - exact).abs() / exact
            })
            .collect();
        assert!(errs[0] < 1e-3);
        assert_relative_eq!(errs[0] / errs[1], 4.0, max_relative = 0.05);
    }
}
