//! Numerical monitors for the linear estimates behind the reduction:
//! weighted Hardy inequalities, resolvent smoothing, Strichartz ratios,
//! norm equivalence and the dimension-shift comparison.
//!
//! Every check returns a [`RatioReport`]: one `lhs/rhs` sample per test
//! function (and parameter), the supremum, and a verdict against the bound
//! when one is known.

use std::sync::Arc;

use num_complex::Complex64;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::admissibility::Verdict;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{sphere_area, RadialGrid};
use crate::profiles::MetricProfile;
use crate::quadrature::{tail, GaussLegendre, RadialRule};
use crate::reduction::{Indices, ReducedProblem};
use crate::resolvent::{resolve, Coefficients};
use crate::spectral::{DiscreteRadialOperator, Shift};

/// Relative slack on the Hardy bound `LHS <= RHS`.
pub const HARDY_TOL: f64 = 1e-6;
/// Relative slack on the smoothing bound `4 / delta0`.
pub const SMOOTHING_TOL: f64 = 0.1;
/// Upper limit of the quadrature used by the Hardy checks.
pub const HARDY_R_MAX: f64 = 60.0;
/// At `s = 0` the two norms are the same integral.
pub const DIMSHIFT_IDENTITY_TOL: f64 = 1e-12;
/// Largest `ln(sup / inf)` of the ratio bracket for `s != 0`.
pub const DIMSHIFT_LOG_SPREAD: f64 = 1.0;

type Profile = dyn Fn(f64) -> (f64, f64) + Send + Sync;

/// A radial test function returning `(u(r), u'(r))`.
#[derive(Clone)]
pub struct TestFunction {
    pub id: String,
    f: Arc<Profile>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TestFunction({})", self.id)
    }
}

impl TestFunction {
    pub fn new(id: impl Into<String>, f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        TestFunction { id: id.into(), f: Arc::new(f) }
    }

    pub fn value(&self, r: f64) -> f64 {
        (self.f)(r).0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        (self.f)(r).1
    }

    pub fn sample(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&r| self.value(r)).collect()
    }

    /// `r^p exp(-((r - c)/s)^2)`.
    pub fn bump(power: f64, center: f64, width: f64) -> Self {
        let id = format!("r^{power}*exp(-((r-{center:.3})/{width:.3})^2)");
        TestFunction::new(id, move |r| {
            let z = (r - center) / width;
            let g = (-z * z).exp();
            let dg = -2.0 * z / width * g;
            if power == 0.0 {
                (g, dg)
            } else {
                let rp = r.powf(power);
                let drp = power * r.powf(power - 1.0);
                (rp * g, drp * g + rp * dg)
            }
        })
    }

    pub fn zero() -> Self {
        TestFunction::new("0", |_| (0.0, 0.0))
    }
}

/// `count` bumps `r^p e^{-((r-c)/s)^2}` with `p` cycling through `powers`.
pub fn bump_family(count: usize, seed: u64, powers: &[f64]) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let c: f64 = rng.gen_range(0.0..3.0);
            let s: f64 = (rng.gen_range(0.3f64.ln()..3.0f64.ln())).exp();
            TestFunction::bump(powers[i % powers.len()], c, s)
        })
        .collect()
}

/// Bumps spread over scales `[1/spread, spread]`.
pub fn multiscale_family(count: usize, seed: u64, spread: f64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.5 };
            let s = (spread.ln() * (2.0 * t - 1.0)).exp();
            let c: f64 = s * rng.gen_range(0.0..2.0);
            TestFunction::bump(0.0, c, s)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioSample {
    pub id: String,
    pub parameter: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `lhs = rhs = 0`, counted as satisfied.
    pub vacuous: bool,
}

impl RatioSample {
    fn new(id: &str, parameter: String, lhs: f64, rhs: f64) -> Self {
        let vacuous = lhs == 0.0 && rhs == 0.0;
        let ratio = if vacuous { 0.0 } else { lhs / rhs };
        RatioSample { id: id.to_string(), parameter, lhs, rhs, ratio, vacuous }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    pub check: String,
    pub samples: Vec<RatioSample>,
    pub sup_ratio: f64,
    pub inf_ratio: f64,
    pub bound: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl RatioReport {
    fn build(check: &str, samples: Vec<RatioSample>, bound: Option<f64>, tolerance: f64) -> Self {
        let live: Vec<f64> = samples.iter().filter(|s| !s.vacuous).map(|s| s.ratio).collect();
        let sup = live.iter().fold(0.0f64, |a, &b| if b.is_nan() { f64::NAN } else { a.max(b) });
        let inf = live.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let inf = if live.is_empty() { 0.0 } else { inf };
        let ok = sup.is_finite() && bound.is_none_or(|b| sup <= b * (1.0 + tolerance));
        RatioReport {
            check: check.to_string(),
            samples,
            sup_ratio: sup,
            inf_ratio: inf,
            bound,
            tolerance,
            verdict: Verdict::from_bool(ok),
        }
    }

    /// `sup / inf`, the width of the observed equivalence bracket.
    pub fn bracket_width(&self) -> f64 {
        self.sup_ratio / self.inf_ratio
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,parameter,lhs,rhs,ratio\n");
        for x in &self.samples {
            s.push_str(&format!("\"{}\",\"{}\",{:.12e},{:.12e},{:.12e}\n", x.id, x.parameter, x.lhs, x.rhs, x.ratio));
        }
        s
    }
}

/// Sorted quadrature rule with cumulative `int_0^r 1/(alpha s^{n-1})`.
fn beta_on_rule(alpha: &dyn Fn(f64) -> f64, n: usize, rule: &RadialRule) -> Result<Vec<f64>> {
    let g = |s: f64| 1.0 / (alpha(s) * s.powi(n as i32 - 1));
    let head = tail(&g).map_err(|e| match e {
        Error::Domain(_) => Error::HypothesisFail("alpha must be positive near the origin".into()),
        other => other,
    })?;
    let gl = GaussLegendre::new(8);
    let mut acc = head;
    let mut prev = crate::quadrature::R_TAIL;
    let mut out = Vec::with_capacity(rule.nodes.len());
    for &r in &rule.nodes {
        acc += gl.integrate(prev.ln(), r.ln(), |t| {
            let s = t.exp();
            g(s) * s
        });
        prev = r;
        out.push(alpha(r) * r.powi(n as i32 - 1) * acc);
    }
    if out.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::HypothesisFail("beta is not finite and positive".into()));
    }
    Ok(out)
}

/// `int |u|^2 beta^{-2} alpha r^{n-1} <= 4 int |u'|^2 alpha r^{n-1}` with
/// `beta = alpha r^{n-1} int_0^r ds / (alpha s^{n-1})`.
pub fn hardy_check(alpha: &Expr, n: usize, family: &[TestFunction]) -> Result<RatioReport> {
    let rule = RadialRule::new(HARDY_R_MAX);
    let a = |r: f64| alpha.eval(r);
    let beta = beta_on_rule(&a, n, &rule)?;
    let weights: Vec<f64> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&r, w)| w * a(r) * r.powi(n as i32 - 1))
        .collect();
    let samples = family
        .par_iter()
        .map(|u| {
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for ((&r, w), b) in rule.nodes.iter().zip(&weights).zip(&beta) {
                let (v, dv) = (u.f)(r);
                lhs += w * v * v / (b * b);
                rhs += 4.0 * w * dv * dv;
            }
            RatioSample::new(&u.id, String::new(), lhs, rhs)
        })
        .collect();
    Ok(RatioReport::build("hardy", samples, Some(1.0), HARDY_TOL))
}

/// Hardy inequality with weight `alpha = (zeta' + 2 eps zeta) e^{-2 eps r} r^{1-n}`:
/// `int alpha |u|^2 / r^2 r^{n-1} <= 4 int alpha |u'|^2 r^{n-1}`.
pub fn hardy2_check(zeta: &Expr, epsilon: f64, n: usize, family: &[TestFunction]) -> Result<RatioReport> {
    if n < 3 {
        return Err(Error::Config(format!("dimension n = {n} must be at least 3")));
    }
    if epsilon < 0.0 {
        return Err(Error::HypothesisFail(format!("epsilon = {epsilon} must be non-negative")));
    }
    for r in crate::admissibility::geometric_grid(1e-3, HARDY_R_MAX, 200) {
        let s = zeta.series(r, 3)?;
        let (z, dz, d2z) = (s.value(), s.derivative(1), s.derivative(2));
        if z < 0.0 || dz <= 0.0 || d2z > 1e-12 * (1.0 + dz.abs()) {
            return Err(Error::HypothesisFail(format!(
                "zeta must satisfy zeta >= 0, zeta' > 0, zeta'' <= 0; fails at r = {r:.4}"
            )));
        }
    }
    let rule = RadialRule::new(HARDY_R_MAX);
    let weights: Vec<f64> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&r, w)| {
            let s = zeta.series(r, 2).expect("checked above");
            w * (s.derivative(1) + 2.0 * epsilon * s.value()) * (-2.0 * epsilon * r).exp()
        })
        .collect();
    let samples = family
        .par_iter()
        .map(|u| {
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for (&r, w) in rule.nodes.iter().zip(&weights) {
                let (v, dv) = (u.f)(r);
                lhs += w * v * v / (r * r);
                rhs += 4.0 * w * dv * dv;
            }
            RatioSample::new(&u.id, String::new(), lhs, rhs)
        })
        .collect();
    Ok(RatioReport::build("hardy2", samples, Some(1.0), HARDY_TOL))
}

/// `kappa = sqrt(lambda^2 - h_inf)` on the branch with `Im kappa >= 0`.
pub fn shifted_kappa(lambda: Complex64, h_inf: f64) -> Complex64 {
    let k = (lambda * lambda - h_inf).sqrt();
    if k.im < 0.0 {
        -k
    } else {
        k
    }
}

/// Resolvent smoothing `|| v / r || <= (4/delta0) || r g ||` for the reduced
/// operator `-Delta_{R^m} + W` at each `lambda` and each `g` in the family.
pub fn smoothing_check(
    profile: &MetricProfile,
    n: usize,
    k: usize,
    delta0: f64,
    lambdas: &[Complex64],
    family: &[TestFunction],
    grid: &RadialGrid,
) -> Result<RatioReport> {
    if !(delta0 > 0.0 && delta0 <= 1.0) {
        return Err(Error::Config(format!("delta0 = {delta0} must lie in (0, 1]")));
    }
    let red = ReducedProblem::new(profile, n, k)?;
    let nodes = grid.nodes();
    let w: Vec<f64> = nodes.iter().map(|&r| red.w_potential(r)).collect::<Result<_>>()?;
    let dr = grid.dr();
    let w_at = move |r: f64| -> f64 {
        let j = ((r / dr) - 0.5).round().clamp(0.0, (w.len() - 1) as f64) as usize;
        w[j]
    };
    let data: Vec<(String, Vec<f64>)> = family.iter().map(|f| (f.id.clone(), f.sample(&nodes))).collect();
    let jobs: Vec<(usize, usize)> = (0..lambdas.len()).flat_map(|i| (0..data.len()).map(move |j| (i, j))).collect();
    let samples = jobs
        .par_iter()
        .map(|&(i, j)| {
            let kappa = shifted_kappa(lambdas[i], red.h_infinity);
            let sol = resolve(&Coefficients::Reduced { m: red.m, c: &w_at }, kappa, &data[j].1, grid)?;
            let ratio = sol.smoothing_ratio();
            let param = format!("lambda={}", lambdas[i]);
            Ok(RatioSample::new(&data[j].0, param, ratio, 1.0).with_vacuous(sol.rhs_sym.iter().all(|v| v.norm() == 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioReport::build("smoothing", samples, Some(4.0 / delta0), SMOOTHING_TOL))
}

impl RatioSample {
    fn with_vacuous(mut self, vacuous: bool) -> Self {
        if vacuous {
            self.vacuous = true;
            self.ratio = 0.0;
            self.lhs = 0.0;
            self.rhs = 0.0;
        }
        self
    }
}

/// Time samples and trapezoid weights on `[0, t]`.
pub fn trapezoid(t: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
    let dt = t / (count - 1) as f64;
    let times = (0..count).map(|i| i as f64 * dt).collect();
    let weights = (0..count)
        .map(|i| if i == 0 || i == count - 1 { 0.5 * dt } else { dt })
        .collect();
    (times, weights)
}

/// `(int_{R^m} |u|^q)^{1/q}` on the grid.
pub fn lq_norm(grid: &RadialGrid, m: usize, values: impl Iterator<Item = f64>, q: f64) -> f64 {
    let w = sphere_area(m) * grid.dr();
    let s: f64 = values
        .zip(grid.nodes())
        .map(|(v, r)| w * r.powi(m as i32 - 1) * v.abs().powf(q))
        .sum();
    s.powf(1.0 / q)
}

/// Projects `f` onto eigenmodes of `op` with eigenvalue at most `lambda_max`.
pub fn band_limit(op: &DiscreteRadialOperator, f: &[f64], lambda_max: f64) -> Result<Vec<f64>> {
    let mut c = op.coefficients(f)?;
    for (cj, l) in c.iter_mut().zip(op.eigenvalues()?) {
        if *l > lambda_max {
            *cj = 0.0;
        }
    }
    op.synthesize(&c)
}

/// Strichartz ratio `|| |D|^{1/q - 1/p} e^{it sqrt(nu + A)} f ||_{L^p_t L^q_x} / || f ||_{H^{1/2}}`.
///
/// `op` carries the potential, `free` is `-Delta_{R^m}` on the same grid and
/// supplies both the derivative weight and the data norm.
#[allow(clippy::too_many_arguments)]
pub fn strichartz_monitor(
    op: &DiscreteRadialOperator,
    free: &DiscreteRadialOperator,
    nu: f64,
    p: Ratio<i64>,
    q: Ratio<i64>,
    family: &[Vec<f64>],
    t_final: f64,
    time_samples: usize,
) -> Result<RatioReport> {
    let m = op.m;
    if !Indices::wave_admissible(m as i64, p, q) {
        return Err(Error::NotAdmissible(format!("(p, q) = ({p}, {q}) is not wave-admissible in dimension {m}")));
    }
    if free.grid != op.grid || free.m != m {
        return Err(Error::Dimension("free operator must share grid and dimension".into()));
    }
    let pf = *p.numer() as f64 / *p.denom() as f64;
    let qf = *q.numer() as f64 / *q.denom() as f64;
    let sigma = 1.0 / qf - 1.0 / pf;
    let shift = if nu > 0.0 { Shift::Inhomogeneous } else { Shift::Homogeneous };
    let (times, tw) = trapezoid(t_final, time_samples);
    op.spectrum()?;
    free.spectrum()?;
    let samples = family
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let rhs = free.frac_norm(0.5, shift, f)?;
            let flows = op.half_wave(f, nu, &times)?;
            let mut lhs = 0.0;
            for (u, w) in flows.iter().zip(&tw) {
                let norm = if sigma == 0.0 {
                    lq_norm(&op.grid, m, u.iter().map(|z| z.norm()), qf)
                } else {
                    let re: Vec<f64> = u.iter().map(|z| z.re).collect();
                    let im: Vec<f64> = u.iter().map(|z| z.im).collect();
                    let dre = free.apply_power(sigma, shift, &re)?;
                    let dim = free.apply_power(sigma, shift, &im)?;
                    lq_norm(&op.grid, m, dre.iter().zip(&dim).map(|(a, b)| a.hypot(*b)), qf)
                };
                lhs += w * norm.powf(pf);
            }
            Ok(RatioSample::new(&format!("f{i}"), format!("nu={nu}"), lhs.powf(1.0 / pf), rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioReport::build("strichartz", samples, None, 0.0))
}

/// Compares `|| r^k v ||` in `R^n` with `|| v ||` in `R^m`, both in the
/// homogeneous Sobolev scale of order `s`, normalized by sphere areas.
/// `s = 0, 1` use quadrature with exact derivatives; other `s` use the
/// spectral calculus on `grid`.
pub fn dimshift_check(n: usize, k: usize, s: f64, family: &[TestFunction], grid: &RadialGrid) -> Result<RatioReport> {
    let m = n + 2 * k;
    let kf = k as f64;
    let samples: Vec<RatioSample> = if s == 0.0 || s == 1.0 {
        let rule = RadialRule::new(grid.r_max);
        family
            .iter()
            .map(|v| {
                let (mut a, mut b) = (0.0, 0.0);
                for (&r, w) in rule.nodes.iter().zip(&rule.weights) {
                    let (x, dx) = (v.f)(r);
                    if s == 0.0 {
                        let y = r.powf(kf) * x;
                        a += w * y * y * r.powi(n as i32 - 1);
                        b += w * x * x * r.powi(m as i32 - 1);
                    } else {
                        let dy = kf * r.powf(kf - 1.0) * x + r.powf(kf) * dx;
                        a += w * dy * dy * r.powi(n as i32 - 1);
                        b += w * dx * dx * r.powi(m as i32 - 1);
                    }
                }
                RatioSample::new(&v.id, format!("s={s}"), a.sqrt(), b.sqrt())
            })
            .collect()
    } else {
        let op_n = DiscreteRadialOperator::free(grid, n)?;
        let op_m = DiscreteRadialOperator::free(grid, m)?;
        let (cn, cm) = (sphere_area(n).sqrt(), sphere_area(m).sqrt());
        let nodes = grid.nodes();
        family
            .iter()
            .map(|v| {
                let x = v.sample(&nodes);
                let y: Vec<f64> = x.iter().zip(&nodes).map(|(a, r)| a * r.powf(kf)).collect();
                let a = op_n.frac_norm(s, Shift::Homogeneous, &y)? / cn;
                let b = op_m.frac_norm(s, Shift::Homogeneous, &x)? / cm;
                Ok(RatioSample::new(&v.id, format!("s={s}"), a, b))
            })
            .collect::<Result<_>>()?
    };
    let mut report = RatioReport::build("dimshift", samples, None, 0.0);
    if s == 0.0 {
        let exact = report.samples.iter().all(|x| (x.ratio - 1.0).abs() <= DIMSHIFT_IDENTITY_TOL);
        report.tolerance = DIMSHIFT_IDENTITY_TOL;
        report.verdict = Verdict::from_bool(exact);
    } else {
        let spread = report.bracket_width().ln();
        report.tolerance = DIMSHIFT_LOG_SPREAD;
        report.verdict = Verdict::from_bool(report.inf_ratio > 0.0 && spread.is_finite() && spread <= DIMSHIFT_LOG_SPREAD);
    }
    Ok(report)
}

/// `|| |A|^{s/2} v || / || |D|^s v ||` over a family, for a perturbed operator `A`.
pub fn norm_equivalence_check(
    op: &DiscreteRadialOperator,
    free: &DiscreteRadialOperator,
    s: f64,
    family: &[Vec<f64>],
) -> Result<RatioReport> {
    let samples = family
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let a = op.frac_norm(s, Shift::Homogeneous, v)?;
            let b = free.frac_norm(s, Shift::Homogeneous, v)?;
            Ok(RatioSample::new(&format!("v{i}"), format!("s={s}"), a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioReport::build("norm_equivalence", samples, None, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hardy_analytic_sample() {
        let alpha = Expr::parse("r^(-2)").unwrap();
        let u = TestFunction::new("r e^-r", |r: f64| (r * (-r).exp(), (1.0 - r) * (-r).exp()));
        let rep = hardy_check(&alpha, 3, &[u]).unwrap();
        assert_relative_eq!(rep.samples[0].lhs, 0.5, max_relative = 1e-6);
        assert_relative_eq!(rep.samples[0].rhs, 1.0, max_relative = 1e-6);
        assert!(rep.verdict.is_pass());
    }

    #[test]
    fn hardy_diverging_beta() {
        let alpha = Expr::parse("1").unwrap();
        let fam = bump_family(3, 1, &[1.0]);
        assert!(matches!(hardy_check(&alpha, 3, &fam), Err(Error::BetaDiverges { .. })));
    }

    #[test]
    fn zero_function_is_vacuous() {
        let alpha = Expr::parse("r^(-2)").unwrap();
        let rep = hardy_check(&alpha, 3, &[TestFunction::zero()]).unwrap();
        assert!(rep.samples[0].vacuous);
        assert!(rep.verdict.is_pass());
    }

    #[test]
    fn hardy2_rejects_decreasing_zeta() {
        let zeta = Expr::parse("-r").unwrap();
        assert!(matches!(hardy2_check(&zeta, 0.1, 3, &bump_family(2, 0, &[1.0])), Err(Error::HypothesisFail(_))));
    }

    #[test]
    fn kappa_branch() {
        let k = shifted_kappa(Complex64::new(1.0, 0.5), 1.0);
        assert!(k.im >= 0.5);
        assert_relative_eq!((k * k).re, (Complex64::new(1.0, 0.5).powi(2) - 1.0).re, epsilon = 1e-14);
    }

    #[test]
    fn families_are_deterministic() {
        let a = bump_family(5, 42, &[1.0, 2.0]);
        let b = bump_family(5, 42, &[1.0, 2.0]);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.id, y.id);
        }
    }
}
