//! Metric profiles `h(r)` and target profiles `g(phi)`, with jets to any
//! order up to [`MAX_ORDER`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{Series, MAX_ORDER};

/// JSON form `{ "kind": ..., "params": {...} }` used by scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

fn param(spec: &ProfileSpec, key: &str, default: Option<f64>) -> Result<f64> {
    match spec.params.get(key) {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Config(format!("parameter '{key}' of '{}' must be a number", spec.kind))),
        None => default.ok_or_else(|| Error::Config(format!("'{}' requires parameter '{key}'", spec.kind))),
    }
}

fn string_param(spec: &ProfileSpec, key: &str) -> Result<String> {
    spec.params
        .get(key)
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| Error::Config(format!("'{}' requires string parameter '{key}'", spec.kind)))
}

fn check_keys(spec: &ProfileSpec, allowed: &[&str]) -> Result<()> {
    for k in spec.params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown parameter '{k}' for '{}'", spec.kind)));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    /// `h = r`.
    Flat,
    /// `h = sinh r`.
    Hyperbolic,
    /// `h = sinh r + amplitude * r^5 e^{-r^2}`.
    SinhPerturbed { amplitude: f64 },
    /// `h = r (1 + sqrt(r) * cutoff(eps, r))^power`; `eps = 0` drops the cutoff.
    PolynomialGrowth { power: f64, eps: f64 },
    /// `h = r + (e^r - 1 - r) * cutoff(eps, r)`; `eps = 0` gives `e^r - 1`.
    ExpGrowth { eps: f64 },
    Custom { expr: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricProfile {
    pub kind: MetricKind,
    expr: Expr,
}

impl MetricProfile {
    pub fn new(kind: MetricKind) -> Result<Self> {
        let text = match &kind {
            MetricKind::Flat => "r".to_string(),
            MetricKind::Hyperbolic => "sinh(r)".to_string(),
            MetricKind::SinhPerturbed { amplitude } => format!("sinh(r) + {amplitude:?} * r^5 * exp(-r^2)"),
            MetricKind::PolynomialGrowth { power, eps } => {
                if *power < 0.0 {
                    return Err(Error::Config("polynomial growth power must be non-negative".into()));
                }
                if *eps > 0.0 {
                    format!("r * (1 + sqrt(r) * cutoff({eps:?}, r))^{power:?}")
                } else {
                    format!("r * (1 + sqrt(r))^{power:?}")
                }
            }
            MetricKind::ExpGrowth { eps } => {
                if *eps > 0.0 {
                    format!("r + (exp(r) - 1 - r) * cutoff({eps:?}, r)")
                } else {
                    "exp(r) - 1".to_string()
                }
            }
            MetricKind::Custom { expr } => expr.clone(),
        };
        let expr = Expr::parse(&text)?;
        Ok(MetricProfile { kind, expr })
    }

    pub fn flat() -> Self {
        Self::new(MetricKind::Flat).expect("builtin profile parses")
    }

    pub fn hyperbolic() -> Self {
        Self::new(MetricKind::Hyperbolic).expect("builtin profile parses")
    }

    pub fn custom(expr: &str) -> Result<Self> {
        Self::new(MetricKind::Custom { expr: expr.to_string() })
    }

    pub fn from_spec(spec: &ProfileSpec) -> Result<Self> {
        let kind = match spec.kind.as_str() {
            "flat" => {
                check_keys(spec, &[])?;
                MetricKind::Flat
            }
            "hyperbolic" => {
                check_keys(spec, &[])?;
                MetricKind::Hyperbolic
            }
            "sinh_perturbed" => {
                check_keys(spec, &["amplitude"])?;
                MetricKind::SinhPerturbed { amplitude: param(spec, "amplitude", Some(0.01))? }
            }
            "polynomial_growth" => {
                check_keys(spec, &["power", "eps"])?;
                MetricKind::PolynomialGrowth {
                    power: param(spec, "power", None)?,
                    eps: param(spec, "eps", Some(0.0))?,
                }
            }
            "exp_growth" => {
                check_keys(spec, &["eps"])?;
                MetricKind::ExpGrowth { eps: param(spec, "eps", Some(0.0))? }
            }
            "custom" => {
                check_keys(spec, &["expr"])?;
                MetricKind::Custom { expr: string_param(spec, "expr")? }
            }
            other => return Err(Error::Config(format!("unknown manifold kind '{other}'"))),
        };
        Self::new(kind)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn label(&self) -> String {
        self.expr.to_string()
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, MetricKind::Flat)
    }

    /// Taylor series of `h` about `r` with `len` coefficients.
    pub fn series(&self, r: f64, len: usize) -> Result<Series> {
        if r < 0.0 || !r.is_finite() {
            return Err(Error::Domain(format!("profile evaluated at r = {r}")));
        }
        self.expr.series(r, len)
    }

    pub fn value(&self, r: f64) -> f64 {
        let v = self.expr.eval(r);
        if v.is_finite() {
            v
        } else {
            self.series(r, 1).map(|s| s.value()).unwrap_or(f64::NAN)
        }
    }

    /// `ln h(r)`, finite where `h` itself overflows.
    pub fn ln_value(&self, r: f64) -> f64 {
        let v = self.expr.eval(r);
        if v.is_finite() && v > 0.0 {
            v.ln()
        } else if v <= 0.0 {
            f64::NAN
        } else {
            self.series(r, 1).map(|s| s.ln_abs_value()).unwrap_or(f64::NAN)
        }
    }
}

/// Derivatives `f(r0), f'(r0), ..., f^(order)(r0)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Jet {
    pub center: f64,
    pub derivatives: Vec<f64>,
}

pub fn jet_eval(profile: &MetricProfile, r0: f64, order: usize) -> Result<Jet> {
    if order > MAX_ORDER {
        return Err(Error::OrderUnavailable { requested: order, max: MAX_ORDER });
    }
    let s = profile.series(r0, order + 1)?;
    Ok(Jet { center: r0, derivatives: s.derivatives() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    /// `g(phi) = phi`.
    Flat,
    /// `g(phi) = sin phi`.
    Sphere,
    /// `g(phi) = sinh phi`.
    Hyperbolic,
    Custom { expr: String, bound: Option<f64> },
}

const GAMMA_TAYLOR_LEN: usize = 15;
const GAMMA_SERIES_RADIUS: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct TargetProfile {
    pub kind: TargetKind,
    expr: Expr,
    bound: f64,
    /// Taylor coefficients of `g g'` about 0.
    gg_taylor: Vec<f64>,
}

impl TargetProfile {
    pub fn new(kind: TargetKind) -> Result<Self> {
        let (text, bound) = match &kind {
            TargetKind::Flat => ("phi".to_string(), f64::INFINITY),
            TargetKind::Sphere => ("sin(phi)".to_string(), std::f64::consts::PI),
            TargetKind::Hyperbolic => ("sinh(phi)".to_string(), f64::INFINITY),
            TargetKind::Custom { expr, bound } => (expr.clone(), bound.unwrap_or(f64::INFINITY)),
        };
        if !(bound > 0.0) {
            return Err(Error::Config("target bound must be positive".into()));
        }
        let expr = Expr::parse(&text)?;
        let g = expr.series(0.0, GAMMA_TAYLOR_LEN)?;
        let d = g.derivatives();
        let tol = 1e-12;
        if d[0].abs() > tol || (d[1] - 1.0).abs() > tol || d[2].abs() > tol {
            return Err(Error::Config(format!(
                "target profile must satisfy g(0)=0, g'(0)=1, g''(0)=0; got {:?}",
                &d[..3]
            )));
        }
        let gg = g.mul(&g.differentiate());
        let gg_taylor = (0..gg.len()).map(|k| gg.taylor(k)).collect();
        Ok(TargetProfile { kind, expr, bound, gg_taylor })
    }

    pub fn sphere() -> Self {
        Self::new(TargetKind::Sphere).expect("builtin target parses")
    }

    pub fn flat() -> Self {
        Self::new(TargetKind::Flat).expect("builtin target parses")
    }

    pub fn from_spec(spec: &ProfileSpec) -> Result<Self> {
        let kind = match spec.kind.as_str() {
            "flat" => {
                check_keys(spec, &[])?;
                TargetKind::Flat
            }
            "sphere" => {
                check_keys(spec, &[])?;
                TargetKind::Sphere
            }
            "hyperbolic" => {
                check_keys(spec, &[])?;
                TargetKind::Hyperbolic
            }
            "custom" => {
                check_keys(spec, &["expr", "bound"])?;
                let bound = match spec.params.get("bound") {
                    Some(_) => Some(param(spec, "bound", None)?),
                    None => None,
                };
                TargetKind::Custom { expr: string_param(spec, "expr")?, bound }
            }
            other => return Err(Error::Config(format!("unknown target kind '{other}'"))),
        };
        Self::new(kind)
    }

    /// Largest `A` such that `phi` must stay in `(-A, A)`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn label(&self) -> String {
        self.expr.to_string()
    }

    pub fn g(&self, phi: f64) -> f64 {
        match self.kind {
            TargetKind::Flat => phi,
            TargetKind::Sphere => phi.sin(),
            TargetKind::Hyperbolic => phi.sinh(),
            TargetKind::Custom { .. } => self.expr.eval(phi),
        }
    }

    /// `g(phi) g'(phi)`.
    pub fn g_gprime(&self, phi: f64) -> f64 {
        match self.kind {
            TargetKind::Flat => phi,
            TargetKind::Sphere => 0.5 * (2.0 * phi).sin(),
            TargetKind::Hyperbolic => 0.5 * (2.0 * phi).sinh(),
            TargetKind::Custom { .. } => match self.expr.series(phi, 2) {
                Ok(s) => s.value() * s.derivative(1),
                Err(_) => f64::NAN,
            },
        }
    }

    /// Jet of `g` at `phi`.
    pub fn jet(&self, phi: f64, order: usize) -> Result<Jet> {
        if order > MAX_ORDER {
            return Err(Error::OrderUnavailable { requested: order, max: MAX_ORDER });
        }
        if phi.abs() >= self.bound {
            return Err(Error::Domain(format!("|phi| = {} outside target range {}", phi.abs(), self.bound)));
        }
        let s = self.expr.series(phi, order + 1)?;
        Ok(Jet { center: phi, derivatives: s.derivatives() })
    }

    /// `Gamma(s)` in `lbar * g g'(s) = lbar * s + s^3 Gamma(s)`.
    pub fn gamma(&self, lbar: f64, s: f64) -> Result<f64> {
        if s.abs() >= self.bound || !s.is_finite() {
            return Err(Error::Domain(format!("|s| = {} outside target range {}", s.abs(), self.bound)));
        }
        Ok(self.gamma_unchecked(lbar, s))
    }

    /// As [`gamma`](Self::gamma) without the range check, for hot loops.
    pub fn gamma_unchecked(&self, lbar: f64, s: f64) -> f64 {
        if s.abs() < GAMMA_SERIES_RADIUS {
            let mut acc = 0.0;
            for c in self.gg_taylor[3..].iter().rev() {
                acc = acc * s + c;
            }
            lbar * acc
        } else {
            lbar * (self.g_gprime(s) - s) / (s * s * s)
        }
    }
}

pub fn gamma_decompose(target: &TargetProfile, lbar: f64, s: f64) -> Result<f64> {
    target.gamma(lbar, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn hyperbolic_jet_at_one() {
        let h = MetricProfile::hyperbolic();
        let j = jet_eval(&h, 1.0, 3).unwrap();
        let (s, c) = (1f64.sinh(), 1f64.cosh());
        for (k, want) in [s, c, s, c].iter().enumerate() {
            assert_relative_eq!(j.derivatives[k], *want, max_relative = 1e-14);
        }
    }

    #[test]
    fn order_above_maximum_is_rejected() {
        let h = MetricProfile::flat();
        assert!(matches!(jet_eval(&h, 1.0, MAX_ORDER + 1), Err(Error::OrderUnavailable { .. })));
        assert!(matches!(jet_eval(&h, -1.0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn sphere_gamma_at_origin() {
        let g = TargetProfile::sphere();
        assert_relative_eq!(g.gamma(2.0, 0.0).unwrap(), -4.0 / 3.0, max_relative = 1e-14);
        assert!(g.gamma(2.0, 4.0).is_err());
    }

    #[test]
    fn flat_target_has_zero_gamma() {
        let g = TargetProfile::flat();
        assert_eq!(g.gamma(2.0, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn target_normalization_is_enforced() {
        let bad = TargetKind::Custom { expr: "2*phi".into(), bound: None };
        assert!(TargetProfile::new(bad).is_err());
        let bad = TargetKind::Custom { expr: "phi + phi^2".into(), bound: None };
        assert!(TargetProfile::new(bad).is_err());
    }

    #[test]
    fn spec_parsing_rejects_unknown_kinds_and_params() {
        let spec: ProfileSpec = serde_json::from_str(r#"{"kind":"torus"}"#).unwrap();
        assert!(MetricProfile::from_spec(&spec).is_err());
        let spec: ProfileSpec = serde_json::from_str(r#"{"kind":"flat","params":{"x":1}}"#).unwrap();
        assert!(MetricProfile::from_spec(&spec).is_err());
        let spec: ProfileSpec =
            serde_json::from_str(r#"{"kind":"polynomial_growth","params":{"power":2,"eps":0.5}}"#).unwrap();
        let p = MetricProfile::from_spec(&spec).unwrap();
        let j = jet_eval(&p, 0.0, 4).unwrap();
        assert_eq!(j.derivatives, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn gamma_series_and_direct_agree_at_switch(s in 0.5e-2f64..2e-2, sign in prop::bool::ANY) {
            let s = if sign { s } else { -s };
            for g in [TargetProfile::sphere(), TargetProfile::new(TargetKind::Hyperbolic).unwrap()] {
                let direct = (g.g_gprime(s) - s) / (s * s * s);
                let mut acc = 0.0;
                for c in g.gg_taylor[3..].iter().rev() { acc = acc * s + c; }
                prop_assert!((direct - acc).abs() < 1e-8);
            }
        }

        #[test]
        fn gamma_identity_holds(s in -3.0f64..3.0, lbar in 0.5f64..10.0) {
            let g = TargetProfile::sphere();
            let lhs = lbar * g.g_gprime(s);
            let rhs = lbar * s + s * s * s * g.gamma(lbar, s).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
