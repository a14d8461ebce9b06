//! Admissibility of a metric profile and of its perturbations.
//!
//! With `H = h^{(1-n)/2} (h^{(n-1)/2})''` and `h_inf = lim H`, the profile is
//! admissible when it is normalized at the origin, `H` has a limit, the
//! derivatives of `H` and `h^{-1/2}` decay at the natural rates, `h >= c r`,
//! and `P = r H - r h_inf + (1 - delta0)/(4r)` satisfies `P >= 0 >= P'`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Series;
use crate::profiles::MetricProfile;

pub const GRID_R_MIN: f64 = 1e-3;
pub const GRID_R_MAX: f64 = 1e3;
pub const GRID_POINTS: usize = 600;
/// Decay checks look at dyadic blocks starting here.
pub const LARGE_R: f64 = 8.0;
const FORMULA_TOL: f64 = 1e-9;
const BLOCK_TOL: f64 = 1e-6;
const SIGN_TOL: f64 = 1e-9;
const NORMALIZATION_TOL: f64 = 1e-12;
/// Radii used for the two Richardson estimates of `h_inf`.
const LIMIT_RADII: [f64; 2] = [2500.0, 10000.0];
const LIMIT_AGREEMENT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Condition {
    pub name: String,
    pub verdict: Verdict,
    pub witness_r: Option<f64>,
    pub margin: f64,
    pub detail: String,
}

impl Condition {
    fn new(name: &str, ok: bool, witness_r: Option<f64>, margin: f64, detail: String) -> Self {
        Condition { name: name.to_string(), verdict: Verdict::from_bool(ok), witness_r, margin, detail }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSummary {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub profile: String,
    pub n: usize,
    pub h_infinity: Option<f64>,
    pub h_infinity_radius: Option<f64>,
    /// Largest `delta0` on the search ladder satisfying `P >= 0 >= P'`.
    pub delta0: Option<f64>,
    /// Largest `delta0` satisfying `0 <= rP <= C` and `P' <= 0`.
    pub delta0_bounded_form: Option<f64>,
    /// Empirical infimum of `h(r)/r` on the grid.
    pub c_lower: f64,
    pub conditions: Vec<Condition>,
    pub grid: GridSummary,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.verdict.is_pass())
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HInfinity {
    pub value: f64,
    /// Disagreement between the two extrapolations.
    pub radius: f64,
}

pub fn geometric_grid(r_min: f64, r_max: f64, points: usize) -> Vec<f64> {
    let (a, b) = (r_min.ln(), r_max.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

fn check_dim(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Config(format!("dimension n = {n} must be at least 3")));
    }
    Ok(())
}

/// Taylor series of `H` about `r` with `len` coefficients.
pub fn h_tilde_series(profile: &MetricProfile, n: usize, r: f64, len: usize) -> Result<Series> {
    if r <= 0.0 {
        return Err(Error::Domain(format!("H evaluated at r = {r}")));
    }
    let h = profile.series(r, len + 2)?;
    let h1 = h.differentiate();
    let h2 = h1.differentiate();
    let a = h2.div(&h)?;
    let b = h1.div(&h)?;
    let nf = n as f64;
    let inner = a.add(&b.mul(&b).scale_by((nf - 3.0) / 2.0));
    let mut out = inner.scale_by((nf - 1.0) / 2.0);
    if nf == 3.0 {
        out = a;
    }
    Ok(out)
}

/// `H(r)` from both closed forms; errors if they disagree.
pub fn compute_h_tilde(profile: &MetricProfile, n: usize, r: f64) -> Result<f64> {
    check_dim(n)?;
    if r <= 0.0 {
        return Err(Error::Domain(format!("H evaluated at r = {r}")));
    }
    let nf = n as f64;
    let h = profile.series(r, 3)?;
    let ratio1 = h.derivative_ratio(1, &h);
    let ratio2 = h.derivative_ratio(2, &h);
    let second = (nf - 1.0) / 2.0 * (ratio2 + (nf - 3.0) / 2.0 * ratio1 * ratio1);
    let u = h.powf((nf - 1.0) / 2.0)?;
    let first = u.derivative_ratio(2, &u);
    let scale = (nf - 1.0) / 2.0 * (ratio2.abs() + (nf - 3.0).abs() / 2.0 * ratio1 * ratio1);
    if !first.is_finite() || !second.is_finite() {
        return Err(Error::Domain(format!("H is not finite at r = {r}")));
    }
    if (first - second).abs() > FORMULA_TOL * scale + 1e-14 {
        return Err(Error::InconsistentFormulas { r, first, second });
    }
    Ok(second)
}

fn richardson(profile: &MetricProfile, n: usize, r: f64) -> Result<f64> {
    let a = compute_h_tilde(profile, n, r)?;
    let b = compute_h_tilde(profile, n, 2.0 * r)?;
    Ok((4.0 * b - a) / 3.0)
}

/// Estimates `lim_{r->inf} H(r)` by Richardson extrapolation in `1/r^2`.
pub fn estimate_h_infinity(profile: &MetricProfile, n: usize) -> Result<HInfinity> {
    check_dim(n)?;
    let wrap = |e: Error| Error::NoLimit(e.to_string());
    let e1 = richardson(profile, n, LIMIT_RADII[0]).map_err(wrap)?;
    let e2 = richardson(profile, n, LIMIT_RADII[1]).map_err(wrap)?;
    let radius = (e1 - e2).abs();
    if !(radius <= LIMIT_AGREEMENT * (1.0 + e2.abs())) {
        return Err(Error::NoLimit(format!("extrapolations disagree: {e1} vs {e2}")));
    }
    // The weighted residual must not grow from moderate to large radii.
    let resid = |rs: &[f64]| -> Result<f64> {
        let mut m = 0.0f64;
        for &r in rs {
            let h = compute_h_tilde(profile, n, r).map_err(wrap)?;
            m = m.max(r * r * (h - e2).abs());
        }
        Ok(m)
    };
    let near = resid(&[20.0, 40.0, 80.0])?;
    let far = resid(&[320.0, 640.0, 1280.0])?;
    if far > 2.0 * near + 1e-8 * (1.0 + e2.abs()) * 1280.0 * 1280.0 {
        return Err(Error::NoLimit(format!("residual r^2 |H - h_inf| grows: {near} -> {far}")));
    }
    // An estimate indistinguishable from zero is reported as exactly zero so
    // that the O(r) amplification in P does not turn roundoff into a sign error.
    let value = if e2.abs() <= 10.0 * radius + 1e-12 { 0.0 } else { e2 };
    Ok(HInfinity { value, radius })
}

/// `(P(r), P'(r))` for a given limit `h_inf`.
pub fn compute_p_with(profile: &MetricProfile, n: usize, delta0: f64, h_inf: f64, r: f64) -> Result<(f64, f64)> {
    let s = h_tilde_series(profile, n, r, 2)?;
    let (h, dh) = (s.value(), s.derivative(1));
    let c = (1.0 - delta0) / 4.0;
    Ok((r * (h - h_inf) + c / r, (h - h_inf) + r * dh - c / (r * r)))
}

pub fn compute_p(profile: &MetricProfile, n: usize, delta0: f64, r: f64) -> Result<(f64, f64)> {
    let hinf = estimate_h_infinity(profile, n)?;
    compute_p_with(profile, n, delta0, hinf.value, r)
}

/// Per-radius data needed by the admissibility conditions.
#[derive(Clone, Debug)]
struct Sample {
    h_over_r: f64,
    /// `H, H', ..., H^(J)`.
    h_tilde: Vec<f64>,
    /// `(h^{-1/2})^(j)` for `j = 1..=J`.
    inv_sqrt: Vec<f64>,
}

fn sample(profile: &MetricProfile, n: usize, r: f64, jmax: usize) -> Result<Sample> {
    let hs = profile.series(r, jmax + 1)?;
    let h_over_r = hs.value() / r;
    let ht = h_tilde_series(profile, n, r, jmax.max(1) + 1)?;
    let h_tilde = ht.derivatives();
    let inv = hs.powf(-0.5)?;
    let inv_sqrt = (1..=jmax).map(|j| inv.derivative(j)).collect();
    if h_tilde.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("H not finite at r = {r}")));
    }
    Ok(Sample { h_over_r, h_tilde, inv_sqrt })
}

/// Sup of `vals` on dyadic blocks `[r0 2^i, r0 2^{i+1})` with the radius of each sup.
pub fn block_sups(rs: &[f64], vals: &[f64], r0: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut current: Option<usize> = None;
    for (&r, &v) in rs.iter().zip(vals) {
        if r < r0 {
            continue;
        }
        let b = (r / r0).log2().floor() as usize;
        if current != Some(b) {
            out.push((f64::NEG_INFINITY, r));
            current = Some(b);
        }
        let last = out.last_mut().unwrap();
        if !(v <= last.0) {
            *last = (v, r);
        }
    }
    out
}

/// Index of the first block whose sup exceeds its predecessor.
pub fn first_increase(sups: &[(f64, f64)]) -> Option<usize> {
    for i in 1..sups.len() {
        let (prev, cur) = (sups[i - 1].0, sups[i].0);
        if !cur.is_finite() || cur > prev * (1.0 + BLOCK_TOL) + 1e-14 {
            return Some(i);
        }
    }
    None
}

/// Sampled evidence of boundedness: block sups are finite and either stop
/// increasing or increase by geometrically shrinking amounts.
pub fn bounded_trend(sups: &[(f64, f64)]) -> bool {
    if sups.iter().any(|s| !s.0.is_finite()) {
        return false;
    }
    let k = sups.len();
    if k < 3 {
        return true;
    }
    let d_last = sups[k - 1].0 - sups[k - 2].0;
    let d_prev = sups[k - 2].0 - sups[k - 3].0;
    let scale = sups[k - 1].0.abs().max(1e-300);
    d_last <= BLOCK_TOL * scale || d_last <= 0.9 * d_prev
}

fn normalization(profile: &MetricProfile) -> Condition {
    match profile.series(0.0, 3) {
        Ok(s) => {
            let d = s.derivatives();
            let err = d[0].abs().max((d[1] - 1.0).abs()).max(d[2].abs());
            Condition::new(
                "normalization",
                err <= NORMALIZATION_TOL,
                Some(0.0),
                NORMALIZATION_TOL - err,
                format!("h(0) = {}, h'(0) = {}, h''(0) = {}", d[0], d[1], d[2]),
            )
        }
        Err(e) => Condition::new("normalization", false, Some(0.0), f64::NEG_INFINITY, format!("no jet at 0: {e}")),
    }
}

/// Descending ladder `0.95, 0.90, ..., 0.05`.
pub fn delta0_ladder() -> Vec<f64> {
    (1..=19).rev().map(|i| i as f64 / 20.0).collect()
}

struct PCheck {
    ok: bool,
    witness: Option<f64>,
    margin: f64,
}

fn p_check(samples: &[Option<Sample>], rs: &[f64], h_inf: f64, delta0: f64, bounded_form: bool) -> PCheck {
    let c = (1.0 - delta0) / 4.0;
    let mut margin = f64::INFINITY;
    let mut witness = None;
    let mut rp = Vec::with_capacity(rs.len());
    for (s, &r) in samples.iter().zip(rs) {
        let Some(s) = s else {
            return PCheck { ok: false, witness: Some(r), margin: f64::NEG_INFINITY };
        };
        let (h, dh) = (s.h_tilde[0], s.h_tilde[1]);
        let p = r * (h - h_inf) + c / r;
        let dp = (h - h_inf) + r * dh - c / (r * r);
        let p_scale = r * (h - h_inf).abs() + c / r;
        let dp_scale = (h - h_inf).abs() + r * dh.abs() + c / (r * r);
        let (lo, lo_scale) = if bounded_form { (r * p, r * p_scale) } else { (p, p_scale) };
        let m1 = lo / lo_scale.max(1e-300);
        let m2 = -dp / dp_scale.max(1e-300);
        let m = m1.min(m2);
        if m < margin {
            margin = m;
            witness = Some(r);
        }
        rp.push(r * p);
    }
    let mut ok = margin >= -SIGN_TOL;
    if bounded_form && ok {
        let sups = block_sups(rs, &rp, LARGE_R);
        if !bounded_trend(&sups) {
            ok = false;
            witness = sups.last().map(|s| s.1);
        }
    }
    PCheck { ok, witness: if ok { None } else { witness }, margin }
}

/// `P >= 0 >= P'` on the standard grid for one prescribed `delta0`.
pub fn check_delta0(profile: &MetricProfile, n: usize, delta0: f64) -> Result<Condition> {
    check_dim(n)?;
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(Error::Config(format!("delta0 = {delta0} must lie in (0, 1)")));
    }
    let jmax = (n - 1) / 2;
    let rs = geometric_grid(GRID_R_MIN, GRID_R_MAX, GRID_POINTS);
    let samples: Vec<Option<Sample>> = rs.par_iter().map(|&r| sample(profile, n, r, jmax).ok()).collect();
    let h_inf = estimate_h_infinity(profile, n)?.value;
    let pc = p_check(&samples, &rs, h_inf, delta0, false);
    Ok(Condition::new("delta0_requested", pc.ok, pc.witness, pc.margin, format!("delta0 = {delta0}")))
}

/// Full admissibility verdict on the standard geometric grid.
pub fn check_admissibility(profile: &MetricProfile, n: usize) -> Result<AdmissibilityReport> {
    check_dim(n)?;
    let jmax = (n - 1) / 2;
    let rs = geometric_grid(GRID_R_MIN, GRID_R_MAX, GRID_POINTS);
    let samples: Vec<Option<Sample>> = rs.par_iter().map(|&r| sample(profile, n, r, jmax).ok()).collect();
    let mut conditions = vec![normalization(profile)];

    let hinf = estimate_h_infinity(profile, n);
    let (h_infinity, h_infinity_radius) = match &hinf {
        Ok(h) => {
            let ok = h.value >= -1e-9;
            conditions.push(Condition::new(
                "cond_i",
                ok,
                None,
                h.value,
                format!("h_inf = {} (+/- {})", h.value, h.radius),
            ));
            (Some(h.value), Some(h.radius))
        }
        Err(e) => {
            conditions.push(Condition::new("cond_i", false, Some(LIMIT_RADII[1]), f64::NEG_INFINITY, e.to_string()));
            (None, None)
        }
    };

    // Decay of H^(j) and (h^{-1/2})^(j).
    let mut ok_ii = true;
    let mut witness_ii = None;
    let mut margin_ii = f64::INFINITY;
    let mut detail_ii = String::new();
    for j in 1..=jmax {
        let mut a = Vec::with_capacity(rs.len());
        let mut b = Vec::with_capacity(rs.len());
        for (s, &r) in samples.iter().zip(&rs) {
            match s {
                Some(s) => {
                    a.push(r * s.h_tilde[j].abs());
                    b.push(r.powf(0.5 + j as f64) * s.inv_sqrt[j - 1].abs());
                }
                None => {
                    a.push(f64::NAN);
                    b.push(f64::NAN);
                }
            }
        }
        for (label, vals) in [("r|H^(j)|", &a), ("r^(j+1/2)|(h^-1/2)^(j)|", &b)] {
            if let Some(bad) = samples.iter().zip(&rs).find(|(s, _)| s.is_none()) {
                ok_ii = false;
                witness_ii.get_or_insert(*bad.1);
                continue;
            }
            let sups = block_sups(&rs, vals, LARGE_R);
            for w in sups.windows(2) {
                let m = (w[0].0 * (1.0 + BLOCK_TOL) + 1e-14 - w[1].0) / w[0].0.abs().max(1e-300);
                margin_ii = margin_ii.min(m);
            }
            let c = sups.iter().fold(0.0f64, |acc, s| acc.max(s.0));
            detail_ii.push_str(&format!("j={j} {label} sup {c:.3e}; "));
            if let Some(i) = first_increase(&sups) {
                ok_ii = false;
                witness_ii.get_or_insert(sups[i].1);
            }
        }
    }
    if !margin_ii.is_finite() {
        margin_ii = if ok_ii { 0.0 } else { f64::NEG_INFINITY };
    }
    conditions.push(Condition::new("cond_ii", ok_ii, witness_ii, margin_ii, detail_ii));

    // h >= c r, then the P conditions.
    let mut c_lower = f64::INFINITY;
    let mut c_witness = None;
    let mut first_nonpositive = None;
    for (s, &r) in samples.iter().zip(&rs) {
        let v = match s {
            Some(s) => s.h_over_r,
            None => profile.value(r) / r,
        };
        if !(v > 0.0) && first_nonpositive.is_none() {
            first_nonpositive = Some(r);
        }
        if v < c_lower || v.is_nan() {
            c_lower = if v.is_nan() { f64::NEG_INFINITY } else { v };
            c_witness = Some(r);
        }
    }
    let lower_ok = c_lower > 0.0;
    let lower_witness = first_nonpositive.or(c_witness);

    let mut delta0 = None;
    let mut delta0_bounded_form = None;
    let mut cond_iii = None;
    let mut cond_iii_b = None;
    match h_infinity {
        Some(h_inf) if lower_ok => {
            for &d in &delta0_ladder() {
                if delta0.is_none() {
                    let pc = p_check(&samples, &rs, h_inf, d, false);
                    if pc.ok {
                        delta0 = Some(d);
                        cond_iii = Some(Condition::new("cond_iii", true, None, pc.margin, format!("delta0 = {d}, c = {c_lower:.6}")));
                    }
                }
                if delta0_bounded_form.is_none() {
                    let pc = p_check(&samples, &rs, h_inf, d, true);
                    if pc.ok {
                        delta0_bounded_form = Some(d);
                        cond_iii_b = Some(Condition::new("cond_iii_bounded_form", true, None, pc.margin, format!("delta0 = {d}")));
                    }
                }
            }
            let last = *delta0_ladder().last().unwrap();
            if cond_iii.is_none() {
                let pc = p_check(&samples, &rs, h_inf, last, false);
                cond_iii = Some(Condition::new("cond_iii", false, pc.witness, pc.margin, format!("no delta0 >= {last} works")));
            }
            if cond_iii_b.is_none() {
                let pc = p_check(&samples, &rs, h_inf, last, true);
                cond_iii_b = Some(Condition::new("cond_iii_bounded_form", false, pc.witness, pc.margin, format!("no delta0 >= {last} works")));
            }
        }
        _ => {
            let detail = if lower_ok { "h_inf unavailable".to_string() } else { format!("h(r)/r reaches {c_lower}") };
            let margin = if lower_ok { f64::NEG_INFINITY } else { c_lower };
            cond_iii = Some(Condition::new("cond_iii", false, lower_witness, margin, detail.clone()));
            cond_iii_b = Some(Condition::new("cond_iii_bounded_form", false, lower_witness, margin, detail));
        }
    }
    conditions.push(cond_iii.unwrap());
    conditions.push(cond_iii_b.unwrap());

    Ok(AdmissibilityReport {
        profile: profile.label(),
        n,
        h_infinity,
        h_infinity_radius,
        delta0,
        delta0_bounded_form,
        c_lower,
        conditions,
        grid: GridSummary { r_min: GRID_R_MIN, r_max: GRID_R_MAX, points: GRID_POINTS },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    General,
    Exponential,
    Polynomial,
}

impl PerturbationMode {
    fn name(self) -> &'static str {
        match self {
            PerturbationMode::General => "general",
            PerturbationMode::Exponential => "exponential",
            PerturbationMode::Polynomial => "polynomial",
        }
    }
}

/// Largest perturbation size accepted as "small".
pub const DEFAULT_EPS_MAX: f64 = 0.1;

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationReport {
    pub mode: PerturbationMode,
    pub epsilon_required: f64,
    pub epsilon_max: f64,
    pub conditions: Vec<Condition>,
}

impl PerturbationReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.verdict.is_pass())
    }
}

fn grows_exponentially(profile: &MetricProfile) -> bool {
    let r = 200.0;
    profile.ln_value(r) / r > 0.5
}

/// Sup over `r >= LARGE_R` of `f(r)` must show a bounded trend.
fn decay_condition(name: &str, rs: &[f64], vals: &[f64]) -> Condition {
    let sups = block_sups(rs, vals, LARGE_R);
    let ok = bounded_trend(&sups);
    let c = sups.iter().fold(0.0f64, |a, s| a.max(s.0));
    let witness = if ok { None } else { sups.last().map(|s| s.1) };
    Condition::new(name, ok, witness, if ok { c } else { f64::NEG_INFINITY }, format!("block sup {c:.3e}"))
}

/// Checks that `perturbed` stays admissible as a perturbation of `base`.
pub fn check_perturbation(
    base: &MetricProfile,
    perturbed: &MetricProfile,
    mode: PerturbationMode,
    n: usize,
    eps_max: f64,
) -> Result<PerturbationReport> {
    check_dim(n)?;
    let rs = geometric_grid(GRID_R_MIN, GRID_R_MAX, GRID_POINTS);
    let jmax = (n - 1) / 2;
    let mut conditions = Vec::new();

    let identical = rs.iter().all(|&r| {
        let (a, b) = (base.value(r), perturbed.value(r));
        (a == b) || (a - b).abs() <= 1e-14 * a.abs().max(b.abs())
    });
    if identical {
        conditions.push(Condition::new("zero_perturbation", true, None, 0.0, "perturbation vanishes on the grid".into()));
        return Ok(PerturbationReport { mode, epsilon_required: 0.0, epsilon_max: eps_max, conditions });
    }

    let base_exp = grows_exponentially(base);
    match mode {
        PerturbationMode::Exponential if !base_exp => {
            return Err(Error::ModeMismatch { mode: mode.name().into(), reason: "base profile does not grow exponentially".into() })
        }
        PerturbationMode::Polynomial if base_exp => {
            return Err(Error::ModeMismatch { mode: mode.name().into(), reason: "base profile grows exponentially".into() })
        }
        _ => {}
    }

    let mut norm = normalization(perturbed);
    norm.name = "normalization".into();
    conditions.push(norm);

    let deriv_len = jmax + 3;
    let mut eps = 0.0f64;
    let mut eps_witness = None;
    let mut track_eps = |v: f64, r: f64| {
        if !(v <= eps) {
            eps = if v.is_nan() { f64::INFINITY } else { v };
            eps_witness = Some(r);
        }
    };

    match mode {
        PerturbationMode::General => {
            let mut inf_ratio = f64::INFINITY;
            let mut inf_r = None;
            let mut diffs: Vec<Vec<f64>> = vec![Vec::new(); jmax + 1];
            let mut inv: Vec<Vec<f64>> = vec![Vec::new(); jmax + 1];
            for &r in &rs {
                let hp = perturbed.value(r) / r;
                if !(hp >= inf_ratio) {
                    inf_ratio = if hp.is_nan() { f64::NEG_INFINITY } else { hp };
                    inf_r = Some(r);
                }
                let a = h_tilde_series(base, n, r, jmax + 1);
                let b = h_tilde_series(perturbed, n, r, jmax + 1);
                let s = perturbed.series(r, jmax + 1).and_then(|s| s.powf(-0.5));
                match (a, b, s) {
                    (Ok(a), Ok(b), Ok(s)) => {
                        let d0 = (a.value() - b.value()).abs();
                        let d1 = (a.derivative(1) - b.derivative(1)).abs();
                        track_eps(r * r * d0, r);
                        track_eps(r * r * r * d1, r);
                        for j in 1..=jmax {
                            diffs[j].push(r * (a.derivative(j) - b.derivative(j)).abs());
                            inv[j].push(r.powf(j as f64 + 0.5) * s.derivative(j).abs());
                        }
                    }
                    _ => {
                        track_eps(f64::NAN, r);
                        for j in 1..=jmax {
                            diffs[j].push(f64::NAN);
                            inv[j].push(f64::NAN);
                        }
                    }
                }
            }
            conditions.push(Condition::new("lower_bound", inf_ratio > 0.0, if inf_ratio > 0.0 { None } else { inf_r }, inf_ratio, format!("inf h/r = {inf_ratio:.4e}")));
            for j in 1..=jmax {
                conditions.push(decay_condition(&format!("h_tilde_difference_decay_j{j}"), &rs, &diffs[j]));
                conditions.push(decay_condition(&format!("inverse_sqrt_decay_j{j}"), &rs, &inv[j]));
            }
        }
        PerturbationMode::Exponential | PerturbationMode::Polynomial => {
            let exp_mode = mode == PerturbationMode::Exponential;
            let mut inf_ratio = f64::INFINITY;
            let mut inf_r = None;
            let mut growth: Vec<Vec<f64>> = vec![Vec::new(); deriv_len];
            let mut pj: Vec<Vec<f64>> = vec![Vec::new(); deriv_len];
            for &r in &rs {
                let lower = if exp_mode { r + r.powi(n as i32) } else { r };
                let (a, b) = (base.series(r, deriv_len), perturbed.series(r, deriv_len));
                let (Ok(a), Ok(b)) = (a, b) else {
                    track_eps(f64::NAN, r);
                    inf_ratio = f64::NEG_INFINITY;
                    inf_r.get_or_insert(r);
                    continue;
                };
                let ratio = (b.ln_abs_value() - lower.ln()).exp() * b.value().signum();
                if !(ratio >= inf_ratio) {
                    inf_ratio = if ratio.is_nan() { f64::NEG_INFINITY } else { ratio };
                    inf_r = Some(r);
                }
                let diff = b.sub(&a);
                let weight = (1.0 + r * r).sqrt();
                for j in 0..deriv_len {
                    let p = diff.derivative_ratio(j, &a);
                    if j <= 3 {
                        let w = if exp_mode { weight.powi(3) } else { r.powi(j as i32) };
                        track_eps(p.abs() * w, r);
                    }
                    let g = b.derivative_ratio(j, &b).abs() * if exp_mode { 1.0 } else { r.powi(j as i32) };
                    growth[j].push(g);
                    pj[j].push(r * p.abs());
                }
            }
            let name = if exp_mode { "lower_bound_r_plus_r_pow_n" } else { "lower_bound" };
            conditions.push(Condition::new(name, inf_ratio > 0.0, if inf_ratio > 0.0 { None } else { inf_r }, inf_ratio, format!("inf = {inf_ratio:.4e}")));
            for j in 1..deriv_len {
                conditions.push(decay_condition(&format!("derivative_growth_j{j}"), &rs, &growth[j]));
            }
            for j in 1..deriv_len {
                conditions.push(decay_condition(&format!("relative_difference_decay_j{j}"), &rs, &pj[j]));
            }
        }
    }
    let ok = eps <= eps_max;
    conditions.push(Condition::new(
        "smallness",
        ok,
        if ok { None } else { eps_witness },
        eps_max - eps,
        format!("epsilon required {eps:.4e}, allowed {eps_max}"),
    ));
    Ok(PerturbationReport { mode, epsilon_required: eps, epsilon_max: eps_max, conditions })
}
