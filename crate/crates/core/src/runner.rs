//! Command execution for scenarios: runs the checks, assembles a deterministic
//! report and the CSV artifacts, and maps the outcome to an exit code.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::admissibility::{check_admissibility, check_delta0, AdmissibilityReport, Condition, Verdict};
use crate::closed_forms::{reproduce_closed_forms, ClosedFormReport};
use crate::error::{Error, Result};
use crate::estimates::{
    bump_family, dimshift_check, hardy2_check, hardy_check, multiscale_family, norm_equivalence_check,
    smoothing_check, strichartz_monitor, RatioReport,
};
use crate::expr::Expr;
use crate::grid::RadialGrid;
use crate::reduction::{Indices, ReducedProblem, ReductionSummary};
use crate::scenario::{CheckName, Delta0, Scenario};
use crate::spectral::{build_operator, DiscreteRadialOperator};
use crate::wave::{
    consistency_check, integrate, strichartz_trace, time_reversal_error, ConsistencyReport, Formulation, Trajectory,
    DIAGNOSTIC_CELLS,
};

/// Small-data runs must keep `sup |phi|` within this factor of its initial value.
pub const SUP_GROWTH_LIMIT: f64 = 2.0;
/// Largest relative drift of the discrete energy.
pub const ENERGY_DRIFT_TOL: f64 = 1e-5;
/// Largest relative error after integrating forward and back.
pub const REVERSAL_TOL: f64 = 1e-8;
/// Spectrum is nonnegative when its bottom is above `-SPECTRUM_TOL * max(1, top)`.
pub const SPECTRUM_TOL: f64 = 1e-9;
/// Eigenmodes mixed into each band-limited test function.
pub const BAND_MODES: usize = 40;

const SUMMARY_RADII: [f64; 8] = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    Reduce,
    Estimates,
    Evolve,
    All,
    ClosedForms,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Reduce => "reduce",
            Command::Estimates => "estimates",
            Command::Evolve => "evolve",
            Command::All => "all",
            Command::ClosedForms => "closed-forms",
        }
    }
}

/// One line of the summary table.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub check: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Row {
    fn new(check: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Row { check: check.into(), verdict: Verdict::from_bool(ok), detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionReport {
    pub summary: ReductionSummary,
    pub wave_admissible: bool,
    pub scaling_relation: bool,
    pub spectrum_cells: usize,
    pub spectrum_min: f64,
    pub spectrum_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionReport {
    pub trajectory: Trajectory,
    pub strichartz_trace: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency: Option<ConsistencyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reversal_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: Command,
    pub scenario: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub admissibility: Option<AdmissibilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta0_check: Option<Condition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<RatioReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_forms: Option<ClosedFormReport>,
}

impl Report {
    fn new(command: Command, scenario: &str, seed: u64) -> Self {
        Report {
            command,
            scenario: scenario.to_string(),
            seed,
            verdict: Verdict::Pass,
            rows: Vec::new(),
            admissibility: None,
            delta0_check: None,
            reduction: None,
            estimates: Vec::new(),
            evolution: None,
            closed_forms: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Fixed-width table of the rows, for stderr.
    pub fn summary_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
        let mut s = format!("{:<width$}  {:<7}  detail\n", "check", "verdict");
        for r in &self.rows {
            let v = if r.verdict.is_pass() { "PASS" } else { "FAIL" };
            s.push_str(&format!("{:<width$}  {:<7}  {}\n", r.check, v, r.detail));
        }
        s.push_str(&format!("overall: {}\n", if self.verdict.is_pass() { "PASS" } else { "FAIL" }));
        s
    }
}

/// A finished run: the report plus named artifact files.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.report.verdict.is_pass()
    }

    /// Writes `report.json` and every artifact into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.report.to_json()?)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// Process exit code for a run result: 0 pass, 1 failed check, 2 bad input, 3 numerical failure.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed() => 0,
        Ok(_) => 1,
        Err(e) if e.is_config() || matches!(e, Error::Io(_)) => 2,
        Err(_) => 3,
    }
}

/// Reproduces every closed form; a mismatch is a numerical error.
pub fn run_closed_forms() -> Result<Outcome> {
    let cf = reproduce_closed_forms()?;
    cf.ensure()?;
    let mut report = Report::new(Command::ClosedForms, "closed-forms", 0);
    report.rows = cf
        .checks
        .iter()
        .map(|c| Row::new(&c.name, c.verdict.is_pass(), format!("error {:.3e}", c.error)))
        .collect();
    report.closed_forms = Some(cf);
    Ok(finish(report, Vec::new()))
}

/// Runs `command` on `scenario` with the given seed.
pub fn run(command: Command, scenario: &Scenario, seed: u64) -> Result<Outcome> {
    if command == Command::ClosedForms {
        return run_closed_forms();
    }
    scenario.validate()?;
    let mut report = Report::new(command, &scenario.name, seed);
    let mut files = Vec::new();
    let all = command == Command::All;
    if all || command == Command::Verify {
        verify(scenario, &mut report)?;
    }
    if all || command == Command::Reduce {
        reduce(scenario, &mut report, &mut files)?;
    }
    if all || command == Command::Estimates {
        estimates(scenario, seed, &mut report, &mut files)?;
    }
    // `all` runs evolution only when the scenario configures a time horizon.
    if command == Command::Evolve || (all && scenario.time.is_some()) {
        evolve(scenario, &mut report, &mut files)?;
    }
    Ok(finish(report, files))
}

fn finish(mut report: Report, files: Vec<(String, String)>) -> Outcome {
    report.verdict = Verdict::from_bool(report.rows.iter().all(|r| r.verdict.is_pass()));
    Outcome { report, files }
}

fn verify(s: &Scenario, report: &mut Report) -> Result<()> {
    let profile = s.metric()?;
    let adm = check_admissibility(&profile, s.n)?;
    for c in &adm.conditions {
        let witness = c.witness_r.map(|r| format!(" witness r = {r:.6}")).unwrap_or_default();
        report.rows.push(Row::new(&c.name, c.verdict.is_pass(), format!("{}{witness}", c.detail)));
    }
    if let Delta0::Value(d) = s.delta0 {
        let c = check_delta0(&profile, s.n, d)?;
        report.rows.push(Row::new(&c.name, c.verdict.is_pass(), c.detail.clone()));
        report.delta0_check = Some(c);
    }
    report.admissibility = Some(adm);
    Ok(())
}

fn reduced_operator(red: &ReducedProblem, grid: &RadialGrid) -> Result<DiscreteRadialOperator> {
    let op = build_operator(grid, red.m, &|r| red.w_potential(r).unwrap_or(f64::NAN))?;
    if op.potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("reduced potential is not finite for {}", red.profile.label())));
    }
    Ok(op)
}

fn coarse_grid(s: &Scenario, cells: usize) -> Result<RadialGrid> {
    RadialGrid::new(s.grid.r_max, s.grid.n.min(cells))
}

fn reduce(s: &Scenario, report: &mut Report, files: &mut Vec<(String, String)>) -> Result<()> {
    let red = ReducedProblem::new(&s.metric()?, s.n, s.k)?;
    let radii: Vec<f64> = SUMMARY_RADII.iter().copied().filter(|&r| r <= s.grid.r_max).collect();
    let summary = red.summary(&radii)?;
    let i = red.indices;
    let wave_admissible = Indices::wave_admissible(i.m, i.p, i.q);
    let scaling_relation = Indices::sobolev_line(i.m, i.p, i.q);
    report.rows.push(Row::new("indices_wave_admissible", wave_admissible, format!("m = {}, (p, q) = ({}, {})", i.m, i.p, i.q)));
    report.rows.push(Row::new("indices_scaling_relation", scaling_relation, "1/p + m/q = (m-1)/2"));

    let grid = coarse_grid(s, DIAGNOSTIC_CELLS)?;
    let op = reduced_operator(&red, &grid)?;
    let ev = op.eigenvalues()?;
    let (lo, hi) = (ev[0], *ev.last().unwrap());
    let ok = lo >= -SPECTRUM_TOL * hi.abs().max(1.0);
    report.rows.push(Row::new("spectrum_nonnegative", ok, format!("lowest eigenvalue {lo:.6e} on {} cells", grid.n)));
    files.push(("spectrum.csv".into(), op.spectrum_csv()?));
    report.reduction = Some(ReductionReport {
        summary,
        wave_admissible,
        scaling_relation,
        spectrum_cells: grid.n,
        spectrum_min: lo,
        spectrum_max: hi,
    });
    Ok(())
}

/// Random combinations of the lowest eigenmodes of `free`, normalized in sup norm.
pub fn band_limited_family(free: &DiscreteRadialOperator, count: usize, modes: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = free.grid.n;
    (0..count)
        .map(|_| {
            let mut c = vec![0.0; dim];
            for cj in c.iter_mut().take(modes.min(dim)) {
                *cj = rng.gen_range(-1.0..1.0);
            }
            let v = free.synthesize(&c)?;
            let sup = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            Ok(if sup > 0.0 { v.iter().map(|x| x / sup).collect() } else { v })
        })
        .collect()
}

fn searched_delta0(s: &Scenario, report: &Report) -> Result<f64> {
    match s.delta0 {
        Delta0::Value(d) => Ok(d),
        Delta0::Search => {
            let found = match &report.admissibility {
                Some(a) => a.delta0,
                None => check_admissibility(&s.metric()?, s.n)?.delta0,
            };
            found.ok_or_else(|| Error::HypothesisFail("no admissible delta0 on the search ladder".into()))
        }
    }
}

fn estimates(s: &Scenario, seed: u64, report: &mut Report, files: &mut Vec<(String, String)>) -> Result<()> {
    let e = &s.estimates;
    let mut checks: Vec<CheckName> = s.checks.iter().copied().filter(|c| c.is_estimate()).collect();
    checks.sort();
    checks.dedup();
    let mut push = |report: &mut Report, r: RatioReport, file: &str| {
        let detail = match r.bound {
            Some(b) => format!("sup ratio {:.6e} vs bound {b:.6e}", r.sup_ratio),
            None => format!("ratio bracket [{:.6e}, {:.6e}]", r.inf_ratio, r.sup_ratio),
        };
        report.rows.push(Row::new(file, r.verdict.is_pass(), detail));
        files.push((format!("ratios_{file}.csv"), r.to_csv()));
        report.estimates.push(r);
    };
    for check in checks {
        match check {
            CheckName::Hardy => {
                let alpha = match &e.hardy_alpha {
                    Some(a) => Expr::parse(a)?,
                    None => Expr::parse(&format!("r^({})", 1 - s.n as i64))?,
                };
                let family = bump_family(e.family_size, seed, &[1.0, 1.5, 2.0]);
                push(report, hardy_check(&alpha, s.n, &family)?, "hardy");
            }
            CheckName::Hardy2 => {
                let zeta = Expr::parse(&e.zeta)?;
                let family = bump_family(e.family_size, seed, &[1.0, 1.5, 2.0]);
                push(report, hardy2_check(&zeta, e.epsilon, s.n, &family)?, "hardy2");
            }
            CheckName::Smoothing => {
                let delta0 = searched_delta0(s, report)?;
                let lambdas: Vec<Complex64> = e.lambdas.iter().map(|l| Complex64::new(l[0], l[1])).collect();
                let family = bump_family(e.smoothing_family_size, seed, &[0.0]);
                let r = smoothing_check(&s.metric()?, s.n, s.k, delta0, &lambdas, &family, &s.radial_grid()?)?;
                push(report, r, "smoothing");
            }
            CheckName::Strichartz => {
                let red = ReducedProblem::new(&s.metric()?, s.n, s.k)?;
                let grid = RadialGrid::new(s.grid.r_max, e.strichartz_cells)?;
                let op = reduced_operator(&red, &grid)?;
                let free = DiscreteRadialOperator::free(&grid, red.m)?;
                let family = band_limited_family(&free, e.family_size, BAND_MODES, seed)?;
                let nu = red.h_infinity.max(0.0);
                let r = strichartz_monitor(
                    &op,
                    &free,
                    nu,
                    red.indices.p,
                    red.indices.q,
                    &family,
                    e.strichartz_horizon,
                    e.strichartz_time_samples,
                )?;
                push(report, r, "strichartz");
            }
            CheckName::Dimshift => {
                let grid = coarse_grid(s, DIAGNOSTIC_CELLS)?;
                let family = multiscale_family(e.family_size, seed, 4.0);
                for &order in &e.dimshift_orders {
                    let r = dimshift_check(s.n, s.k, order, &family, &grid)?;
                    push(report, r, &format!("dimshift_s{order}"));
                }
            }
            CheckName::NormEquivalence => {
                let red = ReducedProblem::new(&s.metric()?, s.n, s.k)?;
                let grid = coarse_grid(s, DIAGNOSTIC_CELLS)?;
                let op = reduced_operator(&red, &grid)?;
                let free = DiscreteRadialOperator::free(&grid, red.m)?;
                let family = band_limited_family(&free, e.family_size, BAND_MODES, seed)?;
                push(report, norm_equivalence_check(&op, &free, e.norm_order, &family)?, "norm_equivalence");
            }
            CheckName::Consistency | CheckName::Reversal => {}
        }
    }
    Ok(())
}

fn evolve(s: &Scenario, report: &mut Report, files: &mut Vec<(String, String)>) -> Result<()> {
    let problem = s.wave_problem()?;
    let traj = integrate(&problem, Formulation::Phi)?;
    let trace = strichartz_trace(&traj, &problem)?;
    files.push(("trajectory.csv".into(), traj.to_csv()));

    let growth_ok = traj.max_sup <= SUP_GROWTH_LIMIT * traj.initial_sup;
    report.rows.push(Row::new(
        "sup_bounded",
        growth_ok,
        format!("max sup {:.6e}, initial {:.6e}", traj.max_sup, traj.initial_sup),
    ));
    report.rows.push(Row::new(
        "energy_drift",
        traj.energy_drift <= ENERGY_DRIFT_TOL,
        format!("{:.3e} (tolerance {ENERGY_DRIFT_TOL:.0e})", traj.energy_drift),
    ));
    report.rows.push(Row::new(
        "target_bound",
        !traj.target_bound_exceeded,
        format!("bound {:.6}", problem.target.bound()),
    ));
    report.rows.push(Row::new("strichartz_trace", trace.is_finite(), format!("{trace:.6e}")));

    let consistency = if s.checks.contains(&CheckName::Consistency) {
        let c = consistency_check(&problem)?;
        let detail = format!(
            "mismatch {:.3e} / {:.3e}, ratio {}",
            c.runs[0].mismatch,
            c.runs[1].mismatch,
            c.ratio.map(|r| format!("{r:.3}")).unwrap_or_else(|| "exact".into())
        );
        report.rows.push(Row::new("consistency", c.verdict.is_pass(), detail));
        Some(c)
    } else {
        None
    };
    let reversal_error = if s.checks.contains(&CheckName::Reversal) {
        let err = time_reversal_error(&problem, Formulation::Phi)?;
        report.rows.push(Row::new("reversal", err <= REVERSAL_TOL, format!("{err:.3e}")));
        Some(err)
    } else {
        None
    };
    report.evolution = Some(EvolutionReport { trajectory: traj, strichartz_trace: trace, consistency, reversal_error });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(extra: &str) -> Scenario {
        Scenario::from_json(&format!(
            r#"{{
                "name": "t",
                "manifold": {{"kind": "hyperbolic"}},
                "n": 3, "k": 1,
                "grid": {{"r_max": 20.0, "n": 800}},
                "time": {{"t_final": 4.0}},
                "data": {{"amplitude": 0.05, "support": 10.0}}
                {extra}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn exit_codes_follow_the_outcome() {
        assert_eq!(exit_code(&Err(Error::Config("x".into()))), 2);
        assert_eq!(exit_code(&Err(Error::BlowUp { t: 1.0, r: 1.0 })), 3);
        let ok = run(Command::Reduce, &scenario(""), 0);
        assert_eq!(exit_code(&ok), 0);
    }

    #[test]
    fn evolve_is_deterministic() {
        let s = scenario(r#", "checks": ["reversal"]"#);
        let a = run(Command::Evolve, &s, 0).unwrap();
        let b = run(Command::Evolve, &s, 0).unwrap();
        assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
        assert!(a.passed(), "{}", a.report.summary_table());
        assert!(a.files.iter().any(|(n, _)| n == "trajectory.csv"));
    }

    #[test]
    fn band_limited_family_is_seeded() {
        let grid = RadialGrid::new(10.0, 50).unwrap();
        let free = DiscreteRadialOperator::free(&grid, 5).unwrap();
        let a = band_limited_family(&free, 3, 8, 7).unwrap();
        let b = band_limited_family(&free, 3, 8, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (v.iter().fold(0.0f64, |m, x| m.max(x.abs())) - 1.0).abs() < 1e-12));
    }
}
