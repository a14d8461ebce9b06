//! Nonlinear time integration of the equivariant wave map in two forms.
//!
//! * `phi`-form: `phi_tt = phi_rr + (n-1) h'/h phi_r - lbar g g'(phi) / h^2`,
//!   discretized as a finite-volume flux difference with face weights
//!   `h^{n-1}` and stepped in `u = h^{(n-1)/2} phi`.
//! * `psi`-form: `psi_tt = Delta_{R^m} psi - V psi - r^{m-1} h^{-n-1} psi^3 Gamma(w psi)`,
//!   using the spectral stencil in `v~ = r^{(m-1)/2} psi`.
//!
//! Both are advanced by velocity Verlet, which is explicit and time-symmetric.

use serde::{Deserialize, Serialize};

use crate::admissibility::Verdict;
use crate::error::{Error, Result};
use crate::estimates::lq_norm;
use crate::grid::RadialGrid;
use crate::profiles::{MetricProfile, TargetProfile};
use crate::reduction::ReducedProblem;
use crate::spectral::{DiscreteRadialOperator, Shift};

/// Default blow-up ceiling as a multiple of the initial sup-norm.
pub const BLOWUP_FACTOR: f64 = 1e3;
/// Upper bound on the CFL factor `dt / dr`.
pub const MAX_DT_FACTOR: f64 = 0.5;
/// Spectral diagnostics run on a grid with at most this many cells.
pub const DIAGNOSTIC_CELLS: usize = 1000;
/// Radius of the ball used for the local energy.
pub const LOCAL_RADIUS: f64 = 1.0;
/// Mismatch tolerance between the two formulations at the base resolution.
pub const CONSISTENCY_TOL: f64 = 1e-4;
/// Accepted band for the mismatch ratio under `N -> 2N`.
pub const ORDER_BAND: (f64, f64) = (3.4, 4.6);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Phi,
    Psi,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataShape {
    /// `A r^k exp(-(r/width)^2)`, cut off at `support`.
    #[default]
    Gaussian,
    /// `A r^k exp(1 - 1/(1 - (r/support)^2))`, compactly supported.
    Bump,
}

fn default_width() -> f64 {
    1.0
}

fn default_support() -> f64 {
    10.0
}

/// Initial data `(phi_0, phi_1)`, both carrying the factor `r^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub amplitude: f64,
    #[serde(default)]
    pub shape: DataShape,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_support")]
    pub support: f64,
    #[serde(default)]
    pub velocity_amplitude: f64,
}

impl InitialData {
    pub fn gaussian(amplitude: f64) -> Self {
        InitialData {
            amplitude,
            shape: DataShape::Gaussian,
            width: default_width(),
            support: default_support(),
            velocity_amplitude: 0.0,
        }
    }

    fn profile(&self, k: usize, r: f64) -> f64 {
        if r >= self.support {
            return 0.0;
        }
        let rk = r.powi(k as i32);
        match self.shape {
            DataShape::Gaussian => rk * (-(r / self.width).powi(2)).exp(),
            DataShape::Bump => {
                let z = r / self.support;
                rk * (1.0 - 1.0 / (1.0 - z * z)).exp()
            }
        }
    }

    /// `(phi_0, phi_1)` at the nodes.
    pub fn sample(&self, k: usize, nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let base: Vec<f64> = nodes.iter().map(|&r| self.profile(k, r)).collect();
        (
            base.iter().map(|b| self.amplitude * b).collect(),
            base.iter().map(|b| self.velocity_amplitude * b).collect(),
        )
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.amplitude, self.width, self.support, self.velocity_amplitude];
        if finite.iter().any(|v| !v.is_finite()) || !(self.width > 0.0) || !(self.support > 0.0) {
            return Err(Error::Config("initial data needs finite amplitude and positive width and support".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct WaveProblem {
    pub profile: MetricProfile,
    pub target: TargetProfile,
    pub n: usize,
    pub k: usize,
    pub grid: RadialGrid,
    pub t_final: f64,
    pub dt_factor: f64,
    pub snap_every: f64,
    pub data: InitialData,
    pub blowup_factor: f64,
    /// Compute the spectral norms (`h_half_norm`, fractional Strichartz weights).
    pub spectral_diagnostics: bool,
}

impl WaveProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        profile: MetricProfile,
        target: TargetProfile,
        n: usize,
        k: usize,
        grid: RadialGrid,
        t_final: f64,
        dt_factor: f64,
        snap_every: f64,
        data: InitialData,
    ) -> Result<Self> {
        let p = WaveProblem {
            profile,
            target,
            n,
            k,
            grid,
            t_final,
            dt_factor,
            snap_every,
            data,
            blowup_factor: BLOWUP_FACTOR,
            spectral_diagnostics: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.k < 1 {
            return Err(Error::Config(format!("need n >= 3 and k >= 1, got n = {}, k = {}", self.n, self.k)));
        }
        if !(self.dt_factor > 0.0 && self.dt_factor <= MAX_DT_FACTOR) {
            return Err(Error::Config(format!("dt_factor = {} must lie in (0, {MAX_DT_FACTOR}]", self.dt_factor)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) || !(self.snap_every > 0.0) {
            return Err(Error::Config("need T >= 0 and snap_every > 0".into()));
        }
        self.data.validate()?;
        let budget = self.grid.r_max - self.data.support.min(self.grid.r_max);
        if self.t_final > budget + 1e-12 {
            return Err(Error::Config(format!(
                "T = {} exceeds R_max - support = {budget}; boundary reflections would reach the data",
                self.t_final
            )));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::Config("blow-up factor must exceed 1".into()));
        }
        Ok(())
    }

    /// Same problem on a grid with `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let mut p = self.clone();
        p.grid = RadialGrid::new(self.grid.r_max, self.grid.n * factor)?;
        Ok(p)
    }

    pub fn m(&self) -> usize {
        self.n + 2 * self.k
    }

    /// Snapshot times `0, snap, 2 snap, ..., T`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut t = vec![0.0];
        let count = (self.t_final / self.snap_every - 1e-9).ceil().max(0.0) as usize;
        for i in 1..=count {
            t.push((i as f64 * self.snap_every).min(self.t_final));
        }
        t
    }

    /// Nominal step and the number of steps per snapshot interval.
    fn step_plan(&self) -> (f64, usize) {
        let target = self.dt_factor * self.grid.dr();
        let steps = (self.snap_every / target - 1e-9).ceil().max(1.0) as usize;
        (self.snap_every / steps as f64, steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveState {
    pub t: f64,
    pub field: Vec<f64>,
    pub velocity: Vec<f64>,
    pub formulation: Formulation,
}

/// Node-wise conversion factors shared by both forms.
struct Geometry {
    nodes: Vec<f64>,
    ln_h: Vec<f64>,
    /// `h^{-(n-1)/2}`: maps the symmetric variable to `phi` in both forms.
    to_phi: Vec<f64>,
    /// `r^{-(m-1)/2}`: maps the symmetric variable to `psi`.
    to_psi: Vec<f64>,
}

impl Geometry {
    fn new(p: &WaveProblem) -> Result<Self> {
        let nodes = p.grid.nodes();
        let half = (p.n as f64 - 1.0) / 2.0;
        let alpha = (p.m() as f64 - 1.0) / 2.0;
        let ln_h: Vec<f64> = nodes.iter().map(|&r| p.profile.ln_value(r)).collect();
        if let Some(j) = ln_h.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("h(r) not positive at r = {}", nodes[j])));
        }
        let to_phi = ln_h.iter().map(|l| (-half * l).exp()).collect();
        let to_psi = nodes.iter().map(|r| (-alpha * r.ln()).exp()).collect();
        Ok(Geometry { nodes, ln_h, to_phi, to_psi })
    }

    fn to_symmetric(&self, form: Formulation, field: &[f64]) -> Vec<f64> {
        let f = match form {
            Formulation::Phi => &self.to_phi,
            Formulation::Psi => &self.to_psi,
        };
        field.iter().zip(f).map(|(x, c)| x / c).collect()
    }

    fn from_symmetric(&self, form: Formulation, x: &[f64]) -> Vec<f64> {
        let f = match form {
            Formulation::Phi => &self.to_phi,
            Formulation::Psi => &self.to_psi,
        };
        x.iter().zip(f).map(|(x, c)| x * c).collect()
    }
}

/// Face weights `h^{n-1}` divided by the node weights, as used by the flux stencil and the energy.
struct FluxWeights {
    /// `h^{n-1}` at the faces `r = (j+1) dr`, the last one at `R_max`.
    ln_face: Vec<f64>,
}

impl FluxWeights {
    fn new(p: &WaveProblem) -> Result<Self> {
        let dr = p.grid.dr();
        let nf = p.n as f64 - 1.0;
        let ln_face: Vec<f64> = (0..p.grid.n).map(|j| nf * p.profile.ln_value((j + 1) as f64 * dr)).collect();
        if ln_face.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("h not positive on a cell face".into()));
        }
        Ok(FluxWeights { ln_face })
    }
}

struct Stepper {
    form: Formulation,
    diag: Vec<f64>,
    /// Magnitude of the (negative) off-diagonal entries.
    off: Vec<f64>,
    /// Nonlinear multiplier per node.
    nl: Vec<f64>,
    to_phi: Vec<f64>,
    to_psi: Vec<f64>,
    lbar: f64,
    target: TargetProfile,
    /// `lbar h^{n-3} / 2`, the weight of the potential energy density.
    pot: Vec<f64>,
    dr: f64,
    local_cells: usize,
}

impl Stepper {
    fn new(p: &WaveProblem, form: Formulation, geo: &Geometry) -> Result<Self> {
        let n_cells = p.grid.n;
        let dr2 = p.grid.dr() * p.grid.dr();
        let nf = p.n as f64;
        let red = ReducedProblem::new(&p.profile, p.n, p.k)?;
        let (diag, off, nl) = match form {
            Formulation::Phi => {
                let fw = FluxWeights::new(p)?;
                let ln_node: Vec<f64> = geo.ln_h.iter().map(|l| (nf - 1.0) * l).collect();
                let mut diag = vec![0.0; n_cells];
                let mut off = vec![0.0; n_cells - 1];
                for j in 0..n_cells - 1 {
                    off[j] = (fw.ln_face[j] - 0.5 * (ln_node[j] + ln_node[j + 1])).exp() / dr2;
                    diag[j] += (fw.ln_face[j] - ln_node[j]).exp() / dr2;
                    diag[j + 1] += (fw.ln_face[j] - ln_node[j + 1]).exp() / dr2;
                }
                // Dirichlet face at R_max, half a cell from the last node.
                diag[n_cells - 1] += 2.0 * (fw.ln_face[n_cells - 1] - ln_node[n_cells - 1]).exp() / dr2;
                // s / h^2 with s = h^{(n-1)/2}.
                let nl = geo.ln_h.iter().map(|l| (((nf - 1.0) / 2.0 - 2.0) * l).exp()).collect();
                (diag, off, nl)
            }
            Formulation::Psi => {
                let v: Vec<f64> = geo.nodes.iter().map(|&r| red.v(r)).collect::<Result<_>>()?;
                let op = DiscreteRadialOperator::new(&p.grid, p.m(), &|r| {
                    let j = ((r / p.grid.dr()) - 0.5).round() as usize;
                    v[j.min(v.len() - 1)]
                })?;
                let off = vec![-op.off_diagonal(); n_cells - 1];
                let nl = geo
                    .nodes
                    .iter()
                    .zip(&geo.to_psi)
                    .map(|(&r, tp)| Ok(red.cubic_coefficient(r)? / tp))
                    .collect::<Result<_>>()?;
                (op.diagonal().to_vec(), off, nl)
            }
        };
        Ok(Stepper {
            form,
            diag,
            off,
            nl,
            to_phi: geo.to_phi.clone(),
            to_psi: geo.to_psi.clone(),
            lbar: red.lbar,
            target: p.target.clone(),
            pot: geo.ln_h.iter().map(|l| 0.5 * red.lbar * ((nf - 3.0) * l).exp()).collect(),
            dr: p.grid.dr(),
            local_cells: geo.nodes.iter().filter(|&&r| r <= LOCAL_RADIUS).count(),
        })
    }

    /// Discrete energy conserved by the scheme up to `O(dt^2)`, total and
    /// inside `r <= LOCAL_RADIUS`. In the `phi`-form this is the flux
    /// quadrature of `1/2 int (phi_t^2 + phi_r^2 + lbar g^2 / h^2) h^{n-1} dr`;
    /// the `psi`-form carries `lbar phi^2 / h^2` in its linear part.
    fn energy(&self, x: &[f64], v: &[f64]) -> (f64, f64) {
        let n = x.len();
        let (mut total, mut local) = (0.0, 0.0);
        for j in 0..n {
            let mut lin = self.diag[j] * x[j];
            if j > 0 {
                lin -= self.off[j - 1] * x[j - 1];
            }
            if j + 1 < n {
                lin -= self.off[j] * x[j + 1];
            }
            let phi = x[j] * self.to_phi[j];
            let g = self.target.g(phi);
            let pot = match self.form {
                Formulation::Phi => g * g,
                Formulation::Psi => g * g - phi * phi,
            };
            let e = 0.5 * v[j] * v[j] + 0.5 * x[j] * lin + self.pot[j] * pot;
            total += e;
            if j < self.local_cells {
                local += e;
            }
        }
        (total * self.dr, local * self.dr)
    }

    /// Gershgorin bound of the linearized operator.
    fn spectral_bound(&self) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|j| {
                let left = if j > 0 { self.off[j - 1] } else { 0.0 };
                let right = if j + 1 < n { self.off[j] } else { 0.0 };
                let lin = match self.form {
                    Formulation::Phi => self.lbar * self.nl[j] * self.to_phi[j],
                    Formulation::Psi => 0.0,
                };
                self.diag[j] + left + right + lin
            })
            .fold(0.0, f64::max)
    }

    fn accel(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for j in 0..n {
            let mut a = -self.diag[j] * x[j];
            if j > 0 {
                a += self.off[j - 1] * x[j - 1];
            }
            if j + 1 < n {
                a += self.off[j] * x[j + 1];
            }
            let phi = x[j] * self.to_phi[j];
            a -= match self.form {
                Formulation::Phi => self.nl[j] * self.lbar * self.target.g_gprime(phi),
                Formulation::Psi => {
                    let psi = x[j] * self.to_psi[j];
                    self.nl[j] * psi * psi * psi * self.target.gamma_unchecked(self.lbar, phi)
                }
            };
            out[j] = a;
        }
    }
}

/// Velocity Verlet in symmetric variables with a cached acceleration.
struct Integrator {
    stepper: Stepper,
    x: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
}

impl Integrator {
    fn new(stepper: Stepper, x: Vec<f64>, v: Vec<f64>) -> Self {
        let mut a = vec![0.0; x.len()];
        stepper.accel(&x, &mut a);
        Integrator { stepper, x, v, a }
    }

    fn step(&mut self, dt: f64) {
        let h = 0.5 * dt;
        for ((x, v), a) in self.x.iter_mut().zip(self.v.iter_mut()).zip(&self.a) {
            *v += h * a;
            *x += dt * *v;
        }
        self.stepper.accel(&self.x, &mut self.a);
        for (v, a) in self.v.iter_mut().zip(&self.a) {
            *v += h * a;
        }
    }

    fn reverse(&mut self) {
        self.v.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Energy of a state; `psi`-form states are mapped to `phi = w psi` first.
pub fn energy(state: &WaveState, problem: &WaveProblem) -> Result<f64> {
    let geo = Geometry::new(problem)?;
    let (phi, phi_t) = phi_fields(&geo, state)?;
    let st = Stepper::new(problem, Formulation::Phi, &geo)?;
    let x = geo.to_symmetric(Formulation::Phi, &phi);
    let v = geo.to_symmetric(Formulation::Phi, &phi_t);
    Ok(st.energy(&x, &v).0)
}

fn phi_fields(geo: &Geometry, state: &WaveState) -> Result<(Vec<f64>, Vec<f64>)> {
    if state.field.len() != geo.nodes.len() || state.velocity.len() != geo.nodes.len() {
        return Err(Error::Dimension("state does not match the grid".into()));
    }
    Ok(match state.formulation {
        Formulation::Phi => (state.field.clone(), state.velocity.clone()),
        Formulation::Psi => {
            let w: Vec<f64> = geo.to_phi.iter().zip(&geo.to_psi).map(|(p, s)| p / s).collect();
            (
                state.field.iter().zip(&w).map(|(a, b)| a * b).collect(),
                state.velocity.iter().zip(&w).map(|(a, b)| a * b).collect(),
            )
        }
    })
}

fn psi_field(geo: &Geometry, state: &WaveState) -> Vec<f64> {
    match state.formulation {
        Formulation::Psi => state.field.clone(),
        Formulation::Phi => {
            let x = geo.to_symmetric(Formulation::Phi, &state.field);
            geo.from_symmetric(Formulation::Psi, &x)
        }
    }
}

/// Initial state in the requested form.
pub fn initial_state(problem: &WaveProblem, formulation: Formulation) -> Result<WaveState> {
    let geo = Geometry::new(problem)?;
    let (phi0, phi1) = problem.data.sample(problem.k, &geo.nodes);
    let to = |f: &[f64]| geo.from_symmetric(formulation, &geo.to_symmetric(Formulation::Phi, f));
    Ok(WaveState { t: 0.0, field: to(&phi0), velocity: to(&phi1), formulation })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub energy: f64,
    /// `sup |phi|`.
    pub sup: f64,
    /// `|| |D|^{1/2} psi ||_{L^2(R^m)}`.
    pub h_half_norm: Option<f64>,
    pub local_energy: f64,
    /// Running `L^p_t L^q_x` norm of `|D|^{1/q-1/p} psi` up to `t`.
    pub strichartz_partial: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub formulation: Formulation,
    pub dt: f64,
    pub steps: usize,
    pub initial_sup: f64,
    pub max_sup: f64,
    pub energy_drift: f64,
    /// `|phi|` reached the target bound (the sphere's `pi`).
    pub target_bound_exceeded: bool,
    pub snapshots: Vec<Snapshot>,
    #[serde(skip)]
    pub states: Vec<WaveState>,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let mut s = String::from("t,energy,sup,h_half_norm,strichartz_partial\n");
        for x in &self.snapshots {
            s.push_str(&format!(
                "{:.9},{:.12e},{:.12e},{},{}\n",
                x.t,
                x.energy,
                x.sup,
                opt(x.h_half_norm),
                opt(x.strichartz_partial)
            ));
        }
        s
    }
}

/// Coarse-grid measurement of `psi` for the spectral and Strichartz diagnostics.
struct Diagnostics {
    factor: usize,
    coarse: RadialGrid,
    m: usize,
    p: f64,
    q: f64,
    sigma: f64,
    free: Option<DiscreteRadialOperator>,
}

impl Diagnostics {
    fn new(problem: &WaveProblem) -> Result<Self> {
        let n = problem.grid.n;
        let factor = (1..=n).find(|f| n % f == 0 && n / f <= DIAGNOSTIC_CELLS).unwrap_or(n);
        let coarse = if factor == 1 { problem.grid } else { problem.grid.coarsen(factor)? };
        let idx = crate::reduction::Indices::new(problem.n, problem.k)?;
        let to_f = |r: num_rational::Ratio<i64>| *r.numer() as f64 / *r.denom() as f64;
        let (p, q) = (to_f(idx.p), to_f(idx.q));
        let sigma = 1.0 / q - 1.0 / p;
        let free = if problem.spectral_diagnostics {
            Some(DiscreteRadialOperator::free(&coarse, problem.m())?)
        } else {
            None
        };
        Ok(Diagnostics { factor, coarse, m: problem.m(), p, q, sigma, free })
    }

    fn coarsen(&self, f: &[f64]) -> Vec<f64> {
        f.chunks(self.factor).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    }

    fn h_half(&self, psi: &[f64]) -> Result<Option<f64>> {
        match &self.free {
            Some(op) => Ok(Some(op.frac_norm(0.5, Shift::Homogeneous, &self.coarsen(psi))?)),
            None => Ok(None),
        }
    }

    /// `|| |D|^sigma psi ||_{L^q}` at one time.
    fn space_norm(&self, psi: &[f64]) -> Result<Option<f64>> {
        let c = self.coarsen(psi);
        if self.sigma == 0.0 {
            return Ok(Some(lq_norm(&self.coarse, self.m, c.iter().copied(), self.q)));
        }
        match &self.free {
            Some(op) => {
                let d = op.apply_power(self.sigma, Shift::Homogeneous, &c)?;
                Ok(Some(lq_norm(&self.coarse, self.m, d.iter().copied(), self.q)))
            }
            None => Ok(None),
        }
    }
}

/// Running trapezoid values of `(int_0^t N(s)^p ds)^{1/p}`.
fn running_lp(times: &[f64], norms: &[Option<f64>], p: f64) -> Vec<Option<f64>> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        if norms[..=i].iter().any(|v| v.is_none()) {
            out.push(None);
            continue;
        }
        if i > 0 {
            let (a, b) = (norms[i - 1].unwrap(), norms[i].unwrap());
            acc += 0.5 * (times[i] - times[i - 1]) * (a.powf(p) + b.powf(p));
        }
        out.push(Some(acc.powf(1.0 / p)));
    }
    out
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

/// Integrates to `T`, recording a snapshot every `snap_every`.
pub fn integrate(problem: &WaveProblem, formulation: Formulation) -> Result<Trajectory> {
    problem.validate()?;
    let geo = Geometry::new(problem)?;
    let stepper = Stepper::new(problem, formulation, &geo)?;
    let (dt, _) = problem.step_plan();
    let limit = 2.0 / stepper.spectral_bound().sqrt();
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    let init = initial_state(problem, formulation)?;
    let field_conv = match formulation {
        Formulation::Phi => geo.to_phi.clone(),
        Formulation::Psi => geo.to_psi.clone(),
    };
    let scale = sup_abs(&init.field).max(problem.t_final * sup_abs(&init.velocity));
    let ceiling = problem.blowup_factor * scale;
    let diag = Diagnostics::new(problem)?;
    let times = problem.snapshot_times();

    let mut integ = Integrator::new(
        stepper,
        geo.to_symmetric(formulation, &init.field),
        geo.to_symmetric(formulation, &init.velocity),
    );
    let mut states = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut steps = 0;
    for (i, &ts) in times.iter().enumerate() {
        if i > 0 {
            let span = ts - t;
            let count = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
            let h = span / count as f64;
            for s in 0..count {
                integ.step(h);
                steps += 1;
                let now = t + (s + 1) as f64 * h;
                for (j, (x, c)) in integ.x.iter().zip(&field_conv).enumerate() {
                    let f = x * c;
                    if !f.is_finite() || f.abs() > ceiling {
                        return Err(Error::BlowUp { t: now, r: geo.nodes[j] });
                    }
                }
            }
            t = ts;
        }
        states.push(WaveState {
            t: ts,
            field: geo.from_symmetric(formulation, &integ.x),
            velocity: geo.from_symmetric(formulation, &integ.v),
            formulation,
        });
    }
    summarize(problem, &geo, &integ.stepper, &diag, formulation, dt, steps, states)
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    problem: &WaveProblem,
    geo: &Geometry,
    stepper: &Stepper,
    diag: &Diagnostics,
    formulation: Formulation,
    dt: f64,
    steps: usize,
    states: Vec<WaveState>,
) -> Result<Trajectory> {
    let mut snaps = Vec::with_capacity(states.len());
    let mut space = Vec::with_capacity(states.len());
    for s in &states {
        let (phi, _) = phi_fields(geo, s)?;
        let (e, local) = stepper.energy(&geo.to_symmetric(formulation, &s.field), &geo.to_symmetric(formulation, &s.velocity));
        let psi = psi_field(geo, s);
        space.push(diag.space_norm(&psi)?);
        snaps.push(Snapshot {
            t: s.t,
            energy: e,
            sup: sup_abs(&phi),
            h_half_norm: diag.h_half(&psi)?,
            local_energy: local,
            strichartz_partial: None,
        });
    }
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    for (snap, v) in snaps.iter_mut().zip(running_lp(&times, &space, diag.p)) {
        snap.strichartz_partial = v;
    }
    let e0 = snaps[0].energy;
    let energy_drift = if e0 == 0.0 {
        0.0
    } else {
        snaps.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max) / e0
    };
    let max_sup = snaps.iter().map(|s| s.sup).fold(0.0, f64::max);
    Ok(Trajectory {
        formulation,
        dt,
        steps,
        initial_sup: snaps[0].sup,
        max_sup,
        energy_drift,
        target_bound_exceeded: max_sup >= problem.target.bound(),
        snapshots: snaps,
        states,
    })
}

/// Discrete `L^p_t` norm of `|D|^{1/q-1/p} (phi / w)` over the stored snapshots,
/// with `(p, q)` the reduced indices of `(n, k)`.
pub fn strichartz_trace(trajectory: &Trajectory, problem: &WaveProblem) -> Result<f64> {
    let geo = Geometry::new(problem)?;
    let mut diag = Diagnostics::new(problem)?;
    if diag.sigma != 0.0 && diag.free.is_none() {
        diag.free = Some(DiscreteRadialOperator::free(&diag.coarse, problem.m())?);
    }
    let norms = trajectory
        .states
        .iter()
        .map(|s| diag.space_norm(&psi_field(&geo, s)))
        .collect::<Result<Vec<_>>>()?;
    let times: Vec<f64> = trajectory.states.iter().map(|s| s.t).collect();
    Ok(running_lp(&times, &norms, diag.p).last().copied().flatten().unwrap_or(0.0))
}

/// Integrates `steps` steps forward, flips the velocity and integrates back;
/// returns `max |phi_back - phi_0| / max |phi_0|` (absolute when `phi_0 = 0`).
pub fn time_reversal_error(problem: &WaveProblem, formulation: Formulation) -> Result<f64> {
    problem.validate()?;
    let geo = Geometry::new(problem)?;
    let stepper = Stepper::new(problem, formulation, &geo)?;
    let (dt, per_snap) = problem.step_plan();
    let steps = ((problem.t_final / problem.snap_every).round() as usize).max(1) * per_snap;
    let init = initial_state(problem, formulation)?;
    let x0 = geo.to_symmetric(formulation, &init.field);
    let mut integ = Integrator::new(stepper, x0.clone(), geo.to_symmetric(formulation, &init.velocity));
    for _ in 0..steps {
        integ.step(dt);
    }
    integ.reverse();
    for _ in 0..steps {
        integ.step(dt);
    }
    let back = geo.from_symmetric(Formulation::Phi, &integ.x);
    let phi0 = geo.from_symmetric(Formulation::Phi, &x0);
    let err = back.iter().zip(&phi0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = sup_abs(&phi0);
    Ok(if scale > 0.0 { err / scale } else { err })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyRun {
    pub cells: usize,
    pub dt: f64,
    /// `max_t || w psi - phi ||_inf`.
    pub mismatch: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub runs: Vec<ConsistencyRun>,
    /// `mismatch(N) / mismatch(2N)`.
    pub ratio: Option<f64>,
    pub tolerance: f64,
    pub order_band: (f64, f64),
    pub verdict: Verdict,
}

fn mismatch(problem: &WaveProblem) -> Result<ConsistencyRun> {
    let mut p = problem.clone();
    p.spectral_diagnostics = false;
    let a = integrate(&p, Formulation::Phi)?;
    let b = integrate(&p, Formulation::Psi)?;
    let geo = Geometry::new(&p)?;
    let mut worst = 0.0f64;
    for (sa, sb) in a.states.iter().zip(&b.states) {
        let (pa, _) = phi_fields(&geo, sa)?;
        let (pb, _) = phi_fields(&geo, sb)?;
        worst = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    Ok(ConsistencyRun { cells: p.grid.n, dt: a.dt, mismatch: worst })
}

/// Runs both forms at `N` and `2N` and compares `phi` with `w psi`.
pub fn consistency_check(problem: &WaveProblem) -> Result<ConsistencyReport> {
    let coarse = mismatch(problem)?;
    let fine = mismatch(&problem.refined(2)?)?;
    let exact = coarse.mismatch == 0.0 && fine.mismatch == 0.0;
    let ratio = if fine.mismatch > 0.0 { Some(coarse.mismatch / fine.mismatch) } else { None };
    let ordered = ratio.is_some_and(|r| r >= ORDER_BAND.0 && r <= ORDER_BAND.1);
    let ok = exact || (coarse.mismatch <= CONSISTENCY_TOL && ordered);
    Ok(ConsistencyReport {
        runs: vec![coarse, fine],
        ratio,
        tolerance: CONSISTENCY_TOL,
        order_band: ORDER_BAND,
        verdict: Verdict::from_bool(ok),
    })
}

/// For a flat target the equation is linear; compares the final `phi` with the
/// spectral propagator of `-Delta_{R^m} + V` applied to the reduced data.
/// Returns `max |phi - phi_ref| / max |phi_0|`.
pub fn linear_reference_error(problem: &WaveProblem, formulation: Formulation) -> Result<f64> {
    if problem.target.kind != crate::profiles::TargetKind::Flat {
        return Err(Error::Config("the linear reference needs a flat target".into()));
    }
    let mut p = problem.clone();
    p.spectral_diagnostics = false;
    let traj = integrate(&p, formulation)?;
    let geo = Geometry::new(&p)?;
    let red = ReducedProblem::new(&p.profile, p.n, p.k)?;
    let v: Vec<f64> = geo.nodes.iter().map(|&r| red.v(r)).collect::<Result<_>>()?;
    let dr = p.grid.dr();
    let op = DiscreteRadialOperator::new(&p.grid, p.m(), &|r| v[(((r / dr) - 0.5).round() as usize).min(v.len() - 1)])?;
    let init = initial_state(&p, Formulation::Psi)?;
    let (psi_t, _) = op.evolve_linear(&init.field, &init.velocity, 0.0, p.t_final)?;
    let reference = WaveState { t: p.t_final, field: psi_t, velocity: vec![0.0; v.len()], formulation: Formulation::Psi };
    let (phi_ref, _) = phi_fields(&geo, &reference)?;
    let (phi, _) = phi_fields(&geo, traj.states.last().expect("at least one snapshot"))?;
    let err = phi.iter().zip(&phi_ref).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = traj.initial_sup;
    Ok(if scale > 0.0 { err / scale } else { err })
}
