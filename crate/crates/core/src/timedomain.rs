//! Finite-difference semi-discretization of the stretching system and of the
//! classical (`mu = 0`) model, with velocity-Verlet time stepping.
//!
//! Displacement and charge live on the nodes `x_i = i dx`, `i = 0..=N`, with
//! `v_0 = p_0 = 0`. The strain energy is assembled cell by cell and the mass is
//! lumped (weight `dx`, `dx/2` at the free end), so the spatial operator is
//! symmetric and the undamped semi-discrete energy is exactly conserved.
//! The voltage enters only through the charge equation at `x = L`, which is
//! equivalent to the ghost-node traces `v_x(L) = -gamma V/(h alpha1)` and
//! `p_x(L) = -alpha V/(h beta alpha1)`.

use std::fmt;
use std::sync::Arc;

use crate::beam::{derive_constants, BeamParameters, DerivedConstants};
use crate::error::{Error, Result};
use crate::linalg::count_below;
use crate::spectral::{self, ModalCoefficients, StateFunctions};

/// Smallest admissible number of cells.
pub const MIN_CELLS: usize = 16;
pub const DEFAULT_CFL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub cells: usize,
    pub length: f64,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if cells < MIN_CELLS {
            return Err(Error::InvalidInput(format!(
                "grid needs at least {MIN_CELLS} cells, got {cells}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::NonPositiveParameter {
                name: "length",
                value: length,
            });
        }
        Ok(Self { cells, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.length * i as f64 / self.cells as f64
    }

    /// Lumped mass weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.cells {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }
}

/// Nodal values of `(v, p, vdot, pdot)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub t: f64,
    pub length: f64,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub vdot: Vec<f64>,
    pub pdot: Vec<f64>,
}

impl GridState {
    pub fn zeros(grid: &Grid) -> Self {
        let z = vec![0.0; grid.cells + 1];
        Self {
            t: 0.0,
            length: grid.length,
            v: z.clone(),
            p: z.clone(),
            vdot: z.clone(),
            pdot: z,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> [f64; 4]) -> Self {
        let mut s = Self::zeros(grid);
        for i in 0..=grid.cells {
            let [a, b, c, d] = f(grid.x(i));
            s.v[i] = a;
            s.p[i] = b;
            s.vdot[i] = c;
            s.pdot[i] = d;
        }
        s
    }

    /// Real part of the truncated modal expansion.
    pub fn from_modal(grid: &Grid, coeffs: &ModalCoefficients, dc: &DerivedConstants) -> Self {
        let s = spectral::reconstruct(coeffs, dc, grid.length, grid.cells);
        Self::from_state_functions(&s)
    }

    /// Real parts of sampled fields; the grid is taken from the samples.
    pub fn from_state_functions(s: &StateFunctions) -> Self {
        let re = |v: &Vec<num_complex::Complex64>| v.iter().map(|z| z.re).collect();
        Self {
            t: 0.0,
            length: s.length,
            v: re(&s.v),
            p: re(&s.p),
            vdot: re(&s.vdot),
            pdot: re(&s.pdot),
        }
    }

    pub fn to_state_functions(&self) -> StateFunctions {
        let c = |v: &Vec<f64>| v.iter().map(|&r| num_complex::Complex64::new(r, 0.0)).collect();
        StateFunctions {
            length: self.length,
            v: c(&self.v),
            p: c(&self.p),
            vdot: c(&self.vdot),
            pdot: c(&self.pdot),
        }
    }

    /// Linear interpolation of scattered samples onto the grid. `x` must be
    /// strictly increasing and cover `[0, L]`.
    pub fn from_samples(grid: &Grid, x: &[f64], fields: [&[f64]; 4]) -> Result<Self> {
        if x.len() < 2 || fields.iter().any(|f| f.len() != x.len()) {
            return Err(Error::InvalidInput(
                "sample columns must have equal length of at least 2".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("sample positions must be strictly increasing".into()));
        }
        let tol = 1e-9 * grid.length;
        if x[0] > tol || x[x.len() - 1] < grid.length - tol {
            return Err(Error::InvalidInput(format!(
                "samples cover [{}, {}] but the beam is [0, {}]",
                x[0],
                x[x.len() - 1],
                grid.length
            )));
        }
        let interp = |f: &[f64], xi: f64| -> f64 {
            let k = x.partition_point(|&s| s <= xi).clamp(1, x.len() - 1);
            let (x0, x1) = (x[k - 1], x[k]);
            let w = ((xi - x0) / (x1 - x0)).clamp(0.0, 1.0);
            f[k - 1] * (1.0 - w) + f[k] * w
        };
        Ok(Self::from_fn(grid, |xi| fields.map(|f| interp(f, xi))))
    }

    pub fn cells(&self) -> usize {
        self.v.len() - 1
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.length, self.cells())
    }

    pub fn scaled(&self, k: f64) -> Self {
        let f = |v: &Vec<f64>| v.iter().map(|x| x * k).collect();
        Self {
            t: self.t,
            length: self.length,
            v: f(&self.v),
            p: f(&self.p),
            vdot: f(&self.vdot),
            pdot: f(&self.pdot),
        }
    }

    fn is_finite(&self) -> bool {
        [&self.v, &self.p, &self.vdot, &self.pdot]
            .iter()
            .all(|f| f.iter().all(|x| x.is_finite()))
    }
}

/// Analytic and file-based initial conditions.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// Real part of a modal expansion.
    Modal(ModalCoefficients),
    /// `v = amplitude sin(sigma_j x)`, everything else zero.
    Sine { j: usize, amplitude: f64 },
    /// Gaussian bump in `vdot`.
    Gaussian { center: f64, width: f64, amplitude: f64 },
    /// Compactly supported `cos^4` bump in `vdot` on `[center - half_width, center + half_width]`.
    Bump { center: f64, half_width: f64, amplitude: f64 },
    /// Scattered samples, linearly interpolated.
    Samples {
        x: Vec<f64>,
        v: Vec<f64>,
        p: Vec<f64>,
        vdot: Vec<f64>,
        pdot: Vec<f64>,
    },
}

impl InitialData {
    pub fn build(&self, grid: &Grid, dc: &DerivedConstants) -> Result<GridState> {
        let mut s = match self {
            InitialData::Modal(c) => GridState::from_modal(grid, c, dc),
            InitialData::Sine { j, amplitude } => {
                if *j < 1 {
                    return Err(Error::InvalidTruncation(*j));
                }
                let k = spectral::sigma(*j, grid.length);
                GridState::from_fn(grid, |x| [amplitude * (k * x).sin(), 0.0, 0.0, 0.0])
            }
            InitialData::Gaussian {
                center,
                width,
                amplitude,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidInput("Gaussian width must be > 0".into()));
                }
                GridState::from_fn(grid, |x| {
                    let z = (x - center) / width;
                    [0.0, 0.0, amplitude * (-z * z).exp(), 0.0]
                })
            }
            InitialData::Bump {
                center,
                half_width,
                amplitude,
            } => {
                if !(*half_width > 0.0) {
                    return Err(Error::InvalidInput("bump half-width must be > 0".into()));
                }
                GridState::from_fn(grid, |x| {
                    let z = (x - center) / half_width;
                    let b = if z.abs() < 1.0 {
                        (0.5 * std::f64::consts::PI * z).cos().powi(4)
                    } else {
                        0.0
                    };
                    [0.0, 0.0, amplitude * b, 0.0]
                })
            }
            InitialData::Samples { x, v, p, vdot, pdot } => {
                GridState::from_samples(grid, x, [v, p, vdot, pdot])?
            }
        };
        let scale = [&s.v, &s.p]
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if s.v[0].abs() > 1e-12 * scale.max(1e-300) || s.p[0].abs() > 1e-12 * scale.max(1e-300) {
            return Err(Error::NotClamped {
                v0: s.v[0].abs(),
                p0: s.p[0].abs(),
            });
        }
        s.v[0] = 0.0;
        s.p[0] = 0.0;
        s.vdot[0] = 0.0;
        s.pdot[0] = 0.0;
        Ok(s)
    }
}

/// A scalar signal of time.
pub type Signal = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SimMode {
    /// Prescribed voltage `V(t)`.
    OpenLoop { voltage: Signal },
    /// Current feedback `V = gain * pdot(L) + input(t)`.
    ClosedLoop { gain: f64, input: Option<Signal> },
    /// Classical model `rho v_tt = alpha1 v_xx`, `alpha1 v_x(L) = -gamma V / h`,
    /// `V = gain * vdot(L)`.
    Classical { gain: f64 },
}

impl SimMode {
    pub fn free() -> Self {
        SimMode::OpenLoop {
            voltage: Arc::new(|_| 0.0),
        }
    }

    pub fn open(voltage: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SimMode::OpenLoop {
            voltage: Arc::new(voltage),
        }
    }

    pub fn closed(gain: f64) -> Self {
        SimMode::ClosedLoop { gain, input: None }
    }

    pub fn closed_with_input(gain: f64, input: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SimMode::ClosedLoop {
            gain,
            input: Some(Arc::new(input)),
        }
    }

    pub fn classical(gain: f64) -> Self {
        SimMode::Classical { gain }
    }
}

impl fmt::Debug for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimMode::OpenLoop { .. } => f.write_str("OpenLoop"),
            SimMode::ClosedLoop { gain, input } => f
                .debug_struct("ClosedLoop")
                .field("gain", gain)
                .field("input", &input.is_some())
                .finish(),
            SimMode::Classical { gain } => f.debug_struct("Classical").field("gain", gain).finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mode: SimMode,
    pub final_time: f64,
    pub cfl: f64,
    /// Output cadence; 0 records every step.
    pub sample_dt: f64,
    /// Forces the time step instead of deriving it from `cfl`.
    pub dt: Option<f64>,
    /// Snapshot cadence for full states; `None` keeps only the final state.
    pub snapshot_dt: Option<f64>,
}

impl SimConfig {
    pub fn new(mode: SimMode, final_time: f64) -> Self {
        Self {
            mode,
            final_time,
            cfl: DEFAULT_CFL,
            sample_dt: 0.0,
            dt: None,
            snapshot_dt: None,
        }
    }

    pub fn with_sample_dt(mut self, dt: f64) -> Self {
        self.sample_dt = dt;
        self
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn with_snapshot_dt(mut self, dt: f64) -> Self {
        self.snapshot_dt = Some(dt);
        self
    }
}

/// Sampled output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Coupled modes: `pdot(L)/h + u` (closed loop) or `pdot(L)/h` (open loop).
    /// Classical mode: `vdot(L)`.
    pub outputs: Vec<f64>,
    /// Closed loop: the input `u`; open loop: the voltage.
    pub inputs: Vec<f64>,
    /// Half-step modified energy of the leapfrog scheme; non-increasing under
    /// feedback and constant when undriven.
    pub modified_energies: Vec<f64>,
    pub snapshots: Vec<GridState>,
    pub dt: f64,
    pub steps: usize,
    pub thickness: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &GridState {
        self.snapshots.last().expect("trajectory always keeps the final state")
    }

    pub fn max_abs_output(&self) -> f64 {
        self.outputs.iter().fold(0.0, |m, y| m.max(y.abs()))
    }
}

/// Largest stable step `dx * zeta2` (coupled) or `dx sqrt(rho/alpha1)` (classical).
pub fn max_time_step(params: &BeamParameters, dc: &DerivedConstants, cells: usize, classical: bool) -> f64 {
    let dx = params.length / cells as f64;
    if classical {
        dx * (params.rho / params.alpha1).sqrt()
    } else {
        dx * dc.zeta2
    }
}

/// Cell stresses `(alpha Dv - gamma beta Dp, beta Dp - gamma beta Dv)` and the
/// differences `(Dv, Dp)`.
fn cell_terms(params: &BeamParameters, dx: f64, v: &[f64], p: &[f64], out: &mut CellTerms) {
    let alpha = params.alpha();
    let gb = params.gamma * params.beta;
    let n = v.len() - 1;
    for c in 0..n {
        let dv = (v[c + 1] - v[c]) / dx;
        let dp = (p[c + 1] - p[c]) / dx;
        out.dv[c] = dv;
        out.dp[c] = dp;
        out.sv[c] = alpha * dv - gb * dp;
        out.sp[c] = params.beta * dp - gb * dv;
    }
}

#[derive(Clone)]
struct CellTerms {
    dv: Vec<f64>,
    dp: Vec<f64>,
    sv: Vec<f64>,
    sp: Vec<f64>,
}

impl CellTerms {
    fn new(cells: usize) -> Self {
        Self {
            dv: vec![0.0; cells],
            dp: vec![0.0; cells],
            sv: vec![0.0; cells],
            sp: vec![0.0; cells],
        }
    }

    /// Nodal elastic forces; index 0 is unused.
    fn forces(&self, fv: &mut [f64], fp: &mut [f64]) {
        let n = self.sv.len();
        fv[0] = 0.0;
        fp[0] = 0.0;
        for i in 1..n {
            fv[i] = self.sv[i] - self.sv[i - 1];
            fp[i] = self.sp[i] - self.sp[i - 1];
        }
        fv[n] = -self.sv[n - 1];
        fp[n] = -self.sp[n - 1];
    }

    fn strain_energy(&self, params: &BeamParameters, dx: f64) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.dv.len() {
            let s = params.gamma * self.dv[c] - self.dp[c];
            acc += params.alpha1 * self.dv[c] * self.dv[c] + params.beta * s * s;
        }
        acc * dx
    }

    /// `sum dx (sigma(self) . D(other))`, the symmetric bilinear strain form.
    fn bilinear(&self, other: &CellTerms, dx: f64) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.dv.len() {
            acc += self.sv[c] * other.dv[c] + self.sp[c] * other.dp[c];
        }
        acc * dx
    }
}

/// Nodal accelerations `(v_tt, p_tt)` of the coupled scheme for voltage `V`.
pub fn accelerations(params: &BeamParameters, v: &[f64], p: &[f64], voltage: f64) -> (Vec<f64>, Vec<f64>) {
    let n = v.len() - 1;
    let grid = Grid {
        cells: n,
        length: params.length,
    };
    let mut ct = CellTerms::new(n);
    cell_terms(params, grid.dx(), v, p, &mut ct);
    let mut fv = vec![0.0; n + 1];
    let mut fp = vec![0.0; n + 1];
    ct.forces(&mut fv, &mut fp);
    fp[n] -= voltage / params.thickness;
    for i in 1..=n {
        let m = grid.weight(i);
        fv[i] /= params.rho * m;
        fp[i] /= params.mu * m;
    }
    (fv, fp)
}

/// `(h/2) [ sum_i w_i (rho vdot^2 + mu pdot^2) + sum_cells dx (alpha1 Dv^2 + beta (gamma Dv - Dp)^2) ]`.
pub fn discrete_energy(state: &GridState, params: &BeamParameters) -> f64 {
    let n = state.cells();
    let grid = Grid {
        cells: n,
        length: state.length,
    };
    let dx = grid.dx();
    let mut ct = CellTerms::new(n);
    cell_terms(params, dx, &state.v, &state.p, &mut ct);
    let mut kin = 0.0;
    for i in 0..=n {
        kin += grid.weight(i)
            * (params.rho * state.vdot[i] * state.vdot[i] + params.mu * state.pdot[i] * state.pdot[i]);
    }
    0.5 * params.thickness * (kin + ct.strain_energy(params, dx))
}

/// `(h/2) [ sum_i w_i rho vdot^2 + sum_cells dx alpha1 Dv^2 ]` for the classical model.
pub fn classical_energy(state: &GridState, params: &BeamParameters) -> f64 {
    let n = state.cells();
    let grid = Grid {
        cells: n,
        length: state.length,
    };
    let dx = grid.dx();
    let mut acc = 0.0;
    for i in 0..=n {
        acc += grid.weight(i) * params.rho * state.vdot[i] * state.vdot[i];
    }
    for c in 0..n {
        let d = (state.v[c + 1] - state.v[c]) / dx;
        acc += dx * params.alpha1 * d * d;
    }
    0.5 * params.thickness * acc
}

fn validate_config(cfg: &SimConfig) -> Result<()> {
    if !(cfg.final_time > 0.0 && cfg.final_time.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "final time must be > 0, got {}",
            cfg.final_time
        )));
    }
    if !(cfg.cfl > 0.0 && cfg.cfl < 1.0) {
        return Err(Error::InvalidInput(format!("cfl must lie in (0, 1), got {}", cfg.cfl)));
    }
    if !(cfg.sample_dt >= 0.0) {
        return Err(Error::InvalidInput("sample_dt must be >= 0".into()));
    }
    match cfg.mode {
        SimMode::ClosedLoop { gain, .. } if !(gain > 0.0 && gain.is_finite()) => {
            Err(Error::InvalidInput(format!("feedback gain must be > 0, got {gain}")))
        }
        SimMode::Classical { gain } if !(gain >= 0.0 && gain.is_finite()) => {
            Err(Error::InvalidInput(format!("feedback gain must be >= 0, got {gain}")))
        }
        _ => Ok(()),
    }
}

/// Output schedule: the `k`-th record falls on the step nearest `k * cadence`,
/// so records land on exact multiples when the cadence divides the run.
struct Schedule {
    steps_per: f64,
    next: u64,
}

impl Schedule {
    fn new(dt: f64, cadence: f64) -> Self {
        Self {
            steps_per: (cadence / dt).max(1.0),
            next: 1,
        }
    }

    fn due(&mut self, step: usize) -> bool {
        let mut hit = false;
        while (self.next as f64 * self.steps_per).round() as usize <= step {
            self.next += 1;
            hit = true;
        }
        hit
    }
}

/// Integrates from `initial` to `cfg.final_time` with velocity Verlet.
///
/// The feedback trace is resolved implicitly in the second half-kick (a scalar
/// equation at the boundary node), which keeps the modified energy monotone
/// for every gain.
pub fn simulate(initial: &GridState, params: &BeamParameters, cfg: &SimConfig) -> Result<Trajectory> {
    params.validate()?;
    validate_config(cfg)?;
    let dc = derive_constants(params)?;
    let grid = Grid::new(params.length, initial.cells())?;
    if (initial.length - params.length).abs() > 1e-12 * params.length {
        return Err(Error::InvalidInput(format!(
            "initial state is on [0, {}] but the beam has length {}",
            initial.length, params.length
        )));
    }
    let classical = matches!(cfg.mode, SimMode::Classical { .. });
    let dt_max = max_time_step(params, &dc, grid.cells, classical);
    let (dt, steps) = match cfg.dt {
        Some(dt) => {
            if !(dt > 0.0) {
                return Err(Error::InvalidInput(format!("time step must be > 0, got {dt}")));
            }
            if dt > dt_max {
                return Err(Error::CflViolation { dt, max: dt_max });
            }
            let steps = (cfg.final_time / dt).ceil() as usize;
            (cfg.final_time / steps as f64, steps)
        }
        None => {
            let steps = (cfg.final_time / (cfg.cfl * dt_max)).ceil().max(1.0) as usize;
            (cfg.final_time / steps as f64, steps)
        }
    };
    if classical {
        run_classical(initial, params, &grid, cfg, dt, steps)
    } else {
        run_coupled(initial, params, &grid, cfg, dt, steps)
    }
}

fn run_coupled(
    initial: &GridState,
    params: &BeamParameters,
    grid: &Grid,
    cfg: &SimConfig,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    let n = grid.cells;
    let dx = grid.dx();
    let h = params.thickness;
    let half = 0.5 * dt;
    let inv_mv: Vec<f64> = (0..=n).map(|i| 1.0 / (params.rho * grid.weight(i))).collect();
    let inv_mp: Vec<f64> = (0..=n).map(|i| 1.0 / (params.mu * grid.weight(i))).collect();

    let mut s = initial.clone();
    s.t = 0.0;
    let mut ct = CellTerms::new(n);
    let mut ct_new = CellTerms::new(n);
    let mut fv = vec![0.0; n + 1];
    let mut fp = vec![0.0; n + 1];
    cell_terms(params, dx, &s.v, &s.p, &mut ct);

    let (gain, input): (f64, Option<&Signal>) = match &cfg.mode {
        SimMode::ClosedLoop { gain, input } => (*gain, input.as_ref()),
        _ => (0.0, None),
    };
    let drive = |t: f64| -> f64 {
        match &cfg.mode {
            SimMode::OpenLoop { voltage } => voltage(t),
            _ => input.map_or(0.0, |u| u(t)),
        }
    };
    let closed = matches!(cfg.mode, SimMode::ClosedLoop { .. });
    let output = |s: &GridState, u: f64| -> f64 {
        if closed {
            s.pdot[n] / h + u
        } else {
            s.pdot[n] / h
        }
    };
    let kinetic = |vd: &[f64], pd: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 1..=n {
            acc += grid.weight(i) * (params.rho * vd[i] * vd[i] + params.mu * pd[i] * pd[i]);
        }
        acc
    };

    let mut samples = Schedule::new(dt, cfg.sample_dt);
    let mut snaps = cfg.snapshot_dt.map(|c| Schedule::new(dt, c));
    let mut traj = Trajectory {
        times: Vec::new(),
        energies: Vec::new(),
        outputs: Vec::new(),
        inputs: Vec::new(),
        modified_energies: Vec::new(),
        snapshots: Vec::new(),
        dt,
        steps,
        thickness: h,
    };
    let e0 = discrete_energy(&s, params);
    let u0 = drive(0.0);
    traj.times.push(0.0);
    traj.energies.push(e0);
    traj.outputs.push(output(&s, u0));
    traj.inputs.push(u0);
    traj.modified_energies.push(e0);
    if snaps.is_some() {
        traj.snapshots.push(s.clone());
    }

    let mut u_now = u0;
    for step in 1..=steps {
        let t_new = step as f64 * dt;
        // first half kick at t^n
        ct.forces(&mut fv, &mut fp);
        let volt = if closed { gain * s.pdot[n] + u_now } else { u_now };
        fp[n] -= volt / h;
        for i in 1..=n {
            s.vdot[i] += half * inv_mv[i] * fv[i];
            s.pdot[i] += half * inv_mp[i] * fp[i];
        }
        // drift
        for i in 1..=n {
            s.v[i] += dt * s.vdot[i];
            s.p[i] += dt * s.pdot[i];
        }
        cell_terms(params, dx, &s.v, &s.p, &mut ct_new);
        let modified = 0.5 * h * (kinetic(&s.vdot, &s.pdot) + ct_new.bilinear(&ct, dx));
        std::mem::swap(&mut ct, &mut ct_new);

        // second half kick at t^{n+1}
        u_now = drive(t_new);
        ct.forces(&mut fv, &mut fp);
        for i in 1..=n {
            s.vdot[i] += half * inv_mv[i] * fv[i];
        }
        for i in 1..n {
            s.pdot[i] += half * inv_mp[i] * fp[i];
        }
        if closed {
            let c = half * inv_mp[n];
            s.pdot[n] = (s.pdot[n] + c * (fp[n] - u_now / h)) / (1.0 + c * gain / h);
        } else {
            s.pdot[n] += half * inv_mp[n] * (fp[n] - u_now / h);
        }
        s.t = t_new;

        let record = samples.due(step) || step == steps;
        if (record || step % 256 == 0) && !s.is_finite() {
            return Err(Error::NonFiniteState { step });
        }
        if record {
            traj.times.push(t_new);
            traj.energies.push(discrete_energy(&s, params));
            traj.outputs.push(output(&s, u_now));
            traj.inputs.push(u_now);
            traj.modified_energies.push(modified);
        }
        if let Some(sched) = snaps.as_mut() {
            if sched.due(step) && step != steps {
                traj.snapshots.push(s.clone());
            }
        }
    }
    traj.snapshots.push(s);
    Ok(traj)
}

fn run_classical(
    initial: &GridState,
    params: &BeamParameters,
    grid: &Grid,
    cfg: &SimConfig,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    let SimMode::Classical { gain } = cfg.mode else {
        unreachable!("classical runner called for a coupled mode")
    };
    let n = grid.cells;
    let dx = grid.dx();
    let h = params.thickness;
    let half = 0.5 * dt;
    let damp = params.gamma * gain / h;
    let inv_m: Vec<f64> = (0..=n).map(|i| 1.0 / (params.rho * grid.weight(i))).collect();

    let mut s = initial.clone();
    s.t = 0.0;
    s.p.iter_mut().for_each(|x| *x = 0.0);
    s.pdot.iter_mut().for_each(|x| *x = 0.0);
    let mut f = vec![0.0; n + 1];
    let forces = |v: &[f64], f: &mut [f64]| {
        for i in 1..=n {
            let right = if i < n {
                params.alpha1 * (v[i + 1] - v[i]) / dx
            } else {
                0.0
            };
            f[i] = right - params.alpha1 * (v[i] - v[i - 1]) / dx;
        }
    };

    let mut samples = Schedule::new(dt, cfg.sample_dt);
    let mut snaps = cfg.snapshot_dt.map(|c| Schedule::new(dt, c));
    let mut traj = Trajectory {
        times: vec![0.0],
        energies: vec![classical_energy(&s, params)],
        outputs: vec![s.vdot[n]],
        inputs: vec![0.0],
        modified_energies: vec![classical_energy(&s, params)],
        snapshots: Vec::new(),
        dt,
        steps,
        thickness: h,
    };
    if snaps.is_some() {
        traj.snapshots.push(s.clone());
    }
    let mut v_old = s.v.clone();
    for step in 1..=steps {
        forces(&s.v, &mut f);
        f[n] -= damp * s.vdot[n];
        for i in 1..=n {
            s.vdot[i] += half * inv_m[i] * f[i];
        }
        v_old.copy_from_slice(&s.v);
        for i in 1..=n {
            s.v[i] += dt * s.vdot[i];
        }
        let mut kin = 0.0;
        for i in 1..=n {
            kin += grid.weight(i) * params.rho * s.vdot[i] * s.vdot[i];
        }
        let mut pot = 0.0;
        for c in 0..n {
            pot += params.alpha1 * (s.v[c + 1] - s.v[c]) * (v_old[c + 1] - v_old[c]) / dx;
        }
        let modified = 0.5 * h * (kin + pot);

        forces(&s.v, &mut f);
        for i in 1..n {
            s.vdot[i] += half * inv_m[i] * f[i];
        }
        let c = half * inv_m[n];
        s.vdot[n] = (s.vdot[n] + c * f[n]) / (1.0 + c * damp);
        s.t = step as f64 * dt;

        let record = samples.due(step) || step == steps;
        if (record || step % 256 == 0) && !s.is_finite() {
            return Err(Error::NonFiniteState { step });
        }
        if record {
            traj.times.push(s.t);
            traj.energies.push(classical_energy(&s, params));
            traj.outputs.push(s.vdot[n]);
            traj.inputs.push(0.0);
            traj.modified_energies.push(modified);
        }
        if let Some(sched) = snaps.as_mut() {
            if sched.due(step) && step != steps {
                traj.snapshots.push(s.clone());
            }
        }
    }
    traj.snapshots.push(s);
    Ok(traj)
}

/// Conservativity defect `||z(T)||^2 + int y^2 - ||z(0)||^2 - int u^2`, with
/// `||z||^2 = 2E/h` and trapezoid time integrals. `u` must be aligned with
/// `traj.times`; the outputs are taken from the trajectory.
pub fn energy_balance_residual(traj: &Trajectory, u: &[f64]) -> Result<f64> {
    let n = traj.times.len();
    if u.len() != n || traj.outputs.len() != n {
        return Err(Error::InvalidInput(format!(
            "input has {} samples but the trajectory has {n}",
            u.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("trajectory needs at least two samples".into()));
    }
    let scale = 2.0 / traj.thickness;
    let z0 = scale * traj.energies[0];
    let z1 = scale * traj.energies[n - 1];
    Ok(z1 + trapezoid_sq(&traj.times, &traj.outputs) - z0 - trapezoid_sq(&traj.times, u))
}

/// `int f^2 dt` by the trapezoid rule.
pub fn trapezoid_sq(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2)
        .zip(f.windows(2))
        .map(|(tw, fw)| 0.5 * (tw[1] - tw[0]) * (fw[0] * fw[0] + fw[1] * fw[1]))
        .sum()
}

/// Least-squares fit of `ln E = a - rate t` over the whole series; returns
/// `(rate, r2)` with `r2 = 0` when the series is constant.
pub fn fit_log_decay(energies: &[f64], times: &[f64]) -> Result<(f64, f64)> {
    if energies.len() != times.len() {
        return Err(Error::InvalidInput("energy and time series differ in length".into()));
    }
    if energies.len() < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    if let Some((index, &value)) = energies.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(Error::NonPositiveEnergy { index, value });
    }
    let n = energies.len() as f64;
    let ys: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
    if ys.iter().all(|&y| y == ys[0]) {
        return Ok((0.0, 0.0));
    }
    let tm = times.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    let mut syy = 0.0;
    for (t, y) in times.iter().zip(&ys) {
        stt += (t - tm) * (t - tm);
        sty += (t - tm) * (y - ym);
        syy += (y - ym) * (y - ym);
    }
    if stt == 0.0 {
        return Err(Error::InvalidInput("time samples are all equal".into()));
    }
    let slope = sty / stt;
    let r2 = (sty * sty / (stt * syy)).min(1.0);
    Ok((-slope, r2))
}

/// Decay rate from the last half of the record.
pub fn decay_rate(energies: &[f64], times: &[f64]) -> Result<(f64, f64)> {
    if energies.len() != times.len() {
        return Err(Error::InvalidInput("energy and time series differ in length".into()));
    }
    if energies.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "need at least 10 samples, got {}",
            energies.len()
        )));
    }
    if let Some((index, &value)) = energies.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(Error::NonPositiveEnergy { index, value });
    }
    let start = energies.len() / 2;
    fit_log_decay(&energies[start..], &times[start..])
}

/// Scaled stiffness blocks `W^{-1/2} K W^{-1/2}` of the coupled spatial
/// operator, nodes `1..=N`, unknowns `(v_i, p_i)`.
fn scaled_blocks(params: &BeamParameters, cells: usize) -> (Vec<[[f64; 2]; 2]>, Vec<[[f64; 2]; 2]>) {
    let grid = Grid {
        cells,
        length: params.length,
    };
    let dx = grid.dx();
    let gb = params.gamma * params.beta;
    let s = [[params.alpha(), -gb], [-gb, params.beta]];
    let mass = |i: usize| [params.rho * grid.weight(i), params.mu * grid.weight(i)];
    let mut diag = Vec::with_capacity(cells);
    let mut off = Vec::with_capacity(cells - 1);
    for i in 1..=cells {
        let factor = if i < cells { 2.0 / dx } else { 1.0 / dx };
        let mi = mass(i);
        let mut d = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                d[a][b] = factor * s[a][b] / (mi[a] * mi[b]).sqrt();
            }
        }
        diag.push(d);
        if i < cells {
            let mj = mass(i + 1);
            let mut o = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    o[a][b] = -s[a][b] / dx / (mi[a] * mj[b]).sqrt();
                }
            }
            off.push(o);
        }
    }
    (diag, off)
}

/// The `count` smallest angular frequencies `omega` of the undamped spatial
/// operator (`omega^2` its generalized eigenvalues), by Sturm bisection.
pub fn discrete_frequencies(params: &BeamParameters, cells: usize, count: usize) -> Result<Vec<f64>> {
    params.validate()?;
    Grid::new(params.length, cells)?;
    if count == 0 || count > 2 * cells {
        return Err(Error::InvalidInput(format!(
            "requested {count} eigenvalues from a {}-dimensional operator",
            2 * cells
        )));
    }
    let (diag, off) = scaled_blocks(params, cells);
    // Gershgorin bound
    let mut upper: f64 = 0.0;
    for i in 0..cells {
        for a in 0..2 {
            let mut r = diag[i][a][a] + diag[i][a][1 - a].abs();
            if i > 0 {
                r += off[i - 1][0][a].abs() + off[i - 1][1][a].abs();
            }
            if i + 1 < cells {
                r += off[i][a][0].abs() + off[i][a][1].abs();
            }
            upper = upper.max(r);
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut lo_bound = 0.0;
    for k in 0..count {
        // smallest shift with more than k eigenvalues below it
        let mut lo = lo_bound;
        let mut hi = upper * (1.0 + 1e-12) + 1.0;
        while hi - lo > 1e-14 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if count_below(&diag, &off, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let ev = 0.5 * (lo + hi);
        lo_bound = lo;
        out.push(ev.max(0.0).sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{eigenfunction, eigenvalue, ModeIndex, Sign};

    fn golden() -> (BeamParameters, DerivedConstants) {
        let p = BeamParameters::unit();
        (p, derive_constants(&p).unwrap())
    }

    fn re_mode() -> ModalCoefficients {
        let mut c = ModalCoefficients::zeros(1);
        c.c1[0] = 0.5.into();
        c.d1[0] = (-0.5).into();
        c
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1.0, 8).is_err());
        assert!(Grid::new(0.0, 64).is_err());
        let g = Grid::new(2.0, 64).unwrap();
        assert_eq!(g.dx(), 2.0 / 64.0);
        assert_eq!(g.weight(0), g.dx() / 2.0);
        assert_eq!(g.weight(64), g.dx() / 2.0);
    }

    #[test]
    fn energy_basics() {
        let (p, dc) = golden();
        let g = Grid::new(1.0, 256).unwrap();
        assert_eq!(discrete_energy(&GridState::zeros(&g), &p), 0.0);
        let s = InitialData::Gaussian {
            center: 0.5,
            width: 0.1,
            amplitude: 1.0,
        }
        .build(&g, &dc)
        .unwrap();
        let e = discrete_energy(&s, &p);
        assert!(e > 0.0);
        assert!((discrete_energy(&s.scaled(2.0), &p) - 4.0 * e).abs() < 1e-14 * e);
    }

    #[test]
    fn energy_of_real_eigenmode_matches_modal_norm() {
        let (p, dc) = golden();
        let g = Grid::new(1.0, 2048).unwrap();
        let c = re_mode();
        let s = GridState::from_modal(&g, &c, &dc);
        let spectral_e = 0.5 * p.thickness * spectral::modal_norm2(&c, &p, &dc);
        let e = discrete_energy(&s, &p);
        assert!((e - spectral_e).abs() < 1e-5, "{e} vs {spectral_e}");
    }

    #[test]
    fn eigenfunction_residual_is_small() {
        let (p, dc) = golden();
        let n = 2048;
        let m = ModeIndex::new(1, Sign::Plus, 1);
        let lam = eigenvalue(m, &dc, 1.0);
        let psi = StateFunctions::from_fn(1.0, n, |x| eigenfunction(m, &dc, 1.0, x));
        let re: Vec<Vec<f64>> = psi.fields().iter().map(|f| f.iter().map(|z| z.re).collect()).collect();
        let im: Vec<Vec<f64>> = psi.fields().iter().map(|f| f.iter().map(|z| z.im).collect()).collect();
        let (av_r, ap_r) = accelerations(&p, &re[0], &re[1], 0.0);
        let (av_i, ap_i) = accelerations(&p, &im[0], &im[1], 0.0);
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for i in 1..=n {
            let a = [
                psi.vdot[i],
                psi.pdot[i],
                num_complex::Complex64::new(av_r[i], av_i[i]),
                num_complex::Complex64::new(ap_r[i], ap_i[i]),
            ];
            let b = [psi.v[i], psi.p[i], psi.vdot[i], psi.pdot[i]];
            for k in 0..4 {
                num = num.max((a[k] - lam * b[k]).norm());
                den = den.max((lam * b[k]).norm());
            }
        }
        assert!(num / den < 1e-6, "{}", num / den);
    }

    #[test]
    fn undamped_run_conserves_energy_and_tracks_modes() {
        let (p, dc) = golden();
        let g = Grid::new(1.0, 512).unwrap();
        let c = re_mode();
        let s0 = GridState::from_modal(&g, &c, &dc);
        let cfg = SimConfig::new(SimMode::free(), 2.0).with_sample_dt(0.01);
        let tr = simulate(&s0, &p, &cfg).unwrap();
        let e0 = tr.energies[0];
        let drift = tr.energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0;
        assert!(drift < 1e-5, "{drift}");
        let q0 = tr.modified_energies[1];
        for q in &tr.modified_energies[1..] {
            assert!((q - q0).abs() < 1e-12 * q0);
        }
        let exact = GridState::from_modal(&g, &spectral::propagate(&c, &dc, 1.0, 2.0), &dc);
        let fin = tr.final_state();
        let err = fin
            .v
            .iter()
            .zip(&exact.v)
            .chain(fin.pdot.iter().zip(&exact.pdot))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn closed_loop_modified_energy_is_monotone() {
        let (p, dc) = golden();
        let g = Grid::new(1.0, 128).unwrap();
        let s0 = InitialData::Gaussian {
            center: 0.6,
            width: 0.08,
            amplitude: 1.0,
        }
        .build(&g, &dc)
        .unwrap();
        for gain in [0.1, 0.5, 5.0, 500.0] {
            let tr = simulate(&s0, &p, &SimConfig::new(SimMode::closed(gain), 3.0)).unwrap();
            for w in tr.modified_energies[1..].windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-13), "gain {gain}");
            }
            assert!(tr.energies.last().unwrap() < &tr.energies[0]);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let (p, dc) = golden();
        let g = Grid::new(1.0, 64).unwrap();
        let s0 = InitialData::Sine { j: 1, amplitude: 1.0 }.build(&g, &dc).unwrap();
        let mut cfg = SimConfig::new(SimMode::free(), 1.0);
        cfg.dt = Some(1.0);
        assert!(matches!(simulate(&s0, &p, &cfg), Err(Error::CflViolation { .. })));
        assert!(simulate(&s0, &p, &SimConfig::new(SimMode::free(), 0.0)).is_err());
        assert!(simulate(&s0, &p, &SimConfig::new(SimMode::free(), 1.0).with_cfl(1.2)).is_err());
        assert!(simulate(&s0, &p, &SimConfig::new(SimMode::closed(0.0), 1.0)).is_err());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let (p, dc) = golden();
        let g = Grid::new(1.0, 64).unwrap();
        let s0 = InitialData::Sine { j: 1, amplitude: 1.0 }.build(&g, &dc).unwrap();
        let cfg = SimConfig::new(SimMode::open(|_| f64::NAN), 0.5);
        assert!(matches!(simulate(&s0, &p, &cfg), Err(Error::NonFiniteState { .. })));
    }

    #[test]
    fn unclamped_samples_rejected() {
        let (_, dc) = golden();
        let g = Grid::new(1.0, 32).unwrap();
        let x = vec![0.0, 1.0];
        let data = InitialData::Samples {
            x,
            v: vec![1.0, 1.0],
            p: vec![0.0, 0.0],
            vdot: vec![0.0, 0.0],
            pdot: vec![0.0, 0.0],
        };
        assert!(matches!(data.build(&g, &dc), Err(Error::NotClamped { .. })));
    }

    #[test]
    fn sample_interpolation() {
        let (_, dc) = golden();
        let g = Grid::new(1.0, 16).unwrap();
        let data = InitialData::Samples {
            x: vec![0.0, 0.5, 1.0],
            v: vec![0.0, 1.0, 0.0],
            p: vec![0.0, 2.0, 4.0],
            vdot: vec![0.0; 3],
            pdot: vec![0.0; 3],
        };
        let s = data.build(&g, &dc).unwrap();
        assert!((s.v[4] - 0.5).abs() < 1e-15);
        assert!((s.p[12] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn decay_rate_examples() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let (rate, r2) = decay_rate(&e, &t).unwrap();
        assert!((rate - 2.0).abs() < 1e-9);
        assert!((r2 - 1.0).abs() < 1e-12);
        let (rate, r2) = decay_rate(&vec![3.0; 50], &t).unwrap();
        assert_eq!((rate, r2), (0.0, 0.0));
        let mut bad = e.clone();
        bad[40] = 0.0;
        assert!(matches!(decay_rate(&bad, &t), Err(Error::NonPositiveEnergy { index: 40, .. })));
        assert!(decay_rate(&e[..5], &t[..5]).is_err());
    }

    #[test]
    fn records_land_on_cadence_multiples() {
        let (p, dc) = golden();
        let g = Grid::new(1.0, 100).unwrap();
        let s0 = InitialData::Sine { j: 1, amplitude: 1.0 }.build(&g, &dc).unwrap();
        let cfg = SimConfig::new(SimMode::free(), 3.0)
            .with_sample_dt(0.1)
            .with_snapshot_dt(0.5);
        let tr = simulate(&s0, &p, &cfg).unwrap();
        assert_eq!(tr.times.len(), 31);
        assert_eq!(tr.snapshots.len(), 7);
        for (k, t) in tr.times.iter().enumerate() {
            assert!((t - 0.1 * k as f64).abs() < 0.6 * tr.dt, "{k} {t}");
        }
        assert_eq!(*tr.times.last().unwrap(), 3.0);
    }

    #[test]
    fn zero_state_zero_input_balance() {
        let (p, _) = golden();
        let g = Grid::new(1.0, 64).unwrap();
        let tr = simulate(&GridState::zeros(&g), &p, &SimConfig::new(SimMode::closed(0.5), 1.0)).unwrap();
        let u = vec![0.0; tr.times.len()];
        assert_eq!(energy_balance_residual(&tr, &u).unwrap(), 0.0);
    }

    #[test]
    fn discrete_frequencies_approach_exact() {
        let (p, dc) = golden();
        let w = discrete_frequencies(&p, 512, 4).unwrap();
        let mut exact: Vec<f64> = (1..=4)
            .flat_map(|j| [1u8, 2].map(|k| spectral::sigma(j, 1.0) / dc.zeta(k)))
            .collect();
        exact.sort_by(f64::total_cmp);
        for (a, b) in w.iter().zip(&exact) {
            assert!((a - b).abs() / b < 1e-4, "{a} {b}");
        }
    }
}
