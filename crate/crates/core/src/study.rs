//! Run orchestration: manufactured-solution error runs, convergence
//! studies and plain simulations with per-step summaries.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::config::{InitialKind, Mode, ParamsConfig, RunConfig};
use crate::fields::{FnVector, ScalarField};
use crate::linsolve::SolveOptions;
use crate::mesh::{Mesh, MeshError, Rect};
use crate::mms::{convergence_orders, spatial_errors, AccumulatedNorms, ManufacturedSolution, NormAccumulator, Scalar1};
use crate::par;
use crate::scheme::{
    init_state, integral, l2_norm, monitor_inductive_hypothesis, Forcing, InitialData, ModelParams, SchemeError,
    Spaces, State, Stepper,
};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("final time {final_time} is not a positive multiple of dt = {dt}")]
    Steps { final_time: f64, dt: f64 },
    #[error("{0}")]
    Setup(String),
}

/// Number of steps to reach `final_time`, `round(T/dt)`.
pub fn step_count(final_time: f64, dt: f64) -> Result<usize, StudyError> {
    let n = (final_time / dt).round();
    if !(n >= 1.0) || !n.is_finite() || ((n * dt - final_time).abs() > 1e-9 * final_time.max(1.0)) {
        return Err(StudyError::Steps { final_time, dt });
    }
    Ok(n as usize)
}

/// Sum of anisotropic Gaussian bumps `Σ A exp(−a(x−x₀)² − b(y−y₀)²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBumps {
    pub amplitude: f64,
    pub a: f64,
    pub b: f64,
    pub centers: Vec<[f64; 2]>,
}

impl GaussianBumps {
    fn terms(&self, p: [f64; 2]) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.centers.iter().map(move |c| {
            let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
            (self.amplitude * (-self.a * dx * dx - self.b * dy * dy).exp(), dx, dy)
        })
    }

    pub fn hessian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let (a, b) = (self.a, self.b);
        self.terms(p).fold([[0.0; 2]; 2], |mut h, (g, dx, dy)| {
            let xy = g * 4.0 * a * b * dx * dy;
            h[0][0] += g * (4.0 * a * a * dx * dx - 2.0 * a);
            h[0][1] += xy;
            h[1][0] += xy;
            h[1][1] += g * (4.0 * b * b * dy * dy - 2.0 * b);
            h
        })
    }
}

impl ScalarField for GaussianBumps {
    fn value(&self, p: [f64; 2]) -> f64 {
        self.terms(p).map(|(g, _, _)| g).sum()
    }

    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        self.terms(p).fold([0.0; 2], |acc, (g, dx, dy)| [acc[0] - 2.0 * self.a * dx * g, acc[1] - 2.0 * self.b * dy * g])
    }
}

/// Bump initial data of the planar competition experiment: both species
/// enter from the left edge, the chemical from the right.
pub fn competition_initial_data() -> InitialData {
    let r = [0.2, 0.5, 1.2];
    let sigma = [1.5, 1.8, 2.5];
    let n = GaussianBumps { amplitude: 120.0, a: 3.0, b: 12.0, centers: r.iter().map(|r| [-r, 0.5]).collect() };
    let w = GaussianBumps { amplitude: 8.0, a: 5.0, b: 10.0, centers: r.iter().map(|r| [-r, 0.5]).collect() };
    let c = Arc::new(GaussianBumps { amplitude: 180.0, a: 2.0, b: 1.5, centers: sigma.iter().map(|s| [2.5, *s]).collect() });
    let (cg, ch) = (c.clone(), c.clone());
    InitialData {
        n: Arc::new(n),
        w: Arc::new(w),
        s: Arc::new(FnVector { value: move |p| cg.gradient(p), jacobian: move |p| ch.hessian(p) }),
        c,
        u: Arc::new(crate::fields::ConstantVector([0.0, 0.0])),
        pi: None,
    }
}

/// Variables whose errors a manufactured run measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    N,
    W,
    C,
    U1,
    U2,
}

impl Variable {
    pub const ALL: [Variable; 5] = [Variable::N, Variable::W, Variable::C, Variable::U1, Variable::U2];

    pub fn as_str(self) -> &'static str {
        match self {
            Variable::N => "n",
            Variable::W => "w",
            Variable::C => "c",
            Variable::U1 => "u1",
            Variable::U2 => "u2",
        }
    }

    pub fn is_velocity(self) -> bool {
        matches!(self, Variable::U1 | Variable::U2)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Norm {
    LinfL2,
    L2H1,
    LinfH1,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::LinfL2, Norm::L2H1, Norm::LinfH1];

    pub fn as_str(self) -> &'static str {
        match self {
            Norm::LinfL2 => "linf_l2",
            Norm::L2H1 => "l2_h1",
            Norm::LinfH1 => "linf_h1",
        }
    }

    pub fn of(self, n: &AccumulatedNorms) -> f64 {
        match self {
            Norm::LinfL2 => n.linf_l2,
            Norm::L2H1 => n.l2_h1,
            Norm::LinfH1 => n.linf_h1,
        }
    }

    /// Whether the report lists this norm for `var`; `l∞(H¹)` only for
    /// the velocity.
    pub fn reported_for(self, var: Variable) -> bool {
        self != Norm::LinfH1 || var.is_velocity()
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accumulated errors of one run, indexed like [`Variable::ALL`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunErrors(pub [AccumulatedNorms; 5]);

impl RunErrors {
    pub fn get(&self, var: Variable) -> &AccumulatedNorms {
        &self.0[var as usize]
    }
}

/// Errors against the exact solution at every `t_m`, `m = 1..N`, of a
/// run on a `cells × cells` unit-square mesh started from projections of
/// the exact initial data.
pub fn manufactured_errors(cells: usize, dt: f64, final_time: f64, opts: &SolveOptions) -> Result<RunErrors, StudyError> {
    let steps = step_count(final_time, dt)?;
    let spaces = Spaces::new(Arc::new(Mesh::unit_square(cells, cells)?));
    let params = ModelParams::default();
    let ms = ManufacturedSolution;
    let mut state = init_state(&spaces, &params, &ms.initial_data(), opts)?;
    let mut stepper = Stepper::new(&spaces, &params, opts)?;
    let mut acc: [NormAccumulator; 5] = std::array::from_fn(|_| NormAccumulator::new(dt));
    for _ in 0..steps {
        state = stepper.advance(&state, dt, Some(&ms))?;
        let t = state.t;
        let vel = |i: usize| move |p| -> Scalar1 {
            let (v, j) = ms.u(t, p);
            (v[i], j[i])
        };
        let scalar = |coeffs: &[f64], f: fn(&ManufacturedSolution, f64, [f64; 2]) -> Scalar1| {
            spatial_errors(&spaces.scalar, coeffs, 0, |p| f(&ms, t, p))
        };
        let errs = [
            scalar(&state.n, ManufacturedSolution::n),
            scalar(&state.w, ManufacturedSolution::w),
            scalar(&state.c, ManufacturedSolution::c),
            spatial_errors(&spaces.velocity, &state.u, 0, vel(0)),
            spatial_errors(&spaces.velocity, &state.u, 1, vel(1)),
        ];
        for (a, e) in acc.iter_mut().zip(errs) {
            let (l2, h1) = e.map_err(SchemeError::from)?;
            a.push(l2, h1);
        }
    }
    Ok(RunErrors(acc.map(|a| a.finish().expect("at least one step"))))
}

/// What a convergence study refines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

#[derive(Clone, Debug)]
pub struct ReportRow {
    /// Cells per side, or the time step.
    pub label: String,
    /// `h = 1/k` or `dt`.
    pub resolution: f64,
    pub errors: Result<RunErrors, String>,
}

/// Errors per refinement level, with observed orders between consecutive
/// rows.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub axis: Axis,
    pub rows: Vec<ReportRow>,
}

impl ErrorReport {
    pub fn error(&self, row: usize, var: Variable, norm: Norm) -> Option<f64> {
        self.rows[row].errors.as_ref().ok().map(|e| norm.of(e.get(var)))
    }

    /// Order between row `i − 1` and row `i`; `None` for the first row or
    /// when either row failed.
    pub fn orders(&self, var: Variable, norm: Norm) -> Vec<Option<f64>> {
        (0..self.rows.len())
            .map(|i| {
                if i == 0 {
                    return None;
                }
                let e = [self.error(i - 1, var, norm)?, self.error(i, var, norm)?];
                let h = [self.rows[i - 1].resolution, self.rows[i].resolution];
                convergence_orders(&e, &h).ok().map(|o| o[0])
            })
            .collect()
    }

    pub fn failed_rows(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.errors.is_err()).collect()
    }

    /// All reported orders, as `(variable, norm, orders)`.
    pub fn all_orders(&self) -> Vec<(Variable, Norm, Vec<Option<f64>>)> {
        Variable::ALL
            .iter()
            .flat_map(|&v| Norm::ALL.iter().filter(move |n| n.reported_for(v)).map(move |&n| (v, n)))
            .map(|(v, n)| (v, n, self.orders(v, n)))
            .collect()
    }
}

/// Runs every refinement level of a manufactured convergence study; levels
/// are independent and run concurrently.
pub fn run_convergence_study(config: &RunConfig) -> Result<ErrorReport, StudyError> {
    let axis = match config.mode {
        Mode::ConvergenceSpace => Axis::Space,
        Mode::ConvergenceTime => Axis::Time,
        Mode::Simulate => return Err(StudyError::Setup("simulate mode is not a convergence study".into())),
    };
    if config.initial != InitialKind::Test2Manufactured {
        return Err(StudyError::Setup("convergence studies need the manufactured initial data".into()));
    }
    let levels: Vec<(usize, f64)> = match axis {
        Axis::Space => config.resolutions.iter().map(|&k| (k, config.dt[0])).collect(),
        Axis::Time => config.dt.iter().map(|&dt| (config.resolutions[0], dt)).collect(),
    };
    for &(_, dt) in &levels {
        step_count(config.final_time, dt)?;
    }
    let opts = config.solve_options();
    let rows = par::map_indexed(levels.len(), |i| {
        let (k, dt) = levels[i];
        let (label, resolution) = match axis {
            Axis::Space => (k.to_string(), 1.0 / k as f64),
            Axis::Time => (format!("{dt:?}"), dt),
        };
        let errors = manufactured_errors(k, dt, config.final_time, &opts).map_err(|e| e.to_string());
        ReportRow { label, resolution, errors }
    });
    Ok(ErrorReport { axis, rows })
}

/// One row of the per-step summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub int_n: f64,
    pub int_w: f64,
    pub int_c: f64,
    pub l2_u: f64,
}

/// Per-step monitoring quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub t: f64,
    /// `‖s‖_{L^{10/3}}`.
    pub s_norm: f64,
    /// `‖c‖_{L^{10/3}}`.
    pub c_norm: f64,
    /// `max_j |(∇·u, ψⱼ)|`.
    pub max_divergence: f64,
    pub min_n: f64,
    pub min_w: f64,
}

/// Everything a simulation needs besides the time loop.
#[derive(Clone)]
pub struct SimulationSetup {
    pub mesh: Arc<Mesh>,
    pub params: ModelParams,
    pub initial: InitialData,
    pub forcing: Option<Arc<dyn Forcing + Send>>,
    pub dt: f64,
    pub final_time: f64,
    pub opts: SolveOptions,
    pub snapshots: Vec<f64>,
    pub diagnostics: bool,
}

impl SimulationSetup {
    pub fn from_config(config: &RunConfig) -> Result<Self, StudyError> {
        if config.mode != Mode::Simulate {
            return Err(StudyError::Setup("not a simulate configuration".into()));
        }
        let k = config.resolutions[0];
        let mesh = Arc::new(Mesh::rectangle(k, k, config.bounds)?);
        let (initial, forcing): (InitialData, Option<Arc<dyn Forcing + Send>>) = match config.initial {
            InitialKind::Test2Manufactured => {
                if config.bounds != Rect::UNIT || config.params != ParamsConfig::default() {
                    return Err(StudyError::Setup(
                        "the manufactured solution needs the unit square and default parameters".into(),
                    ));
                }
                (ManufacturedSolution.initial_data(), Some(Arc::new(ManufacturedSolution)))
            }
            InitialKind::Competition2d => (competition_initial_data(), None),
            InitialKind::CustomExpression => {
                let custom = config.custom.as_ref().ok_or_else(|| StudyError::Setup("missing [custom] section".into()))?;
                (custom.initial_data(), None)
            }
        };
        Ok(SimulationSetup {
            mesh,
            params: config.params.model_params(),
            initial,
            forcing,
            dt: config.dt[0],
            final_time: config.final_time,
            opts: config.solve_options(),
            snapshots: config.snapshots.clone(),
            diagnostics: config.diagnostics,
        })
    }
}

/// Result of a simulation. On a failed step the outputs up to the last
/// good state are kept and `failure` holds the error.
pub struct Trajectory {
    pub spaces: Spaces,
    pub series: Vec<SeriesRow>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub snapshots: Vec<State>,
    pub final_state: State,
    pub failure: Option<SchemeError>,
}

fn summarize(spaces: &Spaces, s: &State) -> Result<SeriesRow, SchemeError> {
    Ok(SeriesRow {
        t: s.t,
        int_n: integral(&spaces.scalar, &s.n)?,
        int_w: integral(&spaces.scalar, &s.w)?,
        int_c: integral(&spaces.scalar, &s.c)?,
        l2_u: l2_norm(&spaces.velocity, &s.u)?,
    })
}

fn diagnose(stepper: &Stepper, s: &State) -> Result<DiagnosticRow, SchemeError> {
    let (s_norm, c_norm) = monitor_inductive_hypothesis(stepper.spaces(), s)?;
    let max_divergence = stepper.divergence_residuals(&s.u).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DiagnosticRow { t: s.t, s_norm, c_norm, max_divergence, min_n: min(&s.n), min_w: min(&s.w) })
}

/// Marches `N = round(T/dt)` steps, recording one summary row per step
/// and snapshots at the steps nearest the requested times. `observe` sees
/// every state, the initial one included.
pub fn run_simulation_with(
    setup: &SimulationSetup,
    mut observe: impl FnMut(&State),
) -> Result<Trajectory, StudyError> {
    let steps = step_count(setup.final_time, setup.dt)?;
    let spaces = Spaces::new(setup.mesh.clone());
    let mut state = init_state(&spaces, &setup.params, &setup.initial, &setup.opts)?;
    let mut stepper = Stepper::new(&spaces, &setup.params, &setup.opts)?;
    let snapshot_steps: Vec<usize> = setup.snapshots.iter().map(|t| (t / setup.dt).round() as usize).collect();
    let mut traj = Trajectory {
        spaces: spaces.clone(),
        series: Vec::with_capacity(steps),
        diagnostics: Vec::new(),
        snapshots: Vec::new(),
        final_state: state.clone(),
        failure: None,
    };
    observe(&state);
    let record = |traj: &mut Trajectory, state: &State, stepper: &Stepper| -> Result<(), SchemeError> {
        if snapshot_steps.contains(&state.m) {
            traj.snapshots.push(state.clone());
        }
        if setup.diagnostics {
            traj.diagnostics.push(diagnose(stepper, state)?);
        }
        if state.m > 0 {
            traj.series.push(summarize(&spaces, state)?);
        }
        Ok(())
    };
    record(&mut traj, &state, &stepper)?;
    let forcing = setup.forcing.as_deref().map(|f| f as &dyn Forcing);
    for _ in 0..steps {
        match stepper.advance(&state, setup.dt, forcing) {
            Ok(next) => state = next,
            Err(e) => {
                traj.failure = Some(e);
                break;
            }
        }
        observe(&state);
        if let Err(e) = record(&mut traj, &state, &stepper) {
            traj.failure = Some(e);
            break;
        }
    }
    traj.final_state = state;
    Ok(traj)
}

pub fn run_simulation(setup: &SimulationSetup) -> Result<Trajectory, StudyError> {
    run_simulation_with(setup, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    #[test]
    fn steps() {
        assert_eq!(step_count(1.0, 0.1).unwrap(), 10);
        assert_eq!(step_count(0.3, 0.3).unwrap(), 1);
        assert_eq!(step_count(5.0, 1.0 / 12.0).unwrap(), 60);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 3.0).is_err());
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let data = competition_initial_data();
        let h = 1e-5;
        for p in [[0.1, 0.2], [0.5, 0.5], [0.9, 0.7]] {
            for (f, scale) in [(&data.n, 120.0), (&data.w, 8.0), (&data.c, 180.0)] {
                let g = f.gradient(p);
                let fd = [
                    (f.value([p[0] + h, p[1]]) - f.value([p[0] - h, p[1]])) / (2.0 * h),
                    (f.value([p[0], p[1] + h]) - f.value([p[0], p[1] - h])) / (2.0 * h),
                ];
                assert!((g[0] - fd[0]).abs() < 1e-7 * scale && (g[1] - fd[1]).abs() < 1e-7 * scale);
            }
            let j = data.s.jacobian(p);
            let (sx, sy) = (data.s.value([p[0] + h, p[1]]), data.s.value([p[0] - h, p[1]]));
            let (tx, ty) = (data.s.value([p[0], p[1] + h]), data.s.value([p[0], p[1] - h]));
            assert!((j[0][0] - (sx[0] - sy[0]) / (2.0 * h)).abs() < 1e-5);
            assert!((j[1][1] - (tx[1] - ty[1]) / (2.0 * h)).abs() < 1e-5);
            assert!((j[0][1] - (tx[0] - ty[0]) / (2.0 * h)).abs() < 1e-5);
            assert_eq!(data.s.value(p), data.c.gradient(p));
        }
        let expected = 120.0 * (1.0 + (-3.0f64 * 0.09).exp() + (-3.0f64).exp());
        assert!((data.n.value([-0.2, 0.5]) - expected).abs() < 1e-12);
    }

    #[test]
    fn one_step_simulation() {
        let cfg = parse_config_str(
            "mode = simulate\ninitial = competition-2d\n[mesh]\nresolutions = 4\n[time]\ndt = 0.01\nfinal = 0.01\n[output]\nsnapshots = 0, 0.01\ndiagnostics = true\n",
        )
        .unwrap();
        let setup = SimulationSetup::from_config(&cfg).unwrap();
        let traj = run_simulation(&setup).unwrap();
        assert!(traj.failure.is_none());
        assert_eq!(traj.series.len(), 1);
        assert_eq!(traj.snapshots.len(), 2);
        assert_eq!(traj.diagnostics.len(), 2);
        assert_eq!(traj.final_state.m, 1);
        assert!((traj.series[0].t - 0.01).abs() < 1e-15);
        assert!(traj.diagnostics[1].max_divergence <= 1e-8);
    }

    #[test]
    fn zero_custom_data_stays_zero() {
        let cfg = parse_config_str(
            "mode = simulate\ninitial = custom-expression\n[mesh]\nresolutions = 3\n[time]\ndt = 0.5\nfinal = 1\n[custom]\nn0 = 0\nw0 = 0\nc0 = 0\n",
        )
        .unwrap();
        let traj = run_simulation(&SimulationSetup::from_config(&cfg).unwrap()).unwrap();
        assert_eq!(traj.series.len(), 2);
        for r in &traj.series {
            assert_eq!([r.int_n, r.int_w, r.int_c, r.l2_u], [0.0; 4]);
        }
    }

    #[test]
    fn small_convergence_study_reports_orders() {
        let cfg = parse_config_str(
            "mode = convergence-space\ninitial = test2-manufactured\n[mesh]\nresolutions = 4, 8\n[time]\ndt = 0.01\nfinal = 0.02\n",
        )
        .unwrap();
        let report = run_convergence_study(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.failed_rows().is_empty());
        let o = report.orders(Variable::N, Norm::LinfL2);
        assert_eq!(o[0], None);
        assert!(o[1].unwrap() > 1.0);
        assert_eq!(report.all_orders().len(), 5 * 2 + 2);
    }
}
