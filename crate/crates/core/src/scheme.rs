//! Initialization by projections and the linear, decoupled time step.
//!
//! One step solves, in order, for n, w, c, then (u, π), then s. Each
//! equation is linear in its own unknown; all couplings are lagged or use
//! values already computed in the same step.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::assembly::{
    divdiv_rotrot_matrix, flux_rhs, load_vector, load_vector_h1, load_vector_scalar, load_vector_with, mass_matrix,
    pressure_coupling, rule, AssemblyError, FieldFunction, ScalarOperators, DEFAULT_DEGREE,
};
use crate::fespace::{Constraint, FeSpace, SpaceError, SpaceKind};
use crate::fields::{ScalarField, VectorField};
use crate::linsolve::{DiagonalCondensation, LinearSystem, SequenceSolver, SolveError, SolveOptions};
use crate::mesh::Mesh;
use crate::par;
use crate::sparse::{block_matrix, linear_combination, SparseMatrix};

/// Spatially varying vector coefficient such as `∇φ`.
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    N,
    W,
    C,
    Flux,
    Velocity,
    Projection,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Equation::N => "n",
            Equation::W => "w",
            Equation::C => "c",
            Equation::Flux => "s",
            Equation::Velocity => "(u, pi)",
            Equation::Projection => "projection",
        })
    }
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("{equation} solve failed: {source}")]
    Solve { equation: Equation, source: SolveError },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn solve_err(equation: Equation) -> impl FnOnce(SolveError) -> SchemeError {
    move |source| SchemeError::Solve { equation, source }
}

#[derive(Clone)]
pub struct ModelParams {
    pub chi1: f64,
    pub chi2: f64,
    pub dn: f64,
    pub dw: f64,
    pub dc: f64,
    pub du: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Convection coefficient; 0 gives Stokes flow.
    pub k: f64,
    pub grad_phi: VectorFn,
}

impl fmt::Debug for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelParams")
            .field("chi", &(self.chi1, self.chi2))
            .field("D", &(self.dn, self.dw, self.dc, self.du))
            .field("mu", &(self.mu1, self.mu2))
            .field("a", &(self.a1, self.a2))
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("gamma", &self.gamma)
            .field("lambda", &self.lambda)
            .field("k", &self.k)
            .finish_non_exhaustive()
    }
}

impl Default for ModelParams {
    /// Every coefficient 1 and `∇φ = 0`.
    fn default() -> Self {
        ModelParams {
            chi1: 1.0,
            chi2: 1.0,
            dn: 1.0,
            dw: 1.0,
            dc: 1.0,
            du: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            a1: 1.0,
            a2: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            lambda: 1.0,
            k: 1.0,
            grad_phi: Arc::new(|_| [0.0, 0.0]),
        }
    }
}

impl ModelParams {
    /// Coefficients of the two-species competition experiment with gravity
    /// `∇φ = (0, −9.8)`.
    pub fn competition(a1: f64, a2: f64) -> Self {
        ModelParams {
            chi1: 12.0,
            chi2: 15.0,
            dn: 6.0,
            dw: 8.0,
            dc: 1.0,
            du: 1.0,
            mu1: 0.5,
            mu2: 0.3,
            a1,
            a2,
            alpha: 6.0,
            beta: 8.0,
            gamma: 1.0,
            lambda: 1.0,
            k: 1.0,
            grad_phi: Arc::new(|_| [0.0, -9.8]),
        }
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        for (name, v) in [("Dn", self.dn), ("Dw", self.dw), ("Dc", self.dc), ("Du", self.du)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SchemeError::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("chi1", self.chi1),
            ("chi2", self.chi2),
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("a1", self.a1),
            ("a2", self.a2),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("k", self.k),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SchemeError::Parameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// The four discrete spaces over one mesh.
#[derive(Clone, Debug)]
pub struct Spaces {
    pub mesh: Arc<Mesh>,
    pub scalar: FeSpace,
    pub flux: FeSpace,
    pub velocity: FeSpace,
    pub pressure: FeSpace,
}

impl Spaces {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        Spaces {
            scalar: FeSpace::new(mesh.clone(), SpaceKind::ScalarP1),
            flux: FeSpace::new(mesh.clone(), SpaceKind::VectorP1NormalTrace),
            velocity: FeSpace::new(mesh.clone(), SpaceKind::MiniVelocity),
            pressure: FeSpace::new(mesh.clone(), SpaceKind::PressureP1MeanZero),
            mesh,
        }
    }
}

/// Discrete solution at time level `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub m: usize,
    pub t: f64,
    pub n: Vec<f64>,
    pub w: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub pi: Vec<f64>,
}

impl State {
    pub fn zeros(spaces: &Spaces) -> Self {
        State {
            m: 0,
            t: 0.0,
            n: vec![0.0; spaces.scalar.dof_count()],
            w: vec![0.0; spaces.scalar.dof_count()],
            c: vec![0.0; spaces.scalar.dof_count()],
            s: vec![0.0; spaces.flux.dof_count()],
            u: vec![0.0; spaces.velocity.dof_count()],
            pi: vec![0.0; spaces.pressure.dof_count()],
        }
    }

    pub fn check(&self, spaces: &Spaces) -> Result<(), SpaceError> {
        for v in [&self.n, &self.w, &self.c] {
            spaces.scalar.check_len(v)?;
        }
        spaces.flux.check_len(&self.s)?;
        spaces.velocity.check_len(&self.u)?;
        spaces.pressure.check_len(&self.pi)
    }
}

/// Source terms added to each equation, used for manufactured solutions.
pub trait Forcing: Sync {
    fn n(&self, t: f64, p: [f64; 2]) -> f64;
    fn w(&self, t: f64, p: [f64; 2]) -> f64;
    fn c(&self, t: f64, p: [f64; 2]) -> f64;
    fn s(&self, t: f64, p: [f64; 2]) -> [f64; 2];
    fn u(&self, t: f64, p: [f64; 2]) -> [f64; 2];
}

/// Initial fields; `s` must be `∇c`.
#[derive(Clone)]
pub struct InitialData {
    pub n: Arc<dyn ScalarField>,
    pub w: Arc<dyn ScalarField>,
    pub c: Arc<dyn ScalarField>,
    pub s: Arc<dyn VectorField>,
    pub u: Arc<dyn VectorField>,
    /// Pressure for the Stokes projection; zero when absent.
    pub pi: Option<Arc<dyn ScalarField>>,
}

/// `P f` with `(∇(Pf − f), ∇v) + (Pf − f, v) = 0` on a P1 space, or the
/// div/rot/L² analogue on the flux space.
pub fn elliptic_projection_scalar(
    space: &FeSpace,
    exact: &dyn ScalarField,
    opts: &SolveOptions,
) -> Result<Vec<f64>, SchemeError> {
    if space.kind() != SpaceKind::ScalarP1 {
        return Err(SpaceError::Kind { expected: "P1 scalar", got: space.kind() }.into());
    }
    let ops = ScalarOperators::new(space)?;
    let a = linear_combination(&[(1.0, &ops.stiffness(1.0)?), (1.0, &ops.mass())]);
    let b = load_vector_h1(space, DEFAULT_DEGREE, |p| ([exact.value(p), 0.0], [exact.gradient(p), [0.0; 2]]));
    let sys = LinearSystem::new(a, b).map_err(solve_err(Equation::Projection))?;
    crate::linsolve::solve(&sys, opts).map_err(solve_err(Equation::Projection))
}

/// Flux-space projection `(∇·e, ∇·v) + (rot e, rot v) + (e, v) = 0`,
/// `e = Ps − s`, with the normal-trace constraints.
pub fn elliptic_projection_flux(
    space: &FeSpace,
    exact: &dyn VectorField,
    opts: &SolveOptions,
) -> Result<Vec<f64>, SchemeError> {
    if space.kind() != SpaceKind::VectorP1NormalTrace {
        return Err(SpaceError::Kind { expected: "P1 vector", got: space.kind() }.into());
    }
    let a = linear_combination(&[(1.0, &divdiv_rotrot_matrix(space, 1.0)?), (1.0, &mass_matrix(space))]);
    let b = load_vector_h1(space, DEFAULT_DEGREE, |p| {
        let (d, r) = (exact.divergence(p), exact.rot(p));
        (exact.value(p), [[d, -r], [r, d]])
    });
    let sys = LinearSystem::new(a, b).map_err(solve_err(Equation::Projection))?.with_constraints(space.constraints());
    crate::linsolve::solve(&sys, opts).map_err(solve_err(Equation::Projection))
}

/// Discrete Stokes projection of `(u, π)`:
/// `Du (∇(Pu − u), ∇v) + (Pπ − π, ∇·v) = 0`, `(∇·(Pu − u), ψ) = 0`, with
/// `Pπ` of zero mean.
pub fn stokes_projection(
    spaces: &Spaces,
    du: f64,
    u: &dyn VectorField,
    pi: Option<&dyn ScalarField>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, Vec<f64>), SchemeError> {
    let comp = ScalarOperators::new(&spaces.velocity.component_space())?;
    let au = comp.stiffness(du)?.block_diagonal(2);
    let d = pressure_coupling(&spaces.velocity, &spaces.pressure)?;
    let dt = d.transpose();
    let a = block_matrix(&[vec![Some(&au), Some(&d)], vec![Some(&dt), None]]).expect("consistent blocks");
    let mut b = load_vector_h1(&spaces.velocity, DEFAULT_DEGREE, |p| {
        let j = u.jacobian(p);
        let q = pi.map_or(0.0, |f| f.value(p));
        ([0.0; 2], [[du * j[0][0] + q, du * j[0][1]], [du * j[1][0], du * j[1][1] + q]])
    });
    b.extend(load_vector_scalar(&spaces.pressure, DEFAULT_DEGREE, |p| u.divergence(p)));
    StokesSolver::new(*opts, false).solve(spaces, a, b, Equation::Projection)
}

/// Velocity-pressure solver. Bubble unknowns are condensed out exactly
/// (their block is diagonal), one pressure value is pinned to remove the
/// constant null space, and the pressure mean is subtracted afterwards.
/// The continuity row dropped by the pin is implied by the others since
/// `u = 0` on the boundary.
struct StokesSolver {
    solver: SequenceSolver,
    plan: Option<DiagonalCondensation>,
}

impl StokesSolver {
    fn new(opts: SolveOptions, reuse: bool) -> Self {
        StokesSolver { solver: SequenceSolver::new(opts, reuse), plan: None }
    }

    fn solve(
        &mut self,
        spaces: &Spaces,
        a: SparseMatrix,
        b: Vec<f64>,
        equation: Equation,
    ) -> Result<(Vec<f64>, Vec<f64>), SchemeError> {
        let nu = spaces.velocity.dof_count();
        if !self.plan.as_ref().is_some_and(|p| p.matches(a.pattern())) {
            let mut bubble = vec![false; a.nrows()];
            let v = &spaces.velocity;
            let per_component = v.local_dof_count() / v.components();
            for t in 0..spaces.mesh.num_triangles() {
                for (l, &d) in v.element_dofs(t).iter().enumerate() {
                    bubble[d] |= l % per_component == 3;
                }
            }
            self.plan = Some(DiagonalCondensation::new(a.pattern(), &bubble).map_err(solve_err(equation))?);
        }
        let plan = self.plan.as_ref().expect("set above");
        let (s, rhs) = plan.reduce(&a, &b).map_err(solve_err(equation))?;
        let pinned = Constraint { dof: nu, value: 0.0 };
        let constraints: Vec<Constraint> = spaces
            .velocity
            .constraints()
            .iter()
            .chain(std::iter::once(&pinned))
            .map(|c| Constraint { dof: plan.reduced_index(c.dof).expect("constrained dofs are kept"), value: c.value })
            .collect();
        let sys = LinearSystem::new(s, rhs).map_err(solve_err(equation))?.with_constraints(&constraints);
        let reduced = self.solver.solve(&sys).map_err(solve_err(equation))?;
        let mut x = plan.recover(&a, &b, &reduced);
        let mut pi = x.split_off(nu);
        let weights = spaces.pressure.mean_functional().expect("pressure space");
        let mean = weights.iter().zip(&pi).map(|(w, p)| w * p).sum::<f64>() / weights.iter().sum::<f64>();
        pi.iter_mut().for_each(|p| *p -= mean);
        Ok((x, pi))
    }
}

/// Initial state from projections of the initial data.
pub fn init_state(
    spaces: &Spaces,
    params: &ModelParams,
    data: &InitialData,
    opts: &SolveOptions,
) -> Result<State, SchemeError> {
    params.validate()?;
    let (n, w, c) = (
        elliptic_projection_scalar(&spaces.scalar, data.n.as_ref(), opts)?,
        elliptic_projection_scalar(&spaces.scalar, data.w.as_ref(), opts)?,
        elliptic_projection_scalar(&spaces.scalar, data.c.as_ref(), opts)?,
    );
    let s = elliptic_projection_flux(&spaces.flux, data.s.as_ref(), opts)?;
    let (u, pi) = stokes_projection(spaces, params.du, data.u.as_ref(), data.pi.as_deref(), opts)?;
    Ok(State { m: 0, t: 0.0, n, w, c, s, u, pi })
}

/// Tolerance used for the velocity-pressure solve, tight enough that the
/// discrete divergence stays at round-off level.
const STOKES_TOL: f64 = 1e-12;

/// Time stepper holding the time-independent matrices and per-equation
/// solvers of one discretization.
pub struct Stepper {
    params: ModelParams,
    spaces: Spaces,
    scalar_ops: ScalarOperators,
    bubble_ops: ScalarOperators,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    mass_b: SparseMatrix,
    stiffness_b: SparseMatrix,
    mass_s: SparseMatrix,
    divrot: SparseMatrix,
    coupling: SparseMatrix,
    coupling_t: SparseMatrix,
    solver_n: SequenceSolver,
    solver_w: SequenceSolver,
    solver_c: SequenceSolver,
    solver_u: StokesSolver,
    solver_s: SequenceSolver,
}

impl Stepper {
    pub fn new(spaces: &Spaces, params: &ModelParams, opts: &SolveOptions) -> Result<Self, SchemeError> {
        params.validate()?;
        let scalar_ops = ScalarOperators::new(&spaces.scalar)?;
        let bubble_ops = ScalarOperators::new(&spaces.velocity.component_space())?;
        let coupling = pressure_coupling(&spaces.velocity, &spaces.pressure)?;
        let stokes_opts = SolveOptions { tol: opts.tol.min(STOKES_TOL), ..*opts };
        Ok(Stepper {
            mass: scalar_ops.mass(),
            stiffness: scalar_ops.stiffness(1.0)?,
            mass_b: bubble_ops.mass(),
            stiffness_b: bubble_ops.stiffness(1.0)?,
            mass_s: mass_matrix(&spaces.flux),
            divrot: divdiv_rotrot_matrix(&spaces.flux, params.dc)?,
            coupling_t: coupling.transpose(),
            coupling,
            scalar_ops,
            bubble_ops,
            params: params.clone(),
            spaces: spaces.clone(),
            solver_n: SequenceSolver::new(*opts, true),
            solver_w: SequenceSolver::new(*opts, true),
            solver_c: SequenceSolver::new(*opts, true),
            solver_u: StokesSolver::new(stokes_opts, true),
            solver_s: SequenceSolver::new(*opts, true),
        })
    }

    pub fn spaces(&self) -> &Spaces {
        &self.spaces
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Numeric factorizations performed so far, over all equations.
    pub fn factorizations(&self) -> usize {
        [&self.solver_n, &self.solver_w, &self.solver_c, &self.solver_u.solver, &self.solver_s]
            .iter()
            .map(|s| s.factorizations())
            .sum()
    }

    /// One step from `prev` to `prev.t + dt`.
    pub fn advance(&mut self, prev: &State, dt: f64, forcing: Option<&dyn Forcing>) -> Result<State, SchemeError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SchemeError::TimeStep(dt));
        }
        let sp = &self.spaces;
        prev.check(sp)?;
        let p = &self.params;
        let t = prev.t + dt;
        let field = |space, c| FieldFunction::new(space, c);
        let u_prev = field(&sp.velocity, &prev.u)?;
        let s_prev = field(&sp.flux, &prev.s)?;
        let n_prev = field(&sp.scalar, &prev.n)?;
        let w_prev = field(&sp.scalar, &prev.w)?;
        let inv_dt = 1.0 / dt;

        // n and w
        let transport = self.scalar_ops.transport(&u_prev)?;
        let g_n = self.scalar_ops.truncated_weight_mass(&n_prev, 1.0)?;
        let g_w = self.scalar_ops.truncated_weight_mass(&w_prev, 1.0)?;
        let base = linear_combination(&[(inv_dt, &self.mass), (1.0, &transport)]);
        let chemo = self.scalar_ops.chemo(&s_prev, 1.0)?;
        let mass = &self.mass;
        let stiffness = &self.stiffness;
        type Source<'a> = Option<Box<dyn Fn([f64; 2]) -> f64 + Send + Sync + 'a>>;
        let species = |eq: Equation, d: f64, mu: f64, gn: f64, gw: f64, chi: f64, old: &[f64], source: Source| {
            let a = linear_combination(&[
                (1.0, &base),
                (d, stiffness),
                (-mu, mass),
                (gn, &g_n),
                (gw, &g_w),
                (-chi, &chemo),
            ]);
            let mut b = mass.mul_vec(old);
            b.iter_mut().for_each(|v| *v *= inv_dt);
            if let Some(f) = source {
                add(&mut b, &load_vector_scalar(&sp.scalar, DEFAULT_DEGREE, f));
            }
            LinearSystem::new(a, b).map_err(solve_err(eq))
        };
        let src_n: Source = forcing.map(|f| Box::new(move |x| f.n(t, x)) as _);
        let src_w: Source = forcing.map(|f| Box::new(move |x| f.w(t, x)) as _);
        let sys_n = species(Equation::N, p.dn, p.mu1, p.mu1, p.mu1 * p.a1, p.chi1, &prev.n, src_n)?;
        let sys_w = species(Equation::W, p.dw, p.mu2, p.mu2 * p.a2, p.mu2, p.chi2, &prev.w, src_w)?;
        let (solver_n, solver_w) = (&mut self.solver_n, &mut self.solver_w);
        let (n, w) = par::join(|| solver_n.solve(&sys_n), || solver_w.solve(&sys_w));
        let n = n.map_err(solve_err(Equation::N))?;
        let w = w.map_err(solve_err(Equation::W))?;

        // c, with the new densities
        let n_new = field(&sp.scalar, &n)?;
        let w_new = field(&sp.scalar, &w)?;
        let a_c = linear_combination(&[
            (1.0, &base),
            (p.dc, &self.stiffness),
            (1.0, &self.scalar_ops.truncated_weight_mass_sum(&[(p.alpha, &n_new), (p.beta, &w_new)])?),
        ]);
        let mut b_c = self.mass.mul_vec(&prev.c);
        b_c.iter_mut().for_each(|v| *v *= inv_dt);
        if let Some(f) = forcing {
            add(&mut b_c, &load_vector_scalar(&sp.scalar, DEFAULT_DEGREE, |x| f.c(t, x)));
        }
        let sys_c = LinearSystem::new(a_c, b_c).map_err(solve_err(Equation::C))?;
        let c = self.solver_c.solve(&sys_c).map_err(solve_err(Equation::C))?;

        // (u, π)
        let mut blocks: Vec<(f64, &SparseMatrix)> = vec![(inv_dt, &self.mass_b), (p.du, &self.stiffness_b)];
        let convection;
        if p.k != 0.0 {
            convection = self.bubble_ops.transport(&u_prev)?;
            blocks.push((p.k, &convection));
        }
        let a_u = linear_combination(&blocks).block_diagonal(2);
        let a = block_matrix(&[vec![Some(&a_u), Some(&self.coupling)], vec![Some(&self.coupling_t), None]])
            .expect("consistent blocks");
        let mut b_u = self.mass_b.block_diagonal(2).mul_vec(&prev.u);
        b_u.iter_mut().for_each(|v| *v *= inv_dt);
        if p.gamma != 0.0 || p.lambda != 0.0 {
            let mesh = sp.mesh.clone();
            let grad_phi = &p.grad_phi;
            let buoyancy = load_vector_with(&sp.velocity, DEFAULT_DEGREE, |tri, bary, x| {
                let geom = mesh.geometry(tri);
                let dens = p.gamma * n_new.scalar_at(tri, bary, geom) + p.lambda * w_new.scalar_at(tri, bary, geom);
                let g = grad_phi(x);
                [dens * g[0], dens * g[1]]
            });
            add(&mut b_u, &buoyancy);
        }
        if let Some(f) = forcing {
            add(&mut b_u, &load_vector(&sp.velocity, DEFAULT_DEGREE, |x| f.u(t, x)));
        }
        b_u.extend(std::iter::repeat_n(0.0, sp.pressure.dof_count()));
        let (u, pi) = self.solver_u.solve(sp, a, b_u, Equation::Velocity)?;

        // s
        let u_new = field(&sp.velocity, &u)?;
        let c_prev = field(&sp.scalar, &prev.c)?;
        let a_s = linear_combination(&[(inv_dt, &self.mass_s), (1.0, &self.divrot)]);
        let mut b_s = self.mass_s.mul_vec(&prev.s);
        b_s.iter_mut().for_each(|v| *v *= inv_dt);
        add(&mut b_s, &flux_rhs(&sp.flux, &u_new, &s_prev, &n_new, &w_new, &c_prev, p.alpha, p.beta)?);
        if let Some(f) = forcing {
            add(&mut b_s, &load_vector(&sp.flux, DEFAULT_DEGREE, |x| f.s(t, x)));
        }
        let sys_s = LinearSystem::new(a_s, b_s)
            .map_err(solve_err(Equation::Flux))?
            .with_constraints(sp.flux.constraints());
        let s = self.solver_s.solve(&sys_s).map_err(solve_err(Equation::Flux))?;

        Ok(State { m: prev.m + 1, t, n, w, c, s, u, pi })
    }

    /// `(∇·u, ψⱼ)` for every pressure basis function.
    pub fn divergence_residuals(&self, u: &[f64]) -> Vec<f64> {
        self.coupling_t.mul_vec(u)
    }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// `‖f‖_{L^p}` of a discrete scalar or vector field (Euclidean norm
/// pointwise), by degree-5 quadrature.
pub fn lp_norm(space: &FeSpace, coeffs: &[f64], p: f64) -> Result<f64, SpaceError> {
    let f = FieldFunction::new(space, coeffs)?;
    let mesh = space.mesh();
    let q = rule(DEFAULT_DEGREE);
    let parts = par::map_indexed(mesh.num_triangles(), |t| {
        let geom = mesh.geometry(t);
        q.integrate(geom.area, |b| {
            let v = if space.components() == 1 {
                f.scalar_at(t, b, geom).abs()
            } else {
                let v = f.vector_at(t, b, geom);
                v[0].hypot(v[1])
            };
            v.powf(p)
        })
    });
    Ok(parts.iter().sum::<f64>().powf(1.0 / p))
}

/// `(‖s‖_{L^{10/3}}, ‖c‖_{L^{10/3}})`, the quantities bounded by the
/// inductive hypothesis of the stability analysis. Reported, not enforced.
pub fn monitor_inductive_hypothesis(spaces: &Spaces, state: &State) -> Result<(f64, f64), SpaceError> {
    Ok((lp_norm(&spaces.flux, &state.s, 10.0 / 3.0)?, lp_norm(&spaces.scalar, &state.c, 10.0 / 3.0)?))
}

/// `∫ f` of a discrete scalar field.
pub fn integral(space: &FeSpace, coeffs: &[f64]) -> Result<f64, SpaceError> {
    let f = FieldFunction::new(space, coeffs)?;
    let mesh = space.mesh();
    let q = rule(2);
    let parts = par::map_indexed(mesh.num_triangles(), |t| {
        let geom = mesh.geometry(t);
        q.integrate(geom.area, |b| f.scalar_at(t, b, geom))
    });
    Ok(parts.iter().sum())
}

/// `‖u‖_{L²}` of a discrete field.
pub fn l2_norm(space: &FeSpace, coeffs: &[f64]) -> Result<f64, SpaceError> {
    lp_norm(space, coeffs, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ConstantScalar, ConstantVector, FnScalar, FnVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spaces(n: usize) -> Spaces {
        Spaces::new(Arc::new(Mesh::unit_square(n, n).unwrap()))
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let p = ModelParams { dn: -1.0, ..ModelParams::default() };
        assert!(matches!(p.validate(), Err(SchemeError::Parameter(_))));
        let p = ModelParams { chi1: -1.0, ..ModelParams::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn projections_reproduce_space_members() {
        let sp = spaces(4);
        let opts = SolveOptions::default();
        let one = elliptic_projection_scalar(&sp.scalar, &ConstantScalar(1.0), &opts).unwrap();
        assert!(one.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let x = FnScalar { value: |p: [f64; 2]| p[0], gradient: |_| [1.0, 0.0] };
        let px = elliptic_projection_scalar(&sp.scalar, &x, &opts).unwrap();
        for (v, q) in px.iter().zip(sp.mesh.vertices()) {
            assert!((v - q[0]).abs() < 1e-12);
        }
        let zero = elliptic_projection_flux(&sp.flux, &ConstantVector([0.0; 2]), &opts).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let (u, pi) = stokes_projection(&sp, 1.0, &ConstantVector([0.0; 2]), None, &opts).unwrap();
        assert!(u.iter().chain(&pi).all(|&v| v == 0.0));
    }

    #[test]
    fn flux_projection_of_gradient_field() {
        // s = ∇(x²(1−x)² y²(1−y)²/…) style fields have s·ν = 0; use a simple one
        let sp = spaces(8);
        let s = FnVector {
            value: |p: [f64; 2]| [(std::f64::consts::PI * p[0]).sin(), 0.0],
            jacobian: |p: [f64; 2]| [[std::f64::consts::PI * (std::f64::consts::PI * p[0]).cos(), 0.0], [0.0, 0.0]],
        };
        let ps = elliptic_projection_flux(&sp.flux, &s, &SolveOptions::default()).unwrap();
        for c in sp.flux.constraints() {
            assert_eq!(ps[c.dof], 0.0);
        }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let sp = spaces(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let params = ModelParams {
                chi1: rng.random_range(0.0..5.0),
                mu1: rng.random_range(0.0..2.0),
                a1: rng.random_range(0.0..2.0),
                dn: rng.random_range(0.1..3.0),
                k: rng.random_range(0.0..1.0),
                ..ModelParams::competition(0.5, 0.5)
            };
            let mut stepper = Stepper::new(&sp, &params, &SolveOptions::default()).unwrap();
            let zero = State::zeros(&sp);
            let dt = rng.random_range(1e-3..1.0);
            let next = stepper.advance(&zero, dt, None).unwrap();
            assert_eq!(next.m, 1);
            assert_eq!(next.t, dt);
            for v in [&next.n, &next.w, &next.c, &next.s, &next.u, &next.pi] {
                assert!(v.iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn rejects_bad_time_step() {
        let sp = spaces(2);
        let mut stepper = Stepper::new(&sp, &ModelParams::default(), &SolveOptions::default()).unwrap();
        assert!(matches!(stepper.advance(&State::zeros(&sp), 0.0, None), Err(SchemeError::TimeStep(_))));
    }

    #[test]
    fn inductive_hypothesis_norms() {
        let sp = spaces(8);
        let zero = State::zeros(&sp);
        assert_eq!(monitor_inductive_hypothesis(&sp, &zero).unwrap(), (0.0, 0.0));
        let mut st = zero.clone();
        st.c = vec![2.0; sp.scalar.dof_count()];
        assert!((monitor_inductive_hypothesis(&sp, &st).unwrap().1 - 2.0).abs() < 1e-12);
        // for c = x the P1 interpolant is exact
        st.c = sp.scalar.interpolate_scalar(|p| p[0]);
        let expected = (3.0f64 / 13.0).powf(0.3);
        assert!((monitor_inductive_hypothesis(&sp, &st).unwrap().1 - expected).abs() < 1e-6);
    }

    #[test]
    fn integrals_and_norms() {
        let sp = spaces(3);
        let ones = vec![1.0; sp.scalar.dof_count()];
        assert!((integral(&sp.scalar, &ones).unwrap() - 1.0).abs() < 1e-14);
        assert!((l2_norm(&sp.scalar, &ones).unwrap() - 1.0).abs() < 1e-14);
    }
}
