//! Global matrices and load vectors of the time-stepping scheme.
//!
//! Every assembly computes element matrices (optionally in parallel), then
//! scatters them into a fixed pattern in element order, so results do not
//! depend on the execution mode.

use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::fespace::{eval_component_grad, FeSpace, LocalBasis, SpaceError, SpaceKind};
use crate::mesh::ElementGeometry;
use crate::par;
use crate::quadrature::{triangle_quadrature, QuadratureRule};
use crate::sparse::{Pattern, SparseMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Degree used for truncated-coefficient integrands, forcing terms and
/// general loads.
pub const DEFAULT_DEGREE: usize = 5;

/// Shared quadrature rules, built on first use.
pub fn rule(degree: usize) -> &'static QuadratureRule {
    static RULES: [OnceLock<QuadratureRule>; 21] = [const { OnceLock::new() }; 21];
    RULES[degree].get_or_init(|| triangle_quadrature(degree).expect("supported degree"))
}

/// A discrete field: coefficients on a space.
#[derive(Clone, Copy, Debug)]
pub struct FieldFunction<'a> {
    space: &'a FeSpace,
    coeffs: &'a [f64],
}

impl<'a> FieldFunction<'a> {
    pub fn new(space: &'a FeSpace, coeffs: &'a [f64]) -> Result<Self, SpaceError> {
        space.check_len(coeffs)?;
        Ok(FieldFunction { space, coeffs })
    }

    pub fn space(&self) -> &'a FeSpace {
        self.space
    }

    pub fn coeffs(&self) -> &'a [f64] {
        self.coeffs
    }

    fn basis(&self, bary: [f64; 3], geom: &ElementGeometry) -> LocalBasis {
        LocalBasis::eval(bary, &geom.grad_lambda, self.space.kind().has_bubble())
    }

    #[inline]
    fn component_grad(&self, t: usize, c: usize, basis: &LocalBasis) -> [f64; 2] {
        let dofs = &self.space.element_dofs(t)[c * basis.n..(c + 1) * basis.n];
        eval_component_grad(self.coeffs, dofs, basis)
    }

    /// Basis values only; gradients are not needed for point values.
    #[inline]
    fn values(&self, bary: [f64; 3]) -> ([f64; 4], usize) {
        if self.space.kind().has_bubble() {
            ([bary[0], bary[1], bary[2], 27.0 * bary[0] * bary[1] * bary[2]], 4)
        } else {
            ([bary[0], bary[1], bary[2], 0.0], 3)
        }
    }

    #[inline]
    fn component_value(&self, t: usize, c: usize, values: &[f64; 4], n: usize) -> f64 {
        let dofs = &self.space.element_dofs(t)[c * n..(c + 1) * n];
        let mut v = 0.0;
        for a in 0..n {
            v += self.coeffs[dofs[a]] * values[a];
        }
        v
    }

    pub(crate) fn scalar_at(&self, t: usize, bary: [f64; 3], _geom: &ElementGeometry) -> f64 {
        let (v, n) = self.values(bary);
        self.component_value(t, 0, &v, n)
    }

    pub(crate) fn vector_at(&self, t: usize, bary: [f64; 3], _geom: &ElementGeometry) -> [f64; 2] {
        let (v, n) = self.values(bary);
        [self.component_value(t, 0, &v, n), self.component_value(t, 1, &v, n)]
    }

    pub(crate) fn scalar_grad_at(&self, t: usize, bary: [f64; 3], geom: &ElementGeometry) -> [f64; 2] {
        self.component_grad(t, 0, &self.basis(bary, geom))
    }

    pub(crate) fn vector_grad_at(&self, t: usize, bary: [f64; 3], geom: &ElementGeometry) -> [[f64; 2]; 2] {
        let b = self.basis(bary, geom);
        [self.component_grad(t, 0, &b), self.component_grad(t, 1, &b)]
    }
}

/// Sparsity pattern and element scatter map for one (test, trial) space pair.
#[derive(Clone, Debug)]
pub struct Assembler {
    pattern: Arc<Pattern>,
    scatter: Vec<usize>,
    local_rows: usize,
    local_cols: usize,
    num_elements: usize,
}

impl Assembler {
    pub fn new(rows: &FeSpace, cols: &FeSpace) -> Self {
        let nt = rows.mesh().num_triangles();
        let (lr, lc) = (rows.local_dof_count(), cols.local_dof_count());
        let mut row_lists = vec![Vec::new(); rows.dof_count()];
        for t in 0..nt {
            let cdofs = cols.element_dofs(t);
            for &i in rows.element_dofs(t) {
                row_lists[i].extend_from_slice(cdofs);
            }
        }
        let pattern = Arc::new(Pattern::from_rows(cols.dof_count(), row_lists));
        let mut scatter = Vec::with_capacity(nt * lr * lc);
        for t in 0..nt {
            let cdofs = cols.element_dofs(t);
            for &i in rows.element_dofs(t) {
                scatter.extend(cdofs.iter().map(|&j| pattern.find(i, j).expect("in pattern")));
            }
        }
        Assembler { pattern, scatter, local_rows: lr, local_cols: lc, num_elements: nt }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    /// `kernel(t, local)` fills the row-major element matrix of triangle `t`.
    pub fn assemble<K>(&self, kernel: K) -> SparseMatrix
    where
        K: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let (lr, lc) = (self.local_rows, self.local_cols);
        let locals = par::map_indexed(self.num_elements, |t| {
            let mut local = vec![0.0; lr * lc];
            kernel(t, &mut local);
            local
        });
        let mut m = SparseMatrix::zeros(self.pattern.clone());
        let values = m.values_mut();
        for (t, local) in locals.iter().enumerate() {
            let map = &self.scatter[t * lr * lc..(t + 1) * lr * lc];
            for (k, &v) in map.iter().zip(local) {
                values[*k] += v;
            }
        }
        m
    }
}

fn assemble_vector<K>(space: &FeSpace, kernel: K) -> Vec<f64>
where
    K: Fn(usize, &mut [f64]) + Sync + Send,
{
    let nl = space.local_dof_count();
    let locals = par::map_indexed(space.mesh().num_triangles(), |t| {
        let mut local = vec![0.0; nl];
        kernel(t, &mut local);
        local
    });
    let mut b = vec![0.0; space.dof_count()];
    for (t, local) in locals.iter().enumerate() {
        for (&i, v) in space.element_dofs(t).iter().zip(local) {
            b[i] += v;
        }
    }
    b
}

/// Element-level integrals. Local orderings follow [`FeSpace::element_dofs`].
pub mod element {
    use super::*;

    /// Scalar mass matrix `∫φᵢφⱼ` (3x3 for P1, 4x4 with the bubble).
    pub fn mass(geom: &ElementGeometry, bubble: bool) -> Vec<f64> {
        let rule = rule(if bubble { 6 } else { 2 });
        let n = if bubble { 4 } else { 3 };
        let mut m = vec![0.0; n * n];
        for (p, w) in rule.iter() {
            let b = LocalBasis::eval(*p, &geom.grad_lambda, bubble);
            let jw = 2.0 * geom.area * w;
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] += jw * (b.values[i] * b.values[j]);
                }
            }
        }
        m
    }

    /// Scalar stiffness `D ∫∇φᵢ·∇φⱼ`.
    pub fn stiffness(geom: &ElementGeometry, bubble: bool, diffusion: f64) -> Vec<f64> {
        let n = if bubble { 4 } else { 3 };
        let mut k = vec![0.0; n * n];
        if !bubble {
            let g = &geom.grad_lambda;
            for i in 0..3 {
                for j in 0..3 {
                    k[i * 3 + j] = diffusion * geom.area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
            return k;
        }
        for (p, w) in rule(4).iter() {
            let b = LocalBasis::eval(*p, &geom.grad_lambda, true);
            let jw = 2.0 * geom.area * w * diffusion;
            for i in 0..4 {
                for j in 0..4 {
                    k[i * 4 + j] += jw * (b.grads[i][0] * b.grads[j][0] + b.grads[i][1] * b.grads[j][1]);
                }
            }
        }
        k
    }

    /// `Dc [(∇·s, ∇·s̄) + (rot s, rot s̄)]` on P1 vectors, 6x6 with the
    /// x-component DOFs first. `rot s = ∂ₓs₂ − ∂ᵧs₁`.
    pub fn divdiv_rotrot(geom: &ElementGeometry, dc: f64) -> Vec<f64> {
        let g = &geom.grad_lambda;
        // div and rot of each of the six local basis functions
        let mut div = [0.0; 6];
        let mut rot = [0.0; 6];
        for a in 0..3 {
            div[a] = g[a][0];
            rot[a] = -g[a][1];
            div[3 + a] = g[a][1];
            rot[3 + a] = g[a][0];
        }
        let mut k = vec![0.0; 36];
        for i in 0..6 {
            for j in 0..6 {
                k[i * 6 + j] = dc * geom.area * (div[i] * div[j] + rot[i] * rot[j]);
            }
        }
        k
    }

    /// `∫ f·φᵢ` for a scalar (`ncomp = 1`) or vector (`ncomp = 2`) basis;
    /// `f` receives the physical point.
    pub fn load<F: Fn([f64; 2]) -> [f64; 2]>(
        points: [[f64; 2]; 3],
        geom: &ElementGeometry,
        bubble: bool,
        ncomp: usize,
        rule: &QuadratureRule,
        f: F,
    ) -> Vec<f64> {
        let n = if bubble { 4 } else { 3 };
        let mut b = vec![0.0; n * ncomp];
        for (p, w) in rule.iter() {
            let x = [
                p[0] * points[0][0] + p[1] * points[1][0] + p[2] * points[2][0],
                p[0] * points[0][1] + p[1] * points[1][1] + p[2] * points[2][1],
            ];
            let fv = f(x);
            let basis = LocalBasis::eval(*p, &geom.grad_lambda, bubble);
            let jw = 2.0 * geom.area * w;
            for c in 0..ncomp {
                for a in 0..n {
                    b[c * n + a] += jw * fv[c] * basis.values[a];
                }
            }
        }
        b
    }
}

fn require_scalar(space: &FeSpace) -> Result<(), AssemblyError> {
    match space.kind() {
        SpaceKind::ScalarP1 | SpaceKind::PressureP1MeanZero | SpaceKind::ScalarP1Bubble => Ok(()),
        k => Err(SpaceError::Kind { expected: "scalar", got: k }.into()),
    }
}

fn require_kind(space: &FeSpace, kind: SpaceKind, name: &'static str) -> Result<(), AssemblyError> {
    if space.kind() != kind {
        return Err(SpaceError::Kind { expected: name, got: space.kind() }.into());
    }
    Ok(())
}

fn require_positive(name: &str, v: f64) -> Result<(), AssemblyError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(AssemblyError::Parameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn require_same_mesh(a: &FeSpace, b: &FeSpace) -> Result<(), AssemblyError> {
    if !a.same_mesh(b) {
        return Err(SpaceError::MeshMismatch.into());
    }
    Ok(())
}

/// Mass matrix; vector spaces get the block-diagonal component mass.
pub fn mass_matrix(space: &FeSpace) -> SparseMatrix {
    let comp = if space.components() > 1 { space.component_space() } else { space.clone() };
    let mesh = comp.mesh().clone();
    let bubble = comp.kind().has_bubble();
    let m = Assembler::new(&comp, &comp).assemble(|t, local| {
        local.copy_from_slice(&element::mass(mesh.geometry(t), bubble));
    });
    if space.components() > 1 {
        m.block_diagonal(space.components())
    } else {
        m
    }
}

/// `D (∇φⱼ, ∇φᵢ)`; vector spaces get one block per component.
pub fn stiffness_matrix(space: &FeSpace, diffusion: f64) -> Result<SparseMatrix, AssemblyError> {
    require_positive("diffusion coefficient", diffusion)?;
    let comp = if space.components() > 1 { space.component_space() } else { space.clone() };
    let mesh = comp.mesh().clone();
    let bubble = comp.kind().has_bubble();
    let k = Assembler::new(&comp, &comp).assemble(|t, local| {
        local.copy_from_slice(&element::stiffness(mesh.geometry(t), bubble, diffusion));
    });
    Ok(if space.components() > 1 { k.block_diagonal(space.components()) } else { k })
}

/// `Dc [(∇·sⱼ, ∇·sᵢ) + (rot sⱼ, rot sᵢ)]` on the flux space.
pub fn divdiv_rotrot_matrix(space: &FeSpace, dc: f64) -> Result<SparseMatrix, AssemblyError> {
    require_kind(space, SpaceKind::VectorP1NormalTrace, "P1 vector")?;
    require_positive("Dc", dc)?;
    let mesh = space.mesh().clone();
    Ok(Assembler::new(space, space).assemble(|t, local| {
        local.copy_from_slice(&element::divdiv_rotrot(mesh.geometry(t), dc));
    }))
}

/// Local transport matrix `T[i][j] = ∫(u·∇φⱼ)φᵢ` antisymmetrized to
/// `½(T − Tᵀ)`.
fn skew_transport_local(
    u: &FieldFunction,
    t: usize,
    geom: &ElementGeometry,
    bubble: bool,
    rule: &QuadratureRule,
    local: &mut [f64],
) {
    let n = if bubble { 4 } else { 3 };
    let mut tm = [0.0; 16];
    for (p, w) in rule.iter() {
        let b = LocalBasis::eval(*p, &geom.grad_lambda, bubble);
        let uv = u.vector_at(t, *p, geom);
        let jw = 2.0 * geom.area * w;
        for j in 0..n {
            let adv = uv[0] * b.grads[j][0] + uv[1] * b.grads[j][1];
            for i in 0..n {
                tm[i * n + j] += jw * adv * b.values[i];
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            local[i * n + j] = 0.5 * (tm[i * n + j] - tm[j * n + i]);
        }
    }
}

fn require_velocity(u: &FieldFunction) -> Result<(), AssemblyError> {
    if u.space().components() != 2 {
        return Err(SpaceError::Kind { expected: "vector", got: u.space().kind() }.into());
    }
    Ok(())
}

/// Skew-symmetric scalar transport `A(u, φⱼ, φᵢ)`.
pub fn transport_matrix_a(space: &FeSpace, u: &FieldFunction) -> Result<SparseMatrix, AssemblyError> {
    Ok(ScalarOperators::new(space)?.transport(u)?)
}

/// Skew-symmetric convection `B(u, Φⱼ, Φᵢ)` on the MINI velocity space.
pub fn convection_matrix_b(space: &FeSpace, u: &FieldFunction) -> Result<SparseMatrix, AssemblyError> {
    require_kind(space, SpaceKind::MiniVelocity, "MINI velocity")?;
    let comp = space.component_space();
    let b = ScalarOperators::new(&comp)?.transport(u)?;
    Ok(b.block_diagonal(2))
}

/// Operators on one scalar space sharing a single sparsity pattern; the
/// time loop keeps one per space so per-step matrices combine cheaply.
#[derive(Clone, Debug)]
pub struct ScalarOperators {
    space: FeSpace,
    assembler: Assembler,
}

impl ScalarOperators {
    pub fn new(space: &FeSpace) -> Result<Self, AssemblyError> {
        require_scalar(space)?;
        Ok(ScalarOperators { space: space.clone(), assembler: Assembler::new(space, space) })
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        self.assembler.pattern()
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn mass(&self) -> SparseMatrix {
        let mesh = self.space.mesh().clone();
        let bubble = self.space.kind().has_bubble();
        self.assembler.assemble(|t, local| local.copy_from_slice(&element::mass(mesh.geometry(t), bubble)))
    }

    pub fn stiffness(&self, diffusion: f64) -> Result<SparseMatrix, AssemblyError> {
        require_positive("diffusion coefficient", diffusion)?;
        let mesh = self.space.mesh().clone();
        let bubble = self.space.kind().has_bubble();
        Ok(self
            .assembler
            .assemble(|t, local| local.copy_from_slice(&element::stiffness(mesh.geometry(t), bubble, diffusion))))
    }

    /// Skew-symmetric `½[((u·∇)φⱼ, φᵢ) − ((u·∇)φᵢ, φⱼ)]`.
    pub fn transport(&self, u: &FieldFunction) -> Result<SparseMatrix, AssemblyError> {
        require_velocity(u)?;
        require_same_mesh(&self.space, u.space())?;
        let mesh = self.space.mesh().clone();
        let bubble = self.space.kind().has_bubble();
        // u (cubic with bubbles) · ∇φ · φ: degree 8 with bubble test functions, 4 otherwise
        let q = rule(match (bubble, u.space().kind().has_bubble()) {
            (true, true) => 8,
            (true, false) | (false, true) => 5,
            (false, false) => 2,
        });
        Ok(self.assembler.assemble(|t, local| skew_transport_local(u, t, mesh.geometry(t), bubble, q, local)))
    }

    /// `scale ∫[g]₊ φⱼφᵢ` with the positive part taken at quadrature points.
    pub fn truncated_weight_mass(&self, g: &FieldFunction, scale: f64) -> Result<SparseMatrix, AssemblyError> {
        self.truncated_weight_mass_sum(&[(scale, g)])
    }

    /// `∫ (Σₖ scaleₖ [gₖ]₊) φⱼφᵢ`, one assembly for several weights.
    pub fn truncated_weight_mass_sum(&self, terms: &[(f64, &FieldFunction)]) -> Result<SparseMatrix, AssemblyError> {
        for (_, g) in terms {
            require_scalar(g.space())?;
            require_same_mesh(&self.space, g.space())?;
        }
        let mesh = self.space.mesh().clone();
        let bubble = self.space.kind().has_bubble();
        let n = if bubble { 4 } else { 3 };
        let q = rule(DEFAULT_DEGREE);
        Ok(self.assembler.assemble(|t, local| {
            let geom = mesh.geometry(t);
            for (p, w) in q.iter() {
                let weight: f64 = terms.iter().map(|(scale, g)| scale * g.scalar_at(t, *p, geom).max(0.0)).sum();
                if weight == 0.0 {
                    continue;
                }
                let b = LocalBasis::eval(*p, &geom.grad_lambda, bubble);
                let jw = 2.0 * geom.area * w * weight;
                for i in 0..n {
                    for j in 0..n {
                        local[i * n + j] += jw * (b.values[i] * b.values[j]);
                    }
                }
            }
        }))
    }

    /// `chi ∫ φⱼ (s·∇φᵢ)`.
    pub fn chemo(&self, s: &FieldFunction, chi: f64) -> Result<SparseMatrix, AssemblyError> {
        require_kind(s.space(), SpaceKind::VectorP1NormalTrace, "P1 vector")?;
        require_same_mesh(&self.space, s.space())?;
        let mesh = self.space.mesh().clone();
        let bubble = self.space.kind().has_bubble();
        let n = if bubble { 4 } else { 3 };
        let q = rule(if bubble { 5 } else { 2 });
        Ok(self.assembler.assemble(|t, local| {
            if chi == 0.0 {
                return;
            }
            let geom = mesh.geometry(t);
            for (p, w) in q.iter() {
                let b = LocalBasis::eval(*p, &geom.grad_lambda, bubble);
                let sv = s.vector_at(t, *p, geom);
                let jw = 2.0 * geom.area * w * chi;
                for i in 0..n {
                    let sg = sv[0] * b.grads[i][0] + sv[1] * b.grads[i][1];
                    for j in 0..n {
                        local[i * n + j] += jw * b.values[j] * sg;
                    }
                }
            }
        }))
    }
}

/// `scale ∫[g]₊ φⱼφᵢ`, truncation applied pointwise at quadrature points.
pub fn truncated_weight_mass(space: &FeSpace, g: &FieldFunction, scale: f64) -> Result<SparseMatrix, AssemblyError> {
    ScalarOperators::new(space)?.truncated_weight_mass(g, scale)
}

/// Chemotaxis coupling `Cᵢⱼ = χ ∫ φⱼ (s·∇φᵢ)`.
pub fn chemo_matrix(space: &FeSpace, s_prev: &FieldFunction, chi: f64) -> Result<SparseMatrix, AssemblyError> {
    ScalarOperators::new(space)?.chemo(s_prev, chi)
}

/// `Dᵢⱼ = ∫ ψⱼ (∇·Φᵢ)`, velocity rows by pressure columns.
pub fn pressure_coupling(velocity: &FeSpace, pressure: &FeSpace) -> Result<SparseMatrix, AssemblyError> {
    require_kind(velocity, SpaceKind::MiniVelocity, "MINI velocity")?;
    require_kind(pressure, SpaceKind::PressureP1MeanZero, "mean-zero pressure")?;
    require_same_mesh(velocity, pressure)?;
    let mesh = velocity.mesh().clone();
    let q = rule(3);
    Ok(Assembler::new(velocity, pressure).assemble(|t, local| {
        let geom = mesh.geometry(t);
        for (p, w) in q.iter() {
            let b = LocalBasis::eval(*p, &geom.grad_lambda, true);
            let jw = 2.0 * geom.area * w;
            for c in 0..2 {
                for a in 0..4 {
                    let div = b.grads[a][c];
                    for j in 0..3 {
                        local[(c * 4 + a) * 3 + j] += jw * div * p[j];
                    }
                }
            }
        }
    }))
}

/// `∫ (u·s + (α n + β w) c) ∇·Φᵢ` over the flux space.
#[allow(clippy::too_many_arguments)]
pub fn flux_rhs(
    space_s: &FeSpace,
    u_m: &FieldFunction,
    s_prev: &FieldFunction,
    n_m: &FieldFunction,
    w_m: &FieldFunction,
    c_prev: &FieldFunction,
    alpha: f64,
    beta: f64,
) -> Result<Vec<f64>, AssemblyError> {
    require_kind(space_s, SpaceKind::VectorP1NormalTrace, "P1 vector")?;
    require_velocity(u_m)?;
    require_kind(s_prev.space(), SpaceKind::VectorP1NormalTrace, "P1 vector")?;
    for f in [n_m, w_m, c_prev] {
        require_scalar(f.space())?;
    }
    for f in [u_m, s_prev, n_m, w_m, c_prev] {
        require_same_mesh(space_s, f.space())?;
    }
    let mesh = space_s.mesh().clone();
    let q = rule(DEFAULT_DEGREE);
    Ok(assemble_vector(space_s, |t, local| {
        let geom = mesh.geometry(t);
        let gl = &geom.grad_lambda;
        let mut g_int = 0.0;
        for (p, w) in q.iter() {
            let u = u_m.vector_at(t, *p, geom);
            let s = s_prev.vector_at(t, *p, geom);
            let dens = alpha * n_m.scalar_at(t, *p, geom) + beta * w_m.scalar_at(t, *p, geom);
            let g = u[0] * s[0] + u[1] * s[1] + dens * c_prev.scalar_at(t, *p, geom);
            g_int += 2.0 * geom.area * w * g;
        }
        // ∇·Φ is constant per element for P1
        for a in 0..3 {
            local[a] = g_int * gl[a][0];
            local[3 + a] = g_int * gl[a][1];
        }
    }))
}

/// `∫ f φᵢ` for a scalar space.
pub fn load_vector_scalar<F>(space: &FeSpace, degree: usize, f: F) -> Vec<f64>
where
    F: Fn([f64; 2]) -> f64 + Sync + Send,
{
    load_vector(space, degree, |p| [f(p), 0.0])
}

/// `∫ f·Φᵢ`. For scalar spaces only the first component of `f` is used.
pub fn load_vector<F>(space: &FeSpace, degree: usize, f: F) -> Vec<f64>
where
    F: Fn([f64; 2]) -> [f64; 2] + Sync + Send,
{
    let mesh = space.mesh().clone();
    let q = rule(degree);
    let bubble = space.kind().has_bubble();
    let ncomp = space.components();
    assemble_vector(space, |t, local| {
        local.copy_from_slice(&element::load(mesh.triangle_points(t), mesh.geometry(t), bubble, ncomp, q, &f));
    })
}

/// `∫ f(t, bary, x)·Φᵢ` where the integrand may sample discrete fields on
/// element `t`.
pub fn load_vector_with<F>(space: &FeSpace, degree: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, [f64; 3], [f64; 2]) -> [f64; 2] + Sync + Send,
{
    let mesh = space.mesh().clone();
    let q = rule(degree);
    let bubble = space.kind().has_bubble();
    let ncomp = space.components();
    let n = if bubble { 4 } else { 3 };
    assemble_vector(space, |t, local| {
        let geom = mesh.geometry(t);
        for (p, w) in q.iter() {
            let x = mesh.map_point(t, *p);
            let fv = f(t, *p, x);
            let basis = LocalBasis::eval(*p, &geom.grad_lambda, bubble);
            let jw = 2.0 * geom.area * w;
            for c in 0..ncomp {
                for a in 0..n {
                    local[c * n + a] += jw * fv[c] * basis.values[a];
                }
            }
        }
    })
}

/// `∫ f·Φᵢ + Σ_c g_c·∇φ` where `Φᵢ = φ e_c` and `(f, g) = h(x)`: the
/// right-hand side of projections defined by first-order bilinear forms.
pub fn load_vector_h1<F>(space: &FeSpace, degree: usize, h: F) -> Vec<f64>
where
    F: Fn([f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) + Sync + Send,
{
    let mesh = space.mesh().clone();
    let q = rule(degree);
    let bubble = space.kind().has_bubble();
    let ncomp = space.components();
    let n = if bubble { 4 } else { 3 };
    assemble_vector(space, |t, local| {
        let geom = mesh.geometry(t);
        for (p, w) in q.iter() {
            let (f, g) = h(mesh.map_point(t, *p));
            let basis = LocalBasis::eval(*p, &geom.grad_lambda, bubble);
            let jw = 2.0 * geom.area * w;
            for c in 0..ncomp {
                for a in 0..n {
                    let gr = basis.grads[a];
                    local[c * n + a] += jw * (f[c] * basis.values[a] + g[c][0] * gr[0] + g[c][1] * gr[1]);
                }
            }
        }
    })
}
