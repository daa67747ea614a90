//! Manufactured solution on the unit square with every coefficient 1 and
//! `∇φ = 0`, its residual forcings, and error norms.
//!
//! With `E = e^{−t}` and `a = 2π`:
//! `n = E(cos ax + cos ay + 3)`, `w = E(cos ay − cos ax + 6)`,
//! `c = E(sin ay + cos ax − ay + 9)`, `s = ∇c`,
//! `u = E(sin ay (cos ax − 1), sin ax (1 − cos ay))`, `π = E(sin ay + cos ax)`.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::assembly::{rule, FieldFunction, DEFAULT_DEGREE};
use crate::fespace::{FeSpace, SpaceError};
use crate::fields::{FnScalar, FnVector};
use crate::par;
use crate::scheme::{Forcing, InitialData};

#[derive(Debug, Error, PartialEq)]
pub enum MmsError {
    #[error("no error samples to accumulate")]
    Empty,
    #[error("need at least two matching errors and resolutions (got {errors} and {resolutions})")]
    Length { errors: usize, resolutions: usize },
    #[error("resolutions must be strictly decreasing")]
    Resolutions,
    #[error("order undefined: zero or non-finite error at row {0}")]
    UndefinedOrder(usize),
}

const A: f64 = 2.0 * PI;

/// Value and gradient of a scalar.
pub type Scalar1 = (f64, [f64; 2]);
/// Value and Jacobian (`j[i][k] = ∂ₖvᵢ`) of a vector.
pub type Vector1 = ([f64; 2], [[f64; 2]; 2]);

/// All exact fields at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactValues {
    pub n: f64,
    pub w: f64,
    pub c: f64,
    pub s: [f64; 2],
    pub u: [f64; 2],
    pub pi: f64,
}

/// All forcings at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForcingValues {
    pub n: f64,
    pub w: f64,
    pub c: f64,
    pub s: [f64; 2],
    pub u: [f64; 2],
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ManufacturedSolution;

struct Trig {
    e: f64,
    c1: f64,
    s1: f64,
    c2: f64,
    s2: f64,
}

fn trig(t: f64, p: [f64; 2]) -> Trig {
    let (s1, c1) = (A * p[0]).sin_cos();
    let (s2, c2) = (A * p[1]).sin_cos();
    Trig { e: (-t).exp(), c1, s1, c2, s2 }
}

impl ManufacturedSolution {
    pub fn n(&self, t: f64, p: [f64; 2]) -> Scalar1 {
        let q = trig(t, p);
        (q.e * (q.c1 + q.c2 + 3.0), [-A * q.e * q.s1, -A * q.e * q.s2])
    }

    pub fn w(&self, t: f64, p: [f64; 2]) -> Scalar1 {
        let q = trig(t, p);
        (q.e * (q.c2 - q.c1 + 6.0), [A * q.e * q.s1, -A * q.e * q.s2])
    }

    pub fn c(&self, t: f64, p: [f64; 2]) -> Scalar1 {
        let q = trig(t, p);
        (q.e * (q.s2 + q.c1 - A * p[1] + 9.0), self.s(t, p).0)
    }

    pub fn s(&self, t: f64, p: [f64; 2]) -> Vector1 {
        let q = trig(t, p);
        let a2 = A * A * q.e;
        ([-A * q.e * q.s1, A * q.e * (q.c2 - 1.0)], [[-a2 * q.c1, 0.0], [0.0, -a2 * q.s2]])
    }

    pub fn u(&self, t: f64, p: [f64; 2]) -> Vector1 {
        let q = trig(t, p);
        let ae = A * q.e;
        (
            [q.e * q.s2 * (q.c1 - 1.0), q.e * q.s1 * (1.0 - q.c2)],
            [[-ae * q.s2 * q.s1, ae * q.c2 * (q.c1 - 1.0)], [ae * q.c1 * (1.0 - q.c2), ae * q.s1 * q.s2]],
        )
    }

    pub fn pi(&self, t: f64, p: [f64; 2]) -> Scalar1 {
        let q = trig(t, p);
        (q.e * (q.s2 + q.c1), [-A * q.e * q.s1, A * q.e * q.c2])
    }

    pub fn exact_fields(&self, t: f64, p: [f64; 2]) -> ExactValues {
        ExactValues {
            n: self.n(t, p).0,
            w: self.w(t, p).0,
            c: self.c(t, p).0,
            s: self.s(t, p).0,
            u: self.u(t, p).0,
            pi: self.pi(t, p).0,
        }
    }

    /// Residuals of the exact fields in the model with unit coefficients.
    pub fn forcing_at(&self, t: f64, p: [f64; 2]) -> ForcingValues {
        let q = trig(t, p);
        let a2e = A * A * q.e;
        let (n, gn) = self.n(t, p);
        let (w, gw) = self.w(t, p);
        let (c, _) = self.c(t, p);
        let (s, js) = self.s(t, p);
        let (u, ju) = self.u(t, p);
        let (_, gpi) = self.pi(t, p);
        let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
        let lap_n = -a2e * (q.c1 + q.c2);
        let lap_w = -a2e * (q.c2 - q.c1);
        let div_s = js[0][0] + js[1][1];
        let lap_c = div_s;
        let reaction = 1.0 - n - w;

        let f_n = -n + dot(u, gn) - lap_n + dot(gn, s) + n * div_s - n * reaction;
        let f_w = -w + dot(u, gw) - lap_w + dot(gw, s) + w * div_s - w * reaction;
        let f_c = -c + dot(u, s) - lap_c + (n + w) * c;

        // ∇(u·∇c) = J_uᵀ s + H_c u, with H_c = J_s (symmetric here)
        let grad_adv = [
            ju[0][0] * s[0] + ju[1][0] * s[1] + js[0][0] * u[0] + js[0][1] * u[1],
            ju[0][1] * s[0] + ju[1][1] * s[1] + js[1][0] * u[0] + js[1][1] * u[1],
        ];
        let a3e = A * a2e;
        let grad_lap_c = [a3e * q.s1, -a3e * q.c2];
        let f_s = [
            -s[0] + grad_adv[0] - grad_lap_c[0] + (gn[0] + gw[0]) * c + (n + w) * s[0],
            -s[1] + grad_adv[1] - grad_lap_c[1] + (gn[1] + gw[1]) * c + (n + w) * s[1],
        ];

        let lap_u = [-a2e * q.s2 * (2.0 * q.c1 - 1.0), a2e * q.s1 * (2.0 * q.c2 - 1.0)];
        let conv = [u[0] * ju[0][0] + u[1] * ju[0][1], u[0] * ju[1][0] + u[1] * ju[1][1]];
        let f_u = [-u[0] + conv[0] - lap_u[0] - gpi[0], -u[1] + conv[1] - lap_u[1] - gpi[1]];

        ForcingValues { n: f_n, w: f_w, c: f_c, s: f_s, u: f_u }
    }

    /// Exact data at `t = 0` for initialization by projections.
    pub fn initial_data(&self) -> InitialData {
        let m = *self;
        InitialData {
            n: Arc::new(FnScalar { value: move |p| m.n(0.0, p).0, gradient: move |p| m.n(0.0, p).1 }),
            w: Arc::new(FnScalar { value: move |p| m.w(0.0, p).0, gradient: move |p| m.w(0.0, p).1 }),
            c: Arc::new(FnScalar { value: move |p| m.c(0.0, p).0, gradient: move |p| m.c(0.0, p).1 }),
            s: Arc::new(FnVector { value: move |p| m.s(0.0, p).0, jacobian: move |p| m.s(0.0, p).1 }),
            u: Arc::new(FnVector { value: move |p| m.u(0.0, p).0, jacobian: move |p| m.u(0.0, p).1 }),
            pi: Some(Arc::new(FnScalar { value: move |p| m.pi(0.0, p).0, gradient: move |p| m.pi(0.0, p).1 })),
        }
    }
}

impl Forcing for ManufacturedSolution {
    fn n(&self, t: f64, p: [f64; 2]) -> f64 {
        self.forcing_at(t, p).n
    }
    fn w(&self, t: f64, p: [f64; 2]) -> f64 {
        self.forcing_at(t, p).w
    }
    fn c(&self, t: f64, p: [f64; 2]) -> f64 {
        self.forcing_at(t, p).c
    }
    fn s(&self, t: f64, p: [f64; 2]) -> [f64; 2] {
        self.forcing_at(t, p).s
    }
    fn u(&self, t: f64, p: [f64; 2]) -> [f64; 2] {
        self.forcing_at(t, p).u
    }
}

/// `(‖e‖_{L²}, |e|_{H¹})` for one component of a discrete field against an
/// exact value-and-gradient, by degree-5 quadrature.
pub fn spatial_errors<F>(space: &FeSpace, coeffs: &[f64], component: usize, exact: F) -> Result<(f64, f64), SpaceError>
where
    F: Fn([f64; 2]) -> Scalar1 + Sync,
{
    let f = FieldFunction::new(space, coeffs)?;
    if component >= space.components() {
        return Err(SpaceError::Kind { expected: "a space with that component", got: space.kind() });
    }
    let mesh = space.mesh();
    let q = rule(DEFAULT_DEGREE);
    let parts = par::map_indexed(mesh.num_triangles(), |t| {
        let geom = mesh.geometry(t);
        let (mut l2, mut h1) = (0.0, 0.0);
        for (b, w) in q.iter() {
            let (v, g) = exact(mesh.map_point(t, *b));
            let (vh, gh) = if space.components() == 1 {
                (f.scalar_at(t, *b, geom), f.scalar_grad_at(t, *b, geom))
            } else {
                (f.vector_at(t, *b, geom)[component], f.vector_grad_at(t, *b, geom)[component])
            };
            let jw = 2.0 * geom.area * w;
            l2 += jw * (v - vh).powi(2);
            h1 += jw * ((g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2));
        }
        (l2, h1)
    });
    let (l2, h1) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Time-accumulated norms of one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccumulatedNorms {
    pub linf_l2: f64,
    pub l2_h1: f64,
    pub linf_h1: f64,
}

/// Running accumulation of per-step spatial errors at `t_m`, `m ≥ 1`.
#[derive(Clone, Debug)]
pub struct NormAccumulator {
    dt: f64,
    steps: usize,
    linf_l2: f64,
    sum_h1_sq: f64,
    linf_h1: f64,
}

impl NormAccumulator {
    pub fn new(dt: f64) -> Self {
        NormAccumulator { dt, steps: 0, linf_l2: 0.0, sum_h1_sq: 0.0, linf_h1: 0.0 }
    }

    pub fn push(&mut self, l2: f64, h1_semi: f64) {
        let full = l2 * l2 + h1_semi * h1_semi;
        self.steps += 1;
        self.linf_l2 = self.linf_l2.max(l2);
        self.sum_h1_sq += full;
        self.linf_h1 = self.linf_h1.max(full.sqrt());
    }

    pub fn finish(&self) -> Result<AccumulatedNorms, MmsError> {
        if self.steps == 0 {
            return Err(MmsError::Empty);
        }
        Ok(AccumulatedNorms { linf_l2: self.linf_l2, l2_h1: (self.dt * self.sum_h1_sq).sqrt(), linf_h1: self.linf_h1 })
    }
}

/// `l∞(L²)`, `l²(H¹)` and `l∞(H¹)` of per-step `(L², H¹-seminorm)` errors.
pub fn accumulate_norms(errors: &[(f64, f64)], dt: f64) -> Result<AccumulatedNorms, MmsError> {
    let mut acc = NormAccumulator::new(dt);
    for &(l2, h1) in errors {
        acc.push(l2, h1);
    }
    acc.finish()
}

/// `log(eᵢ/eᵢ₊₁) / log(hᵢ/hᵢ₊₁)` for consecutive rows.
pub fn convergence_orders(errors: &[f64], resolutions: &[f64]) -> Result<Vec<f64>, MmsError> {
    if errors.len() != resolutions.len() || errors.len() < 2 {
        return Err(MmsError::Length { errors: errors.len(), resolutions: resolutions.len() });
    }
    if resolutions.windows(2).any(|w| !(w[1] < w[0]) || !(w[1] > 0.0)) {
        return Err(MmsError::Resolutions);
    }
    if let Some(i) = errors.iter().position(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(MmsError::UndefinedOrder(i));
    }
    Ok(errors
        .windows(2)
        .zip(resolutions.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::SpaceKind;
    use crate::mesh::Mesh;

    const MS: ManufacturedSolution = ManufacturedSolution;

    #[test]
    fn values_at_origin() {
        let v = MS.exact_fields(0.0, [0.0, 0.0]);
        assert_eq!((v.n, v.w, v.c), (5.0, 6.0, 10.0));
        assert_eq!(v.s, [0.0, 0.0]);
    }

    #[test]
    fn boundary_conditions() {
        for k in 0..=40 {
            let r = k as f64 / 40.0;
            for p in [[r, 0.0], [r, 1.0], [0.0, r], [1.0, r]] {
                let t = 0.37 * k as f64;
                let u = MS.u(t, p).0;
                assert!(u[0].abs() < 1e-12 && u[1].abs() < 1e-12);
                let s = MS.s(t, p).0;
                let vertical = p[0] == 0.0 || p[0] == 1.0;
                let normal = if vertical { s[0] } else { s[1] };
                assert!(normal.abs() < 1e-12, "{p:?}: {s:?}");
            }
        }
    }

    #[test]
    fn forcings_decay() {
        let f = MS.forcing_at(40.0, [0.3, 0.6]);
        for v in [f.n, f.w, f.c, f.s[0], f.s[1], f.u[0], f.u[1]] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn spatial_error_examples() {
        let mesh = Arc::new(Mesh::unit_square(16, 16).unwrap());
        let p1 = FeSpace::new(mesh, SpaceKind::ScalarP1);
        let zero = vec![0.0; p1.dof_count()];
        let (l2, _) = spatial_errors(&p1, &zero, 0, |p| MS.n(0.0, p)).unwrap();
        // degree-5 quadrature of the squared trig field on a 16x16 grid
        assert!((l2 - 10f64.sqrt()).abs() < 1e-4, "{l2}");
        let three = vec![3.0; p1.dof_count()];
        let (l2, h1) = spatial_errors(&p1, &three, 0, |_| (3.0, [0.0, 0.0])).unwrap();
        assert!(l2 < 1e-13 && h1 < 1e-13);
    }

    #[test]
    fn accumulation() {
        let n = accumulate_norms(&[(0.5, 0.0)], 0.1).unwrap();
        assert_eq!(n.linf_l2, 0.5);
        let e = 0.3;
        let steps = vec![(0.0, e); 40];
        let n = accumulate_norms(&steps, 0.05).unwrap();
        assert!((n.l2_h1 - e * 2f64.sqrt()).abs() < 1e-14);
        let dec = accumulate_norms(&[(3.0, 1.0), (2.0, 1.0), (1.0, 1.0)], 1.0).unwrap();
        assert_eq!(dec.linf_l2, 3.0);
        assert_eq!(accumulate_norms(&[], 1.0), Err(MmsError::Empty));
    }

    #[test]
    fn orders() {
        let o = convergence_orders(&[5.677008e-2, 2.227926e-2], &[0.1, 1.0 / 16.0]).unwrap();
        assert!((o[0] - 1.9901).abs() < 5e-3, "{o:?}");
        let o = convergence_orders(&[1.0, 0.5, 0.25], &[0.2, 0.1, 0.05]).unwrap();
        assert!(o.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let o = convergence_orders(&[1.0, 0.25], &[0.2, 0.1]).unwrap();
        assert!((o[0] - 2.0).abs() < 1e-14);
        assert_eq!(convergence_orders(&[1.0, 0.0], &[0.2, 0.1]), Err(MmsError::UndefinedOrder(1)));
        assert!(convergence_orders(&[1.0], &[0.2]).is_err());
        assert_eq!(convergence_orders(&[1.0, 0.5], &[0.1, 0.2]), Err(MmsError::Resolutions));
    }
}
