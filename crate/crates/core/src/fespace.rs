//! Discrete function spaces over a [`Mesh`].
//!
//! Vector spaces are blocked by component: all DOFs of the first component
//! come first. Within a MINI component block, vertex DOFs precede the
//! per-element bubble DOFs.

use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{Mesh, SideSet};

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("coefficient vector has length {got}, space has {expected} DOFs")]
    Length { expected: usize, got: usize },
    #[error("triangle {0} out of range")]
    Triangle(usize),
    #[error("expected a {expected} space, got {got:?}")]
    Kind { expected: &'static str, got: SpaceKind },
    #[error("spaces are defined on different meshes")]
    MeshMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Continuous P1, no constraints (densities and chemical).
    ScalarP1,
    /// One component of the MINI velocity: P1 plus a cubic bubble per element.
    ScalarP1Bubble,
    /// P1 vector field with `s·ν = 0` imposed nodally on the boundary.
    VectorP1NormalTrace,
    /// P1-bubble vector field vanishing on the boundary.
    MiniVelocity,
    /// P1 pressure with zero mean.
    PressureP1MeanZero,
}

impl SpaceKind {
    pub fn components(self) -> usize {
        match self {
            SpaceKind::VectorP1NormalTrace | SpaceKind::MiniVelocity => 2,
            _ => 1,
        }
    }

    pub fn has_bubble(self) -> bool {
        matches!(self, SpaceKind::ScalarP1Bubble | SpaceKind::MiniVelocity)
    }

    /// Local basis functions per component.
    pub fn local_scalar_dofs(self) -> usize {
        if self.has_bubble() {
            4
        } else {
            3
        }
    }
}

/// A DOF pinned to a value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint {
    pub dof: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldValue {
    Scalar(f64),
    Vector([f64; 2]),
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldGradient {
    Scalar([f64; 2]),
    /// Row `c` is the gradient of component `c`.
    Vector([[f64; 2]; 2]),
}

/// Values and gradients of the local scalar basis at one point.
#[derive(Clone, Copy, Debug)]
pub struct LocalBasis {
    pub n: usize,
    pub values: [f64; 4],
    pub grads: [[f64; 2]; 4],
}

impl LocalBasis {
    pub fn eval(bary: [f64; 3], grad_lambda: &[[f64; 2]; 3], bubble: bool) -> Self {
        let mut values = [bary[0], bary[1], bary[2], 0.0];
        let mut grads = [grad_lambda[0], grad_lambda[1], grad_lambda[2], [0.0; 2]];
        if bubble {
            values[3] = 27.0 * bary[0] * bary[1] * bary[2];
            let c = [27.0 * bary[1] * bary[2], 27.0 * bary[0] * bary[2], 27.0 * bary[0] * bary[1]];
            grads[3] = [
                c[0] * grad_lambda[0][0] + c[1] * grad_lambda[1][0] + c[2] * grad_lambda[2][0],
                c[0] * grad_lambda[0][1] + c[1] * grad_lambda[1][1] + c[2] * grad_lambda[2][1],
            ];
        }
        LocalBasis { n: if bubble { 4 } else { 3 }, values, grads }
    }
}

#[derive(Clone, Debug)]
pub struct FeSpace {
    kind: SpaceKind,
    mesh: Arc<Mesh>,
    dof_count: usize,
    local_dofs: Vec<usize>,
    stride: usize,
    constraints: Vec<Constraint>,
    mean_functional: Option<Vec<f64>>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, kind: SpaceKind) -> Self {
        let nv = mesh.num_vertices();
        let nt = mesh.num_triangles();
        let scalar_block = if kind.has_bubble() { nv + nt } else { nv };
        let ncomp = kind.components();
        let per_comp = kind.local_scalar_dofs();
        let stride = per_comp * ncomp;
        let mut local_dofs = Vec::with_capacity(stride * nt);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for c in 0..ncomp {
                let off = c * scalar_block;
                local_dofs.extend(tri.iter().map(|&v| off + v));
                if kind.has_bubble() {
                    local_dofs.push(off + nv + t);
                }
            }
        }

        let mut constraints = Vec::new();
        match kind {
            SpaceKind::MiniVelocity => {
                for c in 0..2 {
                    for v in (0..nv).filter(|&v| mesh.is_boundary_vertex(v)) {
                        constraints.push(Constraint { dof: c * scalar_block + v, value: 0.0 });
                    }
                }
            }
            SpaceKind::VectorP1NormalTrace => {
                // ν is (±1, 0) on vertical sides and (0, ±1) on horizontal ones
                let sides: Vec<SideSet> = (0..nv).map(|v| mesh.vertex_sides(v)).collect();
                for (v, s) in sides.iter().enumerate() {
                    if s.has_vertical() {
                        constraints.push(Constraint { dof: v, value: 0.0 });
                    }
                }
                for (v, s) in sides.iter().enumerate() {
                    if s.has_horizontal() {
                        constraints.push(Constraint { dof: nv + v, value: 0.0 });
                    }
                }
            }
            _ => {}
        }

        let mean_functional = (kind == SpaceKind::PressureP1MeanZero).then(|| {
            let mut m = vec![0.0; nv];
            for (t, tri) in mesh.triangles().iter().enumerate() {
                let a3 = mesh.geometry(t).area / 3.0;
                for &v in tri {
                    m[v] += a3;
                }
            }
            m
        });

        FeSpace { kind, mesh, dof_count: ncomp * scalar_block, local_dofs, stride, constraints, mean_functional }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    /// DOFs per component.
    pub fn component_block(&self) -> usize {
        self.dof_count / self.components()
    }

    /// Local-to-global DOF table of triangle `t`: per component, the three
    /// vertex DOFs followed by the bubble DOF when present.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.local_dofs[t * self.stride..(t + 1) * self.stride]
    }

    pub fn local_dof_count(&self) -> usize {
        self.stride
    }

    /// Dirichlet-type constraints (all with value zero for the built-in kinds).
    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// `∫ψ_j` for the pressure space, the row of the mean-zero multiplier.
    pub fn mean_functional(&self) -> Option<&[f64]> {
        self.mean_functional.as_deref()
    }

    /// The single-component space sharing this space's scalar basis.
    pub fn component_space(&self) -> FeSpace {
        let kind = if self.kind.has_bubble() { SpaceKind::ScalarP1Bubble } else { SpaceKind::ScalarP1 };
        FeSpace::new(self.mesh.clone(), kind)
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    pub fn check_len(&self, coeffs: &[f64]) -> Result<(), SpaceError> {
        if coeffs.len() != self.dof_count {
            return Err(SpaceError::Length { expected: self.dof_count, got: coeffs.len() });
        }
        Ok(())
    }

    pub(crate) fn local_basis(&self, t: usize, bary: [f64; 3]) -> LocalBasis {
        LocalBasis::eval(bary, &self.mesh.geometry(t).grad_lambda, self.kind.has_bubble())
    }

    /// Value of the discrete field `coeffs` at barycentric point `bary` of `t`.
    pub fn eval_function(&self, coeffs: &[f64], t: usize, bary: [f64; 3]) -> Result<FieldValue, SpaceError> {
        self.check_len(coeffs)?;
        if t >= self.mesh.num_triangles() {
            return Err(SpaceError::Triangle(t));
        }
        let basis = self.local_basis(t, bary);
        let dofs = self.element_dofs(t);
        let comp = |c: usize| (0..basis.n).map(|a| coeffs[dofs[c * basis.n + a]] * basis.values[a]).sum::<f64>();
        Ok(match self.components() {
            1 => FieldValue::Scalar(comp(0)),
            _ => FieldValue::Vector([comp(0), comp(1)]),
        })
    }

    /// Gradient of the discrete field at `bary` in `t`.
    pub fn eval_gradient(&self, coeffs: &[f64], t: usize, bary: [f64; 3]) -> Result<FieldGradient, SpaceError> {
        self.check_len(coeffs)?;
        if t >= self.mesh.num_triangles() {
            return Err(SpaceError::Triangle(t));
        }
        let basis = self.local_basis(t, bary);
        let dofs = self.element_dofs(t);
        let comp = |c: usize| {
            let mut g = [0.0; 2];
            for a in 0..basis.n {
                let k = coeffs[dofs[c * basis.n + a]];
                g[0] += k * basis.grads[a][0];
                g[1] += k * basis.grads[a][1];
            }
            g
        };
        Ok(match self.components() {
            1 => FieldGradient::Scalar(comp(0)),
            _ => FieldGradient::Vector([comp(0), comp(1)]),
        })
    }

    /// Nodal interpolant: vertex DOFs take point values, bubbles are zero.
    pub fn interpolate<F: Fn([f64; 2]) -> [f64; 2]>(&self, f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_count];
        let block = self.component_block();
        for (v, &p) in self.mesh.vertices().iter().enumerate() {
            let val = f(p);
            for c in 0..self.components() {
                out[c * block + v] = val[c];
            }
        }
        out
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate_scalar<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        self.interpolate(|p| [f(p), 0.0])
    }
}

/// Builds one of the discrete spaces over `mesh`.
pub fn build_space(mesh: Arc<Mesh>, kind: SpaceKind) -> FeSpace {
    FeSpace::new(mesh, kind)
}

/// Gradient of one component at the quadrature point described by `basis`.
#[inline]
pub(crate) fn eval_component_grad(coeffs: &[f64], dofs: &[usize], basis: &LocalBasis) -> [f64; 2] {
    let mut g = [0.0; 2];
    for a in 0..basis.n {
        let k = coeffs[dofs[a]];
        g[0] += k * basis.grads[a][0];
        g[1] += k * basis.grads[a][1];
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::unit_square(n, n).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = grid(10);
        let p1 = FeSpace::new(m.clone(), SpaceKind::ScalarP1);
        assert_eq!(p1.dof_count(), 121);
        assert!(p1.constraints().is_empty());
        let mini = FeSpace::new(m.clone(), SpaceKind::MiniVelocity);
        assert_eq!(mini.dof_count(), 642);
        assert_eq!(mini.constraints().len(), 80);
        // bubble DOFs are never constrained
        assert!(mini.constraints().iter().all(|c| c.dof % 321 < 121));
        let s = FeSpace::new(m.clone(), SpaceKind::VectorP1NormalTrace);
        assert_eq!(s.dof_count(), 242);
        let p = FeSpace::new(m, SpaceKind::PressureP1MeanZero);
        assert_eq!(p.dof_count(), 121);
        let total: f64 = p.mean_functional().unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn normal_trace_corner_has_both_components() {
        let m = grid(4);
        let s = FeSpace::new(m.clone(), SpaceKind::VectorP1NormalTrace);
        let dofs: Vec<usize> = s.constraints().iter().map(|c| c.dof).collect();
        let nv = m.num_vertices();
        assert!(dofs.contains(&0) && dofs.contains(&nv));
        // bottom-edge midpoint vertex (2, 0): only the y-component
        assert!(!dofs.contains(&2) && dofs.contains(&(nv + 2)));
        // left-edge vertex (0, 2): only the x-component
        assert!(dofs.contains(&10) && !dofs.contains(&(nv + 10)));
        // 4 sides * 5 vertices, corners counted once per side
        assert_eq!(dofs.len(), 2 * 10);
    }

    #[test]
    fn normal_trace_holds_after_constraints() {
        let m = grid(5);
        let s = FeSpace::new(m.clone(), SpaceKind::VectorP1NormalTrace);
        let mut coeffs = s.interpolate(|p| [1.0 + p[0], 2.0 - p[1]]);
        for c in s.constraints() {
            coeffs[c.dof] = c.value;
        }
        let nv = m.num_vertices();
        for v in 0..nv {
            let sides = m.vertex_sides(v);
            if sides.has_vertical() {
                assert_eq!(coeffs[v], 0.0);
            }
            if sides.has_horizontal() {
                assert_eq!(coeffs[nv + v], 0.0);
            }
        }
    }

    #[test]
    fn constants_and_linears() {
        let m = grid(3);
        let p1 = FeSpace::new(m.clone(), SpaceKind::ScalarP1);
        let ones = vec![1.0; p1.dof_count()];
        let x = p1.interpolate_scalar(|p| p[0]);
        for t in 0..m.num_triangles() {
            let bary = [0.2, 0.3, 0.5];
            assert_eq!(p1.eval_function(&ones, t, bary).unwrap(), FieldValue::Scalar(1.0));
            let FieldValue::Scalar(v) = p1.eval_function(&x, t, bary).unwrap() else { panic!() };
            assert!((v - m.map_point(t, bary)[0]).abs() < 1e-15);
            let FieldGradient::Scalar(g) = p1.eval_gradient(&x, t, bary).unwrap() else { panic!() };
            assert!((g[0] - 1.0).abs() < 1e-13 && g[1].abs() < 1e-13);
            let FieldGradient::Scalar(g) = p1.eval_gradient(&ones, t, bary).unwrap() else { panic!() };
            assert!(g[0].abs() < 1e-13 && g[1].abs() < 1e-13);
        }
    }

    #[test]
    fn bubble_normalization_and_centroid_gradient() {
        let m = grid(2);
        let mini = FeSpace::new(m.clone(), SpaceKind::MiniVelocity);
        let mut coeffs = vec![0.0; mini.dof_count()];
        let t = 3;
        let b = mini.element_dofs(t)[3];
        coeffs[b] = 1.0;
        let c = [1.0 / 3.0; 3];
        let FieldValue::Vector(v) = mini.eval_function(&coeffs, t, c).unwrap() else { panic!() };
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1] == 0.0);
        let FieldGradient::Vector(g) = mini.eval_gradient(&coeffs, t, c).unwrap() else { panic!() };
        assert!(g[0][0].abs() < 1e-14 && g[0][1].abs() < 1e-14);
    }

    #[test]
    fn length_mismatch() {
        let p1 = FeSpace::new(grid(2), SpaceKind::ScalarP1);
        assert_eq!(p1.eval_function(&[1.0], 0, [1.0, 0.0, 0.0]), Err(SpaceError::Length { expected: 9, got: 1 }));
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_linear_reproduction(l1 in 0.0f64..1.0, l2 in 0.0f64..1.0, t in 0usize..32) {
            let (l1, l2) = if l1 + l2 > 1.0 { (1.0 - l1, 1.0 - l2) } else { (l1, l2) };
            let bary = [1.0 - l1 - l2, l1, l2];
            let m = grid(4);
            let p1 = FeSpace::new(m.clone(), SpaceKind::ScalarP1);
            let basis = p1.local_basis(t, bary);
            prop_assert!((basis.values[..3].iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let f = |p: [f64; 2]| 2.0 * p[0] - 3.0 * p[1] + 0.5;
            let c = p1.interpolate_scalar(f);
            let FieldValue::Scalar(v) = p1.eval_function(&c, t, bary).unwrap() else { unreachable!() };
            prop_assert!((v - f(m.map_point(t, bary))).abs() < 1e-13);
        }

        #[test]
        fn bubble_vanishes_on_edges(s in 0.0f64..1.0, edge in 0usize..3) {
            let mut bary = [0.0; 3];
            bary[(edge + 1) % 3] = s;
            bary[(edge + 2) % 3] = 1.0 - s;
            let g = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            let b = LocalBasis::eval(bary, &g, true);
            prop_assert!(b.values[3].abs() <= 1e-14);
        }
    }
}
