//! Continuous fields with first derivatives, used for initial data,
//! projections and error measurement.

use std::sync::Arc;

pub trait ScalarField: Send + Sync {
    fn value(&self, p: [f64; 2]) -> f64;
    fn gradient(&self, p: [f64; 2]) -> [f64; 2];
}

pub trait VectorField: Send + Sync {
    fn value(&self, p: [f64; 2]) -> [f64; 2];
    /// `jacobian[i][j] = ∂ⱼ vᵢ`.
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2];

    fn divergence(&self, p: [f64; 2]) -> f64 {
        let j = self.jacobian(p);
        j[0][0] + j[1][1]
    }

    /// `∂ₓv₂ − ∂ᵧv₁`.
    fn rot(&self, p: [f64; 2]) -> f64 {
        let j = self.jacobian(p);
        j[1][0] - j[0][1]
    }
}

/// Scalar field from closures for the value and the gradient.
pub struct FnScalar<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> ScalarField for FnScalar<F, G>
where
    F: Fn([f64; 2]) -> f64 + Send + Sync,
    G: Fn([f64; 2]) -> [f64; 2] + Send + Sync,
{
    fn value(&self, p: [f64; 2]) -> f64 {
        (self.value)(p)
    }
    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        (self.gradient)(p)
    }
}

/// Vector field from closures for the value and the Jacobian.
pub struct FnVector<F, G> {
    pub value: F,
    pub jacobian: G,
}

impl<F, G> VectorField for FnVector<F, G>
where
    F: Fn([f64; 2]) -> [f64; 2] + Send + Sync,
    G: Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync,
{
    fn value(&self, p: [f64; 2]) -> [f64; 2] {
        (self.value)(p)
    }
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        (self.jacobian)(p)
    }
}

/// Step for central differences on fields without closed-form derivatives.
pub const FD_STEP: f64 = 1e-6;

/// Scalar field whose gradient is taken by central differences.
pub struct FdScalar<F>(pub F);

impl<F: Fn([f64; 2]) -> f64 + Send + Sync> ScalarField for FdScalar<F> {
    fn value(&self, p: [f64; 2]) -> f64 {
        (self.0)(p)
    }
    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let h = FD_STEP;
        [
            ((self.0)([p[0] + h, p[1]]) - (self.0)([p[0] - h, p[1]])) / (2.0 * h),
            ((self.0)([p[0], p[1] + h]) - (self.0)([p[0], p[1] - h])) / (2.0 * h),
        ]
    }
}

/// Vector field whose Jacobian is taken by central differences.
pub struct FdVector<F>(pub F);

impl<F: Fn([f64; 2]) -> [f64; 2] + Send + Sync> VectorField for FdVector<F> {
    fn value(&self, p: [f64; 2]) -> [f64; 2] {
        (self.0)(p)
    }
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let h = FD_STEP;
        let (xp, xm) = ((self.0)([p[0] + h, p[1]]), (self.0)([p[0] - h, p[1]]));
        let (yp, ym) = ((self.0)([p[0], p[1] + h]), (self.0)([p[0], p[1] - h]));
        let d = |a: f64, b: f64| (a - b) / (2.0 * h);
        [[d(xp[0], xm[0]), d(yp[0], ym[0])], [d(xp[1], xm[1]), d(yp[1], ym[1])]]
    }
}

/// Step for differencing a gradient that may itself be a difference
/// quotient; larger than [`FD_STEP`] to keep rounding noise down.
pub const HESSIAN_STEP: f64 = 1e-4;

/// Gradient of a scalar field as a vector field; the Jacobian (Hessian of
/// the scalar) is taken by central differences of the gradient.
pub struct GradientOf(pub Arc<dyn ScalarField>);

impl VectorField for GradientOf {
    fn value(&self, p: [f64; 2]) -> [f64; 2] {
        self.0.gradient(p)
    }
    fn jacobian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let h = HESSIAN_STEP;
        let (xp, xm) = (self.0.gradient([p[0] + h, p[1]]), self.0.gradient([p[0] - h, p[1]]));
        let (yp, ym) = (self.0.gradient([p[0], p[1] + h]), self.0.gradient([p[0], p[1] - h]));
        let d = |a: f64, b: f64| (a - b) / (2.0 * h);
        [[d(xp[0], xm[0]), d(yp[0], ym[0])], [d(xp[1], xm[1]), d(yp[1], ym[1])]]
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantScalar(pub f64);

impl ScalarField for ConstantScalar {
    fn value(&self, _: [f64; 2]) -> f64 {
        self.0
    }
    fn gradient(&self, _: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantVector(pub [f64; 2]);

impl VectorField for ConstantVector {
    fn value(&self, _: [f64; 2]) -> [f64; 2] {
        self.0
    }
    fn jacobian(&self, _: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_difference_adaptors() {
        let f = FdScalar(|p: [f64; 2]| p[0] * p[0] + 3.0 * p[1]);
        let g = f.gradient([0.5, 0.2]);
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);

        let v = FdVector(|p: [f64; 2]| [-p[1], p[0]]);
        assert!(v.divergence([0.3, 0.7]).abs() < 1e-9);
        assert!((v.rot([0.3, 0.7]) - 2.0).abs() < 1e-9);

        let grad = GradientOf(Arc::new(FnScalar { value: |p: [f64; 2]| p[0] * p[1], gradient: |p: [f64; 2]| [p[1], p[0]] }));
        assert_eq!(grad.value([2.0, 3.0]), [3.0, 2.0]);
        assert!(grad.rot([0.1, 0.9]).abs() < 1e-9);
        assert!((grad.jacobian([0.1, 0.9])[0][1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constants() {
        assert_eq!(ConstantScalar(2.0).gradient([1.0, 1.0]), [0.0, 0.0]);
        assert_eq!(ConstantVector([1.0, 2.0]).divergence([0.0, 0.0]), 0.0);
    }
}
