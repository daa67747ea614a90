//! Quadrature on the reference triangle `(0,0), (1,0), (0,1)`.
//!
//! Points are stored in barycentric coordinates `(λ1, λ2, λ3)` with
//! `λ2 = ξ`, `λ3 = η`; weights are in reference-measure units and sum to 1/2.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("no triangle quadrature of degree {0} (supported: 1..=20)")]
pub struct UnsupportedDegree(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Integrates `f(bary)` over a physical triangle of the given area.
    pub fn integrate<F: FnMut([f64; 3]) -> f64>(&self, area: f64, mut f: F) -> f64 {
        let mut acc = 0.0;
        for (p, w) in self.iter() {
            acc += w * f(*p);
        }
        2.0 * area * acc
    }

    /// Conical (collapsed) product rule: Gauss-Jacobi in the collapsed
    /// direction, Gauss-Legendre in the other. Exact for total degree `degree`.
    pub fn conical(degree: usize) -> Self {
        let n = degree / 2 + 1;
        let (tj, wj) = gauss_jacobi_10(n);
        let (tl, wl) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (t, a) in tj.iter().zip(&wj) {
            let u = 0.5 * (1.0 + t);
            for (s, b) in tl.iter().zip(&wl) {
                let v = 0.5 * (1.0 + s);
                let (xi, eta) = (u, (1.0 - u) * v);
                points.push([1.0 - xi - eta, xi, eta]);
                // (1/4) from the Jacobi map, (1/2) from the Legendre map
                weights.push(a * b / 8.0);
            }
        }
        QuadratureRule { degree, points, weights }
    }

    fn symmetric(degree: usize, orbits: &[(f64, f64)], centroid: Option<f64>) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if let Some(w) = centroid {
            points.push([1.0 / 3.0; 3]);
            weights.push(0.5 * w);
        }
        for &(a, w) in orbits {
            let b = 1.0 - 2.0 * a;
            for p in [[b, a, a], [a, b, a], [a, a, b]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        QuadratureRule { degree, points, weights }
    }
}

/// Rule exact for polynomials of total degree `degree`.
///
/// Degrees 1, 2, 3 and 5 use the classical symmetric rules (centroid,
/// three-point, four-point and seven-point); others use [`QuadratureRule::conical`].
pub fn triangle_quadrature(degree: usize) -> Result<QuadratureRule, UnsupportedDegree> {
    let rule = match degree {
        1 => QuadratureRule::symmetric(1, &[], Some(1.0)),
        2 => QuadratureRule::symmetric(2, &[(1.0 / 6.0, 1.0 / 3.0)], None),
        3 => QuadratureRule::symmetric(3, &[(0.2, 25.0 / 48.0)], Some(-27.0 / 48.0)),
        5 => {
            let s = 15f64.sqrt();
            QuadratureRule::symmetric(
                5,
                &[((6.0 - s) / 21.0, (155.0 - s) / 1200.0), ((6.0 + s) / 21.0, (155.0 + s) / 1200.0)],
                Some(9.0 / 40.0),
            )
        }
        4 | 6..=20 => QuadratureRule::conical(degree),
        d => return Err(UnsupportedDegree(d)),
    };
    Ok(rule)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Gauss-Jacobi nodes and weights on [-1, 1] for the weight `(1 - t)`.
fn gauss_jacobi_10(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (alf, bet) = (1.0f64, 0.0f64);
    let ab = alf + bet;
    // returns (P_n, P_{n-1}, P_n') at z
    let eval = |z: f64| {
        let mut p1 = 0.5 * (alf - bet + (2.0 + ab) * z);
        let mut p2 = 1.0;
        let mut temp = 2.0 + ab;
        for j in 2..=n {
            let jf = j as f64;
            let p3 = p2;
            p2 = p1;
            temp = 2.0 * jf + ab;
            let a = 2.0 * jf * (jf + ab) * (temp - 2.0);
            let b = (temp - 1.0) * (alf * alf - bet * bet + temp * (temp - 2.0) * z);
            let c = 2.0 * (jf - 1.0 + alf) * (jf - 1.0 + bet) * temp;
            p1 = (b * p2 - c * p3) / a;
        }
        let nf = n as f64;
        if n == 1 {
            temp = 2.0 + ab;
        }
        let pp = (nf * (alf - bet - temp * z) * p1 + 2.0 * (nf + alf) * (nf + bet) * p2) / (temp * (1.0 - z * z));
        (p1, p2, pp, temp)
    };
    // bracket sign changes on a fine grid, then polish with bisection + Newton
    let samples = 400 * n;
    let mut roots = Vec::with_capacity(n);
    let mut prev_t = -1.0 + 1e-14;
    let mut prev_v = eval(prev_t).0;
    for k in 1..=samples {
        let t = -1.0 + 2.0 * k as f64 / samples as f64 - if k == samples { 1e-14 } else { 0.0 };
        let v = eval(t).0;
        if prev_v == 0.0 || prev_v.signum() != v.signum() {
            let (mut lo, mut hi) = (prev_t, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if eval(mid).0.signum() == eval(lo).0.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            for _ in 0..3 {
                let (p, _, pp, _) = eval(z);
                let next = z - p / pp;
                if next > lo && next < hi {
                    z = next;
                }
            }
            roots.push(z);
        }
        prev_t = t;
        prev_v = v;
    }
    assert_eq!(roots.len(), n, "Gauss-Jacobi root bracketing failed");
    let nf = n as f64;
    let weights = roots
        .iter()
        .map(|&z| {
            let (_, p2, pp, temp) = eval(z);
            // Γ(n+α)Γ(n+β) / (Γ(n+1)Γ(n+α+β+1)) = 1 / (n (n+1)) for α = 1, β = 0
            temp * 2f64.powf(ab) / (nf * (nf + 1.0) * pp * p2)
        })
        .collect();
    (roots, weights)
}
