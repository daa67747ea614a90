//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Set `ACCEPTANCE_QUICK=1` to run only the property checks; the
//! convergence studies and the long competition runs then report `SKIP`.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chemofluid::assembly::{convection_matrix_b, element, rule, transport_matrix_a, FieldFunction};
use chemofluid::config::parse_config_str;
use chemofluid::fields::{FnScalar, FnVector};
use chemofluid::linsolve::SolveOptions;
use chemofluid::mesh::{ElementGeometry, Mesh};
use chemofluid::mms::{convergence_orders, ManufacturedSolution};
use chemofluid::scheme::{init_state, integral, InitialData, ModelParams, Spaces, State, Stepper};
use chemofluid::study::{
    competition_initial_data, run_convergence_study, run_simulation, ErrorReport, Norm, SimulationSetup, Variable,
};

type Outcome = Result<String, String>;

struct Suite {
    failures: usize,
    quick: bool,
}

impl Suite {
    fn check(&mut self, name: &str, run: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({detail}; {secs:.1} s)"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL {name}: {detail} ({secs:.1} s)");
            }
        }
    }

    fn slow(&mut self, name: &str, run: impl FnOnce() -> Outcome) {
        if self.quick {
            println!("SKIP {name}");
        } else {
            self.check(name, run);
        }
    }
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0, quick: std::env::var_os("ACCEPTANCE_QUICK").is_some() };
    suite.check("transport skew-symmetry, 20 random fields", skew_symmetry);
    suite.check("element integrals against a degree-10 oracle, 50 triangles", element_oracle);
    suite.check("zero state is a fixed point", zero_fixed_point);
    suite.check("mass conservation without reactions or flow", conservation);
    suite.check("discrete incompressibility after every step", incompressibility);
    suite.check("manufactured forcing against finite differences, 100 samples", forcing_oracle);
    suite.check("order from the reference errors at k = 10, 16", reference_order);
    suite.slow("spatial convergence, k = 10, 16, 22, 28", spatial_convergence);
    suite.slow("temporal convergence, h = 1/64, dt = 1/10 .. 1/16", temporal_convergence);
    suite.slow("competition a1 = 2, a2 = 0.3: w excludes n", || competition(2.0, 0.3, Expect::Exclusion { survivor: 'w' }));
    suite.slow("competition a1 = 0.25, a2 = 0.3: coexistence", || competition(0.25, 0.3, Expect::Coexistence));
    suite.slow("competition a1 = 0.25, a2 = 2: n excludes w", || competition(0.25, 2.0, Expect::Exclusion { survivor: 'n' }));
    if suite.failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

// ---------------------------------------------------------------- skewness

fn skew_symmetry() -> Outcome {
    let spaces = Spaces::new(Arc::new(Mesh::unit_square(7, 7).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u: Vec<f64> = (0..spaces.velocity.dof_count()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let uf = FieldFunction::new(&spaces.velocity, &u).map_err(|e| e.to_string())?;
        for m in [
            transport_matrix_a(&spaces.scalar, &uf).map_err(|e| e.to_string())?,
            convection_matrix_b(&spaces.velocity, &uf).map_err(|e| e.to_string())?,
        ] {
            let d = m.to_dense();
            let mut sym = 0.0f64;
            let mut big = 0.0f64;
            for i in 0..d.len() {
                for j in 0..d.len() {
                    sym = sym.max((d[i][j] + d[j][i]).abs());
                    big = big.max(d[i][j].abs());
                }
            }
            let ratio = sym / (1.0 + big);
            worst = worst.max(ratio);
            ensure(ratio <= 1e-12, || format!("max|A+Aᵀ| = {sym:e} with max|A| = {big:e}"))?;
        }
    }
    Ok(format!("worst max|A+Aᵀ|/(1+max|A|) = {worst:.1e}"))
}

// ---------------------------------------------------------- element oracle

/// Gauss-Legendre nodes and weights on [0, 1] by Newton iteration on the
/// Legendre polynomial.
fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 + x), 0.5 * w)
        })
        .collect()
}

/// Collapsed-square rule on a physical triangle, exact to total degree 10:
/// `(ξ, η) = (a, (1 − a) b)` with Jacobian `(1 − a)|det J|`.
struct Oracle {
    p: [[f64; 2]; 3],
    det: f64,
    /// Gradients of the barycentric coordinates.
    g: [[f64; 2]; 3],
    points: Vec<([f64; 3], f64)>,
}

impl Oracle {
    fn new(p: [[f64; 2]; 3]) -> Self {
        let j = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // rows of J⁻¹ are ∇ξ and ∇η
        let gxi = [j[1][1] / det, -j[0][1] / det];
        let geta = [-j[1][0] / det, j[0][0] / det];
        let g = [[-gxi[0] - geta[0], -gxi[1] - geta[1]], gxi, geta];
        let gl = gauss_legendre_01(6);
        let mut points = Vec::new();
        for &(a, wa) in &gl {
            for &(b, wb) in &gl {
                let (xi, eta) = (a, (1.0 - a) * b);
                points.push(([1.0 - xi - eta, xi, eta], wa * wb * (1.0 - a) * det.abs()));
            }
        }
        Oracle { p, det, g, points }
    }

    fn integrate(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        self.points.iter().map(|(l, w)| w * f(*l)).sum()
    }

    fn x(&self, l: [f64; 3]) -> [f64; 2] {
        let p = &self.p;
        [
            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
        ]
    }

    /// Value and gradient of local basis function `a` (3 is the cubic bubble).
    fn basis(&self, a: usize, l: [f64; 3]) -> (f64, [f64; 2]) {
        if a < 3 {
            return (l[a], self.g[a]);
        }
        let g = &self.g;
        let c = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
        (
            27.0 * l[0] * l[1] * l[2],
            [
                c[0] * g[0][0] + c[1] * g[1][0] + c[2] * g[2][0],
                c[0] * g[0][1] + c[1] * g[1][1] + c[2] * g[2][1],
            ],
        )
    }
}

fn relative_gap(got: &[f64], want: &[f64]) -> f64 {
    let gap = got.iter().zip(want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    gap / max_abs(want)
}

fn element_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let mut p: [[f64; 2]; 3] = std::array::from_fn(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
        let mut oracle = Oracle::new(p);
        if oracle.det < 0.0 {
            p.swap(1, 2);
            oracle = Oracle::new(p);
        }
        let Some(geom) = ElementGeometry::from_vertices(p).filter(|g| g.area > 0.05) else { continue };
        done += 1;
        let d = rng.random_range(0.5..5.0);
        let mut gaps = Vec::new();
        for bubble in [false, true] {
            let n = if bubble { 4 } else { 3 };
            let pairs = |f: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
                (0..n * n).map(|ij| f(ij / n, ij % n)).collect()
            };
            let mass = pairs(&|i, j| oracle.integrate(|l| oracle.basis(i, l).0 * oracle.basis(j, l).0));
            gaps.push(relative_gap(&element::mass(&geom, bubble), &mass));
            let stiff = pairs(&|i, j| {
                oracle.integrate(|l| {
                    let (gi, gj) = (oracle.basis(i, l).1, oracle.basis(j, l).1);
                    d * (gi[0] * gj[0] + gi[1] * gj[1])
                })
            });
            gaps.push(relative_gap(&element::stiffness(&geom, bubble, d), &stiff));

            // quadratic data times a (cubic) basis function stays within degree 5
            let f = |x: [f64; 2]| [1.0 + x[0] * x[1] - 0.5 * x[0] * x[0], 2.0 * x[1] * x[1] - x[0]];
            for ncomp in [1, 2] {
                let load: Vec<f64> = (0..ncomp * n)
                    .map(|k| oracle.integrate(|l| f(oracle.x(l))[k / n] * oracle.basis(k % n, l).0))
                    .collect();
                gaps.push(relative_gap(&element::load(p, &geom, bubble, ncomp, rule(5), f), &load));
            }
        }
        // vector P1: x-component basis functions first
        let div_rot = |k: usize, l: [f64; 3]| -> (f64, f64) {
            let g = oracle.basis(k % 3, l).1;
            if k < 3 {
                (g[0], -g[1])
            } else {
                (g[1], g[0])
            }
        };
        let dd: Vec<f64> = (0..36)
            .map(|ij| {
                oracle.integrate(|l| {
                    let (di, ri) = div_rot(ij / 6, l);
                    let (dj, rj) = div_rot(ij % 6, l);
                    d * (di * dj + ri * rj)
                })
            })
            .collect();
        gaps.push(relative_gap(&element::divdiv_rotrot(&geom, d), &dd));
        let g = gaps.iter().copied().fold(0.0, f64::max);
        worst = worst.max(g);
        ensure(g <= 1e-12, || format!("relative gap {g:e} on triangle {p:?}"))?;
    }
    Ok(format!("worst relative gap {worst:.1e}"))
}

// ------------------------------------------------------- step properties

fn smooth_scalar(a: f64, b: f64, k: f64) -> Arc<FnScalar<impl Fn([f64; 2]) -> f64, impl Fn([f64; 2]) -> [f64; 2]>> {
    Arc::new(FnScalar {
        value: move |p: [f64; 2]| a + b * (k * p[0]).cos() * (p[1] * p[1]),
        gradient: move |p: [f64; 2]| [-b * k * (k * p[0]).sin() * p[1] * p[1], 2.0 * b * (k * p[0]).cos() * p[1]],
    })
}

fn zero_fixed_point() -> Outcome {
    let spaces = Spaces::new(Arc::new(Mesh::unit_square(6, 6).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let opts = SolveOptions::default();
    for _ in 0..10 {
        let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
        let g = [r(-10.0, 10.0), r(-10.0, 10.0)];
        let params = ModelParams {
            chi1: r(0.0, 20.0),
            chi2: r(0.0, 20.0),
            dn: r(0.1, 10.0),
            dw: r(0.1, 10.0),
            dc: r(0.1, 10.0),
            du: r(0.1, 10.0),
            mu1: r(0.0, 2.0),
            mu2: r(0.0, 2.0),
            a1: r(0.0, 3.0),
            a2: r(0.0, 3.0),
            alpha: r(0.0, 10.0),
            beta: r(0.0, 10.0),
            gamma: r(0.0, 2.0),
            lambda: r(0.0, 2.0),
            k: r(0.0, 2.0),
            grad_phi: Arc::new(move |_| g),
        };
        let dt = r(1e-4, 1.0);
        let mut stepper = Stepper::new(&spaces, &params, &opts).map_err(|e| e.to_string())?;
        let mut state = State::zeros(&spaces);
        for _ in 0..3 {
            state = stepper.advance(&state, dt, None).map_err(|e| e.to_string())?;
            let worst = [&state.n, &state.w, &state.c, &state.s, &state.u, &state.pi].iter().map(|v| max_abs(v)).fold(0.0, f64::max);
            ensure(worst <= 1e-9, || format!("zero state moved to max |coefficient| {worst:e} ({params:?})"))?;
        }
    }
    Ok("10 random parameter sets, 3 steps each".into())
}

fn conservation() -> Outcome {
    let spaces = Spaces::new(Arc::new(Mesh::unit_square(10, 10).unwrap()));
    let params = ModelParams {
        chi1: 0.0,
        chi2: 0.0,
        mu1: 0.0,
        mu2: 0.0,
        alpha: 0.0,
        beta: 0.0,
        dn: 2.0,
        dw: 0.5,
        dc: 3.0,
        ..ModelParams::default()
    };
    let c0 = smooth_scalar(2.0, 1.0, 2.5);
    let initial = InitialData {
        n: smooth_scalar(1.0, 0.8, 3.0),
        w: smooth_scalar(0.5, -0.4, 5.0),
        c: c0.clone(),
        s: Arc::new(FnVector {
            value: move |p| chemofluid::fields::ScalarField::gradient(&*c0, p),
            jacobian: |p: [f64; 2]| {
                let (b, k) = (1.0, 2.5);
                let (s, c) = (k * p[0]).sin_cos();
                [[-b * k * k * c * p[1] * p[1], -2.0 * b * k * s * p[1]], [-2.0 * b * k * s * p[1], 2.0 * b * c]]
            },
        }),
        u: Arc::new(FnVector { value: |_| [0.0, 0.0], jacobian: |_| [[0.0; 2]; 2] }),
        pi: None,
    };
    let opts = SolveOptions::default();
    let mut state = init_state(&spaces, &params, &initial, &opts).map_err(|e| e.to_string())?;
    let mut stepper = Stepper::new(&spaces, &params, &opts).map_err(|e| e.to_string())?;
    let totals = |s: &State| -> Result<[f64; 3], String> {
        let i = |v: &[f64]| integral(&spaces.scalar, v).map_err(|e| e.to_string());
        Ok([i(&s.n)?, i(&s.w)?, i(&s.c)?])
    };
    let mut worst = 0.0f64;
    for dt in [1e-3, 0.1, 1.0] {
        for _ in 0..4 {
            let before = totals(&state)?;
            state = stepper.advance(&state, dt, None).map_err(|e| e.to_string())?;
            ensure(max_abs(&state.u) == 0.0, || "velocity left zero".into())?;
            let after = totals(&state)?;
            for (b, a) in before.iter().zip(after) {
                let rel = (a - b).abs() / b.abs();
                worst = worst.max(rel);
                ensure(rel <= 1e-9, || format!("integral changed from {b} to {a} at dt = {dt}"))?;
            }
        }
    }
    Ok(format!("worst relative change {worst:.1e}"))
}

/// `(∇·u, ψⱼ)` for every vertex hat function ψⱼ, assembled here from the
/// velocity coefficients with a degree-5 rule.
fn divergence_moments(spaces: &Spaces, u: &[f64]) -> Vec<f64> {
    let mesh = &spaces.mesh;
    let v = &spaces.velocity;
    let mut out = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_triangles() {
        let geom = mesh.geometry(t);
        let g = geom.grad_lambda;
        let dofs = v.element_dofs(t);
        let tri = mesh.triangles()[t];
        for (l, w) in rule(5).iter() {
            let c = [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]];
            let gb = [0, 1].map(|k| c[0] * g[0][k] + c[1] * g[1][k] + c[2] * g[2][k]);
            let grads = [g[0], g[1], g[2], gb];
            let mut div = 0.0;
            for a in 0..4 {
                div += u[dofs[a]] * grads[a][0] + u[dofs[4 + a]] * grads[a][1];
            }
            for a in 0..3 {
                out[tri[a]] += 2.0 * geom.area * w * div * l[a];
            }
        }
    }
    out
}

fn incompressibility() -> Outcome {
    let spaces = Spaces::new(Arc::new(Mesh::unit_square(12, 12).unwrap()));
    let opts = SolveOptions::default();
    let mut worst = 0.0f64;
    let ms = ManufacturedSolution;
    let runs: [(ModelParams, InitialData, bool, f64); 2] = [
        (ModelParams::competition(2.0, 0.3), competition_initial_data(), false, 1e-3),
        (ModelParams::default(), ms.initial_data(), true, 0.05),
    ];
    for (params, initial, forced, dt) in runs {
        let mut state = init_state(&spaces, &params, &initial, &opts).map_err(|e| e.to_string())?;
        let mut stepper = Stepper::new(&spaces, &params, &opts).map_err(|e| e.to_string())?;
        for _ in 0..12 {
            let forcing = forced.then_some(&ms as &dyn chemofluid::scheme::Forcing);
            state = stepper.advance(&state, dt, forcing).map_err(|e| e.to_string())?;
            let r = max_abs(&divergence_moments(&spaces, &state.u));
            worst = worst.max(r);
            ensure(r <= 1e-8, || format!("max |(∇·u, ψ)| = {r:e} at step {}", state.m))?;
        }
    }
    Ok(format!("worst max |(∇·u, ψ)| = {worst:.1e} over 24 steps"))
}

// ------------------------------------------------------- forcing oracle

/// Fourth-order central difference of `f` along `e` at `x`.
fn d1(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], e: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut y = x;
        y[e] += s * h;
        f(y)
    };
    (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
}

/// Fourth-order central second difference along `e`.
fn d2(f: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], e: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut y = x;
        y[e] += s * h;
        f(y)
    };
    (-at(2.0) + 16.0 * at(1.0) - 30.0 * at(0.0) + 16.0 * at(-1.0) - at(-2.0)) / (12.0 * h * h)
}

fn forcing_oracle() -> Outcome {
    const H: f64 = 1e-3;
    let ms = ManufacturedSolution;
    // coordinates (x, y, t)
    let field = |k: usize| move |q: [f64; 3]| {
        let e = ms.exact_fields(q[2], [q[0], q[1]]);
        [e.n, e.w, e.c, e.s[0], e.s[1], e.u[0], e.u[1], e.pi][k]
    };
    let (n, w, c, s1, s2, u1, u2, pi) = (field(0), field(1), field(2), field(3), field(4), field(5), field(6), field(7));
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..3.0)];
        let (x, t) = ([q[0], q[1]], q[2]);
        let grad = |f: &dyn Fn([f64; 3]) -> f64| [d1(f, q, 0, H), d1(f, q, 1, H)];
        let lap = |f: &dyn Fn([f64; 3]) -> f64| d2(f, q, 0, H) + d2(f, q, 1, H);
        let dt = |f: &dyn Fn([f64; 3]) -> f64| d1(f, q, 2, H);
        let uv = [u1(q), u2(q)];
        let sv = [s1(q), s2(q)];
        let adv = |f: &dyn Fn([f64; 3]) -> f64| {
            let g = grad(f);
            uv[0] * g[0] + uv[1] * g[1]
        };
        let (nv, wv, cv) = (n(q), w(q), c(q));
        // ∇·(n s) for a density with the exact s = ∇c
        let div_ns = |f: &dyn Fn([f64; 3]) -> f64| {
            let flux_x = |y: [f64; 3]| f(y) * s1(y);
            let flux_y = |y: [f64; 3]| f(y) * s2(y);
            d1(&flux_x, q, 0, H) + d1(&flux_y, q, 1, H)
        };
        let f_n = dt(&n) + adv(&n) - lap(&n) + div_ns(&n) - nv * (1.0 - nv - wv);
        let f_w = dt(&w) + adv(&w) - lap(&w) + div_ns(&w) - wv * (1.0 - nv - wv);
        let f_c = dt(&c) + adv(&c) - lap(&c) + (nv + wv) * cv;
        let gp = grad(&pi);
        let f_u = [
            dt(&u1) + adv(&u1) - lap(&u1) - gp[0],
            dt(&u2) + adv(&u2) - lap(&u2) - gp[1],
        ];
        let closed = ms.forcing_at(t, x);
        // F_s against the difference quotient of the closed-form F_c
        let fc = |y: [f64; 3]| ms.forcing_at(y[2], [y[0], y[1]]).c;
        let f_s = grad(&fc);
        let gc = grad(&c);
        let pairs = [
            ("F_n", closed.n, f_n),
            ("F_w", closed.w, f_w),
            ("F_c", closed.c, f_c),
            ("F_s.x", closed.s[0], f_s[0]),
            ("F_s.y", closed.s[1], f_s[1]),
            ("F_u.x", closed.u[0], f_u[0]),
            ("F_u.y", closed.u[1], f_u[1]),
            ("s - ∇c (x)", sv[0], gc[0]),
            ("s - ∇c (y)", sv[1], gc[1]),
        ];
        for (name, a, b) in pairs {
            let gap = (a - b).abs();
            worst = worst.max(gap);
            ensure(gap <= 1e-5, || format!("{name} at t = {t}, p = {x:?}: closed form {a}, differences {b}"))?;
        }
    }
    Ok(format!("worst absolute gap {worst:.1e}"))
}

// ------------------------------------------------------- convergence

/// Reference errors at k = 10, 16, 22, 28 for each variable: `l∞(L²)`,
/// `l²(H¹)` and, for the velocity, `l∞(H¹)`.
const REFERENCE: [(Variable, [f64; 4], [f64; 4], Option<[f64; 4]>); 5] = [
    (Variable::N, [5.677008e-2, 2.227926e-2, 1.179489e-2, 7.277616e-3], [7.642456e-1, 4.715734e-1, 3.417503e-1, 2.681382e-1], None),
    (Variable::W, [6.639095e-2, 2.607234e-2, 1.379666e-2, 8.509213e-3], [8.345002e-1, 4.898759e-1, 3.489831e-1, 2.716992e-1], None),
    (Variable::C, [3.573118e-2, 1.403060e-2, 7.432849e-3, 4.591755e-3], [7.429560e-1, 4.666742e-1, 3.399509e-1, 2.672989e-1], None),
    (
        Variable::U1,
        [5.462052e-2, 2.147830e-2, 1.135494e-2, 6.996890e-3],
        [9.994213e-1, 6.264182e-1, 4.556049e-1, 3.578633e-1],
        Some([2.335301, 1.480473, 1.081356, 8.512129e-1]),
    ),
    (
        Variable::U2,
        [5.455275e-2, 2.145280e-2, 1.134125e-2, 6.988373e-3],
        [9.994666e-1, 6.264266e-1, 4.556055e-1, 3.578626e-1],
        Some([2.335301, 1.480473, 1.081356, 8.512129e-1]),
    ),
];

fn reference_order() -> Outcome {
    let orders = convergence_orders(&REFERENCE[0].1[..2], &[1.0 / 10.0, 1.0 / 16.0]).map_err(|e| e.to_string())?;
    ensure((orders[0] - 1.9901).abs() <= 5e-3, || format!("order {:.4}", orders[0]))?;
    Ok(format!("order {:.4}", orders[0]))
}

fn print_report(report: &ErrorReport) {
    println!("    {:<6} {:<4} {:<8} {:>14} {:>8}", "row", "var", "norm", "error", "order");
    for var in Variable::ALL {
        for norm in Norm::ALL.into_iter().filter(|n| n.reported_for(var)) {
            let orders = report.orders(var, norm);
            for (i, row) in report.rows.iter().enumerate() {
                let e = report.error(i, var, norm).map_or("failed".to_string(), |e| format!("{e:.6e}"));
                let o = orders[i].map_or(String::new(), |o| format!("{o:.4}"));
                println!("    {:<6} {:<4} {:<8} {:>14} {:>8}", row.label, var.as_str(), norm.as_str(), e, o);
            }
        }
    }
}

/// Checks every consecutive order of `(var, norm)` against `[lo, hi]`.
fn check_orders(report: &ErrorReport, checks: &[(Variable, Norm, f64, f64)], problems: &mut Vec<String>) -> (f64, f64) {
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(var, norm, lo, hi) in checks {
        for (i, o) in report.orders(var, norm).into_iter().enumerate().skip(1) {
            match o {
                Some(p) => {
                    min = min.min(p);
                    max = max.max(p);
                    if !(lo..=hi).contains(&p) {
                        problems.push(format!("{var}/{norm} order {p:.4} at row {i} outside [{lo}, {hi}]"));
                    }
                }
                None => problems.push(format!("{var}/{norm} order undefined at row {i}")),
            }
        }
    }
    (min, max)
}

fn spatial_convergence() -> Outcome {
    let config = parse_config_str(
        "mode = convergence-space\ninitial = test2-manufactured\n[mesh]\nresolutions = 10, 16, 22, 28\n[time]\ndt = 1e-4\nfinal = 1\n",
    )
    .map_err(|e| e.to_string())?;
    let report = run_convergence_study(&config).map_err(|e| e.to_string())?;
    print_report(&report);
    let mut problems: Vec<String> =
        report.failed_rows().iter().map(|r| format!("run {} failed: {:?}", r.label, r.errors.as_ref().err())).collect();
    let mut checks = Vec::new();
    for var in Variable::ALL {
        checks.push((var, Norm::LinfL2, 1.80, 2.15));
        checks.push((var, Norm::L2H1, 0.85, 1.15));
        if var.is_velocity() {
            checks.push((var, Norm::LinfH1, 0.85, 1.10));
        }
    }
    let (lo, hi) = check_orders(&report, &checks, &mut problems);
    let mut worst_ratio = 1.0f64;
    for (var, l2, h1, strong) in REFERENCE {
        let mut cols = vec![(Norm::LinfL2, l2), (Norm::L2H1, h1)];
        if let Some(s) = strong {
            cols.push((Norm::LinfH1, s));
        }
        for (norm, reference) in cols {
            for (i, r) in reference.iter().enumerate() {
                let Some(e) = report.error(i, var, norm) else { continue };
                let ratio = e / r;
                let spread = ratio.max(1.0 / ratio);
                worst_ratio = worst_ratio.max(spread);
                if spread > 3.0 {
                    problems.push(format!("{var}/{norm} at k = {}: {e:.4e} vs reference {r:.4e}", report.rows[i].label));
                }
            }
        }
    }
    let summary = format!("orders in [{lo:.4}, {hi:.4}], errors within a factor {worst_ratio:.2} of the reference");
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join("; ")))
    }
}

fn temporal_convergence() -> Outcome {
    let dts = [10.0, 12.0, 14.0, 16.0].map(|d: f64| format!("{:?}", 1.0 / d)).join(", ");
    let config = parse_config_str(&format!(
        "mode = convergence-time\ninitial = test2-manufactured\n[mesh]\nresolutions = 64\n[time]\ndt = {dts}\nfinal = 5\n"
    ))
    .map_err(|e| e.to_string())?;
    let report = run_convergence_study(&config).map_err(|e| e.to_string())?;
    print_report(&report);
    let mut problems: Vec<String> =
        report.failed_rows().iter().map(|r| format!("run {} failed: {:?}", r.label, r.errors.as_ref().err())).collect();
    let (lo, hi) = (0.75, 1.35);
    let checks = [
        (Variable::N, Norm::LinfL2, lo, hi),
        (Variable::N, Norm::L2H1, lo, hi),
        (Variable::W, Norm::LinfL2, lo, hi),
        (Variable::W, Norm::L2H1, lo, hi),
        (Variable::U1, Norm::LinfL2, lo, hi),
        (Variable::U2, Norm::LinfL2, lo, hi),
        (Variable::C, Norm::L2H1, lo, hi),
    ];
    let (min, max) = check_orders(&report, &checks, &mut problems);
    let summary = format!("orders in [{min:.4}, {max:.4}]");
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join("; ")))
    }
}

// ------------------------------------------------------- competition

enum Expect {
    Exclusion { survivor: char },
    Coexistence,
}

fn competition(a1: f64, a2: f64, expect: Expect) -> Outcome {
    let mesh = Arc::new(Mesh::unit_square(48, 48).unwrap());
    let area = mesh.total_area();
    let setup = SimulationSetup {
        mesh,
        params: ModelParams::competition(a1, a2),
        initial: competition_initial_data(),
        forcing: None,
        dt: 1e-3,
        final_time: 25.0,
        opts: SolveOptions::default(),
        snapshots: Vec::new(),
        diagnostics: false,
    };
    let traj = run_simulation(&setup).map_err(|e| e.to_string())?;
    if let Some(e) = &traj.failure {
        return Err(format!("step {} failed: {e}", traj.final_state.m + 1));
    }
    for t in [1.0, 5.0, 10.0, 15.0, 20.0, 25.0] {
        if let Some(r) = traj.series.iter().find(|r| (r.t - t).abs() < 1e-6) {
            println!("    t = {t:>4}: mean n {:.5}, mean w {:.5}, mean c {:.5}", r.int_n / area, r.int_w / area, r.int_c / area);
        }
    }
    let last = traj.series.last().ok_or("empty series")?;
    let (n, w) = (last.int_n / area, last.int_w / area);
    let summary = format!("mean n {n:.4}, mean w {w:.4} at t = {:.1}", last.t);
    let ok = match expect {
        Expect::Exclusion { survivor: 'w' } => n <= 0.05 && (w - 1.0).abs() <= 0.05,
        Expect::Exclusion { .. } => w <= 0.05 && (n - 1.0).abs() <= 0.05,
        Expect::Coexistence => {
            let n_star = (1.0 - a1) / (1.0 - a1 * a2);
            let w_star = (1.0 - a2) / (1.0 - a1 * a2);
            (n - n_star).abs() <= 0.05 && (w - w_star).abs() <= 0.05
        }
    };
    if ok {
        Ok(summary)
    } else {
        Err(summary)
    }
}
