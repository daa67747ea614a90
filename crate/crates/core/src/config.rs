//! Run configuration: a line-based `key = value` format with `[section]`
//! headers and `#` comments.
//!
//! ```text
//! mode = convergence-space        # simulate | convergence-space | convergence-time
//! initial = test2-manufactured    # test2-manufactured | competition-2d | custom-expression
//!
//! [mesh]
//! resolutions = 10, 16, 22, 28    # cells per side
//! bounds = 0, 1, 0, 1             # x0, x1, y0, y1 (optional)
//!
//! [time]
//! dt = 1e-4                       # one value, or a list for convergence-time
//! final = 1
//!
//! [params]                        # optional; default 1 and grad_phi 0, or the
//!                                 # competition set for competition-2d
//! a1 = 2
//! grad_phi_y = -9.8               # expressions in x and y
//!
//! [custom]                        # only for initial = custom-expression
//! n0 = 1 + 0.1*cos(pi*x)
//!
//! [output]
//! dir = out
//! snapshots = 0, 0.5, 1
//! diagnostics = true
//!
//! [solver]
//! tol = 1e-10
//! max_iter = 50
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::fields::{FdScalar, FdVector, GradientOf, ScalarField, VectorField};
use crate::linsolve::SolveOptions;
use crate::mesh::Rect;
use crate::scheme::{InitialData, ModelParams};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { key: String, line: usize },
    #[error("missing required key `{key}`")]
    MissingKey { key: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    Value { key: String, line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    ConvergenceSpace,
    ConvergenceTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialKind {
    Test2Manufactured,
    Competition2d,
    CustomExpression,
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:ident => $text:literal),* $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),* }
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok(Self::$variant),)*
                    _ => Err(format!("expected one of: {}", [$($text),*].join(", "))),
                }
            }
        }
    };
}

keyword_enum!(Mode { Simulate => "simulate", ConvergenceSpace => "convergence-space", ConvergenceTime => "convergence-time" });
keyword_enum!(InitialKind {
    Test2Manufactured => "test2-manufactured",
    Competition2d => "competition-2d",
    CustomExpression => "custom-expression",
});

thread_local! {
    static BUILTINS: meval::Context<'static> = meval::Context::new();
}

/// A scalar expression in `x` and `y` with the usual elementary functions
/// and the constants `pi` and `e`.
#[derive(Clone, Debug)]
pub struct Expression {
    source: String,
    expr: meval::Expr,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self, String> {
        let expr: meval::Expr = source.parse().map_err(|e| format!("{e}"))?;
        let e = Expression { source: source.trim().to_string(), expr };
        e.try_eval([0.5, 0.5])?;
        Ok(e)
    }

    pub fn constant(v: f64) -> Self {
        Expression::parse(&format!("{v:?}")).expect("numeric literal")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn try_eval(&self, p: [f64; 2]) -> Result<f64, String> {
        BUILTINS
            .with(|ctx| self.expr.eval_with_context(((("x", p[0]), ("y", p[1])), ctx)))
            .map_err(|e| format!("{e}"))
    }

    /// Value at `p`; NaN if evaluation fails.
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.try_eval(p).unwrap_or(f64::NAN)
    }

    /// Whether the expression is a numeric constant (no variables).
    pub fn constant_value(&self) -> Option<f64> {
        let v = self.try_eval([0.0, 0.0]).ok()?;
        [[1.0, 0.0], [0.0, 1.0], [0.37, 0.81]].iter().all(|p| self.try_eval(*p) == Ok(v)).then_some(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamsConfig {
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
    pub k: f64,
    pub grad_phi_x: Expression,
    pub grad_phi_y: Expression,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
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
            grad_phi_x: Expression::constant(0.0),
            grad_phi_y: Expression::constant(0.0),
        }
    }
}

impl ParamsConfig {
    /// Defaults for `initial = competition-2d`: the coefficients of
    /// [`ModelParams::competition`] with `a1 = a2 = 1`.
    pub fn competition() -> Self {
        let p = ModelParams::competition(1.0, 1.0);
        let g = (p.grad_phi)([0.0, 0.0]);
        ParamsConfig {
            chi1: p.chi1,
            chi2: p.chi2,
            dn: p.dn,
            dw: p.dw,
            dc: p.dc,
            du: p.du,
            mu1: p.mu1,
            mu2: p.mu2,
            a1: p.a1,
            a2: p.a2,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            lambda: p.lambda,
            k: p.k,
            grad_phi_x: Expression::constant(g[0]),
            grad_phi_y: Expression::constant(g[1]),
        }
    }

    fn numeric_mut(&mut self) -> [(&'static str, &mut f64); 15] {
        [
            ("chi1", &mut self.chi1),
            ("chi2", &mut self.chi2),
            ("Dn", &mut self.dn),
            ("Dw", &mut self.dw),
            ("Dc", &mut self.dc),
            ("Du", &mut self.du),
            ("mu1", &mut self.mu1),
            ("mu2", &mut self.mu2),
            ("a1", &mut self.a1),
            ("a2", &mut self.a2),
            ("alpha", &mut self.alpha),
            ("beta", &mut self.beta),
            ("gamma", &mut self.gamma),
            ("lambda", &mut self.lambda),
            ("k", &mut self.k),
        ]
    }

    pub fn model_params(&self) -> ModelParams {
        let (gx, gy) = (self.grad_phi_x.clone(), self.grad_phi_y.clone());
        let grad_phi: Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync> =
            match (gx.constant_value(), gy.constant_value()) {
                (Some(a), Some(b)) => Arc::new(move |_| [a, b]),
                _ => Arc::new(move |p| [gx.eval(p), gy.eval(p)]),
            };
        ModelParams {
            chi1: self.chi1,
            chi2: self.chi2,
            dn: self.dn,
            dw: self.dw,
            dc: self.dc,
            du: self.du,
            mu1: self.mu1,
            mu2: self.mu2,
            a1: self.a1,
            a2: self.a2,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            lambda: self.lambda,
            k: self.k,
            grad_phi,
        }
    }
}

/// Initial fields given as expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct CustomInitial {
    pub n0: Expression,
    pub w0: Expression,
    pub c0: Expression,
    pub u0_x: Expression,
    pub u0_y: Expression,
}

impl CustomInitial {
    /// Derivatives are taken by central differences.
    pub fn initial_data(&self) -> InitialData {
        let scalar = |e: &Expression| -> Arc<dyn ScalarField> {
            let e = e.clone();
            Arc::new(FdScalar(move |p| e.eval(p)))
        };
        let c = scalar(&self.c0);
        let (ux, uy) = (self.u0_x.clone(), self.u0_y.clone());
        InitialData {
            n: scalar(&self.n0),
            w: scalar(&self.w0),
            s: Arc::new(GradientOf(c.clone())) as Arc<dyn VectorField>,
            c,
            u: Arc::new(FdVector(move |p| [ux.eval(p), uy.eval(p)])),
            pi: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub initial: InitialKind,
    pub resolutions: Vec<usize>,
    pub bounds: Rect,
    pub dt: Vec<f64>,
    pub final_time: f64,
    pub params: ParamsConfig,
    pub custom: Option<CustomInitial>,
    pub output_dir: PathBuf,
    pub snapshots: Vec<f64>,
    pub diagnostics: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl RunConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iter: self.max_iter }
    }

    /// Serializes to the configuration format; parsing the result gives
    /// back an equal configuration.
    pub fn to_config_string(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let _ = writeln!(out, "mode = {}", self.mode.as_str());
        let _ = writeln!(out, "initial = {}", self.initial.as_str());
        let _ = writeln!(out, "\n[mesh]");
        let res: Vec<String> = self.resolutions.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(out, "resolutions = {}", res.join(", "));
        let b = &self.bounds;
        let _ = writeln!(out, "bounds = {}", list(&[b.x0, b.x1, b.y0, b.y1]));
        let _ = writeln!(out, "\n[time]");
        let _ = writeln!(out, "dt = {}", list(&self.dt));
        let _ = writeln!(out, "final = {:?}", self.final_time);
        let _ = writeln!(out, "\n[params]");
        let mut params = self.params.clone();
        for (k, v) in params.numeric_mut() {
            let _ = writeln!(out, "{k} = {:?}", *v);
        }
        let _ = writeln!(out, "grad_phi_x = {}", self.params.grad_phi_x.source());
        let _ = writeln!(out, "grad_phi_y = {}", self.params.grad_phi_y.source());
        if let Some(c) = &self.custom {
            let _ = writeln!(out, "\n[custom]");
            for (k, e) in [("n0", &c.n0), ("w0", &c.w0), ("c0", &c.c0), ("u0_x", &c.u0_x), ("u0_y", &c.u0_y)] {
                let _ = writeln!(out, "{k} = {}", e.source());
            }
        }
        let _ = writeln!(out, "\n[output]");
        let _ = writeln!(out, "dir = {}", self.output_dir.display());
        if !self.snapshots.is_empty() {
            let _ = writeln!(out, "snapshots = {}", list(&self.snapshots));
        }
        let _ = writeln!(out, "diagnostics = {}", self.diagnostics);
        let _ = writeln!(out, "\n[solver]");
        let _ = writeln!(out, "tol = {:?}", self.tol);
        let _ = writeln!(out, "max_iter = {}", self.max_iter);
        out
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_config_string())
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("", &["mode", "initial"]),
    ("mesh", &["resolutions", "bounds"]),
    ("time", &["dt", "final"]),
    (
        "params",
        &[
            "chi1", "chi2", "Dn", "Dw", "Dc", "Du", "mu1", "mu2", "a1", "a2", "alpha", "beta", "gamma", "lambda", "k",
            "grad_phi_x", "grad_phi_y",
        ],
    ),
    ("custom", &["n0", "w0", "c0", "u0_x", "u0_y"]),
    ("output", &["dir", "snapshots", "diagnostics"]),
    ("solver", &["tol", "max_iter"]),
];

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line, message: "unterminated section header".into() })?
                    .trim();
                if !SECTIONS.iter().any(|(s, _)| *s == name && !name.is_empty()) {
                    return Err(ConfigError::Syntax { line, message: format!("unknown section [{name}]") });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, message: "expected `key = value`".into() })?;
            let (key, value) = (key.trim(), value.trim());
            let known = SECTIONS.iter().find(|(s, _)| *s == section).is_some_and(|(_, keys)| keys.contains(&key));
            let full = qualified(&section, key);
            if !known {
                return Err(ConfigError::UnknownKey { key: full, line });
            }
            if value.is_empty() {
                return Err(ConfigError::Value { key: full, line, message: "empty value".into() });
            }
            if map.insert(full.clone(), (value.to_string(), line)).is_some() {
                return Err(ConfigError::DuplicateKey { key: full, line });
            }
        }
        Ok(Entries { map })
    }

    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn required(&self, key: &str) -> Result<(&str, usize), ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::MissingKey { key: key.to_string() })
    }

    fn line(&self, key: &str) -> usize {
        self.get(key).map_or(0, |(_, l)| l)
    }

    fn value<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, line)) => parse(v).map(Some).map_err(|message| ConfigError::Value { key: key.into(), line, message }),
        }
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Value { key: key.into(), line: self.line(key), message: message.into() }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').map(|x| item(x.trim())).collect()
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("`{s}` is not a nonnegative integer"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{s}` is not true or false")),
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let e = Entries::parse(text)?;
    let mode: Mode = {
        let (v, line) = e.required("mode")?;
        v.parse().map_err(|message| ConfigError::Value { key: "mode".into(), line, message })?
    };
    let initial: InitialKind = {
        let (v, line) = e.required("initial")?;
        v.parse().map_err(|message| ConfigError::Value { key: "initial".into(), line, message })?
    };
    e.required("mesh.resolutions")?;
    let resolutions = e.value("mesh.resolutions", |s| parse_list(s, parse_usize))?.expect("present");
    if resolutions.contains(&0) {
        return Err(e.invalid("mesh.resolutions", "resolutions must be positive"));
    }
    let bounds = match e.value("mesh.bounds", |s| parse_list(s, parse_f64))? {
        None => Rect::UNIT,
        Some(b) if b.len() == 4 => {
            Rect::new(b[0], b[1], b[2], b[3]).map_err(|err| e.invalid("mesh.bounds", err.to_string()))?
        }
        Some(_) => return Err(e.invalid("mesh.bounds", "expected four numbers x0, x1, y0, y1")),
    };
    e.required("time.dt")?;
    let dt = e.value("time.dt", |s| parse_list(s, parse_f64))?.expect("present");
    if dt.iter().any(|&d| !(d > 0.0)) {
        return Err(e.invalid("time.dt", "time steps must be positive"));
    }
    e.required("time.final")?;
    let final_time = e.value("time.final", parse_f64)?.expect("present");
    if !(final_time > 0.0) {
        return Err(e.invalid("time.final", "final time must be positive"));
    }

    let mut params = match initial {
        InitialKind::Competition2d => ParamsConfig::competition(),
        _ => ParamsConfig::default(),
    };
    for (name, slot) in params.numeric_mut() {
        if let Some(v) = e.value(&format!("params.{name}"), parse_f64)? {
            *slot = v;
        }
    }
    for (name, slot) in [("params.grad_phi_x", &mut params.grad_phi_x), ("params.grad_phi_y", &mut params.grad_phi_y)] {
        if let Some(v) = e.value(name, Expression::parse)? {
            *slot = v;
        }
    }
    if let Err(err) = params.model_params().validate() {
        let msg = err.to_string();
        let key = SECTIONS[3]
            .1
            .iter()
            .find(|k| msg.contains(&format!("{k} must")))
            .map_or("params".to_string(), |k| format!("params.{k}"));
        return Err(e.invalid(&key, msg));
    }

    let has_custom = SECTIONS[4].1.iter().any(|k| e.get(&format!("custom.{k}")).is_some());
    let custom = match initial {
        InitialKind::CustomExpression => {
            let expr = |k: &str, required: bool| -> Result<Expression, ConfigError> {
                let key = format!("custom.{k}");
                if required {
                    e.required(&key)?;
                }
                Ok(e.value(&key, Expression::parse)?.unwrap_or_else(|| Expression::constant(0.0)))
            };
            Some(CustomInitial {
                n0: expr("n0", true)?,
                w0: expr("w0", true)?,
                c0: expr("c0", true)?,
                u0_x: expr("u0_x", false)?,
                u0_y: expr("u0_y", false)?,
            })
        }
        _ if has_custom => {
            let key = SECTIONS[4].1.iter().map(|k| format!("custom.{k}")).find(|k| e.get(k).is_some()).expect("some");
            return Err(e.invalid(&key, "the [custom] section requires initial = custom-expression"));
        }
        _ => None,
    };
    if initial == InitialKind::Test2Manufactured && bounds != Rect::UNIT {
        return Err(e.invalid("mesh.bounds", "the manufactured solution is defined on the unit square"));
    }
    match mode {
        Mode::Simulate => {
            if resolutions.len() != 1 {
                return Err(e.invalid("mesh.resolutions", "simulate mode takes exactly one resolution"));
            }
            if dt.len() != 1 {
                return Err(e.invalid("time.dt", "simulate mode takes exactly one time step"));
            }
        }
        Mode::ConvergenceSpace | Mode::ConvergenceTime => {
            if initial != InitialKind::Test2Manufactured {
                return Err(e.invalid("initial", "convergence studies need initial = test2-manufactured"));
            }
            let (key, len, other, other_len) = if mode == Mode::ConvergenceSpace {
                ("mesh.resolutions", resolutions.len(), "time.dt", dt.len())
            } else {
                ("time.dt", dt.len(), "mesh.resolutions", resolutions.len())
            };
            if len < 2 {
                return Err(e.invalid(key, "a convergence study needs at least two values"));
            }
            if other_len != 1 {
                return Err(e.invalid(other, "the fixed discretization parameter takes exactly one value"));
            }
        }
    }

    let output_dir = e.get("output.dir").map_or_else(|| PathBuf::from("output"), |(v, _)| PathBuf::from(v));
    let snapshots = e.value("output.snapshots", |s| parse_list(s, parse_f64))?.unwrap_or_default();
    if let Some(bad) = snapshots.iter().find(|&&t| !(0.0..=final_time).contains(&t)) {
        return Err(e.invalid("output.snapshots", format!("snapshot time {bad} outside [0, final]")));
    }
    let diagnostics = e.value("output.diagnostics", parse_bool)?.unwrap_or(false);
    let defaults = SolveOptions::default();
    let tol = e.value("solver.tol", parse_f64)?.unwrap_or(defaults.tol);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(e.invalid("solver.tol", "tolerance must lie in (0, 1)"));
    }
    let max_iter = e.value("solver.max_iter", parse_usize)?.unwrap_or(defaults.max_iter);

    Ok(RunConfig {
        mode,
        initial,
        resolutions,
        bounds,
        dt,
        final_time,
        params,
        custom,
        output_dir,
        snapshots,
        diagnostics,
        tol,
        max_iter,
    })
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| ConfigError::Io { path: path.to_path_buf(), message: err.to_string() })?;
    parse_config_str(&text)
}
