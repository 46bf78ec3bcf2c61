//! Positive radial solutions on the ball `B_R ⊂ R^n` by shooting.
//!
//! The scalar problem `u'' + (n-1)/r u' + f(r,u) = 0` is shot from the
//! centre height `alpha`; the pair `u'' + (n-1)/r u' + f(r,v) = 0`,
//! `v'' + (n-1)/r v' + g(r,u) = 0` from `(alpha, beta)`. Integration starts
//! at a small radius `r0` with second-order Taylor data, so the singular
//! coefficient `(n-1)/r` is never evaluated at 0.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::expr::{Binding, ExprError, ExprNode, Symbol};
use crate::ode::{self, Dopri5Options, Event, OdeSystem, Stop, Trajectory};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RadialError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid shooting configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid initial data: {0}")]
    InvalidStart(String),
    #[error("operation needs a {expected} problem")]
    WrongKind { expected: &'static str },
    #[error("the first-zero radius never straddles R = {radius} for initial heights in [{alpha_min:e}, {alpha_max:e}] ({points} samples)")]
    NoBracket { radius: f64, alpha_min: f64, alpha_max: f64, points: usize },
    #[error("shooting did not converge after {iterations} iterations (residual {residual:e}): {reason}")]
    NoConvergence { iterations: usize, residual: f64, reason: String },
    #[error("solution loses positivity at r = {r}")]
    PositivityLost { r: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum RadialKind {
    /// `f(r, u)`.
    Scalar { f: ExprNode },
    /// `f(r, v)` drives `u`, `g(r, u)` drives `v`.
    Pair { f: ExprNode, g: ExprNode },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialProblem {
    n: usize,
    radius: f64,
    kind: RadialKind,
}

fn check_symbols(e: &ExprNode, allowed: &[Symbol], what: &str) -> Result<(), RadialError> {
    match e.free_symbols().into_iter().find(|s| !allowed.contains(s)) {
        Some(s) => Err(RadialError::InvalidProblem(format!("{what} may not depend on {s}"))),
        None => Ok(()),
    }
}

impl RadialProblem {
    pub fn scalar(n: usize, radius: f64, f: ExprNode) -> Result<Self, RadialError> {
        check_symbols(&f, &[Symbol::R, Symbol::U(0)], "f")?;
        Self::new(n, radius, RadialKind::Scalar { f })
    }

    pub fn pair(n: usize, radius: f64, f: ExprNode, g: ExprNode) -> Result<Self, RadialError> {
        check_symbols(&f, &[Symbol::R, Symbol::V(0)], "f")?;
        check_symbols(&g, &[Symbol::R, Symbol::U(0)], "g")?;
        Self::new(n, radius, RadialKind::Pair { f, g })
    }

    fn new(n: usize, radius: f64, kind: RadialKind) -> Result<Self, RadialError> {
        if n < 2 {
            return Err(RadialError::InvalidProblem(format!("dimension must be at least 2, got {n}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(RadialError::InvalidProblem(format!("radius must be positive, got {radius}")));
        }
        Ok(RadialProblem { n, radius, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn kind(&self) -> &RadialKind {
        &self.kind
    }

    pub fn is_pair(&self) -> bool {
        matches!(self.kind, RadialKind::Pair { .. })
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self, RadialError> {
        Self::new(self.n, radius, self.kind.clone())
    }

    fn source(&self, e: &ExprNode, r: f64, arg: Symbol, value: f64) -> Result<f64, ExprError> {
        e.evaluate(&Binding::new().with(Symbol::R, r).with(arg, value))
    }

    /// `(f(0, ·), g(0, ·))` at the centre, for the Taylor start.
    fn centre_sources(&self, alpha: f64, beta: f64) -> Result<(f64, f64), ExprError> {
        match &self.kind {
            RadialKind::Scalar { f } => Ok((self.source(f, 0.0, Symbol::U(0), alpha)?, 0.0)),
            RadialKind::Pair { f, g } => {
                Ok((self.source(f, 0.0, Symbol::V(0), beta)?, self.source(g, 0.0, Symbol::U(0), alpha)?))
            }
        }
    }
}

impl OdeSystem for RadialProblem {
    fn dim(&self) -> usize {
        if self.is_pair() {
            4
        } else {
            2
        }
    }

    fn rhs(&self, r: f64, y: &[f64], dy: &mut [f64]) -> Result<(), ExprError> {
        let damping = (self.n - 1) as f64 / r;
        match &self.kind {
            RadialKind::Scalar { f } => {
                dy[0] = y[1];
                dy[1] = -damping * y[1] - self.source(f, r, Symbol::U(0), y[0])?;
            }
            RadialKind::Pair { f, g } => {
                dy[0] = y[1];
                dy[1] = -damping * y[1] - self.source(f, r, Symbol::V(0), y[2])?;
                dy[2] = y[3];
                dy[3] = -damping * y[3] - self.source(g, r, Symbol::U(0), y[0])?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub atol: f64,
    pub rtol: f64,
    /// Series start as a fraction of R; further capped by the local length
    /// scale of the nonlinearity at the start height.
    pub r0_fraction: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_points: usize,
    /// Horizon of the first-zero map, as a multiple of R.
    pub bracket_horizon: f64,
    /// Relative tolerance on the first-zero radius in scalar shooting.
    pub radius_tol: f64,
    /// Tolerance on `|u(R)|, |v(R)|` in pair shooting, relative to `max(1, alpha, beta)`.
    pub boundary_tol: f64,
    pub max_bisection: usize,
    pub max_newton: usize,
    pub blow_up: f64,
    pub grid_points: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            atol: defaults::ODE_TOL,
            rtol: defaults::ODE_TOL,
            r0_fraction: defaults::SERIES_START_FRACTION,
            alpha_min: defaults::ALPHA_MIN,
            alpha_max: defaults::ALPHA_MAX,
            alpha_points: defaults::ALPHA_POINTS,
            bracket_horizon: defaults::BRACKET_HORIZON,
            radius_tol: defaults::RADIUS_TOL,
            boundary_tol: defaults::BOUNDARY_TOL,
            max_bisection: defaults::MAX_BISECTION,
            max_newton: defaults::MAX_NEWTON,
            blow_up: defaults::BLOW_UP,
            grid_points: defaults::RADIAL_GRID_POINTS,
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<(), RadialError> {
        let positive = [
            ("atol", self.atol),
            ("rtol", self.rtol),
            ("r0_fraction", self.r0_fraction),
            ("alpha_min", self.alpha_min),
            ("alpha_max", self.alpha_max),
            ("radius_tol", self.radius_tol),
            ("boundary_tol", self.boundary_tol),
            ("blow_up", self.blow_up),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(RadialError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.r0_fraction >= 1e-2 {
            return Err(RadialError::InvalidConfig("r0_fraction must be much smaller than 1".into()));
        }
        if self.alpha_min >= self.alpha_max || self.alpha_points < 2 {
            return Err(RadialError::InvalidConfig("alpha grid needs alpha_min < alpha_max and 2+ points".into()));
        }
        if self.bracket_horizon <= 1.0 {
            return Err(RadialError::InvalidConfig("bracket_horizon must exceed 1".into()));
        }
        if self.grid_points < 3 || self.grid_points.is_multiple_of(2) {
            return Err(RadialError::InvalidConfig("grid_points must be odd and at least 3".into()));
        }
        Ok(())
    }

    fn ode_options(&self) -> Dopri5Options {
        Dopri5Options { atol: self.atol, rtol: self.rtol, blow_up: self.blow_up, ..Dopri5Options::default() }
    }

    fn alpha_grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.alpha_min.ln(), self.alpha_max.ln());
        let m = self.alpha_points - 1;
        (0..=m).map(|i| (lo + (hi - lo) * i as f64 / m as f64).exp()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Reached,
    ZeroCrossing { r: f64 },
    BlowUp { r: f64 },
    DomainError { r: f64, message: String },
    StepFailure { r: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialSample {
    pub r: f64,
    pub u: f64,
    pub du: f64,
    pub v: Option<f64>,
    pub dv: Option<f64>,
}

/// One integration from the centre, with dense output.
#[derive(Clone, Debug)]
pub struct RadialTrajectory {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub r0: f64,
    pub termination: Termination,
    /// Taylor coefficients `f(0,·)/(2n)` and `g(0,·)/(2n)` of the start.
    curvature: (f64, f64),
    inner: Trajectory,
}

impl RadialTrajectory {
    pub fn is_pair(&self) -> bool {
        self.beta.is_some()
    }

    pub fn end_radius(&self) -> f64 {
        self.inner.t_end
    }

    fn sample_from(&self, r: f64, y: &[f64]) -> RadialSample {
        RadialSample { r, u: y[0], du: y[1], v: self.beta.map(|_| y[2]), dv: self.beta.map(|_| y[3]) }
    }

    /// State at `r`; inside `[0, r0)` the Taylor start is used.
    pub fn at(&self, r: f64) -> Option<RadialSample> {
        if r < self.r0 {
            if r < 0.0 {
                return None;
            }
            let (cu, cv) = self.curvature;
            let y = [self.alpha - cu * r * r, -2.0 * cu * r, self.beta.unwrap_or(0.0) - cv * r * r, -2.0 * cv * r];
            return Some(self.sample_from(r, &y));
        }
        self.inner.eval(r).map(|y| self.sample_from(r, &y))
    }

    /// Accepted integrator steps, starting at `r0`.
    pub fn samples(&self) -> Vec<RadialSample> {
        self.inner.nodes().into_iter().map(|(r, y)| self.sample_from(r, &y)).collect()
    }

    /// First zero of `u` (of `min(u, v)` for pairs). A stop on a domain
    /// error with the solution already at zero level counts as a zero: a
    /// fractional power cannot be stepped across `u = 0`.
    pub fn first_zero(&self) -> Option<f64> {
        match &self.termination {
            Termination::ZeroCrossing { r } => Some(*r),
            Termination::DomainError { r, .. } => {
                let y = &self.inner.y_end;
                let low = if self.is_pair() { y[0].min(y[2]) } else { y[0] };
                let scale = self.alpha.max(self.beta.unwrap_or(0.0)).max(1.0);
                (low.abs() <= 1e-8 * scale).then_some(*r)
            }
            _ => None,
        }
    }
}

fn termination(stop: &Stop) -> Termination {
    match stop {
        Stop::Reached => Termination::Reached,
        Stop::Event { t } => Termination::ZeroCrossing { r: *t },
        Stop::BlowUp { t } => Termination::BlowUp { r: *t },
        Stop::Domain { t, message } => Termination::DomainError { r: *t, message: message.clone() },
        Stop::StepLimit { t } | Stop::StepTooSmall { t } => Termination::StepFailure { r: *t },
    }
}

fn series_start(
    p: &RadialProblem,
    cfg: &ShootingConfig,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64, f64), RadialError> {
    let (f0, g0) = p.centre_sources(alpha, beta)?;
    let two_n = 2.0 * p.n as f64;
    let mut r0 = cfg.r0_fraction * p.radius;
    for (height, source) in [(alpha, f0), (beta, g0)] {
        if source != 0.0 && height > 0.0 {
            r0 = r0.min(defaults::SERIES_START_SCALE_FRACTION * (two_n * height / source.abs()).sqrt());
        }
    }
    Ok((r0, f0 / two_n, g0 / two_n))
}

fn run(
    p: &RadialProblem,
    alpha: f64,
    beta: Option<f64>,
    r_max: f64,
    cfg: &ShootingConfig,
    stop_at_zero: bool,
) -> Result<RadialTrajectory, RadialError> {
    cfg.validate()?;
    let heights_ok = alpha.is_finite() && alpha > 0.0 && beta.is_none_or(|b| b.is_finite() && b > 0.0);
    if !heights_ok {
        return Err(RadialError::InvalidStart(format!("initial heights must be positive, got {alpha}, {beta:?}")));
    }
    let (r0, cu, cv) = series_start(p, cfg, alpha, beta.unwrap_or(0.0))?;
    if !(r_max > r0) {
        return Err(RadialError::InvalidStart(format!("r_max = {r_max} must exceed the series start {r0:e}")));
    }
    let y0: Vec<f64> = match beta {
        None => vec![alpha - cu * r0 * r0, -2.0 * cu * r0],
        Some(b) => vec![alpha - cu * r0 * r0, -2.0 * cu * r0, b - cv * r0 * r0, -2.0 * cv * r0],
    };
    let event_scalar = |y: &[f64]| y[0];
    let event_pair = |y: &[f64]| y[0].min(y[2]);
    let event: Option<Event> = match (stop_at_zero, beta.is_some()) {
        (false, _) => None,
        (true, false) => Some(&event_scalar),
        (true, true) => Some(&event_pair),
    };
    let inner = ode::integrate(p, r0, &y0, r_max, &cfg.ode_options(), event);
    Ok(RadialTrajectory { alpha, beta, r0, termination: termination(&inner.stop), curvature: (cu, cv), inner })
}

/// Integrates the scalar initial value problem `u(0) = alpha, u'(0) = 0`
/// up to `r_max`, the first zero of `u`, or blow-up.
pub fn integrate_scalar_ivp(
    p: &RadialProblem,
    alpha: f64,
    r_max: f64,
    cfg: &ShootingConfig,
) -> Result<RadialTrajectory, RadialError> {
    if p.is_pair() {
        return Err(RadialError::WrongKind { expected: "scalar" });
    }
    run(p, alpha, None, r_max, cfg, true)
}

/// Integrates the pair from `(alpha, beta)` up to `r_max`, the first zero
/// of `min(u, v)`, or blow-up.
pub fn integrate_pair_ivp(
    p: &RadialProblem,
    alpha: f64,
    beta: f64,
    r_max: f64,
    cfg: &ShootingConfig,
) -> Result<RadialTrajectory, RadialError> {
    if !p.is_pair() {
        return Err(RadialError::WrongKind { expected: "pair" });
    }
    run(p, alpha, Some(beta), r_max, cfg, true)
}

/// A positive radial solution sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialSolution {
    pub n: usize,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub dv: Option<Vec<f64>>,
    pub alpha: f64,
    pub beta: Option<f64>,
    /// Bisection or Newton iterations spent.
    pub iterations: usize,
}

impl RadialSolution {
    /// Wraps sampled data, checking lengths and uniform spacing.
    pub fn from_samples(
        n: usize,
        r: Vec<f64>,
        u: Vec<f64>,
        du: Vec<f64>,
        pair: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self, RadialError> {
        let len = r.len();
        if len < 3 {
            return Err(RadialError::GridMismatch(format!("need at least 3 nodes, got {len}")));
        }
        let pair_len_ok = pair.as_ref().is_none_or(|(v, dv)| v.len() == len && dv.len() == len);
        if u.len() != len || du.len() != len || !pair_len_ok {
            return Err(RadialError::GridMismatch("columns have different lengths".into()));
        }
        let h = (r[len - 1] - r[0]) / (len - 1) as f64;
        if !(h > 0.0) || r[0] < 0.0 {
            return Err(RadialError::GridMismatch("radii must increase from a non-negative start".into()));
        }
        for (i, ri) in r.iter().enumerate() {
            if (ri - (r[0] + i as f64 * h)).abs() > 1e-9 * r[len - 1] {
                return Err(RadialError::GridMismatch(format!("grid is not uniform at node {i}")));
            }
        }
        let (v, dv) = match pair {
            Some((v, dv)) => (Some(v), Some(dv)),
            None => (None, None),
        };
        Ok(RadialSolution { n, alpha: u[0], beta: v.as_ref().map(|v| v[0]), r, u, du, v, dv, iterations: 0 })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn is_pair(&self) -> bool {
        self.v.is_some()
    }

    pub fn radius(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    pub fn spacing(&self) -> f64 {
        (self.radius() - self.r[0]) / (self.len() - 1) as f64
    }

    /// `(u(R), v(R))`, with `v(R) = 0` for a scalar solution.
    pub fn boundary_values(&self) -> (f64, f64) {
        let last = self.len() - 1;
        (self.u[last], self.v.as_ref().map_or(0.0, |v| v[last]))
    }

    /// Every `stride`-th node; the end points are kept.
    pub fn decimate(&self, stride: usize) -> Result<Self, RadialError> {
        if stride == 0 || !(self.len() - 1).is_multiple_of(stride) || (self.len() - 1) / stride < 2 {
            return Err(RadialError::GridMismatch(format!(
                "stride {stride} does not divide {} intervals",
                self.len() - 1
            )));
        }
        let pick = |xs: &Vec<f64>| xs.iter().step_by(stride).copied().collect::<Vec<_>>();
        Ok(RadialSolution {
            r: pick(&self.r),
            u: pick(&self.u),
            du: pick(&self.du),
            v: self.v.as_ref().map(pick),
            dv: self.dv.as_ref().map(pick),
            ..self.clone()
        })
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), RadialError> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| RadialError::Csv(e.to_string());
        if self.is_pair() {
            out.write_record(["r", "u", "du", "v", "dv"]).map_err(csv_err)?;
        } else {
            out.write_record(["r", "u", "du"]).map_err(csv_err)?;
        }
        for i in 0..self.len() {
            let mut row = vec![self.r[i], self.u[i], self.du[i]];
            if let (Some(v), Some(dv)) = (&self.v, &self.dv) {
                row.extend([v[i], dv[i]]);
            }
            out.write_record(row.iter().map(|x| x.to_string())).map_err(csv_err)?;
        }
        out.flush().map_err(|e| RadialError::Csv(e.to_string()))
    }

    pub fn read_csv<R: io::Read>(n: usize, rd: R) -> Result<Self, RadialError> {
        let mut input = csv::Reader::from_reader(rd);
        let headers: Vec<String> =
            input.headers().map_err(|e| RadialError::Csv(e.to_string()))?.iter().map(str::to_string).collect();
        let pair = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["r", "u", "du"] => false,
            ["r", "u", "du", "v", "dv"] => true,
            other => return Err(RadialError::Csv(format!("unexpected columns {other:?}"))),
        };
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (line, record) in input.records().enumerate() {
            let record = record.map_err(|e| RadialError::Csv(e.to_string()))?;
            for (c, field) in record.iter().enumerate() {
                let x: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| RadialError::Csv(format!("row {}: not a number: {field}", line + 2)))?;
                cols[c].push(x);
            }
        }
        let mut cols = cols.into_iter();
        let mut next = || cols.next().unwrap_or_default();
        let (r, u, du) = (next(), next(), next());
        let extra = if pair { Some((next(), next())) } else { None };
        Self::from_samples(n, r, u, du, extra)
    }
}

fn sample_grid(
    traj: &RadialTrajectory,
    n: usize,
    radius: f64,
    points: usize,
    iterations: usize,
) -> Result<RadialSolution, RadialError> {
    let mut r = Vec::with_capacity(points);
    let mut u = Vec::with_capacity(points);
    let mut du = Vec::with_capacity(points);
    let mut v = Vec::with_capacity(points);
    let mut dv = Vec::with_capacity(points);
    for i in 0..points {
        let ri = if i + 1 == points { radius } else { radius * i as f64 / (points - 1) as f64 };
        let end = traj.end_radius();
        let s = match traj.at(ri) {
            Some(s) => s,
            // Stopped at a zero a rounding distance short of R.
            None if ri - end <= 1e-8 * radius => {
                let mut s = traj.at(end).expect("end of trajectory");
                let gap = ri - end;
                s.r = ri;
                s.u += gap * s.du;
                if let (Some(v), Some(dv)) = (s.v.as_mut(), s.dv) {
                    *v += gap * dv;
                }
                s
            }
            None => {
                return Err(RadialError::GridMismatch(format!("trajectory ends at {end} before r = {ri}")));
            }
        };
        r.push(ri);
        u.push(s.u);
        du.push(s.du);
        if let (Some(a), Some(b)) = (s.v, s.dv) {
            v.push(a);
            dv.push(b);
        }
    }
    // A rounding remainder below zero at R would break fractional powers.
    let floor = -1e-8 * traj.alpha.max(traj.beta.unwrap_or(0.0)).max(1.0);
    for end in [u.last_mut(), v.last_mut()].into_iter().flatten() {
        if *end < 0.0 && *end >= floor {
            *end = 0.0;
        }
    }
    Ok(RadialSolution {
        n,
        r,
        u,
        du,
        v: traj.beta.map(|_| v),
        dv: traj.beta.map(|_| dv),
        alpha: traj.alpha,
        beta: traj.beta,
        iterations,
    })
}

/// `+1` when the first zero lies beyond `radius` (or does not exist), `-1`
/// when it lies before, `0` when it is within tolerance.
fn side(zero: Option<f64>, radius: f64, tol: f64) -> i8 {
    match zero {
        None => 1,
        Some(rho) if rho >= radius && rho - radius <= tol * radius => 0,
        Some(rho) if rho >= radius => 1,
        Some(_) => -1,
    }
}

/// Outcome of a one-parameter bracket search followed by log-bisection.
struct Bisection {
    /// Start on the outer side (`rho >= R`), as close to `R` as reached.
    outer: RadialTrajectory,
    iterations: usize,
    converged: bool,
}

/// Scans `grid` for a sign change of `probe` (the first one, or the last
/// when `last`), then bisects in `log t` until `probe` reports 0 or the
/// bracket collapses. `None` when no bracket exists.
fn bracket_and_bisect<P>(
    grid: &[f64],
    max_iter: usize,
    parallel: bool,
    last: bool,
    probe: P,
) -> Result<Option<Bisection>, RadialError>
where
    P: Fn(f64) -> Result<(i8, RadialTrajectory), RadialError> + Sync,
{
    let scanned: Result<Vec<(i8, RadialTrajectory)>, RadialError> =
        if parallel { grid.par_iter().map(|&t| probe(t)).collect() } else { grid.iter().map(|&t| probe(t)).collect() };
    let mut scanned = scanned?;
    let hit = if last { scanned.iter().rposition(|(s, _)| *s == 0) } else { scanned.iter().position(|(s, _)| *s == 0) };
    if let Some(i) = hit {
        return Ok(Some(Bisection { outer: scanned.swap_remove(i).1, iterations: 0, converged: true }));
    }
    let change = |&i: &usize| scanned[i].0 != scanned[i + 1].0;
    let found = if last { (0..grid.len() - 1).rev().find(change) } else { (0..grid.len() - 1).find(change) };
    let Some(i) = found else {
        return Ok(None);
    };
    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    let lo_side = scanned[i].0;
    let mut outer = if lo_side > 0 { scanned.swap_remove(i).1 } else { scanned.swap_remove(i + 1).1 };
    for iteration in 1..=max_iter {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            return Ok(Some(Bisection { outer, iterations: iteration, converged: false }));
        }
        let (s, t) = probe(mid)?;
        if s == 0 {
            return Ok(Some(Bisection { outer: t, iterations: iteration, converged: true }));
        }
        if s == lo_side {
            lo = mid;
        } else {
            hi = mid;
        }
        if s > 0 {
            outer = t;
        }
    }
    Ok(Some(Bisection { outer, iterations: max_iter, converged: false }))
}

fn no_bracket(radius: f64, cfg: &ShootingConfig) -> RadialError {
    RadialError::NoBracket { radius, alpha_min: cfg.alpha_min, alpha_max: cfg.alpha_max, points: cfg.alpha_points }
}

/// Finds `alpha` with first zero at `R` by a logarithmic bracket search
/// followed by bisection in `log(alpha)`.
pub fn shoot_scalar(p: &RadialProblem, cfg: &ShootingConfig) -> Result<RadialSolution, RadialError> {
    if p.is_pair() {
        return Err(RadialError::WrongKind { expected: "scalar" });
    }
    cfg.validate()?;
    let radius = p.radius;
    let horizon = cfg.bracket_horizon * radius;
    let probe = |alpha: f64| -> Result<(i8, RadialTrajectory), RadialError> {
        let t = run(p, alpha, None, horizon, cfg, true)?;
        Ok((side(t.first_zero(), radius, cfg.radius_tol), t))
    };
    let found = bracket_and_bisect(&cfg.alpha_grid(), cfg.max_bisection, true, false, probe)?
        .ok_or_else(|| no_bracket(radius, cfg))?;
    // After a collapsed bracket the outer end is as close as the ODE
    // tolerance allows; accept it when it is still near R.
    let rho = found.outer.first_zero().unwrap_or(f64::INFINITY);
    if found.converged || (rho - radius).abs() <= 1e3 * cfg.radius_tol * radius {
        return sample_grid(&found.outer, p.n, radius, cfg.grid_points, found.iterations);
    }
    Err(RadialError::NoConvergence {
        iterations: found.iterations,
        residual: (rho - radius).abs(),
        reason: "bisection exhausted before the first zero reached R".into(),
    })
}

/// `(u(R), v(R))` from a full integration to `R`, or `None` when the
/// integration cannot reach `R`.
fn boundary_map(
    p: &RadialProblem,
    alpha: f64,
    beta: f64,
    cfg: &ShootingConfig,
) -> Result<Option<[f64; 2]>, RadialError> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Ok(None);
    }
    let t = run(p, alpha, Some(beta), p.radius, cfg, false)?;
    let y = &t.inner.y_end;
    Ok(match t.termination {
        Termination::Reached => Some([y[0], y[2]]),
        // A fractional power stopped at a zero short of R. Beyond it the
        // nonlinearity is continued by zero (its value at 0), which keeps the
        // map continuous for Newton; over a short gap that is a linear continuation.
        Termination::DomainError { r, .. } if p.radius - r <= 0.05 * p.radius => {
            let gap = p.radius - r;
            Some([y[0] + gap * y[1], y[2] + gap * y[3]])
        }
        _ => None,
    })
}

/// Joint zero of a pair: the inner height at which `u` and `v` reach zero
/// together for a fixed outer height.
#[derive(Clone, Debug)]
enum JointZero {
    At {
        inner: f64,
        rho: f64,
    },
    /// Near the joint start neither component vanishes before the horizon.
    Beyond {
        inner: f64,
    },
}

impl JointZero {
    fn inner(&self) -> f64 {
        match *self {
            JointZero::At { inner, .. } | JointZero::Beyond { inner } => inner,
        }
    }
}

/// Which height the outer search varies.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Outer {
    Alpha,
    Beta,
}

impl Outer {
    fn heights(self, outer: f64, inner: f64) -> (f64, f64) {
        match self {
            Outer::Alpha => (outer, inner),
            Outer::Beta => (inner, outer),
        }
    }
}

/// Bisection in the log of the inner height on which component vanishes
/// first: a small inner height lets its own component reach zero first, a
/// large one drives the other component to zero first. The joint zero is
/// the largest first-zero radius over the inner height. `None` when no sign
/// change exists in the height window.
fn joint_zero(
    p: &RadialProblem,
    which: Outer,
    outer: f64,
    guess: Option<f64>,
    horizon: f64,
    cfg: &ShootingConfig,
    rel_tol: f64,
) -> Result<Option<JointZero>, RadialError> {
    let (lo_lim, hi_lim) = (cfg.alpha_min * 1e-3, cfg.alpha_max * 1e3);
    // +1 when the inner component vanishes first.
    let probe = |inner: f64| -> Result<(i8, f64), RadialError> {
        let (alpha, beta) = which.heights(outer, inner);
        let t = run(p, alpha, Some(beta), horizon, cfg, true)?;
        Ok(match t.first_zero() {
            None => (0, f64::INFINITY),
            Some(rho) => {
                let y = &t.inner.y_end;
                let v_first = y[0] > y[2];
                (if v_first == (which == Outer::Alpha) { 1 } else { -1 }, rho)
            }
        })
    };
    let b0 = guess.unwrap_or(outer).clamp(lo_lim, hi_lim);
    let (s0, r0) = probe(b0)?;
    if s0 == 0 {
        return Ok(Some(JointZero::Beyond { inner: b0 }));
    }
    let factor = if s0 > 0 { 4.0 } else { 0.25 };
    let (mut a, mut ra) = (b0, r0);
    let (mut b, mut rb);
    loop {
        b = a * factor;
        if b < lo_lim || b > hi_lim {
            return Ok(None);
        }
        let (s, r) = probe(b)?;
        if s == 0 {
            return Ok(Some(JointZero::Beyond { inner: b }));
        }
        rb = r;
        if s != s0 {
            break;
        }
        a = b;
        ra = r;
    }
    let (mut lo, mut hi, mut r_lo, mut r_hi) = if a < b { (a, b, ra, rb) } else { (b, a, rb, ra) };
    for _ in 0..200 {
        if hi / lo - 1.0 < rel_tol {
            break;
        }
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let (s, r) = probe(mid)?;
        if s == 0 {
            return Ok(Some(JointZero::Beyond { inner: mid }));
        }
        if s > 0 {
            lo = mid;
            r_lo = r;
        } else {
            hi = mid;
            r_hi = r;
        }
    }
    Ok(Some(JointZero::At { inner: (lo * hi).sqrt(), rho: r_lo.max(r_hi) }))
}

/// Scans the outer height over the search grid for a sign change of
/// `rho - R`, continuing the inner height from one point to the next, and
/// bisects until the bracket is tight enough for Newton. Returns `(alpha, beta)`.
fn joint_start(p: &RadialProblem, which: Outer, cfg: &ShootingConfig) -> Result<Option<(f64, f64)>, RadialError> {
    let radius = p.radius;
    let horizon = cfg.bracket_horizon * radius;
    let side_of = |z: &JointZero| match *z {
        JointZero::At { rho, .. } if (rho - radius).abs() <= cfg.radius_tol * radius => 0,
        JointZero::At { rho, .. } if rho > radius => 1,
        JointZero::At { .. } => -1,
        JointZero::Beyond { .. } => 1,
    };
    // A joint zero is genuine when tightening the inner bisection leaves its
    // radius in place. Near a solution that stays positive for all r the
    // "joint zero" is only an artifact of the bisection tolerance and grows
    // as it is tightened; such points count as lying beyond R.
    let evaluate = |a: f64, guess: Option<f64>| -> Result<Option<(JointZero, i8)>, RadialError> {
        let Some(z) = joint_zero(p, which, a, guess, horizon, cfg, 1e-6)? else {
            return Ok(None);
        };
        let s = side_of(&z);
        let JointZero::At { inner, rho } = z else {
            return Ok(Some((z, s)));
        };
        if s > 0 {
            return Ok(Some((z, s)));
        }
        let tight = joint_zero(p, which, a, Some(inner), horizon, cfg, 1e-12)?;
        Ok(match tight {
            Some(t @ JointZero::At { rho: rt, .. }) if (rt - rho).abs() <= 1e-3 * rt => {
                let s = side_of(&t);
                Some((t, s))
            }
            Some(t) => Some((t, 1)),
            None => None,
        })
    };
    let mut prev: Option<(f64, JointZero, i8)> = None;
    let mut bracket = None;
    for a in cfg.alpha_grid() {
        let guess = prev.as_ref().map(|(_, z, _)| z.inner());
        let Some((z, s)) = evaluate(a, guess)? else {
            prev = None;
            continue;
        };
        if let Some((pa, pz, ps)) = prev.take() {
            if s != ps {
                bracket = Some((pa, pz, a, z, ps));
                break;
            }
        }
        prev = Some((a, z, s));
    }
    let Some((mut lo, mut lo_z, mut hi, mut hi_z, lo_side)) = bracket else {
        return Ok(None);
    };
    for _ in 0..40 {
        if hi / lo - 1.0 < 1e-6 {
            break;
        }
        let mid = (lo * hi).sqrt();
        let guess = (lo_z.inner() * hi_z.inner()).sqrt();
        let Some(z) = joint_zero(p, which, mid, Some(guess), horizon, cfg, 1e-12)? else { break };
        let s = side_of(&z);
        if s == 0 {
            (lo, hi) = (mid, mid);
            (lo_z, hi_z) = (z.clone(), z);
            break;
        }
        if s == lo_side {
            (lo, lo_z) = (mid, z);
        } else {
            (hi, hi_z) = (mid, z);
        }
    }
    Ok(Some(which.heights((lo * hi).sqrt(), (lo_z.inner() * hi_z.inner()).sqrt())))
}

/// Two-parameter shooting. For each `alpha` a bisection in `beta` finds the
/// start whose components vanish together; a scan and bisection in `alpha`
/// put that joint zero at `R` (with the roles of `alpha` and `beta` swapped
/// when `alpha` finds no bracket), and damped Newton on
/// `(alpha, beta) -> (u(R), v(R))` with a finite-difference Jacobian
/// polishes the result.
pub fn shoot_pair(p: &RadialProblem, cfg: &ShootingConfig) -> Result<RadialSolution, RadialError> {
    if !p.is_pair() {
        return Err(RadialError::WrongKind { expected: "pair" });
    }
    cfg.validate()?;
    let radius = p.radius;
    let start = match joint_start(p, Outer::Alpha, cfg)? {
        Some(s) => s,
        None => joint_start(p, Outer::Beta, cfg)?.ok_or_else(|| no_bracket(radius, cfg))?,
    };
    let (mut alpha, mut beta) = start;

    let no_reach = |iterations, reason: &str| RadialError::NoConvergence {
        iterations,
        residual: f64::INFINITY,
        reason: reason.to_string(),
    };
    let mut fx = boundary_map(p, alpha, beta, cfg)?.ok_or_else(|| no_reach(0, "start cannot be integrated to R"))?;
    let norm = |v: [f64; 2]| v[0].abs().max(v[1].abs());
    let mut iterations = 0;
    loop {
        let tol = cfg.boundary_tol * alpha.max(beta);
        if norm(fx) <= tol {
            break;
        }
        if iterations >= cfg.max_newton {
            return Err(RadialError::NoConvergence {
                iterations,
                residual: norm(fx),
                reason: "Newton iteration cap reached".into(),
            });
        }
        iterations += 1;
        let da = defaults::JACOBIAN_STEP * (1.0 + alpha.abs());
        let db = defaults::JACOBIAN_STEP * (1.0 + beta.abs());
        let fa =
            boundary_map(p, alpha + da, beta, cfg)?.ok_or_else(|| no_reach(iterations, "Jacobian probe failed"))?;
        let fb =
            boundary_map(p, alpha, beta + db, cfg)?.ok_or_else(|| no_reach(iterations, "Jacobian probe failed"))?;
        let j = [[(fa[0] - fx[0]) / da, (fb[0] - fx[0]) / db], [(fa[1] - fx[1]) / da, (fb[1] - fx[1]) / db]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !det.is_finite() || det == 0.0 {
            return Err(RadialError::NoConvergence {
                iterations,
                residual: norm(fx),
                reason: "singular shooting Jacobian".into(),
            });
        }
        let step_a = -(j[1][1] * fx[0] - j[0][1] * fx[1]) / det;
        let step_b = -(-j[1][0] * fx[0] + j[0][0] * fx[1]) / det;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let (a, b) = (alpha + lambda * step_a, beta + lambda * step_b);
            if let Some(f) = boundary_map(p, a, b, cfg)? {
                if norm(f) < (1.0 - 1e-4 * lambda) * norm(fx) {
                    accepted = Some((a, b, f));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((a, b, f)) = accepted else {
            return Err(RadialError::NoConvergence {
                iterations,
                residual: norm(fx),
                reason: "step halving found no decrease".into(),
            });
        };
        alpha = a;
        beta = b;
        fx = f;
    }

    let traj = run(p, alpha, Some(beta), radius, cfg, false)?;
    let sol = sample_grid(&traj, p.n, radius, cfg.grid_points, iterations)?;
    let (v, last) = (sol.v.as_ref().expect("pair solution"), sol.len() - 1);
    if let Some(i) = (0..last).find(|&i| sol.u[i] <= 0.0 || v[i] <= 0.0) {
        return Err(RadialError::PositivityLost { r: sol.r[i] });
    }
    let interior = traj.samples();
    if let Some(s) = interior.iter().find(|s| s.r < radius * (1.0 - 1e-9) && (s.u <= 0.0 || s.v.unwrap_or(1.0) <= 0.0))
    {
        return Err(RadialError::PositivityLost { r: s.r });
    }
    Ok(sol)
}

/// Initial data for a probe: `alpha`, plus `beta` for pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeStart {
    pub alpha: f64,
    pub beta: Option<f64>,
}

impl ProbeStart {
    pub fn scalar(alpha: f64) -> Self {
        ProbeStart { alpha, beta: None }
    }

    pub fn pair(alpha: f64, beta: f64) -> Self {
        ProbeStart { alpha, beta: Some(beta) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeOutcome {
    CrossedZero { r: f64 },
    PositiveToHorizon,
    BlowUp { r: f64 },
    Failed { r: f64, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub start: ProbeStart,
    pub outcome: ProbeOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub horizon: f64,
    pub entries: Vec<ProbeEntry>,
}

impl ProbeReport {
    /// Whether some start attains a zero, i.e. a candidate Dirichlet radius.
    pub fn any_zero(&self) -> bool {
        self.entries.iter().any(|e| matches!(e.outcome, ProbeOutcome::CrossedZero { .. }))
    }

    pub fn all_zero(&self) -> bool {
        self.entries.iter().all(|e| matches!(e.outcome, ProbeOutcome::CrossedZero { .. }))
    }

    pub fn summary(&self) -> String {
        let zeros = self.entries.iter().filter(|e| matches!(e.outcome, ProbeOutcome::CrossedZero { .. })).count();
        if zeros == 0 {
            format!("no zero found up to r = {} ({} starts)", self.horizon, self.entries.len())
        } else {
            format!("{zeros} of {} starts reach zero before r = {}", self.entries.len(), self.horizon)
        }
    }
}

/// Integrates every start up to `horizon` and records where each trajectory ends.
pub fn positivity_probe(
    p: &RadialProblem,
    starts: &[ProbeStart],
    horizon: f64,
    cfg: &ShootingConfig,
) -> Result<ProbeReport, RadialError> {
    if starts.is_empty() {
        return Err(RadialError::InvalidStart("probe grid is empty".into()));
    }
    if starts.iter().any(|s| s.beta.is_some() != p.is_pair()) {
        return Err(RadialError::InvalidStart("probe starts do not match the problem kind".into()));
    }
    let entries: Result<Vec<ProbeEntry>, RadialError> = starts
        .par_iter()
        .map(|&start| {
            let t = run(p, start.alpha, start.beta, horizon, cfg, true)?;
            let outcome = match (t.first_zero(), &t.termination) {
                (Some(r), _) => ProbeOutcome::CrossedZero { r },
                (None, Termination::Reached) => ProbeOutcome::PositiveToHorizon,
                (None, Termination::BlowUp { r }) => ProbeOutcome::BlowUp { r: *r },
                (None, Termination::DomainError { r, message }) => {
                    ProbeOutcome::Failed { r: *r, message: message.clone() }
                }
                (None, Termination::StepFailure { r }) => {
                    ProbeOutcome::Failed { r: *r, message: "integrator step failure".into() }
                }
                (None, Termination::ZeroCrossing { r }) => ProbeOutcome::CrossedZero { r: *r },
            };
            Ok(ProbeEntry { start, outcome })
        })
        .collect();
    Ok(ProbeReport { horizon, entries: entries? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, SymbolSet};

    fn scalar(n: usize, radius: f64, f: &str) -> RadialProblem {
        RadialProblem::scalar(n, radius, parse(f, &SymbolSet::radial_scalar()).unwrap()).unwrap()
    }

    fn pair(n: usize, radius: f64, f: &str, g: &str) -> RadialProblem {
        let set = SymbolSet::radial_pair();
        RadialProblem::pair(n, radius, parse(f, &set).unwrap(), parse(g, &set).unwrap()).unwrap()
    }

    #[test]
    fn constant_source_matches_the_parabola() {
        let p = scalar(3, 1.0, "1");
        let t = integrate_scalar_ivp(&p, 1.0 / 6.0, 2.0, &ShootingConfig::default()).unwrap();
        let rho = t.first_zero().unwrap();
        assert!((rho - 1.0).abs() < 1e-10, "{rho}");
        for s in t.samples() {
            assert!((s.u - (1.0 - s.r * s.r) / 6.0).abs() < 1e-8);
            assert!((s.du + s.r / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_source_gives_sinc() {
        let p = scalar(3, 1.0, "u");
        let t = integrate_scalar_ivp(&p, 1.0, 4.0, &ShootingConfig::default()).unwrap();
        assert!((t.first_zero().unwrap() - std::f64::consts::PI).abs() < 1e-9);
        for r in [0.0, 1e-7, 0.5, 1.0, 2.0, 3.0] {
            let s = t.at(r).unwrap();
            let exact = if r == 0.0 { 1.0 } else { r.sin() / r };
            assert!((s.u - exact).abs() < 1e-9, "r = {r}");
        }
    }

    #[test]
    fn cubic_crosses_zero() {
        let p = scalar(3, 1.0, "u^3");
        let t = integrate_scalar_ivp(&p, 10.0, 10.0, &ShootingConfig::default()).unwrap();
        let rho = t.first_zero().expect("crossing");
        // Scaling: alpha^(-1) times the first zero of the alpha = 1 solution.
        let unit = integrate_scalar_ivp(&p, 1.0, 10.0, &ShootingConfig::default()).unwrap();
        assert!((rho * 10.0 - unit.first_zero().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn shooting_recovers_the_constant_source_height() {
        let sol = shoot_scalar(&scalar(3, 1.0, "1"), &ShootingConfig::default()).unwrap();
        assert!((sol.alpha - 1.0 / 6.0).abs() < 1e-8);
        assert_eq!(sol.len(), 2049);
        assert_eq!(sol.r[2048], 1.0);
        assert!(sol.boundary_values().0.abs() < 1e-10);
        assert!((sol.u[1024] - (1.0 - 0.25) / 6.0).abs() < 1e-10);
    }

    #[test]
    fn cubic_shooting_is_self_consistent() {
        let p = scalar(3, 1.0, "u^3");
        let cfg = ShootingConfig::default();
        let sol = shoot_scalar(&p, &cfg).unwrap();
        assert!(sol.u[..sol.len() - 1].iter().all(|&u| u > 0.0));
        let t = run(&p, sol.alpha, None, 1.0, &cfg, false).unwrap();
        assert!(t.inner.y_end[0].abs() < 1e-8);
    }

    #[test]
    fn supercritical_power_has_no_bracket() {
        let err = shoot_scalar(&scalar(3, 1.0, "u^6"), &ShootingConfig::default()).unwrap_err();
        assert!(matches!(err, RadialError::NoBracket { .. }), "{err}");
    }

    #[test]
    fn pair_with_constant_sources() {
        let p = pair(3, 1.0, "1", "1");
        let t = integrate_pair_ivp(&p, 1.0 / 6.0, 1.0 / 6.0, 2.0, &ShootingConfig::default()).unwrap();
        assert!((t.first_zero().unwrap() - 1.0).abs() < 1e-10);
        let sol = shoot_pair(&p, &ShootingConfig::default()).unwrap();
        assert!((sol.alpha - 1.0 / 6.0).abs() < 1e-8);
        assert!((sol.beta.unwrap() - 1.0 / 6.0).abs() < 1e-8);
    }

    #[test]
    fn linear_pair_reduces_to_sinc() {
        let p = pair(3, 1.0, "v", "u");
        let t = integrate_pair_ivp(&p, 1.0, 1.0, 3.0, &ShootingConfig::default()).unwrap();
        for s in t.samples() {
            let exact = s.r.sin() / s.r;
            assert!((s.u - exact).abs() < 1e-9 && (s.v.unwrap() - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_cubic_pair_stays_on_the_diagonal() {
        let p = pair(3, 1.0, "v^3", "u^3");
        let t = integrate_pair_ivp(&p, 1.0, 1.0, 10.0, &ShootingConfig::default()).unwrap();
        for s in t.samples() {
            assert_eq!(s.u, s.v.unwrap());
        }
    }

    #[test]
    fn symmetric_pair_shoots_to_the_scalar_height() {
        let cfg = ShootingConfig::default();
        let s = shoot_scalar(&scalar(3, 1.0, "u^3"), &cfg).unwrap();
        let q = shoot_pair(&pair(3, 1.0, "v^3", "u^3"), &cfg).unwrap();
        assert!((q.alpha - s.alpha).abs() < 1e-7 * s.alpha, "{} vs {}", q.alpha, s.alpha);
        assert!((q.beta.unwrap() - s.alpha).abs() < 1e-7 * s.alpha);
    }

    #[test]
    fn mixed_pair_converges() {
        let p = pair(3, 1.0, "v", "u^2");
        let cfg = ShootingConfig::default();
        let sol = shoot_pair(&p, &cfg).unwrap();
        let f = boundary_map(&p, sol.alpha, sol.beta.unwrap(), &cfg).unwrap().unwrap();
        assert!(f[0].abs() <= 1e-8 && f[1].abs() <= 1e-8, "{f:?}");
    }

    #[test]
    fn probes_separate_sub_and_supercritical_powers() {
        let cfg = ShootingConfig::default();
        let starts: Vec<ProbeStart> = [0.1, 1.0, 10.0, 100.0].into_iter().map(ProbeStart::scalar).collect();
        let sup = positivity_probe(&scalar(3, 1.0, "u^6"), &starts, 100.0, &cfg).unwrap();
        assert!(sup.entries.iter().all(|e| e.outcome == ProbeOutcome::PositiveToHorizon), "{sup:?}");
        assert!(!sup.any_zero());
        let sub = positivity_probe(&scalar(3, 1.0, "u^3"), &starts, 100.0, &cfg).unwrap();
        assert!(sub.all_zero(), "{sub:?}");
        let one = positivity_probe(&scalar(3, 1.0, "1"), &[ProbeStart::scalar(1.0 / 6.0)], 2.0, &cfg).unwrap();
        match one.entries[0].outcome {
            ProbeOutcome::CrossedZero { r } => assert!((r - 1.0).abs() < 1e-10),
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fractional_power_reaches_zero_through_domain_stop() {
        let p = scalar(3, 1.0, "u^0.5");
        let sol = shoot_scalar(&p, &ShootingConfig::default()).unwrap();
        assert!(sol.boundary_values().0.abs() < 1e-8);
    }

    #[test]
    fn csv_round_trip_and_decimation() {
        let sol = shoot_pair(&pair(3, 1.0, "1", "1"), &ShootingConfig::default()).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("r,u,du,v,dv\n"));
        let back = RadialSolution::read_csv(3, buf.as_slice()).unwrap();
        assert_eq!(back.u, sol.u);
        assert_eq!(back.dv, sol.dv);
        let coarse = sol.decimate(32).unwrap();
        assert_eq!(coarse.len(), 65);
        assert_eq!(coarse.radius(), 1.0);
        assert!(sol.decimate(3).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let set = SymbolSet::radial_pair();
        assert!(RadialProblem::scalar(1, 1.0, parse("u", &set).unwrap()).is_err());
        assert!(RadialProblem::scalar(3, 0.0, parse("u", &set).unwrap()).is_err());
        assert!(RadialProblem::scalar(3, 1.0, parse("v", &set).unwrap()).is_err());
        let p = scalar(3, 1.0, "u");
        assert!(integrate_scalar_ivp(&p, -1.0, 1.0, &ShootingConfig::default()).is_err());
        assert!(integrate_pair_ivp(&p, 1.0, 1.0, 1.0, &ShootingConfig::default()).is_err());
    }
}
