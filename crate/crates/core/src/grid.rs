//! Finite-difference Newton solver for `Δu + f(x,u) = 0` on the centered
//! rectangle `(-a1, a1) × (-a2, a2)` with `u = 0` on the boundary.
//!
//! Nodal values are stored row-major: `u[j * (n1 + 1) + i]` sits at
//! `(x1_i, x2_j) = (-a1 + i h1, -a2 + j h2)`.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::expr::{Binding, ExprError, ExprNode, Symbol};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid Newton configuration: {0}")]
    InvalidConfig(String),
    #[error("f may not depend on {0}")]
    InvalidSymbol(Symbol),
    #[error("cannot evaluate at node ({i}, {j}): {source}")]
    Node { i: usize, j: usize, source: ExprError },
    #[error("nodal vector has {got} entries, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("solution is not strictly positive inside (minimum {min:e} at node ({i}, {j}))")]
    NonPositive { min: f64, i: usize, j: usize },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectDomain {
    pub a1: f64,
    pub a2: f64,
}

impl RectDomain {
    pub fn new(a1: f64, a2: f64) -> Result<Self, GridError> {
        if !(a1.is_finite() && a1 > 0.0 && a2.is_finite() && a2 > 0.0) {
            return Err(GridError::InvalidDomain(format!("half-widths must be positive, got {a1}, {a2}")));
        }
        Ok(RectDomain { a1, a2 })
    }

    /// The unit square `(-1/2, 1/2)²`.
    pub fn unit_square() -> Self {
        RectDomain { a1: 0.5, a2: 0.5 }
    }

    /// Uniform mesh with `n1 × n2` intervals.
    pub fn mesh(&self, n1: usize, n2: usize) -> Result<RectGrid, GridError> {
        if n1 < 2 || n2 < 2 {
            return Err(GridError::InvalidDomain(format!("need at least 2 intervals per side, got {n1} × {n2}")));
        }
        Ok(RectGrid { domain: *self, n1, n2 })
    }

    /// Mesh with `points` nodes per side.
    pub fn mesh_points(&self, points: usize) -> Result<RectGrid, GridError> {
        self.mesh(points.saturating_sub(1), points.saturating_sub(1))
    }
}

/// A rectangle together with its uniform mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectGrid {
    pub domain: RectDomain,
    pub n1: usize,
    pub n2: usize,
}

impl RectGrid {
    pub fn h1(&self) -> f64 {
        2.0 * self.domain.a1 / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        2.0 * self.domain.a2 / self.n2 as f64
    }

    pub fn x1(&self, i: usize) -> f64 {
        if i == self.n1 {
            self.domain.a1
        } else {
            -self.domain.a1 + i as f64 * self.h1()
        }
    }

    pub fn x2(&self, j: usize) -> f64 {
        if j == self.n2 {
            self.domain.a2
        } else {
            -self.domain.a2 + j as f64 * self.h2()
        }
    }

    pub fn len(&self) -> usize {
        (self.n1 + 1) * (self.n2 + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.n1 + 1) + i
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n1 || j == self.n2
    }

    fn interior_index(&self, i: usize, j: usize) -> usize {
        (j - 1) * (self.n1 - 1) + (i - 1)
    }

    fn interior_len(&self) -> usize {
        (self.n1 - 1) * (self.n2 - 1)
    }

    fn binding(&self, i: usize, j: usize, u: f64) -> Binding {
        let (x1, x2) = (self.x1(i), self.x2(j));
        Binding::new().with(Symbol::X(0), x1).with(Symbol::X(1), x2).with(Symbol::R, x1.hypot(x2)).with(Symbol::U(0), u)
    }

    /// `f` at every node for the nodal field `u`.
    pub fn evaluate_nodes(&self, e: &ExprNode, u: &[f64]) -> Result<Vec<f64>, GridError> {
        self.check_shape(u)?;
        let rows: Result<Vec<Vec<f64>>, GridError> = (0..=self.n2)
            .into_par_iter()
            .map(|j| {
                (0..=self.n1)
                    .map(|i| {
                        e.evaluate(&self.binding(i, j, u[self.index(i, j)])).map_err(|source| GridError::Node {
                            i,
                            j,
                            source,
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(rows?.concat())
    }

    fn check_shape(&self, u: &[f64]) -> Result<(), GridError> {
        if u.len() != self.len() {
            return Err(GridError::Shape { got: u.len(), expected: self.len() });
        }
        Ok(())
    }

    fn laplacian_at(&self, u: &[f64], i: usize, j: usize) -> f64 {
        let (h1, h2) = (self.h1(), self.h2());
        let c = u[self.index(i, j)];
        (u[self.index(i - 1, j)] - 2.0 * c + u[self.index(i + 1, j)]) / (h1 * h1)
            + (u[self.index(i, j - 1)] - 2.0 * c + u[self.index(i, j + 1)]) / (h2 * h2)
    }
}

fn check_symbols(f: &ExprNode) -> Result<(), GridError> {
    let allowed = [Symbol::X(0), Symbol::X(1), Symbol::R, Symbol::U(0)];
    match f.free_symbols().into_iter().find(|s| !allowed.contains(s)) {
        Some(s) => Err(GridError::InvalidSymbol(s)),
        None => Ok(()),
    }
}

/// Five-point residual `Δ_h u + f(x,u)` at interior nodes; boundary entries are 0.
pub fn assemble_residual(grid: &RectGrid, f: &ExprNode, u: &[f64]) -> Result<Vec<f64>, GridError> {
    check_symbols(f)?;
    let fv = grid.evaluate_nodes(f, u)?;
    let mut r = vec![0.0; grid.len()];
    r.par_chunks_mut(grid.n1 + 1).enumerate().for_each(|(j, row)| {
        if j == 0 || j == grid.n2 {
            return;
        }
        for (i, ri) in row.iter_mut().enumerate().take(grid.n1).skip(1) {
            *ri = grid.laplacian_at(u, i, j) + fv[grid.index(i, j)];
        }
    });
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Banded LDLᵀ up to [`defaults::BANDED_MAX_INTERVALS`] intervals per side, CG beyond.
    Auto,
    Banded,
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialGuess {
    /// The solution of `Δu + f(x,0) = 0`; when that vanishes, the
    /// Galerkin-scaled first eigenfunction if the scaling has a positive root.
    Auto,
    Linear,
    /// `amplitude · cos(π x1 / 2a1) cos(π x2 / 2a2)`.
    Bump {
        amplitude: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Max-norm tolerance on the discrete residual. When Newton stalls below
    /// the rounding floor `64 ε |u|_∞ (2/h1² + 2/h2²)` of the stencil, the
    /// iterate is accepted.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings tried before an iteration counts as stalled.
    pub max_halvings: usize,
    pub solver: LinearSolver,
    pub cg_tol: f64,
    /// Load steps `λ f`, `λ = 1/k .. 1`, tried when plain Newton stalls; 0 disables.
    pub continuation_steps: usize,
    pub initial: InitialGuess,
    /// Turn a non-positive interior into an error instead of a flag.
    pub require_positive: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: defaults::NEWTON_TOL,
            max_iter: defaults::NEWTON_MAX_ITER,
            max_halvings: 30,
            solver: LinearSolver::Auto,
            cg_tol: defaults::CG_REL_TOL,
            continuation_steps: defaults::CONTINUATION_STEPS,
            initial: InitialGuess::Auto,
            require_positive: false,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.tol > 0.0 && self.cg_tol > 0.0) {
            return Err(GridError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(GridError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub grid: RectGrid,
    pub u: Vec<f64>,
    pub newton_iterations: usize,
    /// Max-norm of the discrete residual at the returned iterate.
    pub residual: f64,
    /// Whether every interior node is strictly positive.
    pub positive: bool,
    pub min_interior: f64,
}

impl GridSolution {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.u[self.grid.index(i, j)]
    }

    /// Value at the centre node; requires even interval counts.
    pub fn center(&self) -> Option<f64> {
        (self.grid.n1.is_multiple_of(2) && self.grid.n2.is_multiple_of(2))
            .then(|| self.value(self.grid.n1 / 2, self.grid.n2 / 2))
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), GridError> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| GridError::Csv(e.to_string());
        out.write_record(["x1", "x2", "u"]).map_err(err)?;
        for j in 0..=self.grid.n2 {
            for i in 0..=self.grid.n1 {
                let row = [self.grid.x1(i), self.grid.x2(j), self.value(i, j)];
                out.write_record(row.iter().map(|x| x.to_string())).map_err(err)?;
            }
        }
        out.flush().map_err(|e| GridError::Csv(e.to_string()))
    }

    /// Reads nodal values written by [`GridSolution::write_csv`]. The mesh
    /// is inferred from the distinct coordinates.
    pub fn read_csv<R: io::Read>(rd: R) -> Result<Self, GridError> {
        let mut input = csv::Reader::from_reader(rd);
        let headers = input.headers().map_err(|e| GridError::Csv(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x1", "x2", "u"] {
            return Err(GridError::Csv(format!("expected columns x1,x2,u, got {:?}", headers)));
        }
        let mut rows = Vec::new();
        for (line, record) in input.records().enumerate() {
            let record = record.map_err(|e| GridError::Csv(e.to_string()))?;
            let mut vals = [0.0; 3];
            for (k, field) in record.iter().enumerate().take(3) {
                vals[k] = field
                    .trim()
                    .parse()
                    .map_err(|_| GridError::Csv(format!("row {}: not a number: {field}", line + 2)))?;
            }
            rows.push(vals);
        }
        let n1 = rows.iter().take_while(|r| r[1] == rows[0][1]).count().saturating_sub(1);
        if n1 < 2 || rows.len() % (n1 + 1) != 0 {
            return Err(GridError::Csv("rows do not form a rectangular mesh".into()));
        }
        let n2 = rows.len() / (n1 + 1) - 1;
        let domain =
            RectDomain::new(rows[n1][0], rows[rows.len() - 1][1]).map_err(|e| GridError::Csv(e.to_string()))?;
        let grid = domain.mesh(n1, n2).map_err(|e| GridError::Csv(e.to_string()))?;
        for j in 0..=n2 {
            for i in 0..=n1 {
                let r = rows[grid.index(i, j)];
                let tol = 1e-9 * (domain.a1 + domain.a2);
                if (r[0] - grid.x1(i)).abs() > tol || (r[1] - grid.x2(j)).abs() > tol {
                    return Err(GridError::Csv(format!("node ({i}, {j}) is off the uniform mesh")));
                }
            }
        }
        let u: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let (min_interior, _, _) = interior_min(&grid, &u);
        Ok(GridSolution {
            grid,
            u,
            newton_iterations: 0,
            residual: f64::NAN,
            positive: min_interior > 0.0,
            min_interior,
        })
    }
}

fn interior_min(grid: &RectGrid, u: &[f64]) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for j in 1..grid.n2 {
        for i in 1..grid.n1 {
            let v = u[grid.index(i, j)];
            if v < best.0 {
                best = (v, i, j);
            }
        }
    }
    best
}

/// Symmetric positive (or mildly indefinite) operator `-Δ_h - diag(c)` on interior nodes.
struct Operator<'a> {
    grid: &'a RectGrid,
    shift: Vec<f64>,
}

impl Operator<'_> {
    fn diag(&self, k: usize) -> f64 {
        let (h1, h2) = (self.grid.h1(), self.grid.h2());
        2.0 / (h1 * h1) + 2.0 / (h2 * h2) - self.shift[k]
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.grid;
        let (m1, m2) = (g.n1 - 1, g.n2 - 1);
        let (w1, w2) = (1.0 / (g.h1() * g.h1()), 1.0 / (g.h2() * g.h2()));
        y.par_chunks_mut(m1).enumerate().for_each(|(j, row)| {
            for (i, yi) in row.iter_mut().enumerate() {
                let k = j * m1 + i;
                let mut s = self.diag(k) * x[k];
                if i > 0 {
                    s -= w1 * x[k - 1];
                }
                if i + 1 < m1 {
                    s -= w1 * x[k + 1];
                }
                if j > 0 {
                    s -= w2 * x[k - m1];
                }
                if j + 1 < m2 {
                    s -= w2 * x[k + m1];
                }
                *yi = s;
            }
        });
    }

    /// Banded LDLᵀ without pivoting; half-bandwidth `n1 - 1`.
    fn solve_banded(&self, rhs: &[f64]) -> Result<Vec<f64>, GridError> {
        let g = self.grid;
        let m1 = g.n1 - 1;
        let n = g.interior_len();
        let b = m1;
        let w1 = 1.0 / (g.h1() * g.h1());
        let w2 = 1.0 / (g.h2() * g.h2());
        // Row i holds L[i][i-b..i] at positions 0..b, then A's diagonal at b.
        let width = b + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            let row = &mut band[i * width..(i + 1) * width];
            row[b] = self.diag(i);
            if i % m1 != 0 {
                row[b - 1] = -w1;
            }
            if i >= m1 {
                row[0] = -w2;
            }
        }
        let mut d = vec![0.0; n];
        let mut scaled = vec![0.0; width];
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let off = lo + b - i;
            let (done, rest) = band.split_at_mut(i * width);
            let row = &mut rest[..width];
            // scaled[k + b - i] = L[i][k] d[k], filled left to right.
            for j in lo..i {
                let jo = j + b - i;
                let row_j = &done[j * width..(j + 1) * width];
                let cnt = j - lo;
                let s = row[jo] - dot(&scaled[off..off + cnt], &row_j[lo + b - j..lo + b - j + cnt]);
                scaled[jo] = s;
                row[jo] = s / d[j];
            }
            let di = row[b] - dot(&scaled[off..b], &row[off..b]);
            if !di.is_finite() || di.abs() < 1e-300 {
                return Err(GridError::LinearSolve(format!("zero pivot at unknown {i}")));
            }
            d[i] = di;
        }
        let mut x = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut s = x[i];
            for k in lo..i {
                s -= band[i * width + (k + b - i)] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= d[i];
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= band[k * width + (i + b - k)] * x[k];
            }
            x[i] = s;
        }
        Ok(x)
    }

    /// Jacobi-preconditioned conjugate gradients.
    fn solve_cg(&self, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>, GridError> {
        let n = rhs.len();
        let inv_diag: Vec<f64> = (0..n).map(|k| 1.0 / self.diag(k)).collect();
        let dot = |a: &[f64], b: &[f64]| a.par_iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let target = rel_tol * dot(rhs, rhs).sqrt();
        if target == 0.0 {
            return Ok(x);
        }
        for _ in 0..20 * n.max(100) {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(GridError::LinearSolve("operator is not positive definite; use the banded solver".into()));
            }
            let step = rz / pap;
            x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
            r.par_iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= step * ai);
            if dot(&r, &r).sqrt() <= target {
                return Ok(x);
            }
            z.par_iter_mut().zip(&r).zip(&inv_diag).for_each(|((zi, ri), di)| *zi = ri * di);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        }
        Err(GridError::LinearSolve("conjugate gradients hit the iteration cap".into()))
    }

    fn solve(&self, rhs: &[f64], cfg: &NewtonConfig) -> Result<Vec<f64>, GridError> {
        let banded = match cfg.solver {
            LinearSolver::Banded => true,
            LinearSolver::ConjugateGradient => false,
            LinearSolver::Auto => self.grid.n1.max(self.grid.n2) <= defaults::BANDED_MAX_INTERVALS,
        };
        if banded {
            self.solve_banded(rhs)
        } else {
            self.solve_cg(rhs, cfg.cg_tol)
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

fn interior(grid: &RectGrid, full: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.interior_len());
    for j in 1..grid.n2 {
        for i in 1..grid.n1 {
            out.push(full[grid.index(i, j)]);
        }
    }
    out
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

struct Newton<'a> {
    grid: &'a RectGrid,
    f: ExprNode,
    fu: ExprNode,
    cfg: &'a NewtonConfig,
}

impl Newton<'_> {
    fn residual(&self, u: &[f64], load: f64) -> Result<Vec<f64>, GridError> {
        let mut r = assemble_residual(self.grid, &self.f, u)?;
        if load != 1.0 {
            let fv = self.grid.evaluate_nodes(&self.f, u)?;
            for j in 1..self.grid.n2 {
                for i in 1..self.grid.n1 {
                    let k = self.grid.index(i, j);
                    r[k] -= (1.0 - load) * fv[k];
                }
            }
        }
        Ok(r)
    }

    /// Damped Newton at load `load`; returns iterations and final residual.
    fn run(&self, u: &mut [f64], load: f64) -> Result<(usize, f64), GridError> {
        let g = self.grid;
        let mut r = self.residual(u, load)?;
        let mut norm = max_norm(&r);
        // Rounding in the stencil bounds the attainable residual.
        let stencil = 2.0 / (g.h1() * g.h1()) + 2.0 / (g.h2() * g.h2());
        let floor = |u: &[f64]| 64.0 * f64::EPSILON * stencil * max_norm(u).max(1e-300);
        for it in 0..self.cfg.max_iter {
            if norm <= self.cfg.tol {
                return Ok((it, norm));
            }
            let fu = g.evaluate_nodes(&self.fu, u)?;
            let op = Operator { grid: g, shift: interior(g, &fu).into_iter().map(|c| load * c).collect() };
            let delta = op.solve(&interior(g, &r), self.cfg)?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=self.cfg.max_halvings {
                let mut trial = u.to_vec();
                for j in 1..g.n2 {
                    for i in 1..g.n1 {
                        trial[g.index(i, j)] += lambda * delta[g.interior_index(i, j)];
                    }
                }
                if let Ok(rt) = self.residual(&trial, load) {
                    let nt = max_norm(&rt);
                    if nt.is_finite() && nt < (1.0 - 1e-4 * lambda) * norm {
                        u.copy_from_slice(&trial);
                        r = rt;
                        norm = nt;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                if norm <= floor(u) {
                    return Ok((it, norm));
                }
                return Err(GridError::NoConvergence { iterations: it + 1, residual: norm });
            }
        }
        if norm <= self.cfg.tol.max(floor(u)) {
            Ok((self.cfg.max_iter, norm))
        } else {
            Err(GridError::NoConvergence { iterations: self.cfg.max_iter, residual: norm })
        }
    }

    fn linear_guess(&self) -> Result<Vec<f64>, GridError> {
        let g = self.grid;
        let zero = vec![0.0; g.len()];
        let f0 = g.evaluate_nodes(&self.f, &zero)?;
        let op = Operator { grid: g, shift: vec![0.0; g.interior_len()] };
        let x = op.solve(&interior(g, &f0), self.cfg)?;
        let mut u = zero;
        for j in 1..g.n2 {
            for i in 1..g.n1 {
                u[g.index(i, j)] = x[g.interior_index(i, j)];
            }
        }
        Ok(u)
    }

    fn bump(&self, amplitude: f64) -> Vec<f64> {
        let g = self.grid;
        let d = g.domain;
        let mut u = vec![0.0; g.len()];
        for j in 1..g.n2 {
            for i in 1..g.n1 {
                let phi = (std::f64::consts::FRAC_PI_2 * g.x1(i) / d.a1).cos()
                    * (std::f64::consts::FRAC_PI_2 * g.x2(j) / d.a2).cos();
                u[g.index(i, j)] = amplitude * phi;
            }
        }
        u
    }

    /// Amplitude `c > 0` with `c ∫|∇φ|² = ∫ f(x, cφ) φ` for the first
    /// eigenfunction `φ`, if one exists in `[1e-6, 1e6]`.
    fn galerkin_amplitude(&self) -> Option<f64> {
        let g = self.grid;
        let d = g.domain;
        let phi = self.bump(1.0);
        let lambda1 = (std::f64::consts::FRAC_PI_2).powi(2) * (1.0 / (d.a1 * d.a1) + 1.0 / (d.a2 * d.a2));
        let sq: f64 = phi.iter().map(|p| p * p).sum();
        let balance = |c: f64| -> Option<f64> {
            let u: Vec<f64> = phi.iter().map(|p| c * p).collect();
            let fv = g.evaluate_nodes(&self.f, &u).ok()?;
            let work: f64 = fv.iter().zip(&phi).map(|(f, p)| f * p).sum();
            Some(c * lambda1 * sq - work)
        };
        let cs: Vec<f64> = (0..=48).map(|k| 10f64.powf(-6.0 + 0.25 * k as f64)).collect();
        let mut prev: Option<(f64, f64)> = None;
        for c in cs {
            let b = balance(c)?;
            if let Some((pc, pb)) = prev {
                if pb.signum() != b.signum() {
                    let (mut lo, mut hi, lo_sign) = (pc, c, pb.signum());
                    for _ in 0..60 {
                        let mid = (lo * hi).sqrt();
                        if balance(mid)?.signum() == lo_sign {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    return Some((lo * hi).sqrt());
                }
            }
            prev = Some((c, b));
        }
        None
    }

    fn initial(&self) -> Result<Vec<f64>, GridError> {
        match self.cfg.initial {
            InitialGuess::Linear => self.linear_guess(),
            InitialGuess::Bump { amplitude } => Ok(self.bump(amplitude)),
            InitialGuess::Auto => {
                let u = self.linear_guess()?;
                if max_norm(&u) > 0.0 {
                    return Ok(u);
                }
                Ok(self.galerkin_amplitude().map_or(u, |c| self.bump(c)))
            }
        }
    }
}

/// Solves `Δ_h u + f(x,u) = 0` by damped Newton with Jacobian
/// `Δ_h + diag(f_u)`. Falls back to load continuation when plain Newton stalls.
pub fn solve_scalar_grid(grid: &RectGrid, f: &ExprNode, cfg: &NewtonConfig) -> Result<GridSolution, GridError> {
    cfg.validate()?;
    check_symbols(f)?;
    let newton = Newton { grid, f: f.simplify(), fu: f.differentiate(Symbol::U(0)), cfg };
    let mut u = newton.initial()?;
    let (iterations, residual) = match newton.run(&mut u, 1.0) {
        Ok(done) => done,
        Err(GridError::NoConvergence { .. }) if cfg.continuation_steps > 0 => {
            let mut total = 0;
            u = vec![0.0; grid.len()];
            let mut last = (0, f64::INFINITY);
            for k in 1..=cfg.continuation_steps {
                last = newton.run(&mut u, k as f64 / cfg.continuation_steps as f64)?;
                total += last.0;
            }
            (total, last.1)
        }
        Err(e) => return Err(e),
    };
    let (min_interior, i, j) = interior_min(grid, &u);
    if cfg.require_positive && min_interior <= 0.0 {
        return Err(GridError::NonPositive { min: min_interior, i, j });
    }
    Ok(GridSolution {
        grid: *grid,
        u,
        newton_iterations: iterations,
        residual,
        positive: min_interior > 0.0,
        min_interior,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    /// `x1 = -a1`.
    Left,
    /// `x1 = a1`.
    Right,
    /// `x2 = -a2`.
    Bottom,
    /// `x2 = a2`.
    Top,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::Left, Face::Right, Face::Bottom, Face::Top];

    /// `x·ν`, constant on each face.
    pub fn support(&self, d: &RectDomain) -> f64 {
        match self {
            Face::Left | Face::Right => d.a1,
            Face::Bottom | Face::Top => d.a2,
        }
    }
}

/// `|∇u| = |∂u/∂ν|` at the nodes of each face, ordered by increasing tangential coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGradient {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    /// Node spacing along each face: `h2` for left/right, `h1` for bottom/top.
    pub h_vertical: f64,
    pub h_horizontal: f64,
}

impl BoundaryGradient {
    pub fn face(&self, face: Face) -> &[f64] {
        match face {
            Face::Left => &self.left,
            Face::Right => &self.right,
            Face::Bottom => &self.bottom,
            Face::Top => &self.top,
        }
    }

    pub fn spacing(&self, face: Face) -> f64 {
        match face {
            Face::Left | Face::Right => self.h_vertical,
            Face::Bottom | Face::Top => self.h_horizontal,
        }
    }
}

/// One-sided second-order normal derivatives on every face.
pub fn boundary_gradient(sol: &GridSolution) -> BoundaryGradient {
    let g = &sol.grid;
    let (h1, h2) = (g.h1(), g.h2());
    let v = |i: usize, j: usize| sol.value(i, j);
    let one_sided = |a: f64, b: f64, c: f64, h: f64| ((3.0 * a - 4.0 * b + c) / (2.0 * h)).abs();
    let (n1, n2) = (g.n1, g.n2);
    BoundaryGradient {
        left: (0..=n2).map(|j| one_sided(v(0, j), v(1, j), v(2, j), h1)).collect(),
        right: (0..=n2).map(|j| one_sided(v(n1, j), v(n1 - 1, j), v(n1 - 2, j), h1)).collect(),
        bottom: (0..=n1).map(|i| one_sided(v(i, 0), v(i, 1), v(i, 2), h2)).collect(),
        top: (0..=n1).map(|i| one_sided(v(i, n2), v(i, n2 - 1), v(i, n2 - 2), h2)).collect(),
        h_vertical: h2,
        h_horizontal: h1,
    }
}
