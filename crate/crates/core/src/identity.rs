//! Both sides of the Pohozaev-type identities, evaluated on sampled
//! solutions, plus the pointwise checks behind them: the divergence form,
//! the equation satisfied by `z = x·∇u` (and `p_k`, `q_k` for systems),
//! and the energy equalities `∫uf = ∫|∇u|²`, `∫v_k H_{v_k} = ∫u_k H_{u_k}`.
//!
//! Radial integrals use composite Simpson in `r` with weight `σ_n r^{n-1}`;
//! rectangle integrals use the tensor rule on the nodes and the trapezoid
//! rule along each face.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::expr::{Binding, ExprError, ExprNode, Field, Symbol};
use crate::grid::{assemble_residual, boundary_gradient, Face, GridSolution, RectGrid};
use crate::quadrature::{tensor_2d, trapezoid, uniform_weights};
use crate::radial::RadialSolution;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IdentityError {
    #[error("quadrature grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("expected a {expected} solution")]
    WrongKind { expected: &'static str },
    #[error("supplied {component} is not positive at r = {r} (value {value:e})")]
    PositivityViolated { component: String, r: f64, value: f64 },
    #[error("H(x,0,...,0) varies along the boundary: {value:e} at {point:?} versus {reference:e}")]
    NormalizationViolated { point: Vec<f64>, value: f64, reference: f64 },
    #[error("radial evaluation needs H free of the coordinate {0}")]
    NonRadial(Symbol),
    #[error("H may not depend on {0}")]
    InvalidSymbol(Symbol),
    #[error("expected {expected} parameters a_k, got {got}")]
    ParameterCount { expected: usize, got: usize },
}

/// Surface measure of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI * sphere_area(n - 2) / (n - 2) as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityTerm {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureInfo {
    pub volume_rule: String,
    pub boundary_rule: String,
    /// Nodes per axis (one entry for radial grids).
    pub nodes: Vec<usize>,
    pub spacing: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportFlag {
    /// The supplied data do not solve the equations: identities need not hold.
    EquationResidualHigh { max_residual: f64, threshold: f64 },
    /// A constant boundary trace `H(x,0,...,0) = c` was subtracted from H.
    ConstantTraceSubtracted { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub n: usize,
    pub params: Vec<f64>,
    pub lhs_terms: Vec<IdentityTerm>,
    pub lhs_total: f64,
    pub rhs_boundary: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    /// Max-norm residual of the underlying equations on the supplied data.
    pub equation_residual: f64,
    pub quadrature: QuadratureInfo,
    pub flags: Vec<ReportFlag>,
}

impl IdentityReport {
    fn assemble(
        identity: &str,
        n: usize,
        params: Vec<f64>,
        lhs_terms: Vec<IdentityTerm>,
        rhs_boundary: f64,
        equation_residual: f64,
        quadrature: QuadratureInfo,
    ) -> Self {
        let lhs_total: f64 = lhs_terms.iter().map(|t| t.value).sum();
        let abs_residual = (lhs_total - rhs_boundary).abs();
        let scale = lhs_total.abs().max(rhs_boundary.abs()).max(defaults::REL_RESIDUAL_FLOOR);
        let mut flags = Vec::new();
        if !(equation_residual <= defaults::EQUATION_RESIDUAL_GATE) {
            flags.push(ReportFlag::EquationResidualHigh {
                max_residual: equation_residual,
                threshold: defaults::EQUATION_RESIDUAL_GATE,
            });
        }
        IdentityReport {
            identity: identity.to_string(),
            n,
            params,
            lhs_terms,
            lhs_total,
            rhs_boundary,
            abs_residual,
            rel_residual: abs_residual / scale,
            equation_residual,
            quadrature,
            flags,
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.lhs_terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    pub fn has_flag(&self, pred: impl Fn(&ReportFlag) -> bool) -> bool {
        self.flags.iter().any(pred)
    }

    pub fn equation_residual_high(&self) -> bool {
        self.has_flag(|f| matches!(f, ReportFlag::EquationResidualHigh { .. }))
    }

    /// Whether the identity holds to `gate` on data that solve the equations.
    pub fn passes(&self, gate: f64) -> bool {
        self.rel_residual <= gate && !self.equation_residual_high()
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "identity     {} (n = {})", self.identity, self.n);
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| format!("{p}")).collect();
            let _ = writeln!(out, "parameters   {}", ps.join(", "));
        }
        let width = self.lhs_terms.iter().map(|t| t.name.chars().count()).max().unwrap_or(0).max(12);
        for t in &self.lhs_terms {
            let pad = width - t.name.chars().count();
            let _ = writeln!(out, "  {}{}  {:>24.16e}", t.name, " ".repeat(pad), t.value);
        }
        let rows = [
            ("lhs_total", self.lhs_total),
            ("rhs_boundary", self.rhs_boundary),
            ("abs_residual", self.abs_residual),
            ("rel_residual", self.rel_residual),
            ("equation_res", self.equation_residual),
        ];
        for (name, v) in rows {
            let pad = width.saturating_sub(name.len());
            let _ = writeln!(out, "  {}{}  {:>24.16e}", name, " ".repeat(pad), v);
        }
        let _ = writeln!(
            out,
            "quadrature   {} / {} on {:?} nodes",
            self.quadrature.volume_rule, self.quadrature.boundary_rule, self.quadrature.nodes
        );
        for f in &self.flags {
            let _ = match f {
                ReportFlag::EquationResidualHigh { max_residual, threshold } => writeln!(
                    out,
                    "flag         equation residual {max_residual:e} exceeds {threshold:e}: data do not solve the equations"
                ),
                ReportFlag::ConstantTraceSubtracted { value } => {
                    writeln!(out, "flag         constant boundary trace {value:e} subtracted from H")
                }
            };
        }
        out
    }
}

fn term(name: &str, value: f64) -> IdentityTerm {
    IdentityTerm { name: name.to_string(), value }
}

/// Simpson weights times `σ_n r^{n-1}`.
fn radial_weights(sol: &RadialSolution) -> Result<Vec<f64>, IdentityError> {
    let len = sol.len();
    if len < 3 || len.is_multiple_of(2) {
        return Err(IdentityError::GridMismatch(format!("composite Simpson needs an odd node count, got {len}")));
    }
    let sigma = sphere_area(sol.n);
    Ok(uniform_weights(len, sol.spacing())
        .into_iter()
        .zip(&sol.r)
        .map(|(w, r)| w * sigma * r.powi(sol.n as i32 - 1))
        .collect())
}

fn radial_info(sol: &RadialSolution) -> QuadratureInfo {
    QuadratureInfo {
        volume_rule: "composite Simpson in r".into(),
        boundary_rule: "endpoint derivative".into(),
        nodes: vec![sol.len()],
        spacing: vec![sol.spacing()],
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Second-order derivative of uniformly spaced samples: centered inside,
/// one-sided at the two ends.
fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    d
}

/// Fourth-order centered derivative at `2 <= i <= n-3`, used only for the
/// equation-residual gate so that truncation stays far below the threshold.
fn derivative4(values: &[f64], h: f64, i: usize) -> f64 {
    (-values[i + 2] + 8.0 * values[i + 1] - 8.0 * values[i - 1] + values[i - 2]) / (12.0 * h)
}

fn radial_binding(r: f64, us: &[f64], vs: &[f64]) -> Binding {
    let mut b = Binding::new().with(Symbol::R, r);
    for (k, u) in us.iter().enumerate() {
        b.set(Symbol::U(k as u8), *u);
    }
    for (k, v) in vs.iter().enumerate() {
        b.set(Symbol::V(k as u8), *v);
    }
    b
}

fn check_scalar_radial(sol: &RadialSolution, f: &ExprNode) -> Result<(), IdentityError> {
    if sol.is_pair() {
        return Err(IdentityError::WrongKind { expected: "scalar" });
    }
    for s in f.free_symbols() {
        match s {
            Symbol::R | Symbol::U(0) => {}
            Symbol::X(_) => return Err(IdentityError::NonRadial(s)),
            _ => return Err(IdentityError::InvalidSymbol(s)),
        }
    }
    Ok(())
}

/// `max |u'' + (n-1)u'/r + f|` over nodes away from both ends, divided by
/// `max(1, max |f|)` so that tall solutions are judged on the same scale.
fn scalar_equation_residual(sol: &RadialSolution, f: &ExprNode) -> Result<f64, IdentityError> {
    let h = sol.spacing();
    let len = sol.len();
    let (mut worst, mut size) = (0.0f64, 1.0f64);
    if len < 5 {
        return Ok(f64::INFINITY);
    }
    for i in 2..len - 2 {
        let r = sol.r[i];
        if r == 0.0 {
            continue;
        }
        let fv = f.evaluate(&radial_binding(r, &[sol.u[i]], &[]))?;
        let res = derivative4(&sol.du, h, i) + (sol.n - 1) as f64 * sol.du[i] / r + fv;
        worst = worst.max(res.abs());
        size = size.max(fv.abs());
    }
    Ok(worst / size)
}

/// Both sides of the scalar identity on a ball:
/// `σ_n ∫ [2nF + (2-n)uf + 2rF_r] r^{n-1} dr = σ_n R^n u'(R)²`.
pub fn scalar_identity_radial(sol: &RadialSolution, f: &ExprNode) -> Result<IdentityReport, IdentityError> {
    check_scalar_radial(sol, f)?;
    let n = sol.n;
    let w = radial_weights(sol)?;
    let big_f = Field::antiderivative(f, Symbol::U(0));
    let euler = big_f.euler(0);
    let nf = n as f64;
    let (mut t_f, mut t_uf, mut t_x) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &r) in sol.r.iter().enumerate() {
        let b = radial_binding(r, &[sol.u[i]], &[]);
        t_f.push(2.0 * nf * big_f.evaluate(&b)?);
        t_uf.push((2.0 - nf) * sol.u[i] * f.evaluate(&b)?);
        t_x.push(2.0 * euler.evaluate(&b)?);
    }
    let radius = sol.radius();
    let du_end = sol.du[sol.len() - 1];
    let rhs = sphere_area(n) * radius.powi(n as i32) * du_end * du_end;
    let terms = vec![term("2nF", dot(&w, &t_f)), term("(2-n)uf", dot(&w, &t_uf)), term("2x.F_x", dot(&w, &t_x))];
    Ok(IdentityReport::assemble("scalar", n, vec![], terms, rhs, scalar_equation_residual(sol, f)?, radial_info(sol)))
}

/// A Hamiltonian `H(r, u_1..u_m, v_1..v_m)` for radial systems
/// `Δu_k + H_{v_k} = 0`, `Δv_k + H_{u_k} = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    pub m: usize,
    pub h: Field,
}

impl Hamiltonian {
    /// `H` given in closed form over `{x.., r, u1..um, v1..vm}`.
    pub fn from_expr(h: &ExprNode, m: usize) -> Result<Self, IdentityError> {
        for s in h.free_symbols() {
            match s {
                Symbol::U(k) | Symbol::V(k) if (k as usize) < m => {}
                Symbol::R | Symbol::X(_) => {}
                other => return Err(IdentityError::InvalidSymbol(other)),
            }
        }
        Ok(Hamiltonian { m, h: Field::exact(h.clone()) })
    }

    /// `H = F(r,v) + G(r,u)` with `F = ∫_0^v f`, `G = ∫_0^u g`.
    pub fn from_pair(f: &ExprNode, g: &ExprNode) -> Self {
        Self::decoupled(&[(f.clone(), g.clone())])
    }

    /// `H = Σ_k [F_k(r,v_k) + G_k(r,u_k)]` for `m` independent pairs.
    pub fn decoupled(pairs: &[(ExprNode, ExprNode)]) -> Self {
        let mut h = Field::zero();
        for (k, (f, g)) in pairs.iter().enumerate() {
            let k = k as u8;
            let to_k = move |s: Symbol| match s {
                Symbol::U(0) => Symbol::U(k),
                Symbol::V(0) => Symbol::V(k),
                other => other,
            };
            h = h
                .plus(Field::antiderivative(f, Symbol::V(0)).rename(&to_k))
                .plus(Field::antiderivative(g, Symbol::U(0)).rename(&to_k));
        }
        Hamiltonian { m: pairs.len(), h }
    }

    fn partial_u(&self, k: usize) -> Field {
        self.h.partial(Symbol::U(k as u8))
    }

    fn partial_v(&self, k: usize) -> Field {
        self.h.partial(Symbol::V(k as u8))
    }

    fn radial_symbols(&self) -> Result<(), IdentityError> {
        for i in 0..16u8 {
            if self.h.depends_on(Symbol::X(i)) {
                return Err(IdentityError::NonRadial(Symbol::X(i)));
            }
        }
        Ok(())
    }
}

fn check_pairs(sols: &[RadialSolution], m: usize) -> Result<(), IdentityError> {
    if sols.len() != m {
        return Err(IdentityError::GridMismatch(format!("{m} component pairs expected, got {}", sols.len())));
    }
    let first = &sols[0];
    for s in sols {
        if !s.is_pair() {
            return Err(IdentityError::WrongKind { expected: "pair" });
        }
        if s.n != first.n || s.r != first.r {
            return Err(IdentityError::GridMismatch("component pairs live on different grids".into()));
        }
    }
    Ok(())
}

fn check_positive(sols: &[RadialSolution]) -> Result<(), IdentityError> {
    for (k, s) in sols.iter().enumerate() {
        let v = s.v.as_ref().expect("pair");
        for (i, (&u, &vi)) in s.u.iter().zip(v).enumerate().take(s.len() - 1) {
            for (name, val) in [("u", u), ("v", vi)] {
                if !(val > 0.0) {
                    let component = if sols.len() == 1 { name.to_string() } else { format!("{name}{}", k + 1) };
                    return Err(IdentityError::PositivityViolated { component, r: s.r[i], value: val });
                }
            }
        }
    }
    Ok(())
}

fn components(sols: &[RadialSolution], i: usize) -> (Vec<f64>, Vec<f64>) {
    let us = sols.iter().map(|s| s.u[i]).collect();
    let vs = sols.iter().map(|s| s.v.as_ref().expect("pair")[i]).collect();
    (us, vs)
}

/// `max` over `k` and nodes of `|Δu_k + H_{v_k}|`, `|Δv_k + H_{u_k}|`, divided
/// by `max(1, max |H_{v_k}|, max |H_{u_k}|)`.
fn system_equation_residual(sols: &[RadialSolution], ham: &Hamiltonian, trace: f64) -> Result<f64, IdentityError> {
    let _ = trace;
    let s0 = &sols[0];
    let (h, len, n) = (s0.spacing(), s0.len(), s0.n);
    if len < 5 {
        return Ok(f64::INFINITY);
    }
    let hu: Vec<Field> = (0..ham.m).map(|k| ham.partial_u(k)).collect();
    let hv: Vec<Field> = (0..ham.m).map(|k| ham.partial_v(k)).collect();
    let (mut worst, mut size) = (0.0f64, 1.0f64);
    for i in 2..len - 2 {
        let r = s0.r[i];
        if r == 0.0 {
            continue;
        }
        let (us, vs) = components(sols, i);
        let b = radial_binding(r, &us, &vs);
        for (k, s) in sols.iter().enumerate() {
            let dv = s.dv.as_ref().expect("pair");
            let lap_u = derivative4(&s.du, h, i) + (n - 1) as f64 * s.du[i] / r;
            let lap_v = derivative4(dv, h, i) + (n - 1) as f64 * dv[i] / r;
            let (fv, gv) = (hv[k].evaluate(&b)?, hu[k].evaluate(&b)?);
            worst = worst.max((lap_u + fv).abs()).max((lap_v + gv).abs());
            size = size.max(fv.abs()).max(gv.abs());
        }
    }
    Ok(worst / size)
}

/// Samples `H(x, 0, ..., 0)` on the sphere `|x| = R`. A constant trace is
/// returned for subtraction; a varying one is fatal.
fn boundary_trace(ham: &Hamiltonian, n: usize, radius: f64) -> Result<f64, IdentityError> {
    let mut points: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut x = vec![0.0; n];
            x[i] = sign * radius;
            points.push(x);
        }
    }
    let diag = radius / (n as f64).sqrt();
    points.push(vec![diag; n]);
    points.push((0..n).map(|i| if i % 2 == 0 { diag } else { -diag }).collect());
    let mut reference = None;
    for x in points {
        let mut b = Binding::new().with(Symbol::R, radius);
        for (i, xi) in x.iter().enumerate() {
            b.set(Symbol::X(i as u8), *xi);
        }
        for k in 0..ham.m {
            b.set(Symbol::U(k as u8), 0.0);
            b.set(Symbol::V(k as u8), 0.0);
        }
        let value = ham.h.evaluate(&b)?;
        match reference {
            None => reference = Some(value),
            Some(c) if (value - c).abs() > 1e-12 * c.abs().max(1.0) => {
                return Err(IdentityError::NormalizationViolated { point: x, value, reference: c });
            }
            _ => {}
        }
    }
    Ok(reference.unwrap_or(0.0))
}

/// The general identity for `m` radial pairs and parameters `a_1..a_m`:
/// `∫ [2nH + (2-n) Σ(a_k u_k H_{u_k} + (2-a_k) v_k H_{v_k}) + 2 x·H_x] =
/// 2 Σ_k σ_n R^n |u_k'(R)| |v_k'(R)|`.
pub fn general_identity(
    sols: &[RadialSolution],
    ham: &Hamiltonian,
    a: &[f64],
) -> Result<IdentityReport, IdentityError> {
    if a.len() != ham.m {
        return Err(IdentityError::ParameterCount { expected: ham.m, got: a.len() });
    }
    check_pairs(sols, ham.m)?;
    let s0 = &sols[0];
    let n = s0.n;
    let radius = s0.radius();
    let trace = boundary_trace(ham, n, radius)?;
    ham.radial_symbols()?;
    check_positive(sols)?;
    let w = radial_weights(s0)?;
    let nf = n as f64;
    let hu: Vec<Field> = (0..ham.m).map(|k| ham.partial_u(k)).collect();
    let hv: Vec<Field> = (0..ham.m).map(|k| ham.partial_v(k)).collect();
    let euler = ham.h.euler(0);
    let (mut t_h, mut t_u, mut t_v, mut t_x) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..s0.len() {
        let (us, vs) = components(sols, i);
        let b = radial_binding(s0.r[i], &us, &vs);
        t_h.push(2.0 * nf * (ham.h.evaluate(&b)? - trace));
        let (mut su, mut sv) = (0.0, 0.0);
        for k in 0..ham.m {
            su += a[k] * us[k] * hu[k].evaluate(&b)?;
            sv += (2.0 - a[k]) * vs[k] * hv[k].evaluate(&b)?;
        }
        t_u.push((2.0 - nf) * su);
        t_v.push((2.0 - nf) * sv);
        t_x.push(2.0 * euler.evaluate(&b)?);
    }
    let sigma_rn = sphere_area(n) * radius.powi(n as i32);
    let last = s0.len() - 1;
    let rhs: f64 =
        sols.iter().map(|s| 2.0 * sigma_rn * s.du[last].abs() * s.dv.as_ref().expect("pair")[last].abs()).sum();
    let terms = vec![
        term("2nH", dot(&w, &t_h)),
        term("(2-n)sum a_k u_k H_u_k", dot(&w, &t_u)),
        term("(2-n)sum (2-a_k) v_k H_v_k", dot(&w, &t_v)),
        term("2x.H_x", dot(&w, &t_x)),
    ];
    let mut report = IdentityReport::assemble(
        "general",
        n,
        a.to_vec(),
        terms,
        rhs,
        system_equation_residual(sols, ham, trace)?,
        radial_info(s0),
    );
    if trace != 0.0 {
        report.flags.push(ReportFlag::ConstantTraceSubtracted { value: trace });
    }
    Ok(report)
}

/// The pair identity with parameter `a`:
/// `∫ [2n(F+G) + (2-n)(a v f + (2-a) u g) + 2x·(F_x+G_x)] = 2 ∫ (x·ν)|∇u||∇v|`.
/// This is the general identity with `m = 1` and `a_1 = 2 - a`.
pub fn pair_identity_radial(
    sol: &RadialSolution,
    f: &ExprNode,
    g: &ExprNode,
    a: f64,
) -> Result<IdentityReport, IdentityError> {
    for (e, own) in [(f, Symbol::V(0)), (g, Symbol::U(0))] {
        for s in e.free_symbols() {
            if s != own && s != Symbol::R {
                return Err(if matches!(s, Symbol::X(_)) {
                    IdentityError::NonRadial(s)
                } else {
                    IdentityError::InvalidSymbol(s)
                });
            }
        }
    }
    let ham = Hamiltonian::from_pair(f, g);
    let general = general_identity(std::slice::from_ref(sol), &ham, &[2.0 - a])?;
    let pick = |name: &str| general.term(name).unwrap_or(0.0);
    let terms = vec![
        term("2n(F+G)", pick("2nH")),
        term("(2-n)a vf", pick("(2-n)sum (2-a_k) v_k H_v_k")),
        term("(2-n)(2-a) ug", pick("(2-n)sum a_k u_k H_u_k")),
        term("2x.(F_x+G_x)", pick("2x.H_x")),
    ];
    Ok(IdentityReport { identity: "pair".into(), params: vec![a], lhs_terms: terms, ..general })
}

fn check_grid_symbols(f: &ExprNode) -> Result<(), IdentityError> {
    for s in f.free_symbols() {
        match s {
            Symbol::X(0) | Symbol::X(1) | Symbol::R | Symbol::U(0) => {}
            other => return Err(IdentityError::InvalidSymbol(other)),
        }
    }
    Ok(())
}

fn grid_binding(grid: &RectGrid, i: usize, j: usize, u: f64) -> Binding {
    let (x1, x2) = (grid.x1(i), grid.x2(j));
    Binding::new().with(Symbol::X(0), x1).with(Symbol::X(1), x2).with(Symbol::R, x1.hypot(x2)).with(Symbol::U(0), u)
}

/// The scalar identity on a centered rectangle (`n = 2`):
/// `∫ [4F + 2x·F_x] dx = Σ_faces a_face ∫ |∂u/∂ν|² dS`.
pub fn scalar_identity_grid(sol: &GridSolution, f: &ExprNode) -> Result<IdentityReport, IdentityError> {
    check_grid_symbols(f)?;
    let g = &sol.grid;
    let big_f = Field::antiderivative(f, Symbol::U(0));
    let euler = big_f.euler(2);
    let (mut t_f, mut t_uf, mut t_x) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..=g.n2 {
        for i in 0..=g.n1 {
            let b = grid_binding(g, i, j, sol.value(i, j));
            t_f.push(4.0 * big_f.evaluate(&b)?);
            t_uf.push(0.0);
            t_x.push(2.0 * euler.evaluate(&b)?);
        }
    }
    let (nx, ny, h1, h2) = (g.n1 + 1, g.n2 + 1, g.h1(), g.h2());
    let grad = boundary_gradient(sol);
    let mut rhs = 0.0;
    for face in Face::ALL {
        let sq: Vec<f64> = grad.face(face).iter().map(|d| d * d).collect();
        rhs += face.support(&g.domain) * trapezoid(&sq, grad.spacing(face)).unwrap_or(0.0);
    }
    let residual = assemble_residual(g, f, &sol.u).map_err(|e| match e {
        crate::grid::GridError::Node { source, .. } => IdentityError::Expr(source),
        other => IdentityError::GridMismatch(other.to_string()),
    })?;
    let size = g
        .evaluate_nodes(f, &sol.u)
        .map_err(|e| IdentityError::GridMismatch(e.to_string()))?
        .iter()
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let eq = residual.iter().fold(0.0f64, |m, r| m.max(r.abs())) / size;
    let rule = if nx % 2 == 1 && ny % 2 == 1 { "tensor Simpson" } else { "tensor trapezoid" };
    let terms = vec![
        term("2nF", tensor_2d(&t_f, nx, ny, h1, h2)),
        term("(2-n)uf", tensor_2d(&t_uf, nx, ny, h1, h2)),
        term("2x.F_x", tensor_2d(&t_x, nx, ny, h1, h2)),
    ];
    let info = QuadratureInfo {
        volume_rule: rule.into(),
        boundary_rule: "trapezoid of one-sided normal derivatives".into(),
        nodes: vec![nx, ny],
        spacing: vec![h1, h2],
    };
    Ok(IdentityReport::assemble("scalar", 2, vec![], terms, rhs, eq, info))
}

/// Pointwise residual norms, with the observed order from a grid of half
/// the resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max_residual: f64,
    /// Discrete `L²` norm `(Σ res² · cell volume)^{1/2}` over the same nodes.
    pub l2_residual: f64,
    /// Max residual on the twice-coarser grid, when it exists.
    pub coarse_max_residual: Option<f64>,
    /// `log2(coarse / fine)`.
    pub estimated_order: Option<f64>,
    pub nodes: usize,
}

fn summarize(fine: (f64, f64, usize), coarse: Option<f64>) -> ResidualSummary {
    let (max_residual, l2_residual, nodes) = fine;
    let estimated_order =
        coarse.filter(|c| *c > 0.0 && max_residual > 0.0 && c.is_finite()).map(|c| (c / max_residual).log2());
    ResidualSummary { max_residual, l2_residual, coarse_max_residual: coarse, estimated_order, nodes }
}

/// Residual norms over nodes `skip..len-skip`, skipping `r = 0`.
fn radial_norms(res: &[f64], r: &[f64], h: f64) -> (f64, f64, usize) {
    let skip = defaults::RESIDUAL_EDGE_SKIP;
    let (mut worst, mut sq, mut count) = (0.0f64, 0.0, 0);
    for i in skip..res.len().saturating_sub(skip) {
        if r[i] == 0.0 {
            continue;
        }
        worst = worst.max(res[i].abs());
        sq += res[i] * res[i] * h;
        count += 1;
    }
    (worst, sq.sqrt(), count)
}

fn coarse_radial(sol: &RadialSolution) -> Option<RadialSolution> {
    let intervals = sol.len() - 1;
    (intervals.is_multiple_of(2) && intervals / 2 >= 8).then(|| sol.decimate(2).ok()).flatten()
}

/// Divergence in radial variables, `Φ' + (n-1)Φ/r`, with `Φ'` by centered
/// differences. Equivalent to `r^{1-n}(r^{n-1}Φ)'` but free of the `r^{1-n}`
/// amplification of the truncation error near the centre.
fn radial_divergence(phi: &[f64], r: &[f64], h: f64, n: usize) -> Vec<f64> {
    let d = derivative(phi, h);
    d.iter()
        .zip(phi)
        .zip(r)
        .map(|((dp, p), r)| if *r == 0.0 { n as f64 * dp } else { dp + (n - 1) as f64 * p / r })
        .collect()
}

fn scalar_divergence_residual(sol: &RadialSolution, f: &ExprNode) -> Result<(f64, f64, usize), IdentityError> {
    let h = sol.spacing();
    let n = sol.n;
    let big_f = Field::antiderivative(f, Symbol::U(0));
    let euler = big_f.euler(0);
    let z: Vec<f64> = sol.r.iter().zip(&sol.du).map(|(r, d)| r * d).collect();
    let dz = derivative(&z, h);
    let mut phi = Vec::with_capacity(sol.len());
    let mut rhs = Vec::with_capacity(sol.len());
    for i in 0..sol.len() {
        let b = radial_binding(sol.r[i], &[sol.u[i]], &[]);
        let (fv, fv_big) = (f.evaluate(&b)?, big_f.evaluate(&b)?);
        let u = sol.u[i];
        phi.push(z[i] * sol.du[i] - u * dz[i] + sol.r[i] * (2.0 * fv_big - u * fv));
        rhs.push(2.0 * n as f64 * fv_big + (2.0 - n as f64) * u * fv + 2.0 * euler.evaluate(&b)?);
    }
    let div = radial_divergence(&phi, &sol.r, h, n);
    let res: Vec<f64> = div.iter().zip(&rhs).map(|(d, r)| d - r).collect();
    Ok(radial_norms(&res, &sol.r, h))
}

/// Pointwise check of the divergence form of the scalar identity on a radial solution.
pub fn differential_form_residual_radial(sol: &RadialSolution, f: &ExprNode) -> Result<ResidualSummary, IdentityError> {
    check_scalar_radial(sol, f)?;
    let fine = scalar_divergence_residual(sol, f)?;
    let coarse = match coarse_radial(sol) {
        Some(c) => Some(scalar_divergence_residual(&c, f)?.0),
        None => None,
    };
    Ok(summarize(fine, coarse))
}

fn system_divergence_residual(sols: &[RadialSolution], ham: &Hamiltonian) -> Result<(f64, f64, usize), IdentityError> {
    let s0 = &sols[0];
    let (h, n, len) = (s0.spacing(), s0.n, s0.len());
    let nf = n as f64;
    let hu: Vec<Field> = (0..ham.m).map(|k| ham.partial_u(k)).collect();
    let hv: Vec<Field> = (0..ham.m).map(|k| ham.partial_v(k)).collect();
    let euler = ham.h.euler(0);
    let mut phi = vec![0.0; len];
    for s in sols {
        let dv = s.dv.as_ref().expect("pair");
        let v = s.v.as_ref().expect("pair");
        let p: Vec<f64> = s.r.iter().zip(&s.du).map(|(r, d)| r * d).collect();
        let q: Vec<f64> = s.r.iter().zip(dv).map(|(r, d)| r * d).collect();
        let (dp, dq) = (derivative(&p, h), derivative(&q, h));
        for i in 0..len {
            phi[i] += s.du[i] * q[i] - dp[i] * v[i] + dv[i] * p[i] - dq[i] * s.u[i];
        }
    }
    let mut rhs = vec![0.0; len];
    for i in 0..len {
        let (us, vs) = components(sols, i);
        let b = radial_binding(s0.r[i], &us, &vs);
        let hval = ham.h.evaluate(&b)?;
        let mut weighted = 0.0;
        for k in 0..ham.m {
            weighted += us[k] * hu[k].evaluate(&b)? + vs[k] * hv[k].evaluate(&b)?;
        }
        phi[i] += s0.r[i] * (2.0 * hval - weighted);
        rhs[i] = 2.0 * nf * hval + (2.0 - nf) * weighted + 2.0 * euler.evaluate(&b)?;
    }
    let div = radial_divergence(&phi, &s0.r, h, n);
    let res: Vec<f64> = div.iter().zip(&rhs).map(|(d, r)| d - r).collect();
    Ok(radial_norms(&res, &s0.r, h))
}

/// Pointwise check of the divergence form of the system identity.
pub fn differential_form_residual_system(
    sols: &[RadialSolution],
    ham: &Hamiltonian,
) -> Result<ResidualSummary, IdentityError> {
    check_pairs(sols, ham.m)?;
    ham.radial_symbols()?;
    let fine = system_divergence_residual(sols, ham)?;
    let coarse: Option<Vec<RadialSolution>> = sols.iter().map(coarse_radial).collect();
    let coarse = match coarse {
        Some(c) => Some(system_divergence_residual(&c, ham)?.0),
        None => None,
    };
    Ok(summarize(fine, coarse))
}

/// Centered gradient of nodal values, one-sided second order on the edges.
fn grid_gradient(grid: &RectGrid, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny) = (grid.n1 + 1, grid.n2 + 1);
    let mut gx = vec![0.0; values.len()];
    let mut gy = vec![0.0; values.len()];
    for j in 0..ny {
        let row: Vec<f64> = (0..nx).map(|i| values[grid.index(i, j)]).collect();
        for (i, d) in derivative(&row, grid.h1()).into_iter().enumerate() {
            gx[grid.index(i, j)] = d;
        }
    }
    for i in 0..nx {
        let col: Vec<f64> = (0..ny).map(|j| values[grid.index(i, j)]).collect();
        for (j, d) in derivative(&col, grid.h2()).into_iter().enumerate() {
            gy[grid.index(i, j)] = d;
        }
    }
    (gx, gy)
}

fn grid_norms(grid: &RectGrid, res: &[f64]) -> (f64, f64, usize) {
    let skip = defaults::RESIDUAL_EDGE_SKIP;
    let (mut worst, mut sq, mut count) = (0.0f64, 0.0, 0);
    let cell = grid.h1() * grid.h2();
    for j in skip..=grid.n2.saturating_sub(skip) {
        for i in skip..=grid.n1.saturating_sub(skip) {
            let v = res[grid.index(i, j)];
            worst = worst.max(v.abs());
            sq += v * v * cell;
            count += 1;
        }
    }
    (worst, sq.sqrt(), count)
}

fn coarse_grid(sol: &GridSolution) -> Option<GridSolution> {
    let g = sol.grid;
    if !g.n1.is_multiple_of(2) || !g.n2.is_multiple_of(2) || g.n1 < 16 || g.n2 < 16 {
        return None;
    }
    let coarse = g.domain.mesh(g.n1 / 2, g.n2 / 2).ok()?;
    let mut u = vec![0.0; coarse.len()];
    for j in 0..=coarse.n2 {
        for i in 0..=coarse.n1 {
            u[coarse.index(i, j)] = sol.value(2 * i, 2 * j);
        }
    }
    Some(GridSolution { grid: coarse, u, ..sol.clone() })
}

fn grid_divergence_residual(sol: &GridSolution, f: &ExprNode) -> Result<(f64, f64, usize), IdentityError> {
    let g = &sol.grid;
    let big_f = Field::antiderivative(f, Symbol::U(0));
    let euler = big_f.euler(2);
    let (ux, uy) = grid_gradient(g, &sol.u);
    let mut z = vec![0.0; g.len()];
    for j in 0..=g.n2 {
        for i in 0..=g.n1 {
            let k = g.index(i, j);
            z[k] = g.x1(i) * ux[k] + g.x2(j) * uy[k];
        }
    }
    let (zx, zy) = grid_gradient(g, &z);
    let mut phi1 = vec![0.0; g.len()];
    let mut phi2 = vec![0.0; g.len()];
    let mut rhs = vec![0.0; g.len()];
    for j in 0..=g.n2 {
        for i in 0..=g.n1 {
            let k = g.index(i, j);
            let u = sol.u[k];
            let b = grid_binding(g, i, j, u);
            let (fv, fv_big) = (f.evaluate(&b)?, big_f.evaluate(&b)?);
            let bulk = 2.0 * fv_big - u * fv;
            phi1[k] = z[k] * ux[k] - u * zx[k] + g.x1(i) * bulk;
            phi2[k] = z[k] * uy[k] - u * zy[k] + g.x2(j) * bulk;
            rhs[k] = 4.0 * fv_big + 2.0 * euler.evaluate(&b)?;
        }
    }
    let (d1, _) = grid_gradient(g, &phi1);
    let (_, d2) = grid_gradient(g, &phi2);
    let res: Vec<f64> = (0..g.len()).map(|k| d1[k] + d2[k] - rhs[k]).collect();
    Ok(grid_norms(g, &res))
}

/// Pointwise check of the divergence form on a rectangle solution.
pub fn differential_form_residual_grid(sol: &GridSolution, f: &ExprNode) -> Result<ResidualSummary, IdentityError> {
    check_grid_symbols(f)?;
    let fine = grid_divergence_residual(sol, f)?;
    let coarse = match coarse_grid(sol) {
        Some(c) => Some(grid_divergence_residual(&c, f)?.0),
        None => None,
    };
    Ok(summarize(fine, coarse))
}

fn scalar_z_residual(sol: &RadialSolution, f: &ExprNode) -> Result<(f64, f64, usize), IdentityError> {
    let h = sol.spacing();
    let n = sol.n;
    let fu = f.differentiate(Symbol::U(0));
    let fr = ExprNode::mul(ExprNode::Var(Symbol::R), f.differentiate(Symbol::R)).simplify();
    let z: Vec<f64> = sol.r.iter().zip(&sol.du).map(|(r, d)| r * d).collect();
    let lap = radial_laplacian(&z, &sol.r, h, n);
    let mut res = vec![0.0; sol.len()];
    for i in 0..sol.len() {
        let b = radial_binding(sol.r[i], &[sol.u[i]], &[]);
        let lhs = lap[i] + fu.evaluate(&b)? * z[i];
        let rhs = -2.0 * f.evaluate(&b)? - fr.evaluate(&b)?;
        res[i] = lhs - rhs;
    }
    Ok(radial_norms(&res, &sol.r, h))
}

/// `w'' + (n-1) w'/r` with centered second differences.
fn radial_laplacian(w: &[f64], r: &[f64], h: f64, n: usize) -> Vec<f64> {
    let d1 = derivative(w, h);
    let mut out = vec![0.0; w.len()];
    for i in 1..w.len() - 1 {
        let d2 = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h);
        out[i] = d2 + (n - 1) as f64 * d1[i] / r[i];
    }
    out
}

/// Residual of `Δz + f_u z = -2f - x·f_x` for `z = x·∇u` on a radial solution.
pub fn z_equation_residual_radial(sol: &RadialSolution, f: &ExprNode) -> Result<ResidualSummary, IdentityError> {
    check_scalar_radial(sol, f)?;
    let fine = scalar_z_residual(sol, f)?;
    let coarse = match coarse_radial(sol) {
        Some(c) => Some(scalar_z_residual(&c, f)?.0),
        None => None,
    };
    Ok(summarize(fine, coarse))
}

fn grid_z_residual(sol: &GridSolution, f: &ExprNode) -> Result<(f64, f64, usize), IdentityError> {
    let g = &sol.grid;
    let fu = f.differentiate(Symbol::U(0));
    let fx1 = f.differentiate(Symbol::X(0));
    let fx2 = f.differentiate(Symbol::X(1));
    let fr = f.differentiate(Symbol::R);
    let (ux, uy) = grid_gradient(g, &sol.u);
    let mut z = vec![0.0; g.len()];
    for j in 0..=g.n2 {
        for i in 0..=g.n1 {
            let k = g.index(i, j);
            z[k] = g.x1(i) * ux[k] + g.x2(j) * uy[k];
        }
    }
    let (h1, h2) = (g.h1(), g.h2());
    let mut res = vec![0.0; g.len()];
    for j in 1..g.n2 {
        for i in 1..g.n1 {
            let k = g.index(i, j);
            let lap = (z[g.index(i - 1, j)] - 2.0 * z[k] + z[g.index(i + 1, j)]) / (h1 * h1)
                + (z[g.index(i, j - 1)] - 2.0 * z[k] + z[g.index(i, j + 1)]) / (h2 * h2);
            let b = grid_binding(g, i, j, sol.u[k]);
            let (x1, x2) = (g.x1(i), g.x2(j));
            let x_fx = x1 * fx1.evaluate(&b)? + x2 * fx2.evaluate(&b)? + x1.hypot(x2) * fr.evaluate(&b)?;
            res[k] = lap + fu.evaluate(&b)? * z[k] + 2.0 * f.evaluate(&b)? + x_fx;
        }
    }
    Ok(grid_norms(g, &res))
}

/// Residual of the `z`-equation on a rectangle solution.
pub fn z_equation_residual_grid(sol: &GridSolution, f: &ExprNode) -> Result<ResidualSummary, IdentityError> {
    check_grid_symbols(f)?;
    let fine = grid_z_residual(sol, f)?;
    let coarse = match coarse_grid(sol) {
        Some(c) => Some(grid_z_residual(&c, f)?.0),
        None => None,
    };
    Ok(summarize(fine, coarse))
}

/// Residuals of the equations for `p_k = x·∇u_k` and `q_k = x·∇v_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemZResidual {
    /// One summary per equation, ordered `p_1, q_1, p_2, q_2, ...`.
    pub equations: Vec<(String, ResidualSummary)>,
}

impl SystemZResidual {
    pub fn max_residual(&self) -> f64 {
        self.equations.iter().fold(0.0f64, |m, (_, s)| m.max(s.max_residual))
    }
}

fn system_z_residuals(sols: &[RadialSolution], ham: &Hamiltonian) -> Result<Vec<(f64, f64, usize)>, IdentityError> {
    let s0 = &sols[0];
    let (h, n, len, m) = (s0.spacing(), s0.n, s0.len(), ham.m);
    let p: Vec<Vec<f64>> = sols.iter().map(|s| s.r.iter().zip(&s.du).map(|(r, d)| r * d).collect()).collect();
    let q: Vec<Vec<f64>> =
        sols.iter().map(|s| s.r.iter().zip(s.dv.as_ref().expect("pair")).map(|(r, d)| r * d).collect()).collect();
    let lap_p: Vec<Vec<f64>> = p.iter().map(|w| radial_laplacian(w, &s0.r, h, n)).collect();
    let lap_q: Vec<Vec<f64>> = q.iter().map(|w| radial_laplacian(w, &s0.r, h, n)).collect();
    let mut out = Vec::with_capacity(2 * m);
    for k in 0..m {
        let hv = ham.partial_v(k);
        let hu = ham.partial_u(k);
        // (first, lap, H_first, rows) for the p_k and q_k equations.
        for (lap, own) in [(&lap_p[k], &hv), (&lap_q[k], &hu)] {
            let cross_u: Vec<Field> = (0..m).map(|j| own.partial(Symbol::U(j as u8))).collect();
            let cross_v: Vec<Field> = (0..m).map(|j| own.partial(Symbol::V(j as u8))).collect();
            let x_own = own.euler(0);
            let mut res = vec![0.0; len];
            for i in 0..len {
                let (us, vs) = components(sols, i);
                let b = radial_binding(s0.r[i], &us, &vs);
                let mut lhs = lap[i];
                for j in 0..m {
                    lhs += cross_u[j].evaluate(&b)? * p[j][i] + cross_v[j].evaluate(&b)? * q[j][i];
                }
                let rhs = -2.0 * own.evaluate(&b)? - x_own.evaluate(&b)?;
                res[i] = lhs - rhs;
            }
            out.push(radial_norms(&res, &s0.r, h));
        }
    }
    Ok(out)
}

/// Residuals of the `p_k`, `q_k` equations for a radial Hamiltonian system.
pub fn z_equation_residual_system(
    sols: &[RadialSolution],
    ham: &Hamiltonian,
) -> Result<SystemZResidual, IdentityError> {
    check_pairs(sols, ham.m)?;
    ham.radial_symbols()?;
    let fine = system_z_residuals(sols, ham)?;
    let coarse: Option<Vec<RadialSolution>> = sols.iter().map(coarse_radial).collect();
    let coarse = match coarse {
        Some(c) => Some(system_z_residuals(&c, ham)?),
        None => None,
    };
    let mut equations = Vec::new();
    for (e, stats) in fine.into_iter().enumerate() {
        let (k, which) = (e / 2 + 1, if e % 2 == 0 { "p" } else { "q" });
        let name = if ham.m == 1 { which.to_string() } else { format!("{which}{k}") };
        equations.push((name, summarize(stats, coarse.as_ref().map(|c| c[e].0))));
    }
    Ok(SystemZResidual { equations })
}

/// One equality between independently computed integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEquality {
    pub lhs_name: String,
    pub rhs_name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_difference: f64,
}

fn equality(lhs_name: &str, lhs: f64, rhs_name: &str, rhs: f64) -> EnergyEquality {
    let scale = lhs.abs().max(rhs.abs()).max(defaults::REL_RESIDUAL_FLOOR);
    EnergyEquality {
        lhs_name: lhs_name.into(),
        rhs_name: rhs_name.into(),
        lhs,
        rhs,
        rel_difference: (lhs - rhs).abs() / scale,
    }
}

/// `∫ u f dx = ∫ |∇u|² dx` on a radial solution.
pub fn energy_identities_radial(sol: &RadialSolution, f: &ExprNode) -> Result<Vec<EnergyEquality>, IdentityError> {
    check_scalar_radial(sol, f)?;
    let w = radial_weights(sol)?;
    let mut uf = Vec::with_capacity(sol.len());
    for i in 0..sol.len() {
        uf.push(sol.u[i] * f.evaluate(&radial_binding(sol.r[i], &[sol.u[i]], &[]))?);
    }
    let grad: Vec<f64> = sol.du.iter().map(|d| d * d).collect();
    Ok(vec![equality("int u f", dot(&w, &uf), "int |grad u|^2", dot(&w, &grad))])
}

/// For each `k`: `∫ v_k H_{v_k}`, `∫ u_k H_{u_k}` and `∫ ∇u_k·∇v_k`, pairwise.
pub fn energy_identities_system(
    sols: &[RadialSolution],
    ham: &Hamiltonian,
) -> Result<Vec<EnergyEquality>, IdentityError> {
    check_pairs(sols, ham.m)?;
    ham.radial_symbols()?;
    let s0 = &sols[0];
    let w = radial_weights(s0)?;
    let mut out = Vec::new();
    for k in 0..ham.m {
        let (hu, hv) = (ham.partial_u(k), ham.partial_v(k));
        let (mut vhv, mut uhu) = (Vec::new(), Vec::new());
        for i in 0..s0.len() {
            let (us, vs) = components(sols, i);
            let b = radial_binding(s0.r[i], &us, &vs);
            vhv.push(vs[k] * hv.evaluate(&b)?);
            uhu.push(us[k] * hu.evaluate(&b)?);
        }
        let s = &sols[k];
        let cross: Vec<f64> = s.du.iter().zip(s.dv.as_ref().expect("pair")).map(|(a, b)| a * b).collect();
        let (a, b, c) = (dot(&w, &vhv), dot(&w, &uhu), dot(&w, &cross));
        let sfx = if ham.m == 1 { String::new() } else { format!("{}", k + 1) };
        let names =
            [format!("int v{sfx} H_v{sfx}"), format!("int u{sfx} H_u{sfx}"), format!("int grad u{sfx}.grad v{sfx}")];
        out.push(equality(&names[0], a, &names[1], b));
        out.push(equality(&names[0], a, &names[2], c));
        out.push(equality(&names[1], b, &names[2], c));
    }
    Ok(out)
}

/// `∫ u f dx = ∫ |∇u|² dx` on a rectangle solution.
pub fn energy_identities_grid(sol: &GridSolution, f: &ExprNode) -> Result<Vec<EnergyEquality>, IdentityError> {
    check_grid_symbols(f)?;
    let g = &sol.grid;
    let (ux, uy) = grid_gradient(g, &sol.u);
    let mut uf = vec![0.0; g.len()];
    let mut grad = vec![0.0; g.len()];
    for j in 0..=g.n2 {
        for i in 0..=g.n1 {
            let k = g.index(i, j);
            uf[k] = sol.u[k] * f.evaluate(&grid_binding(g, i, j, sol.u[k]))?;
            grad[k] = ux[k] * ux[k] + uy[k] * uy[k];
        }
    }
    let (nx, ny, h1, h2) = (g.n1 + 1, g.n2 + 1, g.h1(), g.h2());
    Ok(vec![equality("int u f", tensor_2d(&uf, nx, ny, h1, h2), "int |grad u|^2", tensor_2d(&grad, nx, ny, h1, h2))])
}

/// `z = x·∇u` (or `p_k`, `q_k`) and its radial derivative on the solution grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledGradientField {
    pub r: Vec<f64>,
    /// `(name, values, radial derivative)`: `z` for scalars, `p_k`, `q_k` for systems.
    pub fields: Vec<(String, Vec<f64>, Vec<f64>)>,
}

pub fn scaled_gradient(sols: &[RadialSolution]) -> Result<ScaledGradientField, IdentityError> {
    let s0 = sols.first().ok_or_else(|| IdentityError::GridMismatch("no solution supplied".into()))?;
    let h = s0.spacing();
    let mut fields = Vec::new();
    for (k, s) in sols.iter().enumerate() {
        if s.r != s0.r {
            return Err(IdentityError::GridMismatch("component pairs live on different grids".into()));
        }
        let sfx = if sols.len() == 1 { String::new() } else { format!("{}", k + 1) };
        let p: Vec<f64> = s.r.iter().zip(&s.du).map(|(r, d)| r * d).collect();
        let dp = derivative(&p, h);
        match &s.dv {
            None => fields.push((format!("z{sfx}"), p, dp)),
            Some(dv) => {
                let q: Vec<f64> = s.r.iter().zip(dv).map(|(r, d)| r * d).collect();
                let dq = derivative(&q, h);
                fields.push((format!("p{sfx}"), p, dp));
                fields.push((format!("q{sfx}"), q, dq));
            }
        }
    }
    Ok(ScaledGradientField { r: s0.r.clone(), fields })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, SymbolSet};
    use std::f64::consts::PI;

    fn radial(f: &str) -> ExprNode {
        parse(f, &SymbolSet::radial_pair()).unwrap()
    }

    /// `u = (1 - r²)/(2n)`: the solution of `Δu + 1 = 0` on the unit ball.
    fn parabola(n: usize, points: usize, pair: bool) -> RadialSolution {
        let r: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
        let c = 2.0 * n as f64;
        let u: Vec<f64> = r.iter().map(|r| (1.0 - r * r) / c).collect();
        let du: Vec<f64> = r.iter().map(|r| -2.0 * r / c).collect();
        let extra = pair.then(|| (u.clone(), du.clone()));
        RadialSolution::from_samples(n, r, u, du, extra).unwrap()
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn scalar_identity_on_the_parabola() {
        let rep = scalar_identity_radial(&parabola(3, 2049, false), &radial("1")).unwrap();
        assert!((rep.lhs_total - 4.0 * PI / 9.0).abs() < 1e-12);
        assert!((rep.rhs_boundary - 4.0 * PI / 9.0).abs() < 1e-12);
        assert!(rep.rel_residual < 1e-8);
        let sum: f64 = rep.lhs_terms.iter().map(|t| t.value).sum();
        assert!((sum - rep.lhs_total).abs() <= 1e-12 * rep.lhs_total.abs());
        assert!(rep.equation_residual < 1e-10);
    }

    #[test]
    fn two_dimensional_term_vanishes() {
        let rep = scalar_identity_radial(&parabola(2, 513, false), &radial("1")).unwrap();
        assert_eq!(rep.term("(2-n)uf"), Some(0.0));
    }

    #[test]
    fn pair_identity_on_the_parabola_for_any_a() {
        let sol = parabola(3, 2049, true);
        for a in [-5.0, 0.0, 1.0, 2.0, 7.0] {
            let rep = pair_identity_radial(&sol, &radial("1"), &radial("1"), a).unwrap();
            assert!((rep.lhs_total - 8.0 * PI / 9.0).abs() < 1e-12, "a = {a}");
            assert!((rep.rhs_boundary - 8.0 * PI / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn modified_hamiltonian_is_flagged() {
        let sol = parabola(3, 2049, true);
        let h = parse("(1 + r^2/4)*(u + v)", &SymbolSet::general(3, 1)).unwrap();
        let rep = general_identity(&[sol], &Hamiltonian::from_expr(&h, 1).unwrap(), &[1.0]).unwrap();
        assert!(rep.equation_residual_high());
        assert!(rep.abs_residual > 1e-3);
        assert!(!rep.passes(1e-5));
    }

    #[test]
    fn normalization_checks() {
        let sol = parabola(3, 65, true);
        let set = SymbolSet::general(3, 1);
        let varying = Hamiltonian::from_expr(&parse("x1 + u + v", &set).unwrap(), 1).unwrap();
        assert!(matches!(
            general_identity(std::slice::from_ref(&sol), &varying, &[1.0]),
            Err(IdentityError::NormalizationViolated { .. })
        ));
        let shifted = Hamiltonian::from_expr(&parse("3 + u + v", &set).unwrap(), 1).unwrap();
        let plain = Hamiltonian::from_expr(&parse("u + v", &set).unwrap(), 1).unwrap();
        let a = general_identity(std::slice::from_ref(&sol), &shifted, &[1.0]).unwrap();
        let b = general_identity(std::slice::from_ref(&sol), &plain, &[1.0]).unwrap();
        assert!((a.lhs_total - b.lhs_total).abs() < 1e-14);
        assert!(a.has_flag(|f| matches!(f, ReportFlag::ConstantTraceSubtracted { .. })));
        let non_radial = Hamiltonian::from_expr(&parse("x1*x1*u + u + v", &set).unwrap(), 1).unwrap();
        assert!(matches!(general_identity(&[sol], &non_radial, &[1.0]), Err(IdentityError::NonRadial(_))));
    }

    #[test]
    fn positivity_is_required_for_pairs() {
        let mut sol = parabola(3, 65, true);
        sol.v.as_mut().unwrap()[10] = -1.0;
        let err = pair_identity_radial(&sol, &radial("1"), &radial("1"), 1.0).unwrap_err();
        assert!(matches!(err, IdentityError::PositivityViolated { .. }));
    }

    #[test]
    fn differential_form_is_second_order_on_the_parabola() {
        let sol = parabola(3, 257, false);
        let s = differential_form_residual_radial(&sol, &radial("1")).unwrap();
        let order = s.estimated_order.unwrap();
        assert!((1.7..=2.3).contains(&order), "{order}");
    }

    #[test]
    fn z_equation_on_the_parabola() {
        let sol = parabola(3, 257, false);
        let s = z_equation_residual_radial(&sol, &radial("1")).unwrap();
        assert!(s.max_residual <= 1e-10, "{}", s.max_residual);
        let pair = parabola(3, 257, true);
        let z = z_equation_residual_system(&[pair], &Hamiltonian::from_pair(&radial("1"), &radial("1"))).unwrap();
        assert!(z.max_residual() <= 1e-8);
    }

    #[test]
    fn zero_data_have_zero_residuals() {
        let r: Vec<f64> = (0..65).map(|i| i as f64 / 64.0).collect();
        let zeros = vec![0.0; 65];
        let sol = RadialSolution::from_samples(3, r, zeros.clone(), zeros.clone(), None).unwrap();
        let f = radial("u^3 + r*u");
        assert_eq!(differential_form_residual_radial(&sol, &f).unwrap().max_residual, 0.0);
        assert_eq!(z_equation_residual_radial(&sol, &f).unwrap().max_residual, 0.0);
        let e = energy_identities_radial(&sol, &f).unwrap();
        assert_eq!((e[0].lhs, e[0].rhs, e[0].rel_difference), (0.0, 0.0, 0.0));
        let rep = scalar_identity_radial(&sol, &f).unwrap();
        assert_eq!((rep.lhs_total, rep.rhs_boundary, rep.rel_residual), (0.0, 0.0, 0.0));
    }

    #[test]
    fn energy_integrals_on_the_parabola() {
        let e = energy_identities_radial(&parabola(3, 1025, false), &radial("1")).unwrap();
        assert!((e[0].lhs - 4.0 * PI / 45.0).abs() < 1e-12);
        assert!((e[0].rhs - 4.0 * PI / 45.0).abs() < 1e-12);
        let pair = parabola(3, 1025, true);
        let e = energy_identities_system(&[pair], &Hamiltonian::from_pair(&radial("1"), &radial("1"))).unwrap();
        for eq in e {
            assert!((eq.lhs - 4.0 * PI / 45.0).abs() < 1e-12 && eq.rel_difference < 1e-10, "{eq:?}");
        }
    }

    #[test]
    fn scaled_gradient_vanishes_at_the_origin() {
        let f = scaled_gradient(&[parabola(3, 65, false)]).unwrap();
        let (name, z, _) = &f.fields[0];
        assert_eq!(name, "z");
        assert_eq!(z[0], 0.0);
        assert!((z[64] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn even_node_counts_are_rejected() {
        let r: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let u: Vec<f64> = r.iter().map(|r| 1.0 - r * r).collect();
        let sol = RadialSolution::from_samples(3, r, u.clone(), u, None).unwrap();
        assert!(matches!(scalar_identity_radial(&sol, &radial("1")), Err(IdentityError::GridMismatch(_))));
    }

    #[test]
    fn report_renders_as_text_and_json() {
        let rep = scalar_identity_radial(&parabola(3, 65, false), &radial("1")).unwrap();
        let text = rep.to_text();
        assert!(text.contains("lhs_total") && text.contains("2nF"));
        let json = serde_json::to_string(&rep).unwrap();
        let back: IdentityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
    }
}
