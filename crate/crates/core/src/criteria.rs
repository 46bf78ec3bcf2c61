//! Sign conditions that rule out positive solutions on star-shaped domains.
//!
//! Power nonlinearities are decided exactly from their exponents. General
//! expressions are checked on sample grids: those verdicts are labeled
//! "sampled, not proven", since the conditions quantify over every
//! `x ∈ Ω` and every `u, v > 0`.
//!
//! The conditions with free parameters `α_k` are affine in `α` at each
//! sample, so the best `α` maximizes the smallest normalized margin: a small
//! linear program, solved with cutting planes over the sample rows.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::expr::{Binding, ExprError, ExprNode, Field, Symbol};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CriteriaError {
    #[error("exponents must be positive and finite (p = {p}, q = {q})")]
    InvalidPower { p: f64, q: f64 },
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
    #[error("expression may not depend on {0} here")]
    InvalidSymbol(Symbol),
    #[error("{source} at sample {point:?}")]
    Expr { point: SamplePoint, source: ExprError },
}

/// Exponents of `Δu + v^p = 0`, `Δv + u^q = 0` in dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub n: usize,
    pub p: f64,
    pub q: f64,
}

impl PowerSpec {
    pub fn new(n: usize, p: f64, q: f64) -> Result<Self, CriteriaError> {
        if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
            return Err(CriteriaError::InvalidPower { p, q });
        }
        Ok(PowerSpec { n, p, q })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Nonexistence,
    Inconclusive,
    ConditionViolatedAt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "closed-form")]
    ClosedForm,
    #[serde(rename = "sampled")]
    Sampled,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Sampled => "sampled, not proven",
        }
    }
}

/// A named parameter value: `alpha` (one per pair), the identity constant
/// `a`, or a threshold exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub values: Vec<f64>,
}

impl Parameter {
    fn new(name: &str, values: Vec<f64>) -> Self {
        Parameter { name: name.to_string(), values }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub witness: Option<Parameter>,
    /// Where the condition fails (for `ConditionViolatedAt`) or is tightest.
    pub point: Option<SamplePoint>,
    /// Signed slack of the decisive inequality; positive when it holds.
    pub margin: f64,
    pub method: Method,
    pub note: Option<String>,
}

impl Verdict {
    pub fn is_nonexistence(&self) -> bool {
        self.outcome == Outcome::Nonexistence
    }
}

/// Position of `(p, q)` relative to the critical hyperbola.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HyperbolaClass {
    Subcritical,
    Critical,
    Supercritical,
}

impl HyperbolaClass {
    pub fn label(self) -> &'static str {
        match self {
            HyperbolaClass::Subcritical => "subcritical",
            HyperbolaClass::Critical => "critical",
            HyperbolaClass::Supercritical => "supercritical",
        }
    }
}

fn strict(margin: f64, scale: f64) -> bool {
    margin > defaults::STRICTNESS * scale.abs().max(1.0)
}

fn closed(outcome: Outcome, parameter: Option<Parameter>, margin: f64, note: Option<String>) -> Verdict {
    Verdict { outcome, witness: parameter, point: None, margin, method: Method::ClosedForm, note }
}

/// `Δ = (n-2)/n - 1/(p+1) - 1/(q+1)`; strictly positive `Δ` rules out
/// positive solutions. The witness is an `α` with `α(q+1)` and
/// `(1-α)(p+1)` both above `n/(n-2)`.
pub fn classify_hyperbola(s: PowerSpec) -> (HyperbolaClass, Verdict) {
    let n = s.n as f64;
    if s.n < 3 {
        let note = Some("(n-2)/n <= 0: the strict inequality cannot hold".to_string());
        let class = HyperbolaClass::Subcritical;
        return (
            class,
            closed(Outcome::Inconclusive, None, (n - 2.0) / n - 1.0 / (s.p + 1.0) - 1.0 / (s.q + 1.0), note),
        );
    }
    let (a, b) = (1.0 / (s.p + 1.0), 1.0 / (s.q + 1.0));
    let delta = (n - 2.0) / n - a - b;
    let scale = (n - 2.0) / n + a + b;
    let class = if strict(delta, scale) {
        HyperbolaClass::Supercritical
    } else if strict(-delta, scale) {
        HyperbolaClass::Subcritical
    } else {
        HyperbolaClass::Critical
    };
    let verdict = if class == HyperbolaClass::Supercritical {
        let k = n / (n - 2.0);
        let alpha = 0.5 * (k * b + 1.0 - k * a);
        closed(Outcome::Nonexistence, Some(Parameter::new("alpha", vec![alpha])), delta, None)
    } else {
        closed(Outcome::Inconclusive, None, delta, Some(format!("{} pair", class.label())))
    };
    (class, verdict)
}

/// `p > (n+2)/(n-2)` strictly.
pub fn scalar_supercritical(p: f64, n: usize) -> Verdict {
    if n < 3 {
        return closed(
            Outcome::Inconclusive,
            None,
            f64::NEG_INFINITY,
            Some("no finite critical exponent for n <= 2".into()),
        );
    }
    let threshold = (n as f64 + 2.0) / (n as f64 - 2.0);
    let margin = p - threshold;
    let outcome = if strict(margin, threshold) { Outcome::Nonexistence } else { Outcome::Inconclusive };
    closed(outcome, Some(Parameter::new("threshold", vec![threshold])), margin, None)
}

/// `q > (n+4)/(n-4)` strictly for `Δ²u = u^q`, `u = Δu = 0` on ∂Ω. The note
/// records the equivalent system datum `(p, q) = (1, q)`.
pub fn biharmonic_check(q: f64, n: usize) -> Verdict {
    if n <= 4 {
        return closed(Outcome::Inconclusive, None, f64::NEG_INFINITY, Some("threshold undefined for n <= 4".into()));
    }
    let threshold = (n as f64 + 4.0) / (n as f64 - 4.0);
    let margin = q - threshold;
    let outcome = if strict(margin, threshold) { Outcome::Nonexistence } else { Outcome::Inconclusive };
    let note = Some(format!("equivalent to the system with p = 1, q = {q}"));
    closed(outcome, Some(Parameter::new("threshold", vec![threshold])), margin, note)
}

/// Spatial samples for conditions with explicit `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Ball { radius: f64 },
    Rectangle { a1: f64, a2: f64 },
}

impl Default for Domain {
    fn default() -> Self {
        Domain::Ball { radius: 1.0 }
    }
}

impl Domain {
    /// Shells along the axes and two diagonals for balls; a tensor grid for
    /// rectangles (`n = 2`).
    pub fn points(&self, n: usize, count: usize) -> Vec<Vec<f64>> {
        let count = count.max(2);
        match *self {
            Domain::Ball { radius } => {
                let mut dirs: Vec<Vec<f64>> = Vec::new();
                for i in 0..n {
                    for sign in [1.0, -1.0] {
                        let mut d = vec![0.0; n];
                        d[i] = sign;
                        dirs.push(d);
                    }
                }
                let c = 1.0 / (n as f64).sqrt();
                dirs.push(vec![c; n]);
                dirs.push((0..n).map(|i| if i % 2 == 0 { c } else { -c }).collect());
                let mut out = vec![vec![0.0; n]];
                for j in 1..count {
                    let r = radius * j as f64 / (count - 1) as f64;
                    out.extend(dirs.iter().map(|d| d.iter().map(|c| c * r).collect()));
                }
                out
            }
            Domain::Rectangle { a1, a2 } => {
                let mut out = Vec::with_capacity(count * count);
                for j in 0..count {
                    for i in 0..count {
                        let t = |k: usize| -1.0 + 2.0 * k as f64 / (count - 1) as f64;
                        let mut x = vec![0.0; n.max(2)];
                        x[0] = a1 * t(i);
                        x[1] = a2 * t(j);
                        out.push(x);
                    }
                }
                out
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    /// Search box for each `α_k`.
    pub alpha_range: (f64, f64),
    /// Logarithmic range of `u`, `v` samples.
    pub range: (f64, f64),
    /// Samples per `u`/`v` axis for a single pair.
    pub points: usize,
    /// Spatial samples per shell or axis.
    pub x_points: usize,
    /// Cap on `(u, v)` samples for several pairs; the per-axis count shrinks to fit.
    pub budget: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            alpha_range: defaults::CRITERIA_ALPHA_RANGE,
            range: defaults::CRITERIA_SAMPLE_RANGE,
            points: defaults::CRITERIA_SAMPLE_POINTS,
            x_points: defaults::CRITERIA_X_POINTS,
            budget: defaults::CRITERIA_SAMPLE_BUDGET,
        }
    }
}

impl SampleSpec {
    pub fn validate(&self) -> Result<(), CriteriaError> {
        let (lo, hi) = self.range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(CriteriaError::InvalidSampling(format!("sample range ({lo}, {hi})")));
        }
        let (a, b) = self.alpha_range;
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(CriteriaError::InvalidSampling(format!("alpha range ({a}, {b})")));
        }
        if self.points < 2 || self.x_points < 2 || self.budget < 16 {
            return Err(CriteriaError::InvalidSampling("too few samples".into()));
        }
        Ok(())
    }

    fn axis(&self, m: usize) -> Vec<f64> {
        let per_axis = if m <= 1 {
            self.points
        } else {
            let fit = (self.budget as f64).powf(1.0 / (2 * m) as f64).floor() as usize;
            fit.clamp(2, self.points)
        };
        let (lo, hi) = (self.range.0.ln(), self.range.1.ln());
        (0..per_axis).map(|i| (lo + (hi - lo) * i as f64 / (per_axis - 1) as f64).exp()).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOptions {
    #[serde(default)]
    pub samples: SampleSpec,
    #[serde(default)]
    pub domain: Domain,
    /// Skip the closed-form power reductions.
    #[serde(default)]
    pub force_sampling: bool,
}

/// `(symbol, coefficient, exponent)` of `c·s^e`, with a constant read as `e = 0`.
fn monomial(e: &ExprNode) -> Option<(Option<Symbol>, f64, f64)> {
    match e {
        ExprNode::Const(c) => Some((None, *c, 0.0)),
        ExprNode::Var(s) => Some((Some(*s), 1.0, 1.0)),
        ExprNode::Power(base, exp) => match (&**base, exp.as_const()) {
            (ExprNode::Var(s), Some(k)) => Some((Some(*s), 1.0, k)),
            _ => None,
        },
        ExprNode::Product(factors) => {
            let mut coeff = 1.0;
            let mut var = None;
            for f in factors {
                let (s, c, k) = monomial(f)?;
                coeff *= c;
                if let Some(s) = s {
                    if var.is_some() {
                        return None;
                    }
                    var = Some((s, k));
                }
            }
            Some(match var {
                Some((s, k)) => (Some(s), coeff, k),
                None => (None, coeff, 0.0),
            })
        }
        ExprNode::Quotient(num, den) => {
            let (s, c, k) = monomial(num)?;
            Some((s, c / den.as_const()?, k))
        }
        _ => None,
    }
}

fn terms(e: &ExprNode) -> Vec<&ExprNode> {
    match e {
        ExprNode::Sum(ts) => ts.iter().collect(),
        other => vec![other],
    }
}

/// Exponents `(a_k, b_k)` when `H = Σ_k c_k u_k^{a_k} + d_k v_k^{b_k}` with
/// positive coefficients and exponents.
fn power_hamiltonian(h: &ExprNode, m: usize) -> Option<Vec<(f64, f64)>> {
    let h = h.simplify();
    let mut ex: Vec<(Option<f64>, Option<f64>)> = vec![(None, None); m];
    for t in terms(&h) {
        let (s, c, k) = monomial(t)?;
        if !(c > 0.0 && k > 0.0) {
            return None;
        }
        let slot = match s? {
            Symbol::U(i) if (i as usize) < m => &mut ex[i as usize].0,
            Symbol::V(i) if (i as usize) < m => &mut ex[i as usize].1,
            _ => return None,
        };
        if slot.replace(k).is_some() {
            return None;
        }
    }
    ex.into_iter().map(|(a, b)| Some((a?, b?))).collect()
}

/// `(c, q)` when `g = c·u^q` with `c > 0`, `q >= 0`.
fn power_source(g: &ExprNode) -> Option<(f64, f64)> {
    let g = g.simplify();
    match monomial(&g)? {
        (Some(Symbol::U(0)), c, q) | (None, c, q) if c > 0.0 && q >= 0.0 => Some((c, q)),
        _ => None,
    }
}

/// Normalized affine margins `a·α + b` at each sample, stored flat.
struct Rows {
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    points: Vec<SamplePoint>,
}

impl Rows {
    fn len(&self) -> usize {
        self.b.len()
    }

    fn margin(&self, i: usize, alpha: &[f64]) -> f64 {
        let row = &self.a[i * self.m..(i + 1) * self.m];
        row.iter().zip(alpha).map(|(a, x)| a * x).sum::<f64>() + self.b[i]
    }

    /// Smallest margin and its row.
    fn worst(&self, alpha: &[f64]) -> (f64, usize) {
        (0..self.len())
            .into_par_iter()
            .map(|i| (self.margin(i, alpha), i))
            .reduce(|| (f64::INFINITY, usize::MAX), |x, y| if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x })
    }
}

fn solve_lp(rows: &Rows, active: &[usize], range: (f64, f64)) -> Option<Vec<f64>> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let alpha: Vec<_> = (0..rows.m).map(|_| lp.add_var(0.0, range)).collect();
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for &i in active {
        let mut expr: Vec<_> = alpha.iter().enumerate().map(|(k, v)| (*v, rows.a[i * rows.m + k])).collect();
        expr.push((t, -1.0));
        lp.add_constraint(expr, ComparisonOp::Ge, -rows.b[i]);
    }
    let sol = lp.solve().ok()?;
    Some(alpha.iter().map(|v| sol[*v]).collect())
}

/// `α` in the box maximizing `min_i margin_i(α)`.
fn maximin(rows: &Rows, range: (f64, f64)) -> Vec<f64> {
    let m = rows.m;
    let mid = vec![0.5 * (range.0 + range.1); m];
    if rows.len() == 0 || m == 0 {
        return mid;
    }
    let mut active: Vec<usize> = Vec::new();
    for k in 0..m {
        let coef = |i: &usize| rows.a[i * m + k];
        let lo = (0..rows.len()).min_by(|x, y| coef(x).total_cmp(&coef(y)));
        let hi = (0..rows.len()).max_by(|x, y| coef(x).total_cmp(&coef(y)));
        active.extend(lo.into_iter().chain(hi));
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|x, y| rows.margin(*x, &mid).total_cmp(&rows.margin(*y, &mid)));
    active.extend(order.iter().take(64));
    active.sort_unstable();
    active.dedup();
    let mut best = mid;
    for _ in 0..100 {
        let Some(alpha) = solve_lp(rows, &active, range) else { break };
        let lp_value = active.iter().map(|&i| rows.margin(i, &alpha)).fold(f64::INFINITY, f64::min);
        let cut = lp_value - 1e-13 * (1.0 + lp_value.abs());
        let mut violated: Vec<(f64, usize)> = (0..rows.len())
            .into_par_iter()
            .filter_map(|i| {
                let v = rows.margin(i, &alpha);
                (v < cut).then_some((v, i))
            })
            .collect();
        best = alpha;
        if violated.is_empty() {
            break;
        }
        violated.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let before = active.len();
        active.extend(violated.iter().take(64).map(|(_, i)| *i));
        active.sort_unstable();
        active.dedup();
        if active.len() == before {
            break;
        }
    }
    best
}

fn check_symbols(e: &ExprNode, n: usize, m: usize, allow_x: bool) -> Result<(), CriteriaError> {
    for s in e.free_symbols() {
        let ok = match s {
            Symbol::U(k) | Symbol::V(k) => (k as usize) < m,
            Symbol::X(i) => allow_x && (i as usize) < n,
            Symbol::R => allow_x,
        };
        if !ok {
            return Err(CriteriaError::InvalidSymbol(s));
        }
    }
    Ok(())
}

fn depends_on_space(e: &ExprNode) -> bool {
    e.free_symbols().iter().any(|s| matches!(s, Symbol::X(_) | Symbol::R))
}

fn binding(p: &SamplePoint) -> Binding {
    let mut b = Binding::new();
    let r = p.x.iter().map(|x| x * x).sum::<f64>().sqrt();
    b.set(Symbol::R, r);
    for (i, x) in p.x.iter().enumerate() {
        b.set(Symbol::X(i as u8), *x);
    }
    for (k, u) in p.u.iter().enumerate() {
        b.set(Symbol::U(k as u8), *u);
    }
    for (k, v) in p.v.iter().enumerate() {
        b.set(Symbol::V(k as u8), *v);
    }
    b
}

/// Every combination of spatial point and `(u_k, v_k)` samples.
fn sample_points(opts: &CheckOptions, n: usize, m: usize, with_v: bool, spatial: bool) -> Vec<SamplePoint> {
    let axis = opts.samples.axis(m);
    let xs = if spatial { opts.domain.points(n, opts.samples.x_points) } else { vec![vec![0.0; n]] };
    let dims = if with_v { 2 * m } else { m };
    let per = axis.len();
    let total = per.pow(dims as u32);
    let mut out = Vec::with_capacity(xs.len() * total);
    for x in &xs {
        for mut idx in 0..total {
            let mut vals = Vec::with_capacity(dims);
            for _ in 0..dims {
                vals.push(axis[idx % per]);
                idx /= per;
            }
            let (u, v) = if with_v { (vals[..m].to_vec(), vals[m..].to_vec()) } else { (vals, vec![]) };
            out.push(SamplePoint { x: x.clone(), u, v });
        }
    }
    out
}

/// Rows of `nH + (2-n)Σ(α_k u_k H_{u_k} + (1-α_k) v_k H_{v_k}) + x·H_x < 0`,
/// negated and divided by the sum of absolute term sizes.
fn hamiltonian_rows(h: &ExprNode, n: usize, m: usize, opts: &CheckOptions) -> Result<Rows, CriteriaError> {
    let nf = n as f64;
    let field = Field::exact(h.clone());
    let hu: Vec<ExprNode> = (0..m).map(|k| h.differentiate(Symbol::U(k as u8))).collect();
    let hv: Vec<ExprNode> = (0..m).map(|k| h.differentiate(Symbol::V(k as u8))).collect();
    let euler = field.euler(n);
    let points = sample_points(opts, n, m, true, depends_on_space(h));
    let evaluated: Result<Vec<(Vec<f64>, f64)>, CriteriaError> = points
        .par_iter()
        .map(|p| {
            let wrap = |source| CriteriaError::Expr { point: p.clone(), source };
            let b = binding(p);
            let hval = h.evaluate(&b).map_err(wrap)?;
            let xh = euler.evaluate(&b).map_err(wrap)?;
            let mut a = Vec::with_capacity(m);
            let (mut vsum, mut scale) = (0.0, nf * hval.abs() + xh.abs());
            for k in 0..m {
                let uhu = p.u[k] * hu[k].evaluate(&b).map_err(wrap)?;
                let vhv = p.v[k] * hv[k].evaluate(&b).map_err(wrap)?;
                a.push((2.0 - nf) * (uhu - vhv));
                vsum += vhv;
                scale += (nf - 2.0) * (uhu.abs() + vhv.abs());
            }
            let b0 = nf * hval + (2.0 - nf) * vsum + xh;
            let scale = if scale > 0.0 { scale } else { 1.0 };
            Ok((a.iter().map(|c| -c / scale).collect(), -b0 / scale))
        })
        .collect();
    let evaluated = evaluated?;
    let mut rows = Rows { m, a: Vec::with_capacity(m * points.len()), b: Vec::with_capacity(points.len()), points };
    for (a, b) in evaluated {
        rows.a.extend(a);
        rows.b.push(b);
    }
    Ok(rows)
}

fn sampled_verdict(rows: &Rows, alpha: Vec<f64>, name: &str) -> Verdict {
    let (margin, i) = rows.worst(&alpha);
    let point = (i < rows.len()).then(|| rows.points[i].clone());
    let outcome = if strict(margin, 1.0) { Outcome::Nonexistence } else { Outcome::ConditionViolatedAt };
    Verdict {
        outcome,
        witness: Some(Parameter::new(name, alpha)),
        point,
        margin,
        method: Method::Sampled,
        note: Some(format!("sampled, not proven: {} samples", rows.len())),
    }
}

/// Per-pair closed form for power Hamiltonians: each `α_k` must satisfy
/// `α_k a_k > n/(n-2)` and `(1-α_k) b_k > n/(n-2)`.
fn power_verdict(exps: &[(f64, f64)], n: usize, h: &ExprNode, opts: &CheckOptions) -> Result<Verdict, CriteriaError> {
    let k = n as f64 / (n as f64 - 2.0);
    let mut alpha = Vec::with_capacity(exps.len());
    let mut margin = f64::INFINITY;
    for &(a, b) in exps {
        let (lo, hi) = (k / a, 1.0 - k / b);
        alpha.push(0.5 * (lo + hi));
        margin = margin.min(hi - lo);
    }
    let holds = strict(margin, 1.0);
    let mut verdict = closed(
        if holds { Outcome::Nonexistence } else { Outcome::ConditionViolatedAt },
        Some(Parameter::new("alpha", alpha.clone())),
        margin,
        None,
    );
    if !holds {
        let rows = hamiltonian_rows(h, n, exps.len(), opts)?;
        verdict.point = Some(rows.points[rows.worst(&alpha).1].clone());
    }
    Ok(verdict)
}

/// `α u H_u + (1-α) v H_v > n/(n-2)·H` for all `u, v > 0`, for some `α`.
pub fn mitidieri_condition(h: &ExprNode, n: usize, opts: &CheckOptions) -> Result<Verdict, CriteriaError> {
    check_symbols(h, n, 1, false)?;
    general_condition(h, n, 1, opts)
}

/// `nH + (2-n)Σ(α_k u_k H_{u_k} + (1-α_k) v_k H_{v_k}) + Σ x_i H_{x_i} < 0`
/// on `Ω × (0,∞)^{2m}`, for some `α_1..α_m`.
pub fn general_condition(h: &ExprNode, n: usize, m: usize, opts: &CheckOptions) -> Result<Verdict, CriteriaError> {
    opts.samples.validate()?;
    check_symbols(h, n, m, true)?;
    if n < 3 {
        return Ok(closed(Outcome::Inconclusive, None, f64::NEG_INFINITY, Some("requires n >= 3".into())));
    }
    if !opts.force_sampling {
        if let Some(exps) = power_hamiltonian(h, m) {
            return power_verdict(&exps, n, h, opts);
        }
    }
    let rows = hamiltonian_rows(h, n, m, opts)?;
    let alpha = maximin(&rows, opts.samples.alpha_range);
    Ok(sampled_verdict(&rows, alpha, "alpha"))
}

/// `nG + (2-n)(1 - n/((n-2)(p+1))) u g + Σ x_i G_{x_i} < 0` on `Ω × (0,∞)`,
/// for `Δu + v^p = 0`, `Δv + g(x,u) = 0`. The witness is the identity
/// constant `a = 2n/((n-2)(p+1))`.
pub fn theorem2_condition(g: &ExprNode, p: f64, n: usize, opts: &CheckOptions) -> Result<Verdict, CriteriaError> {
    opts.samples.validate()?;
    check_symbols(g, n, 1, true)?;
    for s in g.free_symbols() {
        if matches!(s, Symbol::V(_)) {
            return Err(CriteriaError::InvalidSymbol(s));
        }
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(CriteriaError::InvalidPower { p, q: f64::NAN });
    }
    if n < 3 {
        return Ok(closed(Outcome::Inconclusive, None, f64::NEG_INFINITY, Some("requires n >= 3".into())));
    }
    let nf = n as f64;
    let a = 2.0 * nf / ((nf - 2.0) * (p + 1.0));
    let witness = Some(Parameter::new("a", vec![a]));
    let weight = (2.0 - nf) * (1.0 - nf / ((nf - 2.0) * (p + 1.0)));
    if !opts.force_sampling && !depends_on_space(g) {
        if let Some((_, q)) = power_source(g) {
            // c·u^{q+1}·[n/(q+1) + n/(p+1) - (n-2)] < 0.
            let margin = (nf - 2.0) - nf / (q + 1.0) - nf / (p + 1.0);
            let holds = strict(margin, nf);
            let mut v =
                closed(if holds { Outcome::Nonexistence } else { Outcome::ConditionViolatedAt }, witness, margin, None);
            if !holds {
                v.point = Some(SamplePoint { x: vec![0.0; n], u: vec![1.0], v: vec![] });
            }
            return Ok(v);
        }
    }
    let big_g = Field::antiderivative(g, Symbol::U(0));
    let euler = big_g.euler(n);
    let points = sample_points(opts, n, 1, false, depends_on_space(g));
    let margins: Result<Vec<f64>, CriteriaError> = points
        .par_iter()
        .map(|pt| {
            let wrap = |source| CriteriaError::Expr { point: pt.clone(), source };
            let b = binding(pt);
            let gv = big_g.evaluate(&b).map_err(wrap)?;
            let ug = pt.u[0] * g.evaluate(&b).map_err(wrap)?;
            let xg = euler.evaluate(&b).map_err(wrap)?;
            let q = nf * gv + weight * ug + xg;
            let scale = nf * gv.abs() + weight.abs() * ug.abs() + xg.abs();
            Ok(-q / if scale > 0.0 { scale } else { 1.0 })
        })
        .collect();
    let margins = margins?;
    let (i, margin) =
        margins.iter().enumerate().fold((0, f64::INFINITY), |best, (i, m)| if *m < best.1 { (i, *m) } else { best });
    let holds = strict(margin, 1.0);
    Ok(Verdict {
        outcome: if holds { Outcome::Nonexistence } else { Outcome::ConditionViolatedAt },
        witness,
        point: Some(points[i].clone()),
        margin,
        method: Method::Sampled,
        note: Some(format!("sampled, not proven: {} samples", points.len())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, SymbolSet};

    fn spec(n: usize, p: f64, q: f64) -> PowerSpec {
        PowerSpec::new(n, p, q).unwrap()
    }

    fn ham(text: &str, n: usize, m: usize) -> ExprNode {
        parse(text, &SymbolSet::general(n, m)).unwrap()
    }

    #[test]
    fn hyperbola_examples() {
        assert_eq!(classify_hyperbola(spec(3, 5.0, 5.0)).0, HyperbolaClass::Critical);
        assert_eq!(classify_hyperbola(spec(4, 3.0, 3.0)).0, HyperbolaClass::Critical);
        let (class, v) = classify_hyperbola(spec(4, 3.0, 4.0));
        assert_eq!(class, HyperbolaClass::Supercritical);
        assert!(v.is_nonexistence() && (v.margin - 0.05).abs() < 1e-15);
        assert_eq!(classify_hyperbola(spec(2, 10.0, 10.0)).1.outcome, Outcome::Inconclusive);
        assert_eq!(classify_hyperbola(spec(3, 1.0, 1.0)).0, HyperbolaClass::Subcritical);
    }

    #[test]
    fn hyperbola_witness_satisfies_both_bounds() {
        let (_, v) = classify_hyperbola(spec(3, 6.0, 8.0));
        let alpha = v.witness.unwrap().values[0];
        assert!(alpha * 9.0 > 3.0 && (1.0 - alpha) * 7.0 > 3.0);
    }

    #[test]
    fn scalar_thresholds() {
        assert!(scalar_supercritical(6.0, 3).is_nonexistence());
        assert_eq!(scalar_supercritical(5.0, 3).outcome, Outcome::Inconclusive);
        assert_eq!(scalar_supercritical(2.0, 6).outcome, Outcome::Inconclusive);
        assert!(scalar_supercritical(2.1, 6).is_nonexistence());
        assert_eq!(scalar_supercritical(100.0, 2).outcome, Outcome::Inconclusive);
    }

    #[test]
    fn biharmonic_thresholds() {
        assert!(biharmonic_check(10.0, 5).is_nonexistence());
        assert_eq!(biharmonic_check(9.0, 5).outcome, Outcome::Inconclusive);
        assert_eq!(biharmonic_check(100.0, 4).outcome, Outcome::Inconclusive);
        assert_eq!(classify_hyperbola(spec(5, 1.0, 10.0)).0, HyperbolaClass::Supercritical);
    }

    #[test]
    fn monomials_are_recognized() {
        assert_eq!(power_hamiltonian(&ham("u^7/7 + v^7/7", 3, 1), 1), Some(vec![(7.0, 7.0)]));
        assert_eq!(power_hamiltonian(&ham("2*u^3 + v", 3, 1), 1), Some(vec![(3.0, 1.0)]));
        assert_eq!(power_hamiltonian(&ham("u*v", 3, 1), 1), None);
        assert_eq!(power_hamiltonian(&ham("u^3 - v^2", 3, 1), 1), None);
        assert_eq!(power_hamiltonian(&ham("u1^3 + v1^3 + u2^4 + v2^5", 3, 2), 2), Some(vec![(3.0, 3.0), (4.0, 5.0)]));
        assert_eq!(power_source(&ham("u^4", 3, 1)), Some((1.0, 4.0)));
        assert_eq!(power_source(&ham("1", 3, 1)), Some((1.0, 0.0)));
    }

    #[test]
    fn mitidieri_power_cases() {
        let opts = CheckOptions::default();
        let v = mitidieri_condition(&ham("u^7/7 + v^7/7", 3, 1), 3, &opts).unwrap();
        assert!(v.is_nonexistence());
        assert!((v.witness.unwrap().values[0] - 0.5).abs() < 1e-15);
        let v = mitidieri_condition(&ham("u^3/3 + v^3/3", 3, 1), 3, &opts).unwrap();
        assert_eq!(v.outcome, Outcome::ConditionViolatedAt);
        assert!(v.point.is_some());
    }

    #[test]
    fn bilinear_hamiltonian_is_violated_everywhere() {
        let v = mitidieri_condition(&ham("u*v", 4, 1), 4, &CheckOptions::default()).unwrap();
        assert_eq!(v.outcome, Outcome::ConditionViolatedAt);
        assert!(v.margin < 0.0 && v.point.is_some());
        assert_eq!(v.method, Method::Sampled);
    }

    #[test]
    fn sampling_agrees_with_closed_form() {
        let forced = CheckOptions { force_sampling: true, ..CheckOptions::default() };
        for (text, expected) in
            [("u^7/7 + v^7/7", true), ("u^3/3 + v^3/3", false), ("u^5/5 + v^9/9", true), ("u^4/4 + v^9/9", false)]
        {
            let v = mitidieri_condition(&ham(text, 3, 1), 3, &forced).unwrap();
            assert_eq!(v.is_nonexistence(), expected, "{text}: {v:?}");
            assert_eq!(v.method, Method::Sampled);
        }
    }

    #[test]
    fn theorem2_examples() {
        let opts = CheckOptions::default();
        let set = SymbolSet::scalar(5);
        let v = theorem2_condition(&parse("u^10", &set).unwrap(), 1.0, 5, &opts).unwrap();
        assert!(v.is_nonexistence());
        assert!((v.witness.unwrap().values[0] - 10.0 / 6.0).abs() < 1e-15);
        let v = theorem2_condition(&parse("1", &SymbolSet::scalar(3)).unwrap(), 2.0, 3, &opts).unwrap();
        assert_eq!(v.outcome, Outcome::ConditionViolatedAt);
        assert!(v.point.is_some());
        // 2 + n/(p+1) > 0 on every sample.
        let forced = CheckOptions { force_sampling: true, ..opts };
        let v = theorem2_condition(&parse("1", &SymbolSet::scalar(3)).unwrap(), 2.0, 3, &forced).unwrap();
        assert_eq!(v.outcome, Outcome::ConditionViolatedAt);
        assert!((v.margin + 1.0).abs() < 1e-12, "{}", v.margin);
    }

    #[test]
    fn x_dependence_is_sampled() {
        let h = ham("(1 + r^2)*(u^7/7 + v^7/7)", 3, 1);
        let v = general_condition(&h, 3, 1, &CheckOptions::default()).unwrap();
        assert_eq!(v.method, Method::Sampled);
        assert!(v.point.is_some());
        assert!(matches!(
            mitidieri_condition(&h, 3, &CheckOptions::default()),
            Err(CriteriaError::InvalidSymbol(Symbol::R))
        ));
    }

    #[test]
    fn ball_samples_include_centre_and_rim() {
        let pts = Domain::Ball { radius: 2.0 }.points(3, 5);
        assert_eq!(pts[0], vec![0.0; 3]);
        let max = pts.iter().map(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt()).fold(0.0, f64::max);
        assert!((max - 2.0).abs() < 1e-15);
        assert_eq!(Domain::Rectangle { a1: 1.0, a2: 2.0 }.points(2, 4).len(), 16);
    }
}
