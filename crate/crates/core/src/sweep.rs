//! Batch classification of power pairs `Δu + v^p = 0`, `Δv + u^q = 0` over
//! a `(p, q)` grid, with optional shooting probes and identity checks, plus
//! refinement studies of the identity residuals.

use std::fmt::Write as _;
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{classify_hyperbola, HyperbolaClass, Outcome, PowerSpec};
use crate::defaults;
use crate::expr::{parse, ExprNode, SymbolSet};
use crate::grid::{solve_scalar_grid, NewtonConfig, RectDomain};
use crate::identity::{
    differential_form_residual_radial, differential_form_residual_system, pair_identity_radial, scalar_identity_grid,
    Hamiltonian,
};
use crate::radial::{shoot_pair, shoot_scalar, RadialError, RadialProblem, ShootingConfig};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("at least 3 levels required")]
    TooFewLevels,
    #[error("invalid level {0}")]
    InvalidLevel(usize),
    #[error("level {level}: {message}")]
    Level { level: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAction {
    CriteriaOnly,
    Probe,
    SolveVerify,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n: usize,
    pub p_range: (f64, f64),
    pub p_count: usize,
    pub q_range: (f64, f64),
    pub q_count: usize,
    #[serde(default = "default_action")]
    pub action: SweepAction,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_gate")]
    pub gate: f64,
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub svg: Option<String>,
}

fn default_action() -> SweepAction {
    SweepAction::CriteriaOnly
}

fn default_radius() -> f64 {
    1.0
}

fn default_gate() -> f64 {
    defaults::VERIFY_GATE
}

impl SweepSpec {
    pub fn criteria_only(n: usize, p_range: (f64, f64), q_range: (f64, f64), count: usize) -> Self {
        SweepSpec {
            n,
            p_range,
            p_count: count,
            q_range,
            q_count: count,
            action: SweepAction::CriteriaOnly,
            radius: 1.0,
            gate: defaults::VERIFY_GATE,
            csv: None,
            svg: None,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::InvalidSpec(m));
        for (name, (lo, hi)) in [("p_range", self.p_range), ("q_range", self.q_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
                return bad(format!("{name} must be positive with lo <= hi, got [{lo}, {hi}]"));
            }
        }
        if self.p_count < 2 || self.q_count < 2 {
            return bad(format!("counts must be at least 2, got {} x {}", self.p_count, self.q_count));
        }
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.gate.is_finite() && self.gate > 0.0) {
            return bad(format!("gate must be positive, got {}", self.gate));
        }
        Ok(())
    }

    /// Grid points in lexicographic `(p, q)` order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let axis = |(lo, hi): (f64, f64), count: usize| -> Vec<f64> {
            (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
        };
        let qs = axis(self.q_range, self.q_count);
        axis(self.p_range, self.p_count).into_iter().flat_map(|p| qs.iter().map(move |&q| (p, q))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShootingOutcome {
    Solved { alpha: f64, beta: f64 },
    NoBracket,
    NoConvergence { reason: String },
    Failed { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub q: f64,
    pub classification: HyperbolaClass,
    pub verdict: Outcome,
    pub shooting: Option<ShootingOutcome>,
    pub identity_residual: Option<f64>,
    pub notes: Vec<String>,
}

impl SweepRow {
    pub fn is_contradiction(&self) -> bool {
        self.notes.iter().any(|n| n.starts_with(CONTRADICTION))
    }
}

pub const CONTRADICTION: &str = "CONTRADICTION";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub total: usize,
    pub subcritical: usize,
    pub critical: usize,
    pub supercritical: usize,
    pub solved: usize,
    pub no_bracket: usize,
    pub no_convergence: usize,
    pub failed: usize,
    pub contradictions: usize,
    pub gate_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

/// Shooting budget of the probes: a capped start grid and horizon, so a
/// search that cannot succeed ends in `NoBracket`.
pub fn probe_config() -> ShootingConfig {
    ShootingConfig {
        alpha_points: defaults::PROBE_STARTS,
        bracket_horizon: defaults::PROBE_HORIZON_FACTOR,
        ..ShootingConfig::default()
    }
}

fn power(var: &str, e: f64) -> ExprNode {
    let set = SymbolSet::radial_pair().constant("e", e);
    parse(&format!("{var}^e"), &set).expect("power expression parses")
}

fn shoot_point(spec: &SweepSpec, p: f64, q: f64, row: &mut SweepRow) {
    let (f, g) = (power("v", p), power("u", q));
    let problem = match RadialProblem::pair(spec.n, spec.radius, f.clone(), g.clone()) {
        Ok(pr) => pr,
        Err(e) => {
            row.shooting = Some(ShootingOutcome::Failed { message: e.to_string() });
            return;
        }
    };
    let cfg = match spec.action {
        SweepAction::Probe => probe_config(),
        _ => ShootingConfig::default(),
    };
    let sol = match shoot_pair(&problem, &cfg) {
        Ok(sol) => sol,
        Err(e) => {
            row.shooting = Some(match e {
                RadialError::NoBracket { .. } => ShootingOutcome::NoBracket,
                RadialError::NoConvergence { reason, .. } => ShootingOutcome::NoConvergence { reason },
                other => ShootingOutcome::Failed { message: other.to_string() },
            });
            return;
        }
    };
    let beta = sol.beta.unwrap_or(f64::NAN);
    row.shooting = Some(ShootingOutcome::Solved { alpha: sol.alpha, beta });
    if row.classification == HyperbolaClass::Supercritical {
        row.notes.push(format!("{CONTRADICTION}: positive pair solved above the critical hyperbola"));
    }
    if spec.action != SweepAction::SolveVerify {
        return;
    }
    match pair_identity_radial(&sol, &f, &g, 1.0) {
        Ok(rep) => {
            row.identity_residual = Some(rep.rel_residual);
            if rep.equation_residual_high() {
                row.notes.push(format!("equation residual {:.3e}", rep.equation_residual));
            }
            if rep.rel_residual > spec.gate && row.classification == HyperbolaClass::Subcritical {
                row.notes.push(format!("identity residual above gate {:e}", spec.gate));
            }
        }
        Err(e) => row.notes.push(format!("identity: {e}")),
    }
}

fn evaluate(spec: &SweepSpec, p: f64, q: f64) -> SweepRow {
    let mut row = SweepRow {
        p,
        q,
        classification: HyperbolaClass::Subcritical,
        verdict: Outcome::Inconclusive,
        shooting: None,
        identity_residual: None,
        notes: Vec::new(),
    };
    match PowerSpec::new(spec.n, p, q) {
        Ok(s) => {
            let (class, verdict) = classify_hyperbola(s);
            row.classification = class;
            row.verdict = verdict.outcome;
        }
        Err(e) => {
            row.notes.push(e.to_string());
            return row;
        }
    }
    if spec.action != SweepAction::CriteriaOnly {
        shoot_point(spec, p, q, &mut row);
    }
    row
}

fn summarize(rows: &[SweepRow]) -> SweepSummary {
    let mut s = SweepSummary { total: rows.len(), ..SweepSummary::default() };
    for row in rows {
        match row.classification {
            HyperbolaClass::Subcritical => s.subcritical += 1,
            HyperbolaClass::Critical => s.critical += 1,
            HyperbolaClass::Supercritical => s.supercritical += 1,
        }
        match &row.shooting {
            Some(ShootingOutcome::Solved { .. }) => s.solved += 1,
            Some(ShootingOutcome::NoBracket) => s.no_bracket += 1,
            Some(ShootingOutcome::NoConvergence { .. }) => s.no_convergence += 1,
            Some(ShootingOutcome::Failed { .. }) => s.failed += 1,
            None => {}
        }
        if row.is_contradiction() {
            s.contradictions += 1;
        }
        if row.notes.iter().any(|n| n.starts_with("identity residual above gate")) {
            s.gate_failures += 1;
        }
    }
    s
}

/// Evaluates every grid point on the worker pool; rows come back in
/// lexicographic `(p, q)` order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport, SweepError> {
    spec.validate()?;
    let rows: Vec<SweepRow> = spec.points().par_iter().map(|&(p, q)| evaluate(spec, p, q)).collect();
    let summary = summarize(&rows);
    Ok(SweepReport { rows, summary })
}

pub const CSV_HEADER: [&str; 8] =
    ["p", "q", "classification", "verdict", "alpha", "beta", "identity_residual", "notes"];

fn outcome_label(o: Outcome) -> &'static str {
    match o {
        Outcome::Nonexistence => "Nonexistence",
        Outcome::Inconclusive => "Inconclusive",
        Outcome::ConditionViolatedAt => "ConditionViolatedAt",
    }
}

fn shooting_note(s: &ShootingOutcome) -> Option<String> {
    match s {
        ShootingOutcome::Solved { .. } => None,
        ShootingOutcome::NoBracket => Some("NoBracket".into()),
        ShootingOutcome::NoConvergence { reason } => Some(format!("NoConvergence: {reason}")),
        ShootingOutcome::Failed { message } => Some(format!("Failed: {message}")),
    }
}

/// Fixed-format CSV, byte-identical for identical reports.
pub fn write_csv<W: io::Write>(report: &SweepReport, w: W) -> Result<(), SweepError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in &report.rows {
        let (alpha, beta) = match &row.shooting {
            Some(ShootingOutcome::Solved { alpha, beta }) => (format!("{alpha:.12e}"), format!("{beta:.12e}")),
            _ => (String::new(), String::new()),
        };
        let residual = row.identity_residual.map(|r| format!("{r:.6e}")).unwrap_or_default();
        let notes: Vec<String> =
            row.shooting.iter().filter_map(shooting_note).chain(row.notes.iter().cloned()).collect();
        out.write_record([
            format!("{:.6}", row.p),
            format!("{:.6}", row.q),
            row.classification.label().to_string(),
            outcome_label(row.verdict).to_string(),
            alpha,
            beta,
            residual,
            notes.join("; "),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `q` on the critical hyperbola `1/(p+1) + 1/(q+1) = (n-2)/n`.
pub fn hyperbola_q(n: usize, p: f64) -> Option<f64> {
    let rest = (n as f64 - 2.0) / n as f64 - 1.0 / (p + 1.0);
    (rest > 0.0).then(|| 1.0 / rest - 1.0)
}

/// Scatter of the `(p, q)` plane on an 800×800 canvas: one marker shape per
/// class and the critical hyperbola as a polyline of 256 samples.
pub fn render_svg(spec: &SweepSpec, report: &SweepReport) -> String {
    const SIZE: f64 = 800.0;
    const MARGIN: f64 = 70.0;
    let span = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let (p0, p1) = span(spec.p_range);
    let (q0, q1) = span(spec.q_range);
    let inner = SIZE - 2.0 * MARGIN;
    let sx = |p: f64| MARGIN + (p - p0) / (p1 - p0) * inner;
    let sy = |q: f64| SIZE - MARGIN - (q - q0) / (q1 - q0) * inner;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="800" viewBox="0 0 800 800">"#);
    let _ = writeln!(s, r#"<rect width="800" height="800" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}"/></clipPath>"#
    );
    let _ =
        writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (p, q) = (p0 + t * (p1 - p0), q0 + t * (q1 - q0));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{p:.3}</text>"#,
            sx(p),
            SIZE - MARGIN + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{q:.3}</text>"#,
            MARGIN - 6.0,
            sy(q) + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="400" y="{}" font-size="16" text-anchor="middle">p</text>"#, SIZE - 20.0);
    let _ = writeln!(s, r#"<text x="20" y="400" font-size="16" text-anchor="middle">q</text>"#);
    let _ = writeln!(
        s,
        r#"<text x="400" y="40" font-size="14" text-anchor="middle">n = {}: circle subcritical, square critical, triangle supercritical</text>"#,
        spec.n
    );

    // The curve exists for p > 2/(n-2), with a vertical asymptote there.
    let start = if spec.n > 2 { p0.max(2.0 / (spec.n as f64 - 2.0)) } else { p1 };
    let q_cap = q1 + 10.0 * (q1 - q0);
    let curve: Vec<String> = if start < p1 {
        (1..=256)
            .filter_map(|i| {
                let p = start + (p1 - start) * i as f64 / 256.0;
                hyperbola_q(spec.n, p).map(|q| format!("{:.2},{:.2}", sx(p), sy(q.min(q_cap))))
            })
            .collect()
    } else {
        Vec::new()
    };
    if !curve.is_empty() {
        let _ = writeln!(
            s,
            r#"<polyline clip-path="url(#plot)" fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#,
            curve.join(" ")
        );
    }
    for row in &report.rows {
        let (x, y) = (sx(row.p), sy(row.q));
        let _ = match row.classification {
            HyperbolaClass::Subcritical => {
                writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#1f77b4"/>"##)
            }
            HyperbolaClass::Critical => {
                writeln!(s, r##"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="#2ca02c"/>"##, x - 4.0, y - 4.0)
            }
            HyperbolaClass::Supercritical => writeln!(
                s,
                r##"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="#d62728"/>"##,
                x,
                y - 5.0,
                x - 4.5,
                y + 4.0,
                x + 4.5,
                y + 4.0
            ),
        };
    }
    s.push_str("</svg>\n");
    s
}

/// Problems for refinement studies.
#[derive(Clone, Debug)]
pub enum StudyProblem {
    /// Radial scalar problem; levels are radial grid node counts.
    RadialScalar { n: usize, radius: f64, f: ExprNode },
    /// Radial pair; levels are radial grid node counts.
    RadialPair { n: usize, radius: f64, f: ExprNode, g: ExprNode },
    /// Rectangle; levels are nodes per side.
    Grid { domain: RectDomain, f: ExprNode },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub nodes: usize,
    pub h: f64,
    pub residual: f64,
    /// Observed order against the previous level.
    pub order: Option<f64>,
}

/// Residual at each refinement level with pairwise observed orders. Radial
/// levels measure the divergence-form residual, grid levels the gap between
/// the two sides of the integral identity.
pub fn convergence_study(problem: &StudyProblem, levels: &[usize]) -> Result<Vec<StudyRow>, SweepError> {
    if levels.len() < 3 {
        return Err(SweepError::TooFewLevels);
    }
    let fail = |level: usize| move |e: &dyn std::fmt::Display| SweepError::Level { level, message: e.to_string() };
    let measure = |level: usize| -> Result<(f64, f64), SweepError> {
        match problem {
            StudyProblem::RadialScalar { n, radius, f } => {
                if level < 3 || level.is_multiple_of(2) {
                    return Err(SweepError::InvalidLevel(level));
                }
                let p = RadialProblem::scalar(*n, *radius, f.clone()).map_err(|e| fail(level)(&e))?;
                let cfg = ShootingConfig { grid_points: level, ..ShootingConfig::default() };
                let sol = shoot_scalar(&p, &cfg).map_err(|e| fail(level)(&e))?;
                let r = differential_form_residual_radial(&sol, f).map_err(|e| fail(level)(&e))?;
                Ok((sol.spacing(), r.max_residual))
            }
            StudyProblem::RadialPair { n, radius, f, g } => {
                if level < 3 || level.is_multiple_of(2) {
                    return Err(SweepError::InvalidLevel(level));
                }
                let p = RadialProblem::pair(*n, *radius, f.clone(), g.clone()).map_err(|e| fail(level)(&e))?;
                let cfg = ShootingConfig { grid_points: level, ..ShootingConfig::default() };
                let sol = shoot_pair(&p, &cfg).map_err(|e| fail(level)(&e))?;
                let ham = Hamiltonian::from_pair(f, g);
                let r =
                    differential_form_residual_system(std::slice::from_ref(&sol), &ham).map_err(|e| fail(level)(&e))?;
                Ok((sol.spacing(), r.max_residual))
            }
            StudyProblem::Grid { domain, f } => {
                let grid = domain.mesh_points(level).map_err(|e| fail(level)(&e))?;
                let sol = solve_scalar_grid(&grid, f, &NewtonConfig::default()).map_err(|e| fail(level)(&e))?;
                let rep = scalar_identity_grid(&sol, f).map_err(|e| fail(level)(&e))?;
                Ok((grid.h1(), rep.abs_residual))
            }
        }
    };
    let mut rows: Vec<StudyRow> = Vec::with_capacity(levels.len());
    for &level in levels {
        let (h, residual) = measure(level)?;
        let order = rows.last().and_then(|prev| {
            let ratio = prev.residual / residual;
            (ratio > 0.0 && ratio.is_finite() && prev.h != h).then(|| ratio.ln() / (prev.h / h).ln())
        });
        rows.push(StudyRow { nodes: level, h, residual, order });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_lexicographic() {
        let spec = SweepSpec::criteria_only(3, (1.0, 2.0), (3.0, 5.0), 3);
        let pts = spec.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], (1.0, 3.0));
        assert_eq!(pts[1], (1.0, 4.0));
        assert_eq!(pts[3], (1.5, 3.0));
        assert_eq!(pts[8], (2.0, 5.0));
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec::criteria_only(3, (0.5, 8.0), (0.5, 8.0), 2);
        assert!(spec.validate().is_ok());
        spec.p_count = 1;
        assert!(spec.validate().is_err());
        spec.p_count = 2;
        spec.q_range = (0.0, 1.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn unknown_spec_keys_are_rejected() {
        let text = r#"{"n":3,"p_range":[1,2],"p_count":2,"q_range":[1,2],"q_count":2,"colour":"red"}"#;
        assert!(serde_json::from_str::<SweepSpec>(text).is_err());
    }

    #[test]
    fn hyperbola_curve() {
        let q = hyperbola_q(3, 5.0).unwrap();
        assert!((q - 5.0).abs() < 1e-12);
        assert!(hyperbola_q(3, 1.0).is_none());
    }

    #[test]
    fn too_few_levels() {
        let f = parse("1", &SymbolSet::scalar(2)).unwrap();
        let err = convergence_study(&StudyProblem::Grid { domain: RectDomain::unit_square(), f }, &[65]).unwrap_err();
        assert_eq!(err.to_string(), "at least 3 levels required");
    }
}
