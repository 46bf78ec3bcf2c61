use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use pohozaev::criteria::{
    biharmonic_check, classify_hyperbola, general_condition, mitidieri_condition, scalar_supercritical,
    theorem2_condition, HyperbolaClass, PowerSpec, Verdict,
};
use pohozaev::expr::{ExprNode, Field, Symbol, SymbolSet};
use pohozaev::grid::{solve_scalar_grid, GridSolution};
use pohozaev::identity::{
    general_identity, pair_identity_radial, scalar_identity_grid, scalar_identity_radial, Hamiltonian, IdentityReport,
};
use pohozaev::radial::{shoot_pair, shoot_scalar, RadialProblem, RadialSolution};
use pohozaev::sweep::{self, convergence_study, render_svg, run_sweep, StudyProblem, StudyRow, SweepReport, SweepSpec};
use serde::{Deserialize, Serialize};

use crate::config::{expr, load_json, ConfigError, DomainConfig, ProblemConfig, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

/// A failed run, mapped to the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("identity residual {worst:e} exceeds the gate {gate:e}")]
    Gate { worst: f64, gate: f64 },
    #[error("supplied data do not solve the equations (equation residual {0:e})")]
    EquationResidual(f64),
    #[error("{0} exists; pass --force to overwrite")]
    Overwrite(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Gate { .. } => 4,
            Failure::EquationResidual(_) => 5,
            Failure::Overwrite(_) => 6,
            Failure::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Where a command writes its main output.
pub struct Sink {
    pub out: Option<PathBuf>,
    pub force: bool,
    pub format: Format,
}

impl Sink {
    fn guard(&self, paths: &[&Path]) -> Result<(), Failure> {
        if self.force {
            return Ok(());
        }
        match paths.iter().find(|p| p.exists()) {
            Some(p) => Err(Failure::Overwrite(p.display().to_string())),
            None => Ok(()),
        }
    }

    fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        }
        fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }

    /// Prints `text`, or writes it to `--out` when given.
    fn emit(&self, text: &str) -> Result<(), Failure> {
        match &self.out {
            Some(path) => {
                self.guard(&[path])?;
                Self::write_file(path, text.as_bytes())
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Problems the solvers accept, with expressions in solver symbols.
enum Solvable {
    RadialScalar(RadialProblem, ExprNode),
    RadialPair(RadialProblem, ExprNode, ExprNode),
    Grid(ExprNode),
}

fn power_text(var: &str, e: f64) -> String {
    format!("{var}^({e:?})")
}

fn solvable(cfg: &RunConfig) -> Result<Solvable, Failure> {
    let n = cfg.dimension;
    let radial = |f: &str| expr("f", f, &SymbolSet::radial_pair());
    let bad = |e: pohozaev::radial::RadialError| Failure::Config(e.to_string());
    let scalar_text;
    let pair_text;
    let (f, g) = match &cfg.problem {
        ProblemConfig::Scalar { f } => (f.as_str(), None),
        ProblemConfig::PowerScalar { p } => {
            scalar_text = power_text("u", *p);
            (scalar_text.as_str(), None)
        }
        ProblemConfig::Pair { f, g } => (f.as_str(), Some(g.clone())),
        ProblemConfig::PowerPair { p, q } => {
            pair_text = power_text("v", *p);
            (pair_text.as_str(), Some(power_text("u", *q)))
        }
        other => {
            return Err(Failure::Config(format!(
                "{} problems cannot be solved; supply solutions with --solution",
                other.kind()
            )))
        }
    };
    match (cfg.ball_radius(), g) {
        (Some(radius), None) => {
            let f = cfg.scalar_solver_expr(f)?;
            Ok(Solvable::RadialScalar(RadialProblem::scalar(n, radius, f.clone()).map_err(bad)?, f))
        }
        (Some(radius), Some(g)) => {
            let (f, g) = (radial(f)?, expr("g", &g, &SymbolSet::radial_pair())?);
            Ok(Solvable::RadialPair(RadialProblem::pair(n, radius, f.clone(), g.clone()).map_err(bad)?, f, g))
        }
        (None, None) => Ok(Solvable::Grid(cfg.scalar_solver_expr(f)?)),
        (None, Some(_)) => Err(Failure::Config("pair problems require a ball domain".into())),
    }
}

enum Solution {
    Radial(RadialSolution),
    Grid(GridSolution),
}

fn solve(cfg: &RunConfig, problem: &Solvable) -> Result<Solution, Failure> {
    let solver = |e: &dyn std::fmt::Display| Failure::Solver(e.to_string());
    match problem {
        Solvable::RadialScalar(p, _) => shoot_scalar(p, &cfg.shooting()).map(Solution::Radial).map_err(|e| solver(&e)),
        Solvable::RadialPair(p, _, _) => shoot_pair(p, &cfg.shooting()).map(Solution::Radial).map_err(|e| solver(&e)),
        Solvable::Grid(f) => {
            let rect = cfg.rect().expect("grid problems live on rectangles");
            let grid = rect.mesh_points(cfg.points_per_side()).map_err(|e| Failure::Config(e.to_string()))?;
            solve_scalar_grid(&grid, f, &cfg.newton()).map(Solution::Grid).map_err(|e| solver(&e))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub problem: String,
    pub dimension: usize,
    pub domain: DomainConfig,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub iterations: Option<usize>,
    pub newton_residual: Option<f64>,
    pub positive: Option<bool>,
    pub min_interior: Option<f64>,
    pub center: Option<f64>,
    pub nodes: Option<usize>,
    pub reason: Option<String>,
    pub solution_file: Option<String>,
}

impl SolveReport {
    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status        {:?}", self.status);
        let _ = writeln!(s, "problem       {} (n = {})", self.problem, self.dimension);
        let rows = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("newton_res", self.newton_residual),
            ("min_interior", self.min_interior),
            ("center", self.center),
        ];
        for (name, v) in rows {
            if let Some(v) = v {
                let _ = writeln!(s, "{name:<13} {v:.16e}");
            }
        }
        if let Some(k) = self.iterations {
            let _ = writeln!(s, "iterations    {k}");
        }
        if let Some(k) = self.nodes {
            let _ = writeln!(s, "nodes         {k}");
        }
        if let Some(r) = &self.reason {
            let _ = writeln!(s, "reason        {r}");
        }
        if let Some(f) = &self.solution_file {
            let _ = writeln!(s, "solution      {f}");
        }
        s
    }

    fn to_csv(&self) -> String {
        let mut s = String::from("key,value\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "{k},{}", csv_field(&v));
        };
        row("status", format!("{:?}", self.status).to_lowercase());
        row("problem", self.problem.clone());
        for (k, v) in [("alpha", self.alpha), ("beta", self.beta), ("newton_residual", self.newton_residual)] {
            row(k, v.map(|v| format!("{v:e}")).unwrap_or_default());
        }
        row("iterations", self.iterations.map(|k| k.to_string()).unwrap_or_default());
        row("reason", self.reason.clone().unwrap_or_default());
        s
    }
}

fn render<T: Serialize>(
    format: Format,
    value: &T,
    text: impl FnOnce() -> String,
    csv: impl FnOnce() -> String,
) -> String {
    match format {
        Format::Json => json(value),
        Format::Text => text(),
        Format::Csv => csv(),
    }
}

/// Solves the configured problem into `dir`: `solution.csv` and `report.json`.
pub fn cmd_solve(cfg: &RunConfig, dir: &Path, sink: &Sink) -> Result<(), Failure> {
    let problem = solvable(cfg)?;
    let (solution_path, report_path) = (dir.join("solution.csv"), dir.join("report.json"));
    sink.guard(&[&solution_path, &report_path])?;
    let mut report = SolveReport {
        status: SolveStatus::Solved,
        problem: cfg.problem.kind().to_string(),
        dimension: cfg.dimension,
        domain: cfg.domain.clone(),
        alpha: None,
        beta: None,
        iterations: None,
        newton_residual: None,
        positive: None,
        min_interior: None,
        center: None,
        nodes: None,
        reason: None,
        solution_file: None,
    };
    let outcome = solve(cfg, &problem);
    let mut csv = Vec::new();
    match &outcome {
        Ok(Solution::Radial(sol)) => {
            report.alpha = Some(sol.alpha);
            report.beta = sol.beta;
            report.iterations = Some(sol.iterations);
            report.nodes = Some(sol.len());
            report.positive = Some(true);
            sol.write_csv(&mut csv).map_err(|e| Failure::Io(e.to_string()))?;
        }
        Ok(Solution::Grid(sol)) => {
            report.iterations = Some(sol.newton_iterations);
            report.newton_residual = Some(sol.residual);
            report.positive = Some(sol.positive);
            report.min_interior = Some(sol.min_interior);
            report.center = sol.center();
            report.nodes = Some(sol.u.len());
            sol.write_csv(&mut csv).map_err(|e| Failure::Io(e.to_string()))?;
        }
        Err(e) => {
            report.status = SolveStatus::Failed;
            report.reason = Some(match e {
                Failure::Solver(m) => m.clone(),
                other => other.to_string(),
            });
        }
    }
    if outcome.is_ok() {
        Sink::write_file(&solution_path, &csv)?;
        report.solution_file = Some(solution_path.display().to_string());
    }
    Sink::write_file(&report_path, json(&report).as_bytes())?;
    let text = render(sink.format, &report, || report.to_text(), || report.to_csv());
    print!("{text}");
    outcome.map(|_| ())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub gate: f64,
    pub supplied: bool,
    pub passed: bool,
    pub reports: Vec<IdentityReport>,
}

fn read_radial(n: usize, path: &Path) -> Result<RadialSolution, Failure> {
    let file = File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    RadialSolution::read_csv(n, BufReader::new(file)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn read_grid(path: &Path) -> Result<GridSolution, Failure> {
    let file = File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    GridSolution::read_csv(BufReader::new(file)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn one_file(files: &[PathBuf]) -> Result<&Path, Failure> {
    match files {
        [f] => Ok(f),
        _ => Err(Failure::Config(format!("expected one --solution file, got {}", files.len()))),
    }
}

fn identity_failure(e: pohozaev::identity::IdentityError) -> Failure {
    Failure::Solver(format!("identity evaluation: {e}"))
}

/// Identity reports on the configured problem, from `files` when given and
/// from a fresh solve otherwise.
pub fn cmd_verify(
    cfg: &RunConfig,
    files: &[PathBuf],
    a_flag: Option<Vec<f64>>,
    gate: f64,
    sink: &Sink,
) -> Result<(), Failure> {
    let supplied = !files.is_empty();
    let a_values = a_flag.or_else(|| cfg.a.clone());
    let reports: Vec<IdentityReport> = match &cfg.problem {
        ProblemConfig::General { m, h } => {
            if files.len() != *m {
                return Err(Failure::Config(format!(
                    "general systems need m = {m} --solution files, got {}",
                    files.len()
                )));
            }
            if cfg.ball_radius().is_none() {
                return Err(Failure::Config("general systems require a ball domain".into()));
            }
            let sols = files.iter().map(|f| read_radial(cfg.dimension, f)).collect::<Result<Vec<_>, _>>()?;
            let h = expr("H", h, &SymbolSet::general(cfg.dimension, *m))?;
            let ham = Hamiltonian::from_expr(&h, *m).map_err(|e| Failure::Config(e.to_string()))?;
            let a = a_values.unwrap_or_else(|| vec![1.0; *m]);
            if a.len() != *m {
                return Err(Failure::Config(format!("a must list m = {m} values, got {}", a.len())));
            }
            vec![general_identity(&sols, &ham, &a).map_err(identity_failure)?]
        }
        _ => {
            let problem = solvable(cfg)?;
            let solution = if supplied {
                match &problem {
                    Solvable::Grid(_) => Solution::Grid(read_grid(one_file(files)?)?),
                    _ => Solution::Radial(read_radial(cfg.dimension, one_file(files)?)?),
                }
            } else {
                solve(cfg, &problem)?
            };
            match (&problem, &solution) {
                (Solvable::RadialScalar(_, f), Solution::Radial(sol)) => {
                    vec![scalar_identity_radial(sol, f).map_err(identity_failure)?]
                }
                (Solvable::RadialPair(_, f, g), Solution::Radial(sol)) => a_values
                    .unwrap_or_else(|| vec![1.0])
                    .iter()
                    .map(|&a| pair_identity_radial(sol, f, g, a).map_err(identity_failure))
                    .collect::<Result<_, _>>()?,
                (Solvable::Grid(f), Solution::Grid(sol)) => {
                    vec![scalar_identity_grid(sol, f).map_err(identity_failure)?]
                }
                _ => unreachable!("solution kind follows the problem kind"),
            }
        }
    };
    let worst_eq = reports
        .iter()
        .filter(|r| r.equation_residual_high())
        .map(|r| r.equation_residual)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let worst = reports.iter().map(|r| r.rel_residual).fold(0.0f64, f64::max);
    let passed = worst_eq.is_none() && worst <= gate;
    let output = VerifyOutput { gate, supplied, passed, reports };
    let text = render(
        sink.format,
        &output,
        || output.reports.iter().map(IdentityReport::to_text).collect::<Vec<_>>().join("\n"),
        || {
            let mut s =
                String::from("identity,params,lhs_total,rhs_boundary,abs_residual,rel_residual,equation_residual\n");
            for r in &output.reports {
                let params: Vec<String> = r.params.iter().map(|p| p.to_string()).collect();
                let _ = writeln!(
                    s,
                    "{},{},{:e},{:e},{:e},{:e},{:e}",
                    r.identity,
                    csv_field(&params.join(" ")),
                    r.lhs_total,
                    r.rhs_boundary,
                    r.abs_residual,
                    r.rel_residual,
                    r.equation_residual
                );
            }
            s
        },
    );
    sink.emit(&text)?;
    if let Some(eq) = worst_eq {
        return Err(Failure::EquationResidual(eq));
    }
    if worst > gate {
        return Err(Failure::Gate { worst, gate });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub criterion: String,
    pub classification: Option<HyperbolaClass>,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutput {
    pub dimension: usize,
    pub verdicts: Vec<CriterionVerdict>,
}

fn criterion(name: &str, verdict: Verdict) -> CriterionVerdict {
    CriterionVerdict { criterion: name.to_string(), classification: None, verdict }
}

/// Closed form of `∫_0^s e ds`, required for sampled conditions.
fn primitive(e: &ExprNode, s: Symbol, field: &str) -> Result<ExprNode, Failure> {
    Field::antiderivative(e, s).as_expr().ok_or_else(|| {
        Failure::Config(format!("{field} needs a closed-form antiderivative for the sampled conditions"))
    })
}

/// Exponent `p` when `e` is exactly `v^p` (or `v`).
fn pure_power_of_v(e: &ExprNode) -> Option<f64> {
    match e.simplify() {
        ExprNode::Var(Symbol::V(0)) => Some(1.0),
        ExprNode::Power(base, exp) => match (*base, exp.as_const()) {
            (ExprNode::Var(Symbol::V(0)), Some(p)) if p > 0.0 => Some(p),
            _ => None,
        },
        _ => None,
    }
}

fn criteria_failure(e: pohozaev::criteria::CriteriaError) -> Failure {
    Failure::Config(e.to_string())
}

/// Non-existence verdicts for the configured problem. Verdicts are results,
/// so every outcome exits 0.
pub fn cmd_check(cfg: &RunConfig, sink: &Sink) -> Result<(), Failure> {
    let n = cfg.dimension;
    let opts = cfg.check_options();
    let mut verdicts = Vec::new();
    match &cfg.problem {
        ProblemConfig::PowerPair { p, q } => {
            let (class, v) = classify_hyperbola(PowerSpec::new(n, *p, *q).map_err(criteria_failure)?);
            verdicts.push(CriterionVerdict { classification: Some(class), ..criterion("hyperbola", v) });
        }
        ProblemConfig::PowerScalar { p } => {
            verdicts.push(criterion("scalar_supercritical", scalar_supercritical(*p, n)))
        }
        ProblemConfig::Biharmonic { q } => verdicts.push(criterion("biharmonic", biharmonic_check(*q, n))),
        ProblemConfig::Scalar { f } => {
            // The scalar equation is the diagonal of the pair with H = F(u) + F(v).
            let f = cfg.criteria_expr("f", f, 1)?;
            let big_f = primitive(&f, Symbol::U(0), "f")?;
            let swap = |s: Symbol| if s == Symbol::U(0) { Symbol::V(0) } else { s };
            let h = ExprNode::add(big_f.clone(), big_f.rename(&swap));
            verdicts.push(criterion("scalar_pohozaev", general_condition(&h, n, 1, &opts).map_err(criteria_failure)?));
        }
        ProblemConfig::Pair { f, g } => {
            let (fe, ge) = (cfg.criteria_expr("f", f, 1)?, cfg.criteria_expr("g", g, 1)?);
            let h = ExprNode::add(primitive(&fe, Symbol::V(0), "f")?, primitive(&ge, Symbol::U(0), "g")?);
            let x_free = !h.free_symbols().iter().any(|s| matches!(s, Symbol::X(_) | Symbol::R));
            let v = if x_free { mitidieri_condition(&h, n, &opts) } else { general_condition(&h, n, 1, &opts) };
            verdicts.push(criterion("mitidieri", v.map_err(criteria_failure)?));
            if let Some(p) = pure_power_of_v(&fe) {
                verdicts.push(criterion("theorem2", theorem2_condition(&ge, p, n, &opts).map_err(criteria_failure)?));
            }
        }
        ProblemConfig::General { m, h } => {
            let h = cfg.criteria_expr("H", h, *m)?;
            verdicts.push(criterion("general", general_condition(&h, n, *m, &opts).map_err(criteria_failure)?));
        }
    }
    let output = CheckOutput { dimension: n, verdicts };
    let text = render(
        sink.format,
        &output,
        || {
            let mut s = String::new();
            for c in &output.verdicts {
                let v = &c.verdict;
                let _ = write!(s, "{:<22} {:?}  ({})  margin {:e}", c.criterion, v.outcome, v.method.label(), v.margin);
                if let Some(class) = c.classification {
                    let _ = write!(s, "  [{}]", class.label());
                }
                if let Some(w) = &v.witness {
                    let _ = write!(s, "  {} = {:?}", w.name, w.values);
                }
                if let Some(note) = &v.note {
                    let _ = write!(s, "  ({note})");
                }
                s.push('\n');
            }
            s
        },
        || {
            let mut s = String::from("criterion,classification,outcome,method,margin,witness,note\n");
            for c in &output.verdicts {
                let v = &c.verdict;
                let witness: Vec<String> =
                    v.witness.iter().flat_map(|w| w.values.iter().map(|x| x.to_string())).collect();
                let _ = writeln!(
                    s,
                    "{},{},{:?},{},{:e},{},{}",
                    c.criterion,
                    c.classification.map(|k| k.label()).unwrap_or(""),
                    v.outcome,
                    v.method.label(),
                    v.margin,
                    csv_field(&witness.join(" ")),
                    csv_field(v.note.as_deref().unwrap_or(""))
                );
            }
            s
        },
    );
    sink.emit(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub csv: String,
    pub svg: String,
    pub summary: sweep::SweepSummary,
}

pub fn cmd_sweep(spec_path: &Path, gate: Option<f64>, dir: &Path, sink: &Sink) -> Result<(), Failure> {
    let mut spec: SweepSpec = load_json(spec_path)?;
    if let Some(g) = gate {
        spec.gate = g;
    }
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let csv_path = spec.csv.as_ref().map(PathBuf::from).unwrap_or_else(|| dir.join("sweep.csv"));
    let svg_path = spec.svg.as_ref().map(PathBuf::from).unwrap_or_else(|| dir.join("sweep.svg"));
    sink.guard(&[&csv_path, &svg_path])?;
    let report: SweepReport = run_sweep(&spec).map_err(|e| Failure::Config(e.to_string()))?;
    let mut csv = Vec::new();
    sweep::write_csv(&report, &mut csv).map_err(|e| Failure::Io(e.to_string()))?;
    Sink::write_file(&csv_path, &csv)?;
    Sink::write_file(&svg_path, render_svg(&spec, &report).as_bytes())?;
    let output = SweepOutput {
        csv: csv_path.display().to_string(),
        svg: svg_path.display().to_string(),
        summary: report.summary.clone(),
    };
    let s = &output.summary;
    let text = render(
        sink.format,
        &output,
        || {
            format!(
                "rows {}  subcritical {}  critical {}  supercritical {}\nsolved {}  no_bracket {}  no_convergence {}  failed {}\ncontradictions {}  gate_failures {}\ncsv {}\nsvg {}\n",
                s.total,
                s.subcritical,
                s.critical,
                s.supercritical,
                s.solved,
                s.no_bracket,
                s.no_convergence,
                s.failed,
                s.contradictions,
                s.gate_failures,
                output.csv,
                output.svg
            )
        },
        || String::from_utf8_lossy(&csv).into_owned(),
    );
    print!("{text}");
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOutput {
    pub measure: String,
    pub rows: Vec<StudyRow>,
}

pub fn cmd_convergence(cfg: &RunConfig, levels: Option<Vec<usize>>, sink: &Sink) -> Result<(), Failure> {
    let (problem, measure, default_levels) = match solvable(cfg)? {
        Solvable::RadialScalar(p, f) => (
            StudyProblem::RadialScalar { n: p.n(), radius: p.radius(), f },
            "divergence-form residual",
            vec![513, 1025, 2049],
        ),
        Solvable::RadialPair(p, f, g) => (
            StudyProblem::RadialPair { n: p.n(), radius: p.radius(), f, g },
            "divergence-form residual",
            vec![513, 1025, 2049],
        ),
        Solvable::Grid(f) => {
            (StudyProblem::Grid { domain: cfg.rect().expect("rectangle"), f }, "identity gap", vec![65, 129, 257])
        }
    };
    let levels = levels.unwrap_or(default_levels);
    let rows = convergence_study(&problem, &levels).map_err(|e| match e {
        sweep::SweepError::Level { .. } => Failure::Solver(e.to_string()),
        other => Failure::Config(other.to_string()),
    })?;
    let output = ConvergenceOutput { measure: measure.to_string(), rows };
    let text = render(
        sink.format,
        &output,
        || {
            let mut s = format!("{}\n{:>7} {:>14} {:>14} {:>8}\n", output.measure, "nodes", "h", "residual", "order");
            for r in &output.rows {
                let order = r.order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(s, "{:>7} {:>14.6e} {:>14.6e} {:>8}", r.nodes, r.h, r.residual, order);
            }
            s
        },
        || {
            let mut s = String::from("nodes,h,residual,order\n");
            for r in &output.rows {
                let order = r.order.map(|o| o.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{},{:e},{:e},{order}", r.nodes, r.h, r.residual);
            }
            s
        },
    );
    sink.emit(&text)
}
