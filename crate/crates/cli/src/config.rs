//! Run configuration: JSON with unknown keys rejected, checked before any
//! computation. The schema is published in `schema/run_config.schema.json`.

use std::fs;
use std::path::Path;

use pohozaev::criteria::{CheckOptions, Domain as CriteriaDomain, SampleSpec};
use pohozaev::defaults;
use pohozaev::expr::{parse, ExprNode, SymbolSet};
use pohozaev::grid::{NewtonConfig, RectDomain};
use pohozaev::radial::ShootingConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("expression {field} = {text:?}: {message}")]
    Expr { field: String, text: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Ball { radius: f64 },
    Rectangle { half_widths: (f64, f64) },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    /// `Δu + f = 0`.
    Scalar { f: String },
    /// `Δu + f = 0`, `Δv + g = 0`.
    Pair { f: String, g: String },
    /// `Δu_k + H_{v_k} = 0`, `Δv_k + H_{u_k} = 0`, `k = 1..m`.
    General {
        m: usize,
        #[serde(rename = "H")]
        h: String,
    },
    /// `f = v^p`, `g = u^q`.
    PowerPair { p: f64, q: f64 },
    /// `f = u^p`.
    PowerScalar { p: f64 },
    /// `Δ²u = u^q` with Navier conditions.
    Biharmonic { q: f64 },
}

impl ProblemConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemConfig::Scalar { .. } => "scalar",
            ProblemConfig::Pair { .. } => "pair",
            ProblemConfig::General { .. } => "general",
            ProblemConfig::PowerPair { .. } => "power_pair",
            ProblemConfig::PowerScalar { .. } => "power_scalar",
            ProblemConfig::Biharmonic { .. } => "biharmonic",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSettings {
    pub atol: Option<f64>,
    pub rtol: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub alpha_points: Option<usize>,
    pub bracket_horizon: Option<f64>,
    pub radius_tol: Option<f64>,
    pub boundary_tol: Option<f64>,
    pub grid_points: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub points_per_side: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub require_positive: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default)]
    pub radial: RadialSettings,
    #[serde(default)]
    pub grid: GridSettings,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaSettings {
    pub samples: Option<SampleSpec>,
    #[serde(default)]
    pub force_sampling: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub domain: DomainConfig,
    pub problem: ProblemConfig,
    /// Identity parameters: one report per value for pairs, or the `a_k`
    /// of a general system (length `m`).
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub criteria: CriteriaSettings,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.display().to_string(), source })
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig = load_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks and a trial parse of every expression.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dimension < 1 {
            return Err(ConfigError::Invalid("dimension must be at least 1".into()));
        }
        match self.domain {
            DomainConfig::Ball { radius } => positive("radius", radius)?,
            DomainConfig::Rectangle { half_widths: (a1, a2) } => {
                positive("half_widths[0]", a1)?;
                positive("half_widths[1]", a2)?;
                if self.dimension != 2 {
                    return Err(ConfigError::Invalid("rectangle domains require dimension 2".into()));
                }
            }
        }
        match &self.problem {
            ProblemConfig::General { m, .. } if *m < 1 => {
                return Err(ConfigError::Invalid("m must be at least 1".into()));
            }
            ProblemConfig::PowerPair { p, q } => {
                positive("p", *p)?;
                positive("q", *q)?;
            }
            ProblemConfig::PowerScalar { p } => positive("p", *p)?,
            ProblemConfig::Biharmonic { q } => positive("q", *q)?,
            _ => {}
        }
        if let (Some(a), ProblemConfig::General { m, .. }) = (&self.a, &self.problem) {
            if a.len() != *m {
                return Err(ConfigError::Invalid(format!("a must list m = {m} values, got {}", a.len())));
            }
        }
        if let Some(a) = &self.a {
            if a.is_empty() || a.iter().any(|x| !x.is_finite()) {
                return Err(ConfigError::Invalid("a must be a non-empty list of finite numbers".into()));
            }
        }
        if let Some(s) = &self.criteria.samples {
            s.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        self.shooting().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.newton().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(p) = self.solver.grid.points_per_side {
            if p < 3 {
                return Err(ConfigError::Invalid("points_per_side must be at least 3".into()));
            }
        }
        match &self.problem {
            ProblemConfig::Scalar { f } => {
                self.scalar_solver_expr(f)?;
                self.criteria_expr("f", f, 1)?;
            }
            ProblemConfig::Pair { f, g } => {
                if matches!(self.domain, DomainConfig::Rectangle { .. }) {
                    return Err(ConfigError::Invalid("pair problems require a ball domain".into()));
                }
                expr("f", f, &SymbolSet::radial_pair())?;
                expr("g", g, &SymbolSet::radial_pair())?;
            }
            ProblemConfig::General { m, h } => {
                self.criteria_expr("H", h, *m)?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn ball_radius(&self) -> Option<f64> {
        match self.domain {
            DomainConfig::Ball { radius } => Some(radius),
            DomainConfig::Rectangle { .. } => None,
        }
    }

    pub fn rect(&self) -> Option<RectDomain> {
        match self.domain {
            DomainConfig::Rectangle { half_widths: (a1, a2) } => Some(RectDomain { a1, a2 }),
            DomainConfig::Ball { .. } => None,
        }
    }

    /// `f` of a scalar problem in the symbols of the solver for the domain.
    pub fn scalar_solver_expr(&self, f: &str) -> Result<ExprNode, ConfigError> {
        match self.domain {
            DomainConfig::Ball { .. } => expr("f", f, &SymbolSet::radial_scalar()),
            DomainConfig::Rectangle { .. } => expr("f", f, &SymbolSet::scalar(2)),
        }
    }

    /// An expression in `{x1..xn, r, u1..um, v1..vm}`.
    pub fn criteria_expr(&self, field: &str, text: &str, m: usize) -> Result<ExprNode, ConfigError> {
        expr(field, text, &SymbolSet::general(self.dimension, m))
    }

    pub fn shooting(&self) -> ShootingConfig {
        let s = &self.solver.radial;
        let d = ShootingConfig::default();
        ShootingConfig {
            atol: s.atol.unwrap_or(d.atol),
            rtol: s.rtol.unwrap_or(d.rtol),
            alpha_min: s.alpha_min.unwrap_or(d.alpha_min),
            alpha_max: s.alpha_max.unwrap_or(d.alpha_max),
            alpha_points: s.alpha_points.unwrap_or(d.alpha_points),
            bracket_horizon: s.bracket_horizon.unwrap_or(d.bracket_horizon),
            radius_tol: s.radius_tol.unwrap_or(d.radius_tol),
            boundary_tol: s.boundary_tol.unwrap_or(d.boundary_tol),
            grid_points: s.grid_points.unwrap_or(d.grid_points),
            ..d
        }
    }

    pub fn newton(&self) -> NewtonConfig {
        let s = &self.solver.grid;
        let d = NewtonConfig::default();
        NewtonConfig {
            tol: s.tol.unwrap_or(d.tol),
            max_iter: s.max_iter.unwrap_or(d.max_iter),
            require_positive: s.require_positive.unwrap_or(d.require_positive),
            ..d
        }
    }

    pub fn points_per_side(&self) -> usize {
        self.solver.grid.points_per_side.unwrap_or(defaults::GRID_INTERVALS + 1)
    }

    pub fn check_options(&self) -> CheckOptions {
        let domain = match self.domain {
            DomainConfig::Ball { radius } => CriteriaDomain::Ball { radius },
            DomainConfig::Rectangle { half_widths: (a1, a2) } => CriteriaDomain::Rectangle { a1, a2 },
        };
        CheckOptions {
            samples: self.criteria.samples.clone().unwrap_or_default(),
            domain,
            force_sampling: self.criteria.force_sampling,
        }
    }
}

pub fn expr(field: &str, text: &str, set: &SymbolSet) -> Result<ExprNode, ConfigError> {
    parse(text, set).map_err(|e| ConfigError::Expr {
        field: field.to_string(),
        text: text.to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from(text: &str) -> Result<RunConfig, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    #[test]
    fn minimal_ball_config() {
        let cfg = from(
            r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "u^3"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.ball_radius(), Some(1.0));
        assert_eq!(cfg.shooting(), ShootingConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = from(r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "1"}, "colour": 1}"#)
            .unwrap_err();
        assert!(err.contains("colour"), "{err}");
        let err = from(r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1, "centre": 0}, "problem": {"type": "scalar", "f": "1"}}"#)
            .unwrap_err();
        assert!(err.contains("centre"), "{err}");
    }

    #[test]
    fn bad_expressions_and_shapes() {
        assert!(from(
            r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "scalar", "f": "u^"}}"#
        )
        .is_err());
        assert!(from(r#"{"dimension": 3, "domain": {"type": "rectangle", "half_widths": [1, 1]}, "problem": {"type": "scalar", "f": "1"}}"#).is_err());
        assert!(from(r#"{"dimension": 2, "domain": {"type": "rectangle", "half_widths": [1, 1]}, "problem": {"type": "pair", "f": "1", "g": "1"}}"#).is_err());
        assert!(from(r#"{"dimension": 3, "domain": {"type": "ball", "radius": 1}, "problem": {"type": "general", "m": 2, "H": "u1*v2"}, "a": [1]}"#).is_err());
        assert!(from(r#"{"dimension": 3, "domain": {"type": "ball", "radius": -1}, "problem": {"type": "power_pair", "p": 1, "q": 1}}"#).is_err());
    }

    #[test]
    fn solver_overrides() {
        let cfg = from(
            r#"{"dimension": 2, "domain": {"type": "rectangle", "half_widths": [0.5, 0.5]}, "problem": {"type": "scalar", "f": "1 + x1/2"},
                "solver": {"grid": {"points_per_side": 65, "tol": 1e-9}, "radial": {"grid_points": 513}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.points_per_side(), 65);
        assert_eq!(cfg.newton().tol, 1e-9);
        assert_eq!(cfg.shooting().grid_points, 513);
    }
}
