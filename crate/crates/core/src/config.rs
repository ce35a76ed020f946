//! JSON experiment descriptions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::disorder::{Alternative, DisorderSpec};
use crate::grid::{
    build_grid, CellGeometry, CoefficientEntry, CoefficientTable, Discretization, PerturbationFamily, PerturbationOp,
    PeriodicOperatorSpec, Scheme, KERNEL_SYMMETRIZE_TOL, MAX_TOTAL_NODES,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub m: usize,
    /// Ellipticity constant; defaults to half the minimum of the leading coefficient.
    #[serde(default)]
    pub c0: Option<f64>,
    pub coefficients: Vec<CoefficientEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default, rename = "L1")]
    pub l1: PerturbationOp,
    #[serde(default, rename = "L2")]
    pub l2: PerturbationOp,
    #[serde(default, rename = "L3a")]
    pub l3a: PerturbationOp,
    #[serde(default, rename = "L3b")]
    pub l3b: PerturbationOp,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            l1: PerturbationOp::zero(),
            l2: PerturbationOp::zero(),
            l3a: PerturbationOp::zero(),
            l3b: PerturbationOp::zero(),
            t_max: default_t_max(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    pub s_minus: f64,
    pub s_plus: f64,
    /// Defaults to the two endpoints.
    #[serde(default)]
    pub support: Option<Vec<f64>>,
    /// Defaults to uniform.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub alternative: Option<Alternative>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    #[default]
    Fourier,
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    pub scheme: SchemeConfig,
    #[serde(rename = "N")]
    pub n: usize,
    pub fd_order: usize,
    pub length: f64,
    /// Intervals of the closed cell grid used by the lower bound.
    pub hat_n: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeConfig::Fourier,
            n: 256,
            fd_order: 4,
            length: 1.0,
            hat_n: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub theta_points: usize,
    pub n_bands: usize,
    pub eps_list: Vec<f64>,
    pub s_grid: usize,
    pub max_period: usize,
    pub momenta_per_cell: usize,
    /// Eigenvalues below this level enter the inclusion check.
    pub inclusion_cap: f64,
    pub sample_count: usize,
    pub sample_period: usize,
    pub a2_tol: f64,
    pub refine_tol: f64,
    pub enumeration_cap: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            theta_points: 64,
            n_bands: 4,
            eps_list: vec![0.0125, 0.025, 0.05, 0.1, 0.2],
            s_grid: 33,
            max_period: 2,
            momenta_per_cell: 16,
            inclusion_cap: 100.0,
            sample_count: 50,
            sample_period: 4,
            a2_tol: 1e-5,
            refine_tol: 1e-10,
            enumeration_cap: 1 << 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F64,
    /// Double-double, about 32 significant digits.
    Dd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: OperatorConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    pub disorder: DisorderConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub sweeps: SweepConfig,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_t_max() -> f64 {
    1.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Validated objects built from a configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub op: PeriodicOperatorSpec,
    pub family: PerturbationFamily,
    pub disorder: DisorderSpec,
    pub disc: Discretization,
    pub hat_disc: Discretization,
    pub sweeps: SweepConfig,
    pub precision: Precision,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.build()?;
    Ok(cfg)
}

fn check_op(op: &PerturbationOp, name: &str, errors: &mut Vec<String>) {
    match op {
        PerturbationOp::IntegralKernel { kernel } => {
            let d = kernel.hermiticity_defect();
            if d > KERNEL_SYMMETRIZE_TOL {
                errors.push(format!("perturbation.{name}: kernel is not Hermitian (defect {d:e})"));
            }
        }
        PerturbationOp::DifferentialTerm { coefficients } if coefficients.order() > 2 => {
            errors.push(format!("perturbation.{name}: differential order above 2"));
        }
        _ => {}
    }
}

impl ExperimentConfig {
    /// Checks every field and cross-reference, collecting all violations.
    pub fn build(&self) -> Result<Experiment, ConfigError> {
        let mut errors = Vec::new();
        let o = &self.operator;

        let table = if o.m == 1 || o.m == 2 {
            match CoefficientTable::from_entries(o.m, &o.coefficients) {
                Ok(t) => Some(t),
                Err(es) => {
                    errors.extend(es.into_iter().map(|e| format!("operator.coefficients: {e}")));
                    None
                }
            }
        } else {
            errors.push(format!("operator.m must be 1 or 2, got {}", o.m));
            None
        };
        let d = &self.discretization;
        if !(d.length > 0.0 && d.length.is_finite()) {
            errors.push(format!("discretization.length must be positive, got {}", d.length));
        }
        let op = table.and_then(|t| {
            let lead = t.get(o.m, o.m);
            let min_lead = (0..4096)
                .map(|j| lead.eval(j as f64 / 4096.0, 1.0))
                .fold(f64::INFINITY, f64::min);
            let c0 = o.c0.unwrap_or(0.5 * min_lead);
            if !(c0 > 0.0) {
                errors.push(format!(
                    "operator: leading coefficient must be uniformly positive (minimum {min_lead:e}, c0 {c0:e})"
                ));
                return None;
            }
            if min_lead < c0 {
                errors.push(format!("operator: leading coefficient drops to {min_lead:e}, below c0 = {c0:e}"));
            }
            PeriodicOperatorSpec::new(t, c0).map_err(|e| errors.push(format!("operator: {e}"))).ok()
        });

        let p = &self.perturbation;
        if !(p.t_max > 0.0 && p.t_max.is_finite()) {
            errors.push(format!("perturbation.t_max must be positive, got {}", p.t_max));
        }
        for (op, name) in [(&p.l1, "L1"), (&p.l2, "L2"), (&p.l3a, "L3a"), (&p.l3b, "L3b")] {
            check_op(op, name, &mut errors);
        }
        let family = PerturbationFamily::new(p.l1.clone(), p.l2.clone(), p.l3a.clone(), p.l3b.clone(), p.t_max);

        let dc = &self.disorder;
        if !(dc.s_minus < dc.s_plus) {
            errors.push(format!(
                "disorder: s_minus ({}) must be below s_plus ({}); the random variables must be non-trivial",
                dc.s_minus, dc.s_plus
            ));
        }
        let support = dc.support.clone().unwrap_or_else(|| vec![dc.s_minus, dc.s_plus]);
        if !support.contains(&dc.s_minus) || !support.contains(&dc.s_plus) {
            errors.push("disorder.support must contain both s_minus and s_plus".into());
        }
        if support.iter().any(|s| *s < dc.s_minus || *s > dc.s_plus) {
            errors.push("disorder.support must lie inside [s_minus, s_plus]".into());
        }
        if let Some(w) = &dc.weights {
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                errors.push(format!("disorder.weights must sum to 1, got {total}"));
            }
        }
        let disorder = if dc.s_minus < dc.s_plus {
            match DisorderSpec::new(&support, dc.weights.as_deref()) {
                Ok(spec) => {
                    if let Some(a) = dc.alternative {
                        if a != spec.alternative() {
                            errors.push(format!(
                                "disorder.alternative is {a:?} but the endpoints imply {:?}",
                                spec.alternative()
                            ));
                        }
                    }
                    Some(spec)
                }
                Err(e) => {
                    errors.push(format!("disorder: {e}"));
                    None
                }
            }
        } else {
            None
        };

        let geometry = CellGeometry::new(d.length).ok();
        let scheme = match d.scheme {
            SchemeConfig::Fourier => Scheme::Fourier,
            SchemeConfig::FiniteDifference => Scheme::FiniteDifference(d.fd_order),
        };
        let disc = geometry.and_then(|g| build_grid(g, d.n, scheme).map_err(|e| errors.push(format!("discretization: {e}"))).ok());
        let hat_disc = geometry.and_then(|g| {
            Discretization::closed(g, d.hat_n, 4)
                .map_err(|e| errors.push(format!("discretization.hat_n: {e}")))
                .ok()
        });

        let s = &self.sweeps;
        if s.theta_points < 8 {
            errors.push(format!("sweeps.theta_points must be at least 8, got {}", s.theta_points));
        }
        if s.n_bands < 2 {
            errors.push(format!("sweeps.n_bands must be at least 2, got {}", s.n_bands));
        }
        if s.eps_list.is_empty() {
            errors.push("sweeps.eps_list is empty".into());
        }
        if s.eps_list.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            errors.push("sweeps.eps_list entries must be strictly positive".into());
        }
        if s.eps_list.windows(2).any(|w| !(w[0] < w[1])) {
            errors.push("sweeps.eps_list must be strictly ascending".into());
        }
        let smax = dc.s_minus.abs().max(dc.s_plus.abs());
        for e in &s.eps_list {
            if e * smax > p.t_max {
                errors.push(format!("eps = {e} gives |eps s| = {} above t_max = {}", e * smax, p.t_max));
            }
        }
        if s.s_grid < 33 {
            errors.push(format!("sweeps.s_grid must be at least 33, got {}", s.s_grid));
        }
        if !(1..=4).contains(&s.max_period) {
            errors.push(format!("sweeps.max_period must be in 1..=4, got {}", s.max_period));
        }
        if s.momenta_per_cell == 0 {
            errors.push("sweeps.momenta_per_cell must be positive".into());
        }
        if s.sample_count == 0 || s.sample_period == 0 {
            errors.push("sweeps.sample_count and sweeps.sample_period must be positive".into());
        }
        for period in [s.max_period, s.sample_period] {
            if period * d.n > MAX_TOTAL_NODES {
                errors.push(format!(
                    "a supercell of {period} cells with N = {} exceeds {MAX_TOTAL_NODES} nodes",
                    d.n
                ));
            }
        }
        if !(s.inclusion_cap > 0.0) {
            errors.push("sweeps.inclusion_cap must be positive".into());
        }
        if !(s.a2_tol > 0.0) || !(s.refine_tol > 0.0) {
            errors.push("sweeps.a2_tol and sweeps.refine_tol must be positive".into());
        }

        match (op, disorder, disc, hat_disc) {
            (Some(op), Some(disorder), Some(disc), Some(hat_disc)) if errors.is_empty() => Ok(Experiment {
                op,
                family,
                disorder,
                disc,
                hat_disc,
                sweeps: s.clone(),
                precision: self.precision,
                seed: self.seed,
                output_dir: self.output_dir.clone(),
            }),
            _ => Err(ConfigError::Validation(errors)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "operator": {"m": 1, "coefficients": [{"alpha": 1, "beta": 1, "terms": [[0, 1.0, 0.0]]}]},
        "perturbation": {"L1": {"kind": "multiplication", "v": [[1, 1.0, 0.0]]}},
        "disorder": {"s_minus": -1, "s_plus": 1}
    }"#;

    #[test]
    fn defaults_filled() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.discretization.n, 256);
        assert_eq!(cfg.sweeps.theta_points, 64);
        assert_eq!(cfg.sweeps.momenta_per_cell, 16);
        assert_eq!(cfg.precision, Precision::F64);
        let exp = cfg.build().unwrap();
        assert_eq!(exp.disorder.alternative(), Alternative::Signed);
        assert_eq!(exp.op.c0(), 0.5);
    }

    #[test]
    fn violations_are_aggregated() {
        let text = MINIMAL
            .replace(r#""s_minus": -1, "s_plus": 1"#, r#""s_minus": 1, "s_plus": 1"#)
            .replace(
                r#""disorder""#,
                r#""sweeps": {"eps_list": [0.0, 0.1], "theta_points": 4}, "disorder""#,
            );
        match parse_config_str(&text) {
            Err(ConfigError::Validation(v)) => {
                assert!(v.iter().any(|e| e.contains("non-trivial")), "{v:?}");
                assert!(v.iter().any(|e| e.contains("strictly positive")));
                assert!(v.iter().any(|e| e.contains("theta_points")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_config_str("{\n  \"operator\": 3\n}") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config_str(&MINIMAL.replace("\"m\": 1", "\"m\": 1, \"bogus\": 0")),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn eps_range_checked_against_t_max() {
        let text = MINIMAL.replace(r#""disorder""#, r#""sweeps": {"eps_list": [0.5, 2.0]}, "disorder""#);
        match parse_config_str(&text) {
            Err(ConfigError::Validation(v)) => assert!(v.iter().any(|e| e.contains("t_max"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let again = parse_config_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
