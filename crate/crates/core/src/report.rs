//! Result records, slope fits and CSV output.

use std::io::Write;

use serde::Serialize;

use crate::bands::BandData;
use crate::ensemble::{EnsembleBottom, InclusionReport};
use crate::error::{Error, Result};
use crate::expansion::EdgeExpansion;
use crate::lower::{HatCellProblem, LowerBoundRow};
use crate::scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Least-squares fit of `log|error|` against `log ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points_used: usize,
}

/// Fits over the points whose error exceeds the matching entry of `floors`.
pub fn fit_slope(eps: &[f64], errors: &[f64], floors: &[f64]) -> Result<SlopeFit> {
    if eps.len() != errors.len() || eps.len() != floors.len() {
        return Err(Error::InvalidInput("eps, errors and floors differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(errors)
        .zip(floors)
        .filter(|((e, r), f)| **e > 0.0 && r.abs() > **f && r.is_finite())
        .map(|((e, r), _)| (e.ln(), r.abs().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData {
            usable: pts.len(),
            needed: 4,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("eps values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        points_used: pts.len(),
    })
}

/// A fit, or the reason none was possible.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SlopeOutcome {
    Fitted(SlopeFit),
    Unavailable(String),
}

impl SlopeOutcome {
    pub fn from_result(r: Result<SlopeFit>) -> Self {
        match r {
            Ok(f) => SlopeOutcome::Fitted(f),
            Err(e) => SlopeOutcome::Unavailable(e.to_string()),
        }
    }

    pub fn slope(&self) -> Option<f64> {
        match self {
            SlopeOutcome::Fitted(f) => Some(f.slope),
            SlopeOutcome::Unavailable(_) => None,
        }
    }

    fn describe(&self) -> String {
        match self {
            SlopeOutcome::Fitted(f) => format!("{:.4} (residual {:.2e}, {} points)", f.slope, f.residual, f.points_used),
            SlopeOutcome::Unavailable(why) => format!("unavailable: {why}"),
        }
    }
}

/// Named pass/fail outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundsRow {
    pub eps: f64,
    pub upper: f64,
    pub rayleigh_oracle: f64,
    pub lower: f64,
    pub inf_estimate: f64,
    pub upper_minus_inf: f64,
    pub inf_minus_lower: f64,
    /// `|inf − (Λ₀ + εs*Λ₁ + ε²s*²Λ₂)|`.
    pub expansion_error: f64,
    /// 100 times the estimated eigensolve accuracy.
    pub precision_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsReport {
    pub rows: Vec<BoundsRow>,
    pub order_upper_gap: SlopeOutcome,
    pub order_lower_gap: SlopeOutcome,
    pub order_expansion_error: SlopeOutcome,
    pub checks: Vec<Check>,
}

impl BoundsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:>10} {:>24} {:>24} {:>24} {:>12} {:>12} {:>12}\n",
            "eps", "lower", "inf_estimate", "upper", "upper-inf", "inf-lower", "exp_error"
        ));
        for r in &self.rows {
            s.push_str(&format!(
                "{:>10.5} {:>24.16e} {:>24.16e} {:>24.16e} {:>12.3e} {:>12.3e} {:>12.3e}\n",
                r.eps, r.lower, r.inf_estimate, r.upper, r.upper_minus_inf, r.inf_minus_lower, r.expansion_error
            ));
        }
        s.push_str(&format!("order of upper - inf:      {}\n", self.order_upper_gap.describe()));
        s.push_str(&format!("order of inf - lower:      {}\n", self.order_lower_gap.describe()));
        s.push_str(&format!("order of expansion error:  {}\n", self.order_expansion_error.describe()));
        for c in &self.checks {
            s.push_str(&format!("[{}] {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        s
    }
}

/// Flat view of an edge expansion for JSON output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionRecord {
    pub theta0: f64,
    pub lambda0: f64,
    pub multiplicity: usize,
    /// 1-based index within the ground eigenspace.
    pub i0: usize,
    pub s_star: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3_coeffs: [f64; 4],
    pub psi1_norm_sq: f64,
    pub gap_at_theta0: f64,
    pub corrector_residual: f64,
    pub diagonal: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ExpansionRecord {
    pub fn from_expansion<T: Real>(e: &EdgeExpansion<T>) -> Self {
        Self {
            theta0: e.triple.theta0.to_f64_lossy(),
            lambda0: e.lambda0.to_f64_lossy(),
            multiplicity: e.multiplicity,
            i0: e.triple.i0 + 1,
            s_star: e.triple.s_star.to_f64_lossy(),
            lambda1: e.triple.lambda1.to_f64_lossy(),
            lambda2: e.lambda2.to_f64_lossy(),
            lambda3_coeffs: e.lambda3.coeffs.map(|c| c.to_f64_lossy()),
            psi1_norm_sq: e.psi1_norm_sq.to_f64_lossy(),
            gap_at_theta0: e.gap_at_theta0.to_f64_lossy(),
            corrector_residual: e.corrector_residual.to_f64_lossy(),
            diagonal: e.diagonal.iter().map(|d| d.to_f64_lossy()).collect(),
            warnings: e.warnings.clone(),
        }
    }
}

/// Cell-problem scalars that head the lower-bound CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HatRecord {
    pub b1_left: f64,
    pub b1_right: f64,
    pub antisymmetry_defect: f64,
    pub hat_lambda0: f64,
    pub hat_gap: f64,
    pub hat_lambda2: f64,
    pub psi0_residual: f64,
}

impl HatRecord {
    pub fn from_problem<T: Real>(h: &HatCellProblem<T>) -> Self {
        Self {
            b1_left: h.b.b1_left.to_f64_lossy(),
            b1_right: h.b.b1_right.to_f64_lossy(),
            antisymmetry_defect: h.b.antisymmetry_defect.to_f64_lossy(),
            hat_lambda0: h.hat_lambda0.to_f64_lossy(),
            hat_gap: h.hat_gap.to_f64_lossy(),
            hat_lambda2: h.hat_lambda2.to_f64_lossy(),
            psi0_residual: h.psi0_residual.to_f64_lossy(),
        }
    }
}

fn header(out: &mut dyn Write, command: &str, extra: &str) -> Result<()> {
    let line = if extra.is_empty() {
        format!("# edgeshift {VERSION} {command}\n")
    } else {
        format!("# edgeshift {VERSION} {command} {extra}\n")
    };
    out.write_all(line.as_bytes()).map_err(io_err)
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn num<T: Real>(x: T) -> String {
    format!("{:e}", x.to_f64_lossy())
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(io_err)?.flush().map_err(io_err)
}

/// `theta, E0, E1, …`.
pub fn write_bands_csv<T: Real>(out: &mut dyn Write, band: &BandData<T>) -> Result<()> {
    header(out, "bands", "")?;
    let mut w = csv::Writer::from_writer(out);
    let n = band.energies.first().map_or(0, |e| e.len());
    let mut head = vec!["theta".to_string()];
    head.extend((0..n).map(|k| format!("E{k}")));
    w.write_record(&head).map_err(io_err)?;
    for (th, e) in band.theta_samples.iter().zip(&band.energies) {
        let mut rec = vec![num(*th)];
        rec.extend(e.iter().map(|v| num(*v)));
        w.write_record(&rec).map_err(io_err)?;
    }
    finish(w)
}

pub fn write_lower_csv<T: Real>(out: &mut dyn Write, hat: &HatRecord, rows: &[LowerBoundRow<T>]) -> Result<()> {
    header(
        out,
        "lower",
        &format!(
            "b1_left={:e} b1_right={:e} hat_lambda0={:e} hat_gap={:e} hat_lambda2={:e}",
            hat.b1_left, hat.b1_right, hat.hat_lambda0, hat.hat_gap, hat.hat_lambda2
        ),
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eps", "s_min_at", "lambda_min", "expansion", "deficit", "inferred_C", "per_s_remainder"])
        .map_err(io_err)?;
    for r in rows {
        w.write_record([
            num(r.eps),
            num(r.s_min_at),
            num(r.lambda_min),
            num(r.expansion),
            num(r.deficit),
            num(r.inferred_c),
            num(r.per_s_remainder),
        ])
        .map_err(io_err)?;
    }
    finish(w)
}

/// One row per (configuration, momentum), then a summary row per `ε`.
pub fn write_spectrum_csv<T: Real>(out: &mut dyn Write, bottoms: &[EnsembleBottom<T>], n_eigs: usize) -> Result<()> {
    header(out, "spectrum", "")?;
    let mut w = csv::Writer::from_writer(out);
    let mut head: Vec<String> = ["eps", "period", "config_id", "config_values", "momentum"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    head.extend((0..n_eigs).map(|k| format!("e{k}")));
    w.write_record(&head).map_err(io_err)?;
    for b in bottoms {
        for (id, s) in b.table.iter().enumerate() {
            for (th, e) in s.momentum_samples.iter().zip(&s.eigenvalues) {
                let mut rec = vec![
                    num(b.eps),
                    s.config.period().to_string(),
                    id.to_string(),
                    s.config.label(),
                    num(*th),
                ];
                rec.extend((0..n_eigs).map(|k| e.get(k).map_or(String::new(), |v| num(*v))));
                w.write_record(&rec).map_err(io_err)?;
            }
        }
        let best = &b.table[b.argmin];
        let mut rec = vec![
            num(b.eps),
            best.config.period().to_string(),
            "inf_estimate".to_string(),
            best.config.label(),
            String::new(),
            num(b.inf_estimate),
        ];
        rec.extend((1..n_eigs).map(|_| String::new()));
        w.write_record(&rec).map_err(io_err)?;
    }
    finish(w)
}

pub fn write_inclusion_csv(out: &mut dyn Write, reports: &[InclusionReport]) -> Result<()> {
    header(out, "inclusion", "")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eps", "cap", "eigenvalues_checked", "empirical_C", "worst_eigenvalue"])
        .map_err(io_err)?;
    for r in reports {
        w.write_record([
            format!("{:e}", r.eps),
            format!("{:e}", r.cap),
            r.eigenvalues_checked.to_string(),
            format!("{:e}", r.empirical_c),
            format!("{:e}", r.worst_eigenvalue),
        ])
        .map_err(io_err)?;
    }
    finish(w)
}

pub fn write_bounds_csv(out: &mut dyn Write, report: &BoundsReport) -> Result<()> {
    let slope = |s: &SlopeOutcome| s.slope().map_or("NA".to_string(), |v| format!("{v:.6}"));
    header(
        out,
        "bounds",
        &format!(
            "order_upper_gap={} order_lower_gap={} order_expansion_error={}{}",
            slope(&report.order_upper_gap),
            slope(&report.order_lower_gap),
            slope(&report.order_expansion_error),
            if report.all_passed() { "" } else { " FAILED" }
        ),
    )?;
    let mut w = csv::Writer::from_writer(out);
    for r in &report.rows {
        w.serialize(r).map_err(io_err)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(p: i32) -> (Vec<f64>, Vec<f64>) {
        let eps = vec![0.2, 0.1, 0.05, 0.025, 0.0125];
        let err = eps.iter().map(|e: &f64| 0.7 * e.powi(p)).collect();
        (eps, err)
    }

    #[test]
    fn exact_power_laws() {
        for p in [3, 4] {
            let (eps, err) = synthetic(p);
            let f = fit_slope(&eps, &err, &[0.0; 5]).unwrap();
            assert!((f.slope - p as f64).abs() < 1e-6, "{f:?}");
            assert!(f.residual < 1e-10);
            assert_eq!(f.points_used, 5);
        }
    }

    #[test]
    fn floor_excludes_points() {
        let (eps, err) = synthetic(3);
        assert!(matches!(
            fit_slope(&eps, &err, &[1e-3; 5]),
            Err(Error::InsufficientData { usable: 1, needed: 4 })
        ));
        let at_floor = vec![1e-17; 5];
        assert!(matches!(
            fit_slope(&eps, &at_floor, &[1e-14; 5]),
            Err(Error::InsufficientData { usable: 0, .. })
        ));
    }

    #[test]
    fn bounds_csv_is_stable() {
        let row = BoundsRow {
            eps: 0.1,
            upper: 1.0,
            rayleigh_oracle: 1.0,
            lower: 0.5,
            inf_estimate: 0.75,
            upper_minus_inf: 0.25,
            inf_minus_lower: 0.25,
            expansion_error: 1e-3,
            precision_floor: 1e-12,
        };
        let report = BoundsReport {
            rows: vec![row],
            order_upper_gap: SlopeOutcome::Unavailable("x".into()),
            order_lower_gap: SlopeOutcome::Unavailable("x".into()),
            order_expansion_error: SlopeOutcome::Unavailable("x".into()),
            checks: vec![],
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_bounds_csv(&mut a, &report).unwrap();
        write_bounds_csv(&mut b, &report).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# edgeshift "));
        assert_eq!(
            lines[1],
            "eps,upper,rayleigh_oracle,lower,inf_estimate,upper_minus_inf,inf_minus_lower,expansion_error,precision_floor"
        );
    }
}
