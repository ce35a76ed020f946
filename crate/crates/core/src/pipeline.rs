//! Command pipelines over a validated experiment.

use crate::bands::{compute_bands, BandData, BandOptions};
use crate::config::{Experiment, SweepConfig};
use crate::disorder::sample_configurations;
use crate::ensemble::{check_inclusion, EnsembleBottom, InclusionReport, SupercellSolver};
use crate::error::Result;
use crate::expansion::{expand, rayleigh_cross_check, EdgeExpansion};
use crate::grid::{assemble_bloch, assemble_family, build_grid, Discretization, PerturbationFamily, PeriodicOperatorSpec};
use crate::linalg::lowest_eigenvalue;
use crate::lower::{build_hat_problem, HatCellProblem, LowerBoundRow};
use crate::report::{fit_slope, BoundsReport, BoundsRow, Check, SlopeOutcome};
use crate::scalar::Real;

pub fn band_options(s: &SweepConfig) -> BandOptions {
    BandOptions {
        n_theta: s.theta_points,
        n_bands: s.n_bands,
        refine_tol: s.refine_tol,
        degeneracy_tol: None,
    }
}

pub fn run_bands<T: Real>(exp: &Experiment) -> Result<BandData<T>> {
    compute_bands(&exp.op, &exp.disc, &band_options(&exp.sweeps))
}

pub fn run_expand<T: Real>(exp: &Experiment, band: &BandData<T>) -> Result<EdgeExpansion<T>> {
    expand(&exp.op, &exp.disc, band, &exp.family, &exp.disorder)
}

pub fn eps_values<T: Real>(exp: &Experiment) -> Vec<T> {
    exp.sweeps.eps_list.iter().map(|e| T::of(*e)).collect()
}

pub struct LowerOutput<T> {
    pub hat: HatCellProblem<T>,
    pub rows: Vec<LowerBoundRow<T>>,
    pub max_inferred_c: T,
}

pub fn run_lower<T: Real>(exp: &Experiment, e: &EdgeExpansion<T>) -> Result<LowerOutput<T>> {
    let hat = build_hat_problem(&exp.op, e, &exp.family, &exp.hat_disc, exp.sweeps.a2_tol)?;
    let (rows, max_inferred_c) = hat.lower_sweep(&exp.disorder, &eps_values(exp), exp.sweeps.s_grid)?;
    Ok(LowerOutput {
        hat,
        rows,
        max_inferred_c,
    })
}

pub fn run_spectrum<T: Real>(exp: &Experiment) -> Result<Vec<EnsembleBottom<T>>> {
    let solver = SupercellSolver::new(&exp.op, &exp.family, &exp.disc, exp.sweeps.momenta_per_cell)?;
    eps_values(exp)
        .into_iter()
        .map(|eps| {
            solver.sigma_eps_bottom(
                &exp.disorder,
                eps,
                exp.sweeps.max_period,
                exp.sweeps.n_bands,
                exp.sweeps.enumeration_cap as u128,
            )
        })
        .collect()
}

/// Seeded period-`sample_period` draws checked against the band approximation.
pub fn run_inclusion<T: Real>(exp: &Experiment, band: &BandData<T>) -> Result<Vec<InclusionReport>> {
    let s = &exp.sweeps;
    let solver = SupercellSolver::new(&exp.op, &exp.family, &exp.disc, s.momenta_per_cell)?;
    let configs = sample_configurations(&exp.disorder, s.sample_period, s.sample_count, exp.seed)?;
    let cap = T::of(s.inclusion_cap);
    eps_values(exp)
        .into_iter()
        .map(|eps| {
            let spectra = configs
                .iter()
                .map(|c| solver.periodic_spectrum(c, eps, s.n_bands * c.period()))
                .collect::<Result<Vec<_>>>()?;
            check_inclusion(&spectra, band, eps, cap)
        })
        .collect()
}

fn ground_at<T: Real>(
    op: &PeriodicOperatorSpec,
    fam: &PerturbationFamily,
    disc: &Discretization,
    theta: T,
    t: T,
) -> Result<T> {
    let mut h = assemble_bloch(op, disc, theta)?;
    h.add_scaled(&assemble_family(fam, disc, theta, t)?, T::one());
    lowest_eigenvalue(&h)
}

/// Eigensolve accuracy at coupling `t`: the `N` versus `2N` change of the
/// perturbed ground energy at `θ₀`, floored by rounding.
pub fn precision_estimate<T: Real>(exp: &Experiment, e: &EdgeExpansion<T>, t: T) -> Result<T> {
    let fine = build_grid(exp.disc.geometry(), 2 * exp.disc.n(), exp.disc.scheme())?;
    let theta = e.triple.theta0;
    let coarse = ground_at(&exp.op, &exp.family, &exp.disc, theta, t)?;
    let refined = ground_at(&exp.op, &exp.family, &fine, theta, t)?;
    let rounding = T::of(64.0) * T::unit_roundoff() * e.operator_scale.max(T::one());
    Ok((coarse - refined).abs().max(rounding))
}

/// Upper bound, cell lower bound and enumerated bottom across `eps_list`.
pub fn run_bounds<T: Real>(exp: &Experiment) -> Result<BoundsReport> {
    let band = run_bands::<T>(exp)?;
    let e = run_expand(exp, &band)?;
    let hat = build_hat_problem(&exp.op, &e, &exp.family, &exp.hat_disc, exp.sweeps.a2_tol)?;
    let solver = SupercellSolver::new(&exp.op, &exp.family, &exp.disc, exp.sweeps.momenta_per_cell)?;
    let rounding = T::of(64.0) * T::unit_roundoff() * e.operator_scale.max(T::one());
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for eps in eps_values::<T>(exp) {
        let upper = e.upper_bound(eps)?;
        let oracle = rayleigh_cross_check(&e, &exp.op, &exp.disc, &exp.family, eps, e.triple.s_star)?;
        let lower = hat.lower_bound(&exp.disorder, eps, exp.sweeps.s_grid)?.lambda_min;
        let inf = solver
            .sigma_eps_bottom(&exp.disorder, eps, exp.sweeps.max_period, 1, exp.sweeps.enumeration_cap as u128)?
            .inf_estimate;
        let floor = T::of(100.0) * precision_estimate(exp, &e, eps * e.triple.s_star)?;
        let row = BoundsRow {
            eps: eps.to_f64_lossy(),
            upper: upper.to_f64_lossy(),
            rayleigh_oracle: oracle.to_f64_lossy(),
            lower: lower.to_f64_lossy(),
            inf_estimate: inf.to_f64_lossy(),
            upper_minus_inf: (upper - inf).to_f64_lossy(),
            inf_minus_lower: (inf - lower).to_f64_lossy(),
            expansion_error: (inf - e.second_order(eps)).abs().to_f64_lossy(),
            precision_floor: floor.to_f64_lossy(),
        };
        checks.push(Check::new(
            format!("sandwich eps={}", row.eps),
            lower <= inf + rounding && inf <= upper + rounding,
            format!("lower {:e} <= inf {:e} <= upper {:e}", row.lower, row.inf_estimate, row.upper),
        ));
        let oracle_tol = (T::of(1e-10) * upper.abs()).max(T::of(100.0) * rounding);
        checks.push(Check::new(
            format!("rayleigh oracle eps={}", row.eps),
            (upper - oracle).abs() <= oracle_tol,
            format!("|upper - oracle| = {:e}", (upper - oracle).abs().to_f64_lossy()),
        ));
        rows.push(row);
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let floors: Vec<f64> = rows.iter().map(|r| r.precision_floor).collect();
    let fit = |errs: Vec<f64>| SlopeOutcome::from_result(fit_slope(&eps, &errs, &floors));
    Ok(BoundsReport {
        order_upper_gap: fit(rows.iter().map(|r| r.upper_minus_inf).collect()),
        order_lower_gap: fit(rows.iter().map(|r| r.inf_minus_lower).collect()),
        order_expansion_error: fit(rows.iter().map(|r| r.expansion_error).collect()),
        rows,
        checks,
    })
}
