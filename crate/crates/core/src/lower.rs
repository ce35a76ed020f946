//! Single-cell problem with matched boundary conditions and the lower bound
//! on the bottom of the almost-sure spectrum (first-order operators only).

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::expansion::{lambda2, pairing, solve_corrector, EdgeExpansion, FamilyMatrices};
use crate::grid::{
    assemble_form, form_to_operator, inner_product, Boundary, Discretization, GridFunction, PerturbationFamily,
    PeriodicOperatorSpec,
};
use crate::linalg::{eigh, lowest_eigenvalue, CMatrix};
use crate::optim::golden_section;
use crate::scalar::{cabs, Real};

/// Trace `B₀u = u(x_b)` and conormal `B₁u = −ν (A₁₁ Du + A₁₀ u)(x_b)` of the
/// ground state at both endpoints, `ν = −1` at 0 and `+1` at `L`.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryTraces<T> {
    pub trace_left: Complex<T>,
    pub trace_right: Complex<T>,
    pub conormal_left: Complex<T>,
    pub conormal_right: Complex<T>,
}

/// `b₁ = B₁ψ₀ / B₀ψ₀` at both endpoints.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundaryCoefficients<T> {
    pub b1_left: T,
    pub b1_right: T,
    /// `|b1_left + b1_right|`.
    pub antisymmetry_defect: T,
}

/// Endpoint data of a periodic ground state from its trigonometric interpolant.
pub fn boundary_traces<T: Real>(
    op: &PeriodicOperatorSpec,
    psi0: &GridFunction<T>,
    theta0: T,
) -> Result<BoundaryTraces<T>> {
    if op.order() != 1 {
        return Err(Error::UnsupportedOrder(op.order()));
    }
    let l = T::of(psi0.disc().geometry().length());
    let a11 = op.coefficients().get(1, 1);
    let a10 = op.coefficients().get(1, 0);
    let at = |x: T, nu: T| -> Result<(Complex<T>, Complex<T>)> {
        let (u, du) = psi0.interpolate(x)?;
        let d = du + u * Complex::new(T::zero(), theta0);
        let flux = d.scale(a11.eval(x, l)) + u.scale(a10.eval(x, l));
        Ok((u, flux.scale(-nu)))
    };
    let (trace_left, conormal_left) = at(T::zero(), -T::one())?;
    let (trace_right, conormal_right) = at(l, T::one())?;
    Ok(BoundaryTraces {
        trace_left,
        trace_right,
        conormal_left,
        conormal_right,
    })
}

/// Ratios of conormal to trace; zero where the trace vanishes.
pub fn compute_bj<T: Real>(traces: &BoundaryTraces<T>, length: f64) -> Result<BoundaryCoefficients<T>> {
    let ratio = |u: Complex<T>, b: Complex<T>, x: f64| -> Result<T> {
        if cabs(u) <= T::of(1e-10) {
            return Ok(T::zero());
        }
        let r = b / u;
        if r.im.abs() > T::of(1e-8) * r.re.abs().max(T::one()) {
            return Err(Error::A1Violated {
                x,
                imag: r.im.to_f64_lossy(),
            });
        }
        Ok(r.re)
    };
    let b1_left = ratio(traces.trace_left, traces.conormal_left, 0.0)?;
    let b1_right = ratio(traces.trace_right, traces.conormal_right, length)?;
    Ok(BoundaryCoefficients {
        b1_left,
        b1_right,
        antisymmetry_defect: (b1_left + b1_right).abs(),
    })
}

/// Form `a[u] + b₁ₗ|u(0)|² + b₁ᵣ|u(L)|²` on a closed finite-difference cell.
pub fn assemble_hat_operator<T: Real>(
    op: &PeriodicOperatorSpec,
    disc: &Discretization,
    theta0: T,
    b: &BoundaryCoefficients<T>,
) -> Result<CMatrix<T>> {
    if op.order() != 1 {
        return Err(Error::UnsupportedOrder(op.order()));
    }
    if disc.boundary() != Boundary::Open {
        return Err(Error::InvalidInput("the cell problem needs a closed finite-difference grid".into()));
    }
    let lead = op.coefficients().get(1, 1);
    for x in disc.nodes::<f64>() {
        let v = lead.eval(x, disc.geometry().length());
        if v < op.c0() {
            return Err(Error::EllipticityViolated { x, value: v, c0: op.c0() });
        }
    }
    let mut k = assemble_form(op.coefficients(), disc, theta0, None)?;
    let last = disc.len() - 1;
    k[(0, 0)] = k[(0, 0)] + Complex::new(b.b1_left, T::zero());
    k[(last, last)] = k[(last, last)] + Complex::new(b.b1_right, T::zero());
    Ok(form_to_operator(k, disc))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct A2Report {
    pub holds: bool,
    pub hat_lambda0: f64,
    pub lambda0: f64,
    pub gap: f64,
}

/// Lowest hat eigenvalue equals `Λ₀` within `tol` and is separated by more than `10 tol`.
pub fn verify_a2<T: Real>(hat: &CMatrix<T>, lambda0: T, tol: f64) -> Result<A2Report> {
    let eig = crate::linalg::eigvalsh(hat)?;
    let gap = eig[1] - eig[0];
    let t = T::of(tol);
    Ok(A2Report {
        holds: (eig[0] - lambda0).abs() <= t && gap > T::of(10.0) * t,
        hat_lambda0: eig[0].to_f64_lossy(),
        lambda0: lambda0.to_f64_lossy(),
        gap: gap.to_f64_lossy(),
    })
}

/// The assembled cell problem with its second-order coefficient.
#[derive(Clone, Debug)]
pub struct HatCellProblem<T> {
    pub disc: Discretization,
    pub theta0: T,
    pub s_star: T,
    pub t_max: T,
    pub b: BoundaryCoefficients<T>,
    pub hat_matrix: CMatrix<T>,
    pub a2: A2Report,
    pub hat_lambda0: T,
    pub hat_gap: T,
    /// Discrete ground state, phase-aligned with the resampled `ψ₀`.
    pub hat_psi0: GridFunction<T>,
    /// `‖(Ôp₀ − Λ₀)ψ₀‖` for the resampled periodic ground state.
    pub psi0_residual: T,
    pub lambda1: T,
    pub hat_psi1: GridFunction<T>,
    pub hat_lambda2: T,
    pub family: FamilyMatrices<T>,
}

/// Resamples a periodic single-cell function onto the closed grid.
pub fn resample<T: Real>(u: &GridFunction<T>, target: &Discretization) -> Result<GridFunction<T>> {
    let vals = target
        .nodes::<T>()
        .into_iter()
        .map(|x| u.interpolate(x).map(|(v, _)| v))
        .collect::<Result<Vec<_>>>()?;
    target.grid_function(vals)
}

/// `(ψ̂₁, Λ̂₂)` with `ψ̂₁ ⊥ ψ₀`.
pub fn solve_hat_psi1_and_lambda2<T: Real>(
    hat: &CMatrix<T>,
    hat_lambda0: T,
    psi0: &GridFunction<T>,
    family: &FamilyMatrices<T>,
    lambda1: T,
    gap: T,
) -> Result<(GridFunction<T>, T)> {
    let sol = solve_corrector(hat, hat_lambda0, std::slice::from_ref(psi0), psi0, &family.l1, lambda1, gap)?;
    let l2 = lambda2(psi0, &sol.psi1, &family.l1, &family.l2)?;
    Ok((sol.psi1, l2))
}

/// Builds the cell problem around the expansion's ground state.
/// `A1` and `A2` failures abort with the corresponding error.
pub fn build_hat_problem<T: Real>(
    op: &PeriodicOperatorSpec,
    exp: &EdgeExpansion<T>,
    fam: &PerturbationFamily,
    hat_disc: &Discretization,
    a2_tol: f64,
) -> Result<HatCellProblem<T>> {
    if op.order() != 1 {
        return Err(Error::UnsupportedOrder(op.order()));
    }
    let theta0 = exp.triple.theta0;
    let traces = boundary_traces(op, &exp.psi0, theta0)?;
    let b = compute_bj(&traces, hat_disc.geometry().length())?;
    let hat = assemble_hat_operator(op, hat_disc, theta0, &b)?;
    let a2 = verify_a2(&hat, exp.lambda0, a2_tol)?;
    if !a2.holds {
        return Err(Error::AssumptionFailed(format!(
            "cell ground energy {:e} vs band bottom {:e} with gap {:e}",
            a2.hat_lambda0, a2.lambda0, a2.gap
        )));
    }
    let eig = eigh(&hat)?;
    let hat_lambda0 = eig.values[0];
    let hat_gap = eig.values[1] - eig.values[0];
    let resampled = resample(&exp.psi0, hat_disc)?;
    let v = eig.vectors.as_ref().expect("eigenvectors requested").column(0);
    let mut hat_psi0 = GridFunction::from_coords(hat_disc, v);
    let overlap = inner_product(&resampled, &hat_psi0)?;
    if cabs(overlap) > T::zero() {
        hat_psi0 = hat_psi0.scale(overlap.unscale(cabs(overlap)));
    }
    let nrm = hat_psi0.norm();
    hat_psi0 = hat_psi0.scale(Complex::new(T::one() / nrm, T::zero()));
    let psi0_residual = resampled
        .apply(&hat)
        .axpy(Complex::new(-exp.lambda0, T::zero()), &resampled)?
        .norm();

    let family = FamilyMatrices::assemble(fam, hat_disc, theta0)?;
    let lambda1 = pairing(&family.l1, &hat_psi0, &hat_psi0)?.re;
    let (hat_psi1, hat_lambda2) =
        solve_hat_psi1_and_lambda2(&hat, hat_lambda0, &hat_psi0, &family, lambda1, hat_gap)?;
    Ok(HatCellProblem {
        disc: *hat_disc,
        theta0,
        s_star: exp.triple.s_star,
        t_max: T::of(fam.t_max()),
        b,
        hat_matrix: hat,
        a2,
        hat_lambda0,
        hat_gap,
        hat_psi0,
        psi0_residual,
        lambda1,
        hat_psi1,
        hat_lambda2,
        family,
    })
}

/// One row of the lower-bound sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LowerBoundRow<T> {
    pub eps: T,
    pub s_min_at: T,
    /// `min_s λ_ε(s)`.
    pub lambda_min: T,
    /// `Λ₀ + εs*Λ₁ + ε²s*²Λ̂₂`.
    pub expansion: T,
    pub deficit: T,
    /// `max(0, deficit) / ε³`.
    pub inferred_c: T,
    /// `max_s |λ_ε(s) − Λ₀ − εsΛ₁ − ε²s²Λ̂₂| / ε³` over the grid.
    pub per_s_remainder: T,
}

impl<T: Real> HatCellProblem<T> {
    /// Lowest eigenvalue of the cell problem perturbed by `L(εs)`.
    pub fn lambda_eps_of_s(&self, eps: T, s: T) -> Result<T> {
        let t = eps * s;
        if t.abs() > self.t_max * (T::one() + T::of(1e-12)) {
            return Err(Error::EpsOutOfRange {
                eps: eps.to_f64_lossy(),
                t_max: self.t_max.to_f64_lossy(),
            });
        }
        if t == T::zero() {
            return Ok(self.hat_lambda0);
        }
        let mut m = self.hat_matrix.clone();
        m.add_scaled(&self.family.at(t), T::one());
        lowest_eigenvalue(&m)
    }

    fn expansion_at(&self, eps: T, s: T) -> T {
        let t = eps * s;
        self.hat_lambda0 + t * self.lambda1 + t * t * self.hat_lambda2
    }

    /// Infimum of `λ_ε(s)` over `[s₋, s₊]`: uniform grid, then golden-section
    /// refinement between the neighbours of the best grid point.
    pub fn lower_bound(&self, disorder: &DisorderSpec, eps: T, grid_size: usize) -> Result<LowerBoundRow<T>> {
        if grid_size < 33 {
            return Err(Error::InvalidInput(format!("s-grid needs at least 33 points, got {grid_size}")));
        }
        let (sm, sp) = (T::of(disorder.s_minus()), T::of(disorder.s_plus()));
        let step = (sp - sm) / T::of_usize(grid_size - 1);
        let grid: Vec<T> = (0..grid_size)
            .map(|k| if k + 1 == grid_size { sp } else { sm + step * T::of_usize(k) })
            .collect();
        let values = grid
            .par_iter()
            .map(|&s| self.lambda_eps_of_s(eps, s))
            .collect::<Result<Vec<_>>>()?;
        let mut best = 0;
        for (k, v) in values.iter().enumerate() {
            if *v < values[best] {
                best = k;
            }
        }
        let (mut s_min, mut lambda_min) = (grid[best], values[best]);
        if eps > T::zero() {
            let lo = grid[best.saturating_sub(1)];
            let hi = grid[(best + 1).min(grid_size - 1)];
            let (s, v) = golden_section(|s| self.lambda_eps_of_s(eps, s), lo, hi, step * T::of(1e-8))?;
            if v < lambda_min {
                s_min = s;
                lambda_min = v;
            }
        }
        let expansion = self.expansion_at(eps, self.s_star);
        let deficit = expansion - lambda_min;
        let eps3 = eps * eps * eps;
        let (inferred_c, per_s_remainder) = if eps > T::zero() {
            let rem = grid
                .iter()
                .zip(&values)
                .fold(T::zero(), |m, (s, v)| m.max((*v - self.expansion_at(eps, *s)).abs()));
            (deficit.max(T::zero()) / eps3, rem / eps3)
        } else {
            (T::zero(), T::zero())
        };
        Ok(LowerBoundRow {
            eps,
            s_min_at: s_min,
            lambda_min,
            expansion,
            deficit,
            inferred_c,
            per_s_remainder,
        })
    }

    /// Rows for each `ε` and the largest inferred constant.
    pub fn lower_sweep(
        &self,
        disorder: &DisorderSpec,
        eps_list: &[T],
        grid_size: usize,
    ) -> Result<(Vec<LowerBoundRow<T>>, T)> {
        let rows = eps_list
            .iter()
            .map(|&e| self.lower_bound(disorder, e, grid_size))
            .collect::<Result<Vec<_>>>()?;
        let c = rows.iter().fold(T::zero(), |m, r| m.max(r.inferred_c));
        Ok((rows, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::{compute_bands, BandOptions};
    use crate::expansion::expand;
    use crate::grid::{build_grid, CellGeometry, PerturbationOp, PeriodicFunction, Scheme};
    use crate::linalg::eigvalsh;
    use std::f64::consts::PI;

    fn hat_disc(n: usize) -> Discretization {
        Discretization::closed(CellGeometry::unit(), n, 4).unwrap()
    }

    #[test]
    fn robin_eigenvalue_converges_at_high_order() {
        let beta = 0.5;
        // lowest root of k tan(k/2) = beta
        let (mut lo, mut hi) = (0.0f64, 3.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m * (m / 2.0).tan() < beta {
                lo = m
            } else {
                hi = m
            }
        }
        let op = PeriodicOperatorSpec::free(1);
        let b = BoundaryCoefficients { b1_left: beta, b1_right: beta, antisymmetry_defect: 0.0 };
        let err = |n| {
            let h = assemble_hat_operator(&op, &hat_disc(n), 0.0, &b).unwrap();
            (eigvalsh(&h).unwrap()[0] - lo * lo).abs()
        };
        let (coarse, fine) = (err(32), err(64));
        assert!(fine < 1e-6 && coarse / fine > 6.0, "{coarse:e} {fine:e}");
    }

    fn zero_b() -> BoundaryCoefficients<f64> {
        BoundaryCoefficients {
            b1_left: 0.0,
            b1_right: 0.0,
            antisymmetry_defect: 0.0,
        }
    }

    fn problem(
        op: PeriodicOperatorSpec,
        l1: PeriodicFunction,
        hat_n: usize,
    ) -> (EdgeExpansion<f64>, Result<HatCellProblem<f64>>) {
        let disc = build_grid(CellGeometry::unit(), 32, Scheme::Fourier).unwrap();
        let fam = PerturbationFamily::linear(PerturbationOp::multiplication(l1), 1.0);
        let band = compute_bands::<f64>(&op, &disc, &BandOptions::default()).unwrap();
        let d = DisorderSpec::endpoints(-1.0, 1.0).unwrap();
        let exp = expand(&op, &disc, &band, &fam, &d).unwrap();
        let hat = build_hat_problem(&op, &exp, &fam, &hat_disc(hat_n), 1e-5);
        (exp, hat)
    }

    #[test]
    fn neumann_spectrum() {
        let op = PeriodicOperatorSpec::free(1);
        let h = assemble_hat_operator(&op, &hat_disc(64), 0.0, &zero_b()).unwrap();
        assert!(h.relative_hermiticity_defect() <= 1e-12);
        let e = eigvalsh(&h).unwrap();
        assert!(e[0].abs() < 1e-10);
        for (k, &ek) in e.iter().enumerate().take(5).skip(1) {
            let want = (k as f64 * PI).powi(2);
            assert!(((ek - want) / want).abs() < 1e-3, "{k}: {ek}");
            assert!(ek < want);
        }
        let a2 = verify_a2(&h, 0.0, 1e-6).unwrap();
        assert!(a2.holds && (a2.gap - PI * PI).abs() < 1e-3);
    }

    #[test]
    fn neumann_convergence_order() {
        let op = PeriodicOperatorSpec::free(1);
        let err = |n| {
            let e = eigvalsh(&assemble_hat_operator(&op, &hat_disc(n), 0.0, &zero_b()).unwrap()).unwrap();
            (e[2] - 4.0 * PI * PI).abs()
        };
        // third order: the one-sided closures limit the interior fourth order
        let ratio = err(64) / err(128);
        assert!(ratio > 7.0, "{ratio}");
    }

    #[test]
    fn attractive_boundary_breaks_a2() {
        let op = PeriodicOperatorSpec::free(1);
        let b = BoundaryCoefficients {
            b1_left: -5.0,
            b1_right: -5.0,
            antisymmetry_defect: 10.0,
        };
        let h = assemble_hat_operator(&op, &hat_disc(32), 0.0, &b).unwrap();
        let a2 = verify_a2(&h, 0.0, 1e-6).unwrap();
        assert!(!a2.holds && a2.hat_lambda0 < 0.0);
    }

    #[test]
    fn second_order_rejected() {
        let op = PeriodicOperatorSpec::free(2);
        assert!(matches!(
            assemble_hat_operator(&op, &hat_disc(32), 0.0, &zero_b()),
            Err(Error::UnsupportedOrder(2))
        ));
    }

    #[test]
    fn cosine_cell_problem() {
        let (exp, hat) = problem(PeriodicOperatorSpec::free(1), PeriodicFunction::cos(1, 1.0), 256);
        let hat = hat.unwrap();
        assert!(hat.b.b1_left.abs() < 1e-10 && hat.b.b1_right.abs() < 1e-10);
        assert!((hat.hat_lambda2 - exp.lambda2).abs() < 1e-7);
        let pi2 = PI * PI;
        for (x, v) in hat.disc.nodes::<f64>().iter().zip(hat.hat_psi1.values()) {
            let err = (v.re + (2.0 * PI * x).cos() / (4.0 * pi2)).abs();
            assert!(err < 1e-5, "{x}: {err:e}");
        }
        assert!(inner_product(&hat.hat_psi1, &hat.hat_psi0).unwrap().norm() < 1e-12);
        assert!(hat.psi0_residual < 1e-8 * hat.hat_matrix.max_abs());
        let d = DisorderSpec::endpoints(-1.0, 1.0).unwrap();
        let row = hat.lower_bound(&d, 0.0, 33).unwrap();
        assert_eq!(row.lambda_min, hat.hat_lambda0);
        let row = hat.lower_bound(&d, 0.05, 33).unwrap();
        assert!(row.lambda_min <= exp.upper_bound(0.05).unwrap());
        assert!(row.per_s_remainder < 1.0);
    }

    #[test]
    fn cosine_cell_value_lies_below_the_periodic_ground() {
        let (_, hat) = problem(PeriodicOperatorSpec::free(1), PeriodicFunction::cos(1, 1.0), 128);
        let hat = hat.unwrap();
        let eps = 0.1;
        let cell = hat.lambda_eps_of_s(eps, 1.0).unwrap();
        let op = PeriodicOperatorSpec::free(1);
        let disc = build_grid(CellGeometry::unit(), 32, Scheme::Fourier).unwrap();
        let v = PerturbationOp::multiplication(PeriodicFunction::cos(1, 1.0));
        let mut h = crate::grid::assemble_bloch(&op, &disc, 0.0).unwrap();
        h.add_scaled(&crate::grid::assemble_perturbation(&v, &disc, 0.0).unwrap(), eps);
        let periodic = lowest_eigenvalue(&h).unwrap();
        assert!(cell < periodic, "{cell:e} vs {periodic:e}");
        assert!((cell + eps * eps / (8.0 * PI * PI)).abs() < 1e-8);
    }

    #[test]
    fn doubling_the_s_grid_leaves_the_bound_unchanged() {
        let (_, hat) = problem(PeriodicOperatorSpec::free(1), PeriodicFunction::cos(1, 1.0), 64);
        let hat = hat.unwrap();
        let d = DisorderSpec::endpoints(-1.0, 1.0).unwrap();
        for eps in [0.025, 0.1] {
            let coarse = hat.lower_bound(&d, eps, 33).unwrap().lambda_min;
            let fine = hat.lower_bound(&d, eps, 65).unwrap().lambda_min;
            assert!((coarse - fine).abs() < 1e-10);
        }
    }

    #[test]
    fn divergence_form_has_zero_b() {
        let a = PeriodicFunction::constant(1.0).plus(&PeriodicFunction::cos(1, 0.5));
        let op = PeriodicOperatorSpec::divergence(a, 0.4).unwrap();
        let (_, hat) = problem(op, PeriodicFunction::cos(1, 1.0), 64);
        let hat = hat.unwrap();
        assert!(hat.b.b1_left.abs() < 1e-9 && hat.b.b1_right.abs() < 1e-9);
        assert!(hat.psi0_residual < 1e-6);
    }

    #[test]
    fn schrodinger_matched_boundary() {
        // non-constant ψ₀: the matched Robin terms must reproduce the band bottom
        let v = PeriodicFunction::cos(1, 3.0).plus(&PeriodicFunction::sin(2, 1.0));
        let err = |n| {
            let (exp, hat) = problem(PeriodicOperatorSpec::schrodinger(v.clone()), PeriodicFunction::cos(1, 1.0), n);
            let hat = hat.unwrap();
            assert!(hat.b.b1_left.abs() > 1e-3);
            assert!(hat.b.antisymmetry_defect < 1e-8);
            assert!(hat.hat_lambda0 <= exp.lambda0);
            exp.lambda0 - hat.hat_lambda0
        };
        let (coarse, fine) = (err(64), err(128));
        assert!(fine < 1e-6 && coarse / fine > 6.0, "{coarse:e} {fine:e}");
    }

    #[test]
    fn constant_shift_bound() {
        let (exp, hat) = problem(PeriodicOperatorSpec::free(1), PeriodicFunction::constant(1.0), 64);
        let hat = hat.unwrap();
        let d = DisorderSpec::endpoints(-1.0, 1.0).unwrap();
        let row = hat.lower_bound(&d, 0.05, 33).unwrap();
        assert!((row.lambda_min - (exp.lambda0 - 0.05)).abs() < 1e-10);
        assert_eq!(row.s_min_at, -1.0);
        let nn = DisorderSpec::endpoints(0.0, 1.0).unwrap();
        let row = hat.lower_bound(&nn, 0.05, 33).unwrap();
        assert_eq!(row.s_min_at, 0.0);
        assert!((row.lambda_min - hat.hat_lambda0).abs() < 1e-14);
    }
}
