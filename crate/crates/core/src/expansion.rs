//! Edge coefficients Λ₁, Λ₂, Λ₃(t), the corrector ψ₁ and the upper bound.

use num_complex::Complex;
use serde::Serialize;

use crate::bands::BandData;
use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::grid::{
    assemble_bloch, assemble_family, assemble_perturbation, inner_product, Discretization, GridFunction,
    PerturbationFamily, PeriodicOperatorSpec,
};
use crate::linalg::{eigh, lu_solve, CMatrix};
use crate::scalar::{cabs, Real};

/// `(P u, v)` in the grid inner product.
pub fn pairing<T: Real>(p: &CMatrix<T>, u: &GridFunction<T>, v: &GridFunction<T>) -> Result<Complex<T>> {
    inner_product(&u.apply(p), v)
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

fn real_part<T: Real>(z: Complex<T>, name: &'static str, scale: T) -> Result<T> {
    if z.im.abs() > T::of(1e-10) * scale.max(T::one()) {
        return Err(Error::NonRealCoefficient {
            name,
            imag: z.im.to_f64_lossy(),
        });
    }
    Ok(z.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinimizingTriple<T> {
    pub theta0: T,
    /// Zero-based index into the rotated ground basis.
    pub i0: usize,
    pub s_star: T,
    pub lambda1: T,
}

/// Rotates the ground basis so the `L₁` Gram matrix is diagonal; values ascend.
pub fn diagonalize_in_eigenspace<T: Real>(
    psi0s: &[GridFunction<T>],
    l1: &CMatrix<T>,
) -> Result<(Vec<GridFunction<T>>, Vec<T>)> {
    let n = psi0s.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty ground eigenspace".into()));
    }
    let images: Vec<GridFunction<T>> = psi0s.iter().map(|p| p.apply(l1)).collect();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // G_ij = (L ψ_j, ψ_i)
            g[(i, j)] = inner_product(&images[j], &psi0s[i])?;
        }
    }
    if n == 1 {
        return Ok((psi0s.to_vec(), vec![g[(0, 0)].re]));
    }
    g.make_hermitian();
    let eig = eigh(&g)?;
    let u = eig.vectors.as_ref().expect("eigenvectors requested");
    let rotated = (0..n)
        .map(|k| {
            let mut acc = GridFunction::zeros(psi0s[0].disc());
            for (j, psi) in psi0s.iter().enumerate() {
                acc = acc.axpy(u[(j, k)], psi)?;
            }
            Ok(fix_phase(acc))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rotated, eig.values))
}

fn fix_phase<T: Real>(u: GridFunction<T>) -> GridFunction<T> {
    let vals = u.values();
    let top = vals.iter().fold(T::zero(), |m, z| m.max(cabs(*z)));
    let cut = top * (T::one() - T::of(1e-8));
    let z = vals.iter().copied().find(|z| cabs(*z) >= cut).unwrap_or_else(czero);
    let r = cabs(z);
    if r == T::zero() {
        return u;
    }
    u.scale(z.conj().unscale(r))
}

/// Minimizes `s d_i` over `i` and `s ∈ {s₋, s₊}`. Ties go to the smaller
/// `s² Λ₂(i)`, then the smaller `i`, then `s₊`. `lambda2_of` is only called
/// when a tie needs it.
pub fn select_minimizing_triple<T: Real>(
    theta0: T,
    d: &[T],
    disorder: &DisorderSpec,
    mut lambda2_of: impl FnMut(usize) -> Result<T>,
) -> Result<MinimizingTriple<T>> {
    if d.is_empty() {
        return Err(Error::InvalidInput("no diagonal values".into()));
    }
    let (sm, sp) = (T::of(disorder.s_minus()), T::of(disorder.s_plus()));
    // (i, s, prefers_plus)
    let mut cands: Vec<(usize, T, bool)> = Vec::with_capacity(2 * d.len());
    for i in 0..d.len() {
        cands.push((i, sm, false));
        cands.push((i, sp, true));
    }
    let key = |c: &(usize, T, bool)| c.1 * d[c.0];
    let scale = cands.iter().fold(T::one(), |m, c| m.max(key(c).abs()));
    let tie = T::of(1e-12) * scale;
    let best = cands.iter().map(key).fold(T::infinity(), |a, b| a.min(b));
    let mut tied: Vec<(usize, T, bool)> = cands.into_iter().filter(|c| key(c) <= best + tie).collect();
    if tied.len() > 1 {
        let mut l2 = vec![None; d.len()];
        let mut second = Vec::with_capacity(tied.len());
        for c in &tied {
            let v = match l2[c.0] {
                Some(v) => v,
                None => {
                    let v = lambda2_of(c.0)?;
                    l2[c.0] = Some(v);
                    v
                }
            };
            second.push(c.1 * c.1 * v);
        }
        let scale2 = second.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let best2 = second.iter().copied().fold(T::infinity(), |a, b| a.min(b));
        tied = tied
            .into_iter()
            .zip(second)
            .filter(|(_, v)| *v <= best2 + T::of(1e-12) * scale2)
            .map(|(c, _)| c)
            .collect();
        tied.sort_by(|a, b| a.0.cmp(&b.0).then(b.2.cmp(&a.2)));
    }
    let (i0, s_star, _) = tied[0];
    Ok(MinimizingTriple {
        theta0,
        i0,
        s_star,
        lambda1: d[i0],
    })
}

/// Corrector together with solve diagnostics.
#[derive(Clone, Debug)]
pub struct CorrectorSolve<T> {
    pub psi1: GridFunction<T>,
    /// Norm of the right-hand side component removed by projection, relative
    /// to the right-hand side norm.
    pub kernel_component: T,
    /// `‖(Op₀(θ₀) − Λ₀)ψ₁ + L₁ψ₀ − Λ₁ψ₀‖`.
    pub residual: T,
    pub warnings: Vec<String>,
}

/// Solves `(H − Λ₀)ψ₁ = −L₁ψ₀ + Λ₁ψ₀` with `ψ₁ ⊥ ker`, through a bordered
/// system carrying one Lagrange multiplier per kernel vector.
pub fn solve_corrector<T: Real>(
    h: &CMatrix<T>,
    lambda0: T,
    kernel: &[GridFunction<T>],
    psi0: &GridFunction<T>,
    l1: &CMatrix<T>,
    lambda1: T,
    gap: T,
) -> Result<CorrectorSolve<T>> {
    let scale = h.max_abs().max(T::one());
    if !(gap > T::of(1e-8) * scale) {
        return Err(Error::IllConditionedSolve { gap: gap.to_f64_lossy() });
    }
    let disc = *psi0.disc();
    let dim = h.rows();
    let n = kernel.len();
    let l1psi0 = psi0.apply(l1);
    let rhs_fn = l1psi0.scale(Complex::new(-T::one(), T::zero())).axpy(Complex::new(lambda1, T::zero()), psi0)?;
    // cancellation below this level is rounding noise
    let floor = T::of(64.0)
        * T::unit_roundoff()
        * (crate::linalg::norm2(&l1psi0.coords()) + lambda1.abs() * crate::linalg::norm2(&psi0.coords()));

    let ks: Vec<Vec<Complex<T>>> = kernel
        .iter()
        .map(|k| {
            let c = k.coords();
            let nrm = crate::linalg::norm2(&c);
            c.iter().map(|z| z.unscale(nrm)).collect()
        })
        .collect();
    let mut r = rhs_fn.coords();
    let r_norm = crate::linalg::norm2(&r);
    let mut removed = T::zero();
    for k in &ks {
        let c = crate::linalg::dot(&r, k);
        removed = removed + c.norm_sqr();
        for (ri, ki) in r.iter_mut().zip(k) {
            *ri = *ri - ki * c;
        }
    }
    let kernel_component = if r_norm > floor { removed.sqrt() / r_norm } else { T::zero() };
    let mut warnings = Vec::new();
    if kernel_component > T::of(1e-8) {
        warnings.push(format!(
            "right-hand side had a kernel component of relative size {:.3e}",
            kernel_component.to_f64_lossy()
        ));
    }
    if crate::linalg::norm2(&r) <= floor {
        return Ok(CorrectorSolve {
            psi1: GridFunction::zeros(&disc),
            kernel_component,
            residual: T::zero(),
            warnings,
        });
    }

    let mut a = CMatrix::zeros(dim + n, dim + n);
    for i in 0..dim {
        for j in 0..dim {
            a[(i, j)] = h[(i, j)];
        }
        a[(i, i)] = a[(i, i)] - Complex::new(lambda0, T::zero());
    }
    for (c, k) in ks.iter().enumerate() {
        for i in 0..dim {
            a[(i, dim + c)] = k[i].scale(scale);
            a[(dim + c, i)] = k[i].conj().scale(scale);
        }
    }
    let mut b = r;
    b.extend(std::iter::repeat_n(czero(), n));
    let mut x = lu_solve(&a, &b)?;
    x.truncate(dim);
    for k in &ks {
        let c = crate::linalg::dot(&x, k);
        for (xi, ki) in x.iter_mut().zip(k) {
            *xi = *xi - ki * c;
        }
    }
    let psi1 = GridFunction::from_coords(&disc, x);
    let lhs = psi1.apply(h).axpy(Complex::new(-lambda0, T::zero()), &psi1)?;
    let residual = lhs.axpy(Complex::new(-T::one(), T::zero()), &rhs_fn)?.norm();
    Ok(CorrectorSolve {
        psi1,
        kernel_component,
        residual,
        warnings,
    })
}

/// `Λ₂ = (L₁ψ₁, ψ₀) + (L₂ψ₀, ψ₀)`.
pub fn lambda2<T: Real>(
    psi0: &GridFunction<T>,
    psi1: &GridFunction<T>,
    l1: &CMatrix<T>,
    l2: &CMatrix<T>,
) -> Result<T> {
    let z = pairing(l1, psi1, psi0)? + pairing(l2, psi0, psi0)?;
    real_part(z, "Lambda2", cabs(z))
}

/// Cubic `Λ₃(t) = c₀ + c₁t + c₂t² + c₃t³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lambda3<T> {
    pub coeffs: [T; 4],
}

impl<T: Real> Lambda3<T> {
    pub fn eval(&self, t: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, c| acc * t + *c)
    }
}

/// The assembled `L₁, L₂, L₃ₐ, L₃ᵦ` at a fixed momentum.
#[derive(Clone, Debug)]
pub struct FamilyMatrices<T> {
    pub l1: CMatrix<T>,
    pub l2: CMatrix<T>,
    pub l3a: CMatrix<T>,
    pub l3b: CMatrix<T>,
}

impl<T: Real> FamilyMatrices<T> {
    pub fn assemble(fam: &PerturbationFamily, disc: &Discretization, theta0: T) -> Result<Self> {
        Ok(Self {
            l1: assemble_perturbation(&fam.l1, disc, theta0)?,
            l2: assemble_perturbation(&fam.l2, disc, theta0)?,
            l3a: assemble_perturbation(&fam.l3a, disc, theta0)?,
            l3b: assemble_perturbation(&fam.l3b, disc, theta0)?,
        })
    }

    /// `t L₁ + t² L₂ + t³ L₃ₐ + t⁴ L₃ᵦ`.
    pub fn at(&self, t: T) -> CMatrix<T> {
        let mut out = self.l1.scaled(t);
        let mut p = t;
        for m in [&self.l2, &self.l3a, &self.l3b] {
            p = p * t;
            if p != T::zero() && m.max_abs() != T::zero() {
                out.add_scaled(m, p);
            }
        }
        out
    }
}

/// Coefficients of `Λ₃(t)` from inner products of `ψ₀, ψ₁`.
pub fn lambda3<T: Real>(
    psi0: &GridFunction<T>,
    psi1: &GridFunction<T>,
    m: &FamilyMatrices<T>,
    lambda1: T,
    lambda2: T,
) -> Result<Lambda3<T>> {
    let nn = psi1.norm_sq();
    let two = T::of(2.0);
    let re = |p: &CMatrix<T>, u: &GridFunction<T>, v: &GridFunction<T>| pairing(p, u, v).map(|z| z.re);
    let c0 = -lambda1 * nn + two * re(&m.l2, psi0, psi1)? + re(&m.l1, psi1, psi1)? + re(&m.l3a, psi0, psi0)?;
    let c1 = -lambda2 * nn + re(&m.l2, psi1, psi1)? + two * re(&m.l3a, psi0, psi1)? + re(&m.l3b, psi0, psi0)?;
    let c2 = re(&m.l3a, psi1, psi1)? + two * re(&m.l3b, psi0, psi1)?;
    let c3 = re(&m.l3b, psi1, psi1)?;
    Ok(Lambda3 {
        coeffs: [c0, c1, c2, c3],
    })
}

/// Everything the upper bound needs at the spectral edge.
#[derive(Clone, Debug)]
pub struct EdgeExpansion<T> {
    pub triple: MinimizingTriple<T>,
    pub lambda0: T,
    pub multiplicity: usize,
    pub gap_at_theta0: T,
    /// Ground basis after diagonalizing `L₁`.
    pub basis: Vec<GridFunction<T>>,
    pub diagonal: Vec<T>,
    pub psi0: GridFunction<T>,
    pub psi1: GridFunction<T>,
    pub psi1_norm_sq: T,
    pub lambda2: T,
    pub lambda3: Lambda3<T>,
    pub t_max: T,
    pub corrector_residual: T,
    pub operator_scale: T,
    pub warnings: Vec<String>,
}

/// Runs the whole expansion at the refined band minimum.
pub fn expand<T: Real>(
    op: &PeriodicOperatorSpec,
    disc: &Discretization,
    band: &BandData<T>,
    fam: &PerturbationFamily,
    disorder: &DisorderSpec,
) -> Result<EdgeExpansion<T>> {
    let theta0 = band.theta0;
    let h = assemble_bloch(op, disc, theta0)?;
    let m = FamilyMatrices::assemble(fam, disc, theta0)?;
    let (basis, d) = diagonalize_in_eigenspace(&band.ground_vectors, &m.l1)?;
    let gap = band.gap_at_theta0;
    let corrector = |i: usize| solve_corrector(&h, band.lambda0, &basis, &basis[i], &m.l1, d[i], gap);
    let triple = select_minimizing_triple(theta0, &d, disorder, |i| {
        let c = corrector(i)?;
        lambda2(&basis[i], &c.psi1, &m.l1, &m.l2)
    })?;
    let sol = corrector(triple.i0)?;
    let psi0 = basis[triple.i0].clone();
    let l2 = lambda2(&psi0, &sol.psi1, &m.l1, &m.l2)?;
    let l3 = lambda3(&psi0, &sol.psi1, &m, triple.lambda1, l2)?;
    Ok(EdgeExpansion {
        triple,
        lambda0: band.lambda0,
        multiplicity: band.multiplicity,
        gap_at_theta0: gap,
        diagonal: d,
        psi1_norm_sq: sol.psi1.norm_sq(),
        psi1: sol.psi1,
        psi0,
        basis,
        lambda2: l2,
        lambda3: l3,
        t_max: T::of(fam.t_max()),
        corrector_residual: sol.residual,
        operator_scale: h.max_abs(),
        warnings: sol.warnings,
    })
}

impl<T: Real> EdgeExpansion<T> {
    /// `t = ε s*` after the range check.
    fn coupling(&self, eps: T) -> Result<T> {
        let t = eps * self.triple.s_star;
        if eps < T::zero() || t.abs() > self.t_max * (T::one() + T::of(1e-12)) {
            return Err(Error::EpsOutOfRange {
                eps: eps.to_f64_lossy(),
                t_max: self.t_max.to_f64_lossy(),
            });
        }
        Ok(t)
    }

    /// `Λ₀ + tΛ₁ + t²Λ₂ + t³Λ₃(t)/(1 + t²‖ψ₁‖²)` at `t = ε s*`.
    pub fn upper_bound(&self, eps: T) -> Result<T> {
        let t = self.coupling(eps)?;
        let t2 = t * t;
        Ok(self.lambda0
            + t * self.triple.lambda1
            + t2 * self.lambda2
            + t2 * t * self.lambda3.eval(t) / (T::one() + t2 * self.psi1_norm_sq))
    }

    /// `Λ₀ + tΛ₁ + t²Λ₂` at `t = ε s*`.
    pub fn second_order(&self, eps: T) -> T {
        let t = eps * self.triple.s_star;
        self.lambda0 + t * self.triple.lambda1 + t * t * self.lambda2
    }

    /// Largest `|⟨ψ₁, ψ₀⁽ʲ⁾⟩|`.
    pub fn orthogonality_defect(&self) -> Result<T> {
        let mut worst = T::zero();
        for b in &self.basis {
            worst = worst.max(cabs(inner_product(&self.psi1, b)?));
        }
        Ok(worst)
    }
}

/// Rayleigh quotient of `Op₀(θ₀) + L(εs)` at `φ = ψ₀ + εsψ₁`, assembled afresh.
pub fn rayleigh_cross_check<T: Real>(
    exp: &EdgeExpansion<T>,
    op: &PeriodicOperatorSpec,
    disc: &Discretization,
    fam: &PerturbationFamily,
    eps: T,
    s: T,
) -> Result<T> {
    let t = eps * s;
    if t.abs() > T::of(fam.t_max()) * (T::one() + T::of(1e-12)) {
        return Err(Error::EpsOutOfRange {
            eps: eps.to_f64_lossy(),
            t_max: fam.t_max(),
        });
    }
    let theta0 = exp.triple.theta0;
    let mut h = assemble_bloch(op, disc, theta0)?;
    h.add_scaled(&assemble_family(fam, disc, theta0, t)?, T::one());
    let phi = exp.psi0.axpy(Complex::new(t, T::zero()), &exp.psi1)?;
    let num = pairing(&h, &phi, &phi)?;
    Ok(num.re / phi.norm_sq())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NegativeShiftReport {
    pub holds: bool,
    pub lambda2: f64,
    /// `−gap · ‖ψ₁‖²`.
    pub bound: f64,
    /// `bound − Λ₂`, non-negative when the inequality holds.
    pub margin: f64,
}

/// If `Λ₁ = 0` and `L₂ ≤ 0` then `Λ₂ ≤ −gap ‖ψ₁‖²`.
pub fn negative_shift_check<T: Real>(exp: &EdgeExpansion<T>, l2: &CMatrix<T>, tol: f64) -> Result<NegativeShiftReport> {
    let scale = exp.operator_scale.max(T::one());
    if exp.triple.lambda1.abs() > T::of(1e-10) * scale {
        return Err(Error::PreconditionNotMet(format!(
            "Lambda1 = {:e} is not zero",
            exp.triple.lambda1.to_f64_lossy()
        )));
    }
    let top = if l2.max_abs() == T::zero() {
        T::zero()
    } else {
        let mut sym = l2.clone();
        sym.make_hermitian();
        *crate::linalg::eigvalsh(&sym)?.last().expect("nonempty")
    };
    if top > T::of(1e-10) {
        return Err(Error::PreconditionNotMet(format!(
            "L2 is not negative semidefinite (largest eigenvalue {:e})",
            top.to_f64_lossy()
        )));
    }
    let bound = -exp.gap_at_theta0 * exp.psi1_norm_sq;
    let margin = (bound - exp.lambda2).to_f64_lossy();
    Ok(NegativeShiftReport {
        holds: margin >= -tol,
        lambda2: exp.lambda2.to_f64_lossy(),
        bound: bound.to_f64_lossy(),
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::{compute_bands, BandOptions};
    use crate::grid::{build_grid, CellGeometry, PerturbationOp, PeriodicFunction, Scheme};
    use std::f64::consts::PI;

    fn setup(l1: PeriodicFunction, n: usize) -> (PeriodicOperatorSpec, Discretization, PerturbationFamily) {
        let op = PeriodicOperatorSpec::free(1);
        let disc = build_grid(CellGeometry::unit(), n, Scheme::Fourier).unwrap();
        let fam = PerturbationFamily::linear(PerturbationOp::multiplication(l1), 1.0);
        (op, disc, fam)
    }

    fn run(l1: PeriodicFunction, disorder: &DisorderSpec) -> EdgeExpansion<f64> {
        let (op, disc, fam) = setup(l1, 32);
        let band = compute_bands::<f64>(&op, &disc, &BandOptions::default()).unwrap();
        expand(&op, &disc, &band, &fam, disorder).unwrap()
    }

    fn pm1() -> DisorderSpec {
        DisorderSpec::endpoints(-1.0, 1.0).unwrap()
    }

    #[test]
    fn cosine_example() {
        let e = run(PeriodicFunction::cos(1, 1.0), &pm1());
        assert!(e.triple.lambda1.abs() < 1e-12);
        assert_eq!(e.triple.s_star, 1.0);
        let pi2 = PI * PI;
        for (x, v) in e.psi1.disc().nodes::<f64>().iter().zip(e.psi1.values()) {
            let want = -(2.0 * PI * x).cos() / (4.0 * pi2);
            assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
        assert!((e.psi1_norm_sq - 1.0 / (32.0 * pi2 * pi2)).abs() < 1e-14);
        assert!((e.lambda2 + 1.0 / (8.0 * pi2)).abs() < 1e-12);
        assert!(e.lambda3.eval(0.0).abs() < 1e-14);
        assert!((e.lambda3.eval(1.0) - 1.0 / (256.0 * pi2 * pi2 * pi2)).abs() < 1e-14);
        let ub = e.upper_bound(0.1).unwrap();
        assert!((ub + 0.01 / (8.0 * pi2)).abs() < 1e-8);
        assert_eq!(e.upper_bound(0.0).unwrap(), e.lambda0);
        assert!(e.corrector_residual < 1e-10);
        assert!(e.orthogonality_defect().unwrap() < 1e-12);
    }

    #[test]
    fn constant_shift() {
        let e = run(PeriodicFunction::constant(1.0), &pm1());
        assert_eq!(e.triple.s_star, -1.0);
        assert!((e.triple.lambda1 - 1.0).abs() < 1e-12);
        assert_eq!(e.psi1_norm_sq, 0.0);
        assert!(e.lambda2.abs() < 1e-14);
        let ub = e.upper_bound(0.05).unwrap();
        assert!((ub - (e.lambda0 - 0.05)).abs() < 1e-14);
        assert!(matches!(e.upper_bound(1.5), Err(Error::EpsOutOfRange { .. })));
    }

    fn rich_family() -> (PeriodicOperatorSpec, Discretization, PerturbationFamily) {
        let l1 = PeriodicFunction::cos(1, 1.0).plus(&PeriodicFunction::sin(3, 0.7));
        let (op, disc, mut fam) = setup(l1, 32);
        fam.l2 = PerturbationOp::multiplication(PeriodicFunction::cos(2, -0.3));
        fam.l3a = PerturbationOp::multiplication(PeriodicFunction::constant(0.2).plus(&PeriodicFunction::cos(1, 0.5)));
        fam.l3b = PerturbationOp::multiplication(PeriodicFunction::sin(1, 0.4));
        (op, disc, fam)
    }

    fn rayleigh_gap<T: Real>() -> (f64, f64) {
        let (op, disc, fam) = rich_family();
        let band = compute_bands::<T>(&op, &disc, &BandOptions::default()).unwrap();
        let e = expand(&op, &disc, &band, &fam, &pm1()).unwrap();
        let (mut abs, mut rel) = (0.0f64, 0.0f64);
        for k in 0..20 {
            let eps = T::of(0.01 * (k + 1) as f64);
            let ub = e.upper_bound(eps).unwrap();
            let rq = rayleigh_cross_check(&e, &op, &disc, &fam, eps, e.triple.s_star).unwrap();
            let d = (ub - rq).abs().to_f64_lossy();
            abs = abs.max(d);
            rel = rel.max(d / ub.abs().to_f64_lossy());
        }
        (abs, rel)
    }

    #[test]
    fn rayleigh_identity() {
        // f64 is limited by rounding in the matrix entries, u‖H‖
        let (abs, _) = rayleigh_gap::<f64>();
        assert!(abs < 1e-11, "{abs:e}");
        let (_, rel) = rayleigh_gap::<crate::Dd>();
        assert!(rel < 1e-10, "{rel:e}");
    }

    #[test]
    fn triple_examples() {
        let d = pm1();
        let t = select_minimizing_triple(0.0, &[1.0], &d, |_| Ok(0.0)).unwrap();
        assert_eq!((t.i0, t.s_star, t.lambda1), (0, -1.0, 1.0));
        let t = select_minimizing_triple(0.0, &[0.0], &d, |_| Ok(-1.0)).unwrap();
        assert_eq!(t.s_star, 1.0);
        let nn = DisorderSpec::endpoints(0.2, 0.8).unwrap();
        let t = select_minimizing_triple(0.0, &[0.5], &nn, |_| Ok(0.0)).unwrap();
        assert_eq!(t.s_star, 0.2);
        // second key: smaller s² Λ₂ wins
        let asym = DisorderSpec::endpoints(-1.0, 2.0).unwrap();
        let t = select_minimizing_triple(0.0, &[0.0], &asym, |_| Ok(-1.0)).unwrap();
        assert_eq!(t.s_star, 2.0);
    }

    #[test]
    fn degenerate_diagonalization() {
        let disc = build_grid(CellGeometry::unit(), 16, Scheme::Fourier).unwrap();
        let op = PeriodicOperatorSpec::free(1);
        let (psi, _) = crate::bands::ground_eigenspace::<f64>(&op, &disc, PI, PI * PI, 1e-6).unwrap();
        // M = [[0,1],[1,0]] in this basis
        let mut m = CMatrix::zeros(16, 16);
        let c: Vec<Vec<Complex<f64>>> = psi.iter().map(|p| p.coords()).collect();
        let h = disc.spacing::<f64>();
        for i in 0..16 {
            for j in 0..16 {
                m[(i, j)] = (c[0][i] * c[1][j].conj() + c[1][i] * c[0][j].conj()) * h;
            }
        }
        let (rot, d) = diagonalize_in_eigenspace(&psi, &m).unwrap();
        assert!((d[0] + 1.0).abs() < 1e-12 && (d[1] - 1.0).abs() < 1e-12);
        let g = inner_product(&rot[0], &rot[1]).unwrap();
        assert!(g.norm() < 1e-12);
        let (same, d1) = diagonalize_in_eigenspace(&psi[..1], &m).unwrap();
        assert_eq!(same[0], psi[0]);
        assert!(d1[0].abs() < 1e-12);
    }

    #[test]
    fn negative_semidefinite_l2_lowers_the_second_order_term() {
        let pi2 = PI * PI;
        let (op, disc, fam) = setup(PeriodicFunction::cos(1, 1.0), 32);
        let band = compute_bands::<f64>(&op, &disc, &BandOptions::default()).unwrap();
        let e = expand(&op, &disc, &band, &fam, &pm1()).unwrap();
        let m = FamilyMatrices::assemble(&fam, &disc, e.triple.theta0).unwrap();
        let r = negative_shift_check(&e, &m.l2, 1e-9).unwrap();
        assert!(r.holds && r.margin.abs() < 1e-10);

        let l1 = PeriodicFunction::cos(1, 1.0).plus(&PeriodicFunction::cos(2, 1.0));
        let e = run(l1, &pm1());
        let r = negative_shift_check(&e, &CMatrix::zeros(32, 32), 1e-9).unwrap();
        assert!(r.holds);
        assert!((r.margin - 3.0 / (128.0 * pi2)).abs() < 1e-10);

        let e = run(PeriodicFunction::constant(1.0), &pm1());
        assert!(matches!(
            negative_shift_check(&e, &CMatrix::zeros(32, 32), 1e-9),
            Err(Error::PreconditionNotMet(_))
        ));
    }

    #[test]
    fn lambda2_from_l2_only() {
        let (op, disc, mut fam) = setup(PeriodicFunction::zero(), 32);
        let w = PeriodicFunction::constant(0.3).plus(&PeriodicFunction::cos(2, 1.0));
        fam.l2 = PerturbationOp::multiplication(w);
        let band = compute_bands::<f64>(&op, &disc, &BandOptions::default()).unwrap();
        let e = expand(&op, &disc, &band, &fam, &pm1()).unwrap();
        assert!((e.lambda2 - 0.3).abs() < 1e-12);
        assert_eq!(e.psi1_norm_sq, 0.0);
    }
}
