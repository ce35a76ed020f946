//! Matrix assembly. Every matrix returned here represents an operator in the
//! coordinates `sqrt(w_j) u_j`, so it is Hermitian in the Euclidean sense;
//! on periodic grids (uniform weights) it acts on nodal values directly.

use num_complex::Complex;

use super::disc::{Boundary, Discretization, Scheme};
use super::{CoefficientTable, PerturbationFamily, PerturbationOp, PeriodicFunction, PeriodicOperatorSpec};
use crate::error::{Error, Result};
use crate::linalg::{eigvalsh, CMatrix};
use crate::scalar::Real;

/// Tolerance on the relative Hermiticity defect of assembled perturbations.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest kernel asymmetry that is silently symmetrized.
pub const KERNEL_SYMMETRIZE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Points {
    Nodes,
    Midpoints,
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// Sample positions in units of `h / 2`.
fn half_indices(disc: &Discretization, pts: Points) -> Vec<i64> {
    match pts {
        Points::Nodes => (0..disc.len() as i64).map(|j| 2 * j).collect(),
        Points::Midpoints => {
            let count = match disc.boundary() {
                Boundary::Periodic => disc.len(),
                Boundary::Open => disc.n(),
            };
            (0..count as i64).map(|j| 2 * j + 1).collect()
        }
    }
}

fn point_weights<T: Real>(disc: &Discretization, pts: Points) -> Vec<T> {
    match pts {
        Points::Nodes => disc.weights(),
        Points::Midpoints => {
            let h = disc.spacing::<T>();
            let count = half_indices(disc, pts).len();
            let mut w = vec![h; count];
            if disc.boundary() == Boundary::Open && disc.scheme() == Scheme::FiniteDifference(4) {
                // end-corrected midpoint rule, exact through cubics and
                // summation-by-parts with the closure rows of `fd_rows`
                let ends = [13.0 / 12.0, 7.0 / 8.0, 25.0 / 24.0];
                for (i, e) in ends.iter().enumerate() {
                    w[i] = h * T::of(*e);
                    w[count - 1 - i] = h * T::of(*e);
                }
            }
            w
        }
    }
}

fn cell_of_half_index(disc: &Discretization, p: i64) -> usize {
    match disc.boundary() {
        Boundary::Periodic => (p.div_euclid(2 * disc.n() as i64)) as usize,
        Boundary::Open => 0,
    }
}

/// `e^{2πi r/M}` for `r = 0..M`.
fn roots<T: Real>(m: usize) -> Vec<Complex<T>> {
    let mt = T::of_usize(m);
    (0..m).map(|r| T::cis_turns(T::of_usize(r) / mt)).collect()
}

/// Spectral `(∂ + iθ)^α` on the periodic grid as a circulant matrix.
fn fourier_derivative<T: Real>(disc: &Discretization, theta: T, alpha: usize, table: &[Complex<T>]) -> CMatrix<T> {
    let m = disc.len();
    let len = disc.total_length::<T>();
    let half = (m / 2) as i64;
    let symbols: Vec<(i64, Complex<T>)> = (-half..m as i64 - half)
        .map(|k| {
            let kappa = T::TAU() * T::of(k as f64) / len + theta;
            let mut s = Complex::new(T::one(), T::zero());
            for _ in 0..alpha {
                s = s * Complex::new(T::zero(), kappa);
            }
            (k, s)
        })
        .collect();
    let mt = T::of_usize(m);
    let column: Vec<Complex<T>> = (0..m as i64)
        .map(|d| {
            symbols
                .iter()
                .fold(czero::<T>(), |acc, (k, s)| {
                    acc + s * table[(k * d).rem_euclid(m as i64) as usize]
                })
                .unscale(mt)
        })
        .collect();
    CMatrix::from_fn(m, m, |j, l| column[(j + m - l) % m])
}

type Stencil = Vec<(i64, f64)>;

fn fd_rows(disc: &Discretization, alpha: usize, pts: Points) -> Result<Vec<Stencil>> {
    let order = match disc.scheme() {
        Scheme::FiniteDifference(p) => p,
        Scheme::Fourier => unreachable!("fourier handled separately"),
    };
    let open = disc.boundary() == Boundary::Open;
    let count = half_indices(disc, pts).len() as i64;
    let last_node = disc.len() as i64 - 1;
    let rows = (0..count).map(|j| -> Result<Stencil> {
        Ok(match (pts, alpha, order) {
            (Points::Nodes, 0, _) => vec![(j, 1.0)],
            (Points::Nodes, 2, _) if open => return Err(Error::UnsupportedOrder(2)),
            (Points::Nodes, 2, 2) => vec![(j - 1, 1.0), (j, -2.0), (j + 1, 1.0)],
            (Points::Nodes, 2, _) => {
                let c = 1.0 / 12.0;
                vec![(j - 2, -c), (j - 1, 16.0 * c), (j, -30.0 * c), (j + 1, 16.0 * c), (j + 2, -c)]
            }
            (Points::Midpoints, 0, 2) => vec![(j, 0.5), (j + 1, 0.5)],
            (Points::Midpoints, 1, 2) => vec![(j, -1.0), (j + 1, 1.0)],
            (Points::Midpoints, 0, _) if open && j == 0 => {
                vec![(0, 5.0 / 16.0), (1, 15.0 / 16.0), (2, -5.0 / 16.0), (3, 1.0 / 16.0)]
            }
            (Points::Midpoints, 0, _) if open && j == count - 1 => {
                let n = last_node;
                vec![(n, 5.0 / 16.0), (n - 1, 15.0 / 16.0), (n - 2, -5.0 / 16.0), (n - 3, 1.0 / 16.0)]
            }
            (Points::Midpoints, 0, _) => {
                vec![(j - 1, -1.0 / 16.0), (j, 9.0 / 16.0), (j + 1, 9.0 / 16.0), (j + 2, -1.0 / 16.0)]
            }
            (Points::Midpoints, 1, _) if open && (j == 0 || j == count - 1) => {
                let c = 1.0 / 624.0;
                let closure = [-597.0 * c, 542.0 * c, 84.0 * c, -30.0 * c, c];
                if j == 0 {
                    closure.iter().enumerate().map(|(i, &v)| (i as i64, v)).collect()
                } else {
                    closure.iter().enumerate().map(|(i, &v)| (last_node - i as i64, -v)).collect()
                }
            }
            (Points::Midpoints, 1, _) => {
                let c = 1.0 / 24.0;
                vec![(j - 1, c), (j, -27.0 * c), (j + 1, 27.0 * c), (j + 2, -c)]
            }
            _ => return Err(Error::UnsupportedOrder(alpha)),
        })
    });
    rows.collect()
}

/// Finite-difference `(∂ + iθ)^α` from nodes to the requested points.
fn fd_derivative<T: Real>(disc: &Discretization, theta: T, alpha: usize, pts: Points) -> Result<CMatrix<T>> {
    if pts == Points::Midpoints && alpha == 2 {
        // interpolated nodal second difference
        let interp = fd_derivative(disc, theta, 0, Points::Midpoints)?;
        let d2 = fd_derivative(disc, theta, 2, Points::Nodes)?;
        return Ok(interp.matmul(&d2));
    }
    let m = disc.len() as i64;
    let h = disc.spacing::<T>();
    let scale = match alpha {
        0 => T::one(),
        1 => T::one() / h,
        _ => T::one() / (h * h),
    };
    let eval = half_indices(disc, pts);
    let rows = fd_rows(disc, alpha, pts)?;
    let mut out = CMatrix::zeros(eval.len(), disc.len());
    let per_half = theta * h / (T::of(2.0) * T::TAU());
    for (r, stencil) in rows.iter().enumerate() {
        for &(node, c) in stencil {
            let col = match disc.boundary() {
                Boundary::Periodic => node.rem_euclid(m) as usize,
                Boundary::Open => node as usize,
            };
            // Bloch phase e^{iθ(x_node - y)} with unwrapped positions
            let phase = T::cis_turns(per_half * T::of((2 * node - eval[r]) as f64));
            out[(r, col)] = out[(r, col)] + phase.scale(T::of(c) * scale);
        }
    }
    Ok(out)
}

fn points_for(disc: &Discretization, alpha: usize, beta: usize) -> Points {
    match disc.scheme() {
        Scheme::Fourier => Points::Nodes,
        Scheme::FiniteDifference(_) if alpha == beta && alpha != 1 => Points::Nodes,
        Scheme::FiniteDifference(_) => Points::Midpoints,
    }
}

/// `K += P_aᴴ diag(c) P_b`.
fn add_gram<T: Real>(k: &mut CMatrix<T>, pa: &CMatrix<T>, c: &[T], pb: &CMatrix<T>) {
    let cols = k.cols();
    for (i, &ci) in c.iter().enumerate() {
        if ci == T::zero() {
            continue;
        }
        let row_b: Vec<Complex<T>> = pb.row(i).iter().map(|z| z.scale(ci)).collect();
        let nz: Vec<usize> = (0..cols)
            .filter(|&b| row_b[b].re != T::zero() || row_b[b].im != T::zero())
            .collect();
        for a in 0..cols {
            let pa_ia = pa[(i, a)];
            if pa_ia.re == T::zero() && pa_ia.im == T::zero() {
                continue;
            }
            let f = pa_ia.conj();
            for &b in &nz {
                k[(a, b)] = k[(a, b)] + f * row_b[b];
            }
        }
    }
}

struct DerivativeCache<'a, T: Real> {
    disc: &'a Discretization,
    theta: T,
    roots: Option<Vec<Complex<T>>>,
    maps: Vec<((usize, Points), CMatrix<T>)>,
}

impl<'a, T: Real> DerivativeCache<'a, T> {
    fn new(disc: &'a Discretization, theta: T) -> Self {
        Self {
            disc,
            theta,
            roots: None,
            maps: Vec::new(),
        }
    }

    fn get(&mut self, alpha: usize, pts: Points) -> Result<CMatrix<T>> {
        if let Some((_, m)) = self.maps.iter().find(|(key, _)| *key == (alpha, pts)) {
            return Ok(m.clone());
        }
        let m = match self.disc.scheme() {
            Scheme::Fourier => {
                if self.disc.boundary() == Boundary::Open {
                    return Err(Error::InvalidInput(
                        "the Fourier backend cannot discretize a closed cell".into(),
                    ));
                }
                if alpha == 0 {
                    CMatrix::identity(self.disc.len())
                } else {
                    let table = self.roots.get_or_insert_with(|| roots(self.disc.len()));
                    fourier_derivative(self.disc, self.theta, alpha, table)
                }
            }
            Scheme::FiniteDifference(_) => fd_derivative(self.disc, self.theta, alpha, pts)?,
        };
        self.maps.push(((alpha, pts), m.clone()));
        Ok(m)
    }
}

/// Weighted form matrix `Σ P_αᴴ diag(w A_αβ s) P_β` of the sesquilinear form
/// `Σ (A_αβ D^β u, D^α u)` with `D = ∂ + iθ`. `cell_scales[k]` multiplies the
/// coefficients on cell `k`.
pub fn assemble_form<T: Real>(
    table: &CoefficientTable,
    disc: &Discretization,
    theta: T,
    cell_scales: Option<&[T]>,
) -> Result<CMatrix<T>> {
    if disc.boundary() == Boundary::Open && table.nonzero().any(|(a, b, _)| a > 1 || b > 1) {
        return Err(Error::UnsupportedOrder(table.order()));
    }
    let mut k = CMatrix::zeros(disc.len(), disc.len());
    let mut cache = DerivativeCache::new(disc, theta);
    for (alpha, beta, f) in table.nonzero() {
        let pts = points_for(disc, alpha, beta);
        let pos = half_indices(disc, pts);
        let w = point_weights::<T>(disc, pts);
        let c: Vec<T> = pos
            .iter()
            .zip(&w)
            .map(|(&p, &wi)| {
                let s = cell_scales.map_or(T::one(), |s| s[cell_of_half_index(disc, p)]);
                wi * f.at_half_index::<T>(p, disc.n()) * s
            })
            .collect();
        if alpha == 0 && beta == 0 && pts == Points::Nodes {
            for (i, ci) in c.iter().enumerate() {
                k[(i, i)] = k[(i, i)] + Complex::new(*ci, T::zero());
            }
            continue;
        }
        let pa = cache.get(alpha, pts)?;
        let pb = cache.get(beta, pts)?;
        add_gram(&mut k, &pa, &c, &pb);
    }
    Ok(k)
}

/// `W^{-1/2} K W^{-1/2}`, made exactly Hermitian.
pub fn form_to_operator<T: Real>(k: CMatrix<T>, disc: &Discretization) -> CMatrix<T> {
    let w = disc.weights::<T>();
    let mut s = if disc.is_uniform() {
        k.scaled(T::one() / w[0])
    } else {
        let inv: Vec<T> = w.iter().map(|x| T::one() / x.sqrt()).collect();
        k.scale_sym(&inv)
    };
    s.make_hermitian();
    s
}

fn check_ellipticity(op: &PeriodicOperatorSpec, disc: &Discretization) -> Result<()> {
    let m = op.order();
    let lead = op.coefficients().get(m, m);
    for j in 0..disc.n() {
        let v: f64 = lead.at_half_index(2 * j as i64, disc.n());
        if v < op.c0() {
            return Err(Error::EllipticityViolated {
                x: disc.geometry().length() * j as f64 / disc.n() as f64,
                value: v,
                c0: op.c0(),
            });
        }
    }
    Ok(())
}

/// `Op₀(θ)`: `Σ (-1)^α (∂+iθ)^α A_αβ (∂+iθ)^β` with Bloch-periodic conditions
/// on the cell or supercell. On a closed cell this is the form operator with
/// natural boundary conditions.
pub fn assemble_bloch<T: Real>(op: &PeriodicOperatorSpec, disc: &Discretization, theta: T) -> Result<CMatrix<T>> {
    check_ellipticity(op, disc)?;
    let k = assemble_form(op.coefficients(), disc, theta, None)?;
    Ok(form_to_operator(k, disc))
}

fn checked<T: Real>(mut m: CMatrix<T>) -> Result<CMatrix<T>> {
    let defect = m.relative_hermiticity_defect();
    if defect > T::tol(HERMITIAN_TOL) {
        return Err(Error::NonSymmetricPerturbation {
            defect: defect.to_f64_lossy(),
        });
    }
    m.make_hermitian();
    Ok(m)
}

/// Galerkin matrix of a cell-wise scaled multiplier on a Fourier supercell,
/// `Fᴴ T F` with `T_pq` the exact Fourier coefficient `Ŵ_{p−q}` of the
/// piecewise function.
fn fourier_galerkin_multiplier<T: Real>(v: &PeriodicFunction, disc: &Discretization, scales: &[T]) -> CMatrix<T> {
    let m = disc.len();
    let (mi, p) = (m as i64, scales.len() as i64);
    let half = mi / 2;
    let mut exps: Vec<(i64, Complex<T>)> = Vec::new();
    for t in v.terms() {
        let (a, b) = (T::of(t.a), T::of(t.b));
        if t.k == 0 {
            exps.push((0, Complex::new(a, T::zero())));
        } else {
            let two = T::of(2.0);
            exps.push((t.k as i64, Complex::new(a / two, -b / two)));
            exps.push((-(t.k as i64), Complex::new(a / two, b / two)));
        }
    }
    let pt = T::of(p as f64);
    let turns = |num: i64| T::cis_turns(T::of(num.rem_euclid(p) as f64) / pt);
    // coefficients for d = -(m-1)..=(m-1), stored at d + m - 1
    let w_hat: Vec<Complex<T>> = (-(mi - 1)..mi)
        .map(|d| {
            let mut acc = czero::<T>();
            for (j, c) in &exps {
                let r = j * p - d;
                for (cell, s) in scales.iter().enumerate() {
                    if *s == T::zero() {
                        continue;
                    }
                    let k = cell as i64;
                    let integral = if r == 0 {
                        Complex::new(T::one() / pt, T::zero())
                    } else {
                        (turns(r * (k + 1)) - turns(r * k)) * Complex::new(T::zero(), -T::one() / (T::TAU() * T::of(r as f64)))
                    };
                    acc = acc + *c * integral.scale(*s);
                }
            }
            acc
        })
        .collect();
    let table = roots::<T>(m);
    let toeplitz = CMatrix::from_fn(m, m, |a, b| w_hat[(a as i64 - b as i64 + mi - 1) as usize]);
    let synth = CMatrix::from_fn(m, m, |a, k| table[((k as i64 - half) * a as i64).rem_euclid(mi) as usize]);
    synth.matmul(&toeplitz).matmul(&synth.adjoint()).scaled(T::one() / T::of_usize(m))
}

/// One perturbation component with per-cell scale factors, conjugated by
/// `e^{iθx}`. Kernels stay confined to their cell.
pub fn assemble_scaled<T: Real>(
    p: &PerturbationOp,
    disc: &Discretization,
    theta: T,
    cell_scales: &[T],
) -> Result<CMatrix<T>> {
    let n_total = disc.len();
    let m = match p {
        PerturbationOp::Multiplication { v }
            if disc.scheme() == Scheme::Fourier && cell_scales.iter().any(|s| *s != cell_scales[0]) =>
        {
            fourier_galerkin_multiplier(v, disc, cell_scales)
        }
        PerturbationOp::Multiplication { v } => {
            let mut m = CMatrix::zeros(n_total, n_total);
            let cells = cell_scales.len();
            for j in 0..n_total {
                let val: T = v.at_half_index(2 * j as i64, disc.n());
                let c = disc.cell_of(j);
                // face nodes take the mean of the one-sided values
                let s = if disc.boundary() == Boundary::Periodic && cells > 1 && j % disc.n() == 0 {
                    (cell_scales[c] + cell_scales[(c + cells - 1) % cells]) / T::of(2.0)
                } else {
                    cell_scales[c]
                };
                m[(j, j)] = Complex::new(val * s, T::zero());
            }
            m
        }
        PerturbationOp::IntegralKernel { kernel } => {
            let defect = kernel.hermiticity_defect();
            if defect > KERNEL_SYMMETRIZE_TOL {
                return Err(Error::NonSymmetricPerturbation { defect });
            }
            let kernel = kernel.symmetrized();
            let w = disc.weights::<T>();
            let sw: Vec<T> = w.iter().map(|x| x.sqrt()).collect();
            let h = disc.spacing::<T>();
            let per_node = theta * h / T::TAU();
            let block = match disc.boundary() {
                Boundary::Periodic => disc.n(),
                Boundary::Open => n_total,
            };
            let mut m = CMatrix::zeros(n_total, n_total);
            for (cell, &s) in cell_scales.iter().enumerate().take(n_total / block) {
                if s == T::zero() {
                    continue;
                }
                let base = cell * block;
                for i in 0..block {
                    for j in 0..block {
                        let kij: Complex<T> = kernel.at_nodes(i as i64, j as i64, disc.n());
                        let phase = T::cis_turns(-per_node * T::of(i as f64 - j as f64));
                        m[(base + i, base + j)] = kij * phase.scale(sw[base + i] * sw[base + j] * s);
                    }
                }
            }
            m
        }
        PerturbationOp::DifferentialTerm { coefficients } => {
            let k = assemble_form(coefficients, disc, theta, Some(cell_scales))?;
            let w = disc.weights::<T>();
            if disc.is_uniform() {
                k.scaled(T::one() / w[0])
            } else {
                let inv: Vec<T> = w.iter().map(|x| T::one() / x.sqrt()).collect();
                k.scale_sym(&inv)
            }
        }
    };
    checked(m)
}

/// `e^{-iθ₀x} L e^{iθ₀x}` on a single cell.
pub fn assemble_perturbation<T: Real>(p: &PerturbationOp, disc: &Discretization, theta0: T) -> Result<CMatrix<T>> {
    let scales = vec![T::one(); disc.cells()];
    assemble_scaled(p, disc, theta0, &scales)
}

/// `Σ_k S(k) L(t_k) S(-k)` conjugated by `e^{iθx}`, one `t_k` per cell.
pub fn assemble_family_cells<T: Real>(
    fam: &PerturbationFamily,
    disc: &Discretization,
    theta: T,
    t_cells: &[T],
) -> Result<CMatrix<T>> {
    if t_cells.len() != disc.cells() {
        return Err(Error::InvalidInput(format!(
            "{} cell couplings for {} cells",
            t_cells.len(),
            disc.cells()
        )));
    }
    let mut out = CMatrix::zeros(disc.len(), disc.len());
    for (op, power) in fam.components() {
        if op.is_zero() {
            continue;
        }
        let scales: Vec<T> = t_cells.iter().map(|t| t.powi(power as i32)).collect();
        if scales.iter().all(|s| *s == T::zero()) {
            continue;
        }
        out.add_scaled(&assemble_scaled(op, disc, theta, &scales)?, T::one());
    }
    Ok(out)
}

/// `e^{-iθ₀x} L(t) e^{iθ₀x}` on a single cell.
pub fn assemble_family<T: Real>(fam: &PerturbationFamily, disc: &Discretization, theta0: T, t: T) -> Result<CMatrix<T>> {
    assemble_family_cells(fam, disc, theta0, &vec![t; disc.cells()])
}

/// Spectral norm of the assembled `L(t)` (largest eigenvalue modulus).
pub fn operator_norm_estimate<T: Real>(
    fam: &PerturbationFamily,
    _op: &PeriodicOperatorSpec,
    disc: &Discretization,
    t: T,
) -> Result<T> {
    let m = assemble_family(fam, disc, T::zero(), t)?;
    let eig = eigvalsh(&m)?;
    Ok(eig.iter().fold(T::zero(), |acc, x| acc.max(x.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, CellGeometry};

    fn supercell(n: usize, cells: usize) -> Discretization {
        build_grid(CellGeometry::unit(), n, Scheme::Fourier)
            .unwrap()
            .supercell(cells)
            .unwrap()
    }

    #[test]
    fn closed_midpoint_derivative_sums_by_parts() {
        let d = Discretization::closed(CellGeometry::unit(), 24, 4).unwrap();
        let dm = fd_derivative::<f64>(&d, 0.0, 1, Points::Midpoints).unwrap();
        let w = point_weights::<f64>(&d, Points::Midpoints);
        let v: Vec<f64> = (0..d.len()).map(|j| ((j * 7919) % 13) as f64 - 6.0).collect();
        let integral: f64 = (0..w.len())
            .map(|r| w[r] * (0..d.len()).map(|c| dm[(r, c)].re * v[c]).sum::<f64>())
            .sum();
        assert!((integral - (v[d.len() - 1] - v[0])).abs() < 1e-12, "{integral}");
    }

    #[test]
    fn galerkin_multiplier_is_hermitian_and_matches_smooth_case() {
        let v = PeriodicFunction::new([(0, 0.3, 0.0), (1, 1.0, 0.5), (2, -0.2, 0.0)]);
        let d = supercell(16, 3);
        let g = fourier_galerkin_multiplier::<f64>(&v, &d, &[1.0, -0.5, 2.0]);
        assert!(g.relative_hermiticity_defect() < 1e-14);
        // equal scales: Galerkin and collocation agree on resolved vectors
        let g = fourier_galerkin_multiplier::<f64>(&v, &d, &[0.7; 3]);
        let c = assemble_scaled(&PerturbationOp::multiplication(v), &d, 0.0, &[0.7; 3]).unwrap();
        let u: Vec<Complex<f64>> = d
            .nodes::<f64>()
            .iter()
            .map(|x| Complex::new(1.0 + (2.0 * std::f64::consts::PI * x / 3.0).cos(), 0.0))
            .collect();
        let (gu, cu) = (g.matvec(&u), c.matvec(&u));
        let err = gu.iter().zip(&cu).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn piecewise_multiplier_stays_above_constant_configuration() {
        let op = PeriodicOperatorSpec::free(1);
        let fam = PerturbationFamily::linear(PerturbationOp::multiplication(PeriodicFunction::cos(1, 1.0)), 1.0);
        for n in [16, 32] {
            let d = supercell(n, 2);
            let ground = |t: [f64; 2]| {
                let mut h = assemble_bloch::<f64>(&op, &d, 0.0).unwrap();
                h.add_scaled(&assemble_family_cells(&fam, &d, 0.0, &t).unwrap(), 1.0);
                eigvalsh(&h).unwrap()[0]
            };
            assert!(ground([0.1, -0.1]) > ground([-0.1, -0.1]));
        }
    }
}
