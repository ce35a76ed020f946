//! Brillouin-zone sweeps, the ground-band minimum and the ground eigenspace.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{assemble_bloch, Discretization, GridFunction, PeriodicOperatorSpec};
use crate::linalg::{eigh, eigvalsh, lowest_eigenvalue, CMatrix};
use crate::optim::golden_section;
use crate::scalar::{abs2, cabs, Real};

/// Sampled band functions and the data attached to the spectral bottom.
#[derive(Clone, Debug)]
pub struct BandData<T> {
    pub theta_samples: Vec<T>,
    /// Lowest `n_bands` eigenvalues at each sample.
    pub energies: Vec<Vec<T>>,
    pub theta0: T,
    pub lambda0: T,
    pub gap_at_theta0: T,
    pub uniform_gap: T,
    pub multiplicity: usize,
    pub ground_vectors: Vec<GridFunction<T>>,
    /// Full spectrum of `Op₀(θ₀)`.
    pub levels_at_theta0: Vec<T>,
    pub degeneracy_tol: T,
}

#[derive(Clone, Copy, Debug)]
pub struct BandOptions {
    pub n_theta: usize,
    pub n_bands: usize,
    pub refine_tol: f64,
    /// Defaults to `1e-7 max(1, |Λ₀|)`.
    pub degeneracy_tol: Option<f64>,
}

impl Default for BandOptions {
    fn default() -> Self {
        Self {
            n_theta: 64,
            n_bands: 4,
            refine_tol: 1e-10,
            degeneracy_tol: None,
        }
    }
}

fn brillouin_length<T: Real>(disc: &Discretization) -> T {
    T::TAU() / disc.total_length::<T>()
}

/// Lowest eigenvalue of `Op₀(θ)`.
pub fn ground_energy<T: Real>(op: &PeriodicOperatorSpec, disc: &Discretization, theta: T) -> Result<T> {
    lowest_eigenvalue(&assemble_bloch(op, disc, theta)?)
}

/// Dense eigensolves on a uniform sample `θ_i = i (2π/L) / n_theta`.
/// The minimizer fields hold the best sample (left-most among ties).
pub fn sweep_bands<T: Real>(
    op: &PeriodicOperatorSpec,
    disc: &Discretization,
    n_theta: usize,
    n_bands: usize,
) -> Result<BandData<T>> {
    if n_theta < 8 {
        return Err(Error::InvalidInput(format!("need at least 8 momentum samples, got {n_theta}")));
    }
    if n_bands < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 bands, got {n_bands}")));
    }
    let bz = brillouin_length::<T>(disc);
    let thetas: Vec<T> = (0..n_theta)
        .map(|i| bz * T::of_usize(i) / T::of_usize(n_theta))
        .collect();
    let energies = thetas
        .par_iter()
        .map(|&th| {
            let mut e = eigvalsh(&assemble_bloch(op, disc, th)?)?;
            e.truncate(n_bands);
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, e) in energies.iter().enumerate() {
        if e[0] < energies[best][0] {
            best = i;
        }
    }
    let uniform_gap = energies
        .iter()
        .map(|e| e[1] - e[0])
        .fold(T::infinity(), |a, b| a.min(b));
    Ok(BandData {
        theta0: thetas[best],
        lambda0: energies[best][0],
        theta_samples: thetas,
        energies,
        gap_at_theta0: T::nan(),
        uniform_gap,
        multiplicity: 0,
        ground_vectors: Vec::new(),
        levels_at_theta0: Vec::new(),
        degeneracy_tol: T::nan(),
    })
}

/// Golden-section refinement of `E₀` around the best sample, bracketed by
/// its neighbours. The sample is kept unless the refined value is lower by
/// more than the eigensolver noise.
pub fn refine_minimum<T: Real>(
    band: &BandData<T>,
    op: &PeriodicOperatorSpec,
    disc: &Discretization,
    tol: f64,
) -> Result<(T, T)> {
    let n = band.theta_samples.len();
    let bz = brillouin_length::<T>(disc);
    let step = bz / T::of_usize(n);
    let centre = band.theta0;
    let f = |th: T| ground_energy(op, disc, th);

    let (th, val) = golden_section(f, centre - step, centre + step, T::of(tol))?;
    let scale = assemble_bloch::<T>(op, disc, centre)?.max_abs();
    let noise = T::of(64.0) * T::unit_roundoff() * scale.max(T::one());
    if val < band.lambda0 - noise {
        let wrapped = th - (th / bz).floor() * bz;
        Ok((wrapped, val))
    } else {
        Ok((centre, band.lambda0))
    }
}

/// Normalizes in the weighted norm and rotates so the largest-modulus entry
/// (first one among near-ties) is real and positive.
fn fix_phase<T: Real>(disc: &Discretization, coords: Vec<Complex<T>>) -> GridFunction<T> {
    let u = GridFunction::from_coords(disc, coords);
    let norm = u.norm();
    let u = u.scale(Complex::new(T::one() / norm, T::zero()));
    let vals = u.values();
    let top = vals.iter().fold(T::zero(), |m, z| m.max(abs2(*z)));
    let cut = top * (T::one() - T::of(2e-8));
    let pivot = vals.iter().position(|z| abs2(*z) >= cut).unwrap_or(0);
    let z = vals[pivot];
    let r = cabs(z);
    if r == T::zero() {
        return u;
    }
    u.scale(z.conj().unscale(r))
}

/// Orthonormal eigenvectors of `Op₀(θ₀)` with eigenvalues within
/// `degeneracy_tol` of `Λ₀`, plus the full spectrum at `θ₀`.
pub fn ground_eigenspace<T: Real>(
    op: &PeriodicOperatorSpec,
    disc: &Discretization,
    theta0: T,
    lambda0: T,
    degeneracy_tol: T,
) -> Result<(Vec<GridFunction<T>>, Vec<T>)> {
    let h = assemble_bloch(op, disc, theta0)?;
    eigenspace_of(&h, disc, lambda0, degeneracy_tol)
}

/// Eigenspace of an assembled Hermitian matrix near `level`.
pub fn eigenspace_of<T: Real>(
    h: &CMatrix<T>,
    disc: &Discretization,
    level: T,
    degeneracy_tol: T,
) -> Result<(Vec<GridFunction<T>>, Vec<T>)> {
    let eig = eigh(h)?;
    let vectors = eig.vectors.as_ref().expect("eigenvectors requested");
    let count = eig
        .values
        .iter()
        .filter(|v| (**v - level).abs() <= degeneracy_tol)
        .count()
        .max(1);
    let psi = (0..count)
        .map(|j| fix_phase(disc, vectors.column(j)))
        .collect();
    Ok((psi, eig.values))
}

/// `(gap_at_theta0, uniform_gap)`; the first is `E_n(θ₀) - Λ₀` for the
/// multiplicity `n`.
pub fn spectral_gap<T: Real>(band: &BandData<T>) -> Result<(T, T)> {
    let n = band.multiplicity;
    let next = band
        .levels_at_theta0
        .get(n)
        .copied()
        .ok_or_else(|| Error::InvalidInput("band data has no levels above the ground eigenspace".into()))?;
    let gap = next - band.lambda0;
    if !(gap > T::of(10.0) * band.degeneracy_tol) {
        return Err(Error::DegenerateEdge { gap: gap.to_f64_lossy() });
    }
    let uniform = band
        .energies
        .iter()
        .filter_map(|e| e.get(n).map(|x| *x - e[0]))
        .fold(T::infinity(), |a, b| a.min(b));
    Ok((gap, uniform))
}

/// Sweep, refinement, eigenspace and gaps.
pub fn compute_bands<T: Real>(op: &PeriodicOperatorSpec, disc: &Discretization, opts: &BandOptions) -> Result<BandData<T>> {
    let mut band = sweep_bands::<T>(op, disc, opts.n_theta, opts.n_bands)?;
    let (theta0, lambda0) = refine_minimum(&band, op, disc, opts.refine_tol)?;
    band.theta0 = theta0;
    band.lambda0 = lambda0;
    let tol = match opts.degeneracy_tol {
        Some(t) => T::of(t),
        None => T::of(1e-7) * lambda0.abs().max(T::one()),
    };
    band.degeneracy_tol = tol;
    let (psi, levels) = ground_eigenspace(op, disc, theta0, lambda0, tol)?;
    band.multiplicity = psi.len();
    band.ground_vectors = psi;
    band.levels_at_theta0 = levels;
    let (gap, uniform) = spectral_gap(&band)?;
    band.gap_at_theta0 = gap;
    band.uniform_gap = uniform;
    Ok(band)
}

impl<T: Real> BandData<T> {
    /// `[min, max]` of each swept band; their union approximates `spec Op₀`.
    pub fn band_ranges(&self) -> Vec<(T, T)> {
        let nb = self.energies.iter().map(|e| e.len()).min().unwrap_or(0);
        (0..nb)
            .map(|b| {
                self.energies.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), e| {
                    (lo.min(e[b]), hi.max(e[b]))
                })
            })
            .collect()
    }

    /// Top of the highest swept band.
    pub fn coverage_cap(&self) -> T {
        self.band_ranges().last().map_or(T::neg_infinity(), |r| r.1)
    }

    /// Distance from `lambda` to the union of band ranges.
    pub fn distance_to_spectrum(&self, lambda: T) -> T {
        self.band_ranges()
            .iter()
            .map(|&(lo, hi)| {
                if lambda < lo {
                    lo - lambda
                } else if lambda > hi {
                    lambda - hi
                } else {
                    T::zero()
                }
            })
            .fold(T::infinity(), |a, b| a.min(b))
    }

    /// Residual `max_j ‖(Op₀(θ₀) − Λ₀)ψ₀⁽ʲ⁾‖` of the ground vectors.
    pub fn eigen_residual(&self, op: &PeriodicOperatorSpec) -> Result<T> {
        let Some(first) = self.ground_vectors.first() else {
            return Ok(T::zero());
        };
        let h = assemble_bloch(op, first.disc(), self.theta0)?;
        let mut worst = T::zero();
        for psi in &self.ground_vectors {
            let r = psi.apply(&h).axpy(Complex::new(-self.lambda0, T::zero()), psi)?;
            worst = worst.max(r.norm());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, inner_product, CellGeometry, PeriodicFunction, Scheme};
    use std::f64::consts::{PI, TAU};

    fn disc(n: usize) -> Discretization {
        build_grid(CellGeometry::unit(), n, Scheme::Fourier).unwrap()
    }

    #[test]
    fn free_operator_bottom() {
        let op = PeriodicOperatorSpec::free(1);
        let band = compute_bands::<f64>(&op, &disc(32), &BandOptions::default()).unwrap();
        assert_eq!(band.theta0, 0.0);
        assert!(band.lambda0.abs() < 1e-12);
        assert_eq!(band.multiplicity, 1);
        let psi = &band.ground_vectors[0];
        for v in psi.values() {
            assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-12);
        }
        assert!((band.gap_at_theta0 - 4.0 * PI * PI).abs() < 1e-8);
        assert!(band.uniform_gap.abs() < 1e-8);
        // E0(θ) = min_k (θ + 2πk)²
        for (th, e) in band.theta_samples.iter().zip(&band.energies) {
            let want = (0..3).map(|k| (th - TAU * k as f64).powi(2)).fold(f64::INFINITY, f64::min);
            assert!((e[0] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn time_reversal_symmetry() {
        let op = PeriodicOperatorSpec::schrodinger(PeriodicFunction::cos(1, 1.0).plus(&PeriodicFunction::sin(2, 0.5)));
        let band = sweep_bands::<f64>(&op, &disc(32), 16, 4).unwrap();
        for i in 1..16 {
            assert!((band.energies[i][0] - band.energies[16 - i][0]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_shift() {
        let op = PeriodicOperatorSpec::schrodinger(PeriodicFunction::constant(2.5));
        let band = compute_bands::<f64>(&op, &disc(16), &BandOptions::default()).unwrap();
        assert_eq!(band.theta0, 0.0);
        assert!((band.lambda0 - 2.5).abs() < 1e-12);
    }

    #[test]
    fn nonnegative_potential_bounds() {
        let v = PeriodicFunction::constant(1.0).plus(&PeriodicFunction::cos(1, 1.0));
        let op = PeriodicOperatorSpec::schrodinger(v.clone());
        let band = compute_bands::<f64>(&op, &disc(32), &BandOptions::default()).unwrap();
        assert!(band.lambda0 > 0.0 && band.lambda0 <= v.mean());
        assert_eq!(band.multiplicity, 1);
    }

    #[test]
    fn divergence_form_kills_constants() {
        let a = PeriodicFunction::constant(1.0).plus(&PeriodicFunction::cos(1, 0.5));
        let op = PeriodicOperatorSpec::divergence(a, 0.4).unwrap();
        let band = compute_bands::<f64>(&op, &disc(32), &BandOptions::default()).unwrap();
        assert_eq!(band.theta0, 0.0);
        assert!(band.lambda0.abs() < 1e-11);
        let psi = &band.ground_vectors[0];
        for v in psi.values() {
            assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn brillouin_edge_is_degenerate() {
        let op = PeriodicOperatorSpec::free(1);
        let (psi, _) = ground_eigenspace::<f64>(&op, &disc(16), PI, PI * PI, 1e-6).unwrap();
        assert_eq!(psi.len(), 2);
        let g = inner_product(&psi[0], &psi[1]).unwrap();
        assert!(g.norm() < 1e-12);
    }

    #[test]
    fn ground_energy_minimizes_rayleigh_quotients() {
        use rand::{Rng, SeedableRng};
        let op = PeriodicOperatorSpec::schrodinger(PeriodicFunction::cos(1, 2.0));
        let d = disc(16);
        let h = assemble_bloch::<f64>(&op, &d, 0.7).unwrap();
        let e0 = eigvalsh(&h).unwrap()[0];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u: Vec<Complex<f64>> = (0..16)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let hu = h.matvec(&u);
            let q = crate::linalg::dot(&hu, &u).re / crate::linalg::dot(&u, &u).re;
            assert!(q >= e0 - 1e-12);
        }
    }
}
