//! Spectra of periodic disorder realizations on supercells.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::bands::BandData;
use crate::disorder::{necklaces, Configuration, DisorderSpec};
use crate::error::{Error, Result};
use crate::grid::{assemble_bloch, assemble_family_cells, Discretization, PerturbationFamily, PeriodicOperatorSpec};
use crate::linalg::{eigvalsh, CMatrix};
use crate::scalar::Real;

/// Default cap on the number of enumerated words.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 16;

/// Spectrum of one periodic realization over its supercell momenta.
#[derive(Clone, Debug, Serialize)]
pub struct SupercellSpectrum<T> {
    pub config: Configuration,
    pub eps: T,
    pub momentum_samples: Vec<T>,
    /// Ascending eigenvalues at each momentum.
    pub eigenvalues: Vec<Vec<T>>,
    pub inf_value: T,
    /// Largest entry of the assembled matrices; sets the rounding floor.
    pub matrix_scale: T,
}

/// Result of the enumeration over small periods.
#[derive(Clone, Debug)]
pub struct EnsembleBottom<T> {
    pub eps: T,
    pub inf_estimate: T,
    /// Index into `table` of the minimizing configuration.
    pub argmin: usize,
    pub table: Vec<SupercellSpectrum<T>>,
}

/// `Op₀` of one supercell at each sampled momentum.
type MomentumBlocks<T> = Arc<Vec<(T, CMatrix<T>)>>;

/// Assembles supercell operators, caching `Op₀` per period and momentum.
pub struct SupercellSolver<'a, T: Real> {
    op: &'a PeriodicOperatorSpec,
    fam: &'a PerturbationFamily,
    disc: Discretization,
    momenta_per_cell: usize,
    cache: Mutex<BTreeMap<usize, MomentumBlocks<T>>>,
}

impl<'a, T: Real> SupercellSolver<'a, T> {
    pub fn new(
        op: &'a PeriodicOperatorSpec,
        fam: &'a PerturbationFamily,
        disc: &Discretization,
        momenta_per_cell: usize,
    ) -> Result<Self> {
        if disc.cells() != 1 {
            return Err(Error::InvalidInput("expected a single-cell discretization".into()));
        }
        if momenta_per_cell == 0 {
            return Err(Error::InvalidInput("need at least one momentum per cell".into()));
        }
        Ok(Self {
            op,
            fam,
            disc: *disc,
            momenta_per_cell,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    /// Supercell momenta `j (2π/(PL)) / (m P)`, `m` per cell.
    pub fn momenta(&self, period: usize) -> Vec<T> {
        let count = self.momenta_per_cell * period;
        let zone = T::TAU() / (T::of(self.disc.geometry().length()) * T::of_usize(period));
        (0..count).map(|j| zone * T::of_usize(j) / T::of_usize(count)).collect()
    }

    fn unperturbed(&self, period: usize) -> Result<MomentumBlocks<T>> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&period) {
            return Ok(v.clone());
        }
        let sdisc = self.disc.supercell(period)?;
        let blocks = self
            .momenta(period)
            .into_par_iter()
            .map(|th| Ok((th, assemble_bloch(self.op, &sdisc, th)?)))
            .collect::<Result<Vec<_>>>()?;
        let arc = Arc::new(blocks);
        self.cache.lock().expect("cache lock").insert(period, arc.clone());
        Ok(arc)
    }

    fn couplings(&self, config: &Configuration, eps: T) -> Result<Vec<T>> {
        let t_max = self.fam.t_max();
        let worst = config.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if eps < T::zero() || eps * T::of(worst) > T::of(t_max) * (T::one() + T::of(1e-12)) {
            return Err(Error::EpsOutOfRange {
                eps: eps.to_f64_lossy(),
                t_max,
            });
        }
        Ok(config.values().iter().map(|v| eps * T::of(*v)).collect())
    }

    /// `Op₀ + Σ_k S(k) L(εξ_k) S(−k)` on the supercell at one momentum.
    pub fn assemble(&self, config: &Configuration, eps: T, momentum: T) -> Result<CMatrix<T>> {
        let t = self.couplings(config, eps)?;
        let sdisc = self.disc.supercell(config.period())?;
        let mut h = assemble_bloch(self.op, &sdisc, momentum)?;
        h.add_scaled(&assemble_family_cells(self.fam, &sdisc, momentum, &t)?, T::one());
        Ok(h)
    }

    /// Lowest `n_eigs` eigenvalues at every supercell momentum.
    pub fn periodic_spectrum(&self, config: &Configuration, eps: T, n_eigs: usize) -> Result<SupercellSpectrum<T>> {
        let t = self.couplings(config, eps)?;
        let sdisc = self.disc.supercell(config.period())?;
        let base = self.unperturbed(config.period())?;
        let solved = base
            .par_iter()
            .map(|(th, h0)| {
                let mut h = h0.clone();
                if eps != T::zero() {
                    h.add_scaled(&assemble_family_cells(self.fam, &sdisc, *th, &t)?, T::one());
                }
                let mut e = eigvalsh(&h)?;
                e.truncate(n_eigs.max(1));
                Ok((e, h.max_abs()))
            })
            .collect::<Result<Vec<_>>>()?;
        let matrix_scale = solved.iter().fold(T::zero(), |m, s| m.max(s.1));
        let eigenvalues: Vec<Vec<T>> = solved.into_iter().map(|s| s.0).collect();
        let inf_value = eigenvalues.iter().fold(T::infinity(), |m, e| m.min(e[0]));
        Ok(SupercellSpectrum {
            config: config.clone(),
            eps,
            momentum_samples: base.iter().map(|(th, _)| *th).collect(),
            eigenvalues,
            inf_value,
            matrix_scale,
        })
    }

    /// Minimum over every configuration of period at most `max_period`,
    /// one representative per cyclic-shift class.
    pub fn sigma_eps_bottom(
        &self,
        disorder: &DisorderSpec,
        eps: T,
        max_period: usize,
        n_eigs: usize,
        cap: u128,
    ) -> Result<EnsembleBottom<T>> {
        if !(1..=4).contains(&max_period) {
            return Err(Error::InvalidInput(format!("max_period must be in 1..=4, got {max_period}")));
        }
        let words = necklaces(disorder.support().len(), max_period, cap)?;
        let configs: Vec<Configuration> = words
            .iter()
            .map(|w| Configuration::new(w.iter().map(|&i| disorder.support()[i]).collect()))
            .collect::<Result<_>>()?;
        let table = configs
            .iter()
            .map(|c| self.periodic_spectrum(c, eps, n_eigs))
            .collect::<Result<Vec<_>>>()?;
        let mut argmin = 0;
        for (i, s) in table.iter().enumerate() {
            if s.inf_value < table[argmin].inf_value {
                argmin = i;
            }
        }
        Ok(EnsembleBottom {
            eps,
            inf_estimate: table[argmin].inf_value,
            argmin,
            table,
        })
    }

    /// Spectral bottoms of the `2^N`-periodic continuations, `N = 1..=levels`.
    pub fn periodization_diagnostic(&self, sample: &[f64], eps: T, levels: u32) -> Result<Vec<(u32, T)>> {
        (1..=levels)
            .map(|n| {
                let c = crate::disorder::periodize(sample, n)?;
                Ok((n, self.periodic_spectrum(&c, eps, 1)?.inf_value))
            })
            .collect()
    }
}

/// Outcome of the inclusion test for one `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InclusionReport {
    pub eps: f64,
    pub cap: f64,
    pub eigenvalues_checked: usize,
    /// `max dist(λ, spec Op₀) / (ε (|λ| + 1))`; distances at rounding level count as 0.
    pub empirical_c: f64,
    pub worst_eigenvalue: f64,
}

/// Distances of every eigenvalue below `cap` to the band approximation of
/// `spec Op₀`, relative to `ε(|λ| + 1)`.
pub fn check_inclusion<T: Real>(
    spectra: &[SupercellSpectrum<T>],
    band: &BandData<T>,
    eps: T,
    cap: T,
) -> Result<InclusionReport> {
    if cap > band.coverage_cap() {
        return Err(Error::InvalidInput(format!(
            "cap {:e} lies above the swept bands (top {:e})",
            cap.to_f64_lossy(),
            band.coverage_cap().to_f64_lossy()
        )));
    }
    let mut checked = 0;
    let (mut worst, mut worst_lambda) = (T::zero(), T::nan());
    for s in spectra {
        let floor = T::of(256.0) * T::unit_roundoff() * s.matrix_scale.max(T::one());
        for e in &s.eigenvalues {
            for &lambda in e.iter().filter(|l| **l < cap) {
                checked += 1;
                let d = band.distance_to_spectrum(lambda);
                let r = if d <= floor { T::zero() } else { d / (eps * (lambda.abs() + T::one())) };
                if r > worst || worst_lambda.is_nan() {
                    worst = r;
                    worst_lambda = lambda;
                }
            }
        }
    }
    Ok(InclusionReport {
        eps: eps.to_f64_lossy(),
        cap: cap.to_f64_lossy(),
        eigenvalues_checked: checked,
        empirical_c: worst.to_f64_lossy(),
        worst_eigenvalue: worst_lambda.to_f64_lossy(),
    })
}
