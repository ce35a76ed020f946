use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, CMatrix};
use crate::scalar::Real;

/// Largest supercell (total nodes) the dense path accepts.
pub const MAX_TOTAL_NODES: usize = 8192;

/// A periodicity cell `[0, L)` of the lattice `LZ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    length: f64,
}

impl CellGeometry {
    pub fn new(length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cell length must be positive, got {length}"
            )));
        }
        Ok(Self { length })
    }

    pub fn unit() -> Self {
        Self { length: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn generator(&self) -> f64 {
        self.length
    }

    pub fn dual_generator(&self) -> f64 {
        std::f64::consts::TAU / self.length
    }

    /// Half-open Brillouin zone `[0, 2π/L)`.
    pub fn brillouin_zone(&self) -> (f64, f64) {
        (0.0, self.dual_generator())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Fourier,
    /// Staggered finite differences of accuracy order 2 or 4.
    FiniteDifference(usize),
}

impl Scheme {
    pub fn label(&self) -> String {
        match self {
            Scheme::Fourier => "fourier".into(),
            Scheme::FiniteDifference(p) => format!("fd{p}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Periodic with a Bloch phase.
    Periodic,
    /// Single closed cell `[0, L]` with `N + 1` nodes.
    Open,
}

/// Grid and quadrature on one cell, a supercell of `cells` cells, or a
/// closed cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretization {
    geometry: CellGeometry,
    n: usize,
    scheme: Scheme,
    cells: usize,
    boundary: Boundary,
}

/// Uniform periodic grid on one cell.
pub fn build_grid(geometry: CellGeometry, n: usize, scheme: Scheme) -> Result<Discretization> {
    if scheme == Scheme::Fourier && n % 2 == 1 {
        return Err(Error::OddGridSize(n));
    }
    if n < 8 {
        return Err(Error::GridTooSmall(n));
    }
    match scheme {
        Scheme::FiniteDifference(p) if p != 2 && p != 4 => {
            return Err(Error::InvalidInput(format!(
                "finite-difference order must be 2 or 4, got {p}"
            )))
        }
        _ => {}
    }
    Ok(Discretization {
        geometry,
        n,
        scheme,
        cells: 1,
        boundary: Boundary::Periodic,
    })
}

impl Discretization {
    /// The same per-cell grid repeated over `cells` cells.
    pub fn supercell(&self, cells: usize) -> Result<Self> {
        if self.boundary != Boundary::Periodic || self.cells != 1 {
            return Err(Error::InvalidInput(
                "supercells are built from a single periodic cell".into(),
            ));
        }
        if cells == 0 {
            return Err(Error::InvalidInput("supercell needs at least one cell".into()));
        }
        let total = cells * self.n;
        if total > MAX_TOTAL_NODES {
            return Err(Error::SupercellTooLarge {
                total,
                limit: MAX_TOTAL_NODES,
            });
        }
        Ok(Self { cells, ..*self })
    }

    /// Closed cell `[0, L]` with `n + 1` nodes for a finite-difference scheme.
    pub fn closed(geometry: CellGeometry, n: usize, order: usize) -> Result<Self> {
        let mut d = build_grid(geometry, n, Scheme::FiniteDifference(order))?;
        d.boundary = Boundary::Open;
        Ok(d)
    }

    pub fn geometry(&self) -> CellGeometry {
        self.geometry
    }

    /// Grid points per cell.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n * self.cells,
            Boundary::Open => self.n + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing<T: Real>(&self) -> T {
        T::of(self.geometry.length) / T::of_usize(self.n)
    }

    /// Length covered by the grid (the supercell length when periodic).
    pub fn total_length<T: Real>(&self) -> T {
        T::of(self.geometry.length) * T::of_usize(self.cells)
    }

    pub fn nodes<T: Real>(&self) -> Vec<T> {
        let h = self.spacing::<T>();
        (0..self.len()).map(|j| T::of_usize(j) * h).collect()
    }

    /// Cell index of node `j`.
    pub fn cell_of(&self, j: usize) -> usize {
        match self.boundary {
            Boundary::Periodic => j / self.n,
            Boundary::Open => 0,
        }
    }

    /// Quadrature weights of the nodal inner product.
    pub fn weights<T: Real>(&self) -> Vec<T> {
        let h = self.spacing::<T>();
        match self.boundary {
            Boundary::Periodic => vec![h; self.len()],
            Boundary::Open => {
                let n = self.len();
                let mut w = vec![h; n];
                let ends: &[f64] = match self.scheme {
                    Scheme::FiniteDifference(4) => &[3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0],
                    _ => &[0.5],
                };
                for (i, &e) in ends.iter().enumerate() {
                    w[i] = h * T::of(e);
                    w[n - 1 - i] = h * T::of(e);
                }
                w
            }
        }
    }

    pub fn grid_function<T: Real>(&self, values: Vec<Complex<T>>) -> Result<GridFunction<T>> {
        if values.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} grid values, got {}",
                self.len(),
                values.len()
            )));
        }
        Ok(GridFunction { disc: *self, values })
    }

    /// Samples a function of the node position.
    pub fn sample<T: Real>(&self, f: impl Fn(T) -> Complex<T>) -> GridFunction<T> {
        GridFunction {
            disc: *self,
            values: self.nodes::<T>().into_iter().map(f).collect(),
        }
    }

    /// Samples a real periodic function exactly at the nodes.
    pub fn sample_periodic<T: Real>(&self, f: &super::PeriodicFunction) -> GridFunction<T> {
        GridFunction {
            disc: *self,
            values: (0..self.len())
                .map(|j| Complex::new(f.at_half_index(2 * j as i64, self.n), T::zero()))
                .collect(),
        }
    }

    /// Equal weights: assembled matrices then act on nodal values directly.
    pub fn is_uniform(&self) -> bool {
        self.boundary == Boundary::Periodic
    }
}

/// Complex nodal values tied to a discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    disc: Discretization,
    values: Vec<Complex<T>>,
}

impl<T: Real> GridFunction<T> {
    pub fn zeros(disc: &Discretization) -> Self {
        Self {
            disc: *disc,
            values: vec![Complex::new(T::zero(), T::zero()); disc.len()],
        }
    }

    pub fn disc(&self) -> &Discretization {
        &self.disc
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn norm_sq(&self) -> T {
        self.disc
            .weights::<T>()
            .iter()
            .zip(&self.values)
            .fold(T::zero(), |acc, (w, u)| acc + *w * u.norm_sqr())
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self {
            disc: self.disc,
            values: self.values.iter().map(|u| u * c).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: Complex<T>, other: &Self) -> Result<Self> {
        if self.disc != other.disc {
            return Err(Error::DiscretizationMismatch);
        }
        Ok(Self {
            disc: self.disc,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b * c)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.disc != other.disc {
            return Err(Error::DiscretizationMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max((a - b).norm_sqr().sqrt())))
    }

    /// Coordinates `sqrt(w_j) u_j` in which assembled matrices are Hermitian.
    pub fn coords(&self) -> Vec<Complex<T>> {
        if self.disc.is_uniform() {
            return self.values.clone();
        }
        self.disc
            .weights::<T>()
            .iter()
            .zip(&self.values)
            .map(|(w, u)| u.scale(w.sqrt()))
            .collect()
    }

    pub fn from_coords(disc: &Discretization, coords: Vec<Complex<T>>) -> Self {
        if disc.is_uniform() {
            return Self {
                disc: *disc,
                values: coords,
            };
        }
        let values = disc
            .weights::<T>()
            .iter()
            .zip(coords)
            .map(|(w, y)| y.unscale(w.sqrt()))
            .collect();
        Self {
            disc: *disc,
            values,
        }
    }

    /// Applies an assembled operator matrix.
    pub fn apply(&self, m: &CMatrix<T>) -> Self {
        Self::from_coords(&self.disc, m.matvec(&self.coords()))
    }

    /// Trigonometric interpolant of periodic single-cell data and its
    /// derivative at `x`.
    pub fn interpolate(&self, x: T) -> Result<(Complex<T>, Complex<T>)> {
        if self.disc.boundary != Boundary::Periodic {
            return Err(Error::InvalidInput("interpolation needs periodic data".into()));
        }
        let n = self.values.len();
        let l = self.disc.total_length::<T>();
        let nt = T::of_usize(n);
        let czero = Complex::new(T::zero(), T::zero());
        let half = (n / 2) as i64;
        let (mut val, mut der) = (czero, czero);
        for k in -half..=half {
            // Nyquist mode split evenly between ±n/2
            let weight = if n.is_multiple_of(2) && k.abs() == half { T::of(0.5) } else { T::one() };
            let mut coef = czero;
            for (j, u) in self.values.iter().enumerate() {
                let r = (k * j as i64).rem_euclid(n as i64);
                coef = coef + u * T::cis_turns(-T::of(r as f64) / nt);
            }
            let coef = coef.scale(weight / nt);
            let e = T::cis_turns(T::of(k as f64) * x / l);
            let kk = T::of(k as f64) * T::TAU() / l;
            val = val + coef * e;
            der = der + coef * e * Complex::new(T::zero(), kk);
        }
        Ok((val, der))
    }
}

/// `Σ_j w_j u_j conj(v_j)`.
pub fn inner_product<T: Real>(u: &GridFunction<T>, v: &GridFunction<T>) -> Result<Complex<T>> {
    if u.disc != v.disc {
        return Err(Error::DiscretizationMismatch);
    }
    if u.disc.is_uniform() {
        return Ok(dot(&u.values, &v.values).scale(u.disc.spacing()));
    }
    Ok(u
        .disc
        .weights::<T>()
        .iter()
        .zip(u.values.iter().zip(&v.values))
        .fold(Complex::new(T::zero(), T::zero()), |acc, (w, (a, b))| {
            acc + (a * b.conj()).scale(*w)
        }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PeriodicFunction;

    #[test]
    fn grid_examples() {
        let d = build_grid(CellGeometry::unit(), 16, Scheme::Fourier).unwrap();
        let x = d.nodes::<f64>();
        assert_eq!(x.len(), 16);
        assert_eq!(x[15], 15.0 / 16.0);
        assert!(d.weights::<f64>().iter().all(|&w| w == 1.0 / 16.0));

        let g = CellGeometry::new(2.0).unwrap();
        let d = build_grid(g, 8, Scheme::FiniteDifference(2)).unwrap();
        assert_eq!(d.nodes::<f64>(), (0..8).map(|j| 0.25 * j as f64).collect::<Vec<_>>());
        assert!(d.weights::<f64>().iter().all(|&w| w == 0.25));

        assert_eq!(build_grid(CellGeometry::unit(), 7, Scheme::Fourier), Err(Error::OddGridSize(7)));
        assert_eq!(build_grid(CellGeometry::unit(), 6, Scheme::FiniteDifference(2)), Err(Error::GridTooSmall(6)));
    }

    #[test]
    fn geometry_duality() {
        let g = CellGeometry::new(3.0).unwrap();
        assert!((g.generator() * g.dual_generator() - std::f64::consts::TAU).abs() < 1e-15);
        assert!(CellGeometry::new(0.0).is_err());
    }

    #[test]
    fn inner_products() {
        let d = build_grid(CellGeometry::unit(), 32, Scheme::Fourier).unwrap();
        let one = d.sample_periodic::<f64>(&PeriodicFunction::constant(1.0));
        let c = d.sample_periodic::<f64>(&PeriodicFunction::cos(1, 1.0));
        let s = d.sample_periodic::<f64>(&PeriodicFunction::sin(1, 1.0));
        assert!((inner_product(&one, &one).unwrap().re - 1.0).abs() < 1e-15);
        assert!(inner_product(&c, &s).unwrap().norm() < 1e-14);
        assert!((inner_product(&c, &c).unwrap().re - 0.5).abs() < 1e-15);
        let other = build_grid(CellGeometry::unit(), 16, Scheme::Fourier).unwrap();
        let z = GridFunction::<f64>::zeros(&other);
        assert_eq!(inner_product(&one, &z), Err(Error::DiscretizationMismatch));
    }

    #[test]
    fn closed_weights_integrate_polynomials() {
        for order in [2, 4] {
            let d = Discretization::closed(CellGeometry::unit(), 16, order).unwrap();
            let w = d.weights::<f64>();
            let x = d.nodes::<f64>();
            let exact_to = if order == 4 { 3 } else { 1 };
            for q in 0..=exact_to {
                let s: f64 = w.iter().zip(&x).map(|(w, x)| w * x.powi(q)).sum();
                assert!((s - 1.0 / (q as f64 + 1.0)).abs() < 1e-14, "order {order}, q {q}");
            }
        }
    }

    #[test]
    fn interpolation_is_exact_on_resolved_modes() {
        let d = build_grid(CellGeometry::unit(), 16, Scheme::Fourier).unwrap();
        let f = PeriodicFunction::cos(1, 1.0).plus(&PeriodicFunction::sin(3, 0.5));
        let u = d.sample_periodic::<f64>(&f);
        let x = 0.123;
        let (v, dv) = u.interpolate(x).unwrap();
        let tau = std::f64::consts::TAU;
        assert!((v.re - f.eval(x, 1.0)).abs() < 1e-13);
        let want = -tau * (tau * x).sin() + 1.5 * tau * (3.0 * tau * x).cos();
        assert!((dv.re - want).abs() < 1e-12);
        assert!(v.im.abs() < 1e-14 && dv.im.abs() < 1e-12);
    }
}
