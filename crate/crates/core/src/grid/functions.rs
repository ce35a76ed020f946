use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// One harmonic `a cos(2πkx/L) + b sin(2πkx/L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(i64, f64, f64)", into = "(i64, f64, f64)")]
pub struct FourierTerm {
    pub k: u32,
    pub a: f64,
    pub b: f64,
}

impl From<(i64, f64, f64)> for FourierTerm {
    fn from((k, a, b): (i64, f64, f64)) -> Self {
        // cos is even, sin is odd
        let b = if k < 0 { -b } else { b };
        FourierTerm {
            k: k.unsigned_abs() as u32,
            a,
            b: if k == 0 { 0.0 } else { b },
        }
    }
}

impl From<FourierTerm> for (i64, f64, f64) {
    fn from(t: FourierTerm) -> Self {
        (t.k as i64, t.a, t.b)
    }
}

/// Real `L`-periodic function given by a finite Fourier series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeriodicFunction {
    terms: Vec<FourierTerm>,
}

impl PeriodicFunction {
    pub fn new(terms: impl IntoIterator<Item = (i64, f64, f64)>) -> Self {
        Self {
            terms: terms.into_iter().map(FourierTerm::from).collect(),
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::new([(0, c, 0.0)])
    }

    /// `amp * cos(2πkx/L)`.
    pub fn cos(k: u32, amp: f64) -> Self {
        Self::new([(k as i64, amp, 0.0)])
    }

    /// `amp * sin(2πkx/L)`.
    pub fn sin(k: u32, amp: f64) -> Self {
        Self::new([(k as i64, 0.0, amp)])
    }

    pub fn terms(&self) -> &[FourierTerm] {
        &self.terms
    }

    pub fn plus(mut self, other: &PeriodicFunction) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| FourierTerm {
                    k: t.k,
                    a: t.a * c,
                    b: t.b * c,
                })
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.a == 0.0 && (t.b == 0.0 || t.k == 0))
    }

    pub fn max_harmonic(&self) -> u32 {
        self.terms.iter().map(|t| t.k).max().unwrap_or(0)
    }

    /// Cell average.
    pub fn mean(&self) -> f64 {
        self.terms.iter().filter(|t| t.k == 0).map(|t| t.a).sum()
    }

    /// Value at `x = p * h / 2` with `h = L / n`. Reducing `k p mod 2n` in
    /// integers keeps node and midpoint samples exact at any precision.
    pub fn at_half_index<T: Real>(&self, p: i64, n: usize) -> T {
        let period = 2 * n as i64;
        self.terms.iter().fold(T::zero(), |acc, t| {
            if t.k == 0 {
                return acc + T::of(t.a);
            }
            let r = (t.k as i64 * p).rem_euclid(period);
            let (c, s) = T::cos_sin_turns(T::of(r as f64) / T::of(period as f64));
            acc + T::of(t.a) * c + T::of(t.b) * s
        })
    }

    /// Value at an arbitrary point of a cell of length `l`.
    pub fn eval<T: Real>(&self, x: T, l: T) -> T {
        self.terms.iter().fold(T::zero(), |acc, t| {
            if t.k == 0 {
                return acc + T::of(t.a);
            }
            let (c, s) = T::cos_sin_turns(T::of_usize(t.k as usize) * x / l);
            acc + T::of(t.a) * c + T::of(t.b) * s
        })
    }
}

/// Coefficient `c e^{2πi(px - qy)/L}` of an integral kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(i64, i64, f64, f64)", into = "(i64, i64, f64, f64)")]
pub struct KernelTerm {
    pub p: i64,
    pub q: i64,
    pub re: f64,
    pub im: f64,
}

impl From<(i64, i64, f64, f64)> for KernelTerm {
    fn from((p, q, re, im): (i64, i64, f64, f64)) -> Self {
        KernelTerm { p, q, re, im }
    }
}

impl From<KernelTerm> for (i64, i64, f64, f64) {
    fn from(t: KernelTerm) -> Self {
        (t.p, t.q, t.re, t.im)
    }
}

/// Kernel `K(x, y) = Σ c_pq e^{2πi(px - qy)/L}` on a cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FourierKernel {
    terms: Vec<KernelTerm>,
}

impl FourierKernel {
    pub fn new(terms: impl IntoIterator<Item = (i64, i64, f64, f64)>) -> Self {
        let mut merged: Vec<KernelTerm> = Vec::new();
        for t in terms.into_iter().map(KernelTerm::from) {
            match merged.iter_mut().find(|m| m.p == t.p && m.q == t.q) {
                Some(m) => {
                    m.re += t.re;
                    m.im += t.im;
                }
                None => merged.push(t),
            }
        }
        Self { terms: merged }
    }

    /// `K(x, y) = amp * cos(2πk(x - y)/L)`.
    pub fn cos_difference(k: i64, amp: f64) -> Self {
        Self::new([(k, k, amp / 2.0, 0.0), (-k, -k, amp / 2.0, 0.0)])
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    fn coefficient(&self, p: i64, q: i64) -> (f64, f64) {
        self.terms
            .iter()
            .find(|t| t.p == p && t.q == q)
            .map_or((0.0, 0.0), |t| (t.re, t.im))
    }

    /// `max |c_pq - conj(c_qp)|`; zero iff `K(x,y) = conj(K(y,x))`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let (re, im) = self.coefficient(t.q, t.p);
                (t.re - re).hypot(t.im + im)
            })
            .fold(0.0, f64::max)
    }

    /// Replaces `c_pq` by `(c_pq + conj(c_qp)) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut keys: Vec<(i64, i64)> = Vec::new();
        for t in &self.terms {
            for key in [(t.p, t.q), (t.q, t.p)] {
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
        }
        Self::new(keys.into_iter().map(|(p, q)| {
            let (a_re, a_im) = self.coefficient(p, q);
            let (b_re, b_im) = self.coefficient(q, p);
            (p, q, 0.5 * (a_re + b_re), 0.5 * (a_im - b_im))
        }))
    }

    /// Value at `(x, y) = (i h, j h)` with `h = L / n`.
    pub fn at_nodes<T: Real>(&self, i: i64, j: i64, n: usize) -> Complex<T> {
        let n = n as i64;
        self.terms.iter().fold(Complex::new(T::zero(), T::zero()), |acc, t| {
            let r = (t.p * i - t.q * j).rem_euclid(n);
            let e = T::cis_turns(T::of(r as f64) / T::of(n as f64));
            acc + e * Complex::new(T::of(t.re), T::of(t.im))
        })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.re == 0.0 && t.im == 0.0)
    }
}

/// Symmetric table of coefficient functions `A[α][β]`, `0 <= α, β <= order`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    order: usize,
    entries: Vec<PeriodicFunction>,
}

/// Serialized form of one table entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub alpha: usize,
    pub beta: usize,
    pub terms: PeriodicFunction,
}

impl CoefficientTable {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            entries: vec![PeriodicFunction::zero(); (order + 1) * (order + 1)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, alpha: usize, beta: usize) -> &PeriodicFunction {
        &self.entries[alpha * (self.order + 1) + beta]
    }

    /// Sets `A[α][β]` and its mirror `A[β][α]`.
    pub fn with(mut self, alpha: usize, beta: usize, f: PeriodicFunction) -> Self {
        assert!(alpha <= self.order && beta <= self.order, "index above order");
        let w = self.order + 1;
        self.entries[beta * w + alpha] = f.clone();
        self.entries[alpha * w + beta] = f;
        self
    }

    /// Builds a table from serialized entries. Each unordered pair may be
    /// given once or twice; mirrored entries must agree.
    pub fn from_entries(order: usize, entries: &[CoefficientEntry]) -> Result<Self, Vec<String>> {
        let mut table = Self::zeros(order);
        let mut seen = vec![false; (order + 1) * (order + 1)];
        let mut errors = Vec::new();
        for e in entries {
            if e.alpha > order || e.beta > order {
                errors.push(format!(
                    "coefficient ({}, {}) exceeds order {order}",
                    e.alpha, e.beta
                ));
                continue;
            }
            let w = order + 1;
            let (i, j) = (e.alpha * w + e.beta, e.beta * w + e.alpha);
            if seen[i] || seen[j] {
                if table.entries[i] != e.terms {
                    errors.push(format!(
                        "coefficient ({}, {}) conflicts with its mirror or a duplicate",
                        e.alpha, e.beta
                    ));
                }
                continue;
            }
            seen[i] = true;
            seen[j] = true;
            table = table.with(e.alpha, e.beta, e.terms.clone());
        }
        if errors.is_empty() {
            Ok(table)
        } else {
            Err(errors)
        }
    }

    pub fn to_entries(&self) -> Vec<CoefficientEntry> {
        let mut out = Vec::new();
        for alpha in 0..=self.order {
            for beta in alpha..=self.order {
                let f = self.get(alpha, beta);
                if !f.is_zero() {
                    out.push(CoefficientEntry {
                        alpha,
                        beta,
                        terms: f.clone(),
                    });
                }
            }
        }
        out
    }

    /// Nonzero `(α, β, A[α][β])` triples.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, &PeriodicFunction)> {
        let w = self.order + 1;
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_zero())
            .map(move |(i, f)| (i / w, i % w, f))
    }

    pub fn max_harmonic(&self) -> u32 {
        self.entries.iter().map(|f| f.max_harmonic()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|f| f.is_zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_samples() {
        let f = PeriodicFunction::cos(1, 1.0);
        assert_eq!(f.at_half_index::<f64>(0, 16), 1.0);
        assert_eq!(f.at_half_index::<f64>(8, 16), 0.0);
        assert_eq!(f.at_half_index::<f64>(16, 16), -1.0);
        assert_eq!(f.at_half_index::<f64>(64, 16), 1.0);
        assert_eq!(f.at_half_index::<f64>(48, 16), -1.0);
    }

    #[test]
    fn negative_harmonics_normalize() {
        let f = PeriodicFunction::new([(-2, 1.0, 3.0)]);
        assert_eq!(f.terms()[0], FourierTerm { k: 2, a: 1.0, b: -3.0 });
    }

    #[test]
    fn kernel_symmetry() {
        let k = FourierKernel::cos_difference(1, 1.0);
        assert_eq!(k.hermiticity_defect(), 0.0);
        let bad = FourierKernel::new([(1, 0, 1.0, 0.0)]);
        assert!(bad.hermiticity_defect() > 0.5);
        assert_eq!(bad.symmetrized().hermiticity_defect(), 0.0);
    }

    #[test]
    fn table_mirror_conflict() {
        let e = |a, b, c| CoefficientEntry {
            alpha: a,
            beta: b,
            terms: PeriodicFunction::constant(c),
        };
        assert!(CoefficientTable::from_entries(1, &[e(1, 0, 1.0), e(0, 1, 1.0)]).is_ok());
        assert!(CoefficientTable::from_entries(1, &[e(1, 0, 1.0), e(0, 1, 2.0)]).is_err());
        assert!(CoefficientTable::from_entries(1, &[e(2, 0, 1.0)]).is_err());
    }
}
