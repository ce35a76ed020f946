//! Dense Hermitian eigensolver: Householder reduction to tridiagonal form,
//! a diagonal phase rotation to make it real, then implicit QL with shifts.

use num_complex::Complex;

use super::matrix::CMatrix;
use crate::error::{Error, Result};
use crate::scalar::{abs2, cabs, Real};

const MAX_SWEEPS: usize = 60;

/// Eigenvalues in ascending order and, optionally, orthonormal eigenvectors
/// stored column-wise in the same order.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    pub vectors: Option<CMatrix<T>>,
}

struct Tridiagonal<T> {
    diag: Vec<T>,
    off: Vec<Complex<T>>,
    reflectors: Vec<(usize, Vec<Complex<T>>, T)>,
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

fn tridiagonalize<T: Real>(a: &CMatrix<T>) -> Tridiagonal<T> {
    let n = a.rows();
    let mut a = a.clone();
    let mut off = vec![czero(); n.saturating_sub(1)];
    let mut reflectors = Vec::new();
    let two = T::of(2.0);
    let half = T::of(0.5);

    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let x0 = a[(k + 1, k)];
        let sigma = (k + 2..n).fold(T::zero(), |s, i| s + abs2(a[(i, k)]));
        if sigma == T::zero() {
            off[k] = x0;
            continue;
        }
        let xnorm = (abs2(x0) + sigma).sqrt();
        let r0 = cabs(x0);
        let phase = if r0 == T::zero() {
            Complex::new(T::one(), T::zero())
        } else {
            x0.unscale(r0)
        };
        let alpha = -phase.scale(xnorm);
        let mut v: Vec<Complex<T>> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] = x0 - alpha;
        let vv = v.iter().fold(T::zero(), |s, z| s + abs2(*z));
        let beta = two / vv;

        // p = beta * S v
        let mut p = vec![czero::<T>(); m];
        for (i, pi) in p.iter_mut().enumerate() {
            let row = a.row(k + 1 + i);
            let mut acc = czero();
            for (j, vj) in v.iter().enumerate() {
                acc = acc + row[k + 1 + j] * vj;
            }
            *pi = acc.scale(beta);
        }
        let vp = v
            .iter()
            .zip(&p)
            .fold(czero::<T>(), |s, (vi, pi)| s + vi.conj() * pi);
        let kappa = vp.re * beta * half;
        let q: Vec<Complex<T>> = p.iter().zip(&v).map(|(pi, vi)| pi - vi.scale(kappa)).collect();

        for i in 0..m {
            for j in 0..m {
                let upd = v[i] * q[j].conj() + q[i] * v[j].conj();
                a[(k + 1 + i, k + 1 + j)] = a[(k + 1 + i, k + 1 + j)] - upd;
            }
        }
        off[k] = alpha;
        reflectors.push((k + 1, v, beta));
    }

    Tridiagonal {
        diag: (0..n).map(|i| a[(i, i)].re).collect(),
        off,
        reflectors,
    }
}

fn pythag<T: Real>(a: T, b: T) -> T {
    let (a, b) = (a.abs(), b.abs());
    let (big, small) = if a > b { (a, b) } else { (b, a) };
    if big == T::zero() {
        T::zero()
    } else {
        let r = small / big;
        big * (T::one() + r * r).sqrt()
    }
}

/// Implicit QL on a real symmetric tridiagonal matrix. `z`, if given, is an
/// `n x n` row-major real matrix that accumulates the rotations.
fn tql<T: Real>(d: &mut [T], e: &mut [T], mut z: Option<&mut [T]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let eps = T::unit_roundoff();
    let two = T::of(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::NoConvergence(MAX_SWEEPS));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = pythag(g, T::one());
            let sgn = if g >= T::zero() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + sgn);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = pythag(f, g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

fn check_square<T: Real>(a: &CMatrix<T>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidInput(format!(
            "eigensolver needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    Ok(())
}

fn real_tridiagonal<T: Real>(t: &Tridiagonal<T>) -> (Vec<T>, Vec<T>) {
    let mut e: Vec<T> = t.off.iter().map(|z| cabs(*z)).collect();
    e.push(T::zero());
    (t.diag.clone(), e)
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the lower triangle
/// and the diagonal's real part are trusted to be consistent.
pub fn eigvalsh<T: Real>(a: &CMatrix<T>) -> Result<Vec<T>> {
    check_square(a)?;
    let t = tridiagonalize(a);
    let (mut d, mut e) = real_tridiagonal(&t);
    tql(&mut d, &mut e, None)?;
    d.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(d)
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn eigh<T: Real>(a: &CMatrix<T>) -> Result<HermitianEigen<T>> {
    check_square(a)?;
    let n = a.rows();
    let t = tridiagonalize(a);
    let (mut d, mut e) = real_tridiagonal(&t);

    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    tql(&mut d, &mut e, Some(&mut z))?;

    // phases turning the complex tridiagonal into the real one
    let mut delta = vec![Complex::new(T::one(), T::zero()); n];
    for k in 0..n.saturating_sub(1) {
        let r = cabs(t.off[k]);
        delta[k + 1] = if r == T::zero() {
            delta[k]
        } else {
            delta[k] * t.off[k].unscale(r)
        };
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));

    let mut x = CMatrix::from_fn(n, n, |i, j| delta[i].scale(z[i * n + order[j]]));
    for (start, v, beta) in t.reflectors.iter().rev() {
        for col in 0..n {
            let mut w = czero::<T>();
            for (i, vi) in v.iter().enumerate() {
                w = w + vi.conj() * x[(start + i, col)];
            }
            let w = w.scale(*beta);
            if w.re == T::zero() && w.im == T::zero() {
                continue;
            }
            for (i, vi) in v.iter().enumerate() {
                x[(start + i, col)] = x[(start + i, col)] - vi * w;
            }
        }
    }

    Ok(HermitianEigen {
        values: order.iter().map(|&i| d[i]).collect(),
        vectors: Some(x),
    })
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn lowest_eigenvalue<T: Real>(a: &CMatrix<T>) -> Result<T> {
    eigvalsh(a)?
        .first()
        .copied()
        .ok_or_else(|| Error::InvalidInput("empty matrix".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use crate::Dd;

    type C = Complex<f64>;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = CMatrix::from_fn(n, n, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        m.make_hermitian();
        m
    }

    fn residual(a: &CMatrix<f64>, eig: &HermitianEigen<f64>) -> f64 {
        let v = eig.vectors.as_ref().unwrap();
        let av = a.matmul(v);
        let mut worst: f64 = 0.0;
        for j in 0..a.rows() {
            for i in 0..a.rows() {
                worst = worst.max((av[(i, j)] - v[(i, j)] * eig.values[j]).norm());
            }
        }
        worst
    }

    #[test]
    fn diagonal_matrix() {
        let a = CMatrix::from_diagonal(&[3.0, -1.0, 2.0]);
        assert_eq!(eigvalsh(&a).unwrap(), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn random_hermitian_decomposition() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (17, 4), (40, 5)] {
            let a = random_hermitian(n, seed);
            let eig = eigh(&a).unwrap();
            assert!(residual(&a, &eig) < 1e-12, "n = {n}");
            let v = eig.vectors.as_ref().unwrap();
            let g = v.adjoint().matmul(v);
            let id = CMatrix::identity(n);
            let mut dev: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    dev = dev.max((g[(i, j)] - id[(i, j)]).norm());
                }
            }
            assert!(dev < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
            let vals = eigvalsh(&a).unwrap();
            for (x, y) in vals.iter().zip(&eig.values) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        // periodic second difference: eigenvalues 2 - 2cos(2πk/n)
        let n = 12;
        let a = CMatrix::from_fn(n, n, |i, j| {
            let d = (i + n - j) % n;
            C::new(
                match d {
                    0 => 2.0,
                    1 => -1.0,
                    _ if d == n - 1 => -1.0,
                    _ => 0.0,
                },
                0.0,
            )
        });
        let mut want: Vec<f64> = (0..n)
            .map(|k| 2.0 - 2.0 * (std::f64::consts::TAU * k as f64 / n as f64).cos())
            .collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in eigvalsh(&a).unwrap().iter().zip(&want) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn double_double_resolves_below_f64() {
        let n = 10;
        let a64 = random_hermitian(n, 11);
        let a = a64.map(|z| Complex::new(Dd::new(z.re), Dd::new(z.im)));
        let eig = eigh(&a).unwrap();
        let v = eig.vectors.as_ref().unwrap();
        let av = a.matmul(v);
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let r = av[(i, j)] - v[(i, j)] * eig.values[j];
                worst = worst.max(cabs(r).to_f64_lossy());
            }
        }
        assert!(worst < 1e-28, "residual {worst:e}");
    }
}
