use num_complex::Complex;

use super::matrix::CMatrix;
use crate::error::{Error, Result};
use crate::scalar::{cabs, Real};

/// Solves `A x = b` by LU factorization with partial pivoting.
pub fn lu_solve<T: Real>(a: &CMatrix<T>, b: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(Error::InvalidInput("lu_solve dimension mismatch".into()));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs();
    if scale == T::zero() {
        return Err(Error::SingularSystem);
    }
    let tiny = scale * T::unit_roundoff();

    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, cabs(m[(i, k)])))
            .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= tiny {
            return Err(Error::SingularSystem);
        }
        if p != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(p, j)];
                m[(p, j)] = t;
            }
            x.swap(k, p);
        }
        let piv = m[(k, k)];
        for i in k + 1..n {
            let f = m[(i, k)] / piv;
            if f.re == T::zero() && f.im == T::zero() {
                continue;
            }
            for j in k..n {
                m[(i, j)] = m[(i, j)] - f * m[(k, j)];
            }
            x[i] = x[i] - f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in k + 1..n {
            acc = acc - m[(k, j)] * x[j];
        }
        x[k] = acc / m[(k, k)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    #[test]
    fn solves_small_system() {
        let a = CMatrix::from_fn(3, 3, |i, j| {
            C::new(if i == j { 4.0 } else { 1.0 }, (i as f64) - (j as f64))
        });
        let x_true = vec![C::new(1.0, 2.0), C::new(-1.0, 0.5), C::new(0.0, -3.0)];
        let b = a.matvec(&x_true);
        let x = lu_solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-14);
        }
    }

    #[test]
    fn needs_pivoting() {
        let a = CMatrix::from_fn(2, 2, |i, j| C::new(if i == j { 0.0 } else { 1.0 }, 0.0));
        let x = lu_solve(&a, &[C::new(2.0, 0.0), C::new(3.0, 0.0)]).unwrap();
        assert_eq!(x, vec![C::new(3.0, 0.0), C::new(2.0, 0.0)]);
    }

    #[test]
    fn singular_is_reported() {
        let a = CMatrix::from_fn(2, 2, |_, _| C::new(1.0, 0.0));
        assert_eq!(lu_solve(&a, &[C::new(1.0, 0.0); 2]), Err(Error::SingularSystem));
    }
}
