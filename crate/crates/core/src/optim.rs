//! One-dimensional minimization.

use crate::error::Result;
use crate::scalar::Real;

/// Golden-section search on `[a, b]` until the bracket is below `tol`.
/// Returns the better interior probe and its value.
pub fn golden_section<T: Real>(mut f: impl FnMut(T) -> Result<T>, a: T, b: T, tol: T) -> Result<(T, T)> {
    let inv_phi = (T::of(5.0).sqrt() - T::one()) / T::of(2.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola() {
        let (x, v) = golden_section(|x: f64| Ok((x - 0.3).powi(2) + 1.0), -1.0, 2.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_goes_to_the_edge() {
        let (x, _) = golden_section(|x: f64| Ok(x), 0.0, 1.0, 1e-8).unwrap();
        assert!(x < 1e-7);
    }
}
