//! Modified Bessel functions of the first kind, orders 0 and 1, by power
//! series — all that the local-time Laplace transform needs.

use crate::error::{CoreError, Result};

/// `I_nu(x)` for `nu` in {0, 1} and `0 <= x <= 30`, to relative 1e-12.
pub fn bessel_i(order: u8, x: f64) -> Result<f64> {
    if order > 1 {
        return Err(CoreError::InvalidParams("bessel_i: order must be 0 or 1".into()));
    }
    if !(0.0..=30.0).contains(&x) {
        return Err(CoreError::InvalidParams(format!("bessel_i: x = {x} outside [0, 30]")));
    }
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    let q = x * x / 4.0;
    let mut term = if order == 0 { 1.0 } else { x / 2.0 };
    let mut sum = term;
    for k in 1..500 {
        term *= q / (k as f64 * (k + order as usize) as f64);
        sum += term;
        if term < sum * 1e-15 {
            return Ok(sum);
        }
    }
    Err(CoreError::Solve("bessel series did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero_and_half() {
        assert_eq!(bessel_i(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_i(1, 0.0).unwrap(), 0.0);
        assert!((bessel_i(0, 0.5).unwrap() - 1.0634833707413236).abs() < 1e-12);
        assert!((bessel_i(1, 0.5).unwrap() - 0.2578943053908963).abs() < 1e-12);
    }

    #[test]
    fn derivative_identity() {
        // I_0' = I_1
        for x in [0.3, 1.0, 5.0, 20.0] {
            let h = 1e-5;
            let d = (bessel_i(0, x + h).unwrap() - bessel_i(0, x - h).unwrap()) / (2.0 * h);
            let i1 = bessel_i(1, x).unwrap();
            assert!((d - i1).abs() < 1e-6 * i1.max(1.0), "x={x}");
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(bessel_i(0, 31.0).is_err());
        assert!(bessel_i(2, 1.0).is_err());
        assert!(bessel_i(0, -0.1).is_err());
    }
}
