//! Scalar Gaussian special functions.
//!
//! `phi` is the excess-tail second moment
//! `√(2/π) ∫_t^∞ (x − t)² e^{−x²/2} dx`, the expected squared positive part
//! `E[pos(|g| − t)²]` of a standard normal `g`. It is evaluated through the
//! closed form `(1 + t²)·erfc(t/√2) − t·√(2/π)·e^{−t²/2}`.

use crate::error::{Error, Result};

pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Beyond this argument `phi` and its derivative underflow to zero.
pub const PHI_CUTOFF: f64 = 50.0;

/// Complementary error function.
pub fn erfc(t: f64) -> f64 {
    libm::erfc(t)
}

/// Positive part.
#[inline]
pub fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn check_arg(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!(
            "Gaussian tail kernels need a non-negative argument, got {t}"
        )));
    }
    Ok(())
}

pub(crate) fn phi_unchecked(t: f64) -> f64 {
    if t > PHI_CUTOFF {
        return 0.0;
    }
    let tail = erfc(t * std::f64::consts::FRAC_1_SQRT_2);
    let density = SQRT_2_OVER_PI * (-0.5 * t * t).exp();
    // cancellation leaves O(ulp) noise around zero for large t
    pos((1.0 + t * t) * tail - t * density)
}

pub(crate) fn phi_prime_unchecked(t: f64) -> f64 {
    if t > PHI_CUTOFF {
        return 0.0;
    }
    let tail = erfc(t * std::f64::consts::FRAC_1_SQRT_2);
    let density = SQRT_2_OVER_PI * (-0.5 * t * t).exp();
    -2.0 * pos(density - t * tail)
}

/// φ(t) for t ≥ 0.
pub fn phi(t: f64) -> Result<f64> {
    check_arg(t)?;
    Ok(phi_unchecked(t))
}

/// dφ/dt = −2(√(2/π)·e^{−t²/2} − t·erfc(t/√2)), for t ≥ 0.
pub fn phi_prime(t: f64) -> Result<f64> {
    check_arg(t)?;
    Ok(phi_prime_unchecked(t))
}
