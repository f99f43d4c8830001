// Thin wrappers so call sites read like std float methods.

#[cfg(test)]
pub(crate) use libm::erfc;
pub(crate) use libm::{exp, log, log1p, sqrt};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + log1p(exp(-x))
    } else {
        log1p(exp(x))
    }
}

pub(crate) fn square(x: f64) -> f64 {
    x * x
}
