//! Thin wrappers over `libm` so `std` and `no_std` builds agree bit-for-bit.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

/// `(m, e)` with `x = m·2^e` and `0.5 ≤ |m| < 1`.
#[inline]
pub(crate) fn frexp(x: f64) -> (f64, i32) {
    libm::frexp(x)
}

#[inline]
pub(crate) fn scalbn(x: f64, n: i32) -> f64 {
    libm::scalbn(x, n)
}
