//! f64 helpers routed through `libm` so results do not depend on whether
//! `std` happens to be linked.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let rad = deg * core::f64::consts::PI / 180.0;
    (libm::sin(rad), libm::cos(rad))
}

#[inline]
pub(crate) fn sin_cos(rad: f64) -> (f64, f64) {
    (libm::sin(rad), libm::cos(rad))
}
