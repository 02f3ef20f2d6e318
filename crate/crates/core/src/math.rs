// Float helpers routed through libm so the crate builds without std.

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
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

/// `ceil(x)` that ignores representation noise just above an integer, so
/// that `1.1 * 10` yields 11 and not 12.
#[inline]
pub(crate) fn ceil_count(x: f64) -> usize {
    let r = libm::round(x);
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        libm::ceil(x) as usize
    }
}
