//! Shared log-likelihood ratio conventions.
//!
//! An LLR is `log(P(bit = 0) / P(bit = 1))`. Hard decisions map `L >= 0` to
//! bit 0. Every conversion between probability and LLR domains saturates at
//! [`LLR_MAX`].

/// Saturation level for every LLR produced by a domain conversion.
pub const LLR_MAX: f64 = 40.0;

/// Bound on the argument of `tanh` in the box-plus kernels.
pub const TANH_ARG_MAX: f64 = 19.0;

/// Bound on the magnitude of the argument of `atanh`.
pub const ATANH_ARG_MAX: f64 = 1.0 - 1e-12;

#[inline]
pub fn clip(l: f64) -> f64 {
    l.clamp(-LLR_MAX, LLR_MAX)
}

/// `P(bit = 0)` for an LLR.
#[inline]
pub fn prob_zero(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

#[inline]
pub fn hard_bit(l: f64) -> u8 {
    u8::from(l < 0.0)
}

#[inline]
pub(crate) fn tanh_half(l: f64) -> f64 {
    (0.5 * l).clamp(-TANH_ARG_MAX, TANH_ARG_MAX).tanh()
}

#[inline]
pub(crate) fn from_tanh_product(p: f64) -> f64 {
    let a = p.abs().min(ATANH_ARG_MAX);
    clip((2.0 * a.atanh()).copysign(p))
}

/// Box-plus over an arbitrary number of LLRs: `2 atanh(prod tanh(L/2))`.
///
/// The empty product is the certain-zero message `+LLR_MAX`.
pub fn boxplus_all<I: IntoIterator<Item = f64>>(llrs: I) -> f64 {
    let mut prod = 1.0;
    let mut any = false;
    for l in llrs {
        any = true;
        prod *= tanh_half(l);
    }
    if !any {
        return LLR_MAX;
    }
    from_tanh_product(prod)
}
