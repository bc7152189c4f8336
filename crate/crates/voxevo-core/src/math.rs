//! Float intrinsics that work under both `std` and `no_std`.
//!
//! `core` has no `sqrt`/`sin`/... methods, so every transcendental the crate
//! uses goes through one of these shims. With `std` enabled they forward to
//! the (hardware-backed) std methods; without it they fall back to `libm`.

#![allow(dead_code)]

#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.sqrt()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::sqrt(x)
    }
}

#[inline(always)]
pub fn sin(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.sin()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::sin(x)
    }
}

#[inline(always)]
pub fn cos(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.cos()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::cos(x)
    }
}

#[inline(always)]
pub fn exp(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.exp()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::exp(x)
    }
}

#[inline(always)]
pub fn ln(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.ln()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::log(x)
    }
}

#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.tanh()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::tanh(x)
    }
}

#[inline(always)]
pub fn floor(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.floor()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::floor(x)
    }
}

#[inline(always)]
pub fn ceil(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.ceil()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::ceil(x)
    }
}

#[inline(always)]
pub fn round(x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.round()
    }
    #[cfg(not(feature = "std"))]
    {
        libm::round(x)
    }
}

#[inline(always)]
pub fn powi(x: f64, n: i32) -> f64 {
    #[cfg(feature = "std")]
    {
        x.powi(n)
    }
    #[cfg(not(feature = "std"))]
    {
        // libm has no powi; exponents here are tiny, so repeated squaring
        // would be overkill.
        let mut acc = 1.0;
        let mut i = 0;
        let (base, count) = if n < 0 { (1.0 / x, -n) } else { (x, n) };
        while i < count {
            acc *= base;
            i += 1;
        }
        acc
    }
}

/// `erf` has no std counterpart; always taken from libm.
#[inline(always)]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Natural log of the gamma function, from libm (sign discarded; every call
/// site uses positive arguments).
#[inline(always)]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}
