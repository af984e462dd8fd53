//! Float math that works in both `std` and `no_std` builds.
//!
//! `f64`'s transcendental methods live in `std`; the `no_std` build routes
//! them through `libm` instead. Call sites use these free functions so the
//! rest of the crate is oblivious to the build mode.

#![allow(dead_code)]

macro_rules! shim {
    ($($name:ident),* $(,)?) => {
        $(
            #[cfg(feature = "std")]
            #[inline(always)]
            pub fn $name(x: f64) -> f64 {
                f64::$name(x)
            }
            #[cfg(not(feature = "std"))]
            #[inline(always)]
            pub fn $name(x: f64) -> f64 {
                libm::$name(x)
            }
        )*
    };
}

shim!(sqrt, exp, log10, floor, ceil, round, cos, sin, tan);

#[cfg(feature = "std")]
#[inline(always)]
pub fn ln(x: f64) -> f64 {
    f64::ln(x)
}
#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[cfg(feature = "std")]
#[inline(always)]
pub fn powi(x: f64, n: i32) -> f64 {
    f64::powi(x, n)
}
#[cfg(not(feature = "std"))]
#[inline(always)]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// Fast floor-to-isize for interpolation index math.
#[inline(always)]
pub fn ifloor(x: f64) -> isize {
    let i = x as isize;
    if (i as f64) > x {
        i - 1
    } else {
        i
    }
}
