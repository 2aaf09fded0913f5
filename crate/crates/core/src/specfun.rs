//! Bessel functions of the first kind, their derivatives and zeros, and the
//! spherical Bessel function `j1`.
//!
//! `J_k(x)` is evaluated by the ascending power series for `x <= 12` and by
//! Miller's backward recurrence (normalized with `J_0 + 2 sum J_2m = 1`)
//! beyond. The backward direction is the stable one for the minimal solution,
//! so the same code path covers `k < x` and `k > x`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper end of the supported argument range.
pub const MAX_ARGUMENT: f64 = 100.0;
/// Crossover between the power series and the backward recurrence.
pub const SERIES_CROSSOVER: f64 = 12.0;
/// Largest order and index served by [`bessel_zero`].
pub const MAX_ZERO_ORDER: u32 = 20;
pub const MAX_ZERO_INDEX: u32 = 20;

const ZERO_SCAN_STEP: f64 = FRAC_PI_4;
const ZERO_TOL: f64 = 1e-13;

/// The `index`-th positive zero of `J_order`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselZero {
    pub order: u32,
    pub index: u32,
    pub value: f64,
}

fn check_argument(x: f64) -> Result<()> {
    if !(0.0..=MAX_ARGUMENT).contains(&x) {
        return Err(Error::OutOfRange(format!(
            "Bessel argument {x} outside [0, {MAX_ARGUMENT}]"
        )));
    }
    Ok(())
}

/// `J_k(x)` for `0 <= x <= 100`.
pub fn bessel_j(k: u32, x: f64) -> Result<f64> {
    check_argument(x)?;
    Ok(jn(k, x))
}

/// `J_k'(x)` for `0 <= x <= 100`.
pub fn bessel_j_prime(k: u32, x: f64) -> Result<f64> {
    check_argument(x)?;
    Ok(jn_prime(k, x))
}

/// `J_k''(x)` for `0 <= x <= 100`, from `(J_{k-2} - 2 J_k + J_{k+2}) / 4`.
pub fn bessel_j_second(k: u32, x: f64) -> Result<f64> {
    check_argument(x)?;
    Ok(jn_second(k, x))
}

pub(crate) fn jn(k: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_CROSSOVER {
        series(k, x)
    } else {
        miller(k, x)
    }
}

/// `J_n` for a signed order, via `J_{-n} = (-1)^n J_n`.
fn jn_signed(n: i64, x: f64) -> f64 {
    let v = jn(n.unsigned_abs() as u32, x);
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

pub(crate) fn jn_prime(k: u32, x: f64) -> f64 {
    if k == 0 {
        -jn(1, x)
    } else {
        0.5 * (jn(k - 1, x) - jn(k + 1, x))
    }
}

pub(crate) fn jn_second(k: u32, x: f64) -> f64 {
    let k = k as i64;
    0.25 * (jn_signed(k - 2, x) - 2.0 * jn_signed(k, x) + jn_signed(k + 2, x))
}

fn series(k: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for i in 1..=k {
        term *= half / i as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * (m + k as f64));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && m > 2.0 {
            break;
        }
        if m > 200.0 {
            break;
        }
    }
    sum
}

fn miller(k: u32, x: f64) -> f64 {
    let start = x.max(k as f64) + 12.0 * x.cbrt() + 20.0;
    let mut n = start.ceil() as u32;
    if n % 2 == 1 {
        n += 1;
    }
    let mut next = 0.0; // J_{n+1}
    let mut cur = 1e-30; // J_n
    let mut norm = 0.0;
    let mut wanted = if n == k { cur } else { 0.0 };
    if n % 2 == 0 {
        norm += 2.0 * cur;
    }
    for i in (1..=n).rev() {
        let prev = 2.0 * i as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let order = i - 1;
        if order == k {
            wanted = cur;
        }
        if order == 0 {
            norm += cur;
        } else if order % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    wanted / norm
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

fn scan_zeros(k: u32, count: usize) -> Vec<f64> {
    let mut zeros = Vec::with_capacity(count);
    let mut a = if k <= 1 { 0.5 } else { k as f64 };
    let mut fa = jn(k, a);
    while zeros.len() < count && a < MAX_ARGUMENT {
        let b = (a + ZERO_SCAN_STEP).min(MAX_ARGUMENT);
        let fb = jn(k, b);
        if (fa < 0.0) != (fb < 0.0) {
            zeros.push(bisect(|x| jn(k, x), a, b, ZERO_TOL));
        }
        a = b;
        fa = fb;
    }
    zeros
}

fn zero_table() -> &'static Vec<Vec<f64>> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=MAX_ZERO_ORDER)
            .map(|k| scan_zeros(k, MAX_ZERO_INDEX as usize))
            .collect()
    })
}

/// The `m`-th positive zero of `J_k` (`k <= 20`, `1 <= m <= 20`).
pub fn bessel_zero(k: u32, m: u32) -> Result<BesselZero> {
    if k > MAX_ZERO_ORDER || m == 0 || m > MAX_ZERO_INDEX {
        return Err(Error::OutOfRange(format!(
            "Bessel zero (k={k}, m={m}) outside the table k <= {MAX_ZERO_ORDER}, 1 <= m <= {MAX_ZERO_INDEX}"
        )));
    }
    let value = zero_table()[k as usize][(m - 1) as usize];
    Ok(BesselZero {
        order: k,
        index: m,
        value,
    })
}

/// All tabulated zeros of `J_k`, ascending.
pub fn bessel_zeros(k: u32) -> Result<&'static [f64]> {
    if k > MAX_ZERO_ORDER {
        return Err(Error::OutOfRange(format!("Bessel order {k} > {MAX_ZERO_ORDER}")));
    }
    Ok(&zero_table()[k as usize])
}

const SPHERICAL_SERIES_X: f64 = 1.0;

/// Coefficients `a_m` of `j1(x) = sum a_m x^{2m+1}`.
fn spherical_series_coeffs() -> impl Iterator<Item = (f64, f64)> {
    // a_m = (-1/2)^m / (m! (2m+3)!!)
    let mut a = 1.0 / 3.0;
    (0..14).map(move |m| {
        let out = (m as f64, a);
        let mf = m as f64 + 1.0;
        a *= -0.5 / (mf * (2.0 * mf + 3.0));
        out
    })
}

/// Spherical Bessel `j1(x) = sin x / x^2 - cos x / x`, with `j1(0) = 0`.
pub fn spherical_bessel_j1(x: f64) -> f64 {
    let x = x.abs();
    if x < SPHERICAL_SERIES_X {
        spherical_series_coeffs()
            .map(|(m, a)| a * x.powi(2 * m as i32 + 1))
            .sum()
    } else {
        let (s, c) = x.sin_cos();
        s / (x * x) - c / x
    }
}

pub fn spherical_bessel_j1_prime(x: f64) -> f64 {
    if x.abs() < SPHERICAL_SERIES_X {
        spherical_series_coeffs()
            .map(|(m, a)| (2.0 * m + 1.0) * a * x.powi(2 * m as i32))
            .sum()
    } else {
        let (s, c) = x.sin_cos();
        s / x + 2.0 * c / (x * x) - 2.0 * s / (x * x * x)
    }
}

pub fn spherical_bessel_j1_second(x: f64) -> f64 {
    if x.abs() < SPHERICAL_SERIES_X {
        spherical_series_coeffs()
            .skip(1)
            .map(|(m, a)| (2.0 * m + 1.0) * (2.0 * m) * a * x.powi(2 * m as i32 - 1))
            .sum()
    } else {
        let (s, c) = x.sin_cos();
        let x2 = x * x;
        c / x - 3.0 * s / x2 - 6.0 * c / (x2 * x) + 6.0 * s / (x2 * x2)
    }
}

/// First positive zero of `j1`, i.e. the first positive root of `tan x = x`.
pub fn spherical_bessel_j1_first_zero() -> f64 {
    static ZERO: OnceLock<f64> = OnceLock::new();
    *ZERO.get_or_init(|| {
        bisect(|x| x.sin() - x * x.cos(), PI + 1e-9, PI + FRAC_PI_2 - 1e-9, 1e-15)
    })
}
