//! Closed-form references: Poisson statistics, Bessel diffraction on a
//! uniform lattice, and displacement-operator matrix elements.
//!
//! These are evaluated by methods independent of the propagators so they
//! can serve as ground truth in tests.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};

/// Largest Fock index accepted by [`displacement_matrix_element`].
pub const LAGUERRE_MAX_INDEX: u64 = 5000;

/// An oracle value tagged with the closed form that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: Complex64,
    pub provenance: &'static str,
}

impl OracleValue {
    pub fn poisson(mean: f64, n: u64) -> Self {
        Self {
            value: Complex64::new(poisson_pmf(mean, n), 0.0),
            provenance: "poisson pmf exp(-m) m^n / n! (log domain)",
        }
    }

    pub fn displacement(m: u64, n: u64, beta: Complex64) -> Result<Self> {
        Ok(Self {
            value: displacement_matrix_element(m, n, beta)?,
            provenance: "<m|D(beta)|n> via associated Laguerre recurrence",
        })
    }
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `exp(-mean) mean^n / n!`, evaluated in the log domain.
pub fn poisson_pmf(mean: f64, n: u64) -> f64 {
    assert!(mean >= 0.0, "Poisson mean must be non-negative");
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (-mean + n as f64 * mean.ln() - ln_factorial(n)).exp()
}

/// Bessel functions `J_0(x) ..= J_max(x)` by Miller's backward recurrence,
/// normalized with `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, max_order: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let x_abs = x.abs();
    let top = max_order.max(x_abs.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x_abs * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        if k - 1 <= max_order {
            out[k - 1] = cur;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    norm += cur;
    out.iter_mut().for_each(|v| *v /= norm);
    if x < 0.0 {
        out.iter_mut().enumerate().for_each(|(k, v)| {
            if k % 2 == 1 {
                *v = -*v;
            }
        });
    }
    out
}

/// Site amplitudes `i^m J_m(2 J t)` after evolving a single excited site
/// of a uniform lattice with `H = -J sum_m (|m><m+1| + |m+1><m|)`.
///
/// `m` runs over the offsets in `offsets`; negative offsets use
/// `J_{-m} = (-1)^m J_m`.
pub fn bessel_lattice_amplitudes(hopping: f64, t: f64, offsets: std::ops::RangeInclusive<i64>) -> Vec<Complex64> {
    assert!(hopping >= 0.0 && t >= 0.0, "hopping and time must be non-negative");
    let max = offsets.start().unsigned_abs().max(offsets.end().unsigned_abs()) as usize;
    let j = bessel_j_sequence(2.0 * hopping * t, max);
    offsets
        .map(|m| {
            let mut value = j[m.unsigned_abs() as usize];
            if m < 0 && m % 2 != 0 {
                value = -value;
            }
            let i_pow = match m.rem_euclid(4) {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            };
            i_pow * value
        })
        .collect()
}

/// `<m|D(beta)|n>` from the associated Laguerre closed form
///
/// ```text
/// <m|D(b)|n> = sqrt(n!/m!) b^(m-n) exp(-|b|^2/2) L_n^(m-n)(|b|^2),  m >= n
/// ```
///
/// with the `m < n` case from `<m|D(b)|n> = conj(<n|D(-b)|m>)`.
pub fn displacement_matrix_element(m: u64, n: u64, beta: Complex64) -> Result<Complex64> {
    if m > LAGUERRE_MAX_INDEX || n > LAGUERRE_MAX_INDEX {
        return Err(FockError::Range(format!(
            "<{m}|D|{n}> beyond the Laguerre stability bound {LAGUERRE_MAX_INDEX}"
        )));
    }
    if m < n {
        return Ok(displacement_matrix_element(n, m, -beta)?.conj());
    }
    let x = beta.norm_sqr();
    let shift = m - n;
    if x == 0.0 {
        return Ok(if shift == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        });
    }
    let (laguerre, log_scale) = laguerre_scaled(n, shift as f64, x);
    let log_magnitude = 0.5 * (ln_factorial(n) - ln_factorial(m)) + shift as f64 * x.sqrt().ln() - 0.5 * x + log_scale;
    let phase = Complex64::from_polar(1.0, shift as f64 * beta.arg());
    Ok(phase * laguerre * log_magnitude.exp())
}

/// `L_n^(a)(x)` as `(mantissa, log_scale)` with value `mantissa * e^log_scale`.
fn laguerre_scaled(n: u64, a: f64, x: f64) -> (f64, f64) {
    let mut prev = 1.0; // L_0
    if n == 0 {
        return (prev, 0.0);
    }
    let mut cur = 1.0 + a - x; // L_1
    let mut log_scale = 0.0;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            prev *= 1e-200;
            log_scale += 200.0 * std::f64::consts::LN_10;
        }
    }
    (cur, log_scale)
}
