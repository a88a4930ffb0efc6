//! Propagation kernels for tridiagonal generators on a photon-number window.
//!
//! Two kernels share one operator layout:
//!
//! * [`Tridiagonal::chebyshev_evolve`] computes `exp(-iHt) psi` for Hermitian
//!   `H` with a Chebyshev expansion whose coefficients `(-i)^k J_k(R t)` come
//!   from the Fourier series `exp(i x sin s) = sum_k J_k(x) exp(iks)`.
//! * [`Generator::taylor_step`] computes `exp(G h) psi` for a general complex
//!   tridiagonal `G` (used for the non-Hermitian loss drift), with steps
//!   short enough that `|G| h <= 1`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest Chebyshev argument `R dt` handled in one step.
pub(crate) const MAX_CHEBYSHEV_ARG: f64 = 2000.0;

/// Chebyshev terms are dropped once `|J_k| < CHEBYSHEV_CUTOFF`.
const CHEBYSHEV_CUTOFF: f64 = 1e-17;

/// Hermitian tridiagonal matrix: real diagonal and complex sub-diagonal
/// (`lower[i] = H[i+1][i]`; the super-diagonal is its conjugate).
#[derive(Debug, Clone)]
pub(crate) struct Tridiagonal {
    pub diag: Vec<f64>,
    pub lower: Vec<Complex64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn has_coupling(&self) -> bool {
        self.lower.iter().any(|l| *l != ZERO)
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let dim = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..dim {
            let below = if i > 0 { self.lower[i - 1].norm() } else { 0.0 };
            let above = if i + 1 < dim { self.lower[i].norm() } else { 0.0 };
            lo = lo.min(self.diag[i] - below - above);
            hi = hi.max(self.diag[i] + below + above);
        }
        (lo, hi)
    }

    /// `y = H x`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let dim = self.dim();
        for i in 0..dim {
            let mut acc = x[i] * self.diag[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < dim {
                acc += self.lower[i].conj() * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Number of Chebyshev steps a propagation over `time` would use.
    pub fn chebyshev_steps(&self, time: f64) -> usize {
        let (lo, hi) = self.spectral_bounds();
        let radius = 0.5 * (hi - lo);
        ((radius * time.abs()) / MAX_CHEBYSHEV_ARG).ceil().max(1.0) as usize
    }

    /// Applies `exp(-i H time)` in `steps` equal Chebyshev steps.
    pub fn chebyshev_evolve(&self, psi: &mut [Complex64], time: f64, steps: usize) {
        let dim = self.dim();
        if dim == 0 || time == 0.0 {
            return;
        }
        let (lo, hi) = self.spectral_bounds();
        let center = 0.5 * (hi + lo);
        // the tiny margin keeps rounding from pushing eigenvalues past +-1
        let radius = (0.5 * (hi - lo)).max(f64::MIN_POSITIVE) * (1.0 + 1e-12);
        let dt = time / steps as f64;
        let coeffs = chebyshev_coefficients(radius * dt);
        let global = Complex64::from_polar(1.0, -(center * dt).rem_euclid(std::f64::consts::TAU));

        let scaled_diag: Vec<f64> = self.diag.iter().map(|d| (d - center) / radius).collect();
        let scaled_lower: Vec<Complex64> = self.lower.iter().map(|l| l / radius).collect();

        let mut prev = vec![ZERO; dim];
        let mut cur = vec![ZERO; dim];
        let mut acc = vec![ZERO; dim];
        for _ in 0..steps {
            // T_0 psi = psi
            prev.copy_from_slice(psi);
            for (a, p) in acc.iter_mut().zip(&prev) {
                *a = coeffs[0] * p;
            }
            if coeffs.len() > 1 {
                // T_1 psi = Hs psi
                scaled_apply(&scaled_diag, &scaled_lower, &prev, &mut cur, 1.0, None);
                for (a, c) in acc.iter_mut().zip(&cur) {
                    *a += coeffs[1] * c;
                }
            }
            for &coef in coeffs.iter().skip(2) {
                // T_{k+1} = 2 Hs T_k - T_{k-1}, written over T_{k-1}
                chebyshev_next(&scaled_diag, &scaled_lower, &cur, &mut prev, &mut acc, coef);
                std::mem::swap(&mut prev, &mut cur);
            }
            for (p, a) in psi.iter_mut().zip(&acc) {
                *p = a * global;
            }
        }
    }
}

/// `y = factor * Hs x - sub` where `sub` is optional.
fn scaled_apply(
    diag: &[f64],
    lower: &[Complex64],
    x: &[Complex64],
    y: &mut [Complex64],
    factor: f64,
    sub: Option<&[Complex64]>,
) {
    let dim = diag.len();
    for i in 0..dim {
        let mut v = x[i] * diag[i];
        if i > 0 {
            v += lower[i - 1] * x[i - 1];
        }
        if i + 1 < dim {
            v += lower[i].conj() * x[i + 1];
        }
        v *= factor;
        if let Some(s) = sub {
            v -= s[i];
        }
        y[i] = v;
    }
}

/// One fused Chebyshev recurrence step:
/// `prev <- 2 Hs cur - prev; acc += coef * prev`.
#[inline]
fn chebyshev_next(
    diag: &[f64],
    lower: &[Complex64],
    cur: &[Complex64],
    prev: &mut [Complex64],
    acc: &mut [Complex64],
    coef: Complex64,
) {
    let dim = diag.len();
    if dim == 1 {
        let v = 2.0 * cur[0] * diag[0] - prev[0];
        prev[0] = v;
        acc[0] += coef * v;
        return;
    }
    {
        let v = 2.0 * (cur[0] * diag[0] + lower[0].conj() * cur[1]) - prev[0];
        prev[0] = v;
        acc[0] += coef * v;
    }
    for i in 1..dim - 1 {
        let hx = cur[i] * diag[i] + lower[i - 1] * cur[i - 1] + lower[i].conj() * cur[i + 1];
        let v = 2.0 * hx - prev[i];
        prev[i] = v;
        acc[i] += coef * v;
    }
    {
        let i = dim - 1;
        let v = 2.0 * (cur[i] * diag[i] + lower[i - 1] * cur[i - 1]) - prev[i];
        prev[i] = v;
        acc[i] += coef * v;
    }
}

/// Expansion coefficients `(2 - delta_k0) (-i)^k J_k(x)` of `exp(-i x y)`
/// in Chebyshev polynomials `T_k(y)`, truncated once the Bessel factor is
/// negligible.
pub(crate) fn chebyshev_coefficients(x: f64) -> Vec<Complex64> {
    let x = x.abs();
    let terms = chebyshev_order(x) + 1;
    let bessel = bessel_fourier(x, terms);
    let mut phase = Complex64::new(1.0, 0.0);
    bessel
        .into_iter()
        .enumerate()
        .map(|(k, j)| {
            let c = phase * j * if k == 0 { 1.0 } else { 2.0 };
            phase *= Complex64::new(0.0, -1.0);
            c
        })
        .collect()
}

/// Highest order `k` with `(x/2)^k / k!` (a bound on `|J_k(x)|`) above
/// the cutoff.
fn chebyshev_order(x: f64) -> usize {
    if x == 0.0 {
        return 0;
    }
    let cutoff = CHEBYSHEV_CUTOFF.ln();
    let half_log = (0.5 * x).ln();
    let mut k = x.ceil() as usize;
    let mut log_bound = k as f64 * half_log - ln_factorial(k);
    while log_bound > cutoff {
        k += 1;
        log_bound += half_log - (k as f64).ln();
    }
    k.max(1)
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `J_0(x) .. J_{count-1}(x)` as the Fourier coefficients of
/// `exp(i x sin s)`, sampled on a grid fine enough that aliasing is below
/// the truncation cutoff.
pub(crate) fn bessel_fourier(x: f64, count: usize) -> Vec<f64> {
    let len = (2 * count + 16).next_power_of_two().max(64);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(len);
    let step = std::f64::consts::TAU / len as f64;
    let mut samples: Vec<Complex64> = (0..len)
        .map(|j| Complex64::from_polar(1.0, x * (step * j as f64).sin()))
        .collect();
    fft.process(&mut samples);
    let scale = 1.0 / len as f64;
    samples.iter().take(count).map(|c| c.re * scale).collect()
}

/// General complex tridiagonal generator `G`, applied as `exp(G h)`.
#[derive(Debug, Clone)]
pub(crate) struct Generator {
    pub diag: Vec<Complex64>,
    /// `G[i+1][i]`
    pub lower: Vec<Complex64>,
    /// `G[i][i+1]`
    pub upper: Vec<Complex64>,
    shift: Complex64,
    norm: f64,
}

impl Generator {
    /// `G = -i H - diag(decay)`.
    pub fn from_hamiltonian(h: &Tridiagonal, decay: &[f64]) -> Self {
        let i = Complex64::new(0.0, 1.0);
        let diag: Vec<Complex64> = h
            .diag
            .iter()
            .zip(decay)
            .map(|(&d, &g)| Complex64::new(-g, -d))
            .collect();
        let lower: Vec<Complex64> = h.lower.iter().map(|l| -i * l).collect();
        let upper: Vec<Complex64> = h.lower.iter().map(|l| -i * l.conj()).collect();

        let (re_lo, re_hi, im_lo, im_hi) = diag.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), z| (a.min(z.re), b.max(z.re), c.min(z.im), d.max(z.im)),
        );
        let shift = Complex64::new(0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi));
        let dim = diag.len();
        let mut norm: f64 = 0.0;
        for k in 0..dim {
            let mut row = (diag[k] - shift).norm();
            if k > 0 {
                row += lower[k - 1].norm();
            }
            if k + 1 < dim {
                row += upper[k].norm();
            }
            norm = norm.max(row);
        }
        Self {
            diag,
            lower,
            upper,
            shift,
            norm,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.lower.iter().all(|l| *l == ZERO)
    }

    /// Longest step with `|G - shift| h <= 1`.
    pub fn max_step(&self) -> f64 {
        if self.norm == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.norm
        }
    }

    /// `out = exp(G h) psi`. Diagonal generators are exponentiated exactly;
    /// otherwise `h` must not exceed [`Self::max_step`].
    pub fn taylor_step(&self, psi: &[Complex64], h: f64, out: &mut Vec<Complex64>) {
        let dim = psi.len();
        out.clear();
        if self.is_diagonal() {
            out.extend(psi.iter().zip(&self.diag).map(|(p, g)| p * (g * h).exp()));
            return;
        }
        debug_assert!(h <= self.max_step() * (1.0 + 1e-12));
        out.extend_from_slice(psi);
        let mut term = psi.to_vec();
        let mut next = vec![ZERO; dim];
        let shifted: Vec<Complex64> = self.diag.iter().map(|d| (d - self.shift) * h).collect();
        let lower: Vec<Complex64> = self.lower.iter().map(|l| l * h).collect();
        let upper: Vec<Complex64> = self.upper.iter().map(|u| u * h).collect();
        let out_norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        for order in 1..60 {
            let inv = 1.0 / order as f64;
            let mut term_norm = 0.0;
            for k in 0..dim {
                let mut v = shifted[k] * term[k];
                if k > 0 {
                    v += lower[k - 1] * term[k - 1];
                }
                if k + 1 < dim {
                    v += upper[k] * term[k + 1];
                }
                v *= inv;
                term_norm += v.norm_sqr();
                next[k] = v;
            }
            for (o, n) in out.iter_mut().zip(&next) {
                *o += n;
            }
            std::mem::swap(&mut term, &mut next);
            if term_norm <= 1e-34 * out_norm {
                break;
            }
        }
        let scale = (self.shift * h).exp();
        out.iter_mut().for_each(|o| *o *= scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(dim: usize, seed: u64) -> Tridiagonal {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        Tridiagonal {
            diag: (0..dim).map(|_| 4.0 * next()).collect(),
            lower: (0..dim - 1)
                .map(|_| Complex64::new(2.0 * next(), 2.0 * next()))
                .collect(),
        }
    }

    fn dense_exp(h: &Tridiagonal, t: f64, psi: &[Complex64]) -> Vec<Complex64> {
        // small-step Taylor on the dense product as an independent reference
        let steps = 20_000;
        let dt = t / steps as f64;
        let mut state = psi.to_vec();
        let mut tmp = vec![ZERO; psi.len()];
        for _ in 0..steps {
            let mut term = state.clone();
            let mut sum = state.clone();
            for order in 1..12 {
                h.apply(&term, &mut tmp);
                for (tt, v) in term.iter_mut().zip(&tmp) {
                    *tt = Complex64::new(0.0, -dt / order as f64) * v;
                }
                for (s, tt) in sum.iter_mut().zip(&term) {
                    *s += tt;
                }
            }
            state = sum;
        }
        state
    }

    #[test]
    fn fourier_bessel_values() {
        let j = bessel_fourier(2.404825557695773, 4);
        assert!(j[0].abs() < 1e-14);
        let j = bessel_fourier(1.0, 3);
        assert!((j[0] - 0.7651976865579666).abs() < 1e-15);
        assert!((j[1] - 0.4400505857449335).abs() < 1e-15);
        assert!((j[2] - 0.1149034849319005).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_matches_reference() {
        let h = random_hermitian(12, 7);
        let mut psi: Vec<Complex64> = (0..12).map(|k| Complex64::new(k as f64, 1.0)).collect();
        let reference = dense_exp(&h, 1.7, &psi);
        h.chebyshev_evolve(&mut psi, 1.7, 1);
        let err: f64 = psi
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "max error {err}");
    }

    #[test]
    fn chebyshev_step_count_does_not_matter() {
        let h = random_hermitian(40, 3);
        let psi: Vec<Complex64> = (0..40).map(|k| Complex64::new(1.0, k as f64 * 0.1)).collect();
        let mut a = psi.clone();
        let mut b = psi.clone();
        h.chebyshev_evolve(&mut a, 25.0, 1);
        h.chebyshev_evolve(&mut b, 25.0, 7);
        let err: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "max error {err}");
    }

    #[test]
    fn taylor_agrees_with_chebyshev_without_decay() {
        let h = random_hermitian(30, 11);
        let psi: Vec<Complex64> = (0..30).map(|k| Complex64::new((k as f64).cos(), 0.3)).collect();
        let gen = Generator::from_hamiltonian(&h, &vec![0.0; 30]);
        let total = 3.0;
        let steps = (total / gen.max_step()).ceil() as usize;
        let dt = total / steps as f64;
        let mut state = psi.clone();
        let mut out = Vec::new();
        for _ in 0..steps {
            gen.taylor_step(&state, dt, &mut out);
            std::mem::swap(&mut state, &mut out);
        }
        let mut cheb = psi;
        h.chebyshev_evolve(&mut cheb, total, 1);
        let err: f64 = state.iter().zip(&cheb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-11, "max error {err}");
    }

    #[test]
    fn diagonal_generator_is_exact() {
        let h = Tridiagonal {
            diag: vec![1.0, 2.0, 3.0],
            lower: vec![ZERO; 2],
        };
        let gen = Generator::from_hamiltonian(&h, &[0.0, 0.5, 1.0]);
        let psi = vec![Complex64::new(1.0, 0.0); 3];
        let mut out = Vec::new();
        gen.taylor_step(&psi, 2.0, &mut out);
        for k in 0..3 {
            let expected = Complex64::new(-(k as f64) * 0.5 * 2.0, -(k as f64 + 1.0) * 2.0).exp();
            assert!((out[k] - expected).norm() < 1e-14);
        }
    }
}
