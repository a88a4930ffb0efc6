//! Photon-number windows, state vectors and their observables.
//!
//! A state is stored as the amplitudes `c_n` over a contiguous window
//! `[n_min, n_max]` of the Fock lattice. Everything outside the window is
//! taken to be zero, so the window must always be wide enough to hold the
//! state; [`StateVector::boundary_mass`] measures how close a state is to the
//! edges.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};

/// Default tolerance on the probability held by the window edges.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Number of sites at each truncated edge that count as boundary.
pub const EDGE_BAND: usize = 4;

/// Smallest half-width used by [`default_window`] and by window growth.
pub const MIN_HALF_WIDTH: u64 = 64;

/// A contiguous range `[n_min, n_max]` of photon numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockWindow {
    n_min: u64,
    n_max: u64,
}

impl FockWindow {
    pub fn new(n_min: u64, n_max: u64) -> Result<Self> {
        if n_min > n_max {
            return Err(FockError::Domain(format!(
                "window lower edge {n_min} exceeds upper edge {n_max}"
            )));
        }
        Ok(Self { n_min, n_max })
    }

    #[inline]
    pub fn n_min(&self) -> u64 {
        self.n_min
    }

    #[inline]
    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    #[inline]
    pub fn contains(&self, n: u64) -> bool {
        (self.n_min..=self.n_max).contains(&n)
    }

    /// Index of photon number `n` in the amplitude vector.
    #[inline]
    pub fn index_of(&self, n: u64) -> Option<usize> {
        self.contains(n).then(|| (n - self.n_min) as usize)
    }

    /// Photon number stored at amplitude index `i`.
    #[inline]
    pub fn photon_number(&self, i: usize) -> u64 {
        self.n_min + i as u64
    }

    /// Photon numbers of the window, as floats, in storage order.
    pub fn photon_numbers(&self) -> impl Iterator<Item = f64> + '_ {
        (self.n_min..=self.n_max).map(|n| n as f64)
    }
}

impl fmt::Display for FockWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.n_min, self.n_max)
    }
}

/// Window `[max(0, center - half_width), center + half_width]`.
///
/// `half_width` of zero is promoted to one so the window is never a single
/// site by accident.
pub fn make_window(center: u64, half_width: u64) -> FockWindow {
    let half_width = half_width.max(1);
    FockWindow {
        n_min: center.saturating_sub(half_width),
        n_max: center + half_width,
    }
}

/// The default window for a state centered on `center` photons:
/// ten standard deviations of a Poisson distribution, at least 64 sites.
pub fn default_window(center: f64) -> FockWindow {
    let center = center.max(0.0);
    let half = (10.0 * center.sqrt()).ceil() as u64;
    make_window(center.round() as u64, half.max(MIN_HALF_WIDTH))
}

/// Complex amplitudes over a photon-number window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    window: FockWindow,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wraps raw amplitudes. The vector length must match the window.
    pub fn from_amplitudes(window: FockWindow, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != window.dimension() {
            return Err(FockError::Domain(format!(
                "{} amplitudes supplied for window {window} of dimension {}",
                amplitudes.len(),
                window.dimension()
            )));
        }
        Ok(Self { window, amplitudes })
    }

    pub(crate) fn from_parts_unchecked(window: FockWindow, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), window.dimension());
        Self { window, amplitudes }
    }

    #[inline]
    pub fn window(&self) -> FockWindow {
        self.window
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    #[inline]
    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// Amplitude `c_n`; zero outside the window.
    pub fn amplitude(&self, n: u64) -> Complex64 {
        self.window
            .index_of(n)
            .map_or(Complex64::new(0.0, 0.0), |i| self.amplitudes[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm and returns the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm();
        if norm > 0.0 {
            let inv = 1.0 / norm;
            self.amplitudes.iter_mut().for_each(|c| *c *= inv);
        }
        norm
    }

    /// `<self|other>`, taken over the overlap of the two windows.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        let lo = self.window.n_min.max(other.window.n_min);
        let hi = self.window.n_max.min(other.window.n_max);
        if lo > hi {
            return Complex64::new(0.0, 0.0);
        }
        (lo..=hi).map(|n| self.amplitude(n).conj() * other.amplitude(n)).sum()
    }

    /// Euclidean distance between two states, treating missing sites as zero.
    pub fn distance(&self, other: &StateVector) -> f64 {
        let lo = self.window.n_min.min(other.window.n_min);
        let hi = self.window.n_max.max(other.window.n_max);
        (lo..=hi)
            .map(|n| (self.amplitude(n) - other.amplitude(n)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Probability held by the truncated edges of the window.
    ///
    /// The vacuum edge at `n_min = 0` is a physical boundary and is not
    /// counted.
    pub fn boundary_mass(&self) -> f64 {
        let (lower, upper) = self.edge_masses();
        lower + upper
    }

    fn edge_masses(&self) -> (f64, f64) {
        let dim = self.amplitudes.len();
        let band = EDGE_BAND.min(dim);
        let upper = self.amplitudes[dim - band..].iter().map(|c| c.norm_sqr()).sum();
        let lower = if self.window.n_min == 0 {
            0.0
        } else {
            self.amplitudes[..band].iter().map(|c| c.norm_sqr()).sum()
        };
        (lower, upper)
    }

    /// Errors with [`FockError::TailLeak`] if the boundary mass exceeds `tol`.
    pub fn check_tail(&self, tol: f64) -> Result<()> {
        let mass = self.boundary_mass();
        if mass > tol {
            return Err(FockError::TailLeak {
                mass,
                tol,
                window: self.window,
            });
        }
        Ok(())
    }

    /// Copies the amplitudes into a larger window; new sites are zero.
    pub fn embed(&self, window: FockWindow) -> Result<StateVector> {
        if window.n_min > self.window.n_min || window.n_max < self.window.n_max {
            return Err(FockError::Domain(format!(
                "window {window} does not contain {}",
                self.window
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); window.dimension()];
        let offset = (self.window.n_min - window.n_min) as usize;
        amplitudes[offset..offset + self.amplitudes.len()].copy_from_slice(&self.amplitudes);
        Ok(StateVector { window, amplitudes })
    }

    /// Returns a copy over `window`, dropping whatever lies outside it.
    pub fn restrict(&self, window: FockWindow) -> StateVector {
        let amplitudes = (window.n_min..=window.n_max).map(|n| self.amplitude(n)).collect();
        StateVector { window, amplitudes }
    }
}

/// Coherent state `|alpha>` restricted to `window`.
///
/// Amplitudes are built with the log-domain recurrence
/// `log|c_{n+1}| = log|c_n| + log|alpha| - log(n+1)/2`, started at the mode
/// so rounding stays relative to the peak, and stays finite for photon
/// numbers far beyond where `n!` overflows. The truncated state is
/// renormalized; the captured Poisson mass must be at least `1 - 1e-12`.
pub fn coherent_state(alpha: Complex64, window: FockWindow) -> Result<StateVector> {
    let mean = alpha.norm_sqr();
    let dim = window.dimension();
    if mean == 0.0 {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        if window.n_min != 0 {
            return Err(FockError::TailLeak {
                mass: 1.0,
                tol: DEFAULT_TAIL_TOL,
                window,
            });
        }
        amplitudes[0] = Complex64::new(1.0, 0.0);
        return Ok(StateVector { window, amplitudes });
    }

    // log(c_n / c_mode) relative to the mode; terms below e^-100 in
    // probability are beyond double precision of the total mass.
    const NEGLIGIBLE: f64 = -50.0;
    let log_abs = mean.sqrt().ln();
    let mode = mean.floor() as u64;
    let step = |n: u64| log_abs - 0.5 * ((n + 1) as f64).ln();

    let mut below = Vec::new(); // log r for mode-1, mode-2, ...
    let mut log_r = 0.0;
    let mut n = mode;
    while n > 0 && (n > window.n_min || log_r > NEGLIGIBLE) {
        log_r -= step(n - 1);
        n -= 1;
        below.push(log_r);
    }
    let lowest = n;
    let mut above = Vec::new(); // log r for mode+1, mode+2, ...
    let mut log_r = 0.0;
    let mut n = mode;
    while n < window.n_max || log_r > NEGLIGIBLE {
        log_r += step(n);
        n += 1;
        above.push(log_r);
    }
    let log_rel: Vec<f64> = below
        .iter()
        .rev()
        .copied()
        .chain(std::iter::once(0.0))
        .chain(above)
        .collect();

    let total: f64 = log_rel.iter().map(|l| (2.0 * l).exp()).sum();
    let offset = (window.n_min - lowest) as usize;
    let in_window = &log_rel[offset..offset + dim];
    let captured: f64 = in_window.iter().map(|l| (2.0 * l).exp()).sum();
    let lost = (total - captured) / total;
    if lost > DEFAULT_TAIL_TOL {
        return Err(FockError::TailLeak {
            mass: lost,
            tol: DEFAULT_TAIL_TOL,
            window,
        });
    }

    let theta = alpha.arg();
    let amplitudes = in_window
        .iter()
        .zip(window.photon_numbers())
        .map(|(l, n)| Complex64::from_polar(l.exp(), (n * theta).rem_euclid(TAU)))
        .collect();
    let mut state = StateVector { window, amplitudes };
    let norm = state.normalize();
    log::debug!("coherent state |alpha|^2 = {mean}: lost tail {lost:.3e}, renormalized from {norm:.6e} on {window}");
    Ok(state)
}

/// Fock state `|n>` on `window`.
pub fn fock_state(n: u64, window: FockWindow) -> Result<StateVector> {
    let index = window.index_of(n).ok_or(FockError::OutOfWindow { n, window })?;
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); window.dimension()];
    amplitudes[index] = Complex64::new(1.0, 0.0);
    Ok(StateVector { window, amplitudes })
}

/// `|<n|psi>|^2`; zero when `n` lies outside the window.
pub fn fidelity(state: &StateVector, n: u64) -> f64 {
    state.amplitude(n).norm_sqr()
}

/// Widens the window when the boundary mass exceeds `tol`.
///
/// Each offending edge grows by a quarter of the current half-width (at
/// least 64 sites); the lower edge never goes below the vacuum. Amplitudes
/// are copied unchanged.
pub fn extend_window(state: &StateVector, tol: f64) -> StateVector {
    let (lower, upper) = state.edge_masses();
    if lower <= tol && upper <= tol {
        return state.clone();
    }
    let window = state.window;
    let half_width = (window.dimension() as u64) / 2;
    let grow = (half_width / 4).max(MIN_HALF_WIDTH);
    let n_min = if lower > tol {
        window.n_min.saturating_sub(grow)
    } else {
        window.n_min
    };
    let n_max = if upper > tol { window.n_max + grow } else { window.n_max };
    let wider = FockWindow { n_min, n_max };
    state.embed(wider).expect("grown window contains the original")
}

/// Photon-number distribution `P(n) = |c_n|^2` and derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatistics {
    pub n_min: u64,
    pub probabilities: Vec<f64>,
    pub cdf: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub peak_value: f64,
    pub peak_n: u64,
}

impl PhotonStatistics {
    pub fn probability(&self, n: u64) -> f64 {
        n.checked_sub(self.n_min)
            .and_then(|i| self.probabilities.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    /// Smallest photon number whose cumulative probability reaches `q`.
    pub fn quantile(&self, q: f64) -> u64 {
        let i = self.cdf.partition_point(|&c| c < q);
        self.n_min + i.min(self.cdf.len() - 1) as u64
    }

    /// Number of Fock states over which the CDF climbs from `lo` to `hi`.
    pub fn cdf_width(&self, lo: f64, hi: f64) -> u64 {
        self.quantile(hi) - self.quantile(lo)
    }
}

/// Distribution, CDF, mean, variance and peak of the stored amplitudes.
pub fn photon_statistics(state: &StateVector) -> PhotonStatistics {
    let window = state.window;
    let probabilities: Vec<f64> = state.amplitudes.iter().map(|c| c.norm_sqr()).collect();
    let mut running = 0.0;
    let cdf = probabilities
        .iter()
        .map(|p| {
            running += p;
            running
        })
        .collect();
    let total: f64 = probabilities.iter().sum();
    let mean = window
        .photon_numbers()
        .zip(&probabilities)
        .map(|(n, p)| n * p)
        .sum::<f64>()
        / total;
    let variance = window
        .photon_numbers()
        .zip(&probabilities)
        .map(|(n, p)| (n - mean).powi(2) * p)
        .sum::<f64>()
        / total;
    let (peak_index, peak_value) = probabilities.iter().copied().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, p)| {
            if p > best.1 {
                (i, p)
            } else {
                best
            }
        },
    );
    PhotonStatistics {
        n_min: window.n_min,
        probabilities,
        cdf,
        mean,
        variance,
        peak_value,
        peak_n: window.photon_number(peak_index),
    }
}
