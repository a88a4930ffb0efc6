//! The three physical primitives acting on a windowed state: the Kerr
//! quadratic phase, the displacement, and continuous evolution under the
//! drive + detuning + Kerr Hamiltonian
//!
//! ```text
//! H = -Delta n - chi n(n-1) + eps (a e^{i theta} + a^dag e^{-i theta})
//! ```
//!
//! The Kerr and detuning terms together are the parabola `-chi (n - n0)^2`
//! (up to a constant) with vertex `n0 = (chi - Delta) / (2 chi)`, so a phase
//! stage of duration `tau` imprints `+chi tau (n - n0)^2`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};
use crate::kernel::Tridiagonal;
use crate::state::{FockWindow, StateVector, DEFAULT_TAIL_TOL};

/// Default convergence tolerance of [`evolve_hamiltonian`].
pub const DEFAULT_EVOLVE_TOL: f64 = 1e-9;

/// Maximum number of step doublings tried by [`evolve_hamiltonian`].
const MAX_DOUBLINGS: u32 = 8;

/// How neighbouring Fock states are coupled by the drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hopping {
    /// Bosonic `sqrt(n+1)` matrix elements of `a^dag`.
    #[default]
    Bosonic,
    /// Every bond has unit strength, so the drive term is a uniform
    /// tight-binding lattice with hopping `eps`. Only meaningful as a
    /// lattice-optics reference.
    Uniform,
}

/// Parameters of the time-independent Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    /// Single-photon drive strength `eps_p`.
    pub drive_strength: f64,
    /// Drive phase `theta` in radians.
    pub drive_phase: f64,
    /// Detuning `Delta`.
    pub detuning: f64,
    /// Kerr coefficient `chi`.
    pub kerr: f64,
    #[serde(default)]
    pub hopping: Hopping,
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        Self {
            drive_strength: 1.0,
            drive_phase: 0.0,
            detuning: 0.0,
            kerr: 0.0,
            hopping: Hopping::Bosonic,
        }
    }
}

impl HamiltonianSpec {
    /// Resonant drive of strength `eps` and phase `theta`; Kerr off.
    pub fn drive(eps: f64, theta: f64) -> Self {
        Self {
            drive_strength: eps,
            drive_phase: theta,
            ..Self::default()
        }
    }

    /// Kerr stage whose parabola has its vertex at `center`; drive off.
    pub fn kerr_centered(chi: f64, center: f64) -> Self {
        Self {
            drive_strength: 0.0,
            drive_phase: 0.0,
            detuning: detuning_for_center(chi, center),
            kerr: chi,
            hopping: Hopping::Bosonic,
        }
    }

    /// Vertex `n0 = (chi - Delta) / (2 chi)` of the Kerr parabola, if any.
    pub fn focal_center(&self) -> Option<f64> {
        (self.kerr != 0.0).then(|| (self.kerr - self.detuning) / (2.0 * self.kerr))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.drive_strength, self.drive_phase, self.detuning, self.kerr]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(FockError::Domain("Hamiltonian parameters must be finite".into()));
        }
        if self.drive_strength < 0.0 {
            return Err(FockError::Domain("drive strength must be non-negative".into()));
        }
        if self.kerr < 0.0 {
            return Err(FockError::Domain("Kerr coefficient must be non-negative".into()));
        }
        Ok(())
    }

    /// Diagonal energy at photon number `n`, with the constant `chi n0^2`
    /// dropped when the Kerr term is on.
    pub fn diagonal_energy(&self, n: f64) -> f64 {
        match self.focal_center() {
            Some(n0) => -self.kerr * (n - n0) * (n - n0),
            None => -self.detuning * n,
        }
    }

    pub(crate) fn tridiagonal(&self, window: FockWindow) -> Tridiagonal {
        let diag = window.photon_numbers().map(|n| self.diagonal_energy(n)).collect();
        let bond = Complex64::from_polar(self.drive_strength, -self.drive_phase);
        let lower = (window.n_min()..window.n_max())
            .map(|n| match self.hopping {
                Hopping::Bosonic => bond * ((n + 1) as f64).sqrt(),
                Hopping::Uniform => bond,
            })
            .collect();
        Tridiagonal { diag, lower }
    }
}

/// Detuning that puts the Kerr parabola's vertex at `center`.
pub fn detuning_for_center(chi: f64, center: f64) -> f64 {
    chi * (1.0 - 2.0 * center)
}

/// Quadratic phase `phi0 (n - n0)^2 + linear (n - n0)` imprinted on `c_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPhase {
    pub phi0: f64,
    pub center: f64,
    #[serde(default)]
    pub linear_coeff: f64,
}

impl QuadraticPhase {
    pub fn new(phi0: f64, center: f64) -> Self {
        Self {
            phi0,
            center,
            linear_coeff: 0.0,
        }
    }

    /// Phase at site `n`, reduced to `[0, 2 pi)`.
    #[inline]
    pub fn phase_at(&self, n: f64) -> f64 {
        let x = n - self.center;
        (self.phi0 * x * x + self.linear_coeff * x).rem_euclid(TAU)
    }
}

/// `c_n <- c_n exp(+i [phi0 (n - n0)^2 + linear (n - n0)])`.
///
/// This is the state a Kerr stage of duration `phi0 / chi` produces (up to a
/// global phase) when its vertex sits at `n0`. `|c_n|` is untouched.
pub fn apply_quadratic_phase(state: &StateVector, phase: &QuadraticPhase) -> StateVector {
    let mut out = state.clone();
    apply_quadratic_phase_in_place(&mut out, phase);
    out
}

pub(crate) fn apply_quadratic_phase_in_place(state: &mut StateVector, phase: &QuadraticPhase) {
    if phase.phi0 == 0.0 && phase.linear_coeff == 0.0 {
        return;
    }
    let window = state.window();
    for (c, n) in state.amplitudes_mut().iter_mut().zip(window.photon_numbers()) {
        *c *= Complex64::from_polar(1.0, phase.phase_at(n));
    }
}

/// Tridiagonal Hermitian `H` with `exp(-iH) = D(beta)`, i.e.
/// `H = i (beta a^dag - beta^* a)`.
pub(crate) fn displacement_generator(window: FockWindow, beta: Complex64) -> Tridiagonal {
    let bond = Complex64::new(0.0, 1.0) * beta;
    Tridiagonal {
        diag: vec![0.0; window.dimension()],
        lower: (window.n_min()..window.n_max())
            .map(|n| bond * ((n + 1) as f64).sqrt())
            .collect(),
    }
}

/// Number of sites beyond which a hopping front of integrated strength
/// `x = 2 J t` carries less than ~1e-14 probability: `J_m(x)` falls off
/// like an Airy tail once `m > x`.
pub fn hopping_reach(x: f64) -> u64 {
    let x = x.abs();
    (x + 6.0 * x.cbrt() + 16.0).ceil() as u64
}

/// Smallest window holding `state` after hopping of integrated strength
/// `hop` (`eps * t` for a drive, `|beta|` for a displacement).
///
/// The occupied range is where the state carries all but `tol` of its
/// probability; it is padded on each side by [`hopping_reach`].
pub fn reach_window(state: &StateVector, hop: f64, hopping: Hopping, tol: f64) -> FockWindow {
    reach_window_and_pad(state, hop, hopping, tol).0
}

fn reach_window_and_pad(state: &StateVector, hop: f64, hopping: Hopping, tol: f64) -> (FockWindow, u64) {
    let window = state.window();
    let probabilities: Vec<f64> = state.amplitudes().iter().map(|c| c.norm_sqr()).collect();
    let mut tail = 0.0;
    let mut lo = 0;
    for (i, p) in probabilities.iter().enumerate() {
        tail += p;
        if tail > 0.5 * tol {
            lo = i;
            break;
        }
    }
    tail = 0.0;
    let mut hi = probabilities.len() - 1;
    for (i, p) in probabilities.iter().enumerate().rev() {
        tail += p;
        if tail > 0.5 * tol {
            hi = i;
            break;
        }
    }
    let (lo, hi) = (window.photon_number(lo), window.photon_number(hi.max(lo)));
    let mut reach = 0;
    for _ in 0..3 {
        let bond = match hopping {
            Hopping::Bosonic => ((hi + reach + 1) as f64).sqrt(),
            Hopping::Uniform => 1.0,
        };
        reach = hopping_reach(2.0 * hop * bond);
    }
    let needed = FockWindow::new(lo.saturating_sub(reach), hi + reach).expect("ordered edges");
    (needed, reach)
}

/// Errors with [`FockError::TailLeak`] unless the window already contains
/// [`reach_window`].
pub(crate) fn ensure_reach(state: &StateVector, hop: f64, hopping: Hopping) -> Result<()> {
    let window = state.window();
    let (needed, reach) = reach_window_and_pad(state, hop, hopping, DEFAULT_TAIL_TOL);
    let lower_ok = window.n_min() == 0 || needed.n_min() >= window.n_min();
    if lower_ok && needed.n_max() <= window.n_max() {
        return Ok(());
    }
    let mass = window
        .photon_numbers()
        .zip(state.amplitudes())
        .filter(|(n, _)| {
            let n = *n as u64;
            n + reach > window.n_max() || (window.n_min() > 0 && n < window.n_min() + reach)
        })
        .map(|(_, c)| c.norm_sqr())
        .sum();
    Err(FockError::TailLeak {
        mass,
        tol: DEFAULT_TAIL_TOL,
        window,
    })
}

/// Applies `D(beta) = exp(beta a^dag - beta^* a)`.
///
/// Errors with [`FockError::TailLeak`] when the window is too narrow for the
/// state to spread by `|beta|` (see [`reach_window`]) or when the result
/// touches the window edges.
pub fn displace(state: &StateVector, beta: Complex64) -> Result<StateVector> {
    ensure_reach(state, beta.norm(), Hopping::Bosonic)?;
    let out = displace_unchecked(state, beta);
    out.check_tail(DEFAULT_TAIL_TOL)?;
    Ok(out)
}

/// [`displace`] without the boundary check.
pub(crate) fn displace_unchecked(state: &StateVector, beta: Complex64) -> StateVector {
    if beta == Complex64::new(0.0, 0.0) {
        return state.clone();
    }
    let generator = displacement_generator(state.window(), beta);
    let mut amplitudes = state.amplitudes().to_vec();
    let steps = generator.chebyshev_steps(1.0);
    generator.chebyshev_evolve(&mut amplitudes, 1.0, steps);
    StateVector::from_parts_unchecked(state.window(), amplitudes)
}

/// Applies `exp(-i H duration)` to `state`.
///
/// The Chebyshev step count starts at the kernel's default and is doubled
/// until two successive results agree to `tol` in vector norm. With the
/// drive off the evolution is diagonal and applied exactly.
pub fn evolve_hamiltonian(state: &StateVector, h: &HamiltonianSpec, duration: f64, tol: f64) -> Result<StateVector> {
    h.validate()?;
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(FockError::Domain(format!("duration {duration} must be >= 0")));
    }
    if !(tol > 0.0) {
        return Err(FockError::Domain(format!("tolerance {tol} must be > 0")));
    }
    if duration == 0.0 {
        return Ok(state.clone());
    }
    let window = state.window();
    if h.drive_strength == 0.0 {
        let mut out = state.clone();
        for (c, n) in out.amplitudes_mut().iter_mut().zip(window.photon_numbers()) {
            let angle = (-h.diagonal_energy(n) * duration).rem_euclid(TAU);
            *c *= Complex64::from_polar(1.0, angle);
        }
        return Ok(out);
    }

    ensure_reach(state, h.drive_strength * duration, h.hopping)?;
    let generator = h.tridiagonal(window);
    let mut steps = generator.chebyshev_steps(duration);
    let run = |steps: usize| {
        let mut amplitudes = state.amplitudes().to_vec();
        generator.chebyshev_evolve(&mut amplitudes, duration, steps);
        StateVector::from_parts_unchecked(window, amplitudes)
    };
    let mut coarse = run(steps);
    for _ in 0..MAX_DOUBLINGS {
        steps *= 2;
        let fine = run(steps);
        if coarse.distance(&fine) < tol {
            fine.check_tail(DEFAULT_TAIL_TOL)?;
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(FockError::NoConvergence(format!(
        "step halving did not reach {tol:e} after {MAX_DOUBLINGS} doublings"
    )))
}
