//! Single-photon loss: Monte-Carlo wave-function trajectories for the
//! physical (timed) lens protocol, ensemble averages, and a dense Lindblad
//! integrator for small windows.
//!
//! Loss at rate `kappa` follows
//!
//! ```text
//! d rho/dt = -i [H, rho] + kappa (a rho a^dag - {n, rho} / 2)
//! ```
//!
//! Trajectories drift under `G = -iH - kappa n / 2` until the squared norm
//! falls below a uniform random threshold, then apply `a` and renormalize.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};
use crate::kernel::Generator;
use crate::lens::{apply_stage, drive_phase_for, widen_for, LensParams, ProtocolSchedule, Stage, WindowPolicy};
use crate::propagate::HamiltonianSpec;
use crate::state::{fidelity, FockWindow, StateVector};

/// Lenses realized as timed stages: each phase runs a centered Kerr
/// interaction of strength `kerr` for `phi0 / kerr`, each displacement a
/// resonant drive of strength `drive_strength` for `|beta| / drive_strength`.
pub fn physical_schedule(
    alpha: Complex64,
    target: u64,
    lenses: &[LensParams],
    kerr: f64,
    drive_strength: f64,
) -> Result<ProtocolSchedule> {
    if !(kerr > 0.0 && drive_strength > 0.0) {
        return Err(FockError::Domain("physical lenses need chi > 0 and eps > 0".into()));
    }
    let mut stages = Vec::with_capacity(2 * lenses.len());
    for lens in lenses {
        lens.validate()?;
        if lens.phi0 < 0.0 {
            return Err(FockError::Domain(format!(
                "a Kerr stage with chi > 0 cannot imprint phi0 = {} < 0",
                lens.phi0
            )));
        }
        stages.push(Stage::Evolution {
            hamiltonian: HamiltonianSpec::kerr_centered(kerr, lens.center),
            duration: lens.phi0 / kerr,
        });
        stages.push(Stage::Evolution {
            hamiltonian: HamiltonianSpec::drive(drive_strength, drive_phase_for(lens.beta)),
            duration: lens.beta.norm() / drive_strength,
        });
    }
    Ok(ProtocolSchedule { alpha, stages, target })
}

/// Settings shared by every trajectory of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub kappa: f64,
    pub trajectories: usize,
    pub base_seed: u64,
    /// Times at which the mean photon number is recorded.
    pub snapshot_times: Vec<f64>,
    pub schedule: ProtocolSchedule,
    pub window: WindowPolicy,
    /// Jump times are located to this absolute accuracy.
    pub time_tol: f64,
    /// Cap on jumps per trajectory; `None` allows `10 kappa N T` (at least 10).
    pub max_jumps: Option<usize>,
}

impl EnsembleConfig {
    pub fn new(schedule: ProtocolSchedule, kappa: f64, trajectories: usize, base_seed: u64) -> Self {
        Self {
            kappa,
            trajectories,
            base_seed,
            snapshot_times: Vec::new(),
            schedule,
            window: WindowPolicy::default(),
            time_tol: 1e-9,
            max_jumps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(FockError::Domain(format!("loss rate {} must be >= 0", self.kappa)));
        }
        if self.trajectories == 0 {
            return Err(FockError::Domain("need at least one trajectory".into()));
        }
        if !(self.time_tol > 0.0) {
            return Err(FockError::Domain("time tolerance must be positive".into()));
        }
        self.schedule.validate()?;
        let total = self.schedule.total_duration();
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0])
            || self
                .snapshot_times
                .iter()
                .any(|&t| !(t >= 0.0) || t > total * (1.0 + 1e-12))
        {
            return Err(FockError::Domain(format!(
                "snapshot times must be ascending within [0, {total}]"
            )));
        }
        Ok(())
    }
}

/// One stochastic unraveling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Final state, normalized.
    pub state: StateVector,
    pub jump_times: Vec<f64>,
    /// `<n>` at each requested snapshot time.
    pub mean_photon_number: Vec<f64>,
}

struct Unraveling<'a> {
    kappa: f64,
    time_tol: f64,
    rng: ChaCha8Rng,
    /// Jump when the squared norm drops below this.
    threshold: f64,
    jump_times: Vec<f64>,
    jump_bound: usize,
    window: &'a WindowPolicy,
}

impl Unraveling<'_> {
    fn draw(&mut self) {
        // in (0, 1]
        self.threshold = 1.0 - self.rng.random::<f64>();
    }

    fn jump(&mut self, state: &mut StateVector, time: f64) -> Result<()> {
        self.jump_times.push(time);
        if self.jump_times.len() > self.jump_bound {
            return Err(FockError::JumpOverflow {
                jumps: self.jump_times.len(),
                bound: self.jump_bound,
            });
        }
        lower(state);
        if state.normalize() == 0.0 {
            return Err(FockError::Domain("jump from the vacuum".into()));
        }
        self.draw();
        Ok(())
    }

    /// Runs `stage` (an evolution stage) for `duration` starting at `start`.
    fn evolve(
        &mut self,
        mut state: StateVector,
        hamiltonian: &HamiltonianSpec,
        start: f64,
        duration: f64,
    ) -> Result<StateVector> {
        state = widen_for(
            state,
            hamiltonian.drive_strength * duration,
            hamiltonian.hopping,
            self.window,
        );
        let window = state.window();
        let h = hamiltonian.tridiagonal(window);
        let decay: Vec<f64> = window.photon_numbers().map(|n| 0.5 * self.kappa * n).collect();
        let generator = Generator::from_hamiltonian(&h, &decay);
        let end = start + duration;
        let mut now = start;
        let mut scratch = Vec::with_capacity(window.dimension());

        if !h.has_coupling() {
            // exact: the drift is diagonal, so jump times follow from the
            // closed-form norm
            while now < end {
                let norm_at = |dt: f64, out: &mut Vec<Complex64>| {
                    generator.taylor_step(state.amplitudes(), dt, out);
                    out.iter().map(|c| c.norm_sqr()).sum::<f64>()
                };
                if norm_at(end - now, &mut scratch) >= self.threshold {
                    state = StateVector::from_parts_unchecked(window, scratch);
                    break;
                }
                let dt = bisect(0.0, end - now, self.time_tol, |dt| {
                    norm_at(dt, &mut scratch) >= self.threshold
                });
                norm_at(dt, &mut scratch);
                state = StateVector::from_parts_unchecked(window, std::mem::take(&mut scratch));
                now += dt;
                self.jump(&mut state, now)?;
            }
            return Ok(state);
        }

        let max_step = generator.max_step();
        while now < end {
            let h_step = max_step.min(end - now);
            generator.taylor_step(state.amplitudes(), h_step, &mut scratch);
            let norm: f64 = scratch.iter().map(|c| c.norm_sqr()).sum();
            if norm >= self.threshold {
                state = StateVector::from_parts_unchecked(window, std::mem::take(&mut scratch));
                now += h_step;
                continue;
            }
            let dt = bisect(0.0, h_step, self.time_tol, |dt| {
                generator.taylor_step(state.amplitudes(), dt, &mut scratch);
                scratch.iter().map(|c| c.norm_sqr()).sum::<f64>() >= self.threshold
            });
            generator.taylor_step(state.amplitudes(), dt, &mut scratch);
            state = StateVector::from_parts_unchecked(window, std::mem::take(&mut scratch));
            now += dt;
            self.jump(&mut state, now)?;
        }
        let tail = state.boundary_mass() / state.norm_sqr();
        if tail > self.window.tail_tol {
            return Err(FockError::TailLeak {
                mass: tail,
                tol: self.window.tail_tol,
                window,
            });
        }
        Ok(state)
    }
}

/// Largest `t` in `[lo, hi]` (to within `tol`) with `still(t)` true, given
/// `still(lo)` and `!still(hi)`.
fn bisect(mut lo: f64, mut hi: f64, tol: f64, mut still: impl FnMut(f64) -> bool) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if still(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `psi <- a psi` on the same window; weight on the lowest site leaves the
/// window (it is below the tail tolerance unless the window starts at 0,
/// where `a|0> = 0`).
fn lower(state: &mut StateVector) {
    let n_min = state.window().n_min();
    let amps = state.amplitudes_mut();
    let dim = amps.len();
    for i in 0..dim {
        amps[i] = if i + 1 < dim {
            amps[i + 1] * ((n_min + i as u64 + 1) as f64).sqrt()
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
}

fn mean_photon_number(state: &StateVector) -> f64 {
    let (weighted, total) = state
        .amplitudes()
        .iter()
        .zip(state.window().photon_numbers())
        .fold((0.0, 0.0), |(w, t), (c, n)| (w + n * c.norm_sqr(), t + c.norm_sqr()));
    weighted / total
}

/// One trajectory of `schedule` from `initial` (which need not be the
/// schedule's coherent state). With `kappa = 0` this is exactly the closed
/// evolution.
pub fn trajectory_evolve(
    initial: &StateVector,
    schedule: &ProtocolSchedule,
    kappa: f64,
    seed: u64,
) -> Result<StateVector> {
    let mut config = EnsembleConfig::new(schedule.clone(), kappa, 1, seed);
    config.validate()?;
    config.snapshot_times.clear();
    Ok(run_trajectory(initial, &config, seed)?.state)
}

/// One trajectory with full bookkeeping.
pub fn run_trajectory(initial: &StateVector, config: &EnsembleConfig, seed: u64) -> Result<Trajectory> {
    let schedule = &config.schedule;
    let total = schedule.total_duration();
    let scale = initial
        .window()
        .photon_numbers()
        .zip(initial.amplitudes())
        .map(|(n, c)| n * c.norm_sqr())
        .sum::<f64>()
        .max(schedule.target as f64);
    let mut run = Unraveling {
        kappa: config.kappa,
        time_tol: config.time_tol,
        rng: ChaCha8Rng::seed_from_u64(seed),
        threshold: 1.0,
        jump_times: Vec::new(),
        jump_bound: config
            .max_jumps
            .unwrap_or_else(|| (10.0 * config.kappa * scale * total).ceil().max(10.0) as usize),
        window: &config.window,
    };
    run.draw();

    let mut state = initial.clone();
    if config.kappa > 0.0 {
        state.normalize();
    }
    let mut snapshots = Vec::with_capacity(config.snapshot_times.len());
    let mut pending = config.snapshot_times.iter().copied().peekable();
    let mut now = 0.0;
    let record = |state: &StateVector, out: &mut Vec<f64>| out.push(mean_photon_number(state));

    for stage in &schedule.stages {
        while pending.next_if(|&t| t <= now).is_some() {
            record(&state, &mut snapshots);
        }
        let (hamiltonian, duration) = match stage {
            Stage::Evolution { hamiltonian, duration } if config.kappa > 0.0 => (hamiltonian, *duration),
            // closed evolution, or instantaneous stages that loss cannot act on
            _ => {
                let end = now + stage.duration();
                while let Some(t) = pending.next_if(|&t| t <= end) {
                    let partial = with_duration(stage, t - now);
                    record(&apply_stage(state.clone(), &partial, &config.window)?, &mut snapshots);
                }
                state = apply_stage(state, stage, &config.window)?;
                now = end;
                continue;
            }
        };
        let end = now + duration;
        let mut reached = now;
        while let Some(t) = pending.next_if(|&t| t <= end) {
            if t > reached {
                state = run.evolve(state, hamiltonian, reached, t - reached)?;
                reached = t;
            }
            record(&state, &mut snapshots);
        }
        if end > reached {
            state = run.evolve(state, hamiltonian, reached, end - reached)?;
        }
        now = end;
    }
    for _ in pending {
        record(&state, &mut snapshots);
    }
    if config.kappa > 0.0 {
        state.normalize();
    }
    Ok(Trajectory {
        state,
        jump_times: run.jump_times,
        mean_photon_number: snapshots,
    })
}

fn with_duration(stage: &Stage, duration: f64) -> Stage {
    match *stage {
        Stage::Evolution { hamiltonian, .. } => Stage::Evolution { hamiltonian, duration },
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub mean_fidelity: f64,
    pub standard_error: f64,
    pub snapshot_times: Vec<f64>,
    /// Ensemble-averaged `<n>` at each snapshot time.
    pub mean_photon_number: Vec<f64>,
    /// Standard error of each `<n>` entry.
    pub photon_number_error: Vec<f64>,
    /// `jump_histogram[k]` trajectories saw exactly `k` jumps.
    pub jump_histogram: Vec<u64>,
    pub trajectories: usize,
}

/// Averages `|<N|psi>|^2` over trajectories started from the schedule's
/// coherent state (prepared without loss).
pub fn ensemble_average(config: &EnsembleConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let initial = config.window.initial_state(config.schedule.alpha)?;
    ensemble_average_from(&initial, config)
}

/// Trajectory `i` uses seed `base_seed + i`; results are combined in index
/// order, so they do not depend on how trajectories are scheduled.
pub fn ensemble_average_from(initial: &StateVector, config: &EnsembleConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let target = config.schedule.target;
    let runs: Vec<(f64, usize, Vec<f64>)> = (0..config.trajectories)
        .into_par_iter()
        .map(|i| {
            let t = run_trajectory(initial, config, config.base_seed.wrapping_add(i as u64))?;
            Ok((fidelity(&t.state, target), t.jump_times.len(), t.mean_photon_number))
        })
        .collect::<Result<_>>()?;

    let (mean_fidelity, standard_error) = mean_and_error(runs.iter().map(|r| r.0));
    let (mean_photon_number, photon_number_error) = (0..config.snapshot_times.len())
        .map(|k| mean_and_error(runs.iter().map(|r| r.2[k])))
        .unzip();
    let max_jumps = runs.iter().map(|r| r.1).max().unwrap_or(0);
    let mut jump_histogram = vec![0; max_jumps + 1];
    for r in &runs {
        jump_histogram[r.1] += 1;
    }
    Ok(EnsembleResult {
        mean_fidelity,
        standard_error,
        snapshot_times: config.snapshot_times.clone(),
        mean_photon_number,
        photon_number_error,
        jump_histogram,
        trajectories: config.trajectories,
    })
}

/// Sample mean and its standard error, summed in iteration order.
fn mean_and_error(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let count = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / count;
    if count < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    (mean, (var / count).sqrt())
}

/// Largest window accepted by the dense integrator.
pub const DENSE_MAX_DIMENSION: usize = 64;

/// Density matrix on `window`, as returned by [`dense_lindblad_evolve`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub window: FockWindow,
    pub rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn pure(state: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self {
            window: state.window(),
            rho: &v * v.adjoint(),
        }
    }

    pub fn population(&self, n: u64) -> f64 {
        self.window.index_of(n).map_or(0.0, |i| self.rho[(i, i)].re)
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.window
            .photon_numbers()
            .enumerate()
            .map(|(i, n)| n * self.rho[(i, i)].re)
            .sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let hermitian = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        nalgebra::SymmetricEigen::new(hermitian)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

const RK4_MAX_DOUBLINGS: u32 = 14;
const RK4_TOL: f64 = 1e-10;

/// Integrates the Lindblad equation through the evolution stages of
/// `schedule` starting from `initial`. The window must start at the vacuum
/// and have at most [`DENSE_MAX_DIMENSION`] sites.
///
/// Each stage uses classic RK4, doubling the step count until two
/// successive results differ by less than `1e-10` (max-norm); trace and
/// positivity are checked at the end.
pub fn dense_lindblad_evolve(initial: &StateVector, schedule: &ProtocolSchedule, kappa: f64) -> Result<DensityMatrix> {
    let window = initial.window();
    let dim = window.dimension();
    if dim > DENSE_MAX_DIMENSION || window.n_min() != 0 {
        return Err(FockError::Domain(format!(
            "dense integration needs a window [0, n] with at most {DENSE_MAX_DIMENSION} sites, got {window}"
        )));
    }
    if !(kappa >= 0.0) {
        return Err(FockError::Domain("loss rate must be >= 0".into()));
    }
    schedule.validate()?;
    let mut state = initial.clone();
    state.normalize();
    let pure = DensityMatrix::pure(&state).rho;
    // row-major working copy
    let mut rho: Vec<Complex64> = (0..dim * dim).map(|k| pure[(k / dim, k % dim)]).collect();
    let sqrt_n: Vec<f64> = (0..=dim).map(|n| (n as f64).sqrt()).collect();

    for stage in &schedule.stages {
        let Stage::Evolution { hamiltonian, duration } = stage else {
            return Err(FockError::Domain(
                "dense integration takes evolution stages only".into(),
            ));
        };
        if *duration == 0.0 {
            continue;
        }
        let tri = hamiltonian.tridiagonal(window);
        let (d, lo) = (&tri.diag, &tri.lower);
        let i_unit = Complex64::new(0.0, 1.0);
        // L(rho) using the tridiagonal H, a and n directly
        let lindblad = |r: &[Complex64], out: &mut [Complex64]| {
            for i in 0..dim {
                for j in 0..dim {
                    let at = |p: usize, q: usize| r[p * dim + q];
                    let mut h_rho = d[i] * at(i, j);
                    let mut rho_h = at(i, j) * d[j];
                    if i > 0 {
                        h_rho += lo[i - 1] * at(i - 1, j);
                    }
                    if i + 1 < dim {
                        h_rho += lo[i].conj() * at(i + 1, j);
                    }
                    if j > 0 {
                        rho_h += at(i, j - 1) * lo[j - 1].conj();
                    }
                    if j + 1 < dim {
                        rho_h += at(i, j + 1) * lo[j];
                    }
                    let mut value = -i_unit * (h_rho - rho_h) - 0.5 * kappa * (i + j) as f64 * at(i, j);
                    if i + 1 < dim && j + 1 < dim {
                        value += kappa * sqrt_n[i + 1] * sqrt_n[j + 1] * at(i + 1, j + 1);
                    }
                    out[i * dim + j] = value;
                }
            }
        };
        let rk4 = |start: &[Complex64], steps: usize| -> Vec<Complex64> {
            let dt = duration / steps as f64;
            let mut r = start.to_vec();
            let (mut k1, mut k2, mut k3, mut k4) = (r.clone(), r.clone(), r.clone(), r.clone());
            let mut tmp = r.clone();
            for _ in 0..steps {
                lindblad(&r, &mut k1);
                tmp.iter_mut()
                    .zip(&r)
                    .zip(&k1)
                    .for_each(|((t, r), k)| *t = r + k * (0.5 * dt));
                lindblad(&tmp, &mut k2);
                tmp.iter_mut()
                    .zip(&r)
                    .zip(&k2)
                    .for_each(|((t, r), k)| *t = r + k * (0.5 * dt));
                lindblad(&tmp, &mut k3);
                tmp.iter_mut().zip(&r).zip(&k3).for_each(|((t, r), k)| *t = r + k * dt);
                lindblad(&tmp, &mut k4);
                for (idx, v) in r.iter_mut().enumerate() {
                    *v += (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]) * (dt / 6.0);
                }
            }
            r
        };
        let spread = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let coupling = lo.iter().fold(0.0f64, |m, l| m.max(l.norm()));
        let rate = 2.0 * (spread + 2.0 * coupling) + kappa * dim as f64;
        let mut steps = ((duration * rate / 0.5).ceil() as usize).max(4);
        let mut previous = rk4(&rho, steps);
        let mut converged = false;
        for _ in 0..RK4_MAX_DOUBLINGS {
            steps *= 2;
            let next = rk4(&rho, steps);
            let change = next
                .iter()
                .zip(&previous)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            previous = next;
            if change < RK4_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(FockError::NoConvergence(format!(
                "Lindblad RK4 did not converge in {steps} steps"
            )));
        }
        rho = previous;
    }
    let rho = DMatrix::from_row_slice(dim, dim, &rho);

    let result = DensityMatrix { window, rho };
    let trace = result.trace();
    if (trace - 1.0).abs() > 1e-8 {
        return Err(FockError::NoConvergence(format!("trace drifted to {trace}")));
    }
    let min_eig = result.min_eigenvalue();
    if min_eig < -1e-8 {
        return Err(FockError::NoConvergence(format!("density matrix eigenvalue {min_eig}")));
    }
    Ok(result)
}

/// `<N|rho|N>` after [`dense_lindblad_evolve`].
pub fn dense_lindblad_oracle(initial: &StateVector, schedule: &ProtocolSchedule, kappa: f64) -> Result<f64> {
    Ok(dense_lindblad_evolve(initial, schedule, kappa)?.population(schedule.target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lens::run_lens_group;
    use crate::state::{coherent_state, fock_state, make_window};
    use approx::assert_relative_eq;

    fn idle(duration: f64) -> Stage {
        Stage::Evolution {
            hamiltonian: HamiltonianSpec {
                drive_strength: 0.0,
                ..HamiltonianSpec::default()
            },
            duration,
        }
    }

    fn small_schedule() -> ProtocolSchedule {
        let lens = LensParams::new(0.15, 4.0, Complex64::new(0.0, -0.35));
        physical_schedule(Complex64::new(2.0, 0.0), 4, &[lens], 1.0, 1.0).unwrap()
    }

    #[test]
    fn physical_schedule_durations() {
        let lens = LensParams::new(2e-3, 100.0, Complex64::from_polar(0.8, 0.4));
        let s = physical_schedule(Complex64::new(10.0, 0.0), 100, &[lens], 4e-3, 2.0).unwrap();
        assert_relative_eq!(s.stages[0].duration(), 0.5);
        assert_relative_eq!(s.stages[1].duration(), 0.4);
        let negative = LensParams::new(-1e-3, 100.0, Complex64::new(0.0, 1.0));
        assert!(physical_schedule(Complex64::new(10.0, 0.0), 100, &[negative], 4e-3, 1.0).is_err());
    }

    #[test]
    fn physical_schedule_matches_ideal_lens() {
        let lens = LensParams::new(3e-3, 900.0, Complex64::from_polar(1.5, -1.4));
        let alpha = Complex64::new(30.0, 0.0);
        let ideal = run_lens_group(
            &ProtocolSchedule::from_lenses(alpha, 900, &[lens]),
            &WindowPolicy::default(),
        )
        .unwrap();
        let timed = run_lens_group(
            &physical_schedule(alpha, 900, &[lens], 5e-3, 1.0).unwrap(),
            &WindowPolicy::default(),
        )
        .unwrap();
        // equal up to a global phase
        assert_relative_eq!(ideal.state.inner(&timed.state).norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn lossless_trajectory_is_closed_evolution() {
        let schedule = small_schedule();
        let initial = WindowPolicy::default().initial_state(schedule.alpha).unwrap();
        let closed = run_lens_group(&schedule, &WindowPolicy::default()).unwrap();
        let traj = trajectory_evolve(&initial, &schedule, 0.0, 7).unwrap();
        assert_eq!(traj, closed.state);
    }

    #[test]
    fn jumps_lower_fock_states_by_one() {
        let n = 40;
        let initial = fock_state(n, make_window(0, 60)).unwrap();
        let schedule = ProtocolSchedule {
            alpha: Complex64::new(0.0, 0.0),
            stages: vec![idle(0.05)],
            target: n,
        };
        let config = EnsembleConfig::new(schedule, 0.5, 1, 3);
        let t = run_trajectory(&initial, &config, 3).unwrap();
        assert!(!t.jump_times.is_empty());
        let k = t.jump_times.len() as u64;
        assert_relative_eq!(fidelity(&t.state, n - k), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let schedule = small_schedule();
        let initial = coherent_state(schedule.alpha, make_window(0, 29)).unwrap();
        let a = trajectory_evolve(&initial, &schedule, 0.3, 11).unwrap();
        let b = trajectory_evolve(&initial, &schedule, 0.3, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jump_overflow_is_reported() {
        let initial = fock_state(50, make_window(0, 60)).unwrap();
        let schedule = ProtocolSchedule {
            alpha: Complex64::new(0.0, 0.0),
            stages: vec![idle(0.1)],
            target: 50,
        };
        let mut config = EnsembleConfig::new(schedule, 1.0, 1, 1);
        config.max_jumps = Some(2);
        let err = run_trajectory(&initial, &config, 1).unwrap_err();
        assert!(matches!(err, FockError::JumpOverflow { .. }));
    }

    #[test]
    fn dense_pure_decay() {
        let initial = fock_state(6, make_window(0, 9)).unwrap();
        let kappa = 0.7;
        for t in [0.1, 0.5, 1.3] {
            let schedule = ProtocolSchedule {
                alpha: Complex64::new(0.0, 0.0),
                stages: vec![idle(t)],
                target: 6,
            };
            let rho = dense_lindblad_evolve(&initial, &schedule, kappa).unwrap();
            assert_relative_eq!(rho.mean_photon_number(), 6.0 * (-kappa * t).exp(), epsilon = 1e-6);
        }
    }

    #[test]
    fn dense_lossless_matches_closed() {
        let schedule = small_schedule();
        let initial = coherent_state(schedule.alpha, make_window(0, 63)).unwrap();
        let policy = WindowPolicy {
            half_width: Some(59),
            auto_extend: false,
            ..Default::default()
        };
        let closed = run_lens_group(&schedule, &policy).unwrap();
        let oracle = dense_lindblad_oracle(&initial, &schedule, 0.0).unwrap();
        assert_relative_eq!(oracle, closed.fidelity, epsilon = 1e-8);
    }

    #[test]
    fn dense_rejects_large_windows() {
        let initial = coherent_state(Complex64::new(3.0, 0.0), make_window(0, 80)).unwrap();
        assert!(dense_lindblad_oracle(&initial, &small_schedule(), 0.1).is_err());
    }
}
