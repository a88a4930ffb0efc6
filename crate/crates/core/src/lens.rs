//! Lens schedules: quadratic phase followed by a drive (or an exact
//! displacement), composed into lens groups, plus the time-resolved and
//! focus-map experiments built on them.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};
use crate::propagate::{
    apply_quadratic_phase_in_place, displace, evolve_hamiltonian, reach_window, HamiltonianSpec, Hopping,
    QuadraticPhase, DEFAULT_EVOLVE_TOL,
};
use crate::state::{
    coherent_state, default_window, fidelity, make_window, photon_statistics, FockWindow, PhotonStatistics,
    StateVector, DEFAULT_TAIL_TOL, MIN_HALF_WIDTH,
};

/// Drive duration that brings a lens of curvature `phi0` to focus:
/// `tau = 1 / (4 sqrt(n0) eps phi0)`.
pub fn focal_drive_time(n0: f64, drive_strength: f64, phi0: f64) -> Result<f64> {
    if !(n0 > 0.0 && drive_strength > 0.0 && phi0 > 0.0) {
        return Err(FockError::Domain(format!(
            "focal time needs positive n0, eps, phi0 (got {n0}, {drive_strength}, {phi0})"
        )));
    }
    Ok(1.0 / (4.0 * n0.sqrt() * drive_strength * phi0))
}

/// A continuously simulated drive standing in for a lens displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveRealization {
    pub drive_strength: f64,
    #[serde(default)]
    pub detuning: f64,
    pub duration: f64,
}

/// One lens: phase `phi0 (n - center)^2`, then displacement `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensParams {
    pub phi0: f64,
    pub center: f64,
    pub beta: Complex64,
    #[serde(default)]
    pub drive: Option<DriveRealization>,
}

impl LensParams {
    pub fn new(phi0: f64, center: f64, beta: Complex64) -> Self {
        Self {
            phi0,
            center,
            beta,
            drive: None,
        }
    }

    /// A lens that does nothing.
    pub fn identity(center: f64) -> Self {
        Self::new(0.0, center, Complex64::new(0.0, 0.0))
    }

    /// Replaces the exact displacement with a drive of strength `eps` and
    /// duration `|beta| / eps`, phased so that with zero detuning it
    /// produces the same displacement.
    pub fn with_drive(mut self, drive_strength: f64, detuning: f64) -> Self {
        self.drive = Some(DriveRealization {
            drive_strength,
            detuning,
            duration: self.beta.norm() / drive_strength,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi0.is_finite() && self.center.is_finite()) {
            return Err(FockError::Domain("lens phase must be finite".into()));
        }
        if !(self.beta.re.is_finite() && self.beta.im.is_finite()) {
            return Err(FockError::Domain("lens displacement must be finite".into()));
        }
        if let Some(drive) = self.drive {
            if !(drive.drive_strength > 0.0 && drive.duration >= 0.0) {
                return Err(FockError::Domain("drive realization needs eps > 0, tau >= 0".into()));
            }
            let implied = drive.drive_strength * drive.duration;
            if (implied - self.beta.norm()).abs() > 1e-9 * (1.0 + implied) {
                return Err(FockError::Domain(format!(
                    "drive eps*tau = {implied} disagrees with |beta| = {}",
                    self.beta.norm()
                )));
            }
        }
        Ok(())
    }

    /// The two stages this lens contributes to a schedule.
    pub fn stages(&self) -> [Stage; 2] {
        let phase = Stage::Phase(QuadraticPhase::new(self.phi0, self.center));
        let drive = match self.drive {
            None => Stage::Displacement(self.beta),
            Some(d) => Stage::Evolution {
                hamiltonian: HamiltonianSpec {
                    drive_strength: d.drive_strength,
                    drive_phase: drive_phase_for(self.beta),
                    detuning: d.detuning,
                    kerr: 0.0,
                    hopping: Hopping::Bosonic,
                },
                duration: d.duration,
            },
        };
        [phase, drive]
    }
}

/// Drive phase `theta` for which `exp(-i eps t (a e^{i theta} + h.c.))`
/// displaces along `beta`.
pub fn drive_phase_for(beta: Complex64) -> f64 {
    if beta.norm() == 0.0 {
        0.0
    } else {
        -(beta.arg() + std::f64::consts::FRAC_PI_2)
    }
}

/// One step of a protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stage {
    /// Instantaneous quadratic phase.
    Phase(QuadraticPhase),
    /// Instantaneous exact displacement.
    Displacement(Complex64),
    /// Evolution under a fixed Hamiltonian for `duration`.
    Evolution {
        hamiltonian: HamiltonianSpec,
        duration: f64,
    },
}

impl Stage {
    pub fn duration(&self) -> f64 {
        match self {
            Stage::Evolution { duration, .. } => *duration,
            _ => 0.0,
        }
    }
}

/// A full preparation run: coherent input, ordered stages, target `|N>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    pub alpha: Complex64,
    pub stages: Vec<Stage>,
    pub target: u64,
}

impl ProtocolSchedule {
    pub fn from_lenses(alpha: Complex64, target: u64, lenses: &[LensParams]) -> Self {
        Self {
            alpha,
            stages: lenses.iter().flat_map(|l| l.stages()).collect(),
            target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(FockError::Domain("schedule has no stages".into()));
        }
        for stage in &self.stages {
            match stage {
                Stage::Evolution { hamiltonian, duration } => {
                    hamiltonian.validate()?;
                    if !(*duration >= 0.0 && duration.is_finite()) {
                        return Err(FockError::Domain(format!("stage duration {duration}")));
                    }
                }
                Stage::Phase(p) => {
                    if !(p.phi0.is_finite() && p.center.is_finite() && p.linear_coeff.is_finite()) {
                        return Err(FockError::Domain("phase stage must be finite".into()));
                    }
                }
                Stage::Displacement(b) => {
                    if !(b.re.is_finite() && b.im.is_finite()) {
                        return Err(FockError::Domain("displacement must be finite".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(Stage::duration).sum()
    }
}

/// How the photon-number window is chosen and maintained during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPolicy {
    /// Half-width of the initial window; `None` uses ten standard deviations
    /// of the input coherent state (at least 64).
    pub half_width: Option<u64>,
    pub tail_tol: f64,
    /// Grow the window when a stage would otherwise leak.
    pub auto_extend: bool,
    /// Convergence tolerance of continuous stages.
    pub evolve_tol: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            half_width: None,
            tail_tol: DEFAULT_TAIL_TOL,
            auto_extend: true,
            evolve_tol: DEFAULT_EVOLVE_TOL,
        }
    }
}

impl WindowPolicy {
    pub fn initial_window(&self, alpha: Complex64) -> FockWindow {
        let mean = alpha.norm_sqr();
        match self.half_width {
            Some(h) => make_window(mean.round() as u64, h),
            None => default_window(mean),
        }
    }

    /// `|alpha>` on the initial window, grown while the Poisson tail leaks
    /// if the policy allows.
    pub fn initial_state(&self, alpha: Complex64) -> Result<StateVector> {
        let mut window = self.initial_window(alpha);
        for _ in 0..MAX_EXTENSIONS {
            match coherent_state(alpha, window) {
                Err(FockError::TailLeak { .. }) if self.auto_extend => {
                    let step = (window.dimension() as u64 / 8).max(MIN_HALF_WIDTH);
                    window = FockWindow::new(window.n_min().saturating_sub(step), window.n_max() + step)?;
                }
                other => return other,
            }
        }
        coherent_state(alpha, window)
    }
}

const MAX_EXTENSIONS: usize = 8;

fn union(a: FockWindow, b: FockWindow) -> FockWindow {
    FockWindow::new(a.n_min().min(b.n_min()), a.n_max().max(b.n_max())).expect("ordered")
}

/// Embeds `state` into a window wide enough for hopping of strength `hop`.
pub(crate) fn widen_for(state: StateVector, hop: f64, hopping: Hopping, policy: &WindowPolicy) -> StateVector {
    if !policy.auto_extend || hop == 0.0 {
        return state;
    }
    let needed = reach_window(&state, hop, hopping, policy.tail_tol);
    let window = union(state.window(), needed);
    if window == state.window() {
        state
    } else {
        log::debug!("window {} -> {window} ahead of hopping {hop:.4}", state.window());
        state.embed(window).expect("union contains the state window")
    }
}

/// Applies one stage, growing the window as the policy allows.
pub fn apply_stage(state: StateVector, stage: &Stage, policy: &WindowPolicy) -> Result<StateVector> {
    apply_stage_for(state, stage, stage.duration(), policy)
}

/// Applies `stage`, running an evolution stage for `duration` instead of its
/// full length.
fn apply_stage_for(mut state: StateVector, stage: &Stage, duration: f64, policy: &WindowPolicy) -> Result<StateVector> {
    match stage {
        Stage::Phase(phase) => {
            apply_quadratic_phase_in_place(&mut state, phase);
            Ok(state)
        }
        Stage::Displacement(beta) => {
            let mut state = widen_for(state, beta.norm(), Hopping::Bosonic, policy);
            for _ in 0..MAX_EXTENSIONS {
                match displace(&state, *beta) {
                    Err(FockError::TailLeak { .. }) if policy.auto_extend => {
                        state = grow(&state);
                    }
                    other => return other,
                }
            }
            displace(&state, *beta)
        }
        Stage::Evolution { hamiltonian, .. } => {
            let hop = hamiltonian.drive_strength * duration;
            let mut state = widen_for(state, hop, hamiltonian.hopping, policy);
            for _ in 0..MAX_EXTENSIONS {
                match evolve_hamiltonian(&state, hamiltonian, duration, policy.evolve_tol) {
                    Err(FockError::TailLeak { .. }) if policy.auto_extend => {
                        state = grow(&state);
                    }
                    other => return other,
                }
            }
            evolve_hamiltonian(&state, hamiltonian, duration, policy.evolve_tol)
        }
    }
}

/// Grows both edges of the window by a quarter of its half-width.
fn grow(state: &StateVector) -> StateVector {
    let window = state.window();
    let step = (window.dimension() as u64 / 8).max(MIN_HALF_WIDTH);
    let wider = FockWindow::new(window.n_min().saturating_sub(step), window.n_max() + step).expect("ordered");
    log::debug!("window {window} -> {wider} after a tail leak");
    state.embed(wider).expect("wider window")
}

/// Outcome of [`run_lens_group`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensRun {
    pub state: StateVector,
    /// `|<N|psi>|^2` for the schedule's target.
    pub fidelity: f64,
    pub statistics: PhotonStatistics,
}

/// Prepares `|alpha>` and applies every stage in order.
pub fn run_lens_group(schedule: &ProtocolSchedule, policy: &WindowPolicy) -> Result<LensRun> {
    schedule.validate()?;
    let mut state = policy.initial_state(schedule.alpha)?;
    for stage in &schedule.stages {
        state = apply_stage(state, stage, policy)?;
    }
    let fidelity = fidelity(&state, schedule.target);
    let statistics = photon_statistics(&state);
    Ok(LensRun {
        state,
        fidelity,
        statistics,
    })
}

/// Photon statistics at one instant of a time-resolved run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub statistics: PhotonStatistics,
}

/// Runs `schedule` and records the photon statistics at each of
/// `snapshot_times` (ascending, within the schedule's total duration).
///
/// Instantaneous stages sit at the time their predecessors end and act just
/// after any snapshot taken at that instant.
pub fn time_resolved_run(
    schedule: &ProtocolSchedule,
    snapshot_times: &[f64],
    policy: &WindowPolicy,
) -> Result<Vec<Snapshot>> {
    schedule.validate()?;
    let total = schedule.total_duration();
    if snapshot_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(FockError::Domain("snapshot times must be ascending".into()));
    }
    if let Some(bad) = snapshot_times
        .iter()
        .find(|&&t| !(t >= 0.0) || t > total * (1.0 + 1e-12) + 1e-12)
    {
        return Err(FockError::Domain(format!("snapshot time {bad} outside [0, {total}]")));
    }

    let mut state = policy.initial_state(schedule.alpha)?;
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut pending = snapshot_times.iter().copied().peekable();
    let mut now = 0.0;
    let record = |state: &StateVector, t: f64, out: &mut Vec<Snapshot>| {
        out.push(Snapshot {
            time: t,
            statistics: photon_statistics(state),
        })
    };

    for stage in &schedule.stages {
        while let Some(&t) = pending.peek() {
            if t > now {
                break;
            }
            record(&state, t, &mut snapshots);
            pending.next();
        }
        let duration = stage.duration();
        if duration == 0.0 {
            state = apply_stage(state, stage, policy)?;
            continue;
        }
        let end = now + duration;
        let mut reached = now;
        while let Some(&t) = pending.peek() {
            if t > end {
                break;
            }
            if t > reached {
                state = apply_stage_for(state, stage, t - reached, policy)?;
                reached = t;
            }
            record(&state, t, &mut snapshots);
            pending.next();
        }
        if end > reached {
            state = apply_stage_for(state, stage, end - reached, policy)?;
        }
        now = end;
    }
    for t in pending {
        record(&state, t, &mut snapshots);
    }
    Ok(snapshots)
}

/// Peak Fock probability over a grid of lens curvatures and drive times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusMap {
    pub phi_grid: Vec<f64>,
    pub time_grid: Vec<f64>,
    /// `peak[i][j] = max_n P(n)` for `phi_grid[i]`, `time_grid[j]`.
    pub peak: Vec<Vec<f64>>,
    pub ridge: Vec<RidgePoint>,
}

/// Best drive time for one curvature, with the focal-law prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgePoint {
    pub phi0: f64,
    pub best_time: f64,
    pub best_peak: f64,
    pub focal_time: f64,
}

impl RidgePoint {
    /// `best_time / focal_time`; one on the focal law.
    pub fn ratio(&self) -> f64 {
        self.best_time / self.focal_time
    }
}

/// Single-lens focus map: for each `phi0`, phase `|sqrt(n0)>` about `n0`,
/// drive it with strength `eps`, and record the peak probability at each
/// drive time.
///
/// Rows run in parallel; each row steps through its (ascending) time grid
/// sequentially so a row costs one propagation.
pub fn sweep_focus_map(
    phi_grid: &[f64],
    time_grid: &[f64],
    n0: f64,
    drive_strength: f64,
    policy: &WindowPolicy,
) -> Result<FocusMap> {
    if phi_grid.iter().any(|&p| !(p >= 0.0)) || time_grid.iter().any(|&t| !(t >= 0.0)) {
        return Err(FockError::Domain("focus-map grids must be non-negative".into()));
    }
    if time_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(FockError::Domain("drive-time grid must be ascending".into()));
    }
    if !(n0 > 0.0 && drive_strength > 0.0) {
        return Err(FockError::Domain("focus map needs n0 > 0 and eps > 0".into()));
    }
    let alpha = Complex64::new(n0.sqrt(), 0.0);
    let drive = HamiltonianSpec::drive(drive_strength, 0.0);
    let rows: Vec<Vec<f64>> = phi_grid
        .par_iter()
        .map(|&phi0| -> Result<Vec<f64>> {
            let mut state = policy.initial_state(alpha)?;
            apply_quadratic_phase_in_place(&mut state, &QuadraticPhase::new(phi0, n0));
            let stage = Stage::Evolution {
                hamiltonian: drive,
                duration: 0.0,
            };
            let mut now = 0.0;
            let mut row = Vec::with_capacity(time_grid.len());
            for &t in time_grid {
                if t > now {
                    state = apply_stage_for(state, &stage, t - now, policy)?;
                    now = t;
                }
                row.push(photon_statistics(&state).peak_value);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let ridge = phi_grid
        .iter()
        .zip(&rows)
        .map(|(&phi0, row)| {
            let (j, best_peak) = row
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (j, p)| if p > b.1 { (j, p) } else { b });
            RidgePoint {
                phi0,
                best_time: time_grid.get(j).copied().unwrap_or(0.0),
                best_peak,
                focal_time: focal_drive_time(n0, drive_strength, phi0).unwrap_or(f64::INFINITY),
            }
        })
        .collect();
    Ok(FocusMap {
        phi_grid: phi_grid.to_vec(),
        time_grid: time_grid.to_vec(),
        peak: rows,
        ridge,
    })
}
