//! Lens-group optimization: bounded multi-restart Nelder-Mead over the
//! lens parameters, an exhaustive grid oracle, and log-log power-law fits.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};
use crate::lens::{apply_stage, focal_drive_time, run_lens_group, LensParams, ProtocolSchedule, WindowPolicy};
use crate::state::{fidelity, StateVector};

/// Reference curvature at `N = 10^4` and its empirical scaling with `N`.
pub const PHI_REFERENCE: f64 = 2.45e-3;
pub const PHI_SCALING_EXPONENT: f64 = 0.55;

/// Analytic single-lens guess for the curvature at photon number `n`.
pub fn curvature_guess(n: f64) -> f64 {
    PHI_REFERENCE * (n / 1e4).powf(-PHI_SCALING_EXPONENT)
}

/// Box constraints in units of the analytic scales: curvature in units of
/// [`curvature_guess`], center offset in units of `sqrt(N)`, and both
/// displacement components in units of the focal drive time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBounds {
    pub phi: (f64, f64),
    pub center: (f64, f64),
    pub beta: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            phi: (-500.0, 500.0),
            center: (-3.0, 3.0),
            beta: (-4.0, 4.0),
        }
    }
}

impl ParamBounds {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("phi", self.phi), ("center", self.center), ("beta", self.beta)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(FockError::Domain(format!("bad {name} bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn for_coordinate(&self, k: usize) -> (f64, f64) {
        match k % 4 {
            0 => self.phi,
            1 => self.center,
            _ => self.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    pub target: u64,
    pub lenses: usize,
    pub bounds: ParamBounds,
    pub restarts: usize,
    /// Convergence tolerance on the fidelity.
    pub tolerance: f64,
    /// Fidelity evaluations allowed per restart.
    pub budget: usize,
    pub seed: u64,
    /// Relative jitter of restart seeds around the starting point.
    pub jitter: f64,
    /// Starting lenses; missing trailing lenses are filled in analytically.
    pub warm_start: Vec<LensParams>,
    /// Complete lens groups ranked together with the generated starting
    /// points, e.g. an optimum found at another photon number.
    pub seeds: Vec<Vec<LensParams>>,
    pub window: WindowPolicy,
}

impl OptimizationConfig {
    pub fn new(target: u64, lenses: usize) -> Self {
        Self {
            target,
            lenses,
            bounds: ParamBounds::default(),
            restarts: 8,
            tolerance: 1e-4,
            budget: 2000,
            seed: 0,
            jitter: 0.2,
            warm_start: Vec::new(),
            seeds: Vec::new(),
            window: WindowPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target == 0 {
            return Err(FockError::Domain("target photon number must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(FockError::Domain("tolerance must be positive".into()));
        }
        if self.restarts == 0 || self.budget == 0 {
            return Err(FockError::Domain("need at least one restart and evaluation".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(FockError::Domain("jitter must be non-negative".into()));
        }
        if self.warm_start.len() > self.lenses {
            return Err(FockError::Domain("more warm-start lenses than lenses".into()));
        }
        self.bounds.validate()
    }
}

/// Best point of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub fidelity: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub lenses: Vec<LensParams>,
    pub fidelity: f64,
    pub evaluations: usize,
    pub trace: Vec<RestartTrace>,
    /// Set when the best restart ran out of budget before converging.
    pub budget_exhausted: bool,
}

/// Maps normalized coordinates to lenses and evaluates the fidelity.
struct Objective<'a> {
    initial: StateVector,
    target: u64,
    n: f64,
    phi_scale: f64,
    beta_scale: f64,
    window: &'a WindowPolicy,
}

impl<'a> Objective<'a> {
    fn new(config: &'a OptimizationConfig) -> Result<Self> {
        let n = config.target as f64;
        let phi_scale = curvature_guess(n);
        let beta_scale = focal_drive_time(n, 1.0, phi_scale)?;
        let initial = config.window.initial_state(Complex64::new(n.sqrt(), 0.0))?;
        Ok(Self {
            initial,
            target: config.target,
            n,
            phi_scale,
            beta_scale,
            window: &config.window,
        })
    }

    fn decode(&self, x: &[f64]) -> Vec<LensParams> {
        x.chunks_exact(4)
            .map(|p| {
                LensParams::new(
                    p[0] * self.phi_scale,
                    self.n + p[1] * self.n.sqrt(),
                    Complex64::new(p[2], p[3]) * self.beta_scale,
                )
            })
            .collect()
    }

    fn encode(&self, lenses: &[LensParams]) -> Vec<f64> {
        lenses
            .iter()
            .flat_map(|l| {
                [
                    l.phi0 / self.phi_scale,
                    (l.center - self.n) / self.n.sqrt(),
                    l.beta.re / self.beta_scale,
                    l.beta.im / self.beta_scale,
                ]
            })
            .collect()
    }

    /// Analytic first lens: the focal law with the drive along `-i`.
    fn analytic_lens(&self) -> Vec<f64> {
        vec![1.0, 0.0, 0.0, -1.0]
    }

    fn fidelity(&self, x: &[f64]) -> f64 {
        let lenses = self.decode(x);
        let mut state = self.initial.clone();
        for lens in &lenses {
            for stage in lens.stages() {
                state = match apply_stage(state, &stage, self.window) {
                    Ok(s) => s,
                    Err(e) => {
                        log::debug!("objective failed at {x:?}: {e}");
                        return 0.0;
                    }
                };
            }
        }
        fidelity(&state, self.target)
    }
}

/// Curvatures (in units of the single-lens guess) and displacements (in
/// units of the focal drive time, along `-i`) scanned for an appended lens.
/// Correcting lenses act on an almost focused state, so they are much
/// stronger and much shorter than the first.
const APPENDED_PHI: [f64; 6] = [10.0, 20.0, 40.0, 80.0, 160.0, 320.0];
const APPENDED_BETA: [f64; 3] = [0.01, 0.02, 0.04];
/// Weakenings of the first lens tried together with each appended lens; the
/// drive is lengthened to keep the focal law.
const FIRST_LENS_SCALE: [f64; 3] = [1.0, 0.85, 0.7];

/// Restart starting points, best first.
///
/// With a complete warm start (or a single lens) restart 0 is the warm
/// start or the analytic lens and the rest are jittered copies. Otherwise
/// the last lens is appended to the warm start, restart `r` takes the
/// `r`-th best candidate of a coarse scan over the new lens and the
/// strength of the first, and any remaining restarts are
/// jittered copies of the best candidate. Seeds of the right length join
/// the ranking.
fn starting_points(objective: &Objective, config: &OptimizationConfig) -> Vec<Vec<f64>> {
    let mut base = objective.encode(&config.warm_start);
    let mut candidates: Vec<Vec<f64>> = if base.len() == 4 * config.lenses {
        vec![base]
    } else if base.is_empty() {
        base = objective.analytic_lens();
        while base.len() < 4 * config.lenses {
            base.extend([0.0; 4]);
        }
        vec![base]
    } else {
        let mut scan: Vec<Vec<f64>> = Vec::new();
        for &scale in &FIRST_LENS_SCALE {
            let mut head = base.clone();
            head[0] *= scale;
            head[2] /= scale;
            head[3] /= scale;
            for &k in &APPENDED_PHI {
                for &b in &APPENDED_BETA {
                    scan.push(head.iter().copied().chain([k, 0.0, 0.0, -b]).collect());
                }
            }
        }
        scan
    };
    let seeds: Vec<Vec<f64>> = config
        .seeds
        .iter()
        .filter(|s| s.len() == config.lenses)
        .map(|s| objective.encode(s))
        .collect();
    if candidates.len() > 1 || !seeds.is_empty() {
        candidates.extend(seeds);
        let values: Vec<f64> = candidates.par_iter().map(|x| objective.fidelity(x)).collect();
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
        candidates = order.into_iter().map(|i| candidates[i].clone()).collect();
    }
    candidates.truncate(config.restarts);
    let best = candidates[0].clone();
    let lower: Vec<f64> = (0..best.len()).map(|k| config.bounds.for_coordinate(k).0).collect();
    let upper: Vec<f64> = (0..best.len()).map(|k| config.bounds.for_coordinate(k).1).collect();
    for restart in candidates.len()..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(restart as u64);
        let x = best
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let width = (upper[k] - lower[k]) * 0.01;
                v + config.jitter * v.abs().max(width) * rng.random_range(-1.0..1.0)
            })
            .collect();
        candidates.push(x);
    }
    candidates
}

/// Carries lenses optimized for target `from` over to target `to` by
/// keeping their normalized coordinates: curvature in units of
/// [`curvature_guess`], center offset in units of `sqrt(N)`, displacement
/// in units of the focal drive time.
pub fn rescale_lenses(lenses: &[LensParams], from: u64, to: u64) -> Result<Vec<LensParams>> {
    let (a, b) = (from as f64, to as f64);
    let phi = curvature_guess(b) / curvature_guess(a);
    let beta = focal_drive_time(b, 1.0, curvature_guess(b))? / focal_drive_time(a, 1.0, curvature_guess(a))?;
    let offset = (b / a).sqrt();
    Ok(lenses
        .iter()
        .map(|l| LensParams::new(l.phi0 * phi, b + (l.center - a) * offset, l.beta * beta))
        .collect())
}

/// Maximizes the fidelity of `config.lenses` lenses applied to
/// `|sqrt(N)>` for target `|N>`.
///
/// Lens groups are built up one lens at a time: when the warm start is
/// more than one lens short, the missing lenses are optimized first and
/// carried over. Restarts run in parallel and are reduced in index order,
/// so the result does not depend on the number of workers.
pub fn optimize_lens_group(config: &OptimizationConfig) -> Result<OptimizationResult> {
    config.validate()?;
    if config.lenses > 1 && config.warm_start.len() + 1 < config.lenses {
        let shorter = OptimizationConfig {
            lenses: config.lenses - 1,
            ..config.clone()
        };
        let previous = optimize_lens_group(&shorter)?;
        log::info!("{} lenses: F = {:.6}", shorter.lenses, previous.fidelity);
        let earlier = previous.evaluations;
        let config = OptimizationConfig {
            warm_start: previous.lenses,
            ..config.clone()
        };
        let mut result = optimize_lens_group(&config)?;
        result.evaluations += earlier;
        return Ok(result);
    }

    let objective = Objective::new(config)?;
    if config.lenses == 0 {
        return Ok(OptimizationResult {
            lenses: Vec::new(),
            fidelity: fidelity(&objective.initial, config.target),
            evaluations: 1,
            trace: Vec::new(),
            budget_exhausted: false,
        });
    }
    let starts = starting_points(&objective, config);
    let dim = starts[0].len();
    let lower: Vec<f64> = (0..dim).map(|k| config.bounds.for_coordinate(k).0).collect();
    let upper: Vec<f64> = (0..dim).map(|k| config.bounds.for_coordinate(k).1).collect();

    let outcomes: Vec<(Vec<f64>, f64, RestartTrace)> = starts
        .par_iter()
        .enumerate()
        .map(|(restart, x0)| {
            let run = nelder_mead(
                |x| -objective.fidelity(x),
                x0,
                &lower,
                &upper,
                config.tolerance,
                config.budget,
            );
            log::info!(
                "restart {restart}: F = {:.6} after {} evaluations",
                -run.value,
                run.evaluations
            );
            let trace = RestartTrace {
                restart,
                fidelity: -run.value,
                evaluations: run.evaluations,
                converged: run.converged,
            };
            (run.point, -run.value, trace)
        })
        .collect();

    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.1 > outcomes[best].1 {
            best = i;
        }
    }
    let lenses = objective.decode(&outcomes[best].0);
    let schedule = ProtocolSchedule::from_lenses(Complex64::new(objective.n.sqrt(), 0.0), config.target, &lenses);
    let fidelity = run_lens_group(&schedule, &config.window)?.fidelity;
    if (fidelity - outcomes[best].1).abs() > 1e-9 {
        return Err(FockError::NoConvergence(format!(
            "re-validated fidelity {fidelity} differs from optimizer value {}",
            outcomes[best].1
        )));
    }
    Ok(OptimizationResult {
        lenses,
        fidelity,
        evaluations: outcomes.iter().map(|o| o.2.evaluations).sum(),
        budget_exhausted: !outcomes[best].2.converged,
        trace: outcomes.into_iter().map(|o| o.2).collect(),
    })
}

struct Minimum {
    point: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
}

/// Bounded adaptive Nelder-Mead. Trial points are clamped into the box.
/// Converged when the simplex values spread less than `tol` and its
/// vertices lie within `1e-3` of the best; a converged run is restarted
/// once around its minimum and accepted when that gains less than `tol`.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    tol: f64,
    budget: usize,
) -> Minimum {
    let dim = x0.len();
    let d = dim as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / d, 0.75 - 0.5 / d, 1.0 - 1.0 / d);
    let clamp = |x: &mut Vec<f64>| {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(lower[k], upper[k]);
        }
    };
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        f(x)
    };

    let mut center: Vec<f64> = x0.to_vec();
    clamp(&mut center);
    let mut step = 0.1;
    let mut last_best = f64::INFINITY;
    let mut best: (Vec<f64>, f64) = (center.clone(), f64::INFINITY);
    let mut converged = false;

    'outer: loop {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        let v0 = eval(&center);
        simplex.push((center.clone(), v0));
        for k in 0..dim {
            let mut x = center.clone();
            let span = upper[k] - lower[k];
            x[k] += step * span.min(1.0).max(1e-3) * if x[k] + step <= upper[k] { 1.0 } else { -1.0 };
            clamp(&mut x);
            let v = eval(&x);
            simplex.push((x, v));
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if simplex[0].1 < best.1 {
                best = simplex[0].clone();
            }
            let spread = simplex[dim].1 - simplex[0].1;
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread < tol && size < 1e-3 {
                break;
            }
            if evaluations.get() >= budget {
                break 'outer;
            }

            let centroid: Vec<f64> = (0..dim)
                .map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / d)
                .collect();
            let toward = |t: f64, worst: &[f64]| -> Vec<f64> {
                let mut x: Vec<f64> = centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect();
                clamp(&mut x);
                x
            };
            let worst = simplex[dim].0.clone();
            let xr = toward(alpha, &worst);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = toward(gamma, &worst);
                let fe = eval(&xe);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[dim].1 {
                    let xc = toward(alpha * rho, &worst);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = toward(-rho, &worst);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < fr.min(simplex[dim].1) {
                    simplex[dim] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let mut x: Vec<f64> = x_best.iter().zip(&vertex.0).map(|(b, v)| b + sigma * (v - b)).collect();
                        clamp(&mut x);
                        vertex.1 = eval(&x);
                        vertex.0 = x;
                    }
                }
            }
        }

        if last_best - best.1 < tol {
            converged = true;
            break;
        }
        last_best = best.1;
        center = best.0.clone();
        step = 0.05;
    }
    Minimum {
        point: best.0,
        value: best.1,
        evaluations: evaluations.get(),
        converged,
    }
}

/// Grid of single-lens parameters for [`grid_search_oracle`]: absolute
/// curvatures, center offsets from `N`, and displacement components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensGrid {
    pub phi0: Vec<f64>,
    pub center_offset: Vec<f64>,
    pub beta_re: Vec<f64>,
    pub beta_im: Vec<f64>,
}

impl LensGrid {
    fn len(&self) -> usize {
        self.phi0.len() * self.center_offset.len() * self.beta_re.len() * self.beta_im.len()
    }

    fn point(&self, n: f64, mut i: usize) -> LensParams {
        let mut take = |v: &[f64]| {
            let x = v[i % v.len()];
            i /= v.len();
            x
        };
        let im = take(&self.beta_im);
        let re = take(&self.beta_re);
        let offset = take(&self.center_offset);
        let phi0 = take(&self.phi0);
        LensParams::new(phi0, n + offset, Complex64::new(re, im))
    }
}

/// Exhaustive single-lens search; the first grid point (in enumeration
/// order) attaining the maximum wins.
pub fn grid_search_oracle(target: u64, grid: &LensGrid, window: &WindowPolicy) -> Result<(LensParams, f64)> {
    if grid.len() == 0 {
        return Err(FockError::Domain("empty grid".into()));
    }
    let n = target as f64;
    let alpha = Complex64::new(n.sqrt(), 0.0);
    let initial = window.initial_state(alpha)?;
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut state = initial.clone();
            for stage in grid.point(n, i).stages() {
                state = match apply_stage(state, &stage, window) {
                    Ok(s) => s,
                    Err(_) => return 0.0,
                };
            }
            fidelity(&state, target)
        })
        .collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok((grid.point(n, best), values[best]))
}

/// Power law `y = prefactor * x^(-exponent)` fitted in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub prefactor: f64,
    /// Decay exponent; positive when `y` falls with `x`.
    pub exponent: f64,
    /// Largest `|ln y - ln fit|` over the samples.
    pub max_log_residual: f64,
}

impl FitResult {
    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * x.powf(-self.exponent)
    }
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 2 {
        return Err(FockError::Domain("power-law fit needs at least two samples".into()));
    }
    if let Some(&(x, y)) = samples.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(FockError::Domain(format!("non-positive sample ({x}, {y})")));
    }
    let m = samples.len() as f64;
    let logs: Vec<(f64, f64)> = samples.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FockError::Domain("power-law fit needs distinct x values".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let max_log_residual = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).abs())
        .fold(0.0, f64::max);
    Ok(FitResult {
        prefactor: intercept.exp(),
        exponent: -slope,
        max_log_residual,
    })
}
