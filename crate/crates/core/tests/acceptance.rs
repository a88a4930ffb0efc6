//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! a table of the numbers behind it. Failures are reported but only fail
//! the run when `FOCKLENS_STRICT_ACCEPTANCE` is set.
//!
//! This is slow (tens of minutes on one core): the scaling criteria
//! optimize lens groups up to `N = 10^5`.

use std::time::Instant;

use focklens::lens::{
    focal_drive_time, run_lens_group, sweep_focus_map, time_resolved_run, LensParams, ProtocolSchedule, Stage,
    WindowPolicy,
};
use focklens::open_system::{
    dense_lindblad_oracle, ensemble_average, ensemble_average_from, physical_schedule, EnsembleConfig,
};
use focklens::optimize::{
    curvature_guess, fit_power_law, grid_search_oracle, optimize_lens_group, rescale_lenses, LensGrid,
    OptimizationConfig, OptimizationResult,
};
use focklens::oracles::{bessel_lattice_amplitudes, poisson_pmf};
use focklens::propagate::{displace, evolve_hamiltonian, Hopping};
use focklens::state::{coherent_state, default_window, fock_state, make_window, photon_statistics};
use focklens::{Complex64, HamiltonianSpec};

const PHI_M: f64 = 2.45e-3;
const KERR: f64 = 4.9e-3;
const SCALING_N: [u64; 5] = [1_000, 2_500, 10_000, 40_000, 100_000];
const MAX_LENSES: usize = 3;
/// Restarts per lens group; evaluations are cheap enough below `N = 10^4`
/// to afford more.
fn restarts(n: u64) -> usize {
    if n <= 10_000 {
        8
    } else {
        4
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, id: u32, name: &str, pass: bool, detail: String, started: Instant) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "{} [{id}] {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
}

fn focusing_schedule() -> ProtocolSchedule {
    ProtocolSchedule {
        alpha: Complex64::new(100.0, 0.0),
        stages: vec![
            Stage::Evolution {
                hamiltonian: HamiltonianSpec::kerr_centered(KERR, 1e4),
                duration: 0.5,
            },
            Stage::Evolution {
                hamiltonian: HamiltonianSpec::drive(1.0, 0.0),
                duration: 1.5,
            },
        ],
        target: 10_000,
    }
}

fn focusing_run(report: &mut Report) {
    let started = Instant::now();
    let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
    let snaps = time_resolved_run(&focusing_schedule(), &times, &WindowPolicy::default()).unwrap();
    let first = &snaps[0].statistics;
    let focus = snaps
        .iter()
        .max_by(|a, b| a.statistics.peak_value.total_cmp(&b.statistics.peak_value))
        .unwrap();
    let rising = snaps
        .windows(2)
        .filter(|w| w[1].time <= focus.time)
        .all(|w| w[1].statistics.peak_value >= w[0].statistics.peak_value - 1e-12);
    let pass = (first.peak_value - 0.004).abs() < 5e-4
        && focus.statistics.peak_value >= 0.15
        && (1.40..=1.70).contains(&focus.time)
        && rising
        && started.elapsed().as_secs() < 300;
    report.check(
        1,
        "focusing run",
        pass,
        format!(
            "peak {:.4} -> {:.4} at t = {:.2}, monotone rise {rising} (need >= 0.15, t in [1.40, 1.70])",
            first.peak_value, focus.statistics.peak_value, focus.time
        ),
        started,
    );

    let initial_width = first.cdf_width(0.05, 0.95);
    let focused_width = focus.statistics.cdf_width(0.05, 0.95);
    report.check(
        2,
        "cumulative step at focus",
        focused_width <= 25 && initial_width >= 250,
        format!("5-95% width {initial_width} -> {focused_width} photons (need >= 250 -> <= 25)"),
        started,
    );
}

fn ridge(report: &mut Report) {
    let started = Instant::now();
    let phis: Vec<f64> = (0..17).map(|i| PHI_M * (0.2 + 0.05 * i as f64)).collect();
    let times: Vec<f64> = (0..=300).map(|i| i as f64 * 0.02).collect();
    let map = sweep_focus_map(&phis, &times, 1e4, 1.0, &WindowPolicy::default()).unwrap();
    let worst = map
        .ridge
        .iter()
        .max_by(|a, b| (a.ratio() - 1.0).abs().total_cmp(&(b.ratio() - 1.0).abs()))
        .unwrap();
    report.check(
        3,
        "focus-map ridge follows the focal law",
        (worst.ratio() - 1.0).abs() <= 0.15,
        format!(
            "worst best_t / focal_t = {:.4} at phi0 = {:.3} phi_m over {} curvatures (need within 15%)",
            worst.ratio(),
            worst.phi0 / PHI_M,
            map.ridge.len()
        ),
        started,
    );
}

/// `table[i][l]` for `SCALING_N[i]` and `l` lenses. Each photon number
/// builds lenses up one at a time and also tries the optimum of the
/// previous photon number carried over in normalized units.
fn scaling_table() -> Vec<Vec<OptimizationResult>> {
    let mut table: Vec<Vec<OptimizationResult>> = Vec::new();
    for (i, &n) in SCALING_N.iter().enumerate() {
        let started = Instant::now();
        let mut row: Vec<OptimizationResult> = Vec::new();
        for l in 0..=MAX_LENSES {
            let mut config = OptimizationConfig::new(n, l);
            config.restarts = restarts(n);
            if let Some(previous) = row.last() {
                config.warm_start = previous.lenses.clone();
            }
            if i > 0 && l > 0 {
                let from = SCALING_N[i - 1];
                config.seeds = vec![rescale_lenses(&table[i - 1][l].lenses, from, n).unwrap()];
            }
            let result = optimize_lens_group(&config).unwrap();
            println!(
                "      N = {n:>6}, L = {l}: F = {:.4} ({} evaluations, {:.0}s)",
                result.fidelity,
                result.evaluations,
                started.elapsed().as_secs_f64()
            );
            row.push(result);
        }
        table.push(row);
    }
    table
}

fn fidelity_targets(report: &mut Report, table: &[Vec<OptimizationResult>], started: Instant) {
    let at = |n: u64, l: usize| table[SCALING_N.iter().position(|&m| m == n).unwrap()][l].fidelity;
    let (f2, f3, f3_big) = (at(10_000, 2), at(10_000, 3), at(100_000, 3));
    report.check(
        4,
        "optimized lens-group fidelity",
        f2 > 0.55 && f3 >= 0.70 && f3_big >= 0.58,
        format!("N=1e4: L=2 {f2:.4} (need > 0.55), L=3 {f3:.4} (need >= 0.70); N=1e5: L=3 {f3_big:.4} (need >= 0.58)"),
        started,
    );
}

fn fidelity_exponents(report: &mut Report, table: &[Vec<OptimizationResult>], started: Instant) {
    let expected = [(0.5, 0.02), (0.159, 0.04), (0.080, 0.04), (0.047, 0.04)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (l, &(want, tol)) in expected.iter().enumerate() {
        let samples: Vec<(f64, f64)> = SCALING_N
            .iter()
            .zip(table)
            .map(|(&n, row)| (n as f64, row[l].fidelity))
            .collect();
        let fit = fit_power_law(&samples).unwrap();
        pass &= (fit.exponent.abs() - want).abs() <= tol;
        detail.push(format!("L={l} |y| = {:.4} (want {want} +- {tol})", fit.exponent.abs()));
    }
    report.check(5, "fidelity scaling exponents", pass, detail.join(", "), started);
}

fn curvature_exponent(report: &mut Report, table: &[Vec<OptimizationResult>], started: Instant) {
    let samples: Vec<(f64, f64)> = SCALING_N
        .iter()
        .zip(table)
        .filter(|(&n, _)| n >= 2_500)
        .map(|(&n, row)| (n as f64, row[1].lenses[0].phi0))
        .collect();
    let ratios: Vec<String> = samples
        .iter()
        .map(|&(n, p)| format!("{:.3}", p / curvature_guess(n)))
        .collect();
    let (pass, detail) = match fit_power_law(&samples) {
        Ok(fit) => (
            (fit.exponent.abs() - 0.55).abs() <= 0.06,
            format!(
                "|y| = {:.4} (want 0.55 +- 0.06); phi0 / (2.45e-3 (N/1e4)^-0.55) = [{}]",
                fit.exponent.abs(),
                ratios.join(", ")
            ),
        ),
        Err(e) => (false, format!("fit failed: {e}")),
    };
    report.check(6, "single-lens curvature scaling", pass, detail, started);
}

fn loss_robustness(report: &mut Report, lens: &LensParams, closed: f64) {
    let started = Instant::now();
    let n = 2_500;
    let schedule = physical_schedule(Complex64::new(50.0, 0.0), n, &[*lens], KERR, 1.0).unwrap();
    let ratios = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0];
    let mut points = Vec::new();
    for &ratio in &ratios {
        let config = EnsembleConfig::new(schedule.clone(), KERR / ratio, 200, 1);
        let result = ensemble_average(&config).unwrap();
        points.push((ratio, result.mean_fidelity, result.standard_error));
    }
    let coherent = poisson_pmf(2500.0, n);
    let no_lens = poisson_pmf(2500.0 * (-KERR * schedule.total_duration()).exp(), n);
    let monotone = points
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 - 3.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let high = points.last().unwrap().1;
    let gain = points[0].1 / coherent;
    let pass = (high / closed - 1.0).abs() <= 0.05 && monotone && (4.0..=8.0).contains(&gain);
    let curve: Vec<String> = points.iter().map(|(r, f, e)| format!("{r}:{f:.4}+-{e:.4}")).collect();
    report.check(
        7,
        "loss robustness",
        pass,
        format!(
            "closed {closed:.4}; chi/kappa=200 gives {high:.4} ({:+.1}%); F/coherent at chi/kappa=1 = {gain:.2} \
             (lossy no-lens baseline {no_lens:.2e}); monotone {monotone}; [{}]",
            100.0 * (high / closed - 1.0),
            curve.join(" ")
        ),
        started,
    );
}

/// Compact versions of the invariant and oracle checks.
fn invariants(report: &mut Report) {
    let started = Instant::now();
    let mut failed: Vec<&str> = Vec::new();

    let alpha = Complex64::new(30.0, 5.0);
    let state = coherent_state(alpha, default_window(alpha.norm_sqr())).unwrap();
    let h = HamiltonianSpec {
        drive_strength: 0.8,
        drive_phase: 0.4,
        ..HamiltonianSpec::kerr_centered(2e-3, 900.0)
    };
    let roomy = state.embed(make_window(925, 700)).unwrap();
    let evolved = evolve_hamiltonian(&roomy, &h, 1.3, 1e-10).unwrap();
    let beta = Complex64::new(0.7, -1.1);
    let shifted = displace(&roomy, beta).unwrap();
    if (evolved.norm_sqr() - 1.0).abs() > 1e-10 || (shifted.norm_sqr() - 1.0).abs() > 1e-10 {
        failed.push("norm");
    }
    if displace(&shifted, -beta).unwrap().distance(&roomy) > 1e-10 {
        failed.push("displacement group");
    }
    let driven = evolve_hamiltonian(&roomy, &HamiltonianSpec::drive(1.0, 0.3), 0.9, 1e-10).unwrap();
    let expected = displace(&roomy, Complex64::new(0.0, -0.9) * Complex64::from_polar(1.0, -0.3)).unwrap();
    if driven.distance(&expected) > 1e-9 {
        failed.push("drive = displacement");
    }

    let uniform = HamiltonianSpec {
        hopping: Hopping::Uniform,
        ..HamiltonianSpec::drive(1.0, std::f64::consts::PI)
    };
    let lattice = evolve_hamiltonian(&fock_state(400, make_window(400, 120)).unwrap(), &uniform, 6.0, 1e-10).unwrap();
    let bessel = bessel_lattice_amplitudes(1.0, 6.0, -60..=60);
    if (-60i64..=60)
        .zip(bessel)
        .any(|(m, b)| (lattice.amplitude((400 + m) as u64) - b).norm() > 1e-8)
    {
        failed.push("Bessel lattice");
    }

    let poisson = photon_statistics(&coherent_state(Complex64::new(2.0, 0.0), make_window(0, 60)).unwrap());
    if (poisson.probability(4) - 0.195367).abs() > 1e-6 || (poisson.mean - 4.0).abs() > 1e-10 {
        failed.push("Poisson constructor");
    }

    let lens = LensParams::new(0.15, 4.0, Complex64::new(0.0, -0.35));
    let small = physical_schedule(Complex64::new(2.0, 0.0), 4, &[lens], 1.0, 1.0).unwrap();
    let policy = WindowPolicy {
        half_width: Some(25),
        auto_extend: false,
        tail_tol: 1e-9,
        ..WindowPolicy::default()
    };
    let initial = policy.initial_state(small.alpha).unwrap();
    let exact = dense_lindblad_oracle(&initial, &small, 0.2).unwrap();
    let mut config = EnsembleConfig::new(small, 0.2, 2000, 5);
    config.window = policy;
    let ensemble = ensemble_average_from(&initial, &config).unwrap();
    if (ensemble.mean_fidelity - exact).abs() > 3.0 * ensemble.standard_error {
        failed.push("trajectories vs master equation");
    }

    let idle = ProtocolSchedule {
        alpha: Complex64::new(0.0, 0.0),
        stages: vec![Stage::Evolution {
            hamiltonian: HamiltonianSpec::drive(0.0, 0.0),
            duration: 2.0,
        }],
        target: 6,
    };
    let mut config = EnsembleConfig::new(idle, 0.4, 2000, 9);
    config.snapshot_times = vec![0.5, 1.0, 2.0];
    let decay = ensemble_average_from(&fock_state(6, make_window(0, 30)).unwrap(), &config).unwrap();
    let decays = config
        .snapshot_times
        .iter()
        .zip(decay.mean_photon_number.iter().zip(&decay.photon_number_error))
        .all(|(t, (m, e))| (m - 6.0 * (-0.4 * t).exp()).abs() <= 3.0 * e);
    if !decays {
        failed.push("free decay");
    }

    let exact_fit = fit_power_law(&[(10.0, 3.0 * 10f64.powf(-0.3)), (1e3, 3.0 * 1e3f64.powf(-0.3))]).unwrap();
    if (exact_fit.exponent - 0.3).abs() > 1e-12 || (exact_fit.prefactor - 3.0).abs() > 1e-10 {
        failed.push("power-law fit");
    }

    let phi = curvature_guess(400.0);
    let tau = focal_drive_time(400.0, 1.0, phi).unwrap();
    let grid = LensGrid {
        phi0: [0.6, 0.8, 1.0, 1.2, 1.4].iter().map(|s| s * phi).collect(),
        center_offset: vec![-10.0, 0.0, 10.0],
        beta_re: vec![-0.1 * tau, 0.0, 0.1 * tau],
        beta_im: [0.7, 0.85, 1.0, 1.15, 1.3].iter().map(|s| -s * tau).collect(),
    };
    let (_, grid_best) = grid_search_oracle(400, &grid, &WindowPolicy::default()).unwrap();
    let mut config = OptimizationConfig::new(400, 1);
    config.restarts = 4;
    let optimized = optimize_lens_group(&config).unwrap();
    if optimized.fidelity < grid_best - 1e-3 {
        failed.push("optimizer vs grid");
    }
    let schedule = ProtocolSchedule::from_lenses(Complex64::new(20.0, 0.0), 400, &optimized.lenses);
    if (run_lens_group(&schedule, &WindowPolicy::default()).unwrap().fidelity - optimized.fidelity).abs() > 1e-9 {
        failed.push("optimizer re-validation");
    }

    let pass = failed.is_empty() && started.elapsed().as_secs() < 600;
    let detail = if failed.is_empty() {
        "norms, group identity, drive identity, Bessel, Poisson, trajectories vs master equation, free decay, \
         fit recovery, optimizer vs grid all hold"
            .to_string()
    } else {
        format!("failed: {}", failed.join(", "))
    };
    report.check(8, "invariants and oracles", pass, detail, started);
}

fn main() {
    let mut report = Report { failures: 0 };
    invariants(&mut report);
    focusing_run(&mut report);
    ridge(&mut report);

    let started = Instant::now();
    println!("      optimizing lens groups for N in {SCALING_N:?}, up to {MAX_LENSES} lenses");
    let table = scaling_table();
    fidelity_targets(&mut report, &table, started);
    fidelity_exponents(&mut report, &table, started);
    curvature_exponent(&mut report, &table, started);

    let row = &table[SCALING_N.iter().position(|&n| n == 2_500).unwrap()][1];
    loss_robustness(&mut report, &row.lenses[0], row.fidelity);

    println!("{} of 8 criteria failed", report.failures);
    if report.failures > 0 && std::env::var_os("FOCKLENS_STRICT_ACCEPTANCE").is_some() {
        std::process::exit(1);
    }
}
