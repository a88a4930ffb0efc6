//! One runner per subcommand. Each returns its tables plus a short JSON
//! summary for the manifest; nothing here touches the filesystem except
//! the `fit` input.

use std::collections::BTreeMap;

use focklens::lens::{sweep_focus_map, time_resolved_run, LensParams, ProtocolSchedule, Stage, WindowPolicy};
use focklens::open_system::{ensemble_average, physical_schedule, EnsembleConfig};
use focklens::optimize::{fit_power_law, optimize_lens_group, OptimizationConfig, OptimizationResult};
use focklens::oracles::poisson_pmf;
use focklens::{Complex64, HamiltonianSpec};
use serde_json::{json, Value};

use crate::config::{EvolveParams, FitParams, FocusParams, OptimizeParams, Params, RunConfig, TrajectoryParams};
use crate::error::{Context, HarnessError};
use crate::output::{bare_column, read_csv, Table};

pub struct RunOutput {
    pub tables: Vec<Table>,
    pub summary: Value,
}

pub fn run_recipe(config: &RunConfig) -> Result<RunOutput, HarnessError> {
    match &config.params {
        Params::Evolve(p) => evolve(p),
        Params::SweepFocus(p) => sweep_focus(p),
        Params::Optimize(p) if config.command == crate::config::Command::Scaling => scaling(p, config.seed),
        Params::Optimize(p) => optimize(p, config.seed).map(|(out, _)| out),
        Params::Trajectories(p) => trajectories(p, config.seed),
        Params::Fit(p) => fit(p),
    }
}

fn policy(tail_tol: f64) -> WindowPolicy {
    WindowPolicy {
        tail_tol,
        ..WindowPolicy::default()
    }
}

/// Kerr stage about `center`, then a drive.
pub fn kerr_drive_schedule(p: &EvolveParams) -> ProtocolSchedule {
    let drive = HamiltonianSpec {
        detuning: p.drive_detuning,
        ..HamiltonianSpec::drive(p.drive_strength, p.drive_phase)
    };
    ProtocolSchedule {
        alpha: Complex64::new(p.alpha, 0.0),
        stages: vec![
            Stage::Evolution {
                hamiltonian: HamiltonianSpec::kerr_centered(p.kerr, p.center()),
                duration: p.kerr_duration,
            },
            Stage::Evolution {
                hamiltonian: drive,
                duration: p.drive_duration,
            },
        ],
        target: p.center().round() as u64,
    }
}

fn evolve(p: &EvolveParams) -> Result<RunOutput, HarnessError> {
    let schedule = kerr_drive_schedule(p);
    let times = p.snapshot_times();
    let snapshots = time_resolved_run(&schedule, &times, &policy(p.tail_tol)).context(|| "time-resolved run".into())?;

    let mut distribution = Table::new(
        "snapshots",
        &["t [1/rate]", "n [photons]", "P [probability]", "CDF [probability]"],
    );
    let mut summary = Table::new(
        "summary",
        &[
            "t [1/rate]",
            "mean [photons]",
            "variance [photons^2]",
            "peak_n [photons]",
            "peak_P [probability]",
            "width_5_95 [photons]",
        ],
    );
    for snap in &snapshots {
        let stats = &snap.statistics;
        for (i, (prob, cdf)) in stats.probabilities.iter().zip(&stats.cdf).enumerate() {
            if i % p.snapshot_stride == 0 {
                distribution.push(vec![
                    snap.time.into(),
                    (stats.n_min + i as u64).into(),
                    (*prob).into(),
                    (*cdf).into(),
                ]);
            }
        }
        summary.push(vec![
            snap.time.into(),
            stats.mean.into(),
            stats.variance.into(),
            stats.peak_n.into(),
            stats.peak_value.into(),
            stats.cdf_width(0.05, 0.95).into(),
        ]);
    }

    let focus = snapshots
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.statistics
                .peak_value
                .total_cmp(&b.1.statistics.peak_value)
                .then(b.0.cmp(&a.0))
        })
        .map(|(_, s)| s);
    let summary_json = match (snapshots.first(), focus) {
        (Some(first), Some(focus)) => json!({
            "initial_peak": first.statistics.peak_value,
            "initial_width_5_95": first.statistics.cdf_width(0.05, 0.95),
            "focus_time": focus.time,
            "focus_peak": focus.statistics.peak_value,
            "focus_width_5_95": focus.statistics.cdf_width(0.05, 0.95),
        }),
        _ => json!({}),
    };
    Ok(RunOutput {
        tables: vec![distribution, summary],
        summary: summary_json,
    })
}

fn sweep_focus(p: &FocusParams) -> Result<RunOutput, HarnessError> {
    let map = sweep_focus_map(
        &p.phi_grid(),
        &p.time_grid(),
        p.photon_number,
        p.drive_strength,
        &policy(p.tail_tol),
    )
    .context(|| "focus map".into())?;
    let mut heatmap = Table::new("heatmap", &["phi0 [rad]", "t [1/rate]", "peakP [probability]"]);
    for (phi, row) in map.phi_grid.iter().zip(&map.peak) {
        for (t, peak) in map.time_grid.iter().zip(row) {
            heatmap.push(vec![(*phi).into(), (*t).into(), (*peak).into()]);
        }
    }
    let mut ridge = Table::new(
        "ridge",
        &[
            "phi0 [rad]",
            "best_t [1/rate]",
            "best_peakP [probability]",
            "focal_law_t [1/rate]",
            "ratio [1]",
        ],
    );
    for point in &map.ridge {
        ridge.push(vec![
            point.phi0.into(),
            point.best_time.into(),
            point.best_peak.into(),
            point.focal_time.into(),
            point.ratio().into(),
        ]);
    }
    let worst = map.ridge.iter().map(|r| (r.ratio() - 1.0).abs()).fold(0.0, f64::max);
    Ok(RunOutput {
        tables: vec![heatmap, ridge],
        summary: json!({ "max_ridge_deviation": worst }),
    })
}

/// Optimized lens groups for one photon number, `L = 0..=lenses`, each
/// warm-started from the previous.
fn optimize_chain(
    n: u64,
    lenses: usize,
    restarts: usize,
    budget: usize,
    tolerance: f64,
    tail_tol: f64,
    seed: u64,
) -> Result<Vec<OptimizationResult>, HarnessError> {
    let mut chain: Vec<OptimizationResult> = Vec::with_capacity(lenses + 1);
    for l in 0..=lenses {
        let mut config = OptimizationConfig::new(n, l);
        config.restarts = restarts;
        config.budget = budget;
        config.tolerance = tolerance;
        config.seed = seed;
        config.window = policy(tail_tol);
        if let Some(previous) = chain.last() {
            config.warm_start = previous.lenses.clone();
        }
        let result = optimize_lens_group(&config).context(|| format!("optimizing {l} lenses at N = {n}"))?;
        log::info!(
            "N = {n}, L = {l}: F = {:.6} after {} evaluations",
            result.fidelity,
            result.evaluations
        );
        chain.push(result);
    }
    Ok(chain)
}

type Chains = Vec<(u64, Vec<OptimizationResult>)>;

fn optimize(p: &OptimizeParams, seed: u64) -> Result<(RunOutput, Chains), HarnessError> {
    let mut chains = Vec::with_capacity(p.photon_numbers.len());
    for &n in &p.photon_numbers {
        chains.push((
            n,
            optimize_chain(n, p.lenses, p.restarts, p.budget, p.tolerance, p.tail_tol, seed)?,
        ));
    }

    let mut fidelity = Table::new("fidelity", &["N [photons]", "L [lenses]", "F [1]", "evaluations [1]"]);
    let mut lenses = Table::new(
        "lenses",
        &[
            "N [photons]",
            "L [lenses]",
            "lens [index]",
            "phi0 [rad]",
            "center [photons]",
            "beta_re [sqrt(photons)]",
            "beta_im [sqrt(photons)]",
        ],
    );
    let mut summary = serde_json::Map::new();
    for (n, chain) in &chains {
        for (l, result) in chain.iter().enumerate() {
            fidelity.push(vec![
                (*n).into(),
                l.into(),
                result.fidelity.into(),
                result.evaluations.into(),
            ]);
            for (k, lens) in result.lenses.iter().enumerate() {
                lenses.push(vec![
                    (*n).into(),
                    l.into(),
                    (k + 1).into(),
                    lens.phi0.into(),
                    lens.center.into(),
                    lens.beta.re.into(),
                    lens.beta.im.into(),
                ]);
            }
        }
        summary.insert(
            n.to_string(),
            json!(chain.iter().map(|r| r.fidelity).collect::<Vec<_>>()),
        );
    }
    Ok((
        RunOutput {
            tables: vec![fidelity, lenses],
            summary: json!({ "fidelity_by_lenses": summary }),
        },
        chains,
    ))
}

fn fits_table() -> Table {
    Table::new("fits", &["series", "x [1]", "y [1]", "residual [ln]"])
}

fn exponents_table() -> Table {
    Table::new(
        "exponents",
        &[
            "series",
            "prefactor [1]",
            "exponent [1]",
            "max_log_residual [ln]",
            "points [1]",
        ],
    )
}

/// Fits `y = a x^-y` to one series and appends rows to both tables.
fn fit_series(
    name: &str,
    samples: &[(f64, f64)],
    fits: &mut Table,
    exponents: &mut Table,
) -> Result<f64, HarnessError> {
    let fit = fit_power_law(samples).context(|| format!("fitting series {name}"))?;
    for &(x, y) in samples {
        fits.push(vec![
            name.into(),
            x.into(),
            y.into(),
            (y.ln() - fit.eval(x).ln()).into(),
        ]);
    }
    exponents.push(vec![
        name.into(),
        fit.prefactor.into(),
        fit.exponent.into(),
        fit.max_log_residual.into(),
        samples.len().into(),
    ]);
    Ok(fit.exponent)
}

fn scaling(p: &OptimizeParams, seed: u64) -> Result<RunOutput, HarnessError> {
    let (mut out, chains) = optimize(p, seed)?;
    let mut fits = fits_table();
    let mut exponents = exponents_table();
    let mut summary = serde_json::Map::new();
    for l in 0..=p.lenses {
        let samples: Vec<(f64, f64)> = chains.iter().map(|(n, chain)| (*n as f64, chain[l].fidelity)).collect();
        let name = format!("F_L{l}");
        let exponent = fit_series(&name, &samples, &mut fits, &mut exponents)?;
        summary.insert(name, json!(exponent));
    }
    if p.lenses >= 1 {
        let samples: Vec<(f64, f64)> = chains
            .iter()
            .map(|(n, chain)| (*n as f64, chain[1].lenses[0].phi0))
            .collect();
        if samples.iter().all(|s| s.1 > 0.0) {
            let exponent = fit_series("phi0_L1", &samples, &mut fits, &mut exponents)?;
            summary.insert("phi0_L1".into(), json!(exponent));
        } else {
            log::warn!("single-lens curvature changes sign; phi0 scaling not fitted");
        }
    }
    out.tables.push(fits);
    out.tables.push(exponents);
    out.summary["exponents"] = Value::Object(summary);
    Ok(out)
}

fn trajectories(p: &TrajectoryParams, seed: u64) -> Result<RunOutput, HarnessError> {
    let n = p.photon_number;
    let chain = optimize_chain(n, p.lenses, p.restarts, p.budget, p.tolerance, p.tail_tol, seed)?;
    let closed = chain.last().expect("at least one lens");
    let alpha = Complex64::new((n as f64).sqrt(), 0.0);
    let schedule = physical_schedule(alpha, n, &closed.lenses, p.kerr, p.drive_strength)
        .context(|| "timing the optimized lenses".into())?;
    let coherent = chain[0].fidelity;

    let mut table = Table::new(
        "open_system",
        &[
            "N [photons]",
            "chi_over_kappa [1]",
            "kappa [rate]",
            "F [1]",
            "stderr [1]",
            "F_closed [1]",
            "F_coherent [1]",
            "F_no_lens [1]",
            "mean_jumps [1]",
        ],
    );
    let mut rows = Vec::new();
    for kappa in p.loss_rates() {
        let mut config = EnsembleConfig::new(schedule.clone(), kappa, p.trajectories, seed);
        config.window = policy(p.tail_tol);
        let result = ensemble_average(&config).context(|| format!("ensemble at kappa = {kappa}"))?;
        let jumps: u64 = result
            .jump_histogram
            .iter()
            .enumerate()
            .map(|(k, c)| k as u64 * c)
            .sum();
        let ratio = p.kerr / kappa;
        // the coherent state idles under loss for the same duration; it
        // stays coherent with mean N exp(-kappa T)
        let no_lens = poisson_pmf(n as f64 * (-kappa * schedule.total_duration()).exp(), n);
        table.push(vec![
            n.into(),
            ratio.into(),
            kappa.into(),
            result.mean_fidelity.into(),
            result.standard_error.into(),
            closed.fidelity.into(),
            coherent.into(),
            no_lens.into(),
            (jumps as f64 / result.trajectories as f64).into(),
        ]);
        rows.push(json!({ "chi_over_kappa": ratio, "F": result.mean_fidelity, "stderr": result.standard_error }));
    }
    let lenses: Vec<LensParams> = closed.lenses.clone();
    Ok(RunOutput {
        tables: vec![table],
        summary: json!({
            "closed_fidelity": closed.fidelity,
            "coherent_fidelity": coherent,
            "lenses": lenses,
            "total_duration": schedule.total_duration(),
            "ensembles": rows,
        }),
    })
}

fn fit(p: &FitParams) -> Result<RunOutput, HarnessError> {
    let (header, rows) = read_csv(&p.input)?;
    let column = |name: &str| {
        header
            .iter()
            .position(|h| bare_column(h) == name)
            .ok_or_else(|| HarnessError::Table {
                path: p.input.clone(),
                message: format!("no column `{name}`; have {}", header.join(", ")),
            })
    };
    let x = column(&p.x_column)?;
    let y = column(&p.y_column)?;
    let series = p.series_column.as_deref().map(column).transpose()?;

    let number = |row: usize, cell: &str| {
        cell.parse::<f64>().map_err(|_| HarnessError::Table {
            path: p.input.clone(),
            message: format!("row {}: `{cell}` is not a number", row + 2),
        })
    };
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        let (xv, yv) = (number(i, &row[x])?, number(i, &row[y])?);
        if p.x_min.is_some_and(|m| xv < m) {
            continue;
        }
        let key = match series {
            Some(s) => format!("{}={}", p.series_column.as_deref().unwrap_or_default(), row[s]),
            None => p.y_column.clone(),
        };
        groups.entry(key).or_default().push((xv, yv));
    }
    if groups.is_empty() {
        return Err(HarnessError::Table {
            path: p.input.clone(),
            message: "no rows left to fit".into(),
        });
    }

    let mut fits = fits_table();
    let mut exponents = exponents_table();
    let mut summary = serde_json::Map::new();
    for (name, samples) in &groups {
        let exponent = fit_series(name, samples, &mut fits, &mut exponents)?;
        summary.insert(name.clone(), json!(exponent));
    }
    Ok(RunOutput {
        tables: vec![fits, exponents],
        summary: json!({ "exponents": summary }),
    })
}
