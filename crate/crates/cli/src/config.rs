//! Run configuration: a flat TOML document, recipe defaults, validation.
//!
//! Every subcommand reads the same document format. A `recipe` key picks a
//! set of defaults; keys given in the document override them. `custom`
//! has no physics defaults, so every physical parameter must be spelled out.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipe {
    Fig1b,
    Fig1c,
    Fig1d,
    Fig2b,
    Fig2c,
    Fig3c,
    Fig3d,
    Custom,
}

impl Recipe {
    pub const ALL: [Recipe; 8] = [
        Recipe::Fig1b,
        Recipe::Fig1c,
        Recipe::Fig1d,
        Recipe::Fig2b,
        Recipe::Fig2c,
        Recipe::Fig3c,
        Recipe::Fig3d,
        Recipe::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Fig1b => "fig1b",
            Recipe::Fig1c => "fig1c",
            Recipe::Fig1d => "fig1d",
            Recipe::Fig2b => "fig2b",
            Recipe::Fig2c => "fig2c",
            Recipe::Fig3c => "fig3c",
            Recipe::Fig3d => "fig3d",
            Recipe::Custom => "custom",
        }
    }

    /// Subcommands that can run this recipe.
    pub fn commands(self) -> &'static [Command] {
        use Command::*;
        match self {
            Recipe::Fig1b | Recipe::Fig1c => &[Evolve],
            Recipe::Fig1d => &[SweepFocus],
            Recipe::Fig2b => &[Optimize],
            Recipe::Fig2c | Recipe::Fig3c => &[Scaling, Fit],
            Recipe::Fig3d => &[Trajectories],
            Recipe::Custom => &[Evolve, SweepFocus, Optimize, Scaling, Trajectories, Fit],
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recipe {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Recipe::ALL.into_iter().find(|r| r.name() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    SweepFocus,
    Optimize,
    Scaling,
    Trajectories,
    Fit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::SweepFocus => "sweep-focus",
            Command::Optimize => "optimize",
            Command::Scaling => "scaling",
            Command::Trajectories => "trajectories",
            Command::Fit => "fit",
        }
    }

    /// Keys this subcommand understands besides the common ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Evolve => &[
                "alpha",
                "kerr",
                "kerr_duration",
                "center",
                "drive_strength",
                "drive_phase",
                "drive_detuning",
                "drive_duration",
                "times",
                "t_step",
                "snapshot_stride",
                "tail_tol",
            ],
            Command::SweepFocus => &[
                "photon_number",
                "drive_strength",
                "phi_min",
                "phi_max",
                "phi_points",
                "time_max",
                "time_points",
                "tail_tol",
            ],
            Command::Optimize | Command::Scaling => &[
                "photon_numbers",
                "lenses",
                "restarts",
                "budget",
                "tolerance",
                "tail_tol",
            ],
            Command::Trajectories => &[
                "photon_number",
                "kerr",
                "drive_strength",
                "kerr_loss_ratios",
                "kappa",
                "trajectories",
                "lenses",
                "restarts",
                "budget",
                "tolerance",
                "tail_tol",
            ],
            Command::Fit => &["input", "x_column", "y_column", "series_column", "x_min"],
        }
    }

    /// Keys that must be present after defaults are applied.
    fn required(self) -> &'static [&'static str] {
        match self {
            Command::Evolve => &["alpha", "kerr", "kerr_duration", "drive_strength", "drive_duration"],
            Command::SweepFocus => &[
                "photon_number",
                "drive_strength",
                "phi_min",
                "phi_max",
                "phi_points",
                "time_max",
                "time_points",
            ],
            Command::Optimize | Command::Scaling => &["photon_numbers", "lenses"],
            Command::Trajectories => &["photon_number", "kerr", "drive_strength", "trajectories", "lenses"],
            Command::Fit => &["input", "x_column", "y_column"],
        }
    }

    /// Technical defaults shared by every recipe, `custom` included.
    fn defaults(self) -> &'static str {
        match self {
            Command::Evolve => "snapshot_stride = 1\ndrive_phase = 0.0\ndrive_detuning = 0.0\ntail_tol = 1e-12",
            Command::SweepFocus => "tail_tol = 1e-12",
            Command::Optimize | Command::Scaling | Command::Trajectories => {
                "restarts = 8\nbudget = 2000\ntolerance = 1e-4\ntail_tol = 1e-12"
            }
            Command::Fit => "",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const COMMON_KEYS: [&str; 4] = ["recipe", "seed", "workers", "out_dir"];

fn recipe_defaults(recipe: Recipe, command: Command) -> &'static str {
    match (recipe, command) {
        (Recipe::Fig1b, _) => {
            "alpha = 100.0\nkerr = 4.9e-3\nkerr_duration = 0.5\ndrive_strength = 1.0\n\
             drive_duration = 1.5\nt_step = 0.01\nsnapshot_stride = 1"
        }
        (Recipe::Fig1c, _) => {
            "alpha = 100.0\nkerr = 4.9e-3\nkerr_duration = 0.5\ndrive_strength = 1.0\n\
             drive_duration = 1.5\ntimes = [0.0, 0.5, 1.0, 1.25, 1.5, 1.576, 1.75, 2.0]\nsnapshot_stride = 1"
        }
        (Recipe::Fig1d, _) => {
            "photon_number = 10000.0\ndrive_strength = 1.0\nphi_min = 4.9e-4\nphi_max = 2.45e-3\n\
             phi_points = 17\ntime_max = 6.0\ntime_points = 301"
        }
        (Recipe::Fig2b, _) => "photon_numbers = [10000, 100000]\nlenses = 3",
        (Recipe::Fig2c, Command::Fit) => "x_column = \"N\"\ny_column = \"F\"\nseries_column = \"L\"",
        (Recipe::Fig2c, _) => "photon_numbers = [1000, 2500, 10000, 40000, 100000]\nlenses = 3",
        (Recipe::Fig3c, Command::Fit) => "x_column = \"N\"\ny_column = \"phi0\"\nx_min = 2500.0",
        (Recipe::Fig3c, _) => "photon_numbers = [2500, 10000, 40000, 100000]\nlenses = 1",
        (Recipe::Fig3d, _) => {
            "photon_number = 2500\nkerr = 4.9e-3\ndrive_strength = 1.0\n\
             kerr_loss_ratios = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0]\n\
             trajectories = 200\nlenses = 1"
        }
        (Recipe::Custom, _) => "",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    /// Real coherent amplitude of the initial state.
    pub alpha: f64,
    pub kerr: f64,
    pub kerr_duration: f64,
    /// Vertex of the Kerr parabola; defaults to `alpha^2`.
    pub center: Option<f64>,
    pub drive_strength: f64,
    pub drive_phase: f64,
    pub drive_detuning: f64,
    pub drive_duration: f64,
    /// Explicit snapshot times; otherwise every `t_step` over the run.
    pub times: Option<Vec<f64>>,
    pub t_step: Option<f64>,
    /// Keep every `snapshot_stride`-th photon number in the snapshot table.
    pub snapshot_stride: usize,
    pub tail_tol: f64,
}

impl EvolveParams {
    pub fn center(&self) -> f64 {
        self.center.unwrap_or(self.alpha * self.alpha)
    }

    pub fn total_duration(&self) -> f64 {
        self.kerr_duration + self.drive_duration
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        match (&self.times, self.t_step) {
            (Some(times), _) => times.clone(),
            (None, Some(step)) => {
                let total = self.total_duration();
                let count = (total / step * (1.0 + 1e-12)).floor() as usize;
                let mut times: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
                if total - times[count] > 1e-9 * step {
                    times.push(total);
                }
                times
            }
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocusParams {
    pub photon_number: f64,
    pub drive_strength: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub phi_points: usize,
    pub time_max: f64,
    pub time_points: usize,
    pub tail_tol: f64,
}

impl FocusParams {
    pub fn phi_grid(&self) -> Vec<f64> {
        linspace(self.phi_min, self.phi_max, self.phi_points)
    }

    pub fn time_grid(&self) -> Vec<f64> {
        linspace(0.0, self.time_max, self.time_points)
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { hi } else { lo + i as f64 * step })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeParams {
    pub photon_numbers: Vec<u64>,
    pub lenses: usize,
    pub restarts: usize,
    pub budget: usize,
    pub tolerance: f64,
    pub tail_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryParams {
    pub photon_number: u64,
    pub kerr: f64,
    pub drive_strength: f64,
    /// `chi / kappa` values; ignored when `kappa` is given.
    pub kerr_loss_ratios: Option<Vec<f64>>,
    /// Explicit loss rates.
    pub kappa: Option<Vec<f64>>,
    pub trajectories: usize,
    pub lenses: usize,
    pub restarts: usize,
    pub budget: usize,
    pub tolerance: f64,
    pub tail_tol: f64,
}

impl TrajectoryParams {
    pub fn loss_rates(&self) -> Vec<f64> {
        match (&self.kappa, &self.kerr_loss_ratios) {
            (Some(kappa), _) => kappa.clone(),
            (None, Some(ratios)) => ratios.iter().map(|r| self.kerr / r).collect(),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    /// CSV table to read; relative paths resolve against the working directory.
    pub input: PathBuf,
    pub x_column: String,
    pub y_column: String,
    /// Rows are grouped by this column, one fit per group.
    pub series_column: Option<String>,
    /// Rows with `x < x_min` are left out of the fit.
    pub x_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    Evolve(EvolveParams),
    SweepFocus(FocusParams),
    Optimize(OptimizeParams),
    Trajectories(TrajectoryParams),
    Fit(FitParams),
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub recipe: Recipe,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub params: Params,
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Parses and validates `text` for `command`.
pub fn parse_config(text: &str, command: Command, overrides: &Overrides) -> Result<RunConfig, HarnessError> {
    let document: Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Parse {
        message: e.message().to_string(),
        line: e.span().map(|s| line_of(text, s.start)),
        missing: Vec::new(),
    })?;

    let recipe = match document.get("recipe") {
        None => {
            return Err(HarnessError::Parse {
                message: "missing required keys".into(),
                line: None,
                missing: vec!["recipe".into()],
            })
        }
        Some(Value::String(name)) => name.parse::<Recipe>().map_err(|_| HarnessError::RangeViolation {
            key: "recipe".into(),
            message: format!(
                "unknown recipe `{name}`; expected one of {}",
                Recipe::ALL.map(|r| r.name()).join(", ")
            ),
        })?,
        Some(other) => {
            return Err(HarnessError::Parse {
                message: format!("`recipe` must be a string, found {}", other.type_str()),
                line: key_line(text, "recipe"),
                missing: Vec::new(),
            })
        }
    };
    if !recipe.commands().contains(&command) {
        return Err(HarnessError::RangeViolation {
            key: "recipe".into(),
            message: format!("recipe `{recipe}` does not run under `{command}`"),
        });
    }

    for key in document.keys() {
        if !COMMON_KEYS.contains(&key.as_str()) && !command.keys().contains(&key.as_str()) {
            return Err(HarnessError::UnknownKey {
                key: key.clone(),
                line: key_line(text, key),
                command: command.name().into(),
            });
        }
    }

    let mut merged: Table = command.defaults().parse().expect("built-in defaults parse");
    let recipe_table: Table = recipe_defaults(recipe, command)
        .parse()
        .expect("built-in defaults parse");
    merged.extend(recipe_table);
    for (key, value) in &document {
        if !COMMON_KEYS.contains(&key.as_str()) {
            merged.insert(key.clone(), value.clone());
        }
    }
    let missing: Vec<String> = command
        .required()
        .iter()
        .filter(|k| !merged.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    let mut missing = missing;
    if command == Command::Evolve && !merged.contains_key("times") && !merged.contains_key("t_step") {
        missing.push("times or t_step".into());
    }
    if command == Command::Trajectories && !merged.contains_key("kappa") && !merged.contains_key("kerr_loss_ratios") {
        missing.push("kappa or kerr_loss_ratios".into());
    }
    if !missing.is_empty() {
        return Err(HarnessError::Parse {
            message: format!("missing required keys for recipe `{recipe}` under `{command}`"),
            line: None,
            missing,
        });
    }

    let params = match command {
        Command::Evolve => Params::Evolve(typed(merged, text)?),
        Command::SweepFocus => Params::SweepFocus(typed(merged, text)?),
        Command::Optimize | Command::Scaling => Params::Optimize(typed(merged, text)?),
        Command::Trajectories => Params::Trajectories(typed(merged, text)?),
        Command::Fit => Params::Fit(typed(merged, text)?),
    };

    let seed = match overrides.seed {
        Some(seed) => seed,
        None => common(&document, "seed", text)?.unwrap_or(0),
    };
    let workers = match overrides.workers {
        Some(w) => w,
        None => common(&document, "workers", text)?.unwrap_or_else(default_workers),
    };
    let out_dir = match &overrides.out_dir {
        Some(dir) => dir.clone(),
        None => common::<String>(&document, "out_dir", text)?
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(format!("out/{}-{}", command.name(), recipe.name()))),
    };

    let config = RunConfig {
        command,
        recipe,
        seed,
        workers,
        out_dir,
        params,
    };
    validate(&config)?;
    Ok(config)
}

fn typed<T: DeserializeOwned>(table: Table, text: &str) -> Result<T, HarnessError> {
    T::deserialize(Value::Table(table)).map_err(|e| {
        let message = e.to_string();
        let line = message.split('`').nth(1).and_then(|key| key_line(text, key));
        HarnessError::Parse {
            message: message.trim().to_string(),
            line,
            missing: Vec::new(),
        }
    })
}

fn common<T: DeserializeOwned>(document: &Table, key: &str, text: &str) -> Result<Option<T>, HarnessError> {
    document
        .get(key)
        .map(|v| {
            T::deserialize(v.clone()).map_err(|e| HarnessError::Parse {
                message: format!("`{key}`: {}", e.to_string().trim()),
                line: key_line(text, key),
                missing: Vec::new(),
            })
        })
        .transpose()
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|line| {
            line.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

fn range(key: &str, ok: bool, message: impl FnOnce() -> String) -> Result<(), HarnessError> {
    if ok {
        Ok(())
    } else {
        Err(HarnessError::RangeViolation {
            key: key.into(),
            message: message(),
        })
    }
}

fn positive(key: &str, value: f64) -> Result<(), HarnessError> {
    range(key, value > 0.0 && value.is_finite(), || {
        format!("must be positive and finite, got {value}")
    })
}

fn non_negative(key: &str, value: f64) -> Result<(), HarnessError> {
    range(key, value >= 0.0 && value.is_finite(), || {
        format!("must be non-negative and finite, got {value}")
    })
}

fn validate(config: &RunConfig) -> Result<(), HarnessError> {
    range("workers", config.workers >= 1, || "need at least one worker".into())?;
    match &config.params {
        Params::Evolve(p) => {
            non_negative("alpha", p.alpha)?;
            non_negative("kerr", p.kerr)?;
            non_negative("kerr_duration", p.kerr_duration)?;
            non_negative("center", p.center())?;
            non_negative("drive_strength", p.drive_strength)?;
            non_negative("drive_duration", p.drive_duration)?;
            range("drive_phase", p.drive_phase.is_finite(), || "must be finite".into())?;
            range("drive_detuning", p.drive_detuning.is_finite(), || {
                "must be finite".into()
            })?;
            if let Some(step) = p.t_step {
                positive("t_step", step)?;
            }
            let total = p.total_duration();
            if let Some(times) = &p.times {
                range("times", !times.is_empty(), || "need at least one snapshot time".into())?;
                range(
                    "times",
                    times.windows(2).all(|w| w[0] <= w[1]) && times.iter().all(|&t| (0.0..=total).contains(&t)),
                    || format!("snapshot times must be ascending within [0, {total}]"),
                )?;
            }
            range("snapshot_stride", p.snapshot_stride >= 1, || {
                "must be at least 1".into()
            })?;
            positive("tail_tol", p.tail_tol)?;
        }
        Params::SweepFocus(p) => {
            positive("photon_number", p.photon_number)?;
            positive("drive_strength", p.drive_strength)?;
            positive("phi_min", p.phi_min)?;
            range("phi_max", p.phi_max >= p.phi_min && p.phi_max.is_finite(), || {
                format!("must be at least phi_min = {}", p.phi_min)
            })?;
            range("phi_points", p.phi_points >= 1, || "must be at least 1".into())?;
            positive("time_max", p.time_max)?;
            range("time_points", p.time_points >= 2, || "must be at least 2".into())?;
            positive("tail_tol", p.tail_tol)?;
        }
        Params::Optimize(p) => {
            range("photon_numbers", !p.photon_numbers.is_empty(), || {
                "need at least one photon number".into()
            })?;
            range("photon_numbers", p.photon_numbers.iter().all(|&n| n >= 1), || {
                "photon numbers must be at least 1".into()
            })?;
            range("restarts", p.restarts >= 1, || "must be at least 1".into())?;
            range("budget", p.budget >= 10, || "must be at least 10".into())?;
            positive("tolerance", p.tolerance)?;
            positive("tail_tol", p.tail_tol)?;
            if config.command == Command::Scaling {
                range("photon_numbers", p.photon_numbers.len() >= 2, || {
                    "a scaling fit needs at least two photon numbers".into()
                })?;
            }
        }
        Params::Trajectories(p) => {
            range("photon_number", p.photon_number >= 1, || "must be at least 1".into())?;
            positive("kerr", p.kerr)?;
            positive("drive_strength", p.drive_strength)?;
            if let Some(kappa) = &p.kappa {
                for &k in kappa {
                    non_negative("kappa", k)?;
                }
            } else if let Some(ratios) = &p.kerr_loss_ratios {
                for &r in ratios {
                    positive("kerr_loss_ratios", r)?;
                }
            }
            range("trajectories", p.trajectories >= 2, || {
                "need at least two trajectories".into()
            })?;
            range("lenses", p.lenses >= 1, || "need at least one lens".into())?;
            range("restarts", p.restarts >= 1, || "must be at least 1".into())?;
            range("budget", p.budget >= 10, || "must be at least 10".into())?;
            positive("tolerance", p.tolerance)?;
            positive("tail_tol", p.tail_tol)?;
        }
        Params::Fit(p) => {
            if let Some(x_min) = p.x_min {
                range("x_min", x_min.is_finite(), || "must be finite".into())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, command: Command) -> Result<RunConfig, HarnessError> {
        parse_config(text, command, &Overrides::default())
    }

    #[test]
    fn fig1b_defaults() {
        let config = parse("recipe = \"fig1b\"", Command::Evolve).unwrap();
        let Params::Evolve(p) = config.params else { panic!() };
        assert_eq!(p.alpha, 100.0);
        assert_eq!(p.kerr_duration, 0.5);
        assert_eq!(p.drive_strength, 1.0);
        assert_eq!(p.center(), 10000.0);
        let times = p.snapshot_times();
        assert_eq!(times.len(), 201);
        assert_eq!(*times.last().unwrap(), 2.0);
    }

    #[test]
    fn document_overrides_recipe() {
        let config = parse("recipe = \"fig1b\"\nalpha = 30.0\nseed = 9", Command::Evolve).unwrap();
        let Params::Evolve(p) = config.params else { panic!() };
        assert_eq!(p.alpha, 30.0);
        assert_eq!(config.seed, 9);
    }

    #[test]
    fn empty_custom_lists_required_keys() {
        match parse("recipe = \"custom\"", Command::Evolve) {
            Err(HarnessError::Parse { missing, .. }) => {
                assert!(missing.contains(&"alpha".to_string()));
                assert!(missing.contains(&"drive_duration".to_string()));
                assert!(missing.contains(&"times or t_step".to_string()));
            }
            other => panic!("{other:?}"),
        }
        match parse("", Command::Fit) {
            Err(HarnessError::Parse { missing, .. }) => assert_eq!(missing, ["recipe"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_kappa_is_a_range_violation() {
        let err = parse("recipe = \"fig3d\"\nkappa = [0.1, -0.2]", Command::Trajectories).unwrap_err();
        assert!(
            matches!(err, HarnessError::RangeViolation { ref key, .. } if key == "kappa"),
            "{err:?}"
        );
    }

    #[test]
    fn unknown_and_misplaced_keys() {
        let err = parse("recipe = \"fig1b\"\n\nalpah = 3.0", Command::Evolve).unwrap_err();
        assert!(
            matches!(err, HarnessError::UnknownKey { ref key, line: Some(3), .. } if key == "alpah"),
            "{err:?}"
        );
        let err = parse("recipe = \"fig1b\"\nkappa = [1.0]", Command::Evolve).unwrap_err();
        assert!(matches!(err, HarnessError::UnknownKey { .. }));
    }

    #[test]
    fn recipe_must_match_command() {
        let err = parse("recipe = \"fig1b\"", Command::Optimize).unwrap_err();
        assert!(matches!(err, HarnessError::RangeViolation { ref key, .. } if key == "recipe"));
        let err = parse("recipe = \"fig9\"", Command::Optimize).unwrap_err();
        assert!(matches!(err, HarnessError::RangeViolation { .. }));
    }

    #[test]
    fn syntax_and_type_errors_carry_lines() {
        let err = parse("recipe = \"fig1b\"\nalpha = = 3", Command::Evolve).unwrap_err();
        assert!(matches!(err, HarnessError::Parse { line: Some(2), .. }), "{err:?}");
        let err = parse("recipe = \"fig1b\"\nalpha = \"big\"", Command::Evolve).unwrap_err();
        assert!(matches!(err, HarnessError::Parse { .. }), "{err:?}");
    }

    #[test]
    fn command_line_overrides_win() {
        let overrides = Overrides {
            seed: Some(5),
            workers: Some(3),
            out_dir: Some("elsewhere".into()),
        };
        let config = parse_config(
            "recipe = \"fig2b\"\nseed = 1\nworkers = 2",
            Command::Optimize,
            &overrides,
        )
        .unwrap();
        assert_eq!((config.seed, config.workers), (5, 3));
        assert_eq!(config.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn linspace_hits_both_ends() {
        let grid = linspace(0.2, 1.0, 5);
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], 0.2);
        assert_eq!(grid[4], 1.0);
    }
}
