use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use oblique_pursuit::dictionaries::GaussianAbscissa;
use oblique_pursuit::PursuitConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Cubic B-spline basis against a power-law background.
    Example1,
    /// Broader B-spline dictionary over the same knots, same background.
    Example2,
    /// Cosine vectors against Gaussian bumps in R^L.
    Example3,
    /// Families read from CSV files.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "q")]
pub enum BaselineMode {
    Off,
    /// `Q` minimizing `‖P_W f − P_{W̃_Q} f‖`.
    SignalDependent,
    /// Fixed number of kept terms.
    Fixed(usize),
}

impl std::str::FromStr for BaselineMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "off" => Ok(Self::Off),
            "signal" | "signal-dependent" | "signal_dependent" => Ok(Self::SignalDependent),
            other => match other.strip_prefix("fixed:").map(str::parse) {
                Some(Ok(q)) => Ok(Self::Fixed(q)),
                _ => Err(format!("expected off, signal or fixed:<Q>, got {other:?}")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Abscissa {
    Scaled,
    Literal,
    Covering,
}

impl From<Abscissa> for GaussianAbscissa {
    fn from(a: Abscissa) -> Self {
        match a {
            Abscissa::Scaled => GaussianAbscissa::Scaled,
            Abscissa::Literal => GaussianAbscissa::Literal,
            Abscissa::Covering => GaussianAbscissa::Covering,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CustomSpace {
    Euclidean,
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PursuitSettings {
    pub stop_tol: f64,
    pub stab_tol: f64,
    pub r_max: Option<usize>,
    pub max_swap_depth: usize,
    pub max_restarts: usize,
    pub swap_min_improvement: f64,
    pub prune: bool,
}

impl Default for PursuitSettings {
    fn default() -> Self {
        PursuitConfig::default().into()
    }
}

impl From<PursuitConfig> for PursuitSettings {
    fn from(c: PursuitConfig) -> Self {
        Self {
            stop_tol: c.stop_tol,
            stab_tol: c.stab_tol,
            r_max: c.r_max,
            max_swap_depth: c.max_swap_depth,
            max_restarts: c.max_restarts,
            swap_min_improvement: c.swap_min_improvement,
            prune: c.prune,
        }
    }
}

impl From<&PursuitSettings> for PursuitConfig {
    fn from(s: &PursuitSettings) -> Self {
        Self {
            stop_tol: s.stop_tol,
            stab_tol: s.stab_tol,
            r_max: s.r_max,
            max_swap_depth: s.max_swap_depth,
            max_restarts: s.max_restarts,
            swap_min_improvement: s.swap_min_improvement,
            prune: s.prune,
        }
    }
}

/// Parameters of the B-spline experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplineSettings {
    pub interval: (f64, f64),
    pub knot_spacing: f64,
    /// Quadrature step; `knot_spacing / 16` when absent.
    pub grid_step: Option<f64>,
    pub background_count: usize,
    /// Scale every signal atom to unit norm.
    pub normalize: bool,
    /// Dictionary support scale (Example 2).
    pub support_scale: usize,
    /// Dictionary translation step (Example 2); `knot_spacing` when absent.
    pub translation_step: Option<f64>,
}

impl Default for SplineSettings {
    fn default() -> Self {
        Self {
            interval: (0.0, 10.0),
            knot_spacing: 0.0625,
            grid_step: None,
            background_count: 50,
            normalize: true,
            support_scale: 2,
            translation_step: None,
        }
    }
}

impl SplineSettings {
    pub fn grid_step(&self) -> f64 {
        self.grid_step.unwrap_or(self.knot_spacing / 16.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CosineSettings {
    pub length: usize,
    pub atoms: usize,
    pub noise_atoms: usize,
    pub abscissa: Abscissa,
}

impl Default for CosineSettings {
    fn default() -> Self {
        Self {
            length: 1000,
            atoms: 210,
            noise_atoms: 400,
            abscissa: Abscissa::Scaled,
        }
    }
}

/// CSV families: first column the grid, one column per atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSettings {
    pub signal: PathBuf,
    pub background: PathBuf,
    pub space: CustomSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub trials: usize,
    /// Sparsity; the experiment's usual value when absent.
    pub k: Option<usize>,
    pub seed: u64,
    pub signal_coeffs: (f64, f64),
    pub background_coeffs: (f64, f64),
    /// Draw the background once per run instead of once per trial.
    pub fixed_background: bool,
    pub rank_tol: f64,
    pub eig_tol: f64,
    pub pursuit: PursuitSettings,
    pub baseline: BaselineMode,
    pub output_dir: PathBuf,
    /// Trials whose signals are written to `plotdata/`.
    pub plot_trials: usize,
    /// Support exactness and `rel_error` bound for a trial to count as a success.
    pub success_tol: f64,
    pub spline: SplineSettings,
    pub cosine: CosineSettings,
    pub custom: Option<CustomSettings>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Example1,
            trials: 50,
            k: None,
            seed: 2007,
            signal_coeffs: (-1.0, 1.0),
            background_coeffs: (0.0, 1.0),
            fixed_background: true,
            rank_tol: 1e-10,
            eig_tol: 1e-14,
            pursuit: PursuitSettings::default(),
            baseline: BaselineMode::SignalDependent,
            output_dir: PathBuf::from("out"),
            plot_trials: 3,
            success_tol: 1e-6,
            spline: SplineSettings::default(),
            cosine: CosineSettings::default(),
            custom: None,
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        let mut c = Self { experiment, ..Self::default() };
        if experiment == Experiment::Example3 {
            c.spline.normalize = false;
        }
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).context("parsing experiment config")?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(match self.experiment {
            Experiment::Example1 | Experiment::Example2 => 70,
            Experiment::Example3 => 90,
            Experiment::Custom => 1,
        })
    }

    pub fn pursuit_config(&self) -> PursuitConfig {
        (&self.pursuit).into()
    }

    /// Field-level checks that do not need the families.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials: must be at least 1");
        }
        for (name, (lo, hi)) in [("signal_coeffs", self.signal_coeffs), ("background_coeffs", self.background_coeffs)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                bail!("{name}: need finite lo <= hi, got ({lo}, {hi})");
            }
        }
        if !(self.rank_tol > 0.0) {
            bail!("rank_tol: must be positive");
        }
        if !(self.eig_tol > 0.0) {
            bail!("eig_tol: must be positive");
        }
        if !(self.success_tol > 0.0) {
            bail!("success_tol: must be positive");
        }
        let p = &self.pursuit;
        for (name, x) in [
            ("pursuit.stop_tol", p.stop_tol),
            ("pursuit.stab_tol", p.stab_tol),
            ("pursuit.swap_min_improvement", p.swap_min_improvement),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                bail!("{name}: must be positive");
            }
        }
        if p.r_max == Some(0) {
            bail!("pursuit.r_max: must be at least 1");
        }
        let s = &self.spline;
        if !(s.knot_spacing > 0.0) {
            bail!("spline.knot_spacing: must be positive");
        }
        if !(s.grid_step() > 0.0) {
            bail!("spline.grid_step: must be positive");
        }
        if s.background_count == 0 {
            bail!("spline.background_count: must be at least 1");
        }
        if s.support_scale == 0 {
            bail!("spline.support_scale: must be at least 1");
        }
        if matches!(s.translation_step, Some(t) if !(t > 0.0)) {
            bail!("spline.translation_step: must be positive");
        }
        let c = &self.cosine;
        if c.atoms == 0 || c.atoms > c.length {
            bail!("cosine.atoms: need 1 <= atoms <= length");
        }
        if c.noise_atoms == 0 {
            bail!("cosine.noise_atoms: must be at least 1");
        }
        if self.experiment == Experiment::Custom && self.custom.is_none() {
            bail!("custom: required when experiment = \"custom\"");
        }
        if let BaselineMode::Fixed(0) = self.baseline {
            bail!("baseline: fixed Q must be at least 1");
        }
        Ok(())
    }
}
