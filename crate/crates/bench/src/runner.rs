use anyhow::{ensure, Result};
use nalgebra::DVector;
use oblique_pursuit::dictionaries::{random_background, random_sparse_signal};
use oblique_pursuit::oblique_pursuit;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::truncated_svd_baseline;
use crate::config::{BaselineMode, Experiment, ExperimentConfig};
use crate::setup::{build_setup, Setup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub success: bool,
    pub converged: bool,
    pub support_exact: bool,
    /// `‖f1_est − f1‖ / ‖f1‖`, or the absolute error when `f1 = 0`.
    pub rel_error: f64,
    pub error_is_absolute: bool,
    pub support_size: usize,
    pub restarts: usize,
    pub swaps: usize,
    pub forward_steps: usize,
    pub backward_steps: usize,
    pub max_swap_depth: usize,
    pub final_residual: f64,
    pub baseline_q: Option<usize>,
    pub baseline_error: Option<f64>,
    /// Numerical failure that prevented the trial from finishing.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: usize,
    pub success_count: usize,
    pub converged_count: usize,
    pub mean_error: f64,
    pub max_error: f64,
    pub mean_baseline_error: Option<f64>,
    pub min_baseline_error: Option<f64>,
    /// Trials that needed at least one restart.
    pub reinit_count: usize,
    pub total_restarts: usize,
    pub total_swaps: usize,
    /// Converged trials where the baseline beat the pursuit.
    pub baseline_better_count: usize,
}

impl Aggregates {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let n = records.len();
        let finite: Vec<f64> = records.iter().map(|r| r.rel_error).filter(|e| e.is_finite()).collect();
        let mean = |xs: &[f64]| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        let baseline: Vec<f64> = records.iter().filter_map(|r| r.baseline_error).collect();
        Self {
            trials: n,
            success_count: records.iter().filter(|r| r.success).count(),
            converged_count: records.iter().filter(|r| r.converged).count(),
            mean_error: mean(&finite),
            max_error: finite.iter().copied().fold(0.0, f64::max),
            mean_baseline_error: (!baseline.is_empty()).then(|| mean(&baseline)),
            min_baseline_error: (!baseline.is_empty()).then(|| baseline.iter().copied().fold(f64::INFINITY, f64::min)),
            reinit_count: records.iter().filter(|r| r.restarts > 0).count(),
            total_restarts: records.iter().map(|r| r.restarts).sum(),
            total_swaps: records.iter().map(|r| r.swaps).sum(),
            baseline_better_count: records
                .iter()
                .filter(|r| r.converged && r.baseline_error.is_some_and(|b| b < r.rel_error))
                .count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub experiment: Experiment,
    pub k: usize,
    pub seed: u64,
    pub samples: usize,
    pub grid_step: Option<f64>,
    pub knot_spacing: Option<f64>,
    pub signal_atoms: usize,
    pub background_atoms: usize,
    pub background_rank: usize,
    pub projector_rank: usize,
    pub sigma_first: f64,
    pub sigma_last: f64,
    pub min_angle: f64,
    pub coefficient_law: String,
    pub notes: Vec<String>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub environment: Environment,
    pub records: Vec<TrialRecord>,
    pub aggregates: Aggregates,
}

/// Sampled signals of one trial, for plotting.
#[derive(Debug, Clone)]
pub struct TrialSignals {
    pub trial: usize,
    pub f: DVector<f64>,
    pub truth: DVector<f64>,
    pub estimate: DVector<f64>,
    pub baseline: Option<DVector<f64>>,
}

pub struct RunOutput {
    pub report: ExperimentReport,
    pub signals: Vec<TrialSignals>,
    pub sigma: Vec<f64>,
    pub grid: Vec<f64>,
}

fn environment(config: &ExperimentConfig, setup: &Setup) -> Environment {
    let sigma = setup.projector.sigma();
    let spline = matches!(config.experiment, Experiment::Example1 | Experiment::Example2);
    let mut notes = Vec::new();
    if spline && config.spline.normalize {
        notes.push("signal atoms scaled to unit norm".to_string());
    }
    if config.experiment == Experiment::Example3 {
        notes.push(format!("gaussian abscissa: {:?}", config.cosine.abscissa).to_lowercase());
    }
    if config.fixed_background {
        notes.push("background drawn once per run".to_string());
    }
    Environment {
        experiment: config.experiment,
        k: config.k(),
        seed: config.seed,
        samples: setup.space.len(),
        grid_step: spline.then(|| config.spline.grid_step()),
        knot_spacing: spline.then_some(config.spline.knot_spacing),
        signal_atoms: setup.signal.len(),
        background_atoms: setup.background.len(),
        background_rank: setup.problem.wperp_basis().len(),
        projector_rank: setup.projector.rank(),
        sigma_first: sigma[0],
        sigma_last: sigma[sigma.len() - 1],
        min_angle: setup.projector.min_angle().unwrap_or(f64::NAN),
        coefficient_law: format!(
            "signal uniform on [{}, {}], background uniform on [{}, {}]",
            config.signal_coeffs.0, config.signal_coeffs.1, config.background_coeffs.0, config.background_coeffs.1
        ),
        notes,
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Generator of trial `t`; stream 0 is reserved for the fixed background.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

fn background_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

struct Trial {
    record: TrialRecord,
    signals: TrialSignals,
}

fn run_trial(config: &ExperimentConfig, setup: &Setup, fixed_bg: Option<&DVector<f64>>, t: usize) -> Result<Trial> {
    let mut rng = trial_rng(config.seed, t);
    let sparse = random_sparse_signal(&setup.signal, config.k(), &mut rng, config.signal_coeffs)?;
    let bg = match fixed_bg {
        Some(b) => b.clone(),
        None => random_background(&setup.background, &mut rng, config.background_coeffs)?.1,
    };
    let f = &sparse.component + &bg;
    let space = &setup.space;
    let truth_norm = space.norm_of(sparse.component.as_slice());
    let error_of = |est: &DVector<f64>| {
        let e = space.norm_of((est - &sparse.component).as_slice());
        if truth_norm > 0.0 {
            e / truth_norm
        } else {
            e
        }
    };

    let mut record = TrialRecord {
        trial: t,
        success: false,
        converged: false,
        support_exact: false,
        rel_error: f64::NAN,
        error_is_absolute: truth_norm == 0.0,
        support_size: 0,
        restarts: 0,
        swaps: 0,
        forward_steps: 0,
        backward_steps: 0,
        max_swap_depth: 0,
        final_residual: f64::NAN,
        baseline_q: None,
        baseline_error: None,
        failure: None,
    };
    let mut estimate = DVector::zeros(f.len());
    match oblique_pursuit(&f, &setup.problem, &config.pursuit_config()) {
        Ok(r) => {
            record.converged = r.converged;
            record.support_exact = r.sorted_support() == sparse.support;
            record.rel_error = error_of(&r.component);
            record.support_size = r.support.len();
            record.restarts = r.diagnostics.restarts;
            record.swaps = r.diagnostics.swaps;
            record.forward_steps = r.diagnostics.forward_steps;
            record.backward_steps = r.diagnostics.backward_steps;
            record.max_swap_depth = r.diagnostics.max_swap_depth_used;
            record.final_residual = r.diagnostics.final_residual;
            let bar = if record.error_is_absolute { config.pursuit.stop_tol } else { config.success_tol };
            record.success = record.support_exact && record.rel_error <= bar;
            estimate = r.component;
        }
        Err(e) => record.failure = Some(e.to_string()),
    }

    let fixed_q = match config.baseline {
        BaselineMode::Off => None,
        BaselineMode::SignalDependent => Some(None),
        BaselineMode::Fixed(q) => Some(Some(q.min(setup.projector.rank()))),
    };
    let mut baseline = None;
    if let Some(q) = fixed_q {
        match truncated_svd_baseline(&f, &setup.projector, &setup.problem, q) {
            Ok(b) => {
                record.baseline_q = Some(b.q);
                record.baseline_error = Some(error_of(&b.approximation));
                baseline = Some(b.approximation);
            }
            Err(e) => {
                let msg = format!("baseline: {e}");
                record.failure = Some(match record.failure.take() {
                    Some(prev) => format!("{prev}; {msg}"),
                    None => msg,
                });
            }
        }
    }

    Ok(Trial {
        record,
        signals: TrialSignals {
            trial: t,
            f,
            truth: sparse.component,
            estimate,
            baseline,
        },
    })
}

/// Runs every trial of `config` on a prebuilt setup. Trials run in parallel;
/// each draws from its own stream so the result does not depend on scheduling.
pub fn run_with_setup(config: &ExperimentConfig, setup: &Setup) -> Result<RunOutput> {
    config.validate()?;
    ensure!(
        config.k() <= setup.atoms(),
        "k: {} exceeds the {} signal atoms",
        config.k(),
        setup.atoms()
    );
    let fixed_bg = if config.fixed_background {
        Some(random_background(&setup.background, &mut background_rng(config.seed), config.background_coeffs)?.1)
    } else {
        None
    };
    let trials: Vec<Trial> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, setup, fixed_bg.as_ref(), t))
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(trials.len());
    let mut signals = Vec::new();
    for trial in trials {
        if trial.record.trial < config.plot_trials {
            signals.push(trial.signals);
        }
        records.push(trial.record);
    }
    let aggregates = Aggregates::from_records(&records);
    Ok(RunOutput {
        report: ExperimentReport {
            config: config.clone(),
            environment: environment(config, setup),
            records,
            aggregates,
        },
        signals,
        sigma: setup.projector.sigma().to_vec(),
        grid: setup.space.grid().to_vec(),
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    let setup = build_setup(config)?;
    run_with_setup(config, &setup)
}

/// One run per sparsity level, sharing the families.
pub fn run_sweep(config: &ExperimentConfig, ks: &[usize]) -> Result<Vec<RunOutput>> {
    let setup = build_setup(config)?;
    ks.iter()
        .map(|&k| {
            let c = ExperimentConfig { k: Some(k), ..config.clone() };
            run_with_setup(&c, &setup)
        })
        .collect()
}
