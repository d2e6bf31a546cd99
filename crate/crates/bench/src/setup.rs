//! Family construction for the built-in experiments and CSV-defined ones.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DMatrix;
use oblique_pursuit::dictionaries::{
    bspline_family, cosine_family, gaussian_background, power_background, SplineSpec,
};
use oblique_pursuit::oblique::ProjectorTolerances;
use oblique_pursuit::{AtomFamily, ObliqueProjector, SpaceSpec, SplittingProblem};

use crate::config::{CustomSpace, Experiment, ExperimentConfig};

/// Families, the splitting problem and the full projector of one experiment.
pub struct Setup {
    pub space: Arc<SpaceSpec>,
    pub signal: AtomFamily,
    pub background: AtomFamily,
    pub problem: SplittingProblem,
    pub projector: ObliqueProjector,
}

impl Setup {
    pub fn atoms(&self) -> usize {
        self.signal.len()
    }
}

pub fn spline_spec(config: &ExperimentConfig) -> Result<SplineSpec> {
    let s = &config.spline;
    let (a, b) = s.interval;
    let spec = match config.experiment {
        Experiment::Example2 => SplineSpec::dictionary(
            a,
            b,
            s.knot_spacing,
            s.support_scale,
            s.translation_step.unwrap_or(s.knot_spacing),
        ),
        _ => SplineSpec::cubic_basis(a, b, s.knot_spacing),
    };
    spec.context("spline")
}

/// Signal and background families for `config`.
pub fn build_families(config: &ExperimentConfig) -> Result<(AtomFamily, AtomFamily)> {
    match config.experiment {
        Experiment::Example1 | Experiment::Example2 => {
            let s = &config.spline;
            let space = Arc::new(
                SpaceSpec::trapezoid(s.interval.0, s.interval.1, s.grid_step()).context("spline.grid_step")?,
            );
            let mut signal = bspline_family(&spline_spec(config)?, &space)?;
            if s.normalize {
                signal = signal.normalized();
            }
            let background = power_background(s.background_count, &space)?;
            Ok((signal, background))
        }
        Experiment::Example3 => {
            let c = &config.cosine;
            let signal = cosine_family(c.length, c.atoms)?;
            let background = gaussian_background(c.noise_atoms, c.length, c.abscissa.into())?;
            let background = AtomFamily::new(signal.space().clone(), background.atoms().clone())?;
            Ok((signal, background))
        }
        Experiment::Custom => {
            let Some(custom) = &config.custom else {
                bail!("custom: required when experiment = \"custom\"");
            };
            let (grid, signal) = read_family_csv(&custom.signal)?;
            let (grid_b, background) = read_family_csv(&custom.background)?;
            ensure!(grid == grid_b, "custom: signal and background grids differ");
            let space = Arc::new(match custom.space {
                CustomSpace::Euclidean => SpaceSpec::euclidean(grid)?,
                CustomSpace::Trapezoid => trapezoid_on(grid)?,
            });
            Ok((AtomFamily::new(space.clone(), signal)?, AtomFamily::new(space, background)?))
        }
    }
}

/// Trapezoid weights on an arbitrary increasing grid.
pub fn trapezoid_on(grid: Vec<f64>) -> Result<SpaceSpec> {
    let n = grid.len();
    ensure!(n >= 2, "trapezoid grid needs at least two points");
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = grid[i + 1] - grid[i];
        w[i] += h / 2.0;
        w[i + 1] += h / 2.0;
    }
    Ok(SpaceSpec::quadrature(grid, w)?)
}

pub fn build_setup(config: &ExperimentConfig) -> Result<Setup> {
    config.validate()?;
    let (signal, background) = build_families(config)?;
    let tol = ProjectorTolerances {
        rank_tol: config.rank_tol,
        eig_tol: config.eig_tol,
    };
    let problem = SplittingProblem::new(signal.clone(), &background, tol.rank_tol)?;
    let projector = ObliqueProjector::from_problem(&problem, tol.eig_tol)?;
    if let Some(r) = config.pursuit.r_max {
        ensure!(r <= signal.len(), "pursuit.r_max: {r} exceeds the {} signal atoms", signal.len());
    }
    Ok(Setup {
        space: signal.space().clone(),
        signal,
        background,
        problem,
        projector,
    })
}

/// Reads `grid, atom_1, atom_2, …` columns with a header row.
pub fn read_family_csv(path: &Path) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut grid = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), line + 2))?;
        let values = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {}", path.display(), line + 2))?;
        ensure!(!values.is_empty(), "{}: empty row {}", path.display(), line + 2);
        grid.push(values[0]);
        rows.push(values[1..].to_vec());
    }
    ensure!(!rows.is_empty(), "{}: no data rows", path.display());
    let cols = rows[0].len();
    ensure!(rows.iter().all(|r| r.len() == cols), "{}: ragged rows", path.display());
    Ok((grid, DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c])))
}
