use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use oblique_bench::output::{emit_outputs, fmt_f64, write_columns_csv, write_spectrum_csv};
use oblique_bench::setup::read_family_csv;
use oblique_bench::{build_setup, run_sweep, run_experiment, BaselineMode, Experiment, ExperimentConfig};
use oblique_pursuit::{oblique_pursuit, AtomFamily};

#[derive(Parser)]
#[command(name = "oblique-bench", version, about = "Structured-noise splitting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run randomized trials and write report.json, summary.csv, spectrum.csv, plotdata/.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// off, signal, or fixed:<Q>.
        #[arg(long)]
        baseline: Option<BaselineMode>,
        /// Comma-separated sparsity levels; one report per level under <out>/k_<K>/.
        #[arg(long, value_delimiter = ',')]
        sparsity_sweep: Option<Vec<usize>>,
    },
    /// Write the singular spectrum of the projector.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Split one signal read from a CSV file with columns grid,value.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        signal: PathBuf,
    },
    /// Export the signal and background families as CSV.
    Families {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; command-line options take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match (&self.config, self.experiment) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(e)) => ExperimentConfig::for_experiment(e),
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(e) = self.experiment {
            c.experiment = e;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(h) = self.grid_step {
            c.spline.grid_step = Some(h);
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        Ok(c)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common, trials, k, baseline, sparsity_sweep } => {
            let mut c = common.resolve()?;
            if let Some(t) = trials {
                c.trials = t;
            }
            if let Some(k) = k {
                c.k = Some(k);
            }
            if let Some(b) = baseline {
                c.baseline = b;
            }
            match sparsity_sweep {
                Some(ks) => {
                    for run in run_sweep(&c, &ks)? {
                        let dir = c.output_dir.join(format!("k_{}", run.report.environment.k));
                        emit_outputs(&run, &dir)?;
                        print_summary(&run.report, &dir);
                    }
                }
                None => {
                    let run = run_experiment(&c)?;
                    emit_outputs(&run, &c.output_dir)?;
                    print_summary(&run.report, &c.output_dir);
                }
            }
        }
        Command::Spectrum { common } => {
            let c = common.resolve()?;
            let setup = build_setup(&c)?;
            std::fs::create_dir_all(&c.output_dir)?;
            let path = c.output_dir.join("spectrum.csv");
            write_spectrum_csv(setup.projector.sigma(), &path)?;
            let s = setup.projector.sigma();
            println!("atoms {}  rank {}  sigma_1 {}", setup.signal.len(), s.len(), fmt_f64(s[0]));
            let tail = &s[s.len().saturating_sub(5)..];
            println!("last: {}", tail.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", "));
            println!("wrote {}", path.display());
        }
        Command::Split { common, signal } => {
            let c = common.resolve()?;
            let setup = build_setup(&c)?;
            let (grid, values) = read_family_csv(&signal)?;
            ensure!(values.ncols() == 1, "{}: expected columns grid,value", signal.display());
            ensure!(grid.len() == setup.space.len(), "signal has {} samples, experiment grid has {}", grid.len(), setup.space.len());
            let mismatch = grid.iter().zip(setup.space.grid()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            ensure!(mismatch <= 1e-9, "signal grid differs from the experiment grid by {mismatch:e}");
            let f = DVector::from_column_slice(values.as_slice());
            let r = oblique_pursuit(&f, &setup.problem, &c.pursuit_config())?;
            let noise = &f - &r.component;
            std::fs::create_dir_all(&c.output_dir)?;
            let path = c.output_dir.join("components.csv");
            write_columns_csv(&path, &["grid", "f", "signal", "noise"], &[&grid, f.as_slice(), r.component.as_slice(), noise.as_slice()])?;
            let summary = serde_json::json!({
                "converged": r.converged,
                "support": r.support,
                "coefficients": r.coefficients,
                "restarts": r.diagnostics.restarts,
                "swaps": r.diagnostics.swaps,
                "final_residual": r.diagnostics.final_residual,
            });
            std::fs::write(c.output_dir.join("split.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            println!("converged {}  atoms {}  wrote {}", r.converged, r.support.len(), path.display());
        }
        Command::Families { common } => {
            let c = common.resolve()?;
            let (signal, background) = oblique_bench::setup::build_families(&c)?;
            std::fs::create_dir_all(&c.output_dir)?;
            for (name, fam) in [("signal", &signal), ("background", &background)] {
                let path = c.output_dir.join(format!("{name}.csv"));
                write_family(&path, fam)?;
                println!("wrote {} ({} atoms)", path.display(), fam.len());
            }
        }
    }
    Ok(())
}

fn write_family(path: &Path, fam: &AtomFamily) -> Result<()> {
    let labels: Vec<String> = match fam.labels() {
        Some(l) => l.to_vec(),
        None => (0..fam.len()).map(|i| format!("atom{i}")).collect(),
    };
    let mut header = vec!["grid"];
    header.extend(labels.iter().map(String::as_str));
    let mut cols: Vec<&[f64]> = vec![fam.space().grid()];
    cols.extend((0..fam.len()).map(|i| fam.atom(i)));
    write_columns_csv(path, &header, &cols).with_context(|| format!("writing {}", path.display()))
}

fn print_summary(report: &oblique_bench::ExperimentReport, dir: &Path) {
    let a = &report.aggregates;
    let e = &report.environment;
    println!(
        "{:?} K={} trials={} success={}/{} converged={} mean_error={} reinit={} swaps={}",
        e.experiment, e.k, a.trials, a.success_count, a.trials, a.converged_count,
        fmt_f64(a.mean_error), a.reinit_count, a.total_swaps
    );
    if let Some(b) = a.mean_baseline_error {
        println!("baseline mean_error={}", fmt_f64(b));
    }
    println!("wrote {}", dir.display());
}
