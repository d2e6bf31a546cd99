//! Acceptance run: one PASS/FAIL line per criterion; exits nonzero on any FAIL.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use oblique_bench::config::Abscissa;
use oblique_bench::{build_setup, run_with_setup, BaselineMode, Experiment, ExperimentConfig, RunOutput, Setup};
use oblique_pursuit::hilbert::project_orthogonal;
use oblique_pursuit::oblique::ProjectorTolerances;
use oblique_pursuit::{oblique_pursuit, ObliqueProjector, PursuitConfig, PursuitState, SplittingProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

const TOL: f64 = 1e-8;
const SIGMA_FIRST: f64 = 1.5018;
const SIGMA_TAIL: [f64; 5] = [0.2305, 0.2298, 9.3211e-4, 2.5829e-6, 2.5673e-7];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn problem(toy: &Toy) -> SplittingProblem {
    SplittingProblem::new(toy.v.clone(), &toy.wperp, 1e-10).unwrap()
}

fn spectrum(divisor: f64) -> Vec<f64> {
    let mut c = ExperimentConfig::for_experiment(Experiment::Example1);
    c.spline.grid_step = Some(c.spline.knot_spacing / divisor);
    build_setup(&c).unwrap().projector.sigma().to_vec()
}

fn c1_spectrum() -> Verdict {
    // refine until the leading value agrees to 4 digits between two grids
    let mut divisor = 16.0;
    let mut sigma = spectrum(divisor);
    let mut trail = vec![format!("h/{divisor}: {:.5}", sigma[0])];
    loop {
        let finer = spectrum(divisor * 2.0);
        trail.push(format!("h/{}: {:.5}", divisor * 2.0, finer[0]));
        let stable = format!("{:.3}", finer[0]) == format!("{:.3}", sigma[0]);
        sigma = finer;
        divisor *= 2.0;
        if stable || divisor >= 128.0 {
            break;
        }
    }
    let n = sigma.len();
    let tail = &sigma[n - 5..];
    let first_ok = (sigma[0] - SIGMA_FIRST).abs() <= 0.01 * SIGMA_FIRST;
    let tail_err: Vec<f64> = tail.iter().zip(SIGMA_TAIL).map(|(s, r)| (s - r).abs() / r).collect();
    let tail_ok = tail_err.iter().all(|&e| e <= 0.1);
    verdict(
        first_ok && tail_ok,
        format!(
            "N={n}, sigma_1={:.5} (ref {SIGMA_FIRST}, {}), tail {:.4e} {:.4e} {:.4e} {:.4e} {:.4e}, tail rel err max {:.3}; grids {}",
            sigma[0],
            if first_ok { "within 1%" } else { "outside 1%" },
            tail[0],
            tail[1],
            tail[2],
            tail[3],
            tail[4],
            tail_err.iter().copied().fold(0.0, f64::max),
            trail.join(", ")
        ),
    )
}

fn example_run(experiment: Experiment, abscissa: Option<Abscissa>) -> (Setup, RunOutput) {
    let mut c = ExperimentConfig::for_experiment(experiment);
    if let Some(a) = abscissa {
        c.cosine.abscissa = a;
    }
    c.trials = 50;
    c.plot_trials = 50;
    c.baseline = BaselineMode::SignalDependent;
    let setup = build_setup(&c).unwrap();
    let out = run_with_setup(&c, &setup).unwrap();
    (setup, out)
}

fn c2_example1(out: &RunOutput) -> Verdict {
    let a = &out.report.aggregates;
    let rel_ok = out.report.records.iter().all(|r| r.rel_error < 1e-6);
    verdict(
        a.success_count == 50 && a.trials == 50 && rel_ok,
        format!(
            "K={}, {}/{} successes, max rel error {:.3e}, swaps {}, restarts {}",
            out.report.environment.k, a.success_count, a.trials, a.max_error, a.total_swaps, a.total_restarts
        ),
    )
}

fn c3_truncation(setup: &Setup, out: &RunOutput) -> Verdict {
    let n = setup.projector.rank();
    let mut worst = f64::INFINITY;
    let mut trials = 0;
    for s in &out.signals {
        trials += 1;
        let truth_norm = setup.space.norm_of(s.truth.as_slice());
        for q in [n - 1, n - 2, n - 3] {
            let est = setup.projector.truncate(q).unwrap().apply(&s.f).unwrap();
            let e = setup.space.norm_of((&est - &s.truth).as_slice()) / truth_norm;
            worst = worst.min(e);
        }
    }
    verdict(
        trials == 50 && worst >= 0.1,
        format!("{trials} trials x Q in {{N-1, N-2, N-3}} (N={n}), smallest rel error {worst:.4}"),
    )
}

fn c4_example3(out: &RunOutput, covering: Option<&RunOutput>) -> Verdict {
    let a = &out.report.aggregates;
    verdict(
        a.success_count == 50 && a.trials == 50,
        format!(
            "K={}, {}/{} successes, max rel error {:.3e}, trials with restarts {} (total {}), swaps {}, projector rank {}{}",
            out.report.environment.k,
            a.success_count,
            a.trials,
            a.max_error,
            a.reinit_count,
            a.total_restarts,
            a.total_swaps,
            out.report.environment.projector_rank,
            covering.map_or(String::new(), |c| format!(
                "; covering abscissa (not judged): {}/{} successes, projector rank {}",
                c.report.aggregates.success_count, c.report.aggregates.trials, c.report.environment.projector_rank
            ))
        ),
    )
}

fn c5_baseline(out: &RunOutput, covering: Option<&RunOutput>) -> Verdict {
    let a = &out.report.aggregates;
    let recs = &out.report.records;
    let all_nonzero = recs.iter().all(|r| r.baseline_error.is_some_and(|b| b > 0.0));
    let beaten = recs
        .iter()
        .filter(|r| r.converged)
        .all(|r| r.baseline_error.is_some_and(|b| r.rel_error < b));
    let mean = a.mean_baseline_error.unwrap_or(f64::NAN);
    verdict(
        mean > 0.0 && all_nonzero && beaten,
        format!(
            "baseline mean error {mean:.4} (min {:.4}), pursuit below baseline on {}/{} converged trials{}",
            a.min_baseline_error.unwrap_or(f64::NAN),
            recs.iter().filter(|r| r.converged && r.baseline_error.is_some_and(|b| r.rel_error < b)).count(),
            a.converged_count,
            covering.map_or(String::new(), |c| format!(
                "; covering abscissa (not judged): baseline mean error {:.3e}, pursuit mean error {:.3e}",
                c.report.aggregates.mean_baseline_error.unwrap_or(f64::NAN),
                c.report.aggregates.mean_error
            ))
        ),
    )
}

fn c6_recursion() -> Verdict {
    let instances = 120;
    let mut steps = 0;
    let mut worst_w = 0.0f64;
    let mut choice_misses = 0;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(6_000 + seed);
        let m = rng.random_range(2..=15);
        let p_count = rng.random_range(0..=5);
        let n = rng.random_range(m + p_count + 2..=200);
        let space = if rng.random::<bool>() { euclid(n) } else { quad(n) };
        let toy = well_conditioned(&mut rng, space.clone(), m, p_count);
        let p = problem(&toy);
        let u = complement_oracle(&toy);
        let f = random_vector(&mut rng, n);
        let mut s = PursuitState::new(&f, &p, 1e-7).unwrap();
        let budget = rng.random_range(1..=10);
        for _ in 0..budget {
            let forward = s.selected().is_empty() || (s.selected().len() < m && rng.random_bool(0.65));
            if forward {
                let l = s.select_forward().unwrap();
                let scores: Vec<(usize, f64)> = (0..m)
                    .filter(|j| !s.selected().contains(j))
                    .map(|j| {
                        let mut sel = s.selected().to_vec();
                        sel.push(j);
                        (j, support_objective(&space, &u, &f, &sel))
                    })
                    .collect();
                let best = scores.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
                let chosen = scores.iter().find(|x| x.0 == l).map_or(f64::INFINITY, |x| x.1);
                if chosen > best + 1e-10 * nrm(&space, &f).max(1.0) {
                    choice_misses += 1;
                }
                s.forward_step(l).unwrap();
            } else {
                let j = s.selected()[rng.random_range(0..s.selected().len())];
                s.backward_step(j).unwrap();
            }
            steps += 1;
            if s.selected().is_empty() {
                continue;
            }
            let oracle = batch_measurement(&space, &u, s.selected());
            for (w, o) in s.measurement_vectors().iter().zip(&oracle) {
                worst_w = worst_w.max((w - o).amax() / o.amax().max(1.0));
            }
        }
    }
    verdict(
        worst_w <= TOL && choice_misses == 0,
        format!("{instances} instances, {steps} steps, max w deviation {worst_w:.2e}, forward choice misses {choice_misses}"),
    )
}

fn c7_projector() -> Verdict {
    let instances = 120;
    let mut worst = [0.0f64; 7];
    let names = ["idempotency", "biorthogonality", "P_W E = P_W", "uniqueness", "representations", "truncation", "sandwich"];
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(7_000 + seed);
        let m = rng.random_range(1..=8);
        let p_count = rng.random_range(0..=6);
        let space = if seed % 2 == 0 { euclid(40) } else { quad(41) };
        let toy = well_conditioned(&mut rng, space.clone(), m, p_count);
        let e = ObliqueProjector::build(&toy.v, &toy.wperp, &ProjectorTolerances::default()).unwrap();
        let f = random_vector(&mut rng, space.len());
        let ef = e.apply(&f).unwrap();

        worst[0] = worst[0].max(rel(&e.apply(&ef).unwrap(), &ef));

        let cross = weighted_gram(&space, e.xi().atoms(), e.eta().atoms());
        worst[1] = worst[1].max((cross - DMatrix::identity(e.rank(), e.rank())).amax());

        let pw_ef = project_orthogonal(e.xi(), &ef).unwrap();
        let pw_f = project_orthogonal(e.xi(), &f).unwrap();
        worst[2] = worst[2].max(rel(&pw_ef, &pw_f));

        let u = complement_oracle(&toy);
        let fm = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
        let c = weighted_gram(&space, &u, &u).lu().solve(&weighted_gram(&space, &u, &fm)).unwrap();
        let g = (toy.v.atoms() * c).column(0).into_owned();
        worst[3] = worst[3].max(rel(&g, &ef));

        let w = e.measurement_vectors();
        let mut via_w = DVector::zeros(space.len());
        for i in 0..m {
            via_w += toy.v.atom_vector(i) * ip(&space, &w.atom_vector(i), &f);
        }
        worst[4] = worst[4].max(rel(&via_w, &ef));

        for r in 1..e.rank() {
            let t = e.truncate(r).unwrap();
            for j in r..e.rank() {
                let xi = e.xi().atom_vector(j);
                let eta = e.eta().atom_vector(j);
                worst[5] = worst[5].max(t.apply(&xi).unwrap().norm());
                worst[5] = worst[5].max(t.apply(&eta).unwrap().norm() / eta.norm().max(1.0));
            }
        }

        let best = nrm(&space, &(&f - span_projection(&space, toy.v.atoms(), &f)));
        let oblique = nrm(&space, &(&f - &ef));
        let cos = e.min_angle().unwrap().cos();
        worst[6] = worst[6].max(best - oblique).max(oblique - best / cos);
    }
    let detail = names.iter().zip(worst).map(|(n, w)| format!("{n} {w:.1e}")).collect::<Vec<_>>().join(", ");
    verdict(worst.iter().all(|&w| w <= TOL), format!("{instances} toys; {detail}"))
}

fn c8_exhaustive() -> Verdict {
    let instances = 200;
    let mut hits = 0;
    let mut flagged_misses = 0;
    let mut silent_misses = 0;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(8_000 + seed);
        let m = rng.random_range(6..=14);
        let k = rng.random_range(1..=4);
        let delta = if seed % 2 == 0 { 1e-2 } else { 1e-3 };
        let space = euclid(30);
        let toy = ill_conditioned(&mut rng, space.clone(), m, 4, delta);
        let p = problem(&toy);
        let mut coeffs = vec![0.0; m];
        for i in rand::seq::index::sample(&mut rng, m, k) {
            coeffs[i] = rng.random_range(-1.0..1.0);
        }
        let f = toy.v.combine(&coeffs).unwrap() + toy.wperp.combine(&[0.5; 4]).unwrap();
        let u = complement_oracle(&toy);
        let best = combinations(m, k)
            .into_iter()
            .map(|s| (support_objective(&space, &u, &f, &s), s))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        let r = oblique_pursuit(&f, &p, &PursuitConfig::default()).unwrap();
        if r.sorted_support() == best {
            hits += 1;
        } else if r.converged {
            silent_misses += 1;
        } else {
            flagged_misses += 1;
        }
    }
    verdict(
        hits as f64 >= 0.95 * instances as f64 && silent_misses == 0,
        format!("{hits}/{instances} exhaustive matches, misses flagged {flagged_misses}, unflagged {silent_misses}"),
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        verdict(false, format!("panicked: {msg}"))
    })
}

fn report(id: usize, name: &str, start: Instant, v: &Verdict) {
    println!(
        "{} {id} {name}: {} [{:.1}s]",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        start.elapsed().as_secs_f64()
    );
}

fn main() -> ExitCode {
    let mut all = true;
    let mut record = |id: usize, name: &str, start: Instant, v: Verdict| {
        report(id, name, start, &v);
        all &= v.pass;
    };

    let t = Instant::now();
    record(1, "example 1 singular spectrum", t, guarded(c1_spectrum));

    let t = Instant::now();
    match catch_unwind(|| example_run(Experiment::Example1, None)) {
        Ok((setup, out)) => {
            record(2, "example 1 exact recovery", t, guarded(|| c2_example1(&out)));
            let t = Instant::now();
            record(3, "example 1 truncation failure", t, guarded(|| c3_truncation(&setup, &out)));
        }
        Err(_) => {
            record(2, "example 1 exact recovery", t, verdict(false, "run failed".into()));
            record(3, "example 1 truncation failure", t, verdict(false, "run failed".into()));
        }
    }

    let t = Instant::now();
    let covering = catch_unwind(|| example_run(Experiment::Example3, Some(Abscissa::Covering)).1).ok();
    match catch_unwind(|| example_run(Experiment::Example3, None)) {
        Ok((_, out)) => {
            record(4, "example 3 exact recovery", t, guarded(|| c4_example3(&out, covering.as_ref())));
            let t = Instant::now();
            record(5, "example 3 baseline behavior", t, guarded(|| c5_baseline(&out, covering.as_ref())));
        }
        Err(_) => {
            record(4, "example 3 exact recovery", t, verdict(false, "run failed".into()));
            record(5, "example 3 baseline behavior", t, verdict(false, "run failed".into()));
        }
    }

    let t = Instant::now();
    record(6, "recursive vs batch oracle", t, guarded(c6_recursion));
    let t = Instant::now();
    record(7, "projector properties", t, guarded(c7_projector));
    let t = Instant::now();
    record(8, "exhaustive support oracle", t, guarded(c8_exhaustive));

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
