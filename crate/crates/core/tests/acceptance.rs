//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `HJB_FULL_SCALE=1` to also run the long 2D self-convergence job.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hjb_upwind::analysis::properties::{
    comparison_suite, constant_shift_suite, derivative_correspondence, monotonicity_suite,
    stability_suite, PropertyOutcome, Subject,
};
use hjb_upwind::analysis::{
    convergence_study_lqr, epi_diagnostic, self_convergence_study, MeasurementRegion, Resolution,
};
use hjb_upwind::cli::{cmd_convergence, RunConfig};
use hjb_upwind::conservation::{evolve_derivative, total_variation, Side};
use hjb_upwind::{
    rollout, solve, GridSpec, LqrBenchmark, ObstacleBenchmark2D, SolveResult, SolverOptions,
};

const LADDER: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

/// v(x, t) = tanh(1 - t) x^2 / 2 on T = 1.
fn lqr_value(x: f64, t: f64) -> f64 {
    0.5 * (1.0 - t).tanh() * x * x
}

fn lqr_gradient(x: f64, t: f64) -> f64 {
    (1.0 - t).tanh() * x
}

fn lqr_solve(dx: f64) -> SolveResult {
    let g = GridSpec::from_steps(1, 1.0, dx, 1.0, 0.5 * dx).unwrap();
    solve(&LqrBenchmark::default(), &g, &SolverOptions::default()).unwrap()
}

fn ladder(alpha: f64) -> Vec<Resolution> {
    LADDER.iter().map(|&dx| Resolution::with_ratio(dx, alpha)).collect()
}

fn interior() -> MeasurementRegion {
    MeasurementRegion::interior_half(1, 1.0, 1.0)
}

fn study_single_threaded() -> (hjb_upwind::analysis::ConvergenceReport, Duration) {
    let start = Instant::now();
    let report = convergence_study_lqr(
        &ladder(0.5),
        1.0,
        1.0,
        &interior(),
        &SolverOptions::sequential(),
    )
    .unwrap();
    (report, start.elapsed())
}

fn criterion_1() -> Verdict {
    let (r, elapsed) = study_single_threaded();
    let order = r.fitted_order_value.unwrap();
    verdict(
        (0.8..=1.2).contains(&order) && elapsed < Duration::from_secs(60),
        format!("value order {order:.4} in [0.8, 1.2], single-threaded study {elapsed:.2?} < 60s"),
    )
}

fn criterion_2() -> Verdict {
    let (r, _) = study_single_threaded();
    let order = r.fitted_order_input.unwrap();
    verdict((0.7..=1.2).contains(&order), format!("input order {order:.4} in [0.7, 1.2]"))
}

fn criterion_3() -> Verdict {
    let mut constants = Vec::new();
    let mut finest = (0.0, 0.0);
    for dx in LADDER {
        let sol = lqr_solve(dx);
        let g = sol.grid;
        let mut sup = 0.0f64;
        for (j, v) in sol.value.iter().enumerate() {
            for k in 0..g.node_count() {
                let x = g.coord(k);
                if x.abs() <= 0.5 + 1e-12 {
                    sup = sup.max((v.get(k) - lqr_value(x, g.time(j))).abs());
                }
            }
        }
        constants.push(sup / (g.dt() + g.dx()));
        finest = (sup, g.dt() + g.dx());
    }
    let lo = constants.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = constants.iter().cloned().fold(0.0, f64::max);
    // constant estimated from the coarser grids, applied at the finest
    let coarse_c = constants[..3].iter().cloned().fold(0.0, f64::max);
    let bound = 2.0 * coarse_c * finest.1;
    verdict(
        hi <= 2.0 * lo && finest.0 <= bound,
        format!(
            "C estimates {:?}, max/min {:.3} <= 2, sup error at dx=0.0125 {:.3e} <= 2 C_coarse (dt + dx) = {bound:.3e}",
            constants.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>(),
            hi / lo,
            finest.0
        ),
    )
}

fn describe(outcomes: &[(&str, PropertyOutcome)]) -> String {
    outcomes
        .iter()
        .map(|(label, o)| format!("{label} {}: {}/{} violations", o.name, o.violations, o.trials))
        .collect::<Vec<_>>()
        .join(", ")
}

fn criterion_4() -> Verdict {
    let p = LqrBenchmark::default();
    let g = GridSpec::from_steps(1, 1.0, 0.05, 1.0, 0.025).unwrap();
    let o = stability_suite(&p, &g, 0, 100, &SolverOptions::default()).unwrap();
    verdict(
        o.trials == 100 && o.violations == 0,
        format!("{} trials, {} violations, worst margin {:.3e}", o.trials, o.violations, o.worst_margin),
    )
}

fn criterion_5() -> Verdict {
    let p = LqrBenchmark::default();
    let strict = GridSpec::from_steps(1, 1.0, 0.05, 1.0, 0.025).unwrap();
    let forced = GridSpec::from_steps(1, 1.0, 0.05, 1.1, 0.055).unwrap();
    let subjects = [
        ("random", Subject::Random { cfl_number: None, with_drift: false }),
        ("random+drift", Subject::Random { cfl_number: None, with_drift: true }),
        ("lqr", Subject::Fixed { problem: &p, grid: strict }),
    ];
    let mut outcomes = Vec::new();
    for (label, s) in &subjects {
        outcomes.push((*label, monotonicity_suite(s, 0, 100).unwrap()));
        outcomes.push((*label, constant_shift_suite(s, 0, 100).unwrap()));
        outcomes.push((*label, comparison_suite(s, 0, 100).unwrap()));
    }
    let clean = outcomes.iter().all(|(_, o)| o.trials == 100 && o.violations == 0);
    let broken = [
        ("random forced 1.1", Subject::Random { cfl_number: Some(1.1), with_drift: false }),
        ("lqr forced 1.1", Subject::Fixed { problem: &p, grid: forced }),
    ];
    let forced_outcomes: Vec<_> = broken
        .iter()
        .map(|(label, s)| (*label, monotonicity_suite(s, 0, 100).unwrap()))
        .collect();
    let found = forced_outcomes.iter().all(|(_, o)| o.violations >= 1);
    verdict(
        clean && found,
        format!(
            "strict CFL [{}]; monotonicity with alpha*sup|f| = 1.1 [{}]",
            describe(&outcomes),
            describe(&forced_outcomes)
        ),
    )
}

fn criterion_6() -> Verdict {
    let lqr = LqrBenchmark::default();
    let lqr_out = derivative_correspondence(&lqr, &lqr_solve(0.05), true).unwrap();
    let ob = ObstacleBenchmark2D::default();
    let g = GridSpec::from_steps(2, 1.0, 0.01, 1.0, 0.001).unwrap();
    let sol = solve(&ob, &g, &SolverOptions::default()).unwrap();
    let ob_out = derivative_correspondence(&ob, &sol, true).unwrap();
    verdict(
        lqr_out.worst_margin <= 1e-12 && ob_out.worst_margin <= 1e-12,
        format!(
            "lqr (dx=0.05) {:.3e}, obstacle (dx=0.01, dt=0.001) {:.3e}, relative to max|D V|, tolerance 1e-12",
            lqr_out.worst_margin, ob_out.worst_margin
        ),
    )
}

fn criterion_7() -> Verdict {
    let p = LqrBenchmark::default();
    let sol = lqr_solve(0.05);
    assert!(sol.cfl.satisfies_modified);
    let g = sol.grid;
    let mut violations = 0;
    let mut worst = (f64::NEG_INFINITY, 0);
    let mut tv_range = (f64::INFINITY, 0.0f64);
    for side in [Side::Plus, Side::Minus] {
        let u = evolve_derivative(&p, &g, &sol.policy, side, false).unwrap();
        let tv: Vec<f64> = (0..=g.n_time()).map(|j| total_variation(u.slice(0, j))).collect();
        for j in 1..=g.n_time() {
            let growth = tv[j - 1] - tv[j];
            if growth > 1e-12 || growth.is_nan() {
                violations += 1;
            }
            if growth > worst.0 {
                worst = (growth, j);
            }
        }
        tv_range = (tv_range.0.min(tv[g.n_time()]), tv_range.1.max(tv[0]));
    }
    verdict(
        violations == 0,
        format!(
            "{violations}/{} steps with TV(U_j-1) > TV(U_j) + 1e-12; worst growth {:.3e} at j={}; TV from {:.3} at t=T to {:.3} at t=0",
            2 * g.n_time(),
            worst.0,
            worst.1,
            tv_range.0,
            tv_range.1
        ),
    )
}

fn epi_samples(seed: u64, lattice: bool) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..200)
        .map(|_| {
            if lattice {
                (rng.gen_range(-5i32..=5) as f64 * 0.1, rng.gen_range(0i32..=20) as f64 * 0.05)
            } else {
                (rng.gen_range(-0.5..=0.5), rng.gen_range(0.0..1.0))
            }
        })
        .collect()
}

fn criterion_8() -> Verdict {
    let p = LqrBenchmark::default();
    let solves: Vec<SolveResult> = [0.1, 0.05, 0.025].iter().map(|&dx| lqr_solve(dx)).collect();
    let run = |lattice| {
        epi_diagnostic(&p, &solves, &epi_samples(0, lattice), |x, t| Ok(lqr_gradient(x, t))).unwrap()
    };
    let d = run(true);
    let off = run(false);
    let kept = d.sample_points.len();
    verdict(
        kept == 200 && d.non_increasing_fraction >= 0.9 && d.medians[2] < d.medians[0],
        format!(
            "lattice samples: {:.1}% of {kept} non-increasing, medians {:.4e} / {:.4e} / {:.4e} (off-lattice samples, informational: {:.1}%, medians {:.4e} / {:.4e})",
            100.0 * d.non_increasing_fraction,
            d.medians[0],
            d.medians[1],
            d.medians[2],
            100.0 * off.non_increasing_fraction,
            off.medians[0],
            off.medians[2]
        ),
    )
}

fn self_convergence(dxs: &[f64], reference: Resolution) -> hjb_upwind::analysis::ConvergenceReport {
    let ladder: Vec<Resolution> = dxs.iter().map(|&dx| Resolution::with_ratio(dx, 0.1)).collect();
    self_convergence_study(
        &ObstacleBenchmark2D::default(),
        &ladder,
        reference,
        1.0,
        1.0,
        None,
        &SolverOptions::default(),
    )
    .unwrap()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn criterion_9() -> Verdict {
    let r = self_convergence(&[0.1, 0.05], Resolution { dx: 0.02, dt: 0.002 });
    verdict(
        strictly_decreasing(&r.errors_value) && strictly_decreasing(&r.errors_input),
        format!(
            "reference dx=0.02 dt=0.002; value errors {:.4e} -> {:.4e}, input errors {:.4e} -> {:.4e}",
            r.errors_value[0], r.errors_value[1], r.errors_input[0], r.errors_input[1]
        ),
    )
}

fn criterion_9_full_scale() -> Verdict {
    let r = self_convergence(&[0.1, 0.05, 0.04, 0.025, 0.02], Resolution { dx: 0.01, dt: 0.001 });
    let v = r.fitted_order_value.unwrap();
    let a = r.fitted_order_input.unwrap();
    verdict(
        (v - 1.26).abs() <= 0.3 && (a - 0.46).abs() <= 0.3,
        format!("reference dx=0.01 dt=0.001; value order {v:.3} (1.26 +- 0.3), input order {a:.3} (0.46 +- 0.3)"),
    )
}

fn rollout_gap(dx: f64) -> f64 {
    let p = LqrBenchmark::default();
    let sol = lqr_solve(dx);
    let path = rollout(&p, &sol.policy, &[0.5]).unwrap();
    (path.total_cost - sol.value_at(&[0.5], 0.0).unwrap()).abs()
}

fn criterion_10() -> Verdict {
    let gaps: Vec<f64> = [0.05, 0.025, 0.0125].iter().map(|&dx| rollout_gap(dx)).collect();
    verdict(
        gaps[1] < 0.05 && gaps[1] < gaps[0] && gaps[2] < gaps[1],
        format!(
            "|cost - V(0.5, 0)| = {:.4e} (dx=0.05), {:.4e} (dx=0.025), {:.4e} (dx=0.0125)",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn criterion_11() -> Verdict {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let configs = [
        "problem = lqr1d\ngrid.dx = 0.05\ngrid.alpha = 0.5\nstudy.dx = 0.1, 0.05, 0.025, 0.0125\nseed = 7\nparallel = true\n",
        "problem = obstacle2d\ngrid.dx = 0.05\ngrid.alpha = 0.1\nstudy.dx = 0.2, 0.1\nstudy.reference_dx = 0.05\nstudy.reference_dt = 0.005\nseed = 7\nparallel = true\n",
    ];
    let mut notes = Vec::new();
    let mut identical = true;
    for text in configs {
        let cfg = RunConfig::parse(text).unwrap();
        let runs: Vec<BTreeMap<String, Vec<u8>>> = (0..2)
            .map(|_| {
                let tmp = tempfile::TempDir::new().unwrap();
                let out = tmp.path().join("out");
                let cfg = cfg.with_override("output.dir", out.to_str().unwrap()).unwrap();
                assert_eq!(pool.install(|| cmd_convergence(&cfg)).unwrap(), 0);
                read_tree(&out)
            })
            .collect();
        identical &= !runs[0].is_empty() && runs[0] == runs[1];
        notes.push(format!("{:?} ({} files)", cfg.problem, runs[0].len()));
    }
    verdict(
        identical,
        format!("two parallel runs (4 threads) byte-identical for {}", notes.join(", ")),
    )
}

type Check = fn() -> Verdict;

fn main() {
    let mut criteria: Vec<(&str, Check)> = vec![
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
        ("9", criterion_9),
        ("10", criterion_10),
        ("11", criterion_11),
    ];
    if std::env::var_os("HJB_FULL_SCALE").is_some() {
        criteria.push(("9 (full scale)", criterion_9_full_scale));
    } else {
        println!("SKIP criterion 9 (full scale): set HJB_FULL_SCALE=1 to run");
    }
    let mut failed = 0;
    for (name, check) in criteria {
        let v = check();
        println!("{} criterion {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        if !v.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
}
