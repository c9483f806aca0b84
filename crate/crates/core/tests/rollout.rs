use hjb_upwind::{
    exact_lqr_value, rollout, solve, FnProblem, GridSpec, InputSet, LqrBenchmark,
    ObstacleBenchmark2D, SolverOptions,
};

fn lqr_gap(dx: f64) -> f64 {
    let p = LqrBenchmark::default();
    let g = GridSpec::from_steps(1, 1.0, dx, 1.0, 0.5 * dx).unwrap();
    let sol = solve(&p, &g, &SolverOptions::default()).unwrap();
    let path = rollout(&p, &sol.policy, &[0.5]).unwrap();
    assert!(!path.left_domain);
    (path.total_cost - sol.value_at(&[0.5], 0.0).unwrap()).abs()
}

#[test]
fn lqr_rollout_cost_tracks_value() {
    let coarse = lqr_gap(0.05);
    let fine = lqr_gap(0.025);
    assert!(fine < 0.05, "gap {fine}");
    assert!(fine < coarse, "{fine} !< {coarse}");
}

#[test]
fn lqr_rollout_cost_approaches_exact_value() {
    // v(0.5, 0) = tanh(1) / 8
    let exact = 1f64.tanh() * 0.125;
    assert!((exact_lqr_value(0.5, 0.0, 1.0).unwrap() - exact).abs() < 1e-15);
    let p = LqrBenchmark::default();
    let g = GridSpec::from_steps(1, 1.0, 0.0125, 1.0, 0.00625).unwrap();
    let sol = solve(&p, &g, &SolverOptions::default()).unwrap();
    let path = rollout(&p, &sol.policy, &[0.5]).unwrap();
    assert!((path.total_cost - exact).abs() < 0.01, "{}", path.total_cost);
}

#[test]
fn rollout_accounting_is_consistent() {
    let p = LqrBenchmark::default();
    let g = GridSpec::from_steps(1, 1.0, 0.05, 1.0, 0.025).unwrap();
    let sol = solve(&p, &g, &SolverOptions::default()).unwrap();
    let path = rollout(&p, &sol.policy, &[0.5]).unwrap();
    assert_eq!(path.states.len(), g.n_time() + 1);
    assert_eq!(path.controls.len(), g.n_time());
    let running: f64 = path.running_costs.iter().map(|c| c * g.dt()).sum();
    assert!((path.total_cost - running - path.terminal_cost).abs() < 1e-15);
    for k in 0..g.n_time() {
        let step = path.states[k][0] + g.dt() * path.controls[k][0];
        assert_eq!(path.states[k + 1][0], step);
    }
    assert!(path.controls.iter().all(|a| a[0] >= -1.0 && a[0] <= 1.0));
    // feedback pushes the state toward the origin
    assert!(path.states.last().unwrap()[0] < 0.5);
}

#[test]
fn null_dynamics_give_stationary_trajectory() {
    let p = FnProblem::new(
        1,
        InputSet::symmetric(1, 1.0).unwrap(),
        vec![0.0],
        |_, _, out| out[0] = 0.0,
        |x, _| x[0] * x[0],
        |_| 0.0,
    )
    .unwrap();
    let g = GridSpec::from_steps(1, 1.0, 0.1, 1.0, 0.1).unwrap();
    let sol = solve(&p, &g, &SolverOptions::default()).unwrap();
    let path = rollout(&p, &sol.policy, &[0.3]).unwrap();
    assert!(path.states.iter().all(|x| x[0] == 0.3));
}

#[test]
fn rollout_rejects_start_outside_domain() {
    let p = LqrBenchmark::default();
    let g = GridSpec::from_steps(1, 1.0, 0.1, 1.0, 0.05).unwrap();
    let sol = solve(&p, &g, &SolverOptions::default()).unwrap();
    assert!(rollout(&p, &sol.policy, &[1.2]).is_err());
    assert!(rollout(&p, &sol.policy, &[0.1, 0.1]).is_err());
}

fn obstacle_paths(dx: f64, starts: &[[f64; 2]]) -> Vec<Vec<Vec<f64>>> {
    let p = ObstacleBenchmark2D::default();
    let g = GridSpec::from_steps(2, 1.0, dx, 1.0, 0.1 * dx).unwrap();
    let sol = solve(&p, &g, &SolverOptions::default()).unwrap();
    starts
        .iter()
        .map(|x0| rollout(&p, &sol.policy, x0).unwrap().states)
        .collect()
}

fn distance(a: &[f64], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[test]
fn obstacle_rollout_heads_for_destination() {
    let target = [0.5, 0.5];
    let paths = obstacle_paths(0.05, &[[-0.5, -0.5], [-0.5, -0.45]]);
    for path in &paths {
        let d0 = distance(&path[0], target);
        let d1 = distance(path.last().unwrap(), target);
        assert!(d1 < 0.6 * d0, "{d0} -> {d1}");
    }
    // a start off the symmetry axis is pushed further off it near the obstacle
    let off = &paths[1];
    let spread = off.iter().map(|x| (x[1] - x[0]).abs()).fold(0.0, f64::max);
    assert!(spread > 0.05, "{spread}");
    let obstacle = [-0.1, -0.1];
    let closest = off.iter().map(|x| distance(x, obstacle)).fold(f64::INFINITY, f64::min);
    assert!(closest > 0.03, "{closest}");
}
