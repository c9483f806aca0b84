//! Flat `key = value` run configuration.
//!
//! ```text
//! # lines starting with '#' are comments
//! problem = lqr1d
//! grid.dx = 0.05
//! grid.alpha = 0.5
//! study.dx = 0.1, 0.05, 0.025, 0.0125
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::analysis::properties::ScalarFamily;
use crate::analysis::{MeasurementRegion, Resolution};
use crate::error::Result as HjbResult;
use crate::grid::{make_grid, GridSpec};
use crate::ocp::{ControlProblem, LqrBenchmark, ObstacleBenchmark2D, ObstacleParams};
use crate::upwind::{MinimizerOptions, SolverOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Lqr1d,
    Obstacle2d,
    Custom,
}

impl ProblemKind {
    pub fn dim(self) -> usize {
        match self {
            ProblemKind::Obstacle2d => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridParams {
    Counts { n_space: usize, n_time: usize },
    Steps { dx: f64, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Interior,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub dx: Vec<f64>,
    pub alpha: Option<f64>,
    pub reference_dx: Option<f64>,
    pub reference_dt: Option<f64>,
    pub region: Option<RegionKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub half_width: f64,
    pub horizon: f64,
    pub grid: Option<GridParams>,
    pub minimizer: MinimizerOptions,
    pub study: StudyConfig,
    pub output_dir: Option<PathBuf>,
    pub formats: Formats,
    pub stride: usize,
    pub seed: u64,
    pub force_cfl: bool,
    pub parallel: bool,
    pub verify_trials: usize,
    pub rollout_x0: Option<Vec<f64>>,
    pub obstacle: ObstacleParams,
    pub custom: ScalarFamily,
    /// Every key as written, for echoing into artifacts.
    pub entries: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Lqr1d,
            half_width: 1.0,
            horizon: 1.0,
            grid: None,
            minimizer: MinimizerOptions::default(),
            study: StudyConfig {
                dx: Vec::new(),
                alpha: None,
                reference_dx: None,
                reference_dt: None,
                region: None,
            },
            output_dir: None,
            formats: Formats {
                csv: true,
                json: true,
            },
            stride: 1,
            seed: 0,
            force_cfl: false,
            parallel: true,
            verify_trials: 100,
            rollout_x0: None,
            obstacle: ObstacleParams::default(),
            custom: ScalarFamily::default(),
            entries: BTreeMap::new(),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(format!("{key}: expected a finite number, got {v:?}")),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>()
        .or_else(|_| err(format!("{key}: expected a non-negative integer, got {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => err(format!("{key}: expected true or false, got {v:?}")),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

fn parse_pair(key: &str, v: &str) -> Result<[f64; 2], ConfigError> {
    let xs = parse_list(key, v)?;
    match xs.as_slice() {
        [a] => Ok([*a, *a]),
        [a, b] => Ok([*a, *b]),
        _ => err(format!("{key}: expected one or two numbers, got {v:?}")),
    }
}

impl RunConfig {
    /// Parses the text of a config file.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`, got {raw:?}", n + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return err(format!("line {}: empty key or value", n + 1));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return err(format!("line {}: duplicate key {k}", n + 1));
            }
        }
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut counts = (None, None);
        let mut steps = (None, None);
        for (k, v) in &entries {
            let key = k.as_str();
            match key {
                "problem" => {
                    cfg.problem = match v.as_str() {
                        "lqr1d" => ProblemKind::Lqr1d,
                        "obstacle2d" => ProblemKind::Obstacle2d,
                        "custom" => ProblemKind::Custom,
                        other => return err(format!("problem: unknown problem {other:?}")),
                    }
                }
                "grid.half_width" => cfg.half_width = parse_f64(key, v)?,
                "grid.horizon" => cfg.horizon = parse_f64(key, v)?,
                "grid.n_space" => counts.0 = Some(parse_usize(key, v)?),
                "grid.n_time" => counts.1 = Some(parse_usize(key, v)?),
                "grid.dx" => steps.0 = Some(parse_f64(key, v)?),
                "grid.alpha" => steps.1 = Some(parse_f64(key, v)?),
                "minimizer.scan_points" => cfg.minimizer.scan_points = parse_usize(key, v)?,
                "minimizer.refine_tolerance" => {
                    cfg.minimizer.refine_tolerance = parse_f64(key, v)?
                }
                "minimizer.analytic" => cfg.minimizer.analytic = parse_bool(key, v)?,
                "study.dx" => cfg.study.dx = parse_list(key, v)?,
                "study.alpha" => cfg.study.alpha = Some(parse_f64(key, v)?),
                "study.reference_dx" => cfg.study.reference_dx = Some(parse_f64(key, v)?),
                "study.reference_dt" => cfg.study.reference_dt = Some(parse_f64(key, v)?),
                "study.region" => {
                    cfg.study.region = Some(match v.as_str() {
                        "interior" => RegionKind::Interior,
                        "full" => RegionKind::Full,
                        other => return err(format!("study.region: unknown region {other:?}")),
                    })
                }
                "output.dir" => cfg.output_dir = Some(PathBuf::from(v)),
                "output.formats" => {
                    let mut f = Formats {
                        csv: false,
                        json: false,
                    };
                    for item in v.split(',').map(str::trim) {
                        match item {
                            "csv" => f.csv = true,
                            "json" => f.json = true,
                            other => return err(format!("output.formats: unknown format {other:?}")),
                        }
                    }
                    cfg.formats = f;
                }
                "output.stride" => cfg.stride = parse_usize(key, v)?,
                "seed" => {
                    cfg.seed = v
                        .parse()
                        .or_else(|_| err(format!("seed: expected an unsigned integer, got {v:?}")))?
                }
                "force_cfl" => cfg.force_cfl = parse_bool(key, v)?,
                "parallel" => cfg.parallel = parse_bool(key, v)?,
                "verify.trials" => cfg.verify_trials = parse_usize(key, v)?,
                "rollout.x0" => cfg.rollout_x0 = Some(parse_list(key, v)?),
                "obstacle.b" => cfg.obstacle.b = parse_pair(key, v)?,
                "obstacle.r" => cfg.obstacle.r = parse_pair(key, v)?,
                "obstacle.q" => cfg.obstacle.q = parse_pair(key, v)?,
                "obstacle.q_t" => cfg.obstacle.q_t = parse_pair(key, v)?,
                "obstacle.sigma_o" => cfg.obstacle.sigma_o = parse_pair(key, v)?,
                "obstacle.sigma_i" => cfg.obstacle.sigma_i = parse_pair(key, v)?,
                "obstacle.s" => cfg.obstacle.s = parse_f64(key, v)?,
                "obstacle.s_t" => cfg.obstacle.s_t = parse_f64(key, v)?,
                "obstacle.c" => cfg.obstacle.c = parse_f64(key, v)?,
                "obstacle.x_t" => cfg.obstacle.x_t = parse_pair(key, v)?,
                "obstacle.x_o" => cfg.obstacle.x_o = parse_pair(key, v)?,
                "obstacle.input_bound" => cfg.obstacle.input_bound = parse_f64(key, v)?,
                "custom.gain" => cfg.custom.gain = parse_f64(key, v)?,
                "custom.weight" => cfg.custom.weight = parse_f64(key, v)?,
                "custom.lower" => cfg.custom.lower = parse_f64(key, v)?,
                "custom.upper" => cfg.custom.upper = parse_f64(key, v)?,
                "custom.quad" => cfg.custom.quad = parse_f64(key, v)?,
                "custom.wave" => cfg.custom.wave = parse_f64(key, v)?,
                "custom.drift" => cfg.custom.drift = parse_f64(key, v)?,
                other => return err(format!("unknown key {other:?}")),
            }
        }
        cfg.grid = match (counts, steps) {
            ((None, None), (None, None)) => None,
            ((Some(n_space), Some(n_time)), (None, None)) => Some(GridParams::Counts { n_space, n_time }),
            ((None, None), (Some(dx), Some(alpha))) => Some(GridParams::Steps { dx, alpha }),
            ((Some(_), _) | (_, Some(_)), (Some(_), _) | (_, Some(_))) => {
                return err("grid: give either n_space and n_time or dx and alpha, not both")
            }
            _ => return err("grid: incomplete parameterization (n_space with n_time, or dx with alpha)"),
        };
        if cfg.stride == 0 {
            return err("output.stride must be at least 1");
        }
        if cfg.minimizer.scan_points < 2 {
            return err("minimizer.scan_points must be at least 2");
        }
        if !(cfg.minimizer.refine_tolerance > 0.0) {
            return err("minimizer.refine_tolerance must be positive");
        }
        if cfg.problem != ProblemKind::Obstacle2d && entries.keys().any(|k| k.starts_with("obstacle.")) {
            return err("obstacle.* keys need problem = obstacle2d");
        }
        if cfg.problem != ProblemKind::Custom && entries.keys().any(|k| k.starts_with("custom.")) {
            return err("custom.* keys need problem = custom");
        }
        cfg.entries = entries;
        // surface invalid problem parameters at parse time
        cfg.build_problem()?;
        Ok(cfg)
    }

    /// Sets `key` as if it had been written in the file, replacing any value.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self, ConfigError> {
        let mut entries = self.entries.clone();
        entries.insert(key.to_string(), value.to_string());
        Self::from_entries(entries)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            minimizer: self.minimizer,
            parallel: self.parallel,
            force_cfl: self.force_cfl,
        }
    }

    pub fn build_problem(&self) -> Result<Box<dyn ControlProblem>, ConfigError> {
        let wrap = |e: crate::HjbError| ConfigError(e.to_string());
        Ok(match self.problem {
            ProblemKind::Lqr1d => Box::new(LqrBenchmark::new(self.horizon)),
            ProblemKind::Obstacle2d => {
                Box::new(ObstacleBenchmark2D::new(self.obstacle.clone()).map_err(wrap)?)
            }
            ProblemKind::Custom => {
                if !(self.custom.lower < self.custom.upper) {
                    return err("custom.lower must be below custom.upper");
                }
                Box::new(self.custom.build().map_err(wrap)?)
            }
        })
    }

    /// The run's grid; requires exactly one grid parameterization.
    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        let dim = self.problem.dim();
        let built: HjbResult<GridSpec> = match self.grid {
            None => return err("grid: missing (n_space and n_time, or dx and alpha)"),
            Some(GridParams::Counts { n_space, n_time }) => {
                make_grid(dim, self.half_width, n_space, self.horizon, n_time)
            }
            Some(GridParams::Steps { dx, alpha }) => {
                GridSpec::from_steps(dim, self.half_width, dx, self.horizon, alpha * dx)
            }
        };
        built.map_err(|e| ConfigError(e.to_string()))
    }

    /// Study resolutions, with `dt = alpha dx` from `study.alpha` or `grid.alpha`.
    pub fn ladder(&self) -> Result<Vec<Resolution>, ConfigError> {
        if self.study.dx.len() < 2 {
            return err("study.dx: at least two resolutions are needed to fit an order");
        }
        let alpha = match (self.study.alpha, self.grid) {
            (Some(a), _) => a,
            (None, Some(GridParams::Steps { alpha, .. })) => alpha,
            _ => return err("study.alpha: missing"),
        };
        if !(alpha > 0.0) {
            return err("study.alpha must be positive");
        }
        let out: Vec<Resolution> = self.study.dx.iter().map(|&dx| Resolution::with_ratio(dx, alpha)).collect();
        if out.iter().any(|r| !(r.dx > 0.0)) {
            return err("study.dx entries must be positive");
        }
        if out.windows(2).any(|w| !(w[1].dx < w[0].dx)) {
            return err("study.dx must be strictly decreasing");
        }
        Ok(out)
    }

    pub fn reference(&self) -> Result<Resolution, ConfigError> {
        match (self.study.reference_dx, self.study.reference_dt) {
            (Some(dx), Some(dt)) if dx > 0.0 && dt > 0.0 => Ok(Resolution { dx, dt }),
            (Some(_), Some(_)) => err("study.reference_dx and study.reference_dt must be positive"),
            _ => err("study.reference_dx and study.reference_dt are required for self-convergence"),
        }
    }

    /// Interior half-box by default for the scalar regulator, the whole box otherwise.
    pub fn region(&self) -> MeasurementRegion {
        let kind = self.study.region.unwrap_or(match self.problem {
            ProblemKind::Lqr1d => RegionKind::Interior,
            _ => RegionKind::Full,
        });
        let dim = self.problem.dim();
        match kind {
            RegionKind::Interior => MeasurementRegion::interior_half(dim, self.half_width, self.horizon),
            RegionKind::Full => MeasurementRegion {
                lower: vec![-self.half_width; dim],
                upper: vec![self.half_width; dim],
                t_start: 0.0,
                t_end: self.horizon,
            },
        }
    }

    /// Keys echoed into artifacts; the output location is not part of the run.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut out = self.entries.clone();
        out.remove("output.dir");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lqr_solve_config() {
        let cfg = RunConfig::parse(
            "# solve\nproblem = lqr1d\ngrid.dx = 0.05\ngrid.alpha = 0.5\n\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.problem, ProblemKind::Lqr1d);
        let g = cfg.grid_spec().unwrap();
        assert_eq!(g.n_space(), 20);
        assert_eq!(g.n_time(), 40);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.entries.len(), 4);
    }

    #[test]
    fn counts_parameterization() {
        let cfg = RunConfig::parse("grid.n_space = 10\ngrid.n_time = 20\ngrid.horizon = 2").unwrap();
        let g = cfg.grid_spec().unwrap();
        assert_eq!((g.n_space(), g.n_time()), (10, 20));
        assert!((g.alpha() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grid_parameterizations_are_exclusive() {
        let both = "grid.n_space = 10\ngrid.n_time = 20\ngrid.dx = 0.1\ngrid.alpha = 0.5";
        assert!(RunConfig::parse(both).is_err());
        assert!(RunConfig::parse("grid.dx = 0.1").is_err());
        assert!(RunConfig::parse("grid.n_time = 3").is_err());
        assert!(RunConfig::parse("problem = lqr1d").unwrap().grid_spec().is_err());
    }

    #[test]
    fn rejects_malformed_input() {
        for text in [
            "problem lqr1d",
            "problem = heat",
            "grid.dx = abc\ngrid.alpha = 0.5",
            "bogus = 1",
            "seed = 1\nseed = 2",
            "force_cfl = yes",
            "output.formats = csv, xml",
            "obstacle.s = 0.3",
            "problem = obstacle2d\nobstacle.q = 1, 2, 3",
            "problem = obstacle2d\nobstacle.s = -1",
            "output.stride = 0",
            " = 3",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text:?} accepted");
        }
    }

    #[test]
    fn ladder_needs_two_decreasing_entries() {
        let one = RunConfig::parse("study.dx = 0.1\nstudy.alpha = 0.5").unwrap();
        assert!(one.ladder().is_err());
        let up = RunConfig::parse("study.dx = 0.05, 0.1\nstudy.alpha = 0.5").unwrap();
        assert!(up.ladder().is_err());
        let ok = RunConfig::parse("study.dx = 0.1, 0.05\ngrid.dx = 0.1\ngrid.alpha = 0.25").unwrap();
        let l = ok.ladder().unwrap();
        assert_eq!(l[1], Resolution { dx: 0.05, dt: 0.0125 });
    }

    #[test]
    fn obstacle_pairs_and_defaults() {
        let cfg = RunConfig::parse("problem = obstacle2d\nobstacle.x_t = 0.4, 0.3\nobstacle.q = 2").unwrap();
        assert_eq!(cfg.obstacle.x_t, [0.4, 0.3]);
        assert_eq!(cfg.obstacle.q, [2.0, 2.0]);
        assert_eq!(cfg.obstacle.s, 0.2);
        assert_eq!(cfg.region().lower, vec![-1.0, -1.0]);
    }

    #[test]
    fn override_replaces_and_echo_drops_output_dir() {
        let cfg = RunConfig::parse("seed = 1\noutput.dir = a").unwrap();
        let cfg = cfg.with_override("seed", "9").unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(!cfg.echo().contains_key("output.dir"));
        assert_eq!(cfg.echo()["seed"], "9");
    }
}
