//! Time iteration: repeatedly solve the period equilibrium conditions at
//! every approximation node against the previous policy until successive
//! policies agree.

mod newton;
mod perturbation;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdmr::{select_anchor, DdsgModel, DdsgOptions, FnEvaluator};
use crate::irbc::IrbcModel;
use crate::policy::Policy;
use crate::sparse_grid::HierarchicalGrid;

pub use newton::{solve_point, POINT_TOL};
pub use perturbation::{linear_policy, transition_spectral_radius};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approximator {
    Sg,
    Ddsg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mse,
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuessKind {
    Constant,
    Linear,
}

/// How the DDSG anchor is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum AnchorMode {
    /// The deterministic steady state.
    SteadyState,
    /// The uniform sample whose initial-guess policy is closest to the mean.
    Sampled { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    EarlyStopped,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiConfig {
    pub approximator: Approximator,
    pub grid_depth: usize,
    pub max_ref: usize,
    pub surpl_threshold: f64,
    pub k_max: usize,
    pub anchor: AnchorMode,
    pub tol_ti: f64,
    pub max_iters: usize,
    pub pol_update_weight: f64,
    pub metric: Metric,
    pub patience: usize,
    pub guess: GuessKind,
}

impl Default for TiConfig {
    fn default() -> Self {
        Self {
            approximator: Approximator::Sg,
            grid_depth: 3,
            max_ref: 0,
            surpl_threshold: 1e-3,
            k_max: 1,
            anchor: AnchorMode::SteadyState,
            tol_ti: 1e-7,
            max_iters: 500,
            pol_update_weight: 1.0,
            metric: Metric::Mse,
            patience: 10,
            guess: GuessKind::Linear,
        }
    }
}

impl TiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_ti > 0.0) {
            return Err(Error::Config(format!("tol_ti must be positive, got {}", self.tol_ti)));
        }
        if !(self.pol_update_weight > 0.0 && self.pol_update_weight <= 1.0) {
            return Err(Error::Config(format!(
                "polUpdateWeight must lie in (0, 1], got {}",
                self.pol_update_weight
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.surpl_threshold >= 0.0) {
            return Err(Error::Config("surplThreshold must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiReport {
    pub iterations: usize,
    pub metric_history: Vec<f64>,
    pub stop_reason: StopReason,
    pub num_points: usize,
    pub wall_time_per_step: f64,
    pub total_time: f64,
}

/// Initial policy for a run.
pub fn initial_guess(model: &IrbcModel, kind: GuessKind) -> Result<Policy> {
    match kind {
        GuessKind::Constant => Ok(Policy::Constant {
            values: vec![1.0; model.n() + 1],
        }),
        GuessKind::Linear => Ok(Policy::Linear(linear_policy(&model.params)?)),
    }
}

struct Step {
    policy: Policy,
    metric: f64,
}

fn metric_of(kind: Metric, new: &[f64], old: &[f64]) -> f64 {
    // ordered accumulation keeps the result independent of worker count
    match kind {
        Metric::Mse => {
            new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / new.len().max(1) as f64
        }
        Metric::Sup => new.iter().zip(old).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
    }
}

/// Damped update at one point: `omega * solve + (1 - omega) * Ip0(x)`.
fn update_point(
    model: &IrbcModel,
    prev: &Policy,
    x: &[f64],
    fallback: &[f64],
    omega: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let old = prev.evaluate(x, model.n() + 1)?;
    let guess = if old.iter().all(|&v| v > 0.0) { old.clone() } else { fallback.to_vec() };
    let solved = solve_point(model, x, &guess, prev, fallback).inspect_err(|e| {
        log::error!("{e}");
    })?;
    let new = solved
        .iter()
        .zip(&old)
        .map(|(s, o)| omega * s + (1.0 - omega) * o)
        .collect();
    Ok((new, old))
}

fn sg_step(
    model: &IrbcModel,
    cfg: &TiConfig,
    base: &HierarchicalGrid,
    prev: &Policy,
    fallback: &[f64],
) -> Result<Step> {
    let m = model.n() + 1;
    let omega = cfg.pol_update_weight;
    let mut grid = base.clone();
    let solve_range = |grid: &HierarchicalGrid, from: usize| -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        (from..grid.num_points())
            .into_par_iter()
            .map(|p| update_point(model, prev, &grid.point(p), fallback, omega))
            .collect()
    };
    let mut values = Vec::with_capacity(grid.num_points() * m);
    let mut olds = Vec::with_capacity(grid.num_points() * m);
    for (v, o) in solve_range(&grid, 0)? {
        values.extend(v);
        olds.extend(o);
    }
    grid.hierarchize(&values)?;
    for _ in 0..cfg.max_ref {
        let scale = grid.default_refinement_scale();
        let n0 = grid.num_points();
        if grid.refine(cfg.surpl_threshold, &scale)? == 0 {
            break;
        }
        for (v, o) in solve_range(&grid, n0)? {
            values.extend(v);
            olds.extend(o);
        }
        grid.hierarchize(&values)?;
    }
    Ok(Step {
        metric: metric_of(cfg.metric, &values, &olds),
        policy: Policy::Sg { grid },
    })
}

fn ddsg_step(
    model: &IrbcModel,
    cfg: &TiConfig,
    anchor: &[f64],
    prev: &Policy,
    fallback: &[f64],
) -> Result<Step> {
    let m = model.n() + 1;
    let omega = cfg.pol_update_weight;
    let f = FnEvaluator::new(m, |x: &[f64]| update_point(model, prev, x, fallback, omega).map(|r| r.0));
    let opts = DdsgOptions {
        k_max: cfg.k_max,
        depth: cfg.grid_depth,
        eps_eta: 0.0,
        eps_rho: 0.0,
    };
    let ddsg = DdsgModel::build(&f, &model.domain, opts, anchor)?;
    let mut values = Vec::new();
    let mut olds = Vec::new();
    for (x, v) in ddsg.sample_points() {
        olds.extend(prev.evaluate(&x, m)?);
        values.extend(v);
    }
    Ok(Step {
        metric: metric_of(cfg.metric, &values, &olds),
        policy: Policy::Ddsg { model: ddsg },
    })
}

/// Run time iteration from the configured initial guess.
pub fn run(model: &IrbcModel, cfg: &TiConfig) -> Result<(Policy, TiReport)> {
    let guess = initial_guess(model, cfg.guess)?;
    run_from(model, cfg, guess)
}

/// Run time iteration from an explicit initial policy.
pub fn run_from(model: &IrbcModel, cfg: &TiConfig, initial: Policy) -> Result<(Policy, TiReport)> {
    cfg.validate()?;
    let d = model.params.state_dim();
    let m = model.n() + 1;
    if cfg.approximator == Approximator::Ddsg && cfg.k_max > d {
        return Err(Error::Config(format!("k_max = {} exceeds the state dimension {d}", cfg.k_max)));
    }
    let (steady, fallback) = model.params.steady_state()?;
    let anchor = match cfg.anchor {
        AnchorMode::SteadyState => steady,
        AnchorMode::Sampled { samples, seed } => {
            let f = FnEvaluator::new(m, |x: &[f64]| initial.evaluate(x, m));
            select_anchor(&f, &model.domain, samples, seed)?
        }
    };
    let base = match cfg.approximator {
        Approximator::Sg => Some(HierarchicalGrid::make_regular(
            d,
            cfg.grid_depth,
            m,
            model.domain.clone(),
        )?),
        Approximator::Ddsg => None,
    };
    let start = Instant::now();
    let mut current = initial;
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut stop = StopReason::MaxIters;
    for it in 0..cfg.max_iters {
        let step = match &base {
            Some(b) => sg_step(model, cfg, b, &current, &fallback)?,
            None => ddsg_step(model, cfg, &anchor, &current, &fallback)?,
        };
        current = step.policy;
        history.push(step.metric);
        log::info!("iteration {}: metric {:e}, {} points", it + 1, step.metric, current.num_points());
        if step.metric < cfg.tol_ti {
            stop = StopReason::Converged;
            break;
        }
        if step.metric < 0.99 * best {
            best = step.metric;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stop = StopReason::EarlyStopped;
                break;
            }
        }
    }
    let total = start.elapsed().as_secs_f64();
    let report = TiReport {
        iterations: history.len(),
        wall_time_per_step: total / history.len().max(1) as f64,
        metric_history: history,
        stop_reason: stop,
        num_points: current.num_points(),
        total_time: total,
    };
    Ok((current, report))
}
