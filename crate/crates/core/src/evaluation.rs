//! Simulation of the solved economy, Euler-error statistics and the
//! sparse-grid versus DDSG interpolation experiment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdmr::{select_anchor, DdsgModel, DdsgOptions, FnEvaluator};
use crate::irbc::{log10_abs, transition, IrbcModel, PolicyEval};
use crate::sparse_grid::{Domain, HierarchicalGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPath {
    /// Retained states, one row of `2N` per period.
    pub states: Vec<Vec<f64>>,
    /// Policy `(k', lambda)` chosen in each retained period.
    pub policies: Vec<Vec<f64>>,
    /// Number of state coordinates moved back into the box.
    pub saturation_count: usize,
    /// Number of periods with at least one saturated coordinate.
    pub saturated_periods: usize,
    pub burn_in: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean_log10: f64,
    pub p999_log10: f64,
    pub count: usize,
}

/// Innovation generator for one period: independent of every other period.
fn period_rng(seed: u64, period: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(period);
    rng
}

/// Simulate `t` periods from the deterministic steady state and keep the
/// periods from `burn_in` on.
pub fn simulate(
    policy: &dyn PolicyEval,
    model: &IrbcModel,
    t: usize,
    burn_in: usize,
    seed: u64,
) -> Result<SimulationPath> {
    if t <= burn_in {
        return Err(Error::InvalidArgument(format!(
            "simulation length {t} must exceed the burn-in {burn_in}"
        )));
    }
    let p = &model.params;
    let n = p.n;
    let (mut state, _) = p.steady_state()?;
    let mut innov = vec![0.0; n + 1];
    let mut a_next = vec![0.0; n];
    let mut choice = vec![0.0; n + 1];
    let mut states = Vec::with_capacity(t - burn_in);
    let mut policies = Vec::with_capacity(t - burn_in);
    let mut saturation_count = 0;
    let mut saturated_periods = 0;
    for period in 0..t {
        policy.policy_into(&state, &mut choice)?;
        if period >= burn_in {
            states.push(state.clone());
            policies.push(choice.clone());
        }
        let mut rng = period_rng(seed, period as u64);
        for e in innov.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        transition(&state[..n], &innov, p, &mut a_next);
        state[..n].copy_from_slice(&a_next);
        state[n..].copy_from_slice(&choice[..n]);
        let moved = model.domain.clamp(&mut state);
        if moved > 0 && period + 1 >= burn_in {
            saturation_count += moved;
            saturated_periods += 1;
        }
    }
    Ok(SimulationPath {
        states,
        policies,
        saturation_count,
        saturated_periods,
        burn_in,
        seed,
    })
}

/// Productivity path of the exogenous process alone, without clamping.
pub fn simulate_productivity(model: &IrbcModel, t: usize, seed: u64) -> Vec<Vec<f64>> {
    let p = &model.params;
    let n = p.n;
    let mut a = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut innov = vec![0.0; n + 1];
    let mut out = Vec::with_capacity(t);
    for period in 0..t {
        out.push(a.clone());
        let mut rng = period_rng(seed, period as u64);
        for e in innov.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        transition(&a, &innov, p, &mut next);
        a.copy_from_slice(&next);
    }
    out
}

/// Nearest-rank percentile `q` in `(0, 1]` of unsorted data.
pub fn nearest_rank(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Summary of log10 absolute errors.
pub fn summarize(log_errors: &[f64]) -> Result<ErrorStats> {
    if log_errors.is_empty() {
        return Err(Error::InvalidArgument("no errors to summarise".into()));
    }
    Ok(ErrorStats {
        mean_log10: log_errors.iter().sum::<f64>() / log_errors.len() as f64,
        p999_log10: nearest_rank(log_errors, 0.999),
        count: log_errors.len(),
    })
}

/// log10 Euler errors for every retained period and country, in path order.
pub fn path_log_errors(
    path: &SimulationPath,
    policy: &dyn PolicyEval,
    model: &IrbcModel,
) -> Result<Vec<f64>> {
    let per_period: Vec<Vec<f64>> = path
        .states
        .par_iter()
        .map(|s| model.euler_errors(s, policy))
        .collect::<Result<_>>()?;
    Ok(per_period.into_iter().flatten().map(log10_abs).collect())
}

pub fn error_stats(
    path: &SimulationPath,
    policy: &dyn PolicyEval,
    model: &IrbcModel,
) -> Result<ErrorStats> {
    summarize(&path_log_errors(path, policy, model)?)
}

/// `(sum_j sin x_j)^c`.
pub fn test_function(x: &[f64], c: u32) -> f64 {
    x.iter().map(|v| v.sin()).sum::<f64>().powi(c as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    /// `"SG"` or `"DDSG"`.
    pub method: String,
    /// Expansion order for DDSG rows, zero for SG.
    pub k_max: usize,
    pub depth: usize,
    pub points: usize,
    pub rel_error: f64,
}

fn relative_error<F: Fn(&[f64]) -> Result<f64> + Sync>(
    approx: F,
    samples: &[Vec<f64>],
    exact: &[f64],
) -> Result<f64> {
    let errs: Vec<f64> = samples
        .par_iter()
        .zip(exact)
        .map(|(x, &f)| approx(x).map(|v| (v - f).abs()))
        .collect::<Result<_>>()?;
    let num: f64 = errs.iter().sum();
    let den: f64 = exact.iter().map(|f| f.abs()).sum();
    Ok(num / den)
}

/// Fit the test function on `[0,1]^d` with regular sparse grids and with DDSG
/// of each order, and report the relative mean absolute error over uniform
/// samples.
pub fn interp_error_experiment(
    d: usize,
    c: u32,
    depths: &[usize],
    k_max_list: &[usize],
    samples: usize,
    seed: u64,
    include_sg: bool,
) -> Result<Vec<ExperimentRow>> {
    if c == 0 {
        return Err(Error::InvalidArgument("test-function exponent must be at least 1".into()));
    }
    let domain = Domain::unit(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unif = Uniform::new(0.0, 1.0).expect("valid range");
    let xs: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..d).map(|_| unif.sample(&mut rng)).collect())
        .collect();
    let exact: Vec<f64> = xs.iter().map(|x| test_function(x, c)).collect();
    let f = FnEvaluator::new(1, move |x: &[f64]| Ok(vec![test_function(x, c)]));
    let anchor = select_anchor(&f, &domain, samples.max(1), seed.wrapping_add(1))?;
    let mut rows = Vec::new();
    for &depth in depths {
        if include_sg {
            let mut grid = HierarchicalGrid::make_regular(d, depth, 1, domain.clone())?;
            let values: Vec<f64> = (0..grid.num_points())
                .into_par_iter()
                .map(|p| test_function(&grid.point(p), c))
                .collect();
            grid.hierarchize(&values)?;
            let err = relative_error(|x| Ok(grid.interpolate(x)?[0]), &xs, &exact)?;
            rows.push(ExperimentRow {
                method: "SG".into(),
                k_max: 0,
                depth,
                points: grid.num_points(),
                rel_error: err,
            });
        }
        for &k_max in k_max_list {
            let opts = DdsgOptions {
                k_max,
                depth,
                ..Default::default()
            };
            let model = DdsgModel::build(&f, &domain, opts, &anchor)?;
            let err = relative_error(|x| Ok(model.evaluate(x)?[0]), &xs, &exact)?;
            rows.push(ExperimentRow {
                method: "DDSG".into(),
                k_max,
                depth,
                points: model.num_points(),
                rel_error: err,
            });
        }
    }
    Ok(rows)
}
