//! Anchored cut-HDMR with sparse-grid component functions (DDSG).
//!
//! A model stores, for every retained component index `u`, the sparse-grid
//! interpolant of the cut `g_u(x_u) = f(anchor with x_u substituted)`. The
//! component functions `f_u` are never materialised: they are the Möbius
//! combination `f_u = sum_{v ⊆ u} (-1)^{|u|-|v|} g_v`, and evaluation folds the
//! whole inclusion-exclusion into one coefficient per stored cut.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse_grid::{Domain, HierarchicalGrid};

/// Sorted set of dimension indices naming a component function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentIndex(Vec<usize>);

impl ComponentIndex {
    pub fn new(mut dims: Vec<usize>) -> Self {
        dims.sort_unstable();
        dims.dedup();
        Self(dims)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        // both sorted
        let mut it = other.0.iter();
        self.0.iter().all(|d| it.by_ref().any(|o| o == d))
    }

    /// All subsets, including the empty set and `self`.
    pub fn subsets(&self) -> impl Iterator<Item = ComponentIndex> + '_ {
        let k = self.0.len();
        (0u64..(1u64 << k)).map(move |mask| {
            ComponentIndex(
                (0..k)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| self.0[b])
                    .collect(),
            )
        })
    }
}

/// Truncation settings for [`DdsgModel::build`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdsgOptions {
    pub k_max: usize,
    pub depth: usize,
    /// Active-dimension tolerance: components with a smaller relative integral
    /// are discarded together with their supersets.
    pub eps_eta: f64,
    /// Expansion tolerance: stop adding orders once the relative change of the
    /// cumulative integral falls below it.
    pub eps_rho: f64,
}

impl Default for DdsgOptions {
    fn default() -> Self {
        Self {
            k_max: 1,
            depth: 3,
            eps_eta: 0.0,
            eps_rho: 0.0,
        }
    }
}

/// One retained component: its cut interpolant and the integral of `f_u`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Component {
    pub u: ComponentIndex,
    /// `None` for the constant term, which is `f(anchor)`.
    pub grid: Option<HierarchicalGrid>,
    pub integral: Vec<f64>,
    /// Net inclusion-exclusion weight of this cut in the expansion.
    #[serde(default)]
    pub coefficient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DdsgModel {
    pub dim: usize,
    pub num_outputs: usize,
    pub domain: Domain,
    pub anchor: Vec<f64>,
    pub anchor_value: Vec<f64>,
    pub k_max: usize,
    pub depth: usize,
    pub eps_eta: f64,
    pub eps_rho: f64,
    pub components: Vec<Component>,
    /// Components dropped by active-dimension selection.
    #[serde(default)]
    pub discarded: Vec<ComponentIndex>,
    /// Expansion ratio recorded after each order `k >= 1`.
    #[serde(default)]
    pub expansion_ratios: Vec<f64>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

/// Fallible vector-valued function of a domain point.
pub trait Evaluator: Sync {
    fn num_outputs(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Adapter turning a closure into an [`Evaluator`].
pub struct FnEvaluator<F> {
    outputs: usize,
    f: F,
}

impl<F> FnEvaluator<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    pub fn new(outputs: usize, f: F) -> Self {
        Self { outputs, f }
    }
}

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    fn num_outputs(&self) -> usize {
        self.outputs
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.f)(x)
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Pick an anchor whose function value is close to the function mean.
///
/// Draws `num_samples` uniform points, estimates the mean from them and
/// returns the first sample minimising the L1 distance to that mean.
pub fn select_anchor(
    f: &dyn Evaluator,
    domain: &Domain,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if num_samples == 0 {
        return Err(Error::InvalidArgument("anchor selection needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = domain.dim();
    let mut samples: Vec<Vec<f64>> = (0..num_samples)
        .map(|_| {
            (0..d)
                .map(|j| domain.lower[j] + rng.random::<f64>() * domain.width(j))
                .collect()
        })
        .collect();
    let values = samples
        .par_iter()
        .map(|x| f.evaluate(x))
        .collect::<Result<Vec<_>>>()?;
    let m = f.num_outputs();
    let mut mean = vec![0.0; m];
    for v in &values {
        for (acc, x) in mean.iter_mut().zip(v) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= num_samples as f64);
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, v) in values.iter().enumerate() {
        let dist = l1_distance(v, &mean);
        if dist < best_dist {
            best_dist = dist;
            best = i;
        }
    }
    Ok(samples.swap_remove(best))
}

/// Number of candidate components of order at most `k` in `d` dimensions.
pub fn candidate_count(d: usize, k: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for j in 0..=k.min(d) {
        total += binom;
        binom = binom * (d - j) as u128 / (j + 1) as u128;
    }
    total
}

fn fit_cut(
    f: &dyn Evaluator,
    domain: &Domain,
    anchor: &[f64],
    u: &ComponentIndex,
    depth: usize,
) -> Result<HierarchicalGrid> {
    let m = f.num_outputs();
    let sub = domain.restrict(u.dims());
    let mut grid = HierarchicalGrid::make_regular(u.order(), depth, m, sub)?;
    let mut values = Vec::with_capacity(grid.num_points() * m);
    let mut x = anchor.to_vec();
    for p in 0..grid.num_points() {
        let local = grid.point(p);
        for (&j, &v) in u.dims().iter().zip(&local) {
            x[j] = v;
        }
        let value = f.evaluate(&x)?;
        if value.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: value.len(),
            });
        }
        values.extend(value);
    }
    grid.hierarchize(&values)?;
    Ok(grid)
}

impl DdsgModel {
    /// Build the truncated expansion order by order.
    pub fn build(
        f: &dyn Evaluator,
        domain: &Domain,
        options: DdsgOptions,
        anchor: &[f64],
    ) -> Result<Self> {
        let d = domain.dim();
        let m = f.num_outputs();
        if options.k_max > d {
            return Err(Error::InvalidArgument(format!(
                "k_max = {} exceeds the dimension {d}",
                options.k_max
            )));
        }
        if anchor.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: anchor.len(),
            });
        }
        if !domain.contains(anchor) {
            return Err(Error::OutOfDomain {
                point: anchor.to_vec(),
            });
        }
        let volume = domain.volume();
        let anchor_value = f.evaluate(anchor)?;
        if anchor_value.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: anchor_value.len(),
            });
        }
        let mut diagnostics = Vec::new();
        let mut expansion_ratios = Vec::new();
        let mut discarded = Vec::new();

        // Full-domain integrals of the raw cuts g_v.
        let mut cut_integrals: HashMap<ComponentIndex, Vec<f64>> = HashMap::new();
        let empty = ComponentIndex::empty();
        cut_integrals.insert(empty.clone(), anchor_value.iter().map(|v| v * volume).collect());
        let mut components = vec![Component {
            u: empty.clone(),
            grid: None,
            integral: cut_integrals[&empty].clone(),
            coefficient: 0.0,
        }];
        let mut active: BTreeSet<ComponentIndex> = BTreeSet::new();
        active.insert(empty);
        let mut previous_order = vec![ComponentIndex::empty()];
        let mut cumulative = components[0].integral.clone();

        for k in 1..=options.k_max {
            let candidates = next_candidates(&previous_order, &active, d);
            if candidates.is_empty() {
                break;
            }
            let fitted = candidates
                .par_iter()
                .map(|u| fit_cut(f, domain, anchor, u, options.depth))
                .collect::<Result<Vec<_>>>()?;

            let cumulative_norm = l2(&cumulative);
            let mut order_sum = vec![0.0; m];
            let mut kept = Vec::new();
            for (u, grid) in candidates.into_iter().zip(fitted) {
                let rest: f64 = (0..d)
                    .filter(|j| !u.dims().contains(j))
                    .map(|j| domain.width(j))
                    .product();
                let cut_integral: Vec<f64> = grid.integrate().iter().map(|v| v * rest).collect();
                cut_integrals.insert(u.clone(), cut_integral);
                let mut integral = vec![0.0; m];
                for v in u.subsets() {
                    let sign = if (u.order() - v.order()) % 2 == 0 { 1.0 } else { -1.0 };
                    for (acc, x) in integral.iter_mut().zip(&cut_integrals[&v]) {
                        *acc += sign * x;
                    }
                }
                let eta = if cumulative_norm > 0.0 {
                    l2(&integral) / cumulative_norm
                } else {
                    diagnostics.push(format!(
                        "active-dimension ratio of {:?} has a zero denominator; kept",
                        u.dims()
                    ));
                    f64::INFINITY
                };
                if eta < options.eps_eta {
                    discarded.push(u);
                    continue;
                }
                for (acc, x) in order_sum.iter_mut().zip(&integral) {
                    *acc += x;
                }
                active.insert(u.clone());
                kept.push(u.clone());
                components.push(Component {
                    u,
                    grid: Some(grid),
                    integral,
                    coefficient: 0.0,
                });
            }
            let rho = if cumulative_norm > 0.0 {
                l2(&order_sum) / cumulative_norm
            } else {
                diagnostics.push(format!("expansion ratio at order {k} has a zero denominator"));
                f64::INFINITY
            };
            expansion_ratios.push(rho);
            for (acc, x) in cumulative.iter_mut().zip(&order_sum) {
                *acc += x;
            }
            if kept.is_empty() {
                break;
            }
            if rho < options.eps_rho {
                diagnostics.push(format!("expansion converged at order {k} (ratio {rho:e})"));
                break;
            }
            previous_order = kept;
        }

        let mut model = Self {
            dim: d,
            num_outputs: m,
            domain: domain.clone(),
            anchor: anchor.to_vec(),
            anchor_value,
            k_max: options.k_max,
            depth: options.depth,
            eps_eta: options.eps_eta,
            eps_rho: options.eps_rho,
            components,
            discarded,
            expansion_ratios,
            diagnostics,
        };
        model.assign_coefficients();
        Ok(model)
    }

    /// Inclusion-exclusion weight of each stored cut over the retained lattice.
    fn assign_coefficients(&mut self) {
        let coefficients: Vec<f64> = self
            .components
            .iter()
            .map(|v| {
                self.components
                    .iter()
                    .filter(|u| v.u.is_subset_of(&u.u))
                    .map(|u| if (u.u.order() - v.u.order()) % 2 == 0 { 1.0 } else { -1.0 })
                    .sum()
            })
            .collect();
        for (c, w) in self.components.iter_mut().zip(coefficients) {
            c.coefficient = w;
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &ComponentIndex> {
        self.components.iter().map(|c| &c.u)
    }

    /// Grid points across all non-constant cuts.
    pub fn num_points(&self) -> usize {
        self.components
            .iter()
            .filter_map(|c| c.grid.as_ref())
            .map(HierarchicalGrid::num_points)
            .sum()
    }

    pub fn max_order(&self) -> usize {
        self.components.iter().map(|c| c.u.order()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_outputs];
        self.evaluate_into(x, &mut out)?;
        Ok(out)
    }

    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        let m = self.num_outputs;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut local = Vec::with_capacity(self.max_order());
        let mut unit = Vec::with_capacity(self.max_order());
        let mut buf = vec![0.0; m];
        for c in &self.components {
            if c.coefficient == 0.0 {
                continue;
            }
            match &c.grid {
                None => {
                    for (o, v) in out.iter_mut().zip(&self.anchor_value) {
                        *o += c.coefficient * v;
                    }
                }
                Some(grid) => {
                    local.clear();
                    local.extend(c.u.dims().iter().map(|&j| x[j]));
                    unit.resize(local.len(), 0.0);
                    grid.domain().to_unit(&local, &mut unit)?;
                    grid.interpolate_unit_into(&unit, &mut buf);
                    for (o, v) in out.iter_mut().zip(&buf) {
                        *o += c.coefficient * v;
                    }
                }
            }
        }
        Ok(())
    }

    /// Integral of the truncated expansion over the domain.
    pub fn integrate(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.num_outputs];
        for c in &self.components {
            for (t, v) in total.iter_mut().zip(&c.integral) {
                *t += v;
            }
        }
        total
    }

    /// Every point at which the model sampled `f`: the anchor followed by the
    /// full-dimensional embedding of each cut node, with the fitted values.
    pub fn sample_points(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let m = self.num_outputs;
        let mut out = vec![(self.anchor.clone(), self.anchor_value.clone())];
        for c in &self.components {
            if let Some(grid) = &c.grid {
                for p in 0..grid.num_points() {
                    let mut x = self.anchor.clone();
                    for (&j, v) in c.u.dims().iter().zip(grid.point(p)) {
                        x[j] = v;
                    }
                    out.push((x, grid.values()[p * m..(p + 1) * m].to_vec()));
                }
            }
        }
        out
    }

    /// Re-derive coefficients after deserialisation of a hand-edited model.
    pub fn refresh_coefficients(&mut self) {
        self.assign_coefficients();
    }
}

/// Components of the next order whose proper subsets are all active.
fn next_candidates(
    previous_order: &[ComponentIndex],
    active: &BTreeSet<ComponentIndex>,
    d: usize,
) -> Vec<ComponentIndex> {
    let mut out = BTreeSet::new();
    for v in previous_order {
        let start = v.dims().last().map_or(0, |&j| j + 1);
        for j in start..d {
            let mut dims = v.dims().to_vec();
            dims.push(j);
            let u = ComponentIndex(dims);
            let closed = (0..u.order()).all(|drop| {
                let sub: Vec<usize> = u
                    .dims()
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != drop)
                    .map(|(_, &x)| x)
                    .collect();
                active.contains(&ComponentIndex(sub))
            });
            if closed {
                out.insert(u);
            }
        }
    }
    out.into_iter().collect()
}
