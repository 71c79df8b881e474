//! N-country international real business cycle model with capital
//! adjustment costs.
//!
//! The state is `(a_1..a_N, k_1..k_N)` (log-productivities, then capital) and
//! the policy is `(k'_1..k'_N, lambda)`, where `lambda` is the multiplier on
//! the aggregate resource constraint.

mod shocks;

use serde::{Deserialize, Serialize};

pub use shocks::{ShockKind, ShockRule, TENSOR_MAX_DIM};

use crate::error::{Error, Result};
use crate::sparse_grid::Domain;

/// Floor applied before taking log10 of an Euler error.
pub const LOG10_FLOOR: f64 = -16.0;

/// Optional replacements for the baseline calibration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, rename = "sigE", skip_serializing_if = "Option::is_none")]
    pub sig_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_eis: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_eis: Option<f64>,
    /// Explicit per-country curvatures; replaces the `a_eis..b_eis` ramp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrbcParams {
    pub n: usize,
    pub kappa: f64,
    pub beta: f64,
    pub delta: f64,
    pub phi: f64,
    pub rho: f64,
    #[serde(rename = "sigE")]
    pub sig_e: f64,
    /// TFP normaliser `A`.
    pub a_tfp: f64,
    pub gamma: Vec<f64>,
    pub tau: Vec<f64>,
}

impl IrbcParams {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_overrides(n, &ParamOverrides::default())
    }

    pub fn with_overrides(n: usize, o: &ParamOverrides) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("country count must be at least 1".into()));
        }
        let kappa = o.kappa.unwrap_or(0.36);
        let beta = o.beta.unwrap_or(0.99);
        let delta = o.delta.unwrap_or(0.01);
        let phi = o.phi.unwrap_or(0.5);
        let rho = o.rho.unwrap_or(0.95);
        let sig_e = o.sig_e.unwrap_or(0.01);
        let a_eis = o.a_eis.unwrap_or(0.25);
        let b_eis = o.b_eis.unwrap_or(1.0);
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidArgument(format!("kappa must lie in (0, 1), got {kappa}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!("beta must lie in (0, 1), got {beta}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!("delta must lie in [0, 1), got {delta}")));
        }
        if !(phi >= 0.0) || !(rho.abs() < 1.0) || !(sig_e >= 0.0) {
            return Err(Error::InvalidArgument(
                "need phi >= 0, |rho| < 1 and sigE >= 0".into(),
            ));
        }
        let gamma = match &o.gamma {
            Some(g) if g.len() != n => {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: g.len(),
                })
            }
            Some(g) => g.clone(),
            None if n == 1 => vec![a_eis],
            None => (0..n)
                .map(|j| a_eis + j as f64 * (b_eis - a_eis) / (n - 1) as f64)
                .collect(),
        };
        if gamma.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidArgument("gamma values must be positive".into()));
        }
        let a_tfp = (1.0 - beta * (1.0 - delta)) / (kappa * beta);
        let tau = gamma.iter().map(|g| a_tfp.powf(1.0 / g)).collect();
        Ok(Self {
            n,
            kappa,
            beta,
            delta,
            phi,
            rho,
            sig_e,
            a_tfp,
            gamma,
            tau,
        })
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n
    }

    pub fn policy_dim(&self) -> usize {
        self.n + 1
    }

    pub fn innovation_dim(&self) -> usize {
        self.n + 1
    }

    /// Half-width of the productivity box.
    pub fn a_bound(&self) -> f64 {
        0.8 * self.sig_e / (1.0 - self.rho)
    }

    pub fn domain(&self) -> Domain {
        let n = self.n;
        let ab = self.a_bound();
        let mut lower = vec![-ab; n];
        let mut upper = vec![ab; n];
        lower.extend(std::iter::repeat_n(0.8, n));
        upper.extend(std::iter::repeat_n(1.2, n));
        // a degenerate productivity box (sigE = 0) still needs positive width
        for j in 0..n {
            if lower[j] >= upper[j] {
                lower[j] = -1e-9;
                upper[j] = 1e-9;
            }
        }
        Domain { lower, upper }
    }

    /// Steady-state multiplier: root of `sum_j lambda^-gamma_j = N (1 - delta / A)`.
    pub fn steady_lambda(&self) -> Result<f64> {
        let target = self.n as f64 * (1.0 - self.delta / self.a_tfp);
        let g = |lam: f64| self.gamma.iter().map(|&gj| lam.powf(-gj)).sum::<f64>() - target;
        let (mut lo, mut hi) = (1.0, 1.0);
        let mut expansions = 0;
        while g(lo) < 0.0 || g(hi) > 0.0 {
            if g(lo) < 0.0 {
                lo *= 0.5;
            }
            if g(hi) > 0.0 {
                hi *= 2.0;
            }
            expansions += 1;
            if expansions > 200 {
                return Err(Error::Bracket { lo, hi });
            }
        }
        if !(g(lo) >= 0.0 && g(hi) <= 0.0) {
            return Err(Error::Bracket { lo, hi });
        }
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Deterministic steady state `(state, policy)`.
    pub fn steady_state(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let mut state = vec![0.0; n];
        state.extend(std::iter::repeat_n(1.0, n));
        let mut policy = vec![1.0; n];
        policy.push(self.steady_lambda()?);
        Ok((state, policy))
    }
}

/// Output `exp(a) A k^kappa` of one country.
pub fn production(a: f64, k: f64, params: &IrbcParams) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("capital must be positive, got {k}")));
    }
    Ok(a.exp() * params.a_tfp * k.powf(params.kappa))
}

/// Next log-productivities `rho a_j + sigE (e + e_j)`.
pub fn transition(a: &[f64], innovations: &[f64], params: &IrbcParams, out: &mut [f64]) {
    let e = innovations[0];
    for j in 0..a.len() {
        out[j] = params.rho * a[j] + params.sig_e * (e + innovations[1 + j]);
    }
}

/// A policy function `state -> (k'_1..k'_N, lambda)`.
pub trait PolicyEval: Sync {
    fn policy_into(&self, state: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Policy returning the same vector everywhere.
#[derive(Debug, Clone)]
pub struct ConstantPolicy(pub Vec<f64>);

impl PolicyEval for ConstantPolicy {
    fn policy_into(&self, _state: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.0);
        Ok(())
    }
}

impl<T: PolicyEval + ?Sized> PolicyEval for &T {
    fn policy_into(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).policy_into(state, out)
    }
}

/// Model calibration plus the quadrature rule used for expectations.
#[derive(Debug, Clone)]
pub struct IrbcModel {
    pub params: IrbcParams,
    pub domain: Domain,
    pub shocks: ShockRule,
}

impl IrbcModel {
    pub fn new(params: IrbcParams, shocks: ShockRule) -> Result<Self> {
        if shocks.dim() != params.innovation_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.innovation_dim(),
                got: shocks.dim(),
            });
        }
        let domain = params.domain();
        Ok(Self {
            params,
            domain,
            shocks,
        })
    }

    pub fn with_kind(params: IrbcParams, kind: ShockKind) -> Result<Self> {
        let rule = ShockRule::build(params.innovation_dim(), kind)?;
        Self::new(params, rule)
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Conditional expectations `E[lambda' * (marginal return of k'_j)]` for
    /// each country, given the capital choice `k_next`. Next states are
    /// clamped to the box before `next_policy` is evaluated.
    pub fn expectation_terms(
        &self,
        state: &[f64],
        k_next: &[f64],
        next_policy: &dyn PolicyEval,
        terms: &mut [f64],
    ) -> Result<()> {
        let p = &self.params;
        let n = p.n;
        if let Some(&k) = k_next.iter().find(|&&k| !(k > 0.0)) {
            return Err(Error::Domain(format!("next-period capital must be positive, got {k}")));
        }
        let mut buf = [0.0; 96];
        let mut heap = Vec::new();
        let scratch = if 4 * n + 1 <= buf.len() {
            &mut buf[..4 * n + 1]
        } else {
            heap.resize(4 * n + 1, 0.0);
            &mut heap[..]
        };
        let (next_state, rest) = scratch.split_at_mut(2 * n);
        let (next, a_next) = rest.split_at_mut(n + 1);
        terms.iter_mut().for_each(|t| *t = 0.0);
        for (node, &w) in self.shocks.nodes.iter().zip(&self.shocks.weights) {
            transition(&state[..n], node, p, a_next);
            next_state[..n].copy_from_slice(a_next);
            next_state[n..].copy_from_slice(k_next);
            self.domain.clamp(next_state);
            next_policy.policy_into(next_state, next)?;
            let lam_next = next[n];
            for j in 0..n {
                let ratio = next[j] / k_next[j];
                let ret = a_next[j].exp() * p.kappa * p.a_tfp * k_next[j].powf(p.kappa - 1.0)
                    + 1.0
                    - p.delta
                    + 0.5 * p.phi * (ratio - 1.0) * (ratio + 1.0);
                terms[j] += w * lam_next * ret;
            }
        }
        Ok(())
    }

    /// Equilibrium residuals given precomputed expectation terms.
    pub fn residuals_from_terms(
        &self,
        state: &[f64],
        policy: &[f64],
        terms: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let p = &self.params;
        let n = p.n;
        let lam = policy[n];
        if !(lam > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lam}")));
        }
        let (a, k) = state.split_at(n);
        let mut supply = 0.0;
        let mut demand = 0.0;
        for j in 0..n {
            let kn = policy[j];
            let growth = kn / k[j] - 1.0;
            out[j] = lam * (1.0 + p.phi * growth) - p.beta * terms[j];
            supply += production(a[j], k[j], p)?;
            demand += (lam / p.tau[j]).powf(-p.gamma[j]) + kn - (1.0 - p.delta) * k[j]
                + 0.5 * p.phi * k[j] * growth * growth;
        }
        out[n] = supply - demand;
        Ok(())
    }

    /// The `N + 1` period equilibrium conditions.
    pub fn residuals(
        &self,
        state: &[f64],
        policy: &[f64],
        next_policy: &dyn PolicyEval,
    ) -> Result<Vec<f64>> {
        let n = self.params.n;
        let mut terms = vec![0.0; n];
        self.expectation_terms(state, &policy[..n], next_policy, &mut terms)?;
        let mut out = vec![0.0; n + 1];
        self.residuals_from_terms(state, policy, &terms, &mut out)?;
        Ok(out)
    }

    /// Unit-free Euler errors `beta E[..] / (lambda (1 + phi (k'/k - 1))) - 1`
    /// with today's and tomorrow's choices both taken from `policy`.
    pub fn euler_errors(&self, state: &[f64], policy: &dyn PolicyEval) -> Result<Vec<f64>> {
        let p = &self.params;
        let n = p.n;
        let mut today = vec![0.0; n + 1];
        policy.policy_into(state, &mut today)?;
        let mut terms = vec![0.0; n];
        self.expectation_terms(state, &today[..n], policy, &mut terms)?;
        let lam = today[n];
        Ok((0..n)
            .map(|j| {
                let lhs = lam * (1.0 + p.phi * (today[j] / state[n + j] - 1.0));
                p.beta * terms[j] / lhs - 1.0
            })
            .collect())
    }
}

/// `log10 |x|`, floored.
pub fn log10_abs(x: f64) -> f64 {
    let v = x.abs().log10();
    if v.is_nan() || v < LOG10_FLOOR {
        LOG10_FLOOR
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn calibration() {
        let p = IrbcParams::new(2).unwrap();
        assert!((p.a_tfp - 0.055836139).abs() < 1e-9);
        assert_eq!(p.gamma, vec![0.25, 1.0]);
        assert!((p.tau[1] - p.a_tfp).abs() < 1e-15);
        assert!((p.tau[0] - p.a_tfp.powi(4)).abs() < 1e-15);
        assert!((p.a_bound() - 0.16).abs() < 1e-12);
        let p1 = IrbcParams::new(1).unwrap();
        assert_eq!(p1.gamma, vec![0.25]);
        let p4 = IrbcParams::new(4).unwrap();
        assert_eq!(p4.gamma, vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn production_examples() {
        let p = IrbcParams::new(1).unwrap();
        assert!((production(0.0, 1.0, &p).unwrap() - 0.0199 / 0.3564).abs() < 1e-15);
        assert!((production(2f64.ln(), 1.0, &p).unwrap() - 2.0 * p.a_tfp).abs() < 1e-15);
        assert!(matches!(production(0.0, 0.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn transition_example() {
        let p = IrbcParams::new(1).unwrap();
        let mut out = [0.0];
        transition(&[0.1], &[1.0, 1.0], &p, &mut out);
        assert!((out[0] - 0.115).abs() < 1e-15);
        transition(&[0.0], &[0.0, 0.0], &p, &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn one_country_steady_lambda() {
        let p = IrbcParams::new(1).unwrap();
        let lam = p.steady_lambda().unwrap();
        let closed = (1.0 - p.delta / p.a_tfp).powf(-4.0);
        assert!((lam - closed).abs() < 1e-10);
        assert!((lam - 2.2026).abs() < 1e-3);
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        for n in [1, 2, 4, 8] {
            let p = IrbcParams::new(n).unwrap();
            let (x, z) = p.steady_state().unwrap();
            for rule in [ShockRule::zero(n + 1), ShockRule::monomial(n + 1)] {
                // with shocks the expectation moves off the deterministic
                // point, so only the zero rule is an exact fixed point
                let exact = rule.len() == 1;
                let m = IrbcModel::new(p.clone(), rule).unwrap();
                let r = m.residuals(&x, &z, &ConstantPolicy(z.clone())).unwrap();
                if exact {
                    assert!(r.iter().all(|v| v.abs() < 1e-10), "N={n}: {r:?}");
                }
                // the resource constraint does not involve expectations
                assert!(r[n].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lambda_perturbation_moves_resource_residual() {
        let p = IrbcParams::new(2).unwrap();
        let m = IrbcModel::new(p.clone(), ShockRule::zero(3)).unwrap();
        let (x, mut z) = p.steady_state().unwrap();
        let base = m.residuals(&x, &z, &ConstantPolicy(z.clone())).unwrap()[2];
        let lam = z[2];
        z[2] *= 1.0 + 1e-6;
        let bumped = m.residuals(&x, &z, &ConstantPolicy(z.clone())).unwrap()[2];
        let slope: f64 = (0..2)
            .map(|j| p.gamma[j] * (lam / p.tau[j]).powf(-p.gamma[j]))
            .sum::<f64>()
            * 1e-6;
        assert!(((bumped - base) - slope).abs() < 1e-9 * slope.abs().max(1.0) + 1e-12);
    }

    #[test]
    fn symmetric_countries_permute() {
        let o = ParamOverrides {
            gamma: Some(vec![0.5, 0.5, 0.5]),
            ..Default::default()
        };
        let p = IrbcParams::with_overrides(3, &o).unwrap();
        let m = IrbcModel::with_kind(p, ShockKind::Monomial).unwrap();
        let next = |s: &[f64], out: &mut [f64]| {
            for j in 0..3 {
                out[j] = 1.0 + 0.1 * s[j] + 0.05 * (s[3 + j] - 1.0);
            }
            out[3] = 1.5 - 0.2 * s.iter().sum::<f64>() / 6.0;
        };
        struct F<G>(G);
        impl<G: Fn(&[f64], &mut [f64]) + Sync> PolicyEval for F<G> {
            fn policy_into(&self, s: &[f64], out: &mut [f64]) -> Result<()> {
                (self.0)(s, out);
                Ok(())
            }
        }
        let f = F(next);
        let x = [0.05, -0.02, 0.1, 0.9, 1.05, 1.1];
        let z = [1.01, 0.97, 1.0, 1.3];
        let r = m.residuals(&x, &z, &f).unwrap();
        let perm = [2, 0, 1];
        let xp: Vec<f64> = (0..6).map(|i| x[if i < 3 { perm[i] } else { 3 + perm[i - 3] }]).collect();
        let zp: Vec<f64> = (0..4).map(|i| if i < 3 { z[perm[i]] } else { z[3] }).collect();
        let rp = m.residuals(&xp, &zp, &f).unwrap();
        for i in 0..3 {
            assert!((rp[i] - r[perm[i]]).abs() < 1e-14);
        }
        assert!((rp[3] - r[3]).abs() < 1e-14);
    }

    #[test]
    fn deterministic_residuals_match_direct_formula() {
        let p = IrbcParams::new(2).unwrap();
        let m = IrbcModel::new(p.clone(), ShockRule::zero(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let next = ConstantPolicy(vec![1.02, 0.99, 2.0]);
        for _ in 0..20 {
            let x = [
                rng.random_range(-0.16..0.16),
                rng.random_range(-0.16..0.16),
                rng.random_range(0.8..1.2),
                rng.random_range(0.8..1.2),
            ];
            let z = [rng.random_range(0.9..1.1), rng.random_range(0.9..1.1), rng.random_range(0.5..3.0)];
            let r = m.residuals(&x, &z, &next).unwrap();
            let (kappa, beta, delta, phi, rho, a) = (0.36, 0.99, 0.01, 0.5, 0.95, p.a_tfp);
            let mut out = [0.0; 3];
            for j in 0..2 {
                let an = rho * x[j];
                let q = next.0[j] / z[j];
                let rhs = beta
                    * next.0[2]
                    * (an.exp() * kappa * a * z[j].powf(kappa - 1.0) + 1.0 - delta
                        + phi / 2.0 * (q - 1.0) * (q + 1.0));
                out[j] = z[2] * (1.0 + phi * (z[j] / x[2 + j] - 1.0)) - rhs;
            }
            let g = [0.25, 1.0];
            let mut rc = 0.0;
            for j in 0..2 {
                let t = a.powf(1.0 / g[j]);
                rc += x[j].exp() * a * x[2 + j].powf(kappa)
                    - ((z[2] / t).powf(-g[j]) + z[j] - (1.0 - delta) * x[2 + j]
                        + phi / 2.0 * x[2 + j] * (z[j] / x[2 + j] - 1.0).powi(2));
            }
            out[2] = rc;
            for i in 0..3 {
                assert!((r[i] - out[i]).abs() < 1e-12, "{i}: {} vs {}", r[i], out[i]);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_policy() {
        let p = IrbcParams::new(1).unwrap();
        let m = IrbcModel::with_kind(p, ShockKind::Monomial).unwrap();
        let next = ConstantPolicy(vec![1.0, 2.0]);
        assert!(matches!(m.residuals(&[0.0, 1.0], &[1.0, -1.0], &next), Err(Error::Domain(_))));
        assert!(matches!(m.residuals(&[0.0, 1.0], &[0.0, 1.0], &next), Err(Error::Domain(_))));
    }

    #[test]
    fn euler_error_zero_at_fixed_point() {
        let p = IrbcParams::new(2).unwrap();
        let m = IrbcModel::new(p.clone(), ShockRule::zero(3)).unwrap();
        let (x, z) = p.steady_state().unwrap();
        let e = m.euler_errors(&x, &ConstantPolicy(z)).unwrap();
        assert!(e.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(log10_abs(0.0), LOG10_FLOOR);
        assert_eq!(log10_abs(1e-16), -16.0);
        assert!((log10_abs(-1e-3) + 3.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_reject_bad_values() {
        let o = ParamOverrides {
            gamma: Some(vec![0.5]),
            ..Default::default()
        };
        assert!(IrbcParams::with_overrides(2, &o).is_err());
        let o = ParamOverrides {
            beta: Some(1.5),
            ..Default::default()
        };
        assert!(IrbcParams::with_overrides(2, &o).is_err());
        assert!(IrbcParams::new(0).is_err());
    }
}
