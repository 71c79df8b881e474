use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::irbc::{ConstantPolicy, IrbcModel, IrbcParams, ShockRule};
use crate::policy::LinearPolicy;

const FD_STEP: f64 = 1e-6;
const MAX_SWEEPS: usize = 1_000_000;
const FIXED_POINT_TOL: f64 = 1e-13;

/// Zero-shock equilibrium conditions as a function of today's state, today's
/// policy and tomorrow's policy.
fn residual(model: &IrbcModel, x: &[f64], p: &[f64], pn: &[f64]) -> Result<Vec<f64>> {
    model.residuals(x, p, &ConstantPolicy(pn.to_vec()))
}

fn central_jacobian<F>(f: F, at: &[f64], rows: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(rows, at.len());
    let mut v = at.to_vec();
    for c in 0..at.len() {
        let h = FD_STEP * (1.0 + at[c].abs());
        v[c] = at[c] + h;
        let up = f(&v)?;
        v[c] = at[c] - h;
        let down = f(&v)?;
        v[c] = at[c];
        for r in 0..rows {
            jac[(r, c)] = (up[r] - down[r]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// First-order approximation of the policy around the deterministic steady
/// state.
///
/// With `x' = Ax x + Bp p` under zero shocks and `p = P x` in deviations, the
/// linearised conditions `Gx x + Gp p + Gn p' = 0` give the quadratic matrix
/// equation `(Gx + Gn P Ax) + (Gp + Gn P Bp) P = 0`, solved by fixed-point
/// iteration from `P = 0`. The state transition `Ax + Bp P` must have exactly
/// `2N` stable roots.
pub fn linear_policy(params: &IrbcParams) -> Result<LinearPolicy> {
    let n = params.n;
    let nx = 2 * n;
    let np = n + 1;
    let model = IrbcModel::new(params.clone(), ShockRule::zero(np))?;
    let (xs, ps) = params.steady_state()?;
    let gx = central_jacobian(|x| residual(&model, x, &ps, &ps), &xs, np)?;
    let gp = central_jacobian(|p| residual(&model, &xs, p, &ps), &ps, np)?;
    let gn = central_jacobian(|pn| residual(&model, &xs, &ps, pn), &ps, np)?;
    let mut ax = DMatrix::zeros(nx, nx);
    let mut bp = DMatrix::zeros(nx, np);
    for j in 0..n {
        ax[(j, j)] = params.rho;
        bp[(n + j, j)] = 1.0;
    }
    let mut p = DMatrix::<f64>::zeros(np, nx);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let lhs = &gp + &gn * &p * &bp;
        let rhs = -(&gx + &gn * &p * &ax);
        let next = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Domain("singular system in the perturbation solve".into()))?;
        let change = (&next - &p).amax();
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if change < FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    let transition = &ax + &bp * &p;
    let stable = transition
        .complex_eigenvalues()
        .iter()
        .filter(|e| e.norm() < 1.0)
        .count();
    if !converged || stable != nx {
        return Err(Error::BlanchardKahn {
            stable,
            unstable: nx - stable,
            required: nx,
        });
    }
    Ok(LinearPolicy {
        state_ss: xs,
        policy_ss: ps,
        matrix: (0..np)
            .map(|r| (0..nx).map(|c| p[(r, c)]).collect())
            .collect(),
    })
}

/// Spectral radius of the state transition implied by a linear policy.
pub fn transition_spectral_radius(params: &IrbcParams, policy: &LinearPolicy) -> f64 {
    let n = params.n;
    let nx = 2 * n;
    let mut t = DMatrix::<f64>::zeros(nx, nx);
    for j in 0..n {
        t[(j, j)] = params.rho;
        for c in 0..nx {
            t[(n + j, c)] = policy.matrix[j][c];
        }
    }
    t.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}
