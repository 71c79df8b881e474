use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::irbc::{IrbcModel, PolicyEval};

/// Residual tolerance of a point solve (sup norm).
pub const POINT_TOL: f64 = 1e-9;
const MAX_NEWTON: usize = 60;
const MAX_HALVINGS: usize = 30;
const FD_STEP: f64 = 1e-7;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

struct System<'a> {
    model: &'a IrbcModel,
    state: &'a [f64],
    prev: &'a dyn PolicyEval,
    terms: Vec<f64>,
}

impl System<'_> {
    /// Residuals at `z`, caching the expectation terms for `z`'s capital.
    fn eval(&mut self, z: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.model.n();
        self.model
            .expectation_terms(self.state, &z[..n], self.prev, &mut self.terms)?;
        self.model.residuals_from_terms(self.state, z, &self.terms, out)
    }

    /// Forward-difference Jacobian at `z` with residual `f`. The `lambda`
    /// column reuses the expectation terms, which do not depend on it.
    fn jacobian(&mut self, z: &[f64], f: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.model.n();
        let m = n + 1;
        let base_terms = self.terms.clone();
        let mut jac = DMatrix::zeros(m, m);
        let mut zt = z.to_vec();
        let mut ft = vec![0.0; m];
        for c in 0..m {
            let h = FD_STEP * (1.0 + z[c].abs());
            zt[c] = z[c] + h;
            if c < n {
                self.eval(&zt, &mut ft)?;
            } else {
                self.model
                    .residuals_from_terms(self.state, &zt, &base_terms, &mut ft)?;
            }
            for r in 0..m {
                jac[(r, c)] = (ft[r] - f[r]) / h;
            }
            zt[c] = z[c];
        }
        self.terms = base_terms;
        Ok(jac)
    }
}

fn newton(
    model: &IrbcModel,
    state: &[f64],
    start: &[f64],
    prev: &dyn PolicyEval,
) -> std::result::Result<Vec<f64>, f64> {
    let m = model.n() + 1;
    let mut sys = System {
        model,
        state,
        prev,
        terms: vec![0.0; model.n()],
    };
    if start.iter().any(|&v| !(v > 0.0)) {
        return Err(f64::INFINITY);
    }
    let mut z = start.to_vec();
    let mut f = vec![0.0; m];
    if sys.eval(&z, &mut f).is_err() {
        return Err(f64::INFINITY);
    }
    let mut norm = sup(&f);
    let mut trial = vec![0.0; m];
    let mut ft = vec![0.0; m];
    for _ in 0..MAX_NEWTON {
        if norm <= POINT_TOL {
            return Ok(z);
        }
        let jac = sys.jacobian(&z, &f).map_err(|_| norm)?;
        let rhs = DVector::from_iterator(m, f.iter().map(|v| -v));
        let step = jac.lu().solve(&rhs).ok_or(norm)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            for i in 0..m {
                trial[i] = z[i] + t * step[i];
            }
            if trial.iter().all(|&v| v > 0.0) && sys.eval(&trial, &mut ft).is_ok() {
                let tn = sup(&ft);
                if tn < norm || tn <= POINT_TOL {
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(norm);
        }
        z.copy_from_slice(&trial);
        f.copy_from_slice(&ft);
        norm = sup(&f);
    }
    if norm <= POINT_TOL {
        Ok(z)
    } else {
        Err(norm)
    }
}

/// Solve the period equilibrium conditions at `state` for `(k', lambda)`
/// given next period's policy `prev`, starting from `guess` and retrying once
/// from `fallback`.
pub fn solve_point(
    model: &IrbcModel,
    state: &[f64],
    guess: &[f64],
    prev: &dyn PolicyEval,
    fallback: &[f64],
) -> Result<Vec<f64>> {
    match newton(model, state, guess, prev) {
        Ok(z) => Ok(z),
        Err(first) => newton(model, state, fallback, prev).map_err(|second| Error::PointSolve {
            state: state.to_vec(),
            residual_norm: if second.is_finite() { second } else { first },
        }),
    }
}
