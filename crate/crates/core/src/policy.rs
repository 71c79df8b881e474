//! Policy-function approximators that time iteration can produce and consume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdmr::DdsgModel;
use crate::irbc::PolicyEval;
use crate::sparse_grid::HierarchicalGrid;

/// First-order policy `p(x) = p_ss + P (x - x_ss)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicy {
    pub state_ss: Vec<f64>,
    pub policy_ss: Vec<f64>,
    /// Row-major `policy_dim x state_dim`.
    pub matrix: Vec<Vec<f64>>,
}

impl PolicyEval for LinearPolicy {
    fn policy_into(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        if state.len() != self.state_ss.len() {
            return Err(Error::DimensionMismatch {
                expected: self.state_ss.len(),
                got: state.len(),
            });
        }
        for (i, row) in self.matrix.iter().enumerate() {
            out[i] = self.policy_ss[i]
                + row
                    .iter()
                    .zip(state.iter().zip(&self.state_ss))
                    .map(|(p, (x, s))| p * (x - s))
                    .sum::<f64>();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Policy {
    Constant { values: Vec<f64> },
    Linear(LinearPolicy),
    Sg { grid: HierarchicalGrid },
    Ddsg { model: DdsgModel },
}

impl Policy {
    /// Number of stored grid points (zero for closed-form policies).
    pub fn num_points(&self) -> usize {
        match self {
            Policy::Constant { .. } | Policy::Linear(_) => 0,
            Policy::Sg { grid } => grid.num_points(),
            Policy::Ddsg { model } => model.num_points(),
        }
    }

    pub fn evaluate(&self, state: &[f64], outputs: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; outputs];
        self.policy_into(state, &mut out)?;
        Ok(out)
    }
}

impl PolicyEval for Policy {
    fn policy_into(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Policy::Constant { values } => {
                out.copy_from_slice(values);
                Ok(())
            }
            Policy::Linear(l) => l.policy_into(state, out),
            Policy::Sg { grid } => grid.interpolate_into(state, out),
            Policy::Ddsg { model } => model.evaluate_into(state, out),
        }
    }
}

impl PolicyEval for HierarchicalGrid {
    fn policy_into(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.interpolate_into(state, out)
    }
}

impl PolicyEval for DdsgModel {
    fn policy_into(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.evaluate_into(state, out)
    }
}
