use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box mapped affinely onto the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

// Relative slack accepted at the box faces before a point counts as outside.
const FACE_SLACK: f64 = 1e-12;

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("domain needs at least one dimension".into()));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "domain bounds in dimension {j} must satisfy lower < upper (got {lo}, {hi})"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).product()
    }

    /// Sub-box spanned by the listed dimensions.
    pub fn restrict(&self, dims: &[usize]) -> Self {
        Self {
            lower: dims.iter().map(|&j| self.lower[j]).collect(),
            upper: dims.iter().map(|&j| self.upper[j]).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(j, &v)| {
                let slack = FACE_SLACK * self.width(j);
                v >= self.lower[j] - slack && v <= self.upper[j] + slack
            })
    }

    /// Componentwise projection onto the box. Returns how many coordinates moved.
    pub fn clamp(&self, x: &mut [f64]) -> usize {
        let mut moved = 0;
        for (j, v) in x.iter_mut().enumerate() {
            if *v < self.lower[j] {
                *v = self.lower[j];
                moved += 1;
            } else if *v > self.upper[j] {
                *v = self.upper[j];
                moved += 1;
            } else if v.is_nan() {
                *v = 0.5 * (self.lower[j] + self.upper[j]);
                moved += 1;
            }
        }
        moved
    }

    /// Map a point of the box into the unit cube, rejecting points outside.
    pub fn to_unit(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(Error::OutOfDomain { point: x.to_vec() });
        }
        for (j, (o, &v)) in out.iter_mut().zip(x).enumerate() {
            *o = ((v - self.lower[j]) / self.width(j)).clamp(0.0, 1.0);
        }
        Ok(())
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(j, &t)| self.lower[j] + t * self.width(j))
            .collect()
    }
}
