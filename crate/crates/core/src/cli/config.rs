use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irbc::{IrbcModel, IrbcParams, ParamOverrides, ShockKind};
use crate::time_iteration::{AnchorMode, Approximator, GuessKind, Metric, TiConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    #[serde(rename = "N")]
    pub n: usize,
    pub overrides: ParamOverrides,
    pub shocks: ShockKind,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            n: 2,
            overrides: ParamOverrides::default(),
            shocks: ShockKind::Monomial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproximatorKind {
    #[serde(alias = "sg")]
    SG,
    #[serde(alias = "ddsg")]
    DDSG,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproximatorSection {
    pub kind: ApproximatorKind,
    #[serde(rename = "gridDepth")]
    pub grid_depth: usize,
    #[serde(rename = "maxRef")]
    pub max_ref: usize,
    #[serde(rename = "surplThreshold")]
    pub surpl_threshold: f64,
    pub k_max: usize,
    pub anchor: AnchorMode,
}

impl Default for ApproximatorSection {
    fn default() -> Self {
        Self {
            kind: ApproximatorKind::SG,
            grid_depth: 3,
            max_ref: 0,
            surpl_threshold: 1e-3,
            k_max: 1,
            anchor: AnchorMode::SteadyState,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol_ti: f64,
    pub max_iters: usize,
    #[serde(rename = "polUpdateWeight")]
    pub pol_update_weight: f64,
    pub metric: Metric,
    pub patience: usize,
    pub guess: GuessKind,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = TiConfig::default();
        Self {
            tol_ti: d.tol_ti,
            max_iters: d.max_iters,
            pol_update_weight: d.pol_update_weight,
            metric: d.metric,
            patience: d.patience,
            guess: d.guess,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    #[serde(rename = "T")]
    pub t: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            t: 10_000,
            burn_in: 1_000,
            seed: 1,
        }
    }
}

/// Complete run description read from a JSON file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub approximator: ApproximatorSection,
    pub solver: SolverSection,
    pub evaluation: EvaluationSection,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.n == 0 {
            return Err(Error::Config("model.N must be at least 1".into()));
        }
        if self.evaluation.t <= self.evaluation.burn_in {
            return Err(Error::Config(format!(
                "evaluation.T ({}) must exceed evaluation.burn_in ({})",
                self.evaluation.t, self.evaluation.burn_in
            )));
        }
        if self.approximator.kind == ApproximatorKind::DDSG
            && self.approximator.k_max > 2 * self.model.n
        {
            return Err(Error::Config(format!(
                "approximator.k_max ({}) exceeds the state dimension {}",
                self.approximator.k_max,
                2 * self.model.n
            )));
        }
        self.ti_config().validate()?;
        IrbcParams::with_overrides(self.model.n, &self.model.overrides)
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        Ok(())
    }

    pub fn ti_config(&self) -> TiConfig {
        let a = &self.approximator;
        let s = &self.solver;
        TiConfig {
            approximator: match a.kind {
                ApproximatorKind::SG => Approximator::Sg,
                ApproximatorKind::DDSG => Approximator::Ddsg,
            },
            grid_depth: a.grid_depth,
            max_ref: a.max_ref,
            surpl_threshold: a.surpl_threshold,
            k_max: a.k_max,
            anchor: a.anchor,
            tol_ti: s.tol_ti,
            max_iters: s.max_iters,
            pol_update_weight: s.pol_update_weight,
            metric: s.metric,
            patience: s.patience,
            guess: s.guess,
        }
    }

    pub fn build_model(&self) -> Result<IrbcModel> {
        let params = IrbcParams::with_overrides(self.model.n, &self.model.overrides)?;
        IrbcModel::with_kind(params, self.model.shocks)
    }
}
