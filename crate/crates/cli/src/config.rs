//! Run configuration: a flat JSON object whose keys mirror the long flags.
//! Flags override file values; defaults fill whatever is still missing.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use divperp::model::CoefficientLaw;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub replications: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Never embedded in outputs, which must not depend on it.
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ca: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// `self` with every value set in `flags` replacing it.
    pub fn overlaid(mut self, flags: &RunConfig) -> RunConfig {
        overlay!(self, flags;
            command, law, a, c, alpha, beta, rate, m, q, p_m, p_q, n, horizon, u, replications, seed,
            jobs, out, threshold, level, x0, gamma, grid_points, process, scale, kind, ca, xs, theorem,
            target, source, limit_c, instance, instance_file, mc_samples);
        self
    }

    /// Builds the coefficient law and records the defaults it used.
    pub fn resolve_law(&mut self) -> Result<CoefficientLaw> {
        let name = self.law.get_or_insert_with(|| "cauchy".into()).clone();
        let law = match name.as_str() {
            "cauchy" | "cauchy_tail" => {
                CoefficientLaw::cauchy_tail(*self.a.get_or_insert(1.0), *self.c.get_or_insert(1.0))?
            }
            "reg_var" | "reg_var_tail" => {
                CoefficientLaw::reg_var_tail(*self.alpha.get_or_insert(0.5), *self.a.get_or_insert(1.0))?
            }
            "heavy_neg_m" => CoefficientLaw::heavy_neg_m(*self.alpha.get_or_insert(0.5), *self.beta.get_or_insert(0.75))?,
            "convergent" | "convergent_control" => {
                CoefficientLaw::convergent_control(*self.a.get_or_insert(1.0), *self.rate.get_or_insert(1.0))?
            }
            "expanding" | "expanding_control" | "non_contractive" => {
                CoefficientLaw::expanding_control(*self.a.get_or_insert(1.0), *self.c.get_or_insert(1.0))?
            }
            "degenerate" => CoefficientLaw::degenerate(*self.m.get_or_insert(0.5), *self.q.get_or_insert(1.0))?,
            other => bail!(
                "unknown law '{other}' (expected cauchy, reg_var, heavy_neg_m, convergent, expanding or degenerate)"
            ),
        };
        let (p_m, p_q) = (*self.p_m.get_or_insert(law.p_m()), *self.p_q.get_or_insert(law.p_q()));
        Ok(law.with_sign_probabilities(p_m, p_q)?)
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
