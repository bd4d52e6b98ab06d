//! Run configuration files.
//!
//! ```json
//! {
//!   "torus":   { "L1": 6.0, "L2": 6.0, "n1": 128, "n2": 128 },
//!   "sources": { "zeros_q": [[3.0, 3.0, 1]], "zeros_p": [] },
//!   "solver":  { "model": "tw", "method": "newton", "tol": 1e-8 },
//!   "outputs": { "report": "report.json", "fields": "fields.csv", "format": "csv" }
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vortex_core::{PointSource, SurfaceError, TorusGeometry, VortexConfiguration};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid torus: {0}")]
    Torus(#[from] SurfaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusSpec {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub n1: usize,
    pub n2: usize,
}

/// `[x, y, multiplicity]`
pub type SourceEntry = (f64, f64, u32);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesSpec {
    #[serde(default)]
    pub zeros_q: Vec<SourceEntry>,
    #[serde(default)]
    pub poles_q: Vec<SourceEntry>,
    #[serde(default)]
    pub zeros_p: Vec<SourceEntry>,
    #[serde(default)]
    pub poles_p: Vec<SourceEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    Tw,
    Vav,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    Newton,
    Gradient,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub model: ModelTag,
    #[serde(default = "default_method")]
    pub method: MethodTag,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Defaults to 200 (TW), 100 (VAV Newton) or 20000 (fixed point).
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Mollifier width in grid cells.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Random initialization seed (TW only).
    #[serde(default)]
    pub seed: Option<u64>,
    /// Fixed-point damping.
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
}

fn default_method() -> MethodTag {
    MethodTag::Newton
}
fn default_tol() -> f64 {
    1e-8
}
fn default_kappa() -> f64 {
    vortex_core::DEFAULT_KAPPA
}
fn default_relaxation() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpFormat {
    Csv,
    F64bin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_fields")]
    pub fields: String,
    #[serde(default = "default_format")]
    pub format: DumpFormat,
}

fn default_report() -> String {
    "report.json".into()
}
fn default_fields() -> String {
    "fields.csv".into()
}
fn default_format() -> DumpFormat {
    DumpFormat::Csv
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            report: default_report(),
            fields: default_fields(),
            format: default_format(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub torus: TorusSpec,
    #[serde(default)]
    pub sources: SourcesSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn reduce(x: f64, l: f64) -> f64 {
    let r = x.rem_euclid(l);
    if r >= l {
        0.0
    } else {
        r
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses, validates, and reduces coordinates modulo the periods.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        let (l1, l2) = (cfg.torus.l1, cfg.torus.l2);
        for list in cfg.source_lists_mut() {
            for s in list.iter_mut() {
                s.0 = reduce(s.0, l1);
                s.1 = reduce(s.1, l2);
            }
        }
        Ok(cfg)
    }

    fn source_lists_mut(&mut self) -> [&mut Vec<SourceEntry>; 4] {
        let s = &mut self.sources;
        [
            &mut s.zeros_q,
            &mut s.poles_q,
            &mut s.zeros_p,
            &mut s.poles_p,
        ]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sources;
        let all = [&s.zeros_q, &s.poles_q, &s.zeros_p, &s.poles_p];
        for (name, list) in ["zeros_q", "poles_q", "zeros_p", "poles_p"].iter().zip(all) {
            for &(x, y, m) in list {
                if !x.is_finite() || !y.is_finite() {
                    return Err(ConfigError::Invalid(format!("{name}: non-finite position")));
                }
                if m == 0 {
                    return Err(ConfigError::Invalid(format!(
                        "{name}: multiplicity must be positive"
                    )));
                }
            }
        }
        let sv = &self.solver;
        if self.solver.model == ModelTag::Tw && !(s.poles_q.is_empty() && s.poles_p.is_empty()) {
            return Err(ConfigError::Invalid(
                "model tw does not allow poles (poles_q, poles_p must be empty)".into(),
            ));
        }
        match (sv.model, sv.method) {
            (ModelTag::Tw, MethodTag::FixedPoint) => {
                return Err(ConfigError::Invalid(
                    "method fixed_point requires model vav".into(),
                ))
            }
            (ModelTag::Vav, MethodTag::Gradient) => {
                return Err(ConfigError::Invalid(
                    "method gradient requires model tw".into(),
                ))
            }
            _ => {}
        }
        if sv.tol.is_nan() || sv.tol <= 0.0 {
            return Err(ConfigError::Invalid("solver.tol must be positive".into()));
        }
        if sv.kappa.is_nan() || sv.kappa < 1.0 {
            return Err(ConfigError::Invalid(
                "solver.kappa must be at least 1".into(),
            ));
        }
        if !(sv.relaxation > 0.0 && sv.relaxation <= 1.0) {
            return Err(ConfigError::Invalid(
                "solver.relaxation must lie in (0, 1]".into(),
            ));
        }
        TorusGeometry::new(self.torus.l1, self.torus.l2, self.torus.n1, self.torus.n2)?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<TorusGeometry, ConfigError> {
        Ok(TorusGeometry::new(
            self.torus.l1,
            self.torus.l2,
            self.torus.n1,
            self.torus.n2,
        )?)
    }

    pub fn vortices(&self) -> VortexConfiguration {
        let conv = |v: &Vec<SourceEntry>| {
            v.iter()
                .map(|&(x, y, m)| PointSource::new(x, y, m))
                .collect::<Vec<_>>()
        };
        VortexConfiguration {
            zeros_q: conv(&self.sources.zeros_q),
            poles_q: conv(&self.sources.poles_q),
            zeros_p: conv(&self.sources.zeros_p),
            poles_p: conv(&self.sources.poles_p),
        }
    }

    /// Copy with `L1 = l` and `L2` scaled to keep the aspect ratio; source
    /// positions scale with the periods.
    pub fn rescaled(&self, l: f64) -> Result<Self, ConfigError> {
        let s = l / self.torus.l1;
        let mut out = self.clone();
        out.torus.l1 = l;
        out.torus.l2 = self.torus.l2 * s;
        for list in out.source_lists_mut() {
            for e in list.iter_mut() {
                e.0 *= s;
                e.1 *= s;
            }
        }
        out.validate()?;
        Ok(out)
    }
}
