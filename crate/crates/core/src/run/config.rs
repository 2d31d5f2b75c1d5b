use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cmc::{CausalParams, CmcEvolveParams, CmcFamilyParams};
use super::gowdy::{GowdyAnalyzeParams, GowdyEvolveParams};
use super::tsym::TsymAnalyzeParams;
use super::{sha256_hex, RunError};

/// The config schema this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    GowdyEvolve,
    GowdyAnalyze,
    TsymAnalyze,
    CmcEvolve,
    CmcFamily,
    CmcCausal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum Params {
    GowdyEvolve(GowdyEvolveParams),
    GowdyAnalyze(GowdyAnalyzeParams),
    TsymAnalyze(TsymAnalyzeParams),
    CmcEvolve(CmcEvolveParams),
    CmcFamily(CmcFamilyParams),
    CmcCausal(CausalParams),
}

/// Overrides of the default tolerances. Each scenario documents which ones
/// it reads; the rest are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Slack on monotonicity between adjacent samples.
    pub monotone: Option<f64>,
    /// Finite-difference identity residuals.
    pub residual: Option<f64>,
    /// Agreement with exact solutions.
    pub oracle: Option<f64>,
    /// Constraint violation.
    pub constraint: Option<f64>,
    /// Lapse bounds.
    pub lapse: Option<f64>,
    /// Kasner reconstruction.
    pub reconstruct: Option<f64>,
}

impl Tolerances {
    fn check(&self) -> Result<(), RunError> {
        let all = [
            ("monotone", self.monotone),
            ("residual", self.residual),
            ("oracle", self.oracle),
            ("constraint", self.constraint),
            ("lapse", self.lapse),
            ("reconstruct", self.reconstruct),
        ];
        for (name, v) in all {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(RunError::config(format!("tolerances.{name}"), format!("must be finite and nonnegative, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    kind: Kind,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    params: Value,
    #[serde(default)]
    tolerances: Tolerances,
}

/// A parsed scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub params: Params,
    pub tolerances: Tolerances,
    /// Directory that relative input paths are resolved against.
    pub base_dir: PathBuf,
}

fn parse<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, RunError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        RunError::config(path, e.into_inner().to_string())
    })
}

impl Scenario {
    /// Parses a config; relative input paths will be resolved against
    /// `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, RunError> {
        let value: Value = serde_json::from_str(text).map_err(|e| RunError::config("<root>", e.to_string()))?;
        let raw: RawConfig = parse(value, "<root>")?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(RunError::config(
                "schema_version",
                format!("unsupported version {} (this build reads {SCHEMA_VERSION})", raw.schema_version),
            ));
        }
        let params = match raw.kind {
            Kind::GowdyEvolve => Params::GowdyEvolve(parse(raw.params, "params")?),
            Kind::GowdyAnalyze => Params::GowdyAnalyze(parse(raw.params, "params")?),
            Kind::TsymAnalyze => Params::TsymAnalyze(parse(raw.params, "params")?),
            Kind::CmcEvolve => Params::CmcEvolve(parse(raw.params, "params")?),
            Kind::CmcFamily => Params::CmcFamily(parse(raw.params, "params")?),
            Kind::CmcCausal => Params::CmcCausal(parse(raw.params, "params")?),
        };
        let scenario = Self {
            name: raw.name,
            seed: raw.seed,
            output_dir: raw.output_dir,
            params,
            tolerances: raw.tolerances,
            base_dir: base_dir.to_path_buf(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::config("<file>", format!("reading {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    pub fn kind(&self) -> Kind {
        match self.params {
            Params::GowdyEvolve(_) => Kind::GowdyEvolve,
            Params::GowdyAnalyze(_) => Kind::GowdyAnalyze,
            Params::TsymAnalyze(_) => Kind::TsymAnalyze,
            Params::CmcEvolve(_) => Kind::CmcEvolve,
            Params::CmcFamily(_) => Kind::CmcFamily,
            Params::CmcCausal(_) => Kind::CmcCausal,
        }
    }

    /// Kind-specific parameter checks; runs before any computation.
    pub fn validate(&self) -> Result<(), RunError> {
        self.tolerances.check()?;
        match &self.params {
            Params::GowdyEvolve(p) => p.validate(),
            Params::GowdyAnalyze(p) => p.validate(),
            Params::TsymAnalyze(p) => p.validate(),
            Params::CmcEvolve(p) => p.validate(),
            Params::CmcFamily(p) => p.validate(),
            Params::CmcCausal(p) => p.validate(),
        }
    }

    /// Resolved parameters, tolerances and seed, as recorded in the manifest.
    pub fn echo(&self) -> Value {
        serde_json::json!({
            "kind": self.kind(),
            "seed": self.seed,
            "params": self.params,
            "tolerances": self.tolerances,
        })
    }

    /// SHA-256 of the compact serialization of [`Scenario::echo`]. Defaults
    /// are filled in, so configs that differ only by spelled-out defaults
    /// hash alike.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(&self.echo()).expect("echo serializes").as_bytes())
    }
}

pub(crate) fn positive(path: &str, v: f64) -> Result<(), RunError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(RunError::config(path, format!("must be positive and finite, got {v}")))
    }
}

pub(crate) fn finite(path: &str, v: f64) -> Result<(), RunError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(RunError::config(path, format!("must be finite, got {v}")))
    }
}
