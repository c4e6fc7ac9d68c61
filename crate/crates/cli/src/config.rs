use std::path::{Path, PathBuf};

use chorovessel_core::hitl::ProjectConfig;
use chorovessel_core::morphometry::MorphoConfig;
use chorovessel_core::presegment::ExternalEndpoint;
use chorovessel_core::stats::AssociationConfig;
use chorovessel_core::vesselgraph::GraphConfig;
use chorovessel_core::{SegmenterBackend, VesselnessParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const CONFIG_ENV: &str = "CHOROVESSEL_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub n_bootstrap: usize,
}

/// Settings for a remote segmenter; the URL comes from `--endpoint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSettings {
    pub threshold: f64,
    pub timeout_secs: u64,
    pub auth_header: Option<String>,
}

/// Simulated correction loop; the proposer comes from `vesselness` or
/// `--endpoint` and the seed from `--seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSettings {
    pub rounds: u32,
    pub images_per_round: usize,
    pub scene_size: usize,
    pub fidelity: f64,
    pub project: ProjectConfig,
}

/// Every tunable the subcommands read. A `--config` file holds a partial
/// copy of this object; its keys overwrite the defaults one leaf at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub vesselness: VesselnessParams,
    pub graph: GraphConfig,
    pub morphometry: MorphoConfig,
    pub association: AssociationConfig,
    pub eval: EvalSettings,
    pub endpoint: EndpointSettings,
    #[serde(rename = "loop")]
    pub loop_sim: LoopSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vesselness: VesselnessParams::default(),
            graph: GraphConfig::default(),
            morphometry: MorphoConfig::default(),
            association: AssociationConfig::default(),
            eval: EvalSettings { n_bootstrap: 1000 },
            endpoint: EndpointSettings {
                threshold: 0.5,
                timeout_secs: 30,
                auth_header: None,
            },
            loop_sim: LoopSettings {
                rounds: 3,
                images_per_round: 4,
                scene_size: 160,
                fidelity: 1.0,
                project: ProjectConfig::default(),
            },
        }
    }
}

impl PipelineConfig {
    /// Defaults overlaid with the file at `path`, or at `$CHOROVESSEL_CONFIG`
    /// when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let path: Option<PathBuf> = path.map(Path::to_path_buf).or_else(|| {
            std::env::var_os(CONFIG_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        });
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        let overrides: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        Self::with_overrides(overrides)
            .map_err(|e| CliError::input(format!("config {}: {}", path.display(), e.message)))
    }

    pub fn with_overrides(overrides: Value) -> Result<Self, CliError> {
        let mut base = serde_json::to_value(Self::default()).expect("defaults serialize");
        merge(&mut base, overrides, "")?;
        let cfg: Self = serde_json::from_value(base).map_err(|e| CliError::input(e.to_string()))?;
        cfg.vesselness.validate().map_err(CliError::from)?;
        Ok(cfg)
    }

    pub fn backend(&self, endpoint: Option<&str>) -> SegmenterBackend {
        match endpoint {
            Some(url) => {
                let mut e = ExternalEndpoint::new(url, self.endpoint.threshold);
                e.timeout_secs = self.endpoint.timeout_secs;
                e.auth_header = self.endpoint.auth_header.clone();
                SegmenterBackend::External(e)
            }
            None => SegmenterBackend::Builtin(self.vesselness.clone()),
        }
    }
}

/// Overlay `patch` onto `base`. Objects merge key by key and reject keys the
/// defaults do not have; anything else replaces. A tagged object whose
/// `kind` changes is replaced whole.
fn merge(base: &mut Value, patch: Value, at: &str) -> Result<(), CliError> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let retag = matches!((b.get("kind"), p.get("kind")), (Some(x), Some(y)) if x != y);
            if retag {
                *b = p;
                return Ok(());
            }
            for (k, v) in p {
                let path = if at.is_empty() {
                    k.clone()
                } else {
                    format!("{at}.{k}")
                };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &path)?,
                    None => return Err(CliError::input(format!("unknown config key `{path}`"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_override_is_default() {
        assert_eq!(
            PipelineConfig::with_overrides(json!({})).unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn leaf_override() {
        let c = PipelineConfig::with_overrides(
            json!({"graph": {"caliber_trim": 5}, "eval": {"n_bootstrap": 10}}),
        )
        .unwrap();
        assert_eq!(c.graph.caliber_trim, 5);
        assert_eq!(
            c.graph.spur_max_length,
            GraphConfig::default().spur_max_length
        );
        assert_eq!(c.eval.n_bootstrap, 10);
    }

    #[test]
    fn unknown_key_rejected() {
        let e = PipelineConfig::with_overrides(json!({"graph": {"bogus": 1}})).unwrap_err();
        assert!(e.message.contains("graph.bogus"), "{}", e.message);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(PipelineConfig::with_overrides(json!({"vesselness": {"threshold": 2.0}})).is_err());
    }
}
