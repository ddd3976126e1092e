//! Scenario configuration file.

use serde::{Deserialize, Serialize};

use qkdnet::{lambda_from_attenuation, AttenuationSpec, CostParams, LinkModel, PlanarScenario, RateVariant};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub link: LinkConfig,
    pub costs: CostsConfig,
    pub scenario: PlanarConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backbone: Option<BackboneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    /// Key rate at zero distance, bit/s.
    pub r0: f64,
    /// Rate scaling length, km. Mutually exclusive with `attenuation`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_qkd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation: Option<AttenuationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bb84: Option<Bb84Config>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttenuationConfig {
    pub alpha_db_per_km: f64,
    #[serde(default = "one")]
    pub r_exponent: f64,
    pub eta_d: f64,
    pub p_d: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bb84Config {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsConfig {
    pub c_qkd: f64,
    pub c_node: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarConfig {
    pub length_l: f64,
    pub alpha_u: f64,
    pub volume_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneConfig {
    /// Node spacing for the stochastic backbone and the validation runs, km.
    pub alpha_bb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_node_sets")]
    pub node_sets: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_side")]
    pub side_in_alpha: f64,
}

fn default_replicas() -> usize {
    2000
}

fn default_pairs() -> usize {
    10_000
}

fn default_node_sets() -> usize {
    20
}

fn default_side() -> f64 {
    10.0
}

/// Configuration turned into validated model objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub model: LinkModel,
    pub costs: CostParams,
    pub planar: PlanarScenario,
    pub attenuation: Option<AttenuationSpec>,
    pub alpha_bb: Option<f64>,
    pub mc: Option<McConfig>,
}

fn field<T>(path: &str, r: qkdnet::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(format!("{path}: {e}")))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field and builds the model objects.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let link = &self.link;
        let (lambda, attenuation) = match (link.lambda_qkd, link.attenuation) {
            (Some(l), None) => (l, None),
            (None, Some(a)) => {
                let spec = field(
                    "link.attenuation",
                    AttenuationSpec::new(a.alpha_db_per_km, a.r_exponent, a.eta_d, a.p_d),
                )?;
                (lambda_from_attenuation(&spec), Some(spec))
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "link: give either lambda_qkd or [link.attenuation], not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config("link: one of lambda_qkd or [link.attenuation] is required".into()))
            }
        };
        let variant = match link.bb84 {
            None => RateVariant::PureExponential,
            Some(Bb84Config { a, b }) => RateVariant::Bb84DarkCount { a, b },
        };
        let path = if link.bb84.is_some() { "link.bb84" } else { "link" };
        let model = field(path, LinkModel::new(link.r0, lambda, variant))?;
        let costs = field("costs", CostParams::new(self.costs.c_qkd, self.costs.c_node))?;
        let s = &self.scenario;
        let planar = field("scenario", PlanarScenario::new(s.length_l, s.alpha_u, s.volume_v))?;
        let alpha_bb = match self.backbone {
            Some(BackboneConfig { alpha_bb }) if !(alpha_bb > 0.0 && alpha_bb.is_finite()) => {
                return Err(CliError::Config(format!("backbone.alpha_bb: must be > 0, got {alpha_bb}")))
            }
            other => other.map(|b| b.alpha_bb),
        };
        if let Some(mc) = &self.mc {
            if mc.replicas < 2 {
                return Err(CliError::Config(format!("mc.replicas: need at least 2, got {}", mc.replicas)));
            }
            if mc.pairs < 100 {
                return Err(CliError::Config(format!("mc.pairs: need at least 100, got {}", mc.pairs)));
            }
            if mc.node_sets < 2 || mc.node_sets > mc.pairs {
                return Err(CliError::Config(format!("mc.node_sets: must lie in [2, pairs], got {}", mc.node_sets)));
            }
            if mc.side_in_alpha.is_nan() || mc.side_in_alpha < 10.0 {
                return Err(CliError::Config(format!(
                    "mc.side_in_alpha: must be >= 10, got {}",
                    mc.side_in_alpha
                )));
            }
        }
        Ok(Resolved {
            model,
            costs,
            planar,
            attenuation,
            alpha_bb,
            mc: self.mc,
        })
    }
}
