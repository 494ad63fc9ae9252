//! Run configuration: a single TOML file with flat key paths. Every physical
//! default is traceable through the provenance table in reports; anything
//! set here overrides the defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{presets, IntensitySettings, LinkParams};
use crate::network::{NetworkConfig, Schedule};
use crate::security::{CalibrationTarget, EstimatorVariant, DEFAULT_EC_EFFICIENCY};
use crate::sim::EveModel;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub intensities: Option<IntensitiesSection>,
    #[serde(default)]
    pub eve: EveSection,
    #[serde(default)]
    pub session: SessionSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub security: SecuritySection,
    #[serde(default)]
    pub otp: OtpSection,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve_link(&self) -> Result<LinkParams> {
        let mut link = match &self.link.preset {
            Some(name) => presets::by_name(name)?,
            None => {
                let name = self.link.name.clone().unwrap_or_else(|| "custom".into());
                let length = self.link.length_km.unwrap_or(25.0);
                LinkParams::telecom(name, length)
            }
        };
        if let Some(name) = &self.link.name {
            link.name = name.clone();
        }
        if let Some(v) = self.link.length_km {
            link.length_km = v;
        }
        if let Some(v) = self.link.attenuation_db_per_km {
            link.attenuation_db_per_km = v;
        }
        if let Some(v) = self.link.extra_loss_db {
            link.extra_loss_db = v;
        }
        if let Some(v) = self.link.detector_efficiency {
            link.detector_efficiency = v;
        }
        if let Some(v) = self.link.dark_count_prob {
            link.dark_count_prob = v;
        }
        if let Some(v) = self.link.misalignment_error {
            link.misalignment_error = v;
        }
        if let Some(v) = self.link.pulse_rate_hz {
            link.pulse_rate_hz = v;
        }
        if let Some(v) = self.link.gate_ns {
            link.gate_ns = v;
        }
        link.validate()?;
        Ok(link)
    }

    pub fn resolve_intensities(&self, link: &LinkParams) -> Result<IntensitySettings> {
        match &self.intensities {
            None => Ok(presets::default_intensities(link)),
            Some(s) => {
                let base = presets::default_intensities(link);
                let mu = s.mu.unwrap_or(base.mu);
                let nu = s.nu.unwrap_or(base.nu);
                match s.proportions {
                    Some(p) => IntensitySettings::with_proportions(mu, nu, p),
                    None => IntensitySettings::with_proportions(mu, nu, base.proportions),
                }
            }
        }
    }

    pub fn resolve_eve(&self, link: &LinkParams, settings: &IntensitySettings) -> Result<EveModel> {
        match self.eve.kind.as_deref() {
            None | Some("none") => Ok(EveModel::none()),
            Some("pns") => {
                if self.eve.gain_preserving.unwrap_or(false) {
                    EveModel::pns_gain_preserving(link, settings.mu)
                } else {
                    EveModel::pns(
                        self.eve.block_single_prob.unwrap_or(0.0),
                        self.eve.forward_lossless.unwrap_or(true),
                    )
                }
            }
            Some(other) => Err(Error::Config(format!(
                "eve.kind must be 'none' or 'pns', got '{other}'"
            ))),
        }
    }

    pub fn resolve_variant(&self, cli_override: Option<EstimatorVariant>) -> EstimatorVariant {
        cli_override.unwrap_or_else(|| {
            self.security
                .variant
                .as_deref()
                .and_then(|s| s.parse().ok())
                .unwrap_or_default()
        })
    }

    pub fn ec_efficiency(&self) -> f64 {
        self.security.ec_efficiency.unwrap_or(DEFAULT_EC_EFFICIENCY)
    }

    pub fn resolve_network(&self) -> Result<NetworkConfig> {
        let client_names = if self.network.clients.is_empty() {
            vec![
                "benjamin".to_string(),
                "copernico".to_string(),
                "keplero".to_string(),
            ]
        } else {
            self.network.clients.clone()
        };
        let clients = client_names
            .iter()
            .map(|n| Ok((n.clone(), presets::by_name(n)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut config = NetworkConfig::new(
            self.network
                .server_name
                .clone()
                .unwrap_or_else(|| "galileo".into()),
            clients,
        );
        if let Some(v) = self.network.switch_fanout {
            config.switch_fanout = v;
        }
        if let Some(v) = self.network.alignment_time_s {
            config.alignment_time_s = v;
        }
        if let Some(v) = self.network.slot_duration_s {
            config.slot_duration_s = v;
        }
        if let Some(v) = self.network.buffer_target_bits {
            config.buffer_target_bits = v;
        }
        config.schedule = match self.network.schedule.as_deref() {
            None | Some("round-robin") => Schedule::RoundRobin,
            Some("on-demand") => Schedule::OnDemand,
            Some("priority") => Schedule::Priority(
                self.network
                    .priority_weights
                    .clone()
                    .ok_or_else(|| Error::Config("priority schedule needs weights".into()))?,
            ),
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown schedule '{other}' (round-robin | priority | on-demand)"
                )))
            }
        };
        if let Some(s) = &self.intensities {
            if s.mu.is_some() || s.nu.is_some() {
                // one shared setting for every client link
                let any_link = &config.clients[0].1;
                config.intensities = Some(self.resolve_intensities(any_link)?);
            }
        }
        config.variant = self.resolve_variant(None);
        config.ec_efficiency = self.ec_efficiency();
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_calibration_targets(&self) -> Result<Vec<CalibrationTarget>> {
        if self.calibration.targets.is_empty() {
            return Ok(crate::security::reference_benchmarks());
        }
        self.calibration
            .targets
            .iter()
            .map(|t| {
                Ok(CalibrationTarget {
                    link: presets::by_name(&t.link)?,
                    qber: t.qber,
                    rate_bps: t.rate_bps,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub preset: Option<String>,
    pub name: Option<String>,
    pub length_km: Option<f64>,
    pub attenuation_db_per_km: Option<f64>,
    pub extra_loss_db: Option<f64>,
    pub detector_efficiency: Option<f64>,
    pub dark_count_prob: Option<f64>,
    pub misalignment_error: Option<f64>,
    pub pulse_rate_hz: Option<f64>,
    pub gate_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensitiesSection {
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub proportions: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EveSection {
    pub kind: Option<String>,
    pub block_single_prob: Option<f64>,
    pub forward_lossless: Option<bool>,
    /// Solve the blocking probability so the signal gain is preserved.
    pub gain_preserving: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSection {
    pub n_pulses: u64,
}

impl Default for SessionSection {
    fn default() -> Self {
        SessionSection { n_pulses: 1_000_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Option<String>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub steps: Option<usize>,
    /// Pulses per row in Monte Carlo mode.
    pub monte_carlo_pulses: Option<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            axis: None,
            start: None,
            stop: None,
            steps: None,
            monte_carlo_pulses: Some(1_000_000),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub server_name: Option<String>,
    #[serde(default)]
    pub clients: Vec<String>,
    pub switch_fanout: Option<usize>,
    pub alignment_time_s: Option<f64>,
    pub slot_duration_s: Option<f64>,
    pub schedule: Option<String>,
    pub priority_weights: Option<Vec<f64>>,
    pub duration_s: Option<f64>,
    pub buffer_target_bits: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    #[serde(default)]
    pub targets: Vec<CalibrationTargetSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargetSection {
    pub link: String,
    pub qber: f64,
    pub rate_bps: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecuritySection {
    pub variant: Option<String>,
    pub ec_efficiency: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtpSection {
    pub key_store: Option<String>,
    pub client: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_resolves() {
        let cfg = RunConfig::default();
        let link = cfg.resolve_link().unwrap();
        assert_eq!(link.length_km, 25.0);
        let settings = cfg.resolve_intensities(&link).unwrap();
        assert!(settings.mu > settings.nu);
        assert!(matches!(
            cfg.resolve_eve(&link, &settings).unwrap().kind,
            crate::sim::EveKind::None
        ));
    }

    #[test]
    fn preset_with_overrides() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [link]
            preset = "keplero"
            dark_count_prob = 1e-4

            [intensities]
            mu = 0.5

            [security]
            variant = "as-printed"
            "#,
        )
        .unwrap();
        let link = cfg.resolve_link().unwrap();
        assert_eq!(link.name, "keplero");
        assert_eq!(link.dark_count_prob, 1e-4);
        let s = cfg.resolve_intensities(&link).unwrap();
        assert_eq!(s.mu, 0.5);
        assert_eq!(s.nu, 0.1);
        assert_eq!(
            cfg.resolve_variant(None),
            EstimatorVariant::AsPrinted
        );
        // a CLI flag wins over the file
        assert_eq!(
            cfg.resolve_variant(Some(EstimatorVariant::Standard)),
            EstimatorVariant::Standard
        );
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let bad = toml::from_str::<RunConfig>("[link]\nlenght_km = 10.0\n");
        assert!(bad.is_err());
    }

    #[test]
    fn unknown_preset_is_an_error() {
        let cfg: RunConfig = toml::from_str("[link]\npreset = \"atlantis\"\n").unwrap();
        assert!(matches!(
            cfg.resolve_link(),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn network_defaults_to_reference_star() {
        let cfg = RunConfig::default();
        let net = cfg.resolve_network().unwrap();
        assert_eq!(net.clients.len(), 3);
        assert_eq!(net.clients[0].0, "benjamin");
        assert!(matches!(net.schedule, Schedule::RoundRobin));
    }

    #[test]
    fn priority_schedule_needs_weights() {
        let cfg: RunConfig = toml::from_str("[network]\nschedule = \"priority\"\n").unwrap();
        assert!(cfg.resolve_network().is_err());
    }
}
