//! Experiment configuration: one JSON document holding the deployment
//! and the run settings, so a run is reproducible from a single file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel;
use crate::learner::{PayoffUpdate, Policy};
use crate::model::{Deployment, NodeId};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("deployment needs a gateway and at least one station, got {0} nodes")]
    TooFewNodes(usize),
    #[error("nodes {0} and {1} share the same position")]
    DuplicatePosition(NodeId, NodeId),
    #[error("cycle_duration_s must be positive, got {0}")]
    NonPositiveCycle(f64),
    #[error("payload_size_bytes must be positive")]
    ZeroPayload,
    #[error("averaging_cycles must be at least 1")]
    ZeroAveragingCycles,
    #[error("supply_voltage_v must be positive, got {0}")]
    NonPositiveVoltage(f64),
    #[error("battery_capacity_mah must be positive, got {0}")]
    NonPositiveBattery(f64),
    #[error("radio current {name} must be nonnegative, got {value}")]
    NegativeCurrent { name: &'static str, value: f64 },
    #[error("transmit current bracket inverted: {min} A at min power vs {max} A at max power")]
    InvertedTxBracket { min: f64, max: f64 },
    #[error("tx_power_levels_dbm must be nonempty and strictly ascending")]
    BadPowerLevels,
    #[error("data_rate_bps must be positive, got {0}")]
    NonPositiveDataRate(f64),
    #[error("sensitivity {sensitivity} dBm must sit above the noise floor {noise_floor} dBm")]
    SensitivityBelowNoise { sensitivity: f64, noise_floor: f64 },
    #[error("{name} must be nonnegative, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("path_loss_exponent must be positive, got {0}")]
    NonPositiveExponent(f64),
    #[error(
        "station {station} cannot reach the gateway: mean RSSI {rssi_dbm:.1} dBm at max power is below sensitivity {sensitivity_dbm:.1} dBm"
    )]
    StationUnreachable {
        station: NodeId,
        rssi_dbm: f64,
        sensitivity_dbm: f64,
    },
    #[error("experiment.iterations must be at least 1")]
    ZeroIterations,
    #[error("experiment.cycles must be at least 1")]
    ZeroCycles,
    #[error("experiment.seeds must name at least one seed")]
    NoSeeds,
    #[error("experiment.policies must name at least one policy")]
    NoPolicies,
}

/// Run settings paired with a deployment in the config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub policies: Vec<Policy>,
    pub iterations: u32,
    /// Measurement cycles per iteration; defaults to the deployment's
    /// averaging_cycles.
    #[serde(default)]
    pub cycles: Option<u32>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub payoff_update: PayoffUpdate,
    #[serde(default = "default_true")]
    pub association_cost: bool,
    /// Dump per-cycle state times alongside the trace CSVs.
    #[serde(default)]
    pub verbose_cycles: bool,
}

fn default_true() -> bool {
    true
}

/// The full config document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub deployment: Deployment,
    pub experiment: ExperimentSettings,
}

impl ExperimentConfig {
    pub fn cycles(&self) -> u32 {
        self.experiment
            .cycles
            .unwrap_or(self.deployment.averaging_cycles)
    }
}

/// Loads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let config: ExperimentConfig = serde_json::from_str(&text)?;
    validate_config(&config)?;
    Ok(config)
}

pub fn validate_config(config: &ExperimentConfig) -> Result<(), ConfigError> {
    validate_deployment(&config.deployment)?;
    let e = &config.experiment;
    if e.iterations == 0 {
        return Err(ConfigError::ZeroIterations);
    }
    if e.cycles == Some(0) {
        return Err(ConfigError::ZeroCycles);
    }
    if e.seeds.is_empty() {
        return Err(ConfigError::NoSeeds);
    }
    if e.policies.is_empty() {
        return Err(ConfigError::NoPolicies);
    }
    Ok(())
}

/// Checks every structural invariant of a deployment and reports the
/// first violation by name.
pub fn validate_deployment(d: &Deployment) -> Result<(), ConfigError> {
    if d.node_count() < 2 {
        return Err(ConfigError::TooFewNodes(d.node_count()));
    }
    for a in 0..d.node_count() {
        for b in (a + 1)..d.node_count() {
            if d.positions[a] == d.positions[b] {
                return Err(ConfigError::DuplicatePosition(
                    NodeId(a as u16),
                    NodeId(b as u16),
                ));
            }
        }
    }
    if d.cycle_duration_s <= 0.0 {
        return Err(ConfigError::NonPositiveCycle(d.cycle_duration_s));
    }
    if d.payload_size_bytes == 0 {
        return Err(ConfigError::ZeroPayload);
    }
    if d.averaging_cycles == 0 {
        return Err(ConfigError::ZeroAveragingCycles);
    }
    if d.supply_voltage_v <= 0.0 {
        return Err(ConfigError::NonPositiveVoltage(d.supply_voltage_v));
    }
    if d.battery_capacity_mah <= 0.0 {
        return Err(ConfigError::NonPositiveBattery(d.battery_capacity_mah));
    }

    let r = &d.radio;
    for (name, value) in [
        ("i_cpu_a", r.i_cpu_a),
        ("i_lpm_a", r.i_lpm_a),
        ("i_rx_a", r.i_rx_a),
        ("i_sl_a", r.i_sl_a),
        ("i_tx_min_a", r.i_tx_min_a),
        ("i_tx_max_a", r.i_tx_max_a),
    ] {
        if value < 0.0 {
            return Err(ConfigError::NegativeCurrent { name, value });
        }
    }
    if r.i_tx_min_a > r.i_tx_max_a {
        return Err(ConfigError::InvertedTxBracket {
            min: r.i_tx_min_a,
            max: r.i_tx_max_a,
        });
    }
    if r.tx_power_levels_dbm.is_empty()
        || r.tx_power_levels_dbm.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(ConfigError::BadPowerLevels);
    }
    if r.data_rate_bps <= 0.0 {
        return Err(ConfigError::NonPositiveDataRate(r.data_rate_bps));
    }

    let c = &d.channel;
    if r.sensitivity_dbm <= c.noise_floor_dbm {
        return Err(ConfigError::SensitivityBelowNoise {
            sensitivity: r.sensitivity_dbm,
            noise_floor: c.noise_floor_dbm,
        });
    }
    if c.path_loss_exponent <= 0.0 {
        return Err(ConfigError::NonPositiveExponent(c.path_loss_exponent));
    }
    for (name, value) in [
        ("shadowing_sigma_db", c.shadowing_sigma_db),
        ("per_steepness_per_db", c.per_steepness_per_db),
        ("link_margin_db", c.link_margin_db),
        ("mac.preamble_s", d.mac.preamble_s),
        ("mac.wake_window_s", d.mac.wake_window_s),
        ("mac.processing_overhead_s", d.mac.processing_overhead_s),
        ("mac.contention_alpha", d.mac.contention_alpha),
    ] {
        if value < 0.0 {
            return Err(ConfigError::NegativeParameter { name, value });
        }
    }

    // Every station must close a single-hop link to the gateway at
    // maximum power (checked on the deterministic mean; frozen shadowing
    // is re-checked at run time).
    for s in d.station_ids() {
        let rssi = channel::rssi(
            d.position(s),
            d.position(crate::model::GATEWAY),
            r.max_power_dbm(),
            c,
            0.0,
        )
        .map_err(|_| ConfigError::DuplicatePosition(s, crate::model::GATEWAY))?;
        if rssi < r.sensitivity_dbm {
            return Err(ConfigError::StationUnreachable {
                station: s,
                rssi_dbm: rssi,
                sensitivity_dbm: r.sensitivity_dbm,
            });
        }
    }
    Ok(())
}
