//! Synthetic radio channel: log-distance path loss with optional
//! lognormal shadowing, per-link transmission power selection, and
//! stochastic retransmission draws.
//!
//! Shadowing is frozen per link when a [`Scene`] is built; per-cycle
//! variability enters only through the packet-error draw.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Deployment, NodeId, RadioParams, RssiVector, GATEWAY};
use crate::seeds::SimRng;

/// Propagation and link-quality constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Log-distance path loss exponent.
    pub path_loss_exponent: f64,
    /// Loss at the 1 m reference distance (dB).
    pub reference_loss_db: f64,
    /// Lognormal shadowing standard deviation (dB); 0 disables it.
    pub shadowing_sigma_db: f64,
    /// Ambient noise floor (dBm); must sit below the radio sensitivity.
    pub noise_floor_dbm: f64,
    /// Slope of the packet-success logistic in the RSSI margin (1/dB).
    pub per_steepness_per_db: f64,
    /// Power selection headroom over sensitivity (dB).
    pub link_margin_db: f64,
    /// Retries allowed after the first attempt.
    pub max_retransmissions: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("transmitter and receiver share the same position")]
    CoincidentPositions,
    #[error(
        "station {station} unreachable: RSSI {rssi_dbm} dBm at max power is below sensitivity {sensitivity_dbm} dBm"
    )]
    StationUnreachable {
        station: NodeId,
        rssi_dbm: f64,
        sensitivity_dbm: f64,
    },
}

fn distance_m(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Standard normal draw via Box-Muller; deterministic for a seeded RNG.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Draws one shadowing sample in dB (zero when sigma is zero).
pub fn draw_shadowing_db(params: &ChannelParams, rng: &mut impl Rng) -> f64 {
    if params.shadowing_sigma_db == 0.0 {
        0.0
    } else {
        params.shadowing_sigma_db * standard_normal(rng)
    }
}

/// Received power in dBm for a transmission at `tx_power_dbm` between two
/// positions, with an explicit shadowing sample (pass 0.0 for the
/// deterministic mean).
pub fn rssi(
    tx: [f64; 2],
    rx: [f64; 2],
    tx_power_dbm: f64,
    params: &ChannelParams,
    shadowing_db: f64,
) -> Result<f64, ChannelError> {
    let d = distance_m(tx, rx);
    if d == 0.0 {
        return Err(ChannelError::CoincidentPositions);
    }
    Ok(tx_power_dbm
        - params.reference_loss_db
        - 10.0 * params.path_loss_exponent * d.log10()
        + shadowing_db)
}

/// Least-squares fit of the 1 m reference loss given measured single-hop
/// RSSI values and the remaining model parameters. With the exponent
/// fixed the model is linear in the reference loss, so the fit is the
/// mean residual.
pub fn fit_reference_loss_db(
    gateway: [f64; 2],
    stations: &[[f64; 2]],
    measured_rssi_dbm: &[f64],
    tx_power_dbm: f64,
    path_loss_exponent: f64,
) -> f64 {
    assert_eq!(stations.len(), measured_rssi_dbm.len());
    let sum: f64 = stations
        .iter()
        .zip(measured_rssi_dbm)
        .map(|(pos, &gamma)| {
            tx_power_dbm - 10.0 * path_loss_exponent * distance_m(*pos, gateway).log10() - gamma
        })
        .sum();
    sum / stations.len() as f64
}

/// A deployment with its shadowing realization frozen per link. All RSSI
/// queries against a scene are deterministic.
#[derive(Clone, Debug)]
pub struct Scene {
    deployment: Deployment,
    /// Upper-triangle pair offsets in dB, indexed by [`Scene::pair_index`].
    shadowing_db: Vec<f64>,
}

impl Scene {
    /// Freezes one shadowing sample per unordered node pair. The draw
    /// order is fixed (pairs in lexicographic order) so a given RNG state
    /// always produces the same scene.
    pub fn new(deployment: &Deployment, rng: &mut SimRng) -> Scene {
        let n = deployment.node_count();
        let mut shadowing_db = vec![0.0; n * (n - 1) / 2];
        if deployment.channel.shadowing_sigma_db > 0.0 {
            for slot in shadowing_db.iter_mut() {
                *slot = draw_shadowing_db(&deployment.channel, rng);
            }
        }
        Scene {
            deployment: deployment.clone(),
            shadowing_db,
        }
    }

    pub fn deployment(&self) -> &Deployment {
        &self.deployment
    }

    fn pair_index(&self, a: NodeId, b: NodeId) -> usize {
        let n = self.deployment.node_count();
        let (lo, hi) = if a.index() < b.index() {
            (a.index(), b.index())
        } else {
            (b.index(), a.index())
        };
        // Row-major upper triangle without the diagonal.
        lo * (2 * n - lo - 1) / 2 + (hi - lo - 1)
    }

    /// Frozen shadowing offset of the (a, b) link in dB.
    pub fn link_shadowing_db(&self, a: NodeId, b: NodeId) -> f64 {
        self.shadowing_db[self.pair_index(a, b)]
    }

    /// Deterministic received power on the (a, b) link at `tx_power_dbm`.
    pub fn link_rssi_dbm(&self, a: NodeId, b: NodeId, tx_power_dbm: f64) -> f64 {
        rssi(
            self.deployment.position(a),
            self.deployment.position(b),
            tx_power_dbm,
            &self.deployment.channel,
            self.link_shadowing_db(a, b),
        )
        .expect("deployment validation rejects coincident positions")
    }

    /// Gateway-perceived single-hop RSSI of every station at maximum
    /// power, as observed during association. Fails if any station
    /// cannot reach the gateway.
    pub fn rssi_vector(&self) -> Result<RssiVector, ChannelError> {
        let max_power = self.deployment.radio.max_power_dbm();
        let sensitivity = self.deployment.radio.sensitivity_dbm;
        let mut gamma = Vec::with_capacity(self.deployment.station_count());
        for s in self.deployment.station_ids() {
            let value = self.link_rssi_dbm(s, GATEWAY, max_power);
            if value < sensitivity {
                return Err(ChannelError::StationUnreachable {
                    station: s,
                    rssi_dbm: value,
                    sensitivity_dbm: sensitivity,
                });
            }
            gamma.push(value);
        }
        Ok(RssiVector::new(gamma))
    }
}

/// Estimates the association-phase RSSI vector for a deployment, freezing
/// shadowing from `rng`. Two calls with equal RNG state return equal
/// vectors.
pub fn estimate_rssi_vector(
    deployment: &Deployment,
    rng: &mut SimRng,
) -> Result<RssiVector, ChannelError> {
    Scene::new(deployment, rng).rssi_vector()
}

/// Smallest configured power level whose predicted receive RSSI clears
/// sensitivity plus the link margin; clamps to the maximum level when
/// nothing suffices. `link_rssi_at_max_dbm` is the link RSSI measured at
/// maximum power, and power scales the prediction dB-for-dB.
pub fn select_tx_power(
    link_rssi_at_max_dbm: f64,
    params: &ChannelParams,
    radio: &RadioParams,
) -> f64 {
    let max = radio.max_power_dbm();
    let required = radio.sensitivity_dbm + params.link_margin_db;
    radio
        .tx_power_levels_dbm
        .iter()
        .copied()
        .find(|&level| link_rssi_at_max_dbm - (max - level) >= required)
        .unwrap_or(max)
}

/// Probability that a single attempt at `link_rssi_dbm` is decoded.
pub fn attempt_success_probability(
    link_rssi_dbm: f64,
    sensitivity_dbm: f64,
    params: &ChannelParams,
) -> f64 {
    let margin = link_rssi_dbm - sensitivity_dbm;
    1.0 / (1.0 + (-params.per_steepness_per_db * margin).exp())
}

/// Outcome of delivering one packet over a link.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Attempts {
    /// Transmissions used, between 1 and 1 + max_retransmissions.
    pub count: u32,
    /// False when every allowed attempt failed.
    pub delivered: bool,
}

/// Truncated-geometric draw of the attempts needed to deliver a packet.
/// Exhausting the retry budget returns the maximum count with
/// `delivered = false`.
pub fn draw_transmission_attempts(
    link_rssi_dbm: f64,
    sensitivity_dbm: f64,
    params: &ChannelParams,
    rng: &mut impl Rng,
) -> Attempts {
    let q = attempt_success_probability(link_rssi_dbm, sensitivity_dbm, params);
    let budget = 1 + params.max_retransmissions;
    for attempt in 1..=budget {
        if rng.gen::<f64>() < q {
            return Attempts {
                count: attempt,
                delivered: true,
            };
        }
    }
    Attempts {
        count: budget,
        delivered: false,
    }
}
