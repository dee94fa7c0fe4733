//! Domain types shared by every module: network deployments, uplink
//! routing vectors, and gateway-perceived RSSI vectors.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelParams;

/// Address of a node. The gateway is always node 0; stations are
/// numbered 1..n-1 contiguously.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u16);

/// The gateway address.
pub const GATEWAY: NodeId = NodeId(0);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_gateway(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("routing vector has {got} entries, expected {expected} for {nodes} nodes")]
    LengthMismatch {
        got: usize,
        expected: usize,
        nodes: usize,
    },
    #[error("routing entry for station {station} references unknown node {parent}")]
    ParentOutOfRange { station: NodeId, parent: NodeId },
    #[error("the gateway has no parent")]
    GatewayHasNoParent,
    #[error("station {0} is not part of this routing")]
    UnknownStation(NodeId),
}

/// Uplink routing: entry `s-1` holds the parent of station `s`. A valid
/// routing forms an arborescence into the gateway.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoutingVector(Vec<NodeId>);

impl RoutingVector {
    pub fn new(parents: Vec<NodeId>) -> Self {
        RoutingVector(parents)
    }

    /// Builds a routing from raw parent addresses, station 1 first.
    pub fn from_ids(parents: &[u16]) -> Self {
        RoutingVector(parents.iter().map(|&p| NodeId(p)).collect())
    }

    /// Single-hop topology: every station transmits straight to the gateway.
    pub fn star(station_count: usize) -> Self {
        RoutingVector(vec![GATEWAY; station_count])
    }

    pub fn station_count(&self) -> usize {
        self.0.len()
    }

    pub fn parents(&self) -> &[NodeId] {
        &self.0
    }

    /// Parent of station `s`. The gateway has none.
    pub fn parent_of(&self, s: NodeId) -> Result<NodeId, ModelError> {
        if s.is_gateway() {
            return Err(ModelError::GatewayHasNoParent);
        }
        self.0
            .get(s.index() - 1)
            .copied()
            .ok_or(ModelError::UnknownStation(s))
    }

    /// Stations whose parent is `v`, in ascending id order.
    pub fn children_of(&self, v: NodeId) -> Vec<NodeId> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == v)
            .map(|(i, _)| NodeId(i as u16 + 1))
            .collect()
    }

    /// Checks that the routing is an arborescence into node 0: every
    /// station reaches the gateway and no cycles exist. Structural
    /// problems (wrong length, out-of-range parents) are errors rather
    /// than `false`.
    pub fn validate(&self, node_count: usize) -> Result<bool, ModelError> {
        if self.0.len() + 1 != node_count {
            return Err(ModelError::LengthMismatch {
                got: self.0.len(),
                expected: node_count - 1,
                nodes: node_count,
            });
        }
        for (i, &p) in self.0.iter().enumerate() {
            if p.index() >= node_count {
                return Err(ModelError::ParentOutOfRange {
                    station: NodeId(i as u16 + 1),
                    parent: p,
                });
            }
        }
        // Walk each station toward the root; a walk longer than n steps
        // can only mean a cycle.
        for start in 1..node_count {
            let mut current = NodeId(start as u16);
            let mut steps = 0;
            while !current.is_gateway() {
                current = self.0[current.index() - 1];
                steps += 1;
                if steps > node_count {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Hop count from station `s` to the gateway. Only meaningful on a
    /// validated routing.
    pub fn depth_of(&self, s: NodeId) -> usize {
        let mut current = s;
        let mut depth = 0;
        while !current.is_gateway() {
            current = self.0[current.index() - 1];
            depth += 1;
        }
        depth
    }

    /// `s1;s2;...` rendering used in trace CSVs.
    pub fn to_semicolon_list(&self) -> String {
        self.0
            .iter()
            .map(|p| p.0.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for RoutingVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_semicolon_list().replace(';', ","))
    }
}

/// Free-function form of [`RoutingVector::validate`].
pub fn validate_routing(r: &RoutingVector, node_count: usize) -> Result<bool, ModelError> {
    r.validate(node_count)
}

/// Gateway-perceived single-hop RSSI per station, in dBm. Entry `s-1`
/// belongs to station `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct RssiVector(Vec<f64>);

impl RssiVector {
    pub fn new(values: Vec<f64>) -> Self {
        RssiVector(values)
    }

    pub fn station_count(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, s: NodeId) -> f64 {
        self.0[s.index() - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Radio-chip constants: state currents, discrete transmission power
/// levels, and the PHY rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadioParams {
    /// Microprocessor active current (A).
    pub i_cpu_a: f64,
    /// Microprocessor low-power-mode current (A).
    pub i_lpm_a: f64,
    /// Radio receive current (A).
    pub i_rx_a: f64,
    /// Radio sleep current (A).
    pub i_sl_a: f64,
    /// Transmit current at the lowest power level (A).
    pub i_tx_min_a: f64,
    /// Transmit current at the highest power level (A).
    pub i_tx_max_a: f64,
    /// Discrete transmission power levels in dBm, sorted ascending.
    pub tx_power_levels_dbm: Vec<f64>,
    /// PHY data rate (bits per second).
    pub data_rate_bps: f64,
    /// Receiver sensitivity (dBm).
    pub sensitivity_dbm: f64,
}

impl RadioParams {
    pub fn min_power_dbm(&self) -> f64 {
        self.tx_power_levels_dbm[0]
    }

    pub fn max_power_dbm(&self) -> f64 {
        *self.tx_power_levels_dbm.last().unwrap()
    }

    /// Transmit current at a configured power level. Interpolates
    /// linearly in dBm between the bracket endpoints; power levels not
    /// in the configured set are rejected.
    pub fn i_tx_a(&self, tx_power_dbm: f64) -> Option<f64> {
        if !self.tx_power_levels_dbm.contains(&tx_power_dbm) {
            return None;
        }
        let lo = self.min_power_dbm();
        let hi = self.max_power_dbm();
        if hi == lo {
            return Some(self.i_tx_max_a);
        }
        let frac = (tx_power_dbm - lo) / (hi - lo);
        Some(self.i_tx_min_a + frac * (self.i_tx_max_a - self.i_tx_min_a))
    }

    /// Seconds on air for a payload of `bytes`.
    pub fn airtime_s(&self, bytes: u32) -> f64 {
        bytes as f64 * 8.0 / self.data_rate_bps
    }
}

/// Duty-cycle MAC timing constants and the shared-parent contention
/// penalty coefficient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MacParams {
    /// Strobed-preamble time paid per transmission attempt (s).
    pub preamble_s: f64,
    /// Receiver wake window paid per received packet (s).
    pub wake_window_s: f64,
    /// Microprocessor busy time per handled packet (s).
    pub processing_overhead_s: f64,
    /// Expected extra attempts per sibling sharing the same parent.
    pub contention_alpha: f64,
}

/// A network instance: node positions plus the radio, channel, and MAC
/// constants. Index 0 of `positions` is the gateway.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Deployment {
    /// 2-D coordinates in meters, index = node id.
    pub positions: Vec<[f64; 2]>,
    /// Supply voltage (V).
    pub supply_voltage_v: f64,
    /// Station battery capacity (mAh).
    pub battery_capacity_mah: f64,
    /// Reporting period (s).
    pub cycle_duration_s: f64,
    /// Application payload per station per cycle (bytes).
    pub payload_size_bytes: u32,
    /// Measurement cycles averaged per routing.
    pub averaging_cycles: u32,
    pub radio: RadioParams,
    pub channel: ChannelParams,
    pub mac: MacParams,
}

impl Deployment {
    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn station_count(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn station_ids(&self) -> impl Iterator<Item = NodeId> {
        (1..self.positions.len() as u16).map(NodeId)
    }

    pub fn position(&self, node: NodeId) -> [f64; 2] {
        self.positions[node.index()]
    }

    /// Full battery charge in joules.
    pub fn battery_energy_j(&self) -> f64 {
        self.battery_capacity_mah / 1000.0 * 3600.0 * self.supply_voltage_v
    }
}

/// Checks that [`RoutingVector::children_of`] partitions the stations.
/// Test helper shared with the validation suite.
pub fn children_partition_stations(r: &RoutingVector, node_count: usize) -> bool {
    let mut seen = BTreeSet::new();
    for v in 0..node_count {
        for c in r.children_of(NodeId(v as u16)) {
            if !seen.insert(c) {
                return false;
            }
        }
    }
    seen.len() == node_count - 1
}
