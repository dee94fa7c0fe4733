//! Per-cycle, per-station time-in-state accounting and the resulting
//! joule totals.
//!
//! Each cycle the microprocessor splits its time between CPU and LPM and
//! the radio between RX, TX, and sleep; both splits must cover the full
//! cycle. Energy is supply voltage times the current-weighted state
//! times.

use thiserror::Error;

use crate::model::{Deployment, NodeId, RadioParams, RoutingVector};

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("negative state time {0}")]
    NegativeTime(f64),
    #[error("tx power {0} dBm is not a configured level")]
    UnknownPowerLevel(f64),
    #[error("routing has {routing} stations but {given} link entries were supplied")]
    LinkCountMismatch { routing: usize, given: usize },
    #[error("link attempts must be at least 1, got {0}")]
    AttemptsBelowOne(f64),
    #[error("station {station} busy time {busy_s} s exceeds the {cycle_s} s cycle")]
    CycleOverrun {
        station: NodeId,
        busy_s: f64,
        cycle_s: f64,
    },
}

/// Seconds spent in each operational state during one cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StateTimes {
    pub t_cpu_s: f64,
    pub t_lpm_s: f64,
    pub t_rx_s: f64,
    pub t_tx_s: f64,
    pub t_sl_s: f64,
}

impl StateTimes {
    fn check_nonnegative(&self) -> Result<(), EnergyError> {
        for t in [self.t_cpu_s, self.t_lpm_s, self.t_rx_s, self.t_tx_s, self.t_sl_s] {
            if t < 0.0 {
                return Err(EnergyError::NegativeTime(t));
            }
        }
        Ok(())
    }
}

/// Microprocessor drain: V_DD * (t_CPU * I_CPU + t_LPM * I_LPM).
pub fn microprocessor_energy(
    times: &StateTimes,
    v_dd: f64,
    radio: &RadioParams,
) -> Result<f64, EnergyError> {
    times.check_nonnegative()?;
    Ok(v_dd * (times.t_cpu_s * radio.i_cpu_a + times.t_lpm_s * radio.i_lpm_a))
}

/// Radio drain: V_DD * (t_RX * I_RX + t_TX * I_TX(p) + t_SL * I_SL), with
/// the transmit current taken at the station's configured power level.
pub fn radio_energy(
    times: &StateTimes,
    v_dd: f64,
    radio: &RadioParams,
    tx_power_dbm: f64,
) -> Result<f64, EnergyError> {
    times.check_nonnegative()?;
    let i_tx = radio
        .i_tx_a(tx_power_dbm)
        .ok_or(EnergyError::UnknownPowerLevel(tx_power_dbm))?;
    Ok(v_dd
        * (times.t_rx_s * radio.i_rx_a + times.t_tx_s * i_tx + times.t_sl_s * radio.i_sl_a))
}

/// One station's share of a cycle report.
#[derive(Clone, Debug, PartialEq)]
pub struct StationCycle {
    pub times: StateTimes,
    /// Power level used on the station's uplink.
    pub tx_power_dbm: f64,
    /// Joules recomputable from `times` via the two energy formulas.
    pub energy_j: f64,
    /// Association-phase joules charged on top of the duty cycle;
    /// nonzero only in the cycle where association happens.
    pub association_energy_j: f64,
}

impl StationCycle {
    /// Everything the station drained this cycle.
    pub fn total_energy_j(&self) -> f64 {
        self.energy_j + self.association_energy_j
    }
}

/// Per-station breakdown of one operation cycle. Index `s-1` belongs to
/// station `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleReport {
    pub stations: Vec<StationCycle>,
    /// Packets dropped after exhausting the retry budget.
    pub delivery_failures: u32,
}

/// Builds the per-station time split and energy for one cycle under a
/// fixed routing. `attempts` holds the effective transmission attempts of
/// each station's uplink (fractional values carry the expected contention
/// penalty) and `tx_powers_dbm` the selected level per uplink, both in
/// station-id order.
///
/// For a station with children, receive time covers every child's
/// deliveries and the aggregate grows with the subtree payload.
pub fn account_cycle(
    deployment: &Deployment,
    routing: &RoutingVector,
    attempts: &[f64],
    tx_powers_dbm: &[f64],
) -> Result<CycleReport, EnergyError> {
    let station_count = deployment.station_count();
    if routing.station_count() != station_count
        || attempts.len() != station_count
        || tx_powers_dbm.len() != station_count
    {
        return Err(EnergyError::LinkCountMismatch {
            routing: routing.station_count(),
            given: attempts.len().min(tx_powers_dbm.len()),
        });
    }
    for &a in attempts {
        if a < 1.0 {
            return Err(EnergyError::AttemptsBelowOne(a));
        }
    }

    // Subtree sizes: each station forwards its own payload plus every
    // descendant's.
    let mut subtree = vec![1u32; station_count + 1];
    for s in deployment.station_ids() {
        let mut v = routing.parents()[s.index() - 1];
        while !v.is_gateway() {
            subtree[v.index()] += 1;
            v = routing.parents()[v.index() - 1];
        }
    }

    let cycle = deployment.cycle_duration_s;
    let mac = &deployment.mac;
    let radio = &deployment.radio;
    let aggregate_airtime =
        |s: NodeId| radio.airtime_s(deployment.payload_size_bytes) * subtree[s.index()] as f64;

    let mut stations = Vec::with_capacity(station_count);
    for s in deployment.station_ids() {
        let children = routing.children_of(s);
        let t_tx_s = attempts[s.index() - 1] * (mac.preamble_s + aggregate_airtime(s));
        let t_rx_s: f64 = children
            .iter()
            .map(|&c| attempts[c.index() - 1] * (mac.wake_window_s + aggregate_airtime(c)))
            .sum();
        let t_cpu_s = mac.processing_overhead_s * (1.0 + children.len() as f64);

        let busy_radio = t_tx_s + t_rx_s;
        if busy_radio > cycle {
            return Err(EnergyError::CycleOverrun {
                station: s,
                busy_s: busy_radio,
                cycle_s: cycle,
            });
        }
        if t_cpu_s > cycle {
            return Err(EnergyError::CycleOverrun {
                station: s,
                busy_s: t_cpu_s,
                cycle_s: cycle,
            });
        }

        let times = StateTimes {
            t_cpu_s,
            t_lpm_s: cycle - t_cpu_s,
            t_rx_s,
            t_tx_s,
            t_sl_s: cycle - busy_radio,
        };
        let tx_power_dbm = tx_powers_dbm[s.index() - 1];
        let energy_j = microprocessor_energy(&times, deployment.supply_voltage_v, radio)?
            + radio_energy(&times, deployment.supply_voltage_v, radio, tx_power_dbm)?;
        stations.push(StationCycle {
            times,
            tx_power_dbm,
            energy_j,
            association_energy_j: 0.0,
        });
    }

    Ok(CycleReport {
        stations,
        delivery_failures: 0,
    })
}
