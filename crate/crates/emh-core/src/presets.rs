//! Ready-made deployments for experiments and tests.

use crate::channel::{self, ChannelParams};
use crate::model::{Deployment, MacParams, RadioParams};

/// Radio constants of a Zolertia RE-Mote class node: ARM Cortex-M3
/// microprocessor with a CC1200 sub-GHz radio at 50 kbps. Transmit
/// current spans 39-61 mA over the -16..14 dBm power range.
pub fn zolertia_radio() -> RadioParams {
    RadioParams {
        i_cpu_a: 13e-3,
        i_lpm_a: 0.4e-6,
        i_rx_a: 19e-3,
        i_sl_a: 0.12e-6,
        i_tx_min_a: 39e-3,
        i_tx_max_a: 61e-3,
        tx_power_levels_dbm: (0..16).map(|i| -16.0 + 2.0 * i as f64).collect(),
        data_rate_bps: 50_000.0,
        sensitivity_dbm: -109.0,
    }
}

/// Indoor-office propagation defaults.
pub fn default_channel() -> ChannelParams {
    ChannelParams {
        path_loss_exponent: 2.8,
        reference_loss_db: 54.7,
        shadowing_sigma_db: 2.0,
        noise_floor_dbm: -114.0,
        per_steepness_per_db: 0.8,
        link_margin_db: 6.0,
        max_retransmissions: 3,
    }
}

/// Duty-cycle MAC timing defaults: strobed preambles on transmit, short
/// receiver wake windows, and a mild shared-parent contention penalty.
pub fn default_mac() -> MacParams {
    MacParams {
        preamble_s: 0.05,
        wake_window_s: 0.02,
        processing_overhead_s: 0.01,
        contention_alpha: 0.1,
    }
}

fn base_deployment(positions: Vec<[f64; 2]>) -> Deployment {
    Deployment {
        positions,
        supply_voltage_v: 3.3,
        battery_capacity_mah: 800.0,
        cycle_duration_s: 120.0,
        payload_size_bytes: 43,
        averaging_cycles: 10,
        radio: zolertia_radio(),
        channel: default_channel(),
        mac: default_mac(),
    }
}

/// Gateway at the origin plus one station per entry of `distances_m`,
/// all on the x axis. Shadowing defaults to zero so the scene is fully
/// deterministic.
pub fn line_deployment(distances_m: &[f64]) -> Deployment {
    let mut positions = vec![[0.0, 0.0]];
    positions.extend(distances_m.iter().map(|&d| [d, 0.0]));
    let mut d = base_deployment(positions);
    d.channel.shadowing_sigma_db = 0.0;
    d
}

/// Association-phase RSSI values measured at the gateway for the
/// nine-station office deployment, strongest station first. The farthest
/// station (45 m) is received at -87 dBm.
pub fn indoor_testbed_rssi_targets() -> [f64; 9] {
    [-60.0, -66.0, -71.0, -75.0, -78.0, -81.0, -83.0, -85.0, -87.0]
}

fn indoor_testbed_positions() -> Vec<[f64; 2]> {
    vec![
        [0.0, 0.0],   // gateway
        [4.0, 3.0],   // 5 m
        [8.0, 0.0],   // 8 m
        [9.0, 8.0],   // ~12 m
        [16.0, 2.0],  // ~16.1 m
        [12.0, 17.0], // ~20.8 m
        [26.0, 7.0],  // ~26.9 m
        [22.0, 25.0], // ~33.3 m
        [38.0, 9.0],  // ~39.1 m
        [27.0, 36.0], // 45 m
    ]
}

/// Nine stations spread over an office floor, 45 m at the far end. The
/// reference loss is fitted so the deterministic channel reproduces the
/// measured association RSSI table.
pub fn indoor_testbed() -> Deployment {
    let positions = indoor_testbed_positions();
    let mut d = base_deployment(positions.clone());
    let targets = indoor_testbed_rssi_targets();
    d.channel.reference_loss_db = channel::fit_reference_loss_db(
        positions[0],
        &positions[1..],
        &targets,
        d.radio.max_power_dbm(),
        d.channel.path_loss_exponent,
    );
    d
}
