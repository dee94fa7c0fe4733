//! K-cycle measurement of a fixed routing: the primitive the learner
//! scores its actions with.

use thiserror::Error;

use crate::channel::{self, ChannelError, Scene};
use crate::energy::{self, CycleReport, EnergyError};
use crate::model::{ModelError, NodeId, RoutingVector};
use crate::routing_space::{ConstrainedSpace, SpaceError};
use crate::seeds::{self, SimRng};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("routing is not a tree into the gateway")]
    NotATree,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Per-measurement switches, taken from the experiment configuration.
#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    /// Charge each station one max-power transmission plus one receive
    /// window per iteration for the association phase and the routing
    /// broadcast.
    pub association_cost: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            association_cost: true,
        }
    }
}

/// Averaged outcome of measuring one routing for K cycles.
#[derive(Clone, Debug)]
pub struct MeasurementResult {
    pub routing: RoutingVector,
    /// Mean joules per cycle per station, station-id order.
    pub per_station_mean_energy_j: Vec<f64>,
    /// Mean consumption of the hungriest station.
    pub bottleneck_mean_energy_j: f64,
    /// Station attaining the bottleneck (lowest id on ties).
    pub bottleneck_station: NodeId,
    pub cycle_reports: Vec<CycleReport>,
    /// Fraction of (station, cycle) deliveries that exhausted the retry
    /// budget.
    pub delivery_failure_rate: f64,
}

/// Per-uplink operating point, fixed for the whole measurement.
struct LinkPlan {
    tx_power_dbm: f64,
    operating_rssi_dbm: f64,
    /// Expected extra attempts from siblings sharing the parent.
    contention_extra: f64,
}

fn plan_links(scene: &Scene, routing: &RoutingVector) -> Vec<LinkPlan> {
    let d = scene.deployment();
    let max_power = d.radio.max_power_dbm();
    let mut fanin = vec![0u32; d.node_count()];
    for p in routing.parents() {
        fanin[p.index()] += 1;
    }
    d.station_ids()
        .map(|s| {
            let parent = routing.parents()[s.index() - 1];
            let rssi_at_max = scene.link_rssi_dbm(s, parent, max_power);
            let tx_power_dbm = channel::select_tx_power(rssi_at_max, &d.channel, &d.radio);
            LinkPlan {
                tx_power_dbm,
                operating_rssi_dbm: rssi_at_max - (max_power - tx_power_dbm),
                contention_extra: d.mac.contention_alpha
                    * (fanin[parent.index()].saturating_sub(1)) as f64,
            }
        })
        .collect()
}

/// Joules one station spends on the association phase: one max-power
/// uplink transmission plus one wake window for the routing broadcast.
fn association_energy_j(scene: &Scene) -> f64 {
    let d = scene.deployment();
    let tx_time = d.mac.preamble_s + d.radio.airtime_s(d.payload_size_bytes);
    d.supply_voltage_v
        * (d.radio.i_tx_max_a * tx_time + d.radio.i_rx_a * d.mac.wake_window_s)
}

/// Runs `cycles` operation cycles under `routing` and averages the
/// per-station energies. Deterministic for a given scene and RNG state.
pub fn measure_routing(
    scene: &Scene,
    routing: &RoutingVector,
    cycles: u32,
    options: &SimOptions,
    rng: &mut SimRng,
) -> Result<MeasurementResult, SimError> {
    let d = scene.deployment();
    if !routing.validate(d.node_count())? {
        return Err(SimError::NotATree);
    }
    assert!(cycles >= 1, "a measurement needs at least one cycle");

    let plans = plan_links(scene, routing);
    let budget = (1 + d.channel.max_retransmissions) as f64;
    let tx_powers: Vec<f64> = plans.iter().map(|p| p.tx_power_dbm).collect();
    let station_count = d.station_count();

    let mut cycle_reports = Vec::with_capacity(cycles as usize);
    let mut energy_sums = vec![0.0f64; station_count];
    let mut failures_total = 0u32;

    for k in 0..cycles {
        let mut attempts = Vec::with_capacity(station_count);
        let mut failures = 0u32;
        for plan in &plans {
            let drawn = channel::draw_transmission_attempts(
                plan.operating_rssi_dbm,
                d.radio.sensitivity_dbm,
                &d.channel,
                rng,
            );
            if !drawn.delivered {
                failures += 1;
            }
            attempts.push((drawn.count as f64 + plan.contention_extra).min(budget));
        }

        let mut report = energy::account_cycle(d, routing, &attempts, &tx_powers)?;
        report.delivery_failures = failures;
        if options.association_cost && k == 0 {
            let assoc = association_energy_j(scene);
            for sc in report.stations.iter_mut() {
                sc.association_energy_j = assoc;
            }
        }
        for (sum, sc) in energy_sums.iter_mut().zip(&report.stations) {
            *sum += sc.total_energy_j();
        }
        failures_total += failures;
        cycle_reports.push(report);
    }

    let per_station_mean_energy_j: Vec<f64> =
        energy_sums.iter().map(|e| e / cycles as f64).collect();
    let (bottleneck_idx, bottleneck_mean_energy_j) = per_station_mean_energy_j
        .iter()
        .copied()
        .enumerate()
        .reduce(|best, cur| if cur.1 > best.1 { cur } else { best })
        .expect("deployments have at least one station");

    Ok(MeasurementResult {
        routing: routing.clone(),
        per_station_mean_energy_j,
        bottleneck_mean_energy_j,
        bottleneck_station: NodeId(bottleneck_idx as u16 + 1),
        cycle_reports,
        delivery_failure_rate: failures_total as f64 / (cycles as f64 * station_count as f64),
    })
}

/// Measures the star topology: every station transmits straight to the
/// gateway.
pub fn measure_single_hop(
    scene: &Scene,
    cycles: u32,
    options: &SimOptions,
    rng: &mut SimRng,
) -> Result<MeasurementResult, SimError> {
    let star = RoutingVector::star(scene.deployment().station_count());
    measure_routing(scene, &star, cycles, options, rng)
}

/// A routing with its measured score.
#[derive(Clone, Debug)]
pub struct RankedRouting {
    pub routing: RoutingVector,
    pub mean_bottleneck_j: f64,
    /// Reciprocal of the mean bottleneck energy.
    pub payoff: f64,
}

fn rank_order(a: &RankedRouting, b: &RankedRouting) -> std::cmp::Ordering {
    b.payoff
        .partial_cmp(&a.payoff)
        .unwrap()
        .then_with(|| a.routing.cmp(&b.routing))
}

fn measure_for_rank(
    scene: &Scene,
    options: &SimOptions,
    cycles: u32,
    master_seed: u64,
    idx: usize,
    routing: &RoutingVector,
) -> Result<RankedRouting, SimError> {
    let mut rng = seeds::rng_for(
        seeds::derive_seed(master_seed, seeds::stream::ORACLE),
        idx as u64,
    );
    let m = measure_routing(scene, routing, cycles, options, &mut rng)?;
    Ok(RankedRouting {
        routing: m.routing,
        mean_bottleneck_j: m.bottleneck_mean_energy_j,
        payoff: 1.0 / m.bottleneck_mean_energy_j,
    })
}

/// Measures every routing in the space and ranks them best-first (highest
/// payoff, ties broken by the lexicographically smallest parent vector).
/// Exact ground truth whenever the channel is deterministic. Fans out
/// over rayon when the `parallel` feature is enabled.
pub fn rank_routings(
    scene: &Scene,
    space: &ConstrainedSpace,
    cycles: u32,
    options: &SimOptions,
    master_seed: u64,
    limit: usize,
) -> Result<Vec<RankedRouting>, SimError> {
    let all = space.enumerate(limit)?;

    #[cfg(feature = "parallel")]
    let mut ranked: Vec<RankedRouting> = all
        .par_iter()
        .enumerate()
        .map(|(idx, r)| measure_for_rank(scene, options, cycles, master_seed, idx, r))
        .collect::<Result<_, _>>()?;

    #[cfg(not(feature = "parallel"))]
    let mut ranked: Vec<RankedRouting> = all
        .iter()
        .enumerate()
        .map(|(idx, r)| measure_for_rank(scene, options, cycles, master_seed, idx, r))
        .collect::<Result<_, _>>()?;

    ranked.sort_by(rank_order);
    Ok(ranked)
}

/// Sequential twin of [`rank_routings`]; the benchmark suite compares the
/// two and non-`parallel` builds route through the same loop shape.
pub fn rank_routings_seq(
    scene: &Scene,
    space: &ConstrainedSpace,
    cycles: u32,
    options: &SimOptions,
    master_seed: u64,
    limit: usize,
) -> Result<Vec<RankedRouting>, SimError> {
    let all = space.enumerate(limit)?;
    let mut ranked: Vec<RankedRouting> = all
        .iter()
        .enumerate()
        .map(|(idx, r)| measure_for_rank(scene, options, cycles, master_seed, idx, r))
        .collect::<Result<_, _>>()?;
    ranked.sort_by(rank_order);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{microprocessor_energy, radio_energy, StateTimes};
    use crate::model::GATEWAY;
    use crate::presets;
    use crate::routing_space::build_constrained_space;
    use rand::SeedableRng;

    /// Fully deterministic channel: zero shadowing and a packet-success
    /// curve so steep every attempt succeeds at the operating margin.
    fn deterministic(mut d: crate::model::Deployment) -> crate::model::Deployment {
        d.channel.shadowing_sigma_db = 0.0;
        d.channel.per_steepness_per_db = 1e9;
        d
    }

    fn scene_of(d: &crate::model::Deployment) -> Scene {
        Scene::new(d, &mut SimRng::seed_from_u64(77))
    }

    #[test]
    fn deterministic_channel_k_independent() {
        let d = deterministic(presets::line_deployment(&[8.0, 25.0, 58.0]));
        let scene = scene_of(&d);
        let opts = SimOptions { association_cost: false };
        let chain = RoutingVector::from_ids(&[0, 1, 2]);
        let one = measure_routing(&scene, &chain, 1, &opts, &mut SimRng::seed_from_u64(1))
            .unwrap();
        let ten = measure_routing(&scene, &chain, 10, &opts, &mut SimRng::seed_from_u64(2))
            .unwrap();
        // Identical cycles; the K-cycle mean only differs by summation
        // rounding in the last ulp.
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * a.abs();
        assert!(close(one.bottleneck_mean_energy_j, ten.bottleneck_mean_energy_j));
        for (a, b) in one
            .per_station_mean_energy_j
            .iter()
            .zip(&ten.per_station_mean_energy_j)
        {
            assert!(close(*a, *b), "{a} vs {b}");
        }
    }

    #[test]
    fn chain_beats_star_on_a_stretched_line() {
        // Hand account: on this geometry the chain relieves both the
        // contention penalty and the far station's power level, and the
        // relays' receive cost stays below the gain.
        let d = deterministic(presets::line_deployment(&[6.0, 25.0, 70.0]));
        let scene = scene_of(&d);
        let opts = SimOptions { association_cost: false };
        let mut rng = SimRng::seed_from_u64(3);
        let star = measure_single_hop(&scene, 1, &opts, &mut rng).unwrap();
        let chain = measure_routing(
            &scene,
            &RoutingVector::from_ids(&[0, 1, 2]),
            1,
            &opts,
            &mut rng,
        )
        .unwrap();
        assert!(
            chain.bottleneck_mean_energy_j < star.bottleneck_mean_energy_j,
            "chain {} vs star {}",
            chain.bottleneck_mean_energy_j,
            star.bottleneck_mean_energy_j
        );
    }

    #[test]
    fn star_measurement_matches_hand_account() {
        let d = deterministic(presets::line_deployment(&[6.0, 25.0, 70.0]));
        let scene = scene_of(&d);
        let opts = SimOptions { association_cost: false };
        let star = measure_single_hop(&scene, 1, &opts, &mut SimRng::seed_from_u64(4)).unwrap();

        // Rebuild station 3's energy from first principles.
        let s = NodeId(3);
        let rssi_max = scene.link_rssi_dbm(s, GATEWAY, d.radio.max_power_dbm());
        let power = channel::select_tx_power(rssi_max, &d.channel, &d.radio);
        let attempts = 1.0 + d.mac.contention_alpha * 2.0; // three stations share the gateway
        let t_tx = attempts * (d.mac.preamble_s + d.radio.airtime_s(43));
        let times = StateTimes {
            t_cpu_s: d.mac.processing_overhead_s,
            t_lpm_s: d.cycle_duration_s - d.mac.processing_overhead_s,
            t_rx_s: 0.0,
            t_tx_s: t_tx,
            t_sl_s: d.cycle_duration_s - t_tx,
        };
        let expected = microprocessor_energy(&times, d.supply_voltage_v, &d.radio).unwrap()
            + radio_energy(&times, d.supply_voltage_v, &d.radio, power).unwrap();
        assert!((star.per_station_mean_energy_j[2] - expected).abs() < 1e-15);
    }

    #[test]
    fn single_hop_is_the_star_code_path() {
        let d = deterministic(presets::line_deployment(&[8.0, 25.0, 58.0]));
        let scene = scene_of(&d);
        let opts = SimOptions::default();
        let a = measure_single_hop(&scene, 5, &opts, &mut SimRng::seed_from_u64(5)).unwrap();
        let b = measure_routing(
            &scene,
            &RoutingVector::star(3),
            5,
            &opts,
            &mut SimRng::seed_from_u64(5),
        )
        .unwrap();
        assert_eq!(a.routing, RoutingVector::star(3));
        assert_eq!(a.per_station_mean_energy_j, b.per_station_mean_energy_j);
        assert_eq!(a.bottleneck_mean_energy_j, b.bottleneck_mean_energy_j);
        assert_eq!(a.cycle_reports, b.cycle_reports);
    }

    #[test]
    fn bottleneck_is_the_argmax_station() {
        let d = deterministic(presets::line_deployment(&[8.0, 25.0, 58.0]));
        let scene = scene_of(&d);
        let m = measure_single_hop(
            &scene,
            1,
            &SimOptions::default(),
            &mut SimRng::seed_from_u64(6),
        )
        .unwrap();
        let max = m
            .per_station_mean_energy_j
            .iter()
            .cloned()
            .fold(f64::MIN, f64::max);
        assert_eq!(m.bottleneck_mean_energy_j, max);
        assert_eq!(
            m.per_station_mean_energy_j[m.bottleneck_station.index() - 1],
            max
        );
        // On a line the farthest station pays the highest power.
        assert_eq!(m.bottleneck_station, NodeId(3));
    }

    #[test]
    fn same_seed_reproduces_the_measurement() {
        let mut d = presets::line_deployment(&[8.0, 25.0, 58.0]);
        d.channel.shadowing_sigma_db = 2.5; // leave the stochastic paths on
        let scene = scene_of(&d);
        let opts = SimOptions::default();
        let chain = RoutingVector::from_ids(&[0, 1, 2]);
        let a = measure_routing(&scene, &chain, 10, &opts, &mut SimRng::seed_from_u64(7))
            .unwrap();
        let b = measure_routing(&scene, &chain, 10, &opts, &mut SimRng::seed_from_u64(7))
            .unwrap();
        assert_eq!(a.per_station_mean_energy_j, b.per_station_mean_energy_j);
        assert_eq!(a.bottleneck_mean_energy_j.to_bits(), b.bottleneck_mean_energy_j.to_bits());
        assert_eq!(a.cycle_reports, b.cycle_reports);
    }

    #[test]
    fn healthy_links_never_fail_delivery() {
        // Every link operates at least 20 dB over sensitivity, where the
        // per-attempt loss probability is under 1e-6.
        let mut d = presets::line_deployment(&[2.0, 4.0, 6.0]);
        d.channel.link_margin_db = 20.0;
        let scene = scene_of(&d);
        let m = measure_single_hop(
            &scene,
            10_000,
            &SimOptions { association_cost: false },
            &mut SimRng::seed_from_u64(8),
        )
        .unwrap();
        assert_eq!(m.delivery_failure_rate, 0.0);
    }

    #[test]
    fn bottleneck_dominates_every_station_mean() {
        let mut d = presets::line_deployment(&[8.0, 25.0, 58.0]);
        d.channel.shadowing_sigma_db = 2.0;
        let scene = scene_of(&d);
        let m = measure_routing(
            &scene,
            &RoutingVector::from_ids(&[0, 1, 1]),
            10,
            &SimOptions::default(),
            &mut SimRng::seed_from_u64(9),
        )
        .unwrap();
        for &e in &m.per_station_mean_energy_j {
            assert!(e > 0.0);
            assert!(m.bottleneck_mean_energy_j >= e);
        }
    }

    #[test]
    fn invalid_routing_is_rejected() {
        let d = presets::line_deployment(&[8.0, 25.0]);
        let scene = scene_of(&d);
        let cyclic = RoutingVector::from_ids(&[2, 1]);
        assert!(matches!(
            measure_routing(
                &scene,
                &cyclic,
                1,
                &SimOptions::default(),
                &mut SimRng::seed_from_u64(10)
            ),
            Err(SimError::NotATree)
        ));
    }

    #[test]
    fn ranking_orders_by_payoff_and_marks_the_best() {
        let d = deterministic(presets::line_deployment(&[6.0, 25.0, 70.0]));
        let scene = scene_of(&d);
        let gamma = scene.rssi_vector().unwrap();
        let space = build_constrained_space(&gamma);
        let opts = SimOptions { association_cost: false };
        let ranked = rank_routings(&scene, &space, 1, &opts, 0, 100).unwrap();
        assert_eq!(ranked.len(), 6);
        for pair in ranked.windows(2) {
            assert!(pair[0].payoff >= pair[1].payoff);
        }
        let seq = rank_routings_seq(&scene, &space, 1, &opts, 0, 100).unwrap();
        assert_eq!(ranked.len(), seq.len());
        for (a, b) in ranked.iter().zip(&seq) {
            assert_eq!(a.routing, b.routing);
            assert_eq!(a.mean_bottleneck_j.to_bits(), b.mean_bottleneck_j.to_bits());
        }
    }

    #[test]
    fn variance_shrinks_with_more_averaging_cycles() {
        let mut d = presets::line_deployment(&[8.0, 25.0, 58.0]);
        d.channel.shadowing_sigma_db = 2.0;
        d.channel.link_margin_db = 2.0; // poor margins make retries common
        let scene = scene_of(&d);
        let opts = SimOptions { association_cost: false };
        let star = RoutingVector::star(3);

        let variance_at = |k: u32| {
            let samples: Vec<f64> = (0..100)
                .map(|seed| {
                    measure_routing(&scene, &star, k, &opts, &mut SimRng::seed_from_u64(seed))
                        .unwrap()
                        .bottleneck_mean_energy_j
                })
                .collect();
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / samples.len() as f64
        };

        let v1 = variance_at(1);
        let v10 = variance_at(10);
        let v100 = variance_at(100);
        // Cycles are independent, so the K-cycle mean variance shrinks
        // roughly as 1/K; assert the order plus a loose rate.
        assert!(v10 < v1 / 3.0, "v10 {v10} vs v1 {v1}");
        assert!(v100 < v10 / 3.0, "v100 {v100} vs v10 {v10}");
    }
}
