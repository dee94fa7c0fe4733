//! Fast self-check suite behind the `validate` CLI command, plus the
//! brute-force tree oracle it and the test suites share.
//!
//! The oracle enumerates raw parent vectors and checks tree-ness by
//! walking to the root, independent of the constrained-space
//! construction it is used to verify.

use rand::Rng;
use rand::SeedableRng;

use crate::energy::{microprocessor_energy, radio_energy, StateTimes};
use crate::model::{
    children_partition_stations, validate_routing, NodeId, RoutingVector, RssiVector,
};
use crate::presets;
use crate::routing_space::{build_constrained_space, count_all_routings};
use crate::seeds::SimRng;
use num_bigint::BigUint;

/// Counts parent vectors over `node_count` nodes that form a tree into
/// the gateway; with `gamma` given, only trees where every non-gateway
/// link satisfies the RSSI feasibility rule are counted.
pub fn brute_force_tree_count(node_count: usize, gamma: Option<&RssiVector>) -> u64 {
    let stations = node_count - 1;
    let mut count = 0u64;
    let mut parents = vec![0u16; stations];
    loop {
        let r = RoutingVector::from_ids(&parents);
        if validate_routing(&r, node_count) == Ok(true) {
            let feasible = gamma.is_none_or(|g| {
                r.parents()
                    .iter()
                    .enumerate()
                    .all(|(i, p)| p.is_gateway() || g.get(NodeId(i as u16 + 1)) <= g.get(*p))
            });
            if feasible {
                count += 1;
            }
        }
        // Odometer over all parent assignments.
        let mut pos = 0;
        loop {
            if pos == stations {
                return count;
            }
            parents[pos] += 1;
            if (parents[pos] as usize) < node_count {
                break;
            }
            parents[pos] = 0;
            pos += 1;
        }
    }
}

/// One named invariant check.
pub struct Check {
    pub name: &'static str,
    pub run: fn() -> Result<(), String>,
}

fn check_tree_validity() -> Result<(), String> {
    let good = RoutingVector::from_ids(&[0, 0, 2, 2, 4, 4, 2, 7, 7]);
    if good.validate(10) != Ok(true) {
        return Err("known-good routing vector rejected".into());
    }
    if RoutingVector::star(9).validate(10) != Ok(true) {
        return Err("star routing rejected".into());
    }
    if RoutingVector::from_ids(&[2, 1]).validate(3) != Ok(false) {
        return Err("two-cycle accepted as a tree".into());
    }
    Ok(())
}

fn check_cayley_counts() -> Result<(), String> {
    if count_all_routings(4) != BigUint::from(16u32) {
        return Err("n=4 should give 16 routings".into());
    }
    if count_all_routings(10) != BigUint::from(100_000_000u64) {
        return Err("n=10 should give 10^8 routings".into());
    }
    for n in 2..=5 {
        if count_all_routings(n) != BigUint::from(brute_force_tree_count(n, None)) {
            return Err(format!("formula and enumeration disagree at n={n}"));
        }
    }
    Ok(())
}

fn check_constrained_counts() -> Result<(), String> {
    let mut rng = SimRng::seed_from_u64(1001);
    for round in 0..30 {
        let stations = rng.gen_range(2..=4usize);
        let gamma = RssiVector::new(
            (0..stations).map(|_| rng.gen_range(-100.0..-40.0)).collect(),
        );
        let space = build_constrained_space(&gamma);
        let brute = brute_force_tree_count(stations + 1, Some(&gamma));
        if *space.cardinality() != BigUint::from(brute) {
            return Err(format!(
                "round {round}: cardinality {} vs brute force {brute}",
                space.cardinality()
            ));
        }
    }
    Ok(())
}

fn check_epsilon_schedule() -> Result<(), String> {
    use crate::learner::{ActionKind, LearnerState};
    use crate::simulator::MeasurementResult;

    let mut state = LearnerState::new(1.0);
    let star = RoutingVector::star(3);
    let measurement = MeasurementResult {
        routing: star.clone(),
        per_station_mean_energy_j: vec![1.0; 3],
        bottleneck_mean_energy_j: 1.0,
        bottleneck_station: NodeId(1),
        cycle_reports: Vec::new(),
        delivery_failure_rate: 0.0,
    };
    let mut previous = f64::INFINITY;
    for t in 1..=110u64 {
        state
            .update(&star, ActionKind::Exploit, &measurement)
            .map_err(|e| e.to_string())?;
        let expected = 1.0 / (t as f64).sqrt();
        if (state.epsilon - expected).abs() > 1e-12 {
            return Err(format!(
                "epsilon after {t} updates is {}, wanted {expected}",
                state.epsilon
            ));
        }
        if state.epsilon <= 0.0 || state.epsilon > 1.0 || state.epsilon > previous {
            return Err(format!("epsilon not decreasing within (0,1] at t={t}"));
        }
        previous = state.epsilon;
    }
    Ok(())
}

fn check_energy_formulas() -> Result<(), String> {
    let radio = presets::zolertia_radio();
    let cpu_burst = StateTimes { t_cpu_s: 1.0, ..Default::default() };
    let micro = microprocessor_energy(&cpu_burst, 3.3, &radio)
        .map_err(|e| e.to_string())?;
    let want = 3.3 * 0.013;
    if (micro - want).abs() / want > 1e-12 {
        return Err(format!("1 s of CPU gave {micro} J, wanted {want} J"));
    }

    let tx_burst = StateTimes { t_tx_s: radio.airtime_s(43), ..Default::default() };
    let tx = radio_energy(&tx_burst, 3.3, &radio, 14.0).map_err(|e| e.to_string())?;
    let want_tx = 3.3 * (43.0 * 8.0 / 50_000.0) * 0.061;
    if (tx - want_tx).abs() / want_tx > 1e-12 {
        return Err(format!("43-byte burst gave {tx} J, wanted {want_tx} J"));
    }
    Ok(())
}

fn check_star_membership() -> Result<(), String> {
    let mut rng = SimRng::seed_from_u64(1002);
    for _ in 0..50 {
        let stations = rng.gen_range(1..=8usize);
        let gamma = RssiVector::new(
            (0..stations).map(|_| rng.gen_range(-100.0..-40.0)).collect(),
        );
        let space = build_constrained_space(&gamma);
        if !space.contains(&RoutingVector::star(stations)) {
            return Err("star routing missing from a feasible space".into());
        }
    }
    Ok(())
}

fn check_sampling_validity() -> Result<(), String> {
    let gamma = RssiVector::new(vec![-52.0, -63.0, -71.0, -80.0, -91.0]);
    let space = build_constrained_space(&gamma);
    let mut rng = SimRng::seed_from_u64(1003);
    for i in 0..100_000 {
        let r = space.sample(&mut rng);
        if r.validate(6) != Ok(true) {
            return Err(format!("sample {i} is not a tree"));
        }
        if !space.contains(&r) {
            return Err(format!("sample {i} escapes the feasible space"));
        }
        if !children_partition_stations(&r, 6) {
            return Err(format!("sample {i} breaks the children partition"));
        }
    }
    Ok(())
}

/// The built-in checks in execution order.
pub fn builtin_checks() -> Vec<Check> {
    vec![
        Check { name: "routing tree validity", run: check_tree_validity },
        Check { name: "labeled tree counts", run: check_cayley_counts },
        Check { name: "constrained cardinality vs brute force", run: check_constrained_counts },
        Check { name: "epsilon schedule", run: check_epsilon_schedule },
        Check { name: "energy formula spot values", run: check_energy_formulas },
        Check { name: "star routing membership", run: check_star_membership },
        Check { name: "sampling validity (100k draws)", run: check_sampling_validity },
    ]
}
