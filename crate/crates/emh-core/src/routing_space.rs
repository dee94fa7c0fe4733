//! The uplink routing space and its RSSI-feasible subset.
//!
//! All parent-assignment trees on n nodes number n^(n-2) (Cayley). The
//! feasibility rule keeps only links whose parent is received at the
//! gateway at least as strongly as the child; ordering stations by
//! (RSSI descending, id ascending) turns that into a strict total order,
//! so independent parent choice per station can never build a cycle and
//! the feasible set is the product of the candidate-set sizes.

use std::collections::HashSet;

use num_bigint::BigUint;
use rand::Rng;
use thiserror::Error;

use crate::model::{NodeId, RoutingVector, RssiVector, GATEWAY};

/// Default cap on explicit enumeration (7! routings).
pub const DEFAULT_ENUMERATION_LIMIT: usize = 10_080;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("space holds {cardinality} routings, over the enumeration limit {limit}")]
    TooLargeToEnumerate { cardinality: BigUint, limit: usize },
}

/// The RSSI-feasible routing set for one association snapshot.
#[derive(Clone, Debug)]
pub struct ConstrainedSpace {
    /// Stations sorted by (RSSI descending, id ascending).
    order: Vec<NodeId>,
    /// Allowed parents per station (index = station id - 1), ascending.
    candidate_parents: Vec<Vec<NodeId>>,
    cardinality: BigUint,
}

/// Number of distinct uplink routings on `node_count` nodes: n^(n-2).
pub fn count_all_routings(node_count: usize) -> BigUint {
    BigUint::from(node_count).pow(node_count as u32 - 2)
}

/// Builds the feasible space from the association RSSI vector. Ties are
/// broken by station id so the candidate order is always strict.
pub fn build_constrained_space(gamma: &RssiVector) -> ConstrainedSpace {
    let mut order: Vec<NodeId> = (1..=gamma.station_count() as u16).map(NodeId).collect();
    order.sort_by(|&a, &b| {
        gamma
            .get(b)
            .partial_cmp(&gamma.get(a))
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut candidate_parents = vec![Vec::new(); gamma.station_count()];
    for (pos, &s) in order.iter().enumerate() {
        let mut parents = vec![GATEWAY];
        parents.extend_from_slice(&order[..pos]);
        parents.sort();
        candidate_parents[s.index() - 1] = parents;
    }

    let cardinality = candidate_parents
        .iter()
        .map(|p| BigUint::from(p.len()))
        .product();

    ConstrainedSpace {
        order,
        candidate_parents,
        cardinality,
    }
}

impl ConstrainedSpace {
    pub fn station_count(&self) -> usize {
        self.candidate_parents.len()
    }

    /// Stations from strongest to weakest association RSSI.
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn candidate_parents(&self, s: NodeId) -> &[NodeId] {
        &self.candidate_parents[s.index() - 1]
    }

    pub fn cardinality(&self) -> &BigUint {
        &self.cardinality
    }

    /// Membership test: every parent must be a candidate of its station.
    pub fn contains(&self, r: &RoutingVector) -> bool {
        r.station_count() == self.station_count()
            && r.parents()
                .iter()
                .enumerate()
                .all(|(i, p)| self.candidate_parents[i].binary_search(p).is_ok())
    }

    /// One uniform draw over the whole space: an independent uniform
    /// parent choice per station.
    pub fn sample(&self, rng: &mut impl Rng) -> RoutingVector {
        let parents = self
            .candidate_parents
            .iter()
            .map(|c| c[rng.gen_range(0..c.len())])
            .collect();
        RoutingVector::new(parents)
    }

    /// All feasible routings, lexicographic in the per-station candidate
    /// indices. Refuses when the space exceeds `limit`.
    pub fn enumerate(&self, limit: usize) -> Result<Vec<RoutingVector>, SpaceError> {
        if self.cardinality > BigUint::from(limit) {
            return Err(SpaceError::TooLargeToEnumerate {
                cardinality: self.cardinality.clone(),
                limit,
            });
        }
        let total: usize = self
            .candidate_parents
            .iter()
            .map(|c| c.len())
            .product();
        let mut out = Vec::with_capacity(total);
        let mut indices = vec![0usize; self.station_count()];
        loop {
            let parents = indices
                .iter()
                .enumerate()
                .map(|(s, &i)| self.candidate_parents[s][i])
                .collect();
            out.push(RoutingVector::new(parents));

            // Mixed-radix increment, last station fastest.
            let mut pos = self.station_count();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                indices[pos] += 1;
                if indices[pos] < self.candidate_parents[pos].len() {
                    break;
                }
                indices[pos] = 0;
            }
        }
    }
}

/// Outcome of drawing an unexplored routing.
#[derive(Clone, Debug, PartialEq)]
pub enum Unexplored {
    Routing(RoutingVector),
    /// Every feasible routing has already been explored.
    Exhausted,
}

/// Uniform draw over the feasible routings not yet explored. Rejection
/// sampling covers the common case of a tiny explored fraction; once the
/// explored share passes one half on an enumerable space, the complement
/// is enumerated instead so the expected cost stays bounded.
pub fn sample_unexplored(
    space: &ConstrainedSpace,
    explored: &HashSet<RoutingVector>,
    rng: &mut impl Rng,
) -> Unexplored {
    let explored_here = explored.iter().filter(|r| space.contains(r)).count();
    if BigUint::from(explored_here) == *space.cardinality() {
        return Unexplored::Exhausted;
    }

    let enumerable = *space.cardinality() <= BigUint::from(DEFAULT_ENUMERATION_LIMIT);
    if enumerable && BigUint::from(2 * explored_here) > *space.cardinality() {
        let remaining: Vec<RoutingVector> = space
            .enumerate(DEFAULT_ENUMERATION_LIMIT)
            .expect("cardinality checked against the limit")
            .into_iter()
            .filter(|r| !explored.contains(r))
            .collect();
        return Unexplored::Routing(remaining[rng.gen_range(0..remaining.len())].clone());
    }

    loop {
        let r = space.sample(rng);
        if !explored.contains(&r) {
            return Unexplored::Routing(r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_routing;
    use crate::seeds::SimRng;
    use crate::validation::brute_force_tree_count as brute_force_count;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn cayley_matches_known_values() {
        assert_eq!(count_all_routings(2), BigUint::from(1u32));
        assert_eq!(count_all_routings(4), BigUint::from(16u32));
        assert_eq!(count_all_routings(10), BigUint::from(100_000_000u64));
    }

    #[test]
    fn cayley_matches_brute_force_enumeration() {
        for n in 2..=6 {
            assert_eq!(
                count_all_routings(n),
                BigUint::from(brute_force_count(n, None)),
                "n = {n}"
            );
        }
    }

    #[test]
    fn cayley_outgrows_u64_without_overflow() {
        let big = count_all_routings(30);
        assert!(big > BigUint::from(u64::MAX));
    }

    #[test]
    fn descending_rssi_candidate_sets() {
        let gamma = RssiVector::new(vec![-50.0, -60.0, -70.0]);
        let space = build_constrained_space(&gamma);
        assert_eq!(space.candidate_parents(NodeId(1)), &[GATEWAY]);
        assert_eq!(space.candidate_parents(NodeId(2)), &[GATEWAY, NodeId(1)]);
        assert_eq!(
            space.candidate_parents(NodeId(3)),
            &[GATEWAY, NodeId(1), NodeId(2)]
        );
        assert_eq!(*space.cardinality(), BigUint::from(6u32));
        assert_eq!(brute_force_count(4, Some(&gamma)), 6);
    }

    #[test]
    fn nine_distinct_stations_give_factorial() {
        let gamma = RssiVector::new((0..9).map(|i| -50.0 - i as f64).collect());
        let space = build_constrained_space(&gamma);
        assert_eq!(*space.cardinality(), BigUint::from(362_880u32)); // 9!
    }

    #[test]
    fn rssi_ties_break_by_lower_id() {
        let gamma = RssiVector::new(vec![-60.0, -60.0]);
        let space = build_constrained_space(&gamma);
        // Station 1 counts as stronger, so only station 2 may relay
        // through it.
        assert_eq!(space.candidate_parents(NodeId(1)), &[GATEWAY]);
        assert_eq!(space.candidate_parents(NodeId(2)), &[GATEWAY, NodeId(1)]);
    }

    #[test]
    fn cardinality_matches_brute_force_on_random_draws() {
        let mut rng = SimRng::seed_from_u64(11);
        for _ in 0..40 {
            let stations = rng.gen_range(2..=5usize);
            let gamma = RssiVector::new(
                (0..stations).map(|_| rng.gen_range(-100.0..-40.0)).collect(),
            );
            let space = build_constrained_space(&gamma);
            assert_eq!(
                *space.cardinality(),
                BigUint::from(brute_force_count(stations + 1, Some(&gamma)))
            );
        }
    }

    #[test]
    fn enumeration_yields_each_routing_once() {
        let gamma = RssiVector::new(vec![-50.0, -60.0, -70.0]);
        let space = build_constrained_space(&gamma);
        let all = space.enumerate(100).unwrap();
        assert_eq!(all.len(), 6);
        let unique: HashSet<_> = all.iter().cloned().collect();
        assert_eq!(unique.len(), 6);
        for r in &all {
            assert_eq!(validate_routing(r, 4), Ok(true));
            assert!(space.contains(r));
        }
    }

    #[test]
    fn single_station_space_is_the_star() {
        let gamma = RssiVector::new(vec![-70.0]);
        let space = build_constrained_space(&gamma);
        assert_eq!(space.enumerate(10).unwrap(), vec![RoutingVector::star(1)]);
    }

    #[test]
    fn enumeration_refuses_past_the_limit() {
        let gamma = RssiVector::new(vec![-50.0, -60.0, -70.0]);
        let space = build_constrained_space(&gamma);
        assert!(matches!(
            space.enumerate(5),
            Err(SpaceError::TooLargeToEnumerate { .. })
        ));
    }

    #[test]
    fn sampling_rejects_explored_routings() {
        let gamma = RssiVector::new(vec![-50.0, -60.0]);
        let space = build_constrained_space(&gamma);
        let all = space.enumerate(10).unwrap();
        assert_eq!(all.len(), 2);

        let explored: HashSet<_> = all[..1].iter().cloned().collect();
        let mut rng = SimRng::seed_from_u64(2);
        for _ in 0..20 {
            assert_eq!(
                sample_unexplored(&space, &explored, &mut rng),
                Unexplored::Routing(all[1].clone())
            );
        }
    }

    #[test]
    fn mostly_explored_space_switches_to_complement_enumeration() {
        // Four of six routings explored pushes the explored share past
        // one half, so draws come from the enumerated complement and
        // both leftovers keep appearing.
        let gamma = RssiVector::new(vec![-50.0, -60.0, -70.0]);
        let space = build_constrained_space(&gamma);
        let all = space.enumerate(10).unwrap();
        let explored: HashSet<_> = all[..4].iter().cloned().collect();
        let mut rng = SimRng::seed_from_u64(21);
        let mut seen = HashSet::new();
        for _ in 0..200 {
            match sample_unexplored(&space, &explored, &mut rng) {
                Unexplored::Routing(r) => {
                    assert!(!explored.contains(&r));
                    seen.insert(r);
                }
                Unexplored::Exhausted => panic!("two routings remain"),
            }
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn exhausted_space_is_signaled() {
        let gamma = RssiVector::new(vec![-50.0, -60.0]);
        let space = build_constrained_space(&gamma);
        let explored: HashSet<_> = space.enumerate(10).unwrap().into_iter().collect();
        let mut rng = SimRng::seed_from_u64(3);
        assert_eq!(
            sample_unexplored(&space, &explored, &mut rng),
            Unexplored::Exhausted
        );
    }

    #[test]
    fn off_space_explored_entries_do_not_block_exhaustion() {
        let gamma = RssiVector::new(vec![-50.0, -60.0]);
        let space = build_constrained_space(&gamma);
        let mut explored: HashSet<_> = space.enumerate(10).unwrap().into_iter().collect();
        // A routing from a different snapshot must not count.
        explored.insert(RoutingVector::from_ids(&[2, 0]));
        let mut rng = SimRng::seed_from_u64(4);
        assert_eq!(
            sample_unexplored(&space, &explored, &mut rng),
            Unexplored::Exhausted
        );
    }

    #[test]
    fn sampled_routings_are_valid_trees() {
        let mut rng = SimRng::seed_from_u64(5);
        let gamma = RssiVector::new(vec![-55.0, -62.0, -70.0, -80.0, -88.0]);
        let space = build_constrained_space(&gamma);
        let empty = HashSet::new();
        for _ in 0..10_000 {
            match sample_unexplored(&space, &empty, &mut rng) {
                Unexplored::Routing(r) => {
                    assert_eq!(validate_routing(&r, 6), Ok(true));
                    assert!(space.contains(&r));
                }
                Unexplored::Exhausted => panic!("empty explored set cannot exhaust"),
            }
        }
    }

    proptest! {
        #[test]
        fn star_is_always_feasible(values in proptest::collection::vec(-110.0f64..-40.0, 1..8)) {
            let space = build_constrained_space(&RssiVector::new(values.clone()));
            prop_assert!(space.contains(&RoutingVector::star(values.len())));
        }

        #[test]
        fn samples_respect_the_rssi_rule(
            values in proptest::collection::vec(-110.0f64..-40.0, 2..7),
            seed in 0u64..1000,
        ) {
            let gamma = RssiVector::new(values.clone());
            let space = build_constrained_space(&gamma);
            let mut rng = SimRng::seed_from_u64(seed);
            let r = space.sample(&mut rng);
            for (i, p) in r.parents().iter().enumerate() {
                if !p.is_gateway() {
                    prop_assert!(gamma.get(NodeId(i as u16 + 1)) <= gamma.get(*p));
                }
            }
            prop_assert_eq!(validate_routing(&r, values.len() + 1), Ok(true));
        }
    }
}
