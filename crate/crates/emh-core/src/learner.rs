//! The epsilon-greedy routing controller and the single-hop baseline.
//!
//! Each iteration the gateway re-estimates the association RSSI, rebuilds
//! the feasible space, picks a routing (explore an unexplored one with
//! probability epsilon, otherwise exploit the best known), measures it
//! for K cycles, and stores the reciprocal bottleneck energy as the
//! routing's payoff. Epsilon decays as epsilon0 / sqrt(t).

use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Scene;
use crate::model::{Deployment, NodeId, RoutingVector};
use crate::routing_space::{self, ConstrainedSpace, Unexplored};
use crate::seeds::{self, SimRng};
use crate::simulator::{self, MeasurementResult, SimError, SimOptions};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("measured bottleneck energy {0} J is not positive")]
    NonPositiveEnergy(f64),
    #[error("measurement routing does not match the chosen routing")]
    RoutingMismatch,
    #[error("no routing available: explored set and unexplored set are both empty")]
    NoActionAvailable,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// How a trace row's routing was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionKind {
    Explore,
    Exploit,
    /// Baseline policies that never switch routing.
    Fixed,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Explore => "explore",
            ActionKind::Exploit => "exploit",
            ActionKind::Fixed => "fixed",
        }
    }
}

/// What an exploit-time re-measurement does to the stored payoff.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffUpdate {
    /// Blend old and new payoff with weight 1/2.
    #[default]
    Ema,
    /// Keep the explore-time payoff untouched.
    Freeze,
}

/// Exploration-rate schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsilonSchedule {
    /// epsilon0 / sqrt(t) after t updates.
    InverseSqrt,
    /// Fixed rate; useful for exhaustive-exploration runs.
    Constant(f64),
}

/// Mutable learner state: payoff table, iteration counter, current
/// epsilon, and the action history.
#[derive(Clone, Debug)]
pub struct LearnerState {
    /// Completed iterations.
    pub t: u64,
    pub epsilon: f64,
    pub epsilon0: f64,
    pub schedule: EpsilonSchedule,
    pub payoff_update: PayoffUpdate,
    /// Payoff per explored routing; absence means unexplored.
    pub payoffs: HashMap<RoutingVector, f64>,
    /// (iteration, routing, mean bottleneck joules, action kind).
    pub history: Vec<(u64, RoutingVector, f64, ActionKind)>,
}

impl LearnerState {
    pub fn new(epsilon0: f64) -> Self {
        LearnerState {
            t: 0,
            epsilon: epsilon0,
            epsilon0,
            schedule: EpsilonSchedule::InverseSqrt,
            payoff_update: PayoffUpdate::Ema,
            payoffs: HashMap::new(),
            history: Vec::new(),
        }
    }

    fn explored_set(&self) -> HashSet<RoutingVector> {
        self.payoffs.keys().cloned().collect()
    }

    /// Best known routing inside the current space: highest payoff,
    /// ties broken by the lexicographically smallest parent vector.
    fn best_explored(&self, space: &ConstrainedSpace) -> Option<RoutingVector> {
        self.payoffs
            .iter()
            .filter(|(r, _)| space.contains(r))
            .max_by(|(ra, pa), (rb, pb)| {
                pa.partial_cmp(pb)
                    .unwrap()
                    .then_with(|| rb.cmp(ra)) // reversed: smaller routing wins ties
            })
            .map(|(r, _)| r.clone())
    }

    /// Picks the next routing. One uniform draw decides explore vs
    /// exploit each iteration; degenerate cases (nothing explored yet,
    /// or the space exhausted) force the only sensible branch.
    pub fn choose_action(
        &self,
        space: &ConstrainedSpace,
        rng: &mut impl Rng,
    ) -> Result<(RoutingVector, ActionKind), LearnerError> {
        let u: f64 = rng.gen();
        let best = self.best_explored(space);
        let wants_explore = best.is_none() || u < self.epsilon;

        if wants_explore {
            match routing_space::sample_unexplored(space, &self.explored_set(), rng) {
                Unexplored::Routing(r) => return Ok((r, ActionKind::Explore)),
                Unexplored::Exhausted => {}
            }
        }
        best.map(|r| (r, ActionKind::Exploit))
            .ok_or(LearnerError::NoActionAvailable)
    }

    /// Stores the measured payoff, advances the iteration counter, and
    /// refreshes epsilon. A routing seen before can only be an exploit
    /// re-measurement; those update the payoff per [`PayoffUpdate`].
    pub fn update(
        &mut self,
        routing: &RoutingVector,
        kind: ActionKind,
        measurement: &MeasurementResult,
    ) -> Result<(), LearnerError> {
        if measurement.routing != *routing {
            return Err(LearnerError::RoutingMismatch);
        }
        let e_b = measurement.bottleneck_mean_energy_j;
        if e_b <= 0.0 {
            return Err(LearnerError::NonPositiveEnergy(e_b));
        }
        let payoff = 1.0 / e_b;
        match self.payoffs.get_mut(routing) {
            None => {
                self.payoffs.insert(routing.clone(), payoff);
            }
            Some(stored) => match self.payoff_update {
                PayoffUpdate::Ema => *stored = 0.5 * *stored + 0.5 * payoff,
                PayoffUpdate::Freeze => {}
            },
        }
        self.t += 1;
        self.epsilon = match self.schedule {
            EpsilonSchedule::InverseSqrt => self.epsilon0 / (self.t as f64).sqrt(),
            EpsilonSchedule::Constant(eps) => eps,
        };
        self.history.push((self.t, routing.clone(), e_b, kind));
        Ok(())
    }
}

/// Routing policy under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    /// Star topology on every iteration.
    #[serde(rename = "sh")]
    SingleHop,
    /// Epsilon-greedy multi-hop search.
    #[serde(rename = "emh")]
    Emh,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::SingleHop => "sh",
            Policy::Emh => "emh",
        }
    }
}

/// Everything one experiment run needs besides the deployment.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub policy: Policy,
    pub iterations: u32,
    pub cycles: u32,
    pub seed: u64,
    pub epsilon0: f64,
    pub schedule: EpsilonSchedule,
    pub payoff_update: PayoffUpdate,
    pub sim: SimOptions,
    /// Keep the per-cycle reports on each trace record (verbose dumps).
    pub keep_cycle_reports: bool,
}

impl RunOptions {
    pub fn new(policy: Policy, iterations: u32, cycles: u32, seed: u64) -> Self {
        RunOptions {
            policy,
            iterations,
            cycles,
            seed,
            epsilon0: 1.0,
            schedule: EpsilonSchedule::InverseSqrt,
            payoff_update: PayoffUpdate::default(),
            sim: SimOptions::default(),
            keep_cycle_reports: false,
        }
    }
}

/// One iteration of a finished run.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub t: u32,
    pub kind: ActionKind,
    pub routing: RoutingVector,
    /// Epsilon after this iteration's update (0 for baselines).
    pub epsilon: f64,
    /// Mean bottleneck energy of the measurement.
    pub e_b_j: f64,
    pub bottleneck_station: NodeId,
    pub per_station_mean_energy_j: Vec<f64>,
    /// Delivery failures summed over the iteration's cycles.
    pub failures: u32,
    /// Per-cycle breakdowns, kept only when the run asked for them.
    pub cycle_reports: Option<Vec<crate::energy::CycleReport>>,
}

/// Full record of one seeded experiment.
#[derive(Clone, Debug)]
pub struct ExperimentTrace {
    pub policy: Policy,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
}

impl ExperimentTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn station_count(&self) -> usize {
        self.records
            .first()
            .map(|r| r.per_station_mean_energy_j.len())
            .unwrap_or(0)
    }
}

/// Runs one seeded experiment: T iterations of association, routing
/// choice, K measurement cycles, and (for the learner) a payoff update.
pub fn run_experiment(
    deployment: &Deployment,
    options: &RunOptions,
) -> Result<ExperimentTrace, LearnerError> {
    assert!(options.iterations >= 1);
    let scene = Scene::new(
        deployment,
        &mut seeds::rng_for(options.seed, seeds::stream::SCENE),
    );
    let mut loop_rng: SimRng = seeds::rng_for(options.seed, seeds::stream::LOOP);

    let mut learner = LearnerState::new(options.epsilon0);
    learner.schedule = options.schedule;
    learner.payoff_update = options.payoff_update;

    let mut records = Vec::with_capacity(options.iterations as usize);
    for t in 1..=options.iterations {
        // Association phase: the RSSI snapshot is re-estimated every
        // iteration even though a frozen scene keeps it constant.
        let gamma = scene.rssi_vector().map_err(SimError::from)?;
        let space = routing_space::build_constrained_space(&gamma);

        let (routing, kind) = match options.policy {
            Policy::SingleHop => (
                RoutingVector::star(deployment.station_count()),
                ActionKind::Fixed,
            ),
            Policy::Emh => learner.choose_action(&space, &mut loop_rng)?,
        };

        let measurement = simulator::measure_routing(
            &scene,
            &routing,
            options.cycles,
            &options.sim,
            &mut loop_rng,
        )?;

        let epsilon = match options.policy {
            Policy::SingleHop => 0.0,
            Policy::Emh => {
                learner.update(&routing, kind, &measurement)?;
                learner.epsilon
            }
        };

        let failures = measurement
            .cycle_reports
            .iter()
            .map(|c| c.delivery_failures)
            .sum();
        records.push(IterationRecord {
            t,
            kind,
            routing,
            epsilon,
            e_b_j: measurement.bottleneck_mean_energy_j,
            bottleneck_station: measurement.bottleneck_station,
            per_station_mean_energy_j: measurement.per_station_mean_energy_j,
            failures,
            cycle_reports: options.keep_cycle_reports.then_some(measurement.cycle_reports),
        });
    }

    Ok(ExperimentTrace {
        policy: options.policy,
        seed: options.seed,
        records,
    })
}

/// Runs a batch of independent experiments, fanning out over rayon when
/// the `parallel` feature is enabled. Results keep the input order.
pub fn run_experiments(
    deployment: &Deployment,
    runs: &[RunOptions],
) -> Result<Vec<ExperimentTrace>, LearnerError> {
    #[cfg(feature = "parallel")]
    {
        runs.par_iter()
            .map(|opts| run_experiment(deployment, opts))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_experiments_seq(deployment, runs)
    }
}

/// Sequential twin of [`run_experiments`] for benchmarking and for
/// builds without the `parallel` feature.
pub fn run_experiments_seq(
    deployment: &Deployment,
    runs: &[RunOptions],
) -> Result<Vec<ExperimentTrace>, LearnerError> {
    runs.iter()
        .map(|opts| run_experiment(deployment, opts))
        .collect()
}
