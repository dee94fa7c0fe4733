//! Evaluation metrics over finished traces: per-iteration bottleneck
//! energy, historic (cumulative) bottleneck energy, the saving ratio
//! between two policies, moving averages, and lifetime extrapolation.

use thiserror::Error;

use crate::learner::ExperimentTrace;
use crate::model::Deployment;

/// Smoothing window used for the bottleneck-energy tendency curve.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 15;

/// Trailing window for the lifetime extrapolation increment.
pub const LIFETIME_WINDOW: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("iteration {wanted} out of range, trace has {len}")]
    IterationOutOfRange { wanted: usize, len: usize },
    #[error("traces cover different iteration counts ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("baseline historic bottleneck is zero at iteration {0}")]
    ZeroBaseline(usize),
}

/// Historic bottleneck energy per iteration: the maximum over stations of
/// the station's cumulative mean energy. The maximum is taken over the
/// cumulative sums, not summed over per-iteration maxima.
pub fn historic_bottleneck_series(trace: &ExperimentTrace) -> Result<Vec<f64>, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let stations = trace.station_count();
    let mut cumulative = vec![0.0f64; stations];
    let mut series = Vec::with_capacity(trace.len());
    for rec in &trace.records {
        for (c, e) in cumulative.iter_mut().zip(&rec.per_station_mean_energy_j) {
            *c += e;
        }
        series.push(cumulative.iter().cloned().fold(f64::MIN, f64::max));
    }
    Ok(series)
}

/// Historic bottleneck at a single 1-based iteration.
pub fn historic_bottleneck(trace: &ExperimentTrace, t: usize) -> Result<f64, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    if t == 0 || t > trace.len() {
        return Err(MetricsError::IterationOutOfRange {
            wanted: t,
            len: trace.len(),
        });
    }
    Ok(historic_bottleneck_series(trace)?[t - 1])
}

/// Saving ratio of `candidate` against `baseline` at 1-based iteration
/// `t`: (E_base - E_cand) / E_base over the historic bottlenecks.
pub fn saving_ratio(
    baseline: &ExperimentTrace,
    candidate: &ExperimentTrace,
    t: usize,
) -> Result<f64, MetricsError> {
    let e_base = historic_bottleneck(baseline, t)?;
    let e_cand = historic_bottleneck(candidate, t)?;
    if e_base == 0.0 {
        return Err(MetricsError::ZeroBaseline(t));
    }
    Ok((e_base - e_cand) / e_base)
}

/// Trailing moving average: entry i is the mean of the last
/// min(window, i + 1) values.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(series.len());
    let mut running = 0.0;
    for i in 0..series.len() {
        running += series[i];
        if i >= window {
            running -= series[i - window];
        }
        out.push(running / window.min(i + 1) as f64);
    }
    out
}

/// Iterations until the historically hungriest station empties a full
/// battery, extrapolated from the trailing mean per-iteration increment
/// of the historic bottleneck. `None` means the increment is zero and
/// the estimate is unbounded.
pub fn estimate_lifetime_iterations(
    trace: &ExperimentTrace,
    deployment: &Deployment,
) -> Result<Option<f64>, MetricsError> {
    let series = historic_bottleneck_series(trace)?;
    let t = series.len();
    let window = LIFETIME_WINDOW.min(t);
    let start_value = if t > window { series[t - window - 1] } else { 0.0 };
    let increment = (series[t - 1] - start_value) / window as f64;
    if increment <= 0.0 {
        return Ok(None);
    }
    Ok(Some(deployment.battery_energy_j() / increment))
}

/// Paired per-iteration series for a baseline/candidate comparison.
#[derive(Clone, Debug)]
pub struct ComparisonSeries {
    pub e_b_baseline_j: Vec<f64>,
    pub e_b_candidate_j: Vec<f64>,
    pub historic_baseline_j: Vec<f64>,
    pub historic_candidate_j: Vec<f64>,
    pub rho: Vec<f64>,
    /// Moving average of the candidate bottleneck energy.
    pub e_b_candidate_ma_j: Vec<f64>,
}

/// Builds the full comparison between two traces of equal length.
pub fn compare(
    baseline: &ExperimentTrace,
    candidate: &ExperimentTrace,
    window: usize,
) -> Result<ComparisonSeries, MetricsError> {
    if baseline.len() != candidate.len() {
        return Err(MetricsError::LengthMismatch(baseline.len(), candidate.len()));
    }
    let historic_baseline_j = historic_bottleneck_series(baseline)?;
    let historic_candidate_j = historic_bottleneck_series(candidate)?;
    let rho = historic_baseline_j
        .iter()
        .zip(&historic_candidate_j)
        .enumerate()
        .map(|(i, (&b, &c))| {
            if b == 0.0 {
                Err(MetricsError::ZeroBaseline(i + 1))
            } else {
                Ok((b - c) / b)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let e_b_baseline_j: Vec<f64> = baseline.records.iter().map(|r| r.e_b_j).collect();
    let e_b_candidate_j: Vec<f64> = candidate.records.iter().map(|r| r.e_b_j).collect();
    let e_b_candidate_ma_j = moving_average(&e_b_candidate_j, window);
    Ok(ComparisonSeries {
        e_b_baseline_j,
        e_b_candidate_j,
        historic_baseline_j,
        historic_candidate_j,
        rho,
        e_b_candidate_ma_j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{ActionKind, IterationRecord, Policy};
    use crate::model::{NodeId, RoutingVector};
    use crate::presets;

    /// Trace stub with explicit per-station energies per iteration.
    fn trace_of(rows: &[Vec<f64>]) -> ExperimentTrace {
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, energies)| {
                let (idx, &max) = energies
                    .iter()
                    .enumerate()
                    .reduce(|a, b| if b.1 > a.1 { b } else { a })
                    .unwrap();
                IterationRecord {
                    t: i as u32 + 1,
                    kind: ActionKind::Fixed,
                    routing: RoutingVector::star(energies.len()),
                    epsilon: 0.0,
                    e_b_j: max,
                    bottleneck_station: NodeId(idx as u16 + 1),
                    per_station_mean_energy_j: energies.clone(),
                    failures: 0,
                    cycle_reports: None,
                }
            })
            .collect();
        ExperimentTrace {
            policy: Policy::SingleHop,
            seed: 0,
            records,
        }
    }

    #[test]
    fn first_iteration_equals_cycle_bottleneck() {
        let trace = trace_of(&[vec![3.0, 1.0]]);
        assert_eq!(historic_bottleneck(&trace, 1).unwrap(), 3.0);
    }

    #[test]
    fn max_of_sums_differs_from_sum_of_maxes() {
        // Station A eats (3, 1), station B eats (1, 3): the historic
        // bottleneck is 4 while the summed per-iteration maxima give 6.
        let trace = trace_of(&[vec![3.0, 1.0], vec![1.0, 3.0]]);
        assert_eq!(historic_bottleneck(&trace, 2).unwrap(), 4.0);
        let summed: f64 = trace.records.iter().map(|r| r.e_b_j).sum();
        assert_eq!(summed, 6.0);
    }

    #[test]
    fn deterministic_baseline_grows_linearly() {
        let d = presets::line_deployment(&[10.0, 20.0, 40.0]);
        let mut opts =
            crate::learner::RunOptions::new(Policy::SingleHop, 20, 1, 5);
        opts.sim.association_cost = false;
        let mut dep = d.clone();
        dep.channel.per_steepness_per_db = 1e9;
        let trace = crate::learner::run_experiment(&dep, &opts).unwrap();
        let series = historic_bottleneck_series(&trace).unwrap();
        let e1 = series[0];
        for (i, &v) in series.iter().enumerate() {
            let expected = e1 * (i + 1) as f64;
            assert!(
                (v - expected).abs() < 1e-12 * expected,
                "iteration {}: {} vs {}",
                i + 1,
                v,
                expected
            );
        }
    }

    #[test]
    fn out_of_range_requests_fail() {
        let trace = trace_of(&[vec![1.0]]);
        assert!(matches!(
            historic_bottleneck(&trace, 2),
            Err(MetricsError::IterationOutOfRange { .. })
        ));
        assert!(matches!(
            historic_bottleneck(&trace, 0),
            Err(MetricsError::IterationOutOfRange { .. })
        ));
    }

    #[test]
    fn identical_traces_save_nothing() {
        let trace = trace_of(&[vec![2.0, 1.0], vec![2.0, 1.0]]);
        assert_eq!(saving_ratio(&trace, &trace, 2).unwrap(), 0.0);
    }

    #[test]
    fn headline_saving_shape() {
        let sh = trace_of(&[vec![1.0]]);
        let emh = trace_of(&[vec![0.93]]);
        let rho = saving_ratio(&sh, &emh, 1).unwrap();
        assert!((rho - 0.07).abs() < 1e-12);
    }

    #[test]
    fn candidate_overhead_gives_negative_ratio() {
        let sh = trace_of(&[vec![1.0], vec![1.0]]);
        let emh = trace_of(&[vec![1.5], vec![1.2]]);
        assert!(saving_ratio(&sh, &emh, 1).unwrap() < 0.0);
    }

    #[test]
    fn moving_average_of_constant_is_constant() {
        let got = moving_average(&[2.5; 40], 15);
        assert!(got.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn window_one_is_identity() {
        let series = [1.0, 5.0, 2.0, 9.0];
        assert_eq!(moving_average(&series, 1), series.to_vec());
    }

    #[test]
    fn fifteen_point_window_mean() {
        let series: Vec<f64> = (1..=15).map(|v| v as f64).collect();
        let got = moving_average(&series, 15);
        assert_eq!(*got.last().unwrap(), 8.0);
    }

    #[test]
    fn lifetime_from_unit_bottleneck() {
        // 800 mAh at 3.3 V is 9504 J; burning 1 J per iteration lasts
        // 9504 iterations.
        let d = presets::line_deployment(&[10.0]);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![1.0]).collect();
        let trace = trace_of(&rows);
        let got = estimate_lifetime_iterations(&trace, &d).unwrap().unwrap();
        assert!((got - 9504.0).abs() < 1e-9);

        let mut doubled = d.clone();
        doubled.battery_capacity_mah *= 2.0;
        let twice = estimate_lifetime_iterations(&trace, &doubled).unwrap().unwrap();
        assert!((twice - 2.0 * got).abs() < 1e-9);
    }

    #[test]
    fn zero_increment_is_unbounded() {
        // Constant historic bottleneck after iteration 1 happens when
        // later iterations contribute nothing.
        let mut rows = vec![vec![1.0]];
        rows.extend((0..40).map(|_| vec![0.0]));
        let trace = trace_of(&rows);
        let d = presets::line_deployment(&[10.0]);
        assert_eq!(estimate_lifetime_iterations(&trace, &d).unwrap(), None);
    }

    #[test]
    fn comparison_series_is_self_consistent() {
        let sh = trace_of(&[vec![2.0, 1.0], vec![2.0, 1.0], vec![2.0, 1.0]]);
        let emh = trace_of(&[vec![2.5, 1.0], vec![1.0, 0.5], vec![0.8, 0.4]]);
        let cmp = compare(&sh, &emh, 15).unwrap();
        for t in 1..=3 {
            let direct = saving_ratio(&sh, &emh, t).unwrap();
            assert_eq!(cmp.rho[t - 1], direct);
            assert_eq!(
                cmp.historic_baseline_j[t - 1],
                historic_bottleneck(&sh, t).unwrap()
            );
        }
        // Historic series never decreases.
        for w in cmp.historic_candidate_j.windows(2) {
            assert!(w[1] >= w[0]);
        }
        // Early overhead shows up as a negative ratio.
        assert!(cmp.rho[0] < 0.0);
        assert!(cmp.rho[2] > 0.0);
    }

    #[test]
    fn sum_of_maxes_bounds_max_of_sums() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = crate::seeds::SimRng::seed_from_u64(33);
        for _ in 0..50 {
            let stations = rng.gen_range(1..6);
            let iters = rng.gen_range(1..30);
            let rows: Vec<Vec<f64>> = (0..iters)
                .map(|_| (0..stations).map(|_| rng.gen_range(0.0..5.0)).collect())
                .collect();
            let trace = trace_of(&rows);
            let historic = historic_bottleneck(&trace, iters).unwrap();
            let summed: f64 = trace.records.iter().map(|r| r.e_b_j).sum();
            assert!(historic <= summed + 1e-12);
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let a = trace_of(&[vec![1.0]]);
        let b = trace_of(&[vec![1.0], vec![1.0]]);
        assert!(matches!(
            compare(&a, &b, 15),
            Err(MetricsError::LengthMismatch(1, 2))
        ));
    }
}
