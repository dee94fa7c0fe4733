//! CSV renderings of traces and comparisons, plus atomic file output.
//!
//! Energies print with nine significant digits; other floats use the
//! shortest round-trip form so re-reading a file recovers the exact
//! value.

use std::fs;
use std::io;
use std::path::Path;

use crate::learner::ExperimentTrace;
use crate::metrics::ComparisonSeries;

/// Joules with nine significant digits.
pub fn format_energy(j: f64) -> String {
    format!("{j:.8e}")
}

/// Header plus one row per iteration of a single run.
pub fn trace_csv(trace: &ExperimentTrace) -> String {
    let mut out = String::from("iteration,action_kind,routing,eps,e_b_J,bottleneck_station,failures\n");
    for rec in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            rec.t,
            rec.kind.as_str(),
            rec.routing.to_semicolon_list(),
            rec.epsilon,
            format_energy(rec.e_b_j),
            rec.bottleneck_station,
            rec.failures,
        ));
    }
    out
}

/// Header plus one row per iteration pairing the single-hop baseline with
/// the learner run.
pub fn comparison_csv(cmp: &ComparisonSeries) -> String {
    let mut out = String::from("iteration,e_b_sh,e_b_emh,E_sh,E_emh,rho,e_b_emh_ma15\n");
    for i in 0..cmp.rho.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            i + 1,
            format_energy(cmp.e_b_baseline_j[i]),
            format_energy(cmp.e_b_candidate_j[i]),
            format_energy(cmp.historic_baseline_j[i]),
            format_energy(cmp.historic_candidate_j[i]),
            cmp.rho[i],
            format_energy(cmp.e_b_candidate_ma_j[i]),
        ));
    }
    out
}

/// Per-cycle state-time dump for runs that kept their cycle reports.
/// Rows cover every (iteration, cycle, station) triple; `energy_J` is the
/// station's full drain for the cycle including any association charge.
pub fn cycles_csv(trace: &ExperimentTrace) -> String {
    let mut out = String::from(
        "iteration,cycle,station,t_CPU,t_LPM,t_RX,t_TX,t_SL,tx_power_dbm,energy_J\n",
    );
    for rec in &trace.records {
        let Some(reports) = &rec.cycle_reports else { continue };
        for (k, report) in reports.iter().enumerate() {
            for (idx, sc) in report.stations.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    rec.t,
                    k + 1,
                    idx + 1,
                    sc.times.t_cpu_s,
                    sc.times.t_lpm_s,
                    sc.times.t_rx_s,
                    sc.times.t_tx_s,
                    sc.times.t_sl_s,
                    sc.tx_power_dbm,
                    format_energy(sc.total_energy_j()),
                ));
            }
        }
    }
    out
}

/// Gnuplot helper reproducing the bottleneck-energy and saving-ratio
/// charts from a comparison CSV.
pub fn plot_script(comparison_csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'iteration'\n\
         set terminal pngcairo size 900,600\n\
         set output 'bottleneck_energy.png'\n\
         set ylabel 'e_b [J]'\n\
         plot '{name}' using 1:2 with lines title 'SH', \\\n\
         \x20    '{name}' using 1:3 with points pt 7 ps 0.4 title 'EMH', \\\n\
         \x20    '{name}' using 1:7 with lines lw 2 title 'EMH ma15'\n\
         set output 'saving_ratio.png'\n\
         set ylabel 'rho'\n\
         plot '{name}' using 1:6 with lines lw 2 title 'saving ratio', 0 with lines dt 2 notitle\n",
        name = comparison_csv_name
    )
}

/// Writes via a sibling temp file plus rename so an interrupted run never
/// leaves a truncated artifact behind.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}
