use std::fmt::Write as _;
use std::path::Path;

use super::metrics::MetricsReport;
use crate::error::{config_err, Result};

/// Rendered comparison: a text table plus named plot-data files.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub table: String,
    pub warnings: Vec<String>,
    /// `(file name, contents)` pairs of whitespace-separated columns.
    pub files: Vec<(String, String)>,
}

impl Comparison {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.txt"), &self.table)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

pub const TABLE_COLUMNS: [&str; 8] = [
    "Algorithm",
    "Throughput (Mbps)",
    "Drop Rate (%)",
    "E2E Delay (ms)",
    "Queuing Delay (ms)",
    "Queuing CVaR (ms)",
    "Violation Rate (%)",
    "Violation Magnitude (ms)",
];

fn row(r: &MetricsReport) -> Vec<String> {
    vec![
        r.label.clone(),
        format!("{:.3}", r.throughput / 1e6),
        format!("{:.2}", r.drop_rate * 100.0),
        format!("{:.2} ± {:.2}", r.e2e_mean * 1e3, r.e2e_std * 1e3),
        format!("{:.2} ± {:.2}", r.queuing_mean * 1e3, r.queuing_std * 1e3),
        format!("{:.2}", r.queuing_cvar * 1e3),
        format!("{:.2}", r.violation_rate * 100.0),
        format!("{:.2} ± {:.2}", r.violation_magnitude_mean * 1e3, r.violation_magnitude_std * 1e3),
    ]
}

fn deltas(r: &MetricsReport, base: &MetricsReport) -> Vec<f64> {
    vec![
        (r.throughput - base.throughput) / 1e6,
        (r.drop_rate - base.drop_rate) * 100.0,
        (r.e2e_mean - base.e2e_mean) * 1e3,
        (r.queuing_mean - base.queuing_mean) * 1e3,
        (r.queuing_cvar - base.queuing_cvar) * 1e3,
        (r.violation_rate - base.violation_rate) * 100.0,
        (r.violation_magnitude_mean - base.violation_magnitude_mean) * 1e3,
    ]
}

fn render(rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> =
        (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        let _ = writeln!(out, "| {} |", cells.join(" | "));
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
        }
    }
    out
}

fn provenance(reports: &[MetricsReport]) -> String {
    reports.iter().map(|r| format!("# {} scenario {} seed {}\n", r.label, r.scenario_hash, r.seed)).collect()
}

fn curve(reports: &[MetricsReport], f: impl Fn(&super::IntervalMetrics) -> f64) -> String {
    let mut out = provenance(reports);
    let labels: Vec<&str> = reports.iter().map(|r| r.label.as_str()).collect();
    let _ = writeln!(out, "# time {}", labels.join(" "));
    let longest = reports.iter().max_by_key(|r| r.history.len()).expect("non-empty");
    for (i, point) in longest.history.iter().enumerate() {
        let vals: Vec<String> =
            reports.iter().map(|r| r.history.get(i).map_or("nan".into(), |h| format!("{}", f(h)))).collect();
        let _ = writeln!(out, "{} {}", point.time, vals.join(" "));
    }
    out
}

fn histogram(reports: &[MetricsReport], pick: impl Fn(&MetricsReport) -> &super::Histogram) -> String {
    let mut out = provenance(reports);
    let labels: Vec<&str> = reports.iter().map(|r| r.label.as_str()).collect();
    let _ = writeln!(out, "# bin_start_ms {}", labels.join(" "));
    let bins = reports.iter().map(|r| pick(r).counts.len()).max().unwrap_or(0);
    let width = pick(&reports[0]).bin_width;
    for b in 0..bins {
        let vals: Vec<String> =
            reports.iter().map(|r| pick(r).counts.get(b).map_or("0".into(), |c| c.to_string())).collect();
        let _ = writeln!(out, "{} {}", b as f64 * width * 1e3, vals.join(" "));
    }
    out
}

/// Aligns the reports in one table (deltas relative to the first) and
/// derives plot data. Reports from different scenarios only produce a warning.
pub fn compare(reports: &[MetricsReport]) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(config_err("compare needs at least two reports"));
    }
    let base = &reports[0];
    let warnings: Vec<String> = reports[1..]
        .iter()
        .filter(|r| r.scenario_hash != base.scenario_hash)
        .map(|r| format!("warning: {} ran scenario {} but {} ran {}", r.label, r.scenario_hash, base.label, base.scenario_hash))
        .collect();

    let mut rows = vec![TABLE_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    rows.extend(reports.iter().map(row));
    let mut table = provenance(reports);
    table.push_str(&render(&rows));
    table.push('\n');
    let mut drows = vec![TABLE_COLUMNS.iter().map(|s| format!("Δ {s}")).collect::<Vec<_>>()];
    drows[0][0] = format!("vs {}", base.label);
    for r in reports {
        let mut cells = vec![r.label.clone()];
        cells.extend(deltas(r, base).into_iter().map(|d| format!("{d:+.3}")));
        drows.push(cells);
    }
    table.push_str(&render(&drows));
    for w in &warnings {
        table.push_str(w);
        table.push('\n');
    }

    let mut components = provenance(reports);
    components.push_str("# label propagation_ms transmission_ms queuing_ms e2e_ms\n");
    for r in reports {
        let _ = writeln!(
            components,
            "{} {} {} {} {}",
            r.label,
            r.propagation_mean * 1e3,
            r.transmission_mean * 1e3,
            r.queuing_mean * 1e3,
            r.e2e_mean * 1e3
        );
    }
    let files = vec![
        ("drop_rate.dat".to_string(), curve(reports, |h| h.drop_rate)),
        ("e2e_delay.dat".to_string(), curve(reports, |h| h.e2e_mean)),
        ("queuing_mean.dat".to_string(), curve(reports, |h| h.queuing_mean)),
        ("queuing_cvar.dat".to_string(), curve(reports, |h| h.queuing_cvar)),
        ("e2e_histogram.dat".to_string(), histogram(reports, |r| &r.e2e_histogram)),
        ("queuing_histogram.dat".to_string(), histogram(reports, |r| &r.queuing_histogram)),
        ("delay_components.dat".to_string(), components),
    ];
    Ok(Comparison { table, warnings, files })
}
