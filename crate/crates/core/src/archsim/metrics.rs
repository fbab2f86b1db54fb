use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub config: String,
    pub latency_s: f64,
    pub fps: f64,
    pub total_power_w: f64,
    pub fps_per_watt: f64,
    /// Joules per component.
    pub energy_breakdown: BTreeMap<String, f64>,
    pub event_count: u64,
    pub passes: u64,
    pub reduction_ops: u64,
    pub reduction_events: u64,
    pub psum_writes: u64,
    pub readouts: u64,
    pub stalls: u64,
    pub stall_time_s: f64,
    /// Overlapping occupancies seen by the engine as events began.
    pub overlaps: u64,
}

impl Metrics {
    pub fn from_energy(config: &str, latency_s: f64, energy_breakdown: BTreeMap<String, f64>, event_count: u64) -> Self {
        let energy: f64 = energy_breakdown.values().sum();
        let fps = 1.0 / latency_s;
        let total_power_w = energy / latency_s;
        Self {
            config: config.to_string(),
            latency_s,
            fps,
            total_power_w,
            fps_per_watt: fps / total_power_w,
            energy_breakdown,
            event_count,
            passes: 0,
            reduction_ops: 0,
            reduction_events: 0,
            psum_writes: 0,
            readouts: 0,
            stalls: 0,
            stall_time_s: 0.0,
            overlaps: 0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_counts(
        self,
        passes: u64,
        reduction_ops: u64,
        reduction_events: u64,
        psum_writes: u64,
        readouts: u64,
        stalls: u64,
        stall_time_s: f64,
        overlaps: u64,
    ) -> Self {
        Self { passes, reduction_ops, reduction_events, psum_writes, readouts, stalls, stall_time_s, overlaps, ..self }
    }

    pub fn total_energy_j(&self) -> f64 {
        self.energy_breakdown.values().sum()
    }
}

pub const CSV_HEADER: &str = "config,workload,latency_s,fps,power_w,fps_per_w";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub config: String,
    pub workload: String,
    pub latency_s: f64,
    pub fps: f64,
    pub power_w: f64,
    pub fps_per_w: f64,
}

impl MetricsRow {
    pub fn new(workload: &str, m: &Metrics) -> Self {
        Self {
            config: m.config.clone(),
            workload: workload.to_string(),
            latency_s: m.latency_s,
            fps: m.fps,
            power_w: m.total_power_w,
            fps_per_w: m.fps_per_watt,
        }
    }
}

/// Shortest round-tripping float text keeps the CSV lossless.
pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{:e},{:e},{:e},{:e}", r.config, r.workload, r.latency_s, r.fps, r.power_w, r.fps_per_w);
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Parse { line: 1, msg: format!("expected header `{CSV_HEADER}`") });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let err = |msg: &str| Error::Parse { line: i + 2, msg: msg.to_string() };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(err("expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("bad number `{s}`")));
            Ok(MetricsRow {
                config: f[0].to_string(),
                workload: f[1].to_string(),
                latency_s: num(f[2])?,
                fps: num(f[3])?,
                power_w: num(f[4])?,
                fps_per_w: num(f[5])?,
            })
        })
        .collect()
}

pub fn geometric_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioRow {
    pub workload: String,
    pub fps_ratio: f64,
    pub fps_per_w_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineComparison {
    pub baseline: String,
    pub per_workload: Vec<RatioRow>,
    pub gmean_fps_ratio: f64,
    pub gmean_fps_per_w_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub subject: String,
    pub baselines: Vec<BaselineComparison>,
}

/// Ratios of `subject` over every other config, per workload and as
/// geometric means. All configs must cover the same workloads.
pub fn compare(subject: &str, by_config: &BTreeMap<String, BTreeMap<String, Metrics>>) -> Result<ComparisonReport> {
    let subj = by_config.get(subject).ok_or_else(|| Error::Usage(format!("no metrics for `{subject}`")))?;
    if by_config.len() < 2 {
        return Err(Error::Usage("comparison needs at least two configs".into()));
    }
    let workloads: BTreeSet<&String> = subj.keys().collect();
    let mut baselines = Vec::new();
    for (name, metrics) in by_config.iter().filter(|(n, _)| n.as_str() != subject) {
        if metrics.keys().collect::<BTreeSet<_>>() != workloads {
            return Err(Error::Usage(format!("`{name}` and `{subject}` cover different workloads")));
        }
        let per_workload: Vec<RatioRow> = workloads
            .iter()
            .map(|w| RatioRow {
                workload: (*w).clone(),
                fps_ratio: subj[*w].fps / metrics[*w].fps,
                fps_per_w_ratio: subj[*w].fps_per_watt / metrics[*w].fps_per_watt,
            })
            .collect();
        let fps: Vec<f64> = per_workload.iter().map(|r| r.fps_ratio).collect();
        let eff: Vec<f64> = per_workload.iter().map(|r| r.fps_per_w_ratio).collect();
        baselines.push(BaselineComparison {
            baseline: name.clone(),
            gmean_fps_ratio: geometric_mean(&fps),
            gmean_fps_per_w_ratio: geometric_mean(&eff),
            per_workload,
        });
    }
    Ok(ComparisonReport { subject: subject.to_string(), baselines })
}

pub const COMPARISON_CSV_HEADER: &str = "subject,baseline,workload,fps_ratio,fps_per_w_ratio";

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARISON_CSV_HEADER);
        out.push('\n');
        for b in &self.baselines {
            for r in &b.per_workload {
                let _ = writeln!(out, "{},{},{},{:e},{:e}", self.subject, b.baseline, r.workload, r.fps_ratio, r.fps_per_w_ratio);
            }
            let _ = writeln!(out, "{},{},gmean,{:e},{:e}", self.subject, b.baseline, b.gmean_fps_ratio, b.gmean_fps_per_w_ratio);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for b in &self.baselines {
            let _ = writeln!(out, "{} vs {}", self.subject, b.baseline);
            let _ = writeln!(out, "  {:<16} {:>12} {:>12}", "workload", "FPS x", "FPS/W x");
            for r in &b.per_workload {
                let _ = writeln!(out, "  {:<16} {:>12.3} {:>12.3}", r.workload, r.fps_ratio, r.fps_per_w_ratio);
            }
            let _ = writeln!(out, "  {:<16} {:>12.3} {:>12.3}", "gmean", b.gmean_fps_ratio, b.gmean_fps_per_w_ratio);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(config: &str, latency_s: f64, energy: f64) -> Metrics {
        Metrics::from_energy(config, latency_s, BTreeMap::from([("oxg".to_string(), energy)]), 1)
    }

    #[test]
    fn derived_fields() {
        let x = m("a", 0.5, 4.0);
        assert_eq!(x.fps, 2.0);
        assert_eq!(x.total_power_w, 8.0);
        assert_eq!(x.fps_per_watt, 0.25);
    }

    #[test]
    fn identical_metrics_give_unit_ratios() {
        let per = BTreeMap::from([("w1".to_string(), m("a", 1.0, 1.0)), ("w2".to_string(), m("a", 2.0, 3.0))]);
        let all = BTreeMap::from([("a".to_string(), per.clone()), ("b".to_string(), per)]);
        let r = compare("a", &all).unwrap();
        assert!(r.baselines[0].per_workload.iter().all(|x| x.fps_ratio == 1.0 && x.fps_per_w_ratio == 1.0));
        assert_eq!(r.baselines[0].gmean_fps_ratio, 1.0);
    }

    #[test]
    fn gmean_of_two_and_eight() {
        let subj = BTreeMap::from([("w1".to_string(), m("a", 0.5, 1.0)), ("w2".to_string(), m("a", 0.125, 1.0))]);
        let base = BTreeMap::from([("w1".to_string(), m("b", 1.0, 1.0)), ("w2".to_string(), m("b", 1.0, 1.0))]);
        let all = BTreeMap::from([("a".to_string(), subj), ("b".to_string(), base)]);
        let r = compare("a", &all).unwrap();
        assert!((r.baselines[0].gmean_fps_ratio - 4.0).abs() < 1e-12);
        assert!(r.to_text().contains("gmean"));
        assert_eq!(r.to_csv().lines().count(), 4);
    }

    #[test]
    fn mismatched_workloads_rejected() {
        let a = BTreeMap::from([("w1".to_string(), m("a", 1.0, 1.0))]);
        let b = BTreeMap::from([("w2".to_string(), m("b", 1.0, 1.0))]);
        let all = BTreeMap::from([("a".to_string(), a.clone()), ("b".to_string(), b)]);
        assert!(matches!(compare("a", &all), Err(Error::Usage(_))));
        assert!(compare("a", &BTreeMap::from([("a".to_string(), a)])).is_err());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let rows = vec![
            MetricsRow::new("ResNet18", &m("OXBNN_50", 1.234567890123e-5, 0.1)),
            MetricsRow::new("VGG-small", &m("LIGHTBULB", 3.0e-4, 0.7)),
        ];
        let text = to_csv(&rows);
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(parse_csv(&text).unwrap(), rows);
        assert!(parse_csv("bad\n").is_err());
    }
}
