//! Aggregation of run summaries into one row per instance group and strategy pair.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::iseo::{RunSummary, Sampler, Separator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub group: String,
    pub separator: Separator,
    pub sampler: Sampler,
    pub runs: usize,
    pub opt: usize,
    pub thres: usize,
    pub feas: usize,
    pub gap_pct: Option<f64>,
    pub error_pct: Option<f64>,
    pub calls: Option<f64>,
    pub iters: Option<f64>,
    pub time_s: Option<f64>,
    /// Averaged over runs that reached the threshold.
    pub calls_to_thres: Option<f64>,
    pub iters_to_thres: Option<f64>,
    pub time_to_thres: Option<f64>,
    /// Averaged over runs that ended with the true optimum.
    pub calls_to_opt: Option<f64>,
    pub iters_to_opt: Option<f64>,
    pub time_to_opt: Option<f64>,
}

fn mean<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    let (sum, count) = values.into_iter().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

impl ReportRow {
    fn from_runs(group: String, separator: Separator, sampler: Sampler, runs: &[&RunSummary]) -> Self {
        let thres: Vec<&&RunSummary> = runs.iter().filter(|r| r.thres).collect();
        let opt: Vec<&&RunSummary> = runs.iter().filter(|r| r.opt == Some(true)).collect();
        Self {
            group,
            separator,
            sampler,
            runs: runs.len(),
            opt: opt.len(),
            thres: thres.len(),
            feas: runs.iter().filter(|r| r.feas == Some(true)).count(),
            gap_pct: mean(runs.iter().filter_map(|r| r.gap_pct)),
            error_pct: mean(runs.iter().filter_map(|r| r.error_pct)),
            calls: mean(runs.iter().map(|r| r.calls as f64)),
            iters: mean(runs.iter().map(|r| r.iters as f64)),
            time_s: mean(runs.iter().filter_map(|r| r.time_s)),
            calls_to_thres: mean(thres.iter().filter_map(|r| r.calls_to_thres).map(|v| v as f64)),
            iters_to_thres: mean(thres.iter().filter_map(|r| r.iters_to_thres).map(|v| v as f64)),
            time_to_thres: mean(thres.iter().filter_map(|r| r.time_to_thres)),
            calls_to_opt: mean(opt.iter().filter_map(|r| r.calls_to_opt).map(|v| v as f64)),
            iters_to_opt: mean(opt.iter().filter_map(|r| r.iters_to_opt).map(|v| v as f64)),
            time_to_opt: mean(opt.iter().filter_map(|r| r.time_to_opt)),
        }
    }
}

/// One row per (group, separator, sampler), in sorted key order.
pub fn aggregate(summaries: &[RunSummary]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(String, Separator, Sampler), Vec<&RunSummary>> = BTreeMap::new();
    for s in summaries {
        groups.entry((s.group.clone(), s.separator, s.sampler)).or_default().push(s);
    }
    groups
        .into_iter()
        .map(|((group, sep, samp), runs)| ReportRow::from_runs(group, sep, samp, &runs))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Markdown,
}

const HEADER: [&str; 18] = [
    "group", "sep", "samp", "runs", "#Opt", "#Thres", "#Feas", "Gap%", "Error%", "Calls", "Iters", "Time",
    "CallsT", "ItersT", "TimeT", "CallsO", "ItersO", "TimeO",
];

fn cell(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(v) => format!("{v:.digits$}"),
        None => "-".into(),
    }
}

fn cells(r: &ReportRow) -> Vec<String> {
    let sep = match r.separator {
        Separator::Svm => "SVM",
        Separator::Sep => "SEP",
    };
    let samp = match r.sampler {
        Sampler::Sim => "SIM",
        Sampler::Cut => "CUT",
    };
    vec![
        r.group.clone(),
        sep.into(),
        samp.into(),
        r.runs.to_string(),
        format!("{}/{}", r.opt, r.runs),
        format!("{}/{}", r.thres, r.runs),
        format!("{}/{}", r.feas, r.runs),
        cell(r.gap_pct, 2),
        cell(r.error_pct, 2),
        cell(r.calls, 1),
        cell(r.iters, 1),
        cell(r.time_s, 2),
        cell(r.calls_to_thres, 1),
        cell(r.iters_to_thres, 1),
        cell(r.time_to_thres, 2),
        cell(r.calls_to_opt, 1),
        cell(r.iters_to_opt, 1),
        cell(r.time_to_opt, 2),
    ]
}

pub fn render(rows: &[ReportRow], format: Format) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(cells).collect();
    let mut out = String::new();
    match format {
        Format::Csv => {
            out += &HEADER.join(",");
            out.push('\n');
            for r in &body {
                out += &r.join(",");
                out.push('\n');
            }
        }
        Format::Markdown => {
            let _ = writeln!(out, "| {} |", HEADER.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(HEADER.len()));
            for r in &body {
                let _ = writeln!(out, "| {} |", r.join(" | "));
            }
        }
        Format::Text => {
            let widths: Vec<usize> = (0..HEADER.len())
                .map(|k| body.iter().map(|r| r[k].len()).chain([HEADER[k].len()]).max().unwrap_or(0))
                .collect();
            let line = |cols: Vec<&str>| {
                cols.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
            };
            out += &line(HEADER.to_vec());
            out.push('\n');
            for r in &body {
                out += &line(r.iter().map(String::as_str).collect());
                out.push('\n');
            }
        }
    }
    out
}
