//! Held-out validation: DPV quartile groups and their incremental metrics.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::data::{Arm, ExperimentDataset};
use crate::search::{search_all, SearchConfig, SearchError, SearchReport};
use crate::stats::{diff_variance, is_eligible, ArmAccumulator, EligibilityConfig};
use crate::valuation::{fit_model, global_comparison, score_dataset, EligibleSet, GlobalComparison, ValuationError};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("need at least 4 scored instances, got {0}")]
    TooFewInstances(usize),
    #[error("unknown instance id `{0}`")]
    UnknownId(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Valuation(#[from] ValuationError),
}

pub const GROUP_LABELS: [&str; 4] = ["<Q1", "Q1-Q2", "Q2-Q3", ">Q3"];

/// `sorted[⌊p·n⌋]` for `p` in {1/4, 1/2, 3/4}.
pub fn quartiles(sorted: &[f64]) -> [f64; 3] {
    let n = sorted.len();
    [n / 4, n / 2, 3 * n / 4].map(|i| sorted[i.min(n - 1)])
}

/// Splits scored ids into `[min, Q1)`, `[Q1, Q2)`, `[Q2, Q3)`, `[Q3, max]`.
/// A score equal to a quartile goes to the upper group. Ids keep their input
/// order within each group.
pub fn quartile_groups(scores: &[(String, f64)]) -> Result<[Vec<String>; 4], ValidationError> {
    if scores.len() < 4 {
        return Err(ValidationError::TooFewInstances(scores.len()));
    }
    let mut sorted: Vec<f64> = scores.iter().map(|s| s.1).collect();
    sorted.sort_by(f64::total_cmp);
    let q = quartiles(&sorted);
    let mut groups: [Vec<String>; 4] = Default::default();
    for (id, s) in scores {
        let g = q.iter().filter(|&&b| *s >= b).count();
        groups[g].push(id.clone());
    }
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementalMetric {
    /// Test mean minus control mean; `None` when an arm is empty.
    pub diff: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
    pub n_test: usize,
    pub n_control: usize,
    pub significant: bool,
}

pub fn incremental_metric<S: AsRef<str>>(
    group: &[S],
    data: &ExperimentDataset,
    cfg: &EligibilityConfig,
) -> Result<IncrementalMetric, ValidationError> {
    let position: HashMap<&str, usize> = data
        .instances()
        .iter()
        .enumerate()
        .map(|(i, inst)| (inst.id.as_str(), i))
        .collect();
    let mut test = ArmAccumulator::default();
    let mut control = ArmAccumulator::default();
    for id in group {
        let id = id.as_ref();
        let &i = position.get(id).ok_or_else(|| ValidationError::UnknownId(id.to_string()))?;
        let inst = &data.instances()[i];
        match inst.arm {
            Arm::Test => test.push(inst.metric),
            Arm::Control => control.push(inst.metric),
        }
    }
    let (t, c) = (test.finish(), control.finish());
    let defined = t.n > 0 && c.n > 0;
    Ok(IncrementalMetric {
        diff: defined.then_some(t.mean - c.mean),
        sd: defined.then(|| diff_variance(&t, &c).sqrt()),
        n: t.n + c.n,
        n_test: t.n,
        n_control: c.n,
        significant: defined && is_eligible(&t, &c, cfg),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub size: usize,
    pub mean_dpv: Option<f64>,
    #[serde(flatten)]
    pub metric: IncrementalMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuartileReport {
    pub level: f64,
    pub quartiles: [f64; 3],
    pub groups: Vec<GroupSummary>,
    pub representations: usize,
    pub eligible_subpops: usize,
    /// Global comparisons on each split, reported beside the groups.
    pub global_train: GlobalComparison,
    pub global_test: GlobalComparison,
}

impl QuartileReport {
    /// The first and last groups with at least one instance.
    pub fn bottom_and_top(&self) -> Option<(&GroupSummary, &GroupSummary)> {
        let mut nonempty = self.groups.iter().filter(|g| g.size > 0);
        let bottom = nonempty.next()?;
        Some((bottom, nonempty.next_back().unwrap_or(bottom)))
    }

    /// Plain-text table: metric, DPV group, diff, sd, group size.
    pub fn table(&self, metric: &str) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:<10} {:>10} {:>10} {:>8} {:>12}",
            "metric", "DPV group", "diff", "sd", "size", "significant"
        );
        for g in &self.groups {
            let _ = writeln!(
                out,
                "{:<10} {:<10} {:>10} {:>10} {:>8} {:>12}",
                metric,
                g.label,
                fmt(g.metric.diff),
                fmt(g.metric.sd),
                g.size,
                if g.metric.significant { "yes" } else { "no" }
            );
        }
        let _ = writeln!(
            out,
            "{:<10} {:<10} {:>10.4} {:>10.4} {:>8} {:>12}",
            metric,
            "global",
            self.global_test.effect,
            self.global_test.volatility,
            self.global_test.test.n + self.global_test.control.n,
            if self.global_test.eligible { "yes" } else { "no" }
        );
        out
    }
}

#[derive(Debug, Clone)]
pub struct ValidationRun {
    pub search: SearchReport,
    pub model: EligibleSet,
    pub scores: Vec<(String, f64)>,
    pub report: QuartileReport,
}

/// Discovers on `train`, scores `test` from contexts alone, and only then
/// reads test metrics to fill in the quartile groups.
pub fn run_validation(
    train: &ExperimentDataset,
    test: &ExperimentDataset,
    search: &SearchConfig,
    eligibility: &EligibilityConfig,
    quantization: f64,
) -> Result<ValidationRun, ValidationError> {
    if train.num_features() != test.num_features() {
        return Err(ValuationError::DimensionMismatch {
            expected: train.num_features(),
            got: test.num_features(),
        }
        .into());
    }
    let report = search_all(train, search)?;
    let model = fit_model(train, report.accepted.clone(), eligibility, quantization)?;
    let scores = score_dataset(test, &model)?;
    let quartile_report = quartile_report(&scores, test, &model, eligibility, train)?;
    Ok(ValidationRun {
        search: report,
        model,
        scores,
        report: quartile_report,
    })
}

/// Builds the report for already-scored test instances.
pub fn quartile_report(
    scores: &[(String, f64)],
    test: &ExperimentDataset,
    model: &EligibleSet,
    eligibility: &EligibilityConfig,
    train: &ExperimentDataset,
) -> Result<QuartileReport, ValidationError> {
    let groups = quartile_groups(scores)?;
    let mut sorted: Vec<f64> = scores.iter().map(|s| s.1).collect();
    sorted.sort_by(f64::total_cmp);
    let score_of: HashMap<&str, f64> = scores.iter().map(|(id, s)| (id.as_str(), *s)).collect();
    let mut summaries = Vec::with_capacity(4);
    for (label, ids) in GROUP_LABELS.iter().zip(&groups) {
        let mean_dpv =
            (!ids.is_empty()).then(|| ids.iter().map(|id| score_of[id.as_str()]).sum::<f64>() / ids.len() as f64);
        summaries.push(GroupSummary {
            label: label.to_string(),
            size: ids.len(),
            mean_dpv,
            metric: incremental_metric(ids, test, eligibility)?,
        });
    }
    Ok(QuartileReport {
        level: eligibility.level,
        quartiles: quartiles(&sorted),
        groups: summaries,
        representations: model.representations.len(),
        eligible_subpops: model.subpops.len(),
        global_train: global_comparison(train, eligibility),
        global_test: global_comparison(test, eligibility),
    })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` if either side is constant or the
/// lengths differ.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}
