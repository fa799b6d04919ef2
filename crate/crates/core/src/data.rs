//! Experiment logs: ingest, discretization and chronological splitting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    UnparsableRow { line: u64, reason: String },
    #[error("{0} arm has no instances")]
    EmptyArm(Arm),
    #[error("line {line}: metric is not finite")]
    NonFiniteMetric { line: u64 },
    #[error("line {line}: duplicate instance id `{id}`")]
    DuplicateId { line: u64, id: String },
    #[error("split leaves the {0} side empty")]
    EmptySplit(&'static str),
    #[error("train fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("invalid discretization for `{feature}`: {reason}")]
    InvalidRule { feature: String, reason: String },
    #[error("context has {got} features, dataset has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Test,
    Control,
}

impl Arm {
    /// Accepts `T`, `C`, `test`, `control` in any case.
    pub fn parse(s: &str) -> Option<Arm> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t" | "test" => Some(Arm::Test),
            "c" | "control" => Some(Arm::Control),
            _ => None,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Arm::Test => "T",
            Arm::Control => "C",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arm::Test => f.write_str("test"),
            Arm::Control => f.write_str("control"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    /// Epoch milliseconds.
    pub timestamp: i64,
    pub arm: Arm,
    pub metric: f64,
    pub context: Vec<f64>,
}

/// A randomized-experiment log, sorted by timestamp.
///
/// Construction goes through [`ExperimentDataset::new`], which enforces the
/// invariants: every context has the same length, metrics are finite, ids are
/// unique and both arms are populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDataset {
    feature_names: Vec<String>,
    instances: Vec<Instance>,
    feature_levels: Vec<Vec<f64>>,
}

impl ExperimentDataset {
    /// Builds a dataset, stably sorting instances by timestamp.
    pub fn new(feature_names: Vec<String>, mut instances: Vec<Instance>) -> Result<Self, DataError> {
        let f = feature_names.len();
        let mut seen = HashSet::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            let line = i as u64 + 1;
            if inst.context.len() != f {
                return Err(DataError::DimensionMismatch {
                    expected: f,
                    got: inst.context.len(),
                });
            }
            if !inst.metric.is_finite() {
                return Err(DataError::NonFiniteMetric { line });
            }
            if inst.context.iter().any(|v| !v.is_finite()) {
                return Err(DataError::UnparsableRow {
                    line,
                    reason: "non-finite feature value".into(),
                });
            }
            if !seen.insert(inst.id.as_str()) {
                return Err(DataError::DuplicateId {
                    line,
                    id: inst.id.clone(),
                });
            }
        }
        instances.sort_by_key(|inst| inst.timestamp);
        Self::from_sorted(feature_names, instances)
    }

    fn from_sorted(feature_names: Vec<String>, instances: Vec<Instance>) -> Result<Self, DataError> {
        for arm in [Arm::Test, Arm::Control] {
            if !instances.iter().any(|inst| inst.arm == arm) {
                return Err(DataError::EmptyArm(arm));
            }
        }
        let feature_levels = compute_levels(feature_names.len(), &instances);
        Ok(Self {
            feature_names,
            instances,
            feature_levels,
        })
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Sorted distinct values observed for each feature.
    pub fn feature_levels(&self) -> &[Vec<f64>] {
        &self.feature_levels
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn arm_indices(&self, arm: Arm) -> Vec<usize> {
        self.instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.arm == arm)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, arm: Arm) -> usize {
        self.instances.iter().filter(|inst| inst.arm == arm).count()
    }

    /// Returns a copy with every metric passed through `f`; contexts untouched.
    pub fn map_metrics(&self, f: impl Fn(f64) -> f64) -> Result<Self, DataError> {
        let instances = self
            .instances
            .iter()
            .map(|inst| Instance {
                metric: f(inst.metric),
                ..inst.clone()
            })
            .collect();
        Self::new(self.feature_names.clone(), instances)
    }
}

fn compute_levels(f: usize, instances: &[Instance]) -> Vec<Vec<f64>> {
    (0..f)
        .map(|j| {
            let mut vals: Vec<f64> = instances.iter().map(|inst| inst.context[j]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            vals
        })
        .collect()
}

/// Column-name mapping for CSV ingest. `features: None` means every column not
/// claimed by the other four, in header order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub id: String,
    pub timestamp: String,
    pub arm: String,
    pub metric: String,
    pub features: Option<Vec<String>>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            timestamp: "ts".into(),
            arm: "arm".into(),
            metric: "y".into(),
            features: None,
        }
    }
}

pub fn ingest_csv<R: Read>(reader: R, schema: &Schema) -> Result<ExperimentDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let id_col = find(&schema.id)?;
    let ts_col = find(&schema.timestamp)?;
    let arm_col = find(&schema.arm)?;
    let metric_col = find(&schema.metric)?;
    let (feature_names, feature_cols) = match &schema.features {
        Some(names) => {
            let cols = names.iter().map(|n| find(n)).collect::<Result<Vec<_>, _>>()?;
            (names.clone(), cols)
        }
        None => {
            let claimed = [id_col, ts_col, arm_col, metric_col];
            headers
                .iter()
                .enumerate()
                .filter(|(i, _)| !claimed.contains(i))
                .map(|(i, h)| (h.to_string(), i))
                .unzip()
        }
    };

    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| DataError::UnparsableRow { line, reason };
        let field = |col: usize| record.get(col).ok_or_else(|| bad(format!("missing field {col}")));

        let id = field(id_col)?.to_string();
        let timestamp = field(ts_col)?
            .parse::<i64>()
            .map_err(|e| bad(format!("timestamp: {e}")))?;
        let arm_raw = field(arm_col)?;
        let arm = Arm::parse(arm_raw).ok_or_else(|| bad(format!("unknown arm `{arm_raw}`")))?;
        let metric = field(metric_col)?
            .parse::<f64>()
            .map_err(|e| bad(format!("metric: {e}")))?;
        if !metric.is_finite() {
            return Err(DataError::NonFiniteMetric { line });
        }
        let mut context = Vec::with_capacity(feature_cols.len());
        for (&col, name) in feature_cols.iter().zip(&feature_names) {
            let raw = field(col)?;
            if raw.is_empty() {
                return Err(bad(format!("missing value for `{name}`")));
            }
            let v = raw.parse::<f64>().map_err(|e| bad(format!("{name}: {e}")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value for `{name}`")));
            }
            context.push(v);
        }
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId { line, id });
        }
        instances.push(Instance {
            id,
            timestamp,
            arm,
            metric,
            context,
        });
    }
    if instances.is_empty() {
        return Err(DataError::Empty);
    }
    ExperimentDataset::new(feature_names, instances)
}

/// Writes the dataset with the default column names (`id,ts,arm,y,<features>`).
pub fn write_csv<W: Write>(dataset: &ExperimentDataset, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "ts".into(), "arm".into(), "y".into()];
    header.extend(dataset.feature_names().iter().cloned());
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for inst in dataset.instances() {
        row.clear();
        row.push(inst.id.clone());
        row.push(inst.timestamp.to_string());
        row.push(inst.arm.code().to_string());
        row.push(inst.metric.to_string());
        row.extend(inst.context.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizationRule {
    Passthrough,
    EqualWidthBins(usize),
    QuantileBins(usize),
    MergeBelowCount(usize),
}

/// Per-feature rules keyed by feature name; unnamed features pass through.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub rules: BTreeMap<String, DiscretizationRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizeWarning {
    pub feature: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Discretized {
    pub dataset: ExperimentDataset,
    pub warnings: Vec<DiscretizeWarning>,
}

/// Maps every feature onto finitely many levels. Each bin is represented by
/// its lower edge.
pub fn discretize(
    dataset: &ExperimentDataset,
    config: &DiscretizationConfig,
) -> Result<Discretized, DataError> {
    if dataset.is_empty() {
        return Err(DataError::Empty);
    }
    for name in config.rules.keys() {
        if !dataset.feature_names().contains(name) {
            return Err(DataError::InvalidRule {
                feature: name.clone(),
                reason: "no such feature".into(),
            });
        }
    }
    let mut instances = dataset.instances().to_vec();
    let mut warnings = Vec::new();
    for (j, name) in dataset.feature_names().iter().enumerate() {
        let rule = config
            .rules
            .get(name)
            .copied()
            .unwrap_or(DiscretizationRule::Passthrough);
        let invalid = |reason: &str| DataError::InvalidRule {
            feature: name.clone(),
            reason: reason.into(),
        };
        let column: Vec<f64> = instances.iter().map(|inst| inst.context[j]).collect();
        let levels = &dataset.feature_levels()[j];
        let constant = levels.len() == 1;
        let mapped = match rule {
            DiscretizationRule::Passthrough => continue,
            DiscretizationRule::EqualWidthBins(k) | DiscretizationRule::QuantileBins(k) if k == 0 => {
                return Err(invalid("bin count must be at least 1"))
            }
            DiscretizationRule::MergeBelowCount(0) => return Err(invalid("min_count must be at least 1")),
            DiscretizationRule::EqualWidthBins(k) => {
                if constant && k > 1 {
                    warnings.push(degenerate(name, k));
                }
                equal_width(&column, levels, k)
            }
            DiscretizationRule::QuantileBins(k) => {
                if constant && k > 1 {
                    warnings.push(degenerate(name, k));
                }
                quantile_bins(&column, k)
            }
            DiscretizationRule::MergeBelowCount(min_count) => merge_below(&column, min_count),
        };
        for (inst, v) in instances.iter_mut().zip(mapped) {
            inst.context[j] = v;
        }
    }
    Ok(Discretized {
        dataset: ExperimentDataset::from_sorted(dataset.feature_names().to_vec(), instances)?,
        warnings,
    })
}

fn degenerate(name: &str, k: usize) -> DiscretizeWarning {
    DiscretizeWarning {
        feature: name.to_string(),
        message: format!("constant feature cannot be split into {k} bins; kept as a single level"),
    }
}

fn equal_width(column: &[f64], levels: &[f64], k: usize) -> Vec<f64> {
    let lo = levels[0];
    let hi = levels[levels.len() - 1];
    let width = (hi - lo) / k as f64;
    if width <= 0.0 {
        return vec![lo; column.len()];
    }
    column
        .iter()
        .map(|&x| {
            let b = (((x - lo) / width).floor() as usize).min(k - 1);
            lo + b as f64 * width
        })
        .collect()
}

fn quantile_bins(column: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (0..k).map(|b| sorted[b * n / k]).collect();
    edges.dedup();
    column
        .iter()
        .map(|&x| {
            let idx = edges.partition_point(|&e| e <= x);
            edges[idx.saturating_sub(1)]
        })
        .collect()
}

/// Walks distinct values upward, growing a bin until it holds `min_count`
/// instances. An underfull final bin is folded into its predecessor.
fn merge_below(column: &[f64], min_count: usize) -> Vec<f64> {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &x in column {
        counts.entry(order_key(x)).or_insert((x, 0)).1 += 1;
    }
    let mut bins: Vec<(f64, usize, Vec<u64>)> = Vec::new();
    let mut open: Option<(f64, usize, Vec<u64>)> = None;
    for (key, (value, count)) in counts {
        let bin = open.get_or_insert_with(|| (value, 0, Vec::new()));
        bin.1 += count;
        bin.2.push(key);
        if bin.1 >= min_count {
            bins.push(open.take().unwrap());
        }
    }
    if let Some(rest) = open {
        match bins.last_mut() {
            Some(last) => {
                last.1 += rest.1;
                last.2.extend(rest.2);
            }
            None => bins.push(rest),
        }
    }
    let mut repr = BTreeMap::new();
    for (lower, _, keys) in &bins {
        for key in keys {
            repr.insert(*key, *lower);
        }
    }
    column.iter().map(|x| repr[&order_key(*x)]).collect()
}

// Monotone bit pattern so floats can key an ordered map.
fn order_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Train holds the first `ceil(train_fraction * n)` instances in timestamp
/// order, test the rest.
pub fn chronological_split(
    dataset: &ExperimentDataset,
    train_fraction: f64,
) -> Result<(ExperimentDataset, ExperimentDataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidFraction(train_fraction));
    }
    let n = dataset.len();
    let cut = train_size(n, train_fraction);
    if cut == 0 {
        return Err(DataError::EmptySplit("train"));
    }
    if cut >= n {
        return Err(DataError::EmptySplit("test"));
    }
    let names = dataset.feature_names().to_vec();
    let (head, tail) = dataset.instances().split_at(cut);
    Ok((
        ExperimentDataset::from_sorted(names.clone(), head.to_vec())?,
        ExperimentDataset::from_sorted(names, tail.to_vec())?,
    ))
}

fn train_size(n: usize, fraction: f64) -> usize {
    let raw = fraction * n as f64;
    // 0.7 * 10 evaluates to 7.000000000000001; treat that as an exact 7.
    let nearest = raw.round();
    if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
        nearest as usize
    } else {
        raw.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, ts: i64, arm: Arm, metric: f64, context: Vec<f64>) -> Instance {
        Instance {
            id: id.into(),
            timestamp: ts,
            arm,
            metric,
            context,
        }
    }

    fn timeline(n: usize) -> ExperimentDataset {
        let instances = (0..n)
            .map(|i| {
                let arm = if i % 2 == 0 { Arm::Test } else { Arm::Control };
                inst(&format!("u{i}"), i as i64, arm, i as f64, vec![0.0])
            })
            .collect();
        ExperimentDataset::new(vec!["f1".into()], instances).unwrap()
    }

    #[test]
    fn ingest_small_csv() {
        let csv = "id,ts,arm,y,f1,f2\n\
                   a,3,T,1.0,0,1\n\
                   b,1,control,0.5,1,1\n\
                   c,2,test,0.0,0,0\n\
                   d,4,C,2.0,1,0\n";
        let ds = ingest_csv(csv.as_bytes(), &Schema::default()).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.count(Arm::Test), 2);
        assert_eq!(ds.count(Arm::Control), 2);
        assert_eq!(ds.num_features(), 2);
        let ids: Vec<_> = ds.instances().iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["b", "c", "a", "d"]);
    }

    #[test]
    fn nan_metric_is_rejected() {
        let csv = "id,ts,arm,y,f1\na,1,T,NaN,0\nb,2,C,1,0\n";
        let err = ingest_csv(csv.as_bytes(), &Schema::default()).unwrap_err();
        assert!(matches!(err, DataError::NonFiniteMetric { line: 2 }), "{err:?}");
    }

    #[test]
    fn ingest_errors() {
        let missing = "id,ts,arm,f1\na,1,T,0\n";
        assert!(matches!(
            ingest_csv(missing.as_bytes(), &Schema::default()),
            Err(DataError::MissingColumn(c)) if c == "y"
        ));
        let one_arm = "id,ts,arm,y,f1\na,1,T,1,0\nb,2,t,1,0\n";
        assert!(matches!(
            ingest_csv(one_arm.as_bytes(), &Schema::default()),
            Err(DataError::EmptyArm(Arm::Control))
        ));
        let blank = "id,ts,arm,y,f1\na,1,T,1,\nb,2,C,1,0\n";
        assert!(matches!(
            ingest_csv(blank.as_bytes(), &Schema::default()),
            Err(DataError::UnparsableRow { line: 2, .. })
        ));
        let bad_arm = "id,ts,arm,y,f1\na,1,X,1,0\n";
        assert!(matches!(
            ingest_csv(bad_arm.as_bytes(), &Schema::default()),
            Err(DataError::UnparsableRow { .. })
        ));
    }

    #[test]
    fn schema_remaps_columns() {
        let csv = "user,when,group,clicks,a,b,ignored\nx,5,T,1,1,2,9\ny,6,C,0,3,4,9\n";
        let schema = Schema {
            id: "user".into(),
            timestamp: "when".into(),
            arm: "group".into(),
            metric: "clicks".into(),
            features: Some(vec!["b".into(), "a".into()]),
        };
        let ds = ingest_csv(csv.as_bytes(), &schema).unwrap();
        assert_eq!(ds.feature_names(), ["b", "a"]);
        assert_eq!(ds.instances()[1].context, vec![4.0, 3.0]);
    }

    #[test]
    fn equal_width_uses_lower_edges() {
        let instances = vec![
            inst("a", 0, Arm::Test, 0.0, vec![0.1]),
            inst("b", 1, Arm::Control, 0.0, vec![0.2]),
            inst("c", 2, Arm::Test, 0.0, vec![0.9]),
        ];
        let ds = ExperimentDataset::new(vec!["f".into()], instances).unwrap();
        let mut cfg = DiscretizationConfig::default();
        cfg.rules.insert("f".into(), DiscretizationRule::EqualWidthBins(2));
        let out = discretize(&ds, &cfg).unwrap();
        let col: Vec<f64> = out.dataset.instances().iter().map(|i| i.context[0]).collect();
        assert_eq!(col, vec![0.1, 0.1, 0.5]);
        assert_eq!(out.dataset.feature_levels()[0], vec![0.1, 0.5]);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn passthrough_keeps_column() {
        let ds = timeline(6);
        let out = discretize(&ds, &DiscretizationConfig::default()).unwrap();
        assert_eq!(out.dataset, ds);
    }

    #[test]
    fn constant_feature_warns() {
        let ds = timeline(6);
        let mut cfg = DiscretizationConfig::default();
        cfg.rules.insert("f1".into(), DiscretizationRule::QuantileBins(4));
        let out = discretize(&ds, &cfg).unwrap();
        assert_eq!(out.dataset.feature_levels()[0], vec![0.0]);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn quantile_and_merge_bins() {
        let instances = (0..10)
            .map(|i| {
                let arm = if i % 2 == 0 { Arm::Test } else { Arm::Control };
                inst(&format!("u{i}"), i, arm, 0.0, vec![i as f64, (i / 4) as f64])
            })
            .collect();
        let ds = ExperimentDataset::new(vec!["a".into(), "b".into()], instances).unwrap();
        let mut cfg = DiscretizationConfig::default();
        cfg.rules.insert("a".into(), DiscretizationRule::QuantileBins(3));
        cfg.rules.insert("b".into(), DiscretizationRule::MergeBelowCount(3));
        let out = discretize(&ds, &cfg).unwrap();
        let a: Vec<f64> = out.dataset.instances().iter().map(|i| i.context[0]).collect();
        assert_eq!(a, vec![0., 0., 0., 3., 3., 3., 6., 6., 6., 6.]);
        // b counts: 0 -> 4, 1 -> 4, 2 -> 2 (underfull, folded into the 1 bin)
        let b: Vec<f64> = out.dataset.instances().iter().map(|i| i.context[1]).collect();
        assert_eq!(b, vec![0., 0., 0., 0., 1., 1., 1., 1., 1., 1.]);
    }

    #[test]
    fn zero_bins_rejected() {
        let ds = timeline(4);
        let mut cfg = DiscretizationConfig::default();
        cfg.rules.insert("f1".into(), DiscretizationRule::EqualWidthBins(0));
        assert!(matches!(discretize(&ds, &cfg), Err(DataError::InvalidRule { .. })));
    }

    #[test]
    fn split_sizes() {
        let (train, test) = chronological_split(&timeline(10), 0.8).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert_eq!(train.instances()[7].id, "u7");

        let (train, test) = chronological_split(&timeline(6), 0.5).unwrap();
        assert_eq!((train.len(), test.len()), (3, 3));

        let (train, test) = chronological_split(&timeline(10), 0.7).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));

        // 22 daily units cut at 16/22, the 16-day/6-day shape
        let (train, test) = chronological_split(&timeline(22), 16.0 / 22.0).unwrap();
        assert_eq!((train.len(), test.len()), (16, 6));
    }

    #[test]
    fn split_ceiling_rule() {
        // ceil(2.5) = 3
        let (train, test) = chronological_split(&timeline(5), 0.5).unwrap();
        assert_eq!((train.len(), test.len()), (3, 2));
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            chronological_split(&timeline(2), 0.99),
            Err(DataError::EmptySplit("test"))
        ));
        assert!(matches!(
            chronological_split(&timeline(4), 1.0),
            Err(DataError::InvalidFraction(_))
        ));
    }

    #[test]
    fn timestamp_ties_keep_input_order() {
        let instances = vec![
            inst("z", 5, Arm::Test, 0.0, vec![0.0]),
            inst("y", 5, Arm::Control, 0.0, vec![0.0]),
            inst("x", 1, Arm::Control, 0.0, vec![0.0]),
        ];
        let ds = ExperimentDataset::new(vec!["f".into()], instances).unwrap();
        let ids: Vec<_> = ds.instances().iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["x", "z", "y"]);
    }
}
