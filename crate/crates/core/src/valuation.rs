//! Subpopulations induced by representations, their eligibility, and the
//! derived personal valuation of a context.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Arm, ExperimentDataset};
use crate::search::{AcceptedRepresentation, Representation, SearchError};
use crate::stats::{diff_variance, is_eligible, welch_statistic, ArmAccumulator, ArmStats, EligibilityConfig};

#[derive(Debug, Error)]
pub enum ValuationError {
    #[error("context has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("quantization must be positive and finite, got {0}")]
    InvalidQuantization(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Representation(#[from] SearchError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Grid index of each coordinate: `round(value / quantization)`.
pub fn quantize(values: &[f64], quantization: f64) -> Vec<i64> {
    values.iter().map(|v| (v / quantization).round() as i64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subpopulation {
    pub rep_index: usize,
    /// Quantized `H x` shared by all members, as grid indices.
    pub key: Vec<i64>,
    /// Dataset positions of the members, ascending. Empty for subpopulations
    /// loaded from a model file.
    pub members: Vec<usize>,
    pub test: ArmStats,
    pub control: ArmStats,
    pub effect: f64,
    pub volatility: f64,
    pub eligible: bool,
}

impl Subpopulation {
    fn from_stats(rep_index: usize, key: Vec<i64>, members: Vec<usize>, test: ArmStats, control: ArmStats) -> Self {
        let volatility = if test.n > 0 && control.n > 0 {
            diff_variance(&test, &control).sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            rep_index,
            key,
            members,
            test,
            control,
            effect: test.mean - control.mean,
            volatility,
            eligible: false,
        }
    }

    /// `|S|`.
    pub fn size(&self) -> usize {
        self.test.n + self.control.n
    }

    pub fn value(&self, quantization: f64) -> Vec<f64> {
        self.key.iter().map(|&k| k as f64 * quantization).collect()
    }

    pub fn member_ids<'a>(&self, dataset: &'a ExperimentDataset) -> Vec<&'a str> {
        let inst = dataset.instances();
        self.members.iter().map(|&i| inst[i].id.as_str()).collect()
    }
}

fn check_quantization(q: f64) -> Result<(), ValuationError> {
    if q > 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(ValuationError::InvalidQuantization(q))
    }
}

/// Groups the dataset by quantized `H x`. Groups come out in order of their
/// first member.
pub fn enumerate_subpopulations(
    h: &Representation,
    rep_index: usize,
    dataset: &ExperimentDataset,
    quantization: f64,
) -> Result<Vec<Subpopulation>, ValuationError> {
    check_quantization(quantization)?;
    if dataset.num_features() != h.f() {
        return Err(ValuationError::DimensionMismatch {
            expected: h.f(),
            got: dataset.num_features(),
        });
    }
    let keys: Vec<Vec<i64>> = dataset
        .instances()
        .par_iter()
        .map(|inst| quantize(&h.apply(&inst.context), quantization))
        .collect();

    let mut slot: HashMap<&[i64], usize> = HashMap::new();
    let mut groups: Vec<(Vec<usize>, ArmAccumulator, ArmAccumulator)> = Vec::new();
    for (i, (inst, key)) in dataset.instances().iter().zip(&keys).enumerate() {
        let g = *slot.entry(key.as_slice()).or_insert_with(|| {
            groups.push(Default::default());
            groups.len() - 1
        });
        let (members, test, control) = &mut groups[g];
        members.push(i);
        match inst.arm {
            Arm::Test => test.push(inst.metric),
            Arm::Control => control.push(inst.metric),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(members, t, c)| {
            let key = keys[members[0]].clone();
            Subpopulation::from_stats(rep_index, key, members, t.finish(), c.finish())
        })
        .collect())
}

/// Keeps the eligible groups, in order, with the flag set.
pub fn filter_eligible(groups: Vec<Subpopulation>, cfg: &EligibilityConfig) -> Vec<Subpopulation> {
    groups
        .into_iter()
        .filter_map(|mut s| {
            s.eligible = is_eligible(&s.test, &s.control, cfg);
            s.eligible.then_some(s)
        })
        .collect()
}

/// Drops every subpopulation whose member set was already seen, so the
/// earliest (by representation, then enumeration order) survives.
pub fn dedupe(mut subpops: Vec<Subpopulation>) -> Vec<Subpopulation> {
    subpops.sort_by_key(|s| s.rep_index);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    subpops.retain(|s| seen.insert(s.members.clone()));
    subpops
}

/// Eligible subpopulations with the representations that define them.
#[derive(Debug, Clone)]
pub struct EligibleSet {
    pub level: f64,
    pub quantization: f64,
    pub var_floor: f64,
    pub feature_names: Vec<String>,
    pub representations: Vec<AcceptedRepresentation>,
    pub subpops: Vec<Subpopulation>,
    index: HashMap<(usize, Vec<i64>), usize>,
}

impl EligibleSet {
    pub fn new(
        cfg: &EligibilityConfig,
        quantization: f64,
        feature_names: Vec<String>,
        representations: Vec<AcceptedRepresentation>,
        subpops: Vec<Subpopulation>,
    ) -> Result<Self, ValuationError> {
        check_quantization(quantization)?;
        let f = feature_names.len();
        for r in &representations {
            if r.representation.f() != f {
                return Err(ValuationError::DimensionMismatch {
                    expected: f,
                    got: r.representation.f(),
                });
            }
        }
        let mut index = HashMap::new();
        for (i, s) in subpops.iter().enumerate() {
            let rep = representations.get(s.rep_index).ok_or_else(|| {
                ValuationError::InvalidModel(format!("subpopulation {i} refers to missing representation {}", s.rep_index))
            })?;
            if s.key.len() != rep.representation.k() {
                return Err(ValuationError::InvalidModel(format!("subpopulation {i} value has wrong length")));
            }
            if !s.eligible {
                return Err(ValuationError::InvalidModel(format!("subpopulation {i} is not eligible")));
            }
            if index.insert((s.rep_index, s.key.clone()), i).is_some() {
                return Err(ValuationError::InvalidModel(format!("subpopulation {i} repeats a value")));
            }
        }
        Ok(Self {
            level: cfg.level,
            quantization,
            var_floor: cfg.var_floor,
            feature_names,
            representations,
            subpops,
            index,
        })
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subpops.is_empty()
    }

    /// Indices into `subpops` of the subpopulations containing `x`.
    pub fn containing(&self, x: &[f64]) -> Result<Vec<usize>, ValuationError> {
        if x.len() != self.num_features() {
            return Err(ValuationError::DimensionMismatch {
                expected: self.num_features(),
                got: x.len(),
            });
        }
        let mut out = Vec::new();
        for (r, rep) in self.representations.iter().enumerate() {
            let key = quantize(&rep.representation.apply(x), self.quantization);
            if let Some(&i) = self.index.get(&(r, key)) {
                out.push(i);
            }
        }
        Ok(out)
    }
}

/// Enumerates, filters and dedupes the subpopulations of every accepted
/// representation on `train`.
pub fn fit_model(
    train: &ExperimentDataset,
    representations: Vec<AcceptedRepresentation>,
    cfg: &EligibilityConfig,
    quantization: f64,
) -> Result<EligibleSet, ValuationError> {
    let mut eligible = Vec::new();
    for (r, rep) in representations.iter().enumerate() {
        let groups = enumerate_subpopulations(&rep.representation, r, train, quantization)?;
        eligible.extend(filter_eligible(groups, cfg));
    }
    EligibleSet::new(
        cfg,
        quantization,
        train.feature_names().to_vec(),
        representations,
        dedupe(eligible),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    pub value: f64,
    /// `(index into subpops, weight)` for each containing subpopulation.
    pub weights: Vec<(usize, f64)>,
}

/// DPV with its weight breakdown. Weights are proportional to
/// `1 / (max(σ, √var_floor) · √|S|)` and sum to one; no containing
/// subpopulation means a value of zero and no weights.
pub fn valuation(x: &[f64], model: &EligibleSet) -> Result<Valuation, ValuationError> {
    let containing = model.containing(x)?;
    if containing.is_empty() {
        return Ok(Valuation {
            value: 0.0,
            weights: Vec::new(),
        });
    }
    let floor = model.var_floor.sqrt();
    let raw: Vec<f64> = containing
        .iter()
        .map(|&i| {
            let s = &model.subpops[i];
            1.0 / (s.volatility.max(floor) * (s.size() as f64).sqrt())
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<(usize, f64)> = containing.iter().zip(&raw).map(|(&i, w)| (i, w / total)).collect();
    let value = weights.iter().map(|&(i, w)| w * model.subpops[i].effect).sum();
    Ok(Valuation { value, weights })
}

pub fn dpv(x: &[f64], model: &EligibleSet) -> Result<f64, ValuationError> {
    valuation(x, model).map(|v| v.value)
}

/// `(id, dpv)` for every instance, in dataset order.
pub fn score_dataset(dataset: &ExperimentDataset, model: &EligibleSet) -> Result<Vec<(String, f64)>, ValuationError> {
    if dataset.num_features() != model.num_features() {
        return Err(ValuationError::DimensionMismatch {
            expected: model.num_features(),
            got: dataset.num_features(),
        });
    }
    dataset
        .instances()
        .par_iter()
        .map(|inst| Ok((inst.id.clone(), dpv(&inst.context, model)?)))
        .collect()
}

/// Test against control over the whole population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalComparison {
    pub test: ArmStats,
    pub control: ArmStats,
    pub effect: f64,
    pub volatility: f64,
    pub statistic: f64,
    pub eligible: bool,
}

pub fn global_comparison(dataset: &ExperimentDataset, cfg: &EligibilityConfig) -> GlobalComparison {
    let arm = |a: Arm| {
        ArmStats::from_values(dataset.instances().iter().filter(|i| i.arm == a).map(|i| i.metric))
    };
    let (test, control) = (arm(Arm::Test), arm(Arm::Control));
    GlobalComparison {
        test,
        control,
        effect: test.mean - control.mean,
        volatility: diff_variance(&test, &control).sqrt(),
        statistic: welch_statistic(&test, &control, cfg.var_floor).unwrap_or(0.0),
        eligible: is_eligible(&test, &control, cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RepresentationRecord {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "F")]
    f: usize,
    rows: Vec<Vec<f64>>,
    objective: usize,
    order_index: usize,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubpopRecord {
    rep_index: usize,
    v: Vec<f64>,
    #[serde(rename = "n_T")]
    n_test: usize,
    #[serde(rename = "n_C")]
    n_control: usize,
    #[serde(rename = "mean_T")]
    mean_test: f64,
    #[serde(rename = "mean_C")]
    mean_control: f64,
    #[serde(rename = "var_T")]
    var_test: f64,
    #[serde(rename = "var_C")]
    var_control: f64,
    effect: f64,
    volatility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    level: f64,
    quantization: f64,
    var_floor: f64,
    feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
    representations: Vec<RepresentationRecord>,
    subpops: Vec<SubpopRecord>,
}

/// Writes the model as pretty JSON. `config` is echoed verbatim.
pub fn write_model<W: Write>(
    model: &EligibleSet,
    config: Option<serde_json::Value>,
    mut writer: W,
) -> Result<(), ValuationError> {
    let file = ModelFile {
        level: model.level,
        quantization: model.quantization,
        var_floor: model.var_floor,
        feature_names: model.feature_names.clone(),
        config,
        representations: model
            .representations
            .iter()
            .map(|a| RepresentationRecord {
                k: a.representation.k(),
                f: a.representation.f(),
                rows: a.representation.matrix().to_rows(),
                objective: a.objective,
                order_index: a.order_index,
                seed: a.seed,
            })
            .collect(),
        subpops: model
            .subpops
            .iter()
            .map(|s| SubpopRecord {
                rep_index: s.rep_index,
                v: s.value(model.quantization),
                n_test: s.test.n,
                n_control: s.control.n,
                mean_test: s.test.mean,
                mean_control: s.control.mean,
                var_test: s.test.var,
                var_control: s.control.var,
                effect: s.effect,
                volatility: s.volatility,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_model<R: Read>(reader: R) -> Result<EligibleSet, ValuationError> {
    let file: ModelFile = serde_json::from_reader(reader)?;
    let cfg = EligibilityConfig {
        level: file.level,
        var_floor: file.var_floor,
        ..Default::default()
    };
    let mut representations = Vec::with_capacity(file.representations.len());
    for r in file.representations {
        if r.rows.len() != r.k || r.rows.iter().any(|row| row.len() != r.f) {
            return Err(ValuationError::InvalidModel("representation shape does not match K and F".into()));
        }
        representations.push(AcceptedRepresentation {
            representation: Representation::try_from(r.rows)?,
            objective: r.objective,
            order_index: r.order_index,
            seed: r.seed,
        });
    }
    let subpops = file
        .subpops
        .into_iter()
        .map(|s| {
            let mut sub = Subpopulation {
                rep_index: s.rep_index,
                key: quantize(&s.v, file.quantization),
                members: Vec::new(),
                test: ArmStats::new(s.n_test, s.mean_test, s.var_test),
                control: ArmStats::new(s.n_control, s.mean_control, s.var_control),
                effect: s.effect,
                volatility: s.volatility,
                eligible: true,
            };
            if !(sub.effect.is_finite() && sub.volatility.is_finite() && sub.volatility >= 0.0) {
                sub.eligible = false;
            }
            sub
        })
        .collect();
    EligibleSet::new(&cfg, file.quantization, file.feature_names, representations, subpops)
}
