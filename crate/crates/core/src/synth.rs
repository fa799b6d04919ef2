//! Synthetic randomized experiments with planted heterogeneous effects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Arm, DataError, ExperimentDataset, Instance};
use crate::linalg::dot;
use crate::valuation::quantize;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Instances with `direction · x == threshold` get `effect_plus`, the rest
/// `effect_minus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedDirection {
    pub direction: Vec<f64>,
    pub threshold: f64,
    pub effect_plus: f64,
    pub effect_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Gaussian,
    /// 0/1 outcomes with success probability `baseline + effect`, clamped.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_instances: usize,
    pub num_features: usize,
    pub test_fraction: f64,
    pub noise_sd: f64,
    pub planted_directions: Vec<PlantedDirection>,
    pub baseline_mean: f64,
    pub feature_level_count: usize,
    pub metric: MetricKind,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let mut direction = vec![0.0; 10];
        direction[1] = 1.0;
        Self {
            n_instances: 20_000,
            num_features: 10,
            test_fraction: 0.5,
            noise_sd: 1.0,
            planted_directions: vec![PlantedDirection {
                direction,
                threshold: 1.0,
                effect_plus: 0.5,
                effect_minus: -0.5,
            }],
            baseline_mean: 0.0,
            feature_level_count: 2,
            metric: MetricKind::Gaussian,
            seed: 0,
        }
    }
}

/// Grid used to decide whether `direction · x` hits the threshold.
const MATCH_GRID: f64 = 1e-6;

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |field, reason: String| Err(SynthError::InvalidConfig { field, reason });
        if self.n_instances < 2 {
            return bad("n_instances", format!("{} is below 2", self.n_instances));
        }
        if self.num_features < 2 {
            return bad("num_features", format!("{} is below 2", self.num_features));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction", format!("{} is outside (0, 1)", self.test_fraction));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd", format!("{} is not a finite non-negative number", self.noise_sd));
        }
        if !self.baseline_mean.is_finite() {
            return bad("baseline_mean", "must be finite".into());
        }
        if self.feature_level_count == 0 {
            return bad("feature_level_count", "must be positive".into());
        }
        for (i, p) in self.planted_directions.iter().enumerate() {
            if p.direction.len() != self.num_features {
                return bad(
                    "planted_directions",
                    format!("direction {i} has {} entries, expected {}", p.direction.len(), self.num_features),
                );
            }
            let norm = dot(&p.direction, &p.direction).sqrt();
            if norm.is_nan() || (norm - 1.0).abs() > 1e-9 {
                return bad("planted_directions", format!("direction {i} has norm {norm}, expected 1"));
            }
            if ![p.threshold, p.effect_plus, p.effect_minus].iter().all(|v| v.is_finite()) {
                return bad("planted_directions", format!("direction {i} has a non-finite value"));
            }
        }
        Ok(())
    }

    /// True effect for context `x`: the first matching direction's
    /// `effect_plus`, else the first direction's `effect_minus`, else zero.
    pub fn true_effect(&self, x: &[f64]) -> f64 {
        let Some(first) = self.planted_directions.first() else {
            return 0.0;
        };
        self.planted_directions
            .iter()
            .find(|p| quantize(&[dot(&p.direction, x)], MATCH_GRID) == quantize(&[p.threshold], MATCH_GRID))
            .map_or(first.effect_minus, |p| p.effect_plus)
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: ExperimentDataset,
    /// True effect per instance, in dataset order.
    pub true_effects: Vec<f64>,
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Synthetic, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_sd).expect("noise_sd validated");
    let levels = cfg.feature_level_count as u32;
    let mut instances = Vec::with_capacity(cfg.n_instances);
    let mut true_effects = Vec::with_capacity(cfg.n_instances);
    for i in 0..cfg.n_instances {
        let context: Vec<f64> = (0..cfg.num_features)
            .map(|_| rng.random_range(0..levels) as f64)
            .collect();
        let arm = if rng.random_bool(cfg.test_fraction) {
            Arm::Test
        } else {
            Arm::Control
        };
        let effect = cfg.true_effect(&context);
        let shift = if arm == Arm::Test { effect } else { 0.0 };
        let metric = match cfg.metric {
            MetricKind::Gaussian => cfg.baseline_mean + shift + noise.sample(&mut rng),
            MetricKind::Bernoulli => {
                let p = (cfg.baseline_mean + shift).clamp(0.0, 1.0);
                if rng.random_bool(p) {
                    1.0
                } else {
                    0.0
                }
            }
        };
        instances.push(Instance {
            id: format!("u{i:06}"),
            timestamp: i as i64,
            arm,
            metric,
            context,
        });
        true_effects.push(effect);
    }
    let names = (0..cfg.num_features).map(|j| format!("x{j}")).collect();
    Ok(Synthetic {
        dataset: ExperimentDataset::new(names, instances)?,
        true_effects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{welch_statistic, ArmStats};

    fn one_direction(effect_plus: f64, effect_minus: f64) -> SyntheticConfig {
        SyntheticConfig {
            n_instances: 400,
            num_features: 3,
            planted_directions: vec![PlantedDirection {
                direction: vec![1.0, 0.0, 0.0],
                threshold: 1.0,
                effect_plus,
                effect_minus,
            }],
            baseline_mean: 10.0,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_regions() {
        let cfg = SyntheticConfig {
            noise_sd: 0.0,
            seed: 5,
            ..one_direction(1.0, -1.0)
        };
        let s = generate_synthetic(&cfg).unwrap();
        assert_eq!(s.dataset.len(), 400);
        for (inst, effect) in s.dataset.instances().iter().zip(&s.true_effects) {
            let want_effect = if inst.context[0] == 1.0 { 1.0 } else { -1.0 };
            assert_eq!(*effect, want_effect);
            let want = if inst.arm == Arm::Test { 10.0 + want_effect } else { 10.0 };
            assert_eq!(inst.metric, want);
            assert!(inst.context.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn reproducible_per_seed() {
        let cfg = SyntheticConfig {
            seed: 9,
            ..one_direction(0.5, -0.5)
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
        let c = generate_synthetic(&SyntheticConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn balanced_effects_cancel_globally() {
        // Regions split evenly, so +δ and -δ average out.
        let mut within = 0;
        for seed in 0..20 {
            let cfg = SyntheticConfig {
                n_instances: 4000,
                seed,
                ..one_direction(0.5, -0.5)
            };
            let s = generate_synthetic(&cfg).unwrap();
            let arm = |a: Arm| {
                ArmStats::from_values(s.dataset.instances().iter().filter(|i| i.arm == a).map(|i| i.metric))
            };
            if welch_statistic(&arm(Arm::Test), &arm(Arm::Control), 0.0).unwrap() < 3.0 {
                within += 1;
            }
        }
        assert!(within >= 19, "{within}");
    }

    #[test]
    fn no_directions_is_null() {
        let cfg = SyntheticConfig {
            planted_directions: vec![],
            noise_sd: 0.0,
            n_instances: 50,
            num_features: 3,
            ..Default::default()
        };
        let s = generate_synthetic(&cfg).unwrap();
        assert!(s.true_effects.iter().all(|&e| e == 0.0));
        assert!(s.dataset.instances().iter().all(|i| i.metric == 0.0));
    }

    #[test]
    fn bernoulli_metrics() {
        let cfg = SyntheticConfig {
            metric: MetricKind::Bernoulli,
            baseline_mean: 0.3,
            seed: 1,
            ..one_direction(0.2, -0.9)
        };
        let s = generate_synthetic(&cfg).unwrap();
        assert!(s.dataset.instances().iter().all(|i| i.metric == 0.0 || i.metric == 1.0));
        // p clamps to 0 for treated instances outside the region.
        assert!(s
            .dataset
            .instances()
            .iter()
            .filter(|i| i.arm == Arm::Test && i.context[0] != 1.0)
            .all(|i| i.metric == 0.0));
    }

    #[test]
    fn validation_names_fields() {
        let cases = [
            (SyntheticConfig { test_fraction: 1.5, ..Default::default() }, "test_fraction"),
            (SyntheticConfig { noise_sd: -1.0, ..Default::default() }, "noise_sd"),
            (SyntheticConfig { num_features: 4, ..Default::default() }, "planted_directions"),
        ];
        for (cfg, want) in cases {
            match generate_synthetic(&cfg) {
                Err(SynthError::InvalidConfig { field, .. }) => assert_eq!(field, want),
                other => panic!("{other:?}"),
            }
        }
        let mut cfg = one_direction(1.0, 0.0);
        cfg.planted_directions[0].direction = vec![1.0, 1.0, 0.0];
        assert!(generate_synthetic(&cfg).is_err());
    }
}
