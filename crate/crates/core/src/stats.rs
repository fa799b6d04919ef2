//! Two-sample test statistic and the eligibility rule for a subpopulation.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("insufficient data: test n = {test}, control n = {control} (need at least 2 each)")]
    InsufficientData { test: usize, control: usize },
    #[error("probability {0} outside (0, 1)")]
    DomainError(f64),
}

/// Count, mean and unbiased (n - 1) variance of one arm's metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmStats {
    pub n: usize,
    pub mean: f64,
    /// Zero when `n < 2`; check [`ArmStats::variance_defined`].
    pub var: f64,
}

impl ArmStats {
    pub fn new(n: usize, mean: f64, var: f64) -> Self {
        Self { n, mean, var }
    }

    /// Welford accumulation over the values.
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut acc = ArmAccumulator::default();
        for v in values {
            acc.push(v);
        }
        acc.finish()
    }

    pub fn variance_defined(&self) -> bool {
        self.n >= 2
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ArmAccumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl ArmAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn finish(&self) -> ArmStats {
        let var = if self.n >= 2 {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        } else {
            0.0
        };
        ArmStats {
            n: self.n,
            mean: self.mean,
            var,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EligibilityConfig {
    /// Significance level `l`.
    pub level: f64,
    /// Minimum instances per arm.
    pub n_min: usize,
    /// Floor on the variance of the mean difference.
    pub var_floor: f64,
}

impl Default for EligibilityConfig {
    fn default() -> Self {
        Self {
            level: 0.30,
            n_min: 10,
            var_floor: 1e-12,
        }
    }
}

impl EligibilityConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(("level", format!("{} is outside (0, 1)", self.level)));
        }
        if self.n_min < 2 {
            return Err(("n_min", format!("{} is below 2", self.n_min)));
        }
        if self.var_floor.is_nan() || self.var_floor < 0.0 {
            return Err(("var_floor", format!("{} is negative", self.var_floor)));
        }
        Ok(())
    }

    /// Two-sided threshold `q = Φ⁻¹(1 - l/2)`.
    pub fn threshold(&self) -> f64 {
        normal_quantile(1.0 - self.level / 2.0).expect("level validated to (0, 1)")
    }
}

/// Variance of the difference of arm means, `var_T/n_T + var_C/n_C`.
pub fn diff_variance(test: &ArmStats, control: &ArmStats) -> f64 {
    test.var / test.n as f64 + control.var / control.n as f64
}

/// `|mean_T - mean_C| / sqrt(var_T/n_T + var_C/n_C)`.
///
/// When the variance of the difference is below `var_floor` the statistic is
/// its limit: `+inf` if the means differ, `0` if they agree.
pub fn welch_statistic(test: &ArmStats, control: &ArmStats, var_floor: f64) -> Result<f64, StatsError> {
    if test.n < 2 || control.n < 2 {
        return Err(StatsError::InsufficientData {
            test: test.n,
            control: control.n,
        });
    }
    let diff = (test.mean - control.mean).abs();
    let v = diff_variance(test, control);
    if v < var_floor || v == 0.0 {
        return Ok(if diff > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(diff / v.sqrt())
}

/// True iff both arms reach `n_min` and the statistic exceeds the two-sided
/// normal quantile at `cfg.level`. Under-sized arms are simply ineligible.
pub fn is_eligible(test: &ArmStats, control: &ArmStats, cfg: &EligibilityConfig) -> bool {
    if test.n < cfg.n_min || control.n < cfg.n_min {
        return false;
    }
    match welch_statistic(test, control, cfg.var_floor) {
        Ok(stat) => stat > cfg.threshold(),
        Err(_) => false,
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF.
///
/// Acklam's rational approximation followed by one Newton step against the
/// erfc-based CDF. Evaluated on the lower half only and mirrored, so
/// `normal_quantile(p) == -normal_quantile(1 - p)` holds bit-for-bit whenever
/// `1 - (1 - p) == p`.
pub fn normal_quantile(p: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::DomainError(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    // Newton refinement on Φ(x) - p.
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    x - (normal_cdf(x) - p) / density
}
