//! Classical simulation cost, outcome-space size and advantage ratio.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{GbsError, Result};
use crate::samplers::SampleSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    /// Sustained operations per second of the reference machine.
    pub machine_flops: f64,
    /// Dimensionless factor in front of `2^n (2n)^3`.
    pub kernel_constant: f64,
    /// Wall time of the sampling run being compared against, in seconds.
    pub collection_time: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { machine_flops: 4.42e17, kernel_constant: 1.0, collection_time: 200.0 }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("machine_flops", self.machine_flops),
            ("kernel_constant", self.kernel_constant),
            ("collection_time", self.collection_time),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GbsError::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// `log10` of a big integer, accurate to double precision.
pub fn big_log10(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return (x.iter_u64_digits().next().unwrap_or(0) as f64).log10();
    }
    let shift = bits - 64;
    let top = (x >> shift).iter_u64_digits().next().unwrap_or(0) as f64;
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}

/// Number of threshold outcomes `2^M`, exactly and as `log10`.
pub fn hilbert_dimension(m: usize) -> Result<(BigUint, f64)> {
    if m == 0 {
        return Err(GbsError::Argument("mode count must be at least 1".into()));
    }
    let d = BigUint::from(1u8) << m;
    Ok((d, m as f64 * std::f64::consts::LOG10_2))
}

/// `2^n (2n)^3`: subset count times a dense determinant of size `2n`.
/// The empty pattern costs one unit.
pub fn torontonian_operations(n: usize) -> BigUint {
    if n == 0 {
        return BigUint::from(1u8);
    }
    (BigUint::from(1u8) << n) * BigUint::from(2 * n as u64).pow(3)
}

/// `c 2^n (2n)^3` as a double.
pub fn torontonian_flops(n: usize, kernel_constant: f64) -> f64 {
    if n == 0 {
        return kernel_constant;
    }
    kernel_constant * 2f64.powi(n as i32) * (2.0 * n as f64).powi(3)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvantageEstimate {
    pub samples: usize,
    pub max_clicks: usize,
    /// `log10` of the summed kernel operations (constant included).
    pub log10_total_flops: f64,
    /// `log10` of the classical time for all samples, in seconds.
    pub log10_classical_seconds: f64,
    /// `log10(classical time / collection time)`.
    pub log10_ratio: f64,
}

/// Classical time to produce the samples' probabilities divided by the
/// collection time, in `log10`.
pub fn advantage_ratio(samples: &SampleSet, config: &CostConfig) -> Result<AdvantageEstimate> {
    config.validate()?;
    let counts: Vec<usize> = samples.patterns.iter().map(|p| p.click_count()).collect();
    advantage_from_clicks(&counts, config)
}

/// [`advantage_ratio`] from click counts alone.
pub fn advantage_from_clicks(click_counts: &[usize], config: &CostConfig) -> Result<AdvantageEstimate> {
    config.validate()?;
    if click_counts.is_empty() {
        return Err(GbsError::Argument("no samples to cost".into()));
    }
    let mut per_count = std::collections::BTreeMap::<usize, u64>::new();
    for &n in click_counts {
        *per_count.entry(n).or_default() += 1;
    }
    let total: BigUint = per_count.iter().map(|(&n, &k)| torontonian_operations(n) * BigUint::from(k)).sum();
    let log10_total_flops = big_log10(&total) + config.kernel_constant.log10();
    let log10_classical_seconds = log10_total_flops - config.machine_flops.log10();
    Ok(AdvantageEstimate {
        samples: click_counts.len(),
        max_clicks: *per_count.keys().next_back().unwrap_or(&0),
        log10_total_flops,
        log10_classical_seconds,
        log10_ratio: log10_classical_seconds - config.collection_time.log10(),
    })
}

/// One row of a cost table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    pub clicks: usize,
    pub log10_operations: f64,
    pub log10_seconds: f64,
}

pub fn cost_table(max_clicks: usize, config: &CostConfig) -> Result<Vec<CostRow>> {
    config.validate()?;
    Ok((0..=max_clicks)
        .map(|n| {
            let ops = big_log10(&torontonian_operations(n)) + config.kernel_constant.log10();
            CostRow { clicks: n, log10_operations: ops, log10_seconds: ops - config.machine_flops.log10() }
        })
        .collect())
}

/// Fit of measured kernel times to `t = a 2^n (2n)^3`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    /// Seconds per unit of `2^n (2n)^3`.
    pub scale: f64,
    /// Coefficient of determination of the proportional fit.
    pub r_squared: f64,
}

/// Least-squares proportional fit of `(n, seconds)` pairs to the kernel law.
pub fn fit_kernel_scaling(timings: &[(usize, f64)]) -> Result<ScalingFit> {
    if timings.len() < 3 {
        return Err(GbsError::Argument("need at least 3 timings".into()));
    }
    let law: Vec<f64> = timings.iter().map(|&(n, _)| torontonian_flops(n, 1.0)).collect();
    let t: Vec<f64> = timings.iter().map(|&(_, s)| s).collect();
    let scale = law.iter().zip(&t).map(|(f, s)| f * s).sum::<f64>() / law.iter().map(|f| f * f).sum::<f64>();
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    let ss_tot: f64 = t.iter().map(|s| (s - mean).powi(2)).sum();
    let ss_res: f64 = law.iter().zip(&t).map(|(f, s)| (s - scale * f).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(GbsError::Degenerate("all timings are equal".into()));
    }
    Ok(ScalingFit { scale, r_squared: 1.0 - ss_res / ss_tot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dimensions() {
        let (d, l) = hilbert_dimension(1).unwrap();
        assert_eq!(d, BigUint::from(2u8));
        assert_abs_diff_eq!(l, 2f64.log10(), epsilon = 1e-15);
        let (d, l) = hilbert_dimension(144).unwrap();
        assert_eq!(d.to_string(), "22300745198530623141535718272648361505980416");
        assert_abs_diff_eq!(l, 43.35, epsilon = 5e-3);
        assert_abs_diff_eq!(big_log10(&d), l, epsilon = 1e-12);
        assert_abs_diff_eq!(hilbert_dimension(100).unwrap().1, 30.103, epsilon = 1e-3);
        assert!(hilbert_dimension(0).is_err());
    }

    #[test]
    fn kernel_law() {
        assert_eq!(torontonian_operations(0), BigUint::from(1u8));
        assert_eq!(torontonian_operations(3), BigUint::from(8u32 * 216));
        assert_eq!(torontonian_flops(0, 2.5), 2.5);
        let ratio = torontonian_flops(41, 1.0) / torontonian_flops(40, 1.0);
        assert_abs_diff_eq!(ratio, 2.0 * (41.0f64 / 40.0).powi(3), epsilon = 1e-12);
        assert_abs_diff_eq!(ratio, 2.1538, epsilon = 1e-4);
        let ratio = torontonian_flops(114, 1.0) / torontonian_flops(113, 1.0);
        assert_abs_diff_eq!(ratio, 2.0536, epsilon = 1e-4);
    }

    #[test]
    fn unit_ratio() {
        let cfg = CostConfig { machine_flops: 1e9, kernel_constant: 1.0, collection_time: 1.0 };
        let flops = torontonian_flops(10, 1.0);
        let cfg = CostConfig { collection_time: flops / cfg.machine_flops, ..cfg };
        let a = advantage_from_clicks(&[10], &cfg).unwrap();
        assert_abs_diff_eq!(a.log10_ratio, 0.0, epsilon = 1e-12);
        assert_eq!(a.max_clicks, 10);
    }

    #[test]
    fn ratio_is_linear_in_flops_and_inverse_in_rate() {
        let cfg = CostConfig::default();
        let base = advantage_from_clicks(&[30, 31, 12], &cfg).unwrap();
        let doubled = advantage_from_clicks(&[30, 31, 12, 30, 31, 12], &cfg).unwrap();
        assert_abs_diff_eq!(doubled.log10_ratio - base.log10_ratio, 2f64.log10(), epsilon = 1e-12);
        let faster = CostConfig { machine_flops: cfg.machine_flops * 10.0, ..cfg.clone() };
        assert_abs_diff_eq!(advantage_from_clicks(&[30, 31, 12], &faster).unwrap().log10_ratio, base.log10_ratio - 1.0, epsilon = 1e-12);
        let plus_one = advantage_from_clicks(&[100], &cfg).unwrap().log10_ratio - advantage_from_clicks(&[99], &cfg).unwrap().log10_ratio;
        assert!((plus_one - 2f64.log10()).abs() < 0.02);
    }

    #[test]
    fn config_checks() {
        let bad = CostConfig { machine_flops: 0.0, ..Default::default() };
        assert!(matches!(advantage_from_clicks(&[3], &bad), Err(GbsError::Config(_))));
        assert!(advantage_from_clicks(&[], &CostConfig::default()).is_err());
        assert_eq!(cost_table(5, &CostConfig::default()).unwrap().len(), 6);
    }

    #[test]
    fn scaling_fit_of_exact_law() {
        let t: Vec<(usize, f64)> = (10..=22).map(|n| (n, 3e-9 * torontonian_flops(n, 1.0))).collect();
        let fit = fit_kernel_scaling(&t).unwrap();
        assert_abs_diff_eq!(fit.scale, 3e-9, epsilon = 1e-20);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn log10_matches_exact_power(m in 1usize..2000) {
            let (d, l) = hilbert_dimension(m).unwrap();
            prop_assert!((big_log10(&d) - l).abs() < 1e-12 * l.max(1.0));
        }
    }
}
