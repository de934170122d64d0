//! Statistical validation of click samples against exact and mockup models.

mod bayes;
mod correlation;
mod ranks;
mod scores;

pub use bayes::*;
pub use correlation::*;
pub use ranks::*;
pub use scores::*;

use serde::Serialize;

use crate::error::Result;
use crate::samplers::SampleSet;
use crate::threshold::{ClickModel, KernelConfig};

/// One line of a validation report. Fields that do not apply to a test are
/// left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ValidationRecord {
    pub test: String,
    pub detail: String,
    pub subsystem_size: usize,
    pub samples: usize,
    pub log_chi: Option<f64>,
    pub counter: Option<f64>,
    pub delta_h: Option<f64>,
    pub std_error: Option<f64>,
    pub p_value: Option<f64>,
    pub tvd: Option<f64>,
    pub value: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub fingerprint: String,
    pub seeds: Vec<u64>,
    pub records: Vec<ValidationRecord>,
}

impl ValidationReport {
    pub fn new(fingerprint: impl Into<String>, seeds: Vec<u64>) -> Self {
        ValidationReport { fingerprint: fingerprint.into(), seeds, records: Vec::new() }
    }

    pub fn push(&mut self, record: ValidationRecord) {
        self.records.push(record);
    }

    /// False if any record carries a failed check.
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.pass != Some(false))
    }

    pub fn to_csv(&self) -> Result<String> {
        crate::codec::csv_string(&self.records)
    }

    /// Plain-text summary, one line per record with its check outcome.
    pub fn summary(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut out = format!("fingerprint: {}\nseeds: {}\n", self.fingerprint, seeds.join(","));
        for r in &self.records {
            let flag = match r.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "INFO",
            };
            let mut fields = Vec::new();
            let mut add = |name: &str, v: Option<f64>| {
                if let Some(v) = v {
                    fields.push(format!("{name}={v:.6e}"));
                }
            };
            add("counter", r.counter);
            add("delta_h", r.delta_h);
            add("std_error", r.std_error);
            add("p", r.p_value);
            add("tvd", r.tvd);
            add("value", r.value);
            out.push_str(&format!(
                "[{flag}] {} {} size={} n={} {}\n",
                r.test,
                r.detail,
                r.subsystem_size,
                r.samples,
                fields.join(" ")
            ));
        }
        out.push_str(if self.all_passed() { "overall: PASS\n" } else { "overall: FAIL\n" });
        out
    }
}

/// All `k`-subsets of `pool`, in lexicographic order of positions.
pub fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = pool.len();
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| pool[i]).collect());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { break };
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Agreement between empirical and exact truncated correlations of one
/// order, over every subset of that order drawn from `pool`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderAgreement {
    pub order: usize,
    pub subsets: usize,
    pub rho: f64,
    pub p_value: f64,
}

/// Spearman test of empirical against exact truncated correlations for
/// each order.
pub fn order_agreement(
    samples: &SampleSet,
    model: &dyn ClickModel,
    pool: &[usize],
    orders: &[usize],
    cfg: &KernelConfig,
) -> Result<Vec<OrderAgreement>> {
    let emp = EmpiricalMoments::new(samples)?;
    let theory = ModelMoments { model, cfg: cfg.clone() };
    orders
        .iter()
        .map(|&k| {
            let subsets = combinations(pool, k);
            let exact = theory_truncated_correlations(&theory, &subsets)?;
            let measured = subsets.iter().map(|s| truncated_correlation(&emp, s)).collect::<Result<Vec<_>>>()?;
            let r = spearman_test(&exact, &measured)?;
            Ok(OrderAgreement { order: k, subsets: subsets.len(), rho: r.rho, p_value: r.p })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_counts() {
        let pool: Vec<usize> = (0..6).collect();
        assert_eq!(combinations(&pool, 2).len(), 15);
        assert_eq!(combinations(&pool, 6), vec![pool.clone()]);
        assert_eq!(combinations(&[4, 7, 9], 2), vec![vec![4, 7], vec![4, 9], vec![7, 9]]);
        assert!(combinations(&pool, 7).is_empty());
    }

    #[test]
    fn report_outputs() {
        let mut r = ValidationReport::new("abc", vec![1, 2]);
        r.push(ValidationRecord { test: "bayes".into(), samples: 10, counter: Some(0.99), pass: Some(true), ..Default::default() });
        r.push(ValidationRecord { test: "tvd".into(), samples: 10, tvd: Some(0.1), ..Default::default() });
        assert!(r.all_passed());
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("test,detail,subsystem_size,samples,log_chi,counter"));
        assert_eq!(csv.lines().count(), 3);
        assert!(r.summary().contains("[PASS] bayes"));
        r.push(ValidationRecord { test: "x".into(), pass: Some(false), ..Default::default() });
        assert!(r.summary().ends_with("overall: FAIL\n"));
    }
}
