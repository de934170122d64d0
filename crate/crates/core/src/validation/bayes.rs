//! Bayesian model discrimination on (restricted) click samples.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GbsError, Result};
use crate::samplers::{derive_seed, SampleSet};
use crate::threshold::{ClickModel, ClickPattern, KernelConfig};

/// Evidence accumulated event by event for model Q against model R.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianTrace {
    /// Finite part of `ln chi` after each event.
    pub log_chi: Vec<f64>,
    /// `C_B = chi / (1 + chi)` after each event.
    pub counter: Vec<f64>,
    /// Per-event `ln Q_k - ln R_k`, infinite for zero-probability events.
    pub log_ratios: Vec<f64>,
    /// Finite part of `ln chi` divided by the event count, in nats.
    pub delta_h: f64,
    /// Events with `R_k = 0 < Q_k`.
    pub infinite_for_q: usize,
    /// Events with `Q_k = 0 < R_k`.
    pub infinite_for_r: usize,
    /// Events impossible under both models; they carry no evidence.
    pub impossible: usize,
}

impl BayesianTrace {
    pub fn events(&self) -> usize {
        self.counter.len()
    }

    pub fn final_counter(&self) -> f64 {
        self.counter.last().copied().unwrap_or(0.5)
    }

    pub fn final_log_chi(&self) -> f64 {
        self.log_chi.last().copied().unwrap_or(0.0)
    }

    /// Event count at which `C_B` first exceeds `level`, if ever.
    pub fn events_to_exceed(&self, level: f64) -> Option<usize> {
        self.counter.iter().position(|&c| c > level).map(|i| i + 1)
    }

    /// Standard error of `delta_h` from the spread of finite per-event log ratios.
    pub fn delta_h_std_error(&self) -> f64 {
        let finite: Vec<f64> = self.log_ratios.iter().copied().filter(|x| x.is_finite()).collect();
        let n = finite.len();
        if n < 2 {
            return 0.0;
        }
        let mean = finite.iter().sum::<f64>() / n as f64;
        let var = finite.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

/// `chi / (1 + chi)` evaluated from `ln chi` without overflow.
pub fn counter_from_log(log_chi: f64) -> f64 {
    if log_chi >= 0.0 {
        1.0 / (1.0 + (-log_chi).exp())
    } else {
        let e = log_chi.exp();
        e / (1.0 + e)
    }
}

/// Accumulates evidence from per-event probabilities under Q and R.
///
/// Infinite events pin the counter at 1 (only Q-favouring) or 0 (only
/// R-favouring) while the finite log evidence keeps accumulating. When both
/// kinds occur the counter falls back to the finite evidence.
pub fn bayesian_from_probabilities(q: &[f64], r: &[f64]) -> Result<BayesianTrace> {
    if q.len() != r.len() {
        return Err(GbsError::Argument(format!("{} Q probabilities for {} R probabilities", q.len(), r.len())));
    }
    let mut trace = BayesianTrace {
        log_chi: Vec::with_capacity(q.len()),
        counter: Vec::with_capacity(q.len()),
        log_ratios: Vec::with_capacity(q.len()),
        delta_h: 0.0,
        infinite_for_q: 0,
        infinite_for_r: 0,
        impossible: 0,
    };
    let mut acc = 0.0;
    for (&qk, &rk) in q.iter().zip(r) {
        if !(qk >= 0.0 && rk >= 0.0) {
            return Err(GbsError::Argument(format!("negative or NaN probability ({qk}, {rk})")));
        }
        let lr = match (qk > 0.0, rk > 0.0) {
            (true, true) => qk.ln() - rk.ln(),
            (true, false) => {
                trace.infinite_for_q += 1;
                f64::INFINITY
            }
            (false, true) => {
                trace.infinite_for_r += 1;
                f64::NEG_INFINITY
            }
            (false, false) => {
                trace.impossible += 1;
                f64::NAN
            }
        };
        if lr.is_finite() {
            acc += lr;
        }
        trace.log_ratios.push(lr);
        trace.log_chi.push(acc);
        let c = match (trace.infinite_for_q > 0, trace.infinite_for_r > 0) {
            (true, false) => 1.0,
            (false, true) => 0.0,
            _ => counter_from_log(acc),
        };
        trace.counter.push(c);
    }
    if !q.is_empty() {
        trace.delta_h = acc / q.len() as f64;
    }
    Ok(trace)
}

/// Probabilities of every sample restricted to `subsystem` under both
/// models. Each distinct restricted pattern is evaluated once.
fn restricted_probabilities(
    samples: &SampleSet,
    model_q: &dyn ClickModel,
    model_r: &dyn ClickModel,
    subsystem: &[usize],
    cfg: &KernelConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = samples.mode_count;
    if model_q.mode_count() != m || model_r.mode_count() != m {
        return Err(GbsError::Argument(format!(
            "samples have {m} modes, models have {} and {}",
            model_q.mode_count(),
            model_r.mode_count()
        )));
    }
    crate::gaussian::check_mode_set(subsystem, m)?;
    let restricted: Vec<ClickPattern> = samples.patterns.iter().map(|p| p.restrict(subsystem)).collect();
    let mut unique: BTreeMap<&ClickPattern, (f64, f64)> = restricted.iter().map(|p| (p, (0.0, 0.0))).collect();
    let keys: Vec<&ClickPattern> = unique.keys().copied().collect();
    let values = keys
        .par_iter()
        .map(|p| {
            let q = model_q.marginal_pattern_probability(subsystem, p.bits(), cfg)?;
            let r = model_r.marginal_pattern_probability(subsystem, p.bits(), cfg)?;
            Ok((q, r))
        })
        .collect::<Result<Vec<_>>>()?;
    for (k, v) in keys.into_iter().zip(values) {
        unique.insert(k, v);
    }
    Ok(restricted.iter().map(|p| unique[p]).unzip())
}

/// Sequential Bayesian test of Q against R on the samples restricted to
/// `subsystem`.
pub fn bayesian_test(
    samples: &SampleSet,
    model_q: &dyn ClickModel,
    model_r: &dyn ClickModel,
    subsystem: &[usize],
    cfg: &KernelConfig,
) -> Result<BayesianTrace> {
    let (q, r) = restricted_probabilities(samples, model_q, model_r, subsystem, cfg)?;
    bayesian_from_probabilities(&q, &r)
}

/// One row of a subsystem sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub size: usize,
    pub samples: usize,
    pub delta_h: f64,
    pub std_error: f64,
    pub counter: f64,
    #[serde(skip)]
    pub modes: Vec<usize>,
}

/// Nested seeded subsystems: the first `s` modes of one random permutation,
/// sorted, for every requested size `s`.
pub fn nested_subsystems(m: usize, sizes: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
    if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s > m) {
        return Err(GbsError::Argument(format!("subsystem size {bad} outside 1..={m}")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, m as u64)));
    Ok(sizes
        .iter()
        .map(|&s| {
            let mut sub = order[..s].to_vec();
            sub.sort_unstable();
            sub
        })
        .collect())
}

/// `delta_h` as a function of subsystem size. Subsystems are nested
/// (see [`nested_subsystems`]) so evidence can only grow with size in
/// expectation; the full size is the whole system.
pub fn subsystem_sweep(
    samples: &SampleSet,
    model_q: &dyn ClickModel,
    model_r: &dyn ClickModel,
    sizes: &[usize],
    seed: u64,
    cfg: &KernelConfig,
) -> Result<Vec<SweepRow>> {
    let subsystems = nested_subsystems(samples.mode_count, sizes, seed)?;
    sizes
        .iter()
        .zip(subsystems)
        .map(|(&size, modes)| {
            let trace = bayesian_test(samples, model_q, model_r, &modes, cfg).map_err(|e| match e {
                GbsError::Capacity(msg) => GbsError::Capacity(format!("subsystem size {size}: {msg}")),
                other => other,
            })?;
            Ok(SweepRow {
                size,
                samples: trace.events(),
                delta_h: trace.delta_h,
                std_error: trace.delta_h_std_error(),
                counter: trace.final_counter(),
                modes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{haar_random_unitary, paired_squeezers, CircuitSpec};
    use crate::samplers::{circuit_model, sample_circuit, ModelTag};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_models_give_no_evidence() {
        let p = vec![0.1, 0.3, 0.02];
        let t = bayesian_from_probabilities(&p, &p).unwrap();
        assert!(t.log_chi.iter().all(|&l| l == 0.0));
        assert!(t.counter.iter().all(|&c| c == 0.5));
        assert_eq!(t.delta_h, 0.0);
    }

    #[test]
    fn counter_tracks_log_accumulator() {
        let q = vec![0.2, 0.05, 0.3, 0.1];
        let r = vec![0.1, 0.1, 0.1, 0.4];
        let t = bayesian_from_probabilities(&q, &r).unwrap();
        let mut chi = 1.0;
        for k in 0..4 {
            chi *= q[k] / r[k];
            assert_abs_diff_eq!(t.counter[k], chi / (1.0 + chi), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(t.delta_h, chi.ln() / 4.0, epsilon = 1e-12);
        // large evidence does not overflow
        assert_eq!(counter_from_log(1e4), 1.0);
        assert_eq!(counter_from_log(-1e4), 0.0);
    }

    #[test]
    fn zero_probabilities_are_flagged() {
        let t = bayesian_from_probabilities(&[0.5, 0.2], &[0.5, 0.0]).unwrap();
        assert_eq!(t.infinite_for_q, 1);
        assert_eq!(t.final_counter(), 1.0);
        assert!(t.delta_h.is_finite());
        let t = bayesian_from_probabilities(&[0.0, 0.2], &[0.5, 0.2]).unwrap();
        assert_eq!(t.infinite_for_r, 1);
        assert_eq!(t.final_counter(), 0.0);
    }

    #[test]
    fn full_size_sweep_equals_full_test() {
        let c = CircuitSpec::ideal(haar_random_unitary(6, 2), paired_squeezers(&[0.6, 0.5], &[0.0, 0.4]))
            .with_uniform_transmission(0.8);
        let cfg = KernelConfig::default();
        let s = sample_circuit(&c, ModelTag::Gbs, 300, 1, None, &cfg).unwrap();
        let q = circuit_model(&c, ModelTag::Gbs).unwrap();
        let r = circuit_model(&c, ModelTag::Thermal).unwrap();
        let all: Vec<usize> = (0..6).collect();
        let full = bayesian_test(&s, q.as_ref(), r.as_ref(), &all, &cfg).unwrap();
        let rows = subsystem_sweep(&s, q.as_ref(), r.as_ref(), &[2, 4, 6], 9, &cfg).unwrap();
        assert_eq!(rows[2].delta_h, full.delta_h);
        assert!(rows.windows(2).all(|w| w[0].modes.iter().all(|m| w[1].modes.contains(m))));
        assert!(full.final_counter() > 0.9, "{}", full.final_counter());
    }

    #[test]
    fn nested_subsystem_validation() {
        assert!(nested_subsystems(4, &[5], 0).is_err());
        assert!(nested_subsystems(4, &[0], 0).is_err());
        let a = nested_subsystems(10, &[3, 7], 4).unwrap();
        assert_eq!(a, nested_subsystems(10, &[3, 7], 4).unwrap());
    }
}
