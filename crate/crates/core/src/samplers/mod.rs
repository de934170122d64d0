//! Exact chain-rule sampling and the mockup models a validation must reject.

mod mockups;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::circuit_fingerprint;
use crate::error::{GbsError, Result};
use crate::gaussian::CircuitSpec;
use crate::threshold::{ClickModel, ClickPattern, KernelConfig};

pub use mockups::{
    mockup_coherent_clickprobs, mockup_distinguishable_prob, mockup_thermal_state, uniform_log_prob, uniform_prob,
    CoherentModel, DistinguishableModel, UniformModel,
};

/// Samples drawn per work unit; fixed so output is independent of threads.
const SAMPLES_PER_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Gbs,
    Thermal,
    Coherent,
    Distinguishable,
    Uniform,
}

impl ModelTag {
    pub const ALL: [ModelTag; 5] =
        [ModelTag::Gbs, ModelTag::Thermal, ModelTag::Coherent, ModelTag::Distinguishable, ModelTag::Uniform];
    pub const MOCKUPS: [ModelTag; 4] =
        [ModelTag::Thermal, ModelTag::Coherent, ModelTag::Distinguishable, ModelTag::Uniform];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Gbs => "gbs",
            ModelTag::Thermal => "thermal",
            ModelTag::Coherent => "coherent",
            ModelTag::Distinguishable => "distinguishable",
            ModelTag::Uniform => "uniform",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ModelTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown model {s:?} (expected gbs, thermal, coherent, distinguishable or uniform)"))
    }
}

/// Click patterns plus the provenance needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub fingerprint: String,
    pub model: ModelTag,
    pub mode_count: usize,
    pub phase_index: Option<usize>,
    pub seed: u64,
    pub patterns: Vec<ClickPattern>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// First and second halves, used for split-half noise floors.
    pub fn split_half(&self) -> (SampleSet, SampleSet) {
        let mid = self.patterns.len() / 2;
        let mut a = self.clone();
        let mut b = self.clone();
        a.patterns.truncate(mid);
        b.patterns.drain(..mid);
        (a, b)
    }
}

/// SplitMix64 finaliser; derives independent seeds from `(seed, label)`.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream for sample `index`; identical for any evaluation order.
pub(crate) fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `count` indices in fixed-size chunks, in parallel, in order.
pub(crate) fn parallel_draw<F>(count: usize, draw_chunk: F) -> Result<Vec<ClickPattern>>
where
    F: Fn(std::ops::Range<usize>) -> Result<Vec<ClickPattern>> + Sync,
{
    let chunks = count.div_ceil(SAMPLES_PER_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| draw_chunk(c * SAMPLES_PER_CHUNK..((c + 1) * SAMPLES_PER_CHUNK).min(count)))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Conditional-probability sampler state shared by consecutive draws.
pub(crate) struct ChainSampler<'a, C: ClickModel + ?Sized> {
    model: &'a C,
    cfg: &'a KernelConfig,
    modes: Vec<usize>,
    /// `P(prefix followed by a dark mode)` keyed by that extended prefix.
    cache: HashMap<Vec<bool>, f64>,
}

impl<'a, C: ClickModel + ?Sized> ChainSampler<'a, C> {
    pub(crate) fn new(model: &'a C, cfg: &'a KernelConfig) -> Self {
        let modes = (0..model.mode_count()).collect();
        ChainSampler { model, cfg, modes, cache: HashMap::new() }
    }

    /// Resolves modes `0..M` in order, each conditioned on the bits so far.
    pub(crate) fn draw<R: Rng>(&mut self, rng: &mut R) -> Result<ClickPattern> {
        let m = self.modes.len();
        let mut prefix: Vec<bool> = Vec::with_capacity(m);
        let mut p_prefix = 1.0f64;
        for mode in 0..m {
            prefix.push(false);
            let p_dark = match self.cache.get(&prefix) {
                Some(&p) => p,
                None => {
                    let p = self.model.marginal_pattern_probability(&self.modes[..=mode], &prefix, self.cfg)?;
                    self.cache.insert(prefix.clone(), p);
                    p
                }
            };
            let p_click = (p_prefix - p_dark).max(0.0);
            let cond = if p_prefix > 0.0 { (p_click / p_prefix).min(1.0) } else { 0.0 };
            let u: f64 = rng.random();
            if u < cond {
                prefix[mode] = true;
                p_prefix = p_click;
            } else {
                p_prefix = p_dark;
            }
        }
        Ok(ClickPattern::new(prefix))
    }
}

/// Exact samples from any click model by the chain rule over modes
/// `0, 1, ..., M-1`. Sample `i` uses random stream `i` of `seed`.
pub fn exact_sample<C: ClickModel + ?Sized>(
    model: &C,
    count: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<Vec<ClickPattern>> {
    parallel_draw(count, |range| {
        let mut sampler = ChainSampler::new(model, cfg);
        range
            .map(|i| {
                let mut rng = sample_rng(seed, i as u64);
                sampler.draw(&mut rng)
            })
            .collect()
    })
}

/// Builds the exact or mockup click model of a circuit.
pub fn circuit_model(circuit: &CircuitSpec, tag: ModelTag) -> Result<Box<dyn ClickModel>> {
    use crate::threshold::DetectedState;
    circuit.validate()?;
    let pd = circuit.dark_count_prob;
    Ok(match tag {
        ModelTag::Gbs => Box::new(DetectedState::new(circuit.output_state()?, pd)),
        ModelTag::Thermal => {
            let input = mockup_thermal_state(&circuit.squeezers, circuit.mode_count)?;
            Box::new(DetectedState::new(circuit.propagate(&input)?, pd))
        }
        ModelTag::Coherent => Box::new(CoherentModel::from_circuit(circuit)?),
        ModelTag::Distinguishable => Box::new(DistinguishableModel::from_circuit(circuit)?),
        ModelTag::Uniform => Box::new(UniformModel::new(circuit.mode_count)),
    })
}

/// Draws `count` samples of `tag` for `circuit`.
pub fn sample_circuit(
    circuit: &CircuitSpec,
    tag: ModelTag,
    count: usize,
    seed: u64,
    phase_index: Option<usize>,
    cfg: &KernelConfig,
) -> Result<SampleSet> {
    circuit.validate()?;
    let patterns = match tag {
        ModelTag::Gbs | ModelTag::Thermal => exact_sample(circuit_model(circuit, tag)?.as_ref(), count, seed, cfg)?,
        ModelTag::Coherent => CoherentModel::from_circuit(circuit)?.sample(count, seed),
        ModelTag::Distinguishable => DistinguishableModel::from_circuit(circuit)?.sample(count, seed, cfg)?,
        ModelTag::Uniform => UniformModel::new(circuit.mode_count).sample(count, seed),
    };
    Ok(SampleSet {
        fingerprint: circuit_fingerprint(circuit),
        model: tag,
        mode_count: circuit.mode_count,
        phase_index,
        seed,
        patterns,
    })
}

/// Exact GBS samples for each phase setting; setting `i` uses seed
/// `derive_seed(seed, i)` and records `phase_index = i`.
pub fn phase_sweep(
    circuit: &CircuitSpec,
    phase_settings: &[Vec<f64>],
    count: usize,
    seed: u64,
    cfg: &KernelConfig,
) -> Result<Vec<SampleSet>> {
    phase_settings
        .iter()
        .enumerate()
        .map(|(i, phases)| {
            let c = circuit.with_phases(phases)?;
            sample_circuit(&c, ModelTag::Gbs, count, derive_seed(seed, i as u64), Some(i), cfg)
        })
        .collect()
}

/// Pearson chi-square statistic and p-value of observed counts against
/// expected probabilities. Cells with expected count below `min_expected`
/// are pooled into one cell.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> Result<(f64, usize, f64)> {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    if observed.len() != probs.len() {
        return Err(GbsError::Argument("observed and expected lengths differ".into()));
    }
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n * p;
        if e < min_expected {
            pool_obs += o as f64;
            pool_exp += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pool_exp > 0.0 {
        stat += (pool_obs - pool_exp).powi(2) / pool_exp;
        cells += 1;
    } else if pool_obs > 0.0 {
        return Err(GbsError::Degenerate("observed counts in cells of zero probability".into()));
    }
    if cells < 2 {
        return Err(GbsError::Degenerate("fewer than two chi-square cells".into()));
    }
    let dof = cells - 1;
    let p = 1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(stat);
    Ok((stat, dof, p))
}

/// Occurrence counts of each pattern index in a sample list.
pub fn pattern_counts(patterns: &[ClickPattern], m: usize) -> Vec<u64> {
    assert!(m <= 24, "pattern_counts is for enumerable mode counts");
    let mut counts = vec![0u64; 1 << m];
    for p in patterns {
        let idx = p.bits().iter().enumerate().fold(0usize, |acc, (i, &b)| acc | (usize::from(b) << i));
        counts[idx] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{haar_random_unitary, paired_squeezers, GaussianState, SqueezerSpec};
    use crate::threshold::enumerate_distribution;

    #[test]
    fn tmss_frequencies() {
        let s = GaussianState::from_squeezers(&[SqueezerSpec::new(0.5, 0.0, (0, 1))], 2).unwrap();
        let n = 10_000;
        let samples = exact_sample(&s, n, 3, &KernelConfig::default()).unwrap();
        let counts = pattern_counts(&samples, 2);
        assert_eq!(counts[0b01] + counts[0b10], 0);
        let p11 = 0.5f64.tanh().powi(2);
        let sigma = (p11 * (1.0 - p11) / n as f64).sqrt();
        let f11 = counts[0b11] as f64 / n as f64;
        assert!((f11 - p11).abs() < 3.0 * sigma, "f11 = {f11}");
    }

    #[test]
    fn vacuum_samples_are_dark() {
        let s = GaussianState::vacuum(5);
        let samples = exact_sample(&s, 300, 1, &KernelConfig::default()).unwrap();
        assert!(samples.iter().all(|p| p.click_count() == 0));
    }

    #[test]
    fn determinism_and_chunk_independence() {
        let c = CircuitSpec::ideal(haar_random_unitary(6, 2), paired_squeezers(&[0.6, 0.4], &[0.0, 1.0]))
            .with_uniform_transmission(0.8);
        let cfg = KernelConfig::default();
        for tag in ModelTag::ALL {
            let a = sample_circuit(&c, tag, 700, 11, None, &cfg).unwrap();
            let b = sample_circuit(&c, tag, 700, 11, None, &cfg).unwrap();
            assert_eq!(a, b, "{tag}");
            // the first 300 of 700 equal a 300-sample draw: streams are per index
            let short = sample_circuit(&c, tag, 300, 11, None, &cfg).unwrap();
            assert_eq!(&a.patterns[..300], &short.patterns[..], "{tag}");
        }
    }

    #[test]
    fn gbs_chi_square_small() {
        let c = CircuitSpec::ideal(haar_random_unitary(4, 8), paired_squeezers(&[0.7, 0.5], &[0.3, 1.0]))
            .with_uniform_transmission(0.75);
        let cfg = KernelConfig::default();
        let model = circuit_model(&c, ModelTag::Gbs).unwrap();
        let probs = enumerate_distribution(model.as_ref(), &cfg).unwrap();
        let set = sample_circuit(&c, ModelTag::Gbs, 20_000, 5, None, &cfg).unwrap();
        let (_, _, p) = chi_square_gof(&pattern_counts(&set.patterns, 4), &probs, 5.0).unwrap();
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn phase_sweep_records_indices() {
        let c = CircuitSpec::ideal(haar_random_unitary(4, 1), paired_squeezers(&[0.5, 0.5], &[0.0, 0.0]));
        let sets = phase_sweep(&c, &[vec![0.0, 1.0], vec![2.0, 0.5], vec![0.0, 1.0]], 50, 9, &KernelConfig::default())
            .unwrap();
        assert_eq!(sets.len(), 3);
        assert_eq!(sets[2].phase_index, Some(2));
        assert_eq!(sets[0].fingerprint, sets[2].fingerprint);
        assert_ne!(sets[0].patterns, sets[2].patterns);
        assert!(phase_sweep(&c, &[vec![0.0]], 5, 1, &KernelConfig::default()).is_err());
    }

    #[test]
    fn global_phase_with_diagonal_unitary() {
        use num_complex::Complex64;
        let d = crate::linalg::CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::from_polar(1.0, 0.3),
            Complex64::from_polar(1.0, 1.3),
            Complex64::from_polar(1.0, -0.4),
            Complex64::from_polar(1.0, 2.0),
        ]));
        let c = CircuitSpec::ideal(d, paired_squeezers(&[0.6, 0.4], &[0.2, 0.9])).with_uniform_transmission(0.7);
        let shifted = c.with_phases(&[0.2 + 1.7, 0.9 + 1.7]).unwrap();
        let cfg = KernelConfig::default();
        let a = enumerate_distribution(circuit_model(&c, ModelTag::Gbs).unwrap().as_ref(), &cfg).unwrap();
        let b = enumerate_distribution(circuit_model(&shifted, ModelTag::Gbs).unwrap().as_ref(), &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn model_tag_parsing() {
        for t in ModelTag::ALL {
            assert_eq!(t.as_str().parse::<ModelTag>().unwrap(), t);
        }
        assert!("laser".parse::<ModelTag>().is_err());
    }
}
