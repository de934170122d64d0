use num_complex::Complex64;
use rand::Rng;

use super::{parallel_draw, sample_rng, ChainSampler};
use crate::error::{GbsError, Result};
use crate::gaussian::{CircuitSpec, GaussianState, SqueezerSpec};
use crate::linalg::CMatrix;
use crate::threshold::{ClickModel, ClickPattern, KernelConfig, VacuumSource};

/// Thermal light with the same per-mode photon number as the squeezed input
/// (`N_ii = sinh^2 r`) and no pairing correlations.
pub fn mockup_thermal_state(squeezers: &[SqueezerSpec], m: usize) -> Result<GaussianState> {
    let squeezed = GaussianState::from_squeezers(squeezers, m)?;
    GaussianState::from_blocks(squeezed.normal_block().clone(), CMatrix::zeros(m, m))
}

/// Independent per-mode click probabilities of laser light matched in
/// brightness to the squeezers: both modes of squeezer `k` carry amplitude
/// `sinh(r_k) e^{i phi_k / 2}`.
pub fn mockup_coherent_clickprobs(circuit: &CircuitSpec) -> Result<Vec<f64>> {
    Ok(CoherentModel::from_circuit(circuit)?.click_probs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentModel {
    pub click_probs: Vec<f64>,
}

impl CoherentModel {
    pub fn from_circuit(circuit: &CircuitSpec) -> Result<Self> {
        circuit.validate()?;
        let m = circuit.mode_count;
        let mut alpha = nalgebra::DVector::<Complex64>::zeros(m);
        for sq in &circuit.squeezers {
            let a = Complex64::from_polar(sq.r.sinh(), sq.phase / 2.0);
            alpha[sq.modes.0] = a;
            alpha[sq.modes.1] = a;
        }
        let beta = &circuit.unitary * alpha;
        let eta = circuit.effective_transmission();
        let keep = 1.0 - circuit.dark_count_prob;
        let click_probs = (0..m).map(|i| 1.0 - keep * (-eta[i] * beta[i].norm_sqr()).exp()).collect();
        Ok(CoherentModel { click_probs })
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<ClickPattern> {
        parallel_draw(count, |range| {
            Ok(range
                .map(|i| {
                    let mut rng = sample_rng(seed, i as u64);
                    ClickPattern::new(self.click_probs.iter().map(|&p| rng.random::<f64>() < p).collect())
                })
                .collect())
        })
        .expect("coherent sampling is infallible")
    }
}

impl ClickModel for CoherentModel {
    fn mode_count(&self) -> usize {
        self.click_probs.len()
    }

    fn marginal_pattern_probability(&self, subsystem: &[usize], bits: &[bool], _cfg: &KernelConfig) -> Result<f64> {
        check_subsystem(subsystem, bits, self.click_probs.len())?;
        Ok(subsystem
            .iter()
            .zip(bits)
            .map(|(&i, &b)| if b { self.click_probs[i] } else { 1.0 - self.click_probs[i] })
            .product())
    }
}

/// Every pattern equally likely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformModel {
    pub m: usize,
}

impl UniformModel {
    pub fn new(m: usize) -> Self {
        UniformModel { m }
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<ClickPattern> {
        parallel_draw(count, |range| {
            Ok(range
                .map(|i| {
                    let mut rng = sample_rng(seed, i as u64);
                    ClickPattern::new((0..self.m).map(|_| rng.random::<bool>()).collect())
                })
                .collect())
        })
        .expect("uniform sampling is infallible")
    }
}

impl ClickModel for UniformModel {
    fn mode_count(&self) -> usize {
        self.m
    }

    fn marginal_pattern_probability(&self, subsystem: &[usize], bits: &[bool], _cfg: &KernelConfig) -> Result<f64> {
        check_subsystem(subsystem, bits, self.m)?;
        Ok(uniform_prob(subsystem.len()))
    }
}

/// `2^-m`; underflows to zero beyond `m = 1074`, see [`uniform_log_prob`].
pub fn uniform_prob(m: usize) -> f64 {
    0.5f64.powi(m as i32)
}

/// `-m ln 2`.
pub fn uniform_log_prob(m: usize) -> f64 {
    -(m as f64) * std::f64::consts::LN_2
}

/// Each squeezer propagates alone; sources are independent and their
/// clicks combine by OR, so the dark probability of a set is the product of
/// the per-source dark probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinguishableModel {
    pub sources: Vec<GaussianState>,
    pub dark_count_prob: f64,
    m: usize,
}

impl DistinguishableModel {
    pub fn from_circuit(circuit: &CircuitSpec) -> Result<Self> {
        circuit.validate()?;
        let sources = circuit
            .squeezers
            .iter()
            .map(|sq| circuit.propagate(&GaussianState::from_squeezers(std::slice::from_ref(sq), circuit.mode_count)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(DistinguishableModel { sources, dark_count_prob: circuit.dark_count_prob, m: circuit.mode_count })
    }

    /// Samples every source on its own with the chain rule and ORs the
    /// patterns, then adds dark counts.
    pub fn sample(&self, count: usize, seed: u64, cfg: &KernelConfig) -> Result<Vec<ClickPattern>> {
        parallel_draw(count, |range| {
            let mut samplers: Vec<_> = self.sources.iter().map(|s| ChainSampler::new(s, cfg)).collect();
            range
                .map(|i| {
                    let mut rng = sample_rng(seed, i as u64);
                    let mut acc = ClickPattern::zeros(self.m);
                    for s in samplers.iter_mut() {
                        acc = acc.or(&s.draw(&mut rng)?);
                    }
                    if self.dark_count_prob > 0.0 {
                        let dark =
                            ClickPattern::new((0..self.m).map(|_| rng.random::<f64>() < self.dark_count_prob).collect());
                        acc = acc.or(&dark);
                    }
                    Ok(acc)
                })
                .collect()
        })
    }
}

impl VacuumSource for DistinguishableModel {
    fn mode_count(&self) -> usize {
        self.m
    }

    fn vacuum_probability_with(&self, modes: &[usize], scratch: &mut Vec<f64>) -> Result<f64> {
        let mut p = (1.0 - self.dark_count_prob).powi(modes.len() as i32);
        for s in &self.sources {
            p *= s.vacuum_probability_with(modes, scratch)?;
        }
        Ok(p)
    }
}

/// Exact pattern probability of the distinguishable-source mockup.
pub fn mockup_distinguishable_prob(circuit: &CircuitSpec, pattern: &ClickPattern, cfg: &KernelConfig) -> Result<f64> {
    let model = DistinguishableModel::from_circuit(circuit)?;
    Ok(crate::threshold::pattern_probability(&model, pattern, cfg)?.probability)
}

fn check_subsystem(subsystem: &[usize], bits: &[bool], m: usize) -> Result<()> {
    if subsystem.len() != bits.len() {
        return Err(GbsError::Argument(format!("sub-pattern has {} bits for {} modes", bits.len(), subsystem.len())));
    }
    crate::gaussian::check_mode_set(subsystem, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{haar_random_unitary, paired_squeezers};
    use crate::samplers::{chi_square_gof, circuit_model, pattern_counts, sample_circuit, ModelTag};
    use crate::threshold::enumerate_distribution;
    use approx::assert_abs_diff_eq;

    #[test]
    fn thermal_pair_closed_form() {
        let sq = [SqueezerSpec::new(0.5, 0.4, (0, 1))];
        let t = mockup_thermal_state(&sq, 2).unwrap();
        let s2 = 0.5f64.sinh().powi(2);
        assert_abs_diff_eq!(t.vacuum_probability(&[0, 1]).unwrap(), 1.0 / (1.0 + s2).powi(2), epsilon = 1e-14);
        assert_abs_diff_eq!(t.vacuum_probability(&[0, 1]).unwrap(), 0.61850, epsilon = 1e-5);
        let g = GaussianState::from_squeezers(&sq, 2).unwrap();
        assert_eq!(t.mean_photon_number(), g.mean_photon_number());
        let zero = mockup_thermal_state(&[SqueezerSpec::new(0.0, 0.0, (0, 1))], 2).unwrap();
        assert_eq!(zero, GaussianState::vacuum(2));
    }

    #[test]
    fn coherent_click_probabilities() {
        let id = CMatrix::identity(4, 4);
        let c = CircuitSpec::ideal(id.clone(), paired_squeezers(&[0.0, 0.0], &[0.3, 0.1]));
        assert!(mockup_coherent_clickprobs(&c).unwrap().iter().all(|&p| p == 0.0));
        let c = CircuitSpec::ideal(id, paired_squeezers(&[0.5], &[1.0]));
        let p = mockup_coherent_clickprobs(&c).unwrap();
        assert_abs_diff_eq!(p[0], 1.0 - (-0.5f64.sinh().powi(2)).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 0.23779, epsilon = 1e-5);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn coherent_brightness_matches_input() {
        let c = CircuitSpec::ideal(haar_random_unitary(6, 3), paired_squeezers(&[0.3, 0.8, 0.5], &[0.1, 2.0, 4.0]));
        let model = CoherentModel::from_circuit(&c).unwrap();
        let photons: f64 = model.click_probs.iter().map(|p| -(1.0 - p).ln()).sum();
        let gbs = c.input_state().unwrap().mean_photon_number();
        assert_abs_diff_eq!(photons, gbs, epsilon = 1e-12);
    }

    #[test]
    fn distinguishable_single_source_is_gbs() {
        let c = CircuitSpec::ideal(haar_random_unitary(4, 6), paired_squeezers(&[0.7], &[0.5])).with_uniform_transmission(0.8);
        let cfg = KernelConfig::default();
        let gbs = c.output_state().unwrap();
        for idx in 0..16 {
            let p = ClickPattern::from_index(idx, 4);
            let a = mockup_distinguishable_prob(&c, &p, &cfg).unwrap();
            let b = crate::threshold::pattern_probability(&gbs, &p, &cfg).unwrap().probability;
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn distinguishable_two_sources() {
        let c = CircuitSpec::ideal(haar_random_unitary(4, 2), paired_squeezers(&[0.6, 0.4], &[0.5, 1.5]))
            .with_uniform_transmission(0.9);
        let cfg = KernelConfig::default();
        let model = DistinguishableModel::from_circuit(&c).unwrap();
        let dist = enumerate_distribution(&model, &cfg).unwrap();
        assert_abs_diff_eq!(dist.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let all = [0, 1, 2, 3];
        let prod: f64 = model.sources.iter().map(|s| s.vacuum_probability(&all).unwrap()).product();
        assert_abs_diff_eq!(dist[0], prod, epsilon = 1e-15);

        let set = sample_circuit(&c, ModelTag::Distinguishable, 40_000, 8, None, &cfg).unwrap();
        let (_, _, p) = chi_square_gof(&pattern_counts(&set.patterns, 4), &dist, 5.0).unwrap();
        assert!(p > 0.01, "p = {p}");

        // OR only adds clicks: mean click number exceeds each single source's
        let mean = |ps: &[ClickPattern]| ps.iter().map(|p| p.click_count()).sum::<usize>() as f64 / ps.len() as f64;
        let one = crate::samplers::exact_sample(&model.sources[0], 40_000, 8, &cfg).unwrap();
        assert!(mean(&set.patterns) > mean(&one));
    }

    #[test]
    fn uniform_model() {
        assert_eq!(uniform_prob(3), 0.125);
        assert_abs_diff_eq!(uniform_log_prob(144) / std::f64::consts::LN_10, -43.348319375613, epsilon = 1e-9);
        assert!((uniform_prob(144) - 4.484155085839415e-44).abs() < 1e-58);
        let u = UniformModel::new(1);
        let s = u.sample(10_000, 4);
        let f = s.iter().filter(|p| p.get(0)).count() as f64 / 1e4;
        assert!((f - 0.5).abs() < 3.0 * 0.005);
        let u8m = UniformModel::new(8);
        let s = u8m.sample(20_000, 5);
        let mean = s.iter().map(|p| p.click_count()).sum::<usize>() as f64 / 2e4;
        assert!((mean - 4.0).abs() < 0.05);
    }

    #[test]
    fn all_models_normalised() {
        let c = CircuitSpec::ideal(haar_random_unitary(5, 9), paired_squeezers(&[0.6, 0.3], &[0.5, 1.5]))
            .with_uniform_transmission(0.7);
        let c = CircuitSpec { dark_count_prob: 0.02, ..c };
        for tag in ModelTag::ALL {
            let m = circuit_model(&c, tag).unwrap();
            let total: f64 = enumerate_distribution(m.as_ref(), &KernelConfig::default()).unwrap().iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }
}
