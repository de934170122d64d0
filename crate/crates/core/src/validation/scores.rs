//! Click-number histograms, the simulability bound and heavy-output scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GbsError, Result};
use crate::samplers::SampleSet;
use crate::threshold::{enumerate_distribution, ClickModel, KernelConfig};

/// Largest mode count for which the heavy-output median is enumerated.
pub const MAX_HOG_MODES: usize = 14;

/// Normalised histogram of click counts `0..=M`.
pub fn click_number_distribution(samples: &SampleSet) -> Vec<f64> {
    let mut h = vec![0.0; samples.mode_count + 1];
    if samples.is_empty() {
        return h;
    }
    for p in &samples.patterns {
        h[p.click_count()] += 1.0;
    }
    let n = samples.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

/// Exact click-number distribution of a model from its full distribution.
pub fn model_click_number_distribution(model: &dyn ClickModel, cfg: &KernelConfig) -> Result<Vec<f64>> {
    let m = model.mode_count();
    let probs = enumerate_distribution(model, cfg)?;
    let mut h = vec![0.0; m + 1];
    for (idx, p) in probs.iter().enumerate() {
        h[(idx as u64).count_ones() as usize] += p;
    }
    Ok(h)
}

/// `1/2 sum_c |h1(c) - h2(c)|`.
pub fn distribution_tvd(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(GbsError::Argument(format!("histograms of length {} and {}", h1.len(), h2.len())));
    }
    Ok((0.5 * h1.iter().zip(h2).map(|(a, b)| (a - b).abs()).sum::<f64>()).clamp(0.0, 1.0))
}

/// Mean TVD between the click-number histogram of `samples` and those of
/// `resamples` bootstrap resamples; the noise level of a histogram of this
/// size.
pub fn bootstrap_tvd_floor(samples: &SampleSet, resamples: usize, seed: u64) -> Result<f64> {
    if samples.is_empty() || resamples == 0 {
        return Err(GbsError::Argument("bootstrap needs samples and at least one resample".into()));
    }
    let base = click_number_distribution(samples);
    let counts: Vec<usize> = samples.patterns.iter().map(|p| p.click_count()).collect();
    let n = counts.len();
    let tvds = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut h = vec![0.0; base.len()];
            for _ in 0..n {
                h[counts[rng.random_range(0..n)]] += 1.0 / n as f64;
            }
            distribution_tvd(&base, &h)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tvds.iter().sum::<f64>() / resamples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonclassicalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs > rhs`: the parameters fall in the efficiently simulable regime.
    pub simulable: bool,
}

/// Simulability bound for `K` squeezers of strength `r` behind transmission
/// `eta`, with dark-count probability `p_dark` and detector efficiency
/// `eta_det`: `lhs = sech(ramp(ln((1 - 2 q) / (eta e^{-2r} + 1 - eta))) / 2)`
/// with `q = p_dark / eta_det`, `rhs = exp(-eps^2 / (4 K))`.
///
/// `q = 1/2` is accepted as the fully noisy limit, where `lhs = 1`.
pub fn nonclassicality_check(r: f64, eta: f64, k: usize, eps: f64, p_dark: f64, eta_det: f64) -> Result<NonclassicalityCheck> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(GbsError::Argument(format!("squeezing {r} must be finite and non-negative")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(GbsError::Argument(format!("transmission {eta} outside (0, 1]")));
    }
    if k == 0 {
        return Err(GbsError::Argument("need at least one squeezer".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(GbsError::Argument(format!("epsilon {eps} must be positive")));
    }
    if !(eta_det > 0.0 && eta_det <= 1.0) || !(p_dark >= 0.0) {
        return Err(GbsError::Argument(format!("detector efficiency {eta_det} or dark-count probability {p_dark} invalid")));
    }
    let q = p_dark / eta_det;
    if q > 0.5 {
        return Err(GbsError::Argument(format!("dark-count ratio {q} exceeds 1/2")));
    }
    let lhs = if q == 0.5 {
        1.0
    } else {
        let x = ((1.0 - 2.0 * q) / (eta * (-2.0 * r).exp() + 1.0 - eta)).ln();
        1.0 / (0.5 * x.max(0.0)).cosh()
    };
    let rhs = (-eps * eps / (4.0 * k as f64)).exp();
    Ok(NonclassicalityCheck { lhs, rhs, simulable: lhs > rhs })
}

/// Smallest `eps` at which the bound reports the simulable regime, i.e.
/// where `rhs` drops to `lhs`; zero when `lhs = 1`.
pub fn nonclassicality_crossing_eps(r: f64, eta: f64, k: usize, p_dark: f64, eta_det: f64) -> Result<f64> {
    let lhs = nonclassicality_check(r, eta, k, 1.0, p_dark, eta_det)?.lhs;
    Ok((-4.0 * k as f64 * lhs.ln()).max(0.0).sqrt())
}

/// Median of a model's probabilities over all `2^M` patterns.
pub fn reference_median(model: &dyn ClickModel, cfg: &KernelConfig) -> Result<f64> {
    let m = model.mode_count();
    if m > MAX_HOG_MODES {
        return Err(GbsError::Capacity(format!("heavy-output median needs M <= {MAX_HOG_MODES}, got {m}")));
    }
    let mut probs = enumerate_distribution(model, cfg)?;
    probs.sort_by(f64::total_cmp);
    let n = probs.len();
    Ok(if n % 2 == 1 { probs[n / 2] } else { 0.5 * (probs[n / 2 - 1] + probs[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogScore {
    /// Share of samples above the median, ties counted as one half.
    pub fraction: f64,
    pub std_error: f64,
}

/// Heavy-output fraction of `samples` under `model`.
pub fn hog_fraction(samples: &SampleSet, model: &dyn ClickModel, median: f64, cfg: &KernelConfig) -> Result<HogScore> {
    if model.mode_count() > MAX_HOG_MODES {
        return Err(GbsError::Capacity(format!("heavy-output scoring needs M <= {MAX_HOG_MODES}")));
    }
    if samples.is_empty() {
        return Err(GbsError::Argument("empty sample set".into()));
    }
    let scores = samples
        .patterns
        .par_iter()
        .map(|p| {
            let q = model.pattern_probability(p, cfg)?;
            Ok(if q > median {
                1.0
            } else if q == median {
                0.5
            } else {
                0.0
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = scores.len() as f64;
    let fraction = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - fraction).powi(2)).sum::<f64>() / n;
    Ok(HogScore { fraction, std_error: (var / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{haar_random_unitary, paired_squeezers, CircuitSpec};
    use crate::samplers::UniformModel;
    use crate::samplers::{sample_circuit, ModelTag};
    use crate::threshold::ClickPattern;
    use approx::assert_abs_diff_eq;

    fn set_of(patterns: Vec<ClickPattern>, m: usize) -> SampleSet {
        SampleSet { fingerprint: "t".into(), model: ModelTag::Gbs, mode_count: m, phase_index: None, seed: 0, patterns }
    }

    #[test]
    fn histogram_and_tvd() {
        let s = set_of(vec!["000".parse().unwrap(), "110".parse().unwrap(), "011".parse().unwrap(), "111".parse().unwrap()], 3);
        let h = click_number_distribution(&s);
        assert_eq!(h, vec![0.25, 0.0, 0.5, 0.25]);
        assert_eq!(distribution_tvd(&h, &h).unwrap(), 0.0);
        assert_eq!(distribution_tvd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(distribution_tvd(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn bootstrap_floor_shrinks_with_size() {
        let c = CircuitSpec::ideal(haar_random_unitary(6, 1), paired_squeezers(&[0.8, 0.8], &[0.0, 0.0]));
        let cfg = KernelConfig::default();
        let big = sample_circuit(&c, ModelTag::Gbs, 4000, 2, None, &cfg).unwrap();
        let (small, _) = big.split_half();
        let f_big = bootstrap_tvd_floor(&big, 50, 1).unwrap();
        let f_small = bootstrap_tvd_floor(&small, 50, 1).unwrap();
        assert!(f_big < f_small && f_big > 0.0);
        assert_eq!(f_big, bootstrap_tvd_floor(&big, 50, 1).unwrap());
    }

    #[test]
    fn model_histogram_normalised() {
        let c = CircuitSpec::ideal(haar_random_unitary(5, 1), paired_squeezers(&[0.8, 0.3], &[0.0, 0.0]));
        let h = model_click_number_distribution(&c.output_state().unwrap(), &KernelConfig::default()).unwrap();
        assert_abs_diff_eq!(h.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(h[1], h[1].max(0.0));
    }

    #[test]
    fn bound_edge_cases() {
        let c = nonclassicality_check(0.0, 0.5, 3, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(c.lhs, 1.0);
        assert!(c.simulable);
        let c = nonclassicality_check(2.0, 0.9, 3, 0.1, 0.5, 1.0).unwrap();
        assert_eq!(c.lhs, 1.0);
        assert!(nonclassicality_check(1.0, 0.5, 3, 1.0, 0.6, 1.0).is_err());
        assert!(nonclassicality_check(1.0, 0.0, 3, 1.0, 0.0, 1.0).is_err());
        assert!(nonclassicality_check(1.0, 0.5, 0, 1.0, 0.0, 1.0).is_err());
        assert!(nonclassicality_check(1.0, 0.5, 3, 0.0, 0.0, 1.0).is_err());
        assert!(nonclassicality_check(-0.1, 0.5, 3, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn bound_reference_point() {
        let c = nonclassicality_check(1.0, 0.54, 25, 1.0, 1e-5, 1.0).unwrap();
        // direct evaluation: ln((1 - 2e-5) / (0.54 e^-2 + 0.46)) = 0.62906..., sech(0.31453) = 0.952495
        let x = ((1.0 - 2e-5) / (0.54 * (-2.0f64).exp() + 0.46)).ln();
        assert_abs_diff_eq!(c.lhs, 1.0 / (x / 2.0).cosh(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.lhs, 0.952495, epsilon = 1e-6);
        assert_abs_diff_eq!(c.rhs, 0.99005, epsilon = 1e-5);
        assert!(!c.simulable);
        let eps = nonclassicality_crossing_eps(1.0, 0.54, 25, 1e-5, 1.0).unwrap();
        let at = nonclassicality_check(1.0, 0.54, 25, eps, 1e-5, 1.0).unwrap();
        assert_abs_diff_eq!(at.lhs, at.rhs, epsilon = 1e-12);
    }

    #[test]
    fn bound_monotone_in_r() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let lhs = nonclassicality_check(i as f64 * 0.02, 0.54, 25, 1.0, 1e-5, 0.9).unwrap().lhs;
            assert!(lhs <= prev && lhs > 0.0 && lhs <= 1.0);
            prev = lhs;
        }
    }

    #[test]
    fn uniform_hog_is_half() {
        let u = UniformModel::new(6);
        let cfg = KernelConfig::default();
        let med = reference_median(&u, &cfg).unwrap();
        let s = set_of(u.sample(500, 3), 6);
        assert_eq!(hog_fraction(&s, &u, med, &cfg).unwrap().fraction, 0.5);
        assert!(matches!(reference_median(&UniformModel::new(15), &cfg), Err(GbsError::Capacity(_))));
    }

    #[test]
    fn gbs_samples_are_heavy() {
        let c = CircuitSpec::ideal(haar_random_unitary(8, 4), paired_squeezers(&[0.9, 0.7, 0.8], &[0.0, 0.5, 1.0]))
            .with_uniform_transmission(0.8);
        let cfg = KernelConfig::default();
        let model = c.output_state().unwrap();
        let med = reference_median(&model, &cfg).unwrap();
        let s = sample_circuit(&c, ModelTag::Gbs, 3000, 7, None, &cfg).unwrap();
        let score = hog_fraction(&s, &model, med, &cfg).unwrap();
        assert!(score.fraction > 0.5 + 5.0 * score.std_error, "{score:?}");
    }
}
