//! Exact threshold-detector click statistics.
//!
//! Every probability is an inclusion-exclusion sum over vacuum probabilities:
//!
//! ```text
//! P(S clicks, D dark) = sum_{Z subset S} (-1)^{|Z|} P0(Z u D)
//! ```
//!
//! which is the Torontonian of the state written out term by term. The sum
//! has `2^|S|` terms regardless of the number of modes, so a `k`-click
//! marginal costs as much as a `k`-click pattern.
//!
//! Terms are visited in binary-counter order of `Z` and grouped into fixed
//! size chunks. Each chunk is summed with a compensated accumulator and the
//! chunk totals are reduced in chunk order, so the result does not depend on
//! how many worker threads evaluated the chunks.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{GbsError, Result};
use crate::gaussian::{check_mode_set, GaussianState};

/// Tolerance below zero (or above one) before a sum is called unstable.
pub const PROBABILITY_TOL: f64 = 1e-9;
/// Default cap on the number of clicked modes in one evaluation.
pub const DEFAULT_GUARD_LIMIT: usize = 26;

/// Outcome of `M` threshold detectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClickPattern {
    bits: Vec<bool>,
}

impl ClickPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        ClickPattern { bits }
    }

    pub fn zeros(m: usize) -> Self {
        ClickPattern { bits: vec![false; m] }
    }

    /// Pattern whose bits are the low `m` bits of `index`, mode 0 first.
    pub fn from_index(index: u64, m: usize) -> Self {
        ClickPattern { bits: (0..m).map(|i| index >> i & 1 == 1).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, mode: usize) -> bool {
        self.bits[mode]
    }

    pub fn click_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn clicked_modes(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    /// Bits on `modes`, in that order.
    pub fn restrict(&self, modes: &[usize]) -> ClickPattern {
        ClickPattern { bits: modes.iter().map(|&i| self.bits[i]).collect() }
    }

    /// Elementwise OR.
    pub fn or(&self, other: &ClickPattern) -> ClickPattern {
        assert_eq!(self.len(), other.len());
        ClickPattern { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect() }
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ClickPattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid character {other:?} at column {}", i + 1)),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(ClickPattern::new)
    }
}

/// How the alternating subset sum is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    /// Neumaier-compensated double precision.
    #[default]
    Compensated,
    /// Double-double (about 106-bit) accumulator.
    DoubleDouble,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub guard_limit: usize,
    pub summation: Summation,
    /// Subsets per work chunk, as a power of two. Fixed independently of the
    /// thread count.
    pub chunk_bits: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { guard_limit: DEFAULT_GUARD_LIMIT, summation: Summation::Compensated, chunk_bits: 10 }
    }
}

/// Anything that can report the probability that a set of modes is dark.
pub trait VacuumSource: Sync {
    fn mode_count(&self) -> usize;

    /// `P(no detector in modes clicks)`; `scratch` is reusable workspace.
    fn vacuum_probability_with(&self, modes: &[usize], scratch: &mut Vec<f64>) -> Result<f64>;
}

impl VacuumSource for GaussianState {
    fn mode_count(&self) -> usize {
        GaussianState::mode_count(self)
    }

    fn vacuum_probability_with(&self, modes: &[usize], scratch: &mut Vec<f64>) -> Result<f64> {
        GaussianState::vacuum_probability_with(self, modes, scratch)
    }
}

/// A Gaussian state seen through detectors with independent dark counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedState {
    pub state: GaussianState,
    pub dark_count_prob: f64,
}

impl DetectedState {
    pub fn new(state: GaussianState, dark_count_prob: f64) -> Self {
        DetectedState { state, dark_count_prob }
    }
}

impl VacuumSource for DetectedState {
    fn mode_count(&self) -> usize {
        self.state.mode_count()
    }

    fn vacuum_probability_with(&self, modes: &[usize], scratch: &mut Vec<f64>) -> Result<f64> {
        let p = self.state.vacuum_probability_with(modes, scratch)?;
        Ok(p * (1.0 - self.dark_count_prob).powi(modes.len() as i32))
    }
}

/// A click probability together with the number of subset terms it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOutcome {
    pub probability: f64,
    pub terms: u64,
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[derive(Clone, Copy, Default)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    #[inline]
    fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let lo = self.lo + e;
        let (hi, lo) = two_sum(s, lo);
        self.hi = hi;
        self.lo = lo;
    }
}

/// Partial sum of one chunk, kept as an unevaluated pair.
#[derive(Clone, Copy, Default)]
struct Partial {
    hi: f64,
    lo: f64,
}

fn chunk_sum<V: VacuumSource + ?Sized>(
    source: &V,
    clicked: &[usize],
    dark: &[usize],
    range: std::ops::Range<u64>,
    summation: Summation,
    modes: &mut Vec<usize>,
    scratch: &mut Vec<f64>,
) -> Result<Partial> {
    let mut neu = Neumaier::default();
    let mut dd = DoubleDouble::default();
    for z in range {
        modes.clear();
        modes.extend_from_slice(dark);
        let mut bits = z;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            modes.push(clicked[b]);
            bits &= bits - 1;
        }
        let p = source.vacuum_probability_with(modes, scratch)?;
        let term = if z.count_ones() % 2 == 1 { -p } else { p };
        match summation {
            Summation::Compensated => neu.add(term),
            Summation::DoubleDouble => dd.add(term),
        }
    }
    Ok(match summation {
        Summation::Compensated => Partial { hi: neu.sum, lo: neu.comp },
        Summation::DoubleDouble => Partial { hi: dd.hi, lo: dd.lo },
    })
}

/// `sum_{Z subset clicked} (-1)^{|Z|} P0(Z u dark)`.
pub fn inclusion_exclusion<V: VacuumSource + ?Sized>(
    source: &V,
    clicked: &[usize],
    dark: &[usize],
    cfg: &KernelConfig,
) -> Result<KernelOutcome> {
    let n = clicked.len();
    if n > cfg.guard_limit {
        return Err(GbsError::Capacity(format!(
            "{n} clicked modes exceed the guard limit of {} (2^{n} determinants)",
            cfg.guard_limit
        )));
    }
    if n >= 63 {
        return Err(GbsError::Capacity(format!("{n} clicked modes cannot be enumerated")));
    }
    let total: u64 = 1 << n;
    let chunk: u64 = 1 << cfg.chunk_bits.min(62);
    let n_chunks = total.div_ceil(chunk);
    let range_of = |c: u64| (c * chunk)..((c + 1) * chunk).min(total);

    let partials: Vec<Partial> = if n_chunks == 1 {
        let mut modes = Vec::with_capacity(clicked.len() + dark.len());
        let mut scratch = Vec::new();
        vec![chunk_sum(source, clicked, dark, range_of(0), cfg.summation, &mut modes, &mut scratch)?]
    } else {
        (0..n_chunks)
            .into_par_iter()
            .map_init(
                || (Vec::with_capacity(clicked.len() + dark.len()), Vec::new()),
                |(modes, scratch), c| chunk_sum(source, clicked, dark, range_of(c), cfg.summation, modes, scratch),
            )
            .collect::<Result<Vec<_>>>()?
    };

    let raw = match cfg.summation {
        Summation::Compensated => {
            let mut acc = Neumaier::default();
            for p in &partials {
                acc.add(p.hi);
                acc.add(p.lo);
            }
            acc.sum + acc.comp
        }
        Summation::DoubleDouble => {
            let mut acc = DoubleDouble::default();
            for p in &partials {
                acc.add(p.hi);
                acc.add(p.lo);
            }
            acc.hi + acc.lo
        }
    };
    Ok(KernelOutcome { probability: settle_probability(raw)?, terms: total })
}

fn settle_probability(raw: f64) -> Result<f64> {
    if raw.is_nan() {
        return Err(GbsError::NumericalInstability("probability evaluated to NaN".into()));
    }
    if raw < 0.0 {
        if raw < -PROBABILITY_TOL {
            return Err(GbsError::NumericalInstability(format!("alternating sum gave {raw:e}")));
        }
        if raw < -1e-14 {
            log::warn!("clamping slightly negative probability {raw:e} to zero");
        }
        return Ok(0.0);
    }
    if raw > 1.0 {
        if raw > 1.0 + PROBABILITY_TOL {
            return Err(GbsError::NumericalInstability(format!("alternating sum gave {raw} > 1")));
        }
        return Ok(1.0);
    }
    Ok(raw)
}

/// Probability of a complete click pattern.
pub fn pattern_probability<V: VacuumSource + ?Sized>(
    source: &V,
    pattern: &ClickPattern,
    cfg: &KernelConfig,
) -> Result<KernelOutcome> {
    let m = source.mode_count();
    if pattern.len() != m {
        return Err(GbsError::Argument(format!("pattern has {} modes, state has {m}", pattern.len())));
    }
    let clicked = pattern.clicked_modes();
    let dark: Vec<usize> = (0..m).filter(|&i| !pattern.get(i)).collect();
    inclusion_exclusion(source, &clicked, &dark, cfg)
}

/// Probability that every mode in `clicked` fires, all other modes free.
pub fn marginal_click_probability<V: VacuumSource + ?Sized>(
    source: &V,
    clicked: &[usize],
    cfg: &KernelConfig,
) -> Result<f64> {
    check_mode_set(clicked, source.mode_count())?;
    Ok(inclusion_exclusion(source, clicked, &[], cfg)?.probability)
}

/// Probability of `bits` on the modes `subsystem`, other modes traced out.
pub fn marginal_pattern_probability<V: VacuumSource + ?Sized>(
    source: &V,
    subsystem: &[usize],
    bits: &[bool],
    cfg: &KernelConfig,
) -> Result<f64> {
    check_mode_set(subsystem, source.mode_count())?;
    if bits.len() != subsystem.len() {
        return Err(GbsError::Argument(format!(
            "sub-pattern has {} bits for {} modes",
            bits.len(),
            subsystem.len()
        )));
    }
    let mut clicked = Vec::new();
    let mut dark = Vec::new();
    for (&mode, &b) in subsystem.iter().zip(bits) {
        if b {
            clicked.push(mode);
        } else {
            dark.push(mode);
        }
    }
    Ok(inclusion_exclusion(source, &clicked, &dark, cfg)?.probability)
}

/// A model assigning probabilities to (marginal) click patterns.
pub trait ClickModel: Sync {
    fn mode_count(&self) -> usize;

    fn marginal_pattern_probability(&self, subsystem: &[usize], bits: &[bool], cfg: &KernelConfig) -> Result<f64>;

    fn pattern_probability(&self, pattern: &ClickPattern, cfg: &KernelConfig) -> Result<f64> {
        let all: Vec<usize> = (0..self.mode_count()).collect();
        if pattern.len() != all.len() {
            return Err(GbsError::Argument(format!(
                "pattern has {} modes, model has {}",
                pattern.len(),
                all.len()
            )));
        }
        self.marginal_pattern_probability(&all, pattern.bits(), cfg)
    }

    fn marginal_click_probability(&self, clicked: &[usize], cfg: &KernelConfig) -> Result<f64> {
        self.marginal_pattern_probability(clicked, &vec![true; clicked.len()], cfg)
    }
}

impl<T: VacuumSource> ClickModel for T {
    fn mode_count(&self) -> usize {
        VacuumSource::mode_count(self)
    }

    fn marginal_pattern_probability(&self, subsystem: &[usize], bits: &[bool], cfg: &KernelConfig) -> Result<f64> {
        marginal_pattern_probability(self, subsystem, bits, cfg)
    }
}

/// Probabilities of all `2^M` patterns, indexed as in [`ClickPattern::from_index`].
pub fn enumerate_distribution<C: ClickModel + ?Sized>(model: &C, cfg: &KernelConfig) -> Result<Vec<f64>> {
    let m = model.mode_count();
    if m > 20 {
        return Err(GbsError::Capacity(format!("refusing to enumerate 2^{m} patterns")));
    }
    (0..1u64 << m)
        .into_par_iter()
        .map(|idx| model.pattern_probability(&ClickPattern::from_index(idx, m), cfg))
        .collect()
}
