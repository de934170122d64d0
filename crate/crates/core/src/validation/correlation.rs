//! Click-indicator moments, two-point correlations and truncated
//! (connected) correlations.

use std::collections::HashMap;

use crate::error::{GbsError, Result};
use crate::samplers::SampleSet;
use crate::threshold::{ClickModel, KernelConfig};

/// Largest order for truncated correlations from a model (2^k marginals).
pub const MAX_THEORY_ORDER: usize = 8;
/// Largest order for truncated correlations from samples.
pub const MAX_EMPIRICAL_ORDER: usize = 12;
/// Largest `k` accepted by [`set_partitions`].
pub const MAX_PARTITION_SIZE: usize = 12;
/// Group count of the delete-a-group jackknife.
pub const JACKKNIFE_GROUPS: usize = 20;

/// Source of joint click moments `E[X_i1 ... X_ik]`.
pub trait MomentSource {
    fn mode_count(&self) -> usize;
    /// Largest subset size for truncated correlations.
    fn max_order(&self) -> usize;
    /// Joint click moment of `modes`; the empty set gives 1.
    fn moment(&self, modes: &[usize]) -> Result<f64>;
}

/// Plug-in moments of a sample set, stored as per-mode bitsets over samples.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    m: usize,
    n: usize,
    columns: Vec<Vec<u64>>,
}

impl EmpiricalMoments {
    pub fn new(samples: &SampleSet) -> Result<Self> {
        if samples.is_empty() {
            return Err(GbsError::Argument("empty sample set".into()));
        }
        let m = samples.mode_count;
        let n = samples.len();
        let words = n.div_ceil(64);
        let mut columns = vec![vec![0u64; words]; m];
        for (s, p) in samples.patterns.iter().enumerate() {
            for mode in p.clicked_modes() {
                columns[mode][s / 64] |= 1 << (s % 64);
            }
        }
        Ok(EmpiricalMoments { m, n, columns })
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    /// Samples in `range` (by index) where every mode in `modes` clicked.
    fn joint_count(&self, modes: &[usize], range: std::ops::Range<usize>) -> u64 {
        if range.is_empty() {
            return 0;
        }
        let (first, last) = (range.start / 64, (range.end - 1) / 64);
        let mut total = 0u64;
        for w in first..=last {
            let mut word = u64::MAX;
            if w == first {
                word &= u64::MAX << (range.start % 64);
            }
            if w == last && range.end % 64 != 0 {
                word &= (1u64 << (range.end % 64)) - 1;
            }
            for &mode in modes {
                word &= self.columns[mode][w];
            }
            total += word.count_ones() as u64;
        }
        total
    }
}

impl MomentSource for EmpiricalMoments {
    fn mode_count(&self) -> usize {
        self.m
    }

    fn max_order(&self) -> usize {
        MAX_EMPIRICAL_ORDER
    }

    fn moment(&self, modes: &[usize]) -> Result<f64> {
        crate::gaussian::check_mode_set(modes, self.m)?;
        Ok(self.joint_count(modes, 0..self.n) as f64 / self.n as f64)
    }
}

/// Exact moments of a click model: `E[prod X] = P(all listed modes click)`.
pub struct ModelMoments<'a> {
    pub model: &'a dyn ClickModel,
    pub cfg: KernelConfig,
}

impl<'a> ModelMoments<'a> {
    pub fn new(model: &'a dyn ClickModel) -> Self {
        ModelMoments { model, cfg: KernelConfig::default() }
    }
}

impl MomentSource for ModelMoments<'_> {
    fn mode_count(&self) -> usize {
        self.model.mode_count()
    }

    fn max_order(&self) -> usize {
        MAX_THEORY_ORDER
    }

    fn moment(&self, modes: &[usize]) -> Result<f64> {
        if modes.is_empty() {
            return Ok(1.0);
        }
        self.model.marginal_click_probability(modes, &self.cfg)
    }
}

/// Symmetric two-point matrix stored as its `M(M-1)/2` upper-triangle
/// entries in row order `(0,1), (0,2), ..., (M-2,M-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    m: usize,
    values: Vec<f64>,
}

impl PairMatrix {
    pub fn from_values(m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * m.saturating_sub(1) / 2 {
            return Err(GbsError::Argument(format!("{} pair entries for {m} modes", values.len())));
        }
        Ok(PairMatrix { m, values })
    }

    pub fn mode_count(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * (2 * self.m - i - 1) / 2 + (j - i - 1)
    }

    /// Entry `(i, j)` for `i != j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i != j && i < self.m && j < self.m, "pair ({i}, {j}) out of range");
        self.values[self.offset(i, j)]
    }
}

/// `C_ij = E[X_i X_j] - E[X_i] E[X_j]` for all pairs.
pub fn two_point_correlation(source: &dyn MomentSource) -> Result<PairMatrix> {
    let m = source.mode_count();
    let singles = (0..m).map(|i| source.moment(&[i])).collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            values.push(pair_cumulant(source.moment(&[i, j])?, singles[i], singles[j]));
        }
    }
    PairMatrix::from_values(m, values)
}

/// Shared by the two-point matrix and order-2 truncated correlations so both
/// agree bit for bit.
fn pair_cumulant(joint: f64, a: f64, b: f64) -> f64 {
    joint - a * b
}

/// Empirical two-point correlations of a sample set.
pub fn empirical_two_point(samples: &SampleSet) -> Result<PairMatrix> {
    two_point_correlation(&EmpiricalMoments::new(samples)?)
}

/// Half the L1 distance between the L1-normalised absolute correlation
/// vectors; lies in `[0, 1]`.
pub fn correlation_distance(a: &PairMatrix, b: &PairMatrix) -> Result<f64> {
    if a.m != b.m {
        return Err(GbsError::Argument(format!("correlation matrices for {} and {} modes", a.m, b.m)));
    }
    let na: f64 = a.values.iter().map(|v| v.abs()).sum();
    let nb: f64 = b.values.iter().map(|v| v.abs()).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(GbsError::Degenerate("correlation vector with zero norm".into()));
    }
    let d: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x.abs() / na - y.abs() / nb).abs()).sum();
    Ok((0.5 * d).clamp(0.0, 1.0))
}

/// Pairwise correlation distances between sample groups. Off-diagonal
/// entries compare whole groups; each diagonal entry compares the two halves
/// of one group and serves as its statistical floor.
pub fn correlation_group_distance_matrix(groups: &[SampleSet]) -> Result<Vec<Vec<f64>>> {
    let full = groups.iter().map(empirical_two_point).collect::<Result<Vec<_>>>()?;
    if let Some(g) = full.iter().find(|g| g.m != full[0].m) {
        return Err(GbsError::Argument(format!("groups mix {} and {} modes", full[0].m, g.m)));
    }
    let g = groups.len();
    let mut d = vec![vec![0.0; g]; g];
    for a in 0..g {
        let (h1, h2) = groups[a].split_half();
        d[a][a] = correlation_distance(&empirical_two_point(&h1)?, &empirical_two_point(&h2)?)?;
        for b in (a + 1)..g {
            let v = correlation_distance(&full[a], &full[b])?;
            d[a][b] = v;
            d[b][a] = v;
        }
    }
    Ok(d)
}

/// Normalised mean `<C> M^2 / N_in^2` and skewness of the pair entries.
pub fn correlation_stats(c: &PairMatrix, output_modes: usize, input_modes: usize) -> Result<(f64, f64)> {
    let v = c.values();
    if v.is_empty() {
        return Err(GbsError::Argument("no correlation entries".into()));
    }
    if input_modes == 0 {
        return Err(GbsError::Argument("input mode count must be positive".into()));
    }
    let n = v.len() as f64;
    let m1 = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| x * x).sum::<f64>() / n;
    let m3 = v.iter().map(|x| x * x * x).sum::<f64>() / n;
    let var = m2 - m1 * m1;
    // the raw-moment variance can lose all digits for near-constant input
    let centred_var = v.iter().map(|x| (x - m1).powi(2)).sum::<f64>() / n;
    if centred_var <= f64::EPSILON * m2.max(f64::MIN_POSITIVE) {
        return Err(GbsError::Degenerate("correlation entries have zero variance".into()));
    }
    let skew = (m3 - 3.0 * m2 * m1 + 2.0 * m1.powi(3)) / var.powi(3).sqrt();
    let mean = m1 * (output_modes as f64).powi(2) / (input_modes as f64).powi(2);
    Ok((mean, skew))
}

/// A set partition of `{0, ..., k-1}` as a restricted growth string:
/// `labels[i]` is the block of element `i`, and block labels appear in
/// increasing order of first use.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    pub labels: Vec<u8>,
}

impl SetPartition {
    pub fn block_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&b| b as usize + 1)
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.block_count()];
        for (i, &b) in self.labels.iter().enumerate() {
            out[b as usize].push(i);
        }
        out
    }
}

/// Calls `f` on every set partition of `{0, ..., k-1}`.
pub fn for_each_set_partition(k: usize, mut f: impl FnMut(&SetPartition)) -> Result<()> {
    if k == 0 || k > MAX_PARTITION_SIZE {
        return Err(GbsError::Capacity(format!("set partitions supported for 1..={MAX_PARTITION_SIZE} elements, got {k}")));
    }
    let mut p = SetPartition { labels: vec![0; k] };
    // max label among the first i elements, used to bound the next label
    let mut prefix_max = vec![0u8; k];
    loop {
        f(&p);
        // rightmost position that can be incremented
        let mut i = k - 1;
        loop {
            if i == 0 {
                return Ok(());
            }
            if p.labels[i] <= prefix_max[i - 1] {
                break;
            }
            i -= 1;
        }
        p.labels[i] += 1;
        prefix_max[i] = prefix_max[i - 1].max(p.labels[i]);
        for j in (i + 1)..k {
            p.labels[j] = 0;
            prefix_max[j] = prefix_max[i];
        }
    }
}

/// All set partitions of `{0, ..., k-1}`; there are Bell(k) of them.
pub fn set_partitions(k: usize) -> Result<Vec<SetPartition>> {
    let mut out = Vec::new();
    for_each_set_partition(k, |p| out.push(p.clone()))?;
    Ok(out)
}

/// Cumulants of every subset of `k` modes, indexed by bitmask over the
/// positions in `modes`. Uses the moment recursion
/// `E(S) = sum_{T subset S, T contains min S} kappa(T) E(S \ T)`, which
/// regroups the partition sum by the block holding the first element.
fn cumulants_from_moments(moments: &[f64], k: usize) -> Vec<f64> {
    let full = 1usize << k;
    let mut kappa = vec![0.0; full];
    for s in 1..full {
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        let mut value = moments[s];
        // proper subsets T of S containing the lowest element: T = low | sub, sub a proper subset of rest
        let mut sub = rest;
        while sub != 0 {
            sub = (sub - 1) & rest;
            let t = low | sub;
            value -= kappa[t] * moments[s ^ t];
        }
        // order-2 cumulant routed through the shared pair arithmetic
        if s.count_ones() == 2 {
            let high = rest;
            value = pair_cumulant(moments[s], moments[low], moments[high]);
        }
        kappa[s] = value;
    }
    kappa
}

fn check_order(modes: &[usize], source: &dyn MomentSource) -> Result<()> {
    let k = modes.len();
    if k == 0 {
        return Err(GbsError::Argument("truncated correlation needs at least one mode".into()));
    }
    if k > source.max_order() {
        return Err(GbsError::Capacity(format!("order {k} exceeds the limit {} for this source", source.max_order())));
    }
    crate::gaussian::check_mode_set(modes, source.mode_count())
}

fn subset_modes(modes: &[usize], mask: usize) -> Vec<usize> {
    modes.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &m)| m).collect()
}

/// Truncated correlation `kappa(X_modes)`, memoised over all subsets.
pub fn truncated_correlation(source: &dyn MomentSource, modes: &[usize]) -> Result<f64> {
    check_order(modes, source)?;
    let k = modes.len();
    let moments = (0..1usize << k).map(|mask| source.moment(&subset_modes(modes, mask))).collect::<Result<Vec<_>>>()?;
    Ok(cumulants_from_moments(&moments, k)[(1 << k) - 1])
}

/// Empirical truncated correlation with a delete-a-group jackknife
/// standard error over [`JACKKNIFE_GROUPS`] contiguous sample groups.
pub fn empirical_truncated_correlation(moments: &EmpiricalMoments, modes: &[usize]) -> Result<(f64, f64)> {
    check_order(modes, moments)?;
    let k = modes.len();
    let n = moments.n;
    let groups = JACKKNIFE_GROUPS.min(n);
    if groups < 2 {
        return Err(GbsError::Argument("need at least two samples for an error estimate".into()));
    }
    let bounds: Vec<usize> = (0..=groups).map(|g| g * n / groups).collect();
    let masks = 1usize << k;
    // counts[g][mask]
    let counts: Vec<Vec<u64>> = (0..groups)
        .map(|g| (0..masks).map(|mask| moments.joint_count(&subset_modes(modes, mask), bounds[g]..bounds[g + 1])).collect())
        .collect();
    let totals: Vec<u64> = (0..masks).map(|mask| counts.iter().map(|c| c[mask]).sum()).collect();

    let kappa_of = |counts: &[u64], samples: usize| -> f64 {
        let mom: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
        cumulants_from_moments(&mom, k)[masks - 1]
    };
    let estimate = kappa_of(&totals, n);
    let leave_out: Vec<f64> = (0..groups)
        .map(|g| {
            let kept: Vec<u64> = totals.iter().zip(&counts[g]).map(|(t, c)| t - c).collect();
            kappa_of(&kept, n - (bounds[g + 1] - bounds[g]))
        })
        .collect();
    let mean = leave_out.iter().sum::<f64>() / groups as f64;
    let var = leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (groups - 1) as f64 / groups as f64;
    Ok((estimate, var.sqrt()))
}

/// Cumulants of several subsets from one model, sharing marginals.
pub fn theory_truncated_correlations(source: &ModelMoments<'_>, subsets: &[Vec<usize>]) -> Result<Vec<f64>> {
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    subsets
        .iter()
        .map(|modes| {
            check_order(modes, source)?;
            let k = modes.len();
            let moments = (0..1usize << k)
                .map(|mask| {
                    let mut sub = subset_modes(modes, mask);
                    sub.sort_unstable();
                    if let Some(&v) = cache.get(&sub) {
                        return Ok(v);
                    }
                    let v = source.moment(&sub)?;
                    cache.insert(sub, v);
                    Ok(v)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(cumulants_from_moments(&moments, k)[(1 << k) - 1])
        })
        .collect()
}
