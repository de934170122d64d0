//! Brute-force truncated Fock-space simulator, used only to cross-check the
//! Gaussian engine on a handful of modes.
//!
//! The density operator is kept block-diagonal in the total photon number.
//! Passive interferometers conserve photon number, loss lowers it by the same
//! amount on bra and ket, and click detection is diagonal in the Fock basis,
//! so coherences between different totals never reach a click probability;
//! they are discarded when the input is prepared.
//!
//! The squeezed input is truncated to complete total-photon sectors. Every
//! click POVM element is then block-diagonal in the same sectors, so each
//! truncated probability undershoots the exact one by at most the discarded
//! norm (the recorded tail bound), and never overshoots it.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{GbsError, Result};
use crate::gaussian::{validate_squeezers, CircuitSpec, SqueezerSpec};
use crate::linalg::{unitarity_defect, CMatrix};

/// Largest mode count the oracle accepts.
pub const MAX_ORACLE_MODES: usize = 6;
/// Cap on stored density-matrix entries (all sectors together).
pub const MAX_DENSITY_ENTRIES: usize = 12_000_000;
/// Cap on grouped-Ryser inner-loop work for one unitary application.
pub const MAX_PERMANENT_WORK: u64 = 4_000_000_000;
pub const DEFAULT_CUTOFF: usize = 8;

type Occupation = Vec<u8>;

#[derive(Debug, Clone)]
struct Sector {
    basis: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
    rho: CMatrix,
}

impl Sector {
    fn empty(m: usize, total: usize) -> Self {
        let basis = compositions(total, m);
        let index = basis.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        let d = basis.len();
        Sector { basis, index, rho: CMatrix::zeros(d, d) }
    }
}

/// All occupation vectors of `m` modes holding `total` photons, in
/// lexicographic order.
fn compositions(total: usize, m: usize) -> Vec<Occupation> {
    fn rec(left: usize, m: usize, cur: &mut Occupation, out: &mut Vec<Occupation>) {
        if cur.len() + 1 == m {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for n in (0..=left).rev() {
            cur.push(n as u8);
            rec(left - n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m == 0 {
        return out;
    }
    rec(total, m, &mut Vec::with_capacity(m), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Truncated Fock-space density operator.
#[derive(Debug, Clone)]
pub struct FockState {
    m: usize,
    cutoff: usize,
    /// Indexed by total photon number.
    sectors: Vec<Option<Sector>>,
    tail_bound: f64,
}

impl FockState {
    pub fn mode_count(&self) -> usize {
        self.m
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Norm discarded by the input truncation.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn vacuum(m: usize) -> Result<Self> {
        check_modes(m)?;
        let mut s = Sector::empty(m, 0);
        s.rho[(0, 0)] = Complex64::new(1.0, 0.0);
        Ok(FockState { m, cutoff: 0, sectors: vec![Some(s)], tail_bound: 0.0 })
    }

    /// Fock state `|n>`.
    pub fn number_state(occupation: &[u8]) -> Result<Self> {
        let m = occupation.len();
        check_modes(m)?;
        let total: usize = occupation.iter().map(|&n| n as usize).sum();
        let mut sectors: Vec<Option<Sector>> = vec![None; total + 1];
        let mut s = Sector::empty(m, total);
        let i = s.index[occupation];
        s.rho[(i, i)] = Complex64::new(1.0, 0.0);
        sectors[total] = Some(s);
        Ok(FockState { m, cutoff: total, sectors, tail_bound: 0.0 })
    }

    pub fn trace(&self) -> f64 {
        self.sectors.iter().flatten().map(|s| s.rho.trace().re).sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.sectors
            .iter()
            .enumerate()
            .filter_map(|(t, s)| s.as_ref().map(|s| t as f64 * s.rho.trace().re))
            .sum()
    }

    /// Largest Hermiticity defect and most negative eigenvalue over sectors.
    pub fn hermiticity_and_min_eigenvalue(&self) -> (f64, f64) {
        let mut herm = 0.0f64;
        let mut min_eig = f64::INFINITY;
        for s in self.sectors.iter().flatten() {
            herm = herm.max(crate::linalg::max_abs_diff(&s.rho, &s.rho.adjoint()));
            let h = (&s.rho + s.rho.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = h.symmetric_eigenvalues();
            min_eig = min_eig.min(eig.iter().cloned().fold(f64::INFINITY, f64::min));
        }
        (herm, min_eig)
    }

    /// Density-matrix element `<a|rho|b>`; zero across sectors.
    pub fn element(&self, a: &[u8], b: &[u8]) -> Complex64 {
        let ta: usize = a.iter().map(|&n| n as usize).sum();
        let tb: usize = b.iter().map(|&n| n as usize).sum();
        if ta != tb {
            return Complex64::new(0.0, 0.0);
        }
        match self.sectors.get(ta).and_then(|s| s.as_ref()) {
            Some(s) => match (s.index.get(a), s.index.get(b)) {
                (Some(&i), Some(&j)) => s.rho[(i, j)],
                _ => Complex64::new(0.0, 0.0),
            },
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Photon-number distribution of one mode.
    pub fn mode_distribution(&self, mode: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.sectors.len()];
        for s in self.sectors.iter().flatten() {
            for (a, occ) in s.basis.iter().enumerate() {
                out[occ[mode] as usize] += s.rho[(a, a)].re;
            }
        }
        out
    }
}

fn check_modes(m: usize) -> Result<()> {
    if m == 0 || m > MAX_ORACLE_MODES {
        return Err(GbsError::Capacity(format!("Fock oracle supports 1..={MAX_ORACLE_MODES} modes, got {m}")));
    }
    Ok(())
}

/// Schmidt-form two-mode squeezed vacuum on every squeezer pair,
/// `(1/cosh r) sum_n e^{i n phi} tanh^n r |n, n>`, keeping configurations
/// whose total pair count is at most `cutoff`. Fails when the discarded
/// norm exceeds `max_tail`.
pub fn schmidt_input_state(squeezers: &[SqueezerSpec], m: usize, cutoff: usize, max_tail: f64) -> Result<FockState> {
    check_modes(m)?;
    validate_squeezers(squeezers, m)?;
    if cutoff < 1 {
        return Err(GbsError::Argument("cutoff must be at least 1".into()));
    }
    let k = squeezers.len();
    let max_total = 2 * cutoff;
    let entries: usize = (0..=max_total).map(|t| compositions(t, m).len().pow(2)).sum();
    if entries > MAX_DENSITY_ENTRIES {
        return Err(GbsError::Capacity(format!(
            "cutoff {cutoff} on {m} modes needs {entries} density entries (limit {MAX_DENSITY_ENTRIES})"
        )));
    }

    // Pure-state amplitudes per sector, from every pair-count vector with sum <= cutoff.
    let mut pure: Vec<HashMap<Occupation, Complex64>> = vec![HashMap::new(); max_total + 1];
    let mut kept = 0.0;
    let mut counts = vec![0usize; k];
    loop {
        let pairs: usize = counts.iter().sum();
        if pairs <= cutoff {
            let mut amp = Complex64::new(1.0, 0.0);
            let mut occ = vec![0u8; m];
            for (sq, &n) in squeezers.iter().zip(&counts) {
                let t = sq.r.tanh();
                amp *= Complex64::from_polar(t.powi(n as i32) / sq.r.cosh(), n as f64 * sq.phase);
                occ[sq.modes.0] = n as u8;
                occ[sq.modes.1] = n as u8;
            }
            kept += amp.norm_sqr();
            pure[2 * pairs].insert(occ, amp);
        }
        // odometer over pair counts
        let mut i = 0;
        loop {
            if i == k {
                break;
            }
            counts[i] += 1;
            if counts.iter().sum::<usize>() <= cutoff {
                break;
            }
            counts[i] = 0;
            i += 1;
        }
        if i == k {
            break;
        }
    }
    let tail = (1.0 - kept).max(0.0);
    if tail > max_tail {
        return Err(GbsError::Capacity(format!(
            "cutoff {cutoff} leaves truncation tail {tail:.3e} above the requested {max_tail:.3e}"
        )));
    }

    let mut sectors: Vec<Option<Sector>> = vec![None; max_total + 1];
    for (t, amps) in pure.into_iter().enumerate() {
        if amps.is_empty() {
            continue;
        }
        let mut s = Sector::empty(m, t);
        let idx: Vec<(usize, Complex64)> = amps.iter().map(|(o, a)| (s.index[o], *a)).collect();
        for &(i, ai) in &idx {
            for &(j, aj) in &idx {
                s.rho[(i, j)] = ai * aj.conj();
            }
        }
        sectors[t] = Some(s);
    }
    Ok(FockState { m, cutoff, sectors, tail_bound: tail })
}

/// Permanent of a square matrix by Ryser's formula with Gray-code updates.
pub fn permanent(a: &CMatrix) -> Complex64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for step in 1..(1u64 << n) {
        let g = step ^ (step >> 1);
        let changed = (g ^ gray).trailing_zeros() as usize;
        let adding = g >> changed & 1 == 1;
        gray = g;
        for r in 0..n {
            if adding {
                row_sums[r] += a[(r, changed)];
            } else {
                row_sums[r] -= a[(r, changed)];
            }
        }
        let prod = row_sums.iter().fold(Complex64::new(1.0, 0.0), |acc, v| acc * v);
        if g.count_ones() % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// Ryser's formula with the columns grouped by input mode: for the input
/// occupation `n`, returns a closure giving `<m|U|n>` for any output `m` of
/// the same total.
struct GroupedRyser {
    /// Per inclusion vector: signed binomial weight and `(s_j)^p` tables.
    weights: Vec<f64>,
    powers: Vec<Vec<Vec<Complex64>>>,
    total: usize,
    norm_in: f64,
}

impl GroupedRyser {
    fn new(u: &CMatrix, input: &[u8]) -> Self {
        let m = input.len();
        let total: usize = input.iter().map(|&n| n as usize).sum();
        let mut weights = Vec::new();
        let mut powers = Vec::new();
        let mut x = vec![0usize; m];
        loop {
            let mut w = 1.0;
            for i in 0..m {
                w *= binomial(input[i] as usize, x[i]);
            }
            if x.iter().sum::<usize>() % 2 == 1 {
                w = -w;
            }
            let table: Vec<Vec<Complex64>> = (0..m)
                .map(|j| {
                    let s: Complex64 = (0..m).map(|i| u[(j, i)] * x[i] as f64).sum();
                    let mut p = Vec::with_capacity(total + 1);
                    let mut acc = Complex64::new(1.0, 0.0);
                    for _ in 0..=total {
                        p.push(acc);
                        acc *= s;
                    }
                    p
                })
                .collect();
            weights.push(w);
            powers.push(table);
            let mut i = 0;
            while i < m {
                x[i] += 1;
                if x[i] <= input[i] as usize {
                    break;
                }
                x[i] = 0;
                i += 1;
            }
            if i == m {
                break;
            }
        }
        let norm_in = input.iter().map(|&n| factorial(n as usize)).product::<f64>();
        GroupedRyser { weights, powers, total, norm_in }
    }

    fn amplitude(&self, output: &[u8]) -> Complex64 {
        let mut per = Complex64::new(0.0, 0.0);
        for (w, table) in self.weights.iter().zip(&self.powers) {
            let mut prod = Complex64::new(*w, 0.0);
            for (j, &mj) in output.iter().enumerate() {
                prod *= table[j][mj as usize];
            }
            per += prod;
        }
        if self.total % 2 == 1 {
            per = -per;
        }
        let norm_out = output.iter().map(|&n| factorial(n as usize)).product::<f64>();
        per / (self.norm_in * norm_out).sqrt()
    }

    fn work(input: &[u8]) -> u64 {
        input.iter().map(|&n| n as u64 + 1).product::<u64>() * input.len() as u64
    }
}

/// Transition amplitude `<m|U|n>` = `Per(U[m, n]) / sqrt(prod n_i! prod m_j!)`,
/// with photons in input mode `i` leaving along column `i` of `U`.
pub fn transition_amplitude(u: &CMatrix, input: &[u8], output: &[u8]) -> Complex64 {
    let tin: usize = input.iter().map(|&n| n as usize).sum();
    let tout: usize = output.iter().map(|&n| n as usize).sum();
    if tin != tout {
        return Complex64::new(0.0, 0.0);
    }
    GroupedRyser::new(u, input).amplitude(output)
}

/// `rho <- U rho U^dag` sector by sector. Only columns of the transfer
/// matrix that touch the support of `rho` are built.
pub fn fock_apply_unitary(state: &FockState, u: &CMatrix) -> Result<FockState> {
    let m = state.m;
    if u.nrows() != m || u.ncols() != m {
        return Err(GbsError::Validation(format!("unitary is {}x{}, state has {m} modes", u.nrows(), u.ncols())));
    }
    let defect = unitarity_defect(u);
    if defect > crate::gaussian::UNITARITY_TOL {
        return Err(GbsError::Validation(format!("unitary defect {defect:.3e}")));
    }
    let mut out = state.clone();
    for slot in out.sectors.iter_mut() {
        let Some(sec) = slot.as_mut() else { continue };
        let d = sec.basis.len();
        let support: Vec<usize> = (0..d)
            .filter(|&a| (0..d).any(|b| sec.rho[(a, b)].norm() > 0.0 || sec.rho[(b, a)].norm() > 0.0))
            .collect();
        if support.is_empty() {
            continue;
        }
        let work: u64 = support.iter().map(|&a| GroupedRyser::work(&sec.basis[a]) * d as u64).sum();
        if work > MAX_PERMANENT_WORK {
            return Err(GbsError::Capacity(format!(
                "sector with {} photons needs ~{work} permanent operations (limit {MAX_PERMANENT_WORK})",
                sec.basis[0].iter().map(|&n| n as usize).sum::<usize>()
            )));
        }
        // W[:, support]
        let mut w = CMatrix::zeros(d, support.len());
        for (col, &a) in support.iter().enumerate() {
            let ryser = GroupedRyser::new(u, &sec.basis[a]);
            for (row, occ) in sec.basis.iter().enumerate() {
                w[(row, col)] = ryser.amplitude(occ);
            }
        }
        let rho_ss = CMatrix::from_fn(support.len(), support.len(), |i, j| sec.rho[(support[i], support[j])]);
        let rho = &w * rho_ss * w.adjoint();
        sec.rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    }
    Ok(out)
}

/// Pure loss on every mode: amplitude-damping Kraus operators
/// `A_k |n> = sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k>`.
pub fn fock_apply_loss(state: &FockState, eta: &[f64]) -> Result<FockState> {
    if eta.len() != state.m {
        return Err(GbsError::Config(format!("transmission has {} entries, expected {}", eta.len(), state.m)));
    }
    if let Some(e) = eta.iter().find(|e| !(**e >= 0.0 && **e <= 1.0)) {
        return Err(GbsError::Config(format!("transmission {e} outside [0, 1]")));
    }
    let mut cur = state.clone();
    for (mode, &e) in eta.iter().enumerate() {
        if e == 1.0 {
            continue;
        }
        let mut next: Vec<Option<Sector>> = vec![None; cur.sectors.len()];
        for (t, slot) in cur.sectors.iter().enumerate() {
            let Some(sec) = slot else { continue };
            for k in 0..=t {
                let mut kraus = Vec::new();
                for (a, occ) in sec.basis.iter().enumerate() {
                    let n = occ[mode] as usize;
                    if n < k {
                        continue;
                    }
                    let coef = (binomial(n, k) * e.powi((n - k) as i32) * (1.0 - e).powi(k as i32)).sqrt();
                    if coef > 0.0 {
                        let mut lowered = occ.clone();
                        lowered[mode] -= k as u8;
                        kraus.push((a, lowered, coef));
                    }
                }
                if kraus.is_empty() {
                    continue;
                }
                let target = next[t - k].get_or_insert_with(|| Sector::empty(cur.m, t - k));
                // (source index, target index, Kraus coefficient)
                let terms: Vec<(usize, usize, f64)> =
                    kraus.into_iter().map(|(a, lowered, c)| (a, target.index[&lowered], c)).collect();
                for &(a, ta, ca) in &terms {
                    for &(b, tb, cb) in &terms {
                        let v = sec.rho[(a, b)];
                        if v.re != 0.0 || v.im != 0.0 {
                            target.rho[(ta, tb)] += v * (ca * cb);
                        }
                    }
                }
            }
        }
        cur.sectors = next;
    }
    Ok(cur)
}

/// Probabilities of all `2^M` click patterns (bit `i` of the index is mode
/// `i`); each is `Tr[rho (x)_i E_i]` with `E = |0><0|` or `I - |0><0|`.
pub fn fock_click_distribution(state: &FockState) -> Vec<f64> {
    let mut probs = vec![0.0; 1 << state.m];
    for sec in state.sectors.iter().flatten() {
        for (a, occ) in sec.basis.iter().enumerate() {
            let idx = occ.iter().enumerate().fold(0usize, |acc, (i, &n)| acc | (usize::from(n > 0) << i));
            probs[idx] += sec.rho[(a, a)].re;
        }
    }
    probs
}

/// Independent dark clicks with probability `p_dark` on every mode, ORed
/// onto a click distribution.
pub fn with_dark_counts(probs: &[f64], m: usize, p_dark: f64) -> Vec<f64> {
    if p_dark == 0.0 {
        return probs.to_vec();
    }
    let mut out = vec![0.0; probs.len()];
    for (src, &p) in probs.iter().enumerate() {
        // every superset of src is reachable by dark clicks on the missing bits
        let free: Vec<usize> = (0..m).filter(|i| src >> i & 1 == 0).collect();
        for mask in 0..(1usize << free.len()) {
            let mut dst = src;
            let mut w = p;
            for (b, &i) in free.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    dst |= 1 << i;
                    w *= p_dark;
                } else {
                    w *= 1.0 - p_dark;
                }
            }
            out[dst] += w;
        }
    }
    out
}

/// Click distribution of a whole circuit from the Fock oracle, with the
/// truncation tail bound.
pub fn fock_circuit_distribution(circuit: &CircuitSpec, cutoff: usize, max_tail: f64) -> Result<(Vec<f64>, f64)> {
    circuit.validate()?;
    let input = schmidt_input_state(&circuit.squeezers, circuit.mode_count, cutoff, max_tail)?;
    let evolved = fock_apply_unitary(&input, &circuit.unitary)?;
    let lossy = fock_apply_loss(&evolved, &circuit.effective_transmission())?;
    let probs = with_dark_counts(&fock_click_distribution(&lossy), circuit.mode_count, circuit.dark_count_prob);
    Ok((probs, input.tail_bound()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{balanced_splitter, haar_random_unitary, paired_squeezers, GaussianState};
    use approx::assert_abs_diff_eq;

    fn tmss_input(r: f64, cutoff: usize) -> FockState {
        schmidt_input_state(&[SqueezerSpec::new(r, 0.3, (0, 1))], 2, cutoff, 1.0).unwrap()
    }

    #[test]
    fn zero_squeezing_is_vacuum() {
        let s = tmss_input(0.0, 4);
        assert_eq!(s.tail_bound(), 0.0);
        assert_abs_diff_eq!(s.element(&[0, 0], &[0, 0]).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.trace(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tail_bound_is_geometric() {
        let s = tmss_input(0.5, 8);
        let expected = 0.5f64.tanh().powi(18);
        assert_abs_diff_eq!(s.tail_bound(), expected, epsilon = 1e-15);
        assert!(s.tail_bound() < 9.4e-7 && s.tail_bound() > 9.2e-7);
        assert_abs_diff_eq!(s.trace(), 1.0 - expected, epsilon = 1e-14);
        let err = schmidt_input_state(&[SqueezerSpec::new(0.5, 0.0, (0, 1))], 2, 2, 1e-6).unwrap_err();
        assert!(matches!(err, GbsError::Capacity(_)));
    }

    #[test]
    fn mean_photons_match_gaussian() {
        let r: f64 = 0.5;
        let cutoff = 30;
        let s = tmss_input(r, cutoff);
        let g = GaussianState::from_squeezers(&[SqueezerSpec::new(r, 0.0, (0, 1))], 2).unwrap();
        // photons carried by the dropped terms: sum_{n > cutoff} 2n (1 - t^2) t^{2n}
        let t2 = r.tanh().powi(2);
        let missing: f64 = ((cutoff + 1)..400).map(|n| 2.0 * n as f64 * (1.0 - t2) * t2.powi(n as i32)).sum();
        assert_abs_diff_eq!(s.mean_photon_number() + missing, g.mean_photon_number(), epsilon = 1e-12);
    }

    #[test]
    fn ryser_known_values() {
        let a = CMatrix::from_fn(3, 3, |i, j| Complex64::new((i * 3 + j + 1) as f64, 0.0));
        // per [[1,2,3],[4,5,6],[7,8,9]] = 450
        assert_abs_diff_eq!(permanent(&a).re, 450.0, epsilon = 1e-9);
        let bs = balanced_splitter();
        assert_abs_diff_eq!(permanent(&bs).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn grouped_ryser_matches_expanded_permanent() {
        let u = haar_random_unitary(3, 5);
        let input = [2u8, 0, 1];
        let output = [1u8, 1, 1];
        let cols: Vec<usize> = input.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat(i).take(n as usize)).collect();
        let rows: Vec<usize> = output.iter().enumerate().flat_map(|(j, &n)| std::iter::repeat(j).take(n as usize)).collect();
        let sub = CMatrix::from_fn(3, 3, |r, c| u[(rows[r], cols[c])]);
        let expected = permanent(&sub) / (2.0f64).sqrt();
        let got = transition_amplitude(&u, &input, &output);
        assert_abs_diff_eq!((got - expected).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn identity_and_single_photon() {
        let s = tmss_input(0.4, 5);
        let same = fock_apply_unitary(&s, &CMatrix::identity(2, 2)).unwrap();
        for (a, b) in s.sectors.iter().zip(&same.sectors) {
            if let (Some(a), Some(b)) = (a, b) {
                assert!(crate::linalg::max_abs_diff(&a.rho, &b.rho) < 1e-14);
            }
        }
        let u = haar_random_unitary(3, 2);
        let one = FockState::number_state(&[0, 1, 0]).unwrap();
        let out = fock_apply_unitary(&one, &u).unwrap();
        for j in 0..3 {
            let mut occ = [0u8; 3];
            occ[j] = 1;
            assert_abs_diff_eq!(out.element(&occ, &occ).re, u[(j, 1)].norm_sqr(), epsilon = 1e-14);
        }
        // amplitude itself is the column entry
        assert_abs_diff_eq!((transition_amplitude(&u, &[0, 1, 0], &[0, 0, 1]) - u[(2, 1)]).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hong_ou_mandel() {
        let amp = transition_amplitude(&balanced_splitter(), &[1, 1], &[1, 1]);
        assert!(amp.norm() < 1e-12);
        let out = fock_apply_unitary(&FockState::number_state(&[1, 1]).unwrap(), &balanced_splitter()).unwrap();
        assert_abs_diff_eq!(out.element(&[2, 0], &[2, 0]).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(out.element(&[0, 2], &[0, 2]).re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn loss_channel() {
        let s = tmss_input(0.6, 6);
        assert_abs_diff_eq!(fock_apply_loss(&s, &[1.0, 1.0]).unwrap().trace(), s.trace(), epsilon = 1e-15);
        let l = fock_apply_loss(&s, &[0.7, 0.4]).unwrap();
        assert_abs_diff_eq!(l.trace(), s.trace(), epsilon = 1e-10);
        let (herm, min_eig) = l.hermiticity_and_min_eigenvalue();
        assert!(herm < 1e-14 && min_eig > -1e-10);

        let one = FockState::number_state(&[1]).unwrap();
        let p = fock_click_distribution(&fock_apply_loss(&one, &[0.35]).unwrap());
        assert_abs_diff_eq!(p[1], 0.35, epsilon = 1e-15);
    }

    #[test]
    fn thermal_mode_under_loss() {
        // reduced TMSS mode is thermal with nbar = sinh^2 r; after loss it is thermal with eta * nbar
        let r: f64 = 0.5;
        let eta = 0.6;
        let s = fock_apply_loss(&tmss_input(r, 40), &[eta, 1.0]).unwrap();
        let nbar = eta * r.sinh().powi(2);
        let dist = s.mode_distribution(0);
        for (n, &p) in dist.iter().enumerate().take(10) {
            let thermal = nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1);
            assert_abs_diff_eq!(p, thermal, epsilon = 1e-12);
        }
    }

    #[test]
    fn tmss_click_distribution() {
        let s = tmss_input(0.5, 8);
        let p = fock_click_distribution(&s);
        let tail = s.tail_bound();
        assert!((p[0b00] - 0.78645).abs() < 1e-5 + tail);
        assert!((p[0b11] - 0.21355).abs() < 1e-5 + tail);
        assert_eq!(p[0b01], 0.0);
        assert_eq!(p[0b10], 0.0);
        let v = fock_click_distribution(&FockState::vacuum(3).unwrap());
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn dark_counts_preserve_normalisation() {
        let probs = vec![0.5, 0.2, 0.1, 0.2];
        let d = with_dark_counts(&probs, 2, 0.1);
        assert_abs_diff_eq!(d.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[0], 0.5 * 0.81, epsilon = 1e-15);
    }

    #[test]
    fn small_circuit_agrees_with_gaussian_engine() {
        let c = CircuitSpec::ideal(haar_random_unitary(4, 3), paired_squeezers(&[0.4, 0.3], &[0.2, 1.1]))
            .with_uniform_transmission(0.7);
        let (fock, tail) = fock_circuit_distribution(&c, DEFAULT_CUTOFF, 1.0).unwrap();
        let g = crate::threshold::enumerate_distribution(&c.output_state().unwrap(), &Default::default()).unwrap();
        for (a, b) in fock.iter().zip(&g) {
            assert!((a - b).abs() <= 1e-6 + tail, "{a} vs {b}, tail {tail}");
            assert!(b - a >= -1e-9, "truncation must undershoot: {a} vs {b}");
        }
    }

    #[test]
    fn rejects_too_many_modes() {
        assert!(matches!(FockState::vacuum(7), Err(GbsError::Capacity(_))));
    }
}
