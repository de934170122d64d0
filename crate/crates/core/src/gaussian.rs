//! Zero-mean Gaussian states of `M` optical modes in the complex moment
//! convention: `N_ij = <a_j^dag a_i>`, `B_ij = <a_i a_j>`.
//!
//! The anti-normally ordered (Husimi) covariance of the vector
//! `(a, a^dag)` is `[[I + N, B], [conj(B), I + conj(N)]]`; it equals the
//! identity for vacuum, and the probability that a set of modes `A` is
//! empty is `1 / sqrt(det Sigma_Q[A])`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GbsError, Result};
use crate::linalg::{cholesky_sqrt_det, lu_determinant, unitarity_defect, CMatrix};

/// Maximum entrywise `|U U^dag - I|` accepted for an interferometer.
pub const UNITARITY_TOL: f64 = 1e-8;
/// Slack on the physical lower bound `det Sigma_Q >= 1`.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// One two-mode squeezer feeding `modes.0` and `modes.1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezerSpec {
    pub r: f64,
    pub phase: f64,
    pub modes: (usize, usize),
}

impl SqueezerSpec {
    pub fn new(r: f64, phase: f64, modes: (usize, usize)) -> Self {
        SqueezerSpec { r, phase, modes }
    }
}

/// Checks a squeezer bank against a mode count.
pub fn validate_squeezers(squeezers: &[SqueezerSpec], mode_count: usize) -> Result<()> {
    let mut used = vec![false; mode_count];
    for (k, sq) in squeezers.iter().enumerate() {
        if !(sq.r >= 0.0) || !sq.r.is_finite() {
            return Err(GbsError::Config(format!("squeezer {k}: r must be finite and >= 0, got {}", sq.r)));
        }
        if !sq.phase.is_finite() {
            return Err(GbsError::Config(format!("squeezer {k}: phase must be finite")));
        }
        let (i, j) = sq.modes;
        if i == j {
            return Err(GbsError::Config(format!("squeezer {k}: mode pair ({i}, {j}) is not distinct")));
        }
        for m in [i, j] {
            if m >= mode_count {
                return Err(GbsError::Config(format!(
                    "squeezer {k}: mode index {m} out of range for {mode_count} modes"
                )));
            }
            if used[m] {
                return Err(GbsError::Config(format!("squeezer {k}: mode {m} already driven by another squeezer")));
            }
            used[m] = true;
        }
    }
    Ok(())
}

/// Squeezer bank with squeezer `k` on modes `(2k, 2k+1)`.
pub fn paired_squeezers(rs: &[f64], phases: &[f64]) -> Vec<SqueezerSpec> {
    rs.iter()
        .zip(phases)
        .enumerate()
        .map(|(k, (&r, &phase))| SqueezerSpec::new(r, phase, (2 * k, 2 * k + 1)))
        .collect()
}

/// Full description of a lossy threshold-detector GBS circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    pub mode_count: usize,
    pub unitary: CMatrix,
    pub transmission: Vec<f64>,
    pub detector_efficiency: f64,
    pub dark_count_prob: f64,
    pub squeezers: Vec<SqueezerSpec>,
}

impl CircuitSpec {
    /// Lossless, noiseless circuit.
    pub fn ideal(unitary: CMatrix, squeezers: Vec<SqueezerSpec>) -> Self {
        let m = unitary.nrows();
        CircuitSpec {
            mode_count: m,
            unitary,
            transmission: vec![1.0; m],
            detector_efficiency: 1.0,
            dark_count_prob: 0.0,
            squeezers,
        }
    }

    pub fn with_uniform_transmission(mut self, eta: f64) -> Self {
        self.transmission = vec![eta; self.mode_count];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.mode_count;
        if m == 0 {
            return Err(GbsError::Config("mode_count must be positive".into()));
        }
        if self.unitary.nrows() != m || self.unitary.ncols() != m {
            return Err(GbsError::Config(format!(
                "unitary is {}x{}, expected {m}x{m}",
                self.unitary.nrows(),
                self.unitary.ncols()
            )));
        }
        let defect = unitarity_defect(&self.unitary);
        if !(defect <= UNITARITY_TOL) {
            return Err(GbsError::Validation(format!("unitary defect {defect:.3e} exceeds {UNITARITY_TOL:e}")));
        }
        check_transmission(&self.transmission, m)?;
        let (ed, pd) = (self.detector_efficiency, self.dark_count_prob);
        if !(ed > 0.0 && ed <= 1.0) {
            return Err(GbsError::Config(format!("detector_efficiency must lie in (0, 1], got {ed}")));
        }
        if !(pd >= 0.0 && pd < 1.0) {
            return Err(GbsError::Config(format!("dark_count_prob must lie in [0, 1), got {pd}")));
        }
        if !(pd / ed < 0.5) {
            return Err(GbsError::Config(format!("dark_count_prob / detector_efficiency = {} must be < 1/2", pd / ed)));
        }
        validate_squeezers(&self.squeezers, m)
    }

    /// Per-mode transmission including the detector efficiency.
    pub fn effective_transmission(&self) -> Vec<f64> {
        self.transmission.iter().map(|t| t * self.detector_efficiency).collect()
    }

    /// Same circuit with the squeezer phases replaced.
    pub fn with_phases(&self, phases: &[f64]) -> Result<CircuitSpec> {
        if phases.len() != self.squeezers.len() {
            return Err(GbsError::Config(format!(
                "phase setting has {} entries, circuit has {} squeezers",
                phases.len(),
                self.squeezers.len()
            )));
        }
        let mut out = self.clone();
        for (sq, &ph) in out.squeezers.iter_mut().zip(phases) {
            sq.phase = ph;
        }
        Ok(out)
    }

    pub fn input_state(&self) -> Result<GaussianState> {
        GaussianState::from_squeezers(&self.squeezers, self.mode_count)
    }

    /// Canonical pipeline: squeezed input, interferometer, then all losses.
    pub fn output_state(&self) -> Result<GaussianState> {
        self.validate()?;
        self.propagate(&self.input_state()?)
    }

    /// Sends an arbitrary input state through the interferometer and losses.
    pub fn propagate(&self, input: &GaussianState) -> Result<GaussianState> {
        input.apply_unitary(&self.unitary)?.apply_loss(&self.effective_transmission())
    }
}

fn check_transmission(eta: &[f64], m: usize) -> Result<()> {
    if eta.len() != m {
        return Err(GbsError::Config(format!("transmission has {} entries, expected {m}", eta.len())));
    }
    if let Some((i, e)) = eta.iter().enumerate().find(|(_, e)| !(**e >= 0.0 && **e <= 1.0)) {
        return Err(GbsError::Config(format!("transmission[{i}] = {e} outside [0, 1]")));
    }
    Ok(())
}

/// Zero-mean Gaussian state.
#[derive(Debug, Clone)]
pub struct GaussianState {
    n: CMatrix,
    b: CMatrix,
    /// Real symmetric form of the Husimi covariance, row-major `2M x 2M`,
    /// ordered `(x_0..x_{M-1}, p_0..p_{M-1})`. Related to the complex form by
    /// a per-mode unitary, so every principal minor over whole modes has the
    /// same determinant.
    quad: Vec<f64>,
}

impl PartialEq for GaussianState {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.b == other.b
    }
}

impl GaussianState {
    pub fn vacuum(m: usize) -> Self {
        Self::from_blocks_unchecked(CMatrix::zeros(m, m), CMatrix::zeros(m, m))
    }

    /// Builds a state from its moment blocks, checking shapes and symmetry.
    pub fn from_blocks(n: CMatrix, b: CMatrix) -> Result<Self> {
        let m = n.nrows();
        if n.ncols() != m || b.nrows() != m || b.ncols() != m {
            return Err(GbsError::Argument("N and B must both be M x M".into()));
        }
        let herm = crate::linalg::max_abs_diff(&n, &n.adjoint());
        let sym = crate::linalg::max_abs_diff(&b, &b.transpose());
        if herm > 1e-10 || sym > 1e-10 {
            return Err(GbsError::Physicality(format!(
                "N not Hermitian ({herm:.1e}) or B not symmetric ({sym:.1e})"
            )));
        }
        Ok(Self::from_blocks_unchecked(n, b))
    }

    fn from_blocks_unchecked(n: CMatrix, b: CMatrix) -> Self {
        let m = n.nrows();
        let d = 2 * m;
        let mut quad = vec![0.0; d * d];
        for i in 0..m {
            for j in 0..m {
                let p = n[(i, j)] + if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                let bij = b[(i, j)];
                quad[i * d + j] = p.re + bij.re;
                quad[i * d + m + j] = bij.im - p.im;
                quad[(m + i) * d + j] = p.im + bij.im;
                quad[(m + i) * d + m + j] = p.re - bij.re;
            }
        }
        GaussianState { n, b, quad }
    }

    /// Two-mode squeezed vacuum on every squeezer pair, vacuum elsewhere.
    pub fn from_squeezers(squeezers: &[SqueezerSpec], m: usize) -> Result<Self> {
        validate_squeezers(squeezers, m)?;
        let mut n = CMatrix::zeros(m, m);
        let mut b = CMatrix::zeros(m, m);
        for sq in squeezers {
            let (i, j) = sq.modes;
            let (s, c) = (sq.r.sinh(), sq.r.cosh());
            n[(i, i)] = Complex64::new(s * s, 0.0);
            n[(j, j)] = Complex64::new(s * s, 0.0);
            let bij = Complex64::from_polar(s * c, sq.phase);
            b[(i, j)] = bij;
            b[(j, i)] = bij;
        }
        Ok(Self::from_blocks_unchecked(n, b))
    }

    pub fn mode_count(&self) -> usize {
        self.n.nrows()
    }

    /// `N_ij = <a_j^dag a_i>`.
    pub fn normal_block(&self) -> &CMatrix {
        &self.n
    }

    /// `B_ij = <a_i a_j>`.
    pub fn pairing_block(&self) -> &CMatrix {
        &self.b
    }

    /// `N <- U N U^dag`, `B <- U B U^T`.
    pub fn apply_unitary(&self, u: &CMatrix) -> Result<Self> {
        let m = self.mode_count();
        if u.nrows() != m || u.ncols() != m {
            return Err(GbsError::Validation(format!("unitary is {}x{}, state has {m} modes", u.nrows(), u.ncols())));
        }
        let defect = unitarity_defect(u);
        if !(defect <= UNITARITY_TOL) {
            return Err(GbsError::Validation(format!("unitary defect {defect:.3e} exceeds {UNITARITY_TOL:e}")));
        }
        let n = u * &self.n * u.adjoint();
        let b = u * &self.b * u.transpose();
        let half = Complex64::new(0.5, 0.0);
        let n = (&n + n.adjoint()) * half;
        let b = (&b + b.transpose()) * half;
        Ok(Self::from_blocks_unchecked(n, b))
    }

    /// Pure-loss channel with per-mode transmission `eta`.
    pub fn apply_loss(&self, eta: &[f64]) -> Result<Self> {
        let m = self.mode_count();
        check_transmission(eta, m)?;
        let root: Vec<f64> = eta.iter().map(|e| e.sqrt()).collect();
        let n = CMatrix::from_fn(m, m, |i, j| self.n[(i, j)] * (root[i] * root[j]));
        let b = CMatrix::from_fn(m, m, |i, j| self.b[(i, j)] * (root[i] * root[j]));
        Ok(Self::from_blocks_unchecked(n, b))
    }

    /// Partial trace onto `keep` (in the given order).
    pub fn reduce_modes(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(GbsError::Argument("reduce_modes needs a nonempty mode subset".into()));
        }
        check_mode_set(keep, self.mode_count())?;
        let k = keep.len();
        let n = CMatrix::from_fn(k, k, |i, j| self.n[(keep[i], keep[j])]);
        let b = CMatrix::from_fn(k, k, |i, j| self.b[(keep[i], keep[j])]);
        Ok(Self::from_blocks_unchecked(n, b))
    }

    /// `sum_i N_ii`.
    pub fn mean_photon_number(&self) -> f64 {
        (0..self.mode_count()).map(|i| self.n[(i, i)].re).sum()
    }

    /// Complex Husimi covariance restricted to `modes`, `2k x 2k`.
    pub fn husimi_submatrix(&self, modes: &[usize]) -> CMatrix {
        let k = modes.len();
        let one = Complex64::new(1.0, 0.0);
        DMatrix::from_fn(2 * k, 2 * k, |r, c| {
            let (ri, rc) = (modes[r % k], r >= k);
            let (ci, cc) = (modes[c % k], c >= k);
            let delta = if r == c { one } else { Complex64::new(0.0, 0.0) };
            match (rc, cc) {
                (false, false) => delta + self.n[(ri, ci)],
                (false, true) => self.b[(ri, ci)],
                (true, false) => self.b[(ri, ci)].conj(),
                (true, true) => delta + self.n[(ri, ci)].conj(),
            }
        })
    }

    /// `1 / sqrt(det Sigma_Q[A])` via the real quadrature form, with a
    /// caller-provided scratch buffer.
    pub fn vacuum_probability_with(&self, modes: &[usize], scratch: &mut Vec<f64>) -> Result<f64> {
        let k = modes.len();
        if k == 0 {
            return Ok(1.0);
        }
        let m = self.mode_count();
        let full = 2 * m;
        let dim = 2 * k;
        if scratch.len() < dim * dim {
            scratch.resize(dim * dim, 0.0);
        }
        let q = &self.quad;
        let index = |r: usize| if r < k { modes[r] } else { m + modes[r - k] };
        for r in 0..dim {
            let src = index(r) * full;
            let row = &mut scratch[r * dim..r * dim + r + 1];
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = q[src + index(c)];
            }
        }
        match cholesky_sqrt_det(scratch, dim) {
            Some(root_det) => Ok(1.0 / root_det),
            None => Err(self.physicality_diagnostic(modes)),
        }
    }

    /// Validated vacuum probability of the mode set `modes`.
    pub fn vacuum_probability(&self, modes: &[usize]) -> Result<f64> {
        check_mode_set(modes, self.mode_count())?;
        let mut scratch = Vec::new();
        let p = self.vacuum_probability_with(modes, &mut scratch)?;
        if p > 1.0 + PHYSICALITY_TOL {
            return Err(GbsError::Physicality(format!("det Sigma_Q[A] = {:.12} < 1", 1.0 / (p * p))));
        }
        Ok(p.min(1.0))
    }

    fn physicality_diagnostic(&self, modes: &[usize]) -> GbsError {
        let sub = self.husimi_submatrix(modes);
        let dim = sub.nrows();
        let mut flat: Vec<Complex64> = (0..dim * dim).map(|i| sub[(i / dim, i % dim)]).collect();
        let det = lu_determinant(&mut flat, dim);
        GbsError::Physicality(format!(
            "Husimi covariance on modes {modes:?} is not positive definite (LU det = {:.6e}{:+.2e}i)",
            det.re, det.im
        ))
    }

    /// Determinant of the full Husimi covariance by complex LU.
    pub fn husimi_determinant(&self) -> Complex64 {
        let all: Vec<usize> = (0..self.mode_count()).collect();
        let sub = self.husimi_submatrix(&all);
        let dim = sub.nrows();
        let mut flat: Vec<Complex64> = (0..dim * dim).map(|i| sub[(i / dim, i % dim)]).collect();
        lu_determinant(&mut flat, dim)
    }

    /// Positive definiteness and `det Sigma_Q >= 1` within tolerance.
    pub fn check_physical(&self) -> Result<()> {
        let all: Vec<usize> = (0..self.mode_count()).collect();
        let mut scratch = Vec::new();
        let p = self.vacuum_probability_with(&all, &mut scratch)?;
        let det = 1.0 / (p * p);
        if det < 1.0 - PHYSICALITY_TOL {
            return Err(GbsError::Physicality(format!("det Sigma_Q = {det} < 1")));
        }
        Ok(())
    }
}

pub(crate) fn check_mode_set(modes: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    for &i in modes {
        if i >= m {
            return Err(GbsError::Argument(format!("mode {i} out of range for {m} modes")));
        }
        if seen[i] {
            return Err(GbsError::Argument(format!("mode {i} repeated in subset")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Haar-random `M x M` unitary: QR of a complex Ginibre matrix with the
/// diagonal of `R` rotated onto the positive reals.
pub fn haar_random_unitary(m: usize, seed: u64) -> CMatrix {
    assert!(m >= 1, "haar_random_unitary needs m >= 1");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let z = CMatrix::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Symmetric 50/50 beam splitter on two modes.
pub fn balanced_splitter() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(h, 0.0),
            Complex64::new(-h, 0.0),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tmss(r: f64, phase: f64) -> GaussianState {
        GaussianState::from_squeezers(&[SqueezerSpec::new(r, phase, (0, 1))], 2).unwrap()
    }

    #[test]
    fn empty_bank_is_vacuum() {
        let s = GaussianState::from_squeezers(&[], 3).unwrap();
        assert_eq!(s, GaussianState::vacuum(3));
        assert_eq!(s.mean_photon_number(), 0.0);
    }

    #[test]
    fn tmss_moments() {
        let s = tmss(0.5, 0.0);
        assert_abs_diff_eq!(s.normal_block()[(0, 0)].re, 0.5f64.sinh().powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(s.normal_block()[(0, 0)].re, 0.27154, epsilon = 1e-5);
        assert_abs_diff_eq!(s.pairing_block()[(0, 1)].re, 0.58760, epsilon = 1e-5);
        let q = tmss(0.5, std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(q.pairing_block()[(0, 1)].im, 0.58760, epsilon = 1e-5);
        assert_abs_diff_eq!(q.pairing_block()[(0, 1)].norm(), s.pairing_block()[(0, 1)].norm(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.mean_photon_number(), 0.54308, epsilon = 1e-5);
    }

    #[test]
    fn squeezer_bank_errors() {
        let overlap = [SqueezerSpec::new(0.1, 0.0, (0, 1)), SqueezerSpec::new(0.1, 0.0, (1, 2))];
        assert!(matches!(GaussianState::from_squeezers(&overlap, 3), Err(GbsError::Config(_))));
        let oob = [SqueezerSpec::new(0.1, 0.0, (0, 3))];
        assert!(matches!(GaussianState::from_squeezers(&oob, 3), Err(GbsError::Config(_))));
        let same = [SqueezerSpec::new(0.1, 0.0, (1, 1))];
        assert!(GaussianState::from_squeezers(&same, 3).is_err());
    }

    #[test]
    fn unitary_identity_and_swap() {
        let s = tmss(0.5, 0.3).apply_loss(&[0.9, 0.4]).unwrap();
        let id = CMatrix::identity(2, 2);
        assert_eq!(s.apply_unitary(&id).unwrap(), s);
        let swap = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        );
        let t = s.apply_unitary(&swap).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(t.normal_block()[(i, j)].re, s.normal_block()[(1 - i, 1 - j)].re, epsilon = 1e-15);
                assert_abs_diff_eq!(t.pairing_block()[(i, j)].im, s.pairing_block()[(1 - i, 1 - j)].im, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn non_unitary_rejected() {
        let s = tmss(0.5, 0.0);
        let bad = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(s.apply_unitary(&bad), Err(GbsError::Validation(_))));
    }

    #[test]
    fn loss_edge_cases() {
        let s = tmss(0.7, 0.2);
        assert_eq!(s.apply_loss(&[1.0, 1.0]).unwrap(), s);
        assert_eq!(s.apply_loss(&[0.0, 0.0]).unwrap(), GaussianState::vacuum(2));
        let l = s.apply_loss(&[0.3, 0.3]).unwrap();
        assert_abs_diff_eq!(l.mean_photon_number(), 0.3 * s.mean_photon_number(), epsilon = 1e-15);
        assert!(matches!(s.apply_loss(&[1.2, 0.5]), Err(GbsError::Config(_))));
        assert!(matches!(s.apply_loss(&[0.5]), Err(GbsError::Config(_))));
    }

    #[test]
    fn reduction() {
        let s = tmss(0.5, 0.0);
        assert_eq!(s.reduce_modes(&[0, 1]).unwrap(), s);
        let one = s.reduce_modes(&[0]).unwrap();
        assert_abs_diff_eq!(one.normal_block()[(0, 0)].re, 0.27154, epsilon = 1e-5);
        assert_eq!(one.pairing_block()[(0, 0)], Complex64::new(0.0, 0.0));
        assert!(matches!(s.reduce_modes(&[]), Err(GbsError::Argument(_))));
    }

    #[test]
    fn vacuum_probability_closed_forms() {
        let s = tmss(0.5, 0.0);
        assert_eq!(s.vacuum_probability(&[]).unwrap(), 1.0);
        let c = 0.5f64.cosh();
        assert_abs_diff_eq!(s.vacuum_probability(&[0, 1]).unwrap(), 1.0 / (c * c), epsilon = 1e-12);
        assert_abs_diff_eq!(s.vacuum_probability(&[0, 1]).unwrap(), 0.78645, epsilon = 1e-5);
        let eta = 0.5;
        let l = s.apply_loss(&[eta, eta]).unwrap();
        let (sh, ch) = (0.5f64.sinh(), 0.5f64.cosh());
        let expected = 1.0 / ((1.0 + eta * sh * sh).powi(2) - eta * eta * sh * sh * ch * ch);
        assert_abs_diff_eq!(l.vacuum_probability(&[0, 1]).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.83081, epsilon = 1e-5);
        for r in [0.1, 0.5, 1.0] {
            let t = tmss(r, 1.1);
            assert_abs_diff_eq!(t.vacuum_probability(&[0, 1]).unwrap(), 1.0 / r.cosh().powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn real_form_determinant_matches_complex_lu() {
        let u = haar_random_unitary(5, 3);
        let sq = paired_squeezers(&[0.4, 0.9], &[0.3, 2.0]);
        let s = GaussianState::from_squeezers(&sq, 5)
            .unwrap()
            .apply_unitary(&u)
            .unwrap()
            .apply_loss(&[0.9, 0.7, 0.5, 1.0, 0.8])
            .unwrap();
        let det = s.husimi_determinant();
        assert!(det.im.abs() < 1e-9 * det.re);
        let p = s.vacuum_probability(&[0, 1, 2, 3, 4]).unwrap();
        assert_abs_diff_eq!(p, 1.0 / det.re.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn haar_properties() {
        let u1 = haar_random_unitary(1, 9);
        assert_abs_diff_eq!(u1[(0, 0)].norm(), 1.0, epsilon = 1e-14);
        assert_eq!(haar_random_unitary(6, 11), haar_random_unitary(6, 11));
        assert_ne!(haar_random_unitary(6, 11), haar_random_unitary(6, 12));
        assert!(unitarity_defect(&haar_random_unitary(50, 1)) < 1e-12);
    }

    #[test]
    fn haar_mean_modulus_squared() {
        // Monte-Carlo over 200 seeds: mean |U_00|^2 -> 1/M, Var |U_00|^2 = (M-1)/(M^2 (M+1)).
        let m = 50usize;
        let seeds = 200;
        let vals: Vec<f64> = (0..seeds).map(|s| haar_random_unitary(m, s).get((0, 0)).unwrap().norm_sqr()).collect();
        let mean = vals.iter().sum::<f64>() / seeds as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds as f64 - 1.0);
        let se = (var / seeds as f64).sqrt();
        assert!((mean - 1.0 / m as f64).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    fn random_state(seed: u64, m: usize) -> GaussianState {
        let k = m / 2;
        let rs: Vec<f64> = (0..k).map(|i| 0.2 + 0.1 * ((seed as usize + i) % 7) as f64).collect();
        let ph: Vec<f64> = (0..k).map(|i| 0.37 * (seed as f64 + i as f64)).collect();
        GaussianState::from_squeezers(&paired_squeezers(&rs, &ph), m).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn unitary_composition(seed in 0u64..1000, m in 2usize..7) {
            let s = random_state(seed, m);
            let u = haar_random_unitary(m, seed);
            let v = haar_random_unitary(m, seed + 7);
            let two = s.apply_unitary(&u).unwrap().apply_unitary(&v).unwrap();
            let one = s.apply_unitary(&(&v * &u)).unwrap();
            prop_assert!(crate::linalg::max_abs_diff(two.normal_block(), one.normal_block()) < 1e-10);
            prop_assert!(crate::linalg::max_abs_diff(two.pairing_block(), one.pairing_block()) < 1e-10);
        }

        #[test]
        fn loss_composition(seed in 0u64..1000, a in proptest::collection::vec(0.0f64..=1.0, 4), b in proptest::collection::vec(0.0f64..=1.0, 4)) {
            let s = random_state(seed, 4).apply_unitary(&haar_random_unitary(4, seed)).unwrap();
            let two = s.apply_loss(&a).unwrap().apply_loss(&b).unwrap();
            let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
            let one = s.apply_loss(&ab).unwrap();
            prop_assert!(crate::linalg::max_abs_diff(two.normal_block(), one.normal_block()) < 1e-12);
            prop_assert!(crate::linalg::max_abs_diff(two.pairing_block(), one.pairing_block()) < 1e-12);
        }

        #[test]
        fn uniform_loss_commutes_with_unitary(seed in 0u64..1000, eta in 0.0f64..=1.0) {
            let s = random_state(seed, 6);
            let u = haar_random_unitary(6, seed);
            let e = vec![eta; 6];
            let a = s.apply_unitary(&u).unwrap().apply_loss(&e).unwrap();
            let b = s.apply_loss(&e).unwrap().apply_unitary(&u).unwrap();
            prop_assert!(crate::linalg::max_abs_diff(a.normal_block(), b.normal_block()) < 1e-10);
            prop_assert!(crate::linalg::max_abs_diff(a.pairing_block(), b.pairing_block()) < 1e-10);
        }

        #[test]
        fn pipelines_stay_physical(seed in 0u64..1000, eta in proptest::collection::vec(0.0f64..=1.0, 6)) {
            let s = random_state(seed, 6)
                .apply_unitary(&haar_random_unitary(6, seed)).unwrap()
                .apply_loss(&eta).unwrap()
                .apply_unitary(&haar_random_unitary(6, seed + 1)).unwrap();
            prop_assert!(s.check_physical().is_ok());
        }

        #[test]
        fn reduction_preserves_vacuum_probability(seed in 0u64..1000, mask in 1u32..64) {
            let s = random_state(seed, 6).apply_unitary(&haar_random_unitary(6, seed)).unwrap()
                .apply_loss(&[0.9, 0.8, 0.7, 0.6, 0.5, 0.95]).unwrap();
            let modes: Vec<usize> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
            let r = s.reduce_modes(&modes).unwrap();
            let local: Vec<usize> = (0..modes.len()).collect();
            let a = r.vacuum_probability(&local).unwrap();
            let b = s.vacuum_probability(&modes).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
