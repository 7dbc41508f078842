//! Finite-dimensional feedback synthesis on the unstable spectral subspace:
//! projection, reduced pair, Hautus margins, pole placement and assembly
//! of the feedback operator in spectral or localized form.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{cond2, identity, inverse, matching_distance, singular_values, CMat, CVec};
use crate::operator::{GreenMap, Operator};
use crate::spectrum::{self, eigenvalues, SpectralData};
use crate::{Error, Result, C64};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Tolerance on the achieved reduced spectrum after pole placement.
pub const PLACEMENT_TOL: f64 = 1e-6;
const GRAMIAN_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackMode {
    /// Functionals are combinations of left eigenvectors; `F = F P_N`.
    Spectral,
    /// Functionals are weighted inner products supported on a subregion.
    Localized,
}

impl FeedbackMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeedbackMode::Spectral => "spectral",
            FeedbackMode::Localized => "localized",
        }
    }
}

impl fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(FeedbackMode::Spectral),
            "localized" => Ok(FeedbackMode::Localized),
            other => Err(Error::Config(format!("unknown feedback mode '{other}' (expected spectral or localized)"))),
        }
    }
}

/// Rank-K feedback `F y = sum_k <y, f_k>_weights g_k`.
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    pub mode: FeedbackMode,
    /// K x N gain in unstable eigen-coordinates.
    pub gain: CMat,
    /// Observation vectors `w_k` (localized) or functionals `p_k` (spectral).
    pub functionals: Vec<CVec>,
    /// Inner-product weights on the state grid (ones in spectral mode).
    pub weights: Vec<f64>,
    pub boundary_profiles: Vec<CVec>,
    pub omega_mask: Option<Vec<bool>>,
    pub targets: Vec<C64>,
    as_matrix: CMat,
}

fn outer_sum(profiles: &[CVec], functionals: &[CVec], weights: &[f64], m: usize, n: usize) -> CMat {
    let mut f = CMat::zeros(m, n);
    for (g, w) in profiles.iter().zip(functionals) {
        let row = CVec::from_fn(n, |i, _| w[i] * weights[i]).adjoint();
        f += g * row;
    }
    f
}

impl FeedbackLaw {
    /// Assemble `as_matrix` from its parts, checking shapes and, in
    /// localized mode, that every observation vector vanishes outside the
    /// support of `weights`.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        mode: FeedbackMode,
        gain: CMat,
        functionals: Vec<CVec>,
        weights: Vec<f64>,
        boundary_profiles: Vec<CVec>,
        input_dim: usize,
        targets: Vec<C64>,
    ) -> Result<Self> {
        let n = weights.len();
        if functionals.len() != boundary_profiles.len() {
            return Err(Error::mismatch("feedback profiles", functionals.len(), boundary_profiles.len()));
        }
        if let Some(w) = functionals.iter().find(|w| w.len() != n) {
            return Err(Error::mismatch("observation vector", n, w.len()));
        }
        if let Some(g) = boundary_profiles.iter().find(|g| g.len() != input_dim) {
            return Err(Error::mismatch("boundary profile", input_dim, g.len()));
        }
        let omega_mask = match mode {
            FeedbackMode::Spectral => None,
            FeedbackMode::Localized => {
                let mask: Vec<bool> = weights.iter().map(|&q| q > 0.0).collect();
                for w in &functionals {
                    if w.iter().zip(&mask).any(|(z, &inside)| !inside && *z != C64::new(0.0, 0.0)) {
                        return Err(Error::Config("observation vector is nonzero outside omega".into()));
                    }
                }
                Some(mask)
            }
        };
        let as_matrix = outer_sum(&boundary_profiles, &functionals, &weights, input_dim, n);
        Ok(FeedbackLaw { mode, gain, functionals, weights, boundary_profiles, omega_mask, targets, as_matrix })
    }

    /// `F = 0` between an n-dimensional state and m inputs.
    pub fn zero(input_dim: usize, state_dim: usize) -> Self {
        FeedbackLaw {
            mode: FeedbackMode::Spectral,
            gain: CMat::zeros(0, 0),
            functionals: Vec::new(),
            weights: vec![1.0; state_dim],
            boundary_profiles: Vec::new(),
            omega_mask: None,
            targets: Vec::new(),
            as_matrix: CMat::zeros(input_dim, state_dim),
        }
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.as_matrix
    }

    pub fn rank(&self) -> usize {
        self.functionals.len()
    }

    pub fn input_dim(&self) -> usize {
        self.as_matrix.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.as_matrix.ncols()
    }

    /// Entrywise distance between `as_matrix` and the rank-K sum rebuilt
    /// from the stored parts.
    pub fn reassembly_residual(&self) -> f64 {
        let rebuilt =
            outer_sum(&self.boundary_profiles, &self.functionals, &self.weights, self.input_dim(), self.state_dim());
        (&rebuilt - &self.as_matrix).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Drop imaginary parts of functionals and profiles when the realized
    /// operator is real up to `rel_tol * ||F||`.
    fn realified(mut self, rel_tol: f64) -> Self {
        let scale = self.as_matrix.norm();
        let imag = self.as_matrix.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
        if scale == 0.0 || imag > rel_tol * scale {
            return self;
        }
        let strip = |v: &mut CVec| v.iter_mut().for_each(|z| z.im = 0.0);
        self.functionals.iter_mut().for_each(strip);
        self.boundary_profiles.iter_mut().for_each(strip);
        self.as_matrix =
            outer_sum(&self.boundary_profiles, &self.functionals, &self.weights, self.input_dim(), self.state_dim());
        self
    }
}

/// Projected control system on the unstable subspace.
#[derive(Debug, Clone)]
pub struct ReducedPair {
    pub eigenvalues: Vec<C64>,
    /// `diag(lambda_1..lambda_N)`.
    pub lambda_n: CMat,
    /// N x m influence matrix in eigen-coordinates.
    pub b_n: CMat,
    pub hautus_margins: Vec<f64>,
    /// Index groups of numerically equal eigenvalues.
    pub clusters: Vec<Vec<usize>>,
}

fn same_eigenvalue(a: C64, b: C64) -> bool {
    (a - b).norm() <= 1e-8 * a.norm().max(1.0)
}

fn cluster_indices(ev: &[C64]) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &z) in ev.iter().enumerate() {
        match clusters.iter_mut().find(|c| c.iter().any(|&j| same_eigenvalue(ev[j], z))) {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }
    clusters
}

impl ReducedPair {
    pub fn new(eigenvalues: Vec<C64>, b_n: CMat) -> Result<Self> {
        let n = eigenvalues.len();
        if b_n.nrows() != n {
            return Err(Error::mismatch("reduced input matrix rows", n, b_n.nrows()));
        }
        let lambda_n = CMat::from_diagonal(&CVec::from_vec(eigenvalues.clone()));
        let clusters = cluster_indices(&eigenvalues);
        let mut hautus_margins = vec![0.0; n];
        for c in &clusters {
            let margin = if c.len() > b_n.ncols() {
                0.0
            } else {
                let rows = CMat::from_fn(c.len(), b_n.ncols(), |r, j| b_n[(c[r], j)]);
                singular_values(&rows)[c.len() - 1]
            };
            for &i in c {
                hautus_margins[i] = margin;
            }
        }
        Ok(ReducedPair { eigenvalues, lambda_n, b_n, hautus_margins, clusters })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn input_dim(&self) -> usize {
        self.b_n.ncols()
    }

    /// The same pair seen through K input directions: `B_N <- B_N profiles`.
    pub fn with_inputs(&self, profiles: &CMat) -> Result<Self> {
        if profiles.nrows() != self.input_dim() {
            return Err(Error::mismatch("input profiles", self.input_dim(), profiles.nrows()));
        }
        ReducedPair::new(self.eigenvalues.clone(), &self.b_n * profiles)
    }
}

/// `P_N`, or `None` when nothing is unstable.
pub fn unstable_projection(spectral: &SpectralData) -> Result<Option<Operator>> {
    let count = spectral.unstable_count;
    if count == 0 {
        return Ok(None);
    }
    let p = spectrum::projection(spectral, count);
    let residual = (&p * &p - &p).norm() / p.norm();
    if residual > 1e-8 {
        return Err(Error::IdentityViolation { identity: "P_N^2 = P_N", residual, tol: 1e-8 });
    }
    Ok(Some(Operator::new(p, format!("P_{count}"))?))
}

/// Reduced pair with `B_N = Psi_N^* (oseen G)`.
pub fn reduce(spectral: &SpectralData, oseen: &Operator, green: &GreenMap) -> Result<ReducedPair> {
    if green.state_dim() != oseen.dim() {
        return Err(Error::mismatch("green map rows", oseen.dim(), green.state_dim()));
    }
    reduce_with_input(spectral, &(oseen.entries() * green.entries()))
}

/// Reduced pair for an arbitrary n x m state-space input matrix.
pub fn reduce_with_input(spectral: &SpectralData, input: &CMat) -> Result<ReducedPair> {
    let count = spectral.unstable_count;
    if count == 0 {
        return Err(Error::Usage("no unstable eigenvalues to reduce onto".into()));
    }
    if input.nrows() != spectral.dim() {
        return Err(Error::mismatch("input matrix rows", spectral.dim(), input.nrows()));
    }
    let b_n = spectral.left_unstable().adjoint() * input;
    ReducedPair::new(spectral.unstable_eigenvalues().to_vec(), b_n)
}

/// Per-eigenvalue Hautus margins against a tolerance.
#[derive(Debug, Clone)]
pub struct RankReport {
    pub eigenvalues: Vec<C64>,
    pub margins: Vec<f64>,
    pub tol: f64,
}

impl RankReport {
    pub fn passed(&self) -> bool {
        self.failing().is_empty()
    }

    /// One-based indices of eigenvalues at or below the tolerance.
    pub fn failing(&self) -> Vec<usize> {
        self.margins.iter().enumerate().filter(|(_, &m)| m.is_nan() || m <= self.tol).map(|(i, _)| i + 1).collect()
    }
}

impl fmt::Display for RankReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k,re_lambda,im_lambda,hautus_margin,status")?;
        for (i, (z, m)) in self.eigenvalues.iter().zip(&self.margins).enumerate() {
            let status = if *m > self.tol { "PASS" } else { "FAIL" };
            writeln!(f, "{},{:e},{:e},{:e},{status}", i + 1, z.re, z.im, m)?;
        }
        Ok(())
    }
}

pub fn rank_check(rp: &ReducedPair, tol: f64) -> RankReport {
    RankReport { eigenvalues: rp.eigenvalues.clone(), margins: rp.hautus_margins.clone(), tol }
}

/// Largest geometric multiplicity among the unstable eigenvalues.
pub fn choose_k(spectral: &SpectralData) -> usize {
    let count = spectral.unstable_count;
    cluster_indices(spectral.unstable_eigenvalues())
        .iter()
        .map(|c| {
            let cols = CMat::from_fn(spectral.dim(), c.len(), |r, j| spectral.right_vectors[(r, c[j])]);
            let sv = singular_values(&cols);
            let top = sv.first().copied().unwrap_or(0.0);
            sv.iter().filter(|&&s| s > 1e-8 * top).count()
        })
        .max()
        .unwrap_or(0)
        .min(count)
}

/// `-|Re lambda_{N+1}| - i` for `i = 1..N` (`-i` when every mode is unstable).
pub fn default_targets(spectral: &SpectralData) -> Vec<C64> {
    let base = spectral.first_stable().map_or(0.0, |z| z.re.abs());
    (1..=spectral.unstable_count).map(|i| C64::new(-base - i as f64, 0.0)).collect()
}

fn conjugate_closed(points: &[C64]) -> bool {
    let conj: Vec<C64> = points.iter().map(|z| z.conj()).collect();
    matching_distance(points, &conj) <= 1e-10 * points.iter().fold(1.0f64, |a, z| a.max(z.norm()))
}

/// Pick K canonical input directions maximizing the smallest Hautus margin
/// of the reduced pair. Returns an m x K selection matrix.
pub fn select_profiles(rp: &ReducedPair, k: usize) -> CMat {
    let m = rp.input_dim();
    let k = k.clamp(1, m.max(1));
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let sel = selection(m, &subset);
        let score =
            rp.with_inputs(&sel).map(|r| r.hautus_margins.iter().fold(f64::INFINITY, |a, &b| a.min(b))).unwrap_or(0.0);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, subset.clone()));
        }
        if !next_combination(&mut subset, m) {
            break;
        }
    }
    selection(m, &best.expect("at least one subset").1)
}

fn selection(m: usize, cols: &[usize]) -> CMat {
    CMat::from_fn(m, cols.len(), |r, j| C64::new(if r == cols[j] { 1.0 } else { 0.0 }, 0.0))
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gain `K x N` placing `spec(Lambda_N - B_N gain)` at `targets`.
///
/// A single input with distinct eigenvalues uses the closed-form formula.
/// Otherwise eigenvalues are moved one at a time by rank-1 updates along
/// left eigenvectors of the current closed loop, which spreads the gain
/// over the inputs in proportion to their authority on each mode.
pub fn place_poles(rp: &ReducedPair, targets: &[C64]) -> Result<CMat> {
    let n = rp.dim();
    if targets.len() != n {
        return Err(Error::Usage(format!("{} targets given for {n} unstable eigenvalues", targets.len())));
    }
    if let Some(t) = targets.iter().find(|t| !(t.re < 0.0)) {
        return Err(Error::Usage(format!("pole target {t} is not in the open left half-plane")));
    }
    if let Some((i, &margin)) = rp.hautus_margins.iter().enumerate().find(|(_, &m)| !(m > DEFAULT_RANK_TOL)) {
        return Err(Error::Uncontrollable { index: i + 1, eigenvalue: rp.eigenvalues[i], margin });
    }
    let gain = if rp.input_dim() == 1 && rp.clusters.iter().all(|c| c.len() == 1) {
        single_input_gain(rp, targets)
    } else {
        sequential_gain(rp, targets)?
    };
    let achieved = eigenvalues(&(&rp.lambda_n - &rp.b_n * &gain))?;
    let distance = matching_distance(&achieved, targets);
    let scale = rp.eigenvalues.iter().chain(targets).fold(1.0f64, |a, z| a.max(z.norm()));
    if !(distance <= PLACEMENT_TOL * scale) {
        return Err(Error::Placement { distance });
    }
    Ok(gain)
}

fn single_input_gain(rp: &ReducedPair, targets: &[C64]) -> CMat {
    let n = rp.dim();
    let m = rp.input_dim();
    let b = &rp.b_n;
    let mut candidates: Vec<CVec> =
        (0..m).map(|j| CVec::from_fn(m, |r, _| C64::new(if r == j { 1.0 } else { 0.0 }, 0.0))).collect();
    candidates.push(CVec::from_element(m, C64::new(1.0, 0.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..8 {
        candidates.push(CVec::from_fn(m, |_, _| C64::new(rng.gen_range(-1.0..1.0), 0.0)));
    }
    let score = |v: &CVec| (b * v).iter().fold(f64::INFINITY, |a, z| a.min(z.norm())) / v.norm();
    let v = candidates.into_iter().max_by(|x, y| score(x).total_cmp(&score(y))).expect("candidate list is non-empty");
    let bv = b * &v;
    let lam = &rp.eigenvalues;
    let k = CVec::from_fn(n, |i, _| {
        let num: C64 = targets.iter().map(|mu| lam[i] - mu).product();
        let den: C64 = (0..n).filter(|&j| j != i).map(|j| lam[i] - lam[j]).product();
        num / (bv[i] * den)
    });
    v * k.transpose()
}

fn sequential_gain(rp: &ReducedPair, targets: &[C64]) -> Result<CMat> {
    let n = rp.dim();
    let b = &rp.b_n;
    let mut gain = CMat::zeros(rp.input_dim(), n);
    for (i, &mu) in targets.iter().enumerate() {
        let lam = rp.eigenvalues[i];
        let closed = &rp.lambda_n - b * &gain;
        let shifted = &closed - identity(n) * lam;
        let svd = shifted.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.max();
        let null: Vec<usize> = (0..n).filter(|&j| svd.singular_values[j] <= 1e-8 * smax.max(1.0)).collect();
        if null.is_empty() {
            return Err(Error::Placement { distance: svd.singular_values.min() });
        }
        let basis = CMat::from_fn(n, null.len(), |r, j| u[(r, null[j])]);
        // direction in the left eigenspace with the most input authority
        let reach = (b.adjoint() * &basis).svd(false, true);
        let vt = reach.v_t.expect("right singular vectors requested");
        let jbest = reach.singular_values.imax();
        let coeff = vt.row(jbest).adjoint();
        let ell = &basis * coeff;
        let w = b.adjoint() * &ell;
        let denom = (ell.adjoint() * b * &w)[(0, 0)];
        if denom.norm() <= DEFAULT_RANK_TOL {
            return Err(Error::Uncontrollable { index: i + 1, eigenvalue: lam, margin: denom.norm().sqrt() });
        }
        let kappa = (lam - mu) / denom;
        gain += w * ell.adjoint() * kappa;
    }
    Ok(gain)
}

/// Assemble `F` from a placed gain.
///
/// Spectral mode uses `p_k = Psi_N gain_k^*`, so `F` vanishes on the stable
/// eigenvectors. Localized mode needs `omega_weights` (quadrature weights,
/// zero outside the observation region): `w_k` are masked combinations of
/// the unstable left eigenvectors, chosen so that `F Phi_N = profiles gain`.
pub fn build_feedback(
    gain: &CMat,
    mode: FeedbackMode,
    spectral: &SpectralData,
    omega_weights: Option<&[f64]>,
    profiles: &CMat,
    targets: &[C64],
) -> Result<FeedbackLaw> {
    let n = spectral.dim();
    let count = spectral.unstable_count;
    if gain.ncols() != count {
        return Err(Error::mismatch("gain columns", count, gain.ncols()));
    }
    if gain.nrows() != profiles.ncols() {
        return Err(Error::mismatch("gain rows", profiles.ncols(), gain.nrows()));
    }
    let k = gain.nrows();
    let psi = spectral.left_unstable();
    let (functionals, weights): (Vec<CVec>, Vec<f64>) = match mode {
        FeedbackMode::Spectral => {
            let p = &psi * gain.adjoint();
            ((0..k).map(|j| p.column(j).into_owned()).collect(), vec![1.0; n])
        }
        FeedbackMode::Localized => {
            let q = omega_weights.ok_or_else(|| Error::Usage("localized feedback needs observation weights".into()))?;
            if q.len() != n {
                return Err(Error::mismatch("observation weights", n, q.len()));
            }
            if q.iter().all(|&x| x <= 0.0) {
                return Err(Error::Synthesis {
                    reason: "observation region is empty".into(),
                    gramian_cond: f64::INFINITY,
                });
            }
            let masked = CMat::from_fn(n, count, |r, j| if q[r] > 0.0 { psi[(r, j)] } else { C64::new(0.0, 0.0) });
            let weighted = CMat::from_fn(n, count, |r, j| masked[(r, j)] * q[r]);
            let gram = weighted.adjoint() * spectral.right_unstable();
            let gcond = cond2(&gram);
            let ginv = inverse(&gram).filter(|_| gcond <= GRAMIAN_COND_LIMIT).ok_or_else(|| Error::Synthesis {
                reason: "masked observation Gramian is singular".into(),
                gramian_cond: gcond,
            })?;
            let coeff = ginv.adjoint() * gain.adjoint();
            let w = &masked * coeff;
            ((0..k).map(|j| w.column(j).into_owned()).collect(), q.to_vec())
        }
    };
    let profile_vecs = (0..k).map(|j| profiles.column(j).into_owned()).collect();
    let law = FeedbackLaw::assemble(
        mode,
        gain.clone(),
        functionals,
        weights,
        profile_vecs,
        profiles.nrows(),
        targets.to_vec(),
    )?;
    Ok(if conjugate_closed(targets) { law.realified(1e-8) } else { law })
}

/// For each unstable eigenvalue, the smallest fraction of eigenspace energy
/// seen through `omega_weights`:
/// `min_phi ||phi||^2_omega / ||phi||^2` over its eigenspace.
pub fn observability_margins(spectral: &SpectralData, omega_weights: &[f64], full_weights: &[f64]) -> Result<Vec<f64>> {
    let n = spectral.dim();
    if omega_weights.len() != n || full_weights.len() != n {
        return Err(Error::mismatch("quadrature weights", n, omega_weights.len().min(full_weights.len())));
    }
    let count = spectral.unstable_count;
    let mut out = vec![0.0; count];
    for c in cluster_indices(spectral.unstable_eigenvalues()) {
        let phi = CMat::from_fn(n, c.len(), |r, j| spectral.right_vectors[(r, c[j])]);
        let gram = |w: &[f64]| {
            let wp = CMat::from_fn(n, c.len(), |r, j| phi[(r, j)] * w[r]);
            phi.adjoint() * wp
        };
        let full = gram(full_weights);
        let part = gram(omega_weights);
        let chol = Cholesky::new(full).ok_or_else(|| Error::Synthesis {
            reason: "eigenspace Gramian not positive definite".into(),
            gramian_cond: f64::INFINITY,
        })?;
        let l = chol.l();
        let linv = inverse(&l).ok_or(Error::Synthesis {
            reason: "eigenspace Gramian factor singular".into(),
            gramian_cond: f64::INFINITY,
        })?;
        let s = &linv * part * linv.adjoint();
        let s = (&s + s.adjoint()) * C64::new(0.5, 0.0);
        let lo = SymmetricEigen::new(s).eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b)).max(0.0);
        for &i in &c {
            out[i] = lo;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::spectrum::{spectrum, DEFAULT_TOL_UNSTABLE};

    fn diag_op(vals: &[f64]) -> Operator {
        let v: Vec<C64> = vals.iter().map(|&x| c(x, 0.0)).collect();
        Operator::new(CMat::from_diagonal(&CVec::from_vec(v)), "d").unwrap()
    }

    #[test]
    fn projection_of_diag_pair() {
        let sd = spectrum(&diag_op(&[1.0, -1.0]), DEFAULT_TOL_UNSTABLE).unwrap();
        let p = unstable_projection(&sd).unwrap().unwrap();
        let want = CMat::from_diagonal(&CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]));
        // eigenvalue order puts +1 first; the operator diagonal had it second
        let want = CMat::from_fn(2, 2, |i, j| want[(1 - i, 1 - j)]);
        assert!((p.entries() - want).norm() < 1e-14);
        let sd = spectrum(&diag_op(&[-1.0, -2.0]), DEFAULT_TOL_UNSTABLE).unwrap();
        assert!(unstable_projection(&sd).unwrap().is_none());
    }

    #[test]
    fn scalar_reduced_pair() {
        let rp = ReducedPair::new(vec![c(6.13, 0.0)], CMat::from_element(1, 1, c(-0.7, 0.0))).unwrap();
        assert!((rp.hautus_margins[0] - 0.7).abs() < 1e-15);
        let rp = ReducedPair::new(vec![c(6.13, 0.0)], CMat::zeros(1, 1)).unwrap();
        assert_eq!(rp.hautus_margins[0], 0.0);
    }

    #[test]
    fn rank_check_names_failing_eigenvalue() {
        let report =
            RankReport { eigenvalues: vec![c(1.0, 0.0), c(2.0, 0.0)], margins: vec![0.5, 0.0], tol: DEFAULT_RANK_TOL };
        assert!(!report.passed());
        assert_eq!(report.failing(), vec![2]);
        assert!(report.to_string().contains("FAIL"));
    }

    #[test]
    fn scalar_pole_placement() {
        let rp = ReducedPair::new(vec![c(6.13, 0.0)], CMat::from_element(1, 1, c(1.0, 0.0))).unwrap();
        let g = place_poles(&rp, &[c(-2.0, 0.0)]).unwrap();
        assert!((g[(0, 0)] - c(8.13, 0.0)).norm() < 1e-12);
        let rp = ReducedPair::new(vec![c(1.0, 0.0)], CMat::from_element(1, 1, c(2.0, 0.0))).unwrap();
        let g = place_poles(&rp, &[c(-3.0, 0.0)]).unwrap();
        assert!((g[(0, 0)] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn placement_rejects_bad_requests() {
        let rp = ReducedPair::new(vec![c(1.0, 0.0)], CMat::from_element(1, 1, c(1.0, 0.0))).unwrap();
        assert!(matches!(place_poles(&rp, &[c(0.5, 0.0)]), Err(Error::Usage(_))));
        let rp = ReducedPair::new(vec![c(1.0, 0.0)], CMat::zeros(1, 1)).unwrap();
        assert!(matches!(place_poles(&rp, &[c(-1.0, 0.0)]), Err(Error::Uncontrollable { index: 1, .. })));
    }

    #[test]
    fn repeated_eigenvalue_two_inputs() {
        let rp = ReducedPair::new(
            vec![c(2.0, 0.0), c(2.0, 0.0)],
            CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, 0.0), c(-0.2, 0.0), c(1.0, 0.0)]),
        )
        .unwrap();
        assert_eq!(rp.clusters.len(), 1);
        let targets = [c(-1.0, 0.0), c(-3.0, 0.0)];
        let g = place_poles(&rp, &targets).unwrap();
        let ev = eigenvalues(&(&rp.lambda_n - &rp.b_n * g)).unwrap();
        assert!(matching_distance(&ev, &targets) < 1e-9);
    }

    #[test]
    fn repeated_eigenvalue_single_input_is_uncontrollable() {
        let rp =
            ReducedPair::new(vec![c(2.0, 0.0), c(2.0, 0.0)], CMat::from_row_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]))
                .unwrap();
        assert_eq!(rp.hautus_margins, vec![0.0, 0.0]);
    }

    #[test]
    fn choose_k_counts_eigenspace_rank() {
        let sd = spectrum(&diag_op(&[2.0, 2.0, -1.0]), DEFAULT_TOL_UNSTABLE).unwrap();
        assert_eq!(choose_k(&sd), 2);
        let sd = spectrum(&diag_op(&[6.1, -1.0]), DEFAULT_TOL_UNSTABLE).unwrap();
        assert_eq!(choose_k(&sd), 1);
    }

    #[test]
    fn default_targets_follow_first_stable() {
        let sd = spectrum(&diag_op(&[3.0, 1.0, -4.0]), DEFAULT_TOL_UNSTABLE).unwrap();
        assert_eq!(default_targets(&sd), vec![c(-5.0, 0.0), c(-6.0, 0.0)]);
    }

    #[test]
    fn zero_gain_gives_zero_feedback() {
        let sd = spectrum(&diag_op(&[1.0, -1.0]), DEFAULT_TOL_UNSTABLE).unwrap();
        let profiles = CMat::from_element(1, 1, c(1.0, 0.0));
        let law =
            build_feedback(&CMat::zeros(1, 1), FeedbackMode::Spectral, &sd, None, &profiles, &[c(-1.0, 0.0)]).unwrap();
        assert_eq!(law.as_matrix().norm(), 0.0);
    }

    #[test]
    fn combinations_enumerate_all_subsets() {
        let mut idx = vec![0, 1];
        let mut seen = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            seen.push(idx.clone());
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(seen.last().unwrap(), &vec![2, 3]);
    }
}
