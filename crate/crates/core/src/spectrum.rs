//! Full eigendecomposition with biorthogonal left/right bases.
//!
//! Eigenvalues come from a complex Schur form `A = Q T Q*`. Right
//! eigenvectors are recovered by back substitution on `T`; the left basis
//! is the conjugate transpose of `V^{-1}`, so `W* V = I` holds by
//! construction whenever `V` is well conditioned. When it is not, the left
//! vectors are taken from the adjoint eigenproblem and biorthogonalized
//! against the right ones through the Gram matrix.

use std::cmp::Ordering;

use nalgebra::Schur;

use crate::linalg::{cond2, identity, inverse, CMat};
use crate::operator::Operator;
use crate::{Error, Result, C64};

pub const DEFAULT_TOL_UNSTABLE: f64 = 1e-9;
/// Eigenbasis conditioning above this is flagged and refused by the
/// fractional-power calculus.
pub const COND_LIMIT: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Sorted by decreasing real part (ties: decreasing imaginary part).
    pub eigenvalues: Vec<C64>,
    /// Unit-norm right eigenvectors, one per column.
    pub right_vectors: CMat,
    /// Left eigenvectors scaled so that `left* right = I`.
    pub left_vectors: CMat,
    pub unstable_count: usize,
    pub cond_estimate: f64,
    pub ill_conditioned: bool,
    pub defective: bool,
    pub warnings: Vec<String>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest real part over the spectrum.
    pub fn abscissa(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn unstable_eigenvalues(&self) -> &[C64] {
        &self.eigenvalues[..self.unstable_count]
    }

    /// First stable eigenvalue, if any.
    pub fn first_stable(&self) -> Option<C64> {
        self.eigenvalues.get(self.unstable_count).copied()
    }

    pub fn right_unstable(&self) -> CMat {
        self.right_vectors.columns(0, self.unstable_count).into_owned()
    }

    pub fn left_unstable(&self) -> CMat {
        self.left_vectors.columns(0, self.unstable_count).into_owned()
    }

    /// max_ij |<phi_i, psi_j> - delta_ij|
    pub fn biorthogonality_error(&self) -> f64 {
        let g = self.left_vectors.adjoint() * &self.right_vectors;
        let n = g.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Reconstruct `V diag(f(lambda)) W*`.
    pub fn function_of(&self, f: impl Fn(C64) -> C64) -> CMat {
        let mut scaled = self.right_vectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let fj = f(lam);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= fj;
            }
        }
        scaled * self.left_vectors.adjoint()
    }
}

fn is_upper_triangular(m: &CMat) -> bool {
    (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == C64::new(0.0, 0.0)))
}

fn try_schur(m: &CMat) -> Option<(CMat, CMat)> {
    let n = m.nrows();
    Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10)).map(|s| s.unpack())
}

fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    if is_upper_triangular(m) {
        return Ok((identity(n), m.clone()));
    }
    if let Some(qt) = try_schur(m) {
        return Ok(qt);
    }
    // Shifted QR can stall on exactly structured input (e.g. nilpotent
    // blocks); retry once after a fixed unitary similarity.
    let z = CMat::from_fn(n, n, |i, j| {
        let t = (i * n + j) as f64;
        C64::new((1.3 * t + 0.7).sin(), (0.9 * t + 0.2).cos())
    });
    let q0 = z.qr().q();
    try_schur(&(q0.adjoint() * m * &q0))
        .map(|(q, t)| (q0 * q, t))
        .ok_or_else(|| Error::NoConvergence(format!("Schur iteration on a {n}x{n} matrix")))
}

/// Eigenvalues only, in the same order as [`spectrum`].
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let (_, t) = schur(m)?;
    let mut ev: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    ev.sort_by(cmp_eigen);
    Ok(ev)
}

pub fn spectral_abscissa(m: &CMat) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

fn cmp_eigen(a: &C64, b: &C64) -> Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

/// Right eigenvectors of an upper-triangular matrix, one per column.
fn triangular_eigenvectors(t: &CMat) -> CMat {
    const BIG: f64 = 1e100;
    let n = t.nrows();
    let smin = (f64::EPSILON * t.norm()).max(f64::MIN_POSITIVE * n as f64);
    let mut x = CMat::zeros(n, n);
    for k in 0..n {
        x[(k, k)] = C64::new(1.0, 0.0);
        let lam = t[(k, k)];
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * x[(j, k)];
            }
            let mut d = t[(i, i)] - lam;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            x[(i, k)] = -s / d;
            let mag = x[(i, k)].norm();
            if mag > BIG {
                for r in i..=k {
                    x[(r, k)] /= mag;
                }
            }
        }
    }
    x
}

fn eigenpairs(m: &CMat) -> Result<(Vec<C64>, CMat)> {
    let (q, t) = schur(m)?;
    let n = t.nrows();
    let x = triangular_eigenvectors(&t);
    let mut v = q * x;
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            // unit norm, largest component real and positive
            let (imax, _) =
                col.iter()
                    .enumerate()
                    .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best });
            let phase = col[imax] / col[imax].norm();
            let s = phase.conj() / norm;
            for z in col.iter_mut() {
                *z *= s;
            }
        }
    }
    let ev: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_eigen(&ev[a], &ev[b]));
    let sorted_ev = order.iter().map(|&i| ev[i]).collect();
    let sorted_v = CMat::from_fn(n, n, |r, j| v[(r, order[j])]);
    Ok((sorted_ev, sorted_v))
}

/// Full eigendecomposition of `op`, counting eigenvalues with
/// `Re >= -tol_unstable` as unstable.
pub fn spectrum(op: &Operator, tol_unstable: f64) -> Result<SpectralData> {
    let m = op.entries();
    let (eigenvalues, right) = eigenpairs(m)?;
    let cond = cond2(&right);
    let mut warnings = Vec::new();
    let ill = cond > COND_LIMIT;
    let mut defective = false;

    let left = match inverse(&right).filter(|_| !ill) {
        Some(vinv) => vinv.adjoint(),
        None => {
            defective = true;
            warnings.push(format!(
                "eigenvector basis of '{}' has condition {cond:.3e}; matrix treated as defective, left basis from the adjoint eigenproblem",
                op.label
            ));
            adjoint_left_basis(m, &eigenvalues, &right, &mut warnings)?
        }
    };

    let unstable_count = eigenvalues.iter().filter(|z| z.re >= -tol_unstable).count();
    Ok(SpectralData {
        eigenvalues,
        right_vectors: right,
        left_vectors: left,
        unstable_count,
        cond_estimate: cond.max(1.0),
        ill_conditioned: ill,
        defective,
        warnings,
    })
}

fn adjoint_left_basis(m: &CMat, eigenvalues: &[C64], right: &CMat, warnings: &mut Vec<String>) -> Result<CMat> {
    let n = eigenvalues.len();
    let (adj_ev, adj_v) = eigenpairs(&m.adjoint())?;
    // pair each eigenvalue with the nearest unused conjugate adjoint eigenvalue
    let mut used = vec![false; n];
    let mut raw = CMat::zeros(n, n);
    for (i, lam) in eigenvalues.iter().enumerate() {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (j, mu) in adj_ev.iter().enumerate() {
            let d = (mu.conj() - lam).norm();
            if !used[j] && d < best_d {
                best_d = d;
                best = Some(j);
            }
        }
        let j = best.expect("adjoint spectrum has the same size");
        used[j] = true;
        raw.set_column(i, &adj_v.column(j));
    }
    let gram = raw.adjoint() * right;
    let gcond = cond2(&gram);
    if gcond > COND_LIMIT {
        warnings.push(format!("left/right Gram matrix condition {gcond:.3e}"));
    }
    Ok(match inverse(&gram) {
        Some(ginv) => raw * ginv.adjoint(),
        None => {
            warnings.push("Gram matrix singular; left basis not biorthogonalized".into());
            raw
        }
    })
}

/// Spectral projection onto the first `count` eigenvectors.
pub fn projection(sd: &SpectralData, count: usize) -> CMat {
    let n = sd.dim();
    if count == 0 {
        return CMat::zeros(n, n);
    }
    sd.right_vectors.columns(0, count) * sd.left_vectors.columns(0, count).adjoint()
}

/// Identity check used by tests and diagnostics.
pub fn reconstruct(sd: &SpectralData) -> CMat {
    sd.function_of(|z| z)
}
