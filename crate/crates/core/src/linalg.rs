//! Small dense helpers shared by the operator modules.

use nalgebra::{DMatrix, DVector};

use crate::C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_real(m: &CMat, tol: f64) -> bool {
    let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm())).max(1.0);
    m.iter().all(|z| z.im.abs() <= tol * scale)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0f64, |acc, &s| acc.max(s))
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// 2-norm condition number; infinite for singular or empty input.
pub fn cond2(m: &CMat) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    let inv = m.clone().lu().try_inverse()?;
    all_finite(&inv).then_some(inv)
}

pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    let x = a.clone().lu().solve(b)?;
    all_finite(&x).then_some(x)
}

/// Relative residual ||a - b|| / max(||b||, tiny) in the Frobenius norm.
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}

pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let (n1, m1) = a.shape();
    let (n2, m2) = b.shape();
    let mut out = CMat::zeros(n1 + n2, m1 + m2);
    out.view_mut((0, 0), (n1, m1)).copy_from(a);
    out.view_mut((n1, m1), (n2, m2)).copy_from(b);
    out
}

/// Bottleneck matching distance between two equally sized point sets:
/// the smallest d such that a perfect matching exists using only pairs
/// at distance <= d. Returns infinity when the sizes differ.
pub fn matching_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    if a.is_empty() {
        return 0.0;
    }
    let n = a.len();
    let dist: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| (x - y).norm()).collect()).collect();
    let mut cands: Vec<f64> = dist.iter().flatten().copied().collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(&dist, n, cands[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    cands[lo]
}

fn perfect_matching(dist: &[Vec<f64>], n: usize, thr: f64) -> bool {
    fn augment(u: usize, dist: &[Vec<f64>], thr: f64, seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for v in 0..dist.len() {
            if dist[u][v] <= thr && !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, dist, thr, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; n];
    (0..n).all(|u| {
        let mut seen = vec![false; n];
        augment(u, dist, thr, &mut seen, &mut owner)
    })
}

/// Least-squares line fit y = a + b x; returns (a, b).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_handles_permutations() {
        let a = [c(1.0, 0.0), c(-2.0, 1.0), c(3.0, 0.0)];
        let b = [c(3.0, 1e-9), c(1.0, 0.0), c(-2.0, 1.0)];
        assert!(matching_distance(&a, &b) <= 1e-9);
        let b2 = [c(3.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)];
        assert!((matching_distance(&a, &b2) - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(-3.0, 0.0), c(0.0, 2.0)]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
        assert!((cond2(&m) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 - 2.0 * x).collect();
        let (a, b) = fit_line(&xs, &ys);
        assert!((a - 0.5).abs() < 1e-12 && (b + 2.0).abs() < 1e-12);
    }
}
