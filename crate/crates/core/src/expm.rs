//! Matrix exponential by scaling and squaring with the degree-13 Padé
//! approximant, and the semigroup evaluation built on it.

use nalgebra::{ComplexField, DMatrix};

use crate::linalg::{identity, CMat};
use crate::operator::Operator;
use crate::{Error, Result, C64};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm bound below which the unscaled degree-13 approximant meets
/// double precision.
const THETA13: f64 = 5.371920351148152;

fn one_norm<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.clone().modulus()).sum::<f64>()).fold(0.0, f64::max)
}

fn finite<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> bool {
    m.iter().all(|z| z.clone().modulus().is_finite())
}

/// `exp(a)`; fails with [`Error::Overflow`] when the result is not finite.
pub fn expm(a: &CMat) -> Result<CMat> {
    expm_generic(a)
}

/// Real-arithmetic variant of [`expm`].
pub fn expm_real(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    expm_generic(a)
}

fn expm_generic<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::NonFinite("matrix exponential argument".into()));
    }
    if norm == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scale = |m: &DMatrix<T>, c: f64| m.map(|z| z * T::from_real(c));
    let a = scale(a, 0.5f64.powi(s));
    let b = &PADE13;
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]))
        + scale(&a6, b[7])
        + scale(&a4, b[5])
        + scale(&a2, b[3])
        + scale(&id, b[1]);
    let u = &a * u_inner;
    let v = &a6 * (scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]))
        + scale(&a6, b[6])
        + scale(&a4, b[4])
        + scale(&a2, b[2])
        + scale(&id, b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).filter(finite).ok_or(Error::Overflow { norm })?;
    for _ in 0..s {
        r = &r * &r;
        if !finite(&r) {
            return Err(Error::Overflow { norm });
        }
    }
    Ok(r)
}

/// `e^{op t}` for `t >= 0`; exactly the identity at `t = 0`.
pub fn semigroup_apply(op: &Operator, t: f64) -> Result<Operator> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("semigroup time t = {t} must be finite and >= 0")));
    }
    let n = op.dim();
    if t == 0.0 {
        return Operator::new(identity(n), format!("exp({}*0)", op.label));
    }
    let at = op.entries().map(|z| z * t);
    let e = expm(&at).map_err(|err| match err {
        Error::Overflow { .. } => Error::Overflow { norm: crate::linalg::spectral_norm(&at) },
        other => other,
    })?;
    Operator::new(e, format!("exp({}*{t})", op.label))
}

/// `(e^{a h}, int_0^h e^{a s} ds)` from one exponential of the augmented
/// matrix `[[a h, h I], [0, 0]]`.
pub fn exp_with_integral(a: &CMat, h: f64) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    let mut aug = CMat::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&a.map(|z| z * h));
    for i in 0..n {
        aug[(i, n + i)] = C64::new(h, 0.0);
    }
    let e = expm(&aug)?;
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, n)).into_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn zero_time_is_identity() {
        let op = Operator::new(CMat::from_element(3, 3, c(1.0, 2.0)), "a").unwrap();
        let e = semigroup_apply(&op, 0.0).unwrap();
        assert_eq!(e.entries(), &identity(3));
    }

    #[test]
    fn scalar_decay() {
        let op = Operator::new(CMat::from_element(1, 1, c(-1.0, 0.0)), "a").unwrap();
        let e = semigroup_apply(&op, 1.0).unwrap();
        assert!((e.entries()[(0, 0)] - c((-1.0f64).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn nilpotent_has_finite_series() {
        let m = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let e = semigroup_apply(&Operator::new(m, "n").unwrap(), 1.0).unwrap();
        let want = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!((e.entries() - want).norm() < 1e-15);
    }

    #[test]
    fn negative_time_rejected() {
        let op = Operator::new(CMat::zeros(1, 1), "a").unwrap();
        assert!(matches!(semigroup_apply(&op, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let op = Operator::new(CMat::from_element(1, 1, c(50.0, 0.0)), "a").unwrap();
        assert!(matches!(semigroup_apply(&op, 100.0), Err(Error::Overflow { .. })));
    }

    #[test]
    fn rotation_generator() {
        let m = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let t = 2.5f64;
        let e = expm(&m.map(|z| z * t)).unwrap();
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn integral_of_scalar_exponential() {
        let a = CMat::from_element(1, 1, c(-3.0, 0.0));
        let h = 0.7;
        let (e, phi) = exp_with_integral(&a, h).unwrap();
        assert!((e[(0, 0)].re - (-3.0 * h).exp()).abs() < 1e-15);
        assert!((phi[(0, 0)].re - (1.0 - (-3.0 * h).exp()) / 3.0).abs() < 1e-15);
    }
}
