//! Resolvents, translation, fractional powers and resolvent decay along rays.

use crate::linalg::{identity, inverse, spectral_norm, CMat};
use crate::operator::Operator;
use crate::spectrum::{self, SpectralData, COND_LIMIT};
use crate::{Error, Result, C64};

/// Eigenvalue proximity below which `lambda` is treated as in the spectrum.
pub const SINGULAR_DISTANCE: f64 = 1e-10;
pub const RESOLVENT_RESIDUAL_TOL: f64 = 1e-8;

/// `(lambda I - op)^{-1}`, with the residual `||(lambda I - op) R - I||`
/// checked against [`RESOLVENT_RESIDUAL_TOL`].
pub fn resolvent(op: &Operator, lambda: C64) -> Result<Operator> {
    let r = resolvent_matrix(op.entries(), lambda)?;
    Operator::new(r, format!("R({lambda}, {})", op.label))
}

pub(crate) fn resolvent_matrix(m: &CMat, lambda: C64) -> Result<CMat> {
    let n = m.nrows();
    let shifted = identity(n) * lambda - m;
    let inv = inverse(&shifted);
    // ||R||_2 >= 1/dist(lambda, spec), so a moderate norm rules out
    // proximity without an eigensolve.
    let suspicious = inv.as_ref().is_none_or(|r| r.norm() > 1.0 / SINGULAR_DISTANCE);
    if suspicious {
        let ev = spectrum::eigenvalues(m)?;
        let (eig, dist) = ev
            .iter()
            .map(|z| (*z, (z - lambda).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty spectrum");
        if dist < SINGULAR_DISTANCE || inv.is_none() {
            return Err(Error::Singular { lambda, eigenvalue: eig, distance: dist });
        }
    }
    let r = inv.expect("checked above");
    let residual = (&shifted * &r - identity(n)).norm();
    if residual > RESOLVENT_RESIDUAL_TOL {
        return Err(Error::IdentityViolation {
            identity: "resolvent (lambda I - op) R = I",
            residual,
            tol: RESOLVENT_RESIDUAL_TOL,
        });
    }
    Ok(r)
}

/// `k I - op` with `k = max(0, spectral abscissa) + 1`, so the translated
/// spectrum sits in `Re >= 1`.
pub fn translate(op: &Operator) -> Result<(f64, Operator)> {
    let k = spectrum::spectral_abscissa(op.entries())?.max(0.0) + 1.0;
    let m = identity(op.dim()) * C64::new(k, 0.0) - op.entries();
    Ok((k, Operator::new(m, format!("{k}I-{}", op.label))?))
}

fn check_power_domain(spectral: &SpectralData) -> Result<()> {
    if let Some(z) = spectral.eigenvalues.iter().find(|z| z.re <= 0.0) {
        return Err(Error::TranslationRequired { eigenvalue: *z });
    }
    if spectral.ill_conditioned || spectral.cond_estimate > COND_LIMIT {
        return Err(Error::IllConditioned { cond: spectral.cond_estimate });
    }
    Ok(())
}

/// Principal real power `V diag(lambda^e) V^{-1}` for any real exponent.
pub(crate) fn real_power(spectral: &SpectralData, exponent: f64) -> Result<CMat> {
    check_power_domain(spectral)?;
    Ok(spectral.function_of(|z| z.powf(exponent)))
}

/// `op^theta` for `theta` in (0,1) by the eigendecomposition of `op`
/// (principal branch). Requires the spectrum in the open right half-plane.
pub fn fractional_power(op: &Operator, theta: f64, spectral: &SpectralData) -> Result<Operator> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Domain(format!("fractional exponent {theta} not in (0,1)")));
    }
    if spectral.dim() != op.dim() {
        return Err(Error::mismatch("spectral data", op.dim(), spectral.dim()));
    }
    let p = real_power(spectral, theta)?;
    let q = real_power(spectral, 1.0 - theta)?;
    let a = op.entries();
    let residual = (&p * &q - a).norm() / a.norm().max(f64::MIN_POSITIVE);
    if residual > 1e-6 {
        return Err(Error::IdentityViolation { identity: "A^theta A^(1-theta) = A", residual, tol: 1e-6 });
    }
    Operator::new(p, format!("({})^{theta}", op.label))
}

/// `||R(lambda, op) op^{1-gamma}||` along real `lambda` values; `op` must be
/// the translated (right half-plane) operator.
pub fn ray_decay_check(op_translated: &Operator, gamma: f64, lambda_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("gamma {gamma} not in (0,1)")));
    }
    let sd = spectrum::spectrum(op_translated, 0.0)?;
    let power = fractional_power(op_translated, 1.0 - gamma, &sd)?;
    lambda_grid
        .iter()
        .map(|&lam| {
            let r = resolvent_matrix(op_translated.entries(), C64::new(lam, 0.0))?;
            Ok((lam.abs(), spectral_norm(&(r * power.entries()))))
        })
        .collect()
}

/// Least-squares slope of log(value) against log(|lambda|).
pub fn loglog_slope(table: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = table.iter().map(|(x, _)| x.ln()).collect();
    let ys: Vec<f64> = table.iter().map(|(_, y)| y.ln()).collect();
    crate::linalg::fit_line(&xs, &ys).1
}
