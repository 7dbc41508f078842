//! Closed-loop composition `A_F = oseen (I - G F) + B` and the identities
//! it must satisfy: the adjoint three-term split and the resolvent
//! perturbation formula.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{identity, solve, CMat};
use crate::operator::{GreenMap, Operator};
use crate::resolvent::{real_power, resolvent_matrix};
use crate::spectrum::{self, spectrum};
use crate::synthesis::FeedbackLaw;
use crate::{Error, Result, C64};

pub const ADJOINT_TOL: f64 = 1e-8;
/// Default `epsilon` in the `A^{1-epsilon}`-boundedness of the perturbation.
pub const DEFAULT_EPSILON: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct ClosedLoop {
    /// `-A`: the Hermitian part of `oseen`, shifted down by `translation`.
    pub generator_a: Operator,
    /// `A_o = oseen - (-A)`: skew part plus `translation * I`.
    pub perturbation_ao: Operator,
    pub translation: f64,
    pub oseen: Operator,
    pub green: GreenMap,
    pub feedback: FeedbackLaw,
    pub interior_b: Option<Operator>,
    pub composed: Operator,
}

/// Split `oseen = -A + A_o` with `A = kI - Herm(oseen)` positive definite.
fn split_generator(oseen: &Operator) -> Result<(Operator, Operator, f64)> {
    let m = oseen.entries();
    let half = C64::new(0.5, 0.0);
    let herm = (m + m.adjoint()) * half;
    let top = spectrum::spectral_abscissa(&herm)?;
    let k = top.max(0.0) + 1.0;
    let minus_a = &herm - identity(m.nrows()) * C64::new(k, 0.0);
    let ao = m - &minus_a;
    Ok((
        Operator::new(minus_a, format!("-A[{}]", oseen.label))?,
        Operator::new(ao, format!("A_o[{}]", oseen.label))?,
        k,
    ))
}

impl ClosedLoop {
    /// Assemble `oseen (I - G F) + B`, keeping every factor.
    pub fn compose(
        oseen: Operator,
        green: GreenMap,
        feedback: FeedbackLaw,
        interior_b: Option<Operator>,
    ) -> Result<Self> {
        let n = oseen.dim();
        let f = feedback.as_matrix();
        if green.state_dim() != n {
            return Err(Error::mismatch("green map rows", n, green.state_dim()));
        }
        if f.ncols() != n {
            return Err(Error::mismatch("feedback columns", n, f.ncols()));
        }
        if f.nrows() != green.input_dim() {
            return Err(Error::mismatch("feedback rows", green.input_dim(), f.nrows()));
        }
        if let Some(b) = &interior_b {
            if b.dim() != n {
                return Err(Error::mismatch("interior operator", n, b.dim()));
            }
        }
        let mut m = oseen.entries() * (identity(n) - green.entries() * f);
        if let Some(b) = &interior_b {
            m += b.entries();
        }
        let composed = Operator::new(m, format!("{}_F", oseen.label))?;
        let (generator_a, perturbation_ao, translation) = split_generator(&oseen)?;
        Ok(ClosedLoop { generator_a, perturbation_ao, translation, oseen, green, feedback, interior_b, composed })
    }

    pub fn dim(&self) -> usize {
        self.composed.dim()
    }

    /// Max entrywise gap between `composed` and a fresh assembly of its
    /// factors, relative to `||composed||`.
    pub fn composition_residual(&self) -> f64 {
        let n = self.dim();
        let mut m = self.oseen.entries() * (identity(n) - self.green.entries() * self.feedback.as_matrix());
        if let Some(b) = &self.interior_b {
            m += b.entries();
        }
        let gap = (&m - self.composed.entries()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        gap / self.composed.entries().norm().max(f64::MIN_POSITIVE)
    }

    /// Spectral abscissa of the composed operator.
    pub fn abscissa(&self) -> Result<f64> {
        spectrum::spectral_abscissa(self.composed.entries())
    }
}

/// Relative residual of the adjoint three-term decomposition.
#[derive(Debug, Clone)]
pub struct AdjointCheck {
    pub adjoint: Operator,
    pub residual: f64,
}

/// Conjugate transpose of `A_F`, checked against
/// `-A* + (F* G* A*^gamma) A*^{1-gamma} + (I - GF)* (A^{-(1-eps)} A_o)* A*^{1-eps} + B*`.
pub fn adjoint_closed_loop(cl: &ClosedLoop) -> Result<Operator> {
    adjoint_closed_loop_with(cl, DEFAULT_EPSILON).map(|c| c.adjoint)
}

pub fn adjoint_closed_loop_with(cl: &ClosedLoop, epsilon: f64) -> Result<AdjointCheck> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon {epsilon} not in (0,1)")));
    }
    let n = cl.dim();
    let gamma = cl.green.gamma;
    let a = -cl.generator_a.entries();
    let a_op = Operator::new(a.clone(), "A")?;
    let sd = spectrum(&a_op, 0.0)?;
    // A is Hermitian positive definite, so A* = A and its powers share V.
    let a_gamma = real_power(&sd, gamma)?;
    let a_one_minus_gamma = real_power(&sd, 1.0 - gamma)?;
    let a_one_minus_eps = real_power(&sd, 1.0 - epsilon)?;
    let a_neg = real_power(&sd, -(1.0 - epsilon))?;

    let g = cl.green.entries();
    let f = cl.feedback.as_matrix();
    let i_gf = identity(n) - g * f;

    let term1 = -a.adjoint();
    let term2 = (f.adjoint() * g.adjoint() * a_gamma.adjoint()) * a_one_minus_gamma.adjoint();
    let bounded = a_neg * cl.perturbation_ao.entries();
    let term3 = i_gf.adjoint() * bounded.adjoint() * a_one_minus_eps.adjoint();
    let mut sum = term1 + term2 + term3;
    if let Some(b) = &cl.interior_b {
        sum += b.entries().adjoint();
    }
    let adjoint = cl.composed.adjoint();
    let residual = (&sum - adjoint.entries()).norm() / adjoint.entries().norm().max(f64::MIN_POSITIVE);
    if !(residual <= ADJOINT_TOL) {
        return Err(Error::IdentityViolation {
            identity: "adjoint three-term decomposition",
            residual,
            tol: ADJOINT_TOL,
        });
    }
    Ok(AdjointCheck { adjoint, residual })
}

/// `||[I + R(l, oseen)(oseen G F - B)]^{-1} R(l, oseen) - R(l, A_F)|| / ||R(l, A_F)||`.
pub fn resolvent_perturbation_residual(cl: &ClosedLoop, lambda: C64) -> Result<f64> {
    let n = cl.dim();
    let r_open = resolvent_matrix(cl.oseen.entries(), lambda)?;
    let r_closed = resolvent_matrix(cl.composed.entries(), lambda)?;
    let mut pert: CMat = cl.oseen.entries() * cl.green.entries() * cl.feedback.as_matrix();
    if let Some(b) = &cl.interior_b {
        pert -= b.entries();
    }
    let lhs = identity(n) + &r_open * pert;
    let rhs = solve(&lhs, &r_open).ok_or_else(|| {
        Error::Domain(format!("I + R(lambda, oseen)(oseen G F - B) is singular at lambda = {lambda}"))
    })?;
    Ok((rhs - &r_closed).norm() / r_closed.norm())
}

/// Resolvent identity residuals at `count` seeded random points to the
/// right of both spectra: `Re = s + U(0.5, 5)`, `Im = U(-20, 20)`, where `s`
/// is the larger of the two abscissae (at least 0).
pub fn resolvent_identity_scan(cl: &ClosedLoop, count: usize, seed: u64) -> Result<Vec<(C64, f64)>> {
    let s = cl.abscissa()?.max(spectrum::spectral_abscissa(cl.oseen.entries())?).max(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let lambda = C64::new(s + rng.gen_range(0.5..5.0), rng.gen_range(-20.0..20.0));
            Ok((lambda, resolvent_perturbation_residual(cl, lambda)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVec};
    use crate::synthesis::FeedbackMode;

    fn scalar_loop(a: f64, g: f64, f: f64) -> ClosedLoop {
        let oseen = Operator::new(CMat::from_element(1, 1, c(a, 0.0)), "a").unwrap();
        let green = GreenMap::new(CMat::from_element(1, 1, c(g, 0.0)), 0.25, vec!["u".into()]).unwrap();
        let fb = FeedbackLaw::assemble(
            FeedbackMode::Spectral,
            CMat::from_element(1, 1, c(f, 0.0)),
            vec![CVec::from_element(1, c(f, 0.0))],
            vec![1.0],
            vec![CVec::from_element(1, c(1.0, 0.0))],
            1,
            vec![],
        )
        .unwrap();
        ClosedLoop::compose(oseen, green, fb, None).unwrap()
    }

    #[test]
    fn zero_feedback_keeps_operator() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(-3.0, 0.0), c(0.5, 0.0)]);
        let oseen = Operator::new(m.clone(), "o").unwrap();
        let green = GreenMap::new(CMat::from_element(2, 1, c(1.0, 0.0)), 0.3, vec!["u".into()]).unwrap();
        let cl = ClosedLoop::compose(oseen, green, FeedbackLaw::zero(1, 2), None).unwrap();
        assert_eq!(cl.composed.entries(), &m);
        assert_eq!(resolvent_perturbation_residual(&cl, c(3.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn scalar_closed_form_identity() {
        let cl = scalar_loop(-1.0, 1.0, 0.5);
        assert!((cl.composed.entries()[(0, 0)] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!(resolvent_perturbation_residual(&cl, c(2.0, 0.0)).unwrap() <= 1e-14);
    }

    #[test]
    fn adjoint_trivial_case() {
        let m = CMat::from_row_slice(2, 2, &[c(-2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-3.0, 0.0)]);
        let oseen = Operator::new(m.clone(), "o").unwrap();
        let green = GreenMap::new(CMat::zeros(2, 1), 0.3, vec!["u".into()]).unwrap();
        let cl = ClosedLoop::compose(oseen, green, FeedbackLaw::zero(1, 2), None).unwrap();
        let adj = adjoint_closed_loop(&cl).unwrap();
        assert!((adj.entries() - m.adjoint()).norm() < 1e-14);
        assert!(cl
            .perturbation_ao
            .entries()
            .iter()
            .all(|z| (z - c(cl.translation, 0.0)).norm() < 1e-12 || z.norm() < 1e-12));
    }

    #[test]
    fn adjoint_with_rank_one_feedback() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let oseen = Operator::new(m, "o").unwrap();
        let green =
            GreenMap::new(CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.5, 0.0)]), 0.4, vec!["u".into()]).unwrap();
        let fb = FeedbackLaw::assemble(
            FeedbackMode::Spectral,
            CMat::zeros(1, 1),
            vec![CVec::from_column_slice(&[c(0.7, 0.0), c(-0.2, 0.0)])],
            vec![1.0, 1.0],
            vec![CVec::from_element(1, c(1.0, 0.0))],
            1,
            vec![],
        )
        .unwrap();
        let b = Operator::new(CMat::from_element(2, 2, c(0.1, 0.0)), "b").unwrap();
        let cl = ClosedLoop::compose(oseen, green, fb, Some(b)).unwrap();
        let check = adjoint_closed_loop_with(&cl, 0.5).unwrap();
        assert!(check.residual < 1e-12);
        assert!(cl.composition_residual() == 0.0);
    }

    #[test]
    fn dimension_mismatch_names_factor() {
        let oseen = Operator::zeros(3, "o");
        let green = GreenMap::new(CMat::zeros(2, 1), 0.3, vec!["u".into()]).unwrap();
        let err = ClosedLoop::compose(oseen, green, FeedbackLaw::zero(1, 3), None).unwrap_err();
        assert!(err.to_string().contains("green map rows"));
    }
}
