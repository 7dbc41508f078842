//! Exponential decay fits of `||e^{op t}||`.

use crate::expm::semigroup_apply;
use crate::linalg::{fit_line, spectral_norm};
use crate::operator::Operator;
use crate::{Error, Result};

/// `||e^{op t}|| ~ m e^{-delta t}` fitted over the tail of a time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub m: f64,
    pub delta: f64,
}

/// Least-squares fit of `log ||e^{op t}||_2` against `t` over the second
/// half of `t_grid`.
pub fn decay_estimate(op: &Operator, t_grid: &[f64]) -> Result<DecayFit> {
    if t_grid.len() < 4 {
        return Err(Error::Usage(format!("decay fit needs at least 4 time points, got {}", t_grid.len())));
    }
    if t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("decay time grid must be positive and strictly increasing".into()));
    }
    let tail = &t_grid[t_grid.len() / 2..];
    let mut ys = Vec::with_capacity(tail.len());
    for &t in tail {
        let e = semigroup_apply(op, t)?;
        ys.push(spectral_norm(e.entries()).max(f64::MIN_POSITIVE).ln());
    }
    let (a, b) = fit_line(tail, &ys);
    Ok(DecayFit { m: a.exp(), delta: -b })
}

/// Evenly spaced grid `start..=end` with `count` points.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count).map(|i| start + (end - start) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// `count` points spaced evenly in log10 between `start` and `end`.
pub fn logspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    linspace(start.log10(), end.log10(), count).into_iter().map(|e| 10f64.powf(e)).collect()
}
