//! Maximal L^p-regularity diagnostics.
//!
//! For `y' = A y + f`, `y(0) = 0` the quotient
//! `(||y'||_p + ||A y||_p) / ||f||_p` over a finite forcing set gives a lower
//! bound on the regularity constant on `(0, T)`. Forcings are piecewise
//! constant, so inside each cell `y' = e^{A (t - t_a)} y'(t_a^+)` and `y'`
//! jumps by the forcing increment at cell boundaries. Time grids are graded
//! geometrically from every cell start to resolve the fast transients
//! excited by those jumps.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::closed_loop::ClosedLoop;
use crate::expm::{exp_with_integral, expm_real};
use crate::linalg::{spectral_norm, CMat, CVec};
use crate::operator::Operator;
use crate::resolvent::resolvent_matrix;
use crate::spectrum::{self, spectrum};
use crate::{Error, Result, C64};

pub const DEFAULT_RANDOM_FORCINGS: usize = 32;
pub const DEFAULT_CELL_WIDTH: f64 = 0.5;
pub const PLATEAU_REL: f64 = 0.05;
pub const GROWTH_LOG: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    /// Uniform `[-1, 1]` cell values from a seeded stream.
    Random {
        seed: u64,
        stream: u64,
    },
    /// Constant eigenvector of the generator.
    SingleMode {
        index: usize,
    },
    Constant,
}

/// Piecewise-constant forcing on `[0, horizon]`; cells past the stored
/// values are zero.
#[derive(Debug, Clone)]
pub struct ForcingSignal {
    pub kind: ForcingKind,
    pub values: Vec<CVec>,
    pub time_step: f64,
    pub horizon: f64,
}

fn cell_count(horizon: f64, width: f64) -> usize {
    ((horizon / width) - 1e-9).ceil().max(1.0) as usize
}

impl ForcingSignal {
    /// Random cell values. The stream is a prefix sequence: a longer
    /// horizon with the same seed and stream repeats the first cells.
    pub fn random(dim: usize, seed: u64, stream: u64, cell_width: f64, horizon: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let cells = cell_count(horizon, cell_width);
        let values = (0..cells).map(|_| CVec::from_fn(dim, |_, _| C64::new(rng.gen_range(-1.0..=1.0), 0.0))).collect();
        ForcingSignal { kind: ForcingKind::Random { seed, stream }, values, time_step: cell_width, horizon }
    }

    pub fn single_mode(vector: CVec, index: usize, horizon: f64) -> Self {
        ForcingSignal { kind: ForcingKind::SingleMode { index }, values: vec![vector], time_step: horizon, horizon }
    }

    pub fn constant(vector: CVec, horizon: f64) -> Self {
        ForcingSignal { kind: ForcingKind::Constant, values: vec![vector], time_step: horizon, horizon }
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// Same cell values on a different horizon (zero-extended).
    pub fn with_horizon(&self, horizon: f64) -> Self {
        let mut out = self.clone();
        out.horizon = horizon;
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| v.iter_mut().for_each(|z| *z = z.conj()));
        out
    }

    pub fn cell(&self, j: usize) -> Option<&CVec> {
        self.values.get(j)
    }

    /// Value on `[t_j, t_{j+1})`; zero past the stored cells.
    pub fn value_at(&self, t: f64) -> CVec {
        let j = (t / self.time_step).floor() as usize;
        self.values.get(j).cloned().unwrap_or_else(|| CVec::zeros(self.dim()))
    }

    /// Exact `||f||_{L^p(0, horizon)}` with the Euclidean state norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let mut acc = LpAcc::default();
        for (j, v) in self.values.iter().enumerate() {
            let a = j as f64 * self.time_step;
            let b = ((j + 1) as f64 * self.time_step).min(self.horizon);
            if b > a {
                acc.add(b - a, v.norm(), p);
            }
        }
        acc.value(p)
    }
}

/// Overflow-safe accumulator for `sum w x^p` stored as `max^p * sum`.
#[derive(Debug, Clone, Copy, Default)]
struct LpAcc {
    max: f64,
    sum: f64,
}

impl LpAcc {
    fn add(&mut self, w: f64, x: f64, p: f64) {
        if x > self.max {
            if self.max > 0.0 {
                self.sum *= (self.max / x).powf(p);
            }
            self.max = x;
        }
        if self.max > 0.0 {
            self.sum += w * (x / self.max).powf(p);
        }
    }

    fn value(&self, p: f64) -> f64 {
        if self.max == 0.0 {
            0.0
        } else {
            self.max * self.sum.powf(1.0 / p)
        }
    }
}

/// How a forcing set is generated for a given horizon.
#[derive(Debug, Clone)]
pub struct ForcingSpec {
    pub random_count: usize,
    pub seed: u64,
    pub cell_width: f64,
    /// Add one constant forcing per eigenvector of the generator.
    pub single_modes: bool,
}

impl Default for ForcingSpec {
    fn default() -> Self {
        ForcingSpec {
            random_count: DEFAULT_RANDOM_FORCINGS,
            seed: 0,
            cell_width: DEFAULT_CELL_WIDTH,
            single_modes: true,
        }
    }
}

impl ForcingSpec {
    pub fn build(&self, generator: &CMat, horizon: f64) -> Result<Vec<ForcingSignal>> {
        let n = generator.nrows();
        let mut out: Vec<ForcingSignal> = (0..self.random_count as u64)
            .map(|s| ForcingSignal::random(n, self.seed, s, self.cell_width, horizon))
            .collect();
        if self.single_modes {
            let op = Operator::new(generator.clone(), "generator")?;
            let sd = spectrum(&op, 0.0)?;
            for k in 0..n {
                out.push(ForcingSignal::single_mode(sd.right_vectors.column(k).into_owned(), k, horizon));
            }
        }
        if out.is_empty() {
            return Err(Error::Usage("forcing set is empty".into()));
        }
        Ok(out)
    }
}

/// Time-grid controls for the regularity quadrature.
#[derive(Debug, Clone)]
pub struct QuadratureOptions {
    /// Sets the coarsest step `T / nodes_per_horizon`.
    pub nodes_per_horizon: usize,
    /// Geometric growth of steps after each forcing jump.
    pub ratio: f64,
    /// First step after a jump; defaults to `0.1 / rho(A)`.
    pub first_step: Option<f64>,
    pub max_doublings: usize,
    /// Refinement stops once every estimate moves less than this.
    pub rel_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { nodes_per_horizon: 2000, ratio: 1.25, first_step: None, max_doublings: 3, rel_tol: 0.005 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Plan {
    h0: f64,
    ratio: f64,
    hmax: f64,
}

impl Plan {
    fn refined(&self, level: usize) -> Plan {
        let f = 0.5f64.powi(level as i32);
        Plan { h0: self.h0 * f, ratio: self.ratio.powf(f), hmax: self.hmax * f }
    }

    /// Step sizes covering a cell of length `len`.
    fn steps(&self, len: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = 0.0;
        let mut h = self.h0.min(self.hmax);
        while t < len {
            let rem = len - t;
            if rem <= h * 1.5 {
                out.push(rem);
                break;
            }
            out.push(h);
            t += h;
            h = (h * self.ratio).min(self.hmax);
        }
        out
    }
}

/// `0.1 / max |lambda(A)|`, the largest admissible first step.
fn required_step(a: &CMat) -> Result<f64> {
    let rho = spectrum::eigenvalues(a)?.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    Ok(if rho > 0.0 { 0.1 / rho } else { f64::INFINITY })
}

fn base_plan(a: &CMat, horizon: f64, opts: &QuadratureOptions) -> Result<Plan> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Usage(format!("horizon {horizon} must be positive")));
    }
    let hmax = horizon / opts.nodes_per_horizon.max(1) as f64;
    let required = required_step(a)?;
    let h0 = match opts.first_step {
        Some(h) if h > required => return Err(Error::Accuracy { step: h, required }),
        Some(h) => h,
        None => required.min(hmax),
    };
    Ok(Plan { h0, ratio: opts.ratio.max(1.0), hmax })
}

/// Real embedding `[[Re, -Im], [Im, Re]]`, or the real part when `m` is real.
fn real_form(m: &CMat, complex: bool) -> DMatrix<f64> {
    let n = m.nrows();
    if !complex {
        return m.map(|z| z.re);
    }
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            r[(i, j)] = z.re;
            r[(i, j + n)] = -z.im;
            r[(i + n, j)] = z.im;
            r[(i + n, j + n)] = z.re;
        }
    }
    r
}

fn real_vec(v: &CVec, complex: bool) -> Vec<f64> {
    if complex {
        v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
    } else {
        v.iter().map(|z| z.re).collect()
    }
}

struct ExpCache {
    a: DMatrix<f64>,
    map: HashMap<u64, DMatrix<f64>>,
}

impl ExpCache {
    fn get(&mut self, h: f64) -> Result<&DMatrix<f64>> {
        let key = h.to_bits();
        if !self.map.contains_key(&key) {
            let e = expm_real(&(&self.a * h))?;
            self.map.insert(key, e);
        }
        Ok(&self.map[&key])
    }
}

/// Per-forcing, per-exponent quotients at one quadrature level.
fn quotients_at(
    cache: &mut ExpCache,
    forcings: &[ForcingSignal],
    p_list: &[f64],
    horizon: f64,
    plan: Plan,
    complex: bool,
) -> Result<Vec<Vec<f64>>> {
    let dim = cache.a.nrows();
    let mut out = vec![Vec::new(); forcings.len()];
    // forcings sharing a cell width share a time grid
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, f) in forcings.iter().enumerate() {
        match groups.iter_mut().find(|(w, _)| *w == f.time_step) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((f.time_step, vec![i])),
        }
    }
    for (width, idx) in groups {
        let cols = idx.len();
        let cells = cell_count(horizon, width);
        let mut v = DMatrix::<f64>::zeros(dim, cols);
        let mut f_prev = DMatrix::<f64>::zeros(dim, cols);
        let mut acc_ay = vec![vec![LpAcc::default(); p_list.len()]; cols];
        let mut acc_yt = acc_ay.clone();
        let record =
            |w: f64, v: &DMatrix<f64>, f: &DMatrix<f64>, acc_ay: &mut Vec<Vec<LpAcc>>, acc_yt: &mut Vec<Vec<LpAcc>>| {
                for c in 0..cols {
                    let yt = v.column(c).norm();
                    let ay = (v.column(c) - f.column(c)).norm();
                    for (k, &p) in p_list.iter().enumerate() {
                        acc_yt[c][k].add(w, yt, p);
                        acc_ay[c][k].add(w, ay, p);
                    }
                }
            };
        for j in 0..cells {
            let a = j as f64 * width;
            let len = ((j + 1) as f64 * width).min(horizon) - a;
            if len <= 0.0 {
                break;
            }
            let mut f_cell = DMatrix::<f64>::zeros(dim, cols);
            for (c, &fi) in idx.iter().enumerate() {
                if let Some(val) = forcings[fi].cell(j) {
                    let r = real_vec(val, complex);
                    f_cell.column_mut(c).copy_from_slice(&r);
                }
            }
            v += &f_cell - &f_prev;
            let steps = plan.steps(len);
            let mut w_prev = 0.0;
            for &h in &steps {
                record(0.5 * (w_prev + h), &v, &f_cell, &mut acc_ay, &mut acc_yt);
                w_prev = h;
                v = cache.get(h)? * &v;
            }
            record(0.5 * w_prev, &v, &f_cell, &mut acc_ay, &mut acc_yt);
            f_prev = f_cell;
        }
        for (c, &fi) in idx.iter().enumerate() {
            let f = forcings[fi].with_horizon(horizon);
            out[fi] = p_list
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let fnorm = f.lp_norm(p);
                    (acc_yt[c][k].value(p) + acc_ay[c][k].value(p)) / fnorm
                })
                .collect();
        }
    }
    Ok(out)
}

/// Regularity estimates for one horizon, refined until stable.
#[derive(Debug, Clone)]
pub struct Estimate {
    /// One constant per requested exponent (max over the forcing set).
    pub constants: Vec<f64>,
    pub doublings: usize,
    pub converged: bool,
}

/// Max over `forcings` of the regularity quotient of `y' = a y + f` on
/// `(0, horizon)` for each exponent in `p_list`.
pub fn regularity_estimate(
    a: &CMat,
    p_list: &[f64],
    horizon: f64,
    forcings: &[ForcingSignal],
    opts: &QuadratureOptions,
) -> Result<Estimate> {
    if forcings.is_empty() {
        return Err(Error::Usage("forcing set is empty".into()));
    }
    if let Some(p) = p_list.iter().find(|&&p| !(p > 1.0 && p.is_finite())) {
        return Err(Error::Usage(format!("exponent p = {p} must lie in (1, inf)")));
    }
    for f in forcings {
        if f.dim() != a.nrows() {
            return Err(Error::mismatch("forcing dimension", a.nrows(), f.dim()));
        }
        if p_list.iter().any(|&p| f.with_horizon(horizon).lp_norm(p) == 0.0) {
            return Err(Error::Usage("zero-norm forcing on the requested horizon".into()));
        }
    }
    let complex = !crate::linalg::is_real(a, 0.0)
        || forcings.iter().any(|f| f.values.iter().any(|v| v.iter().any(|z| z.im != 0.0)));
    let plan = base_plan(a, horizon, opts)?;
    let mut cache = ExpCache { a: real_form(a, complex), map: HashMap::new() };
    let reduce = |q: Vec<Vec<f64>>| -> Vec<f64> {
        (0..p_list.len()).map(|k| q.iter().map(|row| row[k]).fold(0.0, f64::max)).collect()
    };
    let mut current = reduce(quotients_at(&mut cache, forcings, p_list, horizon, plan, complex)?);
    for level in 1..=opts.max_doublings {
        cache.map.clear();
        let next = reduce(quotients_at(&mut cache, forcings, p_list, horizon, plan.refined(level), complex)?);
        let change = current.iter().zip(&next).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
        current = next;
        if change < opts.rel_tol {
            return Ok(Estimate { constants: current, doublings: level, converged: true });
        }
    }
    Ok(Estimate { constants: current, doublings: opts.max_doublings, converged: opts.max_doublings == 0 })
}

/// Lower bound on the regularity constant of the closed loop.
pub fn maxreg_constant(cl: &ClosedLoop, p: f64, horizon: f64, forcings: &[ForcingSignal]) -> Result<f64> {
    let est = regularity_estimate(cl.composed.entries(), &[p], horizon, forcings, &QuadratureOptions::default())?;
    Ok(est.constants[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Plateau,
    Growth,
    /// Neither criterion met on the given grid.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Plateau => "plateau",
            Verdict::Growth => "growth",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Growth if `log C` rises by more than [`GROWTH_LOG`] between every pair of
/// consecutive horizons; plateau if the last two estimates are within
/// [`PLATEAU_REL`].
pub fn classify(c: &[f64]) -> Verdict {
    if c.len() < 2 {
        return Verdict::Inconclusive;
    }
    if c.windows(2).all(|w| w[1].ln() - w[0].ln() > GROWTH_LOG) {
        return Verdict::Growth;
    }
    let (a, b) = (c[c.len() - 2], c[c.len() - 1]);
    if ((b - a) / a).abs() < PLATEAU_REL {
        Verdict::Plateau
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone)]
pub struct MaxRegReport {
    pub p: f64,
    pub t_grid: Vec<f64>,
    pub c_estimates: Vec<f64>,
    pub imag_axis_sup: Option<f64>,
    pub duality_gap: Option<f64>,
    pub verdict: Verdict,
}

fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 3 {
        return Err(Error::Usage(format!("horizon grid needs at least 3 entries, got {}", t_grid.len())));
    }
    if t_grid[0] <= 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("horizon grid must be positive and increasing".into()));
    }
    Ok(())
}

/// One report per exponent; each horizon gets its own forcing set from
/// `spec` (random streams are prefixes of each other across horizons).
pub fn scan_generator(
    a: &CMat,
    p_list: &[f64],
    t_grid: &[f64],
    spec: &ForcingSpec,
    opts: &QuadratureOptions,
) -> Result<Vec<MaxRegReport>> {
    check_t_grid(t_grid)?;
    let per_t: Vec<Estimate> = t_grid
        .par_iter()
        .map(|&t| {
            let forcings = spec.build(a, t)?;
            regularity_estimate(a, p_list, t, &forcings, opts)
        })
        .collect::<Result<_>>()?;
    Ok(p_list
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let c: Vec<f64> = per_t.iter().map(|e| e.constants[k]).collect();
            MaxRegReport {
                p,
                t_grid: t_grid.to_vec(),
                verdict: classify(&c),
                c_estimates: c,
                imag_axis_sup: None,
                duality_gap: None,
            }
        })
        .collect())
}

pub fn plateau_scan(cl: &ClosedLoop, p: f64, t_grid: &[f64], spec: &ForcingSpec) -> Result<MaxRegReport> {
    let mut reports = scan_generator(cl.composed.entries(), &[p], t_grid, spec, &QuadratureOptions::default())?;
    Ok(reports.remove(0))
}

/// `sup ||t R(it, A)||` over `t` and `-t` for `t` in `t_grid`. Requires a
/// negative spectral abscissa; otherwise reports the offending eigenvalue.
pub fn imaginary_axis_sup(a: &CMat, t_grid: &[f64]) -> Result<f64> {
    let ev = spectrum::eigenvalues(a)?;
    let top = ev[0];
    if top.re >= 0.0 {
        return Err(Error::Singular { lambda: C64::new(0.0, top.im), eigenvalue: top, distance: top.re.abs() });
    }
    let values: Vec<f64> = t_grid
        .par_iter()
        .flat_map_iter(|&t| [t, -t])
        .map(|t| {
            let r = resolvent_matrix(a, C64::new(0.0, t))?;
            Ok(t.abs() * spectral_norm(&r))
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

pub fn imaginary_axis_bound(cl: &ClosedLoop, t_grid: &[f64]) -> Result<f64> {
    imaginary_axis_sup(cl.composed.entries(), t_grid)
}

/// Dual exponent `p' = p / (p - 1)`.
pub fn dual_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `|log C(A, p) - log C(A*, p')|` over one forcing set and its conjugate.
pub fn duality_gap(
    a: &CMat,
    p: f64,
    horizon: f64,
    forcings: &[ForcingSignal],
    opts: &QuadratureOptions,
) -> Result<f64> {
    let c = regularity_estimate(a, &[p], horizon, forcings, opts)?.constants[0];
    let conj: Vec<ForcingSignal> = forcings.iter().map(ForcingSignal::conj).collect();
    let cd = regularity_estimate(&a.adjoint(), &[dual_exponent(p)], horizon, &conj, opts)?.constants[0];
    Ok((c.ln() - cd.ln()).abs())
}

pub fn duality_check(cl: &ClosedLoop, p: f64, horizon: f64, forcings: &[ForcingSignal]) -> Result<f64> {
    duality_gap(cl.composed.entries(), p, horizon, forcings, &QuadratureOptions::default())
}

#[derive(Debug, Clone)]
pub struct DualityReport {
    pub primal: MaxRegReport,
    pub dual: MaxRegReport,
    /// `|log C - log C*|` at the largest horizon.
    pub gap: f64,
}

impl DualityReport {
    pub fn verdicts_agree(&self) -> bool {
        self.primal.verdict == self.dual.verdict
    }
}

/// Plateau scans for `A` at `p` and for `A*` at `p'`, the dual side using
/// conjugated copies of the primal forcings.
pub fn duality_scan(
    a: &CMat,
    p: f64,
    t_grid: &[f64],
    spec: &ForcingSpec,
    opts: &QuadratureOptions,
) -> Result<DualityReport> {
    check_t_grid(t_grid)?;
    let adj = a.adjoint();
    let pd = dual_exponent(p);
    let pairs: Vec<(f64, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let forcings = spec.build(a, t)?;
            let conj: Vec<ForcingSignal> = forcings.iter().map(ForcingSignal::conj).collect();
            let c = regularity_estimate(a, &[p], t, &forcings, opts)?.constants[0];
            let cd = regularity_estimate(&adj, &[pd], t, &conj, opts)?.constants[0];
            Ok((c, cd))
        })
        .collect::<Result<_>>()?;
    let report = |p: f64, c: Vec<f64>| MaxRegReport {
        p,
        t_grid: t_grid.to_vec(),
        verdict: classify(&c),
        c_estimates: c,
        imag_axis_sup: None,
        duality_gap: None,
    };
    let (c, cd): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let gap = (c[c.len() - 1].ln() - cd[cd.len() - 1].ln()).abs();
    let mut primal = report(p, c);
    primal.duality_gap = Some(gap);
    Ok(DualityReport { primal, dual: report(pd, cd), gap })
}

/// States of `y' = A y + f`, `y(0) = 0`, on the graded quadrature grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVec>,
}

impl Trajectory {
    pub fn sup_norm(&self) -> f64 {
        self.states.iter().fold(0.0, |m, y| m.max(y.norm()))
    }
}

/// Exact-per-cell integration `y_{j+1} = e^{A h} y_j + (int_0^h e^{A s} ds) f_j`.
pub fn solution_map_with(a: &CMat, f: &ForcingSignal, opts: &QuadratureOptions) -> Result<Trajectory> {
    if f.dim() != a.nrows() {
        return Err(Error::mismatch("forcing dimension", a.nrows(), f.dim()));
    }
    let plan = base_plan(a, f.horizon, opts)?;
    let n = a.nrows();
    let mut cache: HashMap<u64, (CMat, CMat)> = HashMap::new();
    let mut y = CVec::zeros(n);
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    let cells = cell_count(f.horizon, f.time_step);
    for j in 0..cells {
        let start = j as f64 * f.time_step;
        let len = ((j + 1) as f64 * f.time_step).min(f.horizon) - start;
        if len <= 0.0 {
            break;
        }
        let fj = f.cell(j).cloned().unwrap_or_else(|| CVec::zeros(n));
        let mut t = start;
        for h in plan.steps(len) {
            let key = h.to_bits();
            if let std::collections::hash_map::Entry::Vacant(slot) = cache.entry(key) {
                slot.insert(exp_with_integral(a, h)?);
            }
            let (e, phi) = &cache[&key];
            y = e * &y + phi * &fj;
            t += h;
            times.push(t);
            states.push(y.clone());
        }
    }
    Ok(Trajectory { times, states })
}

pub fn solution_map(cl: &ClosedLoop, f: &ForcingSignal) -> Result<Trajectory> {
    solution_map_with(cl.composed.entries(), f, &QuadratureOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn scalar(a: f64) -> CMat {
        CMat::from_element(1, 1, c(a, 0.0))
    }

    fn ones(horizon: f64) -> ForcingSignal {
        ForcingSignal::constant(CVec::from_element(1, c(1.0, 0.0)), horizon)
    }

    #[test]
    fn plan_covers_cell_exactly() {
        let plan = Plan { h0: 1e-4, ratio: 1.25, hmax: 0.01 };
        let steps = plan.steps(0.5);
        assert!((steps.iter().sum::<f64>() - 0.5).abs() < 1e-12);
        assert!(steps[0] == 1e-4 && steps.iter().all(|&h| h <= 0.015));
    }

    #[test]
    fn scalar_solution_matches_closed_form() {
        let a = 3.0;
        let traj = solution_map_with(&scalar(-a), &ones(2.0), &QuadratureOptions::default()).unwrap();
        for (t, y) in traj.times.iter().zip(&traj.states) {
            let exact = (1.0 - (-a * t).exp()) / a;
            assert!((y[0].re - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_forcing_gives_zero_trajectory() {
        let f = ForcingSignal::constant(CVec::zeros(1), 1.0);
        let traj = solution_map_with(&scalar(-1.0), &f, &QuadratureOptions::default()).unwrap();
        assert_eq!(traj.sup_norm(), 0.0);
    }

    #[test]
    fn scalar_constant_closed_form() {
        let e2 = (-2.0f64).exp();
        let e1 = (-1.0f64).exp();
        let want = ((1.0 - e2) / 2.0).sqrt() + (1.0 - 2.0 * (1.0 - e1) + (1.0 - e2) / 2.0).sqrt();
        let est = regularity_estimate(&scalar(-1.0), &[2.0], 1.0, &[ones(1.0)], &QuadratureOptions::default()).unwrap();
        assert!((est.constants[0] - want).abs() < 1e-5 * want, "{} vs {want}", est.constants[0]);
    }

    #[test]
    fn unstable_scalar_grows() {
        let opts = QuadratureOptions::default();
        let c5 = regularity_estimate(&scalar(1.0), &[2.0], 5.0, &[ones(5.0)], &opts).unwrap().constants[0];
        let c10 = regularity_estimate(&scalar(1.0), &[2.0], 10.0, &[ones(10.0)], &opts).unwrap().constants[0];
        assert!(c10 / c5 >= (5.0f64).exp() / 2.0);
    }

    #[test]
    fn large_first_step_is_rejected() {
        let opts = QuadratureOptions { first_step: Some(1.0), ..QuadratureOptions::default() };
        let err = regularity_estimate(&scalar(-10.0), &[2.0], 1.0, &[ones(1.0)], &opts).unwrap_err();
        match err {
            Error::Accuracy { required, .. } => assert!((required - 0.01).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_forcing_is_usage_error() {
        let f = ForcingSignal::constant(CVec::zeros(1), 1.0);
        assert!(matches!(
            regularity_estimate(&scalar(-1.0), &[2.0], 1.0, &[f], &QuadratureOptions::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn verdicts() {
        assert_eq!(classify(&[1.0, 1.01, 1.02]), Verdict::Plateau);
        assert_eq!(classify(&[1.0, 10.0, 1000.0]), Verdict::Growth);
        assert_eq!(classify(&[1.0, 1.5, 2.0]), Verdict::Inconclusive);
    }

    #[test]
    fn scalar_imaginary_axis() {
        let grid = crate::decay::logspace(1e-3, 1e3, 60);
        let s = imaginary_axis_sup(&scalar(-1.0), &grid).unwrap();
        assert!(s < 1.0 && s > 0.99);
        assert!(matches!(imaginary_axis_sup(&scalar(0.5), &grid), Err(Error::Singular { .. })));
    }

    #[test]
    fn random_forcings_are_prefixes() {
        let short = ForcingSignal::random(4, 7, 3, 0.5, 10.0);
        let long = ForcingSignal::random(4, 7, 3, 0.5, 20.0);
        assert_eq!(short.values.len(), 20);
        assert_eq!(long.values.len(), 40);
        assert_eq!(short.values[..], long.values[..20]);
    }

    #[test]
    fn lp_accumulator_survives_huge_values() {
        let mut acc = LpAcc::default();
        acc.add(1.0, 1e200, 4.0);
        acc.add(1.0, 1e200, 4.0);
        assert!((acc.value(4.0) / 1e200 - 2f64.powf(0.25)).abs() < 1e-12);
    }
}
