//! 1-D heat model `y_t = y_xx + b y_x + c^2 y` on (0,1) with Dirichlet
//! boundary control, discretized by centered finite differences on `n`
//! interior nodes.

use std::f64::consts::PI;

use crate::closed_loop::ClosedLoop;
use crate::decay::{decay_estimate, logspace};
use crate::linalg::{c, identity, spectral_norm, CMat};
use crate::maxreg::{imaginary_axis_bound, plateau_scan, ForcingSpec, Verdict};
use crate::operator::{GreenMap, GridMeta, Operator};
use crate::resolvent::real_power;
use crate::spectrum::{self, spectrum, SpectralData, DEFAULT_TOL_UNSTABLE};
use crate::synthesis::{
    build_feedback, choose_k, default_targets, observability_margins, place_poles, rank_check, reduce, select_profiles,
    FeedbackLaw, FeedbackMode, RankReport, ReducedPair, DEFAULT_RANK_TOL,
};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct HeatConfig {
    /// Interior grid points.
    pub n: usize,
    pub c2: f64,
    /// Coefficient of the first-order term; 0 disables it.
    pub advection_b: f64,
    /// Observation region for localized feedback.
    pub omega: (f64, f64),
    pub q: f64,
    pub epsilon: f64,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig { n: 64, c2: 16.0, advection_b: 0.0, omega: (0.2, 0.4), q: 2.0, epsilon: 0.01 }
    }
}

impl HeatConfig {
    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.n).map(|i| i as f64 * h).collect()
    }

    /// Green-map exponent `1/(2q) - epsilon`.
    pub fn gamma(&self) -> f64 {
        1.0 / (2.0 * self.q) - self.epsilon
    }

    pub fn with_n(&self, n: usize) -> Self {
        HeatConfig { n, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Config(format!("n = {} must be at least 8", self.n)));
        }
        let (a, b) = self.omega;
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(Error::Config(format!("omega = ({a}, {b}) must satisfy 0 < a < b < 1")));
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(Error::Config(format!("q = {} must be in (1, inf)", self.q)));
        }
        let g = self.gamma();
        if !(self.epsilon > 0.0 && g > 0.0 && g < 1.0) {
            return Err(Error::Config(format!("epsilon = {} gives gamma = {g} outside (0,1)", self.epsilon)));
        }
        if !self.c2.is_finite() || !self.advection_b.is_finite() {
            return Err(Error::Config("c2 and advection_b must be finite".into()));
        }
        if self.c2 > 0.0 {
            let cc = self.c2.sqrt();
            let k = (cc / PI).round();
            if k >= 1.0 && (cc - k * PI).abs() < 1e-3 {
                return Err(Error::Config(format!(
                    "c = {cc} is within 1e-3 of {k}*pi; the Dirichlet problem is resonant"
                )));
            }
        }
        Ok(())
    }

    fn grid(&self) -> GridMeta {
        GridMeta { h: self.h(), domain: "(0,1)".into() }
    }
}

/// `(Delta_h + c^2, b * D_h)` as separate n x n matrices.
pub fn heat_parts(cfg: &HeatConfig) -> (CMat, CMat) {
    let n = cfg.n;
    let h = cfg.h();
    let inv_h2 = 1.0 / (h * h);
    let diffusion = CMat::from_fn(n, n, |i, j| {
        if i == j {
            c(-2.0 * inv_h2 + cfg.c2, 0.0)
        } else if i.abs_diff(j) == 1 {
            c(inv_h2, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let s = cfg.advection_b / (2.0 * h);
    let advection = CMat::from_fn(n, n, |i, j| {
        if j == i + 1 {
            c(s, 0.0)
        } else if i == j + 1 {
            c(-s, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    (diffusion, advection)
}

pub fn build_heat_operator(cfg: &HeatConfig) -> Result<Operator> {
    cfg.validate()?;
    let (diffusion, advection) = heat_parts(cfg);
    Ok(Operator::new(diffusion + advection, format!("heat(n={},c2={},b={})", cfg.n, cfg.c2, cfg.advection_b))?
        .with_grid(cfg.grid()))
}

/// Exact eigenvalues of the discrete operator, descending in real part:
/// `c^2 - 2/h^2 + 2 sqrt(1/h^4 - b^2/(4h^2)) cos(k pi h)`.
pub fn analytic_eigenvalues(cfg: &HeatConfig) -> Vec<C64> {
    let h = cfg.h();
    let prod = 1.0 / h.powi(4) - cfg.advection_b.powi(2) / (4.0 * h * h);
    let root = C64::new(prod, 0.0).sqrt();
    (1..=cfg.n).map(|k| C64::new(cfg.c2 - 2.0 / (h * h), 0.0) + root * 2.0 * (k as f64 * PI * h).cos()).collect()
}

/// Solves `(Delta_h + c^2) phi = 0` with unit data at one endpoint per
/// column (x = 0, x = 1).
pub fn build_dirichlet_map(cfg: &HeatConfig) -> Result<GreenMap> {
    cfg.validate()?;
    let (diffusion, _) = heat_parts(cfg);
    dirichlet_columns(&diffusion, cfg.h()).and_then(|d| GreenMap::new(d, cfg.gamma(), vec!["x=0".into(), "x=1".into()]))
}

/// Dirichlet lifting for a tridiagonal `Delta_h + c^2` block.
pub(crate) fn dirichlet_columns(diffusion: &CMat, h: f64) -> Result<CMat> {
    let n = diffusion.nrows();
    let mut rhs = CMat::zeros(n, 2);
    rhs[(0, 0)] = c(-1.0 / (h * h), 0.0);
    rhs[(n - 1, 1)] = c(-1.0 / (h * h), 0.0);
    let d = diffusion
        .clone()
        .lu()
        .solve(&rhs)
        .filter(crate::linalg::all_finite)
        .ok_or_else(|| Error::Config("Dirichlet problem is singular (resonant c2)".into()))?;
    let residual = (diffusion * &d - &rhs).norm() / rhs.norm();
    if residual > 1e-10 {
        return Err(Error::Config(format!("Dirichlet problem is nearly resonant (solve residual {residual:.2e})")));
    }
    Ok(d)
}

/// Trapezoid weights of the interior grid (zero boundary values).
pub fn full_weights(cfg: &HeatConfig) -> Vec<f64> {
    vec![cfg.h(); cfg.n]
}

/// Trapezoid weights over the nodes inside `omega`, zero elsewhere.
pub fn omega_weights(cfg: &HeatConfig) -> Vec<f64> {
    interval_weights(&cfg.nodes(), cfg.h(), cfg.omega)
}

pub(crate) fn interval_weights(nodes: &[f64], h: f64, (a, b): (f64, f64)) -> Vec<f64> {
    let inside: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i] >= a && nodes[i] <= b).collect();
    let mut w = vec![0.0; nodes.len()];
    match inside.len() {
        0 => {}
        1 => w[inside[0]] = h,
        _ => {
            for &i in &inside {
                w[i] = h;
            }
            w[inside[0]] = 0.5 * h;
            w[*inside.last().expect("non-empty")] = 0.5 * h;
        }
    }
    w
}

/// Induced norm of an n x m block from the discrete boundary norm (plain
/// vector q-norm on the m endpoint values) to the h-weighted q-norm.
pub fn weighted_norm(m: &CMat, h: f64, q: f64) -> f64 {
    if (q - 2.0).abs() < 1e-12 {
        return h.sqrt() * spectral_norm(m);
    }
    let qnorm = |v: &[f64], w: f64| v.iter().map(|x| w * x.abs().powf(q)).sum::<f64>().powf(1.0 / q);
    let re = m.map(|z| z.re);
    match m.ncols() {
        1 => qnorm(re.column(0).as_slice(), h),
        2 => (0..720)
            .map(|k| {
                let t = PI * k as f64 / 720.0;
                let u = [t.cos(), t.sin()];
                let v: Vec<f64> = (0..m.nrows()).map(|i| re[(i, 0)] * u[0] + re[(i, 1)] * u[1]).collect();
                qnorm(&v, h) / qnorm(&u, 1.0)
            })
            .fold(0.0, f64::max),
        _ => h.sqrt() * spectral_norm(m),
    }
}

#[derive(Debug, Clone)]
pub struct GammaRow {
    pub n: usize,
    pub gamma: f64,
    pub norm: f64,
}

/// `||(kI - A)^gamma D||` for every grid and exponent.
pub fn gamma_bound_scan(grids: &[usize], gammas: &[f64], cfg: &HeatConfig) -> Result<Vec<GammaRow>> {
    if grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("grid sizes must be increasing".into()));
    }
    let mut rows = Vec::new();
    for &n in grids {
        let cfg = cfg.with_n(n);
        let op = build_heat_operator(&cfg)?;
        let d = build_dirichlet_map(&cfg)?;
        let (_, shifted) = crate::resolvent::translate(&op)?;
        let sd = spectrum(&shifted, 0.0)?;
        for &g in gammas {
            let m = if g == 0.0 { d.entries().clone() } else { real_power(&sd, g)? * d.entries() };
            rows.push(GammaRow { n, gamma: g, norm: weighted_norm(&m, cfg.h(), cfg.q) });
        }
    }
    Ok(rows)
}

/// `||A_o A^{-1/2}||` with `A = kI - (Delta_h + c^2)`, `A_o` the advection
/// term.
pub fn advection_relative_bound(cfg: &HeatConfig) -> Result<f64> {
    cfg.validate()?;
    let (diffusion, advection) = heat_parts(cfg);
    let top = spectrum::spectral_abscissa(&diffusion)?;
    let k = top.max(0.0) + 1.0;
    let a = identity(cfg.n) * C64::new(k, 0.0) - diffusion;
    let sd = spectrum(&Operator::new(a, "A")?, 0.0)?;
    let inv_sqrt = real_power(&sd, -0.5)?;
    Ok(spectral_norm(&(advection * inv_sqrt)))
}

pub fn closed_loop_heat(cfg: &HeatConfig, feedback: FeedbackLaw) -> Result<ClosedLoop> {
    ClosedLoop::compose(build_heat_operator(cfg)?, build_dirichlet_map(cfg)?, feedback, None)
}

/// Everything produced by a heat-model synthesis run.
#[derive(Debug, Clone)]
pub struct HeatSynthesis {
    pub spectral: SpectralData,
    /// Full-input reduced pair and its Hautus report (absent when N = 0).
    pub reduced: Option<ReducedPair>,
    pub rank: Option<RankReport>,
    /// Observation margins of the unstable eigenspaces on omega
    /// (localized mode only).
    pub observability: Vec<f64>,
    pub k: usize,
    pub closed_loop: ClosedLoop,
}

impl HeatSynthesis {
    pub fn feedback(&self) -> &FeedbackLaw {
        &self.closed_loop.feedback
    }
}

/// Rank check, K selection, pole placement and assembly for the heat model.
/// With no unstable eigenvalues the feedback is zero.
pub fn synthesize_heat(cfg: &HeatConfig, mode: FeedbackMode, targets: Option<&[C64]>) -> Result<HeatSynthesis> {
    let op = build_heat_operator(cfg)?;
    let green = build_dirichlet_map(cfg)?;
    let sd = spectrum(&op, DEFAULT_TOL_UNSTABLE)?;
    if sd.unstable_count == 0 {
        let cl = ClosedLoop::compose(op, green, FeedbackLaw::zero(2, cfg.n), None)?;
        return Ok(HeatSynthesis {
            spectral: sd,
            reduced: None,
            rank: None,
            observability: Vec::new(),
            k: 0,
            closed_loop: cl,
        });
    }
    let rp = reduce(&sd, &op, &green)?;
    let rank = rank_check(&rp, DEFAULT_RANK_TOL);
    if let Some(&i) = rank.failing().first() {
        return Err(Error::Uncontrollable {
            index: i,
            eigenvalue: rp.eigenvalues[i - 1],
            margin: rp.hautus_margins[i - 1],
        });
    }
    let k = choose_k(&sd);
    let targets = targets.map_or_else(|| default_targets(&sd), <[C64]>::to_vec);
    let profiles = select_profiles(&rp, k);
    let gain = place_poles(&rp.with_inputs(&profiles)?, &targets)?;
    let (weights, observability) = match mode {
        FeedbackMode::Spectral => (None, Vec::new()),
        FeedbackMode::Localized => {
            let w = omega_weights(cfg);
            let obs = if w.iter().any(|&x| x > 0.0) {
                observability_margins(&sd, &w, &full_weights(cfg))?
            } else {
                vec![0.0; sd.unstable_count]
            };
            (Some(w), obs)
        }
    };
    let law = build_feedback(&gain, mode, &sd, weights.as_deref(), &profiles, &targets)?;
    let cl = ClosedLoop::compose(op, green, law, None)?;
    Ok(HeatSynthesis { spectral: sd, reduced: Some(rp), rank: Some(rank), observability, k, closed_loop: cl })
}

/// One named sub-check of a verification bundle.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Decay fit grid.
    pub t_grid: Vec<f64>,
    /// Required decay rate; defaults to the closed-loop spectral abscissa
    /// magnitude.
    pub margin: Option<f64>,
    pub p_grid: Vec<f64>,
    pub horizons: Vec<f64>,
    pub forcings: ForcingSpec,
    pub imag_grid: Vec<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            t_grid: crate::decay::linspace(1.0, 10.0, 10),
            margin: None,
            p_grid: vec![1.5, 2.0, 4.0],
            horizons: vec![10.0, 20.0, 40.0],
            forcings: ForcingSpec::default(),
            imag_grid: logspace(1e-3, 1e3, 60),
        }
    }
}

/// Aggregate PASS/FAIL over named checks.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub abscissa: f64,
    pub decay_rate: f64,
    pub plateau: Vec<crate::maxreg::MaxRegReport>,
    pub imag_sup: Option<f64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failing(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Decay fit, plateau scan and imaginary-axis bound bundled against the
/// configured margin.
pub fn verify_stabilization(cl: &ClosedLoop, opts: &VerifyOptions) -> Result<VerifyReport> {
    let abscissa = cl.abscissa()?;
    let mut checks = vec![Check::new("spectral_abscissa", abscissa < 0.0, format!("abscissa {abscissa:.6e}"))];
    let fit = decay_estimate(&cl.composed, &opts.t_grid);
    let decay_rate = match &fit {
        Ok(f) => f.delta,
        Err(_) => f64::NEG_INFINITY,
    };
    let margin = opts.margin.unwrap_or(-abscissa);
    checks.push(match &fit {
        Ok(f) => Check::new(
            "decay",
            margin > 0.0 && f.delta >= 0.9 * margin,
            format!("delta {:.6e} vs 0.9*margin {:.6e}", f.delta, 0.9 * margin),
        ),
        Err(e) => Check::new("decay", false, e.to_string()),
    });
    let mut plateau = Vec::new();
    for &p in &opts.p_grid {
        let r = plateau_scan(cl, p, &opts.horizons, &opts.forcings)?;
        checks.push(Check::new(
            format!("plateau_p{p}"),
            r.verdict == Verdict::Plateau,
            format!("verdict {} C={:?}", r.verdict, r.c_estimates),
        ));
        plateau.push(r);
    }
    let imag = imaginary_axis_bound(cl, &opts.imag_grid);
    let imag_sup = imag.as_ref().ok().copied();
    checks.push(match imag {
        Ok(s) => Check::new("imaginary_axis", s.is_finite(), format!("sup {s:.6e}")),
        Err(e) => Check::new("imaginary_axis", false, e.to_string()),
    });
    for r in &mut plateau {
        r.imag_axis_sup = imag_sup;
    }
    Ok(VerifyReport { checks, abscissa, decay_rate, plateau, imag_sup })
}
