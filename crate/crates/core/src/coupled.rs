//! Coupled two-component model: a "fluid" component with interior control
//! on omega and a "thermal" component with Dirichlet boundary control, tied
//! by bounded couplings.
//!
//! State layout: fluid rows `0..n`, thermal rows `n..2n`.
//!
//! ```text
//! [ nu  D2 + c2_f + a D1        g I               ]
//! [ -diag(theta_e)              kappa D2 + c2_h + a D1 ]
//! ```
//!
//! The closed loop is split as `A_F = Ahat_F + Pi` with
//! `Ahat_F = blockdiag(S_f, S_h) (I - G F)` (diffusion plus translation) and
//! `Pi` collecting advection, couplings and the interior feedback `J`.

use crate::closed_loop::ClosedLoop;
use crate::decay::decay_estimate;
use crate::heat::{dirichlet_columns, interval_weights, Check, VerifyOptions, VerifyReport};
use crate::linalg::{block_diag, c, identity, spectral_norm, CMat, CVec};
use crate::maxreg::{imaginary_axis_bound, plateau_scan, Verdict};
use crate::operator::{GreenMap, GridMeta, Operator};
use crate::resolvent::real_power;
use crate::spectrum::{self, spectrum, SpectralData, DEFAULT_TOL_UNSTABLE};
use crate::synthesis::{
    build_feedback, choose_k, default_targets, place_poles, rank_check, reduce_with_input, FeedbackLaw, FeedbackMode,
    RankReport, ReducedPair, DEFAULT_RANK_TOL,
};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledConfig {
    /// Grid points per component.
    pub n: usize,
    pub nu: f64,
    pub kappa: f64,
    pub gamma_buoy: f64,
    /// Nodal values of the coupling profile (length n).
    pub theta_e_profile: Vec<f64>,
    pub ye_advect: f64,
    pub c2_f: f64,
    pub c2_h: f64,
    /// Support of the interior control.
    pub omega: (f64, f64),
    pub q: f64,
    pub epsilon: f64,
}

impl Default for CoupledConfig {
    fn default() -> Self {
        let n = 32;
        CoupledConfig {
            n,
            nu: 1.0,
            kappa: 1.0,
            gamma_buoy: 0.0,
            theta_e_profile: vec![0.5; n],
            ye_advect: 1.0,
            c2_f: 16.0,
            c2_h: 12.0,
            omega: (0.2, 0.4),
            q: 2.0,
            epsilon: 0.01,
        }
    }
}

impl CoupledConfig {
    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.n).map(|i| i as f64 * h).collect()
    }

    pub fn gamma(&self) -> f64 {
        1.0 / (2.0 * self.q) - self.epsilon
    }

    /// Same parameters on `n` points; a constant profile is resampled,
    /// anything else must be supplied again.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        let first = self.theta_e_profile.first().copied().unwrap_or(0.0);
        if self.theta_e_profile.iter().any(|&v| v != first) {
            return Err(Error::Usage("non-constant theta_e profile cannot be resampled".into()));
        }
        Ok(CoupledConfig { n, theta_e_profile: vec![first; n], ..self.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Config(format!("n = {} must be at least 8", self.n)));
        }
        if !(self.nu > 0.0 && self.kappa > 0.0) {
            return Err(Error::Config("nu and kappa must be positive".into()));
        }
        if self.theta_e_profile.len() != self.n {
            return Err(Error::Config(format!(
                "theta_e profile has {} values for n = {}",
                self.theta_e_profile.len(),
                self.n
            )));
        }
        let finite = [self.gamma_buoy, self.ye_advect, self.c2_f, self.c2_h]
            .iter()
            .chain(&self.theta_e_profile)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("coupled parameters must be finite".into()));
        }
        let (a, b) = self.omega;
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(Error::Config(format!("omega = ({a}, {b}) must satisfy 0 < a < b < 1")));
        }
        let g = self.gamma();
        if !(self.q > 1.0 && self.epsilon > 0.0 && g > 0.0 && g < 1.0) {
            return Err(Error::Config(format!(
                "q = {}, epsilon = {} give gamma = {g} outside (0,1)",
                self.q, self.epsilon
            )));
        }
        let ratio = self.c2_h / self.kappa;
        if ratio > 0.0 {
            let cc = ratio.sqrt();
            let k = (cc / std::f64::consts::PI).round();
            if k >= 1.0 && (cc - k * std::f64::consts::PI).abs() < 1e-3 {
                return Err(Error::Config(format!("c2_h / kappa = {ratio} is resonant")));
            }
        }
        Ok(())
    }
}

fn second_difference(n: usize, h: f64, coeff: f64, shift: f64) -> CMat {
    let s = coeff / (h * h);
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            c(-2.0 * s + shift, 0.0)
        } else if i.abs_diff(j) == 1 {
            c(s, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

fn first_difference(n: usize, h: f64, coeff: f64) -> CMat {
    let s = coeff / (2.0 * h);
    CMat::from_fn(n, n, |i, j| {
        if j == i + 1 {
            c(s, 0.0)
        } else if i == j + 1 {
            c(-s, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

/// Building blocks of the coupled operator.
#[derive(Debug, Clone)]
pub struct CoupledParts {
    /// Diffusion plus translation, fluid block.
    pub s_f: CMat,
    /// Diffusion plus translation, thermal block.
    pub s_h: CMat,
    pub advection: CMat,
    /// `C_gamma = -gamma I` (enters the fluid row as `-C_gamma`).
    pub c_gamma: CMat,
    /// `C_theta = diag(theta_e)` (enters the thermal row as `-C_theta`).
    pub c_theta: CMat,
}

pub fn coupled_parts(cfg: &CoupledConfig) -> Result<CoupledParts> {
    cfg.validate()?;
    let n = cfg.n;
    let h = cfg.h();
    let theta = CVec::from_iterator(n, cfg.theta_e_profile.iter().map(|&v| c(v, 0.0)));
    Ok(CoupledParts {
        s_f: second_difference(n, h, cfg.nu, cfg.c2_f),
        s_h: second_difference(n, h, cfg.kappa, cfg.c2_h),
        advection: first_difference(n, h, cfg.ye_advect),
        c_gamma: identity(n) * c(-cfg.gamma_buoy, 0.0),
        c_theta: CMat::from_diagonal(&theta),
    })
}

fn assemble_blocks(tl: &CMat, tr: &CMat, bl: &CMat, br: &CMat) -> CMat {
    let n = tl.nrows();
    let mut m = CMat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(tl);
    m.view_mut((0, n), (n, n)).copy_from(tr);
    m.view_mut((n, 0), (n, n)).copy_from(bl);
    m.view_mut((n, n), (n, n)).copy_from(br);
    m
}

fn grid(cfg: &CoupledConfig) -> GridMeta {
    GridMeta { h: cfg.h(), domain: "(0,1) x {fluid, thermal}".into() }
}

pub fn build_block_operator(cfg: &CoupledConfig) -> Result<Operator> {
    let p = coupled_parts(cfg)?;
    let m = assemble_blocks(&(&p.s_f + &p.advection), &(-&p.c_gamma), &(-&p.c_theta), &(&p.s_h + &p.advection));
    Ok(Operator::new(m, format!("coupled(n={})", cfg.n))?.with_grid(grid(cfg)))
}

/// Thermal Dirichlet map embedded in the block state (fluid rows zero).
pub fn build_thermal_dirichlet_map(cfg: &CoupledConfig) -> Result<GreenMap> {
    let p = coupled_parts(cfg)?;
    let n = cfg.n;
    // kappa D2 + c2_h = kappa (D2 + c2_h / kappa); the lifting is the same
    let d = dirichlet_columns(&(&p.s_h * c(1.0 / cfg.kappa, 0.0)), cfg.h())?;
    let mut g = CMat::zeros(2 * n, 2);
    g.view_mut((n, 0), (n, 2)).copy_from(&d);
    GreenMap::new(g, cfg.gamma(), vec!["thermal x=0".into(), "thermal x=1".into()])
}

/// Default interior control profiles: the indicator of omega on the fluid
/// rows, normalized in the h-weighted inner product.
pub fn interior_profiles(cfg: &CoupledConfig) -> CMat {
    let n = cfg.n;
    let w = interval_weights(&cfg.nodes(), cfg.h(), cfg.omega);
    let mut u = CMat::zeros(2 * n, 1);
    for i in 0..n {
        if w[i] > 0.0 {
            u[(i, 0)] = c(1.0, 0.0);
        }
    }
    let norm = (u.iter().map(|z| z.norm_sqr()).sum::<f64>() * cfg.h()).sqrt();
    if norm > 0.0 {
        u /= c(norm, 0.0);
    }
    u
}

/// Checks that every interior profile lives on the fluid rows inside omega.
fn check_interior_support(cfg: &CoupledConfig, j: &FeedbackLaw) -> Result<()> {
    let n = cfg.n;
    let w = interval_weights(&cfg.nodes(), cfg.h(), cfg.omega);
    for u in &j.boundary_profiles {
        if u.len() != 2 * n {
            return Err(Error::mismatch("interior profile", 2 * n, u.len()));
        }
        let zero = c(0.0, 0.0);
        let outside = (0..n).any(|i| w[i] == 0.0 && u[i] != zero) || (n..2 * n).any(|i| u[i] != zero);
        if outside {
            return Err(Error::Config("interior control profile is nonzero outside omega".into()));
        }
    }
    Ok(())
}

fn interior_operator(parts: &CoupledParts, j: &FeedbackLaw) -> CMat {
    let couplings = assemble_blocks(&parts.advection, &(-&parts.c_gamma), &(-&parts.c_theta), &parts.advection);
    couplings + j.as_matrix()
}

/// `A_F = blockdiag(S_f, S_h)(I - G F) + Pi`, `Pi` = advection, couplings
/// and `J`.
pub fn compose_coupled_loop(cfg: &CoupledConfig, f: FeedbackLaw, j: &FeedbackLaw) -> Result<ClosedLoop> {
    let parts = coupled_parts(cfg)?;
    let n2 = 2 * cfg.n;
    if j.as_matrix().shape() != (n2, n2) {
        return Err(Error::mismatch(
            "interior feedback J",
            format!("{n2}x{n2}"),
            format!("{}x{}", j.as_matrix().nrows(), j.as_matrix().ncols()),
        ));
    }
    check_interior_support(cfg, j)?;
    let oseen = Operator::new(block_diag(&parts.s_f, &parts.s_h), "blockdiag(S_f,S_h)")?.with_grid(grid(cfg));
    let pi = Operator::new(interior_operator(&parts, j), "Pi")?;
    ClosedLoop::compose(oseen, build_thermal_dirichlet_map(cfg)?, f, Some(pi))
}

/// `(Ahat_F, Pi)` of a composed coupled loop.
pub fn split(cl: &ClosedLoop) -> (CMat, CMat) {
    let n = cl.dim();
    let a_hat = cl.oseen.entries() * (identity(n) - cl.green.entries() * cl.feedback.as_matrix());
    let pi = cl.interior_b.as_ref().map_or_else(|| CMat::zeros(n, n), |b| b.entries().clone());
    (a_hat, pi)
}

/// Max entrywise `|Ahat_F + Pi - A_F|`, relative to `||A_F||`.
pub fn reassembly_residual(cl: &ClosedLoop) -> f64 {
    let (a_hat, pi) = split(cl);
    let gap = (a_hat + pi - cl.composed.entries()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    gap / cl.composed.entries().norm().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone)]
pub struct CoupledSynthesis {
    /// Open-loop spectrum of the block operator.
    pub spectral: SpectralData,
    /// Reduced pair over all inputs actually offered (boundary, plus the
    /// interior profile when enabled).
    pub reduced: Option<ReducedPair>,
    pub rank: Option<RankReport>,
    pub k: usize,
    /// False when the rank check failed and the feedback was left at zero.
    pub placed: bool,
    pub j: FeedbackLaw,
    pub closed_loop: ClosedLoop,
}

/// Places the unstable modes of the block operator using the thermal
/// boundary inputs and, if `with_interior`, the interior profile on omega.
/// A failed rank check is reported, not raised: the loop is then assembled
/// with zero feedback so that verification can show the failure.
pub fn stabilize_coupled(
    cfg: &CoupledConfig,
    targets: Option<&[C64]>,
    with_interior: bool,
) -> Result<CoupledSynthesis> {
    let op = build_block_operator(cfg)?;
    let sd = spectrum(&op, DEFAULT_TOL_UNSTABLE)?;
    let n2 = 2 * cfg.n;
    let parts = coupled_parts(cfg)?;
    let zero_j = FeedbackLaw::zero(n2, n2);
    if sd.unstable_count == 0 {
        let cl = compose_coupled_loop(cfg, FeedbackLaw::zero(2, n2), &zero_j)?;
        return Ok(CoupledSynthesis {
            spectral: sd,
            reduced: None,
            rank: None,
            k: 0,
            placed: true,
            j: zero_j,
            closed_loop: cl,
        });
    }
    let boundary = block_diag(&parts.s_f, &parts.s_h) * build_thermal_dirichlet_map(cfg)?.entries();
    let u = interior_profiles(cfg);
    let m_b = boundary.ncols();
    let input = if with_interior {
        let mut m = CMat::zeros(n2, m_b + u.ncols());
        m.view_mut((0, 0), (n2, m_b)).copy_from(&boundary);
        m.view_mut((0, m_b), (n2, u.ncols())).copy_from(&(-&u));
        m
    } else {
        boundary
    };
    let rp = reduce_with_input(&sd, &input)?;
    let rank = rank_check(&rp, DEFAULT_RANK_TOL);
    let k = choose_k(&sd);
    if !rank.passed() {
        let cl = compose_coupled_loop(cfg, FeedbackLaw::zero(2, n2), &zero_j)?;
        return Ok(CoupledSynthesis {
            spectral: sd,
            reduced: Some(rp),
            rank: Some(rank),
            k,
            placed: false,
            j: zero_j,
            closed_loop: cl,
        });
    }
    let targets = targets.map_or_else(|| default_targets(&sd), <[C64]>::to_vec);
    let gain = place_poles(&rp, &targets)?;
    let gain_f = gain.rows(0, m_b).into_owned();
    let f = build_feedback(&gain_f, FeedbackMode::Spectral, &sd, None, &identity(m_b), &targets)?;
    let j = if with_interior {
        let gain_j = gain.rows(m_b, u.ncols()).into_owned();
        build_feedback(&gain_j, FeedbackMode::Spectral, &sd, None, &u, &targets)?
    } else {
        zero_j
    };
    let cl = compose_coupled_loop(cfg, f, &j)?;
    Ok(CoupledSynthesis { spectral: sd, reduced: Some(rp), rank: Some(rank), k, placed: true, j, closed_loop: cl })
}

/// Decay-rate window, plateau scans and imaginary-axis bound for a coupled
/// loop, plus the Hautus report when one is supplied.
pub fn verify_coupled_stabilization(
    cl: &ClosedLoop,
    open: &SpectralData,
    rank: Option<&RankReport>,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let abscissa = cl.abscissa()?;
    let next = open.first_stable().map_or(f64::NEG_INFINITY, |z| z.re);
    let mut checks = Vec::new();
    if let Some(r) = rank {
        let worst = r.margins.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::new(
            "hautus",
            r.passed(),
            format!("min margin {worst:.6e}, failing eigenvalues {:?}", r.failing()),
        ));
    }
    checks.push(Check::new(
        "rate_window",
        next < abscissa && abscissa < 0.0,
        format!("Re lambda_(N+1) {next:.6e} < abscissa {abscissa:.6e} < 0"),
    ));
    let fit = decay_estimate(&cl.composed, &opts.t_grid);
    let decay_rate = fit.as_ref().map_or(f64::NEG_INFINITY, |f| f.delta);
    checks.push(match &fit {
        Ok(f) => Check::new("decay", -f.delta < 0.0 && -f.delta > next, format!("fitted rate {:.6e}", -f.delta)),
        Err(e) => Check::new("decay", false, e.to_string()),
    });
    let mut plateau = Vec::new();
    if abscissa < 0.0 {
        for &p in &opts.p_grid {
            let r = plateau_scan(cl, p, &opts.horizons, &opts.forcings)?;
            checks.push(Check::new(
                format!("plateau_p{p}"),
                r.verdict == Verdict::Plateau,
                format!("verdict {} C={:?}", r.verdict, r.c_estimates),
            ));
            plateau.push(r);
        }
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

/// `||blockdiag_translated^{-(1-gamma)} (S G F)||`: the constant in the
/// relative bound of the boundary feedback term by `A^{1-gamma}`.
pub fn adjoint_perturbation_constant(cl: &ClosedLoop) -> Result<f64> {
    let n = cl.dim();
    let gamma = cl.green.gamma;
    let s = cl.oseen.entries();
    let k = spectrum::spectral_abscissa(s)?.max(0.0) + 1.0;
    let a = Operator::new(identity(n) * c(k, 0.0) - s, "A_blk")?;
    let sd = spectrum(&a, 0.0)?;
    let neg = real_power(&sd, -(1.0 - gamma))?;
    Ok(spectral_norm(&(neg * s * cl.green.entries() * cl.feedback.as_matrix())))
}
