//! Subcommand drivers. Each command collects its outputs in memory, then
//! writes them atomically together with a manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use feedstab_core::closed_loop::{adjoint_closed_loop_with, resolvent_identity_scan, DEFAULT_EPSILON};
use feedstab_core::coupled::{
    build_block_operator, build_thermal_dirichlet_map, compose_coupled_loop, reassembly_residual, stabilize_coupled,
    verify_coupled_stabilization,
};
use feedstab_core::decay::{decay_estimate, linspace, logspace};
use feedstab_core::expm::semigroup_apply;
use feedstab_core::heat::{
    build_dirichlet_map, build_heat_operator, closed_loop_heat, gamma_bound_scan, synthesize_heat,
    verify_stabilization, Check, VerifyOptions, VerifyReport,
};
use feedstab_core::linalg::spectral_norm;
use feedstab_core::maxreg::{duality_scan, imaginary_axis_bound, scan_generator, ForcingSpec, QuadratureOptions};
use feedstab_core::spectrum::{eigenvalues, spectrum, DEFAULT_TOL_UNSTABLE};
use feedstab_core::synthesis::{
    build_feedback, choose_k, default_targets, place_poles, rank_check, reduce, reduce_with_input, select_profiles,
    RankReport, DEFAULT_RANK_TOL,
};
use feedstab_core::{
    matfmt, report, CMat, CVec, ClosedLoop, Error, FeedbackLaw, FeedbackMode, GreenMap, Operator, SpectralData, C64,
};
use serde::Serialize;

use crate::config::{LoadedConfig, ModelKind};
use crate::error::{exit, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    DirichletMap,
    Synthesize,
    Simulate,
    Maxreg,
    Verify,
    Report,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::DirichletMap => "dirichlet-map",
            Command::Synthesize => "synthesize",
            Command::Simulate => "simulate",
            Command::Maxreg => "maxreg",
            Command::Verify => "verify",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
    pub parallel: Option<usize>,
}

/// Result of a command that ran to completion. `code` is non-zero when a
/// verification or rank check failed; outputs are written either way.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub message: Option<String>,
    pub files: Vec<PathBuf>,
}

#[derive(Default)]
struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> feedstab_core::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    fn matrix(&mut self, name: &str, m: &CMat) {
        self.add(name, matfmt::to_string(m).into_bytes());
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    core_version: &'a str,
    command: &'a str,
    model: ModelKind,
    seed: u64,
    parallel: Option<usize>,
    exit_code: i32,
    outputs: Vec<String>,
    config: &'a str,
}

/// Open-loop model: the generator whose spectrum is reported, plus the
/// factors of the closed loop.
struct Model {
    generator: Operator,
    oseen: Operator,
    green: GreenMap,
    interior_b: Option<Operator>,
    fixed_feedback: Option<FeedbackLaw>,
}

struct LoopBuild {
    spectral: SpectralData,
    closed: ClosedLoop,
    rank: Option<RankReport>,
    placed: bool,
    label: String,
    interior: Option<FeedbackLaw>,
    targets: Vec<C64>,
}

fn read_matrix(cfg: &LoadedConfig, key: &str, path: &Path) -> Result<CMat, CliError> {
    let full = cfg.resolve(path);
    let file = std::fs::File::open(&full)
        .map_err(|e| cfg.error_at("abstract", key, format!("cannot open {}: {e}", full.display())))?;
    matfmt::read_matrix(std::io::BufReader::new(file))
        .map_err(|e| cfg.error_at("abstract", key, format!("{}: {e}", full.display())))
}

/// `F` given row by row as a rank-m law with canonical input profiles.
fn law_from_matrix(f: &CMat) -> Result<FeedbackLaw, CliError> {
    let (m, n) = f.shape();
    let functionals = (0..m).map(|i| f.row(i).adjoint()).collect();
    let profiles = (0..m).map(|i| CVec::from_fn(m, |r, _| C64::new(if r == i { 1.0 } else { 0.0 }, 0.0))).collect();
    Ok(FeedbackLaw::assemble(FeedbackMode::Spectral, f.clone(), functionals, vec![1.0; n], profiles, m, Vec::new())?)
}

fn abstract_model(cfg: &LoadedConfig) -> Result<Model, CliError> {
    let sec = cfg.config.abstract_model.as_ref().expect("validated");
    let oseen = Operator::new(read_matrix(cfg, "oseen", &sec.oseen)?, "oseen")
        .map_err(|e| cfg.error_at("abstract", "oseen", e.to_string()))?;
    let g = read_matrix(cfg, "green", &sec.green)?;
    let labels = (1..=g.ncols()).map(|i| format!("u{i}")).collect();
    let green = GreenMap::new(g, sec.gamma, labels).map_err(|e| cfg.error_at("abstract", "green", e.to_string()))?;
    if green.state_dim() != oseen.dim() {
        return Err(cfg.error_at(
            "abstract",
            "green",
            format!("green has {} rows, oseen is {}x{}", green.state_dim(), oseen.dim(), oseen.dim()),
        ));
    }
    let interior_b = match &sec.interior_b {
        Some(p) => {
            let b = Operator::new(read_matrix(cfg, "interior_b", p)?, "B")
                .map_err(|e| cfg.error_at("abstract", "interior_b", e.to_string()))?;
            if b.dim() != oseen.dim() {
                return Err(cfg.error_at("abstract", "interior_b", "interior_b must match oseen"));
            }
            Some(b)
        }
        None => None,
    };
    let fixed_feedback = match &sec.feedback {
        Some(p) => {
            let f = read_matrix(cfg, "feedback", p)?;
            if f.shape() != (green.input_dim(), oseen.dim()) {
                return Err(cfg.error_at(
                    "abstract",
                    "feedback",
                    format!("feedback must be {}x{}", green.input_dim(), oseen.dim()),
                ));
            }
            Some(law_from_matrix(&f)?)
        }
        None => None,
    };
    let mut gen = oseen.entries().clone();
    if let Some(b) = &interior_b {
        gen += b.entries();
    }
    Ok(Model { generator: Operator::new(gen, "oseen + B")?, oseen, green, interior_b, fixed_feedback })
}

fn open_generator(cfg: &LoadedConfig) -> Result<Operator, CliError> {
    Ok(match cfg.config.model {
        ModelKind::Heat => build_heat_operator(&cfg.heat()?)?,
        ModelKind::Coupled => build_block_operator(&cfg.coupled()?)?,
        ModelKind::Abstract => abstract_model(cfg)?.generator,
    })
}

fn spectral_only(cfg: &LoadedConfig, mode: FeedbackMode) -> Result<(), CliError> {
    if mode == FeedbackMode::Localized {
        return Err(cfg.error_at(
            "synthesis",
            "mode",
            "localized feedback needs a grid with an observation region (heat model only)",
        ));
    }
    Ok(())
}

fn build_loop(cfg: &LoadedConfig, synthesize: bool) -> Result<LoopBuild, CliError> {
    let mode = cfg.mode()?;
    let targets = cfg.targets()?;
    match cfg.config.model {
        ModelKind::Heat => {
            let hc = cfg.heat()?;
            let op = build_heat_operator(&hc)?;
            let sd = spectrum(&op, DEFAULT_TOL_UNSTABLE)?;
            let open = |sd: SpectralData, rank, placed| -> Result<LoopBuild, CliError> {
                Ok(LoopBuild {
                    closed: closed_loop_heat(&hc, FeedbackLaw::zero(2, hc.n))?,
                    spectral: sd,
                    rank,
                    placed,
                    label: "open".into(),
                    interior: None,
                    targets: Vec::new(),
                })
            };
            if !synthesize || sd.unstable_count == 0 {
                return open(sd, None, true);
            }
            let rank = rank_check(&reduce(&sd, &op, &build_dirichlet_map(&hc)?)?, DEFAULT_RANK_TOL);
            if !rank.passed() {
                return open(sd, Some(rank), false);
            }
            let s = synthesize_heat(&hc, mode, targets.as_deref())?;
            Ok(LoopBuild {
                targets: s.feedback().targets.clone(),
                spectral: s.spectral,
                closed: s.closed_loop,
                rank: s.rank,
                placed: true,
                label: mode.to_string(),
                interior: None,
            })
        }
        ModelKind::Coupled => {
            let cc = cfg.coupled()?;
            let n2 = 2 * cc.n;
            if !synthesize {
                let sd = spectrum(&build_block_operator(&cc)?, DEFAULT_TOL_UNSTABLE)?;
                let closed = compose_coupled_loop(&cc, FeedbackLaw::zero(2, n2), &FeedbackLaw::zero(n2, n2))?;
                return Ok(LoopBuild {
                    spectral: sd,
                    closed,
                    rank: None,
                    placed: true,
                    label: "open".into(),
                    interior: None,
                    targets: Vec::new(),
                });
            }
            spectral_only(cfg, mode)?;
            let s = stabilize_coupled(&cc, targets.as_deref(), cfg.config.synthesis.interior)?;
            let targets = s.closed_loop.feedback.targets.clone();
            Ok(LoopBuild {
                label: if s.placed { mode.to_string() } else { "open".into() },
                spectral: s.spectral,
                closed: s.closed_loop,
                rank: s.rank,
                placed: s.placed,
                interior: cfg.config.synthesis.interior.then_some(s.j),
                targets,
            })
        }
        ModelKind::Abstract => {
            let m = abstract_model(cfg)?;
            let sd = spectrum(&m.generator, DEFAULT_TOL_UNSTABLE)?;
            let n = m.oseen.dim();
            let inputs = m.green.input_dim();
            let compose =
                |law: FeedbackLaw| ClosedLoop::compose(m.oseen.clone(), m.green.clone(), law, m.interior_b.clone());
            if let Some(law) = m.fixed_feedback.clone() {
                return Ok(LoopBuild {
                    spectral: sd,
                    closed: compose(law)?,
                    rank: None,
                    placed: true,
                    label: "given".into(),
                    interior: None,
                    targets: Vec::new(),
                });
            }
            let zero = |sd, rank, placed| -> Result<LoopBuild, CliError> {
                Ok(LoopBuild {
                    spectral: sd,
                    closed: compose(FeedbackLaw::zero(inputs, n))?,
                    rank,
                    placed,
                    label: "open".into(),
                    interior: None,
                    targets: Vec::new(),
                })
            };
            if !synthesize || sd.unstable_count == 0 {
                return zero(sd, None, true);
            }
            spectral_only(cfg, mode)?;
            let input = m.oseen.entries() * m.green.entries();
            let rp = reduce_with_input(&sd, &input)?;
            let rank = rank_check(&rp, DEFAULT_RANK_TOL);
            if !rank.passed() {
                return zero(sd, Some(rank), false);
            }
            let targets = targets.unwrap_or_else(|| default_targets(&sd));
            let profiles = select_profiles(&rp, choose_k(&sd));
            let gain = place_poles(&rp.with_inputs(&profiles)?, &targets)?;
            let law = build_feedback(&gain, FeedbackMode::Spectral, &sd, None, &profiles, &targets)?;
            Ok(LoopBuild {
                spectral: sd,
                closed: compose(law)?,
                rank: Some(rank),
                placed: true,
                label: "spectral".into(),
                interior: None,
                targets,
            })
        }
    }
}

/// Closed-loop eigenvalue nearest to each target, each used at most once.
fn achieved_poles(cl: &ClosedLoop, targets: &[C64]) -> Result<Vec<C64>, CliError> {
    let mut pool = eigenvalues(cl.composed.entries())?;
    Ok(targets
        .iter()
        .filter_map(|t| {
            let (i, _) = pool.iter().enumerate().min_by(|a, b| (a.1 - t).norm().total_cmp(&(b.1 - t).norm()))?;
            Some(pool.swap_remove(i))
        })
        .collect())
}

fn forcing_spec(cfg: &LoadedConfig, seed: u64) -> ForcingSpec {
    let m = &cfg.config.maxreg;
    ForcingSpec { random_count: m.forcings, seed, cell_width: m.cell_width, single_modes: m.single_modes }
}

fn verify_options(cfg: &LoadedConfig, seed: u64) -> VerifyOptions {
    let m = &cfg.config.maxreg;
    VerifyOptions {
        t_grid: linspace(1.0, 10.0, 10),
        margin: None,
        p_grid: m.p_grid.clone(),
        horizons: m.t_grid.clone(),
        forcings: forcing_spec(cfg, seed),
        imag_grid: logspace(1e-3, 1e3, m.imag_points.max(1)),
    }
}

fn hautus_check(rank: &RankReport) -> Check {
    let worst = rank.margins.iter().copied().fold(f64::INFINITY, f64::min);
    Check::new("hautus", rank.passed(), format!("min margin {worst:.6e}, failing eigenvalues {:?}", rank.failing()))
}

fn identity_checks(cfg: &LoadedConfig, lb: &LoopBuild, seed: u64) -> Result<Vec<Check>, CliError> {
    let cl = &lb.closed;
    let mut checks = Vec::new();
    let comp = cl.composition_residual();
    checks.push(Check::new("composition", comp <= 1e-12, format!("residual {comp:.3e}")));
    if cfg.config.model == ModelKind::Coupled {
        let r = reassembly_residual(cl);
        checks.push(Check::new("reassembly", r <= 1e-12, format!("residual {r:.3e}")));
    }
    let points = cfg.config.maxreg.resolvent_points;
    if points > 0 {
        checks.push(match resolvent_identity_scan(cl, points, seed) {
            Ok(rows) => {
                let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
                Check::new(
                    "resolvent_identity",
                    worst <= 1e-8,
                    format!("max residual {worst:.3e} over {points} points"),
                )
            }
            Err(e) => Check::new("resolvent_identity", false, e.to_string()),
        });
    }
    checks.push(match adjoint_closed_loop_with(cl, DEFAULT_EPSILON) {
        Ok(a) => Check::new("adjoint_decomposition", true, format!("residual {:.3e}", a.residual)),
        Err(e) => Check::new("adjoint_decomposition", false, e.to_string()),
    });
    Ok(checks)
}

fn duality_checks(cfg: &LoadedConfig, cl: &ClosedLoop, seed: u64) -> Result<Vec<Check>, CliError> {
    let m = &cfg.config.maxreg;
    if !m.duality {
        return Ok(Vec::new());
    }
    let spec = forcing_spec(cfg, seed);
    let opts = QuadratureOptions::default();
    m.p_grid
        .iter()
        .map(|&p| {
            let d = duality_scan(cl.composed.entries(), p, &m.t_grid, &spec, &opts)?;
            Ok(Check::new(
                format!("duality_p{p}"),
                d.verdicts_agree(),
                format!("primal {} dual(p'={}) {} gap {:.3e}", d.primal.verdict, d.dual.p, d.dual.verdict, d.gap),
            ))
        })
        .collect()
}

fn verify_report(cfg: &LoadedConfig, lb: &LoopBuild, seed: u64) -> Result<VerifyReport, CliError> {
    let opts = verify_options(cfg, seed);
    let mut report = match cfg.config.model {
        ModelKind::Coupled => verify_coupled_stabilization(&lb.closed, &lb.spectral, lb.rank.as_ref(), &opts)?,
        _ => {
            let mut r = verify_stabilization(&lb.closed, &opts)?;
            if let Some(rank) = &lb.rank {
                r.checks.insert(0, hautus_check(rank));
            }
            r
        }
    };
    report.checks.extend(identity_checks(cfg, lb, seed)?);
    report.checks.extend(duality_checks(cfg, &lb.closed, seed)?);
    Ok(report)
}

fn model_name(cfg: &LoadedConfig) -> &'static str {
    match cfg.config.model {
        ModelKind::Heat => "heat",
        ModelKind::Coupled => "coupled",
        ModelKind::Abstract => "abstract",
    }
}

fn cmd_spectrum(cfg: &LoadedConfig, out: &mut Outputs) -> Result<i32, CliError> {
    let sd = spectrum(&open_generator(cfg)?, DEFAULT_TOL_UNSTABLE)?;
    out.csv("spectrum.csv", |w| report::write_spectrum(w, &sd))?;
    Ok(exit::OK)
}

fn cmd_dirichlet(cfg: &LoadedConfig, out: &mut Outputs) -> Result<i32, CliError> {
    match cfg.config.model {
        ModelKind::Heat => {
            let hc = cfg.heat()?;
            out.matrix("dirichlet_map.txt", build_dirichlet_map(&hc)?.entries());
            let d = &cfg.config.dirichlet;
            if !d.grids.is_empty() && !d.gammas.is_empty() {
                let rows = gamma_bound_scan(&d.grids, &d.gammas, &hc)?;
                out.csv("gamma_scan.csv", |w| report::write_gamma_scan(w, &rows))?;
            }
        }
        ModelKind::Coupled => out.matrix("dirichlet_map.txt", build_thermal_dirichlet_map(&cfg.coupled()?)?.entries()),
        ModelKind::Abstract => out.matrix("dirichlet_map.txt", abstract_model(cfg)?.green.entries()),
    }
    Ok(exit::OK)
}

/// Writes feedback artifacts; returns false when the rank check failed.
fn synthesis_outputs(lb: &LoopBuild, out: &mut Outputs) -> Result<bool, CliError> {
    if let Some(rank) = &lb.rank {
        out.csv("rank.csv", |w| report::write_rank(w, rank))?;
    }
    if !lb.placed {
        return Ok(false);
    }
    let law = &lb.closed.feedback;
    let mut shown = law.clone();
    shown.targets = lb.targets.clone();
    let achieved = achieved_poles(&lb.closed, &lb.targets)?;
    out.csv("feedback.csv", |w| report::write_feedback(w, &shown, &achieved))?;
    out.matrix("feedback.txt", law.as_matrix());
    if law.gain.nrows() > 0 {
        out.matrix("gain.txt", &law.gain);
    }
    if let Some(j) = &lb.interior {
        out.matrix("interior_feedback.txt", j.as_matrix());
    }
    Ok(true)
}

fn rank_failure(lb: &LoopBuild) -> Option<String> {
    lb.rank.as_ref().filter(|r| !r.passed()).map(|r| r.to_string())
}

fn cmd_synthesize(cfg: &LoadedConfig, out: &mut Outputs) -> Result<(i32, Option<String>), CliError> {
    let lb = build_loop(cfg, true)?;
    if !synthesis_outputs(&lb, out)? {
        return Ok((exit::SYNTHESIS, rank_failure(&lb)));
    }
    Ok((exit::OK, None))
}

fn cmd_simulate(cfg: &LoadedConfig, out: &mut Outputs) -> Result<i32, CliError> {
    let lb = build_loop(cfg, cfg.config.synthesis.enabled)?;
    let s = &cfg.config.simulate;
    let mut text = String::from("t,semigroup_norm\n");
    for t in linspace(0.0, s.horizon, s.samples) {
        let e = semigroup_apply(&lb.closed.composed, t)?;
        writeln!(text, "{t:e},{:e}", spectral_norm(e.entries())).expect("string write");
    }
    out.add("simulate.csv", text.into_bytes());
    let grid: Vec<f64> = linspace(0.0, s.horizon, s.samples).into_iter().filter(|&t| t > 0.0).collect();
    if let Ok(fit) = decay_estimate(&lb.closed.composed, &grid) {
        out.add("decay.csv", format!("m,delta\n{:e},{:e}\n", fit.m, fit.delta).into_bytes());
    }
    Ok(exit::OK)
}

fn cmd_maxreg(cfg: &LoadedConfig, out: &mut Outputs, seed: u64) -> Result<i32, CliError> {
    let lb = build_loop(cfg, cfg.config.synthesis.enabled)?;
    let m = &cfg.config.maxreg;
    let a = lb.closed.composed.entries();
    let mut reports = scan_generator(a, &m.p_grid, &m.t_grid, &forcing_spec(cfg, seed), &QuadratureOptions::default())?;
    let sup = match imaginary_axis_bound(&lb.closed, &logspace(1e-3, 1e3, m.imag_points.max(1))) {
        Ok(s) => Some(s),
        Err(Error::Singular { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    for r in &mut reports {
        r.imag_axis_sup = sup;
    }
    out.csv("maxreg.csv", |w| report::write_maxreg(w, model_name(cfg), &lb.label, &reports))?;
    Ok(exit::OK)
}

fn verify_into(
    cfg: &LoadedConfig,
    lb: &LoopBuild,
    out: &mut Outputs,
    seed: u64,
) -> Result<(i32, Option<String>), CliError> {
    let r = verify_report(cfg, lb, seed)?;
    out.csv("verify.csv", |w| report::write_verify(w, &r))?;
    out.csv("maxreg.csv", |w| report::write_maxreg(w, model_name(cfg), &lb.label, &r.plateau))?;
    if r.passed() {
        Ok((exit::OK, None))
    } else {
        let names: Vec<&str> = r.failing().iter().map(|c| c.name.as_str()).collect();
        Ok((exit::VERIFY_FAIL, Some(format!("failing checks: {}", names.join(", ")))))
    }
}

fn cmd_verify(cfg: &LoadedConfig, out: &mut Outputs, seed: u64) -> Result<(i32, Option<String>), CliError> {
    let lb = build_loop(cfg, cfg.config.synthesis.enabled)?;
    verify_into(cfg, &lb, out, seed)
}

fn cmd_report(cfg: &LoadedConfig, out: &mut Outputs, seed: u64) -> Result<(i32, Option<String>), CliError> {
    cmd_spectrum(cfg, out)?;
    let lb = build_loop(cfg, cfg.config.synthesis.enabled)?;
    let placed = synthesis_outputs(&lb, out)?;
    let (code, msg) = verify_into(cfg, &lb, out, seed)?;
    let mut text = String::new();
    writeln!(text, "model: {}", model_name(cfg)).unwrap();
    writeln!(text, "feedback: {}", lb.label).unwrap();
    writeln!(text, "unstable eigenvalues: {}", lb.spectral.unstable_count).unwrap();
    writeln!(text, "closed-loop abscissa: {:e}", lb.closed.abscissa()?).unwrap();
    if let Some(r) = &lb.rank {
        writeln!(text, "rank check: {}", if r.passed() { "PASS" } else { "FAIL" }).unwrap();
    }
    writeln!(text, "verification: {}", if code == exit::OK { "PASS" } else { "FAIL" }).unwrap();
    out.add("summary.txt", text.into_bytes());
    if !placed && lb.rank.is_some() {
        return Ok((exit::SYNTHESIS, rank_failure(&lb)));
    }
    Ok((code, msg))
}

fn write_outputs(dir: &Path, outputs: &Outputs) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    outputs
        .files
        .iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            report::write_atomic(&path, bytes)?;
            Ok(path)
        })
        .collect()
}

/// Runs one subcommand and writes its outputs plus `manifest.toml` into
/// `opts.out`. Errors before any output is produced are returned as `Err`.
pub fn run(command: Command, cfg: &LoadedConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let mut out = Outputs::default();
    let seed = opts.seed;
    let (code, message) = match command {
        Command::Spectrum => (cmd_spectrum(cfg, &mut out)?, None),
        Command::DirichletMap => (cmd_dirichlet(cfg, &mut out)?, None),
        Command::Synthesize => cmd_synthesize(cfg, &mut out)?,
        Command::Simulate => (cmd_simulate(cfg, &mut out)?, None),
        Command::Maxreg => (cmd_maxreg(cfg, &mut out, seed)?, None),
        Command::Verify => cmd_verify(cfg, &mut out, seed)?,
        Command::Report => cmd_report(cfg, &mut out, seed)?,
    };
    let manifest = Manifest {
        tool: "feedstab",
        version: env!("CARGO_PKG_VERSION"),
        core_version: feedstab_core::VERSION,
        command: command.as_str(),
        model: cfg.config.model,
        seed,
        parallel: opts.parallel,
        exit_code: code,
        outputs: out.files.iter().map(|(n, _)| n.clone()).collect(),
        config: &cfg.text,
    };
    let text = toml::to_string(&manifest).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    out.add("manifest.toml", text.into_bytes());
    let files = write_outputs(&opts.out, &out)?;
    Ok(Outcome { code, message, files })
}
