//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use feedstab_core::closed_loop::{adjoint_closed_loop_with, resolvent_identity_scan};
use feedstab_core::coupled::{reassembly_residual, stabilize_coupled, verify_coupled_stabilization, CoupledConfig};
use feedstab_core::decay::linspace;
use feedstab_core::heat::{
    advection_relative_bound, build_heat_operator, closed_loop_heat, gamma_bound_scan, synthesize_heat, HeatConfig,
    VerifyOptions,
};
use feedstab_core::linalg::{c, matching_distance};
use feedstab_core::maxreg::{
    duality_scan, imaginary_axis_sup, scan_generator, ForcingSpec, QuadratureOptions, Verdict,
};
use feedstab_core::spectrum::{eigenvalues, spectrum, DEFAULT_TOL_UNSTABLE};
use feedstab_core::{decay_estimate, CMat, ClosedLoop, FeedbackLaw, FeedbackMode, GreenMap, Operator, C64};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn heat64() -> HeatConfig {
    HeatConfig { n: 64, c2: 16.0, ..HeatConfig::default() }
}

fn stabilized_heat(cfg: &HeatConfig) -> ClosedLoop {
    synthesize_heat(cfg, FeedbackMode::Spectral, Some(&[c(-2.0, 0.0)])).unwrap().closed_loop
}

fn open_heat(cfg: &HeatConfig) -> ClosedLoop {
    closed_loop_heat(cfg, FeedbackLaw::zero(2, cfg.n)).unwrap()
}

fn coupled_targets() -> [C64; 2] {
    [c(-2.0, 0.0), c(-3.0, 0.0)]
}

/// Hand-built 2x2 loop with an interior term, synthesized by placing the
/// single unstable eigenvalue.
fn abstract_loop() -> ClosedLoop {
    let oseen =
        Operator::new(CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(-2.0, 0.0)]), "o").unwrap();
    let green = GreenMap::new(CMat::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.5, 0.0)]), 0.3, vec!["u".into()]).unwrap();
    let b =
        Operator::new(CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.1, 0.0), c(-0.1, 0.0), c(0.0, 0.0)]), "b").unwrap();
    let gen = Operator::new(oseen.entries() + b.entries(), "gen").unwrap();
    let sd = spectrum(&gen, DEFAULT_TOL_UNSTABLE).unwrap();
    let rp = feedstab_core::synthesis::reduce_with_input(&sd, &(oseen.entries() * green.entries())).unwrap();
    let prof = CMat::from_element(1, 1, c(1.0, 0.0));
    let targets = [c(-1.0, 0.0)];
    let gain = feedstab_core::synthesis::place_poles(&rp, &targets).unwrap();
    let law =
        feedstab_core::synthesis::build_feedback(&gain, FeedbackMode::Spectral, &sd, None, &prof, &targets).unwrap();
    ClosedLoop::compose(oseen, green, law, Some(b)).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let sd = spectrum(&build_heat_operator(&heat64()).unwrap(), DEFAULT_TOL_UNSTABLE).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let oracle = 16.0 - PI * PI;
    let lam = sd.eigenvalues[0];
    ensure(sd.unstable_count == 1, format!("{} unstable eigenvalues", sd.unstable_count))?;
    ensure((lam.re - oracle).abs() < 2e-2 && lam.im == 0.0, format!("lambda_1 = {lam}, oracle {oracle}"))?;
    ensure(elapsed < 1.0, format!("took {elapsed:.2}s"))?;
    Ok(format!("lambda_1 = {:.5}, 16 - pi^2 = {oracle:.5}, {elapsed:.3}s", lam.re))
}

fn criterion_2() -> Outcome {
    let cfg = heat64();
    let open = spectrum(&build_heat_operator(&cfg).unwrap(), DEFAULT_TOL_UNSTABLE).unwrap();
    let cl = stabilized_heat(&cfg);
    let a = cl.abscissa().unwrap();
    ensure((a + 2.0).abs() <= 1e-6, format!("abscissa {a}"))?;
    let mut expected = vec![c(-2.0, 0.0)];
    expected.extend_from_slice(&open.eigenvalues[open.unstable_count..]);
    let got = eigenvalues(cl.composed.entries()).unwrap();
    let dist = matching_distance(&got, &expected);
    ensure(dist <= 1e-6, format!("stable spectrum moved by {dist:e}"))?;
    let fit = decay_estimate(&cl.composed, &linspace(1.0, 10.0, 10)).unwrap();
    ensure(fit.delta >= 1.8, format!("delta {}", fit.delta))?;
    Ok(format!("abscissa {a:.9}, matching distance {dist:.2e}, delta {:.4}", fit.delta))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let cfg = heat64();
    let p = [1.5, 2.0, 4.0];
    let t = [10.0, 20.0, 40.0];
    let spec = ForcingSpec::default();
    let opts = QuadratureOptions::default();
    let closed = scan_generator(stabilized_heat(&cfg).composed.entries(), &p, &t, &spec, &opts).unwrap();
    let mut detail = Vec::new();
    for r in &closed {
        let change = (r.c_estimates[2] - r.c_estimates[1]).abs() / r.c_estimates[1];
        ensure(change < 0.05, format!("p={} change {change:.4}", r.p))?;
        detail.push(format!("p={} {:.2}%", r.p, 100.0 * change));
    }
    let open = scan_generator(open_heat(&cfg).composed.entries(), &p, &t, &spec, &opts).unwrap();
    let mut min_growth = f64::INFINITY;
    for r in &open {
        for w in r.c_estimates.windows(2) {
            min_growth = min_growth.min(w[1].ln() - w[0].ln());
        }
    }
    ensure(min_growth > 3.0, format!("open-loop log C growth {min_growth}"))?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, format!("took {elapsed:.1}s"))?;
    Ok(format!("plateau {}; open-loop min dlogC {min_growth:.1}; {elapsed:.1}s", detail.join(", ")))
}

fn criterion_4() -> Outcome {
    let heat = stabilized_heat(&HeatConfig { advection_b: 2.0, ..heat64() });
    let coupled = stabilize_coupled(&CoupledConfig::default(), Some(&coupled_targets()), true).unwrap().closed_loop;
    let mut worst = 0.0f64;
    for (name, cl) in [("heat", &heat), ("coupled", &coupled)] {
        let rows = resolvent_identity_scan(cl, 20, 2024).unwrap();
        ensure(rows.len() == 20, "sample count")?;
        let w = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        ensure(w <= 1e-8, format!("{name}: residual {w:e}"))?;
        worst = worst.max(w);
    }
    Ok(format!("max relative residual {worst:.2e} over 2 x 20 points"))
}

fn criterion_5() -> Outcome {
    let heat = stabilized_heat(&HeatConfig { advection_b: 2.0, ..heat64() });
    let coupled = stabilize_coupled(&CoupledConfig::default(), Some(&coupled_targets()), true).unwrap().closed_loop;
    let mut worst = 0.0f64;
    for (name, cl) in [("heat b=2", &heat), ("coupled", &coupled)] {
        let skew = cl.oseen.entries() - cl.oseen.entries().adjoint();
        let advective = skew.norm() > 0.0 || cl.interior_b.is_some();
        ensure(advective, format!("{name}: no advection"))?;
        let r = adjoint_closed_loop_with(cl, 0.5).map_err(|e| format!("{name}: {e}"))?.residual;
        worst = worst.max(r);
    }
    Ok(format!("max relative residual {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let grid = feedstab_core::decay::logspace(1e-3, 1e3, 60);
    let scalar = imaginary_axis_sup(&CMat::from_element(1, 1, c(-1.0, 0.0)), &grid).unwrap();
    ensure(scalar < 1.0, format!("diag(-1) sup {scalar}"))?;
    let loops = [
        ("heat spectral", stabilized_heat(&heat64())),
        (
            "heat localized",
            synthesize_heat(&heat64(), FeedbackMode::Localized, Some(&[c(-2.0, 0.0)])).unwrap().closed_loop,
        ),
        ("heat b=2", stabilized_heat(&HeatConfig { advection_b: 2.0, ..heat64() })),
        ("coupled", stabilize_coupled(&CoupledConfig::default(), Some(&coupled_targets()), true).unwrap().closed_loop),
        ("abstract", abstract_loop()),
    ];
    let mut parts = vec![format!("diag(-1) {scalar:.4}")];
    for (name, cl) in &loops {
        let s = imaginary_axis_sup(cl.composed.entries(), &grid).map_err(|e| format!("{name}: {e}"))?;
        ensure(s.is_finite(), format!("{name}: sup {s}"))?;
        parts.push(format!("{name} {s:.3}"));
    }
    Ok(parts.join(", "))
}

fn criterion_7() -> Outcome {
    let grids = [16, 32, 64, 128];
    let rows = gamma_bound_scan(&grids, &[0.2, 0.75], &heat64()).unwrap();
    let growth = |g: f64| {
        let v: Vec<f64> = rows.iter().filter(|r| r.gamma == g).map(|r| r.norm).collect();
        v[v.len() - 1] / v[0]
    };
    let (low, high) = (growth(0.2), growth(0.75));
    ensure(low < 1.5, format!("gamma 0.2 growth {low}"))?;
    ensure(high > 4.0, format!("gamma 0.75 growth {high}"))?;
    Ok(format!("growth {low:.3} at gamma 0.2, {high:.2} at gamma 0.75"))
}

fn criterion_8() -> Outcome {
    let base = HeatConfig { advection_b: 5.0, ..heat64() };
    let values: Vec<f64> =
        [16, 32, 64, 128].iter().map(|&n| advection_relative_bound(&base.with_n(n)).unwrap()).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    let growth = max / values[0];
    ensure(growth < 1.3, format!("growth {growth}: {values:?}"))?;
    Ok(format!("bounds {values:.3?}, growth {growth:.3}"))
}

fn criterion_9() -> Outcome {
    let cfg = CoupledConfig::default();
    let opts = VerifyOptions::default();
    let s = stabilize_coupled(&cfg, Some(&coupled_targets()), true).unwrap();
    ensure(s.spectral.unstable_count == 2, format!("N = {}", s.spectral.unstable_count))?;
    let next = s.spectral.first_stable().unwrap().re;
    let gamma1 = s.closed_loop.abscissa().unwrap();
    ensure(next < gamma1 && gamma1 < 0.0, format!("gamma_1 {gamma1} vs Re lambda_(N+1) {next}"))?;
    let reassembly = reassembly_residual(&s.closed_loop);
    ensure(reassembly <= 1e-12, format!("reassembly {reassembly:e}"))?;
    let r = verify_coupled_stabilization(&s.closed_loop, &s.spectral, s.rank.as_ref(), &opts).unwrap();
    ensure(r.passed(), format!("with J failing: {:?}", r.failing()))?;

    let z = stabilize_coupled(&cfg, None, false).unwrap();
    let rank = z.rank.clone().unwrap();
    let zero_margin = rank.margins.iter().copied().fold(f64::INFINITY, f64::min);
    let rz = verify_coupled_stabilization(&z.closed_loop, &z.spectral, z.rank.as_ref(), &opts).unwrap();
    ensure(!rz.passed(), "J = 0 verification passed")?;
    let hautus = rz.checks.iter().find(|c| c.name == "hautus").ok_or("no hautus row")?;
    ensure(!hautus.passed && zero_margin < 1e-10, format!("J = 0 margin {zero_margin:e}"))?;
    Ok(format!(
        "gamma_1 {gamma1:.6} in ({next:.3}, 0), reassembly {reassembly:.1e}; J=0: FAIL, margin {zero_margin:.1e}"
    ))
}

fn criterion_10() -> Outcome {
    let cfg = heat64();
    let loops = [
        ("heat stabilized", stabilized_heat(&cfg)),
        ("heat open", open_heat(&cfg)),
        ("coupled", stabilize_coupled(&CoupledConfig::default(), Some(&coupled_targets()), true).unwrap().closed_loop),
        ("abstract", abstract_loop()),
    ];
    let t = [10.0, 20.0, 40.0];
    let spec = ForcingSpec::default();
    let opts = QuadratureOptions::default();
    let mut parts = Vec::new();
    for (name, cl) in &loops {
        let mut verdicts = Vec::new();
        for p in [1.5, 2.0, 4.0] {
            let d = duality_scan(cl.composed.entries(), p, &t, &spec, &opts).unwrap();
            ensure(
                d.verdicts_agree() && d.primal.verdict != Verdict::Inconclusive,
                format!("{name} p={p}: {} vs {}", d.primal.verdict, d.dual.verdict),
            )?;
            verdicts.push(d.primal.verdict.to_string());
        }
        verdicts.dedup();
        parts.push(format!("{name} {}", verdicts.join("/")));
    }
    Ok(parts.join(", "))
}

fn run_verify(config: &Path, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_feedstab"))
        .args(["verify", "--seed", "11", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("verify.toml");
    std::fs::write(&config, "model = \"heat\"\n[heat]\nn = 32\nadvection_b = 1.0\n[synthesis]\ntargets = [-2.0]\n")
        .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let codes = (run_verify(&config, &a), run_verify(&config, &b));
    ensure(codes == (0, 0), format!("exit codes {codes:?}"))?;
    let mut compared = 0;
    for name in ["verify.csv", "maxreg.csv", "manifest.toml"] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        ensure(x == y, format!("{name} differs"))?;
        compared += x.len();
    }
    Ok(format!("verify.csv, maxreg.csv, manifest.toml identical ({compared} bytes)"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 unstable spectrum", criterion_1),
        ("2 stabilization", criterion_2),
        ("3 maximal-regularity plateau", criterion_3),
        ("4 resolvent perturbation identity", criterion_4),
        ("5 adjoint decomposition", criterion_5),
        ("6 imaginary-axis family", criterion_6),
        ("7 Green-map exponent", criterion_7),
        ("8 advection relative bound", criterion_8),
        ("9 coupled stabilization", criterion_9),
        ("10 duality", criterion_10),
        ("11 determinism", criterion_11),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                println!("FAIL criterion {name}: {why}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
