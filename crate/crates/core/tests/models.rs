use std::f64::consts::PI;

use feedstab_core::closed_loop::adjoint_closed_loop_with;
use feedstab_core::coupled::{reassembly_residual, stabilize_coupled, CoupledConfig};
use feedstab_core::heat::{
    analytic_eigenvalues, build_dirichlet_map, build_heat_operator, synthesize_heat, HeatConfig,
};
use feedstab_core::spectrum::{eigenvalues, spectrum, DEFAULT_TOL_UNSTABLE};
use feedstab_core::{resolvent_perturbation_residual, FeedbackMode, C64};

/// Eigenvalues of the tridiagonal stencil (lo, d, up): d + 2 sqrt(lo up) cos(k pi / (n+1)).
fn tridiagonal_oracle(n: usize, c2: f64, b: f64) -> Vec<f64> {
    let h = 1.0 / (n as f64 + 1.0);
    let lo = 1.0 / (h * h) + b / (2.0 * h);
    let up = 1.0 / (h * h) - b / (2.0 * h);
    (1..=n).map(|k| c2 - 2.0 / (h * h) + 2.0 * (lo * up).sqrt() * (k as f64 * PI * h).cos()).collect()
}

#[test]
fn heat_spectrum_matches_stencil_oracle() {
    for b in [0.0, 2.0, -3.0] {
        let cfg = HeatConfig { n: 40, c2: 16.0, advection_b: b, ..HeatConfig::default() };
        let mut ev: Vec<f64> = eigenvalues(build_heat_operator(&cfg).unwrap().entries())
            .unwrap()
            .iter()
            .map(|z| {
                assert!(z.im.abs() < 1e-8);
                z.re
            })
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        let mut oracle = tridiagonal_oracle(cfg.n, cfg.c2, b);
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (x, y) in ev.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-8 * y.abs().max(1.0), "{x} vs {y}");
        }
        let mut analytic: Vec<f64> = analytic_eigenvalues(&cfg).iter().map(|z| z.re).collect();
        analytic.sort_by(|a, b| b.total_cmp(a));
        for (x, y) in analytic.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-9 * y.abs().max(1.0));
        }
    }
}

#[test]
fn heat_leading_eigenvalue_approaches_continuum() {
    let cfg = HeatConfig { n: 128, c2: 16.0, ..HeatConfig::default() };
    let sd = spectrum(&build_heat_operator(&cfg).unwrap(), DEFAULT_TOL_UNSTABLE).unwrap();
    assert_eq!(sd.unstable_count, 1);
    assert!((sd.eigenvalues[0].re - (16.0 - PI * PI)).abs() < 1e-3);
}

#[test]
fn dirichlet_map_approaches_continuum() {
    // phi'' + c^2 phi = 0, phi(0) = 1, phi(1) = 0
    let cfg = HeatConfig { n: 64, c2: 5.0, ..HeatConfig::default() };
    let cc = cfg.c2.sqrt();
    let d = build_dirichlet_map(&cfg).unwrap();
    for (i, x) in cfg.nodes().iter().enumerate() {
        let left = (cc * (1.0 - x)).sin() / cc.sin();
        let right = (cc * x).sin() / cc.sin();
        assert!((d.entries()[(i, 0)].re - left).abs() < 1e-3);
        assert!((d.entries()[(i, 1)].re - right).abs() < 1e-3);
    }
}

#[test]
fn heat_feedback_modes() {
    let cfg = HeatConfig { n: 32, ..HeatConfig::default() };
    let s = synthesize_heat(&cfg, FeedbackMode::Spectral, Some(&[C64::new(-2.0, 0.0)])).unwrap();
    let a = s.closed_loop.abscissa().unwrap();
    assert!((a + 2.0).abs() < 1e-6, "abscissa {a}");
    assert!(s.feedback().reassembly_residual() < 1e-12);
    // Localized functionals also see the stable modes, so the loop is
    // stabilized without exact placement.
    let s = synthesize_heat(&cfg, FeedbackMode::Localized, Some(&[C64::new(-2.0, 0.0)])).unwrap();
    assert!(s.closed_loop.abscissa().unwrap() < 0.0);
    assert!(s.feedback().reassembly_residual() < 1e-12);
    let mask = s.feedback().omega_mask.clone().unwrap();
    for w in &s.feedback().functionals {
        assert!(w.iter().zip(&mask).all(|(z, &m)| m || z.norm() == 0.0));
    }
}

#[test]
fn resolvent_identity_and_adjoint_on_both_models() {
    let heat =
        synthesize_heat(&HeatConfig { n: 24, advection_b: 2.0, ..HeatConfig::default() }, FeedbackMode::Spectral, None)
            .unwrap()
            .closed_loop;
    let coupled = stabilize_coupled(&CoupledConfig::default(), Some(&[C64::new(-2.0, 0.0), C64::new(-3.0, 0.0)]), true)
        .unwrap()
        .closed_loop;
    for cl in [&heat, &coupled] {
        for lam in [C64::new(1.0, 1.0), C64::new(3.0, -10.0), C64::new(0.5, 40.0)] {
            let r = resolvent_perturbation_residual(cl, lam).unwrap();
            assert!(r <= 1e-8, "resolvent identity residual {r} at {lam}");
        }
        let adj = adjoint_closed_loop_with(cl, 0.5).unwrap();
        assert!(adj.residual <= 1e-8, "adjoint residual {}", adj.residual);
    }
}

#[test]
fn coupled_interior_control_is_needed_for_fluid_mode() {
    let cfg = CoupledConfig::default();
    let with_j = stabilize_coupled(&cfg, Some(&[C64::new(-2.0, 0.0), C64::new(-3.0, 0.0)]), true).unwrap();
    assert_eq!(with_j.spectral.unstable_count, 2);
    assert!(with_j.placed);
    assert!(reassembly_residual(&with_j.closed_loop) <= 1e-12);
    let a = with_j.closed_loop.abscissa().unwrap();
    assert!((a + 2.0).abs() < 1e-6);

    let without = stabilize_coupled(&cfg, None, false).unwrap();
    let rank = without.rank.unwrap();
    assert!(!without.placed && !rank.passed());
    assert_eq!(rank.failing(), vec![1]);
    assert!(rank.margins[0] < 1e-10);
}
