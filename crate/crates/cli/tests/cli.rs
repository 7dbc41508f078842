use std::path::{Path, PathBuf};
use std::process::Command;

use feedstab_core::matfmt;

const BIN: &str = env!("CARGO_BIN_EXE_feedstab");

struct Run {
    code: i32,
    stderr: String,
    out: PathBuf,
}

fn feedstab(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = dir.join(format!("{cmd}.toml"));
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{cmd}"));
    let o = Command::new(BIN).arg(cmd).arg("--config").arg(&cfg).arg("--out").arg(&out).args(extra).output().unwrap();
    Run { code: o.status.code().unwrap(), stderr: String::from_utf8_lossy(&o.stderr).into_owned(), out }
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn unstable_rows(csv: &str) -> usize {
    csv.lines().skip(1).filter(|l| l.ends_with(",true")).count()
}

#[test]
fn spectrum_counts_unstable_modes() {
    let dir = tempfile::tempdir().unwrap();
    let r = feedstab(dir.path(), "spectrum", "model = \"heat\"\n[heat]\nc2 = 16.0\n", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = read(&r.out.join("spectrum.csv"));
    assert!(csv.starts_with("k,re_lambda,im_lambda,unstable\n"));
    assert_eq!(unstable_rows(&csv), 1);
    assert!(r.out.join("manifest.toml").is_file());

    let r = feedstab(dir.path(), "spectrum", "model = \"heat\"\n[heat]\nc2 = 4.0\n", &[]);
    assert_eq!(r.code, 0);
    assert_eq!(unstable_rows(&read(&r.out.join("spectrum.csv"))), 0);
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let r = feedstab(dir.path(), "spectrum", "model = \"heat\"\n\n[heat]\nn = 64\nc2 = 1.0.0\nq = 2.0\n", &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 5"), "{}", r.stderr);
    let r = feedstab(dir.path(), "spectrum", "model = \"heat\"\n[heat]\nwidth = 3\n", &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 3"), "{}", r.stderr);
}

#[test]
fn missing_config_exits_2() {
    let o = Command::new(BIN).args(["spectrum", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synthesize_heat_places_pole() {
    let dir = tempfile::tempdir().unwrap();
    let r =
        feedstab(dir.path(), "synthesize", "model = \"heat\"\n[heat]\nn = 48\n[synthesis]\ntargets = [-2.0]\n", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = read(&r.out.join("feedback.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,mode,target,achieved"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "spectral");
    let achieved = matfmt::parse_entry(row[3]).unwrap();
    assert!((achieved.re + 2.0).abs() < 1e-6 && achieved.im.abs() < 1e-6);
    let f = matfmt::from_str(&read(&r.out.join("feedback.txt"))).unwrap();
    assert_eq!(f.shape(), (2, 48));
}

#[test]
fn empty_observation_region_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let r = feedstab(
        dir.path(),
        "synthesize",
        "model = \"heat\"\n[heat]\nn = 64\nomega = [0.201, 0.21]\n[synthesis]\nmode = \"localized\"\n",
        &[],
    );
    assert_eq!(r.code, 4, "{}", r.stderr);
}

#[test]
fn coupled_synthesis_places_two_poles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "model = \"coupled\"\n[coupled]\nn = 24\n[synthesis]\ntargets = [-2.0, -3.0]\n";
    let r = feedstab(dir.path(), "synthesize", cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = read(&r.out.join("feedback.csv"));
    assert_eq!(csv.lines().count(), 3);
    for line in csv.lines().skip(1) {
        let row: Vec<&str> = line.split(',').collect();
        let t = matfmt::parse_entry(row[2]).unwrap();
        let a = matfmt::parse_entry(row[3]).unwrap();
        assert!((t - a).norm() < 1e-6);
    }
    assert!(r.out.join("interior_feedback.txt").is_file());

    let r = feedstab(dir.path(), "synthesize", &format!("{cfg}interior = false\n"), &[]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("FAIL"), "{}", r.stderr);
    let rank = read(&r.out.join("rank.csv"));
    assert!(rank.lines().nth(1).unwrap().ends_with(",FAIL"));
}

fn write_abstract(dir: &Path) -> String {
    std::fs::write(dir.join("oseen.txt"), "2 2\n1 0.5\n0 -2\n").unwrap();
    std::fs::write(dir.join("green.txt"), "2 1\n1\n0.5\n").unwrap();
    std::fs::write(dir.join("b.txt"), "2 2\n0 0.1\n-0.1 0\n").unwrap();
    "model = \"abstract\"\n[abstract]\noseen = \"oseen.txt\"\ngreen = \"green.txt\"\ngamma = 0.3\ninterior_b = \"b.txt\"\n\
     [maxreg]\np_grid = [2.0]\nforcings = 8\n"
        .to_string()
}

#[test]
fn abstract_hand_matrices_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_abstract(dir.path());
    let r = feedstab(dir.path(), "verify", &cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = read(&r.out.join("verify.csv"));
    for name in ["composition", "resolvent_identity", "adjoint_decomposition"] {
        let row = csv.lines().find(|l| l.starts_with(name)).unwrap();
        assert!(row.contains(",PASS,"), "{row}");
    }
}

#[test]
fn open_loop_verify_fails_with_growth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        "model = \"heat\"\n[heat]\nn = 24\n[synthesis]\nenabled = false\n[maxreg]\np_grid = [2.0]\nforcings = 4\n";
    let r = feedstab(dir.path(), "verify", cfg, &[]);
    assert_eq!(r.code, 1);
    let csv = read(&r.out.join("maxreg.csv"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",growth")), "{csv}");
}

#[test]
fn simulate_dirichlet_and_report_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "model = \"heat\"\n[heat]\nn = 24\n[maxreg]\np_grid = [2.0]\nforcings = 4\n[dirichlet]\ngrids = [16, 32]\ngammas = [0.2]\n";
    let r = feedstab(dir.path(), "simulate", cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(read(&r.out.join("simulate.csv")).starts_with("t,semigroup_norm\n"));
    let r = feedstab(dir.path(), "dirichlet-map", cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(matfmt::from_str(&read(&r.out.join("dirichlet_map.txt"))).unwrap().shape(), (24, 2));
    assert_eq!(read(&r.out.join("gamma_scan.csv")).lines().count(), 3);
    let r = feedstab(dir.path(), "maxreg", cfg, &["--parallel", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(read(&r.out.join("maxreg.csv")).starts_with("model,mode,p,T,C_estimate,imag_sup,verdict\n"));
    let r = feedstab(dir.path(), "report", cfg, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let summary = read(&r.out.join("summary.txt"));
    assert!(summary.contains("verification: PASS"), "{summary}");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "model = \"heat\"\nseed = 1\n[heat]\nn = 16\n";
    let r = feedstab(dir.path(), "spectrum", cfg, &["--seed", "99"]);
    assert_eq!(r.code, 0);
    assert!(read(&r.out.join("manifest.toml")).contains("seed = 99"));
}
