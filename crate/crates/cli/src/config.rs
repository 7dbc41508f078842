//! Experiment configuration: flat TOML sections, one per concern.
//!
//! ```toml
//! model = "heat"          # heat | coupled | abstract
//! seed = 0
//!
//! [heat]
//! n = 64
//! c2 = 16.0
//!
//! [synthesis]
//! mode = "spectral"
//! targets = [-2.0]
//!
//! [maxreg]
//! p_grid = [1.5, 2.0, 4.0]
//! t_grid = [10.0, 20.0, 40.0]
//! ```

use std::path::{Path, PathBuf};

use feedstab_core::coupled::CoupledConfig;
use feedstab_core::heat::HeatConfig;
use feedstab_core::matfmt::parse_entry;
use feedstab_core::{FeedbackMode, C64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Heat,
    Coupled,
    Abstract,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub heat: HeatSection,
    #[serde(default)]
    pub coupled: CoupledSection,
    #[serde(rename = "abstract")]
    pub abstract_model: Option<AbstractSection>,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub maxreg: MaxregSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub dirichlet: DirichletSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatSection {
    pub n: usize,
    pub c2: f64,
    pub advection_b: f64,
    pub omega: [f64; 2],
    pub q: f64,
    pub epsilon: f64,
}

impl Default for HeatSection {
    fn default() -> Self {
        let d = HeatConfig::default();
        HeatSection {
            n: d.n,
            c2: d.c2,
            advection_b: d.advection_b,
            omega: [d.omega.0, d.omega.1],
            q: d.q,
            epsilon: d.epsilon,
        }
    }
}

/// Either one value for every node or a full nodal profile.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Profile {
    Constant(f64),
    Nodal(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupledSection {
    pub n: usize,
    pub nu: f64,
    pub kappa: f64,
    pub gamma_buoy: f64,
    pub theta_e: Profile,
    pub ye_advect: f64,
    pub c2_f: f64,
    pub c2_h: f64,
    pub omega: [f64; 2],
    pub q: f64,
    pub epsilon: f64,
}

impl Default for CoupledSection {
    fn default() -> Self {
        let d = CoupledConfig::default();
        CoupledSection {
            n: d.n,
            nu: d.nu,
            kappa: d.kappa,
            gamma_buoy: d.gamma_buoy,
            theta_e: Profile::Constant(d.theta_e_profile[0]),
            ye_advect: d.ye_advect,
            c2_f: d.c2_f,
            c2_h: d.c2_h,
            omega: [d.omega.0, d.omega.1],
            q: d.q,
            epsilon: d.epsilon,
        }
    }
}

/// Matrices given as files in the plain-text matrix format, relative to
/// the configuration file.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractSection {
    pub oseen: PathBuf,
    pub green: PathBuf,
    pub gamma: f64,
    pub interior_b: Option<PathBuf>,
    /// Fixed feedback; when absent the feedback is synthesized.
    pub feedback: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Target {
    Real(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSection {
    /// False runs every stage on the open loop (`F = 0`).
    pub enabled: bool,
    pub mode: String,
    pub targets: Option<Vec<Target>>,
    /// Coupled model: offer the interior control on omega.
    pub interior: bool,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        SynthesisSection { enabled: true, mode: "spectral".into(), targets: None, interior: true }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxregSection {
    pub p_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub forcings: usize,
    pub cell_width: f64,
    pub single_modes: bool,
    pub imag_points: usize,
    pub resolvent_points: usize,
    pub duality: bool,
}

impl Default for MaxregSection {
    fn default() -> Self {
        let spec = feedstab_core::maxreg::ForcingSpec::default();
        MaxregSection {
            p_grid: vec![1.5, 2.0, 4.0],
            t_grid: vec![10.0, 20.0, 40.0],
            forcings: spec.random_count,
            cell_width: spec.cell_width,
            single_modes: spec.single_modes,
            imag_points: 60,
            resolvent_points: 20,
            duality: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub horizon: f64,
    pub samples: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { horizon: 10.0, samples: 41 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirichletSection {
    pub grids: Vec<usize>,
    pub gammas: Vec<f64>,
}

impl Default for DirichletSection {
    fn default() -> Self {
        DirichletSection { grids: vec![16, 32, 64, 128], gammas: vec![0.2, 0.75] }
    }
}

/// Parsed configuration plus the text it came from, for error locations
/// and the run manifest.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub base_dir: PathBuf,
}

/// One-based line of `key = ...` inside `[section]` (top level when
/// `section` is empty).
pub fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl LoadedConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            msg: e.message().to_string(),
        })?;
        let loaded = LoadedConfig { config, text: text.to_string(), base_dir: base_dir.to_path_buf() };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config { line: None, msg: format!("cannot read {}: {e}", path.display()) })?;
        let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Self::parse(&text, &base)
    }

    pub fn error_at(&self, section: &str, key: &str, msg: impl Into<String>) -> CliError {
        CliError::Config { line: key_line(&self.text, section, key), msg: msg.into() }
    }

    /// Locates a model validation error by the parameter it names first,
    /// falling back to the section header.
    fn section_error(&self, section: &str, err: feedstab_core::Error) -> CliError {
        let msg = match &err {
            feedstab_core::Error::Config(m) => m.clone(),
            other => other.to_string(),
        };
        let word = msg.split_whitespace().next().unwrap_or("");
        let key = if word == "c" { "c2" } else { word };
        let header = format!("[{section}]");
        let line = key_line(&self.text, section, key)
            .or_else(|| self.text.lines().position(|l| l.trim() == header).map(|i| i + 1));
        CliError::Config { line, msg }
    }

    fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        let m = &c.maxreg;
        if m.p_grid.iter().any(|&p| !(p > 1.0 && p.is_finite())) {
            return Err(self.error_at("maxreg", "p_grid", "every p must lie in (1, inf)"));
        }
        if m.t_grid.len() < 2 || m.t_grid.windows(2).any(|w| !(w[1] > w[0])) || m.t_grid[0] <= 0.0 {
            return Err(self.error_at("maxreg", "t_grid", "t_grid needs at least two increasing positive horizons"));
        }
        if m.forcings == 0 && !m.single_modes {
            return Err(self.error_at("maxreg", "forcings", "forcing set would be empty"));
        }
        if !(m.cell_width > 0.0) {
            return Err(self.error_at("maxreg", "cell_width", "cell_width must be positive"));
        }
        if !(c.simulate.horizon > 0.0) || c.simulate.samples < 2 {
            return Err(self.error_at(
                "simulate",
                "horizon",
                "simulate needs a positive horizon and at least 2 samples",
            ));
        }
        self.mode()?;
        self.targets()?;
        match c.model {
            ModelKind::Heat => {
                self.heat()?.validate().map_err(|e| self.section_error("heat", e))?;
            }
            ModelKind::Coupled => {
                self.coupled()?.validate().map_err(|e| self.section_error("coupled", e))?;
            }
            ModelKind::Abstract => {
                let a = c.abstract_model.as_ref().ok_or_else(|| CliError::Config {
                    line: key_line(&self.text, "", "model"),
                    msg: "model = \"abstract\" requires an [abstract] section".into(),
                })?;
                let files = [
                    ("oseen", Some(&a.oseen)),
                    ("green", Some(&a.green)),
                    ("interior_b", a.interior_b.as_ref()),
                    ("feedback", a.feedback.as_ref()),
                ];
                for (key, path) in files {
                    if let Some(p) = path {
                        if !self.resolve(p).is_file() {
                            return Err(self.error_at("abstract", key, format!("file {} does not exist", p.display())));
                        }
                    }
                }
                if !(a.gamma > 0.0 && a.gamma < 1.0) {
                    return Err(self.error_at("abstract", "gamma", "gamma must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn mode(&self) -> Result<FeedbackMode, CliError> {
        self.config
            .synthesis
            .mode
            .parse()
            .map_err(|e: feedstab_core::Error| self.error_at("synthesis", "mode", e.to_string()))
    }

    pub fn targets(&self) -> Result<Option<Vec<C64>>, CliError> {
        let Some(list) = &self.config.synthesis.targets else {
            return Ok(None);
        };
        let bad = |msg: String| self.error_at("synthesis", "targets", msg);
        let out = list
            .iter()
            .map(|t| match t {
                Target::Real(x) if x.is_finite() => Ok(C64::new(*x, 0.0)),
                Target::Real(x) => Err(bad(format!("target {x} is not finite"))),
                Target::Text(s) => parse_entry(s).map_err(bad),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(z) = out.iter().find(|z| z.re >= 0.0) {
            return Err(bad(format!("target {z} is not in the open left half-plane")));
        }
        Ok(Some(out))
    }

    pub fn heat(&self) -> Result<HeatConfig, CliError> {
        let h = &self.config.heat;
        Ok(HeatConfig {
            n: h.n,
            c2: h.c2,
            advection_b: h.advection_b,
            omega: (h.omega[0], h.omega[1]),
            q: h.q,
            epsilon: h.epsilon,
        })
    }

    pub fn coupled(&self) -> Result<CoupledConfig, CliError> {
        let s = &self.config.coupled;
        let theta = match &s.theta_e {
            Profile::Constant(v) => vec![*v; s.n],
            Profile::Nodal(v) if v.len() == s.n => v.clone(),
            Profile::Nodal(v) => {
                return Err(self.error_at(
                    "coupled",
                    "theta_e",
                    format!("theta_e has {} values for n = {}", v.len(), s.n),
                ))
            }
        };
        Ok(CoupledConfig {
            n: s.n,
            nu: s.nu,
            kappa: s.kappa,
            gamma_buoy: s.gamma_buoy,
            theta_e_profile: theta,
            ye_advect: s.ye_advect,
            c2_f: s.c2_f,
            c2_h: s.c2_h,
            omega: (s.omega[0], s.omega[1]),
            q: s.q,
            epsilon: s.epsilon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LoadedConfig, CliError> {
        LoadedConfig::parse(text, Path::new("."))
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let c = parse("model = \"heat\"\n").unwrap();
        assert_eq!(c.heat().unwrap(), HeatConfig::default());
        assert_eq!(c.config.maxreg.t_grid, vec![10.0, 20.0, 40.0]);
        assert!(c.targets().unwrap().is_none());
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse("model = \"heat\"\n[heat]\nn = 64\nc2 = = 3\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(4), .. }), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse("model = \"heat\"\n\n[heat]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(4), .. }), "{err}");
    }

    #[test]
    fn semantic_error_points_at_key() {
        let err = parse("model = \"heat\"\n[heat]\nc2 = 9.8696044\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(3), .. }), "{err}");
        let err = parse("model = \"coupled\"\n[coupled]\nn = 16\nnu = -1.0\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(4), .. }), "{err}");
        let err = parse("model = \"heat\"\n[synthesis]\nmode = \"sideways\"\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(3), .. }), "{err}");
        let err = parse("model = \"heat\"\n[synthesis]\ntargets = [\"-1+2i\", 0.5]\n").unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(3), .. }), "{err}");
    }

    #[test]
    fn complex_targets_parse() {
        let c = parse("model = \"heat\"\n[synthesis]\ntargets = [\"-1+2i\", \"-1-2i\", -3]\n").unwrap();
        let t = c.targets().unwrap().unwrap();
        assert_eq!(t, vec![C64::new(-1.0, 2.0), C64::new(-1.0, -2.0), C64::new(-3.0, 0.0)]);
    }

    #[test]
    fn abstract_requires_existing_files() {
        let err = parse("model = \"abstract\"\n[abstract]\noseen = \"nope.txt\"\ngreen = \"nope.txt\"\ngamma = 0.3\n")
            .unwrap_err();
        assert!(matches!(err, CliError::Config { line: Some(3), .. }), "{err}");
    }
}
