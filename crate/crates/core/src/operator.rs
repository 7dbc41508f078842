//! Dense operators on the discretized state space and boundary-to-state maps.

use crate::linalg::{all_finite, CMat};
use crate::{Error, Result};

/// Spatial metadata carried along with a discretized operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeta {
    /// Mesh width.
    pub h: f64,
    pub domain: String,
}

/// Square complex matrix standing in for a generator on the state space.
#[derive(Debug, Clone)]
pub struct Operator {
    entries: CMat,
    pub label: String,
    pub grid: Option<GridMeta>,
}

impl Operator {
    pub fn new(entries: CMat, label: impl Into<String>) -> Result<Self> {
        let (rows, cols) = entries.shape();
        if rows != cols || rows == 0 {
            return Err(Error::NotSquare { rows, cols });
        }
        let label = label.into();
        if !all_finite(&entries) {
            return Err(Error::NonFinite(format!("operator '{label}'")));
        }
        Ok(Operator { entries, label, grid: None })
    }

    pub fn with_grid(mut self, grid: GridMeta) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn zeros(n: usize, label: impl Into<String>) -> Self {
        Operator { entries: CMat::zeros(n, n), label: label.into(), grid: None }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    pub fn adjoint(&self) -> Operator {
        Operator { entries: self.entries.adjoint(), label: format!("{}*", self.label), grid: self.grid.clone() }
    }

    pub fn is_real(&self) -> bool {
        crate::linalg::is_real(&self.entries, 1e-14)
    }
}

/// Boundary-to-state lifting (Green or Dirichlet map) with its
/// fractional-power exponent.
#[derive(Debug, Clone)]
pub struct GreenMap {
    entries: CMat,
    pub gamma: f64,
    pub input_labels: Vec<String>,
}

impl GreenMap {
    pub fn new(entries: CMat, gamma: f64, input_labels: Vec<String>) -> Result<Self> {
        let (n, m) = entries.shape();
        if n == 0 || m == 0 {
            return Err(Error::mismatch("green map", "n >= 1 and m >= 1", format!("{n}x{m}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Domain(format!("green map exponent {gamma} not in (0,1)")));
        }
        if !all_finite(&entries) {
            return Err(Error::NonFinite("green map".into()));
        }
        if input_labels.len() != m {
            return Err(Error::mismatch("green map labels", m, input_labels.len()));
        }
        Ok(GreenMap { entries, gamma, input_labels })
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn state_dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.entries.ncols()
    }
}
