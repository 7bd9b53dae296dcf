//! The assembled per-study data handed to every model.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{BoatError, Result};

/// Min/max of a column before min-max scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub min: f64,
    pub max: f64,
}

impl ColumnScaling {
    pub const IDENTITY: ColumnScaling = ColumnScaling { min: 0.0, max: 1.0 };

    pub fn scale(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn unscale(&self, s: f64) -> f64 {
        self.min + s * (self.max - self.min)
    }
}

/// Covariates `x` (one row per unit), binary treatment, target and optional
/// role columns for one study.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub unit_ids: Vec<String>,
    pub covariate_names: Vec<String>,
    pub x: Array2<f64>,
    pub treatment: Vec<u8>,
    pub y: Vec<f64>,
    pub scaling: Vec<ColumnScaling>,
    /// Post-period indicator (0 = pre, 1 = post) for long-format panels.
    pub period: Option<Vec<f64>>,
    /// Running variable for discontinuity designs.
    pub assignment: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
}

impl DesignMatrix {
    /// Builds a design with identity scaling metadata.
    pub fn new(
        unit_ids: Vec<String>,
        covariate_names: Vec<String>,
        x: Array2<f64>,
        treatment: Vec<u8>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let n = unit_ids.len();
        if x.nrows() != n || treatment.len() != n || y.len() != n {
            return Err(BoatError::Contract(format!(
                "row counts disagree: ids {n}, x {}, treatment {}, y {}",
                x.nrows(),
                treatment.len(),
                y.len()
            )));
        }
        if x.ncols() != covariate_names.len() {
            return Err(BoatError::Contract(format!(
                "{} covariate names for {} columns",
                covariate_names.len(),
                x.ncols()
            )));
        }
        if let Some(bad) = treatment.iter().find(|&&t| t > 1) {
            return Err(BoatError::Contract(format!(
                "treatment must be 0/1, found {bad}"
            )));
        }
        let scaling = vec![ColumnScaling::IDENTITY; x.ncols()];
        Ok(DesignMatrix {
            unit_ids,
            covariate_names,
            x,
            treatment,
            y,
            scaling,
            period: None,
            assignment: None,
            z: None,
        })
    }

    /// Design without covariates.
    pub fn without_covariates(unit_ids: Vec<String>, treatment: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let n = unit_ids.len();
        Self::new(unit_ids, Vec::new(), Array2::zeros((n, 0)), treatment, y)
    }

    pub fn with_period(mut self, period: Vec<f64>) -> Result<Self> {
        self.check_len("period", period.len())?;
        self.period = Some(period);
        Ok(self)
    }

    pub fn with_assignment(mut self, assignment: Vec<f64>) -> Result<Self> {
        self.check_len("assignment", assignment.len())?;
        self.assignment = Some(assignment);
        Ok(self)
    }

    pub fn with_z(mut self, z: Vec<f64>) -> Result<Self> {
        self.check_len("z", z.len())?;
        self.z = Some(z);
        Ok(self)
    }

    pub fn with_scaling(mut self, scaling: Vec<ColumnScaling>) -> Result<Self> {
        if scaling.len() != self.x.ncols() {
            return Err(BoatError::Contract("scaling metadata length".into()));
        }
        self.scaling = scaling;
        Ok(self)
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(BoatError::Contract(format!(
                "{what} column has {len} rows, design has {}",
                self.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&t| t == 1).count()
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let pick = |v: &Vec<f64>| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        DesignMatrix {
            unit_ids: rows.iter().map(|&i| self.unit_ids[i].clone()).collect(),
            covariate_names: self.covariate_names.clone(),
            x: self.x.select(ndarray::Axis(0), rows),
            treatment: rows.iter().map(|&i| self.treatment[i]).collect(),
            y: pick(&self.y),
            scaling: self.scaling.clone(),
            period: self.period.as_ref().map(pick),
            assignment: self.assignment.as_ref().map(pick),
            z: self.z.as_ref().map(pick),
        }
    }

    /// Covariate matrix mapped back to raw units via the scaling metadata.
    pub fn unscaled_x(&self) -> Array2<f64> {
        let mut out = self.x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let s = self.scaling[j];
            col.mapv_inplace(|v| s.unscale(v));
        }
        out
    }
}
