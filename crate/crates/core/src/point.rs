use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `(x, y)` of the slit tangent bundle in a fixed chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidPoint(format!(
                "x has {} components, y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InvalidPoint(format!("dimension {} < 2", x.len())));
        }
        if x.iter().chain(&y).any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinate".into()));
        }
        if y.iter().all(|&c| c == 0.0) {
            return Err(Error::SlitViolation);
        }
        Ok(PhasePoint { x, y })
    }

    /// Splits a coordinate vector `(x, y)` of length 2m.
    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        let m = coords.len() / 2;
        PhasePoint::new(coords[..m].to_vec(), coords[m..].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn coords(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn x_norm(&self) -> f64 {
        self.x.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Same base point with the fiber coordinate scaled by `lambda`.
    pub fn scale_y(&self, lambda: f64) -> Result<Self> {
        PhasePoint::new(self.x.clone(), self.y.iter().map(|c| c * lambda).collect())
    }

    /// `p + t·v` for a coordinate displacement `v` of length 2m.
    pub fn displaced(&self, v: &[f64], t: f64) -> Result<Self> {
        let m = self.dim();
        PhasePoint::new(
            (0..m).map(|i| self.x[i] + t * v[i]).collect(),
            (0..m).map(|i| self.y[i] + t * v[m + i]).collect(),
        )
    }
}
