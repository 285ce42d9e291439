//! BRAM rail power as a single power law in the supply voltage.
//!
//! `P(v) = p_nom * (v / v_nom)^alpha`. The exponent is calibrated so that the
//! saving at a chosen crash voltage hits a target; the model is calibrated,
//! not predictive, and only power ratios are meaningful.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("voltage {v_mv} mV outside (0, {v_nom_mv}] mV")]
    OutOfRange { v_mv: u32, v_nom_mv: u32 },
    #[error("cannot calibrate: {0}")]
    Degenerate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub p_nom_w: f64,
    pub alpha: f64,
    pub v_nom_mv: u32,
}

impl PowerModel {
    pub fn new(p_nom_w: f64, alpha: f64, v_nom_mv: u32) -> Self {
        Self {
            p_nom_w,
            alpha,
            v_nom_mv,
        }
    }

    /// Model whose saving at `v_crash_mv` equals `target_saving`.
    pub fn calibrated(p_nom_w: f64, v_nom_mv: u32, v_crash_mv: u32, target_saving: f64) -> Result<Self, PowerError> {
        let alpha = calibrate_alpha(v_crash_mv, v_nom_mv, target_saving)?;
        Ok(Self::new(p_nom_w, alpha, v_nom_mv))
    }

    fn check(&self, v_mv: u32) -> Result<(), PowerError> {
        if v_mv == 0 || v_mv > self.v_nom_mv {
            Err(PowerError::OutOfRange {
                v_mv,
                v_nom_mv: self.v_nom_mv,
            })
        } else {
            Ok(())
        }
    }

    /// Rail power in watts.
    pub fn power(&self, v_mv: u32) -> Result<f64, PowerError> {
        self.check(v_mv)?;
        Ok(self.p_nom_w * self.relative(v_mv))
    }

    /// Fractional saving `1 - P(v)/p_nom`.
    pub fn saving(&self, v_mv: u32) -> Result<f64, PowerError> {
        self.check(v_mv)?;
        Ok(1.0 - self.relative(v_mv))
    }

    fn relative(&self, v_mv: u32) -> f64 {
        (v_mv as f64 / self.v_nom_mv as f64).powf(self.alpha)
    }
}

/// `alpha = ln(1 - target) / ln(v_crash / v_nom)`.
pub fn calibrate_alpha(v_crash_mv: u32, v_nom_mv: u32, target_saving: f64) -> Result<f64, PowerError> {
    if !(target_saving > 0.0 && target_saving < 1.0) {
        return Err(PowerError::Degenerate(format!("target saving {target_saving} not in (0, 1)")));
    }
    if v_crash_mv == 0 || v_crash_mv >= v_nom_mv {
        return Err(PowerError::Degenerate(format!(
            "crash voltage {v_crash_mv} mV must lie in (0, {v_nom_mv}) mV"
        )));
    }
    Ok((1.0 - target_saving).ln() / (v_crash_mv as f64 / v_nom_mv as f64).ln())
}
