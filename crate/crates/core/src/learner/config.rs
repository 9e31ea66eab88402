use super::kmeans::{KMeansInit, KMeansOptions};
use crate::calibration::DEFAULT_DAMP;
use crate::{Error, Result};

/// Sketching hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SketchConfig {
    /// Index width; `k = 2^bits` centers per group. One of 2, 3, 4.
    pub bits: u8,
    /// Groups per row. Must divide the column count.
    pub gpr: usize,
    /// Columns per compensation block.
    pub block_b: usize,
    /// Exponent `s` in the k-means weights `(1/H⁻¹ᵢᵢ)^s`.
    pub exponent_s: f64,
    pub damp: f64,
    pub kmeans_iters: usize,
    pub kmeans_tol: f64,
    pub kmeans_init: KMeansInit,
    pub seed: u64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        Self {
            bits: 4,
            gpr: 1,
            block_b: 128,
            exponent_s: 3.0,
            damp: DEFAULT_DAMP,
            kmeans_iters: 100,
            kmeans_tol: 1e-8,
            kmeans_init: KMeansInit::Optimal,
            seed: 0,
        }
    }
}

impl SketchConfig {
    pub fn k(&self) -> usize {
        1 << self.bits
    }

    pub fn kmeans_options(&self) -> KMeansOptions {
        KMeansOptions {
            max_iters: self.kmeans_iters,
            tol: self.kmeans_tol,
            init: self.kmeans_init,
        }
    }

    /// Checks that do not depend on the target matrix.
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.bits) {
            return Err(Error::Unsupported {
                what: "index width (bits)",
                value: self.bits as u64,
            });
        }
        if self.gpr == 0 {
            return Err(Error::invalid("gpr must be >= 1"));
        }
        if self.block_b == 0 {
            return Err(Error::invalid("block size must be >= 1"));
        }
        if !self.exponent_s.is_finite() {
            return Err(Error::NonFinite("outlier exponent"));
        }
        if !(self.damp >= 0.0) || !self.damp.is_finite() {
            return Err(Error::invalid(format!(
                "dampening must be finite and >= 0, got {}",
                self.damp
            )));
        }
        Ok(())
    }

    /// Full validation against a row of `cols` columns.
    pub fn validate_for(&self, cols: usize) -> Result<()> {
        self.validate()?;
        if cols == 0 || !cols.is_multiple_of(self.gpr) {
            return Err(Error::invalid(format!(
                "gpr {} does not divide {} columns",
                self.gpr, cols
            )));
        }
        let group_len = cols / self.gpr;
        if self.k() > group_len {
            return Err(Error::invalid(format!(
                "k = {} exceeds the group length {}",
                self.k(),
                group_len
            )));
        }
        Ok(())
    }
}
