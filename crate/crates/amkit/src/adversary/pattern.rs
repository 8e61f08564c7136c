use crate::error::{Error, Result};

/// Per-sample observation pattern: `bits[j]` is true when variable j is
/// observed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationPattern {
    bits: Vec<bool>,
}

impl ObservationPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        ObservationPattern { bits }
    }

    pub fn all_observed(d: usize) -> Self {
        ObservationPattern {
            bits: vec![true; d],
        }
    }

    /// Pattern observing everything outside `v` and the subset of `v`
    /// encoded by `k` (LSB of `k` = lowest index in `v`).
    pub fn from_v_index(d: usize, v: &[usize], k: usize) -> Self {
        let mut bits = vec![true; d];
        for (i, &col) in v.iter().enumerate() {
            bits[col] = (k >> i) & 1 == 1;
        }
        ObservationPattern { bits }
    }

    /// Inverse of [`from_v_index`] for patterns fully observed outside `v`.
    pub fn v_index(&self, v: &[usize]) -> usize {
        let mut k = 0usize;
        for (i, &col) in v.iter().enumerate() {
            if self.bits[col] {
                k |= 1 << i;
            }
        }
        k
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn is_observed(&self, j: usize) -> bool {
        self.bits[j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.bits[j]).collect()
    }

    pub fn masked_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.bits[j]).collect()
    }

    pub fn masked_count(&self) -> usize {
        self.bits.iter().filter(|&&b| !b).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn is_fully_masked(&self) -> bool {
        self.bits.iter().all(|&b| !b)
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::Dimension(format!(
                "pattern has {} bits, expected {d}",
                self.dim()
            )));
        }
        Ok(())
    }
}
