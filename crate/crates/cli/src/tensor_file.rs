//! JSON tensor files: `{"shape": [...], "bitwidth": b, "signed": s, "data": [...]}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use packconv::packing::quant_range;

use crate::{to_json, CliError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFile {
    pub shape: Vec<usize>,
    pub bitwidth: u32,
    pub signed: bool,
    /// Row-major.
    pub data: Vec<i64>,
}

impl TensorFile {
    pub fn new(
        shape: Vec<usize>,
        bitwidth: u32,
        signed: bool,
        data: Vec<i64>,
    ) -> Result<Self, String> {
        let t = Self {
            shape,
            bitwidth,
            signed,
            data,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.shape.is_empty() || self.shape.contains(&0) {
            return Err(format!(
                "shape {:?} must be a nonempty list of positive integers",
                self.shape
            ));
        }
        if !(1..=63).contains(&self.bitwidth) {
            return Err(format!("bitwidth {} outside 1..=63", self.bitwidth));
        }
        let elems = self
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or("shape product overflows")?;
        if elems != self.data.len() {
            return Err(format!(
                "shape {:?} holds {elems} elements but data has {}",
                self.shape,
                self.data.len()
            ));
        }
        let (lo, hi) = quant_range(self.bitwidth, self.signed);
        if let Some(i) = self.data.iter().position(|v| !(lo..=hi).contains(v)) {
            return Err(format!("data[{i}] = {} outside [{lo}, {hi}]", self.data[i]));
        }
        Ok(())
    }

    /// Reads and validates a tensor. Every error names the file.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: cannot read: {e}", path.display())))?;
        let t: Self = serde_json::from_str(&text).map_err(|e| {
            CliError::usage(format!("{}: malformed tensor file: {e}", path.display()))
        })?;
        t.validate()
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Ok(t)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, to_json(self))
            .map_err(|e| CliError::failure(format!("{}: cannot write: {e}", path.display())))
    }
}
