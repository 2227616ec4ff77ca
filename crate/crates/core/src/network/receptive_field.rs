//! Receptive-field sizes of stacked stride-1 3x3 convolutions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceptiveFieldMode {
    /// Undilated 3x3 layers: grows linearly, `2l + 1`.
    Common,
    /// Dilation doubling each layer (1, 2, 4, ...): `2^(l+1) - 1`.
    DilatedDoubling,
}

/// Side lengths (in pixels) of the receptive fields for a depth or dilation list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceptiveFieldReport {
    pub depth: usize,
    pub common_rf: u64,
    pub dilated_doubling_rf: u64,
    /// Receptive field of the given dilation list; `None` for a depth-only query.
    pub config_rf: Option<u64>,
}

/// Receptive field of `depth` 3x3 layers under the given growth mode.
pub fn receptive_field(depth: usize, mode: ReceptiveFieldMode) -> Result<u64> {
    if depth == 0 {
        return Err(Error::Argument("depth must be at least 1".into()));
    }
    match mode {
        ReceptiveFieldMode::Common => Ok(2 * depth as u64 + 1),
        ReceptiveFieldMode::DilatedDoubling => 1u64
            .checked_shl(depth as u32 + 1)
            .filter(|&v| v != 0)
            .map(|v| v - 1)
            .ok_or_else(|| Error::Argument(format!("depth {depth} overflows"))),
    }
}

/// Receptive field of stride-1 3x3 layers with the given dilations: `1 + 2 * sum(d)`.
pub fn receptive_field_of_dilations(dilations: &[usize]) -> Result<u64> {
    if dilations.is_empty() {
        return Err(Error::Argument("dilation list is empty".into()));
    }
    if dilations.contains(&0) {
        return Err(Error::Argument("dilations must be positive".into()));
    }
    Ok(1 + 2 * dilations.iter().map(|&d| d as u64).sum::<u64>())
}

impl ReceptiveFieldReport {
    pub fn for_depth(depth: usize) -> Result<Self> {
        Ok(Self {
            depth,
            common_rf: receptive_field(depth, ReceptiveFieldMode::Common)?,
            dilated_doubling_rf: receptive_field(depth, ReceptiveFieldMode::DilatedDoubling)?,
            config_rf: None,
        })
    }

    pub fn for_dilations(dilations: &[usize]) -> Result<Self> {
        let config = receptive_field_of_dilations(dilations)?;
        Ok(Self {
            config_rf: Some(config),
            ..Self::for_depth(dilations.len())?
        })
    }
}

impl std::fmt::Display for ReceptiveFieldReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "depth            {}", self.depth)?;
        writeln!(f, "common           {}", self.common_rf)?;
        writeln!(f, "dilated_doubling {}", self.dilated_doubling_rf)?;
        if let Some(c) = self.config_rf {
            writeln!(f, "config           {c}")?;
        }
        Ok(())
    }
}
