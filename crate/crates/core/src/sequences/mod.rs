//! Decay sequences α₁ ≥ α₂ ≥ … ≥ 0, their convex minorants, and the block
//! index plans and diagonal tables every construction is assembled from.

mod minorant;
mod plan;

pub use minorant::{
    check_convexity, check_slope_monotonicity, convex_minorant, minorant_rows, ConvexDecaySequence,
    MinorantRow, CHORD_CAP,
};
pub use plan::{
    beta_table, select_block_indices, threshold_index, BlockIndexPlan, TypeExponents, Variant, DEFAULT_SCAN_CAP,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance for comparisons between sequence values.
pub const SEQ_TOL: f64 = 1e-12;

/// Anything that can be evaluated as α_j for 1-based `j`.
///
/// Closed-form sequences answer for every index; tabulated minorants only up
/// to their horizon and report [`Error::HorizonExceeded`] beyond it.
pub trait Alpha {
    fn alpha(&self, j: usize) -> Result<f64>;

    /// Last index that can be evaluated, `None` when unbounded.
    fn horizon(&self) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// α_j = r^j.
    Geometric { ratio: f64 },
    /// α_j = j^{-s}.
    Power { exponent: f64 },
    /// Finite nonincreasing list followed by zeros.
    Table { values: Vec<f64> },
}

/// A nonincreasing nonnegative sequence with α₁ > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySequence {
    generator: Generator,
    scale: f64,
}

impl DecaySequence {
    pub fn geometric(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid(format!(
                "geometric ratio must lie in (0,1), got {ratio}"
            )));
        }
        Ok(Self {
            generator: Generator::Geometric { ratio },
            scale: 1.0,
        })
    }

    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(Error::invalid(format!(
                "power exponent must be positive, got {exponent}"
            )));
        }
        Ok(Self {
            generator: Generator::Power { exponent },
            scale: 1.0,
        })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("table sequence must not be empty"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("table entries must be finite and nonnegative"));
        }
        if values[0] <= 0.0 {
            return Err(Error::invalid("table sequence needs alpha_1 > 0"));
        }
        if let Some(w) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::invalid(format!(
                "table sequence increases at index {}",
                w + 2
            )));
        }
        Ok(Self {
            generator: Generator::Table { values },
            scale: 1.0,
        })
    }

    /// The same sequence multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {factor}")));
        }
        Ok(Self {
            generator: self.generator.clone(),
            scale: self.scale * factor,
        })
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self.generator, Generator::Table { .. })
    }

    /// α_j; exact zero past the end of a table.
    pub fn eval(&self, j: usize) -> f64 {
        assert!(j >= 1, "sequence indices start at 1");
        let raw = match &self.generator {
            Generator::Geometric { ratio } => {
                if j <= i32::MAX as usize {
                    ratio.powi(j as i32)
                } else {
                    0.0
                }
            }
            Generator::Power { exponent } => (j as f64).powf(-exponent),
            Generator::Table { values } => values.get(j - 1).copied().unwrap_or(0.0),
        };
        self.scale * raw
    }

    /// Parses `geometric:<r>`, `power:<s>` or `file:<path>`.
    ///
    /// The file holds a JSON array of nonincreasing reals.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let (kind, arg) = spec
            .split_once(':')
            .ok_or_else(|| Error::parse("alpha", format!("expected <kind>:<arg>, got `{spec}`")))?;
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::parse("alpha", format!("bad number `{s}`: {e}")))
        };
        match kind {
            "geometric" => Self::geometric(number(arg)?),
            "power" => Self::power(number(arg)?),
            "file" => Self::from_file(Path::new(arg)),
            other => Err(Error::parse(
                "alpha",
                format!("unknown sequence kind `{other}` (geometric, power, file)"),
            )),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let values: Vec<f64> = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        Self::table(values)
    }

    /// Short human-readable description used in report provenance.
    pub fn describe(&self) -> String {
        let base = match &self.generator {
            Generator::Geometric { ratio } => format!("geometric:{ratio}"),
            Generator::Power { exponent } => format!("power:{exponent}"),
            Generator::Table { values } => format!("table[{}]", values.len()),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{}*{base}", self.scale)
        }
    }
}

impl Alpha for DecaySequence {
    fn alpha(&self, j: usize) -> Result<f64> {
        Ok(self.eval(j))
    }
}
