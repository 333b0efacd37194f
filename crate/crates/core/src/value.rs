//! Public (cleartext) values crossing the machine boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest integer magnitude the approximate domain represents exactly.
pub const APPROX_EXACT_LIMIT: i64 = 1 << 53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NumericDomain {
    /// 64-bit two's complement integers with wrapping arithmetic.
    ExactInt64,
    /// Real numbers with bounded absolute error.
    ApproxFixedPoint,
}

impl NumericDomain {
    pub fn is_exact(self) -> bool {
        matches!(self, NumericDomain::ExactInt64)
    }
}

/// A public scalar constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Public {
    Int(i64),
    Real(f64),
}

impl Public {
    pub fn as_f64(self) -> f64 {
        match self {
            Public::Int(v) => v as f64,
            Public::Real(v) => v,
        }
    }
}

impl From<i64> for Public {
    fn from(v: i64) -> Self {
        Public::Int(v)
    }
}

impl From<f64> for Public {
    fn from(v: f64) -> Self {
        Public::Real(v)
    }
}

/// Cleartext contents of a decrypted value, row-major for matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Plain {
    Int(Vec<i64>),
    Real(Vec<f64>),
}

impl Plain {
    pub fn len(&self) -> usize {
        match self {
            Plain::Int(v) => v.len(),
            Plain::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Plain::Int(v) => v.iter().map(|&x| x as f64).collect(),
            Plain::Real(v) => v.clone(),
        }
    }

    /// Integer view. Approximate values are rounded and must lie within
    /// `tolerance` of the nearest integer.
    pub fn to_ints(&self, tolerance: f64) -> Result<Vec<i64>> {
        match self {
            Plain::Int(v) => Ok(v.clone()),
            Plain::Real(v) => v
                .iter()
                .map(|&x| {
                    let r = x.round();
                    if (x - r).abs() <= tolerance {
                        Ok(r as i64)
                    } else {
                        Err(Error::Domain(format!(
                            "{x} is not within {tolerance} of an integer"
                        )))
                    }
                })
                .collect(),
        }
    }

    pub fn to_bits(&self, tolerance: f64) -> Result<Vec<bool>> {
        self.to_ints(tolerance)?
            .into_iter()
            .map(|v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Domain(format!("{other} is not a boolean"))),
            })
            .collect()
    }

    /// Single-slot convenience accessor.
    pub fn scalar_f64(&self) -> f64 {
        self.to_f64().first().copied().unwrap_or(0.0)
    }
}
