//! Ternary selection by arithmetic: `cond·(a − b) + b`. No host-level branch
//! ever looks at `cond`.

use super::{Machine, PrivateBool, PrivateMatrix, PrivateScalar, PrivateValue, PrivateVector};
use crate::error::{Error, Result};

impl Machine {
    pub fn choose(&mut self, cond: &PrivateBool, a: &PrivateScalar, b: &PrivateScalar) -> Result<PrivateScalar> {
        let diff = self.sub(a, b)?;
        let scaled = self.mul(cond, &diff)?;
        self.add(&scaled, b)
    }

    /// `mask` selects slot-wise: 1 takes `a`, 0 takes `b`.
    pub fn choose_vec(&mut self, mask: &PrivateVector, a: &PrivateVector, b: &PrivateVector) -> Result<PrivateVector> {
        if mask.len() != a.len() {
            return Err(Error::shape("choose_vec", mask.shape(), a.shape()));
        }
        let diff = self.esub(a, b)?;
        let scaled = self.emul(mask, &diff)?;
        self.eadd(&scaled, b)
    }

    pub fn choose_vec_ext(&mut self, cond: &PrivateBool, a: &PrivateVector, b: &PrivateVector) -> Result<PrivateVector> {
        let len = self.size(a).len();
        let mask = self.broadcast(cond, len)?;
        self.choose_vec(&mask, a, b)
    }

    pub fn choose_mat(&mut self, mask: &PrivateMatrix, a: &PrivateMatrix, b: &PrivateMatrix) -> Result<PrivateMatrix> {
        if mask.shape() != a.shape() {
            return Err(Error::shape("choose_mat", mask.shape(), a.shape()));
        }
        let diff = self.esub(a, b)?;
        let scaled = self.emul(mask, &diff)?;
        self.eadd(&scaled, b)
    }

    pub fn choose_mat_ext(&mut self, cond: &PrivateBool, a: &PrivateMatrix, b: &PrivateMatrix) -> Result<PrivateMatrix> {
        let (rows, cols) = (a.rows(), a.cols());
        self.size(a);
        let mask = self.broadcast_matrix(cond, rows, cols)?;
        self.choose_mat(&mask, a, b)
    }
}
