//! Private indexing. An encrypted index becomes a one-hot mask, and every
//! access touches the whole vector or matrix.

use super::{Machine, PrivateMatrix, PrivateScalar, PrivateVector};
use crate::error::{Error, Result};

impl Machine {
    /// One-hot vector of `size` slots with a 1 at `idx`. The caller
    /// guarantees `0 <= idx < size`; that cannot be checked privately.
    pub fn mask_gen(&mut self, size: usize, idx: &PrivateScalar) -> Result<PrivateVector> {
        let seq: Vec<i64> = (0..size as i64).collect();
        let seq = self.enc_vec(&seq)?;
        let idx = self.broadcast(idx, size)?;
        self.eeq(&seq, &idx)
    }

    pub fn vector_lookup(&mut self, vec: &PrivateVector, idx: &PrivateScalar) -> Result<PrivateScalar> {
        let size = self.size(vec).len();
        let mask = self.mask_gen(size, idx)?;
        self.dot_product(vec, &mask)
    }

    pub fn vector_update(
        &mut self,
        vec: &PrivateVector,
        idx: &PrivateScalar,
        val: &PrivateScalar,
    ) -> Result<PrivateVector> {
        let size = self.size(vec).len();
        let val = self.broadcast(val, size)?;
        let mask = self.mask_gen(size, idx)?;
        self.choose_vec(&mask, &val, vec)
    }

    pub fn matrix_lookup(
        &mut self,
        mat: &PrivateMatrix,
        row: &PrivateScalar,
        col: &PrivateScalar,
    ) -> Result<PrivateScalar> {
        if mat.rows() == 0 || mat.cols() == 0 {
            return Err(Error::shape("matrix_lookup", (mat.rows(), mat.cols()), "non-empty"));
        }
        let rows = mat.rows();
        self.size(mat);
        let mask = self.mask_gen(rows, row)?;
        let row_vec = self.vec_mat(&mask, mat)?;
        self.vector_lookup(&row_vec, col)
    }

    pub fn matrix_update(
        &mut self,
        mat: &PrivateMatrix,
        row: &PrivateScalar,
        col: &PrivateScalar,
        val: &PrivateScalar,
    ) -> Result<PrivateMatrix> {
        let (rows, cols) = (mat.rows(), mat.cols());
        self.size(mat);
        let val = self.broadcast_matrix(val, rows, cols)?;
        let row_mask = self.mask_gen(rows, row)?;
        let col_mask = self.mask_gen(cols, col)?;
        let mask = self.outer(&row_mask, &col_mask)?;
        self.choose_mat(&mask, &val, mat)
    }
}
