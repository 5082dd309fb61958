use std::ops::Range;

use super::{Cholesky, DenseMatrix, LinalgError, SymOperator};

/// Square blocks laid out along the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<DenseMatrix>,
    offsets: Vec<usize>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<DenseMatrix>) -> Result<Self, LinalgError> {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in &blocks {
            if !b.is_square() {
                return Err(LinalgError::DimensionMismatch { expected: b.rows(), found: b.cols() });
            }
            offsets.push(offsets.last().unwrap() + b.rows());
        }
        Ok(Self { blocks, offsets })
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn range(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    pub fn assemble(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        for (j, b) in self.blocks.iter().enumerate() {
            let o = self.offsets[j];
            for r in 0..b.rows() {
                for c in 0..b.cols() {
                    m[(o + r, o + c)] = b[(r, c)];
                }
            }
        }
        m
    }

    /// Solves each SPD block independently.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch { expected: self.dim(), found: b.len() });
        }
        let mut x = Vec::with_capacity(b.len());
        for (j, blk) in self.blocks.iter().enumerate() {
            x.extend(Cholesky::new(blk)?.solve(&b[self.range(j)]));
        }
        Ok(x)
    }
}

impl SymOperator for BlockDiagonal {
    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let mut y = Vec::with_capacity(x.len());
        for (j, blk) in self.blocks.iter().enumerate() {
            y.extend(blk.matvec(&x[self.range(j)]));
        }
        y
    }
}
