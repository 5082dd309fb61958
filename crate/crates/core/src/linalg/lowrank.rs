use super::{DenseMatrix, SymOperator};

/// `Q Qᵀ` stored through its `n × r` factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    pub q: DenseMatrix,
}

impl LowRankFactor {
    pub fn new(q: DenseMatrix) -> Self {
        Self { q }
    }

    pub fn rank(&self) -> usize {
        self.q.cols()
    }

    pub fn materialize(&self) -> DenseMatrix {
        self.q.matmul_tr(&self.q)
    }
}

impl SymOperator for LowRankFactor {
    fn dim(&self) -> usize {
        self.q.rows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.q.matvec(&self.q.tr_matvec(x))
    }
}
