//! Minimal row-major matrix type backing the network's batched forward and
//! backward passes. The only heavy operation is `gemm`, delegated to
//! `matrixmultiply` (single-threaded, deterministic).

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    /// Reshape in place to a smaller or equal row count, keeping columns.
    /// Used to reuse batch buffers when the final mini-batch is short.
    pub fn truncate_rows(&mut self, rows: usize) {
        assert!(rows <= self.data.capacity() / self.cols.max(1));
        self.rows = rows;
        self.data.resize(rows * self.cols, 0.0);
    }
}

/// Operand side of a GEMM, optionally transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    NoTrans,
    Trans,
}

/// `c = alpha * op(a) * op(b) + beta * c`.
pub fn gemm(c: &mut Matrix, alpha: f64, a: &Matrix, op_a: Op, b: &Matrix, op_b: Op, beta: f64) {
    let (m, k_a, rsa, csa) = match op_a {
        Op::NoTrans => (a.rows, a.cols, a.cols as isize, 1),
        Op::Trans => (a.cols, a.rows, 1, a.cols as isize),
    };
    let (k_b, n, rsb, csb) = match op_b {
        Op::NoTrans => (b.rows, b.cols, b.cols as isize, 1),
        Op::Trans => (b.cols, b.rows, 1, b.cols as isize),
    };
    assert_eq!(k_a, k_b, "gemm inner dimensions");
    assert_eq!((c.rows, c.cols), (m, n), "gemm output shape");
    unsafe {
        matrixmultiply::dgemm(
            m,
            k_a,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}
