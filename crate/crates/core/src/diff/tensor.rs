use super::DiffError;

/// Dense row-major matrix of `f64`. Column vectors are `n x 1`, scalars `1 x 1`.
///
/// Values are validated to be finite on construction; operations that can
/// leave the finite domain check their own inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from row-major data, rejecting length mismatches and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DiffError> {
        if data.len() != rows * cols {
            return Err(DiffError::shape(
                "tensor",
                format!("{}x{} needs {} values, got {}", rows, cols, rows * cols, data.len()),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(DiffError::NonFinite { op: "tensor" });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// 1x1 tensor holding one value.
    pub fn scalar(value: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DiffError> {
        let n = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(DiffError::shape("tensor", "ragged rows"));
        }
        Self::new(n, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        debug_assert!(r < self.rows);
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The single value of a 1x1 tensor.
    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of row `r`.
    pub fn row_norm(&self, r: usize) -> f64 {
        self.row(r).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry, 0 for empty tensors.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `A * B` without tape involvement. Used by the tape's forward pass and by
/// inference-only paths.
pub(crate) fn matmul_values(a: &Tensor, b: &Tensor) -> Result<Tensor, DiffError> {
    if a.cols != b.rows {
        return Err(DiffError::shape(
            "matmul",
            format!("{}x{} * {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let mut out = Tensor::zeros(a.rows, b.cols);
    // i-k-j order keeps the inner loop contiguous in both B and the output.
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

/// Cosine similarity of every row of `a` against every row of `b`.
/// Errors on zero-norm rows; output entries lie in `[-1, 1]` up to rounding.
pub fn cosine_matrix_values(a: &Tensor, b: &Tensor) -> Result<Tensor, DiffError> {
    if a.cols != b.cols {
        return Err(DiffError::shape(
            "cosine_sim_matrix",
            format!("{} vs {} columns", a.cols, b.cols),
        ));
    }
    let a_norms = row_norms_checked(a, "cosine_sim_matrix")?;
    let b_norms = row_norms_checked(b, "cosine_sim_matrix")?;
    let mut out = Tensor::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ra = a.row(i);
        for j in 0..b.rows {
            let dot: f64 = ra.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
            out.data[i * b.rows + j] = dot / (a_norms[i] * b_norms[j]);
        }
    }
    Ok(out)
}

pub(crate) fn row_norms_checked(t: &Tensor, op: &'static str) -> Result<Vec<f64>, DiffError> {
    (0..t.rows)
        .map(|r| {
            let n = t.row_norm(r);
            if n == 0.0 {
                Err(DiffError::invalid(op, format!("zero-norm row {r}")))
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// Copies the listed rows into a new tensor, in list order.
pub fn select_rows(t: &Tensor, rows: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(rows.len(), t.cols());
    for (k, &r) in rows.iter().enumerate() {
        out.data[k * t.cols..(k + 1) * t.cols].copy_from_slice(t.row(r));
    }
    out
}

/// In-place row softmax with temperature, max-subtracted for stability.
pub fn row_softmax_values(t: &mut Tensor, temperature: f64) {
    for r in 0..t.rows {
        let row = &mut t.data[r * t.cols..(r + 1) * t.cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = ((*v - max) / temperature).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}
