use std::sync::Arc;

use super::tensor::{cosine_matrix_values, matmul_values, row_norms_checked, row_softmax_values};
use super::{DiffError, Tensor};

/// Handle to a node on a [`GradientTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Records a forward computation as a topologically ordered node list.
///
/// Every operation evaluates eagerly, stores its output tensor, and pushes
/// one node. [`GradientTape::backward`] then walks the list once in reverse,
/// so the whole computation is differentiated with a single pass regardless
/// of how the operations were composed.
///
/// A tape is built per training step and dropped afterwards; it is not
/// `Sync` and is meant to be confined to one thread.
pub struct GradientTape {
    nodes: Vec<Node>,
}

struct Node {
    value: Tensor,
    op: Op,
}

enum Op {
    Leaf,
    MatMul { lhs: NodeId, rhs: NodeId },
    Transpose { input: NodeId },
    Add { lhs: NodeId, rhs: NodeId },
    Sub { lhs: NodeId, rhs: NodeId },
    MulElem { lhs: NodeId, rhs: NodeId },
    AddConst { input: NodeId },
    Scale { input: NodeId, factor: f64 },
    ScaleByEntry { input: NodeId, scalar: NodeId, index: usize },
    Elu { input: NodeId },
    LeakyRelu { input: NodeId, slope: f64 },
    Relu { input: NodeId },
    Ln { input: NodeId },
    RowSoftmax { input: NodeId, temperature: f64 },
    ConcatCols { parts: Vec<NodeId> },
    GatherRows { input: NodeId, rows: Arc<Vec<usize>> },
    SegmentMean { input: NodeId, segments: Arc<Vec<Vec<usize>>> },
    SegmentSoftmax { input: NodeId, offsets: Arc<Vec<usize>> },
    WeightedSegmentSum { values: NodeId, weights: NodeId, offsets: Arc<Vec<usize>> },
    RowL2Distance { lhs: NodeId, rhs: NodeId },
    RowNormalize { input: NodeId },
    CosineSim { lhs: NodeId, rhs: NodeId },
    SumAll { input: NodeId },
}

impl Default for GradientTape {
    fn default() -> Self {
        Self::new()
    }
}

impl GradientTape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers an input tensor (parameter or constant) on the tape.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// The forward value of a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        debug_assert!(value.all_finite(), "tape op produced a non-finite value");
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op });
        id
    }

    pub fn matmul(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, DiffError> {
        let out = matmul_values(self.value(lhs), self.value(rhs))?;
        Ok(self.push(out, Op::MatMul { lhs, rhs }))
    }

    pub fn transpose(&mut self, input: NodeId) -> NodeId {
        let out = self.value(input).transpose();
        self.push(out, Op::Transpose { input })
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, DiffError> {
        let (a, b) = (self.value(lhs), self.value(rhs));
        if !a.same_shape(b) {
            return Err(DiffError::shape("add", shapes(a, b)));
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(a.rows(), a.cols(), data)?;
        Ok(self.push(out, Op::Add { lhs, rhs }))
    }

    pub fn sub(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, DiffError> {
        let (a, b) = (self.value(lhs), self.value(rhs));
        if !a.same_shape(b) {
            return Err(DiffError::shape("sub", shapes(a, b)));
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
        let out = Tensor::new(a.rows(), a.cols(), data)?;
        Ok(self.push(out, Op::Sub { lhs, rhs }))
    }

    pub fn mul_elem(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, DiffError> {
        let (a, b) = (self.value(lhs), self.value(rhs));
        if !a.same_shape(b) {
            return Err(DiffError::shape("mul_elem", shapes(a, b)));
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(a.rows(), a.cols(), data)?;
        Ok(self.push(out, Op::MulElem { lhs, rhs }))
    }

    pub fn add_const(&mut self, input: NodeId, value: f64) -> NodeId {
        let t = self.value(input);
        let data = t.data().iter().map(|x| x + value).collect();
        let out = Tensor::new(t.rows(), t.cols(), data).expect("shape preserved");
        self.push(out, Op::AddConst { input })
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> NodeId {
        let t = self.value(input);
        let data = t.data().iter().map(|x| x * factor).collect();
        let out = Tensor::new(t.rows(), t.cols(), data).expect("shape preserved");
        self.push(out, Op::Scale { input, factor })
    }

    /// Multiplies `input` elementwise by the `index`-th entry of `scalar`,
    /// with gradients flowing to both.
    pub fn scale_by_entry(
        &mut self,
        input: NodeId,
        scalar: NodeId,
        index: usize,
    ) -> Result<NodeId, DiffError> {
        let s = self.value(scalar);
        if index >= s.len() {
            return Err(DiffError::invalid(
                "scale_by_entry",
                format!("entry {index} out of {}", s.len()),
            ));
        }
        let factor = s.data()[index];
        let t = self.value(input);
        let data = t.data().iter().map(|x| x * factor).collect();
        let out = Tensor::new(t.rows(), t.cols(), data)?;
        Ok(self.push(out, Op::ScaleByEntry { input, scalar, index }))
    }

    /// ELU: `x` for `x > 0`, `exp(x) - 1` otherwise.
    pub fn elu(&mut self, input: NodeId) -> NodeId {
        let t = self.value(input);
        let data = t
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { x.exp() - 1.0 })
            .collect();
        let out = Tensor::new(t.rows(), t.cols(), data).expect("shape preserved");
        self.push(out, Op::Elu { input })
    }

    pub fn leaky_relu(&mut self, input: NodeId, slope: f64) -> NodeId {
        let t = self.value(input);
        let data = t
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { slope * x })
            .collect();
        let out = Tensor::new(t.rows(), t.cols(), data).expect("shape preserved");
        self.push(out, Op::LeakyRelu { input, slope })
    }

    /// `max(0, x)` elementwise, subgradient 0 at the kink.
    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let t = self.value(input);
        let data = t.data().iter().map(|&x| x.max(0.0)).collect();
        let out = Tensor::new(t.rows(), t.cols(), data).expect("shape preserved");
        self.push(out, Op::Relu { input })
    }

    /// Natural log; input must be strictly positive.
    pub fn ln(&mut self, input: NodeId) -> Result<NodeId, DiffError> {
        let t = self.value(input);
        if t.data().iter().any(|&x| x <= 0.0) {
            return Err(DiffError::invalid("ln", "non-positive input"));
        }
        let data = t.data().iter().map(|x| x.ln()).collect();
        let out = Tensor::new(t.rows(), t.cols(), data)?;
        Ok(self.push(out, Op::Ln { input }))
    }

    /// Row-wise softmax with temperature; rows sum to 1 and stay strictly
    /// positive thanks to max subtraction.
    pub fn row_softmax(&mut self, input: NodeId, temperature: f64) -> Result<NodeId, DiffError> {
        if temperature <= 0.0 {
            return Err(DiffError::invalid(
                "row_softmax",
                format!("temperature must be positive, got {temperature}"),
            ));
        }
        let mut out = self.value(input).clone();
        row_softmax_values(&mut out, temperature);
        Ok(self.push(out, Op::RowSoftmax { input, temperature }))
    }

    /// Concatenates tensors left to right along the column axis.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, DiffError> {
        let first = *parts
            .first()
            .ok_or_else(|| DiffError::invalid("concat_columns", "no parts"))?;
        let rows = self.value(first).rows();
        let total_cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(rows, total_cols);
        let mut col = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(DiffError::shape(
                    "concat_columns",
                    format!("{} rows vs {} rows", t.rows(), rows),
                ));
            }
            for r in 0..rows {
                for c in 0..t.cols() {
                    out.set(r, col + c, t.get(r, c));
                }
            }
            col += t.cols();
        }
        Ok(self.push(out, Op::ConcatCols { parts: parts.to_vec() }))
    }

    /// Output row `k` is input row `rows[k]`; the backward pass scatter-adds.
    pub fn gather_rows(&mut self, input: NodeId, rows: Arc<Vec<usize>>) -> Result<NodeId, DiffError> {
        let t = self.value(input);
        if let Some(&bad) = rows.iter().find(|&&r| r >= t.rows()) {
            return Err(DiffError::invalid(
                "gather_rows",
                format!("row {bad} out of {}", t.rows()),
            ));
        }
        let mut out = Tensor::zeros(rows.len(), t.cols());
        for (k, &r) in rows.iter().enumerate() {
            for c in 0..t.cols() {
                out.set(k, c, t.get(r, c));
            }
        }
        Ok(self.push(out, Op::GatherRows { input, rows }))
    }

    /// Output row `i` is the mean of the input rows listed in `segments[i]`
    /// (duplicates counted); an empty segment yields a zero row.
    pub fn segment_mean(
        &mut self,
        input: NodeId,
        segments: Arc<Vec<Vec<usize>>>,
    ) -> Result<NodeId, DiffError> {
        let t = self.value(input);
        let mut out = Tensor::zeros(segments.len(), t.cols());
        for (i, seg) in segments.iter().enumerate() {
            if seg.is_empty() {
                continue;
            }
            for &r in seg {
                if r >= t.rows() {
                    return Err(DiffError::invalid(
                        "segment_mean",
                        format!("row {r} out of {}", t.rows()),
                    ));
                }
                for c in 0..t.cols() {
                    out.set(i, c, out.get(i, c) + t.get(r, c));
                }
            }
            let inv = 1.0 / seg.len() as f64;
            for c in 0..t.cols() {
                out.set(i, c, out.get(i, c) * inv);
            }
        }
        Ok(self.push(out, Op::SegmentMean { input, segments }))
    }

    /// Softmax over contiguous segments of a column vector. `offsets` has one
    /// more entry than there are segments and must end at the input length.
    pub fn segment_softmax(
        &mut self,
        input: NodeId,
        offsets: Arc<Vec<usize>>,
    ) -> Result<NodeId, DiffError> {
        let t = self.value(input);
        check_offsets(&offsets, t.rows(), "segment_softmax")?;
        if t.cols() != 1 {
            return Err(DiffError::shape("segment_softmax", "input must be a column vector"));
        }
        let mut out = Tensor::zeros(t.rows(), 1);
        for w in offsets.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if lo == hi {
                continue;
            }
            let max = (lo..hi).map(|r| t.get(r, 0)).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for r in lo..hi {
                let e = (t.get(r, 0) - max).exp();
                out.set(r, 0, e);
                sum += e;
            }
            for r in lo..hi {
                out.set(r, 0, out.get(r, 0) / sum);
            }
        }
        Ok(self.push(out, Op::SegmentSoftmax { input, offsets }))
    }

    /// Output row `i` is the weighted sum of `values` rows in segment `i`:
    /// `sum_k weights[k] * values[k]`. Used for attention aggregation.
    pub fn weighted_segment_sum(
        &mut self,
        values: NodeId,
        weights: NodeId,
        offsets: Arc<Vec<usize>>,
    ) -> Result<NodeId, DiffError> {
        let (v, w) = (self.value(values), self.value(weights));
        check_offsets(&offsets, v.rows(), "weighted_segment_sum")?;
        if w.rows() != v.rows() || w.cols() != 1 {
            return Err(DiffError::shape(
                "weighted_segment_sum",
                format!("weights {}x{} vs {} values", w.rows(), w.cols(), v.rows()),
            ));
        }
        let cols = v.cols();
        let mut out = Tensor::zeros(offsets.len() - 1, cols);
        for (i, win) in offsets.windows(2).enumerate() {
            for k in win[0]..win[1] {
                let wk = w.get(k, 0);
                for c in 0..cols {
                    out.set(i, c, out.get(i, c) + wk * v.get(k, c));
                }
            }
        }
        Ok(self.push(out, Op::WeightedSegmentSum { values, weights, offsets }))
    }

    /// Per-row Euclidean distance between two equal-shape tensors, as a
    /// column vector. Coincident rows get subgradient 0.
    pub fn row_l2_distance(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, DiffError> {
        let (a, b) = (self.value(lhs), self.value(rhs));
        if !a.same_shape(b) {
            return Err(DiffError::shape("row_l2_distance", shapes(a, b)));
        }
        let mut out = Tensor::zeros(a.rows(), 1);
        for r in 0..a.rows() {
            let d: f64 = a
                .row(r)
                .iter()
                .zip(b.row(r))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            out.set(r, 0, d.sqrt());
        }
        Ok(self.push(out, Op::RowL2Distance { lhs, rhs }))
    }

    /// Scales every row to unit Euclidean length. Errors on zero rows.
    pub fn row_normalize(&mut self, input: NodeId) -> Result<NodeId, DiffError> {
        let t = self.value(input);
        let norms = row_norms_checked(t, "row_normalize")?;
        let mut out = t.clone();
        for (r, n) in norms.iter().enumerate() {
            for c in 0..out.cols() {
                let v = out.get(r, c) / n;
                out.set(r, c, v);
            }
        }
        Ok(self.push(out, Op::RowNormalize { input }))
    }

    /// Cosine similarity of every `lhs` row against every `rhs` row.
    /// Errors on zero-norm rows.
    pub fn cosine_sim_matrix(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId, DiffError> {
        let out = cosine_matrix_values(self.value(lhs), self.value(rhs))?;
        Ok(self.push(out, Op::CosineSim { lhs, rhs }))
    }

    /// Sum of all entries, as a 1x1 tensor.
    pub fn sum_all(&mut self, input: NodeId) -> NodeId {
        let s: f64 = self.value(input).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll { input })
    }

    /// Reverse pass from a scalar loss node. Every node reachable from the
    /// loss gets a gradient; unreached nodes report zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, DiffError> {
        if !self.value(loss).is_scalar() {
            return Err(DiffError::invalid("backward", "loss must be a 1x1 scalar"));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            let Some(grad) = grads[id].take() else {
                continue;
            };
            self.propagate(id, &grad, &mut grads);
            grads[id] = Some(grad);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, id: usize, grad: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { lhs, rhs } => {
                let (a, b) = (self.value(*lhs), self.value(*rhs));
                let da = matmul_values(grad, &b.transpose()).expect("checked in forward");
                let db = matmul_values(&a.transpose(), grad).expect("checked in forward");
                accumulate(&mut grads[lhs.0], da);
                accumulate(&mut grads[rhs.0], db);
            }
            Op::Transpose { input } => {
                accumulate(&mut grads[input.0], grad.transpose());
            }
            Op::Add { lhs, rhs } => {
                accumulate(&mut grads[lhs.0], grad.clone());
                accumulate(&mut grads[rhs.0], grad.clone());
            }
            Op::Sub { lhs, rhs } => {
                accumulate(&mut grads[lhs.0], grad.clone());
                let neg = map_data(grad, |g| -g);
                accumulate(&mut grads[rhs.0], neg);
            }
            Op::MulElem { lhs, rhs } => {
                let (a, b) = (self.value(*lhs), self.value(*rhs));
                accumulate(&mut grads[lhs.0], zip_data(grad, b, |g, y| g * y));
                accumulate(&mut grads[rhs.0], zip_data(grad, a, |g, x| g * x));
            }
            Op::AddConst { input } => {
                accumulate(&mut grads[input.0], grad.clone());
            }
            Op::Scale { input, factor } => {
                accumulate(&mut grads[input.0], map_data(grad, |g| g * factor));
            }
            Op::ScaleByEntry { input, scalar, index } => {
                let s = self.value(*scalar).data()[*index];
                let x = self.value(*input);
                accumulate(&mut grads[input.0], map_data(grad, |g| g * s));
                let ds: f64 = grad.data().iter().zip(x.data()).map(|(g, v)| g * v).sum();
                let sv = self.value(*scalar);
                let mut dscalar = Tensor::zeros(sv.rows(), sv.cols());
                dscalar.data_mut()[*index] = ds;
                accumulate(&mut grads[scalar.0], dscalar);
            }
            Op::Elu { input } => {
                // f'(x) = 1 for x > 0, exp(x) = f(x) + 1 otherwise.
                let x = self.value(*input);
                let out = &node.value;
                let mut d = grad.clone();
                for (i, g) in d.data_mut().iter_mut().enumerate() {
                    if x.data()[i] <= 0.0 {
                        *g *= out.data()[i] + 1.0;
                    }
                }
                accumulate(&mut grads[input.0], d);
            }
            Op::LeakyRelu { input, slope } => {
                let x = self.value(*input);
                let mut d = grad.clone();
                for (i, g) in d.data_mut().iter_mut().enumerate() {
                    if x.data()[i] <= 0.0 {
                        *g *= slope;
                    }
                }
                accumulate(&mut grads[input.0], d);
            }
            Op::Relu { input } => {
                let x = self.value(*input);
                let mut d = grad.clone();
                for (i, g) in d.data_mut().iter_mut().enumerate() {
                    if x.data()[i] <= 0.0 {
                        *g = 0.0;
                    }
                }
                accumulate(&mut grads[input.0], d);
            }
            Op::Ln { input } => {
                let x = self.value(*input);
                accumulate(&mut grads[input.0], zip_data(grad, x, |g, v| g / v));
            }
            Op::RowSoftmax { input, temperature } => {
                let s = &node.value;
                let mut d = Tensor::zeros(s.rows(), s.cols());
                for r in 0..s.rows() {
                    let dot: f64 = grad.row(r).iter().zip(s.row(r)).map(|(g, p)| g * p).sum();
                    for c in 0..s.cols() {
                        let p = s.get(r, c);
                        d.set(r, c, p * (grad.get(r, c) - dot) / temperature);
                    }
                }
                accumulate(&mut grads[input.0], d);
            }
            Op::ConcatCols { parts } => {
                let mut col = 0;
                for &p in parts {
                    let t = self.value(p);
                    let mut d = Tensor::zeros(t.rows(), t.cols());
                    for r in 0..t.rows() {
                        for c in 0..t.cols() {
                            d.set(r, c, grad.get(r, col + c));
                        }
                    }
                    accumulate(&mut grads[p.0], d);
                    col += t.cols();
                }
            }
            Op::GatherRows { input, rows } => {
                let t = self.value(*input);
                let mut d = Tensor::zeros(t.rows(), t.cols());
                for (k, &r) in rows.iter().enumerate() {
                    for c in 0..t.cols() {
                        d.set(r, c, d.get(r, c) + grad.get(k, c));
                    }
                }
                accumulate(&mut grads[input.0], d);
            }
            Op::SegmentMean { input, segments } => {
                let t = self.value(*input);
                let mut d = Tensor::zeros(t.rows(), t.cols());
                for (i, seg) in segments.iter().enumerate() {
                    if seg.is_empty() {
                        continue;
                    }
                    let inv = 1.0 / seg.len() as f64;
                    for &r in seg {
                        for c in 0..t.cols() {
                            d.set(r, c, d.get(r, c) + grad.get(i, c) * inv);
                        }
                    }
                }
                accumulate(&mut grads[input.0], d);
            }
            Op::SegmentSoftmax { input, offsets } => {
                let s = &node.value;
                let mut d = Tensor::zeros(s.rows(), 1);
                for w in offsets.windows(2) {
                    let (lo, hi) = (w[0], w[1]);
                    let dot: f64 = (lo..hi).map(|r| grad.get(r, 0) * s.get(r, 0)).sum();
                    for r in lo..hi {
                        d.set(r, 0, s.get(r, 0) * (grad.get(r, 0) - dot));
                    }
                }
                accumulate(&mut grads[input.0], d);
            }
            Op::WeightedSegmentSum { values, weights, offsets } => {
                let (v, w) = (self.value(*values), self.value(*weights));
                let cols = v.cols();
                let mut dv = Tensor::zeros(v.rows(), cols);
                let mut dw = Tensor::zeros(w.rows(), 1);
                for (i, win) in offsets.windows(2).enumerate() {
                    for k in win[0]..win[1] {
                        let wk = w.get(k, 0);
                        let mut dot = 0.0;
                        for c in 0..cols {
                            let g = grad.get(i, c);
                            dv.set(k, c, wk * g);
                            dot += g * v.get(k, c);
                        }
                        dw.set(k, 0, dot);
                    }
                }
                accumulate(&mut grads[values.0], dv);
                accumulate(&mut grads[weights.0], dw);
            }
            Op::RowL2Distance { lhs, rhs } => {
                let (a, b) = (self.value(*lhs), self.value(*rhs));
                let dist = &node.value;
                let mut da = Tensor::zeros(a.rows(), a.cols());
                let mut db = Tensor::zeros(a.rows(), a.cols());
                for r in 0..a.rows() {
                    let d = dist.get(r, 0);
                    if d == 0.0 {
                        continue; // subgradient 0 at coincident rows
                    }
                    let g = grad.get(r, 0) / d;
                    for c in 0..a.cols() {
                        let diff = a.get(r, c) - b.get(r, c);
                        da.set(r, c, g * diff);
                        db.set(r, c, -g * diff);
                    }
                }
                accumulate(&mut grads[lhs.0], da);
                accumulate(&mut grads[rhs.0], db);
            }
            Op::RowNormalize { input } => {
                let x = self.value(*input);
                let y = &node.value;
                let mut d = Tensor::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let norm = x.row_norm(r);
                    let dot: f64 = grad.row(r).iter().zip(y.row(r)).map(|(g, v)| g * v).sum();
                    for c in 0..x.cols() {
                        d.set(r, c, (grad.get(r, c) - dot * y.get(r, c)) / norm);
                    }
                }
                accumulate(&mut grads[input.0], d);
            }
            Op::CosineSim { lhs, rhs } => {
                let (a, b) = (self.value(*lhs), self.value(*rhs));
                let sim = &node.value;
                let a_norms = row_norms_checked(a, "cosine_sim_matrix").expect("checked in forward");
                let b_norms = row_norms_checked(b, "cosine_sim_matrix").expect("checked in forward");
                let cols = a.cols();
                let mut da = Tensor::zeros(a.rows(), cols);
                let mut db = Tensor::zeros(b.rows(), cols);
                for i in 0..a.rows() {
                    for j in 0..b.rows() {
                        let g = grad.get(i, j);
                        if g == 0.0 {
                            continue;
                        }
                        let c = sim.get(i, j);
                        for k in 0..cols {
                            let ah = a.get(i, k) / a_norms[i];
                            let bh = b.get(j, k) / b_norms[j];
                            da.set(i, k, da.get(i, k) + g * (bh - c * ah) / a_norms[i]);
                            db.set(j, k, db.get(j, k) + g * (ah - c * bh) / b_norms[j]);
                        }
                    }
                }
                accumulate(&mut grads[lhs.0], da);
                accumulate(&mut grads[rhs.0], db);
            }
            Op::SumAll { input } => {
                let t = self.value(*input);
                let g = grad.scalar_value();
                let d = Tensor::new(t.rows(), t.cols(), vec![g; t.len()]).expect("shape preserved");
                accumulate(&mut grads[input.0], d);
            }
        }
    }
}

/// Gradients produced by [`GradientTape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. the given node; zeros if the node does
    /// not reach the loss.
    pub fn get(&self, id: NodeId) -> Tensor {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[id.0];
                Tensor::zeros(r, c)
            }
        }
    }
}

fn accumulate(slot: &mut Option<Tensor>, delta: Tensor) {
    match slot {
        None => *slot = Some(delta),
        Some(t) => {
            debug_assert!(t.same_shape(&delta));
            for (a, b) in t.data_mut().iter_mut().zip(delta.data()) {
                *a += b;
            }
        }
    }
}

fn map_data(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = t.data().iter().map(|&v| f(v)).collect();
    Tensor::new(t.rows(), t.cols(), data).expect("shape preserved")
}

fn zip_data(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.rows(), a.cols(), data).expect("shape preserved")
}

fn shapes(a: &Tensor, b: &Tensor) -> String {
    format!("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols())
}

fn check_offsets(offsets: &[usize], len: usize, op: &'static str) -> Result<(), DiffError> {
    let ok = offsets.first() == Some(&0)
        && offsets.last() == Some(&len)
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(DiffError::invalid(op, "offsets must ascend from 0 to the input length"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(rows: usize, cols: usize, data: &[f64]) -> Tensor {
        Tensor::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = GradientTape::new();
        let p = tape.leaf(tensor(2, 2, &[1.0, -2.0, 0.5, 3.0]));
        let loss = tape.sum_all(p);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(p).data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn half_square_sum_gradient_is_input() {
        // loss = sum(P ∘ P) / 2  =>  dloss/dP = P
        let mut tape = GradientTape::new();
        let p = tape.leaf(tensor(2, 2, &[1.0, -2.0, 0.5, 3.0]));
        let sq = tape.mul_elem(p, p).unwrap();
        let s = tape.sum_all(sq);
        let loss = tape.scale(s, 0.5);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(p).data(), &[1.0, -2.0, 0.5, 3.0]);
    }

    #[test]
    fn unreached_parameter_gets_zeros() {
        let mut tape = GradientTape::new();
        let p = tape.leaf(tensor(1, 2, &[1.0, 2.0]));
        let q = tape.leaf(tensor(1, 2, &[3.0, 4.0]));
        let loss = tape.sum_all(p);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(q).data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = GradientTape::new();
        let p = tape.leaf(tensor(1, 2, &[1.0, 2.0]));
        assert!(tape.backward(p).is_err());
    }

    #[test]
    fn matmul_of_sum_gradient_is_row_sums() {
        // loss = sum(A·B): dA[i][k] = sum_j B[k][j]
        let mut tape = GradientTape::new();
        let a = tape.leaf(tensor(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let b = tape.leaf(tensor(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let p = tape.matmul(a, b).unwrap();
        let loss = tape.sum_all(p);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(a).data(), &[6.0, 15.0, 6.0, 15.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = GradientTape::new();
        let x = tape.leaf(tensor(2, 3, &[0.0, 0.0, 0.0, 2.0_f64.ln(), 0.0, f64::MIN_POSITIVE]));
        let s = tape.row_softmax(x, 1.0).unwrap();
        let v = tape.value(s);
        for r in 0..2 {
            let sum: f64 = v.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(v.row(r).iter().all(|&p| p > 0.0));
        }
        assert!((v.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_closed_form_two_entries() {
        // row [ln 2, 0] -> [2/3, 1/3]
        let mut tape = GradientTape::new();
        let x = tape.leaf(tensor(1, 2, &[2.0_f64.ln(), 0.0]));
        let s = tape.row_softmax(x, 1.0).unwrap();
        let v = tape.value(s);
        assert!((v.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((v.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_shift_invariance() {
        let row = [0.3, -1.2, 2.4, 0.0];
        let shifted: Vec<f64> = row.iter().map(|v| v + 7.5).collect();
        let mut tape = GradientTape::new();
        let a = tape.leaf(tensor(1, 4, &row));
        let b = tape.leaf(Tensor::new(1, 4, shifted).unwrap());
        let sa = tape.row_softmax(a, 1.0).unwrap();
        let sb = tape.row_softmax(b, 1.0).unwrap();
        for (x, y) in tape.value(sa).data().iter().zip(tape.value(sb).data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_non_positive_temperature() {
        let mut tape = GradientTape::new();
        let x = tape.leaf(tensor(1, 2, &[1.0, 2.0]));
        assert!(tape.row_softmax(x, 0.0).is_err());
        assert!(tape.row_softmax(x, -1.0).is_err());
    }

    #[test]
    fn elu_fixed_points() {
        let mut tape = GradientTape::new();
        let x = tape.leaf(tensor(1, 3, &[0.0, 1.0, -1.0]));
        let y = tape.elu(x);
        let v = tape.value(y);
        assert_eq!(v.get(0, 0), 0.0);
        assert_eq!(v.get(0, 1), 1.0);
        assert!((v.get(0, 2) - ((-1.0_f64).exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn concat_single_part_is_identity() {
        let mut tape = GradientTape::new();
        let a = tape.leaf(tensor(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let c = tape.concat_cols(&[a]).unwrap();
        assert_eq!(tape.value(c), tape.value(a));
    }

    #[test]
    fn concat_two_column_vectors() {
        let mut tape = GradientTape::new();
        let a = tape.leaf(tensor(2, 1, &[1.0, 2.0]));
        let b = tape.leaf(tensor(2, 1, &[3.0, 4.0]));
        let c = tape.concat_cols(&[a, b]).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn concat_rejects_row_mismatch() {
        let mut tape = GradientTape::new();
        let a = tape.leaf(Tensor::zeros(2, 1));
        let b = tape.leaf(Tensor::zeros(3, 1));
        assert!(tape.concat_cols(&[a, b]).is_err());
    }

    #[test]
    fn segment_mean_cases() {
        let mut tape = GradientTape::new();
        let v = tape.leaf(tensor(2, 2, &[1.0, 1.0, 3.0, 3.0]));
        let segs = Arc::new(vec![vec![0], vec![0, 1], vec![]]);
        let m = tape.segment_mean(v, segs).unwrap();
        let out = tape.value(m);
        assert_eq!(out.row(0), &[1.0, 1.0]);
        assert_eq!(out.row(1), &[2.0, 2.0]);
        assert_eq!(out.row(2), &[0.0, 0.0]); // empty segment -> zero row
    }

    #[test]
    fn segment_mean_rejects_bad_id() {
        let mut tape = GradientTape::new();
        let v = tape.leaf(Tensor::zeros(2, 2));
        assert!(tape.segment_mean(v, Arc::new(vec![vec![5]])).is_err());
    }

    #[test]
    fn row_l2_distance_cases() {
        let mut tape = GradientTape::new();
        let a = tape.leaf(tensor(2, 2, &[0.0, 0.0, 1.0, 1.0]));
        let b = tape.leaf(tensor(2, 2, &[3.0, 4.0, 1.0, 1.0]));
        let d = tape.row_l2_distance(a, b).unwrap();
        let v = tape.value(d);
        assert_eq!(v.get(0, 0), 5.0); // 3-4-5 triangle
        assert_eq!(v.get(1, 0), 0.0); // coincident rows

        // subgradient at the coincident row is zero, no NaN
        let loss = tape.sum_all(d);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(a).all_finite());
        assert_eq!(grads.get(a).row(1), &[0.0, 0.0]);
    }

    #[test]
    fn row_normalize_unit_rows() {
        let mut tape = GradientTape::new();
        let x = tape.leaf(tensor(2, 2, &[3.0, 4.0, 0.0, -2.0]));
        let y = tape.row_normalize(x).unwrap();
        let v = tape.value(y);
        assert_eq!(v.row(0), &[0.6, 0.8]);
        assert_eq!(v.row(1), &[0.0, -1.0]);

        let zero = tape.leaf(tensor(1, 2, &[0.0, 0.0]));
        assert!(tape.row_normalize(zero).is_err());
    }

    #[test]
    fn cosine_sim_orthogonal() {
        let mut tape = GradientTape::new();
        let a = tape.leaf(tensor(1, 2, &[1.0, 0.0]));
        let b = tape.leaf(tensor(1, 2, &[0.0, 1.0]));
        let m = tape.cosine_sim_matrix(a, b).unwrap();
        assert_eq!(tape.value(m).scalar_value(), 0.0);
    }

    #[test]
    fn cosine_sim_matches_scalar_oracle() {
        let a = tensor(2, 3, &[0.3, -1.0, 2.0, 1.5, 0.2, -0.7]);
        let b = tensor(2, 3, &[-0.4, 0.9, 1.1, 2.0, -0.3, 0.5]);
        let mut tape = GradientTape::new();
        let na = tape.leaf(a.clone());
        let nb = tape.leaf(b.clone());
        let m = tape.cosine_sim_matrix(na, nb).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                // independent per-pair cosine: dot / (|a||b|) by scalar loops
                let dot: f64 = a.row(i).iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
                let pa: f64 = a.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
                let pb: f64 = b.row(j).iter().map(|x| x * x).sum::<f64>().sqrt();
                let expect = dot / (pa * pb);
                assert!((tape.value(m).get(i, j) - expect).abs() < 1e-14);
                assert!(tape.value(m).get(i, j).abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn gather_rows_and_backward_scatter() {
        let mut tape = GradientTape::new();
        let x = tape.leaf(tensor(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let g = tape.gather_rows(x, Arc::new(vec![2, 0, 2])).unwrap();
        assert_eq!(tape.value(g).row(0), &[5.0, 6.0]);
        let loss = tape.sum_all(g);
        let grads = tape.backward(loss).unwrap();
        // row 2 gathered twice, row 1 never
        assert_eq!(grads.get(x).data(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn segment_softmax_sums_to_one_per_segment() {
        let mut tape = GradientTape::new();
        let x = tape.leaf(tensor(5, 1, &[0.1, 0.9, -0.5, 2.0, 2.0]));
        let s = tape.segment_softmax(x, Arc::new(vec![0, 3, 5])).unwrap();
        let v = tape.value(s);
        let s1: f64 = (0..3).map(|r| v.get(r, 0)).sum();
        let s2: f64 = (3..5).map(|r| v.get(r, 0)).sum();
        assert!((s1 - 1.0).abs() < 1e-12);
        assert!((s2 - 1.0).abs() < 1e-12);
        assert_eq!(v.get(3, 0), v.get(4, 0)); // identical logits share weight
    }
}
