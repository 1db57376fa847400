//! Reverse-mode autodiff over a flat op tape.
//!
//! The op set is exactly what the three architectures need: matmul, gathers
//! and segment reductions for neighborhood attention, row/segment softmax,
//! and a fused binary-cross-entropy head. Values are computed eagerly;
//! `backward` walks the tape once in reverse. Everything is deterministic:
//! no parallel reductions, accumulation in tape order.

use super::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op<F: Real> {
    Leaf {
        requires_grad: bool,
    },
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, F),
    AddBiasRow(Var, Var),
    LeakyRelu(Var, F),
    Elu(Var),
    GatherRows(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SegmentSoftmax(Var, Vec<usize>, usize),
    SegmentSum(Var, Vec<usize>),
    /// out[i,j] = a[i,j] * col[i,0]
    MulColBroadcast(Var, Var),
    RowSoftmax(Var),
    ScatterBias(Var, Vec<(usize, usize)>),
    MeanRowsSubset(Var, Vec<usize>),
    MeanStack(Vec<Var>),
    Dropout(Var, Tensor<F>),
    BceWithLogits(Var, Tensor<F>),
}

struct Node<F: Real> {
    value: Tensor<F>,
    op: Op<F>,
}

pub struct Tape<F: Real> {
    nodes: Vec<Node<F>>,
}

pub struct Gradients<F: Real> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Real> Gradients<F> {
    pub fn get(&self, v: Var) -> Option<&Tensor<F>> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Tensor<F> {
        self.grads[v.0].take().expect("no gradient for var")
    }
}

impl<F: Real> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; no gradient tracked.
    pub fn constant(&mut self, t: Tensor<F>) -> Var {
        self.push(t, Op::Leaf { requires_grad: false })
    }

    /// Parameter leaf; gradient accumulated on backward.
    pub fn param(&mut self, t: Tensor<F>) -> Var {
        self.push(t, Op::Leaf { requires_grad: true })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert!(self.value(a).same_shape(self.value(b)), "add shape");
        let mut v = self.value(a).clone();
        for (x, y) in v.data.iter_mut().zip(&self.value(b).data) {
            *x += *y;
        }
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert!(self.value(a).same_shape(self.value(b)), "mul shape");
        let mut v = self.value(a).clone();
        for (x, y) in v.data.iter_mut().zip(&self.value(b).data) {
            *x *= *y;
        }
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: F) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s))
    }

    /// X [n,d] + broadcast row b [1,d].
    pub fn add_bias_row(&mut self, x: Var, b: Var) -> Var {
        let (xv, bv) = (self.value(x), self.value(b));
        assert_eq!(bv.rows, 1);
        assert_eq!(xv.cols, bv.cols);
        let mut v = xv.clone();
        for i in 0..v.rows {
            for j in 0..v.cols {
                let add = bv.get(0, j);
                let cur = v.get(i, j);
                v.set(i, j, cur + add);
            }
        }
        self.push(v, Op::AddBiasRow(x, b))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: F) -> Var {
        let v = self
            .value(a)
            .map(|x| if x > F::ZERO { x } else { x * slope });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .map(|x| if x > F::ZERO { x } else { x.exp() - F::ONE });
        self.push(v, Op::Elu(a))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let av = self.value(a);
        let mut v = Tensor::zeros(idx.len(), av.cols);
        for (r, &src) in idx.iter().enumerate() {
            let cols = av.cols;
            v.data[r * cols..(r + 1) * cols].copy_from_slice(av.row(src));
        }
        self.push(v, Op::GatherRows(a, idx.to_vec()))
    }

    pub fn concat_rows(&mut self, vars: &[Var]) -> Var {
        let cols = self.value(vars[0]).cols;
        let rows: usize = vars.iter().map(|v| self.value(*v).rows).sum();
        let mut out = Tensor::zeros(rows, cols);
        let mut at = 0usize;
        for v in vars {
            let t = self.value(*v);
            assert_eq!(t.cols, cols);
            out.data[at..at + t.data.len()].copy_from_slice(&t.data);
            at += t.data.len();
        }
        self.push(out, Op::ConcatRows(vars.to_vec()))
    }

    pub fn concat_cols(&mut self, vars: &[Var]) -> Var {
        let rows = self.value(vars[0]).rows;
        let cols: usize = vars.iter().map(|v| self.value(*v).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        for i in 0..rows {
            let mut at = 0usize;
            for v in vars {
                let t = self.value(*v);
                assert_eq!(t.rows, rows);
                out.data[i * cols + at..i * cols + at + t.cols]
                    .copy_from_slice(t.row(i));
                at += t.cols;
            }
        }
        self.push(out, Op::ConcatCols(vars.to_vec()))
    }

    /// Column vector [m,1] of scores; softmax within each segment.
    pub fn segment_softmax(&mut self, s: Var, seg: &[usize], n_seg: usize) -> Var {
        let sv = self.value(s);
        assert_eq!(sv.cols, 1);
        assert_eq!(sv.rows, seg.len());
        let mut max = vec![F::from_f64(f64::NEG_INFINITY); n_seg];
        for (i, &g) in seg.iter().enumerate() {
            max[g] = max[g].maximum(sv.data[i]);
        }
        let mut exp = vec![F::ZERO; seg.len()];
        let mut sum = vec![F::ZERO; n_seg];
        for (i, &g) in seg.iter().enumerate() {
            let e = (sv.data[i] - max[g]).exp();
            exp[i] = e;
            sum[g] += e;
        }
        let mut v = Tensor::zeros(seg.len(), 1);
        for (i, &g) in seg.iter().enumerate() {
            v.data[i] = exp[i] / sum[g];
        }
        self.push(v, Op::SegmentSoftmax(s, seg.to_vec(), n_seg))
    }

    /// Scatter-add rows of `v` into `n_seg` output rows by segment id.
    pub fn segment_sum(&mut self, v: Var, seg: &[usize], n_seg: usize) -> Var {
        let vv = self.value(v);
        assert_eq!(vv.rows, seg.len());
        let mut out = Tensor::zeros(n_seg, vv.cols);
        for (i, &g) in seg.iter().enumerate() {
            let cols = vv.cols;
            let src = vv.row(i).to_vec();
            for (d, s) in out.data[g * cols..(g + 1) * cols].iter_mut().zip(&src) {
                *d += *s;
            }
        }
        self.push(out, Op::SegmentSum(v, seg.to_vec()))
    }

    /// Scales each row of `a` by the matching entry of the column vector.
    pub fn mul_col_broadcast(&mut self, a: Var, col: Var) -> Var {
        let (av, cv) = (self.value(a), self.value(col));
        assert_eq!(cv.cols, 1);
        assert_eq!(av.rows, cv.rows);
        let mut v = av.clone();
        for i in 0..v.rows {
            let c = cv.data[i];
            for j in 0..v.cols {
                let cur = v.get(i, j);
                v.set(i, j, cur * c);
            }
        }
        self.push(v, Op::MulColBroadcast(a, col))
    }

    pub fn row_softmax(&mut self, s: Var) -> Var {
        let sv = self.value(s);
        let mut v = sv.clone();
        for i in 0..sv.rows {
            let row = &mut v.data[i * sv.cols..(i + 1) * sv.cols];
            let mut max = F::from_f64(f64::NEG_INFINITY);
            for x in row.iter() {
                max = max.maximum(*x);
            }
            let mut sum = F::ZERO;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x = *x / sum;
            }
        }
        self.push(v, Op::RowSoftmax(s))
    }

    /// Builds an [n,n] matrix with `values[k]` added at `positions[k]`.
    pub fn scatter_bias(&mut self, values: Var, positions: &[(usize, usize)], n: usize) -> Var {
        let vv = self.value(values);
        assert_eq!(vv.cols, 1);
        assert_eq!(vv.rows, positions.len());
        let mut out = Tensor::zeros(n, n);
        for (k, &(i, j)) in positions.iter().enumerate() {
            let cur = out.get(i, j);
            out.set(i, j, cur + vv.data[k]);
        }
        self.push(out, Op::ScatterBias(values, positions.to_vec()))
    }

    /// Mean of the selected rows, as a [1,d] tensor.
    pub fn mean_rows_subset(&mut self, a: Var, idx: &[usize]) -> Var {
        let av = self.value(a);
        assert!(!idx.is_empty());
        let mut out = Tensor::zeros(1, av.cols);
        for &r in idx {
            for j in 0..av.cols {
                out.data[j] += av.get(r, j);
            }
        }
        let inv = F::ONE / F::from_f64(idx.len() as f64);
        for x in &mut out.data {
            *x *= inv;
        }
        self.push(out, Op::MeanRowsSubset(a, idx.to_vec()))
    }

    /// Elementwise mean of same-shape tensors (head averaging).
    pub fn mean_stack(&mut self, vars: &[Var]) -> Var {
        assert!(!vars.is_empty());
        let mut out = self.value(vars[0]).clone();
        for v in &vars[1..] {
            assert!(out.same_shape(self.value(*v)));
            for (x, y) in out.data.iter_mut().zip(&self.value(*v).data) {
                *x += *y;
            }
        }
        let inv = F::ONE / F::from_f64(vars.len() as f64);
        for x in &mut out.data {
            *x *= inv;
        }
        self.push(out, Op::MeanStack(vars.to_vec()))
    }

    /// Multiplies by a pre-scaled dropout mask (entries 0 or 1/(1-p)).
    pub fn dropout(&mut self, a: Var, mask: Tensor<F>) -> Var {
        assert!(self.value(a).same_shape(&mask));
        let mut v = self.value(a).clone();
        for (x, m) in v.data.iter_mut().zip(&mask.data) {
            *x *= *m;
        }
        self.push(v, Op::Dropout(a, mask))
    }

    /// Mean binary cross-entropy over all logit entries, with the numerically
    /// stable max(x,0) - x*y + ln(1 + exp(-|x|)) form. Returns a [1,1] value.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Tensor<F>) -> Var {
        let lv = self.value(logits);
        assert!(lv.same_shape(&targets));
        let mut total = F::ZERO;
        for (x, y) in lv.data.iter().zip(&targets.data) {
            let term = x.maximum(F::ZERO) - *x * *y
                + (F::ONE + (-x.abs()).exp()).ln();
            total += term;
        }
        let mut v = Tensor::zeros(1, 1);
        v.data[0] = total / F::from_f64(lv.data.len() as f64);
        self.push(v, Op::BceWithLogits(logits, targets))
    }

    /// Reverse pass from a [1,1] loss node.
    pub fn backward(&mut self, loss: Var) -> Gradients<F> {
        let mut grads: Vec<Option<Tensor<F>>> = vec![None; self.nodes.len()];
        let mut seed = Tensor::zeros(1, 1);
        seed.data[0] = F::ONE;
        assert_eq!(self.value(loss).rows * self.value(loss).cols, 1);
        grads[loss.0] = Some(seed);

        for id in (0..self.nodes.len()).rev() {
            let Some(grad) = grads[id].take() else { continue };
            // Re-insert so callers can read grads of interior nodes too.
            grads[id] = Some(grad.clone());
            match &self.nodes[id].op {
                Op::Leaf { .. } => {}
                Op::MatMul(a, b) => {
                    let at = self.nodes[a.0].value.transpose();
                    let bt = self.nodes[b.0].value.transpose();
                    let da = grad.matmul(&bt);
                    let db = at.matmul(&grad);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, grad.transpose());
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, grad.clone());
                    accumulate(&mut grads, *b, grad);
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[a.0].value;
                    let bv = &self.nodes[b.0].value;
                    let mut da = grad.clone();
                    for (x, y) in da.data.iter_mut().zip(&bv.data) {
                        *x *= *y;
                    }
                    let mut db = grad;
                    for (x, y) in db.data.iter_mut().zip(&av.data) {
                        *x *= *y;
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, s) => {
                    let da = grad.map(|x| x * *s);
                    accumulate(&mut grads, *a, da);
                }
                Op::AddBiasRow(x, b) => {
                    let mut db = Tensor::zeros(1, grad.cols);
                    for i in 0..grad.rows {
                        for j in 0..grad.cols {
                            db.data[j] += grad.get(i, j);
                        }
                    }
                    accumulate(&mut grads, *x, grad);
                    accumulate(&mut grads, *b, db);
                }
                Op::LeakyRelu(a, slope) => {
                    let av = &self.nodes[a.0].value;
                    let mut da = grad;
                    for (g, x) in da.data.iter_mut().zip(&av.data) {
                        if *x <= F::ZERO {
                            *g *= *slope;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Elu(a) => {
                    let av = &self.nodes[a.0].value;
                    let mut da = grad;
                    for (g, x) in da.data.iter_mut().zip(&av.data) {
                        if *x <= F::ZERO {
                            *g *= x.exp();
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::GatherRows(a, idx) => {
                    let av = &self.nodes[a.0].value;
                    let mut da = Tensor::zeros(av.rows, av.cols);
                    for (r, &src) in idx.iter().enumerate() {
                        for j in 0..grad.cols {
                            let cur = da.get(src, j);
                            da.set(src, j, cur + grad.get(r, j));
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatRows(vars) => {
                    let vars = vars.clone();
                    let mut at = 0usize;
                    for v in vars {
                        let t = &self.nodes[v.0].value;
                        let mut dv = Tensor::zeros(t.rows, t.cols);
                        dv.data
                            .copy_from_slice(&grad.data[at..at + t.data.len()]);
                        at += t.data.len();
                        accumulate(&mut grads, v, dv);
                    }
                }
                Op::ConcatCols(vars) => {
                    let vars = vars.clone();
                    let mut at = 0usize;
                    for v in vars {
                        let t = &self.nodes[v.0].value;
                        let mut dv = Tensor::zeros(t.rows, t.cols);
                        for i in 0..t.rows {
                            for j in 0..t.cols {
                                dv.set(i, j, grad.get(i, at + j));
                            }
                        }
                        at += t.cols;
                        accumulate(&mut grads, v, dv);
                    }
                }
                Op::SegmentSoftmax(s, seg, n_seg) => {
                    let alpha = &self.nodes[id].value;
                    let mut dot = vec![F::ZERO; *n_seg];
                    for (i, &g) in seg.iter().enumerate() {
                        dot[g] += alpha.data[i] * grad.data[i];
                    }
                    let mut ds = Tensor::zeros(alpha.rows, 1);
                    for (i, &g) in seg.iter().enumerate() {
                        ds.data[i] = alpha.data[i] * (grad.data[i] - dot[g]);
                    }
                    accumulate(&mut grads, *s, ds);
                }
                Op::SegmentSum(v, seg) => {
                    let vv = &self.nodes[v.0].value;
                    let mut dv = Tensor::zeros(vv.rows, vv.cols);
                    for (i, &g) in seg.iter().enumerate() {
                        for j in 0..vv.cols {
                            dv.set(i, j, grad.get(g, j));
                        }
                    }
                    accumulate(&mut grads, *v, dv);
                }
                Op::MulColBroadcast(a, col) => {
                    let av = &self.nodes[a.0].value;
                    let cv = &self.nodes[col.0].value;
                    let mut da = grad.clone();
                    let mut dcol = Tensor::zeros(cv.rows, 1);
                    for i in 0..av.rows {
                        let c = cv.data[i];
                        let mut acc = F::ZERO;
                        for j in 0..av.cols {
                            acc += grad.get(i, j) * av.get(i, j);
                            let g = da.get(i, j);
                            da.set(i, j, g * c);
                        }
                        dcol.data[i] = acc;
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *col, dcol);
                }
                Op::RowSoftmax(s) => {
                    let alpha = &self.nodes[id].value;
                    let mut ds = Tensor::zeros(alpha.rows, alpha.cols);
                    for i in 0..alpha.rows {
                        let mut dot = F::ZERO;
                        for j in 0..alpha.cols {
                            dot += alpha.get(i, j) * grad.get(i, j);
                        }
                        for j in 0..alpha.cols {
                            ds.set(i, j, alpha.get(i, j) * (grad.get(i, j) - dot));
                        }
                    }
                    accumulate(&mut grads, *s, ds);
                }
                Op::ScatterBias(v, positions) => {
                    let mut dv = Tensor::zeros(positions.len(), 1);
                    for (k, &(i, j)) in positions.iter().enumerate() {
                        dv.data[k] = grad.get(i, j);
                    }
                    accumulate(&mut grads, *v, dv);
                }
                Op::MeanRowsSubset(a, idx) => {
                    let av = &self.nodes[a.0].value;
                    let inv = F::ONE / F::from_f64(idx.len() as f64);
                    let mut da = Tensor::zeros(av.rows, av.cols);
                    for &r in idx {
                        for j in 0..av.cols {
                            let cur = da.get(r, j);
                            da.set(r, j, cur + grad.data[j] * inv);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::MeanStack(vars) => {
                    let vars = vars.clone();
                    let inv = F::ONE / F::from_f64(vars.len() as f64);
                    for v in vars {
                        let dv = grad.map(|x| x * inv);
                        accumulate(&mut grads, v, dv);
                    }
                }
                Op::Dropout(a, mask) => {
                    let mut da = grad;
                    for (g, m) in da.data.iter_mut().zip(&mask.data) {
                        *g *= *m;
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::BceWithLogits(logits, targets) => {
                    let lv = &self.nodes[logits.0].value;
                    let scale = grad.data[0] / F::from_f64(lv.data.len() as f64);
                    let mut dl = Tensor::zeros(lv.rows, lv.cols);
                    for (k, (x, y)) in lv.data.iter().zip(&targets.data).enumerate() {
                        let sig = F::ONE / (F::ONE + (-*x).exp());
                        dl.data[k] = (sig - *y) * scale;
                    }
                    accumulate(&mut grads, *logits, dl);
                }
            }
        }

        // Drop gradients of non-grad leaves to keep semantics tight.
        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { requires_grad: false } = node.op {
                grads[id] = None;
            }
        }
        Gradients { grads }
    }
}

fn accumulate<F: Real>(grads: &mut [Option<Tensor<F>>], v: Var, g: Tensor<F>) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (x, y) in existing.data.iter_mut().zip(&g.data) {
                *x += *y;
            }
        }
        slot => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central finite differences on every entry of every parameter. `build`
    /// must push its parameters first, in order, so Var(i) is parameter i.
    fn finite_difference_check(
        build: impl Fn(&mut Tape<f64>, &[Tensor<f64>]) -> Var,
        params: &[Tensor<f64>],
        tol: f64,
    ) {
        let mut tape = Tape::new();
        let loss = build(&mut tape, params);
        let mut grads = tape.backward(loss);

        let eps = 1e-5;
        for (pi, p) in params.iter().enumerate() {
            let analytic = grads.take(Var(pi));
            for k in 0..p.data.len() {
                let mut plus = params.to_vec();
                plus[pi].data[k] += eps;
                let mut tape_p = Tape::new();
                let lp = build(&mut tape_p, &plus);
                let fp = tape_p.value(lp).data[0];

                let mut minus = params.to_vec();
                minus[pi].data[k] -= eps;
                let mut tape_m = Tape::new();
                let lm = build(&mut tape_m, &minus);
                let fm = tape_m.value(lm).data[0];

                let numeric = (fp - fm) / (2.0 * eps);
                let a = analytic.data[k];
                let denom = a.abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (a - numeric).abs() / denom < tol,
                    "param {pi}[{k}]: analytic {a} vs numeric {numeric}"
                );
            }
        }
    }

    fn rand_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
        let mut t = Tensor::zeros(rows, cols);
        for v in &mut t.data {
            *v = rng.gen::<f64>() * 2.0 - 1.0;
        }
        t
    }

    #[test]
    fn gradcheck_attention_like_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_tensor(&mut rng, 4, 3);
        let w = rand_tensor(&mut rng, 3, 2);
        let a_vec = rand_tensor(&mut rng, 2, 1);
        let mut targets = Tensor::zeros(1, 2);
        targets.data = vec![1.0, 0.0];

        let src = vec![0, 1, 2, 3, 1, 2];
        let dst = vec![1, 0, 3, 2, 2, 1];
        let build = move |tape: &mut Tape<f64>, params: &[Tensor<f64>]| {
            let x = tape.param(params[0].clone());
            let w = tape.param(params[1].clone());
            let a = tape.param(params[2].clone());
            let h = tape.matmul(x, w);
            let hs = tape.gather_rows(h, &src);
            let scores = tape.matmul(hs, a);
            let scores = tape.leaky_relu(scores, 0.2);
            let alpha = tape.segment_softmax(scores, &dst, 4);
            let mut wide = alpha;
            // broadcast alpha over message columns via mul with gathered h
            let cols = tape.value(hs).cols;
            if cols > 1 {
                let copies: Vec<Var> = (0..cols).map(|_| wide).collect();
                wide = tape.concat_cols(&copies);
            }
            let weighted = tape.mul(wide, hs);
            let out = tape.segment_sum(weighted, &dst, 4);
            let pooled = tape.mean_rows_subset(out, &[0, 2]);
            tape.bce_with_logits(pooled, targets.clone())
        };
        finite_difference_check(build, &[x, w, a_vec], 1e-4);
    }

    #[test]
    fn gradcheck_row_softmax_scatter_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = rand_tensor(&mut rng, 3, 2);
        let k = rand_tensor(&mut rng, 3, 2);
        let bias_vals = rand_tensor(&mut rng, 2, 1);
        let mut targets = Tensor::zeros(1, 2);
        targets.data = vec![0.0, 1.0];
        let positions = vec![(0usize, 1usize), (1usize, 2usize)];

        let build = move |tape: &mut Tape<f64>, params: &[Tensor<f64>]| {
            let q = tape.param(params[0].clone());
            let k = tape.param(params[1].clone());
            let b = tape.param(params[2].clone());
            let kt = tape.transpose(k);
            let scores = tape.matmul(q, kt);
            let bias = tape.scatter_bias(b, &positions, 3);
            let biased = tape.add(scores, bias);
            let alpha = tape.row_softmax(biased);
            let out = tape.matmul(alpha, k);
            let pooled = tape.mean_rows_subset(out, &[0, 1, 2]);
            tape.bce_with_logits(pooled, targets.clone())
        };
        finite_difference_check(build, &[q, k, bias_vals], 1e-4);
    }

    #[test]
    fn gradcheck_elu_dropout_bias_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = rand_tensor(&mut rng, 3, 4);
        let w = rand_tensor(&mut rng, 4, 2);
        let b = rand_tensor(&mut rng, 1, 2);
        let mut targets = Tensor::zeros(1, 2);
        targets.data = vec![1.0, 1.0];
        let mut mask = Tensor::zeros(3, 2);
        // Fixed mask so the function stays deterministic under perturbation.
        mask.data = vec![2.0, 0.0, 2.0, 2.0, 0.0, 2.0];

        let build = move |tape: &mut Tape<f64>, params: &[Tensor<f64>]| {
            let x = tape.param(params[0].clone());
            let w = tape.param(params[1].clone());
            let b = tape.param(params[2].clone());
            let h = tape.matmul(x, w);
            let h = tape.add_bias_row(h, b);
            let h = tape.elu(h);
            let h = tape.dropout(h, mask.clone());
            let pooled = tape.mean_rows_subset(h, &[0, 1, 2]);
            tape.bce_with_logits(pooled, targets.clone())
        };
        finite_difference_check(build, &[x, w, b], 1e-4);
    }

    #[test]
    fn segment_softmax_rows_sum_to_one() {
        let mut tape: Tape<f64> = Tape::new();
        let mut s = Tensor::zeros(5, 1);
        s.data = vec![0.3, -1.0, 2.0, 0.0, 0.7];
        let seg = vec![0, 0, 1, 1, 1];
        let sv = tape.constant(s);
        let alpha = tape.segment_softmax(sv, &seg, 2);
        let a = tape.value(alpha);
        assert!((a.data[0] + a.data[1] - 1.0).abs() < 1e-12);
        assert!((a.data[2] + a.data[3] + a.data[4] - 1.0).abs() < 1e-12);
    }
}
