//! Reverse-mode differentiation over row-major 2-D matrices, with just the
//! operations a pre-norm transformer needs.

use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Var(usize);

/// Which query rows attend to which key rows. Every pair is one sequence
/// of the packed batch.
#[derive(Debug, Clone)]
pub(crate) struct AttentionPlan {
    pub pairs: Vec<(Range<usize>, Range<usize>)>,
    pub heads: usize,
    pub causal: bool,
}

enum Op {
    Param(usize),
    Input,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    Dropout {
        x: Var,
        mask: Array2<f64>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        plan: AttentionPlan,
        probs: Vec<Array2<f64>>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Array2<f64>,
    },
}

struct Node {
    value: Option<Array2<f64>>,
    op: Op,
    needs_grad: bool,
}

pub(crate) struct Tape<'p> {
    params: &'p [Array2<f64>],
    param_nodes: Vec<Option<Var>>,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Array2<f64>]) -> Self {
        Self {
            params,
            param_nodes: vec![None; params.len()],
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(value), _) => value,
            (None, Op::Param(i)) => &self.params[*i],
            _ => unreachable!("node without value"),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op, parents: &[Var]) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, index: usize) -> Var {
        if let Some(v) = self.param_nodes[index] {
            return v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(index),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[index] = Some(v);
        v
    }

    #[allow(dead_code)]
    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op: Op::Input,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(&self.value(b).t());
        self.push(out, Op::MatMulBt(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b), &[a, b])
    }

    /// Adds the `1 × n` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::AddRow(a, b), &[a, b])
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(gelu);
        self.push(out, Op::Gelu(a), &[a])
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let cols = xv.ncols() as f64;
        let mean = xv.sum_axis(Axis(1)) / cols;
        let mut xhat = xv - &mean.view().insert_axis(Axis(1));
        let var = xhat.mapv(|v| v * v).sum_axis(Axis(1)) / cols;
        let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
        xhat *= &inv_std.view().insert_axis(Axis(1));
        let out = &xhat * self.value(gain) + self.value(bias);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            &[x, gain, bias],
        )
    }

    /// Selects rows `ids` of `table`.
    pub fn gather(&mut self, table: Var, ids: Vec<usize>) -> Var {
        let t = self.value(table);
        let mut out = Array2::zeros((ids.len(), t.ncols()));
        for (mut row, &id) in out.rows_mut().into_iter().zip(&ids) {
            row.assign(&t.row(id));
        }
        self.push(out, Op::Gather { table, ids }, &[table])
    }

    /// Multiplies by a precomputed mask (entries 0 or 1/keep).
    pub fn dropout(&mut self, x: Var, mask: Array2<f64>) -> Var {
        let out = self.value(x) * &mask;
        self.push(out, Op::Dropout { x, mask }, &[x])
    }

    /// Scaled dot-product attention with `plan.heads` heads over the column
    /// blocks of `q`, `k` and `v`.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, plan: &AttentionPlan) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let dh = qv.ncols() / plan.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Array2::zeros((qv.nrows(), vv.ncols()));
        let mut probs = Vec::with_capacity(plan.pairs.len() * plan.heads);
        for (qr, kr) in &plan.pairs {
            for h in 0..plan.heads {
                let cols = h * dh..(h + 1) * dh;
                let qh = qv.slice(s![qr.clone(), cols.clone()]);
                let kh = kv.slice(s![kr.clone(), cols.clone()]);
                let vh = vv.slice(s![kr.clone(), cols.clone()]);
                let mut scores = qh.dot(&kh.t());
                scores *= scale;
                if plan.causal {
                    for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
                        row.slice_mut(s![i + 1..]).fill(f64::NEG_INFINITY);
                    }
                }
                softmax_rows_in_place(&mut scores);
                out.slice_mut(s![qr.clone(), cols]).assign(&scores.dot(&vh));
                probs.push(scores);
            }
        }
        self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                plan: plan.clone(),
                probs,
            },
            &[q, k, v],
        )
    }

    /// Summed negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`; a `1 × 1` result.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<usize>) -> Var {
        let lv = self.value(logits);
        let mut probs = lv.to_owned();
        softmax_rows_in_place(&mut probs);
        let logp = log_softmax_rows(lv.view());
        let nll: f64 = targets.iter().enumerate().map(|(r, &t)| -logp[[r, t]]).sum();
        self.push(
            Array2::from_elem((1, 1), nll),
            Op::CrossEntropy { logits, targets, probs },
            &[logits],
        )
    }

    /// Gradients of the scalar `root` with respect to every parameter that
    /// took part in the computation (others are `None`).
    pub fn backward(&self, root: Var) -> Vec<Option<Array2<f64>>> {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Array2::ones(self.value(root).raw_dim()));
        let mut param_grads = vec![None; self.params.len()];

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Param(i) => param_grads[*i] = Some(g),
                Op::Input => {}
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let da = g.dot(&self.value(*b).t());
                        self.acc(&mut grads, *a, da);
                    }
                    if self.needs(*b) {
                        let db = self.value(*a).t().dot(&g);
                        self.acc(&mut grads, *b, db);
                    }
                }
                Op::MatMulBt(a, b) => {
                    if self.needs(*a) {
                        let da = g.dot(self.value(*b));
                        self.acc(&mut grads, *a, da);
                    }
                    if self.needs(*b) {
                        let db = g.t().dot(self.value(*a));
                        self.acc(&mut grads, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        self.acc(&mut grads, *b, g.clone());
                    }
                    self.acc(&mut grads, *a, g);
                }
                Op::AddRow(a, b) => {
                    if self.needs(*b) {
                        self.acc(&mut grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    self.acc(&mut grads, *a, g);
                }
                Op::Gelu(a) => {
                    let mut da = g;
                    Zip::from(&mut da)
                        .and(self.value(*a))
                        .for_each(|d, &x| *d *= gelu_grad(x));
                    self.acc(&mut grads, *a, da);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    if self.needs(*gain) {
                        let dg = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                        self.acc(&mut grads, *gain, dg);
                    }
                    if self.needs(*bias) {
                        self.acc(&mut grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.needs(*x) {
                        let dxhat = &g * self.value(*gain);
                        let cols = dxhat.ncols() as f64;
                        let mean_d = dxhat.sum_axis(Axis(1)) / cols;
                        let mean_dx = (&dxhat * xhat).sum_axis(Axis(1)) / cols;
                        let mut dx = dxhat;
                        dx -= &mean_d.insert_axis(Axis(1));
                        dx -= &(xhat * &mean_dx.insert_axis(Axis(1)));
                        dx *= &inv_std.view().insert_axis(Axis(1));
                        self.acc(&mut grads, *x, dx);
                    }
                }
                Op::Gather { table, ids } => {
                    let mut dt = Array2::zeros(self.value(*table).raw_dim());
                    for (row, &id) in g.rows().into_iter().zip(ids) {
                        let mut target = dt.row_mut(id);
                        target += &row;
                    }
                    self.acc(&mut grads, *table, dt);
                }
                Op::Dropout { x, mask } => self.acc(&mut grads, *x, g * mask),
                Op::Attention { q, k, v, plan, probs } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let dh = qv.ncols() / plan.heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut dq = Array2::zeros(qv.raw_dim());
                    let mut dk = Array2::zeros(kv.raw_dim());
                    let mut dv = Array2::zeros(vv.raw_dim());
                    let mut p_iter = probs.iter();
                    for (qr, kr) in &plan.pairs {
                        for h in 0..plan.heads {
                            let p = p_iter.next().expect("one probability block per head");
                            let cols = h * dh..(h + 1) * dh;
                            let go = g.slice(s![qr.clone(), cols.clone()]);
                            let qh = qv.slice(s![qr.clone(), cols.clone()]);
                            let kh = kv.slice(s![kr.clone(), cols.clone()]);
                            let vh = vv.slice(s![kr.clone(), cols.clone()]);
                            let mut dvh = dv.slice_mut(s![kr.clone(), cols.clone()]);
                            dvh += &p.t().dot(&go);
                            let dp = go.dot(&vh.t());
                            let row_dot = (&dp * p).sum_axis(Axis(1));
                            let mut ds = dp - &row_dot.insert_axis(Axis(1));
                            ds *= p;
                            ds *= scale;
                            let mut dqh = dq.slice_mut(s![qr.clone(), cols.clone()]);
                            dqh += &ds.dot(&kh);
                            let mut dkh = dk.slice_mut(s![kr.clone(), cols]);
                            dkh += &ds.t().dot(&qh);
                        }
                    }
                    if self.needs(*q) {
                        self.acc(&mut grads, *q, dq);
                    }
                    if self.needs(*k) {
                        self.acc(&mut grads, *k, dk);
                    }
                    if self.needs(*v) {
                        self.acc(&mut grads, *v, dv);
                    }
                }
                Op::CrossEntropy { logits, targets, probs } => {
                    let mut dl = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        dl[[r, t]] -= 1.0;
                    }
                    dl *= g[[0, 0]];
                    self.acc(&mut grads, *logits, dl);
                }
            }
        }
        param_grads
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn acc(&self, grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => *existing += &g,
            slot => *slot = Some(g),
        }
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn softmax_rows_in_place(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Numerically stable row-wise log-softmax.
pub(crate) fn log_softmax_rows(m: ArrayView2<f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central differences of `f` with respect to every entry of `params`.
    fn numeric_grads(params: &[Array2<f64>], f: impl Fn(&[Array2<f64>]) -> f64) -> Vec<Array2<f64>> {
        let h = 1e-6;
        let mut out = Vec::new();
        let mut work = params.to_vec();
        for i in 0..params.len() {
            let mut g = Array2::zeros(params[i].raw_dim());
            for idx in 0..params[i].len() {
                let (r, c) = (idx / params[i].ncols(), idx % params[i].ncols());
                let orig = work[i][[r, c]];
                work[i][[r, c]] = orig + h;
                let up = f(&work);
                work[i][[r, c]] = orig - h;
                let down = f(&work);
                work[i][[r, c]] = orig;
                g[[r, c]] = (up - down) / (2.0 * h);
            }
            out.push(g);
        }
        out
    }

    fn assert_close(analytic: &[Option<Array2<f64>>], numeric: &[Array2<f64>]) {
        for (a, n) in analytic.iter().zip(numeric) {
            let a = a.as_ref().expect("gradient present");
            for (x, y) in a.iter().zip(n) {
                assert!((x - y).abs() <= 1e-6 * (1.0 + y.abs()), "analytic {x} vs numeric {y}");
            }
        }
    }

    #[test]
    fn layer_norm_gelu_matmul_gradients() {
        let params = vec![
            array![[0.3, -1.2, 0.5], [1.1, 0.2, -0.7]],
            array![[0.4, -0.3], [0.9, 0.1], [-0.5, 0.8]],
            array![[1.2, 0.7]],
            array![[0.1, -0.2]],
        ];
        let f = |p: &[Array2<f64>]| {
            let mut t = Tape::new(p);
            let (x, w, g, b) = (t.param(0), t.param(1), t.param(2), t.param(3));
            let h = t.matmul(x, w);
            let h = t.layer_norm(h, g, b);
            let h = t.gelu(h);
            let out = t.matmul(h, x);
            let loss = t.cross_entropy(out, vec![2, 0]);
            (t.value(loss)[[0, 0]], t.backward(loss))
        };
        let analytic = f(&params).1;
        let numeric = numeric_grads(&params, |p| f(p).0);
        assert_close(&analytic, &numeric);
    }

    #[test]
    fn attention_gather_gradients() {
        let params = vec![
            array![
                [0.2, -0.4, 0.6, 0.1],
                [0.5, 0.3, -0.2, 0.9],
                [-0.7, 0.8, 0.4, -0.1],
                [0.3, 0.3, 0.1, 0.2]
            ],
            array![
                [0.1, 0.4, -0.3, 0.2],
                [0.6, -0.5, 0.2, 0.7],
                [0.0, 0.9, -0.8, 0.3],
                [0.2, -0.1, 0.5, 0.4]
            ],
            array![[0.05, -0.1, 0.2, 0.0]],
        ];
        let plan = AttentionPlan {
            pairs: vec![(0..3, 0..3), (3..5, 3..5)],
            heads: 2,
            causal: true,
        };
        let cross = AttentionPlan {
            pairs: vec![(0..3, 3..5), (3..5, 0..3)],
            heads: 2,
            causal: false,
        };
        let f = |p: &[Array2<f64>]| {
            let mut t = Tape::new(p);
            let (e, w, b) = (t.param(0), t.param(1), t.param(2));
            let x = t.gather(e, vec![1, 0, 2, 2, 3]);
            let q = t.matmul(x, w);
            let q = t.add_row(q, b);
            let a = t.attention(q, x, x, &plan);
            let c = t.attention(a, q, x, &cross);
            let y = t.add(a, c);
            let logits = t.matmul_bt(y, e);
            let loss = t.cross_entropy(logits, vec![0, 1, 3, 2, 1]);
            (t.value(loss)[[0, 0]], t.backward(loss))
        };
        let analytic = f(&params).1;
        let numeric = numeric_grads(&params, |p| f(p).0);
        assert_close(&analytic, &numeric);
    }

    #[test]
    fn causal_attention_ignores_future_rows() {
        let params = vec![array![[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]];
        let plan = AttentionPlan {
            pairs: vec![(0..3, 0..3)],
            heads: 1,
            causal: true,
        };
        let mut t = Tape::new(&params);
        let x = t.param(0);
        let a = t.attention(x, x, x, &plan);
        assert_eq!(t.value(a).row(0).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn log_softmax_is_stable() {
        let m = array![[1000.0, 1000.0], [-1000.0, 0.0]];
        let l = log_softmax_rows(m.view());
        assert!((l[[0, 0]] + std::f64::consts::LN_2).abs() < 1e-12);
        assert!(l[[1, 1]].abs() < 1e-12);
        assert!(l.iter().all(|v| v.is_finite()));
    }
}
