use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations recorded on the tape.
///
/// Every backward rule is itself expressed with these ops, which is what
/// makes gradients differentiable a second time.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Leaf,
    /// `op(a) · op(b)`; `(true, true)` is never produced.
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a / b`, with `x / 0 = 0`.
    SafeDiv(Var, Var),
    /// `n×m + 1×m`.
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    /// Derivative mask of (leaky) ReLU. Constant almost everywhere, so it
    /// carries no gradient.
    Step(Var, f64),
    /// Square root with derivative 0 at 0.
    Sqrt(Var),
    SumAll(Var),
    /// `n×m → n×1`.
    SumRows(Var),
    /// `n×m → 1×m`.
    SumCols(Var),
    /// `1×m → n×m`.
    BroadcastRows(Var, usize),
    /// `n×1 → n×m`.
    BroadcastCols(Var, usize),
    /// `1×1 → n×m`.
    BroadcastAll(Var, usize, usize),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Append-only record of tensor operations.
///
/// Insertion order is a topological order. Values are computed eagerly when
/// a node is pushed.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn op(&self, v: Var) -> &Op {
        &self.nodes[v.0].op
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that gradients can flow into (parameters, penalised inputs).
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push_raw(Op::Leaf, value, true)
    }

    /// A leaf treated as a constant by [`Tape::grad`].
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(Op::Leaf, value, false)
    }

    fn push_raw(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op) -> Result<Var> {
        let value = self.eval(&op)?;
        let requires_grad = match op {
            Op::Leaf | Op::Step(..) => false,
            _ => op_parents(&op).iter().any(|p| self.nodes[p.0].requires_grad),
        };
        Ok(self.push_raw(op, value, requires_grad))
    }

    fn eval(&self, op: &Op) -> Result<Tensor> {
        let val = |v: &Var| &self.nodes[v.0].value;
        let same = |a: &Var, b: &Var| -> Result<()> {
            let (x, y) = (val(a), val(b));
            y.check_shape(x.rows(), x.cols())
        };
        Ok(match op {
            Op::Leaf => {
                return Err(Error::Contract("leaf nodes carry their own value".into()));
            }
            Op::MatMul { a, b, ta, tb } => {
                if *ta && *tb {
                    return Err(Error::Contract("transposed-transposed matmul".into()));
                }
                tensor::matmul(val(a), val(b), *ta, *tb)?
            }
            Op::Add(a, b) => {
                same(a, b)?;
                val(a).zip_map(val(b), |x, y| x + y)
            }
            Op::Sub(a, b) => {
                same(a, b)?;
                val(a).zip_map(val(b), |x, y| x - y)
            }
            Op::Mul(a, b) => {
                same(a, b)?;
                val(a).zip_map(val(b), |x, y| x * y)
            }
            Op::SafeDiv(a, b) => {
                same(a, b)?;
                val(a).zip_map(val(b), |x, y| if y == 0.0 { 0.0 } else { x / y })
            }
            Op::AddRow(a, r) => tensor::add_row(val(a), val(r))?,
            Op::Scale(a, c) => {
                let c = *c;
                val(a).map(|x| x * c)
            }
            Op::AddScalar(a, c) => {
                let c = *c;
                val(a).map(|x| x + c)
            }
            Op::Relu(a) => val(a).map(tensor::relu),
            Op::LeakyRelu(a, s) => {
                let s = *s;
                val(a).map(|x| tensor::leaky_relu(x, s))
            }
            Op::Tanh(a) => val(a).map(libm::tanh),
            Op::Step(a, s) => {
                let s = *s;
                val(a).map(|x| tensor::step(x, s))
            }
            Op::Sqrt(a) => val(a).map(libm::sqrt),
            Op::SumAll(a) => Tensor::scalar(val(a).sum()),
            Op::SumRows(a) => {
                let x = val(a);
                let mut out = Tensor::zeros(x.rows(), 1);
                for r in 0..x.rows() {
                    out.set(r, 0, x.row(r).iter().sum());
                }
                out
            }
            Op::SumCols(a) => {
                let x = val(a);
                let mut out = Tensor::zeros(1, x.cols());
                for r in 0..x.rows() {
                    for (o, v) in out.data_mut().iter_mut().zip(x.row(r)) {
                        *o += v;
                    }
                }
                out
            }
            Op::BroadcastRows(a, n) => {
                let x = val(a);
                x.check_shape(1, x.cols())?;
                let mut out = Tensor::zeros(*n, x.cols());
                for r in 0..*n {
                    out.row_mut(r).copy_from_slice(x.data());
                }
                out
            }
            Op::BroadcastCols(a, m) => {
                let x = val(a);
                x.check_shape(x.rows(), 1)?;
                let mut out = Tensor::zeros(x.rows(), *m);
                for r in 0..x.rows() {
                    let v = x.get(r, 0);
                    out.row_mut(r).fill(v);
                }
                out
            }
            Op::BroadcastAll(a, n, m) => {
                let x = val(a);
                x.check_shape(1, 1)?;
                Tensor::filled(*n, *m, x.get(0, 0))
            }
        })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MatMul {
            a,
            b,
            ta: false,
            tb: false,
        })
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MatMul {
            a,
            b,
            ta: false,
            tb: true,
        })
    }

    /// `aᵀ · b`
    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MatMul {
            a,
            b,
            ta: true,
            tb: false,
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Mul(a, b))
    }

    pub fn safe_div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::SafeDiv(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.push(Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.push(Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.push(Op::AddScalar(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.push(Op::LeakyRelu(a, slope))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Tanh(a))
    }

    pub fn step(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.push(Op::Step(a, slope))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Sqrt(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        self.push(Op::SumAll(a))
    }

    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        self.push(Op::SumRows(a))
    }

    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        self.push(Op::SumCols(a))
    }

    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        self.push(Op::BroadcastRows(a, n))
    }

    pub fn broadcast_cols(&mut self, a: Var, m: usize) -> Result<Var> {
        self.push(Op::BroadcastCols(a, m))
    }

    pub fn broadcast_all(&mut self, a: Var, n: usize, m: usize) -> Result<Var> {
        self.push(Op::BroadcastAll(a, n, m))
    }

    /// Mean of all entries as a `1×1` node.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        let s = self.sum_all(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Euclidean norm of each row, `n×m → n×1`. The gradient at a zero row
    /// is zero.
    pub fn row_norms(&mut self, a: Var) -> Result<Var> {
        let sq = self.mul(a, a)?;
        let s = self.sum_rows(sq)?;
        self.sqrt(s)
    }

    /// Gradients of the scalar `output` with respect to `wrt`.
    ///
    /// The backward pass is recorded on the tape as ordinary nodes, so a
    /// returned gradient can itself be fed into another call. Variables that
    /// `output` does not depend on get a zero constant.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        let out_val = self.value(output);
        if out_val.shape() != [1, 1] {
            return Err(Error::Contract(alloc::format!(
                "gradient requested of a non-scalar node with shape {}x{}",
                out_val.rows(),
                out_val.cols()
            )));
        }
        let mut grads: Vec<Option<Var>> = vec![None; output.0 + 1];
        if self.requires_grad(output) {
            grads[output.0] = Some(self.constant(Tensor::scalar(1.0)));
        }
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx] else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            for (parent, contrib) in self.backward_rule(Var(idx), &op, g)? {
                if !self.nodes[parent.0].requires_grad {
                    continue;
                }
                grads[parent.0] = Some(match grads[parent.0] {
                    Some(acc) => self.add(acc, contrib)?,
                    None => contrib,
                });
            }
        }
        wrt.iter()
            .map(|&w| match grads.get(w.0).copied().flatten() {
                Some(g) => Ok(g),
                None => {
                    let v = self.value(w);
                    let z = Tensor::zeros(v.rows(), v.cols());
                    Ok(self.constant(z))
                }
            })
            .collect()
    }

    /// Contributions `(parent, d output / d parent)` for one node, given
    /// the upstream gradient `g` of that node.
    fn backward_rule(&mut self, node: Var, op: &Op, g: Var) -> Result<Vec<(Var, Var)>> {
        let rg = |t: &Tape, v: Var| t.nodes[v.0].requires_grad;
        let mut out = Vec::with_capacity(2);
        match *op {
            Op::Leaf | Op::Step(..) => {}
            Op::MatMul { a, b, ta, tb } => {
                // C = op(A) op(B)
                let (need_a, need_b) = (rg(self, a), rg(self, b));
                match (ta, tb) {
                    (false, false) => {
                        if need_a {
                            out.push((a, self.matmul_nt(g, b)?));
                        }
                        if need_b {
                            out.push((b, self.matmul_tn(a, g)?));
                        }
                    }
                    (false, true) => {
                        if need_a {
                            out.push((a, self.matmul(g, b)?));
                        }
                        if need_b {
                            out.push((b, self.matmul_tn(g, a)?));
                        }
                    }
                    (true, false) => {
                        if need_a {
                            out.push((a, self.matmul_nt(b, g)?));
                        }
                        if need_b {
                            out.push((b, self.matmul(a, g)?));
                        }
                    }
                    (true, true) => {
                        return Err(Error::Contract("transposed-transposed matmul".into()))
                    }
                }
            }
            Op::Add(a, b) => {
                out.push((a, g));
                out.push((b, g));
            }
            Op::Sub(a, b) => {
                out.push((a, g));
                if rg(self, b) {
                    out.push((b, self.scale(g, -1.0)?));
                }
            }
            Op::Mul(a, b) => {
                if rg(self, a) {
                    out.push((a, self.mul(g, b)?));
                }
                if rg(self, b) {
                    out.push((b, self.mul(g, a)?));
                }
            }
            Op::SafeDiv(a, b) => {
                if rg(self, a) {
                    out.push((a, self.safe_div(g, b)?));
                }
                if rg(self, b) {
                    // d(a/b)/db = -(a/b)/b
                    let t = self.mul(g, node)?;
                    let t = self.safe_div(t, b)?;
                    out.push((b, self.scale(t, -1.0)?));
                }
            }
            Op::AddRow(a, r) => {
                out.push((a, g));
                if rg(self, r) {
                    out.push((r, self.sum_cols(g)?));
                }
            }
            Op::Scale(a, c) => out.push((a, self.scale(g, c)?)),
            Op::AddScalar(a, _) => out.push((a, g)),
            Op::Relu(a) => {
                let mask = self.step(a, 0.0)?;
                out.push((a, self.mul(g, mask)?));
            }
            Op::LeakyRelu(a, s) => {
                let mask = self.step(a, s)?;
                out.push((a, self.mul(g, mask)?));
            }
            Op::Tanh(a) => {
                // 1 - tanh²
                let sq = self.mul(node, node)?;
                let neg = self.scale(sq, -1.0)?;
                let d = self.add_scalar(neg, 1.0)?;
                out.push((a, self.mul(g, d)?));
            }
            Op::Sqrt(a) => {
                let half = self.scale(g, 0.5)?;
                out.push((a, self.safe_div(half, node)?));
            }
            Op::SumAll(a) => {
                let [n, m] = self.value(a).shape();
                out.push((a, self.broadcast_all(g, n, m)?));
            }
            Op::SumRows(a) => {
                let m = self.value(a).cols();
                out.push((a, self.broadcast_cols(g, m)?));
            }
            Op::SumCols(a) => {
                let n = self.value(a).rows();
                out.push((a, self.broadcast_rows(g, n)?));
            }
            Op::BroadcastRows(a, _) => out.push((a, self.sum_cols(g)?)),
            Op::BroadcastCols(a, _) => out.push((a, self.sum_rows(g)?)),
            Op::BroadcastAll(a, _, _) => out.push((a, self.sum_all(g)?)),
        }
        Ok(out)
    }

    /// Recomputes every non-leaf node from the recorded ops and leaf values.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut fresh = Tape::new();
        for node in &self.nodes {
            match node.op {
                Op::Leaf => {
                    fresh.push_raw(Op::Leaf, node.value.clone(), node.requires_grad);
                }
                ref op => {
                    fresh.push(op.clone())?;
                }
            }
        }
        Ok(fresh.nodes.into_iter().map(|n| n.value).collect())
    }

    /// Values of every node in insertion order.
    pub fn values(&self) -> impl Iterator<Item = &Tensor> {
        self.nodes.iter().map(|n| &n.value)
    }
}

fn op_parents(op: &Op) -> Vec<Var> {
    match *op {
        Op::Leaf => vec![],
        Op::MatMul { a, b, .. }
        | Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::SafeDiv(a, b)
        | Op::AddRow(a, b) => vec![a, b],
        Op::Scale(a, _)
        | Op::AddScalar(a, _)
        | Op::Relu(a)
        | Op::LeakyRelu(a, _)
        | Op::Tanh(a)
        | Op::Step(a, _)
        | Op::Sqrt(a)
        | Op::SumAll(a)
        | Op::SumRows(a)
        | Op::SumCols(a)
        | Op::BroadcastRows(a, _)
        | Op::BroadcastCols(a, _)
        | Op::BroadcastAll(a, _, _) => vec![a],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn linear_loss_gradient_is_input() {
        // loss = sum(W z) → dW[i][j] = z[j]
        let mut tape = Tape::new();
        let w = tape.variable(t(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]));
        let z = tape.constant(t(&[&[0.5, -1.5]]));
        let y = tape.matmul_nt(z, w).unwrap();
        let loss = tape.sum_all(y).unwrap();
        let g = tape.grad(loss, &[w]).unwrap();
        let gw = tape.value(g[0]);
        for r in gw.iter_rows() {
            assert_eq!(r, &[0.5, -1.5]);
        }
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let mut tape = Tape::new();
        let a = tape.variable(Tensor::zeros(2, 2));
        assert!(matches!(tape.grad(a, &[a]), Err(Error::Contract(_))));
    }

    #[test]
    fn unreachable_variable_gets_zero_gradient() {
        let mut tape = Tape::new();
        let a = tape.variable(Tensor::scalar(3.0));
        let b = tape.variable(Tensor::filled(2, 3, 1.0));
        let y = tape.mul(a, a).unwrap();
        let g = tape.grad(y, &[a, b]).unwrap();
        assert_eq!(tape.value(g[0]).data(), &[6.0]);
        assert_eq!(tape.value(g[1]), &Tensor::zeros(2, 3));
    }

    #[test]
    fn second_derivative_of_cube() {
        // y = x³ ⇒ y' = 3x², y'' = 6x
        let mut tape = Tape::new();
        let x = tape.variable(Tensor::scalar(2.0));
        let x2 = tape.mul(x, x).unwrap();
        let y = tape.mul(x2, x).unwrap();
        let g = tape.grad(y, &[x]).unwrap()[0];
        assert_eq!(tape.value(g).data(), &[12.0]);
        let h = tape.grad(g, &[x]).unwrap()[0];
        assert_eq!(tape.value(h).data(), &[12.0]);
    }

    #[test]
    fn sqrt_at_zero_has_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.variable(Tensor::scalar(0.0));
        let y = tape.sqrt(x).unwrap();
        let g = tape.grad(y, &[x]).unwrap()[0];
        assert_eq!(tape.value(g).data(), &[0.0]);
    }

    #[test]
    fn relu_derivative_at_zero_is_zero() {
        let mut tape = Tape::new();
        let x = tape.variable(t(&[&[-1.0, 0.0, 2.0]]));
        let y = tape.relu(x).unwrap();
        let s = tape.sum_all(y).unwrap();
        let g = tape.grad(s, &[x]).unwrap()[0];
        assert_eq!(tape.value(g).data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn replay_reproduces_values() {
        let mut tape = Tape::new();
        let x = tape.variable(t(&[&[0.3, -0.7], &[1.1, 0.2]]));
        let w = tape.variable(t(&[&[0.5, -0.25], &[2.0, 1.0]]));
        let b = tape.variable(t(&[&[0.1, -0.1]]));
        let h = tape.matmul_nt(x, w).unwrap();
        let h = tape.add_row(h, b).unwrap();
        let h = tape.tanh(h).unwrap();
        let n = tape.row_norms(h).unwrap();
        let l = tape.mean(n).unwrap();
        tape.grad(l, &[w, b]).unwrap();
        let replayed = tape.replay().unwrap();
        assert_eq!(replayed.len(), tape.len());
        for (a, b) in replayed.iter().zip(tape.values()) {
            assert_eq!(a, b);
        }
    }
}
