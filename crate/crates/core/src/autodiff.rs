//! Reverse-mode automatic differentiation over [`Array`] values.
//!
//! A [`Graph`] is a tape of nodes. Each differentiable op records its output
//! value plus a backward rule: a closure that maps the output gradient to one
//! gradient contribution per parent. Graphs are built per batch and discarded;
//! nothing is reused across training steps.
//!
//! Every op validates that its output is finite — a NaN or Inf anywhere is
//! reported as a numeric error at the op that produced it.

use crate::array::Array;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

type BackwardFn = Box<dyn Fn(&Array) -> Vec<Array>>;

struct NodeEntry {
    value: Array,
    grad: Option<Array>,
    parents: Vec<NodeId>,
    backward: Option<BackwardFn>,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<NodeEntry>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id.0].value
    }

    /// Accumulated gradient, if backward reached this node.
    pub fn grad(&self, id: NodeId) -> Option<&Array> {
        self.nodes[id.0].grad.as_ref()
    }

    /// Gradient as an owned array, zeros when backward never reached the node.
    pub fn grad_or_zeros(&self, id: NodeId) -> Array {
        match &self.nodes[id.0].grad {
            Some(g) => g.clone(),
            None => Array::zeros(self.nodes[id.0].value.shape()),
        }
    }

    pub fn reset_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(
        &mut self,
        op: &'static str,
        value: Array,
        parents: Vec<NodeId>,
        backward: Option<BackwardFn>,
    ) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(Error::Numeric(format!("non-finite output of {op}")));
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(NodeEntry {
            value,
            grad: None,
            parents,
            backward,
        });
        Ok(id)
    }

    /// Register an input (or parameter) leaf.
    pub fn leaf(&mut self, value: Array) -> Result<NodeId> {
        self.push("leaf", value, vec![], None)
    }

    /// Alias of [`Graph::leaf`] for values that are constants of the loss.
    pub fn constant(&mut self, value: Array) -> Result<NodeId> {
        self.leaf(value)
    }

    fn accumulate(&mut self, id: NodeId, contribution: &Array) {
        match &mut self.nodes[id.0].grad {
            Some(g) => g.add_assign(contribution),
            slot @ None => *slot = Some(contribution.clone()),
        }
    }

    /// Backpropagate from a scalar loss. Every node reachable from `loss`
    /// receives grad = d loss / d node. Calling backward again without
    /// [`Graph::reset_grads`] accumulates into the existing gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::dimension(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.nodes[loss.0].value.shape()),
            ));
        }
        let seed = Array::from_vec(self.nodes[loss.0].value.shape(), vec![1.0])?;
        self.accumulate(loss, &seed);
        for raw in (0..=loss.0).rev() {
            if self.nodes[raw].backward.is_none() || self.nodes[raw].grad.is_none() {
                continue;
            }
            let grad = self.nodes[raw].grad.clone().expect("checked above");
            let contributions = (self.nodes[raw].backward.as_ref().expect("checked above"))(&grad);
            let parents = self.nodes[raw].parents.clone();
            debug_assert_eq!(parents.len(), contributions.len());
            for (pid, contribution) in parents.into_iter().zip(contributions) {
                self.accumulate(pid, &contribution);
            }
        }
        Ok(())
    }

    // ----- linear algebra -----

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).matmul(self.value(b))?;
        let (av, bv) = (self.value(a).clone(), self.value(b).clone());
        let bwd: BackwardFn = Box::new(move |g| {
            let ga = g.matmul(&bv.transpose()).expect("shapes fixed at build");
            let gb = av.transpose().matmul(g).expect("shapes fixed at build");
            vec![ga, gb]
        });
        self.push("matmul", out, vec![a, b], Some(bwd))
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        if self.value(x).ndim() != 2 {
            return Err(Error::dimension("transpose", "needs a 2-d array".into()));
        }
        let out = self.value(x).transpose();
        let bwd: BackwardFn = Box::new(move |g| vec![g.transpose()]);
        self.push("transpose", out, vec![x], Some(bwd))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(x);
        if shape.iter().product::<usize>() != v.len() {
            return Err(Error::dimension(
                "reshape",
                format!("{:?} -> {:?}", v.shape(), shape),
            ));
        }
        let out = Array::from_vec(shape, v.data().to_vec())?;
        let in_shape = v.shape().to_vec();
        let bwd: BackwardFn = Box::new(move |g| {
            vec![Array::from_vec(&in_shape, g.data().to_vec()).expect("same length")]
        });
        self.push("reshape", out, vec![x], Some(bwd))
    }

    // ----- elementwise binary -----

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        let bwd: BackwardFn = Box::new(move |g| vec![g.clone(), g.clone()]);
        self.push("add", out, vec![a, b], Some(bwd))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        let bwd: BackwardFn = Box::new(move |g| vec![g.clone(), g.map(|v| -v)]);
        self.push("sub", out, vec![a, b], Some(bwd))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        let (av, bv) = (self.value(a).clone(), self.value(b).clone());
        let bwd: BackwardFn = Box::new(move |g| {
            vec![
                g.zip_map(&bv, "mul-bwd", |gi, bi| gi * bi).expect("shapes fixed"),
                g.zip_map(&av, "mul-bwd", |gi, ai| gi * ai).expect("shapes fixed"),
            ]
        });
        self.push("mul", out, vec![a, b], Some(bwd))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = self.value(a).zip_map(self.value(b), "div", |x, y| x / y)?;
        let (yv, bv) = (out.clone(), self.value(b).clone());
        let bwd: BackwardFn = Box::new(move |g| {
            let ga = g.zip_map(&bv, "div-bwd", |gi, bi| gi / bi).expect("shapes fixed");
            let gb_num = g.zip_map(&yv, "div-bwd", |gi, yi| gi * yi).expect("shapes fixed");
            let gb = gb_num
                .zip_map(&bv, "div-bwd", |v, bi| -v / bi)
                .expect("shapes fixed");
            vec![ga, gb]
        });
        self.push("div", out, vec![a, b], Some(bwd))
    }

    /// Column-broadcast add: `x` is [r,c], `bias` is [r,1], added to every column.
    pub fn add_col(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let bv = self.value(bias);
        if xv.ndim() != 2 || bv.shape() != [xv.rows(), 1] {
            return Err(Error::dimension(
                "add_col",
                format!("{:?} + {:?}", xv.shape(), bv.shape()),
            ));
        }
        let (r, c) = (xv.rows(), xv.cols());
        let mut out = xv.clone();
        for i in 0..r {
            let bi = bv.data()[i];
            for v in &mut out.data_mut()[i * c..(i + 1) * c] {
                *v += bi;
            }
        }
        let bwd: BackwardFn = Box::new(move |g| {
            let mut gb = Array::zeros(&[r, 1]);
            for i in 0..r {
                gb.data_mut()[i] = g.row(i).iter().sum();
            }
            vec![g.clone(), gb]
        });
        self.push("add_col", out, vec![x, bias], Some(bwd))
    }

    /// Broadcast multiply by a 1-element node.
    pub fn mul_scalar_node(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        if !self.value(s).is_scalar() {
            return Err(Error::dimension("mul_scalar_node", "s must be scalar".into()));
        }
        let sv = self.value(s).data()[0];
        let out = self.value(x).map(|v| v * sv);
        let xv = self.value(x).clone();
        let s_shape = self.value(s).shape().to_vec();
        let bwd: BackwardFn = Box::new(move |g| {
            let gx = g.map(|v| v * sv);
            let gs = g
                .data()
                .iter()
                .zip(xv.data())
                .map(|(gi, xi)| gi * xi)
                .sum::<f64>();
            vec![gx, Array::from_vec(&s_shape, vec![gs]).expect("scalar")]
        });
        self.push("mul_scalar_node", out, vec![x, s], Some(bwd))
    }

    // ----- elementwise unary -----

    fn unary(
        &mut self,
        op: &'static str,
        x: NodeId,
        f: impl Fn(f64) -> f64,
        // derivative expressed from (input, output) pairs
        dfdx: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Result<NodeId> {
        let xv = self.value(x).clone();
        let out = xv.map(f);
        let yv = out.clone();
        let bwd: BackwardFn = Box::new(move |g| {
            let mut gx = g.clone();
            for ((gi, &xi), &yi) in gx.data_mut().iter_mut().zip(xv.data()).zip(yv.data()) {
                *gi *= dfdx(xi, yi);
            }
            vec![gx]
        });
        self.push(op, out, vec![x], Some(bwd))
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary("tanh", x, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary("sigmoid", x, |v| 1.0 / (1.0 + (-v).exp()), |_, y| y * (1.0 - y))
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary("square", x, |v| v * v, |xi, _| 2.0 * xi)
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary("exp", x, f64::exp, |_, y| y)
    }

    pub fn ln(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary("ln", x, f64::ln, |xi, _| 1.0 / xi)
    }

    pub fn sqrt(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary("sqrt", x, f64::sqrt, |_, y| 0.5 / y)
    }

    pub fn abs(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary("abs", x, f64::abs, |xi, _| {
            if xi > 0.0 {
                1.0
            } else if xi < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.unary("scale", x, move |v| v * c, move |_, _| c)
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        self.unary("add_scalar", x, move |v| v + c, |_, _| 1.0)
    }

    // ----- reductions / shape algebra -----

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let out = Array::scalar(xv.sum());
        let shape = xv.shape().to_vec();
        let bwd: BackwardFn = Box::new(move |g| {
            let g0 = g.data()[0];
            vec![Array::from_fn(&shape, |_| g0)]
        });
        self.push("sum", out, vec![x], Some(bwd))
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        let n = xv.len() as f64;
        let out = Array::scalar(xv.sum() / n);
        let shape = xv.shape().to_vec();
        let bwd: BackwardFn = Box::new(move |g| {
            let g0 = g.data()[0] / n;
            vec![Array::from_fn(&shape, |_| g0)]
        });
        self.push("mean", out, vec![x], Some(bwd))
    }

    /// Sum a 2-d array along `axis`: axis 0 collapses rows (result [c]),
    /// axis 1 collapses columns (result [r]).
    pub fn sum_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.ndim() != 2 || axis > 1 {
            return Err(Error::dimension(
                "sum_axis",
                format!("axis {axis} on shape {:?}", xv.shape()),
            ));
        }
        let (r, c) = (xv.rows(), xv.cols());
        let out = if axis == 0 {
            Array::from_fn(&[c], |j| (0..r).map(|i| xv.at(i, j)).sum())
        } else {
            Array::from_fn(&[r], |i| xv.row(i).iter().sum())
        };
        let bwd: BackwardFn = Box::new(move |g| {
            let mut gx = Array::zeros(&[r, c]);
            for i in 0..r {
                for j in 0..c {
                    gx.set(i, j, if axis == 0 { g.data()[j] } else { g.data()[i] });
                }
            }
            vec![gx]
        });
        self.push("sum_axis", out, vec![x], Some(bwd))
    }

    pub fn mean_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let denom = if axis == 0 {
            self.value(x).rows()
        } else {
            self.value(x).cols()
        } as f64;
        let s = self.sum_axis(x, axis)?;
        self.scale(s, 1.0 / denom)
    }

    /// Concatenate 2-d arrays along `axis` (0 = stack rows, 1 = stack columns).
    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        if parts.is_empty() || axis > 1 {
            return Err(Error::dimension("concat", "empty input or bad axis".into()));
        }
        let fixed = if axis == 0 {
            self.value(parts[0]).cols()
        } else {
            self.value(parts[0]).rows()
        };
        let mut sizes = Vec::with_capacity(parts.len());
        for &p in parts {
            let v = self.value(p);
            if v.ndim() != 2 {
                return Err(Error::dimension("concat", "parts must be 2-d".into()));
            }
            let (keep, grow) = if axis == 0 {
                (v.cols(), v.rows())
            } else {
                (v.rows(), v.cols())
            };
            if keep != fixed {
                return Err(Error::dimension(
                    "concat",
                    format!("inconsistent shapes along axis {axis}"),
                ));
            }
            sizes.push(grow);
        }
        let total: usize = sizes.iter().sum();
        let out = if axis == 0 {
            let mut data = Vec::with_capacity(total * fixed);
            for &p in parts {
                data.extend_from_slice(self.value(p).data());
            }
            Array::from_vec(&[total, fixed], data)?
        } else {
            let rows = fixed;
            let mut out = Array::zeros(&[rows, total]);
            let mut offset = 0;
            for &p in parts {
                let v = self.value(p);
                for i in 0..rows {
                    for j in 0..v.cols() {
                        out.set(i, offset + j, v.at(i, j));
                    }
                }
                offset += v.cols();
            }
            out
        };
        let sizes_b = sizes.clone();
        let bwd: BackwardFn = Box::new(move |g| {
            let mut grads = Vec::with_capacity(sizes_b.len());
            let mut offset = 0;
            for &sz in &sizes_b {
                let part = if axis == 0 {
                    let start = offset * fixed;
                    Array::from_vec(&[sz, fixed], g.data()[start..start + sz * fixed].to_vec())
                        .expect("sizes fixed")
                } else {
                    let rows = fixed;
                    let mut part = Array::zeros(&[rows, sz]);
                    for i in 0..rows {
                        for j in 0..sz {
                            part.set(i, j, g.at(i, offset + j));
                        }
                    }
                    part
                };
                grads.push(part);
                offset += sz;
            }
            grads
        });
        self.push("concat", out, parts.to_vec(), Some(bwd))
    }

    /// Rows `start..start+len` of a 2-d array.
    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.ndim() != 2 || start + len > xv.rows() {
            return Err(Error::dimension(
                "slice_rows",
                format!("rows {start}..{} of shape {:?}", start + len, xv.shape()),
            ));
        }
        let (r, c) = (xv.rows(), xv.cols());
        let out = Array::from_vec(&[len, c], xv.data()[start * c..(start + len) * c].to_vec())?;
        let bwd: BackwardFn = Box::new(move |g| {
            let mut gx = Array::zeros(&[r, c]);
            gx.data_mut()[start * c..(start + len) * c].copy_from_slice(g.data());
            vec![gx]
        });
        self.push("slice_rows", out, vec![x], Some(bwd))
    }
}
