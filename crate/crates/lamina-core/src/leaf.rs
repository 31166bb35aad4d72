//! Grid representation of leaf graphs.
//!
//! A leaf is stored as a function on a product domain: up to two chart axes
//! over `[-delta, delta]` (the graph directions of the working chart) times
//! the periodic fiber circle. Values are vectors in the complementary chart
//! block (dimension one or two). Evaluation is multilinear, clamped on the
//! chart axes and periodic on the fiber axis.

use alloc::vec;
use alloc::vec::Vec;

use crate::geom::wrap01;
// Inherent f64 methods shadow these under std; the import is for no_std.
#[allow(unused_imports)]
use num_traits::Float;

/// Piecewise-multilinear graph function `beta(x, m)` on chart axes times the
/// fiber circle.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafFunction {
    axis_dims: usize,
    axis_nodes: usize,
    fiber_nodes: usize,
    delta: f64,
    value_dim: usize,
    values: Vec<[f64; 2]>,
}

impl LeafFunction {
    /// The zero graph on the given grid. `axis_dims <= 2`, `axis_nodes >= 2`
    /// whenever there is at least one chart axis, `1 <= value_dim <= 2`.
    pub fn zeros(
        axis_dims: usize,
        axis_nodes: usize,
        fiber_nodes: usize,
        delta: f64,
        value_dim: usize,
    ) -> Self {
        assert!(axis_dims <= 2, "at most two chart axes");
        assert!(axis_dims == 0 || axis_nodes >= 2, "need two nodes per chart axis");
        assert!(fiber_nodes >= 4, "need at least four fiber nodes");
        assert!((1..=2).contains(&value_dim), "value dimension must be 1 or 2");
        assert!(delta > 0.0);
        let count = axis_nodes.pow(axis_dims as u32) * fiber_nodes;
        Self {
            axis_dims,
            axis_nodes,
            fiber_nodes,
            delta,
            value_dim,
            values: vec![[0.0; 2]; count],
        }
    }

    pub fn axis_dims(&self) -> usize {
        self.axis_dims
    }

    pub fn axis_nodes(&self) -> usize {
        self.axis_nodes
    }

    pub fn fiber_nodes(&self) -> usize {
        self.fiber_nodes
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.axis_dims == other.axis_dims
            && self.axis_nodes == other.axis_nodes
            && self.fiber_nodes == other.fiber_nodes
            && self.value_dim == other.value_dim
            && self.delta == other.delta
    }

    fn axis_coord(&self, i: usize) -> f64 {
        -self.delta + 2.0 * self.delta * i as f64 / (self.axis_nodes - 1) as f64
    }

    /// Domain point `(x, m)` of the flat node index.
    pub fn node_domain(&self, idx: usize) -> ([f64; 2], f64) {
        let j = idx % self.fiber_nodes;
        let mut rest = idx / self.fiber_nodes;
        let mut x = [0.0; 2];
        for a in (0..self.axis_dims).rev() {
            x[a] = self.axis_coord(rest % self.axis_nodes);
            rest /= self.axis_nodes;
        }
        (x, j as f64 / self.fiber_nodes as f64)
    }

    pub fn node_value(&self, idx: usize) -> [f64; 2] {
        self.values[idx]
    }

    pub fn set_node_value(&mut self, idx: usize, v: &[f64]) {
        for (slot, &c) in self.values[idx].iter_mut().zip(v) {
            *slot = c;
        }
    }

    /// Multilinear evaluation: chart axes clamp to the block, the fiber axis
    /// wraps.
    pub fn value(&self, x: &[f64], m: f64) -> [f64; 2] {
        debug_assert_eq!(x.len(), self.axis_dims);
        // Per-axis lower corner and interpolation weight.
        let mut lo = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..self.axis_dims {
            let u = ((x[a] + self.delta) / (2.0 * self.delta) * (self.axis_nodes - 1) as f64)
                .clamp(0.0, (self.axis_nodes - 1) as f64);
            let i = (u.floor() as usize).min(self.axis_nodes - 2);
            lo[a] = i;
            frac[a] = u - i as f64;
        }
        let um = wrap01(m) * self.fiber_nodes as f64;
        let jm = (um.floor() as usize).min(self.fiber_nodes - 1);
        lo[self.axis_dims] = jm;
        frac[self.axis_dims] = um - jm as f64;

        let naxes = self.axis_dims + 1;
        let mut out = [0.0; 2];
        for corner in 0..(1usize << naxes) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for a in 0..self.axis_dims {
                let hi = (corner >> a) & 1 == 1;
                w *= if hi { frac[a] } else { 1.0 - frac[a] };
                idx = idx * self.axis_nodes + lo[a] + usize::from(hi);
            }
            let hi = (corner >> self.axis_dims) & 1 == 1;
            w *= if hi {
                frac[self.axis_dims]
            } else {
                1.0 - frac[self.axis_dims]
            };
            let j = if hi { (jm + 1) % self.fiber_nodes } else { jm };
            idx = idx * self.fiber_nodes + j;
            let v = &self.values[idx];
            for c in 0..self.value_dim {
                out[c] += w * v[c];
            }
        }
        out
    }

    /// Sup of the max-norm of the node values.
    pub fn sup_norm(&self) -> f64 {
        let mut s = 0.0f64;
        for v in &self.values {
            for c in 0..self.value_dim {
                s = s.max(v[c].abs());
            }
        }
        s
    }

    /// Sup of the node-wise max-norm difference; grids must match.
    pub fn sup_diff(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "leaf grids differ");
        let mut s = 0.0f64;
        for (a, b) in self.values.iter().zip(&other.values) {
            for c in 0..self.value_dim {
                s = s.max((a[c] - b[c]).abs());
            }
        }
        s
    }

    /// Directional grid Lipschitz estimate: largest difference quotient over
    /// grid edges (chart axes and the periodic fiber axis).
    pub fn grid_lipschitz(&self) -> f64 {
        let mut lip = 0.0f64;
        let axis_step = if self.axis_dims > 0 {
            2.0 * self.delta / (self.axis_nodes - 1) as f64
        } else {
            1.0
        };
        let fiber_step = 1.0 / self.fiber_nodes as f64;
        let strides = self.strides();
        for idx in 0..self.values.len() {
            let coords = self.unflatten(idx);
            for a in 0..self.axis_dims {
                if coords[a] + 1 < self.axis_nodes {
                    let nb = idx + strides[a];
                    lip = lip.max(self.node_gap(idx, nb) / axis_step);
                }
            }
            let j = coords[self.axis_dims];
            let nb = idx - j + (j + 1) % self.fiber_nodes;
            lip = lip.max(self.node_gap(idx, nb) / fiber_step);
        }
        lip
    }

    fn node_gap(&self, a: usize, b: usize) -> f64 {
        let (va, vb) = (&self.values[a], &self.values[b]);
        let mut g = 0.0f64;
        for c in 0..self.value_dim {
            g = g.max((va[c] - vb[c]).abs());
        }
        g
    }

    fn strides(&self) -> [usize; 3] {
        let mut s = [0usize; 3];
        s[self.axis_dims] = 1;
        for a in (0..self.axis_dims).rev() {
            s[a] = s[a + 1] * if a + 1 == self.axis_dims { self.fiber_nodes } else { self.axis_nodes };
        }
        s
    }

    fn unflatten(&self, idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        out[self.axis_dims] = idx % self.fiber_nodes;
        let mut rest = idx / self.fiber_nodes;
        for a in (0..self.axis_dims).rev() {
            out[a] = rest % self.axis_nodes;
            rest /= self.axis_nodes;
        }
        out
    }

    /// Apply `f(domain_x, m) -> value` at every node.
    pub fn fill_with(&mut self, mut f: impl FnMut(&[f64], f64) -> [f64; 2]) {
        for idx in 0..self.values.len() {
            let (x, m) = self.node_domain(idx);
            self.values[idx] = f(&x[..self.axis_dims], m);
        }
    }

    /// Scale every value in place.
    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            v[0] *= s;
            v[1] *= s;
        }
    }
}
