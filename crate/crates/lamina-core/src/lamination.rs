//! Central leaves and the global structures built from them.
//!
//! A central leaf over a base point `b` is the transverse intersection of the
//! center-stable and center-unstable leaves at `b`: per fiber node the pair of
//! graph evaluations is iterated to its fixed point, giving a curve
//! `m -> beta(m)` in the chart and its ambient image `m -> tilde_beta(m)`.
//! The collection of these curves conjugates the perturbed map to a skew
//! product `(b, m) -> (h(b), g_b(m))`; the induced fiber maps `g_b` and their
//! inverses are measured here, along with leaf disjointness.
//!
//! When the base map itself fibers over an expanding circle (the solenoid
//! over angle doubling, or the doubling map trivially), the center-stable
//! leaves glue into global graphs `beta_z : F x M -> Z` over the angle
//! circle. The module solves those graphs by the same pull-back contraction,
//! evaluates them pointwise by orbit shooting, and inverts the family through
//! a given point to produce the semiconjugacy `q` onto angle doubling.

use alloc::vec::Vec;

use crate::base::{BaseMap, BasePoint, ChartFrame, Direction};
use crate::error::{Error, Result};
use crate::geom::{circle_dist, wrap01, wrap_signed, Coords};
use crate::graph::{solve_invariant_leaf, GraphOptions, InvariantLeaf, LeafKind};
use crate::leaf::LeafFunction;
use crate::newton::{self, NewtonOptions};
use crate::skew::{PerturbedMap, XPoint};
// Inherent f64 methods shadow these under std; the import is for no_std.
#[allow(unused_imports)]
use num_traits::Float;

/// Minimum base-point separation accepted by the disjointness check.
pub const DISJOINTNESS_FLOOR: f64 = 0.01;

/// Orbit angle offsets beyond this are treated as divergence by the shooting
/// evaluator; safely below the half-period where wrapped differences become
/// ambiguous, safely above the leaf offset cap `delta / 2`.
const ESCAPE_OFFSET: f64 = 0.125;

/// Construction parameters for central leaves.
#[derive(Debug, Clone)]
pub struct CentralOptions {
    /// Grid and solver settings shared by the two invariant-leaf solves.
    pub graph: GraphOptions,
    /// Fiber nodes of the central curve itself.
    pub nodes: usize,
    /// Pull-back depth of the center-stable leaf (contraction ~ mu + O(delta)).
    pub cs_depth: usize,
    /// Pull-back depth of the center-unstable leaf (contraction ~ lambda + O(delta)).
    pub cu_depth: usize,
    /// Fixed-point residual demanded at every fiber node.
    pub fixed_point_tol: f64,
    /// Iteration cap for the alternating fixed point.
    pub max_fixed_point_iters: usize,
}

impl CentralOptions {
    pub fn new(graph: GraphOptions) -> Self {
        Self {
            graph,
            nodes: 256,
            cs_depth: 28,
            cu_depth: 8,
            fixed_point_tol: 1e-10,
            max_fixed_point_iters: 16,
        }
    }
}

/// Convergence and smallness measurements of a central leaf.
#[derive(Debug, Clone, Copy)]
pub struct CentralDiagnostics {
    /// Worst fixed-point iteration count over the fiber nodes.
    pub max_fixed_point_iters: usize,
    /// Worst fixed-point residual over the fiber nodes.
    pub max_fixed_point_residual: f64,
    /// `sup_m |beta(m)|` in chart coordinates.
    pub sup_beta: f64,
    /// Grid Lipschitz constant of `m -> beta(m)`.
    pub lip_beta: f64,
    /// `sup_m d(tilde_beta(m), b)` in the ambient metric.
    pub sup_tilde: f64,
    /// Grid Lipschitz constant of `m -> tilde_beta(m)`.
    pub lip_tilde: f64,
    /// Observed contraction ratio of the center-stable solve, if resolvable.
    pub cs_ratio: Option<f64>,
    /// Observed contraction ratio of the center-unstable solve, if resolvable.
    pub cu_ratio: Option<f64>,
}

/// The central leaf `W_b`: fixed points of the paired graph evaluations, per
/// fiber node, with the ambient curve `tilde_beta` they define.
#[derive(Debug, Clone)]
pub struct CentralLeaf {
    /// Anchor base point.
    pub base_point: BasePoint,
    /// Chart at the anchor (stable block first, unswapped).
    pub frame: ChartFrame,
    /// Chart radius the leaves were solved in.
    pub delta: f64,
    /// Per-node chart coordinates `(x_s, x_u)` of the intersection.
    pub beta: Vec<([f64; 2], [f64; 2])>,
    /// Per-node ambient displacement of `tilde_beta(m)` from the anchor.
    pub offsets: Vec<Coords>,
    /// The center-stable leaf the intersection was built from.
    pub cs: InvariantLeaf,
    /// The center-unstable leaf; absent when the base has no stable
    /// directions and the center-stable graph is already the central curve.
    pub cu: Option<InvariantLeaf>,
    pub diagnostics: CentralDiagnostics,
}

impl CentralLeaf {
    pub fn nodes(&self) -> usize {
        self.beta.len()
    }

    fn origin(&self) -> &Coords {
        &self.frame.origin
    }

    /// Chart coordinates of the leaf at any fiber point, by periodic linear
    /// interpolation between nodes.
    pub fn beta_at(&self, m: f64) -> ([f64; 2], [f64; 2]) {
        let (j, k, t) = self.bracket(m);
        let mut x_s = [0.0; 2];
        let mut x_u = [0.0; 2];
        for c in 0..2 {
            x_s[c] = (1.0 - t) * self.beta[j].0[c] + t * self.beta[k].0[c];
            x_u[c] = (1.0 - t) * self.beta[j].1[c] + t * self.beta[k].1[c];
        }
        (x_s, x_u)
    }

    /// Ambient base coordinate `tilde_beta(m)`.
    pub fn tilde_at(&self, m: f64) -> Coords {
        let (j, k, t) = self.bracket(m);
        let dim = self.origin().dim();
        let mut out = *self.origin();
        for i in 0..dim {
            out[i] += (1.0 - t) * self.offsets[j][i] + t * self.offsets[k][i];
            if self.frame.wrap_mask[i] {
                out[i] = wrap01(out[i]);
            }
        }
        out
    }

    /// The graph point `(tilde_beta(m), m)` of the leaf in the total space.
    pub fn graph_point(&self, m: f64) -> XPoint {
        XPoint::new(self.tilde_at(m), m)
    }

    fn bracket(&self, m: f64) -> (usize, usize, f64) {
        let n = self.beta.len();
        let t = wrap01(m) * n as f64;
        let j = (t.floor() as usize).min(n - 1);
        (j, (j + 1) % n, t - j as f64)
    }
}

/// Build the central leaf at `at` by solving both invariant leaves and
/// intersecting them fiber node by fiber node.
pub fn central_leaf(
    pert: &PerturbedMap,
    at: &BasePoint,
    opts: &CentralOptions,
) -> Result<CentralLeaf> {
    let base = pert.skew().base();
    let frame = base.chart(at, opts.graph.delta);
    let (k_s, k_u) = (frame.dim_s, frame.dim_u);
    if k_u == 0 {
        return Err(Error::InvalidArgument(
            "central leaves need an expanding base direction".into(),
        ));
    }
    if opts.nodes < 2 {
        return Err(Error::InvalidArgument("central leaves need at least two fiber nodes".into()));
    }
    let cs = solve_invariant_leaf(pert, LeafKind::CenterStable, at, opts.cs_depth, &opts.graph)?;
    let cu = if k_s > 0 {
        Some(solve_invariant_leaf(pert, LeafKind::CenterUnstable, at, opts.cu_depth, &opts.graph)?)
    } else {
        None
    };

    let n = opts.nodes;
    let mut beta = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n);
    let origin = base.ambient(at);
    let mut diag = CentralDiagnostics {
        max_fixed_point_iters: 0,
        max_fixed_point_residual: 0.0,
        sup_beta: 0.0,
        lip_beta: 0.0,
        sup_tilde: 0.0,
        lip_tilde: 0.0,
        cs_ratio: cs.max_ratio(),
        cu_ratio: cu.as_ref().and_then(InvariantLeaf::max_ratio),
    };

    for j in 0..n {
        let m = j as f64 / n as f64;
        // Alternate the two graph evaluations: the composition contracts at
        // the product of the leaf Lipschitz constants, tiny for small rho.
        let mut x_u = [0.0f64; 2];
        let mut x_s = [0.0f64; 2];
        let mut residual = f64::INFINITY;
        let mut iters = 0usize;
        while iters < opts.max_fixed_point_iters {
            x_s = match &cu {
                Some(l) => l.leaf.value(&x_u[..k_u], m),
                None => [0.0; 2],
            };
            let x_u_new = cs.leaf.value(&x_s[..k_s], m);
            residual = 0.0;
            for c in 0..k_u {
                residual = residual.max((x_u_new[c] - x_u[c]).abs());
            }
            x_u = x_u_new;
            iters += 1;
            if residual <= opts.fixed_point_tol {
                break;
            }
        }
        if residual > opts.fixed_point_tol {
            return Err(Error::NewtonFailed { residual, iterations: iters });
        }
        diag.max_fixed_point_iters = diag.max_fixed_point_iters.max(iters);
        diag.max_fixed_point_residual = diag.max_fixed_point_residual.max(residual);
        let tilde = frame.to_manifold(&x_s[..k_s], &x_u[..k_u])?;
        offsets.push(base.displacement(&origin, &tilde));
        beta.push((x_s, x_u));
    }

    // Smallness measurements and the membership caps they must satisfy.
    let step = 1.0 / n as f64;
    for j in 0..n {
        let k = (j + 1) % n;
        let (xs, xu) = beta[j];
        for c in 0..2 {
            diag.sup_beta = diag.sup_beta.max(xs[c].abs()).max(xu[c].abs());
            let d = ((beta[k].0[c] - xs[c]).abs()).max((beta[k].1[c] - xu[c]).abs());
            diag.lip_beta = diag.lip_beta.max(d / step);
        }
        let mut off = 0.0f64;
        let mut doff = 0.0f64;
        for i in 0..origin.dim() {
            off = off.max(offsets[j][i].abs());
            doff = doff.max((offsets[k][i] - offsets[j][i]).abs());
        }
        diag.sup_tilde = diag.sup_tilde.max(off);
        diag.lip_tilde = diag.lip_tilde.max(doff / step);
    }
    let sup_cap = 0.5 * opts.graph.delta;
    let lip_cap = opts.graph.lip_budget * opts.graph.delta;
    if diag.sup_beta > sup_cap || diag.lip_beta > lip_cap {
        return Err(Error::LeftInvariantSet {
            sup: diag.sup_beta,
            sup_cap,
            lip: diag.lip_beta,
            lip_cap,
        });
    }

    Ok(CentralLeaf {
        base_point: at.clone(),
        frame,
        delta: opts.graph.delta,
        beta,
        offsets,
        cs,
        cu,
        diagnostics: diag,
    })
}

/// Sup distance between the forward image of one central leaf and the graph
/// of the central leaf at the image point: zero for exactly invariant leaves.
pub fn invariance_residual(
    pert: &PerturbedMap,
    leaf_b: &CentralLeaf,
    leaf_hb: &CentralLeaf,
) -> Result<f64> {
    let base = pert.skew().base();
    let image = base.step(&leaf_b.base_point, Direction::Forward)?;
    let gap = base.distance(&base.ambient(&image), &base.ambient(&leaf_hb.base_point));
    if gap > 1e-9 {
        return Err(Error::InvalidArgument(
            "second leaf does not sit at the forward image of the first".into(),
        ));
    }
    let mut sup = 0.0f64;
    for j in 0..leaf_b.nodes() {
        let m = j as f64 / leaf_b.nodes() as f64;
        let pushed = pert.forward(&leaf_b.graph_point(m));
        let on_graph = leaf_hb.tilde_at(pushed.m);
        sup = sup.max(base.distance(&pushed.base, &on_graph));
    }
    Ok(sup)
}

/// The fiber maps induced by conjugating the perturbed dynamics with the
/// central lamination: `g(m)` pushes the graph point of the leaf at `b`
/// forward and reads the fiber coordinate, `g^{-1}(m)` pulls the graph point
/// of the leaf at `h(b)` backward. The conjugate being a genuine skew product
/// is equivalent to the composition residual here plus the invariance
/// residual of the leaf pair staying at the tolerance level.
#[derive(Debug, Clone)]
pub struct ConjugatedFiberMap {
    /// Offsets `g(m_j) - m_j` on a uniform fiber grid.
    pub forward_offsets: Vec<f64>,
    /// Offsets `g^{-1}(m_j) - m_j` on the same grid.
    pub backward_offsets: Vec<f64>,
    /// `sup_m |g^{-1}(g(m)) - m|` over an offset sample grid.
    pub composition_residual: f64,
    /// `sup_m |g(m) - f_b(m)|` against the unperturbed fiber map at `b`.
    pub c0_distance: f64,
    /// `c0 + sup_m |g'(m) - f_b'(m)|` (finite-difference derivatives).
    pub c1_distance: f64,
}

impl ConjugatedFiberMap {
    pub fn nodes(&self) -> usize {
        self.forward_offsets.len()
    }

    /// `g(m)` by periodic linear interpolation of the offset grid.
    pub fn value(&self, m: f64) -> f64 {
        wrap01(m + interp_offsets(&self.forward_offsets, m))
    }

    /// `g^{-1}(m)` by periodic linear interpolation of the offset grid.
    pub fn inverse_value(&self, m: f64) -> f64 {
        wrap01(m + interp_offsets(&self.backward_offsets, m))
    }
}

fn interp_offsets(offsets: &[f64], m: f64) -> f64 {
    let n = offsets.len();
    let t = wrap01(m) * n as f64;
    let j = (t.floor() as usize).min(n - 1);
    let frac = t - j as f64;
    (1.0 - frac) * offsets[j] + frac * offsets[(j + 1) % n]
}

/// Measure the conjugated fiber map pair over the leaf pair `(W_b, W_{h(b)})`.
pub fn conjugated_fiber_map(
    pert: &PerturbedMap,
    leaf_b: &CentralLeaf,
    leaf_hb: &CentralLeaf,
    nodes: usize,
) -> Result<ConjugatedFiberMap> {
    if nodes < 2 {
        return Err(Error::InvalidArgument("fiber map grids need at least two nodes".into()));
    }
    let base = pert.skew().base();
    let image = base.step(&leaf_b.base_point, Direction::Forward)?;
    if base.distance(&base.ambient(&image), &base.ambient(&leaf_hb.base_point)) > 1e-9 {
        return Err(Error::InvalidArgument(
            "second leaf does not sit at the forward image of the first".into(),
        ));
    }
    let anchor = base.ambient(&leaf_b.base_point);
    let b_ambient = anchor;

    let g = |m: f64| -> f64 { pert.forward(&leaf_b.graph_point(m)).m };
    let g_inv = |m: f64| -> Result<f64> {
        Ok(pert.backward_near(&leaf_hb.graph_point(m), &anchor)?.m)
    };
    let f_ref = |m: f64| -> f64 { pert.skew().fiber_value(&b_ambient, m) };

    let mut forward_offsets = Vec::with_capacity(nodes);
    let mut backward_offsets = Vec::with_capacity(nodes);
    for j in 0..nodes {
        let m = j as f64 / nodes as f64;
        forward_offsets.push(wrap_signed(g(m) - m));
        backward_offsets.push(wrap_signed(g_inv(m)? - m));
    }

    // Residuals on a staggered, denser sample set than the stored grid.
    let samples = 2 * nodes;
    let mut composition = 0.0f64;
    let mut c0 = 0.0f64;
    let mut dmax = 0.0f64;
    let h = 0.25 / samples as f64;
    for j in 0..samples {
        let m = (j as f64 + 0.37) / samples as f64;
        let gm = g(m);
        composition = composition.max(wrap_signed(g_inv(gm)? - m).abs());
        c0 = c0.max(wrap_signed(gm - f_ref(m)).abs());
        // Finite differences of the difference map: truncation scales with
        // the difference itself, not with the maps.
        let dplus = wrap_signed(g(m + h) - f_ref(m + h));
        let dminus = wrap_signed(g(m - h) - f_ref(m - h));
        dmax = dmax.max(((dplus - dminus) / (2.0 * h)).abs());
    }

    Ok(ConjugatedFiberMap {
        forward_offsets,
        backward_offsets,
        composition_residual: composition,
        c0_distance: c0,
        c1_distance: c0 + dmax,
    })
}

/// Closest approach of two central-leaf graphs, compared fiber for fiber.
#[derive(Debug, Clone, Copy)]
pub struct DisjointnessReport {
    /// Ambient distance of the anchor base points.
    pub base_distance: f64,
    /// `min_m d(tilde_beta_b(m), tilde_beta_b'(m))`.
    pub min_graph_distance: f64,
    /// `min_graph_distance / base_distance`.
    pub ratio: f64,
}

/// Measure the closest approach of two central leaves over the same fiber
/// points. Pairs closer than [`DISJOINTNESS_FLOOR`] are rejected: the
/// separation statement is about leaves at well-separated anchors.
pub fn check_disjointness(
    base: &BaseMap,
    a: &CentralLeaf,
    b: &CentralLeaf,
    samples: usize,
) -> Result<DisjointnessReport> {
    let d = base.distance(&base.ambient(&a.base_point), &base.ambient(&b.base_point));
    if d < DISJOINTNESS_FLOOR {
        return Err(Error::InvalidArgument(
            "base points closer than the disjointness floor".into(),
        ));
    }
    let n = samples.max(a.nodes()).max(b.nodes());
    let mut min = f64::INFINITY;
    for j in 0..n {
        let m = j as f64 / n as f64;
        min = min.min(base.distance(&a.tilde_at(m), &b.tilde_at(m)));
    }
    Ok(DisjointnessReport { base_distance: d, min_graph_distance: min, ratio: min / d })
}

/// Which ambient coordinates make up the expanding circle factor and the
/// remaining fiber block for base maps that are themselves skew products
/// over angle doubling.
fn factor_dims(base: &BaseMap) -> Result<usize> {
    match base {
        BaseMap::Solenoid(_) => Ok(2),
        BaseMap::Doubling(_) => Ok(0),
        BaseMap::Torus(_) => Err(Error::InvalidArgument(
            "the base map does not fiber over an expanding circle factor".into(),
        )),
    }
}

fn assemble_point(f_dims: usize, y: f64, f: &[f64], m: f64) -> XPoint {
    let mut c = [0.0f64; 3];
    c[0] = wrap01(y);
    c[1..1 + f_dims].copy_from_slice(&f[..f_dims]);
    XPoint::new(Coords::new(&c[..1 + f_dims]), m)
}

/// Construction parameters for global angle-circle leaves.
#[derive(Debug, Clone)]
pub struct GlobalOptions {
    /// Chart radius bounding the angle offsets: `sup <= delta/2`.
    pub chart_delta: f64,
    /// Half-width of the square covering the contracting factor `F`; the
    /// solenoid attractor disk sits inside `1/(1 - sqrt(2) lambda)`.
    pub domain_half_width: f64,
    /// Nodes per `F` axis.
    pub domain_nodes: usize,
    /// Nodes on the fiber circle.
    pub fiber_nodes: usize,
    /// Pull-back depth down the doubling orbit (contraction ~ 1/2 + O(delta)).
    pub depth: usize,
    /// Lipschitz budget constant `D`.
    pub lip_budget: f64,
    /// Scalar solver settings for the per-node pull-back equation.
    pub newton: NewtonOptions,
    /// Track Cauchy increments with a twin chain started one step deeper.
    pub track_increments: bool,
}

impl GlobalOptions {
    pub fn new(chart_delta: f64, lip_budget: f64) -> Self {
        Self {
            chart_delta,
            domain_half_width: 1.1,
            domain_nodes: 33,
            fiber_nodes: 128,
            depth: 28,
            lip_budget,
            newton: NewtonOptions { tol: 1e-11, max_iters: 50, ..NewtonOptions::default() },
            track_increments: true,
        }
    }
}

/// A global center-stable leaf: the graph of `beta_z : F x M -> Z`, stored as
/// angle offsets from the constant function `z` on a grid over `F x M`.
#[derive(Debug, Clone)]
pub struct GlobalStableLeaf {
    /// The angle-circle point the leaf projects to.
    pub z: f64,
    /// Offset grid `eta(f, m) = beta_z(f, m) - z`.
    pub offsets: LeafFunction,
    /// `sup |eta|`; capped at `delta / 2`.
    pub sup_offset: f64,
    /// Grid Lipschitz constant of `eta`; capped at `D delta / 2`.
    pub lipschitz: f64,
    /// Worst pull-back residual across nodes and levels.
    pub max_residual: f64,
    /// Cauchy increments of the outer-level leaves, deep end first.
    pub increments: Vec<f64>,
    /// Ratios of consecutive resolvable increments.
    pub ratios: Vec<f64>,
}

impl GlobalStableLeaf {
    /// `beta_z(f, m)` on the angle circle, from the offset grid.
    pub fn value(&self, f: &[f64], m: f64) -> f64 {
        wrap01(self.z + self.offsets.value(f, m)[0])
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios.iter().copied().reduce(f64::max)
    }
}

/// One pull-back of an offset leaf from `zeta(z) = 2z` to `z`: per node the
/// scalar equation "the forward image of `(z + eta, f, m)` lies on the
/// incoming graph" is solved for `eta`.
fn pull_global(
    pert: &PerturbedMap,
    f_dims: usize,
    z: f64,
    z_next: f64,
    incoming: &LeafFunction,
    opts: &GlobalOptions,
) -> Result<(LeafFunction, f64)> {
    let mut out = LeafFunction::zeros(
        f_dims,
        incoming.axis_nodes(),
        incoming.fiber_nodes(),
        incoming.delta(),
        1,
    );
    let mut max_residual = 0.0f64;
    for idx in 0..out.node_count() {
        let (f_node, m_node) = out.node_domain(idx);
        let residual = |w: &[f64], r: &mut [f64]| {
            let x = assemble_point(f_dims, z + w[0], &f_node[..f_dims], m_node);
            let image = pert.forward(&x);
            let eta_next = incoming.value(&image.base.as_slice()[1..1 + f_dims], image.m)[0];
            r[0] = wrap_signed(image.base[0] - z_next) - eta_next;
        };
        let sol = newton::solve(residual, &[0.0], &opts.newton)
            .map_err(|e| Error::PullBackFailed { node: idx, source: alloc::boxed::Box::new(e) })?;
        out.set_node_value(idx, &sol.x[..1]);
        max_residual = max_residual.max(sol.residual);
    }
    let sup = out.sup_norm();
    let lip = out.grid_lipschitz();
    let sup_cap = 0.5 * opts.chart_delta;
    let lip_cap = 0.5 * opts.chart_delta * opts.lip_budget;
    if sup > sup_cap || lip > lip_cap {
        return Err(Error::LeftInvariantSet { sup, sup_cap, lip, lip_cap });
    }
    Ok((out, max_residual))
}

/// Solve the global leaf over `z` by pulling the zero offset graph down the
/// doubling orbit of `z` for `opts.depth` steps.
pub fn global_stable_leaf(
    pert: &PerturbedMap,
    z: f64,
    opts: &GlobalOptions,
) -> Result<GlobalStableLeaf> {
    let base = pert.skew().base();
    let f_dims = factor_dims(base)?;
    let z = wrap01(z);
    let mut zs = Vec::with_capacity(opts.depth + 2);
    zs.push(z);
    for j in 0..opts.depth + 1 {
        zs.push(wrap01(2.0 * zs[j]));
    }
    let zero = LeafFunction::zeros(
        f_dims,
        opts.domain_nodes.max(2),
        opts.fiber_nodes,
        opts.domain_half_width,
        1,
    );

    let mut cur = zero.clone();
    let mut probe = None;
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    let mut max_residual = 0.0f64;
    if opts.track_increments {
        let (p, r) = pull_global(pert, f_dims, zs[opts.depth], zs[opts.depth + 1], &zero, opts)?;
        max_residual = max_residual.max(r);
        increments.push(p.sup_diff(&cur));
        probe = Some(p);
    }
    for j in (0..opts.depth).rev() {
        let (next, r) = pull_global(pert, f_dims, zs[j], zs[j + 1], &cur, opts)?;
        max_residual = max_residual.max(r);
        if let Some(p) = probe.take() {
            let (pn, rp) = pull_global(pert, f_dims, zs[j], zs[j + 1], &p, opts)?;
            max_residual = max_residual.max(rp);
            let d = pn.sup_diff(&next);
            if let Some(prev) = increments.last() {
                if *prev > 1e-13 {
                    ratios.push(d / prev);
                }
            }
            increments.push(d);
            probe = Some(pn);
        }
        cur = next;
    }
    let sup_offset = cur.sup_norm();
    let lipschitz = cur.grid_lipschitz();
    Ok(GlobalStableLeaf { z, offsets: cur, sup_offset, lipschitz, max_residual, increments, ratios })
}

/// Evaluate `beta_z(f, m)` without a grid: the unique angle near `z` whose
/// forward orbit tracks the doubling orbit of `z`. The sign of the first
/// orbit angle offset to exceed [`ESCAPE_OFFSET`] is monotone in the starting
/// angle, so bisection on it converges to the tracking angle.
pub fn global_leaf_value(
    pert: &PerturbedMap,
    z: f64,
    f: &[f64],
    m: f64,
    depth: usize,
) -> Result<f64> {
    let base = pert.skew().base();
    let f_dims = factor_dims(base)?;
    if f.len() < f_dims {
        return Err(Error::InvalidArgument(
            "contracting-factor coordinates are missing components".into(),
        ));
    }
    let z = wrap01(z);
    let score = |y: f64| -> f64 {
        let mut d = y - z;
        if d.abs() > ESCAPE_OFFSET {
            return d;
        }
        let mut x = assemble_point(f_dims, y, f, m);
        let mut zj = z;
        for _ in 0..depth {
            x = pert.forward(&x);
            zj = wrap01(2.0 * zj);
            d = wrap_signed(x.base[0] - zj);
            if d.abs() > ESCAPE_OFFSET {
                return d;
            }
        }
        d
    };
    let y = newton::bisect(score, z - 0.2, z + 0.2, 1e-12, 90)?;
    Ok(wrap01(y))
}

/// Settings for inverting the global leaf family through a point.
#[derive(Debug, Clone)]
pub struct SemiconjugacyOptions {
    /// Circle scan resolution used to bracket the crossing.
    pub scan_nodes: usize,
    /// Shooting depth for pointwise leaf evaluations.
    pub depth: usize,
    /// Bisection width tolerance on the bracketed crossing.
    pub tol: f64,
}

impl Default for SemiconjugacyOptions {
    fn default() -> Self {
        Self { scan_nodes: 512, depth: 34, tol: 1e-9 }
    }
}

/// The factor coordinate of a point, with the residual of the defining
/// equation `beta_q(x-projection) = angle(x)`.
#[derive(Debug, Clone, Copy)]
pub struct QValue {
    pub z: f64,
    pub residual: f64,
}

/// The semiconjugacy onto angle doubling: find the leaf of the global family
/// passing through `x` by scanning the circle for a sign bracket of
/// `z -> beta_z(x) - angle(x)` and bisecting inside it.
pub fn semiconjugacy_q(
    pert: &PerturbedMap,
    x: &XPoint,
    opts: &SemiconjugacyOptions,
) -> Result<QValue> {
    let base = pert.skew().base();
    let f_dims = factor_dims(base)?;
    let y_x = x.base[0];
    let f: Vec<f64> = x.base.as_slice()[1..1 + f_dims].to_vec();
    let gap = |z: f64| -> Result<f64> {
        Ok(wrap_signed(global_leaf_value(pert, z, &f, x.m, opts.depth)? - y_x))
    };

    let n = opts.scan_nodes;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        values.push(gap(i as f64 / n as f64)?);
    }
    // Keep ascending sign changes; the jump where the wrapped difference
    // crosses the half period descends and is excluded by the gap size.
    let mut bracket = None;
    let mut count = 0usize;
    for i in 0..n {
        let a = values[i];
        let b = values[(i + 1) % n];
        if a < 0.0 && b >= 0.0 && (b - a) < 0.5 {
            count += 1;
            bracket = Some(i);
        }
    }
    let Some(i) = bracket else {
        return Err(Error::BracketFailed(
            "leaf family not surjective at the requested point".into(),
        ));
    };
    if count != 1 {
        return Err(Error::BracketFailed(
            "leaf family crosses the requested point more than once".into(),
        ));
    }
    let lo = i as f64 / n as f64;
    let hi = (i + 1) as f64 / n as f64;
    let z = newton::bisect(|zt| gap(zt).unwrap_or(f64::NAN), lo, hi, opts.tol, 90)?;
    let residual = gap(z)?.abs();
    Ok(QValue { z: wrap01(z), residual })
}

/// Independent factor-coordinate oracle: reconstruct the angle the orbit of
/// `x` tracks by running the observed orbit angles backward through halving,
/// choosing the preimage nearest the observed angle at each step. Errors
/// halve per step, so the result is accurate to `2^-n` of the tracking cap.
pub fn track_factor_coordinate(pert: &PerturbedMap, x: &XPoint, n: usize) -> Result<f64> {
    let base = pert.skew().base();
    factor_dims(base)?;
    let mut angles = Vec::with_capacity(n + 1);
    let mut cur = *x;
    angles.push(cur.base[0]);
    for _ in 0..n {
        cur = pert.forward(&cur);
        angles.push(cur.base[0]);
    }
    let mut a = angles[n];
    for j in (0..n).rev() {
        let half = 0.5 * a;
        // The two doubling preimages differ by a half turn; the observed
        // orbit angle singles one out as long as tracking stays well inside
        // a quarter turn.
        let c0 = wrap01(half);
        let c1 = wrap01(half + 0.5);
        a = if circle_dist(c0, angles[j]) <= circle_dist(c1, angles[j]) { c0 } else { c1 };
    }
    Ok(a)
}
