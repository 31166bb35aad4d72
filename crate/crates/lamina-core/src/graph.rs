//! Graph transform for invariant leaf graphs.
//!
//! A center-stable leaf over a base point `b` is the graph of
//! `beta(x_s, m) = x_u` in the chart at `b`: stable chart coordinates and the
//! fiber coordinate parameterize the leaf, the unstable chart coordinates are
//! the values. One transform step pulls the leaf at the image point `h(b)`
//! back to `b`: for every node `(x_s, m)` it solves, by damped Newton, for
//! the unstable value and the image parameters so that the evolved node point
//! lands exactly on the incoming graph. Iterating down a forward orbit from
//! the zero graph converges geometrically; the loss of one step is the
//! Cauchy increment tracked alongside.
//!
//! Center-unstable leaves are the same construction for the time-reversed
//! system: swapped chart roles, backward evolution, backward orbits.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::base::{BasePoint, ChartFrame, Direction};
use crate::error::{Error, Result};
use crate::geom::wrap_signed;
use crate::leaf::LeafFunction;
use crate::newton::{self, NewtonOptions};
use crate::skew::{PerturbedMap, XPoint};
// Inherent f64 methods shadow these under std; the import is for no_std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

/// Which invariant family a leaf belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    CenterStable,
    CenterUnstable,
}

impl LeafKind {
    /// Orbit direction along which leaves are pulled to the anchor point.
    pub fn orbit_direction(self) -> Direction {
        match self {
            LeafKind::CenterStable => Direction::Forward,
            LeafKind::CenterUnstable => Direction::Backward,
        }
    }
}

/// Grid, chart radius and solver configuration for the graph transform.
#[derive(Debug, Clone)]
pub struct GraphOptions {
    /// Chart half-width; leaves live over `[-delta, delta]` axes.
    pub delta: f64,
    /// Nodes per chart axis of the graph domain.
    pub domain_nodes: usize,
    /// Nodes on the fiber circle.
    pub fiber_nodes: usize,
    /// Lipschitz budget constant `D`: membership requires
    /// `max(sup |beta|, Lip(beta) / D) <= delta / 2`.
    pub lip_budget: f64,
    /// Nonlinear solver settings for the per-node pull-back equations.
    pub newton: NewtonOptions,
    /// Track Cauchy increments with a twin chain started one step deeper.
    pub track_increments: bool,
}

impl GraphOptions {
    pub fn new(delta: f64, domain_nodes: usize, fiber_nodes: usize, lip_budget: f64) -> Self {
        Self {
            delta,
            domain_nodes,
            fiber_nodes,
            lip_budget,
            newton: NewtonOptions { tol: 1e-10, max_iters: 50, ..NewtonOptions::default() },
            track_increments: true,
        }
    }
}

/// Chart half-width for a measured perturbation size: proportional to the
/// perturbation with a floor at 1e-3 and capped by the chart scale 0.05.
pub fn default_delta(rho_hat: f64) -> f64 {
    (50.0 * rho_hat).max(1e-3).min(0.05)
}

/// Per-step diagnostics of one graph transform.
#[derive(Debug, Clone, Copy)]
pub struct TransformReport {
    pub sup_norm: f64,
    pub lipschitz: f64,
    pub max_residual: f64,
    pub max_iterations: usize,
    /// Contraction ratio `|T(b0) - T(b1)| / |b0 - b1|` when the transform ran
    /// on a leaf pair; `None` for single-leaf runs.
    pub measured_ratio: Option<f64>,
}

/// One graph-transform step: pull the leaf at the image of `at` (forward
/// image for center-stable, backward for center-unstable) back to `at`.
pub fn transform_leaf(
    pert: &PerturbedMap,
    kind: LeafKind,
    at: &BasePoint,
    incoming: &LeafFunction,
    opts: &GraphOptions,
) -> Result<(LeafFunction, TransformReport)> {
    let base = pert.skew().base();
    let target = base.step(at, kind.orbit_direction())?;
    let mut frame_at = base.chart(at, opts.delta);
    let mut frame_t = base.chart(&target, opts.delta);
    if kind == LeafKind::CenterUnstable {
        frame_at = frame_at.swapped();
        frame_t = frame_t.swapped();
    }
    let k_s = frame_at.dim_s;
    let k_u = frame_at.dim_u;
    if k_u == 0 {
        return Err(Error::InvalidArgument(
            "this base map has no contracting directions; center-unstable leaves degenerate"
                .into(),
        ));
    }
    if incoming.axis_dims() != k_s || incoming.value_dim() != k_u {
        return Err(Error::IncompatibleLeaf(alloc::format!(
            "incoming grid has {} axes / {} values, chart wants {k_s} / {k_u}",
            incoming.axis_dims(),
            incoming.value_dim()
        )));
    }
    if incoming.delta() != opts.delta {
        return Err(Error::IncompatibleLeaf(alloc::format!(
            "incoming delta {} differs from options delta {}",
            incoming.delta(),
            opts.delta
        )));
    }
    let target_ambient = base.ambient(&target);
    let dim = base.dim();
    let n_unknowns = dim + 1;

    let mut out = LeafFunction::zeros(k_s, incoming.axis_nodes(), incoming.fiber_nodes(), opts.delta, k_u);
    let mut report = TransformReport {
        sup_norm: 0.0,
        lipschitz: 0.0,
        max_residual: 0.0,
        max_iterations: 0,
        measured_ratio: None,
    };

    for idx in 0..out.node_count() {
        let (x_node, m_node) = out.node_domain(idx);
        let x_node = &x_node[..k_s];

        // Residual of the pull-back equations for unknowns
        // `w = (x_u value, image chart coordinates, image fiber coordinate)`:
        // evolve the graph point at `at` and subtract the incoming graph
        // point at the image parameters. Out-of-chart excursions during the
        // line search are rejected through a large synthetic residual.
        let residual = |w: &[f64], r: &mut [f64]| {
            let reject = |r: &mut [f64]| {
                for (i, slot) in r.iter_mut().enumerate() {
                    *slot = 1e6 * (1.0 + w[i].abs());
                }
            };
            let p_base = match frame_at.to_manifold(x_node, &w[..k_u]) {
                Ok(p) => p,
                Err(_) => return reject(r),
            };
            let evolved = match kind {
                LeafKind::CenterStable => pert.forward(&XPoint::new(p_base, m_node)),
                LeafKind::CenterUnstable => {
                    match pert.backward_near(&XPoint::new(p_base, m_node), &target_ambient) {
                        Ok(q) => q,
                        Err(_) => return reject(r),
                    }
                }
            };
            let x_img = &w[k_u..k_u + k_s];
            let m_img = w[k_u + k_s];
            let value = incoming.value(x_img, m_img);
            let t_base = match frame_t.to_manifold(x_img, &value[..k_u]) {
                Ok(p) => p,
                Err(_) => return reject(r),
            };
            let d = base.displacement(&evolved.base, &t_base);
            r[..dim].copy_from_slice(&d.as_slice()[..dim]);
            r[dim] = wrap_signed(evolved.m - m_img);
        };

        // Deterministic initial guess: zero value, image parameters from the
        // evolved zero-value node point.
        let mut w0 = [0.0f64; 4];
        {
            let p_base = frame_at
                .to_manifold(x_node, &[0.0; 2][..k_u])
                .map_err(|e| wrap_pull_error(idx, e))?;
            let evolved = match kind {
                LeafKind::CenterStable => pert.forward(&XPoint::new(p_base, m_node)),
                LeafKind::CenterUnstable => pert
                    .backward_near(&XPoint::new(p_base, m_node), &target_ambient)
                    .map_err(|e| wrap_pull_error(idx, e))?,
            };
            let (g_s, _g_u) = frame_t
                .from_manifold(&evolved.base)
                .map_err(|e| wrap_pull_error(idx, e))?;
            for a in 0..k_s {
                w0[k_u + a] = g_s[a].clamp(-opts.delta, opts.delta);
            }
            w0[k_u + k_s] = evolved.m;
        }

        let sol = newton::solve(residual, &w0[..n_unknowns], &opts.newton)
            .map_err(|e| wrap_pull_error(idx, e))?;
        out.set_node_value(idx, &sol.x[..k_u]);
        report.max_residual = report.max_residual.max(sol.residual);
        report.max_iterations = report.max_iterations.max(sol.iterations);
    }

    report.sup_norm = out.sup_norm();
    report.lipschitz = out.grid_lipschitz();
    let sup_cap = 0.5 * opts.delta;
    let lip_cap = 0.5 * opts.delta * opts.lip_budget;
    if report.sup_norm > sup_cap || report.lipschitz > lip_cap {
        return Err(Error::LeftInvariantSet {
            sup: report.sup_norm,
            sup_cap,
            lip: report.lipschitz,
            lip_cap,
        });
    }
    Ok((out, report))
}

fn wrap_pull_error(node: usize, source: Error) -> Error {
    Error::PullBackFailed { node, source: Box::new(source) }
}

/// Result of transforming two leaves over the same anchor point.
#[derive(Debug, Clone)]
pub struct PairContraction {
    pub out0: LeafFunction,
    pub out1: LeafFunction,
    /// Sup distance of the incoming pair.
    pub gap_in: f64,
    /// Sup distance of the transformed pair.
    pub gap_out: f64,
    /// Merged diagnostics; `measured_ratio` is `gap_out / gap_in`.
    pub report: TransformReport,
}

/// Transform a pair of leaves through the same step and measure the
/// contraction ratio of their sup distance — the operator's Lipschitz
/// constant on the invariant set, observed rather than assumed.
pub fn transform_leaf_pair(
    pert: &PerturbedMap,
    kind: LeafKind,
    at: &BasePoint,
    leaf0: &LeafFunction,
    leaf1: &LeafFunction,
    opts: &GraphOptions,
) -> Result<PairContraction> {
    let (out0, r0) = transform_leaf(pert, kind, at, leaf0, opts)?;
    let (out1, r1) = transform_leaf(pert, kind, at, leaf1, opts)?;
    let gap_in = leaf0.sup_diff(leaf1);
    let gap_out = out0.sup_diff(&out1);
    let report = TransformReport {
        sup_norm: r0.sup_norm.max(r1.sup_norm),
        lipschitz: r0.lipschitz.max(r1.lipschitz),
        max_residual: r0.max_residual.max(r1.max_residual),
        max_iterations: r0.max_iterations.max(r1.max_iterations),
        measured_ratio: (gap_in > 0.0).then(|| gap_out / gap_in),
    };
    Ok(PairContraction { out0, out1, gap_in, gap_out, report })
}

/// Grid Lipschitz measurements of the horizontal map along a leaf: the map
/// sending a graph node `(x, m)` to the domain coordinates of its evolved
/// image — stable chart block and fiber coordinate for a center-stable leaf.
/// Its Lipschitz constant controls how leaf regularity propagates under the
/// transform and is bounded by `(L + O(delta)) * (1 + Lip(leaf))`.
#[derive(Debug, Clone, Copy)]
pub struct HorizontalMapReport {
    /// Joint grid Lipschitz constant (sup metric on chart block and fiber).
    pub lipschitz: f64,
    /// Lipschitz constant of the chart block alone.
    pub block_lipschitz: f64,
    /// Grid Lipschitz constant of the leaf the map was measured along.
    pub leaf_lipschitz: f64,
}

fn horizontal_outputs(
    pert: &PerturbedMap,
    kind: LeafKind,
    at: &BasePoint,
    leaf: &LeafFunction,
    opts: &GraphOptions,
) -> Result<(Vec<([f64; 2], f64)>, usize)> {
    let base = pert.skew().base();
    let target = base.step(at, kind.orbit_direction())?;
    let mut frame_at = base.chart(at, opts.delta);
    let mut frame_t = base.chart(&target, opts.delta);
    if kind == LeafKind::CenterUnstable {
        frame_at = frame_at.swapped();
        frame_t = frame_t.swapped();
    }
    let k_s = frame_at.dim_s;
    let k_u = frame_at.dim_u;
    if leaf.axis_dims() != k_s || leaf.value_dim() != k_u {
        return Err(Error::IncompatibleLeaf(
            "leaf grid does not match the chart split at this point".into(),
        ));
    }
    let target_ambient = base.ambient(&target);
    let mut outputs = Vec::with_capacity(leaf.node_count());
    for idx in 0..leaf.node_count() {
        let (x_node, m_node) = leaf.node_domain(idx);
        let value = leaf.node_value(idx);
        let p_base = frame_at
            .to_manifold(&x_node[..k_s], &value[..k_u])
            .map_err(|e| wrap_pull_error(idx, e))?;
        let evolved = match kind {
            LeafKind::CenterStable => pert.forward(&XPoint::new(p_base, m_node)),
            LeafKind::CenterUnstable => pert
                .backward_near(&XPoint::new(p_base, m_node), &target_ambient)
                .map_err(|e| wrap_pull_error(idx, e))?,
        };
        let (g_s, _) = frame_t
            .from_manifold(&evolved.base)
            .map_err(|e| wrap_pull_error(idx, e))?;
        outputs.push((g_s, evolved.m));
    }
    Ok((outputs, k_s))
}

/// Measure the horizontal map along `leaf` over `at` on the leaf's own grid.
pub fn measure_horizontal_map(
    pert: &PerturbedMap,
    kind: LeafKind,
    at: &BasePoint,
    leaf: &LeafFunction,
    opts: &GraphOptions,
) -> Result<HorizontalMapReport> {
    let (outputs, k_s) = horizontal_outputs(pert, kind, at, leaf, opts)?;
    let n = leaf.axis_nodes();
    let fiber = leaf.fiber_nodes();
    let axis_step = if n > 1 { 2.0 * opts.delta / (n - 1) as f64 } else { 1.0 };
    let fiber_step = 1.0 / fiber as f64;
    let mut strides = [0usize; 2];
    let mut s = fiber;
    for a in (0..k_s).rev() {
        strides[a] = s;
        s *= n;
    }
    let out_gap = |i: usize, j: usize| -> (f64, f64) {
        let (a, ma) = outputs[i];
        let (b, mb) = outputs[j];
        let mut block = 0.0f64;
        for c in 0..k_s {
            block = block.max((a[c] - b[c]).abs());
        }
        (block, block.max(crate::geom::circle_dist(ma, mb)))
    };
    let mut lip = 0.0f64;
    let mut block_lip = 0.0f64;
    for idx in 0..outputs.len() {
        let j = idx % fiber;
        let mut rest = idx / fiber;
        let mut multi = [0usize; 2];
        for a in (0..k_s).rev() {
            multi[a] = rest % n;
            rest /= n;
        }
        for a in 0..k_s {
            if multi[a] + 1 < n {
                let (block, joint) = out_gap(idx, idx + strides[a]);
                lip = lip.max(joint / axis_step);
                block_lip = block_lip.max(block / axis_step);
            }
        }
        let fiber_next = if j + 1 < fiber { idx + 1 } else { idx + 1 - fiber };
        let (block, joint) = out_gap(idx, fiber_next);
        lip = lip.max(joint / fiber_step);
        block_lip = block_lip.max(block / fiber_step);
    }
    Ok(HorizontalMapReport {
        lipschitz: lip,
        block_lipschitz: block_lip,
        leaf_lipschitz: leaf.grid_lipschitz(),
    })
}

/// Stability of the horizontal family in the leaf: sup distance between the
/// horizontal maps along two leaves over the same point, divided by the sup
/// distance of the leaves.
pub fn horizontal_map_gap(
    pert: &PerturbedMap,
    kind: LeafKind,
    at: &BasePoint,
    leaf0: &LeafFunction,
    leaf1: &LeafFunction,
    opts: &GraphOptions,
) -> Result<f64> {
    let gap_in = leaf0.sup_diff(leaf1);
    if gap_in <= 0.0 {
        return Err(Error::InvalidArgument("leaf pair coincides; stability ratio undefined".into()));
    }
    let (out0, k_s) = horizontal_outputs(pert, kind, at, leaf0, opts)?;
    let (out1, _) = horizontal_outputs(pert, kind, at, leaf1, opts)?;
    let mut gap = 0.0f64;
    for (a, b) in out0.iter().zip(out1.iter()) {
        for c in 0..k_s {
            gap = gap.max((a.0[c] - b.0[c]).abs());
        }
        gap = gap.max(crate::geom::circle_dist(a.1, b.1));
    }
    Ok(gap / gap_in)
}

/// An invariant leaf solved to finite depth, with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct InvariantLeaf {
    /// The leaf graph in the chart at the anchor point.
    pub leaf: LeafFunction,
    /// Chart the graph lives in (roles swapped for center-unstable leaves).
    pub frame: ChartFrame,
    /// Cauchy increments `sup |beta^(j+1) - beta^(j)|` per level, from the
    /// deep end of the orbit (index 0) to the anchor (last).
    pub increments: Vec<f64>,
    /// Ratios of consecutive increments where the denominator is resolvable.
    pub ratios: Vec<f64>,
    /// Diagnostics of every transform along the main chain, in execution
    /// order (deep end first).
    pub reports: Vec<TransformReport>,
}

impl InvariantLeaf {
    /// Largest increment ratio, if any were resolvable.
    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios.iter().copied().reduce(f64::max)
    }

    /// A-posteriori sup distance to the depth-infinity leaf: geometric tail
    /// of the last increment at the observed worst-case rate.
    pub fn tail_bound(&self, rate_cap: f64) -> Option<f64> {
        let last = *self.increments.last()?;
        let rate = self.max_ratio()?.min(rate_cap);
        (rate < 1.0).then(|| last * rate / (1.0 - rate))
    }
}

/// Solve for the invariant leaf at `at` by `depth` pull-back steps from the
/// zero graph at the end of the orbit.
///
/// Center-stable leaves pull down forward orbits, center-unstable leaves down
/// backward orbits; the latter consume past symbols, so symbolic base points
/// need an itinerary of at least `depth + 1` symbols (plus whatever accuracy
/// the chart frames need from the remaining past).
pub fn solve_invariant_leaf(
    pert: &PerturbedMap,
    kind: LeafKind,
    at: &BasePoint,
    depth: usize,
    opts: &GraphOptions,
) -> Result<InvariantLeaf> {
    let base = pert.skew().base();
    let orbit = base.orbit(at, depth, kind.orbit_direction())?;
    let frame0 = {
        let f = base.chart(&orbit[0], opts.delta);
        if kind == LeafKind::CenterUnstable { f.swapped() } else { f }
    };
    let (k_s, k_u) = (frame0.dim_s, frame0.dim_u);
    if k_u == 0 {
        return Err(Error::InvalidArgument(
            "this base map has no contracting directions; center-unstable leaves degenerate"
                .into(),
        ));
    }
    let zero = LeafFunction::zeros(k_s, opts.domain_nodes.max(2), opts.fiber_nodes, opts.delta, k_u);

    let mut cur = zero.clone();
    let mut probe = None;
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    let mut reports = Vec::new();
    if opts.track_increments {
        // Twin chain one step deeper: its gap to the main chain at each level
        // is exactly the increment between successive depth approximations.
        let (p, _) = transform_leaf(pert, kind, &orbit[depth], &zero, opts)?;
        increments.push(p.sup_diff(&cur));
        probe = Some(p);
    }
    for j in (0..depth).rev() {
        let (next, rep) = transform_leaf(pert, kind, &orbit[j], &cur, opts)?;
        reports.push(rep);
        if let Some(p) = probe.take() {
            let (pn, _) = transform_leaf(pert, kind, &orbit[j], &p, opts)?;
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
    Ok(InvariantLeaf { leaf: cur, frame: frame0, increments, ratios, reports })
}

/// A random graph satisfying the invariant-set membership bounds
/// `max(sup, Lip / D) <= delta / 2` with a factor-two margin: low trig modes
/// along the fiber, affine in the chart axes, rescaled to the budget.
pub fn random_admissible_leaf<R: Rng + ?Sized>(
    rng: &mut R,
    axis_dims: usize,
    value_dim: usize,
    opts: &GraphOptions,
) -> LeafFunction {
    let mut leaf = LeafFunction::zeros(
        axis_dims,
        opts.domain_nodes.max(2),
        opts.fiber_nodes,
        opts.delta,
        value_dim,
    );
    let mut coef = [[0.0f64; 4]; 2];
    let mut phase = [[0.0f64; 2]; 2];
    let mut freq = [[0.0f64; 2]; 2];
    for c in 0..value_dim {
        for t in 0..4 {
            coef[c][t] = rng.gen_range(-1.0..1.0);
        }
        for t in 0..2 {
            phase[c][t] = rng.gen_range(0.0..core::f64::consts::TAU);
            freq[c][t] = f64::from(rng.gen_range(1..=3i32));
        }
    }
    leaf.fill_with(|x, m| {
        let mut v = [0.0; 2];
        for c in 0..value_dim {
            let mut s = coef[c][0];
            for (a, &xa) in x.iter().enumerate() {
                s += coef[c][1 + a] * xa / opts.delta;
            }
            for t in 0..2 {
                s += coef[c][3] * (core::f64::consts::TAU * freq[c][t] * m + phase[c][t]).cos();
            }
            v[c] = s;
        }
        v
    });
    let sup = leaf.sup_norm();
    let lip = leaf.grid_lipschitz();
    let cap = 0.25 * opts.delta;
    let mut s = f64::INFINITY;
    if sup > 0.0 {
        s = s.min(cap / sup);
    }
    if lip > 0.0 {
        s = s.min(cap * opts.lip_budget / lip);
    }
    if s.is_finite() {
        leaf.scale(s);
    }
    leaf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseMap;
    use crate::geom::Coords;
    use crate::skew::{make_standard_perturbation, FiberFamily, SkewProduct};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TEST_BUDGET: f64 = 21.0;

    fn solenoid_pert(eps: f64) -> PerturbedMap {
        let skew =
            SkewProduct::new(BaseMap::default_solenoid(), FiberFamily::default_trig()).unwrap();
        make_standard_perturbation(&skew, eps, 42)
    }

    fn torus_pert(eps: f64) -> PerturbedMap {
        let skew = SkewProduct::new(BaseMap::torus(), FiberFamily::default_trig()).unwrap();
        make_standard_perturbation(&skew, eps, 42)
    }

    fn doubling_pert(eps: f64) -> PerturbedMap {
        let skew = SkewProduct::new(BaseMap::doubling(), FiberFamily::default_trig()).unwrap();
        make_standard_perturbation(&skew, eps, 42)
    }

    fn point(base: &BaseMap, seed: u64, past: usize) -> BasePoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        base.random_point(&mut rng, past)
    }

    #[test]
    fn unperturbed_solenoid_cs_leaf_is_zero() {
        // The affine stable plane times the fiber is exactly invariant for
        // the unperturbed skew product, so the solved graph stays at zero.
        let pert = solenoid_pert(0.0);
        let opts = GraphOptions::new(0.02, 5, 16, TEST_BUDGET);
        let at = point(pert.skew().base(), 1, 24);
        let sol = solve_invariant_leaf(&pert, LeafKind::CenterStable, &at, 6, &opts).unwrap();
        assert!(sol.leaf.sup_norm() < 1e-9, "sup = {:.3e}", sol.leaf.sup_norm());
    }

    #[test]
    fn unperturbed_torus_leaves_are_zero_both_kinds() {
        let pert = torus_pert(0.0);
        let opts = GraphOptions::new(0.02, 7, 16, TEST_BUDGET);
        let at = point(pert.skew().base(), 2, 0);
        for kind in [LeafKind::CenterStable, LeafKind::CenterUnstable] {
            let sol = solve_invariant_leaf(&pert, kind, &at, 8, &opts).unwrap();
            assert!(sol.leaf.sup_norm() < 1e-9, "{kind:?}: {:.3e}", sol.leaf.sup_norm());
        }
    }

    #[test]
    fn unperturbed_doubling_cs_leaf_is_zero() {
        let pert = doubling_pert(0.0);
        let opts = GraphOptions::new(0.02, 2, 16, TEST_BUDGET);
        let at = point(pert.skew().base(), 3, 24);
        let sol = solve_invariant_leaf(&pert, LeafKind::CenterStable, &at, 6, &opts).unwrap();
        assert!(sol.leaf.sup_norm() < 1e-9);
    }

    #[test]
    fn doubling_center_unstable_is_rejected() {
        let pert = doubling_pert(0.0);
        let opts = GraphOptions::new(0.02, 2, 16, TEST_BUDGET);
        let at = point(pert.skew().base(), 3, 24);
        let err = solve_invariant_leaf(&pert, LeafKind::CenterUnstable, &at, 3, &opts).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn unperturbed_solenoid_cu_leaf_matches_unstable_curve() {
        // For the unperturbed solenoid the center-unstable leaf is the true
        // unstable curve times the fiber: the curve through `p` traced by
        // moving the angle while keeping the past itinerary. Solve the leaf,
        // then compare node values against that curve expressed in the chart.
        let pert = solenoid_pert(0.0);
        let base = pert.skew().base().clone();
        let opts = GraphOptions::new(0.02, 17, 8, TEST_BUDGET);
        let at = point(&base, 4, 40);
        let sol = solve_invariant_leaf(&pert, LeafKind::CenterUnstable, &at, 8, &opts).unwrap();

        let curve = |t: f64| -> Coords {
            let BasePoint::Solenoid(sp) = &at else { unreachable!() };
            let mut moved = sp.clone();
            moved.angle = crate::geom::wrap01(moved.angle + t);
            base.ambient(&BasePoint::Solenoid(moved))
        };
        // Invert the chart's domain coordinate along the curve by bisection.
        let frame = &sol.frame;
        let domain_coord = |t: f64| frame.from_manifold(&curve(t)).unwrap().0[0];
        let mut max_err = 0.0f64;
        for i in 0..opts.domain_nodes {
            let x = -opts.delta + 2.0 * opts.delta * i as f64 / (opts.domain_nodes - 1) as f64;
            // The unstable frame vector has angle component ~ 1/pi, so the
            // domain coordinate sweeps past +-delta well inside |t| <= 0.012
            // (and the chart stays valid there).
            let t = newton::bisect(|t| domain_coord(t) - x, -0.012, 0.012, 1e-13, 200).unwrap();
            let expect = frame.from_manifold(&curve(t)).unwrap().1;
            let got = sol.leaf.value(&[x], 0.25);
            for c in 0..2 {
                max_err = max_err.max((got[c] - expect[c]).abs());
            }
        }
        assert!(max_err < 5e-4, "curve mismatch {max_err:.3e}");
        // Fiber-independence: the values must not vary along m.
        let mut vary = 0.0f64;
        for idx in 0..sol.leaf.node_count() {
            let (x, _) = sol.leaf.node_domain(idx);
            let v0 = sol.leaf.value(&x[..1], 0.0);
            let v = sol.leaf.node_value(idx);
            vary = vary.max((v[0] - v0[0]).abs()).max((v[1] - v0[1]).abs());
        }
        assert!(vary < 1e-9, "fiber variation {vary:.3e}");
    }

    #[test]
    fn perturbed_cs_leaf_is_set_invariant() {
        // Independent of the transform's own equations: sample points on the
        // solved leaf at `b`, push them forward with the perturbed map, and
        // check they land on the solved leaf at `h(b)`.
        let pert = solenoid_pert(1e-2);
        let base = pert.skew().base().clone();
        let opts = GraphOptions::new(default_delta(1e-2), 9, 48, TEST_BUDGET);
        let at = point(&base, 5, 24);
        let next = base.step(&at, Direction::Forward).unwrap();
        let leaf_b = solve_invariant_leaf(&pert, LeafKind::CenterStable, &at, 12, &opts).unwrap();
        let leaf_hb = solve_invariant_leaf(&pert, LeafKind::CenterStable, &next, 12, &opts).unwrap();
        let frame_hb = &leaf_hb.frame;

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut max_err = 0.0f64;
        for _ in 0..50 {
            let x = [
                rng.gen_range(-0.9 * opts.delta..0.9 * opts.delta),
                rng.gen_range(-0.9 * opts.delta..0.9 * opts.delta),
            ];
            let m = rng.gen_range(0.0..1.0);
            let v = leaf_b.leaf.value(&x, m);
            let p = leaf_b.frame.to_manifold(&x, &v[..1]).unwrap();
            let image = pert.forward(&XPoint::new(p, m));
            let (g_s, g_u) = frame_hb.from_manifold(&image.base).unwrap();
            let expect = leaf_hb.leaf.value(&g_s[..2], image.m);
            max_err = max_err.max((g_u[0] - expect[0]).abs());
        }
        assert!(max_err < 5e-4, "invariance residual {max_err:.3e}");
    }

    #[test]
    fn cauchy_increments_contract_at_the_stated_rate() {
        let pert = solenoid_pert(1e-3);
        let opts = GraphOptions::new(default_delta(1e-3), 7, 24, TEST_BUDGET);
        let at = point(pert.skew().base(), 6, 24);
        let sol = solve_invariant_leaf(&pert, LeafKind::CenterStable, &at, 12, &opts).unwrap();
        assert!(sol.increments[0] > 1e-9, "perturbation leaves no signal");
        let ratios = &sol.ratios;
        assert!(ratios.len() >= 8, "too few resolvable ratios: {}", ratios.len());
        for (i, r) in ratios.iter().enumerate() {
            assert!(*r <= 0.6, "ratio {r:.4} at level {i} exceeds 0.6");
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(mean <= 0.55, "mean ratio {mean:.4}");
        assert!(sol.tail_bound(0.6).unwrap() < opts.delta, "tail bound unexpectedly large");
    }

    #[test]
    fn deeper_solve_equals_one_more_pullback_bitwise() {
        let pert = solenoid_pert(1e-3);
        let base = pert.skew().base().clone();
        let mut opts = GraphOptions::new(default_delta(1e-3), 5, 16, TEST_BUDGET);
        opts.track_increments = false;
        let at = point(&base, 7, 24);
        let h_at = base.step(&at, Direction::Forward).unwrap();
        let shallow = solve_invariant_leaf(&pert, LeafKind::CenterStable, &h_at, 5, &opts).unwrap();
        let (pulled, _) =
            transform_leaf(&pert, LeafKind::CenterStable, &at, &shallow.leaf, &opts).unwrap();
        let deep = solve_invariant_leaf(&pert, LeafKind::CenterStable, &at, 6, &opts).unwrap();
        assert_eq!(pulled, deep.leaf, "chained pull-backs must be reproducible bit for bit");
    }

    #[test]
    fn fiber_grid_refinement_converges_at_second_order() {
        // The doubling base keeps this cheap: the center-stable graph is a
        // genuine curve over the fiber circle once the map is perturbed.
        let pert = doubling_pert(1e-2);
        let at = point(pert.skew().base(), 8, 40);
        let solve_at = |fiber_nodes: usize| {
            let opts = GraphOptions::new(default_delta(1e-2), 2, fiber_nodes, TEST_BUDGET);
            solve_invariant_leaf(&pert, LeafKind::CenterStable, &at, 10, &opts).unwrap().leaf
        };
        let reference = solve_at(256);
        let err = |coarse: &LeafFunction| {
            let mut e = 0.0f64;
            for idx in 0..reference.node_count() {
                let (_, m) = reference.node_domain(idx);
                e = e.max((coarse.value(&[], m)[0] - reference.node_value(idx)[0]).abs());
            }
            e
        };
        let e16 = err(&solve_at(16));
        let e32 = err(&solve_at(32));
        let e64 = err(&solve_at(64));
        assert!(e16 > e32 && e32 > e64, "errors not decreasing: {e16:.2e} {e32:.2e} {e64:.2e}");
        assert!(e16 / e32 > 2.5, "first refinement ratio {:.2}", e16 / e32);
        assert!(e32 / e64 > 2.5, "second refinement ratio {:.2}", e32 / e64);
    }

    #[test]
    fn random_admissible_pairs_contract() {
        let pert = solenoid_pert(1e-3);
        let opts = GraphOptions::new(default_delta(1e-3), 5, 16, TEST_BUDGET);
        let at = point(pert.skew().base(), 10, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..20 {
            let a = random_admissible_leaf(&mut rng, 2, 1, &opts);
            let b = random_admissible_leaf(&mut rng, 2, 1, &opts);
            if a.sup_diff(&b) < 1e-10 {
                continue;
            }
            let pair =
                transform_leaf_pair(&pert, LeafKind::CenterStable, &at, &a, &b, &opts).unwrap();
            let ratio = pair.report.measured_ratio.unwrap();
            assert!(ratio <= 0.6, "pair {trial}: contraction ratio {ratio:.4}");
            assert!((ratio - pair.gap_out / pair.gap_in).abs() < 1e-15);
        }
    }

    #[test]
    fn horizontal_map_identity_family_matches_closed_form() {
        // Unperturbed solenoid with the identity fiber family along the zero
        // leaf: the chart block contracts by exactly lambda (the frames are
        // the canonical disk axes at every point) and the fiber coordinate is
        // carried by the identity, so the joint constant is exactly 1.
        let skew = SkewProduct::new(BaseMap::default_solenoid(), FiberFamily::identity()).unwrap();
        let pert = make_standard_perturbation(&skew, 0.0, 1);
        let opts = GraphOptions::new(0.02, 9, 16, TEST_BUDGET);
        let at = point(pert.skew().base(), 12, 24);
        let zero = LeafFunction::zeros(2, opts.domain_nodes, opts.fiber_nodes, opts.delta, 1);
        let rep =
            measure_horizontal_map(&pert, LeafKind::CenterStable, &at, &zero, &opts).unwrap();
        assert!((rep.lipschitz - 1.0).abs() <= 0.05, "joint Lip {}", rep.lipschitz);
        assert!((rep.block_lipschitz - 0.05).abs() <= 0.05 * 0.05, "block Lip {}", rep.block_lipschitz);
        assert_eq!(rep.leaf_lipschitz, 0.0);
    }

    #[test]
    fn horizontal_map_obeys_the_composition_bound() {
        // Solved leaf for a perturbed map: the joint constant must stay below
        // (L + c * delta) * (1 + Lip(leaf)) with L measured from the
        // dominated-splitting check, not assumed.
        let pert = solenoid_pert(1e-3);
        let split = crate::skew::check_dominated_splitting(pert.skew()).unwrap();
        let opts = GraphOptions::new(default_delta(1e-3), 7, 24, TEST_BUDGET);
        let at = point(pert.skew().base(), 13, 24);
        let sol = solve_invariant_leaf(&pert, LeafKind::CenterStable, &at, 10, &opts).unwrap();
        let rep =
            measure_horizontal_map(&pert, LeafKind::CenterStable, &at, &sol.leaf, &opts).unwrap();
        let bound = (split.l_value + 4.0 * opts.delta) * (1.0 + rep.leaf_lipschitz);
        assert!(rep.lipschitz <= bound, "Lip {} exceeds bound {}", rep.lipschitz, bound);
        // The fiber direction genuinely expands for the default family, so
        // the constant is not vacuously small.
        assert!(rep.lipschitz > 1.0, "Lip {} suspiciously small", rep.lipschitz);
    }

    #[test]
    fn horizontal_maps_depend_stably_on_the_leaf() {
        let pert = solenoid_pert(1e-3);
        let opts = GraphOptions::new(default_delta(1e-3), 5, 16, TEST_BUDGET);
        let at = point(pert.skew().base(), 14, 24);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_admissible_leaf(&mut rng, 2, 1, &opts);
        let b = random_admissible_leaf(&mut rng, 2, 1, &opts);
        let c = horizontal_map_gap(&pert, LeafKind::CenterStable, &at, &a, &b, &opts).unwrap();
        assert!(c.is_finite() && c > 0.0, "stability constant {c}");
        assert!(c <= 5.0, "stability constant {c} implausibly large");
        let same = horizontal_map_gap(&pert, LeafKind::CenterStable, &at, &a, &a, &opts);
        assert!(matches!(same, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn oversized_perturbation_is_detected() {
        let pert = solenoid_pert(2.0);
        let opts = GraphOptions::new(0.05, 5, 16, TEST_BUDGET);
        let at = point(pert.skew().base(), 11, 24);
        let res = solve_invariant_leaf(&pert, LeafKind::CenterStable, &at, 6, &opts);
        assert!(res.is_err(), "a unit-size perturbation cannot stay in the 0.05 chart");
    }
}
