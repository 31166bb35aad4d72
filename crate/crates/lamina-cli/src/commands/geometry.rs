//! Geometric subcommands: invariant-leaf solves, contraction sweeps, central
//! curves, induced fiber maps, regularity fits, and the dimension-transport
//! check for leaf-value images of sampled exceptional sets.

use std::io::Write;

use anyhow::Result;
use clap::{Args, ValueEnum};
use lamina_core::base::Direction;
use lamina_core::geom::{wrap01, wrap_signed, Coords};
use lamina_core::{
    alpha_theoretical, box_counts, box_dimension, central_holder_pairs, central_leaf,
    conjugated_fiber_map, fit_holder_exponent, global_leaf_value, holder_image_dimension_bound,
    invariance_residual, random_admissible_leaf, sample_deviating_arcs, solve_invariant_leaf,
    stable_value_holder_pairs, transform_leaf_pair, AlphaMode, BasePoint, LeafKind,
};
use rand::Rng;
use rayon::prelude::*;

use super::{parse_pattern, Ctx};
use crate::output::{check, meta_json, num, write_json, write_meta};

/// Invariant leaf family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    /// Center-stable leaves, pulled back along forward orbits.
    Cs,
    /// Center-unstable leaves, pulled back along backward orbits.
    Cu,
}

impl KindArg {
    fn core(self) -> LeafKind {
        match self {
            KindArg::Cs => LeafKind::CenterStable,
            KindArg::Cu => LeafKind::CenterUnstable,
        }
    }

    fn name(self) -> &'static str {
        match self {
            KindArg::Cs => "center-stable",
            KindArg::Cu => "center-unstable",
        }
    }
}

fn coords_str(c: &Coords) -> String {
    c.as_slice().iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "unresolved".into())
}

#[derive(Debug, Args)]
pub struct SolveLeafArgs {
    /// Invariant family to solve.
    #[arg(long, value_enum, default_value_t = KindArg::Cs)]
    pub kind: KindArg,
    /// Pull-back depth; 0 uses the configured depth for the family.
    #[arg(long, default_value_t = 0)]
    pub depth: usize,
    /// Backward-itinerary length of sampled base points.
    #[arg(long, default_value_t = 48)]
    pub past: usize,
}

/// Solve one invariant leaf at a sampled base point and emit its node grid.
pub fn solve_leaf(ctx: &Ctx, args: &SolveLeafArgs) -> Result<()> {
    let pert = ctx.config.perturbation()?;
    let base = pert.skew().base().clone();
    let opts = ctx.config.graph_options()?;
    let kind = args.kind.core();
    let depth = if args.depth > 0 {
        args.depth
    } else {
        match kind {
            LeafKind::CenterStable => ctx.config.grid.cs_depth,
            LeafKind::CenterUnstable => ctx.config.grid.cu_depth,
        }
    };
    let mut rng = ctx.rng(1);
    let at = base.random_point(&mut rng, args.past.max(depth + 4));
    let solved = solve_invariant_leaf(&pert, kind, &at, depth, &opts)?;
    let report = solved.reports.last().expect("solver ran at least one step");
    let max_ratio = solved.ratios.iter().copied().reduce(f64::max);

    let mut w = ctx.sink()?;
    write_meta(
        &mut w,
        "solve-leaf",
        &ctx.config,
        &[
            ("kind", args.kind.name().into()),
            ("depth", depth.to_string()),
            ("delta", num(opts.delta)),
            ("anchor", coords_str(&base.ambient(&at))),
            ("sup-norm", num(report.sup_norm)),
            ("lipschitz", num(report.lipschitz)),
            ("max-residual", num(report.max_residual)),
            ("max-newton-iterations", report.max_iterations.to_string()),
            ("cauchy-ratio-max", opt_num(max_ratio)),
        ],
    )?;
    let leaf = &solved.leaf;
    let mut header = vec!["node".to_string()];
    header.extend((0..leaf.axis_dims()).map(|i| format!("axis{i}")));
    header.push("m".into());
    header.extend((0..leaf.value_dim()).map(|i| format!("value{i}")));
    writeln!(w, "{}", header.join(","))?;
    for idx in 0..leaf.node_count() {
        let (x, m) = leaf.node_domain(idx);
        let v = leaf.node_value(idx);
        let mut row = vec![idx.to_string()];
        row.extend(x[..leaf.axis_dims()].iter().map(|&c| num(c)));
        row.push(num(m));
        row.extend(v[..leaf.value_dim()].iter().map(|&c| num(c)));
        writeln!(w, "{}", row.join(","))?;
    }
    w.finish()
}

#[derive(Debug, Args)]
pub struct ContractionArgs {
    /// Number of admissible leaf pairs pushed through one transform step.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Number of distinct anchor points the pairs cycle through.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    /// Required upper bound on every measured contraction ratio.
    #[arg(long, default_value_t = 0.6)]
    pub bound: f64,
    /// Invariant family whose transform is measured.
    #[arg(long, value_enum, default_value_t = KindArg::Cs)]
    pub kind: KindArg,
    /// Backward-itinerary length of sampled base points.
    #[arg(long, default_value_t = 48)]
    pub past: usize,
}

struct ContractionRow {
    pair: usize,
    point: usize,
    gap_in: f64,
    gap_out: f64,
    ratio: Option<f64>,
    sup_norm: f64,
    lipschitz: f64,
    max_residual: f64,
}

/// Sweep random admissible leaf pairs through one graph-transform step and
/// verify the measured contraction ratios against the bound.
pub fn contraction(ctx: &Ctx, args: &ContractionArgs) -> Result<()> {
    anyhow::ensure!(args.pairs >= 1, "need at least one pair");
    anyhow::ensure!(args.points >= 1, "need at least one anchor point");
    let pert = ctx.config.perturbation()?;
    let base = pert.skew().base().clone();
    let opts = ctx.config.graph_options()?;
    let kind = args.kind.core();
    let mut point_rng = ctx.rng(2);
    let points: Vec<BasePoint> =
        (0..args.points).map(|_| base.random_point(&mut point_rng, args.past)).collect();
    let (axis_dims, value_dim) = match kind {
        LeafKind::CenterStable => (base.dim_stable(), base.dim_unstable()),
        LeafKind::CenterUnstable => (base.dim_unstable(), base.dim_stable()),
    };

    let rows = (0..args.pairs)
        .into_par_iter()
        .map(|i| -> Result<ContractionRow> {
            let mut rng = ctx.rng(1_000 + i as u64);
            let at = &points[i % points.len()];
            let leaf0 = random_admissible_leaf(&mut rng, axis_dims, value_dim, &opts);
            let leaf1 = random_admissible_leaf(&mut rng, axis_dims, value_dim, &opts);
            let pc = transform_leaf_pair(&pert, kind, at, &leaf0, &leaf1, &opts)?;
            Ok(ContractionRow {
                pair: i,
                point: i % points.len(),
                gap_in: pc.gap_in,
                gap_out: pc.gap_out,
                ratio: pc.report.measured_ratio,
                sup_norm: pc.report.sup_norm,
                lipschitz: pc.report.lipschitz,
                max_residual: pc.report.max_residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let resolved = rows.iter().filter(|r| r.ratio.is_some()).count();
    anyhow::ensure!(resolved > 0, "no pair produced a resolvable contraction ratio");
    let max_ratio =
        rows.iter().filter_map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);

    let mut w = ctx.sink()?;
    write_meta(
        &mut w,
        "contraction",
        &ctx.config,
        &[
            ("kind", args.kind.name().into()),
            ("pairs", args.pairs.to_string()),
            ("points", args.points.to_string()),
            ("delta", num(opts.delta)),
            ("bound", num(args.bound)),
            ("max-ratio", num(max_ratio)),
            ("resolved", resolved.to_string()),
        ],
    )?;
    writeln!(w, "pair,point,gap_in,gap_out,ratio,sup_norm,lipschitz,max_residual")?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.pair,
            r.point,
            num(r.gap_in),
            num(r.gap_out),
            num(r.ratio.unwrap_or(f64::NAN)),
            num(r.sup_norm),
            num(r.lipschitz),
            num(r.max_residual)
        )?;
    }
    w.finish()?;
    check(
        max_ratio <= args.bound,
        format!("worst contraction ratio {max_ratio:.6} exceeds bound {:.6}", args.bound),
    )
}

#[derive(Debug, Args)]
pub struct CentralArgs {
    /// Also solve the leaf at the forward image and measure how far the
    /// push-forward of this leaf leaves that graph.
    #[arg(long)]
    pub invariance: bool,
    /// Required bound on the push-forward residual (with --invariance).
    #[arg(long, default_value_t = 1e-6)]
    pub max_residual: f64,
    /// Backward-itinerary length of the sampled anchor.
    #[arg(long, default_value_t = 48)]
    pub past: usize,
}

/// Build the central curve at a sampled anchor and emit its fiber nodes.
pub fn central(ctx: &Ctx, args: &CentralArgs) -> Result<()> {
    let pert = ctx.config.perturbation()?;
    let base = pert.skew().base().clone();
    let copts = ctx.config.central_options()?;
    let mut rng = ctx.rng(3);
    let at = base.random_point(&mut rng, args.past.max(copts.cu_depth + 4));
    let leaf = central_leaf(&pert, &at, &copts)?;
    let d = &leaf.diagnostics;

    let mut extra = vec![
        ("delta", num(leaf.delta)),
        ("anchor", coords_str(&base.ambient(&at))),
        ("sup-beta", num(d.sup_beta)),
        ("lip-beta", num(d.lip_beta)),
        ("sup-tilde", num(d.sup_tilde)),
        ("lip-tilde", num(d.lip_tilde)),
        ("fixed-point-iterations", d.max_fixed_point_iters.to_string()),
        ("fixed-point-residual", num(d.max_fixed_point_residual)),
        ("cs-ratio", opt_num(d.cs_ratio)),
        ("cu-ratio", opt_num(d.cu_ratio)),
    ];
    let residual = if args.invariance {
        let at_next = base.step(&at, Direction::Forward)?;
        let leaf_next = central_leaf(&pert, &at_next, &copts)?;
        let r = invariance_residual(&pert, &leaf, &leaf_next)?;
        extra.push(("invariance-residual", num(r)));
        Some(r)
    } else {
        None
    };

    let mut w = ctx.sink()?;
    write_meta(&mut w, "central", &ctx.config, &extra)?;
    let dim = base.dim();
    let mut header = vec!["node".to_string(), "m".into()];
    header.extend(["beta_s0", "beta_s1", "beta_u0", "beta_u1"].map(String::from));
    header.extend((0..dim).map(|i| format!("base{i}")));
    writeln!(w, "{}", header.join(","))?;
    let n = leaf.nodes();
    for j in 0..n {
        let m = j as f64 / n as f64;
        let (x_s, x_u) = leaf.beta[j];
        let tilde = leaf.tilde_at(m);
        let mut row = vec![j.to_string(), num(m)];
        row.extend(x_s.iter().chain(x_u.iter()).map(|&c| num(c)));
        row.extend(tilde.as_slice().iter().map(|&c| num(c)));
        writeln!(w, "{}", row.join(","))?;
    }
    w.finish()?;
    if let Some(r) = residual {
        check(
            r <= args.max_residual,
            format!("push-forward residual {r:.3e} exceeds {:.3e}", args.max_residual),
        )?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ConjugateArgs {
    /// Fiber grid nodes of the induced map; 0 uses central-nodes.
    #[arg(long, default_value_t = 0)]
    pub nodes: usize,
    /// Required bound on the composition residual sup |g^-1(g(m)) - m|.
    #[arg(long, default_value_t = 1e-6)]
    pub max_composition: f64,
    /// Backward-itinerary length of the sampled anchor.
    #[arg(long, default_value_t = 48)]
    pub past: usize,
}

/// Conjugate the perturbed dynamics with the central leaves at an anchor and
/// its forward image; emit the induced fiber circle map and its inverse.
pub fn conjugate(ctx: &Ctx, args: &ConjugateArgs) -> Result<()> {
    let pert = ctx.config.perturbation()?;
    let base = pert.skew().base().clone();
    let copts = ctx.config.central_options()?;
    let mut rng = ctx.rng(4);
    let at = base.random_point(&mut rng, args.past.max(copts.cu_depth + 6));
    let at_next = base.step(&at, Direction::Forward)?;
    let leaf_b = central_leaf(&pert, &at, &copts)?;
    let leaf_hb = central_leaf(&pert, &at_next, &copts)?;
    let nodes = if args.nodes > 0 { args.nodes } else { ctx.config.grid.central_nodes };
    let g = conjugated_fiber_map(&pert, &leaf_b, &leaf_hb, nodes)?;
    let b_amb = base.ambient(&at);
    let rho = pert.epsilon();

    let mut extra = vec![
        ("anchor", coords_str(&b_amb)),
        ("nodes", nodes.to_string()),
        ("c0-distance", num(g.c0_distance)),
        ("c1-distance", num(g.c1_distance)),
        ("composition-residual", num(g.composition_residual)),
    ];
    if rho > 0.0 {
        extra.push(("c0-over-rho", num(g.c0_distance / rho)));
        extra.push(("c1-over-rho", num(g.c1_distance / rho)));
    }

    let mut w = ctx.sink()?;
    write_meta(&mut w, "conjugate", &ctx.config, &extra)?;
    writeln!(w, "node,m,g,g_inverse,reference,difference")?;
    for j in 0..nodes {
        let m = j as f64 / nodes as f64;
        let gv = wrap01(m + g.forward_offsets[j]);
        let giv = wrap01(m + g.backward_offsets[j]);
        let reference = pert.skew().fiber_value(&b_amb, m);
        writeln!(
            w,
            "{j},{},{},{},{},{}",
            num(m),
            num(gv),
            num(giv),
            num(reference),
            num(wrap_signed(gv - reference))
        )?;
    }
    w.finish()?;
    check(
        g.composition_residual <= args.max_composition,
        format!(
            "composition residual {:.3e} exceeds {:.3e}; the conjugated map fails to invert",
            g.composition_residual, args.max_composition
        ),
    )
}

/// Which regularity statement a fit targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Transverse regularity of the central lamination along unstable shifts.
    Central,
    /// Base-to-value regularity of the global stable-leaf family.
    StableFamily,
}

#[derive(Debug, Args)]
pub struct HolderFitArgs {
    /// Regularity statement to fit.
    #[arg(long, value_enum, default_value_t = ModeArg::Central)]
    pub mode: ModeArg,
    /// Coarsest dyadic separation scale, as the exponent in 2^-coarse.
    #[arg(long, default_value_t = 4)]
    pub coarse: u32,
    /// Finest dyadic separation scale, as the exponent in 2^-fine.
    #[arg(long, default_value_t = 13)]
    pub fine: u32,
    /// Point pairs sampled per scale.
    #[arg(long, default_value_t = 3)]
    pub per_scale: usize,
    /// Shooting depth of stable-family evaluations.
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    /// Fail unless the fitted exponent reaches this floor.
    #[arg(long)]
    pub min_slope: Option<f64>,
    /// Fail unless the fit quality reaches this floor.
    #[arg(long)]
    pub min_r_squared: Option<f64>,
    /// Backward-itinerary length of the sampled anchor.
    #[arg(long, default_value_t = 48)]
    pub past: usize,
}

/// Fit a Hölder exponent to separation pairs of the selected family and
/// compare it with the value predicted by the hyperbolicity rates.
pub fn holder_fit(ctx: &Ctx, args: &HolderFitArgs) -> Result<()> {
    let pert = ctx.config.perturbation()?;
    let base = pert.skew().base().clone();
    let constants = base.constants();
    let (pairs, mode) = match args.mode {
        ModeArg::Central => {
            let copts = ctx.config.central_options()?;
            let mut rng = ctx.rng(5);
            let anchor = base.random_point(&mut rng, args.past.max(copts.cu_depth + 6));
            let pairs = central_holder_pairs(
                &pert,
                &anchor,
                &copts,
                args.coarse..=args.fine,
                args.per_scale,
            )?;
            (pairs, AlphaMode::Central)
        }
        ModeArg::StableFamily => {
            let mut rng = ctx.rng(5);
            let p = base.random_point(&mut rng, 8);
            let amb = base.ambient(&p);
            let f: Vec<f64> = amb.as_slice()[1..].to_vec();
            let m = rng.gen::<f64>();
            let pairs = stable_value_holder_pairs(
                &pert,
                &f,
                m,
                args.coarse..=args.fine,
                args.per_scale,
                args.depth,
            )?;
            (pairs, AlphaMode::StableFamily)
        }
    };
    let fit = fit_holder_exponent(&pairs)?;
    let alpha = alpha_theoretical(&constants, mode)?;

    let mut w = ctx.sink()?;
    write_meta(
        &mut w,
        "holder-fit",
        &ctx.config,
        &[
            (
                "mode",
                match args.mode {
                    ModeArg::Central => "central".into(),
                    ModeArg::StableFamily => "stable-family".into(),
                },
            ),
            ("scales", format!("2^-{}..2^-{}", args.coarse, args.fine)),
            ("per-scale", args.per_scale.to_string()),
            ("samples", fit.samples.to_string()),
            ("slope", num(fit.slope)),
            ("intercept", num(fit.intercept)),
            ("r-squared", num(fit.r_squared)),
            ("alpha-predicted", num(alpha)),
        ],
    )?;
    writeln!(w, "pair,d_in,d_out")?;
    for (i, (d_in, d_out)) in pairs.iter().enumerate() {
        writeln!(w, "{i},{},{}", num(*d_in), num(*d_out))?;
    }
    w.finish()?;
    if let Some(floor) = args.min_slope {
        check(
            fit.slope >= floor,
            format!("fitted exponent {:.4} below floor {floor:.4}", fit.slope),
        )?;
    }
    if let Some(floor) = args.min_r_squared {
        check(
            fit.r_squared >= floor,
            format!("fit quality r^2 = {:.4} below floor {floor:.4}", fit.r_squared),
        )?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FalconerArgs {
    /// Pattern whose deviating cylinders form the exceptional set.
    #[arg(long, default_value = "1")]
    pub w: String,
    /// Frequency-window half-width.
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    /// Cylinder depth of the sampled exceptional set. Box-dimension fits
    /// are only meaningful on depths where this cover has thinned out, so
    /// `box-coarse..=box-fine` should sit near this depth.
    #[arg(long, default_value_t = 14)]
    pub depth: usize,
    /// Number of sampled cylinder midpoints.
    #[arg(long, default_value_t = 30000)]
    pub samples: usize,
    /// Coarsest dyadic separation scale of the regularity fit.
    #[arg(long, default_value_t = 4)]
    pub coarse: u32,
    /// Finest dyadic separation scale of the regularity fit.
    #[arg(long, default_value_t = 14)]
    pub fine: u32,
    /// Point pairs sampled per scale in the regularity fit.
    #[arg(long, default_value_t = 3)]
    pub per_scale: usize,
    /// Coarsest dyadic depth of the box-dimension fits.
    #[arg(long, default_value_t = 10)]
    pub box_coarse: u32,
    /// Finest dyadic depth of the box-dimension fits.
    #[arg(long, default_value_t = 14)]
    pub box_fine: u32,
    /// Shooting depth of leaf-value evaluations.
    #[arg(long, default_value_t = 30)]
    pub shoot_depth: usize,
    /// Slack allowed over the dimension-transport bound.
    #[arg(long, default_value_t = 0.05)]
    pub slack: f64,
}

/// Push a sampled atypical set through the leaf-value map and check that the
/// image dimension obeys the Hölder transport bound dim(im) <= dim/alpha and
/// stays below one.
pub fn falconer(ctx: &Ctx, args: &FalconerArgs) -> Result<()> {
    let pattern = parse_pattern(&args.w)?;
    let pert = ctx.config.perturbation()?;
    let base = pert.skew().base().clone();

    // A fixed transverse position: the leaf-value map z -> beta_z(f, m).
    let mut rng = ctx.rng(6);
    let p = base.random_point(&mut rng, 8);
    let f: Vec<f64> = base.ambient(&p).as_slice()[1..].to_vec();
    let m = rng.gen::<f64>();

    let arcs =
        sample_deviating_arcs(&mut ctx.rng(7), &pattern, args.depth, args.kappa, args.samples)?;
    let half = 0.5f64.powi(args.depth as i32 + 1);
    let zs: Vec<f64> = arcs.iter().map(|a| a + half).collect();
    let values = zs
        .par_iter()
        .map(|&z| global_leaf_value(&pert, z, &f, m, args.shoot_depth))
        .collect::<lamina_core::Result<Vec<f64>>>()?;

    let alpha_pairs = stable_value_holder_pairs(
        &pert,
        &f,
        m,
        args.coarse..=args.fine,
        args.per_scale,
        args.shoot_depth,
    )?;
    let fit = fit_holder_exponent(&alpha_pairs)?;
    let alpha_used = fit.slope.min(1.0);

    let set_dim = box_dimension(&box_counts(&zs, args.box_coarse..=args.box_fine)?)?;
    let image_dim = box_dimension(&box_counts(&values, args.box_coarse..=args.box_fine)?)?;
    let bound = holder_image_dimension_bound(set_dim.dimension, alpha_used)?;
    let pass = image_dim.dimension <= bound + args.slack && image_dim.dimension < 1.0;

    let report = serde_json::json!({
        "meta": meta_json("falconer", &ctx.config),
        "pattern": args.w,
        "kappa": args.kappa,
        "cylinder-depth": args.depth,
        "samples": zs.len(),
        "box-depths": [args.box_coarse, args.box_fine],
        "alpha": {
            "slope": fit.slope,
            "r-squared": fit.r_squared,
            "samples": fit.samples,
            "used": alpha_used,
        },
        "set": { "dimension": set_dim.dimension, "r-squared": set_dim.r_squared },
        "image": { "dimension": image_dim.dimension, "r-squared": image_dim.r_squared },
        "bound": bound,
        "slack": args.slack,
        "pass": pass,
    });
    let mut w = ctx.sink()?;
    write_json(&mut w, &report)?;
    w.finish()?;
    check(
        pass,
        format!(
            "image dimension {:.4} violates transport bound {:.4} + {:.2} or reaches 1",
            image_dim.dimension, bound, args.slack
        ),
    )
}
