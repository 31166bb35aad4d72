//! Regularity measurements: Hölder exponents by log–log fitting and box
//! dimensions by dyadic counting.
//!
//! The central lamination depends on its base point only Hölder-continuously,
//! with an exponent predicted by the ratios of the weak to the strong
//! contraction rates. This module computes that prediction, samples anchor
//! pairs along unstable manifolds at dyadic separations, fits the observed
//! exponent by least squares in log–log coordinates, and provides the dyadic
//! box-counting machinery used to bound dimensions of images of sets under
//! Hölder maps: an `alpha`-Hölder map can raise box dimension by at most the
//! factor `1 / alpha`.

use alloc::format;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::base::{BasePoint, HyperbolicConstants};
use crate::error::{Error, Result};
use crate::geom::{circle_dist, wrap01};
use crate::lamination::{central_leaf, global_leaf_value, CentralLeaf, CentralOptions};
use crate::skew::PerturbedMap;
// Inherent f64 methods shadow these under std; the import is for no_std.
#[allow(unused_imports)]
use num_traits::Float;

/// Fewest usable pairs accepted by [`fit_holder_exponent`].
pub const MIN_FIT_SAMPLES: usize = 30;

/// Least spread (in decades) of input separations accepted by the fit.
pub const MIN_FIT_DECADES: f64 = 2.0;

/// Separations below this are treated as coincident and dropped.
const DEGENERATE_DISTANCE: f64 = 1e-12;

/// Dyadic depths beyond this would overflow the arc index arithmetic well
/// before any floating-point coordinate could resolve them.
const MAX_BOX_DEPTH: u32 = 48;

/// Which family's regularity a theoretical exponent describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMode {
    /// The anchor-to-central-leaf map `b -> beta_b`: both the stable and the
    /// backward-unstable contraction pairs compete, and the worse ratio wins.
    Central,
    /// The factor-to-stable-leaf map `z -> beta_z` over the expanding circle
    /// factor: only the backward contraction pair enters.
    StableFamily,
}

/// Predicted Hölder exponent of the lamination map from the hyperbolicity
/// constants: `min(ln lambda / ln lambda_minus, ln mu / ln mu_minus)` for the
/// central family, the second ratio alone for the stable family. Equal weak
/// and strong rates give exactly `1`.
pub fn alpha_theoretical(constants: &HyperbolicConstants, mode: AlphaMode) -> Result<f64> {
    let HyperbolicConstants { lambda_minus, lambda, mu_minus, mu } = *constants;
    let ordered = 0.0 < lambda_minus
        && lambda_minus <= lambda
        && lambda < 1.0
        && 0.0 < mu_minus
        && mu_minus <= mu
        && mu < 1.0;
    if !ordered {
        return Err(Error::DegenerateConstants(format!(
            "need 0 < lambda_minus <= lambda < 1 and 0 < mu_minus <= mu < 1, \
             got ({lambda_minus}, {lambda}, {mu_minus}, {mu})"
        )));
    }
    let ratio_stable = lambda.ln() / lambda_minus.ln();
    let ratio_unstable = mu.ln() / mu_minus.ln();
    Ok(match mode {
        AlphaMode::Central => ratio_stable.min(ratio_unstable),
        AlphaMode::StableFamily => ratio_unstable,
    })
}

/// Least-squares line through log–log separation pairs.
#[derive(Debug, Clone, Copy)]
pub struct HolderFit {
    /// Pairs that survived the degeneracy filter and entered the fit.
    pub samples: usize,
    /// Fitted exponent: the slope of `ln d_out` against `ln d_in`.
    pub slope: f64,
    /// Fitted `ln` of the Hölder constant.
    pub intercept: f64,
    /// Coefficient of determination of the line.
    pub r_squared: f64,
}

/// Fit an exponent to `(d_in, d_out)` separation pairs by ordinary least
/// squares in log–log coordinates. Pairs with either separation below the
/// coincidence floor are dropped; the survivors must number at least
/// [`MIN_FIT_SAMPLES`] and span at least [`MIN_FIT_DECADES`] decades of input
/// separation, otherwise the slope would be dominated by noise at a single
/// scale.
pub fn fit_holder_exponent(pairs: &[(f64, f64)]) -> Result<HolderFit> {
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for &(d_in, d_out) in pairs {
        if !(d_in > DEGENERATE_DISTANCE) || !(d_out > DEGENERATE_DISTANCE) {
            continue;
        }
        xs.push(d_in.ln());
        ys.push(d_out.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "{} usable pairs, need {MIN_FIT_SAMPLES}",
            xs.len()
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in &xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let decades = (hi - lo) / core::f64::consts::LN_10;
    if decades < MIN_FIT_DECADES {
        return Err(Error::InsufficientSamples(format!(
            "separations span {decades:.2} decades, need {MIN_FIT_DECADES}"
        )));
    }
    let (slope, intercept, r_squared) = ols_line(&xs, &ys);
    Ok(HolderFit { samples: xs.len(), slope, intercept, r_squared })
}

/// Ordinary least squares with `r^2`; a constant response is reported as a
/// perfect flat line.
fn ols_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r_squared)
}

/// Number of depth-`depth` dyadic arcs of the circle hit by the points.
pub fn count_boxes(points: &[f64], depth: u32) -> Result<u64> {
    if depth > MAX_BOX_DEPTH {
        return Err(Error::InvalidArgument(format!(
            "dyadic depth {depth} exceeds the supported maximum {MAX_BOX_DEPTH}"
        )));
    }
    let arcs = 1u64 << depth;
    let mut hit: Vec<u64> = points
        .iter()
        .map(|&p| ((wrap01(p) * arcs as f64) as u64).min(arcs - 1))
        .collect();
    hit.sort_unstable();
    hit.dedup();
    Ok(hit.len() as u64)
}

/// Box counts of a point set over a range of dyadic depths.
pub fn box_counts(points: &[f64], depths: RangeInclusive<u32>) -> Result<Vec<(u32, u64)>> {
    depths.map(|d| Ok((d, count_boxes(points, d)?))).collect()
}

/// Box-counting dimension estimated from `(depth, count)` levels.
#[derive(Debug, Clone, Copy)]
pub struct BoxDimension {
    /// Depth levels that entered the fit.
    pub levels: usize,
    /// Slope of `log2 count` against depth; `-inf` for an empty set.
    pub dimension: f64,
    /// Coefficient of determination of the fitted line.
    pub r_squared: f64,
}

/// Fit the box-counting dimension: the slope of `log2 N(depth)` against the
/// dyadic depth. Counts of an empty set (all zero) give the `-inf` sentinel;
/// a count that vanishes at one depth but not another is rejected, since
/// covers of one set cannot do that.
pub fn box_dimension(counts: &[(u32, u64)]) -> Result<BoxDimension> {
    if counts.iter().all(|&(_, n)| n == 0) {
        if counts.is_empty() {
            return Err(Error::InsufficientSamples("no cover levels given".into()));
        }
        return Ok(BoxDimension {
            levels: counts.len(),
            dimension: f64::NEG_INFINITY,
            r_squared: 1.0,
        });
    }
    if counts.iter().any(|&(_, n)| n == 0) {
        return Err(Error::InvalidArgument(
            "covers of one set cannot be empty at one depth and not another".into(),
        ));
    }
    if counts.len() < 2 {
        return Err(Error::InsufficientSamples("need at least two cover levels".into()));
    }
    let mut seen: Vec<u32> = counts.iter().map(|&(d, _)| d).collect();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("duplicate cover depth".into()));
    }
    let xs: Vec<f64> = counts.iter().map(|&(d, _)| d as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|&(_, n)| (n as f64).log2()).collect();
    let (slope, _, r_squared) = ols_line(&xs, &ys);
    Ok(BoxDimension { levels: counts.len(), dimension: slope, r_squared })
}

/// Upper bound for the box dimension of the image of a set under an
/// `alpha`-Hölder map: dimension can grow by at most the factor `1 / alpha`.
/// The `-inf` empty-set sentinel passes through unchanged.
pub fn holder_image_dimension_bound(dim_a: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Hölder exponent must be positive and finite, got {alpha}"
        )));
    }
    if dim_a.is_nan() {
        return Err(Error::InvalidArgument("dimension estimate is NaN".into()));
    }
    if dim_a == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(dim_a / alpha)
}

/// Sup over fiber nodes of the chart-coordinate difference of two central
/// leaves. The anchors' frames differ by the curvature of the unstable
/// direction, an error of second order in the anchor separation.
pub fn central_leaf_gap(a: &CentralLeaf, b: &CentralLeaf) -> Result<f64> {
    if a.nodes() != b.nodes() {
        return Err(Error::IncompatibleLeaf(format!(
            "fiber grids differ: {} vs {} nodes",
            a.nodes(),
            b.nodes()
        )));
    }
    let mut sup = 0.0f64;
    for (pa, pb) in a.beta.iter().zip(&b.beta) {
        for c in 0..2 {
            sup = sup.max((pa.0[c] - pb.0[c]).abs());
            sup = sup.max((pa.1[c] - pb.1[c]).abs());
        }
    }
    Ok(sup)
}

/// Sample `(anchor separation, leaf separation)` pairs along the unstable
/// manifold of `anchor` at dyadic scales `2^-j` for `j` in `scales`, with
/// `per_scale` offsets spread inside each scale band. The leaf separation is
/// the sup-norm gap of the chart-coordinate curves, so the pairs measure the
/// transverse regularity of the family, not the motion of the anchors.
pub fn central_holder_pairs(
    pert: &PerturbedMap,
    anchor: &BasePoint,
    opts: &CentralOptions,
    scales: RangeInclusive<u32>,
    per_scale: usize,
) -> Result<Vec<(f64, f64)>> {
    if per_scale == 0 {
        return Err(Error::InvalidArgument("per_scale must be positive".into()));
    }
    let base = pert.skew().base().clone();
    let here = central_leaf(pert, anchor, opts)?;
    let here_ambient = base.ambient(anchor);
    let mut pairs = Vec::new();
    for j in scales {
        let scale = 0.5f64.powi(j as i32);
        for i in 0..per_scale {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let offset = sign * (1.0 + 0.37 * i as f64) * scale;
            let there = base.shift_unstable(anchor, offset);
            let leaf = central_leaf(pert, &there, opts)?;
            let d_in = base.distance(&here_ambient, &base.ambient(&there));
            pairs.push((d_in, central_leaf_gap(&here, &leaf)?));
        }
    }
    Ok(pairs)
}

/// Sample `(|z - z'|, |beta_z(x) - beta_z'(x)|)` pairs for the stable-leaf
/// family through a fixed transverse point `x = (f, m)`, at dyadic scales
/// `2^-j` with base angles spread around the circle. Evaluations use the
/// orbit-shooting form of the leaves, so no grids are solved.
pub fn stable_value_holder_pairs(
    pert: &PerturbedMap,
    f: &[f64],
    m: f64,
    scales: RangeInclusive<u32>,
    per_scale: usize,
    depth: usize,
) -> Result<Vec<(f64, f64)>> {
    if per_scale == 0 {
        return Err(Error::InvalidArgument("per_scale must be positive".into()));
    }
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let mut pairs = Vec::new();
    let mut index = 0u32;
    for j in scales {
        let scale = 0.5f64.powi(j as i32);
        for i in 0..per_scale {
            let z = wrap01(0.137 + GOLDEN * index as f64);
            index += 1;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let z_other = wrap01(z + sign * (1.0 + 0.37 * i as f64) * scale);
            let value = global_leaf_value(pert, z, f, m, depth)?;
            let value_other = global_leaf_value(pert, z_other, f, m, depth)?;
            pairs.push((circle_dist(z, z_other), circle_dist(value, value_other)));
        }
    }
    Ok(pairs)
}
