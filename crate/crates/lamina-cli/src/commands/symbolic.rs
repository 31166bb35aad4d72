//! Symbolic subcommands: exact deviation counts, cylinder-cover volumes,
//! box dimensions of atypical covers, high-precision weak-ergodic averages,
//! and the composite demonstration combining all three.

use std::io::Write;

use anyhow::Result;
use clap::Args;
use lamina_core::{
    atypical_word_count, birkhoff_cosine_average, box_dimension, cover_volume_log2,
    deviating_prefix_count, deviation_table, fixed_angle_from_ratio, nu_estimate,
    random_fixed_angle,
};
use num_bigint::BigUint;

use super::{parse_pattern, Ctx};
use crate::output::{check, meta_json, num, write_json, write_meta};

/// Top 53 bits of a fixed-point angle as an `f64` in `[0, 1)`.
fn fixed_to_f64(y: &BigUint, bits: u64) -> f64 {
    if y.bits() == 0 {
        return 0.0;
    }
    if bits <= 53 {
        let v = u64::try_from(y).expect("small fixed-point fits u64");
        return v as f64 / (1u64 << bits) as f64;
    }
    let top = u64::try_from(&(y >> (bits - 53))).expect("top 53 bits fit u64");
    top as f64 / 9007199254740992.0
}

#[derive(Debug, Args)]
pub struct AtypicalArgs {
    /// Pattern word over {0, 1}.
    #[arg(long, default_value = "1")]
    pub w: String,
    /// Frequency-window half-width.
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    /// Word length.
    #[arg(long = "N", default_value_t = 16)]
    pub length: usize,
}

/// Exact occurrence-class table of one word length, with the deviating total.
pub fn atypical(ctx: &Ctx, args: &AtypicalArgs) -> Result<()> {
    let pattern = parse_pattern(&args.w)?;
    anyhow::ensure!(args.kappa >= 0.0, "kappa must be nonnegative");
    let table = deviation_table(&pattern, args.length)?;
    let deviating = table.deviating_count(args.kappa)?;
    let nu = nu_estimate(&deviating, args.length);
    let volume_log2 = cover_volume_log2(&deviating, args.length);

    let mut w = ctx.sink()?;
    write_meta(
        &mut w,
        "atypical",
        &ctx.config,
        &[
            ("pattern", args.w.clone()),
            ("kappa", num(args.kappa)),
            ("length", args.length.to_string()),
            ("deviating-count", deviating.to_string()),
            ("nu", num(nu)),
            ("volume-log2", num(volume_log2)),
        ],
    )?;
    writeln!(w, "class,occurrences,count,frequency,deviating")?;
    for (c, count) in table.counts().iter().enumerate() {
        writeln!(
            w,
            "{c},{c},{count},{},{}",
            num(c as f64 / args.length as f64),
            u8::from(table.is_deviating(c, args.kappa))
        )?;
    }
    writeln!(w, "deviating-total,,{deviating},,")?;
    w.finish()
}

#[derive(Debug, Args)]
pub struct NuCurveArgs {
    /// Pattern word over {0, 1}.
    #[arg(long, default_value = "1")]
    pub w: String,
    /// Frequency-window half-width.
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    /// First word length of the sweep.
    #[arg(long, default_value_t = 16)]
    pub from: usize,
    /// Last word length of the sweep, inclusive.
    #[arg(long, default_value_t = 64)]
    pub to: usize,
    /// Fail unless every exponent deficit reaches this floor.
    #[arg(long)]
    pub min_nu: Option<f64>,
}

/// Sweep the exponent deficit nu(N) = 1 - log2(count)/N over word lengths.
pub fn nu_curve(ctx: &Ctx, args: &NuCurveArgs) -> Result<()> {
    let pattern = parse_pattern(&args.w)?;
    anyhow::ensure!(args.kappa >= 0.0, "kappa must be nonnegative");
    anyhow::ensure!(args.from >= 1 && args.from <= args.to, "need 1 <= from <= to");
    let mut rows = Vec::with_capacity(args.to - args.from + 1);
    let mut nu_min = f64::INFINITY;
    for n in args.from..=args.to {
        let count = atypical_word_count(&pattern, n, args.kappa)?;
        let nu = nu_estimate(&count, n);
        nu_min = nu_min.min(nu);
        rows.push((n, count, nu));
    }

    let mut w = ctx.sink()?;
    write_meta(
        &mut w,
        "nu-curve",
        &ctx.config,
        &[
            ("pattern", args.w.clone()),
            ("kappa", num(args.kappa)),
            ("lengths", format!("{}..{}", args.from, args.to)),
            ("nu-min", num(nu_min)),
        ],
    )?;
    writeln!(w, "length,count,nu,volume_log2")?;
    for (n, count, nu) in &rows {
        writeln!(w, "{n},{count},{},{}", num(*nu), num(cover_volume_log2(count, *n)))?;
    }
    w.finish()?;
    if let Some(floor) = args.min_nu {
        check(
            nu_min >= floor,
            format!("exponent deficit dips to {nu_min:.6}, below floor {floor:.6}"),
        )?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct CoverVolumeArgs {
    /// Pattern word over {0, 1}.
    #[arg(long, default_value = "1")]
    pub w: String,
    /// Frequency-window half-width.
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    /// First word length of the sweep.
    #[arg(long, default_value_t = 16)]
    pub from: usize,
    /// Last word length of the sweep, inclusive.
    #[arg(long, default_value_t = 64)]
    pub to: usize,
    /// Fail unless the summed volume stays below this cap.
    #[arg(long)]
    pub max_total: Option<f64>,
}

/// Lebesgue volumes of the cylinder covers of the deviating sets.
pub fn cover_volume(ctx: &Ctx, args: &CoverVolumeArgs) -> Result<()> {
    let pattern = parse_pattern(&args.w)?;
    anyhow::ensure!(args.kappa >= 0.0, "kappa must be nonnegative");
    anyhow::ensure!(args.from >= 1 && args.from <= args.to, "need 1 <= from <= to");
    let mut rows = Vec::with_capacity(args.to - args.from + 1);
    let mut total = 0.0f64;
    for n in args.from..=args.to {
        let count = atypical_word_count(&pattern, n, args.kappa)?;
        let log2 = cover_volume_log2(&count, n);
        total += log2.exp2();
        rows.push((n, count, log2));
    }

    let mut w = ctx.sink()?;
    write_meta(
        &mut w,
        "cover-volume",
        &ctx.config,
        &[
            ("pattern", args.w.clone()),
            ("kappa", num(args.kappa)),
            ("lengths", format!("{}..{}", args.from, args.to)),
            ("total-volume", num(total)),
        ],
    )?;
    writeln!(w, "length,count,volume_log2,volume")?;
    for (n, count, log2) in &rows {
        writeln!(w, "{n},{count},{},{}", num(*log2), num(log2.exp2()))?;
    }
    w.finish()?;
    if let Some(cap) = args.max_total {
        check(
            total < cap,
            format!("summed cover volume {total:.6} reaches cap {cap:.6}"),
        )?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct BoxDimArgs {
    /// Pattern word over {0, 1}.
    #[arg(long, default_value = "1")]
    pub w: String,
    /// Frequency-window half-width.
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    /// Cylinder depth of the cover whose dimension is fitted.
    #[arg(long, default_value_t = 24)]
    pub depth: usize,
    /// Coarsest counting depth of the fit.
    #[arg(long, default_value_t = 8)]
    pub coarse: u32,
    /// Finest counting depth of the fit.
    #[arg(long, default_value_t = 24)]
    pub fine: u32,
    /// Fail unless the fitted dimension stays below this cap.
    #[arg(long)]
    pub max_dim: Option<f64>,
}

/// Box dimension of the atypical cover from exact per-depth box counts.
pub fn box_dim(ctx: &Ctx, args: &BoxDimArgs) -> Result<()> {
    let pattern = parse_pattern(&args.w)?;
    anyhow::ensure!(args.kappa >= 0.0, "kappa must be nonnegative");
    anyhow::ensure!(args.coarse <= args.fine, "need coarse <= fine");
    anyhow::ensure!(args.fine <= 48, "counting depths beyond 48 overflow the fit");
    let mut levels = Vec::new();
    let mut counts = Vec::new();
    for d in args.coarse..=args.fine {
        let exact = deviating_prefix_count(&pattern, args.depth, args.kappa, d as usize)?;
        let as_u64 = u64::try_from(&exact)
            .map_err(|_| anyhow::anyhow!("box count at depth {d} exceeds u64"))?;
        levels.push((d, as_u64));
        counts.push(as_u64);
    }
    let dim = box_dimension(&levels)?;
    let full = atypical_word_count(&pattern, args.depth, args.kappa)?;
    let nu = nu_estimate(&full, args.depth);

    let report = serde_json::json!({
        "meta": meta_json("box-dim", &ctx.config),
        "pattern": args.w,
        "kappa": args.kappa,
        "cylinder-depth": args.depth,
        "depths": [args.coarse, args.fine],
        "counts": counts,
        "dimension": dim.dimension,
        "r-squared": dim.r_squared,
        "nu": nu,
        "max-dim": args.max_dim,
    });
    let mut w = ctx.sink()?;
    write_json(&mut w, &report)?;
    w.finish()?;
    if let Some(cap) = args.max_dim {
        check(
            dim.dimension <= cap,
            format!("cover dimension {:.4} exceeds cap {cap:.4}", dim.dimension),
        )?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct WeakErgodicArgs {
    /// Birkhoff horizon: averages run over n doubling steps.
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Number of random starting angles besides the pinned angle 0.
    #[arg(long, default_value_t = 1000)]
    pub orbits: usize,
    /// Calm threshold on |average|.
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    /// The pinned angle's average must exceed this floor.
    #[arg(long, default_value_t = 0.5)]
    pub atypical_floor: f64,
    /// Required share of calm random orbits.
    #[arg(long, default_value_t = 0.95)]
    pub min_share: f64,
    /// Fixed-point precision in bits; 0 derives n + 64.
    #[arg(long, default_value_t = 0)]
    pub bits: u64,
}

/// Birkhoff averages of cos(2 pi y) along exact doubling orbits: the pinned
/// fixed angle keeps a large average while random angles average out.
pub fn weak_ergodic(ctx: &Ctx, args: &WeakErgodicArgs) -> Result<()> {
    let bits = if args.bits > 0 { args.bits.max(args.n as u64 + 64) } else { args.n as u64 + 64 };
    let pinned = fixed_angle_from_ratio(0, 1, bits)?;
    let pinned_average = birkhoff_cosine_average(&pinned, bits, args.n)?;

    let mut rng = ctx.rng(8);
    let mut rows = Vec::with_capacity(args.orbits + 1);
    rows.push((0.0f64, pinned_average));
    let mut calm = 0usize;
    for _ in 0..args.orbits {
        let y = random_fixed_angle(&mut rng, bits);
        let average = birkhoff_cosine_average(&y, bits, args.n)?;
        if average.abs() <= args.delta {
            calm += 1;
        }
        rows.push((fixed_to_f64(&y, bits), average));
    }
    let share = if args.orbits > 0 { calm as f64 / args.orbits as f64 } else { 1.0 };

    let mut w = ctx.sink()?;
    write_meta(
        &mut w,
        "weak-ergodic",
        &ctx.config,
        &[
            ("n", args.n.to_string()),
            ("orbits", args.orbits.to_string()),
            ("bits", bits.to_string()),
            ("delta", num(args.delta)),
            ("pinned-average", num(pinned_average)),
            ("calm-share", num(share)),
        ],
    )?;
    writeln!(w, "orbit,angle,average,deviating")?;
    for (i, (angle, average)) in rows.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{}",
            num(*angle),
            num(*average),
            u8::from(average.abs() > args.delta)
        )?;
    }
    w.finish()?;
    check(
        pinned_average.abs() >= args.atypical_floor,
        format!(
            "pinned-angle average {pinned_average:.4} below the atypical floor {:.4}",
            args.atypical_floor
        ),
    )?;
    check(
        share >= args.min_share,
        format!("calm share {share:.4} below required {:.4}", args.min_share),
    )
}

#[derive(Debug, Args)]
pub struct FubiniDemoArgs {
    /// Pattern word over {0, 1}.
    #[arg(long, default_value = "1")]
    pub w: String,
    /// Frequency-window half-width.
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    /// Word-length sweep of the deviation counts.
    #[arg(long, default_value_t = 16)]
    pub from: usize,
    /// Last word length of the sweep, inclusive.
    #[arg(long, default_value_t = 64)]
    pub to: usize,
    /// Cylinder depth of the dimension estimate.
    #[arg(long, default_value_t = 24)]
    pub dim_depth: usize,
    /// Coarsest counting depth of the dimension fit.
    #[arg(long, default_value_t = 8)]
    pub dim_coarse: u32,
    /// Finest counting depth of the dimension fit.
    #[arg(long, default_value_t = 24)]
    pub dim_fine: u32,
    /// Birkhoff horizon of the ergodic check.
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Random orbits of the ergodic check.
    #[arg(long, default_value_t = 200)]
    pub orbits: usize,
    /// Calm threshold on |average|.
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    /// Required share of calm random orbits.
    #[arg(long, default_value_t = 0.95)]
    pub min_share: f64,
    /// Required floor on the exponent deficit over the sweep.
    #[arg(long, default_value_t = 0.005)]
    pub min_nu: f64,
}

/// The full exceptional-set story in one report: exponentially small covers,
/// fractional cover dimension, and typical orbit averages — so the set of
/// deviating angles is null, small-dimensional, and dynamically invisible.
pub fn fubini_demo(ctx: &Ctx, args: &FubiniDemoArgs) -> Result<()> {
    let pattern = parse_pattern(&args.w)?;
    anyhow::ensure!(args.kappa >= 0.0, "kappa must be nonnegative");
    anyhow::ensure!(args.from >= 1 && args.from <= args.to, "need 1 <= from <= to");
    anyhow::ensure!(args.dim_coarse <= args.dim_fine, "need dim-coarse <= dim-fine");
    anyhow::ensure!(args.dim_fine <= 48, "counting depths beyond 48 overflow the fit");

    // Exact deviation counts over the length sweep.
    let mut curve = Vec::new();
    let mut nu_min = f64::INFINITY;
    let mut total_volume = 0.0f64;
    for n in args.from..=args.to {
        let count = atypical_word_count(&pattern, n, args.kappa)?;
        let nu = nu_estimate(&count, n);
        let volume_log2 = cover_volume_log2(&count, n);
        nu_min = nu_min.min(nu);
        total_volume += volume_log2.exp2();
        curve.push(serde_json::json!({
            "length": n,
            "count": count.to_string(),
            "nu": nu,
            "volume-log2": volume_log2,
        }));
    }

    // Exact box counts of one cover depth.
    let mut levels = Vec::new();
    let mut counts = Vec::new();
    for d in args.dim_coarse..=args.dim_fine {
        let exact = deviating_prefix_count(&pattern, args.dim_depth, args.kappa, d as usize)?;
        let as_u64 = u64::try_from(&exact)
            .map_err(|_| anyhow::anyhow!("box count at depth {d} exceeds u64"))?;
        levels.push((d, as_u64));
        counts.push(as_u64);
    }
    let dim = box_dimension(&levels)?;

    // Weak-ergodic averages on exact orbits.
    let bits = args.n as u64 + 64;
    let pinned = fixed_angle_from_ratio(0, 1, bits)?;
    let pinned_average = birkhoff_cosine_average(&pinned, bits, args.n)?;
    let mut rng = ctx.rng(9);
    let mut calm = 0usize;
    for _ in 0..args.orbits {
        let y = random_fixed_angle(&mut rng, bits);
        if birkhoff_cosine_average(&y, bits, args.n)?.abs() <= args.delta {
            calm += 1;
        }
    }
    let share = if args.orbits > 0 { calm as f64 / args.orbits as f64 } else { 1.0 };

    let null_cover = nu_min >= args.min_nu;
    let fractional_dimension = dim.dimension < 1.0;
    let typical_averages = share >= args.min_share;
    let pass = null_cover && fractional_dimension && typical_averages;

    let report = serde_json::json!({
        "meta": meta_json("fubini-demo", &ctx.config),
        "pattern": args.w,
        "kappa": args.kappa,
        "curve": curve,
        "nu-min": nu_min,
        "total-volume": total_volume,
        "cover": {
            "cylinder-depth": args.dim_depth,
            "depths": [args.dim_coarse, args.dim_fine],
            "counts": counts,
            "dimension": dim.dimension,
            "r-squared": dim.r_squared,
        },
        "ergodic": {
            "n": args.n,
            "orbits": args.orbits,
            "delta": args.delta,
            "pinned-average": pinned_average,
            "calm-share": share,
        },
        "verdict": {
            "null-cover": null_cover,
            "fractional-dimension": fractional_dimension,
            "typical-averages": typical_averages,
            "pass": pass,
        },
    });
    let mut w = ctx.sink()?;
    write_json(&mut w, &report)?;
    w.finish()?;
    check(
        pass,
        format!(
            "exceptional-set verdict failed: nu-min {nu_min:.4}, dimension {:.4}, calm share {share:.4}",
            dim.dimension
        ),
    )
}
