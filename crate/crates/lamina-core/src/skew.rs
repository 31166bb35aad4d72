//! Skew products over a hyperbolic base and their C¹-small perturbations.
//!
//! A `SkewProduct` pairs a base map with a family of circle diffeomorphisms
//! `f_b`; construction validates that every `f_b` is an orientation-preserving
//! degree-one diffeomorphism. Perturbations are built as `F ∘ (id + ε W)`
//! with `W` a fixed bank of smooth trigonometric fields seeded
//! deterministically; the backward map is recovered by damped Newton. The
//! module also estimates the C¹ distance between the perturbed and reference
//! maps (both directions) and the constant `L` entering the modified
//! dominated-splitting condition `L < min(1/lambda, 1/mu)`.

use crate::base::{BaseMap, Direction, HyperbolicConstants};
use crate::error::{Error, Result};
use crate::geom::{circle_dist, wrap01, wrap_signed, Coords};
use crate::newton::{self, NewtonOptions};
use alloc::format;
use alloc::vec::Vec;
// Inherent f64 methods shadow these under std; the import is for no_std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TAU: f64 = core::f64::consts::TAU;

/// Fiber-inverse and perturbation-inverse Newton tolerance.
const INVERSE_TOL: f64 = 1e-13;
/// Finite-difference step for the C¹ distance and derivative-bound grids.
pub const C1_FD_STEP: f64 = 1e-5;
/// Max admissible composition residual `f^{-1}(f(m)) - m` during validation.
const MORPHISM_TOL: f64 = 1e-10;
/// Minimal fiber derivative accepted as an orientation-preserving diffeo.
const MIN_FIBER_SLOPE: f64 = 1e-3;

/// Default amplitude of the base-angle drive term in the fiber family.
pub const DEFAULT_DRIVE: f64 = 0.1;
/// Default amplitude of the fiber shear term.
pub const DEFAULT_SHEAR: f64 = 0.05;

/// A family of circle maps indexed by the base point.
#[derive(Debug, Clone, Copy)]
pub enum FiberFamily {
    /// `f_b(m) = m + drive * cos(2 pi y(b)) + shear * sin(2 pi m)`, where `y`
    /// is the first base coordinate.
    Trig { drive: f64, shear: f64 },
    /// `f_b(m) = degree * m`; degree != 1 exists only to exercise rejection.
    Cover { degree: u32 },
}

impl FiberFamily {
    pub fn identity() -> Self {
        FiberFamily::Trig { drive: 0.0, shear: 0.0 }
    }

    pub fn default_trig() -> Self {
        FiberFamily::Trig { drive: DEFAULT_DRIVE, shear: DEFAULT_SHEAR }
    }

    /// Lift of `f_b` to the real line.
    pub fn value_lift(&self, b: &Coords, m: f64) -> f64 {
        match self {
            FiberFamily::Trig { drive, shear } => {
                m + drive * (TAU * b[0]).cos() + shear * (TAU * m).sin()
            }
            FiberFamily::Cover { degree } => f64::from(*degree) * m,
        }
    }
}

/// A point of the total space `B x M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XPoint {
    pub base: Coords,
    pub m: f64,
}

impl XPoint {
    pub fn new(base: Coords, m: f64) -> Self {
        Self { base, m: wrap01(m) }
    }
}

/// A validated skew product `F(b, m) = (h(b), f_b(m))`.
#[derive(Debug, Clone)]
pub struct SkewProduct {
    base: BaseMap,
    fiber: FiberFamily,
}

impl SkewProduct {
    /// Build and validate: every `f_b` must be a degree-one orientation
    /// preserving circle diffeomorphism with accurate Newton inverse.
    pub fn new(base: BaseMap, fiber: FiberFamily) -> Result<Self> {
        let sk = Self { base, fiber };
        sk.validate_fiber_morphism()?;
        Ok(sk)
    }

    pub fn base(&self) -> &BaseMap {
        &self.base
    }

    pub fn fiber(&self) -> &FiberFamily {
        &self.fiber
    }

    pub fn fiber_value(&self, b: &Coords, m: f64) -> f64 {
        wrap01(self.fiber.value_lift(b, wrap01(m)))
    }

    /// Invert `f_b` by damped Newton on the lift.
    pub fn fiber_inverse(&self, b: &Coords, target: f64) -> Result<f64> {
        let t = wrap01(target);
        // The lift is within-drive-plus-shear of a translation, so starting
        // from the translation inverse keeps Newton inside one period.
        let mean_shift = self.fiber.value_lift(b, 0.0);
        let guess = t - mean_shift;
        let sol = newton::solve(
            |x, r| r[0] = self.fiber.value_lift(b, x[0]) - t,
            &[guess],
            &NewtonOptions { tol: INVERSE_TOL, ..NewtonOptions::default() },
        )?;
        Ok(wrap01(sol.x[0]))
    }

    /// `F(b, m)` on ambient coordinates.
    pub fn forward(&self, x: &XPoint) -> XPoint {
        XPoint::new(
            self.base.map_ambient_forward(&x.base),
            self.fiber_value(&x.base, x.m),
        )
    }

    /// `F^{-1}` with the base branch resolved nearest `anchor_base`.
    pub fn backward_near(&self, x: &XPoint, anchor_base: &Coords) -> Result<XPoint> {
        let b = self.base.map_ambient_backward_near(&x.base, anchor_base);
        let m = self.fiber_inverse(&b, x.m)?;
        Ok(XPoint { base: b, m })
    }

    /// Sup metric on `B x M`.
    pub fn distance_x(&self, a: &XPoint, b: &XPoint) -> f64 {
        self.base.distance(&a.base, &b.base).max(circle_dist(a.m, b.m))
    }

    fn validate_fiber_morphism(&self) -> Result<()> {
        let points = validation_base_points(&self.base, 12);
        let m_nodes = 64;
        for b in &points {
            // Degree: the lift must advance by exactly one per period.
            let deg = self.fiber.value_lift(b, 1.0) - self.fiber.value_lift(b, 0.0);
            if (deg - 1.0).abs() > 1e-9 {
                return Err(Error::NotFiberMorphism(format!(
                    "fiber lift has degree {deg:.3}, expected 1"
                )));
            }
            for i in 0..m_nodes {
                let m = i as f64 / m_nodes as f64;
                let h = 1e-6;
                let slope =
                    (self.fiber.value_lift(b, m + h) - self.fiber.value_lift(b, m - h)) / (2.0 * h);
                if slope < MIN_FIBER_SLOPE {
                    return Err(Error::NotFiberMorphism(format!(
                        "fiber derivative {slope:.4} at m = {m:.4} is not positive"
                    )));
                }
            }
            for i in 0..16 {
                let m = i as f64 / 16.0;
                let round = self.fiber_inverse(b, self.fiber_value(b, m))?;
                if circle_dist(round, m) > MORPHISM_TOL {
                    return Err(Error::NotFiberMorphism(format!(
                        "inverse composition residual {:.3e} at m = {m:.4}",
                        circle_dist(round, m)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Deterministic sample of base points covering the attractor region.
fn validation_base_points(base: &BaseMap, count: usize) -> Vec<Coords> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ba5e);
    (0..count)
        .map(|_| {
            let p = base.random_point(&mut rng, 16);
            base.ambient(&p)
        })
        .collect()
}

/// Grid sups of the fiber derivatives in both directions and the resulting
/// dominated-splitting constant.
#[derive(Debug, Clone, Copy)]
pub struct DominatedSplittingReport {
    /// `sup ||df^{±1}/db||` over the validation grid (both directions).
    pub sup_dfdb: f64,
    /// `sup |df^{±1}/dm|` over the validation grid (both directions).
    pub sup_dfdm: f64,
    /// `L = max(max(lambda, mu) + sup_dfdb, sup_dfdm)`.
    pub l_value: f64,
    /// `min(1/lambda, 1/mu)`.
    pub threshold: f64,
    pub pass: bool,
}

impl DominatedSplittingReport {
    /// Lipschitz budget constant `D = 4 L / (1 - mu L)`, defined only when
    /// `mu * L < 1`.
    pub fn lip_budget_constant(&self, consts: &HyperbolicConstants) -> Result<f64> {
        let mu_l = consts.mu * self.l_value;
        if mu_l >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "mu * L = {mu_l:.4} >= 1; no Lipschitz budget exists"
            )));
        }
        Ok(4.0 * self.l_value / (1.0 - mu_l))
    }
}

/// Grid maximization of the fiber derivatives entering the modified
/// dominated-splitting condition `L < min(1/lambda, 1/mu)`.
///
/// Both the forward family and its inverse are differenced: the inverse
/// derivatives blow up first when the shear grows, and they enter the
/// condition on the same footing.
pub fn check_dominated_splitting(skew: &SkewProduct) -> Result<DominatedSplittingReport> {
    let consts = skew.base().constants();
    consts.validate()?;
    let angle_nodes = 64;
    let m_nodes = 64;
    let h = C1_FD_STEP;
    let base_pts = dominated_grid_points(skew.base(), angle_nodes);
    let mut sup_dfdb = 0.0_f64;
    let mut sup_dfdm = 0.0_f64;
    for b in &base_pts {
        for i in 0..m_nodes {
            let m = i as f64 / m_nodes as f64;
            // Forward fiber derivative.
            let fm = (skew.fiber.value_lift(b, m + h) - skew.fiber.value_lift(b, m - h)) / (2.0 * h);
            sup_dfdm = sup_dfdm.max(fm.abs());
            // Inverse fiber derivative, differenced on the inverse map itself.
            let im = inverse_difference_m(skew, b, m, h)?;
            sup_dfdm = sup_dfdm.max(im.abs());
            sup_dfdb = sup_dfdb.max(base_gradient_forward(skew, b, m, h));
            sup_dfdb = sup_dfdb.max(base_gradient_inverse(skew, b, m, h)?);
        }
    }
    let l_value = (consts.lambda.max(consts.mu) + sup_dfdb).max(sup_dfdm);
    let threshold = (1.0 / consts.lambda).min(1.0 / consts.mu);
    Ok(DominatedSplittingReport {
        sup_dfdb,
        sup_dfdm,
        l_value,
        threshold,
        pass: l_value < threshold,
    })
}

fn dominated_grid_points(base: &BaseMap, angle_nodes: usize) -> Vec<Coords> {
    let mut out = Vec::new();
    match base {
        BaseMap::Solenoid(s) => {
            // Derived z never matters more than its magnitude; a ring sample
            // of the invariant-region disk suffices.
            let radii = [0.0, 0.6, 1.0 / (1.0 - s.lambda)];
            for i in 0..angle_nodes {
                let y = i as f64 / angle_nodes as f64;
                for (ri, r) in radii.iter().enumerate() {
                    let spokes = if ri == 0 { 1 } else { 4 };
                    for k in 0..spokes {
                        let th = TAU * k as f64 / spokes as f64;
                        out.push(Coords::new(&[y, r * th.cos(), r * th.sin()]));
                    }
                }
            }
        }
        BaseMap::Torus(_) => {
            for i in 0..angle_nodes {
                for j in 0..8 {
                    out.push(Coords::new(&[i as f64 / angle_nodes as f64, j as f64 / 8.0]));
                }
            }
        }
        BaseMap::Doubling(_) => {
            for i in 0..angle_nodes {
                out.push(Coords::new(&[i as f64 / angle_nodes as f64]));
            }
        }
    }
    out
}

fn inverse_difference_m(skew: &SkewProduct, b: &Coords, m: f64, h: f64) -> Result<f64> {
    let lo = skew.fiber_inverse(b, m - h)?;
    let hi = skew.fiber_inverse(b, m + h)?;
    Ok(wrap_signed(hi - lo) / (2.0 * h))
}

/// Dual-norm gradient of `f_b(m)` in the base directions: the metric is a sup
/// over the angle block and the Euclidean disk block, so the dual norm sums
/// the angle slope and the disk gradient magnitude.
fn base_gradient_forward(skew: &SkewProduct, b: &Coords, m: f64, h: f64) -> f64 {
    let mut block_angle = 0.0_f64;
    let mut block_disk = 0.0_f64;
    let mask = skew.base.wrap_mask();
    for i in 0..skew.base.dim() {
        let mut bp = *b;
        let mut bm = *b;
        bp[i] += h;
        bm[i] -= h;
        let d = (skew.fiber.value_lift(&bp, m) - skew.fiber.value_lift(&bm, m)) / (2.0 * h);
        if mask[i] {
            block_angle += d * d;
        } else {
            block_disk += d * d;
        }
    }
    block_angle.sqrt() + block_disk.sqrt()
}

fn base_gradient_inverse(skew: &SkewProduct, b: &Coords, m: f64, h: f64) -> Result<f64> {
    let mut block_angle = 0.0_f64;
    let mut block_disk = 0.0_f64;
    let mask = skew.base.wrap_mask();
    for i in 0..skew.base.dim() {
        let mut bp = *b;
        let mut bm = *b;
        bp[i] += h;
        bm[i] -= h;
        let d = wrap_signed(skew.fiber_inverse(&bp, m)? - skew.fiber_inverse(&bm, m)?) / (2.0 * h);
        if mask[i] {
            block_angle += d * d;
        } else {
            block_disk += d * d;
        }
    }
    Ok(block_angle.sqrt() + block_disk.sqrt())
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

/// One smooth scalar term `coef * cos(2 pi (k . x) + phase)`; frequencies on
/// circle coordinates are integers so the field is well defined.
#[derive(Debug, Clone, Copy)]
struct TrigTerm {
    coef: f64,
    freq: [f64; 4],
    phase: f64,
}

impl TrigTerm {
    fn eval(&self, coords: &[f64; 4]) -> f64 {
        let mut arg = self.phase;
        for i in 0..4 {
            arg += TAU * self.freq[i] * coords[i];
        }
        self.coef * arg.cos()
    }
}

const TERMS_PER_FIELD: usize = 3;

/// Per-base normalization of the displacement fields. The backward map
/// amplifies base displacements by up to `1/lambda`, so the base-field scale
/// shrinks with the stable contraction to keep the measured C¹ distance of
/// both directions on the order of epsilon.
fn field_scales(base: &BaseMap) -> (f64, f64) {
    match base {
        BaseMap::Solenoid(s) => (0.35 * s.lambda, 0.5),
        BaseMap::Torus(_) => (0.05, 0.5),
        BaseMap::Doubling(_) => (0.08, 0.5),
    }
}

/// A perturbation `G = F ∘ (id + ε W)` of a skew product, with `W` a seeded
/// bank of unit-scale trigonometric displacement fields.
#[derive(Debug, Clone)]
pub struct PerturbedMap {
    skew: SkewProduct,
    epsilon: f64,
    seed: u64,
    /// One field (list of terms) per perturbed coordinate: base dims then m.
    fields: Vec<[TrigTerm; TERMS_PER_FIELD]>,
    base_scale: f64,
    fiber_scale: f64,
}

/// Construct the standard deterministic perturbation family member
/// `G_epsilon` for the given seed.
pub fn make_standard_perturbation(skew: &SkewProduct, epsilon: f64, seed: u64) -> PerturbedMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = skew.base().dim();
    let wrap = skew.base().wrap_mask();
    let mut fields = Vec::with_capacity(dim + 1);
    for _ in 0..=dim {
        let mut terms = [TrigTerm { coef: 0.0, freq: [0.0; 4], phase: 0.0 }; TERMS_PER_FIELD];
        for term in &mut terms {
            let mut freq = [0.0; 4];
            // Integer frequencies on circle coordinates (base angles and m).
            // Contracting disk coordinates carry no frequency: any dependence
            // on them is amplified by 1/lambda in the backward Jacobian and
            // would dominate the C1 distance.
            for (i, f) in freq.iter_mut().enumerate().take(dim) {
                if wrap[i] {
                    *f = f64::from(rng.gen_range(-1..=1i32));
                }
            }
            freq[3] = f64::from(rng.gen_range(-1..=1i32));
            if freq.iter().all(|f| *f == 0.0) {
                freq[3] = 1.0;
            }
            let magnitude = rng.gen_range(0.5..1.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            *term = TrigTerm {
                coef: sign * magnitude / TERMS_PER_FIELD as f64,
                freq,
                phase: rng.gen_range(0.0..TAU),
            };
        }
        fields.push(terms);
    }
    let (base_scale, fiber_scale) = field_scales(skew.base());
    PerturbedMap { skew: skew.clone(), epsilon, seed, fields, base_scale, fiber_scale }
}

impl PerturbedMap {
    pub fn skew(&self) -> &SkewProduct {
        &self.skew
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The displacement `ε W(x)` applied before the reference map.
    pub fn displacement(&self, x: &XPoint) -> ([f64; 3], f64) {
        if self.epsilon == 0.0 {
            return ([0.0; 3], 0.0);
        }
        let dim = self.skew.base().dim();
        let mut coords = [0.0; 4];
        coords[..dim].copy_from_slice(x.base.as_slice());
        coords[3] = x.m;
        let mut out = [0.0; 3];
        for (i, slot) in out.iter_mut().enumerate().take(dim) {
            let mut s = 0.0;
            for term in &self.fields[i] {
                s += term.eval(&coords);
            }
            *slot = self.epsilon * self.base_scale * s;
        }
        let mut s = 0.0;
        for term in &self.fields[dim] {
            s += term.eval(&coords);
        }
        (out, self.epsilon * self.fiber_scale * s)
    }

    /// `G(x) = F(x + ε W(x))`.
    pub fn forward(&self, x: &XPoint) -> XPoint {
        if self.epsilon == 0.0 {
            return self.skew.forward(x);
        }
        let (db, dm) = self.displacement(x);
        let dim = self.skew.base().dim();
        let wrap = self.skew.base().wrap_mask();
        let mut shifted = x.base;
        for i in 0..dim {
            shifted[i] += db[i];
            if wrap[i] {
                shifted[i] = wrap01(shifted[i]);
            }
        }
        self.skew.forward(&XPoint::new(shifted, x.m + dm))
    }

    /// `G^{-1}(x)` by damped Newton started from the reference inverse,
    /// base branch resolved nearest `anchor_base`.
    pub fn backward_near(&self, x: &XPoint, anchor_base: &Coords) -> Result<XPoint> {
        let guess = self.skew.backward_near(x, anchor_base)?;
        if self.epsilon == 0.0 {
            return Ok(guess);
        }
        let dim = self.skew.base().dim();
        let n = dim + 1;
        let mut x0 = [0.0; 4];
        x0[..dim].copy_from_slice(guess.base.as_slice());
        x0[dim] = guess.m;
        let wrap = self.skew.base().wrap_mask();
        let sol = newton::solve(
            |w, r| {
                let base = Coords::new(&w[..dim]);
                let image = self.forward(&XPoint::new(base, w[dim]));
                for i in 0..dim {
                    let d = image.base[i] - x.base[i];
                    r[i] = if wrap[i] { wrap_signed(d) } else { d };
                }
                r[dim] = wrap_signed(image.m - x.m);
            },
            &x0[..n],
            &NewtonOptions { tol: INVERSE_TOL, fd_step: 1e-7, ..NewtonOptions::default() },
        )?;
        let mut b = Coords::zeros(dim);
        for i in 0..dim {
            b[i] = if wrap[i] { wrap01(sol.x[i]) } else { sol.x[i] };
        }
        Ok(XPoint::new(b, sol.x[dim]))
    }

    /// Reference map this perturbation was built from, direction-aware.
    pub fn reference(&self, x: &XPoint, dir: Direction, anchor_base: &Coords) -> Result<XPoint> {
        match dir {
            Direction::Forward => Ok(self.skew.forward(x)),
            Direction::Backward => self.skew.backward_near(x, anchor_base),
        }
    }
}

/// Grid-sup C⁰ and C¹ distances between `G^{±1}` and `F^{±1}`.
#[derive(Debug, Clone, Copy)]
pub struct C1Distance {
    pub c0_forward: f64,
    pub c1_forward: f64,
    pub c0_backward: f64,
    pub c1_backward: f64,
}

impl C1Distance {
    /// The perturbation size: worst direction, value plus Jacobian terms.
    pub fn rho_hat(&self) -> f64 {
        (self.c0_forward + self.c1_forward).max(self.c0_backward + self.c1_backward)
    }
}

/// Sample grid used by `estimate_c1_distance`.
#[derive(Debug, Clone, Copy)]
pub struct C1GridOptions {
    pub angle_nodes: usize,
    pub disk_samples: usize,
    pub fiber_nodes: usize,
    pub seed: u64,
}

impl Default for C1GridOptions {
    fn default() -> Self {
        Self { angle_nodes: 12, disk_samples: 6, fiber_nodes: 12, seed: 0x91d5 }
    }
}

/// Estimate `max(d_{C^1}(G, F), d_{C^1}(G^{-1}, F^{-1}))` over a grid of
/// attractor-region points: sup of value distances plus sup of
/// finite-difference Jacobian differences (probed operator norm).
pub fn estimate_c1_distance(
    skew: &SkewProduct,
    pert: &PerturbedMap,
    opts: &C1GridOptions,
) -> Result<C1Distance> {
    let pts = c1_grid(skew.base(), opts);
    let mut out = C1Distance { c0_forward: 0.0, c1_forward: 0.0, c0_backward: 0.0, c1_backward: 0.0 };
    for x in &pts {
        // Forward direction.
        let fv = skew.forward(x);
        let gv = pert.forward(x);
        out.c0_forward = out.c0_forward.max(skew.distance_x(&fv, &gv));
        let jd = jacobian_difference(skew, pert, x, Direction::Forward, &fv.base)?;
        out.c1_forward = out.c1_forward.max(jd);
        // Backward direction; both maps take the branch nearest the canonical
        // reference preimage so the comparison is branch-consistent.
        let anchor = skew.base().map_ambient_backward_near(&x.base, &x.base);
        let fb = skew.backward_near(x, &anchor)?;
        let gb = pert.backward_near(x, &anchor)?;
        out.c0_backward = out.c0_backward.max(skew.distance_x(&fb, &gb));
        let jd = jacobian_difference(skew, pert, x, Direction::Backward, &anchor)?;
        out.c1_backward = out.c1_backward.max(jd);
    }
    Ok(out)
}

fn c1_grid(base: &BaseMap, opts: &C1GridOptions) -> Vec<XPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pts = Vec::new();
    for _ in 0..opts.disk_samples {
        let p = base.random_point(&mut rng, 16);
        let amb = base.ambient(&p);
        for i in 0..opts.angle_nodes {
            let mut b = amb;
            b[0] = wrap01(amb[0] + i as f64 / opts.angle_nodes as f64);
            for j in 0..opts.fiber_nodes {
                pts.push(XPoint::new(b, j as f64 / opts.fiber_nodes as f64));
            }
        }
    }
    pts
}

/// Probed operator-norm difference of the finite-difference Jacobians of the
/// two maps at `x`, in the given direction.
fn jacobian_difference(
    skew: &SkewProduct,
    pert: &PerturbedMap,
    x: &XPoint,
    dir: Direction,
    anchor: &Coords,
) -> Result<f64> {
    let dim = skew.base().dim();
    let n = dim + 1;
    let h = C1_FD_STEP;
    let wrap = skew.base().wrap_mask();
    // Columns of J_G - J_F by central differences in each coordinate.
    let mut cols: [[f64; 4]; 4] = [[0.0; 4]; 4];
    for j in 0..n {
        let mut xp = *x;
        let mut xm = *x;
        if j < dim {
            xp.base[j] += h;
            xm.base[j] -= h;
        } else {
            xp.m += h;
            xm.m -= h;
        }
        let (fp, fm, gp, gm) = match dir {
            Direction::Forward => (
                skew.forward(&xp),
                skew.forward(&xm),
                pert.forward(&xp),
                pert.forward(&xm),
            ),
            Direction::Backward => (
                skew.backward_near(&xp, anchor)?,
                skew.backward_near(&xm, anchor)?,
                pert.backward_near(&xp, anchor)?,
                pert.backward_near(&xm, anchor)?,
            ),
        };
        for i in 0..n {
            let (dfi, dgi) = if i < dim {
                let df = fp.base[i] - fm.base[i];
                let dg = gp.base[i] - gm.base[i];
                if wrap[i] {
                    (wrap_signed(df), wrap_signed(dg))
                } else {
                    (df, dg)
                }
            } else {
                (wrap_signed(fp.m - fm.m), wrap_signed(gp.m - gm.m))
            };
            cols[j][i] = (dgi - dfi) / (2.0 * h);
        }
    }
    // Probe the operator norm (X sup-metric in and out) over coordinate and
    // diagonal directions.
    let mut best = 0.0_f64;
    let mut probe = |v: &[f64; 4]| {
        let mut img = [0.0; 4];
        for j in 0..n {
            for i in 0..n {
                img[i] += cols[j][i] * v[j];
            }
        }
        let vn = x_norm(skew.base(), v);
        if vn > 0.0 {
            best = best.max(x_norm(skew.base(), &img) / vn);
        }
    };
    for j in 0..n {
        let mut v = [0.0; 4];
        v[j] = 1.0;
        probe(&v);
    }
    for s in 0..(1 << (n - 1)) {
        let mut v = [0.0; 4];
        for j in 0..n {
            v[j] = if (s >> j) & 1 == 1 { -1.0 } else { 1.0 };
        }
        probe(&v);
    }
    Ok(best)
}

/// Sup-metric norm of a tangent vector on `B x M`.
fn x_norm(base: &BaseMap, v: &[f64; 4]) -> f64 {
    match base {
        BaseMap::Solenoid(_) => v[0].abs().max(crate::geom::hypot2(v[1], v[2])).max(v[3].abs()),
        BaseMap::Torus(_) => crate::geom::hypot2(v[0], v[1]).max(v[3].abs()),
        BaseMap::Doubling(_) => v[0].abs().max(v[3].abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn default_skew() -> SkewProduct {
        SkewProduct::new(BaseMap::default_solenoid(), FiberFamily::default_trig()).unwrap()
    }

    #[test]
    fn identity_fibers_give_unit_l() {
        let skew = SkewProduct::new(BaseMap::default_solenoid(), FiberFamily::identity()).unwrap();
        let report = check_dominated_splitting(&skew).unwrap();
        assert_abs_diff_eq!(report.l_value, 1.0, epsilon = 1e-6);
        assert!(report.pass);
        assert_abs_diff_eq!(report.threshold, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn default_family_matches_analytic_l_and_passes() {
        // Analytic sups for drive a, shear s:
        //   forward d/dm: 1 + 2 pi s, inverse d/dm: 1 / (1 - 2 pi s),
        //   forward d/db: 2 pi a, inverse d/db: 2 pi a / (1 - 2 pi s).
        let skew = default_skew();
        let report = check_dominated_splitting(&skew).unwrap();
        let a = DEFAULT_DRIVE;
        let s = DEFAULT_SHEAR;
        let inv_min_slope = 1.0 / (1.0 - TAU * s);
        let expect_dfdm = (1.0 + TAU * s).max(inv_min_slope);
        let expect_dfdb = (TAU * a).max(TAU * a * inv_min_slope);
        assert_abs_diff_eq!(report.sup_dfdm, expect_dfdm, epsilon = 5e-3);
        assert_abs_diff_eq!(report.sup_dfdb, expect_dfdb, epsilon = 5e-3);
        let expect_l = (0.5 + expect_dfdb).max(expect_dfdm);
        assert_abs_diff_eq!(report.l_value, expect_l, epsilon = 5e-3);
        assert!(report.pass, "default family must satisfy the splitting condition");
        let d = report.lip_budget_constant(&skew.base().constants()).unwrap();
        assert!(d > 0.0 && d < 40.0, "budget constant {d} out of expected range");
    }

    #[test]
    fn strong_drive_amplitudes_fail_the_condition() {
        // A drive of 0.3 with shear 0.1 is still a diffeomorphism, but the
        // inverse base gradient 2 pi 0.3 / (1 - 0.2 pi) pushes L past 2.
        let skew = SkewProduct::new(
            BaseMap::default_solenoid(),
            FiberFamily::Trig { drive: 0.3, shear: 0.1 },
        )
        .unwrap();
        let report = check_dominated_splitting(&skew).unwrap();
        assert!(!report.pass);
        assert!(report.l_value > 2.0);
    }

    #[test]
    fn strong_shear_fails_via_inverse_derivative() {
        // Shear 0.12: forward slope stays positive (1 - 0.24 pi ~ 0.25) but
        // the inverse derivative tops 2, violating the condition.
        let skew = SkewProduct::new(
            BaseMap::default_solenoid(),
            FiberFamily::Trig { drive: 0.0, shear: 0.12 },
        )
        .unwrap();
        let report = check_dominated_splitting(&skew).unwrap();
        assert!(!report.pass);
        assert!(report.sup_dfdm > 2.0);
    }

    #[test]
    fn non_invertible_shear_is_rejected_at_construction() {
        let err = SkewProduct::new(
            BaseMap::default_solenoid(),
            FiberFamily::Trig { drive: 0.0, shear: 0.9 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotFiberMorphism(_)));
    }

    #[test]
    fn degree_three_cover_is_rejected() {
        let err = SkewProduct::new(BaseMap::default_solenoid(), FiberFamily::Cover { degree: 3 })
            .unwrap_err();
        assert!(matches!(err, Error::NotFiberMorphism(_)));
    }

    #[test]
    fn torus_default_family_passes() {
        let skew = SkewProduct::new(BaseMap::torus(), FiberFamily::default_trig()).unwrap();
        let report = check_dominated_splitting(&skew).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn fiber_inverse_roundtrips() {
        let skew = default_skew();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = skew.base().random_point(&mut rng, 16);
            let b = skew.base().ambient(&p);
            let m = rng.gen_range(0.0..1.0);
            let round = skew.fiber_inverse(&b, skew.fiber_value(&b, m)).unwrap();
            assert!(circle_dist(round, m) < 1e-11);
        }
    }

    #[test]
    fn perturbed_roundtrip_residual_small() {
        let skew = default_skew();
        let pert = make_standard_perturbation(&skew, 1e-3, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let p = skew.base().random_point(&mut rng, 16);
            let x = XPoint::new(skew.base().ambient(&p), rng.gen_range(0.0..1.0));
            let fwd = pert.forward(&x);
            let back = pert.backward_near(&fwd, &x.base).unwrap();
            assert!(skew.distance_x(&back, &x) < 1e-8);
        }
    }

    #[test]
    fn zero_epsilon_is_the_reference_map_exactly() {
        let skew = default_skew();
        let pert = make_standard_perturbation(&skew, 0.0, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = skew.base().random_point(&mut rng, 16);
            let x = XPoint::new(skew.base().ambient(&p), rng.gen_range(0.0..1.0));
            let a = pert.forward(&x);
            let b = skew.forward(&x);
            assert_eq!(a.base.as_slice(), b.base.as_slice());
            assert_eq!(a.m, b.m);
        }
        let d = estimate_c1_distance(&skew, &pert, &C1GridOptions::default()).unwrap();
        assert_eq!(d.rho_hat(), 0.0);
    }

    #[test]
    fn same_seed_same_fields() {
        let skew = default_skew();
        let p0 = make_standard_perturbation(&skew, 1e-3, 99);
        let p1 = make_standard_perturbation(&skew, 1e-3, 99);
        let x = XPoint::new(Coords::new(&[0.3, 0.5, -0.2]), 0.7);
        let a = p0.forward(&x);
        let b = p1.forward(&x);
        assert_eq!(a.base.as_slice(), b.base.as_slice());
        assert_eq!(a.m, b.m);
    }

    #[test]
    fn rho_hat_scales_linearly_within_window() {
        let skew = default_skew();
        let mut ratios = Vec::new();
        for eps in [1e-4, 1e-3, 1e-2] {
            let pert = make_standard_perturbation(&skew, eps, 42);
            let d = estimate_c1_distance(&skew, &pert, &C1GridOptions::default()).unwrap();
            let ratio = d.rho_hat() / eps;
            assert!(
                (0.5..=3.0).contains(&ratio),
                "rho_hat/epsilon = {ratio:.3} at epsilon = {eps:e}"
            );
            ratios.push(ratio);
        }
        // Linear scaling: the normalized ratios agree to ~10%.
        for w in ratios.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.15, "nonlinear scaling: {ratios:?}");
        }
    }

    #[test]
    fn torus_rho_hat_in_window() {
        let skew = SkewProduct::new(BaseMap::torus(), FiberFamily::default_trig()).unwrap();
        let pert = make_standard_perturbation(&skew, 1e-3, 11);
        let d = estimate_c1_distance(&skew, &pert, &C1GridOptions::default()).unwrap();
        let ratio = d.rho_hat() / 1e-3;
        assert!((0.5..=3.0).contains(&ratio), "rho_hat/epsilon = {ratio:.3}");
    }
}
