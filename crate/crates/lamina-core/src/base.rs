//! Hyperbolic base maps: solenoid, linear torus automorphism, circle doubling.
//!
//! Attractor points carry whatever symbolic past they need to make the
//! dynamics invertible: the solenoid and doubling map store a truncated
//! backward itinerary (the disk coordinate of the solenoid is *derived* from
//! it), while the torus automorphism is invertible outright. Charts are
//! affine: unit stable/unstable frames attached to a point, which on these
//! flat model spaces realise the exponential map exactly.

use crate::error::{Error, Result};
use crate::geom::{circle_dist, hypot2, norm, wrap01, wrap_signed, Coords};
use crate::newton::{solve_linear, MAX_DIM};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
// Inherent f64 methods shadow these under std; the import is for no_std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

/// Disk contraction factor of the default solenoid.
pub const DEFAULT_SOLENOID_LAMBDA: f64 = 0.05;
/// Disk radius of the default solenoid.
pub const DEFAULT_SOLENOID_RADIUS: f64 = 2.0;
/// Past-word length giving derived-coordinate error below 1e-12 at the defaults.
pub const DEFAULT_PAST_LEN: usize = 16;
/// Default chart radius; charts stay valid out to three times this.
pub const DEFAULT_CHART_DELTA: f64 = 0.05;
const CHART_RANGE_FACTOR: f64 = 3.0;

const TAU: f64 = core::f64::consts::TAU;
const PI: f64 = core::f64::consts::PI;

/// Two-sided contraction/expansion bounds of a hyperbolic base map:
/// `lambda_minus <= |dh| <= lambda` on stable directions and
/// `mu_minus <= |dh^-1| <= mu` on unstable ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicConstants {
    pub lambda_minus: f64,
    pub lambda: f64,
    pub mu_minus: f64,
    pub mu: f64,
}

impl HyperbolicConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_minus > 0.0
            && self.lambda_minus <= self.lambda
            && self.lambda < 1.0
            && self.mu_minus > 0.0
            && self.mu_minus <= self.mu
            && self.mu < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::DegenerateConstants(format!("{self:?}")))
        }
    }

    /// Constants of the time-reversed map (stable and unstable roles swap).
    pub fn swapped(&self) -> Self {
        Self {
            lambda_minus: self.mu_minus,
            lambda: self.mu,
            mu_minus: self.lambda_minus,
            mu: self.lambda,
        }
    }
}

/// Direction of iteration along a base orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Solid-torus solenoid `h(y, z) = (2y, e^{2 pi i y} + lambda z)`.
#[derive(Debug, Clone, Copy)]
pub struct Solenoid {
    pub lambda: f64,
    pub radius: f64,
}

impl Solenoid {
    pub fn new(lambda: f64, radius: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 0.1) {
            return Err(Error::InvalidArgument(format!(
                "solenoid contraction must lie in (0, 0.1), got {lambda}"
            )));
        }
        if radius < 2.0 {
            return Err(Error::InvalidArgument(format!(
                "solenoid disk radius must be >= 2 so the map is into, got {radius}"
            )));
        }
        Ok(Self { lambda, radius })
    }

    /// Past length needed so the truncated disk coordinate is accurate to `tol`.
    pub fn required_past_len(&self, tol: f64) -> usize {
        let mut k = 1;
        let mut err = self.radius * self.lambda;
        while err >= tol && k < 1024 {
            err *= self.lambda;
            k += 1;
        }
        k
    }

    /// Disk coordinate derived from the truncated backward itinerary.
    pub fn disk_coordinate(&self, p: &SolenoidPoint) -> [f64; 2] {
        self.past_sums(p).0
    }

    /// Tangent slope of the unstable direction: the derivative of the derived
    /// disk coordinate with respect to the angle along the attractor.
    pub fn unstable_slope(&self, p: &SolenoidPoint) -> [f64; 2] {
        self.past_sums(p).1
    }

    fn past_sums(&self, p: &SolenoidPoint) -> ([f64; 2], [f64; 2]) {
        let mut y = p.angle;
        let mut z = [0.0, 0.0];
        let mut v = [0.0, 0.0];
        let mut lam_pow = 1.0;
        let mut half_pow = 1.0;
        for &s in &p.past {
            y = 0.5 * (y + s as f64);
            let (sin, cos) = (TAU * y).sin_cos();
            z[0] += lam_pow * cos;
            z[1] += lam_pow * sin;
            v[0] -= half_pow * PI * sin;
            v[1] += half_pow * PI * cos;
            lam_pow *= self.lambda;
            half_pow *= 0.5 * self.lambda;
        }
        (z, v)
    }
}

/// Attractor point of the solenoid: angle plus truncated backward itinerary.
/// `past[0]` is the symbol consumed by the most recent backward step.
#[derive(Debug, Clone, PartialEq)]
pub struct SolenoidPoint {
    pub angle: f64,
    pub past: Vec<u8>,
}

impl SolenoidPoint {
    pub fn new(angle: f64, past: Vec<u8>) -> Self {
        debug_assert!(past.iter().all(|&s| s <= 1));
        Self { angle: wrap01(angle), past }
    }
}

/// Linear hyperbolic torus automorphism with matrix `[[2, 1], [1, 1]]`.
#[derive(Debug, Clone, Copy)]
pub struct TorusAnosov {
    eig_unstable: f64,
    eig_stable: f64,
    e_unstable: [f64; 2],
    e_stable: [f64; 2],
}

impl TorusAnosov {
    pub fn new() -> Self {
        let sqrt5 = 5.0_f64.sqrt();
        let eig_unstable = 0.5 * (3.0 + sqrt5);
        let eig_stable = 0.5 * (3.0 - sqrt5);
        let normalize = |v: [f64; 2]| {
            let n = hypot2(v[0], v[1]);
            [v[0] / n, v[1] / n]
        };
        Self {
            eig_unstable,
            eig_stable,
            e_unstable: normalize([1.0, eig_unstable - 2.0]),
            e_stable: normalize([1.0, eig_stable - 2.0]),
        }
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        (self.eig_stable, self.eig_unstable)
    }
}

impl Default for TorusAnosov {
    fn default() -> Self {
        Self::new()
    }
}

/// Angle–itinerary point for maps whose base circle doubles.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublingPoint {
    pub angle: f64,
    pub past: Vec<u8>,
}

/// Degree-two expanding circle map `y -> 2y`, carried as a base map with no
/// stable directions; pasts make it invertible along orbits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Doubling;

/// A concrete hyperbolic base map.
#[derive(Debug, Clone)]
pub enum BaseMap {
    Solenoid(Solenoid),
    Torus(TorusAnosov),
    Doubling(Doubling),
}

/// A point of the base attractor, with whatever symbolic data the map needs.
#[derive(Debug, Clone, PartialEq)]
pub enum BasePoint {
    Solenoid(SolenoidPoint),
    Torus([f64; 2]),
    Doubling(DoublingPoint),
}

impl BaseMap {
    pub fn default_solenoid() -> Self {
        BaseMap::Solenoid(Solenoid { lambda: DEFAULT_SOLENOID_LAMBDA, radius: DEFAULT_SOLENOID_RADIUS })
    }

    pub fn torus() -> Self {
        BaseMap::Torus(TorusAnosov::new())
    }

    pub fn doubling() -> Self {
        BaseMap::Doubling(Doubling)
    }

    /// Ambient dimension of the base manifold.
    pub fn dim(&self) -> usize {
        match self {
            BaseMap::Solenoid(_) => 3,
            BaseMap::Torus(_) => 2,
            BaseMap::Doubling(_) => 1,
        }
    }

    pub fn dim_stable(&self) -> usize {
        match self {
            BaseMap::Solenoid(_) => 2,
            BaseMap::Torus(_) => 1,
            BaseMap::Doubling(_) => 0,
        }
    }

    pub fn dim_unstable(&self) -> usize {
        1
    }

    /// Which ambient coordinates are circle-valued.
    pub fn wrap_mask(&self) -> [bool; 3] {
        match self {
            BaseMap::Solenoid(_) => [true, false, false],
            BaseMap::Torus(_) => [true, true, false],
            BaseMap::Doubling(_) => [true, false, false],
        }
    }

    pub fn constants(&self) -> HyperbolicConstants {
        match self {
            BaseMap::Solenoid(s) => HyperbolicConstants {
                lambda_minus: s.lambda,
                lambda: s.lambda,
                mu_minus: 0.5,
                mu: 0.5,
            },
            BaseMap::Torus(t) => HyperbolicConstants {
                lambda_minus: t.eig_stable,
                lambda: t.eig_stable,
                mu_minus: 1.0 / t.eig_unstable,
                mu: 1.0 / t.eig_unstable,
            },
            BaseMap::Doubling(_) => HyperbolicConstants {
                // No stable directions; report a harmless placeholder there.
                lambda_minus: 0.5,
                lambda: 0.5,
                mu_minus: 0.5,
                mu: 0.5,
            },
        }
    }

    /// Ambient coordinates of an attractor point (derived coordinates included).
    pub fn ambient(&self, p: &BasePoint) -> Coords {
        match (self, p) {
            (BaseMap::Solenoid(s), BasePoint::Solenoid(sp)) => {
                let z = s.disk_coordinate(sp);
                Coords::new(&[sp.angle, z[0], z[1]])
            }
            (BaseMap::Torus(_), BasePoint::Torus(xy)) => Coords::new(xy),
            (BaseMap::Doubling(_), BasePoint::Doubling(dp)) => Coords::new(&[dp.angle]),
            _ => panic!("base point does not belong to this base map"),
        }
    }

    /// One step of the base dynamics on symbolic points.
    ///
    /// Forward steps keep the past-word length fixed (the oldest symbol is
    /// discarded); backward steps consume one symbol and fail once the
    /// itinerary is exhausted.
    pub fn step(&self, p: &BasePoint, dir: Direction) -> Result<BasePoint> {
        match (self, p) {
            (BaseMap::Solenoid(_), BasePoint::Solenoid(sp)) => {
                let (angle, past) = step_symbolic(sp.angle, &sp.past, dir)?;
                Ok(BasePoint::Solenoid(SolenoidPoint { angle, past }))
            }
            (BaseMap::Torus(t), BasePoint::Torus(xy)) => {
                let m: [[f64; 2]; 2] = match dir {
                    Direction::Forward => [[2.0, 1.0], [1.0, 1.0]],
                    Direction::Backward => [[1.0, -1.0], [-1.0, 2.0]],
                };
                let _ = t;
                Ok(BasePoint::Torus([
                    wrap01(m[0][0] * xy[0] + m[0][1] * xy[1]),
                    wrap01(m[1][0] * xy[0] + m[1][1] * xy[1]),
                ]))
            }
            (BaseMap::Doubling(_), BasePoint::Doubling(dp)) => {
                let (angle, past) = step_symbolic(dp.angle, &dp.past, dir)?;
                Ok(BasePoint::Doubling(DoublingPoint { angle, past }))
            }
            _ => panic!("base point does not belong to this base map"),
        }
    }

    /// Orbit `[p, h(p), ..., h^n(p)]` (or backward), length `n + 1`.
    pub fn orbit(&self, p: &BasePoint, n: usize, dir: Direction) -> Result<Vec<BasePoint>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(p.clone());
        for _ in 0..n {
            let next = self.step(out.last().unwrap(), dir)?;
            out.push(next);
        }
        Ok(out)
    }

    /// Metric on the base: sup of circle distance and Euclidean disk distance
    /// for the solenoid, wrapped Euclidean distance for the torus.
    pub fn distance(&self, a: &Coords, b: &Coords) -> f64 {
        match self {
            BaseMap::Solenoid(_) => {
                let dy = circle_dist(a[0], b[0]);
                let dz = hypot2(a[1] - b[1], a[2] - b[2]);
                dy.max(dz)
            }
            BaseMap::Torus(_) => {
                hypot2(wrap_signed(a[0] - b[0]), wrap_signed(a[1] - b[1]))
            }
            BaseMap::Doubling(_) => circle_dist(a[0], b[0]),
        }
    }

    /// Displacement `to - from` with circle coordinates wrapped to the nearest
    /// representative.
    pub fn displacement(&self, from: &Coords, to: &Coords) -> Coords {
        let mask = self.wrap_mask();
        let mut out = Coords::zeros(self.dim());
        for i in 0..self.dim() {
            let d = to[i] - from[i];
            out[i] = if mask[i] { wrap_signed(d) } else { d };
        }
        out
    }

    /// The base map on raw ambient coordinates (no symbolic data needed).
    pub fn map_ambient_forward(&self, x: &Coords) -> Coords {
        match self {
            BaseMap::Solenoid(s) => {
                let (sin, cos) = (TAU * x[0]).sin_cos();
                Coords::new(&[
                    wrap01(2.0 * x[0]),
                    cos + s.lambda * x[1],
                    sin + s.lambda * x[2],
                ])
            }
            BaseMap::Torus(_) => Coords::new(&[
                wrap01(2.0 * x[0] + x[1]),
                wrap01(x[0] + x[1]),
            ]),
            BaseMap::Doubling(_) => Coords::new(&[wrap01(2.0 * x[0])]),
        }
    }

    /// Backward branch of the base map that lands nearest `anchor`.
    ///
    /// The solenoid and doubling map are two-to-one, so the inverse needs a
    /// branch choice; callers always know which base point the preimage should
    /// be close to.
    pub fn map_ambient_backward_near(&self, x: &Coords, anchor: &Coords) -> Coords {
        match self {
            BaseMap::Solenoid(s) => {
                let y = nearest_half_angle(x[0], anchor[0]);
                let (sin, cos) = (TAU * y).sin_cos();
                Coords::new(&[
                    y,
                    (x[1] - cos) / s.lambda,
                    (x[2] - sin) / s.lambda,
                ])
            }
            BaseMap::Torus(_) => {
                // Unwrap x to the representative nearest the forward image of
                // the anchor, then apply the exact inverse matrix.
                let fwd = [
                    2.0 * anchor[0] + anchor[1],
                    anchor[0] + anchor[1],
                ];
                let rx = fwd[0] + wrap_signed(x[0] - fwd[0]);
                let ry = fwd[1] + wrap_signed(x[1] - fwd[1]);
                Coords::new(&[wrap01(rx - ry), wrap01(-rx + 2.0 * ry)])
            }
            BaseMap::Doubling(_) => Coords::new(&[nearest_half_angle(x[0], anchor[0])]),
        }
    }

    /// Affine chart at `p`: unit stable and unstable frames in the ambient
    /// coordinates, valid out to radius `3 * delta`.
    pub fn chart(&self, p: &BasePoint, delta: f64) -> ChartFrame {
        let origin = self.ambient(p);
        let mut vecs = [Coords::zeros(self.dim()); 3];
        let (dim_s, dim_u) = (self.dim_stable(), self.dim_unstable());
        match (self, p) {
            (BaseMap::Solenoid(s), BasePoint::Solenoid(sp)) => {
                vecs[0] = Coords::new(&[0.0, 1.0, 0.0]);
                vecs[1] = Coords::new(&[0.0, 0.0, 1.0]);
                let v = s.unstable_slope(sp);
                let n = hypot2(v[0], v[1]).max(1.0);
                vecs[2] = Coords::new(&[1.0 / n, v[0] / n, v[1] / n]);
            }
            (BaseMap::Torus(t), BasePoint::Torus(_)) => {
                vecs[0] = Coords::new(&t.e_stable);
                vecs[1] = Coords::new(&t.e_unstable);
            }
            (BaseMap::Doubling(_), BasePoint::Doubling(_)) => {
                vecs[0] = Coords::new(&[1.0]);
            }
            _ => panic!("base point does not belong to this base map"),
        }
        ChartFrame { origin, vecs, dim_s, dim_u, delta, wrap_mask: self.wrap_mask() }
    }

    /// Uniform random attractor point with the requested past length.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, past_len: usize) -> BasePoint {
        match self {
            BaseMap::Solenoid(_) => {
                let past = (0..past_len).map(|_| rng.gen_range(0..=1u8)).collect();
                BasePoint::Solenoid(SolenoidPoint { angle: rng.gen_range(0.0..1.0), past })
            }
            BaseMap::Torus(_) => {
                BasePoint::Torus([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            }
            BaseMap::Doubling(_) => {
                let past = (0..past_len).map(|_| rng.gen_range(0..=1u8)).collect();
                BasePoint::Doubling(DoublingPoint { angle: rng.gen_range(0.0..1.0), past })
            }
        }
    }

    /// The point at oriented angle offset `s` from `p` along its unstable
    /// manifold. The backward itinerary slides with the point: crossing the
    /// circle origin carries into the past word, so the whole backward orbit
    /// moves continuously and both points stay on one unstable leaf.
    pub fn shift_unstable(&self, p: &BasePoint, s: f64) -> BasePoint {
        match (self, p) {
            (BaseMap::Solenoid(_), BasePoint::Solenoid(sp)) => {
                let (angle, past) = shift_angle_with_carry(sp.angle, s, &sp.past);
                BasePoint::Solenoid(SolenoidPoint { angle, past })
            }
            (BaseMap::Torus(t), BasePoint::Torus(xy)) => BasePoint::Torus([
                wrap01(xy[0] + s * t.e_unstable[0]),
                wrap01(xy[1] + s * t.e_unstable[1]),
            ]),
            (BaseMap::Doubling(_), BasePoint::Doubling(dp)) => {
                let (angle, past) = shift_angle_with_carry(dp.angle, s, &dp.past);
                BasePoint::Doubling(DoublingPoint { angle, past })
            }
            _ => panic!("base point does not belong to this base map"),
        }
    }

    /// Local product structure: the intersection of the local unstable
    /// manifold of `b` with the local stable manifold of `b_prime`.
    pub fn product_point(
        &self,
        b: &BasePoint,
        b_prime: &BasePoint,
        delta: f64,
    ) -> Result<ProductPointReport> {
        let pa = self.ambient(b);
        let pb = self.ambient(b_prime);
        let dist = self.distance(&pa, &pb);
        if dist > delta {
            return Err(Error::PointsTooFar { dist, delta });
        }
        let star = match (self, b, b_prime) {
            (BaseMap::Solenoid(_), BasePoint::Solenoid(sb), BasePoint::Solenoid(sbp)) => {
                // Local stable manifolds are the angle slices {y} x D, local
                // unstable manifolds fix the past word: the intersection takes
                // the angle of b' and the itinerary of b.
                BasePoint::Solenoid(SolenoidPoint { angle: sbp.angle, past: sb.past.clone() })
            }
            (BaseMap::Torus(t), BasePoint::Torus(_), BasePoint::Torus(_)) => {
                let d = self.displacement(&pa, &pb);
                // Solve b + s e_u = b' + t e_s for (s, t).
                let mut mat = [[0.0; MAX_DIM]; MAX_DIM];
                mat[0][0] = t.e_unstable[0];
                mat[0][1] = -t.e_stable[0];
                mat[1][0] = t.e_unstable[1];
                mat[1][1] = -t.e_stable[1];
                let mut rhs = [d[0], d[1], 0.0, 0.0];
                solve_linear(&mut mat, &mut rhs, 2)?;
                BasePoint::Torus([
                    wrap01(pa[0] + rhs[0] * t.e_unstable[0]),
                    wrap01(pa[1] + rhs[0] * t.e_unstable[1]),
                ])
            }
            (BaseMap::Doubling(_), BasePoint::Doubling(db), BasePoint::Doubling(dbp)) => {
                // No stable directions: the stable manifold of b' is b' alone.
                BasePoint::Doubling(DoublingPoint { angle: dbp.angle, past: db.past.clone() })
            }
            _ => panic!("base points do not belong to this base map"),
        };
        let ps = self.ambient(&star);
        let c_ratio = if dist > 0.0 {
            (self.distance(&pa, &ps) + self.distance(&pb, &ps)) / dist
        } else {
            0.0
        };
        Ok(ProductPointReport { point: star, c_ratio })
    }

    /// Per-step distance ratios along a stable pair (forward) or an unstable
    /// pair (backward).
    pub fn manifold_contraction_rates(
        &self,
        b0: &BasePoint,
        b1: &BasePoint,
        kind: PairKind,
        steps: usize,
    ) -> Result<RateReport> {
        let dir = match kind {
            PairKind::Stable => Direction::Forward,
            PairKind::Unstable => Direction::Backward,
        };
        let o0 = self.orbit(b0, steps, dir)?;
        let o1 = self.orbit(b1, steps, dir)?;
        let mut pairs = Vec::with_capacity(steps + 1);
        let mut distances = Vec::with_capacity(steps + 1);
        for (p0, p1) in o0.iter().zip(o1.iter()) {
            let a = self.ambient(p0);
            let b = self.ambient(p1);
            distances.push(self.distance(&a, &b));
            pairs.push((a, b));
        }
        let ratios = distances
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect();
        Ok(RateReport { kind, distances, ratios, pairs })
    }

    /// Random pair of nearby attractor points on a common stable or unstable
    /// local manifold, suitable for `manifold_contraction_rates`.
    pub fn make_contraction_pair<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        kind: PairKind,
        past_len: usize,
    ) -> Result<(BasePoint, BasePoint)> {
        match (self, kind) {
            (BaseMap::Solenoid(_), PairKind::Stable) => {
                let angle = rng.gen_range(0.0..1.0);
                let past0: Vec<u8> = (0..past_len).map(|_| rng.gen_range(0..=1u8)).collect();
                let mut past1 = past0.clone();
                // Same angle; itineraries agree for two symbols so the derived
                // disk coordinates differ by ~2 lambda^2 < delta.
                for s in past1.iter_mut().skip(2) {
                    *s = rng.gen_range(0..=1u8);
                }
                if past1[2..] == past0[2..] {
                    past1[2] ^= 1;
                }
                Ok((
                    BasePoint::Solenoid(SolenoidPoint { angle, past: past0 }),
                    BasePoint::Solenoid(SolenoidPoint { angle, past: past1 }),
                ))
            }
            (BaseMap::Solenoid(_), PairKind::Unstable) => {
                let angle = rng.gen_range(0.0..1.0);
                let past: Vec<u8> = (0..past_len).map(|_| rng.gen_range(0..=1u8)).collect();
                let offset = 0.01;
                Ok((
                    BasePoint::Solenoid(SolenoidPoint { angle, past: past.clone() }),
                    BasePoint::Solenoid(SolenoidPoint { angle: wrap01(angle + offset), past }),
                ))
            }
            (BaseMap::Torus(t), kind) => {
                let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                let e = match kind {
                    PairKind::Stable => t.e_stable,
                    PairKind::Unstable => t.e_unstable,
                };
                let offset = 0.01;
                Ok((
                    BasePoint::Torus(p),
                    BasePoint::Torus([wrap01(p[0] + offset * e[0]), wrap01(p[1] + offset * e[1])]),
                ))
            }
            (BaseMap::Doubling(_), PairKind::Unstable) => {
                let angle = rng.gen_range(0.0..1.0);
                let past: Vec<u8> = (0..past_len).map(|_| rng.gen_range(0..=1u8)).collect();
                Ok((
                    BasePoint::Doubling(DoublingPoint { angle, past: past.clone() }),
                    BasePoint::Doubling(DoublingPoint { angle: wrap01(angle + 0.01), past }),
                ))
            }
            (BaseMap::Doubling(_), PairKind::Stable) => Err(Error::InvalidArgument(
                String::from("the doubling map has no stable directions"),
            )),
        }
    }
}

fn step_symbolic(angle: f64, past: &[u8], dir: Direction) -> Result<(f64, Vec<u8>)> {
    match dir {
        Direction::Forward => {
            let bit = if angle >= 0.5 { 1u8 } else { 0u8 };
            let new_angle = wrap01(2.0 * angle);
            let mut new_past = Vec::with_capacity(past.len());
            new_past.push(bit);
            if !past.is_empty() {
                new_past.extend_from_slice(&past[..past.len() - 1]);
            }
            Ok((new_angle, new_past))
        }
        Direction::Backward => {
            if past.is_empty() {
                return Err(Error::InsufficientPast { needed: 1, have: 0 });
            }
            let s = past[0] as f64;
            Ok((0.5 * (angle + s), past[1..].to_vec()))
        }
    }
}

/// Slide an angle by `s` inside its unstable parametrization. The depth-`k`
/// backward angle is `(angle + N_k) / 2^k` with `N_k` read LSB-first from the
/// past word, so wrapping across the circle origin must carry into that word
/// (modulo `2^len`) to keep every backward angle continuous.
fn shift_angle_with_carry(angle: f64, s: f64, past: &[u8]) -> (f64, Vec<u8>) {
    let t = angle + s;
    let carry = t.floor() as i64;
    let mut bits = past.to_vec();
    for _ in 0..carry.abs() {
        if carry > 0 {
            for b in bits.iter_mut() {
                if *b == 0 {
                    *b = 1;
                    break;
                }
                *b = 0;
            }
        } else {
            for b in bits.iter_mut() {
                if *b == 1 {
                    *b = 0;
                    break;
                }
                *b = 1;
            }
        }
    }
    (wrap01(t - carry as f64), bits)
}

fn nearest_half_angle(y: f64, anchor: f64) -> f64 {
    let a = wrap01(0.5 * y);
    let b = wrap01(0.5 * y + 0.5);
    if circle_dist(a, anchor) <= circle_dist(b, anchor) {
        a
    } else {
        b
    }
}

/// Affine chart: origin plus unit stable/unstable frame vectors.
#[derive(Debug, Clone)]
pub struct ChartFrame {
    pub origin: Coords,
    vecs: [Coords; 3],
    pub dim_s: usize,
    pub dim_u: usize,
    pub delta: f64,
    pub wrap_mask: [bool; 3],
}

impl ChartFrame {
    pub fn stable_frame(&self) -> &[Coords] {
        &self.vecs[..self.dim_s]
    }

    pub fn unstable_frame(&self) -> &[Coords] {
        &self.vecs[self.dim_s..self.dim_s + self.dim_u]
    }

    /// Chart with the stable and unstable roles exchanged (time reversal).
    pub fn swapped(&self) -> ChartFrame {
        let mut vecs = [Coords::zeros(self.origin.dim()); 3];
        for (i, v) in self
            .unstable_frame()
            .iter()
            .chain(self.stable_frame().iter())
            .enumerate()
        {
            vecs[i] = *v;
        }
        ChartFrame {
            origin: self.origin,
            vecs,
            dim_s: self.dim_u,
            dim_u: self.dim_s,
            delta: self.delta,
            wrap_mask: self.wrap_mask,
        }
    }

    /// `origin + sum x_s[i] e_s[i] + sum x_u[j] e_u[j]`, circle coordinates
    /// wrapped. Errors once either block leaves the 3-delta validity region.
    pub fn to_manifold(&self, x_s: &[f64], x_u: &[f64]) -> Result<Coords> {
        debug_assert_eq!(x_s.len(), self.dim_s);
        debug_assert_eq!(x_u.len(), self.dim_u);
        let limit = CHART_RANGE_FACTOR * self.delta;
        let radius = norm(x_s).max(norm(x_u));
        if radius > limit {
            return Err(Error::OutOfChart { radius, limit });
        }
        let dim = self.origin.dim();
        let mut out = self.origin;
        for (i, &c) in x_s.iter().enumerate() {
            out = out.add_scaled(&self.vecs[i], c);
        }
        for (j, &c) in x_u.iter().enumerate() {
            out = out.add_scaled(&self.vecs[self.dim_s + j], c);
        }
        for i in 0..dim {
            if self.wrap_mask[i] {
                out[i] = wrap01(out[i]);
            }
        }
        Ok(out)
    }

    /// Invert `to_manifold` for a nearby ambient point.
    pub fn from_manifold(&self, p: &Coords) -> Result<([f64; 2], [f64; 2])> {
        let dim = self.origin.dim();
        let n = self.dim_s + self.dim_u;
        debug_assert_eq!(n, dim);
        let mut disp = [0.0; MAX_DIM];
        for i in 0..dim {
            let d = p[i] - self.origin[i];
            disp[i] = if self.wrap_mask[i] { wrap_signed(d) } else { d };
        }
        let mut mat = [[0.0; MAX_DIM]; MAX_DIM];
        for col in 0..n {
            for row in 0..dim {
                mat[row][col] = self.vecs[col][row];
            }
        }
        solve_linear(&mut mat, &mut disp, n)?;
        let mut x_s = [0.0; 2];
        let mut x_u = [0.0; 2];
        x_s[..self.dim_s].copy_from_slice(&disp[..self.dim_s]);
        x_u[..self.dim_u].copy_from_slice(&disp[self.dim_s..n]);
        let limit = CHART_RANGE_FACTOR * self.delta;
        let radius = norm(&x_s[..self.dim_s]).max(norm(&x_u[..self.dim_u]));
        if radius > limit {
            return Err(Error::OutOfChart { radius, limit });
        }
        Ok((x_s, x_u))
    }
}

/// Which local manifold a contraction-rate pair lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Stable,
    Unstable,
}

/// Outcome of `product_point`: the bracket point and the quasi-triangle ratio
/// `(d(b, b*) + d(b', b*)) / d(b, b')`.
#[derive(Debug, Clone)]
pub struct ProductPointReport {
    pub point: BasePoint,
    pub c_ratio: f64,
}

/// Distances and per-step ratios along a contracting orbit pair.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub kind: PairKind,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Ambient coordinates of both orbits, step by step.
    pub pairs: Vec<(Coords, Coords)>,
}
