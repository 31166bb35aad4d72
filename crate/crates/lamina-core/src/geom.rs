//! Small fixed-size coordinate vectors and circle arithmetic.
//!
//! Base manifolds in this crate have at most three real coordinates (the
//! solenoid uses `(y, z1, z2)`), so ambient points are carried in a fixed
//! array with an explicit dimension instead of a heap vector.

// Inherent f64 methods shadow these under std; the import is for no_std.
#[allow(unused_imports)]
use num_traits::Float;

/// Ambient coordinate vector with up to three active components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coords {
    vals: [f64; 3],
    dim: usize,
}

impl Coords {
    pub fn new(slice: &[f64]) -> Self {
        debug_assert!(slice.len() <= 3);
        let mut vals = [0.0; 3];
        vals[..slice.len()].copy_from_slice(slice);
        Self { vals, dim: slice.len() }
    }

    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim <= 3);
        Self { vals: [0.0; 3], dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vals[..self.dim]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.vals[..self.dim]
    }

    pub fn add_scaled(&self, other: &Coords, t: f64) -> Coords {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            out.vals[i] += t * other.vals[i];
        }
        out
    }
}

impl core::ops::Index<usize> for Coords {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.vals[i]
    }
}

impl core::ops::IndexMut<usize> for Coords {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.vals[i]
    }
}

/// Reduce to the fundamental domain `[0, 1)`.
pub fn wrap01(x: f64) -> f64 {
    let r = x - x.floor();
    // `x.floor()` can round `r` up to exactly 1.0 for tiny negative inputs.
    if r >= 1.0 {
        r - 1.0
    } else {
        r
    }
}

/// Signed displacement to the nearest representative, in `[-1/2, 1/2)`.
pub fn wrap_signed(x: f64) -> f64 {
    let r = x - x.round();
    if r >= 0.5 {
        r - 1.0
    } else if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// Distance on the unit circle `R/Z`.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    wrap_signed(a - b).abs()
}

pub fn hypot2(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Euclidean norm of a slice.
pub fn norm(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for &x in v {
        s += x * x;
    }
    s.sqrt()
}

/// Max-norm of a slice.
pub fn max_norm(v: &[f64]) -> f64 {
    let mut m = 0.0_f64;
    for &x in v {
        m = m.max(x.abs());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap01_handles_negatives_and_integers() {
        assert_eq!(wrap01(0.0), 0.0);
        assert_eq!(wrap01(1.0), 0.0);
        assert_eq!(wrap01(-0.25), 0.75);
        assert_eq!(wrap01(2.5), 0.5);
        let tiny = -1e-18;
        let w = wrap01(tiny);
        assert!((0.0..1.0).contains(&w));
    }

    #[test]
    fn wrap_signed_is_nearest_representative() {
        assert_eq!(wrap_signed(0.4), 0.4);
        assert_eq!(wrap_signed(0.6), -0.4);
        assert_eq!(wrap_signed(-0.6), 0.4);
        assert_eq!(wrap_signed(3.25), 0.25);
        assert!((-0.5..0.5).contains(&wrap_signed(0.5)));
    }

    #[test]
    fn circle_dist_symmetric_and_small() {
        assert!((circle_dist(0.95, 0.05) - 0.1).abs() < 1e-15);
        assert_eq!(circle_dist(0.3, 0.3), 0.0);
    }
}
