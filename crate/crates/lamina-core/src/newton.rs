//! Damped Newton iteration with finite-difference Jacobians.
//!
//! All nonlinear solves in the crate are small (dimension <= 4): chart
//! pull-backs, map inversion, and fiber inversion. The solver below uses a
//! forward-difference Jacobian, partial-pivot elimination, and step-halving
//! damping on the max-norm of the residual.

use crate::error::{Error, Result};
// Inherent f64 methods shadow these under std; the import is for no_std.
#[allow(unused_imports)]
use num_traits::Float;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 50;
pub const DEFAULT_FD_STEP: f64 = 1e-6;
const MAX_HALVINGS: usize = 10;
/// Dimension cap for the stack-allocated linear algebra.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS, fd_step: DEFAULT_FD_STEP }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub x: [f64; MAX_DIM],
    pub dim: usize,
    pub residual: f64,
    pub iterations: usize,
}

/// Solve `f(x) = 0` by damped Newton from `x0`.
///
/// `f` writes its residual into the output slice; both slices have `x0.len()`
/// entries. Circle-valued residual components must already be wrapped to the
/// nearest representative by the caller.
pub fn solve<F>(mut f: F, x0: &[f64], opts: &NewtonOptions) -> Result<NewtonSolution>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    debug_assert!(n >= 1 && n <= MAX_DIM);
    let mut x = [0.0; MAX_DIM];
    x[..n].copy_from_slice(x0);
    let mut r = [0.0; MAX_DIM];
    f(&x[..n], &mut r[..n]);
    let mut rnorm = max_norm(&r[..n]);

    for iter in 0..opts.max_iters {
        if rnorm <= opts.tol {
            return Ok(NewtonSolution { x, dim: n, residual: rnorm, iterations: iter });
        }
        // Forward-difference Jacobian, column by column.
        let mut jac = [[0.0; MAX_DIM]; MAX_DIM];
        let mut rp = [0.0; MAX_DIM];
        for j in 0..n {
            let h = opts.fd_step;
            let mut xp = x;
            xp[j] += h;
            f(&xp[..n], &mut rp[..n]);
            for i in 0..n {
                jac[i][j] = (rp[i] - r[i]) / h;
            }
        }
        let mut step = [0.0; MAX_DIM];
        for i in 0..n {
            step[i] = -r[i];
        }
        solve_linear(&mut jac, &mut step, n)
            .map_err(|_| Error::NewtonFailed { residual: rnorm, iterations: iter })?;

        // Backtracking: halve the step until the residual decreases.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut xt = x;
            for i in 0..n {
                xt[i] += t * step[i];
            }
            let mut rt = [0.0; MAX_DIM];
            f(&xt[..n], &mut rt[..n]);
            let rtnorm = max_norm(&rt[..n]);
            if rtnorm < rnorm || rtnorm <= opts.tol {
                x = xt;
                r = rt;
                rnorm = rtnorm;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonFailed { residual: rnorm, iterations: iter + 1 });
        }
    }
    if rnorm <= opts.tol {
        return Ok(NewtonSolution { x, dim: n, residual: rnorm, iterations: opts.max_iters });
    }
    Err(Error::NewtonFailed { residual: rnorm, iterations: opts.max_iters })
}

/// In-place partial-pivot Gaussian elimination; `rhs` becomes the solution.
pub fn solve_linear(a: &mut [[f64; MAX_DIM]; MAX_DIM], rhs: &mut [f64; MAX_DIM], n: usize) -> Result<()> {
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::InvalidArgument(alloc::string::String::from(
                "singular linear system",
            )));
        }
        if pivot != col {
            a.swap(pivot, col);
            rhs.swap(pivot, col);
        }
        let inv = 1.0 / a[col][col];
        for row in (col + 1)..n {
            let factor = a[row][col] * inv;
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = rhs[col];
        for k in (col + 1)..n {
            s -= a[col][k] * rhs[k];
        }
        rhs[col] = s / a[col][col];
    }
    Ok(())
}

/// Bisection for a scalar root with a sign-changing bracket `[a, b]`.
pub fn bisect<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iters: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketFailed(alloc::string::String::from(
            "endpoints have equal signs",
        )));
    }
    for _ in 0..max_iters {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= tol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    let mut m = 0.0_f64;
    for &x in v {
        m = m.max(x.abs());
    }
    m
}
