//! Derivative-free univariate minimization.

const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub evals: usize,
}

/// Brent's method on `[lo, hi]`: golden-section steps with parabolic
/// interpolation when the last three points allow it. `tol` is absolute.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_evals: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let tol = tol.abs().max(f64::EPSILON);

    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut evals = 1;
    let mut d = 0.0_f64;
    let mut e = 0.0_f64;

    while evals < max_evals {
        let m = 0.5 * (a + b);
        let tol1 = tol + f64::EPSILON * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }

        let mut parabolic = false;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            if p.is_finite() && q.is_finite() && p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                parabolic = true;
            }
        }
        if !parabolic {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        evals += 1;

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    Minimum { x, fx, evals }
}

/// Scans `n_grid` equally spaced points of `[lo, hi]`, then refines with
/// [`brent`] between the neighbours of the best grid point. Returns the best
/// point seen, so the answer is never worse than the grid.
pub fn grid_brent<F>(mut f: F, lo: f64, hi: f64, n_grid: usize, tol: f64, max_evals: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    let n = n_grid.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = Minimum {
        x: lo,
        fx: f64::INFINITY,
        evals: 0,
    };
    let mut best_i = 0;
    for i in 0..n {
        let x = if i + 1 == n { hi } else { lo + step * i as f64 };
        let fx = f(x);
        best.evals += 1;
        if fx < best.fx {
            best.x = x;
            best.fx = fx;
            best_i = i;
        }
    }
    let left = lo + step * best_i.saturating_sub(1) as f64;
    let right = (lo + step * (best_i + 1) as f64).min(hi);
    let budget = max_evals.saturating_sub(best.evals).max(1);
    let refined = brent(&mut f, left, right, tol, budget);
    best.evals += refined.evals;
    if refined.fx < best.fx {
        best.x = refined.x;
        best.fx = refined.fx;
    }
    best
}
