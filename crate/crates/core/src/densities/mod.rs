//! Density primitives, quadrature, histograms and polynomial bases.

mod basis;
mod density;
mod efficiency;
mod histogram;
mod interval;
pub mod quadrature;

pub use basis::{bernstein_basis, monomial_basis};
pub use density::{is_normalized, make_density, Density1D, DensitySpec};
pub use efficiency::EfficiencyMap;
pub use histogram::{histogram_density, Histogram1D, HistogramDensity};
pub use interval::Interval;
pub use quadrature::{integrate, integrate_mixed, integrate_with_breaks, DEFAULT_TOL};

/// Maximum of `f` on `iv`: dense grid scan followed by golden-section
/// refinement around the best grid point.
pub fn envelope_max<F: Fn(f64) -> f64>(f: F, iv: Interval) -> f64 {
    const N: usize = 1000;
    let grid = iv.grid(N + 1);
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, x) in grid.iter().enumerate() {
        let v = f(*x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(N)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..60 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    best.max(f(0.5 * (a + b)))
}

/// Maximum of `f` over a rectangle, by a dense 2-D grid followed by
/// coordinate-wise golden-section refinement.
pub fn envelope_max_2d<F: Fn(f64, f64) -> f64>(f: F, xr: Interval, yr: Interval) -> f64 {
    const N: usize = 200;
    let xs = xr.grid(N + 1);
    let ys = yr.grid(N + 1);
    let (mut bx, mut by, mut best) = (xs[0], ys[0], f64::NEG_INFINITY);
    for x in &xs {
        for y in &ys {
            let v = f(*x, *y);
            if v > best {
                best = v;
                bx = *x;
                by = *y;
            }
        }
    }
    let dx = xr.width() / N as f64;
    let dy = yr.width() / N as f64;
    for _ in 0..3 {
        let ix = Interval {
            lo: (bx - dx).max(xr.lo),
            hi: (bx + dx).min(xr.hi),
        };
        bx = argmax_golden(|x| f(x, by), ix);
        let iy = Interval {
            lo: (by - dy).max(yr.lo),
            hi: (by + dy).min(yr.hi),
        };
        by = argmax_golden(|y| f(bx, y), iy);
    }
    best.max(f(bx, by))
}

fn argmax_golden<F: Fn(f64) -> f64>(f: F, iv: Interval) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (iv.lo, iv.hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..50 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let mid = 0.5 * (a + b);
    [iv.lo, mid, iv.hi]
        .into_iter()
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}
