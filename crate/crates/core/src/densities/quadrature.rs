//! Adaptive 21-point Gauss–Kronrod quadrature with global error control.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Interval;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const MAX_SUBDIVISIONS: usize = 1 << 15;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_005_985,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[10];
    let mut gauss = 0.0;
    let mut res_abs = kron.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kron += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kron;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kron * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((kron - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment {
        a,
        b,
        value,
        error: err,
    }
}

/// Integrates `f` over `iv` to absolute accuracy `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, iv: Interval, tol: f64) -> Result<f64> {
    integrate_with_breaks(f, iv, &[], tol)
}

/// Like [`integrate`], with the interval pre-split at `breaks` (points outside
/// the interval are ignored). Use this for integrands with known kinks or jumps.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    iv: Interval,
    breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    integrate_mixed(f, iv, breaks, tol, 0.0)
}

/// Like [`integrate_with_breaks`], stopping once the error estimate is below
/// `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate_mixed<F: Fn(f64) -> f64>(
    f: F,
    iv: Interval,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(abs_tol > 0.0) || !(rel_tol >= 0.0) {
        return Err(Error::input(format!(
            "tolerances must be positive, got {abs_tol} and {rel_tol}"
        )));
    }
    let target = |v: f64| abs_tol.max(rel_tol * v.abs());
    let mut pts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    pts.push(iv.lo);
    pts.extend(breaks.iter().copied().filter(|&x| x > iv.lo && x < iv.hi));
    pts.push(iv.hi);
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        let s = kronrod21(&f, w[0], w[1]);
        total += s.value;
        total_err += s.error;
        heap.push(s);
    }
    let mut finished_err = 0.0;
    let mut finished_val = 0.0;
    let mut n_seg = heap.len();
    while total_err > target(total) {
        if !total.is_finite() {
            return Err(Error::Integration {
                estimate: total,
                error: total_err,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 1e-14 * iv.width() {
            // cannot bisect further; accept the segment as is
            finished_err += worst.error;
            finished_val += worst.value;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        if n_seg >= MAX_SUBDIVISIONS {
            return Err(Error::Integration {
                estimate: total,
                error: total_err,
            });
        }
        let left = kronrod21(&f, worst.a, mid);
        let right = kronrod21(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        n_seg += 1;
        if heap.is_empty() {
            break;
        }
    }
    // recompute from the segments to avoid accumulated cancellation
    let sum: f64 = heap.iter().map(|s| s.value).sum::<f64>() + finished_val;
    let err: f64 = heap.iter().map(|s| s.error).sum::<f64>() + finished_err;
    if !sum.is_finite() {
        return Err(Error::Integration {
            estimate: sum,
            error: err,
        });
    }
    if err > target(sum) && finished_err > target(sum) {
        return Err(Error::Integration {
            estimate: sum,
            error: err,
        });
    }
    Ok(sum)
}
