//! Adaptive Gauss–Kronrod (G10/K21) quadrature on finite intervals and on
//! polynomially decaying half-lines.

// tabulated abscissae and weights keep their published digits
#![allow(clippy::excessive_precision)]

use crate::error::{BlabError, Result};

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
    0.123_491_976_262_065_851_077_208_980_268,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for the odd-indexed Kronrod nodes 1,3,5,7,9.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-13,
            max_intervals: 4000,
        }
    }
}

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Single 21-point Kronrod rule on [a, b]; returns (kronrod, |kronrod - gauss|).
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[10] * fc;
    let mut rg = 0.0;
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// Globally adaptive integration over [a, b], bisecting the interval with the
/// largest error estimate until the total error meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_breaks(f, &[a, b], opts)
}

/// Same as [`integrate`] but seeded with the given breakpoints.
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], opts: QuadOptions) -> Result<QuadResult> {
    if breaks.len() < 2 {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut pieces: Vec<Piece> = Vec::with_capacity(breaks.len() + 64);
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, error) = gk21(&f, w[0], w[1]);
        pieces.push(Piece {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let mut evals = 21 * pieces.len();
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.error).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(BlabError::QuadratureFailure("adaptive Gauss-Kronrod"));
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target || pieces.len() >= opts.max_intervals {
            return Ok(QuadResult {
                value: total,
                error: err,
                evaluations: evals,
            });
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let worst = pieces.swap_remove(idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            return Ok(QuadResult {
                value: total,
                error: err,
                evaluations: evals,
            });
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        evals += 42;
        pieces.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        pieces.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

/// Geometric breakpoints 0, s, 2s, 4s, ... up to `end` (inclusive).
pub fn geometric_breaks(scale: f64, end: f64) -> Vec<f64> {
    let mut v = vec![0.0];
    let mut x = scale;
    while x < end {
        v.push(x);
        x *= 2.0;
    }
    v.push(end);
    v
}

/// Integral over [0, inf) of an integrand that decays like C r^(-decay) with
/// decay > 1. The truncation radius R is doubled until the analytic tail bound
/// |f(R)| R / (decay - 1) falls below `tail_rel` times the partial sum.
pub fn integrate_half_line<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    decay: f64,
    tail_rel: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    if decay <= 1.0 {
        return Err(BlabError::InvalidParameter(format!(
            "half-line integrand must decay faster than 1/r (decay = {decay})"
        )));
    }
    let mut total = integrate_breaks(&f, &[0.0, scale], opts)?;
    let mut lo = scale;
    loop {
        let hi = 2.0 * lo;
        let piece = integrate_breaks(&f, &[lo, hi], opts)?;
        total.value += piece.value;
        total.error += piece.error;
        total.evaluations += piece.evaluations;
        lo = hi;
        let tail = f(lo).abs() * lo / (decay - 1.0);
        if tail <= tail_rel * total.value.abs() || lo > 1e300 {
            return Ok(total);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_weights_sum_to_two() {
        let s: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert!((s - 2.0).abs() < 1e-15);
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_degree_31() {
        for d in [0u32, 5, 12, 20, 31] {
            let (v, _) = gk21(&|x: f64| x.powi(d as i32), 0.0, 1.0);
            let exact = 1.0 / (d as f64 + 1.0);
            assert!((v - exact).abs() < 1e-14, "degree {d}: {v}");
        }
    }

    #[test]
    fn gauss_part_exact_for_degree_19() {
        let f = |x: f64| x.powi(18) + x.powi(19);
        let (k, e) = gk21(&f, -1.0, 1.0);
        assert!((k - 2.0 / 19.0).abs() < 1e-14);
        assert!(e < 1e-13);
    }

    #[test]
    fn adaptive_handles_peak() {
        let f = |x: f64| 1.0 / (1e-4 + x * x);
        let r = integrate(f, -1.0, 1.0, QuadOptions::default()).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn half_line_rational() {
        let r = integrate_half_line(|x: f64| 1.0 / (1.0 + x).powi(3), 1.0, 3.0, 1e-15, QuadOptions::default())
            .unwrap();
        assert!((r.value - 0.5).abs() < 1e-13);
    }
}
