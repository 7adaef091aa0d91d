//! Special functions and quadrature primitives.
//!
//! Everything here is a pure function of its arguments. The incomplete gamma
//! functions switch between the power series (`x < s + 1`) and a Lentz
//! continued fraction (`x >= s + 1`), and expose log-domain variants so that
//! callers can combine huge and tiny factors without overflow.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Largest supported Gauss-Laguerre order.
pub const MAX_LAGUERRE_ORDER: usize = 64;

const MAX_SERIES_ITER: usize = 100_000;
const FPMIN: f64 = f64::MIN_POSITIVE / f64::EPSILON;

/// An `L`-point Gauss-Laguerre rule for the weight `e^-x` on `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLaguerreRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLaguerreRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Abscissas, strictly increasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Approximates `integral_0^inf f(x) e^-x dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = CompensatedSum::default();
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(t));
        }
        acc.total()
    }
}

/// Computes the `order`-point Gauss-Laguerre rule.
///
/// Roots of the Laguerre polynomial are found by Newton iteration on the
/// three-term recurrence, seeded with the classical asymptotic guesses; the
/// weights follow from `w_i = -1 / (n L_n'(x_i) L_{n-1}(x_i))`.
pub fn gauss_laguerre(order: usize) -> Result<GaussLaguerreRule> {
    if !(1..=MAX_LAGUERRE_ORDER).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "Gauss-Laguerre order must be in 1..={MAX_LAGUERRE_ORDER}, got {order}"
        )));
    }
    let n = order;
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut z = 0.0;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
            }
        };
        // Quadratic convergence: once a step is below 1e-13 relative, one more
        // step lands at the rounding floor.
        let mut converged = false;
        for _ in 0..200 {
            let (p1, _, dp) = laguerre_eval(n, z);
            let step = p1 / dp;
            z -= step;
            if converged {
                break;
            }
            converged = step.abs() <= 1e-13 * z.abs();
        }
        if !converged {
            return Err(Error::NoConvergence(format!(
                "Newton iteration for Laguerre root {i} of order {n}"
            )));
        }
        let (_, p_prev, dp) = laguerre_eval(n, z);
        nodes[i] = z;
        weights[i] = -1.0 / (dp * nf * p_prev);
    }
    let ordered = nodes.windows(2).all(|w| w[0] < w[1]) && nodes[0] > 0.0;
    if !ordered || weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InternalConsistency(format!(
            "Gauss-Laguerre order {n} produced unordered nodes or nonpositive weights"
        )));
    }
    Ok(GaussLaguerreRule { nodes, weights })
}

/// Returns `(L_n(x), L_{n-1}(x), L_n'(x))`.
fn laguerre_eval(n: usize, x: f64) -> (f64, f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf + 1.0 - x) * p2 - jf * p3) / (jf + 1.0);
    }
    let nf = n as f64;
    (p1, p2, nf * (p1 - p2) / x)
}

const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

/// Natural log of the Gamma function for `x > 0` (14-term Lanczos, g = 671/128).
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires finite x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    // Exact values at the integers keep ln Gamma(1) = ln Gamma(2) = 0 exact.
    if x.fract() == 0.0 && x <= 30.0 {
        return ln_factorial(x as usize - 1);
    }
    let mut y = x;
    let tmp = x + 5.242_187_5;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = 0.999_999_999_999_997_092;
    for c in LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// `ln(n!)`, exact summation for small `n`.
pub fn ln_factorial(n: usize) -> f64 {
    if n <= 30 {
        (2..=n).map(|i| (i as f64).ln()).sum()
    } else {
        ln_gamma_unchecked(n as f64 + 1.0)
    }
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Upper incomplete gamma function `Gamma(s, x)`.
pub fn upper_inc_gamma(s: f64, x: f64) -> Result<f64> {
    Ok(ln_upper_inc_gamma(s, x)?.exp())
}

/// `ln Gamma(s, x)`, finite even where `Gamma(s, x)` itself would underflow.
pub fn ln_upper_inc_gamma(s: f64, x: f64) -> Result<f64> {
    check_inc_gamma_args(s, x)?;
    if x == 0.0 {
        return Ok(ln_gamma_unchecked(s));
    }
    if x < s + 1.0 {
        let p = lower_series(s, x)?;
        Ok(ln_gamma_unchecked(s) + (-p).ln_1p())
    } else {
        let h = upper_continued_fraction(s, x)?;
        Ok(-x + s * x.ln() + h.ln())
    }
}

/// Regularized lower incomplete gamma `P(s, x) = gamma(s, x) / Gamma(s)`.
///
/// Accurate to full relative precision for small `x`, where `1 - Q` would not be.
pub fn regularized_lower_gamma(s: f64, x: f64) -> Result<f64> {
    check_inc_gamma_args(s, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        lower_series(s, x)
    } else {
        Ok(1.0 - upper_cf_regularized(s, x)?)
    }
}

/// Regularized upper incomplete gamma `Q(s, x) = Gamma(s, x) / Gamma(s)`.
pub fn regularized_upper_gamma(s: f64, x: f64) -> Result<f64> {
    check_inc_gamma_args(s, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < s + 1.0 {
        Ok(1.0 - lower_series(s, x)?)
    } else {
        upper_cf_regularized(s, x)
    }
}

fn check_inc_gamma_args(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("incomplete gamma requires s > 0, got {s}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "incomplete gamma requires x >= 0, got {x} (clamp the argument first)"
        )));
    }
    Ok(())
}

/// `P(s, x)` by the power series; intended for `x < s + 1`.
fn lower_series(s: f64, x: f64) -> Result<f64> {
    let mut ap = s;
    let mut del = 1.0 / s;
    let mut sum = del;
    for _ in 0..MAX_SERIES_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * f64::EPSILON {
            return Ok(sum * (-x + s * x.ln() - ln_gamma_unchecked(s)).exp());
        }
    }
    Err(Error::NoConvergence(format!("incomplete gamma series at s={s}, x={x}")))
}

/// Continued fraction `h` with `Gamma(s, x) = e^-x x^s h`; intended for `x >= s + 1`.
fn upper_continued_fraction(s: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_SERIES_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= f64::EPSILON {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence(format!(
        "incomplete gamma continued fraction at s={s}, x={x}"
    )))
}

fn upper_cf_regularized(s: f64, x: f64) -> Result<f64> {
    let h = upper_continued_fraction(s, x)?;
    Ok((-x + s * x.ln() - ln_gamma_unchecked(s)).exp() * h)
}

/// `ln(e^a + e^b)` without overflow; either argument may be `-inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Tolerances for [`integrate_semi_infinite`].
///
/// The integral is accepted once the error estimate is below
/// `max(rel_tol * |I|, abs_tol)`. Pass a tiny `abs_tol` when the integral
/// itself may be far below `1e-14`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of interval bisections.
    pub max_refinements: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_refinements: 1000,
        }
    }
}

impl QuadratureSpec {
    /// Purely relative tolerance; `abs_tol` is set to the smallest normal float.
    pub fn relative(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: f64::MIN_POSITIVE,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "quadrature tolerances must be positive (rel_tol={}, abs_tol={})",
                self.rel_tol, self.abs_tol
            )));
        }
        Ok(())
    }
}

#[rustfmt::skip]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[rustfmt::skip]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[rustfmt::skip]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
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
        self.error.total_cmp(&other.error) == Ordering::Equal
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

/// 21-point Gauss-Kronrod on `[a, b]`; returns `(value, error estimate)`.
fn kronrod21<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    let fc = g(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = g(center - x);
        let f2 = g(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    if !res_k.is_finite() {
        return Err(Error::Evaluation(format!(
            "integrand is not finite on the mapped interval [{a}, {b}]"
        )));
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((res_k * half, err))
}

/// Adaptive integral of `f` over `[lower, inf)`.
///
/// The half line is mapped onto `(0, 1]` by `x = lower + (1 - t) / t`
/// (`dx = dt / t^2`), and the mapped integrand is integrated with globally
/// adaptive 21-point Gauss-Kronrod bisection.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, lower: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(lower >= 0.0) || !lower.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lower limit must be finite and >= 0, got {lower}"
        )));
    }
    let mapped = |t: f64| {
        let x = lower + (1.0 - t) / t;
        if x.is_infinite() {
            0.0
        } else {
            f(x) / (t * t)
        }
    };

    let mut heap = BinaryHeap::new();
    let (value, error) = kronrod21(&mapped, 0.0, 1.0)?;
    heap.push(Segment {
        a: 0.0,
        b: 1.0,
        value,
        error,
    });
    let mut refinements = 0;
    loop {
        let (estimate, error_bound) = heap.iter().fold((CompensatedSum::default(), 0.0), |(mut v, e), s| {
            v.add(s.value);
            (v, e + s.error)
        });
        let estimate = estimate.total();
        if error_bound <= (spec.rel_tol * estimate.abs()).max(spec.abs_tol) {
            return Ok(estimate);
        }
        if refinements >= spec.max_refinements {
            return Err(Error::Convergence { estimate, error_bound });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at machine resolution; keep it and report what we have.
            return Err(Error::Convergence { estimate, error_bound });
        }
        let (v1, e1) = kronrod21(&mapped, worst.a, mid)?;
        let (v2, e2) = kronrod21(&mapped, mid, worst.b)?;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        refinements += 1;
    }
}
