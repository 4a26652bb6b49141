//! Gauss–Legendre and Gauss–Kronrod quadrature over real and complex integrands.

use num_complex::Complex64;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

/// Values a quadrature rule can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn modulus(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

/// An `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on P_n from the Chebyshev-like initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(&self, a: f64, b: f64, mut f: F) -> T {
        self.mapped(a, b).fold(T::zero(), |acc, (x, w)| acc + f(x) * w)
    }

    /// Composite rule over `panels` equal sub-intervals of [a, b].
    pub fn composite<T: QuadValue, F: FnMut(f64) -> T>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> T {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels).fold(T::zero(), |acc, k| {
            let lo = a + h * k as f64;
            let hi = if k + 1 == panels { b } else { lo + h };
            acc + self.integrate(lo, hi, &mut f)
        })
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// Kronrod 15-point extension of the 7-point Gauss rule (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One G7/K15 panel: (Kronrod value, |Kronrod - Gauss|).
pub fn gauss_kronrod_15<T: QuadValue, F: FnMut(f64) -> T>(a: f64, b: f64, f: &mut F) -> (T, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        kronrod = kronrod + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).modulus())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Adaptive<T> {
    pub value: T,
    pub error_estimate: f64,
    pub converged: bool,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7/K15 integration of `f` over [a, b], bisecting the
/// panel with the largest error estimate until the total estimate drops
/// below `max(abs_tol, rel_tol * |I|)` or `max_panels` is reached.
pub fn adaptive<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Adaptive<T> {
    let (value, error) = gauss_kronrod_15(a, b, &mut f);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    loop {
        if total_err <= abs_tol.max(rel_tol * total.modulus()) {
            return Adaptive { value: total, error_estimate: total_err, converged: true };
        }
        if heap.len() >= max_panels {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (lv, le) = gauss_kronrod_15(worst.a, mid, &mut f);
        let (rv, re) = gauss_kronrod_15(mid, worst.b, &mut f);
        total = total - worst.value + lv + rv;
        total_err = total_err - worst.error + le + re;
        heap.push(Panel { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, error: re });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = heap.iter().fold(T::zero(), |acc, p| acc + p.value);
    let error_estimate = heap.iter().map(|p| p.error).sum();
    Adaptive { value, error_estimate, converged: false }
}

/// Adaptive integration over [a, ∞) through the map x = a + t / (1 - t).
pub fn adaptive_to_infinity<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Adaptive<T> {
    adaptive(
        |t: f64| {
            if t >= 1.0 {
                return T::zero();
            }
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let jac = 1.0 / (one_minus * one_minus);
            if !x.is_finite() {
                return T::zero();
            }
            f(x) * jac
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
        max_panels,
    )
}
