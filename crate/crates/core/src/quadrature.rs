//! Adaptive composite Gauss–Legendre quadrature with interval bisection.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

const ORDER: usize = 12;
const MAX_PANELS: usize = 1 << 16;
const MAX_DEPTH: u32 = 48;

/// Values that can be integrated: a vector space over `f64` with a norm.
pub trait Integrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights on [-1, 1], from Newton iteration on P_n.
fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        out
    })
}

fn panel<T: Integrand, F: FnMut(f64) -> Result<T>>(f: &mut F, a: f64, b: f64) -> Result<T> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = T::zero();
    for &(x, w) in rule() {
        acc = acc + f(mid + half * x)? * (w * half);
    }
    Ok(acc)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// A panel is accepted when the single-panel and two-half-panel estimates agree
/// within its share of `tol` (proportional to panel length).
pub fn integrate<T, F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<T>
where
    T: Integrand,
    F: FnMut(f64) -> Result<T>,
{
    if a == b {
        return Ok(T::zero());
    }
    let width = b - a;
    let mut total = T::zero();
    let mut achieved = 0.0;
    let mut queue = VecDeque::new();
    queue.push_back((a, b, 0u32, panel(&mut f, a, b)?));
    let mut panels = 1usize;
    while let Some((lo, hi, depth, whole)) = queue.pop_front() {
        let mid = 0.5 * (lo + hi);
        let left = panel(&mut f, lo, mid)?;
        let right = panel(&mut f, mid, hi)?;
        let refined = left + right;
        let err = (refined - whole).magnitude();
        let share = tol * ((hi - lo) / width).abs();
        if err <= share {
            total = total + refined;
            achieved += err;
            continue;
        }
        panels += 1;
        if panels > MAX_PANELS || depth >= MAX_DEPTH {
            return Err(Error::Quadrature {
                requested: tol,
                achieved: achieved + err,
            });
        }
        queue.push_back((lo, mid, depth + 1, left));
        queue.push_back((mid, hi, depth + 1, right));
    }
    Ok(total)
}

/// Integrates over `[a, b]` split at the given interior breakpoints.
pub fn integrate_piecewise<T, F>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Result<T>
where
    T: Integrand,
    F: FnMut(f64) -> Result<T>,
{
    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(a);
    edges.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    edges.push(b);
    let width = b - a;
    let mut total = T::zero();
    for w in edges.windows(2) {
        let share = tol * (w[1] - w[0]) / width;
        total = total + integrate(&mut f, w[0], w[1], share)?;
    }
    Ok(total)
}
