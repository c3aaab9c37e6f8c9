//! Numerical-integration oracle for Student's t tail probabilities.
//!
//! Independent of the incomplete-beta path used by the library: the density
//! kernel is integrated with adaptive Simpson after the substitution
//! x = tan(theta), and normalized by its own integral, so no gamma function
//! is involved.

use std::f64::consts::PI;

/// Unnormalized t kernel after the x = tan(theta) substitution.
fn kernel(theta: f64, df: f64) -> f64 {
    let c = theta.cos();
    if c <= 0.0 {
        return 0.0;
    }
    let t = theta.tan();
    (-(df + 1.0) / 2.0 * (t * t / df).ln_1p()).exp() / (c * c)
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, eps, 50)
}

/// P(T > x) for Student's t with `df` degrees of freedom, as the ratio of the
/// tail integral to the whole-line integral of the kernel.
pub fn t_sf(x: f64, df: f64) -> f64 {
    let f = |theta: f64| kernel(theta, df);
    let half = integrate(f, 0.0, PI / 2.0, 1e-14);
    let a = x.atan();
    let tail = if a >= 0.0 {
        integrate(f, a, PI / 2.0, 1e-14)
    } else {
        half + integrate(f, a, 0.0, 1e-14)
    };
    tail / (2.0 * half)
}
