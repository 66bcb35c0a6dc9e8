//! Small numerical kernels shared by the design, resolvent and metrics code.

use crate::error::{Error, Result};

/// Root of a strictly increasing function with `f(lo) < 0`.
///
/// The upper end starts at `lo + step` and doubles until `f` turns positive
/// or exceeds `cap`. Bisection then runs until the bracket is narrower than
/// `tol` or stops shrinking in floating point; the endpoint with the smaller
/// residual is returned.
pub fn bisect_increasing<F>(f: F, lo: f64, step: f64, cap: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let f_lo = f(lo);
    if !(f_lo < 0.0) {
        return Err(Error::Bracketing(format!(
            "function is not negative at the lower end ({f_lo})"
        )));
    }
    let mut width = step;
    let mut hi = lo + width;
    while !(f(hi) > 0.0) {
        width *= 2.0;
        hi = lo + width;
        if hi > cap {
            return Err(Error::Bracketing(format!("no sign change below {cap}")));
        }
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if f(mid) > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(if f(a).abs() <= f(b).abs() { a } else { b })
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Pairwise (cascade) summation; the result depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let den = pairwise_sum(&sxx);
    if den <= 0.0 {
        return None;
    }
    Some(pairwise_sum(&sxy) / den)
}

/// Linear-interpolated quantile of already sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Number of whole steps of size `dt` in `span`, if `span` is a multiple of `dt`.
pub fn aligned_steps(span: f64, dt: f64) -> Option<usize> {
    let ratio = span / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() <= 1e-9 * steps.max(1.0) && steps >= 0.0 {
        Some(steps as usize)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt_two() {
        let r = bisect_increasing(|x| x * x - 2.0, 0.0, 1.0, 1e6, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bisection_reports_bad_brackets() {
        assert!(bisect_increasing(|x| x + 1.0, 0.0, 1.0, 1e6, 1e-12).is_err());
        assert!(bisect_increasing(|_| -1.0, 0.0, 1.0, 1e3, 1e-12).is_err());
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let v = integrate(|x| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
        let v = integrate(|x| 1.0 / (1.0 + x), 0.0, 100.0, 1e-10);
        assert!((v - 101f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn slope_of_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        assert!((ls_slope(&xs, &ys).unwrap() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
    }

    #[test]
    fn alignment() {
        assert_eq!(aligned_steps(0.2, 1e-3), Some(200));
        assert_eq!(aligned_steps(3.5, 1e-3), Some(3500));
        assert_eq!(aligned_steps(0.0, 1e-3), Some(0));
        assert_eq!(aligned_steps(0.2005, 1e-3), None);
    }
}
