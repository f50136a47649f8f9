//! Small one-dimensional quadrature rules.

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Nodes and weights of three-point Gauss–Legendre on `[0, 1]`.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Mean value of `f` on the segment `[a, b]` by three-point Gauss–Legendre;
/// exact for quintics.
pub fn gauss3_mean<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    GAUSS3.iter().map(|&(x, w)| w * f(a + (b - a) * x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_log_derivative() {
        let v = adaptive_simpson(&|s: f64| 1.0 / s, 1.0, std::f64::consts::E, 1e-13);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss3_is_exact_for_quintics() {
        let f = |x: f64| x.powi(5) - 2.0 * x.powi(3) + 1.0;
        let (a, b) = (0.3_f64, 1.7_f64);
        let anti = |x: f64| x.powi(6) / 6.0 - x.powi(4) / 2.0 + x;
        let exact = (anti(b) - anti(a)) / (b - a);
        assert!((gauss3_mean(f, a, b) - exact).abs() < 1e-14);
    }
}
