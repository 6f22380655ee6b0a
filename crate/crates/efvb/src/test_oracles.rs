//! Small numerical oracles shared by unit tests: central finite differences
//! and trapezoid quadrature. Test-only; kept independent of the
//! implementation paths they check.

use nalgebra::DVector;

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn central_diff_grad<F: Fn(&DVector<f64>) -> f64>(
    x: &DVector<f64>,
    h: f64,
    f: F,
) -> DVector<f64> {
    let mut grad = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let up = f(&xp);
        xp[i] = x[i] - h;
        let down = f(&xp);
        xp[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Composite trapezoid rule of `f` on `[a, b]` with `n` nodes (`n >= 2`).
pub fn trapezoid<F: Fn(f64) -> f64>(a: f64, b: f64, n: usize, f: F) -> f64 {
    let h = (b - a) / (n - 1) as f64;
    let mut total = 0.5 * (f(a) + f(b));
    for i in 1..n - 1 {
        total += f(a + i as f64 * h);
    }
    total * h
}
