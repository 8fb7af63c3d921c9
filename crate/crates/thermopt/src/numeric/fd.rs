//! Finite-difference helpers with coordinate-scaled steps.

/// Step used throughout for central differences: `1e-6 * max(1, |x|)`.
pub fn central_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central difference of a scalar function of one variable.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Five-point central difference, fourth order accurate. Used where a
/// function is differentiated after nested numerical evaluation and the
/// plain central rule would be dominated by evaluation noise.
pub fn central_diff5<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Gradient of `f` at `x` by central differences, one coordinate at a time.
pub fn gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = central_step(x[i]);
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Symmetric Hessian of `f` at `x` by central differences with step `h`
/// in every coordinate (the caller fixes the step; moment problems use 1e-5).
pub fn hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut m = vec![vec![0.0; n]; n];
    let f0 = f(x);
    let mut xp = x.to_vec();
    for i in 0..n {
        // diagonal: (f(x+h e_i) - 2 f(x) + f(x-h e_i)) / h^2
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        m[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in (i + 1)..n {
            xp[i] = x[i] + h;
            xp[j] = x[j] + h;
            let fpp = f(&xp);
            xp[j] = x[j] - h;
            let fpm = f(&xp);
            xp[i] = x[i] - h;
            xp[j] = x[j] + h;
            let fmp = f(&xp);
            xp[j] = x[j] - h;
            let fmm = f(&xp);
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}
