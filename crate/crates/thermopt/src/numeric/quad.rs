//! Quadrature rules: adaptive Gauss-Kronrod 15(7), fixed composite
//! Gauss-Legendre, and a Simpson-type rule over recorded trajectory samples.

use crate::error::{Error, Result};

// Kronrod-15 abscissae on [0,1] side of the symmetric rule.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
// Embedded Gauss-7 weights (shared odd abscissae).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_k = WGK[7] * fc;
    let mut res_g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let fsum = f(c - x) + f(c + x);
        res_k += WGK[j] * fsum;
        if j % 2 == 1 {
            res_g += WG[j / 2] * fsum;
        }
    }
    res_k *= h;
    res_g *= h;
    (res_k, (res_k - res_g).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over [a, b] to absolute
/// tolerance `tol`. Globally adaptive: the segment with the largest error
/// estimate is bisected until the total estimate meets the budget.
/// Returns (integral, error estimate).
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (val, err) = gk15(f, a, b);
    let mut segments = vec![(a, b, val, err)];
    let mut total_err = err;
    let mut total_val = val;
    for _ in 0..4000 {
        if total_err <= tol || total_err <= 1e-15 * total_val.abs() {
            return Ok((total_val, total_err));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("nonempty segment list");
        let (sa, sb, sv, se) = segments.swap_remove(worst);
        let m = 0.5 * (sa + sb);
        if m <= sa || m >= sb {
            // interval exhausted at floating-point resolution
            segments.push((sa, sb, sv, se));
            return Ok((total_val, total_err));
        }
        let (lv, le) = gk15(f, sa, m);
        let (rv, re) = gk15(f, m, sb);
        total_val += lv + rv - sv;
        total_err += le + re - se;
        segments.push((sa, m, lv, le));
        segments.push((m, sb, rv, re));
    }
    if total_err <= tol * 1e3 {
        // slowly converging but essentially resolved
        return Ok((total_val, total_err));
    }
    Err(Error::NoConvergence {
        iterations: 4000,
        residual: total_err,
    })
}

// Gauss-Legendre 7-point nodes and weights on [-1, 1].
const GL7_X: [f64; 7] = [
    -0.949107912342759,
    -0.741531185599394,
    -0.405845151377397,
    0.0,
    0.405845151377397,
    0.741531185599394,
    0.949107912342759,
];
const GL7_W: [f64; 7] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

/// Composite fixed-panel Gauss-Legendre rule. Deterministic node layout
/// makes the result a smooth function of the endpoints, which matters when
/// the integral itself is differentiated by finite differences downstream.
pub fn composite_gl7<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1);
    let step = (b - a) / n as f64;
    let mut total = 0.0;
    for p in 0..n {
        let pa = a + p as f64 * step;
        let c = pa + 0.5 * step;
        let h = 0.5 * step;
        let mut acc = 0.0;
        for j in 0..7 {
            acc += GL7_W[j] * f(c + h * GL7_X[j]);
        }
        total += acc * h;
    }
    total
}

/// Line-integral quadrature over recorded samples: integrates p dv given
/// samples of p(t) and v(t) at (possibly nonuniform) times. Consecutive
/// sample pairs are fitted with quadratics in t for both p and v; the
/// product p(t) v'(t) is then a cubic integrated exactly (two-point
/// Gauss per panel). Reduces to composite Simpson on uniform grids.
/// Cumulative values are returned per sample.
pub fn pair_line_integral(times: &[f64], p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 3 || p.len() != n || v.len() != n {
        return Err(Error::SparseSamples(format!(
            "line integral needs at least 3 aligned samples, got {n}"
        )));
    }
    let mut cum = vec![0.0; n];
    let mut i = 0;
    while i + 2 < n {
        let (t0, t1, t2) = (times[i], times[i + 1], times[i + 2]);
        cum[i + 1] = cum[i] + quad_segment(t0, t1, t2, &p[i..i + 3], &v[i..i + 3], t0, t1);
        cum[i + 2] = cum[i + 1] + quad_segment(t0, t1, t2, &p[i..i + 3], &v[i..i + 3], t1, t2);
        i += 2;
    }
    if i + 1 < n {
        // odd leftover interval: reuse the quadratic through the last three samples
        let j = n - 3;
        cum[n - 1] = cum[n - 2]
            + quad_segment(
                times[j],
                times[j + 1],
                times[j + 2],
                &p[j..j + 3],
                &v[j..j + 3],
                times[n - 2],
                times[n - 1],
            );
    }
    Ok(cum)
}

/// Integral of p(t) v'(t) dt over [a, b] where p and v are the quadratic
/// interpolants through (t0,t1,t2). The integrand is cubic; 2-point Gauss
/// is exact.
fn quad_segment(t0: f64, t1: f64, t2: f64, p: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    let lag = |t: f64, vals: &[f64]| -> f64 {
        let l0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2));
        let l1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2));
        let l2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
        vals[0] * l0 + vals[1] * l1 + vals[2] * l2
    };
    let dlag = |t: f64, vals: &[f64]| -> f64 {
        let d0 = ((t - t1) + (t - t2)) / ((t0 - t1) * (t0 - t2));
        let d1 = ((t - t0) + (t - t2)) / ((t1 - t0) * (t1 - t2));
        let d2 = ((t - t0) + (t - t1)) / ((t2 - t0) * (t2 - t1));
        vals[0] * d0 + vals[1] * d1 + vals[2] * d2
    };
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let x = h / 3.0f64.sqrt();
    h * (lag(c - x, p) * dlag(c - x, v) + lag(c + x, p) * dlag(c + x, v))
}
