//! Dense two-phase simplex for tiny LPs (hull-membership tests).
//!
//! Problems here have at most a handful of rows (d+1 with d <= 3) and a
//! dozen columns, so a plain tableau with Bland's rule is plenty.

const PIVOT_EPS: f64 = 1e-11;

/// Maximize c'x subject to A x = b, x >= 0. `a` is row-major, `b` may have
/// any sign (rows are normalized internally). Returns the optimal objective
/// value, or None when infeasible.
pub fn solve_lp_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), m);

    // tableau: m rows of [A | I_artificial | rhs], artificial basis
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0usize; m];
    for (i, row) in t.iter_mut().enumerate() {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * a[i][j];
        }
        row[n + i] = 1.0;
        row[width - 1] = sign * b[i];
        basis[i] = n + i;
    }

    // phase 1: minimize sum of artificials, i.e. maximize their negative.
    // Reduced-cost row for the artificial basis: -(sum of constraint rows)
    // on structural columns, zero on the artificial ones.
    let mut obj1 = vec![0.0; width];
    for row in &t {
        for (j, o) in obj1.iter_mut().enumerate() {
            *o -= row[j];
        }
    }
    for j in n..n + m {
        obj1[j] = 0.0;
    }
    run_simplex(&mut t, &mut basis, &mut obj1, n + m)?;
    if obj1[width - 1].abs() > 1e-9 {
        return None; // infeasible
    }

    // drive any lingering artificial out of the basis, then drop those columns
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > PIVOT_EPS) {
                pivot(&mut t, &mut basis, i, j);
            }
            // an all-zero structural row is redundant; leave it, it stays inert
        }
    }

    // phase 2: maximize c'x == minimize -c'x; reduced costs for current basis
    let mut obj2 = vec![0.0; width];
    for j in 0..n {
        obj2[j] = -c[j];
    }
    for i in 0..m {
        if basis[i] < n {
            let coeff = obj2[basis[i]];
            if coeff != 0.0 {
                for j in 0..width {
                    obj2[j] -= coeff * t[i][j];
                }
            }
        }
    }
    run_simplex(&mut t, &mut basis, &mut obj2, n)?;
    Some(obj2[width - 1])
}

fn run_simplex(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: &mut [f64],
    ncols: usize,
) -> Option<()> {
    let width = obj.len();
    for _ in 0..10_000 {
        // Bland's rule: first column with negative reduced cost
        let Some(enter) = (0..ncols).find(|&j| obj[j] < -PIVOT_EPS) else {
            return Some(());
        };
        let mut leave = None;
        let mut best = f64::INFINITY;
        for (i, row) in t.iter().enumerate() {
            if row[enter] > PIVOT_EPS {
                let ratio = row[width - 1] / row[enter];
                if ratio < best - PIVOT_EPS
                    || (ratio < best + PIVOT_EPS
                        && leave.is_some_and(|l: usize| basis[i] < basis[l]))
                {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let leave = leave?; // None: unbounded
        pivot_with_obj(t, basis, obj, leave, enter);
    }
    None
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let piv = t[row][col];
    for v in t[row].iter_mut() {
        *v /= piv;
    }
    for i in 0..t.len() {
        if i != row && t[i][col].abs() > 0.0 {
            let factor = t[i][col];
            for j in 0..t[i].len() {
                t[i][j] -= factor * t[row][j];
            }
        }
    }
    basis[row] = col;
}

fn pivot_with_obj(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    obj: &mut [f64],
    row: usize,
    col: usize,
) {
    pivot(t, basis, row, col);
    let factor = obj[col];
    if factor != 0.0 {
        for j in 0..obj.len() {
            obj[j] -= factor * t[row][j];
        }
    }
}

/// Largest epsilon such that `target` is a convex combination of `points`
/// with every weight >= epsilon. Positive iff the target lies in the
/// relative interior of the convex hull; None when outside the hull.
///
/// Variables are w_i = eps + z_i with z >= 0 and eps = ep - em.
pub fn hull_interior_margin(points: &[Vec<f64>], target: &[f64]) -> Option<f64> {
    let k = points.len();
    let d = target.len();
    let n = k + 2; // z_1..z_k, ep, em
    let mut a = vec![vec![0.0; n]; d + 1];
    let mut b = vec![0.0; d + 1];
    for j in 0..d {
        let sum_x: f64 = points.iter().map(|p| p[j]).sum();
        for (i, p) in points.iter().enumerate() {
            a[j][i] = p[j];
        }
        a[j][k] = sum_x;
        a[j][k + 1] = -sum_x;
        b[j] = target[j];
    }
    for i in 0..k {
        a[d][i] = 1.0;
    }
    a[d][k] = k as f64;
    a[d][k + 1] = -(k as f64);
    b[d] = 1.0;
    let mut c = vec![0.0; n];
    c[k] = 1.0;
    c[k + 1] = -1.0;
    solve_lp_max(&a, &b, &c)
}
