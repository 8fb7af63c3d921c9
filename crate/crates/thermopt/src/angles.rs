//! The invariant manifold M = {H = H1, G = H2}: discriminant geometry,
//! connected components, angle variables by quadrature and the closed-form
//! linear solution of the flow.

use serde::{Deserialize, Serialize};

use crate::control::{reduced_hamiltonian, ControlBudget, PhasePoint};
use crate::dynamics::integral_g;
use crate::error::{Error, Result};
use crate::gas::GasSpec;
use crate::numeric::quad::{adaptive_gk, composite_gl7};

/// Integral levels (H1 of the Hamiltonian, H2 of G = q1 lambda2).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantLevels {
    pub h1: f64,
    pub h2: f64,
}

impl InvariantLevels {
    pub fn new(h1: f64, h2: f64) -> Result<Self> {
        if !(h1 >= 0.0) {
            return Err(Error::Validation(format!(
                "H1 is a level of a square root and must be nonnegative, got {h1}"
            )));
        }
        Ok(InvariantLevels { h1, h2 })
    }
}

/// Sign of the lambda1 branch on M, also the orientation of the angle
/// quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

/// Open q1-interval with D > 0 inside and a branch choice: one chart of
/// the two-sheet projection of a connected component.
#[derive(Debug, Clone, Copy)]
pub struct ComponentChart {
    /// Open interval (lo, hi); `hi` may be infinite.
    pub q1_interval: (f64, f64),
    pub branch_sign: Branch,
}

/// Discriminant D(q1) = 2 R delta n (4 H1^2 q1^4 - delta R n^2 (R - H2 q1)^2),
/// evaluated through the factored inner polynomial.
pub fn discriminant_d(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    q1: f64,
) -> f64 {
    let (n, r, d) = (spec.n, spec.r, budget.delta);
    let u = levels.h1 * q1 * q1;
    let w = r - levels.h2 * q1;
    2.0 * r * d * n * (4.0 * u * u - d * r * n * n * w * w)
}

/// Magnitude scale of D at q1, for residual checks.
fn discriminant_scale(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    q1: f64,
) -> f64 {
    let (n, r, d) = (spec.n, spec.r, budget.delta);
    let u = levels.h1 * q1 * q1;
    let w = r.abs() + (levels.h2 * q1).abs();
    2.0 * r * d * n * (4.0 * u * u + d * r * n * n * w * w)
}

/// All real roots of D, ascending, deduplicated at relative 1e-12. The
/// quartic factors as a difference of squares into two quadratics
///   P1 = 2 H1 q^2 + sqrt(dR) n (H2 q - R),
///   P2 = 2 H1 q^2 - sqrt(dR) n (H2 q - R).
fn real_roots(spec: &GasSpec, budget: &ControlBudget, levels: &InvariantLevels) -> Vec<f64> {
    let (n, r, d) = (spec.n, spec.r, budget.delta);
    let c = (d * r).sqrt() * n;
    let mut roots = Vec::new();
    if levels.h1 == 0.0 {
        // D = -2Rdn (dR n^2) (R - H2 q)^2: a double root where the square
        // vanishes
        if levels.h2 != 0.0 {
            roots.push(r / levels.h2);
        }
        return roots;
    }
    // quadratic a q^2 + b q + c0, solved in the cancellation-safe form
    let mut push_quadratic = |a: f64, b: f64, c0: f64| {
        let disc = b * b - 4.0 * a * c0;
        if disc < 0.0 {
            return;
        }
        let sq = disc.sqrt();
        if b == 0.0 && sq == 0.0 {
            roots.push(0.0);
            return;
        }
        let qq = -0.5 * (b + b.signum() * sq);
        if qq != 0.0 {
            roots.push(qq / a);
            roots.push(c0 / qq);
        } else {
            roots.push(0.0);
            roots.push(-b / a);
        }
    };
    push_quadratic(2.0 * levels.h1, c * levels.h2, -c * r); // P1
    push_quadratic(2.0 * levels.h1, -c * levels.h2, c * r); // P2
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300));
    roots
}

/// Positive roots of D(q1) = 0, ascending, with a residual verification
/// against the unfactored polynomial.
pub fn singular_set(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
) -> Result<Vec<f64>> {
    let roots: Vec<f64> = real_roots(spec, budget, levels)
        .into_iter()
        .filter(|&x| x > 0.0)
        .collect();
    for &root in &roots {
        let resid = discriminant_d(spec, budget, levels, root).abs();
        let scale = discriminant_scale(spec, budget, levels, root);
        if resid > 1e-9 * scale {
            return Err(Error::InternalInconsistency(format!(
                "closed-form root {root} leaves residual {resid} (scale {scale})"
            )));
        }
    }
    Ok(roots)
}

/// Number of maximal D > 0 intervals over the real line minus the origin.
/// Since D(0) < 0 no interval straddles zero, and each interval carries
/// one connected component of M (the two lambda-sheets glue along the
/// interval's finite endpoints).
fn count_positive_intervals(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
) -> usize {
    let roots = real_roots(spec, budget, levels);
    let mut probes = Vec::new();
    if roots.is_empty() {
        probes.push(0.5);
    } else {
        let lo = roots[0];
        let hi = roots[roots.len() - 1];
        probes.push(lo - 1.0 - lo.abs());
        for w in roots.windows(2) {
            probes.push(0.5 * (w[0] + w[1]));
        }
        probes.push(hi + 1.0 + hi.abs());
    }
    probes
        .into_iter()
        .filter(|&x| discriminant_d(spec, budget, levels, x) > 0.0)
        .count()
}

/// Connected components of M: 3 when H2^4 delta n^2 - 64 R H1^2 >= 0,
/// otherwise 2 (the sign test of the level geometry), cross-checked
/// against direct root-interval counting away from the degenerate set.
pub fn component_count(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
) -> Result<u8> {
    if levels.h1 == 0.0 && levels.h2 == 0.0 {
        return Err(Error::Validation(
            "component count requires (H1, H2) != (0, 0)".into(),
        ));
    }
    let lhs = levels.h2.powi(4) * budget.delta * spec.n * spec.n;
    let rhs = 64.0 * spec.r * levels.h1 * levels.h1;
    let formula = if lhs - rhs >= 0.0 { 3u8 } else { 2u8 };
    // Degenerate margins (double roots) and the H1 = 0 ray cannot be
    // verified by interval counting; the formula value stands alone there.
    let degenerate = levels.h1 == 0.0 || (lhs - rhs).abs() <= 1e-9 * lhs.max(rhs);
    if !degenerate {
        let counted = count_positive_intervals(spec, budget, levels);
        if counted != formula as usize {
            return Err(Error::InternalInconsistency(format!(
                "component formula gives {formula} but D has {counted} positive intervals \
                 at (H1, H2) = ({}, {})",
                levels.h1, levels.h2
            )));
        }
    }
    Ok(formula)
}

/// Costates on M over the point (q1, q2):
/// lambda2 = H2/q1, lambda1 = (-2 H2 R delta n q2 +- sqrt(D)) / (2 R n delta q1^2).
pub fn lambda_on_m(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    q1: f64,
    q2: f64,
    branch: Branch,
) -> Result<(f64, f64)> {
    if !(q1 > 0.0) {
        return Err(Error::Domain("lambda_on_m requires q1 > 0".into()));
    }
    let d = discriminant_d(spec, budget, levels, q1);
    if d < -1e-12 {
        return Err(Error::OffManifold(format!(
            "D(q1 = {q1}) = {d} < 0: the point projects off the invariant manifold"
        )));
    }
    let s = spec.r * budget.delta * spec.n;
    let l2 = levels.h2 / q1;
    let l1 = (-2.0 * levels.h2 * s * q2 + branch.sign() * d.max(0.0).sqrt()) / (2.0 * s * q1 * q1);
    Ok((l1, l2))
}

/// Separation below which two roots are treated as a tangency.
fn root_separation_floor(roots: &[f64]) -> f64 {
    1e-8 * roots.iter().fold(1.0f64, |m, r| m.max(r.abs()))
}

/// The maximal D > 0 intervals on the positive q1 axis. Every finite
/// endpoint is a root of D.
pub fn positive_charts(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
) -> Result<Vec<(f64, f64)>> {
    let roots = singular_set(spec, budget, levels)?;
    if let Some(w) = roots
        .windows(2)
        .find(|w| w[1] - w[0] <= root_separation_floor(&roots))
    {
        return Err(Error::DegenerateLevels(format!(
            "roots {} and {} coincide to within the tangency floor",
            w[0], w[1]
        )));
    }
    let mut charts = Vec::new();
    let mut edges = vec![0.0];
    edges.extend_from_slice(&roots);
    edges.push(f64::INFINITY);
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let probe = if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            lo + 1.0 + lo.abs()
        };
        if discriminant_d(spec, budget, levels, probe) > 0.0 {
            charts.push((lo, hi));
        }
    }
    Ok(charts)
}

/// Both branch charts over every maximal D > 0 interval on the positive
/// axis: the full atlas of the (q1, q2)-projection sheets.
pub fn component_charts(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
) -> Result<Vec<ComponentChart>> {
    let mut charts = Vec::new();
    for interval in positive_charts(spec, budget, levels)? {
        for branch in [Branch::Plus, Branch::Minus] {
            charts.push(ComponentChart {
                q1_interval: interval,
                branch_sign: branch,
            });
        }
    }
    Ok(charts)
}

/// The chart interval containing q1 (D(q1) > 0, or q1 at a chart edge).
pub fn chart_interval_containing(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    q1: f64,
) -> Result<(f64, f64)> {
    for (lo, hi) in positive_charts(spec, budget, levels)? {
        if q1 >= lo && q1 <= hi {
            return Ok((lo, hi));
        }
    }
    Err(Error::ChartViolation(format!(
        "q1 = {q1} lies in no D > 0 interval of the given levels"
    )))
}

/// Canonical reference point of a chart: the midpoint for bounded
/// intervals, lo + max(1, lo) for unbounded ones. Angles are defined up
/// to additive constants; this makes reported values reproducible.
pub fn default_q1_ref(chart: (f64, f64)) -> f64 {
    if chart.1.is_finite() {
        0.5 * (chart.0 + chart.1)
    } else {
        chart.0 + chart.0.max(1.0)
    }
}

/// How the chart quadratures are carried out.
#[derive(Debug, Clone, Copy)]
pub enum QuadMode {
    /// Globally adaptive Gauss-Kronrod to an absolute tolerance.
    Adaptive(f64),
    /// Fixed composite Gauss-Legendre panels. The node layout depends
    /// smoothly on the endpoints, so downstream finite differencing of
    /// the integral stays clean.
    FixedPanels(usize),
}

fn integrate_piece(f: &dyn Fn(f64) -> f64, a: f64, b: f64, mode: QuadMode) -> Result<f64> {
    match mode {
        QuadMode::Adaptive(tol) => Ok(adaptive_gk(&f, a, b, tol)?.0),
        QuadMode::FixedPanels(panels) => Ok(composite_gl7(&f, a, b, panels)),
    }
}

/// Integral of f(s)/sqrt(D(s)) over [x0, x1] inside a chart, with the
/// substitution u = sqrt(s - root) (resp. sqrt(root - s)) absorbing the
/// inverse-square-root behaviour at finite chart edges.
pub(crate) fn chart_integral(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    chart: (f64, f64),
    x0: f64,
    x1: f64,
    f: &dyn Fn(f64) -> f64,
    mode: QuadMode,
) -> Result<f64> {
    if x0 == x1 {
        return Ok(0.0);
    }
    let (lo, hi) = chart;
    let (a, b, orientation) = if x0 < x1 {
        (x0, x1, 1.0)
    } else {
        (x1, x0, -1.0)
    };
    let eps = 1e-12 * (1.0 + a.abs().max(b.abs()));
    if a < lo - eps || b > hi + eps {
        return Err(Error::ChartViolation(format!(
            "integration range [{a}, {b}] leaves the chart interval ({lo}, {hi})"
        )));
    }
    let a = a.max(lo);
    let b = if hi.is_finite() { b.min(hi) } else { b };
    let sqrt_d = |s: f64| discriminant_d(spec, budget, levels, s).max(0.0).sqrt();
    let m = if hi.is_finite() {
        0.5 * (a + b)
    } else {
        b.min(a.max(lo + 1.0 + lo.abs()))
    };

    // left piece [a, m]: s = lo + u^2 removes the 1/sqrt(D) edge at lo
    let left = {
        let g = |u: f64| {
            let s = lo + u * u;
            let d = sqrt_d(s);
            if d == 0.0 {
                0.0
            } else {
                2.0 * u * f(s) / d
            }
        };
        integrate_piece(&g, (a - lo).max(0.0).sqrt(), (m - lo).max(0.0).sqrt(), mode)?
    };
    // right piece [m, b]
    let right = if hi.is_finite() {
        let g = |u: f64| {
            let s = hi - u * u;
            let d = sqrt_d(s);
            if d == 0.0 {
                0.0
            } else {
                2.0 * u * f(s) / d
            }
        };
        integrate_piece(&g, (hi - b).max(0.0).sqrt(), (hi - m).max(0.0).sqrt(), mode)?
    } else {
        let g = |s: f64| {
            let d = sqrt_d(s);
            if d == 0.0 {
                0.0
            } else {
                f(s) / d
            }
        };
        integrate_piece(&g, m, b, mode)?
    };
    Ok(orientation * (left + right))
}

/// Angle quadrature error target.
const OMEGA_TOL: f64 = 1e-10;

/// Omega1 = branch * integral of 4 H1 s^2 / sqrt(D) ds from q1_ref to q1.
pub fn omega1(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    q1_ref: f64,
    q1: f64,
    branch: Branch,
) -> Result<f64> {
    let chart = chart_interval_containing(spec, budget, levels, 0.5 * (q1_ref + q1))?;
    let h1 = levels.h1;
    let f = move |s: f64| 4.0 * h1 * s * s;
    let val = chart_integral(
        spec,
        budget,
        levels,
        chart,
        q1_ref,
        q1,
        &f,
        QuadMode::Adaptive(OMEGA_TOL),
    )?;
    Ok(branch.sign() * val)
}

/// Omega2 = q2/q1 + branch * integral of n^2 R delta (R - H2 s)/(s sqrt(D)) ds.
pub fn omega2(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    q1_ref: f64,
    q1: f64,
    q2: f64,
    branch: Branch,
) -> Result<f64> {
    let chart = chart_interval_containing(spec, budget, levels, 0.5 * (q1_ref + q1))?;
    let (n, r, d, h2) = (spec.n, spec.r, budget.delta, levels.h2);
    let f = move |s: f64| n * n * r * d * (r - h2 * s) / s;
    let val = chart_integral(
        spec,
        budget,
        levels,
        chart,
        q1_ref,
        q1,
        &f,
        QuadMode::Adaptive(OMEGA_TOL),
    )?;
    Ok(q2 / q1 + branch.sign() * val)
}

/// Monotone inversion of the unsigned primitive: find x in [xlo, xhi]
/// with Int_{ref}^{x} g = target, where g = 4 H1 s^2 / sqrt(D) > 0.
/// Newton steps on the analytic derivative with bisection safeguarding.
fn invert_omega_bar(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    chart: (f64, f64),
    q1_ref: f64,
    target: f64,
    mut xlo: f64,
    mut xhi: f64,
) -> Result<f64> {
    let h1 = levels.h1;
    let f = move |s: f64| 4.0 * h1 * s * s;
    let omega_bar = |x: f64| -> Result<f64> {
        chart_integral(
            spec,
            budget,
            levels,
            chart,
            q1_ref,
            x,
            &f,
            QuadMode::Adaptive(OMEGA_TOL),
        )
    };
    let slope = |x: f64| {
        let d = discriminant_d(spec, budget, levels, x);
        if d <= 0.0 {
            f64::INFINITY
        } else {
            4.0 * h1 * x * x / d.sqrt()
        }
    };
    let flo = omega_bar(xlo)? - target;
    let fhi = omega_bar(xhi)? - target;
    if flo > 1e-9 || fhi < -1e-9 {
        return Err(Error::ChartViolation(format!(
            "target angle {target} outside the chart's range [{}, {}]",
            flo + target,
            fhi + target
        )));
    }
    let mut x = 0.5 * (xlo + xhi);
    for _ in 0..200 {
        let fx = omega_bar(x)? - target;
        if fx.abs() <= 1e-10 * (1.0 + target.abs()) {
            return Ok(x);
        }
        if fx > 0.0 {
            xhi = x;
        } else {
            xlo = x;
        }
        if xhi - xlo <= 1e-14 * (1.0 + x.abs()) {
            return Ok(x);
        }
        let g = slope(x);
        let newton = x - fx / g;
        x = if newton.is_finite() && newton > xlo && newton < xhi {
            newton
        } else {
            0.5 * (xlo + xhi)
        };
    }
    Ok(x)
}

/// Flow solution through angle variables: Omega1 = t + alpha1, Omega2 =
/// alpha2, with automatic branch continuation at turning points (D = 0).
pub fn solve_by_angles(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    start: &PhasePoint,
    t: f64,
) -> Result<PhasePoint> {
    if !(t >= 0.0) {
        return Err(Error::Domain(
            "solve_by_angles advances forward in time (t >= 0)".into(),
        ));
    }
    if levels.h1 <= 0.0 {
        return Err(Error::DegenerateLevels("angle flow requires H1 > 0".into()));
    }
    // the start must sit on M at the given levels
    let h_here = reduced_hamiltonian(spec, budget, start)?;
    let g_here = integral_g(start);
    if (h_here - levels.h1).abs() > 1e-8 * levels.h1.abs().max(1.0)
        || (g_here - levels.h2).abs() > 1e-8 * levels.h2.abs().max(1.0)
    {
        return Err(Error::OffManifold(format!(
            "start has (H, G) = ({h_here}, {g_here}), levels are ({}, {})",
            levels.h1, levels.h2
        )));
    }
    let chart = chart_interval_containing(spec, budget, levels, start.q1)?;
    let q1_ref = default_q1_ref(chart);

    let h1 = levels.h1;
    let f_bar = move |s: f64| 4.0 * h1 * s * s;
    let (n, r, d, h2) = (spec.n, spec.r, budget.delta, levels.h2);
    let f_hat = move |s: f64| n * n * r * d * (r - h2 * s) / s;
    let omega_bar = |x: f64| -> Result<f64> {
        chart_integral(
            spec,
            budget,
            levels,
            chart,
            q1_ref,
            x,
            &f_bar,
            QuadMode::Adaptive(OMEGA_TOL),
        )
    };
    let omega_hat = |x: f64| -> Result<f64> {
        chart_integral(
            spec,
            budget,
            levels,
            chart,
            q1_ref,
            x,
            &f_hat,
            QuadMode::Adaptive(OMEGA_TOL),
        )
    };

    // branch from the sign of sigma sqrt(D) = 2 R delta n (q1^2 l1 + H2 q2)
    let s_const = spec.r * budget.delta * spec.n;
    let w = 2.0 * s_const * (start.q1 * start.q1 * start.l1 + levels.h2 * start.q2);
    let mut branch = if w >= 0.0 {
        Branch::Plus
    } else {
        Branch::Minus
    };

    let mut x = start.q1;
    let mut remaining = t;
    let mut bar_x = omega_bar(x)?;
    let mut phase = 0.0; // accumulated Omega-hat path integral
    let ratio0 = start.q2 / start.q1;

    let bar_lo = omega_bar(chart.0)?;
    let bar_hi = if chart.1.is_finite() {
        Some(omega_bar(chart.1)?)
    } else {
        None
    };
    let hat_lo = omega_hat(chart.0)?;
    let hat_hi = if chart.1.is_finite() {
        Some(omega_hat(chart.1)?)
    } else {
        None
    };

    for _ in 0..10_000 {
        if remaining <= 0.0 {
            break;
        }
        match branch {
            Branch::Plus => {
                let cap = match bar_hi {
                    Some(bh) => bh - bar_x,
                    None => f64::INFINITY,
                };
                if remaining <= cap {
                    let upper = if chart.1.is_finite() {
                        chart.1
                    } else {
                        // Omega-bar grows with asymptotic slope
                        // 2/sqrt(2 R delta n) on unbounded charts; walk out
                        // until the target is bracketed
                        let slope = 2.0 / (2.0 * spec.r * budget.delta * spec.n).sqrt();
                        let mut hi_guess = x + remaining / slope + 1.0;
                        while omega_bar(hi_guess)? < bar_x + remaining {
                            hi_guess = x + 2.0 * (hi_guess - x);
                        }
                        hi_guess
                    };
                    let x_new = invert_omega_bar(
                        spec,
                        budget,
                        levels,
                        chart,
                        q1_ref,
                        bar_x + remaining,
                        x,
                        upper,
                    )?;
                    phase += omega_hat(x_new)? - omega_hat(x)?;
                    x = x_new;
                    remaining = 0.0;
                } else {
                    // turning point at the right edge: flip the branch
                    phase += hat_hi.expect("bounded cap implies finite edge") - omega_hat(x)?;
                    remaining -= cap;
                    x = chart.1;
                    bar_x = bar_hi.unwrap();
                    branch = Branch::Minus;
                }
            }
            Branch::Minus => {
                let cap = bar_x - bar_lo;
                if remaining <= cap {
                    let x_new = invert_omega_bar(
                        spec,
                        budget,
                        levels,
                        chart,
                        q1_ref,
                        bar_x - remaining,
                        chart.0,
                        x,
                    )?;
                    phase += omega_hat(x)? - omega_hat(x_new)?;
                    x = x_new;
                    remaining = 0.0;
                } else {
                    phase += omega_hat(x)? - hat_lo;
                    remaining -= cap;
                    x = chart.0;
                    bar_x = bar_lo;
                    branch = Branch::Plus;
                }
            }
        }
    }
    if remaining > 0.0 {
        return Err(Error::NoConvergence {
            iterations: 10_000,
            residual: remaining,
        });
    }

    let q1 = x;
    let q2 = q1 * (ratio0 - phase);
    let (l1, l2) = lambda_on_m(spec, budget, levels, q1, q2, branch)?;
    Ok(PhasePoint { q1, q2, l1, l2 })
}

/// JSON report of a component analysis.
#[derive(Debug, Serialize, Deserialize)]
pub struct ComponentReport {
    pub levels: InvariantLevels,
    pub roots: Vec<f64>,
    pub components: u8,
}

/// Assembles the per-level report (roots of D on the positive axis plus
/// the component count).
pub fn component_report(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
) -> Result<ComponentReport> {
    Ok(ComponentReport {
        levels: *levels,
        roots: singular_set(spec, budget, levels)?,
        components: component_count(spec, budget, levels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{flow, ReducedHamiltonian};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (GasSpec, ControlBudget) {
        (
            GasSpec::ideal(3.0, 1.0).unwrap(),
            ControlBudget::new(1.0).unwrap(),
        )
    }

    #[test]
    fn discriminant_reference_value() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.0).unwrap();
        // 2 R d n (4 H1^2 - d R n^2 (R)^2) = 6 (4 - 9) = -30
        assert_relative_eq!(
            discriminant_d(&spec, &budget, &levels, 1.0),
            -30.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn discriminant_nonpositive_at_zero_h1() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(0.0, 0.5).unwrap();
        for q in [0.1, 0.5, 1.0, 2.0, 5.0] {
            assert!(discriminant_d(&spec, &budget, &levels, q) <= 0.0);
        }
        // zero exactly at q1 = R/H2
        assert_relative_eq!(
            discriminant_d(&spec, &budget, &levels, 2.0),
            0.0,
            epsilon = 1e-12
        );
        let roots = singular_set(&spec, &budget, &levels).unwrap();
        assert_eq!(roots.len(), 1);
        assert_relative_eq!(roots[0], 2.0, epsilon = 1e-12);
    }

    /// Bisection on D restricted to a bracket, the independent root oracle.
    fn bisect_root(
        spec: &GasSpec,
        budget: &ControlBudget,
        levels: &InvariantLevels,
        mut lo: f64,
        mut hi: f64,
    ) -> f64 {
        let f = |x: f64| discriminant_d(spec, budget, levels, x);
        assert!(f(lo) * f(hi) < 0.0, "bracket does not straddle a root");
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(lo) * f(m) <= 0.0 {
                hi = m;
            } else {
                lo = m;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn closed_form_roots_match_bisection() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.0).unwrap();
        let roots = singular_set(&spec, &budget, &levels).unwrap();
        assert_eq!(roots.len(), 1, "H2 = 0 has exactly one positive root");
        let oracle = bisect_root(&spec, &budget, &levels, 0.1, 10.0);
        assert!((roots[0] - oracle).abs() <= 1e-10 * oracle);

        let levels = InvariantLevels::new(0.01, 1.0).unwrap();
        let roots = singular_set(&spec, &budget, &levels).unwrap();
        assert_eq!(
            roots.len(),
            3,
            "three-component case has three positive roots"
        );
        let r0 = bisect_root(&spec, &budget, &levels, 0.5, 1.0);
        let r1 = bisect_root(&spec, &budget, &levels, 1.0, 2.0);
        let r2 = bisect_root(&spec, &budget, &levels, 100.0, 200.0);
        for (got, oracle) in roots.iter().zip([r0, r1, r2]) {
            assert!(
                (got - oracle).abs() <= 1e-9 * oracle.max(1.0),
                "{got} vs {oracle}"
            );
        }
    }

    #[test]
    fn smallest_root_shrinks_with_growing_h1() {
        let (spec, budget) = setup();
        let small =
            singular_set(&spec, &budget, &InvariantLevels::new(1.0, 0.0).unwrap()).unwrap()[0];
        let big =
            singular_set(&spec, &budget, &InvariantLevels::new(100.0, 0.0).unwrap()).unwrap()[0];
        assert!(big < small);
    }

    #[test]
    fn component_count_reference_cases() {
        let (spec, budget) = setup();
        assert_eq!(
            component_count(&spec, &budget, &InvariantLevels::new(0.01, 1.0).unwrap()).unwrap(),
            3
        );
        assert_eq!(
            component_count(&spec, &budget, &InvariantLevels::new(1.0, 0.0).unwrap()).unwrap(),
            2
        );
        // equality case uses the >= convention
        let h2: f64 = 1.3;
        let h1 = (h2.powi(4) * budget.delta * spec.n * spec.n / (64.0 * spec.r)).sqrt();
        assert_eq!(
            component_count(&spec, &budget, &InvariantLevels::new(h1, h2).unwrap()).unwrap(),
            3
        );
        assert!(component_count(&spec, &budget, &InvariantLevels::new(0.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn component_formula_agrees_with_interval_counting_on_grid() {
        let (spec, budget) = setup();
        for i in 0..50 {
            for j in 0..50 {
                let h1 = 0.02 + 1.98 * i as f64 / 49.0;
                let h2 = -2.0 + 4.0 * j as f64 / 49.0;
                let levels = InvariantLevels::new(h1, h2).unwrap();
                // any InternalInconsistency would surface as Err here
                component_count(&spec, &budget, &levels).unwrap();
            }
        }
    }

    #[test]
    fn lambda_reconstruction_round_trip() {
        let (spec, budget) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let p = PhasePoint {
                q1: rng.random_range(0.4..2.5),
                q2: rng.random_range(-1.5..1.5),
                l1: rng.random_range(-1.5..1.5),
                l2: rng.random_range(-1.5..1.5),
            };
            let h1 = reduced_hamiltonian(&spec, &budget, &p).unwrap();
            let levels = InvariantLevels::new(h1, integral_g(&p)).unwrap();
            let s = spec.r * budget.delta * spec.n;
            let w = 2.0 * s * (p.q1 * p.q1 * p.l1 + levels.h2 * p.q2);
            let branch = if w >= 0.0 {
                Branch::Plus
            } else {
                Branch::Minus
            };
            let (l1, l2) = lambda_on_m(&spec, &budget, &levels, p.q1, p.q2, branch).unwrap();
            assert!(
                (l1 - p.l1).abs() <= 1e-9 * (1.0 + p.l1.abs()),
                "{l1} vs {}",
                p.l1
            );
            assert!((l2 - p.l2).abs() <= 1e-12 * (1.0 + p.l2.abs()));
            // and the reconstructed point reproduces the levels
            let back = PhasePoint {
                q1: p.q1,
                q2: p.q2,
                l1,
                l2,
            };
            let h_back = reduced_hamiltonian(&spec, &budget, &back).unwrap();
            assert!((h_back - h1).abs() <= 1e-9 * h1.max(1.0));
            assert!((integral_g(&back) - levels.h2).abs() <= 1e-9 * levels.h2.abs().max(1.0));
        }
    }

    #[test]
    fn lambda_branches_meet_at_turning_points() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.3).unwrap();
        let roots = singular_set(&spec, &budget, &levels).unwrap();
        let r0 = roots[0];
        let plus = lambda_on_m(&spec, &budget, &levels, r0, 0.4, Branch::Plus).unwrap();
        let minus = lambda_on_m(&spec, &budget, &levels, r0, 0.4, Branch::Minus).unwrap();
        assert!((plus.0 - minus.0).abs() <= 1e-7 * (1.0 + plus.0.abs()));
        assert_eq!(plus.1, minus.1);
        // H2 = 0, q2 = 0 reduces lambda1 to +-sqrt(D)/(2 R n d q1^2)
        let lv = InvariantLevels::new(1.0, 0.0).unwrap();
        let q1 = 2.0;
        let d = discriminant_d(&spec, &budget, &lv, q1);
        assert!(d > 0.0);
        let (l1p, l2p) = lambda_on_m(&spec, &budget, &lv, q1, 0.0, Branch::Plus).unwrap();
        assert_relative_eq!(l2p, 0.0, epsilon = 1e-15);
        assert_relative_eq!(
            l1p,
            d.sqrt() / (2.0 * spec.r * spec.n * budget.delta * q1 * q1),
            epsilon = 1e-12
        );
        assert!(lambda_on_m(&spec, &budget, &lv, 0.5, 0.0, Branch::Plus).is_err());
    }

    #[test]
    fn omega1_basic_properties() {
        let (spec, budget) = setup();
        // levels with a bounded chart: H2^4 d n^2 >= 64 R H1^2
        let levels = InvariantLevels::new(1.0, 2.0).unwrap();
        let charts = positive_charts(&spec, &budget, &levels).unwrap();
        let chart = charts[0];
        assert!(chart.1.is_finite());
        let q1_ref = default_q1_ref(chart);
        assert_eq!(
            omega1(&spec, &budget, &levels, q1_ref, q1_ref, Branch::Plus).unwrap(),
            0.0
        );
        // additivity over subintervals
        let (lo, hi) = chart;
        let a = lo + 0.2 * (hi - lo);
        let b = lo + 0.5 * (hi - lo);
        let c = lo + 0.9 * (hi - lo);
        let ab = omega1(&spec, &budget, &levels, a, b, Branch::Plus).unwrap();
        let bc = omega1(&spec, &budget, &levels, b, c, Branch::Plus).unwrap();
        let ac = omega1(&spec, &budget, &levels, a, c, Branch::Plus).unwrap();
        assert!(
            (ab + bc - ac).abs() <= 2e-9,
            "additivity violated: {}",
            ab + bc - ac
        );
        // branch flip negates
        let ac_minus = omega1(&spec, &budget, &levels, a, c, Branch::Minus).unwrap();
        assert_relative_eq!(ac_minus, -ac, epsilon = 1e-12);
    }

    #[test]
    fn omega2_structure() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 2.0).unwrap();
        let chart = positive_charts(&spec, &budget, &levels).unwrap()[0];
        let (lo, hi) = chart;
        let q1_ref = default_q1_ref(chart);
        let x = lo + 0.7 * (hi - lo);
        // q2-linearity: only the q2/q1 term moves
        let w0 = omega2(&spec, &budget, &levels, q1_ref, x, 0.3, Branch::Plus).unwrap();
        let w1 = omega2(&spec, &budget, &levels, q1_ref, x, 0.3 + 0.5, Branch::Plus).unwrap();
        assert_relative_eq!(w1 - w0, 0.5 / x, epsilon = 1e-12);
        // branch flip negates the integral term only
        let p = omega2(&spec, &budget, &levels, q1_ref, x, 0.3, Branch::Plus).unwrap();
        let m = omega2(&spec, &budget, &levels, q1_ref, x, 0.3, Branch::Minus).unwrap();
        let integral_term = 0.5 * (p - m);
        assert_relative_eq!(0.5 * (p + m), 0.3 / x, epsilon = 1e-10);
        assert!(integral_term.abs() > 0.0);
    }

    #[test]
    fn quadrature_tolerance_is_respected() {
        // halving the tolerance moves omega values by less than the bound
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 2.0).unwrap();
        let chart = positive_charts(&spec, &budget, &levels).unwrap()[0];
        let (lo, hi) = chart;
        let h1 = levels.h1;
        let f = move |s: f64| 4.0 * h1 * s * s;
        let coarse = chart_integral(
            &spec,
            &budget,
            &levels,
            chart,
            lo,
            hi,
            &f,
            QuadMode::Adaptive(1e-9),
        )
        .unwrap();
        let fine = chart_integral(
            &spec,
            &budget,
            &levels,
            chart,
            lo,
            hi,
            &f,
            QuadMode::Adaptive(5e-10),
        )
        .unwrap();
        assert!((coarse - fine).abs() <= 1e-9, "{coarse} vs {fine}");
    }

    fn on_manifold_start(
        spec: &GasSpec,
        budget: &ControlBudget,
        levels: &InvariantLevels,
        q1: f64,
        q2: f64,
        branch: Branch,
    ) -> PhasePoint {
        let (l1, l2) = lambda_on_m(spec, budget, levels, q1, q2, branch).unwrap();
        PhasePoint { q1, q2, l1, l2 }
    }

    #[test]
    fn angles_are_linear_along_the_flow() {
        let (spec, budget) = setup();
        let h = ReducedHamiltonian { spec, budget };
        // unbounded chart: the plus branch runs right forever, no folds
        let levels = InvariantLevels::new(1.0, 0.3).unwrap();
        let chart = positive_charts(&spec, &budget, &levels).unwrap()[0];
        assert!(!chart.1.is_finite());
        let q1_ref = default_q1_ref(chart);
        let lo = chart.0;
        let start = on_manifold_start(&spec, &budget, &levels, lo + 0.3, 0.2, Branch::Plus);
        let traj = flow(&h, start, 0.2, 1e-11).unwrap();
        let om1_0 = omega1(&spec, &budget, &levels, q1_ref, start.q1, Branch::Plus).unwrap();
        let om2_0 = omega2(
            &spec,
            &budget,
            &levels,
            q1_ref,
            start.q1,
            start.q2,
            Branch::Plus,
        )
        .unwrap();
        for (idx, (tt, st)) in traj.times.iter().zip(&traj.states).enumerate() {
            if idx % 200 != 0 {
                continue;
            }
            let om1 = omega1(&spec, &budget, &levels, q1_ref, st.q1, Branch::Plus).unwrap();
            let om2 = omega2(&spec, &budget, &levels, q1_ref, st.q1, st.q2, Branch::Plus).unwrap();
            assert!(
                ((om1 - om1_0) - tt).abs() <= 1e-6,
                "Omega1 drift at t = {tt}: {}",
                (om1 - om1_0) - tt
            );
            assert!(
                (om2 - om2_0).abs() <= 1e-6,
                "Omega2 drift at t = {tt}: {}",
                om2 - om2_0
            );
        }
    }

    #[test]
    fn solve_by_angles_matches_ode_before_turning_point() {
        let (spec, budget) = setup();
        let h = ReducedHamiltonian { spec, budget };
        let levels = InvariantLevels::new(1.0, 2.0).unwrap();
        let chart = positive_charts(&spec, &budget, &levels).unwrap()[0];
        let (lo, hi) = chart;
        let start = on_manifold_start(
            &spec,
            &budget,
            &levels,
            lo + 0.35 * (hi - lo),
            0.2,
            Branch::Plus,
        );
        assert_eq!(
            solve_by_angles(&spec, &budget, &levels, &start, 0.0).unwrap(),
            start
        );
        let traj = flow(&h, start, 0.2, 1e-11).unwrap();
        for (idx, (tt, st)) in traj.times.iter().zip(&traj.states).enumerate() {
            if idx % 400 != 0 || idx == 0 {
                continue;
            }
            let got = solve_by_angles(&spec, &budget, &levels, &start, *tt).unwrap();
            for (g, w) in got.coords().iter().zip(st.coords()) {
                assert!((g - w).abs() <= 1e-6, "t = {tt}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn solve_by_angles_continues_across_turning_point() {
        let (spec, budget) = setup();
        let h = ReducedHamiltonian { spec, budget };
        let levels = InvariantLevels::new(1.0, 2.0).unwrap();
        let chart = positive_charts(&spec, &budget, &levels).unwrap()[0];
        let (lo, hi) = chart;
        // start near the right edge moving right: the fold is hit quickly
        let start = on_manifold_start(
            &spec,
            &budget,
            &levels,
            lo + 0.8 * (hi - lo),
            0.1,
            Branch::Plus,
        );
        let t_total = 1.0;
        let traj = flow(&h, start, t_total, 1e-11).unwrap();
        let end = traj.end_state();
        let got = solve_by_angles(&spec, &budget, &levels, &start, t_total).unwrap();
        for (g, w) in got.coords().iter().zip(end.coords()) {
            assert!((g - w).abs() <= 1e-5, "{g} vs {w}");
        }
        // level preservation of the produced point
        let h_got = reduced_hamiltonian(&spec, &budget, &got).unwrap();
        assert!((h_got - levels.h1).abs() <= 1e-8 * levels.h1.max(1.0));
        assert!((integral_g(&got) - levels.h2).abs() <= 1e-8 * levels.h2.abs().max(1.0));
        // make sure a fold was actually crossed: q1 must have turned back
        let max_q1 = traj.states.iter().fold(0.0f64, |m, s| m.max(s.q1));
        assert!(max_q1 > got.q1 + 1e-6 || max_q1 > start.q1 + 1e-6);
    }

    #[test]
    fn solve_by_angles_validates_inputs() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.3).unwrap();
        let off = PhasePoint {
            q1: 0.5,
            q2: 0.0,
            l1: 5.0,
            l2: 5.0,
        };
        assert!(matches!(
            solve_by_angles(&spec, &budget, &levels, &off, 0.1),
            Err(Error::OffManifold(_))
        ));
    }

    #[test]
    fn component_charts_enumerate_both_branches() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(0.01, 1.0).unwrap();
        let charts = component_charts(&spec, &budget, &levels).unwrap();
        // two positive D > 0 intervals, two lambda branches each
        assert_eq!(charts.len(), 4);
        assert!(charts.iter().any(|c| c.branch_sign == Branch::Plus));
        assert!(charts.iter().any(|c| c.branch_sign == Branch::Minus));
        for c in &charts {
            let (lo, hi) = c.q1_interval;
            let probe = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                lo + 1.0
            };
            assert!(discriminant_d(&spec, &budget, &levels, probe) > 0.0);
        }
    }

    #[test]
    fn chart_violation_detected() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(0.01, 1.0).unwrap();
        let roots = singular_set(&spec, &budget, &levels).unwrap();
        // integrating across the D < 0 gap between the second and third root
        let inside = 0.5 * (roots[0] + roots[1]);
        let beyond = roots[2] + 1.0;
        assert!(matches!(
            omega1(&spec, &budget, &levels, inside, beyond, Branch::Plus),
            Err(Error::ChartViolation(_))
        ));
    }
}
