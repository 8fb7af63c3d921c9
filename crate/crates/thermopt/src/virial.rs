//! First-order virial perturbation of the ideal-gas integrable structure:
//! corrected Hamiltonian H + a H_a + b H_b, the quadrature-built second
//! integral corrections G_a, G_b in angle variables, and the commutation
//! order verifier.

use serde::Serialize;

use crate::angles::{
    chart_interval_containing, default_q1_ref, discriminant_d, lambda_on_m, Branch,
    InvariantLevels, QuadMode,
};
use crate::control::{
    reduced_hamiltonian, reduced_hamiltonian_gradient, ControlBudget, PhasePoint,
};
use crate::dynamics::{canonical_bracket, integral_g, IntegralG, PhaseFunction};
use crate::error::{Error, Result};
use crate::gas::GasSpec;

/// Floor on the reduced Hamiltonian below which the corrections (which
/// carry H in denominators) are refused.
pub const EPS_H: f64 = 1e-10;

/// First-order correction in the interaction parameter a:
/// H_a = e^{q2/q1} (q1^2 (R d n^3 l2^2 - 8 H^2) - R^2 l2 n^3 d) / (4 q1 n R H).
pub fn correction_ha(spec: &GasSpec, budget: &ControlBudget, p: &PhasePoint) -> Result<f64> {
    let h = reduced_hamiltonian(spec, budget, p)?;
    if h <= EPS_H {
        return Err(Error::NearSingular(format!(
            "H = {h} below the correction floor {EPS_H}"
        )));
    }
    let (n, r, d) = (spec.n, spec.r, budget.delta);
    let n3 = n * n * n;
    let num = p.q1 * p.q1 * (r * d * n3 * p.l2 * p.l2 - 8.0 * h * h) - r * r * p.l2 * n3 * d;
    Ok((p.q2 / p.q1).exp() * num / (4.0 * p.q1 * n * r * h))
}

/// First-order correction in the covolume b:
/// H_b = e^{q2/q1} R d n^2 l2 (R - l2 q1^2) / (4 H q1^2).
pub fn correction_hb(spec: &GasSpec, budget: &ControlBudget, p: &PhasePoint) -> Result<f64> {
    let h = reduced_hamiltonian(spec, budget, p)?;
    if h <= EPS_H {
        return Err(Error::NearSingular(format!(
            "H = {h} below the correction floor {EPS_H}"
        )));
    }
    let (n, r, d) = (spec.n, spec.r, budget.delta);
    let num = r * d * n * n * p.l2 * (r - p.l2 * p.q1 * p.q1);
    Ok((p.q2 / p.q1).exp() * num / (4.0 * h * p.q1 * p.q1))
}

/// The truncated perturbed Hamiltonian H + a H_a + b H_b.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedHamiltonian {
    pub spec: GasSpec,
    pub budget: ControlBudget,
    pub a: f64,
    pub b: f64,
}

/// Five-point central difference gradient with step 1e-4 * max(1, |x_i|);
/// the wide high-order stencil keeps quadrature-backed functions
/// differentiable without amplifying their evaluation noise.
fn gradient5(f: &dyn Fn(&PhasePoint) -> Result<f64>, p: &PhasePoint) -> Result<[f64; 4]> {
    let c = p.coords();
    let mut g = [0.0; 4];
    for (i, gi) in g.iter_mut().enumerate() {
        let h = 1e-4 * c[i].abs().max(1.0);
        let eval = |offset: f64| -> Result<f64> {
            let mut cp = c;
            cp[i] += offset;
            f(&PhasePoint::from_coords(cp))
        };
        *gi = (-eval(2.0 * h)? + 8.0 * eval(h)? - 8.0 * eval(-h)? + eval(-2.0 * h)?) / (12.0 * h);
    }
    Ok(g)
}

impl PhaseFunction for PerturbedHamiltonian {
    fn value(&self, p: &PhasePoint) -> Result<f64> {
        perturbed_hamiltonian(self, p)
    }

    fn gradient(&self, p: &PhasePoint) -> Result<[f64; 4]> {
        let mut g = reduced_hamiltonian_gradient(&self.spec, &self.budget, p)?;
        if self.a != 0.0 || self.b != 0.0 {
            let (a, b) = (self.a, self.b);
            let spec = self.spec;
            let budget = self.budget;
            let corr = move |q: &PhasePoint| -> Result<f64> {
                Ok(a * correction_ha(&spec, &budget, q)? + b * correction_hb(&spec, &budget, q)?)
            };
            let gc = gradient5(&corr, p)?;
            for i in 0..4 {
                g[i] += gc[i];
            }
        }
        Ok(g)
    }
}

/// H_vdW(q, lambda) = H + a H_a + b H_b, truncated at first order exactly.
pub fn perturbed_hamiltonian(ph: &PerturbedHamiltonian, p: &PhasePoint) -> Result<f64> {
    let h = reduced_hamiltonian(&ph.spec, &ph.budget, p)?;
    if ph.a == 0.0 && ph.b == 0.0 {
        return Ok(h);
    }
    Ok(h + ph.a * correction_ha(&ph.spec, &ph.budget, p)?
        + ph.b * correction_hb(&ph.spec, &ph.budget, p)?)
}

/// Which correction family an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionKind {
    A,
    B,
}

/// A fixed-branch angle chart on one D > 0 interval: the realized map
/// between (q1, q2) and (Omega1, Omega2) with monotone inverses.
///
/// Quadratures run on fixed Gauss-Legendre panels so chart values vary
/// smoothly with the levels and admit nested finite differencing.
pub struct AngleChart {
    pub spec: GasSpec,
    pub budget: ControlBudget,
    pub levels: InvariantLevels,
    pub branch: Branch,
    pub interval: (f64, f64),
    pub q1_ref: f64,
    panels: usize,
}

impl AngleChart {
    /// Chart of the D > 0 interval containing `q1_hint`.
    pub fn containing(
        spec: &GasSpec,
        budget: &ControlBudget,
        levels: &InvariantLevels,
        branch: Branch,
        q1_hint: f64,
    ) -> Result<Self> {
        if levels.h1 <= 0.0 {
            return Err(Error::DegenerateLevels(
                "angle chart requires H1 > 0".into(),
            ));
        }
        let interval = chart_interval_containing(spec, budget, levels, q1_hint)?;
        Ok(AngleChart {
            spec: *spec,
            budget: *budget,
            levels: *levels,
            branch,
            interval,
            q1_ref: default_q1_ref(interval),
            panels: 32,
        })
    }

    fn omega_bar(&self, x: f64) -> Result<f64> {
        let h1 = self.levels.h1;
        let f = move |s: f64| 4.0 * h1 * s * s;
        crate::angles::chart_integral(
            &self.spec,
            &self.budget,
            &self.levels,
            self.interval,
            self.q1_ref,
            x,
            &f,
            QuadMode::FixedPanels(self.panels),
        )
    }

    fn omega_hat(&self, x: f64) -> Result<f64> {
        let (n, r, d, h2) = (self.spec.n, self.spec.r, self.budget.delta, self.levels.h2);
        let f = move |s: f64| n * n * r * d * (r - h2 * s) / s;
        crate::angles::chart_integral(
            &self.spec,
            &self.budget,
            &self.levels,
            self.interval,
            self.q1_ref,
            x,
            &f,
            QuadMode::FixedPanels(self.panels),
        )
    }

    /// Omega1 value of the chart's left edge (the integral converges at
    /// the root); the natural constant-fixing point for G_a, G_b.
    pub fn omega1_left_edge(&self) -> Result<f64> {
        Ok(self.branch.sign() * self.omega_bar(self.interval.0)?)
    }

    pub fn q_to_omega(&self, q1: f64, q2: f64) -> Result<(f64, f64)> {
        let om1 = self.branch.sign() * self.omega_bar(q1)?;
        let om2 = q2 / q1 + self.branch.sign() * self.omega_hat(q1)?;
        Ok((om1, om2))
    }

    /// Inverse map: q1 from the monotone Omega1 primitive (bracketed
    /// bisection refined by Newton on the analytic slope), then q2 from
    /// the Omega2 relation.
    pub fn omega_to_q(&self, om1: f64, om2: f64) -> Result<(f64, f64)> {
        let target = self.branch.sign() * om1; // Omega-bar value sought
        let (lo, hi) = self.interval;
        let mut xlo = lo;
        let mut xhi = if hi.is_finite() {
            hi
        } else {
            let mut probe = self.q1_ref + 1.0;
            while self.omega_bar(probe)? < target {
                probe = self.q1_ref + 2.0 * (probe - self.q1_ref);
            }
            probe
        };
        let flo = self.omega_bar(xlo)? - target;
        let fhi = self.omega_bar(xhi)? - target;
        if flo > 1e-9 * (1.0 + target.abs()) || fhi < -1e-9 * (1.0 + target.abs()) {
            return Err(Error::ChartViolation(format!(
                "Omega1 = {om1} is outside this chart's range"
            )));
        }
        let mut x = 0.5 * (xlo + xhi);
        for _ in 0..200 {
            let fx = self.omega_bar(x)? - target;
            if fx.abs() <= 1e-12 * (1.0 + target.abs()) || xhi - xlo <= 1e-15 * (1.0 + x.abs()) {
                break;
            }
            if fx > 0.0 {
                xhi = x;
            } else {
                xlo = x;
            }
            let d = discriminant_d(&self.spec, &self.budget, &self.levels, x);
            let newton = if d > 0.0 {
                x - fx * d.sqrt() / (4.0 * self.levels.h1 * x * x)
            } else {
                f64::NAN
            };
            x = if newton.is_finite() && newton > xlo && newton < xhi {
                newton
            } else {
                0.5 * (xlo + xhi)
            };
        }
        let q1 = x;
        let q2 = q1 * (om2 - self.branch.sign() * self.omega_hat(q1)?);
        Ok((q1, q2))
    }

    /// Full phase point over the chart at angle coordinates (om1, om2).
    pub fn phase_point(&self, om1: f64, om2: f64) -> Result<PhasePoint> {
        let (q1, q2) = self.omega_to_q(om1, om2)?;
        let (l1, l2) = lambda_on_m(&self.spec, &self.budget, &self.levels, q1, q2, self.branch)?;
        Ok(PhasePoint { q1, q2, l1, l2 })
    }

    /// The correction H_a or H_b as a function of angle coordinates.
    pub fn correction_in_angles(&self, which: CorrectionKind, om1: f64, om2: f64) -> Result<f64> {
        let p = self.phase_point(om1, om2)?;
        match which {
            CorrectionKind::A => correction_ha(&self.spec, &self.budget, &p),
            CorrectionKind::B => correction_hb(&self.spec, &self.budget, &p),
        }
    }
}

/// G_a (or G_b) at the right end of `omega1_range`, relative to the
/// range's left endpoint:
/// G_x(Omega1, Omega2) = integral of dH_x/dOmega2 over Omega1.
/// The integrand is a central difference in Omega2 (step 1e-5 * scale)
/// with q recovered through the chart inverse; the outer integral is
/// composite Gauss over n_grid panels.
pub fn correction_g(
    chart: &AngleChart,
    which: CorrectionKind,
    omega1_range: (f64, f64),
    omega2: f64,
    n_grid: usize,
) -> Result<f64> {
    if n_grid < 16 {
        return Err(Error::Validation(format!(
            "n_grid must be at least 16, got {n_grid}"
        )));
    }
    if omega1_range.0 == omega1_range.1 {
        return Ok(0.0);
    }
    let h = 1e-5 * omega2.abs().max(1.0);
    // q1 depends only on Omega1, so both Omega2-shifted evaluations share
    // one chart inversion
    let integrand = |om1: f64| -> Result<f64> {
        let (q1, _) = chart.omega_to_q(om1, omega2)?;
        let hat = chart.omega_hat(q1)?;
        let at = |om2: f64| -> Result<f64> {
            let q2 = q1 * (om2 - chart.branch.sign() * hat);
            let (l1, l2) = lambda_on_m(
                &chart.spec,
                &chart.budget,
                &chart.levels,
                q1,
                q2,
                chart.branch,
            )?;
            let p = PhasePoint { q1, q2, l1, l2 };
            match which {
                CorrectionKind::A => correction_ha(&chart.spec, &chart.budget, &p),
                CorrectionKind::B => correction_hb(&chart.spec, &chart.budget, &p),
            }
        };
        Ok((at(omega2 + h)? - at(omega2 - h)?) / (2.0 * h))
    };
    // composite 7-node Gauss-Legendre over n_grid panels in Omega1
    const GL_X: [f64; 7] = [
        -0.949107912342759,
        -0.741531185599394,
        -0.405845151377397,
        0.0,
        0.405845151377397,
        0.741531185599394,
        0.949107912342759,
    ];
    const GL_W: [f64; 7] = [
        0.129484966168870,
        0.279705391489277,
        0.381830050505119,
        0.417959183673469,
        0.381830050505119,
        0.279705391489277,
        0.129484966168870,
    ];
    let (a, b) = omega1_range;
    let step = (b - a) / n_grid as f64;
    let mut total = 0.0;
    for panel in 0..n_grid {
        let pa = a + panel as f64 * step;
        let c = pa + 0.5 * step;
        let hw = 0.5 * step;
        for (x, w) in GL_X.iter().zip(GL_W) {
            total += w * integrand(c + hw * x)? * hw;
        }
    }
    Ok(total)
}

/// The corrected second integral G + a G_a + b G_b, extended off any fixed
/// level set by rebuilding the chart from each point's own (H, G) levels.
/// With the integration constant fixed at the chart's left edge the
/// extension changes G_a only by per-level constants, which cancel in the
/// brackets that matter.
pub struct PerturbedSecondIntegral {
    pub spec: GasSpec,
    pub budget: ControlBudget,
    pub a: f64,
    pub b: f64,
    pub n_grid: usize,
}

impl PerturbedSecondIntegral {
    fn correction_at(&self, which: CorrectionKind, p: &PhasePoint) -> Result<f64> {
        let h1 = reduced_hamiltonian(&self.spec, &self.budget, p)?;
        let levels = InvariantLevels::new(h1, integral_g(p))?;
        let s = self.spec.r * self.budget.delta * self.spec.n;
        let w = 2.0 * s * (p.q1 * p.q1 * p.l1 + levels.h2 * p.q2);
        let branch = if w >= 0.0 {
            Branch::Plus
        } else {
            Branch::Minus
        };
        let chart = AngleChart::containing(&self.spec, &self.budget, &levels, branch, p.q1)?;
        let (om1, om2) = chart.q_to_omega(p.q1, p.q2)?;
        let left = chart.omega1_left_edge()?;
        correction_g(&chart, which, (left, om1), om2, self.n_grid)
    }
}

impl PhaseFunction for PerturbedSecondIntegral {
    fn value(&self, p: &PhasePoint) -> Result<f64> {
        let mut g = integral_g(p);
        if self.a != 0.0 {
            g += self.a * self.correction_at(CorrectionKind::A, p)?;
        }
        if self.b != 0.0 {
            g += self.b * self.correction_at(CorrectionKind::B, p)?;
        }
        Ok(g)
    }

    fn gradient(&self, p: &PhasePoint) -> Result<[f64; 4]> {
        let mut g = [p.l2, 0.0, 0.0, p.q1];
        if self.a != 0.0 || self.b != 0.0 {
            let corr = |q: &PhasePoint| -> Result<f64> {
                let mut acc = 0.0;
                if self.a != 0.0 {
                    acc += self.a * self.correction_at(CorrectionKind::A, q)?;
                }
                if self.b != 0.0 {
                    acc += self.b * self.correction_at(CorrectionKind::B, q)?;
                }
                Ok(acc)
            };
            let gc = gradient5(&corr, p)?;
            for i in 0..4 {
                g[i] += gc[i];
            }
        }
        Ok(g)
    }
}

/// Result of the commutation order sweep.
#[derive(Debug, Clone, Serialize)]
pub struct OrderCheck {
    pub direction: [f64; 2],
    pub eps: Vec<f64>,
    pub bracket_norms: Vec<f64>,
    pub slope: f64,
    pub floor_limited: bool,
}

/// Sweeps (a, b) = eps * direction, evaluates |[H_vdW, G_vdW]| (or
/// |[H_vdW, G]| when `corrected` is false) at a deterministic set of
/// on-manifold points and fits the log-log slope. The corrected integral
/// cancels the first order, leaving O(eps^2); the bare G leaves O(eps).
pub fn commutation_order_check(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
    eps_list: &[f64],
    direction: [f64; 2],
    corrected: bool,
) -> Result<OrderCheck> {
    if eps_list.len() < 4 {
        return Err(Error::Validation("need at least 4 epsilon scales".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Validation(
            "epsilon scales must be positive and decreasing".into(),
        ));
    }
    let norm = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Validation("direction must be nonzero".into()));
    }
    let dir = [direction[0] / norm, direction[1] / norm];

    let points = sample_points(spec, budget, levels)?;
    let mut norms = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (a, b) = (eps * dir[0], eps * dir[1]);
        let h_vdw = PerturbedHamiltonian {
            spec: *spec,
            budget: *budget,
            a,
            b,
        };
        let mut worst = 0.0f64;
        for p in &points {
            let br = if corrected {
                let g_vdw = PerturbedSecondIntegral {
                    spec: *spec,
                    budget: *budget,
                    a,
                    b,
                    n_grid: 16,
                };
                canonical_bracket(&h_vdw, &g_vdw, p)?
            } else {
                canonical_bracket(&h_vdw, &IntegralG, p)?
            };
            worst = worst.max(br.abs());
        }
        norms.push(worst);
    }
    let floor_limited = norms.iter().all(|&v| v <= 1e-13);
    // least-squares slope of ln(norm) against ln(eps)
    let xs: Vec<f64> = eps_list.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(OrderCheck {
        direction: dir,
        eps: eps_list.to_vec(),
        bracket_norms: norms,
        slope: sxy / sxx,
        floor_limited,
    })
}

/// Deterministic on-manifold sample points in the chart interior.
fn sample_points(
    spec: &GasSpec,
    budget: &ControlBudget,
    levels: &InvariantLevels,
) -> Result<Vec<PhasePoint>> {
    let charts = crate::angles::positive_charts(spec, budget, levels)?;
    let (lo, hi) = charts[0];
    let q1s: Vec<f64> = if hi.is_finite() {
        [0.3, 0.5, 0.7].iter().map(|f| lo + f * (hi - lo)).collect()
    } else {
        [0.3, 0.8, 1.4].iter().map(|off| lo + off).collect()
    };
    let mut points = Vec::new();
    for &q1 in &q1s {
        for &q2 in &[-0.4, 0.5] {
            let (l1, l2) = lambda_on_m(spec, budget, levels, q1, q2, Branch::Plus)?;
            points.push(PhasePoint { q1, q2, l1, l2 });
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::flow;
    use approx::assert_relative_eq;

    fn setup() -> (GasSpec, ControlBudget) {
        (
            GasSpec::ideal(3.0, 1.0).unwrap(),
            ControlBudget::new(1.0).unwrap(),
        )
    }

    #[test]
    fn correction_ha_hand_value() {
        let (spec, budget) = setup();
        let p = PhasePoint {
            q1: 1.0,
            q2: 0.0,
            l1: 0.0,
            l2: 0.0,
        };
        assert_relative_eq!(
            correction_ha(&spec, &budget, &p).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn correction_hb_zero_factors() {
        let (spec, budget) = setup();
        let p = PhasePoint {
            q1: 1.2,
            q2: 0.4,
            l1: 0.8,
            l2: 0.0,
        };
        assert_eq!(correction_hb(&spec, &budget, &p).unwrap(), 0.0);
        // l2 = R/q1^2 kills the (R - l2 q1^2) factor
        let p = PhasePoint {
            q1: 1.2,
            q2: 0.4,
            l1: 0.8,
            l2: 1.0 / 1.44,
        };
        assert!(correction_hb(&spec, &budget, &p).unwrap().abs() < 1e-14);
    }

    #[test]
    fn correction_hb_double_evaluation() {
        // independent re-evaluation of the printed formula, full precision
        let (spec, budget) = setup();
        let p = PhasePoint {
            q1: 0.9,
            q2: -0.3,
            l1: 0.4,
            l2: 0.7,
        };
        let h = reduced_hamiltonian(&spec, &budget, &p).unwrap();
        let expect =
            ((-0.3f64 / 0.9).exp() * 1.0 * 1.0 * 9.0 * 0.7 * (1.0 - 0.7 * 0.81)) / (4.0 * h * 0.81);
        assert_relative_eq!(
            correction_hb(&spec, &budget, &p).unwrap(),
            expect,
            epsilon = 1e-14
        );
    }

    #[test]
    fn ha_term_inspection() {
        // with l2 = 0 the R^2 l2 n^3 d term disappears and only -8H^2 acts
        let (spec, budget) = setup();
        let p = PhasePoint {
            q1: 1.3,
            q2: 0.2,
            l1: 0.5,
            l2: 0.0,
        };
        let h = reduced_hamiltonian(&spec, &budget, &p).unwrap();
        let expect = (0.2f64 / 1.3).exp() * (1.69 * (-8.0 * h * h)) / (4.0 * 1.3 * 3.0 * h);
        assert_relative_eq!(
            correction_ha(&spec, &budget, &p).unwrap(),
            expect,
            epsilon = 1e-13
        );
    }

    #[test]
    fn perturbed_hamiltonian_linearity() {
        let (spec, budget) = setup();
        let p = PhasePoint {
            q1: 0.8,
            q2: 0.3,
            l1: -0.4,
            l2: 0.6,
        };
        let h0 = reduced_hamiltonian(&spec, &budget, &p).unwrap();
        let base = PerturbedHamiltonian {
            spec,
            budget,
            a: 0.0,
            b: 0.0,
        };
        assert_eq!(perturbed_hamiltonian(&base, &p).unwrap(), h0);
        let one = PerturbedHamiltonian {
            spec,
            budget,
            a: 0.01,
            b: 0.0,
        };
        let two = PerturbedHamiltonian {
            spec,
            budget,
            a: 0.02,
            b: 0.0,
        };
        let d1 = perturbed_hamiltonian(&one, &p).unwrap() - h0;
        let d2 = perturbed_hamiltonian(&two, &p).unwrap() - h0;
        assert_relative_eq!(d2, 2.0 * d1, epsilon = 1e-12);
        // the slope in a is exactly H_a
        assert_relative_eq!(
            d1 / 0.01,
            correction_ha(&spec, &budget, &p).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn perturbed_flow_conserves_perturbed_hamiltonian() {
        let (spec, budget) = setup();
        let h = PerturbedHamiltonian {
            spec,
            budget,
            a: 0.02,
            b: 0.01,
        };
        let start = PhasePoint {
            q1: 1.1,
            q2: 0.3,
            l1: 0.5,
            l2: -0.2,
        };
        let traj = flow(&h, start, 10.0, 1e-10).unwrap();
        assert!(!traj.truncated);
        assert!(traj.h_drift <= 1e-8, "perturbed drift {}", traj.h_drift);
    }

    #[test]
    fn chart_round_trip() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 2.0).unwrap();
        let chart = AngleChart::containing(&spec, &budget, &levels, Branch::Plus, 0.55).unwrap();
        let (lo, hi) = chart.interval;
        assert!(hi.is_finite());
        for f in [0.2, 0.45, 0.7, 0.9] {
            let q1 = lo + f * (hi - lo);
            let q2 = 0.3 - f;
            let (om1, om2) = chart.q_to_omega(q1, q2).unwrap();
            let (r1, r2) = chart.omega_to_q(om1, om2).unwrap();
            assert!((r1 - q1).abs() <= 1e-8, "q1 round trip {r1} vs {q1}");
            assert!((r2 - q2).abs() <= 1e-8, "q2 round trip {r2} vs {q2}");
        }
    }

    #[test]
    fn correction_g_definition_check() {
        // dG_a/dOmega1 recomputed by finite differences must equal
        // dH_a/dOmega2
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.3).unwrap();
        let chart = AngleChart::containing(&spec, &budget, &levels, Branch::Plus, 2.0).unwrap();
        let left = chart.omega1_left_edge().unwrap();
        let om1 = left + 0.8;
        let om2 = 0.4;
        let dh = 1e-4;
        let g_hi = correction_g(&chart, CorrectionKind::A, (left, om1 + dh), om2, 32).unwrap();
        let g_lo = correction_g(&chart, CorrectionKind::A, (left, om1 - dh), om2, 32).unwrap();
        let dg_dom1 = (g_hi - g_lo) / (2.0 * dh);
        let h = 1e-5;
        let ha_p = chart
            .correction_in_angles(CorrectionKind::A, om1, om2 + h)
            .unwrap();
        let ha_m = chart
            .correction_in_angles(CorrectionKind::A, om1, om2 - h)
            .unwrap();
        let dha_dom2 = (ha_p - ha_m) / (2.0 * h);
        assert!(
            (dg_dom1 - dha_dom2).abs() <= 1e-5 * dha_dom2.abs().max(1.0),
            "dG_a/dOm1 = {dg_dom1} vs dH_a/dOm2 = {dha_dom2}"
        );
    }

    #[test]
    fn correction_g_degenerate_range_and_convergence() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.3).unwrap();
        let chart = AngleChart::containing(&spec, &budget, &levels, Branch::Plus, 2.0).unwrap();
        let left = chart.omega1_left_edge().unwrap();
        assert_eq!(
            correction_g(&chart, CorrectionKind::A, (left, left), 0.2, 16).unwrap(),
            0.0
        );
        let coarse = correction_g(&chart, CorrectionKind::A, (left, left + 0.7), 0.2, 16).unwrap();
        let fine = correction_g(&chart, CorrectionKind::A, (left, left + 0.7), 0.2, 32).unwrap();
        assert!((coarse - fine).abs() <= 1e-7 * fine.abs().max(1.0));
        assert!(correction_g(&chart, CorrectionKind::A, (left, left + 0.5), 0.2, 8).is_err());
    }

    #[test]
    fn mixed_partials_of_correction_g_are_symmetric() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.3).unwrap();
        let chart = AngleChart::containing(&spec, &budget, &levels, Branch::Plus, 2.0).unwrap();
        let left = chart.omega1_left_edge().unwrap();
        let om1 = left + 0.9;
        let om2 = 0.3;
        let h = 1e-4;
        let g =
            |o1: f64, o2: f64| correction_g(&chart, CorrectionKind::A, (left, o1), o2, 16).unwrap();
        let d2_12 = ((g(om1 + h, om2 + h) - g(om1 + h, om2 - h))
            - (g(om1 - h, om2 + h) - g(om1 - h, om2 - h)))
            / (4.0 * h * h);
        let d2_21 = ((g(om1 + h, om2 + h) - g(om1 - h, om2 + h))
            - (g(om1 + h, om2 - h) - g(om1 - h, om2 - h)))
            / (4.0 * h * h);
        assert!((d2_12 - d2_21).abs() <= 1e-4 * d2_12.abs().max(1.0));
    }

    #[test]
    fn ideal_case_brackets_vanish() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.3).unwrap();
        let h = PerturbedHamiltonian {
            spec,
            budget,
            a: 0.0,
            b: 0.0,
        };
        for p in sample_points(&spec, &budget, &levels).unwrap() {
            let br = canonical_bracket(&h, &IntegralG, &p).unwrap();
            assert!(br.abs() <= 1e-10, "ideal bracket {br}");
        }
    }

    #[test]
    fn commutation_order_is_quadratic_with_corrections() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.3).unwrap();
        let eps = [1e-2, 3e-3, 1e-3, 3e-4];
        let corrected =
            commutation_order_check(&spec, &budget, &levels, &eps, [1.0, 1.0], true).unwrap();
        assert!(
            corrected.slope >= 1.8 && corrected.slope <= 2.2,
            "corrected slope {} (norms {:?})",
            corrected.slope,
            corrected.bracket_norms
        );
        let bare =
            commutation_order_check(&spec, &budget, &levels, &eps, [1.0, 1.0], false).unwrap();
        assert!(
            bare.slope >= 0.8 && bare.slope <= 1.2,
            "bare slope {} (norms {:?})",
            bare.slope,
            bare.bracket_norms
        );
    }

    #[test]
    fn order_check_validates_inputs() {
        let (spec, budget) = setup();
        let levels = InvariantLevels::new(1.0, 0.3).unwrap();
        assert!(
            commutation_order_check(&spec, &budget, &levels, &[1e-2, 1e-3], [1.0, 0.0], true)
                .is_err()
        );
        assert!(commutation_order_check(
            &spec,
            &budget,
            &levels,
            &[1e-2, 3e-3, 1e-3, 3e-4],
            [0.0, 0.0],
            true
        )
        .is_err());
    }
}
