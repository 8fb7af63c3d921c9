//! Pontryagin setup for the work-maximization problem on the ideal-gas
//! state manifold: the control ellipse, the Hamiltonian linear in controls,
//! its maximizer on the boundary and the reduced Hamiltonian H(q, lambda).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gas::GasSpec;

/// Relative-variance bound delta defining the admissible control domain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBudget {
    pub delta: f64,
}

impl ControlBudget {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Validation(format!(
                "delta must be positive, got {delta}"
            )));
        }
        Ok(ControlBudget { delta })
    }
}

/// Coefficients of the process field Y = u1 Y1 + u2 Y2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlVector {
    pub u1: f64,
    pub u2: f64,
}

impl ControlVector {
    /// Value of the ellipse constraint (4/(n^2 R)) u1^2 + (2/(n R)) u2^2.
    pub fn constraint(&self, spec: &GasSpec) -> f64 {
        4.0 * self.u1 * self.u1 / (spec.n * spec.n * spec.r)
            + 2.0 * self.u2 * self.u2 / (spec.n * spec.r)
    }

    pub fn is_admissible(&self, spec: &GasSpec, budget: &ControlBudget) -> bool {
        self.constraint(spec) <= budget.delta + 1e-12
    }
}

/// Phase coordinates (q1, q2, lambda1, lambda2) of the control problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q1: f64,
    pub q2: f64,
    pub l1: f64,
    pub l2: f64,
}

impl PhasePoint {
    /// Validated constructor; q1 = nR/(2e) must be positive.
    pub fn new(q1: f64, q2: f64, l1: f64, l2: f64) -> Result<Self> {
        if !(q1 > 0.0) {
            return Err(Error::Domain(format!("q1 must be positive, got {q1}")));
        }
        Ok(PhasePoint { q1, q2, l1, l2 })
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.q1, self.q2, self.l1, self.l2]
    }

    pub fn from_coords(c: [f64; 4]) -> Self {
        PhasePoint {
            q1: c[0],
            q2: c[1],
            l1: c[2],
            l2: c[3],
        }
    }
}

/// Chart change (e, v) -> (q1, q2) = (nR/(2e), -q1 ln v).
pub fn to_q(spec: &GasSpec, e: f64, v: f64) -> Result<(f64, f64)> {
    if !(e > 0.0) || !(v > 0.0) {
        return Err(Error::Domain(format!(
            "to_q requires e > 0 and v > 0, got ({e}, {v})"
        )));
    }
    let q1 = spec.n * spec.r / (2.0 * e);
    Ok((q1, -q1 * v.ln()))
}

/// Inverse chart change: e = nR/(2 q1), v = exp(-q2/q1).
pub fn from_q(spec: &GasSpec, q1: f64, q2: f64) -> Result<(f64, f64)> {
    if !(q1 > 0.0) {
        return Err(Error::Domain(format!("from_q requires q1 > 0, got {q1}")));
    }
    Ok((spec.n * spec.r / (2.0 * q1), (-q2 / q1).exp()))
}

/// Boundary parametrization of the control ellipse:
/// u1 = (n sqrt(R delta)/2) cos tau, u2 = sqrt(n R delta / 2) sin tau.
pub fn control_on_boundary(spec: &GasSpec, budget: &ControlBudget, tau: f64) -> ControlVector {
    ControlVector {
        u1: 0.5 * spec.n * (spec.r * budget.delta).sqrt() * tau.cos(),
        u2: (0.5 * spec.n * spec.r * budget.delta).sqrt() * tau.sin(),
    }
}

/// Pontryagin Hamiltonian in the q-chart:
/// H = -R u1 / q1^2 + lambda1 u2 + lambda2 (q2 u2 / q1 + u1).
pub fn pontryagin_hamiltonian(
    spec: &GasSpec,
    _budget: &ControlBudget,
    p: &PhasePoint,
    u: &ControlVector,
) -> f64 {
    -spec.r * u.u1 / (p.q1 * p.q1) + p.l1 * u.u2 + p.l2 * (p.q2 * u.u2 / p.q1 + u.u1)
}

/// Sin/cos coefficients of the boundary Hamiltonian
/// H(tau) = A sin(tau) + B cos(tau).
fn boundary_coefficients(spec: &GasSpec, budget: &ControlBudget, p: &PhasePoint) -> (f64, f64) {
    let q1sq = p.q1 * p.q1;
    let a = (2.0 * spec.n * spec.r * budget.delta).sqrt() * p.q1 * (p.q1 * p.l1 + p.q2 * p.l2)
        / (2.0 * q1sq);
    let b = (spec.r * budget.delta).sqrt() * spec.n * (q1sq * p.l2 - spec.r) / (2.0 * q1sq);
    (a, b)
}

/// Result of the boundary maximization.
#[derive(Debug, Clone, Copy)]
pub struct TauStar {
    pub tau: f64,
    /// Both trigonometric coefficients vanish: every tau is optimal and
    /// tau = 0 is returned by convention.
    pub degenerate: bool,
}

/// Maximizer of the boundary Hamiltonian. The arctangent family
/// tau = pi (2k+1) - arctan(sqrt(2) q1 (q1 l1 + q2 l2) / (sqrt(n) (R - q1^2 l2)))
/// leaves the branch free; both candidates are evaluated and the larger
/// Hamiltonian wins, with concavity H_tautau < 0 checked at the winner.
pub fn tau_star(spec: &GasSpec, budget: &ControlBudget, p: &PhasePoint) -> Result<TauStar> {
    if !(p.q1 > 0.0) {
        return Err(Error::Domain("tau_star requires q1 > 0".into()));
    }
    let (a, b) = boundary_coefficients(spec, budget, p);
    let floor = 1e-13
        * ((2.0 * spec.n * spec.r * budget.delta).sqrt()
            * (p.q1 * p.l1.abs() + (p.q2 * p.l2).abs())
            * p.q1
            + (spec.r * budget.delta).sqrt() * spec.n * (p.q1 * p.q1 * p.l2.abs() + spec.r))
        / (2.0 * p.q1 * p.q1);
    if a.abs() + b.abs() <= floor {
        return Ok(TauStar {
            tau: 0.0,
            degenerate: true,
        });
    }
    let arg = 2.0f64.sqrt() * p.q1 * (p.q1 * p.l1 + p.q2 * p.l2)
        / (spec.n.sqrt() * (spec.r - p.q1 * p.q1 * p.l2));
    let cand1 = std::f64::consts::PI - arg.atan();
    let cand2 = cand1 - std::f64::consts::PI;
    let h = |tau: f64| a * tau.sin() + b * tau.cos();
    let tau = if h(cand1) >= h(cand2) { cand1 } else { cand2 };
    // concavity at the winner: H_tautau = -H(tau) must be negative
    debug_assert!(-h(tau) < 0.0);
    // normalize into (-pi, pi]
    let tau = if tau > std::f64::consts::PI {
        tau - 2.0 * std::f64::consts::PI
    } else {
        tau
    };
    Ok(TauStar {
        tau,
        degenerate: false,
    })
}

/// Floor below which the reduced Hamiltonian's radicand is treated as a
/// numerical inconsistency rather than rounding.
const RADICAND_FLOOR: f64 = -1e-12;

fn radicand_poly(spec: &GasSpec, p: &PhasePoint) -> f64 {
    let (n, r) = (spec.n, spec.r);
    let q1sq = p.q1 * p.q1;
    let q1p3 = q1sq * p.q1;
    let q1p4 = q1sq * q1sq;
    n * q1p4 * p.l2 * p.l2
        + 2.0 * q1p4 * p.l1 * p.l1
        + 4.0 * q1p3 * p.q2 * p.l1 * p.l2
        + 2.0 * q1sq * p.q2 * p.q2 * p.l2 * p.l2
        - 2.0 * r * n * q1sq * p.l2
        + r * r * n
}

/// The reduced Hamiltonian of the work-maximization problem,
/// H(q, lambda) = sqrt(n R delta (n q1^4 l2^2 + 2 q1^4 l1^2
///   + 4 q1^3 q2 l1 l2 + 2 q1^2 q2^2 l2^2 - 2 R n q1^2 l2 + R^2 n)) / (2 q1^2).
pub fn reduced_hamiltonian(spec: &GasSpec, budget: &ControlBudget, p: &PhasePoint) -> Result<f64> {
    if !(p.q1 > 0.0) {
        return Err(Error::Domain("reduced Hamiltonian requires q1 > 0".into()));
    }
    let radicand = spec.n * spec.r * budget.delta * radicand_poly(spec, p);
    if radicand < RADICAND_FLOOR {
        return Err(Error::InternalInconsistency(format!(
            "negative radicand {radicand} in the reduced Hamiltonian"
        )));
    }
    Ok(radicand.max(0.0).sqrt() / (2.0 * p.q1 * p.q1))
}

/// Analytic gradient of the reduced Hamiltonian in coordinate order
/// (q1, q2, l1, l2). Errors when the radicand vanishes (the gradient is
/// singular on that set).
pub fn reduced_hamiltonian_gradient(
    spec: &GasSpec,
    budget: &ControlBudget,
    p: &PhasePoint,
) -> Result<[f64; 4]> {
    let (n, r) = (spec.n, spec.r);
    let s = n * r * budget.delta;
    let q1sq = p.q1 * p.q1;
    let q1p3 = q1sq * p.q1;
    let q1p4 = q1sq * q1sq;
    let poly = radicand_poly(spec, p);
    let radicand = s * poly;
    if radicand < RADICAND_FLOOR {
        return Err(Error::InternalInconsistency(format!(
            "negative radicand {radicand} in the reduced Hamiltonian"
        )));
    }
    let sq = radicand.max(0.0).sqrt();
    if sq <= 1e-150 {
        return Err(Error::NearSingular(
            "reduced Hamiltonian gradient at a zero of the radicand".into(),
        ));
    }
    let poly_q1 = 4.0 * n * q1p3 * p.l2 * p.l2
        + 8.0 * q1p3 * p.l1 * p.l1
        + 12.0 * q1sq * p.q2 * p.l1 * p.l2
        + 4.0 * p.q1 * p.q2 * p.q2 * p.l2 * p.l2
        - 4.0 * r * n * p.q1 * p.l2;
    let poly_q2 = 4.0 * q1p3 * p.l1 * p.l2 + 4.0 * q1sq * p.q2 * p.l2 * p.l2;
    let poly_l1 = 4.0 * q1p4 * p.l1 + 4.0 * q1p3 * p.q2 * p.l2;
    let poly_l2 =
        2.0 * n * q1p4 * p.l2 + 4.0 * q1p3 * p.q2 * p.l1 + 4.0 * q1sq * p.q2 * p.q2 * p.l2
            - 2.0 * r * n * q1sq;
    let common = s / (4.0 * q1sq * sq);
    Ok([
        common * poly_q1 - sq / q1p3,
        common * poly_q2,
        common * poly_l1,
        common * poly_l2,
    ])
}
