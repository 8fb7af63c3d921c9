//! Canonical Hamiltonian flow, conserved-quantity monitoring, the work
//! functional and the two-endpoint shooting solver.

use crate::control::{
    reduced_hamiltonian, reduced_hamiltonian_gradient, ControlBudget, ControlVector, PhasePoint,
};
use crate::error::{Error, Result};
use crate::gas::{applicability, GasKind, GasSpec};
use crate::numeric::fd;
use crate::numeric::quad::pair_line_integral;

/// Scalar function on phase space with a gradient; the default gradient is
/// a central difference with step 1e-6 * max(1, |coordinate|).
pub trait PhaseFunction {
    fn value(&self, p: &PhasePoint) -> Result<f64>;

    fn gradient(&self, p: &PhasePoint) -> Result<[f64; 4]> {
        let c = p.coords();
        let mut g = [0.0; 4];
        for (i, gi) in g.iter_mut().enumerate() {
            let h = fd::central_step(c[i]);
            let mut cp = c;
            cp[i] += h;
            let fp = self.value(&PhasePoint::from_coords(cp))?;
            cp[i] = c[i] - h;
            let fm = self.value(&PhasePoint::from_coords(cp))?;
            *gi = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }
}

/// The reduced work Hamiltonian with its analytic gradient.
#[derive(Debug, Clone, Copy)]
pub struct ReducedHamiltonian {
    pub spec: GasSpec,
    pub budget: ControlBudget,
}

impl PhaseFunction for ReducedHamiltonian {
    fn value(&self, p: &PhasePoint) -> Result<f64> {
        reduced_hamiltonian(&self.spec, &self.budget, p)
    }

    fn gradient(&self, p: &PhasePoint) -> Result<[f64; 4]> {
        reduced_hamiltonian_gradient(&self.spec, &self.budget, p)
    }
}

/// The second integral G = q1 lambda2.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegralG;

impl PhaseFunction for IntegralG {
    fn value(&self, p: &PhasePoint) -> Result<f64> {
        Ok(integral_g(p))
    }

    fn gradient(&self, p: &PhasePoint) -> Result<[f64; 4]> {
        Ok([p.l2, 0.0, 0.0, p.q1])
    }
}

/// G(q, lambda) = q1 lambda2, conserved along the reduced flow.
pub fn integral_g(p: &PhasePoint) -> f64 {
    p.q1 * p.l2
}

/// Closure adapter so tests can use plain functions as phase functions.
pub struct FnPhase<F: Fn(&PhasePoint) -> f64>(pub F);

impl<F: Fn(&PhasePoint) -> f64> PhaseFunction for FnPhase<F> {
    fn value(&self, p: &PhasePoint) -> Result<f64> {
        Ok((self.0)(p))
    }
}

/// Time-reversed Hamiltonian (flow of -H runs the trajectory backwards).
pub struct Negated<'a>(pub &'a dyn PhaseFunction);

impl PhaseFunction for Negated<'_> {
    fn value(&self, p: &PhasePoint) -> Result<f64> {
        Ok(-self.0.value(p)?)
    }

    fn gradient(&self, p: &PhasePoint) -> Result<[f64; 4]> {
        let g = self.0.gradient(p)?;
        Ok([-g[0], -g[1], -g[2], -g[3]])
    }
}

/// Time-indexed integral curve of the canonical system with conserved
/// quantity diagnostics. `work` stays empty until `attach_work` runs with
/// a concrete gas model.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    /// Right-hand side (q1', q2', l1', l2') at every sample.
    pub derivs: Vec<[f64; 4]>,
    pub h_values: Vec<f64>,
    pub g_values: Vec<f64>,
    /// Cumulative work J at every sample (empty until attached).
    pub work: Vec<f64>,
    /// max_t |H(t) - H(0)| / max(1, |H(0)|)
    pub h_drift: f64,
    /// max_t |G(t) - G(0)| / max(1, |G(0)|)
    pub g_drift: f64,
    /// True when step-size underflow stopped the integration early.
    pub truncated: bool,
}

impl Trajectory {
    /// Builds a trajectory from a hand-parametrized path (used for work
    /// quadrature on analytic curves). Drift diagnostics are zeroed.
    pub fn from_path(times: Vec<f64>, states: Vec<PhasePoint>) -> Result<Self> {
        if times.len() != states.len() || times.len() < 2 {
            return Err(Error::SparseSamples(
                "path needs matching times and states".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times[0] != 0.0 {
            return Err(Error::Domain(
                "times must be strictly increasing from 0".into(),
            ));
        }
        Ok(Trajectory {
            times,
            states,
            derivs: Vec::new(),
            h_values: Vec::new(),
            g_values: Vec::new(),
            work: Vec::new(),
            h_drift: 0.0,
            g_drift: 0.0,
            truncated: false,
        })
    }

    pub fn end_state(&self) -> PhasePoint {
        *self
            .states
            .last()
            .expect("trajectory holds at least one sample")
    }

    /// Computes and stores the cumulative work column for a gas model.
    pub fn attach_work(&mut self, spec: &GasSpec) -> Result<f64> {
        self.work = cumulative_work(spec, self)?;
        Ok(*self.work.last().unwrap())
    }
}

const DOPRI5_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// b - bhat, applied to k1..k7 for the embedded error estimate
const DOPRI5_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// dense-output weights (Hairer's rcont5 row)
const DOPRI5_D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

type State = [f64; 4];

fn axpy(y: &State, h: f64, coeffs: &[f64], k: &[State]) -> State {
    let mut out = *y;
    for (c, ki) in coeffs.iter().zip(k) {
        if *c != 0.0 {
            for j in 0..4 {
                out[j] += h * c * ki[j];
            }
        }
    }
    out
}

struct DenseSegment {
    t: f64,
    h: f64,
    rcont: [State; 5],
}

impl DenseSegment {
    fn eval(&self, time: f64) -> State {
        let theta = (time - self.t) / self.h;
        let th1 = 1.0 - theta;
        let mut out = [0.0; 4];
        for j in 0..4 {
            out[j] = self.rcont[0][j]
                + theta
                    * (self.rcont[1][j]
                        + th1
                            * (self.rcont[2][j]
                                + theta * (self.rcont[3][j] + th1 * self.rcont[4][j])));
        }
        out
    }
}

/// Integrates the canonical system of `h_fn` from `start`, emitting dense
/// output at the requested sample times (strictly increasing, first 0).
/// Embedded Dormand-Prince 5(4) with per-step mixed error tolerance `tol`.
pub fn flow_sampled(
    h_fn: &dyn PhaseFunction,
    start: PhasePoint,
    sample_times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    if !(tol > 0.0) {
        return Err(Error::Domain("flow tolerance must be positive".into()));
    }
    if sample_times.len() < 2 || sample_times[0] != 0.0 {
        return Err(Error::Domain(
            "sample times must start at 0 and hold at least 2 entries".into(),
        ));
    }
    if sample_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "sample times must be strictly increasing".into(),
        ));
    }
    let t_end = *sample_times.last().unwrap();

    let rhs = |y: &State| -> Result<State> {
        let g = h_fn.gradient(&PhasePoint::from_coords(*y))?;
        Ok([g[2], g[3], -g[0], -g[1]])
    };

    let mut emitted_times = Vec::with_capacity(sample_times.len());
    let mut emitted_states: Vec<State> = Vec::with_capacity(sample_times.len());
    let mut y = start.coords();
    let mut t = 0.0;
    let mut k1 = rhs(&y)?;
    emitted_times.push(0.0);
    emitted_states.push(y);
    let mut next_sample = 1;

    // initial step from the magnitude of the right-hand side
    let ynorm = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let fnorm = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut h = if fnorm > 0.0 {
        (0.01 * ynorm / fnorm).min(t_end / 10.0)
    } else {
        t_end / 10.0
    };
    h = h.max(1e-10).min(t_end);

    let h_min = 1e-14 * t_end.max(1.0);
    let mut truncated = false;
    let mut steps = 0usize;

    'outer: while t < t_end {
        if steps > 5_000_000 {
            truncated = true;
            break;
        }
        if h < h_min {
            truncated = true;
            break;
        }
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k = [
            k1, [0.0; 4], [0.0; 4], [0.0; 4], [0.0; 4], [0.0; 4], [0.0; 4],
        ];
        let mut stage_failed = false;
        for s in 0..6 {
            let ys = axpy(&y, h, &DOPRI5_A[s][..=s], &k[..=s]);
            match rhs(&ys) {
                Ok(v) => k[s + 1] = v,
                Err(_) => {
                    stage_failed = true;
                    break;
                }
            }
        }
        if stage_failed {
            // singular set approached mid-stage: retreat
            h *= 0.25;
            steps += 1;
            continue;
        }
        let y_new = axpy(&y, h, &DOPRI5_A[5], &k[..6]); // 5th-order solution (FSAL row)
        let k7 = match rhs(&y_new) {
            Ok(v) => v,
            Err(_) => {
                h *= 0.25;
                steps += 1;
                continue;
            }
        };
        k[6] = k7;
        let mut err = 0.0f64;
        for j in 0..4 {
            let mut e = 0.0;
            for (s, ks) in k.iter().enumerate() {
                e += DOPRI5_E[s] * ks[j];
            }
            e *= h;
            let sc = tol + tol * y[j].abs().max(y_new[j].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / 4.0).sqrt();
        steps += 1;
        if err <= 1.0 {
            // accepted: dense output over [t, t+h]
            let mut rcont = [[0.0; 4]; 5];
            for j in 0..4 {
                let ydiff = y_new[j] - y[j];
                let bspl = h * k[0][j] - ydiff;
                rcont[0][j] = y[j];
                rcont[1][j] = ydiff;
                rcont[2][j] = bspl;
                rcont[3][j] = ydiff - h * k7[j] - bspl;
                let mut acc = 0.0;
                for (s, ks) in k.iter().enumerate() {
                    acc += DOPRI5_D[s] * ks[j];
                }
                rcont[4][j] = h * acc;
            }
            let seg = DenseSegment { t, h, rcont };
            let t_new = t + h;
            while next_sample < sample_times.len()
                && sample_times[next_sample] <= t_new + 1e-14 * t_end
            {
                let ts = sample_times[next_sample].min(t_new);
                emitted_times.push(sample_times[next_sample]);
                emitted_states.push(seg.eval(ts));
                next_sample += 1;
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            if next_sample >= sample_times.len() {
                break 'outer;
            }
        }
        let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
        h *= factor.clamp(0.2, 5.0);
    }

    if next_sample < sample_times.len() {
        truncated = true;
    }

    // diagnostics and derivatives at the emitted samples
    let mut states = Vec::with_capacity(emitted_states.len());
    let mut derivs = Vec::with_capacity(emitted_states.len());
    let mut h_values = Vec::with_capacity(emitted_states.len());
    let mut g_values = Vec::with_capacity(emitted_states.len());
    for s in &emitted_states {
        let p = PhasePoint::from_coords(*s);
        derivs.push(rhs(s).unwrap_or([f64::NAN; 4]));
        h_values.push(h_fn.value(&p)?);
        g_values.push(integral_g(&p));
        states.push(p);
    }
    let h0 = h_values[0];
    let g0 = g_values[0];
    let h_drift = h_values
        .iter()
        .fold(0.0f64, |m, h| m.max((h - h0).abs() / h0.abs().max(1.0)));
    let g_drift = g_values
        .iter()
        .fold(0.0f64, |m, g| m.max((g - g0).abs() / g0.abs().max(1.0)));

    Ok(Trajectory {
        times: emitted_times,
        states,
        derivs,
        h_values,
        g_values,
        work: Vec::new(),
        h_drift,
        g_drift,
        truncated,
    })
}

/// Default number of dense-output samples used by `flow`.
pub const DEFAULT_FLOW_SAMPLES: usize = 2001;

/// Flow over [0, t0] with a uniform dense-output grid.
pub fn flow(h_fn: &dyn PhaseFunction, start: PhasePoint, t0: f64, tol: f64) -> Result<Trajectory> {
    if !(t0 > 0.0) {
        return Err(Error::Domain("flow requires t0 > 0".into()));
    }
    let n = DEFAULT_FLOW_SAMPLES;
    let times: Vec<f64> = (0..n).map(|i| t0 * i as f64 / (n - 1) as f64).collect();
    flow_sampled(h_fn, start, &times, tol)
}

/// Canonical Poisson bracket sum_i (dF/dq_i dG/dl_i - dF/dl_i dG/dq_i).
pub fn canonical_bracket(
    f: &dyn PhaseFunction,
    g: &dyn PhaseFunction,
    point: &PhasePoint,
) -> Result<f64> {
    let df = f.gradient(point)?;
    let dg = g.gradient(point)?;
    Ok(df[0] * dg[2] - df[2] * dg[0] + df[1] * dg[3] - df[3] * dg[1])
}

/// Cumulative work J(t) = integral of p dv along the (e, v)-image of the
/// trajectory, by pairwise quadratic quadrature over the recorded samples.
pub fn cumulative_work(spec: &GasSpec, traj: &Trajectory) -> Result<Vec<f64>> {
    let n = traj.times.len();
    if n < 3 {
        return Err(Error::SparseSamples(format!(
            "work quadrature needs >= 3 samples, got {n}"
        )));
    }
    let mut p = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for st in &traj.states {
        let (e, vol) = crate::control::from_q(spec, st.q1, st.q2)?;
        p.push(spec.pressure_ev(e, vol)?);
        v.push(vol);
    }
    pair_line_integral(&traj.times, &p, &v)
}

/// Total work along a trajectory.
pub fn work_functional(spec: &GasSpec, traj: &Trajectory) -> Result<f64> {
    Ok(*cumulative_work(spec, traj)?.last().unwrap())
}

/// Control coefficients realized by a trajectory point: the canonical
/// equations give q1' = u2 and q2' = u1 + q2 u2 / q1.
pub fn control_from_derivative(p: &PhasePoint, qdot: [f64; 2]) -> ControlVector {
    ControlVector {
        u1: qdot[1] - p.q2 * qdot[0] / p.q1,
        u2: qdot[0],
    }
}

/// Two-endpoint boundary problem in (e, v) with a fixed transfer time.
#[derive(Debug, Clone)]
pub struct ShootingProblem {
    pub x_start: (f64, f64),
    pub x_end: (f64, f64),
    pub t0: f64,
    pub spec: GasSpec,
    pub budget: ControlBudget,
}

/// Converged shooting solution.
#[derive(Debug)]
pub struct ShootResult {
    pub lambda0: (f64, f64),
    pub trajectory: Trajectory,
    /// Relative endpoint residual in (e, v).
    pub residual: f64,
    /// Number of distinct converged costates found by the multistart;
    /// the one with maximal work is returned.
    pub converged_count: usize,
}

/// Damped-Newton shooting for the ideal-gas reduced Hamiltonian. The
/// initial costate starts at the origin; on failure an 11x11 grid over
/// [-5, 5]^2 is swept and among the converged starts the trajectory with
/// maximal work wins (grid order breaks ties).
pub fn shoot(problem: &ShootingProblem, tol: f64) -> Result<ShootResult> {
    if problem.spec.kind != GasKind::Ideal {
        return Err(Error::Domain(
            "shoot is defined for the ideal-gas reduced Hamiltonian; drive other models through flow/shoot_with".into(),
        ));
    }
    let h = ReducedHamiltonian {
        spec: problem.spec,
        budget: problem.budget,
    };
    shoot_with(&h, problem, tol)
}

/// Shooting against an arbitrary phase-space Hamiltonian.
pub fn shoot_with(
    h_fn: &dyn PhaseFunction,
    problem: &ShootingProblem,
    tol: f64,
) -> Result<ShootResult> {
    if !(problem.t0 > 0.0) {
        return Err(Error::Validation("transfer time must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation(
            "shooting tolerance must be positive".into(),
        ));
    }
    for (e, v) in [problem.x_start, problem.x_end] {
        let st = problem.spec.state_ev(e, v)?;
        if !applicability(&problem.spec, &st)? {
            return Err(Error::Validation(format!(
                "endpoint (e, v) = ({e}, {v}) lies outside the applicable domain"
            )));
        }
    }
    let (q1s, q2s) = crate::control::to_q(&problem.spec, problem.x_start.0, problem.x_start.1)?;
    let target = problem.x_end;
    let scale = (target.0 * target.0 + target.1 * target.1).sqrt().max(1.0);
    let flow_tol = (tol * 1e-3).min(1e-10);

    let endpoint = |l1: f64, l2: f64| -> Result<(f64, f64)> {
        let start = PhasePoint {
            q1: q1s,
            q2: q2s,
            l1,
            l2,
        };
        let traj = flow_sampled(h_fn, start, &[0.0, problem.t0], flow_tol)?;
        if traj.truncated {
            return Err(Error::NearSingular("flow truncated before t0".into()));
        }
        let end = traj.end_state();
        crate::control::from_q(&problem.spec, end.q1, end.q2)
    };
    let residual = |l1: f64, l2: f64| -> Result<[f64; 2]> {
        let (e, v) = endpoint(l1, l2)?;
        Ok([(e - target.0) / scale, (v - target.1) / scale])
    };

    let newton = |mut l: [f64; 2]| -> Option<([f64; 2], f64)> {
        let mut r = residual(l[0], l[1]).ok()?;
        let mut rn = (r[0] * r[0] + r[1] * r[1]).sqrt();
        for _ in 0..50 {
            if rn <= tol {
                return Some((l, rn));
            }
            // forward-difference Jacobian, step 1e-6 (1 + |lambda|)
            let mut jac = [[0.0f64; 2]; 2];
            for col in 0..2 {
                let step = 1e-6 * (1.0 + l[col].abs());
                let mut lp = l;
                lp[col] += step;
                let rp = residual(lp[0], lp[1]).ok()?;
                jac[0][col] = (rp[0] - r[0]) / step;
                jac[1][col] = (rp[1] - r[1]) / step;
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-300 {
                return None;
            }
            let dx = [
                (-r[0] * jac[1][1] + r[1] * jac[0][1]) / det,
                (-r[1] * jac[0][0] + r[0] * jac[1][0]) / det,
            ];
            // backtracking damping
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..12 {
                let cand = [l[0] + t * dx[0], l[1] + t * dx[1]];
                if let Ok(rc) = residual(cand[0], cand[1]) {
                    let rcn = (rc[0] * rc[0] + rc[1] * rc[1]).sqrt();
                    if rcn < rn * (1.0 - 1e-4 * t) || rcn <= tol {
                        l = cand;
                        r = rc;
                        rn = rcn;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                return None;
            }
        }
        if rn <= tol {
            Some((l, rn))
        } else {
            None
        }
    };

    let mut solutions: Vec<([f64; 2], f64)> = Vec::new();
    if let Some(sol) = newton([0.0, 0.0]) {
        solutions.push(sol);
    } else {
        for i in 0..11 {
            for j in 0..11 {
                let l1 = -5.0 + i as f64;
                let l2 = -5.0 + j as f64;
                if let Some((l, rn)) = newton([l1, l2]) {
                    let duplicate = solutions.iter().any(|(s, _)| {
                        ((s[0] - l[0]).powi(2) + (s[1] - l[1]).powi(2)).sqrt()
                            <= 1e-6 * (1.0 + l[0].abs() + l[1].abs())
                    });
                    if !duplicate {
                        solutions.push((l, rn));
                    }
                }
            }
        }
    }
    if solutions.is_empty() {
        return Err(Error::UnreachableEndpoint(
            "no multistart costate converged; the endpoints may lie in different connected components".into(),
        ));
    }

    // among distinct solutions keep the one with maximal work
    let mut best: Option<(Trajectory, [f64; 2], f64, f64)> = None;
    for (l, rn) in &solutions {
        let start = PhasePoint {
            q1: q1s,
            q2: q2s,
            l1: l[0],
            l2: l[1],
        };
        let mut traj = flow(h_fn, start, problem.t0, flow_tol)?;
        let work = traj.attach_work(&problem.spec)?;
        let better = match &best {
            None => true,
            Some((_, _, _, bw)) => work > *bw,
        };
        if better {
            best = Some((traj, *l, *rn, work));
        }
    }
    let (trajectory, l, rn, _) = best.unwrap();
    Ok(ShootResult {
        lambda0: (l[0], l[1]),
        trajectory,
        residual: rn,
        converged_count: solutions.len(),
    })
}
