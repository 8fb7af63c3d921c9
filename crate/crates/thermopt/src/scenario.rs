//! Declarative scenario runner behind the CLI: parse a JSON scenario,
//! execute the requested analysis and emit CSV traces / JSON reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::angles::{
    component_count, component_report, lambda_on_m, solve_by_angles, Branch, InvariantLevels,
};
use crate::control::{from_q, to_q, ControlBudget, PhasePoint};
use crate::dynamics::{
    flow, integral_g, shoot, shoot_with, ReducedHamiltonian, ShootingProblem, Trajectory,
};
use crate::error::{Error, Result};
use crate::gas::{applicability, GasKind, GasSpec};
use crate::maxent::{solve_lambda, DiscreteMeasurement};
use crate::virial::{commutation_order_check, PerturbedHamiltonian};

/// Scenario commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Command {
    #[serde(rename = "maxent")]
    Maxent,
    #[serde(rename = "applicability")]
    Applicability,
    #[serde(rename = "solve")]
    Solve,
    #[serde(rename = "angles")]
    Angles,
    #[serde(rename = "components")]
    Components,
    #[serde(rename = "virial-check")]
    VirialCheck,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSpec {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub t0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxentInput {
    pub base_probs: Vec<f64>,
    pub random_vector: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

/// A fully parsed scenario with defaults applied.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub command: Command,
    #[serde(default = "default_gas")]
    pub gas: GasSpec,
    #[serde(default = "default_budget")]
    pub budget: ControlBudget,
    #[serde(default)]
    pub endpoints: Option<EndpointSpec>,
    #[serde(default)]
    pub levels: Option<InvariantLevels>,
    #[serde(default)]
    pub maxent: Option<MaxentInput>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    #[serde(default)]
    pub direction: Option<[f64; 2]>,
    pub output_path: String,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_gas() -> GasSpec {
    GasSpec {
        kind: GasKind::Ideal,
        n: 3.0,
        r: 1.0,
        a: 0.0,
        b: 0.0,
    }
}

fn default_budget() -> ControlBudget {
    ControlBudget { delta: 1.0 }
}

impl Scenario {
    pub fn tol(&self, name: &str, fallback: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(fallback)
    }
}

/// Parses and validates a scenario document. Unknown keys are rejected by
/// the deserializer with the offending name; per-command requirements are
/// checked here with the command's schema in the message.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(text)
        .map_err(|e| Error::Validation(format!("scenario parse: {e}")))?;
    s.gas.validate()?;
    if !(s.budget.delta > 0.0) {
        return Err(Error::Validation(format!(
            "budget.delta must be positive, got {}",
            s.budget.delta
        )));
    }
    if let Some((name, value)) = s.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::Validation(format!(
            "tolerance {name} must be positive, got {value}"
        )));
    }
    if s.output_path.is_empty() {
        return Err(Error::Validation("output_path must not be empty".into()));
    }
    match s.command {
        Command::Maxent => {
            if s.maxent.is_none() {
                return Err(Error::Validation(
                    "maxent requires: maxent {base_probs, random_vector, target}".into(),
                ));
            }
        }
        Command::Solve => {
            if s.endpoints.is_none() {
                return Err(Error::Validation(
                    "solve requires: gas, endpoints {start: [e,v], end: [e,v], t0}".into(),
                ));
            }
        }
        Command::Angles => {
            if s.endpoints.is_none() || s.levels.is_none() {
                return Err(Error::Validation(
                    "angles requires: gas, levels {h1, h2}, endpoints {start: [e,v], t0} (end is ignored)".into(),
                ));
            }
            require_ideal(&s, "angles")?;
        }
        Command::Components => {
            if s.levels.is_none() && s.grid.is_none() {
                return Err(Error::Validation(
                    "components requires: levels {h1, h2} or grid {x_min..ny} over (h1, h2)".into(),
                ));
            }
            require_ideal(&s, "components")?;
        }
        Command::VirialCheck => {
            if s.levels.is_none() {
                return Err(Error::Validation(
                    "virial-check requires: levels {h1, h2}".into(),
                ));
            }
            require_ideal(&s, "virial-check")?;
            if let Some(eps) = &s.eps {
                if eps.len() < 4
                    || eps.windows(2).any(|w| w[1] >= w[0])
                    || eps.iter().any(|&e| !(e > 0.0))
                {
                    return Err(Error::Validation(
                        "eps must hold at least 4 decreasing positive scales".into(),
                    ));
                }
            }
        }
        Command::Applicability => {}
    }
    if let Some(ep) = &s.endpoints {
        if !(ep.t0 > 0.0) {
            return Err(Error::Validation(format!(
                "endpoints.t0 must be positive, got {}",
                ep.t0
            )));
        }
    }
    if let Some(g) = &s.grid {
        if g.nx < 2 || g.ny < 2 || !(g.x_max > g.x_min) || !(g.y_max > g.y_min) {
            return Err(Error::Validation(
                "grid must span a box with nx, ny >= 2".into(),
            ));
        }
    }
    if let Some(lv) = &s.levels {
        InvariantLevels::new(lv.h1, lv.h2)?;
    }
    Ok(s)
}

/// The invariant-manifold analyses live on the ideal reduced Hamiltonian;
/// a real-gas spec here would silently drop its a and b.
fn require_ideal(s: &Scenario, command: &str) -> Result<()> {
    if s.gas.kind != GasKind::Ideal {
        return Err(Error::Validation(format!(
            "{command} analyses the ideal-gas integrable structure; set gas.kind = \"ideal\" \
             (virial parameters enter through the command's own inputs)"
        )));
    }
    Ok(())
}

/// Shortest round-trip decimal formatting (17 significant digits at most).
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Trajectory CSV with the fixed column contract
/// t,q1,q2,l1,l2,e,v,H,G,J_cum, one row per sample.
pub fn trajectory_csv(spec: &GasSpec, traj: &Trajectory) -> Result<String> {
    let mut out = String::from("t,q1,q2,l1,l2,e,v,H,G,J_cum\n");
    let work = if traj.work.len() == traj.times.len() {
        traj.work.clone()
    } else {
        crate::dynamics::cumulative_work(spec, traj)?
    };
    for (i, t) in traj.times.iter().enumerate() {
        let st = &traj.states[i];
        let (e, v) = from_q(spec, st.q1, st.q2)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(st.q1),
            fmt_f64(st.q2),
            fmt_f64(st.l1),
            fmt_f64(st.l2),
            fmt_f64(e),
            fmt_f64(v),
            fmt_f64(traj.h_values[i]),
            fmt_f64(traj.g_values[i]),
            fmt_f64(work[i]),
        );
    }
    Ok(out)
}

/// Report schema of the maxent command.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxentReport {
    pub lambda: Vec<f64>,
    pub density: Vec<f64>,
    pub info_gain: f64,
}

/// Report schema of the applicability command.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplicabilityReport {
    pub kind: GasKind,
    pub chart: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub applicable: Vec<Vec<bool>>,
}

/// Summary schema of the solve command.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSummary {
    #[serde(rename = "J")]
    pub j: f64,
    pub h_drift: f64,
    pub g_drift: f64,
    pub lambda0: [f64; 2],
    pub component_count: u8,
    pub residual: f64,
    pub converged_count: usize,
    pub trajectory_csv: String,
}

/// Report schema of the angles command.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnglesReport {
    pub levels: InvariantLevels,
    pub t0: f64,
    pub compared_samples: usize,
    pub max_deviation: f64,
    pub trajectory_csv: String,
}

/// Grid-sweep schema of the components command.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentsGridReport {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub counts: Vec<Vec<u8>>,
}

/// Report schema of the virial-check command.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirialCheckReport {
    pub direction: [f64; 2],
    pub eps: Vec<f64>,
    pub bracket_norms: Vec<f64>,
    pub slope: f64,
    pub floor_limited: bool,
    pub uncorrected_bracket_norms: Vec<f64>,
    pub uncorrected_slope: f64,
}

/// Progress sink: stderr unless quiet.
pub struct Progress {
    pub quiet: bool,
}

impl Progress {
    pub fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn csv_sibling(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

fn write_output(path: &str, contents: &str) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

/// Executes a scenario: writes the report (and a trajectory CSV where the
/// command produces one) and returns the report path.
pub fn run(s: &Scenario, progress: &Progress) -> Result<()> {
    match s.command {
        Command::Maxent => {
            let input = s.maxent.as_ref().expect("validated");
            let m = DiscreteMeasurement::new(
                input.base_probs.clone(),
                input.random_vector.clone(),
                input.target.clone(),
            )?;
            let sol = solve_lambda(&m, s.tol("maxent", 1e-10))?;
            progress.note(&format!("maxent: converged, info gain {}", sol.info_gain));
            let report = MaxentReport {
                lambda: sol.lambda.clone(),
                density: sol.density.clone(),
                info_gain: sol.info_gain,
            };
            write_output(&s.output_path, &serde_json::to_string_pretty(&report)?)
        }
        Command::Applicability => {
            let grid = s.grid.clone().unwrap_or(GridSpec {
                x_min: 0.2,
                x_max: 3.0,
                y_min: 0.2,
                y_max: 3.0,
                nx: 20,
                ny: 20,
            });
            let chart = match s.gas.kind {
                GasKind::Ideal => "ev",
                GasKind::VanDerWaals | GasKind::VirialFirstOrder => "tv",
            };
            let xs: Vec<f64> = (0..grid.nx)
                .map(|i| grid.x_min + (grid.x_max - grid.x_min) * i as f64 / (grid.nx - 1) as f64)
                .collect();
            let ys: Vec<f64> = (0..grid.ny)
                .map(|j| grid.y_min + (grid.y_max - grid.y_min) * j as f64 / (grid.ny - 1) as f64)
                .collect();
            let mut rows = Vec::with_capacity(xs.len());
            for &x in &xs {
                let mut row = Vec::with_capacity(ys.len());
                for &y in &ys {
                    let st = match s.gas.kind {
                        GasKind::Ideal => crate::gas::state_ideal(&s.gas, x, y),
                        GasKind::VanDerWaals => crate::gas::state_vdw(&s.gas, x, y),
                        GasKind::VirialFirstOrder => crate::gas::state_virial(&s.gas, x, y),
                    };
                    row.push(match st {
                        Ok(pt) => applicability(&s.gas, &pt)?,
                        Err(_) => false, // outside the model domain
                    });
                }
                rows.push(row);
            }
            progress.note(&format!(
                "applicability: {}x{} grid in chart {chart}",
                grid.nx, grid.ny
            ));
            let report = ApplicabilityReport {
                kind: s.gas.kind,
                chart: chart.to_string(),
                x: xs,
                y: ys,
                applicable: rows,
            };
            write_output(&s.output_path, &serde_json::to_string_pretty(&report)?)
        }
        Command::Solve => {
            let ep = s.endpoints.as_ref().expect("validated");
            let problem = ShootingProblem {
                x_start: (ep.start[0], ep.start[1]),
                x_end: (ep.end[0], ep.end[1]),
                t0: ep.t0,
                spec: s.gas,
                budget: s.budget,
            };
            let shoot_tol = s.tol("shoot", 1e-8);
            let result = match s.gas.kind {
                GasKind::Ideal => shoot(&problem, shoot_tol)?,
                GasKind::VirialFirstOrder => {
                    let h = PerturbedHamiltonian {
                        spec: s.gas,
                        budget: s.budget,
                        a: s.gas.a,
                        b: s.gas.b,
                    };
                    shoot_with(&h, &problem, shoot_tol)?
                }
                GasKind::VanDerWaals => {
                    return Err(Error::Validation(
                        "solve supports the ideal and first-order virial models".into(),
                    ))
                }
            };
            let mut traj = result.trajectory;
            let j = traj.attach_work(&s.gas)?;
            let start = traj.states[0];
            let levels = InvariantLevels::new(traj.h_values[0].max(0.0), integral_g(&start))?;
            let count = component_count(&s.gas, &s.budget, &levels)?;
            let csv_path = csv_sibling(Path::new(&s.output_path));
            write_output(csv_path.to_str().unwrap(), &trajectory_csv(&s.gas, &traj)?)?;
            progress.note(&format!(
                "solve: residual {}, work {}, {} converged start(s)",
                result.residual, j, result.converged_count
            ));
            let summary = SolveSummary {
                j,
                h_drift: traj.h_drift,
                g_drift: traj.g_drift,
                lambda0: [result.lambda0.0, result.lambda0.1],
                component_count: count,
                residual: result.residual,
                converged_count: result.converged_count,
                trajectory_csv: csv_path.to_string_lossy().into_owned(),
            };
            write_output(&s.output_path, &serde_json::to_string_pretty(&summary)?)
        }
        Command::Angles => {
            let ep = s.endpoints.as_ref().expect("validated");
            let levels = s.levels.expect("validated");
            let (q1, q2) = to_q(&s.gas, ep.start[0], ep.start[1])?;
            let (l1, l2) = lambda_on_m(&s.gas, &s.budget, &levels, q1, q2, Branch::Plus)?;
            let start = PhasePoint { q1, q2, l1, l2 };
            let h = ReducedHamiltonian {
                spec: s.gas,
                budget: s.budget,
            };
            let mut traj = flow(&h, start, ep.t0, s.tol("flow", 1e-10))?;
            traj.attach_work(&s.gas)?;
            let mut max_dev = 0.0f64;
            let mut compared = 0usize;
            let stride = (traj.times.len() / 20).max(1);
            for (i, t) in traj.times.iter().enumerate() {
                if i % stride != 0 && i != traj.times.len() - 1 {
                    continue;
                }
                let by_angles = solve_by_angles(&s.gas, &s.budget, &levels, &start, *t)?;
                let ode = traj.states[i];
                for (a, b) in by_angles.coords().iter().zip(ode.coords()) {
                    max_dev = max_dev.max((a - b).abs());
                }
                compared += 1;
            }
            let csv_path = csv_sibling(Path::new(&s.output_path));
            write_output(csv_path.to_str().unwrap(), &trajectory_csv(&s.gas, &traj)?)?;
            progress.note(&format!(
                "angles: {compared} samples cross-validated, max deviation {max_dev}"
            ));
            let report = AnglesReport {
                levels,
                t0: ep.t0,
                compared_samples: compared,
                max_deviation: max_dev,
                trajectory_csv: csv_path.to_string_lossy().into_owned(),
            };
            write_output(&s.output_path, &serde_json::to_string_pretty(&report)?)
        }
        Command::Components => {
            if let Some(grid) = &s.grid {
                let h1s: Vec<f64> = (0..grid.nx)
                    .map(|i| {
                        grid.x_min + (grid.x_max - grid.x_min) * i as f64 / (grid.nx - 1) as f64
                    })
                    .collect();
                let h2s: Vec<f64> = (0..grid.ny)
                    .map(|j| {
                        grid.y_min + (grid.y_max - grid.y_min) * j as f64 / (grid.ny - 1) as f64
                    })
                    .collect();
                let mut counts = Vec::with_capacity(h1s.len());
                for &h1 in &h1s {
                    let mut row = Vec::with_capacity(h2s.len());
                    for &h2 in &h2s {
                        let levels = InvariantLevels::new(h1, h2)?;
                        row.push(component_count(&s.gas, &s.budget, &levels)?);
                    }
                    counts.push(row);
                }
                progress.note(&format!("components: {}x{} level grid", grid.nx, grid.ny));
                let report = ComponentsGridReport {
                    h1: h1s,
                    h2: h2s,
                    counts,
                };
                write_output(&s.output_path, &serde_json::to_string_pretty(&report)?)
            } else {
                let levels = s.levels.expect("validated");
                let report = component_report(&s.gas, &s.budget, &levels)?;
                progress.note(&format!(
                    "components: {} at the given levels",
                    report.components
                ));
                write_output(&s.output_path, &serde_json::to_string_pretty(&report)?)
            }
        }
        Command::VirialCheck => {
            let levels = s.levels.expect("validated");
            let eps = s
                .eps
                .clone()
                .unwrap_or_else(|| vec![1e-2, 3e-3, 1e-3, 3e-4]);
            let direction = s.direction.unwrap_or([1.0, 1.0]);
            let corrected =
                commutation_order_check(&s.gas, &s.budget, &levels, &eps, direction, true)?;
            let bare = commutation_order_check(&s.gas, &s.budget, &levels, &eps, direction, false)?;
            progress.note(&format!(
                "virial-check: corrected slope {}, uncorrected slope {}",
                corrected.slope, bare.slope
            ));
            let report = VirialCheckReport {
                direction: corrected.direction,
                eps: corrected.eps,
                bracket_norms: corrected.bracket_norms,
                slope: corrected.slope,
                floor_limited: corrected.floor_limited,
                uncorrected_bracket_norms: bare.bracket_norms,
                uncorrected_slope: bare.slope,
            };
            write_output(&s.output_path, &serde_json::to_string_pretty(&report)?)
        }
    }
}
