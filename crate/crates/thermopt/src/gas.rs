//! Thermodynamic states of gases as Legendrian/Lagrangian manifolds in
//! specific variables (e, v), with the stability form kappa, applicability
//! domains, the thermodynamic Poisson bracket, contact vector fields and
//! the process fields Y1, Y2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fd;

/// Gas model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GasKind {
    #[serde(rename = "ideal")]
    Ideal,
    #[serde(rename = "vdw")]
    VanDerWaals,
    #[serde(rename = "virial1")]
    VirialFirstOrder,
}

/// Gas model parameters. `n` is the degree of freedom, `r` the gas
/// constant, `a` the interaction parameter and `b` the covolume.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSpec {
    pub kind: GasKind,
    pub n: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

impl GasSpec {
    pub fn new(kind: GasKind, n: f64, r: f64, a: f64, b: f64) -> Result<Self> {
        let spec = GasSpec { kind, n, r, a, b };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ideal(n: f64, r: f64) -> Result<Self> {
        Self::new(GasKind::Ideal, n, r, 0.0, 0.0)
    }

    pub fn van_der_waals(n: f64, r: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(GasKind::VanDerWaals, n, r, a, b)
    }

    pub fn virial_first_order(n: f64, r: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(GasKind::VirialFirstOrder, n, r, a, b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0) || !(self.r > 0.0) {
            return Err(Error::Validation("gas requires n > 0 and R > 0".into()));
        }
        if self.a < 0.0 || self.b < 0.0 {
            return Err(Error::Validation(
                "interaction a and covolume b must be nonnegative".into(),
            ));
        }
        if self.kind == GasKind::Ideal && (self.a != 0.0 || self.b != 0.0) {
            return Err(Error::Validation("ideal gas requires a = b = 0".into()));
        }
        Ok(())
    }

    /// First virial coefficient A1(T) = b - a/(R T).
    pub fn a1(&self, t: f64) -> f64 {
        self.b - self.a / (self.r * t)
    }

    /// Temperature as a function of (e, v). All three models share
    /// e = (n/2) R T - a/v with a = 0 for the ideal gas.
    pub fn temperature_ev(&self, e: f64, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::Domain("specific volume must be positive".into()));
        }
        let t = 2.0 * (e + self.a / v) / (self.n * self.r);
        if !(t > 0.0) {
            return Err(Error::Domain(format!(
                "nonpositive temperature at (e, v) = ({e}, {v})"
            )));
        }
        Ok(t)
    }

    /// Pressure as a function of (e, v) for the governing model.
    pub fn pressure_ev(&self, e: f64, v: f64) -> Result<f64> {
        let t = self.temperature_ev(e, v)?;
        Ok(match self.kind {
            GasKind::Ideal => self.r * t / v,
            GasKind::VanDerWaals => {
                if v <= self.b {
                    return Err(Error::Domain("volume below covolume".into()));
                }
                self.r * t / (v - self.b) - self.a / (v * v)
            }
            GasKind::VirialFirstOrder => self.r * t / v * (1.0 + self.a1(t) / v),
        })
    }

    /// Specific entropy in (e, v); conventions follow the model's state
    /// equation f3 (ideal, van der Waals) or the Massieu-Planck potential
    /// phi = ln v + (n/2) ln T - A1(T)/v (first-order virial), for which
    /// s = R (phi + T phi_T) = R (ln v + (n/2) ln T + n/2 - b/v).
    pub fn entropy_ev(&self, e: f64, v: f64) -> Result<f64> {
        let t = self.temperature_ev(e, v)?;
        Ok(match self.kind {
            GasKind::Ideal => self.r * (e.powf(self.n / 2.0) * v).ln(),
            GasKind::VanDerWaals => {
                if v <= self.b {
                    return Err(Error::Domain("volume below covolume".into()));
                }
                self.r * (t.powf(self.n / 2.0) * (v - self.b)).ln()
            }
            GasKind::VirialFirstOrder => {
                self.r * (v.ln() + 0.5 * self.n * t.ln() + 0.5 * self.n - self.b / v)
            }
        })
    }

    /// Full state from (e, v) for the governing model.
    pub fn state_ev(&self, e: f64, v: f64) -> Result<StatePoint> {
        if !(e + self.a / v > 0.0) || !(v > 0.0) {
            return Err(Error::Domain(format!(
                "state out of domain: (e, v) = ({e}, {v})"
            )));
        }
        let t = self.temperature_ev(e, v)?;
        let p = self.pressure_ev(e, v)?;
        let s = self.entropy_ev(e, v)?;
        Ok(StatePoint::assemble(e, v, p, t, s))
    }
}

/// A point of the Legendrian state manifold in specific variables.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StatePoint {
    /// Specific energy.
    pub e: f64,
    /// Specific volume.
    pub v: f64,
    /// Pressure.
    pub p: f64,
    /// Temperature.
    #[serde(rename = "T")]
    pub t: f64,
    /// Specific entropy.
    pub s: f64,
    /// Chemical potential gamma = e - T s + p v.
    pub gamma: f64,
}

impl StatePoint {
    fn assemble(e: f64, v: f64, p: f64, t: f64, s: f64) -> Self {
        StatePoint {
            e,
            v,
            p,
            t,
            s,
            gamma: e - t * s + p * v,
        }
    }
}

/// Ideal-gas state from (e, v): T = 2e/(nR), p = RT/v, s = R ln(e^{n/2} v).
pub fn state_ideal(spec: &GasSpec, e: f64, v: f64) -> Result<StatePoint> {
    if spec.kind != GasKind::Ideal {
        return Err(Error::Domain(
            "state_ideal requires an ideal GasSpec".into(),
        ));
    }
    if !(e > 0.0) || !(v > 0.0) {
        return Err(Error::Domain(format!(
            "ideal state requires e > 0 and v > 0, got ({e}, {v})"
        )));
    }
    spec.state_ev(e, v)
}

/// Van der Waals state from (T, v): p = RT/(v-b) - a/v^2,
/// e = (n/2) RT - a/v, s = R ln(T^{n/2} (v-b)).
pub fn state_vdw(spec: &GasSpec, t: f64, v: f64) -> Result<StatePoint> {
    if spec.kind != GasKind::VanDerWaals {
        return Err(Error::Domain(
            "state_vdw requires a van der Waals GasSpec".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::Domain("temperature must be positive".into()));
    }
    if v <= spec.b {
        return Err(Error::Domain(format!(
            "volume {v} must exceed the covolume {}",
            spec.b
        )));
    }
    let p = spec.r * t / (v - spec.b) - spec.a / (v * v);
    let e = 0.5 * spec.n * spec.r * t - spec.a / v;
    let s = spec.r * (t.powf(spec.n / 2.0) * (v - spec.b)).ln();
    Ok(StatePoint::assemble(e, v, p, t, s))
}

/// First-order virial state from (T, v), closed by the Massieu-Planck
/// potential phi = ln v + (n/2) ln T - A1(T)/v.
pub fn state_virial(spec: &GasSpec, t: f64, v: f64) -> Result<StatePoint> {
    if spec.kind != GasKind::VirialFirstOrder {
        return Err(Error::Domain(
            "state_virial requires a virial GasSpec".into(),
        ));
    }
    if !(t > 0.0) || !(v > 0.0) {
        return Err(Error::Domain(
            "virial state requires T > 0 and v > 0".into(),
        ));
    }
    let e = 0.5 * spec.n * spec.r * t - spec.a / v;
    spec.state_ev(e, v)
}

/// Coordinate chart tag of a 2x2 quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// Specific energy / specific volume.
    EV,
    /// Temperature / specific volume.
    TV,
}

/// Symmetric 2x2 differential quadratic form in a declared chart.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticForm2 {
    m: [[f64; 2]; 2],
    chart: Chart,
}

impl QuadraticForm2 {
    pub fn new(m: [[f64; 2]; 2], chart: Chart) -> Result<Self> {
        if (m[0][1] - m[1][0]).abs() > 1e-14 {
            return Err(Error::Domain("quadratic form must be symmetric".into()));
        }
        Ok(QuadraticForm2 { m, chart })
    }

    pub fn diagonal(d0: f64, d1: f64, chart: Chart) -> Self {
        QuadraticForm2 {
            m: [[d0, 0.0], [0.0, d1]],
            chart,
        }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.m
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Strict negative definiteness (both leading minors with the right sign).
    pub fn is_negative_definite(&self) -> bool {
        let det = self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0];
        self.m[0][0] < 0.0 && det > 0.0
    }

    pub fn evaluate(&self, u: [f64; 2], w: [f64; 2]) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += self.m[i][j] * u[i] * w[j];
            }
        }
        acc
    }
}

/// kappa for the ideal gas in chart (e, v): diag(-nR/(2 e^2), -R/v^2).
pub fn kappa_ideal(spec: &GasSpec, e: f64, v: f64) -> Result<QuadraticForm2> {
    if spec.kind != GasKind::Ideal {
        return Err(Error::Domain(
            "kappa_ideal requires an ideal GasSpec".into(),
        ));
    }
    if !(e > 0.0) || !(v > 0.0) {
        return Err(Error::Domain("kappa_ideal requires e > 0 and v > 0".into()));
    }
    Ok(QuadraticForm2::diagonal(
        -spec.n * spec.r / (2.0 * e * e),
        -spec.r / (v * v),
        Chart::EV,
    ))
}

/// kappa for the van der Waals gas in chart (T, v).
pub fn kappa_vdw(spec: &GasSpec, t: f64, v: f64) -> Result<QuadraticForm2> {
    if spec.kind != GasKind::VanDerWaals {
        return Err(Error::Domain(
            "kappa_vdw requires a van der Waals GasSpec".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::Domain("temperature must be positive".into()));
    }
    if v <= spec.b {
        return Err(Error::Domain("volume must exceed the covolume".into()));
    }
    let vmb = v - spec.b;
    let dv_entry =
        -(v.powi(3) * spec.r * t - 2.0 * spec.a * vmb * vmb) / (v.powi(3) * t * vmb * vmb);
    Ok(QuadraticForm2::diagonal(
        -spec.r * spec.n / (2.0 * t * t),
        dv_entry,
        Chart::TV,
    ))
}

/// kappa in chart (T, v) through the model's Massieu-Planck potential:
/// R^{-1} kappa = -(phi_TT + 2 phi_T / T) dT.dT + phi_vv dv.dv.
pub fn kappa_massieu_planck(phi: &MassieuPlanck, spec: &GasSpec, v: f64, t: f64) -> QuadraticForm2 {
    let (c_t, c_v) = massieu_planck_applicability(phi, v, t);
    QuadraticForm2::diagonal(-spec.r * c_t, spec.r * c_v, Chart::TV)
}

/// True iff kappa is strictly negative definite at the point, i.e. the
/// state model is applicable (thermodynamically stable) there.
pub fn applicability(spec: &GasSpec, point: &StatePoint) -> Result<bool> {
    let kappa = match spec.kind {
        GasKind::Ideal => kappa_ideal(spec, point.e, point.v)?,
        GasKind::VanDerWaals => kappa_vdw(spec, point.t, point.v)?,
        GasKind::VirialFirstOrder => {
            let phi = MassieuPlanck::for_spec(spec);
            kappa_massieu_planck(&phi, spec, point.v, point.t)
        }
    };
    Ok(kappa.is_negative_definite())
}

/// A point of the Lagrangian manifold chart (e, v, p, T).
#[derive(Debug, Clone, Copy)]
pub struct ThermoPoint4 {
    pub e: f64,
    pub v: f64,
    pub p: f64,
    pub t: f64,
}

impl ThermoPoint4 {
    pub fn from_state(st: &StatePoint) -> Self {
        ThermoPoint4 {
            e: st.e,
            v: st.v,
            p: st.p,
            t: st.t,
        }
    }
}

type Grad4Fn = Box<dyn Fn(&ThermoPoint4) -> [f64; 4]>;

/// Scalar function on (e, v, p, T) with an analytic gradient or a central
/// finite-difference fallback (step 1e-6 * max(1, |coordinate|)).
pub struct ScalarField4 {
    value: Box<dyn Fn(&ThermoPoint4) -> f64>,
    gradient: Option<Grad4Fn>,
}

impl ScalarField4 {
    pub fn new(value: impl Fn(&ThermoPoint4) -> f64 + 'static) -> Self {
        ScalarField4 {
            value: Box::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(
        value: impl Fn(&ThermoPoint4) -> f64 + 'static,
        gradient: impl Fn(&ThermoPoint4) -> [f64; 4] + 'static,
    ) -> Self {
        ScalarField4 {
            value: Box::new(value),
            gradient: Some(Box::new(gradient)),
        }
    }

    pub fn value(&self, p: &ThermoPoint4) -> f64 {
        (self.value)(p)
    }

    /// Gradient in coordinate order (e, v, p, T).
    pub fn gradient(&self, p: &ThermoPoint4) -> [f64; 4] {
        if let Some(g) = &self.gradient {
            return g(p);
        }
        let coords = [p.e, p.v, p.p, p.t];
        let mut g = [0.0; 4];
        for (i, gi) in g.iter_mut().enumerate() {
            let h = fd::central_step(coords[i]);
            let mut cp = coords;
            cp[i] += h;
            let fp = (self.value)(&ThermoPoint4 {
                e: cp[0],
                v: cp[1],
                p: cp[2],
                t: cp[3],
            });
            cp[i] = coords[i] - h;
            let fm = (self.value)(&ThermoPoint4 {
                e: cp[0],
                v: cp[1],
                p: cp[2],
                t: cp[3],
            });
            *gi = (fp - fm) / (2.0 * h);
        }
        g
    }
}

/// Poisson bracket of the thermodynamic symplectic structure on
/// (e, v, p, T):
/// [f, g] = (1/2) (pT (f_p g_e - f_e g_p) + T^2 (f_T g_e - f_e g_T)
///                 + T (f_v g_p - f_p g_v)).
pub fn poisson_bracket_thermo(f: &ScalarField4, g: &ScalarField4, point: &ThermoPoint4) -> f64 {
    let df = f.gradient(point);
    let dg = g.gradient(point);
    let (fe, fv, fp, ft) = (df[0], df[1], df[2], df[3]);
    let (ge, gv, gp, gt) = (dg[0], dg[1], dg[2], dg[3]);
    0.5 * (point.p * point.t * (fp * ge - fe * gp)
        + point.t * point.t * (ft * ge - fe * gt)
        + point.t * (fv * gp - fp * gv))
}

type Deriv2Fn = Box<dyn Fn(f64, f64) -> (f64, f64)>;

/// Massieu-Planck potential phi(v, T) with optional analytic derivatives.
pub struct MassieuPlanck {
    value: Box<dyn Fn(f64, f64) -> f64>,
    /// (phi_v, phi_T)
    grad: Option<Deriv2Fn>,
    /// (phi_vv, phi_TT)
    second: Option<Deriv2Fn>,
}

impl MassieuPlanck {
    pub fn new(value: impl Fn(f64, f64) -> f64 + 'static) -> Self {
        MassieuPlanck {
            value: Box::new(value),
            grad: None,
            second: None,
        }
    }

    pub fn with_derivatives(
        value: impl Fn(f64, f64) -> f64 + 'static,
        grad: impl Fn(f64, f64) -> (f64, f64) + 'static,
        second: impl Fn(f64, f64) -> (f64, f64) + 'static,
    ) -> Self {
        MassieuPlanck {
            value: Box::new(value),
            grad: Some(Box::new(grad)),
            second: Some(Box::new(second)),
        }
    }

    /// The model's own potential: ln v + (n/2) ln T for the ideal gas,
    /// ln(v-b) + (n/2) ln T + a/(R T v) for van der Waals,
    /// ln v + (n/2) ln T - A1(T)/v for the first-order virial model.
    pub fn for_spec(spec: &GasSpec) -> Self {
        let s = *spec;
        match spec.kind {
            GasKind::Ideal => MassieuPlanck::with_derivatives(
                move |v, t| v.ln() + 0.5 * s.n * t.ln(),
                move |v, t| (1.0 / v, 0.5 * s.n / t),
                move |v, t| (-1.0 / (v * v), -0.5 * s.n / (t * t)),
            ),
            GasKind::VanDerWaals => MassieuPlanck::with_derivatives(
                move |v, t| (v - s.b).ln() + 0.5 * s.n * t.ln() + s.a / (s.r * t * v),
                move |v, t| {
                    (
                        1.0 / (v - s.b) - s.a / (s.r * t * v * v),
                        0.5 * s.n / t - s.a / (s.r * t * t * v),
                    )
                },
                move |v, t| {
                    (
                        -1.0 / ((v - s.b) * (v - s.b)) + 2.0 * s.a / (s.r * t * v * v * v),
                        -0.5 * s.n / (t * t) + 2.0 * s.a / (s.r * t * t * t * v),
                    )
                },
            ),
            GasKind::VirialFirstOrder => MassieuPlanck::with_derivatives(
                move |v, t| v.ln() + 0.5 * s.n * t.ln() - s.a1(t) / v,
                move |v, t| {
                    (
                        1.0 / v + s.a1(t) / (v * v),
                        0.5 * s.n / t - s.a / (s.r * t * t * v),
                    )
                },
                move |v, t| {
                    (
                        -1.0 / (v * v) - 2.0 * s.a1(t) / (v * v * v),
                        -0.5 * s.n / (t * t) + 2.0 * s.a / (s.r * t * t * t * v),
                    )
                },
            ),
        }
    }

    pub fn value(&self, v: f64, t: f64) -> f64 {
        (self.value)(v, t)
    }

    pub fn first_derivatives(&self, v: f64, t: f64) -> (f64, f64) {
        if let Some(g) = &self.grad {
            return g(v, t);
        }
        let hv = fd::central_step(v);
        let ht = fd::central_step(t);
        (
            ((self.value)(v + hv, t) - (self.value)(v - hv, t)) / (2.0 * hv),
            ((self.value)(v, t + ht) - (self.value)(v, t - ht)) / (2.0 * ht),
        )
    }

    pub fn second_derivatives(&self, v: f64, t: f64) -> (f64, f64) {
        if let Some(sd) = &self.second {
            return sd(v, t);
        }
        let hv = fd::central_step(v);
        let ht = fd::central_step(t);
        let f0 = (self.value)(v, t);
        (
            ((self.value)(v + hv, t) - 2.0 * f0 + (self.value)(v - hv, t)) / (hv * hv),
            ((self.value)(v, t + ht) - 2.0 * f0 + (self.value)(v, t - ht)) / (ht * ht),
        )
    }
}

/// Pressure and energy generated by a Massieu-Planck potential:
/// p = R T phi_v, e = R T^2 phi_T.
pub fn massieu_planck_eval(phi: &MassieuPlanck, spec: &GasSpec, v: f64, t: f64) -> (f64, f64) {
    let (phi_v, phi_t) = phi.first_derivatives(v, t);
    (spec.r * t * phi_v, spec.r * t * t * phi_t)
}

/// Left-hand sides of the applicability inequalities
/// (phi_TT + 2 phi_T / T, phi_vv); applicable where the first is positive
/// and the second negative.
pub fn massieu_planck_applicability(phi: &MassieuPlanck, v: f64, t: f64) -> (f64, f64) {
    let (_, phi_t) = phi.first_derivatives(v, t);
    let (phi_vv, phi_tt) = phi.second_derivatives(v, t);
    (phi_tt + 2.0 * phi_t / t, phi_vv)
}

/// A point of the full contact space (s, e, v, p, T).
#[derive(Debug, Clone, Copy)]
pub struct ContactPoint {
    pub s: f64,
    pub e: f64,
    pub v: f64,
    pub p: f64,
    pub t: f64,
}

type Grad5Fn = Box<dyn Fn(&ContactPoint) -> [f64; 5]>;

/// Scalar generating function on the contact space with gradient in
/// coordinate order (s, e, v, p, T); finite-difference fallback as above.
pub struct ScalarField5 {
    value: Box<dyn Fn(&ContactPoint) -> f64>,
    gradient: Option<Grad5Fn>,
}

impl ScalarField5 {
    pub fn new(value: impl Fn(&ContactPoint) -> f64 + 'static) -> Self {
        ScalarField5 {
            value: Box::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(
        value: impl Fn(&ContactPoint) -> f64 + 'static,
        gradient: impl Fn(&ContactPoint) -> [f64; 5] + 'static,
    ) -> Self {
        ScalarField5 {
            value: Box::new(value),
            gradient: Some(Box::new(gradient)),
        }
    }

    pub fn value(&self, p: &ContactPoint) -> f64 {
        (self.value)(p)
    }

    pub fn gradient(&self, p: &ContactPoint) -> [f64; 5] {
        if let Some(g) = &self.gradient {
            return g(p);
        }
        let coords = [p.s, p.e, p.v, p.p, p.t];
        let mut g = [0.0; 5];
        for (i, gi) in g.iter_mut().enumerate() {
            let h = fd::central_step(coords[i]);
            let mut cp = coords;
            cp[i] += h;
            let fp = (self.value)(&ContactPoint {
                s: cp[0],
                e: cp[1],
                v: cp[2],
                p: cp[3],
                t: cp[4],
            });
            cp[i] = coords[i] - h;
            let fm = (self.value)(&ContactPoint {
                s: cp[0],
                e: cp[1],
                v: cp[2],
                p: cp[3],
                t: cp[4],
            });
            *gi = (fp - fm) / (2.0 * h);
        }
        g
    }
}

/// Components of a contact vector field, named by coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactVector {
    pub e: f64,
    pub v: f64,
    pub s: f64,
    pub p: f64,
    pub t: f64,
}

/// Contact vector field of a generating function f:
/// X_f = T (p f_p + T f_T) d_e - T f_p d_v + (f + T f_T) d_s
///       + T (f_v - p f_e) d_p - T (f_s + T f_e) d_T.
pub fn contact_field(f: &ScalarField5, point: &ContactPoint) -> ContactVector {
    let val = f.value(point);
    let g = f.gradient(point);
    let (fs, fe, fv, fp, ft) = (g[0], g[1], g[2], g[3], g[4]);
    let tt = point.t;
    ContactVector {
        e: tt * (point.p * fp + tt * ft),
        v: -tt * fp,
        s: val + tt * ft,
        p: tt * (fv - point.p * fe),
        t: -tt * (fs + tt * fe),
    }
}

/// Restriction of a vector field to the state manifold in chart (e, v).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentField {
    pub coeff_e: f64,
    pub coeff_v: f64,
}

impl TangentField {
    pub fn new(coeff_e: f64, coeff_v: f64) -> Result<Self> {
        if !coeff_e.is_finite() || !coeff_v.is_finite() {
            return Err(Error::Domain(
                "tangent field components must be finite".into(),
            ));
        }
        Ok(TangentField { coeff_e, coeff_v })
    }

    pub const ZERO: TangentField = TangentField {
        coeff_e: 0.0,
        coeff_v: 0.0,
    };
}

/// The process fields Y1, Y2 at (e, v).
///
/// Ideal: Y1 = -(2 e v/(n R)) d_v, Y2 = -(2 e^2/(n R)) d_e.
/// First-order virial: Y1 = -(2a(ev+a)/(R v^2 n)) d_e - (2(ev+a)/(R n)) d_v,
/// Y2 = -(2(ev+a)^2/(n R v^2)) d_e.
pub fn process_fields(spec: &GasSpec, e: f64, v: f64) -> Result<(TangentField, TangentField)> {
    if !(v > 0.0) {
        return Err(Error::Domain("process fields require v > 0".into()));
    }
    match spec.kind {
        GasKind::Ideal => {
            if !(e > 0.0) {
                return Err(Error::Domain("process fields require e > 0".into()));
            }
            let y1 = TangentField::new(0.0, -2.0 * e * v / (spec.n * spec.r))?;
            let y2 = TangentField::new(-2.0 * e * e / (spec.n * spec.r), 0.0)?;
            Ok((y1, y2))
        }
        GasKind::VirialFirstOrder => {
            let w = e * v + spec.a;
            let y1 = TangentField::new(
                -2.0 * spec.a * w / (spec.r * v * v * spec.n),
                -2.0 * w / (spec.r * spec.n),
            )?;
            let y2 = TangentField::new(-2.0 * w * w / (spec.n * spec.r * v * v), 0.0)?;
            Ok((y1, y2))
        }
        GasKind::VanDerWaals => Err(Error::Domain(
            "process fields are defined for the ideal and first-order virial models only".into(),
        )),
    }
}
