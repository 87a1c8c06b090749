//! Numerical verification of the Wirtinger inequality on the period
//! parallelepiped, the lower bound on the polysymplectic quadratic form, and
//! the a-priori bounds on periodic solutions of convex Hamiltonians.
//!
//! Margins are oriented so that a nonnegative margin means the inequality
//! holds: `rhs - lhs` for upper bounds, `lhs - rhs` for the quadratic-form
//! lower bound.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::action::{hamilton_residual, ActionProblem};
use crate::error::Result;
use crate::fields::random::substream;
use crate::fields::{
    dft, gradient_energy, integrate, l2_norm, mean_zero_project, spectral_gradient_energy, GridField, PeriodicDomain,
    SpectralField,
};
use crate::hamiltonian::{
    certify_convexity, certify_growth, dot, GrowthConstants, HamiltonianSpec, Sampling,
};
use crate::phase::{polysymplectic_derivative, quadratic_form_spectral, PhaseLayout};

/// Relative slack applied to every verdict.
pub const VERDICT_TOL: f64 = 1e-9;

/// Largest Hamilton residual accepted as a solution.
pub const RESIDUAL_GATE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inequality {
    Wirtinger,
    Qform,
    Bound4,
    Bound5,
    Eq6,
}

impl Inequality {
    pub fn as_str(self) -> &'static str {
        match self {
            Inequality::Wirtinger => "wirtinger",
            Inequality::Qform => "qform",
            Inequality::Bound4 => "bound4",
            Inequality::Bound5 => "bound5",
            Inequality::Eq6 => "eq6",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: Inequality,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub ratio: Option<f64>,
    pub diagnostics: BTreeMap<String, Value>,
    pub pass: bool,
}

impl InequalityReport {
    fn upper(name: Inequality, lhs: f64, rhs: f64) -> Self {
        Self::finish(name, lhs, rhs, rhs - lhs)
    }

    fn lower(name: Inequality, lhs: f64, rhs: f64) -> Self {
        Self::finish(name, lhs, rhs, lhs - rhs)
    }

    fn finish(name: Inequality, lhs: f64, rhs: f64, margin: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let ratio = if rhs != 0.0 { Some(lhs / rhs) } else { None };
        InequalityReport {
            name,
            lhs,
            rhs,
            margin,
            ratio,
            diagnostics: BTreeMap::new(),
            pass: margin >= -VERDICT_TOL * scale,
        }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// Energy held by modes whose spectral derivative vanishes on every axis
/// they touch (Nyquist slots). Such content enters `int |u|^2` but not
/// `int |du/dt|^2`.
fn nyquist_energy(spec: &SpectralField) -> f64 {
    let d = spec.domain();
    let mut idx = vec![0; d.p()];
    let mut e = 0.0;
    for slot in 0..d.num_points() {
        d.multi_index_into(slot, &mut idx);
        let nyq = idx.iter().enumerate().any(|(a, &j)| d.is_nyquist(a, j));
        if nyq {
            e += spec.slot(slot).iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
    }
    e * d.volume()
}

/// `int |u - mean|^2 <= ((max T)^2 / 4 pi^2) int |du/dt|^2`.
pub fn wirtinger_check(u: &GridField) -> InequalityReport {
    let d = u.domain();
    let mean: Vec<f64> = integrate(u).iter().map(|v| v / d.volume()).collect();
    let centred = mean_zero_project(u);
    let lhs = l2_norm(&centred).powi(2);
    let constant = (d.max_period() / (2.0 * PI)).powi(2);
    let spec = dft(u);
    let rhs = constant * spectral_gradient_energy(&spec);
    let mut r = InequalityReport::upper(Inequality::Wirtinger, lhs, rhs)
        .with("removed_mean", json!(mean))
        .with("constant", json!(constant))
        .with("nyquist_energy", json!(nyquist_energy(&spec)));
    if lhs == 0.0 && rhs == 0.0 {
        r.ratio = None;
        r = r.with("trivial", json!(true));
    }
    r
}

/// `int (delta(x)J du/dt, u) >= -(sqrt(p) max T / 2 pi) int |du/dt|^2`.
pub fn qform_check(layout: &PhaseLayout, u: &GridField) -> Result<InequalityReport> {
    let d = u.domain();
    layout.check_field(u)?;
    let spec = dft(u);
    let lhs = quadratic_form_spectral(layout, &spec)?;
    let constant = (d.p() as f64).sqrt() * d.max_period() / (2.0 * PI);
    let rhs = -constant * spectral_gradient_energy(&spec);
    let mut r = InequalityReport::lower(Inequality::Qform, lhs, rhs).with("constant", json!(constant));
    if lhs == 0.0 && rhs == 0.0 {
        r = r.with("trivial", json!(true));
    }
    Ok(r)
}

/// `pi - alpha max T sqrt(p)`, positive exactly inside the growth window.
fn window_gap(d: &PeriodicDomain, alpha: f64) -> f64 {
    PI - alpha * d.max_period() * (d.p() as f64).sqrt()
}

/// Right-hand side of the gradient-energy bound,
/// `2 pi alpha (beta + gamma) vol / (pi - alpha max T sqrt(p))`.
pub fn bound4_rhs(d: &PeriodicDomain, c: &GrowthConstants) -> f64 {
    2.0 * PI * c.alpha * (c.beta + c.gamma) * d.volume() / window_gap(d, c.alpha)
}

/// Right-hand side of the `L^1` bound,
/// `pi vol (beta + gamma) / (delta (pi - alpha max T sqrt(p)))`.
pub fn bound5_rhs(d: &PeriodicDomain, c: &GrowthConstants) -> f64 {
    PI * d.volume() * (c.beta + c.gamma) / (c.delta * window_gap(d, c.alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thm4Options {
    pub residual_gate: f64,
    pub sampling: Sampling,
}

impl Default for Thm4Options {
    fn default() -> Self {
        Thm4Options {
            residual_gate: RESIDUAL_GATE,
            sampling: Sampling::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thm4Reports {
    pub bound4: InequalityReport,
    /// `None` when `delta = 0`: the bound divides by `delta`.
    pub bound5: Option<InequalityReport>,
    pub eq6: InequalityReport,
}

impl Thm4Reports {
    pub fn all_pass(&self) -> bool {
        self.bound4.pass && self.eq6.pass && self.bound5.as_ref().is_none_or(|r| r.pass)
    }

    pub fn reports(&self) -> Vec<&InequalityReport> {
        let mut v = vec![&self.bound4];
        v.extend(self.bound5.as_ref());
        v.push(&self.eq6);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Thm4Outcome {
    Verified {
        reports: Thm4Reports,
        hypotheses: BTreeMap<String, Value>,
    },
    /// Hypotheses not satisfied: no inequality verdict.
    Rejected {
        reasons: Vec<String>,
        hypotheses: BTreeMap<String, Value>,
    },
}

impl Thm4Outcome {
    pub fn is_rejected(&self) -> bool {
        matches!(self, Thm4Outcome::Rejected { .. })
    }

    pub fn hypotheses(&self) -> &BTreeMap<String, Value> {
        match self {
            Thm4Outcome::Verified { hypotheses, .. } | Thm4Outcome::Rejected { hypotheses, .. } => hypotheses,
        }
    }
}

/// Check the a-priori bounds for a solution `u` of the Hamilton equations.
///
/// The hypotheses (alpha window, residual, growth and convexity
/// certificates) are evaluated first and always recorded; if any fails the
/// outcome is [`Thm4Outcome::Rejected`].
pub fn thm4_check(
    h: &HamiltonianSpec,
    u: &GridField,
    c: &GrowthConstants,
    options: &Thm4Options,
) -> Result<Thm4Outcome> {
    let d = u.domain();
    let problem = ActionProblem::new(d.clone(), h.clone())?;
    let residual = hamilton_residual(&problem, u)?;
    let window = d.growth_window();

    let mut hyp = BTreeMap::new();
    let mut reasons = Vec::new();
    hyp.insert("alpha".into(), json!(c.alpha));
    hyp.insert("alpha_window".into(), json!({ "lower": 0.0, "upper": window, "formula": "pi/(sqrt(p)*max T)" }));
    if !(c.alpha > 0.0 && c.alpha < window) {
        reasons.push(format!(
            "alpha = {} outside the window (0, pi/(sqrt(p)*max T)) = (0, {window})",
            c.alpha
        ));
    }
    for (name, v) in [("beta", c.beta), ("gamma", c.gamma), ("delta", c.delta)] {
        if !(v.is_finite() && v >= 0.0) {
            reasons.push(format!("{name} = {v} must be finite and nonnegative"));
        }
    }
    hyp.insert("residual_l2".into(), json!(residual.l2_norm));
    if !(residual.l2_norm <= options.residual_gate) {
        reasons.push(format!(
            "Hamilton residual {:e} exceeds {:e}: field is not a solution",
            residual.l2_norm, options.residual_gate
        ));
    }
    let growth = certify_growth(h, c, d, options.sampling);
    if !growth.pass {
        reasons.push("growth condition falsified by sampling".into());
    }
    hyp.insert("growth".into(), serde_json::to_value(&growth)?);
    let convexity = certify_convexity(h, d, options.sampling);
    if !convexity.pass {
        reasons.push("convexity falsified by sampling".into());
    }
    hyp.insert("convexity".into(), serde_json::to_value(&convexity)?);

    if !reasons.is_empty() {
        return Ok(Thm4Outcome::Rejected { reasons, hypotheses: hyp });
    }

    let bg = (c.beta + c.gamma) * d.volume();
    let bound4 = InequalityReport::upper(Inequality::Bound4, gradient_energy(u), bound4_rhs(d, c))
        .with("window_gap", json!(window_gap(d, c.alpha)));

    let bound5 = if c.delta > 0.0 {
        let l1 = u.points().map(|x| dot(x, x).sqrt()).sum::<f64>() * d.cell_volume();
        Some(InequalityReport::upper(Inequality::Bound5, l1, bound5_rhs(d, c)))
    } else {
        None
    };
    hyp.insert(
        "bound5".into(),
        json!(if c.delta > 0.0 { "evaluated" } else { "not applicable (delta = 0)" }),
    );

    let du = polysymplectic_derivative(h.layout(), u)?;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut worst = f64::INFINITY;
    let mut worst_pt = 0;
    for (pt, (g, x)) in du.points().zip(u.points()).enumerate() {
        let l = dot(g, g) / (2.0 * c.alpha);
        let r = -dot(g, x) + c.beta + c.gamma;
        lhs += l;
        rhs += r;
        if r - l < worst {
            worst = r - l;
            worst_pt = pt;
        }
    }
    let cell = d.cell_volume();
    let eq6 = InequalityReport::upper(Inequality::Eq6, lhs * cell, (rhs - (c.beta + c.gamma)) * cell + bg)
        .with("pointwise_worst_margin", json!(worst))
        .with("pointwise_worst_t", json!(d.point(worst_pt)));

    Ok(Thm4Outcome::Verified {
        reports: Thm4Reports { bound4, bound5, eq6 },
        hypotheses: hyp,
    })
}

/// Evaluate `f(index, rng)` for `index in 0..count` in parallel, each with
/// its own substream of `seed`. Results come back in index order.
pub fn seeded_sweep<T, F>(count: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    (0..count as u64)
        .into_par_iter()
        .map(|i| f(i, &mut substream(seed, i)))
        .collect()
}
