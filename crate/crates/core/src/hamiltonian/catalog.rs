use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{dot, norm, GrowthConstants, HamiltonianSpec};
use crate::error::{PolyhamError, Result};
use crate::fields::{GridField, PeriodicDomain};
use crate::phase::PhaseLayout;

/// One Fourier term `cos * cos(phi) + sin * sin(phi)` of a forcing,
/// `phi = sum_a 2 pi k_a t^a / T^a`. Missing amplitude vectors are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

/// Validated forcing bound to a domain.
#[derive(Debug, Clone)]
struct Forcing {
    periods: Vec<f64>,
    terms: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    m: usize,
}

impl Forcing {
    fn new(terms: &[ForcingTerm], domain: &PeriodicDomain, m: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(terms.len());
        for term in terms {
            if term.k.len() != domain.p() {
                return Err(PolyhamError::InvalidParameter(format!(
                    "forcing wavenumber {:?} needs {} entries",
                    term.k,
                    domain.p()
                )));
            }
            for (a, &k) in term.k.iter().enumerate() {
                if 2 * k.unsigned_abs() as usize >= domain.resolution()[a] {
                    return Err(PolyhamError::InvalidParameter(format!(
                        "forcing wavenumber {:?} is not resolved below Nyquist",
                        term.k
                    )));
                }
            }
            let amp = |v: &[f64], what: &str| -> Result<Vec<f64>> {
                match v.len() {
                    0 => Ok(vec![0.0; m]),
                    l if l == m && v.iter().all(|x| x.is_finite()) => Ok(v.to_vec()),
                    _ => Err(PolyhamError::InvalidParameter(format!(
                        "forcing {what} amplitudes need {m} finite entries"
                    ))),
                }
            };
            let theta = term
                .k
                .iter()
                .zip(domain.periods())
                .map(|(&k, &t)| 2.0 * PI * k as f64 / t)
                .collect();
            out.push((theta, amp(&term.cos, "cos")?, amp(&term.sin, "sin")?));
        }
        Ok(Forcing {
            periods: domain.periods().to_vec(),
            terms: out,
            m,
        })
    }

    fn eval_into(&self, t: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (theta, c, s) in &self.terms {
            let phi: f64 = theta.iter().zip(t).map(|(a, b)| a * b).sum();
            let (sp, cp) = phi.sin_cos();
            for i in 0..self.m {
                out[i] += c[i] * cp + s[i] * sp;
            }
        }
    }

    fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, c, s)| c.iter().chain(s).all(|&v| v == 0.0))
    }

    fn sample(&self, domain: &PeriodicDomain) -> GridField {
        debug_assert_eq!(domain.periods(), &self.periods[..]);
        GridField::from_fn(domain.clone(), self.m, |t, o| self.eval_into(t, o)).expect("forcing is finite")
    }
}

/// `H(t,u) = (alpha'/2)|u|^2 + (f(t), u) + c0` with band-limited `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcedQuadratic {
    pub alpha_prime: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub forcing: Vec<ForcingTerm>,
}

impl ForcedQuadratic {
    /// Forcing sampled on the grid of `domain`.
    pub fn forcing_field(&self, domain: &PeriodicDomain, layout: &PhaseLayout) -> Result<GridField> {
        Ok(Forcing::new(&self.forcing, domain, layout.m())?.sample(domain))
    }
}

/// `H(t,u) = (c/2)|u|^2 + kappa sum_i log cosh(u_i) + (f(t), u) + c0`;
/// its Hessian lies between `c` and `c + kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothConvex {
    pub c: f64,
    pub kappa: f64,
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub forcing: Vec<ForcingTerm>,
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// The named test families, selectable as `{"name": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CatalogHamiltonian {
    /// `(c/2)|u|^2`
    Quadratic { c: f64 },
    /// `(c/2)|u|^2 + c0`
    ShiftedQuadratic { c: f64, c0: f64 },
    ForcedQuadratic(ForcedQuadratic),
    SmoothConvex(SmoothConvex),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub formula: &'static str,
}

pub fn builtin_hamiltonians() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "quadratic",
            formula: "(c/2)|u|^2",
        },
        CatalogEntry {
            name: "shifted-quadratic",
            formula: "(c/2)|u|^2 + c0",
        },
        CatalogEntry {
            name: "forced-quadratic",
            formula: "(alpha_prime/2)|u|^2 + (f(t),u) + c0",
        },
        CatalogEntry {
            name: "smooth-convex",
            formula: "(c/2)|u|^2 + kappa sum log cosh(u_i) + (f(t),u) + c0",
        },
    ]
}

impl CatalogHamiltonian {
    /// Parse `{"name": ..., "params": ...}`.
    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        if let Some(name) = v.get("name").and_then(|n| n.as_str()) {
            if !builtin_hamiltonians().iter().any(|e| e.name == name) {
                return Err(PolyhamError::UnknownFamily(name.to_string()));
            }
        }
        Ok(serde_json::from_value(v.clone())?)
    }

    pub fn family(&self) -> &'static str {
        match self {
            CatalogHamiltonian::Quadratic { .. } => "quadratic",
            CatalogHamiltonian::ShiftedQuadratic { .. } => "shifted-quadratic",
            CatalogHamiltonian::ForcedQuadratic(_) => "forced-quadratic",
            CatalogHamiltonian::SmoothConvex(_) => "smooth-convex",
        }
    }

    /// Every quadratic family as `(alpha'/2)|u|^2 + (f,u) + c0`.
    pub fn as_forced_quadratic(&self) -> Option<ForcedQuadratic> {
        match self {
            CatalogHamiltonian::Quadratic { c } => Some(ForcedQuadratic {
                alpha_prime: *c,
                c0: 0.0,
                forcing: vec![],
            }),
            CatalogHamiltonian::ShiftedQuadratic { c, c0 } => Some(ForcedQuadratic {
                alpha_prime: *c,
                c0: *c0,
                forcing: vec![],
            }),
            CatalogHamiltonian::ForcedQuadratic(f) => Some(f.clone()),
            CatalogHamiltonian::SmoothConvex(_) => None,
        }
    }

    /// Bounds `(lo, hi)` on the eigenvalues of the Hessian in `u`.
    pub fn curvature_bounds(&self) -> (f64, f64) {
        match self {
            CatalogHamiltonian::SmoothConvex(s) => (s.c, s.c + s.kappa),
            other => {
                let a = other.as_forced_quadratic().expect("quadratic family").alpha_prime;
                (a, a)
            }
        }
    }

    fn parts(&self) -> (f64, f64, &[ForcingTerm]) {
        match self {
            CatalogHamiltonian::Quadratic { c } => (*c, 0.0, &[]),
            CatalogHamiltonian::ShiftedQuadratic { c, c0 } => (*c, *c0, &[]),
            CatalogHamiltonian::ForcedQuadratic(f) => (f.alpha_prime, f.c0, &f.forcing),
            CatalogHamiltonian::SmoothConvex(s) => (s.c, s.c0, &s.forcing),
        }
    }

    pub fn build(&self, domain: &PeriodicDomain, layout: PhaseLayout) -> Result<HamiltonianSpec> {
        if layout.p() != domain.p() {
            return Err(PolyhamError::LayoutMismatch(format!(
                "layout has p = {}, domain has p = {}",
                layout.p(),
                domain.p()
            )));
        }
        let (c, c0, terms) = self.parts();
        let kappa = match self {
            CatalogHamiltonian::SmoothConvex(s) => s.kappa,
            _ => 0.0,
        };
        if !(c.is_finite() && c > 0.0) || !(kappa.is_finite() && kappa >= 0.0) || !c0.is_finite() {
            return Err(PolyhamError::InvalidParameter(format!(
                "{}: need curvature > 0, kappa >= 0 and finite c0",
                self.family()
            )));
        }
        let m = layout.m();
        let forcing = Arc::new(Forcing::new(terms, domain, m)?);
        let fv = forcing.clone();
        let value = move |t: &[f64], u: &[f64]| {
            let mut f = vec![0.0; u.len()];
            fv.eval_into(t, &mut f);
            let smooth: f64 = if kappa > 0.0 { u.iter().map(|&x| log_cosh(x)).sum() } else { 0.0 };
            0.5 * c * dot(u, u) + kappa * smooth + dot(&f, u) + c0
        };
        let gradient = move |t: &[f64], u: &[f64], out: &mut [f64]| {
            forcing.eval_into(t, out);
            for (o, &x) in out.iter_mut().zip(u) {
                *o += c * x + kappa * x.tanh();
            }
        };
        Ok(HamiltonianSpec::new(self.family(), layout, value).with_gradient(gradient))
    }

    /// Constants satisfying the growth condition for this Hamiltonian by
    /// completing squares: with curvature in `[lo, hi]` and `|f| <= F`,
    /// `H >= (lo/2)|u|^2 - F|u| + c0 >= delta |u| - beta` for
    /// `beta = (F + delta)^2 / (2 lo) - c0`, and
    /// `H <= (hi/2)|u|^2 + F|u| + c0 <= (alpha/2)|u|^2 + gamma` for
    /// `gamma = c0 + F^2 / (2 (alpha - hi))`.
    pub fn certified_constants(&self, domain: &PeriodicDomain, alpha: f64, delta: f64) -> Result<GrowthConstants> {
        let (lo, hi) = self.curvature_bounds();
        let (_, c0, terms) = self.parts();
        // |a cos + b sin| <= sqrt(|a|^2 + |b|^2) per term
        let f_sup: f64 = terms
            .iter()
            .map(|t| (norm(&t.cos).powi(2) + norm(&t.sin).powi(2)).sqrt())
            .sum();
        let zero_forcing = f_sup == 0.0;
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(PolyhamError::InvalidParameter(format!("delta must be >= 0, got {delta}")));
        }
        if alpha < hi || (alpha == hi && !zero_forcing) {
            return Err(PolyhamError::InvalidParameter(format!(
                "alpha = {alpha} must exceed the maximal curvature {hi} of {}",
                self.family()
            )));
        }
        let beta = ((f_sup + delta).powi(2) / (2.0 * lo) - c0).max(0.0);
        let gamma = if zero_forcing { c0.max(0.0) } else { (c0 + f_sup * f_sup / (2.0 * (alpha - hi))).max(0.0) };
        GrowthConstants::new(alpha, beta, gamma, delta, domain)
    }

    /// Whether the forcing (if any) vanishes identically.
    pub fn unforced(&self, domain: &PeriodicDomain, layout: &PhaseLayout) -> Result<bool> {
        let (_, _, terms) = self.parts();
        Ok(Forcing::new(terms, domain, layout.m())?.is_zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn setup() -> (PeriodicDomain, PhaseLayout) {
        (
            PeriodicDomain::uniform(vec![2.0 * PI, 3.0], 16).unwrap(),
            PhaseLayout::new(1, 2).unwrap(),
        )
    }

    fn forced(forcing: Vec<ForcingTerm>) -> CatalogHamiltonian {
        CatalogHamiltonian::ForcedQuadratic(ForcedQuadratic {
            alpha_prime: 0.3,
            c0: 0.7,
            forcing,
        })
    }

    #[test]
    fn catalog_has_four_families() {
        let names: Vec<_> = builtin_hamiltonians().iter().map(|e| e.name).collect();
        assert!(names.len() >= 4);
        assert!(names.contains(&"forced-quadratic"));
    }

    #[test]
    fn unforced_family_matches_shifted_quadratic() {
        let (d, l) = setup();
        let a = forced(vec![]).build(&d, l).unwrap();
        let b = CatalogHamiltonian::ShiftedQuadratic { c: 0.3, c0: 0.7 }.build(&d, l).unwrap();
        let u = [0.4, -1.2, 2.5];
        let t = [1.0, 2.0];
        assert_eq!(a.value(&t, &u), b.value(&t, &u));
        assert_eq!(a.gradient(&t, &u), b.gradient(&t, &u));
    }

    #[test]
    fn forced_gradient_is_linear_plus_forcing() {
        let (d, l) = setup();
        let term = ForcingTerm {
            k: vec![1, 0],
            cos: vec![1.0, 0.0, 0.5],
            sin: vec![],
        };
        let h = forced(vec![term]).build(&d, l).unwrap();
        let t = [0.3f64, 1.1];
        let u = [1.0, 2.0, -1.0];
        let f = [t[0].cos(), 0.0, 0.5 * t[0].cos()];
        let g = h.gradient(&t, &u);
        for i in 0..3 {
            assert!((g[i] - (0.3 * u[i] + f[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn catalog_gradients_match_finite_differences() {
        let (d, l) = setup();
        let term = ForcingTerm {
            k: vec![1, -2],
            cos: vec![0.3, 0.1, 0.0],
            sin: vec![0.0, 0.2, -0.4],
        };
        let fams = [
            CatalogHamiltonian::Quadratic { c: 0.2 },
            CatalogHamiltonian::ShiftedQuadratic { c: 0.2, c0: 1.0 },
            forced(vec![term.clone()]),
            CatalogHamiltonian::SmoothConvex(SmoothConvex {
                c: 0.2,
                kappa: 0.1,
                c0: 0.0,
                forcing: vec![term],
            }),
        ];
        for fam in fams {
            let h = fam.build(&d, l).unwrap();
            let worst = h.gradient_consistency(&d, 200, 5.0, 1);
            assert!(worst < 1e-4, "{}: {worst}", fam.family());
        }
    }

    #[test]
    fn json_selection() {
        let v = json!({"name": "smooth-convex", "params": {"c": 0.2, "kappa": 0.1}});
        let h = CatalogHamiltonian::from_json(&v).unwrap();
        assert_eq!(h.family(), "smooth-convex");
        let bad = json!({"name": "nope", "params": {}});
        assert!(matches!(CatalogHamiltonian::from_json(&bad), Err(PolyhamError::UnknownFamily(_))));
        let extra = json!({"name": "quadratic", "params": {"c": 1.0, "zz": 2}});
        assert!(CatalogHamiltonian::from_json(&extra).is_err());
    }

    #[test]
    fn forcing_must_be_resolved() {
        let (d, l) = setup();
        let term = ForcingTerm {
            k: vec![8, 0],
            cos: vec![1.0, 0.0, 0.0],
            sin: vec![],
        };
        assert!(forced(vec![term]).build(&d, l).is_err());
    }

    #[test]
    fn log_cosh_is_stable() {
        assert!((log_cosh(0.0)).abs() < 1e-16);
        assert!((log_cosh(1.0) - 1.0f64.cosh().ln()).abs() < 1e-15);
        assert!((log_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-10);
    }
}
