//! Hamiltonians `H(t, u)` on `T_0 x R^{n+np}`, the growth constants of the
//! a-priori bounds, sampling-based certification of their hypotheses, the
//! built-in catalog, and the multi-time Legendre transformation.

mod catalog;
mod certify;
mod legendre;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PolyhamError, Result};
use crate::fields::random::substream;
use crate::fields::{GridField, PeriodicDomain};
use crate::phase::PhaseLayout;

pub use catalog::{builtin_hamiltonians, CatalogEntry, CatalogHamiltonian, ForcedQuadratic, ForcingTerm, SmoothConvex};
pub use certify::{
    certify_convexity, certify_growth, eq6_margin, halton, BoundProbe, ConvexityReport, GrowthCertificate, Sampling,
};
pub use legendre::{legendre_transform, LagrangianSpec, LegendrePoint};

type ValueFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Central-difference step for a probe at `u`.
pub fn fd_step(u: &[f64]) -> f64 {
    1e-6 * (1.0 + norm(u))
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central differences of `f` at `u`, step [`fd_step`].
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: F, u: &[f64], out: &mut [f64]) {
    let h = fd_step(u);
    let mut probe = u.to_vec();
    for i in 0..u.len() {
        probe[i] = u[i] + h;
        let fp = f(&probe);
        probe[i] = u[i] - h;
        let fm = f(&probe);
        probe[i] = u[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
}

/// A Hamiltonian together with its phase layout. The gradient is analytic
/// when supplied and central differences of the value otherwise.
#[derive(Clone)]
pub struct HamiltonianSpec {
    name: String,
    layout: PhaseLayout,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("name", &self.name)
            .field("layout", &self.layout)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl HamiltonianSpec {
    pub fn new<F>(name: impl Into<String>, layout: PhaseLayout, value: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        HamiltonianSpec {
            name: name.into(),
            layout,
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layout(&self) -> &PhaseLayout {
        &self.layout
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn value(&self, t: &[f64], u: &[f64]) -> f64 {
        (self.value)(t, u)
    }

    pub fn gradient_into(&self, t: &[f64], u: &[f64], out: &mut [f64]) {
        match &self.gradient {
            Some(g) => g(t, u, out),
            None => self.fd_gradient_into(t, u, out),
        }
    }

    pub fn gradient(&self, t: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.gradient_into(t, u, &mut out);
        out
    }

    pub fn fd_gradient_into(&self, t: &[f64], u: &[f64], out: &mut [f64]) {
        central_gradient(|v| (self.value)(t, v), u, out);
    }

    pub fn fd_gradient(&self, t: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.fd_gradient_into(t, u, &mut out);
        out
    }

    /// `grad H(t, u(t))` sampled on the grid.
    pub fn gradient_field(&self, u: &GridField) -> Result<GridField> {
        self.layout.check_field(u)?;
        let domain = u.domain();
        let m = u.m();
        let mut values = vec![0.0; u.values().len()];
        let mut t = vec![0.0; domain.p()];
        for (pt, out) in values.chunks_exact_mut(m).enumerate() {
            domain.point_into(pt, &mut t);
            self.gradient_into(&t, u.at(pt), out);
        }
        GridField::new(domain.clone(), m, values)
    }

    /// `int H(t, u(t)) dt` by the rectangle rule.
    pub fn integral(&self, u: &GridField) -> Result<f64> {
        self.layout.check_field(u)?;
        let domain = u.domain();
        let mut t = vec![0.0; domain.p()];
        let mut acc = 0.0;
        for pt in 0..domain.num_points() {
            domain.point_into(pt, &mut t);
            acc += self.value(&t, u.at(pt));
        }
        Ok(acc * domain.cell_volume())
    }

    /// Worst `|grad - FD(value)| / (1 + |grad|)` over `probes` random points
    /// `(t, u)` with `t` in the domain and `u` in the cube `[-radius, radius]^m`.
    pub fn gradient_consistency(&self, domain: &PeriodicDomain, probes: usize, radius: f64, seed: u64) -> f64 {
        let m = self.layout.m();
        let mut rng = substream(seed, 0x6772_6164);
        let mut worst: f64 = 0.0;
        let mut g = vec![0.0; m];
        let mut fd = vec![0.0; m];
        for _ in 0..probes {
            let t: Vec<f64> = domain.periods().iter().map(|&tp| rng.gen_range(0.0..tp)).collect();
            let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-radius..radius)).collect();
            self.gradient_into(&t, &u, &mut g);
            self.fd_gradient_into(&t, &u, &mut fd);
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&diff) / (1.0 + norm(&g)));
        }
        worst
    }
}

/// Constants `(alpha, beta, gamma, delta)` of the two-sided growth condition
/// `delta |u| - beta <= H(t, u) <= (alpha / 2) |u|^2 + gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConstants {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl GrowthConstants {
    /// Validates `alpha` against the window `(0, pi / (sqrt(p) max T))` of `domain`.
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64, domain: &PeriodicDomain) -> Result<Self> {
        let c = GrowthConstants {
            alpha,
            beta,
            gamma,
            delta,
        };
        c.validate(domain)?;
        Ok(c)
    }

    pub fn validate(&self, domain: &PeriodicDomain) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("delta", self.delta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PolyhamError::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let upper = domain.growth_window();
        if !(self.alpha > 0.0 && self.alpha < upper) {
            return Err(PolyhamError::AlphaWindow {
                alpha: self.alpha,
                upper,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_gradient_fallback() {
        let l = PhaseLayout::new(1, 1).unwrap();
        let h = HamiltonianSpec::new("cubic", l, |_t, u| u[0].powi(3) + u[0] * u[1]);
        let g = h.gradient(&[0.0], &[2.0, 1.0]);
        assert!((g[0] - 13.0).abs() < 1e-6);
        assert!((g[1] - 2.0).abs() < 1e-6);
        assert!(!h.has_analytic_gradient());
    }

    #[test]
    fn growth_window_validation() {
        let d = PeriodicDomain::uniform(vec![2.0 * std::f64::consts::PI], 8).unwrap();
        assert!((d.growth_window() - 0.5).abs() < 1e-15);
        assert!(GrowthConstants::new(0.4, 0.0, 1.0, 0.1, &d).is_ok());
        assert!(matches!(
            GrowthConstants::new(0.6, 0.0, 1.0, 0.1, &d),
            Err(PolyhamError::AlphaWindow { .. })
        ));
        assert!(GrowthConstants::new(0.0, 0.0, 1.0, 0.1, &d).is_err());
        assert!(GrowthConstants::new(0.4, -1.0, 1.0, 0.1, &d).is_err());
    }
}
