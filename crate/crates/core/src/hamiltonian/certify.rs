//! Sampling-based falsifiers for the convexity and growth hypotheses.
//!
//! Probes come from a Halton sequence, so every run with the same sampling
//! parameters visits the same points in the same order.

use serde::Serialize;

use super::{dot, norm, GrowthConstants, HamiltonianSpec};
use crate::fields::PeriodicDomain;

const PRIMES: [u64; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Radical inverse of `index` in the `dim`-th prime base.
pub fn halton(index: u64, dim: usize) -> f64 {
    let base = PRIMES[dim % PRIMES.len()];
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub radius: f64,
    pub count: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            radius: 10.0,
            count: 4096,
        }
    }
}

/// Probe `index`: a time in the domain and a state with `|u| <= radius`.
/// `offset` selects an independent block of Halton dimensions.
fn probe(domain: &PeriodicDomain, m: usize, radius: f64, index: u64, offset: usize) -> (Vec<f64>, Vec<f64>) {
    let p = domain.p();
    let t: Vec<f64> = (0..p).map(|a| domain.periods()[a] * halton(index, a)).collect();
    let dir: Vec<f64> = (0..m).map(|i| 2.0 * halton(index, p + offset + i) - 1.0).collect();
    let r = radius * halton(index, p + offset + m);
    let len = norm(&dir);
    let u = if len > 0.0 { dir.iter().map(|d| d * r / len).collect() } else { vec![0.0; m] };
    (t, u)
}

/// Worst sample of one side of the growth condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundProbe {
    pub pass: bool,
    /// Smallest oriented margin seen; negative means violated.
    pub worst_margin: f64,
    pub witness_t: Vec<f64>,
    pub witness_u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCertificate {
    pub pass: bool,
    pub samples: usize,
    /// `(alpha/2)|u|^2 + gamma - H`.
    pub upper: BoundProbe,
    /// `H - (delta |u| - beta)`.
    pub lower: BoundProbe,
}

fn tol(scale: f64) -> f64 {
    1e-10 * (1.0 + scale.abs())
}

/// Check `delta |u| - beta <= H(t,u) <= (alpha/2)|u|^2 + gamma` on
/// `sampling.count` probes with `|u| <= sampling.radius`.
pub fn certify_growth(
    h: &HamiltonianSpec,
    c: &GrowthConstants,
    domain: &PeriodicDomain,
    sampling: Sampling,
) -> GrowthCertificate {
    let m = h.layout().m();
    let mut upper = BoundProbe {
        pass: true,
        worst_margin: f64::INFINITY,
        witness_t: vec![],
        witness_u: vec![],
    };
    let mut lower = upper.clone();
    for i in 1..=sampling.count.max(1) as u64 {
        let (t, u) = probe(domain, m, sampling.radius, i, 0);
        let hv = h.value(&t, &u);
        let r = norm(&u);
        let up = 0.5 * c.alpha * r * r + c.gamma - hv;
        let lo = hv - (c.delta * r - c.beta);
        for (side, margin) in [(&mut upper, up), (&mut lower, lo)] {
            if margin < side.worst_margin || margin.is_nan() {
                side.worst_margin = margin;
                side.witness_t = t.clone();
                side.witness_u = u.clone();
            }
            if !(margin >= -tol(hv)) {
                side.pass = false;
            }
        }
    }
    GrowthCertificate {
        pass: upper.pass && lower.pass,
        samples: sampling.count.max(1),
        upper,
        lower,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub pass: bool,
    pub samples: usize,
    /// Largest `H((u+v)/2) - (H(u)+H(v))/2`.
    pub worst_midpoint_violation: f64,
    pub midpoint_witness: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// Largest `H(t,u) - H(t,0) - (grad H(t,u), u)`.
    pub worst_gradient_violation: f64,
    pub gradient_witness: Option<(Vec<f64>, Vec<f64>)>,
}

/// Midpoint convexity and the supporting-hyperplane inequality
/// `H(t,u) - H(t,0) <= (grad H(t,u), u)` on sampled pairs.
pub fn certify_convexity(h: &HamiltonianSpec, domain: &PeriodicDomain, sampling: Sampling) -> ConvexityReport {
    let m = h.layout().m();
    let mut report = ConvexityReport {
        pass: true,
        samples: sampling.count.max(1),
        worst_midpoint_violation: f64::NEG_INFINITY,
        midpoint_witness: None,
        worst_gradient_violation: f64::NEG_INFINITY,
        gradient_witness: None,
    };
    let grad_tol_rel = if h.has_analytic_gradient() { 1e-12 } else { 1e-5 };
    let mut g = vec![0.0; m];
    let zero = vec![0.0; m];
    for i in 1..=report.samples as u64 {
        let (t, u) = probe(domain, m, sampling.radius, i, 0);
        let (_, v) = probe(domain, m, sampling.radius, i, m + 1);
        let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let (hu, hv, hm) = (h.value(&t, &u), h.value(&t, &v), h.value(&t, &mid));
        let mid_violation = hm - 0.5 * (hu + hv);
        if mid_violation > report.worst_midpoint_violation {
            report.worst_midpoint_violation = mid_violation;
            report.midpoint_witness = Some((t.clone(), u.clone(), v.clone()));
        }
        if !(mid_violation <= 1e-10 + 1e-12 * (hu.abs() + hv.abs())) {
            report.pass = false;
        }

        h.gradient_into(&t, &u, &mut g);
        let h0 = h.value(&t, &zero);
        let gu = dot(&g, &u);
        let grad_violation = hu - h0 - gu;
        if grad_violation > report.worst_gradient_violation {
            report.worst_gradient_violation = grad_violation;
            report.gradient_witness = Some((t.clone(), u.clone()));
        }
        let scale = hu.abs() + h0.abs() + gu.abs();
        if !(grad_violation <= 1e-10 + grad_tol_rel * scale) {
            report.pass = false;
        }
    }
    report
}

/// `(grad H, u) + beta + gamma - |grad H|^2 / (2 alpha)`, nonnegative
/// whenever the growth condition and convexity hold.
pub fn eq6_margin(h: &HamiltonianSpec, c: &GrowthConstants, t: &[f64], u: &[f64]) -> f64 {
    let g = h.gradient(t, u);
    dot(&g, u) + c.beta + c.gamma - dot(&g, &g) / (2.0 * c.alpha)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::hamiltonian::{CatalogHamiltonian, ForcedQuadratic, ForcingTerm, SmoothConvex};
    use crate::phase::PhaseLayout;

    fn circle() -> PeriodicDomain {
        PeriodicDomain::uniform(vec![2.0 * PI], 32).unwrap()
    }

    fn layout() -> PhaseLayout {
        PhaseLayout::new(1, 1).unwrap()
    }

    fn small() -> Sampling {
        Sampling {
            radius: 10.0,
            count: 1024,
        }
    }

    #[test]
    fn halton_first_values() {
        assert_eq!(halton(1, 0), 0.5);
        assert_eq!(halton(2, 0), 0.25);
        assert_eq!(halton(3, 0), 0.75);
        assert!((halton(1, 1) - 1.0 / 3.0).abs() < 1e-16);
        assert!((halton(5, 1) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn pure_quadratic_is_tight() {
        let alpha = 0.4;
        let h = HamiltonianSpec::new("q", layout(), move |_t, u| 0.5 * alpha * dot(u, u));
        let c = GrowthConstants {
            alpha,
            beta: 0.0,
            gamma: 0.0,
            delta: 0.0,
        };
        let cert = certify_growth(&h, &c, &circle(), small());
        assert!(cert.pass);
        assert!(cert.upper.worst_margin.abs() < 1e-12);
        assert!(cert.lower.worst_margin >= 0.0);
    }

    #[test]
    fn quartic_breaks_upper_bound() {
        let h = HamiltonianSpec::new("quartic", layout(), |_t, u| dot(u, u).powi(2));
        let c = GrowthConstants {
            alpha: 0.4,
            beta: 0.0,
            gamma: 1.0,
            delta: 0.0,
        };
        let cert = certify_growth(&h, &c, &circle(), small());
        assert!(!cert.pass && !cert.upper.pass && cert.lower.pass);
        assert!(norm(&cert.upper.witness_u) > 5.0);
    }

    #[test]
    fn forced_quadratic_with_completed_square_constants() {
        let d = circle();
        let fam = CatalogHamiltonian::ForcedQuadratic(ForcedQuadratic {
            alpha_prime: 0.3,
            c0: 0.0,
            forcing: vec![ForcingTerm {
                k: vec![1],
                cos: vec![1.0, 0.0],
                sin: vec![0.0, 0.5],
            }],
        });
        let c = fam.certified_constants(&d, 0.35, 0.1).unwrap();
        let h = fam.build(&d, layout()).unwrap();
        let cert = certify_growth(&h, &c, &d, Sampling::default());
        assert!(cert.pass, "{cert:?}");
        assert!(certify_convexity(&h, &d, Sampling::default()).pass);
    }

    #[test]
    fn convexity_examples() {
        let d = circle();
        let q = CatalogHamiltonian::Quadratic { c: 0.3 }.build(&d, layout()).unwrap();
        let r = certify_convexity(&q, &d, small());
        assert!(r.pass);
        assert!(r.worst_midpoint_violation <= 1e-12);

        let concave = HamiltonianSpec::new("neg", layout(), |_t, u| -dot(u, u));
        let r = certify_convexity(&concave, &d, small());
        assert!(!r.pass);
        assert!(r.midpoint_witness.is_some());

        let smooth = CatalogHamiltonian::SmoothConvex(SmoothConvex {
            c: 0.1,
            kappa: 2.0,
            c0: 0.0,
            forcing: vec![],
        })
        .build(&d, layout())
        .unwrap();
        assert!(certify_convexity(&smooth, &d, small()).pass);
    }

    #[test]
    fn eq6_holds_under_certified_constants() {
        let d = circle();
        let fam = CatalogHamiltonian::SmoothConvex(SmoothConvex {
            c: 0.2,
            kappa: 0.1,
            c0: 0.5,
            forcing: vec![ForcingTerm {
                k: vec![2],
                cos: vec![0.3, 0.1],
                sin: vec![],
            }],
        });
        let c = fam.certified_constants(&d, 0.45, 0.05).unwrap();
        let h = fam.build(&d, layout()).unwrap();
        for i in 1..=1000 {
            let (t, u) = probe(&d, 2, 20.0, i, 0);
            assert!(eq6_margin(&h, &c, &t, &u) >= -1e-9);
        }
    }
}
