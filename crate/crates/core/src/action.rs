//! The action `Psi(u) = int -1/2 (delta(x)J du/dt, u) - H(t, u) dt`, the
//! residual of the multi-time Hamilton equations, and the discrete first
//! variation of the action.
//!
//! Sign convention: the residual is `r = delta(x)J du/dt + grad H(t, u)` and
//! the L^2 gradient of the action is `-r`.

use crate::error::{PolyhamError, Result};
use crate::fields::{l2_norm, GridField, PeriodicDomain};
use crate::hamiltonian::HamiltonianSpec;
use crate::phase::{polysymplectic_derivative, quadratic_form, PhaseLayout};
use crate::solver::polysymplectic_adjoint;

#[derive(Debug, Clone)]
pub struct ActionProblem {
    domain: PeriodicDomain,
    hamiltonian: HamiltonianSpec,
}

impl ActionProblem {
    pub fn new(domain: PeriodicDomain, hamiltonian: HamiltonianSpec) -> Result<Self> {
        if hamiltonian.layout().p() != domain.p() {
            return Err(PolyhamError::LayoutMismatch(format!(
                "Hamiltonian layout has p = {}, domain has p = {}",
                hamiltonian.layout().p(),
                domain.p()
            )));
        }
        Ok(ActionProblem { domain, hamiltonian })
    }

    pub fn domain(&self) -> &PeriodicDomain {
        &self.domain
    }

    pub fn layout(&self) -> &PhaseLayout {
        self.hamiltonian.layout()
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    fn check(&self, u: &GridField) -> Result<()> {
        self.domain.same_as(u.domain(), "action problem and field")?;
        self.layout().check_field(u)
    }
}

pub fn action_value(problem: &ActionProblem, u: &GridField) -> Result<f64> {
    problem.check(u)?;
    let skew = quadratic_form(problem.layout(), u)?;
    Ok(-0.5 * skew - problem.hamiltonian.integral(u)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub field: GridField,
    pub l2_norm: f64,
}

/// `delta(x)J du/dt + grad H(t, u)` pointwise, with its L^2 norm.
pub fn hamilton_residual(problem: &ActionProblem, u: &GridField) -> Result<Residual> {
    problem.check(u)?;
    let du = polysymplectic_derivative(problem.layout(), u)?;
    let grad = problem.hamiltonian.gradient_field(u)?;
    let field = du.add_scaled(1.0, &grad)?;
    let l2_norm = l2_norm(&field);
    Ok(Residual { field, l2_norm })
}

/// L^2 gradient of [`action_value`] on the grid.
///
/// Differentiating `-1/2 <D u, u>` gives `-1/2 (D u + D^T u)`; the transpose
/// is applied mode by mode through the adjoint of the Fourier symbol, so the
/// two halves come from independent code paths. They coincide because `D`
/// is symmetric, which is exactly the statement that the Euler-Lagrange
/// equations of the action are the Hamilton equations.
pub fn action_gradient(problem: &ActionProblem, u: &GridField) -> Result<GridField> {
    problem.check(u)?;
    let layout = problem.layout();
    let du = polysymplectic_derivative(layout, u)?;
    let dtu = polysymplectic_adjoint(layout, u)?;
    let grad = problem.hamiltonian.gradient_field(u)?;
    du.add_scaled(1.0, &dtu)?.scaled(-0.5).add_scaled(-1.0, &grad)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::fields::random::{band_limited, substream};
    use crate::fields::{l2_inner, PeriodicDomain};
    use crate::hamiltonian::CatalogHamiltonian;

    fn circle() -> PeriodicDomain {
        PeriodicDomain::uniform(vec![2.0 * PI], 32).unwrap()
    }

    fn zero_h(layout: PhaseLayout) -> HamiltonianSpec {
        HamiltonianSpec::new("zero", layout, |_t, _u| 0.0).with_gradient(|_t, _u, out| out.fill(0.0))
    }

    fn rotating() -> GridField {
        GridField::from_fn(circle(), 2, |t, o| o.copy_from_slice(&[t[0].cos(), t[0].sin()])).unwrap()
    }

    #[test]
    fn action_examples() {
        let l = PhaseLayout::new(1, 1).unwrap();
        let half = CatalogHamiltonian::Quadratic { c: 1.0 }.build(&circle(), l).unwrap();
        let p = ActionProblem::new(circle(), half.clone()).unwrap();
        assert_eq!(action_value(&p, &GridField::zeros(circle(), 2)).unwrap(), 0.0);

        let p0 = ActionProblem::new(circle(), zero_h(l)).unwrap();
        assert!((action_value(&p0, &rotating()).unwrap() + PI).abs() < 1e-12);

        let u0 = GridField::constant(circle(), &[1.0, 2.0]);
        let want = -2.0 * PI * 0.5 * 5.0;
        assert!((action_value(&p, &u0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn residual_of_rotating_mode() {
        let l = PhaseLayout::new(1, 1).unwrap();
        let h = CatalogHamiltonian::Quadratic { c: 1.0 }.build(&circle(), l).unwrap();
        let p = ActionProblem::new(circle(), h).unwrap();
        let r = hamilton_residual(&p, &rotating()).unwrap();
        assert!(r.field.add_scaled(-2.0, &rotating()).unwrap().max_abs() < 1e-13);
        assert!((r.l2_norm - 2.0 * (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn residual_zero_at_critical_constant() {
        let l = PhaseLayout::new(1, 1).unwrap();
        let h = CatalogHamiltonian::ShiftedQuadratic { c: 0.5, c0: 3.0 }.build(&circle(), l).unwrap();
        let p = ActionProblem::new(circle(), h).unwrap();
        let r = hamilton_residual(&p, &GridField::zeros(circle(), 2)).unwrap();
        assert_eq!(r.l2_norm, 0.0);
    }

    #[test]
    fn gradient_without_hamiltonian_is_minus_skew_term() {
        let d = PeriodicDomain::new(vec![1.0, 2.5], vec![8, 8]).unwrap();
        let l = PhaseLayout::new(1, 2).unwrap();
        let p = ActionProblem::new(d.clone(), zero_h(l)).unwrap();
        let u = band_limited(&d, 3, 3, false, &mut substream(5, 0));
        let g = action_gradient(&p, &u).unwrap();
        let du = polysymplectic_derivative(&l, &u).unwrap();
        assert!(g.add_scaled(1.0, &du).unwrap().max_abs() < 1e-12 * (1.0 + du.max_abs()));
    }

    #[test]
    fn finite_difference_variation() {
        let d = PeriodicDomain::new(vec![2.0, 3.0], vec![8, 8]).unwrap();
        let l = PhaseLayout::new(1, 2).unwrap();
        let h = CatalogHamiltonian::Quadratic { c: 0.7 }.build(&d, l).unwrap();
        let p = ActionProblem::new(d.clone(), h).unwrap();
        let u = band_limited(&d, 3, 3, false, &mut substream(6, 0));
        let v = band_limited(&d, 3, 3, false, &mut substream(6, 1));
        let eps = 1e-5;
        let fd = (action_value(&p, &u.add_scaled(eps, &v).unwrap()).unwrap()
            - action_value(&p, &u.add_scaled(-eps, &v).unwrap()).unwrap())
            / (2.0 * eps);
        let an = l2_inner(&action_gradient(&p, &u).unwrap(), &v).unwrap();
        assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "{fd} vs {an}");
    }

    #[test]
    fn rejects_wrong_layout() {
        let l = PhaseLayout::new(1, 2).unwrap();
        assert!(ActionProblem::new(circle(), zero_h(l)).is_err());
    }
}
