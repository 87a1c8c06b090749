//! Multiply-periodic solutions of `delta(x)J du/dt + grad H(t, u) = 0`.
//!
//! In Fourier space `delta(x)J d/dt` acts on mode `k` as an `m x m` matrix
//! `A_k`: the `x^j` row picks up `i theta_a p_j^a` and the `p_j^b` row picks
//! up `-i theta_b x^j`, with `theta_a = 2 pi k_a / T^a`. `A_k` is Hermitian
//! with eigenvalues `+|theta|`, `-|theta|` (once per `j`) and `0`, so
//! `A_k + c I` is singular exactly when `c` is one of these.
//!
//! Periodicity on opposite faces holds by construction: every solution is a
//! trigonometric polynomial on the periodic grid.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::action::{hamilton_residual, ActionProblem};
use crate::error::{PolyhamError, Result};
use crate::fields::{dft, idft, GridField, PeriodicDomain, SpectralField};
use crate::hamiltonian::{CatalogHamiltonian, ForcedQuadratic, HamiltonianSpec};
use crate::phase::PhaseLayout;

/// Fourier symbol of `delta(x)J d/dt` on one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    k: Vec<i64>,
    theta: Vec<f64>,
    layout: PhaseLayout,
}

impl ModeOperator {
    pub fn new(layout: PhaseLayout, domain: &PeriodicDomain, slot: usize) -> Self {
        let idx = domain.multi_index(slot);
        let k = idx.iter().enumerate().map(|(a, &j)| domain.wavenumber(a, j)).collect();
        let theta = idx.iter().enumerate().map(|(a, &j)| domain.derivative_symbol(a, j)).collect();
        ModeOperator { k, theta, layout }
    }

    pub fn at_wavenumber(layout: PhaseLayout, domain: &PeriodicDomain, k: &[i64]) -> Option<Self> {
        domain.mode_slot(k).map(|s| Self::new(layout, domain, s))
    }

    pub fn wavenumber(&self) -> &[i64] {
        &self.k
    }

    /// `|theta|`, the magnitude of the nonzero eigenvalues.
    pub fn frequency(&self) -> f64 {
        self.theta.iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let l = &self.layout;
        let m = l.m();
        let mut a = DMatrix::zeros(m, m);
        for j in 0..l.n() {
            for (b, &th) in self.theta.iter().enumerate() {
                a[(l.position(j), l.momentum(j, b))] = Complex64::new(0.0, th);
                a[(l.momentum(j, b), l.position(j))] = Complex64::new(0.0, -th);
            }
        }
        a
    }

    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let a = self.matrix();
        let y = &a * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }

    /// Conjugate-transpose action `A_k^* x`.
    pub fn adjoint_apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let a = self.matrix().adjoint();
        let y = &a * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }

    /// Distance from `-shift` to the spectrum of `A_k`, i.e. the smallest
    /// singular value of `A_k + shift I`.
    pub fn shift_gap(&self, shift: f64) -> f64 {
        let w = self.frequency();
        let mut gap = (shift - w).abs().min((shift + w).abs());
        if self.layout.p() > 1 || w == 0.0 {
            gap = gap.min(shift.abs());
        }
        gap
    }

    fn factor_shifted(&self, shift: f64) -> Result<LU<Complex64, Dyn, Dyn>> {
        if self.shift_gap(shift) <= 1e-12 * (1.0 + shift.abs() + self.frequency()) {
            return Err(PolyhamError::SingularMode { k: self.k.clone() });
        }
        let m = self.layout.m();
        let a = self.matrix() + DMatrix::identity(m, m) * Complex64::new(shift, 0.0);
        Ok(a.lu())
    }
}

/// Apply `D^T` to a phase field, where `D = delta(x)J d/dt` on the grid,
/// by acting with `A_k^*` on every Fourier mode.
pub fn polysymplectic_adjoint(layout: &PhaseLayout, u: &GridField) -> Result<GridField> {
    layout.check_field(u)?;
    let domain = u.domain();
    let spec = dft(u);
    let mut out = SpectralField::zeros(domain.clone(), u.m(), true);
    for slot in 0..domain.num_points() {
        ModeOperator::new(*layout, domain, slot).adjoint_apply(spec.slot(slot), out.slot_mut(slot));
    }
    idft(&out)
}

/// Per-mode factorizations of `A_k + shift I`.
struct ShiftedSystem {
    factors: Vec<LU<Complex64, Dyn, Dyn>>,
}

impl ShiftedSystem {
    fn new(layout: PhaseLayout, domain: &PeriodicDomain, shift: f64) -> Result<Self> {
        let factors = (0..domain.num_points())
            .map(|slot| ModeOperator::new(layout, domain, slot).factor_shifted(shift))
            .collect::<Result<Vec<_>>>()?;
        Ok(ShiftedSystem { factors })
    }

    /// Solve `(A + shift I) y = rhs` mode by mode.
    fn solve(&self, rhs: &SpectralField) -> GridField {
        let mut out = rhs.clone();
        for (slot, lu) in self.factors.iter().enumerate() {
            let b = DVector::from_column_slice(rhs.slot(slot));
            let y = lu.solve(&b).expect("factor checked nonsingular");
            out.slot_mut(slot).copy_from_slice(y.as_slice());
        }
        // Hermitian symmetry is preserved up to roundoff.
        out.symmetrize();
        idft(&out).expect("symmetrized")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: GridField,
    pub residual_l2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Splitting parameter of the final attempt (iterative solver only).
    pub mu: Option<f64>,
    pub method: &'static str,
    pub notes: Vec<String>,
}

/// Serializable part of a [`SolveReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub method: &'static str,
    pub residual_l2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mu: Option<f64>,
    pub notes: Vec<String>,
}

impl SolveReport {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            method: self.method,
            residual_l2: self.residual_l2,
            iterations: self.iterations,
            converged: self.converged,
            mu: self.mu,
            notes: self.notes.clone(),
        }
    }
}

/// Exact solve for `H = (alpha'/2)|u|^2 + (f(t), u) + c0`: on every mode
/// `(A_k + alpha' I) u_k = -f_k`.
pub fn solve_linear_spectral(
    domain: &PeriodicDomain,
    layout: PhaseLayout,
    h: &ForcedQuadratic,
) -> Result<SolveReport> {
    if !(h.alpha_prime > 0.0 && h.alpha_prime.is_finite()) {
        return Err(PolyhamError::InvalidParameter(format!(
            "alpha' must be positive, got {}",
            h.alpha_prime
        )));
    }
    let spec = CatalogHamiltonian::ForcedQuadratic(h.clone()).build(domain, layout)?;
    let forcing = h.forcing_field(domain, &layout)?;
    let system = ShiftedSystem::new(layout, domain, h.alpha_prime)?;
    let rhs = dft(&forcing.scaled(-1.0));
    let solution = system.solve(&rhs);
    let problem = ActionProblem::new(domain.clone(), spec)?;
    let residual_l2 = hamilton_residual(&problem, &solution)?.l2_norm;
    Ok(SolveReport {
        solution,
        residual_l2,
        iterations: 1,
        converged: true,
        mu: None,
        method: "linear-spectral",
        notes: vec!["forced-quadratic test family (constructed example)".into()],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterativeParams {
    /// Splitting parameter; chosen from sampled curvature when absent.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    2000
}

fn default_attempts() -> usize {
    4
}

impl Default for IterativeParams {
    fn default() -> Self {
        IterativeParams {
            mu: None,
            tol: default_tol(),
            max_iter: default_max_iter(),
            max_attempts: default_attempts(),
        }
    }
}

/// Range of directional second derivatives of `H` sampled around `u`.
fn sample_curvature(h: &HamiltonianSpec, u: &GridField) -> (f64, f64) {
    let domain = u.domain();
    let m = u.m();
    let npts = domain.num_points();
    let stride = (npts / 32).max(1);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut gp = vec![0.0; m];
    let mut gm = vec![0.0; m];
    let mut t = vec![0.0; domain.p()];
    for pt in (0..npts).step_by(stride) {
        domain.point_into(pt, &mut t);
        let base = u.at(pt);
        for dir in 0..m {
            let eps = 1e-4 * (1.0 + base[dir].abs());
            let mut probe = base.to_vec();
            probe[dir] += eps;
            h.gradient_into(&t, &probe, &mut gp);
            probe[dir] -= 2.0 * eps;
            h.gradient_into(&t, &probe, &mut gm);
            let q = (gp[dir] - gm[dir]) / (2.0 * eps);
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    (lo, hi)
}

/// Splitting parameter inside `(hi/2, (theta_min + lo)/2)` when that window
/// exists; there the iteration contracts for Hessians within `[lo, hi]`.
fn choose_mu(lo: f64, hi: f64, theta_min: f64) -> f64 {
    let a = 0.5 * hi;
    let b = 0.5 * (theta_min + lo);
    if a < b {
        0.5 * (a + b)
    } else {
        0.5 * (lo + hi).max(f64::EPSILON)
    }
}

/// Semi-implicit spectral fixed point
/// `u <- (A + mu I)^{-1} (mu u - grad H(t, u))`.
///
/// If the residual grows tenfold over 50 iterations the attempt counts as
/// diverged and is restarted from `initial` with `mu <- 2 mu`.
pub fn solve_convex_iterative(
    domain: &PeriodicDomain,
    h: &HamiltonianSpec,
    initial: Option<&GridField>,
    params: &IterativeParams,
) -> Result<SolveReport> {
    let layout = *h.layout();
    let problem = ActionProblem::new(domain.clone(), h.clone())?;
    let start = match initial {
        Some(u) => {
            layout.check_field(u)?;
            u.clone()
        }
        None => GridField::zeros(domain.clone(), layout.m()),
    };
    if !(params.tol > 0.0) || params.max_iter == 0 {
        return Err(PolyhamError::InvalidParameter("need tol > 0 and max_iter >= 1".into()));
    }

    let mut notes = Vec::new();
    let mut mu = match params.mu {
        Some(mu) if mu > 0.0 && mu.is_finite() => mu,
        Some(mu) => return Err(PolyhamError::InvalidParameter(format!("mu must be positive, got {mu}"))),
        None => {
            let (lo, hi) = sample_curvature(h, &start);
            let mu = choose_mu(lo, hi, domain.lowest_frequency());
            notes.push(format!("mu = {mu:.6} from sampled curvature [{lo:.4e}, {hi:.4e}]"));
            mu
        }
    };

    let vol = domain.volume();
    let mut total_iters = 0;
    let mut last = None;
    let attempts = params.max_attempts.max(1);
    for attempt in 0..attempts {
        if attempt > 0 {
            mu *= 2.0;
        }
        let system = match ShiftedSystem::new(layout, domain, mu) {
            Ok(s) => s,
            Err(PolyhamError::SingularMode { k }) => {
                notes.push(format!("mu = {mu} hits the spectrum at k = {k:?}; perturbing"));
                mu *= 1.0 + 1e-3;
                ShiftedSystem::new(layout, domain, mu)?
            }
            Err(e) => return Err(e),
        };
        let mut u = start.clone();
        let mut history: Vec<f64> = Vec::new();
        let mut diverged = false;
        let mut converged = false;
        for _ in 0..params.max_iter {
            let grad = h.gradient_field(&u)?;
            let uh = dft(&u);
            let gh = dft(&grad);
            // residual r = A u + grad H, measured by Parseval
            let mut res2 = 0.0;
            let mut au = vec![Complex64::default(); layout.m()];
            for slot in 0..domain.num_points() {
                ModeOperator::new(layout, domain, slot).apply(uh.slot(slot), &mut au);
                res2 += au.iter().zip(gh.slot(slot)).map(|(a, g)| (a + g).norm_sqr()).sum::<f64>();
            }
            let res = (res2 * vol).sqrt();
            history.push(res);
            total_iters += 1;
            if !res.is_finite() {
                diverged = true;
                break;
            }
            if res <= params.tol {
                converged = true;
                break;
            }
            let n = history.len();
            if n > 50 && res > 10.0 * history[n - 51] {
                diverged = true;
                break;
            }
            let rhs = u.scaled(mu).add_scaled(-1.0, &grad)?;
            u = system.solve(&dft(&rhs));
        }
        let residual_l2 = hamilton_residual(&problem, &u)?.l2_norm;
        let converged = converged && residual_l2 <= params.tol;
        last = Some((u, residual_l2, converged));
        if !diverged {
            break;
        }
        notes.push(format!("attempt {attempt} diverged with mu = {mu}"));
    }
    let (solution, residual_l2, converged) = last.expect("at least one attempt");
    Ok(SolveReport {
        solution,
        residual_l2,
        iterations: total_iters,
        converged,
        mu: Some(mu),
        method: "semi-implicit-spectral",
        notes,
    })
}
