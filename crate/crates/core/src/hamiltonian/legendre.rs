//! Multi-time Legendre transformation: polymomenta `p_i^a = dL/dx_a^i` and
//! `H = p_i^a x_a^i - L`.
//!
//! Velocities and momenta share the flat layout `i * p + a`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::norm;
use crate::error::{PolyhamError, Result};

type LagFn = dyn Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync;
type LagGradFn = dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync;

const MAX_NEWTON: usize = 50;

/// A first-order Lagrangian `L(t, x, v)` with `x` in `R^n` and partial
/// velocities `v` in `R^{n x p}`.
#[derive(Clone)]
pub struct LagrangianSpec {
    n: usize,
    p: usize,
    value: Arc<LagFn>,
    grad_v: Option<Arc<LagGradFn>>,
    grad_x: Option<Arc<LagGradFn>>,
}

impl fmt::Debug for LagrangianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianSpec")
            .field("n", &self.n)
            .field("p", &self.p)
            .field("analytic_grad_v", &self.grad_v.is_some())
            .field("analytic_grad_x", &self.grad_x.is_some())
            .finish()
    }
}

fn central<F: Fn(&[f64]) -> f64>(f: F, at: &[f64], out: &mut [f64]) {
    super::central_gradient(f, at, out)
}

impl LagrangianSpec {
    pub fn new<F>(n: usize, p: usize, value: F) -> Self
    where
        F: Fn(&[f64], &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        LagrangianSpec {
            n,
            p,
            value: Arc::new(value),
            grad_v: None,
            grad_x: None,
        }
    }

    pub fn with_grad_v<G>(mut self, g: G) -> Self
    where
        G: Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.grad_v = Some(Arc::new(g));
        self
    }

    pub fn with_grad_x<G>(mut self, g: G) -> Self
    where
        G: Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.grad_x = Some(Arc::new(g));
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn value(&self, t: &[f64], x: &[f64], v: &[f64]) -> f64 {
        (self.value)(t, x, v)
    }

    pub fn grad_v(&self, t: &[f64], x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        match &self.grad_v {
            Some(g) => g(t, x, v, &mut out),
            None => central(|w| (self.value)(t, x, w), v, &mut out),
        }
        out
    }

    pub fn grad_x(&self, t: &[f64], x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        match &self.grad_x {
            Some(g) => g(t, x, v, &mut out),
            None => central(|y| (self.value)(t, y, v), x, &mut out),
        }
        out
    }

    /// Symmetrized central-difference Hessian of `L` in the velocities.
    pub fn velocity_hessian(&self, t: &[f64], x: &[f64], v: &[f64]) -> DMatrix<f64> {
        let d = v.len();
        let mut hess = DMatrix::zeros(d, d);
        let mut probe = v.to_vec();
        for j in 0..d {
            let h = 1e-5 * (1.0 + v[j].abs());
            probe[j] = v[j] + h;
            let gp = self.grad_v(t, x, &probe);
            probe[j] = v[j] - h;
            let gm = self.grad_v(t, x, &probe);
            probe[j] = v[j];
            for i in 0..d {
                hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        (&hess + hess.transpose()) * 0.5
    }

    /// Velocity Hessian positive definite at `(t, x, v)`.
    pub fn is_regular_at(&self, t: &[f64], x: &[f64], v: &[f64]) -> bool {
        self.velocity_hessian(t, x, v).cholesky().is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendrePoint {
    /// Velocities solving `dL/dv = p`.
    pub v: Vec<f64>,
    /// `p . v - L(t, x, v)`.
    pub h: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Invert `dL/dv (t, x, v) = p` by Newton's method from `v = 0` and
/// evaluate the Hamiltonian there.
pub fn legendre_transform(l: &LagrangianSpec, t: &[f64], x: &[f64], p: &[f64]) -> Result<LegendrePoint> {
    let d = l.n * l.p;
    if x.len() != l.n || p.len() != d {
        return Err(PolyhamError::ShapeMismatch(format!(
            "Legendre transform expects |x| = {}, |p| = {d}",
            l.n
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(PolyhamError::NonFinite(p.iter().position(|v| !v.is_finite()).unwrap()));
    }
    let tol = 1e-10 * (1.0 + norm(p));
    let mut v = vec![0.0; d];
    for iter in 0..=MAX_NEWTON {
        let r: Vec<f64> = l.grad_v(t, x, &v).iter().zip(p).map(|(g, q)| g - q).collect();
        let res = norm(&r);
        if res <= tol {
            let h = p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() - l.value(t, x, &v);
            return Ok(LegendrePoint {
                v,
                h,
                iterations: iter,
                residual: res,
            });
        }
        if iter == MAX_NEWTON || !res.is_finite() {
            break;
        }
        let hess = l.velocity_hessian(t, x, &v);
        let step = hess
            .lu()
            .solve(&DVector::from_vec(r))
            .ok_or_else(|| PolyhamError::SingularLagrangian("velocity Hessian is singular".into()))?;
        for (vi, s) in v.iter_mut().zip(step.iter()) {
            *vi -= s;
        }
    }
    Err(PolyhamError::SingularLagrangian(format!(
        "Newton iteration did not converge in {MAX_NEWTON} steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(n: usize, p: usize) -> LagrangianSpec {
        // L = 1/2 |v|^2 - V(x), V(x) = sum x_i^2 + x_0
        LagrangianSpec::new(n, p, |_t, x, v| {
            0.5 * v.iter().map(|a| a * a).sum::<f64>() - (x.iter().map(|a| a * a).sum::<f64>() + x[0])
        })
        .with_grad_v(|_t, _x, v, out| out.copy_from_slice(v))
    }

    #[test]
    fn identity_kinetic_term() {
        let l = free(2, 2);
        let x = [0.5, -1.0];
        let p = [1.0, 2.0, -0.5, 0.25];
        let pt = legendre_transform(&l, &[0.0, 0.0], &x, &p).unwrap();
        for (a, b) in pt.v.iter().zip(&p) {
            assert!((a - b).abs() < 1e-10);
        }
        let pot = 0.25 + 1.0 + 0.5;
        let want = 0.5 * p.iter().map(|a| a * a).sum::<f64>() + pot;
        assert!((pt.h - want).abs() < 1e-10);
        assert_eq!(pt.iterations, 1);
    }

    #[test]
    fn scalar_quadratic() {
        let l = LagrangianSpec::new(1, 1, |_t, _x, v| 0.5 * 2.0 * v[0] * v[0]).with_grad_v(|_t, _x, v, o| o[0] = 2.0 * v[0]);
        let pt = legendre_transform(&l, &[0.0], &[0.0], &[4.0]).unwrap();
        assert!((pt.v[0] - 2.0).abs() < 1e-10);
        assert!((pt.h - 4.0).abs() < 1e-10);
    }

    #[test]
    fn nonlinear_regular_lagrangian_converges() {
        // L = sum cosh(v) is strictly convex in v
        let l = LagrangianSpec::new(1, 2, |_t, _x, v| v.iter().map(|a| a.cosh()).sum())
            .with_grad_v(|_t, _x, v, o| {
                for (oi, a) in o.iter_mut().zip(v) {
                    *oi = a.sinh();
                }
            });
        let pt = legendre_transform(&l, &[0.0, 0.0], &[0.0], &[3.0, -1.5]).unwrap();
        assert!((pt.v[0] - 3.0f64.asinh()).abs() < 1e-9);
        assert!((pt.v[1] - (-1.5f64).asinh()).abs() < 1e-9);
        assert!(l.is_regular_at(&[0.0, 0.0], &[0.0], &pt.v));
    }

    #[test]
    fn singular_lagrangian_is_reported() {
        // L linear in v: dL/dv = 1 can never equal 3
        let l = LagrangianSpec::new(1, 1, |_t, _x, v| v[0]);
        assert!(matches!(
            legendre_transform(&l, &[0.0], &[0.0], &[3.0]),
            Err(PolyhamError::SingularLagrangian(_))
        ));
        assert!(!l.is_regular_at(&[0.0], &[0.0], &[0.0]));
    }
}
