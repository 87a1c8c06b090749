//! Phase-space layout `u = (x^j, p_i^a)` and the polysymplectic operator.
//!
//! Components `0..n` hold the positions `x^j`; the momenta `p_i^a` follow
//! with `i` outer and `a` inner, i.e. `p_i^a` sits at `n + i*p + a`.
//!
//! The operator `delta (x) J` sends a jet `du/dt` to
//! `(sum_a dp_j^a/dt^a, -dx^j/dt^b)`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PolyhamError, Result};
use crate::fields::mthf::LayoutTag;
use crate::fields::{dft, idft, l2_inner, weak_gradient, GridField, JetField, SpectralField};

/// Jets with squared norm below this are left out of ratio statistics.
pub const ZERO_JET_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseLayout {
    n: usize,
    p: usize,
}

impl PhaseLayout {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(PolyhamError::LayoutMismatch(format!(
                "layout needs n, p >= 1 (got n = {n}, p = {p})"
            )));
        }
        Ok(PhaseLayout { n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Total components `n (p + 1)`.
    pub fn m(&self) -> usize {
        self.n * (self.p + 1)
    }

    pub fn position(&self, j: usize) -> usize {
        debug_assert!(j < self.n);
        j
    }

    pub fn momentum(&self, i: usize, alpha: usize) -> usize {
        debug_assert!(i < self.n && alpha < self.p);
        self.n + i * self.p + alpha
    }

    pub fn tag(&self) -> LayoutTag {
        LayoutTag {
            n: self.n,
            p: self.p,
        }
    }

    pub fn check_field(&self, u: &GridField) -> Result<()> {
        if u.m() != self.m() || u.domain().p() != self.p {
            return Err(PolyhamError::LayoutMismatch(format!(
                "field has m = {} on a {}-time domain, layout expects m = {} with p = {}",
                u.m(),
                u.domain().p(),
                self.m(),
                self.p
            )));
        }
        Ok(())
    }

    pub fn check_jet(&self, jet: &JetField) -> Result<()> {
        if jet.m() != self.m() || jet.p() != self.p {
            return Err(PolyhamError::LayoutMismatch(format!(
                "jet has m = {}, p = {}; layout expects m = {}, p = {}",
                jet.m(),
                jet.p(),
                self.m(),
                self.p
            )));
        }
        Ok(())
    }

    /// Apply the operator to the `m * p` jet entries of one point.
    pub fn apply_point(&self, g: &[f64], out: &mut [f64]) {
        let (n, p) = (self.n, self.p);
        debug_assert_eq!(g.len(), self.m() * p);
        for j in 0..n {
            out[j] = (0..p).map(|a| g[self.momentum(j, a) * p + a]).sum();
        }
        for j in 0..n {
            for b in 0..p {
                out[self.momentum(j, b)] = -g[j * p + b];
            }
        }
    }

    /// `|delta(x)J g|^2 / |g|^2`, or `None` for a negligible jet.
    ///
    /// Both norms are accumulated block by block so that for `p = 1`, where
    /// the operator only permutes and negates entries, numerator and
    /// denominator are the same floating-point sum.
    pub fn jet_ratio(&self, g: &[f64]) -> Option<f64> {
        let (n, p) = (self.n, self.p);
        let x_sq: f64 = g[..n * p].iter().map(|v| v * v).sum();
        let p_sq: f64 = g[n * p..].iter().map(|v| v * v).sum();
        let denom = x_sq + p_sq;
        if denom < ZERO_JET_THRESHOLD {
            return None;
        }
        let div_sq: f64 = (0..n)
            .map(|j| {
                let d: f64 = (0..p).map(|a| g[self.momentum(j, a) * p + a]).sum();
                d * d
            })
            .sum();
        Some((div_sq + x_sq) / denom)
    }
}

/// `delta(x)J` applied pointwise to a jet field.
pub fn apply_delta_j(layout: &PhaseLayout, jet: &JetField) -> Result<GridField> {
    layout.check_jet(jet)?;
    let m = layout.m();
    let npts = jet.domain().num_points();
    let mut values = vec![0.0; npts * m];
    for (pt, out) in values.chunks_exact_mut(m).enumerate() {
        layout.apply_point(jet.at(pt), out);
    }
    GridField::new(jet.domain().clone(), m, values)
}

/// `delta(x)J du/dt` for a phase field `u`.
pub fn polysymplectic_derivative(layout: &PhaseLayout, u: &GridField) -> Result<GridField> {
    layout.check_field(u)?;
    apply_delta_j(layout, &weak_gradient(u))
}

/// The square of `delta(x)J d/dt`, by composing the first-order operator.
pub fn operator_square(layout: &PhaseLayout, u: &GridField) -> Result<GridField> {
    let once = polysymplectic_derivative(layout, u)?;
    polysymplectic_derivative(layout, &once)
}

/// The square written out as second derivatives:
/// `(-Laplacian x^i, -d^2 p_i^c / dt^b dt^c)`.
pub fn operator_square_explicit(layout: &PhaseLayout, u: &GridField) -> Result<GridField> {
    layout.check_field(u)?;
    let domain = u.domain();
    let (n, p, m) = (layout.n(), layout.p(), layout.m());
    let spec = dft(u);
    let mut out = spec.clone();
    let mut idx = vec![0usize; p];
    let mut theta = vec![0.0; p];
    for slot in 0..domain.num_points() {
        domain.multi_index_into(slot, &mut idx);
        for (a, th) in theta.iter_mut().enumerate() {
            *th = domain.derivative_symbol(a, idx[a]);
        }
        let src = spec.slot(slot);
        let dst = out.slot_mut(slot);
        let lap: f64 = theta.iter().map(|t| t * t).sum();
        for i in 0..n {
            dst[i] = src[i] * lap;
            let div: Complex64 = (0..p).map(|c| src[layout.momentum(i, c)] * theta[c]).sum();
            for b in 0..p {
                dst[layout.momentum(i, b)] = div * theta[b];
            }
        }
        debug_assert_eq!(dst.len(), m);
    }
    idft(&out)
}

/// `int (delta(x)J du/dt, v) dt`.
pub fn bilinear_form(layout: &PhaseLayout, u: &GridField, v: &GridField) -> Result<f64> {
    layout.check_field(v)?;
    l2_inner(&polysymplectic_derivative(layout, u)?, v)
}

/// `int (delta(x)J du/dt, u) dt`.
pub fn quadratic_form(layout: &PhaseLayout, u: &GridField) -> Result<f64> {
    bilinear_form(layout, u, u)
}

/// [`quadratic_form`] from Fourier coefficients:
/// `vol * sum_k C_k^* A_k C_k`, where `A_k` is the Hermitian symbol of
/// `delta(x)J d/dt` on mode `k`.
pub fn quadratic_form_spectral(layout: &PhaseLayout, spec: &SpectralField) -> Result<f64> {
    if spec.m() != layout.m() {
        return Err(PolyhamError::LayoutMismatch(format!(
            "spectrum has m = {}, layout expects {}",
            spec.m(),
            layout.m()
        )));
    }
    let d = spec.domain();
    let p = layout.p();
    let mut idx = vec![0usize; p];
    let mut theta = vec![0.0; p];
    let mut s = 0.0;
    for slot in 0..d.num_points() {
        d.multi_index_into(slot, &mut idx);
        for (a, th) in theta.iter_mut().enumerate() {
            *th = d.derivative_symbol(a, idx[a]);
        }
        let c = spec.slot(slot);
        for j in 0..layout.n() {
            let x = c[layout.position(j)];
            for (a, &th) in theta.iter().enumerate() {
                // conj(x) (i th p) + conj(p) (-i th x) = -2 th Im(conj(x) p)
                s -= 2.0 * th * (x.conj() * c[layout.momentum(j, a)]).im;
            }
        }
    }
    Ok(s * d.volume())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseBound {
    pub max_ratio: f64,
    pub points_checked: usize,
    pub points_skipped: usize,
}

/// Largest `|delta(x)J g|^2 / |g|^2` over the grid; never exceeds `p`.
pub fn pointwise_bound_check(layout: &PhaseLayout, jet: &JetField) -> Result<PointwiseBound> {
    layout.check_jet(jet)?;
    let mut report = PointwiseBound {
        max_ratio: 0.0,
        points_checked: 0,
        points_skipped: 0,
    };
    for pt in 0..jet.domain().num_points() {
        match layout.jet_ratio(jet.at(pt)) {
            Some(r) => {
                report.points_checked += 1;
                report.max_ratio = report.max_ratio.max(r);
            }
            None => report.points_skipped += 1,
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::fields::random::{band_limited, substream};
    use crate::fields::PeriodicDomain;

    fn circle() -> PeriodicDomain {
        PeriodicDomain::uniform(vec![2.0 * PI], 32).unwrap()
    }

    fn rotating(flip: bool) -> GridField {
        GridField::from_fn(circle(), 2, |t, o| {
            let (c, s) = (t[0].cos(), t[0].sin());
            if flip {
                o.copy_from_slice(&[s, c]);
            } else {
                o.copy_from_slice(&[c, s]);
            }
        })
        .unwrap()
    }

    #[test]
    fn layout_indexing() {
        let l = PhaseLayout::new(2, 3).unwrap();
        assert_eq!(l.m(), 8);
        let mut seen: Vec<usize> = (0..2).map(|j| l.position(j)).collect();
        for i in 0..2 {
            for a in 0..3 {
                seen.push(l.momentum(i, a));
            }
        }
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        assert!(PhaseLayout::new(0, 1).is_err());
    }

    #[test]
    fn zero_and_contraction_examples() {
        let d = PeriodicDomain::uniform(vec![1.0, 1.0], 4).unwrap();
        let l = PhaseLayout::new(1, 2).unwrap();
        let z = apply_delta_j(&l, &JetField::zeros(d.clone(), 3)).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));

        // dp^1/dt^1 = 2, dp^2/dt^2 = 3
        let mut g = vec![0.0; 6];
        g[l.momentum(0, 0) * 2] = 2.0;
        g[l.momentum(0, 1) * 2 + 1] = 3.0;
        let mut out = vec![0.0; 3];
        l.apply_point(&g, &mut out);
        assert_eq!(out, vec![5.0, 0.0, 0.0]);
    }

    #[test]
    fn rotating_mode_is_fixed_by_operator() {
        let l = PhaseLayout::new(1, 1).unwrap();
        let u = rotating(false);
        let du = polysymplectic_derivative(&l, &u).unwrap();
        assert!(du.add_scaled(-1.0, &u).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn square_of_sine_position() {
        let l = PhaseLayout::new(1, 1).unwrap();
        let u = GridField::from_fn(circle(), 2, |t, o| o.copy_from_slice(&[t[0].sin(), 0.0])).unwrap();
        let sq = operator_square(&l, &u).unwrap();
        let ex = operator_square_explicit(&l, &u).unwrap();
        for pt in 0..32 {
            let t = circle().point(pt)[0];
            assert!((sq.at(pt)[0] - t.sin()).abs() < 1e-13);
            assert!(sq.at(pt)[1].abs() < 1e-13);
        }
        assert!(sq.add_scaled(-1.0, &ex).unwrap().max_abs() < 1e-12);
        let c = GridField::constant(circle(), &[1.0, 2.0]);
        assert!(operator_square(&l, &c).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn square_paths_agree_on_random_fields() {
        let d = PeriodicDomain::new(vec![1.3, 2.1, 0.7], vec![8, 8, 8]).unwrap();
        let l = PhaseLayout::new(2, 3).unwrap();
        let u = band_limited(&d, l.m(), 3, false, &mut substream(11, 0));
        let a = operator_square(&l, &u).unwrap();
        let b = operator_square_explicit(&l, &u).unwrap();
        let scale = 1.0 + a.max_abs();
        assert!(a.add_scaled(-1.0, &b).unwrap().max_abs() < 1e-8 * scale);
    }

    #[test]
    fn quadratic_form_examples() {
        let l = PhaseLayout::new(1, 1).unwrap();
        assert!((quadratic_form(&l, &rotating(false)).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!((quadratic_form(&l, &rotating(true)).unwrap() + 2.0 * PI).abs() < 1e-12);
        let c = GridField::constant(circle(), &[3.0, -1.0]);
        assert!(quadratic_form(&l, &c).unwrap().abs() < 1e-14);
    }

    #[test]
    fn quadratic_form_grid_and_spectral_agree() {
        let d = PeriodicDomain::new(vec![1.0, 2.5, 4.0], vec![8, 8, 8]).unwrap();
        let l = PhaseLayout::new(2, 3).unwrap();
        for i in 0..5 {
            let u = band_limited(&d, l.m(), 3, false, &mut substream(12, i));
            let grid = quadratic_form(&l, &u).unwrap();
            let spec = quadratic_form_spectral(&l, &dft(&u)).unwrap();
            assert!((grid - spec).abs() < 1e-12 * (1.0 + grid.abs()), "{grid} {spec}");
        }
        assert!(quadratic_form_spectral(&PhaseLayout::new(1, 3).unwrap(), &dft(&band_limited(&d, 8, 2, false, &mut substream(1, 1)))).is_err());
    }

    #[test]
    fn pointwise_ratio_p1_is_exactly_one() {
        let l = PhaseLayout::new(3, 1).unwrap();
        let d = PeriodicDomain::uniform(vec![1.0], 16).unwrap();
        let u = band_limited(&d, l.m(), 6, false, &mut substream(2, 0));
        let r = pointwise_bound_check(&l, &weak_gradient(&u)).unwrap();
        assert_eq!(r.max_ratio, 1.0);
    }

    #[test]
    fn pointwise_ratio_reaches_p_on_aligned_momenta() {
        // dp^a/dt^a all equal and nothing else: |div|^2 = p^2 c^2, |g|^2 = p c^2
        let l = PhaseLayout::new(1, 2).unwrap();
        let mut g = vec![0.0; 6];
        g[l.momentum(0, 0) * 2] = 1.0;
        g[l.momentum(0, 1) * 2 + 1] = 1.0;
        assert!((l.jet_ratio(&g).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(l.jet_ratio(&[0.0; 6]), None);
    }

    #[test]
    fn mismatched_layout_is_rejected() {
        let l = PhaseLayout::new(1, 2).unwrap();
        let u = GridField::zeros(circle(), 2);
        assert!(matches!(polysymplectic_derivative(&l, &u), Err(PolyhamError::LayoutMismatch(_))));
    }
}
