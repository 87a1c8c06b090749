//! Multiply-periodic vector fields on the period parallelepiped
//! `[0,T^1] x ... x [0,T^p]`.
//!
//! Fields are stored either as samples on the uniform periodic grid
//! ([`GridField`]) or as multi-index Fourier coefficients ([`SpectralField`]).
//! The grid never contains the right endpoint of an axis, so equality of the
//! field on opposite faces of the parallelepiped holds by construction.
//!
//! Storage is row-major over the axes (axis 0 slowest) with the component
//! index innermost. Spectral coefficients use the same layout, each axis in
//! FFT order: slot `j` holds wavenumber `j` for `j <= N/2` and `j - N`
//! otherwise. The Nyquist slot `N/2` stands for both `+N/2` and `-N/2`; its
//! derivative symbol is taken to be zero so that differentiation maps real
//! fields to real fields.

mod fft;
pub mod mthf;
pub mod random;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::error::{PolyhamError, Result};

/// Largest supported number of independent times.
pub const MAX_TIMES: usize = 4;

/// Relative tolerance used when deciding whether coefficients are Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRepr", into = "DomainRepr")]
pub struct PeriodicDomain {
    periods: Vec<f64>,
    resolution: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainRepr {
    periods: Vec<f64>,
    resolution: Vec<usize>,
}

impl TryFrom<DomainRepr> for PeriodicDomain {
    type Error = PolyhamError;

    fn try_from(r: DomainRepr) -> Result<Self> {
        PeriodicDomain::new(r.periods, r.resolution)
    }
}

impl From<PeriodicDomain> for DomainRepr {
    fn from(d: PeriodicDomain) -> Self {
        DomainRepr {
            periods: d.periods,
            resolution: d.resolution,
        }
    }
}

impl PeriodicDomain {
    pub fn new(periods: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        if periods.is_empty() || periods.len() > MAX_TIMES {
            return Err(PolyhamError::InvalidDomain(format!(
                "number of times must be in 1..={MAX_TIMES}, got {}",
                periods.len()
            )));
        }
        if periods.len() != resolution.len() {
            return Err(PolyhamError::InvalidDomain(format!(
                "{} periods but {} resolutions",
                periods.len(),
                resolution.len()
            )));
        }
        if let Some(t) = periods.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(PolyhamError::InvalidDomain(format!(
                "periods must be finite and positive, got {t}"
            )));
        }
        if let Some(n) = resolution.iter().find(|&&n| n < 2 || n % 2 != 0) {
            return Err(PolyhamError::InvalidDomain(format!(
                "resolutions must be even and >= 2, got {n}"
            )));
        }
        Ok(PeriodicDomain {
            periods,
            resolution,
        })
    }

    /// Same number of samples `n` along every axis.
    pub fn uniform(periods: Vec<f64>, n: usize) -> Result<Self> {
        let resolution = vec![n; periods.len()];
        Self::new(periods, resolution)
    }

    pub fn p(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn num_points(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.periods.iter().product()
    }

    pub fn max_period(&self) -> f64 {
        self.periods.iter().cloned().fold(f64::MIN, f64::max)
    }

    /// Quadrature weight of one grid cell, `prod T/N`.
    pub fn cell_volume(&self) -> f64 {
        self.periods
            .iter()
            .zip(&self.resolution)
            .map(|(t, &n)| t / n as f64)
            .product()
    }

    /// Upper end of the admissible growth constant, `pi / (sqrt(p) max T)`.
    pub fn growth_window(&self) -> f64 {
        PI / ((self.p() as f64).sqrt() * self.max_period())
    }

    /// Smallest nonzero angular frequency `2 pi / max T` resolved by the grid.
    pub fn lowest_frequency(&self) -> f64 {
        2.0 * PI / self.max_period()
    }

    pub fn multi_index_into(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.p()).rev() {
            let n = self.resolution[axis];
            out[axis] = flat % n;
            flat /= n;
        }
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.p()];
        self.multi_index_into(flat, &mut out);
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&j, &n)| acc * n + j)
    }

    /// Coordinates `t^a = j_a T^a / N_a` of grid point `flat`.
    pub fn point_into(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for axis in (0..self.p()).rev() {
            let n = self.resolution[axis];
            out[axis] = (rest % n) as f64 * self.periods[axis] / n as f64;
            rest /= n;
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        self.point_into(flat, &mut out);
        out
    }

    /// Signed wavenumber stored in FFT slot `j` of `axis`.
    pub fn wavenumber(&self, axis: usize, j: usize) -> i64 {
        let n = self.resolution[axis];
        if j <= n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    pub fn is_nyquist(&self, axis: usize, j: usize) -> bool {
        2 * j == self.resolution[axis]
    }

    /// Real factor `theta` such that d/dt^axis acts on slot `j` as `i*theta`.
    /// Zero on the Nyquist slot.
    pub fn derivative_symbol(&self, axis: usize, j: usize) -> f64 {
        if self.is_nyquist(axis, j) {
            0.0
        } else {
            2.0 * PI * self.wavenumber(axis, j) as f64 / self.periods[axis]
        }
    }

    /// FFT slot of wavenumber `k`, accepting `-N/2..=N/2` on every axis.
    pub fn mode_slot(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.p() {
            return None;
        }
        let mut flat = 0;
        for (axis, &ka) in k.iter().enumerate() {
            let n = self.resolution[axis] as i64;
            if ka.abs() > n / 2 {
                return None;
            }
            flat = flat * n as usize + ka.rem_euclid(n) as usize;
        }
        Some(flat)
    }

    /// Slot holding `-k` when `flat` holds `k`.
    pub fn negated_slot(&self, flat: usize) -> usize {
        let mut idx = self.multi_index(flat);
        for (axis, j) in idx.iter_mut().enumerate() {
            let n = self.resolution[axis];
            *j = (n - *j) % n;
        }
        self.flat_index(&idx)
    }

    pub fn with_resolution(&self, resolution: Vec<usize>) -> Result<Self> {
        Self::new(self.periods.clone(), resolution)
    }

    pub(crate) fn same_as(&self, other: &PeriodicDomain, what: &str) -> Result<()> {
        if self != other {
            return Err(PolyhamError::ShapeMismatch(format!(
                "{what}: domains differ ({:?}/{:?} vs {:?}/{:?})",
                self.periods, self.resolution, other.periods, other.resolution
            )));
        }
        Ok(())
    }
}

/// Samples of a field `T_0 -> R^m` on the periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    domain: PeriodicDomain,
    m: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(domain: PeriodicDomain, m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(PolyhamError::ShapeMismatch("field needs m >= 1".into()));
        }
        let expected = domain.num_points() * m;
        if values.len() != expected {
            return Err(PolyhamError::ShapeMismatch(format!(
                "expected {expected} samples, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PolyhamError::NonFinite(i));
        }
        Ok(GridField { domain, m, values })
    }

    pub fn zeros(domain: PeriodicDomain, m: usize) -> Self {
        assert!(m > 0, "field needs m >= 1");
        let values = vec![0.0; domain.num_points() * m];
        GridField { domain, m, values }
    }

    pub fn constant(domain: PeriodicDomain, value: &[f64]) -> Self {
        assert!(!value.is_empty(), "field needs m >= 1");
        let values = value
            .iter()
            .copied()
            .cycle()
            .take(domain.num_points() * value.len())
            .collect();
        GridField {
            domain,
            m: value.len(),
            values,
        }
    }

    /// Sample `f(t, out)` at every grid point.
    pub fn from_fn<F>(domain: PeriodicDomain, m: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let npts = domain.num_points();
        let mut values = vec![0.0; npts * m];
        let mut t = vec![0.0; domain.p()];
        for (pt, out) in values.chunks_exact_mut(m).enumerate() {
            domain.point_into(pt, &mut t);
            f(&t, out);
        }
        Self::new(domain, m, values)
    }

    pub fn domain(&self) -> &PeriodicDomain {
        &self.domain
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn num_points(&self) -> usize {
        self.domain.num_points()
    }

    /// Components at grid point `pt`.
    pub fn at(&self, pt: usize) -> &[f64] {
        &self.values[pt * self.m..(pt + 1) * self.m]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.m)
    }

    pub fn check_same_shape(&self, other: &GridField) -> Result<()> {
        self.domain.same_as(&other.domain, "grid fields")?;
        if self.m != other.m {
            return Err(PolyhamError::ShapeMismatch(format!(
                "component counts differ: {} vs {}",
                self.m, other.m
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> GridField {
        GridField {
            domain: self.domain.clone(),
            m: self.m,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &GridField) -> Result<GridField> {
        self.check_same_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        GridField::new(self.domain.clone(), self.m, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Trigonometric interpolation onto a grid at least as fine on every axis.
    pub fn resample(&self, resolution: Vec<usize>) -> Result<GridField> {
        let target = self.domain.with_resolution(resolution)?;
        if target
            .resolution()
            .iter()
            .zip(self.domain.resolution())
            .any(|(new, old)| new < old)
        {
            return Err(PolyhamError::InvalidParameter(
                "resample only refines the grid".into(),
            ));
        }
        let src = dft(self);
        let mut dst = SpectralField::zeros(target.clone(), self.m, true);
        let p = self.domain.p();
        let mut idx = vec![0usize; p];
        for slot in 0..self.domain.num_points() {
            self.domain.multi_index_into(slot, &mut idx);
            // A Nyquist coefficient splits evenly between +N/2 and -N/2 once
            // the finer grid resolves both.
            let mut targets: Vec<(Vec<i64>, f64)> = vec![(Vec::with_capacity(p), 1.0)];
            for (axis, &j) in idx.iter().enumerate() {
                let k = self.domain.wavenumber(axis, j);
                let split = self.domain.is_nyquist(axis, j)
                    && target.resolution()[axis] > self.domain.resolution()[axis];
                let mut next = Vec::with_capacity(targets.len() * 2);
                for (ks, w) in targets {
                    if split {
                        let mut a = ks.clone();
                        a.push(k);
                        next.push((a, w * 0.5));
                        let mut b = ks;
                        b.push(-k);
                        next.push((b, w * 0.5));
                    } else {
                        let mut a = ks;
                        a.push(k);
                        next.push((a, w));
                    }
                }
                targets = next;
            }
            let c = src.slot(slot).to_vec();
            for (k, w) in targets {
                let dslot = target.mode_slot(&k).expect("refined grid holds every source mode");
                for (d, s) in dst.slot_mut(dslot).iter_mut().zip(&c) {
                    *d += s * w;
                }
            }
        }
        idft(&dst)
    }
}

/// Pointwise gradient `d u^i / d t^a` on the grid.
///
/// Layout: `values[(pt * m + i) * p + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetField {
    domain: PeriodicDomain,
    m: usize,
    values: Vec<f64>,
}

impl JetField {
    pub fn new(domain: PeriodicDomain, m: usize, values: Vec<f64>) -> Result<Self> {
        let expected = domain.num_points() * m * domain.p();
        if m == 0 || values.len() != expected {
            return Err(PolyhamError::ShapeMismatch(format!(
                "jet expects {expected} entries with m >= 1, got {} (m = {m})",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PolyhamError::NonFinite(i));
        }
        Ok(JetField { domain, m, values })
    }

    pub fn zeros(domain: PeriodicDomain, m: usize) -> Self {
        let values = vec![0.0; domain.num_points() * m * domain.p()];
        JetField { domain, m, values }
    }

    pub fn domain(&self) -> &PeriodicDomain {
        &self.domain
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.domain.p()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, pt: usize, i: usize, alpha: usize) -> f64 {
        self.values[(pt * self.m + i) * self.p() + alpha]
    }

    /// The `m * p` jet entries at grid point `pt`.
    pub fn at(&self, pt: usize) -> &[f64] {
        let w = self.m * self.p();
        &self.values[pt * w..(pt + 1) * w]
    }

    pub fn check_same_shape(&self, other: &JetField) -> Result<()> {
        self.domain.same_as(&other.domain, "jet fields")?;
        if self.m != other.m {
            return Err(PolyhamError::ShapeMismatch(format!(
                "jet component counts differ: {} vs {}",
                self.m, other.m
            )));
        }
        Ok(())
    }
}

/// Multi-index Fourier coefficients `C_k` of a field, normalized so that
/// `u(t) = sum_k C_k exp(i sum_a 2 pi k_a t^a / T^a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    domain: PeriodicDomain,
    m: usize,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl SpectralField {
    pub fn new(domain: PeriodicDomain, m: usize, coeffs: Vec<Complex64>, real: bool) -> Result<Self> {
        let expected = domain.num_points() * m;
        if m == 0 || coeffs.len() != expected {
            return Err(PolyhamError::ShapeMismatch(format!(
                "expected {expected} coefficients with m >= 1, got {}",
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(PolyhamError::NonFinite(i));
        }
        Ok(SpectralField {
            domain,
            m,
            coeffs,
            real,
        })
    }

    pub fn zeros(domain: PeriodicDomain, m: usize, real: bool) -> Self {
        let coeffs = vec![Complex64::default(); domain.num_points() * m];
        SpectralField {
            domain,
            m,
            coeffs,
            real,
        }
    }

    pub fn domain(&self) -> &PeriodicDomain {
        &self.domain
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn slot(&self, slot: usize) -> &[Complex64] {
        &self.coeffs[slot * self.m..(slot + 1) * self.m]
    }

    pub fn slot_mut(&mut self, slot: usize) -> &mut [Complex64] {
        &mut self.coeffs[slot * self.m..(slot + 1) * self.m]
    }

    /// Coefficient vector of wavenumber `k`, if resolved.
    pub fn coeff(&self, k: &[i64]) -> Option<&[Complex64]> {
        self.domain.mode_slot(k).map(|s| self.slot(s))
    }

    pub fn coeff_mut(&mut self, k: &[i64]) -> Option<&mut [Complex64]> {
        self.domain.mode_slot(k).map(move |s| self.slot_mut(s))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.norm()))
    }

    /// `max |C_k - conj(C_{-k})|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for slot in 0..self.domain.num_points() {
            let neg = self.domain.negated_slot(slot);
            for (a, b) in self.slot(slot).iter().zip(self.slot(neg)) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }

    /// Project onto Hermitian-symmetric coefficients. Self-conjugate slots,
    /// including Nyquist ones, become real.
    pub fn symmetrize(&mut self) {
        let m = self.m;
        for slot in 0..self.domain.num_points() {
            let neg = self.domain.negated_slot(slot);
            if neg < slot {
                continue;
            }
            for c in 0..m {
                let a = self.coeffs[slot * m + c];
                let b = self.coeffs[neg * m + c];
                let s = (a + b.conj()) * 0.5;
                self.coeffs[slot * m + c] = s;
                self.coeffs[neg * m + c] = s.conj();
            }
        }
        self.real = true;
    }

    /// Multiply every slot by a scalar symbol depending on its FFT multi-index.
    pub(crate) fn map_symbol<F>(&self, mut symbol: F) -> SpectralField
    where
        F: FnMut(&[usize]) -> Complex64,
    {
        let mut out = self.clone();
        let mut idx = vec![0; self.domain.p()];
        for slot in 0..self.domain.num_points() {
            self.domain.multi_index_into(slot, &mut idx);
            let s = symbol(&idx);
            for c in out.slot_mut(slot) {
                *c *= s;
            }
        }
        out
    }
}

/// Fourier coefficients of the trigonometric interpolant of `f`.
pub fn dft(f: &GridField) -> SpectralField {
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::transform(&mut data, f.domain.resolution(), f.m, FftDirection::Forward);
    let scale = 1.0 / f.domain.num_points() as f64;
    for c in &mut data {
        *c *= scale;
    }
    let mut out = SpectralField {
        domain: f.domain.clone(),
        m: f.m,
        coeffs: data,
        real: true,
    };
    out.symmetrize();
    out
}

/// Complex samples of the series at the grid points.
pub fn idft_complex(spec: &SpectralField) -> Vec<Complex64> {
    let mut data = spec.coeffs.clone();
    fft::transform(&mut data, spec.domain.resolution(), spec.m, FftDirection::Inverse);
    data
}

/// Real samples of the series; the coefficients must be Hermitian.
pub fn idft(spec: &SpectralField) -> Result<GridField> {
    let defect = spec.hermitian_defect();
    if defect > HERMITIAN_TOL * spec.max_abs() {
        return Err(PolyhamError::NotHermitian(defect));
    }
    let values = idft_complex(spec).into_iter().map(|c| c.re).collect();
    GridField::new(spec.domain.clone(), spec.m, values)
}

/// Periodic rectangle rule, `prod(T/N) * sum of samples`, per component.
pub fn integrate(f: &GridField) -> Vec<f64> {
    let mut acc = vec![0.0; f.m];
    for pt in f.points() {
        for (a, v) in acc.iter_mut().zip(pt) {
            *a += v;
        }
    }
    let w = f.domain.cell_volume();
    acc.iter_mut().for_each(|a| *a *= w);
    acc
}

/// Spectral derivative along every axis.
pub fn weak_gradient(f: &GridField) -> JetField {
    let spec = dft(f);
    let domain = &f.domain;
    let (m, p) = (f.m, domain.p());
    let mut jet = vec![0.0; domain.num_points() * m * p];
    for alpha in 0..p {
        let d = spec.map_symbol(|idx| Complex64::new(0.0, domain.derivative_symbol(alpha, idx[alpha])));
        let samples = idft_complex(&d);
        for (flat, c) in samples.iter().enumerate() {
            jet[flat * p + alpha] = c.re;
        }
    }
    JetField {
        domain: domain.clone(),
        m,
        values: jet,
    }
}

/// `int (u, v) dt` with the Euclidean pairing of components.
pub fn l2_inner(u: &GridField, v: &GridField) -> Result<f64> {
    u.check_same_shape(v)?;
    let s: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok(s * u.domain.cell_volume())
}

pub fn l2_norm(u: &GridField) -> f64 {
    let s: f64 = u.values.iter().map(|a| a * a).sum();
    (s * u.domain.cell_volume()).sqrt()
}

/// `int delta_ij delta^ab a^i_a b^j_b dt`.
pub fn jet_inner(a: &JetField, b: &JetField) -> Result<f64> {
    a.check_same_shape(b)?;
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(s * a.domain.cell_volume())
}

/// `int |du/dt|^2 dt`.
pub fn gradient_energy(u: &GridField) -> f64 {
    spectral_gradient_energy(&dft(u))
}

/// `vol * sum_k |theta_k|^2 |C_k|^2`, equal to the grid sum of the squared
/// spectral derivative by discrete Parseval.
pub fn spectral_gradient_energy(spec: &SpectralField) -> f64 {
    let d = &spec.domain;
    let mut idx = vec![0; d.p()];
    let mut s = 0.0;
    for slot in 0..d.num_points() {
        d.multi_index_into(slot, &mut idx);
        let th2: f64 = idx.iter().enumerate().map(|(a, &j)| d.derivative_symbol(a, j).powi(2)).sum();
        if th2 > 0.0 {
            s += th2 * spec.slot(slot).iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
    }
    s * d.volume()
}

/// Scalar product of H^1_T: the L^2 product plus the L^2 product of gradients.
pub fn h1_inner(u: &GridField, v: &GridField) -> Result<f64> {
    let base = l2_inner(u, v)?;
    Ok(base + jet_inner(&weak_gradient(u), &weak_gradient(v))?)
}

pub fn h1_norm(u: &GridField) -> f64 {
    (l2_norm(u).powi(2) + gradient_energy(u)).sqrt()
}

/// Remove the mean value so that the integral of every component vanishes.
pub fn mean_zero_project(u: &GridField) -> GridField {
    let vol = u.domain.volume();
    let mean: Vec<f64> = integrate(u).into_iter().map(|s| s / vol).collect();
    let values = u
        .values
        .chunks_exact(u.m)
        .flat_map(|pt| pt.iter().zip(&mean).map(|(v, c)| v - c))
        .collect();
    GridField {
        domain: u.domain.clone(),
        m: u.m,
        values,
    }
}
