use std::f64::consts::PI;

use polyham::action::{action_gradient, action_value, hamilton_residual, ActionProblem};
use polyham::fields::random::{band_limited, substream};
use polyham::fields::{dft, gradient_energy, idft, l2_norm, weak_gradient, GridField, PeriodicDomain};
use polyham::hamiltonian::{CatalogHamiltonian, ForcingTerm, SmoothConvex};
use polyham::inequalities::{qform_check, wirtinger_check};
use polyham::phase::{bilinear_form, quadratic_form, PhaseLayout};
use proptest::prelude::*;
use rustfft::num_complex::Complex64;

fn domain_strategy(max_p: usize, n: usize) -> impl Strategy<Value = PeriodicDomain> {
    (1..=max_p)
        .prop_flat_map(|p| prop::collection::vec(0.5f64..10.0, p))
        .prop_map(move |t| {
            let p = t.len();
            PeriodicDomain::uniform(t, if p == 3 { n / 2 } else { n }).unwrap()
        })
}

fn field(d: &PeriodicDomain, m: usize, bw: usize, seed: u64) -> GridField {
    band_limited(d, m, bw, false, &mut substream(seed, 0))
}

/// Direct summation `C_k = (1/N) sum_j f_j exp(-2 pi i k.j/N)`.
fn naive_dft(u: &GridField) -> Vec<Complex64> {
    let d = u.domain();
    let npts = d.num_points();
    let m = u.m();
    let mut out = vec![Complex64::default(); npts * m];
    for ks in 0..npts {
        let kidx = d.multi_index(ks);
        for js in 0..npts {
            let jidx = d.multi_index(js);
            let phase: f64 = kidx
                .iter()
                .zip(&jidx)
                .zip(d.resolution())
                .map(|((&k, &j), &n)| 2.0 * PI * (k * j) as f64 / n as f64)
                .sum();
            let w = Complex64::from_polar(1.0 / npts as f64, -phase);
            for c in 0..m {
                out[ks * m + c] += w * u.at(js)[c];
            }
        }
    }
    out
}

/// 8th-order centred difference along `axis`.
fn fd8(u: &GridField, axis: usize, comp: usize) -> Vec<f64> {
    const W: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let d = u.domain();
    let n = d.resolution()[axis];
    let h = d.periods()[axis] / n as f64;
    (0..d.num_points())
        .map(|pt| {
            let idx = d.multi_index(pt);
            let mut s = 0.0;
            for (o, w) in W.iter().enumerate() {
                let mut a = idx.clone();
                let mut b = idx.clone();
                a[axis] = (idx[axis] + o + 1) % n;
                b[axis] = (idx[axis] + n - o - 1) % n;
                s += w * (u.at(d.flat_index(&a))[comp] - u.at(d.flat_index(&b))[comp]);
            }
            s / h
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectral_round_trip(d in domain_strategy(3, 16), m in 1usize..4, seed in any::<u64>()) {
        let u = field(&d, m, 5, seed);
        let back = idft(&dft(&u)).unwrap();
        let err = back.add_scaled(-1.0, &u).unwrap().max_abs();
        prop_assert!(err <= 1e-12 * u.max_abs().max(1.0));
    }

    #[test]
    fn parseval(d in domain_strategy(3, 16), seed in any::<u64>()) {
        let u = field(&d, 2, 4, seed);
        let e: f64 = dft(&u).coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() * d.volume();
        let l2 = l2_norm(&u).powi(2);
        prop_assert!((e - l2).abs() <= 1e-12 * l2.max(1.0));
    }

    #[test]
    fn matches_naive_dft(d in domain_strategy(2, 8), seed in any::<u64>()) {
        let u = field(&d, 2, 3, seed);
        let fast = dft(&u);
        let slow = naive_dft(&u);
        let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in fast.coeffs().iter().zip(&slow) {
            prop_assert!((a - b).norm() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn gradient_matches_eighth_order_differences(t in 0.5f64..10.0, t2 in 0.5f64..10.0, seed in any::<u64>()) {
        let d = PeriodicDomain::uniform(vec![t, t2], 64).unwrap();
        let u = field(&d, 1, 3, seed);
        let jet = weak_gradient(&u);
        let scale = jet.values().iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for axis in 0..2 {
            let fd = fd8(&u, axis, 0);
            for (pt, v) in fd.iter().enumerate() {
                prop_assert!((jet.get(pt, 0, axis) - v).abs() <= 1e-6 * scale, "axis {} pt {}", axis, pt);
            }
        }
    }

    #[test]
    fn polysymplectic_form_symmetric(d in domain_strategy(3, 8), n in 1usize..3, seed in any::<u64>()) {
        let l = PhaseLayout::new(n, d.p()).unwrap();
        let u = field(&d, l.m(), 3, seed);
        let v = band_limited(&d, l.m(), 3, false, &mut substream(seed, 1));
        let a = bilinear_form(&l, &u, &v).unwrap();
        let b = bilinear_form(&l, &v, &u).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn quadratic_form_ignores_constant_shift(d in domain_strategy(3, 8), seed in any::<u64>(), c in -5.0f64..5.0) {
        let l = PhaseLayout::new(1, d.p()).unwrap();
        let u = field(&d, l.m(), 3, seed);
        let shifted = u.add_scaled(1.0, &GridField::constant(d.clone(), &vec![c; l.m()])).unwrap();
        let a = quadratic_form(&l, &u).unwrap();
        let b = quadratic_form(&l, &shifted).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn action_invariant_under_refinement(t in 0.5f64..10.0, seed in any::<u64>()) {
        let d = PeriodicDomain::uniform(vec![2.0 * PI, t], 16).unwrap();
        let l = PhaseLayout::new(1, 2).unwrap();
        let fam = CatalogHamiltonian::Quadratic { c: 0.4 };
        let u = field(&d, l.m(), 3, seed);
        let fine = u.resample(vec![32, 32]).unwrap();
        let coarse_p = ActionProblem::new(d.clone(), fam.build(&d, l).unwrap()).unwrap();
        let fine_p = ActionProblem::new(fine.domain().clone(), fam.build(fine.domain(), l).unwrap()).unwrap();
        let a = action_value(&coarse_p, &u).unwrap();
        let b = action_value(&fine_p, &fine).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn inequalities_hold_on_random_fields(d in domain_strategy(3, 16), seed in any::<u64>()) {
        let l = PhaseLayout::new(1, d.p()).unwrap();
        let u = field(&d, l.m(), 4, seed);
        prop_assert!(wirtinger_check(&u).pass);
        prop_assert!(qform_check(&l, &u).unwrap().pass);
        prop_assert!(gradient_energy(&u) >= 0.0);
    }

    #[test]
    fn gradient_is_minus_residual(d in domain_strategy(2, 16), seed in any::<u64>()) {
        let l = PhaseLayout::new(1, d.p()).unwrap();
        let h = CatalogHamiltonian::SmoothConvex(SmoothConvex {
            c: 0.3,
            kappa: 0.5,
            c0: 0.0,
            forcing: vec![ForcingTerm { k: vec![1; d.p()], cos: vec![0.5; l.m()], sin: vec![] }],
        })
        .build(&d, l)
        .unwrap();
        let p = ActionProblem::new(d.clone(), h).unwrap();
        let u = field(&d, l.m(), 4, seed);
        let g = action_gradient(&p, &u).unwrap();
        let r = hamilton_residual(&p, &u).unwrap();
        prop_assert!(l2_norm(&g.add_scaled(1.0, &r.field).unwrap()) <= 1e-9 * (1.0 + l2_norm(&u)));
    }
}
