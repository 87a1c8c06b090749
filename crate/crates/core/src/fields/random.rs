//! Seeded generators for random band-limited test fields.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use super::{idft, GridField, PeriodicDomain, SpectralField};

/// Independent, reproducible stream number `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A real field whose Fourier modes satisfy `|k_a| <= bandwidth` on every
/// axis. The bandwidth is clamped below the Nyquist index so that products of
/// two such fields are integrated exactly by the rectangle rule.
pub fn band_limited<R: Rng + ?Sized>(
    domain: &PeriodicDomain,
    m: usize,
    bandwidth: usize,
    mean_zero: bool,
    rng: &mut R,
) -> GridField {
    let p = domain.p();
    let mut spec = SpectralField::zeros(domain.clone(), m, true);
    let mut idx = vec![0usize; p];
    for slot in 0..domain.num_points() {
        domain.multi_index_into(slot, &mut idx);
        let mut k2 = 0.0;
        let mut inside = true;
        for (axis, &j) in idx.iter().enumerate() {
            let k = domain.wavenumber(axis, j);
            let limit = bandwidth.min(domain.resolution()[axis] / 2 - 1) as i64;
            if k.abs() > limit {
                inside = false;
                break;
            }
            k2 += (k * k) as f64;
        }
        if !inside || (mean_zero && slot == 0) {
            continue;
        }
        let amp = 1.0 / (1.0 + k2);
        for c in spec.slot_mut(slot) {
            *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
        }
    }
    spec.symmetrize();
    idft(&spec).expect("symmetrized coefficients are Hermitian")
}

/// Periods drawn uniformly from `[lo, hi]`.
pub fn random_periods<R: Rng + ?Sized>(p: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    (0..p).map(|_| rng.gen_range(lo..=hi)).collect()
}
