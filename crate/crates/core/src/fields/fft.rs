//! Multi-dimensional FFT over the row-major `N_1 x ... x N_p x m` layout.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized in-place transform along every spatial axis. Component
/// index `m` is innermost and is not transformed.
pub(crate) fn transform(data: &mut [Complex64], shape: &[usize], m: usize, direction: FftDirection) {
    let total: usize = shape.iter().product::<usize>() * m;
    debug_assert_eq!(data.len(), total);

    for (axis, &len) in shape.iter().enumerate() {
        let stride: usize = shape[axis + 1..].iter().product::<usize>() * m;
        let outer: usize = shape[..axis].iter().product();
        let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction));
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

        // Gather all `stride` lines of one outer block, transform them in a
        // single batched call, scatter back.
        let mut lines = vec![Complex64::default(); len * stride];
        for o in 0..outer {
            let base = o * len * stride;
            for s in 0..stride {
                for j in 0..len {
                    lines[s * len + j] = data[base + j * stride + s];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for s in 0..stride {
                for j in 0..len {
                    data[base + j * stride + s] = lines[s * len + j];
                }
            }
        }
    }
}
