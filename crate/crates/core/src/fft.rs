//! Separable n-dimensional FFT over row-major arrays (axis 0 slowest).

use num_complex::Complex;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

use crate::Real;

/// Unnormalized in-place transform of an `m^n` array.
pub(crate) fn fft_nd<T: Real>(data: &mut [Complex<T>], n: usize, m: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), m.pow(n as u32));
    let mut planner = FftPlanner::<T>::new();
    let fft: Arc<dyn Fft<T>> = planner.plan_fft(m, direction);
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    let total = data.len();
    let mut line = vec![Complex::new(T::zero(), T::zero()); m];
    for axis in 0..n {
        let stride = m.pow((n - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(m) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * m;
        for base in (0..total).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
    }
}

pub(crate) fn forward<T: Real>(data: &mut [Complex<T>], n: usize, m: usize) {
    fft_nd(data, n, m, FftDirection::Forward)
}

pub(crate) fn inverse<T: Real>(data: &mut [Complex<T>], n: usize, m: usize) {
    fft_nd(data, n, m, FftDirection::Inverse)
}
