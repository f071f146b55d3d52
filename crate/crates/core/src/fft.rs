//! Multi-dimensional complex FFTs over row-major arrays.
//!
//! Forward transforms are normalized by `1/N` so that coefficients are amplitudes:
//! `f(x) = sum_k c_k e^{i k x}`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

const PAR_MIN: usize = 1 << 14;

fn transform_axis(data: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool) {
    let len = shape[axis];
    if len == 1 {
        return;
    }
    let stride: usize = shape[axis + 1..].iter().product();
    let block = len * stride;
    if stride == 1 {
        let run = |chunk: &mut [Complex64]| {
            let fft = plan(len, inverse);
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(chunk, &mut scratch);
        };
        if data.len() >= PAR_MIN {
            let rows_per = (PAR_MIN / len).max(1) * len;
            data.par_chunks_mut(rows_per).for_each(run);
        } else {
            run(data);
        }
        return;
    }
    let run = |chunk: &mut [Complex64]| {
        let fft = plan(len, inverse);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut lines = vec![Complex64::default(); block];
        for s in 0..stride {
            for k in 0..len {
                lines[s * len + k] = chunk[k * stride + s];
            }
        }
        fft.process_with_scratch(&mut lines, &mut scratch);
        for s in 0..stride {
            for k in 0..len {
                chunk[k * stride + s] = lines[s * len + k];
            }
        }
    };
    if data.len() >= PAR_MIN && data.len() / block > 1 {
        data.par_chunks_mut(block).for_each(run);
    } else {
        data.chunks_mut(block).for_each(run);
    }
}

/// Forward transform along `axes`, normalized by the product of their lengths.
pub fn forward(data: &mut [Complex64], shape: &[usize], axes: &[usize]) {
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    let mut n = 1usize;
    for &a in axes {
        transform_axis(data, shape, a, false);
        n *= shape[a];
    }
    let s = 1.0 / n as f64;
    data.iter_mut().for_each(|c| *c *= s);
}

/// Unnormalized inverse transform along `axes`.
pub fn inverse(data: &mut [Complex64], shape: &[usize], axes: &[usize]) {
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    for &a in axes {
        transform_axis(data, shape, a, true);
    }
}

pub fn all_axes(shape: &[usize]) -> Vec<usize> {
    (0..shape.len()).collect()
}

/// Forward transform of real samples along every axis.
pub fn forward_real(samples: &[f64], shape: &[usize]) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    forward(&mut c, shape, &all_axes(shape));
    c
}

/// Inverse transform along every axis, keeping the real part.
pub fn inverse_real(coef: &[Complex64], shape: &[usize]) -> Vec<f64> {
    let mut c = coef.to_vec();
    inverse(&mut c, shape, &all_axes(shape));
    c.into_iter().map(|z| z.re).collect()
}
