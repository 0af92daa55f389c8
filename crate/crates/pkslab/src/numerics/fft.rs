//! Cached 2D complex FFTs on square grids.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

struct PlanPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plan_cache() -> &'static Mutex<HashMap<usize, Arc<PlanPair>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PlanPair>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn plans(n: usize) -> Arc<PlanPair> {
    let mut cache = plan_cache().lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(PlanPair {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

fn transform_both_axes(a: &mut Array2<Complex64>, fft: &Arc<dyn Fft<f64>>) {
    let n = a.nrows();
    for mut row in a.rows_mut() {
        let slice = row.as_slice_mut().expect("contiguous row");
        fft.process(slice);
    }
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..a.ncols() {
        for i in 0..n {
            scratch[i] = a[[i, j]];
        }
        fft.process(&mut scratch);
        for i in 0..n {
            a[[i, j]] = scratch[i];
        }
    }
}

/// In-place forward 2D FFT (no normalization).
pub fn fft2(a: &mut Array2<Complex64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square grid expected");
    let p = plans(n);
    transform_both_axes(a, &p.forward);
}

/// In-place inverse 2D FFT with 1/n^2 normalization.
pub fn ifft2(a: &mut Array2<Complex64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square grid expected");
    let p = plans(n);
    transform_both_axes(a, &p.inverse);
    let scale = 1.0 / (n * n) as f64;
    a.mapv_inplace(|z| z * scale);
}

/// Signed integer frequency for index `i` on an `n`-point periodic grid.
pub fn signed_freq(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Angular wavenumber for index `i` on an `n`-point grid of period `period`.
pub fn wavenumber(i: usize, n: usize, period: f64) -> f64 {
    2.0 * std::f64::consts::PI * signed_freq(i, n) as f64 / period
}
