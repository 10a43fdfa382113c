//! Cubic 3D FFT on top of `rustfft` line transforms.
//!
//! Layout is row-major with the last axis contiguous: `idx = (i * n + j) * n + k`
//! where `i` runs along x₁, `j` along x₂ and `k` along x₃. The forward transform
//! is unnormalized; the inverse divides by n³.

use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    /// Shared plan for size `n`; plans are cached process-wide.
    pub fn shared(n: usize) -> Arc<Fft3> {
        static CACHE: OnceLock<Mutex<Vec<Arc<Fft3>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let mut plans = cache.lock().expect("fft plan cache poisoned");
        if let Some(plan) = plans.iter().find(|p| p.n == n) {
            return Arc::clone(plan);
        }
        let plan = Arc::new(Fft3::new(n));
        plans.push(Arc::clone(&plan));
        plan
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Inverse transforms of two Hermitian spectra in one complex pass.
    pub fn inverse_real_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + i * y).collect();
        self.inverse(&mut buf);
        (buf.iter().map(|z| z.re).collect(), buf.iter().map(|z| z.im).collect())
    }

    /// Forward transforms of two real arrays in one complex pass.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.forward(&mut buf);
        let len = buf.len();
        let mut out_a = vec![Complex64::default(); len];
        let mut out_b = vec![Complex64::default(); len];
        for idx in 0..len {
            let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
            let mirror = (((n - i) % n) * n + (n - j) % n) * n + (n - k) % n;
            let z = buf[idx];
            let zm = buf[mirror].conj();
            out_a[idx] = (z + zm) * 0.5;
            out_b[idx] = Complex64::new(0.0, -0.5) * (z - zm);
        }
        (out_a, out_b)
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "buffer does not match the plan size");
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        let mut tmp = vec![Complex64::default(); n * n * n];

        // x₃: rows are contiguous.
        plan.process_with_scratch(data, &mut scratch);

        // x₂: transpose each (j, k) slab, transform, transpose back.
        let slab = n * n;
        for i in 0..n {
            let block = &mut data[i * slab..(i + 1) * slab];
            let t = &mut tmp[..slab];
            transpose(block, t, n, n);
            plan.process_with_scratch(t, &mut scratch);
            transpose(t, block, n, n);
        }

        // x₁: view as n × n² and transpose the whole cube.
        transpose(data, &mut tmp, n, slab);
        plan.process_with_scratch(&mut tmp, &mut scratch);
        transpose(&tmp, data, slab, n);
    }
}

/// Out-of-place transpose of a `rows × cols` row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 16;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Signed integer wavenumber of FFT bin `m` on an `n`-point grid, in (−n/2, n/2].
pub fn signed_mode(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_recovers_input() {
        let n = 8;
        let plan = Fft3::new(n);
        let orig: Vec<Complex64> =
            (0..n * n * n).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut data = orig.clone();
        plan.forward(&mut data);
        plan.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_lands_in_expected_bin() {
        let n = 8;
        let plan = Fft3::new(n);
        let h = 2.0 * std::f64::consts::PI / n as f64;
        // exp(i (2 x₁ − x₂ + 3 x₃))
        let mut data = vec![Complex64::default(); n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let phase = (2.0 * i as f64 - j as f64 + 3.0 * k as f64) * h;
                    data[(i * n + j) * n + k] = Complex64::from_polar(1.0, phase);
                }
            }
        }
        plan.forward(&mut data);
        let target = (2 * n + (n - 1)) * n + 3;
        for (idx, v) in data.iter().enumerate() {
            if idx == target {
                assert!((v.re - (n * n * n) as f64).abs() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9, "leak at {idx}");
            }
        }
    }

    #[test]
    fn packed_real_pairs_match_separate_transforms() {
        let n = 8;
        let plan = Fft3::new(n);
        let a: Vec<f64> = (0..n * n * n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..n * n * n).map(|i| (i as f64 * 0.91).cos() + 0.3).collect();
        let (fa, fb) = plan.forward_real_pair(&a, &b);
        for (src, packed) in [(&a, &fa), (&b, &fb)] {
            let mut direct: Vec<Complex64> = src.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            plan.forward(&mut direct);
            for (x, y) in direct.iter().zip(packed.iter()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
        let (ra, rb) = plan.inverse_real_pair(&fa, &fb);
        for (x, y) in ra.iter().zip(&a).chain(rb.iter().zip(&b)) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn signed_modes() {
        assert_eq!(signed_mode(0, 8), 0);
        assert_eq!(signed_mode(4, 8), 4);
        assert_eq!(signed_mode(5, 8), -3);
        assert_eq!(signed_mode(7, 8), -1);
    }
}
