//! Linear convolution on integer windows: direct for small products, FFT
//! (rustfft) above a crossover. All call sites convolve nonnegative mass
//! vectors, so callers clamp the tiny negative ringing FFT leaves behind.

use crate::numeric::kahan_sum;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

const DIRECT_LIMIT: usize = 1 << 21;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// In-place complex FFT, forward direction. Used by the characteristic
/// function grid as well as by the convolution paths here.
pub fn fft_forward(buf: &mut [Complex<f64>]) {
    plan(buf.len(), false).process(buf);
}

fn fft_inverse(buf: &mut [Complex<f64>]) {
    plan(buf.len(), true).process(buf);
}

pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Full linear convolution, `out.len() == a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().saturating_mul(b.len()) <= DIRECT_LIMIT {
        convolve_direct(a, b)
    } else {
        convolve_fft(a, b)
    }
}

pub fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    // Iterate the shorter vector outermost so the inner loop streams.
    let (short, long, _swapped) = if a.len() <= b.len() { (a, b, false) } else { (b, a, true) };
    for (i, &s) in short.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for (j, &l) in long.iter().enumerate() {
            out[i + j] += s * l;
        }
    }
    out
}

pub fn convolve_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let size = next_pow2(out_len);
    let mut fa: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); size];
    let mut fb: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); size];
    for (i, &v) in a.iter().enumerate() {
        fa[i].re = v;
    }
    for (i, &v) in b.iter().enumerate() {
        fb[i].re = v;
    }
    fft_forward(&mut fa);
    fft_forward(&mut fb);
    let scale = 1.0 / size as f64;
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= *y * scale;
    }
    fft_inverse(&mut fa);
    fa[..out_len].iter().map(|c| c.re).collect()
}

/// Repeated convolution with a fixed symmetric-window kernel, output
/// truncated back to the input window. This is the inner loop of both the
/// n-step pmf recursion and the polymer layer recursion, so the kernel
/// spectrum and scratch buffers are prepared once.
pub struct WindowedKernelConv {
    w: usize,
    k: usize,
    kernel_sum: f64,
    backend: Backend,
}

enum Backend {
    Direct { kernel: Vec<f64> },
    Fft { size: usize, kernel_spec: Vec<Complex<f64>>, scratch: Vec<Complex<f64>> },
}

impl WindowedKernelConv {
    /// `kernel` has length `2*k_radius + 1` (offsets -k..=k); inputs and
    /// outputs have length `2*w_radius + 1` (offsets -w..=w).
    pub fn new(kernel: &[f64], k_radius: usize, w_radius: usize) -> Self {
        assert_eq!(kernel.len(), 2 * k_radius + 1);
        let kernel_sum = kahan_sum(kernel.iter().copied());
        let in_len = 2 * w_radius + 1;
        let backend = if in_len.saturating_mul(kernel.len()) <= DIRECT_LIMIT {
            Backend::Direct { kernel: kernel.to_vec() }
        } else {
            let size = next_pow2(in_len + kernel.len() - 1);
            let mut spec: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); size];
            for (i, &v) in kernel.iter().enumerate() {
                spec[i].re = v;
            }
            fft_forward(&mut spec);
            Backend::Fft { size, kernel_spec: spec, scratch: vec![Complex::new(0.0, 0.0); size] }
        };
        WindowedKernelConv { w: w_radius, k: k_radius, kernel_sum, backend }
    }

    pub fn window_radius(&self) -> usize {
        self.w
    }

    /// Convolve `input` with the kernel and write the `[-w, w]` slice of the
    /// result into `out`. Returns the mass that fell outside the window
    /// (total-mass balance; can be a tiny negative from rounding).
    pub fn apply(&mut self, input: &[f64], out: &mut [f64]) -> f64 {
        let n = 2 * self.w + 1;
        assert_eq!(input.len(), n);
        assert_eq!(out.len(), n);
        let in_sum = kahan_sum(input.iter().copied());
        match &mut self.backend {
            Backend::Direct { kernel } => {
                out.fill(0.0);
                let k = self.k as isize;
                let w = self.w as isize;
                for (j, &kv) in kernel.iter().enumerate() {
                    if kv == 0.0 {
                        continue;
                    }
                    let off = j as isize - k; // kernel offset
                    let lo = (-w + off).max(-w);
                    let hi = (w + off).min(w);
                    // out[x] += kv * input[x - off]
                    let mut x = lo;
                    while x <= hi {
                        out[(x + w) as usize] += kv * input[(x - off + w) as usize];
                        x += 1;
                    }
                }
            }
            Backend::Fft { size, kernel_spec, scratch } => {
                scratch.fill(Complex::new(0.0, 0.0));
                for (i, &v) in input.iter().enumerate() {
                    scratch[i].re = v;
                }
                fft_forward(scratch);
                let scale = 1.0 / *size as f64;
                for (x, y) in scratch.iter_mut().zip(kernel_spec.iter()) {
                    *x *= *y * scale;
                }
                fft_inverse(scratch);
                // Linear-conv index t maps to offset t - w - k; the window
                // [-w, w] is t in [k, 2w + k].
                for (i, o) in out.iter_mut().enumerate() {
                    *o = scratch[i + self.k].re;
                }
            }
        }
        let out_sum = kahan_sum(out.iter().copied());
        in_sum * self.kernel_sum - out_sum
    }
}
