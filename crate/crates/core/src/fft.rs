//! Thin internal wrapper around `rustfft` with per-size plan and scratch
//! reuse.
//!
//! Simulation records reach ~5·10⁷ samples, so the scratch buffer for an
//! in-place transform is hundreds of megabytes; reusing it between the
//! forward and inverse passes of one pipeline stage roughly halves peak
//! memory. All transforms run on the calling thread — determinism is part of
//! the crate contract and single-threaded FFTs are bit-reproducible.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::Arc;

/// Caches plans and one scratch allocation per (direction, length).
pub(crate) struct FftEngine {
    planner: FftPlanner<f64>,
    plans: HashMap<(bool, usize), Arc<dyn Fft<f64>>>,
    scratch: Vec<Complex64>,
}

impl FftEngine {
    pub fn new() -> Self {
        FftEngine {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
            scratch: Vec::new(),
        }
    }

    fn plan(&mut self, inverse: bool, len: usize) -> Arc<dyn Fft<f64>> {
        let planner = &mut self.planner;
        self.plans
            .entry((inverse, len))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    }

    fn run(&mut self, inverse: bool, data: &mut [Complex64]) {
        let plan = self.plan(inverse, data.len());
        let need = plan.get_inplace_scratch_len();
        if self.scratch.len() < need {
            self.scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        plan.process_with_scratch(data, &mut self.scratch[..need]);
    }

    /// In-place forward DFT (no normalization).
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.run(false, data);
    }

    /// In-place inverse DFT, normalized by 1/N so that inverse∘forward = id.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.run(true, data);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Copies a real signal into a freshly allocated complex buffer.
pub(crate) fn complex_from_real(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}
