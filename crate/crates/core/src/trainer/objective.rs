//! Negative pseudo-log-likelihood and its gradient.

use rayon::prelude::*;

use super::dataset::{SufficientStats, VoiceStats};
use crate::model::softmax;

/// A smooth objective the optimizers can minimize.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Value at `x`; writes the gradient into `grad`.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

/// Fixed partition count for the parallel reduction; independent of the
/// thread pool so that sums happen in the same order on every machine.
const PARTITIONS: usize = 32;

/// `L(θ, D) = (1/n) Σ_i L_i(θ, D_i)` over precomputed statistics.
pub struct PseudoLikelihood<'a> {
    stats: &'a SufficientStats,
    dim: usize,
    /// (voice, sample range) work units in fixed order.
    parts: Vec<(usize, std::ops::Range<usize>)>,
}

impl<'a> PseudoLikelihood<'a> {
    pub fn new(stats: &'a SufficientStats) -> Self {
        let dim = stats.empirical.len();
        let total: usize = stats.voices.iter().map(VoiceStats::samples).sum();
        let chunk = total.div_ceil(PARTITIONS).max(1);
        let mut parts = Vec::new();
        for (vi, v) in stats.voices.iter().enumerate() {
            let mut start = 0;
            while start < v.samples() {
                let end = (start + chunk).min(v.samples());
                parts.push((vi, start..end));
                start = end;
            }
        }
        Self { stats, dim, parts }
    }

    fn weight(&self, v: &VoiceStats) -> f64 {
        1.0 / (self.stats.voices.len() as f64 * v.samples() as f64)
    }

    /// Accumulate `-w log P(x | N)` and `w ⟨f⟩_{P(.|N)}` over a sample range.
    fn accumulate(&self, theta: &[f64], v: &VoiceStats, range: std::ops::Range<usize>, w: f64, grad: Option<&mut [f64]>) -> f64 {
        let mut scores = vec![0.0; v.alphabet_size];
        let mut loss = 0.0;
        let mut grad = grad;
        for s in range {
            let terms = v.sample_terms(s);
            scores.iter_mut().for_each(|x| *x = 0.0);
            for &(off, stride) in terms {
                let (off, stride) = (off as usize, stride as usize);
                for (c, sc) in scores.iter_mut().enumerate() {
                    *sc += theta[off + c * stride];
                }
            }
            let x = v.centers[s] as usize;
            let raw = scores[x];
            let log_z = softmax(&mut scores);
            loss -= w * (raw - log_z);
            if let Some(g) = grad.as_deref_mut() {
                for &(off, stride) in terms {
                    let (off, stride) = (off as usize, stride as usize);
                    for (c, p) in scores.iter().enumerate() {
                        g[off + c * stride] += w * p;
                    }
                }
            }
        }
        loss
    }

    /// Per-voice loss `L_i(θ, D_i)`.
    pub fn voice_loss(&self, theta: &[f64], voice: usize) -> f64 {
        let v = &self.stats.voices[voice];
        let w = 1.0 / v.samples() as f64;
        self.accumulate(theta, v, 0..v.samples(), w, None)
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let parts: Vec<f64> = self
            .parts
            .par_iter()
            .map(|(vi, r)| {
                let v = &self.stats.voices[*vi];
                self.accumulate(theta, v, r.clone(), self.weight(v), None)
            })
            .collect();
        parts.into_iter().sum()
    }
}

impl Objective for PseudoLikelihood<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let parts: Vec<(f64, Vec<f64>)> = self
            .parts
            .par_iter()
            .map(|(vi, r)| {
                let v = &self.stats.voices[*vi];
                let mut g = vec![0.0; self.dim];
                let loss = self.accumulate(theta, v, r.clone(), self.weight(v), Some(&mut g));
                (loss, g)
            })
            .collect();
        grad.copy_from_slice(&self.stats.empirical);
        grad.iter_mut().for_each(|g| *g = -*g);
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        loss
    }
}

/// Smooth objective value and gradient for `θ` over the given statistics.
pub fn objective_and_gradient(theta: &[f64], stats: &SufficientStats) -> (f64, Vec<f64>) {
    let obj = PseudoLikelihood::new(stats);
    let mut g = vec![0.0; theta.len()];
    let v = obj.value_and_gradient(theta, &mut g);
    (v, g)
}
