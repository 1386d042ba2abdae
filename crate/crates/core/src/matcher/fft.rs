//! Rotation search through the circular correlation theorem.
//!
//! With mask `m`, query block `q`, and reference block `r`,
//!
//! ```text
//! d2(k) = sum m q^2 - 2 corr(m*q, r)(k) + corr(m, r^2)(k)
//! corr(a, b)(k) = sum_s a[s] b[(s + k) mod n] = IDFT(conj(A) . B)(k) / n
//! ```
//!
//! Spectra of all blocks are summed before a single inverse transform.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::FovMask;
use crate::error::Result;
use crate::ssl_descriptor::SslDescriptor;

/// Cached forward/inverse plans for one sector count.
#[derive(Clone)]
pub struct RotationCorrelator {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RotationCorrelator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RotationCorrelator").field("n", &self.n).finish()
    }
}

impl RotationCorrelator {
    pub fn new(n_sectors: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n: n_sectors,
            forward: planner.plan_fft_forward(n_sectors),
            inverse: planner.plan_fft_inverse(n_sectors),
        }
    }

    pub fn n_sectors(&self) -> usize {
        self.n
    }

    fn spectrum(&self, values: impl Iterator<Item = f64>) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.map(|v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Squared masked distance for every shift `k` at once.
    pub fn distances_sq(&self, query: &SslDescriptor, reference: &SslDescriptor, mask: &FovMask) -> Result<Vec<f64>> {
        mask.check(query, reference)?;
        let n = self.n;
        assert_eq!(n, query.n_sectors, "correlator planned for a different sector count");
        let mask_spectra: Vec<Vec<Complex64>> = mask
            .weights
            .chunks(n)
            .map(|m| self.spectrum(m.iter().copied()))
            .collect();

        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        let mut constant = 0.0;
        for (i, (q, r)) in query.values.chunks(n).zip(reference.values.chunks(n)).enumerate() {
            let ring = i % query.n_rings;
            let m = &mask.weights[ring * n..(ring + 1) * n];
            constant += q.iter().zip(m).map(|(q, m)| m * q * q).sum::<f64>();
            let mq = self.spectrum(q.iter().zip(m).map(|(q, m)| m * q));
            let rr = self.spectrum(r.iter().copied());
            let r2 = self.spectrum(r.iter().map(|v| v * v));
            let ms = &mask_spectra[ring];
            for j in 0..n {
                acc[j] += mq[j].conj() * rr[j] * -2.0 + ms[j].conj() * r2[j];
            }
        }
        self.inverse.process(&mut acc);
        let scale = 1.0 / n as f64;
        Ok(acc.iter().map(|c| constant + c.re * scale).collect())
    }

    /// Minimum over shifts; among shifts within `1e-12` of the minimum the
    /// smallest is returned.
    pub fn min_rotation_distance(&self, query: &SslDescriptor, reference: &SslDescriptor, mask: &FovMask) -> Result<(f64, usize)> {
        let d2 = self.distances_sq(query, reference, mask)?;
        let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let k = d2.iter().position(|v| *v <= min + 1e-12).unwrap_or(0);
        Ok((d2[k].max(0.0).sqrt(), k))
    }
}

/// One-shot FFT rotation search (plans a transform per call; reuse a
/// [`RotationCorrelator`] in loops).
pub fn min_rotation_distance_fft(query: &SslDescriptor, reference: &SslDescriptor, mask: &FovMask) -> Result<(f64, usize)> {
    RotationCorrelator::new(query.n_sectors).min_rotation_distance(query, reference, mask)
}
