//! Seeded Gaussian sampling via the Box-Muller transform.
//!
//! Each logical stream (e.g. one mixture component) gets its own ChaCha
//! stream id under a shared seed, so parallel sampling reproduces the same
//! draws regardless of scheduling.

use nalgebra::{SMatrix, SVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::Result;
use crate::gaussian::cholesky_lower;
use crate::types::Component;

/// A counter-based generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in the open interval `(0, 1)` from the top 53 bits.
#[inline]
fn open_unit<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard-normal source producing pairs via Box-Muller.
pub struct BoxMuller<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> BoxMuller<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    #[inline]
    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = open_unit(&mut self.rng);
        let u2 = open_unit(&mut self.rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn standard_vector<const D: usize>(&mut self) -> SVector<f64, D> {
        SVector::<f64, D>::from_fn(|_, _| self.next_standard())
    }
}

/// `n` draws of `mean + L u`, `u ~ N(0, I)`.
pub fn sample_with_factor<const D: usize, R: RngCore>(
    mean: &SVector<f64, D>,
    chol_lower: &SMatrix<f64, D, D>,
    n: usize,
    normals: &mut BoxMuller<R>,
) -> Vec<SVector<f64, D>> {
    (0..n)
        .map(|_| mean + chol_lower * normals.standard_vector::<D>())
        .collect()
}

/// `n` samples from a component's Gaussian; deterministic in `seed`.
pub fn sample_component<const D: usize>(
    component: &Component<D>,
    n: usize,
    seed: u64,
) -> Result<Vec<SVector<f64, D>>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let l = cholesky_lower(&component.covariance)?;
    let mut normals = BoxMuller::new(stream_rng(seed, 0));
    Ok(sample_with_factor(&component.mean, &l, n, &mut normals))
}
