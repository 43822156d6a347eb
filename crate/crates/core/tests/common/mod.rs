//! Random model and cloud generators shared by the integration tests.
#![allow(dead_code)]

use gmmap::sampling::{stream_rng, BoxMuller};
use gmmap::{Component, Gmm4, Mixture, MultimodalPoint, MultimodalPointCloud};
use nalgebra::{SMatrix, SVector, Vector3, Vector4};
use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;

pub struct Rng {
    uniform: ChaCha8Rng,
    normal: BoxMuller<ChaCha8Rng>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            uniform: stream_rng(seed, 0),
            normal: BoxMuller::new(stream_rng(seed, 1)),
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.uniform.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn index(&mut self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        self.normal.next_standard()
    }

    pub fn vector<const D: usize>(&mut self, scale: f64) -> SVector<f64, D> {
        SVector::from_fn(|_, _| scale * self.normal())
    }

    /// `s² (A Aᵀ + floor · I)` with standard normal `A`.
    pub fn spd<const D: usize>(&mut self, scale: f64, floor: f64) -> SMatrix<f64, D, D> {
        let a: SMatrix<f64, D, D> = SMatrix::from_fn(|_, _| self.normal());
        (a * a.transpose() + SMatrix::identity() * floor) * (scale * scale) / D as f64
    }

    /// Weights drawn uniformly and normalized.
    pub fn weights(&mut self, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| 0.1 + self.unit()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / s).collect()
    }

    /// A 4D mixture with means in `[-span, span]³ × [0.2, 0.8]`.
    pub fn gmm4(&mut self, n: usize, span: f64, scale: f64, support: u64) -> Gmm4 {
        let comps = self
            .weights(n)
            .into_iter()
            .map(|w| {
                let mean = Vector4::new(
                    self.range(-span, span),
                    self.range(-span, span),
                    self.range(-span, span),
                    self.range(0.2, 0.8),
                );
                Component::new(w, mean, self.spd::<4>(scale, 0.2))
            })
            .collect();
        Mixture::new(comps, support).expect("valid random mixture")
    }

    pub fn cloud(&mut self, n: usize, span: f64) -> MultimodalPointCloud {
        let pts = (0..n)
            .map(|_| {
                MultimodalPoint::new(
                    Vector3::new(self.range(-span, span), self.range(-span, span), self.range(-span, span)),
                    self.unit(),
                )
                .unwrap()
            })
            .collect();
        MultimodalPointCloud::from_points(pts).unwrap()
    }
}

/// Draws `n` points from a 4D mixture, returning them with their labels.
pub fn sample_gmm4(model: &Gmm4, n: usize, rng: &mut Rng) -> (Vec<Vector4<f64>>, Vec<usize>) {
    let chol: Vec<_> = model
        .components
        .iter()
        .map(|c| c.covariance.cholesky().expect("SPD").l())
        .collect();
    let mut pts = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.unit();
        let mut acc = 0.0;
        let mut k = model.len() - 1;
        for (j, c) in model.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                k = j;
                break;
            }
        }
        let z = rng.vector::<4>(1.0);
        pts.push(model.components[k].mean + chol[k] * z);
        labels.push(k);
    }
    (pts, labels)
}

/// Brute-force `(index, distance)` of the nearest point of `cloud` to `q`.
pub fn brute_nearest(cloud: &MultimodalPointCloud, q: &Vector3<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in cloud.iter().enumerate() {
        let d = (p.position - q).norm();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
