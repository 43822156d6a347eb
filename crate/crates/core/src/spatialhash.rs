//! Spatial hash from grid cells to global component indices.
//!
//! A cell `(r, c, s)` indexes the y, x and z axes respectively and hashes to
//! `N_z (r N_x + c) + s`. Components are inserted under their spatial mean
//! and under points on their 1-, 2- and 3-sigma ellipsoids, so a query point
//! finds every component whose bulk reaches its cell.
//!
//! The table is derived state: after loading a model, rebuild it with
//! [`SpatialHashTable::rebuild`].

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Component, Gmm4};

/// Grid resolution and extents. The origin is `-½ α (N_x, N_y, N_z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashGridSpec {
    /// Cell side length α in meters.
    pub resolution: f64,
    /// Cell counts `(N_x, N_y, N_z)`.
    pub extents: [u32; 3],
    /// Extra samples per principal great circle and sigma level, beyond
    /// the six axis endpoints.
    pub extra_circle_samples: usize,
}

impl Default for HashGridSpec {
    fn default() -> Self {
        Self {
            resolution: 0.2,
            extents: [256, 256, 256],
            extra_circle_samples: 0,
        }
    }
}

impl HashGridSpec {
    pub fn new(resolution: f64, extents: [u32; 3]) -> Result<Self> {
        let s = Self {
            resolution,
            extents,
            extra_circle_samples: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::InvalidConfig("hash resolution must be positive".into()));
        }
        if self.extents.contains(&0) {
            return Err(Error::InvalidConfig("hash extents must be at least 1".into()));
        }
        Ok(())
    }

    pub fn origin(&self) -> Vector3<f64> {
        -0.5 * self.resolution
            * Vector3::new(
                self.extents[0] as f64,
                self.extents[1] as f64,
                self.extents[2] as f64,
            )
    }

    /// Cell coordinates `(r, c, s)` along (y, x, z), unchecked against extents.
    #[inline]
    pub fn cell(&self, p: &Vector3<f64>) -> (i64, i64, i64) {
        let o = self.origin();
        let a = self.resolution;
        (
            ((p.y - o.y) / a).floor() as i64,
            ((p.x - o.x) / a).floor() as i64,
            ((p.z - o.z) / a).floor() as i64,
        )
    }

    #[inline]
    fn key_of_cell(&self, (r, c, s): (i64, i64, i64)) -> Option<u64> {
        let [nx, ny, nz] = self.extents.map(i64::from);
        if r < 0 || c < 0 || s < 0 || r >= ny || c >= nx || s >= nz {
            return None;
        }
        Some((nz * (r * nx + c) + s) as u64)
    }

    #[inline]
    fn try_key(&self, p: &Vector3<f64>) -> Option<u64> {
        if !p.iter().all(|v| v.is_finite()) {
            return None;
        }
        self.key_of_cell(self.cell(p))
    }
}

/// `h(p) = N_z (r N_x + c) + s`.
pub fn hash_key(p: &Vector3<f64>, spec: &HashGridSpec) -> Result<u64> {
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("hash key point"));
    }
    spec.try_key(p)
        .ok_or(Error::OutOfBounds(p.x, p.y, p.z))
}

/// The spatial mean plus `±s √λ_d v_d` for each eigenpair of `Λ^xx` and
/// `s ∈ {1, 2, 3}`: 19 keys, more with `extra_circle_samples`.
pub fn component_keys(component: &Component<4>) -> Vec<Vector3<f64>> {
    component_keys_with(component, 0)
}

/// [`component_keys`] with extra samples on each principal great circle.
pub fn component_keys_with(component: &Component<4>, extra_circle_samples: usize) -> Vec<Vector3<f64>> {
    spatial_keys(
        &component.spatial_mean(),
        &component.spatial_covariance(),
        extra_circle_samples,
    )
}

fn spatial_keys(mean: &Vector3<f64>, cov: &Matrix3<f64>, extra: usize) -> Vec<Vector3<f64>> {
    let eig = SymmetricEigen::new(*cov);
    let axes: [Vector3<f64>; 3] = std::array::from_fn(|d| {
        let v: Vector3<f64> = eig.eigenvectors.column(d).into_owned();
        v * eig.eigenvalues[d].max(0.0).sqrt()
    });
    let mut keys = Vec::with_capacity(19 + 36 * extra);
    keys.push(*mean);
    for s in 1..=3 {
        let s = s as f64;
        for a in &axes {
            keys.push(mean + a * s);
            keys.push(mean - a * s);
        }
        if extra > 0 {
            for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                // Evenly spaced angles strictly between the axis endpoints.
                for q in 0..4 {
                    for e in 1..=extra {
                        let t = std::f64::consts::FRAC_PI_2 * (q as f64 + e as f64 / (extra + 1) as f64);
                        let (sn, cs) = t.sin_cos();
                        keys.push(mean + (axes[i] * cs + axes[j] * sn) * s);
                    }
                }
            }
        }
    }
    keys
}

/// Sparse cell → component-index table.
#[derive(Clone, Debug)]
pub struct SpatialHashTable {
    spec: HashGridSpec,
    cells: FxHashMap<u64, Vec<u32>>,
    n_components: usize,
    out_of_bounds_keys: u64,
}

impl SpatialHashTable {
    pub fn new(spec: HashGridSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            cells: FxHashMap::default(),
            n_components: 0,
            out_of_bounds_keys: 0,
        })
    }

    /// Rebuilds the table for a loaded model by inserting every component.
    pub fn rebuild(spec: HashGridSpec, model: &Gmm4) -> Result<Self> {
        let mut t = Self::new(spec)?;
        for (k, c) in model.components.iter().enumerate() {
            t.insert_component(k, c);
        }
        Ok(t)
    }

    pub fn spec(&self) -> &HashGridSpec {
        &self.spec
    }

    /// Number of occupied cells.
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// One past the largest inserted index.
    pub fn component_bound(&self) -> usize {
        self.n_components
    }

    /// Keys skipped because they fell outside the grid.
    pub fn out_of_bounds_keys(&self) -> u64 {
        self.out_of_bounds_keys
    }

    /// Indices stored under one cell key.
    pub fn cell(&self, key: u64) -> &[u32] {
        self.cells.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Inserts `index` under every in-bounds key of the component.
    pub fn insert_component(&mut self, index: usize, component: &Component<4>) {
        let keys = component_keys_with(component, self.spec.extra_circle_samples);
        let idx = index as u32;
        for k in &keys {
            match self.spec.try_key(k) {
                Some(h) => {
                    let v = self.cells.entry(h).or_default();
                    if !v.contains(&idx) {
                        v.push(idx);
                    }
                }
                None => {
                    self.out_of_bounds_keys += 1;
                    log::debug!("component {index}: hash key {k:?} outside the grid");
                }
            }
        }
        self.n_components = self.n_components.max(index + 1);
    }

    /// Sorted unique component indices stored in the cells of `points`.
    pub fn query_submap(&self, points: &[Vector3<f64>]) -> Vec<usize> {
        let mut keys: Vec<u64> = points.iter().filter_map(|p| self.spec.try_key(p)).collect();
        keys.sort_unstable();
        keys.dedup();
        let mut seen = vec![false; self.n_components];
        let mut out = Vec::new();
        for k in keys {
            if let Some(v) = self.cells.get(&k) {
                for &i in v {
                    let i = i as usize;
                    if !seen[i] {
                        seen[i] = true;
                        out.push(i);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Cell contents as sorted sets, for order-independence checks.
    pub fn canonical_cells(&self) -> Vec<(u64, Vec<u32>)> {
        let mut v: Vec<(u64, Vec<u32>)> = self
            .cells
            .iter()
            .map(|(k, ids)| {
                let mut ids = ids.clone();
                ids.sort_unstable();
                (*k, ids)
            })
            .collect();
        v.sort_unstable();
        v
    }
}
