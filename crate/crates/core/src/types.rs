//! Point clouds and Gaussian mixtures in three and four dimensions.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3, Vector4};

use crate::error::{Error, Result};

/// Tolerance on the sum of mixture weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Tolerance on covariance symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A 3D position (meters, world frame) with a normalized intensity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultimodalPoint {
    pub position: Vector3<f64>,
    pub intensity: f64,
}

impl MultimodalPoint {
    pub fn new(position: Vector3<f64>, intensity: f64) -> Result<Self> {
        let p = Self {
            position,
            intensity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position.iter().all(|v| v.is_finite()) || !self.intensity.is_finite() {
            return Err(Error::NonFinite("point"));
        }
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(Error::InvalidInput(format!(
                "intensity {} outside [0, 1]",
                self.intensity
            )));
        }
        Ok(())
    }

    /// The point as a 4-vector `(x, y, z, i)`.
    #[inline]
    pub fn to_vec4(&self) -> Vector4<f64> {
        Vector4::new(
            self.position.x,
            self.position.y,
            self.position.z,
            self.intensity,
        )
    }
}

/// An ordered collection of multimodal points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultimodalPointCloud {
    pub points: Vec<MultimodalPoint>,
}

impl MultimodalPointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a cloud, checking every point.
    pub fn from_points(points: Vec<MultimodalPoint>) -> Result<Self> {
        for p in &points {
            p.validate()?;
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultimodalPoint> {
        self.points.iter()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn to_vec4s(&self) -> Vec<Vector4<f64>> {
        self.points.iter().map(MultimodalPoint::to_vec4).collect()
    }

    pub fn extend(&mut self, other: &MultimodalPointCloud) {
        self.points.extend_from_slice(&other.points);
    }
}

impl FromIterator<MultimodalPoint> for MultimodalPointCloud {
    fn from_iter<I: IntoIterator<Item = MultimodalPoint>>(iter: I) -> Self {
        Self {
            points: iter.into_iter().collect(),
        }
    }
}

/// A weighted Gaussian in `D` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Component<const D: usize> {
    pub weight: f64,
    pub mean: SVector<f64, D>,
    pub covariance: SMatrix<f64, D, D>,
}

/// Component of the 4D (position, intensity) model.
pub type GaussianComponent4 = Component<4>;
/// Component of the spatial marginal.
pub type GaussianComponent3 = Component<3>;

impl<const D: usize> Component<D> {
    pub fn new(weight: f64, mean: SVector<f64, D>, covariance: SMatrix<f64, D, D>) -> Self {
        Self {
            weight,
            mean,
            covariance,
        }
    }

    /// Checks weight range, finiteness and symmetry. Positive definiteness is
    /// checked where a Cholesky factor is taken.
    pub fn validate(&self) -> Result<()> {
        if !self.weight.is_finite()
            || !self.mean.iter().all(|v| v.is_finite())
            || !self.covariance.iter().all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("component"));
        }
        if !(self.weight > 0.0 && self.weight <= 1.0 + WEIGHT_SUM_TOL) {
            return Err(Error::InvalidModel(format!(
                "component weight {} outside (0, 1]",
                self.weight
            )));
        }
        let asym = (self.covariance - self.covariance.transpose()).amax();
        if asym > SYMMETRY_TOL * self.covariance.amax().max(1.0) {
            return Err(Error::InvalidModel(format!(
                "covariance asymmetric by {asym:e}"
            )));
        }
        Ok(())
    }
}

impl Component<4> {
    pub fn spatial_mean(&self) -> Vector3<f64> {
        self.mean.fixed_rows::<3>(0).into_owned()
    }

    /// The `Λ^xx` block.
    pub fn spatial_covariance(&self) -> Matrix3<f64> {
        self.covariance.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// The `Λ^ix` block as a column vector (equal to `Λ^xi` by symmetry).
    pub fn cross_covariance(&self) -> Vector3<f64> {
        self.covariance.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn intensity_mean(&self) -> f64 {
        self.mean[3]
    }

    pub fn intensity_variance(&self) -> f64 {
        self.covariance[(3, 3)]
    }

    pub fn spatial_marginal(&self) -> Component<3> {
        Component {
            weight: self.weight,
            mean: self.spatial_mean(),
            covariance: self.spatial_covariance(),
        }
    }
}

/// A Gaussian mixture model with the number of points it was fit from.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture<const D: usize> {
    pub components: Vec<Component<D>>,
    pub support_count: u64,
}

/// The 4D (x, y, z, intensity) mixture.
pub type Gmm4 = Mixture<4>;
/// The spatial marginal mixture.
pub type Gmm3 = Mixture<3>;

impl<const D: usize> Mixture<D> {
    /// Builds a mixture and checks its invariants.
    pub fn new(components: Vec<Component<D>>, support_count: u64) -> Result<Self> {
        let m = Self {
            components,
            support_count,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds a mixture without checking invariants.
    pub fn from_parts_unchecked(components: Vec<Component<D>>, support_count: u64) -> Self {
        Self {
            components,
            support_count,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_tolerance(WEIGHT_SUM_TOL)
    }

    pub(crate) fn validate_with_tolerance(&self, weight_tol: f64) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidModel("mixture has no components".into()));
        }
        for c in &self.components {
            c.validate()?;
        }
        let s = self.weight_sum();
        if (s - 1.0).abs() > weight_tol {
            return Err(Error::InvalidModel(format!("weights sum to {s}")));
        }
        Ok(())
    }

    /// Rescales weights to sum to one.
    pub fn normalize_weights(&mut self) {
        let s = self.weight_sum();
        if s > 0.0 {
            for c in &mut self.components {
                c.weight /= s;
            }
        }
    }
}

impl Mixture<4> {
    pub fn spatial_marginal(&self) -> Mixture<3> {
        crate::mixture::marginalize_spatial(self)
    }
}
