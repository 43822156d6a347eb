use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::error::{Error, Result};
use crate::types::{MultimodalPoint, MultimodalPointCloud};

/// Orthonormality and determinant tolerance for rotations.
pub const ROTATION_TOL: f64 = 1e-6;

/// Rigid sensor-to-world transform `x' = R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let p = Self {
            rotation,
            translation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Checks `RᵀR = I` and `det R = 1` within [`ROTATION_TOL`].
    pub fn validate(&self) -> Result<()> {
        if !self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("pose"));
        }
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        if ortho > ROTATION_TOL {
            return Err(Error::InvalidInput(format!("rotation not orthonormal (error {ortho:e})")));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidInput(format!("rotation determinant {det}")));
        }
        Ok(())
    }

    /// From a homogeneous 4×4 matrix in row-major order.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self> {
        let h = Matrix4::from_row_slice(m);
        let bottom = [h[(3, 0)], h[(3, 1)], h[(3, 2)], h[(3, 3)]];
        if bottom
            .iter()
            .zip([0.0, 0.0, 0.0, 1.0])
            .any(|(a, b)| !((a - b).abs() <= ROTATION_TOL))
        {
            return Err(Error::InvalidInput(format!("pose bottom row {bottom:?}")));
        }
        Self::new(
            h.fixed_view::<3, 3>(0, 0).into_owned(),
            h.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x, //
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y, //
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z, //
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    /// Unit quaternion `(qx, qy, qz, qw)` plus translation, as in TUM trajectories.
    pub fn from_quaternion(t: Vector3<f64>, q: [f64; 4]) -> Result<Self> {
        let [x, y, z, w] = q;
        let n = (x * x + y * y + z * z + w * w).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput(format!("quaternion {q:?}")));
        }
        let (x, y, z, w) = (x / n, y / n, z / n, w / n);
        let rotation = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        );
        Self::new(rotation, t)
    }

    #[inline]
    pub fn transform_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// Moves a sensor-frame cloud into the world frame. Intensities are untouched.
pub fn transform_cloud(cloud: &MultimodalPointCloud, pose: &Pose) -> MultimodalPointCloud {
    cloud
        .iter()
        .map(|p| MultimodalPoint {
            position: pose.transform_point(&p.position),
            intensity: p.intensity,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn cloud() -> MultimodalPointCloud {
        (0..10)
            .map(|k| MultimodalPoint::new(Vector3::new(k as f64, -(k as f64) * 0.5, 2.0), 0.1 * k as f64).unwrap())
            .collect()
    }

    #[test]
    fn identity_and_translation() {
        let c = cloud();
        assert_eq!(transform_cloud(&c, &Pose::identity()), c);
        let t = Vector3::new(1.0, -2.0, 0.5);
        let moved = transform_cloud(&c, &Pose::from_translation(t));
        for (a, b) in c.iter().zip(moved.iter()) {
            assert_eq!(b.position, a.position + t);
            assert_eq!(b.intensity, a.intensity);
        }
    }

    #[test]
    fn row_major_round_trip() {
        let r = Rotation3::from_euler_angles(0.1, -0.4, 1.2).into_inner();
        let p = Pose::new(r, Vector3::new(3.0, 2.0, 1.0)).unwrap();
        let q = Pose::from_row_major(&p.to_row_major()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_non_rigid() {
        assert!(Pose::new(Matrix3::identity() * 2.0, Vector3::zeros()).is_err());
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Pose::new(reflect, Vector3::zeros()).is_err());
        let mut m = Pose::identity().to_row_major();
        m[12] = 0.5;
        assert!(Pose::from_row_major(&m).is_err());
    }

    #[test]
    fn quaternion_matches_axis_angle() {
        let angle: f64 = 0.7;
        let q = [0.0, 0.0, (angle / 2.0).sin(), (angle / 2.0).cos()];
        let p = Pose::from_quaternion(Vector3::zeros(), q).unwrap();
        let expected = Rotation3::from_axis_angle(&Vector3::z_axis(), angle).into_inner();
        assert!((p.rotation - expected).amax() < 1e-12);
    }

    #[test]
    fn inverse_undoes_pose() {
        let r = Rotation3::from_euler_angles(0.3, 0.2, -0.9).into_inner();
        let p = Pose::new(r, Vector3::new(-1.0, 4.0, 2.0)).unwrap();
        let x = Vector3::new(0.3, 0.4, 0.5);
        assert!((p.inverse().transform_point(&p.transform_point(&x)) - x).amax() < 1e-12);
    }
}
