//! Binary model format.
//!
//! A 16-byte header (`SGMM`, version, component count, support count as
//! `u32`) followed by 15 `f32` per component: weight, the 4D mean and the
//! covariance upper triangle in row-major order. Everything is little-endian.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::gaussian::cholesky_lower;
use crate::types::{Component, Gmm4, Mixture};

pub const MODEL_MAGIC: [u8; 4] = *b"SGMM";
pub const MODEL_VERSION: u32 = 1;
pub const MODEL_HEADER_BYTES: usize = 16;
pub const MODEL_COMPONENT_BYTES: usize = 60;

/// Weight-sum tolerance for decoded models; f32 storage rounds each weight.
pub const LOADED_WEIGHT_TOL: f64 = 1e-5;

const UPPER: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

pub fn encode_model(model: &Gmm4) -> Result<Vec<u8>> {
    let count = u32::try_from(model.len())
        .map_err(|_| Error::InvalidModel(format!("{} components exceed the format limit", model.len())))?;
    let support = u32::try_from(model.support_count).unwrap_or(u32::MAX);
    let mut out = Vec::with_capacity(MODEL_HEADER_BYTES + MODEL_COMPONENT_BYTES * model.len());
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&support.to_le_bytes());
    for c in &model.components {
        let mut put = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
        put(c.weight);
        for v in c.mean.iter() {
            put(*v);
        }
        for (r, col) in UPPER {
            put(c.covariance[(r, col)]);
        }
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<Gmm4> {
    if bytes.len() < MODEL_HEADER_BYTES {
        if bytes.len() >= 4 && bytes[..4] != MODEL_MAGIC {
            return Err(Error::BadMagic);
        }
        return Err(Error::Truncated {
            expected: MODEL_HEADER_BYTES,
            actual: bytes.len(),
        });
    }
    if bytes[..4] != MODEL_MAGIC {
        return Err(Error::BadMagic);
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let count = word(8) as usize;
    let support = word(12) as u64;
    let expected = count
        .checked_mul(MODEL_COMPONENT_BYTES)
        .and_then(|b| b.checked_add(MODEL_HEADER_BYTES))
        .ok_or(Error::Truncated {
            expected: usize::MAX,
            actual: bytes.len(),
        })?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }

    let components = bytes[MODEL_HEADER_BYTES..]
        .chunks_exact(MODEL_COMPONENT_BYTES)
        .map(|rec| {
            let f: Vec<f64> = rec
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect();
            let mut cov = Matrix4::zeros();
            for (k, (r, c)) in UPPER.into_iter().enumerate() {
                cov[(r, c)] = f[5 + k];
                cov[(c, r)] = f[5 + k];
            }
            Component::new(f[0], Vector4::new(f[1], f[2], f[3], f[4]), cov)
        })
        .collect::<Vec<_>>();
    let model = Mixture::from_parts_unchecked(components, support);
    if !model.is_empty() {
        model.validate_with_tolerance(LOADED_WEIGHT_TOL)?;
        for c in &model.components {
            cholesky_lower(&c.covariance)?;
        }
    }
    Ok(model)
}

pub fn save_model(model: &Gmm4, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Gmm4> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Gmm4 {
        Mixture::new(vec![Component::new(1.0, Vector4::zeros(), Matrix4::identity())], 7).unwrap()
    }

    #[test]
    fn single_identity_is_76_bytes() {
        let b = encode_model(&unit()).unwrap();
        assert_eq!(b.len(), 76);
        assert_eq!(&b[..4], b"SGMM");
        assert_eq!(decode_model(&b).unwrap(), unit());
    }

    #[test]
    fn empty_model_is_header_only() {
        let m = Mixture::from_parts_unchecked(vec![], 0);
        let b = encode_model(&m).unwrap();
        assert_eq!(b.len(), 16);
        assert!(decode_model(&b).unwrap().is_empty());
    }

    #[test]
    fn distinct_errors() {
        let good = encode_model(&unit()).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_model(&bad), Err(Error::BadMagic)));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_model(&bad), Err(Error::UnsupportedVersion(2))));
        assert!(matches!(
            decode_model(&good[..40]),
            Err(Error::Truncated { expected: 76, actual: 40 })
        ));
        assert!(matches!(decode_model(&good[..8]), Err(Error::Truncated { .. })));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(decode_model(&long), Err(Error::TrailingBytes(1))));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let mut b = encode_model(&unit()).unwrap();
        // Diagonal entry (0,0) is the first covariance float.
        b[36..40].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(decode_model(&b).is_err());
    }

    #[test]
    fn huge_count_does_not_allocate() {
        let mut b = encode_model(&unit()).unwrap();
        b[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode_model(&b), Err(Error::Truncated { .. })));
    }
}
