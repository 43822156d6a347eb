//! PLY point clouds.
//!
//! Export writes binary little-endian `x y z` as `float` and intensity as a
//! `uchar` gray level. The reader accepts ASCII and both binary encodings,
//! skips elements other than `vertex`, and takes intensity from an
//! `intensity`/`gray` property or from `red green blue` via Rec.601 luma.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::types::{MultimodalPoint, MultimodalPointCloud};

/// Rec.601 luma weights for R, G, B.
pub const REC601: [f64; 3] = [0.299, 0.587, 0.114];

/// Longest header line accepted by the reader.
const MAX_HEADER_LINE: usize = 4096;

pub fn intensity_to_gray(i: f64) -> u8 {
    (i.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_ply<W: Write>(cloud: &MultimodalPointCloud, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar intensity\nend_header\n",
        cloud.len()
    )?;
    for p in cloud.iter() {
        for v in p.position.iter() {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        w.write_all(&[intensity_to_gray(p.intensity)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_ply(cloud: &MultimodalPointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_ply(cloud, File::create(path)?)
}

pub fn import_ply(path: impl AsRef<Path>) -> Result<MultimodalPointCloud> {
    read_ply(BufReader::new(File::open(path)?))
}

pub fn parse_ply(bytes: &[u8]) -> Result<MultimodalPointCloud> {
    read_ply(bytes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Encoding {
    Ascii,
    LittleEndian,
    BigEndian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    /// Full-scale value used to normalize integer colors.
    fn full_scale(self) -> f64 {
        match self {
            Self::U8 | Self::I8 => 255.0,
            Self::U16 | Self::I16 => 65535.0,
            Self::U32 | Self::I32 => u32::MAX as f64,
            Self::F32 | Self::F64 => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Clone, Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
}

fn ply_err(msg: impl Into<String>) -> Error {
    Error::Ply(msg.into())
}

fn read_header_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut buf = Vec::new();
    let n = r.by_ref().take(MAX_HEADER_LINE as u64).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Err(ply_err("unexpected end of header"));
    }
    if buf.last() != Some(&b'\n') {
        return Err(ply_err("header line too long or unterminated"));
    }
    let s = String::from_utf8(buf).map_err(|_| ply_err("header is not UTF-8"))?;
    Ok(s.trim_end_matches(['\n', '\r']).to_string())
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header> {
    if read_header_line(r)?.trim() != "ply" {
        return Err(ply_err("missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = read_header_line(r)?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("comment") | Some("obj_info") => {}
            Some("end_header") => break,
            Some("format") => {
                encoding = Some(match tok.next() {
                    Some("ascii") => Encoding::Ascii,
                    Some("binary_little_endian") => Encoding::LittleEndian,
                    Some("binary_big_endian") => Encoding::BigEndian,
                    other => return Err(ply_err(format!("unknown format {other:?}"))),
                });
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| ply_err("element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| ply_err("element without a valid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| ply_err("property before any element"))?;
                let ty = tok.next().ok_or_else(|| ply_err("property without type"))?;
                let prop = if ty == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    match (count, item) {
                        (Some(count), Some(item)) if !matches!(count, Scalar::F32 | Scalar::F64) => {
                            Property::List { count, item }
                        }
                        _ => return Err(ply_err("malformed list property")),
                    }
                } else {
                    let ty = Scalar::parse(ty).ok_or_else(|| ply_err(format!("unknown type {ty}")))?;
                    let name = tok.next().ok_or_else(|| ply_err("property without name"))?;
                    Property::Scalar {
                        name: name.to_string(),
                        ty,
                    }
                };
                el.properties.push(prop);
            }
            Some(other) => return Err(ply_err(format!("unknown header keyword {other}"))),
        }
    }
    Ok(Header {
        encoding: encoding.ok_or_else(|| ply_err("missing format line"))?,
        elements,
    })
}

/// Reads one value per scalar property in either encoding.
trait ValueSource {
    fn scalar(&mut self, ty: Scalar) -> Result<f64>;
}

struct Binary<R> {
    r: R,
    big_endian: bool,
}

impl<R: Read> ValueSource for Binary<R> {
    fn scalar(&mut self, ty: Scalar) -> Result<f64> {
        let mut b = [0u8; 8];
        let b = &mut b[..ty.size()];
        self.r.read_exact(b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => ply_err("unexpected end of vertex data"),
            _ => Error::Io(e),
        })?;
        if self.big_endian {
            b.reverse();
        }
        Ok(match ty {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().expect("4")) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().expect("4")) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().expect("4")) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8")),
        })
    }
}

struct Ascii<R> {
    r: R,
    tokens: std::vec::IntoIter<String>,
}

impl<R: BufRead> ValueSource for Ascii<R> {
    fn scalar(&mut self, _ty: Scalar) -> Result<f64> {
        loop {
            if let Some(t) = self.tokens.next() {
                return t.parse().map_err(|_| ply_err(format!("bad number {t:?}")));
            }
            let mut line = String::new();
            if self.r.read_line(&mut line)? == 0 {
                return Err(ply_err("unexpected end of vertex data"));
            }
            self.tokens = line
                .split_whitespace()
                .map(str::to_string)
                .collect::<Vec<_>>()
                .into_iter();
        }
    }
}

/// Where the fields of a point live within a vertex record.
struct VertexLayout {
    xyz: [usize; 3],
    intensity: Option<(usize, f64)>,
    rgb: Option<([usize; 3], f64)>,
}

fn vertex_layout(el: &Element) -> Result<VertexLayout> {
    let find = |want: &[&str]| {
        el.properties.iter().enumerate().find_map(|(k, p)| match p {
            Property::Scalar { name, ty } if want.contains(&name.as_str()) => Some((k, *ty)),
            _ => None,
        })
    };
    let axis = |n: &str| find(&[n]).map(|(k, _)| k).ok_or_else(|| ply_err(format!("vertex has no {n}")));
    let xyz = [axis("x")?, axis("y")?, axis("z")?];
    let intensity = find(&["intensity", "gray", "grey", "scalar_intensity"]).map(|(k, ty)| (k, ty.full_scale()));
    let rgb = match (
        find(&["red", "r", "diffuse_red"]),
        find(&["green", "g", "diffuse_green"]),
        find(&["blue", "b", "diffuse_blue"]),
    ) {
        (Some(r), Some(g), Some(b)) => Some(([r.0, g.0, b.0], r.1.full_scale())),
        _ => None,
    };
    Ok(VertexLayout { xyz, intensity, rgb })
}

fn skip_element<S: ValueSource>(src: &mut S, el: &Element) -> Result<()> {
    for _ in 0..el.count {
        read_record(src, el, &mut Vec::new())?;
    }
    Ok(())
}

/// Reads one record, storing scalar values by property index (lists become NaN).
fn read_record<S: ValueSource>(src: &mut S, el: &Element, out: &mut Vec<f64>) -> Result<()> {
    out.clear();
    for p in &el.properties {
        match p {
            Property::Scalar { ty, .. } => out.push(src.scalar(*ty)?),
            Property::List { count, item } => {
                let n = src.scalar(*count)?;
                if !(n >= 0.0 && n <= u32::MAX as f64) {
                    return Err(ply_err(format!("bad list length {n}")));
                }
                for _ in 0..n as u64 {
                    src.scalar(*item)?;
                }
                out.push(f64::NAN);
            }
        }
    }
    Ok(())
}

/// Parses the `vertex` element of a PLY stream into a multimodal cloud.
/// Without any intensity or color property, intensity is 0.
pub fn read_ply<R: BufRead>(mut r: R) -> Result<MultimodalPointCloud> {
    let header = read_header(&mut r)?;
    match header.encoding {
        Encoding::Ascii => read_body(
            Ascii {
                r,
                tokens: Vec::new().into_iter(),
            },
            &header,
        ),
        enc => read_body(
            Binary {
                r,
                big_endian: enc == Encoding::BigEndian,
            },
            &header,
        ),
    }
}

fn read_body<S: ValueSource>(mut src: S, header: &Header) -> Result<MultimodalPointCloud> {
    let vi = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| ply_err("no vertex element"))?;
    for el in &header.elements[..vi] {
        skip_element(&mut src, el)?;
    }
    let el = &header.elements[vi];
    let layout = vertex_layout(el)?;
    // The count is untrusted; grow as records actually arrive.
    let mut points = Vec::with_capacity(el.count.min(1 << 16));
    let mut rec = Vec::with_capacity(el.properties.len());
    for _ in 0..el.count {
        read_record(&mut src, el, &mut rec)?;
        let position = Vector3::new(rec[layout.xyz[0]], rec[layout.xyz[1]], rec[layout.xyz[2]]);
        let intensity = if let Some((k, scale)) = layout.intensity {
            rec[k] / scale
        } else if let Some((idx, scale)) = layout.rgb {
            idx.iter().zip(REC601).map(|(&k, w)| w * rec[k]).sum::<f64>() / scale
        } else {
            0.0
        };
        let p = MultimodalPoint::new(position, intensity.clamp(0.0, 1.0))
            .map_err(|_| ply_err(format!("vertex {} is not finite", points.len())))?;
        points.push(p);
    }
    Ok(MultimodalPointCloud { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64, z: f64, i: f64) -> MultimodalPoint {
        MultimodalPoint::new(Vector3::new(x, y, z), i).unwrap()
    }

    #[test]
    fn empty_cloud_round_trips() {
        let mut buf = Vec::new();
        write_ply(&MultimodalPointCloud::new(), &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("element vertex 0"));
        assert!(parse_ply(&buf).unwrap().is_empty());
    }

    #[test]
    fn full_intensity_is_255() {
        assert_eq!(intensity_to_gray(1.0), 255);
        assert_eq!(intensity_to_gray(0.0), 0);
        let c: MultimodalPointCloud = vec![pt(0.0, 0.0, 0.0, 1.0)].into_iter().collect();
        let mut buf = Vec::new();
        write_ply(&c, &mut buf).unwrap();
        assert_eq!(*buf.last().unwrap(), 255);
    }

    #[test]
    fn round_trip_positions_and_intensity() {
        let c: MultimodalPointCloud = (0..200)
            .map(|k| {
                let f = k as f32 * 0.37;
                pt(f as f64, -(f as f64) * 0.5, (f as f64).sin(), (k as f64 * 0.013) % 1.0)
            })
            .collect();
        let mut buf = Vec::new();
        write_ply(&c, &mut buf).unwrap();
        let back = parse_ply(&buf).unwrap();
        assert_eq!(back.len(), c.len());
        for (a, b) in c.iter().zip(back.iter()) {
            for d in 0..3 {
                assert_eq!(b.position[d], a.position[d] as f32 as f64);
            }
            assert!((a.intensity - b.intensity).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }

    #[test]
    fn ascii_with_rgb_and_faces() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement face 1\n\
                    property list uchar int vertex_indices\nelement vertex 2\n\
                    property double x\nproperty double y\nproperty double z\n\
                    property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n\
                    3 0 1 1\n1 2 3 255 255 255\n-1 0.5 2 255 0 0\n";
        let c = parse_ply(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.points[0].position, Vector3::new(1.0, 2.0, 3.0));
        assert!((c.points[0].intensity - 1.0).abs() < 1e-12);
        assert!((c.points[1].intensity - 0.299).abs() < 1e-12);
    }

    #[test]
    fn big_endian_float_intensity() {
        let mut bytes = b"ply\nformat binary_big_endian 1.0\nelement vertex 1\n\
                          property float x\nproperty float y\nproperty float z\n\
                          property float intensity\nend_header\n"
            .to_vec();
        for v in [1.5f32, -2.0, 0.25, 0.75] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let c = parse_ply(&bytes).unwrap();
        assert_eq!(c.points[0].position, Vector3::new(1.5, -2.0, 0.25));
        assert_eq!(c.points[0].intensity, 0.75);
    }

    #[test]
    fn malformed_inputs_are_errors() {
        assert!(parse_ply(b"").is_err());
        assert!(parse_ply(b"ply\nend_header\n").is_err());
        assert!(parse_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n").is_err());
        let truncated = b"ply\nformat binary_little_endian 1.0\nelement vertex 1000000000\n\
                          property float x\nproperty float y\nproperty float z\nend_header\n";
        assert!(parse_ply(truncated).is_err());
    }
}
