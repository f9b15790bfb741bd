//! On-disk formats for pipeline intermediates.
//!
//! `DSF1`: magic `DSF1`, then little-endian u32 frame count, curve count,
//! samples per curve, sample rate (frames/sec), then frame-major,
//! angle-major, radius-minor little-endian f64 values. Round-trips
//! bit-exact.
//!
//! `FAN1`: magic `FAN1`, then little-endian u32 frame count, curve count,
//! samples per curve; per frame: origin (3 f64), then per curve a one-byte
//! degenerate flag followed by the sample points (3 f64 each). Curve angles
//! are implicit (`2*pi*k / curves`).
//!
//! `labels.csv`: header `path,label,subject`, one row per sequence.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::classify::ExpressionLabel;
use crate::curves::{CurveFan, RadialCurve};
use crate::dsf::{DsfField, DsfSequence};
use crate::error::{Error, Result};
use crate::grid::Grid;

const DSF_MAGIC: &[u8; 4] = b"DSF1";
const FAN_MAGIC: &[u8; 4] = b"FAN1";

pub fn write_dsf(path: impl AsRef<Path>, seq: &DsfSequence) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_dsf(seq))?;
    Ok(())
}

pub fn encode_dsf(seq: &DsfSequence) -> Vec<u8> {
    let (curves, samples) = seq.dims();
    let mut out = Vec::with_capacity(20 + seq.len() * curves * samples * 8);
    out.extend_from_slice(DSF_MAGIC);
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    out.extend_from_slice(&(curves as u32).to_le_bytes());
    out.extend_from_slice(&(samples as u32).to_le_bytes());
    out.extend_from_slice(&seq.sample_rate.to_le_bytes());
    for frame in &seq.frames {
        for v in frame.grid.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_dsf(path: impl AsRef<Path>) -> Result<DsfSequence> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_dsf(&bytes)
}

pub fn decode_dsf(bytes: &[u8]) -> Result<DsfSequence> {
    let mut cursor = Cursor::new(bytes);
    cursor.expect_magic(DSF_MAGIC)?;
    let frames = cursor.read_u32()? as usize;
    let curves = cursor.read_u32()? as usize;
    let samples = cursor.read_u32()? as usize;
    let sample_rate = cursor.read_u32()?;
    let expected = frames * curves * samples * 8;
    if cursor.remaining() != expected {
        return Err(Error::format(format!(
            "DSF1 payload is {} bytes, expected {}",
            cursor.remaining(),
            expected
        )));
    }
    let mut fields = Vec::with_capacity(frames);
    for frame_index in 0..frames {
        let mut data = Vec::with_capacity(curves * samples);
        for _ in 0..curves * samples {
            let v = cursor.read_f64()?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::format(format!(
                    "DSF1 frame {frame_index} contains invalid value {v}"
                )));
            }
            data.push(v);
        }
        fields.push(DsfField {
            grid: Grid::from_vec(curves, samples, data),
            frame_index,
        });
    }
    Ok(DsfSequence {
        frames: fields,
        sample_rate,
    })
}

pub fn write_fans(path: impl AsRef<Path>, fans: &[CurveFan]) -> Result<()> {
    let (curves, samples) = fans.first().map_or((0, 0), CurveFan::dims);
    for (i, fan) in fans.iter().enumerate() {
        if fan.dims() != (curves, samples) {
            return Err(Error::dimension(format!(
                "fan {} has dims {:?}, expected {:?}",
                i,
                fan.dims(),
                (curves, samples)
            )));
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(FAN_MAGIC);
    out.extend_from_slice(&(fans.len() as u32).to_le_bytes());
    out.extend_from_slice(&(curves as u32).to_le_bytes());
    out.extend_from_slice(&(samples as u32).to_le_bytes());
    for fan in fans {
        for c in [fan.origin.x, fan.origin.y, fan.origin.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for curve in &fan.curves {
            out.push(u8::from(curve.degenerate));
            for p in &curve.points {
                out.extend_from_slice(&p.x.to_le_bytes());
                out.extend_from_slice(&p.y.to_le_bytes());
                out.extend_from_slice(&p.z.to_le_bytes());
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_fans(path: impl AsRef<Path>) -> Result<Vec<CurveFan>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cursor = Cursor::new(&bytes);
    cursor.expect_magic(FAN_MAGIC)?;
    let frames = cursor.read_u32()? as usize;
    let curves = cursor.read_u32()? as usize;
    let samples = cursor.read_u32()? as usize;
    let mut fans = Vec::with_capacity(frames);
    for _ in 0..frames {
        let origin = Point3::new(cursor.read_f64()?, cursor.read_f64()?, cursor.read_f64()?);
        let mut fan_curves = Vec::with_capacity(curves);
        for k in 0..curves {
            let degenerate = match cursor.read_u8()? {
                0 => false,
                1 => true,
                other => {
                    return Err(Error::format(format!(
                        "FAN1 curve flag must be 0 or 1, got {other}"
                    )))
                }
            };
            let mut points = Vec::with_capacity(samples);
            for _ in 0..samples {
                points.push(Point3::new(
                    cursor.read_f64()?,
                    cursor.read_f64()?,
                    cursor.read_f64()?,
                ));
            }
            fan_curves.push(RadialCurve {
                angle: 2.0 * std::f64::consts::PI * k as f64 / curves as f64,
                points,
                degenerate,
            });
        }
        fans.push(CurveFan {
            origin,
            curves: fan_curves,
        });
    }
    if cursor.remaining() != 0 {
        return Err(Error::format("FAN1 file has trailing bytes".to_string()));
    }
    Ok(fans)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelEntry {
    pub path: String,
    pub label: ExpressionLabel,
    pub subject: String,
}

pub fn write_labels(path: impl AsRef<Path>, entries: &[LabelEntry]) -> Result<()> {
    let mut out = String::from("path,label,subject\n");
    for e in entries {
        out.push_str(&format!("{},{},{}\n", e.path, e.label, e.subject));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelEntry>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("path,label,subject") => {}
        other => {
            return Err(Error::format(format!(
                "labels.csv must start with `path,label,subject`, got {other:?}"
            )))
        }
    }
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::format(format!(
                "labels.csv line {}: expected 3 fields, got {}",
                i + 2,
                parts.len()
            )));
        }
        entries.push(LabelEntry {
            path: parts[0].trim().to_string(),
            label: parts[1].trim().parse()?,
            subject: parts[2].trim().to_string(),
        });
    }
    Ok(entries)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format("unexpected end of file".to_string()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::format(format!(
                "bad magic: expected {:?}, got {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(got)
            )));
        }
        Ok(())
    }

    fn read_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn read_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn read_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
