//! Mask file formats.
//!
//! `raw-v1` (read/write), little-endian:
//!
//! | offset | size | field                          |
//! |-------:|-----:|--------------------------------|
//! | 0      | 4    | magic `SFM1`                   |
//! | 4      | 12   | dims, 3 x u32                  |
//! | 16     | 24   | spacing mm, 3 x f64            |
//! | 40     | n    | one byte per voxel, x fastest  |
//!
//! NIfTI-1 single-file subset (read only): 348-byte header, magic `n+1\0`,
//! datatypes uint8 / int16 / float32, either byte order, no compression.
//! Orientation fields are read and ignored with a warning.

use std::fs;
use std::path::Path;

use super::{Result, VolumeError, VoxelMask};

pub const RAW_V1_MAGIC: &[u8; 4] = b"SFM1";
pub const RAW_V1_HEADER_LEN: usize = 40;

const NIFTI_HEADER_LEN: usize = 348;
const NIFTI_MAGIC: &[u8; 4] = b"n+1\0";
const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_QFORM: usize = 252;
const OFF_SFORM: usize = 254;
const OFF_MAGIC: usize = 344;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFormat {
    NiftiSubset,
    RawV1,
}

impl MaskFormat {
    /// Guess from the file name: `.nii` is NIfTI, anything else raw-v1.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("nii") => MaskFormat::NiftiSubset,
            _ => MaskFormat::RawV1,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> VolumeError {
    VolumeError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_mask(path: &Path, format: MaskFormat) -> Result<VoxelMask> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    match format {
        MaskFormat::RawV1 => parse_raw_v1(&bytes),
        MaskFormat::NiftiSubset => parse_nifti(&bytes),
    }
}

/// Writes `mask` as raw-v1. NIfTI output is not supported.
pub fn save_mask(mask: &VoxelMask, path: &Path) -> Result<()> {
    fs::write(path, write_raw_v1(mask)).map_err(|e| io_err(path, e))
}

pub fn write_raw_v1(mask: &VoxelMask) -> Vec<u8> {
    let mut out = Vec::with_capacity(RAW_V1_HEADER_LEN + mask.len());
    out.extend_from_slice(RAW_V1_MAGIC);
    for d in mask.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for s in mask.spacing() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.extend(mask.data().iter().map(|&v| u8::from(v)));
    out
}

fn need(bytes: &[u8], offset: usize, len: usize) -> Result<&[u8]> {
    bytes
        .get(offset..offset + len)
        .ok_or(VolumeError::Truncated {
            offset,
            needed: len,
            available: bytes.len(),
        })
}

pub fn parse_raw_v1(bytes: &[u8]) -> Result<VoxelMask> {
    if need(bytes, 0, 4)? != RAW_V1_MAGIC {
        return Err(VolumeError::BadMagic);
    }
    need(bytes, 0, RAW_V1_HEADER_LEN)?;
    let mut dims = [0usize; 3];
    for (axis, d) in dims.iter_mut().enumerate() {
        let off = 4 + 4 * axis;
        let v = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if v == 0 {
            return Err(VolumeError::MalformedHeader {
                offset: off,
                reason: format!("dimension along axis {axis} is zero"),
            });
        }
        *d = v as usize;
    }
    let mut spacing = [0f64; 3];
    for (axis, s) in spacing.iter_mut().enumerate() {
        let off = 16 + 8 * axis;
        let v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        if !(v.is_finite() && v > 0.0) {
            return Err(VolumeError::NonPositiveSpacing { offset: off, value: v });
        }
        *s = v;
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| VolumeError::MalformedHeader {
            offset: 4,
            reason: "voxel count overflows".into(),
        })?;
    let payload = need(bytes, RAW_V1_HEADER_LEN, n)?;
    let extra = bytes.len() - RAW_V1_HEADER_LEN - n;
    if extra != 0 {
        return Err(VolumeError::TrailingBytes(extra));
    }
    VoxelMask::new(dims, spacing, payload.iter().map(|&b| b > 0).collect())
}

#[derive(Clone, Copy)]
struct Endian {
    little: bool,
}

impl Endian {
    fn i16(self, b: &[u8], off: usize) -> i16 {
        let raw = [b[off], b[off + 1]];
        if self.little {
            i16::from_le_bytes(raw)
        } else {
            i16::from_be_bytes(raw)
        }
    }

    fn f32(self, b: &[u8], off: usize) -> f32 {
        let raw: [u8; 4] = b[off..off + 4].try_into().unwrap();
        if self.little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        }
    }
}

pub fn parse_nifti(bytes: &[u8]) -> Result<VoxelMask> {
    need(bytes, 0, NIFTI_HEADER_LEN)?;
    let sizeof_hdr: [u8; 4] = bytes[0..4].try_into().unwrap();
    let endian = if i32::from_le_bytes(sizeof_hdr) == NIFTI_HEADER_LEN as i32 {
        Endian { little: true }
    } else if i32::from_be_bytes(sizeof_hdr) == NIFTI_HEADER_LEN as i32 {
        Endian { little: false }
    } else {
        return Err(VolumeError::MalformedHeader {
            offset: 0,
            reason: "sizeof_hdr is not 348".into(),
        });
    };
    if &bytes[OFF_MAGIC..OFF_MAGIC + 4] != NIFTI_MAGIC {
        return Err(VolumeError::BadMagic);
    }

    let ndim = endian.i16(bytes, OFF_DIM);
    if !(3..=7).contains(&ndim) {
        return Err(VolumeError::MalformedHeader {
            offset: OFF_DIM,
            reason: format!("dim[0] = {ndim}, expected a 3-D volume"),
        });
    }
    let mut dims = [0usize; 3];
    for (axis, d) in dims.iter_mut().enumerate() {
        let off = OFF_DIM + 2 * (axis + 1);
        let v = endian.i16(bytes, off);
        if v <= 0 {
            return Err(VolumeError::MalformedHeader {
                offset: off,
                reason: format!("dim[{}] = {v}", axis + 1),
            });
        }
        *d = v as usize;
    }
    for extra in 4..=ndim as usize {
        let off = OFF_DIM + 2 * extra;
        let v = endian.i16(bytes, off);
        if v != 1 {
            return Err(VolumeError::MalformedHeader {
                offset: off,
                reason: format!("dim[{extra}] = {v}, only single-volume masks are supported"),
            });
        }
    }

    let datatype = endian.i16(bytes, OFF_DATATYPE);
    let width = match datatype {
        2 => 1,
        4 => 2,
        16 => 4,
        code => {
            return Err(VolumeError::UnsupportedDatatype {
                code,
                offset: OFF_DATATYPE,
            })
        }
    };
    let bitpix = endian.i16(bytes, OFF_BITPIX);
    if bitpix as usize != width * 8 {
        return Err(VolumeError::MalformedHeader {
            offset: OFF_BITPIX,
            reason: format!("bitpix {bitpix} inconsistent with datatype {datatype}"),
        });
    }

    let mut spacing = [0f64; 3];
    for (axis, s) in spacing.iter_mut().enumerate() {
        let off = OFF_PIXDIM + 4 * (axis + 1);
        let v = f64::from(endian.f32(bytes, off));
        if !(v.is_finite() && v > 0.0) {
            return Err(VolumeError::NonPositiveSpacing { offset: off, value: v });
        }
        *s = v;
    }

    let vox_offset = endian.f32(bytes, OFF_VOX_OFFSET);
    if !(vox_offset >= 348.0 && vox_offset.fract() == 0.0) {
        return Err(VolumeError::MalformedHeader {
            offset: OFF_VOX_OFFSET,
            reason: format!("vox_offset {vox_offset} is not a valid payload position"),
        });
    }
    let start = vox_offset as usize;

    if endian.i16(bytes, OFF_QFORM) != 0 || endian.i16(bytes, OFF_SFORM) != 0 {
        log::warn!("NIfTI orientation (qform/sform) present; only voxel spacing is used");
    }

    let n = dims[0] * dims[1] * dims[2];
    let payload = need(bytes, start, n * width)?;
    let data: Vec<bool> = match datatype {
        2 => payload.iter().map(|&b| b > 0).collect(),
        4 => payload
            .chunks_exact(2)
            .map(|c| endian.i16(c, 0) > 0)
            .collect(),
        _ => payload
            .chunks_exact(4)
            .map(|c| endian.f32(c, 0) > 0.0)
            .collect(),
    };
    VoxelMask::new(dims, spacing, data)
}
