//! Binary voxel masks and the geometric kernels built on them.
//!
//! Voxel `(x, y, z)` lives at linear index `x + nx * (y + ny * z)` (x
//! fastest). Voxel centres sit at `(i + 0.5) * spacing` mm along each axis,
//! and every distance in this module is measured between centres.

mod edt;
mod io;
mod morphology;
mod resample;
mod surface;

pub use edt::{edt, DistanceField};
pub use io::{
    load_mask, parse_nifti, parse_raw_v1, save_mask, write_raw_v1, MaskFormat, RAW_V1_HEADER_LEN,
    RAW_V1_MAGIC,
};
pub use morphology::{dilate, erode};
pub use resample::resample_nearest;
pub use surface::{surface_mask, surface_voxels, SurfaceSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("invalid dimensions {0:?}: every axis needs at least one voxel")]
    BadDims([usize; 3]),
    #[error("invalid spacing {0:?}: every component must be finite and > 0")]
    BadSpacing([f64; 3]),
    #[error("data length {got} does not match dims product {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("bad magic at byte 0")]
    BadMagic,
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("unsupported datatype code {code} at byte {offset}")]
    UnsupportedDatatype { code: i16, offset: usize },
    #[error("truncated payload: needed {needed} bytes from byte {offset}, file has {available}")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("non-positive spacing {value} at byte {offset}")]
    NonPositiveSpacing { offset: usize, value: f64 },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("resampling would produce zero voxels along axis {0}")]
    EmptyResample(usize),
    #[error("EDT of empty mask undefined")]
    EmptyEdt,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, VolumeError>;

/// Dense binary occupancy grid with physical voxel spacing in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<bool>,
}

fn check_geometry(dims: [usize; 3], spacing: [f64; 3]) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(VolumeError::BadDims(dims));
    }
    if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(VolumeError::BadSpacing(spacing));
    }
    Ok(())
}

impl VoxelMask {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<bool>) -> Result<Self> {
        check_geometry(dims, spacing)?;
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(VolumeError::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn empty(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        check_geometry(dims, spacing)?;
        Ok(Self {
            dims,
            spacing,
            data: vec![false; dims[0] * dims[1] * dims[2]],
        })
    }

    /// Mask whose voxel `(x, y, z)` is `f(x, y, z)`.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        mut f: impl FnMut(usize, usize, usize) -> bool,
    ) -> Result<Self> {
        check_geometry(dims, spacing)?;
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let idx = self.index(x, y, z);
        self.data[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn has_occupied(&self) -> bool {
        self.data.iter().any(|&v| v)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Occupied voxel coordinates in linear-index order.
    pub fn occupied(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| self.coords(i))
    }

    /// Centre of voxel `c` in mm.
    pub fn center_mm(&self, c: [usize; 3]) -> [f64; 3] {
        [
            (c[0] as f64 + 0.5) * self.spacing[0],
            (c[1] as f64 + 0.5) * self.spacing[1],
            (c[2] as f64 + 0.5) * self.spacing[2],
        ]
    }

    /// Same occupancy, different spacing.
    pub fn with_spacing(&self, spacing: [f64; 3]) -> Result<Self> {
        Self::new(self.dims, spacing, self.data.clone())
    }

    pub fn same_geometry(&self, other: &VoxelMask) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    /// Calls `f` with each in-grid 6-neighbour index of `(x, y, z)`, and
    /// returns whether any of the six faces lies on the grid boundary.
    #[inline]
    pub(crate) fn for_each_neighbor6(
        &self,
        [x, y, z]: [usize; 3],
        mut f: impl FnMut(usize, usize),
    ) -> bool {
        let [nx, ny, nz] = self.dims;
        let idx = self.index(x, y, z);
        let mut boundary = false;
        let stride = [1, nx, nx * ny];
        let pos = [x, y, z];
        let n = [nx, ny, nz];
        for axis in 0..3 {
            if pos[axis] > 0 {
                f(idx - stride[axis], axis);
            } else {
                boundary = true;
            }
            if pos[axis] + 1 < n[axis] {
                f(idx + stride[axis], axis);
            } else {
                boundary = true;
            }
        }
        boundary
    }
}
