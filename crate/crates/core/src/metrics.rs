//! Per-case segmentation quality and tumour morphometrics.
//!
//! Conventions:
//! - Dice of two empty masks is 1.0; with exactly one empty it is 0.0.
//! - HD95 is the larger of the two directed 95th percentiles of
//!   surface-to-surface distances, each percentile taken with linear
//!   interpolation at fractional rank `p * (n - 1)`. It is undefined (`None`)
//!   when either mask is empty.
//! - Elongation is `sqrt(l2 / l1)` from the covariance eigenvalues of the
//!   occupied voxel centres in mm; undefined for a single voxel.

use serde::Serialize;
use thiserror::Error;

use crate::volume::{edt, surface_mask, surface_voxels, VoxelMask};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("mask geometry mismatch: dims {a_dims:?} / {b_dims:?}, spacing {a_spacing:?} / {b_spacing:?}")]
    GeometryMismatch {
        a_dims: [usize; 3],
        b_dims: [usize; 3],
        a_spacing: [f64; 3],
        b_spacing: [f64; 3],
    },
    #[error("{0} of an empty mask is undefined")]
    EmptyMask(&'static str),
    #[error("percentile of an empty sample")]
    EmptySample,
}

pub type Result<T> = std::result::Result<T, MetricError>;

fn check_pair(a: &VoxelMask, b: &VoxelMask) -> Result<()> {
    if a.same_geometry(b) {
        Ok(())
    } else {
        Err(MetricError::GeometryMismatch {
            a_dims: a.dims(),
            b_dims: b.dims(),
            a_spacing: a.spacing(),
            b_spacing: b.spacing(),
        })
    }
}

pub fn dice(a: &VoxelMask, b: &VoxelMask) -> Result<f64> {
    check_pair(a, b)?;
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        na += usize::from(x);
        nb += usize::from(y);
        both += usize::from(x && y);
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Linear-interpolation percentile, `p` in `[0, 1]`. Sorts `values` in place.
pub fn percentile(values: &mut [f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(MetricError::EmptySample);
    }
    values.sort_unstable_by(f64::total_cmp);
    let rank = p.clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(values[lo] + (values[hi] - values[lo]) * frac)
}

/// Distances from every surface voxel of `from` to the surface of `to`.
fn directed_surface_distances(from: &VoxelMask, to: &VoxelMask) -> Vec<f64> {
    let field = edt(&surface_mask(to)).expect("non-empty mask has a non-empty surface");
    surface_voxels(from)
        .coords
        .iter()
        .map(|&[x, y, z]| field.get(x, y, z))
        .collect()
}

/// Symmetric surface-distance percentile (`q` in `[0, 1]`).
pub fn hausdorff_percentile(a: &VoxelMask, b: &VoxelMask, q: f64) -> Result<Option<f64>> {
    check_pair(a, b)?;
    if !a.has_occupied() || !b.has_occupied() {
        return Ok(None);
    }
    let mut ab = directed_surface_distances(a, b);
    let mut ba = directed_surface_distances(b, a);
    Ok(Some(percentile(&mut ab, q)?.max(percentile(&mut ba, q)?)))
}

pub fn hd95(a: &VoxelMask, b: &VoxelMask) -> Result<Option<f64>> {
    hausdorff_percentile(a, b, 0.95)
}

pub fn tumor_volume(m: &VoxelMask) -> f64 {
    m.count() as f64 * m.voxel_volume()
}

/// Area of exposed voxel faces in mm².
pub fn surface_area(m: &VoxelMask) -> Result<f64> {
    if !m.has_occupied() {
        return Err(MetricError::EmptyMask("surface area"));
    }
    let [sx, sy, sz] = m.spacing();
    let face = [sy * sz, sx * sz, sx * sy];
    let mut counts = [0usize; 3];
    for c in m.occupied() {
        // Two faces per axis; a face is hidden only by an occupied neighbour.
        let mut hidden = [0usize; 3];
        m.for_each_neighbor6(c, |j, axis| hidden[axis] += usize::from(m.data()[j]));
        for axis in 0..3 {
            counts[axis] += 2 - hidden[axis];
        }
    }
    Ok((0..3).map(|a| counts[a] as f64 * face[a]).sum())
}

pub fn sphericity(m: &VoxelMask) -> Result<f64> {
    let area = surface_area(m)?;
    let v = tumor_volume(m);
    Ok(std::f64::consts::PI.cbrt() * (6.0 * v).powf(2.0 / 3.0) / area)
}

/// Eigenvalues of a symmetric 3x3 matrix in descending order (closed-form
/// trigonometric solution).
pub fn symmetric_eigenvalues3(m: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let mut eig = if p1 == 0.0 {
        [m[0][0], m[1][1], m[2][2]]
    } else {
        let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
        let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
            }
        }
        let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
            - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
            + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let l1 = q + 2.0 * p * phi.cos();
        let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [l1, 3.0 * q - l1 - l3, l3]
    };
    eig.sort_unstable_by(|a, b| b.total_cmp(a));
    eig
}

/// Population covariance of occupied voxel centres (mm).
pub fn centroid_covariance(m: &VoxelMask) -> Option<[[f64; 3]; 3]> {
    let n = m.count();
    if n == 0 {
        return None;
    }
    let mut mean = [0.0; 3];
    for c in m.occupied() {
        let p = m.center_mm(c);
        (0..3).for_each(|i| mean[i] += p[i]);
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut cov = [[0.0; 3]; 3];
    for c in m.occupied() {
        let p = m.center_mm(c);
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    cov.iter_mut()
        .flatten()
        .for_each(|v| *v /= n as f64);
    Some(cov)
}

pub fn elongation(m: &VoxelMask) -> Option<f64> {
    if m.count() < 2 {
        return None;
    }
    let [l1, l2, _] = symmetric_eigenvalues3(centroid_covariance(m)?);
    if l1 <= 0.0 {
        return None;
    }
    Some((l2.max(0.0) / l1).sqrt().min(1.0))
}

/// Overlap metrics of a prediction against a reference, plus morphometrics
/// of the reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseMetrics {
    pub dice: f64,
    pub hd95_mm: Option<f64>,
    pub volume_mm3: f64,
    pub sphericity: Option<f64>,
    pub elongation: Option<f64>,
}

impl CaseMetrics {
    pub fn compute(prediction: &VoxelMask, reference: &VoxelMask) -> Result<Self> {
        Ok(Self {
            dice: dice(prediction, reference)?,
            hd95_mm: hd95(prediction, reference)?,
            volume_mm3: tumor_volume(reference),
            sphericity: sphericity(reference).ok(),
            elongation: elongation(reference),
        })
    }
}
