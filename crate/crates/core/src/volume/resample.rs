use super::{Result, VolumeError, VoxelMask};

/// Relative slack when rounding physical extents up to whole voxels, so that
/// e.g. `3 * 0.1 / 0.1` is not pushed to 4 by floating-point noise.
const EXTENT_SLACK: f64 = 1e-9;

/// Nearest-neighbour resampling onto a grid with `target` spacing.
///
/// Both grids share their corner at the origin. Output voxel `j` takes the
/// value of the input voxel whose centre is nearest to `(j + 0.5) * target`;
/// exact ties go to the lower index.
pub fn resample_nearest(mask: &VoxelMask, target: [f64; 3]) -> Result<VoxelMask> {
    if target.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
        return Err(VolumeError::BadSpacing(target));
    }
    let dims = mask.dims();
    let spacing = mask.spacing();
    if spacing == target {
        return Ok(mask.clone());
    }
    let mut out_dims = [0usize; 3];
    let mut lookup: [Vec<usize>; 3] = Default::default();
    for axis in 0..3 {
        let extent = dims[axis] as f64 * spacing[axis] / target[axis];
        let n = (extent * (1.0 - EXTENT_SLACK)).ceil();
        if !(n >= 1.0) {
            return Err(VolumeError::EmptyResample(axis));
        }
        out_dims[axis] = n as usize;
        lookup[axis] = (0..out_dims[axis])
            .map(|j| {
                let u = (j as f64 + 0.5) * target[axis] / spacing[axis] - 0.5;
                let nearest = (u - 0.5).ceil();
                nearest.clamp(0.0, (dims[axis] - 1) as f64) as usize
            })
            .collect();
    }
    VoxelMask::from_fn(out_dims, target, |x, y, z| {
        mask.get(lookup[0][x], lookup[1][y], lookup[2][z])
    })
}
