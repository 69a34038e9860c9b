//! Binary erosion and dilation with the 6-connected structuring element.
//! Voxels outside the grid count as unoccupied.

use super::VoxelMask;

pub fn erode(mask: &VoxelMask) -> VoxelMask {
    let data = (0..mask.len())
        .map(|i| {
            if !mask.data()[i] {
                return false;
            }
            let mut keep = true;
            let boundary = mask.for_each_neighbor6(mask.coords(i), |j, _| keep &= mask.data()[j]);
            keep && !boundary
        })
        .collect();
    VoxelMask::new(mask.dims(), mask.spacing(), data).expect("same geometry")
}

pub fn dilate(mask: &VoxelMask) -> VoxelMask {
    let data = (0..mask.len())
        .map(|i| {
            let mut hit = mask.data()[i];
            if !hit {
                mask.for_each_neighbor6(mask.coords(i), |j, _| hit |= mask.data()[j]);
            }
            hit
        })
        .collect();
    VoxelMask::new(mask.dims(), mask.spacing(), data).expect("same geometry")
}
