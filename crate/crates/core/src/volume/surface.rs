use super::VoxelMask;

/// Occupied voxels with at least one unoccupied or out-of-grid 6-neighbour.
/// Coordinates are unique and sorted lexicographically by `[x, y, z]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SurfaceSet {
    pub coords: Vec<[usize; 3]>,
}

impl SurfaceSet {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

fn is_surface(mask: &VoxelMask, idx: usize) -> bool {
    if !mask.data()[idx] {
        return false;
    }
    let mut exposed = false;
    let boundary = mask.for_each_neighbor6(mask.coords(idx), |j, _| {
        exposed |= !mask.data()[j];
    });
    boundary || exposed
}

pub fn surface_voxels(mask: &VoxelMask) -> SurfaceSet {
    let mut coords: Vec<[usize; 3]> = (0..mask.len())
        .filter(|&i| is_surface(mask, i))
        .map(|i| mask.coords(i))
        .collect();
    coords.sort_unstable();
    SurfaceSet { coords }
}

/// The surface voxels as a mask on the parent grid.
pub fn surface_mask(mask: &VoxelMask) -> VoxelMask {
    let data = (0..mask.len()).map(|i| is_surface(mask, i)).collect();
    VoxelMask::new(mask.dims(), mask.spacing(), data).expect("same geometry as parent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_voxel_is_its_own_surface() {
        let mut m = VoxelMask::empty([3, 3, 3], [1.0; 3]).unwrap();
        m.set(1, 1, 1, true);
        assert_eq!(surface_voxels(&m).coords, vec![[1, 1, 1]]);
    }

    #[test]
    fn full_cube_keeps_only_center_interior() {
        let m = VoxelMask::from_fn([3, 3, 3], [1.0; 3], |_, _, _| true).unwrap();
        let s = surface_voxels(&m);
        assert_eq!(s.len(), 26);
        assert!(!s.coords.contains(&[1, 1, 1]));
        assert!(s.coords.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_mask_has_empty_surface() {
        let m = VoxelMask::empty([4, 4, 4], [1.0; 3]).unwrap();
        assert!(surface_voxels(&m).is_empty());
    }

    #[test]
    fn peeling_a_ball_shrinks_it() {
        let c = 5.0;
        let ball = VoxelMask::from_fn([11, 11, 11], [1.0; 3], |x, y, z| {
            let d = [x as f64 - c, y as f64 - c, z as f64 - c];
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= 16.0
        })
        .unwrap();
        let s = surface_voxels(&ball);
        assert!(s.coords.iter().all(|&[x, y, z]| ball.get(x, y, z)));
        let mut peeled = ball.clone();
        for &[x, y, z] in &s.coords {
            peeled.set(x, y, z, false);
        }
        assert!(peeled.count() < ball.count());
        assert!(peeled.has_occupied());
        assert_eq!(surface_mask(&ball).count(), s.len());
    }
}
