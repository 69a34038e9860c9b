//! Exact Euclidean distance transform.
//!
//! Squared distances are computed with the separable lower-envelope-of-parabolas
//! algorithm (Felzenszwalb & Huttenlocher), one pass per axis, using physical
//! voxel-centre positions so anisotropic spacing is exact. Each pass processes
//! independent scanlines in parallel; every scanline is computed by the same
//! sequential code, so the result does not depend on the thread count.

use rayon::prelude::*;

use super::{Result, VolumeError, VoxelMask};

/// Per-voxel distance (mm) to the nearest occupied voxel centre of a source mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    dims: [usize; 3],
    values: Vec<f64>,
}

impl DistanceField {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[x + self.dims[0] * (y + self.dims[1] * z)]
    }
}

pub fn edt(mask: &VoxelMask) -> Result<DistanceField> {
    if !mask.has_occupied() {
        return Err(VolumeError::EmptyEdt);
    }
    let [nx, ny, nz] = mask.dims();
    let [sx, sy, sz] = mask.spacing();
    let mut sq: Vec<f64> = mask
        .data()
        .iter()
        .map(|&v| if v { 0.0 } else { f64::INFINITY })
        .collect();

    // x: rows are contiguous.
    sq.par_chunks_mut(nx).for_each_init(
        || Scratch::new(nx),
        |scratch, row| transform_line(row, sx, scratch),
    );

    // y: each z-slab is contiguous and holds nx columns of stride nx.
    sq.par_chunks_mut(nx * ny).for_each_init(
        || (Scratch::new(ny), vec![0.0; ny]),
        |(scratch, line), slab| {
            for x in 0..nx {
                for y in 0..ny {
                    line[y] = slab[x + nx * y];
                }
                transform_line(line, sy, scratch);
                for y in 0..ny {
                    slab[x + nx * y] = line[y];
                }
            }
        },
    );

    // z: gather every (x, y) column, transform, scatter back.
    if nz > 1 {
        let plane = nx * ny;
        let columns: Vec<Vec<f64>> = (0..plane)
            .into_par_iter()
            .map_init(
                || Scratch::new(nz),
                |scratch, xy| {
                    let mut col: Vec<f64> = (0..nz).map(|z| sq[xy + plane * z]).collect();
                    transform_line(&mut col, sz, scratch);
                    col
                },
            )
            .collect();
        for (xy, col) in columns.into_iter().enumerate() {
            for (z, v) in col.into_iter().enumerate() {
                sq[xy + plane * z] = v;
            }
        }
    }

    Ok(DistanceField {
        dims: mask.dims(),
        values: sq.into_iter().map(f64::sqrt).collect(),
    })
}

struct Scratch {
    /// Indices of parabolas in the lower envelope.
    sites: Vec<usize>,
    /// Left boundary of each envelope segment.
    bounds: Vec<f64>,
    out: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
            out: vec![0.0; n],
        }
    }
}

/// In-place 1-D squared-distance transform of `f` sampled at `i * step`.
/// Infinite entries are treated as absent sites.
fn transform_line(f: &mut [f64], step: f64, s: &mut Scratch) {
    let n = f.len();
    let pos = |i: usize| i as f64 * step;
    let intersect = |q: usize, p: usize, f: &[f64]| {
        ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)))
    };

    let mut k: usize = 0;
    let mut any = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        if !any {
            any = true;
            s.sites[0] = q;
            s.bounds[0] = f64::NEG_INFINITY;
            s.bounds[1] = f64::INFINITY;
            continue;
        }
        let mut b = intersect(q, s.sites[k], f);
        while b <= s.bounds[k] {
            // k > 0 here: bounds[0] is -inf.
            k -= 1;
            b = intersect(q, s.sites[k], f);
        }
        k += 1;
        s.sites[k] = q;
        s.bounds[k] = b;
        s.bounds[k + 1] = f64::INFINITY;
    }
    if !any {
        return;
    }

    let mut k = 0;
    for q in 0..n {
        while s.bounds[k + 1] < pos(q) {
            k += 1;
        }
        let d = pos(q) - pos(s.sites[k]);
        s.out[q] = d * d + f[s.sites[k]];
    }
    f.copy_from_slice(&s.out[..n]);
}
