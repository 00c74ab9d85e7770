//! Vertebral-body masks: density threshold, island removal and closing.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::voxel::{GridGeometry, GridKind, VoxelGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("mask has no set voxels")]
    EmptyMask,
    #[error("threshold {0} is not finite")]
    BadThreshold(f64),
    #[error("expected a density grid")]
    NotDensity,
    #[error("mask length {got} does not match geometry {expected}")]
    BitCount { expected: usize, got: usize },
}

/// Neighbourhood used for connected-component labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Connectivity {
    #[default]
    Face6,
    Vertex26,
}

impl Connectivity {
    fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let l1 = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Face6 => l1 == 1,
                        Connectivity::Vertex26 => l1 > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Boolean voxel mask sharing its source grid's geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMask {
    geometry: GridGeometry,
    bits: Vec<bool>,
}

impl VoxelMask {
    pub fn new(geometry: GridGeometry, bits: Vec<bool>) -> Result<Self, SegmentError> {
        if bits.len() != geometry.len() {
            return Err(SegmentError::BitCount { expected: geometry.len(), got: bits.len() });
        }
        Ok(Self { geometry, bits })
    }

    pub fn empty(geometry: GridGeometry) -> Self {
        Self { geometry, bits: vec![false; geometry.len()] }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.bits[self.geometry.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, on: bool) {
        let idx = self.geometry.index(i, j, k);
        self.bits[idx] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &VoxelMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Linear indices of set voxels in ascending order.
    pub fn set_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    fn neighbour(&self, idx: usize, d: [i64; 3]) -> Option<usize> {
        let c = self.geometry.coords(idx);
        let mut n = [0usize; 3];
        for a in 0..3 {
            let v = c[a] as i64 + d[a];
            if v < 0 || v >= self.geometry.dims[a] as i64 {
                return None;
            }
            n[a] = v as usize;
        }
        Some(self.geometry.index(n[0], n[1], n[2]))
    }
}

/// Sets every voxel whose density is at least `tau`.
pub fn threshold_mask(grid: &VoxelGrid, tau: f64) -> Result<VoxelMask, SegmentError> {
    if !tau.is_finite() {
        return Err(SegmentError::BadThreshold(tau));
    }
    if grid.kind() != GridKind::Density {
        return Err(SegmentError::NotDensity);
    }
    Ok(VoxelMask { geometry: *grid.geometry(), bits: grid.values().iter().map(|&v| v >= tau).collect() })
}

/// Labels connected components by breadth-first flood fill. Components are
/// numbered in order of their smallest linear index. Returns per-voxel labels
/// (`u32::MAX` for unset voxels) and each component's size.
pub fn label_components(mask: &VoxelMask, connectivity: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let offsets = connectivity.offsets();
    let mut labels = vec![u32::MAX; mask.bits.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..mask.bits.len() {
        if !mask.bits[seed] || labels[seed] != u32::MAX {
            continue;
        }
        let label = sizes.len() as u32;
        labels[seed] = label;
        queue.push_back(seed);
        let mut size = 0usize;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for d in &offsets {
                if let Some(n) = mask.neighbour(v, *d) {
                    if mask.bits[n] && labels[n] == u32::MAX {
                        labels[n] = label;
                        queue.push_back(n);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keeps only the largest connected component. Ties go to the component whose
/// smallest linear index is lowest.
pub fn largest_component(mask: &VoxelMask, connectivity: Connectivity) -> Result<VoxelMask, SegmentError> {
    let (labels, sizes) = label_components(mask, connectivity);
    let mut best: Option<(usize, usize)> = None;
    for (label, &size) in sizes.iter().enumerate() {
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((label, size));
        }
    }
    let (keep, _) = best.ok_or(SegmentError::EmptyMask)?;
    Ok(VoxelMask { geometry: mask.geometry, bits: labels.iter().map(|&l| l == keep as u32).collect() })
}

fn ball_offsets(radius: usize) -> Vec<[i64; 3]> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy + dz * dz <= r * r {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Morphological closing (dilation then erosion) with a discrete ball of
/// `radius_vox` voxels. The mask is padded by the radius so that bodies
/// touching the grid border are not eroded by the outside.
pub fn close_mask(mask: &VoxelMask, radius_vox: usize) -> VoxelMask {
    if radius_vox == 0 || mask.count() == 0 {
        return mask.clone();
    }
    let r = radius_vox;
    let d = mask.dims();
    let pd = [d[0] + 2 * r, d[1] + 2 * r, d[2] + 2 * r];
    let pidx = |i: usize, j: usize, k: usize| i + pd[0] * (j + pd[1] * k);
    let n = pd[0] * pd[1] * pd[2];
    let mut padded = vec![false; n];
    for k in 0..d[2] {
        for j in 0..d[1] {
            for i in 0..d[0] {
                padded[pidx(i + r, j + r, k + r)] = mask.get(i, j, k);
            }
        }
    }
    let ball = ball_offsets(r);
    let dilated = morph(&padded, pd, &ball, true);
    let closed = morph(&dilated, pd, &ball, false);
    let mut out = VoxelMask::empty(mask.geometry);
    for k in 0..d[2] {
        for j in 0..d[1] {
            for i in 0..d[0] {
                out.set(i, j, k, closed[pidx(i + r, j + r, k + r)]);
            }
        }
    }
    out
}

/// Dilation (`grow`) or erosion over a padded volume; out-of-volume voxels
/// count as unset.
fn morph(src: &[bool], dims: [usize; 3], ball: &[[i64; 3]], grow: bool) -> Vec<bool> {
    let mut out = vec![!grow; src.len()];
    let at = |c: [i64; 3]| -> bool {
        if (0..3).any(|a| c[a] < 0 || c[a] >= dims[a] as i64) {
            return false;
        }
        src[c[0] as usize + dims[0] * (c[1] as usize + dims[1] * c[2] as usize)]
    };
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let c = [i as i64, j as i64, k as i64];
                let hit = if grow {
                    ball.iter().any(|o| at([c[0] + o[0], c[1] + o[1], c[2] + o[2]]))
                } else {
                    ball.iter().all(|o| at([c[0] + o[0], c[1] + o[1], c[2] + o[2]]))
                };
                out[i + dims[0] * (j + dims[1] * k)] = hit;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(d: [usize; 3]) -> GridGeometry {
        GridGeometry::new(d, [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn threshold_definition() {
        let g = geom([2, 1, 1]);
        let grid = VoxelGrid::new(g, GridKind::Density, alloc::vec![0.05, 0.15]).unwrap();
        assert_eq!(threshold_mask(&grid, 0.1).unwrap().bits(), &[false, true]);
        let c = VoxelGrid::filled(geom([3, 3, 3]), GridKind::Density, 0.2).unwrap();
        assert_eq!(threshold_mask(&c, 0.1).unwrap().count(), 27);
        assert_eq!(threshold_mask(&c, 0.3).unwrap().count(), 0);
        assert!(threshold_mask(&c, f64::NAN).is_err());
    }

    fn mask_with(d: [usize; 3], on: &[[usize; 3]]) -> VoxelMask {
        let mut m = VoxelMask::empty(geom(d));
        for c in on {
            m.set(c[0], c[1], c[2], true);
        }
        m
    }

    #[test]
    fn keeps_larger_blob() {
        let mut on = Vec::new();
        for i in 0..10 {
            on.push([i, 0, 0]);
        }
        for i in 0..5 {
            on.push([i, 2, 0]);
        }
        let m = mask_with([10, 3, 1], &on);
        let kept = largest_component(&m, Connectivity::Face6).unwrap();
        assert_eq!(kept.count(), 10);
        assert!((0..10).all(|i| kept.get(i, 0, 0)));
    }

    #[test]
    fn single_blob_unchanged_and_empty_errors() {
        let m = mask_with([3, 3, 1], &[[0, 0, 0], [1, 0, 0], [1, 1, 0]]);
        assert_eq!(largest_component(&m, Connectivity::Face6).unwrap(), m);
        let e = VoxelMask::empty(geom([2, 2, 2]));
        assert_eq!(largest_component(&e, Connectivity::Face6), Err(SegmentError::EmptyMask));
    }

    #[test]
    fn diagonal_contact_depends_on_connectivity() {
        let m = mask_with([2, 2, 1], &[[0, 0, 0], [1, 1, 0]]);
        assert_eq!(largest_component(&m, Connectivity::Face6).unwrap().count(), 1);
        assert_eq!(largest_component(&m, Connectivity::Vertex26).unwrap().count(), 2);
    }

    #[test]
    fn closing_fills_cavity() {
        let mut m = VoxelMask::empty(geom([7, 7, 7]));
        for k in 1..6 {
            for j in 1..6 {
                for i in 1..6 {
                    m.set(i, j, k, true);
                }
            }
        }
        let full = m.clone();
        m.set(3, 3, 3, false);
        assert_eq!(close_mask(&m, 1), full);
        assert_eq!(close_mask(&m, 0), m);
        let e = VoxelMask::empty(geom([4, 4, 4]));
        assert_eq!(close_mask(&e, 2), e);
    }

    #[test]
    fn closing_does_not_erode_border_bodies() {
        let mut m = VoxelMask::empty(geom([3, 3, 3]));
        for idx in 0..27 {
            let c = m.geometry.coords(idx);
            m.set(c[0], c[1], c[2], true);
        }
        assert_eq!(close_mask(&m, 1), m);
    }
}
