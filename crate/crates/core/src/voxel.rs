//! Regular voxel grids, phantom-based density calibration and box-average
//! resampling.
//!
//! Grids are stored x-fastest: the linear index of voxel `(i, j, k)` is
//! `i + nx * (j + ny * k)`. `origin` is the minimum corner of voxel `(0, 0, 0)`,
//! so voxel centres sit at `origin + (i + 0.5) * spacing`.

use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VoxelError {
    #[error("grid dimensions must all be at least 1, got {0:?}")]
    EmptyDims([usize; 3]),
    #[error("grid spacing must be finite and positive, got {0:?}")]
    BadSpacing([f64; 3]),
    #[error("value count {got} does not match dims product {expected}")]
    ValueCount { expected: usize, got: usize },
    #[error("calibration needs at least two samples, got {0}")]
    FewerThanTwoSamples(usize),
    #[error("calibration samples all share the same mean grey value")]
    DegenerateFit,
    #[error("fitted calibration slope {0} is not positive")]
    NonPositiveSlope(f64),
    #[error("calibration sample region {0:?} is empty or outside the grid")]
    BadRegion(IndexBox),
    #[error("known density {0} is negative")]
    NegativeDensity(f64),
    #[error("expected a {expected:?} grid, got {got:?}")]
    WrongKind { expected: GridKind, got: GridKind },
    #[error("target spacing {target:?} is finer than source spacing {current:?}")]
    UpsampleRequested { current: [f64; 3], target: [f64; 3] },
}

/// What the scalar values of a grid mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum GridKind {
    /// Raw scanner grey values.
    Grey,
    /// Calibrated bone mineral density in g/cm³.
    Density,
}

/// Dimensions, spacing (mm) and origin (mm) shared by grids and masks.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridGeometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl GridGeometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self, VoxelError> {
        if dims.contains(&0) {
            return Err(VoxelError::EmptyDims(dims));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(VoxelError::BadSpacing(spacing));
        }
        Ok(Self { dims, spacing, origin })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    pub fn voxel_center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        core::array::from_fn(|a| self.origin[a] + (c[a] as f64 + 0.5) * self.spacing[a])
    }

    /// Physical position of lattice corner `(i, j, k)`; indices may lie
    /// outside the grid (used when extruding beyond it).
    pub fn corner(&self, ijk: [i64; 3]) -> [f64; 3] {
        core::array::from_fn(|a| self.origin[a] + ijk[a] as f64 * self.spacing[a])
    }
}

/// Axis-aligned box `[lo, hi)` in voxel index space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndexBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl IndexBox {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.hi[a] <= self.lo[a])
    }

    pub fn fits(&self, dims: [usize; 3]) -> bool {
        !self.is_empty() && (0..3).all(|a| self.hi[a] <= dims[a])
    }

    pub fn intersects(&self, other: &IndexBox) -> bool {
        (0..3).all(|a| self.lo[a] < other.hi[a] && other.lo[a] < self.hi[a])
    }

    pub fn iter(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let (lo, hi) = (self.lo, self.hi);
        (lo[2]..hi[2]).flat_map(move |k| (lo[1]..hi[1]).flat_map(move |j| (lo[0]..hi[0]).map(move |i| [i, j, k])))
    }
}

/// A regular 3D scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    geometry: GridGeometry,
    kind: GridKind,
    values: Vec<f64>,
}

impl VoxelGrid {
    pub fn new(geometry: GridGeometry, kind: GridKind, values: Vec<f64>) -> Result<Self, VoxelError> {
        let geometry = GridGeometry::new(geometry.dims, geometry.spacing, geometry.origin)?;
        if values.len() != geometry.len() {
            return Err(VoxelError::ValueCount { expected: geometry.len(), got: values.len() });
        }
        Ok(Self { geometry, kind, values })
    }

    pub fn filled(geometry: GridGeometry, kind: GridKind, value: f64) -> Result<Self, VoxelError> {
        let n = GridGeometry::new(geometry.dims, geometry.spacing, geometry.origin)?.len();
        Self::new(geometry, kind, alloc::vec![value; n])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.geometry.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.geometry.origin
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.geometry.index(i, j, k)]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn expect_kind(&self, expected: GridKind) -> Result<(), VoxelError> {
        if self.kind != expected {
            return Err(VoxelError::WrongKind { expected, got: self.kind });
        }
        Ok(())
    }

    /// Arithmetic mean of the voxels in `region`.
    pub fn region_mean(&self, region: &IndexBox) -> Result<f64, VoxelError> {
        if !region.fits(self.dims()) {
            return Err(VoxelError::BadRegion(*region));
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for [i, j, k] in region.iter() {
            sum += self.get(i, j, k);
            n += 1;
        }
        Ok(sum / n as f64)
    }

    /// Volume-weighted mean over the whole grid.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Linear map from grey value to density: `density = slope * grey + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensityCalibration {
    /// g/cm³ per grey unit.
    pub slope: f64,
    /// g/cm³.
    pub intercept: f64,
}

impl DensityCalibration {
    pub fn new(slope: f64, intercept: f64) -> Result<Self, VoxelError> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(VoxelError::NonPositiveSlope(slope));
        }
        Ok(Self { slope, intercept })
    }

    #[inline]
    pub fn density(&self, grey: f64) -> f64 {
        self.slope * grey + self.intercept
    }

    #[inline]
    pub fn grey(&self, density: f64) -> f64 {
        (density - self.intercept) / self.slope
    }
}

/// A calibration insert: a region of the grid with a known density.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoiSample {
    pub region: IndexBox,
    pub known_density: f64,
}

/// Least-squares fit of density against the mean grey value of each insert.
pub fn calibrate_from_phantom(grid: &VoxelGrid, samples: &[RoiSample]) -> Result<DensityCalibration, VoxelError> {
    grid.expect_kind(GridKind::Grey)?;
    if samples.len() < 2 {
        return Err(VoxelError::FewerThanTwoSamples(samples.len()));
    }
    let mut points = Vec::with_capacity(samples.len());
    for s in samples {
        if !(s.known_density >= 0.0) {
            return Err(VoxelError::NegativeDensity(s.known_density));
        }
        points.push((grid.region_mean(&s.region)?, s.known_density));
    }
    fit_line(&points)
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<DensityCalibration, VoxelError> {
    if points.len() < 2 {
        return Err(VoxelError::FewerThanTwoSamples(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(VoxelError::DegenerateFit);
    }
    let slope = sxy / sxx;
    DensityCalibration::new(slope, my - slope * mx)
}

/// Converts a grey grid to density. Negative densities are kept; clamping is
/// the material mapping's job.
pub fn apply_calibration(grid: &VoxelGrid, cal: &DensityCalibration) -> Result<VoxelGrid, VoxelError> {
    grid.expect_kind(GridKind::Grey)?;
    Ok(VoxelGrid {
        geometry: grid.geometry,
        kind: GridKind::Density,
        values: grid.values.iter().map(|&g| cal.density(g)).collect(),
    })
}

/// Per-axis overlap weights between output cells and source voxels, expressed
/// in source-voxel units and normalised so that each output cell's weights sum
/// to one.
fn axis_weights(n_src: usize, ratio: f64) -> Vec<Vec<(usize, f64)>> {
    let extent = n_src as f64;
    // Tolerate round-off in extent / ratio when the target divides the extent.
    let n_out = libm::ceil(extent / ratio - 1e-9).max(1.0) as usize;
    let mut out = Vec::with_capacity(n_out);
    for o in 0..n_out {
        let a = o as f64 * ratio;
        let b = if o + 1 == n_out { extent } else { ((o + 1) as f64 * ratio).min(extent) };
        let len = b - a;
        let first = libm::floor(a) as usize;
        let mut w = Vec::new();
        let mut i = first;
        while i < n_src && (i as f64) < b {
            let lo = a.max(i as f64);
            let hi = b.min((i + 1) as f64);
            if hi > lo {
                w.push((i, (hi - lo) / len));
            }
            i += 1;
        }
        out.push(w);
    }
    out
}

/// Box-average resampling to a coarser spacing. Each output voxel holds the
/// volume-weighted mean of the source voxels it overlaps; the last cell along
/// each axis is averaged over its overlap with the source extent.
pub fn downsample(grid: &VoxelGrid, target_spacing: [f64; 3]) -> Result<VoxelGrid, VoxelError> {
    let src = grid.spacing();
    if target_spacing.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
        return Err(VoxelError::BadSpacing(target_spacing));
    }
    if (0..3).any(|a| target_spacing[a] < src[a]) {
        return Err(VoxelError::UpsampleRequested { current: src, target: target_spacing });
    }
    if target_spacing == src {
        return Ok(grid.clone());
    }
    let dims = grid.dims();
    let w: [Vec<Vec<(usize, f64)>>; 3] = core::array::from_fn(|a| axis_weights(dims[a], target_spacing[a] / src[a]));
    let out_dims = [w[0].len(), w[1].len(), w[2].len()];
    let mut values = Vec::with_capacity(out_dims.iter().product());
    for wz in &w[2] {
        for wy in &w[1] {
            for wx in &w[0] {
                let mut acc = 0.0;
                for &(k, fz) in wz {
                    for &(j, fy) in wy {
                        let fyz = fy * fz;
                        for &(i, fx) in wx {
                            acc += fx * fyz * grid.get(i, j, k);
                        }
                    }
                }
                values.push(acc);
            }
        }
    }
    let geometry = GridGeometry::new(out_dims, target_spacing, grid.origin())?;
    VoxelGrid::new(geometry, grid.kind, values)
}
