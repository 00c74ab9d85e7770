//! Synthetic specimens with known density, and the embedded study table.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::stats::{StatsError, StudyTable};
use crate::voxel::{DensityCalibration, GridGeometry, GridKind, IndexBox, RoiSample, VoxelError, VoxelGrid};

/// The published study table as CSV.
pub const TABLE1_CSV: &str = include_str!("../data/table1.csv");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhantomError {
    #[error("calibration insert {0} overlaps the body")]
    InsertOverlapsBody(usize),
    #[error("calibration insert {0} does not fit inside the grid")]
    InsertsDoNotFit(usize),
    #[error("invalid phantom: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PhantomShape {
    /// Rectangular block along z.
    Column { size_mm: [f64; 3], density: f64 },
    /// Elliptic cylinder along z with a dense shell on its side and ends.
    EllipticCylinderWithShell {
        semi_axes_mm: [f64; 2],
        height_mm: f64,
        core_density: f64,
        shell_density: f64,
        shell_thickness_mm: f64,
    },
}

impl PhantomShape {
    fn extent(&self) -> [f64; 3] {
        match *self {
            PhantomShape::Column { size_mm, .. } => size_mm,
            PhantomShape::EllipticCylinderWithShell { semi_axes_mm: [a, b], height_mm, .. } => {
                [2.0 * a, 2.0 * b, height_mm]
            }
        }
    }

    /// Density at a point relative to the body's minimum corner, if inside.
    fn density_at(&self, p: [f64; 3]) -> Option<f64> {
        let e = self.extent();
        if (0..3).any(|k| p[k] < 0.0 || p[k] > e[k]) {
            return None;
        }
        match *self {
            PhantomShape::Column { density, .. } => Some(density),
            PhantomShape::EllipticCylinderWithShell {
                semi_axes_mm: [a, b],
                height_mm,
                core_density,
                shell_density,
                shell_thickness_mm: t,
            } => {
                let (dx, dy) = (p[0] - a, p[1] - b);
                if (dx / a) * (dx / a) + (dy / b) * (dy / b) > 1.0 {
                    return None;
                }
                let (ia, ib) = (a - t, b - t);
                let in_core = ia > 0.0
                    && ib > 0.0
                    && (dx / ia) * (dx / ia) + (dy / ib) * (dy / ib) <= 1.0
                    && p[2] >= t
                    && p[2] <= height_mm - t;
                Some(if in_core { core_density } else { shell_density })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhantomSpec {
    pub shape: PhantomShape,
    pub voxel_size_mm: [f64; 3],
    /// Empty voxels around the body and inserts.
    pub margin_vox: usize,
    /// Known densities of the calibration inserts (g/cm³).
    pub inserts: Vec<f64>,
    /// Edge length of each cubic insert (voxels).
    pub insert_size_vox: usize,
    /// Minimum corner of the insert stack. Defaults to the low x/y corner,
    /// beside the body.
    pub insert_origin_vox: Option<[usize; 3]>,
    /// Grey encoding of density; the phantom stores `cal.grey(density)`.
    pub encoding: DensityCalibration,
    /// Gaussian noise on grey values (grey units); zero disables it.
    pub noise_sd: f64,
    pub seed: u64,
}

impl PhantomSpec {
    /// Noiseless column with three calibration inserts.
    pub fn column(size_mm: [f64; 3], density: f64, voxel_mm: f64) -> Self {
        Self {
            shape: PhantomShape::Column { size_mm, density },
            voxel_size_mm: [voxel_mm; 3],
            margin_vox: 2,
            inserts: vec![0.0, 0.1, 0.2],
            insert_size_vox: 3,
            insert_origin_vox: None,
            encoding: DensityCalibration { slope: 0.001, intercept: -0.1 },
            noise_sd: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhantomTruth {
    pub encoding: DensityCalibration,
    pub inserts: Vec<RoiSample>,
    /// Index box enclosing the body.
    pub body_box: IndexBox,
    pub body_voxels: usize,
    pub body_volume_mm3: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub grey: VoxelGrid,
    /// Noise-free density with inserts.
    pub density: VoxelGrid,
    /// Body voxels only, in grid order.
    pub body: Vec<bool>,
    pub truth: PhantomTruth,
}

pub fn gen_phantom(spec: &PhantomSpec) -> Result<Phantom, PhantomError> {
    let h = spec.voxel_size_mm;
    if h.iter().any(|v| !(*v > 0.0)) {
        return Err(PhantomError::Invalid("voxel size must be positive"));
    }
    let ext = spec.shape.extent();
    if ext.iter().any(|v| !(*v > 0.0)) {
        return Err(PhantomError::Invalid("body dimensions must be positive"));
    }
    let densities_ok = match spec.shape {
        PhantomShape::Column { density, .. } => density >= 0.0,
        PhantomShape::EllipticCylinderWithShell { core_density, shell_density, shell_thickness_mm, .. } => {
            core_density >= 0.0 && shell_density >= 0.0 && shell_thickness_mm >= 0.0
        }
    };
    if !densities_ok || spec.inserts.iter().any(|d| !(*d >= 0.0)) || spec.noise_sd < 0.0 {
        return Err(PhantomError::Invalid("densities and noise must be non-negative"));
    }
    if !spec.inserts.is_empty() && spec.insert_size_vox == 0 {
        return Err(PhantomError::Invalid("insert size must be at least one voxel"));
    }

    let m = spec.margin_vox;
    let s = spec.insert_size_vox;
    let n_ins = spec.inserts.len();
    let body_n: [usize; 3] = core::array::from_fn(|k| libm::round(ext[k] / h[k]).max(1.0) as usize);
    let auto_inserts = spec.insert_origin_vox.is_none() && n_ins > 0;
    let body_lo = [m + if auto_inserts { s + m } else { 0 }, m, m];
    let stack = if n_ins > 0 { n_ins * s + (n_ins - 1) } else { 0 };
    let dims = [body_lo[0] + body_n[0] + m, body_lo[1] + body_n[1] + m, (body_lo[2] + body_n[2]).max(m + stack) + m];
    let body_box = IndexBox::new(body_lo, core::array::from_fn(|k| body_lo[k] + body_n[k]));
    let geometry = GridGeometry::new(dims, h, [0.0; 3])?;

    let insert_origin = spec.insert_origin_vox.unwrap_or([m, m, m]);
    let mut samples = Vec::with_capacity(n_ins);
    for (i, &d) in spec.inserts.iter().enumerate() {
        let lo = [insert_origin[0], insert_origin[1], insert_origin[2] + i * (s + 1)];
        let region = IndexBox::new(lo, [lo[0] + s, lo[1] + s, lo[2] + s]);
        if !region.fits(dims) {
            return Err(PhantomError::InsertsDoNotFit(i));
        }
        if region.intersects(&body_box) {
            return Err(PhantomError::InsertOverlapsBody(i));
        }
        samples.push(RoiSample { region, known_density: d });
    }

    let mut density = vec![0.0; geometry.len()];
    let mut body = vec![false; geometry.len()];
    let origin_mm: [f64; 3] = core::array::from_fn(|k| body_lo[k] as f64 * h[k]);
    for [i, j, k] in body_box.iter() {
        let idx = geometry.index(i, j, k);
        let c = geometry.voxel_center(idx);
        let rel: [f64; 3] = core::array::from_fn(|a| c[a] - origin_mm[a]);
        if let Some(d) = spec.shape.density_at(rel) {
            density[idx] = d;
            body[idx] = true;
        }
    }
    for sample in &samples {
        for [i, j, k] in sample.region.iter() {
            density[geometry.index(i, j, k)] = sample.known_density;
        }
    }

    let mut grey: Vec<f64> = density.iter().map(|&d| spec.encoding.grey(d)).collect();
    if spec.noise_sd > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sd).map_err(|_| PhantomError::Invalid("noise must be finite"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for g in grey.iter_mut() {
            *g += normal.sample(&mut rng);
        }
    }
    let body_voxels = body.iter().filter(|&&b| b).count();
    let truth = PhantomTruth {
        encoding: spec.encoding,
        inserts: samples,
        body_box,
        body_voxels,
        body_volume_mm3: body_voxels as f64 * geometry.voxel_volume(),
        noise_sd: spec.noise_sd,
        seed: spec.seed,
    };
    Ok(Phantom {
        grey: VoxelGrid::new(geometry, GridKind::Grey, grey)?,
        density: VoxelGrid::new(geometry, GridKind::Density, density)?,
        body,
        truth,
    })
}

/// The 28-record study table shipped with the crate.
pub fn embedded_table1() -> StudyTable {
    parse_embedded().expect("embedded table is well formed")
}

fn parse_embedded() -> Result<StudyTable, StatsError> {
    StudyTable::from_csv(TABLE1_CSV)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ENSAM_OP1_T1;

    #[test]
    fn table_has_all_records() {
        let t = embedded_table1();
        assert_eq!(t.len(), 28);
        let r = &t.records[0];
        assert_eq!((r.donor.as_str(), r.level.as_str(), r.experimental), ("438", "L1", 1935.0));
        assert_eq!(r.numerical, [Some(2612.0), Some(2650.0), Some(1954.0), Some(2632.0), Some(2765.0)]);
        assert_eq!(t.column(ENSAM_OP1_T1).unwrap().len(), 28);
    }

    #[test]
    fn column_layout_is_disjoint() {
        let p = gen_phantom(&PhantomSpec::column([10.0, 10.0, 20.0], 0.3, 1.0)).unwrap();
        assert_eq!(p.truth.body_voxels, 10 * 10 * 20);
        assert!((p.truth.body_volume_mm3 - 2000.0).abs() < 1e-9);
        for s in &p.truth.inserts {
            assert!(!s.region.intersects(&p.truth.body_box));
        }
        let dims = p.grey.dims();
        assert_eq!(dims, [2 + 3 + 2 + 10 + 2, 2 + 10 + 2, 2 + 20 + 2]);
    }

    #[test]
    fn explicit_insert_placement_is_checked() {
        let mut spec = PhantomSpec::column([10.0, 10.0, 10.0], 0.3, 1.0);
        spec.insert_origin_vox = Some([4, 4, 4]);
        assert_eq!(gen_phantom(&spec), Err(PhantomError::InsertOverlapsBody(0)));
        spec.insert_origin_vox = Some([0, 0, 13]);
        assert_eq!(gen_phantom(&spec), Err(PhantomError::InsertsDoNotFit(0)));
    }
}
