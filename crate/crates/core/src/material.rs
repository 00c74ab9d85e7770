//! Density → elastic properties.
//!
//! Bone modulus follows the linear law `E = 3230 * BMD - 34.7` (MPa, BMD in
//! g/cm³), floored at 100 MPa. PMMA caps are homogeneous (E = 2500 MPa,
//! ν = 0.3).

use alloc::vec::Vec;

use thiserror::Error;

use crate::mesh::{ElementKind, ElementTag, Mesh};
use crate::voxel::{GridKind, VoxelGrid};

pub const MODULUS_SLOPE: f64 = 3230.0;
pub const MODULUS_INTERCEPT: f64 = -34.7;
pub const MODULUS_FLOOR: f64 = 100.0;
/// Positive floor used when the 100 MPa floor is switched off.
pub const MODULUS_MIN_POSITIVE: f64 = 1.0;
pub const PMMA_MODULUS: f64 = 2500.0;
pub const PMMA_POISSON: f64 = 0.3;
pub const ENSAM_POISSON: f64 = 0.4;
pub const LYON_POISSON: f64 = 0.3;
pub const LYON_YIELD_STRAIN: f64 = 0.007;
pub const DEFAULT_BIN_STEP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("element {0} contains no voxel centre")]
    NoVoxelInElement(usize),
    #[error("expected a density grid")]
    NotDensity,
    #[error("bin step must be positive, got {0}")]
    BadStep(f64),
    #[error("source voxel {voxel} of element {element} is outside the grid")]
    SourceOutOfRange { element: usize, voxel: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ModelVariant {
    /// Linear hexahedral model, ν = 0.4, failure by strained-volume criterion.
    Ensam,
    /// Elasto-perfectly-plastic tetrahedral model, ν = 0.3.
    Lyon,
}

impl ModelVariant {
    pub fn bone_poisson(self) -> f64 {
        match self {
            ModelVariant::Ensam => ENSAM_POISSON,
            ModelVariant::Lyon => LYON_POISSON,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Ensam => "ensam",
            ModelVariant::Lyon => "lyon",
        }
    }
}

/// Knobs for building a [`MaterialMap`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaterialOptions {
    pub variant: ModelVariant,
    /// Floor for bone modulus; 100 MPa unless deliberately lowered.
    pub floor: f64,
    /// Binning step in MPa; `None` keeps raw moduli.
    pub bin_step: Option<f64>,
}

impl MaterialOptions {
    pub fn ensam() -> Self {
        Self { variant: ModelVariant::Ensam, floor: MODULUS_FLOOR, bin_step: None }
    }

    pub fn lyon() -> Self {
        Self { variant: ModelVariant::Lyon, floor: MODULUS_FLOOR, bin_step: Some(DEFAULT_BIN_STEP) }
    }
}

/// Per-element elastic properties.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMap {
    pub variant: ModelVariant,
    /// Element BMD in g/cm³ (`NaN` for PMMA).
    pub bmd: Vec<f64>,
    /// Modulus straight from the density law, floored.
    pub e_raw: Vec<f64>,
    /// Modulus used by the solver (after binning, if any).
    pub e: Vec<f64>,
    pub nu: Vec<f64>,
    /// Yield strain for the plastic variant.
    pub yield_strain: Option<f64>,
}

impl MaterialMap {
    /// Homogeneous material, handy for fixtures.
    pub fn uniform(variant: ModelVariant, n: usize, e: f64, nu: f64) -> Self {
        Self {
            variant,
            bmd: alloc::vec![f64::NAN; n],
            e_raw: alloc::vec![e; n],
            e: alloc::vec![e; n],
            nu: alloc::vec![nu; n],
            yield_strain: match variant {
                ModelVariant::Ensam => None,
                ModelVariant::Lyon => Some(LYON_YIELD_STRAIN),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }
}

/// Element BMD from the density grid. Voxel-derived elements take their
/// source voxel's density; others average the voxels whose centres fall in
/// the element (half-open bounding box for Hex8, barycentric test for Tet10).
/// PMMA elements get `NaN`.
pub fn element_bmd(mesh: &Mesh, grid: &VoxelGrid) -> Result<Vec<f64>, MaterialError> {
    if grid.kind() != GridKind::Density {
        return Err(MaterialError::NotDensity);
    }
    let geo = grid.geometry();
    let mut out = Vec::with_capacity(mesh.elements.len());
    for (e, el) in mesh.elements.iter().enumerate() {
        if el.tag == ElementTag::Pmma {
            out.push(f64::NAN);
            continue;
        }
        if let Some(v) = el.source_voxel {
            let value = grid.values().get(v).ok_or(MaterialError::SourceOutOfRange { element: e, voxel: v })?;
            out.push(*value);
            continue;
        }
        let coords = mesh.element_coords(e);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for c in &coords {
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        // Index range of voxel centres that can fall inside the bounding box.
        let mut range = [(0usize, 0usize); 3];
        for a in 0..3 {
            let first = libm::ceil((lo[a] - geo.origin[a]) / geo.spacing[a] - 0.5).max(0.0);
            let last = libm::floor((hi[a] - geo.origin[a]) / geo.spacing[a] - 0.5);
            let last = last.min(geo.dims[a] as f64 - 1.0);
            if last < first {
                return Err(MaterialError::NoVoxelInElement(e));
            }
            range[a] = (first as usize, last as usize);
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for k in range[2].0..=range[2].1 {
            for j in range[1].0..=range[1].1 {
                for i in range[0].0..=range[0].1 {
                    let idx = geo.index(i, j, k);
                    let p = geo.voxel_center(idx);
                    let inside = match el.kind {
                        ElementKind::Hex8 => (0..3).all(|a| p[a] >= lo[a] && p[a] < hi[a]),
                        ElementKind::Tet10 => in_tet(&coords[..4], p),
                    };
                    if inside {
                        sum += grid.values()[idx];
                        n += 1;
                    }
                }
            }
        }
        if n == 0 {
            return Err(MaterialError::NoVoxelInElement(e));
        }
        out.push(sum / n as f64);
    }
    Ok(out)
}

fn in_tet(c: &[[f64; 3]], p: [f64; 3]) -> bool {
    let m: [[f64; 3]; 3] = core::array::from_fn(|r| core::array::from_fn(|a| c[r + 1][a] - c[0][a]));
    let det = crate::fem::shape::det3(&m);
    if det == 0.0 {
        return false;
    }
    // Solve p - c0 = Σ λ_r (c_r - c0) via the transposed inverse.
    let inv = crate::fem::shape::inv3(&m, det);
    let d = [p[0] - c[0][0], p[1] - c[0][1], p[2] - c[0][2]];
    let l: [f64; 3] = core::array::from_fn(|r| inv[0][r] * d[0] + inv[1][r] * d[1] + inv[2][r] * d[2]);
    let l0 = 1.0 - l[0] - l[1] - l[2];
    l0 >= 0.0 && l.iter().all(|&v| v >= 0.0)
}

/// `E = max(3230 * bmd - 34.7, 100)` in MPa.
pub fn bmd_to_modulus(bmd: f64) -> f64 {
    bmd_to_modulus_floored(bmd, MODULUS_FLOOR)
}

pub fn bmd_to_modulus_floored(bmd: f64, floor: f64) -> f64 {
    (MODULUS_SLOPE * bmd + MODULUS_INTERCEPT).max(floor)
}

/// Snaps a modulus to the nearest multiple of `step`, halves rounding up,
/// then re-applies the floor.
pub fn bin_modulus(e: f64, step: f64, floor: f64) -> f64 {
    (libm::floor(e / step + 0.5) * step).max(floor)
}

pub fn bin_materials(e_list: &[f64], step: f64) -> Result<Vec<f64>, MaterialError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(MaterialError::BadStep(step));
    }
    Ok(e_list.iter().map(|&e| bin_modulus(e, step, MODULUS_FLOOR)).collect())
}

/// Full material assignment for a mesh.
pub fn assign_materials(mesh: &Mesh, grid: &VoxelGrid, opts: &MaterialOptions) -> Result<MaterialMap, MaterialError> {
    if let Some(step) = opts.bin_step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(MaterialError::BadStep(step));
        }
    }
    let bmd = element_bmd(mesh, grid)?;
    let n = mesh.elements.len();
    let mut e_raw = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    for (el, &rho) in mesh.elements.iter().zip(&bmd) {
        match el.tag {
            ElementTag::Pmma => {
                e_raw.push(PMMA_MODULUS);
                e.push(PMMA_MODULUS);
                nu.push(PMMA_POISSON);
            }
            ElementTag::Bone => {
                let raw = bmd_to_modulus_floored(rho, opts.floor);
                e_raw.push(raw);
                e.push(match opts.bin_step {
                    Some(step) => bin_modulus(raw, step, opts.floor),
                    None => raw,
                });
                nu.push(opts.variant.bone_poisson());
            }
        }
    }
    Ok(MaterialMap {
        variant: opts.variant,
        bmd,
        e_raw,
        e,
        nu,
        yield_strain: match opts.variant {
            ModelVariant::Ensam => None,
            ModelVariant::Lyon => Some(LYON_YIELD_STRAIN),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{hex_mesh_from_mask, Element};
    use crate::segment::VoxelMask;
    use crate::voxel::GridGeometry;
    use alloc::vec;

    #[test]
    fn modulus_law() {
        assert!((bmd_to_modulus(0.1) - 288.3).abs() < 1e-9);
        assert_eq!(bmd_to_modulus(0.02), 100.0);
        assert!((bmd_to_modulus(1.0) - 3195.3).abs() < 1e-9);
    }

    #[test]
    fn binning() {
        assert_eq!(bin_materials(&[288.3, 285.0, 100.0, 94.0], 10.0).unwrap(), vec![290.0, 290.0, 100.0, 100.0]);
        assert!(bin_materials(&[1.0], 0.0).is_err());
    }

    fn two_voxel_grid() -> VoxelGrid {
        let g = GridGeometry::new([2, 1, 1], [1.0; 3], [0.0; 3]).unwrap();
        VoxelGrid::new(g, GridKind::Density, vec![0.1, 0.2]).unwrap()
    }

    #[test]
    fn bmd_from_source_voxel_and_span() {
        let grid = two_voxel_grid();
        let mut mask = VoxelMask::empty(*grid.geometry());
        mask.set(0, 0, 0, true);
        let mesh = hex_mesh_from_mask(&grid, &mask).unwrap();
        assert_eq!(element_bmd(&mesh, &grid).unwrap(), vec![0.1]);

        // A free-standing element covering both voxels.
        let mut span = Mesh {
            nodes: vec![
                [0.0, 0.0, 0.0],
                [2.0, 0.0, 0.0],
                [2.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [2.0, 0.0, 1.0],
                [2.0, 1.0, 1.0],
                [0.0, 1.0, 1.0],
            ],
            ..Mesh::default()
        };
        span.elements.push(Element {
            kind: ElementKind::Hex8,
            nodes: (0..8).collect(),
            tag: ElementTag::Bone,
            source_voxel: None,
        });
        let b = element_bmd(&span, &grid).unwrap();
        assert!((b[0] - 0.15).abs() < 1e-15);

        for n in span.nodes.iter_mut() {
            n[0] += 10.0;
        }
        assert_eq!(element_bmd(&span, &grid), Err(MaterialError::NoVoxelInElement(0)));
    }

    #[test]
    fn pmma_properties() {
        let grid = two_voxel_grid();
        let mut mask = VoxelMask::empty(*grid.geometry());
        mask.set(0, 0, 0, true);
        let mesh = hex_mesh_from_mask(&grid, &mask).unwrap();
        let capped = crate::mesh::extrude_pmma(&mesh, &Default::default(), 1.0).unwrap();
        let m = assign_materials(&capped, &grid, &MaterialOptions::ensam()).unwrap();
        assert!((m.e[0] - 288.3).abs() < 1e-9);
        assert_eq!(m.nu[0], 0.4);
        assert_eq!((m.e[1], m.nu[1]), (2500.0, 0.3));
        let lyon = assign_materials(&mesh, &grid, &MaterialOptions::lyon()).unwrap();
        assert_eq!(lyon.e[0], 290.0);
        assert_eq!(lyon.nu[0], 0.3);
        assert_eq!(lyon.yield_strain, Some(0.007));
    }
}
