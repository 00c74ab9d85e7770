//! Voxel-derived meshes: one Hex8 per voxel, or a conforming Kuhn split of
//! every voxel into six Tet10 elements. Also endplate detection, PMMA cap
//! extrusion and the anterior-third load point.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::fem::shape::{self, TET10_EDGES};
use crate::segment::VoxelMask;
use crate::voxel::{GridGeometry, VoxelGrid};

pub const PMMA_TOP: &str = "pmma_top";
pub const PMMA_BOTTOM: &str = "pmma_bottom";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mask has no set voxels")]
    EmptyMask,
    #[error("mask geometry does not match the grid")]
    GeometryMismatch,
    #[error("empty endplate: {0}")]
    EmptyEndplate(&'static str),
    #[error("PMMA extrusion needs a voxel hex mesh")]
    NotHexMesh,
    #[error("PMMA thickness must be positive, got {0}")]
    BadThickness(f64),
    #[error("orientation axes must be perpendicular")]
    BadOrientation,
    #[error("mesh has no bone elements")]
    NoBone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ElementKind {
    Hex8,
    Tet10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ElementTag {
    Bone,
    Pmma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub nodes: Vec<usize>,
    pub tag: ElementTag,
    /// Linear index of the voxel this element was cut from.
    pub source_voxel: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignedAxis {
    pub axis: Axis,
    pub positive: bool,
}

impl SignedAxis {
    pub fn sign(&self) -> f64 {
        if self.positive {
            1.0
        } else {
            -1.0
        }
    }
}

/// Anatomical frame of the specimen in grid coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Orientation {
    /// Inferior → superior runs along `+axial`.
    pub axial: Axis,
    pub anterior: SignedAxis,
}

impl Default for Orientation {
    fn default() -> Self {
        Self { axial: Axis::Z, anterior: SignedAxis { axis: Axis::Y, positive: true } }
    }
}

impl Orientation {
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.axial == self.anterior.axis {
            return Err(MeshError::BadOrientation);
        }
        Ok(())
    }

    /// The left-right axis.
    pub fn lateral(&self) -> usize {
        3 - self.axial.index() - self.anterior.axis.index()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<Element>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    /// Voxel lattice the mesh was built on, when voxel-derived.
    pub lattice: Option<GridGeometry>,
}

/// Sorted corner ids identifying a face; triangles pad with `usize::MAX`.
pub type FaceKey = [usize; 4];

impl Mesh {
    pub fn element_coords(&self, e: usize) -> Vec<[f64; 3]> {
        self.elements[e].nodes.iter().map(|&n| self.nodes[n]).collect()
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        let el = &self.elements[e];
        shape::volume(el.kind, &self.element_coords(e)).0
    }

    pub fn bone_elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.elements.iter().enumerate().filter(|(_, e)| e.tag == ElementTag::Bone).map(|(i, _)| i)
    }

    pub fn bone_volume(&self) -> f64 {
        self.bone_elements().map(|e| self.element_volume(e)).sum()
    }

    pub fn node_set(&self, name: &str) -> Option<&[usize]> {
        self.node_sets.get(name).map(|v| v.as_slice())
    }

    /// Smallest Jacobian determinant over every integration point.
    pub fn min_jacobian(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| shape::volume(self.elements[e].kind, &self.element_coords(e)).1)
            .fold(f64::INFINITY, f64::min)
    }

    fn face_key(&self, e: usize, face: &[usize]) -> FaceKey {
        let el = &self.elements[e];
        let mut k = [usize::MAX; 4];
        for (slot, &c) in k.iter_mut().zip(face) {
            *slot = el.nodes[c];
        }
        k.sort_unstable();
        k
    }

    /// Every face of the selected elements, keyed by its corners, with the
    /// `(element, local face)` pairs that own it.
    pub fn faces_where(&self, keep: impl Fn(&Element) -> bool) -> BTreeMap<FaceKey, Vec<(usize, usize)>> {
        let mut map: BTreeMap<FaceKey, Vec<(usize, usize)>> = BTreeMap::new();
        for (e, el) in self.elements.iter().enumerate() {
            if !keep(el) {
                continue;
            }
            for (f, face) in el.kind.faces().iter().enumerate() {
                map.entry(self.face_key(e, face)).or_default().push((e, f));
            }
        }
        map
    }

    /// All node ids on face `f` of element `e`, sorted.
    pub fn face_node_ids(&self, e: usize, f: usize) -> Vec<usize> {
        let el = &self.elements[e];
        let mut ids: Vec<usize> = el.kind.face_nodes(el.kind.faces()[f]).iter().map(|&l| el.nodes[l]).collect();
        ids.sort_unstable();
        ids
    }

    /// Pairs of bone elements sharing a complete face.
    pub fn bone_face_adjacency(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for owners in self.faces_where(|e| e.tag == ElementTag::Bone).values() {
            if owners.len() == 2 {
                out.push((owners[0].0.min(owners[1].0), owners[0].0.max(owners[1].0)));
            }
        }
        out.sort_unstable();
        out
    }

    /// Nodes on faces owned by exactly one of the selected elements.
    pub fn boundary_nodes_where(&self, keep: impl Fn(&Element) -> bool) -> Vec<usize> {
        let mut flag = vec![false; self.nodes.len()];
        for owners in self.faces_where(keep).values() {
            if owners.len() == 1 {
                let (e, f) = owners[0];
                for n in self.face_node_ids(e, f) {
                    flag[n] = true;
                }
            }
        }
        flag.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    fn bone_nodes(&self) -> Vec<usize> {
        let mut flag = vec![false; self.nodes.len()];
        for e in self.bone_elements() {
            for &n in &self.elements[e].nodes {
                flag[n] = true;
            }
        }
        flag.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    /// Volume-weighted centroid of the bone elements.
    pub fn bone_centroid(&self) -> [f64; 3] {
        let mut acc = [0.0; 3];
        let mut vol = 0.0;
        for e in self.bone_elements() {
            let el = &self.elements[e];
            let coords = self.element_coords(e);
            for &(xi, w) in el.kind.quadrature() {
                let g = shape::gradients(el.kind, &coords, xi);
                let mut n = [0.0; shape::MAX_NODES];
                shape::values(el.kind, xi, &mut n);
                for (i, c) in coords.iter().enumerate() {
                    for a in 0..3 {
                        acc[a] += n[i] * c[a] * g.det * w;
                    }
                }
                vol += g.det * w;
            }
        }
        acc.map(|v| v / vol)
    }

    /// Min and max of the bone nodes along `axis`.
    pub fn bone_extent(&self, axis: usize) -> Option<(f64, f64)> {
        let nodes = self.bone_nodes();
        if nodes.is_empty() {
            return None;
        }
        let lo = nodes.iter().map(|&n| self.nodes[n][axis]).fold(f64::INFINITY, f64::min);
        let hi = nodes.iter().map(|&n| self.nodes[n][axis]).fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }
}

fn check_geometry(grid: &VoxelGrid, mask: &VoxelMask) -> Result<(), MeshError> {
    if grid.geometry() != mask.geometry() {
        return Err(MeshError::GeometryMismatch);
    }
    if mask.count() == 0 {
        return Err(MeshError::EmptyMask);
    }
    Ok(())
}

/// Lattice-corner → node id map that creates nodes on first use.
struct CornerNodes {
    geometry: GridGeometry,
    ids: BTreeMap<[i64; 3], usize>,
}

impl CornerNodes {
    fn new(geometry: GridGeometry) -> Self {
        Self { geometry, ids: BTreeMap::new() }
    }

    fn from_mesh(mesh: &Mesh, geometry: GridGeometry) -> Self {
        let mut ids = BTreeMap::new();
        for (n, x) in mesh.nodes.iter().enumerate() {
            let ijk: [i64; 3] =
                core::array::from_fn(|a| libm::round((x[a] - geometry.origin[a]) / geometry.spacing[a]) as i64);
            // Only true lattice corners (Tet10 midsides fall between them).
            if geometry.corner(ijk) == *x {
                ids.entry(ijk).or_insert(n);
            }
        }
        Self { geometry, ids }
    }

    fn get(&mut self, nodes: &mut Vec<[f64; 3]>, ijk: [i64; 3]) -> usize {
        *self.ids.entry(ijk).or_insert_with(|| {
            nodes.push(self.geometry.corner(ijk));
            nodes.len() - 1
        })
    }
}

const HEX_OFFSETS: [[i64; 3]; 8] =
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]];

/// One Hex8 per set voxel with corner nodes shared between neighbours.
pub fn hex_mesh_from_mask(grid: &VoxelGrid, mask: &VoxelMask) -> Result<Mesh, MeshError> {
    check_geometry(grid, mask)?;
    let geometry = *mask.geometry();
    let mut corners = CornerNodes::new(geometry);
    let mut mesh = Mesh { lattice: Some(geometry), ..Mesh::default() };
    for idx in mask.set_indices() {
        let c = geometry.coords(idx);
        let base = [c[0] as i64, c[1] as i64, c[2] as i64];
        let nodes = HEX_OFFSETS
            .iter()
            .map(|o| corners.get(&mut mesh.nodes, [base[0] + o[0], base[1] + o[1], base[2] + o[2]]))
            .collect();
        mesh.elements.push(Element { kind: ElementKind::Hex8, nodes, tag: ElementTag::Bone, source_voxel: Some(idx) });
    }
    Ok(mesh)
}

/// Unit-cube corner bit patterns `(x, y, z)`.
fn cube_corner(bits: [i64; 3]) -> usize {
    (bits[0] + 2 * bits[1] + 4 * bits[2]) as usize
}

/// The six Kuhn tetrahedra of the unit cube, all sharing the main diagonal
/// `(0,0,0)–(1,1,1)`, each oriented with positive volume. Corners are given as
/// bit patterns `x + 2y + 4z`.
fn kuhn_tets() -> [[usize; 4]; 6] {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = [[0usize; 4]; 6];
    for (t, p) in PERMS.iter().enumerate() {
        let mut v = [0i64; 3];
        let mut path = [[0i64; 3]; 4];
        for s in 0..3 {
            v[p[s]] = 1;
            path[s + 1] = v;
        }
        let mut tet = path.map(cube_corner);
        // Odd permutations come out negatively oriented.
        let e: [[f64; 3]; 3] = core::array::from_fn(|s| core::array::from_fn(|a| path[s + 1][a] as f64));
        if shape::det3(&e) < 0.0 {
            tet.swap(1, 2);
        }
        out[t] = tet;
    }
    out
}

/// Kuhn six-tetrahedron split of every set voxel with the same diagonal
/// everywhere, elevated to Tet10 with shared midside nodes.
pub fn tet_mesh_from_mask(grid: &VoxelGrid, mask: &VoxelMask) -> Result<Mesh, MeshError> {
    check_geometry(grid, mask)?;
    let geometry = *mask.geometry();
    let mut corners = CornerNodes::new(geometry);
    let mut mids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut mesh = Mesh { lattice: Some(geometry), ..Mesh::default() };
    let tets = kuhn_tets();
    for idx in mask.set_indices() {
        let c = geometry.coords(idx);
        let base = [c[0] as i64, c[1] as i64, c[2] as i64];
        let cube: [usize; 8] = core::array::from_fn(|b| {
            let bits = [(b & 1) as i64, ((b >> 1) & 1) as i64, ((b >> 2) & 1) as i64];
            corners.get(&mut mesh.nodes, [base[0] + bits[0], base[1] + bits[1], base[2] + bits[2]])
        });
        for tet in &tets {
            let mut nodes: Vec<usize> = tet.iter().map(|&b| cube[b]).collect();
            for &(a, b) in &TET10_EDGES {
                let (na, nb) = (nodes[a], nodes[b]);
                let key = (na.min(nb), na.max(nb));
                let id = *mids.entry(key).or_insert_with(|| {
                    let (pa, pb) = (mesh.nodes[na], mesh.nodes[nb]);
                    mesh.nodes.push(core::array::from_fn(|d| 0.5 * (pa[d] + pb[d])));
                    mesh.nodes.len() - 1
                });
                nodes.push(id);
            }
            mesh.elements.push(Element {
                kind: ElementKind::Tet10,
                nodes,
                tag: ElementTag::Bone,
                source_voxel: Some(idx),
            });
        }
    }
    Ok(mesh)
}

/// Inferior and superior endplate node sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Endplates {
    pub inferior: Vec<usize>,
    pub superior: Vec<usize>,
}

/// Bone boundary nodes whose axial coordinate lies within
/// `band_fraction * extent` of the bone's lowest (inferior) or highest
/// (superior) axial coordinate.
pub fn detect_endplates(mesh: &Mesh, orient: &Orientation, band_fraction: f64) -> Result<Endplates, MeshError> {
    orient.validate()?;
    if !(band_fraction > 0.0 && band_fraction <= 0.2) {
        return Err(MeshError::EmptyEndplate("band fraction must lie in (0, 0.2]"));
    }
    let ax = orient.axial.index();
    let (lo, hi) = mesh.bone_extent(ax).ok_or(MeshError::NoBone)?;
    let band = band_fraction * (hi - lo);
    let tol = 1e-9 * (hi - lo).max(1.0);
    let boundary = mesh.boundary_nodes_where(|e| e.tag == ElementTag::Bone);
    let inferior: Vec<usize> = boundary.iter().copied().filter(|&n| mesh.nodes[n][ax] <= lo + band + tol).collect();
    let superior: Vec<usize> = boundary.iter().copied().filter(|&n| mesh.nodes[n][ax] >= hi - band - tol).collect();
    if inferior.is_empty() {
        return Err(MeshError::EmptyEndplate("inferior"));
    }
    if superior.is_empty() {
        return Err(MeshError::EmptyEndplate("superior"));
    }
    Ok(Endplates { inferior, superior })
}

/// Caps the bone with PMMA Hex8 layers along the axial direction. Each
/// lattice column is filled from its last bone voxel up to the body's
/// extreme plane, then `ceil(thickness / spacing)` further layers are added,
/// giving flat outer faces recorded as `pmma_top` and `pmma_bottom`.
pub fn extrude_pmma(mesh: &Mesh, orient: &Orientation, thickness: f64) -> Result<Mesh, MeshError> {
    orient.validate()?;
    if !(thickness > 0.0 && thickness.is_finite()) {
        return Err(MeshError::BadThickness(thickness));
    }
    let lattice = mesh.lattice.ok_or(MeshError::NotHexMesh)?;
    if mesh.elements.iter().any(|e| e.kind != ElementKind::Hex8) {
        return Err(MeshError::NotHexMesh);
    }
    let ax = orient.axial.index();
    let (t1, t2) = match ax {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    // Axial range of bone voxels per transverse lattice column.
    let mut columns: BTreeMap<(i64, i64), (i64, i64)> = BTreeMap::new();
    for el in &mesh.elements {
        if el.tag != ElementTag::Bone {
            continue;
        }
        let Some(v) = el.source_voxel else { return Err(MeshError::NotHexMesh) };
        let c = lattice.coords(v).map(|x| x as i64);
        let r = columns.entry((c[t1], c[t2])).or_insert((c[ax], c[ax]));
        r.0 = r.0.min(c[ax]);
        r.1 = r.1.max(c[ax]);
    }
    if columns.is_empty() {
        return Err(MeshError::NoBone);
    }
    let kmin = columns.values().map(|r| r.0).min().unwrap_or(0);
    let kmax = columns.values().map(|r| r.1).max().unwrap_or(0);
    let layers = libm::ceil(thickness / lattice.spacing[ax] - 1e-9).max(1.0) as i64;

    let mut out = mesh.clone();
    let mut corners = CornerNodes::from_mesh(mesh, lattice);
    let mut add = |out: &mut Mesh, a: i64, b: i64, k: i64| {
        let mut base = [0i64; 3];
        base[t1] = a;
        base[t2] = b;
        base[ax] = k;
        let nodes = HEX_OFFSETS
            .iter()
            .map(|o| corners.get(&mut out.nodes, [base[0] + o[0], base[1] + o[1], base[2] + o[2]]))
            .collect();
        out.elements.push(Element { kind: ElementKind::Hex8, nodes, tag: ElementTag::Pmma, source_voxel: None });
    };
    for (&(a, b), &(lo, hi)) in &columns {
        for k in hi + 1..=kmax + layers {
            add(&mut out, a, b, k);
        }
        for k in kmin - layers..lo {
            add(&mut out, a, b, k);
        }
    }
    let top_coord = lattice.origin[ax] + (kmax + layers + 1) as f64 * lattice.spacing[ax];
    let bottom_coord = lattice.origin[ax] + (kmin - layers) as f64 * lattice.spacing[ax];
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    let mut seen = vec![false; out.nodes.len()];
    for el in out.elements.iter().filter(|e| e.tag == ElementTag::Pmma) {
        for &n in &el.nodes {
            if seen[n] {
                continue;
            }
            seen[n] = true;
            if out.nodes[n][ax] == top_coord {
                top.push(n);
            } else if out.nodes[n][ax] == bottom_coord {
                bottom.push(n);
            }
        }
    }
    top.sort_unstable();
    bottom.sort_unstable();
    out.node_sets.insert(String::from(PMMA_TOP), top);
    out.node_sets.insert(String::from(PMMA_BOTTOM), bottom);
    Ok(out)
}

/// Load point on the superior bone face: left-right at the bone centroid,
/// antero-posterior one third of the A-P extent behind the anterior margin.
pub fn anterior_third_point(mesh: &Mesh, orient: &Orientation) -> Result<[f64; 3], MeshError> {
    orient.validate()?;
    let ax = orient.axial.index();
    let ap = orient.anterior.axis.index();
    let lat = orient.lateral();
    let (_, top) = mesh.bone_extent(ax).ok_or(MeshError::NoBone)?;
    let (ap_lo, ap_hi) = mesh.bone_extent(ap).ok_or(MeshError::NoBone)?;
    let extent = ap_hi - ap_lo;
    let mut p = [0.0; 3];
    p[ax] = top;
    p[lat] = mesh.bone_centroid()[lat];
    p[ap] = if orient.anterior.positive { ap_hi - extent / 3.0 } else { ap_lo + extent / 3.0 };
    Ok(p)
}

/// Load point on the superior bone face at the bone centroid's transverse
/// position.
pub fn centroid_top_point(mesh: &Mesh, orient: &Orientation) -> Result<[f64; 3], MeshError> {
    let ax = orient.axial.index();
    let (_, top) = mesh.bone_extent(ax).ok_or(MeshError::NoBone)?;
    let mut p = mesh.bone_centroid();
    p[ax] = top;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::GridKind;

    pub(crate) fn solid(dims: [usize; 3], on: impl Fn([usize; 3]) -> bool, s: f64) -> (VoxelGrid, VoxelMask) {
        let g = GridGeometry::new(dims, [s; 3], [0.0; 3]).unwrap();
        let grid = VoxelGrid::filled(g, GridKind::Density, 0.2).unwrap();
        let mut m = VoxelMask::empty(g);
        for idx in 0..g.len() {
            let c = g.coords(idx);
            if on(c) {
                m.set(c[0], c[1], c[2], true);
            }
        }
        (grid, m)
    }

    #[test]
    fn hex_counts() {
        let (g, m) = solid([3, 3, 3], |c| c == [0, 0, 0], 1.0);
        let mesh = hex_mesh_from_mask(&g, &m).unwrap();
        assert_eq!((mesh.elements.len(), mesh.nodes.len()), (1, 8));
        let (g, m) = solid([3, 3, 3], |c| c[1] == 0 && c[2] == 0 && c[0] < 2, 1.0);
        let mesh = hex_mesh_from_mask(&g, &m).unwrap();
        assert_eq!((mesh.elements.len(), mesh.nodes.len()), (2, 12));
        let (g, m) = solid([3, 3, 3], |_| true, 1.0);
        let mesh = hex_mesh_from_mask(&g, &m).unwrap();
        assert_eq!((mesh.elements.len(), mesh.nodes.len()), (27, 64));
        assert_eq!(mesh.elements[5].source_voxel, Some(5));
        let (g, m) = solid([2, 2, 2], |_| false, 1.0);
        assert_eq!(hex_mesh_from_mask(&g, &m), Err(MeshError::EmptyMask));
    }

    #[test]
    fn single_voxel_tets_partition_volume() {
        let (g, m) = solid([1, 1, 1], |_| true, 0.984);
        let mesh = tet_mesh_from_mask(&g, &m).unwrap();
        assert_eq!(mesh.elements.len(), 6);
        assert_eq!(mesh.nodes.len(), 8 + 19);
        let v = 0.984f64.powi(3);
        assert!((mesh.bone_volume() - v).abs() < 1e-12 * v);
        assert!(mesh.min_jacobian() > 0.0);
    }

    #[test]
    fn shared_face_triangulations_match() {
        let (g, m) = solid([2, 1, 1], |_| true, 1.0);
        let mesh = tet_mesh_from_mask(&g, &m).unwrap();
        // The x = 1 plane carries exactly two triangles, each owned by one
        // tet from either voxel.
        let faces = mesh.faces_where(|_| true);
        let on_plane: Vec<_> = faces.iter().filter(|(k, _)| k[..3].iter().all(|&n| mesh.nodes[n][0] == 1.0)).collect();
        assert_eq!(on_plane.len(), 2);
        for (_, owners) in on_plane {
            assert_eq!(owners.len(), 2);
            let src: Vec<_> = owners.iter().map(|(e, _)| mesh.elements[*e].source_voxel).collect();
            assert_ne!(src[0], src[1]);
            assert_eq!(mesh.face_node_ids(owners[0].0, owners[0].1), mesh.face_node_ids(owners[1].0, owners[1].1));
        }
    }

    #[test]
    fn endplates_of_single_voxel_and_column() {
        let orient = Orientation::default();
        let (g, m) = solid([1, 1, 1], |_| true, 1.0);
        let mesh = hex_mesh_from_mask(&g, &m).unwrap();
        let ep = detect_endplates(&mesh, &orient, 0.1).unwrap();
        assert_eq!(ep.inferior.len(), 4);
        assert_eq!(ep.superior.len(), 4);
        assert!(ep.inferior.iter().all(|&n| mesh.nodes[n][2] == 0.0));
        assert!(ep.superior.iter().all(|&n| mesh.nodes[n][2] == 1.0));

        let (g, m) = solid([1, 1, 3], |_| true, 1.0);
        let mesh = hex_mesh_from_mask(&g, &m).unwrap();
        let ep = detect_endplates(&mesh, &orient, 0.1).unwrap();
        assert_eq!((ep.inferior.len(), ep.superior.len()), (4, 4));
        assert!(matches!(detect_endplates(&mesh, &orient, 0.0), Err(MeshError::EmptyEndplate(_))));
    }

    #[test]
    fn pmma_layers() {
        let orient = Orientation::default();
        let (g, m) = solid([1, 1, 1], |_| true, 1.0);
        let mesh = hex_mesh_from_mask(&g, &m).unwrap();
        let capped = extrude_pmma(&mesh, &orient, 1.0).unwrap();
        assert_eq!(capped.elements.len(), 3);
        assert_eq!(capped.elements[0], mesh.elements[0]);
        assert!(capped.elements[1..].iter().all(|e| e.tag == ElementTag::Pmma));
        assert_eq!(capped.node_set(PMMA_TOP).unwrap().len(), 4);
        assert!(capped.node_set(PMMA_TOP).unwrap().iter().all(|&n| capped.nodes[n][2] == 2.0));
        assert!(capped.node_set(PMMA_BOTTOM).unwrap().iter().all(|&n| capped.nodes[n][2] == -1.0));

        let seven = extrude_pmma(&mesh, &orient, 7.0).unwrap();
        assert_eq!(seven.elements.len(), 1 + 14);
        assert!(seven.min_jacobian() > 0.0);

        let tets = tet_mesh_from_mask(&g, &m).unwrap();
        assert_eq!(extrude_pmma(&tets, &orient, 1.0), Err(MeshError::NotHexMesh));
    }

    #[test]
    fn pmma_fills_uneven_top_flat() {
        let orient = Orientation::default();
        // Two columns, the second one voxel shorter.
        let (g, m) = solid([2, 1, 2], |c| !(c[0] == 1 && c[2] == 1), 1.0);
        let mesh = hex_mesh_from_mask(&g, &m).unwrap();
        let capped = extrude_pmma(&mesh, &orient, 1.0).unwrap();
        // 3 bone + gap fill 1 + 2 top + 2 bottom.
        assert_eq!(capped.elements.len(), 8);
        assert_eq!(capped.node_set(PMMA_TOP).unwrap().len(), 6);
    }

    #[test]
    fn anterior_third_on_box() {
        let orient = Orientation::default();
        let (g, m) = solid([10, 10, 10], |_| true, 1.0);
        let mesh = hex_mesh_from_mask(&g, &m).unwrap();
        let p = anterior_third_point(&mesh, &orient).unwrap();
        assert!((p[1] - (10.0 - 10.0 / 3.0)).abs() < 1e-12);
        assert!((p[0] - 5.0).abs() < 1e-12);
        assert_eq!(p[2], 10.0);

        let back = Orientation { anterior: SignedAxis { axis: Axis::Y, positive: false }, ..orient };
        let (g, m) = solid([4, 30, 2], |_| true, 1.0);
        let mesh = hex_mesh_from_mask(&g, &m).unwrap();
        let p = anterior_third_point(&mesh, &back).unwrap();
        assert!((p[1] - 10.0).abs() < 1e-12);
    }
}
