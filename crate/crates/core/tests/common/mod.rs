#![allow(dead_code)]

use vertfe_core::fem::{Dirichlet, LoadCase, MasterDof, RigidCoupling};
use vertfe_core::material::ModelVariant;
use vertfe_core::mesh::{self, Mesh};
use vertfe_core::segment::VoxelMask;
use vertfe_core::voxel::{GridGeometry, GridKind, VoxelGrid};

pub fn solid_grid(dims: [usize; 3], h: [f64; 3], density: f64) -> VoxelGrid {
    let geo = GridGeometry::new(dims, h, [0.0; 3]).unwrap();
    VoxelGrid::filled(geo, GridKind::Density, density).unwrap()
}

pub fn full_mask(grid: &VoxelGrid) -> VoxelMask {
    VoxelMask::new(*grid.geometry(), vec![true; grid.values().len()]).unwrap()
}

pub fn hex_box(dims: [usize; 3], h: [f64; 3]) -> Mesh {
    let g = solid_grid(dims, h, 1.0);
    mesh::hex_mesh_from_mask(&g, &full_mask(&g)).unwrap()
}

pub fn tet_box(dims: [usize; 3], h: [f64; 3]) -> Mesh {
    let g = solid_grid(dims, h, 1.0);
    mesh::tet_mesh_from_mask(&g, &full_mask(&g)).unwrap()
}

pub fn nodes_at(mesh: &Mesh, axis: usize, value: f64) -> Vec<usize> {
    (0..mesh.nodes.len()).filter(|&n| (mesh.nodes[n][axis] - value).abs() < 1e-9).collect()
}

/// Column along z with its base on rollers and its top face tied axially to
/// a master point. Lateral faces are free, so the stress state is uniaxial.
pub fn roller_column(mesh: &Mesh, variant: ModelVariant, top_dof: MasterDof) -> LoadCase {
    let zmax = mesh.nodes.iter().map(|p| p[2]).fold(f64::MIN, f64::max);
    let xmax = mesh.nodes.iter().map(|p| p[0]).fold(f64::MIN, f64::max);
    let ymax = mesh.nodes.iter().map(|p| p[1]).fold(f64::MIN, f64::max);
    let bottom = nodes_at(mesh, 2, 0.0);
    let origin = *bottom.iter().find(|&&n| mesh.nodes[n][0].abs() < 1e-9 && mesh.nodes[n][1].abs() < 1e-9).unwrap();
    let x_end =
        *bottom.iter().find(|&&n| (mesh.nodes[n][0] - xmax).abs() < 1e-9 && mesh.nodes[n][1].abs() < 1e-9).unwrap();
    let mut lc = LoadCase::new(variant);
    lc.dirichlet.push(Dirichlet { nodes: bottom, values: [None, None, Some(0.0)] });
    lc.dirichlet.push(Dirichlet { nodes: vec![origin], values: [Some(0.0), Some(0.0), None] });
    lc.dirichlet.push(Dirichlet { nodes: vec![x_end], values: [None, Some(0.0), None] });
    lc.couplings.push(RigidCoupling {
        master_point: [xmax / 2.0, ymax / 2.0, zmax],
        slaves: nodes_at(mesh, 2, zmax),
        dofs: [
            MasterDof::Imposed(0.0),
            MasterDof::Imposed(0.0),
            top_dof,
            MasterDof::Free,
            MasterDof::Free,
            MasterDof::Imposed(0.0),
        ],
        coupled: [false, false, true],
    });
    lc
}
