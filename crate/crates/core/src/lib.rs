//! Voxel-to-failure-load finite element toolkit for vertebral bodies.
//!
//! Grey-value grids are calibrated to density, segmented, meshed with
//! hexahedra or quadratic tetrahedra, assigned moduli from density, and
//! solved either linearly with a strained-volume failure criterion or
//! incrementally with von Mises perfect plasticity. A statistics module
//! compares predicted and measured failure loads.
#![no_std]
// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod failure;
pub mod fem;
pub mod material;
pub mod mesh;
pub mod phantom;
pub mod pipeline;
pub mod segment;
pub mod stats;
pub mod voxel;
