//! Boundary conditions and their elimination.
//!
//! Every mesh DOF is written as an affine combination of the reduced
//! unknowns, `u = T q + g`. Free DOFs map to one reduced unknown, Dirichlet
//! DOFs carry only the offset `g`, and DOFs tied to a rigid master follow the
//! small-rotation kinematics `u_s = u_m + θ × (x_s − x_m)`, so they reference
//! the master's free translations and rotations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use arrayvec::ArrayVec;

use super::sparse::{CsrMatrix, TripletBuilder};
use super::FemError;
use crate::material::ModelVariant;
use crate::mesh::Mesh;

/// One of the six master degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MasterDof {
    Free,
    /// Prescribed value (mm or rad).
    Imposed(f64),
    /// Applied force (N) or moment (N·mm).
    Loaded(f64),
}

/// Rigid link between a master point and a set of surface nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidCoupling {
    pub master_point: [f64; 3],
    pub slaves: Vec<usize>,
    /// Translations x, y, z then rotations about x, y, z.
    pub dofs: [MasterDof; 6],
    /// Which slave translation components follow the master. All three for a
    /// fully rigid link; a subset gives a kinematic coupling.
    pub coupled: [bool; 3],
}

impl RigidCoupling {
    pub fn rigid(master_point: [f64; 3], slaves: Vec<usize>, dofs: [MasterDof; 6]) -> Self {
        Self { master_point, slaves, dofs, coupled: [true; 3] }
    }
}

/// Prescribed displacement components on a node set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    pub nodes: Vec<usize>,
    /// `Some(value)` fixes that component (mm).
    pub values: [Option<f64>; 3],
}

impl Dirichlet {
    pub fn clamp(nodes: Vec<usize>) -> Self {
        Self { nodes, values: [Some(0.0); 3] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase {
    pub dirichlet: Vec<Dirichlet>,
    pub couplings: Vec<RigidCoupling>,
    pub nodal_forces: Vec<(usize, [f64; 3])>,
    pub variant: ModelVariant,
}

impl LoadCase {
    pub fn new(variant: ModelVariant) -> Self {
        Self { dirichlet: Vec::new(), couplings: Vec::new(), nodal_forces: Vec::new(), variant }
    }
}

/// `u_i = Σ c · q[r] + offset` for one mesh DOF.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DofLink {
    pub terms: ArrayVec<(usize, f64), 3>,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MasterSlot {
    Reduced(usize),
    Imposed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Free,
    Fixed(f64),
    Slave(usize),
}

/// The elimination map for one mesh and load case.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub links: Vec<DofLink>,
    pub n_reduced: usize,
    masters: Vec<[MasterSlot; 6]>,
    fixed: Vec<usize>,
    couplings: Vec<RigidCoupling>,
}

impl DofMap {
    pub fn build(mesh: &Mesh, lc: &LoadCase) -> Result<Self, FemError> {
        let n_nodes = mesh.nodes.len();
        let mut status = vec![Status::Free; 3 * n_nodes];
        let mut fixed_count = 0usize;
        for d in &lc.dirichlet {
            for &n in &d.nodes {
                if n >= n_nodes {
                    return Err(FemError::NodeOutOfRange(n));
                }
                for (a, v) in d.values.iter().enumerate() {
                    if let Some(v) = v {
                        if status[3 * n + a] != Status::Free {
                            return Err(FemError::DuplicateConstraint { node: n, component: a });
                        }
                        status[3 * n + a] = Status::Fixed(*v);
                        fixed_count += 1;
                    }
                }
            }
        }
        for (c, cp) in lc.couplings.iter().enumerate() {
            if cp.slaves.is_empty() {
                return Err(FemError::BadLoadCase(format!("coupling {c} has no slave nodes")));
            }
            for &n in &cp.slaves {
                if n >= n_nodes {
                    return Err(FemError::NodeOutOfRange(n));
                }
                for a in 0..3 {
                    if !cp.coupled[a] {
                        continue;
                    }
                    if status[3 * n + a] != Status::Free {
                        return Err(FemError::DuplicateConstraint { node: n, component: a });
                    }
                    status[3 * n + a] = Status::Slave(c);
                }
            }
            fixed_count += cp.dofs.iter().filter(|d| matches!(d, MasterDof::Imposed(_))).count();
        }
        if fixed_count < 6 {
            return Err(FemError::SingularSystem(format!(
                "only {fixed_count} degrees of freedom are prescribed; rigid-body motion remains"
            )));
        }

        // Only nodes attached to an element carry stiffness.
        let mut used = vec![false; n_nodes];
        for el in &mesh.elements {
            for &n in &el.nodes {
                used[n] = true;
            }
        }

        let mut next = 0usize;
        let mut links = vec![DofLink::default(); 3 * n_nodes];
        for (i, s) in status.iter().enumerate() {
            match *s {
                Status::Free if used[i / 3] => {
                    links[i].terms.push((next, 1.0));
                    next += 1;
                }
                Status::Free => {}
                Status::Fixed(v) => links[i].offset = v,
                Status::Slave(_) => {}
            }
        }
        let mut masters = Vec::with_capacity(lc.couplings.len());
        for cp in &lc.couplings {
            let slots = cp.dofs.map(|d| match d {
                MasterDof::Imposed(v) => MasterSlot::Imposed(v),
                MasterDof::Free | MasterDof::Loaded(_) => {
                    next += 1;
                    MasterSlot::Reduced(next - 1)
                }
            });
            masters.push(slots);
        }
        for (i, s) in status.iter().enumerate() {
            let Status::Slave(c) = *s else { continue };
            let cp = &lc.couplings[c];
            let n = i / 3;
            let a = i % 3;
            let r: [f64; 3] = core::array::from_fn(|k| mesh.nodes[n][k] - cp.master_point[k]);
            // (θ × r)_a = Σ_k coeff_k θ_k
            let rot = match a {
                0 => [0.0, r[2], -r[1]],
                1 => [-r[2], 0.0, r[0]],
                _ => [r[1], -r[0], 0.0],
            };
            let mut link = DofLink::default();
            let mut add = |slot: MasterSlot, coeff: f64| {
                if coeff == 0.0 {
                    return;
                }
                match slot {
                    MasterSlot::Reduced(q) => link.terms.push((q, coeff)),
                    MasterSlot::Imposed(v) => link.offset += coeff * v,
                }
            };
            add(masters[c][a], 1.0);
            for k in 0..3 {
                add(masters[c][3 + k], rot[k]);
            }
            links[i] = link;
        }
        let fixed = status.iter().enumerate().filter(|(_, s)| matches!(s, Status::Fixed(_))).map(|(i, _)| i).collect();
        Ok(Self { links, n_reduced: next, masters, fixed, couplings: lc.couplings.clone() })
    }

    /// Replaces an imposed master value, updating dependent offsets.
    pub fn set_master_value(&mut self, mesh: &Mesh, coupling: usize, dof: usize, value: f64) -> Result<(), FemError> {
        let MasterSlot::Imposed(old) = self.masters[coupling][dof] else {
            return Err(FemError::BadLoadCase(format!("master dof {dof} of coupling {coupling} is not imposed")));
        };
        let delta = value - old;
        self.masters[coupling][dof] = MasterSlot::Imposed(value);
        let cp = &self.couplings[coupling];
        for &n in &cp.slaves {
            let r: [f64; 3] = core::array::from_fn(|k| mesh.nodes[n][k] - cp.master_point[k]);
            for a in 0..3 {
                if !cp.coupled[a] {
                    continue;
                }
                let coeff = if dof < 3 {
                    if dof == a {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    let rot = match a {
                        0 => [0.0, r[2], -r[1]],
                        1 => [-r[2], 0.0, r[0]],
                        _ => [r[1], -r[0], 0.0],
                    };
                    rot[dof - 3]
                };
                self.links[3 * n + a].offset += coeff * delta;
            }
        }
        Ok(())
    }

    /// Mesh DOF indices fixed by Dirichlet conditions.
    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed
    }

    pub fn couplings(&self) -> &[RigidCoupling] {
        &self.couplings
    }

    /// Expands reduced unknowns to mesh DOFs.
    pub fn expand(&self, q: &[f64]) -> Vec<f64> {
        self.links.iter().map(|l| l.offset + l.terms.iter().map(|&(r, c)| c * q[r]).sum::<f64>()).collect()
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.offset).collect()
    }

    /// `Tᵀ v` for a mesh-DOF vector.
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_reduced];
        for (l, &x) in self.links.iter().zip(v) {
            for &(r, c) in &l.terms {
                out[r] += c * x;
            }
        }
        out
    }

    /// Master displacements and rotations.
    pub fn master_values(&self, q: &[f64]) -> Vec<[f64; 6]> {
        self.masters
            .iter()
            .map(|slots| {
                slots.map(|s| match s {
                    MasterSlot::Reduced(r) => q[r],
                    MasterSlot::Imposed(v) => v,
                })
            })
            .collect()
    }

    /// Reduced index of a master DOF, if it is an unknown.
    pub fn master_reduced(&self, coupling: usize, dof: usize) -> Option<usize> {
        match self.masters[coupling][dof] {
            MasterSlot::Reduced(r) => Some(r),
            MasterSlot::Imposed(_) => None,
        }
    }

    /// Generalised force each master transmits to its slaves, given the
    /// per-DOF force `f` acting on the structure at the slave nodes.
    pub fn master_forces(&self, mesh: &Mesh, f: &[f64]) -> Vec<[f64; 6]> {
        self.couplings
            .iter()
            .map(|cp| {
                let mut g = [0.0; 6];
                for &n in &cp.slaves {
                    let fs: [f64; 3] = core::array::from_fn(|a| if cp.coupled[a] { f[3 * n + a] } else { 0.0 });
                    let r: [f64; 3] = core::array::from_fn(|k| mesh.nodes[n][k] - cp.master_point[k]);
                    g[0] += fs[0];
                    g[1] += fs[1];
                    g[2] += fs[2];
                    g[3] += r[1] * fs[2] - r[2] * fs[1];
                    g[4] += r[2] * fs[0] - r[0] * fs[2];
                    g[5] += r[0] * fs[1] - r[1] * fs[0];
                }
                g
            })
            .collect()
    }

    pub fn is_imposed(&self, coupling: usize, dof: usize) -> bool {
        matches!(self.masters[coupling][dof], MasterSlot::Imposed(_))
    }

    /// Reduced right-hand side contribution of master loads.
    pub fn master_loads(&self, lc: &LoadCase, scale: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_reduced];
        for (c, cp) in lc.couplings.iter().enumerate() {
            for (k, d) in cp.dofs.iter().enumerate() {
                if let (MasterDof::Loaded(f), MasterSlot::Reduced(r)) = (d, self.masters[c][k]) {
                    out[r] += scale * f;
                }
            }
        }
        out
    }

    /// `Tᵀ K T` over the mesh stiffness.
    pub fn reduce_matrix(&self, k: &CsrMatrix) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(self.n_reduced, k.nnz() + k.nnz() / 4);
        for i in 0..k.n() {
            let li = &self.links[i];
            if li.terms.is_empty() {
                continue;
            }
            for (j, v) in k.row(i) {
                let lj = &self.links[j];
                for &(a, ca) in &li.terms {
                    for &(b, cb) in &lj.terms {
                        t.push(a, b, ca * v * cb);
                    }
                }
            }
        }
        t.build()
    }
}
