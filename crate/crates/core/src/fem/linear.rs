use alloc::vec;
use alloc::vec::Vec;

use super::constraint::{DofMap, LoadCase};
use super::element::{self, StrainMeasure, Sym};
use super::profile::EnvelopeCholesky;
use super::sparse::{self, CgFailure, CsrMatrix, TripletBuilder};
use super::FemError;
use crate::material::MaterialMap;
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LinearSolver {
    /// Jacobi-preconditioned conjugate gradients.
    #[default]
    Pcg,
    /// Envelope Cholesky under RCM ordering.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverOptions {
    pub solver: LinearSolver,
    pub cg_rel_tol: f64,
    /// Iteration cap as a multiple of the reduced DOF count.
    pub cg_iter_factor: usize,
    pub measure: StrainMeasure,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { solver: LinearSolver::Pcg, cg_rel_tol: 1e-10, cg_iter_factor: 20, measure: StrainMeasure::VonMises }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    /// Per-node displacement (mm).
    pub u: Vec<[f64; 3]>,
    /// Per-coupling master translations and rotations.
    pub master: Vec<[f64; 6]>,
    /// Per-coupling generalised force transmitted to the structure.
    pub master_forces: Vec<[f64; 6]>,
    /// Tensorial strain at each element centroid.
    pub element_strain: Vec<Sym>,
    pub eq_strain: Vec<f64>,
    /// Force exerted on the structure by Dirichlet supports and imposed
    /// master DOFs (N).
    pub reaction: [f64; 3],
    /// Sum of applied nodal forces and master loads (N).
    pub applied: [f64; 3],
    pub ndof: usize,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl LinearSolution {
    /// `|Σ reactions + Σ applied| / max(‖applied‖, ‖reactions‖)`.
    pub fn equilibrium_error(&self) -> f64 {
        let sum: [f64; 3] = core::array::from_fn(|a| self.reaction[a] + self.applied[a]);
        let scale = sparse::norm(&self.applied).max(sparse::norm(&self.reaction));
        if scale == 0.0 {
            return sparse::norm(&sum);
        }
        sparse::norm(&sum) / scale
    }

    pub fn max_eq_strain(&self) -> f64 {
        self.eq_strain.iter().copied().fold(0.0, f64::max)
    }
}

fn check_materials(mesh: &Mesh, mats: &MaterialMap) -> Result<(), FemError> {
    let n = mesh.elements.len();
    if mats.e.len() != n || mats.nu.len() != n {
        return Err(FemError::MissingMaterial { elements: n, materials: mats.e.len().min(mats.nu.len()) });
    }
    Ok(())
}

/// Global stiffness over `3 · node count` DOFs.
pub fn assemble(mesh: &Mesh, mats: &MaterialMap) -> Result<CsrMatrix, FemError> {
    check_materials(mesh, mats)?;
    let ndof = 3 * mesh.nodes.len();
    let est: usize = mesh.elements.iter().map(|e| 9 * e.nodes.len() * e.nodes.len()).sum();
    let mut t = TripletBuilder::with_capacity(ndof, est);
    for (ei, el) in mesh.elements.iter().enumerate() {
        let coords = mesh.element_coords(ei);
        let ke = element::element_stiffness(el.kind, &coords, mats.e[ei], mats.nu[ei]).map_err(|e| match e {
            FemError::InvertedElement { det, .. } => FemError::InvertedElement { element: Some(ei), det },
            other => other,
        })?;
        let m = 3 * el.nodes.len();
        for a in 0..m {
            let ga = 3 * el.nodes[a / 3] + a % 3;
            for b in 0..m {
                let gb = 3 * el.nodes[b / 3] + b % 3;
                t.push(ga, gb, ke[a * m + b]);
            }
        }
    }
    Ok(t.build())
}

pub(crate) fn nodal_force_vector(mesh: &Mesh, lc: &LoadCase, scale: f64) -> Result<Vec<f64>, FemError> {
    let mut f = vec![0.0; 3 * mesh.nodes.len()];
    for &(n, v) in &lc.nodal_forces {
        if n >= mesh.nodes.len() {
            return Err(FemError::NodeOutOfRange(n));
        }
        for a in 0..3 {
            f[3 * n + a] += scale * v[a];
        }
    }
    Ok(f)
}

pub(crate) fn check_reduced(kr: &CsrMatrix) -> Result<(), FemError> {
    if let Some(i) = kr.diagonal().iter().position(|&d| !(d > 0.0)) {
        return Err(FemError::SingularSystem(alloc::format!("reduced unknown {i} has no stiffness")));
    }
    Ok(())
}

pub fn solve_linear(
    mesh: &Mesh,
    mats: &MaterialMap,
    lc: &LoadCase,
    opts: &SolverOptions,
) -> Result<LinearSolution, FemError> {
    let k = assemble(mesh, mats)?;
    let map = DofMap::build(mesh, lc)?;
    let kr = map.reduce_matrix(&k);
    check_reduced(&kr)?;

    let f = nodal_force_vector(mesh, lc, 1.0)?;
    let g = map.offsets();
    let kg = k.mul(&g);
    let rhs_full: Vec<f64> = f.iter().zip(&kg).map(|(f, kg)| f - kg).collect();
    let mut rhs = map.restrict(&rhs_full);
    for (r, l) in rhs.iter_mut().zip(map.master_loads(lc, 1.0)) {
        *r += l;
    }

    let n = map.n_reduced;
    let mut q = vec![0.0; n];
    let (iterations, relative_residual) = match opts.solver {
        LinearSolver::Pcg => {
            let cap = opts.cg_iter_factor.saturating_mul(n).max(1);
            match sparse::pcg(&kr, &rhs, &mut q, opts.cg_rel_tol, cap) {
                Ok(o) => (o.iterations, o.relative_residual),
                Err(CgFailure::Breakdown { .. }) => {
                    return Err(FemError::SingularSystem("stiffness is not positive definite".into()))
                }
                Err(CgFailure::NoConvergence { iterations, relative_residual }) => {
                    return Err(FemError::NoConvergence { iterations, residual: relative_residual })
                }
            }
        }
        LinearSolver::Direct => {
            let chol = EnvelopeCholesky::factor(&kr)
                .map_err(|e| FemError::SingularSystem(alloc::format!("non-positive pivot at unknown {}", e.row)))?;
            q = chol.solve(&rhs);
            let res = kr.mul(&q);
            let bn = sparse::norm(&rhs);
            let rn = sparse::norm(&res.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
            (1, if bn > 0.0 { rn / bn } else { rn })
        }
    };

    let u_flat = map.expand(&q);
    let ku = k.mul(&u_flat);
    // Force the supports and couplings exert on the structure.
    let support: Vec<f64> = ku.iter().zip(&f).map(|(a, b)| a - b).collect();

    let mut reaction = [0.0; 3];
    for &d in map.fixed_dofs() {
        reaction[d % 3] += support[d];
    }
    let master_forces = map.master_forces(mesh, &support);
    for (c, g) in master_forces.iter().enumerate() {
        for a in 0..3 {
            if map.is_imposed(c, a) {
                reaction[a] += g[a];
            }
        }
    }
    let mut applied = [0.0; 3];
    for &(_, v) in &lc.nodal_forces {
        for a in 0..3 {
            applied[a] += v[a];
        }
    }
    for cp in &lc.couplings {
        for a in 0..3 {
            if let super::MasterDof::Loaded(v) = cp.dofs[a] {
                applied[a] += v;
            }
        }
    }

    let mut element_strain = Vec::with_capacity(mesh.elements.len());
    let mut ue = Vec::new();
    for (ei, el) in mesh.elements.iter().enumerate() {
        ue.clear();
        for &nd in &el.nodes {
            ue.extend_from_slice(&u_flat[3 * nd..3 * nd + 3]);
        }
        element_strain.push(element::centroid_strain(el.kind, &mesh.element_coords(ei), &ue));
    }
    let eq_strain = element_strain.iter().map(|s| opts.measure.evaluate(s)).collect();
    let u = u_flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();

    Ok(LinearSolution {
        u,
        master: map.master_values(&q),
        master_forces,
        element_strain,
        eq_strain,
        reaction,
        applied,
        ndof: n,
        iterations,
        relative_residual,
    })
}
