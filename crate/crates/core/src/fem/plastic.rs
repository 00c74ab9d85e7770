//! Displacement-controlled elasto-perfectly-plastic solve.

use alloc::vec;
use alloc::vec::Vec;

use super::constraint::{DofMap, LoadCase, MasterDof};
use super::element::{self, ElementCache, Isotropic, PlasticState};
use super::linear::{assemble, check_reduced, nodal_force_vector, LinearSolver};
use super::profile::EnvelopeCholesky;
use super::sparse::{self, CgFailure, CsrMatrix};
use super::FemError;
use crate::material::{MaterialMap, ModelVariant};
use crate::mesh::{Axis, ElementTag, Mesh};

/// Relative CG tolerance for Newton corrections; the outer residual test
/// decides convergence.
const NEWTON_CG_TOL: f64 = 1e-6;
const PREDICTOR_CG_TOL: f64 = 1e-10;

/// Stiffness used for Newton corrections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Tangent {
    /// Algorithmic tangent of the radial return, reassembled every iteration.
    #[default]
    Consistent,
    /// Initial elastic stiffness, factored once (modified Newton).
    Elastic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlasticOptions {
    pub increments: usize,
    pub target_overall_strain: f64,
    /// Residual tolerance relative to the external force norm (or 1 N).
    pub newton_tol: f64,
    pub max_newton: usize,
    pub axial: Axis,
    pub tangent: Tangent,
    /// Solver for consistent-tangent corrections. The elastic tangent is
    /// always factored directly.
    pub solver: LinearSolver,
}

impl Default for PlasticOptions {
    fn default() -> Self {
        Self {
            increments: 20,
            target_overall_strain: 0.019,
            newton_tol: 1e-6,
            max_newton: 30,
            axial: Axis::Z,
            tangent: Tangent::Consistent,
            solver: LinearSolver::Pcg,
        }
    }
}

/// `(overall strain, axial reaction N)` per increment, starting at the origin.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReactionCurve {
    pub points: Vec<(f64, f64)>,
}

impl ReactionCurve {
    pub fn peak(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        self.points.last().copied()
    }
}

#[derive(Debug, Clone)]
pub struct PlasticSolution {
    pub curve: ReactionCurve,
    pub newton_iterations: Vec<usize>,
    /// Final displacement per node (mm).
    pub u: Vec<[f64; 3]>,
    /// Final state at every integration point, per element.
    pub states: Vec<Vec<PlasticState>>,
    /// Yield stress per element; infinite for elastic elements.
    pub yield_stress: Vec<f64>,
    pub ndof: usize,
    /// Largest equilibrium error over the converged increments.
    pub equilibrium_error: f64,
}

struct Kernel<'a> {
    mesh: &'a Mesh,
    caches: Vec<ElementCache>,
    mats: Vec<Isotropic>,
    yield_stress: Vec<f64>,
}

impl Kernel<'_> {
    /// Internal force and trial states for the mesh displacement `u`; with
    /// `tangent` set, also the assembled algorithmic tangent.
    fn internal(
        &self,
        u: &[f64],
        committed: &[Vec<PlasticState>],
        trial: &mut [Vec<PlasticState>],
        mut tangent: Option<&mut CsrMatrix>,
    ) -> Vec<f64> {
        let mut f = vec![0.0; u.len()];
        let mut ue = Vec::with_capacity(30);
        let mut fe = Vec::with_capacity(30);
        let mut ke = Vec::new();
        for (ei, el) in self.mesh.elements.iter().enumerate() {
            let n = el.nodes.len();
            ue.clear();
            for &nd in &el.nodes {
                ue.extend_from_slice(&u[3 * nd..3 * nd + 3]);
            }
            fe.clear();
            fe.resize(3 * n, 0.0);
            if tangent.is_some() {
                ke.clear();
                ke.resize(9 * n * n, 0.0);
            }
            for (q, (g, scale)) in self.caches[ei].points.iter().enumerate() {
                let eps = element::tensor_from_engineering(element::engineering_strain(g, n, &ue));
                let committed_p = &committed[ei][q].plastic_strain;
                let (st, _) = element::radial_return(&self.mats[ei], self.yield_stress[ei], &eps, committed_p);
                element::add_bt_sigma(g, n, &st.stress, *scale, &mut fe);
                trial[ei][q] = st;
                if tangent.is_some() {
                    let d = element::consistent_tangent(&self.mats[ei], self.yield_stress[ei], &eps, committed_p);
                    element::add_btdb(g, n, &d, *scale, &mut ke);
                }
            }
            for (a, &nd) in el.nodes.iter().enumerate() {
                for c in 0..3 {
                    f[3 * nd + c] += fe[3 * a + c];
                }
            }
            if let Some(t) = tangent.as_deref_mut() {
                let m = 3 * n;
                element::symmetrize_upper(&mut ke, m);
                for a in 0..m {
                    let ga = 3 * el.nodes[a / 3] + a % 3;
                    for b in 0..m {
                        t.add_to(ga, 3 * el.nodes[b / 3] + b % 3, ke[a * m + b]);
                    }
                }
            }
        }
        f
    }
}

fn solve_correction(k: &CsrMatrix, r: &[f64], solver: LinearSolver, cg_tol: f64) -> Result<Vec<f64>, FemError> {
    match solver {
        LinearSolver::Direct => EnvelopeCholesky::factor(k)
            .map(|c| c.solve(r))
            .map_err(|e| FemError::SingularSystem(alloc::format!("tangent pivot {} at unknown {}", e.pivot, e.row))),
        LinearSolver::Pcg => {
            let mut x = vec![0.0; r.len()];
            match sparse::pcg(k, r, &mut x, cg_tol, 20 * r.len().max(1)) {
                Ok(_) => Ok(x),
                Err(CgFailure::Breakdown { .. }) => {
                    Err(FemError::SingularSystem("tangent is not positive definite".into()))
                }
                Err(CgFailure::NoConvergence { iterations, relative_residual }) => {
                    Err(FemError::NoConvergence { iterations, residual: relative_residual })
                }
            }
        }
    }
}

pub fn solve_plastic(
    mesh: &Mesh,
    mats: &MaterialMap,
    lc: &LoadCase,
    opts: &PlasticOptions,
) -> Result<PlasticSolution, FemError> {
    if lc.variant != ModelVariant::Lyon {
        return Err(FemError::NotPlasticVariant);
    }
    let yield_strain = mats.yield_strain.ok_or(FemError::NotPlasticVariant)?;
    if opts.increments == 0 || !(opts.target_overall_strain > 0.0) {
        return Err(FemError::BadLoadCase("increments and target strain must be positive".into()));
    }
    let ax = opts.axial.index();
    let control = lc
        .couplings
        .iter()
        .position(|c| matches!(c.dofs[ax], MasterDof::Imposed(_)))
        .ok_or(FemError::NoDisplacementControl)?;
    let (lo, hi) = mesh.bone_extent(ax).ok_or_else(|| FemError::BadLoadCase("mesh has no bone elements".into()))?;
    let total_disp = -opts.target_overall_strain * (hi - lo);

    let k = assemble(mesh, mats)?;
    let mut map = DofMap::build(mesh, lc)?;
    map.set_master_value(mesh, control, ax, 0.0)?;
    let kr = map.reduce_matrix(&k);
    check_reduced(&kr)?;
    let elastic_chol = match opts.tangent {
        Tangent::Elastic => Some(
            EnvelopeCholesky::factor(&kr)
                .map_err(|e| FemError::SingularSystem(alloc::format!("non-positive pivot at unknown {}", e.row)))?,
        ),
        Tangent::Consistent => None,
    };

    let mut caches = Vec::with_capacity(mesh.elements.len());
    for (ei, el) in mesh.elements.iter().enumerate() {
        let c = ElementCache::new(el.kind, &mesh.element_coords(ei)).map_err(|e| match e {
            FemError::InvertedElement { det, .. } => FemError::InvertedElement { element: Some(ei), det },
            other => other,
        })?;
        caches.push(c);
    }
    let yield_stress: Vec<f64> = mesh
        .elements
        .iter()
        .enumerate()
        .map(|(ei, el)| if el.tag == ElementTag::Bone { mats.e[ei] * yield_strain } else { f64::INFINITY })
        .collect();
    let kernel = Kernel {
        mesh,
        mats: (0..mesh.elements.len()).map(|ei| Isotropic::new(mats.e[ei], mats.nu[ei])).collect(),
        caches,
        yield_stress,
    };

    let mut committed: Vec<Vec<PlasticState>> =
        kernel.caches.iter().map(|c| vec![PlasticState::default(); c.points.len()]).collect();
    let mut trial = committed.clone();
    let mut q = vec![0.0; map.n_reduced];
    let mut curve = ReactionCurve { points: vec![(0.0, 0.0)] };
    let mut newton_iterations = Vec::with_capacity(opts.increments);
    let sign = if total_disp < 0.0 { -1.0 } else { 1.0 };
    let mut u_full = map.expand(&q);
    let mut equilibrium_error: f64 = 0.0;
    let mut last_step: Option<Vec<f64>> = None;

    for inc in 1..=opts.increments {
        let frac = inc as f64 / opts.increments as f64;
        let prev = (inc - 1) as f64 / opts.increments as f64;
        let g_old = map.offsets();
        map.set_master_value(mesh, control, ax, frac * total_disp)?;
        let f_ext = nodal_force_vector(mesh, lc, frac)?;
        let loads = map.master_loads(lc, frac);

        // Elastic predictor for the load and boundary increment. Evaluating
        // the return mapping at the bare boundary jump would put spurious
        // plastic zones next to the loaded face.
        let df = nodal_force_vector(mesh, lc, frac - prev)?;
        let dg: Vec<f64> = map.offsets().iter().zip(&g_old).map(|(a, b)| a - b).collect();
        let kdg = k.mul(&dg);
        let rhs_full: Vec<f64> = df.iter().zip(&kdg).map(|(f, kg)| f - kg).collect();
        let mut rhs = map.restrict(&rhs_full);
        for (r, l) in rhs.iter_mut().zip(map.master_loads(lc, frac - prev)) {
            *r += l;
        }
        let q_start = q.clone();
        let dq = match (&elastic_chol, &last_step) {
            // Equal boundary steps: the previous increment is a better guess
            // than an elastic one once plastic flow has started.
            (_, Some(last)) => last.clone(),
            (Some(chol), None) => chol.solve(&rhs),
            (None, None) => solve_correction(&kr, &rhs, opts.solver, PREDICTOR_CG_TOL)?,
        };
        for (q, d) in q.iter_mut().zip(&dq) {
            *q += d;
        }
        let ext_norm = libm::sqrt(sparse::dot(&f_ext, &f_ext) + sparse::dot(&loads, &loads));
        let tol = opts.newton_tol * if ext_norm > 0.0 { ext_norm } else { 1.0 };

        let mut iters = 0;
        let f_int = loop {
            u_full = map.expand(&q);
            let mut tb = match opts.tangent {
                Tangent::Consistent => Some(k.zeroed_like()),
                Tangent::Elastic => None,
            };
            let f_int = kernel.internal(&u_full, &committed, &mut trial, tb.as_mut());
            let diff: Vec<f64> = f_ext.iter().zip(&f_int).map(|(a, b)| a - b).collect();
            let mut r = map.restrict(&diff);
            for (r, l) in r.iter_mut().zip(&loads) {
                *r += l;
            }
            let rn = sparse::norm(&r);
            if rn <= tol {
                break f_int;
            }
            if iters == opts.max_newton || !rn.is_finite() {
                return Err(FemError::NewtonDiverged { increment: inc, iterations: iters, residual: rn });
            }
            let dq = match (&elastic_chol, tb) {
                (Some(chol), _) => chol.solve(&r),
                (None, None) => unreachable!(),
                (None, Some(tb)) => {
                    let kt = map.reduce_matrix(&tb);
                    // A fully yielded region forms a mechanism and leaves the
                    // tangent singular; take an elastic step instead.
                    match solve_correction(&kt, &r, opts.solver, NEWTON_CG_TOL) {
                        Ok(dq) => dq,
                        Err(_) => solve_correction(&kr, &r, opts.solver, NEWTON_CG_TOL)?,
                    }
                }
            };
            for (q, d) in q.iter_mut().zip(&dq) {
                *q += d;
            }
            iters += 1;
        };
        core::mem::swap(&mut committed, &mut trial);
        last_step = Some(q.iter().zip(&q_start).map(|(a, b)| a - b).collect());
        newton_iterations.push(iters);

        let support: Vec<f64> = f_int.iter().zip(&f_ext).map(|(a, b)| a - b).collect();
        let g = map.master_forces(mesh, &support);
        let mut reaction = [0.0; 3];
        for &d in map.fixed_dofs() {
            reaction[d % 3] += support[d];
        }
        for (c, gc) in g.iter().enumerate() {
            for a in 0..3 {
                if map.is_imposed(c, a) {
                    reaction[a] += gc[a];
                }
            }
        }
        let mut applied = [0.0; 3];
        for &(_, v) in &lc.nodal_forces {
            (0..3).for_each(|a| applied[a] += frac * v[a]);
        }
        for cp in &lc.couplings {
            for a in 0..3 {
                if let MasterDof::Loaded(v) = cp.dofs[a] {
                    applied[a] += frac * v;
                }
            }
        }
        let sum: [f64; 3] = core::array::from_fn(|a| reaction[a] + applied[a]);
        let scale = sparse::norm(&reaction).max(sparse::norm(&applied)).max(1.0);
        equilibrium_error = equilibrium_error.max(sparse::norm(&sum) / scale);
        curve.points.push((frac * opts.target_overall_strain, sign * g[control][ax]));
    }

    Ok(PlasticSolution {
        curve,
        newton_iterations,
        u: u_full.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        states: committed,
        yield_stress: kernel.yield_stress,
        ndof: map.n_reduced,
        equilibrium_error,
    })
}
