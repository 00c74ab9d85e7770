//! End-to-end chain from a CT grid to a failure load.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::failure::{
    ensam_failure_load, lyon_failure_load, FailureError, FailureResult, ENSAM_CRITICAL_STRAIN, ENSAM_CRITICAL_VOLUME,
    LYON_TARGET_STRAIN,
};
use crate::fem::{
    solve_linear, solve_plastic, Dirichlet, FemError, LinearSolver, LoadCase, MasterDof, PlasticOptions, ReactionCurve,
    RigidCoupling, SolverOptions, StrainMeasure, Tangent,
};
use crate::material::{
    assign_materials, MaterialError, MaterialMap, MaterialOptions, ModelVariant, DEFAULT_BIN_STEP, MODULUS_FLOOR,
    MODULUS_MIN_POSITIVE,
};
use crate::mesh::{
    anterior_third_point, centroid_top_point, detect_endplates, extrude_pmma, hex_mesh_from_mask, tet_mesh_from_mask,
    Mesh, MeshError, Orientation, PMMA_BOTTOM, PMMA_TOP,
};
use crate::segment::{close_mask, largest_component, threshold_mask, Connectivity, SegmentError, VoxelMask};
use crate::voxel::{
    apply_calibration, calibrate_from_phantom, downsample, DensityCalibration, GridKind, RoiSample, VoxelError,
    VoxelGrid,
};

pub const DEFAULT_THRESHOLD: f64 = 0.15;
pub const DEFAULT_BAND_FRACTION: f64 = 0.05;
pub const DEFAULT_PMMA_THICKNESS: f64 = 7.0;
pub const LYON_SPACING: f64 = 0.984;
pub const DEFAULT_REFERENCE_LOAD: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Failure(#[from] FailureError),
}

/// How grey values become densities.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Calibration {
    /// The input already holds density.
    #[default]
    None,
    Fixed(DensityCalibration),
    /// Fit against inserts of known density inside the scan.
    Inserts(Vec<RoiSample>),
}

/// Where the master point of the loading coupling sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LoadPoint {
    #[default]
    AnteriorThird,
    /// Superior face above the bone centroid.
    Centroid,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PipelineConfig {
    pub model: ModelVariant,
    pub orientation: Orientation,
    pub calibration: Calibration,
    /// Bone density threshold (g/cm³).
    pub threshold: f64,
    pub connectivity: Connectivity,
    pub close_radius: usize,
    pub band_fraction: f64,
    /// PMMA cap thickness (mm), hex model only.
    pub pmma_thickness: f64,
    /// Resampling target (mm), tet model only.
    pub target_spacing: f64,
    /// Drop the 100 MPa modulus floor in the hex model, keeping 1 MPa.
    pub no_floor_ensam: bool,
    /// Modulus binning step (MPa); zero disables binning.
    pub bin_step: f64,
    pub solver: LinearSolver,
    pub cg_rel_tol: f64,
    pub cg_iter_factor: usize,
    pub measure: StrainMeasure,
    pub load_point: LoadPoint,
    /// Reference load for the linear solve (N).
    pub reference_load: f64,
    pub eps_crit: f64,
    /// Critical strained volume (mm³).
    pub v_crit: f64,
    pub increments: usize,
    pub target_strain: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub tangent: Tangent,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::ensam()
    }
}

impl PipelineConfig {
    pub fn ensam() -> Self {
        Self {
            model: ModelVariant::Ensam,
            orientation: Orientation::default(),
            calibration: Calibration::None,
            threshold: DEFAULT_THRESHOLD,
            connectivity: Connectivity::Face6,
            close_radius: 1,
            band_fraction: DEFAULT_BAND_FRACTION,
            pmma_thickness: DEFAULT_PMMA_THICKNESS,
            target_spacing: LYON_SPACING,
            no_floor_ensam: false,
            bin_step: 0.0,
            solver: LinearSolver::Pcg,
            cg_rel_tol: 1e-10,
            cg_iter_factor: 20,
            measure: StrainMeasure::VonMises,
            load_point: LoadPoint::AnteriorThird,
            reference_load: DEFAULT_REFERENCE_LOAD,
            eps_crit: ENSAM_CRITICAL_STRAIN,
            v_crit: ENSAM_CRITICAL_VOLUME,
            increments: 20,
            target_strain: LYON_TARGET_STRAIN,
            newton_tol: 1e-6,
            max_newton: 30,
            tangent: Tangent::Consistent,
        }
    }

    pub fn lyon() -> Self {
        Self { model: ModelVariant::Lyon, bin_step: DEFAULT_BIN_STEP, ..Self::ensam() }
    }

    pub fn for_model(model: ModelVariant) -> Self {
        match model {
            ModelVariant::Ensam => Self::ensam(),
            ModelVariant::Lyon => Self::lyon(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.into()));
        self.orientation.validate()?;
        if !self.threshold.is_finite() {
            return bad("threshold must be finite");
        }
        if !(self.band_fraction > 0.0 && self.band_fraction <= 0.2) {
            return bad("band_fraction must lie in (0, 0.2]");
        }
        if !(self.pmma_thickness > 0.0 && self.pmma_thickness.is_finite()) {
            return bad("pmma_thickness must be positive");
        }
        if !(self.target_spacing > 0.0 && self.target_spacing.is_finite()) {
            return bad("target_spacing must be positive");
        }
        if !(self.bin_step >= 0.0 && self.bin_step.is_finite()) {
            return bad("bin_step must be non-negative");
        }
        if !(self.cg_rel_tol > 0.0 && self.cg_rel_tol < 1.0) || self.cg_iter_factor == 0 {
            return bad("solver tolerances must be positive");
        }
        if !(self.reference_load > 0.0 && self.reference_load.is_finite()) {
            return bad("reference_load must be positive");
        }
        if !(self.eps_crit > 0.0) || !(self.v_crit > 0.0) {
            return bad("eps_crit and v_crit must be positive");
        }
        if self.increments == 0 || self.max_newton == 0 {
            return bad("increments and max_newton must be at least 1");
        }
        if !(self.target_strain > 0.0 && self.target_strain < 1.0) {
            return bad("target_strain must lie in (0, 1)");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol must be positive");
        }
        Ok(())
    }

    pub fn material_options(&self) -> MaterialOptions {
        let floor = match self.model {
            ModelVariant::Ensam if self.no_floor_ensam => MODULUS_MIN_POSITIVE,
            _ => MODULUS_FLOOR,
        };
        MaterialOptions { variant: self.model, floor, bin_step: (self.bin_step > 0.0).then_some(self.bin_step) }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            solver: self.solver,
            cg_rel_tol: self.cg_rel_tol,
            cg_iter_factor: self.cg_iter_factor,
            measure: self.measure,
        }
    }

    pub fn plastic_options(&self) -> PlasticOptions {
        PlasticOptions {
            increments: self.increments,
            target_overall_strain: self.target_strain,
            newton_tol: self.newton_tol,
            max_newton: self.max_newton,
            axial: self.orientation.axial,
            tangent: self.tangent,
            solver: self.solver,
        }
    }
}

/// Figures reported alongside the failure load.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub calibration: Option<DensityCalibration>,
    pub grid_dims: [usize; 3],
    pub grid_spacing: [f64; 3],
    pub bone_voxels: usize,
    pub nodes: usize,
    pub elements: usize,
    pub bone_elements: usize,
    pub bone_volume_mm3: f64,
    pub bone_height_mm: f64,
    pub load_point: [f64; 3],
    pub reduced_dofs: usize,
    pub solver_iterations: usize,
    pub equilibrium_error: f64,
    pub distinct_moduli: usize,
    /// Plastic solves only.
    pub newton_iterations: Vec<usize>,
    pub curve: Option<ReactionCurve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub failure: FailureResult,
    pub diagnostics: Diagnostics,
    pub mesh: Mesh,
    pub materials: MaterialMap,
    /// Nodal displacement of the reference solve (hex model) or the final
    /// increment (tet model).
    pub displacement: Vec<[f64; 3]>,
    /// Axial reaction at the loaded face (N).
    pub reaction: f64,
    /// Largest equivalent strain of the reference solve (hex model only).
    pub max_eq_strain: Option<f64>,
}

/// Resolves the configured calibration against a grid and returns a density
/// grid.
pub fn to_density(
    grid: &VoxelGrid,
    cal: &Calibration,
) -> Result<(VoxelGrid, Option<DensityCalibration>), PipelineError> {
    match (grid.kind(), cal) {
        (GridKind::Density, Calibration::None) => Ok((grid.clone(), None)),
        (GridKind::Density, _) => Err(PipelineError::Config("input is already a density grid".into())),
        (GridKind::Grey, Calibration::None) => Err(PipelineError::Config("grey input needs a calibration".into())),
        (GridKind::Grey, Calibration::Fixed(c)) => Ok((apply_calibration(grid, c)?, Some(*c))),
        (GridKind::Grey, Calibration::Inserts(samples)) => {
            let c = calibrate_from_phantom(grid, samples)?;
            Ok((apply_calibration(grid, &c)?, Some(c)))
        }
    }
}

/// Everything up to, but not including, the solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    /// Density grid the model was built from (resampled for the tet model).
    pub density: VoxelGrid,
    pub calibration: Option<DensityCalibration>,
    pub mask: VoxelMask,
    pub mesh: Mesh,
    pub materials: MaterialMap,
    pub load_point: [f64; 3],
    pub bone_height: f64,
}

/// Calibration, segmentation, meshing and material assignment.
pub fn build_model(grid: &VoxelGrid, cfg: &PipelineConfig) -> Result<Model, PipelineError> {
    cfg.validate()?;
    let (density, calibration) = to_density(grid, &cfg.calibration)?;
    let density = match cfg.model {
        ModelVariant::Ensam => density,
        ModelVariant::Lyon => downsample(&density, [cfg.target_spacing; 3])?,
    };

    let mask = threshold_mask(&density, cfg.threshold)?;
    let mask = largest_component(&mask, cfg.connectivity)?;
    let mask = close_mask(&mask, cfg.close_radius);

    let orient = cfg.orientation;
    let bone_mesh = match cfg.model {
        ModelVariant::Ensam => hex_mesh_from_mask(&density, &mask)?,
        ModelVariant::Lyon => tet_mesh_from_mask(&density, &mask)?,
    };
    let (lo, hi) = bone_mesh.bone_extent(orient.axial.index()).ok_or(MeshError::NoBone)?;
    let load_point = match cfg.load_point {
        LoadPoint::AnteriorThird => anterior_third_point(&bone_mesh, &orient)?,
        LoadPoint::Centroid => centroid_top_point(&bone_mesh, &orient)?,
    };
    let mesh = match cfg.model {
        ModelVariant::Ensam => extrude_pmma(&bone_mesh, &orient, cfg.pmma_thickness)?,
        ModelVariant::Lyon => bone_mesh,
    };
    let materials = assign_materials(&mesh, &density, &cfg.material_options())?;
    Ok(Model { density, calibration, mask, mesh, materials, load_point, bone_height: hi - lo })
}

/// Runs the configured model on a grey or density grid.
pub fn run(grid: &VoxelGrid, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let Model { density, calibration, mask, mesh, materials: mats, load_point, bone_height } = build_model(grid, cfg)?;
    let orient = cfg.orientation;
    let ax = orient.axial.index();
    let mut distinct: Vec<u64> = mats.e.iter().map(|e| e.to_bits()).collect();
    distinct.sort_unstable();
    distinct.dedup();

    let mut diagnostics = Diagnostics {
        calibration,
        grid_dims: density.dims(),
        grid_spacing: density.spacing(),
        bone_voxels: mask.count(),
        nodes: mesh.nodes.len(),
        elements: mesh.elements.len(),
        bone_elements: mesh.bone_elements().count(),
        bone_volume_mm3: mesh.bone_volume(),
        bone_height_mm: bone_height,
        load_point,
        reduced_dofs: 0,
        solver_iterations: 0,
        equilibrium_error: 0.0,
        distinct_moduli: distinct.len(),
        newton_iterations: Vec::new(),
        curve: None,
    };

    let (failure, displacement, reaction, max_eq_strain) = match cfg.model {
        ModelVariant::Ensam => {
            let bottom = mesh.node_set(PMMA_BOTTOM).ok_or(MeshError::NotHexMesh)?.to_vec();
            let top = mesh.node_set(PMMA_TOP).ok_or(MeshError::NotHexMesh)?.to_vec();
            let mut dofs = [MasterDof::Free; 6];
            dofs[ax] = MasterDof::Loaded(-cfg.reference_load);
            let mut lc = LoadCase::new(ModelVariant::Ensam);
            lc.dirichlet.push(Dirichlet::clamp(bottom));
            lc.couplings.push(RigidCoupling::rigid(load_point, top, dofs));
            let sol = solve_linear(&mesh, &mats, &lc, &cfg.solver_options())?;
            diagnostics.reduced_dofs = sol.ndof;
            diagnostics.solver_iterations = sol.iterations;
            diagnostics.equilibrium_error = sol.equilibrium_error();
            let failure = ensam_failure_load(&mesh, &sol.eq_strain, cfg.reference_load, cfg.eps_crit, cfg.v_crit)?;
            let max = sol.max_eq_strain();
            (failure, sol.u, sol.reaction[ax], Some(max))
        }
        ModelVariant::Lyon => {
            let ends = detect_endplates(&mesh, &orient, cfg.band_fraction)?;
            // Translations held (the axial value is ramped by the solver),
            // rotations free.
            let mut dofs = [MasterDof::Free; 6];
            dofs[..3].fill(MasterDof::Imposed(0.0));
            let mut lc = LoadCase::new(ModelVariant::Lyon);
            lc.dirichlet.push(Dirichlet::clamp(ends.inferior));
            lc.couplings.push(RigidCoupling::rigid(load_point, ends.superior, dofs));
            let sol = solve_plastic(&mesh, &mats, &lc, &cfg.plastic_options())?;
            diagnostics.reduced_dofs = sol.ndof;
            diagnostics.solver_iterations = sol.newton_iterations.iter().sum();
            diagnostics.equilibrium_error = sol.equilibrium_error;
            diagnostics.newton_iterations = sol.newton_iterations.clone();
            let failure = lyon_failure_load(&sol.curve, cfg.target_strain)?;
            let reaction = sol.curve.last().map_or(0.0, |p| p.1);
            diagnostics.curve = Some(sol.curve);
            (failure, sol.u, reaction, None)
        }
    };
    Ok(PipelineOutput { failure, diagnostics, mesh, materials: mats, displacement, reaction, max_eq_strain })
}
