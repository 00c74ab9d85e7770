//! Small-strain finite elements: stiffness, constraint elimination, linear
//! and elasto-plastic solves.

use alloc::string::String;

use thiserror::Error;

pub mod constraint;
pub mod element;
pub mod linear;
pub mod plastic;
pub mod profile;
pub mod shape;
pub mod sparse;

pub use constraint::{Dirichlet, DofMap, LoadCase, MasterDof, RigidCoupling};
pub use element::{element_stiffness, StrainMeasure, Sym};
pub use linear::{assemble, solve_linear, LinearSolution, LinearSolver, SolverOptions};
pub use plastic::{solve_plastic, PlasticOptions, PlasticSolution, ReactionCurve, Tangent};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("inverted element {element:?}: jacobian determinant {det}")]
    InvertedElement { element: Option<usize>, det: f64 },
    #[error("material map covers {materials} of {elements} elements")]
    MissingMaterial { elements: usize, materials: usize },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("newton iteration diverged at increment {increment} after {iterations} iterations, residual {residual:e}")]
    NewtonDiverged { increment: usize, iterations: usize, residual: f64 },
    #[error("node {node} component {component} is constrained more than once")]
    DuplicateConstraint { node: usize, component: usize },
    #[error("node {0} is out of range")]
    NodeOutOfRange(usize),
    #[error("invalid load case: {0}")]
    BadLoadCase(String),
    #[error("plastic solve requires the Lyon variant with a yield strain")]
    NotPlasticVariant,
    #[error("no displacement-controlled master DOF along the axial direction")]
    NoDisplacementControl,
}
