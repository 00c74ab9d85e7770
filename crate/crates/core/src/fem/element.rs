//! Element stiffness, strain recovery and the von Mises return mapping.
//!
//! Strain and stress use the component order `xx, yy, zz, xy, yz, xz`.
//! Strain tensors store tensorial shear (`ε_xy = γ_xy / 2`); the B operator
//! produces engineering shear, so `Bᵀσ` is the work-conjugate internal force.

use alloc::vec;
use alloc::vec::Vec;

use super::shape::{self, Gradients};
use super::FemError;
use crate::mesh::ElementKind;

pub type Sym = [f64; 6];

/// Isotropic elasticity constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isotropic {
    pub lambda: f64,
    pub mu: f64,
}

impl Isotropic {
    pub fn new(e: f64, nu: f64) -> Self {
        Self { lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), mu: e / (2.0 * (1.0 + nu)) }
    }

    /// Stress from a tensorial strain.
    pub fn stress(&self, eps: &Sym) -> Sym {
        let tr = eps[0] + eps[1] + eps[2];
        let l = self.lambda * tr;
        let m2 = 2.0 * self.mu;
        [l + m2 * eps[0], l + m2 * eps[1], l + m2 * eps[2], m2 * eps[3], m2 * eps[4], m2 * eps[5]]
    }

    /// 6×6 matrix mapping engineering strain to stress.
    pub fn matrix(&self) -> [[f64; 6]; 6] {
        let (l, m) = (self.lambda, self.mu);
        let mut d = [[0.0; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = if i == j { l + 2.0 * m } else { l };
            }
            d[i + 3][i + 3] = m;
        }
        d
    }
}

/// Engineering strain `B u` at a point from physical gradients.
pub fn engineering_strain(g: &Gradients, n_nodes: usize, ue: &[f64]) -> Sym {
    let mut s = [0.0; 6];
    for i in 0..n_nodes {
        let d = g.dn[i];
        let (ux, uy, uz) = (ue[3 * i], ue[3 * i + 1], ue[3 * i + 2]);
        s[0] += d[0] * ux;
        s[1] += d[1] * uy;
        s[2] += d[2] * uz;
        s[3] += d[1] * ux + d[0] * uy;
        s[4] += d[2] * uy + d[1] * uz;
        s[5] += d[2] * ux + d[0] * uz;
    }
    s
}

pub fn tensor_from_engineering(s: Sym) -> Sym {
    [s[0], s[1], s[2], 0.5 * s[3], 0.5 * s[4], 0.5 * s[5]]
}

/// Adds `Bᵀ σ · scale` into `fe`.
pub fn add_bt_sigma(g: &Gradients, n_nodes: usize, sigma: &Sym, scale: f64, fe: &mut [f64]) {
    for i in 0..n_nodes {
        let d = g.dn[i];
        fe[3 * i] += scale * (d[0] * sigma[0] + d[1] * sigma[3] + d[2] * sigma[5]);
        fe[3 * i + 1] += scale * (d[1] * sigma[1] + d[0] * sigma[3] + d[2] * sigma[4]);
        fe[3 * i + 2] += scale * (d[2] * sigma[2] + d[1] * sigma[4] + d[0] * sigma[5]);
    }
}

fn b_matrix(g: &Gradients, n_nodes: usize) -> Vec<[f64; 6]> {
    // Column-wise: b[c] is the strain produced by a unit value of dof c.
    let mut b = vec![[0.0; 6]; 3 * n_nodes];
    for i in 0..n_nodes {
        let d = g.dn[i];
        b[3 * i] = [d[0], 0.0, 0.0, d[1], 0.0, d[2]];
        b[3 * i + 1] = [0.0, d[1], 0.0, d[0], d[2], 0.0];
        b[3 * i + 2] = [0.0, 0.0, d[2], 0.0, d[1], d[0]];
    }
    b
}

/// Adds `Bᵀ D B · scale` into the dense row-major `k` (`3n × 3n`), upper
/// triangle only.
pub fn add_btdb(g: &Gradients, n_nodes: usize, d: &[[f64; 6]; 6], scale: f64, k: &mut [f64]) {
    let ndof = 3 * n_nodes;
    let b = b_matrix(g, n_nodes);
    let db: Vec<[f64; 6]> =
        b.iter().map(|col| core::array::from_fn(|r| (0..6).map(|c| d[r][c] * col[c]).sum())).collect();
    for a in 0..ndof {
        for c in a..ndof {
            let v: f64 = (0..6).map(|r| b[a][r] * db[c][r]).sum();
            k[a * ndof + c] += v * scale;
        }
    }
}

/// Copies the upper triangle of a dense square matrix into the lower.
pub fn symmetrize_upper(k: &mut [f64], ndof: usize) {
    for a in 0..ndof {
        for c in 0..a {
            k[a * ndof + c] = k[c * ndof + a];
        }
    }
}

/// Dense element stiffness (row-major, `3n × 3n`) by Gauss quadrature.
pub fn element_stiffness(kind: ElementKind, coords: &[[f64; 3]], e: f64, nu: f64) -> Result<Vec<f64>, FemError> {
    let n = kind.node_count();
    let ndof = 3 * n;
    let d = Isotropic::new(e, nu).matrix();
    let mut k = vec![0.0; ndof * ndof];
    for &(xi, w) in kind.quadrature() {
        let g = shape::gradients(kind, coords, xi);
        if !(g.det > 0.0) {
            return Err(FemError::InvertedElement { element: None, det: g.det });
        }
        add_btdb(&g, n, &d, g.det * w, &mut k);
    }
    symmetrize_upper(&mut k, ndof);
    Ok(k)
}

/// Tensorial strain at the element centroid.
pub fn centroid_strain(kind: ElementKind, coords: &[[f64; 3]], ue: &[f64]) -> Sym {
    let g = shape::gradients(kind, coords, kind.centroid());
    tensor_from_engineering(engineering_strain(&g, kind.node_count(), ue))
}

pub fn deviator(t: &Sym) -> Sym {
    let m = (t[0] + t[1] + t[2]) / 3.0;
    [t[0] - m, t[1] - m, t[2] - m, t[3], t[4], t[5]]
}

/// `t : t` for a symmetric tensor stored in six components.
pub fn double_dot(t: &Sym) -> f64 {
    t[0] * t[0] + t[1] * t[1] + t[2] * t[2] + 2.0 * (t[3] * t[3] + t[4] * t[4] + t[5] * t[5])
}

/// von Mises equivalent strain `sqrt(2/3 e:e)` with `e` the deviatoric strain.
pub fn von_mises_strain(eps: &Sym) -> f64 {
    libm::sqrt(2.0 / 3.0 * double_dot(&deviator(eps)))
}

/// von Mises equivalent stress `sqrt(3/2 s:s)`.
pub fn von_mises_stress(sigma: &Sym) -> f64 {
    libm::sqrt(1.5 * double_dot(&deviator(sigma)))
}

/// Eigenvalues of a symmetric tensor, ascending.
pub fn principal_values(t: &Sym) -> [f64; 3] {
    let p1 = t[3] * t[3] + t[4] * t[4] + t[5] * t[5];
    let q = (t[0] + t[1] + t[2]) / 3.0;
    if p1 == 0.0 {
        let mut v = [t[0], t[1], t[2]];
        v.sort_by(|a, b| a.total_cmp(b));
        return v;
    }
    let p2 = (t[0] - q) * (t[0] - q) + (t[1] - q) * (t[1] - q) + (t[2] - q) * (t[2] - q) + 2.0 * p1;
    let p = libm::sqrt(p2 / 6.0);
    let b = [(t[0] - q) / p, (t[1] - q) / p, (t[2] - q) / p, t[3] / p, t[4] / p, t[5] / p];
    // det of [[b0, b3, b5], [b3, b1, b4], [b5, b4, b2]]
    let det =
        b[0] * (b[1] * b[2] - b[4] * b[4]) - b[3] * (b[3] * b[2] - b[4] * b[5]) + b[5] * (b[3] * b[4] - b[1] * b[5]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = libm::acos(r) / 3.0;
    let hi = q + 2.0 * p * libm::cos(phi);
    let lo = q + 2.0 * p * libm::cos(phi + 2.0 * core::f64::consts::PI / 3.0);
    let mid = 3.0 * q - hi - lo;
    [lo, mid, hi]
}

/// Scalar strain used by the strained-volume failure criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StrainMeasure {
    /// `sqrt(2/3 e:e)` of the deviatoric strain.
    #[default]
    VonMises,
    /// Magnitude of the most compressive principal strain.
    MinPrincipal,
}

impl StrainMeasure {
    pub fn evaluate(self, eps: &Sym) -> f64 {
        match self {
            StrainMeasure::VonMises => von_mises_strain(eps),
            StrainMeasure::MinPrincipal => principal_values(eps)[0].min(0.0).abs(),
        }
    }
}

/// Integration-point state of the elasto-perfectly-plastic material.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlasticState {
    pub stress: Sym,
    /// Tensorial plastic strain.
    pub plastic_strain: Sym,
}

/// Radial return for von Mises perfect plasticity. `eps` is the total
/// tensorial strain; `committed` holds the plastic strain at the start of
/// the step. Returns the updated state and whether the point yielded.
pub fn radial_return(mat: &Isotropic, yield_stress: f64, eps: &Sym, committed: &Sym) -> (PlasticState, bool) {
    let elastic: Sym = core::array::from_fn(|i| eps[i] - committed[i]);
    let trial = mat.stress(&elastic);
    let s = deviator(&trial);
    let q = libm::sqrt(1.5 * double_dot(&s));
    if q <= yield_stress {
        return (PlasticState { stress: trial, plastic_strain: *committed }, false);
    }
    let p = (trial[0] + trial[1] + trial[2]) / 3.0;
    let scale = yield_stress / q;
    let flow = (q - yield_stress) / (2.0 * mat.mu * q);
    let mut stress = [0.0; 6];
    let mut plastic = *committed;
    for i in 0..6 {
        stress[i] = s[i] * scale + if i < 3 { p } else { 0.0 };
        plastic[i] += flow * s[i];
    }
    (PlasticState { stress, plastic_strain: plastic }, true)
}

/// Algorithmic tangent of the radial return for perfect plasticity, mapping
/// engineering strain increments to stress increments. Elastic points get the
/// elastic matrix.
pub fn consistent_tangent(mat: &Isotropic, yield_stress: f64, eps: &Sym, committed: &Sym) -> [[f64; 6]; 6] {
    let mut d = mat.matrix();
    let elastic: Sym = core::array::from_fn(|i| eps[i] - committed[i]);
    let s = deviator(&mat.stress(&elastic));
    let norm = libm::sqrt(double_dot(&s));
    let q = libm::sqrt(1.5) * norm;
    if q <= yield_stress {
        return d;
    }
    let beta = yield_stress / q;
    let m2 = 2.0 * mat.mu;
    let n: Sym = s.map(|v| v / norm);
    // D = K 1⊗1 + 2μβ (I_dev − n⊗n), in engineering-strain Voigt form.
    let kappa = mat.lambda + m2 / 3.0;
    for i in 0..6 {
        for j in 0..6 {
            let idev = match (i < 3, j < 3) {
                (true, true) => (if i == j { 1.0 } else { 0.0 }) - 1.0 / 3.0,
                (false, false) if i == j => 0.5,
                _ => 0.0,
            };
            let vol = if i < 3 && j < 3 { kappa } else { 0.0 };
            d[i][j] = vol + m2 * beta * (idev - n[i] * n[j]);
        }
    }
    d
}

/// Cached shape-function gradients at every integration point of an element.
#[derive(Clone)]
pub struct ElementCache {
    pub kind: ElementKind,
    pub points: Vec<(Gradients, f64)>,
}

impl ElementCache {
    pub fn new(kind: ElementKind, coords: &[[f64; 3]]) -> Result<Self, FemError> {
        let mut points = Vec::with_capacity(kind.quadrature().len());
        for &(xi, w) in kind.quadrature() {
            let g = shape::gradients(kind, coords, xi);
            if !(g.det > 0.0) {
                return Err(FemError::InvertedElement { element: None, det: g.det });
            }
            let scale = g.det * w;
            points.push((g, scale));
        }
        Ok(Self { kind, points })
    }
}
