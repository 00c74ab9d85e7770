//! Isoparametric shape functions and quadrature for Hex8 and Tet10.
//!
//! Hex8 corners follow the usual ordering on the reference cube `[-1, 1]³`:
//! bottom face `0..4` counter-clockwise seen from `+z`, top face `4..8` above
//! them. Tet10 uses natural coordinates `(ξ, η, ζ)` with barycentrics
//! `L1 = 1 - ξ - η - ζ, L2 = ξ, L3 = η, L4 = ζ`; nodes `0..4` are corners and
//! nodes `4..10` sit on edges `01, 12, 02, 03, 13, 23`.

use arrayvec::ArrayVec;

use crate::mesh::ElementKind;

pub const MAX_NODES: usize = 10;

const HEX_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Corner pairs of the Tet10 midside nodes, in node order `4..10`.
pub const TET10_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)];

/// Corner indices of the six Hex8 faces.
pub const HEX8_FACES: [[usize; 4]; 6] =
    [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [2, 3, 7, 6], [0, 4, 7, 3], [1, 2, 6, 5]];

/// Corner indices of the four Tet10 faces.
pub const TET10_FACES: [[usize; 3]; 4] = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]];

const G: f64 = 0.577_350_269_189_625_8;

static HEX_GAUSS: [([f64; 3], f64); 8] = [
    ([-G, -G, -G], 1.0),
    ([G, -G, -G], 1.0),
    ([G, G, -G], 1.0),
    ([-G, G, -G], 1.0),
    ([-G, -G, G], 1.0),
    ([G, -G, G], 1.0),
    ([G, G, G], 1.0),
    ([-G, G, G], 1.0),
];

const TA: f64 = 0.585_410_196_624_968_5;
const TB: f64 = 0.138_196_601_125_010_5;

static TET_GAUSS: [([f64; 3], f64); 4] =
    [([TB, TB, TB], 1.0 / 24.0), ([TA, TB, TB], 1.0 / 24.0), ([TB, TA, TB], 1.0 / 24.0), ([TB, TB, TA], 1.0 / 24.0)];

impl ElementKind {
    pub fn node_count(self) -> usize {
        match self {
            ElementKind::Hex8 => 8,
            ElementKind::Tet10 => 10,
        }
    }

    pub fn corner_count(self) -> usize {
        match self {
            ElementKind::Hex8 => 8,
            ElementKind::Tet10 => 4,
        }
    }

    /// 2×2×2 Gauss for Hex8, the degree-2 four-point rule for Tet10.
    pub fn quadrature(self) -> &'static [([f64; 3], f64)] {
        match self {
            ElementKind::Hex8 => &HEX_GAUSS,
            ElementKind::Tet10 => &TET_GAUSS,
        }
    }

    pub fn centroid(self) -> [f64; 3] {
        match self {
            ElementKind::Hex8 => [0.0; 3],
            ElementKind::Tet10 => [0.25; 3],
        }
    }

    /// Corner lists of each face, as local node indices.
    pub fn faces(self) -> &'static [&'static [usize]] {
        const HEX: [&[usize]; 6] =
            [&HEX8_FACES[0], &HEX8_FACES[1], &HEX8_FACES[2], &HEX8_FACES[3], &HEX8_FACES[4], &HEX8_FACES[5]];
        const TET: [&[usize]; 4] = [&TET10_FACES[0], &TET10_FACES[1], &TET10_FACES[2], &TET10_FACES[3]];
        match self {
            ElementKind::Hex8 => &HEX,
            ElementKind::Tet10 => &TET,
        }
    }

    /// Every local node lying on a face (corners plus Tet10 midsides).
    pub fn face_nodes(self, face: &[usize]) -> ArrayVec<usize, 8> {
        let mut out = ArrayVec::new();
        for &c in face {
            out.push(c);
        }
        if self == ElementKind::Tet10 {
            for (m, &(a, b)) in TET10_EDGES.iter().enumerate() {
                if face.contains(&a) && face.contains(&b) {
                    out.push(4 + m);
                }
            }
        }
        out
    }
}

/// Shape function values at a natural point.
pub fn values(kind: ElementKind, xi: [f64; 3], out: &mut [f64; MAX_NODES]) {
    match kind {
        ElementKind::Hex8 => {
            for (i, s) in HEX_SIGNS.iter().enumerate() {
                out[i] = 0.125 * (1.0 + s[0] * xi[0]) * (1.0 + s[1] * xi[1]) * (1.0 + s[2] * xi[2]);
            }
        }
        ElementKind::Tet10 => {
            let l = [1.0 - xi[0] - xi[1] - xi[2], xi[0], xi[1], xi[2]];
            for c in 0..4 {
                out[c] = l[c] * (2.0 * l[c] - 1.0);
            }
            for (m, &(a, b)) in TET10_EDGES.iter().enumerate() {
                out[4 + m] = 4.0 * l[a] * l[b];
            }
        }
    }
}

/// Derivatives of the shape functions with respect to natural coordinates.
pub fn natural_derivatives(kind: ElementKind, xi: [f64; 3], out: &mut [[f64; 3]; MAX_NODES]) {
    match kind {
        ElementKind::Hex8 => {
            for (i, s) in HEX_SIGNS.iter().enumerate() {
                let f = [1.0 + s[0] * xi[0], 1.0 + s[1] * xi[1], 1.0 + s[2] * xi[2]];
                out[i] = [0.125 * s[0] * f[1] * f[2], 0.125 * s[1] * f[0] * f[2], 0.125 * s[2] * f[0] * f[1]];
            }
        }
        ElementKind::Tet10 => {
            let l = [1.0 - xi[0] - xi[1] - xi[2], xi[0], xi[1], xi[2]];
            // dL/dξ_a: L1 → -1 for all a; L(a+2) → 1 for a.
            let dl = |c: usize, a: usize| -> f64 {
                if c == 0 {
                    -1.0
                } else if c == a + 1 {
                    1.0
                } else {
                    0.0
                }
            };
            for c in 0..4 {
                for a in 0..3 {
                    out[c][a] = (4.0 * l[c] - 1.0) * dl(c, a);
                }
            }
            for (m, &(p, q)) in TET10_EDGES.iter().enumerate() {
                for a in 0..3 {
                    out[4 + m][a] = 4.0 * (dl(p, a) * l[q] + l[p] * dl(q, a));
                }
            }
        }
    }
}

/// Physical shape-function gradients at a natural point, plus the Jacobian
/// determinant.
#[derive(Debug, Clone, Copy)]
pub struct Gradients {
    pub dn: [[f64; 3]; MAX_NODES],
    pub det: f64,
}

pub fn gradients(kind: ElementKind, coords: &[[f64; 3]], xi: [f64; 3]) -> Gradients {
    let n = kind.node_count();
    let mut dnat = [[0.0; 3]; MAX_NODES];
    natural_derivatives(kind, xi, &mut dnat);
    // J[a][b] = d x_b / d ξ_a
    let mut j = [[0.0; 3]; 3];
    for i in 0..n {
        for a in 0..3 {
            for b in 0..3 {
                j[a][b] += dnat[i][a] * coords[i][b];
            }
        }
    }
    let det = det3(&j);
    let inv = inv3(&j, det);
    let mut dn = [[0.0; 3]; MAX_NODES];
    for i in 0..n {
        for b in 0..3 {
            dn[i][b] = inv[b][0] * dnat[i][0] + inv[b][1] * dnat[i][1] + inv[b][2] * dnat[i][2];
        }
    }
    Gradients { dn, det }
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of `m` given its determinant. Returns zeros for a singular matrix.
pub fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    if det == 0.0 {
        return [[0.0; 3]; 3];
    }
    let d = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * d,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * d,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * d,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * d,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * d,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * d,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * d,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * d,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * d,
        ],
    ]
}

/// Element volume by quadrature, and the smallest Jacobian determinant seen.
pub fn volume(kind: ElementKind, coords: &[[f64; 3]]) -> (f64, f64) {
    let mut vol = 0.0;
    let mut min_det = f64::INFINITY;
    for &(xi, w) in kind.quadrature() {
        let g = gradients(kind, coords, xi);
        vol += g.det * w;
        min_det = min_det.min(g.det);
    }
    (vol, min_det)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_hex() -> [[f64; 3]; 8] {
        core::array::from_fn(|i| {
            let s = HEX_SIGNS[i];
            [(s[0] + 1.0) * 0.5, (s[1] + 1.0) * 0.5, (s[2] + 1.0) * 0.5]
        })
    }

    fn unit_tet10() -> [[f64; 3]; 10] {
        let c = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        core::array::from_fn(|i| {
            if i < 4 {
                c[i]
            } else {
                let (a, b) = TET10_EDGES[i - 4];
                core::array::from_fn(|d| 0.5 * (c[a][d] + c[b][d]))
            }
        })
    }

    #[test]
    fn partition_of_unity() {
        for kind in [ElementKind::Hex8, ElementKind::Tet10] {
            let mut n = [0.0; MAX_NODES];
            let mut dn = [[0.0; 3]; MAX_NODES];
            let xi = [0.13, 0.21, 0.37];
            values(kind, xi, &mut n);
            natural_derivatives(kind, xi, &mut dn);
            let s: f64 = n[..kind.node_count()].iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            for a in 0..3 {
                let d: f64 = dn[..kind.node_count()].iter().map(|v| v[a]).sum();
                assert!(d.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for kind in [ElementKind::Hex8, ElementKind::Tet10] {
            let xi = [0.11, 0.23, 0.19];
            let mut dn = [[0.0; 3]; MAX_NODES];
            natural_derivatives(kind, xi, &mut dn);
            let h = 1e-6;
            for a in 0..3 {
                let mut p = xi;
                let mut m = xi;
                p[a] += h;
                m[a] -= h;
                let (mut np, mut nm) = ([0.0; MAX_NODES], [0.0; MAX_NODES]);
                values(kind, p, &mut np);
                values(kind, m, &mut nm);
                for i in 0..kind.node_count() {
                    let fd = (np[i] - nm[i]) / (2.0 * h);
                    assert!((fd - dn[i][a]).abs() < 1e-8, "{kind:?} node {i} axis {a}");
                }
            }
        }
    }

    #[test]
    fn reference_volumes() {
        let (v, d) = volume(ElementKind::Hex8, &unit_hex());
        assert!((v - 1.0).abs() < 1e-14 && d > 0.0);
        let (v, d) = volume(ElementKind::Tet10, &unit_tet10());
        assert!((v - 1.0 / 6.0).abs() < 1e-15 && d > 0.0);
    }

    #[test]
    fn tet10_nodal_interpolation() {
        let coords = unit_tet10();
        let mut n = [0.0; MAX_NODES];
        for (i, x) in coords.iter().enumerate() {
            values(ElementKind::Tet10, *x, &mut n);
            for (j, &v) in n[..10].iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-14);
            }
        }
    }
}
