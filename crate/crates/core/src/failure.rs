//! Failure load from FEM output: the strained-volume criterion on a linear
//! solution and the reaction at a target overall strain on a plastic curve.

use alloc::vec::Vec;

use thiserror::Error;

use crate::fem::ReactionCurve;
use crate::material::ModelVariant;
use crate::mesh::Mesh;

pub const ENSAM_CRITICAL_STRAIN: f64 = 0.015;
/// Critical contiguous volume (mm³).
pub const ENSAM_CRITICAL_VOLUME: f64 = 1000.0;
pub const LYON_TARGET_STRAIN: f64 = 0.019;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FailureError {
    #[error("bone volume {volume} mm³ is below the critical volume {critical} mm³")]
    CriterionUnreachable { volume: f64, critical: f64 },
    #[error("no bone element carries a positive strain")]
    ZeroStrainField,
    #[error("curve ends at overall strain {reached}, before the target {target}")]
    TargetNotReached { reached: f64, target: f64 },
    #[error("reference load must be positive, got {0}")]
    BadReferenceLoad(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FailureDetail {
    Ensam {
        /// Load multiplier applied to the reference load.
        scale: f64,
        component_volume: f64,
        trigger_element: usize,
        trigger_strain: f64,
    },
    Lyon {
        strain: f64,
        reaction: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FailureResult {
    pub failure_load: f64,
    pub criterion: ModelVariant,
    pub detail: FailureDetail,
}

/// Disjoint sets with per-root volume.
struct UnionFind {
    parent: Vec<usize>,
    volume: Vec<f64>,
}

impl UnionFind {
    fn new(volumes: &[f64]) -> Self {
        Self { parent: (0..volumes.len()).collect(), volume: volumes.to_vec() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (keep, drop) = if self.volume[ra] >= self.volume[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
        self.volume[keep] += self.volume[drop];
        keep
    }
}

/// Outcome of the activation sweep on an abstract element graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepResult {
    pub trigger: usize,
    pub trigger_strain: f64,
    pub component_volume: f64,
}

/// Activates elements by decreasing strain (ties by index) and stops at the
/// first activation whose face-connected component reaches `v_crit`.
/// `adjacency` lists undirected pairs; entries with non-positive strain are
/// never activated.
pub fn strained_volume_sweep(
    volumes: &[f64],
    strains: &[f64],
    adjacency: &[(usize, usize)],
    v_crit: f64,
) -> Result<SweepResult, FailureError> {
    if strains.len() != volumes.len() {
        return Err(FailureError::LengthMismatch { expected: volumes.len(), got: strains.len() });
    }
    let n = volumes.len();
    let total: f64 = volumes.iter().sum();
    if total < v_crit {
        return Err(FailureError::CriterionUnreachable { volume: total, critical: v_crit });
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| strains[i] > 0.0).collect();
    if order.is_empty() {
        return Err(FailureError::ZeroStrainField);
    }
    order.sort_by(|&a, &b| strains[b].total_cmp(&strains[a]).then(a.cmp(&b)));

    let mut neighbours: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    for &(a, b) in adjacency {
        neighbours[a].push(b);
        neighbours[b].push(a);
    }
    let mut active = alloc::vec![false; n];
    let mut uf = UnionFind::new(volumes);
    for &e in &order {
        active[e] = true;
        let mut root = uf.find(e);
        for &nb in &neighbours[e] {
            if active[nb] {
                root = uf.union(root, nb);
            }
        }
        if uf.volume[root] >= v_crit {
            return Ok(SweepResult { trigger: e, trigger_strain: strains[e], component_volume: uf.volume[root] });
        }
    }
    // Only positively strained elements can activate; the rest of the body
    // never counts toward a component.
    Err(FailureError::CriterionUnreachable { volume: order.iter().map(|&i| volumes[i]).sum(), critical: v_crit })
}

/// Strained-volume failure load from a linear solution at reference load
/// `f0`. `eq_strain` is indexed by element; only bone elements take part.
pub fn ensam_failure_load(
    mesh: &Mesh,
    eq_strain: &[f64],
    f0: f64,
    eps_crit: f64,
    v_crit: f64,
) -> Result<FailureResult, FailureError> {
    if !(f0 > 0.0) {
        return Err(FailureError::BadReferenceLoad(f0));
    }
    if eq_strain.len() != mesh.elements.len() {
        return Err(FailureError::LengthMismatch { expected: mesh.elements.len(), got: eq_strain.len() });
    }
    let bone: Vec<usize> = mesh.bone_elements().collect();
    let mut local = alloc::vec![usize::MAX; mesh.elements.len()];
    for (i, &e) in bone.iter().enumerate() {
        local[e] = i;
    }
    let volumes: Vec<f64> = bone.iter().map(|&e| mesh.element_volume(e)).collect();
    let strains: Vec<f64> = bone.iter().map(|&e| eq_strain[e]).collect();
    let adjacency: Vec<(usize, usize)> =
        mesh.bone_face_adjacency().into_iter().map(|(a, b)| (local[a], local[b])).collect();
    let sweep = strained_volume_sweep(&volumes, &strains, &adjacency, v_crit)?;
    let scale = eps_crit / sweep.trigger_strain;
    Ok(FailureResult {
        failure_load: scale * f0,
        criterion: ModelVariant::Ensam,
        detail: FailureDetail::Ensam {
            scale,
            component_volume: sweep.component_volume,
            trigger_element: bone[sweep.trigger],
            trigger_strain: sweep.trigger_strain,
        },
    })
}

/// Reaction at `target` overall strain, interpolated linearly between the
/// bracketing curve points.
pub fn lyon_failure_load(curve: &ReactionCurve, target: f64) -> Result<FailureResult, FailureError> {
    let pts = &curve.points;
    let reached = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if pts.is_empty() || reached < target {
        return Err(FailureError::TargetNotReached { reached: if pts.is_empty() { 0.0 } else { reached }, target });
    }
    let reaction = if let Some(p) = pts.iter().find(|p| p.0 == target) {
        p.1
    } else {
        let i = pts
            .windows(2)
            .position(|w| w[0].0 < target && target < w[1].0)
            .ok_or(FailureError::TargetNotReached { reached, target })?;
        let (a, b) = (pts[i], pts[i + 1]);
        a.1 + (b.1 - a.1) * (target - a.0) / (b.0 - a.0)
    };
    Ok(FailureResult {
        failure_load: reaction,
        criterion: ModelVariant::Lyon,
        detail: FailureDetail::Lyon { strain: target, reaction },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_element_hand_sweep() {
        let r = strained_volume_sweep(&[600.0; 3], &[0.010, 0.009, 0.002], &[(0, 1)], 1000.0).unwrap();
        assert_eq!(r.trigger, 1);
        assert_eq!(r.component_volume, 1200.0);
        let load = ENSAM_CRITICAL_STRAIN / r.trigger_strain * 1000.0;
        assert!((load - 1666.6666666666667).abs() < 1e-9);
    }

    #[test]
    fn uniform_field_and_volume_bound() {
        let vols = [500.0; 4];
        let adj = [(0, 1), (1, 2), (2, 3)];
        let r = strained_volume_sweep(&vols, &[0.005; 4], &adj, 1000.0).unwrap();
        assert!((0.015 / r.trigger_strain - 3.0).abs() < 1e-12);
        // Equal strains activate in index order.
        assert_eq!(r.trigger, 1);
        assert!(matches!(
            strained_volume_sweep(&[300.0; 3], &[0.01; 3], &[(0, 1), (1, 2)], 1000.0),
            Err(FailureError::CriterionUnreachable { .. })
        ));
        assert_eq!(strained_volume_sweep(&vols, &[0.0; 4], &adj, 1000.0), Err(FailureError::ZeroStrainField));
    }

    #[test]
    fn disconnected_hot_spots_do_not_merge() {
        // 0 and 2 are hot but not adjacent; 1 bridges them last.
        let r = strained_volume_sweep(&[600.0; 3], &[0.02, 0.001, 0.019], &[(0, 1), (1, 2)], 1000.0).unwrap();
        assert_eq!(r.trigger, 1);
        assert_eq!(r.component_volume, 1800.0);
    }

    #[test]
    fn lyon_interpolation() {
        let c = ReactionCurve { points: alloc::vec![(0.0, 0.0), (0.01, 500.0), (0.019, 700.0)] };
        assert_eq!(lyon_failure_load(&c, 0.019).unwrap().failure_load, 700.0);
        let c = ReactionCurve { points: alloc::vec![(0.0, 0.0), (0.018, 690.0), (0.020, 710.0)] };
        assert!((lyon_failure_load(&c, 0.019).unwrap().failure_load - 700.0).abs() < 1e-9);
        let c = ReactionCurve { points: alloc::vec![(0.0, 0.0), (0.015, 650.0)] };
        assert!(matches!(lyon_failure_load(&c, 0.019), Err(FailureError::TargetNotReached { .. })));
    }
}
