//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p vertfe --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vertfe::commands;
use vertfe_core::failure::{ensam_failure_load, strained_volume_sweep};
use vertfe_core::fem::shape::TET10_EDGES;
use vertfe_core::fem::{
    element_stiffness, solve_linear, solve_plastic, Dirichlet, LoadCase, MasterDof, PlasticOptions, RigidCoupling,
    SolverOptions,
};
use vertfe_core::material::{MaterialMap, ModelVariant, MODULUS_INTERCEPT, MODULUS_SLOPE};
use vertfe_core::mesh::{hex_mesh_from_mask, tet_mesh_from_mask, ElementKind, Mesh};
use vertfe_core::phantom::PhantomSpec;
use vertfe_core::pipeline::LYON_SPACING;
use vertfe_core::segment::VoxelMask;
use vertfe_core::stats::RowKind;
use vertfe_core::voxel::{GridGeometry, GridKind, VoxelGrid};

// Tolerances.
const ROW_MEAN_TOL: f64 = 2.0;
const ROW_SD_TOL: f64 = 10.0;
const R2_TOL: f64 = 0.01;
const STATS_RUNTIME_S: f64 = 1.0;
const INTRA_TOL: f64 = 0.2;
const CROSS_R2_TOL: f64 = 0.02;
const COLUMN_MEAN_TOL: f64 = 1.0;
const COLUMN_SD_TOL: f64 = 10.0;
const PATCH_TOL: f64 = 1e-8;
const LINEAR_REACTION_TOL: f64 = 1e-6;
const PLATEAU_TOL: f64 = 0.01;
const ZERO_EIG_REL: f64 = 1e-8;
const EQUILIBRIUM_TOL: f64 = 1e-6;
const FEM_RUNTIME_S: f64 = 60.0;
const ORACLE_FIXTURES: usize = 50;
const F0_INVARIANCE_TOL: f64 = 1e-9;
const ANALYTIC_TOL: f64 = 0.02;
const VOLUME_TOL: f64 = 1e-10;

/// Expected agreement rows: mean, SD (N) and R², in report order.
const AGREEMENT: [(&str, f64, f64, f64); 8] = [
    ("Ensam Operator 1 - Trial 1", 216.0, 340.0, 0.96),
    ("Ensam Operator 1 - Trial 2", 113.0, 385.0, 0.94),
    ("Ensam Operator 1 - Mean Trial 1&2", 165.0, 331.0, 0.96),
    ("Ensam Operator 2 - Trial 1", -54.0, 395.0, 0.95),
    ("Ensam Operators - Mean Trials", 56.0, 337.0, 0.97),
    ("Lyon Operator 3 - Trial 1", 523.0, 482.0, 0.92),
    ("Lyon Operator 3 - Trial 2", 603.0, 504.0, 0.91),
    ("Lyon Operator 3 - Mean Trials", 563.0, 489.0, 0.92),
];
const LYON_INTRA_R2: f64 = 0.99;
const ENSAM_INTRA_R2: f64 = 0.96;
const COLUMN_MEANS: [f64; 6] = [3120.0, 3337.0, 3234.0, 3067.0, 3643.0, 3724.0];
const COLUMN_SDS: [f64; 6] = [1595.0, 1430.0, 1436.0, 1362.0, 1385.0, 1369.0];

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn stats_report(dir: &Path) -> Result<(vertfe_core::stats::StudyReport, f64), String> {
    let t = Instant::now();
    let report = commands::stats(None, dir).map_err(|e| e.to_string())?;
    Ok((report, t.elapsed().as_secs_f64()))
}

fn criterion_1(dir: &Path) -> Check {
    let (report, secs) = stats_report(&dir.join("c1"))?;
    let mut problems = Vec::new();
    for (label, mean, sd, r2) in AGREEMENT {
        let Some(row) = report.rows.iter().find(|r| r.label == label) else {
            problems.push(format!("missing row {label}"));
            continue;
        };
        let row_sd = row.sd.unwrap_or(f64::NAN);
        let row_r2 = row.r_squared.unwrap_or(f64::NAN);
        if !close(row.mean, mean, ROW_MEAN_TOL) || !close(row_sd, sd, ROW_SD_TOL) || !close(row_r2, r2, R2_TOL) {
            problems.push(format!("{label}: {:.1}±{row_sd:.1} R²={row_r2:.3}", row.mean));
        }
    }
    let lyon_intra = report.rows.iter().find(|r| r.kind == RowKind::IntraOperator && r.label.starts_with("Lyon"));
    match lyon_intra.and_then(|r| r.r_squared) {
        Some(r2) if close(r2, LYON_INTRA_R2, R2_TOL) => {}
        other => problems.push(format!("Lyon intra R² {other:?}")),
    }
    if secs >= STATS_RUNTIME_S {
        problems.push(format!("runtime {secs:.3} s"));
    }
    ensure(problems.is_empty(), problems.join("; "))?;
    let ensam_intra = report
        .rows
        .iter()
        .find(|r| r.kind == RowKind::IntraOperator && r.label.starts_with("Ensam"))
        .and_then(|r| r.r_squared)
        .unwrap_or(f64::NAN);
    Ok(format!(
        "8 agreement rows and 9 R² values within tolerance; runtime {:.1} ms; Ensam intra-operator R² {ensam_intra:.3} (reference {ENSAM_INTRA_R2}, not among the nine)",
        secs * 1e3
    ))
}

fn criterion_2(dir: &Path) -> Check {
    let (report, _) = stats_report(&dir.join("c2"))?;
    let e = report.ensam_intra_percent.ok_or("no Ensam intra-operator summary")?;
    let l = report.lyon_intra_percent.ok_or("no Lyon intra-operator summary")?;
    let detail = format!("Ensam {:.2}±{:.2} %, Lyon {:.2}±{:.2} %", e.mean, e.sd, l.mean, l.sd);
    let ok = close(e.mean, 6.4, INTRA_TOL)
        && close(e.sd, 6.2, INTRA_TOL)
        && close(l.mean, 3.5, INTRA_TOL)
        && close(l.sd, 2.1, INTRA_TOL);
    ensure(ok, detail.clone())?;
    Ok(detail)
}

fn criterion_3(dir: &Path) -> Check {
    let (report, _) = stats_report(&dir.join("c3"))?;
    let r2 = report.cross_model_r_squared.ok_or("no cross-model R²")?;
    ensure(close(r2, 0.91, CROSS_R2_TOL), format!("R² {r2:.4}"))?;
    Ok(format!("R² {r2:.4}"))
}

fn criterion_4(dir: &Path) -> Check {
    let (report, _) = stats_report(&dir.join("c4"))?;
    ensure(report.columns.len() == 6, format!("{} columns", report.columns.len()))?;
    let mut parts = Vec::new();
    let mut ok = true;
    for (c, (m, s)) in report.columns.iter().zip(COLUMN_MEANS.iter().zip(COLUMN_SDS)) {
        let sd = c.sd.unwrap_or(f64::NAN);
        ok &= close(c.mean, *m, COLUMN_MEAN_TOL) && close(sd, s, COLUMN_SD_TOL);
        parts.push(format!("{}={:.1}±{:.1}", c.column, c.mean, sd));
    }
    let detail = parts.join(", ");
    ensure(ok, detail.clone())?;
    Ok(detail)
}

fn solid_mask(dims: [usize; 3], h: f64) -> VoxelMask {
    let geo = GridGeometry::new(dims, [h; 3], [0.0; 3]).unwrap();
    VoxelMask::new(geo, vec![true; dims.iter().product()]).unwrap()
}

fn density_for(mask: &VoxelMask) -> VoxelGrid {
    let v = mask.bits().iter().map(|&b| if b { 0.3 } else { 0.0 }).collect();
    VoxelGrid::new(*mask.geometry(), GridKind::Density, v).unwrap()
}

fn box_mesh(kind: ElementKind, dims: [usize; 3], h: f64) -> Mesh {
    let mask = solid_mask(dims, h);
    let grid = density_for(&mask);
    match kind {
        ElementKind::Hex8 => hex_mesh_from_mask(&grid, &mask).unwrap(),
        ElementKind::Tet10 => tet_mesh_from_mask(&grid, &mask).unwrap(),
    }
}

fn nodes_at(mesh: &Mesh, axis: usize, value: f64) -> Vec<usize> {
    (0..mesh.nodes.len()).filter(|&n| (mesh.nodes[n][axis] - value).abs() < 1e-9).collect()
}

/// Base on rollers, top face tied axially to a master point, free sides.
fn roller_column(mesh: &Mesh, variant: ModelVariant, top: MasterDof) -> LoadCase {
    let max = |k: usize| mesh.nodes.iter().map(|p| p[k]).fold(f64::MIN, f64::max);
    let (xmax, ymax, zmax) = (max(0), max(1), max(2));
    let bottom = nodes_at(mesh, 2, 0.0);
    let at = |x: f64| {
        *bottom.iter().find(|&&n| (mesh.nodes[n][0] - x).abs() < 1e-9 && mesh.nodes[n][1].abs() < 1e-9).unwrap()
    };
    let mut lc = LoadCase::new(variant);
    lc.dirichlet.push(Dirichlet { nodes: bottom.clone(), values: [None, None, Some(0.0)] });
    lc.dirichlet.push(Dirichlet { nodes: vec![at(0.0)], values: [Some(0.0), Some(0.0), None] });
    lc.dirichlet.push(Dirichlet { nodes: vec![at(xmax)], values: [None, Some(0.0), None] });
    lc.couplings.push(RigidCoupling {
        master_point: [xmax / 2.0, ymax / 2.0, zmax],
        slaves: nodes_at(mesh, 2, zmax),
        dofs: [
            MasterDof::Imposed(0.0),
            MasterDof::Imposed(0.0),
            top,
            MasterDof::Free,
            MasterDof::Free,
            MasterDof::Imposed(0.0),
        ],
        coupled: [false, false, true],
    });
    lc
}

fn affine(p: [f64; 3]) -> [f64; 3] {
    [
        1e-3 * p[0] + 2e-4 * p[1] - 1e-4 * p[2] + 0.01,
        -3e-4 * p[0] + 5e-4 * p[1] + 4e-4 * p[2],
        2e-4 * p[0] + 1e-4 * p[1] - 8e-4 * p[2] - 0.02,
    ]
}

fn unit_element(kind: ElementKind) -> Vec<[f64; 3]> {
    match kind {
        ElementKind::Hex8 => vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.0, 1.0, 1.0],
        ],
        ElementKind::Tet10 => {
            let c = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            let mut v = c.to_vec();
            for (a, b) in TET10_EDGES {
                v.push(std::array::from_fn(|k| 0.5 * (c[a][k] + c[b][k])));
            }
            v
        }
    }
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let mut worst_eq: f64 = 0.0;
    let kinds = [ElementKind::Hex8, ElementKind::Tet10];

    // Patch test: affine boundary data, distorted interior for hex.
    let want = [1e-3, 5e-4, -8e-4, 0.5 * (2e-4 - 3e-4), 0.5 * (4e-4 + 1e-4), 0.5 * (-1e-4 + 2e-4)];
    let mut patch_err: f64 = 0.0;
    for kind in kinds {
        let mut m = box_mesh(kind, [3, 3, 2], 1.0);
        let boundary = m.boundary_nodes_where(|_| true);
        let interior: Vec<usize> = (0..m.nodes.len()).filter(|n| !boundary.contains(n)).collect();
        if kind == ElementKind::Hex8 {
            for (i, &n) in interior.iter().enumerate() {
                m.nodes[n][0] += 0.13 * (i as f64 + 1.0);
                m.nodes[n][1] -= 0.07;
                m.nodes[n][2] += 0.11;
            }
        }
        let mut lc = LoadCase::new(ModelVariant::Ensam);
        for &n in &boundary {
            lc.dirichlet.push(Dirichlet { nodes: vec![n], values: affine(m.nodes[n]).map(Some) });
        }
        let mats = MaterialMap::uniform(ModelVariant::Ensam, m.elements.len(), 1000.0, 0.4);
        let s = solve_linear(&m, &mats, &lc, &SolverOptions::default()).map_err(|e| e.to_string())?;
        for e in &s.element_strain {
            for k in 0..6 {
                patch_err = patch_err.max((e[k] - want[k]).abs());
            }
        }
    }
    ensure(patch_err < PATCH_TOL, format!("patch strain error {patch_err:e}"))?;

    // Linear uniaxial column: 10×10×10 mm, E = 1000 MPa, 1000 N.
    let mut reaction_err: f64 = 0.0;
    for kind in kinds {
        let m = box_mesh(kind, [2, 2, 2], 5.0);
        let mats = MaterialMap::uniform(ModelVariant::Ensam, m.elements.len(), 1000.0, 0.3);
        let lc = roller_column(&m, ModelVariant::Ensam, MasterDof::Loaded(-1000.0));
        let s = solve_linear(&m, &mats, &lc, &SolverOptions::default()).map_err(|e| e.to_string())?;
        reaction_err = reaction_err.max((s.reaction[2] - 1000.0).abs() / 1000.0);
        // Tip displacement of the analytic solution: F L / (E A).
        reaction_err = reaction_err.max((s.master[0][2] + 0.1).abs() / 0.1);
        worst_eq = worst_eq.max(s.equilibrium_error());
    }
    ensure(reaction_err < LINEAR_REACTION_TOL, format!("linear column relative error {reaction_err:e}"))?;

    // Plastic column: plateau E · 0.007 · A with 20 increments.
    let mut plateau_err: f64 = 0.0;
    for kind in kinds {
        let m = box_mesh(kind, [2, 2, 4], 5.0);
        let mats = MaterialMap::uniform(ModelVariant::Lyon, m.elements.len(), 1000.0, 0.3);
        let lc = roller_column(&m, ModelVariant::Lyon, MasterDof::Imposed(0.0));
        let opts = PlasticOptions { increments: 20, target_overall_strain: 0.019, ..PlasticOptions::default() };
        let s = solve_plastic(&m, &mats, &lc, &opts).map_err(|e| e.to_string())?;
        let f = s.curve.last().ok_or("empty curve")?.1;
        plateau_err = plateau_err.max((f - 700.0).abs() / 700.0);
        worst_eq = worst_eq.max(s.equilibrium_error);
    }
    ensure(plateau_err <= PLATEAU_TOL, format!("plateau relative error {plateau_err:e}"))?;

    // Six rigid-body modes per element.
    let mut zero_counts = Vec::new();
    for kind in kinds {
        let c = unit_element(kind);
        let n = 3 * c.len();
        let k = element_stiffness(kind, &c, 1000.0, 0.3).map_err(|e| e.to_string())?;
        let ev = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &k)).eigenvalues;
        let max = ev.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        zero_counts.push(ev.iter().filter(|v| v.abs() <= ZERO_EIG_REL * max).count());
    }
    ensure(zero_counts == [6, 6], format!("near-zero eigenvalue counts {zero_counts:?}"))?;
    ensure(worst_eq < EQUILIBRIUM_TOL, format!("equilibrium residual {worst_eq:e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < FEM_RUNTIME_S, format!("runtime {secs:.1} s"))?;
    Ok(format!(
        "patch {patch_err:.1e}, linear {reaction_err:.1e}, plateau {:.3} %, zero modes {zero_counts:?}, equilibrium {worst_eq:.1e}, {secs:.1} s",
        100.0 * plateau_err
    ))
}

/// Largest connected super-threshold volume, by flood fill.
fn largest_volume(active: &[bool], vols: &[f64], nbrs: &[Vec<usize>]) -> f64 {
    let mut seen = vec![false; active.len()];
    let mut best: f64 = 0.0;
    for s in 0..active.len() {
        if !active[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        let (mut stack, mut v) = (vec![s], 0.0);
        while let Some(e) = stack.pop() {
            v += vols[e];
            for &n in &nbrs[e] {
                if active[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        best = best.max(v);
    }
    best
}

/// Bisection over distinct strain levels, then index-ordered activation at
/// the critical level.
fn oracle_trigger(vols: &[f64], strains: &[f64], adj: &[(usize, usize)], v_crit: f64) -> Option<usize> {
    let n = vols.len();
    let mut nbrs = vec![Vec::new(); n];
    for &(a, b) in adj {
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    let mut levels: Vec<f64> = strains.iter().copied().filter(|&s| s > 0.0).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let reaches = |t: f64| {
        let active: Vec<bool> = strains.iter().map(|&s| s > 0.0 && s >= t).collect();
        largest_volume(&active, vols, &nbrs) >= v_crit
    };
    if levels.is_empty() || !reaches(*levels.last().unwrap()) {
        return None;
    }
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if reaches(levels[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let t = levels[lo];
    let mut active: Vec<bool> = strains.iter().map(|&s| s > t).collect();
    for e in 0..n {
        if strains[e] == t {
            active[e] = true;
            if largest_volume(&active, vols, &nbrs) >= v_crit {
                return Some(e);
            }
        }
    }
    None
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut triggered = 0;
    for case in 0..ORACLE_FIXTURES {
        let n = rng.random_range(1..=200);
        let vols: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..20.0)).collect();
        let strains: Vec<f64> =
            (0..n).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(1..=12) as f64 * 1e-3 }).collect();
        let mut adj = Vec::new();
        for a in 0..n {
            for _ in 0..rng.random_range(0..4) {
                let b = rng.random_range(0..n);
                if a != b {
                    adj.push((a.min(b), a.max(b)));
                }
            }
        }
        adj.sort_unstable();
        adj.dedup();
        let v_crit = rng.random_range(0.01..0.6) * vols.iter().sum::<f64>();
        let fast = strained_volume_sweep(&vols, &strains, &adj, v_crit).ok().map(|r| r.trigger);
        let slow = oracle_trigger(&vols, &strains, &adj, v_crit);
        ensure(fast == slow, format!("fixture {case}: sweep {fast:?}, oracle {slow:?}"))?;
        triggered += fast.is_some() as usize;
    }

    let mesh = box_mesh(ElementKind::Hex8, [4, 4, 6], 2.0);
    let base: Vec<f64> = (0..mesh.elements.len()).map(|_| rng.random_range(1e-4..5e-3)).collect();
    let f0 = 1000.0;
    let reference = ensam_failure_load(&mesh, &base, f0, 0.015, 100.0).map_err(|e| e.to_string())?.failure_load;
    let mut worst: f64 = 0.0;
    for f in [1.0, 37.5, 2500.0, 1e6] {
        let scaled: Vec<f64> = base.iter().map(|s| s * f / f0).collect();
        let load = ensam_failure_load(&mesh, &scaled, f, 0.015, 100.0).map_err(|e| e.to_string())?.failure_load;
        worst = worst.max((load - reference).abs() / reference);
    }
    ensure(worst <= F0_INVARIANCE_TOL, format!("F0 invariance {worst:e}"))?;
    Ok(format!("{ORACLE_FIXTURES} fixtures agree ({triggered} triggered); F0 invariance {worst:.1e}"))
}

/// Column phantom written as a grey vgrid plus its truth record.
fn write_column(dir: &Path, name: &str, size: [f64; 3], voxel: f64) -> Result<(), String> {
    let density = (1000.0 - MODULUS_INTERCEPT) / MODULUS_SLOPE;
    let spec = PhantomSpec::column(size, density, voxel);
    let spec_path = dir.join(format!("{name}.spec.json"));
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).map_err(|e| e.to_string())?;
    commands::phantom(&spec_path, &dir.join(format!("{name}.vgrid")), Some(&dir.join(format!("{name}.truth.json"))))
        .map_err(|e| e.to_string())?;
    Ok(())
}

fn cli_pipeline(dir: &Path, name: &str, out: &str, extra: &[&str]) -> Result<serde_json::Value, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_vertfe"))
        .args(["pipeline", &format!("{name}.vgrid"), "--calibration-from", &format!("{name}.truth.json")])
        .args(["--load-point", "centroid", "--out", out])
        .args(extra)
        .env("VERTFE_THREADS", "1")
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), String::from_utf8_lossy(&o.stderr).into_owned())?;
    let bytes = fs::read(dir.join(out)).map_err(|e| e.to_string())?;
    serde_json::from_slice(&bytes).map_err(|e| e.to_string())
}

fn criterion_7(dir: &Path) -> Check {
    let d = dir.join("c7");
    fs::create_dir_all(&d).map_err(|e| e.to_string())?;
    write_column(&d, "ensam", [10.0, 10.0, 40.0], 1.0)?;
    let h = LYON_SPACING;
    write_column(&d, "lyon", [4.0 * h, 4.0 * h, 16.0 * h], h)?;

    let a = cli_pipeline(&d, "ensam", "a.json", &[])?;
    cli_pipeline(&d, "ensam", "b.json", &[])?;
    let same = fs::read(d.join("a.json")).ok() == fs::read(d.join("b.json")).ok();
    ensure(same, "Ensam pipeline JSON differs between runs".into())?;

    // Uniaxial strain whose von Mises equivalent reaches 1.5 % (ν = 0.4).
    let ensam_expected = 0.015 * 1000.0 * 100.0 / (2.0 / 3.0 * 1.4);
    let ensam = a["failure_load_N"].as_f64().ok_or("no failure load")?;
    let ensam_rel = (ensam - ensam_expected).abs() / ensam_expected;

    let l = cli_pipeline(&d, "lyon", "lyon.json", &["--model", "lyon"])?;
    let lyon_expected = 1000.0 * 0.007 * 16.0 * h * h;
    let lyon = l["failure_load_N"].as_f64().ok_or("no failure load")?;
    let lyon_rel = (lyon - lyon_expected).abs() / lyon_expected;
    let detail = format!(
        "byte-identical JSON; Ensam {ensam:.1} N vs {ensam_expected:.1} N ({:.2} %), Lyon {lyon:.2} N vs {lyon_expected:.2} N ({:.2} %)",
        100.0 * ensam_rel,
        100.0 * lyon_rel
    );
    ensure(ensam_rel < ANALYTIC_TOL && lyon_rel < ANALYTIC_TOL, detail.clone())?;
    Ok(detail)
}

fn corner_key(mesh: &Mesh, e: usize, face: &[usize]) -> Vec<usize> {
    let mut k: Vec<usize> = face.iter().map(|&l| mesh.elements[e].nodes[l]).collect();
    k.sort_unstable();
    k
}

fn polygon_area(p: &[[f64; 3]]) -> f64 {
    // Fan triangulation; faces here are planar and convex.
    let mut s = [0.0; 3];
    for i in 1..p.len() - 1 {
        let a: [f64; 3] = std::array::from_fn(|k| p[i][k] - p[0][k]);
        let b: [f64; 3] = std::array::from_fn(|k| p[i + 1][k] - p[0][k]);
        s[0] += a[1] * b[2] - a[2] * b[1];
        s[1] += a[2] * b[0] - a[0] * b[2];
        s[2] += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt()
}

fn exposed_area(mask: &VoxelMask) -> f64 {
    let d = mask.dims();
    let h = mask.geometry().spacing;
    let area = [h[1] * h[2], h[0] * h[2], h[0] * h[1]];
    let on = |c: [i64; 3]| {
        (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < d[a]) && mask.get(c[0] as usize, c[1] as usize, c[2] as usize)
    };
    let mut total = 0.0;
    for k in 0..d[2] as i64 {
        for j in 0..d[1] as i64 {
            for i in 0..d[0] as i64 {
                if !on([i, j, k]) {
                    continue;
                }
                for ax in 0..3 {
                    for s in [-1, 1] {
                        let mut n = [i, j, k];
                        n[ax] += s;
                        if !on(n) {
                            total += area[ax];
                        }
                    }
                }
            }
        }
    }
    total
}

/// Volume and face-sharing check for one mesh; returns the interior face count.
fn conformity(mesh: &Mesh, mask: &VoxelMask) -> Result<usize, String> {
    let expected = mask.count() as f64 * mask.geometry().voxel_volume();
    let vol = mesh.bone_volume();
    ensure((vol - expected).abs() <= VOLUME_TOL * expected, format!("volume {vol} vs {expected}"))?;
    // Sorted corner ids -> (owner count, corners in the element's cyclic order).
    let mut owners: BTreeMap<Vec<usize>, (usize, Vec<usize>)> = BTreeMap::new();
    for (e, el) in mesh.elements.iter().enumerate() {
        for face in el.kind.faces() {
            let cyclic: Vec<usize> = face.iter().map(|&l| el.nodes[l]).collect();
            owners.entry(corner_key(mesh, e, face)).or_insert((0, cyclic)).0 += 1;
        }
    }
    let mut boundary = 0.0;
    let mut interior = 0;
    for (key, (count, cyclic)) in &owners {
        ensure(*count <= 2, format!("face {key:?} shared by {count} elements"))?;
        if *count == 2 {
            interior += 1;
        } else {
            let pts: Vec<[f64; 3]> = cyclic.iter().map(|&n| mesh.nodes[n]).collect();
            boundary += polygon_area(&pts);
        }
    }
    let want = exposed_area(mask);
    ensure((boundary - want).abs() <= 1e-9 * want, format!("unshared face area {boundary} vs exposed {want}"))?;
    Ok(interior)
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut meshes = 0;
    let mut interior = 0;
    for _ in 0..40 {
        let dims = [rng.random_range(1..=5), rng.random_range(1..=5), rng.random_range(1..=5)];
        let h = [rng.random_range(0.5..1.5), rng.random_range(0.5..1.5), rng.random_range(0.5..1.5)];
        let fill = rng.random_range(0.3..0.9);
        let bits: Vec<bool> = (0..dims.iter().product::<usize>()).map(|_| rng.random_bool(fill)).collect();
        if !bits.iter().any(|&b| b) {
            continue;
        }
        let mask = VoxelMask::new(GridGeometry::new(dims, h, [0.3, -0.2, 1.0]).unwrap(), bits).unwrap();
        let grid = density_for(&mask);
        for mesh in [hex_mesh_from_mask(&grid, &mask), tet_mesh_from_mask(&grid, &mask)] {
            let mesh = mesh.map_err(|e| e.to_string())?;
            interior += conformity(&mesh, &mask)?;
            meshes += 1;
        }
    }
    Ok(format!("{meshes} hex/tet meshes: volume within {VOLUME_TOL:e}, {interior} interior faces each shared by exactly 2 elements"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path();
    let criteria: [Criterion; 8] = [
        ("agreement report reproduction", Box::new(|| criterion_1(dir))),
        ("intra-operator reproducibility", Box::new(|| criterion_2(dir))),
        ("cross-model correlation", Box::new(|| criterion_3(dir))),
        ("study table column summary", Box::new(|| criterion_4(dir))),
        ("FEM verification", Box::new(criterion_5)),
        ("failure-criterion oracles", Box::new(criterion_6)),
        ("end-to-end determinism and analytic columns", Box::new(|| criterion_7(dir))),
        ("mesh conformity and volume", Box::new(criterion_8)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = f();
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {}: {name} [{secs:.2} s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {name} [{secs:.2} s] {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
