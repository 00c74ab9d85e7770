//! Subcommand implementations, callable without the argument parser.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vertfe_core::failure::FailureResult;
use vertfe_core::phantom::{embedded_table1, gen_phantom, PhantomSpec, PhantomTruth};
use vertfe_core::pipeline::{build_model, run, Diagnostics, PipelineConfig};
use vertfe_core::segment::{close_mask, largest_component, threshold_mask, Connectivity, VoxelMask};
use vertfe_core::stats::{summarize, StudyReport, StudyTable};
use vertfe_core::voxel::{apply_calibration, calibrate_from_phantom, DensityCalibration, RoiSample};

use crate::error::{CliError, FormatError};
use crate::{mesh_text, tables, vgrid};

/// Threads for batch runs: `VERTFE_THREADS` if set, else the machine's
/// available parallelism.
pub const THREADS_ENV: &str = "VERTFE_THREADS";

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.to_path_buf(), source })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable value");
    s.push('\n');
    s
}

fn create_dir(path: &Path) -> Result<(), FormatError> {
    fs::create_dir_all(path).map_err(|e| FormatError::io(path, e))
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, CliError> {
    let cfg: PipelineConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

/// SHA-256 of the configuration's JSON serialisation, hex encoded.
pub fn config_hash(cfg: &PipelineConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("serialisable config");
    hex::encode(Sha256::digest(bytes))
}

/// Calibration inserts from either a phantom truth record or a bare list.
pub fn load_samples(path: &Path) -> Result<Vec<RoiSample>, CliError> {
    let value: serde_json::Value = read_json(path)?;
    let parsed = if value.is_array() {
        serde_json::from_value::<Vec<RoiSample>>(value)
    } else {
        serde_json::from_value::<PhantomTruth>(value).map(|t| t.inserts)
    };
    parsed.map_err(|source| FormatError::Json { path: path.to_path_buf(), source }.into())
}

pub fn phantom(spec: &Path, out: &Path, truth_out: Option<&Path>) -> Result<PhantomTruth, CliError> {
    let spec: PhantomSpec = read_json(spec)?;
    let p = gen_phantom(&spec)?;
    vgrid::save_grid(out, &p.grey)?;
    if let Some(t) = truth_out {
        write_text(t, &to_json(&p.truth))?;
    }
    Ok(p.truth)
}

pub fn calibrate(
    input: &Path,
    samples: &Path,
    out: &Path,
    calibration_out: Option<&Path>,
) -> Result<DensityCalibration, CliError> {
    let grey = vgrid::load_grid(input)?;
    let samples = load_samples(samples)?;
    let cal = calibrate_from_phantom(&grey, &samples)?;
    vgrid::save_grid(out, &apply_calibration(&grey, &cal)?)?;
    if let Some(p) = calibration_out {
        write_text(p, &to_json(&cal))?;
    }
    Ok(cal)
}

pub fn segment(
    input: &Path,
    out: &Path,
    threshold: f64,
    connectivity: Connectivity,
    close_radius: usize,
) -> Result<VoxelMask, CliError> {
    let density = vgrid::load_grid(input)?;
    let mask = threshold_mask(&density, threshold)?;
    let mask = largest_component(&mask, connectivity)?;
    let mask = close_mask(&mask, close_radius);
    vgrid::save_mask(out, &mask)?;
    Ok(mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub nodes: usize,
    pub elements: usize,
    pub bone_volume_mm3: f64,
    pub load_point: [f64; 3],
}

pub fn mesh(
    input: &Path,
    cfg: &PipelineConfig,
    out: &Path,
    materials_out: Option<&Path>,
) -> Result<MeshSummary, CliError> {
    let grid = vgrid::load_grid(input)?;
    let model = build_model(&grid, cfg)?;
    write_text(out, &mesh_text::to_text(&model.mesh))?;
    if let Some(p) = materials_out {
        write_text(p, &tables::materials_csv(&model.mesh, &model.materials))?;
    }
    Ok(MeshSummary {
        nodes: model.mesh.nodes.len(),
        elements: model.mesh.elements.len(),
        bone_volume_mm3: model.mesh.bone_volume(),
        load_point: model.load_point,
    })
}

/// One specimen's result as written by the pipeline command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRecord {
    pub model: String,
    pub specimen: String,
    pub config_hash: String,
    #[serde(rename = "failure_load_N")]
    pub failure_load_n: f64,
    pub failure: FailureResult,
    pub diagnostics: Diagnostics,
}

impl PipelineRecord {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

pub fn specimen_name(input: &Path) -> String {
    input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "specimen".into())
}

/// Runs one specimen. With `dump_dir`, also writes the mesh, materials,
/// solution record and displacements there.
pub fn pipeline(input: &Path, cfg: &PipelineConfig, dump_dir: Option<&Path>) -> Result<PipelineRecord, CliError> {
    let grid = vgrid::load_grid(input)?;
    let out = run(&grid, cfg)?;
    let specimen = specimen_name(input);
    if let Some(dir) = dump_dir {
        create_dir(dir)?;
        write_text(&dir.join(format!("{specimen}.mesh.txt")), &mesh_text::to_text(&out.mesh))?;
        write_text(&dir.join(format!("{specimen}.materials.csv")), &tables::materials_csv(&out.mesh, &out.materials))?;
        write_text(&dir.join(format!("{specimen}.displacement.csv")), &tables::displacement_csv(&out.displacement))?;
        let sol = tables::SolutionRecord {
            model: cfg.model.name().into(),
            specimen: specimen.clone(),
            ndof: out.diagnostics.reduced_dofs,
            iterations: out.diagnostics.solver_iterations,
            reaction_n: out.reaction,
            max_eq_strain: out.max_eq_strain,
        };
        write_text(&dir.join(format!("{specimen}.solution.json")), &to_json(&sol))?;
    }
    Ok(PipelineRecord {
        model: cfg.model.name().into(),
        specimen,
        config_hash: config_hash(cfg),
        failure_load_n: out.failure.failure_load,
        failure: out.failure,
        diagnostics: out.diagnostics,
    })
}

pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Outcome of one specimen in a batch: the written result file or the error.
pub type BatchItem = (PathBuf, Result<PathBuf, CliError>);

/// Runs every input on up to `threads` workers. Each specimen writes
/// `<out_dir>/<specimen>.json`, or `<specimen>.error.json` on failure.
/// Results come back in input order.
pub fn batch(
    inputs: &[PathBuf],
    cfg: &PipelineConfig,
    out_dir: &Path,
    dump: bool,
    threads: usize,
) -> Result<Vec<BatchItem>, CliError> {
    create_dir(out_dir)?;
    let mut names: Vec<String> = inputs.iter().map(|p| specimen_name(p)).collect();
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != names.len() {
        // Disambiguate clashing stems by position.
        names = names.iter().enumerate().map(|(i, n)| format!("{i:03}_{n}")).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PathBuf, CliError>>>> = Mutex::new(vec![None; inputs.len()]);
    let workers = threads.clamp(1, inputs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= inputs.len() {
                    break;
                }
                let outcome = run_one(&inputs[i], &names[i], cfg, out_dir, dump);
                results.lock().expect("result lock")[i] = Some(outcome);
            });
        }
    });
    let results = results.into_inner().expect("result lock");
    Ok(inputs.iter().cloned().zip(results.into_iter().map(|r| r.expect("every input processed"))).collect())
}

fn run_one(input: &Path, name: &str, cfg: &PipelineConfig, out_dir: &Path, dump: bool) -> Result<PathBuf, CliError> {
    let dump_dir = dump.then(|| out_dir.join(format!("{name}.dump")));
    match pipeline(input, cfg, dump_dir.as_deref()) {
        Ok(mut rec) => {
            rec.specimen = name.to_string();
            let path = out_dir.join(format!("{name}.json"));
            write_text(&path, &rec.to_json())?;
            Ok(path)
        }
        Err(e) => {
            let _ = write_text(&out_dir.join(format!("{name}.error.json")), &e.to_json());
            Err(e)
        }
    }
}

/// Files written by [`stats`].
pub const AGREEMENT_CSV: &str = "agreement.csv";
pub const AGREEMENT_JSON: &str = "agreement.json";
pub const COLUMNS_CSV: &str = "columns.csv";
pub const INTRA_CSV: &str = "intra_operator.csv";

/// Agreement report for a study table (the embedded one when `table` is
/// `None`), written into `out_dir`.
pub fn stats(table: Option<&Path>, out_dir: &Path) -> Result<StudyReport, CliError> {
    let table = match table {
        Some(p) => StudyTable::from_csv(&read_text(p)?)?,
        None => embedded_table1(),
    };
    let report = summarize(&table)?;
    create_dir(out_dir)?;
    write_text(&out_dir.join(AGREEMENT_CSV), &tables::report_csv(&report))?;
    write_text(&out_dir.join(AGREEMENT_JSON), &to_json(&report))?;
    write_text(&out_dir.join(COLUMNS_CSV), &tables::columns_csv(&report))?;
    write_text(&out_dir.join(INTRA_CSV), &tables::intra_operator_csv(&table, &report))?;
    for &key in tables::all_columns() {
        write_text(&out_dir.join(tables::bland_altman_file(key)), &tables::bland_altman_csv(&table, key)?)?;
    }
    Ok(report)
}
