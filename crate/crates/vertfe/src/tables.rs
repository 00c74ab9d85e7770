//! CSV and JSON outputs: materials, solutions, displacements and the
//! agreement report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use vertfe_core::material::MaterialMap;
use vertfe_core::mesh::{ElementTag, Mesh};
use vertfe_core::stats::{bland_altman, CellKey, StatsError, StudyReport, StudyTable, STUDY_COLUMNS};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `element_id,tag,bmd,E_raw,E_binned,nu`; PMMA rows leave `bmd` empty.
pub fn materials_csv(mesh: &Mesh, mats: &MaterialMap) -> String {
    let mut s = String::from("element_id,tag,bmd,E_raw,E_binned,nu\n");
    for (i, el) in mesh.elements.iter().enumerate() {
        let tag = match el.tag {
            ElementTag::Bone => "bone",
            ElementTag::Pmma => "pmma",
        };
        let bmd = Some(mats.bmd[i]).filter(|v| v.is_finite());
        let _ = writeln!(s, "{i},{tag},{},{},{},{}", opt(bmd), mats.e_raw[i], mats.e[i], mats.nu[i]);
    }
    s
}

/// `node_id,ux,uy,uz` in mm.
pub fn displacement_csv(u: &[[f64; 3]]) -> String {
    let mut s = String::from("node_id,ux,uy,uz\n");
    for (i, d) in u.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{}", d[0], d[1], d[2]);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub model: String,
    pub specimen: String,
    pub ndof: usize,
    pub iterations: usize,
    #[serde(rename = "reaction_N")]
    pub reaction_n: f64,
    pub max_eq_strain: Option<f64>,
}

/// Agreement report: one row per comparison.
pub fn report_csv(report: &StudyReport) -> String {
    let mut s = String::from("label,kind,order,mean_N,abs_mean_N,sd_N,r_squared,note\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{:?},{},{},{},{},{},{}",
            r.label,
            r.kind,
            r.order,
            r.mean,
            r.abs_mean,
            opt(r.sd),
            opt(r.r_squared),
            r.note.as_deref().unwrap_or("")
        );
    }
    s
}

/// Column means and SDs of the input table.
pub fn columns_csv(report: &StudyReport) -> String {
    let mut s = String::from("column,mean_N,sd_N\n");
    for c in &report.columns {
        let _ = writeln!(s, "{},{},{}", c.column, c.mean, opt(c.sd));
    }
    s
}

/// `donor,level,mean_N,difference_N` against the experimental load, with
/// bias and limits of agreement in a trailing comment block.
pub fn bland_altman_csv(table: &StudyTable, key: CellKey) -> Result<String, StatsError> {
    let x = table.column(key)?;
    let exp = table.experimental();
    let ba = bland_altman(&x, &exp)?;
    let mut s = String::from("donor,level,mean_N,difference_N\n");
    for (r, (m, d)) in table.records.iter().zip(&ba.points) {
        let _ = writeln!(s, "{},{},{m},{d}", r.donor, r.level);
    }
    let _ = writeln!(s, "# bias,{}", ba.bias);
    let _ = writeln!(s, "# lower,{}", ba.lower);
    let _ = writeln!(s, "# upper,{}", ba.upper);
    Ok(s)
}

/// Per-specimen relative trial differences in percent.
pub fn intra_operator_csv(table: &StudyTable, report: &StudyReport) -> String {
    let mut s = String::from("donor,level,ensam_op1_percent,lyon_op3_percent\n");
    let e = report.ensam_intra_percent.as_ref().map(|i| &i.per_specimen);
    let l = report.lyon_intra_percent.as_ref().map(|i| &i.per_specimen);
    for (i, r) in table.records.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.donor,
            r.level,
            opt(e.and_then(|v| v.get(i).copied())),
            opt(l.and_then(|v| v.get(i).copied()))
        );
    }
    s
}

/// Names of the files written by [`crate::commands::stats`].
pub fn bland_altman_file(key: CellKey) -> String {
    format!("bland_altman_{}.csv", key.column_name())
}

pub fn all_columns() -> &'static [CellKey] {
    &STUDY_COLUMNS
}
