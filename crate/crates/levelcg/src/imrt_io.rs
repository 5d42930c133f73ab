//! IMRT instances on disk: a directory holding `manifest.json`, one dose CSV
//! per angle and `targets.csv`.
//!
//! ```text
//! manifest.json   {"format": 1, "n_voxels", "dose_unit", "phi"?, "angles": [..],
//!                  "structures": [{"name", "voxels": [..]}],
//!                  "criteria": [{"kind", "structure", "dose", "quantile", "weight"}]}
//! angle_<a>.csv   header b0..b{n-1}; one row per voxel, Gy per unit intensity
//! targets.csv     header voxel,lower,upper,lower_weight,upper_weight (Gy)
//! ```
//!
//! Each `angles` entry is `{"dose_file", "apertures": [[beamlet, ..], ..]}`.

use std::path::Path;

use levelcg_core::models::{Criterion, CriterionKind, ImrtAngle, ImrtInstance, Structure, VoxelTargets};
use levelcg_core::oracle::Rows;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const TARGETS: &str = "targets.csv";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    pub n_voxels: usize,
    pub dose_unit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    pub angles: Vec<AngleEntry>,
    pub structures: Vec<StructureEntry>,
    pub criteria: Vec<CriterionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleEntry {
    pub dose_file: String,
    pub apertures: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureEntry {
    pub name: String,
    pub voxels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindEntry {
    Underdose,
    Overdose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionEntry {
    pub kind: KindEntry,
    /// Structure name.
    pub structure: String,
    /// Threshold in Gy.
    pub dose: f64,
    pub quantile: f64,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

pub fn write_imrt_dir(inst: &ImrtInstance, phi: Option<f64>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let mut angles = Vec::with_capacity(inst.angles.len());
    for (a, ang) in inst.angles.iter().enumerate() {
        let name = format!("angle_{a}.csv");
        let path = dir.join(&name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record((0..ang.dose.dim()).map(|b| format!("b{b}")))?;
        for v in 0..ang.dose.n_rows() {
            w.write_record(ang.dose.row(v).iter().map(|d| format!("{d:?}")))?;
        }
        w.flush().map_err(|e| BenchError::io(&path, e))?;
        angles.push(AngleEntry { dose_file: name, apertures: ang.apertures.clone() });
    }
    let path = dir.join(TARGETS);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["voxel", "lower", "upper", "lower_weight", "upper_weight"])?;
    let t = &inst.targets;
    for v in 0..inst.n_voxels {
        w.write_record([
            v.to_string(),
            format!("{:?}", t.lower[v]),
            format!("{:?}", t.upper[v]),
            format!("{:?}", t.lower_weight[v]),
            format!("{:?}", t.upper_weight[v]),
        ])?;
    }
    w.flush().map_err(|e| BenchError::io(&path, e))?;
    let manifest = Manifest {
        format: FORMAT_VERSION,
        n_voxels: inst.n_voxels,
        dose_unit: inst.dose_unit,
        phi,
        angles,
        structures: inst.structures.iter().map(|s| StructureEntry { name: s.name.clone(), voxels: s.voxels.clone() }).collect(),
        criteria: inst
            .criteria
            .iter()
            .map(|c| CriterionEntry {
                kind: match c.kind {
                    CriterionKind::Underdose => KindEntry::Underdose,
                    CriterionKind::Overdose => KindEntry::Overdose,
                },
                structure: inst.structures[c.structure].name.clone(),
                dose: c.dose,
                quantile: c.quantile,
                weight: c.weight,
            })
            .collect(),
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| BenchError::io(&path, e))
}

/// Reads an instance and the manifest's optional `phi`.
pub fn load_imrt_dir(dir: impl AsRef<Path>) -> Result<(ImrtInstance, Option<f64>)> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != FORMAT_VERSION {
        return Err(BenchError::Config(format!("unsupported manifest format {}", m.format)));
    }
    let mut angles = Vec::with_capacity(m.angles.len());
    for a in &m.angles {
        let (rows, width, data) = read_matrix(&dir.join(&a.dose_file))?;
        if rows != m.n_voxels {
            return Err(BenchError::Config(format!("{}: {rows} rows, manifest says {} voxels", a.dose_file, m.n_voxels)));
        }
        angles.push(ImrtAngle { dose: Rows::new(rows, width, data)?, apertures: a.apertures.clone() });
    }
    let (rows, width, data) = read_matrix(&dir.join(TARGETS))?;
    if rows != m.n_voxels || width != 5 {
        return Err(BenchError::Config(format!("{TARGETS}: expected {} rows of 5 columns", m.n_voxels)));
    }
    let col = |c: usize| -> Vec<f64> { (0..rows).map(|v| data[v * 5 + c]).collect() };
    for (v, idx) in col(0).into_iter().enumerate() {
        if idx != v as f64 {
            return Err(BenchError::Parse { row: v as u64 + 2, col: 1, msg: "voxel column must count 0, 1, ..".into() });
        }
    }
    let targets = VoxelTargets { lower: col(1), upper: col(2), lower_weight: col(3), upper_weight: col(4) };
    let structures: Vec<Structure> =
        m.structures.iter().map(|s| Structure { name: s.name.clone(), voxels: s.voxels.clone() }).collect();
    let criteria = m
        .criteria
        .iter()
        .map(|c| {
            let structure = structures
                .iter()
                .position(|s| s.name == c.structure)
                .ok_or_else(|| BenchError::Config(format!("criterion names unknown structure `{}`", c.structure)))?;
            Ok(Criterion {
                kind: match c.kind {
                    KindEntry::Underdose => CriterionKind::Underdose,
                    KindEntry::Overdose => CriterionKind::Overdose,
                },
                structure,
                dose: c.dose,
                quantile: c.quantile,
                weight: c.weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let inst = ImrtInstance { n_voxels: m.n_voxels, angles, structures, criteria, targets, dose_unit: m.dose_unit };
    inst.validate()?;
    Ok((inst, m.phi))
}

/// Numeric CSV with a header row; returns `(rows, columns, row-major data)`.
fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let width = rdr.headers()?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line());
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| BenchError::Parse {
                row,
                col: c + 1,
                msg: format!("{}: not a finite number: `{cell}`", path.display()),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(BenchError::EmptyData);
    }
    Ok((rows, width, data))
}
