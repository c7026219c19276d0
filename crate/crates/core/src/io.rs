//! CSV and JSON artifact formats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::CubeDiagnostic;
use crate::error::{Error, Result};
use crate::geometry::CoefficientTable;
use crate::lattice::Lattice;
use crate::measure::{DiscreteMeasure, GraphFrame};
use crate::operators::FamilyEvaluation;
use crate::variation::VariationResult;

/// Sidecar of a measure CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSidecar {
    pub n: usize,
    pub d: usize,
    pub label: String,
    /// Row-major graph frame rotation, present for graph measures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<f64>>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Cube key joined by `_`.
pub fn fmt_key(key: &[i64]) -> String {
    key.iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join("_")
}

/// Path of the JSON sidecar of a measure CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

/// Writes `x1,...,xd,weight` rows and the sidecar next to `path`.
pub fn write_measure(path: &Path, mu: &DiscreteMeasure) -> Result<()> {
    let d = mu.ambient_dim();
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    for i in 0..mu.len() {
        let mut row: Vec<String> = mu.point(i).iter().map(|&c| fmt_f64(c)).collect();
        row.push(fmt_f64(mu.weight(i)));
        w.write_record(&row)?;
    }
    w.flush()?;
    let sidecar = MeasureSidecar {
        n: mu.target_dim(),
        d,
        label: mu.label().to_string(),
        frame: mu.frame().map(|f| f.rotation().to_vec()),
    };
    write_json(&sidecar_path(path), &sidecar)
}

/// Reads a measure CSV together with its sidecar.
pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let sidecar_file = sidecar_path(path);
    let sidecar: MeasureSidecar = read_json(&sidecar_file)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", sidecar_file.display())))?;
    let d = sidecar.d;
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut expected: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
    expected.push("weight".into());
    if headers
        .iter()
        .map(str::trim)
        .ne(expected.iter().map(String::as_str))
    {
        return Err(Error::InvalidArgument(format!(
            "{}: header must be {}",
            path.display(),
            expected.join(",")
        )));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let values: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| {
                Error::InvalidArgument(format!("{} row {}: {e}", path.display(), line + 1))
            })?;
        coords.extend_from_slice(&values[..d]);
        weights.push(values[d]);
    }
    let mu = DiscreteMeasure::new(sidecar.n, d, coords, weights, sidecar.label)?;
    match sidecar.frame {
        Some(rotation) => mu.with_frame(GraphFrame::from_rotation(d, rotation)?),
        None => Ok(mu),
    }
}

#[derive(Serialize)]
struct CubeLine<'a> {
    j: i32,
    key: &'a [i64],
    parent_key: Option<&'a [i64]>,
    member_count: usize,
    mass: f64,
    center: usize,
    ell: f64,
}

/// One JSON object per cube, in lattice order.
pub fn write_lattice(path: &Path, lattice: &Lattice) -> Result<()> {
    let mut out = create(path)?;
    for cube in lattice.cubes() {
        let line = CubeLine {
            j: cube.generation,
            key: &cube.key,
            parent_key: cube.parent.map(|p| lattice.cube(p).key.as_slice()),
            member_count: cube.members.len(),
            mass: cube.mass,
            center: cube.center,
            ell: cube.ell(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// `cube_key, j, ell, beta1, beta2, beta_inf, alpha, plane_base..., plane_dirs...`; the α column is
/// empty when α was not computed.
pub fn write_coefficients(path: &Path, table: &CoefficientTable, d: usize, n: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = [
        "cube_key", "j", "ell", "beta1", "beta2", "beta_inf", "alpha",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=d).map(|a| format!("plane_base{a}")));
    for v in 1..=n {
        header.extend((1..=d).map(|a| format!("plane_dir{v}_{a}")));
    }
    w.write_record(&header)?;
    for entry in table.iter() {
        let mut row = vec![
            fmt_key(&entry.key),
            entry.generation.to_string(),
            fmt_f64(entry.ell),
            fmt_f64(entry.beta1),
            fmt_f64(entry.beta2),
            fmt_f64(entry.beta_inf),
            fmt_opt(entry.alpha),
        ];
        row.extend(entry.plane.base().iter().map(|&c| fmt_f64(c)));
        for dir in entry.plane.basis() {
            row.extend(dir.iter().map(|&c| fmt_f64(c)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FamilyMetadata<'a> {
    kernel: &'a str,
    profile: &'static str,
    grid_policy: crate::operators::GridPolicy,
    arity: usize,
    points: usize,
}

/// `point_index, scale, value...` rows plus metadata JSON.
pub fn write_family(csv_path: &Path, meta_path: &Path, family: &FamilyEvaluation) -> Result<()> {
    let mut w = csv_writer(csv_path)?;
    let mut header = vec!["point_index".to_string(), "scale".to_string()];
    header.extend((1..=family.arity).map(|a| format!("value{a}")));
    w.write_record(&header)?;
    for (i, row) in family.rows.iter().enumerate() {
        for (s, scale) in row.scales.iter().enumerate() {
            let mut record = vec![i.to_string(), fmt_f64(*scale)];
            record.extend(
                row.values[s * family.arity..(s + 1) * family.arity]
                    .iter()
                    .map(|&v| fmt_f64(v)),
            );
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    write_json(
        meta_path,
        &FamilyMetadata {
            kernel: &family.kernel.name,
            profile: family.profile.name(),
            grid_policy: family.policy,
            arity: family.arity,
            points: family.rows.len(),
        },
    )
}

/// `point_index, V, mode, rho, witness_len`; `witness_len` is empty for modes without a witness.
pub fn write_variation(path: &Path, result: &VariationResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["point_index", "V", "mode", "rho", "witness_len"])?;
    for (i, (v, witness)) in result.values.iter().zip(&result.witnesses).enumerate() {
        w.write_record([
            i.to_string(),
            fmt_f64(*v),
            result.mode.name().to_string(),
            fmt_f64(result.rho),
            witness
                .as_ref()
                .map(|w| w.len().to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-cube detector rows.
pub fn write_detector_cubes(path: &Path, cubes: &[CubeDiagnostic]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "cube_key",
        "j",
        "mass",
        "beta1",
        "min_sm",
        "in_b",
        "in_b_tilde",
    ])?;
    for c in cubes {
        w.write_record([
            fmt_key(&c.key),
            c.generation.to_string(),
            fmt_f64(c.mass),
            fmt_f64(c.beta1),
            fmt_opt(c.min_sm),
            c.in_b.to_string(),
            c.in_b_tilde.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated columns for gnuplot, one row per entry.
pub fn write_dat(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# {}", columns.join(" "))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()?;
    Ok(())
}
