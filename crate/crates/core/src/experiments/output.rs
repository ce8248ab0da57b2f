use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::IndicatorTable;
use crate::marking::MarkingResult;
use crate::mesh::{Mesh, MeshDump};
use crate::objective::ConductivityField;
use crate::optimizer::{IterationLog, MmStatus};

use super::afem::{Level, OutputRecord};

pub const RECORD_HEADER: &str = "iteration,dofs,elements,objective,fidelity,penalty,eta1_sq,eta2_sq,eta3_q,\
marked,max_marked_eta3,mm_iterations,mm_status,l1_error,l2_error";

fn status_name(s: MmStatus) -> &'static str {
    match s {
        MmStatus::Running => "running",
        MmStatus::Converged => "converged",
        MmStatus::Stalled => "stalled",
        MmStatus::MaxIterations => "max_iterations",
    }
}

fn parse_status(s: &str) -> Result<MmStatus> {
    Ok(match s {
        "running" => MmStatus::Running,
        "converged" => MmStatus::Converged,
        "stalled" => MmStatus::Stalled,
        "max_iterations" => MmStatus::MaxIterations,
        other => return Err(Error::Serde(format!("unknown optimizer status `{other}`"))),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn records_to_csv(records: &[OutputRecord]) -> String {
    let mut s = String::from(RECORD_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{},{},{},{}",
            r.iteration,
            r.dofs,
            r.elements,
            r.objective,
            r.fidelity,
            r.penalty,
            r.eta1_sq,
            r.eta2_sq,
            r.eta3_q,
            r.marked,
            r.max_marked_eta3,
            r.mm_iterations,
            status_name(r.mm_status),
            opt(r.l1_error),
            opt(r.l2_error)
        );
    }
    s
}

fn field<T: std::str::FromStr>(cols: &[&str], i: usize, line: usize) -> Result<T> {
    cols.get(i)
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Error::Serde(format!("records line {line}: bad column {i}")))
}

pub fn records_from_csv(text: &str) -> Result<Vec<OutputRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(RECORD_HEADER) {
        return Err(Error::Serde("records file has an unexpected header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let c: Vec<&str> = l.trim().split(',').collect();
            if c.len() != 15 {
                return Err(Error::Serde(format!("records line {}: expected 15 columns", i + 2)));
            }
            let optional = |j: usize| -> Result<Option<f64>> {
                if c[j].is_empty() {
                    Ok(None)
                } else {
                    field(&c, j, i + 2).map(Some)
                }
            };
            Ok(OutputRecord {
                iteration: field(&c, 0, i + 2)?,
                dofs: field(&c, 1, i + 2)?,
                elements: field(&c, 2, i + 2)?,
                objective: field(&c, 3, i + 2)?,
                fidelity: field(&c, 4, i + 2)?,
                penalty: field(&c, 5, i + 2)?,
                eta1_sq: field(&c, 6, i + 2)?,
                eta2_sq: field(&c, 7, i + 2)?,
                eta3_q: field(&c, 8, i + 2)?,
                marked: field(&c, 9, i + 2)?,
                max_marked_eta3: field(&c, 10, i + 2)?,
                mm_iterations: field(&c, 11, i + 2)?,
                mm_status: parse_status(c[12])?,
                l1_error: optional(13)?,
                l2_error: optional(14)?,
                wall_time: 0.0,
            })
        })
        .collect()
}

pub fn write_records(path: &Path, records: &[OutputRecord]) -> Result<()> {
    Ok(fs::write(path, records_to_csv(records))?)
}

pub fn read_records(path: &Path) -> Result<Vec<OutputRecord>> {
    records_from_csv(&fs::read_to_string(path)?)
}

pub fn write_timing(path: &Path, records: &[OutputRecord]) -> Result<()> {
    let mut s = String::from("iteration,dofs,wall_time\n");
    for r in records {
        let _ = writeln!(s, "{},{},{:.6}", r.iteration, r.dofs, r.wall_time);
    }
    Ok(fs::write(path, s)?)
}

pub fn write_optimizer_log(path: &Path, levels: &[Level]) -> Result<()> {
    let mut s = String::from("level,outer,objective,fidelity,penalty,step,pcg_iterations,pcg_residual\n");
    for (k, level) in levels.iter().enumerate() {
        for IterationLog {
            outer,
            objective,
            fidelity,
            penalty,
            step,
            pcg_iterations,
            pcg_residual,
        } in &level.history
        {
            let _ = writeln!(
                s,
                "{k},{outer},{objective:e},{fidelity:e},{penalty:e},{step:e},{pcg_iterations},{pcg_residual:e}"
            );
        }
    }
    Ok(fs::write(path, s)?)
}

pub fn write_indicators(path: &Path, table: &IndicatorTable, marking: &MarkingResult) -> Result<()> {
    let mut flags = vec![0u8; table.len()];
    for (bit, set) in [(1u8, &marking.state), (2, &marking.adjoint), (4, &marking.inequality)] {
        for &t in set {
            flags[t] |= bit;
        }
    }
    let mut s = String::from("element,eta1_sq,eta2_sq,eta3_q,marked_state,marked_adjoint,marked_inequality\n");
    for t in 0..table.len() {
        let _ = writeln!(
            s,
            "{t},{:e},{:e},{:e},{},{},{}",
            table.eta1_sq[t],
            table.eta2_sq[t],
            table.eta3_q[t],
            flags[t] & 1,
            (flags[t] >> 1) & 1,
            (flags[t] >> 2) & 1
        );
    }
    Ok(fs::write(path, s)?)
}

/// A mesh with a nodal field on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDump {
    pub mesh: MeshDump,
    pub sigma: Vec<f64>,
}

pub fn write_field(path: &Path, mesh: &Mesh, sigma: &ConductivityField) -> Result<()> {
    let dump = FieldDump {
        mesh: mesh.dump(),
        sigma: sigma.values().to_vec(),
    };
    Ok(fs::write(path, serde_json::to_string(&dump)?)?)
}

pub fn read_field(path: &Path) -> Result<(Mesh, ConductivityField)> {
    let dump: FieldDump = serde_json::from_str(&fs::read_to_string(path)?)?;
    let mesh = Mesh::from_dump(dump.mesh)?;
    if dump.sigma.len() != mesh.num_vertices() {
        return Err(Error::Serde("field length does not match the mesh".into()));
    }
    Ok((mesh, ConductivityField::from_values(dump.sigma)))
}

/// Legacy ASCII VTK unstructured grid with the conductivity as point data.
pub fn vtk_string(mesh: &Mesh, sigma: &ConductivityField) -> String {
    let mut s = String::from("# vtk DataFile Version 3.0\nconductivity\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    let ne = mesh.num_elements();
    let _ = writeln!(s, "CELLS {} {}", ne, 4 * ne);
    for e in mesh.elements() {
        let v = e.vertices;
        let _ = writeln!(s, "3 {} {} {}", v[0], v[1], v[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {}\nSCALARS sigma double 1\nLOOKUP_TABLE default", mesh.num_vertices());
    for v in sigma.values() {
        let _ = writeln!(s, "{v:e}");
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, sigma: &ConductivityField) -> Result<()> {
    Ok(fs::write(path, vtk_string(mesh, sigma))?)
}
