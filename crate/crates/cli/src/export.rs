//! Field snapshots, monitor rows and study tables.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which reads back
//! to the identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use boussinesq_core::harness::{ManufacturedTable, StudyResult, TemporalTable};
use boussinesq_core::integrator::{FieldState, MonitorRecord};
use boussinesq_core::spaces::DiscreteSpaces;

use crate::error::CliError;

pub const FIELD_HEADER: [&str; 6] = ["x", "y", "u1", "u2", "p", "theta"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per mesh vertex, in vertex order: `x, y, u1, u2, p, theta`.
pub fn field_rows(spaces: &DiscreteSpaces, state: &FieldState) -> Vec<[f64; 6]> {
    let u = spaces.expand_velocity(&state.u);
    let theta = spaces.expand_temperature(&state.theta);
    spaces
        .mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, x)| [x[0], x[1], u[i][0], u[i][1], state.p[i], theta[i]])
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_fields_csv(path: &Path, spaces: &DiscreteSpaces, state: &FieldState) -> Result<(), CliError> {
    let rows = field_rows(spaces, state);
    write_table(path, &FIELD_HEADER, rows.iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect()))
}

pub fn read_fields_csv(path: &Path) -> Result<Vec<[f64; 6]>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let mut row = [0.0; 6];
        for (k, field) in rec.iter().enumerate().take(6) {
            row[k] = field
                .parse()
                .map_err(|_| CliError::io(path, std::io::Error::other(format!("bad number `{field}`"))))?;
        }
        out.push(row);
    }
    Ok(out)
}

/// VTK unstructured grid, ASCII, triangles with point data `velocity`,
/// `pressure`, `temperature`.
pub fn fields_vtu(spaces: &DiscreteSpaces, state: &FieldState) -> String {
    let mesh = &spaces.mesh;
    let rows = field_rows(spaces, state);
    let (np, nc) = (mesh.n_vertices(), mesh.n_triangles());
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0"?>"#);
    let _ = writeln!(s, r#"<VTKFile type="UnstructuredGrid" version="0.1" byte_order="LittleEndian">"#);
    let _ = writeln!(s, "  <UnstructuredGrid>");
    let _ = writeln!(s, r#"    <Piece NumberOfPoints="{np}" NumberOfCells="{nc}">"#);
    let _ = writeln!(s, r#"      <PointData Vectors="velocity" Scalars="temperature">"#);
    let mut array = |name: &str, comps: usize, vals: &mut dyn Iterator<Item = String>| {
        let _ = writeln!(
            s,
            r#"        <DataArray type="Float64" Name="{name}" NumberOfComponents="{comps}" format="ascii">"#
        );
        for v in vals {
            let _ = writeln!(s, "          {v}");
        }
        let _ = writeln!(s, "        </DataArray>");
    };
    array(
        "velocity",
        3,
        &mut rows.iter().map(|r| format!("{} {} 0", fmt_f64(r[2]), fmt_f64(r[3]))),
    );
    array("pressure", 1, &mut rows.iter().map(|r| fmt_f64(r[4])));
    array("temperature", 1, &mut rows.iter().map(|r| fmt_f64(r[5])));
    let _ = writeln!(s, "      </PointData>");
    let _ = writeln!(s, "      <Points>");
    let _ = writeln!(s, r#"        <DataArray type="Float64" NumberOfComponents="3" format="ascii">"#);
    for r in &rows {
        let _ = writeln!(s, "          {} {} 0", fmt_f64(r[0]), fmt_f64(r[1]));
    }
    let _ = writeln!(s, "        </DataArray>");
    let _ = writeln!(s, "      </Points>");
    let _ = writeln!(s, "      <Cells>");
    let _ = writeln!(s, r#"        <DataArray type="Int64" Name="connectivity" format="ascii">"#);
    for t in &mesh.triangles {
        let _ = writeln!(s, "          {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "        </DataArray>");
    let _ = writeln!(s, r#"        <DataArray type="Int64" Name="offsets" format="ascii">"#);
    for k in 1..=nc {
        let _ = writeln!(s, "          {}", 3 * k);
    }
    let _ = writeln!(s, "        </DataArray>");
    let _ = writeln!(s, r#"        <DataArray type="UInt8" Name="types" format="ascii">"#);
    for _ in 0..nc {
        let _ = writeln!(s, "          5");
    }
    let _ = writeln!(s, "        </DataArray>");
    let _ = writeln!(s, "      </Cells>");
    let _ = writeln!(s, "    </Piece>");
    let _ = writeln!(s, "  </UnstructuredGrid>");
    let _ = writeln!(s, "</VTKFile>");
    s
}

pub fn write_fields_vtu(path: &Path, spaces: &DiscreteSpaces, state: &FieldState) -> Result<(), CliError> {
    std::fs::write(path, fields_vtu(spaces, state)).map_err(|e| CliError::io(path, e))
}

pub fn write_monitors_csv(path: &Path, monitors: &[MonitorRecord]) -> Result<(), CliError> {
    write_table(path, &MonitorRecord::HEADER, monitors.iter().map(|m| m.values()))
}

pub const STUDY_HEADER: [&str; 18] = [
    "level",
    "nx",
    "dt",
    "m",
    "steps",
    "energy_total",
    "regularizer_sum",
    "xi_sum",
    "xi1_sum",
    "min_relative_slack",
    "max_picard",
    "max_divergence",
    "max_xi_growth",
    "max_xi1_growth",
    "diff_u",
    "diff_theta",
    "ratio_u",
    "ratio_theta",
];

/// One row per level; the difference columns hold the distance to the
/// previous level and are empty on the first.
pub fn write_study_csv(path: &Path, study: &StudyResult) -> Result<(), CliError> {
    let ru = StudyResult::ratios(&study.diff_u);
    let rt = StudyResult::ratios(&study.diff_theta);
    let opt = |v: &[f64], k: Option<usize>| k.and_then(|k| v.get(k)).map(|&x| fmt_f64(x)).unwrap_or_default();
    let rows = study.levels.iter().enumerate().map(|(i, l)| {
        let d = i.checked_sub(1);
        let r = i.checked_sub(2);
        vec![
            l.level.to_string(),
            l.nx.to_string(),
            fmt_f64(l.dt),
            l.m.to_string(),
            l.steps.to_string(),
            fmt_f64(l.energy_total),
            fmt_f64(l.regularizer_sum),
            fmt_f64(l.xi_sum),
            fmt_f64(l.xi1_sum),
            fmt_f64(l.min_relative_slack),
            l.max_picard.to_string(),
            fmt_f64(l.max_divergence),
            fmt_f64(l.max_xi_growth),
            fmt_f64(l.max_xi1_growth),
            opt(&study.diff_u, d),
            opt(&study.diff_theta, d),
            opt(&ru, r),
            opt(&rt, r),
        ]
    });
    write_table(path, &STUDY_HEADER, rows)
}

pub fn write_manufactured_csv(path: &Path, table: &ManufacturedTable) -> Result<(), CliError> {
    let (ou, ot) = (table.orders_u(), table.orders_theta());
    let opt = |v: &[f64], i: usize| i.checked_sub(1).and_then(|k| v.get(k)).map(|&x| fmt_f64(x)).unwrap_or_default();
    let rows = table.rows.iter().enumerate().map(|(i, r)| {
        vec![
            r.nx.to_string(),
            fmt_f64(r.dt),
            fmt_f64(r.err_u),
            fmt_f64(r.err_theta),
            fmt_f64(r.err_p),
            opt(&ou, i),
            opt(&ot, i),
        ]
    });
    write_table(path, &["nx", "dt", "err_u", "err_theta", "err_p", "order_u", "order_theta"], rows)
}

pub fn write_temporal_csv(path: &Path, table: &TemporalTable) -> Result<(), CliError> {
    let (ru, rt) = (table.ratios_u(), table.ratios_theta());
    let opt = |v: &[f64], i: usize| i.checked_sub(1).and_then(|k| v.get(k)).map(|&x| fmt_f64(x)).unwrap_or_default();
    let rows = table.rows.iter().enumerate().map(|(i, r)| {
        vec![
            table.nx.to_string(),
            fmt_f64(r.dt),
            fmt_f64(r.diff_u),
            fmt_f64(r.diff_theta),
            fmt_f64(r.err_u),
            fmt_f64(r.err_theta),
            opt(&ru, i),
            opt(&rt, i),
        ]
    });
    write_table(
        path,
        &["nx", "dt", "diff_u", "diff_theta", "err_u", "err_theta", "ratio_u", "ratio_theta"],
        rows,
    )
}
