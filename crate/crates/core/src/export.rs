//! CSV and JSON writers for the files read by the plotting scripts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Grid, Side};
use crate::select::IndexSet;

pub const FIELD_HEADER: [&str; 5] = ["x1", "x2", "re_u", "im_u", "abs_u"];
pub const BAND_HEADER: [&str; 8] = ["side", "j1", "j2", "m", "mu", "P", "vg1", "vg2"];
pub const SWEEP_HEADER: [&str; 3] = ["delta", "err_R", "err_T"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub x1: f64,
    pub x2: f64,
    pub re_u: f64,
    pub im_u: f64,
    pub abs_u: f64,
}

/// One band sample or one selected mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub side: String,
    pub j1: f64,
    pub j2: f64,
    pub m: usize,
    pub mu: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub vg1: Option<f64>,
    pub vg2: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    #[serde(rename = "err_R")]
    pub err_r: f64,
    #[serde(rename = "err_T")]
    pub err_t: f64,
}

/// Per-node rows `(x1, x2, Re u, Im u, |u|)` in node order.
pub fn field_rows(grid: &Grid, nodal: &[c64]) -> Vec<FieldRow> {
    nodal
        .iter()
        .enumerate()
        .map(|(n, u)| {
            let [x1, x2] = grid.node_coords(n);
            FieldRow { x1, x2, re_u: u.re, im_u: u.im, abs_u: u.norm() }
        })
        .collect()
}

pub fn selected_rows(sets: &[&IndexSet]) -> Vec<BandRow> {
    sets.iter()
        .flat_map(|set| {
            set.entries.iter().map(move |e| BandRow {
                side: set.side.label().into(),
                j1: e.j[0],
                j2: e.j[1],
                m: e.m,
                mu: e.mu,
                p: e.poynting,
                vg1: e.group_velocity.map(|v| v[0]),
                vg2: e.group_velocity.map(|v| v[1]),
            })
        })
        .collect()
}

pub fn side_label(side: Side) -> String {
    side.label().to_string()
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field_csv(path: &Path, rows: &[FieldRow]) -> Result<()> {
    write_rows(path, &FIELD_HEADER, rows)
}

pub fn write_band_csv(path: &Path, rows: &[BandRow]) -> Result<()> {
    write_rows(path, &BAND_HEADER, rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_rows(path, &SWEEP_HEADER, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<Vec<FieldRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<FieldRow>, _>>()?;
    Ok(rows)
}
