//! CSV readers and writers for trajectories, events, fields and energy series.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kinetic::{EnergyReport, PseudoInverseField};
use crate::model::Ensemble;
use crate::sim::{Event, Trajectory};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `t,id,x,v` or `t,id,x,omega`, one row per particle per recorded time.
pub fn write_trajectory<E: Ensemble>(path: &Path, traj: &Trajectory<E>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "id", "x", E::SECOND_COLUMN])?;
    for (t, s) in traj.iter() {
        for (id, (x, y)) in s.positions().iter().zip(s.second()).enumerate() {
            w.write_record([t.to_string(), id.to_string(), x.to_string(), y.to_string()])?;
        }
    }
    finish(w, path)
}

/// `t,kind`.
pub fn write_events(path: &Path, events: &[Event]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "kind"])?;
    for e in events {
        w.write_record([e.time.to_string(), e.kind.as_str().to_string()])?;
    }
    finish(w, path)
}

/// `omega_index,omega,weight,level,chi`.
pub fn write_field(path: &Path, field: &PseudoInverseField) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["omega_index", "omega", "weight", "level", "chi"])?;
    for l in field.levels() {
        w.write_record([
            l.node.to_string(),
            l.omega.to_string(),
            field.omega_weights()[l.node].to_string(),
            l.level.to_string(),
            l.chi.to_string(),
        ])?;
    }
    finish(w, path)
}

/// `t,E,D,F`.
pub fn write_energy(path: &Path, reports: &[EnergyReport]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "E", "D", "F"])?;
    for r in reports {
        w.write_record([
            r.time.to_string(),
            r.kinetic_energy_e.to_string(),
            r.dissipation_d.to_string(),
            r.free_energy_f.to_string(),
        ])?;
    }
    finish(w, path)
}

/// Reads the `x` column and the named second column of a headed CSV file.
pub fn read_columns(path: &Path, second: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = r.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidParameter(format!("{}: missing column `{name}`", path.display()))
        })
    };
    let (ix, iy) = (find("x")?, find(second)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "{}: bad number on data row {}",
                        path.display(),
                        row + 1
                    ))
                })
        };
        xs.push(parse(ix)?);
        ys.push(parse(iy)?);
    }
    Ok((xs, ys))
}

/// Writes `text` to `path`, mapping failures to [`Error::Io`].
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
