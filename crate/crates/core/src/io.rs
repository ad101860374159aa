//! Run-log CSV, JSON reports and configuration files.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::dynamics::{PlantState, Vec3};
use crate::error::{Error, Result};
use crate::observer::EstimateState;
use crate::sim::{Event, Flag, Record, RunLog};
use crate::timing::{HybridTime, Timers};
use crate::uncertainty::UncertaintyBound;

/// Separator between flags inside the `flags` column.
pub const FLAG_SEPARATOR: char = '|';

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Column names of the run log for an `n`-dimensional run with `families`
/// barrier functions.
pub fn csv_header(n: usize, families: usize) -> Vec<String> {
    let mut cols: Vec<String> = vec!["t".into(), "j".into(), "event".into()];
    for name in ["r", "v", "r_hat", "v_hat"] {
        cols.extend((0..n).map(|i| format!("{name}_{i}")));
    }
    cols.extend(["rho_r", "rho_v", "sigma_s", "sigma_a", "sigma_m", "b"].map(String::from));
    cols.extend((0..n).map(|i| format!("u_{i}")));
    cols.extend((0..families).map(|i| format!("h_{i}")));
    cols.extend((0..families).map(|i| format!("hhat_{i}")));
    cols.push("flags".into());
    cols
}

/// Float with 17 significant digits, enough to round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(rec: &Record, n: usize) -> Vec<String> {
    let mut out = vec![
        fmt_f64(rec.time.t),
        rec.time.j.to_string(),
        rec.event.as_str().to_string(),
    ];
    for v in [
        &rec.truth.r,
        &rec.truth.v,
        &rec.est.x_hat.r,
        &rec.est.x_hat.v,
    ] {
        out.extend((0..n).map(|i| fmt_f64(v[i])));
    }
    for x in [
        rec.est.rho_hat.rho_r,
        rec.est.rho_hat.rho_v,
        rec.timers.sigma_s,
        rec.timers.sigma_a,
        rec.timers.sigma_m,
    ] {
        out.push(fmt_f64(x));
    }
    out.push(if rec.b { "1" } else { "0" }.into());
    out.extend((0..n).map(|i| fmt_f64(rec.u[i])));
    out.extend(rec.h.iter().map(|&x| fmt_f64(x)));
    out.extend(rec.h_hat.iter().map(|&x| fmt_f64(x)));
    let flags: Vec<&str> = rec.flags.iter().map(|f| f.as_str()).collect();
    out.push(flags.join(&FLAG_SEPARATOR.to_string()));
    out
}

/// Writes the log as CSV. Records without estimate bounds get `nan` in the
/// `hhat` columns.
pub fn write_run_csv<W: Write>(log: &RunLog, w: W) -> Result<()> {
    let n = log.dimension;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(csv_header(n, log.families))
        .map_err(io_err)?;
    for rec in &log.records {
        let mut rec = rec.clone();
        rec.h_hat.resize(log.families, f64::NAN);
        wr.write_record(row(&rec, n)).map_err(io_err)?;
    }
    wr.flush().map_err(io_err)
}

fn parse_f64(s: &str, col: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Io(format!("line {line}: column `{col}`: not a number: `{s}`")))
}

/// Reads a log written by [`write_run_csv`]. The dimension and the number
/// of families are inferred from the header.
pub fn read_run_csv<R: Read>(r: R) -> Result<RunLog> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd
        .headers()
        .map_err(io_err)?
        .iter()
        .map(String::from)
        .collect();
    let n = header
        .iter()
        .filter(|c| c.starts_with("r_") && !c.starts_with("r_hat"))
        .count();
    let families = header.iter().filter(|c| c.starts_with("h_")).count();
    if !(1..=3).contains(&n) || header != csv_header(n, families) {
        return Err(Error::Io("unrecognised run-log header".into()));
    }
    let mut records = Vec::new();
    for (k, item) in rd.records().enumerate() {
        let line = k + 2;
        let fields = item.map_err(io_err)?;
        let cell = |i: usize| fields.get(i).unwrap_or("");
        let num = |i: usize| parse_f64(cell(i), &header[i], line);
        let vec_at = |start: usize| -> Result<Vec3> {
            let mut v = Vec3::zeros();
            for i in 0..n {
                v[i] = num(start + i)?;
            }
            Ok(v)
        };
        let event = Event::parse(cell(2))
            .ok_or_else(|| Error::Io(format!("line {line}: unknown event `{}`", cell(2))))?;
        let j = cell(1)
            .parse()
            .map_err(|_| Error::Io(format!("line {line}: bad jump counter `{}`", cell(1))))?;
        let base = 3 + 4 * n;
        let flags_cell = cell(header.len() - 1);
        let flags = if flags_cell.is_empty() {
            Vec::new()
        } else {
            flags_cell
                .split(FLAG_SEPARATOR)
                .map(|s| {
                    Flag::parse(s)
                        .ok_or_else(|| Error::Io(format!("line {line}: unknown flag `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let hs = base + 6 + n;
        records.push(Record {
            time: HybridTime::new(num(0)?, j),
            event,
            truth: PlantState::new(vec_at(3)?, vec_at(3 + n)?),
            est: EstimateState::new(
                PlantState::new(vec_at(3 + 2 * n)?, vec_at(3 + 3 * n)?),
                UncertaintyBound::new(num(base)?, num(base + 1)?),
            ),
            timers: Timers::new(num(base + 2)?, num(base + 3)?, num(base + 4)?),
            b: match cell(base + 5) {
                "1" => true,
                "0" => false,
                s => return Err(Error::Io(format!("line {line}: bad flag b `{s}`"))),
            },
            u: vec_at(base + 6)?,
            h: (hs..hs + families).map(num).collect::<Result<_>>()?,
            h_hat: (hs + families..hs + 2 * families)
                .map(num)
                .collect::<Result<_>>()?,
            flags,
        });
    }
    Ok(RunLog {
        dimension: n,
        families,
        records,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(io_err)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_run_csv_file(path: &Path, log: &RunLog) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_run_csv(log, std::io::BufWriter::new(f))
}

pub fn read_run_csv_file(path: &Path) -> Result<RunLog> {
    let f = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_run_csv(std::io::BufReader::new(f))
}

/// Reads a scenario file. Parse errors carry the line and column.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
