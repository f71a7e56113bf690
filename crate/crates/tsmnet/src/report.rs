//! Evaluation report and training log CSV.
//!
//! Report columns: `model,t_obs,t_hor,ade_m,fde_m,n` with `model` the short
//! name (`p`, `pd`, `sm`, `tsm`). Floats use the shortest representation
//! that parses back to the same value, so files round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;
use tsmnet_core::eval::{EvalReport, EvalRow};
use tsmnet_core::nn::ModelKind;
use tsmnet_core::train::{EpochLog, TrainLog};

use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "model,t_obs,t_hor,ade_m,fde_m,n";
pub const TRAIN_LOG_HEADER: &str = "epoch,train_mse,val_ade,val_fde";

pub fn write_report_to<W: Write>(rows: &[EvalRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.model.short(), r.t_obs, r.t_hor, r.ade_m, r.fde_m, r.n)?;
    }
    w.flush()
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_report_to(&report.rows, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[derive(Deserialize)]
struct ReportRecord {
    model: String,
    t_obs: usize,
    t_hor: usize,
    ade_m: f64,
    fde_m: f64,
    n: usize,
}

fn check_header(path: &Path, rdr: &mut csv::Reader<impl std::io::Read>, want: &str) -> Result<()> {
    let got = rdr.headers().map_err(|e| Error::csv(path, e))?.iter().collect::<Vec<_>>().join(",");
    if got != want {
        return Err(Error::format(path, format!("expected header {want:?}, found {got:?}")));
    }
    Ok(())
}

pub fn read_report_from<R: std::io::Read>(r: R, path: &Path) -> Result<Vec<EvalRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(path, &mut rdr, REPORT_HEADER)?;
    rdr.deserialize::<ReportRecord>()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let model = ModelKind::from_short(&rec.model)
                .ok_or_else(|| Error::format(path, format!("unknown model {:?}", rec.model)))?;
            Ok(EvalRow { model, t_obs: rec.t_obs, t_hor: rec.t_hor, ade_m: rec.ade_m, fde_m: rec.fde_m, n: rec.n })
        })
        .collect()
}

pub fn read_report(path: &Path) -> Result<Vec<EvalRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_report_from(file, path)
}

pub fn write_train_log(log: &TrainLog, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{TRAIN_LOG_HEADER}").map_err(io)?;
    for e in &log.epochs {
        writeln!(w, "{},{},{},{}", e.epoch, e.train_mse, e.val_ade, e.val_fde).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_train_log(path: &Path) -> Result<Vec<EpochLog>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    check_header(path, &mut rdr, TRAIN_LOG_HEADER)?;
    rdr.deserialize::<(usize, f64, f64, f64)>()
        .map(|r| {
            let (epoch, train_mse, val_ade, val_fde) = r.map_err(|e| Error::csv(path, e))?;
            Ok(EpochLog { epoch, train_mse, val_ade, val_fde })
        })
        .collect()
}
