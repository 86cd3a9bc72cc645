//! Sweep tables as CSV, lossless in both directions.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::surface::fmt_f64;
use crate::sweep::SweepRow;

pub const COLUMNS: [&str; 13] = [
    "f_hz",
    "p_dbm",
    "mode",
    "il_ant_rx_db",
    "il_ant_tx_db",
    "isolation_db",
    "rl_db",
    "s11_re",
    "s11_im",
    "s21_re",
    "s21_im",
    "p_out_tx_dbm",
    "p_out_rx_dbm",
];

/// Extra columns carrying the closed-form receive-mode coefficients.
pub const EQ4_COLUMNS: [&str; 4] = ["eq4_s11_re", "eq4_s11_im", "eq4_s21_re", "eq4_s21_im"];

/// Writes `rows` with 17-significant-digit floats. The closed-form columns
/// are emitted when the first row carries them; all rows must agree.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let with_eq4 = rows.first().is_some_and(|r| r.eq4.is_some());
    if rows.iter().any(|r| r.eq4.is_some() != with_eq4) {
        return Err(Error::Precondition("sweep rows disagree on closed-form columns".into()));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let wrap = |e: csv::Error| Error::Precondition(format!("csv write failed: {e}"));
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if with_eq4 {
        header.extend(EQ4_COLUMNS);
    }
    w.write_record(&header).map_err(wrap)?;
    for r in rows {
        let mut rec = vec![fmt_f64(r.f_hz), fmt_f64(r.p_dbm), r.mode.to_string()];
        rec.extend(
            [
                r.il_ant_rx_db,
                r.il_ant_tx_db,
                r.isolation_db,
                r.rl_db,
                r.s11.re,
                r.s11.im,
                r.s21.re,
                r.s21.im,
                r.p_out_tx_dbm,
                r.p_out_rx_dbm,
            ]
            .map(fmt_f64),
        );
        if let Some((a, b)) = r.eq4 {
            rec.extend([a.re, a.im, b.re, b.im].map(fmt_f64));
        }
        w.write_record(&rec).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_sweep_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_sweep_csv<R: Read>(input: R, path: &Path) -> Result<Vec<SweepRow>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: 0,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let with_eq4 = header.len() == COLUMNS.len() + EQ4_COLUMNS.len();
    let expected: Vec<&str> = COLUMNS.iter().chain(if with_eq4 { &EQ4_COLUMNS[..] } else { &[] }).copied().collect();
    if header != expected {
        return Err(err(1, format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .ok_or_else(|| err(line, format!("missing column {}", expected[j])))?
                .parse()
                .map_err(|e| err(line, format!("{}: {e}", expected[j])))
        };
        let mode = rec
            .get(2)
            .ok_or_else(|| err(line, "missing column mode".into()))?
            .parse()
            .map_err(|e: Error| err(line, e.to_string()))?;
        rows.push(SweepRow {
            f_hz: num(0)?,
            p_dbm: num(1)?,
            mode,
            il_ant_rx_db: num(3)?,
            il_ant_tx_db: num(4)?,
            isolation_db: num(5)?,
            rl_db: num(6)?,
            s11: Complex64::new(num(7)?, num(8)?),
            s21: Complex64::new(num(9)?, num(10)?),
            p_out_tx_dbm: num(11)?,
            p_out_rx_dbm: num(12)?,
            eq4: if with_eq4 {
                Some((Complex64::new(num(13)?, num(14)?), Complex64::new(num(15)?, num(16)?)))
            } else {
                None
            },
        });
    }
    Ok(rows)
}
