//! CSV emission. Floats use Rust's shortest round-trip formatting, so
//! parsing a cell with `str::parse::<f64>` recovers the value bit-exactly.

use std::io::{self, Write};

use dqpt_core::band::{BandQuenchScenario, DtopRow, PgpRow};
use dqpt_core::quench::PhaseTrace;

pub const SPIN_HEADER: &str = "t,re_G,im_G,abs_G,theta_d,theta_g,rate";
pub const DTOP_HEADER: &str = "t,nu,boundary_term,fold_count,rate_density,skipped_flag";
pub const PGP_HEADER: &str = "k,t,phi_total,phi_dyn,phi_g,dqpt_flag";

/// Writes the spin trace with the rate divided by `rate_divisor`.
pub fn write_phase_trace(w: &mut (impl Write + ?Sized), trace: &PhaseTrace, rate_divisor: f64) -> io::Result<()> {
    writeln!(w, "{SPIN_HEADER}")?;
    for i in 0..trace.len() {
        let g = trace.amplitude[i];
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            trace.times[i],
            g.re,
            g.im,
            g.norm(),
            trace.theta_d[i],
            trace.theta_g[i],
            trace.rate[i] / rate_divisor
        )?;
    }
    Ok(())
}

pub fn write_dtop_rows(w: &mut (impl Write + ?Sized), rows: &[DtopRow]) -> io::Result<()> {
    writeln!(w, "{DTOP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.t,
            r.nu,
            r.boundary_term,
            r.fold_count,
            r.rate_density,
            u8::from(r.skipped)
        )?;
    }
    Ok(())
}

pub fn write_pgp_rows(w: &mut (impl Write + ?Sized), sc: &BandQuenchScenario, rows: &[PgpRow]) -> io::Result<()> {
    for row in rows {
        for (i, k) in sc.k_grid().iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                k,
                row.t,
                row.total[i],
                row.dynamical[i],
                row.geometric[i],
                u8::from(row.dqpt_adjacent[i])
            )?;
        }
    }
    Ok(())
}

/// Parses a CSV produced by this module back into columns.
pub fn read_columns(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty csv")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(format!("row {}: expected {} cells, found {}", n + 1, header.len(), cells.len()));
        }
        for (col, cell) in cols.iter_mut().zip(cells) {
            col.push(cell.parse().map_err(|_| format!("row {}: bad number `{cell}`", n + 1))?);
        }
    }
    Ok((header, cols))
}
