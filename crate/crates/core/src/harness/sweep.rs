use std::path::Path;

use super::convergence::write_csv;
use crate::error::{Error, Result};
use crate::kernel::{kernel_sweep, SweepRow};

/// Parses `a..b` (inclusive) or a single depth.
pub fn parse_depth_range(s: &str) -> Result<Vec<usize>> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("invalid depth '{t}' in range '{s}'")))
    };
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => {
            let v = num(s)?;
            (v, v)
        }
    };
    if lo < 3 || hi < lo {
        return Err(Error::Config(format!("depth range '{s}' must satisfy 3 <= lo <= hi")));
    }
    Ok((lo..=hi).collect())
}

pub fn write_sweep(path: &Path, depths: &[usize]) -> Result<Vec<SweepRow>> {
    let rows = kernel_sweep(depths.iter().copied())?;
    write_csv(path, &rows)?;
    Ok(rows)
}

pub fn sweep_csv(depths: &[usize]) -> Result<String> {
    let rows = kernel_sweep(depths.iter().copied())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Input(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of numbers is UTF-8"))
}
