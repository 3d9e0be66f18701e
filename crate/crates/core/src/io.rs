//! CSV formats for grid functions, kernel dumps and coefficient tables.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, WeightedGrid};
use crate::lp::{DyadicGrid, LpCoefficients};
use crate::operator::KernelOperator;

/// Coordinate tolerance when matching a file against a grid.
pub const COORD_TOL: f64 = 1e-9;

/// Shortest decimal that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Writes `x1,...,xn,value`, one row per grid point in storage order.
pub fn write_function<W: Write>(f: &GridFunction, grid: &WeightedGrid, out: W) -> Result<()> {
    crate::grid::GridFunction::new(grid, f.values().clone())?;
    let mut w = csv::Writer::from_writer(out);
    let n = grid.dimension();
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    for i in 0..grid.len() {
        let mut row: Vec<String> = grid.point(i).iter().map(|&x| num(x)).collect();
        row.push(num(f.values()[i]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a function written by [`write_function`], checking every
/// coordinate against `grid`. Data rows are numbered from 1.
pub fn read_function<R: Read>(grid: &WeightedGrid, input: R) -> Result<GridFunction> {
    let mut r = csv::Reader::from_reader(input);
    let n = grid.dimension();
    let headers = r.headers()?.clone();
    if headers.len() != n + 1 {
        return Err(Error::GridMismatch(format!(
            "header has {} columns, expected {}",
            headers.len(),
            n + 1
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if i >= grid.len() {
            return Err(Error::GridMismatch(format!(
                "row {row}: file has more than {} rows",
                grid.len()
            )));
        }
        let fields: Vec<f64> = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::GridMismatch(format!("row {row}: cannot parse `{s}`")))
            })
            .collect::<Result<_>>()?;
        if fields.len() != n + 1 {
            return Err(Error::GridMismatch(format!("row {row}: expected {} fields", n + 1)));
        }
        let p = grid.point(i);
        if fields[..n].iter().zip(p).any(|(a, b)| (a - b).abs() > COORD_TOL) {
            return Err(Error::GridMismatch(format!(
                "row {row}: point {:?} does not match grid point {:?}",
                &fields[..n],
                p
            )));
        }
        values.push(fields[n]);
    }
    if values.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "row {}: file ends after {} rows, grid has {}",
            values.len() + 1,
            values.len(),
            grid.len()
        )));
    }
    GridFunction::new(grid, DVector::from_vec(values))
}

pub fn save_function(path: impl AsRef<Path>, f: &GridFunction, grid: &WeightedGrid) -> Result<()> {
    write_function(f, grid, std::fs::File::create(path)?)
}

pub fn load_function(path: impl AsRef<Path>, grid: &WeightedGrid) -> Result<GridFunction> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    read_function(grid, std::io::BufReader::new(file))
}

/// `t,x_index,y_index,value` for every entry of `op`.
pub fn write_kernel<W: Write>(t: f64, op: &KernelOperator, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x_index", "y_index", "value"])?;
    let tt = num(t);
    for i in 0..op.len() {
        for j in 0..op.len() {
            w.write_record([tt.clone(), i.to_string(), j.to_string(), num(op.entry(i, j))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `k,cube_index,c1..cn,omega_Q,value,windowed`; `c` is the sample point
/// `x_Q`.
pub fn write_coefficients<W: Write>(
    c: &LpCoefficients,
    dg: &DyadicGrid,
    grid: &WeightedGrid,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = grid.dimension();
    let mut header = vec!["k".to_string(), "cube_index".to_string()];
    header.extend((1..=n).map(|i| format!("c{i}")));
    header.extend(["omega_Q", "value", "windowed"].map(String::from));
    w.write_record(&header)?;
    for (k, vals) in c.scales() {
        let scale = dg.scale(k)?;
        for (q, cube) in scale.cubes.iter().enumerate() {
            let mut row = vec![k.to_string(), q.to_string()];
            row.extend(grid.point(cube.sample).iter().map(|&x| num(x)));
            row.push(num(cube.omega));
            row.push(num(vals[q]));
            row.push(c.windowed.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
