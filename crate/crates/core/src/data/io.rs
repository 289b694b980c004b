//! CSV exchange formats.
//!
//! Scattered: a header `u,v,q1,...,qs`, then one point per row.
//!
//! Structured: no header; the first row is `m1,m2,s`, the second the `m1`
//! values of `u`, the third the `m2` values of `v`, then `m1 m2` rows of `s`
//! values with `k` (along `u`) running fastest.
//!
//! Flags: a header `index,flag`, one row per point with `0` or `1`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::bspline::{ScatteredData, StructuredData};
use crate::error::{Error, Result};

fn parse(field: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("line {line}: '{field}' is not a number")))
}

pub fn write_scattered<W: Write>(w: W, data: &ScatteredData) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["u".to_string(), "v".to_string()];
    header.extend((1..=data.dim).map(|c| format!("q{c}")));
    out.write_record(&header)?;
    for k in 0..data.len() {
        let mut row = vec![data.u[k].to_string(), data.v[k].to_string()];
        row.extend(data.q[k * data.dim..(k + 1) * data.dim].iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_scattered<R: Read>(r: R) -> Result<ScatteredData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let width = rdr.headers()?.len();
    if width < 3 {
        return Err(Error::InvalidInput("scattered csv needs columns u, v and at least one q".into()));
    }
    let dim = width - 2;
    let (mut u, mut v, mut q) = (vec![], vec![], vec![]);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(Error::InvalidInput(format!("line {line}: expected {width} fields")));
        }
        u.push(parse(&rec[0], line)?);
        v.push(parse(&rec[1], line)?);
        for c in 0..dim {
            q.push(parse(&rec[2 + c], line)?);
        }
    }
    ScatteredData::new(u, v, q, dim)
}

pub fn write_structured<W: Write>(w: W, data: &StructuredData) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    out.write_record([data.m1().to_string(), data.m2().to_string(), data.dim.to_string()])?;
    out.write_record(data.u.iter().map(f64::to_string))?;
    out.write_record(data.v.iter().map(f64::to_string))?;
    for row in data.q.chunks(data.dim) {
        out.write_record(row.iter().map(f64::to_string))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_structured<R: Read>(r: R) -> Result<StructuredData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
    let mut records = rdr.records();
    let mut next_numbers = |what: &str| -> Result<Vec<f64>> {
        let rec = records
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("structured csv ends before the {what}")))??;
        let line = rec.position().map_or(0, |p| p.line());
        rec.iter().map(|f| parse(f, line)).collect()
    };
    let shape = next_numbers("shape row")?;
    if shape.len() != 3 || shape.iter().any(|x| x.fract() != 0.0 || *x < 0.0) {
        return Err(Error::InvalidInput("first row must be m1,m2,s".into()));
    }
    let (m1, m2, dim) = (shape[0] as usize, shape[1] as usize, shape[2] as usize);
    let u = next_numbers("u row")?;
    let v = next_numbers("v row")?;
    if u.len() != m1 || v.len() != m2 {
        return Err(Error::InvalidInput(format!(
            "expected {m1} u and {m2} v values, found {} and {}",
            u.len(),
            v.len()
        )));
    }
    let mut q = Vec::with_capacity(m1 * m2 * dim);
    for _ in 0..m1 * m2 {
        let row = next_numbers("observations")?;
        if row.len() != dim {
            return Err(Error::InvalidInput(format!("observation rows must have {dim} values")));
        }
        q.extend(row);
    }
    if next_numbers("end").is_ok() {
        return Err(Error::InvalidInput("trailing rows after the observations".into()));
    }
    StructuredData::new(u, v, q, dim)
}

pub fn write_scattered_csv(path: &Path, data: &ScatteredData) -> Result<()> {
    write_scattered(File::create(path)?, data)
}

pub fn read_scattered_csv(path: &Path) -> Result<ScatteredData> {
    read_scattered(File::open(path)?)
}

pub fn write_structured_csv(path: &Path, data: &StructuredData) -> Result<()> {
    write_structured(File::create(path)?, data)
}

pub fn read_structured_csv(path: &Path) -> Result<StructuredData> {
    read_structured(File::open(path)?)
}

pub fn write_flags_csv(path: &Path, flags: &[bool]) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["index", "flag"])?;
    for (k, &f) in flags.iter().enumerate() {
        out.write_record([k.to_string(), (f as u8).to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_flags_csv(path: &Path) -> Result<Vec<bool>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut flags = vec![];
    for rec in rdr.records() {
        let rec = rec?;
        flags.push(match rec.get(1).map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            other => return Err(Error::InvalidInput(format!("bad flag {other:?}"))),
        });
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scattered_round_trip() {
        let d = ScatteredData::new(vec![0.1, 1.0 / 3.0], vec![0.5, 0.25], vec![1.0, -2.5, 1e-17, 7.0], 2).unwrap();
        let mut buf = vec![];
        write_scattered(&mut buf, &d).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("u,v,q1,q2\n"));
        assert_eq!(read_scattered(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn structured_round_trip() {
        let d = StructuredData::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0], (0..6).map(|x| x as f64 * 0.1).collect(), 1).unwrap();
        let mut buf = vec![];
        write_structured(&mut buf, &d).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3,2,1\n0,0.5,1\n0,1\n"));
        assert_eq!(read_structured(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(read_scattered("u,v\n0,1\n".as_bytes()).is_err());
        assert!(read_scattered("u,v,q\n0,x,1\n".as_bytes()).is_err());
        assert!(read_structured("2,1,1\n0,1\n0.5\n1\n".as_bytes()).is_err());
        assert!(read_structured("1,1,1\n0\n0\n1\n2\n".as_bytes()).is_err());
    }
}
