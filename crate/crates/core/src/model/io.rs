//! CSV reading and writing for datasets.

use std::io::{Read, Write};

use super::schema::{Dataset, Schema};
use crate::error::{Error, Result};

/// Reads a CSV whose header names every schema column (any order). Extra
/// columns are rejected.
pub fn read_csv<R: Read>(schema: &Schema, reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::parse("header", e))?.clone();
    if headers.len() != schema.len() {
        return Err(Error::parse(
            "header",
            format!("expected {} columns, found {}", schema.len(), headers.len()),
        ));
    }
    let mut order = Vec::with_capacity(headers.len());
    for h in headers.iter() {
        let i = schema
            .index_of(h.trim())
            .ok_or_else(|| Error::parse("header", format!("unknown column {h:?}")))?;
        order.push(i);
    }
    let mut values = Vec::new();
    let mut row = vec![0u32; schema.len()];
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| Error::parse(format!("line {line}"), e))?;
        if rec.len() != schema.len() {
            return Err(Error::parse(format!("line {line}"), "wrong number of fields"));
        }
        for (field, &col) in rec.iter().zip(&order) {
            row[col] = field
                .trim()
                .parse()
                .map_err(|e| Error::parse(format!("line {line}, column {:?}", schema.column(col).name), e))?;
        }
        values.extend_from_slice(&row);
    }
    Dataset::from_flat(schema.clone(), values)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    }
}

/// Writes the dataset with a header row.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(data.schema().columns().iter().map(|c| c.name.as_str()))
        .map_err(csv_err)?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}

/// Writes `data` with an appended `BID` column; a row assigned to several
/// blocks is written once per block.
pub fn write_csv_with_blocks<W: Write>(
    data: &Dataset,
    blocks_of_row: impl Fn(usize) -> Vec<usize>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.schema().columns().iter().map(|c| c.name.as_str()).collect();
    header.push("BID");
    w.write_record(&header).map_err(csv_err)?;
    for (i, row) in data.rows().enumerate() {
        for b in blocks_of_row(i) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(b.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Column;

    #[test]
    fn reads_reordered_header() {
        let s = Schema::new(vec![Column::numeric("x", 10), Column::categorical("k", 3)]).unwrap();
        let d = read_csv(&s, "k,x\n2,7\n0,1\n".as_bytes()).unwrap();
        assert_eq!(d.row(0), &[7, 2]);
        assert_eq!(d.row(1), &[1, 0]);
    }

    #[test]
    fn rejects_out_of_domain_and_garbage() {
        let s = Schema::new(vec![Column::numeric("x", 10)]).unwrap();
        assert!(read_csv(&s, "x\n10\n".as_bytes()).is_err());
        let e = read_csv(&s, "x\n1\nfoo\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(read_csv(&s, "y\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn block_column_repeats_replicas() {
        let s = Schema::new(vec![Column::numeric("x", 10)]).unwrap();
        let d = Dataset::new(s, vec![vec![1], vec![2]]).unwrap();
        let mut out = Vec::new();
        write_csv_with_blocks(&d, |i| if i == 0 { vec![0] } else { vec![0, 3] }, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x,BID\n1,0\n2,0\n2,3\n");
    }
}
