//! CSV exchange format for count series: a header row, a `y` column of
//! non-negative integer counts and any number of numeric covariate columns.
//! Rows are time order; the intercept is implicit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::CountSeries;

pub const COUNT_COLUMN: &str = "y";

fn parse_count(raw: &str, row: usize) -> Result<u64> {
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    if raw.parse::<i64>().is_ok() {
        return Err(Error::NegativeCount { row, value: raw.to_string() });
    }
    match raw.parse::<f64>() {
        Ok(v) if !v.is_finite() => Err(Error::NotANumber { row, column: COUNT_COLUMN.into(), value: raw.to_string() }),
        Ok(v) if v < 0.0 => Err(Error::NegativeCount { row, value: raw.to_string() }),
        // "3.0" is a count; anything with a fractional part or beyond the
        // exactly representable integers is not.
        Ok(v) if v.fract() == 0.0 && v < 9.007_199_254_740_992e15 => Ok(v as u64),
        _ => Err(Error::NonIntegerCount { row, value: raw.to_string() }),
    }
}

fn parse_covariate(raw: &str, row: usize, column: &str) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NotANumber { row, column: column.to_string(), value: raw.to_string() }),
    }
}

/// Parses the CSV format from any reader. Row numbers in errors are 1-based
/// data rows (the header is row 0).
pub fn parse_count_csv<R: Read>(reader: R) -> Result<CountSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let y_col = headers.iter().position(|h| h == COUNT_COLUMN).ok_or(Error::MissingCountColumn)?;
    let cov_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != y_col).collect();

    let mut y = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); cov_cols.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        y.push(parse_count(&record[y_col], row)?);
        for (k, &j) in cov_cols.iter().enumerate() {
            cols[k].push(parse_covariate(&record[j], row, &headers[j])?);
        }
    }
    if y.len() < 2 {
        return Err(Error::TooFewRows { rows: y.len() });
    }
    let covariates = cov_cols.iter().map(|&j| headers[j].clone()).zip(cols).collect();
    CountSeries::with_covariates(y, covariates)
}

pub fn ingest_csv(path: &Path) -> Result<CountSeries> {
    parse_count_csv(File::open(path)?)
}

/// Writes a series in the format [`parse_count_csv`] reads back exactly.
pub fn write_count_csv<W: Write>(series: &CountSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = series.d();
    let mut header = vec![COUNT_COLUMN.to_string()];
    header.extend(series.labels()[1..].iter().cloned());
    w.write_record(&header)?;
    for (t, y) in series.y().iter().enumerate() {
        let mut rec = vec![y.to_string()];
        rec.extend((1..d).map(|j| series.x()[(t, j)].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<CountSeries> {
        parse_count_csv(text.as_bytes())
    }

    #[test]
    fn intercept_only_file() {
        let s = parse("y\n1\n2\n3\n").unwrap();
        assert_eq!((s.n(), s.d()), (3, 1));
        assert_eq!(s.y(), &[1, 2, 3]);
    }

    #[test]
    fn covariate_columns_in_any_position() {
        let s = parse("trend,y,cos12\n0.001,4,1\n0.002,0,0.5\n0.003,7,-0.5\n").unwrap();
        assert_eq!(s.labels(), &["intercept", "trend", "cos12"]);
        assert_eq!(s.y(), &[4, 0, 7]);
        assert_eq!(s.x()[(2, 2)], -0.5);
    }

    #[test]
    fn named_errors() {
        assert!(matches!(parse("count\n1\n2\n"), Err(Error::MissingCountColumn)));
        assert!(matches!(parse("y\n1\n2.5\n"), Err(Error::NonIntegerCount { row: 2, .. })));
        assert!(matches!(parse("y\n1\nabc\n"), Err(Error::NonIntegerCount { row: 2, .. })));
        assert!(matches!(parse("y\n1\n2\n-3\n"), Err(Error::NegativeCount { row: 3, .. })));
        assert!(matches!(parse("y\nNaN\n2\n"), Err(Error::NotANumber { row: 1, .. })));
        assert!(matches!(parse("y,x\n1,0\n2,nan\n"), Err(Error::NotANumber { row: 2, .. })));
        assert!(matches!(parse("y\n1\n"), Err(Error::TooFewRows { rows: 1 })));
        assert!(matches!(parse("y,x\n1,2\n3\n"), Err(Error::Csv(_))));
    }

    #[test]
    fn integral_floats_are_counts() {
        assert_eq!(parse("y\n3.0\n0\n").unwrap().y(), &[3, 0]);
    }

    #[test]
    fn write_then_read_is_identity() {
        let s = CountSeries::with_covariates(
            vec![0, 5, 2, 9],
            vec![("trend".into(), vec![0.1, 0.2, 0.30000000000000004, 1e-300]), ("b".into(), vec![1.0, 0.0, 1.0, 0.0])],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_count_csv(&s, &mut buf).unwrap();
        assert_eq!(parse_count_csv(buf.as_slice()).unwrap(), s);
    }
}
