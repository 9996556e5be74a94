//! Comma-separated input with a header row.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::inference::TestData;
use crate::rankstats::{BoundedSample, GroupedSample, PairedSample};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    /// Columns `group,value`.
    Grouped,
    /// Columns `u,v`.
    Paired,
    /// Column `value`, restricted to [-1, 1].
    Single,
}

/// Header names to read each field from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnMap {
    pub group: String,
    pub value: String,
    pub u: String,
    pub v: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            group: "group".into(),
            value: "value".into(),
            u: "u".into(),
            v: "v".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InputSpec {
    pub path: PathBuf,
    pub format: InputFormat,
    pub columns: ColumnMap,
    /// Declared number of groups; groups with no rows are appended as empty.
    pub groups: Option<usize>,
}

impl InputSpec {
    pub fn new(path: impl Into<PathBuf>, format: InputFormat) -> Self {
        Self {
            path: path.into(),
            format,
            columns: ColumnMap::default(),
            groups: None,
        }
    }
}

pub fn ingest(spec: &InputSpec) -> Result<TestData> {
    let file = File::open(&spec.path)
        .map_err(|e| Error::Io(format!("{}: {e}", spec.path.display())))?;
    match spec.format {
        InputFormat::Grouped => Ok(TestData::Grouped(read_grouped(
            file,
            &spec.columns,
            spec.groups,
        )?)),
        InputFormat::Paired => Ok(TestData::Paired(read_paired(file, &spec.columns)?)),
        InputFormat::Single => Ok(TestData::Bounded(read_single(file, &spec.columns)?)),
    }
}

struct Table<R: Read> {
    reader: csv::Reader<R>,
    index: HashMap<String, usize>,
}

impl<R: Read> Table<R> {
    fn open(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
        let mut index = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            index.entry(h.to_string()).or_insert(i);
        }
        Ok(Self { reader, index })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("header has no `{name}` column"),
        })
    }

    /// Calls `f(line, record)` for every data row.
    fn rows(mut self, mut f: impl FnMut(u64, &csv::StringRecord) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        let mut last_line = 1;
        loop {
            match self.reader.read_record(&mut record) {
                Ok(true) => {
                    let line = record.position().map_or(last_line + 1, |p| p.line());
                    last_line = line;
                    f(line, &record)?;
                }
                Ok(false) => return Ok(()),
                Err(e) => return Err(csv_error(e, last_line + 1)),
            }
        }
    }
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::Parse {
            line,
            message: e.to_string(),
        },
    }
}

fn field<'a>(record: &'a csv::StringRecord, col: usize, line: u64) -> Result<&'a str> {
    record.get(col).ok_or_else(|| Error::Parse {
        line,
        message: format!("row has {} fields, expected at least {}", record.len(), col + 1),
    })
}

fn number(record: &csv::StringRecord, col: usize, line: u64) -> Result<f64> {
    let raw = field(record, col, line)?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("`{raw}` is not a finite number"),
        }),
    }
}

/// Reads `group,value` rows. Groups are numbered in order of first appearance.
pub fn read_grouped<R: Read>(
    input: R,
    columns: &ColumnMap,
    declared: Option<usize>,
) -> Result<GroupedSample> {
    let table = Table::open(input)?;
    let (gc, vc) = (table.column(&columns.group)?, table.column(&columns.value)?);
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    table.rows(|line, rec| {
        let label = field(rec, gc, line)?;
        let value = number(rec, vc, line)?;
        let next = groups.len();
        let idx = *labels.entry(label.to_string()).or_insert(next);
        if idx == next {
            groups.push(Vec::new());
        }
        groups[idx].push(value);
        Ok(())
    })?;
    if let Some(g) = declared {
        if groups.len() > g {
            return Err(Error::InvalidInput(format!(
                "found {} groups but {g} were declared",
                groups.len()
            )));
        }
        groups.resize_with(g, Vec::new);
    }
    GroupedSample::new(groups)
}

/// Reads `u,v` rows.
pub fn read_paired<R: Read>(input: R, columns: &ColumnMap) -> Result<PairedSample> {
    let table = Table::open(input)?;
    let (uc, vc) = (table.column(&columns.u)?, table.column(&columns.v)?);
    let mut rows = Vec::new();
    table.rows(|line, rec| {
        rows.push((number(rec, uc, line)?, number(rec, vc, line)?));
        Ok(())
    })?;
    PairedSample::new(rows)
}

/// Reads a `value` column; every value must already lie in [-1, 1].
pub fn read_single<R: Read>(input: R, columns: &ColumnMap) -> Result<BoundedSample> {
    let table = Table::open(input)?;
    let vc = table.column(&columns.value)?;
    let mut values = Vec::new();
    table.rows(|line, rec| {
        let value = number(rec, vc, line)?;
        if value.abs() > 1.0 {
            return Err(Error::OutOfRange { line, value });
        }
        values.push(value);
        Ok(())
    })?;
    BoundedSample::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols() -> ColumnMap {
        ColumnMap::default()
    }

    #[test]
    fn grouped_basic() {
        let db = read_grouped("group,value\nA,1.0\nB,2.0\n".as_bytes(), &cols(), None).unwrap();
        assert_eq!((db.g(), db.n()), (2, 2));
        let db = read_grouped("value,group\n1,B\n2,A\n3,B\n".as_bytes(), &cols(), Some(3)).unwrap();
        assert_eq!(db.groups(), &[vec![1.0, 3.0], vec![2.0], vec![]]);
        assert!(read_grouped("group,value\nA,1\nB,2\nC,3\n".as_bytes(), &cols(), Some(2)).is_err());
    }

    #[test]
    fn paired_basic() {
        let db = read_paired("u,v\n0,1\n0,-2\n3,3\n".as_bytes(), &cols()).unwrap();
        assert_eq!(db.differences(), vec![1.0, -2.0, 0.0]);
    }

    #[test]
    fn single_range() {
        let err = read_single("value\n0.5\n1.5\n".as_bytes(), &cols()).unwrap_err();
        assert_eq!(err, Error::OutOfRange { line: 3, value: 1.5 });
        assert!(err.to_string().contains("[-1, 1]"));
        assert_eq!(read_single("value\n-1\n1\n".as_bytes(), &cols()).unwrap().n(), 2);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = read_grouped("group,value\nA,1\nB,x\n".as_bytes(), &cols(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = read_grouped("group,value\nA,1\nB\n".as_bytes(), &cols(), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = read_paired("u,w\n1,2\n".as_bytes(), &cols()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
        let err = read_paired("u,v\n1,inf\n".as_bytes(), &cols()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn column_mapping() {
        let c = ColumnMap {
            group: "arm".into(),
            value: "y".into(),
            ..ColumnMap::default()
        };
        let db = read_grouped("y,arm\n1,t\n2,c\n".as_bytes(), &c, None).unwrap();
        assert_eq!(db.g(), 2);
    }
}
