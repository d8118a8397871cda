use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model_matrix::schema::Schema;

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// Missing entries in columns outside the schema are stored as NaN.
    Numeric(Vec<f64>),
    /// Missing entries in columns outside the schema are stored as "".
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorted distinct levels; numeric columns are formatted first.
    pub fn levels(&self) -> Vec<String> {
        let set: BTreeSet<String> = (0..self.len()).map(|i| self.text(i)).collect();
        set.into_iter().collect()
    }

    pub(crate) fn text(&self, i: usize) -> String {
        match self {
            Column::Numeric(v) => format!("{}", v[i]),
            Column::Categorical(v) => v[i].clone(),
        }
    }

    /// Entries at `idx`, in that order.
    pub fn pick(&self, idx: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(idx.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => Column::Categorical(idx.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// A parsed table before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub header: Vec<String>,
    pub columns: Vec<Column>,
    pub n: usize,
    /// Rows removed because a schema column was missing.
    pub dropped_rows: usize,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na")
}

fn parse_number(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

impl RawDataset {
    pub fn from_columns(header: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        if header.len() != columns.len() {
            return Err(Error::Schema(format!(
                "{} names for {} columns",
                header.len(),
                columns.len()
            )));
        }
        let n = columns.first().map(Column::len).unwrap_or(0);
        if let Some((i, _)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(Error::BadColumn {
                column: header[i].clone(),
                reason: format!("length differs from {n}"),
            });
        }
        Ok(RawDataset {
            header,
            columns,
            n,
            dropped_rows: 0,
        })
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|i| &self.columns[i])
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> RawDataset {
        RawDataset {
            header: self.header.clone(),
            columns: self.columns.iter().map(|c| c.pick(idx)).collect(),
            n: idx.len(),
            dropped_rows: 0,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for i in 0..self.n {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| match c {
                    Column::Numeric(v) if v[i].is_nan() => String::new(),
                    Column::Numeric(v) => format!("{}", v[i]),
                    Column::Categorical(v) => v[i].clone(),
                })
                .collect();
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Parses comma-separated text with a header row.
///
/// Rows with a missing value (empty or `NA`) in any column referenced by
/// `schema` are dropped. A column becomes numeric when every non-missing
/// field parses as a finite real, categorical otherwise.
pub fn read_csv<R: Read>(input: R, schema: &Schema) -> Result<RawDataset> {
    read_with(input, |header| {
        Ok(schema.resolve(header)?.referenced().cloned().collect())
    })
}

/// Like [`read_csv`] but only `required` must be present and complete.
///
/// Used for scoring new data where the response column may be absent.
pub fn read_csv_columns<R: Read>(input: R, required: &[String]) -> Result<RawDataset> {
    read_with(input, |header| {
        match required.iter().find(|name| !header.contains(name)) {
            Some(name) => Err(Error::MissingColumn(name.clone())),
            None => Ok(required.to_vec()),
        }
    })
}

fn read_with<R: Read>(
    input: R,
    required: impl FnOnce(&[String]) -> Result<Vec<String>>,
) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let referenced: Vec<usize> = required(&header)?
        .iter()
        .map(|name| header.iter().position(|h| h == name).expect("checked present"))
        .collect();

    let mut raw_cols: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        if referenced.iter().any(|&j| is_missing(record.get(j).unwrap_or(""))) {
            dropped += 1;
            continue;
        }
        for (j, col) in raw_cols.iter_mut().enumerate() {
            col.push(record.get(j).unwrap_or("").trim().to_string());
        }
    }
    let n = raw_cols.first().map(Vec::len).unwrap_or(0);
    if n == 0 {
        return Err(Error::NoRows { dropped });
    }

    let columns = raw_cols
        .into_iter()
        .map(|fields| {
            let numeric = fields
                .iter()
                .all(|f| is_missing(f) || parse_number(f).is_some());
            if numeric {
                Column::Numeric(
                    fields
                        .iter()
                        .map(|f| parse_number(f).unwrap_or(f64::NAN))
                        .collect(),
                )
            } else {
                Column::Categorical(
                    fields
                        .into_iter()
                        .map(|f| if is_missing(&f) { String::new() } else { f })
                        .collect(),
                )
            }
        })
        .collect();

    Ok(RawDataset {
        header,
        columns,
        n,
        dropped_rows: dropped,
    })
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawDataset> {
    let f = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(std::io::BufReader::new(f), schema)
}

pub fn load_csv_columns(path: &Path, required: &[String]) -> Result<RawDataset> {
    let f = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv_columns(std::io::BufReader::new(f), required)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_column_is_parsed() {
        let schema = Schema::new("y", &["s"], None);
        let raw = read_csv("y,s,x\n1,0,2.5\n2,1,3\n3,0,4\n".as_bytes(), &schema).unwrap();
        assert_eq!(raw.n, 3);
        assert_eq!(raw.column("y"), Some(&Column::Numeric(vec![1.0, 2.0, 3.0])));
    }

    #[test]
    fn non_numeric_column_becomes_categorical() {
        let schema = Schema::new("y", &["g"], None);
        let raw = read_csv("y,g,x\n1,a,1\n2,b,2\n3,a,4\n".as_bytes(), &schema).unwrap();
        let g = raw.column("g").unwrap();
        assert!(matches!(g, Column::Categorical(_)));
        assert_eq!(g.levels(), vec!["a", "b"]);
    }

    #[test]
    fn rows_with_missing_referenced_values_are_dropped() {
        let schema = Schema::new("y", &["s"], None);
        let mut text = String::from("y,s,x\n");
        for i in 0..10 {
            let y = if i == 4 { String::new() } else { i.to_string() };
            text.push_str(&format!("{y},{},{}\n", i % 2, i * 3));
        }
        let raw = read_csv(text.as_bytes(), &schema).unwrap();
        assert_eq!(raw.n, 9);
        assert_eq!(raw.dropped_rows, 1);
    }

    #[test]
    fn quoted_fields_follow_rfc4180() {
        let schema = Schema::new("y", &["g"], None);
        let raw = read_csv(
            "y,g,x\n1,\"a, b\",1\n2,\"say \"\"hi\"\"\",2\n".as_bytes(),
            &schema,
        )
        .unwrap();
        assert_eq!(
            raw.column("g"),
            Some(&Column::Categorical(vec!["a, b".into(), "say \"hi\"".into()]))
        );
    }

    #[test]
    fn missing_schema_column_and_empty_data_are_errors() {
        let schema = Schema::new("y", &["gender"], None);
        assert!(matches!(
            read_csv("y,x\n1,2\n".as_bytes(), &schema),
            Err(Error::MissingColumn(c)) if c == "gender"
        ));
        let schema = Schema::new("y", &["s"], None);
        assert!(matches!(
            read_csv("y,s,x\n,1,2\nNA,0,1\n".as_bytes(), &schema),
            Err(Error::NoRows { dropped: 2 })
        ));
        assert!(matches!(
            load_csv(Path::new("/does/not/exist.csv"), &schema),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let schema = Schema::new("y", &["s"], None);
        let raw = RawDataset::from_columns(
            vec!["y".into(), "s".into(), "x".into()],
            vec![
                Column::Numeric(vec![0.1 + 0.2, -1e-300, 12345.678901234567]),
                Column::Numeric(vec![1.0, 0.0, 1.0]),
                Column::Categorical(vec!["p".into(), "q".into(), "p".into()]),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        raw.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &schema).unwrap();
        assert_eq!(back, raw);
    }

    #[test]
    fn column_list_reader_ignores_other_columns() {
        let required = vec!["s".to_string(), "x".to_string()];
        let raw = read_csv_columns("s,x,z\n1,2,\n0,,1\n1,3,4\n".as_bytes(), &required).unwrap();
        assert_eq!(raw.n, 2);
        assert!(matches!(
            read_csv_columns("s,z\n1,2\n".as_bytes(), &required),
            Err(Error::MissingColumn(c)) if c == "x"
        ));
    }
}
