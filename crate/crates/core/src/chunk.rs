//! Re-iterable sources of fixed-size data chunks `(X_k, y_k, m_k)`.
//!
//! A fit makes one or two passes over the data per iteration, so every source
//! must be able to restart from the first chunk and reproduce exactly the same
//! sequence. Only the current chunk is ever materialized.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Chunk size used when none is given.
pub const DEFAULT_CHUNK_SIZE: usize = 10_000;

/// Which table columns form the response, prior weights and design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSchema {
    pub response: String,
    pub weights: Option<String>,
    pub covariates: Vec<String>,
    /// Adds a leading column of ones.
    pub intercept: bool,
}

impl ChunkSchema {
    pub fn new<S: Into<String>>(
        response: impl Into<String>,
        covariates: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            response: response.into(),
            weights: None,
            covariates: covariates.into_iter().map(Into::into).collect(),
            intercept: true,
        }
    }

    pub fn with_weights(mut self, column: impl Into<String>) -> Self {
        self.weights = Some(column.into());
        self
    }

    pub fn with_intercept(mut self, intercept: bool) -> Self {
        self.intercept = intercept;
        self
    }

    pub fn p(&self) -> usize {
        self.covariates.len() + usize::from(self.intercept)
    }

    /// Names of the design columns, `"(intercept)"` first when present.
    pub fn design_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.p());
        if self.intercept {
            names.push("(intercept)".to_string());
        }
        names.extend(self.covariates.iter().cloned());
        names
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        let all = std::iter::once(&self.response)
            .chain(self.weights.iter())
            .chain(self.covariates.iter());
        for name in all {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("column {name:?} is used twice")));
            }
        }
        if self.p() == 0 {
            return Err(Error::Schema("model has no columns".into()));
        }
        Ok(())
    }

    /// Positions of (response, weights, covariates) within `header`.
    fn locate(&self, header: &[String]) -> Result<(usize, Option<usize>, Vec<usize>)> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("column {name:?} not found")))
        };
        let response = find(&self.response)?;
        let weights = self.weights.as_deref().map(find).transpose()?;
        let covariates = self
            .covariates
            .iter()
            .map(|c| find(c))
            .collect::<Result<_>>()?;
        Ok((response, weights, covariates))
    }
}

/// Up to `c` consecutive rows of the design, responses and prior weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    row_offset: usize,
}

impl Chunk {
    pub fn new(p: usize, x: Vec<f64>, y: Vec<f64>, m: Vec<f64>, row_offset: usize) -> Result<Self> {
        if x.len() != y.len() * p || m.len() != y.len() {
            return Err(Error::Shape(format!(
                "chunk with {} responses needs {} design values and {} weights",
                y.len(),
                y.len() * p,
                y.len()
            )));
        }
        Ok(Self {
            p,
            x,
            y,
            m,
            row_offset,
        })
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Row-major `rows × p` design block.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    /// Global index of the first row.
    pub fn row_offset(&self) -> usize {
        self.row_offset
    }

    pub(crate) fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }
}

/// A re-iterable provider of chunks.
pub trait ChunkSource {
    /// Number of design columns.
    fn p(&self) -> usize;

    /// The next chunk in row order, or `None` once the data are exhausted.
    /// Keeps returning `None` until [`reset`](Self::reset).
    fn next_chunk(&mut self) -> Result<Option<Chunk>>;

    /// Restarts iteration at the first chunk.
    fn reset(&mut self) -> Result<()>;

    /// Total row count, when known (always after one complete pass).
    fn n_rows(&self) -> Option<usize>;

    fn is_rewindable(&self) -> bool {
        true
    }

    /// Names of the design columns.
    fn column_names(&self) -> Vec<String> {
        (1..=self.p()).map(|j| format!("x{j}")).collect()
    }
}

impl<S: ChunkSource + ?Sized> ChunkSource for &mut S {
    fn p(&self) -> usize {
        (**self).p()
    }
    fn next_chunk(&mut self) -> Result<Option<Chunk>> {
        (**self).next_chunk()
    }
    fn reset(&mut self) -> Result<()> {
        (**self).reset()
    }
    fn n_rows(&self) -> Option<usize> {
        (**self).n_rows()
    }
    fn is_rewindable(&self) -> bool {
        (**self).is_rewindable()
    }
    fn column_names(&self) -> Vec<String> {
        (**self).column_names()
    }
}

/// Counts rows with one full pass, leaving the source reset.
pub fn count_rows<S: ChunkSource + ?Sized>(source: &mut S) -> Result<usize> {
    if let Some(n) = source.n_rows() {
        return Ok(n);
    }
    source.reset()?;
    let mut n = 0;
    while let Some(chunk) = source.next_chunk()? {
        n += chunk.rows();
    }
    source.reset()?;
    Ok(n)
}

/// A column-oriented numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl DataTable {
    pub fn new<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::Shape("columns differ in length".into()));
            }
        }
        Ok(Self { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.columns[j].as_slice())
    }

    /// Writes the table as comma-separated values with a header row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Read(e.to_string()))?;
        w.write_record(&self.names)
            .map_err(|e| Error::Read(e.to_string()))?;
        for i in 0..self.n_rows() {
            w.write_record(self.columns.iter().map(|c| c[i].to_string()))
                .map_err(|e| Error::Read(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// In-memory backend: the whole design is held, chunks are copied out.
#[derive(Debug, Clone)]
pub struct MemorySource {
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    chunk_size: usize,
    cursor: usize,
    names: Vec<String>,
}

impl MemorySource {
    pub fn open(table: &DataTable, schema: &ChunkSchema, chunk_size: usize) -> Result<Self> {
        schema.validate()?;
        check_chunk_size(chunk_size)?;
        let (ri, wi, ci) = schema.locate(table.names())?;
        let n = table.n_rows();
        let p = schema.p();
        let mut x = Vec::with_capacity(n * p);
        for i in 0..n {
            if schema.intercept {
                x.push(1.0);
            }
            x.extend(ci.iter().map(|&j| table.columns[j][i]));
        }
        let y = table.columns[ri].clone();
        let m = match wi {
            Some(j) => table.columns[j].clone(),
            None => vec![1.0; n],
        };
        Ok(Self {
            p,
            x,
            y,
            m,
            chunk_size,
            cursor: 0,
            names: schema.design_names(),
        })
    }

    /// Wraps a ready-made row-major `n × p` design.
    pub fn from_design(
        p: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        m: Option<Vec<f64>>,
        chunk_size: usize,
    ) -> Result<Self> {
        check_chunk_size(chunk_size)?;
        let n = y.len();
        if x.len() != n * p {
            return Err(Error::Shape(format!(
                "design has {} values, expected {}×{p}",
                x.len(),
                n
            )));
        }
        let m = m.unwrap_or_else(|| vec![1.0; n]);
        if m.len() != n {
            return Err(Error::Shape(format!("{} weights for {n} rows", m.len())));
        }
        Ok(Self {
            p,
            x,
            y,
            m,
            chunk_size,
            cursor: 0,
            names: (1..=p).map(|j| format!("x{j}")).collect(),
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Self {
        if names.len() == self.p {
            self.names = names;
        }
        self
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }
}

impl ChunkSource for MemorySource {
    fn p(&self) -> usize {
        self.p
    }

    fn next_chunk(&mut self) -> Result<Option<Chunk>> {
        let n = self.y.len();
        if self.cursor >= n {
            return Ok(None);
        }
        let start = self.cursor;
        let end = (start + self.chunk_size).min(n);
        self.cursor = end;
        Chunk::new(
            self.p,
            self.x[start * self.p..end * self.p].to_vec(),
            self.y[start..end].to_vec(),
            self.m[start..end].to_vec(),
            start,
        )
        .map(Some)
    }

    fn reset(&mut self) -> Result<()> {
        self.cursor = 0;
        Ok(())
    }

    fn n_rows(&self) -> Option<usize> {
        Some(self.y.len())
    }

    fn column_names(&self) -> Vec<String> {
        self.names.clone()
    }
}

fn check_chunk_size(c: usize) -> Result<()> {
    if c == 0 {
        return Err(Error::Config("chunk size must be at least 1".into()));
    }
    Ok(())
}

enum Origin {
    Path(PathBuf),
    Stream,
}

/// Streams chunks from comma-separated text with a header row.
///
/// Opening a path gives a rewindable source; wrapping an arbitrary reader
/// gives a stream that cannot restart once it has been read from.
pub struct CsvSource {
    origin: Origin,
    reader: csv::Reader<Box<dyn Read>>,
    schema: ChunkSchema,
    response: usize,
    weights: Option<usize>,
    covariates: Vec<usize>,
    header: Vec<String>,
    chunk_size: usize,
    next_row: usize,
    exhausted: bool,
    n_rows: Option<usize>,
    peak_rows: usize,
    record: csv::StringRecord,
}

impl CsvSource {
    pub fn open(path: impl AsRef<Path>, schema: ChunkSchema, chunk_size: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file =
            File::open(&path).map_err(|e| Error::Read(format!("{}: {e}", path.display())))?;
        Self::build(Origin::Path(path), Box::new(file), schema, chunk_size)
    }

    pub fn from_reader(
        reader: impl Read + 'static,
        schema: ChunkSchema,
        chunk_size: usize,
    ) -> Result<Self> {
        Self::build(Origin::Stream, Box::new(reader), schema, chunk_size)
    }

    fn build(
        origin: Origin,
        input: Box<dyn Read>,
        schema: ChunkSchema,
        chunk_size: usize,
    ) -> Result<Self> {
        schema.validate()?;
        check_chunk_size(chunk_size)?;
        let mut reader = reader_for(input);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Read(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let (response, weights, covariates) = schema.locate(&header)?;
        Ok(Self {
            origin,
            reader,
            schema,
            response,
            weights,
            covariates,
            header,
            chunk_size,
            next_row: 0,
            exhausted: false,
            n_rows: None,
            peak_rows: 0,
            record: csv::StringRecord::new(),
        })
    }

    /// Largest number of rows held in memory at once so far.
    pub fn peak_buffered_rows(&self) -> usize {
        self.peak_rows
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    fn parse(&self, field: usize, row: usize) -> Result<f64> {
        let raw = self.record.get(field).unwrap_or("");
        raw.trim().parse::<f64>().map_err(|_| Error::Parse {
            row,
            column: self.header[field].clone(),
            value: raw.to_string(),
        })
    }
}

fn reader_for(input: Box<dyn Read>) -> csv::Reader<Box<dyn Read>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .from_reader(input)
}

impl ChunkSource for CsvSource {
    fn p(&self) -> usize {
        self.schema.p()
    }

    fn next_chunk(&mut self) -> Result<Option<Chunk>> {
        if self.exhausted {
            return Ok(None);
        }
        let p = self.p();
        let mut x = Vec::with_capacity(self.chunk_size * p);
        let mut y = Vec::with_capacity(self.chunk_size);
        let mut m = Vec::with_capacity(self.chunk_size);
        let offset = self.next_row;
        while y.len() < self.chunk_size {
            let more = self
                .reader
                .read_record(&mut self.record)
                .map_err(|e| Error::Read(e.to_string()))?;
            if !more {
                self.exhausted = true;
                self.n_rows = Some(self.next_row);
                break;
            }
            // 1-based data row, header excluded
            let row = self.next_row + 1;
            if self.schema.intercept {
                x.push(1.0);
            }
            for k in 0..self.covariates.len() {
                x.push(self.parse(self.covariates[k], row)?);
            }
            y.push(self.parse(self.response, row)?);
            m.push(match self.weights {
                Some(j) => self.parse(j, row)?,
                None => 1.0,
            });
            self.next_row += 1;
        }
        self.peak_rows = self.peak_rows.max(y.len());
        if y.is_empty() {
            return Ok(None);
        }
        Chunk::new(p, x, y, m, offset).map(Some)
    }

    fn reset(&mut self) -> Result<()> {
        if self.next_row == 0 && !self.exhausted {
            return Ok(());
        }
        match &self.origin {
            Origin::Stream => Err(Error::NotRewindable),
            Origin::Path(path) => {
                let file = File::open(path)
                    .map_err(|e| Error::Read(format!("{}: {e}", path.display())))?;
                self.reader = reader_for(Box::new(file));
                self.reader
                    .headers()
                    .map_err(|e| Error::Read(e.to_string()))?;
                self.next_row = 0;
                self.exhausted = false;
                Ok(())
            }
        }
    }

    fn n_rows(&self) -> Option<usize> {
        self.n_rows
    }

    fn is_rewindable(&self) -> bool {
        matches!(self.origin, Origin::Path(_))
    }

    fn column_names(&self) -> Vec<String> {
        self.schema.design_names()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> DataTable {
        DataTable::new(
            ["y", "a", "b", "w"],
            vec![
                vec![1.0, 0.0, 1.0, 1.0, 0.0],
                vec![0.5, -1.25, 3.0, 1e-3, 7.0],
                vec![2.0, 2.5, -0.1, 4.0, 0.3],
                vec![1.0, 2.0, 3.0, 4.0, 5.0],
            ],
        )
        .unwrap()
    }

    fn drain(src: &mut impl ChunkSource) -> Vec<Chunk> {
        let mut out = vec![];
        while let Some(c) = src.next_chunk().unwrap() {
            out.push(c);
        }
        out
    }

    #[test]
    fn partition_sizes() {
        let schema = ChunkSchema::new("y", ["a", "b"]);
        let mut src = MemorySource::open(&table(), &schema, 2).unwrap();
        let sizes: Vec<_> = drain(&mut src).iter().map(Chunk::rows).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        let mut src = MemorySource::open(&table(), &schema, 50).unwrap();
        assert_eq!(drain(&mut src).len(), 1);
    }

    #[test]
    fn intercept_column_leads() {
        let schema = ChunkSchema::new("y", ["b"]);
        let mut src = MemorySource::open(&table(), &schema, 2).unwrap();
        for chunk in drain(&mut src) {
            assert_eq!(chunk.p(), 2);
            for i in 0..chunk.rows() {
                assert_eq!(chunk.row(i)[0], 1.0);
            }
        }
        let schema = ChunkSchema::new("y", ["b"]).with_intercept(false);
        let src = MemorySource::open(&table(), &schema, 2).unwrap();
        assert_eq!(src.p(), 1);
    }

    #[test]
    fn end_is_sticky_until_reset() {
        let schema = ChunkSchema::new("y", ["a"]);
        let mut src = MemorySource::open(&table(), &schema, 3).unwrap();
        drain(&mut src);
        assert!(src.next_chunk().unwrap().is_none());
        assert!(src.next_chunk().unwrap().is_none());
        src.reset().unwrap();
        assert!(src.next_chunk().unwrap().is_some());
    }

    #[test]
    fn concatenation_reproduces_table() {
        let t = table();
        let schema = ChunkSchema::new("y", ["a", "b"])
            .with_weights("w")
            .with_intercept(false);
        let mut src = MemorySource::open(&t, &schema, 2).unwrap();
        let chunks = drain(&mut src);
        let y: Vec<f64> = chunks.iter().flat_map(|c| c.y().to_vec()).collect();
        let m: Vec<f64> = chunks.iter().flat_map(|c| c.m().to_vec()).collect();
        let a: Vec<f64> = chunks
            .iter()
            .flat_map(|c| (0..c.rows()).map(|i| c.row(i)[0]).collect::<Vec<_>>())
            .collect();
        assert_eq!(y, t.column("y").unwrap());
        assert_eq!(m, t.column("w").unwrap());
        assert_eq!(a, t.column("a").unwrap());
        let offsets: Vec<_> = chunks.iter().map(Chunk::row_offset).collect();
        assert_eq!(offsets, vec![0, 2, 4]);
    }

    #[test]
    fn schema_errors() {
        let t = table();
        let missing = ChunkSchema::new("y", ["nope"]);
        assert!(matches!(
            MemorySource::open(&t, &missing, 2),
            Err(Error::Schema(_))
        ));
        let dup = ChunkSchema::new("y", ["a", "a"]);
        assert!(matches!(
            MemorySource::open(&t, &dup, 2),
            Err(Error::Schema(_))
        ));
        let ok = ChunkSchema::new("y", ["a"]);
        assert!(matches!(
            MemorySource::open(&t, &ok, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn csv_matches_memory_bitwise() {
        let t = table();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.write_csv(&path).unwrap();
        let schema = ChunkSchema::new("y", ["a", "b"]).with_weights("w");
        let mut mem = MemorySource::open(&t, &schema, 2).unwrap();
        let mut csv = CsvSource::open(&path, schema, 2).unwrap();
        assert_eq!(csv.n_rows(), None);
        let a = drain(&mut mem);
        let b = drain(&mut csv);
        assert_eq!(a, b);
        assert_eq!(csv.n_rows(), Some(5));
        assert!(csv.peak_buffered_rows() <= 2);
    }

    #[test]
    fn csv_reset_semantics() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        table().write_csv(&path).unwrap();
        let schema = ChunkSchema::new("y", ["a"]);
        let mut src = CsvSource::open(&path, schema, 2).unwrap();
        let first = drain(&mut src);
        src.reset().unwrap();
        src.reset().unwrap();
        assert_eq!(drain(&mut src), first);
        // reset mid-pass restarts
        src.reset().unwrap();
        src.next_chunk().unwrap();
        src.reset().unwrap();
        assert_eq!(drain(&mut src), first);
    }

    #[test]
    fn csv_parse_error_names_row_and_column() {
        let text = "y,a\n1,2\n0,abc\n";
        let mut src =
            CsvSource::from_reader(std::io::Cursor::new(text), ChunkSchema::new("y", ["a"]), 10)
                .unwrap();
        match src.next_chunk() {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stream_cannot_rewind() {
        let text = "y,a\n1,2\n0,3\n";
        let mut src =
            CsvSource::from_reader(std::io::Cursor::new(text), ChunkSchema::new("y", ["a"]), 1)
                .unwrap();
        assert!(!src.is_rewindable());
        src.reset().unwrap();
        src.next_chunk().unwrap();
        assert!(matches!(src.reset(), Err(Error::NotRewindable)));
    }

    #[test]
    fn count_rows_on_unknown_length() {
        let text = "y,a\n1,2\n0,3\n1,1\n";
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, text).unwrap();
        let mut src = CsvSource::open(&path, ChunkSchema::new("y", ["a"]), 2).unwrap();
        assert_eq!(count_rows(&mut src).unwrap(), 3);
        assert_eq!(src.next_chunk().unwrap().unwrap().row_offset(), 0);
    }
}
