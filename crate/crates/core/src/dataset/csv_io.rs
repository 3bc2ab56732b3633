use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::SensorStream;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

/// Reads a stream from CSV with header `t,s1..sN[,yU][,yS]`.
///
/// Row indices in parse errors are 1-based data rows (the header is row 0).
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<SensorStream<T>> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<T: Scalar, R: Read>(reader: R) -> Result<SensorStream<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { row: 0, detail: e.to_string() })?.clone();
    let layout = Layout::from_header(&header)?;

    let mut timestamps = Vec::new();
    let mut columns: Vec<Vec<T>> = vec![Vec::new(); layout.n_sensors];
    let mut y_useful = Vec::new();
    let mut y_sensitive = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, detail: e.to_string() })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                detail: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let num = |col: usize| -> Result<f64> {
            let cell = &record[col];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                detail: format!("non-numeric cell `{cell}` in column `{}`", &header[col]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, detail: format!("non-finite value in column `{}`", &header[col]) });
            }
            Ok(v)
        };
        timestamps.push(num(0)?);
        for (s, col) in columns.iter_mut().enumerate() {
            col.push(T::lit(num(1 + s)?));
        }
        if let Some(c) = layout.useful_col {
            y_useful.push(num(c)?);
        }
        if let Some(c) = layout.sensitive_col {
            y_sensitive.push(num(c)?);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::EmptyInput);
    }
    let t = timestamps.len();
    let data: Vec<T> = columns.into_iter().flatten().collect();
    let samples = DenseMatrix::from_row_major(layout.n_sensors, t, data)?;
    let rate_hz = if t >= 2 && timestamps[1] > timestamps[0] { 1.0 / (timestamps[1] - timestamps[0]) } else { 1.0 };
    let mut stream = SensorStream::with_timestamps(samples, timestamps, rate_hz)?;
    if layout.useful_col.is_some() {
        stream = stream.with_useful_labels(y_useful)?;
    }
    if layout.sensitive_col.is_some() {
        stream = stream.with_sensitive_labels(y_sensitive)?;
    }
    Ok(stream)
}

struct Layout {
    n_sensors: usize,
    useful_col: Option<usize>,
    sensitive_col: Option<usize>,
}

impl Layout {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let names: Vec<&str> = header.iter().collect();
        if names.first() != Some(&"t") {
            return Err(Error::Schema("first column must be `t`".into()));
        }
        let mut n_sensors = 0;
        while names.get(1 + n_sensors) == Some(&format!("s{}", n_sensors + 1).as_str()) {
            n_sensors += 1;
        }
        if n_sensors == 0 {
            return Err(Error::Schema("expected sensor columns s1..sN after `t`".into()));
        }
        let mut rest = names[1 + n_sensors..].iter();
        let mut useful_col = None;
        let mut sensitive_col = None;
        let mut next = rest.next();
        if next == Some(&"yU") {
            useful_col = Some(1 + n_sensors);
            next = rest.next();
        }
        if next == Some(&"yS") {
            sensitive_col = Some(1 + n_sensors + usize::from(useful_col.is_some()));
            next = rest.next();
        }
        if let Some(extra) = next {
            return Err(Error::Schema(format!("unexpected column `{extra}`")));
        }
        Ok(Self { n_sensors, useful_col, sensitive_col })
    }
}

/// Writes a stream as CSV; numbers use the shortest representation that
/// parses back to the same `f64`.
pub fn save_csv<T: Scalar>(stream: &SensorStream<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(stream, std::io::BufWriter::new(file))
}

pub fn write_csv<T: Scalar, W: Write>(stream: &SensorStream<T>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let ns = stream.n_sensors();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=ns).map(|s| format!("s{s}")));
    if stream.labels_useful().is_some() {
        header.push("yU".into());
    }
    if stream.labels_sensitive().is_some() {
        header.push("yS".into());
    }
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    wtr.write_record(&header).map_err(csv_err)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for j in 0..stream.len() {
        record.clear();
        record.push(stream.timestamps()[j].to_string());
        for s in 0..ns {
            record.push(stream.samples()[(s, j)].as_f64().to_string());
        }
        if let Some(l) = stream.labels_useful() {
            record.push(l[j].to_string());
        }
        if let Some(l) = stream.labels_sensitive() {
            record.push(l[j].to_string());
        }
        wtr.write_record(&record).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}
