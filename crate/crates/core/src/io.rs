//! File formats: band-matrix and result JSON, `t,u,y` dataset CSV.
//!
//! Every float is written with 17 significant digits.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::maxent::PartialBandMatrix;
use crate::sysid::SysIdDataset;

/// `x` in scientific notation with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Compact JSON formatter printing floats via [`format_f64`]. Non-finite
/// values become `null`.
struct Precise;

impl Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(format_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Precise);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

/// Row-major nested vectors.
pub fn matrix_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::Dimension {
            expected: cols,
            got: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
}

pub fn parse_band(text: &str) -> Result<PartialBandMatrix> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_band(path: &Path) -> Result<PartialBandMatrix> {
    parse_band(&read_text(path)?)
}

pub fn band_to_json(p: &PartialBandMatrix) -> Result<String> {
    to_json(p)
}

const SEED_TAG: &str = "# seed:";

/// CSV text with an optional `# seed: N` line, a `t,u,y` header, and one
/// row per output sample (`t = 1..=N`).
pub fn dataset_to_csv(d: &SysIdDataset) -> String {
    let mut out = String::new();
    if let Some(seed) = d.seed() {
        out.push_str(&format!("{SEED_TAG} {seed}\n"));
    }
    out.push_str("t,u,y\n");
    for (t, (u, y)) in d.u().iter().zip(d.y()).enumerate() {
        out.push_str(&format!("{},{},{}\n", t + 1, format_f64(*u), format_f64(*y)));
    }
    out
}

pub fn write_dataset(path: Option<&Path>, d: &SysIdDataset) -> Result<()> {
    emit(path, &dataset_to_csv(d))
}

pub fn parse_dataset(text: &str) -> Result<SysIdDataset> {
    let mut seed = None;
    let mut body = String::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix(SEED_TAG) {
            let s = rest.trim();
            seed = Some(
                s.parse::<u64>()
                    .map_err(|_| Error::Parse(format!("invalid seed `{s}`")))?,
            );
        } else if !trimmed.starts_with('#') {
            body.push_str(line);
            body.push('\n');
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}` (expected header t,u,y)")))
    };
    let (ti, ui, yi) = (column("t")?, column("u")?, column("y")?);

    let (mut u, mut y) = (Vec::new(), Vec::new());
    let mut last_t: Option<f64> = None;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                Error::Parse(format!("row {}: column `{name}`: invalid number `{raw}`", row + 1))
            })
        };
        let t = field(ti, "t")?;
        if last_t.is_some_and(|prev| t <= prev) {
            return Err(Error::Parse(format!("row {}: column `t` is not increasing", row + 1)));
        }
        last_t = Some(t);
        u.push(field(ui, "u")?);
        y.push(field(yi, "y")?);
    }
    let d = SysIdDataset::new(u, y)?;
    Ok(match seed {
        Some(s) => d.with_seed(s),
        None => d,
    })
}

pub fn read_dataset(path: &Path) -> Result<SysIdDataset> {
    parse_dataset(&read_text(path)?)
}
