//! File formats: JSON documents and CSV tables with every float written to
//! 17 significant digits, and the GridFunction wire layout.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ExteriorRule, Grid, GridFunction};

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "Infinity".into()
    } else {
        "-Infinity".into()
    }
}

/// `serde_json` formatter that writes floats through [`fmt_f64`]; non-finite
/// floats become `null`.
#[derive(Default)]
struct SigDigits {
    inner: serde_json::ser::PrettyFormatter<'static>,
    pretty: bool,
    compact: serde_json::ser::CompactFormatter,
}

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        if self.pretty { self.inner.begin_array(w) } else { self.compact.begin_array(w) }
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        if self.pretty { self.inner.end_array(w) } else { self.compact.end_array(w) }
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        if self.pretty { self.inner.begin_array_value(w, first) } else { self.compact.begin_array_value(w, first) }
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        if self.pretty { self.inner.end_array_value(w) } else { self.compact.end_array_value(w) }
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        if self.pretty { self.inner.begin_object(w) } else { self.compact.begin_object(w) }
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        if self.pretty { self.inner.end_object(w) } else { self.compact.end_object(w) }
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        if self.pretty { self.inner.begin_object_key(w, first) } else { self.compact.begin_object_key(w, first) }
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        if self.pretty { self.inner.begin_object_value(w) } else { self.compact.begin_object_value(w) }
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        if self.pretty { self.inner.end_object_value(w) } else { self.compact.end_object_value(w) }
    }
}

fn serialize_with<T: Serialize + ?Sized>(value: &T, pretty: bool) -> String {
    let mut buf = Vec::new();
    let fmt = SigDigits {
        pretty,
        ..Default::default()
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .expect("serializing plain data into memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Pretty JSON with 17-digit floats.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    serialize_with(value, true)
}

/// Single-line JSON (for JSON-lines output).
pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> String {
    serialize_with(value, false)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = to_json(value);
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Byte offset of a (1-based) line/column position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Parses JSON, reporting failures with the byte offset of the error.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_json(&text)
}

/// On-disk layout of a [`GridFunction`]:
/// `{n, h, extent, exterior: {kind, A, alpha}, values: [row-major]}`.
#[derive(Serialize, Deserialize)]
pub struct GridFunctionFile {
    pub n: usize,
    pub h: f64,
    pub extent: Vec<(i64, i64)>,
    pub exterior: ExteriorRule,
    pub values: Vec<f64>,
}

impl From<&GridFunction> for GridFunctionFile {
    fn from(u: &GridFunction) -> Self {
        GridFunctionFile {
            n: u.grid.n,
            h: u.grid.h,
            extent: u.grid.extent.clone(),
            exterior: u.exterior.clone(),
            values: u.values.clone(),
        }
    }
}

impl TryFrom<GridFunctionFile> for GridFunction {
    type Error = Error;
    fn try_from(f: GridFunctionFile) -> Result<Self> {
        let grid = Grid::new(f.n, f.h, f.extent)?;
        GridFunction::new(grid, f.values, f.exterior)
    }
}

pub fn grid_function_to_json(u: &GridFunction) -> String {
    to_json(&GridFunctionFile::from(u))
}

pub fn grid_function_from_json(text: &str) -> Result<GridFunction> {
    let file: GridFunctionFile = parse_json(text)?;
    file.try_into()
}

pub fn read_grid_function(path: &Path) -> Result<GridFunction> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    grid_function_from_json(&text)
}

pub fn write_grid_function(path: &Path, u: &GridFunction) -> Result<()> {
    write_json(path, &GridFunctionFile::from(u))
}

/// CSV with columns `x1..xn,u`.
pub fn grid_function_csv(u: &GridFunction) -> String {
    let n = u.grid.n;
    let mut out = String::new();
    let header: Vec<String> = (1..=n).map(|d| format!("x{d}")).chain(["u".into()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (k, v) in u.values.iter().enumerate() {
        let x = u.grid.coord(&u.grid.unflat(k));
        let mut row: Vec<String> = x[..n].iter().map(|c| fmt_f64(*c)).collect();
        row.push(fmt_f64(*v));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Minimal CSV builder for report tables.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let row: Vec<String> = cells.iter().map(Cell::render).collect();
        self.text.push_str(&row.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
    S(String),
    B(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(i) => i.to_string(),
            Cell::U(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-3.0), "-3.0000000000000000e0");
        let back: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
        assert_eq!(to_json_line(&[1.5f64]), "[1.5000000000000000e0]");
    }

    #[test]
    fn parse_error_offset() {
        let text = "{\"n\": 1,\n \"h\": }";
        match grid_function_from_json(text) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_function_json_roundtrip() {
        let g = Grid::cube(2, 0.25, 2).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::power_decay(0.5, 2.0).unwrap(), |x| {
            (x[0] * 3.7).sin() + x[1] / 7.0
        })
        .unwrap();
        let text = grid_function_to_json(&u);
        assert!(text.contains("\"kind\": \"PowerDecay\""));
        assert!(text.contains("\"A\""));
        let back = grid_function_from_json(&text).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn csv_layout() {
        let g = Grid::cube(1, 0.5, 1).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::Zero, |x| x[0]).unwrap();
        let csv = grid_function_csv(&u);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x1,u");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "-5.0000000000000000e-1,-5.0000000000000000e-1");
    }
}
