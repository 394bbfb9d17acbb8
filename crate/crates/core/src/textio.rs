//! Structured-text persistence shared by every artifact.
//!
//! Records are JSON objects, one per line, with field order fixed by the
//! struct declaration and every float written with 17 significant digits so
//! files round-trip bit-exactly and are byte-stable across runs.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::Formatter;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// `serde_json` formatter writing floats as `{:.16e}`. Non-finite values
/// never reach it (they serialize as `null`, which fails to load as a float).
struct SigFig17;

impl Formatter for SigFig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` as one line of JSON.
pub fn to_line<T: Serialize>(value: &T) -> io::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFig17);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Writes `records` to `path`, one per line, creating parent directories.
pub fn write_lines<'a, T, I>(path: &Path, records: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = to_line(record).map_err(|e| Error::io(path, e))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_record<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    write_lines(path, std::iter::once(record))
}

/// Parses one JSON record per non-empty line. Errors name the file, the
/// line, and the path of the offending field.
pub fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(path, n + 1, &line)?);
    }
    Ok(out)
}

pub fn read_record<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut all = read_lines(path)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        n => Err(Error::load(path, "<file>", format!("expected 1 record, found {n}"))),
    }
}

fn parse_line<T: DeserializeOwned>(path: &Path, line_no: usize, line: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(line);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "<record>".to_string() } else { field };
        Error::load(path, field, format!("line {line_no}: {}", e.inner()))
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn short_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
