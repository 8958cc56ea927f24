//! Shared text-format helpers for the dataset, transfer-set and model files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

/// Line-numbered view of a text file (1-based numbers).
pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next line, or a parse error naming the missing line.
    pub(crate) fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => parse_err(self.last + 1, format!("unexpected end of file, expected {what}")),
        }
    }

    /// Next non-blank line, if any.
    pub(crate) fn next_content(&mut self) -> Option<(usize, &'a str)> {
        let (i, l) = self.inner.by_ref().find(|(_, l)| !l.trim().is_empty())?;
        self.last = i + 1;
        Some((i + 1, l))
    }

    /// Remaining lines that are not blank.
    pub(crate) fn trailing_content(&mut self) -> Option<usize> {
        self.inner.by_ref().find(|(_, l)| !l.trim().is_empty()).map(|(i, _)| i + 1)
    }
}

pub(crate) fn expect_magic(lines: &mut Lines<'_>, magic: &str) -> Result<()> {
    let (no, line) = lines.next_line("file header")?;
    if line.trim() != magic {
        return parse_err(no, format!("expected `{magic}`, found `{}`", line.trim()));
    }
    Ok(())
}

/// `#key=value,key=value` header line.
pub(crate) fn parse_header(no: usize, line: &str) -> Result<BTreeMap<String, String>> {
    let Some(body) = line.trim().strip_prefix('#') else {
        return parse_err(no, "header line must start with `#`");
    };
    let mut out = BTreeMap::new();
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let Some((k, v)) = part.split_once('=') else {
            return parse_err(no, format!("malformed header field `{part}`"));
        };
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub(crate) fn header_usize(h: &BTreeMap<String, String>, key: &str, no: usize) -> Result<usize> {
    match h.get(key).map(|v| v.parse::<usize>()) {
        Some(Ok(v)) => Ok(v),
        Some(Err(_)) => parse_err(no, format!("`{key}` is not a non-negative integer")),
        None => parse_err(no, format!("missing `{key}`")),
    }
}

pub(crate) fn header_str<'h>(h: &'h BTreeMap<String, String>, key: &str, no: usize) -> Result<&'h str> {
    match h.get(key) {
        Some(v) => Ok(v),
        None => parse_err(no, format!("missing `{key}`")),
    }
}

/// Split a comma-separated row into exactly `expect` fields.
pub(crate) fn split_row<'a>(no: usize, line: &'a str, expect: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.trim().split(',').collect();
    if fields.len() != expect {
        return parse_err(no, format!("expected {expect} values, found {}", fields.len()));
    }
    Ok(fields)
}

pub(crate) fn parse_scalar<F: Scalar>(no: usize, field: &str) -> Result<F> {
    match F::parse_exact(field) {
        Some(v) if v.is_finite() => Ok(v),
        _ => parse_err(no, format!("`{field}` is not a finite number")),
    }
}

pub(crate) fn push_row<F: Scalar>(out: &mut String, values: impl IntoIterator<Item = F>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        out.push_str(&v.write_exact());
        first = false;
    }
}

/// Write `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
        _ => Error::Io(e),
    })
}
