//! Line handling shared by the sectioned plain-text formats (cross sections,
//! geometry, run configs).

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Line<'a> {
    /// `[name rest...]`, split on whitespace.
    Section(Vec<&'a str>),
    Content(&'a str),
}

/// Non-blank lines with `#` comments stripped, numbered from 1.
pub(crate) fn lines<'a>(text: &'a str, path: &'a Path) -> impl Iterator<Item = Result<(usize, Line<'a>)>> + 'a {
    text.lines().enumerate().filter_map(move |(n, raw)| {
        let line_no = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            return None;
        }
        if let Some(rest) = body.strip_prefix('[') {
            return Some(match rest.strip_suffix(']') {
                Some(inner) if !inner.trim().is_empty() => {
                    Ok((line_no, Line::Section(inner.split_whitespace().collect())))
                }
                _ => Err(Error::parse(path, line_no, format!("malformed section header '{body}'"))),
            });
        }
        Some(Ok((line_no, Line::Content(body))))
    })
}

/// Splits `key = value` or `key value`.
pub(crate) fn key_value(body: &str) -> (&str, &str) {
    if let Some((k, v)) = body.split_once('=') {
        (k.trim(), v.trim())
    } else {
        match body.split_once(char::is_whitespace) {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (body, ""),
        }
    }
}

pub(crate) fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(path, line, format!("'{tok}' is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(path, line, format!("'{tok}' is not finite")))
    }
}

pub(crate) fn parse_usize(tok: &str, path: &Path, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(path, line, format!("'{tok}' is not a non-negative integer")))
}

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
