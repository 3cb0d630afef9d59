//! Dense ARFF reader in the Mulan flavor: numeric features, nominal `{0,1}`
//! labels, and label names given either as a trailing count or in an XML
//! manifest.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{LabelSpec, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
enum AttrType {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone)]
struct Attribute {
    name: String,
    kind: AttrType,
}

pub fn load_arff(path: &Path, labels: &LabelSpec) -> Result<MultiLabelDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let label_names = match labels {
        LabelSpec::Count(n) => LabelSelection::Trailing(*n),
        LabelSpec::Manifest(xml) => LabelSelection::Named(read_label_manifest(xml)?),
    };
    parse_arff(&text, &label_names)
}

pub(crate) enum LabelSelection {
    Trailing(usize),
    Named(Vec<String>),
}

pub(crate) fn parse_arff(text: &str, selection: &LabelSelection) -> Result<MultiLabelDataset> {
    let mut attributes = Vec::new();
    let mut lines = text.lines().enumerate();
    let mut saw_relation = false;
    let mut saw_data = false;

    for (idx, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let (keyword, rest) = split_keyword(line);
        match keyword.to_ascii_lowercase().as_str() {
            "@relation" => saw_relation = true,
            "@attribute" => attributes.push(parse_attribute(rest, idx + 1)?),
            "@data" => {
                saw_data = true;
                break;
            }
            _ => {
                return Err(Error::Arff {
                    line: idx + 1,
                    message: format!("unexpected header line {line:?}"),
                })
            }
        }
    }
    if !saw_relation {
        return Err(arff_err(0, "missing @relation"));
    }
    if !saw_data {
        return Err(arff_err(0, "missing @data section"));
    }

    let label_idx = resolve_labels(&attributes, selection)?;
    let is_label: Vec<bool> = {
        let mut v = vec![false; attributes.len()];
        for &j in &label_idx {
            v[j] = true;
        }
        v
    };
    let feature_idx: Vec<usize> = (0..attributes.len()).filter(|&j| !is_label[j]).collect();
    if feature_idx.is_empty() {
        return Err(arff_err(0, "no feature attributes"));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0usize;
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lineno = idx + 1;
        if line.starts_with('{') {
            return Err(arff_err(lineno, "sparse ARFF rows are not supported"));
        }
        let fields = split_fields(line);
        if fields.len() != attributes.len() {
            return Err(arff_err(
                lineno,
                &format!("expected {} values, found {}", attributes.len(), fields.len()),
            ));
        }
        for &j in &feature_idx {
            features.push(feature_value(&attributes[j], &fields[j], lineno)?);
        }
        for &j in &label_idx {
            labels.push(label_value(&attributes[j], &fields[j], lineno)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidDataset("ARFF data section is empty".into()));
    }

    MultiLabelDataset::new(
        Matrix::from_vec(n, feature_idx.len(), features)?,
        Matrix::from_vec(n, label_idx.len(), labels)?,
        feature_idx.iter().map(|&j| attributes[j].name.clone()).collect(),
        label_idx.iter().map(|&j| attributes[j].name.clone()).collect(),
    )
}

fn resolve_labels(attributes: &[Attribute], selection: &LabelSelection) -> Result<Vec<usize>> {
    match selection {
        LabelSelection::Trailing(count) => {
            if *count == 0 {
                return Err(Error::InvalidArgument("label count must be at least 1".into()));
            }
            if attributes.len() < count + 1 {
                return Err(arff_err(
                    0,
                    &format!(
                        "{} attributes cannot hold {count} labels plus a feature",
                        attributes.len()
                    ),
                ));
            }
            Ok((attributes.len() - count..attributes.len()).collect())
        }
        LabelSelection::Named(names) => {
            let by_name: HashMap<&str, usize> = attributes
                .iter()
                .enumerate()
                .map(|(j, a)| (a.name.as_str(), j))
                .collect();
            let mut idx = names
                .iter()
                .map(|name| {
                    by_name.get(name.as_str()).copied().ok_or_else(|| {
                        Error::LabelManifest(format!("label {name:?} is not an ARFF attribute"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if names.is_empty() {
                return Err(Error::LabelManifest("manifest lists no labels".into()));
            }
            // Labels keep their attribute order regardless of manifest order.
            idx.sort_unstable();
            idx.dedup();
            Ok(idx)
        }
    }
}

fn feature_value(attr: &Attribute, raw: &str, line: usize) -> Result<f64> {
    if raw == "?" {
        return Err(arff_err(line, &format!("missing value for {:?}", attr.name)));
    }
    match &attr.kind {
        AttrType::Numeric => raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| arff_err(line, &format!("bad numeric value {raw:?} for {:?}", attr.name))),
        AttrType::Nominal(values) => values
            .iter()
            .position(|v| v == raw)
            .map(|p| p as f64)
            .ok_or_else(|| arff_err(line, &format!("undeclared value {raw:?} for {:?}", attr.name))),
    }
}

fn label_value(attr: &Attribute, raw: &str, line: usize) -> Result<u8> {
    if raw == "?" {
        return Err(arff_err(line, &format!("missing value for label {:?}", attr.name)));
    }
    let bit = match raw {
        "0" => Some(0),
        "1" => Some(1),
        _ => match attr.kind {
            AttrType::Numeric => match raw.parse::<f64>() {
                Ok(v) if v == 0.0 => Some(0),
                Ok(v) if v == 1.0 => Some(1),
                _ => None,
            },
            AttrType::Nominal(_) => None,
        },
    };
    bit.ok_or_else(|| Error::NonBinaryLabel {
        label: attr.name.clone(),
        value: raw.to_string(),
    })
}

fn parse_attribute(rest: &str, line: usize) -> Result<Attribute> {
    let (name, tail) = take_token(rest);
    let name = name.ok_or_else(|| arff_err(line, "attribute without a name"))?;
    let tail = tail.trim();
    let kind = if tail.starts_with('{') {
        let close = tail
            .rfind('}')
            .ok_or_else(|| arff_err(line, "unterminated nominal value list"))?;
        let values = split_fields(&tail[1..close]);
        if values.is_empty() {
            return Err(arff_err(line, "empty nominal value list"));
        }
        AttrType::Nominal(values)
    } else {
        match tail.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => AttrType::Numeric,
            other => {
                return Err(arff_err(
                    line,
                    &format!("unsupported attribute type {other:?} for {name:?}"),
                ))
            }
        }
    };
    Ok(Attribute { name, kind })
}

fn split_keyword(line: &str) -> (&str, &str) {
    match line.find(char::is_whitespace) {
        Some(pos) => (&line[..pos], line[pos..].trim_start()),
        None => (line, ""),
    }
}

/// Reads one possibly quoted token and returns it with the remaining text.
fn take_token(s: &str) -> (Option<String>, &str) {
    let s = s.trim_start();
    let mut chars = s.char_indices();
    match chars.next() {
        None => (None, ""),
        Some((_, q @ ('\'' | '"'))) => {
            let mut out = String::new();
            let mut escaped = false;
            for (i, c) in chars {
                if escaped {
                    out.push(c);
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    return (Some(out), &s[i + 1..]);
                } else {
                    out.push(c);
                }
            }
            (Some(out), "")
        }
        Some(_) => {
            let end = s
                .find(|c: char| c.is_whitespace() || c == '{')
                .unwrap_or(s.len());
            (Some(s[..end].to_string()), &s[end..])
        }
    }
}

/// Splits a comma-separated list, honoring single and double quotes.
fn split_fields(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in line.chars() {
        if escaped {
            cur.push(c);
            escaped = false;
            continue;
        }
        match (quote, c) {
            (_, '\\') => escaped = true,
            (Some(q), c) if c == q => quote = None,
            (Some(_), c) => cur.push(c),
            (None, '\'' | '"') => quote = Some(c),
            (None, ',') => out.push(std::mem::take(&mut cur).trim().to_string()),
            (None, c) => cur.push(c),
        }
    }
    let last = cur.trim().to_string();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}

/// Label names from a Mulan XML manifest (`<label name="..."/>`, possibly nested).
pub fn read_label_manifest(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_label_manifest(&text)
}

pub(crate) fn parse_label_manifest(xml: &str) -> Result<Vec<String>> {
    let mut reader = Reader::from_str(xml);
    let mut names = Vec::new();
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) | Ok(Event::Empty(e)) if e.local_name().as_ref() == b"label" => {
                let mut found = false;
                for attr in e.attributes() {
                    let attr = attr.map_err(|err| Error::LabelManifest(err.to_string()))?;
                    if attr.key.local_name().as_ref() == b"name" {
                        let value = attr
                            .unescape_value()
                            .map_err(|err| Error::LabelManifest(err.to_string()))?;
                        names.push(value.into_owned());
                        found = true;
                    }
                }
                if !found {
                    return Err(Error::LabelManifest("label element without name".into()));
                }
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(err) => return Err(Error::LabelManifest(err.to_string())),
        }
    }
    Ok(names)
}

fn arff_err(line: usize, message: &str) -> Error {
    Error::Arff {
        line,
        message: message.to_string(),
    }
}
