//! File formats: edge lists, label CSVs, and feature CSVs.
//!
//! * Edge list: one `u v` pair per line, 0-based ids, whitespace-separated,
//!   lines starting with `#` ignored.
//! * Labels: CSV with header `node,label`; node ids must cover 0..n-1.
//! * Features: CSV without header, one row of floats per node.

use std::path::Path;

use ndarray::Array2;

use crate::{Error, Result};

fn parse_err(file: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        reason: reason.into(),
    }
}

pub fn parse_edge_list(text: &str, file: &str) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let u = parts
            .next()
            .ok_or_else(|| parse_err(file, line_no, "missing source node"))?;
        let v = parts
            .next()
            .ok_or_else(|| parse_err(file, line_no, "missing target node"))?;
        if parts.next().is_some() {
            return Err(parse_err(file, line_no, "expected exactly two node ids"));
        }
        let u: usize = u
            .parse()
            .map_err(|_| parse_err(file, line_no, format!("invalid node id '{u}'")))?;
        let v: usize = v
            .parse()
            .map_err(|_| parse_err(file, line_no, format!("invalid node id '{v}'")))?;
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn parse_labels_csv(text: &str, file: &str) -> Result<Vec<usize>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(file, 1, "empty label file"))?;
    let normalized: String = header
        .split(',')
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(",");
    if normalized != "node,label" {
        return Err(parse_err(
            file,
            1,
            format!("expected header 'node,label', got '{header}'"),
        ));
    }
    let mut pairs = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let node = parts
            .next()
            .ok_or_else(|| parse_err(file, line_no, "missing node id"))?;
        let label = parts
            .next()
            .ok_or_else(|| parse_err(file, line_no, "missing label"))?;
        let node: usize = node
            .trim()
            .parse()
            .map_err(|_| parse_err(file, line_no, format!("invalid node id '{node}'")))?;
        let label: usize = label
            .trim()
            .parse()
            .map_err(|_| parse_err(file, line_no, format!("invalid label '{label}'")))?;
        pairs.push((node, label, line_no));
    }
    let n = pairs.len();
    let mut labels = vec![usize::MAX; n];
    for (node, label, line_no) in pairs {
        if node >= n {
            return Err(parse_err(
                file,
                line_no,
                format!("node id {node} out of range for {n} rows"),
            ));
        }
        if labels[node] != usize::MAX {
            return Err(parse_err(file, line_no, format!("duplicate node id {node}")));
        }
        labels[node] = label;
    }
    Ok(labels)
}

pub fn parse_features_csv(text: &str, file: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(file, line_no, format!("invalid float '{tok}'")))
            })
            .collect();
        let row = row?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    file,
                    line_no,
                    format!("expected {} columns, got {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(file, 1, "empty feature file"));
    }
    let d = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| parse_err(file, 1, e.to_string()))
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_string(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn edges_to_string(edges: &[(usize, usize)]) -> String {
    let mut out = String::from("# u v\n");
    for (u, v) in edges {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn labels_to_string(labels: &[usize]) -> String {
    let mut out = String::from("node,label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

pub fn features_to_string(features: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in features.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
