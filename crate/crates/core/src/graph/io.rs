//! Plain-text dataset files.
//!
//! * edges: one `u v` pair of 0-based ids per line, `#` starts a comment line
//! * features: header `n d`, then `n` lines of `d` floats
//! * labels: one non-negative integer per line

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Graph;
use crate::error::{Error, Result};
use crate::numcore::DenseMatrix;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses an edge list, returning `(u, v, line_number)` triples.
pub fn parse_edge_list(path: &Path, text: &str) -> Result<Vec<(usize, usize, usize)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(path, lineno, format!("expected two node ids, got {t:?}")));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(path, lineno, format!("invalid node id {s:?}")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u == v {
            return Err(parse_err(path, lineno, format!("self-loop on node {u}")));
        }
        out.push((u, v, lineno));
    }
    Ok(out)
}

pub fn load_features(path: &Path) -> Result<DenseMatrix<f32>> {
    let text = read(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing `n d` header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| parse_err(path, 1, format!("invalid header {header:?}")))?;
    let [n, d] = dims[..] else {
        return Err(parse_err(path, 1, format!("header must be `n d`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (i, line) in lines {
        if rows == n {
            return Err(parse_err(path, i + 1, format!("more than {n} feature rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f32 = tok
                .parse()
                .map_err(|_| parse_err(path, i + 1, format!("invalid float {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, i + 1, format!("non-finite value {tok:?}")));
            }
            data.push(v);
        }
        if data.len() - before != d {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {d} values, got {}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(path, text.lines().count(), format!("expected {n} rows, got {rows}")));
    }
    DenseMatrix::from_vec(n, d, data)
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, i + 1, format!("invalid label {:?}", l.trim())))
        })
        .collect()
}

/// Writes a matrix in the feature-file format.
pub fn write_features(path: &Path, m: &DenseMatrix<f32>) -> Result<()> {
    let mut s = String::with_capacity(m.rows() * m.cols() * 10 + 16);
    let _ = writeln!(s, "{} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Loads a graph from an edge list plus optional feature and label files.
///
/// The node count is the feature row count when features are given, else the
/// label count, else `max id + 1`.
pub fn load_graph(
    edge_path: &Path,
    feature_path: Option<&Path>,
    label_path: Option<&Path>,
) -> Result<Graph> {
    let raw = parse_edge_list(edge_path, &read(edge_path)?)?;
    let features = feature_path.map(load_features).transpose()?;
    let labels = label_path.map(load_labels).transpose()?;

    let n_nodes = match (&features, &labels) {
        (Some(f), _) => f.rows(),
        (None, Some(l)) => l.len(),
        (None, None) => raw.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0),
    };
    if let Some(&(u, v, line)) = raw.iter().find(|&&(u, v, _)| u.max(v) >= n_nodes) {
        return Err(parse_err(
            edge_path,
            line,
            format!("node id {} out of range for {n_nodes} nodes", u.max(v)),
        ));
    }
    let mut g = Graph::from_edges(n_nodes, raw.into_iter().map(|(u, v, _)| (u, v)))?;
    if let Some(f) = features {
        g = g.with_features(f)?;
    }
    if let Some(l) = labels {
        if l.len() != n_nodes {
            return Err(Error::InvalidArgument(format!(
                "{}: {} labels for {n_nodes} nodes",
                label_path.expect("labels loaded").display(),
                l.len()
            )));
        }
        g = g.with_labels(l)?;
    }
    Ok(g)
}
