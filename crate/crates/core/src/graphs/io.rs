//! Plain-text graph files:
//!
//! ```text
//! n 4
//! 0 1
//! 1 2
//! pos 0 0.0 0.0
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Graph;
use crate::error::{Error, Result};

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph(&text, path)
}

pub fn parse_graph(text: &str, origin: &Path) -> Result<Graph> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    let mut positions: Vec<Option<[f64; 2]>> = Vec::new();
    let mut any_pos = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some(count) = n else {
            match fields.as_slice() {
                ["n", v] => {
                    let count = v
                        .parse()
                        .map_err(|_| err(lineno, format!("bad vertex count {v:?}")))?;
                    n = Some(count);
                    positions = vec![None; count];
                    continue;
                }
                _ => return Err(err(lineno, "expected header `n <count>`".into())),
            }
        };
        let index = |s: &str| -> Result<usize> {
            let v: usize = s
                .parse()
                .map_err(|_| err(lineno, format!("bad vertex index {s:?}")))?;
            if v >= count {
                return Err(err(lineno, format!("vertex {v} outside 0..{count}")));
            }
            Ok(v)
        };
        match fields.as_slice() {
            ["pos", i, x, y] => {
                let i = index(i)?;
                let coord = |s: &str| -> Result<f64> {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(lineno, format!("bad coordinate {s:?}")))
                };
                if positions[i].is_some() {
                    return Err(err(lineno, format!("position of vertex {i} given twice")));
                }
                positions[i] = Some([coord(x)?, coord(y)?]);
                any_pos = true;
            }
            [a, b] => {
                let (a, b) = (index(a)?, index(b)?);
                if a == b {
                    return Err(err(lineno, format!("self-loop on vertex {a}")));
                }
                edges.push((a, b));
            }
            _ => return Err(err(lineno, format!("unrecognised line {line:?}"))),
        }
    }

    let n = n.ok_or_else(|| Error::Format {
        path: origin.to_path_buf(),
        msg: "missing `n <count>` header".into(),
    })?;
    let graph = Graph::new(n, edges).map_err(|e| Error::Format {
        path: origin.to_path_buf(),
        msg: e.to_string(),
    })?;
    if !any_pos {
        return Ok(graph);
    }
    let coords: Option<Vec<[f64; 2]>> = positions.into_iter().collect();
    let coords = coords.ok_or_else(|| Error::Format {
        path: origin.to_path_buf(),
        msg: "positions given for some but not all vertices".into(),
    })?;
    graph.with_positions(coords)
}

pub fn write_graph(g: &Graph) -> String {
    let mut out = format!("n {}\n", g.n());
    for &(a, b) in g.edges() {
        let _ = writeln!(out, "{a} {b}");
    }
    if let Some(pos) = g.positions() {
        for (i, p) in pos.iter().enumerate() {
            let _ = writeln!(out, "pos {i} {} {}", p[0], p[1]);
        }
    }
    out
}

pub fn save_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_graph(g)).map_err(|e| Error::io(path, e))
}
