//! File formats: binary matrices, text codes, graph edge lists, clustering
//! dumps, flat key=value configs and JSON lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::cluster::{OverlapClustering, Provenance};
use crate::conngraph::ConnectionGraph;
use crate::error::{Error, Result};
use crate::model::{Dictionary, SampleSet, SparseCode};

pub const MATRIX_MAGIC: &[u8; 8] = b"DLMAT001";

/// Bytes in a matrix file with the given shape.
pub fn matrix_file_len(rows: usize, cols: usize) -> u64 {
    8 + 16 + 8 * (rows * cols) as u64
}

pub fn write_matrix_to<W: Write>(
    mut w: W,
    rows: usize,
    cols: usize,
    row_major: &[f64],
) -> Result<()> {
    if row_major.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{} entries for a {rows}x{cols} matrix",
            row_major.len()
        )));
    }
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for x in row_major {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_from<R: Read>(mut r: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Parse("bad matrix magic".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Parse(format!("matrix shape {rows}x{cols} overflows")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * len {
        return Err(Error::Parse(format!(
            "expected {} payload bytes for {rows}x{cols}, found {}",
            8 * len,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, cols, data))
}

pub fn write_matrix(path: &Path, rows: usize, cols: usize, row_major: &[f64]) -> Result<()> {
    write_matrix_to(BufWriter::new(File::create(path)?), rows, cols, row_major)
}

pub fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    read_matrix_from(BufReader::new(File::open(path)?))
}

/// Dictionary as an n x m matrix.
pub fn write_dictionary(path: &Path, d: &Dictionary) -> Result<()> {
    write_matrix(path, d.n(), d.m(), &d.to_row_major())
}

pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    let (rows, cols, data) = read_matrix(path)?;
    Dictionary::from_row_major(rows, cols, &data)
}

/// Samples as a p x n matrix (one sample per row).
pub fn write_samples(path: &Path, s: &SampleSet) -> Result<()> {
    write_matrix(path, s.p(), s.n(), s.as_row_major())
}

pub fn read_samples(path: &Path, codes: Option<Vec<SparseCode>>) -> Result<SampleSet> {
    let (_, cols, data) = read_matrix(path)?;
    SampleSet::new(cols, data, codes)
}

/// One line per code, `index:value` pairs separated by spaces.
pub fn write_codes_to<W: Write>(mut w: W, codes: &[SparseCode]) -> Result<()> {
    for c in codes {
        let line: Vec<String> = c
            .support
            .iter()
            .zip(&c.values)
            .map(|(i, v)| format!("{i}:{v:?}"))
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codes_from<R: BufRead>(r: R) -> Result<Vec<SparseCode>> {
    let mut out = Vec::new();
    for (ln, line) in r.lines().enumerate() {
        let line = line?;
        let mut pairs: Vec<(usize, f64)> = Vec::new();
        for tok in line.split_whitespace() {
            let bad = || Error::Parse(format!("line {}: bad entry '{tok}'", ln + 1));
            let (i, v) = tok.split_once(':').ok_or_else(bad)?;
            pairs.push((i.parse().map_err(|_| bad())?, v.parse().map_err(|_| bad())?));
        }
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse(format!("line {}: repeated index", ln + 1)));
        }
        out.push(SparseCode {
            support: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        });
    }
    Ok(out)
}

pub fn write_codes(path: &Path, codes: &[SparseCode]) -> Result<()> {
    write_codes_to(BufWriter::new(File::create(path)?), codes)
}

pub fn read_codes(path: &Path) -> Result<Vec<SparseCode>> {
    read_codes_from(BufReader::new(File::open(path)?))
}

/// Header `p=<p> tau=<tau>` then one `i j` line per edge with `i < j`.
pub fn write_graph_to<W: Write>(mut w: W, g: &ConnectionGraph) -> Result<()> {
    writeln!(w, "p={} tau={}", g.p(), g.tau())?;
    for (i, j) in g.edges() {
        writeln!(w, "{i} {j}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph_from<R: BufRead>(r: R) -> Result<ConnectionGraph> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty graph file".into()))??;
    let (mut p, mut tau) = (None, None);
    for tok in header.split_whitespace() {
        match tok.split_once('=') {
            Some(("p", v)) => p = v.parse().ok(),
            Some(("tau", v)) => tau = v.parse().ok(),
            _ => {}
        }
    }
    let (Some(p), Some(tau)) = (p, tau) else {
        return Err(Error::Parse(format!("bad graph header '{header}'")));
    };
    let mut edges = Vec::new();
    for line in lines {
        let line = line?;
        let mut it = line.split_whitespace();
        match (it.next(), it.next()) {
            (Some(a), Some(b)) => {
                let bad = || Error::Parse(format!("bad edge line '{line}'"));
                edges.push((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?));
            }
            (None, _) => {}
            _ => return Err(Error::Parse(format!("bad edge line '{line}'"))),
        }
    }
    ConnectionGraph::from_edges(p, tau, &edges)
}

pub fn write_graph(path: &Path, g: &ConnectionGraph) -> Result<()> {
    write_graph_to(BufWriter::new(File::create(path)?), g)
}

pub fn read_graph(path: &Path) -> Result<ConnectionGraph> {
    read_graph_from(BufReader::new(File::open(path)?))
}

/// Each cluster as a provenance comment followed by its sorted members.
pub fn write_clustering_to<W: Write>(mut w: W, c: &OverlapClustering) -> Result<()> {
    for (members, prov) in c.clusters.iter().zip(&c.provenance) {
        match prov {
            Provenance::Tuple(t) if t.len() == 2 => writeln!(w, "# pair {} {}", t[0], t[1])?,
            Provenance::Tuple(t) => {
                let s: Vec<String> = t.iter().map(usize::to_string).collect();
                writeln!(w, "# tuple {}", s.join(" "))?
            }
            Provenance::Coordinate(i) => writeln!(w, "# coordinate {i}")?,
        }
        let s: Vec<String> = members.iter().map(usize::to_string).collect();
        writeln!(w, "{}", s.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_clustering_from<R: BufRead>(r: R) -> Result<OverlapClustering> {
    let mut out = OverlapClustering::default();
    let mut pending: Option<Provenance> = None;
    for line in r.lines() {
        let line = line?;
        let nums = |s: &str| -> Result<Vec<usize>> {
            s.split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Parse(format!("bad index '{t}'")))
                })
                .collect()
        };
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            let (kind, tail) = rest.split_once(' ').unwrap_or((rest, ""));
            pending = Some(match kind {
                "pair" | "tuple" => Provenance::Tuple(nums(tail)?),
                "coordinate" => Provenance::Coordinate(
                    tail.trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad comment '{line}'")))?,
                ),
                _ => return Err(Error::Parse(format!("bad comment '{line}'"))),
            });
        } else {
            let mut members = nums(&line)?;
            members.sort_unstable();
            let prov = pending
                .take()
                .ok_or_else(|| Error::Parse("cluster line without provenance comment".into()))?;
            out.clusters.push(members);
            out.provenance.push(prov);
        }
    }
    Ok(out)
}

pub fn write_clustering(path: &Path, c: &OverlapClustering) -> Result<()> {
    write_clustering_to(BufWriter::new(File::create(path)?), c)
}

pub fn read_clustering(path: &Path) -> Result<OverlapClustering> {
    read_clustering_from(BufReader::new(File::open(path)?))
}

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", ln + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
