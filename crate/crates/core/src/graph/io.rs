use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Graph, VertexId};
use crate::error::{Result, SimError};

const CSC_MAGIC: &[u8; 4] = b"CSCG";
const CSC_VERSION: u32 = 1;

/// Reads a whitespace-separated edge list (`src dst [weight]`, 0-based ids).
///
/// Lines starting with `#` are comments. An optional `n=<int> m=<int>`
/// header fixes the vertex count; otherwise it is `1 + max id`.
pub fn load_edge_list(path: impl AsRef<Path>, weighted: bool) -> Result<Graph> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| SimError::io(path, e))?;
    parse_edge_list(BufReader::new(file), weighted)
}

pub(crate) fn parse_edge_list(reader: impl BufRead, weighted: bool) -> Result<Graph> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges: Vec<(VertexId, VertexId, f32)> = Vec::new();
    let mut max_id: Option<u64> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| SimError::Parse { line: lineno, msg: e.to_string() })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("n=") {
            header = Some(parse_header(line, lineno)?);
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(SimError::Parse {
                line: lineno,
                msg: format!("expected `src dst [weight]`, got `{line}`"),
            });
        }
        let src = parse_id(fields[0], lineno)?;
        let dst = parse_id(fields[1], lineno)?;
        let w = match fields.get(2) {
            Some(f) => {
                let w: f32 = f.parse().map_err(|_| SimError::Parse {
                    line: lineno,
                    msg: format!("bad weight `{f}`"),
                })?;
                if !(w >= 0.0) {
                    return Err(SimError::Validation(format!("line {lineno}: negative weight {w}")));
                }
                w
            }
            None => 1.0,
        };
        max_id = Some(max_id.unwrap_or(0).max(src).max(dst));
        if src > u32::MAX as u64 || dst > u32::MAX as u64 {
            return Err(SimError::Validation(format!("line {lineno}: vertex id exceeds 32 bits")));
        }
        edges.push((src as VertexId, dst as VertexId, w));
    }
    let n = match (header, max_id) {
        (Some((n, m)), _) => {
            if m != edges.len() {
                return Err(SimError::Validation(format!(
                    "header declares m={m} but {} edges were read",
                    edges.len()
                )));
            }
            n
        }
        (None, Some(max)) => max as usize + 1,
        (None, None) => 0,
    };
    Graph::from_edges(n, &edges, weighted)
}

fn parse_header(line: &str, lineno: usize) -> Result<(usize, usize)> {
    let mut n = None;
    let mut m = None;
    for tok in line.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| SimError::Parse {
            line: lineno,
            msg: format!("bad header token `{tok}`"),
        })?;
        let v: usize = v.parse().map_err(|_| SimError::Parse {
            line: lineno,
            msg: format!("bad header value `{tok}`"),
        })?;
        match k {
            "n" => n = Some(v),
            "m" => m = Some(v),
            _ => {
                return Err(SimError::Parse {
                    line: lineno,
                    msg: format!("unknown header key `{k}`"),
                })
            }
        }
    }
    match (n, m) {
        (Some(n), Some(m)) => Ok((n, m)),
        _ => Err(SimError::Parse {
            line: lineno,
            msg: "header needs both n= and m=".into(),
        }),
    }
}

fn parse_id(tok: &str, lineno: usize) -> Result<u64> {
    if let Ok(v) = tok.parse::<i64>() {
        if v < 0 {
            return Err(SimError::Validation(format!("line {lineno}: negative vertex id {v}")));
        }
        return Ok(v as u64);
    }
    tok.parse::<u64>().map_err(|_| SimError::Parse {
        line: lineno,
        msg: format!("bad vertex id `{tok}`"),
    })
}

/// Writes the graph as an edge list with an `n= m=` header, in column order,
/// so that loading it back reproduces the same CSC arrays.
pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| SimError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| SimError::io(path, e);
    writeln!(w, "n={} m={}", g.num_vertices(), g.num_edges()).map_err(io)?;
    for (src, dst, wt) in g.edges() {
        if g.is_weighted() {
            writeln!(w, "{src} {dst} {wt}").map_err(io)?;
        } else {
            writeln!(w, "{src} {dst}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Binary CSC cache: magic, version, n, m, then col_ptr (u64), row_idx (u32)
/// and weights (f32), all little-endian.
pub fn write_csc(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(24 + g.col_ptr().len() * 8 + g.num_edges() * 8);
    buf.extend_from_slice(CSC_MAGIC);
    buf.extend_from_slice(&CSC_VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.num_vertices() as u64).to_le_bytes());
    buf.extend_from_slice(&(g.num_edges() as u64).to_le_bytes());
    g.col_ptr().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    g.row_idx().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    g.edge_weight().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    fs::write(path, buf).map_err(|e| SimError::io(path, e))
}

pub fn read_csc(path: impl AsRef<Path>, weighted: bool) -> Result<Graph> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| SimError::io(path, e))?;
    let bad = |msg: &str| SimError::Validation(format!("{}: {msg}", path.display()));
    if bytes.len() < 24 || &bytes[..4] != CSC_MAGIC {
        return Err(bad("not a CSC cache file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != CSC_VERSION {
        return Err(bad("unsupported CSC version"));
    }
    let n = u64_at(8) as usize;
    let m = u64_at(16) as usize;
    if bytes.len() != 24 + (n + 1) * 8 + m * 8 {
        return Err(bad("truncated CSC cache file"));
    }
    let mut off = 24;
    let col_ptr: Vec<u64> = (0..=n).map(|i| u64_at(off + 8 * i)).collect();
    off += (n + 1) * 8;
    let row_idx: Vec<u32> = (0..m).map(|i| u32_at(off + 4 * i)).collect();
    off += m * 4;
    let weights: Vec<f32> = (0..m).map(|i| f32::from_bits(u32_at(off + 4 * i))).collect();
    Graph::from_csc(col_ptr, row_idx, weights, weighted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Graph> {
        parse_edge_list(text.as_bytes(), false)
    }

    #[test]
    fn small_edge_list() {
        let g = parse("0 1\n0 2\n1 2\n").unwrap();
        assert_eq!(g.col_ptr(), &[0, 0, 1, 3]);
        assert_eq!(g.row_idx(), &[0, 0, 1]);
    }

    #[test]
    fn header_only() {
        let g = parse("# nothing\nn=3 m=0\n").unwrap();
        assert_eq!(g.col_ptr(), &[0, 0, 0, 0]);
        assert!(g.row_idx().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse("0 x\n") {
            Err(SimError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse("# c\n0 1\n1 2 3 4\n") {
            Err(SimError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_id_is_a_validation_error() {
        assert!(matches!(parse("0 -1\n"), Err(SimError::Validation(_))));
    }

    #[test]
    fn header_mismatch_and_range() {
        assert!(parse("n=2 m=5\n0 1\n").is_err());
        assert!(parse("n=2 m=1\n0 4\n").is_err());
    }

    #[test]
    fn duplicates_are_kept() {
        let g = parse("0 1\n0 1\n").unwrap();
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn weighted_parse() {
        let g = parse_edge_list("0 1 2.5\n1 2 3\n".as_bytes(), true).unwrap();
        assert_eq!(g.edge_weight(), &[2.5, 3.0]);
    }

    #[test]
    fn csc_binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csc");
        let g = crate::graph::gen_kronecker(6, 3, 4).unwrap().with_random_weights(9, 4);
        write_csc(&g, &p).unwrap();
        assert_eq!(read_csc(&p, true).unwrap(), g);
        std::fs::write(&p, b"nope").unwrap();
        assert!(read_csc(&p, true).is_err());
    }
}
