//! Matrix Market I/O: `coordinate real symmetric` for `A`, `array real general`
//! for `B`, and a `key=value` sidecar for metadata.

use crate::linalg::{BlockVector, LinalgError, SparseSymOperator};
use crate::problems::ProblemInstance;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MmioError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> MmioError {
    MmioError::Parse { line, msg: msg.into() }
}

/// Lower triangle, 1-based, 17 significant digits.
pub fn write_sparse_sym<W: Write>(mut w: W, op: &SparseSymOperator) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", op.n(), op.n(), op.nnz_lower())?;
    for (i, j, v) in op.lower_triplets() {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    w.flush()
}

/// Column-major dense block.
pub fn write_dense_array<W: Write>(mut w: W, b: &BlockVector) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", b.n(), b.p())?;
    for v in b.as_slice() {
        writeln!(w, "{v:.16e}")?;
    }
    w.flush()
}

pub fn write_meta<W: Write>(mut w: W, meta: &BTreeMap<String, String>) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "{k}={v}")?;
    }
    w.flush()
}

/// Header tokens after `%%MatrixMarket matrix`, lowercased, and the remaining
/// non-comment lines with their 1-based line numbers.
fn read_body<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<(usize, String)>), MmioError> {
    let mut lines = r.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(parse_err(1, "empty file")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, format!("bad header '{header}'")));
    }
    let mut body = Vec::new();
    for (k, l) in lines {
        let l = l?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push((k + 1, t.to_string()));
    }
    Ok((tokens[2..].to_vec(), body))
}

fn numbers<T: std::str::FromStr>(line: usize, text: &str, count: usize) -> Result<Vec<T>, MmioError> {
    let v: Vec<T> = text
        .split_whitespace()
        .map(|t| t.parse::<T>().map_err(|_| parse_err(line, format!("cannot parse '{t}'"))))
        .collect::<Result<_, _>>()?;
    if v.len() != count {
        return Err(parse_err(line, format!("expected {count} fields, found {}", v.len())));
    }
    Ok(v)
}

/// Reads a square real matrix in coordinate format. `symmetric` files are taken
/// as given; `general` files must contain both triangles with equal values.
pub fn read_sparse_sym<R: BufRead>(r: R) -> Result<SparseSymOperator, MmioError> {
    let (kind, body) = read_body(r)?;
    if kind[0] != "coordinate" || kind[1] != "real" && kind[1] != "integer" {
        return Err(parse_err(1, format!("unsupported format {} {}", kind[0], kind[1])));
    }
    let symmetric = match kind[2].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };
    let (size_line, size) = body.first().ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<usize> = numbers(*size_line, size, 3)?;
    if dims[0] != dims[1] {
        return Err(parse_err(*size_line, "matrix must be square"));
    }
    let (n, nnz) = (dims[0], dims[2]);
    if body.len() - 1 != nnz {
        return Err(parse_err(*size_line, format!("declared {nnz} entries, found {}", body.len() - 1)));
    }
    let mut entries: HashMap<(usize, usize), f64> = HashMap::with_capacity(nnz);
    for (line, text) in &body[1..] {
        let f: Vec<&str> = text.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(*line, "expected 'row col value'"));
        }
        let idx = |t: &str| -> Result<usize, MmioError> {
            match t.parse::<usize>() {
                Ok(k) if (1..=n).contains(&k) => Ok(k - 1),
                _ => Err(parse_err(*line, format!("index '{t}' outside 1..={n}"))),
            }
        };
        let (i, j) = (idx(f[0])?, idx(f[1])?);
        let v: f64 = f[2].parse().map_err(|_| parse_err(*line, format!("cannot parse '{}'", f[2])))?;
        if symmetric && i < j {
            return Err(parse_err(*line, "symmetric files store the lower triangle only"));
        }
        *entries.entry((i, j)).or_insert(0.0) += v;
    }
    if !symmetric {
        for (&(i, j), &v) in &entries {
            if entries.get(&(j, i)).copied().unwrap_or(0.0) != v {
                return Err(parse_err(0, format!("general matrix is not symmetric at ({}, {})", i + 1, j + 1)));
            }
        }
    }
    let mut trip: Vec<(usize, usize, f64)> = entries.into_iter().filter(|((i, j), _)| i >= j).map(|((i, j), v)| (i, j, v)).collect();
    trip.sort_by_key(|t| (t.0, t.1));
    Ok(SparseSymOperator::from_triplets(n, &trip)?)
}

pub fn read_dense_array<R: BufRead>(r: R) -> Result<BlockVector, MmioError> {
    let (kind, body) = read_body(r)?;
    if kind[0] != "array" || kind[1] != "real" || kind[2] != "general" {
        return Err(parse_err(1, "expected 'array real general'"));
    }
    let (size_line, size) = body.first().ok_or_else(|| parse_err(2, "missing size line"))?;
    let dims: Vec<usize> = numbers(*size_line, size, 2)?;
    let (n, p) = (dims[0], dims[1]);
    if body.len() - 1 != n * p {
        return Err(parse_err(*size_line, format!("declared {} values, found {}", n * p, body.len() - 1)));
    }
    let data = body[1..]
        .iter()
        .map(|(line, t)| numbers::<f64>(*line, t, 1).map(|v| v[0]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BlockVector::from_column_major(n, p, data))
}

pub fn read_meta<R: BufRead>(r: R) -> Result<BTreeMap<String, String>, MmioError> {
    let mut meta = BTreeMap::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, value) = t.split_once('=').ok_or_else(|| parse_err(k + 1, "expected key=value"))?;
        meta.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(meta)
}

/// Writes `A.mtx`, `B.mtx` and `meta.kv` into `dir`.
pub fn save_instance(dir: &Path, p: &ProblemInstance) -> Result<(), MmioError> {
    std::fs::create_dir_all(dir)?;
    write_sparse_sym(BufWriter::new(File::create(dir.join("A.mtx"))?), &p.operator)?;
    write_dense_array(BufWriter::new(File::create(dir.join("B.mtx"))?), &p.rhs)?;
    write_meta(BufWriter::new(File::create(dir.join("meta.kv"))?), &p.meta)?;
    Ok(())
}

/// Loads `A` and `B` from explicit paths; `meta` is read from `meta.kv` next to `A` when present.
pub fn load_instance(a: &Path, b: &Path) -> Result<ProblemInstance, MmioError> {
    let operator = read_sparse_sym(BufReader::new(File::open(a)?))?;
    let rhs = read_dense_array(BufReader::new(File::open(b)?))?;
    if rhs.n() != operator.n() {
        return Err(parse_err(0, format!("B has {} rows but A is {}x{}", rhs.n(), operator.n(), operator.n())));
    }
    let sidecar = a.with_file_name("meta.kv");
    let meta = if sidecar.exists() {
        read_meta(BufReader::new(File::open(sidecar)?))?
    } else {
        BTreeMap::new()
    };
    Ok(ProblemInstance { operator, rhs, meta })
}
