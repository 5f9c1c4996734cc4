//! File formats: sparse operators as matrix-market-style text, states and
//! density matrices as JSON documents, timeseries and Wigner grids as
//! `#`-headed delimited text. All floating-point text uses 9 significant
//! digits so identical runs produce byte-identical files.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fock::{build_space, FockSpace};
use crate::sparse::SparseOperator;
use crate::states::{DensityMatrix, PureState, StateLabel};
use crate::wigner::WignerGrid;
use crate::{Result, SimError};

/// 9-significant-digit scientific notation, the canonical number format for
/// all emitted text.
pub fn fmt_g9(x: f64) -> String {
    format!("{:.8e}", x)
}

/// Rounds to 9 significant digits (used before JSON serialization so the
/// summary document is reproducible byte for byte).
pub fn round_g9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    fmt_g9(x).parse().unwrap()
}

const SPARSE_HEADER: &str = "%%sparse complex";

/// Writes an operator as `%%sparse complex`, a `rows cols nnz` size line,
/// then one `row col re im` entry per line (0-based indices).
pub fn save_operator(path: &Path, op: &SparseOperator) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{SPARSE_HEADER}")?;
    writeln!(f, "{} {} {}", op.dim(), op.dim(), op.nnz())?;
    for (r, c, v) in op.entries() {
        writeln!(f, "{} {} {} {}", r, c, fmt_g9(v.re), fmt_g9(v.im))?;
    }
    Ok(())
}

pub fn load_operator(path: &Path) -> Result<SparseOperator> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or_else(|| SimError::InvalidConfig("empty operator file".into()))??;
    if header.trim() != SPARSE_HEADER {
        return Err(SimError::InvalidConfig(format!(
            "bad operator header {header:?}"
        )));
    }
    let size = lines
        .next()
        .ok_or_else(|| SimError::InvalidConfig("missing size line".into()))??;
    let mut it = size.split_whitespace();
    let parse_usize = |s: Option<&str>| -> Result<usize> {
        s.ok_or_else(|| SimError::InvalidConfig("short size line".into()))?
            .parse()
            .map_err(|e| SimError::InvalidConfig(format!("bad size field: {e}")))
    };
    let rows = parse_usize(it.next())?;
    let cols = parse_usize(it.next())?;
    let nnz = parse_usize(it.next())?;
    if rows != cols {
        return Err(SimError::InvalidConfig(
            "operator must be square".into(),
        ));
    }
    let mut triplets = Vec::with_capacity(nnz);
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(SimError::InvalidConfig(format!(
                "bad operator entry {t:?}"
            )));
        }
        let r: u32 = parts[0]
            .parse()
            .map_err(|e| SimError::InvalidConfig(format!("bad row: {e}")))?;
        let c: u32 = parts[1]
            .parse()
            .map_err(|e| SimError::InvalidConfig(format!("bad col: {e}")))?;
        let re: f64 = parts[2]
            .parse()
            .map_err(|e| SimError::InvalidConfig(format!("bad re: {e}")))?;
        let im: f64 = parts[3]
            .parse()
            .map_err(|e| SimError::InvalidConfig(format!("bad im: {e}")))?;
        if r as usize >= rows || c as usize >= rows {
            return Err(SimError::InvalidConfig(format!(
                "entry ({r},{c}) outside dimension {rows}"
            )));
        }
        triplets.push((r, c, Complex64::new(re, im)));
    }
    if triplets.len() != nnz {
        return Err(SimError::InvalidConfig(format!(
            "size line promises {nnz} entries, found {}",
            triplets.len()
        )));
    }
    Ok(SparseOperator::from_triplets(rows, triplets, false))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpaceDescriptor {
    pub max_occ: Vec<u32>,
    pub total_cap: Option<u32>,
}

impl SpaceDescriptor {
    pub fn of(space: &FockSpace) -> Self {
        SpaceDescriptor {
            max_occ: space.max_occ().to_vec(),
            total_cap: space.total_cap(),
        }
    }

    pub fn build(&self) -> Result<Arc<FockSpace>> {
        build_space(&self.max_occ, self.total_cap)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StateDoc {
    format: String,
    space: SpaceDescriptor,
    /// (basis index, re, im) for every nonzero amplitude.
    amplitudes: Vec<(usize, f64, f64)>,
}

pub const STATE_FORMAT: &str = "ringcat-state";

pub fn save_state(path: &Path, psi: &PureState) -> Result<()> {
    let doc = StateDoc {
        format: STATE_FORMAT.into(),
        space: SpaceDescriptor::of(psi.space()),
        amplitudes: psi
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.re != 0.0 || a.im != 0.0)
            .map(|(i, a)| (i, a.re, a.im))
            .collect(),
    };
    write_json(path, &doc)
}

pub fn load_state(path: &Path) -> Result<PureState> {
    let doc: StateDoc = read_json(path)?;
    if doc.format != STATE_FORMAT {
        return Err(SimError::InvalidConfig(format!(
            "expected a {STATE_FORMAT} document, found {:?}",
            doc.format
        )));
    }
    let space = doc.space.build()?;
    let mut amp = vec![Complex64::new(0.0, 0.0); space.dim()];
    for (i, re, im) in doc.amplitudes {
        if i >= amp.len() {
            return Err(SimError::InvalidConfig(format!(
                "amplitude index {i} outside basis of dimension {}",
                amp.len()
            )));
        }
        amp[i] = Complex64::new(re, im);
    }
    PureState::from_amplitudes(space, amp)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LabelDoc {
    Full { space: SpaceDescriptor },
    Modes { modes: Vec<usize>, dims: Vec<usize> },
}

#[derive(Debug, Serialize, Deserialize)]
struct DensityDoc {
    format: String,
    label: LabelDoc,
    dim: usize,
    /// (row, col, re, im) for every nonzero entry.
    entries: Vec<(usize, usize, f64, f64)>,
}

pub const DENSITY_FORMAT: &str = "ringcat-density";

pub fn save_density(path: &Path, rho: &DensityMatrix) -> Result<()> {
    let label = match &rho.label {
        StateLabel::Full(space) => LabelDoc::Full {
            space: SpaceDescriptor::of(space),
        },
        StateLabel::Modes { modes, dims } => LabelDoc::Modes {
            modes: modes.clone(),
            dims: dims.clone(),
        },
    };
    let d = rho.dim();
    let mut entries = Vec::new();
    for r in 0..d {
        for c in 0..d {
            let v = rho.mat[(r, c)];
            if v.re != 0.0 || v.im != 0.0 {
                entries.push((r, c, v.re, v.im));
            }
        }
    }
    write_json(
        path,
        &DensityDoc {
            format: DENSITY_FORMAT.into(),
            label,
            dim: d,
            entries,
        },
    )
}

pub fn load_density(path: &Path) -> Result<DensityMatrix> {
    let doc: DensityDoc = read_json(path)?;
    if doc.format != DENSITY_FORMAT {
        return Err(SimError::InvalidConfig(format!(
            "expected a {DENSITY_FORMAT} document, found {:?}",
            doc.format
        )));
    }
    let label = match doc.label {
        LabelDoc::Full { space } => StateLabel::Full(space.build()?),
        LabelDoc::Modes { modes, dims } => StateLabel::Modes { modes, dims },
    };
    let mut mat = DMatrix::zeros(doc.dim, doc.dim);
    for (r, c, re, im) in doc.entries {
        if r >= doc.dim || c >= doc.dim {
            return Err(SimError::InvalidConfig(format!(
                "entry ({r},{c}) outside dimension {}",
                doc.dim
            )));
        }
        mat[(r, c)] = Complex64::new(re, im);
    }
    Ok(DensityMatrix { mat, label })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = BufReader::new(std::fs::File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}

/// Delimited text table: `# `-prefixed metadata lines, a `# <col> <col>...`
/// column header, then one row per line at 9 significant digits.
pub fn write_table(
    path: &Path,
    meta: &[String],
    columns: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for m in meta {
        writeln!(f, "# {m}")?;
    }
    writeln!(f, "# {}", columns.join(" "))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_g9(v)).collect();
        writeln!(f, "{}", cells.join(" "))?;
    }
    Ok(())
}

/// Reads a `write_table` document back as (meta lines, column names, rows).
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut meta = Vec::new();
    let mut rows = Vec::new();
    for line in f.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(stripped) = t.strip_prefix('#') {
            meta.push(stripped.trim().to_string());
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            t.split_whitespace().map(str::parse).collect();
        rows.push(row.map_err(|e| SimError::InvalidConfig(format!("bad table row: {e}")))?);
    }
    let columns = meta
        .pop()
        .map(|h| h.split_whitespace().map(String::from).collect())
        .unwrap_or_default();
    Ok((meta, columns, rows))
}

/// Wigner grid as `# x p w` rows, row-major over x then p.
pub fn write_wigner(path: &Path, meta: &[String], grid: &WignerGrid) -> Result<()> {
    let rows = grid.xs.iter().enumerate().flat_map(|(ix, &x)| {
        grid.ps
            .iter()
            .enumerate()
            .map(move |(ip, &p)| (ix, ip, x, p))
            .collect::<Vec<_>>()
    });
    let values: Vec<Vec<f64>> = rows
        .map(|(ix, ip, x, p)| vec![x, p, grid.value(ix, ip)])
        .collect();
    write_table(path, meta, &["x", "p", "w"], values.into_iter())
}

pub fn read_wigner(path: &Path) -> Result<WignerGrid> {
    let (_, columns, rows) = read_table(path)?;
    if columns != ["x", "p", "w"] {
        return Err(SimError::InvalidConfig(format!(
            "expected x p w columns, found {columns:?}"
        )));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut ps: Vec<f64> = Vec::new();
    for row in &rows {
        if row.len() != 3 {
            return Err(SimError::InvalidConfig("short Wigner row".into()));
        }
        if xs.last() != Some(&row[0]) {
            xs.push(row[0]);
        }
        if xs.len() == 1 {
            ps.push(row[1]);
        }
    }
    if xs.len() * ps.len() != rows.len() {
        return Err(SimError::InvalidConfig(
            "Wigner grid is not rectangular".into(),
        ));
    }
    Ok(WignerGrid {
        xs,
        ps,
        w: rows.into_iter().map(|r| r[2]).collect(),
    })
}
