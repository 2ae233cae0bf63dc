//! CSV ingestion and share splitting for a data owner.

use std::path::{Path, PathBuf};

use clap::Args;
use securelr::randomness::{labelled_rng, seed_from_u64};
use securelr::sharing::split_vec;
use securelr::{encode, Error, FixedPointParams, Ring, RingWord, Role, ShareFile};

use crate::files::{share_path, write_share};
use crate::{emit, with_word, CliError, CliResult, ParamArgs};

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// CSV with a header row; numeric features, label in the last column.
    #[arg(long)]
    pub data: PathBuf,
    /// Output prefix: writes PREFIX.alice.shr and PREFIX.bob.shr.
    #[arg(long)]
    pub shares_out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Column holding a sample id; rows are sorted by it and the column dropped.
    #[arg(long)]
    pub id_column: Option<String>,
    /// The CSV has no label column (a feature-only owner in a vertical partition).
    #[arg(long)]
    pub no_label: bool,
    /// Do not prepend the all-ones column (another owner supplies it).
    #[arg(long)]
    pub no_bias: bool,
    #[command(flatten)]
    pub params: ParamArgs,
}

/// The encoded matrix a data owner contributes, before splitting.
#[derive(Debug, PartialEq)]
pub struct Table {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

fn ingest(row: usize, column: usize, message: impl Into<String>) -> CliError {
    CliError::Core(Error::Ingest { row, column, message: message.into() })
}

/// Reads the CSV into rows of `[1?, features..., label?]`. Rows and columns
/// in errors are 1-based positions in the file, counting the header as row 1.
pub fn read_table(path: &Path, args: &SplitArgs, p: &FixedPointParams) -> CliResult<Table> {
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(name.clone(), std::io::Error::other(e)))?;
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Io(name.clone(), std::io::Error::other(e)))?
        .clone();
    let id_at = match &args.id_column {
        Some(id) => Some(
            headers
                .iter()
                .position(|h| h == id)
                .ok_or_else(|| CliError::Usage(format!("{name}: no column named {id}")))?,
        ),
        None => None,
    };
    let width = headers.len();
    let label_at = if args.no_label { None } else { Some(width - 1) };
    if label_at.is_some() && label_at == id_at {
        return Err(CliError::Usage(format!("{name}: the id column cannot be the label")));
    }

    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| ingest(line, 0, e.to_string()))?;
        if rec.len() != width {
            return Err(ingest(line, rec.len(), format!("expected {width} columns")));
        }
        let mut out = Vec::with_capacity(width + 1);
        if !args.no_bias {
            out.push(1.0);
        }
        let mut label = None;
        let mut id = String::new();
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == id_at {
                id = cell.to_string();
                continue;
            }
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| ingest(line, j + 1, format!("not a number: {cell:?}")))?;
            if Some(j) == label_at {
                if v != 0.0 && v != 1.0 {
                    return Err(ingest(line, j + 1, format!("label must be 0 or 1, found {cell}")));
                }
                label = Some(v);
                continue;
            }
            if let Err(e) = encode::<u64, f64>(v, p) {
                return Err(ingest(line, j + 1, e.to_string()));
            }
            out.push(v);
        }
        out.extend(label);
        rows.push((id, out));
    }
    if id_at.is_some() {
        rows.sort_by(|a, b| a.0.cmp(&b.0));
    }
    let cols = rows.first().map(|r| r.1.len()).unwrap_or(0);
    Ok(Table {
        rows: rows.len(),
        cols,
        values: rows.into_iter().flat_map(|r| r.1).collect(),
    })
}

/// Encodes and splits a table into the two parties' share files.
pub fn share_table<W: RingWord>(t: &Table, p: &FixedPointParams, seed: u64) -> CliResult<[ShareFile; 2]> {
    let ring: Ring<W> = p.ring()?;
    let enc = t.values.iter().map(|&v| encode::<W, f64>(v, p)).collect::<securelr::Result<Vec<W>>>()?;
    let (a, b) = split_vec(&enc, &ring, &mut labelled_rng(&seed_from_u64(seed), "split"));
    let file = |v: Vec<W>| ShareFile {
        ring_bits: p.ring_bits,
        frac_bits: p.frac_bits,
        int_bits: p.int_bits,
        rows: t.rows,
        cols: t.cols,
        values: v.into_iter().map(|w| w.to_word()).collect(),
    };
    Ok([file(a), file(b)])
}

pub fn run(args: &SplitArgs) -> CliResult<()> {
    let p = args.params.params()?;
    let table = read_table(&args.data, args, &p)?;
    let files = with_word!(p.ring_bits, W => share_table::<W>(&table, &p, args.seed))?;
    for (role, f) in [Role::A, Role::B].into_iter().zip(&files) {
        write_share(&share_path(&args.shares_out, role, "shr"), f)?;
    }
    emit(&[("rows", table.rows.to_string()), ("cols", table.cols.to_string())]);
    Ok(())
}
