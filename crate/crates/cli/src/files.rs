//! Share-file naming, reconstruction and merging.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use securelr::sharing::open_vec;
use securelr::{decode, FixedPointParams, Ring, RingWord, Role, ShareFile};

use crate::{with_word, CliError, CliResult};

/// `PREFIX.alice.shr` or `PREFIX.bob.shr`.
pub fn share_path(prefix: &Path, role: Role, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!(".{}.{ext}", role.name()));
    PathBuf::from(s)
}

/// A party's input: the path itself if it exists, otherwise `PATH.<role>.shr`.
pub fn resolve_input(path: &Path, role: Role) -> PathBuf {
    if path.is_file() {
        path.to_path_buf()
    } else {
        share_path(path, role, "shr")
    }
}

pub fn read_share(path: &Path) -> CliResult<ShareFile> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    Ok(ShareFile::from_bytes(&bytes)?)
}

pub fn write_share(path: &Path, f: &ShareFile) -> CliResult<()> {
    std::fs::write(path, f.to_bytes()).map_err(|e| CliError::Io(path.display().to_string(), e))
}

pub fn params_of(f: &ShareFile) -> CliResult<FixedPointParams> {
    Ok(FixedPointParams::new(f.frac_bits, f.int_bits, f.ring_bits)?)
}

/// Writes decoded weights as `index,weight` rows to `path`, or stdout.
pub fn write_weights(path: Option<&Path>, weights: &[f64]) -> CliResult<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::Io(p.display().to_string(), e))?),
        None => Box::new(io::stdout().lock()),
    };
    let name = path.map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into());
    let mut w = csv::Writer::from_writer(sink);
    let io_err = |e: csv::Error| CliError::Io(name.clone(), io::Error::other(e));
    w.write_record(["index", "weight"]).map_err(io_err)?;
    for (i, v) in weights.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v}")]).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Io(name.clone(), e))
}

/// Opens and decodes two share files holding the same matrix.
pub fn open_decoded(a: &ShareFile, b: &ShareFile) -> CliResult<Vec<f64>> {
    a.check_compatible(b)?;
    let p = params_of(a)?;
    with_word!(p.ring_bits, W => {
        let ring: Ring<W> = p.ring()?;
        let to = |f: &ShareFile| f.values.iter().map(|&v| W::from_word(v)).collect::<Vec<W>>();
        Ok(open_vec(&to(a), &to(b), &ring).into_iter().map(|v| decode::<W, f64>(v, &p)).collect())
    })
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Alice's weight-share file.
    pub alice: PathBuf,
    /// Bob's weight-share file.
    pub bob: PathBuf,
    /// CSV destination (default: stdout).
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
}

pub fn reconstruct(args: &ReconstructArgs) -> CliResult<()> {
    let w = open_decoded(&read_share(&args.alice)?, &read_share(&args.bob)?)?;
    write_weights(args.weights_out.as_deref(), &w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    /// Stack examples from horizontally partitioned owners.
    Rows,
    /// Join features from vertically partitioned owners (rows already aligned).
    Cols,
}

#[derive(Args, Debug)]
pub struct MergeArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Output share file.
    #[arg(long)]
    pub out: PathBuf,
    /// Input share files of one party, in order. Training reads the last column as the label.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

pub fn merge(args: &MergeArgs) -> CliResult<()> {
    let files = args.inputs.iter().map(|p| read_share(p)).collect::<CliResult<Vec<_>>>()?;
    let merged = match args.axis {
        Axis::Rows => ShareFile::merge_rows(&files)?,
        Axis::Cols => ShareFile::merge_cols(&files)?,
    };
    write_share(&args.out, &merged)?;
    crate::emit(&[("rows", merged.rows.to_string()), ("cols", merged.cols.to_string())]);
    Ok(())
}
