//! Single-process timing of batched protocol steps.

use std::time::{Duration, Instant};

use clap::{Args, ValueEnum};
use securelr::activation::batch_activate;
use securelr::bitops::decompose_sliced;
use securelr::randomness::seed_from_u64;
use securelr::{encode, run_pair_with, FixedPointParams, PairOptions, Ring, RingWord};

use crate::{emit_line, with_word, CliError, CliResult, ParamArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Activation,
    Decompose,
    Mul,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "activation")]
    pub kind: BenchKind,
    /// Batch sizes to time.
    #[arg(long, value_delimiter = ',', default_values_t = vec![256usize, 512, 1024, 2048])]
    pub batches: Vec<usize>,
    /// Repetitions per batch size; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub params: ParamArgs,
}

pub struct Sample {
    pub batch: usize,
    pub best: Duration,
    pub rounds: u64,
}

/// Times one protocol call on a fresh session pair; returns Alice's time and rounds.
fn once<W: RingWord>(
    kind: BenchKind,
    p: &FixedPointParams,
    batch: usize,
    seed: u64,
    opts: &PairOptions,
) -> CliResult<(Duration, u64)> {
    let ring: Ring<W> = p.ring()?;
    let x = encode::<W, f64>(0.25, p)?;
    let input = vec![x; batch];
    let (a, _) = run_pair_with(ring, seed_from_u64(seed), opts, |s| {
        let start = Instant::now();
        match kind {
            BenchKind::Activation => drop(batch_activate(s, &input, p)?),
            BenchKind::Decompose => drop(decompose_sliced(s, &input, ring.bits() as usize)?),
            BenchKind::Mul => drop(s.batch_mul(&input, &input)?),
        }
        Ok((start.elapsed(), s.transcript().rounds))
    })?;
    Ok(a)
}

pub fn measure(args: &BenchArgs) -> CliResult<Vec<Sample>> {
    if args.reps == 0 || args.batches.contains(&0) {
        return Err(CliError::Usage("--reps and every batch size must be positive".into()));
    }
    let p = args.params.params()?;
    let opts = PairOptions { threads: args.threads, ..Default::default() };
    let mut out = Vec::with_capacity(args.batches.len());
    for &batch in &args.batches {
        let mut best = Duration::MAX;
        let mut rounds = 0;
        for rep in 0..args.reps {
            let seed = args.seed.wrapping_add(rep as u64);
            let (t, r) = with_word!(p.ring_bits, W => once::<W>(args.kind, &p, batch, seed, &opts))?;
            best = best.min(t);
            rounds = r;
        }
        out.push(Sample { batch, best, rounds });
    }
    Ok(out)
}

pub fn run(args: &BenchArgs) -> CliResult<()> {
    let kind = format!("{:?}", args.kind).to_lowercase();
    for s in measure(args)? {
        let per = s.best.as_secs_f64() * 1e6 / s.batch as f64;
        emit_line(&[
            ("kind", kind.clone()),
            ("batch", s.batch.to_string()),
            ("reps", args.reps.to_string()),
            ("best_ms", format!("{:.3}", s.best.as_secs_f64() * 1e3)),
            ("per_eval_us", format!("{per:.3}")),
            ("rounds", s.rounds.to_string()),
        ]);
    }
    Ok(())
}
