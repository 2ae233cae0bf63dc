//! The `train` roles: dealer, the two computing parties, and both parties in one process.

use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::Args;
use log::info;
use securelr::engine::local_seed;
use securelr::randomness::{
    seed_from_u64, serve_party, CorrelatedSource, DealerSource, RandomnessStream, RemoteSource, StreamHeader,
};
use securelr::training::{train_secure, training_requests, with_slack};
use securelr::transport::{handshake, local_pair, Channel, Frame, Hello, MsgType, TcpChannel, PROTOCOL_VERSION};
use securelr::{
    Dealer, Error, FixedPointParams, RingWord, Role, Seed, Session, ShareFile, ShareMatrix, TrainingConfig,
    Transcript,
};

use crate::files::{open_decoded, params_of, read_share, resolve_input, share_path, write_share, write_weights};
use crate::{emit, with_word, CliError, CliResult, ParamArgs, PartyRole};

/// Spare randomness the dealer adds beyond the exact plan.
const SLACK: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RandomnessMode {
    Online,
    File(PathBuf),
}

fn parse_randomness(s: &str) -> Result<RandomnessMode, String> {
    match s {
        "online" => Ok(RandomnessMode::Online),
        _ => match s.strip_prefix("file:") {
            Some(p) if !p.is_empty() => Ok(RandomnessMode::File(PathBuf::from(p))),
            _ => Err(format!("expected online or file:PATH, found {s}")),
        },
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub role: PartyRole,
    /// Address to listen on (alice: for bob and the dealer; bob: for the dealer).
    #[arg(long)]
    pub listen: Option<String>,
    /// Address to connect to (bob: alice; ti: alice, then bob).
    #[arg(long)]
    pub peer: Vec<String>,
    /// Share file, or a prefix resolved as PREFIX.<role>.shr. The dealer reads only its shape.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Prefix for weight-share output: PREFIX.<role>.shr.
    #[arg(long)]
    pub shares_out: Option<PathBuf>,
    /// Decoded weights as CSV (local role only).
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
    /// Learning rate η.
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for elementwise work (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// `online` (streamed by the dealer) or `file:PREFIX` (PREFIX.<role>.crn).
    #[arg(long, default_value = "online", value_parser = parse_randomness)]
    pub randomness: RandomnessMode,
    /// Dealer only, without --data: examples.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Dealer only, without --data: weights, including the bias.
    #[arg(long)]
    pub cols: Option<usize>,
    /// Seconds to keep retrying refused connections.
    #[arg(long, default_value_t = 30.0)]
    pub connect_timeout: f64,
    #[command(flatten)]
    pub params: ParamArgs,
}

impl TrainArgs {
    fn seed(&self) -> Seed {
        seed_from_u64(self.seed)
    }

    fn patience(&self) -> Duration {
        Duration::from_secs_f64(self.connect_timeout.max(0.0))
    }

    fn need<'a>(&self, v: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
        v.as_deref()
            .ok_or_else(|| CliError::Usage(format!("--role {:?} needs --{flag}", self.role).to_lowercase()))
    }
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    if args.weights_out.is_some() && args.role != PartyRole::Local {
        return Err(CliError::Usage("--weights-out needs --role local; use reconstruct otherwise".into()));
    }
    match args.role {
        PartyRole::Ti => dealer(args),
        PartyRole::Alice => party(args, Role::A),
        PartyRole::Bob => party(args, Role::B),
        PartyRole::Local => local(args),
    }
}

/// Training inputs of one party: the feature matrix and the label column.
struct Inputs {
    params: FixedPointParams,
    rows: usize,
    cols: usize,
    x: Vec<u64>,
    t: Vec<u64>,
}

fn load_inputs(path: &Path) -> CliResult<Inputs> {
    let f = read_share(path)?;
    if f.cols < 2 {
        return Err(CliError::Core(Error::Format(format!(
            "{}: need at least one feature column and the label",
            path.display()
        ))));
    }
    let params = params_of(&f)?;
    let cols = f.cols - 1;
    let mut x = Vec::with_capacity(f.rows * cols);
    let mut t = Vec::with_capacity(f.rows);
    for r in f.values.chunks_exact(f.cols) {
        x.extend_from_slice(&r[..cols]);
        t.push(r[cols]);
    }
    Ok(Inputs { params, rows: f.rows, cols, x, t })
}

fn config(args: &TrainArgs, p: FixedPointParams) -> CliResult<TrainingConfig> {
    Ok(TrainingConfig::new(args.lr, args.iterations, p)?)
}

fn plan(rows: usize, cols: usize, args: &TrainArgs, p: &FixedPointParams) -> Vec<securelr::Request> {
    with_slack(training_requests(rows, cols, args.iterations, p), SLACK)
}

fn dealer(args: &TrainArgs) -> CliResult<()> {
    let (p, rows, cols) = match (&args.data, args.rows, args.cols) {
        (Some(d), _, _) => {
            let f = read_share(&resolve_input(d, Role::A))?;
            (params_of(&f)?, f.rows, f.cols.saturating_sub(1))
        }
        (None, Some(r), Some(c)) => (args.params.params()?, r, c),
        _ => return Err(CliError::Usage("--role ti needs --data or both --rows and --cols".into())),
    };
    let plan = plan(rows, cols, args, &p);
    let start = Instant::now();
    match &args.randomness {
        RandomnessMode::File(prefix) => {
            let streams = RandomnessStream::generate(&mut Dealer::new(args.seed(), p.ring_bits)?, &plan)?;
            for (role, s) in [Role::A, Role::B].into_iter().zip(&streams) {
                let path = share_path(prefix, role, "crn");
                s.write(&path)?;
                info!("wrote {}", path.display());
            }
        }
        RandomnessMode::Online => {
            if args.peer.len() != 2 {
                return Err(CliError::Usage("--role ti needs --peer ALICE --peer BOB".into()));
            }
            let results: Vec<CliResult<()>> = std::thread::scope(|scope| {
                let handles: Vec<_> = [Role::A, Role::B]
                    .into_iter()
                    .zip(&args.peer)
                    .map(|(role, addr)| {
                        let plan = &plan;
                        scope.spawn(move || -> CliResult<()> {
                            let mut ch = TcpChannel::connect_with_patience(addr.as_str(), args.patience())?;
                            identify(&mut ch, "ti")?;
                            serve_party(Dealer::new(args.seed(), p.ring_bits)?, role, plan, &mut ch)?;
                            Ok(())
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("dealer thread panicked")).collect()
            });
            results.into_iter().collect::<CliResult<Vec<()>>>()?;
        }
    }
    emit(&[
        ("role", "ti".into()),
        ("blocks", plan.len().to_string()),
        ("wall_ms", start.elapsed().as_millis().to_string()),
    ]);
    Ok(())
}

fn identify(ch: &mut TcpChannel, who: &str) -> CliResult<()> {
    ch.send((&Frame::new(MsgType::Control, who.as_bytes().to_vec())).into())?;
    Ok(())
}

fn identity(ch: &mut TcpChannel) -> CliResult<String> {
    let f = ch.recv()?.expect(MsgType::Control)?;
    Ok(String::from_utf8_lossy(&f.payload).into_owned())
}

fn bind(args: &TrainArgs) -> CliResult<TcpListener> {
    let addr = args
        .listen
        .as_deref()
        .ok_or_else(|| CliError::Usage("this role needs --listen HOST:PORT".into()))?;
    let l = TcpListener::bind(addr).map_err(Error::from)?;
    emit(&[("listening", l.local_addr().map_err(Error::from)?.to_string())]);
    Ok(l)
}

/// Connections of one computing party: to the other party and, online, to the dealer.
fn connect(args: &TrainArgs, role: Role) -> CliResult<(TcpChannel, Option<TcpChannel>)> {
    let online = args.randomness == RandomnessMode::Online;
    match role {
        Role::A => {
            let listener = bind(args)?;
            let (mut peer, mut ti) = (None, None);
            while peer.is_none() || (online && ti.is_none()) {
                let mut ch = TcpChannel::accept(&listener)?;
                match identity(&mut ch)?.as_str() {
                    "bob" if peer.is_none() => peer = Some(ch),
                    "ti" if online && ti.is_none() => ti = Some(ch),
                    other => return Err(Error::Protocol(format!("unexpected connection from {other:?}")).into()),
                }
            }
            Ok((peer.expect("accepted"), ti))
        }
        Role::B => {
            let listener = if online { Some(bind(args)?) } else { None };
            let addr = args
                .peer
                .first()
                .ok_or_else(|| CliError::Usage("--role bob needs --peer ALICE".into()))?;
            let mut peer = TcpChannel::connect_with_patience(addr.as_str(), args.patience())?;
            identify(&mut peer, "bob")?;
            let ti = match listener {
                Some(l) => {
                    let mut ch = TcpChannel::accept(&l)?;
                    let who = identity(&mut ch)?;
                    if who != "ti" {
                        return Err(Error::Protocol(format!("unexpected connection from {who:?}")).into());
                    }
                    Some(ch)
                }
                None => None,
            };
            Ok((peer, ti))
        }
    }
}

fn check_stream(h: &StreamHeader, role: Role, p: &FixedPointParams) -> CliResult<()> {
    if h.role != role || h.ring_bits != p.ring_bits {
        return Err(Error::Format(format!(
            "randomness is for {} at λ={}, this is {} at λ={}",
            h.role.name(),
            h.ring_bits,
            role.name(),
            p.ring_bits
        ))
        .into());
    }
    Ok(())
}

fn file_source(prefix: &Path, role: Role, p: &FixedPointParams) -> CliResult<RandomnessStream> {
    let path = share_path(prefix, role, "crn");
    let bytes = std::fs::read(&path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    let s = RandomnessStream::from_bytes(&bytes)?;
    check_stream(s.header(), role, p)?;
    Ok(s)
}

fn pool(args: &TrainArgs) -> CliResult<Option<Arc<rayon::ThreadPool>>> {
    match args.threads {
        None => Ok(None),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|p| Some(Arc::new(p)))
            .map_err(|e| CliError::Usage(format!("thread pool: {e}"))),
    }
}

fn session<W: RingWord>(
    role: Role,
    p: &FixedPointParams,
    ch: Box<dyn Channel>,
    src: Box<dyn CorrelatedSource>,
    args: &TrainArgs,
    pool: &Option<Arc<rayon::ThreadPool>>,
) -> CliResult<Session<W>> {
    let mut s = Session::new(role, p.ring()?, ch, src, local_seed(&args.seed(), role));
    if let Some(pool) = pool {
        s = s.with_pool(pool.clone());
    }
    Ok(s)
}

fn train_one<W: RingWord>(s: &mut Session<W>, inp: &Inputs, cfg: &TrainingConfig) -> CliResult<Vec<u64>> {
    let x = ShareMatrix::new(s.role(), inp.rows, inp.cols, inp.x.iter().map(|&v| W::from_word(v)).collect())?;
    let t: Vec<W> = inp.t.iter().map(|&v| W::from_word(v)).collect();
    let w = train_secure(s, &x, &t, cfg)?;
    Ok(w.into_iter().map(|v| v.to_word()).collect())
}

fn weight_file(p: &FixedPointParams, w: Vec<u64>) -> ShareFile {
    ShareFile {
        ring_bits: p.ring_bits,
        frac_bits: p.frac_bits,
        int_bits: p.int_bits,
        rows: w.len(),
        cols: 1,
        values: w,
    }
}

fn report(role: &str, inp: &Inputs, iterations: usize, start: Instant, t: &Transcript) {
    emit(&[
        ("role", role.into()),
        ("rows", inp.rows.to_string()),
        ("cols", inp.cols.to_string()),
        ("iterations", iterations.to_string()),
        ("wall_ms", start.elapsed().as_millis().to_string()),
        ("rounds", t.rounds.to_string()),
        ("bytes_sent", t.bytes_sent.to_string()),
        ("bytes_received", t.bytes_received.to_string()),
        ("ring_mults", t.ring_mults.to_string()),
        ("bit_mults", t.bit_mults.to_string()),
        ("secure_mults", t.secure_mults().to_string()),
        ("transcript", t.digest_hex()),
    ]);
}

fn phase<T>(what: &str, r: CliResult<T>) -> CliResult<T> {
    if let Err(e) = &r {
        eprintln!("securelr: {what} failed: {e}");
    }
    r
}

fn party(args: &TrainArgs, role: Role) -> CliResult<()> {
    let data = args.need(&args.data, "data")?;
    let inp = phase("loading shares", load_inputs(&resolve_input(data, role)))?;
    let p = inp.params;
    let cfg = config(args, p)?;
    let pool = pool(args)?;
    let start = Instant::now();

    let (mut peer, ti) = phase("connecting", connect(args, role))?;
    let (src, header): (Box<dyn CorrelatedSource>, StreamHeader) = match (&args.randomness, ti) {
        (RandomnessMode::File(prefix), _) => {
            let s = file_source(prefix, role, &p)?;
            let h = s.header().clone();
            (Box::new(s), h)
        }
        (RandomnessMode::Online, Some(ti)) => {
            let s = phase("receiving randomness", RemoteSource::start(ti).map_err(CliError::from))?;
            let h = s.header().clone();
            check_stream(&h, role, &p)?;
            (Box::new(s), h)
        }
        (RandomnessMode::Online, None) => unreachable!("online parties always connect to the dealer"),
    };
    let hello = Hello {
        version: PROTOCOL_VERSION,
        ring_bits: p.ring_bits,
        frac_bits: p.frac_bits,
        int_bits: p.int_bits,
        rows: inp.rows as u64,
        cols: inp.cols as u64,
        iterations: args.iterations as u64,
        session_id: header.session_id,
        commitment: header.commitment,
    };
    phase("handshake", handshake(&mut peer, &hello).map_err(CliError::from))?;

    let (w, transcript) = with_word!(p.ring_bits, W => {
        let mut s = session::<W>(role, &p, Box::new(peer), src, args, &pool)?;
        let w = phase("training", train_one(&mut s, &inp, &cfg))?;
        Ok::<_, CliError>((w, s.transcript().clone()))
    })?;
    if let Some(prefix) = &args.shares_out {
        write_share(&share_path(prefix, role, "shr"), &weight_file(&p, w))?;
    }
    report(role.name(), &inp, args.iterations, start, &transcript);
    Ok(())
}

fn local(args: &TrainArgs) -> CliResult<()> {
    let data = args.need(&args.data, "data")?;
    let inputs = [Role::A, Role::B].map(|r| load_inputs(&resolve_input(data, r)));
    let [ia, ib] = inputs;
    let (ia, ib) = (ia?, ib?);
    let p = ia.params;
    if (ib.params, ib.rows, ib.cols) != (p, ia.rows, ia.cols) {
        return Err(Error::Format("the two share files disagree on parameters or shape".into()).into());
    }
    let cfg = config(args, p)?;
    let pool = pool(args)?;
    let start = Instant::now();
    let sources: [Box<dyn CorrelatedSource>; 2] = match &args.randomness {
        RandomnessMode::Online => [Role::A, Role::B].map(|role| -> Box<dyn CorrelatedSource> {
            Box::new(DealerSource::new(
                Dealer::new(args.seed(), p.ring_bits).expect("validated ring width"),
                role,
            ))
        }),
        RandomnessMode::File(prefix) => [
            Box::new(file_source(prefix, Role::A, &p)?),
            Box::new(file_source(prefix, Role::B, &p)?),
        ],
    };

    let results = with_word!(p.ring_bits, W => {
        let (ca, cb) = local_pair();
        let [srca, srcb] = sources;
        let mut sa = session::<W>(Role::A, &p, Box::new(ca), srca, args, &pool)?;
        let mut sb = session::<W>(Role::B, &p, Box::new(cb), srcb, args, &pool)?;
        Ok::<_, CliError>(std::thread::scope(|scope| {
            let hb = scope.spawn(|| train_one(&mut sb, &ib, &cfg).map(|w| (w, sb.transcript().clone())));
            let ra = train_one(&mut sa, &ia, &cfg).map(|w| (w, sa.transcript().clone()));
            [ra, hb.join().expect("bob panicked")]
        }))
    })?;
    let [ra, rb] = results;
    let ((wa, ta), (wb, tb)) = (phase("training", ra)?, phase("training", rb)?);
    if ta.digest() != tb.digest() {
        return Err(Error::Protocol("party transcripts differ".into()).into());
    }
    let (fa, fb) = (weight_file(&p, wa), weight_file(&p, wb));
    if let Some(prefix) = &args.shares_out {
        write_share(&share_path(prefix, Role::A, "shr"), &fa)?;
        write_share(&share_path(prefix, Role::B, "shr"), &fb)?;
    }
    if let Some(out) = &args.weights_out {
        write_weights(Some(out), &open_decoded(&fa, &fb)?)?;
    }
    report("local", &ia, args.iterations, start, &ta);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn randomness_flag() {
        assert_eq!(parse_randomness("online").unwrap(), RandomnessMode::Online);
        assert_eq!(parse_randomness("file:r/x").unwrap(), RandomnessMode::File("r/x".into()));
        assert!(parse_randomness("file:").is_err());
        assert!(parse_randomness("tcp").is_err());
    }
}
