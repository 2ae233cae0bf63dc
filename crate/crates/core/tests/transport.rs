mod common;

use std::io::Write;
use std::net::{TcpListener, TcpStream};

use common::{dealer_sources, run_with_sources, split_all};
use securelr::engine::{local_seed, test_seed};
use securelr::training::{synthetic_dataset, train_secure};
use securelr::transport::{handshake, Channel, Frame, FrameBuf, Hello, MsgType, TcpChannel, PROTOCOL_VERSION};
use securelr::{Error, FixedPointParams, Ring, Role, Session, ShareMatrix, TrainingConfig, TruncationMode};

fn tcp_pair() -> (TcpChannel, TcpChannel) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let h = std::thread::spawn(move || TcpChannel::accept(&listener).unwrap());
    let b = TcpChannel::connect(addr).unwrap();
    (h.join().unwrap(), b)
}

fn hello(ring_bits: u32) -> Hello {
    Hello {
        version: PROTOCOL_VERSION,
        ring_bits,
        frac_bits: 12,
        int_bits: 15,
        rows: 20,
        cols: 9,
        iterations: 50,
        session_id: 7,
        commitment: [3; 32],
    }
}

type Run = (Vec<u64>, [u8; 32], u64);

fn train_toy(channels: Option<(TcpChannel, TcpChannel)>) -> (Run, Run) {
    let data = synthetic_dataset(20, 8, 0.2, 1);
    let cfg = TrainingConfig::new(0.05, 10, FixedPointParams::default()).unwrap();
    let ring = Ring::<u64>::word();
    let (x, t) = data.encode::<u64>(&cfg.params).unwrap();
    let xs = split_all(&x, &ring, 2);
    let ts = split_all(&t, &ring, 3);
    let seed = test_seed(4);
    let body = |s: &mut Session<u64>| {
        let i = s.role().index();
        let xm = ShareMatrix::new(s.role(), 20, 9, xs[i].clone())?;
        let w = train_secure(s, &xm, &ts[i], &cfg)?;
        Ok((w, s.transcript().digest(), s.transcript().rounds))
    };
    match channels {
        None => run_with_sources(ring, seed, dealer_sources(seed, 64), TruncationMode::Local, body).unwrap(),
        Some((ca, cb)) => {
            let [srca, srcb] = dealer_sources(seed, 64);
            let mut sa = Session::new(Role::A, ring, Box::new(ca), srca, local_seed(&seed, Role::A));
            let mut sb = Session::new(Role::B, ring, Box::new(cb), srcb, local_seed(&seed, Role::B));
            std::thread::scope(|scope| {
                let hb = scope.spawn(|| body(&mut sb).unwrap());
                let ra = body(&mut sa).unwrap();
                (ra, hb.join().unwrap())
            })
        }
    }
}

#[test]
fn tcp_and_local_runs_are_identical() {
    let local = train_toy(None);
    let tcp = train_toy(Some(tcp_pair()));
    assert_eq!(local, tcp);
    assert_eq!(local.0 .1, local.1 .1);
}

#[test]
fn exchange_over_tcp_counts_one_frame() {
    let (mut a, mut b) = tcp_pair();
    let h = std::thread::spawn(move || {
        let mut buf = FrameBuf::new(MsgType::OpenRing, 1024);
        buf.set(5, 99);
        b.exchange(buf).unwrap()
    });
    let got = a.exchange(FrameBuf::new(MsgType::OpenRing, 1024)).unwrap();
    let peer = h.join().unwrap();
    assert_eq!(got.encoded_len(), 8205);
    assert_eq!(got.words().unwrap()[5], 99);
    assert_eq!(peer.words().unwrap(), vec![0; 1024]);
}

#[test]
fn large_frames_cross_tcp() {
    let (mut a, mut b) = tcp_pair();
    let n = 1 << 20;
    let h = std::thread::spawn(move || {
        let mut buf = FrameBuf::new(MsgType::OpenRing, n);
        for i in 0..n {
            buf.set(i, i as u64);
        }
        b.exchange(buf).unwrap()
    });
    let got = a.exchange(FrameBuf::new(MsgType::OpenRing, n)).unwrap().words().unwrap();
    h.join().unwrap();
    assert!(got.iter().enumerate().all(|(i, &w)| w == i as u64));
}

#[test]
fn handshake_agrees_or_names_the_difference() {
    let (mut a, mut b) = tcp_pair();
    let h = std::thread::spawn(move || handshake(&mut b, &hello(64)));
    assert_eq!(handshake(&mut a, &hello(64)).unwrap(), hello(64));
    h.join().unwrap().unwrap();

    let (mut a, mut b) = tcp_pair();
    let h = std::thread::spawn(move || handshake(&mut b, &hello(32)));
    let err = handshake(&mut a, &hello(64)).unwrap_err();
    assert!(matches!(&err, Error::Handshake(m) if m.contains("ring_bits 64 vs 32")), "{err}");
    assert!(h.join().unwrap().is_err());
}

#[test]
fn peer_disconnect_is_a_transport_error() {
    let (mut a, b) = tcp_pair();
    drop(b);
    let err = a.exchange(FrameBuf::new(MsgType::OpenRing, 4)).unwrap_err();
    assert!(err.is_transport(), "{err}");

    let (mut a, b) = securelr::transport::local_pair();
    drop(b);
    assert!(a.recv().unwrap_err().is_transport());
}

#[test]
fn truncated_stream_yields_no_frame() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let h = std::thread::spawn(move || {
        let mut s = TcpStream::connect(addr).unwrap();
        let bytes = Frame::from_words(MsgType::OpenRing, &[1, 2, 3]).encode();
        s.write_all(&bytes[..bytes.len() - 5]).unwrap();
    });
    let mut a = TcpChannel::accept(&listener).unwrap();
    h.join().unwrap();
    assert!(a.recv().unwrap_err().is_transport());

    let bytes = Frame::from_words(MsgType::OpenRing, &[1, 2, 3]).encode();
    for cut in 0..bytes.len() {
        assert!(Frame::decode(&bytes[..cut]).is_err(), "prefix of {cut} bytes");
    }
}
