#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, ChildStdout, Command, Output, Stdio};

use securelr::Dataset;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_securelr"))
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> HashMap<String, String> {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "securelr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    kv(&String::from_utf8_lossy(&out.stdout))
}

/// `key=value` pairs from output lines (later keys win).
pub fn kv(text: &str) -> HashMap<String, String> {
    text.split_whitespace()
        .filter_map(|t| t.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Writes the dataset's features (without the bias column) and labels as CSV.
pub fn write_csv(path: &Path, data: &Dataset<f64>) {
    let mut w = csv::Writer::from_path(path).unwrap();
    let mut header: Vec<String> = (1..data.cols()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).unwrap();
    for d in 0..data.rows() {
        let mut rec: Vec<String> = data.row(d)[1..].iter().map(|v| format!("{v}")).collect();
        rec.push(format!("{}", data.t()[d]));
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
}

/// Starts a process and waits for its `listening=ADDR` line.
pub fn spawn_listening(dir: &Path, args: &[&str]) -> (Child, String, BufReader<ChildStdout>) {
    let mut child = bin()
        .current_dir(dir)
        .args(args)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary starts");
    let mut out = BufReader::new(child.stdout.take().unwrap());
    let mut line = String::new();
    loop {
        line.clear();
        assert!(out.read_line(&mut line).unwrap() > 0, "process exited before listening");
        if let Some(addr) = line.trim().strip_prefix("listening=") {
            return (child, addr.to_string(), out);
        }
    }
}

/// Collects the rest of a child's stdout and waits for it.
pub fn finish(mut child: Child, mut out: BufReader<ChildStdout>) -> (bool, HashMap<String, String>) {
    let mut rest = String::new();
    std::io::Read::read_to_string(&mut out, &mut rest).unwrap();
    let status = child.wait().unwrap();
    (status.success(), kv(&rest))
}

/// Three-process run: alice, bob and an online dealer over loopback TCP.
pub fn network_train(dir: &Path, common: &[&str], out_prefix: &str) -> [HashMap<String, String>; 2] {
    let mut a_args = vec!["train", "--role", "alice", "--listen", "127.0.0.1:0", "--shares-out", out_prefix];
    a_args.extend_from_slice(common);
    let (alice, alice_addr, alice_out) = spawn_listening(dir, &a_args);
    let mut b_args = vec!["train", "--role", "bob", "--listen", "127.0.0.1:0", "--peer", &alice_addr, "--shares-out", out_prefix];
    b_args.extend_from_slice(common);
    let (bob, bob_addr, bob_out) = spawn_listening(dir, &b_args);
    let mut t_args = vec!["train", "--role", "ti", "--peer", &alice_addr, "--peer", &bob_addr];
    t_args.extend_from_slice(common);
    ok(dir, &t_args);
    let (sa, ka) = finish(alice, alice_out);
    let (sb, kb) = finish(bob, bob_out);
    assert!(sa && sb, "a party failed");
    [ka, kb]
}
