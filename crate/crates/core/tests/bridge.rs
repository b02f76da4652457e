use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use adaptrain_core::bridge::{self, codes, LineChannel};
use adaptrain_core::coordinator;
use adaptrain_core::env::{SyntheticTrainer, SyntheticTrainerSpec};
use adaptrain_core::{build_default_catalog, RunConfig};
use serde::Deserialize;

const TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Deserialize)]
struct GoldenHeader {
    seed: u64,
    steps: usize,
}

#[derive(Deserialize)]
struct GoldenLine {
    from: String,
    line: String,
}

fn golden() -> (GoldenHeader, Vec<GoldenLine>) {
    let text = include_str!("../data/bridge_golden.jsonl");
    let mut lines = text.lines();
    let header = serde_json::from_str(lines.next().unwrap()).unwrap();
    (header, lines.map(|l| serde_json::from_str(l).unwrap()).collect())
}

fn golden_config(h: &GoldenHeader) -> RunConfig {
    RunConfig {
        seed: h.seed,
        steps: Some(h.steps),
        ..RunConfig::default()
    }
}

/// Spawns `serve` on a loopback port; returns the port and the join handle.
fn spawn_server(cfg: RunConfig) -> (u16, thread::JoinHandle<bridge::SessionOutcome>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        let chan = LineChannel::new(reader, stream, TIMEOUT);
        bridge::serve(chan, &cfg, &build_default_catalog()).unwrap().0
    });
    (port, handle)
}

#[test]
fn golden_transcript_replays_byte_for_byte() {
    let (header, script) = golden();
    assert_eq!(script.iter().filter(|l| l.from == "trainer" && l.line.contains("\"result\"")).count(), 3);
    let (port, server) = spawn_server(golden_config(&header));
    let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    for entry in &script {
        match entry.from.as_str() {
            "trainer" => {
                stream.write_all(entry.line.as_bytes()).unwrap();
                stream.write_all(b"\n").unwrap();
            }
            "controller" => {
                let mut got = String::new();
                reader.read_line(&mut got).unwrap();
                assert_eq!(got.trim_end(), entry.line);
            }
            other => panic!("unknown sender {other}"),
        }
    }
    let outcome = server.join().unwrap();
    assert!(outcome.error.is_none());
    assert_eq!(outcome.result.unwrap().steps, 3);
}

#[test]
fn bridge_session_matches_in_process_run() {
    let catalog = build_default_catalog();
    let cfg = RunConfig {
        seed: 31,
        ..RunConfig::default()
    };
    let spec = SyntheticTrainerSpec::preset("default").unwrap();
    let mut env = SyntheticTrainer::new(spec.clone(), &catalog).unwrap();
    let local = coordinator::run(&mut env, &cfg, &catalog).unwrap();

    let (port, server) = spawn_server(cfg.clone());
    let mut remote_env = SyntheticTrainer::new(spec, &catalog).unwrap();
    let results = bridge::connect_tcp(&format!("127.0.0.1:{port}"), &mut remote_env, &catalog, cfg.seed, TIMEOUT).unwrap();
    let outcome = server.join().unwrap();
    let remote = outcome.result.expect("session succeeds");
    assert_eq!(results, 30);
    assert_eq!(remote.decisions, local.decisions);
    assert_eq!(remote.final_metrics, local.final_metrics);
}

#[test]
fn version_mismatch_is_reported() {
    let (port, server) = spawn_server(RunConfig::default());
    let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    let digest = build_default_catalog().digest();
    writeln!(
        stream,
        "{{\"type\":\"hello\",\"seq\":0,\"protocol_version\":\"99\",\"catalog_digest\":\"{digest}\"}}"
    )
    .unwrap();
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let msg = bridge::decode(&line).unwrap();
    assert!(matches!(msg, bridge::Message::Error { ref code, .. } if code == codes::VERSION), "{msg:?}");
    assert_eq!(server.join().unwrap().error.unwrap().0, codes::VERSION);
}

#[test]
fn malformed_line_is_a_parse_error() {
    let (port, server) = spawn_server(RunConfig::default());
    let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    stream.write_all(b"{not json\n").unwrap();
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    assert!(line.contains("\"code\":\"parse\""), "{line}");
    assert_eq!(server.join().unwrap().error.unwrap().0, codes::PARSE);
}

#[test]
fn silent_peer_times_out() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        let chan = LineChannel::new(reader, stream, Duration::from_millis(200));
        bridge::serve(chan, &RunConfig::default(), &build_default_catalog()).unwrap().0
    });
    let _peer = TcpStream::connect(("127.0.0.1", port)).unwrap();
    assert_eq!(server.join().unwrap().error.unwrap().0, codes::TIMEOUT);
}
