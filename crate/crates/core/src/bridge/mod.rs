//! Lets an external trainer act as the environment over newline-delimited JSON.

pub mod protocol;
pub mod transport;

use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::time::Duration;

use crate::catalog::{Catalog, JointConfig};
use crate::config::RunConfig;
use crate::coordinator::{Controller, RunResult};
use crate::env::{Environment, MetricsReport};
use crate::error::{Error, Result};

pub use protocol::{codes, decode, encode, Message, WireConfig, WireMetrics, PROTOCOL_VERSION};
pub use transport::{LineChannel, DEFAULT_TIMEOUT};

/// Decision steps per session when the run config sets none.
pub const DEFAULT_REMOTE_HORIZON: usize = 30;

/// Environment whose `execute` is answered by the peer of a [`LineChannel`].
pub struct RemoteEnv<W: Write> {
    chan: LineChannel<W>,
    catalog: Catalog,
    horizon: usize,
    steps: usize,
    observed: bool,
}

fn unexpected(msg: &Message, wanted: &str) -> Error {
    match msg {
        Message::Error { code, detail, .. } => Error::protocol(code.clone(), format!("peer error: {detail}")),
        Message::Shutdown { .. } => Error::protocol(codes::CLOSED, "peer shut down"),
        other => Error::protocol(codes::UNEXPECTED, format!("expected {wanted}, got {}", other.kind())),
    }
}

impl<W: Write> RemoteEnv<W> {
    pub fn new(chan: LineChannel<W>, catalog: Catalog, horizon: usize) -> Self {
        Self {
            chan,
            catalog,
            horizon,
            steps: 0,
            observed: false,
        }
    }

    /// Waits for `hello`, checks version and catalog digest, answers `hello_ack`.
    pub fn handshake(&mut self) -> Result<()> {
        let msg = self.chan.recv()?;
        let Message::Hello {
            protocol_version,
            catalog_digest,
            ..
        } = &msg
        else {
            return Err(unexpected(&msg, "hello"));
        };
        if protocol_version != PROTOCOL_VERSION {
            return Err(Error::protocol(
                codes::VERSION,
                format!("protocol version {protocol_version:?} unsupported (want {PROTOCOL_VERSION:?})"),
            ));
        }
        let digest = self.catalog.digest();
        if *catalog_digest != digest {
            return Err(Error::protocol(codes::CATALOG, format!("catalog digest {catalog_digest} != {digest}")));
        }
        self.chan.send(|seq| Message::HelloAck {
            seq,
            protocol_version: PROTOCOL_VERSION.into(),
            catalog_digest: digest,
        })
    }

    pub fn shutdown(&mut self) -> Result<()> {
        self.chan.send(|seq| Message::Shutdown { seq })
    }

    pub fn send_error(&mut self, code: &str, detail: &str) -> Result<()> {
        self.chan.send(|seq| Message::Error {
            seq,
            code: code.into(),
            detail: detail.into(),
        })
    }

    pub fn into_channel(self) -> LineChannel<W> {
        self.chan
    }
}

impl<W: Write> Environment for RemoteEnv<W> {
    /// The remote trainer owns its seed; `seed` is ignored. One episode per session.
    fn reset(&mut self, _seed: u64) -> Result<MetricsReport> {
        if self.observed {
            return Err(Error::Env("a bridge session carries a single episode".into()));
        }
        let msg = self.chan.recv()?;
        match msg {
            Message::Observe { metrics, .. } => {
                self.observed = true;
                Ok(metrics.to_report(false))
            }
            other => Err(unexpected(&other, "observe")),
        }
    }

    fn execute(&mut self, config: &JointConfig) -> Result<MetricsReport> {
        if self.steps >= self.horizon {
            return Err(Error::Env("session horizon exhausted".into()));
        }
        let wire = WireConfig::from_config(&self.catalog, config);
        self.chan.send(|seq| Message::Decide { seq, config: wire })?;
        let msg = self.chan.recv()?;
        match msg {
            Message::Result { metrics, terminal, .. } => {
                self.steps += 1;
                Ok(metrics.to_report(terminal || self.steps >= self.horizon))
            }
            other => Err(unexpected(&other, "result")),
        }
    }

    fn horizon(&self) -> usize {
        self.horizon
    }
}

/// How a session ended.
#[derive(Debug)]
pub struct SessionOutcome {
    pub result: Option<RunResult>,
    /// `(code, detail)` of the error that closed the session.
    pub error: Option<(String, String)>,
}

fn error_code(e: &Error) -> (String, String) {
    match e {
        Error::Protocol { code, detail } => (code.clone(), detail.clone()),
        Error::Env(d) | Error::InvalidInput(d) => (codes::METRICS.into(), d.clone()),
        other => (codes::INTERNAL.into(), other.to_string()),
    }
}

/// Runs one controller episode with `execute` delegated to the peer. Protocol
/// violations are reported to the peer as an `error` message and returned in
/// the outcome.
pub fn serve<W: Write>(chan: LineChannel<W>, cfg: &RunConfig, catalog: &Catalog) -> Result<(SessionOutcome, LineChannel<W>)> {
    let mut cfg = cfg.clone();
    cfg.episodes = 1;
    cfg.evaluate = false;
    let horizon = cfg.steps.unwrap_or(DEFAULT_REMOTE_HORIZON);
    let mut env = RemoteEnv::new(chan, catalog.clone(), horizon);
    let outcome = env.handshake().and_then(|_| Controller::new(cfg, catalog.clone())?.run(&mut env));
    let outcome = match outcome {
        Ok(result) => {
            env.shutdown()?;
            SessionOutcome {
                result: Some(result),
                error: None,
            }
        }
        Err(e) => {
            let (code, detail) = error_code(&e);
            log::error!("bridge session failed [{code}]: {detail}");
            if code != codes::CLOSED {
                let _ = env.send_error(&code, &detail);
            }
            SessionOutcome {
                result: None,
                error: Some((code, detail)),
            }
        }
    };
    Ok((outcome, env.into_channel()))
}

/// Serves one session over standard input/output.
pub fn serve_stdio(cfg: &RunConfig, catalog: &Catalog, timeout: Duration) -> Result<SessionOutcome> {
    let chan = LineChannel::new(BufReader::new(std::io::stdin()), std::io::stdout(), timeout);
    Ok(serve(chan, cfg, catalog)?.0)
}

/// Accepts one TCP connection on `addr` and serves it.
pub fn serve_tcp(addr: &str, cfg: &RunConfig, catalog: &Catalog, timeout: Duration) -> Result<SessionOutcome> {
    let listener = TcpListener::bind(addr)?;
    log::info!("bridge listening on {}", listener.local_addr()?);
    let (stream, peer) = listener.accept()?;
    log::info!("bridge connection from {peer}");
    let reader = BufReader::new(stream.try_clone()?);
    Ok(serve(LineChannel::new(reader, stream, timeout), cfg, catalog)?.0)
}

/// Trainer side of a session: drives `env` with the controller's decisions.
/// Returns the number of `result` messages sent.
pub fn run_client<W: Write, E: Environment + ?Sized>(
    chan: &mut LineChannel<W>,
    env: &mut E,
    catalog: &Catalog,
    seed: u64,
) -> Result<usize> {
    chan.send(|seq| Message::Hello {
        seq,
        protocol_version: PROTOCOL_VERSION.into(),
        catalog_digest: catalog.digest(),
    })?;
    match chan.recv()? {
        Message::HelloAck { .. } => {}
        other => return Err(unexpected(&other, "hello_ack")),
    }
    let initial = env.reset(seed)?;
    chan.send(|seq| Message::Observe {
        seq,
        metrics: WireMetrics::from_report(&initial),
    })?;
    let mut results = 0;
    loop {
        match chan.recv()? {
            Message::Decide { config, .. } => {
                let c = config.to_config(catalog)?;
                let m = env.execute(&c)?;
                chan.send(|seq| Message::Result {
                    seq,
                    metrics: WireMetrics::from_report(&m),
                    terminal: m.terminal,
                })?;
                results += 1;
            }
            Message::Shutdown { .. } => return Ok(results),
            other => return Err(unexpected(&other, "decide or shutdown")),
        }
    }
}

/// Connects to a bridge at `addr` and runs [`run_client`].
pub fn connect_tcp<E: Environment + ?Sized>(addr: &str, env: &mut E, catalog: &Catalog, seed: u64, timeout: Duration) -> Result<usize> {
    let stream = std::net::TcpStream::connect(addr)?;
    let reader = BufReader::new(stream.try_clone()?);
    let mut chan = LineChannel::new(reader, stream, timeout);
    run_client(&mut chan, env, catalog, seed)
}
