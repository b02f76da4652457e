//! Line transport with per-message receive timeouts.
//!
//! Lines are read on a background thread and handed over a channel, so a
//! silent peer cannot block the controller past the timeout.

use std::io::{BufRead, Write};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::protocol::{codes, decode, encode, Message, SeqCheck};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

pub struct LineChannel<W: Write> {
    lines: Receiver<std::io::Result<String>>,
    writer: W,
    timeout: Duration,
    next_out: u64,
    incoming: SeqCheck,
}

impl<W: Write> LineChannel<W> {
    pub fn new<R: BufRead + Send + 'static>(mut reader: R, writer: W, timeout: Duration) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => break,
                Ok(_) => {
                    if tx.send(Ok(line)).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        });
        Self {
            lines: rx,
            writer,
            timeout,
            next_out: 0,
            incoming: SeqCheck::default(),
        }
    }

    /// Sends a message built around the next outgoing sequence number.
    pub fn send(&mut self, build: impl FnOnce(u64) -> Message) -> Result<()> {
        let msg = build(self.next_out);
        self.next_out += 1;
        self.writer.write_all(encode(&msg).as_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    /// Next message from the peer. Blank lines are skipped.
    pub fn recv(&mut self) -> Result<Message> {
        loop {
            let line = match self.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(Error::Io(e)),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::protocol(codes::TIMEOUT, format!("no message within {:?}", self.timeout)))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::protocol(codes::CLOSED, "peer closed the stream"))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let msg = decode(&line)?;
            self.incoming.accept(msg.seq())?;
            return Ok(msg);
        }
    }

    pub fn writer(&self) -> &W {
        &self.writer
    }

    pub fn into_writer(self) -> W {
        self.writer
    }
}
