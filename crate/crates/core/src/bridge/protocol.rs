//! Newline-delimited JSON messages exchanged with an external trainer.
//!
//! Every message is one JSON object on one line with a `type` tag and a `seq`
//! counter that strictly increases per direction. The trainer opens with
//! `hello`, the controller answers `hello_ack`; the trainer then sends `observe`
//! with its initial metrics and each `decide` from the controller is answered
//! by one `result`. The controller ends the session with `shutdown`.

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, JointConfig};
use crate::env::MetricsReport;
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: &str = "1";

/// Error codes carried by `error` messages.
pub mod codes {
    pub const PARSE: &str = "parse";
    pub const SCHEMA: &str = "schema";
    pub const VERSION: &str = "version";
    pub const CATALOG: &str = "catalog";
    pub const SEQUENCE: &str = "sequence";
    pub const UNEXPECTED: &str = "unexpected";
    pub const METRICS: &str = "metrics";
    pub const TIMEOUT: &str = "timeout";
    pub const CLOSED: &str = "closed";
    pub const INTERNAL: &str = "internal";
}

/// Training metrics as sent by the trainer. The F1 fields are optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireMetrics {
    pub map_val: f64,
    pub loss_train: f64,
    pub loss_val: f64,
    pub grad_norm: f64,
    pub rel_update_mag: f64,
    pub texture_richness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rare_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mid_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bacc: Option<f64>,
}

impl WireMetrics {
    /// Missing F1 values become 0.
    pub fn to_report(&self, terminal: bool) -> MetricsReport {
        MetricsReport {
            map_val: self.map_val,
            rare_f1: self.rare_f1.unwrap_or(0.0),
            head_f1: self.head_f1.unwrap_or(0.0),
            mid_f1: self.mid_f1.unwrap_or(0.0),
            tail_f1: self.tail_f1.unwrap_or(0.0),
            bacc: self.bacc.unwrap_or(0.0),
            loss_train: self.loss_train,
            loss_val: self.loss_val,
            grad_norm: self.grad_norm,
            rel_update_mag: self.rel_update_mag,
            texture_richness: self.texture_richness,
            terminal,
        }
    }

    pub fn from_report(m: &MetricsReport) -> Self {
        Self {
            map_val: m.map_val,
            loss_train: m.loss_train,
            loss_val: m.loss_val,
            grad_norm: m.grad_norm,
            rel_update_mag: m.rel_update_mag,
            texture_richness: m.texture_richness,
            rare_f1: Some(m.rare_f1),
            head_f1: Some(m.head_f1),
            mid_f1: Some(m.mid_f1),
            tail_f1: Some(m.tail_f1),
            bacc: Some(m.bacc),
        }
    }
}

/// A joint configuration by strategy name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireConfig {
    pub aug: String,
    pub opt: String,
    pub lrs: String,
    pub loss: String,
}

impl WireConfig {
    pub fn from_config(catalog: &Catalog, c: &JointConfig) -> Self {
        let [aug, opt, lrs, loss] = catalog.names(c).map(str::to_string);
        Self { aug, opt, lrs, loss }
    }

    pub fn to_config(&self, catalog: &Catalog) -> Result<JointConfig> {
        catalog.config_from_names([&self.aug, &self.opt, &self.lrs, &self.loss])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Message {
    Hello {
        seq: u64,
        protocol_version: String,
        catalog_digest: String,
    },
    HelloAck {
        seq: u64,
        protocol_version: String,
        catalog_digest: String,
    },
    Observe {
        seq: u64,
        metrics: WireMetrics,
    },
    Decide {
        seq: u64,
        config: WireConfig,
    },
    Result {
        seq: u64,
        metrics: WireMetrics,
        terminal: bool,
    },
    Shutdown {
        seq: u64,
    },
    Error {
        seq: u64,
        code: String,
        detail: String,
    },
}

impl Message {
    pub fn seq(&self) -> u64 {
        match self {
            Message::Hello { seq, .. }
            | Message::HelloAck { seq, .. }
            | Message::Observe { seq, .. }
            | Message::Decide { seq, .. }
            | Message::Result { seq, .. }
            | Message::Shutdown { seq }
            | Message::Error { seq, .. } => *seq,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::HelloAck { .. } => "hello_ack",
            Message::Observe { .. } => "observe",
            Message::Decide { .. } => "decide",
            Message::Result { .. } => "result",
            Message::Shutdown { .. } => "shutdown",
            Message::Error { .. } => "error",
        }
    }
}

/// One line, newline-terminated.
pub fn encode(msg: &Message) -> String {
    let mut line = serde_json::to_string(msg).expect("messages serialize");
    line.push('\n');
    line
}

/// Parses one line (a trailing newline is allowed). Malformed JSON gives code
/// `parse`; well-formed JSON that is not a valid message gives `schema`.
pub fn decode(line: &str) -> Result<Message> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| Error::protocol(codes::PARSE, e.to_string()))?;
    serde_json::from_value(value).map_err(|e| Error::protocol(codes::SCHEMA, e.to_string()))
}

/// Tracks the strictly increasing `seq` of one direction.
#[derive(Clone, Debug, Default)]
pub struct SeqCheck {
    last: Option<u64>,
}

impl SeqCheck {
    pub fn accept(&mut self, seq: u64) -> Result<()> {
        if let Some(last) = self.last {
            if seq <= last {
                return Err(Error::protocol(codes::SEQUENCE, format!("seq {seq} does not exceed {last}")));
            }
        }
        self.last = Some(seq);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics() -> WireMetrics {
        WireMetrics {
            map_val: 0.5,
            loss_train: 0.7,
            loss_val: 0.6,
            grad_norm: 1.5,
            rel_update_mag: 0.01,
            texture_richness: 0.5,
            rare_f1: None,
            head_f1: None,
            mid_f1: None,
            tail_f1: None,
            bacc: None,
        }
    }

    #[test]
    fn round_trip_every_type() {
        let msgs = vec![
            Message::Hello {
                seq: 0,
                protocol_version: "1".into(),
                catalog_digest: "ab".into(),
            },
            Message::HelloAck {
                seq: 0,
                protocol_version: "1".into(),
                catalog_digest: "ab".into(),
            },
            Message::Observe { seq: 1, metrics: metrics() },
            Message::Decide {
                seq: 1,
                config: WireConfig {
                    aug: "Basic".into(),
                    opt: "SGD".into(),
                    lrs: "Step".into(),
                    loss: "BCE".into(),
                },
            },
            Message::Result {
                seq: 2,
                metrics: WireMetrics {
                    rare_f1: Some(0.25),
                    ..metrics()
                },
                terminal: true,
            },
            Message::Shutdown { seq: 3 },
            Message::Error {
                seq: 4,
                code: "parse".into(),
                detail: "bad".into(),
            },
        ];
        for m in msgs {
            let line = encode(&m);
            assert!(line.ends_with('\n') && !line[..line.len() - 1].contains('\n'));
            assert_eq!(decode(&line).unwrap(), m);
        }
    }

    #[test]
    fn wire_field_names() {
        let line = encode(&Message::Shutdown { seq: 7 });
        assert_eq!(line, "{\"type\":\"shutdown\",\"seq\":7}\n");
    }

    #[test]
    fn decode_errors() {
        let code = |line: &str| match decode(line) {
            Err(Error::Protocol { code, .. }) => code,
            other => panic!("expected protocol error, got {other:?}"),
        };
        assert_eq!(code("{not json"), "parse");
        assert_eq!(code("{\"type\":\"shutdown\"}"), "schema");
        assert_eq!(code("{\"type\":\"bogus\",\"seq\":1}"), "schema");
    }

    #[test]
    fn seq_must_increase() {
        let mut s = SeqCheck::default();
        s.accept(0).unwrap();
        s.accept(2).unwrap();
        assert!(s.accept(2).is_err());
    }
}
