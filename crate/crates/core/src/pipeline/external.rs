//! Child-process scorer speaking newline-delimited JSON over stdio.
//!
//! On startup the child prints one handshake line,
//! `{"protocol":"legalret-pair-score","version":1}`. Afterwards the parent
//! writes one [`ScoreRequest`] object per line and the child answers each
//! with one [`ScoreResponse`] line, in the same order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::scorer::{check_unique_ids, ScoreRequest, ScoreResponse, Scorer};
use crate::error::{Error, Result};

pub const PROTOCOL_NAME: &str = "legalret-pair-score";
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub version: u32,
}

impl Handshake {
    pub fn current() -> Self {
        Self {
            protocol: PROTOCOL_NAME.into(),
            version: PROTOCOL_VERSION,
        }
    }
}

enum Event {
    Line(String),
    Eof,
    Failed(std::io::Error),
}

pub struct ExternalScorer {
    command: Vec<String>,
    child: Child,
    writer: Option<Sender<Vec<u8>>>,
    lines: Receiver<Event>,
    timeout: Duration,
    broken: bool,
}

impl std::fmt::Debug for ExternalScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalScorer")
            .field("command", &self.command)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl ExternalScorer {
    /// Spawn `command` and wait up to `timeout` for its handshake. The same
    /// timeout then bounds each batch.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("empty scorer command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start {program:?}: {e}")))?;

        let stdout = child.stdout.take().expect("piped stdout");
        let (line_tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let event = match line {
                    Ok(l) => Event::Line(l),
                    Err(e) => Event::Failed(e),
                };
                let stop = matches!(event, Event::Failed(_));
                if line_tx.send(event).is_err() || stop {
                    return;
                }
            }
            let _ = line_tx.send(Event::Eof);
        });

        let stdin = child.stdin.take().expect("piped stdin");
        let (writer, batches) = mpsc::channel::<Vec<u8>>();
        thread::spawn(move || write_loop(stdin, batches));

        let mut scorer = Self {
            command: command.to_vec(),
            child,
            writer: Some(writer),
            lines,
            timeout,
            broken: false,
        };
        scorer.handshake()?;
        Ok(scorer)
    }

    fn handshake(&mut self) -> Result<()> {
        let deadline = Instant::now() + self.timeout;
        let line = match self.next_line(deadline) {
            Ok(Some(line)) => line,
            Ok(None) => return Err(self.fail_protocol("scorer exited before handshake".into())),
            Err(msg) => return Err(self.fail_protocol(format!("handshake: {msg}"))),
        };
        match serde_json::from_str::<Handshake>(&line) {
            Ok(h) if h == Handshake::current() => Ok(()),
            Ok(h) => Err(self.fail_protocol(format!(
                "scorer speaks {} v{}, expected {PROTOCOL_NAME} v{PROTOCOL_VERSION}",
                h.protocol, h.version
            ))),
            Err(e) => Err(self.fail_protocol(format!("bad handshake line {line:?}: {e}"))),
        }
    }

    /// `Ok(None)` on end of stream; `Err` with a message on timeout or read
    /// failure.
    fn next_line(&mut self, deadline: Instant) -> std::result::Result<Option<String>, String> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(wait) {
            Ok(Event::Line(l)) => Ok(Some(l)),
            Ok(Event::Eof) | Err(RecvTimeoutError::Disconnected) => Ok(None),
            Ok(Event::Failed(e)) => Err(format!("read error: {e}")),
            Err(RecvTimeoutError::Timeout) => Err(format!("timed out after {:?}", self.timeout)),
        }
    }

    fn fail_protocol(&mut self, message: String) -> Error {
        self.shutdown();
        Error::Protocol(message)
    }

    fn fail_pair(&mut self, pair_id: &str, message: String) -> Error {
        self.shutdown();
        Error::Scorer {
            pair_id: pair_id.to_owned(),
            message,
        }
    }

    fn shutdown(&mut self) {
        self.broken = true;
        self.writer = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn exit_note(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => format!(" ({status})"),
            _ => String::new(),
        }
    }
}

fn write_loop(mut stdin: ChildStdin, batches: Receiver<Vec<u8>>) {
    for batch in batches {
        if stdin.write_all(&batch).and_then(|_| stdin.flush()).is_err() {
            return;
        }
    }
}

impl Scorer for ExternalScorer {
    fn name(&self) -> String {
        format!("external:{}", self.command.join(" "))
    }

    fn score_batch(&mut self, requests: &[ScoreRequest]) -> Result<Vec<ScoreResponse>> {
        if self.broken {
            return Err(Error::Protocol("scorer process already failed".into()));
        }
        check_unique_ids(requests)?;
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        let mut payload = Vec::new();
        for r in requests {
            serde_json::to_writer(&mut payload, r)?;
            payload.push(b'\n');
        }
        let sent = self
            .writer
            .as_ref()
            .is_some_and(|w| w.send(payload).is_ok());
        if !sent {
            let id = requests[0].pair_id.clone();
            return Err(self.fail_pair(&id, "scorer input closed".into()));
        }

        let deadline = Instant::now() + self.timeout;
        let mut out = Vec::with_capacity(requests.len());
        for req in requests {
            let line = match self.next_line(deadline) {
                Ok(Some(line)) => line,
                Ok(None) => {
                    let note = self.exit_note();
                    return Err(self.fail_pair(
                        &req.pair_id,
                        format!("scorer exited before responding{note}"),
                    ));
                }
                Err(msg) => return Err(self.fail_pair(&req.pair_id, msg)),
            };
            let resp: ScoreResponse = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    return Err(
                        self.fail_pair(&req.pair_id, format!("malformed response {line:?}: {e}"))
                    )
                }
            };
            if resp.pair_id != req.pair_id {
                return Err(self.fail_pair(
                    &req.pair_id,
                    format!("response out of order (got pair_id {:?})", resp.pair_id),
                ));
            }
            if !resp.probability.is_finite() {
                return Err(
                    self.fail_pair(&req.pair_id, format!("non-finite probability in {line:?}"))
                );
            }
            out.push(ScoreResponse {
                pair_id: resp.pair_id,
                probability: resp.probability.clamp(0.0, 1.0),
            });
        }
        Ok(out)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if self.broken {
            return;
        }
        // closing stdin asks the child to finish; give it a moment
        self.writer = None;
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
