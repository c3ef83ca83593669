//! Line-delimited JSON protocol spoken with inference backends over the
//! stdin/stdout of a child process.
//!
//! The backend writes one `handshake` record on startup. After that the
//! client sends one request at a time (`classify` or `detect`) and waits for
//! the matching response before sending the next. Images travel as
//! base64-encoded PNG together with the original (pre-resize) dimensions;
//! detection boxes come back in original image coordinates.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::image::{decode_image_bytes, encode_png, ImageU8};
use crate::metrics::BoxXywh;

pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_RESPONSE_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendHandshake {
    pub name: String,
    pub task: Task,
    pub input_w: usize,
    pub input_h: usize,
    pub classes: usize,
}

impl BackendHandshake {
    pub fn validate(&self) -> Result<()> {
        if self.input_w == 0 || self.input_h == 0 || self.classes == 0 {
            return Err(Error::protocol(
                "handshake declares a zero dimension or class count",
                serde_json::to_string(self).unwrap_or_default(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagePayload {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    pub orig_width: usize,
    pub orig_height: usize,
    /// Base64 PNG of the prepared image.
    pub png: String,
}

impl ImagePayload {
    pub fn encode(id: u64, img: &ImageU8, orig_width: usize, orig_height: usize) -> Result<Self> {
        Ok(Self {
            id,
            width: img.width(),
            height: img.height(),
            orig_width,
            orig_height,
            png: BASE64.encode(encode_png(img)?),
        })
    }

    pub fn decode(&self) -> Result<ImageU8> {
        let bytes = BASE64
            .decode(&self.png)
            .map_err(|e| Error::protocol(format!("bad base64 image: {e}"), format!("request {}", self.id)))?;
        let img = decode_image_bytes(&bytes)?;
        if (img.width(), img.height()) != (self.width, self.height) {
            return Err(Error::protocol(
                "decoded image size differs from declared size",
                format!("request {}", self.id),
            ));
        }
        Ok(img)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Classify(ImagePayload),
    Detect(ImagePayload),
}

impl Request {
    pub fn id(&self) -> u64 {
        match self {
            Request::Classify(p) | Request::Detect(p) => p.id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedClass {
    pub class: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireBox {
    pub class: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

impl WireBox {
    pub fn bbox(&self) -> BoxXywh<f64> {
        BoxXywh::new(self.x, self.y, self.w, self.h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendMessage {
    Handshake(BackendHandshake),
    Classification {
        id: u64,
        ranking: Vec<RankedClass>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checksum: Option<String>,
    },
    Detections {
        id: u64,
        boxes: Vec<WireBox>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checksum: Option<String>,
    },
    Error {
        #[serde(default)]
        id: Option<u64>,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub ranking: Vec<RankedClass>,
    pub checksum: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detections {
    pub boxes: Vec<WireBox>,
    pub checksum: Option<String>,
}

/// Hex SHA-256 over the dimensions and raw RGB bytes of an image.
pub fn image_checksum(img: &ImageU8) -> String {
    let mut h = Sha256::new();
    h.update((img.width() as u64).to_le_bytes());
    h.update((img.height() as u64).to_le_bytes());
    h.update(img.data());
    hex::encode(h.finalize())
}

/// A connected inference backend.
pub trait InferenceBackend: Send {
    fn handshake(&self) -> &BackendHandshake;

    /// `img` is already prepared to the handshake size; `orig` is the size of
    /// the image before preparation.
    fn classify(&mut self, img: &ImageU8, orig: (usize, usize)) -> Result<Classification>;

    fn detect(&mut self, img: &ImageU8, orig: (usize, usize)) -> Result<Detections>;
}

/// Program and arguments used to launch a backend process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackendCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl BackendCommand {
    /// Whitespace-separated command line; no shell quoting.
    pub fn parse(line: &str) -> Result<Self> {
        let mut parts = line.split_whitespace().map(str::to_owned);
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty backend command".into()))?;
        Ok(Self {
            program,
            args: parts.collect(),
        })
    }
}

impl std::fmt::Display for BackendCommand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.program)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

/// Child-process backend session speaking the lockstep protocol.
pub struct BackendSession {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    handshake: BackendHandshake,
    next_id: u64,
    response_timeout: Duration,
}

impl BackendSession {
    pub fn launch(cmd: &BackendCommand) -> Result<Self> {
        Self::launch_with_timeouts(cmd, DEFAULT_HANDSHAKE_TIMEOUT, DEFAULT_RESPONSE_TIMEOUT)
    }

    pub fn launch_with_timeouts(
        cmd: &BackendCommand,
        handshake_timeout: Duration,
        response_timeout: Duration,
    ) -> Result<Self> {
        let mut child = Command::new(&cmd.program)
            .args(&cmd.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::BackendUnavailable(format!("cannot start `{cmd}`: {e}")))?;
        let stdout = child.stdout.take().expect("stdout piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut session = Self {
            child,
            stdin,
            lines: rx,
            handshake: BackendHandshake {
                name: String::new(),
                task: Task::Classification,
                input_w: 0,
                input_h: 0,
                classes: 0,
            },
            next_id: 1,
            response_timeout,
        };
        let line = session.read_line(handshake_timeout).map_err(|e| match e {
            Error::Protocol { .. } => e,
            other => Error::BackendUnavailable(format!("no handshake from `{cmd}`: {other}")),
        })?;
        match serde_json::from_str::<BackendMessage>(&line) {
            Ok(BackendMessage::Handshake(h)) => {
                h.validate()?;
                session.handshake = h;
                Ok(session)
            }
            Ok(_) => Err(Error::protocol("expected handshake record", line)),
            Err(e) => Err(Error::protocol(format!("malformed handshake: {e}"), line)),
        }
    }

    fn read_line(&mut self, timeout: Duration) -> Result<String> {
        let deadline = Instant::now() + timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(remaining) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => return Ok(line),
                Ok(Err(e)) => return Err(Error::Io(e)),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::BackendUnavailable(format!(
                        "timed out after {:.1}s",
                        timeout.as_secs_f64()
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::BackendUnavailable("backend closed its output".into()))
                }
            }
        }
    }

    fn roundtrip(&mut self, request: Request) -> Result<BackendMessage> {
        let id = request.id();
        let mut line = serde_json::to_string(&request)?;
        line.push('\n');
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::BackendUnavailable("session closed".into()))?;
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::BackendUnavailable(format!("write failed: {e}")))?;

        let reply = self.read_line(self.response_timeout)?;
        let msg: BackendMessage = serde_json::from_str(&reply)
            .map_err(|e| Error::protocol(format!("malformed response: {e}"), reply.clone()))?;
        let reply_id = match &msg {
            BackendMessage::Classification { id, .. } | BackendMessage::Detections { id, .. } => Some(*id),
            BackendMessage::Error { id, message } => {
                return Err(Error::protocol(format!("backend error: {message}"), format!("{id:?}")))
            }
            BackendMessage::Handshake(_) => None,
        };
        if reply_id != Some(id) {
            return Err(Error::protocol(format!("expected response to request {id}"), reply));
        }
        Ok(msg)
    }

    fn payload(&mut self, img: &ImageU8, orig: (usize, usize)) -> Result<ImagePayload> {
        let id = self.next_id;
        self.next_id += 1;
        ImagePayload::encode(id, img, orig.0, orig.1)
    }

    fn require_task(&self, task: Task) -> Result<()> {
        if self.handshake.task != task {
            return Err(Error::protocol(
                format!("{task} request sent to a {} backend", self.handshake.task),
                self.handshake.name.clone(),
            ));
        }
        Ok(())
    }
}

impl InferenceBackend for BackendSession {
    fn handshake(&self) -> &BackendHandshake {
        &self.handshake
    }

    fn classify(&mut self, img: &ImageU8, orig: (usize, usize)) -> Result<Classification> {
        self.require_task(Task::Classification)?;
        let payload = self.payload(img, orig)?;
        match self.roundtrip(Request::Classify(payload))? {
            BackendMessage::Classification { ranking, checksum, .. } => Ok(Classification { ranking, checksum }),
            other => Err(Error::protocol(
                "expected classification response",
                serde_json::to_string(&other).unwrap_or_default(),
            )),
        }
    }

    fn detect(&mut self, img: &ImageU8, orig: (usize, usize)) -> Result<Detections> {
        self.require_task(Task::Detection)?;
        let payload = self.payload(img, orig)?;
        match self.roundtrip(Request::Detect(payload))? {
            BackendMessage::Detections { boxes, checksum, .. } => Ok(Detections { boxes, checksum }),
            other => Err(Error::protocol(
                "expected detections response",
                serde_json::to_string(&other).unwrap_or_default(),
            )),
        }
    }
}

impl Drop for BackendSession {
    fn drop(&mut self) {
        // closing stdin asks the backend to exit
        self.stdin.take();
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
