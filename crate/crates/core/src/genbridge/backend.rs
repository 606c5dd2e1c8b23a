//! Generation backends: the in-process mock and line-protocol transports
//! over a child process's standard streams or a TCP socket.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use thiserror::Error;

use super::mock::{mock_generate, SyntheticOracle};
use super::protocol::{encode, GenerationRequest, GenerationResponse, ImagePayload};
use super::GenerationConfig;

/// Transport-level failure. The bridge retries these and gives up after a
/// bounded number of attempts.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct BackendError(pub String);

impl From<std::io::Error> for BackendError {
    fn from(e: std::io::Error) -> Self {
        BackendError(e.to_string())
    }
}

/// One received line: parsed, or the raw text when it was not a valid
/// response record.
pub type ResponseLine = Result<GenerationResponse, String>;

pub trait Backend {
    /// Sends a batch and collects one line per request, in arrival order.
    fn exchange(&mut self, batch: &[GenerationRequest]) -> Result<Vec<ResponseLine>, BackendError>;

    /// Re-establishes the transport after a failure.
    fn reconnect(&mut self) -> Result<(), BackendError> {
        Ok(())
    }

    fn describe(&self) -> String;
}

/// Pure in-process backend answering from a [`SyntheticOracle`].
pub struct MockBackend {
    oracle: Arc<SyntheticOracle>,
    served: usize,
}

impl MockBackend {
    pub fn new(oracle: Arc<SyntheticOracle>) -> Self {
        Self { oracle, served: 0 }
    }

    /// Requests answered so far.
    pub fn served(&self) -> usize {
        self.served
    }
}

impl Backend for MockBackend {
    fn exchange(&mut self, batch: &[GenerationRequest]) -> Result<Vec<ResponseLine>, BackendError> {
        self.served += batch.len();
        Ok(batch
            .par_iter()
            .map(|req| {
                let config = GenerationConfig {
                    n_images: req.n_images,
                    temperature: req.temperature,
                    cond_scale: req.cond_scale,
                    ..GenerationConfig::default()
                };
                let images = mock_generate(&req.id, &req.text, &config, &self.oracle)
                    .into_iter()
                    .map(|r| ImagePayload {
                        clip_score: f64::from(r.clip_score),
                        embedding: r.embedding.into_iter().map(f64::from).collect(),
                    })
                    .collect();
                Ok(GenerationResponse {
                    id: req.id.clone(),
                    images: Some(images),
                    error: None,
                })
            })
            .collect())
    }

    fn describe(&self) -> String {
        format!(
            "mock(seed={}, dim={})",
            self.oracle.seed(),
            self.oracle.dim()
        )
    }
}

/// Writes every request of a batch, then reads as many response lines.
fn exchange_lines<R: BufRead, W: Write>(
    reader: &mut R,
    writer: &mut W,
    batch: &[GenerationRequest],
) -> Result<Vec<ResponseLine>, BackendError> {
    for req in batch {
        writeln!(writer, "{}", encode(req))?;
    }
    writer.flush()?;
    let mut out = Vec::with_capacity(batch.len());
    let mut line = String::new();
    while out.len() < batch.len() {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(BackendError(format!(
                "stream closed after {} of {} responses",
                out.len(),
                batch.len()
            )));
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(text).map_err(|_| truncate(text)));
    }
    Ok(out)
}

fn truncate(text: &str) -> String {
    match text.char_indices().nth(120) {
        Some((i, _)) => format!("{}...", &text[..i]),
        None => text.to_string(),
    }
}

struct ChildPipes {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

/// Backend served by a child process (`sh -c <command>`) on stdin/stdout.
pub struct StdioBackend {
    command: String,
    pipes: Option<ChildPipes>,
}

impl StdioBackend {
    pub fn spawn(command: &str) -> Result<Self, BackendError> {
        let mut backend = Self {
            command: command.to_string(),
            pipes: None,
        };
        backend.reconnect()?;
        Ok(backend)
    }

    fn shutdown(&mut self) {
        if let Some(mut pipes) = self.pipes.take() {
            drop(pipes.stdin);
            if let Ok(None) = pipes.child.try_wait() {
                let _ = pipes.child.kill();
            }
            let _ = pipes.child.wait();
        }
    }
}

impl Backend for StdioBackend {
    fn exchange(&mut self, batch: &[GenerationRequest]) -> Result<Vec<ResponseLine>, BackendError> {
        let pipes = self
            .pipes
            .as_mut()
            .ok_or_else(|| BackendError("backend process not running".into()))?;
        exchange_lines(&mut pipes.stdout, &mut pipes.stdin, batch)
    }

    fn reconnect(&mut self) -> Result<(), BackendError> {
        self.shutdown();
        debug!("spawning backend `{}`", self.command);
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BackendError(format!("cannot spawn `{}`: {e}", self.command)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        self.pipes = Some(ChildPipes {
            child,
            stdin: BufWriter::new(stdin),
            stdout: BufReader::new(stdout),
        });
        Ok(())
    }

    fn describe(&self) -> String {
        format!("stdio:{}", self.command)
    }
}

impl Drop for StdioBackend {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Backend reached over a TCP socket.
pub struct TcpBackend {
    addr: String,
    stream: Option<(BufReader<TcpStream>, BufWriter<TcpStream>)>,
}

impl TcpBackend {
    pub fn connect(addr: &str) -> Result<Self, BackendError> {
        let mut backend = Self {
            addr: addr.to_string(),
            stream: None,
        };
        backend.reconnect()?;
        Ok(backend)
    }
}

impl Backend for TcpBackend {
    fn exchange(&mut self, batch: &[GenerationRequest]) -> Result<Vec<ResponseLine>, BackendError> {
        let (reader, writer) = self
            .stream
            .as_mut()
            .ok_or_else(|| BackendError(format!("not connected to {}", self.addr)))?;
        exchange_lines(reader, writer, batch)
    }

    fn reconnect(&mut self) -> Result<(), BackendError> {
        self.stream = None;
        let stream = TcpStream::connect(&self.addr)
            .map_err(|e| BackendError(format!("cannot connect to {}: {e}", self.addr)))?;
        let reader = BufReader::new(stream.try_clone()?);
        self.stream = Some((reader, BufWriter::new(stream)));
        Ok(())
    }

    fn describe(&self) -> String {
        format!("tcp:{}", self.addr)
    }
}

/// Backend selector as written on the command line or in a run config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Mock,
    Stdio(String),
    Tcp(String),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "mock" {
            return Ok(BackendSpec::Mock);
        }
        if let Some(cmd) = s.strip_prefix("stdio:").filter(|c| !c.trim().is_empty()) {
            return Ok(BackendSpec::Stdio(cmd.to_string()));
        }
        if let Some(addr) = s.strip_prefix("tcp:").filter(|a| a.contains(':')) {
            return Ok(BackendSpec::Tcp(addr.to_string()));
        }
        Err(format!(
            "unknown backend `{s}` (expected mock, stdio:<cmd> or tcp:<host:port>)"
        ))
    }
}

impl std::fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendSpec::Mock => f.write_str("mock"),
            BackendSpec::Stdio(cmd) => write!(f, "stdio:{cmd}"),
            BackendSpec::Tcp(addr) => write!(f, "tcp:{addr}"),
        }
    }
}

impl BackendSpec {
    /// Opens the backend; `oracle` is only used by the mock.
    pub fn open(&self, oracle: Arc<SyntheticOracle>) -> Result<Box<dyn Backend>, BackendError> {
        Ok(match self {
            BackendSpec::Mock => Box::new(MockBackend::new(oracle)),
            BackendSpec::Stdio(cmd) => Box::new(StdioBackend::spawn(cmd)?),
            BackendSpec::Tcp(addr) => {
                let backend = TcpBackend::connect(addr);
                if let Err(e) = &backend {
                    warn!("{e}");
                }
                Box::new(backend?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!("mock".parse::<BackendSpec>().unwrap(), BackendSpec::Mock);
        assert_eq!(
            "stdio:python sidecar.py".parse::<BackendSpec>().unwrap(),
            BackendSpec::Stdio("python sidecar.py".into())
        );
        assert_eq!(
            "tcp:127.0.0.1:7000".parse::<BackendSpec>().unwrap(),
            BackendSpec::Tcp("127.0.0.1:7000".into())
        );
        for bad in ["", "stdio:", "tcp:nohost", "grpc:x"] {
            assert!(bad.parse::<BackendSpec>().is_err(), "{bad}");
        }
        assert_eq!(BackendSpec::Tcp("h:1".into()).to_string(), "tcp:h:1");
    }

    #[test]
    fn line_exchange_reports_early_eof() {
        let req = GenerationRequest::new("a", "x", &GenerationConfig::default());
        let mut reader: &[u8] = b"";
        let mut sink = Vec::new();
        let err = exchange_lines(&mut reader, &mut sink, &[req]).unwrap_err();
        assert!(err.0.contains("0 of 1"));
        assert!(String::from_utf8(sink)
            .unwrap()
            .starts_with("{\"id\":\"a\""));
    }

    #[test]
    fn garbled_lines_are_kept_raw() {
        let req = GenerationRequest::new("a", "x", &GenerationConfig::default());
        let mut reader: &[u8] = b"\n{oops\n";
        let lines = exchange_lines(&mut reader, &mut Vec::new(), &[req]).unwrap();
        assert_eq!(lines, vec![Err("{oops".to_string())]);
    }
}
