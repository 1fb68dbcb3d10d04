//! Carrying wire messages to a kernel and back.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::protocol::Message;
use super::{Control, KernelHandler};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("kernel closed the connection: {0}")]
    Closed(String),
    #[error("no reply within {0:?}")]
    Timeout(Duration),
    #[error("malformed message from kernel: {0}")]
    Malformed(String),
}

pub trait Transport: Send {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError>;
    fn recv(&mut self, timeout: Duration) -> Result<Message, TransportError>;
    /// Waits up to `grace` for the kernel to finish, then forces it.
    fn close(&mut self, grace: Duration);
}

/// Runs a handler in the host process. Every message still passes through
/// its wire encoding so both transports see identical bytes.
pub struct InProcessTransport {
    handler: Box<dyn KernelHandler>,
    queue: VecDeque<String>,
    exited: Option<i32>,
}

impl InProcessTransport {
    pub fn new(handler: Box<dyn KernelHandler>) -> Self {
        Self {
            handler,
            queue: VecDeque::new(),
            exited: None,
        }
    }
}

impl Transport for InProcessTransport {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        if let Some(code) = self.exited {
            return Err(TransportError::Closed(format!(
                "kernel exited with status {code}"
            )));
        }
        let msg = Message::decode(&msg.encode()).map_err(TransportError::Malformed)?;
        let mut out = Vec::new();
        if let Control::Exit(code) = self.handler.handle(msg, &mut out) {
            self.exited = Some(code);
        }
        self.queue.extend(out.iter().map(Message::encode));
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, TransportError> {
        match self.queue.pop_front() {
            Some(line) => Message::decode(&line)
                .map_err(|e| TransportError::Malformed(format!("{e}: {line}"))),
            None => match self.exited {
                Some(code) => Err(TransportError::Closed(format!(
                    "kernel exited with status {code}"
                ))),
                // Nothing more will ever arrive, so waiting is pointless.
                None => Err(TransportError::Timeout(timeout)),
            },
        }
    }

    fn close(&mut self, _grace: Duration) {
        self.exited.get_or_insert(0);
        self.queue.clear();
    }
}

/// A kernel in a child process speaking over stdin/stdout. Stderr lines are
/// forwarded to the log.
pub struct SubprocessTransport {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<Result<String, String>>,
    program: String,
}

impl SubprocessTransport {
    pub fn spawn(argv: &[String]) -> std::io::Result<Self> {
        let (program, args) = argv.split_first().ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty kernel command")
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let stderr = child.stderr.take().expect("stderr is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(line) if line.trim().is_empty() => {}
                    Ok(line) => {
                        if tx.send(Ok(line)).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e.to_string()));
                        return;
                    }
                }
            }
            let _ = tx.send(Err("end of output".into()));
        });
        let name = program.clone();
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                log::warn!("[{name}] {line}");
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            program: program.clone(),
        })
    }

    fn exit_note(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => format!("{} exited ({status})", self.program),
            _ => format!("{} stopped responding", self.program),
        }
    }
}

impl Transport for SubprocessTransport {
    fn send(&mut self, msg: &Message) -> Result<(), TransportError> {
        let Some(stdin) = self.stdin.as_mut() else {
            return Err(TransportError::Closed("stdin already closed".into()));
        };
        let mut line = msg.encode();
        line.push('\n');
        if let Err(e) = stdin
            .write_all(line.as_bytes())
            .and_then(|()| stdin.flush())
        {
            return Err(TransportError::Closed(format!("{}: {e}", self.exit_note())));
        }
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, TransportError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Message::decode(&line)
                .map_err(|e| TransportError::Malformed(format!("{e}: {line}"))),
            Ok(Err(reason)) => {
                // Give the child a moment to be reaped so the status is known.
                let _ = wait_until(&mut self.child, Duration::from_millis(200));
                Err(TransportError::Closed(format!(
                    "{}: {reason}",
                    self.exit_note()
                )))
            }
            Err(RecvTimeoutError::Timeout) => Err(TransportError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(TransportError::Closed(self.exit_note())),
        }
    }

    fn close(&mut self, grace: Duration) {
        self.stdin = None;
        if !wait_until(&mut self.child, grace) {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

impl Drop for SubprocessTransport {
    fn drop(&mut self) {
        if matches!(self.child.try_wait(), Ok(None)) {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

/// True if the child exited within `limit`.
fn wait_until(child: &mut Child, limit: Duration) -> bool {
    let deadline = Instant::now() + limit;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => return true,
            Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
            _ => return false,
        }
    }
}
