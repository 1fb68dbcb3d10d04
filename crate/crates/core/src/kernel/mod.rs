//! Kernel sessions: start a kernel, run chunks and inline expressions on it
//! in document order, and collect what it emits.

pub mod calc;
pub mod protocol;
mod result;
mod serve;
mod transport;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::chunk::ChunkOptions;
use protocol::{Message, PROTOCOL_VERSION};

pub use result::{
    Artifact, ChunkResult, ExecStatus, FigureFormat, FigureRef, Segment, Stream, StructuredTable,
};
pub use serve::serve;
pub use transport::{InProcessTransport, SubprocessTransport, Transport, TransportError};

/// What a handler wants after answering a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Exit(i32),
}

/// A kernel implemented in Rust. It receives one request and pushes its
/// replies, in order, onto `out`.
pub trait KernelHandler: Send {
    fn handle(&mut self, msg: Message, out: &mut Vec<Message>) -> Control;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timeouts {
    pub handshake: Duration,
    pub exec: Duration,
    pub shutdown_grace: Duration,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self {
            handshake: Duration::from_secs(10),
            exec: Duration::from_secs(30),
            shutdown_grace: Duration::from_secs(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("cannot start kernel for '{lang}': {reason}")]
    StartFailure { lang: String, reason: String },
    #[error("kernel for '{lang}' did not complete the handshake within {timeout:?}")]
    HandshakeTimeout { lang: String, timeout: Duration },
    #[error("kernel for '{lang}' crashed: {reason}")]
    Crash { lang: String, reason: String },
    #[error("kernel for '{lang}' did not finish within {timeout:?}")]
    ExecTimeout { lang: String, timeout: Duration },
    #[error("kernel for '{lang}' broke protocol: {reason}")]
    Protocol { lang: String, reason: String },
    #[error("inline expression `{expr}` failed: {message}")]
    InlineEval { expr: String, message: String },
    #[error("inline expression `{expr}` produced more than one line")]
    MultilineInlineResult { expr: String },
    #[error("kernel for '{lang}' is not ready (state {state})")]
    NotReady { lang: String, state: SessionState },
}

type HandlerFactory = Arc<dyn Fn() -> Box<dyn KernelHandler> + Send + Sync>;

#[derive(Clone)]
pub enum KernelSpec {
    Builtin(HandlerFactory),
    Command(Vec<String>),
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Builtin(_) => f.write_str("Builtin"),
            KernelSpec::Command(argv) => f.debug_tuple("Command").field(argv).finish(),
        }
    }
}

/// Which kernel serves each language.
#[derive(Debug, Clone, Default)]
pub struct KernelRegistry {
    kernels: BTreeMap<String, KernelSpec>,
}

impl KernelRegistry {
    /// An empty registry.
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry with the builtin `calc` kernel.
    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register_builtin("calc", || Box::new(calc::CalcKernel::new()));
        registry
    }

    pub fn register_builtin<F>(&mut self, lang: &str, factory: F)
    where
        F: Fn() -> Box<dyn KernelHandler> + Send + Sync + 'static,
    {
        self.kernels
            .insert(lang.to_string(), KernelSpec::Builtin(Arc::new(factory)));
    }

    pub fn register_command(&mut self, lang: &str, argv: Vec<String>) {
        self.kernels
            .insert(lang.to_string(), KernelSpec::Command(argv));
    }

    /// Registers `lang=command args...`. The command is split on whitespace.
    pub fn register_spec(&mut self, spec: &str) -> Result<(), String> {
        let (lang, command) = spec
            .split_once('=')
            .ok_or_else(|| format!("expected LANG=COMMAND, got '{spec}'"))?;
        let lang = lang.trim();
        if lang.is_empty() || !lang.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("invalid language name '{lang}'"));
        }
        let argv: Vec<String> = command.split_whitespace().map(String::from).collect();
        if argv.is_empty() {
            return Err(format!("no command given for '{lang}'"));
        }
        self.register_command(lang, argv);
        Ok(())
    }

    pub fn contains(&self, lang: &str) -> bool {
        self.kernels.contains_key(lang)
    }

    pub fn langs(&self) -> impl Iterator<Item = &str> {
        self.kernels.keys().map(String::as_str)
    }

    pub fn get(&self, lang: &str) -> Option<&KernelSpec> {
        self.kernels.get(lang)
    }

    fn connect(&self, lang: &str) -> Result<Box<dyn Transport>, KernelError> {
        let failure = |reason: String| KernelError::StartFailure {
            lang: lang.to_string(),
            reason,
        };
        match self.kernels.get(lang) {
            None => Err(failure("no kernel registered".into())),
            Some(KernelSpec::Builtin(factory)) => Ok(Box::new(InProcessTransport::new(factory()))),
            Some(KernelSpec::Command(argv)) => SubprocessTransport::spawn(argv)
                .map(|t| Box::new(t) as Box<dyn Transport>)
                .map_err(|e| failure(format!("{}: {e}", argv.join(" ")))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Starting,
    Ready,
    Busy,
    Dead,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Starting => "starting",
            SessionState::Ready => "ready",
            SessionState::Busy => "busy",
            SessionState::Dead => "dead",
        })
    }
}

/// One kernel for one language within one render.
pub struct Session {
    lang: String,
    transport: Box<dyn Transport>,
    state: SessionState,
    figure_dir: PathBuf,
    next_id: u64,
    timeouts: Timeouts,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("lang", &self.lang)
            .field("state", &self.state)
            .field("figure_dir", &self.figure_dir)
            .finish_non_exhaustive()
    }
}

impl Session {
    /// Starts the registered kernel for `lang` and performs the handshake.
    pub fn start(
        lang: &str,
        registry: &KernelRegistry,
        figure_dir: &Path,
        timeouts: Timeouts,
    ) -> Result<Session, KernelError> {
        std::fs::create_dir_all(figure_dir).map_err(|e| KernelError::StartFailure {
            lang: lang.to_string(),
            reason: format!("cannot create {}: {e}", figure_dir.display()),
        })?;
        let transport = registry.connect(lang)?;
        Self::over(lang, transport, figure_dir, timeouts)
    }

    /// Handshakes over an already connected transport.
    pub fn over(
        lang: &str,
        transport: Box<dyn Transport>,
        figure_dir: &Path,
        timeouts: Timeouts,
    ) -> Result<Session, KernelError> {
        let mut session = Session {
            lang: lang.to_string(),
            transport,
            state: SessionState::Starting,
            figure_dir: figure_dir.to_path_buf(),
            next_id: 0,
            timeouts,
        };
        session.handshake()?;
        Ok(session)
    }

    fn handshake(&mut self) -> Result<(), KernelError> {
        let id = self.take_id();
        let hello = Message::Hello {
            id,
            version: PROTOCOL_VERSION,
            figure_dir: Some(self.figure_dir.display().to_string()),
            langs: None,
        };
        let result = self
            .transport
            .send(&hello)
            .and_then(|()| self.transport.recv(self.timeouts.handshake));
        let reply = match result {
            Ok(reply) => reply,
            Err(TransportError::Timeout(_)) => {
                return Err(self.die(KernelError::HandshakeTimeout {
                    lang: self.lang.clone(),
                    timeout: self.timeouts.handshake,
                }))
            }
            Err(e) => {
                let reason = e.to_string();
                return Err(self.die(KernelError::StartFailure {
                    lang: self.lang.clone(),
                    reason,
                }));
            }
        };
        match reply {
            Message::Hello {
                id: reply_id,
                version,
                langs,
                ..
            } if reply_id == id => {
                if version != PROTOCOL_VERSION {
                    let reason = format!(
                        "kernel speaks protocol version {version}, host speaks {PROTOCOL_VERSION}"
                    );
                    return Err(self.die(KernelError::StartFailure {
                        lang: self.lang.clone(),
                        reason,
                    }));
                }
                if let Some(langs) = langs {
                    if !langs.iter().any(|l| l == &self.lang) {
                        log::warn!(
                            "kernel registered for '{}' announces languages {:?}",
                            self.lang,
                            langs
                        );
                    }
                }
                self.state = SessionState::Ready;
                Ok(())
            }
            other => {
                let reason = format!(
                    "expected hello {id}, got {} {}",
                    other.type_name(),
                    other.id()
                );
                Err(self.die(KernelError::StartFailure {
                    lang: self.lang.clone(),
                    reason,
                }))
            }
        }
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn figure_dir(&self) -> &Path {
        &self.figure_dir
    }

    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn ensure_ready(&self) -> Result<(), KernelError> {
        if self.state == SessionState::Ready {
            Ok(())
        } else {
            Err(KernelError::NotReady {
                lang: self.lang.clone(),
                state: self.state,
            })
        }
    }

    /// Marks the session dead and stops the kernel.
    fn die(&mut self, err: KernelError) -> KernelError {
        if self.state != SessionState::Dead {
            self.state = SessionState::Dead;
            self.transport.close(Duration::ZERO);
        }
        err
    }

    fn transport_failure(&mut self, err: TransportError, timeout: Duration) -> KernelError {
        let lang = self.lang.clone();
        let err = match err {
            TransportError::Timeout(_) => KernelError::ExecTimeout { lang, timeout },
            TransportError::Closed(reason) => KernelError::Crash { lang, reason },
            TransportError::Malformed(reason) => KernelError::Protocol { lang, reason },
        };
        self.die(err)
    }

    fn protocol_error(&mut self, reason: String) -> KernelError {
        let lang = self.lang.clone();
        self.die(KernelError::Protocol { lang, reason })
    }

    /// Runs one chunk. `label` names its figures: `<label>-<k>.<ext>`.
    pub fn execute_chunk(
        &mut self,
        code: &str,
        opts: &ChunkOptions,
        label: &str,
    ) -> Result<ChunkResult, KernelError> {
        self.ensure_ready()?;
        let id = self.take_id();
        let label = sanitize_label(label);
        let request = Message::Exec {
            id,
            code: code.to_string(),
            fig_width: opts.fig_width,
            fig_height: opts.fig_height,
            label: label.clone(),
        };
        let timeout = self.timeouts.exec;
        if let Err(e) = self.transport.send(&request) {
            return Err(self.transport_failure(e, timeout));
        }
        self.state = SessionState::Busy;
        let deadline = Instant::now() + timeout;
        let mut artifacts = Vec::new();
        let mut figures = 0usize;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let msg = match self.transport.recv(left) {
                Ok(msg) => msg,
                Err(e) => return Err(self.transport_failure(e, timeout)),
            };
            if msg.id() != id {
                return Err(self.protocol_error(format!(
                    "expected replies to request {id}, got {} for {}",
                    msg.type_name(),
                    msg.id()
                )));
            }
            match msg {
                Message::Output { stream, text, .. } => {
                    artifacts.push(Artifact::Segment(Segment::new(stream, text)))
                }
                Message::Value { text, .. } => {
                    artifacts.push(Artifact::Segment(Segment::new(Stream::Value, text)))
                }
                Message::Table { header, rows, .. } => {
                    artifacts.push(Artifact::Table(StructuredTable { header, rows }))
                }
                Message::Figure {
                    path,
                    format,
                    width,
                    height,
                    ..
                } => {
                    figures += 1;
                    let name = format!("{label}-{figures}.{}", format.extension());
                    if let Err(reason) = self.adopt_figure(&path, &name) {
                        return Err(self.protocol_error(reason));
                    }
                    artifacts.push(Artifact::Figure(FigureRef {
                        name,
                        format,
                        width,
                        height,
                    }));
                }
                Message::Done { status, .. } => {
                    self.state = SessionState::Ready;
                    let mut result = ChunkResult { artifacts, status };
                    if status == ExecStatus::Error && result.error_text().is_none() {
                        result.artifacts.push(Artifact::Segment(Segment::new(
                            Stream::Error,
                            "Error: chunk failed",
                        )));
                    }
                    return Ok(result);
                }
                other => {
                    return Err(self.protocol_error(format!(
                        "unexpected {} while executing",
                        other.type_name()
                    )))
                }
            }
        }
    }

    /// Moves a figure the kernel wrote to its canonical name in the figure
    /// directory.
    fn adopt_figure(&self, path: &str, name: &str) -> Result<(), String> {
        let source = {
            let p = Path::new(path);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                self.figure_dir.join(p)
            }
        };
        let target = self.figure_dir.join(name);
        if !source.is_file() {
            return Err(format!("figure file {} does not exist", source.display()));
        }
        if source != target {
            std::fs::rename(&source, &target)
                .or_else(|_| std::fs::copy(&source, &target).map(|_| ()))
                .map_err(|e| format!("cannot move figure {}: {e}", source.display()))?;
        }
        Ok(())
    }

    /// Evaluates an inline expression to a single line of text.
    pub fn evaluate_inline(&mut self, expr: &str) -> Result<String, KernelError> {
        self.ensure_ready()?;
        let id = self.take_id();
        let timeout = self.timeouts.exec;
        let request = Message::Eval {
            id,
            expr: expr.to_string(),
        };
        if let Err(e) = self.transport.send(&request) {
            return Err(self.transport_failure(e, timeout));
        }
        self.state = SessionState::Busy;
        let reply = match self.transport.recv(timeout) {
            Ok(reply) => reply,
            Err(e) => return Err(self.transport_failure(e, timeout)),
        };
        match reply {
            Message::EvalResult {
                id: reply_id,
                status,
                text,
            } if reply_id == id => {
                self.state = SessionState::Ready;
                if status == ExecStatus::Error {
                    return Err(KernelError::InlineEval {
                        expr: expr.to_string(),
                        message: text,
                    });
                }
                if text.contains(['\n', '\r']) {
                    return Err(KernelError::MultilineInlineResult {
                        expr: expr.to_string(),
                    });
                }
                Ok(text)
            }
            other => Err(self.protocol_error(format!(
                "expected eval_result {id}, got {} {}",
                other.type_name(),
                other.id()
            ))),
        }
    }

    /// Asks the kernel to exit and closes the transport. Safe to repeat.
    pub fn shutdown(&mut self) {
        if self.state == SessionState::Dead {
            return;
        }
        let id = self.take_id();
        let _ = self.transport.send(&Message::Shutdown { id });
        self.transport.close(self.timeouts.shutdown_grace);
        self.state = SessionState::Dead;
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Keeps figure names to a portable character set.
fn sanitize_label(label: &str) -> String {
    let clean: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if clean.is_empty() {
        "chunk".into()
    } else {
        clean
    }
}

/// Sessions of one render, started lazily per language.
pub struct SessionSet<'a> {
    registry: &'a KernelRegistry,
    figure_dir: PathBuf,
    timeouts: Timeouts,
    sessions: BTreeMap<String, Session>,
}

impl<'a> SessionSet<'a> {
    pub fn new(registry: &'a KernelRegistry, figure_dir: &Path, timeouts: Timeouts) -> Self {
        Self {
            registry,
            figure_dir: figure_dir.to_path_buf(),
            timeouts,
            sessions: BTreeMap::new(),
        }
    }

    pub fn session(&mut self, lang: &str) -> Result<&mut Session, KernelError> {
        if !self.sessions.contains_key(lang) {
            let session = Session::start(lang, self.registry, &self.figure_dir, self.timeouts)?;
            self.sessions.insert(lang.to_string(), session);
        }
        Ok(self.sessions.get_mut(lang).expect("inserted above"))
    }

    pub fn figure_dir(&self) -> &Path {
        &self.figure_dir
    }

    pub fn shutdown_all(&mut self) {
        for session in self.sessions.values_mut() {
            session.shutdown();
        }
    }
}

impl Drop for SessionSet<'_> {
    fn drop(&mut self) {
        self.shutdown_all();
    }
}
