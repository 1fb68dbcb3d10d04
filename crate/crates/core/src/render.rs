//! The full pipeline: read, parse, plan, execute, weave, write.

use std::path::{Path, PathBuf};

use log::Level;
use thiserror::Error;

use crate::chunk::{plan_chunks, validate_chunks, ChunkError, ChunkSpec};
use crate::citations::{load_bibliography, BibError, CitationIndex};
use crate::front_matter::{
    load_shared_header, merge_headers, FrontMatter, HeaderWarning, OutputEntry, OutputKind,
    OutputSpec, SharedHeaderError,
};
use crate::html::{is_known_theme, write_outputs, OutputJob, WriteError};
use crate::kernel::{ChunkResult, ExecStatus, KernelError, KernelRegistry, SessionSet, Timeouts};
use crate::markdown::{parse_document, DocumentError, ParseOptions, SourceDocument};
use crate::weave::{
    collect_inline_spans, execution_order, weave, InlineSpan, Step, WeaveError, WeaveInput,
    WovenDocument,
};

/// Which outputs to produce, overriding the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatOverride {
    Html,
    Slides,
    All,
}

#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    /// Defaults to the input file's directory.
    pub output_dir: Option<PathBuf>,
    pub format: Option<FormatOverride>,
    pub strict: bool,
    pub timeouts: Timeouts,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub level: Level,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    SharedHeader(SharedHeaderError),
    #[error("{}:{}: {err}", path.display(), err.line())]
    Document { path: PathBuf, err: DocumentError },
    #[error("{}:{}: {err}", path.display(), err.line())]
    Chunk { path: PathBuf, err: ChunkError },
    #[error("{}: {err}", path.display())]
    Bibliography { path: PathBuf, err: BibError },
    #[error("{}: {}", path.display(), messages.join("; "))]
    Strict {
        path: PathBuf,
        messages: Vec<String>,
    },
    #[error("{}:{line}: chunk '{label}': {err}", path.display())]
    Kernel {
        path: PathBuf,
        line: usize,
        label: String,
        err: KernelError,
    },
    #[error("{}:{line}: chunk '{label}' failed: {message}", path.display())]
    ChunkFailed {
        path: PathBuf,
        line: usize,
        label: String,
        message: String,
    },
    #[error("{}:{line}: {err}", path.display())]
    Inline {
        path: PathBuf,
        line: usize,
        err: KernelError,
    },
    #[error("{}: {err}", path.display())]
    Weave { path: PathBuf, err: WeaveError },
    #[error("{}: {err}", path.display())]
    Output { path: PathBuf, err: WriteError },
    #[error("cannot create figure directory: {0}")]
    FigureDir(std::io::Error),
}

impl RenderError {
    /// 1 for parse and configuration errors, 2 for execution errors, 3 for
    /// I/O errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            RenderError::Read { .. } | RenderError::FigureDir(_) => 3,
            RenderError::SharedHeader(SharedHeaderError::Io { .. }) => 3,
            RenderError::SharedHeader(SharedHeaderError::Malformed { .. }) => 1,
            RenderError::Document { .. }
            | RenderError::Chunk { .. }
            | RenderError::Strict { .. }
            | RenderError::Weave { .. } => 1,
            RenderError::Bibliography { err, .. } => match err {
                BibError::Io { .. } => 3,
                _ => 1,
            },
            RenderError::Kernel { .. }
            | RenderError::ChunkFailed { .. }
            | RenderError::Inline { .. } => 2,
            RenderError::Output { err, .. } => match err {
                WriteError::NoSlides(_) => 1,
                WriteError::Io { .. } => 3,
            },
        }
    }
}

/// A parsed, validated document ready to execute.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub path: PathBuf,
    pub doc: SourceDocument,
    pub outputs: Vec<OutputSpec>,
    pub chunks: Vec<ChunkSpec>,
    pub inline: Vec<InlineSpan>,
    pub citations: Option<CitationIndex>,
    pub diagnostics: Vec<Diagnostic>,
}

fn source_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// The outputs to produce after applying `format`.
pub fn select_outputs(front: &FrontMatter, format: Option<FormatOverride>) -> Vec<OutputSpec> {
    let declared = front.outputs();
    let kinds: Vec<OutputKind> = match format {
        None => return declared,
        Some(FormatOverride::Html) => vec![OutputKind::HtmlDocument],
        Some(FormatOverride::Slides) => vec![OutputKind::HtmlSlides],
        Some(FormatOverride::All) => vec![OutputKind::HtmlDocument, OutputKind::HtmlSlides],
    };
    kinds
        .into_iter()
        .map(|kind| {
            declared
                .iter()
                .find(|s| s.kind == kind)
                .cloned()
                .unwrap_or_else(|| {
                    let mut only = front.clone();
                    only.output_entries = Some(vec![OutputEntry::new(kind)]);
                    only.outputs().remove(0)
                })
        })
        .collect()
}

/// Reads and checks a document without running anything.
pub fn prepare(
    path: &Path,
    registry: &KernelRegistry,
    opts: &RenderOptions,
) -> Result<Prepared, RenderError> {
    let source = std::fs::read_to_string(path).map_err(|source| RenderError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let dir = source_dir(path);
    let shared = load_shared_header(&dir).map_err(RenderError::SharedHeader)?;
    let parse_opts = ParseOptions::with_langs(registry.langs());
    let mut doc = parse_document(&source, &parse_opts).map_err(|err| RenderError::Document {
        path: path.to_path_buf(),
        err,
    })?;
    if let Some(shared) = shared {
        doc.front = merge_headers(&shared, &doc.front);
    }

    let mut diagnostics = Vec::new();
    let mut strict_failures = Vec::new();
    for warning in doc.front.warnings() {
        let level = match warning {
            HeaderWarning::UnknownKey(_) => {
                if opts.strict {
                    strict_failures.push(warning.to_string());
                }
                Level::Info
            }
            HeaderWarning::IgnoredOption { .. } => Level::Warn,
        };
        diagnostics.push(Diagnostic {
            level,
            message: warning.to_string(),
        });
    }
    if !strict_failures.is_empty() {
        return Err(RenderError::Strict {
            path: path.to_path_buf(),
            messages: strict_failures,
        });
    }

    let outputs = select_outputs(&doc.front, opts.format);
    for spec in &outputs {
        if !is_known_theme(&spec.theme) {
            diagnostics.push(Diagnostic {
                level: Level::Warn,
                message: format!("unknown theme '{}', using 'default'", spec.theme),
            });
        }
    }
    let fig_defaults = outputs
        .first()
        .map_or((7.0, 5.0), |spec| (spec.fig_width, spec.fig_height));
    let chunk_err = |err| RenderError::Chunk {
        path: path.to_path_buf(),
        err,
    };
    let chunks = plan_chunks(&doc.blocks, fig_defaults).map_err(chunk_err)?;
    validate_chunks(&chunks, |lang| registry.contains(lang)).map_err(chunk_err)?;
    let inline = collect_inline_spans(&doc);

    let citations = match &doc.front.bibliography {
        Some(bib) => {
            let bib_path = dir.join(bib);
            Some(
                load_bibliography(&bib_path).map_err(|err| RenderError::Bibliography {
                    path: bib_path,
                    err,
                })?,
            )
        }
        None => None,
    };

    Ok(Prepared {
        path: path.to_path_buf(),
        doc,
        outputs,
        chunks,
        inline,
        citations,
        diagnostics,
    })
}

/// Execution results, one per chunk and one per inline expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Executed {
    pub results: Vec<ChunkResult>,
    pub inline_values: Vec<String>,
}

/// Runs every chunk and inline expression in document order on fresh
/// sessions, then shuts the sessions down.
pub fn execute(
    prepared: &Prepared,
    registry: &KernelRegistry,
    figure_dir: &Path,
    timeouts: Timeouts,
) -> Result<Executed, RenderError> {
    let mut sessions = SessionSet::new(registry, figure_dir, timeouts);
    let mut results = Vec::with_capacity(prepared.chunks.len());
    let mut inline_values = Vec::with_capacity(prepared.inline.len());
    let path = &prepared.path;
    for step in execution_order(&prepared.doc) {
        match step {
            Step::Chunk(i) => {
                let chunk = &prepared.chunks[i];
                let label = chunk.label();
                log::debug!("running chunk '{label}' (line {})", chunk.line);
                let kernel_err = |err| RenderError::Kernel {
                    path: path.clone(),
                    line: chunk.line,
                    label: label.clone(),
                    err,
                };
                let session = sessions.session(&chunk.options.lang).map_err(kernel_err)?;
                let result = session
                    .execute_chunk(&chunk.code, &chunk.options, &label)
                    .map_err(kernel_err)?;
                if result.status == ExecStatus::Error && !chunk.options.error {
                    return Err(RenderError::ChunkFailed {
                        path: path.clone(),
                        line: chunk.line,
                        label,
                        message: result.error_text().unwrap_or_default(),
                    });
                }
                results.push(result);
            }
            Step::Inline(i) => {
                let span = &prepared.inline[i];
                let inline_err = |err| RenderError::Inline {
                    path: path.clone(),
                    line: span.line,
                    err,
                };
                let session = sessions.session(&span.lang).map_err(inline_err)?;
                inline_values.push(session.evaluate_inline(&span.expr).map_err(inline_err)?);
            }
        }
    }
    sessions.shutdown_all();
    Ok(Executed {
        results,
        inline_values,
    })
}

/// Weaves a prepared document with its execution results.
pub fn weave_prepared(
    prepared: &mut Prepared,
    executed: &Executed,
    strict: bool,
) -> Result<WovenDocument, RenderError> {
    let woven = weave(
        &prepared.doc,
        WeaveInput {
            chunks: &prepared.chunks,
            results: &executed.results,
            inline_values: &executed.inline_values,
            citations: prepared.citations.as_mut(),
            strict,
        },
    )
    .map_err(|err| RenderError::Weave {
        path: prepared.path.clone(),
        err,
    })?;
    prepared
        .diagnostics
        .extend(woven.warnings.iter().map(|w| Diagnostic {
            level: Level::Warn,
            message: w.to_string(),
        }));
    Ok(woven)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderReport {
    pub written: Vec<PathBuf>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Renders `path` and writes every requested output.
pub fn render_file(
    path: &Path,
    registry: &KernelRegistry,
    opts: &RenderOptions,
) -> Result<RenderReport, RenderError> {
    let mut prepared = prepare(path, registry, opts)?;
    let figures = tempfile::Builder::new()
        .prefix("weave-figures-")
        .tempdir()
        .map_err(RenderError::FigureDir)?;
    let executed = execute(&prepared, registry, figures.path(), opts.timeouts)?;
    let woven = weave_prepared(&mut prepared, &executed, opts.strict)?;

    let dir = source_dir(path);
    let out_dir = opts.output_dir.clone().unwrap_or_else(|| dir.clone());
    let stem = path.file_stem().map_or_else(
        || "document".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    let logo = woven.front.logo.as_ref().map(|l| dir.join(l));
    let job = OutputJob {
        out_dir: &out_dir,
        stem: &stem,
        figure_dir: Some(figures.path()),
        logo: logo.as_deref(),
    };
    let written =
        write_outputs(&woven, &prepared.outputs, &job).map_err(|err| RenderError::Output {
            path: path.to_path_buf(),
            err,
        })?;
    Ok(RenderReport {
        written,
        diagnostics: prepared.diagnostics,
    })
}

/// Parses and validates only.
pub fn check_file(
    path: &Path,
    registry: &KernelRegistry,
    opts: &RenderOptions,
) -> Result<Prepared, RenderError> {
    prepare(path, registry, opts)
}
