//! Merging prose, echoed code, execution results and citations into the
//! final block tree.

use thiserror::Error;

use crate::chunk::ChunkSpec;
use crate::citations::{CitationIndex, Resolution};
use crate::front_matter::FrontMatter;
use crate::kernel::{Artifact, ChunkResult, Segment, Stream};
use crate::markdown::{Block, BlockKind, Inline, SourceDocument, Span};

/// One inline evaluation, in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InlineSpan {
    /// Line of the enclosing block.
    pub line: usize,
    pub lang: String,
    pub expr: String,
}

/// An execution step: the `n`th chunk or the `n`th inline expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Chunk(usize),
    Inline(usize),
}

fn visit_inlines(inlines: &[Inline], line: usize, f: &mut dyn FnMut(InlineSpan)) {
    for inline in inlines {
        match inline {
            Inline::InlineEval { lang, expr } => f(InlineSpan {
                line,
                lang: lang.clone(),
                expr: expr.clone(),
            }),
            Inline::Emph(c)
            | Inline::Strong(c)
            | Inline::Superscript(c)
            | Inline::Subscript(c)
            | Inline::Strikeout(c)
            | Inline::Link { content: c, .. } => visit_inlines(c, line, f),
            _ => {}
        }
    }
}

/// Calls `on_chunk` for each chunk and `on_inline` for each inline
/// expression, in document order.
fn visit_blocks(
    blocks: &[Block],
    on_chunk: &mut dyn FnMut(&Block),
    on_inline: &mut dyn FnMut(InlineSpan),
) {
    for block in blocks {
        let line = block.line();
        match &block.kind {
            BlockKind::CodeChunk { .. } => on_chunk(block),
            BlockKind::Heading { inlines, .. } | BlockKind::Paragraph(inlines) => {
                visit_inlines(inlines, line, on_inline)
            }
            BlockKind::BulletList(items) | BlockKind::OrderedList { items, .. } => {
                for item in items {
                    visit_blocks(item, on_chunk, on_inline);
                }
            }
            BlockKind::BlockQuote(inner) => visit_blocks(inner, on_chunk, on_inline),
            BlockKind::Table(table) => {
                for cell in table.header.iter().chain(table.rows.iter().flatten()) {
                    visit_inlines(cell, line, on_inline);
                }
            }
            _ => {}
        }
    }
}

/// Every inline expression in document order.
pub fn collect_inline_spans(doc: &SourceDocument) -> Vec<InlineSpan> {
    let mut spans = Vec::new();
    visit_blocks(&doc.blocks, &mut |_| {}, &mut |span| spans.push(span));
    spans
}

/// The order in which chunks and inline expressions must run.
pub fn execution_order(doc: &SourceDocument) -> Vec<Step> {
    let mut steps = Vec::new();
    let (mut chunks, mut inlines) = (0, 0);
    let steps_ref = std::cell::RefCell::new(&mut steps);
    visit_blocks(
        &doc.blocks,
        &mut |_| {
            steps_ref.borrow_mut().push(Step::Chunk(chunks));
            chunks += 1;
        },
        &mut |_| {
            steps_ref.borrow_mut().push(Step::Inline(inlines));
            inlines += 1;
        },
    );
    steps
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeaveWarning {
    UnresolvedCitation { key: String, line: usize },
}

impl std::fmt::Display for WeaveWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WeaveWarning::UnresolvedCitation { key, line } => {
                write!(
                    f,
                    "line {line}: citation '@{key}' not found in the bibliography"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeaveError {
    #[error("line {line}: citation '@{key}' not found in the bibliography")]
    UnresolvedCitation { key: String, line: usize },
    #[error("{kind} {index} has no result")]
    MissingResult { kind: &'static str, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WovenDocument {
    pub front: FrontMatter,
    pub blocks: Vec<Block>,
    pub warnings: Vec<WeaveWarning>,
}

/// What the weaver needs besides the parsed document.
pub struct WeaveInput<'a> {
    /// Chunks in document order, as returned by `plan_chunks`.
    pub chunks: &'a [ChunkSpec],
    /// One result per chunk.
    pub results: &'a [ChunkResult],
    /// One value per inline expression, in document order.
    pub inline_values: &'a [String],
    /// Present when the document has a bibliography.
    pub citations: Option<&'a mut CitationIndex>,
    /// Unresolved citations become errors.
    pub strict: bool,
}

struct Weaver<'a> {
    input: WeaveInput<'a>,
    next_chunk: usize,
    next_inline: usize,
    appendix: Vec<Block>,
    warnings: Vec<WeaveWarning>,
}

pub const APPENDIX_TITLE: &str = "Appendix";
pub const REFERENCES_TITLE: &str = "References";

pub fn weave(doc: &SourceDocument, input: WeaveInput<'_>) -> Result<WovenDocument, WeaveError> {
    let mut weaver = Weaver {
        input,
        next_chunk: 0,
        next_inline: 0,
        appendix: Vec::new(),
        warnings: Vec::new(),
    };
    let mut blocks = weaver.blocks(&doc.blocks)?;
    let end = doc
        .blocks
        .last()
        .map_or(doc.body_start_line + 1, |b| b.span.end);
    let tail = Span::line(end);

    if let Some(index) = weaver.input.citations.as_deref() {
        let references = index.references();
        if !references.is_empty() {
            blocks.push(Block::new(heading(REFERENCES_TITLE), tail));
            blocks.push(Block::new(BlockKind::References(references), tail));
        }
    }
    if !weaver.appendix.is_empty() {
        blocks.push(Block::new(BlockKind::AppendixMarker, tail));
        blocks.push(Block::new(heading(APPENDIX_TITLE), tail));
        blocks.append(&mut weaver.appendix);
    }
    Ok(WovenDocument {
        front: doc.front.clone(),
        blocks,
        warnings: weaver.warnings,
    })
}

fn heading(text: &str) -> BlockKind {
    BlockKind::Heading {
        level: 2,
        inlines: vec![Inline::Text(text.to_string())],
        attrs: Vec::new(),
    }
}

impl Weaver<'_> {
    fn blocks(&mut self, blocks: &[Block]) -> Result<Vec<Block>, WeaveError> {
        let mut out = Vec::with_capacity(blocks.len());
        for block in blocks {
            let span = block.span;
            let line = block.line();
            let kind = match &block.kind {
                BlockKind::CodeChunk { .. } => {
                    self.chunk(span, &mut out)?;
                    continue;
                }
                BlockKind::Heading {
                    level,
                    inlines,
                    attrs,
                } => BlockKind::Heading {
                    level: *level,
                    inlines: self.inlines(inlines, line)?,
                    attrs: attrs.clone(),
                },
                BlockKind::Paragraph(inlines) => BlockKind::Paragraph(self.inlines(inlines, line)?),
                BlockKind::BulletList(items) => BlockKind::BulletList(self.items(items)?),
                BlockKind::OrderedList { start, items } => BlockKind::OrderedList {
                    start: *start,
                    items: self.items(items)?,
                },
                BlockKind::BlockQuote(inner) => BlockKind::BlockQuote(self.blocks(inner)?),
                BlockKind::Table(table) => {
                    let mut table = table.clone();
                    for cell in table
                        .header
                        .iter_mut()
                        .chain(table.rows.iter_mut().flatten())
                    {
                        *cell = self.inlines(cell, line)?;
                    }
                    BlockKind::Table(table)
                }
                other => other.clone(),
            };
            out.push(Block::new(kind, span));
        }
        Ok(out)
    }

    fn items(&mut self, items: &[Vec<Block>]) -> Result<Vec<Vec<Block>>, WeaveError> {
        items.iter().map(|item| self.blocks(item)).collect()
    }

    fn inlines(&mut self, inlines: &[Inline], line: usize) -> Result<Vec<Inline>, WeaveError> {
        let mut out: Vec<Inline> = Vec::with_capacity(inlines.len());
        for inline in inlines {
            let woven =
                match inline {
                    Inline::InlineEval { .. } => {
                        let index = self.next_inline;
                        self.next_inline += 1;
                        let value = self.input.inline_values.get(index).ok_or(
                            WeaveError::MissingResult {
                                kind: "inline expression",
                                index,
                            },
                        )?;
                        Inline::Text(value.clone())
                    }
                    Inline::Citation { key } => Inline::Text(self.cite(key, line)?),
                    Inline::Emph(c) => Inline::Emph(self.inlines(c, line)?),
                    Inline::Strong(c) => Inline::Strong(self.inlines(c, line)?),
                    Inline::Superscript(c) => Inline::Superscript(self.inlines(c, line)?),
                    Inline::Subscript(c) => Inline::Subscript(self.inlines(c, line)?),
                    Inline::Strikeout(c) => Inline::Strikeout(self.inlines(c, line)?),
                    Inline::Link { content, url } => Inline::Link {
                        content: self.inlines(content, line)?,
                        url: url.clone(),
                    },
                    other => other.clone(),
                };
            // Substituted text joins its neighbours.
            match (out.last_mut(), woven) {
                (Some(Inline::Text(prev)), Inline::Text(next)) => prev.push_str(&next),
                (_, woven) => out.push(woven),
            }
        }
        Ok(out)
    }

    fn cite(&mut self, key: &str, line: usize) -> Result<String, WeaveError> {
        let resolution = match self.input.citations.as_deref_mut() {
            Some(index) => index.cite(key),
            None => Resolution::Unresolved(format!("[@{key}]")),
        };
        match resolution {
            Resolution::Resolved(text) => Ok(text),
            Resolution::Unresolved(text) => {
                if self.input.strict {
                    return Err(WeaveError::UnresolvedCitation {
                        key: key.to_string(),
                        line,
                    });
                }
                self.warnings.push(WeaveWarning::UnresolvedCitation {
                    key: key.to_string(),
                    line,
                });
                Ok(text)
            }
        }
    }

    fn chunk(&mut self, span: Span, out: &mut Vec<Block>) -> Result<(), WeaveError> {
        let index = self.next_chunk;
        self.next_chunk += 1;
        let missing = WeaveError::MissingResult {
            kind: "chunk",
            index,
        };
        let spec = self.input.chunks.get(index).ok_or(missing.clone())?;
        let result = self.input.results.get(index).ok_or(missing)?;
        let opts = &spec.options;
        if opts.visibility().code {
            out.push(Block::new(
                BlockKind::EchoedCode {
                    lang: opts.lang.clone(),
                    code: spec.code.clone(),
                },
                span,
            ));
        }
        let produced = output_blocks(spec, result, span);
        if opts.defer_output {
            self.appendix.extend(produced);
        } else {
            out.extend(produced);
        }
        Ok(())
    }
}

/// The visible output of one chunk. Consecutive text segments share one
/// output block; figures and tables stand alone.
pub fn output_blocks(spec: &ChunkSpec, result: &ChunkResult, span: Span) -> Vec<Block> {
    let vis = spec.options.visibility();
    if !vis.output {
        return Vec::new();
    }
    let mut blocks = Vec::new();
    let mut pending: Vec<Segment> = Vec::new();
    let flush = |pending: &mut Vec<Segment>, blocks: &mut Vec<Block>| {
        if !pending.is_empty() {
            blocks.push(Block::new(BlockKind::Output(std::mem::take(pending)), span));
        }
    };
    for artifact in &result.artifacts {
        match artifact {
            Artifact::Segment(segment) => {
                let shown = match segment.stream {
                    Stream::Message => vis.messages,
                    Stream::Warning => vis.warnings,
                    Stream::Stdout | Stream::Value | Stream::Error => true,
                };
                if shown {
                    pending.push(segment.clone());
                }
            }
            Artifact::Figure(figure) => {
                flush(&mut pending, &mut blocks);
                blocks.push(Block::new(BlockKind::Figure(figure.clone()), span));
            }
            Artifact::Table(table) => {
                flush(&mut pending, &mut blocks);
                blocks.push(Block::new(BlockKind::KernelTable(table.clone()), span));
            }
        }
    }
    flush(&mut pending, &mut blocks);
    blocks
}
