use crate::citations::Reference;
use crate::kernel::{FigureRef, Segment, StructuredTable};

/// Inclusive range of 1-based source lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn line(line: usize) -> Self {
        Self::new(line, line)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub span: Span,
}

impl Block {
    pub fn new(kind: BlockKind, span: Span) -> Self {
        Self { kind, span }
    }

    pub fn line(&self) -> usize {
        self.span.start
    }
}

/// Block-level nodes. The parser produces the first group; the weaver
/// replaces every `CodeChunk` with nodes from the second group.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    Heading {
        level: u8,
        inlines: Vec<Inline>,
        /// Classes from a trailing `{.a .b}`.
        attrs: Vec<String>,
    },
    Paragraph(Vec<Inline>),
    BulletList(Vec<Vec<Block>>),
    OrderedList {
        /// Number written on the first item; rendering always counts from 1.
        start: u64,
        items: Vec<Vec<Block>>,
    },
    BlockQuote(Vec<Block>),
    /// Plain fixed-width box.
    FencedCode(String),
    CodeChunk {
        options_raw: String,
        code: String,
    },
    Table(Table),
    RawHtml(String),

    EchoedCode {
        lang: String,
        code: String,
    },
    Output(Vec<Segment>),
    Figure(FigureRef),
    KernelTable(StructuredTable),
    References(Vec<Reference>),
    AppendixMarker,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<Vec<Inline>>,
    pub rows: Vec<Vec<Vec<Inline>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inline {
    Text(String),
    Emph(Vec<Inline>),
    Strong(Vec<Inline>),
    Link {
        content: Vec<Inline>,
        url: String,
    },
    Image {
        alt: String,
        src: String,
    },
    Code(String),
    InlineEval {
        lang: String,
        expr: String,
    },
    Superscript(Vec<Inline>),
    Subscript(Vec<Inline>),
    Strikeout(Vec<Inline>),
    /// TeX source, untouched.
    Math {
        tex: String,
        display: bool,
    },
    Citation {
        key: String,
    },
    RawHtml(String),
}

/// Concatenated text content, as used for anchors and titles.
pub fn plain_text(inlines: &[Inline]) -> String {
    let mut out = String::new();
    collect_text(inlines, &mut out);
    out
}

fn collect_text(inlines: &[Inline], out: &mut String) {
    for inline in inlines {
        match inline {
            Inline::Text(t) | Inline::Code(t) => out.push_str(t),
            Inline::Emph(c)
            | Inline::Strong(c)
            | Inline::Superscript(c)
            | Inline::Subscript(c)
            | Inline::Strikeout(c)
            | Inline::Link { content: c, .. } => collect_text(c, out),
            Inline::Image { alt, .. } => out.push_str(alt),
            Inline::InlineEval { expr, .. } => out.push_str(expr),
            Inline::Math { tex, .. } => out.push_str(tex),
            Inline::Citation { key } => {
                out.push_str("[@");
                out.push_str(key);
                out.push(']');
            }
            Inline::RawHtml(_) => {}
        }
    }
}
