//! HTML serialization of woven documents. The markup is described in
//! `docs/output.md`.

mod slides;
mod themes;
mod write;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::front_matter::{OutputKind, OutputSpec, Transition};
use crate::kernel::{FigureRef, StructuredTable};
use crate::markdown::{plain_text, Block, BlockKind, Inline};
use crate::weave::WovenDocument;

pub use slides::{render_slides, split_slides, NoSlides, Slide};
pub use themes::{is_known as is_known_theme, THEMES};
pub use write::{write_outputs, OutputJob, WriteError};

/// Pixels per display inch, used for figure sizes.
pub const PX_PER_INCH: f64 = 96.0;

pub const MATHJAX_URL: &str = "https://cdn.jsdelivr.net/npm/mathjax@3/es5/tex-mml-chtml.js";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Document,
    Slides,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub mode: Mode,
    pub toc: bool,
    pub theme: String,
    pub widescreen: bool,
    pub transition: Transition,
    pub text_size: Option<String>,
    pub bullet: Option<String>,
    /// Logo file name inside `files_dir`.
    pub logo: Option<String>,
    /// Relative directory that holds figures and the logo, e.g. `doc_files`.
    pub files_dir: String,
}

impl RenderConfig {
    pub fn from_spec(spec: &OutputSpec, files_dir: &str, logo: Option<String>) -> Self {
        let mode = match spec.kind {
            OutputKind::HtmlDocument => Mode::Document,
            OutputKind::HtmlSlides => Mode::Slides,
        };
        Self {
            mode,
            toc: spec.toc,
            theme: spec.theme.clone(),
            widescreen: spec.widescreen,
            transition: spec.transition,
            text_size: spec.text_size.clone(),
            bullet: spec.bullet.clone(),
            logo: if mode == Mode::Slides { logo } else { None },
            files_dir: files_dir.to_string(),
        }
    }

    pub fn document(files_dir: &str) -> Self {
        Self::from_spec(
            &OutputSpec::defaults(OutputKind::HtmlDocument),
            files_dir,
            None,
        )
    }

    pub fn slides(files_dir: &str) -> Self {
        Self::from_spec(
            &OutputSpec::defaults(OutputKind::HtmlSlides),
            files_dir,
            None,
        )
    }

    fn theme_vars(&self) -> &'static str {
        themes::theme_vars(&self.theme)
            .unwrap_or_else(|| themes::theme_vars("default").expect("default theme exists"))
    }
}

/// Escapes text for element content and attribute values.
pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Anchor ids: lowercase words joined by hyphens, `section` when nothing is
/// left, and `-1`, `-2`, ... appended on collision.
#[derive(Debug, Default)]
pub struct Anchors {
    used: BTreeSet<String>,
}

impl Anchors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next(&mut self, text: &str) -> String {
        let base = slug(text);
        let mut id = base.clone();
        let mut n = 0;
        while self.used.contains(&id) {
            n += 1;
            id = format!("{base}-{n}");
        }
        self.used.insert(id.clone());
        id
    }
}

fn slug(text: &str) -> String {
    let mut out = String::new();
    let mut gap = false;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('-');
            }
            gap = false;
            out.push(c);
        } else if c.is_whitespace() || c == '-' || c == '_' {
            gap = true;
        }
    }
    if out.is_empty() {
        "section".into()
    } else {
        out
    }
}

/// A heading with its assigned anchor, in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadingEntry {
    pub level: u8,
    pub text: String,
    pub id: String,
}

/// Assigns anchors to every heading, including headings in quotes and list
/// items, in the order the renderer meets them.
pub fn heading_entries(blocks: &[Block]) -> Vec<HeadingEntry> {
    fn walk(blocks: &[Block], anchors: &mut Anchors, out: &mut Vec<HeadingEntry>) {
        for block in blocks {
            match &block.kind {
                BlockKind::Heading { level, inlines, .. } => {
                    let text = plain_text(inlines);
                    let id = anchors.next(&text);
                    out.push(HeadingEntry {
                        level: *level,
                        text,
                        id,
                    });
                }
                BlockKind::BlockQuote(inner) => walk(inner, anchors, out),
                BlockKind::BulletList(items) | BlockKind::OrderedList { items, .. } => {
                    for item in items {
                        walk(item, anchors, out);
                    }
                }
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    walk(blocks, &mut Anchors::new(), &mut out);
    out
}

pub fn has_math(blocks: &[Block]) -> bool {
    fn inl(inlines: &[Inline]) -> bool {
        inlines.iter().any(|i| match i {
            Inline::Math { .. } => true,
            Inline::Emph(c)
            | Inline::Strong(c)
            | Inline::Superscript(c)
            | Inline::Subscript(c)
            | Inline::Strikeout(c)
            | Inline::Link { content: c, .. } => inl(c),
            _ => false,
        })
    }
    blocks.iter().any(|b| match &b.kind {
        BlockKind::Heading { inlines, .. } | BlockKind::Paragraph(inlines) => inl(inlines),
        BlockKind::BulletList(items) | BlockKind::OrderedList { items, .. } => {
            items.iter().any(|item| has_math(item))
        }
        BlockKind::BlockQuote(inner) => has_math(inner),
        BlockKind::Table(t) => t
            .header
            .iter()
            .chain(t.rows.iter().flatten())
            .any(|c| inl(c)),
        _ => false,
    })
}

/// Renders blocks to HTML. Heading ids come from `headings`, consumed in
/// order.
pub(crate) struct BodyWriter<'a> {
    pub cfg: &'a RenderConfig,
    pub headings: std::vec::IntoIter<HeadingEntry>,
    pub out: String,
}

impl<'a> BodyWriter<'a> {
    pub fn new(cfg: &'a RenderConfig, blocks: &[Block]) -> Self {
        Self {
            cfg,
            headings: heading_entries(blocks).into_iter(),
            out: String::new(),
        }
    }

    pub fn blocks(&mut self, blocks: &[Block]) {
        for block in blocks {
            self.block(block);
        }
    }

    pub fn block(&mut self, block: &Block) {
        match &block.kind {
            BlockKind::Heading {
                level,
                inlines,
                attrs,
            } => {
                let id = self.headings.next().map(|h| h.id).unwrap_or_default();
                let _ = write!(self.out, "<h{level} id=\"{}\"", escape(&id));
                if !attrs.is_empty() {
                    let _ = write!(self.out, " class=\"{}\"", escape(&attrs.join(" ")));
                }
                self.out.push('>');
                inlines_html(inlines, &mut self.out);
                let _ = writeln!(self.out, "</h{level}>");
            }
            BlockKind::Paragraph(inlines) => {
                self.out.push_str("<p>");
                inlines_html(inlines, &mut self.out);
                self.out.push_str("</p>\n");
            }
            BlockKind::BulletList(items) => self.list("ul", items),
            BlockKind::OrderedList { items, .. } => self.list("ol", items),
            BlockKind::BlockQuote(inner) => {
                self.out.push_str("<blockquote>\n");
                self.blocks(inner);
                self.out.push_str("</blockquote>\n");
            }
            BlockKind::FencedCode(text) => {
                let _ = writeln!(
                    self.out,
                    "<pre class=\"fixed\"><code>{}</code></pre>",
                    escape(text)
                );
            }
            BlockKind::CodeChunk { options_raw, code } => {
                // Only reachable when rendering an unwoven tree.
                let _ = writeln!(
                    self.out,
                    "<pre class=\"chunk-unexecuted\" data-options=\"{}\"><code>{}</code></pre>",
                    escape(options_raw),
                    escape(code)
                );
            }
            BlockKind::Table(table) => {
                self.out
                    .push_str("<table class=\"md-table\">\n<thead>\n<tr>");
                for cell in &table.header {
                    self.out.push_str("<th>");
                    inlines_html(cell, &mut self.out);
                    self.out.push_str("</th>");
                }
                self.out.push_str("</tr>\n</thead>\n<tbody>\n");
                for row in &table.rows {
                    self.out.push_str("<tr>");
                    for cell in row {
                        self.out.push_str("<td>");
                        inlines_html(cell, &mut self.out);
                        self.out.push_str("</td>");
                    }
                    self.out.push_str("</tr>\n");
                }
                self.out.push_str("</tbody>\n</table>\n");
            }
            BlockKind::RawHtml(html) => {
                self.out.push_str(html);
                self.out.push('\n');
            }
            BlockKind::EchoedCode { lang, code } => {
                let _ = writeln!(
                    self.out,
                    "<pre class=\"chunk-source\"><code class=\"language-{}\">{}</code></pre>",
                    escape(lang),
                    escape(code)
                );
            }
            BlockKind::Output(segments) => {
                self.out.push_str("<div class=\"chunk-output\">\n");
                for segment in segments {
                    let _ = writeln!(
                        self.out,
                        "<pre class=\"stream-{}\"><code>{}</code></pre>",
                        segment.stream.name(),
                        escape(&segment.text)
                    );
                }
                self.out.push_str("</div>\n");
            }
            BlockKind::Figure(figure) => self.figure(figure),
            BlockKind::KernelTable(table) => kernel_table(table, &mut self.out),
            BlockKind::References(refs) => {
                self.out
                    .push_str("<div id=\"refs\" class=\"references\">\n");
                for r in refs {
                    let _ = writeln!(
                        self.out,
                        "<p class=\"reference\" id=\"ref-{}\">{}</p>",
                        escape(&r.key),
                        escape(&r.text)
                    );
                }
                self.out.push_str("</div>\n");
            }
            BlockKind::AppendixMarker => self.out.push_str("<hr class=\"appendix\">\n"),
        }
    }

    fn list(&mut self, tag: &str, items: &[Vec<Block>]) {
        let _ = writeln!(self.out, "<{tag}>");
        for item in items {
            self.out.push_str("<li>");
            match item.as_slice() {
                [Block {
                    kind: BlockKind::Paragraph(inlines),
                    ..
                }] => inlines_html(inlines, &mut self.out),
                blocks => {
                    // A leading paragraph stays tight; the rest go on their
                    // own lines.
                    let rest = match blocks.first() {
                        Some(Block {
                            kind: BlockKind::Paragraph(inlines),
                            ..
                        }) => {
                            inlines_html(inlines, &mut self.out);
                            &blocks[1..]
                        }
                        _ => blocks,
                    };
                    self.out.push('\n');
                    self.blocks(rest);
                }
            }
            self.out.push_str("</li>\n");
        }
        let _ = writeln!(self.out, "</{tag}>");
    }

    fn figure(&mut self, figure: &FigureRef) {
        let _ = writeln!(
            self.out,
            "<figure class=\"chunk-figure\"><img src=\"{}/{}\" width=\"{}\" height=\"{}\" alt=\"{}\"></figure>",
            escape(&self.cfg.files_dir),
            escape(&figure.name),
            px(figure.width),
            px(figure.height),
            escape(&figure.name)
        );
    }
}

/// Display inches to whole pixels.
pub fn px(inches: f64) -> i64 {
    (inches * PX_PER_INCH).round() as i64
}

fn kernel_table(table: &StructuredTable, out: &mut String) {
    out.push_str("<table class=\"chunk-table\">\n<thead>\n<tr>");
    for cell in &table.header {
        let _ = write!(out, "<th>{}</th>", escape(cell));
    }
    out.push_str("</tr>\n</thead>\n<tbody>\n");
    for row in &table.rows {
        out.push_str("<tr>");
        for cell in row {
            let _ = write!(out, "<td>{}</td>", escape(cell));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</tbody>\n</table>\n");
}

pub fn inlines_html(inlines: &[Inline], out: &mut String) {
    for inline in inlines {
        match inline {
            Inline::Text(t) => out.push_str(&escape(t)),
            Inline::Emph(c) => wrap("em", c, out),
            Inline::Strong(c) => wrap("strong", c, out),
            Inline::Superscript(c) => wrap("sup", c, out),
            Inline::Subscript(c) => wrap("sub", c, out),
            Inline::Strikeout(c) => wrap("del", c, out),
            Inline::Link { content, url } => {
                let _ = write!(out, "<a href=\"{}\">", escape(url));
                inlines_html(content, out);
                out.push_str("</a>");
            }
            Inline::Image { alt, src } => {
                let _ = write!(out, "<img src=\"{}\" alt=\"{}\">", escape(src), escape(alt));
            }
            Inline::Code(code) => {
                let _ = write!(out, "<code>{}</code>", escape(code));
            }
            Inline::InlineEval { lang, expr } => {
                let _ = write!(out, "<code>{} {}</code>", escape(lang), escape(expr));
            }
            Inline::Math {
                tex,
                display: false,
            } => {
                let _ = write!(
                    out,
                    "<span class=\"math inline\">\\({}\\)</span>",
                    escape(tex)
                );
            }
            Inline::Math { tex, display: true } => {
                let _ = write!(
                    out,
                    "<span class=\"math display\">\\[{}\\]</span>",
                    escape(tex)
                );
            }
            Inline::Citation { key } => {
                let _ = write!(out, "[@{}]", escape(key));
            }
            Inline::RawHtml(html) => out.push_str(html),
        }
    }
}

fn wrap(tag: &str, content: &[Inline], out: &mut String) {
    let _ = write!(out, "<{tag}>");
    inlines_html(content, out);
    let _ = write!(out, "</{tag}>");
}

pub(crate) fn head(title: Option<&str>, style: &str, math: bool) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    out.push_str("<meta name=\"generator\" content=\"weave\">\n");
    out.push_str("<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n");
    let _ = writeln!(out, "<title>{}</title>", escape(title.unwrap_or("")));
    let _ = write!(out, "<style>\n{style}</style>\n");
    if math {
        let _ = writeln!(
            out,
            "<script id=\"MathJax-script\" async src=\"{MATHJAX_URL}\"></script>"
        );
    }
    out.push_str("</head>\n");
    out
}

fn title_block(doc: &WovenDocument, out: &mut String) {
    let front = &doc.front;
    if let Some(title) = &front.title {
        let _ = writeln!(out, "<h1 class=\"title\">{}</h1>", escape(title));
    }
    if let Some(author) = &front.author {
        let _ = writeln!(out, "<p class=\"author\">{}</p>", escape(author));
    }
    if let Some(date) = &front.date {
        let _ = writeln!(out, "<p class=\"date\">{}</p>", escape(date));
    }
}

pub fn render_document(doc: &WovenDocument, cfg: &RenderConfig) -> String {
    let style = format!(":root {{ {} }}\n{}", cfg.theme_vars(), themes::BASE_CSS);
    let mut out = head(doc.front.title.as_deref(), &style, has_math(&doc.blocks));
    out.push_str("<body>\n<div class=\"container\">\n");
    let front = &doc.front;
    if front.title.is_some() || front.author.is_some() || front.date.is_some() {
        out.push_str("<header id=\"title-block\">\n");
        title_block(doc, &mut out);
        out.push_str("</header>\n");
    }
    let mut body = BodyWriter::new(cfg, &doc.blocks);
    if cfg.toc {
        let entries: Vec<HeadingEntry> = heading_entries(&doc.blocks)
            .into_iter()
            .filter(|h| h.level <= 3)
            .collect();
        if !entries.is_empty() {
            out.push_str("<nav id=\"TOC\">\n<ul>\n");
            for h in &entries {
                let _ = writeln!(
                    out,
                    "<li class=\"toc-level-{}\"><a href=\"#{}\">{}</a></li>",
                    h.level,
                    escape(&h.id),
                    escape(&h.text)
                );
            }
            out.push_str("</ul>\n</nav>\n");
        }
    }
    body.blocks(&doc.blocks);
    out.push_str(&body.out);
    out.push_str("</div>\n</body>\n</html>\n");
    out
}

/// Just the body markup for `blocks`, without page chrome or TOC.
pub fn render_body(blocks: &[Block], cfg: &RenderConfig) -> String {
    let mut body = BodyWriter::new(cfg, blocks);
    body.blocks(blocks);
    body.out
}
