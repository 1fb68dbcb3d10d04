//! Markdown dialect: blocks, inlines and executable chunks.

mod ast;
mod block;
mod inline;
pub mod tags;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::front_matter::{parse_front_matter, FrontMatter, MalformedHeader};

pub use ast::{plain_text, Block, BlockKind, Inline, Span, Table};
pub use block::parse_blocks;
pub use inline::parse_inlines;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: code fence is never closed")]
    UnterminatedFence { line: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DocumentError {
    #[error(transparent)]
    Header(#[from] MalformedHeader),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl DocumentError {
    pub fn line(&self) -> usize {
        match self {
            DocumentError::Header(err) => err.line,
            DocumentError::Parse(ParseError::UnterminatedFence { line }) => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOptions {
    /// Words that turn `` `word expr` `` into an inline evaluation.
    pub inline_langs: BTreeSet<String>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self::with_langs(["calc", "r", "py", "python"])
    }
}

impl ParseOptions {
    pub fn with_langs<I, S>(langs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            inline_langs: langs.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceDocument {
    pub front: FrontMatter,
    pub blocks: Vec<Block>,
    pub body_start_line: usize,
}

pub fn parse_document(source: &str, opts: &ParseOptions) -> Result<SourceDocument, DocumentError> {
    let split = parse_front_matter(source)?;
    let blocks = parse_blocks(&split.body, split.body_start_line, opts)?;
    Ok(SourceDocument {
        front: split.front,
        blocks,
        body_start_line: split.body_start_line,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_code_is_verbatim() {
        let doc = parse_document(
            "```{calc}\nprint(\"*not emphasis*\")\n```\n",
            &ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(
            doc.blocks[0].kind,
            BlockKind::CodeChunk {
                options_raw: "calc".into(),
                code: "print(\"*not emphasis*\")".into()
            }
        );
    }

    #[test]
    fn math_is_not_inline_parsed() {
        let doc = parse_document("text with $x^2$", &ParseOptions::default()).unwrap();
        assert_eq!(
            doc.blocks[0].kind,
            BlockKind::Paragraph(vec![
                Inline::Text("text with ".into()),
                Inline::Math {
                    tex: "x^2".into(),
                    display: false
                }
            ])
        );
    }

    #[test]
    fn header_lines_offset_body_spans() {
        let doc =
            parse_document("---\ntitle: t\n---\n\n# Head\n", &ParseOptions::default()).unwrap();
        assert_eq!(doc.body_start_line, 4);
        assert_eq!(doc.blocks[0].span, Span::line(5));
    }

    #[test]
    fn errors_carry_lines() {
        let err = parse_document("---\ntitle: x\n", &ParseOptions::default()).unwrap_err();
        assert_eq!(err.line(), 1);
        let err = parse_document("---\ntitle: x\n---\n```\nopen\n", &ParseOptions::default())
            .unwrap_err();
        assert_eq!(err.line(), 4);
    }
}
