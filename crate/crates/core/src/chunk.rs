//! Chunk headers, option layering and visibility.
//!
//! A chunk header is the text inside `{...}` on the opening fence:
//!
//! ```text
//! calc setup, message=FALSE, fig.width=4
//! ```
//!
//! The first word is the language, an optional second bare word is the chunk
//! name, and the rest are `key=value` options. Effective options are
//! `defaults ⊕ globals ⊕ explicit`, where a chunk carrying `globals=TRUE`
//! pushes its other options into the global layer for itself and every later
//! chunk.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::markdown::{Block, BlockKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChunkError {
    #[error("line {line}: chunk header must start with a language name")]
    MissingLanguage { line: usize },
    #[error("line {line}: malformed chunk header: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown chunk option '{key}'")]
    UnknownOption { key: String, line: usize },
    #[error("line {line}: bad value '{value}' for chunk option '{key}'")]
    BadValue {
        key: String,
        value: String,
        line: usize,
    },
    #[error("line {line}: chunk option '{key}' given twice")]
    DuplicateKey { key: String, line: usize },
    #[error("line {second_line}: chunk name '{name}' already used at line {first_line}")]
    DuplicateChunkName {
        name: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("line {line}: no kernel registered for language '{lang}'")]
    UnknownLanguage { lang: String, line: usize },
}

impl ChunkError {
    pub fn line(&self) -> usize {
        match self {
            ChunkError::MissingLanguage { line }
            | ChunkError::Syntax { line, .. }
            | ChunkError::UnknownOption { line, .. }
            | ChunkError::BadValue { line, .. }
            | ChunkError::DuplicateKey { line, .. }
            | ChunkError::UnknownLanguage { line, .. } => *line,
            ChunkError::DuplicateChunkName { second_line, .. } => *second_line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResultsMode {
    #[default]
    Markup,
    Hide,
}

impl ResultsMode {
    pub fn name(self) -> &'static str {
        match self {
            ResultsMode::Markup => "markup",
            ResultsMode::Hide => "hide",
        }
    }
}

/// Options set at one layer; `None` leaves the lower layer in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptionLayer {
    pub echo: Option<bool>,
    pub include: Option<bool>,
    pub message: Option<bool>,
    pub warning: Option<bool>,
    pub error: Option<bool>,
    pub results: Option<ResultsMode>,
    pub fig_width: Option<f64>,
    pub fig_height: Option<f64>,
    pub defer_output: Option<bool>,
}

impl OptionLayer {
    /// `self` with every option that `top` sets replaced.
    pub fn under(&self, top: &OptionLayer) -> OptionLayer {
        OptionLayer {
            echo: top.echo.or(self.echo),
            include: top.include.or(self.include),
            message: top.message.or(self.message),
            warning: top.warning.or(self.warning),
            error: top.error.or(self.error),
            results: top.results.or(self.results),
            fig_width: top.fig_width.or(self.fig_width),
            fig_height: top.fig_height.or(self.fig_height),
            defer_output: top.defer_output.or(self.defer_output),
        }
    }
}

/// A parsed chunk header before layering.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkHeader {
    pub lang: String,
    pub name: Option<String>,
    pub explicit: OptionLayer,
    /// `globals=TRUE`: the explicit options also become global.
    pub globals: bool,
}

/// Effective options for one chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkOptions {
    pub lang: String,
    pub name: Option<String>,
    pub echo: bool,
    pub include: bool,
    pub message: bool,
    pub warning: bool,
    /// `false`: an execution error aborts the render.
    pub error: bool,
    pub results: ResultsMode,
    pub fig_width: f64,
    pub fig_height: f64,
    pub defer_output: bool,
}

/// What a chunk contributes to the woven document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visibility {
    pub code: bool,
    pub output: bool,
    pub messages: bool,
    pub warnings: bool,
}

impl ChunkOptions {
    pub fn defaults(lang: impl Into<String>, name: Option<String>, fig: (f64, f64)) -> Self {
        Self {
            lang: lang.into(),
            name,
            echo: true,
            include: true,
            message: true,
            warning: true,
            error: false,
            results: ResultsMode::Markup,
            fig_width: fig.0,
            fig_height: fig.1,
            defer_output: false,
        }
    }

    pub fn apply(&mut self, layer: &OptionLayer) {
        self.echo = layer.echo.unwrap_or(self.echo);
        self.include = layer.include.unwrap_or(self.include);
        self.message = layer.message.unwrap_or(self.message);
        self.warning = layer.warning.unwrap_or(self.warning);
        self.error = layer.error.unwrap_or(self.error);
        self.results = layer.results.unwrap_or(self.results);
        self.fig_width = layer.fig_width.unwrap_or(self.fig_width);
        self.fig_height = layer.fig_height.unwrap_or(self.fig_height);
        self.defer_output = layer.defer_output.unwrap_or(self.defer_output);
    }

    pub fn visibility(&self) -> Visibility {
        let output = self.include && self.results == ResultsMode::Markup;
        Visibility {
            code: self.include && self.echo,
            output,
            messages: output && self.message,
            warnings: output && self.warning,
        }
    }
}

/// Global option layer and the index of the chunk that established it.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOptions {
    pub layer: OptionLayer,
    pub set_by: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Quoted(String),
    Eq,
    Comma,
}

fn tokenize(raw: &str, line: usize) -> Result<Vec<Token>, ChunkError> {
    let mut tokens = Vec::new();
    let mut chars = raw.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '=' => {
                chars.next();
                tokens.push(Token::Eq);
            }
            ',' => {
                chars.next();
                tokens.push(Token::Comma);
            }
            '\'' | '"' => {
                chars.next();
                let mut value = String::new();
                loop {
                    match chars.next() {
                        Some(q) if q == c => break,
                        Some(other) => value.push(other),
                        None => {
                            return Err(ChunkError::Syntax {
                                line,
                                message: "unterminated quoted value".into(),
                            })
                        }
                    }
                }
                tokens.push(Token::Quoted(value));
            }
            _ => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '=' | ',' | '\'' | '"') {
                        break;
                    }
                    word.push(c);
                    chars.next();
                }
                tokens.push(Token::Word(word));
            }
        }
    }
    Ok(tokens)
}

fn is_identifier(word: &str) -> bool {
    word.chars()
        .next()
        .is_some_and(|c| c.is_alphabetic() || c == '_')
        && word
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Parses the text inside a chunk's `{...}`. `line` is the fence line.
pub fn parse_chunk_header(raw: &str, line: usize) -> Result<ChunkHeader, ChunkError> {
    let tokens = tokenize(raw, line)?;
    let mut pos = 0;
    let lang = match tokens.first() {
        Some(Token::Word(w)) if is_identifier(w) => w.clone(),
        _ => return Err(ChunkError::MissingLanguage { line }),
    };
    pos += 1;
    if tokens.get(pos) == Some(&Token::Comma) {
        pos += 1;
    }
    let mut name = None;
    if let Some(Token::Word(w)) = tokens.get(pos) {
        if tokens.get(pos + 1) != Some(&Token::Eq) {
            if !is_identifier(w) {
                return Err(ChunkError::Syntax {
                    line,
                    message: format!("invalid chunk name '{w}'"),
                });
            }
            name = Some(w.clone());
            pos += 1;
        }
    }

    let mut explicit = OptionLayer::default();
    let mut globals = false;
    let mut seen: BTreeMap<String, ()> = BTreeMap::new();
    while pos < tokens.len() {
        if tokens[pos] == Token::Comma {
            pos += 1;
            continue;
        }
        let (key, value) = match (tokens.get(pos), tokens.get(pos + 1), tokens.get(pos + 2)) {
            (Some(Token::Word(k)), Some(Token::Eq), Some(Token::Word(v) | Token::Quoted(v))) => {
                (k.clone(), v.clone())
            }
            _ => {
                return Err(ChunkError::Syntax {
                    line,
                    message: "expected key=value".into(),
                })
            }
        };
        pos += 3;
        let key = key.replace('.', "_");
        if seen.insert(key.clone(), ()).is_some() {
            return Err(ChunkError::DuplicateKey { key, line });
        }
        let bad = || ChunkError::BadValue {
            key: key.clone(),
            value: value.clone(),
            line,
        };
        let boolean = || match value.to_ascii_lowercase().as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(bad()),
        };
        let dimension = || match value.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
            _ => Err(bad()),
        };
        match key.as_str() {
            "echo" => explicit.echo = Some(boolean()?),
            "include" => explicit.include = Some(boolean()?),
            "message" => explicit.message = Some(boolean()?),
            "warning" => explicit.warning = Some(boolean()?),
            "error" => explicit.error = Some(boolean()?),
            "defer_output" => explicit.defer_output = Some(boolean()?),
            "globals" => globals = boolean()?,
            "results" => {
                explicit.results = Some(match value.as_str() {
                    "markup" => ResultsMode::Markup,
                    "hide" => ResultsMode::Hide,
                    _ => return Err(bad()),
                })
            }
            "fig_width" => explicit.fig_width = Some(dimension()?),
            "fig_height" => explicit.fig_height = Some(dimension()?),
            _ => return Err(ChunkError::UnknownOption { key, line }),
        }
    }
    Ok(ChunkHeader {
        lang,
        name,
        explicit,
        globals,
    })
}

/// The global directives declared by `headers`, in order. Each directive's
/// layer includes the earlier ones.
pub fn global_directives(headers: &[ChunkHeader]) -> Vec<(usize, GlobalOptions)> {
    let mut current = OptionLayer::default();
    let mut out = Vec::new();
    for (index, header) in headers.iter().enumerate() {
        if header.globals {
            current = current.under(&header.explicit);
            out.push((
                index,
                GlobalOptions {
                    layer: current.clone(),
                    set_by: index,
                },
            ));
        }
    }
    out
}

/// Effective options: defaults, then the latest directive at or before each
/// chunk, then the chunk's own options.
pub fn apply_global_options(
    headers: &[ChunkHeader],
    directives: &[(usize, GlobalOptions)],
    fig_defaults: (f64, f64),
) -> Vec<ChunkOptions> {
    headers
        .iter()
        .enumerate()
        .map(|(index, header)| {
            let mut opts = ChunkOptions::defaults(&header.lang, header.name.clone(), fig_defaults);
            if let Some((_, global)) = directives.iter().rev().find(|(at, _)| *at <= index) {
                opts.apply(&global.layer);
            }
            opts.apply(&header.explicit);
            opts
        })
        .collect()
}

/// One executable chunk of a document.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkSpec {
    /// Position among the document's chunks, from 0.
    pub index: usize,
    /// Line of the opening fence.
    pub line: usize,
    pub code: String,
    pub options: ChunkOptions,
}

impl ChunkSpec {
    /// The chunk's name, or its 1-based position when unnamed.
    pub fn label(&self) -> String {
        self.options
            .name
            .clone()
            .unwrap_or_else(|| (self.index + 1).to_string())
    }
}

/// Every code chunk in document order, including chunks nested in quotes
/// and list items.
pub fn chunk_blocks(blocks: &[Block]) -> Vec<&Block> {
    fn walk<'a>(blocks: &'a [Block], out: &mut Vec<&'a Block>) {
        for block in blocks {
            match &block.kind {
                BlockKind::CodeChunk { .. } => out.push(block),
                BlockKind::BlockQuote(inner) => walk(inner, out),
                BlockKind::BulletList(items) | BlockKind::OrderedList { items, .. } => {
                    for item in items {
                        walk(item, out);
                    }
                }
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    walk(blocks, &mut out);
    out
}

/// Parses every chunk header and resolves effective options.
pub fn plan_chunks(
    blocks: &[Block],
    fig_defaults: (f64, f64),
) -> Result<Vec<ChunkSpec>, ChunkError> {
    let chunks = chunk_blocks(blocks);
    let mut headers = Vec::with_capacity(chunks.len());
    for block in &chunks {
        if let BlockKind::CodeChunk { options_raw, .. } = &block.kind {
            headers.push(parse_chunk_header(options_raw, block.line())?);
        }
    }
    let directives = global_directives(&headers);
    let options = apply_global_options(&headers, &directives, fig_defaults);
    Ok(chunks
        .iter()
        .zip(options)
        .enumerate()
        .map(|(index, (block, options))| {
            let code = match &block.kind {
                BlockKind::CodeChunk { code, .. } => code.clone(),
                _ => unreachable!("chunk_blocks only yields chunks"),
            };
            ChunkSpec {
                index,
                line: block.line(),
                code,
                options,
            }
        })
        .collect())
}

/// Names must be unique and every language must have a kernel.
pub fn validate_chunks(
    chunks: &[ChunkSpec],
    is_registered: impl Fn(&str) -> bool,
) -> Result<(), ChunkError> {
    let mut names: BTreeMap<&str, usize> = BTreeMap::new();
    for chunk in chunks {
        if let Some(name) = &chunk.options.name {
            if let Some(&first_line) = names.get(name.as_str()) {
                return Err(ChunkError::DuplicateChunkName {
                    name: name.clone(),
                    first_line,
                    second_line: chunk.line,
                });
            }
            names.insert(name, chunk.line);
        }
        if !is_registered(&chunk.options.lang) {
            return Err(ChunkError::UnknownLanguage {
                lang: chunk.options.lang.clone(),
                line: chunk.line,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIG: (f64, f64) = (7.0, 5.0);

    fn resolve(raw: &str) -> ChunkOptions {
        let header = parse_chunk_header(raw, 1).unwrap();
        apply_global_options(&[header], &[], FIG).remove(0)
    }

    #[test]
    fn setup_chunk_header() {
        let opts = resolve("r setup, message=FALSE");
        let mut expected = ChunkOptions::defaults("r", Some("setup".into()), FIG);
        expected.message = false;
        assert_eq!(opts, expected);
    }

    #[test]
    fn bare_language() {
        assert_eq!(resolve("r"), ChunkOptions::defaults("r", None, FIG));
    }

    #[test]
    fn figure_options_with_dots() {
        let opts = resolve("r helpful_visual, fig.width=4, fig.height=3");
        assert_eq!(opts.name.as_deref(), Some("helpful_visual"));
        assert_eq!((opts.fig_width, opts.fig_height), (4.0, 3.0));
    }

    #[test]
    fn value_forms() {
        let opts = resolve("calc, x, echo=false, results='hide', fig_width = 2.5");
        assert_eq!(opts.name.as_deref(), Some("x"));
        assert!(!opts.echo);
        assert_eq!(opts.results, ResultsMode::Hide);
        assert_eq!(opts.fig_width, 2.5);
        assert_eq!(
            resolve("calc results=\"markup\"").results,
            ResultsMode::Markup
        );
    }

    #[test]
    fn header_errors() {
        assert_eq!(
            parse_chunk_header("calc bogus=TRUE", 4),
            Err(ChunkError::UnknownOption {
                key: "bogus".into(),
                line: 4
            })
        );
        assert_eq!(
            parse_chunk_header("calc echo=maybe", 4),
            Err(ChunkError::BadValue {
                key: "echo".into(),
                value: "maybe".into(),
                line: 4
            })
        );
        assert_eq!(
            parse_chunk_header("calc fig.width=3, fig_width=4", 4),
            Err(ChunkError::DuplicateKey {
                key: "fig_width".into(),
                line: 4
            })
        );
        assert!(matches!(
            parse_chunk_header("calc fig.width=-1", 4),
            Err(ChunkError::BadValue { .. })
        ));
        assert_eq!(
            parse_chunk_header("", 2),
            Err(ChunkError::MissingLanguage { line: 2 })
        );
        assert!(matches!(
            parse_chunk_header("calc echo", 2),
            Ok(ChunkHeader { name: Some(_), .. })
        ));
        assert!(matches!(
            parse_chunk_header("calc a b", 2),
            Err(ChunkError::Syntax { .. })
        ));
    }

    #[test]
    fn global_layer_applies_to_later_chunks() {
        let headers: Vec<ChunkHeader> = [
            "calc setup, globals=TRUE, echo=FALSE",
            "calc",
            "calc",
            "calc echo=TRUE",
        ]
        .iter()
        .map(|raw| parse_chunk_header(raw, 1).unwrap())
        .collect();
        let directives = global_directives(&headers);
        assert_eq!(directives.len(), 1);
        assert_eq!(directives[0].1.set_by, 0);
        let opts = apply_global_options(&headers, &directives, FIG);
        assert!(!opts[0].echo);
        assert!(!opts[2].echo);
        assert!(opts[3].echo);
    }

    #[test]
    fn later_directive_overrides_from_that_chunk_on() {
        let headers: Vec<ChunkHeader> = [
            "calc globals=TRUE, echo=FALSE, message=FALSE",
            "calc",
            "calc globals=TRUE, echo=TRUE",
            "calc",
        ]
        .iter()
        .map(|raw| parse_chunk_header(raw, 1).unwrap())
        .collect();
        let opts = apply_global_options(&headers, &global_directives(&headers), FIG);
        assert!(!opts[1].echo && !opts[1].message);
        assert!(opts[3].echo);
        assert!(!opts[3].message);
    }

    #[test]
    fn no_directives_is_identity() {
        let headers = vec![parse_chunk_header("calc a, echo=FALSE", 1).unwrap()];
        let opts = apply_global_options(&headers, &[], FIG);
        let mut expected = ChunkOptions::defaults("calc", Some("a".into()), FIG);
        expected.echo = false;
        assert_eq!(opts[0], expected);
    }

    fn spec(name: Option<&str>, lang: &str, line: usize) -> ChunkSpec {
        ChunkSpec {
            index: 0,
            line,
            code: String::new(),
            options: ChunkOptions::defaults(lang, name.map(String::from), FIG),
        }
    }

    #[test]
    fn validation() {
        let registered = |lang: &str| lang == "calc";
        assert_eq!(
            validate_chunks(
                &[
                    spec(Some("setup"), "calc", 3),
                    spec(Some("setup"), "calc", 9)
                ],
                registered
            ),
            Err(ChunkError::DuplicateChunkName {
                name: "setup".into(),
                first_line: 3,
                second_line: 9
            })
        );
        assert_eq!(
            validate_chunks(
                &[
                    spec(Some("setup"), "calc", 3),
                    spec(Some("helpful_visual"), "calc", 9)
                ],
                registered
            ),
            Ok(())
        );
        assert_eq!(
            validate_chunks(&[spec(None, "fortran", 5)], registered),
            Err(ChunkError::UnknownLanguage {
                lang: "fortran".into(),
                line: 5
            })
        );
    }

    #[test]
    fn visibility_truth_table() {
        for bits in 0..32u8 {
            let mut opts = ChunkOptions::defaults("calc", None, FIG);
            opts.include = bits & 1 != 0;
            opts.echo = bits & 2 != 0;
            opts.results = if bits & 4 != 0 {
                ResultsMode::Markup
            } else {
                ResultsMode::Hide
            };
            opts.message = bits & 8 != 0;
            opts.warning = bits & 16 != 0;
            let v = opts.visibility();
            let output = opts.include && opts.results == ResultsMode::Markup;
            assert_eq!(v.code, opts.include && opts.echo);
            assert_eq!(v.output, output);
            assert_eq!(v.messages, output && opts.message);
            assert_eq!(v.warnings, output && opts.warning);
        }
    }

    fn layer_strategy() -> impl Strategy<Value = OptionLayer> {
        let b = || proptest::option::of(any::<bool>());
        (
            (b(), b(), b(), b(), b()),
            proptest::option::of(prop_oneof![
                Just(ResultsMode::Markup),
                Just(ResultsMode::Hide)
            ]),
            proptest::option::of(0.5f64..10.0),
            proptest::option::of(0.5f64..10.0),
            b(),
        )
            .prop_map(
                |((echo, include, message, warning, error), results, fw, fh, defer)| OptionLayer {
                    echo,
                    include,
                    message,
                    warning,
                    error,
                    results,
                    fig_width: fw,
                    fig_height: fh,
                    defer_output: defer,
                },
            )
    }

    proptest! {
        #[test]
        fn layering_is_associative(a in layer_strategy(), b in layer_strategy(), c in layer_strategy()) {
            prop_assert_eq!(a.under(&b).under(&c), a.under(&b.under(&c)));
            prop_assert_eq!(OptionLayer::default().under(&a), a.clone());
            let mut stepwise = ChunkOptions::defaults("calc", None, FIG);
            stepwise.apply(&a);
            stepwise.apply(&b);
            let mut combined = ChunkOptions::defaults("calc", None, FIG);
            combined.apply(&a.under(&b));
            prop_assert_eq!(stepwise, combined);
        }
    }
}
