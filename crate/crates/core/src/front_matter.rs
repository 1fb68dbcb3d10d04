//! Document header parsing.
//!
//! The header is a flat YAML subset enclosed in `---` fences at the top of a
//! document: top-level `key: value` scalars, plus the `output` key which may
//! hold a list of output kinds or a map of kinds to option maps. Anything not
//! understood is kept verbatim in [`FrontMatter::extra`]. The full grammar is
//! in `docs/header.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Name of the header file shared by every document in a directory.
pub const SHARED_HEADER_FILE: &str = "_header.yml";

#[derive(Debug, Clone, PartialEq, Error)]
#[error("malformed header at line {line}: {message}")]
pub struct MalformedHeader {
    pub line: usize,
    pub message: String,
}

impl MalformedHeader {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutputKind {
    HtmlDocument,
    HtmlSlides,
}

impl OutputKind {
    pub fn name(self) -> &'static str {
        match self {
            OutputKind::HtmlDocument => "html_document",
            OutputKind::HtmlSlides => "html_slides",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "html_document" => Some(OutputKind::HtmlDocument),
            "html_slides" | "ioslides_presentation" => Some(OutputKind::HtmlSlides),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transition {
    #[default]
    Default,
    Slower,
    Faster,
}

impl Transition {
    pub fn name(self) -> &'static str {
        match self {
            Transition::Default => "default",
            Transition::Slower => "slower",
            Transition::Faster => "faster",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Transition::Default),
            "slower" => Some(Transition::Slower),
            "faster" => Some(Transition::Faster),
            _ => None,
        }
    }
}

/// Fully resolved settings for one output file.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub kind: OutputKind,
    pub toc: bool,
    pub theme: String,
    /// Default figure width in display units (inches).
    pub fig_width: f64,
    pub fig_height: f64,
    pub widescreen: bool,
    pub transition: Transition,
    pub text_size: Option<String>,
    pub bullet: Option<String>,
}

impl OutputSpec {
    pub fn defaults(kind: OutputKind) -> Self {
        let (fig_width, fig_height) = match kind {
            OutputKind::HtmlDocument => (7.0, 5.0),
            OutputKind::HtmlSlides => (7.5, 4.5),
        };
        Self {
            kind,
            toc: false,
            theme: "default".to_string(),
            fig_width,
            fig_height,
            widescreen: false,
            transition: Transition::Default,
            text_size: None,
            bullet: None,
        }
    }
}

/// A partial set of output options; `None` means "not specified here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputOptions {
    pub toc: Option<bool>,
    pub theme: Option<String>,
    pub fig_width: Option<f64>,
    pub fig_height: Option<f64>,
    pub widescreen: Option<bool>,
    pub transition: Option<Transition>,
    pub text_size: Option<String>,
    pub bullet: Option<String>,
}

const OUTPUT_OPTION_KEYS: &[&str] = &[
    "toc",
    "theme",
    "fig_width",
    "fig_height",
    "widescreen",
    "transition",
    "text_size",
    "bullet",
];

impl OutputOptions {
    /// `self` overlaid by every option `over` specifies.
    pub fn layered(&self, over: &OutputOptions) -> OutputOptions {
        OutputOptions {
            toc: over.toc.or(self.toc),
            theme: over.theme.clone().or_else(|| self.theme.clone()),
            fig_width: over.fig_width.or(self.fig_width),
            fig_height: over.fig_height.or(self.fig_height),
            widescreen: over.widescreen.or(self.widescreen),
            transition: over.transition.or(self.transition),
            text_size: over.text_size.clone().or_else(|| self.text_size.clone()),
            bullet: over.bullet.clone().or_else(|| self.bullet.clone()),
        }
    }

    pub fn apply_to(&self, spec: &mut OutputSpec) {
        if let Some(v) = self.toc {
            spec.toc = v;
        }
        if let Some(v) = &self.theme {
            spec.theme = v.clone();
        }
        if let Some(v) = self.fig_width {
            spec.fig_width = v;
        }
        if let Some(v) = self.fig_height {
            spec.fig_height = v;
        }
        if let Some(v) = self.widescreen {
            spec.widescreen = v;
        }
        if let Some(v) = self.transition {
            spec.transition = v;
        }
        if let Some(v) = &self.text_size {
            spec.text_size = Some(v.clone());
        }
        if let Some(v) = &self.bullet {
            spec.bullet = Some(v.clone());
        }
    }

    fn slide_only_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        if self.widescreen.is_some() {
            keys.push("widescreen");
        }
        if self.transition.is_some() {
            keys.push("transition");
        }
        if self.text_size.is_some() {
            keys.push("text_size");
        }
        if self.bullet.is_some() {
            keys.push("bullet");
        }
        keys
    }

    /// Sets one option from its textual value. Returns `Ok(false)` when the
    /// key is not an output option.
    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<bool, MalformedHeader> {
        match key {
            "toc" => self.toc = Some(parse_bool(key, value, line)?),
            "widescreen" => self.widescreen = Some(parse_bool(key, value, line)?),
            "theme" => {
                if !is_identifier(value) {
                    return Err(MalformedHeader::new(
                        line,
                        format!("theme must be an identifier, got '{value}'"),
                    ));
                }
                self.theme = Some(value.to_string());
            }
            "fig_width" => self.fig_width = Some(parse_dimension(key, value, line)?),
            "fig_height" => self.fig_height = Some(parse_dimension(key, value, line)?),
            "transition" => {
                let t = Transition::from_name(value).ok_or_else(|| {
                    MalformedHeader::new(
                        line,
                        format!("transition must be default, slower or faster, got '{value}'"),
                    )
                })?;
                self.transition = Some(t);
            }
            "text_size" => self.text_size = Some(value.to_string()),
            "bullet" => self.bullet = Some(value.to_string()),
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn write_yaml(&self, out: &mut String, indent: &str) {
        if let Some(v) = self.toc {
            let _ = writeln!(out, "{indent}toc: {v}");
        }
        if let Some(v) = &self.theme {
            let _ = writeln!(out, "{indent}theme: {v}");
        }
        if let Some(v) = self.fig_width {
            let _ = writeln!(out, "{indent}fig_width: {v}");
        }
        if let Some(v) = self.fig_height {
            let _ = writeln!(out, "{indent}fig_height: {v}");
        }
        if let Some(v) = self.widescreen {
            let _ = writeln!(out, "{indent}widescreen: {v}");
        }
        if let Some(v) = self.transition {
            let _ = writeln!(out, "{indent}transition: {}", v.name());
        }
        if let Some(v) = &self.text_size {
            let _ = writeln!(out, "{indent}text_size: {}", quote(v));
        }
        if let Some(v) = &self.bullet {
            let _ = writeln!(out, "{indent}bullet: {}", quote(v));
        }
    }

    fn is_empty(&self) -> bool {
        *self == OutputOptions::default()
    }
}

/// One entry of the `output` key: a kind plus its own options.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputEntry {
    pub kind: OutputKind,
    pub options: OutputOptions,
}

impl OutputEntry {
    pub fn new(kind: OutputKind) -> Self {
        Self {
            kind,
            options: OutputOptions::default(),
        }
    }
}

/// Value of an unrecognized header key.
#[derive(Debug, Clone, PartialEq)]
pub enum HeaderValue {
    Scalar(String),
    /// Indented lines following `key:`, kept verbatim.
    Block(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrontMatter {
    pub title: Option<String>,
    pub author: Option<String>,
    /// Passed through verbatim.
    pub date: Option<String>,
    pub bibliography: Option<PathBuf>,
    pub logo: Option<PathBuf>,
    /// Output options given at the top level; they apply to every output.
    pub output_defaults: OutputOptions,
    /// The `output` key, if present.
    pub output_entries: Option<Vec<OutputEntry>>,
    pub extra: BTreeMap<String, HeaderValue>,
}

impl FrontMatter {
    /// Resolved output specs; never empty.
    pub fn outputs(&self) -> Vec<OutputSpec> {
        let default_entries = [OutputEntry::new(OutputKind::HtmlDocument)];
        let entries = self.output_entries.as_deref().unwrap_or(&default_entries);
        entries
            .iter()
            .map(|entry| {
                let mut spec = OutputSpec::defaults(entry.kind);
                self.output_defaults
                    .layered(&entry.options)
                    .apply_to(&mut spec);
                spec
            })
            .collect()
    }

    /// Non-fatal findings: unknown keys and options that do not apply.
    pub fn warnings(&self) -> Vec<HeaderWarning> {
        let mut warnings: Vec<HeaderWarning> = self
            .extra
            .keys()
            .map(|k| HeaderWarning::UnknownKey(k.clone()))
            .collect();
        for entry in self.output_entries.iter().flatten() {
            if entry.kind == OutputKind::HtmlDocument {
                for key in entry.options.slide_only_keys() {
                    warnings.push(HeaderWarning::IgnoredOption {
                        key: key.to_string(),
                        kind: entry.kind,
                    });
                }
            }
        }
        let has_slides = self
            .outputs()
            .iter()
            .any(|o| o.kind == OutputKind::HtmlSlides);
        if self.logo.is_some() && !has_slides {
            warnings.push(HeaderWarning::IgnoredOption {
                key: "logo".to_string(),
                kind: OutputKind::HtmlDocument,
            });
        }
        warnings
    }

    /// Serializes back into header text (without the `---` fences).
    pub fn to_header_text(&self) -> String {
        let mut out = String::new();
        let scalars = [
            ("title", self.title.clone()),
            ("author", self.author.clone()),
            ("date", self.date.clone()),
            (
                "bibliography",
                self.bibliography.as_ref().map(|p| p.display().to_string()),
            ),
            ("logo", self.logo.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in scalars {
            if let Some(v) = value {
                let _ = writeln!(out, "{key}: {}", quote(&v));
            }
        }
        self.output_defaults.write_yaml(&mut out, "");
        if let Some(entries) = &self.output_entries {
            out.push_str("output:\n");
            for entry in entries {
                if entry.options.is_empty() {
                    let _ = writeln!(out, "  {}: default", entry.kind.name());
                } else {
                    let _ = writeln!(out, "  {}:", entry.kind.name());
                    entry.options.write_yaml(&mut out, "    ");
                }
            }
        }
        for (key, value) in &self.extra {
            match value {
                HeaderValue::Scalar(v) => {
                    let _ = writeln!(out, "{key}: {}", quote(v));
                }
                HeaderValue::Block(raw) => {
                    let _ = writeln!(out, "{key}:\n{raw}");
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeaderWarning {
    UnknownKey(String),
    IgnoredOption { key: String, kind: OutputKind },
}

impl std::fmt::Display for HeaderWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HeaderWarning::UnknownKey(key) => write!(f, "unknown header key '{key}' (kept)"),
            HeaderWarning::IgnoredOption { key, kind } => {
                write!(f, "option '{key}' has no effect on {}", kind.name())
            }
        }
    }
}

/// A document split into its header and body.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSource {
    pub front: FrontMatter,
    pub body: String,
    /// 1-based source line of the first body line.
    pub body_start_line: usize,
}

/// Splits `source` into front matter and body.
pub fn parse_front_matter(source: &str) -> Result<SplitSource, MalformedHeader> {
    let source = normalize_newlines(source);
    let lines: Vec<&str> = source.split('\n').collect();
    let Some(open) = lines.iter().position(|l| !l.trim().is_empty()) else {
        return Ok(no_header(source));
    };
    if lines[open].trim_end() != "---" {
        return Ok(no_header(source));
    }
    let close = lines[open + 1..]
        .iter()
        .position(|l| l.trim_end() == "---")
        .map(|i| i + open + 1)
        .ok_or_else(|| MalformedHeader::new(open + 1, "opening '---' has no closing '---'"))?;
    let header = lines[open + 1..close].join("\n");
    let front = parse_header_body(&header, open + 2)?;
    let body = lines[close + 1..].join("\n");
    Ok(SplitSource {
        front,
        body,
        body_start_line: close + 2,
    })
}

fn no_header(source: String) -> SplitSource {
    SplitSource {
        front: FrontMatter::default(),
        body: source,
        body_start_line: 1,
    }
}

/// Reads `_header.yml` from `directory`, if present.
pub fn load_shared_header(directory: &Path) -> Result<Option<FrontMatter>, SharedHeaderError> {
    let path = directory.join(SHARED_HEADER_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|source| SharedHeaderError::Io {
        path: path.clone(),
        source,
    })?;
    let front = parse_header_body(&normalize_newlines(&text), 1)
        .map_err(|err| SharedHeaderError::Malformed { path, err })?;
    Ok(Some(front))
}

#[derive(Debug, Error)]
pub enum SharedHeaderError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {err}")]
    Malformed { path: PathBuf, err: MalformedHeader },
}

/// Field-wise merge where anything `local` specifies wins.
pub fn merge_headers(shared: &FrontMatter, local: &FrontMatter) -> FrontMatter {
    let mut extra = shared.extra.clone();
    extra.extend(local.extra.clone());
    FrontMatter {
        title: local.title.clone().or_else(|| shared.title.clone()),
        author: local.author.clone().or_else(|| shared.author.clone()),
        date: local.date.clone().or_else(|| shared.date.clone()),
        bibliography: local
            .bibliography
            .clone()
            .or_else(|| shared.bibliography.clone()),
        logo: local.logo.clone().or_else(|| shared.logo.clone()),
        output_defaults: shared.output_defaults.layered(&local.output_defaults),
        output_entries: local
            .output_entries
            .clone()
            .or_else(|| shared.output_entries.clone()),
        extra,
    }
}

pub(crate) fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n")
}

struct HeaderLine<'a> {
    number: usize,
    indent: usize,
    text: &'a str,
}

/// Parses header text without fences. `first_line` is the source line number
/// of the first line of `text`.
pub fn parse_header_body(text: &str, first_line: usize) -> Result<FrontMatter, MalformedHeader> {
    let mut lines = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let number = first_line + i;
        let trimmed = raw.trim_end();
        if trimmed.trim_start().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let indent_part = &trimmed[..trimmed.len() - trimmed.trim_start().len()];
        if indent_part.contains('\t') {
            return Err(MalformedHeader::new(
                number,
                "tabs are not allowed in indentation",
            ));
        }
        lines.push(HeaderLine {
            number,
            indent: indent_part.len(),
            text: trimmed.trim_start(),
        });
    }

    let mut front = FrontMatter::default();
    let mut seen = BTreeSet::new();
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        if line.indent != 0 {
            return Err(MalformedHeader::new(line.number, "unexpected indentation"));
        }
        let (key, rest) = split_key(line.text, line.number)?;
        let nested_end = lines[i + 1..]
            .iter()
            .position(|l| l.indent == 0)
            .map_or(lines.len(), |p| p + i + 1);
        let nested = &lines[i + 1..nested_end];
        if !seen.insert(key.to_string()) {
            return Err(MalformedHeader::new(
                line.number,
                format!("duplicate key '{key}'"),
            ));
        }
        if !rest.is_empty() && !nested.is_empty() {
            return Err(MalformedHeader::new(
                nested[0].number,
                format!("unexpected indented line after '{key}: {rest}'"),
            ));
        }
        match key {
            "title" | "author" | "date" | "bibliography" | "logo" => {
                let value = expect_scalar(key, rest, nested, line.number)?;
                match key {
                    "title" => front.title = Some(value),
                    "author" => front.author = Some(value),
                    "date" => front.date = Some(value),
                    "bibliography" => front.bibliography = Some(PathBuf::from(value)),
                    _ => front.logo = Some(PathBuf::from(value)),
                }
            }
            "output" => {
                front.output_entries = Some(if nested.is_empty() {
                    parse_output_inline(rest, line.number)?
                } else {
                    parse_output_block(nested, &mut front.extra)?
                });
            }
            _ if OUTPUT_OPTION_KEYS.contains(&key) => {
                let value = expect_scalar(key, rest, nested, line.number)?;
                front.output_defaults.set(key, &value, line.number)?;
            }
            _ => {
                let value = if nested.is_empty() {
                    HeaderValue::Scalar(parse_scalar(rest, line.number)?)
                } else {
                    let raw: Vec<&str> = text
                        .split('\n')
                        .skip(nested[0].number - first_line)
                        .take(nested[nested.len() - 1].number - nested[0].number + 1)
                        .map(str::trim_end)
                        .collect();
                    HeaderValue::Block(raw.join("\n"))
                };
                front.extra.insert(key.to_string(), value);
            }
        }
        i = nested_end;
    }
    Ok(front)
}

fn split_key(text: &str, line: usize) -> Result<(&str, &str), MalformedHeader> {
    let colon = text.find(':').ok_or_else(|| {
        MalformedHeader::new(line, format!("expected 'key: value', got '{text}'"))
    })?;
    let key = text[..colon].trim_end();
    if key.is_empty()
        || !key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
    {
        return Err(MalformedHeader::new(line, format!("invalid key '{key}'")));
    }
    let rest = &text[colon + 1..];
    if !rest.is_empty() && !rest.starts_with(' ') {
        return Err(MalformedHeader::new(line, "expected a space after ':'"));
    }
    Ok((key, rest.trim()))
}

fn expect_scalar(
    key: &str,
    rest: &str,
    nested: &[HeaderLine<'_>],
    line: usize,
) -> Result<String, MalformedHeader> {
    if !nested.is_empty() || rest.is_empty() {
        return Err(MalformedHeader::new(
            line,
            format!("'{key}' expects a single value"),
        ));
    }
    if rest.starts_with('[') || rest.starts_with('{') {
        return Err(MalformedHeader::new(
            line,
            format!("'{key}' expects a single value, not a collection"),
        ));
    }
    parse_scalar(rest, line)
}

fn parse_output_inline(rest: &str, line: usize) -> Result<Vec<OutputEntry>, MalformedHeader> {
    if rest.is_empty() {
        return Err(MalformedHeader::new(line, "'output' has no value"));
    }
    let names: Vec<String> = if let Some(inner) = rest.strip_prefix('[') {
        let inner = inner
            .strip_suffix(']')
            .ok_or_else(|| MalformedHeader::new(line, "unterminated '[' in output list"))?;
        inner
            .split(',')
            .map(|item| parse_scalar(item.trim(), line))
            .collect::<Result<_, _>>()?
    } else {
        vec![parse_scalar(rest, line)?]
    };
    let mut entries = Vec::new();
    for name in names {
        push_entry(&mut entries, output_kind(&name, line)?, line)?;
    }
    if entries.is_empty() {
        return Err(MalformedHeader::new(line, "'output' list is empty"));
    }
    Ok(entries)
}

fn parse_output_block(
    nested: &[HeaderLine<'_>],
    extra: &mut BTreeMap<String, HeaderValue>,
) -> Result<Vec<OutputEntry>, MalformedHeader> {
    let kind_indent = nested[0].indent;
    let mut entries: Vec<OutputEntry> = Vec::new();
    let mut option_indent: Option<usize> = None;
    let mut seen_options = BTreeSet::new();
    for line in nested {
        if line.indent == kind_indent {
            option_indent = None;
            seen_options.clear();
            if let Some(item) = line.text.strip_prefix("- ") {
                let name = parse_scalar(item.trim(), line.number)?;
                push_entry(&mut entries, output_kind(&name, line.number)?, line.number)?;
                continue;
            }
            let (name, rest) = split_key(line.text, line.number)?;
            let kind = output_kind(name, line.number)?;
            if !rest.is_empty() && parse_scalar(rest, line.number)? != "default" {
                return Err(MalformedHeader::new(
                    line.number,
                    format!("expected 'default' or nested options for '{name}'"),
                ));
            }
            push_entry(&mut entries, kind, line.number)?;
        } else if line.indent > kind_indent {
            let expected = *option_indent.get_or_insert(line.indent);
            if line.indent != expected {
                return Err(MalformedHeader::new(
                    line.number,
                    "inconsistent indentation",
                ));
            }
            let entry = entries.last_mut().ok_or_else(|| {
                MalformedHeader::new(line.number, "option without an output format")
            })?;
            let (key, rest) = split_key(line.text, line.number)?;
            if !seen_options.insert(key.to_string()) {
                return Err(MalformedHeader::new(
                    line.number,
                    format!("duplicate key '{key}'"),
                ));
            }
            if rest.is_empty() || rest.starts_with('[') || rest.starts_with('{') {
                return Err(MalformedHeader::new(
                    line.number,
                    format!("'{key}' expects a single value"),
                ));
            }
            let value = parse_scalar(rest, line.number)?;
            if !entry.options.set(key, &value, line.number)? {
                extra.insert(
                    format!("output.{}.{key}", entry.kind.name()),
                    HeaderValue::Scalar(value),
                );
            }
        } else {
            return Err(MalformedHeader::new(
                line.number,
                "inconsistent indentation",
            ));
        }
    }
    Ok(entries)
}

fn push_entry(
    entries: &mut Vec<OutputEntry>,
    kind: OutputKind,
    line: usize,
) -> Result<(), MalformedHeader> {
    if entries.iter().any(|e| e.kind == kind) {
        return Err(MalformedHeader::new(
            line,
            format!("output format '{}' listed twice", kind.name()),
        ));
    }
    entries.push(OutputEntry::new(kind));
    Ok(())
}

fn output_kind(name: &str, line: usize) -> Result<OutputKind, MalformedHeader> {
    OutputKind::from_name(name).ok_or_else(|| {
        MalformedHeader::new(
            line,
            format!("unsupported output format '{name}' (expected html_document or html_slides)"),
        )
    })
}

/// Parses a quoted or bare scalar; bare values lose a trailing ` #` comment.
fn parse_scalar(text: &str, line: usize) -> Result<String, MalformedHeader> {
    let text = text.trim();
    let mut chars = text.chars();
    match chars.next() {
        Some('"') => {
            let mut out = String::new();
            loop {
                match chars.next() {
                    None => return Err(MalformedHeader::new(line, "unterminated string")),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        Some(other) => {
                            return Err(MalformedHeader::new(
                                line,
                                format!("unknown escape '\\{other}'"),
                            ))
                        }
                        None => return Err(MalformedHeader::new(line, "unterminated string")),
                    },
                    Some(c) => out.push(c),
                }
            }
            check_trailing(chars.as_str(), line)?;
            Ok(out)
        }
        Some('\'') => {
            let mut out = String::new();
            loop {
                match chars.next() {
                    None => return Err(MalformedHeader::new(line, "unterminated string")),
                    Some('\'') => {
                        if chars.as_str().starts_with('\'') {
                            chars.next();
                            out.push('\'');
                        } else {
                            break;
                        }
                    }
                    Some(c) => out.push(c),
                }
            }
            check_trailing(chars.as_str(), line)?;
            Ok(out)
        }
        _ => {
            let value = match text.find(" #") {
                Some(pos) => &text[..pos],
                None => text,
            };
            Ok(value.trim_end().to_string())
        }
    }
}

fn check_trailing(rest: &str, line: usize) -> Result<(), MalformedHeader> {
    let rest = rest.trim();
    if rest.is_empty() || rest.starts_with('#') {
        Ok(())
    } else {
        Err(MalformedHeader::new(
            line,
            format!("unexpected text after closing quote: '{rest}'"),
        ))
    }
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, MalformedHeader> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" => Ok(true),
        "false" | "no" => Ok(false),
        _ => Err(MalformedHeader::new(
            line,
            format!("'{key}' expects true or false, got '{value}'"),
        )),
    }
}

fn parse_dimension(key: &str, value: &str, line: usize) -> Result<f64, MalformedHeader> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(MalformedHeader::new(
            line,
            format!("'{key}' must be a positive number, got '{value}'"),
        )),
    }
}

fn is_identifier(value: &str) -> bool {
    !value.is_empty()
        && value
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn homework_header() {
        let split =
            parse_front_matter("---\ntitle: \"HW 1\"\noutput: html_document\n---\nHi").unwrap();
        assert_eq!(split.front.title.as_deref(), Some("HW 1"));
        let outputs = split.front.outputs();
        assert_eq!(outputs.len(), 1);
        assert_eq!(outputs[0].kind, OutputKind::HtmlDocument);
        assert_eq!(split.body, "Hi");
        assert_eq!(split.body_start_line, 5);
    }

    #[test]
    fn no_header_is_all_defaults() {
        let split = parse_front_matter("Just text").unwrap();
        assert_eq!(split.front, FrontMatter::default());
        assert_eq!(split.body, "Just text");
        assert_eq!(split.body_start_line, 1);
        assert_eq!(
            split.front.outputs(),
            vec![OutputSpec::defaults(OutputKind::HtmlDocument)]
        );
    }

    #[test]
    fn unterminated_header() {
        let err = parse_front_matter("---\ntitle: x\n").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn leading_blank_lines_and_crlf() {
        let split = parse_front_matter("\r\n---\r\ntitle: x\r\n---\r\nbody\r\n").unwrap();
        assert_eq!(split.front.title.as_deref(), Some("x"));
        assert_eq!(split.body, "body\n");
        assert_eq!(split.body_start_line, 5);
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = parse_front_matter("---\ntitle: a\ntitle: b\n---\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("duplicate"));
    }

    #[test]
    fn collection_for_scalar_is_rejected() {
        let err = parse_front_matter("---\ntitle: [a, b]\n---\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_front_matter("---\nauthor:\n  name: x\n---\n").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn nested_output_options() {
        let text = "---\noutput:\n  html_document:\n    toc: true\n    theme: journal\n  html_slides:\n    widescreen: yes\n    transition: faster\n---\n";
        let front = parse_front_matter(text).unwrap().front;
        let outputs = front.outputs();
        assert_eq!(outputs.len(), 2);
        assert!(outputs[0].toc);
        assert_eq!(outputs[0].theme, "journal");
        assert_eq!(outputs[1].kind, OutputKind::HtmlSlides);
        assert!(outputs[1].widescreen);
        assert_eq!(outputs[1].transition, Transition::Faster);
        assert!(front.warnings().is_empty());
    }

    #[test]
    fn output_list_forms() {
        let a = parse_front_matter("---\noutput: [html_document, html_slides]\n---\n")
            .unwrap()
            .front;
        let b = parse_front_matter("---\noutput:\n  - html_document\n  - html_slides\n---\n")
            .unwrap()
            .front;
        let c = parse_front_matter(
            "---\noutput:\n  html_document: default\n  html_slides: default\n---\n",
        )
        .unwrap()
        .front;
        assert_eq!(a, b);
        assert_eq!(b, c);
        assert_eq!(a.outputs().len(), 2);
    }

    #[test]
    fn unsupported_output_format() {
        let err = parse_front_matter("---\noutput: pdf_document\n---\n").unwrap_err();
        assert!(err.message.contains("pdf_document"));
    }

    #[test]
    fn top_level_options_apply_under_entry_options() {
        let front = parse_front_matter(
            "---\nfig_width: 4\ntoc: true\noutput:\n  html_document:\n    toc: false\n---\n",
        )
        .unwrap()
        .front;
        let spec = &front.outputs()[0];
        assert_eq!(spec.fig_width, 4.0);
        assert!(!spec.toc);
    }

    #[test]
    fn unknown_keys_are_kept_and_reported() {
        let text = "---\nsubtitle: Notes\nparams:\n  n: 10\n  m: 2\noutput:\n  html_document:\n    highlight: tango\n---\n";
        let front = parse_front_matter(text).unwrap().front;
        assert_eq!(
            front.extra.get("subtitle"),
            Some(&HeaderValue::Scalar("Notes".into()))
        );
        assert_eq!(
            front.extra.get("params"),
            Some(&HeaderValue::Block("  n: 10\n  m: 2".into()))
        );
        assert_eq!(
            front.extra.get("output.html_document.highlight"),
            Some(&HeaderValue::Scalar("tango".into()))
        );
        assert_eq!(front.warnings().len(), 3);
    }

    #[test]
    fn slide_options_on_document_warn() {
        let front =
            parse_front_matter("---\noutput:\n  html_document:\n    widescreen: true\n---\n")
                .unwrap()
                .front;
        assert_eq!(
            front.warnings(),
            vec![HeaderWarning::IgnoredOption {
                key: "widescreen".into(),
                kind: OutputKind::HtmlDocument
            }]
        );
    }

    #[test]
    fn scalar_forms() {
        let front = parse_front_matter(
            "---\ntitle: 'It''s'\nauthor: Jane Doe # comment\ndate: \"a \\\"q\\\"\"\n---\n",
        )
        .unwrap()
        .front;
        assert_eq!(front.title.as_deref(), Some("It's"));
        assert_eq!(front.author.as_deref(), Some("Jane Doe"));
        assert_eq!(front.date.as_deref(), Some("a \"q\""));
    }

    #[test]
    fn shared_header_file() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(load_shared_header(dir.path()).unwrap(), None);
        fs::write(dir.path().join(SHARED_HEADER_FILE), "toc: true\n").unwrap();
        let shared = load_shared_header(dir.path()).unwrap().unwrap();
        assert!(shared.outputs()[0].toc);
        fs::write(dir.path().join(SHARED_HEADER_FILE), "fig_width: -1\n").unwrap();
        match load_shared_header(dir.path()) {
            Err(SharedHeaderError::Malformed { err, .. }) => assert_eq!(err.line, 1),
            other => panic!("expected malformed header, got {other:?}"),
        }
    }

    #[test]
    fn merge_examples() {
        let shared = parse_header_body("toc: true", 1).unwrap();
        let local = parse_header_body("title: A", 1).unwrap();
        let merged = merge_headers(&shared, &local);
        assert_eq!(merged.title.as_deref(), Some("A"));
        assert!(merged.outputs()[0].toc);

        let shared = parse_header_body("title: S", 1).unwrap();
        let local = parse_header_body("title: L", 1).unwrap();
        assert_eq!(merge_headers(&shared, &local).title.as_deref(), Some("L"));

        let shared = parse_header_body("output: html_slides", 1).unwrap();
        let local = parse_header_body("output: html_document", 1).unwrap();
        let kinds: Vec<_> = merge_headers(&shared, &local)
            .outputs()
            .iter()
            .map(|o| o.kind)
            .collect();
        assert_eq!(kinds, vec![OutputKind::HtmlDocument]);
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        "[ -~]{0,16}".prop_map(|s| s.trim().to_string())
    }

    fn options_strategy() -> impl Strategy<Value = OutputOptions> {
        (
            proptest::option::of(any::<bool>()),
            proptest::option::of("[a-z][a-z0-9_-]{0,8}"),
            proptest::option::of(0.01f64..100.0),
            proptest::option::of(0.01f64..100.0),
            proptest::option::of(any::<bool>()),
            proptest::option::of(prop_oneof![
                Just(Transition::Default),
                Just(Transition::Slower),
                Just(Transition::Faster)
            ]),
            proptest::option::of(text_strategy()),
        )
            .prop_map(
                |(toc, theme, fw, fh, wide, transition, text_size)| OutputOptions {
                    toc,
                    theme,
                    fig_width: fw,
                    fig_height: fh,
                    widescreen: wide,
                    transition,
                    text_size,
                    bullet: None,
                },
            )
    }

    fn front_strategy() -> impl Strategy<Value = FrontMatter> {
        (
            proptest::option::of(text_strategy()),
            proptest::option::of(text_strategy()),
            proptest::option::of(text_strategy()),
            proptest::option::of("[a-z]{1,8}\\.bib"),
            options_strategy(),
            proptest::option::of(proptest::collection::vec(
                (
                    prop_oneof![Just(OutputKind::HtmlDocument), Just(OutputKind::HtmlSlides)],
                    options_strategy(),
                ),
                1..=2,
            )),
            proptest::collection::btree_map("x[a-z]{1,6}", text_strategy(), 0..3),
        )
            .prop_map(|(title, author, date, bib, defaults, entries, extra)| {
                let entries = entries.map(|list| {
                    let mut out: Vec<OutputEntry> = Vec::new();
                    for (kind, options) in list {
                        if !out.iter().any(|e| e.kind == kind) {
                            out.push(OutputEntry { kind, options });
                        }
                    }
                    out
                });
                FrontMatter {
                    title,
                    author,
                    date,
                    bibliography: bib.map(PathBuf::from),
                    logo: None,
                    output_defaults: defaults,
                    output_entries: entries,
                    extra: extra
                        .into_iter()
                        .map(|(k, v)| (k, HeaderValue::Scalar(v)))
                        .collect(),
                }
            })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_round_trips(front in front_strategy()) {
            let text = front.to_header_text();
            let reparsed = parse_header_body(&text, 1).unwrap();
            prop_assert_eq!(reparsed, front);
        }

        #[test]
        fn merge_is_idempotent_with_defaults_as_identity(front in front_strategy()) {
            prop_assert_eq!(merge_headers(&front, &front), front.clone());
            prop_assert_eq!(merge_headers(&FrontMatter::default(), &front), front);
        }

        #[test]
        fn parse_is_total(text in "(---\n)?([ -~]{0,20}\n){0,8}(---\n)?[ -~]{0,10}") {
            let _ = parse_front_matter(&text);
        }
    }
}
