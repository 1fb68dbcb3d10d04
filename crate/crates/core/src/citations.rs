//! Bibliography files and author-year citations.
//!
//! The accepted file format is a small subset of BibTeX:
//!
//! ```text
//! @article{smith2014,
//!   author = {Smith, A and Jones, B},
//!   year   = 2014,
//!   title  = "A {Title}",
//! }
//! ```
//!
//! `[@smith2014]` renders as `(Smith 2014)` and the reference line reads
//! `Smith 2014. A Title.`

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BibError {
    #[error("cannot read bibliography {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bibliography line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("bibliography line {line}: key '{key}' is defined twice")]
    DuplicateKey { key: String, line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BibEntry {
    pub key: String,
    pub entry_type: String,
    pub author: String,
    pub year: String,
    pub title: String,
    /// Every other field, by lowercase name.
    pub extra: BTreeMap<String, String>,
}

impl BibEntry {
    /// Surname of the first author.
    pub fn first_surname(&self) -> String {
        surname(&self.author)
    }

    pub fn citation_text(&self) -> String {
        let name = self.first_surname();
        let name = if name.is_empty() {
            self.key.as_str()
        } else {
            name.as_str()
        };
        let year = if self.year.is_empty() {
            "n.d."
        } else {
            self.year.as_str()
        };
        format!("{name} {year}")
    }

    pub fn reference_line(&self) -> String {
        let mut line = self.citation_text();
        if !line.ends_with('.') {
            line.push('.');
        }
        let title = strip_braces(&self.title);
        let title = title.trim();
        if !title.is_empty() {
            line.push(' ');
            line.push_str(title);
            if !title.ends_with(['.', '?', '!']) {
                line.push('.');
            }
        }
        line
    }
}

/// One line of the References section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub key: String,
    pub text: String,
}

/// Entries by key plus the keys cited so far, in first-citation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CitationIndex {
    entries: BTreeMap<String, BibEntry>,
    cited: Vec<String>,
}

/// Result of resolving one `[@key]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Resolved(String),
    /// The key is unknown; the text is `[@key]`.
    Unresolved(String),
}

impl Resolution {
    pub fn text(&self) -> &str {
        match self {
            Resolution::Resolved(t) | Resolution::Unresolved(t) => t,
        }
    }
}

impl CitationIndex {
    pub fn new(entries: impl IntoIterator<Item = BibEntry>) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.key.clone(), e)).collect(),
            cited: Vec::new(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&BibEntry> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cited(&self) -> &[String] {
        &self.cited
    }

    /// Formats a citation and records the key on first use.
    pub fn cite(&mut self, key: &str) -> Resolution {
        match self.entries.get(key) {
            Some(entry) => {
                if !self.cited.iter().any(|k| k == key) {
                    self.cited.push(key.to_string());
                }
                Resolution::Resolved(format!("({})", entry.citation_text()))
            }
            None => Resolution::Unresolved(format!("[@{key}]")),
        }
    }

    /// Reference lines for the cited keys, in first-citation order.
    pub fn references(&self) -> Vec<Reference> {
        self.cited
            .iter()
            .filter_map(|key| self.entries.get(key))
            .map(|entry| Reference {
                key: entry.key.clone(),
                text: entry.reference_line(),
            })
            .collect()
    }
}

pub fn load_bibliography(path: &Path) -> Result<CitationIndex, BibError> {
    let text = std::fs::read_to_string(path).map_err(|source| BibError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_bibliography(&text).map(CitationIndex::new)
}

/// Parses bibliography text. Anything outside an `@type{...}` entry is a
/// comment. `@comment`, `@preamble` and `@string` blocks are skipped.
pub fn parse_bibliography(text: &str) -> Result<Vec<BibEntry>, BibError> {
    let mut p = BibParser {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
    };
    let mut entries: Vec<BibEntry> = Vec::new();
    let mut lines: BTreeMap<String, usize> = BTreeMap::new();
    while p.skip_to_at() {
        let start_line = p.line;
        p.bump();
        let entry_type = p.word().to_ascii_lowercase();
        if entry_type.is_empty() {
            return Err(p.error("expected an entry type after '@'"));
        }
        p.skip_ws();
        if p.peek() != Some('{') {
            return Err(p.error(format!("expected '{{' after @{entry_type}")));
        }
        if matches!(entry_type.as_str(), "comment" | "preamble" | "string") {
            p.braced()?;
            continue;
        }
        p.bump();
        p.skip_ws();
        let key = p.take_while(|c| c != ',' && c != '}' && !c.is_whitespace());
        if key.is_empty() {
            return Err(p.error("entry has no key"));
        }
        if lines.contains_key(&key) {
            return Err(BibError::DuplicateKey {
                key,
                line: start_line,
            });
        }
        p.skip_ws();
        if !matches!(p.peek(), Some(',' | '}')) {
            return Err(p.error(format!("expected ',' after key '{key}'")));
        }
        let fields = p.fields()?;
        let mut entry = BibEntry {
            key: key.clone(),
            entry_type,
            author: String::new(),
            year: String::new(),
            title: String::new(),
            extra: BTreeMap::new(),
        };
        for (name, value) in fields {
            match name.as_str() {
                "author" => entry.author = value,
                "year" => entry.year = value,
                "title" => entry.title = value,
                _ => {
                    entry.extra.insert(name, value);
                }
            }
        }
        lines.insert(key, start_line);
        entries.push(entry);
    }
    Ok(entries)
}

struct BibParser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl BibParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> BibError {
        BibError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn skip_to_at(&mut self) -> bool {
        while let Some(c) = self.peek() {
            if c == '@' {
                return true;
            }
            self.bump();
        }
        false
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn take_while(&mut self, keep: impl Fn(char) -> bool) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek().filter(|&c| keep(c)) {
            out.push(c);
            self.bump();
        }
        out
    }

    fn word(&mut self) -> String {
        self.take_while(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    }

    /// A `{...}` group with balanced braces; returns the inside.
    fn braced(&mut self) -> Result<String, BibError> {
        let open_line = self.line;
        self.bump();
        let mut depth = 1;
        let mut out = String::new();
        while let Some(c) = self.bump() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(out);
                    }
                }
                _ => {}
            }
            out.push(c);
        }
        Err(BibError::Parse {
            line: open_line,
            message: "unbalanced braces".into(),
        })
    }

    fn quoted(&mut self) -> Result<String, BibError> {
        let open_line = self.line;
        self.bump();
        let mut depth = 0;
        let mut out = String::new();
        while let Some(c) = self.bump() {
            match c {
                '"' if depth == 0 => return Ok(out),
                '{' => depth += 1,
                '}' if depth > 0 => depth -= 1,
                _ => {}
            }
            out.push(c);
        }
        Err(BibError::Parse {
            line: open_line,
            message: "unterminated quoted value".into(),
        })
    }

    /// Fields after the key, through the entry's closing brace.
    fn fields(&mut self) -> Result<Vec<(String, String)>, BibError> {
        let mut fields = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('}') => {
                    self.bump();
                    return Ok(fields);
                }
                Some(',') => {
                    self.bump();
                    continue;
                }
                None => return Err(self.error("entry is never closed")),
                _ => {}
            }
            let name = self.word().to_ascii_lowercase();
            if name.is_empty() {
                return Err(self.error(format!("unexpected '{}'", self.peek().unwrap_or(' '))));
            }
            self.skip_ws();
            if self.peek() != Some('=') {
                return Err(self.error(format!("expected '=' after field '{name}'")));
            }
            self.bump();
            self.skip_ws();
            let value = match self.peek() {
                Some('{') => self.braced()?,
                Some('"') => self.quoted()?,
                _ => {
                    let bare = self.word();
                    if bare.is_empty() {
                        return Err(self.error(format!("field '{name}' has no value")));
                    }
                    bare
                }
            };
            if fields.iter().any(|(n, _)| n == &name) {
                return Err(self.error(format!("field '{name}' given twice")));
            }
            fields.push((name, collapse_ws(&value)));
            self.skip_ws();
            match self.peek() {
                Some(',') | Some('}') => {}
                None => return Err(self.error("entry is never closed")),
                Some(c) => return Err(self.error(format!("unexpected '{c}' after field value"))),
            }
        }
    }
}

fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_braces(text: &str) -> String {
    text.chars().filter(|&c| c != '{' && c != '}').collect()
}

/// Surname of the first author. `Smith, A` gives `Smith`, `Ann Smith`
/// gives `Smith`, and a braced name such as `{World Bank}` is kept whole.
pub fn surname(authors: &str) -> String {
    let first = split_authors(authors)
        .into_iter()
        .next()
        .unwrap_or_default();
    let first = first.trim();
    if first.starts_with('{') && first.ends_with('}') {
        return strip_braces(first).trim().to_string();
    }
    let name = match first.split_once(',') {
        Some((before, _)) => before.trim().to_string(),
        None => first.split_whitespace().last().unwrap_or("").to_string(),
    };
    strip_braces(&name)
}

/// Splits on ` and ` outside braces.
fn split_authors(authors: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut depth = 0usize;
    let words: Vec<&str> = authors.split_whitespace().collect();
    for word in words {
        if depth == 0 && word.eq_ignore_ascii_case("and") && !current.is_empty() {
            out.push(std::mem::take(&mut current));
            continue;
        }
        depth += word.matches('{').count();
        depth = depth.saturating_sub(word.matches('}').count());
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(word);
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}
