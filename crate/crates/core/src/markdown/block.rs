//! Line-oriented block segmentation.

use super::ast::{Block, BlockKind, Inline, Span, Table};
use super::inline::parse_inlines;
use super::{tags, ParseError, ParseOptions};

/// Structural tags that start a raw HTML block when they open a line.
const BLOCK_HTML_TAGS: &[&str] = &[
    "address",
    "article",
    "aside",
    "audio",
    "blockquote",
    "canvas",
    "center",
    "details",
    "dialog",
    "div",
    "dl",
    "fieldset",
    "figcaption",
    "figure",
    "footer",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hr",
    "iframe",
    "img",
    "main",
    "nav",
    "ol",
    "p",
    "pre",
    "script",
    "section",
    "style",
    "summary",
    "table",
    "ul",
    "video",
];

/// Parses `body` into blocks. `start_line` is the source line of the first
/// body line, so spans refer to the original file.
pub fn parse_blocks(
    body: &str,
    start_line: usize,
    opts: &ParseOptions,
) -> Result<Vec<Block>, ParseError> {
    let body = body.replace("\r\n", "\n");
    let lines: Vec<&str> = body.split('\n').collect();
    BlockParser {
        lines: &lines,
        first_line: start_line,
        opts,
    }
    .parse()
}

struct BlockParser<'a> {
    lines: &'a [&'a str],
    first_line: usize,
    opts: &'a ParseOptions,
}

struct FenceOpen<'a> {
    ticks: usize,
    info: &'a str,
}

#[derive(Clone, Copy)]
struct ListMarker {
    ordered: bool,
    number: u64,
    /// Byte offset where the item content starts.
    content: usize,
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start_matches(' ').len()
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

fn fence_open(line: &str) -> Option<FenceOpen<'_>> {
    if indent_of(line) > 3 {
        return None;
    }
    let rest = line.trim_start_matches(' ');
    let ticks = rest.len() - rest.trim_start_matches('`').len();
    if ticks < 3 {
        return None;
    }
    let info = rest[ticks..].trim();
    if info.contains('`') {
        return None;
    }
    Some(FenceOpen { ticks, info })
}

fn is_fence_close(line: &str, ticks: usize) -> bool {
    if indent_of(line) > 3 {
        return false;
    }
    let rest = line.trim();
    rest.len() >= ticks && rest.chars().all(|c| c == '`')
}

fn setext_level(line: &str) -> Option<u8> {
    if indent_of(line) > 3 {
        return None;
    }
    let rest = line.trim();
    if rest.len() >= 3 && rest.chars().all(|c| c == '=') {
        Some(1)
    } else if rest.len() >= 3 && rest.chars().all(|c| c == '-') {
        Some(2)
    } else {
        None
    }
}

fn atx(line: &str) -> Option<(u8, &str)> {
    let hashes = line.len() - line.trim_start_matches('#').len();
    if !(1..=6).contains(&hashes) {
        return None;
    }
    let rest = &line[hashes..];
    if rest.is_empty() {
        return Some((hashes as u8, ""));
    }
    rest.strip_prefix(' ')
        .map(|text| (hashes as u8, text.trim()))
}

fn list_marker(line: &str) -> Option<ListMarker> {
    let indent = indent_of(line);
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let bytes = rest.as_bytes();
    let (ordered, number, width) = match bytes.first()? {
        b'*' | b'-' | b'+' => (false, 0, 1),
        b'#' if bytes.get(1) == Some(&b'.') => (true, 1, 2),
        b'0'..=b'9' => {
            let digits = bytes.iter().take_while(|b| b.is_ascii_digit()).count();
            if digits > 9 || bytes.get(digits) != Some(&b'.') {
                return None;
            }
            (true, rest[..digits].parse().ok()?, digits + 1)
        }
        _ => return None,
    };
    match bytes.get(width) {
        Some(b' ') => Some(ListMarker {
            ordered,
            number,
            content: indent + width + 1,
        }),
        None => Some(ListMarker {
            ordered,
            number,
            content: indent + width,
        }),
        _ => None,
    }
}

fn is_quote(line: &str) -> bool {
    indent_of(line) <= 3 && line.trim_start().starts_with('>')
}

fn starts_raw_html(line: &str) -> bool {
    let Some(rest) = line.strip_prefix('<') else {
        return false;
    };
    if rest.starts_with("!--") {
        return true;
    }
    let rest = rest.strip_prefix('/').unwrap_or(rest);
    let name_len = rest
        .bytes()
        .take_while(|b| b.is_ascii_alphanumeric())
        .count();
    let name = rest[..name_len].to_ascii_lowercase();
    if !BLOCK_HTML_TAGS.contains(&name.as_str()) {
        return false;
    }
    matches!(
        rest[name_len..].chars().next(),
        None | Some('>' | ' ' | '/' | '\t')
    )
}

/// Hyphen runs (char column ranges) of a table rule line, if it is one.
fn hyphen_runs(line: &str) -> Option<Vec<(usize, usize)>> {
    let line = line.trim_end();
    if line.is_empty() || !line.chars().all(|c| c == '-' || c == ' ') {
        return None;
    }
    let mut runs = Vec::new();
    let mut start = None;
    for (i, c) in line.chars().enumerate() {
        match (c, start) {
            ('-', None) => start = Some(i),
            (' ', Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, line.chars().count()));
    }
    if runs.iter().all(|(s, e)| e - s >= 3) {
        Some(runs)
    } else {
        None
    }
}

fn is_column_rule(line: &str) -> bool {
    hyphen_runs(line).is_some_and(|runs| runs.len() >= 2)
}

fn is_rule(line: &str) -> bool {
    hyphen_runs(line).is_some()
}

impl BlockParser<'_> {
    fn line_no(&self, idx: usize) -> usize {
        self.first_line + idx
    }

    fn get(&self, idx: usize) -> Option<&str> {
        self.lines.get(idx).copied()
    }

    fn inlines(&self, text: &str) -> Vec<Inline> {
        parse_inlines(text, self.opts)
    }

    fn parse(&self) -> Result<Vec<Block>, ParseError> {
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < self.lines.len() {
            if is_blank(self.lines[i]) {
                i += 1;
                continue;
            }
            let (block, next) = self.block_at(i)?;
            debug_assert!(next > i);
            blocks.push(block);
            i = next;
        }
        Ok(blocks)
    }

    /// Parses one block starting at the non-blank line `i`.
    fn block_at(&self, i: usize) -> Result<(Block, usize), ParseError> {
        let line = self.lines[i];
        if let Some(fence) = fence_open(line) {
            return self.fence(i, fence);
        }
        if let Some(level) = self.get(i + 1).and_then(setext_level) {
            let kind = BlockKind::Heading {
                level,
                inlines: self.inlines(line.trim()),
                attrs: Vec::new(),
            };
            return Ok((self.block(kind, i, i + 1), i + 2));
        }
        if let Some((level, text)) = atx(line) {
            let (text, attrs) = split_attrs(text);
            let kind = BlockKind::Heading {
                level,
                inlines: self.inlines(text),
                attrs,
            };
            return Ok((self.block(kind, i, i), i + 1));
        }
        if let Some(marker) = list_marker(line) {
            return self.list(i, marker);
        }
        if is_quote(line) {
            return self.quote(i);
        }
        if let Some(found) = self.table(i) {
            return Ok(found);
        }
        if starts_raw_html(line) {
            let end = self.until_blank(i);
            let text = self.lines[i..end].join("\n");
            // Unbalanced markup is shown as prose rather than breaking the page.
            if tags::is_balanced(&text) {
                return Ok((self.block(BlockKind::RawHtml(text), i, end - 1), end));
            }
        }
        Ok(self.paragraph(i))
    }

    fn block(&self, kind: BlockKind, first: usize, last: usize) -> Block {
        Block::new(kind, Span::new(self.line_no(first), self.line_no(last)))
    }

    fn until_blank(&self, i: usize) -> usize {
        (i..self.lines.len())
            .find(|&j| is_blank(self.lines[j]))
            .unwrap_or(self.lines.len())
    }

    fn fence(&self, i: usize, open: FenceOpen<'_>) -> Result<(Block, usize), ParseError> {
        let close = (i + 1..self.lines.len())
            .find(|&j| is_fence_close(self.lines[j], open.ticks))
            .ok_or(ParseError::UnterminatedFence {
                line: self.line_no(i),
            })?;
        let code = self.lines[i + 1..close].join("\n");
        let kind = match open
            .info
            .strip_prefix('{')
            .and_then(|rest| rest.strip_suffix('}'))
        {
            Some(options) => BlockKind::CodeChunk {
                options_raw: options.trim().to_string(),
                code,
            },
            None => BlockKind::FencedCode(code),
        };
        Ok((self.block(kind, i, close), close + 1))
    }

    /// Whether line `j` begins a construct that interrupts a paragraph.
    fn interrupts(&self, j: usize) -> bool {
        let line = self.lines[j];
        fence_open(line).is_some()
            || atx(line).is_some()
            || list_marker(line).is_some()
            || is_quote(line)
            || starts_raw_html(line)
            || self.get(j + 1).is_some_and(|next| {
                !is_blank(line) && (setext_level(next).is_some() || is_column_rule(next))
            })
    }

    fn paragraph(&self, i: usize) -> (Block, usize) {
        let mut end = i + 1;
        while end < self.lines.len() && !is_blank(self.lines[end]) && !self.interrupts(end) {
            end += 1;
        }
        let text = self.lines[i..end]
            .iter()
            .map(|l| l.trim())
            .collect::<Vec<_>>()
            .join("\n");
        let kind = BlockKind::Paragraph(self.inlines(&text));
        (self.block(kind, i, end - 1), end)
    }

    fn list(&self, i: usize, first: ListMarker) -> Result<(Block, usize), ParseError> {
        let mut items = Vec::new();
        let mut j = i;
        let mut marker = first;
        let mut last_line;
        loop {
            let mut item_lines: Vec<&str> = vec![&self.lines[j][marker.content..]];
            let mut k = j + 1;
            while k < self.lines.len() {
                let line = self.lines[k];
                if is_blank(line) {
                    let next = (k..self.lines.len()).find(|&n| !is_blank(self.lines[n]));
                    match next {
                        Some(n) if indent_of(self.lines[n]) >= 2 => {
                            item_lines.extend(self.lines[k..n].iter().map(|_| ""));
                            k = n;
                            continue;
                        }
                        _ => break,
                    }
                }
                let indent = indent_of(line);
                if indent >= 2 {
                    item_lines.push(&line[indent.min(marker.content)..]);
                } else if list_marker(line).is_some()
                    || fence_open(line).is_some()
                    || atx(line).is_some()
                    || is_quote(line)
                    || starts_raw_html(line)
                {
                    break;
                } else {
                    item_lines.push(line);
                }
                k += 1;
            }
            let item = BlockParser {
                lines: &item_lines,
                first_line: self.line_no(j),
                opts: self.opts,
            }
            .parse()?;
            items.push(item);
            last_line = k - 1;

            let next = (k..self.lines.len()).find(|&n| !is_blank(self.lines[n]));
            match next.and_then(|n| list_marker(self.lines[n]).map(|m| (n, m))) {
                Some((n, m)) if m.ordered == marker.ordered && indent_of(self.lines[n]) < 2 => {
                    j = n;
                    marker = m;
                }
                _ => break,
            }
        }
        let kind = if first.ordered {
            BlockKind::OrderedList {
                start: first.number,
                items,
            }
        } else {
            BlockKind::BulletList(items)
        };
        Ok((self.block(kind, i, last_line), last_line + 1))
    }

    fn quote(&self, i: usize) -> Result<(Block, usize), ParseError> {
        let mut end = i;
        let mut inner = Vec::new();
        while end < self.lines.len() && is_quote(self.lines[end]) {
            let rest = self.lines[end].trim_start().strip_prefix('>').unwrap_or("");
            inner.push(rest.strip_prefix(' ').unwrap_or(rest));
            end += 1;
        }
        let blocks = BlockParser {
            lines: &inner,
            first_line: self.line_no(i),
            opts: self.opts,
        }
        .parse()?;
        Ok((self.block(BlockKind::BlockQuote(blocks), i, end - 1), end))
    }

    fn table(&self, i: usize) -> Option<(Block, usize)> {
        let header_idx = match self.get(i + 1) {
            Some(next) if is_column_rule(next) && !is_rule(self.lines[i]) => i,
            _ => {
                let leading = is_rule(self.lines[i])
                    && self.get(i + 1).is_some_and(|l| !is_blank(l) && !is_rule(l))
                    && self.get(i + 2).is_some_and(is_column_rule);
                if !leading {
                    return None;
                }
                i + 1
            }
        };
        let columns = hyphen_runs(self.lines[header_idx + 1])?;
        let mut k = header_idx + 2;
        let mut rows = Vec::new();
        while k < self.lines.len() && !is_blank(self.lines[k]) && !is_rule(self.lines[k]) {
            rows.push(self.cells(self.lines[k], &columns));
            k += 1;
        }
        let last = if k < self.lines.len() && is_rule(self.lines[k]) {
            k
        } else {
            k - 1
        };
        let table = Table {
            header: self.cells(self.lines[header_idx], &columns),
            rows,
        };
        Some((self.block(BlockKind::Table(table), i, last), last + 1))
    }

    fn cells(&self, line: &str, columns: &[(usize, usize)]) -> Vec<Vec<Inline>> {
        let chars: Vec<char> = line.chars().collect();
        (0..columns.len())
            .map(|c| {
                let start = if c == 0 { 0 } else { columns[c].0 };
                let end = columns.get(c + 1).map_or(chars.len(), |next| next.0);
                let start = start.min(chars.len());
                let end = end.clamp(start, chars.len());
                let text: String = chars[start..end].iter().collect();
                self.inlines(text.trim())
            })
            .collect()
    }
}

/// Splits a trailing `{.a .b}` from heading text and drops closing `#`s.
fn split_attrs(text: &str) -> (&str, Vec<String>) {
    let mut text = text.trim_end();
    let mut attrs = Vec::new();
    if text.ends_with('}') {
        if let Some(open) = text.rfind('{') {
            let inner = &text[open + 1..text.len() - 1];
            let tokens: Vec<&str> = inner.split_whitespace().collect();
            if !tokens.is_empty()
                && tokens
                    .iter()
                    .all(|t| t.starts_with('.') || t.starts_with('#'))
            {
                attrs = tokens
                    .iter()
                    .filter_map(|t| t.strip_prefix('.'))
                    .filter(|t| !t.is_empty())
                    .map(str::to_string)
                    .collect();
                text = text[..open].trim_end();
            }
        }
    }
    let stripped = text.trim_end_matches('#');
    if stripped.len() < text.len() && (stripped.is_empty() || stripped.ends_with(' ')) {
        text = stripped.trim_end();
    }
    (text, attrs)
}
