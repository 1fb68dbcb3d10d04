//! Inline scanner. Left to right, longest delimiter first; anything that does
//! not close properly is kept as literal text.

use super::ast::Inline;
use super::tags::{self, Tag};
use super::ParseOptions;

/// Tags passed through verbatim when they appear inside prose.
const INLINE_HTML_TAGS: &[&str] = &[
    "a", "abbr", "b", "br", "cite", "code", "del", "em", "font", "i", "img", "ins", "kbd", "mark",
    "q", "s", "small", "span", "strong", "sub", "sup", "u", "var",
];

pub fn parse_inlines(text: &str, opts: &ParseOptions) -> Vec<Inline> {
    let chars: Vec<char> = text.chars().collect();
    Scanner {
        chars: &chars,
        opts,
    }
    .parse(0, chars.len())
}

struct Scanner<'a> {
    chars: &'a [char],
    opts: &'a ParseOptions,
}

struct Buffer {
    out: Vec<Inline>,
    text: String,
}

impl Buffer {
    fn push(&mut self, inline: Inline) {
        self.flush();
        self.out.push(inline);
    }

    fn flush(&mut self) {
        if !self.text.is_empty() {
            self.out.push(Inline::Text(std::mem::take(&mut self.text)));
        }
    }

    fn finish(mut self) -> Vec<Inline> {
        self.flush();
        self.out
    }
}

impl Scanner<'_> {
    fn at(&self, i: usize) -> Option<char> {
        self.chars.get(i).copied()
    }

    fn is_space(&self, i: usize) -> bool {
        self.at(i).is_none_or(char::is_whitespace)
    }

    fn is_alnum(&self, i: usize) -> bool {
        self.at(i).is_some_and(char::is_alphanumeric)
    }

    fn run_len(&self, i: usize, end: usize, c: char) -> usize {
        self.chars[i..end].iter().take_while(|&&x| x == c).count()
    }

    fn parse(&self, start: usize, end: usize) -> Vec<Inline> {
        let mut buf = Buffer {
            out: Vec::new(),
            text: String::new(),
        };
        let mut i = start;
        while i < end {
            let c = self.chars[i];
            let parsed = match c {
                '\\' => match self.at(i + 1) {
                    Some(next) if i + 1 < end && next.is_ascii_punctuation() => {
                        buf.text.push(next);
                        i += 2;
                        continue;
                    }
                    _ => None,
                },
                '`' => {
                    let n = self.run_len(i, end, '`');
                    match self.code_span(i, end, n) {
                        Some(found) => Some(found),
                        None => {
                            buf.text.extend(std::iter::repeat_n('`', n));
                            i += n;
                            continue;
                        }
                    }
                }
                '*' | '_' => {
                    let n = self.run_len(i, end, c);
                    match self.emphasis(i, end, c, n) {
                        Some(found) => Some(found),
                        None => {
                            buf.text.extend(std::iter::repeat_n(c, n));
                            i += n;
                            continue;
                        }
                    }
                }
                '~' => {
                    if self.at(i + 1) == Some('~') {
                        self.delimited(i, end, "~~", true)
                            .map(|(inner, next)| (Inline::Strikeout(inner), next))
                    } else {
                        self.delimited(i, end, "~", false)
                            .map(|(inner, next)| (Inline::Subscript(inner), next))
                    }
                }
                '^' => self
                    .delimited(i, end, "^", false)
                    .map(|(inner, next)| (Inline::Superscript(inner), next)),
                '$' => self.math(i, end),
                '!' if self.at(i + 1) == Some('[') && i + 1 < end => self.image(i, end),
                '[' => self.citation(i, end).or_else(|| self.link(i, end)),
                '<' => self.raw_html(i, end),
                _ => None,
            };
            match parsed {
                Some((inline, next)) => {
                    buf.push(inline);
                    i = next;
                }
                None => {
                    buf.text.push(c);
                    i += 1;
                }
            }
        }
        pair_raw_html(buf.finish())
    }

    /// Index just past the code span opening at `i`, or `None`.
    fn skip_code_span(&self, i: usize, end: usize) -> Option<usize> {
        let n = self.run_len(i, end, '`');
        let mut j = i + n;
        while j < end {
            if self.chars[j] == '`' {
                let m = self.run_len(j, end, '`');
                if m == n {
                    return Some(j + m);
                }
                j += m;
            } else {
                j += 1;
            }
        }
        None
    }

    fn code_span(&self, i: usize, end: usize, n: usize) -> Option<(Inline, usize)> {
        let next = self.skip_code_span(i, end)?;
        let mut content: String = self.chars[i + n..next - n].iter().collect();
        if content.len() >= 2 && content.starts_with(' ') && content.ends_with(' ') {
            content = content[1..content.len() - 1].to_string();
        }
        if let Some((lang, expr)) = content.split_once(' ') {
            let expr = expr.trim();
            if self.opts.inline_langs.contains(lang) && !expr.is_empty() {
                return Some((
                    Inline::InlineEval {
                        lang: lang.to_string(),
                        expr: expr.to_string(),
                    },
                    next,
                ));
            }
        }
        Some((Inline::Code(content), next))
    }

    fn emphasis(&self, i: usize, end: usize, d: char, run: usize) -> Option<(Inline, usize)> {
        if d == '_' && self.is_alnum(i.wrapping_sub(1)) && i > 0 {
            return None;
        }
        if run >= 3 {
            if let Some((inner, next)) = self.emph_with_width(i, end, d, 3) {
                return Some((Inline::Strong(vec![Inline::Emph(inner)]), next));
            }
        }
        if run >= 2 {
            if let Some((inner, next)) = self.emph_with_width(i, end, d, 2) {
                return Some((Inline::Strong(inner), next));
            }
        }
        if run == 1 {
            return self
                .emph_with_width(i, end, d, 1)
                .map(|(inner, next)| (Inline::Emph(inner), next));
        }
        None
    }

    fn emph_with_width(
        &self,
        i: usize,
        end: usize,
        d: char,
        width: usize,
    ) -> Option<(Vec<Inline>, usize)> {
        let open_end = i + width;
        if open_end >= end || self.is_space(open_end) {
            return None;
        }
        let mut j = open_end;
        while j < end {
            let c = self.chars[j];
            if c == '\\' {
                j += 2;
                continue;
            }
            if c == '`' {
                match self.skip_code_span(j, end) {
                    Some(next) => {
                        j = next;
                        continue;
                    }
                    None => {
                        j += self.run_len(j, end, '`');
                        continue;
                    }
                }
            }
            if c == d {
                let run = self.run_len(j, end, d);
                let closes =
                    j > open_end && !self.is_space(j - 1) && (d != '_' || !self.is_alnum(j + run));
                if closes && run == width {
                    let inner = self.parse(open_end, j);
                    return Some((inner, j + width));
                }
                if closes && width == 1 && run >= 3 {
                    // `*a **b***`: the last delimiter closes the outer emphasis.
                    let inner = self.parse(open_end, j + run - 1);
                    return Some((inner, j + run));
                }
                j += run;
                continue;
            }
            j += 1;
        }
        None
    }

    /// Spans like `^x^`, `~x~` (no whitespace inside) or `~~x y~~`.
    fn delimited(
        &self,
        i: usize,
        end: usize,
        delim: &str,
        allow_space: bool,
    ) -> Option<(Vec<Inline>, usize)> {
        let d: Vec<char> = delim.chars().collect();
        let open_end = i + d.len();
        if open_end >= end || self.is_space(open_end) {
            return None;
        }
        let mut j = open_end;
        while j + d.len() <= end {
            let c = self.chars[j];
            if c == '\\' {
                j += 2;
                continue;
            }
            if !allow_space && c.is_whitespace() {
                return None;
            }
            if self.chars[j..j + d.len()] == d[..] && j > open_end && !self.is_space(j - 1) {
                // `~~` must not be read as two subscript delimiters.
                if d.len() == 1 && self.at(j + 1) == Some(d[0]) && j + 1 < end {
                    return None;
                }
                return Some((self.parse(open_end, j), j + d.len()));
            }
            j += 1;
        }
        None
    }

    fn math(&self, i: usize, end: usize) -> Option<(Inline, usize)> {
        if self.at(i + 1) == Some('$') && i + 1 < end {
            let mut j = i + 2;
            while j + 1 < end {
                if self.chars[j] == '\\' {
                    j += 2;
                    continue;
                }
                if self.chars[j] == '$' && self.chars[j + 1] == '$' {
                    if j == i + 2 {
                        return None;
                    }
                    let tex: String = self.chars[i + 2..j].iter().collect();
                    return Some((Inline::Math { tex, display: true }, j + 2));
                }
                j += 1;
            }
            return None;
        }
        if i + 1 >= end || self.is_space(i + 1) {
            return None;
        }
        let mut j = i + 1;
        while j < end {
            match self.chars[j] {
                '\\' => j += 2,
                '$' => {
                    if !self.is_space(j - 1) && !(j + 1 < end && self.chars[j + 1].is_ascii_digit())
                    {
                        let tex: String = self.chars[i + 1..j].iter().collect();
                        return Some((
                            Inline::Math {
                                tex,
                                display: false,
                            },
                            j + 1,
                        ));
                    }
                    j += 1;
                }
                _ => j += 1,
            }
        }
        None
    }

    /// Index of the `]` matching the `[` at `i`.
    fn close_bracket(&self, i: usize, end: usize) -> Option<usize> {
        let mut depth = 0usize;
        let mut j = i;
        while j < end {
            match self.chars[j] {
                '\\' => {
                    j += 2;
                    continue;
                }
                '`' => {
                    if let Some(next) = self.skip_code_span(j, end) {
                        j = next;
                        continue;
                    }
                }
                '[' => depth += 1,
                ']' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(j);
                    }
                }
                _ => {}
            }
            j += 1;
        }
        None
    }

    /// `(url)` starting at `i`; returns the url and the index past `)`.
    fn destination(&self, i: usize, end: usize) -> Option<(String, usize)> {
        if self.at(i) != Some('(') || i >= end {
            return None;
        }
        let mut depth = 0usize;
        for j in i..end {
            match self.chars[j] {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        let raw: String = self.chars[i + 1..j].iter().collect();
                        let raw = raw.trim();
                        let url = raw
                            .strip_prefix('<')
                            .and_then(|r| r.strip_suffix('>'))
                            .unwrap_or(raw);
                        if url.contains('\n') {
                            return None;
                        }
                        return Some((url.to_string(), j + 1));
                    }
                }
                _ => {}
            }
        }
        None
    }

    fn link(&self, i: usize, end: usize) -> Option<(Inline, usize)> {
        let close = self.close_bracket(i, end)?;
        let (url, next) = self.destination(close + 1, end)?;
        let content = self.parse(i + 1, close);
        if content.is_empty() {
            return None;
        }
        Some((Inline::Link { content, url }, next))
    }

    fn image(&self, i: usize, end: usize) -> Option<(Inline, usize)> {
        let close = self.close_bracket(i + 1, end)?;
        let (src, next) = self.destination(close + 1, end)?;
        let alt: String = self.chars[i + 2..close].iter().collect();
        Some((Inline::Image { alt, src }, next))
    }

    fn citation(&self, i: usize, end: usize) -> Option<(Inline, usize)> {
        if self.at(i + 1) != Some('@') {
            return None;
        }
        let mut j = i + 2;
        while j < end && is_key_char(self.chars[j]) {
            j += 1;
        }
        if j == i + 2 || j >= end || self.chars[j] != ']' {
            return None;
        }
        let key: String = self.chars[i + 2..j].iter().collect();
        Some((Inline::Citation { key }, j + 1))
    }

    fn raw_html(&self, i: usize, end: usize) -> Option<(Inline, usize)> {
        let mut j = i + 1;
        if self.at(j) == Some('/') {
            j += 1;
        }
        let name_start = j;
        while j < end && self.chars[j].is_ascii_alphanumeric() {
            j += 1;
        }
        let name: String = self.chars[name_start..j]
            .iter()
            .collect::<String>()
            .to_ascii_lowercase();
        if !INLINE_HTML_TAGS.contains(&name.as_str()) {
            return None;
        }
        match self.at(j) {
            Some(c) if j < end && (c == '>' || c == '/' || c.is_whitespace()) => {}
            _ => return None,
        }
        let mut quote: Option<char> = None;
        while j < end {
            let c = self.chars[j];
            match quote {
                Some(q) if c == q => quote = None,
                Some(_) => {}
                None if c == '"' || c == '\'' => quote = Some(c),
                None if c == '<' => return None,
                None if c == '>' => {
                    let raw: String = self.chars[i..=j].iter().collect();
                    return Some((Inline::RawHtml(raw), j + 1));
                }
                None => {}
            }
            j += 1;
        }
        None
    }
}

/// Keeps raw tags only where they pair up within this run of inlines; the
/// rest become literal text.
fn pair_raw_html(inlines: Vec<Inline>) -> Vec<Inline> {
    let tags: Vec<Option<Tag>> = inlines
        .iter()
        .map(|inline| match inline {
            Inline::RawHtml(raw) => tags::classify(raw),
            _ => None,
        })
        .collect();
    if tags.iter().all(Option::is_none) {
        return inlines;
    }
    let keep = tags::matched(&tags);
    let mut out: Vec<Inline> = Vec::with_capacity(inlines.len());
    for (inline, keep) in inlines.into_iter().zip(keep) {
        let inline = match inline {
            Inline::RawHtml(raw) if !keep => Inline::Text(raw),
            other => other,
        };
        match (out.last_mut(), inline) {
            (Some(Inline::Text(prev)), Inline::Text(text)) => prev.push_str(&text),
            (_, inline) => out.push(inline),
        }
    }
    out
}

fn is_key_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | ':' | '.' | '/' | '+')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Vec<Inline> {
        parse_inlines(text, &ParseOptions::default())
    }

    fn text(s: &str) -> Inline {
        Inline::Text(s.to_string())
    }

    #[test]
    fn emphasis_and_strong() {
        assert_eq!(parse("*data*"), vec![Inline::Emph(vec![text("data")])]);
        assert_eq!(parse("_data_"), vec![Inline::Emph(vec![text("data")])]);
        assert_eq!(parse("**bold**"), vec![Inline::Strong(vec![text("bold")])]);
        assert_eq!(parse("__bold__"), vec![Inline::Strong(vec![text("bold")])]);
        assert_eq!(
            parse("***both***"),
            vec![Inline::Strong(vec![Inline::Emph(vec![text("both")])])]
        );
        assert_eq!(
            parse("*a **b** c*"),
            vec![Inline::Emph(vec![
                text("a "),
                Inline::Strong(vec![text("b")]),
                text(" c")
            ])]
        );
    }

    #[test]
    fn unmatched_delimiters_are_literal() {
        assert_eq!(parse("a * b"), vec![text("a * b")]);
        assert_eq!(parse("**open"), vec![text("**open")]);
        assert_eq!(parse("snake_case_name"), vec![text("snake_case_name")]);
        assert_eq!(parse("x^2 + y^2"), vec![text("x^2 + y^2")]);
        assert_eq!(parse("cost $5 and $6"), vec![text("cost $5 and $6")]);
        assert_eq!(parse("[not a link]"), vec![text("[not a link]")]);
        assert_eq!(parse("a < b & c"), vec![text("a < b & c")]);
    }

    #[test]
    fn inline_eval_and_code() {
        assert_eq!(
            parse("`r nrow(cars)`"),
            vec![Inline::InlineEval {
                lang: "r".into(),
                expr: "nrow(cars)".into()
            }]
        );
        assert_eq!(
            parse("`nrow(cars)`"),
            vec![Inline::Code("nrow(cars)".into())]
        );
        assert_eq!(parse("`fortran x`"), vec![Inline::Code("fortran x".into())]);
        assert_eq!(parse("`` a`b ``"), vec![Inline::Code("a`b".into())]);
        assert_eq!(parse("`*x*`"), vec![Inline::Code("*x*".into())]);
    }

    #[test]
    fn super_sub_strike() {
        assert_eq!(
            parse("2^10^"),
            vec![text("2"), Inline::Superscript(vec![text("10")])]
        );
        assert_eq!(
            parse("H~2~O"),
            vec![text("H"), Inline::Subscript(vec![text("2")]), text("O")]
        );
        assert_eq!(
            parse("~~gone now~~"),
            vec![Inline::Strikeout(vec![text("gone now")])]
        );
    }

    #[test]
    fn math_is_verbatim() {
        assert_eq!(
            parse("$x^2$"),
            vec![Inline::Math {
                tex: "x^2".into(),
                display: false
            }]
        );
        assert_eq!(
            parse("$$\\sum_i *a*$$"),
            vec![Inline::Math {
                tex: "\\sum_i *a*".into(),
                display: true
            }]
        );
    }

    #[test]
    fn links_images_citations() {
        assert_eq!(
            parse("[RStudio](http://rstudio.com)"),
            vec![Inline::Link {
                content: vec![text("RStudio")],
                url: "http://rstudio.com".into()
            }]
        );
        assert_eq!(
            parse("![a plot](figs/plot.png)"),
            vec![Inline::Image {
                alt: "a plot".into(),
                src: "figs/plot.png".into()
            }]
        );
        assert_eq!(
            parse("see [@smith2014]."),
            vec![
                text("see "),
                Inline::Citation {
                    key: "smith2014".into()
                },
                text(".")
            ]
        );
    }

    #[test]
    fn raw_inline_html() {
        assert_eq!(
            parse("<span class=\"red2\">hot</span>"),
            vec![
                Inline::RawHtml("<span class=\"red2\">".into()),
                text("hot"),
                Inline::RawHtml("</span>".into())
            ]
        );
        assert_eq!(parse("<script>"), vec![text("<script>")]);
    }

    #[test]
    fn escapes() {
        assert_eq!(parse("\\*not\\*"), vec![text("*not*")]);
    }
}
