//! Tag bookkeeping for raw HTML. A raw fragment is passed through only when
//! its tags nest properly, so user markup can never unbalance the page.

/// Elements that never take a closing tag.
pub const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track",
    "wbr",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tag {
    Open(String),
    Close(String),
    /// Void element or `<x/>`.
    Empty,
}

/// Classifies a single tag such as `<span class="a">` or `</span>`.
pub fn classify(tag: &str) -> Option<Tag> {
    let inner = tag.strip_prefix('<')?.strip_suffix('>')?;
    let (closing, body) = match inner.strip_prefix('/') {
        Some(rest) => (true, rest),
        None => (false, inner),
    };
    let name: String = body
        .chars()
        .take_while(char::is_ascii_alphanumeric)
        .collect::<String>()
        .to_ascii_lowercase();
    if name.is_empty() {
        return None;
    }
    Some(if closing {
        Tag::Close(name)
    } else if VOID_ELEMENTS.contains(&name.as_str()) || body.ends_with('/') {
        Tag::Empty
    } else {
        Tag::Open(name)
    })
}

/// Index of the `>` ending the tag that starts `s`, skipping quoted values.
fn tag_end(s: &str) -> Option<usize> {
    let mut quote = None;
    for (i, c) in s.char_indices().skip(1) {
        match (quote, c) {
            (None, '"' | '\'') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, '>') => return Some(i),
            _ => {}
        }
    }
    None
}

/// True when every element opened in `fragment` is closed in order.
/// Comments and declarations are skipped and `<script>`/`<style>` bodies are opaque.
pub fn is_balanced(fragment: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = fragment;
    while let Some(at) = rest.find('<') {
        rest = &rest[at..];
        if let Some(after) = rest.strip_prefix("<!--") {
            match after.find("-->") {
                Some(end) => rest = &after[end + 3..],
                None => return false,
            }
            continue;
        }
        if rest.starts_with("<!") {
            match rest.find('>') {
                Some(end) => rest = &rest[end + 1..],
                None => return false,
            }
            continue;
        }
        let Some(end) = tag_end(rest) else {
            return false;
        };
        let tag = &rest[..=end];
        rest = &rest[end + 1..];
        match classify(tag) {
            // A stray '<' would be read as markup by a browser too.
            None => return false,
            Some(Tag::Empty) => {}
            Some(Tag::Open(name)) if name == "script" || name == "style" => {
                let close = format!("</{name}>");
                match rest.to_ascii_lowercase().find(&close) {
                    Some(at) => rest = &rest[at + close.len()..],
                    None => return false,
                }
            }
            Some(Tag::Open(name)) => stack.push(name),
            Some(Tag::Close(name)) => {
                if stack.pop().as_deref() != Some(name.as_str()) {
                    return false;
                }
            }
        }
    }
    stack.is_empty()
}

/// Indices of the tags in `tags` that pair up. Unmatched opens and closes
/// are left out; a close that does not match the innermost open is dropped
/// rather than closing anything.
pub fn matched(tags: &[Option<Tag>]) -> Vec<bool> {
    let mut keep = vec![false; tags.len()];
    let mut stack: Vec<(usize, &str)> = Vec::new();
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Some(Tag::Empty) => keep[i] = true,
            Some(Tag::Open(name)) => stack.push((i, name)),
            Some(Tag::Close(name)) => {
                if let Some(&(open, top)) = stack.last() {
                    if top == name {
                        stack.pop();
                        keep[open] = true;
                        keep[i] = true;
                    }
                }
            }
            None => {}
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifies_tags() {
        assert_eq!(
            classify("<span class=\"a\">"),
            Some(Tag::Open("span".into()))
        );
        assert_eq!(classify("</SPAN>"), Some(Tag::Close("span".into())));
        assert_eq!(classify("<br>"), Some(Tag::Empty));
        assert_eq!(classify("<x/>"), Some(Tag::Empty));
        assert_eq!(classify("<>"), None);
    }

    #[test]
    fn balance() {
        assert!(is_balanced("<div class=\"x\">\n*not parsed*\n</div>"));
        assert!(is_balanced("<!-- <div> -->"));
        assert!(is_balanced("<!DOCTYPE html>\n<html><body></body></html>"));
        assert!(is_balanced("<script>if (a < b) {}</script>"));
        assert!(!is_balanced("<div>"));
        assert!(!is_balanced("<div><p></div></p>"));
        assert!(!is_balanced("<div> a < b </div>"));
    }

    #[test]
    fn matching_drops_strays() {
        let tags = vec![
            classify("<a>"),
            classify("<b>"),
            classify("</b>"),
            classify("</i>"),
            classify("<br>"),
        ];
        assert_eq!(matched(&tags), vec![false, true, true, false, true]);
    }
}
