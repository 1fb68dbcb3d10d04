#![allow(dead_code)]

use std::path::Path;

use weave_core::html::{render_body, RenderConfig};
use weave_core::kernel::{KernelRegistry, Timeouts};
use weave_core::render::{execute, prepare, weave_prepared, RenderOptions};
use weave_core::weave::WovenDocument;

/// Elements that never have a closing tag.
const VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track",
    "wbr",
];

/// Checks that every element opened in `html` is closed in order. Text
/// inside `<script>` and `<style>` is skipped, as are comments and the
/// doctype. Returns a description of the first problem.
pub fn check_balanced(html: &str) -> Result<(), String> {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = html;
    while let Some(open) = rest.find('<') {
        rest = &rest[open..];
        if let Some(after) = rest.strip_prefix("<!--") {
            let end = after.find("-->").ok_or("unterminated comment")?;
            rest = &after[end + 3..];
            continue;
        }
        if rest.starts_with("<!") {
            let end = rest.find('>').ok_or("unterminated declaration")?;
            rest = &rest[end + 1..];
            continue;
        }
        let end =
            tag_end(rest).ok_or_else(|| format!("unterminated tag near {:?}", snippet(rest)))?;
        let tag = &rest[1..end];
        rest = &rest[end + 1..];
        let closing = tag.starts_with('/');
        let name: String = tag
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        if name.is_empty() {
            return Err(format!("bare '<' before {:?}", snippet(rest)));
        }
        if closing {
            match stack.pop() {
                Some(top) if top == name => {}
                Some(top) => return Err(format!("</{name}> closes <{top}>")),
                None => return Err(format!("</{name}> without an opener")),
            }
        } else if !VOID.contains(&name.as_str()) && !tag.ends_with('/') {
            if name == "script" || name == "style" {
                let close = format!("</{name}>");
                let at = rest
                    .find(&close)
                    .ok_or_else(|| format!("<{name}> never closed"))?;
                rest = &rest[at + close.len()..];
            } else {
                stack.push(name);
            }
        }
    }
    match stack.pop() {
        Some(top) => Err(format!("<{top}> never closed")),
        None => Ok(()),
    }
}

/// Index of the `>` ending the tag at the start of `s`, skipping quoted
/// attribute values.
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

fn snippet(s: &str) -> String {
    s.chars().take(40).collect()
}

/// Prepares, executes and weaves a document file with the builtin kernels.
pub fn weave_file(path: &Path) -> WovenDocument {
    let registry = KernelRegistry::with_builtins();
    let opts = RenderOptions::default();
    let mut prepared = prepare(path, &registry, &opts).expect("prepare");
    let figures = tempfile::tempdir().unwrap();
    let executed =
        execute(&prepared, &registry, figures.path(), Timeouts::default()).expect("execute");
    weave_prepared(&mut prepared, &executed, false).expect("weave")
}

pub fn body_html(path: &Path) -> String {
    let woven = weave_file(path);
    let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
    render_body(
        &woven.blocks,
        &RenderConfig::document(&format!("{stem}_files")),
    )
}
